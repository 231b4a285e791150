use std::ops::BitXor;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Packed bit string. Bit `i` is bit `63 - i % 64` of word `i / 64`, so the
/// first bit is the most significant bit of the first word; unused trailing
/// bits are kept at zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Reads `len` bits from packed bytes, MSB first; padding bits must be zero.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(invalid("bytes", format!("{} bytes cannot hold exactly {len} bits", bytes.len())));
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &byte) in bytes.iter().enumerate() {
            words[i / 8] |= (byte as u64) << (56 - 8 * (i % 8));
        }
        let s = Self { words, len };
        let mut masked = s.clone();
        masked.mask_tail();
        if masked != s {
            return Err(invalid("bytes", "trailing pad bits must be zero"));
        }
        Ok(s)
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        let mut s = Self { words, len };
        s.words.resize(len.div_ceil(64), 0);
        s.mask_tail();
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8)).map(|i| (self.words[i / 8] >> (56 - 8 * (i % 8))) as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (63 - i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, v: bool) {
        self.push_bits(v as u64, 1);
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, n: u32) {
        if n == 0 {
            return;
        }
        assert!(n <= 64);
        let value = if n == 64 { value } else { value & ((1u64 << n) - 1) };
        let offset = (self.len % 64) as u32;
        if offset == 0 {
            self.words.push(0);
        }
        let last = self.words.len() - 1;
        let free = 64 - offset;
        if n <= free {
            self.words[last] |= value << (free - n);
        } else {
            self.words[last] |= value >> (n - free);
            self.words.push(value << (64 - (n - free)));
        }
        self.len += n as usize;
    }

    pub fn extend(&mut self, other: &BitString) {
        let full = other.len / 64;
        for &w in &other.words[..full] {
            self.push_bits(w, 64);
        }
        let rest = (other.len % 64) as u32;
        if rest > 0 {
            self.push_bits(other.words[full] >> (64 - rest), rest);
        }
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut out = BitString::zeros(0);
        out.words.reserve(len.div_ceil(64));
        let mut pos = start;
        let end = start + len;
        while pos < end {
            let take = (end - pos).min(64 - pos % 64) as u32;
            let w = self.words[pos / 64] << (pos % 64);
            out.push_bits(w >> (64 - take), take);
            pos += take as usize;
        }
        out
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn mask_tail(&mut self) {
        let rest = self.len % 64;
        if rest > 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - rest);
            }
        }
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        assert_eq!(self.len, rhs.len, "xor of bit strings with different lengths");
        BitString {
            words: self.words.iter().zip(&rhs.words).map(|(a, b)| a ^ b).collect(),
            len: self.len,
        }
    }
}
