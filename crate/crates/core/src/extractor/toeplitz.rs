use super::bits::BitString;
use super::ExtractorConfig;
use crate::error::{Error, Result};

/// Reference product over GF(2), one matrix entry at a time, with
/// `T[i][j] = seed[i - j + h - 1]`.
pub fn toeplitz_hash_naive(l: usize, h: usize, seed: &BitString, input: &BitString) -> Result<BitString> {
    if seed.len() != l + h - 1 {
        return Err(Error::LengthMismatch { expected: l + h - 1, got: seed.len() });
    }
    if input.len() != h {
        return Err(Error::LengthMismatch { expected: h, got: input.len() });
    }
    let mut out = BitString::zeros(l);
    for i in 0..l {
        let mut bit = false;
        for j in 0..h {
            bit ^= seed.get(i + h - 1 - j) & input.get(j);
        }
        out.set(i, bit);
    }
    Ok(out)
}

/// Word-parallel Toeplitz hasher.
///
/// With bit positions read as polynomial degrees, output bit `i` is the
/// coefficient of degree `h - 1 + i` in the carry-less product of the seed and
/// the input, so a block costs about `(h / 64) * (l / 64 + 1)` 64x64 carry-less
/// multiplications. PCLMULQDQ is used when the CPU has it.
#[derive(Debug, Clone)]
pub struct ToeplitzHasher {
    l: usize,
    h: usize,
    m: usize,
    b: u32,
    out_words: usize,
    seed: Vec<u64>,
    /// Product degrees `64 * base ..` are kept, one 128-bit partial product per word index.
    base: usize,
    first_word: usize,
    acc_len: usize,
    hardware: bool,
}

/// Running product of a hash block fed one sample at a time. Input bits are
/// collected a 64-bit word at a time and folded in when the stream moves on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accumulator {
    acc: Vec<u128>,
    pending: u64,
    pending_word: usize,
}

impl ToeplitzHasher {
    pub fn new(cfg: &ExtractorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::build(cfg.l, cfg.h, cfg.m, cfg.b, &cfg.seed, hardware_clmul()))
    }

    /// Same hasher restricted to the portable multiplication routine.
    pub fn new_portable(cfg: &ExtractorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::build(cfg.l, cfg.h, cfg.m, cfg.b, &cfg.seed, false))
    }

    fn build(l: usize, h: usize, m: usize, b: u32, seed: &BitString, hardware: bool) -> Self {
        let first_word = (h - 1) / 64;
        let last_word = (h + l - 2) / 64;
        let base = first_word.saturating_sub(1);
        Self {
            l,
            h,
            m,
            b,
            out_words: l.div_ceil(64),
            seed: seed.words().to_vec(),
            base,
            first_word,
            acc_len: last_word - base + 1,
            hardware,
        }
    }

    pub fn output_bits(&self) -> usize {
        self.l
    }

    pub fn input_bits(&self) -> usize {
        self.h
    }

    pub fn uses_hardware_clmul(&self) -> bool {
        self.hardware
    }

    /// Adds `seed * x * z^(64 * word_index)` to the partial products whose
    /// word index lies in the kept range.
    fn fold(&self, acc: &mut [u128], word_index: usize, x: u64) {
        if x == 0 {
            return;
        }
        let lo_k = self.base.max(word_index);
        let hi_k = (self.base + self.acc_len - 1).min(word_index + self.seed.len() - 1);
        if lo_k > hi_k {
            return;
        }
        let seed = &self.seed[lo_k - word_index..=hi_k - word_index];
        let acc = &mut acc[lo_k - self.base..=hi_k - self.base];
        #[cfg(target_arch = "x86_64")]
        if self.hardware {
            // SAFETY: `hardware` is only set after runtime detection of pclmulqdq.
            unsafe { fold_pclmul(seed, acc, x) };
            return;
        }
        for i in 0..acc.len() {
            acc[i] ^= clmul_portable(seed[i], x);
        }
    }

    /// Words store degree 0 in the most significant bit, so the raw
    /// carry-less product of two words holds degree `p + q` at bit
    /// `126 - p - q`; shifted left by one it is a two-word MSB-first window.
    fn extract(&self, acc: &[u128]) -> BitString {
        let shifted = |i: usize| acc.get(i).map_or(0, |&r| r << 1);
        let prod = |k: usize| {
            let i = k - self.base;
            let hi = (shifted(i) >> 64) as u64;
            if i == 0 {
                hi
            } else {
                hi ^ shifted(i - 1) as u64
            }
        };
        let last = self.base + self.acc_len - 1;
        let at = |k: usize| if k <= last { prod(k) } else { 0 };
        let s = (self.h - 1) % 64;
        let f = self.first_word;
        let mut out: Vec<u64> = (0..self.out_words)
            .map(|w| if s == 0 { at(f + w) } else { (at(f + w) << s) | (at(f + w + 1) >> (64 - s)) })
            .collect();
        let rest = self.l % 64;
        if rest > 0 {
            if let Some(last) = out.last_mut() {
                *last &= !0u64 << (64 - rest);
            }
        }
        BitString::from_words(out, self.l)
    }

    pub fn hash(&self, input: &BitString) -> Result<BitString> {
        if input.len() != self.h {
            return Err(Error::LengthMismatch { expected: self.h, got: input.len() });
        }
        let mut acc = vec![0u128; self.acc_len];
        for (wi, &word) in input.words().iter().enumerate() {
            self.fold(&mut acc, wi, word);
        }
        Ok(self.extract(&acc))
    }

    pub fn new_accumulator(&self) -> Accumulator {
        Accumulator { acc: vec![0; self.acc_len], pending: 0, pending_word: 0 }
    }

    #[inline]
    fn push_word(&self, state: &mut Accumulator, word_index: usize, bits: u64) {
        if word_index != state.pending_word {
            self.fold(&mut state.acc, state.pending_word, state.pending);
            state.pending = 0;
            state.pending_word = word_index;
        }
        state.pending ^= bits;
    }

    /// Folds the `b`-bit `sample` acquired in round `round_index` of the
    /// current block into the accumulator. Rounds may arrive in any order.
    pub fn streaming_accumulate(&self, state: &mut Accumulator, sample: u64, round_index: usize) -> Result<()> {
        if round_index >= self.m {
            return Err(Error::RoundIndex { index: round_index, m: self.m });
        }
        let b = self.b as usize;
        let start = round_index * b;
        let (word, end) = (start / 64, start % 64 + b);
        let bits = sample & low_mask(self.b);
        if end <= 64 {
            self.push_word(state, word, bits << (64 - end));
        } else {
            self.push_word(state, word, bits >> (end - 64));
            self.push_word(state, word + 1, bits << (128 - end));
        }
        Ok(())
    }

    pub fn finish(&self, mut state: Accumulator) -> BitString {
        let (word, pending) = (state.pending_word, state.pending);
        self.fold(&mut state.acc, word, pending);
        self.extract(&state.acc)
    }

    /// Hashes one block of exactly `m` samples arriving in order, folding
    /// each 64-bit input word as soon as it is complete.
    pub fn hash_samples(&self, samples: &[u64]) -> Result<BitString> {
        if samples.len() != self.m {
            return Err(Error::LengthMismatch { expected: self.m, got: samples.len() });
        }
        let b = self.b;
        let mask = low_mask(b);
        let mut acc = vec![0u128; self.acc_len];
        let mut buf = 0u128;
        let mut filled = 0u32;
        let mut word = 0usize;
        for &s in samples {
            buf |= ((s & mask) as u128) << (128 - b - filled);
            filled += b;
            if filled >= 64 {
                self.fold(&mut acc, word, (buf >> 64) as u64);
                buf <<= 64;
                filled -= 64;
                word += 1;
            }
        }
        if filled > 0 {
            self.fold(&mut acc, word, (buf >> 64) as u64);
        }
        Ok(self.extract(&acc))
    }
}

fn low_mask(b: u32) -> u64 {
    if b >= 64 {
        u64::MAX
    } else {
        (1u64 << b) - 1
    }
}

fn hardware_clmul() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("pclmulqdq")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Carry-less product of two 64-bit polynomials, least significant bit = degree 0.
pub fn clmul_portable(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut b = b;
    let mut r = 0u128;
    while b != 0 {
        r ^= a << b.trailing_zeros();
        b &= b - 1;
    }
    r
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "pclmulqdq")]
unsafe fn fold_pclmul(seed: &[u64], acc: &mut [u128], x: u64) {
    use std::arch::x86_64::{__m128i, _mm_clmulepi64_si128, _mm_cvtsi64_si128, _mm_loadu_si128, _mm_storeu_si128, _mm_xor_si128};
    let xv = _mm_cvtsi64_si128(x as i64);
    let n = acc.len().min(seed.len());
    let (seed, acc) = (&seed[..n], &mut acc[..n]);
    for i in 0..n {
        let p = &mut acc[i] as *mut u128 as *mut __m128i;
        let r = _mm_clmulepi64_si128::<0>(_mm_cvtsi64_si128(seed[i] as i64), xv);
        _mm_storeu_si128(p, _mm_xor_si128(_mm_loadu_si128(p), r));
    }
}
