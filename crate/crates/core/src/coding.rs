//! Punctured convolutional code with max-log BCJR decoding, and a seeded
//! bit interleaver.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Which mother-code outputs survive, per trellis step within one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuncturePattern {
    pub a: Vec<bool>,
    pub b: Vec<bool>,
}

impl PuncturePattern {
    /// Rate 5/6 from a rate-1/2 mother code: A = 11010, B = 10101.
    pub fn rate_5_6() -> Self {
        Self {
            a: vec![true, true, false, true, false],
            b: vec![true, false, true, false, true],
        }
    }

    pub fn unpunctured() -> Self {
        Self {
            a: vec![true],
            b: vec![true],
        }
    }

    pub fn period(&self) -> usize {
        self.a.len()
    }

    /// Coded bits emitted per period.
    pub fn kept(&self) -> usize {
        self.a.iter().chain(&self.b).filter(|&&k| k).count()
    }

    fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.a.len() != self.b.len() {
            return Err(Error::InvalidParameter("puncture rows must be non-empty and equally long".into()));
        }
        if self.a.iter().zip(&self.b).any(|(a, b)| !a && !b) {
            return Err(Error::InvalidParameter("puncture pattern drops a whole trellis step".into()));
        }
        Ok(())
    }
}

impl Default for PuncturePattern {
    fn default() -> Self {
        Self::rate_5_6()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecConfig {
    /// Coded bits per codeword after puncturing.
    pub codeword_len: usize,
    pub constraint_length: usize,
    /// Octal-style generator polynomials of the rate-1/2 mother code.
    pub generators: [u32; 2],
    pub puncture: PuncturePattern,
    pub interleaver_seed: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            codeword_len: 30720,
            constraint_length: 7,
            generators: [0o171, 0o133],
            puncture: PuncturePattern::rate_5_6(),
            interleaver_seed: 0,
        }
    }
}

impl CodecConfig {
    pub fn with_len(codeword_len: usize) -> Self {
        Self {
            codeword_len,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.puncture.validate()?;
        let k = self.constraint_length;
        if !(2..=12).contains(&k) {
            return Err(Error::InvalidParameter(format!("constraint length {k}")));
        }
        for &g in &self.generators {
            if g == 0 || g >= 1 << k || g >> (k - 1) == 0 {
                return Err(Error::InvalidParameter(format!(
                    "generator {g:o} does not match constraint length {k}"
                )));
            }
        }
        let kept = self.puncture.kept();
        if self.codeword_len == 0 || !self.codeword_len.is_multiple_of(kept) {
            return Err(Error::InvalidParameter(format!(
                "codeword length {} is not a multiple of {kept}",
                self.codeword_len
            )));
        }
        if self.steps() < k {
            return Err(Error::InvalidParameter(format!(
                "codeword length {} leaves no room for information bits",
                self.codeword_len
            )));
        }
        Ok(())
    }

    /// Codeword must fill whole complex symbols of `2n` bits.
    pub fn check_symbol_fill(&self, bits_per_dim: usize) -> Result<()> {
        if !self.codeword_len.is_multiple_of(2 * bits_per_dim) {
            return Err(Error::InvalidParameter(format!(
                "codeword length {} is not a multiple of {}",
                self.codeword_len,
                2 * bits_per_dim
            )));
        }
        Ok(())
    }

    /// Trellis steps, information plus tail.
    pub fn steps(&self) -> usize {
        self.codeword_len / self.puncture.kept() * self.puncture.period()
    }

    pub fn info_len(&self) -> usize {
        self.steps() - (self.constraint_length - 1)
    }

    pub fn rate(&self) -> f64 {
        self.info_len() as f64 / self.codeword_len as f64
    }
}

/// Trellis tables of a rate-1/2 feed-forward code.
#[derive(Debug, Clone)]
pub struct Trellis {
    memory: usize,
    /// `next[s * 2 + u]`.
    next: Vec<usize>,
    /// Output pair packed as `a << 1 | b`, same indexing.
    out: Vec<u8>,
}

fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

impl Trellis {
    pub fn new(constraint_length: usize, generators: [u32; 2]) -> Self {
        let memory = constraint_length - 1;
        let states = 1usize << memory;
        let mut next = Vec::with_capacity(states * 2);
        let mut out = Vec::with_capacity(states * 2);
        for s in 0..states {
            for u in 0..2u32 {
                // newest bit sits at the top of the register
                let reg = (u << memory) | s as u32;
                next.push((reg >> 1) as usize);
                out.push(parity(reg & generators[0]) << 1 | parity(reg & generators[1]));
            }
        }
        Self { memory, next, out }
    }

    pub fn states(&self) -> usize {
        1 << self.memory
    }
}

fn check_bits(bits: &[u8]) -> Result<()> {
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidParameter(format!("bit value {b}")));
    }
    Ok(())
}

/// Terminated, punctured encoding of exactly `cfg.info_len()` bits.
pub fn encode(info: &[u8], cfg: &CodecConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    if info.len() != cfg.info_len() {
        return Err(Error::SizeMismatch {
            expected: cfg.info_len(),
            got: info.len(),
        });
    }
    check_bits(info)?;
    let tr = Trellis::new(cfg.constraint_length, cfg.generators);
    let p = &cfg.puncture;
    let mut out = Vec::with_capacity(cfg.codeword_len);
    let mut state = 0usize;
    let tail = std::iter::repeat_n(0u8, tr.memory);
    for (t, u) in info.iter().copied().chain(tail).enumerate() {
        let idx = state * 2 + u as usize;
        let o = tr.out[idx];
        let phase = t % p.period();
        if p.a[phase] {
            out.push(o >> 1);
        }
        if p.b[phase] {
            out.push(o & 1);
        }
        state = tr.next[idx];
    }
    debug_assert_eq!(state, 0);
    debug_assert_eq!(out.len(), cfg.codeword_len);
    Ok(out)
}

/// A-posteriori LLRs of the information bits (positive favours 0).
pub fn decode_llr(llrs: &[f64], cfg: &CodecConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if llrs.len() != cfg.codeword_len {
        return Err(Error::SizeMismatch {
            expected: cfg.codeword_len,
            got: llrs.len(),
        });
    }
    let tr = Trellis::new(cfg.constraint_length, cfg.generators);
    let ns = tr.states();
    let steps = cfg.steps();
    let info = cfg.info_len();
    let p = &cfg.puncture;

    // depuncture into branch metrics for the four output pairs
    let mut bm = vec![[0.0f64; 4]; steps];
    let mut pos = 0;
    for (t, m) in bm.iter_mut().enumerate() {
        let phase = t % p.period();
        let mut take = |keep: bool| {
            if keep {
                pos += 1;
                llrs[pos - 1]
            } else {
                0.0
            }
        };
        let la = take(p.a[phase]);
        let lb = take(p.b[phase]);
        for (ab, v) in m.iter_mut().enumerate() {
            let sa = if ab >> 1 == 0 { 1.0 } else { -1.0 };
            let sb = if ab & 1 == 0 { 1.0 } else { -1.0 };
            *v = 0.5 * (sa * la + sb * lb);
        }
    }

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; (steps + 1) * ns];
    alpha[0] = 0.0;
    for t in 0..steps {
        let inputs = if t < info { 2 } else { 1 };
        let (cur, nxt) = alpha.split_at_mut((t + 1) * ns);
        let cur = &cur[t * ns..];
        let nxt = &mut nxt[..ns];
        for s in 0..ns {
            let a = cur[s];
            if a == neg {
                continue;
            }
            for u in 0..inputs {
                let idx = s * 2 + u;
                let v = a + bm[t][tr.out[idx] as usize];
                let d = &mut nxt[tr.next[idx]];
                if v > *d {
                    *d = v;
                }
            }
        }
        let mx = nxt.iter().copied().fold(neg, f64::max);
        for v in nxt.iter_mut() {
            *v -= mx;
        }
    }

    let mut beta = vec![neg; ns];
    beta[0] = 0.0;
    let mut prev = vec![neg; ns];
    let mut out = vec![0.0; info];
    for t in (0..steps).rev() {
        let inputs = if t < info { 2 } else { 1 };
        let a = &alpha[t * ns..(t + 1) * ns];
        let mut best = [neg; 2];
        for s in 0..ns {
            let mut b = neg;
            for u in 0..inputs {
                let idx = s * 2 + u;
                let v = bm[t][tr.out[idx] as usize] + beta[tr.next[idx]];
                b = b.max(v);
                best[u] = best[u].max(a[s] + v);
            }
            prev[s] = b;
        }
        if t < info {
            out[t] = best[0] - best[1];
        }
        let mx = prev.iter().copied().fold(neg, f64::max);
        for (b, p) in beta.iter_mut().zip(&prev) {
            *b = p - mx;
        }
    }
    Ok(out)
}

/// Hard decisions of [`decode_llr`].
pub fn decode(llrs: &[f64], cfg: &CodecConfig) -> Result<Vec<u8>> {
    Ok(decode_llr(llrs, cfg)?.iter().map(|&l| u8::from(l < 0.0)).collect())
}

/// Seeded pseudo-random permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut seed::rng(seed, &[]));
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `out[i] = x[perm[i]]`.
    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, y: &[T]) -> Result<Vec<T>> {
        self.check(y.len())?;
        let mut out = vec![T::default(); y.len()];
        for (&p, &v) in self.perm.iter().zip(y) {
            out[p] = v;
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::SizeMismatch {
                expected: self.perm.len(),
                got: len,
            });
        }
        Ok(())
    }
}

pub fn interleave<T: Copy>(bits: &[T], seed: u64) -> Result<Vec<T>> {
    Interleaver::new(bits.len(), seed).interleave(bits)
}

pub fn deinterleave<T: Copy + Default>(llrs: &[T], seed: u64) -> Result<Vec<T>> {
    Interleaver::new(llrs.len(), seed).deinterleave(llrs)
}
