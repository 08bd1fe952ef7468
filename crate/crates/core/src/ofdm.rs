//! Oversampled OFDM, clipping and filtering (CAF), PAPR and DFT precoding.
//!
//! All transforms are unitary (`1/√L` in both directions). With `J`-times
//! oversampling the `N_c` data symbols occupy the first `N_c` bins of a
//! `J·N_c`-point IDFT, so the mean sample power of the time-domain signal is
//! `P_in / J`. The clipping threshold is therefore
//! `A_max = γ_CR · √(P_in / J)`, i.e. `γ_CR` is measured against the RMS
//! amplitude of the oversampled waveform.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Unitary DFT of a fixed power-of-two length.
#[derive(Clone)]
pub struct UnitaryDft {
    len: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft").field("len", &self.len).finish()
    }
}

impl UnitaryDft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::UnsupportedLength(len));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place transform; `buf.len()` must equal `self.len()`.
    pub fn process(&self, buf: &mut [Complex64], dir: Direction) {
        assert_eq!(buf.len(), self.len);
        match dir {
            Direction::Forward => self.forward.process(buf),
            Direction::Inverse => self.inverse.process(buf),
        }
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.process(buf, Direction::Forward);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.process(buf, Direction::Inverse);
    }
}

/// One-shot unitary DFT.
pub fn unitary_dft(x: &[Complex64], dir: Direction) -> Result<Vec<Complex64>> {
    let dft = UnitaryDft::new(x.len())?;
    let mut out = x.to_vec();
    dft.process(&mut out, dir);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmParams {
    /// Number of subcarriers `N_c`.
    pub nc: usize,
    /// Oversampling factor `J`.
    pub oversampling: usize,
    /// Clipping ratio `γ_CR` (amplitude domain).
    pub clip_ratio: f64,
}

impl OfdmParams {
    pub fn new(nc: usize, oversampling: usize, clip_ratio: f64) -> Result<Self> {
        let p = Self {
            nc,
            oversampling,
            clip_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nc == 0 || !self.nc.is_power_of_two() {
            return Err(Error::UnsupportedLength(self.nc));
        }
        if self.oversampling == 0 || !self.oversampling.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "oversampling factor {} must be a power of two",
                self.oversampling
            )));
        }
        if !(self.clip_ratio > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "clipping ratio {} must be > 0",
                self.clip_ratio
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.nc * self.oversampling
    }

    /// Limiter threshold for subcarrier power `p_in`.
    pub fn a_max(&self, p_in: f64) -> f64 {
        self.clip_ratio * (p_in / self.oversampling as f64).sqrt()
    }
}

/// Bussgang attenuation of a soft limiter driven by a complex Gaussian
/// signal: `1 - e^{-γ²} + (√π γ / 2) erfc(γ)`.
pub fn alpha(clip_ratio: f64) -> f64 {
    let g = clip_ratio;
    1.0 - (-g * g).exp() + PI.sqrt() * g / 2.0 * erfc(g)
}

/// Soft envelope limiter: magnitudes above `a_max` are set to `a_max`,
/// phases are untouched.
pub fn soft_clip(s: &[Complex64], a_max: f64) -> Vec<Complex64> {
    let mut out = s.to_vec();
    soft_clip_in_place(&mut out, a_max);
    out
}

pub fn soft_clip_in_place(s: &mut [Complex64], a_max: f64) {
    for v in s.iter_mut() {
        let mag = v.norm();
        if mag > a_max {
            *v *= a_max / mag;
        }
    }
}

fn mean_power(s: &[Complex64]) -> f64 {
    s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64
}

/// `10·log10(max|s|² / mean|s|²)`.
pub fn papr_db(s: &[Complex64]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::ZeroPower);
    }
    let mean = mean_power(s);
    if mean <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let peak = s.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    Ok(10.0 * (peak / mean).log10())
}

/// Oversampling OFDM modem with cached transform plans.
#[derive(Debug, Clone)]
pub struct Ofdm {
    params: OfdmParams,
    long: UnitaryDft,
    short: UnitaryDft,
}

impl Ofdm {
    pub fn new(params: OfdmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            long: UnitaryDft::new(params.samples())?,
            short: UnitaryDft::new(params.nc)?,
        })
    }

    pub fn params(&self) -> &OfdmParams {
        &self.params
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::SizeMismatch { expected, got });
        }
        Ok(())
    }

    /// Zero-pads `z` to `J·N_c` bins (data first) and applies the inverse DFT.
    pub fn modulate(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(z.len(), self.params.nc)?;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.params.samples()];
        buf[..z.len()].copy_from_slice(z);
        self.long.inverse(&mut buf);
        Ok(buf)
    }

    /// Forward DFT of `J·N_c` samples, keeping the in-band bins.
    pub fn demodulate(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(s.len(), self.params.samples())?;
        let mut buf = s.to_vec();
        self.long.forward(&mut buf);
        buf.truncate(self.params.nc);
        Ok(buf)
    }

    pub fn dft_precode(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(z.len(), self.params.nc)?;
        let mut out = z.to_vec();
        self.short.forward(&mut out);
        Ok(out)
    }

    pub fn dft_deprecode(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(y.len(), self.params.nc)?;
        let mut out = y.to_vec();
        self.short.inverse(&mut out);
        Ok(out)
    }

    /// The `N_c`-point transform used for precoding.
    pub fn precoder(&self) -> &UnitaryDft {
        &self.short
    }
}

/// Output of one clipping-and-filtering pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CafResult {
    /// In-band transmit symbols.
    pub u: Vec<Complex64>,
    /// Measured `‖Z‖²/N_c` of this block.
    pub p_in: f64,
    /// Measured `‖U‖²/N_c` of this block.
    pub p_av: f64,
    pub alpha_theory: f64,
}

/// Clipping-and-filtering stage with a fixed limiter threshold.
///
/// `p_in` is the ensemble subcarrier power (the constellation `Es`), so the
/// threshold is a system constant that the receiver can regenerate.
#[derive(Debug, Clone)]
pub struct Caf {
    ofdm: Ofdm,
    p_in: f64,
    a_max: f64,
}

impl Caf {
    pub fn new(params: OfdmParams, p_in: f64) -> Result<Self> {
        if !(p_in > 0.0) {
            return Err(Error::InvalidParameter(format!("P_in = {p_in}")));
        }
        Ok(Self {
            ofdm: Ofdm::new(params)?,
            p_in,
            a_max: params.a_max(p_in),
        })
    }

    pub fn ofdm(&self) -> &Ofdm {
        &self.ofdm
    }

    pub fn params(&self) -> &OfdmParams {
        self.ofdm.params()
    }

    pub fn p_in(&self) -> f64 {
        self.p_in
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn alpha(&self) -> f64 {
        alpha(self.params().clip_ratio)
    }

    /// Modulate, soft-limit at `A_max`, demodulate and drop out-of-band bins.
    pub fn apply(&self, z: &[Complex64]) -> Result<CafResult> {
        let mut s = self.ofdm.modulate(z)?;
        soft_clip_in_place(&mut s, self.a_max);
        let u = self.ofdm.demodulate(&s)?;
        Ok(CafResult {
            p_in: mean_power(z),
            p_av: mean_power(&u),
            alpha_theory: self.alpha(),
            u,
        })
    }
}

/// Clipping and filtering of one OFDM block with `P_in` taken as `p_in`.
pub fn caf(z: &[Complex64], params: OfdmParams, p_in: f64) -> Result<CafResult> {
    Caf::new(params, p_in)?.apply(z)
}

/// Empirical CCDF of a set of PAPR samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Ccdf {
    sorted: Vec<f64>,
}

impl Ccdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples strictly above `x`.
    pub fn at(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v <= x);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Level exceeded with probability `p` (linearly interpolated quantile).
    pub fn level(&self, p: f64) -> f64 {
        assert!(!self.sorted.is_empty() && (0.0..=1.0).contains(&p));
        let pos = (1.0 - p) * (self.sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(self.sorted.len() - 1);
        let frac = pos - lo as f64;
        self.sorted[lo] * (1.0 - frac) + self.sorted[hi] * frac
    }

    /// `(x, CCDF(x))` on a uniform grid.
    pub fn curve(&self, start: f64, stop: f64, step: f64) -> Vec<(f64, f64)> {
        let n = ((stop - start) / step).round() as usize;
        (0..=n)
            .map(|i| {
                let x = start + i as f64 * step;
                (x, self.at(x))
            })
            .collect()
    }
}
