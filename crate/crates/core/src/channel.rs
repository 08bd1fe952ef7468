//! Subcarrier-domain AWGN and block Rayleigh fading, ZF and MMSE equalization.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::ofdm::UnitaryDft;
use crate::seed;

/// Circularly-symmetric complex Gaussian sample with `E|w|² = var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Noise vector of length `len`, variance `n0` per complex sample.
pub fn noise<R: Rng + ?Sized>(rng: &mut R, len: usize, n0: f64) -> Vec<Complex64> {
    (0..len).map(|_| complex_gaussian(rng, n0)).collect()
}

fn check_n0(n0: f64) -> Result<()> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::InvalidParameter(format!("N0 = {n0}")));
    }
    Ok(())
}

/// `U + W` with `W ~ CN(0, n0)`.
pub fn awgn_apply(u: &[Complex64], n0: f64, seed: u64) -> Result<Vec<Complex64>> {
    let mut rng = seed::rng(seed, &[]);
    awgn_apply_with(u, n0, &mut rng)
}

pub fn awgn_apply_with<R: Rng + ?Sized>(u: &[Complex64], n0: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    check_n0(n0)?;
    if n0 == 0.0 {
        return Ok(u.to_vec());
    }
    Ok(u.iter().map(|&x| x + complex_gaussian(rng, n0)).collect())
}

/// One block-fading channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Time-domain path gains.
    pub taps: Vec<Complex64>,
    /// Per-subcarrier coefficients `H_k = Σ_l h_l e^{-j2πkl/N_c}`.
    pub h: Vec<Complex64>,
}

impl ChannelRealization {
    /// Frequency response of the given taps on `nc` subcarriers.
    pub fn from_taps(taps: Vec<Complex64>, nc: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one path".into()));
        }
        if nc < taps.len() {
            return Err(Error::InvalidParameter(format!(
                "{} paths exceed {nc} subcarriers",
                taps.len()
            )));
        }
        let mut h = vec![Complex64::new(0.0, 0.0); nc];
        h[..taps.len()].copy_from_slice(&taps);
        FftPlanner::new().plan_fft_forward(nc).process(&mut h);
        Ok(Self { taps, h })
    }

    /// Unit-gain channel.
    pub fn flat(nc: usize) -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            h: vec![Complex64::new(1.0, 0.0); nc],
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.h.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// `paths` i.i.d. taps with variance `1/paths` each.
pub fn rayleigh_realize(paths: usize, nc: usize, seed: u64) -> Result<ChannelRealization> {
    let mut rng = seed::rng(seed, &[]);
    rayleigh_realize_with(paths, nc, &mut rng)
}

pub fn rayleigh_realize_with<R: Rng + ?Sized>(paths: usize, nc: usize, rng: &mut R) -> Result<ChannelRealization> {
    if paths == 0 {
        return Err(Error::InvalidParameter("channel needs at least one path".into()));
    }
    let var = 1.0 / paths as f64;
    let taps = (0..paths).map(|_| complex_gaussian(rng, var)).collect();
    ChannelRealization::from_taps(taps, nc)
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::SizeMismatch { expected, got });
    }
    Ok(())
}

/// `Y_k = H_k U_k + W_k`.
pub fn fading_apply(u: &[Complex64], ch: &ChannelRealization, n0: f64, seed: u64) -> Result<Vec<Complex64>> {
    let mut rng = seed::rng(seed, &[]);
    fading_apply_with(u, ch, n0, &mut rng)
}

pub fn fading_apply_with<R: Rng + ?Sized>(
    u: &[Complex64],
    ch: &ChannelRealization,
    n0: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    check_len(u.len(), ch.len())?;
    let faded: Vec<Complex64> = u.iter().zip(&ch.h).map(|(x, h)| x * h).collect();
    awgn_apply_with(&faded, n0, rng)
}

/// `Y_k / H_k`. The per-subcarrier noise variance becomes `N0/|H_k|²`.
pub fn zf_equalize(y: &[Complex64], ch: &ChannelRealization) -> Result<Vec<Complex64>> {
    check_len(y.len(), ch.len())?;
    if let Some(k) = ch.h.iter().position(|h| h.norm_sqr() == 0.0) {
        return Err(Error::ZeroChannel(k));
    }
    Ok(y.iter().zip(&ch.h).map(|(y, h)| y / h).collect())
}

/// Noise variance per subcarrier after ZF.
pub fn zf_noise_var(ch: &ChannelRealization, n0: f64) -> Vec<f64> {
    ch.h.iter().map(|h| n0 / h.norm_sqr()).collect()
}

/// Per-subcarrier Wiener weights `H_k* / (|H_k|² + 1/snr)`.
pub fn mmse_weights(ch: &ChannelRealization, snr: f64) -> Result<Vec<Complex64>> {
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter(format!("snr = {snr}")));
    }
    Ok(ch.h.iter().map(|h| h.conj() / (h.norm_sqr() + 1.0 / snr)).collect())
}

/// Frequency-domain MMSE combining followed by DFT de-precoding.
pub fn mmse_equalize(y: &[Complex64], ch: &ChannelRealization, snr: f64, dft: &UnitaryDft) -> Result<Vec<Complex64>> {
    check_len(y.len(), ch.len())?;
    check_len(dft.len(), ch.len())?;
    let g = mmse_weights(ch, snr)?;
    let mut out: Vec<Complex64> = y.iter().zip(&g).map(|(y, g)| y * g).collect();
    dft.inverse(&mut out);
    Ok(out)
}

/// Bias and post-detection SINR of the MMSE single-carrier detector.
///
/// With `β_k = |H_k|²/(|H_k|² + 1/snr)` the de-precoded output is
/// `μ·x + e` where `μ = mean β_k` and `e` collects noise and residual ISI.
/// Dividing by `μ` gives an unbiased estimate with error variance
/// `P·(1/μ − 1)` for signal power `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseStats {
    pub bias: f64,
    pub sinr: f64,
}

pub fn mmse_stats(ch: &ChannelRealization, snr: f64) -> Result<MmseStats> {
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter(format!("snr = {snr}")));
    }
    let mu = ch
        .h
        .iter()
        .map(|h| {
            let g = h.norm_sqr();
            g / (g + 1.0 / snr)
        })
        .sum::<f64>()
        / ch.len() as f64;
    Ok(MmseStats {
        bias: mu,
        sinr: mu / (1.0 - mu),
    })
}
