//! End-to-end pipelines: Monte-Carlo BMI of the CAF/CNC systems, PAPR
//! ensembles and coded BER of the three link variants.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelRealization};
use crate::coding::{self, CodecConfig, Interleaver};
use crate::error::{Error, Result};
use crate::metrics::{bmi_monte_carlo_weighted, db_to_linear, BmiEstimate, BmiEvaluator, Observation};
use crate::ofdm::{papr_db, Caf, Ofdm, OfdmParams};
use crate::receiver::{Cnc, Demapper, LlrFrame, LlrKind};
use crate::seed::{self, stream};
use crate::shaping::Constellation;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $(if s.eq_ignore_ascii_case($text) {
                    return Ok($name::$variant);
                })+
                Err(Error::InvalidParameter(format!(
                    "unknown {} `{s}`",
                    stringify!($name)
                )))
            }
        }
    };
}

named_enum! {
    /// Receiver chains whose BMI is measured at the decoder input.
    BmiSystem {
        A1 => "A1",
        A2 => "A2",
        A3 => "A3",
        F1 => "F1",
        F2 => "F2",
    }
}

named_enum! {
    /// Coded links: plain OFDM, OFDM with CAF and CNC, DFT-precoded OFDM.
    LinkSystem {
        S1 => "S1",
        S2 => "S2",
        S3 => "S3",
    }
}

named_enum! {
    ChannelKind {
        Awgn => "awgn",
        Rayleigh => "rayleigh",
    }
}

impl BmiSystem {
    pub fn uses_caf(&self) -> bool {
        matches!(self, Self::A2 | Self::A3 | Self::F2)
    }

    pub fn uses_cnc(&self) -> bool {
        matches!(self, Self::A3 | Self::F2)
    }

    pub fn channel(&self) -> ChannelKind {
        match self {
            Self::F1 | Self::F2 => ChannelKind::Rayleigh,
            _ => ChannelKind::Awgn,
        }
    }
}

/// Waveform and receiver settings shared by every pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    pub ofdm: OfdmParams,
    /// CNC iteration limit.
    pub kmax: usize,
    /// Paths of the equal-power Rayleigh profile.
    pub paths: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            ofdm: OfdmParams {
                nc: 1024,
                oversampling: 4,
                clip_ratio: 1.5,
            },
            kmax: 10,
            paths: 4,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        if self.paths == 0 || self.paths > self.ofdm.nc {
            return Err(Error::InvalidParameter(format!("{} fading paths", self.paths)));
        }
        Ok(())
    }
}

fn random_labels<R: Rng + ?Sized>(rng: &mut R, m: usize, count: usize) -> Vec<(u32, u32)> {
    (0..count)
        .map(|_| (rng.random_range(0..m as u32), rng.random_range(0..m as u32)))
        .collect()
}

fn to_symbols(c: &Constellation, labels: &[(u32, u32)]) -> Vec<Complex64> {
    labels
        .iter()
        .map(|&(i, q)| Complex64::new(c.amplitude(i), c.amplitude(q)))
        .collect()
}

fn mean_power(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

fn realize(kind: ChannelKind, paths: usize, nc: usize, master: u64, path: &[u64]) -> Result<ChannelRealization> {
    match kind {
        ChannelKind::Awgn => Ok(ChannelRealization::flat(nc)),
        ChannelKind::Rayleigh => channel::rayleigh_realize_with(paths, nc, &mut seed::rng(master, path)),
    }
}

type TxBlock = (Vec<(u32, u32)>, Vec<Complex64>, Vec<Complex64>);

/// Monte-Carlo BMI experiment for one system at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBmiConfig {
    pub system: BmiSystem,
    pub snr_db: f64,
    pub link: LinkParams,
    /// Complex subcarrier symbols, rounded up to whole OFDM blocks.
    pub symbols: usize,
    pub seed: u64,
}

impl McBmiConfig {
    pub fn new(system: BmiSystem, snr_db: f64, symbols: usize, seed: u64) -> Self {
        Self {
            system,
            snr_db,
            link: LinkParams::default(),
            symbols,
            seed,
        }
    }

    pub fn blocks(&self) -> usize {
        self.symbols.div_ceil(self.link.ofdm.nc).max(1)
    }
}

/// Diagnostics of one Monte-Carlo BMI run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBmiReport {
    pub bmi: BmiEstimate,
    /// Measured transmit power after CAF (`Es` without CAF).
    pub p_av: f64,
    pub n0: f64,
    /// Empirical `E[U Z*] / E[|Z|²]`.
    pub alpha_hat: f64,
    /// Mean `|D - D̂|²` left at the decoder input, scaled by `1/α²`.
    pub residual_var: f64,
}

/// BMI at the decoder input of `cfg.system`.
///
/// Data labels, channel draws and noise depend only on the seed and block
/// index, so every constellation of the same order sees the same random
/// numbers. The decoding metric is Gaussian with per-subcarrier variance
/// `N0/(α²|H_k|²)` plus the measured residual distortion variance.
pub fn bmi_system(c: &Constellation, cfg: &McBmiConfig) -> Result<McBmiReport> {
    cfg.link.validate()?;
    let params = cfg.link.ofdm;
    let nc = params.nc;
    let sys = cfg.system;
    let blocks = cfg.blocks();
    let caf = if sys.uses_caf() {
        Some(Caf::new(params, c.es())?)
    } else {
        None
    };
    let alpha = caf.as_ref().map_or(1.0, Caf::alpha);

    // (labels, Z, U) per block
    let tx: Vec<TxBlock> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let labels = random_labels(&mut seed::rng(cfg.seed, &[stream::BMI, stream::DATA, b as u64]), c.order(), nc);
            let z = to_symbols(c, &labels);
            let u = match &caf {
                Some(caf) => caf.apply(&z)?.u,
                None => z.clone(),
            };
            Ok((labels, z, u))
        })
        .collect::<Result<_>>()?;

    let p_av = match caf {
        Some(_) => tx.iter().map(|(_, _, u)| mean_power(u)).sum::<f64>() / blocks as f64,
        None => c.es(),
    };
    let cross: Complex64 = tx.iter().flat_map(|(_, z, u)| u.iter().zip(z).map(|(u, z)| u * z.conj())).sum();
    let zpow: f64 = tx.iter().map(|(_, z, _)| z.iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
    let alpha_hat = cross.re / zpow;
    let n0 = p_av / db_to_linear(cfg.snr_db);

    let cnc = match &caf {
        Some(caf) if sys.uses_cnc() => Some(Cnc::new(caf, c, cfg.link.kmax)?),
        _ => None,
    };

    // (decoder input / α, noise-only metric variance, residual distortion) per subcarrier
    let rx: Vec<(Vec<Complex64>, Vec<f64>, f64)> = tx
        .par_iter()
        .enumerate()
        .map(|(b, (_, z, u))| {
            let ch = realize(sys.channel(), cfg.link.paths, nc, cfg.seed, &[stream::BMI, stream::CHANNEL, b as u64])?;
            let w = channel::noise(&mut seed::rng(cfg.seed, &[stream::BMI, stream::NOISE, b as u64]), nc, n0);
            let y: Vec<Complex64> = u.iter().zip(&ch.h).zip(&w).map(|((u, h), w)| h * u + w).collect();
            let ytilde = channel::zf_equalize(&y, &ch)?;
            let out = match &cnc {
                Some(cnc) => cnc.run(&ytilde)?.y,
                None => ytilde,
            };
            let r: Vec<Complex64> = out.iter().map(|v| v / alpha).collect();
            let resid: f64 = r
                .iter()
                .zip(z)
                .zip(w.iter().zip(&ch.h))
                .map(|((r, z), (w, h))| (r - z - w / (alpha * h)).norm_sqr())
                .sum();
            let var = ch.h.iter().map(|h| n0 / (alpha * alpha * h.norm_sqr())).collect();
            Ok((r, var, resid))
        })
        .collect::<Result<_>>()?;

    let residual_var = if caf.is_some() {
        rx.iter().map(|(_, _, s)| s).sum::<f64>() / (blocks * nc) as f64
    } else {
        0.0
    };
    let mut obs = Vec::with_capacity(2 * blocks * nc);
    for ((labels, _, _), (r, var, _)) in tx.iter().zip(&rx) {
        for ((&(li, lq), y), v) in labels.iter().zip(r).zip(var) {
            let n0 = v + residual_var;
            obs.push(Observation { label: li, y: y.re, n0 });
            obs.push(Observation { label: lq, y: y.im, n0 });
        }
    }
    Ok(McBmiReport {
        bmi: bmi_monte_carlo_weighted(&obs, c)?,
        p_av,
        n0,
        alpha_hat,
        residual_var,
    })
}

/// Grid-search evaluator backed by [`bmi_system`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEvaluator {
    pub cfg: McBmiConfig,
}

impl BmiEvaluator for McEvaluator {
    fn evaluate(&self, c: &Constellation) -> Result<BmiEstimate> {
        Ok(bmi_system(c, &self.cfg)?.bmi)
    }

    fn describe(&self) -> String {
        let p = self.cfg.link;
        format!(
            "monte-carlo {} snr_db={} symbols={} seed={} nc={} J={} gamma_cr={} kmax={} paths={} metric=gaussian-mismatched",
            self.cfg.system,
            self.cfg.snr_db,
            self.cfg.blocks() * p.ofdm.nc,
            self.cfg.seed,
            p.ofdm.nc,
            p.ofdm.oversampling,
            p.ofdm.clip_ratio,
            p.kmax,
            p.paths
        )
    }
}

/// PAPR ensemble of the final oversampled transmit waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaprConfig {
    pub system: LinkSystem,
    pub ofdm: OfdmParams,
    /// OFDM symbols.
    pub symbols: usize,
    pub seed: u64,
}

/// One PAPR value (dB) per OFDM symbol, in symbol order.
pub fn papr_samples(c: &Constellation, cfg: &PaprConfig) -> Result<Vec<f64>> {
    let ofdm = Ofdm::new(cfg.ofdm)?;
    let caf = Caf::new(cfg.ofdm, c.es())?;
    (0..cfg.symbols)
        .into_par_iter()
        .map(|i| {
            let labels = random_labels(&mut seed::rng(cfg.seed, &[stream::PAPR, stream::DATA, i as u64]), c.order(), cfg.ofdm.nc);
            let z = to_symbols(c, &labels);
            let s = match cfg.system {
                LinkSystem::S1 => ofdm.modulate(&z)?,
                LinkSystem::S2 => ofdm.modulate(&caf.apply(&z)?.u)?,
                LinkSystem::S3 => ofdm.modulate(&ofdm.dft_precode(&z)?)?,
            };
            papr_db(&s)
        })
        .collect()
}

/// Coded BER experiment at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerConfig {
    pub system: LinkSystem,
    pub channel: ChannelKind,
    pub snr_db: f64,
    pub link: LinkParams,
    pub codec: CodecConfig,
    /// Stop once this many bit errors are collected...
    pub min_errors: u64,
    /// ...and at least this many codewords were sent.
    pub min_frames: u64,
    pub max_frames: u64,
    pub seed: u64,
    /// OFDM blocks used to calibrate `P_av` and the residual distortion.
    pub calibration_blocks: usize,
}

impl BerConfig {
    pub fn new(system: LinkSystem, channel: ChannelKind, snr_db: f64, seed: u64) -> Self {
        Self {
            system,
            channel,
            snr_db,
            link: LinkParams::default(),
            codec: CodecConfig::default(),
            min_errors: 100,
            min_frames: 1,
            max_frames: 2000,
            seed,
            calibration_blocks: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
}

/// Operating-point constants a receiver is assumed to know.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p_av: f64,
    /// Residual distortion variance after CNC, in units of `|Z|²`.
    pub residual_var: f64,
}

/// Measures `P_av` and, for S2, the post-CNC residual distortion on
/// uncoded random blocks from a dedicated seed stream.
pub fn calibrate(c: &Constellation, cfg: &BerConfig) -> Result<Calibration> {
    if cfg.system != LinkSystem::S2 {
        return Ok(Calibration {
            p_av: c.es(),
            residual_var: 0.0,
        });
    }
    let sys = match cfg.channel {
        ChannelKind::Awgn => BmiSystem::A3,
        ChannelKind::Rayleigh => BmiSystem::F2,
    };
    let mc = McBmiConfig {
        system: sys,
        snr_db: cfg.snr_db,
        link: cfg.link,
        symbols: cfg.calibration_blocks.max(1) * cfg.link.ofdm.nc,
        seed: seed::derive(cfg.seed, &[stream::CALIBRATION]),
    };
    let r = bmi_system(c, &mc)?;
    Ok(Calibration {
        p_av: r.p_av,
        residual_var: r.residual_var,
    })
}

struct Link<'a> {
    c: &'a Constellation,
    cfg: &'a BerConfig,
    ofdm: Ofdm,
    caf: Caf,
    dm: Demapper,
    il: Interleaver,
    n0: f64,
    cal: Calibration,
}

impl Link<'_> {
    /// Returns `(bit errors, info bits)` of codeword `f`.
    fn frame(&self, f: u64) -> Result<(u64, u64)> {
        let c = self.c;
        let cfg = self.cfg;
        let n = c.bits_per_dim();
        let nc = cfg.link.ofdm.nc;
        let codec = &cfg.codec;
        let mut data = seed::rng(cfg.seed, &[stream::BER, stream::DATA, f]);
        let info: Vec<u8> = (0..codec.info_len()).map(|_| data.random_range(0..2u8)).collect();
        let coded = self.il.interleave(&coding::encode(&info, codec)?)?;

        let to_label = |bits: &[u8]| bits.iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
        let n_sym = codec.codeword_len / (2 * n);
        let blocks = n_sym.div_ceil(nc);
        let mut labels: Vec<(u32, u32)> = coded.chunks(2 * n).map(|s| (to_label(&s[..n]), to_label(&s[n..]))).collect();
        // filler symbols complete the last OFDM block and are discarded
        labels.extend(random_labels(&mut data, c.order(), blocks * nc - n_sym));

        let ch = realize(cfg.channel, cfg.link.paths, nc, cfg.seed, &[stream::BER, stream::CHANNEL, f])?;
        let mut noise = seed::rng(cfg.seed, &[stream::BER, stream::NOISE, f]);
        let cnc = Cnc::new(&self.caf, c, cfg.link.kmax)?;
        let alpha = self.caf.alpha();
        let snr = self.cal.p_av / self.n0;

        let mut y_all = Vec::with_capacity(blocks * nc);
        let mut v_all = Vec::with_capacity(blocks * nc);
        for block in labels.chunks(nc) {
            let z = to_symbols(c, block);
            let u = match cfg.system {
                LinkSystem::S1 => z,
                LinkSystem::S2 => self.caf.apply(&z)?.u,
                LinkSystem::S3 => self.ofdm.dft_precode(&z)?,
            };
            let y = channel::fading_apply_with(&u, &ch, self.n0, &mut noise)?;
            match cfg.system {
                LinkSystem::S1 => {
                    y_all.extend(channel::zf_equalize(&y, &ch)?);
                    v_all.extend(channel::zf_noise_var(&ch, self.n0));
                }
                LinkSystem::S2 => {
                    let out = cnc.run(&channel::zf_equalize(&y, &ch)?)?.y;
                    y_all.extend(out.iter().map(|v| v / alpha));
                    v_all.extend(
                        ch.h.iter()
                            .map(|h| self.n0 / (alpha * alpha * h.norm_sqr()) + self.cal.residual_var),
                    );
                }
                LinkSystem::S3 => {
                    let est = channel::mmse_equalize(&y, &ch, snr, self.ofdm.precoder())?;
                    let mu = channel::mmse_stats(&ch, snr)?.bias;
                    y_all.extend(est.iter().map(|v| v / mu));
                    v_all.extend(std::iter::repeat_n(c.es() * (1.0 / mu - 1.0), nc));
                }
            }
        }
        y_all.truncate(n_sym);
        v_all.truncate(n_sym);
        let frame = LlrFrame::demap(&self.dm, &y_all, &v_all, LlrKind::MaxLog)?;
        let llrs = self.il.deinterleave(&frame.llrs)?;
        let decoded = coding::decode(&llrs, codec)?;
        let errors = decoded.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
        Ok((errors, info.len() as u64))
    }
}

/// Codewords are simulated in fixed batches until the error and frame
/// targets are met; the stopping point does not depend on thread count.
pub const BER_BATCH: u64 = 4;

pub fn ber_point(c: &Constellation, cfg: &BerConfig) -> Result<BerPoint> {
    cfg.link.validate()?;
    cfg.codec.validate()?;
    cfg.codec.check_symbol_fill(c.bits_per_dim())?;
    if cfg.max_frames == 0 {
        return Err(Error::InvalidParameter("max_frames must be > 0".into()));
    }
    let cal = calibrate(c, cfg)?;
    let link = Link {
        c,
        cfg,
        ofdm: Ofdm::new(cfg.link.ofdm)?,
        caf: Caf::new(cfg.link.ofdm, c.es())?,
        dm: Demapper::new(c),
        il: Interleaver::new(cfg.codec.codeword_len, cfg.codec.interleaver_seed),
        n0: cal.p_av / db_to_linear(cfg.snr_db),
        cal,
    };
    let (mut frames, mut bits, mut errors, mut frame_errors) = (0u64, 0u64, 0u64, 0u64);
    while frames < cfg.max_frames && (errors < cfg.min_errors || frames < cfg.min_frames) {
        let end = (frames + BER_BATCH).min(cfg.max_frames);
        let batch: Vec<(u64, u64)> = (frames..end).into_par_iter().map(|f| link.frame(f)).collect::<Result<_>>()?;
        for (e, b) in batch {
            errors += e;
            bits += b;
            frame_errors += u64::from(e > 0);
        }
        frames = end;
    }
    Ok(BerPoint {
        snr_db: cfg.snr_db,
        frames,
        bits,
        errors,
        frame_errors,
        ber: errors as f64 / bits as f64,
    })
}
