//! Experiment parameters from a JSON file and/or command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Every experiment parameter. Flags override values read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// JSON file with any of the parameters below (snake_case keys).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Labels per dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Distinct amplitudes per dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Shaping parameter in [0, 1]; 0 selects uniform PAM.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Energy per complex symbol.
    #[arg(long)]
    pub es: Option<f64>,
    /// Constellation table file, instead of M/N/rho.
    #[arg(long)]
    pub constellation: Option<PathBuf>,
    /// Subcarriers.
    #[arg(long)]
    pub nc: Option<usize>,
    /// Oversampling factor J.
    #[arg(long)]
    pub oversampling: Option<usize>,
    /// Clipping ratio.
    #[arg(long)]
    pub gamma_cr: Option<f64>,
    /// CNC iterations.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Rayleigh paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// SNR in dB: `start:step:stop` or a comma list.
    #[arg(long)]
    pub snr: Option<String>,
    /// A1, A2, A3, F1, F2 (bmi, optimize) or S1, S2, S3 (papr, ber).
    #[arg(long)]
    pub system: Option<String>,
    /// awgn or rayleigh.
    #[arg(long)]
    pub channel: Option<String>,
    /// ghq or mc.
    #[arg(long)]
    pub method: Option<String>,
    /// Gauss-Hermite nodes.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Monte-Carlo budget: subcarrier symbols (bmi, optimize) or OFDM symbols (papr).
    #[arg(long)]
    pub symbols: Option<usize>,
    /// exhaustive or two-stage.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub codeword_len: Option<usize>,
    #[arg(long)]
    pub interleaver_seed: Option<u64>,
    #[arg(long)]
    pub min_errors: Option<u64>,
    #[arg(long)]
    pub min_frames: Option<u64>,
    #[arg(long)]
    pub max_frames: Option<u64>,
    /// PAPR grid step of the CCDF output, dB.
    #[arg(long)]
    pub ccdf_step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),+) => {
        Settings {
            config: $hi.config.clone(),
            out: $hi.out.clone().or($lo.out.clone()),
            $($f: $hi.$f.clone().or($lo.$f.clone())),+
        }
    };
}

impl Settings {
    /// Flags layered over the `--config` file, if any.
    pub fn resolve(self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = Self::read(&path)?;
        Ok(overlay!(self, file; m, n, rho, es, constellation, nc, oversampling, gamma_cr, kmax, paths,
            snr, system, channel, method, nodes, symbols, strategy, codeword_len, interleaver_seed,
            min_errors, min_frames, max_frames, ccdf_step, seed))
    }

    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Parses `start:step:stop` (inclusive) or `a,b,c`; result is sorted.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().with_context(|| format!("bad SNR value `{s}`"))?;
        if !v.is_finite() {
            bail!("bad SNR value `{s}`");
        }
        Ok(v)
    };
    let mut grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("SNR range must be start:step:stop, got `{text}`");
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 || stop < start {
            bail!("SNR range `{text}` is empty");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        bail!("empty SNR grid");
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}
