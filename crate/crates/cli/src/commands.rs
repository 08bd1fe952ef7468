//! Subcommand implementations. Each returns the text to write.

use anyhow::{bail, Context, Result};
use nenu_core::coding::CodecConfig;
use nenu_core::metrics::{
    bmi_awgn_ghq, db_to_linear, optimize_params, BmiEvaluator, GhqEvaluator, SearchStrategy, DEFAULT_GHQ_NODES,
};
use nenu_core::ofdm::{Ccdf, OfdmParams};
use nenu_core::report::SimReport;
use nenu_core::shaping::{design, Constellation};
use nenu_core::system::{
    ber_point, bmi_system, papr_samples, BerConfig, BmiSystem, ChannelKind, LinkParams, LinkSystem, McBmiConfig,
    McEvaluator, PaprConfig,
};
use serde::Serialize;

use crate::settings::{parse_snr_grid, Settings};

const DEFAULT_M: usize = 32;
const DEFAULT_ES: f64 = 2.0;
const DEFAULT_SEED: u64 = 1;
const DEFAULT_BMI_SYMBOLS: usize = 200_000;
const DEFAULT_PAPR_SYMBOLS: usize = 10_000;

#[derive(Debug, Clone, Serialize)]
struct ConstellationEcho {
    source: String,
    m: usize,
    n: usize,
    rho: Option<f64>,
    es: f64,
}

fn constellation(s: &Settings) -> Result<(Constellation, ConstellationEcho)> {
    let c = if let Some(path) = &s.constellation {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Constellation::from_table(&text)?
    } else {
        let m = s.m.unwrap_or(DEFAULT_M);
        let n = s.n.unwrap_or(m);
        let rho = match s.rho {
            Some(r) => r,
            None if n == m => 0.0,
            None => bail!("--rho is required when N < M"),
        };
        design(m, n, rho, s.es.unwrap_or(DEFAULT_ES))?
    };
    let echo = ConstellationEcho {
        source: s
            .constellation
            .as_ref()
            .map_or_else(|| "design".to_string(), |p| p.display().to_string()),
        m: c.order(),
        n: c.distinct_count(),
        rho: c.rho(),
        es: c.es(),
    };
    Ok((c, echo))
}

fn link(s: &Settings) -> Result<LinkParams> {
    let d = LinkParams::default();
    let p = LinkParams {
        ofdm: OfdmParams::new(
            s.nc.unwrap_or(d.ofdm.nc),
            s.oversampling.unwrap_or(d.ofdm.oversampling),
            s.gamma_cr.unwrap_or(d.ofdm.clip_ratio),
        )?,
        kmax: s.kmax.unwrap_or(d.kmax),
        paths: s.paths.unwrap_or(d.paths),
    };
    p.validate()?;
    Ok(p)
}

fn snr_grid(s: &Settings, default: &str) -> Result<Vec<f64>> {
    parse_snr_grid(s.snr.as_deref().unwrap_or(default))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.9}")
}

pub fn cmd_design(s: &Settings) -> Result<String> {
    let (c, _) = constellation(s)?;
    Ok(c.to_table())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Ghq,
    Mc,
}

fn method(s: &Settings, system: BmiSystem) -> Result<Method> {
    let m = match s.method.as_deref() {
        None if system == BmiSystem::A1 => Method::Ghq,
        None => Method::Mc,
        Some(t) if t.eq_ignore_ascii_case("ghq") => Method::Ghq,
        Some(t) if t.eq_ignore_ascii_case("mc") => Method::Mc,
        Some(t) => bail!("unknown method `{t}` (ghq or mc)"),
    };
    if m == Method::Ghq && system != BmiSystem::A1 {
        bail!("quadrature covers only A1 (AWGN without CAF); use --method mc for {system}");
    }
    Ok(m)
}

#[derive(Debug, Serialize)]
struct BmiRun {
    constellation: ConstellationEcho,
    system: BmiSystem,
    method: Method,
    snr_db: Vec<f64>,
    nodes: usize,
    symbols: usize,
    link: LinkParams,
    seed: u64,
}

pub fn cmd_bmi(s: &Settings) -> Result<String> {
    let (c, echo) = constellation(s)?;
    let system: BmiSystem = s.system.as_deref().unwrap_or("A1").parse()?;
    let method = method(s, system)?;
    let run = BmiRun {
        constellation: echo,
        system,
        method,
        snr_db: snr_grid(s, "26")?,
        nodes: s.nodes.unwrap_or(DEFAULT_GHQ_NODES),
        symbols: s.symbols.unwrap_or(DEFAULT_BMI_SYMBOLS),
        link: link(s)?,
        seed: s.seed.unwrap_or(DEFAULT_SEED),
    };
    let metric = match method {
        Method::Ghq => "exact Gaussian channel law",
        Method::Mc => "Gaussian mismatched metric with measured residual distortion variance",
    };
    let mut report = SimReport::new(
        "bmi",
        &run,
        run.seed,
        &["snr_db", "bmi", "stderr", "samples", "shannon_loss"],
    )?
    .with_meta("metric", metric);
    for &snr in &run.snr_db {
        let est = match method {
            Method::Ghq => bmi_awgn_ghq(&c, snr, run.nodes)?,
            Method::Mc => {
                let cfg = McBmiConfig {
                    system,
                    snr_db: snr,
                    link: run.link,
                    symbols: run.symbols,
                    seed: run.seed,
                };
                bmi_system(&c, &cfg)?.bmi
            }
        };
        let loss = (1.0 + db_to_linear(snr)).log2() - 2.0 * est.value;
        report.push_row(vec![
            format!("{snr:.2}"),
            fmt_f(est.value),
            format!("{:.3e}", est.std_error),
            est.samples.to_string(),
            fmt_f(loss),
        ])?;
    }
    Ok(report.to_csv())
}

fn strategy(s: &Settings, default: SearchStrategy) -> Result<SearchStrategy> {
    match s.strategy.as_deref() {
        None => Ok(default),
        Some("exhaustive") => Ok(SearchStrategy::Exhaustive),
        Some("two-stage") => Ok(SearchStrategy::two_stage()),
        Some(t) => bail!("unknown strategy `{t}` (exhaustive or two-stage)"),
    }
}

#[derive(Debug, Serialize)]
struct OptimizeRun {
    m: usize,
    es: f64,
    system: BmiSystem,
    method: Method,
    snr_db: f64,
    strategy: SearchStrategy,
    nodes: usize,
    symbols: usize,
    link: LinkParams,
    seed: u64,
}

pub fn cmd_optimize(s: &Settings) -> Result<String> {
    let system: BmiSystem = s.system.as_deref().unwrap_or("A1").parse()?;
    let method = method(s, system)?;
    let grid = snr_grid(s, "26")?;
    let [snr] = grid[..] else {
        bail!("optimize takes a single SNR, got {} values", grid.len());
    };
    let default_strategy = match method {
        Method::Ghq => SearchStrategy::Exhaustive,
        Method::Mc => SearchStrategy::two_stage(),
    };
    let run = OptimizeRun {
        m: s.m.unwrap_or(DEFAULT_M),
        es: s.es.unwrap_or(DEFAULT_ES),
        system,
        method,
        snr_db: snr,
        strategy: strategy(s, default_strategy)?,
        nodes: s.nodes.unwrap_or(DEFAULT_GHQ_NODES),
        symbols: s.symbols.unwrap_or(DEFAULT_BMI_SYMBOLS),
        link: link(s)?,
        seed: s.seed.unwrap_or(DEFAULT_SEED),
    };
    if run.nodes < 16 {
        bail!("quadrature needs at least 16 nodes, got {}", run.nodes);
    }
    let ghq;
    let mc;
    let evaluator: &dyn BmiEvaluator = match method {
        Method::Ghq => {
            ghq = GhqEvaluator::new(snr, run.nodes);
            &ghq
        }
        Method::Mc => {
            mc = McEvaluator {
                cfg: McBmiConfig {
                    system,
                    snr_db: snr,
                    link: run.link,
                    symbols: run.symbols,
                    seed: run.seed,
                },
            };
            &mc
        }
    };
    let result = optimize_params(run.m, run.es, evaluator, run.strategy)?;
    let mut report = SimReport::new("optimize", &run, run.seed, &["N", "rho", "bmi", "stderr", "samples"])?
        .with_meta("evaluator", &result.evaluator)
        .with_meta("best_n", result.best_n)
        .with_meta("best_rho", format!("{:.2}", result.best_rho))
        .with_meta("best_bmi", fmt_f(result.best_bmi.value));
    for row in result.csv_rows() {
        report.push_row(row)?;
    }
    Ok(report.to_csv())
}

#[derive(Debug, Serialize)]
struct PaprRun {
    constellation: ConstellationEcho,
    system: LinkSystem,
    ofdm: OfdmParams,
    symbols: usize,
    ccdf_step: f64,
    seed: u64,
}

pub fn cmd_papr(s: &Settings) -> Result<String> {
    let (c, echo) = constellation(s)?;
    let run = PaprRun {
        constellation: echo,
        system: s.system.as_deref().unwrap_or("S1").parse()?,
        ofdm: link(s)?.ofdm,
        symbols: s.symbols.unwrap_or(DEFAULT_PAPR_SYMBOLS),
        ccdf_step: s.ccdf_step.unwrap_or(0.1),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
    };
    if run.symbols == 0 {
        bail!("symbols must be > 0");
    }
    if !(run.ccdf_step > 0.0) {
        bail!("ccdf_step must be > 0");
    }
    let cfg = PaprConfig {
        system: run.system,
        ofdm: run.ofdm,
        symbols: run.symbols,
        seed: run.seed,
    };
    let ccdf = Ccdf::new(papr_samples(&c, &cfg)?);
    let mut report = SimReport::new("papr", &run, run.seed, &["papr_db", "ccdf"])?
        .with_meta("symbols", run.symbols);
    for p in [1e-2, 1e-3, 1e-4] {
        if (run.symbols as f64) * p >= 10.0 {
            report = report.with_meta(&format!("papr_db_at_{p:e}"), format!("{:.4}", ccdf.level(p)));
        }
    }
    let top = (ccdf.level(0.0) / run.ccdf_step).ceil() * run.ccdf_step;
    for (x, y) in ccdf.curve(0.0, top, run.ccdf_step) {
        report.push_row(vec![format!("{x:.3}"), format!("{y:.6e}")])?;
    }
    Ok(report.to_csv())
}

#[derive(Debug, Serialize)]
struct BerRun {
    constellation: ConstellationEcho,
    system: LinkSystem,
    channel: ChannelKind,
    snr_db: Vec<f64>,
    link: LinkParams,
    codec: CodecConfig,
    min_errors: u64,
    min_frames: u64,
    max_frames: u64,
    seed: u64,
}

pub fn cmd_ber(s: &Settings) -> Result<String> {
    let (c, echo) = constellation(s)?;
    let mut codec = CodecConfig::default();
    if let Some(len) = s.codeword_len {
        codec.codeword_len = len;
    }
    if let Some(seed) = s.interleaver_seed {
        codec.interleaver_seed = seed;
    }
    codec.validate()?;
    codec.check_symbol_fill(c.bits_per_dim())?;
    let run = BerRun {
        constellation: echo,
        system: s.system.as_deref().unwrap_or("S1").parse()?,
        channel: s.channel.as_deref().unwrap_or("awgn").parse()?,
        snr_db: snr_grid(s, "30")?,
        link: link(s)?,
        codec,
        min_errors: s.min_errors.unwrap_or(100),
        min_frames: s.min_frames.unwrap_or(1),
        max_frames: s.max_frames.unwrap_or(2000),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
    };
    let mut report = SimReport::new(
        "ber",
        &run,
        run.seed,
        &["snr_db", "ber", "errors", "bits", "frames", "frame_errors"],
    )?
    .with_meta("decoder", "max-log BCJR, K=7 (171,133) punctured to 5/6");
    for &snr in &run.snr_db {
        let mut cfg = BerConfig::new(run.system, run.channel, snr, run.seed);
        cfg.link = run.link;
        cfg.codec = run.codec.clone();
        cfg.min_errors = run.min_errors;
        cfg.min_frames = run.min_frames;
        cfg.max_frames = run.max_frames;
        let p = ber_point(&c, &cfg)?;
        report.push_row(vec![
            format!("{snr:.2}"),
            format!("{:.6e}", p.ber),
            p.errors.to_string(),
            p.bits.to_string(),
            p.frames.to_string(),
            p.frame_errors.to_string(),
        ])?;
    }
    Ok(report.to_csv())
}
