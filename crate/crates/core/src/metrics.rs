//! Bit-wise mutual information (BMI) and the `(N, ρ)` grid optimizer.
//!
//! BMI per dimension of a PAM constellation `A` over `y = x + w`,
//! `w ~ N(0, N0/2)`:
//!
//! ```text
//! C = n - Σ_i E_{b,y}[ log2( Σ_{x∈A} p(y|x) / Σ_{x∈A_b^(i)} p(y|x) ) ]
//! ```
//!
//! Sums run over all `M` label slots, so merged points enter once per label.
//! The AWGN expectation is evaluated with Gauss–Hermite quadrature; distorted
//! channels are handled by a Monte-Carlo estimate of the same expression
//! with a Gaussian decoding metric.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shaping::{design, label_bit, Constellation};

pub const DEFAULT_GHQ_NODES: usize = 64;

/// Gauss–Hermite rule for `∫ e^{-t²} f(t) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let half = n.div_ceil(2);
        let mut z = 0.0_f64;
        for i in 0..half {
            z = match i {
                0 => {
                    let s = (2 * n + 1) as f64;
                    s.sqrt() - 1.855_75 * s.powf(-1.0 / 6.0)
                }
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self { nodes: x, weights: w }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BmiMethod {
    Ghq,
    MonteCarlo,
}

/// BMI in bits per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmiEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Quadrature nodes (GHQ) or scalar observations (Monte Carlo).
    pub samples: usize,
    pub method: BmiMethod,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-level, per-bit label multiplicities of each distinct point.
struct LevelWeights {
    n: usize,
    total: Vec<f64>,
    /// `by_bit[(i * 2 + b) * N + q]`
    by_bit: Vec<f64>,
}

impl LevelWeights {
    fn new(c: &Constellation) -> Self {
        let n = c.bits_per_dim();
        let np = c.distinct_count();
        let total = c.label_counts().iter().map(|&k| k as f64).collect();
        let mut by_bit = vec![0.0; 2 * n * np];
        for label in 0..c.order() as u32 {
            let q = c.point_of_label(label);
            for i in 0..n {
                let b = label_bit(label, i, n) as usize;
                by_bit[(i * 2 + b) * np + q] += 1.0;
            }
        }
        Self { n, total, by_bit }
    }

    fn row(&self, level: usize, bit: usize) -> &[f64] {
        let np = self.total.len();
        let start = (level * 2 + bit) * np;
        &self.by_bit[start..start + np]
    }
}

// Relative metrics exp(-(y-x)²/n0 - max) per distinct point.
fn metrics_into(points: &[f64], y: f64, n0: f64, out: &mut [f64]) {
    let mut mx = f64::NEG_INFINITY;
    for (o, &p) in out.iter_mut().zip(points) {
        let d = -(y - p) * (y - p) / n0;
        *o = d;
        mx = mx.max(d);
    }
    for o in out.iter_mut() {
        *o = (*o - mx).exp();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BMI over AWGN at `γ = Es/N0` (dB) by Gauss–Hermite quadrature.
pub fn bmi_awgn_ghq(c: &Constellation, snr_db: f64, nodes: usize) -> Result<BmiEstimate> {
    if nodes < 16 {
        return Err(Error::InvalidParameter(format!(
            "GHQ needs at least 16 nodes, got {nodes}"
        )));
    }
    Ok(bmi_awgn_ghq_with(&GaussHermite::new(nodes), c, snr_db))
}

/// As [`bmi_awgn_ghq`] with a prebuilt rule.
pub fn bmi_awgn_ghq_with(rule: &GaussHermite, c: &Constellation, snr_db: f64) -> BmiEstimate {
    let n0 = c.es() / db_to_linear(snr_db);
    let sqrt_n0 = n0.sqrt();
    let pts = c.points();
    let lw = LevelWeights::new(c);
    let mut e = vec![0.0; pts.len()];
    let mut acc = 0.0;
    for (j, &xj) in pts.iter().enumerate() {
        for (&t, &wt) in rule.nodes().iter().zip(rule.weights()) {
            let y = xj + sqrt_n0 * t;
            metrics_into(pts, y, n0, &mut e);
            let tot = dot(&lw.total, &e);
            let mut contrib = 0.0;
            for i in 0..lw.n {
                for b in 0..2 {
                    let row = lw.row(i, b);
                    if row[j] == 0.0 {
                        continue;
                    }
                    contrib += row[j] * (tot / dot(row, &e)).log2();
                }
            }
            acc += wt * contrib;
        }
    }
    let loss = acc / (PI.sqrt() * c.order() as f64);
    BmiEstimate {
        value: lw.n as f64 - loss,
        std_error: 0.0,
        samples: rule.order(),
        method: BmiMethod::Ghq,
    }
}

/// One received scalar with its transmitted label and decoding-metric `N0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub label: u32,
    pub y: f64,
    /// Noise parameter of the Gaussian metric `exp(-(y-x)²/n0)`.
    pub n0: f64,
}

/// Monte-Carlo BMI from `(label, y)` pairs with a common metric `n0_eff`.
pub fn bmi_monte_carlo(obs: &[(u32, f64)], c: &Constellation, n0_eff: f64) -> Result<BmiEstimate> {
    let obs: Vec<Observation> = obs
        .iter()
        .map(|&(label, y)| Observation { label, y, n0: n0_eff })
        .collect();
    bmi_monte_carlo_weighted(&obs, c)
}

/// Monte-Carlo BMI where each observation carries its own metric `n0`.
///
/// Each sample contributes `n - Σ_i log2(Σ_x q(y|x) / Σ_{x∈A_b^(i)} q(y|x))`
/// with `q(y|x) = exp(-(y-x)²/n0)`; the result is the sample mean and its
/// standard error. A zero `n0` is treated as the noiseless limit.
pub fn bmi_monte_carlo_weighted(obs: &[Observation], c: &Constellation) -> Result<BmiEstimate> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let pts = c.points();
    let lw = LevelWeights::new(c);
    let n = lw.n;
    let mut e = vec![0.0; pts.len()];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for o in obs {
        let n0 = o.n0.max(f64::MIN_POSITIVE);
        metrics_into(pts, o.y, n0, &mut e);
        let tot = dot(&lw.total, &e);
        let mut loss = 0.0;
        for i in 0..n {
            let b = label_bit(o.label, i, n) as usize;
            loss += (tot / dot(lw.row(i, b), &e)).log2();
        }
        let v = n as f64 - loss;
        sum += v;
        sum_sq += v * v;
    }
    let s = obs.len() as f64;
    let mean = sum / s;
    let var = if obs.len() > 1 {
        ((sum_sq - s * mean * mean) / (s - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(BmiEstimate {
        value: mean,
        std_error: (var / s).sqrt(),
        samples: obs.len(),
        method: BmiMethod::MonteCarlo,
    })
}

/// `log2(1 + γ) - 2·C(A, γ)` in bits per 2-D symbol.
pub fn shannon_loss(c: &Constellation, snr_db: f64, nodes: usize) -> Result<f64> {
    let bmi = bmi_awgn_ghq(c, snr_db, nodes)?;
    Ok((1.0 + db_to_linear(snr_db)).log2() - 2.0 * bmi.value)
}

/// Scores a candidate constellation for the grid search.
pub trait BmiEvaluator: Sync {
    fn evaluate(&self, c: &Constellation) -> Result<BmiEstimate>;

    /// Short human-readable description, echoed into reports.
    fn describe(&self) -> String;
}

/// AWGN evaluation by quadrature.
#[derive(Debug, Clone)]
pub struct GhqEvaluator {
    pub snr_db: f64,
    rule: GaussHermite,
}

impl GhqEvaluator {
    pub fn new(snr_db: f64, nodes: usize) -> Self {
        Self {
            snr_db,
            rule: GaussHermite::new(nodes),
        }
    }
}

impl BmiEvaluator for GhqEvaluator {
    fn evaluate(&self, c: &Constellation) -> Result<BmiEstimate> {
        Ok(bmi_awgn_ghq_with(&self.rule, c, self.snr_db))
    }

    fn describe(&self) -> String {
        format!("ghq-awgn snr_db={} nodes={}", self.snr_db, self.rule.order())
    }
}

/// How the `ρ` axis is scanned. `ρ` is always quantized to 0.01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStrategy {
    /// Every `ρ ∈ {0.00, 0.01, …, 1.00}` for every `N`.
    Exhaustive,
    /// Coarse pass at `coarse_step` hundredths, then ±`radius` at 0.01
    /// around the coarse optimum of the `refine_top` best `N` values.
    TwoStage {
        coarse_step: u32,
        radius: u32,
        refine_top: usize,
    },
}

impl SearchStrategy {
    pub fn two_stage() -> Self {
        Self::TwoStage {
            coarse_step: 5,
            radius: 5,
            refine_top: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    /// `ρ` in hundredths.
    pub rho_pct: u32,
    pub bmi: BmiEstimate,
}

impl GridCell {
    pub fn rho(&self) -> f64 {
        self.rho_pct as f64 / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub m: usize,
    pub best_n: usize,
    pub best_rho: f64,
    pub best_bmi: BmiEstimate,
    /// Evaluated cells sorted by `(N, ρ)`.
    pub grid: Vec<GridCell>,
    pub strategy: SearchStrategy,
    pub evaluator: String,
}

impl OptimizationResult {
    /// CSV rows `N, rho, bmi, stderr, samples`.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.grid
            .iter()
            .map(|g| {
                vec![
                    g.n.to_string(),
                    format!("{:.2}", g.rho()),
                    format!("{:.9}", g.bmi.value),
                    format!("{:.3e}", g.bmi.std_error),
                    g.bmi.samples.to_string(),
                ]
            })
            .collect()
    }
}

fn evaluate_cells(
    m: usize,
    es: f64,
    cells: &[(usize, u32)],
    evaluator: &dyn BmiEvaluator,
) -> Result<Vec<GridCell>> {
    cells
        .par_iter()
        .map(|&(n, rho_pct)| {
            let rho = rho_pct as f64 / 100.0;
            let wrap = |e: Error| Error::Cell {
                n,
                rho,
                source: Box::new(e),
            };
            let c = design(m, n, rho, es).map_err(wrap)?;
            let bmi = evaluator.evaluate(&c).map_err(wrap)?;
            Ok(GridCell { n, rho_pct, bmi })
        })
        .collect()
}

fn rho_allowed(m: usize, n: usize, pct: u32) -> bool {
    pct <= 100 && (pct > 0 || n == m)
}

/// Grid search of `max_{N, ρ} C(A(M, N, ρ))`.
///
/// `ρ = 0` (uniform PAM) is only defined for `N = M` and is skipped for
/// smaller `N`. Cell results do not depend on evaluation order.
pub fn optimize_params(
    m: usize,
    es: f64,
    evaluator: &dyn BmiEvaluator,
    strategy: SearchStrategy,
) -> Result<OptimizationResult> {
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::InvalidOrder(m));
    }
    let ns: Vec<usize> = (1..=m / 2).map(|k| 2 * k).collect();
    let mut grid = match strategy {
        SearchStrategy::Exhaustive => {
            let cells: Vec<(usize, u32)> = ns
                .iter()
                .flat_map(|&n| (0..=100).filter(move |&p| rho_allowed(m, n, p)).map(move |p| (n, p)))
                .collect();
            evaluate_cells(m, es, &cells, evaluator)?
        }
        SearchStrategy::TwoStage {
            coarse_step,
            radius,
            refine_top,
        } => {
            if coarse_step == 0 {
                return Err(Error::InvalidParameter("coarse step must be > 0".into()));
            }
            let coarse: Vec<(usize, u32)> = ns
                .iter()
                .flat_map(|&n| {
                    (0..=100)
                        .step_by(coarse_step as usize)
                        .filter(move |&p| rho_allowed(m, n, p))
                        .map(move |p| (n, p))
                })
                .collect();
            let mut grid = evaluate_cells(m, es, &coarse, evaluator)?;
            // best coarse cell per N, then the top few N overall
            let mut per_n: Vec<GridCell> = ns
                .iter()
                .filter_map(|&n| {
                    grid.iter()
                        .filter(|g| g.n == n)
                        .max_by(|a, b| a.bmi.value.total_cmp(&b.bmi.value))
                        .copied()
                })
                .collect();
            per_n.sort_by(|a, b| b.bmi.value.total_cmp(&a.bmi.value));
            let mut fine = Vec::new();
            for best in per_n.iter().take(refine_top) {
                let lo = best.rho_pct.saturating_sub(radius);
                let hi = (best.rho_pct + radius).min(100);
                for p in lo..=hi {
                    if rho_allowed(m, best.n, p) && !coarse.contains(&(best.n, p)) {
                        fine.push((best.n, p));
                    }
                }
            }
            grid.extend(evaluate_cells(m, es, &fine, evaluator)?);
            grid
        }
    };
    grid.sort_by_key(|g| (g.n, g.rho_pct));
    let best = *grid
        .iter()
        .max_by(|a, b| {
            a.bmi
                .value
                .total_cmp(&b.bmi.value)
                // prefer the earlier (smaller N, smaller ρ) cell on exact ties
                .then_with(|| (b.n, b.rho_pct).cmp(&(a.n, a.rho_pct)))
        })
        .expect("grid is never empty");
    Ok(OptimizationResult {
        m,
        best_n: best.n,
        best_rho: best.rho(),
        best_bmi: best.bmi,
        grid,
        strategy,
        evaluator: evaluator.describe(),
    })
}
