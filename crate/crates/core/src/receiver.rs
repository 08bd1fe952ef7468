//! Hard decisions, iterative clipping-noise cancellation and LLR demapping.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ofdm::Caf;
use crate::shaping::{label_bit, Constellation};

/// Nearest-point slicer over the distinct signed amplitudes.
///
/// Exact midpoints resolve to the point of smaller magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Slicer {
    points: Vec<f64>,
    thresholds: Vec<f64>,
}

impl Slicer {
    pub fn new(c: &Constellation) -> Self {
        Self::from_points(c.points().to_vec())
    }

    /// `points` must be sorted ascending.
    pub fn from_points(points: Vec<f64>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        let thresholds = points.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        Self { points, thresholds }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn index(&self, v: f64) -> usize {
        // a tie at a negative threshold goes up (towards zero), otherwise down
        self.thresholds.partition_point(|&t| v > t || (v == t && t < 0.0))
    }

    pub fn slice(&self, v: f64) -> f64 {
        self.points[self.index(v)]
    }

    /// Per-dimension decision on `y / alpha`.
    pub fn decide(&self, y: Complex64, alpha: f64) -> Complex64 {
        Complex64::new(self.slice(y.re / alpha), self.slice(y.im / alpha))
    }
}

/// Nearest constellation point of `y/α`, independently in I and Q.
pub fn hard_decision(y: Complex64, c: &Constellation, alpha: f64) -> Complex64 {
    assert!(alpha > 0.0, "alpha must be positive");
    Slicer::new(c).decide(y, alpha)
}

/// Iteration state of the clipping-noise canceller.
#[derive(Debug, Clone, PartialEq)]
pub struct CncState {
    /// Completed iterations.
    pub k: usize,
    pub kmax: usize,
    /// `Y^(K)`.
    pub y: Vec<Complex64>,
    /// `D̂^(K)`.
    pub d_hat: Vec<Complex64>,
    /// Decisions `Ẑ^(K)` made in the last iteration.
    pub z_hat: Vec<Complex64>,
}

impl CncState {
    pub fn done(&self) -> bool {
        self.k >= self.kmax
    }
}

/// Clipping-noise canceller bound to the transmitter's CAF stage.
#[derive(Debug, Clone)]
pub struct Cnc<'a> {
    caf: &'a Caf,
    slicer: Slicer,
    alpha: f64,
    kmax: usize,
}

impl<'a> Cnc<'a> {
    /// Fails when `caf` was not built for this constellation's `Es`.
    pub fn new(caf: &'a Caf, c: &Constellation, kmax: usize) -> Result<Self> {
        let rel = (caf.p_in() - c.es()).abs() / c.es();
        if rel > 1e-12 {
            return Err(Error::ParameterMismatch(format!(
                "limiter built for P_in = {}, constellation has Es = {}",
                caf.p_in(),
                c.es()
            )));
        }
        Ok(Self {
            caf,
            slicer: Slicer::new(c),
            alpha: caf.alpha(),
            kmax,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn start(&self, ytilde: &[Complex64]) -> Result<CncState> {
        let nc = self.caf.params().nc;
        if ytilde.len() != nc {
            return Err(Error::SizeMismatch {
                expected: nc,
                got: ytilde.len(),
            });
        }
        Ok(CncState {
            k: 0,
            kmax: self.kmax,
            y: ytilde.to_vec(),
            d_hat: vec![Complex64::new(0.0, 0.0); nc],
            z_hat: Vec::new(),
        })
    }

    /// One pass: decide, regenerate the clipped block, subtract its distortion.
    pub fn step(&self, state: &mut CncState, ytilde: &[Complex64]) -> Result<()> {
        let z_hat: Vec<Complex64> = state.y.iter().map(|&y| self.slicer.decide(y, self.alpha)).collect();
        let u_hat = self.caf.apply(&z_hat)?.u;
        for k in 0..ytilde.len() {
            state.d_hat[k] = u_hat[k] - self.alpha * z_hat[k];
            state.y[k] = ytilde[k] - state.d_hat[k];
        }
        state.z_hat = z_hat;
        state.k += 1;
        Ok(())
    }

    pub fn run(&self, ytilde: &[Complex64]) -> Result<CncState> {
        let mut state = self.start(ytilde)?;
        while !state.done() {
            self.step(&mut state, ytilde)?;
        }
        Ok(state)
    }
}

/// `Y^(Kmax)` for the received block `ytilde`.
pub fn cnc(ytilde: &[Complex64], c: &Constellation, caf: &Caf, kmax: usize) -> Result<Vec<Complex64>> {
    Ok(Cnc::new(caf, c, kmax)?.run(ytilde)?.y)
}

/// Per-dimension bit demapper.
///
/// LLRs use the metric `exp(-(y-x)²/n0)`; positive values favour bit 0.
#[derive(Debug, Clone)]
pub struct Demapper {
    n: usize,
    points: Vec<f64>,
    /// Distinct points present in each bit-level set, `[(i * 2 + b)]`.
    members: Vec<Vec<usize>>,
    /// Label multiplicity of every distinct point in each set.
    weights: Vec<Vec<f64>>,
}

impl Demapper {
    pub fn new(c: &Constellation) -> Self {
        let n = c.bits_per_dim();
        let np = c.distinct_count();
        let mut weights = vec![vec![0.0; np]; 2 * n];
        for label in 0..c.order() as u32 {
            let q = c.point_of_label(label);
            for i in 0..n {
                weights[i * 2 + label_bit(label, i, n) as usize][q] += 1.0;
            }
        }
        let members = weights
            .iter()
            .map(|w| (0..np).filter(|&q| w[q] > 0.0).collect())
            .collect();
        Self {
            n,
            points: c.points().to_vec(),
            members,
            weights,
        }
    }

    pub fn bits(&self) -> usize {
        self.n
    }

    /// Number of candidate points each LLR evaluation enumerates.
    pub fn candidate_count(&self) -> usize {
        self.points.len()
    }

    pub fn llr_maxlog_into(&self, y: f64, n0: f64, out: &mut [f64]) {
        debug_assert!(n0 > 0.0);
        let min = |set: &[usize]| {
            set.iter()
                .map(|&q| (y - self.points[q]) * (y - self.points[q]))
                .fold(f64::INFINITY, f64::min)
        };
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (min(&self.members[i * 2 + 1]) - min(&self.members[i * 2])) / n0;
        }
    }

    pub fn llr_exact_into(&self, y: f64, n0: f64, out: &mut [f64]) {
        debug_assert!(n0 > 0.0);
        // log-sum-exp per set keeps far-away sets finite
        let lse = |set: usize| -> f64 {
            let m = |q: usize| -(y - self.points[q]) * (y - self.points[q]) / n0;
            let members = &self.members[set];
            let mx = members.iter().map(|&q| m(q)).fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = members.iter().map(|&q| self.weights[set][q] * (m(q) - mx).exp()).sum();
            mx + s.ln()
        };
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = lse(i * 2) - lse(i * 2 + 1);
        }
    }

    pub fn llr_maxlog(&self, y: f64, n0: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.llr_maxlog_into(y, n0, &mut out);
        out
    }

    pub fn llr_exact(&self, y: f64, n0: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.llr_exact_into(y, n0, &mut out);
        out
    }
}

pub fn llr_maxlog(y: f64, c: &Constellation, n0: f64) -> Vec<f64> {
    assert!(n0 > 0.0);
    Demapper::new(c).llr_maxlog(y, n0)
}

pub fn llr_exact(y: f64, c: &Constellation, n0: f64) -> Vec<f64> {
    assert!(n0 > 0.0);
    Demapper::new(c).llr_exact(y, n0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LlrKind {
    #[default]
    MaxLog,
    Exact,
}

/// LLRs of a block of complex symbols: `2n` values per symbol, in-phase
/// label first, MSB first.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub bits_per_dim: usize,
    pub llrs: Vec<f64>,
    /// Metric `N0` per symbol.
    pub n0: Vec<f64>,
}

impl LlrFrame {
    pub fn demap(dm: &Demapper, y: &[Complex64], n0: &[f64], kind: LlrKind) -> Result<Self> {
        if y.len() != n0.len() {
            return Err(Error::SizeMismatch {
                expected: y.len(),
                got: n0.len(),
            });
        }
        if let Some(v) = n0.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {v}")));
        }
        let n = dm.bits();
        let mut llrs = vec![0.0; 2 * n * y.len()];
        for ((sym, &v), chunk) in y.iter().zip(n0).zip(llrs.chunks_mut(2 * n)) {
            let (re, im) = chunk.split_at_mut(n);
            match kind {
                LlrKind::MaxLog => {
                    dm.llr_maxlog_into(sym.re, v, re);
                    dm.llr_maxlog_into(sym.im, v, im);
                }
                LlrKind::Exact => {
                    dm.llr_exact_into(sym.re, v, re);
                    dm.llr_exact_into(sym.im, v, im);
                }
            }
        }
        Ok(Self {
            bits_per_dim: n,
            llrs,
            n0: n0.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::OfdmParams;
    use crate::shaping::design;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hard_decision_recovers_points() {
        let con = design(32, 20, 0.9, 2.0).unwrap();
        let alpha = 0.93;
        for &a in con.points() {
            for &b in con.points() {
                assert_eq!(hard_decision(c(a, b) * alpha, &con, alpha), c(a, b));
            }
        }
    }

    #[test]
    fn midpoint_ties_pick_smaller_magnitude() {
        let s = Slicer::from_points(vec![-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(s.slice(2.0), 1.0);
        assert_eq!(s.slice(-2.0), -1.0);
        assert_eq!(s.slice(0.0), -1.0);
        assert_eq!(s.slice(2.0 + 1e-12), 3.0);
        assert_eq!(s.slice(-10.0), -3.0);
        assert_eq!(s.slice(10.0), 3.0);
    }

    #[test]
    fn llr_signs_and_symmetry() {
        let con = design(32, 24, 0.93, 2.0).unwrap();
        let dm = Demapper::new(&con);
        assert_eq!(dm.candidate_count(), 24);
        let n = con.bits_per_dim();
        for label in 0..32u32 {
            let y = con.amplitude(label);
            let l = dm.llr_maxlog(y, 0.01);
            for (i, v) in l.iter().enumerate() {
                // a merged point carries both bit values at some levels
                let set0 = con.bit_level_set(i, 0).unwrap();
                let set1 = con.bit_level_set(i, 1).unwrap();
                let in0 = set0.iter().any(|&(_, a)| a == y);
                let in1 = set1.iter().any(|&(_, a)| a == y);
                match (in0, in1) {
                    (true, false) => assert!(*v > 0.0),
                    (false, true) => assert!(*v < 0.0),
                    _ => assert_eq!(*v, 0.0),
                }
            }
        }
        let l0 = dm.llr_maxlog(0.0, 0.3);
        assert_eq!(l0[0], 0.0);
        for y in [0.1, 0.7, 1.3] {
            let a = dm.llr_maxlog(y, 0.2);
            let b = dm.llr_maxlog(-y, 0.2);
            assert!((a[0] + b[0]).abs() < 1e-12);
            for i in 1..n {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bpsk_closed_form() {
        let con = design(4, 2, 1.0, 2.0).unwrap();
        let a = con.points()[1];
        for y in [-0.7, 0.2, 1.5] {
            let n0 = 0.4;
            let exact = llr_exact(y, &con, n0);
            assert!((exact[0] - 4.0 * y * a / n0).abs() < 1e-12);
            assert_eq!(exact[1], 0.0);
        }
    }

    #[test]
    fn exact_llr_prior_limit() {
        let con = design(32, 12, 0.95, 2.0).unwrap();
        let n = con.bits_per_dim();
        let l = llr_exact(0.3, &con, 1e9);
        for i in 0..n {
            let ones = con.bit_level_set(i, 1).unwrap();
            let zeros = con.bit_level_set(i, 0).unwrap();
            assert_eq!(ones.len(), zeros.len());
            // equal label counts per bit value, so the prior ratio is 1
            assert!(l[i].abs() < 1e-6, "level {i}: {}", l[i]);
        }
    }

    #[test]
    fn maxlog_close_to_exact_at_high_snr() {
        let con = Constellation::uniform(4, 2.0).unwrap();
        let n0 = 2.0 / 1000.0;
        for k in 0..200 {
            let y = -1.5 + k as f64 * 0.015;
            let a = llr_maxlog(y, &con, n0);
            let b = llr_exact(y, &con, n0);
            for (x, z) in a.iter().zip(&b) {
                assert!((x - z).abs() < 0.1, "y={y}: {x} vs {z}");
            }
        }
    }

    #[test]
    fn frame_layout() {
        let con = Constellation::uniform(4, 2.0).unwrap();
        let dm = Demapper::new(&con);
        let p = con.points()[3];
        let f = LlrFrame::demap(&dm, &[c(p, -p)], &[0.1], LlrKind::MaxLog).unwrap();
        assert_eq!(f.llrs.len(), 4);
        assert!(f.llrs[0] > 0.0 && f.llrs[2] < 0.0);
        assert!(LlrFrame::demap(&dm, &[c(p, -p)], &[0.0], LlrKind::MaxLog).is_err());
    }

    #[test]
    fn cnc_passthrough_without_clipping() {
        let con = design(32, 24, 0.93, 2.0).unwrap();
        let caf = Caf::new(OfdmParams::new(64, 4, 10.0).unwrap(), 2.0).unwrap();
        let y: Vec<Complex64> = (0..64).map(|i| c(con.points()[i % 24], con.points()[(i * 7) % 24])).collect();
        let out = cnc(&y, &con, &caf, 5).unwrap();
        for (a, b) in y.iter().zip(&out) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn cnc_rejects_mismatch() {
        let con = design(32, 24, 0.93, 2.0).unwrap();
        let caf = Caf::new(OfdmParams::new(64, 4, 1.5).unwrap(), 1.0).unwrap();
        assert!(matches!(Cnc::new(&caf, &con, 3), Err(Error::ParameterMismatch(_))));
        let caf = Caf::new(OfdmParams::new(64, 4, 1.5).unwrap(), 2.0).unwrap();
        assert!(matches!(cnc(&[c(0.0, 0.0); 8], &con, &caf, 3), Err(Error::SizeMismatch { .. })));
    }
}
