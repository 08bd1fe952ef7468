//! Non-equiprobable, non-uniform (NENU) PAM constellations.
//!
//! An `(M, N)`-PAM has `M` BRGC bit labels but only `N` distinct amplitudes.
//! Construction runs in three stages:
//!
//! 1. [`build_initial`]: every positive label slot `k` gets the odd index
//!    `l_k = 2k - 1` and the tentative amplitude `erf⁻¹(ρ·l/M)`, i.e. the
//!    CDF midpoint of the `k`-th equiprobable slice of a Gaussian truncated
//!    at `erf⁻¹(ρ)`.
//! 2. [`merge_to`]: the closest pair of neighbouring amplitudes with equal
//!    label multiplicity is repeatedly fused into one point at index
//!    `(l_i + l_j)/2` until `N/2` positive points remain. Merged points
//!    carry several labels and so become more probable.
//! 3. [`normalize`]: amplitudes are scaled so that the label-weighted power
//!    per dimension equals `Es/2`.
//!
//! `ρ = 0` is the uniform-PAM limit and is handled by a linear mapper.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::erf_inv;

/// Returns `k ^ (k >> 1)`.
pub fn gray(k: u32) -> u32 {
    k ^ (k >> 1)
}

fn inverse_gray(mut g: u32) -> u32 {
    let mut shift = g >> 1;
    while shift != 0 {
        g ^= shift;
        shift >>= 1;
    }
    g
}

fn check_order(m: usize) -> Result<usize> {
    if m < 4 || !m.is_power_of_two() || m > 1 << 16 {
        return Err(Error::InvalidOrder(m));
    }
    Ok(m.trailing_zeros() as usize)
}

/// BRGC label of the `k`-th positive amplitude (1-based) as an `n`-bit word.
///
/// The MSB is the sign bit and is 0 here; the remaining `n - 1` bits are the
/// reflected Gray code of `k - 1`.
pub fn gray_label(k: usize, n: usize) -> Result<u32> {
    if n == 0 || n > 16 {
        return Err(Error::InvalidParameter(format!("label width {n}")));
    }
    let max = 1usize << (n - 1);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    Ok(gray((k - 1) as u32))
}

/// Formats a label as an `n`-character bit string, MSB first.
pub fn label_bits(label: u32, n: usize) -> String {
    (0..n)
        .map(|i| if (label >> (n - 1 - i)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Bit `level` of `label`, where level 0 is the MSB (sign bit).
#[inline]
pub fn label_bit(label: u32, level: usize, n: usize) -> u32 {
    (label >> (n - 1 - level)) & 1
}

/// Positive-region labels ordered by amplitude rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTable {
    m: usize,
    bits: usize,
    positive: Vec<u32>,
}

impl LabelTable {
    /// Binary reflected Gray code labeling for `M`-PAM.
    pub fn brgc(m: usize) -> Result<Self> {
        let bits = check_order(m)?;
        let positive = (1..=m / 2)
            .map(|k| gray_label(k, bits))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { m, bits, positive })
    }

    /// Arbitrary positive-region labels (e.g. from an external table).
    pub fn from_positive(m: usize, positive: Vec<u32>) -> Result<Self> {
        let bits = check_order(m)?;
        if positive.len() != m / 2 {
            return Err(Error::SizeMismatch {
                expected: m / 2,
                got: positive.len(),
            });
        }
        let mut seen = vec![false; m / 2];
        for &l in &positive {
            if l as usize >= m / 2 || std::mem::replace(&mut seen[l as usize], true) {
                return Err(Error::InvalidParameter(format!(
                    "positive label {l} repeated or has MSB set"
                )));
            }
        }
        Ok(Self { m, bits, positive })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn bits_per_label(&self) -> usize {
        self.bits
    }

    pub fn sign_mask(&self) -> u32 {
        1 << (self.bits - 1)
    }

    /// Label of positive slot `slot` (0-based rank).
    pub fn positive(&self, slot: usize) -> u32 {
        self.positive[slot]
    }

    pub fn positive_labels(&self) -> &[u32] {
        &self.positive
    }

    /// Label of the negative mirror of `slot`.
    pub fn negative(&self, slot: usize) -> u32 {
        self.positive[slot] | self.sign_mask()
    }

    /// Returns `(slot, is_negative)` for a label.
    pub fn slot_of(&self, label: u32) -> (usize, bool) {
        let neg = label & self.sign_mask() != 0;
        let low = label & !self.sign_mask();
        let slot = if self.is_brgc() {
            inverse_gray(low) as usize
        } else {
            self.positive.iter().position(|&p| p == low).expect("label in table")
        };
        (slot, neg)
    }

    fn is_brgc(&self) -> bool {
        self.positive
            .iter()
            .enumerate()
            .all(|(k, &l)| l == gray(k as u32))
    }
}

/// Tentative amplitude `φ_M(l; ρ) = erf⁻¹(ρ·l/M)`.
///
/// Requires `1 <= l <= M - 1` and `0 < ρ <= 1`.
pub fn mapper_phi(l: u32, m: usize, rho: f64) -> f64 {
    assert!(l >= 1 && (l as usize) < m, "index {l} outside 1..{m}");
    assert!(rho > 0.0 && rho <= 1.0, "rho {rho} outside (0, 1]");
    let arg = rho * l as f64 / m as f64;
    assert!(arg < 1.0);
    erf_inv(arg)
}

// ρ = 0 is the linearised CDF: amplitudes proportional to the index.
fn tentative_amplitude(l: u32, m: usize, rho: f64) -> f64 {
    if rho == 0.0 {
        l as f64 / m as f64
    } else {
        mapper_phi(l, m, rho)
    }
}

/// A run of consecutive positive label slots sharing one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub index: u32,
    pub first_slot: usize,
    pub slot_count: usize,
    pub amplitude: f64,
}

/// Un-normalized constellation during construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TentativeConstellation {
    m: usize,
    rho: f64,
    groups: Vec<Group>,
}

impl TentativeConstellation {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Distinct positive points, ascending.
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Number of distinct points counting both signs.
    pub fn distinct_count(&self) -> usize {
        2 * self.groups.len()
    }

    pub fn indices(&self) -> Vec<u32> {
        self.groups.iter().map(|g| g.index).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.amplitude).collect()
    }

    /// Current index of each of the `M/2` positive slots.
    pub fn index_of_slots(&self) -> Vec<u32> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.index, g.slot_count))
            .collect()
    }

    /// Tentative amplitude of each positive slot.
    pub fn slot_amplitudes(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.amplitude, g.slot_count))
            .collect()
    }
}

/// Initial `M`-point design: `l_k = 2k - 1`, amplitudes `φ_M(l_k; ρ)`.
pub fn build_initial(m: usize, rho: f64) -> Result<TentativeConstellation> {
    check_order(m)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidRho(rho));
    }
    let groups = (0..m / 2)
        .map(|slot| {
            let index = (2 * slot + 1) as u32;
            Group {
                index,
                first_slot: slot,
                slot_count: 1,
                amplitude: tentative_amplitude(index, m, rho),
            }
        })
        .collect();
    Ok(TentativeConstellation { m, rho, groups })
}

/// Merges closest adjacent pairs until `n` distinct points (both signs) remain.
///
/// Only neighbours carrying the same number of labels are eligible, so every
/// merged region is a dyadic union of the original slices and its index
/// `(l_i + l_j)/2` is again the CDF midpoint of that region (and a natural
/// number). Among eligible pairs the closest one is merged; ties go to the
/// pair nearest the origin. If no neighbours share a multiplicity, the
/// closest pair overall is used.
pub fn merge_to(mut t: TentativeConstellation, n: usize) -> Result<TentativeConstellation> {
    if !n.is_multiple_of(2) || n < 2 || n > t.distinct_count() {
        return Err(Error::InvalidDistinctCount { m: t.m, n });
    }
    while t.distinct_count() > n {
        let g = &t.groups;
        debug_assert!(g.windows(2).all(|w| w[0].amplitude < w[1].amplitude));
        let best = closest_pair(g);
        let (lo, hi) = (g[best], g[best + 1]);
        let sum = lo.index + hi.index;
        if sum % 2 != 0 {
            return Err(Error::NonIntegralMerge(lo.index, hi.index));
        }
        let index = sum / 2;
        let merged = Group {
            index,
            first_slot: lo.first_slot,
            slot_count: lo.slot_count + hi.slot_count,
            amplitude: tentative_amplitude(index, t.m, t.rho),
        };
        t.groups.splice(best..best + 2, [merged]);
    }
    Ok(t)
}

/// Position `i` of the pair `(g[i], g[i+1])` to merge next.
fn closest_pair(g: &[Group]) -> usize {
    let pick = |equal_only: bool| {
        let mut best = None;
        let mut best_dist = f64::INFINITY;
        for (i, w) in g.windows(2).enumerate() {
            if equal_only && w[0].slot_count != w[1].slot_count {
                continue;
            }
            let d = w[1].amplitude - w[0].amplitude;
            if d < best_dist {
                best_dist = d;
                best = Some(i);
            }
        }
        best
    };
    pick(true).or_else(|| pick(false)).expect("at least two groups")
}

/// Scales the tentative design to symbol energy `es` (per 2-D QAM symbol).
pub fn normalize(t: &TentativeConstellation, es: f64) -> Result<Constellation> {
    if !(es > 0.0 && es.is_finite()) {
        return Err(Error::InvalidParameter(format!("Es = {es}")));
    }
    let amps = t.slot_amplitudes();
    let power = 2.0 / t.m as f64 * amps.iter().map(|a| a * a).sum::<f64>();
    if power <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let scale = (es / 2.0).sqrt() / power.sqrt();
    let scaled: Vec<f64> = amps.iter().map(|a| a * scale).collect();
    Constellation::from_slots(
        LabelTable::brgc(t.m)?,
        t.index_of_slots(),
        &scaled,
        Some(t.rho),
        es,
    )
}

/// Builds the `(M, N)`-PAM with shaping parameter `ρ` and energy `Es`.
pub fn design(m: usize, n: usize, rho: f64, es: f64) -> Result<Constellation> {
    check_order(m)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidRho(rho));
    }
    if !n.is_multiple_of(2) || n < 2 || n > m {
        return Err(Error::InvalidDistinctCount { m, n });
    }
    if rho == 0.0 && n != m {
        return Err(Error::UniformRequiresFullSize { m, n });
    }
    let t = merge_to(build_initial(m, rho)?, n)?;
    normalize(&t, es)
}

/// A normalized (M, N)-PAM constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    m: usize,
    rho: Option<f64>,
    es: f64,
    labels: LabelTable,
    slot_index: Vec<u32>,
    amp_of_label: Vec<f64>,
    /// Distinct signed amplitudes, ascending.
    points: Vec<f64>,
    point_of_label: Vec<usize>,
    label_count: Vec<usize>,
}

impl Constellation {
    /// Assembles a constellation from positive-slot amplitudes.
    ///
    /// `slot_amps` must be non-decreasing and strictly positive; equal
    /// neighbours denote a merged point.
    pub fn from_slots(
        labels: LabelTable,
        slot_index: Vec<u32>,
        slot_amps: &[f64],
        rho: Option<f64>,
        es: f64,
    ) -> Result<Self> {
        let m = labels.order();
        let half = m / 2;
        if slot_amps.len() != half || slot_index.len() != half {
            return Err(Error::SizeMismatch {
                expected: half,
                got: slot_amps.len(),
            });
        }
        if slot_amps.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidParameter(
                "positive amplitudes must be finite and > 0".into(),
            ));
        }
        if slot_amps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "positive amplitudes must be sorted by slot".into(),
            ));
        }
        let mut positive_points: Vec<f64> = slot_amps.to_vec();
        positive_points.dedup();
        let half_n = positive_points.len();
        let mut points: Vec<f64> = positive_points.iter().rev().map(|a| -a).collect();
        points.extend_from_slice(&positive_points);

        let mut amp_of_label = vec![0.0; m];
        let mut point_of_label = vec![0; m];
        let mut label_count = vec![0; 2 * half_n];
        let mut p = 0;
        for (slot, &a) in slot_amps.iter().enumerate() {
            while positive_points[p] != a {
                p += 1;
            }
            let pos = half_n + p;
            let neg = half_n - 1 - p;
            let lp = labels.positive(slot) as usize;
            let ln = labels.negative(slot) as usize;
            amp_of_label[lp] = a;
            amp_of_label[ln] = -a;
            point_of_label[lp] = pos;
            point_of_label[ln] = neg;
            label_count[pos] += 1;
            label_count[neg] += 1;
        }
        Ok(Self {
            m,
            rho,
            es,
            labels,
            slot_index,
            amp_of_label,
            points,
            point_of_label,
            label_count,
        })
    }

    /// Uniform `M`-PAM (the `ρ = 0` design).
    pub fn uniform(m: usize, es: f64) -> Result<Self> {
        design(m, m, 0.0, es)
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// Bits per dimension, `n = log2 M`.
    pub fn bits_per_dim(&self) -> usize {
        self.labels.bits_per_label()
    }

    /// Number of distinct amplitudes over both signs.
    pub fn distinct_count(&self) -> usize {
        self.points.len()
    }

    /// `None` for constellations loaded from an external table.
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    /// Energy per 2-D QAM symbol.
    pub fn es(&self) -> f64 {
        self.es
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    /// Index `l` of each positive slot (0 for external tables).
    pub fn slot_indices(&self) -> &[u32] {
        &self.slot_index
    }

    pub fn amplitude(&self, label: u32) -> f64 {
        self.amp_of_label[label as usize]
    }

    /// Amplitude of every label, indexed by label value.
    pub fn amplitudes_by_label(&self) -> &[f64] {
        &self.amp_of_label
    }

    /// Distinct signed amplitudes, ascending.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Distinct positive amplitudes, ascending.
    pub fn positive_points(&self) -> &[f64] {
        &self.points[self.points.len() / 2..]
    }

    pub fn point_of_label(&self, label: u32) -> usize {
        self.point_of_label[label as usize]
    }

    /// Number of labels mapped to each signed point.
    pub fn label_counts(&self) -> &[usize] {
        &self.label_count
    }

    /// Probability of each distinct positive amplitude under equiprobable
    /// labels, i.e. of each magnitude; multiples of `2/M` summing to 1.
    pub fn prob_of_point(&self) -> Vec<f64> {
        let half = self.points.len() / 2;
        self.label_count[half..]
            .iter()
            .map(|&c| 2.0 * c as f64 / self.m as f64)
            .collect()
    }

    /// Probability of each signed point.
    pub fn signed_point_probabilities(&self) -> Vec<f64> {
        self.label_count
            .iter()
            .map(|&c| c as f64 / self.m as f64)
            .collect()
    }

    /// Entropy of the signed point distribution in bits per dimension.
    pub fn point_entropy(&self) -> f64 {
        self.signed_point_probabilities()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }

    /// Label-weighted power per dimension; equals `Es/2` after normalization.
    pub fn power_per_dim(&self) -> f64 {
        self.amp_of_label.iter().map(|a| a * a).sum::<f64>() / self.m as f64
    }

    /// Labels (with signed amplitudes) whose bit `level` equals `bit`.
    pub fn bit_level_set(&self, level: usize, bit: u32) -> Result<Vec<(u32, f64)>> {
        let n = self.bits_per_dim();
        if level >= n {
            return Err(Error::LevelOutOfRange { level, bits: n });
        }
        Ok((0..self.m as u32)
            .filter(|&l| label_bit(l, level, n) == bit & 1)
            .map(|l| (l, self.amp_of_label[l as usize]))
            .collect())
    }

    /// One line per label: `bits l_index amplitude probability`.
    pub fn to_table(&self) -> String {
        let n = self.bits_per_dim();
        let mut out = String::new();
        let _ = writeln!(out, "# nenu constellation table: bits l_index amplitude probability");
        let rho = self.rho.map_or_else(|| "external".to_string(), |r| r.to_string());
        let _ = writeln!(
            out,
            "# M={} N={} rho={} Es={}",
            self.m,
            self.distinct_count(),
            rho,
            self.es
        );
        let probs = self.signed_point_probabilities();
        for label in 0..self.m as u32 {
            let (slot, _) = self.labels.slot_of(label);
            let _ = writeln!(
                out,
                "{} {} {} {}",
                label_bits(label, n),
                self.slot_index[slot],
                self.amp_of_label[label as usize],
                probs[self.point_of_label[label as usize]]
            );
        }
        out
    }

    /// Parses the format written by [`Constellation::to_table`].
    ///
    /// External tables need not be BRGC labeled but must list every label
    /// exactly once and be symmetric under MSB flip. The `probability`
    /// column is informational and recomputed from label multiplicities.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut rho = None;
        let mut es_header = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for kv in comment.split_whitespace() {
                    if let Some(v) = kv.strip_prefix("rho=") {
                        rho = v.parse::<f64>().ok();
                    } else if let Some(v) = kv.strip_prefix("Es=") {
                        es_header = v.parse::<f64>().ok();
                    }
                }
                continue;
            }
            let parse_err = |reason: &str| Error::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 3 {
                return Err(parse_err("expected `bits l_index amplitude [probability]`"));
            }
            let bits = fields[0];
            if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(parse_err("bit label must be a binary string"));
            }
            let label = u32::from_str_radix(bits, 2).map_err(|_| parse_err("bit label"))?;
            let index: u32 = fields[1].parse().map_err(|_| parse_err("l_index"))?;
            let amp: f64 = fields[2].parse().map_err(|_| parse_err("amplitude"))?;
            rows.push((bits.len(), label, index, amp, i + 1));
        }
        let m = rows.len();
        let n = check_order(m).map_err(|_| Error::Parse {
            line: 0,
            reason: format!("{m} labels is not a power of two >= 4"),
        })?;
        let mut amp = vec![f64::NAN; m];
        let mut idx = vec![0u32; m];
        for &(width, label, index, a, line) in &rows {
            if width != n || !amp[label as usize].is_nan() {
                return Err(Error::Parse {
                    line,
                    reason: "label width mismatch or duplicate label".into(),
                });
            }
            amp[label as usize] = a;
            idx[label as usize] = index;
        }
        let mask = 1u32 << (n - 1);
        let mut positive: Vec<u32> = (0..m as u32 / 2).collect();
        for &l in &positive {
            if amp[l as usize] <= 0.0 || amp[(l | mask) as usize] != -amp[l as usize] {
                return Err(Error::Parse {
                    line: 0,
                    reason: format!("label {} is not mirrored by its MSB flip", label_bits(l, n)),
                });
            }
        }
        // merged labels share an amplitude; keep them in Gray-rank order
        positive.sort_by(|a, b| {
            amp[*a as usize]
                .total_cmp(&amp[*b as usize])
                .then(inverse_gray(*a).cmp(&inverse_gray(*b)))
        });
        let slot_amps: Vec<f64> = positive.iter().map(|&l| amp[l as usize]).collect();
        let slot_index: Vec<u32> = positive.iter().map(|&l| idx[l as usize]).collect();
        let power: f64 = amp.iter().map(|a| a * a).sum::<f64>() / m as f64;
        let es = es_header.unwrap_or(2.0 * power);
        let labels = LabelTable::from_positive(m, positive)?;
        let labels = if labels == LabelTable::brgc(m)? {
            LabelTable::brgc(m)?
        } else {
            labels
        };
        Self::from_slots(labels, slot_index, &slot_amps, rho, es)
    }
}
