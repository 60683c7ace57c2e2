//! Pauli syndrome distributions of channels and their statistics.
//!
//! The syndrome mass of a string `P` is `sum_k |Tr(P A_k)|^2 / 4^n`, the diagonal
//! of the channel's chi matrix in the Pauli basis. It does not depend on the
//! Kraus representation and sums to one for trace-preserving maps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::QuantumChannel;
use crate::config::TOL;
use crate::pauli::{accumulate_pauli_masses, BitString, PauliString};
use crate::pauli_channel::PauliChannel;
use crate::rng::Seed;
use crate::{Caps, Error, Result};

/// Kraus operators per reduction block; the block tree is fixed, so sums are bit-stable.
const MASS_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Masses {
    /// Indexed by [`PauliString::dense_index`].
    Dense(Vec<f64>),
    Sparse(BTreeMap<PauliString, f64>),
    Sampled { counts: BTreeMap<PauliString, u64>, samples: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeDistribution {
    n: usize,
    masses: Masses,
}

impl SyndromeDistribution {
    pub fn dense(n: usize, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != 1usize << (2 * n) {
            return Err(Error::LengthMismatch(masses.len(), 1usize << (2 * n)));
        }
        Self::checked(n, Masses::Dense(masses))
    }

    pub fn sparse(n: usize, masses: BTreeMap<PauliString, f64>) -> Result<Self> {
        if let Some(p) = masses.keys().find(|p| p.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: p.n() });
        }
        Self::checked(n, Masses::Sparse(masses))
    }

    fn checked(n: usize, masses: Masses) -> Result<Self> {
        let d = SyndromeDistribution { n, masses };
        let mut total = 0.0;
        for (p, m) in d.iter() {
            if !(m >= -TOL.distribution_sum) {
                return Err(Error::BadWeights(format!("negative mass {m} on {p}")));
            }
            total += m;
        }
        if (total - 1.0).abs() > TOL.distribution_sum {
            return Err(Error::BadWeights(format!("syndrome masses sum to {total}")));
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &Masses {
        &self.masses
    }

    /// Number of sampled draws, if this is an empirical distribution.
    pub fn sample_size(&self) -> Option<u64> {
        match &self.masses {
            Masses::Sampled { samples, .. } => Some(*samples),
            _ => None,
        }
    }

    /// Nonzero `(string, mass)` pairs in string order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (PauliString, f64)> + '_> {
        let n = self.n;
        match &self.masses {
            Masses::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, m)| **m != 0.0)
                    .map(move |(i, m)| (PauliString::from_dense_index(n, i), *m)),
            ),
            Masses::Sparse(map) => Box::new(map.iter().map(|(p, m)| (*p, *m))),
            Masses::Sampled { counts, samples } => {
                let total = *samples as f64;
                Box::new(counts.iter().map(move |(p, c)| (*p, *c as f64 / total)))
            }
        }
    }

    pub fn mass(&self, p: &PauliString) -> f64 {
        match &self.masses {
            Masses::Dense(v) => v[p.dense_index()],
            Masses::Sparse(map) => map.get(p).copied().unwrap_or(0.0),
            Masses::Sampled { counts, samples } => counts.get(p).copied().unwrap_or(0) as f64 / *samples as f64,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.iter().map(|(_, m)| m).sum()
    }

    /// Largest absolute mass difference over all strings.
    pub fn sup_distance(&self, other: &SyndromeDistribution) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut keys: BTreeMap<PauliString, (f64, f64)> = BTreeMap::new();
        for (p, m) in self.iter() {
            keys.entry(p).or_default().0 = m;
        }
        for (p, m) in other.iter() {
            keys.entry(p).or_default().1 = m;
        }
        Ok(keys.values().fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
    }
}

/// Syndrome distribution of a dense channel (`n` within the superoperator cap).
pub fn pauli_mass(e: &QuantumChannel) -> Result<SyndromeDistribution> {
    let n = e.n();
    Caps::check_superop(n, "dense syndrome distribution")?;
    let len = 1usize << (2 * n);
    let partials: Vec<Vec<f64>> = e
        .kraus()
        .par_chunks(MASS_BLOCK)
        .map(|block| {
            let mut out = vec![0.0; len];
            for a in block {
                accumulate_pauli_masses(a, n, 1.0, &mut out);
            }
            out
        })
        .collect();
    let mut total = vec![0.0; len];
    for part in &partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(SyndromeDistribution { n, masses: Masses::Dense(total) })
}

/// Syndrome distribution of a Pauli channel: its masses, stored sparsely.
pub fn pauli_channel_mass(e: &PauliChannel) -> SyndromeDistribution {
    SyndromeDistribution { n: e.n(), masses: Masses::Sparse(e.masses().clone()) }
}

/// `f[s]` = mass at Pauli weight `s`; `alpha = sum s f[s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub n: usize,
    pub f: Vec<f64>,
    pub alpha: f64,
}

impl WeightProfile {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::Invalid("weight profile needs at least f(0)".into()));
        }
        let total: f64 = f.iter().sum();
        if (total - 1.0).abs() > TOL.distribution_sum || f.iter().any(|v| *v < -TOL.distribution_sum) {
            return Err(Error::BadWeights(format!("weight profile sums to {total}")));
        }
        let alpha = f.iter().enumerate().map(|(s, v)| s as f64 * v).sum();
        Ok(WeightProfile { n: f.len() - 1, f, alpha })
    }

    /// `Binomial(n, q)`, the profile of independent noise with per-qubit fault rate `q`.
    pub fn binomial(n: usize, q: f64) -> Self {
        let f = binomial_pmf(n, q);
        let alpha = n as f64 * q;
        WeightProfile { n, f, alpha }
    }

    /// Profile of a tensor product of channels with these profiles.
    pub fn convolve(&self, other: &WeightProfile) -> WeightProfile {
        let mut f = vec![0.0; self.n + other.n + 1];
        for (a, fa) in self.f.iter().enumerate() {
            for (b, fb) in other.f.iter().enumerate() {
                f[a + b] += fa * fb;
            }
        }
        WeightProfile { n: self.n + other.n, f, alpha: self.alpha + other.alpha }
    }

    /// `f(>= s)`.
    pub fn tail(&self, s: usize) -> f64 {
        self.f.iter().skip(s).sum()
    }

    /// Every tail `f(>= s)` for `s = 0..=n`.
    pub fn tails(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        let mut acc = 0.0;
        for s in (0..=self.n).rev() {
            acc += self.f[s];
            out[s] = acc;
        }
        out
    }

    /// Non-identity profile `f(s) / (1 - f(0))`, `None` when the channel has no fault mass.
    pub fn normalized_nonidentity(&self) -> Option<Vec<f64>> {
        let fault = 1.0 - self.f[0];
        if fault <= 1e-300 {
            return None;
        }
        let mut out: Vec<f64> = self.f.iter().map(|v| v / fault).collect();
        out[0] = 0.0;
        Some(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,f\n");
        for (s, v) in self.f.iter().enumerate() {
            let _ = writeln!(out, "{s},{v}");
        }
        out
    }
}

pub fn binomial_pmf(n: usize, q: f64) -> Vec<f64> {
    let mut f = vec![0.0; n + 1];
    let mut c = 1.0f64;
    for (s, slot) in f.iter_mut().enumerate() {
        if s > 0 {
            c = c * (n - s + 1) as f64 / s as f64;
        }
        *slot = c * q.powi(s as i32) * (1.0 - q).powi((n - s) as i32);
    }
    f
}

pub fn weight_profile(d: &SyndromeDistribution) -> WeightProfile {
    let mut f = vec![0.0; d.n + 1];
    for (p, m) in d.iter() {
        f[p.weight()] += m;
    }
    let alpha = f.iter().enumerate().map(|(s, v)| s as f64 * v).sum();
    WeightProfile { n: d.n, f, alpha }
}

/// Fault mass of qubit `k`: total mass on strings with a non-identity letter at `k`.
pub fn qubit_error_amount(d: &SyndromeDistribution, k: usize) -> Result<f64> {
    if k >= d.n {
        return Err(Error::BadIndex { index: k, n: d.n });
    }
    Ok(d.iter().filter(|(p, _)| !p.letter(k).is_identity()).map(|(_, m)| m).sum())
}

/// Probability distribution over coarse syndromes (fault patterns), sorted by pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawCoarse", try_from = "RawCoarse")]
pub struct CoarseDistribution {
    n: usize,
    entries: Vec<(u32, f64)>,
    sample_size: Option<u64>,
}

/// Pearson correlation with its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson: f64,
    pub covariance: f64,
}

/// Scalarizations of the correlation between two blocks of qubits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCorrelation {
    /// Pearson correlation of the any-fault indicators of the two blocks.
    pub any_fault: f64,
    pub covariance: f64,
    /// Mean pairwise Pearson correlation over nondegenerate pairs in `X x Y`.
    pub mean_pairwise: Option<f64>,
}

const MAX_COARSE_TABLE: usize = 24;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoarse {
    n: usize,
    entries: Vec<(BitString, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_size: Option<u64>,
}

impl From<CoarseDistribution> for RawCoarse {
    fn from(cd: CoarseDistribution) -> Self {
        let entries = cd.entries().collect();
        RawCoarse { n: cd.n, entries, sample_size: cd.sample_size }
    }
}

impl TryFrom<RawCoarse> for CoarseDistribution {
    type Error = Error;

    fn try_from(raw: RawCoarse) -> Result<Self> {
        let mut cd = CoarseDistribution::new(raw.n, raw.entries)?;
        cd.sample_size = raw.sample_size;
        Ok(cd)
    }
}

impl CoarseDistribution {
    pub fn new(n: usize, entries: impl IntoIterator<Item = (BitString, f64)>) -> Result<Self> {
        if n == 0 || n > MAX_COARSE_TABLE {
            return Err(Error::CapExceeded { what: "coarse distribution", n, cap: MAX_COARSE_TABLE });
        }
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for (b, p) in entries {
            if b.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: b.n() });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::BadWeights(format!("probability {p} on {b}")));
            }
            if p > 0.0 {
                *map.entry(b.bits()).or_insert(0.0) += p;
            }
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > TOL.distribution_sum {
            return Err(Error::BadWeights(format!("coarse probabilities sum to {total}")));
        }
        Ok(CoarseDistribution { n, entries: map.into_iter().collect(), sample_size: None })
    }

    fn from_map(n: usize, map: BTreeMap<u32, f64>) -> Self {
        CoarseDistribution { n, entries: map.into_iter().filter(|(_, p)| *p != 0.0).collect(), sample_size: None }
    }

    /// All mass on one pattern.
    pub fn point(pattern: BitString) -> Self {
        CoarseDistribution { n: pattern.n(), entries: vec![(pattern.bits(), 1.0)], sample_size: None }
    }

    /// Independent faults with marginals `probs[i]`.
    pub fn product(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        if n == 0 || n > 20 {
            return Err(Error::CapExceeded { what: "product coarse table", n, cap: 20 });
        }
        for &p in probs {
            crate::channel::check_probability(p)?;
        }
        let mut map = BTreeMap::new();
        for bits in 0u32..(1 << n) {
            let mut pr = 1.0;
            for (q, &p) in probs.iter().enumerate() {
                pr *= if (bits >> (n - 1 - q)) & 1 == 1 { p } else { 1.0 - p };
            }
            map.insert(bits, pr);
        }
        Ok(Self::from_map(n, map))
    }

    /// All qubits faulty with probability `q`, none otherwise.
    pub fn synchronized(n: usize, q: f64) -> Result<Self> {
        crate::channel::check_probability(q)?;
        let all = BitString::new(n, u32::MAX);
        Self::new(n, [(BitString::new(n, 0), 1.0 - q), (all, q)])
    }

    pub fn mixture(components: &[CoarseDistribution], weights: &[f64]) -> Result<Self> {
        crate::channel::check_weights(weights, components.len())?;
        let n = components[0].n;
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for (c, &w) in components.iter().zip(weights) {
            if c.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.n });
            }
            for (b, p) in &c.entries {
                *map.entry(*b).or_insert(0.0) += w * p;
            }
        }
        Ok(Self::from_map(n, map))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample_size(&self) -> Option<u64> {
        self.sample_size
    }

    pub fn entries(&self) -> impl Iterator<Item = (BitString, f64)> + '_ {
        self.entries.iter().map(move |(b, p)| (BitString::new(self.n, *b), *p))
    }

    pub fn probability(&self, pattern: &BitString) -> f64 {
        self.entries
            .binary_search_by_key(&pattern.bits(), |(b, _)| *b)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    fn mask(&self, qubits: &[usize]) -> Result<u32> {
        let mut m = 0u32;
        for &q in qubits {
            if q >= self.n {
                return Err(Error::BadIndex { index: q, n: self.n });
            }
            m |= 1 << (self.n - 1 - q);
        }
        Ok(m)
    }

    /// `P(x_i = 1)`.
    pub fn fault_probability(&self, i: usize) -> Result<f64> {
        let m = self.mask(&[i])?;
        Ok(self.entries.iter().filter(|(b, _)| b & m != 0).map(|(_, p)| p).sum())
    }

    /// Mean of `fault_probability` over `X`.
    pub fn mean_fault_rate(&self, x: &[usize]) -> Result<f64> {
        if x.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut acc = 0.0;
        for &i in x {
            acc += self.fault_probability(i)?;
        }
        Ok(acc / x.len() as f64)
    }

    /// `P(some qubit of X faulty)`.
    pub fn any_fault_probability(&self, x: &[usize]) -> Result<f64> {
        let m = self.mask(x)?;
        Ok(self.entries.iter().filter(|(b, _)| b & m != 0).map(|(_, p)| p).sum())
    }

    fn indicator_correlation(&self, mx: u32, my: u32) -> std::result::Result<Correlation, f64> {
        let (mut px, mut py, mut pxy) = (0.0, 0.0, 0.0);
        for (b, p) in &self.entries {
            let (a, c) = (b & mx != 0, b & my != 0);
            if a {
                px += p;
            }
            if c {
                py += p;
            }
            if a && c {
                pxy += p;
            }
        }
        let cov = pxy - px * py;
        let var = px * (1.0 - px) * py * (1.0 - py);
        if var <= 1e-300 {
            return Err(cov);
        }
        Ok(Correlation { pearson: (cov / var.sqrt()).clamp(-1.0, 1.0), covariance: cov })
    }

    /// Pearson correlation of the fault indicators of qubits `i` and `j`.
    pub fn pair_correlation(&self, i: usize, j: usize) -> Result<Correlation> {
        if i == j {
            return Err(Error::Invalid(format!("pair correlation needs distinct qubits, got {i} twice")));
        }
        let (mx, my) = (self.mask(&[i])?, self.mask(&[j])?);
        self.indicator_correlation(mx, my).map_err(|covariance| Error::DegenerateMarginal { covariance })
    }

    pub fn block_correlation(&self, x: &[usize], y: &[usize]) -> Result<BlockCorrelation> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::EmptySet);
        }
        if x.iter().any(|q| y.contains(q)) {
            return Err(Error::Invalid("blocks must be disjoint".into()));
        }
        let (mx, my) = (self.mask(x)?, self.mask(y)?);
        let c = self.indicator_correlation(mx, my).map_err(|covariance| Error::DegenerateMarginal { covariance })?;
        let mut pairs = Vec::new();
        for &i in x {
            for &j in y {
                if let Ok(pc) = self.pair_correlation(i, j) {
                    pairs.push(pc.pearson);
                }
            }
        }
        let mean_pairwise = (!pairs.is_empty()).then(|| pairs.iter().sum::<f64>() / pairs.len() as f64);
        Ok(BlockCorrelation { any_fault: c.pearson, covariance: c.covariance, mean_pairwise })
    }

    /// Pearson matrix; `None` on the diagonal and for degenerate pairs.
    pub fn pair_correlation_matrix(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| if i == j { None } else { self.pair_correlation(i, j).ok().map(|c| c.pearson) })
                    .collect()
            })
            .collect()
    }

    /// `P(number of faulty qubits > threshold)`.
    pub fn count_tail(&self, threshold: f64) -> f64 {
        self.entries.iter().filter(|(b, _)| b.count_ones() as f64 > threshold).map(|(_, p)| p).sum()
    }

    /// Standard error of an estimated probability `p` at this sample size.
    pub fn standard_error(&self, p: f64) -> Option<f64> {
        self.sample_size.map(|m| (p * (1.0 - p) / m as f64).sqrt())
    }
}

/// Pushforward of the syndrome masses under `P -> coarse(P)`.
pub fn coarse_distribution(d: &SyndromeDistribution) -> CoarseDistribution {
    let mut map: BTreeMap<u32, f64> = BTreeMap::new();
    for (p, m) in d.iter() {
        *map.entry(p.coarse().bits()).or_insert(0.0) += m;
    }
    let mut cd = CoarseDistribution::from_map(d.n, map);
    cd.sample_size = d.sample_size();
    cd
}

pub fn fault_probability(cd: &CoarseDistribution, i: usize) -> Result<f64> {
    cd.fault_probability(i)
}

pub fn pair_correlation(cd: &CoarseDistribution, i: usize, j: usize) -> Result<Correlation> {
    cd.pair_correlation(i, j)
}

pub fn block_correlation(cd: &CoarseDistribution, x: &[usize], y: &[usize]) -> Result<BlockCorrelation> {
    cd.block_correlation(x, y)
}

/// Thresholds behind [`synchronization_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncCriteria {
    /// A tail `f(>= s)` is substantial when `f(>= s) * s >= substantial * alpha`.
    pub substantial: f64,
    /// Tails are examined from `s >= multiple * alpha` ...
    pub multiple: f64,
    /// ... and never below this weight.
    pub min_weight: usize,
}

impl Default for SyncCriteria {
    fn default() -> Self {
        SyncCriteria { substantial: 0.1, multiple: 10.0, min_weight: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncClassification {
    pub n: usize,
    pub alpha: f64,
    /// `tails[s] = f(>= s)`.
    pub tails: Vec<f64>,
    pub criteria: SyncCriteria,
    /// Smallest weight examined for synchronization.
    pub threshold_weight: usize,
    /// Smallest examined weight whose tail is substantial.
    pub synchronized_at: Option<usize>,
    pub synchronized: bool,
    pub delta: f64,
    /// `ceil((3/4 - delta) n)`.
    pub very_strong_weight: usize,
    pub very_strong: bool,
}

pub fn synchronization_report(wp: &WeightProfile, delta: f64) -> Result<SyncClassification> {
    synchronization_report_with(wp, delta, SyncCriteria::default())
}

pub fn synchronization_report_with(wp: &WeightProfile, delta: f64, criteria: SyncCriteria) -> Result<SyncClassification> {
    if !(delta > 0.0 && delta < 0.75) {
        return Err(Error::BadRange(format!("delta {delta} outside (0, 3/4)")));
    }
    let tails = wp.tails();
    let alpha = wp.alpha;
    let substantial = |s: usize| alpha > 0.0 && tails[s] > 0.0 && tails[s] * s as f64 >= criteria.substantial * alpha;
    let threshold = ((criteria.multiple * alpha).ceil() as usize).max(criteria.min_weight).max(1);
    let synchronized_at = (threshold..=wp.n).find(|&s| substantial(s));
    let vs = (((0.75 - delta) * wp.n as f64).ceil() as usize).clamp(1, wp.n.max(1));
    let very_strong = vs <= wp.n && substantial(vs);
    Ok(SyncClassification {
        n: wp.n,
        alpha,
        tails,
        criteria,
        threshold_weight: threshold,
        synchronized_at,
        synchronized: synchronized_at.is_some(),
        delta,
        very_strong_weight: vs,
        very_strong,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// First weight of the examined tail, `ceil(alpha + eps n)`.
    pub start: usize,
    /// `(s, ln f(>= s))` for every examined weight with a positive tail.
    pub points: Vec<(usize, f64)>,
    /// Slope of the steepest line through the first point that bounds all later points.
    pub envelope_slope: Option<f64>,
    /// Least-squares slope of the examined log tail.
    pub fitted_slope: Option<f64>,
    pub required_rate: f64,
    pub trivial: bool,
    pub passed: bool,
}

/// Default decay rate (per unit weight) a tail must beat.
pub const DEFAULT_DECAY_RATE: f64 = 0.5;

pub fn tail_decay_check(wp: &WeightProfile, eps: f64) -> Result<DecayReport> {
    tail_decay_check_with(wp, eps, DEFAULT_DECAY_RATE)
}

pub fn tail_decay_check_with(wp: &WeightProfile, eps: f64, rate: f64) -> Result<DecayReport> {
    if !(eps > 0.0) {
        return Err(Error::BadRange(format!("margin {eps} must be positive")));
    }
    let tails = wp.tails();
    let start = (wp.alpha + eps * wp.n as f64).ceil() as usize;
    let points: Vec<(usize, f64)> = (start..=wp.n)
        .filter(|&s| tails[s] > 0.0)
        .map(|s| (s, tails[s].ln()))
        .collect();
    if points.len() < 2 {
        return Ok(DecayReport {
            start,
            points,
            envelope_slope: None,
            fitted_slope: None,
            required_rate: rate,
            trivial: true,
            passed: true,
        });
    }
    let (s0, l0) = points[0];
    let envelope = points[1..]
        .iter()
        .map(|(s, l)| (l - l0) / (*s as f64 - s0 as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let k = points.len() as f64;
    let mx = points.iter().map(|(s, _)| *s as f64).sum::<f64>() / k;
    let my = points.iter().map(|(_, l)| *l).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|(s, l)| (*s as f64 - mx) * (l - my)).sum();
    let sxx: f64 = points.iter().map(|(s, _)| (*s as f64 - mx).powi(2)).sum();
    Ok(DecayReport {
        start,
        points,
        envelope_slope: Some(envelope),
        fitted_slope: Some(sxy / sxx),
        required_rate: rate,
        trivial: false,
        passed: envelope < -rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub pairs: usize,
    /// Pairs with `|pearson| <= tau`; degenerate pairs count when `|covariance| <= tau`.
    pub independent_pairs: usize,
    pub fraction: f64,
    pub tau: f64,
    pub passed: bool,
}

pub fn pairwise_independence_check(cd: &CoarseDistribution, tau: f64) -> Result<IndependenceReport> {
    if !(tau > 0.0) {
        return Err(Error::BadRange(format!("tolerance {tau} must be positive")));
    }
    let n = cd.n();
    let mut pairs = 0usize;
    let mut ok = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            let small = match cd.pair_correlation(i, j) {
                Ok(c) => c.pearson.abs() <= tau,
                Err(Error::DegenerateMarginal { covariance }) => covariance.abs() <= tau,
                Err(e) => return Err(e),
            };
            if small {
                ok += 1;
            }
        }
    }
    let fraction = if pairs == 0 { 1.0 } else { ok as f64 / pairs as f64 };
    Ok(IndependenceReport { pairs, independent_pairs: ok, fraction, tau, passed: fraction >= 1.0 - tau })
}

/// `m` i.i.d. coarse syndromes drawn from `d`.
pub fn sample_syndromes(d: &SyndromeDistribution, m: u64, seed: Seed) -> Result<CoarseDistribution> {
    let cd = coarse_distribution(d);
    sample_coarse(&cd, m, seed)
}

/// `m` i.i.d. draws from a coarse distribution.
pub fn sample_coarse(cd: &CoarseDistribution, m: u64, seed: Seed) -> Result<CoarseDistribution> {
    if m == 0 {
        return Err(Error::Invalid("sample size must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(cd.entries.len());
    let mut acc = 0.0;
    for (_, p) in &cd.entries {
        acc += p;
        cumulative.push(acc);
    }
    let mut rng = seed.derive("syndrome-samples", 0).rng();
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cumulative.partition_point(|c| *c <= u).min(cd.entries.len() - 1);
        *counts.entry(cd.entries[idx].0).or_insert(0) += 1;
    }
    let total = m as f64;
    Ok(CoarseDistribution {
        n: cd.n,
        entries: counts.into_iter().map(|(b, c)| (b, c as f64 / total)).collect(),
        sample_size: Some(m),
    })
}

/// CSV of a pair-correlation matrix with an empty diagonal and empty degenerate cells.
pub fn correlation_matrix_csv(matrix: &[Vec<Option<f64>>]) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..matrix.len()).map(|j| format!("q{j}")).collect();
    let _ = writeln!(out, "i,{}", header.join(","));
    for (i, row) in matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()).collect();
        let _ = writeln!(out, "q{i},{}", cells.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, GateKind};
    use crate::linalg;
    use crate::state::UnitaryOp;
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn cnot_channel() -> QuantumChannel {
        QuantumChannel::unitary(&UnitaryOp::new(GateKind::CNOT.matrix()).unwrap())
    }

    #[test]
    fn pauli_mass_examples() {
        let id = pauli_mass(&QuantumChannel::identity(2).unwrap()).unwrap();
        assert!((id.mass(&ps("II")) - 1.0).abs() < 1e-15);
        let cnot = pauli_mass(&cnot_channel()).unwrap();
        for s in ["II", "IX", "ZI", "ZX"] {
            assert!((cnot.mass(&ps(s)) - 0.25).abs() < 1e-14);
        }
        let dep = pauli_mass(&QuantumChannel::depolarizing(1, 0.1, &[0]).unwrap()).unwrap();
        for (s, m) in [("I", 0.925), ("X", 0.025), ("Y", 0.025), ("Z", 0.025)] {
            assert!((dep.mass(&ps(s)) - m).abs() < 1e-14);
        }
    }

    #[test]
    fn weight_profile_examples() {
        let wp = weight_profile(&pauli_mass(&QuantumChannel::identity(3).unwrap()).unwrap());
        assert_eq!(wp.alpha, 0.0);
        assert!((wp.f[0] - 1.0).abs() < 1e-15);
        let (n, p) = (4, 0.2);
        let wp = weight_profile(&pauli_mass(&QuantumChannel::depolarizing(n, p, &[0, 1, 2, 3]).unwrap()).unwrap());
        let oracle = binomial_pmf(n, 0.75 * p);
        for s in 0..=n {
            assert!((wp.f[s] - oracle[s]).abs() < 1e-12);
        }
        assert!((wp.alpha - 0.75 * p * n as f64).abs() < 1e-12);
        let p = 0.3;
        let wp = weight_profile(&pauli_mass(&QuantumChannel::correlated_depolarizing(3, p).unwrap()).unwrap());
        assert!((wp.f[0] - (1.0 - p + p / 64.0)).abs() < 1e-12);
        for (s, c) in [(1usize, 3.0), (2, 3.0), (3, 1.0)] {
            let expect = p * c * 3f64.powi(s as i32) / 64.0;
            assert!((wp.f[s] - expect).abs() < 1e-12);
        }
        assert!((wp.alpha - 9.0 * p / 4.0).abs() < 1e-12);
    }

    #[test]
    fn qubit_error_amount_examples() {
        let id = pauli_mass(&QuantumChannel::identity(2).unwrap()).unwrap();
        assert_eq!(qubit_error_amount(&id, 0).unwrap(), 0.0);
        let d = pauli_mass(&QuantumChannel::depolarizing(3, 0.2, &[1]).unwrap()).unwrap();
        assert!((qubit_error_amount(&d, 1).unwrap() - 0.15).abs() < 1e-14);
        assert!(qubit_error_amount(&d, 0).unwrap().abs() < 1e-14);
        let cnot = pauli_mass(&cnot_channel()).unwrap();
        assert!((qubit_error_amount(&cnot, 0).unwrap() - 0.5).abs() < 1e-14);
        assert!((qubit_error_amount(&cnot, 1).unwrap() - 0.5).abs() < 1e-14);
        assert!(matches!(qubit_error_amount(&cnot, 2), Err(Error::BadIndex { .. })));
        let cd = coarse_distribution(&cnot);
        for i in 0..2 {
            assert_eq!(cd.fault_probability(i).unwrap(), qubit_error_amount(&cnot, i).unwrap());
        }
    }

    #[test]
    fn coarse_examples() {
        let id = coarse_distribution(&pauli_mass(&QuantumChannel::identity(3).unwrap()).unwrap());
        assert!((id.probability(&bs("000")) - 1.0).abs() < 1e-15);
        assert_eq!(id.fault_probability(1).unwrap(), 0.0);
        let cnot = coarse_distribution(&pauli_mass(&cnot_channel()).unwrap());
        for s in ["00", "01", "10", "11"] {
            assert!((cnot.probability(&bs(s)) - 0.25).abs() < 1e-14);
        }
        let dep = coarse_distribution(&pauli_mass(&QuantumChannel::depolarizing(2, 0.1, &[0, 1]).unwrap()).unwrap());
        let prod = CoarseDistribution::product(&[0.075, 0.075]).unwrap();
        for (b, p) in prod.entries() {
            assert!((dep.probability(&b) - p).abs() < 1e-14);
        }
        for i in 0..2 {
            assert!((prod.fault_probability(i).unwrap() - 0.075).abs() < 1e-15);
        }
        assert!((prod.mean_fault_rate(&[0, 1]).unwrap() - 0.075).abs() < 1e-15);
    }

    #[test]
    fn correlation_examples() {
        let prod = CoarseDistribution::product(&[0.1, 0.3, 0.2]).unwrap();
        assert!(prod.pair_correlation(0, 2).unwrap().pearson.abs() < 1e-12);
        let sync = CoarseDistribution::synchronized(4, 0.05).unwrap();
        assert!((sync.pair_correlation(1, 3).unwrap().pearson - 1.0).abs() < 1e-12);
        for (x, y) in [(vec![0], vec![1, 2, 3]), (vec![0, 1], vec![2, 3])] {
            assert!(prod_block(&CoarseDistribution::product(&[0.1, 0.2, 0.3, 0.4]).unwrap(), &x, &y).abs() < 1e-12);
            assert!((prod_block(&sync, &x, &y) - 1.0).abs() < 1e-12);
        }
        let single = prod.block_correlation(&[0], &[2]).unwrap();
        assert_eq!(single.any_fault, prod.pair_correlation(0, 2).unwrap().pearson);
        let point = CoarseDistribution::point(bs("100"));
        assert!(matches!(point.pair_correlation(0, 1), Err(Error::DegenerateMarginal { .. })));
        assert!(prod.block_correlation(&[0, 1], &[1]).is_err());
        assert!(prod.block_correlation(&[], &[1]).is_err());
    }

    fn prod_block(cd: &CoarseDistribution, x: &[usize], y: &[usize]) -> f64 {
        cd.block_correlation(x, y).unwrap().any_fault
    }

    #[test]
    fn synchronization_examples() {
        let dep10 = weight_profile(&pauli_channel_mass(&PauliChannel::depolarizing(10, 0.01, &(0..10).collect::<Vec<_>>()).unwrap()));
        let r = synchronization_report(&dep10, 0.1).unwrap();
        assert!(!r.synchronized && !r.very_strong);
        let cd10 = weight_profile(&pauli_channel_mass(&PauliChannel::correlated_depolarizing(10, 0.01).unwrap()));
        let r = synchronization_report(&cd10, 0.1).unwrap();
        assert!(r.very_strong && r.synchronized);
        assert_eq!(r.very_strong_weight, 7);
        let id = WeightProfile::new(vec![1.0, 0.0, 0.0]).unwrap();
        let r = synchronization_report(&id, 0.1).unwrap();
        assert!(!r.synchronized && !r.very_strong && r.alpha == 0.0);
        assert!(synchronization_report(&id, 0.8).is_err());
    }

    #[test]
    fn tail_decay_examples() {
        let binom = WeightProfile::binomial(10, 0.075);
        let r = tail_decay_check(&binom, 0.05).unwrap();
        assert!(r.passed && !r.trivial);
        assert!(r.fitted_slope.unwrap() < 0.0);
        let cd = weight_profile(&pauli_channel_mass(&PauliChannel::correlated_depolarizing(10, 0.01).unwrap()));
        let r = tail_decay_check(&cd, 0.05).unwrap();
        assert!(!r.passed);
        let id = WeightProfile::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = tail_decay_check(&id, 0.1).unwrap();
        assert!(r.trivial && r.passed);
        assert!(tail_decay_check(&id, 0.0).is_err());
    }

    #[test]
    fn independence_examples() {
        let prod = CoarseDistribution::product(&[0.05; 8]).unwrap();
        let r = pairwise_independence_check(&prod, 0.01).unwrap();
        assert_eq!(r.fraction, 1.0);
        assert!(r.passed);
        let sync = CoarseDistribution::synchronized(8, 0.05).unwrap();
        assert_eq!(pairwise_independence_check(&sync, 0.01).unwrap().fraction, 0.0);
        let mix = CoarseDistribution::mixture(&[prod.clone(), sync.clone()], &[0.99, 0.01]).unwrap();
        let r = pairwise_independence_check(&mix, 0.1).unwrap();
        let mut expect = 0usize;
        for i in 0..8 {
            for j in i + 1..8 {
                let (mut pi, mut pj, mut pij) = (0.0, 0.0, 0.0);
                for bits in 0u32..256 {
                    let pr = 0.99 * (0..8).map(|q| if bits >> q & 1 == 1 { 0.05 } else { 0.95 }).product::<f64>()
                        + if bits == 0 { 0.01 * 0.95 } else if bits == 255 { 0.01 * 0.05 } else { 0.0 };
                    let (a, b) = (bits >> (7 - i) & 1 == 1, bits >> (7 - j) & 1 == 1);
                    if a {
                        pi += pr;
                    }
                    if b {
                        pj += pr;
                    }
                    if a && b {
                        pij += pr;
                    }
                }
                let rho = (pij - pi * pj) / (pi * (1.0 - pi) * pj * (1.0 - pj)).sqrt();
                if rho.abs() <= 0.1 {
                    expect += 1;
                }
            }
        }
        assert_eq!(r.independent_pairs, expect);
    }

    #[test]
    fn sampling_examples() {
        let point = pauli_channel_mass(&PauliChannel::pauli(ps("XIZ")));
        let s = sample_syndromes(&point, 500, Seed(1)).unwrap();
        assert_eq!(s.entries().count(), 1);
        assert_eq!(s.probability(&bs("101")), 1.0);
        let prod = CoarseDistribution::product(&[0.075, 0.2, 0.5]).unwrap();
        let m = 100_000;
        let s = sample_coarse(&prod, m, Seed(2)).unwrap();
        assert_eq!(s, sample_coarse(&prod, m, Seed(2)).unwrap());
        for (i, p) in [0.075, 0.2, 0.5].into_iter().enumerate() {
            let est = s.fault_probability(i).unwrap();
            assert!((est - p).abs() <= 3.0 * s.standard_error(p).unwrap());
        }
        let c = s.pair_correlation(0, 1).unwrap().pearson;
        assert!(c.abs() <= 3.0 / (m as f64).sqrt());
    }

    #[test]
    fn coarse_json_round_trip() {
        let cd = CoarseDistribution::mixture(
            &[CoarseDistribution::synchronized(3, 0.2).unwrap(), CoarseDistribution::product(&[0.1, 0.2, 0.3]).unwrap()],
            &[0.5, 0.5],
        )
        .unwrap();
        let json = serde_json::to_string(&cd).unwrap();
        assert!(json.contains("\"111\""));
        let back: CoarseDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n(), 3);
        for (b, p) in cd.entries() {
            assert!((back.probability(&b) - p).abs() < 1e-15);
        }
        assert!(serde_json::from_str::<CoarseDistribution>(r#"{"n":2,"entries":[["11",0.5]]}"#).is_err());
    }

    #[test]
    fn csv_exports() {
        let wp = WeightProfile::binomial(3, 0.1);
        let csv = wp.to_csv();
        assert!(csv.starts_with("s,f\n0,"));
        assert_eq!(csv.lines().count(), 5);
        let m = CoarseDistribution::synchronized(3, 0.2).unwrap().pair_correlation_matrix();
        let csv = correlation_matrix_csv(&m);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 4);
        let cells: Vec<&str> = rows[1].split(',').collect();
        assert_eq!(cells[0], "q0");
        let off: f64 = cells[2].parse().unwrap();
        assert!((off - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unitary_masses_are_squared_traces() {
        let mut rng = Seed(8).rng();
        for n in 1..=4 {
            let u = UnitaryOp::new(linalg::haar_unitary(1 << n, &mut rng)).unwrap();
            let d = pauli_mass(&QuantumChannel::unitary(&u)).unwrap();
            for p in PauliString::all(n) {
                let t = linalg::trace(&(&p.matrix().unwrap() * u.matrix())).norm_sqr() / (1u64 << (2 * n)) as f64;
                assert!((d.mass(&p) - t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clifford_conjugation_pushes_masses_forward() {
        let c = Circuit::ghz(3).unwrap();
        let u = c.segment_unitary(0, 3).unwrap();
        let e = QuantumChannel::random(3, 3, &mut Seed(4).rng()).unwrap();
        let base = pauli_mass(&e).unwrap();
        let conj = pauli_mass(&e.conjugate_by_unitary(&u).unwrap()).unwrap();
        for (p, m) in base.iter() {
            let image = p.clifford_conjugate(&c).unwrap().string;
            assert!((conj.mass(&image) - m).abs() < 1e-10);
        }
    }

    #[test]
    fn product_profiles_convolve() {
        let a = QuantumChannel::random(2, 3, &mut Seed(5).rng()).unwrap();
        let b = QuantumChannel::random(1, 2, &mut Seed(6).rng()).unwrap();
        let wa = weight_profile(&pauli_mass(&a).unwrap());
        let wb = weight_profile(&pauli_mass(&b).unwrap());
        let wab = weight_profile(&pauli_mass(&a.tensor(&b).unwrap()).unwrap());
        let conv = wa.convolve(&wb);
        for s in 0..=3 {
            assert!((wab.f[s] - conv.f[s]).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn masses_normalized_and_kraus_invariant(seed in any::<u64>(), n in 1usize..=3, k in 1usize..5) {
            let mut rng = Seed(seed).rng();
            let e = QuantumChannel::random(n, k, &mut rng).unwrap();
            let d = pauli_mass(&e).unwrap();
            prop_assert!((d.total_mass() - 1.0).abs() < 1e-9);
            let w = linalg::haar_unitary(k, &mut rng);
            let remixed = pauli_mass(&e.remixed(&w).unwrap()).unwrap();
            prop_assert!(d.sup_distance(&remixed).unwrap() < 1e-9);
        }

        #[test]
        fn alpha_is_affine(seed in any::<u64>(), n in 1usize..=3, w in 0.0f64..1.0) {
            let mut rng = Seed(seed).rng();
            let a = QuantumChannel::random(n, 2, &mut rng).unwrap();
            let b = QuantumChannel::random(n, 3, &mut rng).unwrap();
            let m = QuantumChannel::mix(&[a.clone(), b.clone()], &[w, 1.0 - w]).unwrap();
            let (da, db, dm) = (pauli_mass(&a).unwrap(), pauli_mass(&b).unwrap(), pauli_mass(&m).unwrap());
            for p in PauliString::all(n) {
                prop_assert!((dm.mass(&p) - (w * da.mass(&p) + (1.0 - w) * db.mass(&p))).abs() < 1e-10);
            }
            let alpha = |d: &SyndromeDistribution| weight_profile(d).alpha;
            prop_assert!((alpha(&dm) - (w * alpha(&da) + (1.0 - w) * alpha(&db))).abs() < 1e-10);
        }
    }
}
