//! Verifiers for the two correlation-implies-large-tail propositions and a
//! randomized counterexample search for the pairwise one.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pauli::BitString;
use crate::rng::{LabRng, Seed};
use crate::syndrome::CoarseDistribution;
use crate::{Error, Result};

/// The pairwise proposition requires `eta < 1/20`.
pub const COR2Q_MAX_ETA: f64 = 0.05;
pub const MAX_SEARCH_QUBITS: usize = 12;
const MAX_STORED_COUNTEREXAMPLES: usize = 16;
const SEARCH_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub proposition: String,
    pub hypotheses_satisfied: bool,
    /// The conclusion is only evaluated when the hypotheses hold.
    pub conclusion_evaluated: bool,
    pub conclusion_satisfied: bool,
    pub failed_hypotheses: Vec<String>,
    pub witness: BTreeMap<String, f64>,
    /// True when the tail was summed over the full support rather than a sample.
    pub exact: bool,
    pub notes: Vec<String>,
    pub counterexample: Option<CoarseDistribution>,
}

impl PropositionReport {
    fn new(proposition: &str, exact: bool) -> Self {
        PropositionReport {
            proposition: proposition.into(),
            hypotheses_satisfied: false,
            conclusion_evaluated: false,
            conclusion_satisfied: false,
            failed_hypotheses: Vec::new(),
            witness: BTreeMap::new(),
            exact,
            notes: Vec::new(),
            counterexample: None,
        }
    }

    fn conclude(&mut self, cd: &CoarseDistribution, tail: f64, bound: f64) {
        self.conclusion_evaluated = true;
        self.conclusion_satisfied = tail > bound;
        self.witness.insert("tail".into(), tail);
        self.witness.insert("bound".into(), bound);
        self.witness.insert("margin".into(), tail - bound);
        if let Some(se) = cd.standard_error(tail) {
            self.witness.insert("tail_standard_error".into(), se);
            self.notes.push("tail estimated from samples".into());
        }
        if !self.conclusion_satisfied {
            self.counterexample = Some(cd.clone());
        }
    }
}

fn min_fault_probability(cd: &CoarseDistribution) -> f64 {
    (0..cd.n()).map(|i| cd.fault_probability(i).unwrap_or(0.0)).fold(f64::INFINITY, f64::min)
}

/// Checks `p_i >= eta` and `cor_ij >= s` for all pairs, then `P(sum x > s n / 2) > s eta / 4`.
pub fn verify_cor2q(cd: &CoarseDistribution, eta: f64, s: f64) -> PropositionReport {
    let mut report = PropositionReport::new("cor2q", cd.sample_size().is_none());
    let n = cd.n();
    report.witness.insert("eta".into(), eta);
    report.witness.insert("s".into(), s);
    if !(eta > 0.0 && eta < COR2Q_MAX_ETA) {
        report.failed_hypotheses.push(format!("eta = {eta} outside (0, 1/20)"));
    }
    if !(s > 4.0 * eta) {
        report.failed_hypotheses.push(format!("s = {s} not above 4 eta"));
    }
    let min_p = min_fault_probability(cd);
    report.witness.insert("min_fault_probability".into(), min_p);
    if min_p < eta {
        report.failed_hypotheses.push(format!("min fault probability {min_p} below eta"));
    }
    if report.failed_hypotheses.is_empty() {
        let mut min_cor = f64::INFINITY;
        'pairs: for i in 0..n {
            for j in i + 1..n {
                let c = cd.pair_correlation(i, j).map(|c| c.pearson).unwrap_or(f64::NEG_INFINITY);
                min_cor = min_cor.min(c);
                if c < s {
                    report.failed_hypotheses.push(format!("cor({i},{j}) = {c} below s"));
                    break 'pairs;
                }
            }
        }
        if n >= 2 {
            report.witness.insert("min_pair_correlation".into(), min_cor);
        }
        if n < 2 {
            report.failed_hypotheses.push("fewer than two qubits".into());
        }
    }
    report.hypotheses_satisfied = report.failed_hypotheses.is_empty();
    if report.hypotheses_satisfied {
        let tail = cd.count_tail(s * n as f64 / 2.0);
        report.conclude(cd, tail, s * eta / 4.0);
    }
    report
}

fn balanced_partition(n: usize, rng: &mut LabRng) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut x = order[..n / 2].to_vec();
    let mut y = order[n / 2..].to_vec();
    x.sort_unstable();
    y.sort_unstable();
    (x, y)
}

/// Mean any-fault correlation over every balanced partition; `None` if all are degenerate.
pub fn exact_partition_mean(cd: &CoarseDistribution) -> Option<f64> {
    let n = cd.n();
    let mut total = 0.0;
    let mut count = 0usize;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n / 2 {
            continue;
        }
        let x: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 1).collect();
        let y: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 0).collect();
        if let Ok(c) = cd.block_correlation(&x, &y) {
            total += c.any_fault;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Estimates `E[cor_{X,Y}]` over random balanced partitions and, when it reaches `s`,
/// checks `P(sum x > s n / 2) > s eta / 4` with `eta = min_i p_i`.
pub fn verify_corpart(cd: &CoarseDistribution, partitions: usize, s: f64, seed: Seed) -> Result<PropositionReport> {
    if partitions == 0 {
        return Err(Error::BadRange("at least one partition is required".into()));
    }
    let n = cd.n();
    if n < 2 {
        return Err(Error::BadRange("partitions need at least two qubits".into()));
    }
    let mut report = PropositionReport::new("corpart", cd.sample_size().is_none());
    report.notes.push("eta taken as min_i p_i; the bound's eta is not fixed by the hypotheses".into());
    let values: Vec<Option<f64>> = (0..partitions)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.derive("corpart-partition", k as u64).rng();
            let (x, y) = balanced_partition(n, &mut rng);
            cd.block_correlation(&x, &y).ok().map(|c| c.any_fault)
        })
        .collect();
    let live: Vec<f64> = values.iter().flatten().copied().collect();
    report.witness.insert("s".into(), s);
    report.witness.insert("partitions".into(), partitions as f64);
    report.witness.insert("degenerate_partitions".into(), (partitions - live.len()) as f64);
    let eta_hat = min_fault_probability(cd);
    report.witness.insert("eta_hat".into(), eta_hat);
    if live.is_empty() {
        report.failed_hypotheses.push("every sampled partition has a degenerate block".into());
        return Ok(report);
    }
    let k = live.len() as f64;
    let mean = live.iter().sum::<f64>() / k;
    let var = if live.len() > 1 { live.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    report.witness.insert("expected_correlation".into(), mean);
    report.witness.insert("expected_correlation_standard_error".into(), (var / k).sqrt());
    if !(s > 0.0) {
        report.failed_hypotheses.push(format!("s = {s} must be positive"));
    }
    if mean < s {
        report.failed_hypotheses.push(format!("expected correlation {mean} below s"));
    }
    report.hypotheses_satisfied = report.failed_hypotheses.is_empty();
    if report.hypotheses_satisfied {
        let tail = cd.count_tail(s * n as f64 / 2.0);
        report.conclude(cd, tail, s * eta_hat / 4.0);
    }
    Ok(report)
}

/// Families sampled by [`search_cor2q`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Cor2qFamily {
    /// A synchronized component mixed with up to `components` product components.
    Mixtures { n: usize, eta: f64, s: f64, components: usize },
    /// Random tables on `support` patterns (plus the all-zero and all-one patterns).
    RandomSparse { n: usize, eta: f64, s: f64, support: usize },
    Products { n: usize, eta: f64, s: f64 },
    Synchronized { n: usize, eta: f64, s: f64 },
}

impl Cor2qFamily {
    fn params(&self) -> (usize, f64, f64) {
        match *self {
            Cor2qFamily::Mixtures { n, eta, s, .. }
            | Cor2qFamily::RandomSparse { n, eta, s, .. }
            | Cor2qFamily::Products { n, eta, s }
            | Cor2qFamily::Synchronized { n, eta, s } => (n, eta, s),
        }
    }

    fn sample(&self, rng: &mut LabRng) -> Result<CoarseDistribution> {
        let (n, eta, _) = self.params();
        match *self {
            Cor2qFamily::Mixtures { components, .. } => {
                let w0 = rng.random_range(0.2..1.0);
                let q = rng.random_range(eta..0.5);
                let k = rng.random_range(1..=components.max(1));
                let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                let mut parts = vec![CoarseDistribution::synchronized(n, q)?];
                let mut weights = vec![w0];
                for r in raw {
                    let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
                    parts.push(CoarseDistribution::product(&probs)?);
                    weights.push((1.0 - w0) * r / total);
                }
                CoarseDistribution::mixture(&parts, &weights)
            }
            Cor2qFamily::RandomSparse { support, .. } => {
                let mut table: BTreeMap<u32, f64> = BTreeMap::new();
                table.insert(0, rng.random::<f64>() * 4.0);
                table.insert((1u32 << n) - 1, rng.random::<f64>());
                for _ in 0..support {
                    *table.entry(rng.random_range(0..1u32 << n)).or_insert(0.0) += rng.random::<f64>() * 0.2;
                }
                let total: f64 = table.values().sum();
                CoarseDistribution::new(n, table.into_iter().map(|(b, p)| (BitString::new(n, b), p / total)))
            }
            Cor2qFamily::Products { .. } => {
                let probs: Vec<f64> = (0..n).map(|_| rng.random_range(eta..0.5)).collect();
                CoarseDistribution::product(&probs)
            }
            Cor2qFamily::Synchronized { .. } => CoarseDistribution::synchronized(n, rng.random_range(eta..0.95)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub family: Cor2qFamily,
    pub requested: usize,
    pub attempts: usize,
    pub max_attempts: usize,
    /// Samples satisfying the hypotheses.
    pub checked: usize,
    pub passed: usize,
    pub counterexample_count: usize,
    pub counterexamples: Vec<CoarseDistribution>,
    /// Smallest `tail - bound` among checked samples.
    pub min_margin: Option<f64>,
}

/// Samples the family until `trials` hypothesis-satisfying distributions have been checked
/// (or `20 * trials` attempts were made).
pub fn search_cor2q(family: Cor2qFamily, trials: usize, seed: Seed) -> Result<SearchReport> {
    let (n, eta, s) = family.params();
    if n < 2 || n > MAX_SEARCH_QUBITS {
        return Err(Error::CapExceeded { what: "cor2q search", n, cap: MAX_SEARCH_QUBITS });
    }
    let max_attempts = trials.saturating_mul(20).max(SEARCH_BATCH);
    let mut report = SearchReport {
        family,
        requested: trials,
        attempts: 0,
        max_attempts,
        checked: 0,
        passed: 0,
        counterexample_count: 0,
        counterexamples: Vec::new(),
        min_margin: None,
    };
    let mut start = 0usize;
    while report.checked < trials && start < max_attempts {
        let end = (start + SEARCH_BATCH).min(max_attempts);
        let batch = (start..end)
            .into_par_iter()
            .map(|k| {
                let mut rng = seed.derive("cor2q-attempt", k as u64).rng();
                let cd = family.sample(&mut rng)?;
                Ok(verify_cor2q(&cd, eta, s))
            })
            .collect::<Result<Vec<_>>>()?;
        for r in batch {
            if report.checked >= trials {
                break;
            }
            report.attempts += 1;
            if !r.hypotheses_satisfied {
                continue;
            }
            report.checked += 1;
            let margin = r.witness["margin"];
            report.min_margin = Some(report.min_margin.map_or(margin, |m: f64| m.min(margin)));
            if r.conclusion_satisfied {
                report.passed += 1;
            } else {
                report.counterexample_count += 1;
                if report.counterexamples.len() < MAX_STORED_COUNTEREXAMPLES {
                    report.counterexamples.extend(r.counterexample);
                }
            }
        }
        start = end;
    }
    Ok(report)
}
