//! Weight concentration of calibrated random unitary channels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::noise::{conditioned_haar_channel, MAX_HAAR_QUBITS};
use crate::rng::Seed;
use crate::syndrome::{binomial_pmf, WeightProfile};
use crate::{Error, Result};

/// Non-identity mass below which a trial counts as noiseless.
const VANISHING_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub alpha: f64,
    pub theta: f64,
    /// `1 - f(0)`.
    pub nonidentity_mass: f64,
    /// `sum_s s f~(s) / n`, absent when the noise vanishes.
    pub weight_fraction: Option<f64>,
    /// Total variation between `f~` and Binomial(n, 3/4) conditioned on `s >= 1`.
    pub tv_distance: Option<f64>,
    pub normalized_profile: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncExperimentReport {
    pub n: usize,
    pub target_alpha: f64,
    pub trials: Vec<TrialRow>,
    pub mean_weight_fraction: Option<f64>,
    pub mean_tv_distance: Option<f64>,
    /// Mean of `f~` over non-vanishing trials.
    pub mean_profile: Option<Vec<f64>>,
    /// `n = 1`: `f~` is forced onto weight 1.
    pub degenerate: bool,
    pub vanishing_noise: bool,
}

/// Binomial(n, 3/4) restricted to `s >= 1`: the weight law of a uniform non-identity string.
fn reference_profile(n: usize) -> Vec<f64> {
    let mut b = binomial_pmf(n, 0.75);
    let rest = 1.0 - b[0];
    b[0] = 0.0;
    b.iter().map(|x| x / rest).collect()
}

pub fn summarize_trial(wp: &WeightProfile, theta: f64) -> TrialRow {
    let n = wp.n;
    let mass = 1.0 - wp.f[0];
    let normalized = if mass > VANISHING_MASS { wp.normalized_nonidentity() } else { None };
    let reference = reference_profile(n);
    let fraction = normalized
        .as_ref()
        .map(|f| f.iter().enumerate().map(|(s, v)| s as f64 * v).sum::<f64>() / n as f64);
    let tv = normalized
        .as_ref()
        .map(|f| 0.5 * f.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum::<f64>());
    TrialRow { alpha: wp.alpha, theta, nonidentity_mass: mass, weight_fraction: fraction, tv_distance: tv, normalized_profile: normalized }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub(crate) fn aggregate(n: usize, target_alpha: f64, trials: Vec<TrialRow>) -> SyncExperimentReport {
    let live: Vec<&Vec<f64>> = trials.iter().filter_map(|t| t.normalized_profile.as_ref()).collect();
    let mean_profile = if live.is_empty() {
        None
    } else {
        Some((0..=n).map(|s| live.iter().map(|f| f[s]).sum::<f64>() / live.len() as f64).collect())
    };
    SyncExperimentReport {
        n,
        target_alpha,
        mean_weight_fraction: mean(trials.iter().filter_map(|t| t.weight_fraction)),
        mean_tv_distance: mean(trials.iter().filter_map(|t| t.tv_distance)),
        mean_profile,
        degenerate: n == 1,
        vanishing_noise: trials.iter().any(|t| t.normalized_profile.is_none()),
        trials,
    }
}

/// Draw `trials` calibrated random unitary channels and measure their weight concentration.
pub fn run_random_unitary_sync(n: usize, target_alpha: f64, trials: usize, seed: Seed) -> Result<SyncExperimentReport> {
    if n == 0 || n > MAX_HAAR_QUBITS {
        return Err(Error::CapExceeded { what: "random unitary synchronization", n, cap: MAX_HAAR_QUBITS });
    }
    if trials == 0 {
        return Err(Error::BadRange("at least one trial is required".into()));
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|k| {
            let c = conditioned_haar_channel(n, target_alpha, seed.derive("haar-trial", k as u64))?;
            Ok(summarize_trial(&c.profile, c.theta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(n, target_alpha, rows))
}
