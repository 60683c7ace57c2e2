//! Conjecture probes and supporting comparisons. None of these assert the
//! conjectures; they report the measured quantities.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{pauli_channel_error_rate, QuantumChannel, RateStrategy};
use crate::circuit::{Circuit, Gate, GateKind};
use crate::entanglement::von_neumann_entropy;
use crate::linalg::{self, CMat, C64};
use crate::noise::{detrimental_transform, detrimental_transform_pauli, reverse_smoothing, KernelSpec, NoiseEnvelope};
use crate::pauli_channel::PauliChannel;
use crate::rng::{LabRng, Seed};
use crate::simulate::{overall_error_channel, simulate_ideal, simulate_noisy_with, NoiseSchedule, SimOptions};
use crate::state::{trace_distance, DensityMatrix, UnitaryOp};
use crate::syndrome::{
    coarse_distribution, pauli_channel_mass, pauli_mass, synchronization_report, tail_decay_check, weight_profile,
    DecayReport, SyncClassification, SyndromeDistribution, WeightProfile,
};
use crate::{Caps, Error, Result};

/// Base noise per cycle, kept sparse when it is a Pauli channel.
#[derive(Debug, Clone)]
pub enum BaseNoise {
    Pauli(Vec<PauliChannel>),
    Dense(Vec<QuantumChannel>),
}

impl BaseNoise {
    /// Independent `dep(p)` on every qubit, every cycle.
    pub fn depolarizing(n: usize, p: f64, depth: usize) -> Result<Self> {
        let all: Vec<usize> = (0..n).collect();
        let e = PauliChannel::depolarizing(n, p, &all)?;
        Ok(BaseNoise::Pauli(vec![e; depth]))
    }

    pub fn len(&self) -> usize {
        match self {
            BaseNoise::Pauli(v) => v.len(),
            BaseNoise::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn n(&self) -> Option<usize> {
        match self {
            BaseNoise::Pauli(v) => v.first().map(|e| e.n()),
            BaseNoise::Dense(v) => v.first().map(|e| e.n()),
        }
    }

    pub fn dense(&self) -> Result<Vec<QuantumChannel>> {
        match self {
            BaseNoise::Pauli(v) => v.iter().map(|e| e.to_channel()).collect(),
            BaseNoise::Dense(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pipeline {
    /// Fresh noise is the base noise.
    Standard,
    /// Fresh noise is the detrimental transform of the base noise.
    Detrimental { kernel: KernelSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelChoice {
    /// Fresh noise of cycle `t` (1-indexed).
    Fresh { t: usize },
    /// Accumulated noise in the frame of the intended final state.
    Overall,
}

/// Circuit, initial state and noise pipeline under study.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub circuit: Circuit,
    pub rho0: DensityMatrix,
    pub base: BaseNoise,
    pub pipeline: Pipeline,
}

impl Experiment {
    pub fn new(circuit: Circuit, rho0: DensityMatrix, base: BaseNoise, pipeline: Pipeline) -> Result<Self> {
        if base.len() != circuit.depth() {
            return Err(Error::LengthMismatch(circuit.depth(), base.len()));
        }
        for n in [Some(rho0.n()), base.n()].into_iter().flatten() {
            if n != circuit.n() {
                return Err(Error::DimensionMismatch { expected: circuit.n(), found: n });
            }
        }
        Ok(Experiment { circuit, rho0, base, pipeline })
    }

    fn from_circuit(circuit: Circuit, p: f64, pipeline: Pipeline) -> Result<Self> {
        let n = circuit.n();
        let base = BaseNoise::depolarizing(n, p, circuit.depth())?;
        Experiment::new(circuit, DensityMatrix::zero_state(n)?, base, pipeline)
    }

    pub fn bell(p: f64, pipeline: Pipeline) -> Result<Self> {
        Experiment::from_circuit(Circuit::bell(), p, pipeline)
    }

    pub fn ghz(n: usize, p: f64, pipeline: Pipeline) -> Result<Self> {
        Experiment::from_circuit(Circuit::ghz(n)?, p, pipeline)
    }

    /// Single-qubit rotations only, padded to two cycles.
    pub fn product(n: usize, p: f64, pipeline: Pipeline) -> Result<Self> {
        let cycles = vec![(0..n).map(|q| Gate::rx(q, 0.7)).collect(), (0..n).map(|q| Gate::single(GateKind::H, q)).collect()];
        Experiment::from_circuit(Circuit::new(n, cycles)?, p, pipeline)
    }

    pub fn n(&self) -> usize {
        self.circuit.n()
    }

    /// Syndrome distributions of the fresh noise `E'_1..E'_T`.
    pub fn fresh_syndromes(&self) -> Result<Vec<SyndromeDistribution>> {
        match (&self.pipeline, &self.base) {
            (Pipeline::Standard, BaseNoise::Pauli(v)) => Ok(v.iter().map(pauli_channel_mass).collect()),
            (Pipeline::Standard, BaseNoise::Dense(v)) => v.iter().map(pauli_mass).collect(),
            (Pipeline::Detrimental { kernel }, BaseNoise::Pauli(v)) if self.circuit.is_clifford() => {
                let s = detrimental_transform_pauli(&self.circuit, v, kernel)?;
                Ok(s.derived.iter().map(pauli_channel_mass).collect())
            }
            _ => self.fresh_dense()?.iter().map(pauli_mass).collect(),
        }
    }

    pub fn fresh_dense(&self) -> Result<Vec<QuantumChannel>> {
        let base = self.base.dense()?;
        match self.pipeline {
            Pipeline::Standard => Ok(base),
            Pipeline::Detrimental { kernel } => Ok(detrimental_transform(&self.circuit, &base, &kernel)?.derived),
        }
    }

    pub fn overall_channel(&self) -> Result<QuantumChannel> {
        Caps::check_superop(self.n(), "overall noise")?;
        let schedule = NoiseSchedule::storage(self.n(), self.fresh_dense()?)?;
        let traj = simulate_noisy_with(&self.circuit, &self.rho0, &schedule, SimOptions { accumulate_superop: true })?;
        overall_error_channel(&traj, &self.circuit)
    }

    pub fn designated_syndrome(&self, choice: ChannelChoice) -> Result<SyndromeDistribution> {
        match choice {
            ChannelChoice::Fresh { t } => {
                if t == 0 || t > self.circuit.depth() {
                    return Err(Error::BadRange(format!("cycle {t} outside 1..={}", self.circuit.depth())));
                }
                Ok(self.fresh_syndromes()?.swap_remove(t - 1))
            }
            ChannelChoice::Overall => pauli_mass(&self.overall_channel()?),
        }
    }

    pub fn ideal_final(&self) -> Result<DensityMatrix> {
        Ok(simulate_ideal(&self.circuit, &self.rho0)?.final_state().clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub entropy_i: f64,
    pub r_i: f64,
    pub r_j: f64,
    pub cor: f64,
    /// `cor / (min(r_i, r_j)^2 S(rho_i))`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub entropy_x: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub cor: f64,
    /// `cor / (min(r_X, r_Y)^2 S(rho|_X) / min(|X|, |Y|))`.
    pub scaled_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjAReport {
    pub channel: ChannelChoice,
    pub pairs: Vec<PairRow>,
    pub blocks: Vec<BlockRow>,
    /// Pairs skipped because `S(rho_i) = 0` or a marginal is degenerate.
    pub excluded: Vec<(usize, usize)>,
}

const ENTROPY_FLOOR: f64 = 1e-9;

fn require_pure(rho: &DensityMatrix) -> Result<()> {
    if (1.0 - rho.purity()).abs() > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "intended final state is mixed (purity {}); use a trace-distance entanglement measure",
            rho.purity()
        )));
    }
    Ok(())
}

/// Pairs the entanglement of the intended state with correlations of the designated noise.
pub fn conjecture_a_scan(
    exp: &Experiment,
    choice: ChannelChoice,
    pairs: Option<&[(usize, usize)]>,
    blocks: &[(Vec<usize>, Vec<usize>)],
) -> Result<ConjAReport> {
    let n = exp.n();
    let ideal = exp.ideal_final()?;
    require_pure(&ideal)?;
    let cd = coarse_distribution(&exp.designated_syndrome(choice)?);
    let all_pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let selected = pairs.unwrap_or(&all_pairs);
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &(i, j) in selected {
        let entropy_i = von_neumann_entropy(&ideal.reduced(&[i])?);
        let cor = cd.pair_correlation(i, j);
        match cor {
            Ok(c) if entropy_i > ENTROPY_FLOOR => {
                let (r_i, r_j) = (cd.fault_probability(i)?, cd.fault_probability(j)?);
                let ratio = c.pearson / (r_i.min(r_j).powi(2) * entropy_i);
                rows.push(PairRow { i, j, entropy_i, r_i, r_j, cor: c.pearson, ratio });
            }
            Ok(_) | Err(Error::DegenerateMarginal { .. }) => excluded.push((i, j)),
            Err(e) => return Err(e),
        }
    }
    let mut block_rows = Vec::new();
    for (x, y) in blocks {
        let entropy_x = von_neumann_entropy(&ideal.reduced(x)?);
        if entropy_x <= ENTROPY_FLOOR {
            continue;
        }
        let Ok(c) = cd.block_correlation(x, y) else { continue };
        let (r_x, r_y) = (cd.any_fault_probability(x)?, cd.any_fault_probability(y)?);
        let scale = x.len().min(y.len()) as f64;
        let scaled_ratio = c.any_fault / (r_x.min(r_y).powi(2) * entropy_x / scale);
        block_rows.push(BlockRow { x: x.clone(), y: y.clone(), entropy_x, r_x, r_y, cor: c.any_fault, scaled_ratio });
    }
    Ok(ConjAReport { channel: choice, pairs: rows, blocks: block_rows, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjBOptions {
    pub delta: f64,
    /// Margin for the tail-decay check.
    pub eps: f64,
    pub partitions: usize,
    pub seed: Seed,
    pub include_overall: bool,
}

impl Default for ConjBOptions {
    fn default() -> Self {
        ConjBOptions { delta: 0.1, eps: 0.1, partitions: 16, seed: Seed(0), include_overall: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjBReport {
    /// Mean `S(rho|_X)` over random balanced partitions of the intended state.
    pub partition_entropy: f64,
    pub partitions: usize,
    pub fresh_profile: WeightProfile,
    pub fresh_sync: SyncClassification,
    pub fresh_decay: DecayReport,
    pub overall_profile: Option<WeightProfile>,
    pub overall_sync: Option<SyncClassification>,
}


/// Entanglement proxy of the intended state next to the synchronization of the last fresh noise.
pub fn conjecture_b_metric(exp: &Experiment, opts: ConjBOptions) -> Result<ConjBReport> {
    let n = exp.n();
    if opts.partitions == 0 {
        return Err(Error::BadRange("at least one partition is required".into()));
    }
    let ideal = exp.ideal_final()?;
    require_pure(&ideal)?;
    let entropies = (0..opts.partitions)
        .map(|k| {
            use rand::seq::SliceRandom;
            let mut rng = opts.seed.derive("conj-b-partition", k as u64).rng();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut x = order[..(n / 2).max(1)].to_vec();
            x.sort_unstable();
            Ok(von_neumann_entropy(&ideal.reduced(&x)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    let fresh = exp.fresh_syndromes()?;
    let last = fresh.last().ok_or_else(|| Error::Invalid("empty circuit".into()))?;
    let fresh_profile = weight_profile(last);
    let fresh_sync = synchronization_report(&fresh_profile, opts.delta)?;
    let fresh_decay = tail_decay_check(&fresh_profile, opts.eps)?;
    let (overall_profile, overall_sync) = if opts.include_overall {
        let wp = weight_profile(&exp.designated_syndrome(ChannelChoice::Overall)?);
        let sync = synchronization_report(&wp, opts.delta)?;
        (Some(wp), Some(sync))
    } else {
        (None, None)
    };
    Ok(ConjBReport {
        partition_entropy: entropies.iter().sum::<f64>() / entropies.len() as f64,
        partitions: opts.partitions,
        fresh_profile,
        fresh_sync,
        fresh_decay,
        overall_profile,
        overall_sync,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub strategy: RateStrategy,
    pub independent: f64,
    pub correlated: f64,
    /// `independent / correlated`, absent when the correlated rate vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n: usize,
    pub p: f64,
    pub alpha_independent: f64,
    pub alpha_correlated: f64,
    pub alpha_equal: bool,
    pub rows: Vec<RateRow>,
}

pub const MAX_RATE_QUBITS: usize = 6;

/// Independent versus fully correlated depolarizing noise of equal expected error count.
pub fn rate_comparison(n: usize, p: f64, strategies: &[RateStrategy]) -> Result<RateReport> {
    if n == 0 || n > MAX_RATE_QUBITS {
        return Err(Error::CapExceeded { what: "rate comparison", n, cap: MAX_RATE_QUBITS });
    }
    let all: Vec<usize> = (0..n).collect();
    let independent = PauliChannel::depolarizing(n, p, &all)?;
    let correlated = PauliChannel::correlated_depolarizing(n, p)?;
    let ai = weight_profile(&pauli_channel_mass(&independent)).alpha;
    let ac = weight_profile(&pauli_channel_mass(&correlated)).alpha;
    let defaults = [RateStrategy::BasisStates];
    let strategies = if strategies.is_empty() { &defaults[..] } else { strategies };
    let rows = strategies
        .iter()
        .map(|&strategy| {
            let a = pauli_channel_error_rate(&independent, strategy)?.value;
            let b = pauli_channel_error_rate(&correlated, strategy)?.value;
            Ok(RateRow { strategy, independent: a, correlated: b, ratio: (b > 0.0).then(|| a / b) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport { n, p, alpha_independent: ai, alpha_correlated: ac, alpha_equal: (ai - ac).abs() <= 1e-10, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitFamily {
    Ghz,
    /// No gates, same depth as the GHZ circuit.
    Idle,
}

impl CircuitFamily {
    pub fn build(self, n: usize) -> Result<Circuit> {
        match self {
            CircuitFamily::Ghz => Circuit::ghz(n),
            CircuitFamily::Idle => Ok(Circuit::idle(n, n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub depth: usize,
    /// `alpha(E'_T)`.
    pub alpha: f64,
    /// `alpha` of one cycle of base noise, `3 p n / 4`.
    pub alpha_base: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub family: CircuitFamily,
    pub kernel: KernelSpec,
    pub p: f64,
    pub rows: Vec<ScalingRow>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

pub const MAX_SCALING_QUBITS: usize = 8;

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some((slope, my - slope * mx))
}

/// `alpha(E'_T)` across register sizes for a circuit family with `dep(p)` base noise.
pub fn rate_scaling_experiment(family: CircuitFamily, kernel: KernelSpec, p: f64, ns: &[usize]) -> Result<ScalingReport> {
    let rows = ns
        .iter()
        .map(|&n| {
            if n == 0 || n > MAX_SCALING_QUBITS {
                return Err(Error::CapExceeded { what: "rate scaling", n, cap: MAX_SCALING_QUBITS });
            }
            let c = family.build(n)?;
            let all: Vec<usize> = (0..n).collect();
            let base = vec![PauliChannel::depolarizing(n, p, &all)?; c.depth()];
            let sched = detrimental_transform_pauli(&c, &base, &kernel)?;
            let last = sched.derived.last().ok_or_else(|| Error::Invalid("empty circuit".into()))?;
            let alpha = weight_profile(&pauli_channel_mass(last)).alpha;
            let alpha_base = 0.75 * p * n as f64;
            Ok(ScalingRow { n, depth: c.depth(), alpha, alpha_base, ratio: (alpha_base > 0.0).then(|| alpha / alpha_base) })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = least_squares(&rows.iter().map(|r| (r.n as f64, r.alpha)).collect::<Vec<_>>());
    Ok(ScalingReport { family, kernel, p, rows, slope: fit.map(|f| f.0), intercept: fit.map(|f| f.1) })
}

/// `2^{-n/2} ||U_{t,T} U_{0,t} - U_{0,t} U_{t,T}||_F`, zero at `t = T`.
pub fn noncommutativity(c: &Circuit, t: usize) -> Result<f64> {
    let total = c.depth();
    if t == 0 || t > total {
        return Err(Error::BadRange(format!("cycle {t} outside 1..={total}")));
    }
    if t == total {
        return Ok(0.0);
    }
    let past = c.segment_unitary(0, t)?;
    let future = c.segment_unitary(t, total)?;
    let ab = linalg::mul(future.matrix(), past.matrix());
    let ba = linalg::mul(past.matrix(), future.matrix());
    Ok(linalg::frobenius(&linalg::sub(&ab, &ba)) / ((1usize << c.n()) as f64).sqrt())
}

pub fn noncommutativity_profile(c: &Circuit) -> Result<Vec<f64>> {
    (1..=c.depth()).map(|t| noncommutativity(c, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnoiseReport {
    /// Smallest `||Ad_V o E - E o Ad_V||_F` found.
    pub residual: f64,
    /// `[re, im]` entries of the best generator `H`.
    pub generator: Vec<Vec<[f64; 2]>>,
    pub restarts: usize,
    pub evaluations: usize,
    /// Residual below `1e-8`.
    pub witness: bool,
}

pub const MAX_DNOISE_QUBITS: usize = 3;
const DNOISE_ITERATIONS: usize = 300;

struct Stabilizers {
    vectors: CMat,
    blocks: Vec<(usize, usize)>,
    d: usize,
}

impl Stabilizers {
    fn new(rho: &DensityMatrix) -> Self {
        let (values, vectors) = linalg::eigh(rho.matrix());
        let d = values.len();
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..=d {
            if k == d || (values[k] - values[k - 1]).abs() > 1e-9 {
                blocks.push((start, k));
                start = k;
            }
        }
        Stabilizers { vectors, blocks, d }
    }

    fn dims(&self) -> usize {
        self.blocks.iter().map(|(a, b)| (b - a) * (b - a)).sum()
    }

    /// Traceless, unit-norm `H` commuting with `rho`.
    fn generator(&self, params: &[f64]) -> Option<CMat> {
        let mut k = linalg::zeros(self.d, self.d);
        let mut idx = 0;
        for &(a, b) in &self.blocks {
            for i in a..b {
                k[(i, i)] = C64::new(params[idx], 0.0);
                idx += 1;
                for j in i + 1..b {
                    let z = C64::new(params[idx], params[idx + 1]);
                    idx += 2;
                    k[(i, j)] = z;
                    k[(j, i)] = z.conj();
                }
            }
        }
        let shift = linalg::trace(&k) / self.d as f64;
        for i in 0..self.d {
            k[(i, i)] -= shift;
        }
        let norm = linalg::frobenius(&k);
        if norm < 1e-12 {
            return None;
        }
        let h = linalg::sandwich(&self.vectors, &k);
        Some(linalg::scale(&h, C64::new(1.0 / norm, 0.0)))
    }
}

fn commutator_residual(h: &CMat, se: &CMat) -> f64 {
    let u = linalg::expm_i_hermitian(h, 1.0);
    let sv = linalg::kron(&u, &linalg::conj(&u));
    linalg::frobenius(&linalg::sub(&linalg::mul(&sv, se), &linalg::mul(se, &sv)))
}

/// Smallest commutator between `E` and a nontrivial unitary stabilizing `rho`.
pub fn dnoise_score(e: &QuantumChannel, rho: &DensityMatrix, budget: usize, seed: Seed) -> Result<DnoiseReport> {
    let n = e.n();
    if n > MAX_DNOISE_QUBITS {
        return Err(Error::CapExceeded { what: "D-noise score", n, cap: MAX_DNOISE_QUBITS });
    }
    if rho.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.n() });
    }
    let se = e.superop()?.clone();
    let stab = Stabilizers::new(rho);
    let dims = stab.dims();
    let restarts = budget.max(1);
    let runs: Vec<(f64, Option<CMat>, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng: LabRng = seed.derive("dnoise-restart", r as u64).rng();
            let mut x: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
            let mut best = f64::INFINITY;
            let mut best_h = None;
            let mut evaluations = 0;
            if let Some(h) = stab.generator(&x) {
                best = commutator_residual(&h, &se);
                best_h = Some(h);
                evaluations += 1;
            }
            let mut sigma = 0.5;
            for _ in 0..DNOISE_ITERATIONS {
                let y: Vec<f64> = x.iter().map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
                let Some(h) = stab.generator(&y) else { continue };
                let v = commutator_residual(&h, &se);
                evaluations += 1;
                if v < best {
                    best = v;
                    best_h = Some(h);
                    x = y;
                    sigma = (sigma * 1.5).min(2.0);
                } else {
                    sigma = (sigma * 0.95).max(1e-8);
                }
            }
            (best, best_h, evaluations)
        })
        .collect();
    let mut pick = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.0 < runs[pick].0 {
            pick = k;
        }
    }
    let h = runs[pick].1.clone().ok_or_else(|| Error::Invalid("no admissible generator found".into()))?;
    Ok(DnoiseReport {
        residual: runs[pick].0,
        generator: crate::serde_mat::to_rows(&h),
        restarts,
        evaluations: runs.iter().map(|r| r.2).sum(),
        witness: runs[pick].0 <= 1e-8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub rows: Vec<InvarianceRow>,
    pub max_distance: f64,
    pub passed: bool,
}

pub const INVARIANCE_TOL: f64 = 1e-10;

/// Superoperator distance between `D(W rho, W U)` and `W D(rho, U) W^dagger`, with `rho = U rho_0 U^dagger`.
pub fn invariance_check(env: &NoiseEnvelope, u: &UnitaryOp, w: &UnitaryOp) -> Result<f64> {
    if u.n() != env.rho0.n() || w.n() != env.rho0.n() {
        return Err(Error::DimensionMismatch { expected: env.rho0.n(), found: if u.n() != env.rho0.n() { u.n() } else { w.n() } });
    }
    let rho = env.prepared_state(u)?;
    let wu = w.then_after(u)?;
    let lhs = env.generate_at(&rho.evolve(w)?, &wu)?;
    let rhs = env.generate_at(&rho, u)?.conjugate_by_unitary(w)?;
    lhs.superop_distance(&rhs)
}

/// Random Clifford circuit built from layers of H, S and CNOT.
pub fn random_clifford(n: usize, depth: usize, rng: &mut LabRng) -> Result<Circuit> {
    let mut cycles = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut cycle = Vec::new();
        let mut used = vec![false; n];
        if n > 1 && rng.random::<bool>() {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            cycle.push(Gate::cnot(a, b));
            used[a] = true;
            used[b] = true;
        }
        for q in 0..n {
            if !used[q] {
                match rng.random_range(0..3) {
                    0 => cycle.push(Gate::single(GateKind::H, q)),
                    1 => cycle.push(Gate::single(GateKind::S, q)),
                    _ => {}
                }
            }
        }
        cycles.push(cycle);
    }
    Circuit::new(n, cycles)
}

/// [`invariance_check`] over `count` random Clifford `W`.
pub fn invariance_sweep(env: &NoiseEnvelope, u: &UnitaryOp, count: usize, seed: Seed) -> Result<InvarianceReport> {
    let n = env.rho0.n();
    let rows = (0..count)
        .map(|k| {
            let mut rng = seed.derive("invariance-w", k as u64).rng();
            let w = random_clifford(n, 3 * n + 2, &mut rng)?.segment_unitary(0, 3 * n + 2)?;
            Ok(InvarianceRow { index: k, distance: invariance_check(env, u, &w)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_distance = rows.iter().map(|r| r.distance).fold(0.0, f64::max);
    Ok(InvarianceReport { rows, max_distance, passed: max_distance <= INVARIANCE_TOL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    /// `D(rho'_t, rho''_t)` for `t = 1..=T`.
    pub per_cycle: Vec<f64>,
    pub final_distance: f64,
}

/// Trajectories under detrimental noise `E'` and reverse-smoothed noise `E''`.
/// The last cycle has no future, so `E''_T = E_T`.
pub fn smoothing_comparison(c: &Circuit, base: &[QuantumChannel], kernel: &KernelSpec, rho0: &DensityMatrix) -> Result<SmoothingReport> {
    let total = c.depth();
    let forward = detrimental_transform(c, base, kernel)?.derived;
    let mut reverse = Vec::with_capacity(total);
    for t in 1..=total {
        reverse.push(if t < total { reverse_smoothing(base, kernel, t)? } else { base[total - 1].clone() });
    }
    let opts = SimOptions { accumulate_superop: false };
    let a = simulate_noisy_with(c, rho0, &NoiseSchedule::storage(c.n(), forward)?, opts)?;
    let b = simulate_noisy_with(c, rho0, &NoiseSchedule::storage(c.n(), reverse)?, opts)?;
    let per_cycle = (1..=total)
        .map(|t| trace_distance(&a.snapshots[t], &b.snapshots[t]))
        .collect::<Result<Vec<_>>>()?;
    let final_distance = per_cycle.last().copied().unwrap_or(0.0);
    Ok(SmoothingReport { per_cycle, final_distance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::memory_example_envelope;
    use crate::pauli::PauliString;

    fn detrimental() -> Pipeline {
        Pipeline::Detrimental { kernel: KernelSpec::Uniform }
    }

    /// Independent oracle: squared normalized traces `|Tr(P A)|^2 / d^2`.
    fn chi_diagonal(e: &QuantumChannel) -> Vec<(PauliString, f64)> {
        let n = e.n();
        let d = (1usize << n) as f64;
        PauliString::all(n)
            .map(|p| {
                let pm = p.matrix().unwrap();
                let m: f64 = e.kraus().iter().map(|a| (linalg::trace(&linalg::mul(&pm, a)) / d).norm_sqr()).sum();
                (p, m)
            })
            .collect()
    }

    fn oracle_cor(masses: &[(PauliString, f64)], i: usize, j: usize) -> f64 {
        let (mut pi, mut pj, mut pij) = (0.0, 0.0, 0.0);
        for (p, m) in masses {
            let fi = !p.letter(i).is_identity();
            let fj = !p.letter(j).is_identity();
            pi += if fi { *m } else { 0.0 };
            pj += if fj { *m } else { 0.0 };
            pij += if fi && fj { *m } else { 0.0 };
        }
        (pij - pi * pj) / (pi * (1.0 - pi) * pj * (1.0 - pj)).sqrt()
    }

    #[test]
    fn bell_scans() {
        let standard = Experiment::bell(0.05, Pipeline::Standard).unwrap();
        let r = conjecture_a_scan(&standard, ChannelChoice::Fresh { t: 2 }, None, &[]).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert!(r.pairs[0].cor.abs() <= 1e-9 && r.pairs[0].ratio.abs() <= 1e-6);
        assert!((r.pairs[0].entropy_i - 1.0).abs() < 1e-9);

        let exp = Experiment::bell(0.05, detrimental()).unwrap();
        let r = conjecture_a_scan(&exp, ChannelChoice::Fresh { t: 2 }, None, &[(vec![0], vec![1])]).unwrap();
        let fresh = exp.fresh_dense().unwrap();
        let oracle = oracle_cor(&chi_diagonal(&fresh[1]), 0, 1);
        assert!(r.pairs[0].cor > 0.0);
        assert!((r.pairs[0].cor - oracle).abs() < 1e-9);
        assert!(r.pairs[0].ratio > 0.0);
        assert_eq!(r.blocks.len(), 1);
        assert!((r.blocks[0].cor - r.pairs[0].cor).abs() < 1e-12);
    }

    #[test]
    fn overall_noise_scan_runs() {
        let exp = Experiment::bell(0.05, detrimental()).unwrap();
        let r = conjecture_a_scan(&exp, ChannelChoice::Overall, None, &[]).unwrap();
        assert!(r.pairs[0].cor > 0.0);
        assert!(conjecture_a_scan(&exp, ChannelChoice::Fresh { t: 3 }, None, &[]).is_err());
    }

    #[test]
    fn unentangled_pairs_are_excluded() {
        let exp = Experiment::product(2, 0.05, detrimental()).unwrap();
        let r = conjecture_a_scan(&exp, ChannelChoice::Fresh { t: 2 }, None, &[]).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.excluded, vec![(0, 1)]);
    }

    #[test]
    fn standard_product_noise_has_no_correlation() {
        let exp = Experiment::ghz(4, 0.03, Pipeline::Standard).unwrap();
        for t in 1..=4 {
            let r = conjecture_a_scan(&exp, ChannelChoice::Fresh { t }, None, &[]).unwrap();
            assert!(r.pairs.iter().all(|p| p.cor.abs() <= 1e-9));
        }
    }

    #[test]
    fn mixed_intended_state_is_rejected() {
        let mut exp = Experiment::bell(0.05, Pipeline::Standard).unwrap();
        exp.rho0 = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(
            conjecture_a_scan(&exp, ChannelChoice::Fresh { t: 1 }, None, &[]),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn conjecture_b_examples() {
        let opts = ConjBOptions { partitions: 6, seed: Seed(3), ..Default::default() };
        let exp = Experiment::ghz(5, 0.01, detrimental()).unwrap();
        let r = conjecture_b_metric(&exp, opts).unwrap();
        assert!((r.partition_entropy - 1.0).abs() < 1e-9);
        let dense_alpha = weight_profile(&pauli_mass(exp.fresh_dense().unwrap().last().unwrap()).unwrap()).alpha;
        assert!((r.fresh_profile.alpha - dense_alpha).abs() < 1e-10);
        let prod = conjecture_b_metric(&Experiment::product(3, 0.05, detrimental()).unwrap(), opts).unwrap();
        assert!(prod.partition_entropy.abs() < 1e-9);
        let std = conjecture_b_metric(&Experiment::ghz(5, 0.01, Pipeline::Standard).unwrap(), opts).unwrap();
        assert!(std.fresh_decay.passed && !std.fresh_decay.trivial);
        assert!(!std.fresh_sync.synchronized);
    }

    #[test]
    fn rate_examples() {
        let r = rate_comparison(3, 0.01, &[]).unwrap();
        assert!((r.alpha_independent - 0.0225).abs() < 1e-12);
        assert!((r.alpha_correlated - 0.0225).abs() < 1e-12);
        assert!(r.alpha_equal);
        assert!((r.rows[0].correlated - 0.01 * (1.0 - 0.125)).abs() < 1e-12);
        assert!((r.rows[0].independent - (1.0 - 0.995f64.powi(3))).abs() < 1e-12);
        let one = rate_comparison(1, 0.01, &[]).unwrap();
        assert!((one.rows[0].ratio.unwrap() - 1.0).abs() < 1e-12);
        let mut last = 0.0;
        for n in 2..=6 {
            let r = rate_comparison(n, 0.01, &[]).unwrap();
            assert!(r.alpha_equal);
            let ratio = r.rows[0].ratio.unwrap();
            assert!(ratio > last);
            last = ratio;
        }
        assert!(rate_comparison(7, 0.01, &[]).is_err());
    }

    #[test]
    fn scaling_examples() {
        let r = rate_scaling_experiment(CircuitFamily::Ghz, KernelSpec::Uniform, 0.02, &[2, 3, 4, 5]).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.slope.is_some());
        for row in r.rows.iter().take(2) {
            let exp = Experiment::ghz(row.n, 0.02, detrimental()).unwrap();
            let dense = weight_profile(&pauli_mass(exp.fresh_dense().unwrap().last().unwrap()).unwrap()).alpha;
            assert!((row.alpha - dense).abs() < 1e-10);
        }
        let idle = rate_scaling_experiment(CircuitFamily::Idle, KernelSpec::Uniform, 0.02, &[2, 3, 4]).unwrap();
        for row in &idle.rows {
            assert!((row.alpha - row.alpha_base).abs() < 1e-12);
        }
        let memoryless = rate_scaling_experiment(CircuitFamily::Ghz, KernelSpec::Window { w: 1e-6 }, 0.02, &[2, 3, 4]).unwrap();
        for row in &memoryless.rows {
            assert!((row.alpha - row.alpha_base).abs() < 1e-12);
        }
    }

    #[test]
    fn noncommutativity_examples() {
        let diag = Circuit::new(2, vec![vec![Gate::z(0)], vec![Gate::cz(0, 1)], vec![Gate::single(GateKind::RZ(0.4), 1)]]).unwrap();
        assert!(noncommutativity_profile(&diag).unwrap().iter().all(|m| m.abs() < 1e-12));
        let hz = Circuit::new(1, vec![vec![Gate::h(0)], vec![Gate::z(0)]]).unwrap();
        assert!((noncommutativity(&hz, 1).unwrap() - 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(noncommutativity(&hz, 2).unwrap(), 0.0);
        assert!(noncommutativity(&hz, 0).is_err() && noncommutativity(&hz, 3).is_err());
    }

    #[test]
    fn dnoise_examples() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let dep = QuantumChannel::depolarizing(1, 0.2, &[0]).unwrap();
        assert!(dnoise_score(&dep, &DensityMatrix::maximally_mixed(1).unwrap(), 2, Seed(1)).unwrap().residual < 1e-8);
        assert!(dnoise_score(&dep, &zero, 2, Seed(1)).unwrap().residual < 1e-8);
        let deph = QuantumChannel::dephasing(1, 0.3, 0).unwrap();
        let r = dnoise_score(&deph, &zero, 2, Seed(1)).unwrap();
        assert!(r.witness);
        let x = QuantumChannel::unitary(&UnitaryOp::new(GateKind::X.matrix()).unwrap());
        let r = dnoise_score(&x, &zero, 4, Seed(1)).unwrap();
        assert!(r.residual > 0.1);
        let two = dnoise_score(&x, &zero, 2, Seed(5)).unwrap().residual;
        let six = dnoise_score(&x, &zero, 6, Seed(5)).unwrap().residual;
        assert!(six <= two + 1e-15);
    }

    #[test]
    fn invariance_examples() {
        let rho0 = DensityMatrix::zero_state(2).unwrap();
        let e0 = QuantumChannel::random(2, 2, &mut Seed(4).rng()).unwrap();
        let env = memory_example_envelope(&rho0, &e0).unwrap();
        let u = Circuit::bell().segment_unitary(0, 2).unwrap();
        let id = UnitaryOp::identity(2).unwrap();
        assert!(invariance_check(&env, &u, &id).unwrap() < 1e-12);
        let r = invariance_sweep(&env, &u, 6, Seed(2)).unwrap();
        assert!(r.passed, "max distance {}", r.max_distance);
        assert!(invariance_check(&env, &u, &u.dagger()).unwrap() < 1e-10);
        let at_rho0 = env.generate_at(&rho0, &id).unwrap();
        assert!(at_rho0.superop_distance(&e0).unwrap() < 1e-12);
        assert!(invariance_check(&env, &u, &UnitaryOp::identity(1).unwrap()).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let diag = Circuit::new(2, vec![vec![Gate::z(0)], vec![Gate::cz(0, 1)], vec![Gate::single(GateKind::S, 1)]]).unwrap();
        let deph = QuantumChannel::dephasing(2, 0.1, 0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        let rho0 = plus.tensor(&plus).unwrap();
        let r = smoothing_comparison(&diag, &vec![deph; 3], &KernelSpec::Uniform, &rho0).unwrap();
        assert!(r.final_distance <= 1e-10);
        let base = vec![QuantumChannel::depolarizing(2, 0.05, &[0, 1]).unwrap(); 2];
        let r = smoothing_comparison(&Circuit::bell(), &base, &KernelSpec::Uniform, &DensityMatrix::zero_state(2).unwrap()).unwrap();
        assert_eq!(r.per_cycle.len(), 2);
        let clean = vec![QuantumChannel::identity(2).unwrap(); 2];
        let r = smoothing_comparison(&Circuit::bell(), &clean, &KernelSpec::Uniform, &DensityMatrix::zero_state(2).unwrap()).unwrap();
        assert!(r.final_distance < 1e-14);
    }
}
