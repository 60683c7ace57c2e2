//! Noise constructions: smoothing kernels, detrimental (forward-propagated)
//! noise, reverse smoothing, conjugation envelopes, calibrated random unitary
//! channels and gate-local noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::QuantumChannel;
use crate::circuit::{Circuit, Gate};
use crate::linalg::{self, CMat};
use crate::pauli::accumulate_pauli_masses;
use crate::pauli_channel::PauliChannel;
use crate::rng::Seed;
use crate::simulate::LocalNoise;
use crate::state::{DensityMatrix, UnitaryOp};
use crate::syndrome::{pauli_channel_mass, pauli_mass, weight_profile, SyndromeDistribution, WeightProfile};
use crate::{Caps, Error, Result};

/// Positive weight function `K` on elapsed (normalized) time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Uniform,
    /// `K(x) = exp(-x / tau)`.
    ExpDecay { tau: f64 },
    /// `K(x) = 1` for `x <= w`, else 0.
    Window { w: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Uniform => Ok(()),
            KernelSpec::ExpDecay { tau } if tau > 0.0 && tau.is_finite() => Ok(()),
            KernelSpec::ExpDecay { tau } => Err(Error::BadRange(format!("kernel tau {tau} must be positive"))),
            KernelSpec::Window { w } if w > 0.0 && w <= 1.0 => Ok(()),
            KernelSpec::Window { w } => Err(Error::BadRange(format!("kernel window {w} outside (0, 1]"))),
        }
    }

    /// `K(x)` for `x >= 0`.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            KernelSpec::Uniform => 1.0,
            KernelSpec::ExpDecay { tau } => (-x / tau).exp(),
            KernelSpec::Window { w } => {
                if x <= w + 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn normalized(raw: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::BadWeights("kernel vanishes on every term".into()));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `w_s ∝ K((t - s) / T)` for `s = 1..=t`.
pub fn kernel_weights(k: &KernelSpec, t: usize, total: usize) -> Result<Vec<f64>> {
    k.validate()?;
    if t == 0 || t > total {
        return Err(Error::BadRange(format!("cycle {t} outside 1..={total}")));
    }
    normalized((1..=t).map(|s| k.eval((t - s) as f64 / total as f64)).collect())
}

/// `w'_s ∝ K((s - t) / T)` for `s = t+1..=T`.
pub fn reverse_kernel_weights(k: &KernelSpec, t: usize, total: usize) -> Result<Vec<f64>> {
    k.validate()?;
    if t == 0 || t >= total {
        return Err(Error::BadRange(format!("reverse smoothing needs 1 <= t < {total}, got {t}")));
    }
    normalized((t + 1..=total).map(|s| k.eval((s - t) as f64 / total as f64)).collect())
}

/// Segment unitaries of a circuit, computed once for dense propagation.
pub struct Frame<'a> {
    circuit: &'a Circuit,
    unitaries: Option<Vec<Vec<UnitaryOp>>>,
}

impl<'a> Frame<'a> {
    pub fn new(circuit: &'a Circuit) -> Self {
        Frame { circuit, unitaries: None }
    }

    pub fn dense(circuit: &'a Circuit) -> Result<Self> {
        Ok(Frame { circuit, unitaries: Some(circuit.all_segment_unitaries()?) })
    }

    pub fn circuit(&self) -> &Circuit {
        self.circuit
    }

    pub fn unitary(&self, s: usize, t: usize) -> Result<UnitaryOp> {
        match &self.unitaries {
            Some(table) if s <= t && t < table.len() => Ok(table[s][t - s].clone()),
            _ => self.circuit.segment_unitary(s, t),
        }
    }
}

/// Channel representations the noise transforms can work with.
pub trait NoiseChannel: Clone + Send + Sync + Sized {
    fn n(&self) -> usize;
    /// `U_{s,t} E U_{s,t}^dagger`.
    fn propagate(&self, frame: &Frame<'_>, s: usize, t: usize) -> Result<Self>;
    fn mixture(channels: &[Self], weights: &[f64]) -> Result<Self>;
    fn syndrome(&self) -> Result<SyndromeDistribution>;
    fn cptp_ok(&self) -> bool;
}

impl NoiseChannel for QuantumChannel {
    fn n(&self) -> usize {
        QuantumChannel::n(self)
    }

    fn propagate(&self, frame: &Frame<'_>, s: usize, t: usize) -> Result<Self> {
        if s == t {
            return Ok(self.clone());
        }
        self.conjugate_by_unitary(&frame.unitary(s, t)?)
    }

    fn mixture(channels: &[Self], weights: &[f64]) -> Result<Self> {
        QuantumChannel::mix(channels, weights)
    }

    fn syndrome(&self) -> Result<SyndromeDistribution> {
        pauli_mass(self)
    }

    fn cptp_ok(&self) -> bool {
        self.validate_cptp().passed
    }
}

impl NoiseChannel for PauliChannel {
    fn n(&self) -> usize {
        PauliChannel::n(self)
    }

    fn propagate(&self, frame: &Frame<'_>, s: usize, t: usize) -> Result<Self> {
        if s == t {
            return Ok(self.clone());
        }
        self.conjugate_clifford(&frame.circuit().segment(s, t)?)
    }

    fn mixture(channels: &[Self], weights: &[f64]) -> Result<Self> {
        PauliChannel::mix(channels, weights)
    }

    fn syndrome(&self) -> Result<SyndromeDistribution> {
        Ok(pauli_channel_mass(self))
    }

    fn cptp_ok(&self) -> bool {
        let total: f64 = self.masses().values().sum();
        (total - 1.0).abs() <= crate::TOL.distribution_sum && self.masses().values().all(|m| *m >= 0.0)
    }
}

/// Base noise `E_1..E_T` and the fresh noise `E'_1..E'_T` derived from it.
#[derive(Debug, Clone)]
pub struct DetrimentalSchedule<C> {
    pub circuit: Circuit,
    pub base: Vec<C>,
    pub kernel: KernelSpec,
    pub derived: Vec<C>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub t: usize,
    pub alpha: f64,
    pub f: Vec<f64>,
}

impl<C: NoiseChannel> DetrimentalSchedule<C> {
    /// `E'_t` (1-indexed).
    pub fn fresh(&self, t: usize) -> Result<&C> {
        if t == 0 || t > self.derived.len() {
            return Err(Error::BadRange(format!("cycle {t} outside 1..={}", self.derived.len())));
        }
        Ok(&self.derived[t - 1])
    }

    pub fn all_cptp(&self) -> bool {
        self.derived.iter().all(|e| e.cptp_ok())
    }

    /// Weight profile of every derived channel.
    pub fn summaries(&self) -> Result<Vec<CycleSummary>> {
        self.derived
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let wp = weight_profile(&e.syndrome()?);
                Ok(CycleSummary { t: i + 1, alpha: wp.alpha, f: wp.f })
            })
            .collect()
    }
}

/// `E'_t = sum_{s <= t} w_s U_{s,t} E_s U_{s,t}^dagger` with `w_s ∝ K((t - s) / T)`.
pub fn detrimental_transform(c: &Circuit, base: &[QuantumChannel], k: &KernelSpec) -> Result<DetrimentalSchedule<QuantumChannel>> {
    Caps::check_superop(c.n(), "detrimental transform")?;
    let frame = Frame::dense(c)?;
    transform_with(&frame, base, k)
}

/// Sparse counterpart of [`detrimental_transform`] for Clifford circuits and Pauli noise.
pub fn detrimental_transform_pauli(c: &Circuit, base: &[PauliChannel], k: &KernelSpec) -> Result<DetrimentalSchedule<PauliChannel>> {
    if let Some(g) = c.gates().find(|g| !g.kind.is_clifford()) {
        return Err(Error::NotClifford(g.kind.name().to_string()));
    }
    transform_with(&Frame::new(c), base, k)
}

pub fn transform_with<C: NoiseChannel>(frame: &Frame<'_>, base: &[C], k: &KernelSpec) -> Result<DetrimentalSchedule<C>> {
    let c = frame.circuit();
    let total = c.depth();
    if base.len() != total {
        return Err(Error::LengthMismatch(total, base.len()));
    }
    k.validate()?;
    for e in base {
        if e.n() != c.n() {
            return Err(Error::DimensionMismatch { expected: c.n(), found: e.n() });
        }
    }
    let derived = (1..=total)
        .into_par_iter()
        .map(|t| {
            let weights = kernel_weights(k, t, total)?;
            let mut terms = Vec::with_capacity(t);
            let mut kept = Vec::with_capacity(t);
            for (s, w) in (1..=t).zip(weights) {
                if w > 0.0 {
                    terms.push(base[s - 1].propagate(frame, s, t)?);
                    kept.push(w);
                }
            }
            C::mixture(&terms, &kept)
        })
        .collect::<Result<Vec<C>>>()?;
    Ok(DetrimentalSchedule { circuit: c.clone(), base: base.to_vec(), kernel: *k, derived })
}

/// `E''_t = sum_{s > t} w'_s E_s` with `w'_s ∝ K((s - t) / T)`; no conjugation.
pub fn reverse_smoothing<C: NoiseChannel>(base: &[C], k: &KernelSpec, t: usize) -> Result<C> {
    let weights = reverse_kernel_weights(k, t, base.len())?;
    let mut terms = Vec::new();
    let mut kept = Vec::new();
    for (e, w) in base[t..].iter().zip(weights) {
        if w > 0.0 {
            terms.push(e.clone());
            kept.push(w);
        }
    }
    C::mixture(&terms, &kept)
}

/// The set `{U E_0 U^dagger : U rho_0 U^dagger = rho}`, generated from a fixed representative `U`.
#[derive(Debug, Clone)]
pub struct NoiseEnvelope {
    pub rho0: DensityMatrix,
    pub e0: QuantumChannel,
}

impl NoiseEnvelope {
    /// Noise accompanying the state `U rho_0 U^dagger` prepared by `U`.
    pub fn generate(&self, u: &UnitaryOp) -> Result<QuantumChannel> {
        self.e0.conjugate_by_unitary(u)
    }

    /// Generator at the pair `(rho, U)`; `rho` must equal `U rho_0 U^dagger`.
    pub fn generate_at(&self, rho: &DensityMatrix, u: &UnitaryOp) -> Result<QuantumChannel> {
        let prepared = self.rho0.evolve(u)?;
        let gap = linalg::frobenius(&linalg::sub(prepared.matrix(), rho.matrix()));
        if gap > 1e-8 {
            return Err(Error::PreconditionViolated(format!("state is not U rho_0 U^dagger (gap {gap:e})")));
        }
        self.generate(u)
    }

    pub fn prepared_state(&self, u: &UnitaryOp) -> Result<DensityMatrix> {
        self.rho0.evolve(u)
    }
}

pub fn memory_example_envelope(rho0: &DensityMatrix, e0: &QuantumChannel) -> Result<NoiseEnvelope> {
    if rho0.n() != e0.n() {
        return Err(Error::DimensionMismatch { expected: rho0.n(), found: e0.n() });
    }
    let report = e0.validate_cptp();
    if !report.passed {
        return Err(Error::PreconditionViolated(format!(
            "base channel is not CPTP (trace residual {:e}, min Choi eigenvalue {:e})",
            report.trace_residual, report.min_choi_eigenvalue
        )));
    }
    Ok(NoiseEnvelope { rho0: rho0.clone(), e0: e0.clone() })
}

/// `Ad_U` with `U = exp(i theta H)` calibrated to an expected number of qubit errors.
#[derive(Debug, Clone)]
pub struct ConditionedHaar {
    pub channel: QuantumChannel,
    pub theta: f64,
    pub alpha: f64,
    pub profile: WeightProfile,
    pub iterations: usize,
}

pub const MAX_HAAR_QUBITS: usize = 8;
/// Relative calibration tolerance on alpha.
pub const HAAR_ALPHA_TOL: f64 = 0.02;

fn unitary_profile(values: &[f64], vectors: &CMat, theta: f64, n: usize) -> (CMat, WeightProfile) {
    let u = linalg::expm_from_eigh(values, vectors, theta);
    let mut masses = vec![0.0; 1 << (2 * n)];
    accumulate_pauli_masses(&u, n, 1.0, &mut masses);
    let d = SyndromeDistribution::dense(n, masses).expect("unitary masses sum to one");
    (u, weight_profile(&d))
}

pub fn conditioned_haar_channel(n: usize, target_alpha: f64, seed: Seed) -> Result<ConditionedHaar> {
    if n == 0 || n > MAX_HAAR_QUBITS {
        return Err(Error::CapExceeded { what: "conditioned random unitary", n, cap: MAX_HAAR_QUBITS });
    }
    if !(target_alpha > 0.0 && target_alpha < 0.75 * n as f64) {
        return Err(Error::BadRange(format!("target alpha {target_alpha} outside (0, {})", 0.75 * n as f64)));
    }
    let d = 1usize << n;
    let mut rng = seed.rng();
    let mut h = linalg::gue(d, &mut rng);
    let shift = linalg::trace(&h) / d as f64;
    for i in 0..d {
        h[(i, i)] -= shift;
    }
    let norm = linalg::frobenius(&h) / (d as f64).sqrt();
    let h = linalg::scale(&h, linalg::ONE / norm);
    let (values, vectors) = linalg::eigh(&h);
    let alpha_at = |theta: f64| unitary_profile(&values, &vectors, theta, n);
    let mut iterations = 0usize;
    let (mut lo, mut hi) = (0.0f64, 1e-3f64);
    loop {
        iterations += 1;
        let (_, wp) = alpha_at(hi);
        if wp.alpha >= target_alpha {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 || iterations > 60 {
            return Err(Error::CalibrationFailed(format!(
                "alpha stayed below {target_alpha} up to theta {lo}"
            )));
        }
    }
    for _ in 0..200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (u, wp) = alpha_at(mid);
        if (wp.alpha - target_alpha).abs() <= 0.25 * HAAR_ALPHA_TOL * target_alpha {
            let channel = QuantumChannel::unitary(&UnitaryOp::new(u)?);
            return Ok(ConditionedHaar { channel, theta: mid, alpha: wp.alpha, profile: wp, iterations });
        }
        if wp.alpha < target_alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationFailed(format!("bisection on [{lo}, {hi}] did not reach alpha {target_alpha}")))
}

/// Noise `e` confined to the qubits of gate `g`.
pub fn gate_noise(g: &Gate, e: &QuantumChannel) -> Result<LocalNoise> {
    if e.n() != g.qubits.len() {
        return Err(Error::DimensionMismatch { expected: g.qubits.len(), found: e.n() });
    }
    LocalNoise::new(g.qubits.clone(), e.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use crate::pauli::PauliString;
    use crate::syndrome::{coarse_distribution, qubit_error_amount};
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    fn dep(n: usize, p: f64) -> QuantumChannel {
        QuantumChannel::depolarizing(n, p, &(0..n).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn kernel_weight_examples() {
        let w = kernel_weights(&KernelSpec::Uniform, 3, 4).unwrap();
        assert!(close(&w, &[1.0 / 3.0; 3], 1e-15));
        let w = kernel_weights(&KernelSpec::Window { w: 0.25 }, 4, 4).unwrap();
        assert!(close(&w, &[0.0, 0.0, 0.5, 0.5], 1e-15));
        let w = kernel_weights(&KernelSpec::ExpDecay { tau: 0.5 }, 2, 2).unwrap();
        let e = (-1.0f64).exp();
        assert!(close(&w, &[e / (1.0 + e), 1.0 / (1.0 + e)], 1e-12));
        assert!((w[0] - 0.2689).abs() < 1e-4 && (w[1] - 0.7311).abs() < 1e-4);
        assert!(kernel_weights(&KernelSpec::Uniform, 0, 4).is_err());
        assert!(kernel_weights(&KernelSpec::Uniform, 5, 4).is_err());
        assert!(kernel_weights(&KernelSpec::ExpDecay { tau: 0.0 }, 1, 4).is_err());
        assert!(kernel_weights(&KernelSpec::Window { w: 1.5 }, 1, 4).is_err());
    }

    #[test]
    fn kernel_json() {
        let k: KernelSpec = serde_json::from_str(r#"{"kind":"exp_decay","tau":0.5}"#).unwrap();
        assert_eq!(k, KernelSpec::ExpDecay { tau: 0.5 });
        assert_eq!(serde_json::to_string(&KernelSpec::Uniform).unwrap(), r#"{"kind":"uniform"}"#);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"kind":"window","w":0.2,"x":1}"#).is_err());
    }

    #[test]
    fn first_cycle_is_unchanged() {
        let c = Circuit::ghz(2).unwrap();
        let mut rng = Seed(1).rng();
        let base: Vec<_> = (0..2).map(|_| QuantumChannel::random(2, 2, &mut rng).unwrap()).collect();
        for k in [KernelSpec::Uniform, KernelSpec::ExpDecay { tau: 0.3 }, KernelSpec::Window { w: 0.5 }] {
            let sched = detrimental_transform(&c, &base, &k).unwrap();
            assert!(sched.fresh(1).unwrap().superop_distance(&base[0]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn bell_detrimental_matches_oracle() {
        let c = Circuit::bell();
        let d = dep(2, 0.05);
        let sched = detrimental_transform(&c, &[d.clone(), d.clone()], &KernelSpec::Uniform).unwrap();
        let cnot = UnitaryOp::new(GateKind::CNOT.matrix()).unwrap();
        let oracle = QuantumChannel::mix(&[d.conjugate_by_unitary(&cnot).unwrap(), d.clone()], &[0.5, 0.5]).unwrap();
        assert!(sched.fresh(2).unwrap().superop_distance(&oracle).unwrap() < 1e-12);
        let cd = coarse_distribution(&pauli_mass(sched.fresh(2).unwrap()).unwrap());
        assert!(cd.pair_correlation(0, 1).unwrap().pearson > 0.0);
        assert!(sched.all_cptp());
    }

    #[test]
    fn identity_circuit_gives_plain_mixture() {
        let c = Circuit::idle(2, 3);
        let base = vec![dep(2, 0.1), dep(2, 0.2), dep(2, 0.3)];
        let sched = detrimental_transform(&c, &base, &KernelSpec::Uniform).unwrap();
        for t in 1..=3 {
            let w = kernel_weights(&KernelSpec::Uniform, t, 3).unwrap();
            let plain = QuantumChannel::mix(&base[..t], &w).unwrap();
            assert!(sched.fresh(t).unwrap().superop_distance(&plain).unwrap() < 1e-12);
        }
    }

    #[test]
    fn reverse_smoothing_examples() {
        let base = vec![dep(1, 0.1), dep(1, 0.3)];
        let r = reverse_smoothing(&base, &KernelSpec::Uniform, 1).unwrap();
        assert!(r.superop_distance(&base[1]).unwrap() < 1e-12);
        let same = vec![dep(1, 0.2); 4];
        for t in 1..4 {
            let r = reverse_smoothing(&same, &KernelSpec::ExpDecay { tau: 0.4 }, t).unwrap();
            assert!(r.superop_distance(&same[0]).unwrap() < 1e-12);
        }
        assert!(reverse_smoothing(&base, &KernelSpec::Uniform, 2).is_err());
    }

    #[test]
    fn envelope_examples() {
        let rho0 = DensityMatrix::zero_state(3).unwrap();
        let p = 0.08;
        let e0 = QuantumChannel::depolarizing(3, p, &[0]).unwrap();
        let env = memory_example_envelope(&rho0, &e0).unwrap();
        let id = UnitaryOp::identity(3).unwrap();
        assert!(env.generate(&id).unwrap().superop_distance(&e0).unwrap() < 1e-12);
        let u = Circuit::ghz(3).unwrap().segment_unitary(0, 3).unwrap();
        let wp = weight_profile(&pauli_mass(&env.generate(&u).unwrap()).unwrap());
        assert!((wp.f[1] - p / 4.0).abs() < 1e-12);
        assert!((wp.f[3] - p / 2.0).abs() < 1e-12);
        let h = UnitaryOp::new(GateKind::H.matrix()).unwrap();
        let env1 = memory_example_envelope(&DensityMatrix::zero_state(1).unwrap(), &dep(1, p)).unwrap();
        assert!(env1.generate(&h).unwrap().superop_distance(&dep(1, p)).unwrap() < 1e-12);
        let bad = QuantumChannel::from_kraus_unchecked(vec![linalg::scale(&linalg::identity(8), linalg::ONE * 0.5)]).unwrap();
        assert!(memory_example_envelope(&rho0, &bad).is_err());
    }

    #[test]
    fn conditioned_haar_hits_target() {
        let r = conditioned_haar_channel(4, 0.3, Seed(3)).unwrap();
        assert!((r.alpha - 0.3).abs() <= HAAR_ALPHA_TOL * 0.3);
        let wp = weight_profile(&pauli_mass(&r.channel).unwrap());
        assert!((wp.alpha - r.alpha).abs() < 1e-9);
        assert!(conditioned_haar_channel(4, 3.5, Seed(3)).is_err());
        assert!(conditioned_haar_channel(9, 0.3, Seed(3)).is_err());
        let tiny = conditioned_haar_channel(2, 1e-6, Seed(5)).unwrap();
        assert!(tiny.theta < 1e-2);
    }

    #[test]
    fn conditioned_haar_concentrates_near_three_quarters() {
        let r = conditioned_haar_channel(6, 0.3, Seed(11)).unwrap();
        let f = r.profile.normalized_nonidentity().unwrap();
        let mean: f64 = f.iter().enumerate().map(|(s, v)| s as f64 * v).sum();
        assert!((mean - 4.5).abs() < 0.3, "mean weight {mean}");
    }

    #[test]
    fn gate_noise_examples() {
        let d2 = dep(2, 0.1);
        let frag = gate_noise(&Gate::cnot(0, 1), &d2).unwrap();
        assert_eq!(frag.qubits, vec![0, 1]);
        let deph = QuantumChannel::dephasing(1, 0.2, 0).unwrap();
        let frag = gate_noise(&Gate::h(2), &deph).unwrap();
        let ext = frag.extended(3).unwrap();
        assert!(ext.superop_distance(&QuantumChannel::dephasing(3, 0.2, 2).unwrap()).unwrap() < 1e-12);
        let d = pauli_mass(&ext).unwrap();
        for q in 0..2 {
            assert!(qubit_error_amount(&d, q).unwrap().abs() < 1e-14);
        }
        assert!(gate_noise(&Gate::cnot(0, 1), &deph).is_err());
    }

    #[test]
    fn sparse_path_matches_dense() {
        for n in 1..=3 {
            let mut cycles = vec![vec![Gate::h(0)]];
            for q in 1..n {
                cycles.push(vec![Gate::cnot(q - 1, q)]);
            }
            cycles.push(vec![Gate::single(GateKind::S, n - 1)]);
            let c = Circuit::new(n, cycles).unwrap();
            let t = c.depth();
            let support: Vec<usize> = (0..n).collect();
            let pbase: Vec<PauliChannel> = (0..t)
                .map(|i| PauliChannel::depolarizing(n, 0.02 * (i + 1) as f64, &support[..=(i % n)]).unwrap())
                .collect();
            let dbase: Vec<QuantumChannel> = pbase.iter().map(|e| e.to_channel().unwrap()).collect();
            for k in [KernelSpec::Uniform, KernelSpec::ExpDecay { tau: 0.5 }] {
                let sparse = detrimental_transform_pauli(&c, &pbase, &k).unwrap();
                let dense = detrimental_transform(&c, &dbase, &k).unwrap();
                for t in 1..=t {
                    let a = sparse.fresh(t).unwrap().syndrome().unwrap();
                    let b = dense.fresh(t).unwrap().syndrome().unwrap();
                    assert!(a.sup_distance(&b).unwrap() < 1e-10);
                }
            }
        }
        let rx = Circuit::product_rx(1, 0.3).unwrap();
        assert!(matches!(
            detrimental_transform_pauli(&rx, &[PauliChannel::identity(1).unwrap()], &KernelSpec::Uniform),
            Err(Error::NotClifford(_))
        ));
    }

    #[test]
    fn single_string_consistency() {
        let e = PauliChannel::pauli("ZI".parse::<PauliString>().unwrap());
        let sched = detrimental_transform_pauli(&Circuit::bell(), &[e.clone(), e], &KernelSpec::Uniform).unwrap();
        let m = sched.fresh(2).unwrap();
        assert!((m.mass(&"ZI".parse().unwrap()) - 1.0).abs() < 1e-15);
    }

    fn random_circuit(n: usize, depth: usize, rng: &mut crate::rng::LabRng) -> Circuit {
        use rand::Rng;
        let mut cycles = Vec::new();
        for _ in 0..depth {
            let a = rng.random_range(0..n);
            let mut cycle = vec![Gate::single(GateKind::RY(rng.random::<f64>() * 3.0), a)];
            if n > 1 {
                let b = (a + 1) % n;
                cycle = vec![Gate::cnot(a, b)];
                let c = (b + 1) % n;
                if c != a {
                    cycle.push(Gate::single(GateKind::RX(rng.random::<f64>()), c));
                }
            }
            cycles.push(cycle);
        }
        Circuit::new(n, cycles).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn derived_channels_are_cptp_and_alpha_is_linear(seed in any::<u64>(), n in 1usize..=3, depth in 1usize..=4, tau in 0.1f64..2.0) {
            let mut rng = Seed(seed).rng();
            let c = random_circuit(n, depth, &mut rng);
            let base: Vec<_> = (0..depth).map(|_| QuantumChannel::random(n, 2, &mut rng).unwrap()).collect();
            let k = KernelSpec::ExpDecay { tau };
            let sched = detrimental_transform(&c, &base, &k).unwrap();
            for t in 1..=depth {
                let e = sched.fresh(t).unwrap();
                let report = e.validate_cptp();
                prop_assert!(report.min_choi_eigenvalue >= -1e-9 && report.passed);
                let w = kernel_weights(&k, t, depth).unwrap();
                let mut expect = 0.0;
                for s in 1..=t {
                    let u = c.segment_unitary(s, t).unwrap();
                    expect += w[s - 1] * weight_profile(&pauli_mass(&base[s - 1].conjugate_by_unitary(&u).unwrap()).unwrap()).alpha;
                }
                prop_assert!((weight_profile(&pauli_mass(e).unwrap()).alpha - expect).abs() < 1e-10);
            }
        }
    }
}
