//! Completely positive trace-preserving maps in Kraus form.
//!
//! Vectorization is row-major: `vec(rho)[i * d + j] = rho[i, j]`, so the
//! superoperator of `rho -> A rho A^dagger` is `A (x) conj(A)`. The Choi matrix is
//! `J = sum_k vec(A_k) vec(A_k)^dagger`.

use std::sync::OnceLock;

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::TOL;
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::pauli_channel::PauliChannel;
use crate::rng::Seed;
use crate::state::{trace_distance, DensityMatrix, UnitaryOp};
use crate::{Caps, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct QuantumChannel {
    n: usize,
    kraus: Vec<CMat>,
    superop: OnceLock<CMat>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    n: usize,
    #[serde(with = "crate::serde_mat::list")]
    kraus: Vec<CMat>,
}

impl TryFrom<RawChannel> for QuantumChannel {
    type Error = Error;
    fn try_from(raw: RawChannel) -> Result<Self> {
        let e = QuantumChannel::new(raw.kraus)?;
        if e.n != raw.n {
            return Err(Error::DimensionMismatch { expected: raw.n, found: e.n });
        }
        Ok(e)
    }
}

impl From<QuantumChannel> for RawChannel {
    fn from(e: QuantumChannel) -> Self {
        RawChannel { n: e.n, kraus: e.kraus }
    }
}

/// Result of [`QuantumChannel::validate_cptp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    /// Operator norm of `sum A^dagger A - I`.
    pub trace_residual: f64,
    /// Frobenius norm of `sum A^dagger A - I`.
    pub trace_residual_frobenius: f64,
    pub min_choi_eigenvalue: f64,
    pub passed: bool,
}

fn dims_of(kraus: &[CMat]) -> Result<usize> {
    let first = kraus.first().ok_or_else(|| Error::Invalid("channel needs at least one Kraus operator".into()))?;
    let d = first.nrows();
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::Invalid(format!("Kraus dimension {d} is not a power of two")));
    }
    for a in kraus {
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Invalid("Kraus operators must be square and equal-sized".into()));
        }
    }
    Ok(d.trailing_zeros() as usize)
}

fn drop_negligible(kraus: Vec<CMat>) -> Vec<CMat> {
    let d = kraus.first().map_or(1, |a| a.nrows());
    let kept: Vec<CMat> = kraus.into_iter().filter(|a| linalg::frobenius(a) >= TOL.kraus_drop).collect();
    if kept.is_empty() {
        vec![linalg::zeros(d, d)]
    } else {
        kept
    }
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

impl QuantumChannel {
    /// Channel from Kraus operators; fails if trace preservation is violated.
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let e = Self::from_kraus_unchecked(kraus)?;
        let (op, _) = e.trace_residuals();
        if op > TOL.trace_preservation {
            return Err(Error::Invalid(format!("Kraus set is not trace preserving (residual {op:e})")));
        }
        Ok(e)
    }

    /// Kraus list without the trace-preservation check; pair with [`Self::validate_cptp`].
    pub fn from_kraus_unchecked(kraus: Vec<CMat>) -> Result<Self> {
        let n = dims_of(&kraus)?;
        Caps::check_dense(n, "channel")?;
        let kraus = drop_negligible(kraus);
        if kraus.len() > Caps::current().kraus_count {
            let e = QuantumChannel { n, kraus, superop: OnceLock::new() };
            return e.canonicalized();
        }
        Ok(QuantumChannel { n, kraus, superop: OnceLock::new() })
    }

    fn from_parts(n: usize, kraus: Vec<CMat>) -> Result<Self> {
        let kraus = drop_negligible(kraus);
        let e = QuantumChannel { n, kraus, superop: OnceLock::new() };
        if e.kraus.len() > Caps::current().kraus_count {
            return e.canonicalized();
        }
        Ok(e)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Caps::check_dense(n, "channel")?;
        Ok(QuantumChannel { n, kraus: vec![linalg::identity(1 << n)], superop: OnceLock::new() })
    }

    /// `rho -> U rho U^dagger`.
    pub fn unitary(u: &UnitaryOp) -> Self {
        QuantumChannel { n: u.n(), kraus: vec![u.matrix().clone()], superop: OnceLock::new() }
    }

    /// Random channel with `count` Kraus operators cut from a Haar isometry.
    pub fn random<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Self> {
        Caps::check_dense(n, "channel")?;
        Self::from_parts(n, linalg::random_kraus(1 << n, count.max(1), rng))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    /// Kraus operators remixed by an isometry `W` (`B_j = sum_k W[j,k] A_k`).
    pub fn remixed(&self, w: &CMat) -> Result<Self> {
        if w.ncols() != self.kraus.len() {
            return Err(Error::LengthMismatch(w.ncols(), self.kraus.len()));
        }
        let d = self.dim();
        let kraus = (0..w.nrows())
            .map(|j| {
                let mut b = linalg::zeros(d, d);
                for (k, a) in self.kraus.iter().enumerate() {
                    b = &b + &linalg::scale(a, w[(j, k)]);
                }
                b
            })
            .collect();
        Self::from_parts(self.n, kraus)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_same_n(self.n, rho.n())?;
        Ok(DensityMatrix::from_matrix_unchecked(self.apply_matrix(rho.matrix())))
    }

    /// `sum_k A_k m A_k^dagger` for an arbitrary square matrix.
    pub fn apply_matrix(&self, m: &CMat) -> CMat {
        let d = self.dim();
        let mut out = linalg::zeros(d, d);
        for a in &self.kraus {
            out = &out + &linalg::sandwich(a, m);
        }
        out
    }

    /// `second(first(rho))`.
    pub fn compose(second: &QuantumChannel, first: &QuantumChannel) -> Result<QuantumChannel> {
        check_same_n(second.n, first.n)?;
        let count = second.kraus.len() * first.kraus.len();
        if count <= Caps::current().kraus_count {
            let mut kraus = Vec::with_capacity(count);
            for b in &second.kraus {
                for a in &first.kraus {
                    kraus.push(b * a);
                }
            }
            return Self::from_parts(second.n, kraus);
        }
        Caps::check_superop(second.n, "channel composition")?;
        let s = second.superop()? * first.superop()?;
        Self::from_superop(&s)
    }

    /// `rho -> U E(U^dagger rho U) U^dagger`.
    pub fn conjugate_by_unitary(&self, u: &UnitaryOp) -> Result<QuantumChannel> {
        check_same_n(self.n, u.n())?;
        let kraus = self.kraus.iter().map(|a| linalg::sandwich(u.matrix(), a)).collect();
        Ok(QuantumChannel { n: self.n, kraus, superop: OnceLock::new() })
    }

    /// Convex mixture `sum_i w_i E_i`.
    pub fn mix(channels: &[QuantumChannel], weights: &[f64]) -> Result<QuantumChannel> {
        check_weights(weights, channels.len())?;
        let n = channels[0].n;
        for e in channels {
            check_same_n(n, e.n)?;
        }
        let count: usize = channels
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(e, _)| e.kraus.len())
            .sum();
        if count > Caps::current().kraus_count {
            Caps::check_superop(n, "channel mixture")?;
            let d2 = 1usize << (2 * n);
            let mut s = linalg::zeros(d2, d2);
            for (e, &w) in channels.iter().zip(weights) {
                if w > 0.0 {
                    s = &s + &linalg::scale(e.superop()?, C64::new(w, 0.0));
                }
            }
            return Self::from_superop(&s);
        }
        let mut kraus = Vec::with_capacity(count);
        for (e, &w) in channels.iter().zip(weights) {
            if w > 0.0 {
                let r = C64::new(w.sqrt(), 0.0);
                kraus.extend(e.kraus.iter().map(|a| linalg::scale(a, r)));
            }
        }
        Self::from_parts(n, kraus)
    }

    /// Extend a channel on `qubits` to an `n`-qubit register, identity elsewhere.
    pub fn embed(&self, qubits: &[usize], n: usize) -> Result<QuantumChannel> {
        if qubits.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: qubits.len() });
        }
        check_qubits(qubits, n)?;
        Caps::check_dense(n, "channel")?;
        let kraus = self.kraus.iter().map(|a| linalg::embed(a, qubits, n)).collect();
        Ok(QuantumChannel { n, kraus, superop: OnceLock::new() })
    }

    /// `E (x) F` with `self` on the leading qubits.
    pub fn tensor(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        let n = self.n + other.n;
        Caps::check_dense(n, "channel")?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(linalg::kron(a, b));
            }
        }
        Self::from_parts(n, kraus)
    }

    fn trace_residuals(&self) -> (f64, f64) {
        let d = self.dim();
        let mut m = linalg::zeros(d, d);
        for a in &self.kraus {
            m = &m + &(a.adjoint() * a);
        }
        let diff = linalg::sub(&m, &linalg::identity(d));
        (linalg::spectral_norm_hermitian(&diff), linalg::frobenius(&diff))
    }

    /// Stacked vectorized Kraus operators, `d^2 x K`.
    fn kraus_columns(&self) -> CMat {
        let d = self.dim();
        Mat::from_fn(d * d, self.kraus.len(), |r, k| self.kraus[k][(r / d, r % d)])
    }

    pub fn validate_cptp(&self) -> CptpReport {
        let (op, frob) = self.trace_residuals();
        let d2 = self.dim() * self.dim();
        let min_choi = if self.kraus.len() < d2 {
            let v = self.kraus_columns();
            let gram = v.adjoint() * &v;
            linalg::eigvalsh(&gram)[0].min(0.0)
        } else {
            linalg::eigvalsh(&self.choi())[0]
        };
        CptpReport {
            trace_residual: op,
            trace_residual_frobenius: frob,
            min_choi_eigenvalue: min_choi,
            passed: op <= TOL.trace_preservation && min_choi >= -TOL.choi_psd,
        }
    }

    pub fn choi(&self) -> CMat {
        if let Some(s) = self.superop.get() {
            return reshuffle(s, self.dim());
        }
        let v = self.kraus_columns();
        &v * v.adjoint()
    }

    /// Cached `d^2 x d^2` superoperator; requires `n` within the superoperator cap.
    pub fn superop(&self) -> Result<&CMat> {
        if let Some(s) = self.superop.get() {
            return Ok(s);
        }
        Caps::check_superop(self.n, "superoperator")?;
        let s = reshuffle(&self.choi(), self.dim());
        Ok(self.superop.get_or_init(|| s))
    }

    /// Channel from a superoperator, via the Choi eigendecomposition.
    pub fn from_superop(s: &CMat) -> Result<QuantumChannel> {
        let d2 = s.nrows();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 || s.ncols() != d2 || !d.is_power_of_two() {
            return Err(Error::Invalid("superoperator must be d^2 x d^2 with d a power of two".into()));
        }
        let n = d.trailing_zeros() as usize;
        Caps::check_superop(n, "superoperator")?;
        let kraus = kraus_from_choi(&reshuffle(s, d), d);
        let e = QuantumChannel { n, kraus, superop: OnceLock::new() };
        let _ = e.superop.set(s.clone());
        Ok(e)
    }

    /// Minimal Kraus form with the trace-preservation defect projected out.
    pub fn canonicalized(&self) -> Result<QuantumChannel> {
        Caps::check_superop(self.n, "Kraus canonicalization")?;
        let kraus = kraus_from_choi(&self.choi(), self.dim());
        let kraus = restore_trace_preservation(kraus);
        Ok(QuantumChannel { n: self.n, kraus, superop: OnceLock::new() })
    }

    /// Frobenius distance between superoperators.
    pub fn superop_distance(&self, other: &QuantumChannel) -> Result<f64> {
        check_same_n(self.n, other.n)?;
        Ok(linalg::frobenius(&linalg::sub(self.superop()?, other.superop()?)))
    }

    /// `(E1 o E2 - E2 o E1)` measured in Frobenius norm of superoperators.
    pub fn commutator_norm(&self, other: &QuantumChannel) -> Result<f64> {
        check_same_n(self.n, other.n)?;
        let (a, b) = (self.superop()?, other.superop()?);
        Ok(linalg::frobenius(&linalg::sub(&(a * b), &(b * a))))
    }

    /// Single-qubit `Z` dephasing on `qubit`: Kraus `{sqrt(1-q) I, sqrt(q) Z}`.
    pub fn dephasing(n: usize, q: f64, qubit: usize) -> Result<QuantumChannel> {
        check_probability(q)?;
        check_qubits(&[qubit], n)?;
        let local = QuantumChannel::new(vec![
            linalg::scale(&linalg::identity(2), C64::new((1.0 - q).sqrt(), 0.0)),
            linalg::scale(&crate::circuit::GateKind::Z.matrix(), C64::new(q.sqrt(), 0.0)),
        ])?;
        local.embed(&[qubit], n)
    }

    /// Independent `rho -> (1-p) rho + p I/2` on each qubit of `support`.
    pub fn depolarizing(n: usize, p: f64, support: &[usize]) -> Result<QuantumChannel> {
        PauliChannel::depolarizing(n, p, support)?.to_channel()
    }

    /// `rho -> (1-p) rho + p I/2^n`.
    pub fn correlated_depolarizing(n: usize, p: f64) -> Result<QuantumChannel> {
        PauliChannel::correlated_depolarizing(n, p)?.to_channel()
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::BadProbability(p));
    }
    Ok(())
}

pub(crate) fn check_qubits(qubits: &[usize], n: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(Error::BadIndex { index: q, n });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::Invalid(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

pub(crate) fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::BadWeights("empty mixture".into()));
    }
    if weights.len() != count {
        return Err(Error::BadWeights(format!("{} weights for {count} components", weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::BadWeights(format!("weight {w} is negative or not finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > TOL.weights_sum {
        return Err(Error::BadWeights(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Swap between superoperator and Choi index layouts (an involution).
fn reshuffle(m: &CMat, d: usize) -> CMat {
    Mat::from_fn(d * d, d * d, |r, c| {
        let (a, b) = (r / d, r % d);
        let (x, y) = (c / d, c % d);
        m[(a * d + x, b * d + y)]
    })
}

fn kraus_from_choi(j: &CMat, d: usize) -> Vec<CMat> {
    let (values, vectors) = linalg::eigh(j);
    let top = values.last().copied().unwrap_or(0.0).max(1.0);
    let mut kraus: Vec<CMat> = Vec::new();
    for (idx, &l) in values.iter().enumerate().rev() {
        if l <= 1e-13 * top {
            continue;
        }
        let r = l.sqrt();
        kraus.push(Mat::from_fn(d, d, |a, c| vectors[(a * d + c, idx)] * r));
    }
    if kraus.is_empty() {
        kraus.push(linalg::zeros(d, d));
    }
    kraus
}

/// `A_k <- A_k M^{-1/2}` with `M = sum A^dagger A`, when `M` is close to identity.
fn restore_trace_preservation(kraus: Vec<CMat>) -> Vec<CMat> {
    let d = kraus[0].nrows();
    let mut m = linalg::zeros(d, d);
    for a in &kraus {
        m = &m + &(a.adjoint() * a);
    }
    let defect = linalg::spectral_norm_hermitian(&linalg::sub(&m, &linalg::identity(d)));
    if defect == 0.0 || defect > 1e-6 {
        return kraus;
    }
    let (values, vectors) = linalg::eigh(&m);
    let scaled = Mat::from_fn(d, d, |i, j| vectors[(i, j)] * (1.0 / values[j].sqrt()));
    let inv_sqrt = &scaled * vectors.adjoint();
    kraus.into_iter().map(|a| &a * &inv_sqrt).collect()
}

/// State families for [`channel_error_rate`], in increasing strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateStrategy {
    /// Computational basis states.
    BasisStates,
    /// Basis states plus `m` Haar-random pure states.
    RandomPure { m: usize, seed: Seed },
    /// `RandomPure` followed by local search from the best state found.
    Refine { m: usize, iterations: usize, seed: Seed },
}

/// Lower bound on `sup_rho D(rho, E(rho))` over the chosen state family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub value: f64,
    pub states_evaluated: usize,
    pub lower_bound: bool,
}

fn pure_displacement(apply: &dyn Fn(&CMat) -> CMat, psi: &[C64]) -> f64 {
    let d = psi.len();
    let rho = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
    let out = apply(&rho);
    0.5 * linalg::trace_norm_hermitian(&linalg::sub(&out, &rho))
}

fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d).map(|_| linalg::complex_normal(rng)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [C64]) {
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in v.iter_mut() {
        *a /= norm;
    }
}

/// Estimate of the channel's trace-distance error rate.
pub fn channel_error_rate(e: &QuantumChannel, strategy: RateStrategy) -> Result<RateEstimate> {
    Caps::check_dense(e.n, "channel error rate")?;
    Ok(error_rate_with(e.dim(), &|m| e.apply_matrix(m), strategy))
}

/// [`channel_error_rate`] for a Pauli channel, applied through its sparse action.
pub fn pauli_channel_error_rate(e: &PauliChannel, strategy: RateStrategy) -> Result<RateEstimate> {
    Caps::check_dense(e.n(), "channel error rate")?;
    Ok(error_rate_with(1 << e.n(), &|m| e.apply_matrix(m), strategy))
}

fn error_rate_with(d: usize, e: &dyn Fn(&CMat) -> CMat, strategy: RateStrategy) -> RateEstimate {
    let mut best = 0.0f64;
    let mut best_state: Vec<C64> = vec![ZERO; d];
    best_state[0] = ONE;
    let mut evaluated = 0usize;
    for k in 0..d {
        let mut psi = vec![ZERO; d];
        psi[k] = ONE;
        let v = pure_displacement(e, &psi);
        evaluated += 1;
        if v > best {
            best = v;
            best_state = psi;
        }
    }
    let (m, iterations, seed) = match strategy {
        RateStrategy::BasisStates => (0, 0, Seed(0)),
        RateStrategy::RandomPure { m, seed } => (m, 0, seed),
        RateStrategy::Refine { m, iterations, seed } => (m, iterations, seed),
    };
    let mut rng = seed.derive("rate-states", 0).rng();
    for _ in 0..m {
        let psi = random_pure(d, &mut rng);
        let v = pure_displacement(e, &psi);
        evaluated += 1;
        if v > best {
            best = v;
            best_state = psi;
        }
    }
    let mut step = 0.3;
    for _ in 0..iterations {
        let mut trial: Vec<C64> = best_state
            .iter()
            .map(|a| a + linalg::complex_normal(&mut rng) * step)
            .collect();
        normalize(&mut trial);
        let v = pure_displacement(e, &trial);
        evaluated += 1;
        if v > best {
            best = v;
            best_state = trial;
            step *= 1.2;
        } else {
            step = (step * 0.9).max(1e-4);
        }
    }
    RateEstimate { value: best, states_evaluated: evaluated, lower_bound: true }
}

/// `D(rho, E(rho))` for one state.
pub fn state_displacement(e: &QuantumChannel, rho: &DensityMatrix) -> Result<f64> {
    trace_distance(rho, &e.apply(rho)?)
}
