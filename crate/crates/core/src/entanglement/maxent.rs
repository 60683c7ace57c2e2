//! Maximum-entropy state with prescribed proper marginals.
//!
//! Facial reduction first confines the completion to the intersection of the
//! marginal supports (each lifted to the full register). On that face the
//! optimum is a Gibbs state `exp(sum_k lambda_k P_k)` over the Pauli strings
//! of weight `1..m-1`, found by damped Newton on the convex dual.

use serde::{Deserialize, Serialize};

use super::{check_register, entropy_of_spectrum, von_neumann_entropy};
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::pauli::PauliString;
use crate::state::DensityMatrix;
use crate::{Error, Result};

/// Success threshold on the trace-norm marginal mismatch.
pub const MAXENT_TOL: f64 = 1e-6;
pub const MAX_MAXENT_QUBITS: usize = 4;
const MAX_NEWTON_STEPS: usize = 400;
const SUPPORT_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxEntSolution {
    pub rho_star: DensityMatrix,
    /// Bits.
    pub entropy: f64,
    pub constraint_residual: f64,
    pub iterations: usize,
    /// Dimension of the face the completion lives on.
    pub support_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEnt {
    pub subset: Vec<usize>,
    pub ent: f64,
    pub entropy: f64,
    pub completion_entropy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntReport {
    /// `ENT(rho; A)` for the full register.
    pub ent: f64,
    pub per_subset: Vec<SubsetEnt>,
    pub ent_tilde: f64,
}

fn proper_subsets(m: usize) -> Vec<Vec<usize>> {
    (0..m).map(|skip| (0..m).filter(|&q| q != skip).collect()).collect()
}

/// Orthonormal columns spanning the intersection of the lifted marginal supports.
fn face_basis(sigma: &DensityMatrix) -> Result<CMat> {
    let m = sigma.n();
    let d = sigma.dim();
    let mut defect = linalg::zeros(d, d);
    for b in proper_subsets(m) {
        let (values, vectors) = linalg::eigh(sigma.reduced(&b)?.matrix());
        let db = values.len();
        let top = values.last().copied().unwrap_or(0.0).max(1.0);
        let mut kernel = linalg::zeros(db, db);
        for (k, &l) in values.iter().enumerate() {
            if l <= SUPPORT_CUTOFF * top {
                for i in 0..db {
                    for j in 0..db {
                        kernel[(i, j)] += vectors[(i, k)] * vectors[(j, k)].conj();
                    }
                }
            }
        }
        defect = linalg::add(&defect, &linalg::embed(&kernel, &b, m));
    }
    let (values, vectors) = linalg::eigh(&defect);
    let cols: Vec<usize> = (0..d).filter(|&k| values[k] < 1e-8).collect();
    if cols.is_empty() {
        return Err(Error::PreconditionViolated("marginal supports have empty intersection".into()));
    }
    Ok(CMat::from_fn(d, cols.len(), |i, j| vectors[(i, cols[j])]))
}

struct Gibbs {
    probs: Vec<f64>,
    vectors: CMat,
    energies: Vec<f64>,
    log_z: f64,
}

fn gibbs(ops: &[CMat], lambda: &[f64], r: usize) -> Gibbs {
    let mut h = linalg::zeros(r, r);
    for (op, &l) in ops.iter().zip(lambda) {
        if l != 0.0 {
            h = linalg::add(&h, &linalg::scale(op, ONE * l));
        }
    }
    let (energies, vectors) = linalg::eigh(&h);
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = energies.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Gibbs { probs: w.iter().map(|x| x / z).collect(), vectors, energies, log_z: top + z.ln() }
}

impl Gibbs {
    fn state(&self) -> CMat {
        let r = self.probs.len();
        CMat::from_fn(r, r, |i, j| {
            (0..r).map(|a| self.vectors[(i, a)] * self.vectors[(j, a)].conj() * self.probs[a]).sum()
        })
    }
}

fn dual_value(g: &Gibbs, lambda: &[f64], c: &[f64]) -> f64 {
    g.log_z - lambda.iter().zip(c).map(|(l, c)| l * c).sum::<f64>()
}

/// Maximum-entropy state on qubits `a` sharing every `(|a|-1)`-marginal with `rho`.
pub fn max_entropy_completion(rho: &DensityMatrix, a: &[usize]) -> Result<MaxEntSolution> {
    let sigma = if a.len() == rho.n() && a.iter().enumerate().all(|(i, &q)| i == q) {
        rho.clone()
    } else {
        rho.reduced(a)?
    };
    let m = sigma.n();
    check_register(m, MAX_MAXENT_QUBITS, "max-entropy completion")?;
    let d = sigma.dim();
    if m == 1 {
        let rho_star = DensityMatrix::maximally_mixed(1)?;
        return Ok(MaxEntSolution { rho_star, entropy: 1.0, constraint_residual: 0.0, iterations: 0, support_dim: 2 });
    }
    let q = face_basis(&sigma)?;
    let r = q.ncols();
    let qd = linalg::dagger(&q);
    let mut ops = Vec::new();
    let mut targets = Vec::new();
    for p in PauliString::all(m).filter(|p| p.weight() >= 1 && p.weight() < m) {
        let full = p.matrix()?;
        let reduced = linalg::mul(&linalg::mul(&qd, &full), &q);
        if linalg::frobenius(&reduced) < 1e-12 {
            continue;
        }
        targets.push(linalg::trace(&linalg::mul(sigma.matrix(), &full)).re);
        ops.push(reduced);
    }
    let k = ops.len();
    let mut lambda = vec![0.0; k];
    let mut iterations = 0;
    let mut g = gibbs(&ops, &lambda, r);
    while r > 1 && k > 0 && iterations < MAX_NEWTON_STEPS {
        let rotated: Vec<CMat> = ops.iter().map(|op| linalg::mul(&linalg::mul(&linalg::dagger(&g.vectors), op), &g.vectors)).collect();
        let means: Vec<f64> = rotated.iter().map(|a| (0..r).map(|i| a[(i, i)].re * g.probs[i]).sum()).collect();
        let grad: Vec<f64> = means.iter().zip(&targets).map(|(m, c)| m - c).collect();
        if grad.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) < 1e-12 {
            break;
        }
        iterations += 1;
        let kubo = CMat::from_fn(r, r, |a, b| {
            let (ea, eb) = (g.energies[a], g.energies[b]);
            let v = if (ea - eb).abs() < 1e-10 { 0.5 * (g.probs[a] + g.probs[b]) } else { (g.probs[a] - g.probs[b]) / (ea - eb) };
            C64::new(v, 0.0)
        });
        let weighted: Vec<CMat> = rotated.iter().map(|a| CMat::from_fn(r, r, |i, j| a[(i, j)] * kubo[(i, j)])).collect();
        let hess = CMat::from_fn(k, k, |x, y| {
            let mut acc = ZERO;
            for i in 0..r {
                for j in 0..r {
                    acc += weighted[x][(i, j)] * rotated[y][(j, i)];
                }
            }
            C64::new(acc.re - means[x] * means[y], 0.0)
        });
        let (hv, hvec) = linalg::eigh(&hess);
        let top = hv.last().copied().unwrap_or(0.0).max(1e-300);
        let mut step = vec![0.0; k];
        for (col, &mu) in hv.iter().enumerate() {
            if mu <= 1e-12 * top {
                continue;
            }
            let proj: f64 = (0..k).map(|i| hvec[(i, col)].re * grad[i]).sum::<f64>() / mu;
            for i in 0..k {
                step[i] -= proj * hvec[(i, col)].re;
            }
        }
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        let f0 = dual_value(&g, &lambda, &targets);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = lambda.iter().zip(&step).map(|(l, s)| l + t * s).collect();
            let gt = gibbs(&ops, &trial, r);
            if dual_value(&gt, &trial, &targets) <= f0 + 1e-4 * t * slope.min(0.0) + 1e-15 {
                accepted = Some((trial, gt));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, gt)) => {
                lambda = trial;
                g = gt;
            }
            None => break,
        }
    }
    let on_face = g.state();
    let full = linalg::mul(&linalg::mul(&q, &on_face), &qd);
    let rho_star = DensityMatrix::new(linalg::hermitian_part(&full))?;
    let mut residual = 0.0f64;
    for b in proper_subsets(m) {
        let gap = linalg::sub(rho_star.reduced(&b)?.matrix(), sigma.reduced(&b)?.matrix());
        residual = residual.max(linalg::trace_norm_hermitian(&gap));
    }
    if residual > MAXENT_TOL {
        return Err(Error::NoConvergence { residual, iterations });
    }
    let entropy = entropy_of_spectrum(&g.probs);
    let _ = d;
    Ok(MaxEntSolution { rho_star, entropy, constraint_residual: residual, iterations, support_dim: r })
}

/// `-S(rho|_A) + S(rho*)`.
pub fn ent_measure(rho: &DensityMatrix, a: &[usize]) -> Result<f64> {
    Ok(subset_ent(rho, a)?.ent)
}

fn subset_ent(rho: &DensityMatrix, a: &[usize]) -> Result<SubsetEnt> {
    let restricted = rho.reduced(a)?;
    let sol = max_entropy_completion(&restricted, &(0..restricted.n()).collect::<Vec<_>>())?;
    let entropy = von_neumann_entropy(&restricted);
    Ok(SubsetEnt {
        subset: a.to_vec(),
        ent: sol.entropy - entropy,
        entropy,
        completion_entropy: sol.entropy,
        residual: sol.constraint_residual,
    })
}

/// Sum of `ENT(rho|_B; B)` over subsets with `|B| >= 2`.
pub fn ent_tilde(rho: &DensityMatrix) -> Result<EntReport> {
    let n = rho.n();
    check_register(n, MAX_MAXENT_QUBITS, "entanglement sum")?;
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..n).filter(|&q| mask >> q & 1 == 1).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let per_subset = subsets.iter().map(|b| subset_ent(rho, b)).collect::<Result<Vec<_>>>()?;
    let ent = per_subset.iter().find(|s| s.subset.len() == n).map(|s| s.ent).unwrap_or(0.0);
    let ent_tilde = per_subset.iter().map(|s| s.ent).sum();
    Ok(EntReport { ent, per_subset, ent_tilde })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::rng::Seed;
    use crate::state::UnitaryOp;
    use proptest::prelude::*;

    fn ghz(n: usize) -> DensityMatrix {
        DensityMatrix::zero_state(n).unwrap().evolve(&Circuit::ghz(n).unwrap().segment_unitary(0, n).unwrap()).unwrap()
    }

    fn plus_zero() -> DensityMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        plus.tensor(&DensityMatrix::zero_state(1).unwrap()).unwrap()
    }

    #[test]
    fn product_state_is_its_own_completion() {
        let rho = plus_zero();
        let sol = max_entropy_completion(&rho, &[0, 1]).unwrap();
        assert!(sol.entropy.abs() < 1e-9);
        assert!(linalg::frobenius(&linalg::sub(sol.rho_star.matrix(), rho.matrix())) < 1e-6);
        assert!(ent_measure(&rho, &[0, 1]).unwrap().abs() < 1e-6);
    }

    #[test]
    fn bell_completion_is_maximally_mixed() {
        let sol = max_entropy_completion(&super::super::tests::bell(), &[0, 1]).unwrap();
        assert!((sol.entropy - 2.0).abs() < 1e-9);
        let mm = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(linalg::frobenius(&linalg::sub(sol.rho_star.matrix(), mm.matrix())) < 1e-8);
        assert!((ent_measure(&super::super::tests::bell(), &[0, 1]).unwrap() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn ghz_completion_is_classical_mixture() {
        let sol = max_entropy_completion(&ghz(3), &[0, 1, 2]).unwrap();
        assert!((sol.entropy - 1.0).abs() < 1e-9);
        let mut expect = linalg::zeros(8, 8);
        expect[(0, 0)] = ONE * 0.5;
        expect[(7, 7)] = ONE * 0.5;
        assert!(linalg::frobenius(&linalg::sub(sol.rho_star.matrix(), &expect)) < 1e-8);
        assert!((ent_measure(&ghz(3), &[0, 1, 2]).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ent_tilde_examples() {
        assert!(ent_tilde(&plus_zero()).unwrap().ent_tilde.abs() < 1e-6);
        let r = ent_tilde(&super::super::tests::bell()).unwrap();
        assert_eq!(r.per_subset.len(), 1);
        assert!((r.ent_tilde - 2.0).abs() < 1e-3);
        let r = ent_tilde(&ghz(3)).unwrap();
        assert_eq!(r.per_subset.len(), 4);
        // Pair marginal: S = 1; its completion from I/2 singles is I/4, S = 2.
        let pair_oracle = 2.0 - 1.0;
        assert!((r.ent_tilde - (3.0 * pair_oracle + 1.0)).abs() < 1e-3);
        assert!((r.ent - 1.0).abs() < 1e-3);
        assert!(ent_tilde(&DensityMatrix::zero_state(5).unwrap()).is_err());
    }

    #[test]
    fn single_qubit_completion() {
        let sol = max_entropy_completion(&DensityMatrix::zero_state(1).unwrap(), &[0]).unwrap();
        assert!((sol.entropy - 1.0).abs() < 1e-12);
    }

    fn random_state(n: usize, rank: usize, seed: u64) -> DensityMatrix {
        let mut rng = Seed(seed).rng();
        let g = linalg::ginibre(1 << n, rank, &mut rng);
        let m = linalg::mul(&g, &linalg::dagger(&g));
        let t = linalg::trace(&m).re;
        DensityMatrix::new(linalg::scale(&m, ONE / t)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn completion_matches_marginals_and_raises_entropy(seed in any::<u64>(), n in 2usize..=3, rank in prop::sample::select(vec![1usize, 2, 8])) {
            let rho = random_state(n, rank, seed);
            let sol = max_entropy_completion(&rho, &(0..n).collect::<Vec<_>>()).unwrap();
            prop_assert!(sol.constraint_residual <= MAXENT_TOL);
            prop_assert!(sol.entropy >= von_neumann_entropy(&rho) - 1e-6);
            prop_assert!((von_neumann_entropy(&sol.rho_star) - sol.entropy).abs() < 1e-6);
            prop_assert!(ent_measure(&rho, &(0..n).collect::<Vec<_>>()).unwrap() >= -1e-6);
        }

        #[test]
        fn ent_is_invariant_under_local_unitaries(seed in any::<u64>()) {
            let rho = random_state(3, 2, seed);
            let mut rng = Seed(seed ^ 7).rng();
            let mut u = linalg::identity(1);
            for _ in 0..3 {
                u = linalg::kron(&u, &linalg::haar_unitary(2, &mut rng));
            }
            let moved = rho.evolve(&UnitaryOp::new(u).unwrap()).unwrap();
            let a = ent_measure(&rho, &[0, 1, 2]).unwrap();
            let b = ent_measure(&moved, &[0, 1, 2]).unwrap();
            prop_assert!((a - b).abs() < 1e-5);
        }
    }
}
