//! Entanglement a qubit pair can be left with after the rest of the register
//! is measured in a product projective basis.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binary_entropy, check_register};
use crate::linalg::{self, CMat, C64, ONE};
use crate::rng::Seed;
use crate::state::DensityMatrix;
use crate::{Error, Result};

const GRID: usize = 24;
const MAX_SWEEPS: usize = 8;

/// Restarts used when a caller has no budget of its own.
pub const DEFAULT_BUDGET: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergentReport {
    /// Ebits; a lower bound on the optimum over product projective measurements.
    pub value: f64,
    /// `(theta, phi)` of the best basis on each measured qubit, in register order.
    pub angles: Vec<(f64, f64)>,
    pub measured: Vec<usize>,
    pub restarts: usize,
    pub evaluations: usize,
}

/// Wootters concurrence of a two-qubit state (any positive multiple is normalized first).
pub fn concurrence(rho: &CMat) -> f64 {
    let t = linalg::trace(rho).re;
    if t <= 1e-300 {
        return 0.0;
    }
    let rho = linalg::scale(rho, ONE / t);
    let mut yy = linalg::zeros(4, 4);
    yy[(0, 3)] = -ONE;
    yy[(1, 2)] = ONE;
    yy[(2, 1)] = ONE;
    yy[(3, 0)] = -ONE;
    let flipped = linalg::mul(&linalg::mul(&yy, &linalg::conj(&rho)), &yy);
    let (values, vectors) = linalg::eigh(&rho);
    let root = CMat::from_fn(4, 4, |i, j| {
        (0..4).map(|k| vectors[(i, k)] * vectors[(j, k)].conj() * values[k].max(0.0).sqrt()).sum()
    });
    let m = linalg::mul(&linalg::mul(&root, &flipped), &root);
    let mut l: Vec<f64> = linalg::eigvalsh(&m).iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Entanglement of formation in ebits.
pub fn entanglement_of_formation(rho: &CMat) -> f64 {
    let c = concurrence(rho).min(1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt()))
}

/// Rotation taking the measurement basis to the computational basis.
fn basis_change(theta: f64, phi: f64) -> CMat {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let e = C64::from_polar(1.0, phi);
    let mut v = linalg::zeros(2, 2);
    v[(0, 0)] = ONE * c;
    v[(1, 0)] = e * s;
    v[(0, 1)] = -e.conj() * s;
    v[(1, 1)] = ONE * c;
    linalg::dagger(&v)
}

struct Problem<'a> {
    rho: &'a CMat,
    n: usize,
    i: usize,
    j: usize,
    measured: Vec<usize>,
}

impl Problem<'_> {
    fn value(&self, angles: &[f64]) -> f64 {
        let mut r = self.rho.clone();
        for (k, &q) in self.measured.iter().enumerate() {
            r = linalg::conjugate_local(&r, &basis_change(angles[2 * k], angles[2 * k + 1]), &[q], self.n);
        }
        let bit = |q: usize| self.n - 1 - q;
        let mut total = 0.0;
        for o in 0..1usize << self.measured.len() {
            let mut base = 0usize;
            for (k, &q) in self.measured.iter().enumerate() {
                if o >> (self.measured.len() - 1 - k) & 1 == 1 {
                    base |= 1 << bit(q);
                }
            }
            let idx = |p: usize| base | ((p >> 1) << bit(self.i)) | ((p & 1) << bit(self.j));
            let block = CMat::from_fn(4, 4, |a, b| r[(idx(a), idx(b))]);
            let p = linalg::trace(&block).re;
            if p > 1e-14 {
                total += p * entanglement_of_formation(&block);
            }
        }
        total
    }

    fn coordinate_search<R: Rng>(&self, rng: &mut R, evaluations: &mut usize) -> (f64, Vec<f64>) {
        let dims = 2 * self.measured.len();
        let mut x: Vec<f64> = (0..dims)
            .map(|k| if k % 2 == 0 { rng.random::<f64>() * std::f64::consts::PI } else { rng.random::<f64>() * std::f64::consts::TAU })
            .collect();
        let mut best = self.value(&x);
        *evaluations += 1;
        for _ in 0..MAX_SWEEPS {
            let before = best;
            for k in 0..dims {
                let span = if k % 2 == 0 { std::f64::consts::PI } else { std::f64::consts::TAU };
                for g in 0..=GRID {
                    let mut y = x.clone();
                    y[k] = span * g as f64 / GRID as f64;
                    let v = self.value(&y);
                    *evaluations += 1;
                    if v > best {
                        best = v;
                        x = y;
                    }
                }
                let mut step = span / GRID as f64;
                for _ in 0..12 {
                    step *= 0.5;
                    for dir in [-1.0, 1.0] {
                        let mut y = x.clone();
                        y[k] += dir * step;
                        let v = self.value(&y);
                        *evaluations += 1;
                        if v > best {
                            best = v;
                            x = y;
                        }
                    }
                }
            }
            if best - before < 1e-10 {
                break;
            }
        }
        (best, x)
    }
}

/// Best expected pair entanglement over `budget` restarts of coordinate search.
pub fn emergent_entanglement(rho: &DensityMatrix, i: usize, j: usize, budget: usize, seed: Seed) -> Result<EmergentReport> {
    let n = rho.n();
    check_register(n, super::MAX_ENT_QUBITS, "emergent entanglement")?;
    for q in [i, j] {
        if q >= n {
            return Err(Error::BadIndex { index: q, n });
        }
    }
    if i == j {
        return Err(Error::Invalid("pair qubits must differ".into()));
    }
    let measured: Vec<usize> = (0..n).filter(|&q| q != i && q != j).collect();
    let problem = Problem { rho: rho.matrix(), n, i, j, measured: measured.clone() };
    if measured.is_empty() {
        return Ok(EmergentReport { value: problem.value(&[]), angles: vec![], measured, restarts: 0, evaluations: 1 });
    }
    let restarts = budget.max(1);
    let runs: Vec<(f64, Vec<f64>, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.derive("emergent-restart", r as u64).rng();
            let mut evaluations = 0;
            let (v, x) = problem.coordinate_search(&mut rng, &mut evaluations);
            (v, x, evaluations)
        })
        .collect();
    let mut best = 0usize;
    for (k, run) in runs.iter().enumerate() {
        if run.0 > runs[best].0 {
            best = k;
        }
    }
    let x = &runs[best].1;
    Ok(EmergentReport {
        value: runs[best].0,
        angles: (0..measured.len()).map(|k| (x[2 * k], x[2 * k + 1])).collect(),
        measured,
        restarts,
        evaluations: runs.iter().map(|r| r.2).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use proptest::prelude::*;

    fn ghz(n: usize) -> DensityMatrix {
        DensityMatrix::zero_state(n).unwrap().evolve(&Circuit::ghz(n).unwrap().segment_unitary(0, n).unwrap()).unwrap()
    }

    #[test]
    fn concurrence_oracles() {
        let bell = super::super::tests::bell();
        assert!((concurrence(bell.matrix()) - 1.0).abs() < 1e-9);
        assert!((entanglement_of_formation(bell.matrix()) - 1.0).abs() < 1e-9);
        assert!(concurrence(DensityMatrix::maximally_mixed(2).unwrap().matrix()).abs() < 1e-12);
        // Werner state p |Bell><Bell| + (1-p) I/4 has C = max(0, (3p - 1)/2).
        for p in [0.2, 0.5, 0.8] {
            let w = linalg::add(
                &linalg::scale(bell.matrix(), ONE * p),
                &linalg::scale(DensityMatrix::maximally_mixed(2).unwrap().matrix(), ONE * (1.0 - p)),
            );
            assert!((concurrence(&w) - ((3.0 * p - 1.0) / 2.0).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn emergent_examples() {
        let r = emergent_entanglement(&DensityMatrix::zero_state(3).unwrap(), 0, 1, 2, Seed(1)).unwrap();
        assert!(r.value.abs() < 1e-9);
        let bell0 = super::super::tests::bell().tensor(&DensityMatrix::zero_state(1).unwrap()).unwrap();
        let r = emergent_entanglement(&bell0, 0, 1, 1, Seed(1)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        let problem = Problem { rho: bell0.matrix(), n: 3, i: 0, j: 1, measured: vec![2] };
        for a in [(0.3, 1.0), (2.0, 4.0)] {
            assert!((problem.value(&[a.0, a.1]) - 1.0).abs() < 1e-6);
        }
        let r = emergent_entanglement(&ghz(3), 0, 1, 2, Seed(4)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3);
        let g3 = ghz(3);
        let pg = Problem { rho: g3.matrix(), n: 3, i: 0, j: 1, measured: vec![2] };
        assert!(pg.value(&[0.0, 0.0]).abs() < 1e-9);
        assert!((pg.value(&[std::f64::consts::FRAC_PI_2, 0.0]) - 1.0).abs() < 1e-6);
        assert!(emergent_entanglement(&ghz(3), 1, 1, 1, Seed(0)).is_err());
        assert!(emergent_entanglement(&ghz(3), 0, 3, 1, Seed(0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn more_budget_never_hurts(seed in any::<u64>()) {
            let mut rng = Seed(seed).rng();
            let u = crate::state::UnitaryOp::new(linalg::haar_unitary(8, &mut rng)).unwrap();
            let rho = DensityMatrix::zero_state(3).unwrap().evolve(&u).unwrap();
            let a = emergent_entanglement(&rho, 0, 2, 1, Seed(seed)).unwrap().value;
            let b = emergent_entanglement(&rho, 0, 2, 3, Seed(seed)).unwrap().value;
            prop_assert!(b >= a - 1e-12);
        }
    }
}
