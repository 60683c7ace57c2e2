//! Density matrices and unitary operators.

use serde::{Deserialize, Serialize};

use crate::config::TOL;
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::{Caps, Error, Result};

fn qubits_for_dim(d: usize) -> Result<usize> {
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::Invalid(format!("dimension {d} is not a power of two")));
    }
    Ok(d.trailing_zeros() as usize)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct DensityMatrix {
    n: usize,
    matrix: CMat,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    n: usize,
    #[serde(with = "crate::serde_mat")]
    matrix: CMat,
}

impl TryFrom<RawDensity> for DensityMatrix {
    type Error = Error;
    fn try_from(raw: RawDensity) -> Result<Self> {
        let rho = DensityMatrix::new(raw.matrix)?;
        if rho.n != raw.n {
            return Err(Error::DimensionMismatch { expected: raw.n, found: rho.n });
        }
        Ok(rho)
    }
}

impl From<DensityMatrix> for RawDensity {
    fn from(r: DensityMatrix) -> Self {
        RawDensity { n: r.n, matrix: r.matrix }
    }
}

impl DensityMatrix {
    /// Validated state: Hermitian, unit trace, no eigenvalue below `-1e-10`.
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Invalid("density matrix must be square".into()));
        }
        let n = qubits_for_dim(matrix.nrows())?;
        Caps::check_dense(n, "density matrix")?;
        let rho = DensityMatrix { n, matrix };
        rho.check()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMat) -> Self {
        let n = matrix.nrows().trailing_zeros() as usize;
        DensityMatrix { n, matrix }
    }

    pub fn check(&self) -> Result<()> {
        let herm = linalg::hermitian_defect(&self.matrix);
        if herm > TOL.hermitian {
            return Err(Error::Invalid(format!("state not Hermitian (defect {herm:e})")));
        }
        let tr = linalg::trace(&self.matrix);
        if (tr - ONE).norm() > TOL.trace {
            return Err(Error::Invalid(format!("state trace {tr} != 1")));
        }
        let min = linalg::eigvalsh(&self.matrix)[0];
        if min < -TOL.psd {
            return Err(Error::Invalid(format!("state has negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// Computational basis state `|index><index|`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        Caps::check_dense(n, "density matrix")?;
        let d = 1usize << n;
        if index >= d {
            return Err(Error::BadIndex { index, n });
        }
        let mut m = linalg::zeros(d, d);
        m[(index, index)] = ONE;
        Ok(DensityMatrix { n, matrix: m })
    }

    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        Caps::check_dense(n, "density matrix")?;
        let d = 1usize << n;
        Ok(DensityMatrix { n, matrix: linalg::scale(&linalg::identity(d), C64::new(1.0 / d as f64, 0.0)) })
    }

    /// `|psi><psi|` from an amplitude vector; normalized here.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len())?;
        Caps::check_dense(n, "density matrix")?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Invalid("zero state vector".into()));
        }
        let d = amplitudes.len();
        let m = faer::Mat::from_fn(d, d, |i, j| amplitudes[i] * amplitudes[j].conj() / (norm * norm));
        Ok(DensityMatrix { n, matrix: m })
    }

    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += self.matrix[(i, j)].norm_sqr();
            }
        }
        acc
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.purity() >= 1.0 - tol
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        Caps::check_dense(self.n + other.n, "density matrix")?;
        Ok(DensityMatrix { n: self.n + other.n, matrix: linalg::kron(&self.matrix, &other.matrix) })
    }

    /// `U rho U^dagger`.
    pub fn evolve(&self, u: &UnitaryOp) -> Result<Self> {
        if u.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: u.n() });
        }
        Ok(DensityMatrix { n: self.n, matrix: linalg::sandwich(u.matrix(), &self.matrix) })
    }

    /// Partial trace keeping `keep` (ascending qubit order in the result).
    pub fn reduced(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&q| q >= self.n) {
            return Err(Error::BadIndex { index: bad, n: self.n });
        }
        let traced: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let keep_offsets = linalg::local_offsets(&keep, self.n);
        let traced_offsets = if traced.is_empty() {
            vec![0]
        } else {
            linalg::local_offsets(&traced, self.n)
        };
        let dk = keep_offsets.len();
        let m = faer::Mat::from_fn(dk, dk, |i, j| {
            traced_offsets
                .iter()
                .map(|t| self.matrix[(keep_offsets[i] | t, keep_offsets[j] | t)])
                .fold(ZERO, |a, b| a + b)
        });
        Ok(DensityMatrix { n: keep.len(), matrix: m })
    }

    /// Partial transpose over the qubits in `part`.
    pub fn partial_transpose(&self, part: &[usize]) -> CMat {
        let mask = part.iter().fold(0usize, |acc, &q| acc | 1 << (self.n - 1 - q));
        let d = self.dim();
        faer::Mat::from_fn(d, d, |i, j| {
            let swapped = (i ^ j) & mask;
            self.matrix[(i ^ swapped, j ^ swapped)]
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }
}

/// `D(sigma, rho) = 1/2 ||sigma - rho||_tr`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.n() != sigma.n() {
        return Err(Error::DimensionMismatch { expected: rho.n(), found: sigma.n() });
    }
    let diff = linalg::sub(rho.matrix(), sigma.matrix());
    Ok((0.5 * linalg::trace_norm_hermitian(&diff)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct UnitaryOp {
    n: usize,
    matrix: CMat,
}

impl UnitaryOp {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Invalid("unitary must be square".into()));
        }
        let n = qubits_for_dim(matrix.nrows())?;
        Caps::check_dense(n, "unitary")?;
        let uu = &matrix.adjoint() * &matrix;
        let defect = linalg::max_abs_entry(&linalg::sub(&uu, &linalg::identity(1 << n)));
        if defect > TOL.unitary {
            return Err(Error::Invalid(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(UnitaryOp { n, matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMat) -> Self {
        let n = matrix.nrows().trailing_zeros() as usize;
        UnitaryOp { n, matrix }
    }

    pub fn identity(n: usize) -> Result<Self> {
        Caps::check_dense(n, "unitary")?;
        Ok(UnitaryOp { n, matrix: linalg::identity(1 << n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dagger(&self) -> UnitaryOp {
        UnitaryOp { n: self.n, matrix: linalg::dagger(&self.matrix) }
    }

    /// `self * other` (apply `other` first).
    pub fn then_after(&self, other: &UnitaryOp) -> Result<UnitaryOp> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(UnitaryOp { n: self.n, matrix: &self.matrix * &other.matrix })
    }

    /// Apply to a state vector.
    pub fn apply_vector(&self, v: &[C64]) -> Vec<C64> {
        let d = self.matrix.nrows();
        (0..d).map(|i| (0..d).map(|j| self.matrix[(i, j)] * v[j]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus() -> DensityMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap()
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::basis(1, 0).unwrap();
        let one = DensityMatrix::basis(1, 1).unwrap();
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        let expect = (1.0f64 - 0.5).sqrt();
        assert!((trace_distance(&zero, &plus()).unwrap() - expect).abs() < 1e-6);
        assert!(trace_distance(&zero, &DensityMatrix::zero_state(2).unwrap()).is_err());
    }

    #[test]
    fn rejects_invalid_states() {
        let mut m = linalg::identity(2);
        m[(0, 0)] = C64::new(2.0, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let mut m = linalg::scale(&linalg::identity(2), C64::new(0.5, 0.0));
        m[(0, 1)] = C64::new(0.0, 0.3);
        assert!(DensityMatrix::new(m).is_err());
        let mut m = linalg::zeros(2, 2);
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn reduced_state_of_product() {
        let a = plus();
        let b = DensityMatrix::basis(1, 1).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.reduced(&[0]).unwrap();
        let rb = ab.reduced(&[1]).unwrap();
        assert!(linalg::frobenius(&linalg::sub(ra.matrix(), a.matrix())) < 1e-14);
        assert!(linalg::frobenius(&linalg::sub(rb.matrix(), b.matrix())) < 1e-14);
        assert!(matches!(ab.reduced(&[]), Err(Error::EmptySet)));
        assert!(matches!(ab.reduced(&[2]), Err(Error::BadIndex { .. })));
    }

    #[test]
    fn json_round_trip() {
        let rho = plus();
        let text = serde_json::to_string(&rho).unwrap();
        assert!(text.starts_with("{\"n\":1,\"matrix\":[[[0.5"));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert!(linalg::frobenius(&linalg::sub(back.matrix(), rho.matrix())) < 1e-15);
    }
}
