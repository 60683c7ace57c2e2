//! Entropies, negativity, separable-distance bounds, the max-entropy
//! completion and emergent entanglement. Entropies are in bits.

mod emergent;
mod maxent;
mod separable;

pub use emergent::{concurrence, DEFAULT_BUDGET, emergent_entanglement, entanglement_of_formation, EmergentReport};
pub use maxent::{ent_measure, ent_tilde, max_entropy_completion, EntReport, MaxEntSolution, SubsetEnt, MAXENT_TOL, MAX_MAXENT_QUBITS};
pub use separable::{sep_distance_estimate, SepDistance, MAX_SEP_QUBITS};

use crate::linalg::{self, CMat};
use crate::state::DensityMatrix;
use crate::{Error, Result};

/// Largest register handled by the entanglement functionals.
pub const MAX_ENT_QUBITS: usize = 5;

/// `-sum lambda log2 lambda`, with `0 log 0 = 0`.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    let s: f64 = values
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * l.log2())
        .sum();
    s.max(0.0)
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub fn reduced_state(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    rho.reduced(keep)
}

/// Sum of the absolute negative eigenvalues of the partial transpose over `part`.
pub fn negativity(rho: &DensityMatrix, part: &[usize]) -> Result<f64> {
    for &q in part {
        if q >= rho.n() {
            return Err(Error::BadIndex { index: q, n: rho.n() });
        }
    }
    Ok(negativity_of(&rho.partial_transpose(part)))
}

pub(crate) fn negativity_of(pt: &CMat) -> f64 {
    linalg::eigvalsh(pt).iter().filter(|&&l| l < 0.0).map(|l| -l).sum()
}

pub(crate) fn check_register(n: usize, cap: usize, what: &'static str) -> Result<()> {
    if n > cap {
        return Err(Error::CapExceeded { what, n, cap });
    }
    Ok(())
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of_spectrum(&[p, 1.0 - p])
}
