//! Validation tolerances and size caps shared by every module.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

/// Numerical tolerances used by all validity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub psd: f64,
    pub unitary: f64,
    pub trace_preservation: f64,
    pub choi_psd: f64,
    pub weights_sum: f64,
    pub distribution_sum: f64,
    /// Kraus operators with Frobenius norm below this are dropped.
    pub kraus_drop: f64,
}

pub const TOL: Tolerances = Tolerances {
    hermitian: 1e-10,
    trace: 1e-10,
    psd: 1e-10,
    unitary: 1e-10,
    trace_preservation: 1e-9,
    choi_psd: 1e-9,
    weights_sum: 1e-12,
    distribution_sum: 1e-9,
    kraus_drop: 1e-14,
};

/// Size limits for dense representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Largest qubit count for dense state and operator matrices.
    pub dense_qubits: usize,
    /// Largest qubit count for full 4^n x 4^n superoperators.
    pub superop_qubits: usize,
    /// Largest Kraus list kept before re-orthogonalizing through the Choi matrix.
    pub kraus_count: usize,
    /// Memory budget for stored trajectory snapshots.
    pub trajectory_bytes: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            dense_qubits: 12,
            superop_qubits: 6,
            kraus_count: 4096,
            trajectory_bytes: 1 << 30,
        }
    }
}

static CAPS: RwLock<Option<Caps>> = RwLock::new(None);

impl Caps {
    /// Caps currently in force for this process.
    pub fn current() -> Caps {
        CAPS.read().ok().and_then(|c| *c).unwrap_or_default()
    }

    /// Replace the process-wide caps. Used by the experiment runner.
    pub fn install(caps: Caps) {
        if let Ok(mut slot) = CAPS.write() {
            *slot = Some(caps);
        }
    }

    pub(crate) fn check_dense(n: usize, what: &'static str) -> crate::Result<()> {
        let cap = Caps::current().dense_qubits;
        if n > cap {
            return Err(crate::Error::CapExceeded { what, n, cap });
        }
        Ok(())
    }

    pub(crate) fn check_superop(n: usize, what: &'static str) -> crate::Result<()> {
        let cap = Caps::current().superop_qubits;
        if n > cap {
            return Err(crate::Error::CapExceeded { what, n, cap });
        }
        Ok(())
    }
}
