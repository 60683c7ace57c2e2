//! Pauli channels `rho -> sum_P m(P) P rho P` stored sparsely.
//!
//! Closed under composition (XOR convolution of masses), convex mixing and
//! Clifford conjugation (pushforward of masses), so Clifford circuits with
//! Pauli noise never need dense matrices.

use std::collections::BTreeMap;

use crate::channel::{check_probability, check_qubits, check_weights, QuantumChannel};
use crate::circuit::Circuit;
use crate::config::TOL;
use crate::linalg::{self, CMat, C64};
use crate::pauli::{PauliLetter, PauliString, MAX_PAULI_QUBITS};
use crate::{Caps, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n: usize,
    masses: BTreeMap<PauliString, f64>,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PAULI_QUBITS {
        return Err(Error::CapExceeded { what: "Pauli string", n, cap: MAX_PAULI_QUBITS });
    }
    Ok(())
}

impl PauliChannel {
    /// Validated mixture: masses nonnegative and summing to one.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (PauliString, f64)>) -> Result<Self> {
        check_n(n)?;
        let mut masses = BTreeMap::new();
        for (p, m) in entries {
            if p.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.n() });
            }
            if !m.is_finite() || m < 0.0 {
                return Err(Error::BadWeights(format!("mass {m} on {p}")));
            }
            if m > 0.0 {
                *masses.entry(p).or_insert(0.0) += m;
            }
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > TOL.distribution_sum {
            return Err(Error::BadWeights(format!("Pauli masses sum to {total}")));
        }
        Ok(PauliChannel { n, masses })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, [(PauliString::identity(n), 1.0)])
    }

    /// Independent single-qubit depolarizing on every qubit of `support`.
    pub fn depolarizing(n: usize, p: f64, support: &[usize]) -> Result<Self> {
        check_n(n)?;
        check_probability(p)?;
        check_qubits(support, n)?;
        let mut masses: Vec<(PauliString, f64)> = vec![(PauliString::identity(n), 1.0)];
        let letters = [
            (PauliLetter::I, 1.0 - 0.75 * p),
            (PauliLetter::X, 0.25 * p),
            (PauliLetter::Y, 0.25 * p),
            (PauliLetter::Z, 0.25 * p),
        ];
        for &q in support {
            let mut next = Vec::with_capacity(masses.len() * 4);
            for (s, m) in &masses {
                for (l, w) in letters {
                    if w > 0.0 {
                        next.push((s.with_letter(q, l), m * w));
                    }
                }
            }
            masses = next;
        }
        Ok(PauliChannel { n, masses: masses.into_iter().collect() })
    }

    /// `(1 - p) rho + p I / 2^n`: mass `p / 4^n` on every string besides the identity share.
    pub fn correlated_depolarizing(n: usize, p: f64) -> Result<Self> {
        check_n(n)?;
        check_probability(p)?;
        if p == 0.0 {
            return Self::identity(n);
        }
        if 2 * n > 24 {
            return Err(Error::CapExceeded { what: "correlated depolarizing table", n, cap: 12 });
        }
        let each = p / (1u64 << (2 * n)) as f64;
        let mut masses: BTreeMap<PauliString, f64> = PauliString::all(n).map(|s| (s, each)).collect();
        *masses.get_mut(&PauliString::identity(n)).expect("identity present") += 1.0 - p;
        Ok(PauliChannel { n, masses })
    }

    /// A single Pauli conjugation `rho -> P rho P`.
    pub fn pauli(p: PauliString) -> Self {
        PauliChannel { n: p.n(), masses: [(p, 1.0)].into_iter().collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &BTreeMap<PauliString, f64> {
        &self.masses
    }

    pub fn mass(&self, p: &PauliString) -> f64 {
        self.masses.get(p).copied().unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    /// `second o first`.
    pub fn compose(second: &PauliChannel, first: &PauliChannel) -> Result<PauliChannel> {
        if second.n != first.n {
            return Err(Error::DimensionMismatch { expected: second.n, found: first.n });
        }
        let mut masses: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (b, mb) in &second.masses {
            for (a, ma) in &first.masses {
                let c = PauliString::from_bits(second.n, a.x_bits() ^ b.x_bits(), a.z_bits() ^ b.z_bits());
                *masses.entry(c).or_insert(0.0) += mb * ma;
            }
        }
        Ok(PauliChannel { n: second.n, masses })
    }

    pub fn mix(channels: &[PauliChannel], weights: &[f64]) -> Result<PauliChannel> {
        check_weights(weights, channels.len())?;
        let n = channels[0].n;
        let mut masses: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (e, &w) in channels.iter().zip(weights) {
            if e.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: e.n });
            }
            if w == 0.0 {
                continue;
            }
            for (p, m) in &e.masses {
                *masses.entry(*p).or_insert(0.0) += w * m;
            }
        }
        Ok(PauliChannel { n, masses })
    }

    /// `U E U^dagger` for a Clifford circuit `U`: masses pushed forward along `P -> U P U^dagger`.
    pub fn conjugate_clifford(&self, circuit: &Circuit) -> Result<PauliChannel> {
        if circuit.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: circuit.n() });
        }
        let mut masses: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (p, m) in &self.masses {
            let image = p.clifford_conjugate(circuit)?.string;
            *masses.entry(image).or_insert(0.0) += m;
        }
        Ok(PauliChannel { n: self.n, masses })
    }

    /// Extend to an `n`-qubit register, local qubit `k` landing on `qubits[k]`.
    pub fn embed(&self, qubits: &[usize], n: usize) -> Result<PauliChannel> {
        if qubits.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: qubits.len() });
        }
        check_n(n)?;
        check_qubits(qubits, n)?;
        let mut masses = BTreeMap::new();
        for (p, m) in &self.masses {
            let mut s = PauliString::identity(n);
            for (k, &q) in qubits.iter().enumerate() {
                s = s.with_letter(q, p.letter(k));
            }
            masses.insert(s, *m);
        }
        Ok(PauliChannel { n, masses })
    }

    /// Dense Kraus form `{sqrt(m) P}`.
    /// `sum_P m_P P rho P` using `(P rho P)_{ab} = (-1)^{z.(a^b)} rho_{a^x, b^x}`.
    /// Only nonzero entries of `rho` are visited, so sparse inputs are cheap.
    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        let d = 1usize << self.n;
        let mut entries = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let v = rho[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        let mut out = linalg::zeros(d, d);
        for (p, &m) in &self.masses {
            let (x, z) = (p.x_bits() as usize, p.z_bits() as usize);
            for &(i, j, v) in &entries {
                let v = v * m;
                if ((z & (i ^ j)).count_ones() & 1) == 1 {
                    out[(i ^ x, j ^ x)] -= v;
                } else {
                    out[(i ^ x, j ^ x)] += v;
                }
            }
        }
        out
    }

    pub fn to_channel(&self) -> Result<QuantumChannel> {
        Caps::check_dense(self.n, "channel")?;
        let cap = Caps::current().kraus_count;
        if self.masses.len() > cap {
            return Err(Error::CapExceeded { what: "Pauli channel Kraus count", n: self.n, cap });
        }
        let kraus = self
            .masses
            .iter()
            .map(|(p, m)| Ok(linalg::scale(&p.matrix()?, C64::new(m.sqrt(), 0.0))))
            .collect::<Result<Vec<_>>>()?;
        QuantumChannel::new(kraus)
    }
}
