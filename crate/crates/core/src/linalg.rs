//! Dense complex matrix helpers on top of `faer`.
//!
//! Basis ordering: qubit 0 is the leftmost tensor factor, so it owns the most
//! significant bit of a basis index (bit `n - 1 - q` for qubit `q`).

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(d: usize) -> CMat {
    Mat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn conj(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn scale(m: &CMat, s: C64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

/// `a * m * a^dagger`.
pub fn sandwich(a: &CMat, m: &CMat) -> CMat {
    let left = a * m;
    &left * a.adjoint()
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm_l2()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn max_abs_entry(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(m);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigendecomposition failed");
    let values = (0..h.nrows()).map(|i| evd.S()[i].re).collect();
    (values, evd.U().to_owned())
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    hermitian_part(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigenvalue computation failed")
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    eigvalsh(m).iter().map(|l| l.abs()).sum()
}

/// Largest singular value of a Hermitian matrix.
pub fn spectral_norm_hermitian(m: &CMat) -> f64 {
    eigvalsh(m).iter().fold(0.0f64, |acc, l| acc.max(l.abs()))
}

/// `exp(i * theta * h)` for Hermitian `h`.
pub fn expm_i_hermitian(h: &CMat, theta: f64) -> CMat {
    let (values, vectors) = eigh(h);
    expm_from_eigh(&values, &vectors, theta)
}

pub fn expm_from_eigh(values: &[f64], vectors: &CMat, theta: f64) -> CMat {
    let d = values.len();
    let phased = Mat::from_fn(d, d, |i, j| vectors[(i, j)] * C64::from_polar(1.0, theta * values[j]));
    &phased * vectors.adjoint()
}

fn bit_positions(qubits: &[usize], n: usize) -> Vec<usize> {
    qubits.iter().map(|&q| n - 1 - q).collect()
}

/// Full-register index offsets for every local index of an operator on `qubits`.
pub fn local_offsets(qubits: &[usize], n: usize) -> Vec<usize> {
    let k = qubits.len();
    let pos = bit_positions(qubits, n);
    (0..1usize << k)
        .map(|j| {
            (0..k).fold(0usize, |acc, b| {
                if (j >> (k - 1 - b)) & 1 == 1 {
                    acc | (1 << pos[b])
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// Extend a local operator on `qubits` to the full `n`-qubit register.
pub fn embed(op: &CMat, qubits: &[usize], n: usize) -> CMat {
    let d = 1usize << n;
    let offsets = local_offsets(qubits, n);
    let mask = *offsets.last().expect("at least one local index");
    let k = qubits.len();
    let local_index = |full: usize| -> usize {
        let mut j = 0usize;
        for (b, &q) in qubits.iter().enumerate() {
            if (full >> (n - 1 - q)) & 1 == 1 {
                j |= 1 << (k - 1 - b);
            }
        }
        j
    };
    Mat::from_fn(d, d, |r, c| {
        if r & !mask != c & !mask {
            ZERO
        } else {
            op[(local_index(r), local_index(c))]
        }
    })
}

/// In place `m <- (op on qubits) * m`.
pub fn apply_left_local(m: &mut CMat, op: &CMat, qubits: &[usize], n: usize) {
    let offsets = local_offsets(qubits, n);
    let mask = *offsets.last().expect("at least one local index");
    let dk = offsets.len();
    let d = 1usize << n;
    let mut gathered = vec![ZERO; dk];
    for base in (0..d).filter(|b| b & mask == 0) {
        for col in 0..m.ncols() {
            for (l, off) in offsets.iter().enumerate() {
                gathered[l] = m[(base | off, col)];
            }
            for (j, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (l, g) in gathered.iter().enumerate() {
                    acc += op[(j, l)] * g;
                }
                m[(base | off, col)] = acc;
            }
        }
    }
}

/// `op m op^dagger` with `op` acting on `qubits` only.
pub fn conjugate_local(m: &CMat, op: &CMat, qubits: &[usize], n: usize) -> CMat {
    let mut left = m.clone();
    apply_left_local(&mut left, op, qubits, n);
    let mut right = dagger(&left);
    apply_left_local(&mut right, op, qubits, n);
    dagger(&right)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let mut m = zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    Mat::from_fn(d, d, |i, j| {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        q[(i, j)] * phase
    })
}

/// Hermitian matrix from the Gaussian unitary ensemble, `(G + G^dagger) / 2`.
pub fn gue<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    hermitian_part(&ginibre(d, d, rng))
}

/// Random Kraus list `{A_k}` with `sum A_k^dagger A_k = I`, cut from a Haar isometry.
pub fn random_kraus<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<CMat> {
    let g = ginibre(d * count, d, rng);
    let q = g.qr().compute_thin_Q();
    (0..count)
        .map(|k| Mat::from_fn(d, d, |i, j| q[(k * d + i, j)]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embed_matches_kron_for_leading_qubit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = ginibre(2, 2, &mut rng);
        let full = embed(&op, &[0], 2);
        let expect = kron(&op, &identity(2));
        assert!(frobenius(&sub(&full, &expect)) < 1e-14);
        let full = embed(&op, &[1], 2);
        let expect = kron(&identity(2), &op);
        assert!(frobenius(&sub(&full, &expect)) < 1e-14);
    }

    #[test]
    fn local_application_matches_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = ginibre(4, 4, &mut rng);
        let m = ginibre(8, 8, &mut rng);
        for qubits in [[2usize, 0], [0, 1], [1, 2]] {
            let full = embed(&op, &qubits, 3);
            let mut local = m.clone();
            apply_left_local(&mut local, &op, &qubits, 3);
            assert!(frobenius(&sub(&local, &(&full * &m))) < 1e-12);
            let conj = conjugate_local(&m, &op, &qubits, 3);
            assert!(frobenius(&sub(&conj, &sandwich(&full, &m))) < 1e-12);
        }
    }

    #[test]
    fn haar_unitary_is_unitary_and_kraus_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = haar_unitary(8, &mut rng);
        let uu = &u.adjoint() * &u;
        assert!(frobenius(&sub(&uu, &identity(8))) < 1e-12);
        let ks = random_kraus(4, 3, &mut rng);
        let mut acc = zeros(4, 4);
        for k in &ks {
            acc = &acc + &(k.adjoint() * k);
        }
        assert!(frobenius(&sub(&acc, &identity(4))) < 1e-12);
    }

    #[test]
    fn expm_of_pauli_z() {
        let z = Mat::from_fn(2, 2, |i, j| if i == j { if i == 0 { ONE } else { -ONE } } else { ZERO });
        let u = expm_i_hermitian(&z, 0.3);
        assert!((u[(0, 0)] - C64::from_polar(1.0, 0.3)).norm() < 1e-14);
        assert!((u[(1, 1)] - C64::from_polar(1.0, -0.3)).norm() < 1e-14);
    }
}
