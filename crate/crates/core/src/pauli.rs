//! Pauli strings in the binary symplectic representation.
//!
//! A string on `n` qubits is stored as two bit words `x` and `z`. Qubit `q`
//! lives at bit `n - 1 - q`, which is also its bit in a dense basis index, so
//! `X^x` flips exactly the index bits set in `x`. Per qubit the letter is
//! I = (0,0), X = (1,0), Z = (0,1), Y = (1,1), and as an operator the string is
//! `i^{|x & z|} X^x Z^z`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::{Circuit, GateKind};
use crate::linalg::{CMat, C64, ZERO};
use crate::{Caps, Error, Result};

pub const MAX_PAULI_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub fn is_identity(self) -> bool {
        self == PauliLetter::I
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliLetter::I,
            (true, false) => PauliLetter::X,
            (true, true) => PauliLetter::Y,
            (false, true) => PauliLetter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::I => (false, false),
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// Fourth root of unity, stored as a power of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const PLUS_ONE: Phase = Phase(0);
    pub const PLUS_I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(power: i64) -> Phase {
        Phase(power.rem_euclid(4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> C64 {
        match self.0 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        })
    }
}

/// Multi-index over {I, X, Y, Z}. Ordered by `(x, z)`, matching the dense index `x * 2^n + z`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: u8,
    x: u32,
    z: u32,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_PAULI_QUBITS, "qubit count {n} out of range");
        PauliString { n: n as u8, x: 0, z: 0 }
    }

    pub fn from_bits(n: usize, x: u32, z: u32) -> Self {
        assert!(n >= 1 && n <= MAX_PAULI_QUBITS, "qubit count {n} out of range");
        let mask = Self::mask_for(n);
        PauliString { n: n as u8, x: x & mask, z: z & mask }
    }

    /// String with one non-identity letter.
    pub fn single(n: usize, qubit: usize, letter: PauliLetter) -> Self {
        PauliString::identity(n).with_letter(qubit, letter)
    }

    /// Inverse of [`PauliString::dense_index`].
    pub fn from_dense_index(n: usize, index: usize) -> Self {
        let d = 1usize << n;
        PauliString::from_bits(n, (index / d) as u32, (index % d) as u32)
    }

    fn mask_for(n: usize) -> u32 {
        if n >= 32 { u32::MAX } else { (1u32 << n) - 1 }
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn x_bits(&self) -> u32 {
        self.x
    }

    pub fn z_bits(&self) -> u32 {
        self.z
    }

    pub fn dense_index(&self) -> usize {
        ((self.x as usize) << self.n) | self.z as usize
    }

    fn pos(&self, qubit: usize) -> u32 {
        (self.n as usize - 1 - qubit) as u32
    }

    pub fn letter(&self, qubit: usize) -> PauliLetter {
        let p = self.pos(qubit);
        PauliLetter::from_bits((self.x >> p) & 1 == 1, (self.z >> p) & 1 == 1)
    }

    pub fn with_letter(mut self, qubit: usize, letter: PauliLetter) -> Self {
        assert!(qubit < self.n(), "qubit {qubit} out of range");
        let p = self.pos(qubit);
        let (xb, zb) = letter.bits();
        self.x = (self.x & !(1 << p)) | ((xb as u32) << p);
        self.z = (self.z & !(1 << p)) | ((zb as u32) << p);
        self
    }

    pub fn letters(&self) -> impl Iterator<Item = PauliLetter> + '_ {
        (0..self.n()).map(move |q| self.letter(q))
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Replace I by 0 and every other letter by 1.
    pub fn coarse(&self) -> BitString {
        BitString { n: self.n, bits: self.x | self.z }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&q| self.letter(q) != PauliLetter::I).collect()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Dense `2^n x 2^n` matrix, the tensor product of the letters in qubit order.
    pub fn matrix(&self) -> Result<CMat> {
        Caps::check_dense(self.n(), "pauli_matrix")?;
        let d = 1usize << self.n;
        let phase = Phase::from_power((self.x & self.z).count_ones() as i64).to_complex();
        let mut m = crate::linalg::zeros(d, d);
        for k in 0..d {
            let sign = if (self.z as usize & k).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(k ^ self.x as usize, k)] = phase * sign;
        }
        Ok(m)
    }

    /// Product `self * other` with its exact phase.
    pub fn multiply(&self, other: &PauliString) -> Result<SignedPauli> {
        if self.n != other.n {
            return Err(Error::LengthMismatch(self.n(), other.n()));
        }
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let power = (self.x & self.z).count_ones() as i64 + (other.x & other.z).count_ones() as i64
            - (x & z).count_ones() as i64
            + 2 * (self.z & other.x).count_ones() as i64;
        Ok(SignedPauli {
            phase: Phase::from_power(power),
            string: PauliString { n: self.n, x, z },
        })
    }

    /// `U p U^dagger` for a Clifford circuit `U`, by symplectic updates gate by gate.
    pub fn clifford_conjugate(&self, circuit: &Circuit) -> Result<SignedPauli> {
        if circuit.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: circuit.n(), found: self.n() });
        }
        // operator = i^e X^x Z^z
        let n = self.n();
        let (mut x, mut z) = (self.x, self.z);
        let mut e: i64 = (self.x & self.z).count_ones() as i64;
        let bit = |v: u32, p: u32| (v >> p) & 1;
        for gate in circuit.gates() {
            let pos = |k: usize| (n - 1 - gate.qubits[k]) as u32;
            match gate.kind {
                GateKind::H => {
                    let p = pos(0);
                    let (a, b) = (bit(x, p), bit(z, p));
                    e += 2 * (a & b) as i64;
                    x = (x & !(1 << p)) | (b << p);
                    z = (z & !(1 << p)) | (a << p);
                }
                GateKind::S => {
                    let p = pos(0);
                    let a = bit(x, p);
                    e += a as i64;
                    z ^= a << p;
                }
                GateKind::X => e += 2 * bit(z, pos(0)) as i64,
                GateKind::Z => e += 2 * bit(x, pos(0)) as i64,
                GateKind::Y => {
                    let p = pos(0);
                    e += 2 * (bit(x, p) ^ bit(z, p)) as i64;
                }
                GateKind::CNOT => {
                    let (c, t) = (pos(0), pos(1));
                    x ^= bit(x, c) << t;
                    z ^= bit(z, t) << c;
                }
                GateKind::CZ => {
                    let (a, b) = (pos(0), pos(1));
                    e += 2 * (bit(x, a) & bit(x, b)) as i64;
                    z ^= bit(x, b) << a;
                    z ^= bit(x, a) << b;
                }
                GateKind::SWAP => {
                    let (a, b) = (pos(0), pos(1));
                    for v in [&mut x, &mut z] {
                        let (ba, bb) = (bit(*v, a), bit(*v, b));
                        *v = (*v & !(1 << a) & !(1 << b)) | (ba << b) | (bb << a);
                    }
                }
                GateKind::T | GateKind::RX(_) | GateKind::RY(_) | GateKind::RZ(_) => {
                    return Err(Error::NotClifford(gate.kind.name().to_string()));
                }
            }
        }
        let string = PauliString { n: self.n, x, z };
        Ok(SignedPauli {
            phase: Phase::from_power(e - (x & z).count_ones() as i64),
            string,
        })
    }

    /// Every string on `n` qubits in dense index order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        let count = 1usize << (2 * n);
        (0..count).map(move |i| PauliString::from_dense_index(n, i))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n == 0 || n > MAX_PAULI_QUBITS {
            return Err(Error::Parse(format!("pauli string length {n} out of range")));
        }
        let mut p = PauliString::identity(n);
        for (q, c) in s.chars().enumerate() {
            let letter = match c {
                'I' => PauliLetter::I,
                'X' => PauliLetter::X,
                'Y' => PauliLetter::Y,
                'Z' => PauliLetter::Z,
                other => return Err(Error::Parse(format!("invalid pauli letter {other:?}"))),
            };
            p = p.with_letter(q, letter);
        }
        Ok(p)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedPauli {
    pub phase: Phase,
    pub string: PauliString,
}

impl SignedPauli {
    pub fn matrix(&self) -> Result<CMat> {
        Ok(crate::linalg::scale(&self.string.matrix()?, self.phase.to_complex()))
    }
}

impl fmt::Display for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.phase, self.string)
    }
}

/// Coarse syndrome: bit set where the Pauli letter is not I. Same bit layout as [`PauliString`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    n: u8,
    bits: u32,
}

impl BitString {
    pub fn new(n: usize, bits: u32) -> Self {
        assert!(n >= 1 && n <= MAX_PAULI_QUBITS, "qubit count {n} out of range");
        BitString { n: n as u8, bits: bits & PauliString::mask_for(n) }
    }

    /// Bit string with ones exactly on `qubits`.
    pub fn from_qubits(n: usize, qubits: &[usize]) -> Self {
        let bits = qubits.iter().fold(0u32, |acc, &q| acc | 1 << (n - 1 - q));
        BitString::new(n, bits)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn get(&self, qubit: usize) -> bool {
        (self.bits >> (self.n as usize - 1 - qubit)) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n() {
            f.write_str(if self.get(q) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.len();
        if n == 0 || n > MAX_PAULI_QUBITS {
            return Err(Error::Parse(format!("bit string length {n} out of range")));
        }
        let mut bits = 0u32;
        for c in s.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                other => return Err(Error::Parse(format!("invalid bit {other:?}"))),
            }
        }
        Ok(BitString::new(n, bits))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn fwht(buf: &mut [C64]) {
    let mut h = 1;
    while h < buf.len() {
        for start in (0..buf.len()).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (buf[i], buf[i + h]);
                buf[i] = a + b;
                buf[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Add `weight * |Tr(P A)|^2 / 4^n` to `out[P.dense_index()]` for every string `P`.
///
/// Uses `Tr(X^x Z^z A) = sum_k (-1)^{z.k} A[k, k^x]` and a Walsh-Hadamard transform
/// over `k` for each `x`, so one operator costs `O(4^n n)`.
pub fn accumulate_pauli_masses(a: &CMat, n: usize, weight: f64, out: &mut [f64]) {
    let d = 1usize << n;
    debug_assert_eq!(out.len(), d * d);
    let norm = weight / (d as f64 * d as f64);
    let mut buf = vec![ZERO; d];
    for x in 0..d {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = a[(k, k ^ x)];
        }
        fwht(&mut buf);
        let row = &mut out[x * d..(x + 1) * d];
        for (z, v) in buf.iter().enumerate() {
            row[z] += v.norm_sqr() * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, Gate};
    use crate::linalg::{frobenius, mul, sandwich, sub, trace};

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn weights_and_coarse() {
        assert_eq!(ps("III").weight(), 0);
        assert_eq!(ps("XIZ").weight(), 2);
        assert_eq!(ps("YYY").weight(), 3);
        assert_eq!(ps("III").coarse().to_string(), "000");
        assert_eq!(ps("XIZ").coarse().to_string(), "101");
        assert_eq!(ps("IYI").coarse().to_string(), "010");
        for p in PauliString::all(3) {
            assert_eq!(p.weight(), p.coarse().count_ones());
        }
    }

    #[test]
    fn text_round_trip() {
        for p in PauliString::all(2) {
            assert_eq!(p.to_string().parse::<PauliString>().unwrap(), p);
        }
        assert!("XQ".parse::<PauliString>().is_err());
        assert_eq!(serde_json::to_string(&ps("XIZ")).unwrap(), "\"XIZ\"");
    }

    #[test]
    fn single_qubit_matrices() {
        let x = ps("X").matrix().unwrap();
        assert_eq!(x[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(x[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(x[(0, 0)], ZERO);
        let z = ps("Z").matrix().unwrap();
        assert_eq!(z[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(z[(1, 1)], C64::new(-1.0, 0.0));
        let y = ps("Y").matrix().unwrap();
        assert_eq!(y[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(y[(1, 0)], C64::new(0.0, 1.0));
    }

    #[test]
    fn two_qubit_matrix_is_kronecker_product() {
        let xz = ps("XZ").matrix().unwrap();
        let expect = crate::linalg::kron(&ps("X").matrix().unwrap(), &ps("Z").matrix().unwrap());
        assert!(frobenius(&sub(&xz, &expect)) < 1e-15);
        assert_eq!(xz[(0, 2)], C64::new(1.0, 0.0));
        assert_eq!(xz[(1, 3)], C64::new(-1.0, 0.0));
    }

    #[test]
    fn multiplication_table() {
        let r = ps("X").multiply(&ps("X")).unwrap();
        assert_eq!((r.phase, r.string), (Phase::PLUS_ONE, ps("I")));
        let r = ps("X").multiply(&ps("Z")).unwrap();
        assert_eq!((r.phase, r.string), (Phase::MINUS_I, ps("Y")));
        let r = ps("XI").multiply(&ps("IZ")).unwrap();
        assert_eq!((r.phase, r.string), (Phase::PLUS_ONE, ps("XZ")));
        assert!(matches!(ps("X").multiply(&ps("XX")), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn multiplication_matches_matrices_exhaustively() {
        for n in 1..=3 {
            for a in PauliString::all(n) {
                let ma = a.matrix().unwrap();
                for b in PauliString::all(n) {
                    let prod = a.multiply(&b).unwrap();
                    let lhs = prod.matrix().unwrap();
                    let rhs = mul(&ma, &b.matrix().unwrap());
                    assert!(frobenius(&sub(&lhs, &rhs)) < 1e-12, "{a} * {b}");
                }
            }
        }
    }

    #[test]
    fn trace_orthogonality_exhaustive() {
        for n in 1..=3 {
            let d = (1usize << n) as f64;
            for a in PauliString::all(n) {
                let ma = a.matrix().unwrap();
                for b in PauliString::all(n) {
                    let t = trace(&mul(&ma, &b.matrix().unwrap()));
                    let expect = if a == b { d } else { 0.0 };
                    assert!((t - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    fn ghz3() -> Circuit {
        Circuit::new(
            3,
            vec![
                vec![Gate::h(0)],
                vec![Gate::cnot(0, 1)],
                vec![Gate::cnot(1, 2)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn ghz_conjugation_examples() {
        let c = ghz3();
        let r = ps("ZII").clifford_conjugate(&c).unwrap();
        assert_eq!((r.phase, r.string), (Phase::PLUS_ONE, ps("XXX")));
        assert_eq!(r.string.weight(), 3);
        let r = ps("XII").clifford_conjugate(&c).unwrap();
        assert_eq!((r.phase, r.string), (Phase::PLUS_ONE, ps("ZII")));
        let empty = Circuit::new(3, vec![]).unwrap();
        for p in PauliString::all(3) {
            let r = p.clifford_conjugate(&empty).unwrap();
            assert_eq!((r.phase, r.string), (Phase::PLUS_ONE, p));
        }
    }

    #[test]
    fn non_clifford_rejected() {
        let c = Circuit::new(1, vec![vec![Gate::single(GateKind::T, 0)]]).unwrap();
        assert!(matches!(ps("X").clifford_conjugate(&c), Err(Error::NotClifford(_))));
    }

    #[test]
    fn clifford_conjugation_matches_dense_exhaustively() {
        use GateKind::*;
        let one = [H, S, X, Y, Z];
        for n in 1..=3usize {
            let mut gates = Vec::new();
            for q in 0..n {
                for k in one {
                    gates.push(Gate::single(k, q));
                }
            }
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        for k in [CNOT, CZ, SWAP] {
                            gates.push(Gate::two(k, a, b));
                        }
                    }
                }
            }
            for g in gates {
                let c = Circuit::new(n, vec![vec![g.clone()]]).unwrap();
                let u = c.segment_unitary(0, 1).unwrap();
                for p in PauliString::all(n) {
                    let fast = p.clifford_conjugate(&c).unwrap().matrix().unwrap();
                    let dense = sandwich(u.matrix(), &p.matrix().unwrap());
                    assert!(frobenius(&sub(&fast, &dense)) < 1e-12, "{g:?} on {p}");
                }
            }
            // A longer mixed sequence exercises sign bookkeeping across gates.
            let mut cycles = Vec::new();
            for q in 0..n {
                cycles.push(vec![Gate::h(q)]);
                cycles.push(vec![Gate::single(S, q)]);
            }
            if n > 1 {
                cycles.push(vec![Gate::cnot(0, n - 1)]);
                cycles.push(vec![Gate::two(CZ, n - 1, 0)]);
                cycles.push(vec![Gate::single(Y, 0)]);
            }
            let c = Circuit::new(n, cycles).unwrap();
            let u = c.segment_unitary(0, c.depth()).unwrap();
            for p in PauliString::all(n) {
                let fast = p.clifford_conjugate(&c).unwrap().matrix().unwrap();
                let dense = sandwich(u.matrix(), &p.matrix().unwrap());
                assert!(frobenius(&sub(&fast, &dense)) < 1e-12, "sequence on {p}");
            }
        }
    }

    #[test]
    fn fast_masses_match_direct_traces() {
        let cnot = Circuit::bell().segment_unitary(1, 2).unwrap();
        let mut out = vec![0.0; 16];
        accumulate_pauli_masses(cnot.matrix(), 2, 1.0, &mut out);
        for p in PauliString::all(2) {
            let t = trace(&mul(&p.matrix().unwrap(), cnot.matrix()));
            assert!((out[p.dense_index()] - t.norm_sqr() / 16.0).abs() < 1e-14);
        }
        for s in ["II", "IX", "ZI", "ZX"] {
            assert!((out[ps(s).dense_index()] - 0.25).abs() < 1e-14);
        }
    }
}
