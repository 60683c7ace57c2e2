//! Gate-level circuit representation and the unitaries it defines.
//!
//! Cycles are 1-indexed when addressed by time: cycle `t` takes the register
//! from time `t - 1` to time `t`, and `U_{s,t}` is the product of cycles
//! `s + 1 ..= t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, C64, I, ONE, ZERO};
use crate::state::UnitaryOp;
use crate::{Caps, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    H,
    S,
    T,
    X,
    Y,
    Z,
    RX(f64),
    RY(f64),
    RZ(f64),
    CNOT,
    CZ,
    SWAP,
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::RX(_) => "RX",
            GateKind::RY(_) => "RY",
            GateKind::RZ(_) => "RZ",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
            GateKind::SWAP => "SWAP",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CZ | GateKind::SWAP => 2,
            _ => 1,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::RX(t) | GateKind::RY(t) | GateKind::RZ(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_clifford(&self) -> bool {
        !matches!(self, GateKind::T | GateKind::RX(_) | GateKind::RY(_) | GateKind::RZ(_))
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(self, GateKind::S | GateKind::T | GateKind::Z | GateKind::RZ(_) | GateKind::CZ)
    }

    fn parse(name: &str, theta: Option<f64>) -> Result<GateKind> {
        let needs_angle = |k: fn(f64) -> GateKind| {
            theta
                .map(k)
                .ok_or_else(|| Error::Parse(format!("gate {name} requires \"theta\"")))
        };
        let kind = match name {
            "H" => GateKind::H,
            "S" => GateKind::S,
            "T" => GateKind::T,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "RX" => return needs_angle(GateKind::RX),
            "RY" => return needs_angle(GateKind::RY),
            "RZ" => return needs_angle(GateKind::RZ),
            "CNOT" | "CX" => GateKind::CNOT,
            "CZ" => GateKind::CZ,
            "SWAP" => GateKind::SWAP,
            other => return Err(Error::Parse(format!("unknown gate \"{other}\""))),
        };
        if theta.is_some() {
            return Err(Error::Parse(format!("gate {name} takes no angle")));
        }
        Ok(kind)
    }

    /// Local matrix; for two-qubit gates the first listed qubit is the high bit.
    pub fn matrix(&self) -> CMat {
        let m2 = |a: C64, b: C64, c: C64, d: C64| {
            let mut m = linalg::zeros(2, 2);
            m[(0, 0)] = a;
            m[(0, 1)] = b;
            m[(1, 0)] = c;
            m[(1, 1)] = d;
            m
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            GateKind::H => m2(ONE * h, ONE * h, ONE * h, -ONE * h),
            GateKind::S => m2(ONE, ZERO, ZERO, I),
            GateKind::T => m2(ONE, ZERO, ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)),
            GateKind::X => m2(ZERO, ONE, ONE, ZERO),
            GateKind::Y => m2(ZERO, -I, I, ZERO),
            GateKind::Z => m2(ONE, ZERO, ZERO, -ONE),
            GateKind::RX(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                m2(ONE * c, -I * s, -I * s, ONE * c)
            }
            GateKind::RY(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                m2(ONE * c, -ONE * s, ONE * s, ONE * c)
            }
            GateKind::RZ(t) => m2(C64::from_polar(1.0, -t / 2.0), ZERO, ZERO, C64::from_polar(1.0, t / 2.0)),
            GateKind::CNOT => {
                let mut m = linalg::zeros(4, 4);
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
                m[(2, 3)] = ONE;
                m[(3, 2)] = ONE;
                m
            }
            GateKind::CZ => {
                let mut m = linalg::identity(4);
                m[(3, 3)] = -ONE;
                m
            }
            GateKind::SWAP => {
                let mut m = linalg::zeros(4, 4);
                m[(0, 0)] = ONE;
                m[(1, 2)] = ONE;
                m[(2, 1)] = ONE;
                m[(3, 3)] = ONE;
                m
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGate", into = "RawGate")]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    gate: String,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
}

impl TryFrom<RawGate> for Gate {
    type Error = Error;
    fn try_from(raw: RawGate) -> Result<Gate> {
        Gate::new(GateKind::parse(&raw.gate, raw.theta)?, raw.qubits)
    }
}

impl From<Gate> for RawGate {
    fn from(g: Gate) -> RawGate {
        RawGate { gate: g.kind.name().to_string(), qubits: g.qubits, theta: g.kind.angle() }
    }
}

impl Gate {
    /// Checks arity, distinct qubits and finite angles.
    pub fn new(kind: GateKind, qubits: Vec<usize>) -> Result<Gate> {
        let g = Gate { kind, qubits };
        g.check_shape()?;
        Ok(g)
    }

    pub fn single(kind: GateKind, q: usize) -> Gate {
        Gate { kind, qubits: vec![q] }
    }

    pub fn two(kind: GateKind, a: usize, b: usize) -> Gate {
        Gate { kind, qubits: vec![a, b] }
    }

    pub fn h(q: usize) -> Gate {
        Gate::single(GateKind::H, q)
    }

    pub fn x(q: usize) -> Gate {
        Gate::single(GateKind::X, q)
    }

    pub fn z(q: usize) -> Gate {
        Gate::single(GateKind::Z, q)
    }

    pub fn rx(q: usize, theta: f64) -> Gate {
        Gate::single(GateKind::RX(theta), q)
    }

    pub fn cnot(control: usize, target: usize) -> Gate {
        Gate::two(GateKind::CNOT, control, target)
    }

    pub fn cz(a: usize, b: usize) -> Gate {
        Gate::two(GateKind::CZ, a, b)
    }

    fn check_shape(&self) -> Result<()> {
        if self.qubits.len() != self.kind.arity() {
            return Err(Error::Invalid(format!(
                "{} acts on {} qubit(s), got {}",
                self.kind.name(),
                self.kind.arity(),
                self.qubits.len()
            )));
        }
        if self.qubits.len() == 2 && self.qubits[0] == self.qubits[1] {
            return Err(Error::Invalid(format!("{} repeats qubit {}", self.kind.name(), self.qubits[0])));
        }
        if let Some(t) = self.kind.angle() {
            if !t.is_finite() {
                return Err(Error::Invalid(format!("{} angle is not finite", self.kind.name())));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> CMat {
        self.kind.matrix()
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        match self.kind.angle() {
            Some(t) => write!(f, "{}({t})({})", self.kind.name(), qs.join(",")),
            None => write!(f, "{}({})", self.kind.name(), qs.join(",")),
        }
    }
}

/// Outcome of structural circuit validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitValidation {
    pub passed: bool,
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct Circuit {
    n: usize,
    cycles: Vec<Vec<Gate>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    n: usize,
    cycles: Vec<Vec<Gate>>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;
    fn try_from(raw: RawCircuit) -> Result<Circuit> {
        Circuit::new(raw.n, raw.cycles)
    }
}

impl From<Circuit> for RawCircuit {
    fn from(c: Circuit) -> RawCircuit {
        RawCircuit { n: c.n, cycles: c.cycles }
    }
}

impl Circuit {
    /// Validated circuit; fails with the first structural issue.
    pub fn new(n: usize, cycles: Vec<Vec<Gate>>) -> Result<Circuit> {
        let c = Circuit { n, cycles };
        let report = c.validate();
        if !report.passed {
            return Err(Error::Invalid(report.issues.join("; ")));
        }
        Ok(c)
    }

    /// Circuit without structural checks; pair with [`Circuit::validate`].
    pub fn new_unchecked(n: usize, cycles: Vec<Vec<Gate>>) -> Circuit {
        Circuit { n, cycles }
    }

    /// `n` qubits and `t` empty cycles.
    pub fn idle(n: usize, t: usize) -> Circuit {
        Circuit { n, cycles: vec![Vec::new(); t] }
    }

    /// `[H(0)], [CNOT(0,1)]`.
    pub fn bell() -> Circuit {
        Circuit { n: 2, cycles: vec![vec![Gate::h(0)], vec![Gate::cnot(0, 1)]] }
    }

    /// `[H(0)], [CNOT(0,1)], ..., [CNOT(n-2,n-1)]`; `n` cycles.
    pub fn ghz(n: usize) -> Result<Circuit> {
        if n == 0 {
            return Err(Error::Invalid("GHZ circuit needs at least one qubit".into()));
        }
        let mut cycles = vec![vec![Gate::h(0)]];
        cycles.extend((1..n).map(|q| vec![Gate::cnot(q - 1, q)]));
        Ok(Circuit { n, cycles })
    }

    /// One cycle of `RX(theta)` on every qubit.
    pub fn product_rx(n: usize, theta: f64) -> Result<Circuit> {
        Circuit::new(n, vec![(0..n).map(|q| Gate::rx(q, theta)).collect()])
    }

    pub fn validate(&self) -> CircuitValidation {
        let mut issues = Vec::new();
        if self.n == 0 {
            issues.push("circuit has no qubits".to_string());
        }
        for (t, cycle) in self.cycles.iter().enumerate() {
            let mut used = vec![false; self.n];
            for g in cycle {
                if let Err(e) = g.check_shape() {
                    issues.push(format!("cycle {}: {e}", t + 1));
                }
                for &q in &g.qubits {
                    if q >= self.n {
                        issues.push(format!("cycle {}: {g} index {q} out of range for n={}", t + 1, self.n));
                    } else if used[q] {
                        issues.push(format!("cycle {}: qubit {q} reused by {g}", t + 1));
                    } else {
                        used[q] = true;
                    }
                }
            }
        }
        CircuitValidation { passed: issues.is_empty(), issues }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of cycles `T`.
    pub fn depth(&self) -> usize {
        self.cycles.len()
    }

    pub fn cycles(&self) -> &[Vec<Gate>] {
        &self.cycles
    }

    /// Gates of cycle `t` (1-indexed).
    pub fn cycle(&self, t: usize) -> Result<&[Gate]> {
        if t == 0 || t > self.depth() {
            return Err(Error::BadRange(format!("cycle {t} outside 1..={}", self.depth())));
        }
        Ok(&self.cycles[t - 1])
    }

    /// All gates in execution order.
    pub fn gates(&self) -> impl Iterator<Item = &Gate> + '_ {
        self.cycles.iter().flatten()
    }

    pub fn is_clifford(&self) -> bool {
        self.gates().all(|g| g.kind.is_clifford())
    }

    pub fn is_diagonal(&self) -> bool {
        self.gates().all(|g| g.kind.is_diagonal())
    }

    fn check_range(&self, s: usize, t: usize) -> Result<()> {
        if s > t || t > self.depth() {
            return Err(Error::BadRange(format!(
                "segment ({s}, {t}) requires 0 <= s <= t <= {}",
                self.depth()
            )));
        }
        Ok(())
    }

    /// Cycles `s + 1 ..= t` as a circuit of their own.
    pub fn segment(&self, s: usize, t: usize) -> Result<Circuit> {
        self.check_range(s, t)?;
        Ok(Circuit { n: self.n, cycles: self.cycles[s..t].to_vec() })
    }

    pub fn cycle_unitary(&self, t: usize) -> Result<UnitaryOp> {
        if t == 0 || t > self.depth() {
            return Err(Error::BadRange(format!("cycle {t} outside 1..={}", self.depth())));
        }
        self.segment_unitary(t - 1, t)
    }

    /// `U_{s,t}`, the product of cycles `s + 1 ..= t`; identity when `s == t`.
    pub fn segment_unitary(&self, s: usize, t: usize) -> Result<UnitaryOp> {
        self.check_range(s, t)?;
        Caps::check_dense(self.n, "segment unitary")?;
        let mut u = linalg::identity(1 << self.n);
        for g in self.cycles[s..t].iter().flatten() {
            linalg::apply_left_local(&mut u, &g.matrix(), &g.qubits, self.n);
        }
        Ok(UnitaryOp::from_matrix_unchecked(u))
    }

    /// `U_{s,t}` for every `0 <= s <= t`, indexed `[s][t - s]`.
    pub fn all_segment_unitaries(&self) -> Result<Vec<Vec<UnitaryOp>>> {
        let big_t = self.depth();
        let cycle_u: Vec<UnitaryOp> = (1..=big_t).map(|t| self.cycle_unitary(t)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(big_t + 1);
        for s in 0..=big_t {
            let mut row = vec![UnitaryOp::identity(self.n)?];
            for u in &cycle_u[s..] {
                let next = u.then_after(row.last().expect("row starts with identity"))?;
                row.push(next);
            }
            out.push(row);
        }
        Ok(out)
    }
}
