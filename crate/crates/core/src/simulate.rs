//! Density-matrix execution of circuits, ideal and noisy.

use serde::{Deserialize, Serialize};

use crate::channel::{check_qubits, QuantumChannel};
use crate::circuit::Circuit;
use crate::linalg::{self, CMat};
use crate::state::DensityMatrix;
use crate::{Caps, Error, Result};

/// A channel acting on `qubits` (local qubit `k` is register qubit `qubits[k]`).
#[derive(Debug, Clone)]
pub struct LocalNoise {
    pub qubits: Vec<usize>,
    pub channel: QuantumChannel,
}

impl LocalNoise {
    pub fn new(qubits: Vec<usize>, channel: QuantumChannel) -> Result<Self> {
        if qubits.len() != channel.n() {
            return Err(Error::DimensionMismatch { expected: qubits.len(), found: channel.n() });
        }
        Ok(LocalNoise { qubits, channel })
    }

    /// The channel on the whole register.
    pub fn global(channel: QuantumChannel) -> Self {
        LocalNoise { qubits: (0..channel.n()).collect(), channel }
    }

    fn is_global(&self, n: usize) -> bool {
        self.qubits.len() == n && self.qubits.iter().enumerate().all(|(i, &q)| i == q)
    }

    /// Dense `n`-qubit channel.
    pub fn extended(&self, n: usize) -> Result<QuantumChannel> {
        if self.is_global(n) {
            return Ok(self.channel.clone());
        }
        self.channel.embed(&self.qubits, n)
    }

    fn apply(&self, rho: &CMat, n: usize) -> CMat {
        if self.is_global(n) {
            return self.channel.apply_matrix(rho);
        }
        let d = rho.nrows();
        let mut out = linalg::zeros(d, d);
        for a in self.channel.kraus() {
            out = &out + &linalg::conjugate_local(rho, a, &self.qubits, n);
        }
        out
    }
}

/// Where noise sits relative to the gates of its cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseOrder {
    /// gates, then gate noise, then storage noise
    #[default]
    AfterGates,
    /// gate noise, then storage noise, then gates
    BeforeGates,
}

#[derive(Debug, Clone, Default)]
pub struct CycleNoise {
    pub gate: Vec<LocalNoise>,
    pub storage: Vec<LocalNoise>,
}

#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    n: usize,
    cycles: Vec<CycleNoise>,
    pub order: NoiseOrder,
}

impl NoiseSchedule {
    pub fn noiseless(n: usize, depth: usize) -> Self {
        NoiseSchedule { n, cycles: vec![CycleNoise::default(); depth], order: NoiseOrder::default() }
    }

    /// One full-register storage channel per cycle.
    pub fn storage(n: usize, channels: Vec<QuantumChannel>) -> Result<Self> {
        let mut ns = Self::noiseless(n, channels.len());
        for (t, e) in channels.into_iter().enumerate() {
            ns.push_storage(t + 1, LocalNoise::global(e))?;
        }
        Ok(ns)
    }

    /// The same storage channel after every cycle.
    pub fn uniform_storage(n: usize, depth: usize, channel: &QuantumChannel) -> Result<Self> {
        Self::storage(n, vec![channel.clone(); depth])
    }

    /// Storage noise on selected cycles only (`None` means noiseless).
    pub fn sparse_storage(n: usize, channels: Vec<Option<QuantumChannel>>) -> Result<Self> {
        let mut ns = Self::noiseless(n, channels.len());
        for (t, e) in channels.into_iter().enumerate() {
            if let Some(e) = e {
                ns.push_storage(t + 1, LocalNoise::global(e))?;
            }
        }
        Ok(ns)
    }

    /// Independent single-qubit channel on every qubit after every cycle.
    pub fn per_qubit_storage(n: usize, depth: usize, single: &QuantumChannel) -> Result<Self> {
        let mut ns = Self::noiseless(n, depth);
        for t in 1..=depth {
            for q in 0..n {
                ns.push_storage(t, LocalNoise::new(vec![q], single.clone())?)?;
            }
        }
        Ok(ns)
    }

    fn check_fragment(&self, t: usize, frag: &LocalNoise) -> Result<()> {
        if t == 0 || t > self.cycles.len() {
            return Err(Error::BadRange(format!("cycle {t} outside 1..={}", self.cycles.len())));
        }
        check_qubits(&frag.qubits, self.n)
    }

    pub fn push_storage(&mut self, t: usize, frag: LocalNoise) -> Result<()> {
        self.check_fragment(t, &frag)?;
        self.cycles[t - 1].storage.push(frag);
        Ok(())
    }

    pub fn push_gate_noise(&mut self, t: usize, frag: LocalNoise) -> Result<()> {
        self.check_fragment(t, &frag)?;
        self.cycles[t - 1].gate.push(frag);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.cycles.len()
    }

    pub fn cycles(&self) -> &[CycleNoise] {
        &self.cycles
    }

    fn fragments(&self, t: usize) -> impl Iterator<Item = &LocalNoise> {
        let c = &self.cycles[t - 1];
        c.gate.iter().chain(c.storage.iter())
    }

    /// Dense channel of all noise in cycle `t`.
    pub fn cycle_channel(&self, t: usize) -> Result<QuantumChannel> {
        let mut e = QuantumChannel::identity(self.n)?;
        for frag in self.fragments(t) {
            e = QuantumChannel::compose(&frag.extended(self.n)?, &e)?;
        }
        Ok(e)
    }
}

/// States after each cycle, starting with the input state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<DensityMatrix>,
    /// Superoperator of the whole noisy run, when accumulated.
    pub superop: Option<CMat>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub accumulate_superop: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { accumulate_superop: true }
    }
}

fn check_memory(n: usize, depth: usize, superop: bool) -> Result<()> {
    let d2 = 1u128 << (2 * n);
    let mut bytes = (depth as u128 + 1) * d2 * 16;
    if superop {
        bytes += d2 * d2 * 16;
    }
    let budget = Caps::current().trajectory_bytes as u128;
    if bytes > budget {
        return Err(Error::CapExceeded { what: "trajectory memory", n, cap: Caps::current().dense_qubits });
    }
    Ok(())
}

fn shifted(qubits: &[usize], n: usize) -> Vec<usize> {
    qubits.iter().chain(qubits.iter()).enumerate().map(|(i, &q)| if i < qubits.len() { q } else { q + n }).collect()
}

struct SuperopAccumulator {
    n: usize,
    s: CMat,
}

impl SuperopAccumulator {
    fn new(n: usize) -> Self {
        SuperopAccumulator { n, s: linalg::identity(1 << (2 * n)) }
    }

    fn gate(&mut self, u: &CMat, qubits: &[usize]) {
        let n = self.n;
        linalg::apply_left_local(&mut self.s, u, qubits, 2 * n);
        let shifted: Vec<usize> = qubits.iter().map(|q| q + n).collect();
        linalg::apply_left_local(&mut self.s, &linalg::conj(u), &shifted, 2 * n);
    }

    fn noise(&mut self, frag: &LocalNoise) -> Result<()> {
        let local = frag.channel.superop()?;
        if frag.is_global(self.n) {
            self.s = local * &self.s;
        } else {
            linalg::apply_left_local(&mut self.s, local, &shifted(&frag.qubits, self.n), 2 * self.n);
        }
        Ok(())
    }
}

fn check_inputs(c: &Circuit, rho0: &DensityMatrix) -> Result<()> {
    if c.n() != rho0.n() {
        return Err(Error::DimensionMismatch { expected: c.n(), found: rho0.n() });
    }
    Caps::check_dense(c.n(), "simulation")
}

/// `rho_t = U_{0,t} rho_0 U_{0,t}^dagger` for `t = 0..=T`.
pub fn simulate_ideal(c: &Circuit, rho0: &DensityMatrix) -> Result<Trajectory> {
    check_inputs(c, rho0)?;
    check_memory(c.n(), c.depth(), false)?;
    let n = c.n();
    let mut rho = rho0.matrix().clone();
    let mut snapshots = vec![rho0.clone()];
    for cycle in c.cycles() {
        for g in cycle {
            rho = linalg::conjugate_local(&rho, &g.matrix(), &g.qubits, n);
        }
        snapshots.push(DensityMatrix::from_matrix_unchecked(rho.clone()));
    }
    Ok(Trajectory { snapshots, superop: None })
}

pub fn simulate_noisy(c: &Circuit, rho0: &DensityMatrix, ns: &NoiseSchedule) -> Result<Trajectory> {
    simulate_noisy_with(c, rho0, ns, SimOptions::default())
}

pub fn simulate_noisy_with(c: &Circuit, rho0: &DensityMatrix, ns: &NoiseSchedule, opts: SimOptions) -> Result<Trajectory> {
    check_inputs(c, rho0)?;
    if ns.n() != c.n() {
        return Err(Error::DimensionMismatch { expected: c.n(), found: ns.n() });
    }
    if ns.depth() != c.depth() {
        return Err(Error::LengthMismatch(c.depth(), ns.depth()));
    }
    let n = c.n();
    let accumulate = opts.accumulate_superop && n <= Caps::current().superop_qubits;
    check_memory(n, c.depth(), accumulate)?;
    let mut acc = accumulate.then(|| SuperopAccumulator::new(n));
    let mut rho = rho0.matrix().clone();
    let mut snapshots = vec![rho0.clone()];
    for (t, cycle) in c.cycles().iter().enumerate() {
        let gates = |rho: &mut CMat, acc: &mut Option<SuperopAccumulator>| {
            for g in cycle {
                let u = g.matrix();
                *rho = linalg::conjugate_local(rho, &u, &g.qubits, n);
                if let Some(a) = acc.as_mut() {
                    a.gate(&u, &g.qubits);
                }
            }
        };
        if ns.order == NoiseOrder::AfterGates {
            gates(&mut rho, &mut acc);
        }
        for frag in ns.fragments(t + 1) {
            rho = frag.apply(&rho, n);
            if let Some(a) = acc.as_mut() {
                a.noise(frag)?;
            }
        }
        if ns.order == NoiseOrder::BeforeGates {
            gates(&mut rho, &mut acc);
        }
        snapshots.push(DensityMatrix::from_matrix_unchecked(rho.clone()));
    }
    Ok(Trajectory { snapshots, superop: acc.map(|a| a.s) })
}

/// `E_overall = S_noisy o Ad_{U_{0,T}}^{-1}`: the accumulated noise in the frame of the intended final state.
pub fn overall_error_channel(traj: &Trajectory, c: &Circuit) -> Result<QuantumChannel> {
    let s = traj.superop.as_ref().ok_or(Error::MissingSuperop)?;
    let u = c.segment_unitary(0, c.depth())?;
    let mut inverse = linalg::identity(s.nrows());
    let ud = linalg::dagger(u.matrix());
    let all: Vec<usize> = (0..c.n()).collect();
    let n = c.n();
    linalg::apply_left_local(&mut inverse, &ud, &all, 2 * n);
    let shifted: Vec<usize> = all.iter().map(|q| q + n).collect();
    linalg::apply_left_local(&mut inverse, &linalg::conj(&ud), &shifted, 2 * n);
    QuantumChannel::from_superop(&(s * &inverse))
}

/// Computational-basis outcome probabilities of a terminal readout.
pub fn readout_distribution(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re.max(0.0)).collect()
}
