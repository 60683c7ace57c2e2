//! Two-sided bounds on the trace distance to the separable set.
//!
//! Lower: `N(rho) / min(d_A, d_B)`, since `||X^Gamma||_1 <= min(d_A, d_B) ||X||_1`
//! and the partial transpose of a separable state is PSD.
//! Upper: the best explicit separable state found, drawn from closed-form
//! candidates, PPT shrinking (exact when `d_A d_B <= 6`) and a (1+1)
//! evolution strategy over mixtures of at most 16 product pure states.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_register, negativity_of};
use crate::linalg::{self, CMat, C64, ONE};
use crate::rng::Seed;
use crate::state::DensityMatrix;
use crate::{Error, Result};

pub const MAX_SEP_QUBITS: usize = 4;
pub const MAX_PRODUCT_TERMS: usize = 16;
const RESTARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SepDistance {
    pub lower: f64,
    pub upper: f64,
    pub evaluations: usize,
    /// False when the search was still improving as the budget ran out.
    pub converged: bool,
}

struct Layout {
    m: usize,
    pos_a: Vec<usize>,
    pos_b: Vec<usize>,
}

impl Layout {
    fn da(&self) -> usize {
        1 << self.pos_a.len()
    }

    fn db(&self) -> usize {
        1 << self.pos_b.len()
    }

    fn sub_index(&self, i: usize, pos: &[usize]) -> usize {
        pos.iter().fold(0, |acc, &q| (acc << 1) | (i >> (self.m - 1 - q) & 1))
    }

    fn product(&self, a: &[C64], b: &[C64]) -> Vec<C64> {
        (0..1usize << self.m)
            .map(|i| a[self.sub_index(i, &self.pos_a)] * b[self.sub_index(i, &self.pos_b)])
            .collect()
    }
}

/// Mixture of product pure states; vectors are normalized on use.
#[derive(Clone)]
struct Mixture {
    logits: Vec<f64>,
    a: Vec<Vec<C64>>,
    b: Vec<Vec<C64>>,
}

fn normalize(v: &[C64]) -> Vec<C64> {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-300 {
        let mut e = vec![C64::new(0.0, 0.0); v.len()];
        e[0] = ONE;
        return e;
    }
    v.iter().map(|x| x / norm).collect()
}

impl Mixture {
    fn state(&self, layout: &Layout) -> CMat {
        let d = 1 << layout.m;
        let top = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut rho = linalg::zeros(d, d);
        for k in 0..w.len() {
            let p = w[k] / total;
            if p < 1e-300 {
                continue;
            }
            let v = layout.product(&normalize(&self.a[k]), &normalize(&self.b[k]));
            for i in 0..d {
                for j in 0..d {
                    rho[(i, j)] += v[i] * v[j].conj() * p;
                }
            }
        }
        rho
    }

    fn mutate<R: Rng>(&self, sigma: f64, rng: &mut R) -> Mixture {
        let mut jitter = |x: C64| x + C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * sigma;
        let a = self.a.iter().map(|v| v.iter().map(|&x| jitter(x)).collect()).collect();
        let b = self.b.iter().map(|v| v.iter().map(|&x| jitter(x)).collect()).collect();
        let logits = self.logits.iter().map(|l| l + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        Mixture { logits, a, b }
    }

    fn random<R: Rng>(layout: &Layout, k: usize, rng: &mut R) -> Mixture {
        let mut vec = |d: usize| (0..d).map(|_| linalg::complex_normal(rng)).collect::<Vec<_>>();
        let a = (0..k).map(|_| vec(layout.da())).collect();
        let b = (0..k).map(|_| vec(layout.db())).collect();
        Mixture { logits: vec![0.0; k], a, b }
    }
}

fn basis(d: usize, i: usize) -> Vec<C64> {
    let mut e = vec![C64::new(0.0, 0.0); d];
    e[i] = ONE;
    e
}

fn eigen_vectors(m: &CMat) -> Vec<(f64, Vec<C64>)> {
    let (values, vectors) = linalg::eigh(m);
    (0..values.len())
        .map(|k| (values[k].max(0.0), (0..values.len()).map(|i| vectors[(i, k)]).collect()))
        .collect()
}

fn candidates(rho: &DensityMatrix, layout: &Layout) -> Result<Vec<Mixture>> {
    let (da, db) = (layout.da(), layout.db());
    let mut out = Vec::new();
    // Computational-basis dephasing.
    let diag = rho.matrix();
    let mut logits = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..1usize << layout.m {
        logits.push(diag[(i, i)].re.max(1e-300).ln());
        a.push(basis(da, layout.sub_index(i, &layout.pos_a)));
        b.push(basis(db, layout.sub_index(i, &layout.pos_b)));
    }
    out.push(Mixture { logits, a, b });
    // Product of marginals.
    let ea = eigen_vectors(rho.reduced(&layout.pos_a)?.matrix());
    let eb = eigen_vectors(rho.reduced(&layout.pos_b)?.matrix());
    let mut mix = Mixture { logits: Vec::new(), a: Vec::new(), b: Vec::new() };
    for (pa, va) in &ea {
        for (pb, vb) in &eb {
            mix.logits.push((pa * pb).max(1e-300).ln());
            mix.a.push(va.clone());
            mix.b.push(vb.clone());
        }
    }
    out.push(mix);
    Ok(out)
}

fn distance(rho: &CMat, sigma: &CMat) -> f64 {
    0.5 * linalg::trace_norm_hermitian(&linalg::sub(rho, sigma))
}

/// Smallest `t` with `(1-t) rho + t tau` PPT, times `||rho - tau||`.
fn ppt_shrink(rho: &CMat, tau: &CMat, pos_b: &[usize], m: usize) -> f64 {
    let at = |t: f64| {
        let mix = linalg::add(&linalg::scale(rho, ONE * (1.0 - t)), &linalg::scale(tau, ONE * t));
        let pt = DensityMatrix::from_matrix_unchecked(mix).partial_transpose(pos_b);
        negativity_of(&pt) <= 1e-13
    };
    let _ = m;
    if at(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi * distance(rho, tau)
}

struct SearchOutcome {
    best: f64,
    converged: bool,
    evaluations: usize,
}

fn evolve(rho: &CMat, layout: &Layout, start: Mixture, iterations: usize, rng: &mut crate::rng::LabRng) -> SearchOutcome {
    let mut current = start;
    let mut best = distance(rho, &current.state(layout));
    let mut sigma = 0.3;
    let mut late_gain = 0.0;
    for it in 0..iterations {
        let trial = current.mutate(sigma, rng);
        let value = distance(rho, &trial.state(layout));
        if value < best {
            if it * 10 >= iterations * 9 {
                late_gain += best - value;
            }
            best = value;
            current = trial;
            sigma = (sigma * 1.5).min(1.0);
        } else {
            sigma = (sigma * 0.93).max(1e-6);
        }
    }
    SearchOutcome { best, converged: late_gain < 1e-6, evaluations: iterations + 1 }
}

/// Bounds on `min { ||rho_{AB} - sigma|| : sigma separable across A|B }` (trace distance).
pub fn sep_distance_estimate(rho: &DensityMatrix, a: &[usize], b: &[usize], budget: usize, seed: Seed) -> Result<SepDistance> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.iter().any(|q| b.contains(q)) {
        return Err(Error::Invalid("bipartition parts overlap".into()));
    }
    let mut union: Vec<usize> = a.iter().chain(b).copied().collect();
    union.sort_unstable();
    union.dedup();
    check_register(union.len(), MAX_SEP_QUBITS, "separable distance")?;
    let local = rho.reduced(&union)?;
    let position = |q: &usize| union.iter().position(|u| u == q).expect("qubit in union");
    let mut pos_a: Vec<usize> = a.iter().map(position).collect();
    let mut pos_b: Vec<usize> = b.iter().map(position).collect();
    pos_a.sort_unstable();
    pos_b.sort_unstable();
    let layout = Layout { m: union.len(), pos_a, pos_b };
    let (da, db) = (layout.da(), layout.db());
    let target = local.matrix();
    let lower = negativity_of(&local.partial_transpose(&layout.pos_b)) / da.min(db) as f64;

    let starts = candidates(&local, &layout)?;
    let mut upper = f64::INFINITY;
    let mut start_best = None;
    for (idx, c) in starts.iter().enumerate() {
        let sigma = c.state(&layout);
        let v = distance(target, &sigma);
        if v < upper {
            upper = v;
            start_best = Some(idx);
        }
        if da * db <= 6 {
            upper = upper.min(ppt_shrink(target, &sigma, &layout.pos_b, layout.m));
        }
    }
    if da * db <= 6 {
        let mm = linalg::scale(&linalg::identity(da * db), ONE / (da * db) as f64);
        upper = upper.min(ppt_shrink(target, &mm, &layout.pos_b, layout.m));
    }
    let mut evaluations = starts.len();
    let mut converged = true;
    if budget > 0 && upper > 1e-12 {
        let per = budget.div_ceil(RESTARTS);
        let outcomes: Vec<SearchOutcome> = (0..RESTARTS)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed.derive("sep-restart", r as u64).rng();
                let start = match (r, start_best) {
                    (0, Some(i)) => starts[i].clone(),
                    _ => Mixture::random(&layout, MAX_PRODUCT_TERMS.min(da * db * 2), &mut rng),
                };
                evolve(target, &layout, start, per, &mut rng)
            })
            .collect();
        for o in outcomes {
            evaluations += o.evaluations;
            if o.best < upper {
                upper = o.best;
                converged = o.converged;
            }
        }
    }
    Ok(SepDistance { lower, upper: upper.max(lower), evaluations, converged })
}
