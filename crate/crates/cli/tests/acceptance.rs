//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]`, then a nonzero exit on any failure.
//! Oracles here are computed independently of the library code paths they check.

use std::time::{Duration, Instant};

use noiselab::channel::QuantumChannel;
use noiselab::entanglement::{emergent_entanglement, ent_measure, max_entropy_completion, negativity, DEFAULT_BUDGET};
use noiselab::lab::{
    rate_comparison, run_random_unitary_sync, search_cor2q, verify_cor2q, ChannelChoice, Cor2qFamily, Experiment,
    Pipeline,
};
use noiselab::linalg::{self, CMat, C64};
use noiselab::noise::KernelSpec;
use noiselab::simulate::simulate_ideal;
use noiselab::syndrome::{coarse_distribution, pauli_mass, synchronization_report, weight_profile, CoarseDistribution};
use noiselab::{Circuit, DensityMatrix, PauliString, Seed};
use noiselab_cli::{verify_determinism, Preset};

struct Outcome {
    passed: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn ideal(c: &Circuit) -> DensityMatrix {
    simulate_ideal(c, &DensityMatrix::zero_state(c.n()).unwrap()).unwrap().final_state().clone()
}

/// `sum_k |Tr(P A_k)|^2 / d^2` from explicit Pauli matrices.
fn chi_diagonal(e: &QuantumChannel) -> Vec<(PauliString, f64)> {
    let d = e.dim() as f64;
    PauliString::all(e.n())
        .map(|p| {
            let pm = p.matrix().unwrap();
            (p, e.kraus().iter().map(|a| (linalg::trace(&linalg::mul(&pm, a)) / d).norm_sqr()).sum())
        })
        .collect()
}

fn pearson(masses: &[(PauliString, f64)], i: usize, j: usize) -> f64 {
    let (mut pi, mut pj, mut pij) = (0.0, 0.0, 0.0);
    for (p, m) in masses {
        let (fi, fj) = (!p.letter(i).is_identity(), !p.letter(j).is_identity());
        if fi {
            pi += m;
        }
        if fj {
            pj += m;
        }
        if fi && fj {
            pij += m;
        }
    }
    (pij - pi * pj) / (pi * (1.0 - pi) * pj * (1.0 - pj)).sqrt()
}

fn binomial(n: usize, q: f64) -> Vec<f64> {
    let mut f = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; f.len() + 1];
        for (s, v) in f.iter().enumerate() {
            next[s] += v * (1.0 - q);
            next[s + 1] += v * q;
        }
        f = next;
    }
    f
}

fn c1_syndrome_normalization() -> Outcome {
    let start = Instant::now();
    let (mut worst_sum, mut worst_remix) = (0.0f64, 0.0f64);
    for k in 0..1000u64 {
        let n = 1 + (k % 3) as usize;
        let count = 1 + ((k / 3) % 4) as usize;
        let mut rng = Seed(11).derive("c1-channel", k).rng();
        let e = QuantumChannel::random(n, count, &mut rng).unwrap();
        let d = pauli_mass(&e).unwrap();
        worst_sum = worst_sum.max((d.total_mass() - 1.0).abs());
        let w = linalg::haar_unitary(count, &mut rng);
        let remixed = pauli_mass(&e.remixed(&w).unwrap()).unwrap();
        worst_remix = worst_remix.max(d.sup_distance(&remixed).unwrap());
    }
    let elapsed = start.elapsed();
    outcome(
        worst_sum <= 1e-9 && worst_remix <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("max |sum - 1| = {worst_sum:.2e}, max remix shift = {worst_remix:.2e}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn c2_product_profile() -> Outcome {
    let e = QuantumChannel::depolarizing(5, 0.1, &[0, 1, 2, 3, 4]).unwrap();
    let d = pauli_mass(&e).unwrap();
    let wp = weight_profile(&d);
    let oracle = binomial(5, 0.075);
    let sup = wp.f.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let cd = coarse_distribution(&d);
    let mut worst_cor = 0.0f64;
    for i in 0..5 {
        for j in i + 1..5 {
            worst_cor = worst_cor.max(cd.pair_correlation(i, j).unwrap().pearson.abs());
        }
    }
    outcome(
        sup <= 1e-9 && (wp.alpha - 0.375).abs() <= 1e-10 && worst_cor <= 1e-9,
        format!("sup |f - Bin| = {sup:.2e}, alpha = {}, max |cor| = {worst_cor:.2e}", wp.alpha),
    )
}

fn c3_ghz_conjugation() -> Outcome {
    let n = 5;
    let (c, p) = (Circuit::ghz(n).unwrap(), 0.01);
    let all: Vec<usize> = (0..n).collect();
    let e0 = QuantumChannel::depolarizing(n, p, &all).unwrap();
    let u = c.segment_unitary(0, c.depth()).unwrap();
    let dense = pauli_mass(&e0.conjugate_by_unitary(&u).unwrap()).unwrap();
    // Pushforward oracle: the product mass of P moves to U P U^dagger.
    let mut oracle = vec![0.0; 1 << (2 * n)];
    for pstr in PauliString::all(n) {
        let m: f64 = pstr.letters().map(|l| if l.is_identity() { 1.0 - 0.75 * p } else { p / 4.0 }).product();
        oracle[pstr.clifford_conjugate(&c).unwrap().string.dense_index()] += m;
    }
    let dist = PauliString::all(n).map(|q| (dense.mass(&q) - oracle[q.dense_index()]).abs()).fold(0.0, f64::max);
    let conj_sync = synchronization_report(&weight_profile(&dense), 0.1).unwrap();
    let base_sync = synchronization_report(&weight_profile(&pauli_mass(&e0).unwrap()), 0.1).unwrap();
    outcome(
        dist <= 1e-10 && conj_sync.synchronized && !base_sync.synchronized,
        format!(
            "pushforward distance = {dist:.2e}, synchronized: conjugated = {}, base = {}",
            conj_sync.synchronized, base_sync.synchronized
        ),
    )
}

fn c4_random_unitary_sync() -> Outcome {
    let start = Instant::now();
    let r = run_random_unitary_sync(6, 0.3, 20, Seed(4)).unwrap();
    let elapsed = start.elapsed();
    let wf = r.mean_weight_fraction.unwrap_or(f64::NAN);
    let tv = r.mean_tv_distance.unwrap_or(f64::NAN);
    outcome(
        (0.70..=0.80).contains(&wf) && tv <= 0.05 && elapsed < Duration::from_secs(30),
        format!("mean weight fraction = {wf:.4}, mean TV = {tv:.4}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn c5_bell_detrimental() -> Outcome {
    let p = 0.05;
    let pipeline = Pipeline::Detrimental { kernel: KernelSpec::Uniform };
    let det = Experiment::bell(p, pipeline).unwrap();
    let standard = Experiment::bell(p, Pipeline::Standard).unwrap();
    let cor = |e: &Experiment| coarse_distribution(&e.designated_syndrome(ChannelChoice::Fresh { t: 2 }).unwrap()).pair_correlation(0, 1).unwrap().pearson;
    let measured = cor(&det);
    // Dense mixture oracle: E'_2 = (CNOT E CNOT + E) / 2 with a hand-built CNOT (control 0, target 1).
    let e = QuantumChannel::depolarizing(2, p, &[0, 1]).unwrap();
    let mut cnot = linalg::zeros(4, 4);
    for (a, b) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(a, b)] = C64::new(1.0, 0.0);
    }
    let conj: Vec<CMat> = e.kraus().iter().map(|a| linalg::mul(&linalg::mul(&cnot, a), &cnot)).collect();
    let mixed = QuantumChannel::mix(&[QuantumChannel::new(conj).unwrap(), e], &[0.5, 0.5]).unwrap();
    let oracle = pearson(&chi_diagonal(&mixed), 0, 1);
    let baseline = cor(&standard);
    let min_choi = det.fresh_dense().unwrap().iter().map(|c| c.validate_cptp().min_choi_eigenvalue).fold(f64::INFINITY, f64::min);
    outcome(
        (measured - oracle).abs() <= 1e-9 && measured > 0.0 && baseline.abs() <= 1e-9 && min_choi >= -1e-9,
        format!("cor_01 = {measured:.9} (oracle {oracle:.9}), standard = {baseline:.2e}, min Choi eigenvalue = {min_choi:.2e}"),
    )
}

fn c6_cor2q() -> Outcome {
    let start = Instant::now();
    let (n, q, eta, s) = (10, 0.05, 0.04, 0.2);
    let cd = CoarseDistribution::synchronized(n, q).unwrap();
    let oracle_tail: f64 = cd.entries().filter(|(b, _)| b.count_ones() > 1).map(|(_, m)| m).sum();
    let r = verify_cor2q(&cd, eta, s);
    let tail = r.witness.get("tail").copied().unwrap_or(f64::NAN);
    let bound = r.witness.get("bound").copied().unwrap_or(f64::NAN);
    let exact_ok = r.exact
        && r.conclusion_satisfied
        && (tail - 0.05).abs() <= 1e-12
        && (oracle_tail - 0.05).abs() <= 1e-12
        && (bound - s * eta / 4.0).abs() <= 1e-15;
    let family = Cor2qFamily::Mixtures { n, eta, s, components: 3 };
    let search = search_cor2q(family, 10_000, Seed(6)).unwrap();
    if search.counterexample_count > 0 {
        let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("cor2q_counterexamples.json");
        let _ = std::fs::write(&path, serde_json::to_string_pretty(&search.counterexamples).unwrap_or_default());
        eprintln!("counterexamples written to {}", path.display());
    }
    let elapsed = start.elapsed();
    outcome(
        exact_ok && search.checked == 10_000 && search.counterexample_count == 0 && elapsed < Duration::from_secs(120),
        format!(
            "tail = {tail} > bound = {bound}, searched {} (attempts {}), counterexamples = {}, {:.1} s",
            search.checked,
            search.attempts,
            search.counterexample_count,
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_max_entropy() -> Outcome {
    let bell = ideal(&Circuit::bell());
    let ghz = ideal(&Circuit::ghz(3).unwrap());
    let product = ideal(&Circuit::product_rx(3, 0.7).unwrap());
    let eb = ent_measure(&bell, &[0, 1]).unwrap();
    let eg = ent_measure(&ghz, &[0, 1, 2]).unwrap();
    let ep = ent_measure(&product, &[0, 1, 2]).unwrap();
    let residual = [(&bell, vec![0, 1]), (&ghz, vec![0, 1, 2]), (&product, vec![0, 1, 2])]
        .iter()
        .map(|(rho, a)| max_entropy_completion(rho, a).unwrap().constraint_residual)
        .fold(0.0, f64::max);
    let neg = negativity(&bell, &[0]).unwrap();
    outcome(
        (eb - 2.0).abs() <= 1e-3 && (eg - 1.0).abs() <= 1e-3 && ep <= 1e-6 && residual <= 1e-6 && (neg - 0.5).abs() <= 1e-9,
        format!("ENT(Bell) = {eb:.6}, ENT(GHZ3) = {eg:.6}, ENT(product) = {ep:.2e}, max residual = {residual:.2e}, N(Bell) = {neg}"),
    )
}

fn c8_emergent() -> Outcome {
    let ghz = ideal(&Circuit::ghz(3).unwrap());
    let product = ideal(&Circuit::product_rx(3, 0.7).unwrap());
    let g = emergent_entanglement(&ghz, 0, 1, DEFAULT_BUDGET, Seed(8)).unwrap().value;
    let p = emergent_entanglement(&product, 0, 1, DEFAULT_BUDGET, Seed(8)).unwrap().value;
    outcome((g - 1.0).abs() <= 1e-3 && p <= 1e-6, format!("GHZ3 pair (0,1) = {g:.6} ebits, product = {p:.2e}"))
}

fn c9_rate_comparison() -> Outcome {
    let mut ratios = Vec::new();
    let mut alpha_gap = 0.0f64;
    for n in 2..=6 {
        let r = rate_comparison(n, 0.01, &[]).unwrap();
        alpha_gap = alpha_gap.max((r.alpha_independent - r.alpha_correlated).abs());
        ratios.push(r.rows[0].ratio.unwrap_or(f64::NAN));
    }
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    outcome(alpha_gap <= 1e-10 && increasing, format!("max alpha gap = {alpha_gap:.2e}, ratios n=2..6: {}", shown.join(" ")))
}

fn c10_determinism() -> Outcome {
    let mut bad = Vec::new();
    for p in Preset::ALL {
        match verify_determinism(&p.default_config(), &[1, 4, 8]) {
            Ok(r) if r.passed => {}
            Ok(r) => bad.push(format!("{}: {}", p.name(), r.diff.unwrap_or_default())),
            Err(e) => bad.push(format!("{}: {e}", p.name())),
        }
    }
    let detail = if bad.is_empty() { "all 10 presets byte-identical under 1, 4, 8 threads".to_string() } else { bad.join("; ") };
    outcome(bad.is_empty(), detail)
}

fn c11_performance() -> Outcome {
    let budget = Duration::from_secs(60);
    let mut slowest = (String::new(), Duration::ZERO);
    let mut bad = Vec::new();
    let mut cases: Vec<(String, noiselab_cli::ExperimentConfig)> = Preset::ALL.iter().map(|p| (p.name().to_string(), p.default_config())).collect();
    let dense5 = noiselab_cli::config_for_target("smoothing-compare", None, &["n=5".to_string()]).unwrap();
    cases.push(("smoothing-compare n=5".to_string(), dense5));
    let bell5 = noiselab_cli::config_for_target("bell-detrimental", None, &["n=5".to_string(), "circuit.factory=ghz".to_string()]).unwrap();
    cases.push(("bell-detrimental ghz n=5".to_string(), bell5));
    for (name, cfg) in cases {
        let start = Instant::now();
        let result = noiselab_cli::runner::execute(&cfg, None);
        let elapsed = start.elapsed();
        if let Err(e) = result {
            bad.push(format!("{name}: {e}"));
        } else if elapsed >= budget {
            bad.push(format!("{name}: {:.1} s", elapsed.as_secs_f64()));
        }
        if elapsed > slowest.1 {
            slowest = (name, elapsed);
        }
    }
    let detail = format!("slowest {} at {:.1} s", slowest.0, slowest.1.as_secs_f64());
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { format!("{}; {detail}", bad.join("; ")) })
}

fn main() {
    let checks: [(&str, &str, Check); 11] = [
        ("C1", "syndrome normalization", c1_syndrome_normalization),
        ("C2", "product-noise profile", c2_product_profile),
        ("C3", "GHZ conjugation envelope", c3_ghz_conjugation),
        ("C4", "random-unitary synchronization", c4_random_unitary_sync),
        ("C5", "detrimental Bell experiment", c5_bell_detrimental),
        ("C6", "cor2q exact check and search", c6_cor2q),
        ("C7", "max-entropy functionals", c7_max_entropy),
        ("C8", "emergent entanglement", c8_emergent),
        ("C9", "rate comparison", c9_rate_comparison),
        ("C10", "determinism across thread counts", c10_determinism),
        ("C11", "performance envelope", c11_performance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| f.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let r = std::panic::catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked".to_string()));
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {name}: {} ({:.1} s)", r.detail, start.elapsed().as_secs_f64());
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
