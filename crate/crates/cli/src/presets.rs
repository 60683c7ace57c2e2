//! The preset catalog. Each preset maps a resolved config onto one pipeline.

use noiselab::channel::{CptpReport, RateStrategy};
use noiselab::entanglement::{
    emergent_entanglement, ent_measure, ent_tilde, max_entropy_completion, negativity, sep_distance_estimate,
};
use noiselab::lab::{
    conjecture_a_scan, conjecture_b_metric, dnoise_score, noncommutativity_profile, rate_comparison,
    rate_scaling_experiment, run_random_unitary_sync, search_cor2q, smoothing_comparison, verify_cor2q, BaseNoise,
    ChannelChoice, CircuitFamily, ConjBOptions, Cor2qFamily, Experiment, Pipeline,
};
use noiselab::noise::KernelSpec;
use noiselab::simulate::simulate_ideal;
use noiselab::syndrome::{
    coarse_distribution, correlation_matrix_csv, pauli_channel_mass, pauli_mass, synchronization_report, weight_profile,
    CoarseDistribution, WeightProfile,
};
use noiselab::{Caps, Circuit, DensityMatrix, PauliChannel, QuantumChannel, Seed, UnitaryOp};
use serde_json::{json, Value};

use crate::config::{CircuitSpec, ExperimentConfig, Factory, Field, NoiseSpec};
use crate::error::{CliError, Result};
use crate::report::{self, cell, csv, opt_cell, Artifact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    BellDetrimental,
    GhzSync,
    HaarWeight,
    RateCompare,
    RateScaling,
    Cor2qSearch,
    MaxentEnt,
    EmergentGhz,
    DnoiseCheck,
    SmoothingCompare,
}

/// Seed of a preset invoked by name without `--seed`.
pub const DEFAULT_SEED: u64 = 1;

/// Fault rate of the synchronized reference family checked exactly by `cor2q-search`.
pub const COR2Q_REFERENCE_Q: f64 = 0.05;

/// Synchronization threshold used by every preset.
const DELTA: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub(crate) struct Defaults {
    pub n: Option<usize>,
    pub circuit: Option<CircuitSpec>,
    pub noise: Option<NoiseSpec>,
    pub kernel: Option<KernelSpec>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub s: Option<f64>,
    pub budget: Option<usize>,
    pub trials: Option<usize>,
}

/// What a preset produced; written out by the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub results: Value,
    pub tables: Vec<Artifact>,
    pub figures: Vec<Artifact>,
    /// Proposition or validity checks that failed; a non-empty list makes the run exit with 1.
    pub failures: Vec<String>,
}

fn dep(p: f64) -> Option<NoiseSpec> {
    Some(NoiseSpec { kind: Default::default(), p })
}

fn factory(f: Factory) -> Option<CircuitSpec> {
    Some(CircuitSpec::Factory(f))
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::BellDetrimental,
        Preset::GhzSync,
        Preset::HaarWeight,
        Preset::RateCompare,
        Preset::RateScaling,
        Preset::Cor2qSearch,
        Preset::MaxentEnt,
        Preset::EmergentGhz,
        Preset::DnoiseCheck,
        Preset::SmoothingCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::BellDetrimental => "bell-detrimental",
            Preset::GhzSync => "ghz-sync",
            Preset::HaarWeight => "haar-weight",
            Preset::RateCompare => "rate-compare",
            Preset::RateScaling => "rate-scaling",
            Preset::Cor2qSearch => "cor2q-search",
            Preset::MaxentEnt => "maxent-ent",
            Preset::EmergentGhz => "emergent-ghz",
            Preset::DnoiseCheck => "dnoise-check",
            Preset::SmoothingCompare => "smoothing-compare",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::BellDetrimental => "pair correlations of detrimental versus standard fresh noise on a Bell circuit",
            Preset::GhzSync => "GHZ conjugation of product noise, synchronization flags and the entanglement proxy",
            Preset::HaarWeight => "weight profiles of conditioned random-unitary noise",
            Preset::RateCompare => "trace-distance rates of independent and correlated noise at equal alpha",
            Preset::RateScaling => "alpha of the last fresh channel across register sizes",
            Preset::Cor2qSearch => "exact cor2q check and randomized counterexample search",
            Preset::MaxentEnt => "max-entropy ENT functionals, negativity and separable distance",
            Preset::EmergentGhz => "emergent pair entanglement of a GHZ state",
            Preset::DnoiseCheck => "commutation of channels with unitary stabilizers of the state",
            Preset::SmoothingCompare => "forward versus reverse kernel smoothing of the same base noise",
        }
    }

    pub(crate) fn fields(self) -> &'static [Field] {
        use Field::*;
        match self {
            Preset::BellDetrimental | Preset::GhzSync | Preset::SmoothingCompare => &[N, Circuit, Noise, Kernel],
            Preset::HaarWeight => &[N, Alpha],
            Preset::RateCompare => &[N, Noise],
            Preset::RateScaling => &[N, Circuit, Noise, Kernel],
            Preset::Cor2qSearch => &[N, Eta, S],
            Preset::MaxentEnt | Preset::EmergentGhz => &[N, Budget],
            Preset::DnoiseCheck => &[N, Noise, Budget],
        }
    }

    pub(crate) fn defaults(self) -> Defaults {
        let uniform = Some(KernelSpec::Uniform);
        match self {
            Preset::BellDetrimental => {
                Defaults { n: Some(2), circuit: factory(Factory::Bell), noise: dep(0.05), kernel: uniform, ..Default::default() }
            }
            Preset::GhzSync => {
                Defaults { n: Some(5), circuit: factory(Factory::Ghz), noise: dep(0.01), kernel: uniform, ..Default::default() }
            }
            Preset::HaarWeight => Defaults { n: Some(6), alpha: Some(0.3), trials: Some(20), ..Default::default() },
            Preset::RateCompare => Defaults { n: Some(6), noise: dep(0.01), ..Default::default() },
            Preset::RateScaling => {
                Defaults { n: Some(6), circuit: factory(Factory::Ghz), noise: dep(0.02), kernel: uniform, ..Default::default() }
            }
            Preset::Cor2qSearch => {
                Defaults { n: Some(10), eta: Some(0.04), s: Some(0.2), trials: Some(10_000), ..Default::default() }
            }
            Preset::MaxentEnt => Defaults { n: Some(3), budget: Some(4), ..Default::default() },
            Preset::EmergentGhz => {
                Defaults { n: Some(3), budget: Some(noiselab::entanglement::DEFAULT_BUDGET), ..Default::default() }
            }
            Preset::DnoiseCheck => Defaults { n: Some(1), noise: dep(0.2), budget: Some(4), ..Default::default() },
            Preset::SmoothingCompare => {
                Defaults { n: Some(3), circuit: factory(Factory::Ghz), noise: dep(0.05), kernel: uniform, ..Default::default() }
            }
        }
    }

    /// Resolved config of the preset at its default size.
    pub fn default_config(self) -> ExperimentConfig {
        let d = self.defaults();
        let cfg = ExperimentConfig {
            experiment: self.name().to_string(),
            seed: DEFAULT_SEED,
            n: None,
            circuit: None,
            noise: None,
            kernel: None,
            trials: d.trials.unwrap_or(1),
            alpha: None,
            eta: None,
            s: None,
            budget: None,
            caps: Caps::default(),
            output_dir: None,
        };
        cfg.resolve().expect("preset defaults are valid")
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<Outcome> {
        match self {
            Preset::BellDetrimental => bell_detrimental(cfg),
            Preset::GhzSync => ghz_sync(cfg),
            Preset::HaarWeight => haar_weight(cfg),
            Preset::RateCompare => rate_compare(cfg),
            Preset::RateScaling => rate_scaling(cfg),
            Preset::Cor2qSearch => cor2q(cfg),
            Preset::MaxentEnt => maxent(cfg),
            Preset::EmergentGhz => emergent(cfg),
            Preset::DnoiseCheck => dnoise(cfg),
            Preset::SmoothingCompare => smoothing(cfg),
        }
    }
}

fn seed(cfg: &ExperimentConfig, unit: &str) -> Seed {
    Seed(cfg.seed).derive(unit, 0)
}

fn circuit(cfg: &ExperimentConfig) -> Result<Circuit> {
    let spec = cfg.circuit.as_ref().ok_or_else(|| CliError::validation("circuit", "missing"))?;
    Ok(spec.build(cfg.n())?)
}

fn ideal(c: &Circuit) -> Result<DensityMatrix> {
    let rho0 = DensityMatrix::zero_state(c.n())?;
    Ok(simulate_ideal(c, &rho0)?.final_state().clone())
}

fn all_qubits(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn profile_outputs(name: &str, title: &str, wp: &WeightProfile, tables: &mut Vec<Artifact>, figures: &mut Vec<Artifact>) {
    tables.push(Artifact::table(name, report::weight_profile_csv(wp)));
    figures.push(Artifact::figure(name, report::weight_profile_chart(title, &wp.f)));
}

fn cor01(cd: &CoarseDistribution) -> Option<f64> {
    cd.pair_correlation(0, 1).ok().map(|c| c.pearson)
}

fn bell_detrimental(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = circuit(cfg)?;
    let (n, total, kernel) = (c.n(), c.depth(), cfg.kernel());
    let base = BaseNoise::depolarizing(n, cfg.p(), total)?;
    let rho0 = DensityMatrix::zero_state(n)?;
    let det = Experiment::new(c.clone(), rho0.clone(), base.clone(), Pipeline::Detrimental { kernel })?;
    let standard = Experiment::new(c.clone(), rho0, base, Pipeline::Standard)?;
    let choice = ChannelChoice::Fresh { t: total };

    let det_syn = det.designated_syndrome(choice)?;
    let std_syn = standard.designated_syndrome(choice)?;
    let (det_cd, std_cd) = (coarse_distribution(&det_syn), coarse_distribution(&std_syn));
    let det_scan = conjecture_a_scan(&det, choice, None, &[])?;
    let std_scan = conjecture_a_scan(&standard, choice, None, &[])?;
    let overall_scan = conjecture_a_scan(&det, ChannelChoice::Overall, None, &[])?;

    let dense = det.fresh_dense()?;
    let cptp: Vec<CptpReport> = dense.iter().map(|e| e.validate_cptp()).collect();
    let all_cptp = cptp.iter().all(|r| r.passed);
    let profiles = dense.iter().map(|e| Ok(weight_profile(&pauli_mass(e)?))).collect::<Result<Vec<_>>>()?;
    let fresh_profile = weight_profile(&det_syn);

    let mut tables = vec![
        Artifact::table("pair_correlation", correlation_matrix_csv(&det_cd.pair_correlation_matrix())),
        Artifact::table("pair_correlation_standard", correlation_matrix_csv(&std_cd.pair_correlation_matrix())),
        Artifact::table(
            "cycles",
            csv(
                &["t", "alpha", "min_choi_eigenvalue", "trace_residual", "cptp"],
                &cptp
                    .iter()
                    .zip(&profiles)
                    .enumerate()
                    .map(|(k, (r, wp))| {
                        vec![(k + 1).to_string(), cell(wp.alpha), cell(r.min_choi_eigenvalue), cell(r.trace_residual), r.passed.to_string()]
                    })
                    .collect::<Vec<_>>(),
            ),
        ),
    ];
    let mut figures = Vec::new();
    profile_outputs("weight_profile", &format!("fresh noise E'_{total}"), &fresh_profile, &mut tables, &mut figures);

    let failures = if all_cptp { vec![] } else { vec!["a fresh channel failed CPTP validation".to_string()] };
    Ok(Outcome {
        results: json!({
            "circuit": c,
            "noise": cfg.noise,
            "kernel": kernel,
            "fresh_cycle": total,
            "cor_01": cor01(&det_cd),
            "standard_cor_01": cor01(&std_cd),
            "fresh_profile": fresh_profile,
            "detrimental": det_scan,
            "standard": std_scan,
            "overall": overall_scan,
            "cptp": cptp,
            "all_cptp": all_cptp,
        }),
        tables,
        figures,
        failures,
    })
}

fn ghz_sync(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = circuit(cfg)?;
    let (n, p) = (c.n(), cfg.p());
    let all = all_qubits(n);
    let u = c.segment_unitary(0, c.depth())?;
    let e0 = QuantumChannel::depolarizing(n, p, &all)?;
    let conjugated = pauli_mass(&e0.conjugate_by_unitary(&u)?)?;
    let base = pauli_mass(&e0)?;
    let oracle_distance = if c.is_clifford() {
        let pushed = PauliChannel::depolarizing(n, p, &all)?.conjugate_clifford(&c)?;
        Some(conjugated.sup_distance(&pauli_channel_mass(&pushed))?)
    } else {
        None
    };
    let (wp_conj, wp_base) = (weight_profile(&conjugated), weight_profile(&base));
    let sync_conj = synchronization_report(&wp_conj, DELTA)?;
    let sync_base = synchronization_report(&wp_base, DELTA)?;

    let exp = Experiment::new(
        c.clone(),
        DensityMatrix::zero_state(n)?,
        BaseNoise::depolarizing(n, p, c.depth())?,
        Pipeline::Detrimental { kernel: cfg.kernel() },
    )?;
    let opts = ConjBOptions { seed: seed(cfg, "ghz-sync-partitions"), include_overall: true, ..Default::default() };
    let conj_b = conjecture_b_metric(&exp, opts)?;

    let mut tables = Vec::new();
    let mut figures = Vec::new();
    profile_outputs("weight_profile_conjugated", "U E0 U^dagger", &wp_conj, &mut tables, &mut figures);
    profile_outputs("weight_profile_base", "E0", &wp_base, &mut tables, &mut figures);
    profile_outputs("weight_profile_fresh", "last fresh channel", &conj_b.fresh_profile, &mut tables, &mut figures);
    if let Some(wp) = &conj_b.overall_profile {
        profile_outputs("weight_profile_overall", "overall noise", wp, &mut tables, &mut figures);
    }
    let mut failures = Vec::new();
    if oracle_distance.is_some_and(|d| d > 1e-10) {
        failures.push("dense conjugation disagrees with the Clifford pushforward".to_string());
    }
    Ok(Outcome {
        results: json!({
            "circuit": c,
            "noise": cfg.noise,
            "kernel": cfg.kernel(),
            "conjugated_profile": wp_conj,
            "base_profile": wp_base,
            "pushforward_distance": oracle_distance,
            "conjugated_sync": sync_conj,
            "base_sync": sync_base,
            "conjecture_b": conj_b,
        }),
        tables,
        figures,
        failures,
    })
}

fn haar_weight(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.n();
    let alpha = cfg.alpha.unwrap_or(0.3);
    let r = run_random_unitary_sync(n, alpha, cfg.trials, seed(cfg, "haar-weight"))?;
    let rows: Vec<Vec<String>> = r
        .trials
        .iter()
        .enumerate()
        .map(|(k, t)| vec![k.to_string(), cell(t.alpha), cell(t.theta), opt_cell(t.weight_fraction), opt_cell(t.tv_distance)])
        .collect();
    let mut tables = vec![Artifact::table("trials", csv(&["trial", "alpha", "theta", "weight_fraction", "tv_distance"], &rows))];
    let mut figures = Vec::new();
    let mean = r.mean_profile.clone().unwrap_or_else(|| vec![0.0; n + 1]);
    let profile_rows: Vec<Vec<String>> = mean.iter().enumerate().map(|(s, v)| vec![s.to_string(), cell(*v)]).collect();
    tables.push(Artifact::table("weight_profile", csv(&["s", "f"], &profile_rows)));
    figures.push(Artifact::figure("weight_profile", report::weight_profile_chart("mean normalized profile", &mean)));
    Ok(Outcome { results: json!({ "report": r }), tables, figures, failures: vec![] })
}

fn rate_compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.p();
    let reports = (1..=cfg.n()).map(|m| rate_comparison(m, p, &[RateStrategy::BasisStates])).collect::<noiselab::Result<Vec<_>>>()?;
    let ratios: Vec<Option<f64>> = reports.iter().map(|r| r.rows[0].ratio).collect();
    let increasing = ratios.windows(2).skip(1).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a));
    let alpha_equal = reports.iter().all(|r| r.alpha_equal);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                cell(r.alpha_independent),
                cell(r.alpha_correlated),
                cell(r.rows[0].independent),
                cell(r.rows[0].correlated),
                opt_cell(r.rows[0].ratio),
            ]
        })
        .collect();
    let points: Vec<(f64, f64)> = reports.iter().filter_map(|r| r.rows[0].ratio.map(|x| (r.n as f64, x))).collect();
    let mut failures = Vec::new();
    if !alpha_equal {
        failures.push("independent and correlated alpha differ".to_string());
    }
    Ok(Outcome {
        results: json!({ "p": p, "reports": reports, "alpha_equal": alpha_equal, "ratio_increasing": increasing }),
        tables: vec![Artifact::table(
            "rates",
            csv(&["n", "alpha_independent", "alpha_correlated", "rate_independent", "rate_correlated", "ratio"], &rows),
        )],
        figures: vec![Artifact::figure("rate_ratio", report::line_chart("independent / correlated rate", "n", "ratio", &points))],
        failures,
    })
}

fn rate_scaling(cfg: &ExperimentConfig) -> Result<Outcome> {
    let family = match cfg.circuit {
        Some(CircuitSpec::Factory(Factory::Idle)) => CircuitFamily::Idle,
        _ => CircuitFamily::Ghz,
    };
    let ns: Vec<usize> = (2..=cfg.n()).collect();
    let r = rate_scaling_experiment(family, cfg.kernel(), cfg.p(), &ns)?;
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| vec![row.n.to_string(), row.depth.to_string(), cell(row.alpha), cell(row.alpha_base), opt_cell(row.ratio)])
        .collect();
    let points: Vec<(f64, f64)> = r.rows.iter().map(|row| (row.n as f64, row.alpha)).collect();
    Ok(Outcome {
        results: json!({ "report": r }),
        tables: vec![Artifact::table("scaling", csv(&["n", "depth", "alpha", "alpha_base", "ratio"], &rows))],
        figures: vec![Artifact::figure("scaling", report::line_chart("alpha of the last fresh channel", "n", "alpha", &points))],
        failures: vec![],
    })
}

fn cor2q(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (n, eta, s) = (cfg.n(), cfg.eta.unwrap_or(0.04), cfg.s.unwrap_or(0.2));
    let exact = verify_cor2q(&CoarseDistribution::synchronized(n, COR2Q_REFERENCE_Q)?, eta, s);
    let family = Cor2qFamily::Mixtures { n, eta, s, components: 3 };
    let search = search_cor2q(family, cfg.trials, seed(cfg, "cor2q-search"))?;
    let mut failures = Vec::new();
    if exact.conclusion_evaluated && !exact.conclusion_satisfied {
        failures.push("cor2q conclusion fails on the synchronized reference family".to_string());
    }
    if search.counterexample_count > 0 {
        failures.push(format!("{} cor2q counterexamples found", search.counterexample_count));
    }
    let w = |k: &str| exact.witness.get(k).copied();
    let rows = vec![
        vec!["reference_tail".to_string(), opt_cell(w("tail"))],
        vec!["reference_bound".to_string(), opt_cell(w("bound"))],
        vec!["checked".to_string(), search.checked.to_string()],
        vec!["attempts".to_string(), search.attempts.to_string()],
        vec!["counterexamples".to_string(), search.counterexample_count.to_string()],
        vec!["min_margin".to_string(), opt_cell(search.min_margin)],
    ];
    Ok(Outcome {
        results: json!({ "reference_q": COR2Q_REFERENCE_Q, "exact": exact, "search": search }),
        tables: vec![Artifact::table("summary", csv(&["quantity", "value"], &rows))],
        figures: vec![],
        failures,
    })
}

fn maxent(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.n();
    let bell = ideal(&Circuit::bell())?;
    let ghz = ideal(&Circuit::ghz(n)?)?;
    let product = ideal(&Circuit::product_rx(n, 0.7)?)?;
    let cases = [("bell", &bell, all_qubits(2)), ("ghz", &ghz, all_qubits(n)), ("product", &product, all_qubits(n))];
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (name, rho, qubits) in cases {
        let ent = ent_measure(rho, &qubits)?;
        let sol = max_entropy_completion(rho, &qubits)?;
        rows.push(vec![name.to_string(), qubits.len().to_string(), cell(ent), cell(sol.entropy), cell(sol.constraint_residual)]);
        entries.push(json!({
            "state": name,
            "qubits": qubits,
            "ent": ent,
            "completion_entropy": sol.entropy,
            "constraint_residual": sol.constraint_residual,
            "iterations": sol.iterations,
        }));
    }
    let tilde = ent_tilde(&ghz)?;
    let subset_rows: Vec<Vec<String>> = tilde
        .per_subset
        .iter()
        .map(|e| {
            let label: Vec<String> = e.subset.iter().map(ToString::to_string).collect();
            vec![label.join(" "), cell(e.ent), cell(e.residual)]
        })
        .collect();
    let sep = sep_distance_estimate(&bell, &[0], &[1], cfg.budget(), seed(cfg, "maxent-sep"))?;
    Ok(Outcome {
        results: json!({
            "ent": entries,
            "ghz_ent_tilde": tilde,
            "negativity_bell": negativity(&bell, &[0])?,
            "negativity_ghz": negativity(&ghz, &[0])?,
            "sep_distance_bell": sep,
        }),
        tables: vec![
            Artifact::table("ent", csv(&["state", "qubits", "ent", "completion_entropy", "constraint_residual"], &rows)),
            Artifact::table("ghz_subsets", csv(&["subset", "ent", "constraint_residual"], &subset_rows)),
        ],
        figures: vec![],
        failures: vec![],
    })
}

fn emergent(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.n();
    let ghz = ideal(&Circuit::ghz(n)?)?;
    let product = ideal(&Circuit::product_rx(n, 0.7)?)?;
    let g = emergent_entanglement(&ghz, 0, 1, cfg.budget(), seed(cfg, "emergent-ghz"))?;
    let p = emergent_entanglement(&product, 0, 1, cfg.budget(), seed(cfg, "emergent-product"))?;
    let rows = vec![
        vec!["ghz".to_string(), cell(g.value), g.evaluations.to_string()],
        vec!["product".to_string(), cell(p.value), p.evaluations.to_string()],
    ];
    Ok(Outcome {
        results: json!({ "pair": [0, 1], "ghz": g, "product": p }),
        tables: vec![Artifact::table("emergent", csv(&["state", "ebits", "evaluations"], &rows))],
        figures: vec![],
        failures: vec![],
    })
}

fn dnoise(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (n, p) = (cfg.n(), cfg.p());
    let x0 = noiselab::linalg::embed(&noiselab::GateKind::X.matrix(), &[0], n);
    let channels = [
        ("depolarizing", QuantumChannel::depolarizing(n, p, &all_qubits(n))?),
        ("dephasing", QuantumChannel::dephasing(n, p, 0)?),
        ("bit_flip_unitary", QuantumChannel::unitary(&UnitaryOp::new(x0)?)),
    ];
    let states = [("zero", DensityMatrix::zero_state(n)?), ("maximally_mixed", DensityMatrix::maximally_mixed(n)?)];
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (k, (cname, e)) in channels.iter().enumerate() {
        for (l, (sname, rho)) in states.iter().enumerate() {
            let unit = Seed(cfg.seed).derive("dnoise", (k * states.len() + l) as u64);
            let r = dnoise_score(e, rho, cfg.budget(), unit)?;
            rows.push(vec![cname.to_string(), sname.to_string(), cell(r.residual), r.witness.to_string()]);
            entries.push(json!({ "channel": cname, "state": sname, "report": r }));
        }
    }
    Ok(Outcome {
        results: json!({ "scores": entries }),
        tables: vec![Artifact::table("dnoise", csv(&["channel", "state", "residual", "witness"], &rows))],
        figures: vec![],
        failures: vec![],
    })
}

fn smoothing(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = circuit(cfg)?;
    let n = c.n();
    let e = QuantumChannel::depolarizing(n, cfg.p(), &all_qubits(n))?;
    let base = vec![e; c.depth()];
    let r = smoothing_comparison(&c, &base, &cfg.kernel(), &DensityMatrix::zero_state(n)?)?;
    let mu = noncommutativity_profile(&c)?;
    let rows: Vec<Vec<String>> =
        r.per_cycle.iter().zip(&mu).enumerate().map(|(k, (d, m))| vec![(k + 1).to_string(), cell(*d), cell(*m)]).collect();
    let points: Vec<(f64, f64)> = r.per_cycle.iter().enumerate().map(|(k, d)| ((k + 1) as f64, *d)).collect();
    Ok(Outcome {
        results: json!({ "circuit": c, "kernel": cfg.kernel(), "noise": cfg.noise, "smoothing": r, "noncommutativity": mu }),
        tables: vec![Artifact::table("smoothing", csv(&["t", "trace_distance", "noncommutativity"], &rows))],
        figures: vec![Artifact::figure("smoothing", report::line_chart("forward vs reverse smoothing", "t", "trace distance", &points))],
        failures: vec![],
    })
}
