//! Experiments probing the propositions and conjectures on synchronized and
//! entanglement-correlated noise. Propositions get pass/fail verdicts;
//! conjecture probes only report measured quantities.

mod probes;
mod props;
mod sync;

pub use probes::{
    conjecture_a_scan, conjecture_b_metric, dnoise_score, invariance_check, invariance_sweep, noncommutativity,
    noncommutativity_profile, random_clifford, rate_comparison, rate_scaling_experiment, smoothing_comparison,
    BaseNoise, BlockRow, ChannelChoice, ConjBOptions, CircuitFamily, ConjAReport, ConjBReport, DnoiseReport, Experiment,
    InvarianceReport, InvarianceRow, PairRow, Pipeline, RateReport, RateRow, ScalingReport, ScalingRow,
    SmoothingReport, INVARIANCE_TOL, MAX_DNOISE_QUBITS, MAX_RATE_QUBITS, MAX_SCALING_QUBITS,
};
pub use props::{
    exact_partition_mean, search_cor2q, verify_cor2q, verify_corpart, Cor2qFamily, PropositionReport, SearchReport,
    COR2Q_MAX_ETA, MAX_SEARCH_QUBITS,
};
pub use sync::{run_random_unitary_sync, summarize_trial, SyncExperimentReport, TrialRow};
