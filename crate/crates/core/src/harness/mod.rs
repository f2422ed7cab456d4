//! Experiment harness: Monte Carlo estimators for the walk probabilities,
//! parameter sweeps, and the bundled exact and statistical checks.

mod estimate;
mod exact;
mod verify;

pub use estimate::{
    estimate, log_slope, sweep, write_estimate_csv, write_sweep_csv, Axis, EstimateError, EstimateReport,
    EstimatorSpec, HashMode, SweepRow, Target, AUTO_EVENTS, AUTO_MEAN_TRIALS,
};
pub use exact::{
    coupling_exhaustive, exact_ext_law, law_battery, law_formula, law_monte_carlo, small_index_sets, CouplingStats,
    LawCase, LawResult,
};
pub use verify::{
    brute_groups, collide_space, coupling_configs, coupling_lines, law_battery_results, law_exhaustive, law_lines,
    seed_length, verify_lemma, CheckLine, Preset, UnknownLemma, VerifyReport, LEMMA_IDS, SEED_CONSTANT,
    SPACE_RATIO_BOUND,
};
