//! Evaluation harness: synthetic logs, leave-one-out comparison of soft
//! and hard filtering, and per-query signed-rank tests.

pub mod benchmark;
pub mod loo;
pub mod synthetic;
pub mod wilcoxon;

pub use benchmark::{run_benchmark, AcceptanceThresholds, BenchmarkReport, QueryResult};
pub use loo::{hard_rank_with_miss_penalty, loo_evaluate, measure_miss_rate, EvalRecord};
pub use synthetic::{generate_synthetic_log, ScenarioConfig, SyntheticScenario};
pub use wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
