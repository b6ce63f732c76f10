//! Shared fixtures for the benchmarks.

use softfacet::eval::{generate_synthetic_log, ScenarioConfig, SyntheticScenario};
use softfacet::loglearn::{train, Session, TrainedModel};

pub struct Fixture {
    pub scenario: SyntheticScenario,
    pub sessions: Vec<Session>,
    pub model: TrainedModel,
}

/// A trained synthetic catalog of `n_items` items and one query.
pub fn fixture(n_items: usize, sessions_per_query: usize) -> Fixture {
    let config = ScenarioConfig {
        n_items,
        n_queries: 1,
        sessions_per_query,
        ..ScenarioConfig::default()
    };
    let scenario = SyntheticScenario::build(&config, 7).expect("valid scenario");
    let sessions = generate_synthetic_log(&scenario, sessions_per_query, 7).expect("log");
    let model = train(&scenario.catalog, &sessions, &config.model).expect("training");
    Fixture {
        scenario,
        sessions,
        model,
    }
}
