//! CLI workflows. Each returns the process exit code.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use softfacet::eval::benchmark::AcceptanceThresholds;
use softfacet::eval::{generate_synthetic_log, run_benchmark, ScenarioConfig, SyntheticScenario};
use softfacet::loglearn::io::{
    read_catalog, read_json, read_sessions, write_catalog, write_json, write_jsonl, write_model,
    RelevanceRecord,
};
use softfacet::loglearn::train;
use softfacet::{Error, ModelConfig};

use crate::service::{self, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ACCEPTANCE_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn report(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    EXIT_USAGE
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => read_json(p),
        None => Ok(ScenarioConfig::default()),
    }
}

pub fn train_cmd(catalog: &Path, log: &Path, config: Option<&Path>, out: &Path) -> i32 {
    let run = || -> Result<(), Error> {
        let catalog = read_catalog(catalog)?;
        let sessions = read_sessions(log)?;
        let config: ModelConfig = match config {
            Some(p) => read_json(p)?,
            None => ModelConfig::default(),
        };
        let mut model = train(&catalog, &sessions, &config)?;
        model.metadata.trained_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        write_model(out, &model)?;
        let r = model.metadata.rejects;
        println!(
            "trained {} (query, item) states from {} sessions; rejects: {} unknown items, {} unknown brands, {} invalid ranges",
            model.states.len(),
            model.metadata.session_count,
            r.unknown_items,
            r.unknown_brands,
            r.invalid_ranges
        );
        Ok(())
    };
    run().map(|_| EXIT_OK).unwrap_or_else(report)
}

pub fn evaluate_cmd(
    scenario: Option<&Path>,
    seed: u64,
    check: bool,
    report_path: Option<&Path>,
) -> i32 {
    let config = match load_scenario(scenario) {
        Ok(c) => c,
        Err(e) => return report(e),
    };
    let result = match run_benchmark(&config, seed) {
        Ok(r) => r,
        Err(e) => return report(e),
    };
    if let Some(p) = report_path {
        if let Err(e) = std::fs::write(p, result.to_jsonl()) {
            return report(format!("{}: {e}", p.display()));
        }
    } else {
        print!("{}", result.to_jsonl());
    }
    print!("{}", result.table());
    if !check {
        return EXIT_OK;
    }
    let mut ok = true;
    for c in result.check(&AcceptanceThresholds::default()) {
        println!(
            "[{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_ACCEPTANCE_FAIL
    }
}

/// Writes `catalog.jsonl`, `sessions.jsonl`, `relevance.jsonl` and the
/// resolved `scenario.json` into `out`.
pub fn simulate_cmd(scenario: Option<&Path>, seed: u64, out: &Path) -> i32 {
    let run = || -> Result<PathBuf, Error> {
        let mut config = load_scenario(scenario)?;
        let sc = SyntheticScenario::build(&config, seed)?;
        let sessions = generate_synthetic_log(&sc, config.sessions_per_query, seed)?;
        std::fs::create_dir_all(out).map_err(|e| Error::Io {
            path: out.display().to_string(),
            message: e.to_string(),
        })?;
        write_catalog(&out.join("catalog.jsonl"), &sc.catalog)?;
        write_jsonl(&out.join("sessions.jsonl"), &sessions)?;
        let relevance: Vec<RelevanceRecord> = sc
            .relevance
            .iter()
            .map(|(q, s)| RelevanceRecord {
                query: q.clone(),
                scores: s.iter().cloned().collect(),
            })
            .collect();
        write_jsonl(&out.join("relevance.jsonl"), &relevance)?;
        config.sigma_scale = Some(sc.sigma_scale);
        write_json(&out.join("scenario.json"), &config)?;
        write_json(&out.join("model_config.json"), &config.model)?;
        Ok(out.to_path_buf())
    };
    match run() {
        Ok(dir) => {
            println!(
                "wrote synthetic catalog, sessions and relevance to {}",
                dir.display()
            );
            EXIT_OK
        }
        Err(e) => report(e),
    }
}

pub fn serve_cmd(config: &Path) -> i32 {
    let config = match ServiceConfig::load(config) {
        Ok(c) => c,
        Err(e) => return report(e),
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return report(e),
    };
    match rt.block_on(service::serve(&config)) {
        Ok(()) => EXIT_OK,
        Err(e) => report(e),
    }
}
