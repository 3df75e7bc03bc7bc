//! The `report` subcommand: one JSON summary of a finished run.

use std::path::Path;

use latreg::diagnostics::{Direction, RmseContrast};
use serde::{Deserialize, Serialize};

use crate::config::read_json;
use crate::manifest::{Representative, RunManifest, RunStatus, MANIFEST_FILE};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub term: String,
    pub coefficient: f64,
    pub std_err: f64,
    pub t: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTable {
    pub terms: Vec<TermRow>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSummary {
    pub id: usize,
    pub dim: usize,
    pub dim_label: String,
    pub direction: Direction,
    pub size: usize,
    #[serde(default)]
    pub test_member_row_ids: Vec<usize>,
    pub rmse: Option<RmseContrast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityBrief {
    pub reference_seed: u64,
    pub runs: usize,
    pub mean_rank_sd: Vec<f64>,
    pub unstable_dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub software: String,
    pub version: String,
    pub representative: Option<Representative>,
    pub global_model: GlobalTable,
    pub subgroups: Vec<SubgroupSummary>,
    /// Ordered proposed, plain_ae, pca; empty when benchmarks were disabled.
    pub benchmarks: Vec<BenchmarkRow>,
    pub stability: Option<StabilityBrief>,
}

const BENCHMARK_ORDER: [&str; 3] = ["proposed", "plain_ae", "pca"];

fn parse_global(text: &str) -> Result<GlobalTable, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut terms = Vec::new();
    let mut r_squared = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| format!("global_model.csv column {i}: {e}"))
        };
        if &rec[0] == "R2" {
            r_squared = Some(num(1)?);
            continue;
        }
        terms.push(TermRow {
            term: rec[0].to_string(),
            coefficient: num(1)?,
            std_err: num(2)?,
            t: num(3)?,
            p_value: num(4)?,
            ci_lower: num(5)?,
            ci_upper: num(6)?,
        });
    }
    Ok(GlobalTable {
        terms,
        r_squared: r_squared.ok_or("global_model.csv has no R2 row")?,
    })
}

fn parse_benchmarks(text: &str) -> Result<Vec<BenchmarkRow>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows.push(BenchmarkRow {
            method: rec[0].to_string(),
            r_squared: rec[1].parse().map_err(|e| format!("benchmarks.csv: {e}"))?,
        });
    }
    rows.sort_by_key(|r| BENCHMARK_ORDER.iter().position(|m| *m == r.method).unwrap_or(usize::MAX));
    Ok(rows)
}

/// Builds the summary of a completed run in `run_dir`. Every missing input
/// is listed in the error.
pub fn cmd_report(run_dir: &Path) -> Result<Summary, CliError> {
    if !run_dir.join(MANIFEST_FILE).is_file() {
        return Err(CliError::Config(format!(
            "missing inputs in {}: {MANIFEST_FILE}",
            run_dir.display()
        )));
    }
    let manifest = RunManifest::load(run_dir)?;
    if manifest.status != RunStatus::Complete {
        let stage = manifest.failure.as_ref().map(|f| f.stage.as_str()).unwrap_or("unknown");
        return Err(CliError::Config(format!(
            "{} is not a completed run (failed at stage {stage})",
            run_dir.display()
        )));
    }
    let mut wanted = vec!["global_model.csv", "subgroups.json"];
    if manifest.config.benchmarks.enabled {
        wanted.push("benchmarks.csv");
    }
    if manifest.file("stability_summary.json").is_some() {
        wanted.push("stability_summary.json");
    }
    let missing: Vec<&str> = wanted
        .iter()
        .copied()
        .filter(|f| !run_dir.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "missing inputs in {}: {}",
            run_dir.display(),
            missing.join(", ")
        )));
    }
    let read = |f: &str| {
        std::fs::read_to_string(run_dir.join(f)).map_err(|e| CliError::runtime("report", format!("{f}: {e}")))
    };
    let global_model = parse_global(&read("global_model.csv")?).map_err(|e| CliError::runtime("report", e))?;
    let subgroups: Vec<SubgroupSummary> = read_json(&run_dir.join("subgroups.json"))?;
    let benchmarks = if manifest.config.benchmarks.enabled {
        parse_benchmarks(&read("benchmarks.csv")?).map_err(|e| CliError::runtime("report", e))?
    } else {
        Vec::new()
    };
    let stability = if wanted.contains(&"stability_summary.json") {
        Some(read_json(&run_dir.join("stability_summary.json"))?)
    } else {
        None
    };
    Ok(Summary {
        software: manifest.software,
        version: manifest.version,
        representative: manifest.representative,
        global_model,
        subgroups,
        benchmarks,
        stability,
    })
}
