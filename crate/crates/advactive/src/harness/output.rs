//! Result serialization: CSV curves, per-trial event logs, and a metadata
//! file that pins down exactly which configuration produced them.
//!
//! Every writer here is a pure function of the run — no clocks, no
//! hostnames — so two runs of the same configuration produce byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ErrorCurve, ExperimentConfig, ExperimentRun, TrialRecord};
use crate::selection::StrategyKind;

/// Metadata written alongside the curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config: ExperimentConfig,
    pub crate_version: String,
    pub oracle_name: String,
    pub oracle_model_hash: Option<String>,
    /// `(trial_index, query)` pairs where the unlabeled pool exhausted.
    pub truncated_trials: Vec<(usize, usize)>,
    /// Set when a trial failed and the run aborted with partial results.
    pub failure: Option<String>,
    pub notes: Vec<String>,
}

impl Meta {
    pub fn of(run: &ExperimentRun) -> Self {
        let truncated_trials = run
            .records
            .iter()
            .filter_map(|r| r.truncated_at.map(|q| (r.trial_index, q)))
            .collect();
        let mut notes = Vec::new();
        let degraded: usize = run
            .records
            .iter()
            .flat_map(|r| &r.events)
            .filter(|e| e.degraded)
            .count();
        if degraded > 0 {
            notes.push(format!(
                "{degraded} rounds fell back to the unretrained model during utility evaluation"
            ));
        }
        if run.config.attack.enabled {
            let injections: usize = run
                .records
                .iter()
                .flat_map(|r| &r.events)
                .map(|e| e.injected_ids.len())
                .sum();
            notes.push(format!(
                "{injections} adversarial samples injected in total"
            ));
        }
        Meta {
            config: run.config.clone(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            oracle_name: run.oracle_name.clone(),
            oracle_model_hash: run.oracle_model_hash.clone(),
            truncated_trials,
            failure: run.failure.clone(),
            notes,
        }
    }
}

/// The averaged curve as CSV: one row per query index, the mean first,
/// then each trial's error.
pub fn curve_csv(run: &ExperimentRun) -> String {
    let mut out = String::from("query,mean_test_error");
    for record in &run.records {
        let _ = write!(out, ",trial_{}", record.trial_index);
    }
    out.push('\n');
    for (q, mean) in run.curve.mean.iter().enumerate() {
        let _ = write!(out, "{q},{mean:.6}");
        for trial in &run.curve.per_trial {
            let _ = write!(out, ",{:.6}", trial[q]);
        }
        out.push('\n');
    }
    out
}

/// One trial's event log as CSV (query 0 has no event, so rows start at
/// query 1). Multi-valued fields join with ';' inside one CSV cell.
pub fn trial_csv(record: &TrialRecord) -> String {
    let mut out = String::from(
        "query,test_error,chosen_id,provenance,branch,degraded,injected_ids,model_hash,scores\n",
    );
    for e in &record.events {
        let injected = e
            .injected_ids
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let scores = e
            .scores
            .as_ref()
            .map(|s| {
                s.iter()
                    .map(|v| format!("{v:.6}"))
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{},{},{},{}",
            e.query,
            e.test_error,
            e.chosen_id,
            e.provenance,
            e.branch,
            e.degraded,
            injected,
            e.model_hash,
            scores
        );
    }
    out
}

/// The metadata file as pretty-printed JSON.
pub fn meta_json(run: &ExperimentRun) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Meta::of(run))?)
}

/// Writes `curve.csv`, `trial_NN.csv` per trial, and `meta.json` under
/// `dir`, creating the directory if needed.
pub fn write_run(run: &ExperimentRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let curve_path = dir.join("curve.csv");
    fs::write(&curve_path, curve_csv(run)).map_err(|e| Error::io(&curve_path, e))?;
    for record in &run.records {
        let path = dir.join(format!("trial_{:02}.csv", record.trial_index));
        fs::write(&path, trial_csv(record)).map_err(|e| Error::io(&path, e))?;
    }
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, meta_json(run)?).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Reads a `curve.csv` back into an [`ErrorCurve`].
pub fn read_curve_csv(path: &Path) -> Result<ErrorCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        offset: 0,
        message: format!("{}: empty curve file", path.display()),
    })?;
    let columns = header.split(',').count();
    if columns < 2 || !header.starts_with("query,mean_test_error") {
        return Err(Error::Parse {
            offset: 0,
            message: format!("{}: unrecognized curve header '{header}'", path.display()),
        });
    }
    let trials = columns - 2;
    let mut mean = Vec::new();
    let mut per_trial = vec![Vec::new(); trials];
    let mut offset = header.len() + 1;
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::Parse {
                offset,
                message: format!(
                    "{}: row {} has {} fields, expected {columns}",
                    path.display(),
                    row + 1,
                    fields.len()
                ),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                offset,
                message: format!("{}: '{s}' is not a number", path.display()),
            })
        };
        mean.push(parse(fields[1])?);
        for (t, field) in fields[2..].iter().enumerate() {
            per_trial[t].push(parse(field)?);
        }
        offset += line.len() + 1;
    }
    Ok(ErrorCurve { mean, per_trial })
}

/// Short human-readable label for a configuration, used in plot legends.
pub fn format_run_label(config: &ExperimentConfig) -> String {
    let strategy = match config.strategy.kind {
        StrategyKind::Mixed => format!(
            "mixed(p={:.2}, {})",
            config.strategy.p, config.strategy.companion
        ),
        kind => kind.to_string(),
    };
    let attack = if config.attack.enabled {
        " +attack"
    } else {
        ""
    };
    format!("{} {strategy}{attack}", config.dataset.task)
}

/// Reads a run directory's metadata and derives its legend label.
pub fn read_run_label(dir: &Path) -> Result<String> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: Meta = serde_json::from_str(&text)?;
    Ok(format_run_label(&meta.config))
}
