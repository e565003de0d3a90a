//! Report emission. Data payloads depend only on the config and seed; the
//! wall-clock timestamp and worker count go to a separate `meta.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::experiments::{Outcome, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn report_json(outcome: &Outcome, config: &ExperimentConfig, format: OutputFormat) -> Value {
    let mut report = json!({
        "tool": "gibbsbd",
        "version": VERSION,
        "experiment": outcome.kind.name(),
        "passed": outcome.passed(),
        "checks": outcome.checks,
        "results": outcome.results,
        "config": config,
    });
    if format == OutputFormat::Json {
        let tables: Map<String, Value> = outcome.tables.iter().map(|t| (t.name.clone(), Value::Array(row_objects(t)))).collect();
        report["tables"] = Value::Object(tables);
    }
    report
}

fn row_objects(table: &Table) -> Vec<Value> {
    table
        .rows
        .iter()
        .map(|row| Value::Object(table.columns.iter().cloned().zip(row.iter().cloned()).collect()))
        .collect()
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn table_csv(table: &Table) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell))?;
    }
    Ok(w.into_inner()?)
}

fn json_lines(values: &[Value]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for v in values {
        serde_json::to_writer(&mut out, v)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes the report, tables, optional sample dump and metadata sidecar;
/// returns the data files written (the sidecar excluded).
pub fn write_outputs(outcome: &Outcome, config: &ExperimentConfig, dir: &Path, format: OutputFormat, jobs: usize) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> anyhow::Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    let mut report = serde_json::to_vec_pretty(&report_json(outcome, config, format))?;
    report.push(b'\n');
    put("report.json".into(), report)?;
    match format {
        OutputFormat::Csv => {
            for t in &outcome.tables {
                put(format!("{}.csv", t.name), table_csv(t)?)?;
            }
        }
        OutputFormat::Jsonl => {
            for t in &outcome.tables {
                put(format!("{}.jsonl", t.name), json_lines(&row_objects(t))?)?;
            }
        }
        OutputFormat::Json => {}
    }
    if !outcome.samples.is_empty() {
        put("samples.jsonl".into(), json_lines(&outcome.samples)?)?;
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let files: Vec<String> = written.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    let meta = json!({ "created_unix": created, "jobs": jobs, "version": VERSION, "files": files });
    fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
    Ok(written)
}
