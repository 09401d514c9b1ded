//! Time-series and manifest persistence.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::Diagnostics;
use crate::error::{Error, Result};
use crate::io::config::ConfigFile;
use crate::scenario::{RunMetadata, Scenario, ScenarioResult, TargetOptimum};
use crate::scenario::FormulaResolution;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Everything needed to reproduce and interpret a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub artifact_version: String,
    /// Laboratory-unit configuration; parsing it reproduces the run.
    pub config: ConfigFile,
    /// Resolved SI parameters (rad/s, 1/s, s).
    pub resolved: Scenario,
    pub metadata: RunMetadata,
    pub gprime_resolution: Option<FormulaResolution>,
    pub optima: Vec<TargetOptimum>,
    pub best_target: String,
    pub diagnostics: Diagnostics,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(scenario: &Scenario, result: &ScenarioResult, wall_clock: Duration) -> Self {
        RunManifest {
            scenario: scenario.name.clone(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            config: ConfigFile::from_scenario(scenario),
            resolved: scenario.clone(),
            metadata: result.metadata.clone(),
            gprime_resolution: None,
            optima: result.optima.clone(),
            best_target: result.best_target.clone(),
            diagnostics: result.diagnostics.clone(),
            wall_clock_seconds: wall_clock.as_secs_f64(),
            outputs: Vec::new(),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.config.clone().into_scenario(&self.scenario)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// CSV text: `t_ns`, then the `P_*` and `F_*` columns, 12 significant
/// digits, LF line endings.
pub fn timeseries_csv(result: &ScenarioResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let series = &result.series;
    let header: Vec<&str> = std::iter::once("t_ns")
        .chain(series.columns.iter().map(|(n, _)| n.as_str()))
        .collect();
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(&header).map_err(ser)?;
    for (i, t) in series.times.iter().enumerate() {
        let row: Vec<String> = std::iter::once(sig12(t * 1e9))
            .chain(series.columns.iter().map(|(_, v)| sig12(v[i])))
            .collect();
        w.write_record(&row).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

#[derive(Serialize)]
struct JsonSeries<'a> {
    t_ns: Vec<f64>,
    columns: serde_json::Map<String, serde_json::Value>,
    optima: &'a [TargetOptimum],
    best_target: &'a str,
    manifest: &'a RunManifest,
}

pub fn timeseries_json(result: &ScenarioResult, manifest: &RunManifest) -> Result<String> {
    let columns = result
        .series
        .columns
        .iter()
        .map(|(n, v)| (n.clone(), serde_json::json!(v)))
        .collect();
    let doc = JsonSeries {
        t_ns: result.series.times.iter().map(|t| t * 1e9).collect(),
        columns,
        optima: &result.optima,
        best_target: &result.best_target,
        manifest,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn emit_timeseries(
    result: &ScenarioResult,
    manifest: &RunManifest,
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => timeseries_csv(result)?,
        OutputFormat::Json => timeseries_json(result, manifest)?,
    };
    write_file(path, text.as_bytes())
}

/// Writes `<dir>/<name>.<ext>` and `<dir>/<name>.manifest.json`, returning
/// both paths. The manifest lists the outputs.
pub fn write_run(
    dir: &Path,
    result: &ScenarioResult,
    manifest: &mut RunManifest,
    format: OutputFormat,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let stem = sanitize(&manifest.scenario);
    let data = dir.join(format!("{stem}.{}", format.extension()));
    let man = dir.join(format!("{stem}.manifest.json"));
    manifest.outputs = vec![data.display().to_string(), man.display().to_string()];
    emit_timeseries(result, manifest, &data, format)?;
    manifest.write(&man)?;
    Ok((data, man))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
