//! Result persistence: region CSV, per-point traces, and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ao::RegionPoint;
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// `scheme,alpha1..alphaK,r1..rK,converged,iters`.
pub fn csv_header(users: usize) -> Vec<String> {
    let mut h = vec!["scheme".to_string()];
    h.extend((1..=users).map(|k| format!("alpha{k}")));
    h.extend((1..=users).map(|k| format!("r{k}")));
    h.push("converged".into());
    h.push("iters".into());
    h
}

/// Writes rows in the given order. Floats use the shortest representation
/// that round-trips, so equal results give byte-identical files.
pub fn write_region_csv<W: Write>(out: W, points: &[RegionPoint]) -> Result<()> {
    let users = points.first().map_or(0, |p| p.rates.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(users)).map_err(csv_error)?;
    for p in points {
        if p.rates.len() != users || p.alpha.len() != users {
            return Err(Error::Config("region points disagree on the user count".into()));
        }
        let mut row = vec![p.scheme.clone()];
        row.extend(p.alpha.iter().map(f64::to_string));
        row.extend(p.rates.iter().map(f64::to_string));
        row.push(p.converged.to_string());
        row.push(p.iterations.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_region_csv(path: &Path) -> Result<Vec<RegionPoint>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers = r.headers().map_err(csv_error)?.clone();
    let users = headers.iter().filter(|h| h.starts_with("alpha")).count();
    if headers.iter().collect::<Vec<_>>() != csv_header(users) {
        return Err(Error::Parse(format!("unexpected CSV header {headers:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            Ok(RegionPoint {
                scheme: rec[0].to_string(),
                alpha: (1..=users).map(|i| num(&rec[i])).collect::<Result<_>>()?,
                rates: (users + 1..=2 * users).map(|i| num(&rec[i])).collect::<Result<_>>()?,
                converged: rec[2 * users + 1]
                    .parse()
                    .map_err(|e| Error::Parse(format!("converged flag: {e}")))?,
                iterations: rec[2 * users + 2]
                    .parse()
                    .map_err(|e| Error::Parse(format!("iteration count: {e}")))?,
            })
        })
        .collect()
}

/// One objective value per line.
pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(trace.len() * 20);
    for v in trace {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<f64>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|e| Error::Parse(format!("trace value `{l}`: {e}"))))
        .collect()
}

/// Everything needed to rerun an experiment. The configuration is kept as
/// its TOML text so non-finite values such as an infinite Rician factor
/// survive the JSON wrapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: String,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(config: &ScenarioConfig, outputs: Vec<PathBuf>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_toml()?,
            outputs,
        })
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::from_toml(&self.config)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        manifest.scenario()?;
        Ok(manifest)
    }
}
