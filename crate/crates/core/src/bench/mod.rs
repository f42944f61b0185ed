//! Benchmark harness: per-scenario errors of every locator, grouped
//! statistics, and record persistence.

mod records;
mod stats;

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::locators::{locate, CurrentSource, LocatorConfig, Method};
use crate::oracle::{FaultType, ScenarioRecord, SegmentClass};
use crate::scenario::csv_err;

pub use records::{
    check_units, export_records, ingest_records, load_records, save_records, RecordFileHeader, RECORD_FORMAT,
};
pub use stats::{aggregate, ErrorTable, GroupKey, GroupStats, ReportHeader};

/// Error score of estimates that did not converge or could not be formed.
pub const UNCONVERGED_ERROR_PCT: f64 = 100.0;

/// `|clamp(d_hat, 0, 1) - d_true| * 100`, in percent of the line length.
pub fn error_pct(d_hat: f64, d_true: f64) -> f64 {
    if d_hat.is_nan() {
        return UNCONVERGED_ERROR_PCT;
    }
    ((d_hat.clamp(0.0, 1.0) - d_true).abs() * 100.0).min(UNCONVERGED_ERROR_PCT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub scenario_id: u64,
    pub method: Method,
    pub fault_type: FaultType,
    pub distance: f64,
    pub d_hat: f64,
    pub error_pct: f64,
    pub penetration_total: f64,
    pub segment_class: SegmentClass,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub locator: LocatorConfig,
    pub current_source: CurrentSource,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { locator: LocatorConfig::default(), current_source: CurrentSource::PracticalProxy }
    }
}

fn score(method: Method, record: &ScenarioRecord, spec: &FeederSpec, cfg: &BenchConfig) -> Result<Option<ErrorSample>> {
    if !method.applicable(record.fault.fault_type) {
        return Ok(None);
    }
    let d = record.fault.distance;
    let (d_hat, converged) = match locate(method, record, spec, &cfg.locator, cfg.current_source) {
        Ok(e) => (e.d_hat, e.converged),
        Err(Error::SingularLoop(_)) => (f64::NAN, false),
        Err(e) => return Err(e),
    };
    Ok(Some(ErrorSample {
        scenario_id: record.scenario_id,
        method,
        fault_type: record.fault.fault_type,
        distance: d,
        d_hat,
        error_pct: if converged { error_pct(d_hat, d) } else { UNCONVERGED_ERROR_PCT },
        penetration_total: record.penetration.total(),
        segment_class: record.segment_class,
        converged,
    }))
}

/// One sample per (record, applicable method), in record order and then
/// in the order of `methods`. Singular loops score as unconverged.
pub fn run_benchmark(
    records: &[ScenarioRecord],
    methods: &[Method],
    spec: &FeederSpec,
    cfg: &BenchConfig,
) -> Result<Vec<ErrorSample>> {
    if records.is_empty() {
        return Err(Error::Config("no records to benchmark".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    cfg.locator.validate()?;
    let per_record: Vec<Vec<ErrorSample>> = records
        .par_iter()
        .map(|r| methods.iter().filter_map(|&m| score(m, r, spec, cfg).transpose()).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

pub fn write_samples_csv<W: Write>(samples: &[ErrorSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<ErrorSample>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::Parse { line, message: e.to_string() }
            })
        })
        .collect()
}

pub fn save_samples(samples: &[ErrorSample], path: impl AsRef<Path>) -> Result<()> {
    write_samples_csv(samples, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<ErrorSample>> {
    read_samples_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}
