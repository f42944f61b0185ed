//! JSON Lines record files: a header object followed by one scenario
//! record per line. Floats are written in shortest round-trip form, so
//! export followed by ingest reproduces every record bit for bit.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::oracle::ScenarioRecord;

pub const RECORD_FORMAT: &str = "collector-faultloc/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFileHeader {
    pub format: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub feeder: String,
}

impl RecordFileHeader {
    pub fn for_feeder(spec: &FeederSpec) -> Self {
        Self {
            format: RECORD_FORMAT.to_owned(),
            base_mva: spec.base_mva,
            base_kv: spec.base_kv,
            feeder: spec.name.clone(),
        }
    }
}

fn parse_line<T: serde::de::DeserializeOwned>(text: &str, line: usize) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse { line, message: format!("field `{path}`: {inner}") }
    })
}

pub fn export_records<W: Write>(mut out: W, header: &RecordFileHeader, records: &[ScenarioRecord]) -> Result<()> {
    let to_io = |e: serde_json::Error| Error::Io(e.into());
    serde_json::to_writer(&mut out, header).map_err(to_io)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(to_io)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a record file. Blank lines are skipped; every other line must
/// parse, and errors carry the 1-based line number and the offending field.
pub fn ingest_records<R: BufRead>(input: R) -> Result<(RecordFileHeader, Vec<ScenarioRecord>)> {
    let mut header: Option<RecordFileHeader> = None;
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                let h: RecordFileHeader = parse_line(&line, line_no)?;
                if h.format != RECORD_FORMAT {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("field `format`: expected \"{RECORD_FORMAT}\", found \"{}\"", h.format),
                    });
                }
                header = Some(h);
            }
            Some(_) => records.push(parse_line(&line, line_no)?),
        }
    }
    let header = header.ok_or(Error::Parse { line: 1, message: "missing header line".into() })?;
    Ok((header, records))
}

/// Rejects a record file whose per-unit bases differ from the feeder's.
pub fn check_units(header: &RecordFileHeader, spec: &FeederSpec) -> Result<()> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    if !same(header.base_mva, spec.base_mva) || !same(header.base_kv, spec.base_kv) {
        return Err(Error::Unit(format!(
            "records on {} MVA / {} kV, feeder '{}' on {} MVA / {} kV",
            header.base_mva, header.base_kv, spec.name, spec.base_mva, spec.base_kv
        )));
    }
    Ok(())
}

pub fn save_records(path: impl AsRef<Path>, header: &RecordFileHeader, records: &[ScenarioRecord]) -> Result<()> {
    export_records(BufWriter::new(std::fs::File::create(path)?), header, records)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<(RecordFileHeader, Vec<ScenarioRecord>)> {
    ingest_records(BufReader::new(std::fs::File::open(path)?))
}
