//! Delimiter-separated path files.
//!
//! ```text
//! gain,aod_az_rad,aod_el_rad,aoa_az_rad,aoa_el_rad,toa_s[,bounce_count]
//! ```
//!
//! The header row is mandatory. Angles are radians, TOA is seconds, the
//! optional `bounce_count` column labels ground truth. Values are written with
//! shortest round-trip formatting, so export followed by import is exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{AnglePair, PathObservation};

pub const COLUMNS: [&str; 6] = ["gain", "aod_az_rad", "aod_el_rad", "aoa_az_rad", "aoa_el_rad", "toa_s"];
pub const LABEL_COLUMN: &str = "bounce_count";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPath {
    pub observation: PathObservation,
    pub bounce_count: Option<usize>,
}

impl From<PathObservation> for LabeledPath {
    fn from(observation: PathObservation) -> Self {
        Self {
            observation,
            bounce_count: None,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

pub fn read_paths<R: Read>(reader: R) -> Result<Vec<LabeledPath>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = header.iter().collect();
    let labeled = match names.len() {
        6 => false,
        7 if names[6] == LABEL_COLUMN => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {}[,{LABEL_COLUMN}], got {}", COLUMNS.join(","), names.join(",")),
            })
        }
    };
    if names[..6] != COLUMNS {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}[,{LABEL_COLUMN}], got {}", COLUMNS.join(","), names.join(",")),
        });
    }

    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("column {}: {e}", names[i]),
            })
        };
        let values = [field(0)?, field(1)?, field(2)?, field(3)?, field(4)?, field(5)?];
        let bounce_count = if labeled {
            Some(record[6].parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("column {LABEL_COLUMN}: {e}"),
            })?)
        } else {
            None
        };
        let observation = PathObservation {
            gain: values[0],
            aod: AnglePair {
                azimuth: values[1],
                elevation: values[2],
            },
            aoa: AnglePair {
                azimuth: values[3],
                elevation: values[4],
            },
            toa: values[5],
        };
        observation.validate().map_err(|e| Error::Validation {
            row: row + 1,
            msg: e.to_string(),
        })?;
        out.push(LabeledPath {
            observation,
            bounce_count,
        });
    }
    Ok(out)
}

/// Writes a header plus one row per path. The label column is emitted when
/// any path carries a bounce count; unlabeled rows then fail to re-import, so
/// mixed inputs are rejected.
pub fn write_paths<W: Write>(writer: W, paths: &[LabeledPath]) -> Result<()> {
    let labeled = paths.iter().any(|p| p.bounce_count.is_some());
    if labeled && paths.iter().any(|p| p.bounce_count.is_none()) {
        return Err(Error::InvalidInput("mixed labeled and unlabeled paths".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if labeled {
        header.push(LABEL_COLUMN);
    }
    w.write_record(&header).map_err(csv_error)?;
    for p in paths {
        let o = &p.observation;
        let mut row = vec![
            o.gain.to_string(),
            o.aod.azimuth.to_string(),
            o.aod.elevation.to_string(),
            o.aoa.azimuth.to_string(),
            o.aoa.elevation.to_string(),
            format!("{:e}", o.toa),
        ];
        if let Some(b) = p.bounce_count {
            row.push(b.to_string());
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_paths(path: &Path) -> Result<Vec<LabeledPath>> {
    read_paths(File::open(path)?)
}

pub fn export_paths(path: &Path, paths: &[LabeledPath]) -> Result<()> {
    write_paths(File::create(path)?, paths)
}
