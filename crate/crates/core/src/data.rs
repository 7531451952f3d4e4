//! Long-format trial data: one follow-up row per subject (event_type 0)
//! plus one row per observed component event.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::{LongRow, RestrictedRecord};
use crate::simulation::{Dgp, LatentSubject};

const FIXED_COLUMNS: [&str; 5] = ["id", "A", "time", "status", "event_type"];

/// Parsed long-format file.
#[derive(Debug, Clone, PartialEq)]
pub struct LongData {
    pub covariate_names: Vec<String>,
    pub rows: Vec<LongRow>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn check_header(header: &csv::StringRecord) -> Result<Vec<String>> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..5] != FIXED_COLUMNS {
        return Err(parse_err(1, format!("header must start with {}, found {}", FIXED_COLUMNS.join(","), cols.join(","))));
    }
    let covs: Vec<String> = cols[5..].iter().map(|s| s.to_string()).collect();
    for (k, name) in covs.iter().enumerate() {
        if *name != format!("Z{}", k + 1) {
            return Err(parse_err(1, format!("covariate column {} should be Z{}, found '{name}'", k + 6, k + 1)));
        }
    }
    Ok(covs)
}

fn field<'a>(rec: &'a csv::StringRecord, k: usize, name: &str, line: usize) -> Result<&'a str> {
    match rec.get(k).map(str::trim) {
        Some(s) if !s.is_empty() && !s.eq_ignore_ascii_case("na") => Ok(s),
        _ => Err(parse_err(line, format!("missing value in column {name}"))),
    }
}

fn number(s: &str, name: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("column {name}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("column {name}: '{s}' is not finite")));
    }
    Ok(v)
}

fn binary(s: &str, name: &str, line: usize) -> Result<u8> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(parse_err(line, format!("column {name}: expected 0 or 1, found '{s}'"))),
    }
}

pub fn read_long<R: Read>(reader: R) -> Result<LongData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let covariate_names = check_header(rdr.headers()?)?;
    let width = 5 + covariate_names.len();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let id = field(&rec, 0, "id", line)?.to_string();
        let arm = binary(field(&rec, 1, "A", line)?, "A", line)?;
        let time = number(field(&rec, 2, "time", line)?, "time", line)?;
        if time < 0.0 {
            return Err(parse_err(line, format!("negative time {time}")));
        }
        let status = binary(field(&rec, 3, "status", line)?, "status", line)?;
        let et = field(&rec, 4, "event_type", line)?;
        let event_type: u32 = et
            .parse()
            .map_err(|_| parse_err(line, format!("column event_type: '{et}' is not a nonnegative integer")))?;
        let covariates = covariate_names
            .iter()
            .enumerate()
            .map(|(k, name)| number(field(&rec, 5 + k, name, line)?, name, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(LongRow {
            id,
            arm,
            time,
            status,
            event_type,
            covariates,
        });
    }
    Ok(LongData { covariate_names, rows })
}

pub fn read_long_path(path: impl AsRef<Path>) -> Result<LongData> {
    let f = std::fs::File::open(path.as_ref())?;
    read_long(std::io::BufReader::new(f))
}

pub fn write_long<W: Write>(writer: W, rows: &[LongRow]) -> Result<()> {
    let p = rows.first().map(|r| r.covariates.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|k| format!("Z{k}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.id.clone(),
            r.arm.to_string(),
            r.time.to_string(),
            r.status.to_string(),
            r.event_type.to_string(),
        ];
        rec.extend(r.covariates.iter().map(|z| z.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long rows of restricted records, with component q coded `codes[q]`.
/// Restricting the output again at the same τ reproduces the records.
pub fn records_to_long(records: &[RestrictedRecord], codes: &[u32]) -> Vec<LongRow> {
    let mut out = Vec::new();
    for r in records {
        out.push(LongRow {
            id: r.subject_id.clone(),
            arm: r.arm,
            time: r.follow_up,
            status: u8::from(r.censored),
            event_type: 0,
            covariates: r.covariates.clone(),
        });
        for q in 0..r.n_components() {
            if r.delta[q] == 1 {
                out.push(LongRow {
                    id: r.subject_id.clone(),
                    arm: r.arm,
                    time: r.y_tilde[q],
                    status: 1,
                    event_type: codes[q],
                    covariates: r.covariates.clone(),
                });
            }
        }
    }
    out
}

/// Long rows of simulated subjects with administrative end of study at
/// `admin_end`; component q is coded q + 1.
pub fn latent_to_long(subjects: &[LatentSubject], dgp: &Dgp, admin_end: f64) -> Vec<LongRow> {
    let mut out = Vec::new();
    for (i, s) in subjects.iter().enumerate() {
        let id = format!("s{}", i + 1);
        let c = s.censor_time(dgp);
        let f = c.min(admin_end);
        let events: Vec<(usize, f64)> = s
            .event_times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t <= f)
            .map(|(q, &t)| (q, t))
            .collect();
        let ended_by_event = events.iter().any(|&(_, t)| t == f);
        out.push(LongRow {
            id: id.clone(),
            arm: s.arm,
            time: f,
            status: u8::from(c < admin_end && !ended_by_event),
            event_type: 0,
            covariates: s.covariates.clone(),
        });
        for (q, t) in events {
            out.push(LongRow {
                id: id.clone(),
                arm: s.arm,
                time: t,
                status: 1,
                event_type: q as u32 + 1,
                covariates: s.covariates.clone(),
            });
        }
    }
    out
}
