use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepRecord;
use super::HarnessError;

pub const CSV_HEADER: [&str; 8] = ["alpha", "lambda", "ratio", "lower", "upper", "iterations", "converged", "mesh_h"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits, enough to round-trip any `f64`.
fn digits(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn to_csv(records: &[SweepRecord]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            digits(r.alpha),
            digits(r.lambda),
            digits(r.ratio),
            digits(r.lower),
            digits(r.upper),
            r.iterations.to_string(),
            r.converged.to_string(),
            digits(r.mesh_h),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

pub fn from_csv(text: &str) -> Result<Vec<SweepRecord>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::Csv(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let f = |i: usize| -> Result<f64, HarnessError> {
            row[i].parse().map_err(|_| HarnessError::Csv(format!("bad number `{}` in column {}", &row[i], CSV_HEADER[i])))
        };
        out.push(SweepRecord {
            alpha: f(0)?,
            lambda: f(1)?,
            ratio: f(2)?,
            lower: f(3)?,
            upper: f(4)?,
            iterations: row[5].parse().map_err(|_| HarnessError::Csv(format!("bad count `{}`", &row[5])))?,
            converged: row[6].parse().map_err(|_| HarnessError::Csv(format!("bad flag `{}`", &row[6])))?,
            mesh_h: f(7)?,
        });
    }
    Ok(out)
}

pub fn to_json(records: &[SweepRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}

pub fn from_json(text: &str) -> Result<Vec<SweepRecord>, HarnessError> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(records: &[SweepRecord], format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Csv => to_csv(records),
        Format::Json => Ok(to_json(records)),
    }
}

pub fn emit(records: &[SweepRecord], format: Format, path: &Path) -> Result<(), HarnessError> {
    let text = render(records, format)?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> SweepRecord {
        SweepRecord {
            alpha: 2.0,
            lambda: -4.265_622_386_145_7,
            ratio: -4.265_622_386_145_7 / 4.0,
            lower: -8.0,
            upper: -4.0,
            iterations: 12,
            converged: true,
            mesh_h: 1.0 / 3.0,
        }
    }

    #[test]
    fn empty_csv_is_the_header() {
        assert_eq!(to_csv(&[]).unwrap(), "alpha,lambda,ratio,lower,upper,iterations,converged,mesh_h\n");
    }

    #[test]
    fn csv_round_trip_keeps_every_digit() {
        let r = record();
        let text = to_csv(std::slice::from_ref(&r)).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(from_csv(&text).unwrap(), vec![r]);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let mut failed = record();
        failed.lambda = f64::NAN;
        failed.ratio = f64::NAN;
        failed.converged = false;
        let text = to_json(&[record(), failed]);
        let back = from_json(&text).unwrap();
        assert!(back[1].lambda.is_nan());
        assert_eq!(to_json(&back), text);
        assert_eq!(to_csv(&back).unwrap(), to_csv(&from_csv(&to_csv(&back).unwrap()).unwrap()).unwrap());
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.csv");
        let err = emit(&[record()], Format::Csv, &path).unwrap_err();
        assert!(err.to_string().contains("out.csv"), "{err}");
    }
}
