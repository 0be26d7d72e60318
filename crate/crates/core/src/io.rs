//! File formats: count tables, calibration points, histograms and spectra
//! as CSV; source specs as TOML; states and reports as JSON.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiberspec::{Spectrum, TimeHistogram};
use crate::polopt::{ProjectionSetting, WaveplateSetting};
use crate::simlab::CountRecord;
use crate::source::SourceSpec;

pub const COUNTS_HEADER: [&str; 9] = [
    "label",
    "hwp1_deg",
    "qwp1_deg",
    "hwp2_deg",
    "qwp2_deg",
    "integration_s",
    "coincidences",
    "singles_arm1",
    "singles_arm2",
];

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn counts_to_csv(records: &[CountRecord]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(COUNTS_HEADER).map_err(csv_err)?;
    for r in records {
        let a1 = r.setting.arm1;
        let a2 = r.setting.arm2;
        w.write_record([
            r.label.clone(),
            fmt_opt(a1.map(|s| s.hwp_deg)),
            fmt_opt(a1.map(|s| s.qwp_deg)),
            fmt_opt(a2.map(|s| s.hwp_deg)),
            fmt_opt(a2.map(|s| s.qwp_deg)),
            r.integration_s.to_string(),
            r.coincidences.to_string(),
            fmt_opt(r.singles_arm1),
            fmt_opt(r.singles_arm2),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: u64) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    let f = field.trim();
    if f.is_empty() {
        return Ok(None);
    }
    f.parse::<T>().map(Some).map_err(|e| Error::Parse {
        line,
        message: format!("{name}: cannot parse {f:?}: {e}"),
    })
}

fn required<T>(v: Option<T>, name: &str, line: u64) -> Result<T> {
    v.ok_or_else(|| Error::Parse {
        line,
        message: format!("{name} is required"),
    })
}

fn arm_setting(hwp: Option<f64>, qwp: Option<f64>, arm: u8, line: u64) -> Result<Option<WaveplateSetting>> {
    match (hwp, qwp) {
        (None, None) => Ok(None),
        (Some(h), Some(q)) => WaveplateSetting::new(h, q).map(Some).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        }),
        _ => Err(Error::Parse {
            line,
            message: format!("arm {arm} needs both hwp{arm}_deg and qwp{arm}_deg or neither"),
        }),
    }
}

/// Parses a count table; errors carry the 1-based line number.
pub fn counts_from_csv(text: &str) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != COUNTS_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, got {}", COUNTS_HEADER.join(","), got.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let label = rec[0].to_string();
        if label.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty label".into(),
            });
        }
        let arm1 = arm_setting(
            parse_field(&rec[1], "hwp1_deg", line)?,
            parse_field(&rec[2], "qwp1_deg", line)?,
            1,
            line,
        )?;
        let arm2 = arm_setting(
            parse_field(&rec[3], "hwp2_deg", line)?,
            parse_field(&rec[4], "qwp2_deg", line)?,
            2,
            line,
        )?;
        let setting = ProjectionSetting::new(label.clone(), arm1, arm2).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let record = CountRecord {
            label,
            setting,
            integration_s: required(parse_field(&rec[5], "integration_s", line)?, "integration_s", line)?,
            coincidences: required(parse_field(&rec[6], "coincidences", line)?, "coincidences", line)?,
            singles_arm1: parse_field(&rec[7], "singles_arm1", line)?,
            singles_arm2: parse_field(&rec[8], "singles_arm2", line)?,
        };
        record.validate().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn numeric_rows(text: &str, header: &[&str]) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let got: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, got {}", header.join(","), got.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let vals = rec
            .iter()
            .zip(header)
            .map(|(f, name)| required(parse_field::<f64>(f, name, line)?, name, line))
            .collect::<Result<Vec<f64>>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        rows.push((line, vals));
    }
    Ok(rows)
}

pub const CALIBRATION_HEADER: [&str; 2] = ["delay_ns", "wavelength_nm"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["t_lo_ns", "t_hi_ns", "counts"];
pub const SPECTRUM_HEADER: [&str; 3] = ["lambda_lo_nm", "lambda_hi_nm", "counts"];

pub fn calibration_points_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    Ok(numeric_rows(text, &CALIBRATION_HEADER)?
        .into_iter()
        .map(|(_, v)| (v[0], v[1]))
        .collect())
}

pub fn calibration_points_to_csv(points: &[(f64, f64)]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(CALIBRATION_HEADER).map_err(csv_err)?;
    for (t, l) in points {
        w.write_record([t.to_string(), l.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn histogram_to_csv(hist: &TimeHistogram) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(HISTOGRAM_HEADER).map_err(csv_err)?;
    for (e, c) in hist.bin_edges().windows(2).zip(hist.counts()) {
        w.write_record([e[0].to_string(), e[1].to_string(), c.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// Bins must be contiguous: each lower edge equals the previous upper edge.
pub fn histogram_from_csv(text: &str) -> Result<TimeHistogram> {
    let rows = numeric_rows(text, &HISTOGRAM_HEADER)?;
    let mut edges = Vec::with_capacity(rows.len() + 1);
    let mut counts = Vec::with_capacity(rows.len());
    for (line, v) in rows {
        if v[2] < 0.0 || v[2].fract() != 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("counts must be a non-negative integer, got {}", v[2]),
            });
        }
        match edges.last() {
            None => edges.push(v[0]),
            Some(&prev) if prev == v[0] => {}
            Some(&prev) => {
                return Err(Error::Parse {
                    line,
                    message: format!("bin starts at {} but previous bin ends at {prev}", v[0]),
                })
            }
        }
        edges.push(v[1]);
        counts.push(v[2] as u64);
    }
    TimeHistogram::new(edges, counts)
}

pub fn spectrum_to_csv(spectrum: &Spectrum) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(SPECTRUM_HEADER).map_err(csv_err)?;
    for b in &spectrum.bins {
        w.write_record([b.lo_nm.to_string(), b.hi_nm.to_string(), b.counts.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn read_spec(path: &Path) -> Result<SourceSpec> {
    SourceSpec::from_toml_str(&std::fs::read_to_string(path)?)
}
