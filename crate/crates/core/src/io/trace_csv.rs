//! CSV trace files.
//!
//! Leading `# key = value` lines are metadata. The header row is mandatory:
//!
//! - `freq_hz,re,im` or `freq_hz,mag_db,phase_rad` for sweeps,
//! - `t_s,re,im` for zero-span records,
//!
//! optionally followed by a `sigma` column. Reserved metadata keys
//! `power_in_w` and `temperature_k` fill the matching trace fields.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ComplexTrace, SweepAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    ReIm,
    MagPhase,
}

fn parse_meta(line: &str) -> Option<(String, String)> {
    let body = line.trim_start_matches('#').trim();
    let (k, v) = body.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

pub fn parse_trace(text: &str) -> Result<ComplexTrace> {
    let mut meta = BTreeMap::new();
    let mut body_start = 0;
    let mut header_line = 1;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('#') {
            if let Some((k, v)) = parse_meta(t) {
                meta.insert(k, v);
            }
        } else if !t.is_empty() {
            break;
        }
        body_start += line.len();
        header_line += 1;
    }
    let body = &text[body_start..];
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: header_line, msg: e.to_string() })?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if headers.len() == 1 && headers[0].is_empty() {
        return Err(Error::Parse { line: header_line, msg: "missing header row".into() });
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (is_freq, axis_col) = match (col("freq_hz"), col("t_s")) {
        (Some(i), None) => (true, i),
        (None, Some(i)) => (false, i),
        (Some(_), Some(_)) => {
            return Err(Error::Parse { line: header_line, msg: "both freq_hz and t_s columns present".into() })
        }
        (None, None) => {
            return Err(Error::Parse { line: header_line, msg: "missing column freq_hz or t_s".into() })
        }
    };
    let (layout, a_col, b_col) = match (col("re"), col("im"), col("mag_db"), col("phase_rad")) {
        (Some(a), Some(b), _, _) => (Layout::ReIm, a, b),
        (_, _, Some(a), Some(b)) if is_freq => (Layout::MagPhase, a, b),
        _ => {
            let need = if is_freq { "re,im or mag_db,phase_rad" } else { "re,im" };
            return Err(Error::Parse { line: header_line, msg: format!("missing columns: need {need}") });
        }
    };
    let sigma_col = col("sigma");

    let mut axis = Vec::new();
    let mut values = Vec::new();
    let mut sigma = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = header_line + rec.position().map_or(0, |p| p.line() as usize - 1);
        let num = |i: usize, what: &str| -> Result<f64> {
            let s = rec.get(i).ok_or_else(|| Error::Parse { line, msg: format!("missing {what} value") })?;
            let v: f64 = s.parse().map_err(|_| Error::Parse { line, msg: format!("bad {what} value `{s}`") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite {what} sample") });
            }
            Ok(v)
        };
        axis.push(num(axis_col, &headers[axis_col])?);
        let a = num(a_col, &headers[a_col])?;
        let b = num(b_col, &headers[b_col])?;
        values.push(match layout {
            Layout::ReIm => Complex64::new(a, b),
            Layout::MagPhase => Complex64::from_polar(10f64.powf(a / 20.0), b),
        });
        if let Some(i) = sigma_col {
            sigma.push(num(i, "sigma")?);
        }
    }
    let mut trace = ComplexTrace {
        axis: if is_freq { SweepAxis::Frequency(axis) } else { SweepAxis::Time(axis) },
        values,
        power_in: None,
        temperature: None,
        noise_sigma: sigma_col.map(|_| sigma),
        meta: BTreeMap::new(),
    };
    let reserved = |k: &str, m: &BTreeMap<String, String>| -> Result<Option<f64>> {
        m.get(k)
            .map(|v| v.parse::<f64>().map_err(|_| Error::invalid(k, "must be a number")))
            .transpose()
    };
    trace.power_in = reserved("power_in_w", &meta)?;
    trace.temperature = reserved("temperature_k", &meta)?;
    meta.remove("power_in_w");
    meta.remove("temperature_k");
    trace.meta = meta;
    trace.validate()?;
    Ok(trace)
}

pub fn read_trace<R: Read>(mut r: R) -> Result<ComplexTrace> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    parse_trace(&s)
}

pub fn ingest_trace(path: &Path) -> Result<ComplexTrace> {
    read_trace(std::fs::File::open(path)?)
}

/// Writes `re,im` form with round-trip number formatting.
pub fn write_trace<W: Write>(trace: &ComplexTrace, w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let mut meta = trace.meta.clone();
    if let Some(p) = trace.power_in {
        meta.insert("power_in_w".into(), format!("{p:e}"));
    }
    if let Some(t) = trace.temperature {
        meta.insert("temperature_k".into(), format!("{t:e}"));
    }
    for (k, v) in &meta {
        writeln!(w, "# {k} = {v}")?;
    }
    let axis_name = if trace.axis.is_frequency() { "freq_hz" } else { "t_s" };
    let mut cw = csv::Writer::from_writer(w);
    let mut header = vec![axis_name, "re", "im"];
    if trace.noise_sigma.is_some() {
        header.push("sigma");
    }
    cw.write_record(&header)?;
    for (i, (x, z)) in trace.axis.points().iter().zip(&trace.values).enumerate() {
        let mut row = vec![format!("{x:e}"), format!("{:e}", z.re), format!("{:e}", z.im)];
        if let Some(s) = &trace.noise_sigma {
            row.push(format!("{:e}", s[i]));
        }
        cw.write_record(&row)?;
    }
    cw.flush()?;
    Ok(())
}

/// Tidy numeric table: one header, one row per observation.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid("table row", "length must match the header"));
        }
        cw.write_record(r.iter().map(|v| format!("{v:e}")))?;
    }
    cw.flush()?;
    Ok(())
}

/// Reads a numeric CSV table and returns the `required` columns, in order,
/// as rows. Extra columns are ignored; `#` lines are skipped.
pub fn parse_table(text: &str, required: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let idx: Vec<usize> = required
        .iter()
        .map(|r| {
            headers
                .iter()
                .position(|h| h == r)
                .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column {r}") })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = idx
            .iter()
            .map(|&i| {
                let s = rec.get(i).ok_or_else(|| Error::Parse { line, msg: format!("missing {} value", headers[i]) })?;
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse { line, msg: format!("bad {} value `{s}`", headers[i]) }),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("table has no rows".into()));
    }
    Ok(rows)
}
