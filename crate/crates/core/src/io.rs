//! CSV serialization of sample sets and process paths.
//!
//! Numbers are written in plain decimal notation with 17 significant digits,
//! enough to round-trip any `f64` exactly.

use std::io::{Read, Write};

use crate::bmixgnb::ProcessPath;
use crate::error::{Error, Result};

/// Decimal (non-scientific) rendering with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes paired draws with header `x,n`.
pub fn write_pairs_csv<W: Write>(out: W, xs: &[f64], ns: &[u64]) -> Result<()> {
    if xs.len() != ns.len() {
        return Err(Error::Validation(format!(
            "x and n columns differ in length ({} vs {})",
            xs.len(),
            ns.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "n"])?;
    for (x, n) in xs.iter().zip(ns) {
        w.write_record([format_sig17(*x), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a two-column `x,n` file. Every malformed line is reported, not just the first.
pub fn read_pairs_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<u64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ix), Some(in_)) = (col("x"), col("n")) else {
        return Err(Error::Parse { lines: vec![1], message: "header must contain columns x and n".into() });
    };
    let mut xs = Vec::new();
    let mut ns = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let Ok(rec) = rec else {
            bad.push(line);
            continue;
        };
        let x = rec.get(ix).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite());
        let n = rec.get(in_).and_then(|v| v.parse::<u64>().ok());
        match (x, n) {
            (Some(x), Some(n)) => {
                xs.push(x);
                ns.push(n);
            }
            _ => bad.push(line),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Parse { lines: bad, message: "unparseable x,n rows".into() });
    }
    Ok((xs, ns))
}

/// Writes one path with header `t,x,n`.
pub fn write_path_csv<W: Write>(out: W, path: &ProcessPath) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "n"])?;
    for i in 0..path.len() {
        w.write_record([
            format_sig17(path.times[i]),
            format_sig17(path.x_values[i]),
            path.n_values[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes several paths with header `path,t,x,n`, the first column being the 0-based path index.
pub fn write_paths_csv<W: Write>(out: W, paths: &[ProcessPath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "t", "x", "n"])?;
    for (k, path) in paths.iter().enumerate() {
        for i in 0..path.len() {
            w.write_record([
                k.to_string(),
                format_sig17(path.times[i]),
                format_sig17(path.x_values[i]),
                path.n_values[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
