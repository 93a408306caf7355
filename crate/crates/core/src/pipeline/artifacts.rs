use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::IterationRecord;
use crate::error::{invalid, Result};
use crate::inference::PosteriorSlice;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| invalid(format!("'{s}' is not a number")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| invalid(format!("'{s}' is not a count")))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(BufWriter::new(File::create(path)?)))
}

const SCALAR_PREFIX: [&str; 7] = ["iteration", "n_sims", "n_dropped", "epochs", "best_epoch", "train_nll", "val_nll"];

pub fn scalars_header(names: &[String]) -> Vec<String> {
    SCALAR_PREFIX
        .iter()
        .map(|s| (*s).to_owned())
        .chain(names.iter().map(|n| format!("mean_{n}")))
        .chain(names.iter().map(|n| format!("std_{n}")))
        .chain(std::iter::once("logpdf_at_truth".to_owned()))
        .collect()
}

pub fn write_scalars(path: &Path, names: &[String], records: &[IterationRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(scalars_header(names))?;
    for r in records {
        let mut row = vec![
            r.iteration.to_string(),
            r.n_sims.to_string(),
            r.n_dropped.to_string(),
            r.epochs.to_string(),
            r.best_epoch.to_string(),
            fmt_f64(r.train_nll),
            fmt_f64(r.val_nll),
        ];
        row.extend(r.posterior_mean.iter().copied().map(fmt_f64));
        row.extend(r.posterior_std.iter().copied().map(fmt_f64));
        row.push(fmt_f64(r.logpdf_at_truth));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parameter names and records from a `scalars.csv`.
pub fn read_scalars(path: &Path) -> Result<(Vec<String>, Vec<IterationRecord>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let d = header.len().saturating_sub(SCALAR_PREFIX.len() + 1) / 2;
    let names: Vec<String> = header[SCALAR_PREFIX.len()..SCALAR_PREFIX.len() + d]
        .iter()
        .map(|h| h.trim_start_matches("mean_").to_owned())
        .collect();
    if header != scalars_header(&names) {
        return Err(invalid(format!("unexpected scalars header {header:?}")));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f: Vec<&str> = row.iter().collect();
        let p = SCALAR_PREFIX.len();
        records.push(IterationRecord {
            iteration: parse_usize(f[0])?,
            n_sims: parse_usize(f[1])?,
            n_dropped: parse_usize(f[2])?,
            epochs: parse_usize(f[3])?,
            best_epoch: parse_usize(f[4])?,
            train_nll: parse_f64(f[5])?,
            val_nll: parse_f64(f[6])?,
            posterior_mean: f[p..p + d].iter().map(|s| parse_f64(s)).collect::<Result<_>>()?,
            posterior_std: f[p + d..p + 2 * d].iter().map(|s| parse_f64(s)).collect::<Result<_>>()?,
            logpdf_at_truth: parse_f64(f[p + 2 * d])?,
        });
    }
    Ok((names, records))
}

/// One row per draw, header = parameter names.
pub fn write_samples(path: &Path, names: &[String], samples: &Array2<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(names)?;
    for row in samples.rows() {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for row in rdr.records() {
        for v in row?.iter() {
            values.push(parse_f64(v)?);
        }
        rows += 1;
    }
    let samples = Array2::from_shape_vec((rows, names.len()), values).map_err(|e| invalid(e.to_string()))?;
    Ok((names, samples))
}

/// Line 1: the two dimension names. Line 2: `low_a,high_a,low_b,high_b`.
/// Then one line per grid value of the first dimension.
pub fn write_slice(path: &Path, slice: &PosteriorSlice) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{},{}", slice.names.0, slice.names.1)?;
    let [(la, ha), (lb, hb)] = slice.bounds();
    writeln!(out, "{},{},{},{}", fmt_f64(la), fmt_f64(ha), fmt_f64(lb), fmt_f64(hb))?;
    for row in slice.density.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Names, bounds and the density grid of a slice file.
pub fn read_slice(path: &Path) -> Result<((String, String), [f64; 4], Array2<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let names = lines
        .next()
        .and_then(|l| l.split_once(','))
        .map(|(a, b)| (a.to_owned(), b.to_owned()))
        .ok_or_else(|| invalid("slice file lacks the names line"))?;
    let bounds: Vec<f64> = lines
        .next()
        .ok_or_else(|| invalid("slice file lacks the bounds line"))?
        .split(',')
        .map(parse_f64)
        .collect::<Result<_>>()?;
    let bounds: [f64; 4] = bounds.try_into().map_err(|_| invalid("slice bounds need 4 values"))?;
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(parse_f64).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let g = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let grid = Array2::from_shape_vec((g, flat.len() / g.max(1)), flat).map_err(|e| invalid(e.to_string()))?;
    Ok((names, bounds, grid))
}
