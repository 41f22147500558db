//! File formats: weight-trace CSV, feature matrices (CSV or FVEC) and
//! benchmark metric tables.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::bench::MetricSeries;
use crate::error::{Error, Result};
use crate::protocol::{Phase, TraceSample, WeightTrace};

pub const FVEC_MAGIC: &[u8; 4] = b"FVEC";
pub const FVEC_HEADER_LEN: usize = 16;

/// Significant digits used for times.
pub const TIME_DIGITS: usize = 12;

/// `x` rounded to `digits` significant digits, without trailing zeros.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - exp;
    if (0..=20).contains(&decimals) {
        let s = format!("{:.*}", decimals as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

/// Header row for a trace of `k` compartments (`k = 0` for an empty trace).
pub fn trace_header(k: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend((1..=k).map(|i| format!("u{i}")));
    h.push("pulse_index".into());
    h.push("phase".into());
    h
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::ingest(line, format!("{other:?}")),
    }
}

/// Writes a trace as CSV. Levels use the shortest exact representation,
/// times are rounded to [`TIME_DIGITS`] significant digits.
pub fn write_trace_to(trace: &WeightTrace, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.chain_len())).map_err(csv_error)?;
    for s in trace.samples() {
        let mut row = Vec::with_capacity(s.u.len() + 3);
        row.push(format_significant(s.time, TIME_DIGITS));
        row.extend(s.u.iter().map(|x| format!("{x:?}")));
        row.push(s.pulse_index.to_string());
        row.push(s.phase.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &WeightTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace_to(trace, BufWriter::new(File::create(path)?))
}

pub fn read_trace_from(input: impl Read) -> Result<WeightTrace> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let n = cols.len();
    let k = n.checked_sub(3);
    let well_formed = |k: usize| {
        cols[0] == "time"
            && cols[n - 2] == "pulse_index"
            && cols[n - 1] == "phase"
            && (1..=k).all(|i| cols[i] == format!("u{i}"))
    };
    let k = match k {
        Some(k) if well_formed(k) => k,
        _ => return Err(Error::ingest(1, format!("unexpected trace header `{}`", cols.join(",")))),
    };

    let mut trace = WeightTrace::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if k == 0 {
            return Err(Error::ingest(line, "samples need at least one level column"));
        }
        if rec.len() != n {
            return Err(Error::ingest(line, format!("expected {n} fields, found {}", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::ingest(line, format!("`{}` in column {} is not a number", &rec[i], cols[i])))
        };
        let time = num(0)?;
        let u = (1..=k).map(num).collect::<Result<Vec<_>>>()?;
        let pulse_index = rec[n - 2]
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::ingest(line, format!("bad pulse index `{}`", &rec[n - 2])))?;
        let phase: Phase = rec[n - 1].trim().parse().map_err(|e: Error| Error::ingest(line, e.to_string()))?;
        trace
            .push(TraceSample {
                time,
                u,
                pulse_index,
                phase,
            })
            .map_err(|e| Error::ingest(line, e.to_string()))?;
    }
    Ok(trace)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<WeightTrace> {
    read_trace_from(File::open(path)?)
}

/// A dense row-major matrix of feature vectors, one item per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Reads either an FVEC file (detected by its magic bytes) or a numeric CSV
/// with an optional header row.
pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_feature_matrix(&bytes)
}

pub fn parse_feature_matrix(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.starts_with(FVEC_MAGIC) {
        parse_fvec(bytes)
    } else {
        parse_feature_csv(bytes)
    }
}

fn parse_fvec(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < FVEC_HEADER_LEN {
        return Err(Error::ingest(0, "truncated FVEC header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::ingest(0, "FVEC dimensions overflow"))?;
    let body = &bytes[FVEC_HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::ingest(
            0,
            format!("FVEC body holds {} bytes, header implies {expected}", body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureMatrix::new(rows, cols, data).map_err(|e| Error::ingest(0, e.to_string()))
}

fn parse_feature_csv(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(_) => return Err(Error::ingest(line, "non-numeric feature value")),
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::ingest(line, format!("expected {c} columns, found {}", values.len())))
            }
            _ => {}
        }
        if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::ingest(line, format!("non-finite value in column {}", bad + 1)));
        }
        data.extend(values);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::ingest(0, "feature file holds no rows"))?;
    FeatureMatrix::new(rows, cols, data)
}

/// Writes an FVEC file; the four reserved header bytes are zero.
pub fn write_fvec(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let rows = u32::try_from(m.rows).map_err(|_| Error::invalid("too many rows for FVEC"))?;
    let cols = u32::try_from(m.cols).map_err(|_| Error::invalid("too many columns for FVEC"))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FVEC_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    for x in &m.data {
        w.write_all(&(*x as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub const METRICS_HEADER: [&str; 9] = [
    "age",
    "io_snr",
    "io_snr_se",
    "r_snr",
    "r_snr_se",
    "fd_accuracy",
    "fd_accuracy_se",
    "fc_accuracy",
    "fc_accuracy_se",
];

/// One row per probed age; values use the shortest exact representation.
pub fn write_metrics_to(series: &MetricSeries, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER).map_err(csv_error)?;
    for (k, age) in series.ages.iter().enumerate() {
        let row = [
            age.to_string(),
            format!("{:?}", series.io_snr[k]),
            format!("{:?}", series.io_snr_se[k]),
            format!("{:?}", series.r_snr[k]),
            format!("{:?}", series.r_snr_se[k]),
            format!("{:?}", series.fd_accuracy[k]),
            format!("{:?}", series.fd_accuracy_se[k]),
            format!("{:?}", series.fc_accuracy[k]),
            format!("{:?}", series.fc_accuracy_se[k]),
        ];
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(series: &MetricSeries, path: impl AsRef<Path>) -> Result<()> {
    write_metrics_to(series, BufWriter::new(File::create(path)?))
}

/// A numeric CSV table with named columns, as used for charting.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// Column-major values; non-numeric cells are NaN.
    pub values: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.values[i].as_slice())
    }
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(File::open(path)?);
    let columns: Vec<String> = r.headers().map_err(csv_error)?.iter().map(|s| s.trim().to_string()).collect();
    let mut values = vec![Vec::new(); columns.len()];
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        for (col, cell) in values.iter_mut().zip(rec.iter()) {
            col.push(cell.trim().parse::<f64>().unwrap_or(f64::NAN));
        }
    }
    Ok(Table { columns, values })
}
