//! File formats shared by the library, the CLI and the FFI layer.
//!
//! All CSV files are comma separated with a header row, ISO-8601 dates and
//! dot decimals. Errors carry the 1-based line number in the file, counting
//! the header as line 1.
//!
//! Model files are JSON:
//!
//! ```json
//! {
//!   "regimes": [
//!     {"mu": 0.1, "sigma": 0.2, "alpha": 3.0, "beta": 3.0},
//!     {"mu": -0.1, "sigma": 0.4, "alpha": 2.0, "beta": 2.5}
//!   ],
//!   "lambda12": 5.0,
//!   "lambda21": 2.0,
//!   "family": "gamma",
//!   "s0": 20.0,
//!   "r": 0.04
//! }
//! ```
//!
//! `family` is one of `identity`, `gamma`, `inverse_gaussian`. Unknown
//! fields are rejected.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::calibration::{Quote, QuoteTable};
use crate::cos::{ContractSpec, OptionKind};
use crate::error::{Error, Result};
use crate::estimation::{ParamBounds, ReturnSeries};
use crate::regime::SwitchingModel;

/// Replacement for nonpositive prices when none is given.
pub const DEFAULT_CLIP_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceData {
    pub dates: Vec<NaiveDate>,
    /// Prices after clipping.
    pub prices: Vec<f64>,
    /// Number of nonpositive prices that were replaced by the floor.
    pub clipped: usize,
    pub series: ReturnSeries,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a headed CSV, checks the header and hands each record with its
/// line number to `row`.
fn read_csv<R: Read>(
    reader: R,
    header: &[&str],
    mut row: impl FnMut(usize, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let got = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if got.is_empty() {
        return Err(parse_err(1, "empty file"));
    }
    if got.len() != header.len() || got.iter().zip(header).any(|(a, b)| !a.eq_ignore_ascii_case(b)) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        if !more {
            return Ok(());
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        row(line, &rec)?;
    }
}

fn field_f64(rec: &csv::StringRecord, i: usize, name: &str, line: usize) -> Result<f64> {
    let s = &rec[i];
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("{name} `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name} must be finite")));
    }
    Ok(v)
}

fn field_date(rec: &csv::StringRecord, i: usize, line: usize) -> Result<NaiveDate> {
    let s = &rec[i];
    s.parse()
        .map_err(|_| parse_err(line, format!("`{s}` is not an ISO-8601 date")))
}

fn field_kind(rec: &csv::StringRecord, i: usize, line: usize) -> Result<OptionKind> {
    let s = &rec[i];
    s.parse()
        .map_err(|_| parse_err(line, format!("kind `{s}` is neither call nor put")))
}

/// Reads a `date,price` series and converts it to log-returns.
pub fn read_prices<R: Read>(reader: R, clip_floor: Option<f64>) -> Result<PriceData> {
    let floor = clip_floor.unwrap_or(DEFAULT_CLIP_FLOOR);
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidParameter {
            name: "clip_floor",
            value: floor,
            constraint: "must be finite and > 0",
        });
    }
    let (mut dates, mut prices, mut clipped) = (Vec::new(), Vec::new(), 0);
    read_csv(reader, &["date", "price"], |line, rec| {
        let date = field_date(rec, 0, line)?;
        if dates.last().is_some_and(|prev| *prev >= date) {
            return Err(parse_err(line, format!("date {date} does not follow the previous row")));
        }
        let mut p = field_f64(rec, 1, "price", line)?;
        if p <= 0.0 {
            p = floor;
            clipped += 1;
        }
        dates.push(date);
        prices.push(p);
        Ok(())
    })?;
    if prices.len() < 2 {
        return Err(parse_err(
            prices.len() + 1,
            format!("need at least 2 price rows, found {}", prices.len()),
        ));
    }
    let series = ReturnSeries::from_prices(&dates, &prices)?;
    Ok(PriceData {
        dates,
        prices,
        clipped,
        series,
    })
}

pub fn load_prices(path: impl AsRef<Path>, clip_floor: Option<f64>) -> Result<PriceData> {
    read_prices(File::open(path)?, clip_floor)
}

/// Reads a `maturity,strike,kind,mid` quote table.
pub fn read_quotes<R: Read>(reader: R) -> Result<QuoteTable> {
    let (mut rows, mut lines) = (Vec::new(), Vec::new());
    read_csv(reader, &["maturity", "strike", "kind", "mid"], |line, rec| {
        rows.push(Quote {
            maturity: field_f64(rec, 0, "maturity", line)?,
            strike: field_f64(rec, 1, "strike", line)?,
            kind: field_kind(rec, 2, line)?,
            mid: field_f64(rec, 3, "mid", line)?,
        });
        lines.push(line);
        Ok(())
    })?;
    if rows.is_empty() {
        return Err(parse_err(2, "no quotes"));
    }
    // report file lines rather than table rows
    QuoteTable::new(rows).map_err(|e| match e {
        Error::Parse { line, message } => parse_err(lines[line - 1], message),
        other => other,
    })
}

pub fn load_quotes(path: impl AsRef<Path>) -> Result<QuoteTable> {
    read_quotes(File::open(path)?)
}

/// Reads a `maturity,strike,kind` contract grid.
pub fn read_contracts<R: Read>(reader: R) -> Result<Vec<ContractSpec>> {
    let mut out = Vec::new();
    read_csv(reader, &["maturity", "strike", "kind"], |line, rec| {
        let (t, k) = (field_f64(rec, 0, "maturity", line)?, field_f64(rec, 1, "strike", line)?);
        let c = ContractSpec::new(k, t, field_kind(rec, 2, line)?).map_err(|e| parse_err(line, e.to_string()))?;
        out.push(c);
        Ok(())
    })?;
    if out.is_empty() {
        return Err(parse_err(2, "no contracts"));
    }
    Ok(out)
}

pub fn load_contracts(path: impl AsRef<Path>) -> Result<Vec<ContractSpec>> {
    read_contracts(File::open(path)?)
}

/// Reads `start,end` rows of inclusive date windows.
pub fn read_windows<R: Read>(reader: R) -> Result<Vec<(NaiveDate, NaiveDate)>> {
    let mut out = Vec::new();
    read_csv(reader, &["start", "end"], |line, rec| {
        let (a, b) = (field_date(rec, 0, line)?, field_date(rec, 1, line)?);
        if a > b {
            return Err(parse_err(line, format!("window start {a} is after its end {b}")));
        }
        out.push((a, b));
        Ok(())
    })?;
    if out.is_empty() {
        return Err(parse_err(2, "no windows"));
    }
    Ok(out)
}

pub fn load_windows(path: impl AsRef<Path>) -> Result<Vec<(NaiveDate, NaiveDate)>> {
    read_windows(File::open(path)?)
}

/// Parses and validates a model document, including the parameter bounds.
pub fn model_from_json(text: &str, bounds: &ParamBounds) -> Result<SwitchingModel> {
    let model: SwitchingModel = serde_json::from_str(text)?;
    model.validate()?;
    for (j, p) in model.regimes.iter().enumerate() {
        if !bounds.contains(p) {
            return Err(Error::Invalid(format!(
                "regime {} parameters {p:?} lie outside the bounds",
                j + 1
            )));
        }
    }
    Ok(model)
}

pub fn model_to_json(model: &SwitchingModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SwitchingModel> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    model_from_json(&text, &ParamBounds::default())
}

pub fn save_model(path: impl AsRef<Path>, model: &SwitchingModel) -> Result<()> {
    write_json(path, model)
}

/// Writes any serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
