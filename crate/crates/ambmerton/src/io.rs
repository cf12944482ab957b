//! Price files in, strategy paths out.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ambmerton_core::backtest::{PriceSeries, StrategyPath};
use chrono::NaiveDate;

use crate::error::CliError;

pub const DATE_FORMAT: &str = "%Y-%m-%d";
/// Significant digits of every number written to CSV.
pub const SIG_DIGITS: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Invalid(#[from] ambmerton_core::Error),
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Invalid(inner) => inner.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

/// `x` rounded to 12 significant digits; positional for exponents in
/// `[-5, 15)`, scientific otherwise, trailing zeros dropped.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if neg { "-" } else { "" };
    if !(-5..15).contains(&exp) {
        let m = trim_fraction(mant);
        return format!("{m}e{exp}");
    }
    let body = if exp >= 0 {
        let split = exp as usize + 1;
        if split >= digits.len() {
            format!("{digits}{}", "0".repeat(split - digits.len()))
        } else {
            trim_fraction(&format!("{}.{}", &digits[..split], &digits[split..]))
        }
    } else {
        trim_fraction(&format!("0.{}{digits}", "0".repeat((-exp - 1) as usize)))
    };
    format!("{sign}{body}")
}

fn trim_fraction(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Reads `date,price` rows (ISO dates) after a header line.
pub fn read_prices<R: Read>(reader: R) -> Result<PriceSeries, LoadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_error(&e))?.clone();
    if header.len() != 2 || &header[0] != "date" || &header[1] != "price" {
        return Err(LoadError::Parse {
            line: 1,
            message: format!("expected header `date,price`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT).map_err(|e| LoadError::Parse {
            line,
            message: format!("bad date `{}`: {e}", &rec[0]),
        })?;
        let price: f64 = rec[1].parse().map_err(|e| LoadError::Parse {
            line,
            message: format!("bad price `{}`: {e}", &rec[1]),
        })?;
        dates.push(date);
        prices.push(price);
    }
    Ok(PriceSeries::new(dates, prices)?)
}

fn parse_error(e: &csv::Error) -> LoadError {
    LoadError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

pub fn load_prices(path: &Path) -> Result<PriceSeries, LoadError> {
    let f = File::open(path)?;
    read_prices(BufReader::new(f))
}

pub fn write_prices<W: Write>(series: &PriceSeries, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "price"])?;
    for (d, p) in series.dates().iter().zip(series.prices()) {
        w.write_record([d.format(DATE_FORMAT).to_string(), format_number(*p)])?;
    }
    w.flush()?;
    Ok(())
}

/// Strategy path as CSV; columns follow [`StrategyPath::columns`].
pub fn export_csv<W: Write>(path: &StrategyPath, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(path.columns())?;
    for row in &path.rows {
        let mut rec = vec![
            row.date.format(DATE_FORMAT).to_string(),
            format_number(row.sigma_hat),
            format_number(row.y),
            format_number(row.kappa_learning),
        ];
        rec.extend(row.kappa_naive.iter().map(|k| format_number(*k)));
        if path.has_ambiguity {
            rec.push(row.kappa_ambiguity.map(format_number).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv_file(path: &StrategyPath, file: &Path) -> Result<(), CliError> {
    let f = File::create(file).map_err(|e| CliError::io(format!("{}: {e}", file.display())))?;
    export_csv(path, BufWriter::new(f)).map_err(CliError::io)
}
