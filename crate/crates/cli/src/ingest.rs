//! Loss files: one value per line, or Fama–French industry portfolio CSV.
//!
//! The Danish fire data is read as published; its inflation adjustment to 1985 values is a
//! property of the dataset, not a transform applied here.

use crate::CliError;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Plain,
    FamaFrench,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "plain" => Ok(Format::Plain),
            "fama_french" => Ok(Format::FamaFrench),
            _ => Err(CliError::Config(format!("format must be plain or fama_french, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestOptions {
    /// Negate values so positive numbers are losses.
    pub negate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    /// Losses in file order.
    Losses(Vec<f64>),
    /// Factor rows in file order (percent units), with the number of rows dropped for sentinels.
    Factors { dates: Vec<String>, rows: Vec<Vec<f64>>, dropped: usize },
}

const SENTINELS: [f64; 2] = [-99.99, -999.0];
const FF_COLUMNS: usize = 48;

pub fn ingest_losses(path: &Path, format: Format, opts: IngestOptions) -> Result<Ingested, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match format {
        Format::Plain => parse_plain(&text, opts).map(Ingested::Losses),
        Format::FamaFrench => parse_fama_french(&text, opts),
    }
}

pub fn parse_plain(text: &str, opts: IngestOptions) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    let mut seen_line = false;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(if opts.negate { -v } else { v }),
            // a single non-numeric first line is a header
            Err(_) if !seen_line => {}
            _ => return Err(CliError::Parse { line: i + 1, msg: format!("not a finite number: {t:?}") }),
        }
        seen_line = true;
    }
    if out.is_empty() {
        return Err(CliError::EmptyData);
    }
    Ok(out)
}

fn is_date(field: &str) -> bool {
    !field.is_empty() && field.bytes().all(|b| b.is_ascii_digit())
}

/// Reads the first table of date-keyed rows; text before it is skipped, and the table ends at
/// the first non-data line after it starts.
pub fn parse_fama_french(text: &str, opts: IngestOptions) -> Result<Ingested, CliError> {
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = 0;
    let mut started = false;
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !is_date(fields[0]) {
            if started {
                break;
            }
            continue;
        }
        started = true;
        if fields.len() != FF_COLUMNS + 1 {
            return Err(CliError::Parse {
                line: i + 1,
                msg: format!("expected date plus {FF_COLUMNS} columns, got {} fields", fields.len()),
            });
        }
        let vals: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Parse { line: i + 1, msg: e.to_string() })?;
        if vals.iter().any(|v| SENTINELS.iter().any(|s| (v - s).abs() < 1e-9)) {
            dropped += 1;
            continue;
        }
        dates.push(fields[0].to_string());
        rows.push(vals.into_iter().map(|v| if opts.negate { -v } else { v }).collect());
    }
    if rows.is_empty() {
        return Err(CliError::EmptyData);
    }
    Ok(Ingested::Factors { dates, rows, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_values() {
        assert_eq!(parse_plain("1.5\n2.0\n", IngestOptions::default()).unwrap(), vec![1.5, 2.0]);
        assert_eq!(parse_plain("loss\n3\n", IngestOptions::default()).unwrap(), vec![3.0]);
        assert!(matches!(parse_plain("1\nx\n", IngestOptions::default()), Err(CliError::Parse { line: 2, .. })));
        assert!(matches!(parse_plain("loss\n", IngestOptions::default()), Err(CliError::EmptyData)));
    }

    fn ff_row(date: &str, v: f64) -> String {
        let mut s = date.to_string();
        for _ in 0..FF_COLUMNS {
            s.push_str(&format!(",{v}"));
        }
        s
    }

    #[test]
    fn fama_french_sentinels() {
        let mut bad = ff_row("19260702", 1.0);
        bad = bad.replacen(",1", ",-99.99", 1);
        let text = format!(
            "Daily returns\n,Agric,Food\n{}\n{}\n{}\n\n Equal weighted\n{}\n",
            ff_row("19260701", 0.5),
            bad,
            ff_row("19260706", -1.0),
            ff_row("19260707", 9.0)
        );
        let Ingested::Factors { dates, rows, dropped } =
            parse_fama_french(&text, IngestOptions { negate: true }).unwrap()
        else {
            panic!()
        };
        assert_eq!(dropped, 1);
        assert_eq!(dates, vec!["19260701", "19260706"]);
        assert_eq!(rows[0][0], -0.5);
        assert_eq!(rows[1][47], 1.0);
    }

    #[test]
    fn fama_french_short_row() {
        assert!(matches!(
            parse_fama_french("19260701,1,2\n", IngestOptions::default()),
            Err(CliError::Parse { line: 1, .. })
        ));
    }
}
