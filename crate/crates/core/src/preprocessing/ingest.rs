//! Count-table ingestion.
//!
//! Two layouts are accepted: long form with header `date,taxon,count`, one
//! row per (date, taxon) tally, and wide form with header
//! `date,<taxon1>,...,<taxonV>`, one row per date.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;

use crate::corpus::ObservationCorpus;
use crate::error::{Error, Result};
use crate::io;

pub(crate) fn parse_date(field: &str) -> Option<NaiveDate> {
    let field = field.trim();
    let head = field.get(..10).unwrap_or(field);
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

fn parse_count(field: &str) -> std::result::Result<u32, String> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(0);
    }
    if let Ok(n) = field.parse::<i64>() {
        if n < 0 {
            return Err(format!("negative count {n}"));
        }
        return u32::try_from(n).map_err(|_| format!("count {n} is too large"));
    }
    match field.parse::<f64>() {
        Ok(x) if x < 0.0 => Err(format!("negative count {field}")),
        Ok(x) if x.fract() == 0.0 && x <= f64::from(u32::MAX) => Ok(x as u32),
        _ => Err(format!("`{field}` is not a non-negative integer count")),
    }
}

/// Reads a count CSV in long or wide form and aggregates it to one row per
/// day. Days whose counts are all zero are dropped with a warning.
pub fn ingest_counts_csv(path: &Path) -> Result<ObservationCorpus> {
    let text = io::read_to_string(path)?;
    ingest_counts_str(&text, path)
}

pub(crate) fn ingest_counts_str(text: &str, path: &Path) -> Result<ObservationCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if lower.first().map(String::as_str) != Some("date") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: "first column must be `date`".into(),
        });
    }
    let err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut taxa: Vec<String> = Vec::new();
    let mut by_day: BTreeMap<NaiveDate, Vec<u64>> = BTreeMap::new();

    if lower == ["date", "taxon", "count"] {
        let mut taxon_index: HashMap<String, usize> = HashMap::new();
        for record in reader.records() {
            let record = record?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            let date = parse_date(&record[0])
                .ok_or_else(|| err(row, format!("unparseable date `{}`", &record[0])))?;
            let name = record[1].to_string();
            if name.is_empty() {
                return Err(err(row, "empty taxon name".into()));
            }
            let count = parse_count(&record[2]).map_err(|m| err(row, m))?;
            let idx = *taxon_index.entry(name.clone()).or_insert_with(|| {
                taxa.push(name);
                taxa.len() - 1
            });
            let day = by_day.entry(date).or_default();
            if day.len() <= idx {
                day.resize(idx + 1, 0);
            }
            day[idx] += u64::from(count);
        }
    } else {
        taxa = header[1..].to_vec();
        let mut seen = HashMap::new();
        for (i, t) in taxa.iter().enumerate() {
            if t.is_empty() {
                return Err(err(1, format!("column {} has an empty taxon name", i + 2)));
            }
            if seen.insert(t.clone(), i).is_some() {
                return Err(err(1, format!("duplicate taxon column `{t}`")));
            }
        }
        for record in reader.records() {
            let record = record?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            let date = parse_date(&record[0])
                .ok_or_else(|| err(row, format!("unparseable date `{}`", &record[0])))?;
            let counts = (1..record.len())
                .map(|j| parse_count(&record[j]).map(u64::from))
                .collect::<std::result::Result<Vec<u64>, String>>()
                .map_err(|m| err(row, m))?;
            if by_day.insert(date, counts).is_some() {
                return Err(err(
                    row,
                    format!("duplicate (date, taxon) entries for {date}"),
                ));
            }
        }
    }

    let v = taxa.len();
    if v == 0 {
        return Err(Error::EmptyCorpus(format!(
            "{} names no taxa",
            path.display()
        )));
    }
    let mut dates = Vec::with_capacity(by_day.len());
    let mut rows = Vec::with_capacity(by_day.len());
    for (date, mut counts) in by_day {
        counts.resize(v, 0);
        if counts.iter().all(|&c| c == 0) {
            log::warn!("dropping {date}: no observations");
            continue;
        }
        let row = counts
            .into_iter()
            .map(|c| {
                u32::try_from(c)
                    .map_err(|_| Error::InvalidInput(format!("count on {date} overflows u32")))
            })
            .collect::<Result<Vec<u32>>>()?;
        dates.push(date);
        rows.push(row);
    }
    if dates.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "{} contains no days with observations",
            path.display()
        )));
    }
    ObservationCorpus::new(dates, taxa, rows)
}

/// Writes a corpus in wide form.
pub fn write_counts_csv(corpus: &ObservationCorpus, path: &Path) -> Result<()> {
    let header = std::iter::once("date".to_string()).chain(corpus.taxon_names().iter().cloned());
    let rows = (0..corpus.n_days()).map(|t| {
        std::iter::once(corpus.dates()[t].to_string())
            .chain(corpus.row(t).iter().map(|c| c.to_string()))
            .collect::<Vec<_>>()
    });
    io::write_atomic(path, &io::csv_bytes(header, rows)?)
}
