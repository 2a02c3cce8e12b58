use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ingest::parse_date;
use super::transform::{encode_cyclic, mad_outlier_mask, standardize_named, ColumnScaling};
use crate::error::{Error, Result};
use crate::io;

pub const DAY_OF_YEAR_PERIOD: f64 = 365.25;
pub const DEFAULT_MAD_CUTOFF: f64 = 5.0;
/// Rows with a larger masked share are left out of regression training.
pub const MAX_MASKED_FRACTION: f64 = 0.5;

fn default_mad_cutoff() -> f64 {
    DEFAULT_MAD_CUTOFF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicColumn {
    pub column: String,
    pub period: f64,
}

/// Which environment columns to use and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    #[serde(default = "default_mad_cutoff")]
    pub mad_cutoff: f64,
    #[serde(default)]
    pub cyclic: Vec<CyclicColumn>,
    #[serde(default)]
    pub drop: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            mad_cutoff: DEFAULT_MAD_CUTOFF,
            cyclic: Vec::new(),
            drop: Vec::new(),
        }
    }
}

impl FeatureConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&io::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mad_cutoff > 0.0) {
            return Err(Error::InvalidInput("mad_cutoff must be positive".into()));
        }
        if let Some(c) = self.cyclic.iter().find(|c| !(c.period > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "cyclic column `{}` needs a positive period",
                c.column
            )));
        }
        Ok(())
    }
}

/// How a model input column is derived from raw readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Linear { source: String },
    CyclicCos { source: String, period: f64 },
    CyclicSin { source: String, period: f64 },
    DayOfYearCos,
    DayOfYearSin,
}

impl ColumnKind {
    fn source(&self) -> Option<&str> {
        match self {
            ColumnKind::Linear { source }
            | ColumnKind::CyclicCos { source, .. }
            | ColumnKind::CyclicSin { source, .. } => Some(source),
            ColumnKind::DayOfYearCos | ColumnKind::DayOfYearSin => None,
        }
    }

    /// Raw (pre-standardization) value of this column for one reading set.
    fn raw_value(&self, date: NaiveDate, readings: &BTreeMap<String, f64>) -> Option<f64> {
        let doy = f64::from(date.ordinal0());
        match self {
            ColumnKind::Linear { source } => readings.get(source).copied(),
            ColumnKind::CyclicCos { source, period } => {
                readings.get(source).map(|&x| encode_cyclic(x, *period).0)
            }
            ColumnKind::CyclicSin { source, period } => {
                readings.get(source).map(|&x| encode_cyclic(x, *period).1)
            }
            ColumnKind::DayOfYearCos => Some(encode_cyclic(doy, DAY_OF_YEAR_PERIOD).0),
            ColumnKind::DayOfYearSin => Some(encode_cyclic(doy, DAY_OF_YEAR_PERIOD).1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
    pub scaling: ColumnScaling,
}

/// Maps raw environment readings to the standardized model inputs, using the
/// scaling learned when the table was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub columns: Vec<FeatureColumn>,
}

impl FeatureEncoder {
    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Raw reading names this encoder understands.
    pub fn expected_readings(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .columns
            .iter()
            .filter_map(|c| c.kind.source())
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Standardizes one day's readings. Absent readings are imputed with the
    /// training mean (0 after standardization).
    pub fn encode(&self, date: NaiveDate, readings: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        let expected = self.expected_readings();
        if let Some(unknown) = readings.keys().find(|k| !expected.contains(k)) {
            return Err(Error::UnknownColumn {
                name: unknown.clone(),
                available: expected.join(", "),
            });
        }
        Ok(self
            .columns
            .iter()
            .map(|c| {
                c.kind
                    .raw_value(date, readings)
                    .filter(|x| x.is_finite())
                    .map_or(0.0, |x| c.scaling.apply(x))
            })
            .collect())
    }
}

/// Standardized daily environment features.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentTable {
    dates: Vec<NaiveDate>,
    features: DMatrix<f64>,
    /// Row-major `T × D`.
    missing: Vec<bool>,
    encoder: FeatureEncoder,
    mad_cutoff: f64,
    dropped: Vec<String>,
}

/// One raw daily column before masking and standardization.
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Option<f64>>,
    pub outlier_screen: bool,
}

impl EnvironmentTable {
    /// Masks outliers, standardizes and stacks raw daily columns. Columns
    /// that cannot be standardized are dropped with a warning.
    pub fn assemble(dates: Vec<NaiveDate>, raw: Vec<RawColumn>, mad_cutoff: f64) -> Result<Self> {
        let n = dates.len();
        let mut columns = Vec::new();
        let mut values = Vec::new();
        let mut masks = Vec::new();
        let mut dropped = Vec::new();
        for col in raw {
            if col.values.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column `{}` has {} values for {n} dates",
                    col.name,
                    col.values.len()
                )));
            }
            let outliers = if col.outlier_screen && col.values.iter().any(Option::is_some) {
                mad_outlier_mask(&col.values, mad_cutoff)?
            } else {
                vec![false; n]
            };
            match standardize_named(&col.name, &col.values, &outliers) {
                Ok((z, scaling)) => {
                    let missing: Vec<bool> = col
                        .values
                        .iter()
                        .zip(&outliers)
                        .map(|(x, &o)| o || x.is_none())
                        .collect();
                    columns.push(FeatureColumn {
                        name: col.name,
                        kind: col.kind,
                        scaling,
                    });
                    values.push(z);
                    masks.push(missing);
                }
                Err(e @ (Error::ZeroVariance { .. } | Error::InsufficientData { .. })) => {
                    log::warn!("dropping feature: {e}");
                    dropped.push(col.name);
                }
                Err(e) => return Err(e),
            }
        }
        let d = columns.len();
        let features = DMatrix::from_fn(n, d, |t, j| values[j][t]);
        let missing = (0..n)
            .flat_map(|t| masks.iter().map(move |m| m[t]))
            .collect();
        Ok(Self {
            dates,
            features,
            missing,
            encoder: FeatureEncoder { columns },
            mad_cutoff,
            dropped,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.encoder.feature_names()
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn mad_cutoff(&self) -> f64 {
        self.mad_cutoff
    }

    /// Names of configured columns that were dropped during standardization.
    pub fn dropped_features(&self) -> &[String] {
        &self.dropped
    }

    pub fn is_missing(&self, t: usize, j: usize) -> bool {
        self.missing[t * self.n_features() + j]
    }

    pub fn masked_fraction(&self, t: usize) -> f64 {
        let d = self.n_features();
        if d == 0 {
            return 0.0;
        }
        (0..d).filter(|&j| self.is_missing(t, j)).count() as f64 / d as f64
    }

    /// Whether each row is complete enough to train a regressor on.
    pub fn trainable_rows(&self) -> Vec<bool> {
        (0..self.n_rows())
            .map(|t| self.masked_fraction(t) <= MAX_MASKED_FRACTION)
            .collect()
    }

    /// Feature rows for the given indices.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.n_features(), |i, j| {
            self.features[(rows[i], j)]
        })
    }

    /// Writes the standardized table; masked cells are left empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = std::iter::once("date".to_string()).chain(self.feature_names());
        let rows = (0..self.n_rows()).map(|t| {
            std::iter::once(self.dates[t].to_string())
                .chain((0..self.n_features()).map(|j| {
                    if self.is_missing(t, j) {
                        String::new()
                    } else {
                        io::fmt_f64(self.features[(t, j)])
                    }
                }))
                .collect::<Vec<_>>()
        });
        io::write_atomic(path, &io::csv_bytes(header, rows)?)
    }
}

fn parse_value(field: &str) -> std::result::Result<Option<f64>, String> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    f.parse::<f64>()
        .map(|x| x.is_finite().then_some(x))
        .map_err(|_| format!("`{f}` is not a number"))
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    sum_sin: f64,
    n: u32,
}

/// Reads an environment CSV and builds the standardized daily feature table:
/// sub-daily rows are averaged per calendar day, linear columns are
/// outlier-masked by MAD and standardized, cyclic columns are encoded as a
/// cos/sin pair and standardized, and a day-of-year cos/sin pair is appended.
/// Every calendar day between the first and last date gets a row; days
/// without readings are fully masked.
pub fn build_feature_table(path: &Path, config: &FeatureConfig) -> Result<EnvironmentTable> {
    config.validate()?;
    let text = io::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let date_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("date"))
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            message: "missing `date` column".into(),
        })?;
    let available: Vec<&String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != date_col)
        .map(|(_, h)| h)
        .collect();
    let unknown = config
        .drop
        .iter()
        .chain(config.cyclic.iter().map(|c| &c.column))
        .find(|name| !available.contains(name));
    if let Some(name) = unknown {
        return Err(Error::UnknownColumn {
            name: name.clone(),
            available: available
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        });
    }
    let periods: HashMap<&str, f64> = config
        .cyclic
        .iter()
        .map(|c| (c.column.as_str(), c.period))
        .collect();
    let used: Vec<(usize, &String)> = header
        .iter()
        .enumerate()
        .filter(|&(i, h)| i != date_col && !config.drop.contains(h))
        .collect();

    let mut days: BTreeMap<NaiveDate, Vec<Accumulator>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let date = parse_date(&record[date_col]).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("unparseable date `{}`", &record[date_col]),
        })?;
        let acc = days
            .entry(date)
            .or_insert_with(|| vec![Accumulator::default(); used.len()]);
        for (slot, &(i, name)) in used.iter().enumerate() {
            let value = parse_value(record.get(i).unwrap_or("")).map_err(|m| Error::Parse {
                path: path.to_path_buf(),
                row,
                message: format!("column `{name}`: {m}"),
            })?;
            if let Some(x) = value {
                let a = &mut acc[slot];
                if let Some(&p) = periods.get(name.as_str()) {
                    let (c, s) = encode_cyclic(x, p);
                    a.sum += c;
                    a.sum_sin += s;
                } else {
                    a.sum += x;
                }
                a.n += 1;
            }
        }
    }
    let (Some(&first), Some(&last)) = (days.keys().next(), days.keys().next_back()) else {
        return Err(Error::InvalidInput(format!(
            "{} has no data rows",
            path.display()
        )));
    };
    let dates: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();

    let daily = |slot: usize, pick: fn(&Accumulator) -> f64| -> Vec<Option<f64>> {
        dates
            .iter()
            .map(|d| {
                days.get(d)
                    .map(|acc| &acc[slot])
                    .filter(|a| a.n > 0)
                    .map(|a| pick(a) / f64::from(a.n))
            })
            .collect()
    };

    let mut raw = Vec::new();
    for (slot, &(_, name)) in used.iter().enumerate() {
        match periods.get(name.as_str()) {
            Some(&period) => {
                raw.push(RawColumn {
                    name: format!("{name}_cos"),
                    kind: ColumnKind::CyclicCos {
                        source: name.clone(),
                        period,
                    },
                    values: daily(slot, |a| a.sum),
                    outlier_screen: false,
                });
                raw.push(RawColumn {
                    name: format!("{name}_sin"),
                    kind: ColumnKind::CyclicSin {
                        source: name.clone(),
                        period,
                    },
                    values: daily(slot, |a| a.sum_sin),
                    outlier_screen: false,
                });
            }
            None => raw.push(RawColumn {
                name: name.clone(),
                kind: ColumnKind::Linear {
                    source: name.clone(),
                },
                values: daily(slot, |a| a.sum),
                outlier_screen: true,
            }),
        }
    }
    raw.extend(day_of_year_columns(&dates));
    EnvironmentTable::assemble(dates, raw, config.mad_cutoff)
}

pub(crate) fn day_of_year_columns(dates: &[NaiveDate]) -> [RawColumn; 2] {
    let enc: Vec<(f64, f64)> = dates
        .iter()
        .map(|d| encode_cyclic(f64::from(d.ordinal0()), DAY_OF_YEAR_PERIOD))
        .collect();
    [
        RawColumn {
            name: "day_of_year_cos".into(),
            kind: ColumnKind::DayOfYearCos,
            values: enc.iter().map(|e| Some(e.0)).collect(),
            outlier_screen: false,
        },
        RawColumn {
            name: "day_of_year_sin".into(),
            kind: ColumnKind::DayOfYearSin,
            values: enc.iter().map(|e| Some(e.1)).collect(),
            outlier_screen: false,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn eighteen_variables_with_one_cyclic_give_21_columns() {
        let dir = tempfile::tempdir().unwrap();
        let names: Vec<String> = (0..18).map(|i| format!("v{i}")).collect();
        let mut text = format!("date,{}\n", names.join(","));
        let start: NaiveDate = "2012-01-01".parse().unwrap();
        for t in 0..60u64 {
            let d = start + chrono::Days::new(t);
            let vals: Vec<String> = (0..18)
                .map(|i| format!("{}", ((t * 7 + i * 13) % 29) as f64 + i as f64))
                .collect();
            writeln!(text, "{d},{}", vals.join(",")).unwrap();
        }
        let p = write(&dir, "env.csv", &text);
        let cfg = FeatureConfig {
            cyclic: vec![CyclicColumn {
                column: "v3".into(),
                period: 360.0,
            }],
            ..Default::default()
        };
        let table = build_feature_table(&p, &cfg).unwrap();
        assert_eq!(table.n_features(), 21);
        assert!(table.feature_names().contains(&"v3_cos".to_string()));
        assert!(table
            .feature_names()
            .ends_with(&["day_of_year_cos".to_string(), "day_of_year_sin".to_string()]));
    }

    #[test]
    fn sub_daily_readings_are_averaged_and_gaps_masked() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "env.csv",
            "date,temp\n2012-03-01T01:00:00,4.0\n2012-03-01T13:00:00,6.0\n2012-03-02,7.0\n2012-03-04,1.0\n",
        );
        let t = build_feature_table(&p, &FeatureConfig::default()).unwrap();
        assert_eq!(t.n_rows(), 4);
        let scaling = t.encoder().columns[0].scaling;
        // daily values 5, 7, (gap), 1
        assert!((scaling.mean - 13.0 / 3.0).abs() < 1e-12);
        assert!((scaling.invert(t.features()[(0, 0)]) - 5.0).abs() < 1e-12);
        assert!(t.is_missing(2, 0));
        assert_eq!(t.features()[(2, 0)], 0.0);
        assert!(!t.is_missing(2, 1));
    }

    #[test]
    fn unknown_config_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "env.csv",
            "date,temp\n2012-03-01,4.0\n2012-03-02,5.0\n",
        );
        let cfg = FeatureConfig {
            drop: vec!["salinity".into()],
            ..Default::default()
        };
        let e = build_feature_table(&p, &cfg).unwrap_err();
        assert!(matches!(e, Error::UnknownColumn { .. }));
        assert!(e.to_string().contains("temp"));
    }

    #[test]
    fn constant_feature_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "env.csv",
            "date,temp,flat\n2012-03-01,4.0,1\n2012-03-02,5.0,1\n2012-03-03,NaN,1\n2012-03-04,,1\n",
        );
        let t = build_feature_table(&p, &FeatureConfig::default()).unwrap();
        assert_eq!(t.dropped_features(), &["flat".to_string()]);
        assert_eq!(t.feature_names()[0], "temp");
        assert!(t.is_missing(2, 0) && t.is_missing(3, 0));
    }

    #[test]
    fn outliers_are_masked_and_unmasked_cells_standardized() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("date,temp\n");
        let start: NaiveDate = "2012-01-01".parse().unwrap();
        for t in 0..40u64 {
            let v = if t == 17 { 1e6 } else { (t % 5) as f64 };
            writeln!(text, "{},{v}", start + chrono::Days::new(t)).unwrap();
        }
        let p = write(&dir, "env.csv", &text);
        let t = build_feature_table(&p, &FeatureConfig::default()).unwrap();
        assert!(t.is_missing(17, 0));
        let kept: Vec<f64> = (0..40)
            .filter(|&r| !t.is_missing(r, 0))
            .map(|r| t.features()[(r, 0)])
            .collect();
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let sd = (kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / kept.len() as f64).sqrt();
        assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encoder_reproduces_table_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "env.csv",
            "date,temp,wind_dir\n2012-03-01,4.0,10\n2012-03-02,6.5,200\n2012-03-03,5.0,95\n",
        );
        let cfg = FeatureConfig {
            cyclic: vec![CyclicColumn {
                column: "wind_dir".into(),
                period: 360.0,
            }],
            ..Default::default()
        };
        let t = build_feature_table(&p, &cfg).unwrap();
        let readings = BTreeMap::from([("temp".to_string(), 6.5), ("wind_dir".to_string(), 200.0)]);
        let x = t.encoder().encode(t.dates()[1], &readings).unwrap();
        for (j, v) in x.iter().enumerate() {
            assert!((v - t.features()[(1, j)]).abs() < 1e-12);
        }
        let bad = BTreeMap::from([("salinity".to_string(), 1.0)]);
        let e = t.encoder().encode(t.dates()[1], &bad).unwrap_err();
        assert!(e.to_string().contains("temp, wind_dir"));
    }
}
