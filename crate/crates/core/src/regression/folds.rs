use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index pairs of dates present in both sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub dates: Vec<NaiveDate>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Pairs up the indices of dates that appear in both sorted lists.
pub fn align(left: &[NaiveDate], right: &[NaiveDate]) -> Result<Alignment> {
    let mut out = Alignment {
        dates: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
    };
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        match left[i].cmp(&right[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.dates.push(left[i]);
                out.left.push(i);
                out.right.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyAlignment);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub year: i32,
    pub test: Vec<usize>,
    pub train: Vec<usize>,
}

/// Leave-one-year-out folds over a list of dates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// One fold per calendar year present in `dates`, testing on that year and
/// training on every other day.
pub fn year_folds(dates: &[NaiveDate]) -> Result<FoldPlan> {
    let mut by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, d) in dates.iter().enumerate() {
        by_year.entry(d.year()).or_default().push(i);
    }
    if by_year.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "leave-one-year-out needs at least two calendar years, found {}",
            by_year.len()
        )));
    }
    let folds = by_year
        .into_iter()
        .map(|(year, test)| {
            let train = (0..dates.len())
                .filter(|&i| dates[i].year() != year)
                .collect();
            Fold { year, test, train }
        })
        .collect();
    Ok(FoldPlan { folds })
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}
