//! Consumer-price deflators and the per-year tax calendar.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tax::{deflate_system, scale_system, TaxSystem};

pub const FIRST_YEAR: i32 = 1981;
pub const LAST_YEAR: i32 = 1993;
pub const BASE_YEAR: i32 = 1986;
pub const REFORM_YEAR: i32 = 1987;

pub fn sample_years() -> impl Iterator<Item = i32> + Clone {
    FIRST_YEAR..=LAST_YEAR
}

/// Price index by year; values are relative and rescaled so 1986 = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceIndex {
    index: BTreeMap<i32, f64>,
}

#[derive(Deserialize)]
struct DeflatorRow {
    year: i32,
    index: f64,
}

impl PriceIndex {
    /// Constant annual inflation of `rate` around 1986 over 1981–1993.
    pub fn constant_inflation(rate: f64) -> Self {
        let index = sample_years()
            .map(|y| (y, (1.0 + rate).powi(y - BASE_YEAR)))
            .collect();
        PriceIndex { index }
    }

    /// The shipped default: 2.0% a year, matching the statutory 1986→1987 adjustment.
    pub fn default_table() -> Self {
        Self::constant_inflation(0.02)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i32, f64)>) -> Result<Self> {
        let index: BTreeMap<i32, f64> = pairs.into_iter().collect();
        for (y, v) in &index {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Config(format!(
                    "deflator for {y} must be > 0, got {v}"
                )));
            }
        }
        for y in sample_years() {
            if !index.contains_key(&y) {
                return Err(Error::Config(format!("deflator table is missing year {y}")));
            }
        }
        let base = index[&BASE_YEAR];
        Ok(PriceIndex {
            index: index.into_iter().map(|(y, v)| (y, v / base)).collect(),
        })
    }

    /// Reads a `year,index` CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::Csv(e),
        })?;
        let mut pairs = Vec::new();
        for (i, row) in rdr.deserialize::<DeflatorRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: path.into(),
                row: i as u64 + 2,
                message: e.to_string(),
            })?;
            pairs.push((row.year, row.index));
        }
        Self::from_pairs(pairs)
    }

    /// Price level of `year` relative to 1986.
    pub fn level(&self, year: i32) -> f64 {
        *self
            .index
            .get(&year)
            .unwrap_or_else(|| panic!("no deflator for year {year}"))
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        self.index.get(&year).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.index.iter().map(|(y, v)| (*y, *v))
    }
}

impl Default for PriceIndex {
    fn default() -> Self {
        Self::default_table()
    }
}

/// Tax law for every sample year.
///
/// Years up to 1986 use the 1986 law and later years the 1987 law; DKK
/// parameters are indexed to each year's price level relative to the law's
/// base year. Explicit per-year systems override the indexed ones.
#[derive(Debug, Clone)]
pub struct TaxCalendar {
    pub sys86: TaxSystem,
    pub sys87: TaxSystem,
    pub prices: PriceIndex,
    overrides: BTreeMap<i32, TaxSystem>,
}

impl TaxCalendar {
    pub fn new(sys86: TaxSystem, sys87: TaxSystem, prices: PriceIndex) -> Self {
        TaxCalendar {
            sys86,
            sys87,
            prices,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, year: i32, sys: TaxSystem) -> Self {
        self.overrides.insert(year, sys);
        self
    }

    /// Nominal tax system in force in `year`.
    pub fn system(&self, year: i32) -> TaxSystem {
        if let Some(sys) = self.overrides.get(&year) {
            return sys.clone();
        }
        let (base, base_year) = if year < REFORM_YEAR {
            (&self.sys86, BASE_YEAR)
        } else {
            (&self.sys87, REFORM_YEAR)
        };
        let factor = self.prices.level(year) / self.prices.level(base_year);
        let mut sys = scale_system(base, factor).expect("price levels are positive");
        sys.year = year.to_string();
        sys
    }

    /// The 1987 law expressed in 1986 prices with the given deflation factor.
    pub fn counterfactual_1987(&self, deflation_factor: f64) -> Result<TaxSystem> {
        let mut sys = deflate_system(&self.sys87, deflation_factor)?;
        sys.year = "1987adj".into();
        Ok(sys)
    }
}

impl Default for TaxCalendar {
    fn default() -> Self {
        TaxCalendar::new(
            TaxSystem::y1986(),
            TaxSystem::y1987(),
            PriceIndex::default(),
        )
    }
}
