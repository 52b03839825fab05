//! Covariate balance: means, standard deviations and normalized differences.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{Education, Panel, PanelRow};
use crate::prices::BASE_YEAR;

/// Pre-reform covariates, all read from the 1986 row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariate {
    LaborIncome,
    Age,
    Children,
    LowEducation,
    MiddleEducation,
    HighEducation,
    FullTime,
    PrivateSector,
    CapitalIncome,
    Deductions,
    WifeCapitalIncome,
    WifeDeductions,
    WifeLaborIncome,
}

/// Covariates in reporting order.
pub const COVARIATES: [Covariate; 13] = [
    Covariate::LaborIncome,
    Covariate::Age,
    Covariate::Children,
    Covariate::LowEducation,
    Covariate::MiddleEducation,
    Covariate::HighEducation,
    Covariate::FullTime,
    Covariate::PrivateSector,
    Covariate::CapitalIncome,
    Covariate::Deductions,
    Covariate::WifeCapitalIncome,
    Covariate::WifeDeductions,
    Covariate::WifeLaborIncome,
];

impl Covariate {
    pub fn name(&self) -> &'static str {
        match self {
            Covariate::LaborIncome => "labor_income",
            Covariate::Age => "age",
            Covariate::Children => "n_children",
            Covariate::LowEducation => "education_low",
            Covariate::MiddleEducation => "education_middle",
            Covariate::HighEducation => "education_high",
            Covariate::FullTime => "full_time",
            Covariate::PrivateSector => "private_sector",
            Covariate::CapitalIncome => "capital_income",
            Covariate::Deductions => "deductions",
            Covariate::WifeCapitalIncome => "wife_capital_income",
            Covariate::WifeDeductions => "wife_deductions",
            Covariate::WifeLaborIncome => "wife_labor_income",
        }
    }

    pub fn value(&self, row: &PanelRow) -> Option<f64> {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let inc = row.income.as_ref();
        let spouse = inc.and_then(|i| i.spouse.as_ref());
        match self {
            Covariate::LaborIncome => inc.map(|i| i.li),
            Covariate::Age => row.age.map(f64::from),
            Covariate::Children => row.n_children.map(f64::from),
            Covariate::LowEducation => row.education.map(|e| flag(e == Education::Low)),
            Covariate::MiddleEducation => row.education.map(|e| flag(e == Education::Middle)),
            Covariate::HighEducation => row.education.map(|e| flag(e == Education::High)),
            Covariate::FullTime => row.full_time.map(flag),
            Covariate::PrivateSector => row.private_sector.map(flag),
            Covariate::CapitalIncome => inc.map(|i| i.ci),
            Covariate::Deductions => inc.map(|i| i.d),
            Covariate::WifeCapitalIncome => spouse.map(|s| s.ci),
            Covariate::WifeDeductions => spouse.map(|s| s.d),
            Covariate::WifeLaborIncome => spouse.map(|s| s.li),
        }
    }
}

/// `(mean_a - mean_b) / sqrt((sd_a^2 + sd_b^2) / 2)`; `None` when both sds are zero.
pub fn normalized_difference(mean_a: f64, mean_b: f64, sd_a: f64, sd_b: f64) -> Option<f64> {
    let pooled = ((sd_a * sd_a + sd_b * sd_b) / 2.0).sqrt();
    (pooled > 0.0).then(|| (mean_a - mean_b) / pooled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub covariate: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// `None` when the covariate is constant in both arms.
    pub normalized_difference: Option<f64>,
}

/// A two-arm comparison such as treated vs control.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTable {
    pub name: String,
    pub arm_a: String,
    pub arm_b: String,
    pub rows: Vec<BalanceRow>,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One balance row per named covariate from raw per-arm values.
pub fn balance_table<'a>(
    covariates: impl IntoIterator<Item = (&'a str, &'a [f64], &'a [f64])>,
) -> Result<Vec<BalanceRow>> {
    covariates
        .into_iter()
        .map(|(name, a, b)| {
            if a.len() < 2 || b.len() < 2 {
                return Err(Error::Degenerate(format!(
                    "covariate {name}: need >= 2 observations per arm, got {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            let (mean_a, sd_a) = mean_sd(a);
            let (mean_b, sd_b) = mean_sd(b);
            Ok(BalanceRow {
                covariate: name.to_string(),
                mean_a,
                mean_b,
                sd_a,
                sd_b,
                n_a: a.len(),
                n_b: b.len(),
                normalized_difference: normalized_difference(mean_a, mean_b, sd_a, sd_b),
            })
        })
        .collect()
}

/// 1986 covariates compared between two id sets (missing values skipped).
pub fn covariate_table(
    panel: &Panel,
    name: &str,
    (label_a, ids_a): (&str, &BTreeSet<u64>),
    (label_b, ids_b): (&str, &BTreeSet<u64>),
) -> Result<BalanceTable> {
    let values = |ids: &BTreeSet<u64>, c: Covariate| -> Vec<f64> {
        ids.iter()
            .filter_map(|&id| panel.get(id, BASE_YEAR).and_then(|r| c.value(r)))
            .collect()
    };
    let cols: Vec<(&str, Vec<f64>, Vec<f64>)> = COVARIATES
        .iter()
        .map(|&c| (c.name(), values(ids_a, c), values(ids_b, c)))
        .collect();
    let rows = balance_table(
        cols.iter()
            .map(|(n, a, b)| (*n, a.as_slice(), b.as_slice())),
    )?;
    Ok(BalanceTable {
        name: name.to_string(),
        arm_a: label_a.to_string(),
        arm_b: label_b.to_string(),
        rows,
    })
}

/// Long CSV: `table,covariate,arm_a,arm_b,mean_a,mean_b,sd_a,sd_b,n_a,n_b,normalized_difference`.
pub fn write_balance_csv(path: &Path, tables: &[BalanceTable]) -> Result<()> {
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from(
        "table,covariate,arm_a,arm_b,mean_a,mean_b,sd_a,sd_b,n_a,n_b,normalized_difference\n",
    );
    for t in tables {
        for r in &t.rows {
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                t.name,
                r.covariate,
                t.arm_a,
                t.arm_b,
                r.mean_a,
                r.mean_b,
                r.sd_a,
                r.sd_b,
                r.n_a,
                r.n_b,
                r.normalized_difference
                    .map_or(String::new(), |d| d.to_string()),
            ));
        }
    }
    w.write_all(body.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
