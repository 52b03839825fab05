//! Event study, treatment-on-the-treated IV and elasticities.
//!
//! Outcomes are passed as a slice aligned with [`Panel::rows`]; `None` marks a
//! missing outcome and drops the row. Individual effects are absorbed by
//! within-demeaning, and every variance is a sandwich clustered by person with
//! the small-sample factor `G/(G-1) * (N-1)/(N-K)`, where `K` counts the
//! explicit regressors only.

mod io;
pub(crate) mod linear;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::design::{Comparison, DesignAssignment};
use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::prices::{TaxCalendar, BASE_YEAR, FIRST_YEAR, LAST_YEAR, REFORM_YEAR};
use crate::tax::{bracket_location, BracketLocation};
use linear::{demean, Stacked};

pub use io::{write_coefficients, write_summary, SummaryRow, SUMMARY_COLUMNS};

/// Normal critical value for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;
/// First-stage F above which weak-instrument bias is negligible.
pub const STRONG_F: f64 = 104.7;
/// Smallest usable `|mean_T - mean_C|` of mechanical net-of-tax changes.
pub const MIN_CONTRAST: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStudyOptions {
    pub ref_year: i32,
    pub start_year: i32,
    pub end_year: i32,
}

impl Default for EventStudyOptions {
    fn default() -> Self {
        EventStudyOptions {
            ref_year: BASE_YEAR,
            start_year: FIRST_YEAR,
            end_year: LAST_YEAR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearCoef {
    pub year: i32,
    pub beta: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl YearCoef {
    fn new(year: i32, beta: f64, se: f64) -> Self {
        YearCoef {
            year,
            beta,
            se,
            ci_lo: beta - Z_95 * se,
            ci_hi: beta + Z_95 * se,
        }
    }

    pub fn rejects_zero(&self) -> bool {
        self.ci_lo > 0.0 || self.ci_hi < 0.0
    }
}

/// Treated-minus-control paths relative to the reference year.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStudyResult {
    pub ref_year: i32,
    /// One per observed year other than the reference year, ascending.
    pub coefficients: Vec<YearCoef>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub singletons_dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotOptions {
    pub start_year: i32,
    pub end_year: i32,
    pub reform_year: i32,
}

impl Default for TotOptions {
    fn default() -> Self {
        TotOptions {
            start_year: 1984,
            end_year: LAST_YEAR,
            reform_year: REFORM_YEAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotResult {
    pub beta: f64,
    pub se: f64,
    pub first_stage: f64,
    pub first_stage_se: f64,
    /// `(first_stage / first_stage_se)^2`.
    pub f_stat: f64,
    pub reduced_form: f64,
    pub reduced_form_se: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub singletons_dropped: usize,
}

impl TotResult {
    pub fn strong_instrument(&self) -> bool {
        self.f_stat > STRONG_F
    }
}

/// Per-arm moments of the mechanical net-of-tax change at 1986 income.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalContrast {
    pub mean_treated: f64,
    pub mean_control: f64,
    pub sd_treated: f64,
    pub sd_control: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

impl MechanicalContrast {
    pub fn from_assignments(
        assignments: &[DesignAssignment],
        comparison: Comparison,
    ) -> Result<Self> {
        let (mut t, mut c) = (Vec::new(), Vec::new());
        for a in assignments {
            match comparison.arm(a) {
                Some(true) => t.push(a.mechanical_change),
                Some(false) => c.push(a.mechanical_change),
                None => {}
            }
        }
        if t.is_empty() || c.is_empty() {
            return Err(Error::Degenerate(format!(
                "{} comparison has {} treated and {} control ids",
                comparison.label(),
                t.len(),
                c.len()
            )));
        }
        let moments = |x: &[f64]| {
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            let v = if x.len() > 1 {
                x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (m, v.sqrt())
        };
        let (mt, st) = moments(&t);
        let (mc, sc) = moments(&c);
        Ok(MechanicalContrast {
            mean_treated: mt,
            mean_control: mc,
            sd_treated: st,
            sd_control: sc,
            n_treated: t.len(),
            n_control: c.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityResult {
    pub epsilon: f64,
    pub se: f64,
    pub delta_treated: f64,
    pub delta_control: f64,
}

/// `beta_tot / (delta_t - delta_c)`, with the mechanical changes held as constants.
pub fn elasticity(
    beta_tot: f64,
    se_tot: f64,
    delta_treated: f64,
    delta_control: f64,
) -> Result<ElasticityResult> {
    let contrast = delta_treated - delta_control;
    if !(contrast.abs() >= MIN_CONTRAST) {
        return Err(Error::ZeroContrast(contrast));
    }
    Ok(ElasticityResult {
        epsilon: beta_tot / contrast,
        se: se_tot / contrast.abs(),
        delta_treated,
        delta_control,
    })
}

/// Bracket location of every row under its own year's law; `None` without income.
pub fn bracket_by_row(panel: &Panel, calendar: &TaxCalendar) -> Vec<Option<BracketLocation>> {
    let systems: BTreeMap<i32, _> = panel
        .rows()
        .iter()
        .map(|r| r.year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|y| (y, calendar.system(y)))
        .collect();
    panel
        .rows()
        .iter()
        .map(|r| {
            r.income
                .map(|inc| bracket_location(&inc, &systems[&r.year]))
        })
        .collect()
}

/// Row positions grouped by person, after dropping persons with a single row.
struct Sample {
    /// `(panel row index, treated)` in canonical order.
    rows: Vec<(usize, bool)>,
    clusters: Vec<(usize, usize)>,
    singletons: usize,
}

fn collect(panel: &Panel, arms: &BTreeMap<u64, bool>, keep: impl Fn(usize) -> bool) -> Sample {
    let mut rows = Vec::new();
    let mut clusters = Vec::new();
    let mut singletons = 0;
    for (&id, &treated) in arms {
        let start = rows.len();
        rows.extend(
            panel
                .person_span(id)
                .filter(|&i| keep(i))
                .map(|i| (i, treated)),
        );
        match rows.len() - start {
            0 => {}
            1 => {
                rows.pop();
                singletons += 1;
            }
            len => clusters.push((start, len)),
        }
    }
    if singletons > 0 {
        log::info!("dropped {singletons} singleton clusters");
    }
    Sample {
        rows,
        clusters,
        singletons,
    }
}

fn check_len(panel: &Panel, name: &str, len: usize) {
    assert_eq!(len, panel.len(), "{name} must be aligned with panel rows");
}

/// Year dummies and year-by-treated interactions, reference year omitted.
pub fn event_study(
    panel: &Panel,
    outcome: &[Option<f64>],
    arms: &BTreeMap<u64, bool>,
    opts: &EventStudyOptions,
) -> Result<EventStudyResult> {
    check_len(panel, "outcome", outcome.len());
    let rows = panel.rows();
    let sample = collect(panel, arms, |i| {
        let y = rows[i].year;
        y >= opts.start_year && y <= opts.end_year && outcome[i].is_some_and(f64::is_finite)
    });
    let years: Vec<i32> = sample
        .rows
        .iter()
        .map(|&(i, _)| rows[i].year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !years.contains(&opts.ref_year) {
        return Err(Error::Degenerate(format!(
            "reference year {} has no observations",
            opts.ref_year
        )));
    }
    let others: Vec<i32> = years.into_iter().filter(|&y| y != opts.ref_year).collect();
    let col_of: BTreeMap<i32, usize> = others.iter().enumerate().map(|(j, &y)| (y, j)).collect();
    let m = others.len();
    let n = sample.rows.len();
    let mut x = DMatrix::zeros(n, 2 * m);
    let mut y = DMatrix::zeros(n, 1);
    for (r, &(i, treated)) in sample.rows.iter().enumerate() {
        y[(r, 0)] = outcome[i].unwrap();
        if let Some(&j) = col_of.get(&rows[i].year) {
            x[(r, j)] = 1.0;
            if treated {
                x[(r, m + j)] = 1.0;
            }
        }
    }
    demean(&mut x, &sample.clusters);
    demean(&mut y, &sample.clusters);
    let names: Vec<String> = others
        .iter()
        .map(|y| format!("year_{y}"))
        .chain(others.iter().map(|y| format!("treated_x_{y}")))
        .collect();
    let stacked = Stacked {
        x,
        clusters: sample.clusters,
    };
    let fit = linear::ols(&stacked, &DVector::from_column_slice(y.as_slice()), &names)?;
    let coefficients = others
        .iter()
        .enumerate()
        .map(|(j, &yr)| YearCoef::new(yr, fit.coef[m + j], fit.se(m + j)))
        .collect();
    Ok(EventStudyResult {
        ref_year: opts.ref_year,
        coefficients,
        n_obs: fit.n,
        n_clusters: fit.clusters,
        singletons_dropped: sample.singletons,
    })
}

/// Two-stage least squares of the outcome on `Post * [middle or top]`,
/// instrumented by `Post * Treated`, with person and year effects.
pub fn tot_iv(
    panel: &Panel,
    outcome: &[Option<f64>],
    arms: &BTreeMap<u64, bool>,
    brackets: &[Option<BracketLocation>],
    opts: &TotOptions,
) -> Result<TotResult> {
    check_len(panel, "outcome", outcome.len());
    check_len(panel, "brackets", brackets.len());
    let rows = panel.rows();
    let sample = collect(panel, arms, |i| {
        let y = rows[i].year;
        y >= opts.start_year
            && y <= opts.end_year
            && outcome[i].is_some_and(f64::is_finite)
            && brackets[i].is_some()
    });
    let years: Vec<i32> = sample
        .rows
        .iter()
        .map(|&(i, _)| rows[i].year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    // The first observed year is the omitted year effect.
    let col_of: BTreeMap<i32, usize> = years
        .iter()
        .skip(1)
        .enumerate()
        .map(|(j, &y)| (y, j + 1))
        .collect();
    let k = years.len().max(1);
    let n = sample.rows.len();
    let mut z = DMatrix::zeros(n, k);
    let mut dy = DMatrix::zeros(n, 2);
    for (r, &(i, treated)) in sample.rows.iter().enumerate() {
        let post = rows[i].year >= opts.reform_year;
        if let Some(&j) = col_of.get(&rows[i].year) {
            z[(r, j)] = 1.0;
        }
        if post && treated {
            z[(r, 0)] = 1.0;
        }
        let above = brackets[i].is_some_and(|b| b.is_middle_or_above());
        dy[(r, 0)] = if post && above { 1.0 } else { 0.0 };
        dy[(r, 1)] = outcome[i].unwrap();
    }
    demean(&mut z, &sample.clusters);
    demean(&mut dy, &sample.clusters);
    let d = DVector::from_column_slice(dy.column(0).as_slice());
    let y = DVector::from_column_slice(dy.column(1).as_slice());
    let names: Vec<String> = std::iter::once("post_x_treated".to_string())
        .chain(years.iter().skip(1).map(|y| format!("year_{y}")))
        .collect();
    let stacked = Stacked {
        x: z,
        clusters: sample.clusters,
    };
    let fs = linear::ols(&stacked, &d, &names).map_err(|e| match e {
        Error::Collinear(m) => Error::WeakInstrument(m),
        e => e,
    })?;
    if !(fs.coef[0].abs() > 1e-12) {
        return Err(Error::WeakInstrument(format!(
            "first-stage coefficient {:e}",
            fs.coef[0]
        )));
    }
    let rf = linear::ols(&stacked, &y, &names)?;
    let mut x = stacked.x.clone();
    x.set_column(0, &d);
    let iv = linear::iv(&stacked, &x, &y)?;
    let fs_se = fs.se(0);
    Ok(TotResult {
        beta: iv.coef[0],
        se: iv.se(0),
        first_stage: fs.coef[0],
        first_stage_se: fs_se,
        f_stat: (fs.coef[0] / fs_se).powi(2),
        reduced_form: rf.coef[0],
        reduced_form_se: rf.se(0),
        n_obs: iv.n,
        n_clusters: iv.clusters,
        singletons_dropped: sample.singletons,
    })
}
