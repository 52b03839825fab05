//! Outcome construction and identification diagnostics.
//!
//! Every series is emitted in one long plot-data format, `series,x,y,arm`.

mod density;
mod outcomes;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::prices::{sample_years, PriceIndex, BASE_YEAR};
use crate::tax::{mtr_schedule, BracketLocation, TaxSystem};

pub use density::{
    bandwidth, bin_distances, bunching_bin, bunching_edges, bunching_histogram, kernel_density,
    kernel_density_with, BunchingHistogram, BUNCHING_BINS, BUNCHING_HALF_RANGE, BUNCHING_WIDTH,
};
pub use outcomes::{build_outcomes, OutcomeKind, OutcomeSet, ALL_OUTCOMES};

/// One plot-data point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub arm: String,
}

pub fn arm_label(treated: bool) -> &'static str {
    if treated {
        "treated"
    } else {
        "control"
    }
}

/// Per-arm, per-year mean of `f(row)` over rows where it is defined.
fn arm_year_means(
    panel: &Panel,
    arms: &BTreeMap<u64, bool>,
    f: impl Fn(usize) -> Option<f64>,
) -> BTreeMap<(bool, i32), f64> {
    let mut acc: BTreeMap<(bool, i32), (f64, usize)> = BTreeMap::new();
    for (&id, &t) in arms {
        for i in panel.person_span(id) {
            if let Some(v) = f(i) {
                let e = acc.entry((t, panel.rows()[i].year)).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

fn to_points(series: &str, means: BTreeMap<(bool, i32), f64>) -> Vec<SeriesPoint> {
    // Treated first, then control, each in year order.
    let mut pts: Vec<_> = means
        .into_iter()
        .map(|((t, year), y)| SeriesPoint {
            series: series.to_string(),
            x: year as f64,
            y,
            arm: arm_label(t).to_string(),
        })
        .collect();
    pts.sort_by(|a, b| b.arm.cmp(&a.arm).then(a.x.total_cmp(&b.x)));
    pts
}

/// Share employed by arm and year; expects a quasi-balanced panel.
pub fn employment_series(panel: &Panel, arms: &BTreeMap<u64, bool>) -> Vec<SeriesPoint> {
    let rows = panel.rows();
    to_points(
        "employment_rate",
        arm_year_means(panel, arms, |i| {
            Some(if rows[i].employed { 1.0 } else { 0.0 })
        }),
    )
}

/// Mean 1986 log real wage among those employed in each year, minus its 1986 value.
pub fn composition_series(
    panel: &Panel,
    arms: &BTreeMap<u64, bool>,
    prices: &PriceIndex,
) -> Vec<SeriesPoint> {
    let base_wage: BTreeMap<u64, f64> = arms
        .keys()
        .filter_map(|&id| {
            let r = panel.get(id, BASE_YEAR)?;
            Some((id, r.log_wage? - prices.level(BASE_YEAR).ln()))
        })
        .collect();
    let rows = panel.rows();
    let mut means = arm_year_means(panel, arms, |i| {
        let r = &rows[i];
        r.employed.then(|| base_wage.get(&r.id).copied()).flatten()
    });
    normalize_to_base(&mut means);
    to_points("composition_log_wage86", means)
}

fn normalize_to_base(means: &mut BTreeMap<(bool, i32), f64>) {
    for t in [true, false] {
        if let Some(&base) = means.get(&(t, BASE_YEAR)) {
            for ((arm, _), v) in means.iter_mut() {
                if *arm == t {
                    *v -= base;
                }
            }
        }
    }
}

/// Mean outcome by arm and year minus the 1986 mean.
pub fn outcome_paths(
    panel: &Panel,
    name: &str,
    outcome: &[Option<f64>],
    arms: &BTreeMap<u64, bool>,
) -> Vec<SeriesPoint> {
    let mut means = arm_year_means(panel, arms, |i| outcome[i]);
    normalize_to_base(&mut means);
    to_points(&format!("mean_path_{name}"), means)
}

/// Shares of each bracket location by arm and year.
pub fn bracket_shares(
    panel: &Panel,
    brackets: &[Option<BracketLocation>],
    arms: &BTreeMap<u64, bool>,
    start_year: i32,
) -> Vec<SeriesPoint> {
    let rows = panel.rows();
    [
        BracketLocation::None,
        BracketLocation::Bottom,
        BracketLocation::Middle,
        BracketLocation::Top,
    ]
    .iter()
    .flat_map(|&loc| {
        let means = arm_year_means(panel, arms, |i| {
            (rows[i].year >= start_year)
                .then(|| brackets[i].map(|b| if b == loc { 1.0 } else { 0.0 }))
                .flatten()
        });
        to_points(
            &format!("bracket_share_{}", loc.as_str().to_lowercase()),
            means,
        )
    })
    .collect()
}

/// Marginal rate schedules on a regular labor-income grid.
pub fn schedule_series(systems: &[(&str, &TaxSystem)], max_li: f64, step: f64) -> Vec<SeriesPoint> {
    let grid: Vec<f64> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|&x| x <= max_li)
        .collect();
    systems
        .iter()
        .flat_map(|(label, sys)| {
            mtr_schedule(sys, &grid)
                .into_iter()
                .map(move |(x, y)| SeriesPoint {
                    series: "mtr_schedule".into(),
                    x,
                    y,
                    arm: label.to_string(),
                })
        })
        .collect()
}

/// Kernel densities of a per-id value by arm over a common grid.
pub fn density_series(
    series: &str,
    values: &BTreeMap<u64, f64>,
    arms: &BTreeMap<u64, bool>,
    grid: &[f64],
) -> Result<Vec<SeriesPoint>> {
    let mut out = Vec::new();
    for t in [true, false] {
        let v: Vec<f64> = arms
            .iter()
            .filter(|&(_, &a)| a == t)
            .filter_map(|(id, _)| values.get(id).copied())
            .collect();
        let d = kernel_density(&v, grid)?;
        out.extend(grid.iter().zip(d).map(|(&x, y)| SeriesPoint {
            series: series.into(),
            x,
            y,
            arm: arm_label(t).into(),
        }));
    }
    Ok(out)
}

pub fn bunching_series(h: &BunchingHistogram) -> Vec<SeriesPoint> {
    h.counts
        .iter()
        .enumerate()
        .map(|(k, &c)| SeriesPoint {
            series: "bunching_count".into(),
            x: h.edges[k] + BUNCHING_WIDTH / 2.0,
            y: c as f64,
            arm: "all".into(),
        })
        .collect()
}

/// Regular grid of `n` points spanning `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64)
        .collect()
}

/// Writes `series,x,y,arm`.
pub fn write_series(path: &Path, points: &[SeriesPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "x", "y", "arm"])?;
    for p in points {
        w.write_record([&p.series, &p.x.to_string(), &p.y.to_string(), &p.arm])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Every id appears in all sample years.
pub fn is_quasi_balanced(panel: &Panel, ids: &BTreeSet<u64>) -> bool {
    let n = sample_years().count();
    ids.iter().all(|&id| panel.person(id).len() == n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{quasi_balance, PanelRow};

    fn worker(id: u64, year: i32, wage: f64, employed: bool) -> PanelRow {
        let mut r = PanelRow::missing(id, year);
        if employed {
            r.employed = true;
            r.log_wage = Some(wage);
        }
        r
    }

    #[test]
    fn employment_and_composition() {
        // Person 2 (low 1986 wage) leaves after 1986.
        let p = Panel::new(vec![
            worker(1, 1986, 5.0, true),
            worker(1, 1987, 5.1, true),
            worker(2, 1986, 4.0, true),
            worker(3, 1986, 4.5, true),
            worker(3, 1987, 4.6, true),
            worker(4, 1986, 4.5, true),
            worker(4, 1987, 4.6, true),
        ])
        .unwrap();
        let ids: BTreeSet<u64> = (1..=4).collect();
        let qb = quasi_balance(&p, &ids);
        assert!(is_quasi_balanced(&qb, &ids));
        let arms = BTreeMap::from([(1, true), (2, true), (3, false), (4, false)]);
        let emp = employment_series(&qb, &arms);
        let get = |pts: &[SeriesPoint], arm: &str, year: i32| {
            pts.iter()
                .find(|p| p.arm == arm && p.x == year as f64)
                .unwrap()
                .y
        };
        assert_eq!(get(&emp, "treated", 1986), 1.0);
        assert_eq!(get(&emp, "control", 1986), 1.0);
        assert_eq!(get(&emp, "treated", 1987), 0.5);
        let comp = composition_series(&qb, &arms, &PriceIndex::default());
        assert_eq!(get(&comp, "treated", 1986), 0.0);
        assert!((get(&comp, "treated", 1987) - 0.5).abs() < 1e-12);
        assert!(get(&comp, "control", 1987).abs() < 1e-12);
    }

    #[test]
    fn schedule_series_covers_both_systems() {
        let s86 = TaxSystem::y1986();
        let s87 = TaxSystem::y1987();
        let pts = schedule_series(&[("1986", &s86), ("1987", &s87)], 300_000.0, 1_000.0);
        assert_eq!(pts.len(), 2 * 301);
        assert!((pts[300].y - 0.73).abs() < 1e-12);
        assert!((pts.last().unwrap().y - 0.69).abs() < 1e-12);
    }
}
