//! Gaussian kernel density and the bracket-cutoff bunching histogram.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::prices::{TaxCalendar, LAST_YEAR, REFORM_YEAR};
use crate::tax::joint_middle_transfer;

/// Normal-reference bandwidth `sigma * (4 / (3n))^(1/5)`, with `sigma` the
/// median absolute deviation scaled to a normal sd (the sample sd if the MAD is zero).
pub fn bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = median_sorted(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - median).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut sigma = median_sorted(&dev) / 0.6745;
    if sigma <= 0.0 {
        let mean = values.iter().sum::<f64>() / n;
        sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    }
    sigma * (4.0 / (3.0 * n)).powf(0.2)
}

fn median_sorted(x: &[f64]) -> f64 {
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Gaussian kernel density of `values` at each grid point.
pub fn kernel_density(values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(
            "kernel density input is not finite".into(),
        ));
    }
    let distinct = values
        .iter()
        .map(|v| v.to_bits())
        .collect::<BTreeSet<_>>()
        .len();
    if distinct < 2 {
        return Err(Error::Degenerate(format!(
            "kernel density needs >= 2 distinct values, got {distinct}"
        )));
    }
    let h = bandwidth(values);
    Ok(kernel_density_with(values, grid, h))
}

pub fn kernel_density_with(values: &[f64], grid: &[f64], h: f64) -> Vec<f64> {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}

pub const BUNCHING_BINS: usize = 41;
pub const BUNCHING_WIDTH: f64 = 1_000.0;
pub const BUNCHING_HALF_RANGE: f64 = 20_500.0;

/// Bin of a distance from the cutoff; bins are `[-20500 + 1000k, -19500 + 1000k)`.
pub fn bunching_bin(distance: f64) -> Option<usize> {
    if !(-BUNCHING_HALF_RANGE..BUNCHING_HALF_RANGE).contains(&distance) {
        return None;
    }
    let k = ((distance + BUNCHING_HALF_RANGE) / BUNCHING_WIDTH).floor() as usize;
    Some(k.min(BUNCHING_BINS - 1))
}

/// Lower edges of the 41 bins followed by the final upper edge.
pub fn bunching_edges() -> Vec<f64> {
    (0..=BUNCHING_BINS)
        .map(|k| -BUNCHING_HALF_RANGE + k as f64 * BUNCHING_WIDTH)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BunchingHistogram {
    pub edges: Vec<f64>,
    pub counts: [u64; BUNCHING_BINS],
    /// Person-years outside the plotted range.
    pub out_of_range: u64,
}

pub fn bin_distances(distances: impl IntoIterator<Item = f64>) -> BunchingHistogram {
    let mut counts = [0u64; BUNCHING_BINS];
    let mut out_of_range = 0;
    for d in distances {
        match bunching_bin(d) {
            Some(k) => counts[k] += 1,
            None => out_of_range += 1,
        }
    }
    BunchingHistogram {
        edges: bunching_edges(),
        counts,
        out_of_range,
    }
}

/// Distances of joint-adjusted middle bases from the middle cutoff, in 1986
/// prices, pooled over the post-reform years for the given ids.
pub fn bunching_histogram(
    panel: &Panel,
    calendar: &TaxCalendar,
    ids: &BTreeSet<u64>,
) -> BunchingHistogram {
    let systems: Vec<_> = (REFORM_YEAR..=LAST_YEAR)
        .map(|y| calendar.system(y))
        .collect();
    let distances = ids.iter().flat_map(|&id| {
        panel.person(id).iter().filter_map(|r| {
            let sys = systems.get(usize::try_from(r.year - REFORM_YEAR).ok()?)?;
            let inc = r.income.as_ref()?;
            let price = calendar.prices.level(r.year);
            Some((joint_middle_transfer(inc, sys) - sys.middle.cutoff) / price)
        })
    });
    bin_distances(distances)
}
