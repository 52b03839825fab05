//! Random toy panels and brute-force dummy-variable estimators shared by test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taxreform::estimate::{event_study, tot_iv, EventStudyOptions, TotOptions};
use taxreform::panel::{Panel, PanelRow};
use taxreform::tax::BracketLocation;

pub struct Toy {
    pub panel: Panel,
    pub y: Vec<Option<f64>>,
    pub brackets: Vec<Option<BracketLocation>>,
    pub arms: BTreeMap<u64, bool>,
}

/// Up to 50 ids over 1981-1993 with random gaps. Ids 1 (treated) and 2
/// (control) are always complete so every coefficient is identified.
pub fn toy(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ids = rng.random_range(4..=50u64);
    let mut rows = Vec::new();
    let mut arms = BTreeMap::new();
    for id in 1..=n_ids {
        let treated = match id {
            1 => true,
            2 => false,
            _ => rng.random_bool(0.4),
        };
        arms.insert(id, treated);
        for year in 1981..=1993 {
            if id <= 2 || rng.random_bool(0.8) {
                rows.push(PanelRow::missing(id, year));
            }
        }
    }
    let panel = Panel::new(rows).unwrap();
    let mut y = Vec::with_capacity(panel.len());
    let mut brackets = Vec::with_capacity(panel.len());
    let effects: BTreeMap<u64, f64> = arms
        .keys()
        .map(|&id| (id, rng.random_range(-2.0..2.0)))
        .collect();
    for r in panel.rows() {
        let missing = r.id > 2 && rng.random_bool(0.1);
        let t = arms[&r.id] && r.year >= 1987;
        let v = effects[&r.id]
            + 0.01 * (r.year - 1981) as f64
            + if t { 0.3 } else { 0.0 }
            + rng.random_range(-1.0..1.0);
        y.push((!missing).then_some(v));
        let p_above = if t { 0.7 } else { 0.2 };
        brackets.push(Some(if rng.random_bool(p_above) {
            BracketLocation::Middle
        } else {
            BracketLocation::Bottom
        }));
    }
    Toy {
        panel,
        y,
        brackets,
        arms,
    }
}

/// Estimation rows in the estimator's order: by id, then year, singletons dropped.
fn sample_rows(t: &Toy, keep: impl Fn(&PanelRow, usize) -> bool) -> Vec<Vec<usize>> {
    t.arms
        .keys()
        .map(|&id| {
            t.panel
                .person_span(id)
                .filter(|&i| keep(&t.panel.rows()[i], i))
                .collect::<Vec<_>>()
        })
        .filter(|g| g.len() >= 2)
        .collect()
}

struct Brute {
    coef: DVector<f64>,
    vcov: DMatrix<f64>,
}

/// `(Z'X)^-1 Z'y` with the clustered sandwich; `k_explicit` sets the
/// small-sample factor, dummies excluded.
fn brute_iv(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    groups: &[Vec<usize>],
    k_explicit: usize,
) -> Brute {
    let zx_inv = (z.transpose() * x).try_inverse().unwrap();
    let coef = &zx_inv * z.transpose() * y;
    let u = y - x * &coef;
    let k = z.ncols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    let mut row = 0;
    for g in groups {
        let mut s = DVector::<f64>::zeros(k);
        for _ in g {
            for j in 0..k {
                s[j] += z[(row, j)] * u[row];
            }
            row += 1;
        }
        meat += &s * s.transpose();
    }
    let n = y.len() as f64;
    let gc = groups.len() as f64;
    let c = gc / (gc - 1.0) * (n - 1.0) / (n - k_explicit as f64);
    let vcov = &zx_inv * meat * zx_inv.transpose() * c;
    Brute { coef, vcov }
}

fn person_dummies(groups: &[Vec<usize>], n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, groups.len());
    let mut row = 0;
    for (g, members) in groups.iter().enumerate() {
        for _ in members {
            d[(row, g)] = 1.0;
            row += 1;
        }
    }
    d
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

pub fn check_event_study(t: &Toy) -> Result<(), TestCaseError> {
    let got = event_study(&t.panel, &t.y, &t.arms, &EventStudyOptions::default()).unwrap();
    let rows = t.panel.rows();
    let groups = sample_rows(t, |_, i| t.y[i].is_some());
    let flat: Vec<usize> = groups.iter().flatten().copied().collect();
    let n = flat.len();
    let others: Vec<i32> = (1981..=1993).filter(|&y| y != 1986).collect();
    let m = others.len();
    let mut slopes = DMatrix::zeros(n, 2 * m);
    let mut y = DVector::zeros(n);
    for (r, &i) in flat.iter().enumerate() {
        y[r] = t.y[i].unwrap();
        if let Some(j) = others.iter().position(|&yr| yr == rows[i].year) {
            slopes[(r, j)] = 1.0;
            if t.arms[&rows[i].id] {
                slopes[(r, m + j)] = 1.0;
            }
        }
    }
    let x = hstack(&slopes, &person_dummies(&groups, n));
    let b = brute_iv(&x, &x, &y, &groups, 2 * m);
    prop_assert_eq!(got.n_obs, n);
    prop_assert_eq!(got.n_clusters, groups.len());
    prop_assert_eq!(got.coefficients.len(), m);
    for (j, c) in got.coefficients.iter().enumerate() {
        prop_assert_eq!(c.year, others[j]);
        prop_assert!(
            (c.beta - b.coef[m + j]).abs() < 1e-8,
            "beta {} vs {}",
            c.beta,
            b.coef[m + j]
        );
        let se = b.vcov[(m + j, m + j)].sqrt();
        prop_assert!((c.se - se).abs() < 1e-8, "se {} vs {}", c.se, se);
    }
    Ok(())
}

pub fn check_tot(t: &Toy) -> Result<(), TestCaseError> {
    let opts = TotOptions::default();
    let got = tot_iv(&t.panel, &t.y, &t.arms, &t.brackets, &opts).unwrap();
    prop_assert!(
        (got.beta - got.reduced_form / got.first_stage).abs() < 1e-10 * (1.0 + got.beta.abs()),
        "{} vs {}",
        got.beta,
        got.reduced_form / got.first_stage
    );
    let rows = t.panel.rows();
    let groups = sample_rows(t, |r, i| {
        (opts.start_year..=opts.end_year).contains(&r.year) && t.y[i].is_some()
    });
    let flat: Vec<usize> = groups.iter().flatten().copied().collect();
    let n = flat.len();
    let years: Vec<i32> = (opts.start_year + 1..=opts.end_year).collect();
    let k = years.len() + 1;
    let mut z = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    let mut d = DVector::zeros(n);
    for (r, &i) in flat.iter().enumerate() {
        let post = rows[i].year >= opts.reform_year;
        if post && t.arms[&rows[i].id] {
            z[(r, 0)] = 1.0;
        }
        if let Some(j) = years.iter().position(|&yr| yr == rows[i].year) {
            z[(r, j + 1)] = 1.0;
        }
        if post && t.brackets[i].unwrap().is_middle_or_above() {
            d[r] = 1.0;
        }
        y[r] = t.y[i].unwrap();
    }
    let zf = hstack(&z, &person_dummies(&groups, n));
    let mut xf = zf.clone();
    xf.set_column(0, &d);
    let iv = brute_iv(&zf, &xf, &y, &groups, k);
    prop_assert!((got.beta - iv.coef[0]).abs() < 1e-8);
    prop_assert!((got.se - iv.vcov[(0, 0)].sqrt()).abs() < 1e-8);
    let fs = brute_iv(&zf, &zf, &d, &groups, k);
    prop_assert!((got.first_stage - fs.coef[0]).abs() < 1e-8);
    prop_assert!((got.first_stage_se - fs.vcov[(0, 0)].sqrt()).abs() < 1e-8);
    let rf = brute_iv(&zf, &zf, &y, &groups, k);
    prop_assert!((got.reduced_form - rf.coef[0]).abs() < 1e-8);
    prop_assert!((got.reduced_form_se - rf.vcov[(0, 0)].sqrt()).abs() < 1e-8);
    Ok(())
}
