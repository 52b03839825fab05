//! Within estimators against explicit-dummy regressions on random small panels.

mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;

use support::{check_event_study, check_tot, toy};
use taxreform::estimate::{event_study, tot_iv, EventStudyOptions, TotOptions};
use taxreform::panel::Panel;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn event_study_matches_dummy_regression(seed in any::<u64>()) {
        check_event_study(&toy(seed))?;
    }

    #[test]
    fn tot_matches_dummy_iv(seed in any::<u64>()) {
        check_tot(&toy(seed))?;
    }

    #[test]
    fn constant_shift_is_absorbed(seed in any::<u64>(), shift in -100.0..100.0f64) {
        let t = toy(seed);
        let shifted: Vec<Option<f64>> = t.y.iter().map(|v| v.map(|v| v + shift)).collect();
        let o = EventStudyOptions::default();
        let a = event_study(&t.panel, &t.y, &t.arms, &o).unwrap();
        let b = event_study(&t.panel, &shifted, &t.arms, &o).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((ca.beta - cb.beta).abs() < 1e-8);
        }
        let to = TotOptions::default();
        let ta = tot_iv(&t.panel, &t.y, &t.arms, &t.brackets, &to).unwrap();
        let tb = tot_iv(&t.panel, &shifted, &t.arms, &t.brackets, &to).unwrap();
        prop_assert!((ta.beta - tb.beta).abs() < 1e-8);
    }

    #[test]
    fn cluster_relabeling_is_irrelevant(seed in any::<u64>()) {
        let t = toy(seed);
        // Reverse the id order, which reverses cluster order in the stacked design.
        let max = *t.arms.keys().last().unwrap();
        let relabel = |id: u64| max + 1 - id;
        let mut rows = Vec::new();
        let mut y = BTreeMap::new();
        for (r, v) in t.panel.rows().iter().zip(&t.y) {
            let mut nr = r.clone();
            nr.id = relabel(r.id);
            y.insert((nr.id, nr.year), *v);
            rows.push(nr);
        }
        let panel = Panel::new(rows).unwrap();
        let ys: Vec<Option<f64>> = panel.rows().iter().map(|r| y[&(r.id, r.year)]).collect();
        let arms: BTreeMap<u64, bool> = t.arms.iter().map(|(&id, &a)| (relabel(id), a)).collect();
        let o = EventStudyOptions::default();
        let a = event_study(&t.panel, &t.y, &t.arms, &o).unwrap();
        let b = event_study(&panel, &ys, &arms, &o).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((ca.beta - cb.beta).abs() < 1e-8);
            prop_assert!((ca.se - cb.se).abs() < 1e-8);
        }
    }
}
