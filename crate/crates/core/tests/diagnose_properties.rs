use proptest::prelude::*;

use taxreform::diagnose::{
    bin_distances, build_outcomes, bunching_edges, kernel_density, linear_grid, BUNCHING_BINS,
};
use taxreform::prices::{PriceIndex, TaxCalendar};
use taxreform::synth::{generate_panel, DgpConfig};
use taxreform::tax::TaxSystem;

fn trapezoid(grid: &[f64], y: &[f64]) -> f64 {
    grid.windows(2)
        .zip(y.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}

proptest! {
    #[test]
    fn density_integrates_to_one(values in prop::collection::vec(-50.0..50.0f64, 2..200)) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let grid = linear_grid(-400.0, 400.0, 8001);
        let d = kernel_density(&values, &grid).unwrap();
        prop_assert!(d.iter().all(|&v| v >= 0.0));
        prop_assert!((trapezoid(&grid, &d) - 1.0).abs() < 0.01);
    }

    #[test]
    fn density_of_symmetric_data_is_symmetric(half in prop::collection::vec(0.1..20.0f64, 2..50)) {
        let values: Vec<f64> = half.iter().flat_map(|&v| [v, -v]).collect();
        let grid = linear_grid(-30.0, 30.0, 61);
        let d = kernel_density(&values, &grid).unwrap();
        for k in 0..grid.len() {
            prop_assert!((d[k] - d[grid.len() - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn bunching_counts_partition_in_range_values(
        values in prop::collection::vec(-30_000.0..30_000.0f64, 0..500),
    ) {
        let h = bin_distances(values.iter().copied());
        let in_range = values.iter().filter(|v| (-20_500.0..20_500.0).contains(*v)).count() as u64;
        prop_assert_eq!(h.counts.iter().sum::<u64>(), in_range);
        prop_assert_eq!(h.out_of_range, values.len() as u64 - in_range);
    }
}

#[test]
fn edges_partition_the_range() {
    let e = bunching_edges();
    assert_eq!(e.len(), BUNCHING_BINS + 1);
    assert!(e.windows(2).all(|w| w[1] - w[0] == 1_000.0));
    assert_eq!((e[0], e[BUNCHING_BINS]), (-20_500.0, 20_500.0));
}

#[test]
fn synthetic_outcomes_respect_ranked_scale_and_monotone_jjt() {
    let cfg = DgpConfig {
        n_individuals: 5_000,
        seed: 9,
        ..DgpConfig::default()
    };
    let cal = TaxCalendar::new(
        TaxSystem::y1986(),
        TaxSystem::y1987(),
        PriceIndex::default(),
    );
    let panel = generate_panel(&cfg, &cal).unwrap();
    let o = build_outcomes(&panel, &cal.prices);
    for (s, w) in o.skilled.iter().zip(&o.white_collar) {
        if *w == Some(1.0) {
            assert_eq!(*s, Some(1.0));
        }
    }
    let rows = panel.rows();
    let mut transitions = 0;
    for id in panel.ids() {
        let mut last = 0.0;
        for i in panel.person_span(id) {
            if o.jjt[i] == Some(true) {
                transitions += 1;
            }
            if let Some(v) = o.jjt_cum[i] {
                assert!(v >= last, "id {id} year {}", rows[i].year);
                last = v;
            }
        }
    }
    assert!(transitions > 0);
}
