use proptest::prelude::*;

use prefscope_core::linear::{effects_regression_on, lsd_posthoc, one_way_anova, two_way_anova, CellData};
use prefscope_core::{EffectsCoding, StudyDesign};

fn cell_data() -> impl Strategy<Value = CellData> {
    (2usize..=4, 2usize..=4, 2usize..=6).prop_flat_map(|(a, b, r)| {
        prop::collection::vec(-5.0f64..5.0, a * b * r).prop_map(move |v| CellData {
            factor_a: "A".into(),
            factor_b: "B".into(),
            cells: (0..a)
                .map(|i| (0..b).map(|j| v[(i * b + j) * r..(i * b + j + 1) * r].to_vec()).collect())
                .collect(),
        })
    })
}

fn two_groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=12).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-5.0f64..5.0, n), 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn two_way_sums_of_squares_add_up(d in cell_data()) {
        let t = two_way_anova(&d).unwrap();
        let parts: f64 = t.rows.iter().map(|r| r.ss).sum();
        prop_assert!((parts - t.ss_total).abs() <= 1e-10 * t.ss_total.max(1e-300));
        let dfs: usize = t.rows.iter().map(|r| r.df).sum();
        prop_assert_eq!(dfs + 1, t.n_obs);
    }

    #[test]
    fn two_group_f_is_squared_contrast_t(g in two_groups()) {
        let t = one_way_anova(&g).unwrap();
        let effect = &t.rows[0];
        let err = t.error();
        let n = g[0].len();
        let means: Vec<f64> = g.iter().map(|x| x.iter().sum::<f64>() / n as f64).collect();
        let lsd = lsd_posthoc(&means, n, err.mss, err.df).unwrap();
        let contrast = lsd.pairs[0].t;
        let f = effect.f.unwrap();
        prop_assert!((f - contrast * contrast).abs() <= 1e-9 * (1.0 + f));
        prop_assert!((effect.p.unwrap() - lsd.pairs[0].p).abs() <= 1e-9);
    }

    #[test]
    fn balanced_intercept_is_response_mean(
        y in prop::collection::vec(0.001f64..1.0, 9),
        subset in prop_oneof![
            Just(vec!["Gap", "Background"]),
            Just(vec!["Background"]),
            Just(vec!["Gap"]),
        ],
    ) {
        let d = StudyDesign::signage();
        let r = effects_regression_on(&y, &d, &EffectsCoding::signage_default(), &subset).unwrap();
        let mean = y.iter().sum::<f64>() / 9.0;
        prop_assert!((r.coefficient("Intercept").unwrap() - mean).abs() <= 1e-12);
    }

    #[test]
    fn lsd_p_shrinks_as_differences_grow(
        means in prop::collection::vec(-1.0f64..1.0, 2..=6),
        reps in 2usize..=60,
        mse in 0.001f64..2.0,
        df in 1usize..=200,
    ) {
        let m = lsd_posthoc(&means, reps, mse, df).unwrap();
        let mut pairs = m.pairs.clone();
        pairs.sort_by(|a, b| a.diff.abs().total_cmp(&b.diff.abs()));
        for w in pairs.windows(2) {
            prop_assert!(w[0].p >= w[1].p);
        }
    }
}

/// Every property above by name, so the acceptance run can time them.
#[allow(dead_code)]
pub const PROPERTIES: &[(&str, fn())] = &[
    ("two_way_sums_of_squares_add_up", two_way_sums_of_squares_add_up),
    ("two_group_f_is_squared_contrast_t", two_group_f_is_squared_contrast_t),
    ("balanced_intercept_is_response_mean", balanced_intercept_is_response_mean),
    ("lsd_p_shrinks_as_differences_grow", lsd_p_shrinks_as_differences_grow),
];
