use proptest::prelude::*;

use prefscope_core::conjoint::{fit_weights, Aggregation};
use prefscope_core::{
    predict_utilities, simulate_btl, simulate_fcm, simulate_lpm, ConjointFit, SimulationOptions, StudyDesign,
};

fn part_worths() -> impl Strategy<Value = (f64, Vec<Vec<f64>>)> {
    (
        0.5f64..2.0,
        prop::collection::vec(prop::collection::vec(-0.15f64..0.15, 3), 2),
    )
}

fn make_fit(id: usize, intercept: f64, worths: Vec<Vec<f64>>) -> ConjointFit {
    ConjointFit::from_part_worths(format!("s{id:02}"), &StudyDesign::signage(), intercept, worths).unwrap()
}

fn fits() -> impl Strategy<Value = Vec<(f64, Vec<Vec<f64>>)>> {
    prop::collection::vec(part_worths(), 1..=12)
}

fn transformed(raw: &[(f64, Vec<Vec<f64>>)], a: f64, b: f64) -> Vec<ConjointFit> {
    raw.iter()
        .enumerate()
        .map(|(i, (c, w))| {
            let w = w.iter().map(|f| f.iter().map(|v| a * v).collect()).collect();
            make_fit(i, a * c + b, w)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fitted_part_worths_sum_to_zero(w in prop::collection::vec(0.001f64..1.0, 9)) {
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let d = StudyDesign::signage();
        let fit = fit_weights("s", &w, &d).unwrap();
        prop_assert!(fit.zero_sum_defect() <= 1e-12);
        prop_assert!((fit.intercept - 1.0 / 9.0).abs() <= 1e-12);
        if let Some(imp) = fit.importances() {
            prop_assert!((imp.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let u = predict_utilities(&fit, &d).unwrap();
        prop_assert!((u.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let r2 = fit.r_squared.unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r2));
    }

    #[test]
    fn fcm_ignores_positive_affine_maps(raw in fits(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let d = StudyDesign::signage();
        let opts = SimulationOptions::default();
        let base = simulate_fcm(&transformed(&raw, 1.0, 0.0), &d, &opts).unwrap();
        let moved = simulate_fcm(&transformed(&raw, a, b), &d, &opts).unwrap();
        for (x, y) in base.shares.iter().zip(&moved.shares) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!((base.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lpm_ignores_shifts(raw in fits(), b in -3.0f64..3.0, arithmetic in any::<bool>()) {
        let d = StudyDesign::signage();
        let opts = SimulationOptions {
            aggregation: if arithmetic { Aggregation::Arithmetic } else { Aggregation::Geometric },
            lpm_exclusion: false,
            ..SimulationOptions::default()
        };
        let base = simulate_lpm(&transformed(&raw, 1.0, 0.0), &d, &opts).unwrap();
        let moved = simulate_lpm(&transformed(&raw, 1.0, b), &d, &opts).unwrap();
        for (x, y) in base.shares.iter().zip(&moved.shares) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn btl_depends_on_shifts((c, w) in part_worths(), b in 0.1f64..3.0) {
        let spread = w.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assume!(spread > 1e-3);
        let d = StudyDesign::signage();
        let opts = SimulationOptions::default();
        let base = simulate_btl(&[make_fit(0, c, w.clone())], &d, &opts).unwrap();
        let moved = simulate_btl(&[make_fit(0, c + b, w)], &d, &opts).unwrap();
        let diff = base.shares.iter().zip(&moved.shares).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff > 1e-9);
    }

    #[test]
    fn geometric_btl_loses_mass_when_subjects_disagree(
        (c1, w1) in part_worths(),
        (c2, w2) in part_worths(),
    ) {
        let d = StudyDesign::signage();
        let f1 = make_fit(0, c1, w1);
        let f2 = make_fit(1, c2, w2);
        let p1 = simulate_btl(std::slice::from_ref(&f1), &d, &SimulationOptions::default()).unwrap();
        let p2 = simulate_btl(std::slice::from_ref(&f2), &d, &SimulationOptions::default()).unwrap();
        let gap = p1.shares.iter().zip(&p2.shares).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assume!(gap > 1e-4);
        let both = simulate_btl(&[f1, f2], &d, &SimulationOptions::default()).unwrap();
        prop_assert!(both.total() < 1.0);
    }
}

/// Every property above by name, so the acceptance run can time them.
#[allow(dead_code)]
pub const PROPERTIES: &[(&str, fn())] = &[
    ("fitted_part_worths_sum_to_zero", fitted_part_worths_sum_to_zero),
    ("fcm_ignores_positive_affine_maps", fcm_ignores_positive_affine_maps),
    ("lpm_ignores_shifts", lpm_ignores_shifts),
    ("btl_depends_on_shifts", btl_depends_on_shifts),
    ("geometric_btl_loses_mass_when_subjects_disagree", geometric_btl_loses_mass_when_subjects_disagree),
];
