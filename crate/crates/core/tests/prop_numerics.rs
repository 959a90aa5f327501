use proptest::prelude::*;

use prefscope_core::numerics::{
    f_tail, ols, power_iteration, sym_eigen, t_cdf, t_tail, Matrix, SymMatrix, DEFAULT_POWER_MAX_ITER,
    DEFAULT_POWER_TOL,
};

fn positive_matrix() -> impl Strategy<Value = Matrix> {
    (2usize..=9).prop_flat_map(|n| {
        prop::collection::vec(0.1f64..10.0, n * n).prop_map(move |v| Matrix::from_row_slice(n, n, &v).unwrap())
    })
}

fn symmetric_matrix() -> impl Strategy<Value = SymMatrix> {
    (1usize..=9).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
            let m = Matrix::from_fn(n, n, |i, j| v[i.min(j) * n + i.max(j)]);
            SymMatrix::new(m).unwrap()
        })
    })
}

fn regression_problem() -> impl Strategy<Value = (Matrix, Vec<f64>)> {
    (1usize..=4, 2usize..=12).prop_flat_map(|(p, extra)| {
        let n = p + 1 + extra;
        (
            prop::collection::vec(-3.0f64..3.0, n * p),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(x, y)| {
                let design = Matrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i * p + j - 1] });
                (design, y)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn power_iteration_residual_is_small(m in positive_matrix()) {
        let pair = power_iteration(&m, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER).unwrap();
        let av = m.mul_vec(&pair.vector);
        let resid = av
            .iter()
            .zip(&pair.vector)
            .map(|(a, v)| (a - pair.value * v).abs())
            .fold(0.0f64, f64::max);
        prop_assert!(resid <= 10.0 * DEFAULT_POWER_TOL * pair.value, "residual {resid}, lambda {}", pair.value);
        prop_assert!(pair.vector.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn eigenvalues_sum_to_trace(s in symmetric_matrix()) {
        let pairs = sym_eigen(&s).unwrap();
        let sum: f64 = pairs.iter().map(|p| p.value).sum();
        let trace = s.as_matrix().trace();
        prop_assert!((sum - trace).abs() <= 1e-10 * (1.0 + s.as_matrix().frobenius()));
        prop_assert!(pairs.windows(2).all(|w| w[0].value >= w[1].value));
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_design((x, y) in regression_problem()) {
        let fit = ols(&x, &y).unwrap();
        let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for j in 0..x.cols() {
            let dot: f64 = x.col(j).iter().zip(&fit.residuals).map(|(a, r)| a * r).sum();
            prop_assert!(dot.abs() <= 1e-9 * scale * x.rows() as f64, "column {j}: {dot}");
        }
    }

    #[test]
    fn t_tail_decreases_in_magnitude(a in -40.0f64..40.0, b in -40.0f64..40.0, df in 1.0f64..300.0) {
        let (lo, hi) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
        prop_assert!(t_tail(lo, df).unwrap() >= t_tail(hi, df).unwrap());
    }

    #[test]
    fn t_tail_is_twice_the_upper_tail(t in -40.0f64..40.0, df in 1.0f64..300.0) {
        let two_sided = t_tail(t, df).unwrap();
        let via_cdf = 2.0 * (1.0 - t_cdf(t.abs(), df).unwrap());
        prop_assert!((two_sided - via_cdf).abs() <= 1e-12);
    }

    #[test]
    fn f_with_one_numerator_df_matches_t(t in -30.0f64..30.0, df in 1.0f64..300.0) {
        let f = f_tail(t * t, 1.0, df).unwrap();
        prop_assert!((f - t_tail(t, df).unwrap()).abs() <= 1e-8);
    }
}

/// Every property above by name, so the acceptance run can time them.
#[allow(dead_code)]
pub const PROPERTIES: &[(&str, fn())] = &[
    ("power_iteration_residual_is_small", power_iteration_residual_is_small),
    ("eigenvalues_sum_to_trace", eigenvalues_sum_to_trace),
    ("ols_residuals_are_orthogonal_to_design", ols_residuals_are_orthogonal_to_design),
    ("t_tail_decreases_in_magnitude", t_tail_decreases_in_magnitude),
    ("t_tail_is_twice_the_upper_tail", t_tail_is_twice_the_upper_tail),
    ("f_with_one_numerator_df_matches_t", f_with_one_numerator_df_matches_t),
];
