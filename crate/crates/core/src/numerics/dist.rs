//! Tail probabilities of Student's t and Snedecor's F.

use super::special::reg_inc_beta;
use super::NumericsError;

fn check_df(name: &str, df: f64) -> Result<(), NumericsError> {
    if df > 0.0 && df.is_finite() {
        Ok(())
    } else {
        Err(NumericsError::Domain(format!(
            "{name} degrees of freedom must be positive, got {df}"
        )))
    }
}

/// Two-sided tail probability `P(|T| >= |t|)` for `T ~ t(df)`.
pub fn t_tail(t: f64, df: f64) -> Result<f64, NumericsError> {
    check_df("t", df)?;
    if t.is_nan() {
        return Err(NumericsError::Domain("t statistic is NaN".into()));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    reg_inc_beta(0.5 * df, 0.5, x)
}

/// Cumulative distribution of Student's t.
pub fn t_cdf(t: f64, df: f64) -> Result<f64, NumericsError> {
    let p = t_tail(t, df)?;
    Ok(if t >= 0.0 { 1.0 - 0.5 * p } else { 0.5 * p })
}

/// Upper-tail probability `P(F >= f)` for `F ~ F(df1, df2)`.
pub fn f_tail(f: f64, df1: f64, df2: f64) -> Result<f64, NumericsError> {
    check_df("numerator", df1)?;
    check_df("denominator", df2)?;
    if f.is_nan() || f < 0.0 {
        return Err(NumericsError::Domain(format!(
            "F statistic must be nonnegative, got {f}"
        )));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    let x = df2 / (df2 + df1 * f);
    reg_inc_beta(0.5 * df2, 0.5 * df1, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Closed forms: df=1 is Cauchy, df=2 has an algebraic CDF.
    #[test]
    fn t_tail_low_df_closed_forms() {
        for &t in &[0.1, 0.5, 1.0, 2.0, 6.3, 40.0] {
            let cauchy = 1.0 - 2.0 / std::f64::consts::PI * f64::atan(t);
            assert!(close(t_tail(t, 1.0).unwrap(), cauchy, 1e-12), "t={t}");
            let df2 = 1.0 - t / (2.0 + t * t).sqrt();
            assert!(close(t_tail(-t, 2.0).unwrap(), df2, 1e-12), "t={t}");
        }
    }

    #[test]
    fn f_tail_two_numerator_df_closed_form() {
        // P(F >= f) = (1 + 2f/d2)^(-d2/2) when df1 = 2
        for &d2 in &[1.0f64, 5.0, 30.0, 171.0] {
            for &f in &[0.2, 1.0, 3.3, 8.4] {
                let exact = (1.0 + 2.0 * f / d2).powf(-0.5 * d2);
                assert!(close(f_tail(f, 2.0, d2).unwrap(), exact, 1e-12));
            }
        }
    }

    #[test]
    fn zero_and_infinite_statistics() {
        assert_eq!(t_tail(0.0, 3.0).unwrap(), 1.0);
        assert_eq!(t_tail(f64::INFINITY, 3.0).unwrap(), 0.0);
        assert_eq!(f_tail(0.0, 2.0, 9.0).unwrap(), 1.0);
    }

    #[test]
    fn degrees_of_freedom_must_be_positive() {
        assert!(t_tail(1.0, 0.0).is_err());
        assert!(f_tail(1.0, 2.0, -1.0).is_err());
        assert!(f_tail(-0.5, 2.0, 4.0).is_err());
    }

    #[test]
    fn cdf_is_complementary() {
        let lo = t_cdf(-1.3, 7.0).unwrap();
        let hi = t_cdf(1.3, 7.0).unwrap();
        assert!(close(lo + hi, 1.0, 1e-14));
    }
}
