//! Prints the published-table replications from the embedded fixtures.

use prefscope_core::conjoint::{aggregate, simulate_btl, simulate_fcm, simulate_lpm};
use prefscope_core::factor::{ml_extract, oblique_rotate, schmid_leiman, varimax, MlOptions, ObliqueOptions};
use prefscope_core::fixtures;
use prefscope_core::linear::{effects_regression, EffectsCoding};
use prefscope_core::study::to_correlation;
use prefscope_core::{fmt6, SimulationOptions};

fn row(name: &str, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|v| fmt6(*v)).collect();
    println!("{name:<12} {}", cells.join("  "));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let design = fixtures::signage_design();
    let summary = fixtures::published_descriptives()?;
    let coding = EffectsCoding::signage_default();
    for terms in [&["Gap", "Background"][..], &["Background"][..]] {
        let r = effects_regression(&summary, &design, &coding, terms)?;
        println!("regression on {terms:?}: R2 {}", fmt6(r.fit.r_squared));
        row("coef", &r.fit.coefficients);
        row("se", &r.fit.std_errors);
        row("t", &r.fit.t_stats);
        row("p", &r.fit.p_values);
    }

    let fits = fixtures::published_part_worths()?;
    let agg = aggregate(&fits)?;
    for f in &agg.factors {
        println!("{} importance {}", f.factor, fmt6(f.mean_importance.unwrap_or(f64::NAN)));
        row("worths", &f.mean_worths);
    }
    let opts = SimulationOptions::default();
    for s in [
        simulate_fcm(&fits, &design, &opts)?,
        simulate_btl(&fits, &design, &opts)?,
        simulate_lpm(&fits, &design, &opts)?,
    ] {
        row(&s.model.to_string(), &s.shares);
    }

    let (_, cov) = fixtures::published_covariance()?;
    let corr = to_correlation(&cov)?;
    for k in 1..=3 {
        let sol = ml_extract(&corr, k, &MlOptions::default())?;
        let rot = varimax(&sol, true);
        println!(
            "k={k} converged={} iterations={} objective={} heywood={:?}",
            sol.converged, sol.iterations, fmt6(sol.objective), sol.heywood
        );
        for i in 0..rot.loadings.rows() {
            row(design.labels()[i], rot.loadings.row(i));
        }
        row("variance", &rot.variance_explained);
    }
    let sol = ml_extract(&corr, 3, &MlOptions::default())?;
    for opts in [ObliqueOptions::quartimin(), ObliqueOptions::biquartimin()] {
        let obl = oblique_rotate(&sol, &opts)?;
        let sl = schmid_leiman(&obl)?;
        println!("gamma={} converged={} iterations={}", opts.gamma, obl.converged, obl.iterations);
        row("g", &sl.general_loadings);
        row("secondary", &sl.secondary);
        for i in 0..sl.primaries.rows() {
            row(design.labels()[i], sl.primaries.row(i));
        }
        println!("reconstruction error {:e}", sl.reconstruction_error(&obl));
    }
    Ok(())
}
