//! Reduce a forced rotation to its resonant part and check the defining
//! invariance of the result.
//!
//! The linear part rotates at the irrational frequency sqrt(2), so no
//! quadratic term and no time-dependent term can resonate: the computed
//! resonant part is an autonomous cubic in the kernel of the divisor
//! operator. The invariance criteria then verify, by sampling and on raw
//! coefficients, that the resonant part commutes with the comparison flow
//! and that injecting a clean-divisor monomial breaks both checks.

use perinorm::job::parse_job;
use perinorm::normalform::{invariance_criteria, run_normal_form};
use perinorm::uncouple::RunOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = parse_job(include_str!("../fixtures/hopf.json"), "hopf")?;
    let opts = RunOptions {
        delta: 0.1,
        p_override: Some(3),
        ..RunOptions::default()
    };
    let run = run_normal_form(&spec, &opts)?;

    println!("resonant tuples kept:");
    for t in &run.resonant_tuples {
        println!(
            "  alpha={} k={} j={} |divisor|={:.3e}",
            t.alpha, t.k, t.j, t.divisor_abs
        );
    }
    println!(
        "resonant part degrees: {:?}",
        run.resonant.parts().map(|(d, _)| d).collect::<Vec<_>>()
    );
    println!(
        "computed remainder bound {:.6e} (degrees {}..={}), sampled {:.6e}",
        run.computed_bound,
        run.p + 1,
        run.cap_r,
        run.sampled_sup
    );
    if let Some(tail) = run.tail_estimate {
        println!("estimated dropped tail {tail:.3e}");
    }

    let criteria = invariance_criteria(&spec, &run, &opts)?;
    println!(
        "invariance residual {:.3e} (control {:.3e})",
        criteria.invariance_residual, criteria.control_invariance
    );
    println!(
        "coefficient residual {:.3e} (control {:.3e})",
        criteria.coefficient_residual, criteria.control_coefficient
    );
    println!("criteria ok: {}", criteria.ok);
    Ok(())
}
