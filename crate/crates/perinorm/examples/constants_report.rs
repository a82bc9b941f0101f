//! Evaluate every constant in the certified remainder bound, exactly as
//! the estimates define them.
//!
//! Nothing here is fitted: each quantity is a closed-form function of the
//! spectra, the period, the Sobolev exponent, and the non-resonance data.
//! The optimal truncation degree and the decay exponent follow from them.

use perinorm::job::parse_job;
use perinorm::spectrum::{check_nonresonance, EigenData, Reduction, UncouplingConstants};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = parse_job(
        include_str!("../fixtures/uncouple_basic.json"),
        "uncouple_basic",
    )?;
    let eig = EigenData::from_spec(&spec, Reduction::Uncoupling)?;
    let scan = check_nonresonance(&eig, 1.0, eig.default_tol_res(), 4, spec.k_needed(4))?;
    scan.require_clean()?;
    let k = UncouplingConstants::new(&spec, &eig, scan.gamma_eff, 1.0)?;

    println!("gamma       = {:.16e}", k.gamma);
    println!("tau         = {:.16e}", k.tau);
    println!("nu          = {}", k.nu);
    println!("lambda_max  = {:.16e}", k.lambda_max);
    for (j, c) in k.c_j.iter().enumerate() {
        println!("c_{j}         = {c:.16e}");
    }
    println!("conv        = {:.16e}", k.conv);
    println!("p0_norm     = {:.16e}", k.p0_norm);
    println!("cap_k       = {:.16e}", k.cap_k);
    println!("b           = {:.16e}", k.b);
    println!("omega       = {:.16e}", k.omega_decay);
    println!("delta_star  = {:.16e}", k.delta_star);
    println!("m_big       = {:.16e}", k.m_big);
    println!("m_one       = {:.16e}", k.m_one);
    println!("m_zero      = {:.16e}", k.m_zero);
    for delta in [0.1, 0.01, 1e-3, 1e-4] {
        println!(
            "p_opt({delta:.0e}) = {:>4}   bound = {:.6e}",
            k.p_opt(delta),
            k.remainder_bound(delta)
        );
    }
    Ok(())
}
