//! Batch front door: ingest a system file, run one reduction or check, and
//! emit artifacts.
//!
//! Commands: `check` scans divisors and evaluates constants; `uncouple`
//! removes the coupling into the second block; `normalize` reduces a system
//! to its resonant part; `sweep` tabulates certified bounds over a list of
//! radii; `verify` re-derives a run with the independent checkers;
//! `constants` prints every certified constant at full precision.
//!
//! Artifacts land in the `--out` directory: `report.json` (scan, constants,
//! bounds, residuals), `results.json` (full graded coefficients), and
//! `sweep.csv` for sweeps. Files are byte-identical across reruns with the
//! same inputs and seed. Exit codes: 0 success, 1 usage or schema problems,
//! 2 violated hypotheses (resonances, ill-conditioned bases), 3 tolerance
//! failures. `NF_THREADS` caps sweep parallelism.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use perinorm::algebra::SystemSpec;
use perinorm::error::{Error, Result};
use perinorm::job::load_job;
use perinorm::normalform::{invariance_criteria, run_normal_form};
use perinorm::report::{self, Json};
use perinorm::spectrum::{
    check_nonresonance, EigenData, NormalFormConstants, Reduction, UncouplingConstants,
};
use perinorm::uncouple::{run_uncoupling, RunOptions};
use perinorm::verify::{
    delta_sweep, manifold_drift, oracle_normal_form, oracle_uncoupling, ORACLE_MAX_DEGREE,
};

#[derive(Parser)]
#[command(
    name = "perinorm",
    version,
    about = "Certified polynomial reductions of time-periodic vector fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan small divisors, evaluate the constants, list resonances.
    Check(JobArgs),
    /// Uncouple the second block up to a certified remainder.
    Uncouple(JobArgs),
    /// Reduce the system to its resonant part plus a certified remainder.
    Normalize(JobArgs),
    /// Run several radii and tabulate how the certified bound decays.
    Sweep(SweepArgs),
    /// Re-derive a run with the independent checkers and compare.
    Verify(JobArgs),
    /// Print every certified constant with full precision.
    Constants(JobArgs),
}

#[derive(Args, Clone)]
struct JobArgs {
    /// System description file (JSON).
    input: PathBuf,
    /// Radius of the ball the bound is certified on.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Truncation degree override (the optimal degree is used when absent).
    #[arg(long)]
    p: Option<u32>,
    /// Cap on the highest computed remainder degree.
    #[arg(long)]
    dmax: Option<u32>,
    /// Diophantine exponent of the non-resonance certificate.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Resonance tolerance override.
    #[arg(long)]
    tol_res: Option<f64>,
    /// Seed for the sampled checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory the artifacts are written to.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Comma-separated list of radii, largest first.
    #[arg(long, value_delimiter = ',', required = true)]
    delta_list: Vec<f64>,
}

impl JobArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            delta: self.delta,
            p_override: self.p,
            tau: self.tau,
            tol_res: self.tol_res,
            d_max: self.dmax,
            seed: self.seed,
            ..RunOptions::default()
        }
    }

    fn load(&self) -> Result<SystemSpec> {
        load_job(&self.input)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        report::write_text(&path, text)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn nf_threads() -> Option<usize> {
    std::env::var("NF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn describe(spec: &SystemSpec) {
    println!(
        "system {}: m0={} m1={} deg_V={} fourier<= {}",
        spec.label,
        spec.m0,
        spec.m1,
        spec.deg_v(),
        spec.v_max_mode()
    );
}

fn cmd_check(args: &JobArgs) -> Result<()> {
    let spec = args.load()?;
    describe(&spec);
    let reduction = if spec.m1 > 0 {
        Reduction::Uncoupling
    } else {
        Reduction::NormalForm
    };
    let eig = EigenData::from_spec(&spec, reduction)?;
    let tol_res = args.tol_res.unwrap_or_else(|| eig.default_tol_res());
    let cap = args.p.map(|p| p.max(2)).unwrap_or(4).max(args.dmax.unwrap_or(0));
    let scan = check_nonresonance(&eig, args.tau, tol_res, cap, spec.k_needed(cap))?;
    println!(
        "scan: gamma_eff={:.6e} over degrees<= {} modes<= {}; {} resonant, {} borderline",
        scan.gamma_eff,
        scan.degree_max,
        scan.fourier_max,
        scan.resonant.len(),
        scan.borderline.len()
    );
    for t in &scan.resonant {
        println!(
            "resonant: alpha={:?} k={} j={} |divisor|={:.3e}",
            t.alpha.exponents(),
            t.k,
            t.j,
            t.divisor_abs
        );
    }

    let mut body = vec![
        ("label", Json::Str(spec.label.clone())),
        ("route", Json::Str("check".to_string())),
        ("scan", report::scan_json(&scan)),
    ];
    match reduction {
        Reduction::Uncoupling => {
            // Constants only exist on a clean scan; report the scan either way.
            if scan.resonant.is_empty() {
                let constants = UncouplingConstants::new(&spec, &eig, scan.gamma_eff, args.tau)?;
                println!(
                    "constants: b={:.6e} omega={:.6e} delta_star={:.6e} p_opt({:.3e})={}",
                    constants.b,
                    constants.omega_decay,
                    constants.delta_star,
                    args.delta,
                    constants.p_opt(args.delta)
                );
                body.push(("constants", report::uncoupling_constants_json(&constants)));
            }
        }
        Reduction::NormalForm => {
            let constants = NormalFormConstants::new(&spec, &eig, scan.gamma_eff, args.tau)?;
            println!(
                "constants: b={:.6e} omega={:.6e} delta_star={:.6e} p_opt({:.3e})={}",
                constants.b,
                constants.omega_decay,
                constants.delta_star,
                args.delta,
                constants.p_opt(args.delta)
            );
            body.push(("constants", report::normal_form_constants_json(&constants)));
        }
    }
    args.write("report.json", &Json::obj(body).render()?)?;
    if reduction == Reduction::Uncoupling {
        scan.require_clean()?;
    }
    Ok(())
}

fn cmd_uncouple(args: &JobArgs) -> Result<()> {
    let spec = args.load()?;
    describe(&spec);
    let run = run_uncoupling(&spec, &args.options())?;
    println!(
        "uncouple: p={} (optimal {}) certified={:.6e} sampled={:.6e} a-priori={:.6e}{}",
        run.p,
        run.p_opt,
        run.certified_bound,
        run.sampled_sup,
        run.a_priori_bound,
        if run.a_priori_applicable {
            " (applicable)"
        } else {
            ""
        }
    );
    println!(
        "residuals: identity={:.3e} stage={:.3e}",
        run.identity_residual, run.stage_residual
    );
    args.write("report.json", &report::uncoupling_report(&run).render()?)?;
    args.write("results.json", &report::uncoupling_results(&run).render()?)?;
    Ok(())
}

fn cmd_normalize(args: &JobArgs) -> Result<()> {
    let spec = args.load()?;
    describe(&spec);
    let opts = args.options();
    let run = run_normal_form(&spec, &opts)?;
    let criteria = invariance_criteria(&spec, &run, &opts)?;
    println!(
        "normalize: p={} (optimal {}) computed_bound={:.6e} sampled={:.6e} a-priori={:.6e}{}",
        run.p,
        run.p_opt,
        run.computed_bound,
        run.sampled_sup,
        run.a_priori_bound,
        if run.a_priori_applicable {
            " (applicable)"
        } else {
            ""
        }
    );
    if let Some(tail) = run.tail_estimate {
        println!(
            "tail: estimated {:.3e} beyond degree {} (ratio {:.3})",
            tail,
            run.cap_r,
            run.tail_ratio.unwrap_or(f64::NAN)
        );
    }
    println!(
        "criteria: invariance={:.3e} coefficient={:.3e} controls=({:.3e}, {:.3e}) ok={}",
        criteria.invariance_residual,
        criteria.coefficient_residual,
        criteria.control_invariance,
        criteria.control_coefficient,
        criteria.ok
    );
    args.write(
        "report.json",
        &report::normal_form_report(&run, Some(&criteria)).render()?,
    )?;
    args.write("results.json", &report::normal_form_results(&run).render()?)?;
    if !criteria.ok {
        return Err(Error::ToleranceFailure {
            what: "normal-form invariance criteria".into(),
            residual: criteria
                .invariance_residual
                .max(criteria.coefficient_residual),
            tol: perinorm::tol::CRITERIA_SAMPLED,
        });
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let spec = args.job.load()?;
    describe(&spec);
    let report = delta_sweep(&spec, &args.delta_list, &args.job.options(), nf_threads())?;
    for row in &report.rows {
        println!(
            "delta={:.6e} p={} certified={:.6e} a-priori={:.6e}",
            row.delta, row.p, row.certified_bound, row.a_priori_bound
        );
    }
    println!(
        "sweep: strictly_decreasing={} slope={} (needs <= {:.6e})",
        report.strictly_decreasing,
        report
            .log_slope
            .map(|s| format!("{s:.6e}"))
            .unwrap_or_else(|| "n/a".to_string()),
        -report.omega / 2.0
    );
    args.job.write("sweep.csv", &report::sweep_csv(&report))?;
    args.job
        .write("report.json", &report::sweep_json(&report).render()?)?;
    if !(report.strictly_decreasing && report.slope_ok) {
        return Err(Error::ToleranceFailure {
            what: "sweep decay".into(),
            residual: report.log_slope.unwrap_or(f64::NAN),
            tol: -report.omega / 2.0,
        });
    }
    Ok(())
}

fn cmd_verify(args: &JobArgs) -> Result<()> {
    let spec = args.load()?;
    describe(&spec);
    let mut opts = args.options();
    // The dense cross-check is exact but only tractable at low degree; cap
    // the run accordingly rather than comparing a truncation.
    opts.p_override = Some(
        opts.p_override
            .unwrap_or(ORACLE_MAX_DEGREE)
            .min(ORACLE_MAX_DEGREE),
    );
    let mut body: Vec<(&str, Json)> = vec![("label", Json::Str(spec.label.clone()))];
    if spec.m1 > 0 {
        let run = run_uncoupling(&spec, &opts)?;
        let oracle = oracle_uncoupling(&spec, &run)?;
        println!(
            "oracle: phi_gap={:.3e} kernel_match={} ok={}",
            oracle.phi_gap, oracle.kernel_match, oracle.ok
        );
        let u0 = DVector::from_element(spec.m0, 0.5 * run.delta / (spec.m0 as f64).sqrt());
        let drift = manifold_drift(&spec, &run, &u0, spec.period, 2000)?;
        println!(
            "drift: sup={:.3e} allowed={:.3e} zeroed={:.3e} pushforward={:.3e} ok={}",
            drift.sup_drift,
            drift.allowed_drift,
            drift.zeroed_drift,
            drift.pushforward_defect,
            drift.ok
        );
        let ok = oracle.ok && drift.ok;
        body.push(("route", Json::Str("uncouple".to_string())));
        body.push(("oracle", report::oracle_json(&oracle)));
        body.push(("drift", report::drift_json(&drift)));
        body.push(("ok", Json::Bool(ok)));
        args.write("report.json", &Json::obj(body).render()?)?;
        if !ok {
            return Err(Error::ToleranceFailure {
                what: "independent verification".into(),
                residual: oracle.phi_gap.max(drift.sup_drift),
                tol: perinorm::tol::ORACLE_GAP,
            });
        }
    } else {
        let run = run_normal_form(&spec, &opts)?;
        let oracle = oracle_normal_form(&spec, &run)?;
        println!(
            "oracle: phi_gap={:.3e} resonant_gap={:.3e} kernel_match={} ok={}",
            oracle.phi_gap, oracle.resonant_gap, oracle.kernel_match, oracle.ok
        );
        let criteria = invariance_criteria(&spec, &run, &opts)?;
        println!(
            "criteria: invariance={:.3e} coefficient={:.3e} ok={}",
            criteria.invariance_residual, criteria.coefficient_residual, criteria.ok
        );
        let ok = oracle.ok && criteria.ok;
        body.push(("route", Json::Str("normalize".to_string())));
        body.push(("oracle", report::oracle_json(&oracle)));
        body.push(("criteria", report::criteria_json(&criteria)));
        body.push(("ok", Json::Bool(ok)));
        args.write("report.json", &Json::obj(body).render()?)?;
        if !ok {
            return Err(Error::ToleranceFailure {
                what: "independent verification".into(),
                residual: oracle.phi_gap.max(criteria.invariance_residual),
                tol: perinorm::tol::ORACLE_GAP,
            });
        }
    }
    Ok(())
}

fn cmd_constants(args: &JobArgs) -> Result<()> {
    let spec = args.load()?;
    describe(&spec);
    let reduction = if spec.m1 > 0 {
        Reduction::Uncoupling
    } else {
        Reduction::NormalForm
    };
    let eig = EigenData::from_spec(&spec, reduction)?;
    let tol_res = args.tol_res.unwrap_or_else(|| eig.default_tol_res());
    let cap = args.p.map(|p| p.max(2)).unwrap_or(4);
    let scan = check_nonresonance(&eig, args.tau, tol_res, cap, spec.k_needed(cap))?;
    if reduction == Reduction::Uncoupling {
        scan.require_clean()?;
    }
    let body = match reduction {
        Reduction::Uncoupling => {
            let k = UncouplingConstants::new(&spec, &eig, scan.gamma_eff, args.tau)?;
            println!("gamma = {:.16e}", k.gamma);
            println!("tau = {:.16e}", k.tau);
            println!("nu = {}", k.nu);
            println!("lambda_max = {:.16e}", k.lambda_max);
            for (j, c) in k.c_j.iter().enumerate() {
                println!("c_{j} = {c:.16e}");
            }
            println!("conv = {:.16e}", k.conv);
            println!("p0_norm = {:.16e}", k.p0_norm);
            println!("cap_k = {:.16e}", k.cap_k);
            println!("b = {:.16e}", k.b);
            println!("omega = {:.16e}", k.omega_decay);
            println!("delta_star = {:.16e}", k.delta_star);
            println!("m_big = {:.16e}", k.m_big);
            println!("m_one = {:.16e}", k.m_one);
            println!("m_zero = {:.16e}", k.m_zero);
            println!("p_opt({:.3e}) = {}", args.delta, k.p_opt(args.delta));
            report::uncoupling_constants_json(&k)
        }
        Reduction::NormalForm => {
            let k = NormalFormConstants::new(&spec, &eig, scan.gamma_eff, args.tau)?;
            println!("gamma = {:.16e}", k.gamma);
            println!("tau = {:.16e}", k.tau);
            println!("lambda_max = {:.16e}", k.lambda_max);
            for (j, c) in k.c_j.iter().enumerate() {
                println!("c_{j} = {c:.16e}");
            }
            println!("conv = {:.16e}", k.conv);
            println!("cap_c = {:.16e}", k.cap_c);
            println!("b = {:.16e}", k.b);
            println!("omega = {:.16e}", k.omega_decay);
            println!("delta_star = {:.16e}", k.delta_star);
            println!("script_m = {:.16e}", k.script_m);
            println!("m_prime = {:.16e}", k.m_prime);
            println!("p_opt({:.3e}) = {}", args.delta, k.p_opt(args.delta));
            report::normal_form_constants_json(&k)
        }
    };
    let wrapped = Json::obj([
        ("label", Json::Str(spec.label.clone())),
        ("route", Json::Str("constants".to_string())),
        ("scan", report::scan_json(&scan)),
        ("constants", body),
    ]);
    args.write("report.json", &wrapped.render()?)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Uncouple(args) => cmd_uncouple(args),
        Command::Normalize(args) => cmd_normalize(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Constants(args) => cmd_constants(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
