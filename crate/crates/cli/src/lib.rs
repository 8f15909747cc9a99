//! Command-line pipelines: parse a system definition, run the certification
//! chain, simulate trajectories against the envelope, and sweep initial
//! conditions. Each infeasibility class maps to a stable exit code so
//! scripts can branch on the failure kind:
//!
//! | code | meaning                                         |
//! |------|-------------------------------------------------|
//! | 0    | feasible / success                              |
//! | 2    | invalid input (parse, schema, parameters, I/O)  |
//! | 3    | pair (A, B) uncontrollable                      |
//! | 4    | repeated or clustered closed-loop eigenvalues   |
//! | 5    | condition (*) infeasible / unstable closed loop |
//! | 6    | delta infeasible (gamma >= lambda_m or c too big)|

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use roacert::certifier::{self, remainder_bound_auto, Certificate, RemainderModel};
use roacert::report::{CertificateReport, StabilityReportDoc, SweepSummaryDoc};
use roacert::scenarios;
use roacert::simulator::{
    self, eventual_las_metrics, integrate, sweep_roa, verify_envelope, write_sweep_csv,
    write_trajectory_csv,
};
use roacert::synthesis::{self, GainSynthesis};
use roacert::sysmodel::{schema::SystemFile, SystemDefinition};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_EPSILON_TILDE: f64 = 1e-3;
pub const DEFAULT_SWEEP_SEED: u64 = 42;
pub const DEFAULT_SWEEP_T_END: f64 = 60.0;
const SWEEP_DIRECTIONS: usize = 16;

#[derive(Debug, Parser)]
#[command(
    name = "roacert",
    version,
    about = "Certified region-of-attraction bounds for perturbed nonlinear control systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check feasibility and write the certificate reports.
    Certify(CertifyArgs),
    /// Certify, integrate one trajectory, and verify it against the envelope.
    Simulate(SimulateArgs),
    /// Certify and integrate from spheres of initial conditions.
    Sweep(SweepArgs),
    /// Run the bundled demonstration scenario end to end.
    Example1(Example1Args),
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// System definition JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for reports (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Back-off fraction in [0, 1) applied to the limiting Gamma0.
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Integration step.
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    /// Integration horizon; defaults to the certificate's suggested horizon.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Settling threshold for the reported t*.
    #[arg(long, default_value_t = DEFAULT_EPSILON_TILDE)]
    pub epsilon_tilde: f64,
    /// Initial state as comma-separated values; defaults to a point at
    /// 0.9·delta along the diagonal direction.
    #[arg(long)]
    pub x0: Option<String>,
    /// Simulate even when certification fails (envelope columns become NaN).
    #[arg(long)]
    pub uncertified: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = DEFAULT_SWEEP_T_END)]
    pub t_end: f64,
    /// Sphere radii as comma-separated ascending values; defaults to
    /// multiples of the certified delta (0.25x to 8x).
    #[arg(long)]
    pub radii: Option<String>,
    /// Seed for the deterministic direction set.
    #[arg(long, default_value_t = DEFAULT_SWEEP_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Example1Args {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    /// Long enough for the convergence verdict (final norm < 1e-8 |x0|).
    #[arg(long, default_value_t = 60.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON_TILDE)]
    pub epsilon_tilde: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] roacert::Error),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{inner}; pass --uncertified to simulate anyway")]
    InfeasibleWithoutFlag { inner: roacert::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::InfeasibleWithoutFlag { inner } => core_exit_code(inner),
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &roacert::Error) -> i32 {
    use roacert::Error::*;
    match e {
        Uncontrollable { .. } => 3,
        RepeatedEigenvalues { .. } | Eigendecomposition(_) | PlacementFailed { .. } => 4,
        ConditionInfeasible { .. } | UnstableClosedLoop { .. } => 5,
        DeltaInfeasible { .. } => 6,
        _ => 2,
    }
}

/// Parse the process arguments, run the selected pipeline, and return the
/// process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Certify(args) => run_certify(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::Example1(args) => run_example1(&args),
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn load_system(path: &Path) -> Result<SystemDefinition, CliError> {
    let text = read_to_string(path)?;
    Ok(SystemFile::parse(&text)?.into_system()?)
}

struct CertifiedChain {
    synth: GainSynthesis,
    model: RemainderModel,
    cert: Certificate,
}

fn certify_chain(system: &SystemDefinition, margin: f64) -> Result<CertifiedChain, roacert::Error> {
    let synth = synthesis::synthesize(system)?;
    let model = remainder_bound_auto(&system.field, &synth.k)?;
    let cert = certifier::certify_with_synthesis(&synth, &system.perturbation, &model, margin)?;
    Ok(CertifiedChain { synth, model, cert })
}

fn write_certificate_reports(
    out: &Path,
    system: &SystemDefinition,
    chain: &CertifiedChain,
    margin: f64,
) -> Result<(), CliError> {
    let report = CertificateReport::new(system, &chain.synth, &chain.model, &chain.cert, margin);
    write_file(out, "certificate.json", report.to_json_pretty().as_bytes())?;
    write_file(out, "certificate.txt", report.human_text().as_bytes())?;
    Ok(())
}

fn print_certificate_summary(chain: &CertifiedChain) {
    println!("||K|| = {:.6}", chain.synth.k_norm());
    println!("eta = {:.6}", chain.synth.eta);
    println!("epsilon0 = {:.6}", chain.cert.epsilon0);
    println!("delta = {:.6}", chain.cert.delta);
}

pub fn run_certify(args: &CertifyArgs) -> Result<(), CliError> {
    let system = load_system(&args.input)?;
    ensure_out_dir(&args.out)?;
    let chain = certify_chain(&system, args.margin)?;
    write_certificate_reports(&args.out, &system, &chain, args.margin)?;
    print_certificate_summary(&chain);
    println!("verdict: feasible");
    println!(
        "wrote certificate.json, certificate.txt to {}",
        args.out.display()
    );
    Ok(())
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("invalid {what} entry '{s}': {e}")))
        })
        .collect()
}

fn check_epsilon_tilde(value: f64) -> Result<(), CliError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--epsilon-tilde must be positive, got {value}"
        )))
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    check_epsilon_tilde(args.epsilon_tilde)?;
    let system = load_system(&args.input)?;
    ensure_out_dir(&args.out)?;

    // Synthesis failures are always fatal; --uncertified only bypasses an
    // infeasible certificate.
    let synth = synthesis::synthesize(&system).map_err(CliError::Core)?;
    let model = remainder_bound_auto(&system.field, &synth.k)?;
    let cert = match certifier::certify_with_synthesis(
        &synth,
        &system.perturbation,
        &model,
        args.margin,
    ) {
        Ok(cert) => Some(cert),
        Err(inner) if args.uncertified => {
            eprintln!("warning: running uncertified: {inner}");
            None
        }
        Err(inner) => return Err(CliError::InfeasibleWithoutFlag { inner }),
    };

    let n = system.n();
    let x0 = match (&args.x0, &cert) {
        (Some(text), _) => {
            let values = parse_vector(text, "--x0")?;
            if values.len() != n {
                return Err(CliError::Usage(format!(
                    "--x0 needs {n} entries, got {}",
                    values.len()
                )));
            }
            DVector::from_vec(values)
        }
        (None, Some(cert)) => DVector::from_element(n, 1.0).normalize() * (0.9 * cert.delta),
        (None, None) => {
            return Err(CliError::Usage(
                "--x0 is required when simulating uncertified".into(),
            ))
        }
    };

    let t0 = system.perturbation.t0;
    let t_end = args.t_end.unwrap_or_else(|| match &cert {
        Some(cert) => cert.suggested_t_end(t0),
        None => t0 + 30.0,
    });
    let traj = integrate(&system, &synth, &x0, (t0, t_end), args.dt)?;

    let mut report = match &cert {
        Some(cert) => verify_envelope(&traj, cert),
        None => simulator::uncertified_report(&traj),
    };
    report.t_star = eventual_las_metrics(&traj, args.epsilon_tilde);

    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &traj, cert.as_ref()).map_err(|source| CliError::Io {
        path: args.out.join("trajectory.csv"),
        source,
    })?;
    write_file(&args.out, "trajectory.csv", &csv)?;

    let doc = StabilityReportDoc::new(&report, &traj);
    write_file(
        &args.out,
        "stability_report.json",
        doc.to_json_pretty().as_bytes(),
    )?;

    if let Some(cert) = cert {
        let chain = CertifiedChain { synth, model, cert };
        write_certificate_reports(&args.out, &system, &chain, args.margin)?;
        print_certificate_summary(&chain);
    }
    println!("verdict: {}", report.verdict.as_str());
    println!(
        "t_star: {}",
        report
            .t_star
            .map_or("absent".to_string(), |t| format!("{t:.6}"))
    );
    println!(
        "decay rate fit: {}",
        report
            .decay_rate_fit
            .map_or("n/a".to_string(), |r| format!("{r:.6}"))
    );
    println!(
        "violations: envelope {}, epsilon0 {}",
        report.envelope_violations, report.epsilon0_violations
    );
    println!(
        "wrote trajectory.csv, stability_report.json to {}",
        args.out.display()
    );
    Ok(())
}

pub fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let system = load_system(&args.input)?;
    ensure_out_dir(&args.out)?;
    let chain = certify_chain(&system, args.margin)?;

    let radii = match &args.radii {
        Some(text) => parse_vector(text, "--radii")?,
        None => [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0]
            .iter()
            .map(|f| f * chain.cert.delta)
            .collect(),
    };

    let table = sweep_roa(
        &system,
        &chain.synth,
        &chain.cert,
        &radii,
        SWEEP_DIRECTIONS,
        args.t_end,
        args.dt,
        args.seed,
    )?;
    let summary = table.summary();

    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &table).map_err(|source| CliError::Io {
        path: args.out.join("sweep.csv"),
        source,
    })?;
    write_file(&args.out, "sweep.csv", &csv)?;
    let doc = SweepSummaryDoc::from(&summary);
    write_file(
        &args.out,
        "sweep_summary.json",
        doc.to_json_pretty().as_bytes(),
    )?;
    write_certificate_reports(&args.out, &system, &chain, args.margin)?;

    println!(
        "certified delta = {:.6} (seed {})",
        summary.delta, summary.seed
    );
    if summary.certified_all_converged {
        println!(
            "all certified radii converged ({} runs, {} violations)",
            summary.certified_runs, summary.certified_violations
        );
    } else {
        println!("WARNING: a certified radius failed to converge");
    }
    println!(
        "smallest non-converged radius: {}",
        summary
            .smallest_nonconverged_radius
            .map_or("none found".to_string(), |r| format!("{r:.6}"))
    );
    println!(
        "conservatism ratio: {}",
        summary
            .conservatism_ratio
            .map_or("n/a".to_string(), |r| format!("{r:.2}x"))
    );
    println!(
        "wrote sweep.csv, sweep_summary.json to {}",
        args.out.display()
    );
    Ok(())
}

pub fn run_example1(args: &Example1Args) -> Result<(), CliError> {
    check_epsilon_tilde(args.epsilon_tilde)?;
    let system = scenarios::example1();
    ensure_out_dir(&args.out)?;

    let synth = synthesis::synthesize(&system)?;
    let model = scenarios::example1_manual_remainder(synth.k_norm());
    let cert = certifier::certify_with_synthesis(&synth, &system.perturbation, &model, 0.0)?;
    let chain = CertifiedChain { synth, model, cert };

    write_file(
        &args.out,
        "system.json",
        SystemFile::from_system(&system).to_json_pretty().as_bytes(),
    )?;
    write_certificate_reports(&args.out, &system, &chain, 0.0)?;

    let x0 = DVector::from_vec(scenarios::EXAMPLE1_X0.to_vec());
    let t0 = system.perturbation.t0;
    let traj = integrate(&system, &chain.synth, &x0, (t0, t0 + args.t_end), args.dt)?;
    let mut report = verify_envelope(&traj, &chain.cert);
    report.t_star = eventual_las_metrics(&traj, args.epsilon_tilde);

    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &traj, Some(&chain.cert)).map_err(|source| CliError::Io {
        path: args.out.join("trajectory.csv"),
        source,
    })?;
    write_file(&args.out, "trajectory.csv", &csv)?;
    let doc = StabilityReportDoc::new(&report, &traj);
    write_file(
        &args.out,
        "stability_report.json",
        doc.to_json_pretty().as_bytes(),
    )?;

    print_certificate_summary(&chain);
    println!("verdict: {}", report.verdict.as_str());
    println!(
        "wrote system.json, certificate.json, certificate.txt, trajectory.csv, \
         stability_report.json to {}",
        args.out.display()
    );
    Ok(())
}
