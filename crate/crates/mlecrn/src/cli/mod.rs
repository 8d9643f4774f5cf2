//! Command-line pipeline: compile design matrices into reaction network
//! text, simulate the dynamics, solve the convex program, and cross-check
//! the two routes.
//!
//! Exit codes: 0 success (and verification pass), 1 verification failure or
//! a computation that could not finish, 2 malformed input.

pub mod formats;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::crn::textfmt::emit_network;
use crate::crn::{
    build_mld_network, build_mle_network, enumerate_siphons, is_critical_siphon, ReactionNetwork,
};
use crate::dynamics::{perturb_rates, simulate, SimOptions, SimStatus};
use crate::inference::{
    mld_oracle_frequencies, solve_mle, solve_mle_from_frequencies, verify_equivalence_frequencies,
    InferenceError, MleResult, VerifyReport, DEFAULT_VERIFY_TOL,
};
use crate::matrix::DesignMatrix;
use formats::{
    parse_matrix_file, parse_rates_text, parse_theta0, resolve_data, to_json_string, DataInput,
};

pub use crate::crn::textfmt::{parse_network as parse_crn, ParseError, ParsedNetwork};

#[derive(Debug, Parser)]
#[command(
    name = "mlecrn",
    version,
    about = "Compile log-linear models into mass-action reaction networks, \
             simulate them, and check their equilibria against a convex solver"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Output format for reports
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetworkKind {
    /// Distribution network: one reversible reaction per kernel-lattice generator
    Mld,
    /// Estimator network: adds parameter species and readout reactions
    Mle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write reaction network text for a design matrix
    Compile(CompileArgs),
    /// Integrate the mass-action dynamics from the data point
    Simulate(SimulateArgs),
    /// Solve for the maximum-likelihood distribution and parameters
    Mle(MleArgs),
    /// Simulate, solve, and compare the two equilibria
    Verify(VerifyArgs),
    /// List minimal siphons of the compiled network with criticality flags
    Siphons(SiphonsArgs),
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Matrix file: `m n` header then m integer rows
    #[arg(long)]
    pub matrix: PathBuf,
    /// Directory for mld.crn and mle.crn
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Matrix file: `m n` header then m integer rows
    #[arg(long)]
    pub matrix: PathBuf,
    /// Counts like "3,1,0", frequencies summing to 1, or a file of either
    #[arg(long)]
    pub data: String,
    /// Which compiled network to integrate
    #[arg(long, value_enum, default_value = "mld")]
    pub network: NetworkKind,
    /// Initial parameter concentrations: "zero" or a comma list (mle only)
    #[arg(long)]
    pub theta0: Option<String>,
    /// File of per-reaction rate overrides, in network order
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Rate perturbation radius
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Seed for the perturbation draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration horizon override
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Relative step-error tolerance override
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute step-error tolerance override
    #[arg(long)]
    pub atol: Option<f64>,
    /// Directory for trajectory.csv and equilibrium.json
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MleArgs {
    /// Matrix file: `m n` header then m integer rows
    #[arg(long)]
    pub matrix: PathBuf,
    /// Counts like "3,1,0", frequencies summing to 1, or a file of either
    #[arg(long)]
    pub data: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Matrix file: `m n` header then m integer rows
    #[arg(long)]
    pub matrix: PathBuf,
    /// Counts like "3,1,0", frequencies summing to 1, or a file of either
    #[arg(long)]
    pub data: String,
    /// File of per-reaction rate overrides, in network order
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Rate perturbation radius
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Seed for the perturbation draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration horizon override
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Relative step-error tolerance override
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute step-error tolerance override
    #[arg(long)]
    pub atol: Option<f64>,
    /// Equivalence tolerance on the L-infinity distance
    #[arg(long, default_value_t = DEFAULT_VERIFY_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SiphonsArgs {
    /// Matrix file: `m n` header then m integer rows
    #[arg(long)]
    pub matrix: PathBuf,
    /// Which compiled network to analyze
    #[arg(long, value_enum, default_value = "mld")]
    pub network: NetworkKind,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug)]
struct CliError {
    exit_code: i32,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_INPUT, kind, message: message.into() }
    }

    fn failed(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_FAILED, kind, message: message.into() }
    }
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: &'a str,
}

/// Parses argv and runs; the return value is the process exit code.
pub fn run_from_args() -> i32 {
    let config = match RunConfig::try_parse() {
        Ok(config) => config,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    run_pipeline(config)
}

/// Runs one parsed command and reports per the configured format.
pub fn run_pipeline(config: RunConfig) -> i32 {
    let format = config.format;
    let result = match config.command {
        Command::Compile(args) => cmd_compile(&args, format),
        Command::Simulate(args) => cmd_simulate(&args, format),
        Command::Mle(args) => cmd_mle(&args, format),
        Command::Verify(args) => cmd_verify(&args, format),
        Command::Siphons(args) => cmd_siphons(&args, format),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            match format {
                OutputFormat::Json => {
                    let doc = ErrorDoc {
                        error: ErrorBody { kind: e.kind, message: &e.message },
                    };
                    println!("{}", to_json_string(&doc));
                }
                OutputFormat::Text => eprintln!("error: {}", e.message),
            }
            e.exit_code
        }
    }
}

fn load_matrix(path: &Path) -> Result<DesignMatrix, CliError> {
    parse_matrix_file(path).map_err(|e| CliError::input("matrix", e.to_string()))
}

fn load_data(arg: &str, a: &DesignMatrix) -> Result<DataInput, CliError> {
    let data = resolve_data(arg).map_err(|e| CliError::input("data", e))?;
    if data.len() != a.cols() {
        return Err(CliError::input(
            "data",
            format!("data vector has {} entries, matrix has {} columns", data.len(), a.cols()),
        ));
    }
    Ok(data)
}

fn classify_inference(e: InferenceError) -> CliError {
    match e {
        InferenceError::EmptyData
        | InferenceError::DimensionMismatch { .. }
        | InferenceError::InvalidFrequencies(_)
        | InferenceError::NonPositiveProbability
        | InferenceError::NonPositiveTheta
        | InferenceError::NonPositiveX => CliError::input("inference", e.to_string()),
        InferenceError::PolytopeEmptyOrBoundary => CliError::failed("boundary", e.to_string()),
        _ => CliError::failed("inference", e.to_string()),
    }
}

/// Kernel basis plus the distribution network, shared by most commands.
///
/// The network is built from the Markov basis of the kernel lattice — the
/// saturated generating set — so that no minimal siphon of the result is
/// critical and trajectories cannot be trapped on a boundary face. The plain
/// kernel basis is returned alongside for residual diagnostics.
fn compile_mld(a: &DesignMatrix) -> Result<(crate::matrix::KernelBasis, ReactionNetwork), CliError> {
    let basis = a
        .kernel_basis()
        .map_err(|e| CliError::failed("kernel", e.to_string()))?;
    let generators = a
        .markov_basis()
        .map_err(|e| CliError::failed("kernel", e.to_string()))?;
    let net = build_mld_network(a, &generators);
    Ok((basis, net))
}

fn compile_mle(a: &DesignMatrix) -> Result<(crate::matrix::KernelBasis, ReactionNetwork), CliError> {
    if a.has_negative_entries() {
        return Err(CliError::input(
            "matrix",
            "the estimator network needs a nonnegative matrix; negative exponents \
             cannot appear as reactant stoichiometries",
        ));
    }
    let basis = a
        .kernel_basis()
        .map_err(|e| CliError::failed("kernel", e.to_string()))?;
    let generators = a
        .markov_basis()
        .map_err(|e| CliError::failed("kernel", e.to_string()))?;
    let net = build_mle_network(a, &generators, &a.independent_columns())
        .map_err(|e| CliError::failed("network", e.to_string()))?;
    Ok((basis, net))
}

fn apply_rate_flags(
    net: ReactionNetwork,
    rates: Option<&PathBuf>,
    delta: f64,
    seed: u64,
) -> Result<ReactionNetwork, CliError> {
    let mut net = net;
    if let Some(path) = rates {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("rates", format!("cannot read {}: {e}", path.display())))?;
        let rates = parse_rates_text(&text).map_err(|e| CliError::input("rates", e))?;
        net = net.with_rates(&rates).map_err(|e| CliError::input("rates", e.to_string()))?;
    }
    if delta != 0.0 {
        let perturbed = perturb_rates(&net, delta, seed)
            .map_err(|e| CliError::input("delta", e.to_string()))?;
        net = perturbed.network;
    }
    Ok(net)
}

fn sim_options(
    tmax: Option<f64>,
    rtol: Option<f64>,
    atol: Option<f64>,
) -> SimOptions {
    let mut opts = SimOptions::default();
    if let Some(t) = tmax {
        opts.t_max = t;
    }
    if let Some(r) = rtol {
        opts.rel_tol = r;
    }
    if let Some(a) = atol {
        opts.abs_tol = a;
    }
    opts
}

#[derive(Serialize)]
struct NetworkDoc {
    path: String,
    species: Vec<String>,
    reactions: usize,
}

#[derive(Serialize)]
struct CompileDoc {
    mld: NetworkDoc,
    mle: Option<NetworkDoc>,
    warnings: Vec<String>,
}

fn network_doc(path: &Path, net: &ReactionNetwork) -> NetworkDoc {
    NetworkDoc {
        path: path.display().to_string(),
        species: net.species().to_vec(),
        reactions: net.n_reactions(),
    }
}

fn cmd_compile(args: &CompileArgs, format: OutputFormat) -> Result<i32, CliError> {
    let a = load_matrix(&args.matrix)?;
    let (_, mld) = compile_mld(&a)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input("out", format!("cannot create {}: {e}", args.out.display())))?;
    let mld_path = args.out.join("mld.crn");
    std::fs::write(&mld_path, emit_network(&mld))
        .map_err(|e| CliError::input("out", format!("cannot write {}: {e}", mld_path.display())))?;

    let mut warnings = Vec::new();
    let mle_doc = if a.has_negative_entries() {
        warnings.push(
            "matrix has negative entries; estimator network skipped (distribution \
             network only)"
                .to_string(),
        );
        None
    } else {
        let (_, mle) = compile_mle(&a)?;
        let mle_path = args.out.join("mle.crn");
        std::fs::write(&mle_path, emit_network(&mle)).map_err(|e| {
            CliError::input("out", format!("cannot write {}: {e}", mle_path.display()))
        })?;
        Some(network_doc(&mle_path, &mle))
    };

    let doc = CompileDoc {
        mld: network_doc(&mld_path, &mld),
        mle: mle_doc,
        warnings,
    };
    match format {
        OutputFormat::Json => println!("{}", to_json_string(&doc)),
        OutputFormat::Text => {
            println!(
                "wrote {} ({} species, {} reactions)",
                doc.mld.path,
                doc.mld.species.len(),
                doc.mld.reactions
            );
            if let Some(mle) = &doc.mle {
                println!(
                    "wrote {} ({} species, {} reactions)",
                    mle.path,
                    mle.species.len(),
                    mle.reactions
                );
            }
            for w in &doc.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateDoc {
    status: SimStatus,
    t_final: f64,
    recorded_steps: usize,
    species: Vec<String>,
    final_state: Vec<f64>,
    equilibrium: Option<Vec<f64>>,
    trajectory_csv: String,
    equilibrium_json: String,
}

fn initial_state(
    kind: NetworkKind,
    a: &DesignMatrix,
    data: &DataInput,
    theta0: Option<&String>,
) -> Result<Vec<f64>, CliError> {
    let mut x0 = data.frequencies();
    match kind {
        NetworkKind::Mld => {
            if theta0.is_some() {
                return Err(CliError::input(
                    "theta0",
                    "--theta0 applies only with --network mle",
                ));
            }
        }
        NetworkKind::Mle => {
            let arg = theta0.map(String::as_str).unwrap_or("zero");
            let theta = parse_theta0(arg, a.rows()).map_err(|e| CliError::input("theta0", e))?;
            x0.extend(theta);
        }
    }
    Ok(x0)
}

fn run_simulation(
    net: &ReactionNetwork,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<crate::dynamics::Trajectory, CliError> {
    simulate(net, x0, opts).map_err(|e| match e {
        crate::dynamics::DynamicsError::NonFiniteState { .. } => {
            CliError::failed("simulation", e.to_string())
        }
        other => CliError::input("simulation", other.to_string()),
    })
}

fn cmd_simulate(args: &SimulateArgs, format: OutputFormat) -> Result<i32, CliError> {
    let a = load_matrix(&args.matrix)?;
    let data = load_data(&args.data, &a)?;
    let (_, net) = match args.network {
        NetworkKind::Mld => compile_mld(&a)?,
        NetworkKind::Mle => compile_mle(&a)?,
    };
    let net = apply_rate_flags(net, args.rates.as_ref(), args.delta, args.seed)?;
    let x0 = initial_state(args.network, &a, &data, args.theta0.as_ref())?;
    let opts = sim_options(args.tmax, args.rtol, args.atol);
    let trajectory = run_simulation(&net, &x0, &opts)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input("out", format!("cannot create {}: {e}", args.out.display())))?;
    let csv_path = args.out.join("trajectory.csv");
    let file = std::fs::File::create(&csv_path)
        .map_err(|e| CliError::input("out", format!("cannot write {}: {e}", csv_path.display())))?;
    formats::write_trajectory_csv(std::io::BufWriter::new(file), net.species(), &trajectory)
        .map_err(|e| CliError::input("out", format!("cannot write {}: {e}", csv_path.display())))?;

    let doc = SimulateDoc {
        status: trajectory.status,
        t_final: trajectory.final_time(),
        recorded_steps: trajectory.times.len(),
        species: net.species().to_vec(),
        final_state: trajectory.final_state().to_vec(),
        equilibrium: trajectory.equilibrium.clone(),
        trajectory_csv: csv_path.display().to_string(),
        equilibrium_json: args.out.join("equilibrium.json").display().to_string(),
    };
    let json_path = args.out.join("equilibrium.json");
    std::fs::write(&json_path, to_json_string(&doc))
        .map_err(|e| CliError::input("out", format!("cannot write {}: {e}", json_path.display())))?;

    match format {
        OutputFormat::Json => println!("{}", to_json_string(&doc)),
        OutputFormat::Text => {
            println!("status: {:?} at t = {}", doc.status, doc.t_final);
            for (name, v) in doc.species.iter().zip(&doc.final_state) {
                println!("  {name} = {v}");
            }
            println!("wrote {}", doc.trajectory_csv);
            println!("wrote {}", doc.equilibrium_json);
        }
    }
    Ok(if trajectory.status == SimStatus::StepFailure { EXIT_FAILED } else { EXIT_OK })
}

fn solve_for(a: &DesignMatrix, data: &DataInput) -> Result<MleResult, InferenceError> {
    match data {
        DataInput::Counts(u) => solve_mle(a, u),
        DataInput::Frequencies(q) => solve_mle_from_frequencies(a, q),
    }
}

fn cmd_mle(args: &MleArgs, format: OutputFormat) -> Result<i32, CliError> {
    let a = load_matrix(&args.matrix)?;
    let data = load_data(&args.data, &a)?;
    let result = solve_for(&a, &data).map_err(classify_inference)?;
    match format {
        OutputFormat::Json => println!("{}", to_json_string(&result)),
        OutputFormat::Text => {
            println!("p_hat: {:?}", result.p_hat);
            println!("theta_hat: {:?}", result.theta_hat);
            println!("log_likelihood: {}", result.log_likelihood);
            println!(
                "residuals: birch {:e}, moment {:e}, monomial {:e}",
                result.residuals.birch, result.residuals.moment, result.residuals.monomial
            );
            println!("theta_unique: {}", result.flags.theta_unique);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, format: OutputFormat) -> Result<i32, CliError> {
    let a = load_matrix(&args.matrix)?;
    let data = load_data(&args.data, &a)?;
    let (basis, net) = compile_mld(&a)?;
    let net = apply_rate_flags(net, args.rates.as_ref(), args.delta, args.seed)?;
    let q = data.frequencies();
    let opts = sim_options(args.tmax, args.rtol, args.atol);
    let trajectory = run_simulation(&net, &q, &opts)?;
    let oracle_p = mld_oracle_frequencies(&a, &q).map_err(classify_inference)?;
    let report = verify_equivalence_frequencies(
        &a,
        &basis,
        &q,
        trajectory.final_state(),
        &oracle_p,
        args.tol,
    );
    emit_verify(&report, format);
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}

fn emit_verify(report: &VerifyReport, format: OutputFormat) {
    match format {
        OutputFormat::Json => println!("{}", to_json_string(report)),
        OutputFormat::Text => {
            println!(
                "L-infinity distance {:e} (tolerance {:e})",
                report.linf_distance, report.tolerance
            );
            println!(
                "simulated: birch {:e}, moment {:e}",
                report.simulated.birch_residual, report.simulated.moment_residual
            );
            println!(
                "oracle:    birch {:e}, moment {:e}",
                report.oracle.birch_residual, report.oracle.moment_residual
            );
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
        }
    }
}

#[derive(Serialize)]
struct SiphonDoc {
    members: Vec<String>,
    critical: bool,
}

#[derive(Serialize)]
struct SiphonsDoc {
    species: Vec<String>,
    siphons: Vec<SiphonDoc>,
}

fn cmd_siphons(args: &SiphonsArgs, format: OutputFormat) -> Result<i32, CliError> {
    let a = load_matrix(&args.matrix)?;
    let (_, net) = match args.network {
        NetworkKind::Mld => compile_mld(&a)?,
        NetworkKind::Mle => compile_mle(&a)?,
    };
    let siphons = enumerate_siphons(&net).map_err(|e| CliError::failed("siphons", e.to_string()))?;
    let mut docs = Vec::new();
    for siphon in siphons.iter().filter(|s| s.minimal) {
        let critical = is_critical_siphon(&net, siphon)
            .map_err(|e| CliError::failed("siphons", e.to_string()))?;
        docs.push(SiphonDoc {
            members: siphon.member_names(&net).iter().map(|s| s.to_string()).collect(),
            critical,
        });
    }
    let doc = SiphonsDoc { species: net.species().to_vec(), siphons: docs };
    match format {
        OutputFormat::Json => println!("{}", to_json_string(&doc)),
        OutputFormat::Text => {
            if doc.siphons.is_empty() {
                println!("no siphons");
            }
            for s in &doc.siphons {
                println!(
                    "{{{}}}{}",
                    s.members.join(", "),
                    if s.critical { " critical" } else { "" }
                );
            }
        }
    }
    Ok(EXIT_OK)
}
