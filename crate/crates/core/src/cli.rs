//! `born-lab` command-line interface.
//!
//! Exit codes: 0 success, 1 invariant violation, 2 malformed input,
//! 3 resource or grid limit.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::born::{self, ProbabilityRule};
use crate::ensemble::ProductEnsemble;
use crate::hilbert::{self, InstanceJson, Observable, StateVector};
use crate::measurement::{self, MeasurementConfig};
use crate::pointer::{self, PointerGrid, DEFAULT_EXTENT_PER_SIGMA, DEFAULT_POINTS};
use crate::sweeps::{self, InstanceSpec, Quantity, SweepPlan};
use crate::{Error, IDENTITY_TOL};

#[derive(Debug, Parser)]
#[command(
    name = "born-lab",
    version,
    about = "Von Neumann pointer measurements on product ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split A|ψ⟩ into mean and orthogonal parts.
    Decompose(DecomposeArgs),
    /// Couple the pointer to N copies and report the final pointer.
    Evolve(EvolveArgs),
    /// Sweep the particle count and fit power laws.
    Sweep(SweepArgs),
    /// Consistency residual, uniqueness scan and macro/micro test for a rule.
    BornCheck(BornCheckArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Dimension of a seeded random instance.
    #[arg(long)]
    pub dim: Option<usize>,
    /// State amplitudes as JSON `[[re,im],…]`; rescaled to unit norm.
    #[arg(long, allow_hyphen_values = true)]
    pub state: Option<String>,
    /// Comma-separated eigenvalues.
    #[arg(long, allow_hyphen_values = true)]
    pub eigenvalues: Option<String>,
    /// JSON file `{"amplitudes", "eigenvalues", "basis"?}`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the artifact here (atomically).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PointerArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub coupling: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Half-width of the pointer grid (default 20σ).
    #[arg(long)]
    pub grid_extent: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub pointer: PointerArgs,
    #[arg(long, default_value_t = 100)]
    pub particles: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub pointer: PointerArgs,
    /// Comma-separated, strictly increasing particle counts.
    #[arg(long, default_value = "25,50,100,200,400,800,1600,3200")]
    pub particles: String,
    /// Comma-separated subset of orthogonal_weight, infidelity,
    /// pointer_mean, pointer_variance, macro_micro.
    #[arg(long, default_value = "orthogonal_weight,infidelity")]
    pub quantities: String,
    /// Columns to fit (default: orthogonal_weight and infidelity when present).
    #[arg(long)]
    pub fit: Option<String>,
    #[arg(long, default_value = "born")]
    pub rule: String,
    #[arg(long, default_value_t = sweeps::DEFAULT_MIN_FIT_COUNT)]
    pub min_fit: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BornCheckArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub pointer: PointerArgs,
    #[arg(long, default_value_t = 10_000)]
    pub particles: usize,
    #[arg(long, default_value = "born")]
    pub rule: String,
    /// Extra spectra for the uniqueness scan, `;`-separated lists of
    /// comma-separated eigenvalues. The instance spectrum is always included.
    #[arg(long, allow_hyphen_values = true)]
    pub spectra: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn malformed(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn violation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::GridOverflow { .. }
            | Error::ProfileDoesNotFit(_)
            | Error::EnumerationBudget { .. } => 3,
            Error::DimensionMismatch { .. }
            | Error::EmptyDimension
            | Error::ZeroState
            | Error::EmptyEnsemble
            | Error::CountMismatch { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::InvalidProbabilities(_)
            | Error::Json(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs, and maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Executes a command; returns the stdout summary.
pub fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Decompose(args) => cmd_decompose(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::BornCheck(args) => cmd_born_check(args),
    }
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::malformed(format!("cannot parse {what} entry '{x}'")))
        })
        .collect()
}

fn resolve_instance(args: &InstanceArgs) -> CliResult<(StateVector, Observable)> {
    if let Some(path) = &args.instance {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))?;
        let parsed: InstanceJson = serde_json::from_str(&text)
            .map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))?;
        let psi = StateVector::normalized(hilbert::to_complex(&parsed.amplitudes))?;
        let json = InstanceJson {
            amplitudes: psi.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
            ..parsed
        };
        return Ok(json.into_instance()?);
    }
    match (&args.state, &args.eigenvalues, args.dim) {
        (Some(state), eigenvalues, _) => {
            let pairs: Vec<[f64; 2]> = serde_json::from_str(state)
                .map_err(|e| CliError::malformed(format!("--state: {e}")))?;
            let psi = StateVector::normalized(hilbert::to_complex(&pairs))?;
            let eigenvalues = match eigenvalues {
                Some(text) => parse_list(text, "eigenvalue")?,
                None => return Err(CliError::malformed("--state requires --eigenvalues")),
            };
            if eigenvalues.len() != psi.dim() {
                return Err(Error::DimensionMismatch {
                    expected: psi.dim(),
                    found: eigenvalues.len(),
                }
                .into());
            }
            Ok((psi, Observable::new(eigenvalues)?))
        }
        (None, Some(_), _) => Err(CliError::malformed("--eigenvalues requires --state")),
        (None, None, Some(dim)) => Ok(hilbert::random_instance(dim, args.seed)?),
        (None, None, None) => Err(CliError::malformed(
            "give --instance, --state with --eigenvalues, or --dim",
        )),
    }
}

fn pointer_grid(args: &PointerArgs) -> CliResult<PointerGrid> {
    let extent = args
        .grid_extent
        .unwrap_or(DEFAULT_EXTENT_PER_SIGMA * args.sigma);
    Ok(PointerGrid::new(extent, args.grid_points)?)
}

fn write_artifact(out: &OutputArgs, contents: &str) -> CliResult<()> {
    let Some(path) = &out.out else {
        return Ok(());
    };
    write_atomically(path, contents)
        .map_err(|e| CliError::violation(format!("{}: {e}", path.display())))
}

fn write_atomically(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn complex_pairs(psi: &StateVector) -> Vec<[f64; 2]> {
    psi.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

pub fn cmd_decompose(args: &DecomposeArgs) -> CliResult<String> {
    let (psi, a) = resolve_instance(&args.instance)?;
    let dec = hilbert::decompose(&psi, &a)?;
    let residual = dec.reconstruction_residual(&psi, &a)?;
    let orthogonality = dec.orthogonality(&psi)?;
    if residual > IDENTITY_TOL || orthogonality > IDENTITY_TOL {
        return Err(CliError::violation(format!(
            "decomposition identity violated: residual {residual:e}, overlap {orthogonality:e}"
        )));
    }
    let perp = dec.perp.as_ref().map(complex_pairs);

    let mut summary = String::new();
    writeln!(summary, "mean = {}", dec.mean).unwrap();
    writeln!(summary, "uncertainty = {}", dec.uncertainty).unwrap();
    match &perp {
        Some(p) => writeln!(summary, "perp = {}", serde_json::to_string(p).unwrap()).unwrap(),
        None => writeln!(summary, "perp = absent").unwrap(),
    }
    writeln!(summary, "residual = {residual:e}").unwrap();
    writeln!(summary, "orthogonality = {orthogonality:e}").unwrap();

    let artifact = match args.output.format {
        Format::Json => to_json(&json!({
            "mean": dec.mean,
            "uncertainty": dec.uncertainty,
            "perp": perp,
            "residual": residual,
            "orthogonality": orthogonality,
        }))?,
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            writeln!(s, "mean,{}", dec.mean).unwrap();
            writeln!(s, "uncertainty,{}", dec.uncertainty).unwrap();
            writeln!(s, "residual,{residual}").unwrap();
            writeln!(s, "orthogonality,{orthogonality}").unwrap();
            if let Some(p) = &perp {
                for (j, z) in p.iter().enumerate() {
                    writeln!(s, "perp_re_{j},{}", z[0]).unwrap();
                    writeln!(s, "perp_im_{j},{}", z[1]).unwrap();
                }
            }
            s
        }
    };
    write_artifact(&args.output, &artifact)?;
    Ok(summary)
}

#[derive(Serialize)]
struct EvolveSummary {
    particles: usize,
    mean_shift: f64,
    expected_shift: f64,
    pointer_variance: f64,
    orthogonal_weight: f64,
    leading_order: f64,
    fidelity: f64,
}

pub fn cmd_evolve(args: &EvolveArgs) -> CliResult<String> {
    let (psi, a) = resolve_instance(&args.instance)?;
    let p = &args.pointer;
    let cfg = MeasurementConfig::new(p.coupling, p.tau, args.particles)?;
    let w = pointer::gaussian_init(pointer_grid(p)?, 0.0, p.sigma)?;
    let ens = ProductEnsemble::new(psi, args.particles)?;
    let ev = measurement::evolve_joint(&ens, &a, &cfg, &w)?;
    let density = measurement::pointer_distribution_after(&ev)?;
    let (mean, variance) = density.moments();
    let summary = EvolveSummary {
        particles: args.particles,
        mean_shift: mean - ev.initial_mean(),
        expected_shift: p.coupling * p.tau * ev.mean(),
        pointer_variance: variance,
        orthogonal_weight: measurement::orthogonal_weight(&ev),
        leading_order: ev.leading_order_weight(),
        fidelity: measurement::fidelity_to_shifted(&ev),
    };

    let artifact = match args.output.format {
        Format::Csv => density.to_csv(),
        Format::Json => {
            let rows: Vec<[f64; 2]> = density
                .positions()
                .into_iter()
                .zip(density.values().iter().copied())
                .map(|(x, p)| [x, p])
                .collect();
            to_json(&json!({ "summary": summary, "density": rows }))?
        }
    };
    write_artifact(&args.output, &artifact)?;

    let mut out = String::new();
    writeln!(out, "mean_shift = {}", summary.mean_shift).unwrap();
    writeln!(out, "expected_shift = {}", summary.expected_shift).unwrap();
    writeln!(out, "pointer_variance = {}", summary.pointer_variance).unwrap();
    writeln!(out, "orthogonal_weight = {:e}", summary.orthogonal_weight).unwrap();
    writeln!(out, "leading_order = {:e}", summary.leading_order).unwrap();
    writeln!(out, "fidelity = {}", summary.fidelity).unwrap();
    Ok(out)
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<String> {
    let instance = match (
        &args.instance.instance,
        &args.instance.state,
        args.instance.dim,
    ) {
        (None, None, Some(dim)) => InstanceSpec::Seeded {
            dim,
            seed: args.instance.seed,
        },
        _ => {
            let (state, observable) = resolve_instance(&args.instance)?;
            InstanceSpec::Explicit { state, observable }
        }
    };
    let counts: Vec<usize> = args
        .particles
        .split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::malformed(format!("cannot parse particle count '{x}'")))
        })
        .collect::<CliResult<_>>()?;
    let quantities: Vec<Quantity> = args
        .quantities
        .split(',')
        .map(str::parse)
        .collect::<Result<_, Error>>()?;
    let p = &args.pointer;
    let plan = SweepPlan {
        coupling: p.coupling,
        tau: p.tau,
        sigma: p.sigma,
        grid_extent: p.grid_extent,
        grid_points: p.grid_points,
        rule: args.rule.parse()?,
        seed: args.instance.seed,
        min_fit_count: args.min_fit,
        ..SweepPlan::new(instance, counts, quantities.clone())
    };
    let table = sweeps::run_sweep(&plan)?;

    let fit_columns: Vec<String> = match &args.fit {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => quantities
            .iter()
            .filter(|q| matches!(q, Quantity::OrthogonalWeight | Quantity::Infidelity))
            .map(|q| q.name().to_string())
            .collect(),
    };
    let mut fits = Vec::new();
    let mut summary = String::new();
    for col in &fit_columns {
        match sweeps::fit_power_law(&table, col) {
            Ok(fit) => {
                writeln!(
                    summary,
                    "{}",
                    serde_json::to_string(&fit.summary()).unwrap()
                )
                .unwrap();
                fits.push(fit.summary());
            }
            Err(e @ Error::NonPositiveValue { .. }) => eprintln!("warning: {e}"),
            Err(e) => return Err(e.into()),
        }
    }

    let artifact = match args.output.format {
        Format::Csv => table.to_csv(),
        Format::Json => to_json(&json!({ "table": table, "fits": fits }))?,
    };
    write_artifact(&args.output, &artifact)?;
    Ok(summary)
}

pub fn cmd_born_check(args: &BornCheckArgs) -> CliResult<String> {
    let (psi, a) = resolve_instance(&args.instance)?;
    let rule: ProbabilityRule = args.rule.parse()?;
    let residual = born::consistency_residual(&rule, &psi, &a)?;

    let coeffs = a.coefficients(&psi)?;
    let eigen_state = StateVector::normalized(coeffs)?;
    let mut spectra = vec![a.eigenvalues().to_vec()];
    if let Some(text) = &args.spectra {
        for part in text.split(';').filter(|s| !s.trim().is_empty()) {
            spectra.push(parse_list(part, "spectrum")?);
        }
    }
    let scan = match born::uniqueness_scan(&eigen_state, &spectra, args.grid_step) {
        Ok(hits) => Some(hits),
        Err(e @ Error::InsufficientSpectra { .. }) => {
            eprintln!("warning: {e}");
            None
        }
        Err(e) => return Err(e.into()),
    };

    let p = &args.pointer;
    let cfg = MeasurementConfig::new(p.coupling, p.tau, args.particles)?;
    let w = pointer::gaussian_init(pointer_grid(p)?, 0.0, p.sigma)?;
    let report = born::macro_micro_test(&rule, &psi, &a, &cfg, &w, args.instance.seed)?;

    let mut summary = String::new();
    writeln!(summary, "rule = {}", report.rule).unwrap();
    writeln!(summary, "residual = {residual:e}").unwrap();
    if let Some(hits) = &scan {
        writeln!(
            summary,
            "uniqueness_scan = {}",
            serde_json::to_string(hits).unwrap()
        )
        .unwrap();
    }
    writeln!(summary, "macro_mean = {}", report.macro_mean).unwrap();
    writeln!(summary, "micro_mean = {}", report.micro_mean).unwrap();
    writeln!(summary, "z_score = {}", report.z_score).unwrap();
    writeln!(summary, "verdict = {}", report.verdict).unwrap();

    let artifact = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::from("rule,macro_mean,micro_mean,z_score,verdict\n");
            writeln!(
                s,
                "{},{},{},{},{}",
                report.rule, report.macro_mean, report.micro_mean, report.z_score, report.verdict
            )
            .unwrap();
            s
        }
    };
    write_artifact(&args.output, &artifact)?;
    Ok(summary)
}
