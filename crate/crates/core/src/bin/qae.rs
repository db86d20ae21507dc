use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use qae::driver::{spectrum, ScanSpec, SolverConfig, DEFAULT_S0};
use qae::experiments::{self, ExperimentKind, ExperimentSpec, Table};
use qae::hamiltonian::{build_product_hamiltonian, ProblemSpec};
use qae::hardware_model::NoiseSpec;
use qae::linalg::{jacobi_eigen, MatrixFile, SymMatrix, DEFAULT_JACOBI_TOL};
use qae::qubo_map::{build_qubo, Encoding, Qubo};
use qae::solvers::{SaParams, TabuParams};
use qae::{Error, Result};

#[derive(Parser)]
#[command(name = "qae", version, about = "Quantum annealer eigensolver")]
struct Cli {
    /// JSON config: experiment spec, or solver/scan settings for `solve`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Solver seed; replaces the seed list of an experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenstates of a problem via the λ-scanned QUBO mapping.
    Solve(SolveArgs),
    /// Dense eigenvalues of a problem or matrix file.
    Oracle(OracleArgs),
    /// Write the QUBO for one λ in triplet format.
    ExportQubo(ExportArgs),
    /// Minimize a QUBO read from a triplet file.
    SolveQubo(SolveQuboArgs),
    /// Error against the oracle over a grid of K.
    KSweep,
    /// Solver time against K or dimension.
    Scaling,
    /// Error against n_rep, reads or the number of λ samples.
    Convergence,
    /// Error under perturbed QUBO coefficients.
    Noise,
    /// Chained-QUBO phase map over λ and chain strength.
    ChainScan,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverName {
    Tabu,
    Partitioned,
    Sa,
    Exact,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long, default_value_t = 1)]
    states: usize,
    #[arg(long, value_enum)]
    solver: Option<SolverName>,
    #[arg(long, default_value_t = 0.0)]
    noise_scale: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    problem: Option<PathBuf>,
    /// `{"n": .., "upper": [..]}` matrix file.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    lambda: f64,
}

#[derive(Args)]
struct SolveQuboArgs {
    #[arg(long)]
    qubo: PathBuf,
    #[arg(long, value_enum, default_value = "partitioned")]
    solver: SolverName,
}

/// Settings for `solve` read from `--config`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    #[serde(default)]
    solver: Option<SolverConfig>,
    #[serde(default)]
    scan: Option<ScanSpec>,
    #[serde(default)]
    excited_scan: Option<ScanSpec>,
    #[serde(default)]
    s0: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed; see the status column");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Returns the number of failed cells.
fn run(cli: &Cli) -> Result<usize> {
    match &cli.command {
        Command::Solve(args) => solve(cli, args),
        Command::Oracle(args) => oracle(cli, args),
        Command::ExportQubo(args) => {
            let problem = ProblemSpec::load(&args.problem)?;
            let h = build_product_hamiltonian(&problem, args.k)?;
            let q = build_qubo(&h, &Encoding::new(args.k, h.dim())?, args.lambda)?;
            let mut buf = Vec::new();
            q.write_triplets(&mut buf)?;
            emit(cli.out.as_deref(), &buf)?;
            Ok(0)
        }
        Command::SolveQubo(args) => {
            let q = Qubo::read_triplets(BufReader::new(File::open(&args.qubo)?))?;
            let r = solver_config(Some(args.solver), None, cli.seed).solve(&q)?;
            let bits: String = r.best_bits.iter().map(|b| char::from(b'0' + b)).collect();
            let text = format!("energy,bits\n{},{}\n", r.best_energy, bits);
            emit(cli.out.as_deref(), text.as_bytes())?;
            Ok(0)
        }
        Command::KSweep => experiment(cli, &[ExperimentKind::KSweep]),
        Command::Scaling => experiment(cli, &[ExperimentKind::ScalingK, ExperimentKind::ScalingD]),
        Command::Convergence => experiment(
            cli,
            &[
                ExperimentKind::NrepSweep,
                ExperimentKind::ReadsSweep,
                ExperimentKind::NlambdaSweep,
            ],
        ),
        Command::Noise => experiment(cli, &[ExperimentKind::Noise]),
        Command::ChainScan => experiment(cli, &[ExperimentKind::ChainScan]),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// `--solver` picks the kind; parameters come from the config when it names
/// the same kind, and from defaults otherwise.
fn solver_config(name: Option<SolverName>, configured: Option<SolverConfig>, seed: Option<u64>) -> SolverConfig {
    let configured = configured.unwrap_or_default();
    let chosen = match name {
        None => configured,
        Some(n) => {
            let wanted = match n {
                SolverName::Tabu => "tabu",
                SolverName::Partitioned => "partitioned",
                SolverName::Sa => "sa",
                SolverName::Exact => "exact",
            };
            if configured.name() == wanted {
                configured
            } else {
                match n {
                    SolverName::Tabu => SolverConfig::Tabu(TabuParams::default()),
                    SolverName::Partitioned => SolverConfig::Partitioned(TabuParams::default()),
                    SolverName::Sa => SolverConfig::Sa(SaParams::default()),
                    SolverName::Exact => SolverConfig::Exact,
                }
            }
        }
    };
    match seed {
        Some(s) => chosen.with_seed(s),
        None => chosen,
    }
}

fn solve(cli: &Cli, args: &SolveArgs) -> Result<usize> {
    let config: SolveConfig = match &cli.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SolveConfig::default(),
    };
    let problem = ProblemSpec::load(&args.problem)?;
    let h = build_product_hamiltonian(&problem, args.k)?;
    let values = jacobi_eigen(&h, DEFAULT_JACOBI_TOL)?.values;

    let noisy = args.noise_scale > 0.0;
    let preset = |suffix: &str| ScanSpec::preset(&format!("{}{suffix}", problem.name));
    let ground = config
        .scan
        .or_else(|| if noisy { preset("-noise") } else { None })
        .or_else(|| preset(""))
        .ok_or_else(|| {
            Error::invalid(format!(
                "no tuned scan for problem {:?}; put a \"scan\" in --config",
                problem.name
            ))
        })?;
    let mut scans = vec![ground];
    if args.states > 1 {
        let excited = config.excited_scan.or_else(|| preset("-excited")).ok_or_else(|| {
            Error::invalid(format!(
                "no tuned excited-state scan for {:?}; put an \"excited_scan\" in --config",
                problem.name
            ))
        })?;
        scans.push(excited);
    }

    let solver = solver_config(args.solver, config.solver, cli.seed);
    let seed = cli.seed.unwrap_or_else(|| solver.seed());
    let noise = noisy.then(|| NoiseSpec::with_scale(args.noise_scale, seed));
    let s0 = config.s0.unwrap_or(DEFAULT_S0);
    let result = spectrum(&h, args.states, args.k, &scans, &solver, noise.as_ref(), s0)?;

    let mut table = Table {
        header: [
            "state_index",
            "energy_qae",
            "energy_oracle",
            "abs_error",
            "best_lambda",
            "raw_norm",
            "K",
            "B",
            "d",
            "solver",
            "seed",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows: Vec::new(),
    };
    for (i, s) in result.states.iter().enumerate() {
        if s.overlap_warning {
            eprintln!("warning: state {i} overlaps a lower state; consider a larger s0");
        }
        table.rows.push(vec![
            i.to_string(),
            s.energy.to_string(),
            values[i].to_string(),
            (s.energy - values[i]).abs().to_string(),
            s.best_lambda.to_string(),
            s.raw_norm.to_string(),
            args.k.to_string(),
            problem.basis_size().to_string(),
            problem.d().to_string(),
            solver.name().to_string(),
            seed.to_string(),
        ]);
    }
    emit(cli.out.as_deref(), table.to_csv_string()?.as_bytes())?;
    Ok(0)
}

fn oracle(cli: &Cli, args: &OracleArgs) -> Result<usize> {
    let h: SymMatrix = match (&args.problem, &args.matrix) {
        (Some(p), _) => build_product_hamiltonian(&ProblemSpec::load(p)?, 1)?,
        (None, Some(m)) => {
            let file: MatrixFile = serde_json::from_str(&std::fs::read_to_string(m)?)?;
            SymMatrix::try_from(file)?
        }
        (None, None) => return Err(Error::invalid("pass --problem or --matrix")),
    };
    let eig = jacobi_eigen(&h, DEFAULT_JACOBI_TOL)?;
    let mut text = String::from("index,eigenvalue\n");
    for (i, v) in eig.values.iter().enumerate() {
        text.push_str(&format!("{i},{v}\n"));
    }
    emit(cli.out.as_deref(), text.as_bytes())?;
    Ok(0)
}

fn experiment(cli: &Cli, kinds: &[ExperimentKind]) -> Result<usize> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::invalid("experiments need --config <spec.json>"))?;
    let mut spec = ExperimentSpec::load(path)?;
    if !kinds.contains(&spec.kind) {
        return Err(Error::invalid(format!(
            "config kind {:?} does not belong to this subcommand (expected one of {kinds:?})",
            spec.kind
        )));
    }
    if let Some(seed) = cli.seed {
        spec.seeds = vec![seed];
    }
    let out = cli.out.clone().or_else(|| spec.output.clone());
    let table = experiments::run(&spec)?;
    emit(out.as_deref(), table.to_csv_string()?.as_bytes())?;
    if spec.kind == ExperimentKind::Noise {
        let summary = experiments::noise_summary(&table).to_csv_string()?;
        match &out {
            Some(p) => std::fs::write(summary_path(p), summary)?,
            None => io::stdout().write_all(format!("\n{summary}").as_bytes())?,
        }
    }
    Ok(table.failures())
}

fn summary_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("noise");
    p.with_file_name(format!("{stem}_summary.csv"))
}
