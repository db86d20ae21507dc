//! Experiment harness: parameter sweeps over the eigensolver, written as CSV.
//!
//! Every table carries a header row and a `status` column; failed cells keep
//! their grid coordinates, leave numeric fields empty and put the error text
//! in `status`. Rows follow grid order, so reruns with the same config and
//! seeds give identical files apart from the timing columns.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{spectrum, ScanSpec, SolverConfig, SpectrumState, DEFAULT_S0};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_product_hamiltonian, oscillator_problem, ProblemSpec, BENCHMARK_HALF_WIDTH,
    MAX_DIMENSIONS,
};
use crate::hardware_model::{scan_lambda_chain, ChainSpec, NoiseSpec};
use crate::linalg::{jacobi_eigen, SymMatrix, DEFAULT_JACOBI_TOL};
use crate::qubo_map::Encoding;
use crate::solvers::{derive_seed, SaParams, TabuParams};

/// Bumped whenever a column is added, removed or renamed.
pub const CSV_SCHEMA_VERSION: u32 = 1;
/// Largest d run without `allow_large_d`.
pub const DEFAULT_MAX_D: usize = 3;

const NOISE_STREAM: u64 = 0x6e6f;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    KSweep,
    NrepSweep,
    ReadsSweep,
    NlambdaSweep,
    ScalingK,
    ScalingD,
    Noise,
    ChainScan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Problem config in the same JSON form accepted by `solve`; defaults to
    /// the 1D benchmark oscillator.
    #[serde(default)]
    pub problem: Option<serde_json::Value>,
    /// Ground-state scan; defaults to the tuned row for the problem name.
    #[serde(default)]
    pub scan: Option<ScanSpec>,
    #[serde(default)]
    pub excited_scan: Option<ScanSpec>,
    #[serde(default = "one")]
    pub states: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub k_grid: Vec<usize>,
    #[serde(default)]
    pub d_grid: Vec<usize>,
    #[serde(default)]
    pub nrep_grid: Vec<usize>,
    #[serde(default)]
    pub reads_grid: Vec<usize>,
    #[serde(default)]
    pub nlambda_grid: Vec<usize>,
    /// Width of the λ window held fixed in an N_λ sweep.
    #[serde(default = "default_lambda_range")]
    pub lambda_range: f64,
    #[serde(default)]
    pub noise_scales: Vec<f64>,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_chain_length")]
    pub chain_length: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default = "default_repeats")]
    pub timing_repeats: usize,
    /// Cells whose median solver time exceeds this are marked `timeout`.
    #[serde(default)]
    pub timeout_s: Option<f64>,
    #[serde(default)]
    pub allow_large_d: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory that relative paths inside `problem` resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn default_lambda_range() -> f64 {
    2000.0
}
fn default_chain_length() -> usize {
    3
}
fn default_s0() -> f64 {
    DEFAULT_S0
}
fn default_repeats() -> usize {
    3
}

impl ExperimentSpec {
    /// A spec with every optional field at its default.
    pub fn new(kind: ExperimentKind, seeds: Vec<u64>) -> Self {
        Self {
            kind,
            problem: None,
            scan: None,
            excited_scan: None,
            states: 1,
            solver: SolverConfig::default(),
            k_grid: Vec::new(),
            d_grid: Vec::new(),
            nrep_grid: Vec::new(),
            reads_grid: Vec::new(),
            nlambda_grid: Vec::new(),
            lambda_range: default_lambda_range(),
            noise_scales: Vec::new(),
            lambda_grid: Vec::new(),
            c_grid: Vec::new(),
            chain_length: default_chain_length(),
            seeds,
            s0: DEFAULT_S0,
            timing_repeats: default_repeats(),
            timeout_s: None,
            allow_large_d: false,
            output: None,
            base_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: Self = serde_json::from_str(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match &self.problem {
            Some(v) => ProblemSpec::from_json_value(v.clone(), self.base_dir.as_deref()),
            None => Ok(oscillator_problem(1, 2, BENCHMARK_HALF_WIDTH)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("experiment needs at least one seed"));
        }
        if self.states == 0 {
            return Err(Error::invalid("states must be ≥ 1"));
        }
        let need = |grid_len: usize, name: &str| {
            if grid_len == 0 {
                Err(Error::invalid(format!("{name} must be non-empty")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::KSweep | ExperimentKind::ScalingK => need(self.k_grid.len(), "k_grid"),
            ExperimentKind::NrepSweep => {
                need(self.k_grid.len(), "k_grid")?;
                need(self.nrep_grid.len(), "nrep_grid")
            }
            ExperimentKind::ReadsSweep => {
                need(self.k_grid.len(), "k_grid")?;
                need(self.reads_grid.len(), "reads_grid")
            }
            ExperimentKind::NlambdaSweep => {
                need(self.k_grid.len(), "k_grid")?;
                need(self.nlambda_grid.len(), "nlambda_grid")?;
                if self.nlambda_grid.contains(&0) || !(self.lambda_range > 0.0) {
                    return Err(Error::invalid("N_λ values and lambda_range must be positive"));
                }
                Ok(())
            }
            ExperimentKind::ScalingD => {
                need(self.k_grid.len(), "k_grid")?;
                need(self.d_grid.len(), "d_grid")?;
                let cap = if self.allow_large_d { MAX_DIMENSIONS } else { DEFAULT_MAX_D };
                if self.d_grid.iter().any(|&d| d == 0 || d > cap) {
                    return Err(Error::invalid(format!(
                        "d_grid entries must lie in 1..={cap} (set allow_large_d for up to {MAX_DIMENSIONS})"
                    )));
                }
                Ok(())
            }
            ExperimentKind::Noise => {
                need(self.k_grid.len(), "k_grid")?;
                need(self.noise_scales.len(), "noise_scales")
            }
            ExperimentKind::ChainScan => {
                need(self.k_grid.len(), "k_grid")?;
                need(self.lambda_grid.len(), "lambda_grid")?;
                need(self.c_grid.len(), "c_grid")
            }
        }
    }

    fn scans_for(&self, problem: &ProblemSpec, noisy: bool) -> Result<Vec<ScanSpec>> {
        let ground = match &self.scan {
            Some(s) => s.clone(),
            None => {
                let noisy_row = noisy
                    .then(|| ScanSpec::preset(&format!("{}-noise", problem.name)))
                    .flatten();
                noisy_row
                    .or_else(|| ScanSpec::preset(&problem.name))
                    .ok_or_else(|| {
                        Error::invalid(format!("no tuned scan for problem {:?}; set \"scan\"", problem.name))
                    })?
            }
        };
        let mut scans = vec![ground];
        if self.states > 1 {
            let excited = match &self.excited_scan {
                Some(s) => s.clone(),
                None => ScanSpec::preset(&format!("{}-excited", problem.name)).ok_or_else(|| {
                    Error::invalid(format!(
                        "no tuned excited-state scan for {:?}; set \"excited_scan\"",
                        problem.name
                    ))
                })?,
            };
            scans.push(excited);
        }
        Ok(scans)
    }
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell `name` of row `row`; panics on an unknown column.
    pub fn get(&self, row: usize, name: &str) -> &str {
        let c = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        &self.rows[row][c]
    }

    /// Cell parsed as f64, `None` when empty.
    pub fn get_f64(&self, row: usize, name: &str) -> Option<f64> {
        let s = self.get(row, name);
        if s.is_empty() {
            None
        } else {
            s.parse().ok()
        }
    }

    /// Number of rows whose status is not `ok`.
    pub fn failures(&self) -> usize {
        match self.column("status") {
            Some(c) => self.rows.iter().filter(|r| r[c] != "ok").count(),
            None => 0,
        }
    }

    /// The same table without the named columns.
    pub fn without(&self, names: &[&str]) -> Table {
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&i| !names.contains(&self.header[i].as_str()))
            .collect();
        Table {
            header: keep.iter().map(|&i| self.header[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Columns that hold wall-clock measurements.
pub const TIMING_COLUMNS: &[&str] = &["time_s", "time_per_k", "log10_time_per_k"];

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn status_of(e: &Error) -> String {
    format!("error: {e}")
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Oracle spectrum of `problem` (independent of K).
fn oracle(problem: &ProblemSpec) -> Result<(SymMatrix, Vec<f64>)> {
    let h = build_product_hamiltonian(problem, 1)?;
    let values = jacobi_eigen(&h, DEFAULT_JACOBI_TOL)?.values;
    Ok((h, values))
}

const SWEEP_HEADER: &[&str] = &[
    "problem",
    "d",
    "B",
    "K",
    "noise_scale",
    "seed",
    "solver",
    "state_index",
    "energy_qae",
    "energy_oracle",
    "abs_error",
    "best_lambda",
    "raw_norm",
    "overlap_warning",
    "status",
];

struct SweepCell {
    k: usize,
    scale: f64,
    seed: u64,
}

fn sweep_rows(
    spec: &ExperimentSpec,
    problem: &ProblemSpec,
    scans: &[ScanSpec],
    oracle_values: &[f64],
    cell: &SweepCell,
    noisy: bool,
) -> Vec<Vec<String>> {
    let solver = spec.solver.with_seed(cell.seed);
    let noise = noisy.then(|| NoiseSpec::with_scale(cell.scale, derive_seed(cell.seed, &[NOISE_STREAM])));
    let outcome = build_product_hamiltonian(problem, cell.k).and_then(|h| {
        spectrum(&h, spec.states, cell.k, scans, &solver, noise.as_ref(), spec.s0)
    });
    let prefix = |state: usize| {
        vec![
            problem.name.clone(),
            problem.d().to_string(),
            problem.basis_size().to_string(),
            cell.k.to_string(),
            if noisy { num(cell.scale) } else { String::new() },
            cell.seed.to_string(),
            solver.name().to_string(),
            state.to_string(),
        ]
    };
    match outcome {
        Ok(SpectrumState { states, .. }) => states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut row = prefix(i);
                let oracle = oracle_values[i];
                row.extend([
                    num(s.energy),
                    num(oracle),
                    num((s.energy - oracle).abs()),
                    num(s.best_lambda),
                    num(s.raw_norm),
                    s.overlap_warning.to_string(),
                    "ok".to_string(),
                ]);
                row
            })
            .collect(),
        Err(e) => (0..spec.states)
            .map(|i| {
                let mut row = prefix(i);
                row.extend([
                    String::new(),
                    num(oracle_values[i]),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    status_of(&e),
                ]);
                row
            })
            .collect(),
    }
}

fn run_sweep(spec: &ExperimentSpec, scales: &[f64], noisy: bool) -> Result<Table> {
    spec.validate()?;
    let problem = spec.problem_spec()?;
    problem.validate()?;
    let scans = spec.scans_for(&problem, noisy)?;
    let (_, values) = oracle(&problem)?;
    if spec.states > values.len() {
        return Err(Error::invalid("more states requested than basis functions"));
    }
    let mut cells = Vec::new();
    for &scale in scales {
        for &k in &spec.k_grid {
            for &seed in &spec.seeds {
                cells.push(SweepCell { k, scale, seed });
            }
        }
    }
    let rows: Vec<Vec<Vec<String>>> = cells
        .par_iter()
        .map(|c| sweep_rows(spec, &problem, &scans, &values, c, noisy))
        .collect();
    let mut table = Table::new(SWEEP_HEADER);
    table.rows = rows.into_iter().flatten().collect();
    Ok(table)
}

/// Error against the oracle for every K in `k_grid` and every seed.
pub fn run_k_sweep(spec: &ExperimentSpec) -> Result<Table> {
    run_sweep(spec, &[0.0], false)
}

/// The K sweep repeated for every noise scale. Noise for seed `s` uses
/// `derive_seed(s, [NOISE_STREAM])`, and the solver seeds match the
/// noiseless sweep, so scale 0 reproduces it.
pub fn run_noise(spec: &ExperimentSpec) -> Result<Table> {
    run_sweep(spec, &spec.noise_scales, true)
}

/// Mean and sample standard deviation of the error per (scale, K, state).
pub fn noise_summary(table: &Table) -> Table {
    let mut out = Table::new(&[
        "noise_scale",
        "K",
        "state_index",
        "n_ok",
        "mean_error",
        "std_error",
        "status",
    ]);
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in 0..table.rows.len() {
        let key = (
            table.get(r, "noise_scale").to_string(),
            table.get(r, "K").to_string(),
            table.get(r, "state_index").to_string(),
        );
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for key in keys {
        let errors: Vec<f64> = (0..table.rows.len())
            .filter(|&r| {
                table.get(r, "noise_scale") == key.0
                    && table.get(r, "K") == key.1
                    && table.get(r, "state_index") == key.2
                    && table.get(r, "status") == "ok"
            })
            .filter_map(|r| table.get_f64(r, "abs_error"))
            .collect();
        let n = errors.len();
        let (mean, std, status) = if n == 0 {
            (String::new(), String::new(), "no_data".to_string())
        } else {
            let m = errors.iter().sum::<f64>() / n as f64;
            let s = if n > 1 {
                (errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (num(m), num(s), "ok".to_string())
        };
        out.rows
            .push(vec![key.0, key.1, key.2, n.to_string(), mean, std, status]);
    }
    out
}

/// Wall time of the λ scan's solver calls, median of `timing_repeats`
/// single-threaded runs. `scaling_k` sweeps K for the configured problem;
/// `scaling_d` builds the benchmark oscillator for every d in `d_grid`.
pub fn run_scaling(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let problems: Vec<ProblemSpec> = match spec.kind {
        ExperimentKind::ScalingK => vec![spec.problem_spec()?],
        ExperimentKind::ScalingD => spec
            .d_grid
            .iter()
            .map(|&d| oscillator_problem(d, 2, BENCHMARK_HALF_WIDTH))
            .collect(),
        _ => return Err(Error::invalid("run_scaling needs kind scaling_k or scaling_d")),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let repeats = spec.timing_repeats.max(1);
    let mut table = Table::new(&[
        "problem",
        "d",
        "B",
        "K",
        "n_vars",
        "seed",
        "solver",
        "energy_qae",
        "energy_oracle",
        "abs_error",
        "time_s",
        "time_per_k",
        "log10_time_per_k",
        "status",
    ]);
    for problem in &problems {
        problem.validate()?;
        let scan = match &spec.scan {
            Some(s) => s.clone(),
            None => ScanSpec::preset(&problem.name).ok_or_else(|| {
                Error::invalid(format!("no tuned scan for problem {:?}; set \"scan\"", problem.name))
            })?,
        };
        let (_, values) = oracle(problem)?;
        for &k in &spec.k_grid {
            for &seed in &spec.seeds {
                let solver = spec.solver.with_seed(seed);
                let mut row = vec![
                    problem.name.clone(),
                    problem.d().to_string(),
                    problem.basis_size().to_string(),
                    k.to_string(),
                    (problem.n_coefficients() * k).to_string(),
                    seed.to_string(),
                    solver.name().to_string(),
                ];
                let run = || -> Result<(f64, f64)> {
                    let h = build_product_hamiltonian(problem, k)?;
                    let mut times = Vec::with_capacity(repeats);
                    let mut energy = 0.0;
                    for _ in 0..repeats {
                        let r = pool.install(|| crate::driver::ground_state(&h, k, &scan, &solver, None))?;
                        energy = r.energy;
                        times.push(r.solver_time);
                    }
                    Ok((energy, median(times)))
                };
                match run() {
                    Ok((energy, time)) => {
                        let per_k = time / k as f64;
                        let status = match spec.timeout_s {
                            Some(cap) if time > cap => "timeout".to_string(),
                            _ => "ok".to_string(),
                        };
                        row.extend([
                            num(energy),
                            num(values[0]),
                            num((energy - values[0]).abs()),
                            num(time),
                            num(per_k),
                            num(per_k.log10()),
                            status,
                        ]);
                    }
                    Err(e) => {
                        row.extend([
                            String::new(),
                            num(values[0]),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            status_of(&e),
                        ]);
                    }
                }
                table.rows.push(row);
            }
        }
    }
    Ok(table)
}

/// Ground-state error while sweeping one solver or driver parameter:
/// Tabu `n_rep`, annealing `reads`, or `N_λ` over a fixed λ window.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let problem = spec.problem_spec()?;
    problem.validate()?;
    let base_scan = spec.scans_for(&problem, false)?.remove(0);
    let (_, values) = oracle(&problem)?;

    let (parameter, grid): (&str, Vec<usize>) = match spec.kind {
        ExperimentKind::NrepSweep => ("n_rep", spec.nrep_grid.clone()),
        ExperimentKind::ReadsSweep => ("reads", spec.reads_grid.clone()),
        ExperimentKind::NlambdaSweep => ("n_lambda", spec.nlambda_grid.clone()),
        _ => return Err(Error::invalid("run_convergence needs a *_sweep kind other than k_sweep")),
    };
    let configure = |value: usize, seed: u64| -> Result<(SolverConfig, ScanSpec)> {
        let mut scan = base_scan.clone();
        let solver = match spec.kind {
            ExperimentKind::NrepSweep => match &spec.solver {
                SolverConfig::Tabu(p) => SolverConfig::Tabu(TabuParams { n_rep: value, ..p.clone() }),
                SolverConfig::Partitioned(p) => {
                    SolverConfig::Partitioned(TabuParams { n_rep: value, ..p.clone() })
                }
                _ => return Err(Error::invalid("n_rep sweep needs a tabu or partitioned solver")),
            },
            ExperimentKind::ReadsSweep => {
                let base = match &spec.solver {
                    SolverConfig::Sa(p) => p.clone(),
                    _ => SaParams::default(),
                };
                SolverConfig::Sa(SaParams { reads: value, ..base })
            }
            _ => {
                scan = ScanSpec::new(base_scan.lambda_min, value, spec.lambda_range / value as f64);
                spec.solver.clone()
            }
        };
        Ok((solver.with_seed(seed), scan))
    };

    let mut cells = Vec::new();
    for &value in &grid {
        for &k in &spec.k_grid {
            for &seed in &spec.seeds {
                cells.push((value, k, seed));
            }
        }
    }
    let rows: Vec<Vec<String>> = cells
        .par_iter()
        .map(|&(value, k, seed)| {
            let mut row = vec![
                problem.name.clone(),
                parameter.to_string(),
                value.to_string(),
                k.to_string(),
                seed.to_string(),
            ];
            let outcome = configure(value, seed).and_then(|(solver, scan)| {
                let h = build_product_hamiltonian(&problem, k)?;
                crate::driver::ground_state(&h, k, &scan, &solver, None)
            });
            match outcome {
                Ok(r) => row.extend([
                    num(r.energy),
                    num(values[0]),
                    num((r.energy - values[0]).abs()),
                    num(r.best_lambda),
                    "ok".to_string(),
                ]),
                Err(e) => row.extend([
                    String::new(),
                    num(values[0]),
                    String::new(),
                    String::new(),
                    status_of(&e),
                ]),
            }
            row
        })
        .collect();
    let mut table = Table::new(&[
        "problem",
        "parameter",
        "value",
        "K",
        "seed",
        "energy_qae",
        "energy_oracle",
        "abs_error",
        "best_lambda",
        "status",
    ]);
    table.rows = rows;
    Ok(table)
}

/// (λ, c) phase map of the chained problem, one row per cell, λ-major.
/// Uses the first K in `k_grid`, chains of `chain_length`, and simulated
/// annealing seeded from the first seed.
pub fn run_chain_scan(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let problem = spec.problem_spec()?;
    let k = spec.k_grid[0];
    let h = build_product_hamiltonian(&problem, k)?;
    let encoding = Encoding::new(k, h.dim())?;
    let sa = match &spec.solver {
        SolverConfig::Sa(p) => p.clone(),
        _ => SaParams::default(),
    };
    let sa = SaParams {
        seed: spec.seeds[0],
        ..sa
    };
    let chain = ChainSpec::new(spec.chain_length, 0.0);
    let cells = scan_lambda_chain(&h, &encoding, &spec.lambda_grid, &spec.c_grid, &chain, &sa)?;
    let mut table = Table::new(&["lambda", "c", "min_energy", "break_rate", "trivial_flag", "status"]);
    for cell in cells {
        table.rows.push(vec![
            num(cell.lambda),
            num(cell.chain_penalty),
            opt(cell.min_energy),
            num(cell.break_rate),
            cell.trivial.to_string(),
            match cell.error {
                Some(e) => format!("error: {e}"),
                None => "ok".to_string(),
            },
        ]);
    }
    Ok(table)
}

/// Dispatches on `spec.kind`.
pub fn run(spec: &ExperimentSpec) -> Result<Table> {
    match spec.kind {
        ExperimentKind::KSweep => run_k_sweep(spec),
        ExperimentKind::NrepSweep | ExperimentKind::ReadsSweep | ExperimentKind::NlambdaSweep => {
            run_convergence(spec)
        }
        ExperimentKind::ScalingK | ExperimentKind::ScalingD => run_scaling(spec),
        ExperimentKind::Noise => run_noise(spec),
        ExperimentKind::ChainScan => run_chain_scan(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_solver() -> SolverConfig {
        SolverConfig::Tabu(TabuParams {
            n_rep: 200,
            ..Default::default()
        })
    }

    #[test]
    fn fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 1.0).collect();
        let (m, c, r2) = linear_fit(&x, &y);
        assert!((m - 0.5).abs() < 1e-12 && (c + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn single_point_grid_gives_one_row_per_seed() {
        let mut spec = ExperimentSpec::new(ExperimentKind::KSweep, vec![1, 2, 3]);
        spec.k_grid = vec![4];
        spec.solver = quick_solver();
        let t = run(&spec).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.failures(), 0);
        assert_eq!(t.get(2, "seed"), "3");
        assert!(t.get_f64(0, "abs_error").unwrap() >= -1e-9);
    }

    #[test]
    fn failed_cells_become_status_rows() {
        let mut spec = ExperimentSpec::new(ExperimentKind::KSweep, vec![0]);
        spec.k_grid = vec![1];
        spec.scan = Some(ScanSpec::new(380.0, 3, 10.0));
        spec.solver = SolverConfig::Exact;
        let t = run(&spec).unwrap();
        assert_eq!(t.failures(), 1);
        assert!(t.get(0, "status").contains("all trivial"));
        assert_eq!(t.get(0, "energy_qae"), "");
        assert!(!t.to_csv_string().unwrap().contains("NaN"));
    }

    #[test]
    fn noise_scale_zero_matches_noiseless_sweep() {
        let mut spec = ExperimentSpec::new(ExperimentKind::KSweep, vec![4, 5]);
        spec.k_grid = vec![3, 5];
        spec.solver = quick_solver();
        spec.scan = Some(ScanSpec::preset("harmonic-1d-noise").unwrap());
        let clean = run(&spec).unwrap();
        spec.kind = ExperimentKind::Noise;
        spec.noise_scales = vec![0.0];
        let noisy = run(&spec).unwrap();
        assert_eq!(clean.without(&["noise_scale"]), noisy.without(&["noise_scale"]));
    }

    #[test]
    fn chain_scan_single_cell() {
        let mut spec = ExperimentSpec::new(ExperimentKind::ChainScan, vec![0]);
        spec.k_grid = vec![2];
        spec.lambda_grid = vec![800.0];
        spec.c_grid = vec![5000.0];
        spec.solver = SolverConfig::Sa(SaParams {
            reads: 50,
            ..Default::default()
        });
        let t = run(&spec).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.header, ["lambda", "c", "min_energy", "break_rate", "trivial_flag", "status"]);
    }

    #[test]
    fn nlambda_sweep_holds_the_window() {
        let mut spec = ExperimentSpec::new(ExperimentKind::NlambdaSweep, vec![0]);
        spec.k_grid = vec![4];
        spec.nlambda_grid = vec![2, 20];
        spec.solver = quick_solver();
        let t = run(&spec).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.failures(), 0);
        let coarse = t.get_f64(0, "abs_error").unwrap();
        let fine = t.get_f64(1, "abs_error").unwrap();
        assert!(fine <= coarse + 1e-9, "{fine} > {coarse}");
    }

    #[test]
    fn validation_rejects_empty_grids_and_large_d() {
        let spec = ExperimentSpec::new(ExperimentKind::KSweep, vec![0]);
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(ExperimentKind::ScalingD, vec![0]);
        spec.k_grid = vec![2];
        spec.d_grid = vec![4];
        assert!(spec.validate().is_err());
        spec.allow_large_d = true;
        assert!(spec.validate().is_ok());
        let mut spec = ExperimentSpec::new(ExperimentKind::KSweep, vec![]);
        spec.k_grid = vec![2];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"kind": "k_sweep", "k_grid": [2], "seeds": [1]}"#).unwrap();
        assert_eq!(spec.states, 1);
        assert_eq!(spec.timing_repeats, 3);
        assert_eq!(spec.problem_spec().unwrap().name, "harmonic-1d");
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"kind": "k_sweep", "seeds": [1], "bogus": 1}"#).is_err());
    }
}
