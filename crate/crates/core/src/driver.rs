//! The outer eigensolver loop: scan the normalization penalty λ, solve one
//! QUBO per λ, discard trivial solutions, renormalize and keep the lowest
//! Rayleigh quotient. Excited states come from deflating previously found
//! states with a large shift.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardware_model::{apply_noise, NoiseSpec, TRIVIAL_NORM};
use crate::linalg::{deflate, dot, norm, rayleigh_quotient, SymMatrix};
use crate::qubo_map::{build_qubo, decode, Encoding, Qubo};
use crate::solvers::{
    derive_seed, exact_solve, partitioned_solve, sa_solve, tabu_solve, SaParams, SolverResult,
    TabuParams,
};

/// Default deflation shift, cm⁻¹.
pub const DEFAULT_S0: f64 = 9000.0;
/// `|⟨ψ_new|ψ_prior⟩|` above this flags a state that slid back onto a prior one.
pub const OVERLAP_WARNING: f64 = 0.9;

/// λ_j = lambda_min + j·Δλ for j = 0..n_lambda, with Δλ optionally replaced
/// for specific K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub lambda_min: f64,
    pub n_lambda: usize,
    pub d_lambda: f64,
    #[serde(default)]
    pub small_k_d_lambda: BTreeMap<usize, f64>,
}

impl ScanSpec {
    pub fn new(lambda_min: f64, n_lambda: usize, d_lambda: f64) -> Self {
        Self {
            lambda_min,
            n_lambda,
            d_lambda,
            small_k_d_lambda: BTreeMap::new(),
        }
    }

    /// Uses `d_lambda` instead of the regular step for every K in `ks`.
    pub fn with_override(mut self, ks: impl IntoIterator<Item = usize>, d_lambda: f64) -> Self {
        for k in ks {
            self.small_k_d_lambda.insert(k, d_lambda);
        }
        self
    }

    /// Heuristic overrides for problems without tuned values: 40·Δλ at K = 1
    /// and 10·Δλ at K = 2–3. Existing entries are kept.
    pub fn with_default_overrides(mut self) -> Self {
        let base = self.d_lambda;
        self.small_k_d_lambda.entry(1).or_insert(40.0 * base);
        for k in 2..=3 {
            self.small_k_d_lambda.entry(k).or_insert(10.0 * base);
        }
        self
    }

    pub fn step_for(&self, k: usize) -> f64 {
        self.small_k_d_lambda.get(&k).copied().unwrap_or(self.d_lambda)
    }

    pub fn lambdas(&self, k: usize) -> Vec<f64> {
        let step = self.step_for(k);
        (0..self.n_lambda)
            .map(|j| self.lambda_min + j as f64 * step)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lambda == 0 {
            return Err(Error::invalid("scan needs n_lambda ≥ 1"));
        }
        if !(self.d_lambda > 0.0) || self.small_k_d_lambda.values().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid("scan steps must be positive"));
        }
        if !self.lambda_min.is_finite() {
            return Err(Error::invalid("lambda_min must be finite"));
        }
        Ok(())
    }

    /// Tuned scan rows, by name: `harmonic-1d` … `harmonic-5d`, `morse`,
    /// `morse-excited`, `harmonic-1d-noise`, `morse-noise`.
    pub fn preset(name: &str) -> Option<Self> {
        let row = match name {
            "morse" => Self::new(780.0, 10, 10.0)
                .with_override([1], 400.0)
                .with_override(2..=4, 200.0),
            "morse-excited" => Self::new(2350.0, 10, 10.0)
                .with_override([1], 800.0)
                .with_override([2], 100.0),
            "harmonic-1d" => Self::new(380.0, 10, 10.0)
                .with_override([1], 400.0)
                .with_override([2], 200.0),
            "harmonic-2d" => Self::new(880.0, 10, 10.0)
                .with_override([1], 800.0)
                .with_override(2..=3, 100.0),
            "harmonic-3d" => Self::new(1580.0, 10, 10.0)
                .with_override([1], 800.0)
                .with_override(2..=8, 100.0),
            "harmonic-4d" => Self::new(3000.0, 10, 200.0).with_override([1], 1600.0),
            "harmonic-5d" => Self::new(3000.0, 10, 500.0).with_override([1], 3000.0),
            "harmonic-1d-noise" => Self::new(380.0, 40, 50.0),
            "morse-noise" => Self::new(780.0, 40, 50.0),
            _ => return None,
        };
        Some(row)
    }
}

/// Which QUBO minimizer to run, with its parameters. The parameter seed is the
/// base from which per-sample seeds are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverConfig {
    Exact,
    Tabu(TabuParams),
    Partitioned(TabuParams),
    Sa(SaParams),
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::Partitioned(TabuParams::default())
    }
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Exact => "exact",
            SolverConfig::Tabu(_) => "tabu",
            SolverConfig::Partitioned(_) => "partitioned",
            SolverConfig::Sa(_) => "sa",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SolverConfig::Exact => 0,
            SolverConfig::Tabu(p) | SolverConfig::Partitioned(p) => p.seed,
            SolverConfig::Sa(p) => p.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            SolverConfig::Exact => {}
            SolverConfig::Tabu(p) | SolverConfig::Partitioned(p) => p.seed = seed,
            SolverConfig::Sa(p) => p.seed = seed,
        }
        out
    }

    pub fn solve(&self, q: &Qubo) -> Result<SolverResult> {
        match self {
            SolverConfig::Exact => exact_solve(q),
            SolverConfig::Tabu(p) => {
                p.validate()?;
                Ok(tabu_solve(q, p))
            }
            SolverConfig::Partitioned(p) => partitioned_solve(q, p),
            SolverConfig::Sa(p) => sa_solve(q, p),
        }
    }
}

/// One λ sample: the renormalized energy, or `None` for a trivial solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSample {
    pub lambda: f64,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct QaeResult {
    /// Rayleigh quotient of the renormalized state, cm⁻¹.
    pub energy: f64,
    /// Unit norm; largest-magnitude coefficient positive.
    pub wavefunction: Vec<f64>,
    pub best_lambda: f64,
    /// Norm of the decoded state before renormalization.
    pub raw_norm: f64,
    pub per_lambda_trace: Vec<LambdaSample>,
    /// Set when an excited state overlaps a prior state by more than [`OVERLAP_WARNING`].
    pub overlap_warning: bool,
    /// Summed solver wall time over all λ samples, seconds.
    pub solver_time: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumState {
    pub s0: f64,
    pub states: Vec<QaeResult>,
}

impl SpectrumState {
    pub fn new(s0: f64) -> Self {
        Self {
            s0,
            states: Vec::new(),
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }
}

struct SampleOutcome {
    lambda: f64,
    candidate: Option<(f64, Vec<f64>, f64)>,
    time: f64,
}

/// Ground state of `h` with K qubits per coefficient.
///
/// Sample j solves with seed `derive_seed(solver seed, [j])` and, if `noise`
/// is given, programs the QUBO with noise seed `derive_seed(noise.seed, [j])`.
pub fn ground_state(
    h: &SymMatrix,
    k: usize,
    scan: &ScanSpec,
    solver: &SolverConfig,
    noise: Option<&NoiseSpec>,
) -> Result<QaeResult> {
    scan.validate()?;
    if let Some(n) = noise {
        n.validate()?;
    }
    let encoding = Encoding::new(k, h.dim())?;
    let lambdas = scan.lambdas(k);
    let base_seed = solver.seed();

    let outcomes = lambdas
        .par_iter()
        .enumerate()
        .map(|(j, &lambda)| -> Result<SampleOutcome> {
            let mut q = build_qubo(h, &encoding, lambda)?;
            if let Some(spec) = noise {
                let programmed = NoiseSpec {
                    seed: derive_seed(spec.seed, &[j as u64]),
                    ..spec.clone()
                };
                q = apply_noise(&q, &programmed)?;
            }
            let result = solver.with_seed(derive_seed(base_seed, &[j as u64])).solve(&q)?;
            let a = decode(&result.best_bits, &encoding)?;
            let raw = norm(&a);
            let candidate = if raw < TRIVIAL_NORM {
                None
            } else {
                Some((rayleigh_quotient(h, &a)?, a, raw))
            };
            Ok(SampleOutcome {
                lambda,
                candidate,
                time: result.wall_time,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let solver_time = outcomes.iter().map(|o| o.time).sum();
    let per_lambda_trace = outcomes
        .iter()
        .map(|o| LambdaSample {
            lambda: o.lambda,
            energy: o.candidate.as_ref().map(|c| c.0),
        })
        .collect();

    let mut best: Option<(&SampleOutcome, f64)> = None;
    // selection uses the unnormalized quotient; the reported energy is recomputed below
    for o in &outcomes {
        if let Some((e, _, _)) = &o.candidate {
            if best.is_none_or(|(_, be)| *e < be) {
                best = Some((o, *e));
            }
        }
    }
    let Some((winner, _)) = best else {
        return Err(Error::AllTrivial {
            lambda_min: scan.lambda_min,
            n_lambda: scan.n_lambda,
            d_lambda: scan.step_for(k),
        });
    };
    let (_, a, raw_norm) = winner.candidate.as_ref().unwrap();
    let wavefunction = gauge_fixed(a, *raw_norm);
    let energy = rayleigh_quotient(h, &wavefunction)?;
    Ok(QaeResult {
        energy,
        wavefunction,
        best_lambda: winner.lambda,
        raw_norm: *raw_norm,
        per_lambda_trace,
        overlap_warning: false,
        solver_time,
    })
}

/// Unit vector with its largest-magnitude component (first on ties) positive.
fn gauge_fixed(a: &[f64], nrm: f64) -> Vec<f64> {
    let mut pivot = 0;
    for (i, v) in a.iter().enumerate() {
        if v.abs() > a[pivot].abs() {
            pivot = i;
        }
    }
    let sign = if a[pivot] < 0.0 { -1.0 } else { 1.0 };
    a.iter().map(|v| sign * v / nrm).collect()
}

/// Next state above those in `prior`: deflate `h` by every prior state with
/// shift `prior.s0`, solve for the ground state of the deflated matrix, and
/// report its Rayleigh quotient under the original `h`.
pub fn excited_state(
    h: &SymMatrix,
    prior: &SpectrumState,
    k: usize,
    scan: &ScanSpec,
    solver: &SolverConfig,
    noise: Option<&NoiseSpec>,
) -> Result<QaeResult> {
    if !(prior.s0 > 0.0) {
        return Err(Error::invalid("deflation shift s0 must be positive"));
    }
    let mut deflated = h.clone();
    for state in &prior.states {
        deflated = deflate(&deflated, &state.wavefunction, prior.s0)?;
    }
    let mut result = ground_state(&deflated, k, scan, solver, noise)?;
    result.energy = rayleigh_quotient(h, &result.wavefunction)?;
    result.overlap_warning = prior
        .states
        .iter()
        .any(|s| dot(&s.wavefunction, &result.wavefunction).abs() > OVERLAP_WARNING);
    Ok(result)
}

/// The lowest `n_states` states, one after another. State `i` uses
/// `scans[min(i, len − 1)]`; states after the first solve with base seed
/// `derive_seed(solver seed, [i])`.
pub fn spectrum(
    h: &SymMatrix,
    n_states: usize,
    k: usize,
    scans: &[ScanSpec],
    solver: &SolverConfig,
    noise: Option<&NoiseSpec>,
    s0: f64,
) -> Result<SpectrumState> {
    if n_states == 0 || n_states > h.dim() {
        return Err(Error::invalid(format!(
            "n_states = {n_states} must lie in 1..={}",
            h.dim()
        )));
    }
    if scans.is_empty() {
        return Err(Error::invalid("spectrum needs at least one scan"));
    }
    let mut state = SpectrumState::new(s0);
    for i in 0..n_states {
        let scan = &scans[i.min(scans.len() - 1)];
        let solver_i = if i == 0 {
            solver.clone()
        } else {
            solver.with_seed(derive_seed(solver.seed(), &[i as u64]))
        };
        let result = excited_state(h, &state, k, scan, &solver_i, noise)?;
        state.states.push(result);
    }
    Ok(state)
}
