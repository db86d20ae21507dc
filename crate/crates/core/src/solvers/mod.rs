//! QUBO minimizers: exhaustive enumeration (the ground truth for small
//! instances), single-flip Tabu search, Tabu with sub-QUBO partitioning, and
//! simulated annealing.
//!
//! All solvers share [`Couplings`], a dense symmetric view of the QUBO with
//! incrementally maintained local fields so a flip gain costs O(1) and a flip
//! O(n).

mod anneal;
mod exact;
mod partition;
mod tabu;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo_map::{qubo_energy, Qubo};

pub use anneal::sa_solve;
pub use exact::{exact_solve, EXACT_HARD_LIMIT};
pub use partition::{clamp_subqubo, partitioned_solve};
pub use tabu::{tabu_solve, tabu_solve_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabuParams {
    pub tenure: usize,
    /// Consecutive non-improving iterations before Tabu search stops.
    pub n_rep: usize,
    /// Problems larger than this are partitioned into sub-QUBOs of this size.
    pub subqubo_size: usize,
    /// Sub-problems up to this size are enumerated exhaustively.
    pub exact_threshold: usize,
    /// Consecutive partition passes without improvement before the outer loop stops.
    pub partition_passes: usize,
    pub seed: u64,
}

impl Default for TabuParams {
    fn default() -> Self {
        Self {
            tenure: 20,
            n_rep: 10_000,
            subqubo_size: 47,
            exact_threshold: 20,
            partition_passes: 2,
            seed: 0,
        }
    }
}

impl TabuParams {
    pub fn validate(&self) -> Result<()> {
        if self.exact_threshold > EXACT_HARD_LIMIT {
            return Err(Error::invalid(format!(
                "exact_threshold {} exceeds {EXACT_HARD_LIMIT}",
                self.exact_threshold
            )));
        }
        if self.subqubo_size == 0 || self.subqubo_size < self.exact_threshold {
            return Err(Error::invalid("subqubo_size must be positive and ≥ exact_threshold"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaParams {
    pub reads: usize,
    pub sweeps: usize,
    /// Defaults to `max|Q_ij| · n`.
    pub t_hot: Option<f64>,
    /// Defaults to `1e-3 · min nonzero |Q_ij|`.
    pub t_cold: Option<f64>,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            reads: 10_000,
            sweeps: 100,
            t_hot: None,
            t_cold: None,
            seed: 0,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.reads == 0 || self.sweeps == 0 {
            return Err(Error::invalid("annealing needs at least one read and one sweep"));
        }
        if let (Some(hot), Some(cold)) = (self.t_hot, self.t_cold) {
            if !(hot > cold && cold > 0.0) {
                return Err(Error::invalid("annealing needs T_hot > T_cold > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub best_bits: Vec<u8>,
    /// Always `qubo_energy(q, &best_bits)`.
    pub best_energy: f64,
    /// Flip-gain evaluations (or states visited, for enumeration).
    pub evaluations: u64,
    pub wall_time: f64,
    /// Best energy after each improvement, in order.
    pub trace: Vec<f64>,
}

/// SplitMix64 finalizer folded over `parts`; used for per-read, per-sample and
/// per-cell seeds so results do not depend on scheduling order.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// `true` if `a` precedes `b` lexicographically.
#[inline]
pub(crate) fn lex_less(a: &[u8], b: &[u8]) -> bool {
    a < b
}

/// Dense symmetric form of a QUBO: `E(x) = Σ lin_i x_i + Σ_{i<j} w_ij x_i x_j`.
#[derive(Debug, Clone)]
pub(crate) struct Couplings {
    pub n: usize,
    pub lin: Vec<f64>,
    /// n×n, symmetric, zero diagonal.
    pub w: Vec<f64>,
}

impl Couplings {
    pub fn from_qubo(q: &Qubo) -> Self {
        let n = q.n();
        let mut lin = vec![0.0; n];
        let mut w = vec![0.0; n * n];
        for (i, j, v) in q.entries() {
            if i == j {
                lin[i] = v;
            } else {
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        Self { n, lin, w }
    }

    pub fn to_qubo(&self) -> Qubo {
        let mut q = Qubo::zeros(self.n);
        for i in 0..self.n {
            q.set(i, i, self.lin[i]);
            for j in (i + 1)..self.n {
                q.set(i, j, self.w[i * self.n + j]);
            }
        }
        q
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn energy(&self, x: &[u8]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n {
            if x[i] == 0 {
                continue;
            }
            e += self.lin[i];
            let row = self.row(i);
            for j in (i + 1)..self.n {
                if x[j] != 0 {
                    e += row[j];
                }
            }
        }
        e
    }

    /// Sub-problem over `active` with every other variable clamped to `x`.
    /// Returns the sub-couplings and the energy of the clamped part, so that
    /// `sub.energy(y) + constant == self.energy(x with active := y)`.
    pub fn restrict(&self, active: &[usize], x: &[u8]) -> (Couplings, f64) {
        let n = self.n;
        let mut in_active = vec![false; n];
        for &a in active {
            in_active[a] = true;
        }
        let m = active.len();
        let mut lin = vec![0.0; m];
        let mut w = vec![0.0; m * m];
        for (ai, &a) in active.iter().enumerate() {
            let row = self.row(a);
            let mut l = self.lin[a];
            for j in 0..n {
                if !in_active[j] && x[j] != 0 {
                    l += row[j];
                }
            }
            lin[ai] = l;
            for (bi, &b) in active.iter().enumerate() {
                w[ai * m + bi] = row[b];
            }
        }
        let mut constant = 0.0;
        for i in 0..n {
            if in_active[i] || x[i] == 0 {
                continue;
            }
            constant += self.lin[i];
            let row = self.row(i);
            for j in (i + 1)..n {
                if !in_active[j] && x[j] != 0 {
                    constant += row[j];
                }
            }
        }
        (Couplings { n: m, lin, w }, constant)
    }
}

/// Assignment with local fields `field_i = lin_i + Σ_j w_ij x_j`.
#[derive(Debug, Clone)]
pub(crate) struct LocalState {
    pub x: Vec<u8>,
    pub field: Vec<f64>,
    pub energy: f64,
}

impl LocalState {
    pub fn new(c: &Couplings, x: Vec<u8>) -> Self {
        let mut field = c.lin.clone();
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0 {
                for (f, wij) in field.iter_mut().zip(c.row(j)) {
                    *f += wij;
                }
            }
        }
        let energy = c.energy(&x);
        Self { x, field, energy }
    }

    /// Energy change if variable `i` is flipped.
    #[inline]
    pub fn gain(&self, i: usize) -> f64 {
        if self.x[i] == 0 {
            self.field[i]
        } else {
            -self.field[i]
        }
    }

    #[inline]
    pub fn flip(&mut self, c: &Couplings, i: usize) {
        self.energy += self.gain(i);
        let delta = if self.x[i] == 0 { 1.0 } else { -1.0 };
        self.x[i] ^= 1;
        for (f, wij) in self.field.iter_mut().zip(c.row(i)) {
            *f += delta * wij;
        }
    }
}

pub(crate) fn finish(q: &Qubo, bits: Vec<u8>, evaluations: u64, start: std::time::Instant, trace: Vec<f64>) -> SolverResult {
    let best_energy = qubo_energy(q, &bits);
    SolverResult {
        best_bits: bits,
        best_energy,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::qubo_map::Qubo;

    /// Entries uniform in [−1, 1].
    pub fn random_qubo(n: usize, seed: u64) -> Qubo {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Qubo::zeros(n);
        for i in 0..n {
            for j in i..n {
                q.set(i, j, rng.random_range(-1.0..=1.0));
            }
        }
        q
    }
}
