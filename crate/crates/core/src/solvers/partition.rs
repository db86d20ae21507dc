use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exact::enumerate;
use super::tabu::{search, stream_rng};
use super::{derive_seed, finish, Couplings, LocalState, SolverResult, TabuParams};
use crate::error::Result;
use crate::qubo_map::Qubo;

/// Clamps every variable outside `active` to its value in `x`. Returns the
/// sub-QUBO over `active` (in the given order) and the constant energy of the
/// clamped part: `sub(y) + constant == full(x with active := y)`.
pub fn clamp_subqubo(q: &Qubo, active: &[usize], x: &[u8]) -> (Qubo, f64) {
    let (sub, constant) = Couplings::from_qubo(q).restrict(active, x);
    (sub.to_qubo(), constant)
}

/// Tabu search with sub-QUBO partitioning.
///
/// Problems up to `subqubo_size` are handed to enumeration (up to
/// `exact_threshold`) or plain Tabu search. Larger ones start from a Tabu
/// solution of the whole problem; each outer pass then ranks variables by
/// `|flip gain|` at the incumbent, cuts the ranking into windows of
/// `subqubo_size` (top-ranked first), and re-optimizes each window with the
/// rest clamped, keeping strict improvements. After a pass without
/// improvement, windows are re-solved from random sub-assignments. The loop
/// ends after `partition_passes` consecutive passes without improvement.
pub fn partitioned_solve(q: &Qubo, params: &TabuParams) -> Result<SolverResult> {
    params.validate()?;
    let t0 = Instant::now();
    let c = Couplings::from_qubo(q);
    let n = c.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    if n <= params.subqubo_size {
        let (bits, evaluations, trace) = solve_small(&c, None, params, &mut rng);
        return Ok(finish(q, bits, evaluations, t0, trace));
    }

    let start: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let first = search(&c, start, params.tenure, params.n_rep, &mut stream_rng(params));
    let mut evaluations = first.evaluations;
    let mut trace = vec![first.energy];
    let mut state = LocalState::new(&c, first.bits);
    state.energy = first.energy;

    let mut stale = 0usize;
    let mut pass = 0u64;
    let mut last_pass_improved = true;
    while stale < params.partition_passes.max(1) {
        pass += 1;
        let mut order: Vec<usize> = (0..n).collect();
        let gains: Vec<f64> = (0..n).map(|i| state.gain(i).abs()).collect();
        order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));

        let mut improved = false;
        for (w, window) in order.chunks(params.subqubo_size).enumerate() {
            let mut active = window.to_vec();
            active.sort_unstable();
            let (sub, constant) = c.restrict(&active, &state.x);
            let current: Vec<u8> = active.iter().map(|&i| state.x[i]).collect();
            let mut sub_rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[pass, w as u64]));
            let warm = last_pass_improved.then_some(current);
            let (bits, evals, _) = solve_small(&sub, warm, params, &mut sub_rng);
            evaluations += evals;
            let candidate = sub.energy(&bits) + constant;
            if candidate < state.energy {
                let mut x = state.x.clone();
                for (&i, &b) in active.iter().zip(&bits) {
                    x[i] = b;
                }
                let exact = c.energy(&x);
                if exact < state.energy {
                    state = LocalState::new(&c, x);
                    state.energy = exact;
                    trace.push(exact);
                    improved = true;
                }
            }
        }
        last_pass_improved = improved;
        if improved {
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(finish(q, state.x, evaluations, t0, trace))
}

/// Enumeration or Tabu search on a problem that fits one sub-QUBO. `warm`
/// starts Tabu search from that assignment, otherwise from a random one.
fn solve_small(
    c: &Couplings,
    warm: Option<Vec<u8>>,
    params: &TabuParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<u8>, u64, Vec<f64>) {
    if c.n <= params.exact_threshold {
        let (bits, visited) = enumerate(c);
        let e = c.energy(&bits);
        return (bits, visited, vec![e]);
    }
    let warm_start = warm.is_some();
    let start = warm.unwrap_or_else(|| (0..c.n).map(|_| rng.random_range(0..2u8)).collect());
    let out = match warm_start {
        true => search(c, start, params.tenure, params.n_rep, rng),
        false => search(c, start, params.tenure, params.n_rep, &mut stream_rng(params)),
    };
    (out.bits, out.evaluations, out.trace)
}
