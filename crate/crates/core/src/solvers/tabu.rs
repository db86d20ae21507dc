use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, finish, lex_less, Couplings, LocalState, SolverResult, TabuParams};
use crate::qubo_map::Qubo;

/// Single-flip Tabu search from a seeded random assignment.
pub fn tabu_solve(q: &Qubo, params: &TabuParams) -> SolverResult {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let start: Vec<u8> = (0..q.n()).map(|_| rng.random_range(0..2u8)).collect();
    tabu_solve_from(q, start, params)
}

pub(crate) fn stream_rng(params: &TabuParams) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[TABU_STREAM]))
}

const TABU_STREAM: u64 = 0x7ab0;

/// Tabu search from a given assignment.
pub fn tabu_solve_from(q: &Qubo, start: Vec<u8>, params: &TabuParams) -> SolverResult {
    assert_eq!(start.len(), q.n(), "start assignment length must match QUBO size");
    let t0 = Instant::now();
    let c = Couplings::from_qubo(q);
    let out = search(&c, start, params.tenure, params.n_rep, &mut stream_rng(params));
    finish(q, out.bits, out.evaluations, t0, out.trace)
}

pub(crate) struct SearchOutcome {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub evaluations: u64,
    pub trace: Vec<f64>,
}

/// Each iteration flips the variable with the lowest gain (lowest index on
/// ties) that is not tabu, or any tabu variable whose flip beats the best
/// energy so far. A flipped variable stays tabu for a tenure drawn from
/// `[t, 3t/2]`. After `kick_interval(n)` iterations without a new best the
/// walk restarts from the best assignment with a few random flips. Stops
/// after `n_rep` consecutive iterations without a new best.
pub(crate) fn search(
    c: &Couplings,
    start: Vec<u8>,
    tenure: usize,
    n_rep: usize,
    rng: &mut ChaCha8Rng,
) -> SearchOutcome {
    let n = c.n;
    let mut state = LocalState::new(c, start);
    let mut best = state.x.clone();
    let mut best_energy = state.energy;
    let mut trace = vec![best_energy];
    let mut evaluations = 0u64;
    if n == 0 {
        return SearchOutcome {
            bits: best,
            energy: best_energy,
            evaluations,
            trace,
        };
    }
    // a tenure close to n freezes small problems
    let tenure = tenure.min((n / 4).max(1)).min(n - 1) as u64;
    let kick = kick_interval(n);
    let kick_flips = (n / 8).max(1);
    let mut tabu_until = vec![0u64; n];
    let mut iter = 0u64;
    let mut since = 0usize;
    let limit = n_rep.max(1);

    while since < limit {
        iter += 1;
        since += 1;
        if since.is_multiple_of(kick) {
            state = LocalState::new(c, best.clone());
            for _ in 0..kick_flips {
                state.flip(c, rng.random_range(0..n));
            }
            tabu_until.iter_mut().for_each(|t| *t = 0);
        }
        let mut chosen: Option<(usize, f64)> = None;
        for i in 0..n {
            let g = state.gain(i);
            let allowed = tabu_until[i] <= iter || state.energy + g < best_energy;
            if allowed && chosen.is_none_or(|(_, bg)| g < bg) {
                chosen = Some((i, g));
            }
        }
        evaluations += n as u64;
        let i = match chosen {
            Some((i, _)) => i,
            // everything is tabu: release the oldest entry
            None => (0..n).min_by_key(|&i| (tabu_until[i], i)).unwrap(),
        };
        state.flip(c, i);
        tabu_until[i] = iter + tenure + rng.random_range(0..=tenure / 2) + 1;

        if state.energy < best_energy {
            let exact = c.energy(&state.x);
            state.energy = exact;
            if exact < best_energy || (exact == best_energy && lex_less(&state.x, &best)) {
                if exact < best_energy {
                    since = 0;
                    trace.push(exact);
                }
                best_energy = exact;
                best.copy_from_slice(&state.x);
            }
        } else if state.energy == best_energy && lex_less(&state.x, &best) {
            best.copy_from_slice(&state.x);
        }
    }
    SearchOutcome {
        bits: best,
        energy: best_energy,
        evaluations,
        trace,
    }
}

fn kick_interval(n: usize) -> usize {
    (20 * n).max(100)
}

#[cfg(test)]
mod tests {
    use super::super::exact_solve;
    use super::super::test_util::random_qubo;
    use super::*;
    use crate::qubo_map::qubo_energy;

    #[test]
    fn zero_qubo() {
        let r = tabu_solve(&Qubo::zeros(5), &TabuParams::default());
        assert_eq!(r.best_energy, 0.0);
    }

    #[test]
    fn agrees_with_enumeration_on_random_instances() {
        let mut hits = 0;
        for seed in 0..100 {
            let q = random_qubo(16, 1000 + seed);
            let params = TabuParams {
                seed,
                ..Default::default()
            };
            let r = tabu_solve(&q, &params);
            let e = exact_solve(&q).unwrap().best_energy;
            assert!(r.best_energy >= e - 1e-12);
            if (r.best_energy - e).abs() <= 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn deterministic_and_consistent() {
        let q = random_qubo(30, 9);
        let p = TabuParams {
            seed: 5,
            n_rep: 500,
            ..Default::default()
        };
        let a = tabu_solve(&q, &p);
        let b = tabu_solve(&q, &p);
        assert_eq!(a.best_bits, b.best_bits);
        assert_eq!(a.best_energy, qubo_energy(&q, &a.best_bits));
        assert!(a.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn single_variable() {
        let r = tabu_solve(&Qubo::from_diag(&[-2.0]), &TabuParams::default());
        assert_eq!(r.best_bits, vec![1]);
    }

    #[test]
    fn never_worse_than_start() {
        let q = random_qubo(12, 3);
        let start = vec![1u8; 12];
        let r = tabu_solve_from(&q, start.clone(), &TabuParams { n_rep: 1, ..Default::default() });
        assert!(r.best_energy <= qubo_energy(&q, &start));
    }
}
