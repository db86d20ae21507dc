use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{derive_seed, finish, Couplings, LocalState, SaParams, SolverResult};
use crate::error::Result;
use crate::qubo_map::Qubo;

/// Best of `reads` independent Metropolis anneals on a geometric temperature
/// schedule, each followed by a zero-temperature quench. Read `r` is seeded
/// with `derive_seed(seed, [r])`, so a run with more reads only adds
/// candidates. Reads run in parallel and are merged by (energy, bits).
pub fn sa_solve(q: &Qubo, params: &SaParams) -> Result<SolverResult> {
    params.validate()?;
    let t0 = Instant::now();
    let c = Couplings::from_qubo(q);
    let n = c.n;
    let max_abs = q.max_abs();
    if n == 0 || max_abs == 0.0 {
        return Ok(finish(q, vec![0; n], 0, t0, Vec::new()));
    }
    let t_hot = params.t_hot.unwrap_or(max_abs * n as f64);
    let t_cold = params
        .t_cold
        .unwrap_or(1e-3 * q.min_abs_nonzero().unwrap_or(max_abs));
    let sweeps = params.sweeps;
    let betas: Vec<f64> = (0..sweeps)
        .map(|s| {
            let frac = if sweeps == 1 { 1.0 } else { s as f64 / (sweeps - 1) as f64 };
            1.0 / (t_hot * (t_cold / t_hot).powf(frac))
        })
        .collect();

    let (energy, bits) = (0..params.reads as u64)
        .into_par_iter()
        .map(|r| anneal_once(&c, &betas, derive_seed(params.seed, &[r])))
        .reduce_with(|a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one read");
    let _ = energy;
    let evaluations = params.reads as u64 * sweeps as u64 * n as u64;
    Ok(finish(q, bits, evaluations, t0, Vec::new()))
}

fn anneal_once(c: &Couplings, betas: &[f64], seed: u64) -> (f64, Vec<u8>) {
    let n = c.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let mut state = LocalState::new(c, start);
    for &beta in betas {
        for i in 0..n {
            let g = state.gain(i);
            if g <= 0.0 || rng.random::<f64>() < (-beta * g).exp() {
                state.flip(c, i);
            }
        }
    }
    // quench to a local minimum
    loop {
        let mut moved = false;
        for i in 0..n {
            if state.gain(i) < 0.0 {
                state.flip(c, i);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    (c.energy(&state.x), state.x)
}
