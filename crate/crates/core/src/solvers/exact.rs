use std::time::Instant;

use super::{finish, Couplings, LocalState, SolverResult};
use crate::error::{Error, Result};
use crate::qubo_map::Qubo;

pub const EXACT_HARD_LIMIT: usize = 30;

/// Global minimum by Gray-code enumeration of all 2^n assignments. Equal
/// energies resolve to the lexicographically smallest bit string.
pub fn exact_solve(q: &Qubo) -> Result<SolverResult> {
    let start = Instant::now();
    if q.n() > EXACT_HARD_LIMIT {
        return Err(Error::TooLarge(format!(
            "exact enumeration limited to {EXACT_HARD_LIMIT} variables, got {}",
            q.n()
        )));
    }
    let c = Couplings::from_qubo(q);
    let (bits, visited) = enumerate(&c);
    Ok(finish(q, bits, visited, start, Vec::new()))
}

/// Returns the minimizing assignment and the number of states visited.
pub(crate) fn enumerate(c: &Couplings) -> (Vec<u8>, u64) {
    let n = c.n;
    assert!(n <= EXACT_HARD_LIMIT);
    let mut state = LocalState::new(c, vec![0; n]);
    let mut best_energy = 0.0;
    let mut best_mask: u64 = 0;
    let mut mask: u64 = 0;
    let total: u64 = 1 << n;
    // bit i of the mask is x_i, so lexicographic order is reversed-bit order
    let lex_key = |m: u64| m.reverse_bits();
    for step in 1..total {
        let i = step.trailing_zeros() as usize;
        state.flip(c, i);
        mask ^= 1 << i;
        if state.energy < best_energy
            || (state.energy == best_energy && lex_key(mask) < lex_key(best_mask))
        {
            best_energy = state.energy;
            best_mask = mask;
        }
    }
    let bits = (0..n).map(|i| ((best_mask >> i) & 1) as u8).collect();
    (bits, total)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::random_qubo;
    use super::*;
    use crate::qubo_map::qubo_energy;

    #[test]
    fn examples() {
        let r = exact_solve(&Qubo::from_diag(&[-1.0, 2.0])).unwrap();
        assert_eq!(r.best_bits, vec![1, 0]);
        assert_eq!(r.best_energy, -1.0);

        let r = exact_solve(&Qubo::zeros(4)).unwrap();
        assert_eq!(r.best_bits, vec![0; 4]);
        assert_eq!(r.best_energy, 0.0);

        let mut q = Qubo::from_diag(&[1.0, 1.0]);
        q.set(0, 1, -5.0);
        let r = exact_solve(&q).unwrap();
        assert_eq!(r.best_bits, vec![1, 1]);
        assert_eq!(r.best_energy, -3.0);
    }

    #[test]
    fn ties_prefer_lexicographically_smallest() {
        // (1,0) and (0,1) both reach −1
        let q = Qubo::from_diag(&[-1.0, -1.0]);
        let mut q2 = q.clone();
        q2.set(0, 1, 1.0);
        let r = exact_solve(&q2).unwrap();
        assert_eq!(r.best_bits, vec![0, 1]);
    }

    #[test]
    fn matches_naive_enumeration() {
        for seed in 0..10 {
            let q = random_qubo(10, seed);
            let r = exact_solve(&q).unwrap();
            let naive = (0u32..1 << 10)
                .map(|m| {
                    let x: Vec<u8> = (0..10).map(|i| ((m >> i) & 1) as u8).collect();
                    qubo_energy(&q, &x)
                })
                .fold(f64::INFINITY, f64::min);
            assert!((r.best_energy - naive).abs() < 1e-12);
            assert_eq!(r.best_energy, qubo_energy(&q, &r.best_bits));
        }
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(matches!(exact_solve(&Qubo::zeros(31)), Err(Error::TooLarge(_))));
    }
}
