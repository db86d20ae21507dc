use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qae::driver::{excited_state, ground_state, spectrum, ScanSpec, SolverConfig, SpectrumState, DEFAULT_S0};
use qae::error::Error;
use qae::experiments::{run, ExperimentKind, ExperimentSpec};
use qae::hamiltonian::{build_product_hamiltonian, oscillator_problem, ProblemPreset, BENCHMARK_HALF_WIDTH};
use qae::linalg::{deflate, jacobi_eigen, norm, SymMatrix, DEFAULT_JACOBI_TOL};
use qae::solvers::TabuParams;

fn random_h(n: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SymMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            rng.random_range(0.0..10.0)
        } else {
            rng.random_range(-2.0..2.0)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ground_state_is_variational(n in 1usize..=4, k in 1usize..=3, seed in 0u64..1000,
                                   lambda_min in -5.0f64..5.0, step in 0.5f64..4.0) {
        let h = random_h(n, seed);
        let e0 = jacobi_eigen(&h, DEFAULT_JACOBI_TOL).unwrap().values[0];
        let scan = ScanSpec::new(lambda_min, 6, step);
        match ground_state(&h, k, &scan, &SolverConfig::Exact, None) {
            Ok(r) => {
                prop_assert!(r.energy >= e0 - 1e-6 * h.frobenius_norm());
                prop_assert!((norm(&r.wavefunction) - 1.0).abs() < 1e-9);
                prop_assert_eq!(r.per_lambda_trace.len(), 6);
                prop_assert!(r.raw_norm >= 1e-6);
            }
            Err(Error::AllTrivial { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn excited_state_is_variational_for_the_deflated_matrix(seed in 0u64..1000) {
        let h = random_h(3, seed);
        let scan = ScanSpec::new(-5.0, 12, 2.0);
        let Ok(g) = ground_state(&h, 3, &scan, &SolverConfig::Exact, None) else {
            return Ok(());
        };
        let mut prior = SpectrumState::new(DEFAULT_S0);
        prior.states.push(g.clone());
        let deflated = deflate(&h, &g.wavefunction, DEFAULT_S0).unwrap();
        let floor = jacobi_eigen(&deflated, DEFAULT_JACOBI_TOL).unwrap().values[0];
        if let Ok(r) = excited_state(&h, &prior, 3, &ScanSpec::new(-5.0, 20, 2.0), &SolverConfig::Exact, None) {
            let shifted = r.energy + DEFAULT_S0 * qae::linalg::dot(&g.wavefunction, &r.wavefunction).powi(2);
            prop_assert!(shifted >= floor - 1e-6 * deflated.frobenius_norm());
        }
    }
}

#[test]
fn ground_state_is_reproducible() {
    let h = build_product_hamiltonian(&oscillator_problem(2, 2, BENCHMARK_HALF_WIDTH), 4).unwrap();
    let scan = ScanSpec::preset("harmonic-2d").unwrap();
    let solver = SolverConfig::Tabu(TabuParams {
        seed: 17,
        n_rep: 2000,
        ..Default::default()
    });
    let a = ground_state(&h, 4, &scan, &solver, None).unwrap();
    let b = ground_state(&h, 4, &scan, &solver, None).unwrap();
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.wavefunction, b.wavefunction);
    assert_eq!(a.per_lambda_trace, b.per_lambda_trace);
}

/// Levels of the Morse surrogate, ω_e = 1580 and ω_e x_e = 12 cm⁻¹.
fn morse_level(n: usize) -> f64 {
    let v = n as f64 + 0.5;
    1580.0 * v - 12.0 * v * v
}

#[test]
fn higher_states_are_described_less_accurately() {
    let h = build_product_hamiltonian(&ProblemPreset::Morse.build(), 8).unwrap();
    let scans = [
        ScanSpec::preset("morse").unwrap(),
        ScanSpec::preset("morse-excited").unwrap(),
        ScanSpec::new(3880.0, 10, 10.0),
        ScanSpec::new(5400.0, 10, 10.0),
    ];
    let s = spectrum(&h, 4, 8, &scans, &SolverConfig::default(), None, DEFAULT_S0).unwrap();
    let errors: Vec<f64> = s
        .states
        .iter()
        .enumerate()
        .map(|(i, st)| (st.energy - morse_level(i)).abs())
        .collect();
    assert!(errors[3] > errors[2] && errors[2] > errors[1].max(errors[0]), "{errors:?}");
}

#[test]
fn median_error_improves_until_the_plateau() {
    let mut spec = ExperimentSpec::new(ExperimentKind::KSweep, (0..5).collect());
    spec.k_grid = (1..=10).collect();
    let t = run(&spec).unwrap();
    assert_eq!(t.failures(), 0);
    let median = |k: usize| {
        let mut v: Vec<f64> = (0..t.rows.len())
            .filter(|&r| t.get(r, "K") == k.to_string())
            .map(|r| t.get_f64(r, "abs_error").unwrap())
            .collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let errors: Vec<f64> = (1..=10).map(median).collect();
    let violations = (0..8)
        .filter(|&i| errors[i] > 1.0 && errors[i + 2] > errors[i] + 1e-9)
        .count();
    assert!(violations <= 1, "{errors:?}");
    assert!(errors[0] > 10.0 * errors[7], "{errors:?}");
}
