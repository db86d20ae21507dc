//! Annealer imperfections: integrated control errors (ICE) on the programmed
//! QUBO, and chains of physical qubits standing in for one logical qubit.
//!
//! Chains are abstract: logical variable `i` becomes physical variables
//! `i·L .. i·L + L`, coupled in a line. No hardware graph is modelled.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, rayleigh_quotient, SymMatrix};
use crate::qubo_map::{build_qubo, decode, Encoding, Qubo};
use crate::solvers::{derive_seed, sa_solve, SaParams};

/// Decoded states with a smaller norm count as the trivial solution.
pub const TRIVIAL_NORM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Multiplier on the reported error figures; 0 disables noise.
    pub scale: f64,
    /// Mean error as a fraction of `max|Q_ij|`.
    pub mean_frac: f64,
    /// Standard deviation as a fraction of `max|Q_ij|`.
    pub std_frac: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            scale: 1.0,
            mean_frac: 0.007,
            std_frac: 0.008,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn with_scale(scale: f64, seed: u64) -> Self {
        Self {
            scale,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| (0.0..=0.2).contains(&f);
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid("noise scale must be non-negative"));
        }
        if !frac_ok(self.mean_frac) || !frac_ok(self.std_frac) {
            return Err(Error::invalid("noise fractions must lie in [0, 0.2]"));
        }
        Ok(())
    }

    /// Expected `|δ|` per element: `s·M·E|m + σg|` for a standard normal `g`
    /// (the random sign on the mean does not change the magnitude).
    pub fn expected_abs_error(&self, max_element: f64) -> f64 {
        let (m, s) = (self.mean_frac, self.std_frac);
        let folded = if s == 0.0 {
            m
        } else {
            let z = m / s;
            s * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp() + m * erf(z / std::f64::consts::SQRT_2)
        };
        self.scale * max_element * folded
    }
}

// Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Perturbs every stored element (i ≤ j) by `s·M·(u·mean_frac + g·std_frac)`,
/// `M = max|Q_ij|`, `u` a random sign, `g` standard normal. Elements are
/// visited row-major, so the result depends only on `spec.seed`.
pub fn apply_noise(q: &Qubo, spec: &NoiseSpec) -> Result<Qubo> {
    spec.validate()?;
    if spec.scale == 0.0 {
        return Ok(q.clone());
    }
    let amplitude = spec.scale * q.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = q.clone();
    for v in out.entries_mut() {
        let u = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let g: f64 = StandardNormal.sample(&mut rng);
        *v += amplitude * (u * spec.mean_frac + g * spec.std_frac);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    Zero,
    One,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub chain_length: usize,
    pub chain_penalty: f64,
    #[serde(default)]
    pub tie_rule: TieRule,
}

impl ChainSpec {
    pub fn new(chain_length: usize, chain_penalty: f64) -> Self {
        Self {
            chain_length,
            chain_penalty,
            tie_rule: TieRule::Zero,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.chain_length == 0 {
            return Err(Error::invalid("chain length must be at least 1"));
        }
        if !(self.chain_penalty >= 0.0 && self.chain_penalty.is_finite()) {
            return Err(Error::invalid("chain penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Replaces each logical variable by a line of `L` physical variables.
///
/// The linear term is split evenly over the chain. The coupling `Q_ij` sits
/// between member `j mod L` of chain `i` and member `i mod L` of chain `j`.
/// Neighbouring members get `c·(x_a + x_b − 2 x_a x_b)`, which is zero for
/// agreeing members and `c` for a broken link.
pub fn embed_chains(q: &Qubo, spec: &ChainSpec) -> Result<Qubo> {
    spec.validate()?;
    let l = spec.chain_length;
    if l == 1 {
        return Ok(q.clone());
    }
    let n = q.n();
    let phys = |logical: usize, member: usize| logical * l + member;
    let mut out = Qubo::zeros(n * l);
    for (i, j, v) in q.entries() {
        if i == j {
            for m in 0..l {
                out.add(phys(i, m), phys(i, m), v / l as f64);
            }
        } else {
            out.add(phys(i, j % l), phys(j, i % l), v);
        }
    }
    let c = spec.chain_penalty;
    for i in 0..n {
        for m in 0..l - 1 {
            let (a, b) = (phys(i, m), phys(i, m + 1));
            out.add(a, a, c);
            out.add(b, b, c);
            out.add(a, b, -2.0 * c);
        }
    }
    Ok(out)
}

/// Majority vote per chain. Returns the logical bits and the fraction of
/// chains whose members disagree.
pub fn unembed(bits: &[u8], spec: &ChainSpec) -> Result<(Vec<u8>, f64)> {
    spec.validate()?;
    let l = spec.chain_length;
    if !bits.len().is_multiple_of(l) {
        return Err(Error::invalid(format!(
            "{} physical bits do not split into chains of {l}",
            bits.len()
        )));
    }
    let chains = bits.len() / l;
    let mut broken = 0usize;
    let logical = bits
        .chunks(l)
        .map(|chain| {
            let ones = chain.iter().filter(|&&b| b != 0).count();
            if ones != 0 && ones != l {
                broken += 1;
            }
            match (2 * ones).cmp(&l) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => match spec.tie_rule {
                    TieRule::Zero => 0,
                    TieRule::One => 1,
                },
            }
        })
        .collect();
    let rate = if chains == 0 { 0.0 } else { broken as f64 / chains as f64 };
    Ok((logical, rate))
}

/// One `(λ, c)` cell of a chain scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCell {
    pub lambda: f64,
    pub chain_penalty: f64,
    /// Renormalized energy of the unembedded state; `None` when trivial or failed.
    pub min_energy: Option<f64>,
    pub break_rate: f64,
    pub trivial: bool,
    pub error: Option<String>,
}

/// Two-dimensional scan over the normalization penalty λ and chain penalty c:
/// build the QUBO, embed it in chains, anneal, unembed, renormalize. Cells are
/// independent; cell `(a, b)` anneals with seed `derive_seed(sa.seed, [a, b])`.
/// Output is row-major over `lambdas` then `penalties`.
pub fn scan_lambda_chain(
    h: &SymMatrix,
    encoding: &Encoding,
    lambdas: &[f64],
    penalties: &[f64],
    chain: &ChainSpec,
    sa: &SaParams,
) -> Result<Vec<ChainCell>> {
    if lambdas.is_empty() || penalties.is_empty() {
        return Err(Error::invalid("chain scan grids must be non-empty"));
    }
    let cells: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|a| (0..penalties.len()).map(move |b| (a, b)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(a, b)| {
            let (lambda, c) = (lambdas[a], penalties[b]);
            let spec = ChainSpec {
                chain_penalty: c,
                ..chain.clone()
            };
            let params = SaParams {
                seed: derive_seed(sa.seed, &[a as u64, b as u64]),
                ..sa.clone()
            };
            match chain_cell(h, encoding, lambda, &spec, &params) {
                Ok(cell) => cell,
                Err(e) => ChainCell {
                    lambda,
                    chain_penalty: c,
                    min_energy: None,
                    break_rate: 0.0,
                    trivial: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

fn chain_cell(
    h: &SymMatrix,
    encoding: &Encoding,
    lambda: f64,
    chain: &ChainSpec,
    sa: &SaParams,
) -> Result<ChainCell> {
    let q = build_qubo(h, encoding, lambda)?;
    let physical = embed_chains(&q, chain)?;
    let result = sa_solve(&physical, sa)?;
    let (logical, break_rate) = unembed(&result.best_bits, chain)?;
    let a = decode(&logical, encoding)?;
    let trivial = norm(&a) < TRIVIAL_NORM;
    let min_energy = if trivial {
        None
    } else {
        Some(rayleigh_quotient(h, &a)?)
    };
    Ok(ChainCell {
        lambda,
        chain_penalty: chain.chain_penalty,
        min_energy,
        break_rate,
        trivial,
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::qubo_map::qubo_energy;
    use crate::solvers::exact_solve;

    fn random_qubo(n: usize, seed: u64) -> Qubo {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Qubo::zeros(n);
        for i in 0..n {
            for j in i..n {
                q.set(i, j, rng.random_range(-1.0..=1.0));
            }
        }
        q
    }

    fn replicate(x: &[u8], l: usize) -> Vec<u8> {
        x.iter().flat_map(|&b| std::iter::repeat_n(b, l)).collect()
    }

    #[test]
    fn zero_scale_is_identity() {
        let q = random_qubo(6, 1);
        assert_eq!(apply_noise(&q, &NoiseSpec::with_scale(0.0, 3)).unwrap(), q);
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let q = random_qubo(6, 1);
        let a = apply_noise(&q, &NoiseSpec::with_scale(1.0, 3)).unwrap();
        let b = apply_noise(&q, &NoiseSpec::with_scale(1.0, 3)).unwrap();
        let c = apply_noise(&q, &NoiseSpec::with_scale(1.0, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // lower triangle untouched
        assert_ne!(a, q);
    }

    #[test]
    fn mean_error_matches_folded_normal() {
        // one big QUBO supplies ~1e5 perturbed elements
        let n = 446;
        let mut q = Qubo::zeros(n);
        q.set(0, 0, 11.5e3);
        let spec = NoiseSpec::with_scale(1.0, 42);
        let noisy = apply_noise(&q, &spec).unwrap();
        let deltas: Vec<f64> = noisy
            .entries()
            .zip(q.entries())
            .map(|((_, _, a), (_, _, b))| (a - b).abs())
            .collect();
        assert!(deltas.len() >= 99_000);
        let count = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / count;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / count;
        let expected = spec.expected_abs_error(11.5e3);
        assert!((mean - expected).abs() <= 3.0 * (var / count).sqrt(), "{mean} vs {expected}");
        // the reported diagonal figure: 0.7% of 11.5e3 cm⁻¹ ≈ 80 cm⁻¹
        assert!((spec.mean_frac * 11.5e3 - 80.5).abs() < 1e-9);
    }

    #[test]
    fn noise_magnitude_grows_linearly_with_scale() {
        let q = random_qubo(30, 2);
        let mean_delta = |s: f64| {
            let noisy = apply_noise(&q, &NoiseSpec::with_scale(s, 7)).unwrap();
            noisy
                .entries()
                .zip(q.entries())
                .map(|((_, _, a), (_, _, b))| (a - b).abs())
                .sum::<f64>()
        };
        let (m1, m3, m5) = (mean_delta(1.0), mean_delta(3.0), mean_delta(5.0));
        assert!(m1 < m3 && m3 < m5);
        assert!((m3 / m1 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.5) - 0.520_499_877_8).abs() < 2e-7);
        assert!((erf(-1.0) + 0.842_700_792_9).abs() < 2e-7);
    }

    #[test]
    fn length_one_chain_is_identity() {
        let q = random_qubo(5, 3);
        assert_eq!(embed_chains(&q, &ChainSpec::new(1, 10.0)).unwrap(), q);
    }

    #[test]
    fn replicated_assignments_keep_logical_energy() {
        for l in 2..=4 {
            for seed in 0..5 {
                let q = random_qubo(5, seed);
                let emb = embed_chains(&q, &ChainSpec::new(l, 3.0)).unwrap();
                for mask in 0u32..32 {
                    let x: Vec<u8> = (0..5).map(|i| ((mask >> i) & 1) as u8).collect();
                    let e = qubo_energy(&q, &x);
                    let ep = qubo_energy(&emb, &replicate(&x, l));
                    assert!((e - ep).abs() <= 1e-12 * e.abs().max(1.0), "l={l}: {e} vs {ep}");
                }
            }
        }
    }

    #[test]
    fn penalty_never_lowers_broken_energy() {
        let q = random_qubo(4, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let e = |c: f64| qubo_energy(&embed_chains(&q, &ChainSpec::new(3, c)).unwrap(), &x);
            let broken_links: usize = x
                .chunks(3)
                .map(|ch| ch.windows(2).filter(|w| w[0] != w[1]).count())
                .sum();
            let (e0, e1, e2) = (e(0.0), e(1.0), e(2.0));
            assert!(e0 <= e1 && e1 <= e2);
            assert!((e1 - e0 - broken_links as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn unpenalized_chain_optimum() {
        let q = Qubo::from_diag(&[-1.0]);
        let emb = embed_chains(&q, &ChainSpec::new(2, 0.0)).unwrap();
        let r = exact_solve(&emb).unwrap();
        assert_eq!(r.best_bits, vec![1, 1]);
        assert_eq!(r.best_energy, -1.0);
        assert_eq!(emb.get(0, 0), -0.5);
    }

    #[test]
    fn unembed_examples() {
        let spec = ChainSpec::new(3, 1.0);
        assert_eq!(unembed(&[1, 1, 1, 0, 0, 0], &spec).unwrap(), (vec![1, 0], 0.0));
        assert_eq!(unembed(&[1, 1, 0], &spec).unwrap(), (vec![1], 1.0));
        let two = ChainSpec::new(2, 1.0);
        assert_eq!(unembed(&[1, 0], &two).unwrap(), (vec![0], 1.0));
        let two_one = ChainSpec {
            tie_rule: TieRule::One,
            ..two.clone()
        };
        assert_eq!(unembed(&[0, 1], &two_one).unwrap(), (vec![1], 1.0));
        assert!(unembed(&[1, 0, 1], &two).is_err());
    }

    #[test]
    fn scan_rejects_empty_grids() {
        let h = SymMatrix::from_diag(&[1.0]);
        let enc = Encoding::new(1, 1).unwrap();
        let sa = SaParams::default();
        assert!(scan_lambda_chain(&h, &enc, &[], &[1.0], &ChainSpec::new(2, 1.0), &sa).is_err());
    }

    #[test]
    fn single_cell_scan() {
        let h = SymMatrix::from_diag(&[1.0, 3.0]);
        let enc = Encoding::new(2, 2).unwrap();
        let sa = SaParams {
            reads: 50,
            sweeps: 50,
            ..Default::default()
        };
        let cells = scan_lambda_chain(&h, &enc, &[2.0], &[50.0], &ChainSpec::new(2, 0.0), &sa).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].min_energy, Some(1.0));
        assert_eq!(cells[0].break_rate, 0.0);
    }
}
