//! Dense real symmetric matrices and the cyclic Jacobi eigensolver used as the
//! reference ("oracle") for every annealer-style result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default convergence threshold for [`jacobi_eigen`]: off-diagonal Frobenius
/// norm relative to the Frobenius norm of the input.
pub const DEFAULT_JACOBI_TOL: f64 = 1e-12;
/// Sweep cap for [`jacobi_eigen`].
pub const MAX_SWEEPS: usize = 100;

/// Dense real symmetric matrix. Both triangles are kept in sync by every
/// mutator, so `get(i, j) == get(j, i)` always holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from a closure evaluated on the upper triangle only.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Row-major upper triangle (`n(n+1)/2` values: row 0 columns 0..n, row 1
    /// columns 1..n, ...).
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        let expected = n * (n + 1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: upper.len(),
            });
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        let mut it = upper.iter();
        Ok(Self::from_upper_fn(n, |_, _| *it.next().unwrap()))
    }

    /// Builds from a full square matrix given as rows; the input must be symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_upper_fn(n, |i, j| rows[i][j]))
    }

    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            for j in i..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix dimension");
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            let d = m.get(i, i);
            m.set(i, i, d + shift);
        }
        m
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Eigenpairs sorted by ascending eigenvalue. `vectors[k]` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// Largest `‖H v − λ v‖` over all pairs.
    pub fn max_residual(&self, h: &SymMatrix) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&lambda, v)| {
                let hv = h.mul_vec(v);
                hv.iter()
                    .zip(v)
                    .map(|(a, b)| (a - lambda * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Cyclic Jacobi eigensolver with row-major sweeps over the strict upper triangle.
///
/// Stops once the off-diagonal Frobenius norm drops to `tol * ‖h‖_F`. Fails with
/// [`Error::NotConverged`] after [`MAX_SWEEPS`] sweeps.
pub fn jacobi_eigen(h: &SymMatrix, tol: f64) -> Result<EigenDecomposition> {
    if !(tol > 0.0) {
        return Err(Error::invalid("jacobi tolerance must be positive"));
    }
    if !h.is_finite() {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    let n = h.dim();
    let mut a = h.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = tol * h.frobenius_norm();

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NotConverged {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|k| v[k * n + col]).collect())
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

/// Lowest eigenvalue via [`jacobi_eigen`] at the default tolerance.
pub fn ground_eigenvalue(h: &SymMatrix) -> Result<f64> {
    Ok(jacobi_eigen(h, DEFAULT_JACOBI_TOL)?.values[0])
}

/// `vᵀHv / vᵀv`.
pub fn rayleigh_quotient(h: &SymMatrix, v: &[f64]) -> Result<f64> {
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: v.len(),
        });
    }
    let nn = dot(v, v);
    if nn == 0.0 {
        return Err(Error::TrivialVector);
    }
    Ok(h.quadratic_form(v) / nn)
}

/// `H + s0 ψ₀ψ₀ᵀ`. `psi0` is normalized internally if it is not already unit
/// length to within 1e-9.
pub fn deflate(h: &SymMatrix, psi0: &[f64], s0: f64) -> Result<SymMatrix> {
    if psi0.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi0.len(),
        });
    }
    if !s0.is_finite() || s0 < 0.0 {
        return Err(Error::invalid("deflation shift must be finite and non-negative"));
    }
    let nrm = norm(psi0);
    if nrm == 0.0 {
        return Err(Error::TrivialVector);
    }
    let scale = if (nrm - 1.0).abs() <= 1e-9 { 1.0 } else { 1.0 / nrm };
    let psi: Vec<f64> = psi0.iter().map(|x| x * scale).collect();
    let n = h.dim();
    Ok(SymMatrix::from_upper_fn(n, |i, j| {
        h.get(i, j) + s0 * psi[i] * psi[j]
    }))
}

/// On-disk matrix format: `{"n": 3, "upper": [...]}` with the row-major upper triangle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub upper: Vec<f64>,
}

impl TryFrom<MatrixFile> for SymMatrix {
    type Error = Error;

    fn try_from(f: MatrixFile) -> Result<Self> {
        SymMatrix::from_upper(f.n, &f.upper)
    }
}

impl From<&SymMatrix> for MatrixFile {
    fn from(m: &SymMatrix) -> Self {
        MatrixFile {
            n: m.dim(),
            upper: m.upper(),
        }
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::SymMatrix;

    pub fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymMatrix::from_upper_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::random_sym;
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn diagonal_is_already_converged() {
        let e = jacobi_eigen(&SymMatrix::from_diag(&[3.0, 2.0]), DEFAULT_JACOBI_TOL).unwrap();
        assert_eq!(e.values, vec![2.0, 3.0]);
        assert_eq!(e.vectors[0], vec![0.0, 1.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let h = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = jacobi_eigen(&h, DEFAULT_JACOBI_TOL).unwrap();
        assert_close(e.values[0], -1.0, 1e-14);
        assert_close(e.values[1], 1.0, 1e-14);
    }

    #[test]
    fn random_residuals_orthonormality_and_trace() {
        for (n, seed) in [(8, 1), (20, 2), (35, 3)] {
            let h = random_sym(n, seed);
            let fro = h.frobenius_norm();
            let e = jacobi_eigen(&h, DEFAULT_JACOBI_TOL).unwrap();
            assert!(e.max_residual(&h) <= 1e-8 * fro);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_close(dot(&e.vectors[i], &e.vectors[j]), want, 1e-8);
                }
            }
            let sum: f64 = e.values.iter().sum();
            assert_close(sum, h.trace(), 1e-8 * fro.max(1.0));
            let sq: f64 = e.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_close(sq, fro, 1e-8 * fro);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let e = jacobi_eigen(&SymMatrix::zeros(3), DEFAULT_JACOBI_TOL).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(jacobi_eigen(&SymMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn rayleigh_examples() {
        let h = SymMatrix::from_diag(&[2.0, 3.0]);
        assert_eq!(rayleigh_quotient(&h, &[1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(rayleigh_quotient(&h, &[1.0, 1.0]).unwrap(), 2.5);
        assert!(matches!(
            rayleigh_quotient(&h, &[0.0, 0.0]),
            Err(Error::TrivialVector)
        ));
    }

    #[test]
    fn rayleigh_bounded_by_ground() {
        use rand::{RngExt, SeedableRng};
        let h = random_sym(10, 7);
        let e0 = ground_eigenvalue(&h).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(rayleigh_quotient(&h, &v).unwrap() >= e0 - 1e-6 * h.frobenius_norm());
        }
    }

    #[test]
    fn deflate_examples() {
        let h = SymMatrix::from_diag(&[1.0, 2.0]);
        let d = deflate(&h, &[1.0, 0.0], 9000.0).unwrap();
        assert_eq!(d, SymMatrix::from_diag(&[9001.0, 2.0]));
        assert_eq!(deflate(&h, &[0.6, 0.8], 0.0).unwrap(), h);
        assert!(deflate(&h, &[0.0, 0.0], 1.0).is_err());
        // unnormalized input is normalized
        let d2 = deflate(&h, &[2.0, 0.0], 9000.0).unwrap();
        assert_eq!(d2.get(0, 0), 9001.0);
    }

    #[test]
    fn deflation_shifts_exact_ground_only() {
        let h = random_sym(6, 11);
        let e = jacobi_eigen(&h, DEFAULT_JACOBI_TOL).unwrap();
        let s0 = 50.0;
        let d = deflate(&h, &e.vectors[0], s0).unwrap();
        let ed = jacobi_eigen(&d, DEFAULT_JACOBI_TOL).unwrap();
        let mut want: Vec<f64> = e.values[1..].to_vec();
        want.push(e.values[0] + s0);
        want.sort_by(f64::total_cmp);
        for (a, b) in ed.values.iter().zip(&want) {
            assert_close(*a, *b, 1e-8 * b.abs().max(1.0));
        }
        // new ground eigenvector spans the old first excited state
        let overlap = dot(&ed.vectors[0], &e.vectors[1]).abs();
        assert_close(overlap, 1.0, 1e-8);
    }

    #[test]
    fn matrix_file_round_trip() {
        let h = random_sym(4, 5);
        let json = serde_json::to_string(&MatrixFile::from(&h)).unwrap();
        let back: MatrixFile = serde_json::from_str(&json).unwrap();
        assert_eq!(SymMatrix::try_from(back).unwrap(), h);
        assert!(SymMatrix::from_upper(3, &[1.0; 5]).is_err());
    }
}
