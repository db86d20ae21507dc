//! Fixed-point qubit encoding of expansion coefficients and assembly of the
//! QUBO matrix for the functional `F(a) = aᵀ(H − λ)a`.
//!
//! Coefficient α is stored in K bits. Bit k (1-based) has weight `2^(k−K)`
//! for k < K and the last bit carries `−1`, so a coefficient ranges over
//! `[−1, 1 − 2^(1−K)]` in steps of `2^(1−K)`. Internally everything is
//! 0-based: bit `b` of coefficient `c` is variable `K·c + b`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoding {
    /// Qubits per coefficient.
    pub k: usize,
    /// Number of coefficients.
    pub c: usize,
}

impl Encoding {
    pub fn new(k: usize, c: usize) -> Result<Self> {
        if k == 0 || c == 0 {
            return Err(Error::invalid("encoding needs K ≥ 1 and C ≥ 1"));
        }
        if k > 52 {
            return Err(Error::invalid("K above 52 exceeds f64 precision"));
        }
        Ok(Self { k, c })
    }

    pub fn n_vars(&self) -> usize {
        self.k * self.c
    }

    /// Weight of 0-based bit `b`.
    #[inline]
    pub fn weight(&self, b: usize) -> f64 {
        bit_weight(b, self.k)
    }

    #[inline]
    pub fn var(&self, coeff: usize, bit: usize) -> usize {
        self.k * coeff + bit
    }

    pub fn max_value(&self) -> f64 {
        1.0 - 2f64.powi(1 - self.k as i32)
    }

    /// Bits that decode exactly to `a`, if `a` lies on the representable grid.
    pub fn encode_coeff(&self, a: f64) -> Option<Vec<u8>> {
        let step = 2f64.powi(1 - self.k as i32);
        let sign = u8::from(a < 0.0);
        let rest = (a + f64::from(sign)) / step;
        if rest.fract() != 0.0 || rest < 0.0 || rest >= 2f64.powi(self.k as i32 - 1) {
            return None;
        }
        let rest = rest as u64;
        let mut bits: Vec<u8> = (0..self.k - 1).map(|b| ((rest >> b) & 1) as u8).collect();
        bits.push(sign);
        Some(bits)
    }
}

#[inline]
fn bit_weight(b: usize, k: usize) -> f64 {
    if b + 1 == k {
        -1.0
    } else {
        2f64.powi(b as i32 + 1 - k as i32)
    }
}

/// Value of one coefficient from its K bits (least significant first, sign last).
pub fn coeff_value(bits: &[u8], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if bits.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: bits.len(),
        });
    }
    Ok(bits
        .iter()
        .enumerate()
        .map(|(b, &bit)| f64::from(bit) * bit_weight(b, k))
        .sum())
}

/// 1-based variable index `i = K·Σ_j (α_j − 1)·B^(d−1−j) + k` for the
/// multi-index `alpha` (1-based, dimension 0 most significant) and 1-based
/// qubit `k`. For d = 1 this is `K(α−1) + k`; for d = 2 `KB(α−1) + K(β−1) + k`.
pub fn variable_index(alpha: &[usize], k: usize, encoding: &Encoding, b: usize) -> Result<usize> {
    let d = alpha.len();
    if d == 0 {
        return Err(Error::invalid("empty coefficient multi-index"));
    }
    if b == 0 || b.checked_pow(d as u32) != Some(encoding.c) {
        return Err(Error::invalid(format!(
            "B^d = {b}^{d} does not match the encoding's {} coefficients",
            encoding.c
        )));
    }
    if k == 0 || k > encoding.k {
        return Err(Error::invalid(format!("qubit index {k} outside 1..={}", encoding.k)));
    }
    let mut composite = 0;
    for &a in alpha {
        if a == 0 || a > b {
            return Err(Error::invalid(format!("coefficient index {a} outside 1..={b}")));
        }
        composite = composite * b + (a - 1);
    }
    Ok(encoding.k * composite + k)
}

/// Upper-triangular QUBO coefficient table. Objective:
/// `Σ_i Q_ii x_i + Σ_{i<j} Q_ij x_i x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    n: usize,
    // row-major n×n; only i <= j is ever non-zero
    data: Vec<f64>,
}

impl Qubo {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut q = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            q.set(i, i, v);
        }
        q
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry for the unordered pair `{i, j}`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.data[a * self.n + b]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.data[a * self.n + b] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.data[a * self.n + b] += v;
    }

    /// Stored entries `(i, j, Q_ij)` with `i <= j`, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i..self.n).map(move |j| (i, j, self.data[i * self.n + j])))
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        let n = self.n;
        self.data
            .iter_mut()
            .enumerate()
            .filter(move |(idx, _)| idx / n <= idx % n)
            .map(|(_, v)| v)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest non-zero magnitude, if any entry is non-zero.
    pub fn min_abs_nonzero(&self) -> Option<f64> {
        self.data
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .min_by(f64::total_cmp)
    }

    /// Writes `n <n>` then one `i j value` line per non-zero entry (0-based, i ≤ j).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        for (i, j, v) in self.entries() {
            if v != 0.0 {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#')));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty QUBO file".into()))?;
        let header = header?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", n] => n
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("header: {e}")))?,
            _ => return Err(Error::Parse(format!("expected 'n <count>' header, got '{header}'"))),
        };
        let mut q = Qubo::zeros(n);
        for (lineno, line) in lines {
            let line = line?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
            if parts.len() != 3 {
                return Err(parse_err("triplet"));
            }
            let i: usize = parts[0].parse().map_err(|_| parse_err("row index"))?;
            let j: usize = parts[1].parse().map_err(|_| parse_err("column index"))?;
            let v: f64 = parts[2].parse().map_err(|_| parse_err("value"))?;
            if i >= n || j >= n {
                return Err(Error::Parse(format!("line {}: index out of range", lineno + 1)));
            }
            q.add(i, j, v);
        }
        Ok(q)
    }
}

/// QUBO for `F = aᵀ(H − λ I)a` over the encoded coefficients. Pairs of
/// distinct variables get `2·w_k·w_l·(H − λ)_αβ`; a variable with itself uses
/// `x² = x`, giving `w_k²·(H − λ)_αα`. The objective then equals
/// `decode(x)ᵀ(H − λ)decode(x)` for every bit string.
pub fn build_qubo(h: &SymMatrix, encoding: &Encoding, lambda: f64) -> Result<Qubo> {
    if h.dim() != encoding.c {
        return Err(Error::DimensionMismatch {
            expected: encoding.c,
            got: h.dim(),
        });
    }
    let k = encoding.k;
    let n = encoding.n_vars();
    let weights: Vec<f64> = (0..k).map(|b| encoding.weight(b)).collect();
    let mut q = Qubo::zeros(n);
    for alpha in 0..encoding.c {
        for beta in alpha..encoding.c {
            let m = h.get(alpha, beta) - if alpha == beta { lambda } else { 0.0 };
            for (bk, &wk) in weights.iter().enumerate() {
                let i = encoding.var(alpha, bk);
                let l_start = if alpha == beta { bk } else { 0 };
                for (bl, &wl) in weights.iter().enumerate().skip(l_start) {
                    let j = encoding.var(beta, bl);
                    let v = if i == j { wk * wk * m } else { 2.0 * wk * wl * m };
                    q.set(i, j, v);
                }
            }
        }
    }
    Ok(q)
}

/// Coefficient vector of a bit string. Not renormalized.
pub fn decode(bits: &[u8], encoding: &Encoding) -> Result<Vec<f64>> {
    if bits.len() != encoding.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: encoding.n_vars(),
            got: bits.len(),
        });
    }
    bits.chunks(encoding.k)
        .map(|chunk| coeff_value(chunk, encoding.k))
        .collect()
}

pub fn qubo_energy(q: &Qubo, x: &[u8]) -> f64 {
    assert_eq!(x.len(), q.n(), "bit string length must match QUBO size");
    let n = q.n;
    let mut e = 0.0;
    for i in 0..n {
        if x[i] == 0 {
            continue;
        }
        let row = &q.data[i * n..(i + 1) * n];
        e += row[i];
        for j in (i + 1)..n {
            if x[j] != 0 {
                e += row[j];
            }
        }
    }
    e
}
