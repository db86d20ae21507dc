//! Model vibrational Hamiltonians in truncated cosine and Fourier bases.
//!
//! Reduced units: ħ = 1, masses dimensionless (default 1) and energies are
//! plain numbers labelled cm⁻¹. With these units a harmonic potential
//! `½ m ω² x²` has levels `ω (n + ½)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Domain half-width of the oscillator basis, in units of `1/√(mω)`. Wide
/// enough that the basis error, not the box, limits accuracy.
pub const DEFAULT_HALF_WIDTH: f64 = 5.0;
/// Compact half-width used by the oscillator benchmarks: a B = 3 cosine
/// basis then has its ground level at 401.9 cm⁻¹ for ω = 800 cm⁻¹.
pub const BENCHMARK_HALF_WIDTH: f64 = 2.5;
/// Quadrature nodes per basis function.
pub const QUADRATURE_PER_BASIS: usize = 16;
pub const MAX_DIMENSIONS: usize = 5;
pub const DEFAULT_VARIABLE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `N_m cos(mπ(x − x_min)/L)`, m = 0..=m_max.
    Cosine,
    /// `1/√L`, then `√(2/L) cos(2πnu/L)`, `√(2/L) sin(2πnu/L)` for n = 1..=m_max.
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub m_max: usize,
    pub domain: [f64; 2],
    /// Number of trapezoid intervals; must be at least 4·B.
    pub quadrature_points: usize,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, m_max: usize, x_min: f64, x_max: f64) -> Self {
        let mut spec = Self {
            kind,
            m_max,
            domain: [x_min, x_max],
            quadrature_points: 0,
        };
        spec.quadrature_points = QUADRATURE_PER_BASIS * spec.size();
        spec
    }

    pub fn size(&self) -> usize {
        match self.kind {
            BasisKind::Cosine => self.m_max + 1,
            BasisKind::Fourier => 2 * self.m_max + 1,
        }
    }

    pub fn length(&self) -> f64 {
        self.domain[1] - self.domain[0]
    }

    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("basis domain [{lo}, {hi}] is empty")));
        }
        if self.quadrature_points < 4 * self.size() {
            return Err(Error::invalid(format!(
                "quadrature_points = {} is below 4·B = {}",
                self.quadrature_points,
                4 * self.size()
            )));
        }
        Ok(())
    }

    /// Value of basis function `idx` at `x`.
    fn eval(&self, idx: usize, x: f64) -> f64 {
        let l = self.length();
        let u = x - self.domain[0];
        match self.kind {
            BasisKind::Cosine => {
                if idx == 0 {
                    (1.0 / l).sqrt()
                } else {
                    (2.0 / l).sqrt() * (idx as f64 * std::f64::consts::PI * u / l).cos()
                }
            }
            BasisKind::Fourier => {
                if idx == 0 {
                    return (1.0 / l).sqrt();
                }
                let n = idx.div_ceil(2) as f64;
                let phase = 2.0 * std::f64::consts::PI * n * u / l;
                if idx % 2 == 1 {
                    (2.0 / l).sqrt() * phase.cos()
                } else {
                    (2.0 / l).sqrt() * phase.sin()
                }
            }
        }
    }

    /// Analytic `⟨φ|p²/2m|φ⟩`; the kinetic operator is diagonal in both bases.
    fn kinetic(&self, idx: usize, mass: f64) -> f64 {
        let l = self.length();
        let k = match self.kind {
            BasisKind::Cosine => idx as f64 * std::f64::consts::PI / l,
            BasisKind::Fourier => 2.0 * std::f64::consts::PI * idx.div_ceil(2) as f64 / l,
        };
        k * k / (2.0 * mass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `½ m ω² (x − center)²`.
    Harmonic {
        omega: f64,
        #[serde(default)]
        center: f64,
    },
    /// `D (1 − e^{−a(x − r_e)})²`.
    Morse { d: f64, a: f64, r_e: f64 },
    /// Piecewise-linear interpolation of `(grid, values)`; no extrapolation.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Harmonic { omega, center } => {
                if !(*omega > 0.0) || !center.is_finite() {
                    return Err(Error::invalid("harmonic potential needs ω > 0"));
                }
            }
            PotentialSpec::Morse { d, a, r_e } => {
                if !(*d > 0.0 && *a > 0.0) || !r_e.is_finite() {
                    return Err(Error::invalid("morse potential needs D > 0 and a > 0"));
                }
            }
            PotentialSpec::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(Error::invalid(
                        "tabulated potential needs at least two (x, V) pairs",
                    ));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("tabulated grid must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64, mass: f64) -> Result<f64> {
        let v = match self {
            PotentialSpec::Harmonic { omega, center } => {
                0.5 * mass * omega * omega * (x - center) * (x - center)
            }
            PotentialSpec::Morse { d, a, r_e } => {
                let e = 1.0 - (-a * (x - r_e)).exp();
                d * e * e
            }
            PotentialSpec::Tabulated { grid, values } => {
                let (first, last) = (grid[0], grid[grid.len() - 1]);
                if x < first || x > last {
                    return Err(Error::invalid(format!(
                        "x = {x} outside tabulated grid [{first}, {last}]"
                    )));
                }
                let hi = grid.partition_point(|&g| g < x).clamp(1, grid.len() - 1);
                let (x0, x1) = (grid[hi - 1], grid[hi]);
                let t = (x - x0) / (x1 - x0);
                values[hi - 1] + t * (values[hi] - values[hi - 1])
            }
        };
        if !v.is_finite() {
            return Err(Error::invalid(format!("non-finite potential value at x = {x}")));
        }
        Ok(v)
    }
}

/// Reads a two-column `x,V` CSV. Lines starting with `#` and a non-numeric
/// header row are skipped.
pub fn read_tabulated_csv(path: &Path) -> Result<PotentialSpec> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Parse(format!("line {}: expected two columns", line + 1)));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(x), Ok(v)) => {
                grid.push(x);
                values.push(v);
            }
            _ if line == 0 => continue,
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: cannot parse '{}', '{}'",
                    line + 1,
                    &record[0],
                    &record[1]
                )))
            }
        }
    }
    let pot = PotentialSpec::Tabulated { grid, values };
    pot.validate()?;
    Ok(pot)
}

fn default_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub basis: BasisSpec,
    pub potential: PotentialSpec,
    #[serde(default = "default_mass")]
    pub mass: f64,
}

fn default_cap() -> usize {
    DEFAULT_VARIABLE_CAP
}

/// A separable problem on a direct-product basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(default)]
    pub name: String,
    pub dims: Vec<DimSpec>,
    #[serde(default = "default_cap")]
    pub variable_cap: usize,
}

impl ProblemSpec {
    pub fn d(&self) -> usize {
        self.dims.len()
    }

    /// Per-dimension basis size B.
    pub fn basis_size(&self) -> usize {
        self.dims.first().map_or(0, |d| d.basis.size())
    }

    /// Total number of expansion coefficients, B^d.
    pub fn n_coefficients(&self) -> usize {
        self.basis_size().pow(self.d() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.len() > MAX_DIMENSIONS {
            return Err(Error::invalid(format!(
                "dimension count {} outside 1..={MAX_DIMENSIONS}",
                self.dims.len()
            )));
        }
        let b = self.basis_size();
        for (i, dim) in self.dims.iter().enumerate() {
            if dim.basis.size() != b {
                return Err(Error::invalid(format!(
                    "dimension {i} has basis size {} but dimension 0 has {b}",
                    dim.basis.size()
                )));
            }
        }
        Ok(())
    }

    /// Loads a problem from JSON. Accepts either an explicit spec or a preset
    /// (`{"preset": "harmonic", "d": 2}` / `{"preset": "morse"}`). Tabulated
    /// potentials may reference a CSV file with `{"kind": "tabulated", "csv": "v.csv"}`,
    /// resolved relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        Self::from_json_value(value, path.parent())
    }

    pub fn from_json_value(mut value: serde_json::Value, base: Option<&Path>) -> Result<Self> {
        if value.get("preset").is_some() {
            let preset: ProblemPreset = serde_json::from_value(value)?;
            return Ok(preset.build());
        }
        if let Some(dims) = value.get_mut("dims").and_then(|d| d.as_array_mut()) {
            for dim in dims {
                let Some(pot) = dim.get_mut("potential") else {
                    continue;
                };
                let Some(csv_path) = pot.get("csv").and_then(|c| c.as_str()) else {
                    continue;
                };
                let p = base.map_or_else(|| Path::new(csv_path).to_path_buf(), |b| b.join(csv_path));
                *pot = serde_json::to_value(read_tabulated_csv(&p)?)?;
            }
        }
        let spec: ProblemSpec = serde_json::from_value(value)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ProblemPreset {
    /// d-dimensional oscillator with ω_i = 800 + 200·(i − 1) cm⁻¹.
    Harmonic {
        d: usize,
        #[serde(default = "default_m_max")]
        m_max: usize,
        #[serde(default = "default_benchmark_width")]
        half_width: f64,
    },
    Morse,
}

fn default_m_max() -> usize {
    2
}

fn default_benchmark_width() -> f64 {
    BENCHMARK_HALF_WIDTH
}

impl ProblemPreset {
    pub fn build(&self) -> ProblemSpec {
        match *self {
            ProblemPreset::Harmonic { d, m_max, half_width } => {
                oscillator_problem(d, m_max, half_width)
            }
            ProblemPreset::Morse => {
                let (basis, potential, mass) = morse_surrogate_default();
                ProblemSpec {
                    name: "morse".into(),
                    dims: vec![DimSpec {
                        basis,
                        potential,
                        mass,
                    }],
                    variable_cap: DEFAULT_VARIABLE_CAP,
                }
            }
        }
    }
}

/// Oscillator frequency of dimension `i` (0-based): 800 + 200·i cm⁻¹.
pub fn oscillator_frequency(i: usize) -> f64 {
    800.0 + 200.0 * i as f64
}

/// Cosine-basis harmonic dimension on `[−w/√ω, w/√ω]` (unit mass).
pub fn harmonic_dim(omega: f64, m_max: usize, half_width: f64) -> DimSpec {
    let hw = half_width / omega.sqrt();
    DimSpec {
        basis: BasisSpec::new(BasisKind::Cosine, m_max, -hw, hw),
        potential: PotentialSpec::Harmonic { omega, center: 0.0 },
        mass: 1.0,
    }
}

pub fn oscillator_problem(d: usize, m_max: usize, half_width: f64) -> ProblemSpec {
    ProblemSpec {
        name: format!("harmonic-{d}d"),
        dims: (0..d)
            .map(|i| harmonic_dim(oscillator_frequency(i), m_max, half_width))
            .collect(),
        variable_cap: DEFAULT_VARIABLE_CAP,
    }
}

/// Diatomic Morse surrogate: harmonic constant ω_e = 1580 cm⁻¹ and
/// anharmonicity ω_e x_e = 12 cm⁻¹, unit mass, so `a = √(2 ω_e x_e)` and
/// `D = ω_e² / (4 ω_e x_e)`. The exact levels are 787, 2343, 3875 cm⁻¹; the
/// 9-function Fourier basis on `[r_e − 3.5/√ω_e, r_e + 5/√ω_e]` reproduces the
/// lowest two within 0.4 cm⁻¹.
pub fn morse_surrogate_default() -> (BasisSpec, PotentialSpec, f64) {
    const OMEGA_E: f64 = 1580.0;
    const OMEGA_E_XE: f64 = 12.0;
    const R_E: f64 = 1.0;
    let mass = 1.0;
    let a = (2.0 * mass * OMEGA_E_XE).sqrt();
    let d = OMEGA_E * OMEGA_E / (4.0 * OMEGA_E_XE);
    let s = 1.0 / OMEGA_E.sqrt();
    let basis = BasisSpec::new(BasisKind::Fourier, 4, R_E - 3.5 * s, R_E + 5.0 * s);
    (basis, PotentialSpec::Morse { d, a, r_e: R_E }, mass)
}

/// `H_αβ = ⟨φ_α| p²/2m + V |φ_β⟩` with analytic kinetic energy and a composite
/// trapezoid rule for the potential.
pub fn build_1d_hamiltonian(basis: &BasisSpec, pot: &PotentialSpec, mass: f64) -> Result<SymMatrix> {
    basis.validate()?;
    pot.validate()?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("mass must be positive"));
    }
    let b = basis.size();
    let intervals = basis.quadrature_points;
    let step = basis.length() / intervals as f64;

    let mut weights_v = Vec::with_capacity(intervals + 1);
    let mut phi = vec![Vec::with_capacity(intervals + 1); b];
    for t in 0..=intervals {
        let x = if t == intervals {
            basis.domain[1]
        } else {
            basis.domain[0] + t as f64 * step
        };
        let w = if t == 0 || t == intervals { 0.5 * step } else { step };
        weights_v.push(w * pot.value(x, mass)?);
        for (idx, col) in phi.iter_mut().enumerate() {
            col.push(basis.eval(idx, x));
        }
    }

    Ok(SymMatrix::from_upper_fn(b, |i, j| {
        let v: f64 = weights_v
            .iter()
            .zip(&phi[i])
            .zip(&phi[j])
            .map(|((w, a), c)| w * a * c)
            .sum();
        if i == j {
            v + basis.kinetic(i, mass)
        } else {
            v
        }
    }))
}

/// `H = Σ_i 1 ⊗ … ⊗ H_i ⊗ … ⊗ 1` on the B^d direct-product basis. The
/// composite index treats dimension 0 as most significant, matching the qubit
/// map `i = KB(α−1) + K(β−1) + k`.
///
/// Fails when `B^d · qubits_per_coeff` exceeds `spec.variable_cap`.
pub fn build_product_hamiltonian(spec: &ProblemSpec, qubits_per_coeff: usize) -> Result<SymMatrix> {
    spec.validate()?;
    let b = spec.basis_size();
    let d = spec.d();
    let c = spec.n_coefficients();
    let n_vars = c.saturating_mul(qubits_per_coeff);
    if n_vars > spec.variable_cap {
        return Err(Error::TooLarge(format!(
            "B^d·K = {b}^{d}·{qubits_per_coeff} = {n_vars} exceeds the variable cap {}",
            spec.variable_cap
        )));
    }
    let factors = spec
        .dims
        .iter()
        .map(|dim| build_1d_hamiltonian(&dim.basis, &dim.potential, dim.mass))
        .collect::<Result<Vec<_>>>()?;
    if d == 1 {
        return Ok(factors.into_iter().next().unwrap());
    }

    let digits = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; d];
        for slot in out.iter_mut().rev() {
            *slot = idx % b;
            idx /= b;
        }
        out
    };
    let all_digits: Vec<Vec<usize>> = (0..c).map(digits).collect();
    Ok(SymMatrix::from_upper_fn(c, |i, j| {
        let (a, bb) = (&all_digits[i], &all_digits[j]);
        let differing: Vec<usize> = (0..d).filter(|&k| a[k] != bb[k]).collect();
        match differing.as_slice() {
            [] => (0..d).map(|k| factors[k].get(a[k], a[k])).sum(),
            [k] => factors[*k].get(a[*k], bb[*k]),
            _ => 0.0,
        }
    }))
}
