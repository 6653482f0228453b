//! Laplacian eigenfunctions on the flat torus ℝ²/ℤ².
//!
//! Every eigenfunction with eigenvalue 4π²E is a combination of modes
//! `sin(2π n·x + θ)` with `n₁² + n₂² = E`. Two families are provided:
//!
//! * the separable product `2cos(2πn₁x₁)cos(2πn₂x₂)`, whose Neumann domains
//!   are known in closed form;
//! * arithmetic random waves with i.i.d. standard Gaussian coefficients.
//!
//! The integer `E` is called the *energy*; the Laplace eigenvalue is
//! `lambda = 4π²E`. Both are reported everywhere.
//!
//! # Random numbers
//!
//! Coefficients come from ChaCha8 seeded with `seed_from_u64(seed)`. Each
//! uniform is `(next_u64() >> 11)·2⁻⁵³`, and normals are produced in pairs
//! by Box–Muller `(√(−2 ln(1−u₁)) cos 2πu₂, √(−2 ln(1−u₁)) sin 2πu₂)`.
//! Coefficients are drawn first, in lattice order, then the phase
//! θ = 2π·u. The stream is platform independent.

use std::f64::consts::{PI, TAU};

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::export::{self, Table};
use crate::{par, Error, Result};

/// A wave vector (n₁, n₂) ∈ ℤ².
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeMode {
    pub n1: i64,
    pub n2: i64,
}

impl LatticeMode {
    pub fn new(n1: i64, n2: i64) -> Self {
        Self { n1, n2 }
    }

    pub fn energy(&self) -> i64 {
        self.n1 * self.n1 + self.n2 * self.n2
    }
}

/// All integer solutions of n₁² + n₂² = E in lexicographic order.
pub fn enumerate_lattice(energy: u64) -> Vec<LatticeMode> {
    let e = energy as i64;
    let mut out = Vec::new();
    let mut r = 0i64;
    while (r + 1) * (r + 1) <= e {
        r += 1;
    }
    for n1 in -r..=r {
        let rest = e - n1 * n1;
        if rest < 0 {
            continue;
        }
        let mut n2 = (rest as f64).sqrt().round() as i64;
        while n2 * n2 > rest {
            n2 -= 1;
        }
        while (n2 + 1) * (n2 + 1) <= rest {
            n2 += 1;
        }
        if n2 * n2 == rest {
            if n2 == 0 {
                out.push(LatticeMode::new(n1, 0));
            } else {
                out.push(LatticeMode::new(n1, -n2));
                out.push(LatticeMode::new(n1, n2));
            }
        }
    }
    out
}

/// One representative of each ±n pair (the lexicographically larger one).
///
/// Because `sin(2π n·x + θ)` and `sin(−2π n·x + θ)` span the same real
/// space only up to the phase, this is the number of independent real
/// directions modulo the sign symmetry of the lattice.
pub fn half_lattice(energy: u64) -> Vec<LatticeMode> {
    enumerate_lattice(energy)
        .into_iter()
        .filter(|m| *m > LatticeMode::new(-m.n1, -m.n2))
        .collect()
}

/// Parameters of an arithmetic random wave Σ aₙ sin(2π n·x + θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub energy: u64,
    pub modes: Vec<LatticeMode>,
    pub coefficients: Vec<f64>,
    pub phase: f64,
    pub seed: u64,
}

/// Uniform in [0, 1) from the top 53 bits of a 64-bit draw.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl WaveSpec {
    /// Builds a wave from explicit modes and coefficients, checking them.
    pub fn new(energy: u64, modes: Vec<LatticeMode>, coefficients: Vec<f64>, phase: f64, seed: u64) -> Result<Self> {
        if energy == 0 {
            return Err(Error::InvalidInput("energy must be positive".into()));
        }
        if modes.is_empty() {
            return Err(Error::InvalidInput("mode list is empty".into()));
        }
        if modes.len() != coefficients.len() {
            return Err(Error::InvalidInput(format!(
                "{} modes but {} coefficients",
                modes.len(),
                coefficients.len()
            )));
        }
        if let Some(m) = modes.iter().find(|m| m.energy() != energy as i64) {
            return Err(Error::InvalidInput(format!(
                "mode ({}, {}) does not satisfy n1^2 + n2^2 = {energy}",
                m.n1, m.n2
            )));
        }
        if !phase.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient or phase".into()));
        }
        Ok(Self { energy, modes, coefficients, phase: phase.rem_euclid(TAU), seed })
    }

    /// Draws i.i.d. standard Gaussian coefficients over the full lattice
    /// circle and a uniform phase, deterministically from `seed`.
    pub fn gaussian(energy: u64, seed: u64) -> Result<Self> {
        let modes = enumerate_lattice(energy);
        if modes.is_empty() {
            return Err(Error::InvalidInput(format!("{energy} is not a sum of two squares")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coefficients = Vec::with_capacity(modes.len() + 1);
        while coefficients.len() < modes.len() {
            let u1 = uniform(&mut rng);
            let u2 = uniform(&mut rng);
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            coefficients.push(r * (TAU * u2).cos());
            coefficients.push(r * (TAU * u2).sin());
        }
        coefficients.truncate(modes.len());
        let phase = TAU * uniform(&mut rng);
        Self::new(energy, modes, coefficients, phase, seed)
    }

    pub fn lambda(&self) -> f64 {
        4.0 * PI * PI * self.energy as f64
    }

    /// Largest |nᵢ| over all modes.
    pub fn max_frequency(&self) -> u64 {
        self.modes.iter().map(|m| m.n1.unsigned_abs().max(m.n2.unsigned_abs())).max().unwrap_or(0)
    }
}

/// One term a·sin(k·x + φ) with k = 2πn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub amplitude: f64,
    pub n: LatticeMode,
    pub phase: f64,
}

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

/// Closed-form eigenfunction on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Eigenfunction {
    /// 2cos(2πn₁x₁)cos(2πn₂x₂).
    Separable { n1: u32, n2: u32 },
    /// Σ aₙ sin(2π n·x + θ).
    PlaneWaves { terms: Vec<PlaneWave> },
}

/// 2π·frac(n·x): the phase reduced before multiplying by 2π so periodicity
/// holds to rounding error.
#[inline]
fn reduced_phase(n: i64, x: f64) -> f64 {
    let t = n as f64 * x;
    TAU * (t - t.floor())
}

impl Eigenfunction {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Self::Separable { n1, n2 } => {
                2.0 * reduced_phase(*n1 as i64, x[0]).cos() * reduced_phase(*n2 as i64, x[1]).cos()
            }
            Self::PlaneWaves { terms } => terms
                .iter()
                .map(|t| t.amplitude * (reduced_phase(t.n.n1, x[0]) + reduced_phase(t.n.n2, x[1]) + t.phase).sin())
                .sum(),
        }
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            Self::Separable { n1, n2 } => {
                let (s1, c1) = reduced_phase(*n1 as i64, x[0]).sin_cos();
                let (s2, c2) = reduced_phase(*n2 as i64, x[1]).sin_cos();
                let k1 = TAU * *n1 as f64;
                let k2 = TAU * *n2 as f64;
                [-2.0 * k1 * s1 * c2, -2.0 * k2 * c1 * s2]
            }
            Self::PlaneWaves { terms } => {
                let mut g = [0.0, 0.0];
                for t in terms {
                    let c = t.amplitude * (reduced_phase(t.n.n1, x[0]) + reduced_phase(t.n.n2, x[1]) + t.phase).cos();
                    g[0] += c * TAU * t.n.n1 as f64;
                    g[1] += c * TAU * t.n.n2 as f64;
                }
                g
            }
        }
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        match self {
            Self::Separable { n1, n2 } => {
                let (s1, c1) = reduced_phase(*n1 as i64, x[0]).sin_cos();
                let (s2, c2) = reduced_phase(*n2 as i64, x[1]).sin_cos();
                let k1 = TAU * *n1 as f64;
                let k2 = TAU * *n2 as f64;
                Jet {
                    value: 2.0 * c1 * c2,
                    gradient: [-2.0 * k1 * s1 * c2, -2.0 * k2 * c1 * s2],
                    hessian: [
                        [-2.0 * k1 * k1 * c1 * c2, 2.0 * k1 * k2 * s1 * s2],
                        [2.0 * k1 * k2 * s1 * s2, -2.0 * k2 * k2 * c1 * c2],
                    ],
                }
            }
            Self::PlaneWaves { terms } => {
                let mut j = Jet { value: 0.0, gradient: [0.0; 2], hessian: [[0.0; 2]; 2] };
                for t in terms {
                    let (s, c) = (reduced_phase(t.n.n1, x[0]) + reduced_phase(t.n.n2, x[1]) + t.phase).sin_cos();
                    let k = [TAU * t.n.n1 as f64, TAU * t.n.n2 as f64];
                    j.value += t.amplitude * s;
                    for a in 0..2 {
                        j.gradient[a] += t.amplitude * c * k[a];
                        for b in 0..2 {
                            j.hessian[a][b] -= t.amplitude * s * k[a] * k[b];
                        }
                    }
                }
                j
            }
        }
    }

    pub fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.jet(x).hessian
    }

    /// Size of the rounding noise in evaluated gradients: the phase of a
    /// mode with wave vector n carries an absolute error of roughly
    /// 2π(|n₁|+|n₂|)·ε, amplified by k and by the coefficient norm.
    pub fn gradient_noise_floor(&self) -> f64 {
        let (norm, k, spread) = match self {
            Self::Separable { n1, n2 } => {
                let k = std::f64::consts::TAU * ((*n1 as f64).powi(2) + (*n2 as f64).powi(2)).sqrt();
                (2.0, k, (n1 + n2) as f64)
            }
            Self::PlaneWaves { terms } => {
                let norm = terms.iter().map(|t| t.amplitude * t.amplitude).sum::<f64>().sqrt();
                let k = terms.first().map_or(0.0, |t| std::f64::consts::TAU * (t.n.energy() as f64).sqrt());
                let spread = terms.iter().map(|t| (t.n.n1.abs() + t.n.n2.abs()) as f64).fold(0.0, f64::max);
                (norm, k, spread)
            }
        };
        f64::EPSILON * k * norm * std::f64::consts::TAU * spread.max(1.0)
    }
}

/// An eigenfunction sampled on the N×N grid {(i/N, j/N)} together with its
/// closed-form evaluator.
///
/// `values[i * n + j]` is the value at `(i/N, j/N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub n: usize,
    pub values: Vec<f64>,
    pub energy: u64,
    pub lambda: f64,
    pub seed: Option<u64>,
    pub evaluator: Eigenfunction,
}

fn check_resolution(n: usize, max_frequency: u64) -> Result<()> {
    let required = (8 * max_frequency as usize).max(8);
    if n < required {
        return Err(Error::Resolution { n, required });
    }
    Ok(())
}

fn sample(evaluator: &Eigenfunction, n: usize) -> Vec<f64> {
    let rows = par::map_range(n, |i| {
        (0..n).map(|j| evaluator.value([i as f64 / n as f64, j as f64 / n as f64])).collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

/// Samples the random wave described by `spec` on an N×N grid.
pub fn sample_random_wave(spec: &WaveSpec, n: usize) -> Result<ScalarField> {
    check_resolution(n, spec.max_frequency())?;
    let terms = spec
        .modes
        .iter()
        .zip(&spec.coefficients)
        .map(|(m, a)| PlaneWave { amplitude: *a, n: *m, phase: spec.phase })
        .collect();
    let evaluator = Eigenfunction::PlaneWaves { terms };
    Ok(ScalarField {
        n,
        values: sample(&evaluator, n),
        energy: spec.energy,
        lambda: spec.lambda(),
        seed: Some(spec.seed),
        evaluator,
    })
}

/// Samples 2cos(2πn₁x₁)cos(2πn₂x₂) on an N×N grid.
pub fn sample_separable(n1: u32, n2: u32, n: usize) -> Result<ScalarField> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidInput("separable field needs n1, n2 >= 1".into()));
    }
    check_resolution(n, n1.max(n2) as u64)?;
    let evaluator = Eigenfunction::Separable { n1, n2 };
    let energy = (n1 as u64).pow(2) + (n2 as u64).pow(2);
    Ok(ScalarField {
        n,
        values: sample(&evaluator, n),
        energy,
        lambda: 4.0 * PI * PI * energy as f64,
        seed: None,
        evaluator,
    })
}

impl ScalarField {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[(i % self.n) * self.n + (j % self.n)]
    }

    /// max |ψ| over the grid.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Wave number k = √λ.
    pub fn wavenumber(&self) -> f64 {
        self.lambda.sqrt()
    }

    /// Periodic 5-point Laplacian of the samples at node (i, j).
    pub fn discrete_laplacian(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        let h2 = (n as f64).powi(2);
        let c = self.value_at(i, j);
        (self.value_at(i + 1, j) + self.value_at(i + n - 1, j) + self.value_at(i, j + 1) + self.value_at(i, j + n - 1)
            - 4.0 * c)
            * h2
    }

    /// CSV dump: metadata, then `N,lambda,seed` with its value line, then
    /// `i,j,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# energy: {}\n", self.energy));
        out.push_str(&format!(
            "# evaluator: {}\n",
            match &self.evaluator {
                Eigenfunction::Separable { n1, n2 } => format!("separable n1={n1} n2={n2}"),
                Eigenfunction::PlaneWaves { terms } => format!("plane waves ({} terms)", terms.len()),
            }
        ));
        out.push_str("N,lambda,seed\n");
        out.push_str(&format!(
            "{},{},{}\n",
            self.n,
            export::fmt_f64(self.lambda),
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        ));
        let mut t = Table::new(&["i", "j", "value"]);
        for i in 0..self.n {
            for j in 0..self.n {
                t.push(vec![i.to_string(), j.to_string(), export::fmt_f64(self.value_at(i, j))]);
            }
        }
        out.push_str(&t.to_string());
        out
    }
}

/// A field dump read back from CSV (samples only; no evaluator).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub n: usize,
    pub lambda: f64,
    pub seed: Option<u64>,
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = export::data_lines(text);
        let bad = |m: &str| Error::Parse(m.to_string());
        if lines.next().map(str::trim) != Some("N,lambda,seed") {
            return Err(bad("missing N,lambda,seed header"));
        }
        let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing metadata row"))?.split(',').collect();
        if meta.len() != 3 {
            return Err(bad("metadata row needs 3 fields"));
        }
        let n: usize = meta[0].trim().parse().map_err(|_| bad("bad N"))?;
        let lambda = export::parse_f64(meta[1])?;
        let seed = match meta[2].trim() {
            "" => None,
            s => Some(s.parse::<u64>().map_err(|_| bad("bad seed"))?),
        };
        if lines.next().map(str::trim) != Some("i,j,value") {
            return Err(bad("missing i,j,value header"));
        }
        let mut values = vec![f64::NAN; n * n];
        let mut count = 0;
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad("sample row needs 3 fields"));
            }
            let i: usize = f[0].trim().parse().map_err(|_| bad("bad i"))?;
            let j: usize = f[1].trim().parse().map_err(|_| bad("bad j"))?;
            if i >= n || j >= n {
                return Err(bad("index out of range"));
            }
            values[i * n + j] = export::parse_f64(f[2])?;
            count += 1;
        }
        if count != n * n {
            return Err(bad("wrong number of sample rows"));
        }
        Ok(Self { n, lambda, seed, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lattices() {
        let e1 = enumerate_lattice(1);
        assert_eq!(
            e1,
            vec![LatticeMode::new(-1, 0), LatticeMode::new(0, -1), LatticeMode::new(0, 1), LatticeMode::new(1, 0)]
        );
        assert!(enumerate_lattice(3).is_empty());
        assert_eq!(enumerate_lattice(65).len(), 16);
        assert_eq!(enumerate_lattice(25).len(), 12);
        assert_eq!(half_lattice(1).len(), 2);
    }

    #[test]
    fn separable_examples() {
        let f = Eigenfunction::Separable { n1: 1, n2: 1 };
        assert_eq!(f.value([0.0, 0.0]), 2.0);
        let g = f.gradient([0.125, 0.0]);
        assert!((g[0] + 2.0 * PI * 2f64.sqrt()).abs() < 1e-13);
        assert!(g[1].abs() < 1e-15);
        assert!((sample_separable(1, 2, 64).unwrap().lambda - 20.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn single_mode_is_a_sine() {
        let spec = WaveSpec::new(1, vec![LatticeMode::new(1, 0)], vec![1.0], 0.0, 0).unwrap();
        let field = sample_random_wave(&spec, 16).unwrap();
        for i in 0..16 {
            let expected = (TAU * i as f64 / 16.0).sin();
            assert!((field.value_at(i, 5) - expected).abs() < 1e-15);
        }
        assert_eq!(field.lambda, 4.0 * PI * PI);
    }

    #[test]
    fn resolution_guard() {
        let spec = WaveSpec::gaussian(65, 1).unwrap();
        assert!(matches!(sample_random_wave(&spec, 32), Err(Error::Resolution { required: 64, .. })));
        assert!(sample_separable(1, 1, 4).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(WaveSpec::new(5, vec![LatticeMode::new(1, 1)], vec![1.0], 0.0, 0).is_err());
        assert!(WaveSpec::new(5, vec![], vec![], 0.0, 0).is_err());
        assert!(WaveSpec::gaussian(3, 0).is_err());
    }

    #[test]
    fn jet_matches_finite_differences() {
        let spec = WaveSpec::gaussian(65, 11).unwrap();
        let terms = spec
            .modes
            .iter()
            .zip(&spec.coefficients)
            .map(|(m, a)| PlaneWave { amplitude: *a, n: *m, phase: spec.phase })
            .collect();
        for f in [Eigenfunction::PlaneWaves { terms }, Eigenfunction::Separable { n1: 2, n2: 3 }] {
            let x = [0.3141, 0.2718];
            let j = f.jet(x);
            let h = 1e-6;
            for a in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
                assert!((fd - j.gradient[a]).abs() < 1e-6 * (1.0 + fd.abs()));
                let gp = f.gradient(xp);
                let gm = f.gradient(xm);
                for b in 0..2 {
                    let fd2 = (gp[b] - gm[b]) / (2.0 * h);
                    assert!((fd2 - j.hessian[a][b]).abs() < 1e-5 * (1.0 + fd2.abs()));
                }
            }
        }
    }
}
