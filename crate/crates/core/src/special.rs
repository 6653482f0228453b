//! Bessel functions of the first kind (orders 0 and 1) and the two zeros
//! that drive every bound in the toolkit.
//!
//! The power series are used directly. They are accurate to about 1e-14 for
//! `|x| <= 8`, which covers every argument the toolkit needs (the zeros of
//! interest sit below 2.5). Larger arguments fall back to the Hankel
//! asymptotic expansion.

use std::sync::OnceLock;

use crate::quad;

const SERIES_LIMIT: f64 = 8.0;

/// J₀(x).
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x > SERIES_LIMIT {
        return hankel(0.0, x);
    }
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// J₁(x).
pub fn bessel_j1(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    if x > SERIES_LIMIT {
        return sign * hankel(1.0, x);
    }
    let q = -(x * x) / 4.0;
    let mut term = x / 2.0;
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sign * sum
}

/// J₁′(x) = J₀(x) − J₁(x)/x, with the limit ½ at the origin.
pub fn bessel_j1_prime(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 0.5 - 3.0 * x * x / 16.0;
    }
    bessel_j0(x) - bessel_j1(x) / x
}

// Leading terms of the Hankel expansion; only reached for x > 8 where four
// correction terms give ~1e-9.
fn hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    for k in 1..=8 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if k % 2 == 1 {
            q += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            p += if (k / 2) % 2 == 0 { term } else { -term };
        }
    }
    let chi = x - (0.5 * nu + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn newton<F: Fn(f64) -> (f64, f64)>(f: F, mut x: f64) -> f64 {
    for _ in 0..100 {
        let (v, d) = f(x);
        let step = v / d;
        x -= step;
        if step.abs() < 1e-15 * x.abs() {
            break;
        }
    }
    x
}

/// First positive zero of J₀.
pub fn first_zero_j0() -> f64 {
    // J₀′ = −J₁
    newton(|x| (bessel_j0(x), -bessel_j1(x)), 2.4)
}

/// First positive zero of J₁′.
pub fn first_zero_j1_prime() -> f64 {
    newton(
        |x| {
            let d = bessel_j1_prime(x);
            // Bessel's equation: J₁″ = −J₁′/x − (1 − 1/x²) J₁
            let dd = -d / x - (1.0 - 1.0 / (x * x)) * bessel_j1(x);
            (d, dd)
        },
        1.8,
    )
}

/// (4√2/π²)∫₀^∞ arcsin(e^{−x²}) dx, the limit of |Λ_{a,b}|/b² as b → 0.
pub fn gamma_area_constant() -> f64 {
    let integral = quad::integrate_semi_infinite(|x| (-x * x).exp().asin(), 0.0, 1e-14, 1e-14);
    4.0 * std::f64::consts::SQRT_2 / (std::f64::consts::PI.powi(2)) * integral.value
}

/// The numerical constants shared by the star-domain analysis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Constants {
    /// First zero of J₀.
    pub j0: f64,
    /// First zero of J₁′.
    pub j1p: f64,
    /// Asymptotic area constant of the quarter domain.
    pub gamma_area: f64,
    /// Smallest admissible sector opening, gamma_area·π²/(2 j0²).
    pub alpha_min: f64,
    /// Largest admissible sector opening, π/4.
    pub alpha_max: f64,
}

impl Constants {
    /// j₁′/2, the upper bound on ρ for domains with the ground state property.
    pub fn rho_bound_ground(&self) -> f64 {
        self.j1p / 2.0
    }

    /// j₁′/√2, the bound that holds for every Neumann domain.
    pub fn rho_bound_general(&self) -> f64 {
        self.j1p / std::f64::consts::SQRT_2
    }

    fn compute() -> Self {
        let j0 = first_zero_j0();
        let j1p = first_zero_j1_prime();
        let gamma_area = gamma_area_constant();
        Self {
            j0,
            j1p,
            gamma_area,
            alpha_min: gamma_area * std::f64::consts::PI.powi(2) / (2.0 * j0 * j0),
            alpha_max: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Process-wide constants, computed once on first use.
pub fn constants() -> &'static Constants {
    static CELL: OnceLock<Constants> = OnceLock::new();
    CELL.get_or_init(Constants::compute)
}
