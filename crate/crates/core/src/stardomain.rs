//! Closed-form analysis of the star-like Neumann domain Ω_{a,b} of the
//! separable eigenfunction, and of the reference sectors S_{α,R}.
//!
//! In coordinates centred on the domain, the upper boundary is
//! γ(x) = (2b/π)·arcsin(cos(πx/2a)^{(a/b)²}) for |x| ≤ a, joining the
//! right-angle wedge at (0, b) to the cusp at (a, 0). Λ_{a,b} is the part of
//! the domain in the first quadrant. For |x| > a the boundary is extended by
//! zero, which is the curve γ̆ used by the isoperimetric analysis.
//!
//! Evaluation is arranged to stay accurate in the two delicate regimes.
//! Near the wedge the argument of arcsin is close to one, so arcsin is
//! evaluated as atan2 with a cancellation-free complement. In the cusp,
//! cos(·)^{(a/b)²} underflows for large exponents, so a log-space variant
//! is provided.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::export::{fmt_f64, Table};
use crate::quad;
use crate::special::{bessel_j0, constants};
use crate::{Error, Result};

/// Half-widths (a, b) of a star-like domain, with b ≤ a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarParams {
    pub a: f64,
    pub b: f64,
}

impl StarParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::InvalidInput(format!("a and b must be positive, got a={a}, b={b}")));
        }
        if b > a {
            return Err(Error::InvalidInput(format!(
                "b={b} exceeds a={a}; swap them (the domain is merely rotated)"
            )));
        }
        Ok(Self { a, b })
    }

    /// Parameters with the larger half-width first.
    pub fn normalized(a: f64, b: f64) -> Result<Self> {
        Self::new(a.max(b), a.min(b))
    }

    /// The star domain of 2cos(2πn₁x₁)cos(2πn₂x₂): a = 1/(4n₁), b = 1/(4n₂),
    /// rotated if necessary so that b ≤ a.
    pub fn from_modes(n1: u32, n2: u32) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidInput("mode numbers must be positive".into()));
        }
        Self::normalized(0.25 / n1 as f64, 0.25 / n2 as f64)
    }

    /// Cusp exponent (a/b)².
    pub fn exponent(&self) -> f64 {
        (self.a / self.b).powi(2)
    }

    pub fn ratio(&self) -> f64 {
        self.b / self.a
    }

    pub fn scaled(&self, g: f64) -> Self {
        Self { a: g * self.a, b: g * self.b }
    }
}

/// An open circular sector of angle `alpha` and radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorParams {
    pub alpha: f64,
    pub radius: f64,
}

impl SectorParams {
    pub fn new(alpha: f64, radius: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0 * PI && radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid sector alpha={alpha}, R={radius}")));
        }
        Ok(Self { alpha, radius })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.alpha * self.radius * self.radius
    }
}

// ln cos(πx/2a)·(a/b)², computed without cancellation near x = 0.
fn log_cos_power(p: &StarParams, x: f64) -> f64 {
    let theta = FRAC_PI_2 * x.abs() / p.a;
    let s = (0.5 * theta).sin();
    p.exponent() * (-2.0 * s * s).ln_1p()
}

/// γ_{a,b}(x); zero for |x| ≥ a.
pub fn gamma_boundary(p: &StarParams, x: f64) -> f64 {
    if x.abs() >= p.a {
        return 0.0;
    }
    let l = log_cos_power(p, x);
    let c = l.exp();
    let s = (-(2.0 * l).exp_m1()).max(0.0).sqrt();
    2.0 * p.b / PI * c.atan2(s)
}

/// γ′_{a,b}(x); equals −1 at x = 0⁺ and 0 for |x| ≥ a.
pub fn gamma_derivative(p: &StarParams, x: f64) -> f64 {
    let ax = x.abs();
    if ax >= p.a {
        return 0.0;
    }
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    if ax == 0.0 {
        return -sign;
    }
    let theta = FRAC_PI_2 * ax / p.a;
    let l = log_cos_power(p, ax);
    let c = l.exp();
    if c == 0.0 {
        return 0.0;
    }
    let s = (-(2.0 * l).exp_m1()).sqrt();
    sign * (-(2.0 * p.b / PI) * c * p.exponent() * theta.tan() * (FRAC_PI_2 / p.a) / s)
}

/// ln γ_{a,b}(x), finite even where γ itself underflows.
pub fn gamma_log(p: &StarParams, x: f64) -> f64 {
    if x.abs() >= p.a {
        return f64::NEG_INFINITY;
    }
    let l = log_cos_power(p, x);
    let log_asin = if l < -30.0 {
        // arcsin(c) = c(1 + c²/6 + …) with c < 1e-13.
        l
    } else {
        let c = l.exp();
        c.atan2((-(2.0 * l).exp_m1()).max(0.0).sqrt()).ln()
    };
    (2.0 * p.b / PI).ln() + log_asin
}

/// The gradient-flow line (2b/π)·arcsin(sin g · cos(πx/2a)^{(a/b)²}); g = ±π/2
/// gives ±γ and g = 0 the symmetry axis.
pub fn flow_line(p: &StarParams, g: f64, x: f64) -> f64 {
    if g.sin().abs() == 1.0 {
        return g.sin() * gamma_boundary(p, x);
    }
    if x.abs() >= p.a {
        return 0.0;
    }
    2.0 * p.b / PI * (g.sin() * log_cos_power(p, x).exp()).asin()
}

/// λ_{a,b} = (π²/4)(a⁻² + b⁻²).
pub fn lambda_ab(p: &StarParams) -> f64 {
    PI * PI / 4.0 * (p.a.powi(-2) + p.b.powi(-2))
}

// Breakpoints that let the adaptive rule see the Gaussian core of γ when
// b ≪ a.
fn breakpoints(p: &StarParams) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut x = p.b;
    while x < p.a && x <= 16.0 * p.b {
        pts.push(x);
        x *= 2.0;
    }
    pts.push(p.a);
    pts
}

fn integrate_over_quarter<F: Fn(f64) -> f64>(p: &StarParams, f: F, rel: f64) -> f64 {
    let pts = breakpoints(p);
    pts.windows(2).map(|w| quad::integrate(&f, w[0], w[1], 0.0, rel).value).sum()
}

/// |Λ_{a,b}| = ∫₀ᵃ γ_{a,b}(x) dx.
pub fn quarter_area(p: &StarParams) -> f64 {
    integrate_over_quarter(p, |x| gamma_boundary(p, x), 1e-13)
}

/// ∫₀^x γ_{a,b}(s) ds for 0 ≤ x ≤ a.
pub fn partial_area(p: &StarParams, x: f64) -> f64 {
    let x = x.clamp(0.0, p.a);
    let pts: Vec<f64> = breakpoints(p).into_iter().filter(|&t| t < x).chain(std::iter::once(x)).collect();
    pts.windows(2)
        .map(|w| quad::integrate(|s| gamma_boundary(p, s), w[0], w[1], 0.0, 1e-13).value)
        .sum()
}

/// Length of the graph of γ over [0, a].
pub fn quarter_arc_length(p: &StarParams) -> f64 {
    integrate_over_quarter(p, |x| gamma_derivative(p, x).hypot(1.0), 1e-13)
}

/// Perimeter of Ω_{a,b}: four copies of the quarter arc.
pub fn star_perimeter(p: &StarParams) -> f64 {
    4.0 * quarter_arc_length(p)
}

/// Fitted local behaviour of γ at the wedge and at the cusp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    /// Least-squares slope of γ on [0, 10⁻³·b].
    pub wedge_slope: f64,
    /// Log-log slope of γ(a − t) for t ∈ [10⁻⁴a, 10⁻³a].
    pub cusp_exponent: f64,
    /// (a/b)².
    pub expected_exponent: f64,
    /// RMS residual of the log-log fit.
    pub cusp_residual: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - icept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icept, rms)
}

/// Fits the wedge slope at (0, b) and the cusp exponent at (a, 0).
pub fn boundary_asymptotics_check(p: &StarParams) -> Result<AsymptoticsReport> {
    let w = 1e-3 * p.b;
    let xs: Vec<f64> = (0..=100).map(|i| w * i as f64 / 100.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| gamma_boundary(p, x)).collect();
    let (wedge_slope, _, wedge_rms) = linear_fit(&xs, &ys);

    let ts: Vec<f64> = (0..=100).map(|i| 1e-4 * p.a * 10f64.powf(i as f64 / 100.0)).collect();
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ts.iter().map(|&t| gamma_log(p, p.a - t)).collect();
    if ly.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("cusp profile is not finite in log space".into()));
    }
    let (cusp_exponent, _, cusp_residual) = linear_fit(&lx, &ly);
    if wedge_rms > 1e-6 * p.b || cusp_residual > 1e-3 * p.exponent().max(1.0) {
        return Err(Error::Fit(format!(
            "residuals too large (wedge {wedge_rms:.3e}, cusp {cusp_residual:.3e})"
        )));
    }
    Ok(AsymptoticsReport { wedge_slope, cusp_exponent, expected_exponent: p.exponent(), cusp_residual })
}

/// R_b(x) in cos(πx/2a)^{(a/b)²} = e^{−(π²/8)(x/b)²}(1 − R_b(x)).
pub fn cos_power_remainder(p: &StarParams, x: f64) -> f64 {
    -(log_cos_power(p, x) + PI * PI / 8.0 * (x / p.b).powi(2)).exp_m1()
}

/// Ground state of the Dirichlet-rim, Neumann-sides sector problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGroundState {
    pub sector: SectorParams,
    /// j₀²/R².
    pub lambda: f64,
}

impl SectorGroundState {
    /// Radial profile J₀(r·j₀/R).
    pub fn profile(&self, r: f64) -> f64 {
        bessel_j0(r * constants().j0 / self.sector.radius)
    }
}

pub fn sector_ground_state(s: &SectorParams) -> SectorGroundState {
    let j0 = constants().j0;
    SectorGroundState { sector: *s, lambda: j0 * j0 / (s.radius * s.radius) }
}

/// The sector of opening `alpha` with the same area as Λ_{a,b}.
pub fn reference_sector(p: &StarParams, alpha: f64) -> Result<SectorParams> {
    reference_sector_for_area(quarter_area(p), alpha)
}

pub fn reference_sector_for_area(area: f64, alpha: f64) -> Result<SectorParams> {
    if !(alpha > 0.0 && alpha <= 2.0 * PI) {
        return Err(Error::InvalidInput(format!("alpha={alpha} outside (0, 2π]")));
    }
    SectorParams::new(alpha, (2.0 * area / alpha).sqrt())
}

/// Admissibility of a sector comparison for Ω_{a,b}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub feasible: bool,
    /// Grid angle with the largest margin.
    pub alpha_best: f64,
    /// Smallest feasible grid angle, if any.
    pub alpha_first_feasible: Option<f64>,
    /// Largest value of λ_{α,R(α)} − λ_{a,b} − ε₀ over the grid.
    pub margin: f64,
}

/// Scans 64 interior angles of (α_min, π/4) for a sector whose Dirichlet
/// ground state lies above λ_{a,b} by at least ε₀ = 10⁻⁶·λ_{a,b}.
pub fn admissibility_window(p: &StarParams) -> Admissibility {
    let k = constants();
    let lam = lambda_ab(p);
    let eps0 = 1e-6 * lam;
    let area = quarter_area(p);
    let mut best = (f64::NEG_INFINITY, k.alpha_min);
    let mut first = None;
    for i in 1..=64 {
        let alpha = k.alpha_min + (k.alpha_max - k.alpha_min) * i as f64 / 65.0;
        let lam_sector = k.j0 * k.j0 * alpha / (2.0 * area);
        let margin = lam_sector - lam - eps0;
        if margin > 0.0 && first.is_none() {
            first = Some(alpha);
        }
        if margin > best.0 {
            best = (margin, alpha);
        }
    }
    Admissibility {
        alpha_lo: k.alpha_min,
        alpha_hi: k.alpha_max,
        feasible: best.0 > 0.0,
        alpha_best: best.1,
        alpha_first_feasible: first,
        margin: best.0,
    }
}

/// ρ values of the star domain and of the neighbouring lens domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPair {
    pub rho_star: f64,
    pub rho_lens: f64,
    pub area_star: f64,
    pub area_lens: f64,
    pub perimeter: f64,
    /// rho_star ≤ rho_lens, with equality only for a = b.
    pub star_not_above_lens: bool,
}

pub fn rho_star_lens(p: &StarParams) -> RhoPair {
    let q = quarter_area(p);
    let perimeter = star_perimeter(p);
    let k = lambda_ab(p).sqrt();
    let area_star = 4.0 * q;
    let area_lens = 4.0 * p.a * p.b - 4.0 * q;
    let rho_star = area_star * k / perimeter;
    let rho_lens = area_lens * k / perimeter;
    RhoPair {
        rho_star,
        rho_lens,
        area_star,
        area_lens,
        perimeter,
        star_not_above_lens: rho_star <= rho_lens * (1.0 + 1e-12),
    }
}

/// One row of the b/a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: StarParams,
    pub rho: RhoPair,
    pub admissibility: Admissibility,
}

/// Evaluates ρ and admissibility for a = 1 and each b in `ratios`.
pub fn ratio_sweep(ratios: &[f64]) -> Result<Vec<SweepRow>> {
    ratios
        .iter()
        .map(|&r| {
            let params = StarParams::new(1.0, r)?;
            Ok(SweepRow { params, rho: rho_star_lens(&params), admissibility: admissibility_window(&params) })
        })
        .collect()
}

/// CSV `a,b,ratio,rho_star,rho_lens,feasible,alpha_best,margin`.
pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&["a", "b", "ratio", "rho_star", "rho_lens", "feasible", "alpha_best", "margin"]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.params.a),
            fmt_f64(r.params.b),
            fmt_f64(r.params.ratio()),
            fmt_f64(r.rho.rho_star),
            fmt_f64(r.rho.rho_lens),
            r.admissibility.feasible.to_string(),
            fmt_f64(r.admissibility.alpha_best),
            fmt_f64(r.admissibility.margin),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_endpoints() {
        let p = StarParams::new(1.0, 0.3).unwrap();
        assert_eq!(gamma_boundary(&p, 0.0), 0.3);
        assert_eq!(gamma_boundary(&p, 1.0), 0.0);
        assert!(gamma_boundary(&p, 0.999_999).abs() < 1e-30);
    }

    #[test]
    fn diamond_is_linear() {
        let p = StarParams::new(0.7, 0.7).unwrap();
        for i in 0..=20 {
            let x = 0.7 * i as f64 / 20.0;
            assert!((gamma_boundary(&p, x) - (0.7 - x)).abs() < 1e-14);
            if i < 20 {
                assert!((gamma_derivative(&p, x) + 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = StarParams::new(1.0, 0.2).unwrap();
        for x in [1e-4, 0.05, 0.2, 0.5, 0.8] {
            let h = 1e-7;
            let fd = (gamma_boundary(&p, x + h) - gamma_boundary(&p, x - h)) / (2.0 * h);
            assert!((fd - gamma_derivative(&p, x)).abs() < 1e-6, "x={x}");
        }
        assert_eq!(gamma_derivative(&p, 0.0), -1.0);
    }

    #[test]
    fn log_variant_agrees() {
        let p = StarParams::new(1.0, 0.25).unwrap();
        for x in [0.0, 0.3, 0.9] {
            assert!((gamma_log(&p, x) - gamma_boundary(&p, x).ln()).abs() < 1e-12);
        }
        let thin = StarParams::new(1.0, 0.01).unwrap();
        assert!(gamma_log(&thin, 0.9).is_finite());
    }

    #[test]
    fn remainder_reference_value() {
        let p = StarParams::new(1.0, 1.0).unwrap();
        // 1 − cos(π/4)e^{π²/32}, 30-digit reference
        assert!((cos_power_remainder(&p, 0.5) - 0.037_429_965_880_704_504_746_731_551_804).abs() < 1e-15);
    }

    #[test]
    fn lambda_examples() {
        assert!((lambda_ab(&StarParams::new(1.0, 1.0).unwrap()) - PI * PI / 2.0).abs() < 1e-14);
        assert!((lambda_ab(&StarParams::new(0.25, 0.25).unwrap()) - 8.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(StarParams::new(1.0, 2.0).is_err());
        assert!(StarParams::new(-1.0, 0.5).is_err());
        let p = StarParams::from_modes(2, 1).unwrap();
        assert_eq!((p.a, p.b), (0.25, 0.125));
    }

    #[test]
    fn sector_basics() {
        let s = reference_sector_for_area(1.0, 2.0).unwrap();
        assert!((s.radius - 1.0).abs() < 1e-15);
        let g = sector_ground_state(&s);
        assert!((g.lambda - 5.783_185_962_946_784).abs() < 1e-12);
        assert!(g.profile(1.0).abs() < 1e-14);
    }
}
