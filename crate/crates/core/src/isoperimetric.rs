//! Isoperimetric and Cheeger functionals on the quarter domain Λ_{a,b}, and
//! the circular-arc sets that minimise the non-Neumann boundary length at
//! fixed area.
//!
//! Two families are provided.
//!
//! * [`arc_minimizer`] works in the extended domain Λ̆_{a,b} (Λ_{a,b} with
//!   the quadrant below h attached, so that the Neumann walls are v and
//!   γ̆_{a,b} = γ_{a,b} continued by zero). The minimiser is the part of a
//!   disk centred on the line of v whose boundary circle meets γ̆
//!   orthogonally.
//! * [`cheeger_set`] works in Λ_{a,b} itself, where h is part of the
//!   counted boundary. While the foot of the arc stays above h the set is
//!   the same as before. The last such set is the circle tangent to h at
//!   v∩h. Beyond it the set also runs along h, and its arc is tangent to h
//!   at the end of that segment and orthogonal to γ.
//!
//! For either family the geometry is explicit in the attachment abscissa
//! x_p of the point where the arc meets γ, so finding the set of a given
//! area reduces to a monotone scalar equation.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::export::{fmt_f64, Table};
use crate::stardomain::{gamma_boundary, gamma_derivative, partial_area, quarter_area, StarParams};
use crate::{par, quad, Error, Result};

/// F(A) = |∂ʰA|²/(2|A|).
pub fn f_functional(boundary_h_length: f64, area: f64) -> f64 {
    boundary_h_length * boundary_h_length / (2.0 * area)
}

/// C(A) = (F(A)/|∂ʰA|)²/4.
pub fn cheeger_functional(boundary_h_length: f64, area: f64) -> f64 {
    let f = f_functional(boundary_h_length, area);
    (f / boundary_h_length).powi(2) / 4.0
}

/// Which description of the curved wall to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WallModel {
    /// γ_{a,b} itself.
    #[default]
    Exact,
    /// (2b/π)·arcsin(exp(−π²x²/8b²)), the small-b limit of γ_{a,b}.
    Gaussian,
}

impl std::str::FromStr for WallModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::Parse(format!("unknown wall model '{other}'"))),
        }
    }
}

/// The curved Neumann wall, continued by zero past the cusp.
#[derive(Debug, Clone, Copy)]
struct Wall {
    p: StarParams,
    model: WallModel,
    area: f64,
}

impl Wall {
    fn new(p: StarParams, model: WallModel) -> Self {
        let area = match model {
            WallModel::Exact => quarter_area(&p),
            WallModel::Gaussian => gaussian_partial_area(&p, f64::INFINITY),
        };
        Self { p, model, area }
    }

    fn end(&self) -> f64 {
        match self.model {
            WallModel::Exact => self.p.a,
            WallModel::Gaussian => 40.0 * self.p.b,
        }
    }

    fn height(&self, x: f64) -> f64 {
        match self.model {
            WallModel::Exact => gamma_boundary(&self.p, x),
            WallModel::Gaussian => {
                let b = self.p.b;
                let q = (PI * x / b).powi(2) / 8.0;
                let u = (-q).exp();
                2.0 * b / PI * u.atan2((-(-2.0 * q).exp_m1()).max(0.0).sqrt())
            }
        }
    }

    /// Slope of the wall; −1 at the wedge.
    fn slope(&self, x: f64) -> f64 {
        match self.model {
            WallModel::Exact => gamma_derivative(&self.p, x),
            WallModel::Gaussian => {
                let b = self.p.b;
                let c = (PI / b).powi(2) / 8.0;
                let q = c * x * x;
                if q < 1e-8 {
                    // arcsin(e^{−q}) = π/2 − √(2q)(1 − q/12 + …)
                    return -(1.0 - q / 3.0);
                }
                let u = (-q).exp();
                if u == 0.0 {
                    return 0.0;
                }
                -(2.0 * b / PI) * 2.0 * c * x * u / (-(-2.0 * q).exp_m1()).sqrt()
            }
        }
    }

    /// ∫₀^x of the wall height.
    fn partial_area(&self, x: f64) -> f64 {
        match self.model {
            WallModel::Exact => partial_area(&self.p, x),
            WallModel::Gaussian => gaussian_partial_area(&self.p, x),
        }
    }
}

fn gaussian_partial_area(p: &StarParams, x: f64) -> f64 {
    let wall = Wall { p: *p, model: WallModel::Gaussian, area: 0.0 };
    let end = x.min(40.0 * p.b);
    let mut pts = vec![0.0];
    let mut t = p.b;
    while t < end {
        pts.push(t);
        t *= 2.0;
    }
    pts.push(end);
    pts.windows(2).map(|w| quad::integrate(|s| wall.height(s), w[0], w[1], 0.0, 1e-13).value).sum()
}

/// Which part of the family a set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Arc from v to the curved wall, centred on the line of v.
    Wedge,
    /// Segment of h followed by an arc tangent to h and orthogonal to γ.
    Floor,
}

/// A set bounded by the Neumann walls, at most one segment of h, and one
/// circular arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    pub params: StarParams,
    pub model: WallModel,
    pub branch: Branch,
    pub eta: f64,
    pub center: [f64; 2],
    pub radius: f64,
    /// Opening angle of the arc.
    pub phi: f64,
    /// Arc samples from the foot to the point on the curved wall.
    pub arc: Vec<[f64; 2]>,
    /// (foot of the arc, point on the curved wall). The foot lies on v for
    /// the wedge branch and on h for the floor branch.
    pub attach_points: ([f64; 2], [f64; 2]),
    /// Length of the counted segment of h (zero on the wedge branch).
    pub floor_length: f64,
    /// Deviation from a right angle at the curved wall, in radians.
    pub wall_residual: f64,
    /// Deviation from the prescribed contact at the foot, in radians.
    pub foot_residual: f64,
}

impl ArcSet {
    /// |∂ʰA|.
    pub fn boundary_h_length(&self) -> f64 {
        self.floor_length + self.radius * self.phi
    }

    pub fn f(&self) -> f64 {
        f_functional(self.boundary_h_length(), self.eta)
    }

    pub fn c(&self) -> f64 {
        cheeger_functional(self.boundary_h_length(), self.eta)
    }

    /// Closed polygon around the set with `n` samples on each curved piece,
    /// counterclockwise.
    pub fn closed_boundary(&self, n: usize) -> Vec<[f64; 2]> {
        let wall = Wall { p: self.params, model: self.model, area: 0.0 };
        let top = self.attach_points.1;
        let mut pts = Vec::with_capacity(2 * n + 4);
        match self.branch {
            Branch::Wedge => {
                // foot → arc → wall point → wall back to w → down v.
                pts.extend(arc_samples(self.center, self.radius, self.phi, n));
                for k in 1..n {
                    let x = top[0] * (1.0 - k as f64 / n as f64);
                    pts.push([x, wall.height(x)]);
                }
                pts.push([0.0, self.params.b]);
            }
            Branch::Floor => {
                pts.push([0.0, 0.0]);
                pts.extend(arc_samples(self.center, self.radius, self.phi, n));
                for k in 1..n {
                    let x = top[0] * (1.0 - k as f64 / n as f64);
                    pts.push([x, wall.height(x)]);
                }
                pts.push([0.0, self.params.b]);
            }
        }
        pts
    }
}

/// Points on the circle from straight below the centre, turning
/// counterclockwise by `phi`.
fn arc_samples(c: [f64; 2], r: f64, phi: f64, n: usize) -> Vec<[f64; 2]> {
    (0..=n)
        .map(|k| {
            let t = -FRAC_PI_2 + phi * k as f64 / n as f64;
            [c[0] + r * t.cos(), c[1] + r * t.sin()]
        })
        .collect()
}

/// Signed area of a closed polygon.
pub fn shoelace(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

// Geometry at attachment abscissa x on either branch.
#[derive(Debug, Clone, Copy)]
struct Shape {
    center: [f64; 2],
    radius: f64,
    phi: f64,
    floor: f64,
    area: f64,
    foot: [f64; 2],
    top: [f64; 2],
}

fn wedge_shape(w: &Wall, x: f64) -> Shape {
    let (g, s) = if x >= w.end() && w.model == WallModel::Exact { (0.0, 0.0) } else { (w.height(x), -w.slope(x)) };
    let c2 = g + x * s;
    let radius = x * s.hypot(1.0);
    let phi = 1.0f64.atan2(s);
    let area = w.partial_area(x) - c2 * x + 0.5 * x * x * s + 0.5 * radius * radius * phi;
    Shape { center: [0.0, c2], radius, phi, floor: 0.0, area, foot: [0.0, c2 - radius], top: [x, g] }
}

fn floor_shape(w: &Wall, x: f64) -> Shape {
    let (g, s) = (w.height(x), -w.slope(x));
    let d = g * (s.hypot(1.0) + s);
    let radius = d * s.hypot(1.0);
    let xh = x - d;
    let phi = 1.0f64.atan2(s);
    let area = w.partial_area(x) - radius * d + 0.5 * d * d * s + 0.5 * radius * radius * phi;
    Shape { center: [xh, radius], radius, phi, floor: xh, area, foot: [xh, 0.0], top: [x, g] }
}

fn build(w: &Wall, branch: Branch, sh: Shape, eta: f64) -> ArcSet {
    let n = 256;
    let arc = arc_samples(sh.center, sh.radius, sh.phi, n);
    // Right angle at the wall: the radius is tangent to the wall there.
    let (tx, ty) = (1.0, if sh.top[0] >= w.end() && w.model == WallModel::Exact { 0.0 } else { w.slope(sh.top[0]) });
    let (rx, ry) = (sh.top[0] - sh.center[0], sh.top[1] - sh.center[1]);
    let wall_residual = ((tx * ry - ty * rx) / (tx.hypot(ty) * rx.hypot(ry))).abs().asin();
    // At the foot: radius along v (wedge branch) or perpendicular to h
    // (floor branch). Both mean a vertical radius.
    let (fx, fy) = (sh.foot[0] - sh.center[0], sh.foot[1] - sh.center[1]);
    let foot_residual = fx.atan2(-fy).abs();
    ArcSet {
        params: w.p,
        model: w.model,
        branch,
        eta,
        center: sh.center,
        radius: sh.radius,
        phi: sh.phi,
        arc,
        attach_points: (sh.foot, sh.top),
        floor_length: sh.floor,
        wall_residual,
        foot_residual,
    }
}

// Solves area(x) = eta for x in [lo, hi] with area increasing.
fn solve_area<F: Fn(f64) -> f64>(area: F, eta: f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (mut flo, mut fhi) = (area(lo) - eta, area(hi) - eta);
    if !(flo <= 0.0 && fhi >= 0.0) {
        return None;
    }
    // Illinois-modified regula falsi, falling back to bisection.
    let mut side = 0i32;
    for _ in 0..200 {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = area(x) - eta;
        if fx == 0.0 || (hi - lo) <= 4.0 * f64::EPSILON * hi {
            return Some(x);
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if fx.abs() <= 1e-14 * eta {
            return Some(x);
        }
    }
    Some(0.5 * (lo + hi))
}

fn bracket_high<F: Fn(f64) -> f64>(area: F, eta: f64, start: f64, limit: f64) -> Option<f64> {
    let mut hi = start;
    while area(hi) < eta {
        if hi >= limit {
            return None;
        }
        hi = (2.0 * hi).min(limit);
    }
    Some(hi)
}

/// The area-`eta` minimiser of |∂ʰ| in Λ̆_{a,b}, using the exact γ_{a,b}.
pub fn arc_minimizer(p: &StarParams, eta: f64) -> Result<ArcSet> {
    arc_minimizer_with(p, eta, WallModel::Exact)
}

/// As [`arc_minimizer`], with a choice of wall model.
pub fn arc_minimizer_with(p: &StarParams, eta: f64, model: WallModel) -> Result<ArcSet> {
    let w = Wall::new(*p, model);
    if !(eta > 0.0 && eta < w.area) {
        return Err(Error::NoArcFound { eta });
    }
    let area = |x: f64| wedge_shape(&w, x).area;
    let start = (4.0 * eta / PI).sqrt().min(w.end());
    let lo = start * 1e-3;
    let hi = bracket_high(area, eta, start, 64.0 * w.end()).ok_or(Error::NoArcFound { eta })?;
    let x = solve_area(area, eta, lo, hi).ok_or(Error::NoArcFound { eta })?;
    Ok(build(&w, Branch::Wedge, wedge_shape(&w, x), eta))
}

/// Attachment abscissa and area of the wedge-branch set whose circle is
/// tangent to h at v∩h.
fn transition(w: &Wall) -> Option<(f64, f64)> {
    let gap = |x: f64| {
        let s = wedge_shape(w, x);
        s.foot[1]
    };
    let (mut lo, mut hi) = (0.0, w.end());
    if gap(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Some((x, wedge_shape(w, x).area))
}

/// The area-`eta` member of the Cheeger family in Λ_{a,b}.
pub fn cheeger_set(p: &StarParams, eta: f64, model: WallModel) -> Result<ArcSet> {
    let w = Wall::new(*p, model);
    cheeger_set_in(&w, transition(&w), eta)
}

fn cheeger_set_in(w: &Wall, tr: Option<(f64, f64)>, eta: f64) -> Result<ArcSet> {
    if !(eta > 0.0 && eta < w.area) {
        return Err(Error::NoArcFound { eta });
    }
    let (xt, et) = tr.ok_or(Error::NoArcFound { eta })?;
    if eta <= et {
        let area = |x: f64| wedge_shape(w, x).area;
        let x = solve_area(area, eta, 0.0, xt).ok_or(Error::NoArcFound { eta })?;
        return Ok(build(w, Branch::Wedge, wedge_shape(w, x), eta));
    }
    let area = |x: f64| floor_shape(w, x).area;
    let x = solve_area(area, eta, xt, w.end()).ok_or(Error::NoArcFound { eta })?;
    let sh = floor_shape(w, x);
    if (sh.area - eta).abs() > 1e-10 * eta {
        return Err(Error::NoArcFound { eta });
    }
    Ok(build(w, Branch::Floor, sh, eta))
}

/// One member of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eta: f64,
    pub f: f64,
    pub c: f64,
    pub radius: f64,
    pub phi: f64,
    pub branch: Branch,
}

impl CurvePoint {
    fn from_set(s: &ArcSet) -> Self {
        Self { eta: s.eta, f: s.f(), c: s.c(), radius: s.radius, phi: s.phi, branch: s.branch }
    }
}

/// F and C along the arc-minimiser family of Λ̆_{a,b}.
pub fn minimizer_curve(p: &StarParams, eta_grid: &[f64], model: WallModel) -> Result<Vec<CurvePoint>> {
    par::map_slice(eta_grid, |&eta| arc_minimizer_with(p, eta, model).map(|s| CurvePoint::from_set(&s)))
        .into_iter()
        .collect()
}

/// F and C along the Cheeger family of Λ_{a,b}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheegerCurve {
    pub params: StarParams,
    pub points: Vec<CurvePoint>,
    /// η of the smallest C on the grid.
    pub argmin_eta: f64,
    pub min_c: f64,
    /// Area of the largest set whose arc runs from v to γ; its circle
    /// touches h at v∩h.
    pub transition_eta: Option<f64>,
    /// First grid value at which no member of the family was found, if any.
    pub cutoff: Option<f64>,
}

impl CheegerCurve {
    /// Number of strict interior local minima of C on the grid.
    pub fn interior_minima(&self) -> usize {
        let c: Vec<f64> = self.points.iter().map(|p| p.c).collect();
        (1..c.len().saturating_sub(1)).filter(|&i| c[i] < c[i - 1] && c[i] <= c[i + 1]).count()
    }
}

/// Sweeps the Cheeger family over `eta_grid` (increasing). The sweep stops
/// at the first η where the family cannot be continued.
pub fn cheeger_curve(p: &StarParams, eta_grid: &[f64], model: WallModel) -> Result<CheegerCurve> {
    let w = Wall::new(*p, model);
    let tr = transition(&w);
    let results = par::map_slice(eta_grid, |&eta| cheeger_set_in(&w, tr, eta));
    let mut points = Vec::with_capacity(eta_grid.len());
    let mut cutoff = None;
    for (r, &eta) in results.into_iter().zip(eta_grid) {
        match r {
            Ok(s) => points.push(CurvePoint::from_set(&s)),
            Err(Error::NoArcFound { .. }) if !points.is_empty() => {
                cutoff = Some(eta);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let best = points
        .iter()
        .min_by(|a, b| a.c.total_cmp(&b.c))
        .copied()
        .ok_or(Error::NoArcFound { eta: eta_grid.first().copied().unwrap_or(0.0) })?;
    Ok(CheegerCurve {
        params: *p,
        points,
        argmin_eta: best.eta,
        min_c: best.c,
        transition_eta: tr.map(|t| t.1),
        cutoff,
    })
}

/// Geometric grid of `n` areas between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n).map(|k| (l + (h - l) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// CSV `eta,F,C,radius,phi`.
pub fn curve_table(points: &[CurvePoint]) -> Table {
    let mut t = Table::new(&["eta", "F", "C", "radius", "phi"]);
    for p in points {
        t.push(vec![fmt_f64(p.eta), fmt_f64(p.f), fmt_f64(p.c), fmt_f64(p.radius), fmt_f64(p.phi)]);
    }
    t
}

/// True when the discrete second differences of γ̆_{a,b} on a 10⁴-point
/// grid over [0, a] are all ≥ −10⁻¹⁰.
pub fn convexity_check(p: &StarParams) -> bool {
    min_second_difference(p, 10_000) >= -1e-10
}

/// Smallest second difference of γ̆_{a,b} on `n` equispaced points of
/// [0, a].
pub fn min_second_difference(p: &StarParams, n: usize) -> f64 {
    let h = p.a / (n - 1) as f64;
    let g: Vec<f64> = (0..n).map(|k| gamma_boundary(p, k as f64 * h)).collect();
    g.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min)
}

/// min over an `n`-point grid of [0, 1] of α(1−y²) − (1−y^{2α}).
pub fn cos_power_margin(alpha: f64, n: usize) -> f64 {
    (0..n)
        .map(|k| {
            let y = k as f64 / (n - 1) as f64;
            alpha * (1.0 - y * y) - (1.0 - y.powf(2.0 * alpha))
        })
        .fold(f64::INFINITY, f64::min)
}
