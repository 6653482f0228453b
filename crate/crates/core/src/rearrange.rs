//! Rearrangement of nonnegative functions on Λ_{a,b} into radially
//! nonincreasing functions on a sector S_{α,R} of the same area.
//!
//! A sampled function is treated as its piecewise-linear interpolant on the
//! triangulated sampling mesh. For that interpolant the superlevel area μ(t)
//! has a closed form on every triangle, and its Dirichlet integral is a
//! finite sum, so both sides of the inequalities below are evaluated on the
//! same object.
//!
//! The rearranged function is stored through its level radii
//! r_k = √(2μ(t_k)/α) on a threshold grid and is linear in r between them.

use serde::{Deserialize, Serialize};

use crate::quad::{GAUSS3_NODES, GAUSS3_WEIGHTS};
use crate::spectral::{cusp_truncation, MeshFunction};
use crate::stardomain::{gamma_boundary, SectorParams, StarParams};
use crate::{par, Error, Result};

/// Number of equispaced thresholds used when none is specified.
pub const DEFAULT_THRESHOLDS: usize = 512;

/// Superlevel areas μ(t) = |{ψ > t}| on an increasing threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    pub thresholds: Vec<f64>,
    pub superlevel_area: Vec<f64>,
    pub total_area: f64,
    /// |{ψ ≥ t_last}|; nonzero only when ψ has a plateau at its maximum.
    pub top_area: f64,
}

impl LevelProfile {
    /// μ(t), linear between thresholds, `total_area` below zero and zero
    /// above the last threshold.
    pub fn mu(&self, t: f64) -> f64 {
        let th = &self.thresholds;
        if t < 0.0 {
            return self.total_area;
        }
        if t < th[0] {
            return self.superlevel_area[0];
        }
        if t >= th[th.len() - 1] {
            return 0.0;
        }
        let k = th.partition_point(|&x| x <= t) - 1;
        let s = (t - th[k]) / (th[k + 1] - th[k]);
        self.superlevel_area[k] * (1.0 - s) + self.superlevel_area[k + 1] * s
    }

    /// Profile of a radial, nonincreasing function f(r) on a sector, with μ
    /// obtained by inverting f.
    pub fn from_radial<F: Fn(f64) -> f64>(sector: &SectorParams, f: F, n_thresholds: usize) -> Result<Self> {
        if n_thresholds < 2 {
            return Err(Error::InvalidInput("need at least two thresholds".into()));
        }
        let r_max = sector.radius;
        let top = f(0.0);
        if f(r_max) < -1e-12 {
            return Err(Error::NegativeInput { min: f(r_max) });
        }
        let thresholds = grid(top, n_thresholds);
        let superlevel_area = thresholds
            .iter()
            .map(|&t| {
                // largest r with f(r) > t
                if f(r_max) > t {
                    return sector.area();
                }
                let (mut lo, mut hi) = (0.0, r_max);
                if !(f(0.0) > t) {
                    return 0.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * sector.alpha * lo * lo
            })
            .collect();
        Ok(Self { thresholds, superlevel_area, total_area: sector.area(), top_area: 0.0 })
    }
}

fn grid(top: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| top * k as f64 / (n - 1) as f64).collect()
}

// ---------------------------------------------------------------------------
// Piecewise-linear fields

#[derive(Debug, Clone, Copy)]
struct Triangle {
    p: [[f64; 2]; 3],
    v: [f64; 3],
    area: f64,
}

impl Triangle {
    fn new(p: [[f64; 2]; 3], v: [f64; 3]) -> Self {
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
        Self { p, v, area }
    }

    /// |{u > t}| for the linear interpolant.
    fn superlevel(&self, t: f64) -> f64 {
        let mut f = self.v;
        f.sort_by(f64::total_cmp);
        let [f1, f2, f3] = f;
        if t >= f3 {
            0.0
        } else if t < f1 {
            self.area
        } else if t >= f2 {
            self.area * ((f3 - t) / (f3 - f1)) * ((f3 - t) / (f3 - f2))
        } else {
            self.area * (1.0 - ((t - f1) / (f2 - f1)) * ((t - f1) / (f3 - f1)))
        }
    }

    fn gradient(&self) -> [f64; 2] {
        let [a, b, c] = self.p;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det == 0.0 {
            return [0.0, 0.0];
        }
        let (du1, du2) = (self.v[1] - self.v[0], self.v[2] - self.v[0]);
        [
            (du1 * (c[1] - a[1]) - du2 * (b[1] - a[1])) / det,
            (du2 * (b[0] - a[0]) - du1 * (c[0] - a[0])) / det,
        ]
    }
}

// Degree-5 seven-point rule on the reference triangle (barycentric, weights
// summing to one).
const TRI7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

fn triangles(f: &MeshFunction) -> Vec<Triangle> {
    let mut out = Vec::with_capacity(2 * f.ni * f.nj);
    let idx = |i: usize, j: usize| i * (f.nj + 1) + j;
    for i in 0..f.ni {
        for j in 0..f.nj {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            for [p, q, r] in [[a, b, c], [a, c, d]] {
                out.push(Triangle::new(
                    [f.nodes[p], f.nodes[q], f.nodes[r]],
                    [f.values[p], f.values[q], f.values[r]],
                ));
            }
        }
    }
    out
}

fn check_nonnegative(f: &MeshFunction) -> Result<()> {
    let min = f.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-12 {
        return Err(Error::NegativeInput { min });
    }
    Ok(())
}

/// Area of the triangulated sampling domain.
pub fn mesh_area(f: &MeshFunction) -> f64 {
    triangles(f).iter().map(|t| t.area).sum()
}

/// |{ψ > t}| for the piecewise-linear interpolant of `f`.
pub fn superlevel_area(f: &MeshFunction, t: f64) -> f64 {
    triangles(f).iter().map(|tr| tr.superlevel(t)).sum()
}

/// Profile on `n_thresholds` equispaced levels from 0 to max ψ, merged with
/// twice as many levels placed at quantiles of the area distribution. The second
/// set resolves ranges where μ falls steeply over a narrow band of values.
pub fn level_profile(f: &MeshFunction, n_thresholds: usize) -> Result<LevelProfile> {
    if n_thresholds < 2 {
        return Err(Error::InvalidInput("need at least two thresholds".into()));
    }
    check_nonnegative(f)?;
    level_profile_at(f, &threshold_grid(f, n_thresholds))
}

/// `n` equispaced levels on [0, max ψ] together with `2n` area-quantile
/// levels.
pub fn threshold_grid(f: &MeshFunction, n: usize) -> Vec<f64> {
    let top = f.values.iter().copied().fold(0.0, f64::max);
    let mut levels = grid(top, n);
    // Lumped nodal areas of the triangulation.
    let tris = triangles(f);
    let mut weighted: Vec<(f64, f64)> = Vec::with_capacity(3 * tris.len());
    for t in &tris {
        for &v in &t.v {
            weighted.push((v, t.area / 3.0));
        }
    }
    weighted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = weighted.iter().map(|w| w.1).sum();
    let step = total / (2 * n) as f64;
    let mut acc = 0.0;
    let mut next = step;
    for (v, w) in weighted {
        acc += w;
        if acc >= next {
            if v > 0.0 && v < top {
                levels.push(v);
            }
            while next <= acc {
                next += step;
            }
        }
    }
    levels.sort_by(f64::total_cmp);
    // Relative spacing keeps levels inside a band of tiny values apart.
    levels.dedup_by(|b, a| *b - *a <= 1e-12 * b.abs());
    if levels.len() < 2 {
        levels = vec![0.0, top.max(f64::MIN_POSITIVE)];
    }
    levels
}

/// Profile on caller-supplied increasing thresholds starting at 0.
pub fn level_profile_at(f: &MeshFunction, thresholds: &[f64]) -> Result<LevelProfile> {
    check_nonnegative(f)?;
    if thresholds.len() < 2 || thresholds[0] != 0.0 || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("thresholds must increase strictly from 0".into()));
    }
    let tris = triangles(f);
    let total_area = tris.iter().map(|t| t.area).sum();
    let t_last = thresholds[thresholds.len() - 1];
    let top_area = tris
        .iter()
        .map(|tr| if tr.v.iter().all(|&v| v >= t_last) { tr.area } else { tr.superlevel(t_last) })
        .sum();
    let mut superlevel_area = par::map_slice(thresholds, |&t| tris.iter().map(|tr| tr.superlevel(t)).sum::<f64>());
    // The top level is attained only on a null set.
    let last = superlevel_area.len() - 1;
    let top = f.values.iter().copied().fold(0.0, f64::max);
    if thresholds[last] >= top {
        superlevel_area[last] = 0.0;
    }
    Ok(LevelProfile { thresholds: thresholds.to_vec(), superlevel_area, total_area, top_area })
}

/// ∫|∇ψ|² of the piecewise-linear interpolant.
pub fn dirichlet_integral(f: &MeshFunction) -> f64 {
    triangles(f)
        .iter()
        .map(|t| {
            let g = t.gradient();
            t.area * (g[0] * g[0] + g[1] * g[1])
        })
        .sum()
}

/// ∫ρ(ψ)² of the interpolant, by a degree-5 rule on every triangle.
pub fn norm_sq<R: Fn(f64) -> f64>(f: &MeshFunction, rho: R) -> f64 {
    triangles(f)
        .iter()
        .map(|t| {
            TRI7.iter()
                .map(|(l, w)| {
                    let u = l[0] * t.v[0] + l[1] * t.v[1] + l[2] * t.v[2];
                    w * rho(u).powi(2)
                })
                .sum::<f64>()
                * t.area
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Rearranged functions

/// Radially nonincreasing function on a sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangedFunction {
    pub sector: SectorParams,
    pub thresholds: Vec<f64>,
    /// Level radii √(2μ(t_k)/α), nonincreasing. The last entry bounds the
    /// disk on which ψ* equals the top threshold.
    pub radii: Vec<f64>,
}

/// Builds ψ* from a profile; the sector must have the profile's area.
pub fn rearrange_to_sector(profile: &LevelProfile, s: &SectorParams) -> Result<RearrangedFunction> {
    if (s.area() - profile.total_area).abs() > 1e-9 * profile.total_area.max(1e-300) {
        return Err(Error::AreaMismatch { sector: s.area(), profile: profile.total_area });
    }
    let radius = |m: f64| (2.0 * m.max(0.0) / s.alpha).sqrt().min(s.radius);
    let mut radii: Vec<f64> = profile.superlevel_area.iter().map(|&m| radius(m)).collect();
    // The innermost radius bounds the plateau {ψ* = t_last}.
    let last = radii.len() - 1;
    radii[last] = radius(profile.top_area);
    // Rounding must not make the radii increase.
    for k in 1..radii.len() {
        radii[k] = radii[k].min(radii[k - 1]);
    }
    Ok(RearrangedFunction { sector: *s, thresholds: profile.thresholds.clone(), radii })
}

/// The sector of opening `alpha` whose area equals the profile's.
pub fn matching_sector(profile: &LevelProfile, alpha: f64) -> Result<SectorParams> {
    crate::stardomain::reference_sector_for_area(profile.total_area, alpha)
}

impl RearrangedFunction {
    /// ψ*(r); zero outside the outermost level radius.
    pub fn value(&self, r: f64) -> f64 {
        let rs = &self.radii;
        if r >= rs[0] {
            return 0.0;
        }
        // radii are nonincreasing: find k with rs[k+1] <= r < rs[k].
        let k = rs.partition_point(|&x| x > r);
        if k == rs.len() {
            return self.thresholds[k - 1];
        }
        let (hi, lo) = (rs[k - 1], rs[k]);
        let (t0, t1) = (self.thresholds[k - 1], self.thresholds[k]);
        t0 + (t1 - t0) * (hi - r) / (hi - lo)
    }

    /// |{ψ* > t}|.
    pub fn superlevel_area(&self, t: f64) -> f64 {
        let th = &self.thresholds;
        let r = if t < th[0] {
            self.radii[0].max(if t < 0.0 { self.sector.radius } else { 0.0 })
        } else if t >= th[th.len() - 1] {
            0.0
        } else {
            let k = th.partition_point(|&x| x <= t) - 1;
            let s = (t - th[k]) / (th[k + 1] - th[k]);
            self.radii[k] * (1.0 - s) + self.radii[k + 1] * s
        };
        0.5 * self.sector.alpha * r * r
    }

    /// ∫|∇ψ*|², exact for the piecewise-linear radial profile.
    pub fn dirichlet_integral(&self) -> f64 {
        let a = self.sector.alpha;
        self.slices()
            .map(|(t0, t1, r0, r1)| {
                let dr = r0 - r1;
                if dr <= 0.0 {
                    0.0
                } else {
                    a * (t1 - t0).powi(2) * (r0 + r1) / (2.0 * dr)
                }
            })
            .sum()
    }

    /// ∫ρ(ψ*)² over the sector.
    pub fn norm_sq<R: Fn(f64) -> f64>(&self, rho: R) -> f64 {
        let a = self.sector.alpha;
        let outer = 0.5 * a * (self.sector.radius.powi(2) - self.radii[0].powi(2));
        let last = self.radii.len() - 1;
        let plateau = 0.5 * a * self.radii[last].powi(2);
        let mut total = rho(0.0).powi(2) * outer + rho(self.thresholds[last]).powi(2) * plateau;
        for (t0, t1, r0, r1) in self.slices() {
            let (mid, half) = (0.5 * (r0 + r1), 0.5 * (r0 - r1));
            for (x, w) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                let r = mid + half * x;
                let t = t0 + (t1 - t0) * (r0 - r) / (r0 - r1);
                total += w * half * a * r * rho(t).powi(2);
            }
        }
        total
    }

    fn slices(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.radii.len() - 1).filter_map(move |k| {
            let (r0, r1) = (self.radii[k], self.radii[k + 1]);
            (r0 > r1).then(|| (self.thresholds[k], self.thresholds[k + 1], r0, r1))
        })
    }
}

// ---------------------------------------------------------------------------
// Checks

/// Outcome of ‖∇ψ*‖² ≤ ‖∇ψ‖².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    /// ∫|∇ψ*|² over the sector.
    pub lhs: f64,
    /// ∫|∇ψ|² over Λ_{a,b}.
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the Dirichlet integrals of ψ and of its rearrangement onto the
/// sector of opening `alpha` and equal area.
pub fn gradient_inequality_check(f: &MeshFunction, alpha: f64, n_thresholds: usize) -> Result<GradientCheck> {
    let profile = level_profile(f, n_thresholds)?;
    let s = matching_sector(&profile, alpha)?;
    let star = rearrange_to_sector(&profile, &s)?;
    let lhs = star.dirichlet_integral();
    let rhs = dirichlet_integral(f);
    Ok(GradientCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) })
}

/// One threshold of the perimeter comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerimeterRow {
    pub t: f64,
    pub mu: f64,
    pub perim_h_original: f64,
    pub perim_h_star: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterReport {
    pub alpha: f64,
    pub rows: Vec<PerimeterRow>,
    pub fraction_holding: f64,
}

/// Length of {ψ = t} by marching squares on the sampling mesh. Segments
/// running along the Neumann sides (the first column, which is v, and the
/// last row, which is γ) are not part of the non-Neumann boundary and are
/// skipped.
pub fn level_set_length(f: &MeshFunction, t: f64) -> f64 {
    let idx = |i: usize, j: usize| i * (f.nj + 1) + j;
    let mut total = 0.0;
    for i in 0..f.ni {
        for j in 0..f.nj {
            let c = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            let v: Vec<f64> = c.iter().map(|&k| f.values[k] - t).collect();
            let p: Vec<[f64; 2]> = c.iter().map(|&k| f.nodes[k]).collect();
            let mut crossings: Vec<([f64; 2], usize)> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] > 0.0) != (v[b] > 0.0) {
                    let s = v[a] / (v[a] - v[b]);
                    crossings.push(([p[a][0] + s * (p[b][0] - p[a][0]), p[a][1] + s * (p[b][1] - p[a][1])], e));
                }
            }
            let segs: Vec<(usize, usize)> = match crossings.len() {
                2 => vec![(0, 1)],
                4 => {
                    // Saddle cell. Crossing k sits on edge k; the centre value
                    // decides which pair of opposite corners is cut off.
                    let centre = 0.25 * v.iter().sum::<f64>();
                    if (centre > 0.0) == (v[0] > 0.0) {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => Vec::new(),
            };
            for (a, b) in segs {
                let (pa, ea) = crossings[a];
                let (pb, eb) = crossings[b];
                let on_v = |e: usize| i == 0 && e == 3;
                let on_gamma = |e: usize| j + 1 == f.nj && e == 2;
                if (on_v(ea) && on_v(eb)) || (on_gamma(ea) && on_gamma(eb)) {
                    continue;
                }
                total += (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
            }
        }
    }
    total
}

/// Compares |∂ʰ{ψ > t}| with |∂ʰ{ψ* > t}| = α·r(t) at each interior
/// threshold.
pub fn perimeter_inequality_check(f: &MeshFunction, thresholds: &[f64], alpha: f64) -> Result<PerimeterReport> {
    let profile = level_profile_at(f, thresholds)?;
    let s = matching_sector(&profile, alpha)?;
    let star = rearrange_to_sector(&profile, &s)?;
    let top = f.values.iter().copied().fold(0.0, f64::max);
    let ks: Vec<usize> = (1..thresholds.len()).filter(|&k| thresholds[k] < top).collect();
    let rows: Vec<PerimeterRow> = par::map_slice(&ks, |&k| {
        let t = thresholds[k];
        let original = level_set_length(f, t);
        let star_len = alpha * star.radii[k];
        PerimeterRow {
            t,
            mu: profile.superlevel_area[k],
            perim_h_original: original,
            perim_h_star: star_len,
            holds: original >= star_len,
        }
    });
    let fraction_holding =
        if rows.is_empty() { 1.0 } else { rows.iter().filter(|r| r.holds).count() as f64 / rows.len() as f64 };
    Ok(PerimeterReport { alpha, rows, fraction_holding })
}

// ---------------------------------------------------------------------------
// Sampling and test functions

/// Samples `g` on the mapped grid (x₁, t·γ(x₁)) of Λ_{a,b}, truncated at the
/// cusp like the eigensolver mesh.
pub fn sample_quarter<G: Fn([f64; 2]) -> f64>(p: &StarParams, nx: usize, nt: usize, g: G) -> MeshFunction {
    let xmax = cusp_truncation(p);
    let mut nodes = Vec::with_capacity((nx + 1) * (nt + 1));
    for i in 0..=nx {
        let x = xmax * i as f64 / nx as f64;
        let h = if i == 0 { p.b } else { gamma_boundary(p, x) };
        for j in 0..=nt {
            nodes.push([x, h * j as f64 / nt as f64]);
        }
    }
    let values = nodes.iter().map(|&x| g(x)).collect();
    MeshFunction { ni: nx, nj: nt, nodes, values }
}

/// Samples a radial profile on a polar mesh of the sector.
pub fn sample_sector<G: Fn(f64) -> f64>(s: &SectorParams, nr: usize, ntheta: usize, g: G) -> MeshFunction {
    let mut nodes = Vec::with_capacity((nr + 1) * (ntheta + 1));
    let mut values = Vec::with_capacity(nodes.capacity());
    for i in 0..=nr {
        let r = s.radius * i as f64 / nr as f64;
        for j in 0..=ntheta {
            let th = s.alpha * j as f64 / ntheta as f64;
            nodes.push([r * th.cos(), r * th.sin()]);
            values.push(g(r));
        }
    }
    MeshFunction { ni: nr, nj: ntheta, nodes, values }
}

/// cos(πx₁/2a)·sin(πx₂/2b): smooth, nonnegative on Λ_{a,b}, zero on h.
pub fn separable_h_profile(p: &StarParams) -> impl Fn([f64; 2]) -> f64 + Send + Sync {
    let (a, b) = (p.a, p.b);
    move |x| {
        (std::f64::consts::FRAC_PI_2 * x[0] / a).cos().max(0.0) * (std::f64::consts::FRAC_PI_2 * x[1] / b).sin().max(0.0)
    }
}

/// C^∞ step: 0 for s ≤ 0, 1 for s ≥ 1.
fn smooth_step(s: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (u, w) = (f(s), f(1.0 - s));
    if u + w == 0.0 {
        0.0
    } else {
        u / (u + w)
    }
}

/// A random nonnegative combination of Gaussian bumps inside Λ_{a,b},
/// multiplied by a smooth cutoff that vanishes for x₂ < δ = b/20.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub centres: Vec<[f64; 2]>,
    pub widths: Vec<f64>,
    pub weights: Vec<f64>,
    pub delta: f64,
}

impl BumpFunction {
    pub fn random(p: &StarParams, seed: u64) -> Self {
        use rand_chacha::ChaCha8Rng;
        use rand_core::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let m = 1 + (u() * 4.0) as usize;
        let xr = cusp_truncation(p).min(3.0 * p.b);
        let mut centres = Vec::with_capacity(m);
        let mut widths = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for _ in 0..m {
            let x = xr * u();
            let y = gamma_boundary(p, x) * (0.2 + 0.8 * u());
            centres.push([x, y]);
            widths.push(p.b * (0.15 + 0.5 * u()));
            weights.push(0.2 + 0.8 * u());
        }
        Self { centres, widths, weights, delta: p.b / 20.0 }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let cut = smooth_step(x[1] / self.delta - 1.0);
        if cut == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .centres
            .iter()
            .zip(&self.widths)
            .zip(&self.weights)
            .map(|((c, w), a)| a * (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * w * w)).exp())
            .sum();
        cut * s
    }
}
