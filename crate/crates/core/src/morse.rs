//! Critical points of torus eigenfunctions.
//!
//! Detection scans grid cells for a simultaneous sign change of both
//! gradient components, adds the grid-node local minima of |∇ψ|², then
//! polishes each candidate by Newton iteration on the exact gradient. Refined points closer than a quarter grid cell are
//! merged.

use serde::{Deserialize, Serialize};

use crate::export::{fmt_f64, Table};
use crate::wavefield::{Eigenfunction, ScalarField};
use crate::{par, Error, Result};

/// Maximum number of Newton steps before giving up.
pub const MAX_NEWTON_STEPS: usize = 50;
/// Smallest admissible |det H| at a refined point.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Maximum,
    Minimum,
    Saddle,
}

impl CriticalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Maximum => "maximum",
            Self::Minimum => "minimum",
            Self::Saddle => "saddle",
        }
    }

    pub fn is_extremum(&self) -> bool {
        !matches!(self, Self::Saddle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Position in the fundamental domain [0, 1)².
    pub position: [f64; 2],
    pub kind: CriticalKind,
    pub value: f64,
    /// Hessian eigenvalues, ascending.
    pub hessian_eigs: [f64; 2],
    /// Unit eigenvectors matching `hessian_eigs`.
    pub eigenvectors: [[f64; 2]; 2],
    /// |∇ψ| at `position`.
    pub residual: f64,
    /// Newton steps taken.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    /// (maxima, minima, saddles).
    pub counts: (usize, usize, usize),
}

/// Symmetric 2×2 eigen-decomposition, eigenvalues ascending.
pub fn sym_eigen(h: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + c);
    let diff = 0.5 * (a - c);
    let rad = diff.hypot(b);
    let (l0, l1) = (mean - rad, mean + rad);
    // Eigenvector angle of the larger eigenvalue.
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let v1 = [theta.cos(), theta.sin()];
    let v0 = [-v1[1], v1[0]];
    ([l0, l1], [v0, v1])
}

/// Component-wise wrap of a displacement into [−½, ½).
pub fn wrap_delta(d: [f64; 2]) -> [f64; 2] {
    [d[0] - d[0].round(), d[1] - d[1].round()]
}

/// Distance on the unit torus.
pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = wrap_delta([a[0] - b[0], a[1] - b[1]]);
    d[0].hypot(d[1])
}

/// Newton stopping tolerance on |∇ψ|: 10⁻¹² relative to max(1, max|ψ|),
/// raised to the evaluation noise floor where that is larger (only at high
/// energies).
pub fn residual_tolerance(field: &ScalarField) -> f64 {
    (1e-12 * field.max_abs().max(1.0)).max(field.evaluator.gradient_noise_floor())
}

fn classify(f: &Eigenfunction, x: [f64; 2], iterations: usize, residual: f64) -> Result<CriticalPoint> {
    let jet = f.jet(x);
    let h = jet.hessian;
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let position = [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)];
    if det.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateCritical { x1: position[0], x2: position[1], det });
    }
    let (eigs, vecs) = sym_eigen(h);
    let kind = if eigs[1] < 0.0 {
        CriticalKind::Maximum
    } else if eigs[0] > 0.0 {
        CriticalKind::Minimum
    } else {
        CriticalKind::Saddle
    };
    Ok(CriticalPoint {
        position,
        kind,
        value: jet.value,
        hessian_eigs: eigs,
        eigenvectors: vecs,
        residual,
        iterations,
    })
}

fn newton(f: &Eigenfunction, approx: [f64; 2], tol: f64) -> Result<CriticalPoint> {
    let mut x = approx;
    let mut last_residual = f64::INFINITY;
    for k in 0..=MAX_NEWTON_STEPS {
        let jet = f.jet(x);
        let g = jet.gradient;
        let residual = g[0].hypot(g[1]);
        if residual < tol {
            return classify(f, x, k, residual);
        }
        if k == MAX_NEWTON_STEPS {
            return Err(Error::NoConvergence { iterations: k, residual });
        }
        let h = jet.hessian;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence { iterations: k, residual });
        }
        let dx = [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det];
        // Damp steps that leave the local basin (more than an eighth of the
        // torus); Newton candidates always start within a grid cell.
        let len = dx[0].hypot(dx[1]);
        let damp = if len > 0.125 { 0.125 / len } else { 1.0 };
        x = [x[0] - damp * dx[0], x[1] - damp * dx[1]];
        if len < 1e-17 && residual >= last_residual {
            return Err(Error::NoConvergence { iterations: k + 1, residual });
        }
        last_residual = residual;
    }
    unreachable!()
}

/// Refines `approx` to a critical point by Newton iteration on the exact
/// gradient.
///
/// The stopping tolerance is [`residual_tolerance`].
pub fn refine_critical_point(field: &ScalarField, approx: [f64; 2]) -> Result<CriticalPoint> {
    newton(&field.evaluator, approx, residual_tolerance(field))
}

/// All critical points of `field`, using the field's own grid for the scan.
pub fn find_critical_points(field: &ScalarField) -> Result<CriticalSet> {
    find_critical_points_with_scan(field, field.n)
}

/// Same as [`find_critical_points`] with an explicit scan resolution.
pub fn find_critical_points_with_scan(field: &ScalarField, scan: usize) -> Result<CriticalSet> {
    if scan < 8 {
        return Err(Error::InvalidInput("scan resolution must be at least 8".into()));
    }
    let f = &field.evaluator;
    let h = 1.0 / scan as f64;
    let grads: Vec<[f64; 2]> = par::map_range(scan, |i| {
        (0..scan).map(|j| f.gradient([i as f64 * h, j as f64 * h])).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let at = |i: usize, j: usize| grads[(i % scan) * scan + (j % scan)];

    let mut candidates = Vec::new();
    for i in 0..scan {
        for j in 0..scan {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let brackets = |c: usize| {
                let lo = corners.iter().map(|g| g[c]).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|g| g[c]).fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            };
            if brackets(0) && brackets(1) {
                candidates.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
            }
        }
    }
    // The cell test misses points whose gradient zero curves enter and
    // leave a cell through the same edge. Local minima of |∇ψ|² over the
    // grid nodes catch those.
    let g2 = |i: usize, j: usize| {
        let g = at(i, j);
        g[0] * g[0] + g[1] * g[1]
    };
    for i in 0..scan {
        for j in 0..scan {
            let c = g2(i, j);
            let mut is_min = true;
            'nb: for di in [scan - 1, 0, 1] {
                for dj in [scan - 1, 0, 1] {
                    if (di, dj) != (0, 0) && g2(i + di, j + dj) < c {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                candidates.push([i as f64 * h, j as f64 * h]);
            }
        }
    }

    let tol = residual_tolerance(field);
    let refined = par::map_slice(&candidates, |c| newton(f, *c, tol));

    let merge = 0.25 / field.n.max(scan) as f64;
    let mut points: Vec<CriticalPoint> = Vec::new();
    for r in refined {
        let p = match r {
            Ok(p) => p,
            Err(e @ Error::DegenerateCritical { .. }) => return Err(e),
            // Candidates that wander off are spurious; true points are
            // caught by the Euler check below.
            Err(_) => continue,
        };
        if points.iter().all(|q| torus_distance(q.position, p.position) >= merge) {
            points.push(p);
        }
    }
    points.sort_by(|a, b| {
        a.position[0].total_cmp(&b.position[0]).then(a.position[1].total_cmp(&b.position[1]))
    });
    let counts = count(&points);
    if counts.0 + counts.1 != counts.2 {
        return Err(Error::EulerViolation { maxima: counts.0, minima: counts.1, saddles: counts.2 });
    }
    Ok(CriticalSet { points, counts })
}

fn count(points: &[CriticalPoint]) -> (usize, usize, usize) {
    let c = |k| points.iter().filter(|p| p.kind == k).count();
    (c(CriticalKind::Maximum), c(CriticalKind::Minimum), c(CriticalKind::Saddle))
}

impl CriticalSet {
    pub fn of_kind(&self, kind: CriticalKind) -> impl Iterator<Item = (usize, &CriticalPoint)> {
        self.points.iter().enumerate().filter(move |(_, p)| p.kind == kind)
    }

    /// CSV export `x1,x2,kind,value`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["x1", "x2", "kind", "value"]);
        for p in &self.points {
            t.push(vec![fmt_f64(p.position[0]), fmt_f64(p.position[1]), p.kind.as_str().into(), fmt_f64(p.value)]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::sample_separable;

    #[test]
    fn eigen_decomposition() {
        let (l, v) = sym_eigen([[2.0, 1.0], [1.0, 2.0]]);
        assert!((l[0] - 1.0).abs() < 1e-15 && (l[1] - 3.0).abs() < 1e-15);
        assert!((v[1][0] - v[1][1]).abs() < 1e-15);
        assert!((v[0][0] + v[0][1]).abs() < 1e-15);
    }

    #[test]
    fn refine_to_saddle() {
        let f = sample_separable(1, 1, 64).unwrap();
        let p = refine_critical_point(&f, [0.26, 0.24]).unwrap();
        assert_eq!(p.kind, CriticalKind::Saddle);
        assert!(torus_distance(p.position, [0.25, 0.25]) < 1e-14);
    }

    #[test]
    fn refine_at_fixed_point_takes_no_steps() {
        let f = sample_separable(1, 1, 64).unwrap();
        let p = refine_critical_point(&f, [0.0, 0.0]).unwrap();
        assert_eq!(p.iterations, 0);
        assert_eq!(p.kind, CriticalKind::Maximum);
    }

    #[test]
    fn separable_counts() {
        let f = sample_separable(1, 1, 64).unwrap();
        let set = find_critical_points(&f).unwrap();
        assert_eq!(set.counts, (2, 2, 4));
    }
}
