//! Neumann lines and Neumann domains.
//!
//! A Neumann line is a gradient-flow line from a saddle to an extremum. Each
//! saddle emits four: two ascending along the Hessian eigenvector with
//! positive eigenvalue, two descending along the other one. The lines cut
//! the torus into Neumann domains, each bounded by max–saddle–min–saddle.
//!
//! Lines are integrated with the Dormand–Prince 5(4) pair on the
//! reparametrised field `σ∇ψ / min(|∇ψ|, g_s)`. Below the switch value
//! `g_s` the speed is one (no stalling near critical points); above it the
//! field is the scaled gradient. The two regimes join continuously and
//! share the same trajectories.
//!
//! Domains are recovered combinatorially. Lines are the edges of an
//! embedded graph on the critical points, the rotation at each vertex comes
//! from the outgoing line directions, and faces are walked by always taking
//! the next edge clockwise. Polygons are kept in lifted (unwrapped)
//! coordinates, so torus wraparound never enters the area computation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::export::{fmt_f64, Table};
use crate::morse::{self, wrap_delta, CriticalKind, CriticalPoint, CriticalSet};
use crate::special::constants;
use crate::wavefield::{Eigenfunction, ScalarField};
use crate::{par, Error, Result};

/// Numerical parameters of the tracer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Start offset from the saddle along the eigenvector.
    pub saddle_offset: f64,
    /// Distance at which a line is snapped to an extremum.
    pub capture_radius: f64,
    /// Arc length after which a line counts as escaped.
    pub escape_length: f64,
    /// Gradient magnitude where the unit-speed regime ends.
    pub switch_gradient: f64,
    /// Absolute local error per step.
    pub tolerance: f64,
    /// Largest chord between polyline vertices, in units of the wavelength
    /// 1/k; the absolute bound is this over √λ.
    pub chord_per_wavelength: f64,
    /// Distance from an extremum at which boundary angles are measured.
    pub angle_probe: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            saddle_offset: 1e-6,
            capture_radius: 1e-4,
            escape_length: 4.0,
            switch_gradient: 1e-3,
            tolerance: 1e-10,
            chord_per_wavelength: 5e-3,
            angle_probe: 1e-3,
        }
    }
}

impl TraceConfig {
    /// The same configuration with half the step bound and a tighter
    /// error tolerance.
    pub fn refined(&self) -> Self {
        Self { chord_per_wavelength: 0.5 * self.chord_per_wavelength, tolerance: self.tolerance / 32.0, ..*self }
    }
}

/// A polyline in lifted coordinates (ℝ², not reduced modulo 1).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<[f64; 2]>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Polyline {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| dist(w[0], w[1])).sum()
    }

    pub fn reversed(&self) -> Self {
        Self { vertices: self.vertices.iter().rev().copied().collect() }
    }

    pub fn translated(&self, d: [f64; 2]) -> Self {
        Self { vertices: self.vertices.iter().map(|v| [v[0] + d[0], v[1] + d[1]]).collect() }
    }

    pub fn first(&self) -> [f64; 2] {
        self.vertices[0]
    }

    pub fn last(&self) -> [f64; 2] {
        self.vertices[self.vertices.len() - 1]
    }

    /// First point along the polyline at Euclidean distance `r` from its
    /// start vertex (the last vertex if the line never gets that far).
    pub fn point_at_radius(&self, r: f64) -> [f64; 2] {
        let o = self.first();
        for w in self.vertices.windows(2) {
            let (d0, d1) = (dist(w[0], o), dist(w[1], o));
            if d1 >= r {
                if d1 == d0 {
                    return w[1];
                }
                let t = ((r - d0) / (d1 - d0)).clamp(0.0, 1.0);
                return [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])];
            }
        }
        self.last()
    }

    /// Marks vertices whose torus cell differs from that of the previous
    /// vertex: `true` at index i means segment (i−1, i) crosses the edge of
    /// the fundamental domain.
    pub fn wrap_flags(&self) -> Vec<bool> {
        let cell = |v: [f64; 2]| (v[0].floor() as i64, v[1].floor() as i64);
        let mut flags = vec![false; self.vertices.len()];
        for i in 1..self.vertices.len() {
            flags[i] = cell(self.vertices[i]) != cell(self.vertices[i - 1]);
        }
        flags
    }

    /// The polyline reduced to [0,1)², split wherever it wraps.
    pub fn wrapped_pieces(&self) -> Vec<Vec<[f64; 2]>> {
        let flags = self.wrap_flags();
        let mut pieces: Vec<Vec<[f64; 2]>> = vec![Vec::new()];
        for (v, wraps) in self.vertices.iter().zip(flags) {
            if wraps {
                pieces.push(Vec::new());
            }
            pieces.last_mut().expect("nonempty").push([v[0].rem_euclid(1.0), v[1].rem_euclid(1.0)]);
        }
        pieces.retain(|p| !p.is_empty());
        pieces
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Distance from `p` to the closest point of `line`.
pub fn distance_to_polyline(p: [f64; 2], line: &Polyline) -> f64 {
    match line.vertices.len() {
        0 => f64::INFINITY,
        1 => dist(p, line.vertices[0]),
        _ => line.vertices.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
pub fn hausdorff_distance(a: &Polyline, b: &Polyline) -> f64 {
    let one = |x: &Polyline, y: &Polyline| x.vertices.iter().map(|&p| distance_to_polyline(p, y)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

/// Signed shoelace area of a closed polygon (the last vertex connects back
/// to the first).
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (vertices[i], vertices[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

// Bucket grid over the torus for nearest-extremum queries.
#[derive(Debug, Clone)]
struct ExtremumIndex {
    buckets: usize,
    cells: Vec<Vec<usize>>,
}

impl ExtremumIndex {
    fn new(points: &[CriticalPoint], kind: CriticalKind) -> Self {
        let count = points.iter().filter(|p| p.kind == kind).count().max(1);
        let buckets = ((count as f64).sqrt() as usize * 2).clamp(1, 256);
        let mut cells = vec![Vec::new(); buckets * buckets];
        for (i, p) in points.iter().enumerate().filter(|(_, p)| p.kind == kind) {
            let bx = ((p.position[0] * buckets as f64) as usize).min(buckets - 1);
            let by = ((p.position[1] * buckets as f64) as usize).min(buckets - 1);
            cells[bx * buckets + by].push(i);
        }
        Self { buckets, cells }
    }

    /// Nearest indexed point among the 3×3 neighbouring buckets, with its
    /// torus distance. Points farther than one bucket width may be missed,
    /// which callers treat as "far".
    fn nearest(&self, points: &[CriticalPoint], x: [f64; 2]) -> Option<(usize, f64)> {
        let b = self.buckets as i64;
        let bx = (x[0].rem_euclid(1.0) * b as f64) as i64;
        let by = (x[1].rem_euclid(1.0) * b as f64) as i64;
        let mut best: Option<(usize, f64)> = None;
        let span = if b <= 3 { 0..1 } else { -1..2 };
        for dx in span.clone() {
            for dy in span.clone() {
                let (cx, cy) =
                    if b <= 3 { (0, 0) } else { ((bx + dx).rem_euclid(b) as usize, (by + dy).rem_euclid(b) as usize) };
                let list: Box<dyn Iterator<Item = &usize>> = if b <= 3 {
                    Box::new(self.cells.iter().flatten())
                } else {
                    Box::new(self.cells[cx * self.buckets + cy].iter())
                };
                for &i in list {
                    let d = morse::torus_distance(points[i].position, x);
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((i, d));
                    }
                }
            }
        }
        best
    }

    fn far(&self) -> f64 {
        1.0 / self.buckets as f64
    }
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// The reparametrised gradient field σ∇ψ / min(|∇ψ|, g_s).
fn velocity(f: &Eigenfunction, x: [f64; 2], sigma: f64, switch: f64) -> [f64; 2] {
    let g = f.gradient(x);
    let n = g[0].hypot(g[1]);
    let s = sigma / n.min(switch).max(1e-300);
    [s * g[0], s * g[1]]
}

/// Outcome of [`integrate_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub polyline: Polyline,
    pub arc_length: f64,
    /// Whether the stop predicate fired (as opposed to escape).
    pub stopped: bool,
}

/// Integrates the reparametrised gradient flow from `start` with direction
/// sign `sigma` until `stop(x, arc_length)` returns true or the arc length
/// exceeds `cfg.escape_length`.
///
/// `chord_cap(x)` bounds the chord of the next step; the tracer shrinks it
/// near extrema so that the capture disc cannot be jumped over.
pub fn integrate_flow<S, C>(
    f: &Eigenfunction,
    start: [f64; 2],
    sigma: f64,
    wavenumber: f64,
    cfg: &TraceConfig,
    mut chord_cap: C,
    mut stop: S,
) -> FlowResult
where
    S: FnMut([f64; 2], f64) -> bool,
    C: FnMut([f64; 2]) -> f64,
{
    let max_chord = cfg.chord_per_wavelength / wavenumber;
    let mut x = start;
    let mut verts = vec![start];
    let mut arc = 0.0;
    let mut k0 = velocity(f, x, sigma, cfg.switch_gradient);
    let speed = k0[0].hypot(k0[1]).max(1e-300);
    let mut h = 0.1 * max_chord / speed;
    let mut steps = 0usize;
    loop {
        if stop(x, arc) {
            return FlowResult { polyline: Polyline::new(verts), arc_length: arc, stopped: true };
        }
        if arc > cfg.escape_length || steps > 2_000_000 {
            return FlowResult { polyline: Polyline::new(verts), arc_length: arc, stopped: false };
        }
        let speed = k0[0].hypot(k0[1]).max(1e-300);
        let cap = chord_cap(x).min(max_chord);
        h = h.min(cap / speed);
        loop {
            steps += 1;
            let mut k = [[0.0; 2]; 7];
            k[0] = k0;
            for s in 1..7 {
                let mut y = x;
                for (j, kj) in k.iter().enumerate().take(s) {
                    y[0] += h * DP_A[s][j] * kj[0];
                    y[1] += h * DP_A[s][j] * kj[1];
                }
                k[s] = velocity(f, y, sigma, cfg.switch_gradient);
            }
            let mut xn = x;
            for j in 0..6 {
                xn[0] += h * DP_A[6][j] * k[j][0];
                xn[1] += h * DP_A[6][j] * k[j][1];
            }
            let mut err = [0.0; 2];
            for j in 0..7 {
                err[0] += h * DP_E[j] * k[j][0];
                err[1] += h * DP_E[j] * k[j][1];
            }
            let e = err[0].abs().max(err[1].abs());
            let factor = if e == 0.0 { 5.0 } else { (0.9 * (cfg.tolerance / e).powf(0.2)).clamp(0.2, 5.0) };
            if e <= cfg.tolerance {
                arc += dist(x, xn);
                x = xn;
                verts.push(x);
                // FSAL: the last stage is the derivative at the new point.
                k0 = k[6];
                h *= factor;
                break;
            }
            h *= factor;
            if h * speed < 1e-18 {
                return FlowResult { polyline: Polyline::new(verts), arc_length: arc, stopped: false };
            }
        }
    }
}

/// A traced Neumann line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannLine {
    /// Index of the starting saddle in the critical set.
    pub saddle: usize,
    /// Index of the terminal extremum.
    pub extremum: usize,
    pub ascending: bool,
    /// Unit eigenvector the line leaves the saddle along.
    pub direction: [f64; 2],
    /// From the saddle position to the snapped extremum, lifted.
    pub polyline: Polyline,
}

/// Traces the Neumann line leaving `crit.points[saddle]` along `direction`.
///
/// The line ascends if `direction` is the eigenvector of the positive
/// Hessian eigenvalue and descends otherwise.
pub fn trace_neumann_line(
    field: &ScalarField,
    crit: &CriticalSet,
    saddle: usize,
    direction: [f64; 2],
    cfg: &TraceConfig,
) -> Result<NeumannLine> {
    let s = crit.points.get(saddle).ok_or_else(|| Error::InvalidInput(format!("no critical point {saddle}")))?;
    if s.kind != CriticalKind::Saddle {
        return Err(Error::InvalidInput(format!("critical point {saddle} is not a saddle")));
    }
    let index_kind = |k| ExtremumIndex::new(&crit.points, k);
    trace_with_index(field, crit, saddle, direction, cfg, &index_kind)
}

fn trace_with_index<I>(
    field: &ScalarField,
    crit: &CriticalSet,
    saddle: usize,
    direction: [f64; 2],
    cfg: &TraceConfig,
    index_for: &I,
) -> Result<NeumannLine>
where
    I: Fn(CriticalKind) -> ExtremumIndex,
{
    let s = &crit.points[saddle];
    let norm = direction[0].hypot(direction[1]);
    let d = [direction[0] / norm, direction[1] / norm];
    let h = field.evaluator.hessian(s.position);
    let curvature = d[0] * (h[0][0] * d[0] + h[0][1] * d[1]) + d[1] * (h[1][0] * d[0] + h[1][1] * d[1]);
    let ascending = curvature > 0.0;
    let (sigma, target) = if ascending { (1.0, CriticalKind::Maximum) } else { (-1.0, CriticalKind::Minimum) };
    let index = index_for(target);
    let start = [s.position[0] + cfg.saddle_offset * d[0], s.position[1] + cfg.saddle_offset * d[1]];
    let mut captured = None;
    let pts = &crit.points;
    let flow = integrate_flow(
        &field.evaluator,
        start,
        sigma,
        field.wavenumber(),
        cfg,
        |x| match index.nearest(pts, x) {
            Some((_, dd)) => (0.5 * dd).max(0.5 * cfg.capture_radius),
            None => index.far(),
        },
        |x, _| match index.nearest(pts, x) {
            Some((i, dd)) if dd < cfg.capture_radius => {
                captured = Some(i);
                true
            }
            _ => false,
        },
    );
    let Some(e) = captured else {
        return Err(Error::Escape { arc_length: flow.arc_length });
    };
    let mut verts = Vec::with_capacity(flow.polyline.len() + 2);
    verts.push(s.position);
    verts.extend(flow.polyline.vertices);
    let tail = *verts.last().expect("nonempty");
    let snap = wrap_delta([pts[e].position[0] - tail[0], pts[e].position[1] - tail[1]]);
    verts.push([tail[0] + snap[0], tail[1] + snap[1]]);
    Ok(NeumannLine { saddle, extremum: e, ascending, direction: d, polyline: Polyline::new(verts) })
}

/// The four start directions at a saddle: ±ascending eigenvector, then
/// ±descending eigenvector.
pub fn saddle_directions(s: &CriticalPoint) -> [[f64; 2]; 4] {
    let up = s.eigenvectors[1];
    let down = s.eigenvectors[0];
    [up, [-up[0], -up[1]], down, [-down[0], -down[1]]]
}

/// Traces all four lines of every saddle. Failed lines are returned as
/// errors in place so that assembly can account for them.
pub fn trace_all_lines(field: &ScalarField, crit: &CriticalSet, cfg: &TraceConfig) -> Vec<Result<NeumannLine>> {
    let maxima = ExtremumIndex::new(&crit.points, CriticalKind::Maximum);
    let minima = ExtremumIndex::new(&crit.points, CriticalKind::Minimum);
    let index_for = |k| if k == CriticalKind::Maximum { maxima.clone() } else { minima.clone() };
    let saddles: Vec<usize> = crit.of_kind(CriticalKind::Saddle).map(|(i, _)| i).collect();
    let jobs: Vec<(usize, [f64; 2])> =
        saddles.iter().flat_map(|&s| saddle_directions(&crit.points[s]).map(|d| (s, d))).collect();
    par::map_slice(&jobs, |&(s, d)| trace_with_index(field, crit, s, d, cfg, &index_for))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Lens,
    Wedge,
    Star,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [DomainKind::Lens, DomainKind::Wedge, DomainKind::Star];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Lens => "lens",
            Self::Wedge => "wedge",
            Self::Star => "star",
        }
    }
}

/// Indices (into the critical set) of a domain's corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corners {
    pub maximum: usize,
    pub minimum: usize,
    pub saddles: [usize; 2],
}

/// A Neumann domain in lifted coordinates.
///
/// `boundary` holds the four lines in counter-clockwise order starting at
/// `corners.saddles[0]`: saddle → extremum → saddle → extremum → back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannDomain {
    pub boundary: Vec<Polyline>,
    pub corners: Corners,
    /// Indices of the bounding lines in the traced line list.
    pub lines: [usize; 4],
    pub kind: DomainKind,
    /// Unsigned angle between the boundary lines at the maximum and the
    /// minimum.
    pub angles: [f64; 2],
    pub area: f64,
    pub perimeter: f64,
    pub rho: f64,
}

impl NeumannDomain {
    /// Closed boundary polygon (the closing vertex is not repeated).
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        let mut v: Vec<[f64; 2]> = Vec::new();
        for line in &self.boundary {
            let skip = usize::from(!v.is_empty());
            v.extend(line.vertices.iter().skip(skip));
        }
        if v.len() > 1 && dist(v[0], v[v.len() - 1]) < 1e-12 {
            v.pop();
        }
        v
    }

    /// Lifted positions of the extremum corners (first the one reached by
    /// `boundary[0]`, then the one reached by `boundary[2]`).
    fn extremum_points(&self) -> [[f64; 2]; 2] {
        [self.boundary[0].last(), self.boundary[2].last()]
    }
}

/// Area, perimeter and ρ = area·√λ/perimeter of a closed boundary.
pub fn domain_geometry(domain: &NeumannDomain, lambda: f64) -> (f64, f64, f64) {
    let area = polygon_area(&domain.polygon()).abs();
    let perimeter: f64 = domain.boundary.iter().map(Polyline::length).sum();
    (area, perimeter, area * lambda.sqrt() / perimeter)
}

/// The result of decomposing one field into Neumann domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCensus {
    pub domains: Vec<NeumannDomain>,
    /// Domains expected (two per saddle) but not delivered.
    pub excluded_count: usize,
    pub lambda: f64,
    /// Lines that escaped without capture.
    pub failed_lines: usize,
    /// Faces rejected for bad topology or closure.
    pub assembly_failures: usize,
    /// Domains dropped for an ambiguous angle.
    pub ambiguous: usize,
}

impl DomainCensus {
    pub fn total_area(&self) -> f64 {
        self.domains.iter().map(|d| d.area).sum()
    }

    pub fn count(&self, kind: DomainKind) -> usize {
        self.domains.iter().filter(|d| d.kind == kind).count()
    }

    /// CSV `domain_id,kind,area,perimeter,rho`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["domain_id", "kind", "area", "perimeter", "rho"]);
        for (i, d) in self.domains.iter().enumerate() {
            t.push(vec![i.to_string(), d.kind.as_str().into(), fmt_f64(d.area), fmt_f64(d.perimeter), fmt_f64(d.rho)]);
        }
        t
    }
}

fn angle_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

/// An unassembled face: four dart ids (2·line + reversed).
type Face = Vec<usize>;

fn wrap_angle(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

/// An incoming line seen from its extremum: dart id, polyline starting at
/// the extremum, and the farthest distance it gets from the extremum.
struct Spoke {
    dart: usize,
    path: Polyline,
    reach: f64,
}

impl Spoke {
    fn angle_at(&self, r: f64) -> f64 {
        let o = self.path.first();
        let p = self.path.point_at_radius(r);
        (p[1] - o[1]).atan2(p[0] - o[0])
    }
}

// Angles closer than this at the ordering radius are re-examined farther out.
const BUNDLE_TOLERANCE: f64 = 1e-3;

/// Counter-clockwise order of `spokes` (indices), given as angles relative
/// to `reference` at radius `r`. Bundles of nearly coincident spokes are
/// re-ordered at the largest radius all their members reach.
fn order_spokes(spokes: &[Spoke], members: Vec<usize>, r: f64, reference: f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> =
        members.into_iter().map(|i| (wrap_angle(spokes[i].angle_at(r) - reference), i)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(keyed.len());
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 - keyed[end - 1].0 < BUNDLE_TOLERANCE {
            end += 1;
        }
        let group: Vec<usize> = keyed[start..end].iter().map(|k| k.1).collect();
        if group.len() > 1 {
            let r2 = 0.9 * group.iter().map(|&i| spokes[i].reach).fold(f64::INFINITY, f64::min);
            if r2 > r * (1.0 + 1e-9) {
                let group_ref = wrap_angle(keyed[start].0 + reference);
                out.extend(order_spokes(spokes, group, r2, group_ref));
            } else {
                out.extend(group);
            }
        } else {
            out.extend(group);
        }
        start = end;
    }
    out
}

fn extremum_rotation(spokes: &[Spoke]) -> Vec<usize> {
    if spokes.is_empty() {
        return Vec::new();
    }
    // Flow lines are disjoint, so the cyclic order in which they first leave
    // a disc around the extremum is their order at the extremum. Lines into
    // anisotropic extrema merge to within rounding well before arrival, so
    // discs are taken as large as the lines allow.
    let r = 0.9 * spokes.iter().map(|s| s.reach).fold(f64::INFINITY, f64::min).min(0.5);
    let mut angles: Vec<f64> = spokes.iter().map(|s| s.angle_at(r)).collect();
    angles.sort_by(f64::total_cmp);
    // Cut the circle in the middle of the widest gap so no bundle straddles it.
    let n = angles.len();
    let (mut gap, mut cut) = (angles[0] + 2.0 * PI - angles[n - 1], angles[n - 1]);
    for w in angles.windows(2) {
        if w[1] - w[0] > gap {
            gap = w[1] - w[0];
            cut = w[0];
        }
    }
    let reference = cut + 0.5 * gap + PI;
    let order = order_spokes(spokes, (0..spokes.len()).collect(), r, reference);
    order.into_iter().map(|i| spokes[i].dart).collect()
}

fn walk_faces(crit: &CriticalSet, lines: &[Option<NeumannLine>]) -> Vec<Face> {
    let mut rotation: Vec<Vec<usize>> = vec![Vec::new(); crit.points.len()];
    let mut spokes: Vec<Vec<Spoke>> = (0..crit.points.len()).map(|_| Vec::new()).collect();
    let mut saddle_darts: Vec<Vec<(f64, usize)>> = vec![Vec::new(); crit.points.len()];
    for (li, l) in lines.iter().enumerate() {
        let Some(l) = l else { continue };
        saddle_darts[l.saddle].push((angle_of(l.direction), 2 * li));
        let path = l.polyline.reversed();
        let o = path.first();
        let reach = path.vertices.iter().map(|&v| dist(v, o)).fold(0.0, f64::max);
        spokes[l.extremum].push(Spoke { dart: 2 * li + 1, path, reach });
    }
    for (v, mut darts) in saddle_darts.into_iter().enumerate() {
        if !darts.is_empty() {
            darts.sort_by(|a, b| a.0.total_cmp(&b.0));
            rotation[v] = darts.into_iter().map(|d| d.1).collect();
        }
    }
    for (v, sp) in spokes.iter().enumerate() {
        if !sp.is_empty() {
            rotation[v] = extremum_rotation(sp);
        }
    }
    // Position of every dart in its origin's rotation.
    let ndarts = 2 * lines.len();
    let mut slot = vec![(usize::MAX, 0usize); ndarts];
    for (v, r) in rotation.iter().enumerate() {
        for (k, &d) in r.iter().enumerate() {
            slot[d] = (v, k);
        }
    }
    let next = |d: usize| -> usize {
        let rev = d ^ 1;
        let (v, k) = slot[rev];
        let r = &rotation[v];
        r[(k + r.len() - 1) % r.len()]
    };
    let mut seen = vec![false; ndarts];
    let mut faces = Vec::new();
    for start in 0..ndarts {
        if seen[start] || lines[start / 2].is_none() {
            continue;
        }
        let mut face = Vec::new();
        let mut d = start;
        while !seen[d] {
            seen[d] = true;
            face.push(d);
            d = next(d);
            if face.len() > ndarts {
                break;
            }
        }
        faces.push(face);
    }
    faces
}

fn dart_polyline(lines: &[Option<NeumannLine>], d: usize) -> Polyline {
    let l = lines[d / 2].as_ref().expect("dart of a traced line");
    if d % 2 == 0 {
        l.polyline.clone()
    } else {
        l.polyline.reversed()
    }
}

fn dart_origin(lines: &[Option<NeumannLine>], d: usize) -> usize {
    let l = lines[d / 2].as_ref().expect("dart of a traced line");
    if d % 2 == 0 {
        l.saddle
    } else {
        l.extremum
    }
}

fn build_domain(
    field: &ScalarField,
    crit: &CriticalSet,
    lines: &[Option<NeumannLine>],
    face: &Face,
    cfg: &TraceConfig,
) -> Result<NeumannDomain> {
    if face.len() != 4 {
        return Err(Error::Assembly(format!("face has {} edges instead of 4", face.len())));
    }
    // Rotate so the first dart leaves a saddle.
    let shift = face
        .iter()
        .position(|&d| d % 2 == 0)
        .ok_or_else(|| Error::Assembly("face without a saddle".into()))?;
    let darts: Vec<usize> = (0..4).map(|i| face[(i + shift) % 4]).collect();
    let origins: Vec<usize> = darts.iter().map(|&d| dart_origin(lines, d)).collect();
    let kinds: Vec<CriticalKind> = origins.iter().map(|&v| crit.points[v].kind).collect();
    if kinds[0] != CriticalKind::Saddle || kinds[2] != CriticalKind::Saddle {
        return Err(Error::Assembly("saddles not alternating".into()));
    }
    let (maximum, minimum) = match (kinds[1], kinds[3]) {
        (CriticalKind::Maximum, CriticalKind::Minimum) => (origins[1], origins[3]),
        (CriticalKind::Minimum, CriticalKind::Maximum) => (origins[3], origins[1]),
        _ => return Err(Error::Assembly("face does not join one maximum and one minimum".into())),
    };
    let mut distinct = darts.iter().map(|d| d / 2).collect::<Vec<_>>();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != 4 {
        return Err(Error::Assembly("face reuses a Neumann line".into()));
    }

    let mut boundary: Vec<Polyline> = Vec::with_capacity(4);
    let mut cursor: Option<[f64; 2]> = None;
    for &d in &darts {
        let mut p = dart_polyline(lines, d);
        if let Some(c) = cursor {
            let v0 = p.first();
            p = p.translated([(c[0] - v0[0]).round(), (c[1] - v0[1]).round()]);
            if dist(p.first(), c) > 1e-9 {
                return Err(Error::Assembly("consecutive lines do not meet".into()));
            }
        }
        cursor = Some(p.last());
        boundary.push(p);
    }
    if dist(boundary[0].first(), boundary[3].last()) > 1e-9 {
        return Err(Error::Assembly("boundary does not close in the plane".into()));
    }
    let mut domain = NeumannDomain {
        boundary,
        corners: Corners { maximum, minimum, saddles: [origins[0], origins[2]] },
        lines: [darts[0] / 2, darts[1] / 2, darts[2] / 2, darts[3] / 2],
        kind: DomainKind::Lens,
        angles: [0.0; 2],
        area: 0.0,
        perimeter: 0.0,
        rho: 0.0,
    };
    let (area, perimeter, rho) = domain_geometry(&domain, field.lambda);
    if polygon_area(&domain.polygon()) <= 0.0 {
        return Err(Error::Assembly("face is not positively oriented".into()));
    }
    domain.area = area;
    domain.perimeter = perimeter;
    domain.rho = rho;
    let (kind, angles) = classify_with_angles(&domain, field, cfg)?;
    domain.kind = kind;
    domain.angles = angles;
    Ok(domain)
}

fn unsigned_angle(u: [f64; 2], v: [f64; 2]) -> f64 {
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

// Angle between the two boundary lines at the extremum reached by
// boundary[k] (k = 0 or 2).
fn extremum_angle(domain: &NeumannDomain, k: usize, probe: f64) -> f64 {
    let incoming = domain.boundary[k].reversed();
    let outgoing = &domain.boundary[k + 1];
    let o = incoming.first();
    let p = incoming.point_at_radius(probe);
    let q = outgoing.point_at_radius(probe);
    unsigned_angle([p[0] - o[0], p[1] - o[1]], [q[0] - o[0], q[1] - o[1]])
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AngleClass {
    Zero,
    Pi,
}

fn angle_class(angle: f64) -> Option<AngleClass> {
    if angle < PI / 8.0 {
        Some(AngleClass::Zero)
    } else if angle > 7.0 * PI / 8.0 {
        Some(AngleClass::Pi)
    } else {
        None
    }
}

fn classify_with_angles(domain: &NeumannDomain, field: &ScalarField, cfg: &TraceConfig) -> Result<(DomainKind, [f64; 2])> {
    let a0 = extremum_angle(domain, 0, cfg.angle_probe);
    let a2 = extremum_angle(domain, 2, cfg.angle_probe);
    // Report angles as (at maximum, at minimum).
    let [e0, e2] = domain.extremum_points();
    let first_is_max = field.evaluator.value(e0) > field.evaluator.value(e2);
    let angles = if first_is_max { [a0, a2] } else { [a2, a0] };
    match (angle_class(a0), angle_class(a2)) {
        (Some(AngleClass::Zero), Some(AngleClass::Zero)) => Ok((DomainKind::Star, angles)),
        (Some(AngleClass::Pi), Some(AngleClass::Pi)) => Ok((DomainKind::Lens, angles)),
        (Some(_), Some(_)) => Ok((DomainKind::Wedge, angles)),
        _ => match separable_fallback(domain, field) {
            Some(kind) => Ok((kind, angles)),
            None => {
                let c0 = angle_class(a0).or_else(|| limiting_class(domain, 0, field, cfg.angle_probe));
                let c2 = angle_class(a2).or_else(|| limiting_class(domain, 2, field, cfg.angle_probe));
                match (c0, c2) {
                    (Some(AngleClass::Zero), Some(AngleClass::Zero)) => Ok((DomainKind::Star, angles)),
                    (Some(AngleClass::Pi), Some(AngleClass::Pi)) => Ok((DomainKind::Lens, angles)),
                    (Some(_), Some(_)) => Ok((DomainKind::Wedge, angles)),
                    _ => Err(Error::AmbiguousAngle { angle: if angle_class(a0).is_none() { a0 } else { a2 } }),
                }
            }
        },
    }
}

// Generic flow lines enter a nondegenerate extremum tangent to the
// eigenvector of the smaller |eigenvalue|, from one of its two sides, and
// never change side on the way in. Two lines from the same side meet at
// angle 0 in the limit, from opposite sides at angle π. The side is read at
// the probe radius; `None` if the Hessian is too isotropic or the line
// sits on the fast axis.
fn limiting_class(domain: &NeumannDomain, k: usize, field: &ScalarField, probe: f64) -> Option<AngleClass> {
    let incoming = domain.boundary[k].reversed();
    let outgoing = &domain.boundary[k + 1];
    let o = incoming.first();
    let (eigs, vecs) = morse::sym_eigen(field.evaluator.hessian(o));
    let slow = if eigs[0].abs() < eigs[1].abs() { vecs[0] } else { vecs[1] };
    let ratio = eigs[0].abs().max(eigs[1].abs()) / eigs[0].abs().min(eigs[1].abs());
    if ratio < 1.0 + 1e-6 {
        return None;
    }
    let side = |p: [f64; 2]| {
        let d = [p[0] - o[0], p[1] - o[1]];
        let along = d[0] * slow[0] + d[1] * slow[1];
        let across = (d[0] * slow[1] - d[1] * slow[0]).abs();
        // Reject points too close to the fast axis to call.
        if along.abs() < 1e-3 * across {
            None
        } else {
            Some(along.signum())
        }
    };
    let s0 = side(incoming.point_at_radius(probe))?;
    let s1 = side(outgoing.point_at_radius(probe))?;
    Some(if s0 == s1 { AngleClass::Zero } else { AngleClass::Pi })
}

// For 2cos(2πn₁x₁)cos(2πn₂x₂) with n₁ = n₂ every corner angle is π/2 and
// the angle test cannot decide. The star domains are those whose extrema
// are displaced along the axis of smaller frequency (x₁ on ties); the
// others are lenses.
fn separable_fallback(domain: &NeumannDomain, field: &ScalarField) -> Option<DomainKind> {
    let Eigenfunction::Separable { n1, n2 } = field.evaluator else { return None };
    let [e0, e1] = domain.extremum_points();
    let d = [(e1[0] - e0[0]).abs(), (e1[1] - e0[1]).abs()];
    let along_x1 = d[0] > d[1];
    let star_axis_x1 = n1 <= n2;
    Some(if along_x1 == star_axis_x1 { DomainKind::Star } else { DomainKind::Lens })
}

/// Kind of an assembled domain from its boundary angles.
pub fn classify_domain(domain: &NeumannDomain, field: &ScalarField, cfg: &TraceConfig) -> Result<DomainKind> {
    classify_with_angles(domain, field, cfg).map(|(k, _)| k)
}

/// Assembles Neumann domains from traced lines. Failed lines are dropped;
/// the faces they would have bounded fail assembly and are excluded.
pub fn assemble_from_lines(
    field: &ScalarField,
    crit: &CriticalSet,
    traced: Vec<Result<NeumannLine>>,
    cfg: &TraceConfig,
) -> DomainCensus {
    let failed_lines = traced.iter().filter(|r| r.is_err()).count();
    let lines: Vec<Option<NeumannLine>> = traced.into_iter().map(Result::ok).collect();
    let faces = walk_faces(crit, &lines);
    let mut domains = Vec::new();
    let mut assembly_failures = 0;
    let mut ambiguous = 0;
    for face in &faces {
        match build_domain(field, crit, &lines, face, cfg) {
            Ok(d) => domains.push(d),
            Err(Error::AmbiguousAngle { .. }) => ambiguous += 1,
            Err(_) => assembly_failures += 1,
        }
    }
    let expected = 2 * crit.counts.2;
    DomainCensus {
        excluded_count: expected.saturating_sub(domains.len()),
        domains,
        lambda: field.lambda,
        failed_lines,
        assembly_failures,
        ambiguous,
    }
}

/// Traces every Neumann line of `crit` and assembles the domains.
pub fn assemble_domains(field: &ScalarField, crit: &CriticalSet, cfg: &TraceConfig) -> DomainCensus {
    assemble_from_lines(field, crit, trace_all_lines(field, crit, cfg), cfg)
}

/// Critical points, lines and domains of one field.
pub fn census(field: &ScalarField, cfg: &TraceConfig) -> Result<DomainCensus> {
    let crit = morse::find_critical_points(field)?;
    Ok(assemble_domains(field, &crit, cfg))
}

/// One histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    pub pdf: f64,
}

/// A ρ histogram with exceedance fractions of the two universal bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoHistogram {
    pub total: usize,
    /// Values at or beyond the histogram range.
    pub overflow: usize,
    pub bins: Vec<HistBin>,
    /// Fraction with ρ > j₁′/2.
    pub exceed_ground: f64,
    /// Fraction with ρ > j₁′/√2.
    pub exceed_general: f64,
    pub mean: f64,
}

/// Histograms over all domains and per kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoStatistics {
    pub bin_width: f64,
    pub range: [f64; 2],
    pub bound_ground: f64,
    pub bound_general: f64,
    pub overall: RhoHistogram,
    pub per_kind: BTreeMap<DomainKind, RhoHistogram>,
    pub excluded: usize,
    pub fields: usize,
}

pub const RHO_BIN_WIDTH: f64 = 0.01;
pub const RHO_RANGE_MAX: f64 = 1.5;

fn histogram(values: &[f64], width: f64, max: f64, bounds: (f64, f64)) -> RhoHistogram {
    let nb = (max / width).round() as usize;
    let mut counts = vec![0usize; nb];
    let mut overflow = 0;
    for &v in values {
        let k = (v / width).floor();
        if k >= 0.0 && (k as usize) < nb {
            counts[k as usize] += 1;
        } else {
            overflow += 1;
        }
    }
    let total = values.len();
    let norm = if total == 0 { 0.0 } else { 1.0 / (total as f64 * width) };
    let frac = |b: f64| if total == 0 { 0.0 } else { values.iter().filter(|&&v| v > b).count() as f64 / total as f64 };
    RhoHistogram {
        total,
        overflow,
        bins: counts
            .iter()
            .enumerate()
            .map(|(i, &c)| HistBin { left: i as f64 * width, right: (i + 1) as f64 * width, count: c, pdf: c as f64 * norm })
            .collect(),
        exceed_ground: frac(bounds.0),
        exceed_general: frac(bounds.1),
        mean: if total == 0 { 0.0 } else { values.iter().sum::<f64>() / total as f64 },
    }
}

/// ρ statistics over a list of censuses, with bin width 0.01 on [0, 1.5].
pub fn rho_statistics(censuses: &[DomainCensus]) -> RhoStatistics {
    let k = constants();
    let bounds = (k.rho_bound_ground(), k.rho_bound_general());
    let all: Vec<f64> = censuses.iter().flat_map(|c| c.domains.iter().map(|d| d.rho)).collect();
    let per_kind = DomainKind::ALL
        .iter()
        .map(|&kind| {
            let v: Vec<f64> =
                censuses.iter().flat_map(|c| c.domains.iter().filter(|d| d.kind == kind).map(|d| d.rho)).collect();
            (kind, histogram(&v, RHO_BIN_WIDTH, RHO_RANGE_MAX, bounds))
        })
        .collect();
    RhoStatistics {
        bin_width: RHO_BIN_WIDTH,
        range: [0.0, RHO_RANGE_MAX],
        bound_ground: bounds.0,
        bound_general: bounds.1,
        overall: histogram(&all, RHO_BIN_WIDTH, RHO_RANGE_MAX, bounds),
        per_kind,
        excluded: censuses.iter().map(|c| c.excluded_count).sum(),
        fields: censuses.len(),
    }
}

impl RhoStatistics {
    /// CSV `bin_left,bin_right,count,pdf` of the overall histogram.
    pub fn to_table(&self) -> Table {
        histogram_table(&self.overall)
    }
}

pub fn histogram_table(h: &RhoHistogram) -> Table {
    let mut t = Table::new(&["bin_left", "bin_right", "count", "pdf"]);
    for b in &h.bins {
        t.push(vec![fmt_f64(b.left), fmt_f64(b.right), b.count.to_string(), fmt_f64(b.pdf)]);
    }
    t
}
