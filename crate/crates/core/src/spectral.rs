//! Ground states of the mixed Dirichlet/Neumann Laplacians on the quarter
//! domain Λ_{a,b}, on circular sectors, and of the Dirichlet Laplacian on
//! masked subsets of the plane.
//!
//! The quarter domain is mapped to a rectangle through (x₁, t) ↦ (x₁, t·γ(x₁))
//! and discretised with bilinear (Q1) finite elements on the image of a
//! uniform grid. Element boundaries on γ are chords of the exact curve, so
//! the geometric error is O(h²) like the discretisation error, and two mesh
//! levels give a Richardson estimate. The cusp cannot be meshed to the tip;
//! the mesh stops where γ falls below 10⁻⁶·b (or at a(1 − 10⁻⁶) if that
//! comes first) and the last column of the mesh is collapsed onto the tip.
//!
//! Eigenpairs come from shifted inverse iteration on banded Cholesky
//! factors. Because a Cholesky factorisation of K − σM exists exactly when
//! σ lies below the smallest eigenvalue, a failed factorisation is used as a
//! signal to lower the shift.

use serde::{Deserialize, Serialize};

use crate::export::{fmt_f64, Table};
use crate::quad::{GAUSS3_NODES, GAUSS3_WEIGHTS};
use crate::stardomain::{gamma_boundary, gamma_log, lambda_ab, SectorParams, StarParams};
use crate::{par, Error, Result};

// ---------------------------------------------------------------------------
// Banded symmetric matrices

/// Symmetric matrix with `bw` sub-diagonals, lower triangle stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Adds `v` to entries (i, j) and (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let mut acc = 0.0;
            for j in lo..i {
                let a = row[j + self.bw - i];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc + row[self.bw] * x[i];
        }
    }

    /// Row sums of |A|·|x|, used for componentwise backward errors.
    fn abs_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.get(i, j).abs();
                y[i] += a * x[j].abs();
                if j != i {
                    y[j] += a * x[i].abs();
                }
            }
        }
        y
    }

    /// `self − s·other`; both must share dimension and bandwidth.
    pub fn shifted(&self, other: &BandMatrix, s: f64) -> BandMatrix {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - s * b).collect();
        BandMatrix { n: self.n, bw: self.bw, data }
    }

    fn identity_like(&self) -> BandMatrix {
        let mut m = BandMatrix::zeros(self.n, self.bw);
        for i in 0..self.n {
            m.add(i, i, 1.0);
        }
        m
    }

    /// Cholesky factor L with A = LLᵀ; fails unless A is positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let mut s = l[ri + j];
                for k in jlo..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if j < i {
                    l[ri + j] = s / l[rj + j];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::SolverFailure(format!("matrix not positive definite at row {i}")));
                    }
                    l[ri + i] = s.sqrt();
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let r = i * w + bw - i;
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[r + k] * x[k];
            }
            x[i] = s / self.l[r + i];
        }
        for i in (0..n).rev() {
            let r = i * w + bw - i;
            x[i] /= self.l[r + i];
            let xi = x[i];
            for k in i.saturating_sub(bw)..i {
                x[k] -= self.l[r + k] * xi;
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Inverse iteration

/// Lowest eigenpair of K u = λ M u.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub vector: Vec<f64>,
    /// Componentwise backward error max |Ku − λMu| / (|K||u| + λ|M||u|).
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shifted inverse iteration for the smallest eigenvalue of a symmetric
/// definite pencil. Starts from the all-ones vector, which is not
/// orthogonal to a single-signed ground state.
pub fn lowest_eigenpair(k: &BandMatrix, m: &BandMatrix, tol: f64) -> Result<Eigenpair> {
    let n = k.dim();
    if n == 0 {
        return Err(Error::SolverFailure("no unknowns".into()));
    }
    let mut sigma = 0.0;
    let mut factor = k
        .cholesky()
        .map_err(|_| Error::SolverFailure("stiffness matrix is singular; a Dirichlet part is required".into()))?;
    let mut shifted = false;
    let mut system = k.clone();
    let mut u = vec![1.0; n];
    let mut mu = m.mul_vec(&u);
    let mut lambda = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let max_iter = 2000;
    for it in 1..=max_iter {
        // One step of iterative refinement keeps the solve accurate when the
        // shifted matrix is badly scaled (thin cusp cells).
        let mut w = factor.solve(&mu);
        let aw = system.mul_vec(&w);
        let r: Vec<f64> = mu.iter().zip(&aw).map(|(b, a)| b - a).collect();
        for (wi, ci) in w.iter_mut().zip(factor.solve(&r)) {
            *wi += ci;
        }
        let mw = m.mul_vec(&w);
        let norm = dot(&w, &mw).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::SolverFailure("inverse iteration produced a null vector".into()));
        }
        u = w.iter().map(|v| v / norm).collect();
        mu = mw.iter().map(|v| v / norm).collect();
        let ku = k.mul_vec(&u);
        let new_lambda = dot(&u, &ku);
        let change = (new_lambda - lambda).abs() / new_lambda.abs();
        lambda = new_lambda;

        let mut num: f64 = 0.0;
        let ak = k.abs_mul(&u);
        let am = m.abs_mul(&u);
        for i in 0..n {
            let r = (ku[i] - lambda * mu[i]).abs();
            let d = ak[i] + lambda.abs() * am[i];
            if d > 0.0 {
                num = num.max(r / d);
            }
        }
        let residual = num;
        if residual < tol && (change < 1e-12 || since_best > 20) {
            if let Some(s) = u.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
                if s < 0.0 {
                    u.iter_mut().for_each(|v| *v = -*v);
                }
            }
            return Ok(Eigenpair { lambda, vector: u, residual, iterations: it });
        }
        if residual < best * 0.999 {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 {
                return Err(Error::SolverFailure(format!("inverse iteration stagnated at residual {residual:.3e}")));
            }
        }
        // One shift towards the eigenvalue once the Rayleigh quotient settles.
        if !shifted && change < 1e-4 {
            shifted = true;
            let mut trial = 0.99 * lambda;
            for _ in 0..20 {
                let a = k.shifted(m, trial);
                if let Ok(f) = a.cholesky() {
                    factor = f;
                    system = a;
                    sigma = trial;
                    break;
                }
                trial = 0.5 * (trial + sigma);
            }
        }
    }
    Err(Error::SolverFailure(format!("no convergence in {max_iter} iterations")))
}

// ---------------------------------------------------------------------------
// Q1 finite elements on structured meshes

/// Logically rectangular mesh of (ni+1)×(nj+1) nodes. Several grid nodes may
/// share one unknown (collapsed edges); `None` marks Dirichlet nodes.
#[derive(Debug, Clone)]
struct StructuredMesh {
    ni: usize,
    nj: usize,
    nodes: Vec<[f64; 2]>,
    dof: Vec<Option<usize>>,
    n_dof: usize,
}

impl StructuredMesh {
    fn node(&self, i: usize, j: usize) -> usize {
        i * (self.nj + 1) + j
    }

    fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.ni {
            for j in 0..self.nj {
                let ds: Vec<usize> = self.cell(i, j).iter().filter_map(|&g| self.dof[g]).collect();
                for &a in &ds {
                    for &b in &ds {
                        bw = bw.max(a.abs_diff(b));
                    }
                }
            }
        }
        bw
    }

    fn cell(&self, i: usize, j: usize) -> [usize; 4] {
        [self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1)]
    }

    /// Consistent stiffness and mass matrices, 3×3 Gauss per cell.
    fn assemble(&self) -> Result<(BandMatrix, BandMatrix)> {
        let bw = self.bandwidth();
        let mut k = BandMatrix::zeros(self.n_dof, bw);
        let mut m = BandMatrix::zeros(self.n_dof, bw);
        const REF: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        for i in 0..self.ni {
            for j in 0..self.nj {
                let corners = self.cell(i, j);
                let x: Vec<[f64; 2]> = corners.iter().map(|&g| self.nodes[g]).collect();
                let mut ke = [[0.0; 4]; 4];
                let mut me = [[0.0; 4]; 4];
                for (qx, wx) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                    for (qy, wy) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                        let mut n = [0.0; 4];
                        let mut dn = [[0.0; 2]; 4];
                        for a in 0..4 {
                            let (xa, ya) = (REF[a][0], REF[a][1]);
                            n[a] = 0.25 * (1.0 + xa * qx) * (1.0 + ya * qy);
                            dn[a] = [0.25 * xa * (1.0 + ya * qy), 0.25 * ya * (1.0 + xa * qx)];
                        }
                        let mut jac = [[0.0; 2]; 2];
                        for a in 0..4 {
                            for r in 0..2 {
                                for c in 0..2 {
                                    jac[r][c] += x[a][r] * dn[a][c];
                                }
                            }
                        }
                        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                        if det <= 0.0 {
                            if det == 0.0 && x.iter().all(|p| p == &x[0]) {
                                continue;
                            }
                            return Err(Error::SolverFailure(format!("inverted cell ({i}, {j})")));
                        }
                        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
                        let mut grad = [[0.0; 2]; 4];
                        for a in 0..4 {
                            grad[a] = [
                                dn[a][0] * inv[0][0] + dn[a][1] * inv[1][0],
                                dn[a][0] * inv[0][1] + dn[a][1] * inv[1][1],
                            ];
                        }
                        let wdet = wx * wy * det;
                        for a in 0..4 {
                            for b in 0..4 {
                                ke[a][b] += wdet * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                                me[a][b] += wdet * n[a] * n[b];
                            }
                        }
                    }
                }
                for a in 0..4 {
                    let Some(da) = self.dof[corners[a]] else { continue };
                    for b in 0..4 {
                        let Some(db) = self.dof[corners[b]] else { continue };
                        if da >= db {
                            k.add(da, db, ke[a][b]);
                            m.add(da, db, me[a][b]);
                        }
                    }
                }
            }
        }
        Ok((k, m))
    }

    fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.dof.iter().map(|d| d.map_or(0.0, |d| u[d])).collect()
    }

    fn solve(&self, tol: f64) -> Result<(Eigenpair, MeshFunction)> {
        let (k, m) = self.assemble()?;
        let pair = lowest_eigenpair(&k, &m, tol)?;
        let values = self.expand(&pair.vector);
        let f = MeshFunction { ni: self.ni, nj: self.nj, nodes: self.nodes.clone(), values };
        Ok((pair, f))
    }
}

/// Nodal values on a logically rectangular mesh; node (i, j) is stored at
/// index i·(nj+1) + j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFunction {
    pub ni: usize,
    pub nj: usize,
    pub nodes: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

impl MeshFunction {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.nj + 1) + j]
    }

    /// max of the dominant sign over max of the other sign (∞ if only one
    /// sign occurs).
    pub fn sign_ratio(&self) -> f64 {
        let pos = self.values.iter().copied().fold(0.0, f64::max);
        let neg = self.values.iter().copied().fold(0.0, f64::min).abs();
        let (big, small) = if pos >= neg { (pos, neg) } else { (neg, pos) };
        if small == 0.0 {
            f64::INFINITY
        } else {
            big / small
        }
    }

    pub fn is_single_signed(&self) -> bool {
        self.sign_ratio() > 1e8
    }
}

// ---------------------------------------------------------------------------
// Problems

/// The side of ∂Λ_{a,b} carrying the Dirichlet condition: v is the segment
/// {x₁ = 0} joining the centre to the wedge, h the segment {x₂ = 0} joining
/// the centre to the cusp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    V,
    H,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::V => "v",
            Side::H => "h",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" | "V" => Ok(Side::V),
            "h" | "H" => Ok(Side::H),
            _ => Err(Error::Parse(format!("unknown side {s:?} (expected v or h)"))),
        }
    }
}

/// Mixed problem on Λ_{a,b}: Dirichlet on one straight side, Neumann on the
/// other straight side and on γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedProblem {
    pub params: StarParams,
    pub dirichlet_side: Side,
    /// Cells along x₁ and across the domain at the coarse level.
    pub nx: usize,
    pub nt: usize,
}

/// Relative height of γ at which the cusp is cut off.
pub const CUSP_CUTOFF: f64 = 1e-6;

/// Abscissa where the mesh of Λ_{a,b} ends.
pub fn cusp_truncation(p: &StarParams) -> f64 {
    let cap = p.a * (1.0 - 1e-6);
    let target = (CUSP_CUTOFF * p.b).ln();
    if gamma_log(p, cap) >= target {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_log(p, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl MixedProblem {
    /// Chooses a grid of about `n_cells` cells whose shape follows the
    /// extent of the truncated domain.
    pub fn new(params: StarParams, dirichlet_side: Side, n_cells: usize) -> Result<Self> {
        if n_cells < 16 {
            return Err(Error::InvalidInput(format!("n_cells={n_cells} is too small")));
        }
        let aspect = (cusp_truncation(&params) / params.b).clamp(1.0, 16.0);
        let nt = ((n_cells as f64 / aspect).sqrt().round() as usize).max(4);
        let nx = ((n_cells as f64 / nt as f64).round() as usize).max(4);
        Ok(Self { params, dirichlet_side, nx, nt })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.nt
    }

    /// The same problem with both grid counts multiplied by `f`.
    pub fn refined(&self, f: usize) -> Self {
        Self { nx: self.nx * f, nt: self.nt * f, ..*self }
    }

    fn mesh(&self) -> StructuredMesh {
        let p = &self.params;
        let xmax = cusp_truncation(p);
        let (ni, nj) = (self.nx, self.nt);
        let mut nodes = Vec::with_capacity((ni + 1) * (nj + 1));
        let mut dof = Vec::with_capacity(nodes.capacity());
        let mut next = 0;
        for i in 0..=ni {
            let x = xmax * i as f64 / ni as f64;
            // The last column is collapsed onto the tip (xmax, 0).
            let g = if i == 0 {
                p.b
            } else if i == ni {
                0.0
            } else {
                gamma_boundary(p, x)
            };
            let tip_dof = next;
            for j in 0..=nj {
                nodes.push([x, g * j as f64 / nj as f64]);
                let fixed = match self.dirichlet_side {
                    Side::V => i == 0,
                    Side::H => j == 0 || i == ni,
                };
                if fixed {
                    dof.push(None);
                } else if i == ni && j > 0 {
                    dof.push(Some(tip_dof));
                } else {
                    dof.push(Some(next));
                    next += 1;
                }
            }
        }
        StructuredMesh { ni, nj, nodes, dof, n_dof: next }
    }
}

/// Eigenvalue at the requested resolution, at twice the resolution, and the
/// Richardson extrapolation assuming O(h²) convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub eigenvalue: f64,
    pub refined: f64,
    pub extrapolated: f64,
    /// |refined − eigenvalue|/3, the size of the Richardson correction.
    pub extrapolation_error: f64,
    /// Largest backward error of the two solves.
    pub residual: f64,
    pub n_cells: usize,
    /// Ground state on the refined mesh, maximum normalised to 1.
    pub eigenvector: MeshFunction,
}

impl EigenResult {
    fn from_levels(coarse: Eigenpair, fine: Eigenpair, n_cells: usize, mut f: MeshFunction) -> Self {
        let max = f.values.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            f.values.iter_mut().for_each(|v| *v /= max);
        }
        let ext = (4.0 * fine.lambda - coarse.lambda) / 3.0;
        Self {
            eigenvalue: coarse.lambda,
            refined: fine.lambda,
            extrapolated: ext,
            extrapolation_error: (fine.lambda - coarse.lambda).abs() / 3.0,
            residual: coarse.residual.max(fine.residual),
            n_cells,
            eigenvector: f,
        }
    }
}

const EIGEN_TOL: f64 = 1e-10;

/// Lowest eigenvalue of Δ^{v/h}_{a,b} with Richardson extrapolation.
pub fn solve_quarter(problem: &MixedProblem) -> Result<EigenResult> {
    let levels = [*problem, problem.refined(2)];
    let mut out = par::map_slice(&levels, |p| p.mesh().solve(EIGEN_TOL));
    let (fine, f) = out.pop().expect("two levels")?;
    let (coarse, _) = out.pop().expect("two levels")?;
    Ok(EigenResult::from_levels(coarse, fine, problem.n_cells(), f))
}

/// JSON record of a quarter solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterSummary {
    pub a: f64,
    pub b: f64,
    pub side: Side,
    pub n_cells: usize,
    pub lambda: f64,
    pub extrapolated: f64,
    pub residual: f64,
}

impl QuarterSummary {
    pub fn new(problem: &MixedProblem, result: &EigenResult) -> Self {
        Self {
            a: problem.params.a,
            b: problem.params.b,
            side: problem.dirichlet_side,
            n_cells: result.n_cells,
            lambda: result.eigenvalue,
            extrapolated: result.extrapolated,
            residual: result.residual,
        }
    }
}

/// Sector with Dirichlet condition on the arc and Neumann on both radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorProblem {
    pub sector: SectorParams,
    pub n_r: usize,
    pub n_theta: usize,
}

impl SectorProblem {
    /// About `n_cells` polar cells of roughly unit aspect at mid-radius.
    pub fn new(sector: SectorParams, n_cells: usize) -> Result<Self> {
        if n_cells < 16 {
            return Err(Error::InvalidInput(format!("n_cells={n_cells} is too small")));
        }
        let aspect = (0.5 * sector.alpha).max(0.05);
        let n_r = ((n_cells as f64 / aspect).sqrt().round() as usize).max(4);
        let n_theta = ((n_cells as f64 / n_r as f64).round() as usize).max(2);
        Ok(Self { sector, n_r, n_theta })
    }

    pub fn n_cells(&self) -> usize {
        self.n_r * self.n_theta
    }

    fn mesh(&self, f: usize) -> StructuredMesh {
        let (ni, nj) = (self.n_r * f, self.n_theta * f);
        let mut nodes = Vec::new();
        let mut dof = Vec::new();
        let mut next = 1;
        for i in 0..=ni {
            let r = self.sector.radius * i as f64 / ni as f64;
            for j in 0..=nj {
                let t = self.sector.alpha * j as f64 / nj as f64;
                nodes.push([r * t.cos(), r * t.sin()]);
                dof.push(if i == 0 {
                    Some(0)
                } else if i == ni {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                });
            }
        }
        StructuredMesh { ni, nj, nodes, dof, n_dof: next }
    }
}

/// Ground state of the sector problem; the exact value is j₀²/R².
pub fn solve_sector(problem: &SectorProblem) -> Result<EigenResult> {
    let mut out = par::map_slice(&[1usize, 2], |&f| problem.mesh(f).solve(EIGEN_TOL));
    let (fine, f) = out.pop().expect("two levels")?;
    let (coarse, _) = out.pop().expect("two levels")?;
    Ok(EigenResult::from_levels(coarse, fine, problem.n_cells(), f))
}

/// λ_v, λ_h and their difference for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub params: StarParams,
    pub lambda_ab: f64,
    pub lambda_v: EigenResult,
    pub lambda_h: EigenResult,
    /// Difference of the extrapolated eigenvalues.
    pub gap: f64,
    /// Sum of the two extrapolation errors.
    pub gap_error: f64,
}

pub fn ground_state_gap(p: &StarParams, n_cells: usize) -> Result<GapReport> {
    let sides = [Side::V, Side::H];
    let mut r = par::map_slice(&sides, |&s| solve_quarter(&MixedProblem::new(*p, s, n_cells)?));
    let h = r.pop().expect("two sides")?;
    let v = r.pop().expect("two sides")?;
    Ok(GapReport {
        params: *p,
        lambda_ab: lambda_ab(p),
        gap: h.extrapolated - v.extrapolated,
        gap_error: h.extrapolation_error + v.extrapolation_error,
        lambda_v: v,
        lambda_h: h,
    })
}

/// Gap reports for a = 1 and each b in `ratios`.
pub fn gap_sweep(ratios: &[f64], n_cells: usize) -> Result<Vec<GapReport>> {
    ratios
        .iter()
        .map(|&b| ground_state_gap(&StarParams::new(1.0, b)?, n_cells))
        .collect()
}

/// CSV `a,b,ratio,lambda_ab,lambda_v,lambda_h,gap,gap_error`.
pub fn gap_table(rows: &[GapReport]) -> Table {
    let mut t = Table::new(&["a", "b", "ratio", "lambda_ab", "lambda_v", "lambda_h", "gap", "gap_error"]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.params.a),
            fmt_f64(r.params.b),
            fmt_f64(r.params.ratio()),
            fmt_f64(r.lambda_ab),
            fmt_f64(r.lambda_v.extrapolated),
            fmt_f64(r.lambda_h.extrapolated),
            fmt_f64(r.gap),
            fmt_f64(r.gap_error),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// Shapes of the full ground state

/// Nodal patterns a first excited Neumann state of Ω_{a,b} can have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// Closed nodal curve in the interior.
    I,
    /// Nodal line along h (the long axis).
    II,
    /// Nodal line along v (the short axis).
    III,
}

/// A function sampled on the whole of Ω_{a,b}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullField {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    /// Whether each point lies on the outer boundary γ.
    pub on_boundary: Vec<bool>,
}

/// Reflects a quarter solution across both axes: odd across the Dirichlet
/// side, even across the other.
pub fn unfold(quarter: &MeshFunction, side: Side) -> FullField {
    let mut out = FullField { points: Vec::new(), values: Vec::new(), on_boundary: Vec::new() };
    for (s1, s2) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
        let sign = match side {
            Side::V => s1,
            Side::H => s2,
        };
        for i in 0..=quarter.ni {
            for j in 0..=quarter.nj {
                let p = quarter.nodes[i * (quarter.nj + 1) + j];
                out.points.push([s1 * p[0], s2 * p[1]]);
                out.values.push(sign * quarter.value(i, j));
                out.on_boundary.push(j == quarter.nj);
            }
        }
    }
    out
}

/// Reads off the nodal pattern, ignoring values below 10⁻⁶ of the maximum.
pub fn classify_shape(field: &FullField) -> Result<Shape> {
    let scale = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::UnclassifiableShape);
    }
    let tau = 1e-6 * scale;
    let signed: Vec<(usize, f64)> =
        field.values.iter().copied().enumerate().filter(|(_, v)| v.abs() > tau).collect();
    let separated_by = |axis: usize| {
        let mut sgn = 0.0;
        for &(k, v) in &signed {
            let c = field.points[k][axis];
            if c == 0.0 {
                return false;
            }
            let s = (v * c).signum();
            if sgn == 0.0 {
                sgn = s;
            } else if s != sgn {
                return false;
            }
        }
        sgn != 0.0
    };
    let has_pos = signed.iter().any(|&(_, v)| v > 0.0);
    let has_neg = signed.iter().any(|&(_, v)| v < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::UnclassifiableShape);
    }
    if separated_by(0) {
        return Ok(Shape::III);
    }
    if separated_by(1) {
        return Ok(Shape::II);
    }
    let boundary: Vec<f64> =
        signed.iter().filter(|&&(k, _)| field.on_boundary[k]).map(|&(_, v)| v.signum()).collect();
    if !boundary.is_empty() && boundary.iter().all(|&s| s == boundary[0]) {
        return Ok(Shape::I);
    }
    Err(Error::UnclassifiableShape)
}

// ---------------------------------------------------------------------------
// Dirichlet problems on masks

/// Nodes of a uniform grid flagged as inside an open set.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub inside: Vec<bool>,
}

impl Mask {
    /// Samples `f` on the grid covering [lo, hi] with spacing about `h`.
    pub fn from_fn<F: Fn([f64; 2]) -> bool>(lo: [f64; 2], hi: [f64; 2], h: f64, f: F) -> Result<Self> {
        if !(h > 0.0 && hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::InvalidInput("empty mask box or non-positive spacing".into()));
        }
        let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 1;
        let ny = ((hi[1] - lo[1]) / h).ceil() as usize + 1;
        let mut inside = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                inside.push(f([lo[0] + h * i as f64, lo[1] + h * j as f64]));
            }
        }
        Ok(Self { origin: lo, h, nx, ny, inside })
    }

    pub fn disk(center: [f64; 2], r: f64, h: f64) -> Result<Self> {
        let lo = [center[0] - r - h, center[1] - r - h];
        let hi = [center[0] + r + h, center[1] + r + h];
        Self::from_fn(lo, hi, h, |p| (p[0] - center[0]).hypot(p[1] - center[1]) < r)
    }

    /// The interior of Ω_{a,b}.
    pub fn star_domain(p: &StarParams, h: f64) -> Result<Self> {
        let lo = [-p.a - h, -p.b - h];
        let hi = [p.a + h, p.b + h];
        Self::from_fn(lo, hi, h, |x| x[0].abs() < p.a && x[1].abs() < gamma_boundary(p, x[0]))
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Whether every inside node of `self` is inside `other` (same grid).
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.inside.iter().zip(&other.inside).all(|(a, b)| !a || *b)
    }
}

/// Lowest Dirichlet eigenvalue on the masked set, from the 5-point
/// Laplacian. No extrapolation is attempted, since the staircase boundary
/// error is not a smooth function of h.
pub fn dirichlet_ground_state(mask: &Mask) -> Result<EigenResult> {
    let mut index = vec![None; mask.inside.len()];
    let mut n = 0;
    for (k, &b) in mask.inside.iter().enumerate() {
        if b {
            index[k] = Some(n);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("mask is empty".into()));
    }
    let mut bw = 0;
    for j in 0..mask.ny {
        for i in 0..mask.nx {
            if let (Some(a), true) = (index[j * mask.nx + i], j + 1 < mask.ny) {
                if let Some(b) = index[(j + 1) * mask.nx + i] {
                    bw = bw.max(b - a);
                }
            }
        }
    }
    bw = bw.max(1);
    let h2 = mask.h * mask.h;
    let mut a = BandMatrix::zeros(n, bw);
    for j in 0..mask.ny {
        for i in 0..mask.nx {
            let Some(d) = index[j * mask.nx + i] else { continue };
            a.add(d, d, 4.0 / h2);
            if i + 1 < mask.nx {
                if let Some(e) = index[j * mask.nx + i + 1] {
                    a.add(e, d, -1.0 / h2);
                }
            }
            if j + 1 < mask.ny {
                if let Some(e) = index[(j + 1) * mask.nx + i] {
                    a.add(e, d, -1.0 / h2);
                }
            }
        }
    }
    let id = a.identity_like();
    let pair = lowest_eigenpair(&a, &id, EIGEN_TOL)?;
    let mut nodes = Vec::with_capacity(mask.inside.len());
    let mut values = Vec::with_capacity(mask.inside.len());
    let max = pair.vector.iter().copied().fold(0.0, f64::max);
    for i in 0..mask.nx {
        for j in 0..mask.ny {
            nodes.push([mask.origin[0] + mask.h * i as f64, mask.origin[1] + mask.h * j as f64]);
            values.push(index[j * mask.nx + i].map_or(0.0, |d| pair.vector[d] / max));
        }
    }
    Ok(EigenResult {
        eigenvalue: pair.lambda,
        refined: pair.lambda,
        extrapolated: pair.lambda,
        extrapolation_error: 0.0,
        residual: pair.residual,
        n_cells: n,
        eigenvector: MeshFunction { ni: mask.nx - 1, nj: mask.ny - 1, nodes, values },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn band_cholesky_solves_tridiagonal() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let y = a.cholesky().unwrap().solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_detects_indefinite_shift() {
        let mut a = BandMatrix::zeros(3, 0);
        for i in 0..3 {
            a.add(i, i, (i + 1) as f64);
        }
        let id = a.identity_like();
        assert!(a.shifted(&id, 0.5).cholesky().is_ok());
        assert!(a.shifted(&id, 1.5).cholesky().is_err());
    }

    #[test]
    fn tridiagonal_lowest_eigenvalue() {
        let n = 40;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let id = a.identity_like();
        let e = lowest_eigenpair(&a, &id, 1e-12).unwrap();
        let exact = 2.0 - 2.0 * (PI / (n + 1) as f64).cos();
        assert!((e.lambda - exact).abs() < 1e-12 * exact.max(1.0), "{} vs {exact}", e.lambda);
    }

    #[test]
    fn side_parses() {
        assert_eq!("v".parse::<Side>().unwrap(), Side::V);
        assert!("x".parse::<Side>().is_err());
    }
}
