//! Browser front end for `neumann-atlas`.
//!
//! Three operations are exported to JavaScript. Each takes plain numbers and
//! returns a JSON string, which keeps the boundary free of custom types:
//!
//! * [`star_domain`]: outline of Ω_{a,b} with λ_{a,b}, ρ and the sector window
//! * [`cheeger`]: the F and C curves of Λ_{a,b} and the optimal set
//! * [`separable_domains`]: the Neumann domains of a separable eigenfunction
//!
//! The `*_json` functions do the work and are usable from Rust as well.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use neumann_atlas::isoperimetric::{cheeger_curve, cheeger_set, log_grid, CurvePoint, WallModel};
use neumann_atlas::stardomain::{
    admissibility_window, gamma_boundary, lambda_ab, quarter_area, rho_star_lens, Admissibility, RhoPair, StarParams,
};
use neumann_atlas::tracer::{census, TraceConfig};
use neumann_atlas::wavefield::sample_separable;

/// Upper limit on the field resolution accepted from the page.
pub const MAX_RESOLUTION: usize = 512;

#[derive(Serialize)]
struct StarView {
    a: f64,
    b: f64,
    lambda_ab: f64,
    quarter_area: f64,
    rho: RhoPair,
    admissibility: Admissibility,
    /// Closed outline of Ω_{a,b}, counterclockwise from (a, 0).
    outline: Vec<[f64; 2]>,
}

/// Outline and summary numbers of Ω_{a,b}.
pub fn star_domain_json(a: f64, b: f64, samples: usize) -> Result<String, String> {
    let p = StarParams::new(a, b).map_err(|e| e.to_string())?;
    let n = samples.clamp(8, 4096);
    // Quarter boundary from (a, 0) to (0, b), clustered towards the cusp.
    let quarter: Vec<[f64; 2]> = (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            let x = a * (1.0 - s * s);
            [x, gamma_boundary(&p, x)]
        })
        .collect();
    let mut outline = quarter.clone();
    outline.extend(quarter.iter().rev().skip(1).map(|&[x, y]| [-x, y]));
    outline.extend(quarter.iter().skip(1).map(|&[x, y]| [-x, -y]));
    outline.extend(quarter.iter().rev().skip(1).take(n - 1).map(|&[x, y]| [x, -y]));
    let view = StarView {
        a,
        b,
        lambda_ab: lambda_ab(&p),
        quarter_area: quarter_area(&p),
        rho: rho_star_lens(&p),
        admissibility: admissibility_window(&p),
        outline,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CheegerView {
    points: Vec<CurvePoint>,
    argmin_eta: f64,
    min_c: f64,
    transition_eta: Option<f64>,
    quarter_area: f64,
    /// Boundary of the set attaining the smallest C on the grid.
    optimal_set: Vec<[f64; 2]>,
}

/// The Cheeger family of Λ_{a,b} on `points` geometrically spaced areas.
pub fn cheeger_json(a: f64, b: f64, points: usize, gaussian: bool) -> Result<String, String> {
    let p = StarParams::new(a, b).map_err(|e| e.to_string())?;
    if !(3..=2000).contains(&points) {
        return Err("points must lie in 3..=2000".into());
    }
    let model = if gaussian { WallModel::Gaussian } else { WallModel::Exact };
    let area = quarter_area(&p);
    let curve = cheeger_curve(&p, &log_grid(1e-5 * area, 0.999 * area, points), model).map_err(|e| e.to_string())?;
    let best = cheeger_set(&p, curve.argmin_eta, model).map_err(|e| e.to_string())?;
    let view = CheegerView {
        argmin_eta: curve.argmin_eta,
        min_c: curve.min_c,
        transition_eta: curve.transition_eta,
        quarter_area: area,
        optimal_set: best.closed_boundary(96),
        points: curve.points,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct DomainView {
    kind: &'static str,
    rho: f64,
    area: f64,
    /// Boundary pieces inside the unit square.
    pieces: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct CensusView {
    n1: u32,
    n2: u32,
    lambda: f64,
    excluded: usize,
    domains: Vec<DomainView>,
}

/// Neumann domains of 2cos(2πn₁x₁)cos(2πn₂x₂) on the unit torus.
pub fn separable_domains_json(n1: u32, n2: u32, resolution: usize) -> Result<String, String> {
    if resolution > MAX_RESOLUTION {
        return Err(format!("resolution is limited to {MAX_RESOLUTION} in the browser"));
    }
    let field = sample_separable(n1, n2, resolution).map_err(|e| e.to_string())?;
    let c = census(&field, &TraceConfig::default()).map_err(|e| e.to_string())?;
    let view = CensusView {
        n1,
        n2,
        lambda: c.lambda,
        excluded: c.excluded_count,
        domains: c
            .domains
            .iter()
            .map(|d| DomainView {
                kind: d.kind.as_str(),
                rho: d.rho,
                area: d.area,
                pieces: d.boundary.iter().flat_map(|l| l.wrapped_pieces()).collect(),
            })
            .collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn star_domain(a: f64, b: f64, samples: usize) -> Result<String, JsValue> {
    star_domain_json(a, b, samples).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn cheeger(a: f64, b: f64, points: usize, gaussian: bool) -> Result<String, JsValue> {
    cheeger_json(a, b, points, gaussian).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn separable_domains(n1: u32, n2: u32, resolution: usize) -> Result<String, JsValue> {
    separable_domains_json(n1, n2, resolution).map_err(|e| JsValue::from_str(&e))
}
