use neumann_atlas::morse::{find_critical_points, torus_distance, CriticalKind, CriticalSet};
use neumann_atlas::tracer::{
    assemble_domains, census, distance_to_polyline, integrate_flow, trace_all_lines, DomainCensus, Polyline, TraceConfig,
};
use neumann_atlas::wavefield::{sample_random_wave, sample_separable, ScalarField, WaveSpec};

fn lifted_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    torus_distance([a[0].rem_euclid(1.0), a[1].rem_euclid(1.0)], [b[0].rem_euclid(1.0), b[1].rem_euclid(1.0)])
}

/// Backward flow from `start` towards `saddle`, stopped 10⁻³ from it, near
/// an extremum, or after `max_arc`.
fn reverse_path(
    field: &ScalarField,
    crit: &CriticalSet,
    start: [f64; 2],
    sigma: f64,
    saddle: [f64; 2],
    max_arc: f64,
) -> Polyline {
    let cfg = TraceConfig { escape_length: max_arc, ..TraceConfig::default() };
    let stop = |x: [f64; 2], _: f64| {
        lifted_distance(x, saddle) < 1e-3
            || crit.points.iter().any(|p| p.kind != CriticalKind::Saddle && lifted_distance(x, p.position) < 1e-3)
    };
    integrate_flow(&field.evaluator, start, sigma, field.wavenumber(), &cfg, |_| f64::INFINITY, stop).polyline
}

/// Integrates back from the midpoint of every line and records the largest
/// distance between the reversed path and the traced line, up to 10⁻³ from
/// the saddle. Closer in, the hyperbolic flow turns any transverse offset δ
/// into a miss distance of order √δ, which says nothing about the tracer.
///
/// Backward flow amplifies transverse offsets. With the tracer's local
/// tolerance of 10⁻¹⁰, an amplification above 10⁵ can turn correct tracing
/// into a 10⁻⁵ deviation. Lines where a 10⁻⁹ offset at the midpoint grows
/// beyond 10⁻⁴ are therefore only counted.
fn reversal(field: &ScalarField) -> (f64, usize, usize) {
    let cfg = TraceConfig::default();
    let crit = find_critical_points(field).unwrap();
    let (mut worst, mut skipped, mut total) = (0.0f64, 0, 0);
    for line in trace_all_lines(field, &crit, &cfg).into_iter().map(Result::unwrap) {
        total += 1;
        let verts = &line.polyline.vertices;
        let n = verts.len();
        let saddle = crit.points[line.saddle].position;
        let start = verts[n / 2];
        let to_mid: f64 = verts[..=n / 2].windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
        let sigma = if line.ascending { -1.0 } else { 1.0 };
        let path = reverse_path(field, &crit, start, sigma, saddle, 1.5 * to_mid);

        let g = field.evaluator.gradient(start);
        let gn = g[0].hypot(g[1]);
        let nudged = [start[0] - 1e-9 * g[1] / gn, start[1] + 1e-9 * g[0] / gn];
        let spread = reverse_path(field, &crit, nudged, sigma, saddle, 1.5 * to_mid)
            .vertices
            .iter()
            .filter(|&&x| lifted_distance(x, saddle) >= 1e-3)
            .map(|&x| distance_to_polyline(x, &path))
            .fold(0.0, f64::max);
        if spread > 1e-4 {
            skipped += 1;
            continue;
        }
        assert!(lifted_distance(path.last(), saddle) < 1e-3, "reversed flow missed the saddle");
        let dev = path.vertices.iter().map(|&x| distance_to_polyline(x, &line.polyline)).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    (worst, skipped, total)
}

#[test]
fn reversed_flow_returns_to_the_saddle() {
    let (gap, skipped, _) = reversal(&sample_separable(1, 2, 256).unwrap());
    assert_eq!(skipped, 0);
    assert!(gap < 1e-5, "separable gap {gap:e}");
    for seed in [1, 2] {
        let (gap, skipped, total) = reversal(&sample_random_wave(&WaveSpec::gaussian(25, seed).unwrap(), 256).unwrap());
        assert!(gap < 1e-5, "seed {seed}: gap {gap:e}");
        eprintln!("seed {seed}: deviation {gap:e}, {skipped} of {total} lines skipped");
        assert!(skipped * 5 < total, "seed {seed}: {skipped} of {total} lines skipped");
    }
}

fn by_corners(c: &DomainCensus) -> Vec<((usize, usize, [usize; 2]), f64, f64)> {
    let mut v: Vec<_> = c
        .domains
        .iter()
        .map(|d| {
            let mut s = d.corners.saddles;
            s.sort();
            ((d.corners.maximum, d.corners.minimum, s), d.area, d.perimeter)
        })
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

#[test]
fn halving_the_step_changes_geometry_very_little() {
    for seed in [3, 7] {
        let field = sample_random_wave(&WaveSpec::gaussian(25, seed).unwrap(), 256).unwrap();
        let crit = find_critical_points(&field).unwrap();
        let cfg = TraceConfig::default();
        let a = by_corners(&assemble_domains(&field, &crit, &cfg));
        let b = by_corners(&assemble_domains(&field, &crit, &cfg.refined()));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-4 * x.1, "area {} vs {}", x.1, y.1);
            assert!((x.2 - y.2).abs() < 1e-4 * x.2, "perimeter {} vs {}", x.2, y.2);
        }
    }
}

fn sorted_rho(c: &DomainCensus) -> Vec<f64> {
    let mut r: Vec<f64> = c.domains.iter().map(|d| d.rho).collect();
    r.sort_by(f64::total_cmp);
    r
}

#[test]
fn separable_rho_depends_only_on_the_ratio() {
    let cfg = TraceConfig::default();
    let base = census(&sample_separable(1, 2, 256).unwrap(), &cfg).unwrap();
    let doubled = census(&sample_separable(2, 4, 256).unwrap(), &cfg).unwrap();
    let (r1, r2) = (sorted_rho(&base), sorted_rho(&doubled));
    assert_eq!(4 * r1.len(), r2.len());
    for (k, r) in r2.iter().enumerate() {
        assert!((r - r1[k / 4]).abs() < 1e-6, "{r} vs {}", r1[k / 4]);
    }
}

#[test]
fn domains_tile_the_torus() {
    let field = sample_random_wave(&WaveSpec::gaussian(13, 5).unwrap(), 256).unwrap();
    let c = census(&field, &TraceConfig::default()).unwrap();
    assert_eq!(c.excluded_count, 0);
    assert!((c.total_area() - 1.0).abs() < 1e-6, "total area {}", c.total_area());
    for d in &c.domains {
        assert!(d.area > 0.0);
        assert!((d.rho - d.area * field.lambda.sqrt() / d.perimeter).abs() < 1e-12);
    }
}
