use std::f64::consts::PI;

use neumann_atlas::morse::find_critical_points;
use neumann_atlas::stardomain::{gamma_boundary, rho_star_lens, StarParams};
use neumann_atlas::tracer::{
    assemble_domains, hausdorff_distance, trace_all_lines, DomainKind, Polyline, TraceConfig,
};
use neumann_atlas::wavefield::sample_separable;

#[test]
fn diamond_census() {
    let field = sample_separable(1, 1, 512).unwrap();
    let crit = find_critical_points(&field).unwrap();
    assert_eq!(crit.counts, (2, 2, 4));
    let census = assemble_domains(&field, &crit, &TraceConfig::default());
    assert_eq!(census.domains.len(), 8, "{census:?}");
    assert_eq!(census.excluded_count, 0);
    assert_eq!(census.count(DomainKind::Star), 4);
    assert_eq!(census.count(DomainKind::Lens), 4);
    assert!((census.total_area() - 1.0).abs() < 1e-3);
    for d in &census.domains {
        assert!((d.rho - PI / 4.0).abs() < 1e-4, "rho {}", d.rho);
    }
}

/// The analytic Neumann line from the saddle at `s` to the extremum at `e`
/// (lifted), sampled densely.
fn analytic_line(p: &StarParams, s: [f64; 2], e: [f64; 2], along_x1: bool) -> Polyline {
    let n = 4000;
    let (u0, v0, du, dv) = if along_x1 { (s[0], e[1], e[0] - s[0], s[1] - e[1]) } else { (s[1], e[0], e[1] - s[1], s[0] - e[0]) };
    let verts = (0..=n)
        .map(|i| {
            let t = du * i as f64 / n as f64;
            let w = v0 + dv.signum() * gamma_boundary(p, t.abs());
            if along_x1 { [u0 + t, w] } else { [w, u0 + t] }
        })
        .collect();
    Polyline::new(verts)
}

#[test]
fn traced_lines_follow_the_closed_form() {
    let field = sample_separable(1, 2, 256).unwrap();
    let crit = find_critical_points(&field).unwrap();
    assert_eq!(crit.counts, (4, 4, 8));
    let p = StarParams::from_modes(1, 2).unwrap();
    let lines = trace_all_lines(&field, &crit, &TraceConfig::default());
    let mut worst: f64 = 0.0;
    for l in lines {
        let l = l.unwrap();
        let s = l.polyline.first();
        let e = l.polyline.last();
        // Lines run from the saddle to an extremum a = 1/4 away in x1 and
        // b = 1/8 away in x2.
        assert!(((e[0] - s[0]).abs() - 0.25).abs() < 1e-12);
        assert!(((e[1] - s[1]).abs() - 0.125).abs() < 1e-12);
        let reference = analytic_line(&p, s, e, true);
        worst = worst.max(hausdorff_distance(&l.polyline, &reference));
    }
    assert!(worst < 1e-6, "Hausdorff {worst:e}");
}

#[test]
fn rectangular_census_matches_closed_form_rho() {
    let field = sample_separable(1, 2, 256).unwrap();
    let crit = find_critical_points(&field).unwrap();
    let census = assemble_domains(&field, &crit, &TraceConfig::default());
    assert_eq!(census.domains.len(), 16);
    let pair = rho_star_lens(&StarParams::from_modes(1, 2).unwrap());
    for d in &census.domains {
        let expected = match d.kind {
            DomainKind::Star => pair.rho_star,
            DomainKind::Lens => pair.rho_lens,
            DomainKind::Wedge => panic!("separable fields have no wedge domains"),
        };
        assert!((d.rho - expected).abs() < 1e-5, "{:?} {} vs {}", d.kind, d.rho, expected);
    }
    assert_eq!(census.count(DomainKind::Star), 8);
}
