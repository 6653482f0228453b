//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured quantities and its runtime, then asserts the outcome.
//!
//! Run with `cargo test -p neumann-atlas --test acceptance -- --nocapture`
//! to see the lines.

use std::io::Write;
use std::f64::consts::{FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use neumann_atlas::isoperimetric::{arc_minimizer, cheeger_curve, log_grid, minimizer_curve, WallModel};
use neumann_atlas::morse::{find_critical_points, torus_distance, CriticalKind};
use neumann_atlas::rearrange::{
    level_profile, matching_sector, norm_sq, rearrange_to_sector, sample_quarter, superlevel_area,
    gradient_inequality_check, BumpFunction,
};
use neumann_atlas::special::{constants, gamma_area_constant};
use neumann_atlas::spectral::{ground_state_gap, solve_quarter, solve_sector, MixedProblem, SectorProblem, Side};
use neumann_atlas::stardomain::{gamma_boundary, lambda_ab, quarter_area, rho_star_lens, SectorParams, StarParams};
use neumann_atlas::tracer::{
    assemble_domains, census, hausdorff_distance, rho_statistics, trace_all_lines, DomainKind, Polyline,
    TraceConfig,
};
use neumann_atlas::wavefield::{sample_random_wave, sample_separable, WaveSpec};

fn report(n: u32, title: &str, pass: bool, detail: &str, elapsed: Duration, budget: Duration) -> bool {
    let within = elapsed <= budget;
    let ok = pass && within;
    // Written to the handle directly so the line shows even for passing tests.
    let _ = writeln!(
        std::io::stdout().lock(),
        "criterion {n:>2} {}: {title} | {detail} | {:.2?} (budget {:.0?}{})",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        budget,
        if within { "" } else { ", exceeded" }
    );
    ok
}

#[test]
fn criterion_01_bessel_constants() {
    let t = Instant::now();
    let k = constants();
    // Agreement to four decimals: |computed − quoted| < 10⁻⁴.
    let close = |x: f64, quoted: f64| (x - quoted).abs() < 1e-4;
    let pass = close(k.j0, 2.4048)
        && close(k.j1p, 1.8411)
        && close(k.rho_bound_ground(), 0.9206)
        && close(k.rho_bound_general(), 1.3019);
    let detail = format!(
        "j0={:.10} j1'={:.10} j1'/2={:.6} j1'/sqrt2={:.6}",
        k.j0,
        k.j1p,
        k.rho_bound_ground(),
        k.rho_bound_general()
    );
    assert!(report(1, "Bessel zeros and rho bounds", pass, &detail, t.elapsed(), Duration::from_secs(1)));
}

#[test]
fn criterion_02_area_constant() {
    let t = Instant::now();
    let adaptive = gamma_area_constant();
    // Independent rule: composite Simpson on [0, 7] (the tail is below 1e-21).
    let n = 40_000;
    let h = 7.0 / n as f64;
    let f = |x: f64| (-x * x).exp().asin();
    let simpson = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0
        * 4.0
        * std::f64::consts::SQRT_2
        / (PI * PI);
    let alpha_ratio = constants().alpha_min / PI;
    let pass = (adaptive - 0.6080).abs() <= 1e-4
        && (simpson - 0.6080).abs() <= 1e-4
        && (adaptive - simpson).abs() < 1e-10
        && (alpha_ratio - 0.1652).abs() <= 1e-3;
    let detail = format!("adaptive={adaptive:.12} simpson={simpson:.12} alpha_min/pi={alpha_ratio:.8}");
    assert!(report(2, "area constant by two quadratures", pass, &detail, t.elapsed(), Duration::from_secs(1)));
}

#[test]
fn criterion_03_area_asymptotics() {
    let t = Instant::now();
    let c = constants().gamma_area;
    let ks: Vec<i32> = (4..=10).collect();
    let errs: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let b = 2f64.powi(-k);
            let p = StarParams::new(1.0, b).unwrap();
            (quarter_area(&p) / (b * b) - c).abs()
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let pass = decreasing && min_order >= 1.0 - 1e-9;
    let detail = format!(
        "|A/b^2 - C| = {} ; orders = {}",
        errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
        orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(" ")
    );
    assert!(report(3, "quarter area / b^2 convergence", pass, &detail, t.elapsed(), Duration::from_secs(10)));
}

#[test]
fn criterion_04_separable_census() {
    let t = Instant::now();
    let field = sample_separable(1, 1, 512).unwrap();
    let crit = find_critical_points(&field).unwrap();
    let expected = [
        (CriticalKind::Maximum, [[0.0, 0.0], [0.5, 0.5]].to_vec()),
        (CriticalKind::Minimum, [[0.5, 0.0], [0.0, 0.5]].to_vec()),
        (CriticalKind::Saddle, [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]].to_vec()),
    ];
    let mut worst_position: f64 = 0.0;
    let mut positions_ok = true;
    for (kind, pts) in &expected {
        let found: Vec<[f64; 2]> = crit.of_kind(*kind).map(|(_, c)| c.position).collect();
        positions_ok &= found.len() == pts.len();
        for q in pts {
            let d = found.iter().map(|f| torus_distance(*f, *q)).fold(f64::INFINITY, f64::min);
            worst_position = worst_position.max(d);
        }
    }
    let census = assemble_domains(&field, &crit, &TraceConfig::default());
    let kinds_ok = census.count(DomainKind::Wedge) == 0;
    let rho_err = census.domains.iter().map(|d| (d.rho - FRAC_PI_4).abs()).fold(0.0, f64::max);
    let star_rho_ok = census.domains.iter().filter(|d| d.kind == DomainKind::Star).all(|d| (d.rho - FRAC_PI_4).abs() <= 1e-4);
    let pass = crit.counts == (2, 2, 4)
        && positions_ok
        && worst_position <= 1e-8
        && census.domains.len() == 8
        && kinds_ok
        && (census.total_area() - 1.0).abs() <= 1e-3
        && star_rho_ok;
    let detail = format!(
        "counts={:?} max position error={worst_position:.2e} domains={} (star {}, lens {}) area={:.8} max|rho-pi/4|={rho_err:.2e}",
        crit.counts,
        census.domains.len(),
        census.count(DomainKind::Star),
        census.count(DomainKind::Lens),
        census.total_area()
    );
    assert!(report(4, "separable n1=n2=1 census", pass, &detail, t.elapsed(), Duration::from_secs(30)));
}

#[test]
fn criterion_05_traced_flow_lines() {
    let t = Instant::now();
    let field = sample_separable(1, 2, 512).unwrap();
    let crit = find_critical_points(&field).unwrap();
    let p = StarParams::from_modes(1, 2).unwrap();
    let lines = trace_all_lines(&field, &crit, &TraceConfig::default());
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut all_ok = true;
    for l in lines {
        let Ok(l) = l else {
            all_ok = false;
            continue;
        };
        count += 1;
        let (s, e) = (l.polyline.first(), l.polyline.last());
        // g = ±π/2 flow lines: x2 − e2 = ±γ(x1 − e1) measured from the extremum.
        let n = 8000;
        let du = e[0] - s[0];
        let reference = Polyline::new(
            (0..=n)
                .map(|i| {
                    let d = du * i as f64 / n as f64;
                    [s[0] + d, e[1] + (s[1] - e[1]).signum() * gamma_boundary(&p, d.abs())]
                })
                .collect(),
        );
        worst = worst.max(hausdorff_distance(&l.polyline, &reference));
    }
    let pass = all_ok && count == 32 && worst <= 1e-5;
    let detail = format!("{count} lines, max Hausdorff distance {worst:.3e}");
    assert!(report(5, "(1,2) Neumann lines vs closed form", pass, &detail, t.elapsed(), Duration::from_secs(30)));
}

#[test]
fn criterion_06_random_wave_statistics() {
    let t = Instant::now();
    let realizations = 200u64;
    let mut censuses = Vec::new();
    let mut failed = 0;
    for seed in 0..realizations {
        let spec = WaveSpec::gaussian(65, seed).unwrap();
        let field = sample_random_wave(&spec, 512).unwrap();
        match census(&field, &TraceConfig::default()) {
            Ok(c) => censuses.push(c),
            Err(_) => failed += 1,
        }
    }
    let st = rho_statistics(&censuses);
    let kind = |k: DomainKind| &st.per_kind[&k];
    let all_types = DomainKind::ALL.iter().all(|&k| kind(k).total > 0);
    let overall = st.overall.exceed_ground;
    let lens = kind(DomainKind::Lens).exceed_ground;
    let wedge = kind(DomainKind::Wedge).exceed_ground;
    let pass = all_types && (0.15..=0.27).contains(&overall) && lens > wedge;
    let detail = format!(
        "{} fields ({} failed), {} domains ({} excluded); lens/wedge/star = {}/{}/{}; P(rho>j1'/2) overall={overall:.4} lens={lens:.4} wedge={wedge:.4} star={:.4}",
        censuses.len(),
        failed,
        st.overall.total,
        st.excluded,
        kind(DomainKind::Lens).total,
        kind(DomainKind::Wedge).total,
        kind(DomainKind::Star).total,
        kind(DomainKind::Star).exceed_ground
    );
    assert!(report(6, "E=65 random-wave rho statistics", pass, &detail, t.elapsed(), Duration::from_secs(20 * 60)));
}

#[test]
fn criterion_07_sector_oracle() {
    let t = Instant::now();
    let s = SectorParams::new(FRAC_PI_4, 1.0).unwrap();
    let r = solve_sector(&SectorProblem::new(s, 10_000).unwrap()).unwrap();
    let exact = constants().j0.powi(2);
    let coarse = (r.eigenvalue / exact - 1.0).abs();
    let ext = (r.extrapolated / exact - 1.0).abs();
    let pass = coarse <= 1e-2 && ext <= 1e-3;
    let detail = format!(
        "lambda={:.8} (rel err {coarse:.2e}), extrapolated={:.8} (rel err {ext:.2e}), j0^2={exact:.8}, {} cells",
        r.eigenvalue, r.extrapolated, r.n_cells
    );
    assert!(report(7, "mixed sector eigenvalue j0^2", pass, &detail, t.elapsed(), Duration::from_secs(120)));
}

const GAP_CELLS: usize = 20_000;

#[test]
fn criterion_08_ground_state_gap() {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for b in [0.05, 0.1, 0.2] {
        let p = StarParams::new(1.0, b).unwrap();
        let g = ground_state_gap(&p, GAP_CELLS).unwrap();
        let dev = (g.lambda_v.extrapolated / g.lambda_ab - 1.0).abs();
        let ok = dev <= 1e-2 && g.gap > 0.0 && g.gap > 3.0 * g.gap_error;
        pass &= ok;
        parts.push(format!(
            "b={b}: lambda_ab={:.6} lambda_v={:.6} (rel {dev:.1e}) lambda_h={:.6} gap={:.4} err={:.1e}",
            g.lambda_ab, g.lambda_v.extrapolated, g.lambda_h.extrapolated, g.gap, g.gap_error
        ));
    }
    assert!(report(8, "lambda_v = lambda_ab < lambda_h", pass, &parts.join("; "), t.elapsed(), Duration::from_secs(600)));
}

#[test]
fn criterion_09_rearrangement() {
    let t = Instant::now();
    let p = StarParams::new(1.0, 0.3).unwrap();
    let alpha = 0.2 * PI;
    let mut worst_measure: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let mut gradient_ok = 0;
    let n = 20u64;
    for seed in 0..n {
        let bump = BumpFunction::random(&p, seed);
        let f = sample_quarter(&p, 160, 80, |x| bump.eval(x));
        let profile = level_profile(&f, 512).unwrap();
        let s = matching_sector(&profile, alpha).unwrap();
        let star = rearrange_to_sector(&profile, &s).unwrap();
        // Equimeasurability on the threshold grid and halfway between.
        for k in 0..profile.thresholds.len() - 1 {
            let (t0, t1) = (profile.thresholds[k], profile.thresholds[k + 1]);
            for tt in [t0, 0.5 * (t0 + t1)] {
                let d = (star.superlevel_area(tt) - superlevel_area(&f, tt)).abs() / profile.total_area;
                worst_measure = worst_measure.max(d);
            }
        }
        let rhos: [fn(f64) -> f64; 3] = [|x| x, |x| x * x, |x| x.sqrt()];
        for rho in rhos {
            let (a, b) = (norm_sq(&f, rho), star.norm_sq(rho));
            worst_norm = worst_norm.max((a.sqrt() - b.sqrt()).abs() / a.sqrt());
        }
        if gradient_inequality_check(&f, alpha, 512).unwrap().holds {
            gradient_ok += 1;
        }
    }
    let pass = worst_measure <= 1e-3 && worst_norm <= 1e-3 && gradient_ok == n;
    let detail = format!(
        "{n} functions: max rel measure error {worst_measure:.2e}, max rel norm error {worst_norm:.2e}, Dirichlet inequality {gradient_ok}/{n}"
    );
    assert!(report(9, "rearrangement properties", pass, &detail, t.elapsed(), Duration::from_secs(300)));
}

#[test]
fn criterion_10_isoperimetric_infimum() {
    let t = Instant::now();
    let p = StarParams::new(1.0, 0.05).unwrap();
    let area = quarter_area(&p);
    let grid = log_grid(1e-6 * area, 0.3 * area, 200);
    let curve = minimizer_curve(&p, &grid, WallModel::Exact).unwrap();
    let min_f = curve.iter().map(|c| c.f).fold(f64::INFINITY, f64::min);
    let first = curve[0].f;
    let residual = grid
        .iter()
        .step_by(20)
        .map(|&eta| {
            let s = arc_minimizer(&p, eta).unwrap();
            s.wall_residual.max(s.foot_residual)
        })
        .fold(0.0, f64::max);
    let cheeger = cheeger_curve(&p, &log_grid(1e-4 * area, 0.999 * area, 200), WallModel::Exact).unwrap();
    let lambda0 = solve_quarter(&MixedProblem::new(p, Side::H, GAP_CELLS).unwrap()).unwrap().extrapolated;
    let pass = min_f > FRAC_PI_4
        && first - FRAC_PI_4 <= 1e-2
        && residual < 1e-6
        && cheeger.interior_minima() == 1
        && cheeger.min_c <= lambda0;
    let detail = format!(
        "min F - pi/4 = {:.3e}, F(eta_min) - pi/4 = {:.3e}, attachment residual {residual:.1e}; C: {} interior minimum, min C = {:.4} at eta = {:.4e} (transition {:.4e}), lambda_0 = {lambda0:.4}",
        min_f - FRAC_PI_4,
        first - FRAC_PI_4,
        cheeger.interior_minima(),
        cheeger.min_c,
        cheeger.argmin_eta,
        cheeger.transition_eta.unwrap_or(f64::NAN)
    );
    assert!(report(10, "isoperimetric infimum and Cheeger bound", pass, &detail, t.elapsed(), Duration::from_secs(300)));
}

#[test]
fn criterion_11_scaling() {
    let t = Instant::now();
    let p = StarParams::new(1.0, 0.3).unwrap();
    let cells = 4_000;
    let base_v = solve_quarter(&MixedProblem::new(p, Side::V, cells).unwrap()).unwrap();
    let base_h = solve_quarter(&MixedProblem::new(p, Side::H, cells).unwrap()).unwrap();
    let mut worst_eig: f64 = 0.0;
    let mut worst_area: f64 = 0.0;
    let mut worst_rho: f64 = 0.0;
    for g in [0.5, 2.0] {
        let q = p.scaled(g);
        let v = solve_quarter(&MixedProblem::new(q, Side::V, cells).unwrap()).unwrap();
        let h = solve_quarter(&MixedProblem::new(q, Side::H, cells).unwrap()).unwrap();
        let k = g.powi(-2);
        for (a, b) in [
            (lambda_ab(&q), lambda_ab(&p)),
            (v.eigenvalue, base_v.eigenvalue),
            (h.eigenvalue, base_h.eigenvalue),
            (v.extrapolated, base_v.extrapolated),
            (h.extrapolated, base_h.extrapolated),
        ] {
            worst_eig = worst_eig.max((a / (k * b) - 1.0).abs());
        }
        worst_area = worst_area.max((quarter_area(&q) / (g * g * quarter_area(&p)) - 1.0).abs());
        worst_rho = worst_rho.max((rho_star_lens(&q).rho_star - rho_star_lens(&p).rho_star).abs());
    }
    let pass = worst_eig <= 1e-8 && worst_area <= 1e-10 && worst_rho <= 1e-10;
    let detail = format!(
        "max rel eigenvalue deviation {worst_eig:.2e}, area {worst_area:.2e}, |delta rho_star| {worst_rho:.2e}"
    );
    assert!(report(11, "scaling law", pass, &detail, t.elapsed(), Duration::from_secs(600)));
}
