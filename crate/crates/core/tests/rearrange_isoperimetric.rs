use std::f64::consts::{FRAC_PI_4, PI};

use neumann_atlas::isoperimetric::{
    arc_minimizer, arc_minimizer_with, cheeger_curve, cheeger_set, cos_power_margin, log_grid, shoelace, Branch,
    WallModel,
};
use neumann_atlas::rearrange::{
    gradient_inequality_check, level_profile, level_profile_at, matching_sector, norm_sq, perimeter_inequality_check,
    rearrange_to_sector, sample_quarter, sample_sector, separable_h_profile, BumpFunction,
};
use neumann_atlas::stardomain::{quarter_area, SectorParams, StarParams};
use proptest::prelude::*;

fn quarter() -> StarParams {
    StarParams::new(1.0, 0.3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rearrangement_preserves_order(seed in 0u64..1000, scale in 1.0..3.0f64, lift in 0.0..0.5f64) {
        let p = quarter();
        let bump = BumpFunction::random(&p, seed);
        let small = sample_quarter(&p, 60, 30, |x| bump.eval(x));
        let large = sample_quarter(&p, 60, 30, |x| scale * bump.eval(x) + lift * separable_h_profile(&p)(x));
        let top = large.values.iter().copied().fold(0.0, f64::max);
        let thresholds: Vec<f64> = (0..64).map(|k| top * k as f64 / 64.0).collect();
        let (ps, pl) = (level_profile_at(&small, &thresholds).unwrap(), level_profile_at(&large, &thresholds).unwrap());
        let s = matching_sector(&ps, 0.2 * PI).unwrap();
        let (rs, rl) = (rearrange_to_sector(&ps, &s).unwrap(), rearrange_to_sector(&pl, &s).unwrap());
        for k in 0..=100 {
            let r = s.radius * k as f64 / 100.0;
            prop_assert!(rs.value(r) <= rl.value(r) + 1e-12);
        }
    }

    #[test]
    fn rearranged_function_is_nonincreasing(seed in 0u64..1000, alpha in 0.05..0.95f64) {
        let p = quarter();
        let bump = BumpFunction::random(&p, seed);
        let f = sample_quarter(&p, 60, 30, |x| bump.eval(x));
        let profile = level_profile(&f, 128).unwrap();
        let star = rearrange_to_sector(&profile, &matching_sector(&profile, alpha * PI).unwrap()).unwrap();
        prop_assert!(star.radii.windows(2).all(|w| w[0] >= w[1]));
        let mut last = f64::INFINITY;
        for k in 0..=200 {
            let v = star.value(star.sector.radius * k as f64 / 200.0);
            prop_assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn constants_rearrange_to_constants(c in 0.01..10.0f64) {
        let p = quarter();
        let f = sample_quarter(&p, 20, 10, |_| c);
        let profile = level_profile(&f, 32).unwrap();
        let star = rearrange_to_sector(&profile, &matching_sector(&profile, 0.3 * PI).unwrap()).unwrap();
        for k in 0..10 {
            let r = star.sector.radius * k as f64 / 10.0;
            prop_assert!((star.value(r) - c).abs() <= 1e-12 * c);
        }
    }

    #[test]
    fn l2_norm_is_preserved(seed in 0u64..1000) {
        let p = quarter();
        let bump = BumpFunction::random(&p, seed);
        let f = sample_quarter(&p, 80, 40, |x| bump.eval(x));
        let profile = level_profile(&f, 256).unwrap();
        let star = rearrange_to_sector(&profile, &matching_sector(&profile, 0.2 * PI).unwrap()).unwrap();
        let (a, b) = (norm_sq(&f, |t| t), star.norm_sq(|t| t));
        prop_assert!((a - b).abs() <= 5e-3 * a, "{} vs {}", a, b);
    }
}

#[test]
fn radial_functions_are_their_own_rearrangement() {
    let s = SectorParams::new(0.3 * PI, 2.0).unwrap();
    let g = |r: f64| 1.0 - (r / 2.0).powi(2);
    let f = sample_sector(&s, 200, 40, g);
    let profile = level_profile(&f, 512).unwrap();
    let star = rearrange_to_sector(&profile, &matching_sector(&profile, s.alpha).unwrap()).unwrap();
    for k in 0..=40 {
        let r = 2.0 * k as f64 / 40.0;
        assert!((star.value(r) - g(r)).abs() < 2e-3, "r = {r}: {} vs {}", star.value(r), g(r));
    }
}

#[test]
fn dirichlet_integral_drops_for_a_narrow_sector() {
    let p = quarter();
    let f = sample_quarter(&p, 160, 80, separable_h_profile(&p));
    let check = gradient_inequality_check(&f, 0.2 * PI, 512).unwrap();
    assert!(check.holds, "{} > {}", check.lhs, check.rhs);
}

#[test]
fn wide_sectors_break_the_perimeter_inequality() {
    let p = quarter();
    let f = sample_quarter(&p, 160, 80, separable_h_profile(&p));
    let thresholds: Vec<f64> = (0..40).map(|k| k as f64 / 40.0).collect();
    let narrow = perimeter_inequality_check(&f, &thresholds, 0.2 * PI).unwrap();
    let wide = perimeter_inequality_check(&f, &thresholds, 0.9 * PI).unwrap();
    assert!(wide.fraction_holding < 1.0);
    assert!(narrow.fraction_holding >= wide.fraction_holding);
}

fn thin() -> StarParams {
    StarParams::new(1.0, 0.05).unwrap()
}

#[test]
fn arc_sets_meet_the_walls_correctly_and_have_the_right_area() {
    let p = thin();
    let area = quarter_area(&p);
    for eta in log_grid(1e-6 * area, 0.3 * area, 12) {
        let s = arc_minimizer(&p, eta).unwrap();
        assert!(s.wall_residual < 1e-6 && s.foot_residual < 1e-6, "eta = {eta}");
        let enclosed = shoelace(&s.closed_boundary(4000));
        assert!((enclosed - eta).abs() < 1e-6 * eta + 1e-8 * area, "eta = {eta}: {enclosed}");
    }
}

#[test]
fn length_grows_like_the_arc_angle() {
    let p = thin();
    let area = quarter_area(&p);
    for eta in log_grid(1e-5 * area, 0.2 * area, 6) {
        let d = 1e-5 * eta;
        let len2 = |e: f64| arc_minimizer(&p, e).unwrap().boundary_h_length().powi(2);
        let slope = (len2(eta + d) - len2(eta - d)) / (2.0 * d);
        let s = arc_minimizer(&p, eta).unwrap();
        assert!((slope - 2.0 * s.phi).abs() < 1e-4 * 2.0 * s.phi, "eta = {eta}: {slope} vs {}", 2.0 * s.phi);
    }
}

#[test]
fn f_stays_above_its_infimum_and_approaches_it() {
    let p = thin();
    let area = quarter_area(&p);
    let fs: Vec<f64> = log_grid(1e-7 * area, 0.3 * area, 30).iter().map(|&e| arc_minimizer(&p, e).unwrap().f()).collect();
    assert!(fs.iter().all(|&f| f > FRAC_PI_4));
    assert!(fs.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    assert!(fs[0] - FRAC_PI_4 < 1e-2);
}

#[test]
fn cheeger_family_switches_to_the_floor_branch() {
    let p = thin();
    let area = quarter_area(&p);
    let curve = cheeger_curve(&p, &log_grid(1e-4 * area, 0.999 * area, 60), WallModel::Exact).unwrap();
    let t = curve.transition_eta.unwrap();
    for pt in &curve.points {
        assert_eq!(pt.branch, if pt.eta <= t { Branch::Wedge } else { Branch::Floor });
    }
    let big = cheeger_set(&p, 0.9 * area, WallModel::Exact).unwrap();
    let enclosed = shoelace(&big.closed_boundary(4000));
    assert!((enclosed - big.eta).abs() < 1e-6 * big.eta);
}

#[test]
fn cos_power_margin_is_nonnegative() {
    for alpha in 1..=64 {
        assert!(cos_power_margin(alpha as f64, 2001) >= -1e-14, "alpha = {alpha}");
    }
}

#[test]
fn gaussian_wall_agrees_with_the_exact_wall() {
    let p = thin();
    let area = quarter_area(&p);
    for eta in log_grid(1e-5 * area, 0.1 * area, 8) {
        let exact = arc_minimizer_with(&p, eta, WallModel::Exact).unwrap().f();
        let gauss = arc_minimizer_with(&p, eta, WallModel::Gaussian).unwrap().f();
        assert!((exact - gauss).abs() < 1e-2 * exact, "eta = {eta}: {exact} vs {gauss}");
    }
}
