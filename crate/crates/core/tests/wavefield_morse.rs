use neumann_atlas::morse::{find_critical_points, find_critical_points_with_scan, refine_critical_point, torus_distance, CriticalKind};
use neumann_atlas::wavefield::{enumerate_lattice, sample_random_wave, sample_separable, FieldDump, WaveSpec};
use proptest::prelude::*;

const ENERGIES: [u64; 6] = [5, 13, 25, 50, 65, 85];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_waves_are_periodic(e in prop::sample::select(ENERGIES.to_vec()), seed in 0u64..1000, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let f = sample_random_wave(&WaveSpec::gaussian(e, seed).unwrap(), 96).unwrap().evaluator;
        let v = f.value([x, y]);
        let scale = 1.0 + v.abs();
        prop_assert!((f.value([x + 1.0, y]) - v).abs() < 1e-12 * scale);
        prop_assert!((f.value([x, y - 1.0]) - v).abs() < 1e-12 * scale);
        prop_assert!((f.value([x + 3.0, y + 2.0]) - v).abs() < 1e-11 * scale);
    }

    #[test]
    fn same_seed_gives_identical_samples(e in prop::sample::select(ENERGIES.to_vec()), seed in any::<u64>()) {
        let a = sample_random_wave(&WaveSpec::gaussian(e, seed).unwrap(), 96).unwrap();
        let b = sample_random_wave(&WaveSpec::gaussian(e, seed).unwrap(), 96).unwrap();
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn lattice_points_have_the_right_energy(e in 1u64..2000) {
        for m in enumerate_lattice(e) {
            prop_assert_eq!(m.energy() as u64, e);
        }
    }
}

#[test]
fn dump_round_trips_bit_exactly() {
    let f = sample_random_wave(&WaveSpec::gaussian(25, 11).unwrap(), 48).unwrap();
    let d = FieldDump::from_csv(&f.to_csv()).unwrap();
    assert_eq!(d.n, 48);
    assert_eq!(d.seed, Some(11));
    assert_eq!(d.lambda.to_bits(), f.lambda.to_bits());
    assert!(d.values.iter().zip(&f.values).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn discrete_laplacian_converges_at_second_order() {
    let spec = WaveSpec::gaussian(13, 4).unwrap();
    let err = |n: usize| {
        let f = sample_random_wave(&spec, n).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((f.discrete_laplacian(i, j) + f.lambda * f.value_at(i, j)).abs());
            }
        }
        worst / (f.lambda * f.max_abs())
    };
    let (e1, e2, e3) = (err(64), err(128), err(256));
    let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
    assert!(o1 > 1.9 && o2 > 1.9, "orders {o1} {o2}");
}

#[test]
fn euler_relation_for_random_waves() {
    for seed in 0..8 {
        let f = sample_random_wave(&WaveSpec::gaussian(65, seed).unwrap(), 256).unwrap();
        let c = find_critical_points(&f).unwrap();
        assert_eq!(c.counts.0 + c.counts.1, c.counts.2);
        for p in &c.points {
            let [l0, l1] = p.hessian_eigs;
            let ok = match p.kind {
                CriticalKind::Maximum => l0 < 0.0 && l1 < 0.0,
                CriticalKind::Minimum => l0 > 0.0 && l1 > 0.0,
                CriticalKind::Saddle => l0 * l1 < 0.0,
            };
            assert!(ok, "{p:?}");
        }
    }
}

#[test]
fn refinement_is_idempotent() {
    let f = sample_random_wave(&WaveSpec::gaussian(25, 2).unwrap(), 256).unwrap();
    let c = find_critical_points(&f).unwrap();
    for p in &c.points {
        let q = refine_critical_point(&f, p.position).unwrap();
        assert!(torus_distance(p.position, q.position) < 1e-10);
        assert_eq!(p.kind, q.kind);
    }
}

#[test]
fn scan_doubling_keeps_the_critical_set() {
    for seed in [0, 5, 9] {
        let f = sample_random_wave(&WaveSpec::gaussian(50, seed).unwrap(), 256).unwrap();
        let a = find_critical_points_with_scan(&f, 256).unwrap();
        let b = find_critical_points_with_scan(&f, 512).unwrap();
        assert_eq!(a.counts, b.counts);
        for p in &a.points {
            let d = b.points.iter().map(|q| torus_distance(p.position, q.position)).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "seed {seed}: moved by {d}");
        }
    }
}

#[test]
fn separable_critical_points_are_on_the_half_lattice() {
    let f = sample_separable(2, 3, 256).unwrap();
    let c = find_critical_points(&f).unwrap();
    // Maxima and minima at (i/4, j/6), saddles at odd multiples of 1/8, 1/12.
    assert_eq!(c.counts, (12, 12, 24));
    for p in &c.points {
        let (u, v) = (p.position[0] * 8.0, p.position[1] * 12.0);
        assert!((u - u.round()).abs() < 1e-8 && (v - v.round()).abs() < 1e-8, "{:?}", p.position);
    }
}
