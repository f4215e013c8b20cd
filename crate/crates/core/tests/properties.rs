mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use qfi_imaging::fisher::{
    self, classical_fidelity, detection_probabilities, generator_moments, overlap_matrix,
    quantum_fidelity,
};
use qfi_imaging::geometry::{
    build_amplitude_matrix, displace, AmplitudeMatrix, Collector, GeneralizedCoordinate, Mode,
    Parameter, Scenario, SourcePoint,
};
use qfi_imaging::interferometer::{
    default_design_step, saturation_report, synthesize_optimal, Interferometer, Provenance,
};
use qfi_imaging::linalg::{unitarity_residual, CMatrix};
use rand::Rng;

fn mode_of(exact: bool) -> Mode {
    if exact {
        Mode::Exact
    } else {
        Mode::Paraxial
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn displaced(sc: &Scenario, a: &GeneralizedCoordinate, step: f64) -> AmplitudeMatrix {
    build_amplitude_matrix(&displace(sc, a, step).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn columns_carry_source_weights(seed in any::<u64>(), exact in any::<bool>(), n_s in 1usize..5, extra in 0usize..5) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), n_s, n_s + extra, true);
        let c = build_amplitude_matrix(&rs.scenario).unwrap();
        for (s, src) in rs.scenario.sources().iter().enumerate() {
            prop_assert!((c.matrix().column(s).norm_squared() - src.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn displace_round_trip(seed in any::<u64>(), n_s in 1usize..5, eps in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, Mode::Paraxial, n_s, n_s + 1, false);
        let a = &rs.param.direction;
        let back = displace(&displace(&rs.scenario, a, eps).unwrap(), a, -eps).unwrap();
        for (p, q) in rs.scenario.sources().iter().zip(back.sources()) {
            for (x, y) in [(p.x, q.x), (p.y, q.y), (p.z, q.z)] {
                prop_assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn displace_round_trip_is_bitwise_for_dyadic_values(
        xs in prop::collection::vec(-64i32..64, 6),
        k in -4i32..4,
    ) {
        let pts: Vec<[f64; 3]> = xs.chunks(3).map(|c| [c[0] as f64 / 8.0, c[1] as f64 / 8.0, c[2] as f64 / 8.0]).collect();
        let sc = Scenario::uniform(Mode::Paraxial, 1.0, 100.0, &pts, vec![Collector::new(1.0, 0.0), Collector::new(-1.0, 0.0)]).unwrap();
        let a = GeneralizedCoordinate::new(vec![0.5, 0.5, 0.0, 0.5, 0.0, 0.5]).unwrap();
        let eps = 2f64.powi(k);
        let back = displace(&displace(&sc, &a, eps).unwrap(), &a, -eps).unwrap();
        prop_assert_eq!(sc.sources(), back.sources());
    }

    #[test]
    fn fidelity_bounds(seed in any::<u64>(), exact in any::<bool>(), n_s in 1usize..5, n_c in 1usize..9, step in 0.0f64..3.0) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), n_s, n_c, true);
        let c = build_amplitude_matrix(&rs.scenario).unwrap();
        let c2 = displaced(&rs.scenario, &rs.param.direction, step);
        let f = quantum_fidelity(&overlap_matrix(&c, &c2).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f), "{}", f);
        let f0 = quantum_fidelity(&overlap_matrix(&c, &c).unwrap()).unwrap();
        prop_assert!((f0 - 1.0).abs() < 1e-12, "{}", f0);
    }

    #[test]
    fn global_phase_invariance(seed in any::<u64>(), exact in any::<bool>(), n_s in 1usize..5, n_c in 2usize..9, chi in -6.3f64..6.3) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), n_s, n_c, true);
        let c = build_amplitude_matrix(&rs.scenario).unwrap();
        let c2 = displaced(&rs.scenario, &rs.param.direction, 0.3);
        let col = rng.random_range(0..n_s);
        let mut m = c.matrix().clone();
        let phase = Complex64::from_polar(1.0, chi);
        m.column_mut(col).iter_mut().for_each(|z| *z *= phase);
        let rotated = AmplitudeMatrix::from_matrix(m);

        let f = quantum_fidelity(&overlap_matrix(&c, &c2).unwrap()).unwrap();
        let fr = quantum_fidelity(&overlap_matrix(&rotated, &c2).unwrap()).unwrap();
        prop_assert!((f - fr).abs() < 1e-12);
        let r = common::random_unitary(n_c, &mut rng);
        let p = detection_probabilities(&c, &r).unwrap();
        let pr = detection_probabilities(&rotated, &r).unwrap();
        for (a, b) in p.iter().zip(&pr) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cauchy_schwarz_and_information_ordering(seed in any::<u64>(), exact in any::<bool>(), n_s in 1usize..4, n_c in 2usize..7) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), n_s, n_c, true);
        let c = build_amplitude_matrix(&rs.scenario).unwrap();
        let c2 = displaced(&rs.scenario, &rs.param.direction, rng.random_range(0.01..1.0));
        let f = quantum_fidelity(&overlap_matrix(&c, &c2).unwrap()).unwrap();
        let q = fisher::qfi(&rs.scenario, &rs.param).unwrap().qfi.unwrap();
        prop_assert!(q >= 0.0);
        for _ in 0..5 {
            let r = common::random_unitary(n_c, &mut rng);
            prop_assert!(classical_fidelity(&c, &c2, &r).unwrap() >= f - 1e-10);
            let cfi = fisher::cfi(&rs.scenario, &rs.param, &r).unwrap();
            if cfi.divergent_ports.is_empty() {
                prop_assert!(cfi.cfi.unwrap() <= q * (1.0 + 1e-6) + 1e-15, "{} > {}", cfi.cfi.unwrap(), q);
            }
        }
    }

    #[test]
    fn collector_relabeling(seed in any::<u64>(), exact in any::<bool>(), n_s in 1usize..4, n_c in 2usize..7) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), n_s, n_c, true);
        let mut perm: Vec<usize> = (0..n_c).collect();
        for i in (1..n_c).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled = rs.scenario.with_collectors(perm.iter().map(|&j| rs.scenario.collectors()[j]).collect()).unwrap();
        let r = common::random_unitary(n_c, &mut rng);
        // Column j of the permuted R acts on new collector j, i.e. old collector perm[j].
        let rp = Interferometer::new(
            CMatrix::from_fn(n_c, n_c, |q, j| r.matrix()[(q, perm[j])]),
            Provenance::UserSupplied,
        ).unwrap();

        let a = fisher::fisher_report(&rs.scenario, &rs.param, &r).unwrap();
        let b = fisher::fisher_report(&shuffled, &rs.param, &rp).unwrap();
        prop_assert!(rel(b.qfi.unwrap(), a.qfi.unwrap()) < 1e-9 || a.qfi.unwrap() < 1e-15);
        prop_assert!(rel(b.cfi.unwrap(), a.cfi.unwrap()) < 1e-7 || a.cfi.unwrap() < 1e-15);

        let c = build_amplitude_matrix(&rs.scenario).unwrap();
        let c2 = displaced(&rs.scenario, &rs.param.direction, 0.4);
        let cs = build_amplitude_matrix(&shuffled).unwrap();
        let cs2 = displaced(&shuffled, &rs.param.direction, 0.4);
        let f = quantum_fidelity(&overlap_matrix(&c, &c2).unwrap()).unwrap();
        let fs = quantum_fidelity(&overlap_matrix(&cs, &cs2).unwrap()).unwrap();
        prop_assert!((f - fs).abs() < 1e-12);
        let fc = classical_fidelity(&c, &c2, &r).unwrap();
        let fcs = classical_fidelity(&cs, &cs2, &rp).unwrap();
        prop_assert!((fc - fcs).abs() < 1e-12);
    }

    #[test]
    fn single_source_qfi_is_four_covariance(seed in any::<u64>(), n_c in 2usize..10) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, Mode::Paraxial, 1, n_c, false);
        let sc = &rs.scenario;
        let sigma = generator_moments(sc.collectors(), sc.k(), sc.z0()).covariance;
        let a = rs.param.direction.components();
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                quad += a[i] * sigma[i][j] * a[j];
            }
        }
        let q = fisher::qfi(sc, &rs.param).unwrap().qfi.unwrap();
        prop_assert!(rel(q, 4.0 * quad) < 1e-4, "{} vs {}", q, 4.0 * quad);
    }

    #[test]
    fn synthesized_interferometer_structure(seed in any::<u64>(), exact in any::<bool>(), n_s in 1usize..5, extra in 0usize..4, weighted in any::<bool>()) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), n_s, n_s + extra, weighted);
        let rep = saturation_report(&rs.scenario, &rs.param, default_design_step(&rs.scenario)).unwrap();
        prop_assert!(rep.unitarity_residual < 1e-10);
        prop_assert!(rep.lower_residual_ra < 1e-10, "{}", rep.lower_residual_ra);
        prop_assert!(rep.upper_residual_rb < 1e-9, "{}", rep.upper_residual_rb);
        prop_assert!(rep.scalar_product_residual < 1e-10, "{}", rep.scalar_product_residual);
        prop_assert!(rep.diagonal_residual < 1e-9, "{}", rep.diagonal_residual);
        prop_assert!(rep.classical_fidelity >= rep.quantum_fidelity - 1e-10);
    }

    #[test]
    fn pure_state_synthesis_saturates(seed in any::<u64>(), exact in any::<bool>(), n_c in 1usize..8) {
        let mut rng = common::rng(seed);
        let rs = common::random_scenario(&mut rng, mode_of(exact), 1, n_c, false);
        let rep = saturation_report(&rs.scenario, &rs.param, default_design_step(&rs.scenario)).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.failures);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Source-dependent phase differences between collectors, exact against paraxial.
    #[test]
    fn paraxial_phase_consistency(seed in any::<u64>(), n_s in 1usize..4, n_c in 2usize..7, axial in any::<bool>()) {
        let mut rng = common::rng(seed);
        let z0 = 100.0;
        let scale = 1e-3 * z0;
        let sources: Vec<SourcePoint> = (0..n_s)
            .map(|_| SourcePoint::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
                if axial { rng.random_range(-scale..scale) } else { 0.0 },
                1.0,
            ))
            .collect();
        let max_z = sources.iter().map(|s| s.z.abs()).fold(0.0, f64::max);
        let collectors: Vec<Collector> = (0..n_c)
            .map(|_| Collector::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect();
        let exact = Scenario::new(Mode::Exact, 1.0, z0, sources.clone(), collectors.clone()).unwrap();
        let reference = Scenario::new(Mode::Exact, 1.0, z0, vec![SourcePoint::new(0.0, 0.0, 0.0, 1.0)], collectors).unwrap();
        let ce = build_amplitude_matrix(&exact).unwrap();
        let cr = build_amplitude_matrix(&reference).unwrap();
        let cp = build_amplitude_matrix(&exact.with_mode(Mode::Paraxial)).unwrap();

        let mut worst_diff: f64 = 0.0;
        let mut largest: f64 = 0.0;
        for s in 0..n_s {
            for j in 0..n_c {
                for l in (j + 1)..n_c {
                    let e = (ce.matrix()[(j, s)] * ce.matrix()[(l, s)].conj()).arg()
                        - (cr.matrix()[(j, 0)] * cr.matrix()[(l, 0)].conj()).arg();
                    let p = (cp.matrix()[(j, s)] * cp.matrix()[(l, s)].conj()).arg();
                    worst_diff = worst_diff.max((e - p).abs());
                    largest = largest.max(p.abs());
                }
            }
        }
        let err = worst_diff / largest;
        prop_assert!(err < 1e-4 + 2.5 * max_z / z0, "relative error {} with max |z| {}", err, max_z);
    }
}

#[test]
fn degenerate_direction_has_zero_qfi() {
    let sc = Scenario::uniform(
        Mode::Paraxial,
        1.0,
        100.0,
        &[[0.3, 0.2, 0.1]],
        vec![
            Collector::new(4.0, 0.0),
            Collector::new(-1.0, 0.0),
            Collector::new(2.5, 0.0),
        ],
    )
    .unwrap();
    let q = fisher::qfi(&sc, &Parameter::parse("source1-y", 1).unwrap()).unwrap();
    assert_eq!(q.qfi, Some(0.0));
    assert!(q.converged);
}

#[test]
fn symmetric_pairs_saturate_on_symmetric_arrays() {
    let mut rng = common::rng(99);
    for _ in 0..20 {
        let half: Vec<Collector> = (0..rng.random_range(1..=4))
            .map(|_| Collector::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)))
            .collect();
        let collectors: Vec<Collector> = half
            .iter()
            .flat_map(|c| [*c, Collector::new(-c.u, -c.v)])
            .collect();
        let dx = rng.random_range(0.05..1.0);
        let sc = Scenario::uniform(
            Mode::Paraxial,
            1.0,
            100.0,
            &[[dx / 2.0, 0.0, 0.0], [-dx / 2.0, 0.0, 0.0]],
            collectors,
        )
        .unwrap();
        let p = Parameter::parse("separation-x", 2).unwrap();
        let rep = saturation_report(&sc, &p, default_design_step(&sc)).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
    }
}

#[test]
fn two_collector_design_is_parameter_independent() {
    let sc = Scenario::uniform(
        Mode::Paraxial,
        1.0,
        100.0,
        &[[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]],
        vec![Collector::new(5.0, 0.0), Collector::new(-5.0, 0.0)],
    )
    .unwrap();
    let p = Parameter::parse("separation-x", 2).unwrap();
    let c = build_amplitude_matrix(&sc).unwrap();
    let mags = |step: f64| -> Vec<f64> {
        let r = synthesize_optimal(&c, &displaced(&sc, &p.direction, step)).unwrap();
        assert!(unitarity_residual(r.matrix()) < 1e-12);
        r.matrix().iter().map(|z| z.norm()).collect()
    };
    let (a, b) = (mags(1e-3), mags(1e-2));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn scenario_digest_round_trip() {
    let mut rng = common::rng(5);
    for exact in [false, true] {
        let rs = common::random_scenario(&mut rng, mode_of(exact), 3, 5, true);
        let json = rs.scenario.to_json_value();
        let back = Scenario::from_json_value(json).unwrap();
        let toml_back = Scenario::from_toml_str(&rs.scenario.to_toml_string()).unwrap();
        let q = fisher::qfi(&rs.scenario, &rs.param).unwrap().qfi.unwrap();
        for other in [&back, &toml_back] {
            assert_eq!(other.fingerprint(), rs.scenario.fingerprint());
            assert_eq!(
                fisher::qfi(other, &rs.param)
                    .unwrap()
                    .qfi
                    .unwrap()
                    .to_bits(),
                q.to_bits()
            );
        }
    }
}
