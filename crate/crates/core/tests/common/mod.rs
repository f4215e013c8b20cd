#![allow(dead_code)]

use num_complex::Complex64;
use qfi_imaging::geometry::{Collector, Mode, Parameter, Scenario, SourcePoint};
use qfi_imaging::linalg::{householder_triangularize, CMatrix};
use qfi_imaging::Interferometer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-distributed unitary: Householder QR of a complex Ginibre matrix with
/// a real positive triangular diagonal.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> Interferometer {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let q = householder_triangularize(&g, false).q;
    Interferometer::new(
        q.adjoint(),
        qfi_imaging::interferometer::Provenance::UserSupplied,
    )
    .unwrap()
}

pub struct RandomScenario {
    pub scenario: Scenario,
    pub param: Parameter,
}

/// Sources within `±source_extent`, collectors within `±collector_extent`,
/// `z0 = 100`, random weights when `weighted`.
pub fn random_scenario(
    rng: &mut impl Rng,
    mode: Mode,
    n_s: usize,
    n_c: usize,
    weighted: bool,
) -> RandomScenario {
    let k = rng.random_range(0.5..3.0);
    let sources: Vec<SourcePoint> = (0..n_s)
        .map(|_| {
            SourcePoint::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                if weighted {
                    rng.random_range(0.2..1.0)
                } else {
                    1.0
                },
            )
        })
        .collect();
    let collectors: Vec<Collector> = (0..n_c)
        .map(|_| Collector::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)))
        .collect();
    let scenario = Scenario::new(mode, k, 100.0, sources, collectors).unwrap();
    let dir: Vec<f64> = (0..3 * n_s)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let preset = dir
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let param = Parameter::parse(&preset, n_s).unwrap();
    RandomScenario { scenario, param }
}
