use cns_core::gamma::{compute_gamma, GammaConfig};
use cns_core::rng::root_rng;
use cns_core::solvers::Scheme;
use cns_core::spectral::build_band_map;
use cns_core::{GaussianMixtureOracle, GridShape};

#[test]
fn doubling_batches_stays_within_error() {
    let shape = GridShape::square(16);
    let oracle = GaussianMixtureOracle::radial_power_law(shape, 8, 0.1, -1.0, 2.0, &mut root_rng(12)).unwrap();
    let map = build_band_map(shape, 6).unwrap();
    let cfg = |batches| GammaConfig { steps: 40, batches, batch_size: 32, seed: 3, scheme: Scheme::OdeEuler };
    let a = compute_gamma(&oracle, &cfg(2), &map, "m").unwrap();
    let b = compute_gamma(&oracle, &cfg(4), &map, "m").unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..a.matrix.rows() {
        for f in 0..6 {
            let d = (a.matrix.values[k][f] - b.matrix.values[k][f]).abs();
            // nested runs: the gap is half the difference of two disjoint halves
            let se = a.std_error[k][f].max(b.std_error[k][f]);
            if se > 0.0 {
                worst = worst.max(d / se);
            } else {
                assert!(d < 1e-12);
            }
        }
    }
    assert!(worst < 4.0, "worst normalized gap {worst}");
}
