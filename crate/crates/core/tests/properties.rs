use cns_core::cns::{ablate_schedule, schedule_from_rows, AblationMode, RelaxationConfig};
use cns_core::noise::{color_noise, white_noise};
use cns_core::rng::root_rng;
use cns_core::spectral::{build_band_map, inverse_parts_with, psd};
use cns_core::{BandMap, BandScaleProfile, Field, GridShape, NormalizationMode};
use proptest::prelude::*;

fn shapes() -> impl Strategy<Value = (GridShape, usize)> {
    prop_oneof![
        Just((GridShape::square(4), 3)),
        Just((GridShape::square(8), 5)),
        Just((GridShape::new(9, 7, 1).unwrap(), 4)),
        Just((GridShape::new(6, 5, 2).unwrap(), 3)),
        Just((GridShape::square(32), 12)),
    ]
}

fn field_for(shape: GridShape, seed: u64) -> Field {
    white_noise(shape, &mut root_rng(seed))
}

fn map_and_field() -> impl Strategy<Value = (BandMap, Field)> {
    (shapes(), any::<u64>()).prop_map(|((shape, nb), seed)| (build_band_map(shape, nb).unwrap(), field_for(shape, seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projections_partition_the_field((map, x) in map_and_field()) {
        let mut sum = Field::zeros(x.shape());
        for b in 0..map.band_count() {
            sum.axpy(1.0, &cns_core::spectral::project_band(&x, b, &map).unwrap());
        }
        prop_assert!(sum.max_abs_diff(&x) < 1e-10 * x.max_abs().max(1.0));
        prop_assert_eq!(map.counts().iter().sum::<usize>(), x.shape().plane_len());
    }

    #[test]
    fn projections_are_real_and_idempotent((map, x) in map_and_field()) {
        let spec = map.forward(&x).unwrap();
        for b in 0..map.band_count() {
            let (re, im) = inverse_parts_with(map.fft(), &map.mask_spectrum(&spec, b).unwrap());
            prop_assert!(im.max_abs() < 1e-10 * x.max_abs());
            let twice = cns_core::spectral::project_band(&re, b, &map).unwrap();
            prop_assert!(twice.max_abs_diff(&re) < 1e-10 * x.max_abs());
        }
    }

    #[test]
    fn band_energies_obey_parseval((map, x) in map_and_field()) {
        let total: f64 = map.band_energies(&x).unwrap().iter().sum();
        prop_assert!((total - x.norm_sq()).abs() < 1e-10 * x.norm_sq());
    }

    #[test]
    fn analytic_coloring_is_linear(
        (map, w1) in map_and_field(),
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        raw in prop::collection::vec(0.01f64..5.0, 12),
    ) {
        let w2 = field_for(w1.shape(), seed);
        let profile = BandScaleProfile::rms_normalized(raw[..map.band_count()].to_vec(), &map).unwrap();
        prop_assert!((profile.coordinate_rms(&map) - 1.0).abs() < 1e-12);
        let lhs = color_noise(&Field::lincomb(a, &w1, b, &w2), &profile, &map).unwrap();
        let rhs = Field::lincomb(
            a,
            &color_noise(&w1, &profile, &map).unwrap(),
            b,
            &color_noise(&w2, &profile, &map).unwrap(),
        );
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn empirical_coloring_has_unit_std((map, w) in map_and_field(), raw in prop::collection::vec(0.01f64..5.0, 12)) {
        let profile = BandScaleProfile::new(raw[..map.band_count()].to_vec(), NormalizationMode::EmpiricalStd).unwrap();
        let c = color_noise(&w, &profile, &map).unwrap();
        // one standard deviation over the whole field, all channels together
        prop_assert!((c.std() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn schedules_and_ablations_keep_unit_rms(
        (shape, nb) in shapes(),
        gammas in prop::collection::vec(0.0f64..=1.0, 12 * 9),
        power in 0.25f64..3.0,
        divider in 1.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let map = build_band_map(shape, nb).unwrap();
        let rows: Vec<Vec<f64>> = gammas.chunks(12).map(|c| c[..nb].to_vec()).collect();
        let times: Vec<f64> = (0..rows.len()).map(|k| k as f64 / rows.len() as f64).collect();
        let relax = RelaxationConfig { gamma_power: power, gamma_divider: divider, ..RelaxationConfig::default() };
        let s = schedule_from_rows(&rows, &times, &map, &relax).unwrap();
        for r in s.row_rms(&map) {
            prop_assert!((r - 1.0).abs() < 1e-10);
        }
        let mut rng = root_rng(seed);
        for mode in [
            AblationMode::Constant,
            AblationMode::Shuffled,
            AblationMode::Inverted,
            AblationMode::WhiteCorruption { fraction: 0.5 },
            AblationMode::RandomCorruption { fraction: 0.5 },
            AblationMode::RandomUnitEnergy,
        ] {
            let a = ablate_schedule(&s, mode, &map, &mut rng).unwrap();
            for r in a.row_rms(&map) {
                prop_assert!((r - 1.0).abs() < 1e-10, "{:?}", mode);
            }
        }
    }

    #[test]
    fn psd_scales_quadratically((map, x) in map_and_field(), c in 0.1f64..10.0) {
        let a = psd(std::slice::from_ref(&x), &map).unwrap();
        let b = psd(&[x.scaled(c)], &map).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((v - c * c * u).abs() <= 1e-10 * (1.0 + v.abs()));
        }
    }
}
