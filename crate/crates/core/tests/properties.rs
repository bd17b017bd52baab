use proptest::prelude::*;

use landmark_bm::classifier::classify;
use landmark_bm::geometry::{cometric_matrix, sqrt_psd, LandmarkConfig};
use landmark_bm::kernels::{experiment_kernels, make_gaussian, make_matern};
use landmark_bm::simulator::em_step;
use landmark_bm::stats::ks_statistic;

fn separated(coords: &[f64], d: usize) -> Option<LandmarkConfig> {
    let c = LandmarkConfig::new(d, coords.to_vec()).ok()?;
    (c.min_pairwise_distance() > 0.05).then_some(c)
}

proptest! {
    #[test]
    fn em_step_commutes_with_translation(
        coords in prop::collection::vec(-2.0f64..2.0, 6),
        noise in prop::collection::vec(-3.0f64..3.0, 6),
        shift in prop::collection::vec(-5.0f64..5.0, 2),
        which in 0usize..3,
    ) {
        let Some(q) = separated(&coords, 2) else { return Ok(()) };
        let k = &experiment_kernels()[which];
        let a = em_step(&q.translated(&shift).unwrap(), k, 1e-3, &noise).unwrap();
        let b = em_step(&q, k, 1e-3, &noise).unwrap().translated(&shift).unwrap();
        for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn sqrt_squares_back(coords in prop::collection::vec(-2.0f64..2.0, 3), gauss in any::<bool>()) {
        let Some(q) = separated(&coords, 1) else { return Ok(()) };
        let k = if gauss { make_gaussian(1.0).unwrap() } else { make_matern(0.5, 1.0).unwrap() };
        let km = cometric_matrix(&q, &k);
        let root = sqrt_psd(&km).unwrap().into_matrix();
        prop_assert!((&root * &root - km.as_matrix()).norm() <= 1e-10 * km.frobenius_norm());
    }

    #[test]
    fn completeness_is_the_negation_of_collision(gamma in 0.01f64..5.0, log in any::<bool>(), d in 1usize..6) {
        let c = classify(gamma, log, d).unwrap();
        prop_assert_eq!(c.brownian_complete, !c.collision_possible);
        prop_assert_eq!(c.brownian_complete, gamma >= 2.0);
    }

    #[test]
    fn ks_is_symmetric_and_bounded(
        a in prop::collection::vec(-10.0f64..10.0, 1..40),
        b in prop::collection::vec(-10.0f64..10.0, 1..40),
    ) {
        let ab = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(ab, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}
