use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clarkshift::experiments::config::TargetAtom;
use clarkshift::experiments::synthesize::{layer_measures, synthesize};
use clarkshift::linalg::max_abs;
use clarkshift::measures::{random_circle_measure, RandomMeasureSpec};
use clarkshift::model_ops::{difference_grams, difference_grams_quadrature, stilde_minus_s_norms, PerturbedShiftModel};
use clarkshift::quadrature::CircleRule;
use clarkshift::schatten::QuadratureSpec;

fn model(seed: u64, blocks: usize, atoms: usize) -> PerturbedShiftModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomMeasureSpec {
        atoms,
        min_separation: 0.6,
        ..RandomMeasureSpec::default()
    };
    let measures = (0..blocks).map(|_| random_circle_measure(&mut rng, &spec).unwrap()).collect();
    PerturbedShiftModel::new(measures).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_grams_match_quadrature(seed in 0u64..10_000, blocks in 1usize..4, atoms in 1usize..4) {
        let m = model(seed, blocks, atoms);
        let (gu, gv) = difference_grams(&m);
        let (qu, qv) = difference_grams_quadrature(&m, &CircleRule::default()).unwrap();
        prop_assert!(max_abs(&(gu - qu)) < 1e-8);
        prop_assert!(max_abs(&(gv - qv)) < 1e-8);
    }

    #[test]
    fn difference_bounds_hold_and_rank_is_the_block_count(seed in 0u64..10_000, blocks in 1usize..5, atoms in 1usize..4) {
        let m = model(seed, blocks, atoms);
        let d = stilde_minus_s_norms(&m).unwrap();
        prop_assert!(d.operator_bound_holds && d.trace_bound_holds);
        prop_assert_eq!(d.rank, blocks);
        prop_assert!(d.operator_norm <= d.trace_norm * (1.0 + 1e-14));
    }

    #[test]
    fn layers_preserve_multiplicities(mults in proptest::collection::vec(1usize..4, 1..5)) {
        let target: Vec<TargetAtom> = mults
            .iter()
            .enumerate()
            .map(|(i, &m)| TargetAtom { angle_over_pi: -0.9 + 0.4 * i as f64, multiplicity: m })
            .collect();
        let layers = layer_measures(&target).unwrap();
        prop_assert_eq!(layers.len(), *mults.iter().max().unwrap());
        let total: usize = layers.iter().map(|l| l.len()).sum();
        prop_assert_eq!(total, mults.iter().sum::<usize>());
        prop_assert!(layers.windows(2).all(|w| w[1].len() <= w[0].len()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn synthesis_meets_epsilon(eps in 0.05f64..1.0, a in -0.9f64..0.9, m in 1usize..3) {
        let target = [
            TargetAtom { angle_over_pi: 1.0, multiplicity: 1 },
            TargetAtom { angle_over_pi: a, multiplicity: m },
        ];
        prop_assume!((a - 1.0).abs() > 0.05 && a.abs() > 0.05);
        let c = synthesize(&target, eps, 4.0, &[], &QuadratureSpec::default()).unwrap();
        prop_assert!(c.trace_norm < eps / 2.0);
        prop_assert!(c.rank <= m.max(1));
        prop_assert!(c.verify().unwrap().passed);
    }
}
