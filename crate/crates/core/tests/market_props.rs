//! Property tests for the conditional operators, driven by seeded random
//! trees.

use proptest::prelude::*;

use quadhedge::instances::{random_generator, random_tree, InstanceConfig, InstanceRng};
use quadhedge::market::{
    cond_expect, doob_decompose, gains, weighted_bilinear, ScalarProcess, ScenarioTree,
};
use quadhedge::numeraire::build_numeraire;

fn tree_from_seed(seed: u64) -> ScenarioTree<f64> {
    let cfg = InstanceConfig {
        max_horizon: 4,
        max_assets: 3,
        max_children: 4,
        drifted: true,
        ensure_incomplete: false,
    };
    random_tree(&mut InstanceRng::new(seed), &cfg)
}

fn random_adapted(tree: &ScenarioTree<f64>, seed: u64) -> ScalarProcess<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    ScalarProcess::from_fn(tree, |_| rng.gen_range(-2.0..2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tower_property(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let x = random_adapted(&tree, seed);
        let m = tree.horizon();
        for k in 0..=m {
            for n in 0..=k {
                let inner = cond_expect(&tree, &x, m, k).unwrap();
                let mut as_process = ScalarProcess::constant(&tree, 0.0);
                for (u, v) in tree.at_time(k).iter().zip(&inner.values) {
                    as_process.set(*u, *v);
                }
                let two_step = cond_expect(&tree, &as_process, k, n).unwrap();
                let direct = cond_expect(&tree, &x, m, n).unwrap();
                for (a, b) in two_step.values.iter().zip(&direct.values) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn linearity(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let x = random_adapted(&tree, seed);
        let y = random_adapted(&tree, seed.wrapping_add(1));
        let (a, b) = (1.75, -0.4);
        let combo = ScalarProcess::from_fn(&tree, |u| a * x.at(u) + b * y.at(u));
        let lhs = cond_expect(&tree, &combo, tree.horizon(), 0).unwrap();
        let ex = cond_expect(&tree, &x, tree.horizon(), 0).unwrap();
        let ey = cond_expect(&tree, &y, tree.horizon(), 0).unwrap();
        for ((l, vx), vy) in lhs.values.iter().zip(&ex.values).zip(&ey.values) {
            prop_assert!((l - (a * vx + b * vy)).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_form_shift_invariance_and_symmetry(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        if tree.horizon() < 1 {
            return Ok(());
        }
        let mut rng = InstanceRng::new(seed ^ 0xabcd);
        let eta = random_generator(&mut rng, &tree, 0.35);
        let spec = build_numeraire(&tree, eta).unwrap();
        let n_terminal: Vec<f64> = tree.leaves().iter().map(|l| *spec.value_at(*l)).collect();

        let x = random_adapted(&tree, seed.wrapping_add(7));
        let y = random_adapted(&tree, seed.wrapping_add(8));
        let m = tree.horizon();
        let n = 0;

        let base = weighted_bilinear(&tree, &n_terminal, &x, &y, m, n).unwrap();
        let flipped = weighted_bilinear(&tree, &n_terminal, &y, &x, m, n).unwrap();
        for (a, b) in base.values.iter().zip(&flipped.values) {
            prop_assert!((a - b).abs() < 1e-13);
        }

        // Shift x by something known at the conditioning time.
        let shift = random_adapted(&tree, seed.wrapping_add(9));
        let shifted = ScalarProcess::from_fn(&tree, |u| {
            let anc = tree.ancestor_at(u, n.min(tree.node(u).time));
            x.at(u) + shift.at(anc)
        });
        let moved = weighted_bilinear(&tree, &n_terminal, &shifted, &y, m, n).unwrap();
        for (a, b) in moved.values.iter().zip(&base.values) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn doob_martingale_increments_are_centered(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let doob = doob_decompose(&tree);
        for u in tree.interior_ids() {
            for i in 0..tree.asset_count() {
                let mut acc = 0.0;
                for c in tree.children(u) {
                    acc += tree.node(*c).cond_prob
                        * (doob.martingale.at(*c)[i] - doob.martingale.at(u)[i]);
                }
                prop_assert!(acc.abs() < 1e-12);
            }
        }
        // Drift plus martingale reassembles the prices.
        for u in tree.node_ids() {
            for i in 0..tree.asset_count() {
                let s = doob.martingale.at(u)[i] + doob.drift_cumulative.at(u)[i];
                prop_assert!((s - tree.node(u).prices[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gains_telescope_along_paths(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let mut rng = InstanceRng::new(seed ^ 0x77);
        let xi = random_generator(&mut rng, &tree, 0.2);
        let g = gains(&tree, &xi);
        prop_assert_eq!(*g.at(tree.root()), 0.0);
        for t in 1..=tree.horizon() {
            for v in tree.at_time(t) {
                let parent = tree.node(*v).parent.unwrap();
                let mut step = 0.0;
                for (i, q) in xi.at(parent).iter().enumerate() {
                    step += q * tree.price_step(*v, i);
                }
                prop_assert!((g.at(*v) - (g.at(parent) + step)).abs() < 1e-12);
            }
        }
    }
}
