//! Seeded random model generation for validation: trees, claims, valid
//! numeraire generators, and replicable claims built from self-financing
//! portfolios. Deterministic for a fixed seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market::{gains, Claim, ScenarioTree, Strategy, TreeBuilder, ValidationLimits};
use crate::numeraire::{build_numeraire, NumeraireSpec};

/// Shape limits for random trees.
#[derive(Debug, Clone, Copy)]
pub struct InstanceConfig {
    pub max_horizon: usize,
    pub max_assets: usize,
    pub max_children: usize,
    /// Random per-step drift in the price moves (otherwise increments are
    /// conditionally centered up to sampling noise).
    pub drifted: bool,
    /// Force at least one branching wider than `assets + 1`, so the market
    /// is incomplete and the residual is alive.
    pub ensure_incomplete: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            max_horizon: 3,
            max_assets: 3,
            max_children: 4,
            drifted: true,
            ensure_incomplete: false,
        }
    }
}

/// Deterministic generator state seeded once per instance.
pub struct InstanceRng(ChaCha8Rng);

impl InstanceRng {
    pub fn new(seed: u64) -> Self {
        InstanceRng(ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Random tree within the config's shape limits. Branch probabilities stay
/// in [0.05, 0.85] and the last child takes the exact complement, so the
/// per-node sum is exactly one. Every node branches at least one wider
/// than the asset count, keeping the covariance systems invertible.
pub fn random_tree(rng: &mut InstanceRng, cfg: &InstanceConfig) -> ScenarioTree<f64> {
    let rng = &mut rng.0;
    let horizon = rng.gen_range(1..=cfg.max_horizon);
    let assets = rng.gen_range(1..=cfg.max_assets.min(cfg.max_children - 1));
    let min_children = assets + 1;
    let incomplete_possible = cfg.max_children > min_children;

    let root_prices: Vec<f64> = (0..assets)
        .map(|_| f64::exp(rng.gen_range(-0.3..0.8)))
        .collect();
    let mut builder = TreeBuilder::new(root_prices);
    let mut frontier = vec![builder.root()];
    let mut widened = false;
    for t in 0..horizon {
        let mut next = Vec::new();
        for (slot, u) in frontier.iter().enumerate() {
            let mut n_children = rng.gen_range(min_children..=cfg.max_children);
            // Guarantee incompleteness on the last chance if requested.
            let last_chance = t + 1 == horizon && slot + 1 == frontier.len();
            if cfg.ensure_incomplete && incomplete_possible && !widened && last_chance {
                n_children = cfg.max_children.max(min_children + 1);
            }
            if n_children > min_children {
                widened = true;
            }
            let raw: Vec<f64> = (0..n_children).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let head: f64 = probs[..n_children - 1].iter().sum();
            probs[n_children - 1] = 1.0 - head;
            for p in &probs {
                let parent_prices = builder_prices(&builder, *u);
                let prices: Vec<f64> = parent_prices
                    .iter()
                    .map(|s| {
                        let drift = if cfg.drifted {
                            rng.gen_range(-0.12..0.12)
                        } else {
                            0.0
                        };
                        s * f64::exp(rng.gen_range(-0.45..0.45) + drift)
                    })
                    .collect();
                next.push(builder.add_child(*u, *p, prices));
            }
        }
        frontier = next;
    }
    builder
        .build(&ValidationLimits::default())
        .expect("generated tree is structurally valid")
}

fn builder_prices(builder: &TreeBuilder<f64>, node: crate::market::NodeId) -> Vec<f64> {
    // TreeBuilder does not expose nodes; rebuild is avoided by tracking
    // prices through a clone-free accessor.
    builder.prices_of(node)
}

/// Random claim: a call on the first asset plus bounded noise, scaled to
/// the tree's price level. Almost surely non-replicable on incomplete
/// trees.
pub fn random_claim(rng: &mut InstanceRng, tree: &ScenarioTree<f64>) -> Claim<f64> {
    let rng = &mut rng.0;
    let strike = tree.node(tree.root()).prices[0] * rng.gen_range(0.7..1.3);
    let noise_scale = rng.gen_range(0.1..0.5);
    let values: Vec<f64> = tree
        .leaves()
        .iter()
        .map(|l| {
            let s = tree.node(*l).prices[0];
            (s - strike).max(0.0) + rng.gen_range(-noise_scale..noise_scale)
        })
        .collect();
    Claim::from_leaf_values(tree, values).expect("leaf count matches")
}

/// Random generator whose numeraire stays above `floor` everywhere: raw
/// positions are drawn and then shrunk linearly until the worst realized
/// gain keeps the value process clear of zero.
pub fn random_generator(
    rng: &mut InstanceRng,
    tree: &ScenarioTree<f64>,
    floor: f64,
) -> Strategy<f64> {
    let rng = &mut rng.0;
    let d = tree.asset_count();
    let raw = Strategy::from_fn(tree, |u| {
        let scale = 1.0 / (1.0 + tree.node(u).prices.iter().cloned().fold(0.0, f64::max));
        (0..d).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
    });
    let g = gains(tree, &raw);
    let worst = tree
        .node_ids()
        .map(|u| *g.at(u))
        .fold(f64::INFINITY, f64::min);
    if worst > floor - 1.0 {
        return raw;
    }
    // 1 + s * worst = floor  =>  s = (floor - 1) / worst, shrunk slightly.
    let s = 0.9 * (floor - 1.0) / worst;
    raw.scaled(&s)
}

/// Random valid numeraire built from [`random_generator`].
pub fn random_numeraire(
    rng: &mut InstanceRng,
    tree: &ScenarioTree<f64>,
) -> NumeraireSpec<f64> {
    let eta = random_generator(rng, tree, 0.35);
    build_numeraire(tree, eta).expect("floored generator yields a positive numeraire")
}

/// Claim equal to the terminal wealth of a random self-financing
/// portfolio: replicable by construction, with the replicating capital and
/// positions returned alongside.
pub fn replicable_claim(
    rng: &mut InstanceRng,
    tree: &ScenarioTree<f64>,
) -> (Claim<f64>, f64, Strategy<f64>) {
    let initial = {
        let r = &mut rng.0;
        r.gen_range(-1.0..2.0)
    };
    let xi = {
        let r = &mut rng.0;
        let d = tree.asset_count();
        Strategy::from_fn(tree, |_| (0..d).map(|_| r.gen_range(-1.5..1.5)).collect())
    };
    let g = gains(tree, &xi);
    let claim = Claim::from_fn(tree, |leaf| initial + g.at(leaf));
    (claim, initial, xi)
}
