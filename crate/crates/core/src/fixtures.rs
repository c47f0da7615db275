//! Built-in example models, generated in code so tests cannot drift from
//! their defining values.

use crate::market::{Claim, ScenarioTree, Strategy, TreeBuilder, ValidationLimits};
use crate::scalar::Real;

/// Strategy value quoted alongside the one-period trinomial example under
/// the half-share numeraire. Kept for side-by-side reporting; the global
/// least-squares solver is the authority when they disagree.
pub const TRINOMIAL_HALF_SHARE_QUOTED_STRATEGY: f64 = 75.0 / 576.0;

/// Fair price quoted alongside the same example; see
/// [`TRINOMIAL_HALF_SHARE_QUOTED_STRATEGY`].
pub const TRINOMIAL_HALF_SHARE_QUOTED_FAIR_PRICE: f64 = 471.0 / 4320.0;

fn limits<R: Real>() -> ValidationLimits<R> {
    // f32 cannot represent the 1/6, 1/2, 1/3 split to 1e-12; widen the
    // probability-sum slack to the scalar's resolution when needed.
    let eps_based = R::epsilon() * R::of(8.0);
    let standard = R::of(1e-12);
    ValidationLimits {
        prob_sum_tol: if eps_based > standard {
            eps_based
        } else {
            standard
        },
    }
}

/// One-period trinomial: the stock starts at 2 and moves to 4, 2 or 1 with
/// probabilities 1/6, 1/2 and 1/3.
pub fn trinomial<R: Real>() -> ScenarioTree<R> {
    trinomial_with_probs([1.0 / 6.0, 1.0 / 2.0, 1.0 / 3.0])
}

/// Trinomial with the same prices but custom branch probabilities.
pub fn trinomial_with_probs<R: Real>(probs: [f64; 3]) -> ScenarioTree<R> {
    let mut b = TreeBuilder::new(vec![R::of(2.0)]);
    let root = b.root();
    for (price, prob) in [4.0, 2.0, 1.0].into_iter().zip(probs) {
        b.add_child(root, R::of(prob), vec![R::of(price)]);
    }
    b.build(&limits()).expect("fixture is valid")
}

/// Call payoff with strike 3 on the single stock: pays 1 on the up branch
/// of the trinomial and 0 elsewhere.
pub fn call_strike_3<R: Real>(tree: &ScenarioTree<R>) -> Claim<R> {
    let k = R::of(3.0);
    Claim::from_fn(tree, |leaf| {
        let s = tree.node(leaf).prices[0];
        if s > k {
            s - k
        } else {
            R::zero()
        }
    })
}

/// Holds half a share of the first stock at every rebalancing date.
pub fn half_share<R: Real>(tree: &ScenarioTree<R>) -> Strategy<R> {
    Strategy::from_fn(tree, |_| {
        let mut v = vec![R::zero(); tree.asset_count()];
        v[0] = R::of(0.5);
        v
    })
}

/// One-period two-state model: the stock starts at 2 and moves to 4 or 1
/// with equal probability. Complete, so every claim is replicable.
pub fn two_state<R: Real>() -> ScenarioTree<R> {
    let mut b = TreeBuilder::new(vec![R::of(2.0)]);
    let root = b.root();
    b.add_child(root, R::of(0.5), vec![R::of(4.0)]);
    b.add_child(root, R::of(0.5), vec![R::of(1.0)]);
    b.build(&limits()).expect("fixture is valid")
}

/// Claim paying the terminal stock price itself.
pub fn stock_claim<R: Real>(tree: &ScenarioTree<R>) -> Claim<R> {
    Claim::from_fn(tree, |leaf| tree.node(leaf).prices[0])
}

/// Two-period single-stock model with a trinomial branch at every node and
/// drifting second-period prices. The second step is incomplete and has
/// nonzero conditional mean increments, so the residual is alive at
/// intermediate dates.
pub fn two_period_drifted<R: Real>() -> ScenarioTree<R> {
    let mut b = TreeBuilder::new(vec![R::of(2.0)]);
    let root = b.root();
    let mids = [
        (4.0, 1.0 / 6.0, [7.0, 4.0, 3.0]),
        (2.0, 1.0 / 2.0, [4.0, 2.0, 1.0]),
        (1.0, 1.0 / 3.0, [2.0, 1.0, 0.5]),
    ];
    for (price, prob, kids) in mids {
        let mid = b.add_child(root, R::of(prob), vec![R::of(price)]);
        for kid in kids {
            b.add_child(mid, R::of(1.0 / 3.0), vec![R::of(kid)]);
        }
    }
    b.build(&limits()).expect("fixture is valid")
}

/// Three-period single-stock model: the drifted two-period tree extended
/// by one more drifted trinomial branching at every second-period node.
/// Deep enough that interior conditioning genuinely differs from the root.
pub fn three_period_drifted<R: Real>() -> ScenarioTree<R> {
    let mut b = TreeBuilder::new(vec![R::of(2.0)]);
    let root = b.root();
    let mids = [
        (4.0, 1.0 / 6.0, [7.0, 4.0, 3.0]),
        (2.0, 1.0 / 2.0, [4.0, 2.0, 1.0]),
        (1.0, 1.0 / 3.0, [2.0, 1.0, 0.5]),
    ];
    for (price, prob, kids) in mids {
        let mid = b.add_child(root, R::of(prob), vec![R::of(price)]);
        for kid in kids {
            let node = b.add_child(mid, R::of(1.0 / 3.0), vec![R::of(kid)]);
            for (factor, p) in [(1.6, 0.3), (1.0, 0.4), (0.6, 0.3)] {
                b.add_child(node, R::of(p), vec![R::of(kid * factor)]);
            }
        }
    }
    b.build(&limits()).expect("fixture is valid")
}

/// Claim paying the squared terminal stock price.
pub fn square_claim<R: Real>(tree: &ScenarioTree<R>) -> Claim<R> {
    Claim::from_fn(tree, |leaf| {
        let s = tree.node(leaf).prices[0];
        s * s
    })
}

/// Constant generator holding `q` of the first stock everywhere.
pub fn constant_generator<R: Real>(tree: &ScenarioTree<R>, q: f64) -> Strategy<R> {
    Strategy::from_fn(tree, |_| {
        let mut v = vec![R::zero(); tree.asset_count()];
        v[0] = R::of(q);
        v
    })
}
