//! Conditional operators on scenario trees: expectations, gains, the Doob
//! decomposition, and the numeraire-weighted covariance form.
//!
//! Every operator folds child contributions in stored order (depth-first
//! leaf order), so repeated runs on the same inputs are bit-identical.

use thiserror::Error;

use crate::market::process::{ScalarProcess, Strategy, VectorProcess};
use crate::market::tree::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

/// Errors from the conditional operators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketOpError {
    #[error("time {time} is outside 0..={horizon}")]
    TimeOutOfRange { time: usize, horizon: usize },
    #[error("conditioning time {n} must not exceed observation time {m}")]
    BadTimeOrder { n: usize, m: usize },
    #[error("terminal numeraire value {value} at leaf {leaf} is not strictly positive")]
    NonPositiveTerminalNumeraire { leaf: NodeId, value: String },
}

/// Values attached to every node of one time level, in the level's
/// depth-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice<S> {
    pub time: usize,
    pub values: Vec<S>,
}

impl<S: Scalar> TimeSlice<S> {
    /// Value at `node`, which must live at `self.time`.
    pub fn at<T: Scalar>(&self, tree: &ScenarioTree<T>, node: NodeId) -> &S {
        let pos = tree
            .at_time(self.time)
            .iter()
            .position(|u| *u == node)
            .expect("node not at this slice's time level");
        &self.values[pos]
    }
}

/// Conditional expectation of a time-`m` process at time `n`:
/// at each time-`n` node, the probability-weighted average of `x` over the
/// node's time-`m` descendants.
pub fn cond_expect<S: Scalar>(
    tree: &ScenarioTree<S>,
    x: &ScalarProcess<S>,
    m: usize,
    n: usize,
) -> Result<TimeSlice<S>, MarketOpError> {
    if m > tree.horizon() {
        return Err(MarketOpError::TimeOutOfRange {
            time: m,
            horizon: tree.horizon(),
        });
    }
    if n > m {
        return Err(MarketOpError::BadTimeOrder { n, m });
    }
    let values = tree
        .at_time(n)
        .iter()
        .map(|u| conditional_mean_at(tree, *u, x, m))
        .collect();
    Ok(TimeSlice { time: n, values })
}

/// E[x_m | node] for a single conditioning node.
fn conditional_mean_at<S: Scalar>(
    tree: &ScenarioTree<S>,
    node: NodeId,
    x: &ScalarProcess<S>,
    m: usize,
) -> S {
    // Group leaves by their time-m ancestor; within each group the value is
    // constant, and the group weights sum to the ancestor's path weight.
    // Folding leaf-by-leaf keeps one fixed accumulation order for all ops.
    tree.expect_with(node, |_, leaf| x.at(tree.ancestor_at(leaf, m)).clone())
}

/// Conditional expectation of a terminal (leaf-indexed) payoff at every
/// node; the result is a martingale by construction.
pub fn martingale_from_terminal<S: Scalar>(
    tree: &ScenarioTree<S>,
    terminal: &[S],
) -> ScalarProcess<S> {
    ScalarProcess::from_fn(tree, |u| tree.expect_leaves(u, terminal))
}

/// Accumulated trading gains of a predictable strategy along each path:
/// zero at the root, and over each step the position times the price move.
pub fn gains<S: Scalar>(tree: &ScenarioTree<S>, xi: &Strategy<S>) -> ScalarProcess<S> {
    let mut g = ScalarProcess::constant(tree, S::zero());
    for t in 1..=tree.horizon() {
        for v in tree.at_time(t) {
            let parent = tree.node(*v).parent.expect("non-root");
            let pos = xi.at(parent);
            let mut step = S::zero();
            for (i, q) in pos.iter().enumerate() {
                step = step + q.clone() * tree.price_step(*v, i);
            }
            let val = g.at(parent).clone() + step;
            g.set(*v, val);
        }
    }
    g
}

/// Doob decomposition of the stock prices: `S = M + A` with `M` a
/// martingale and `A` predictable.
#[derive(Debug, Clone)]
pub struct DoobDecomposition<S> {
    /// Martingale part; starts at the initial prices.
    pub martingale: VectorProcess<S>,
    /// Cumulative predictable part; zero at the root. The time-`n` value is
    /// already determined at `n - 1` (constant across siblings).
    pub drift_cumulative: VectorProcess<S>,
    /// Per-step drift: the conditional mean price increment out of each
    /// non-terminal node.
    pub drift_step: Strategy<S>,
}

/// Splits prices into martingale and predictable drift parts via the
/// conditional mean increment at every node.
pub fn doob_decompose<S: Scalar>(tree: &ScenarioTree<S>) -> DoobDecomposition<S> {
    let d = tree.asset_count();
    let drift_step = Strategy::from_fn(tree, |u| {
        let mut mean = vec![S::zero(); d];
        for c in tree.children(u) {
            let p = tree.node(*c).cond_prob.clone();
            for (i, m) in mean.iter_mut().enumerate() {
                *m = m.clone() + p.clone() * tree.price_step(*c, i);
            }
        }
        mean
    });

    let mut cumulative: Vec<Vec<S>> = vec![Vec::new(); tree.node_count()];
    cumulative[tree.root().index()] = vec![S::zero(); d];
    for t in 1..=tree.horizon() {
        for v in tree.at_time(t) {
            let parent = tree.node(*v).parent.expect("non-root");
            let step = drift_step.at(parent);
            cumulative[v.index()] = cumulative[parent.index()]
                .iter()
                .zip(step)
                .map(|(a, da)| a.clone() + da.clone())
                .collect();
        }
    }
    let drift_cumulative = VectorProcess::from_fn(tree, d, |u| cumulative[u.index()].clone());
    let martingale = VectorProcess::from_fn(tree, d, |u| {
        tree.node(u)
            .prices
            .iter()
            .zip(drift_cumulative.at(u))
            .map(|(s, a)| s.clone() - a.clone())
            .collect()
    });
    DoobDecomposition {
        martingale,
        drift_cumulative,
        drift_step,
    }
}

/// The numeraire-weighted covariance form at one conditioning node.
///
/// Arguments are leaf-indexed slices over the node's leaf range offsets
/// (same indexing as [`ScenarioTree::leaves`]); `inv_n2` holds the squared
/// reciprocal terminal numeraire per leaf. Each argument is centered with
/// its numeraire-harmonic conditional mean `E[x / N^2] / E[1 / N^2]` and
/// the product is averaged under the `1 / N^2` weight. Centering makes the
/// form invariant to shifts of either argument by anything known at the
/// conditioning node, and the symmetric product keeps it exactly symmetric.
pub fn weighted_form_at<S: Scalar>(
    tree: &ScenarioTree<S>,
    node: NodeId,
    inv_n2: &[S],
    x: &[S],
    y: &[S],
) -> S {
    let e0 = tree.expect_leaves(node, inv_n2);
    let mx = tree.expect_with(node, |pos, _| x[pos].clone() * inv_n2[pos].clone()) / e0.clone();
    let my = tree.expect_with(node, |pos, _| y[pos].clone() * inv_n2[pos].clone()) / e0;
    tree.expect_with(node, |pos, _| {
        (x[pos].clone() - mx.clone()) * (y[pos].clone() - my.clone()) * inv_n2[pos].clone()
    })
}

/// Numeraire-harmonic conditional mean `E[x / N^2 | node] / E[1 / N^2 | node]`.
pub fn weighted_mean_at<S: Scalar>(
    tree: &ScenarioTree<S>,
    node: NodeId,
    inv_n2: &[S],
    x: &[S],
) -> S {
    let e0 = tree.expect_leaves(node, inv_n2);
    tree.expect_with(node, |pos, _| x[pos].clone() * inv_n2[pos].clone()) / e0
}

/// The weighted covariance form between two time-`m` processes, evaluated
/// at every time-`n` node (`n < m`). `n_terminal` is the terminal numeraire
/// value per leaf and must be strictly positive.
pub fn weighted_bilinear<S: Scalar>(
    tree: &ScenarioTree<S>,
    n_terminal: &[S],
    x: &ScalarProcess<S>,
    y: &ScalarProcess<S>,
    m: usize,
    n: usize,
) -> Result<TimeSlice<S>, MarketOpError> {
    if m > tree.horizon() {
        return Err(MarketOpError::TimeOutOfRange {
            time: m,
            horizon: tree.horizon(),
        });
    }
    if n >= m {
        return Err(MarketOpError::BadTimeOrder { n, m });
    }
    for (pos, leaf) in tree.leaves().iter().enumerate() {
        if n_terminal[pos] <= S::zero() {
            return Err(MarketOpError::NonPositiveTerminalNumeraire {
                leaf: *leaf,
                value: format!("{:?}", n_terminal[pos]),
            });
        }
    }
    let inv_n2: Vec<S> = n_terminal
        .iter()
        .map(|v| S::one() / (v.clone() * v.clone()))
        .collect();
    let x_leaf = lift_to_leaves(tree, x, m);
    let y_leaf = lift_to_leaves(tree, y, m);
    let values = tree
        .at_time(n)
        .iter()
        .map(|u| weighted_form_at(tree, *u, &inv_n2, &x_leaf, &y_leaf))
        .collect();
    Ok(TimeSlice { time: n, values })
}

/// Leaf-indexed view of a time-`m` process (each leaf takes its time-`m`
/// ancestor's value).
pub fn lift_to_leaves<S: Scalar>(
    tree: &ScenarioTree<S>,
    x: &ScalarProcess<S>,
    m: usize,
) -> Vec<S> {
    tree.leaves()
        .iter()
        .map(|leaf| x.at(tree.ancestor_at(*leaf, m)).clone())
        .collect()
}
