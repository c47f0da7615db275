//! Quadratic-hedging decomposition under a tradable numeraire.
//!
//! The backward recursion solves, at every node, the one-step weighted
//! least-squares problem in (price, position): positions come from the
//! numeraire-weighted covariance form of the tail-hedged claim against the
//! price increments, prices from the numeraire-harmonic conditional mean.
//! The terminal residual, re-expressed in numeraire units, is extended to a
//! martingale and reported together with the decomposition identity
//! diagnostics.

use thiserror::Error;

use crate::linalg::{factor_spd, inverse_defect};
use crate::market::{martingale_from_terminal, Claim, NodeId, ScalarProcess, ScenarioTree, Strategy};
use crate::numeraire::{
    lift_self_financing, unit_numeraire, wealth_process, LiftedStrategy, NumeraireError,
    NumeraireSpec,
};
use crate::scalar::Real;

/// Reciprocal-condition floor below which a per-node covariance system is
/// treated as singular (redundant assets) instead of being solved.
pub const RCOND_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HedgeError {
    #[error(
        "covariance system at node {node} is numerically singular \
         (reciprocal condition estimate {rcond:.3e}); assets are redundant there"
    )]
    SingularCovariance { node: NodeId, rcond: f64 },
    #[error("conditional variance of the price increment vanishes at node {node}")]
    ZeroConditionalVariance { node: NodeId },
    #[error("this operation requires a one-period model; the horizon is {horizon}")]
    HorizonNotOne { horizon: usize },
    #[error("interest rate {rate} must be nonnegative")]
    NegativeRate { rate: f64 },
    #[error(transparent)]
    Numeraire(#[from] NumeraireError),
}

/// Per-node covariance systems solved by the recursion, with their
/// inverses and condition estimates.
#[derive(Debug, Clone)]
pub struct CovMatrixProcess<R> {
    entries: Vec<Option<CovEntry<R>>>,
}

#[derive(Debug, Clone)]
pub struct CovEntry<R> {
    pub matrix: Vec<Vec<R>>,
    pub inverse: Vec<Vec<R>>,
    /// Smallest over largest pivot magnitude of the factorization.
    pub rcond: R,
    /// Max-norm of `matrix * inverse - I`.
    pub inverse_defect: R,
}

impl<R: Real> CovMatrixProcess<R> {
    fn new(node_count: usize) -> Self {
        CovMatrixProcess {
            entries: vec![None; node_count],
        }
    }

    fn set(&mut self, node: NodeId, entry: CovEntry<R>) {
        self.entries[node.index()] = Some(entry);
    }

    /// Entry for a non-terminal node.
    pub fn at(&self, node: NodeId) -> Option<&CovEntry<R>> {
        self.entries[node.index()].as_ref()
    }
}

/// Residual checks evaluated on the finished decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeDiagnostics<R> {
    /// Worst gap in the pathwise identity
    /// `H/N_T = V0 + sum of lifted denominated gains + L_T`.
    pub pathwise_identity_max: R,
    /// Worst one-step martingale defect of the residual.
    pub residual_martingale_max: R,
    /// Worst first-order condition in the price variable.
    pub price_foc_max: R,
    /// Worst first-order condition in the strategy (normal equations).
    pub strategy_foc_max: R,
    /// Plain mean of the terminal residual (zero under the unit numeraire,
    /// generally nonzero otherwise; reported, not asserted).
    pub residual_mean: R,
    /// Numeraire-weighted mean `E[L_T / N_T]`; this is the condition the
    /// price optimality actually pins to zero.
    pub residual_weighted_mean: R,
    /// Worst conditional correlation of residual increments against the
    /// martingale parts of the denominated prices. Exactly the classical
    /// orthogonality when the numeraire is constant; reported otherwise.
    pub orthogonality_max: R,
}

/// Fair price, hedging strategy, conditional prices, residual martingale,
/// and the machinery that produced them.
#[derive(Debug, Clone)]
pub struct Decomposition<R> {
    /// Initial capital minimizing the expected squared terminal hedging
    /// error in numeraire units.
    pub fair_price: R,
    /// Conditional fair price at every node; equals the numeraire-
    /// denominated payoff at the leaves.
    pub conditional_price: ScalarProcess<R>,
    /// Optimal stock positions.
    pub strategy: Strategy<R>,
    /// Self-financing completion of the strategy.
    pub lifted: LiftedStrategy<R>,
    /// Residual martingale; the unhedgeable part of the claim.
    pub residual: ScalarProcess<R>,
    /// Per-node covariance systems.
    pub covariances: CovMatrixProcess<R>,
    pub diagnostics: HedgeDiagnostics<R>,
}

/// Scratch view of one conditioning node's leaf range.
struct Frame<'a, R: Real> {
    tree: &'a ScenarioTree<R>,
    node: NodeId,
    start: usize,
    /// Relative leaf weights within the node (sum to 1).
    weights: Vec<R>,
    /// Step ancestors: for each leaf offset, the child of `node` the path
    /// passes through.
    step_child: Vec<NodeId>,
}

impl<'a, R: Real> Frame<'a, R> {
    fn new(tree: &'a ScenarioTree<R>, node: NodeId) -> Self {
        let range = tree.leaf_range(node);
        let start = range.start;
        let w_node = *tree.path_prob(node);
        let time = tree.node(node).time;
        let mut weights = Vec::with_capacity(range.len());
        let mut step_child = Vec::with_capacity(range.len());
        for pos in range {
            let leaf = tree.leaves()[pos];
            weights.push(*tree.path_prob(leaf) / w_node);
            step_child.push(tree.ancestor_at(leaf, time + 1));
        }
        Frame {
            tree,
            node,
            start,
            weights,
            step_child,
        }
    }

    /// Weighted mean over the frame of `f(local offset)`.
    fn mean(&self, mut f: impl FnMut(usize) -> R) -> R {
        let mut acc = R::zero();
        for (k, w) in self.weights.iter().enumerate() {
            acc = acc + *w * f(k);
        }
        acc
    }

    /// Price increment of `asset` over the step out of the node, for the
    /// child the `k`-th leaf descends from.
    fn step(&self, k: usize, asset: usize) -> R {
        self.tree.node(self.step_child[k]).prices[asset]
            - self.tree.node(self.node).prices[asset]
    }

    fn global(&self, k: usize) -> usize {
        self.start + k
    }
}

/// Quadratic-hedging decomposition of `claim` under the numeraire `spec`.
///
/// Positions are computed backward in time; at each node the weighted
/// normal equations are solved with an LDL^T factorization, refusing nodes
/// whose reciprocal condition estimate falls below [`RCOND_FLOOR`].
pub fn fs_decompose<R: Real>(
    tree: &ScenarioTree<R>,
    spec: &NumeraireSpec<R>,
    claim: &Claim<R>,
) -> Result<Decomposition<R>, HedgeError> {
    let d = tree.asset_count();
    let inv_n2: Vec<R> = spec
        .terminal_values(tree)
        .iter()
        .map(|n| R::one() / (*n * *n))
        .collect();
    let mut covariances = CovMatrixProcess::new(tree.node_count());
    let mut xi = Strategy::zeros(tree);
    // Hedged tail per leaf: positions at times > n applied to their steps.
    let mut tail = vec![R::zero(); tree.leaves().len()];

    for n in (1..=tree.horizon()).rev() {
        for u in tree.at_time(n - 1) {
            let frame = Frame::new(tree, *u);
            let e0 = frame.mean(|k| inv_n2[frame.global(k)]);
            let m_step: Vec<R> = (0..d)
                .map(|i| frame.mean(|k| inv_n2[frame.global(k)] * frame.step(k, i)) / e0)
                .collect();
            let m_z = frame.mean(|k| {
                let g = frame.global(k);
                inv_n2[g] * (*claim.value(g) - tail[g])
            }) / e0;

            let mut matrix = vec![vec![R::zero(); d]; d];
            for i in 0..d {
                for j in 0..=i {
                    let v = frame.mean(|k| {
                        inv_n2[frame.global(k)]
                            * (frame.step(k, i) - m_step[i])
                            * (frame.step(k, j) - m_step[j])
                    });
                    matrix[i][j] = v;
                    matrix[j][i] = v;
                }
            }
            let rhs: Vec<R> = (0..d)
                .map(|i| {
                    frame.mean(|k| {
                        let g = frame.global(k);
                        inv_n2[g]
                            * (*claim.value(g) - tail[g] - m_z)
                            * (frame.step(k, i) - m_step[i])
                    })
                })
                .collect();

            let factor = factor_spd(&matrix, R::of(RCOND_FLOOR)).map_err(|b| {
                HedgeError::SingularCovariance {
                    node: *u,
                    rcond: b.rcond.to_f64().unwrap_or(f64::NAN),
                }
            })?;
            let solution = factor.solve(&rhs);
            let inverse = factor.inverse();
            let defect = inverse_defect(&matrix, &inverse);
            covariances.set(
                *u,
                CovEntry {
                    matrix,
                    inverse,
                    rcond: factor.rcond(),
                    inverse_defect: defect,
                },
            );
            xi.set(*u, solution);
        }
        // Fold this level's positions into the tails.
        for (pos, leaf) in tree.leaves().iter().enumerate() {
            let held_at = tree.ancestor_at(*leaf, n - 1);
            let stepped = tree.ancestor_at(*leaf, n);
            let pos_vec = xi.at(held_at);
            let mut inc = R::zero();
            for (i, q) in pos_vec.iter().enumerate() {
                inc = inc
                    + *q * (tree.node(stepped).prices[i] - tree.node(held_at).prices[i]);
            }
            tail[pos] = tail[pos] + inc;
        }
    }

    Ok(assemble(tree, spec, claim, xi, covariances, &inv_n2))
}

/// Decomposition under the constant unit numeraire, computed through the
/// plain conditional covariance recursion (children-level sums rather than
/// weighted leaf sums). Serves as an independent route that must agree
/// with [`fs_decompose`] under a zero generator.
pub fn classical_fs<R: Real>(
    tree: &ScenarioTree<R>,
    claim: &Claim<R>,
) -> Result<Decomposition<R>, HedgeError> {
    let d = tree.asset_count();
    let mut covariances = CovMatrixProcess::new(tree.node_count());
    let mut xi = Strategy::zeros(tree);
    let mut tail = vec![R::zero(); tree.leaves().len()];
    let leaf_z = |tail: &[R], pos: usize| *claim.value(pos) - tail[pos];

    for n in (1..=tree.horizon()).rev() {
        for u in tree.at_time(n - 1) {
            let kids = tree.children(*u);
            let mut m_step = vec![R::zero(); d];
            for c in kids {
                let p = tree.node(*c).cond_prob;
                for (i, m) in m_step.iter_mut().enumerate() {
                    *m = *m + p * tree.price_step(*c, i);
                }
            }
            // Conditional mean of the tail-hedged claim through each child.
            let child_means: Vec<R> = kids
                .iter()
                .map(|c| tree.expect_with(*c, |pos, _| leaf_z(&tail, pos)))
                .collect();
            let mut m_z = R::zero();
            for (c, cm) in kids.iter().zip(&child_means) {
                m_z = m_z + tree.node(*c).cond_prob * *cm;
            }

            let mut matrix = vec![vec![R::zero(); d]; d];
            for i in 0..d {
                for j in 0..=i {
                    let mut v = R::zero();
                    for c in kids {
                        let p = tree.node(*c).cond_prob;
                        v = v
                            + p * (tree.price_step(*c, i) - m_step[i])
                                * (tree.price_step(*c, j) - m_step[j]);
                    }
                    matrix[i][j] = v;
                    matrix[j][i] = v;
                }
            }
            let mut rhs = vec![R::zero(); d];
            for (c, cm) in kids.iter().zip(&child_means) {
                let p = tree.node(*c).cond_prob;
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r = *r + p * (tree.price_step(*c, i) - m_step[i]) * (*cm - m_z);
                }
            }

            let factor = factor_spd(&matrix, R::of(RCOND_FLOOR))
                .map_err(|_| HedgeError::ZeroConditionalVariance { node: *u })?;
            let solution = factor.solve(&rhs);
            let inverse = factor.inverse();
            let defect = inverse_defect(&matrix, &inverse);
            covariances.set(
                *u,
                CovEntry {
                    matrix,
                    inverse,
                    rcond: factor.rcond(),
                    inverse_defect: defect,
                },
            );
            xi.set(*u, solution);
        }
        for (pos, leaf) in tree.leaves().iter().enumerate() {
            let held_at = tree.ancestor_at(*leaf, n - 1);
            let stepped = tree.ancestor_at(*leaf, n);
            let pos_vec = xi.at(held_at);
            let mut inc = R::zero();
            for (i, q) in pos_vec.iter().enumerate() {
                inc = inc
                    + *q * (tree.node(stepped).prices[i] - tree.node(held_at).prices[i]);
            }
            tail[pos] = tail[pos] + inc;
        }
    }

    let spec = unit_numeraire(tree);
    let inv_n2 = vec![R::one(); tree.leaves().len()];
    Ok(assemble(tree, &spec, claim, xi, covariances, &inv_n2))
}

/// One-period pricing under a constant interest rate on the bank account.
/// The optimal position is the unit-numeraire one; only the price picks up
/// discounting. Rejects multi-period models.
pub fn interest_rate_fair_price<R: Real>(
    tree: &ScenarioTree<R>,
    claim: &Claim<R>,
    rate: R,
) -> Result<(R, Strategy<R>), HedgeError> {
    if tree.horizon() != 1 {
        return Err(HedgeError::HorizonNotOne {
            horizon: tree.horizon(),
        });
    }
    if rate < R::zero() {
        return Err(HedgeError::NegativeRate {
            rate: rate.to_f64().unwrap_or(f64::NAN),
        });
    }
    let base = classical_fs(tree, claim)?;
    let xi = base.strategy.clone();
    let root = tree.root();
    let growth = R::one() + rate;
    let mean_payoff = tree.expect_leaves(root, claim.values());
    let mut price = mean_payoff / growth;
    let position = xi.at(root);
    for (i, q) in position.iter().enumerate() {
        let mean_terminal = tree.expect_with(root, |_, leaf| tree.node(leaf).prices[i]);
        price = price - *q * (mean_terminal / growth - tree.node(root).prices[i]);
    }
    Ok((price, xi))
}

/// Builds prices, lift, residual, and diagnostics around a solved strategy.
fn assemble<R: Real>(
    tree: &ScenarioTree<R>,
    spec: &NumeraireSpec<R>,
    claim: &Claim<R>,
    xi: Strategy<R>,
    covariances: CovMatrixProcess<R>,
    inv_n2: &[R],
) -> Decomposition<R> {
    let horizon = tree.horizon();
    // Terminal gains per leaf and wealth-to-date per node come from the
    // same forward sweep.
    let wealth0 = wealth_process(tree, R::zero(), &xi); // gains only

    // Conditional fair price: numeraire-harmonic mean of the claim hedged
    // strictly after the node.
    let mut conditional_price = ScalarProcess::constant(tree, R::zero());
    for leaf in tree.leaves() {
        let pos = tree.leaf_ordinal(*leaf);
        conditional_price.set(*leaf, *claim.value(pos) / *spec.value_at(*leaf));
    }
    for t in (0..horizon).rev() {
        for u in tree.at_time(t) {
            let e0 = tree.expect_with(*u, |pos, leaf| {
                let _ = leaf;
                inv_n2[pos]
            });
            let num = tree.expect_with(*u, |pos, leaf| {
                let future_gain = *wealth0.at(leaf) - *wealth0.at(*u);
                inv_n2[pos] * (*claim.value(pos) - future_gain)
            });
            conditional_price.set(*u, num / e0);
        }
    }
    let fair_price = *conditional_price.at(tree.root());

    let lifted = lift_self_financing(tree, fair_price, &xi);
    let wealth = wealth_process(tree, fair_price, &xi);

    let terminal_residual: Vec<R> = tree
        .leaves()
        .iter()
        .enumerate()
        .map(|(pos, leaf)| (*claim.value(pos) - *wealth.at(*leaf)) / *spec.value_at(*leaf))
        .collect();
    let residual = martingale_from_terminal(tree, &terminal_residual);

    let diagnostics = diagnose(
        tree,
        spec,
        claim,
        &xi,
        &lifted,
        &wealth,
        &conditional_price,
        &residual,
        &terminal_residual,
        inv_n2,
        fair_price,
    );

    Decomposition {
        fair_price,
        conditional_price,
        strategy: xi,
        lifted,
        residual,
        covariances,
        diagnostics,
    }
}

#[allow(clippy::too_many_arguments)]
fn diagnose<R: Real>(
    tree: &ScenarioTree<R>,
    spec: &NumeraireSpec<R>,
    claim: &Claim<R>,
    xi: &Strategy<R>,
    lifted: &LiftedStrategy<R>,
    wealth: &ScalarProcess<R>,
    conditional_price: &ScalarProcess<R>,
    residual: &ScalarProcess<R>,
    terminal_residual: &[R],
    inv_n2: &[R],
    fair_price: R,
) -> HedgeDiagnostics<R> {
    let d = tree.asset_count();

    // Pathwise identity in numeraire units.
    let denominated_gains = lifted.denominated_gains(tree, spec);
    let mut pathwise = R::zero();
    for (pos, leaf) in tree.leaves().iter().enumerate() {
        let lhs = *claim.value(pos) / *spec.value_at(*leaf);
        let rhs = fair_price + *denominated_gains.at(*leaf) + terminal_residual[pos];
        let gap = (lhs - rhs).abs();
        if gap > pathwise {
            pathwise = gap;
        }
    }

    // One-step martingale defect of the residual.
    let mut martingale = R::zero();
    for u in tree.interior_ids() {
        let mut acc = R::zero();
        for c in tree.children(u) {
            acc = acc + tree.node(*c).cond_prob * *residual.at(*c);
        }
        let gap = (acc - *residual.at(u)).abs();
        if gap > martingale {
            martingale = gap;
        }
    }

    // First-order conditions.
    let mut price_foc = R::zero();
    let mut strategy_foc = R::zero();
    for u in tree.interior_ids() {
        let frame = Frame::new(tree, u);
        // Price: conditional weighted mean of (hedged remainder - price).
        let foc = frame.mean(|k| {
            let g = frame.global(k);
            let leaf = tree.leaves()[g];
            let future_gain = *wealth.at(leaf) - *wealth.at(u);
            inv_n2[g] * (*claim.value(g) - future_gain - *conditional_price.at(u))
        });
        if foc.abs() > price_foc {
            price_foc = foc.abs();
        }
        // Strategy: the solved normal equations, re-evaluated from scratch
        // against the residual including this node's own step.
        let e0 = frame.mean(|k| inv_n2[frame.global(k)]);
        for i in 0..d {
            let m_i = frame.mean(|k| inv_n2[frame.global(k)] * frame.step(k, i)) / e0;
            let m_r = frame.mean(|k| {
                let g = frame.global(k);
                inv_n2[g] * (*claim.value(g) - (*wealth.at(tree.leaves()[g]) - *wealth.at(u)))
            }) / e0;
            let v = frame.mean(|k| {
                let g = frame.global(k);
                let leaf = tree.leaves()[g];
                let r = *claim.value(g) - (*wealth.at(leaf) - *wealth.at(u));
                inv_n2[g] * (r - m_r) * (frame.step(k, i) - m_i)
            });
            if v.abs() > strategy_foc {
                strategy_foc = v.abs();
            }
        }
        let _ = xi;
    }

    // Residual means.
    let root = tree.root();
    let residual_mean = tree.expect_leaves(root, terminal_residual);
    let residual_weighted_mean = tree.expect_with(root, |pos, leaf| {
        terminal_residual[pos] / *spec.value_at(leaf)
    });

    // Orthogonality against the martingale parts of the denominated prices.
    let mut orthogonality = R::zero();
    for u in tree.interior_ids() {
        for i in 0..=d {
            let mut mean_step = R::zero();
            for c in tree.children(u) {
                let ds = spec.denominated_prices().at(*c)[i] - spec.denominated_prices().at(u)[i];
                mean_step = mean_step + tree.node(*c).cond_prob * ds;
            }
            let mut acc = R::zero();
            for c in tree.children(u) {
                let ds = spec.denominated_prices().at(*c)[i] - spec.denominated_prices().at(u)[i];
                let dl = *residual.at(*c) - *residual.at(u);
                acc = acc + tree.node(*c).cond_prob * dl * (ds - mean_step);
            }
            if acc.abs() > orthogonality {
                orthogonality = acc.abs();
            }
        }
    }

    HedgeDiagnostics {
        pathwise_identity_max: pathwise,
        residual_martingale_max: martingale,
        price_foc_max: price_foc,
        strategy_foc_max: strategy_foc,
        residual_mean,
        residual_weighted_mean,
        orthogonality_max: orthogonality,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numeraire::build_numeraire;

    #[test]
    fn trinomial_unit_numeraire_values() {
        let tree = fixtures::trinomial::<f64>();
        let claim = fixtures::call_strike_3(&tree);
        let dec = fs_decompose(&tree, &unit_numeraire(&tree), &claim).unwrap();
        assert!((dec.fair_price - 1.0 / 6.0).abs() < 1e-12);
        assert!((dec.strategy.at(tree.root())[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trinomial_half_share_values() {
        // Exact solution of the weighted one-period problem: position 1/6,
        // price 2/15 (cross-checked against the global solver and exact
        // rational arithmetic).
        let tree = fixtures::trinomial::<f64>();
        let claim = fixtures::call_strike_3(&tree);
        let spec = build_numeraire(&tree, fixtures::half_share(&tree)).unwrap();
        let dec = fs_decompose(&tree, &spec, &claim).unwrap();
        assert!((dec.strategy.at(tree.root())[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((dec.fair_price - 2.0 / 15.0).abs() < 1e-12);
        // The weighted residual mean is the one pinned to zero.
        assert!(dec.diagnostics.residual_weighted_mean.abs() < 1e-12);
    }

    #[test]
    fn classical_matches_weighted_under_zero_generator() {
        let tree = fixtures::two_period_drifted::<f64>();
        let claim = fixtures::square_claim(&tree);
        let classical = classical_fs(&tree, &claim).unwrap();
        let weighted = fs_decompose(&tree, &unit_numeraire(&tree), &claim).unwrap();
        assert!((classical.fair_price - weighted.fair_price).abs() < 1e-12);
        for u in tree.interior_ids() {
            for i in 0..tree.asset_count() {
                assert!((classical.strategy.at(u)[i] - weighted.strategy.at(u)[i]).abs() < 1e-12);
            }
        }
        for u in tree.node_ids() {
            assert!((classical.residual.at(u) - weighted.residual.at(u)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_claim_is_all_cash() {
        let tree = fixtures::trinomial::<f64>();
        let claim = Claim::from_fn(&tree, |_| 4.25f64);
        let dec = classical_fs(&tree, &claim).unwrap();
        assert!((dec.fair_price - 4.25).abs() < 1e-12);
        assert!(dec.strategy.at(tree.root())[0].abs() < 1e-12);
        for u in tree.node_ids() {
            assert!(dec.residual.at(u).abs() < 1e-12);
        }
    }

    #[test]
    fn increment_claim_is_replicated() {
        let tree = fixtures::trinomial::<f64>();
        let claim = Claim::from_fn(&tree, |leaf| tree.price_step(leaf, 0));
        let dec = classical_fs(&tree, &claim).unwrap();
        assert!((dec.strategy.at(tree.root())[0] - 1.0).abs() < 1e-12);
        assert!(dec.fair_price.abs() < 1e-12);
        for u in tree.node_ids() {
            assert!(dec.residual.at(u).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_stock_claim_replication() {
        let tree = fixtures::two_state::<f64>();
        let claim = fixtures::stock_claim(&tree);
        let dec = fs_decompose(&tree, &unit_numeraire(&tree), &claim).unwrap();
        assert!((dec.strategy.at(tree.root())[0] - 1.0).abs() < 1e-12);
        assert!((dec.fair_price - 2.0).abs() < 1e-12);
        for u in tree.node_ids() {
            assert!(dec.residual.at(u).abs() < 1e-12);
        }
    }

    #[test]
    fn redundant_assets_are_rejected() {
        // Duplicate the stock as a second asset: the covariance system is
        // exactly rank one.
        let mut b = crate::market::TreeBuilder::new(vec![2.0f64, 2.0]);
        let root = b.root();
        for (price, prob) in [(4.0, 1.0 / 6.0), (2.0, 0.5), (1.0, 1.0 / 3.0)] {
            b.add_child(root, prob, vec![price, price]);
        }
        let tree = b.build(&crate::market::ValidationLimits::default()).unwrap();
        let claim = fixtures::call_strike_3(&tree);
        let err = fs_decompose(&tree, &unit_numeraire(&tree), &claim).unwrap_err();
        assert!(matches!(err, HedgeError::SingularCovariance { .. }));
        let err = classical_fs(&tree, &claim).unwrap_err();
        assert!(matches!(err, HedgeError::ZeroConditionalVariance { .. }));
    }

    #[test]
    fn interest_rate_one_period_only() {
        let tree = fixtures::two_period_drifted::<f64>();
        let claim = fixtures::square_claim(&tree);
        let err = interest_rate_fair_price(&tree, &claim, 0.1).unwrap_err();
        assert!(matches!(err, HedgeError::HorizonNotOne { horizon: 2 }));
    }

    #[test]
    fn interest_rate_values() {
        let tree = fixtures::trinomial::<f64>();
        let claim = fixtures::call_strike_3(&tree);
        // Zero rate reduces to the unit-numeraire solution.
        let (p0, xi0) = interest_rate_fair_price(&tree, &claim, 0.0).unwrap();
        assert!((p0 - 1.0 / 6.0).abs() < 1e-12);
        assert!((xi0.at(tree.root())[0] - 1.0 / 3.0).abs() < 1e-12);
        // r = 0.1: E[H]/1.1 - (1/3)(E[S_1]/1.1 - 2) = 7/33, position unchanged.
        let (p, xi) = interest_rate_fair_price(&tree, &claim, 0.1).unwrap();
        assert!((xi.at(tree.root())[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p - 7.0 / 33.0).abs() < 1e-12);
    }

    #[test]
    fn early_decided_claim_has_zero_late_positions() {
        // Payoff depends only on the first step; second-period positions
        // solve a homogeneous system and come out zero.
        let tree = fixtures::two_period_drifted::<f64>();
        let claim = Claim::from_fn(&tree, |leaf| {
            let mid = tree.ancestor_at(leaf, 1);
            tree.node(mid).prices[0]
        });
        let dec = classical_fs(&tree, &claim).unwrap();
        for u in tree.at_time(1) {
            assert!(dec.strategy.at(*u)[0].abs() < 1e-12);
        }
    }
}
