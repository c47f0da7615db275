//! Tradable numeraires: units of account realized as self-financing
//! portfolio values, the prices they induce, and the lift that turns a
//! stock-only strategy into a self-financing bank-plus-stocks position.

use thiserror::Error;

use crate::market::{gains, NodeId, ScalarProcess, ScenarioTree, Strategy, VectorProcess};
use crate::scalar::{Real, Scalar};

/// Positivity floor for numeraire values. A candidate whose value drops to
/// this level is rejected rather than allowed to produce huge weights.
pub const NUMERAIRE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumeraireError {
    #[error("candidate numeraire is not strictly positive at node {node} (value {value})")]
    NonPositiveNumeraire { node: NodeId, value: f64 },
}

/// A tradable numeraire: the generating strategy, its realized value
/// process `N` (normalized to 1 at the root), and the full price vector
/// re-expressed in units of `N`.
#[derive(Debug, Clone)]
pub struct NumeraireSpec<S> {
    generator: Strategy<S>,
    values: ScalarProcess<S>,
    /// `(d+1)`-vector per node: bank and stocks divided by `N`.
    denominated: VectorProcess<S>,
}

impl<S: Scalar> NumeraireSpec<S> {
    /// Generating strategy.
    pub fn generator(&self) -> &Strategy<S> {
        &self.generator
    }

    /// Value process `N`.
    pub fn values(&self) -> &ScalarProcess<S> {
        &self.values
    }

    /// `N` at one node.
    pub fn value_at(&self, node: NodeId) -> &S {
        self.values.at(node)
    }

    /// Prices in units of `N`: component 0 is the bank account `1/N`,
    /// component `i + 1` is stock `i` divided by `N`.
    pub fn denominated_prices(&self) -> &VectorProcess<S> {
        &self.denominated
    }

    /// Increment of the denominated price vector over the step into `node`.
    pub fn denominated_step(&self, tree: &ScenarioTree<S>, node: NodeId) -> Vec<S> {
        let parent = tree.node(node).parent.expect("root has no increment");
        self.denominated
            .at(node)
            .iter()
            .zip(self.denominated.at(parent))
            .map(|(a, b)| a.clone() - b.clone())
            .collect()
    }

    /// Terminal numeraire values in leaf order.
    pub fn terminal_values(&self, tree: &ScenarioTree<S>) -> Vec<S> {
        tree.leaves()
            .iter()
            .map(|l| self.values.at(*l).clone())
            .collect()
    }
}

fn assemble<S: Scalar>(
    tree: &ScenarioTree<S>,
    generator: Strategy<S>,
    values: ScalarProcess<S>,
) -> NumeraireSpec<S> {
    let denominated = VectorProcess::from_fn(tree, tree.asset_count() + 1, |u| {
        let n = values.at(u).clone();
        let mut v = Vec::with_capacity(tree.asset_count() + 1);
        v.push(S::one() / n.clone());
        for s in &tree.node(u).prices {
            v.push(s.clone() / n.clone());
        }
        v
    });
    NumeraireSpec {
        generator,
        values,
        denominated,
    }
}

/// Builds the numeraire generated by `eta`: one unit of account rolled
/// forward by trading `eta`, so `N = 1 + accumulated gains`. Fails if the
/// realized value is not strictly positive everywhere.
pub fn build_numeraire<R: Real>(
    tree: &ScenarioTree<R>,
    eta: Strategy<R>,
) -> Result<NumeraireSpec<R>, NumeraireError> {
    let g = gains(tree, &eta);
    let values = ScalarProcess::from_fn(tree, |u| R::one() + *g.at(u));
    check_positive(tree, &values)?;
    Ok(assemble(tree, eta, values))
}

/// Builds a numeraire from a generator and externally supplied values.
/// Used by the perturbation family, which knows the values in closed form;
/// callers are responsible for `values = 1 + gains(eta)`.
pub(crate) fn build_numeraire_with_values<R: Real>(
    tree: &ScenarioTree<R>,
    eta: Strategy<R>,
    values: ScalarProcess<R>,
) -> Result<NumeraireSpec<R>, NumeraireError> {
    check_positive(tree, &values)?;
    Ok(assemble(tree, eta, values))
}

/// The constant unit numeraire (zero generator).
pub fn unit_numeraire<R: Real>(tree: &ScenarioTree<R>) -> NumeraireSpec<R> {
    assemble(
        tree,
        Strategy::zeros(tree),
        ScalarProcess::constant(tree, R::one()),
    )
}

fn check_positive<R: Real>(
    tree: &ScenarioTree<R>,
    values: &ScalarProcess<R>,
) -> Result<(), NumeraireError> {
    let floor = R::of(NUMERAIRE_FLOOR);
    for u in tree.node_ids() {
        let v = *values.at(u);
        if v <= floor {
            return Err(NumeraireError::NonPositiveNumeraire {
                node: u,
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

/// Re-expresses a wealth-like process in units of the numeraire.
pub fn denominate_wealth<S: Scalar>(
    tree: &ScenarioTree<S>,
    spec: &NumeraireSpec<S>,
    x: &ScalarProcess<S>,
) -> ScalarProcess<S> {
    ScalarProcess::from_fn(tree, |u| x.at(u).clone() / spec.value_at(u).clone())
}

/// A stock strategy completed with the bank position that makes it
/// self-financing from the given initial wealth.
#[derive(Debug, Clone)]
pub struct LiftedStrategy<S> {
    initial_wealth: S,
    /// `(d+1)`-vector per non-terminal node, bank position first.
    positions: Strategy<S>,
}

impl<S: Scalar> LiftedStrategy<S> {
    pub fn initial_wealth(&self) -> &S {
        &self.initial_wealth
    }

    /// Bank-plus-stocks position held over the step out of `node`.
    pub fn position_at(&self, node: NodeId) -> &[S] {
        self.positions.at(node)
    }

    /// Drops the bank component, returning the original stock strategy.
    pub fn stock_strategy<T: Scalar>(&self, tree: &ScenarioTree<T>) -> Strategy<S> {
        Strategy::from_fn(tree, |u| self.positions.at(u)[1..].to_vec())
    }

    /// Gains accumulated against the numeraire-denominated price vector:
    /// the sum over steps of position times denominated price increment.
    pub fn denominated_gains(
        &self,
        tree: &ScenarioTree<S>,
        spec: &NumeraireSpec<S>,
    ) -> ScalarProcess<S> {
        let mut acc = ScalarProcess::constant(tree, S::zero());
        for t in 1..=tree.horizon() {
            for v in tree.at_time(t) {
                let parent = tree.node(*v).parent.expect("non-root");
                let pos = self.positions.at(parent);
                let step = spec.denominated_step(tree, *v);
                let mut inc = S::zero();
                for (q, ds) in pos.iter().zip(&step) {
                    inc = inc.clone() + q.clone() * ds.clone();
                }
                let val = acc.at(parent).clone() + inc;
                acc.set(*v, val);
            }
        }
        acc
    }
}

/// Wealth process of `(initial, xi)` in original units: initial wealth plus
/// accumulated stock gains.
pub fn wealth_process<S: Scalar>(
    tree: &ScenarioTree<S>,
    initial: S,
    xi: &Strategy<S>,
) -> ScalarProcess<S> {
    let g = gains(tree, xi);
    ScalarProcess::from_fn(tree, |u| initial.clone() + g.at(u).clone())
}

/// Completes a stock strategy into a self-financing bank-plus-stocks
/// position: over each step the bank holds whatever last period's wealth
/// does not keep in stocks. The same position is then self-financing in
/// numeraire units as well, with denominated wealth equal to wealth over
/// `N` pathwise.
pub fn lift_self_financing<S: Scalar>(
    tree: &ScenarioTree<S>,
    initial: S,
    xi: &Strategy<S>,
) -> LiftedStrategy<S> {
    let wealth = wealth_process(tree, initial.clone(), xi);
    let positions = Strategy::from_fn_dim(tree, xi.dim() + 1, |u| {
        let held = xi.at(u);
        let prices = &tree.node(u).prices;
        let mut in_stocks = S::zero();
        for (q, s) in held.iter().zip(prices) {
            in_stocks = in_stocks + q.clone() * s.clone();
        }
        let mut pos = Vec::with_capacity(held.len() + 1);
        pos.push(wealth.at(u).clone() - in_stocks);
        pos.extend(held.iter().cloned());
        pos
    });
    LiftedStrategy {
        initial_wealth: initial,
        positions,
    }
}

/// Result of checking the wealth correspondence between original and
/// numeraire units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrespondenceReport<R> {
    /// Max over nodes of the absolute gap between the lifted strategy's
    /// denominated wealth and original wealth divided by `N`.
    pub max_deviation: R,
}

/// Verifies that lifting and denominating commute: the lifted strategy's
/// wealth in numeraire units equals the original-unit wealth divided by
/// `N` at every node. Returns the worst absolute gap.
pub fn verify_wealth_correspondence<R: Real>(
    tree: &ScenarioTree<R>,
    spec: &NumeraireSpec<R>,
    initial: R,
    xi: &Strategy<R>,
) -> CorrespondenceReport<R> {
    let lifted = lift_self_financing(tree, initial, xi);
    let wealth = wealth_process(tree, initial, xi);
    let denominated = denominate_wealth(tree, spec, &wealth);
    let lifted_gains = lifted.denominated_gains(tree, spec);
    let mut worst = R::zero();
    for u in tree.node_ids() {
        let lhs = initial / *spec.value_at(tree.root()) + *lifted_gains.at(u);
        let gap = (lhs - *denominated.at(u)).abs();
        if gap > worst {
            worst = gap;
        }
    }
    CorrespondenceReport {
        max_deviation: worst,
    }
}
