//! Node-indexed processes: adapted scalars/vectors, predictable strategies,
//! and terminal claims.

use crate::market::tree::{NodeId, ScenarioTree};
use crate::scalar::Scalar;

/// Adapted scalar process: one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProcess<S> {
    values: Vec<S>,
}

impl<S: Scalar> ScalarProcess<S> {
    pub fn constant<T>(tree: &ScenarioTree<T>, value: S) -> Self
    where
        T: Scalar,
    {
        ScalarProcess {
            values: vec![value; tree.node_count()],
        }
    }

    pub fn from_fn<T: Scalar>(tree: &ScenarioTree<T>, mut f: impl FnMut(NodeId) -> S) -> Self {
        ScalarProcess {
            values: tree.node_ids().map(&mut f).collect(),
        }
    }

    pub fn at(&self, node: NodeId) -> &S {
        &self.values[node.index()]
    }

    pub fn set(&mut self, node: NodeId, value: S) {
        self.values[node.index()] = value;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.values.iter()
    }
}

/// Adapted d-vector process: one `asset_count`-vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorProcess<S> {
    dim: usize,
    values: Vec<Vec<S>>,
}

impl<S: Scalar> VectorProcess<S> {
    pub fn from_fn<T: Scalar>(
        tree: &ScenarioTree<T>,
        dim: usize,
        mut f: impl FnMut(NodeId) -> Vec<S>,
    ) -> Self {
        let values: Vec<Vec<S>> = tree
            .node_ids()
            .map(|id| {
                let v = f(id);
                assert_eq!(v.len(), dim, "vector process arity mismatch");
                v
            })
            .collect();
        VectorProcess { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, node: NodeId) -> &[S] {
        &self.values[node.index()]
    }
}

/// Predictable d-vector process: the position held over the step out of
/// each non-terminal node. Known one period in advance by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<S> {
    dim: usize,
    /// Indexed by node id; leaves keep an empty slot.
    values: Vec<Vec<S>>,
}

impl<S: Scalar> Strategy<S> {
    /// All-zero strategy.
    pub fn zeros<T: Scalar>(tree: &ScenarioTree<T>) -> Self {
        Self::from_fn(tree, |_| vec![S::zero(); tree.asset_count()])
    }

    /// One value per non-terminal node, one entry per traded stock.
    pub fn from_fn<T: Scalar>(tree: &ScenarioTree<T>, f: impl FnMut(NodeId) -> Vec<S>) -> Self {
        Self::from_fn_dim(tree, tree.asset_count(), f)
    }

    /// One value per non-terminal node with an explicit arity (the
    /// self-financing lift carries the bank account as an extra entry).
    pub fn from_fn_dim<T: Scalar>(
        tree: &ScenarioTree<T>,
        dim: usize,
        mut f: impl FnMut(NodeId) -> Vec<S>,
    ) -> Self {
        let horizon = tree.horizon();
        let values: Vec<Vec<S>> = tree
            .node_ids()
            .map(|id| {
                if tree.node(id).time < horizon {
                    let v = f(id);
                    assert_eq!(v.len(), dim, "strategy arity mismatch");
                    v
                } else {
                    Vec::new()
                }
            })
            .collect();
        Strategy { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position held over the step out of `node`. Panics on leaves.
    pub fn at(&self, node: NodeId) -> &[S] {
        let v = &self.values[node.index()];
        assert!(!v.is_empty() || self.dim == 0, "strategy queried at a leaf");
        v
    }

    pub fn set(&mut self, node: NodeId, value: Vec<S>) {
        assert_eq!(value.len(), self.dim, "strategy arity mismatch");
        self.values[node.index()] = value;
    }

    /// Scales every position by `factor`.
    pub fn scaled(&self, factor: &S) -> Self {
        Strategy {
            dim: self.dim,
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|x| x.clone() * factor.clone()).collect())
                .collect(),
        }
    }
}

/// Terminal payoff: one value per leaf, stored in the tree's depth-first
/// leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim<S> {
    values: Vec<S>,
}

impl<S: Scalar> Claim<S> {
    /// Payoff from a function of the leaf node.
    pub fn from_fn<T: Scalar>(tree: &ScenarioTree<T>, mut f: impl FnMut(NodeId) -> S) -> Self {
        Claim {
            values: tree.leaves().iter().map(|l| f(*l)).collect(),
        }
    }

    /// Payoff from explicit leaf-ordered values.
    pub fn from_leaf_values<T: Scalar>(tree: &ScenarioTree<T>, values: Vec<S>) -> Option<Self> {
        (values.len() == tree.leaves().len()).then_some(Claim { values })
    }

    /// Value at the `ordinal`-th leaf (depth-first order).
    pub fn value(&self, ordinal: usize) -> &S {
        &self.values[ordinal]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// Pointwise scaling.
    pub fn scaled(&self, factor: &S) -> Self {
        Claim {
            values: self
                .values
                .iter()
                .map(|v| v.clone() * factor.clone())
                .collect(),
        }
    }
}
