//! Scenario tree: a finite filtered probability space.
//!
//! Nodes at depth `n` are the atoms of the time-`n` sigma-field. The root is
//! the trivial time-0 atom, leaves (all at the horizon) are the elementary
//! outcomes. Transition probabilities are stored per edge (conditional), and
//! unconditional path weights are derived once at construction.

use thiserror::Error;

use crate::scalar::Scalar;

/// Opaque node identifier. Indexes into the tree's node storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    /// Raw index, stable for the lifetime of the tree.
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// One atom of the filtration.
#[derive(Debug, Clone)]
pub struct Node<S> {
    /// Time index in `0..=horizon`.
    pub time: usize,
    /// Parent atom; `None` exactly for the root.
    pub parent: Option<NodeId>,
    /// Transition probability from the parent (1 for the root).
    pub cond_prob: S,
    /// Stock prices at this node, one per asset. The bank account is
    /// implicit and constant 1.
    pub prices: Vec<S>,
}

/// Construction-time structural violations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("node {node} at time {time} exceeds horizon {horizon}")]
    TimeOutOfRange {
        node: NodeId,
        time: usize,
        horizon: usize,
    },
    #[error("node {node}: conditional probability {value} is not strictly positive")]
    NonPositiveProbability { node: NodeId, value: String },
    #[error("node {node}: children probabilities sum to {sum}, expected 1")]
    ProbabilitySum { node: NodeId, sum: String },
    #[error("node {node}: price {value} of asset {asset} is not strictly positive")]
    NonPositivePrice {
        node: NodeId,
        asset: usize,
        value: String,
    },
    #[error("node {node}: has {got} prices, expected {expected}")]
    PriceArity {
        node: NodeId,
        got: usize,
        expected: usize,
    },
    #[error("node {node} at time {time} has no children but the horizon is {horizon}")]
    TruncatedPath {
        node: NodeId,
        time: usize,
        horizon: usize,
    },
    #[error("child node {node} at time {time} does not follow its parent at time {parent_time}")]
    BrokenTimeStep {
        node: NodeId,
        time: usize,
        parent_time: usize,
    },
}

/// Tolerances applied when validating a tree.
///
/// For exact scalar types use [`ValidationLimits::exact`]; floats get the
/// standard 1e-12 probability-sum slack.
#[derive(Debug, Clone)]
pub struct ValidationLimits<S> {
    /// Allowed deviation of each node's children-probability sum from 1.
    pub prob_sum_tol: S,
}

impl<S: Scalar> ValidationLimits<S> {
    /// Zero slack; suitable for exact rational scalars.
    pub fn exact() -> Self {
        ValidationLimits {
            prob_sum_tol: S::zero(),
        }
    }
}

impl<R: crate::scalar::Real> Default for ValidationLimits<R> {
    fn default() -> Self {
        ValidationLimits {
            prob_sum_tol: R::of(1e-12),
        }
    }
}

/// Incremental builder. Children keep insertion order, which fixes the
/// summation order of every conditional operator built on the tree.
#[derive(Debug, Clone)]
pub struct TreeBuilder<S> {
    nodes: Vec<Node<S>>,
    children: Vec<Vec<NodeId>>,
}

impl<S: Scalar> TreeBuilder<S> {
    /// Starts a tree from the root prices.
    pub fn new(root_prices: Vec<S>) -> Self {
        TreeBuilder {
            nodes: vec![Node {
                time: 0,
                parent: None,
                cond_prob: S::one(),
                prices: root_prices,
            }],
            children: vec![Vec::new()],
        }
    }

    /// Root id (always the first node).
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Prices stored for an already-added node.
    pub fn prices_of(&self, node: NodeId) -> Vec<S> {
        self.nodes[node.0].prices.clone()
    }

    /// Appends a child under `parent`; returns the new node's id.
    pub fn add_child(&mut self, parent: NodeId, cond_prob: S, prices: Vec<S>) -> NodeId {
        let id = NodeId(self.nodes.len());
        let time = self.nodes[parent.0].time + 1;
        self.nodes.push(Node {
            time,
            parent: Some(parent),
            cond_prob,
            prices,
        });
        self.children.push(Vec::new());
        self.children[parent.0].push(id);
        id
    }

    /// Validates the structure and freezes it into a [`ScenarioTree`].
    pub fn build(self, limits: &ValidationLimits<S>) -> Result<ScenarioTree<S>, TreeError> {
        ScenarioTree::from_parts(self.nodes, self.children, limits)
    }
}

/// Finite filtered probability space over a rooted tree.
///
/// Immutable after construction; all operators on it are pure functions, so
/// sharing across threads is safe.
#[derive(Debug, Clone)]
pub struct ScenarioTree<S> {
    horizon: usize,
    asset_count: usize,
    nodes: Vec<Node<S>>,
    children: Vec<Vec<NodeId>>,
    /// Nodes per time level, in depth-first order.
    by_time: Vec<Vec<NodeId>>,
    /// Leaves in depth-first order; every conditional operator folds over
    /// these left to right, which makes results bit-reproducible.
    leaves: Vec<NodeId>,
    /// Unconditional path probability per node.
    path_prob: Vec<S>,
    /// Half-open range into `leaves` holding each node's descendants.
    leaf_span: Vec<(usize, usize)>,
}

impl<S: Scalar> ScenarioTree<S> {
    fn from_parts(
        nodes: Vec<Node<S>>,
        children: Vec<Vec<NodeId>>,
        limits: &ValidationLimits<S>,
    ) -> Result<Self, TreeError> {
        if nodes.is_empty() {
            return Err(TreeError::Empty);
        }
        let horizon = nodes.iter().map(|n| n.time).max().unwrap_or(0);
        let asset_count = nodes[0].prices.len();

        for (i, node) in nodes.iter().enumerate() {
            let id = NodeId(i);
            if node.prices.len() != asset_count {
                return Err(TreeError::PriceArity {
                    node: id,
                    got: node.prices.len(),
                    expected: asset_count,
                });
            }
            for (asset, p) in node.prices.iter().enumerate() {
                if *p <= S::zero() {
                    return Err(TreeError::NonPositivePrice {
                        node: id,
                        asset,
                        value: format!("{p:?}"),
                    });
                }
            }
            if node.cond_prob <= S::zero() || node.cond_prob > S::one() {
                return Err(TreeError::NonPositiveProbability {
                    node: id,
                    value: format!("{:?}", node.cond_prob),
                });
            }
            if let Some(parent) = node.parent {
                let pt = nodes[parent.0].time;
                if node.time != pt + 1 {
                    return Err(TreeError::BrokenTimeStep {
                        node: id,
                        time: node.time,
                        parent_time: pt,
                    });
                }
            }
            if node.time < horizon && children[i].is_empty() {
                return Err(TreeError::TruncatedPath {
                    node: id,
                    time: node.time,
                    horizon,
                });
            }
            if node.time == horizon && !children[i].is_empty() {
                return Err(TreeError::TimeOutOfRange {
                    node: NodeId(children[i][0].0),
                    time: horizon + 1,
                    horizon,
                });
            }
            if !children[i].is_empty() {
                let mut sum = S::zero();
                for c in &children[i] {
                    sum = sum + nodes[c.0].cond_prob.clone();
                }
                let dev = if sum >= S::one() {
                    sum.clone() - S::one()
                } else {
                    S::one() - sum.clone()
                };
                if dev > limits.prob_sum_tol {
                    return Err(TreeError::ProbabilitySum {
                        node: id,
                        sum: format!("{sum:?}"),
                    });
                }
            }
        }

        // Depth-first order fixes leaf order and hence every accumulation.
        let mut by_time = vec![Vec::new(); horizon + 1];
        let mut leaves = Vec::new();
        let mut leaf_span = vec![(0usize, 0usize); nodes.len()];
        let mut stack = vec![(NodeId(0), false)];
        let mut order = Vec::with_capacity(nodes.len());
        while let Some((id, visited)) = stack.pop() {
            if visited {
                let end = leaves.len();
                leaf_span[id.0].1 = end;
                continue;
            }
            order.push(id);
            by_time[nodes[id.0].time].push(id);
            leaf_span[id.0].0 = leaves.len();
            if children[id.0].is_empty() {
                leaves.push(id);
            }
            stack.push((id, true));
            for c in children[id.0].iter().rev() {
                stack.push((*c, false));
            }
        }
        if order.len() != nodes.len() {
            // Unreachable nodes can only come from a corrupted hand-built
            // node list; the builder cannot produce them.
            return Err(TreeError::Empty);
        }

        let mut path_prob = vec![S::zero(); nodes.len()];
        for id in &order {
            let n = &nodes[id.0];
            path_prob[id.0] = match n.parent {
                None => n.cond_prob.clone(),
                Some(p) => path_prob[p.0].clone() * n.cond_prob.clone(),
            };
        }

        Ok(ScenarioTree {
            horizon,
            asset_count,
            nodes,
            children,
            by_time,
            leaves,
            path_prob,
            leaf_span,
        })
    }

    /// Number of periods.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of traded stocks (excluding the constant bank account).
    pub fn asset_count(&self) -> usize {
        self.asset_count
    }

    /// Total node count.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node<S> {
        &self.nodes[id.0]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    /// Nodes at a time level, depth-first order.
    pub fn at_time(&self, time: usize) -> &[NodeId] {
        &self.by_time[time]
    }

    /// All node ids, in storage order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Non-terminal node ids, outer time level, inner depth-first.
    pub fn interior_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_time[..self.horizon]
            .iter()
            .flat_map(|level| level.iter().copied())
    }

    /// Leaves (time-`horizon` atoms), depth-first order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Position of a leaf in [`Self::leaves`].
    pub fn leaf_ordinal(&self, leaf: NodeId) -> usize {
        self.leaf_span[leaf.0].0
    }

    /// Range into [`Self::leaves`] spanned by `node`'s descendants.
    pub fn leaf_range(&self, node: NodeId) -> std::ops::Range<usize> {
        let (a, b) = self.leaf_span[node.0];
        a..b
    }

    /// Unconditional probability of the path from the root to `node`.
    pub fn path_prob(&self, node: NodeId) -> &S {
        &self.path_prob[node.0]
    }

    /// Ancestor of `node` at `time` (may be `node` itself).
    pub fn ancestor_at(&self, node: NodeId, time: usize) -> NodeId {
        let mut u = node;
        while self.nodes[u.0].time > time {
            u = self.nodes[u.0].parent.expect("non-root node has a parent");
        }
        u
    }

    /// Price increment of asset `i` over the step into `node`.
    pub fn price_step(&self, node: NodeId, asset: usize) -> S {
        let parent = self.nodes[node.0].parent.expect("root has no increment");
        self.nodes[node.0].prices[asset].clone() - self.nodes[parent.0].prices[asset].clone()
    }

    /// Probability-weighted average of a leaf-indexed slice, conditioned on
    /// `node`. The fold runs over the node's leaf range in depth-first
    /// order.
    pub fn expect_leaves(&self, node: NodeId, values: &[S]) -> S {
        let mut acc = S::zero();
        for pos in self.leaf_range(node) {
            let leaf = self.leaves[pos];
            acc = acc + self.path_prob[leaf.0].clone() * values[pos].clone();
        }
        acc / self.path_prob[node.0].clone()
    }

    /// Like [`Self::expect_leaves`] but with the value produced on the fly.
    pub fn expect_with(&self, node: NodeId, mut f: impl FnMut(usize, NodeId) -> S) -> S {
        let mut acc = S::zero();
        for pos in self.leaf_range(node) {
            let leaf = self.leaves[pos];
            acc = acc + self.path_prob[leaf.0].clone() * f(pos, leaf);
        }
        acc / self.path_prob[node.0].clone()
    }
}
