//! Finite filtered probability spaces as scenario trees, with adapted and
//! predictable process storage and the conditional operators everything
//! else is built from.

mod ops;
mod process;
mod tree;

pub use ops::{
    cond_expect, doob_decompose, gains, lift_to_leaves, martingale_from_terminal,
    weighted_bilinear, weighted_form_at, weighted_mean_at, DoobDecomposition, MarketOpError,
    TimeSlice,
};
pub use process::{Claim, ScalarProcess, Strategy, VectorProcess};
pub use tree::{Node, NodeId, ScenarioTree, TreeBuilder, TreeError, ValidationLimits};
