//! Families of numeraires scaled by a small parameter, numerical stability
//! sweeps, and closed-form first-order corrections of the hedging outputs,
//! validated against central finite differences.
//!
//! The correction recursion ships in three assemblies (see
//! [`CorrectionVariant`]). [`finite_difference_validate`] discriminates
//! between them at second order in the step, and [`select_variant`] picks
//! whichever assembly the differences confirm.

use thiserror::Error;

use crate::hedging::{fs_decompose, Decomposition, HedgeError};
use crate::market::{gains, martingale_from_terminal, Claim, ScalarProcess, ScenarioTree, Strategy};
use crate::numeraire::{unit_numeraire, wealth_process, NumeraireSpec};
use crate::scalar::Real;

/// Safety factor applied to the positivity bound of the scale parameter.
pub const EPS_SAFETY: f64 = 0.99;

/// Relative noise floor for the finite-difference order test: deviations at
/// or below `floor * (1 + correction scale)` count as converged regardless
/// of order.
pub const FD_NOISE_FLOOR: f64 = 1e-10;

/// Relative agreement floor at the coarsest step: when the deviation there
/// is already this small against the primal magnitudes, the difference
/// quotient is cancellation-noise bound and the order test is moot.
pub const FD_MATCH_FLOOR: f64 = 1e-6;

/// Minimum empirical decay order for a validation pass.
pub const FD_ORDER_PASS: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("scale {eps} is outside the positivity bounds ({lower}, {upper})")]
    EpsOutOfBounds { eps: f64, lower: f64, upper: f64 },
    #[error("the scale grid must be nonempty, nonzero and strictly decreasing in magnitude")]
    BadGrid,
    #[error("decomposition failed at scale {eps}: {source}")]
    HedgeAt { eps: f64, source: HedgeError },
    #[error(transparent)]
    Hedge(#[from] HedgeError),
}

/// Two-sided positivity bounds for the scale parameter; infinite when the
/// corresponding side never threatens positivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsBounds<R> {
    pub lower: R,
    pub upper: R,
}

impl<R: Real> EpsBounds<R> {
    pub fn contains(&self, eps: R) -> bool {
        eps > self.lower && eps < self.upper
    }
}

/// A linear family of numeraires: at scale `eps` the value process is
/// `1 + eps * derivative`, generated by `eps * generator`.
#[derive(Debug, Clone)]
pub struct PerturbationFamily<R> {
    generator: Strategy<R>,
    /// Accumulated gains of the generator; the per-scale derivative of the
    /// numeraire value process.
    derivative: ScalarProcess<R>,
    bounds: EpsBounds<R>,
}

impl<R: Real> PerturbationFamily<R> {
    pub fn generator(&self) -> &Strategy<R> {
        &self.generator
    }

    pub fn derivative(&self) -> &ScalarProcess<R> {
        &self.derivative
    }

    pub fn bounds(&self) -> EpsBounds<R> {
        self.bounds
    }

    /// Realizes the family member at `eps`. The value process is formed
    /// directly from the stored derivative, so it is linear in `eps` by
    /// construction.
    pub fn numeraire_at(
        &self,
        tree: &ScenarioTree<R>,
        eps: R,
    ) -> Result<NumeraireSpec<R>, PerturbError> {
        if !self.bounds.contains(eps) {
            return Err(PerturbError::EpsOutOfBounds {
                eps: eps.to_f64().unwrap_or(f64::NAN),
                lower: self.bounds.lower.to_f64().unwrap_or(f64::NEG_INFINITY),
                upper: self.bounds.upper.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        let values = ScalarProcess::from_fn(tree, |u| R::one() + eps * *self.derivative.at(u));
        let spec = crate::numeraire::build_numeraire_with_values(
            tree,
            self.generator.scaled(&eps),
            values,
        )
        .map_err(HedgeError::from)?;
        Ok(spec)
    }
}

/// Builds the linear family generated by `eta`, with the largest symmetric
/// safety-margined positivity bounds.
pub fn build_family<R: Real>(tree: &ScenarioTree<R>, eta: Strategy<R>) -> PerturbationFamily<R> {
    let derivative = gains(tree, &eta);
    let mut max_pos = R::zero();
    let mut max_neg = R::zero();
    for u in tree.node_ids() {
        let v = *derivative.at(u);
        if v > max_pos {
            max_pos = v;
        }
        if -v > max_neg {
            max_neg = -v;
        }
    }
    let safety = R::of(EPS_SAFETY);
    let lower = if max_pos > R::zero() {
        -safety / max_pos
    } else {
        R::neg_infinity()
    };
    let upper = if max_neg > R::zero() {
        safety / max_neg
    } else {
        R::infinity()
    };
    PerturbationFamily {
        generator: eta,
        derivative,
        bounds: EpsBounds { lower, upper },
    }
}

/// Deviations of the perturbed decomposition from the base, per grid point,
/// and the fitted decay order of the worst deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<R> {
    pub grid: Vec<R>,
    /// Max position deviation per grid point.
    pub strategy_dev: Vec<R>,
    /// Max deviation of denominated price increments from the flat-unit
    /// ones.
    pub denominated_step_dev: Vec<R>,
    /// Fair-price deviation per grid point.
    pub fair_price_dev: Vec<R>,
    /// Max residual deviation over all nodes per grid point.
    pub residual_dev: Vec<R>,
    /// Least-squares slope of log worst-deviation against log scale;
    /// `None` when the family is degenerate (all deviations vanish).
    pub fitted_order: Option<R>,
    /// Per-family fitted orders, same convention, for diagnostics.
    pub family_orders: [Option<R>; 4],
}

fn fit_order<R: Real>(grid: &[R], devs: &[R]) -> Option<R> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (e, d) in grid.iter().zip(devs) {
        if *d > R::zero() {
            xs.push(e.abs().ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let n = R::from_usize(xs.len())?;
    let mx = xs.iter().fold(R::zero(), |a, b| a + *b) / n;
    let my = ys.iter().fold(R::zero(), |a, b| a + *b) / n;
    let mut num = R::zero();
    let mut den = R::zero();
    for (x, y) in xs.iter().zip(&ys) {
        num = num + (*x - mx) * (*y - my);
        den = den + (*x - mx) * (*x - mx);
    }
    (den > R::zero()).then(|| num / den)
}

/// Re-solves the decomposition across a strictly shrinking scale grid and
/// reports how fast the outputs approach the base solution.
pub fn stability_sweep<R: Real>(
    tree: &ScenarioTree<R>,
    family: &PerturbationFamily<R>,
    claim: &Claim<R>,
    grid: &[R],
) -> Result<StabilityReport<R>, PerturbError> {
    if grid.is_empty() || grid.iter().any(|e| *e == R::zero()) {
        return Err(PerturbError::BadGrid);
    }
    for w in grid.windows(2) {
        if w[1].abs() >= w[0].abs() {
            return Err(PerturbError::BadGrid);
        }
    }
    let base = fs_decompose(tree, &unit_numeraire(tree), claim)?;
    let d = tree.asset_count();

    let mut strategy_dev = Vec::with_capacity(grid.len());
    let mut step_dev = Vec::with_capacity(grid.len());
    let mut price_dev = Vec::with_capacity(grid.len());
    let mut residual_dev = Vec::with_capacity(grid.len());
    for eps in grid {
        let spec = family.numeraire_at(tree, *eps)?;
        let dec = fs_decompose(tree, &spec, claim).map_err(|source| PerturbError::HedgeAt {
            eps: eps.to_f64().unwrap_or(f64::NAN),
            source,
        })?;

        let mut s_dev = R::zero();
        for u in tree.interior_ids() {
            for i in 0..d {
                let gap = (dec.strategy.at(u)[i] - base.strategy.at(u)[i]).abs();
                if gap > s_dev {
                    s_dev = gap;
                }
            }
        }
        strategy_dev.push(s_dev);

        let mut d_dev = R::zero();
        for t in 1..=tree.horizon() {
            for v in tree.at_time(t) {
                let step = spec.denominated_step(tree, *v);
                for (i, got) in step.iter().enumerate() {
                    let flat = if i == 0 {
                        R::zero()
                    } else {
                        tree.price_step(*v, i - 1)
                    };
                    let gap = (*got - flat).abs();
                    if gap > d_dev {
                        d_dev = gap;
                    }
                }
            }
        }
        step_dev.push(d_dev);

        price_dev.push((dec.fair_price - base.fair_price).abs());

        let mut r_dev = R::zero();
        for u in tree.node_ids() {
            let gap = (*dec.residual.at(u) - *base.residual.at(u)).abs();
            if gap > r_dev {
                r_dev = gap;
            }
        }
        residual_dev.push(r_dev);
    }

    let overall: Vec<R> = (0..grid.len())
        .map(|k| {
            strategy_dev[k]
                .max(step_dev[k])
                .max(price_dev[k])
                .max(residual_dev[k])
        })
        .collect();
    let fitted_order = fit_order(grid, &overall);
    let family_orders = [
        fit_order(grid, &strategy_dev),
        fit_order(grid, &step_dev),
        fit_order(grid, &price_dev),
        fit_order(grid, &residual_dev),
    ];
    Ok(StabilityReport {
        grid: grid.to_vec(),
        strategy_dev,
        denominated_step_dev: step_dev,
        fair_price_dev: price_dev,
        residual_dev,
        fitted_order,
        family_orders,
    })
}

/// How the closed-form correction recursion is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionVariant {
    /// Direct differentiation of the backward recursion: the covariance
    /// derivative weights centered increments by the terminal derivative,
    /// and the tail enters through a conditional covariance. This is the
    /// assembly the finite differences confirm.
    Differential,
    /// Symmetrized weight-derivative assembly with the tail adjustment
    /// centered conditionally.
    SymmetrizedConditional,
    /// Same symmetrized assembly with the tail adjustment and the
    /// increment both centered by root-level means. Kept as a negative
    /// control: the order test must reject it.
    SymmetrizedUnconditional,
}

impl CorrectionVariant {
    pub const ALL: [CorrectionVariant; 3] = [
        CorrectionVariant::Differential,
        CorrectionVariant::SymmetrizedConditional,
        CorrectionVariant::SymmetrizedUnconditional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrectionVariant::Differential => "differential",
            CorrectionVariant::SymmetrizedConditional => "symmetrized-conditional",
            CorrectionVariant::SymmetrizedUnconditional => "symmetrized-unconditional",
        }
    }
}

impl std::fmt::Display for CorrectionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// First-order corrections of the hedging outputs in the family scale,
/// with the per-node intermediates that produced them.
#[derive(Debug, Clone)]
pub struct AsymptoticCorrections<R> {
    pub variant: CorrectionVariant,
    /// Derivative of the optimal positions.
    pub strategy_delta: Strategy<R>,
    /// Derivative of the fair price.
    pub fair_price_delta: R,
    /// Derivative of the residual martingale, per node.
    pub residual_delta: ScalarProcess<R>,
    /// Conditional expectation of the terminal numeraire derivative at
    /// every node (the projection the weight derivative is centered with).
    pub derivative_projection: ScalarProcess<R>,
    /// Covariance-derivative matrix per non-terminal node.
    pub cov_delta: Vec<Option<Vec<Vec<R>>>>,
    /// Right-hand-side derivative per non-terminal node.
    pub rhs_delta: Vec<Option<Vec<R>>>,
    /// Tail adjustment per time level `n` (entry `n - 1`), leaf-indexed:
    /// the derivative of the strictly-later hedged tail, position-paired
    /// with the lifted base strategy.
    pub tail_adjustment: Vec<Vec<R>>,
}

/// Closed-form first-order corrections under the chosen assembly.
pub fn asymptotic_corrections<R: Real>(
    tree: &ScenarioTree<R>,
    family: &PerturbationFamily<R>,
    claim: &Claim<R>,
    variant: CorrectionVariant,
) -> Result<AsymptoticCorrections<R>, PerturbError> {
    let base = fs_decompose(tree, &unit_numeraire(tree), claim)?;
    let d = tree.asset_count();
    let two = R::of(2.0);

    let nprime: Vec<R> = tree
        .leaves()
        .iter()
        .map(|l| *family.derivative().at(*l))
        .collect();
    let derivative_projection = martingale_from_terminal(tree, &nprime);
    // Base wealth from the fair price, for the lifted tail pairing.
    let wealth0 = wealth_process(tree, base.fair_price, &base.strategy);

    let mut strategy_delta = Strategy::zeros(tree);
    let mut cov_delta: Vec<Option<Vec<Vec<R>>>> = vec![None; tree.node_count()];
    let mut rhs_delta: Vec<Option<Vec<R>>> = vec![None; tree.node_count()];
    let mut tail_adjustment = vec![Vec::new(); tree.horizon()];
    // Accumulated strictly-later correction gains per leaf.
    let mut tailp = vec![R::zero(); tree.leaves().len()];

    for n in (1..=tree.horizon()).rev() {
        // Tail adjustment at level n: derivative of the hedged tail over
        // steps strictly after n, with the base positions lifted so the
        // bank leg participates.
        let adj: Vec<R> = tree
            .leaves()
            .iter()
            .enumerate()
            .map(|(pos, leaf)| {
                let anchor = tree.ancestor_at(*leaf, n);
                let lifted_pair = *wealth0.at(*leaf) * *family.derivative().at(*leaf)
                    - *wealth0.at(anchor) * *family.derivative().at(anchor);
                -tailp[pos] + lifted_pair
            })
            .collect();
        tail_adjustment[n - 1] = adj.clone();

        for &u in tree.at_time(n - 1) {
            let range = tree.leaf_range(u);
            let start = range.start;
            let w_u = *tree.path_prob(u);
            let weights: Vec<R> = range
                .clone()
                .map(|pos| *tree.path_prob(tree.leaves()[pos]) / w_u)
                .collect();
            let steps: Vec<Vec<R>> = range
                .clone()
                .map(|pos| {
                    let child = tree.ancestor_at(tree.leaves()[pos], n);
                    (0..d)
                        .map(|i| tree.node(child).prices[i] - tree.node(u).prices[i])
                        .collect()
                })
                .collect();
            let mean = |f: &mut dyn FnMut(usize) -> R| {
                let mut acc = R::zero();
                for (k, w) in weights.iter().enumerate() {
                    acc = acc + *w * f(k);
                }
                acc
            };
            let m_step: Vec<R> = (0..d).map(|i| mean(&mut |k| steps[k][i])).collect();
            let np = |k: usize| nprime[start + k];
            let m_np = *derivative_projection.at(u);

            let mut matrix = vec![vec![R::zero(); d]; d];
            let mut rhs = vec![R::zero(); d];
            match variant {
                CorrectionVariant::Differential => {
                    // Covariance derivative: -2 E[N' centered_i centered_j].
                    for i in 0..d {
                        for j in 0..=i {
                            let v = -two
                                * mean(&mut |k| {
                                    np(k) * (steps[k][i] - m_step[i]) * (steps[k][j] - m_step[j])
                                });
                            matrix[i][j] = v;
                            matrix[j][i] = v;
                        }
                    }
                    // Merged right side: -2 E[N' (L_T - L_node) centered_i]
                    // minus the conditional covariance of the correction
                    // tail, plus the matrix part folded back for reporting.
                    let l_u = *base.residual.at(u);
                    let m_tail = mean(&mut |k| tailp[start + k]);
                    for (i, r) in rhs.iter_mut().enumerate() {
                        let direct = -two
                            * mean(&mut |k| {
                                let leaf = tree.leaves()[start + k];
                                np(k)
                                    * (*base.residual.at(leaf) - l_u)
                                    * (steps[k][i] - m_step[i])
                            });
                        let tail_cov = mean(&mut |k| {
                            (tailp[start + k] - m_tail) * (steps[k][i] - m_step[i])
                        });
                        let mut matrix_part = R::zero();
                        for (j, q) in base.strategy.at(u).iter().enumerate() {
                            matrix_part = matrix_part + matrix[i][j] * *q;
                        }
                        *r = direct - tail_cov + matrix_part;
                    }
                }
                CorrectionVariant::SymmetrizedConditional
                | CorrectionVariant::SymmetrizedUnconditional => {
                    let jp = |k: usize| -two * np(k) + two * m_np;
                    // X: claim hedged by the base positions strictly after
                    // this level.
                    let x = |k: usize| {
                        let leaf = tree.leaves()[start + k];
                        let anchor = tree.ancestor_at(leaf, n);
                        *claim.value(start + k) - (*wealth0.at(leaf) - *wealth0.at(anchor))
                    };
                    let m_x = mean(&mut |k| x(k));
                    let sym = |f: &mut dyn FnMut(usize) -> R,
                                   mf: R,
                                   g: &mut dyn FnMut(usize) -> R,
                                   mg: R| {
                        -mean(&mut |k| f(k) * jp(k) * (g(k) - mg))
                            - mean(&mut |k| g(k) * jp(k) * (f(k) - mf))
                            - two * mean(&mut |k| (f(k) - mf) * np(k) * (g(k) - mg))
                    };
                    for i in 0..d {
                        for j in 0..=i {
                            let v = sym(
                                &mut |k| steps[k][i],
                                m_step[i],
                                &mut |k| steps[k][j],
                                m_step[j],
                            );
                            matrix[i][j] = v;
                            matrix[j][i] = v;
                        }
                    }
                    for i in 0..d {
                        rhs[i] = sym(&mut |k| x(k), m_x, &mut |k| steps[k][i], m_step[i]);
                    }
                    if n < tree.horizon() {
                        match variant {
                            CorrectionVariant::SymmetrizedConditional => {
                                let m_adj = mean(&mut |k| adj[start + k]);
                                for (i, r) in rhs.iter_mut().enumerate() {
                                    *r = *r
                                        + mean(&mut |k| {
                                            (adj[start + k] - m_adj)
                                                * (steps[k][i] - m_step[i])
                                        });
                                }
                            }
                            CorrectionVariant::SymmetrizedUnconditional => {
                                // Root-level means in both factors.
                                let root = tree.root();
                                let m_adj = tree.expect_leaves(root, &adj);
                                for (i, r) in rhs.iter_mut().enumerate() {
                                    let m_step_root = tree.expect_with(root, |pos, leaf| {
                                        let held = tree.ancestor_at(leaf, n - 1);
                                        let stepped = tree.ancestor_at(leaf, n);
                                        let _ = pos;
                                        tree.node(stepped).prices[i] - tree.node(held).prices[i]
                                    });
                                    *r = *r
                                        + mean(&mut |k| {
                                            (adj[start + k] - m_adj)
                                                * (steps[k][i] - m_step_root)
                                        });
                                }
                            }
                            CorrectionVariant::Differential => unreachable!(),
                        }
                    }
                }
            }

            // Solve with the base covariance system's stored inverse.
            let entry = base
                .covariances
                .at(u)
                .expect("base decomposition covers every interior node");
            let mut adjusted = vec![R::zero(); d];
            for (i, a) in adjusted.iter_mut().enumerate() {
                let mut m_xi = R::zero();
                for (j, q) in base.strategy.at(u).iter().enumerate() {
                    m_xi = m_xi + matrix[i][j] * *q;
                }
                *a = rhs[i] - m_xi;
            }
            let mut solution = vec![R::zero(); d];
            for (i, s) in solution.iter_mut().enumerate() {
                for (j, a) in adjusted.iter().enumerate() {
                    *s = *s + entry.inverse[i][j] * *a;
                }
            }
            cov_delta[u.index()] = Some(matrix);
            rhs_delta[u.index()] = Some(rhs);
            strategy_delta.set(u, solution);
        }

        for (pos, leaf) in tree.leaves().iter().enumerate() {
            let held = tree.ancestor_at(*leaf, n - 1);
            let stepped = tree.ancestor_at(*leaf, n);
            let q = strategy_delta.at(held);
            let mut inc = R::zero();
            for (i, qi) in q.iter().enumerate() {
                inc = inc + *qi * (tree.node(stepped).prices[i] - tree.node(held).prices[i]);
            }
            tailp[pos] = tailp[pos] + inc;
        }
    }

    let root = tree.root();
    let (fair_price_delta, residual_delta) = match variant {
        CorrectionVariant::Differential => {
            let cross = tree.expect_with(root, |pos, leaf| {
                *base.residual.at(leaf) * nprime[pos]
            });
            let mean_tail = tree.expect_leaves(root, &tailp);
            let price_delta = -two * cross - mean_tail;
            let terminal: Vec<R> = tree
                .leaves()
                .iter()
                .enumerate()
                .map(|(pos, leaf)| {
                    -price_delta - tailp[pos] - *base.residual.at(*leaf) * nprime[pos]
                })
                .collect();
            (price_delta, martingale_from_terminal(tree, &terminal))
        }
        _ => {
            // Lifted pairing over the full horizon telescopes to terminal
            // wealth times the terminal derivative.
            let g: Vec<R> = tree
                .leaves()
                .iter()
                .enumerate()
                .map(|(pos, leaf)| {
                    *wealth0.at(*leaf) * nprime[pos]
                        - *claim.value(pos) * nprime[pos]
                        - tailp[pos]
                })
                .collect();
            let mean_g = tree.expect_leaves(root, &g);
            let centered = martingale_from_terminal(tree, &g);
            let residual_delta = ScalarProcess::from_fn(tree, |u| *centered.at(u) - mean_g);
            (mean_g, residual_delta)
        }
    };

    Ok(AsymptoticCorrections {
        variant,
        strategy_delta,
        fair_price_delta,
        residual_delta,
        derivative_projection,
        cov_delta,
        rhs_delta,
        tail_adjustment,
    })
}

/// Central-difference validation of a set of corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct FdValidation<R> {
    pub variant: CorrectionVariant,
    pub eps: Vec<R>,
    /// Per step size: worst gap between the central difference and the
    /// closed form, per quantity.
    pub strategy_dev: Vec<R>,
    pub fair_price_dev: Vec<R>,
    pub residual_dev: Vec<R>,
    /// Empirical decay order between the last two step sizes, per quantity
    /// (`None` when the deviations sit at the noise floor).
    pub strategy_order: Option<R>,
    pub fair_price_order: Option<R>,
    pub residual_order: Option<R>,
    pub passed: bool,
}

fn pair_order<R: Real>(eps: &[R], dev: &[R], floor: R, match_floor: R) -> (Option<R>, bool) {
    let k = eps.len();
    if k < 2 {
        let ok = dev.last().map(|d| *d <= floor).unwrap_or(true);
        return (None, ok);
    }
    let (d_hi, d_lo) = (dev[k - 2], dev[k - 1]);
    if (d_lo <= floor && d_hi <= floor) || d_lo <= R::zero() {
        return (None, true);
    }
    let order = (d_hi / d_lo).ln() / (eps[k - 2].abs() / eps[k - 1].abs()).ln();
    let converged_at_coarse = dev[0] <= match_floor;
    (
        Some(order),
        order >= R::of(FD_ORDER_PASS) || d_lo <= floor || converged_at_coarse,
    )
}

/// Compares corrections against central differences of the re-solved
/// decomposition at each `eps`. Correct assemblies decay at second order;
/// wrong ones stall at a constant.
pub fn finite_difference_validate<R: Real>(
    tree: &ScenarioTree<R>,
    family: &PerturbationFamily<R>,
    claim: &Claim<R>,
    corrections: &AsymptoticCorrections<R>,
    eps_list: &[R],
) -> Result<FdValidation<R>, PerturbError> {
    if eps_list.is_empty() || eps_list.iter().any(|e| *e == R::zero()) {
        return Err(PerturbError::BadGrid);
    }
    let d = tree.asset_count();
    let solve = |eps: R| -> Result<Decomposition<R>, PerturbError> {
        let spec = family.numeraire_at(tree, eps)?;
        fs_decompose(tree, &spec, claim).map_err(|source| PerturbError::HedgeAt {
            eps: eps.to_f64().unwrap_or(f64::NAN),
            source,
        })
    };

    let mut strategy_dev = Vec::with_capacity(eps_list.len());
    let mut fair_price_dev = Vec::with_capacity(eps_list.len());
    let mut residual_dev = Vec::with_capacity(eps_list.len());
    // Primal magnitudes at the coarsest step, for cancellation-noise
    // calibration.
    let mut primal_strategy = R::zero();
    let mut primal_price = R::zero();
    let mut primal_residual = R::zero();
    for (step, eps) in eps_list.iter().enumerate() {
        let up = solve(*eps)?;
        let down = solve(-*eps)?;
        let denom = two_eps(*eps);
        if step == 0 {
            for u in tree.interior_ids() {
                for i in 0..d {
                    primal_strategy = primal_strategy.max(up.strategy.at(u)[i].abs());
                }
            }
            primal_price = up.fair_price.abs();
            for u in tree.node_ids() {
                primal_residual = primal_residual.max(up.residual.at(u).abs());
            }
        }

        let mut s_dev = R::zero();
        for u in tree.interior_ids() {
            for i in 0..d {
                let fd = (up.strategy.at(u)[i] - down.strategy.at(u)[i]) / denom;
                let gap = (fd - corrections.strategy_delta.at(u)[i]).abs();
                if gap > s_dev {
                    s_dev = gap;
                }
            }
        }
        strategy_dev.push(s_dev);

        let fd_price = (up.fair_price - down.fair_price) / denom;
        fair_price_dev.push((fd_price - corrections.fair_price_delta).abs());

        let mut r_dev = R::zero();
        for u in tree.node_ids() {
            let fd = (*up.residual.at(u) - *down.residual.at(u)) / denom;
            let gap = (fd - *corrections.residual_delta.at(u)).abs();
            if gap > r_dev {
                r_dev = gap;
            }
        }
        residual_dev.push(r_dev);
    }

    let floor = |m: R| R::of(FD_NOISE_FLOOR) * (R::one() + m);
    let coarse = |m: R| R::of(FD_MATCH_FLOOR) * (R::one() + m);
    let mut s_scale = R::zero();
    for u in tree.interior_ids() {
        for i in 0..d {
            s_scale = s_scale.max(corrections.strategy_delta.at(u)[i].abs());
        }
    }
    let mut r_scale = R::zero();
    for u in tree.node_ids() {
        r_scale = r_scale.max(corrections.residual_delta.at(u).abs());
    }
    let (strategy_order, s_ok) = pair_order(
        eps_list,
        &strategy_dev,
        floor(s_scale),
        coarse(primal_strategy),
    );
    let (fair_price_order, p_ok) = pair_order(
        eps_list,
        &fair_price_dev,
        floor(corrections.fair_price_delta.abs()),
        coarse(primal_price),
    );
    let (residual_order, r_ok) = pair_order(
        eps_list,
        &residual_dev,
        floor(r_scale),
        coarse(primal_residual),
    );

    Ok(FdValidation {
        variant: corrections.variant,
        eps: eps_list.to_vec(),
        strategy_dev,
        fair_price_dev,
        residual_dev,
        strategy_order,
        fair_price_order,
        residual_order,
        passed: s_ok && p_ok && r_ok,
    })
}

fn two_eps<R: Real>(eps: R) -> R {
    eps + eps
}

/// Outcome of running every assembly through the validator.
#[derive(Debug, Clone)]
pub struct VariantSelection<R> {
    pub selected: CorrectionVariant,
    pub reports: Vec<FdValidation<R>>,
}

/// Computes corrections under every assembly, validates each against
/// central differences, and returns the corrections of the assembly the
/// differences confirm (falling back to the smallest final deviation if
/// none passes outright).
pub fn select_variant<R: Real>(
    tree: &ScenarioTree<R>,
    family: &PerturbationFamily<R>,
    claim: &Claim<R>,
    eps_list: &[R],
) -> Result<(AsymptoticCorrections<R>, VariantSelection<R>), PerturbError> {
    let mut reports = Vec::new();
    let mut computed = Vec::new();
    for variant in CorrectionVariant::ALL {
        let corr = asymptotic_corrections(tree, family, claim, variant)?;
        let report = finite_difference_validate(tree, family, claim, &corr, eps_list)?;
        reports.push(report);
        computed.push(corr);
    }
    let selected_idx = reports
        .iter()
        .position(|r| r.passed)
        .unwrap_or_else(|| {
            let mut best = 0;
            let mut best_dev = R::infinity();
            for (k, r) in reports.iter().enumerate() {
                let final_dev = *r.strategy_dev.last().unwrap_or(&R::infinity());
                if final_dev < best_dev {
                    best_dev = final_dev;
                    best = k;
                }
            }
            best
        });
    let selection = VariantSelection {
        selected: CorrectionVariant::ALL[selected_idx],
        reports,
    };
    Ok((computed.swap_remove(selected_idx), selection))
}
