//! Upper and lower bounds for the widths of
//! `id*: s^t_{p1,2} f -> s^0_{p2,2} f` on the unit cube.
//!
//! Upper bounds split `id*` into level blocks `id*_mu`: levels up to `J` are
//! kept exactly, levels `J < mu <= L` get a rank `n_mu` each, and levels
//! above `L` are dropped. The index of the resulting bound is
//! `cumulative_dim(J) + sum (n_mu - 1) + 1`. Lower bounds come from
//! factorizations of finite identities through a single block.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Real;
use crate::finite_widths::{
    bernstein_heuristic_witness, weyl_trace_lower_bound, Certification, Direction, FiniteEmbedding, WidthBound,
    WidthKind, Witness,
};
use crate::hyperbolic_index::{block_dim, composition_count, cumulative_dim, Budget};
use crate::par;
pub use crate::rate_table::ParamSpace;
use crate::rate_table::{predict_weyl, CaseId, RateExponent};

/// Which construction produced an upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Drop every level above `J`.
    Projection,
    /// Geometric rank allocation for `p1 <= 2 <= p2`.
    High,
    /// Summing-norm allocation for `p1 > 2` below the smoothness threshold.
    Low,
    /// Hölder combination of a projection and a high-smoothness plan for `p1 < p2 < 2`.
    Interpolated,
    /// No construction; the value is the rate oracle's prediction.
    Predicted,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Projection => "projection",
            Regime::High => "high",
            Regime::Low => "low",
            Regime::Interpolated => "interpolated",
            Regime::Predicted => "predicted",
        })
    }
}

/// Overrides for the free parameters of the allocators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub budget: Budget,
    /// Rank decay `lambda` of the high-smoothness plan.
    pub lambda: Option<f64>,
    /// Rank decay `beta` of the low-smoothness plan.
    pub beta: Option<f64>,
    /// Source shift `eps` of the second transfer rule.
    pub eps: Option<f64>,
    /// Frames tried per block by the witness search.
    pub trials: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            budget: Budget::default(),
            lambda: None,
            beta: None,
            eps: None,
            trials: 24,
            seed: 0,
        }
    }
}

/// The free parameter a plan used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "value", rename_all = "lowercase")]
pub enum FreeParameter {
    Lambda(f64),
    Beta(f64),
    Theta(f64),
}

/// A rank allocation and the upper bound it certifies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub j: u32,
    /// Outer cutoff; equal to `j` when no level is allocated.
    pub l: u32,
    pub regime: Regime,
    /// `(mu, n_mu, per-block value)` for `J < mu <= L`.
    pub blocks: Vec<(u32, u128, f64)>,
    pub free_parameter: Option<FreeParameter>,
    /// Closed-form bound for all levels above `L`.
    pub tail: f64,
    /// Decay exponent `a` of the tail `sum_{mu > L} 2^{-mu a}`.
    pub tail_exponent: f64,
    /// Index `n` at which the bound holds.
    pub total_rank: u128,
    pub value: f64,
    pub certification: Certification,
}

impl AllocationPlan {
    /// `cumulative_dim(J) + sum (n_mu - 1) + 1`.
    pub fn index_from_ranks(j: u32, d: usize, blocks: &[(u32, u128, f64)]) -> Result<u128> {
        let base = cumulative_dim(j, d)?;
        blocks
            .iter()
            .try_fold(base + 1, |acc, &(_, n, _)| acc.checked_add(n - 1))
            .ok_or(Error::Overflow("plan index"))
    }

    /// Sum of the per-block values plus the tail.
    pub fn recomputed_value(&self) -> f64 {
        self.blocks.iter().map(|b| b.2).sum::<f64>() + self.tail
    }
}

/// `sum_{mu > l} 2^{-mu a}`.
pub fn geometric_tail(l: u32, a: f64) -> f64 {
    2f64.powf(-((l + 1) as f64) * a) / (1.0 - 2f64.powf(-a))
}

fn require_compact(params: &ParamSpace) -> Result<()> {
    params.check_compact()
}

fn is_two(x: f64) -> bool {
    x == 2.0
}

/// Norm of `id*_mu`: `2^{-mu (t - (1/p1 - 1/p2)_+)}`.
///
/// The constant is one when `p2 <= p1` (unit measure) and when
/// `p1 <= 2 <= p2` (Minkowski on both sides); elsewhere only the rate is known.
pub fn block_operator_norm(params: &ParamSpace, mu: u32) -> Result<(f64, Certification)> {
    require_compact(params)?;
    let (p1, p2) = (params.p1(), params.p2());
    let a = params.t() - (1.0 / p1 - 1.0 / p2).max(0.0);
    let cert = if p2 <= p1 || (p1 <= 2.0 && 2.0 <= p2) {
        Certification::Certified
    } else {
        Certification::RateOnly
    };
    Ok((2f64.powf(-(mu as f64) * a), cert))
}

/// Chooses the construction for the upper bound.
pub fn select_regime(params: &ParamSpace) -> Result<Regime> {
    require_compact(params)?;
    let (p1, p2) = (params.p1, params.p2);
    let two = Real::integer(2);
    if p1.le(&two) && p2.le(&p1) {
        return Ok(Regime::Projection);
    }
    if p1.le(&two) && two.le(&p2) {
        return Ok(Regime::High);
    }
    if p1.le(&two) {
        return Ok(Regime::Interpolated);
    }
    // p1 > 2 from here on.
    if p2.lt(&p1) {
        let thr = params.low_smoothness_threshold();
        if params.t.lt(&thr) {
            return Ok(Regime::Low);
        }
        if params.t.eq_exact(&thr) {
            return Err(Error::UncoveredCase(format!(
                "t = {} lies on the low-smoothness threshold {}",
                params.t, thr
            )));
        }
    }
    Ok(Regime::Predicted)
}

/// Upper bound at index `cumulative_dim(J) + 1` by dropping all levels above `J`.
pub fn allocate_projection(params: &ParamSpace, j: u32, budget: Budget) -> Result<AllocationPlan> {
    require_compact(params)?;
    if params.p2() > params.p1() {
        return Err(Error::InvalidParameter("projection bound needs p2 <= p1".into()));
    }
    if params.t() <= 0.0 {
        return Err(Error::InvalidParameter("projection bound needs t > 0".into()));
    }
    let (_, certification) = block_operator_norm(params, 0)?;
    let total_rank = AllocationPlan::index_from_ranks(j, params.d, &[])?;
    budget.check(total_rank)?;
    let a = params.t();
    let tail = geometric_tail(j, a);
    Ok(AllocationPlan {
        j,
        l: j,
        regime: Regime::Projection,
        blocks: Vec::new(),
        free_parameter: None,
        tail,
        tail_exponent: a,
        total_rank,
        value: tail,
        certification,
    })
}

/// Largest `L - J` the high-smoothness plan uses.
pub const HIGH_MAX_SPAN: u32 = 48;

/// Feasible interval `(1, lambda_max)` for the high-smoothness rank decay.
pub fn lambda_interval(params: &ParamSpace) -> (f64, f64) {
    let (p1, p2, t) = (params.p1(), params.p2(), params.t());
    let lhs = t + 1.0 / p2 - 0.5;
    let denom = 1.0 / p1 - 0.5;
    if denom <= 0.0 {
        (1.0, f64::INFINITY)
    } else {
        (1.0, lhs / denom)
    }
}

/// Rank allocation `n_mu = [D_mu 2^{(J - mu) lambda}]` for `p1 <= 2 <= p2`.
pub fn allocate_high_smoothness(params: &ParamSpace, j: u32, config: &EstimatorConfig) -> Result<AllocationPlan> {
    require_compact(params)?;
    let (p1, p2, t, d) = (params.p1(), params.p2(), params.t(), params.d);
    if !(p1 <= 2.0 && 2.0 <= p2) {
        return Err(Error::InvalidParameter(
            "high-smoothness plan needs p1 <= 2 <= p2".into(),
        ));
    }
    let (lo, hi) = lambda_interval(params);
    let lambda = match config.lambda {
        Some(l) => l,
        None if hi.is_infinite() => 2.0,
        None => (lo + hi) / 2.0,
    };
    if !(lambda > lo && lambda < hi) {
        return Err(Error::Infeasible(format!("lambda = {lambda} outside ({lo}, {hi})")));
    }
    debug_assert!(t + 1.0 / p2 - 0.5 > lambda * (1.0 / p1 - 0.5) && lambda > 1.0);
    let a = t - 1.0 / p1 + 1.0 / p2;
    let target = t - 0.5 + 1.0 / p2;
    // Any L >= J is sound since the tail bounds block norms; the span cap
    // keeps block dimensions representable when `a` is small.
    let l = (j + 1).max((j as f64 * target / a).ceil().min((j + HIGH_MAX_SPAN) as f64) as u32);
    let finite_certified = is_two(p1);
    let blocks = par::map_range((l - j) as usize, |i| -> Result<(u32, u128, f64)> {
        let mu = j + 1 + i as u32;
        let dim = block_dim(mu, d)?;
        let n_mu = ((dim as f64) * 2f64.powf((j as f64 - mu as f64) * lambda))
            .floor()
            .max(1.0) as u128;
        let (norm, _) = block_operator_norm(params, mu)?;
        let n_blocks = composition_count(mu, d)? as f64;
        let factor = n_blocks.powf((1.0 / p1 - 0.5).max(0.0)) * 2f64.powf(mu as f64 * (-t + 1.0 / p1 - 1.0 / p2));
        let finite = if finite_certified {
            // Residual of the truncation on l_2 -> l_{p2}, p2 >= 2: norm one.
            FiniteEmbedding::identity(1, 2.0, p2)?.operator_norm()
        } else {
            (n_mu as f64).powf(0.5 - 1.0 / p1)
        };
        Ok((mu, n_mu, norm.min(factor * finite)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let tail = geometric_tail(l, a);
    let total_rank = AllocationPlan::index_from_ranks(j, d, &blocks)?;
    config.budget.check(total_rank)?;
    let value = blocks.iter().map(|b| b.2).sum::<f64>() + tail;
    Ok(AllocationPlan {
        j,
        l,
        regime: Regime::High,
        blocks,
        free_parameter: Some(FreeParameter::Lambda(lambda)),
        tail,
        tail_exponent: a,
        total_rank,
        value,
        certification: if finite_certified {
            Certification::Certified
        } else {
            Certification::RateOnly
        },
    })
}

/// `1/r = (1/q - 1/p1) / (1 - 2/p1)` with `q = max(p2, 2)`.
pub fn summing_exponent_inverse(params: &ParamSpace) -> f64 {
    let q = params.p2().max(2.0);
    (1.0 / q - 1.0 / params.p1()) / (1.0 - 2.0 / params.p1())
}

/// Feasible interval `(0, r (-t + 1/p1 - 1/q + 1/r))` for the low-smoothness rank decay.
pub fn beta_interval(params: &ParamSpace) -> (f64, f64) {
    let q = params.p2().max(2.0);
    let inv_r = summing_exponent_inverse(params);
    (0.0, (-params.t() + 1.0 / params.p1() - 1.0 / q + inv_r) / inv_r)
}

/// Rank allocation `n_mu = [D_mu 2^{(mu - L) beta + J - mu}]` with `L = [J p1 / 2]`.
///
/// Each block is bounded through its `(r,2)`-summing norm,
/// `x_n <= 2^{mu(-t + 1/p1 - 1/q)} (D_mu / n)^{1/r}`, routed through target
/// exponent `q = max(p2, 2)`.
pub fn allocate_low_smoothness(params: &ParamSpace, j: u32, config: &EstimatorConfig) -> Result<AllocationPlan> {
    require_compact(params)?;
    let (p1, p2, t, d) = (params.p1(), params.p2(), params.t(), params.d);
    if !(p1 > 2.0 && p2 < p1) {
        return Err(Error::InvalidParameter(
            "low-smoothness plan needs p2 < p1 and p1 > 2".into(),
        ));
    }
    if !params.t.lt(&params.low_smoothness_threshold()) {
        return Err(Error::InvalidParameter(format!(
            "t = {t} is not below the low-smoothness threshold {}",
            params.low_smoothness_threshold()
        )));
    }
    let q = p2.max(2.0);
    let inv_r = summing_exponent_inverse(params);
    let (lo, hi) = beta_interval(params);
    let beta = config.beta.unwrap_or((lo + hi) / 2.0);
    if !(beta > lo && beta < hi) {
        return Err(Error::Infeasible(format!("beta = {beta} outside ({lo}, {hi})")));
    }
    debug_assert!(-t + 1.0 / p1 - 1.0 / q + inv_r - beta * inv_r > 0.0);
    let l = (j + 1).max((j as f64 * p1 / 2.0).floor() as u32);
    let blocks = par::map_range((l - j) as usize, |i| -> Result<(u32, u128, f64)> {
        let mu = j + 1 + i as u32;
        let dim = block_dim(mu, d)? as f64;
        let expo = (mu as f64 - l as f64) * beta + j as f64 - mu as f64;
        let n_mu = (dim * 2f64.powf(expo)).floor().max(1.0) as u128;
        let (norm, _) = block_operator_norm(params, mu)?;
        let summing = 2f64.powf(mu as f64 * (-t + 1.0 / p1 - 1.0 / q)) * (dim / n_mu as f64).powf(inv_r);
        Ok((mu, n_mu, norm.min(summing)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let tail = geometric_tail(l, t);
    let total_rank = AllocationPlan::index_from_ranks(j, d, &blocks)?;
    config.budget.check(total_rank)?;
    let value = blocks.iter().map(|b| b.2).sum::<f64>() + tail;
    Ok(AllocationPlan {
        j,
        l,
        regime: Regime::Low,
        blocks,
        free_parameter: Some(FreeParameter::Beta(beta)),
        tail,
        tail_exponent: t,
        total_rank,
        value,
        certification: Certification::Certified,
    })
}

/// `x_{n+m-1}(T: X -> Y) <= C x_n(T: X -> Y0)^{1-theta} x_m(T: X -> Y1)^theta`.
pub fn interpolation_combine(
    bound0: (u128, f64),
    bound1: (u128, f64),
    theta: f64,
    constant: f64,
) -> Result<(u128, f64)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta} must lie in (0, 1)")));
    }
    if bound0.0 == 0 || bound1.0 == 0 {
        return Err(Error::InvalidParameter("indices start at 1".into()));
    }
    let n = bound0
        .0
        .checked_add(bound1.0 - 1)
        .ok_or(Error::Overflow("interpolated index"))?;
    Ok((n, constant * bound0.1.powf(1.0 - theta) * bound1.1.powf(theta)))
}

/// Upper bound for `p1 < p2 < 2` by interpolating the target between `p1` and `2`.
pub fn allocate_interpolated(params: &ParamSpace, j: u32, config: &EstimatorConfig) -> Result<AllocationPlan> {
    require_compact(params)?;
    let (p1, p2, t, d) = (params.p1(), params.p2(), params.t(), params.d);
    if !(p1 < p2 && p2 < 2.0) {
        return Err(Error::InvalidParameter("interpolated plan needs p1 < p2 < 2".into()));
    }
    let theta = (1.0 / p1 - 1.0 / p2) / (1.0 / p1 - 0.5);
    let t1 = 1.0 / p1 - 1.0 / p2;
    let t2 = 0.5 - 1.0 / p2;
    let lifted = |s: f64, target: f64| {
        ParamSpace::new(
            params.p1,
            Real::float(target),
            params.t - Real::float(t) + Real::float(s),
            d,
        )
    };
    let plan0 = allocate_projection(&lifted(t - t1, p1)?, j, config.budget)?;
    let plan1 = allocate_high_smoothness(&lifted(t - t2, 2.0)?, j, config)?;
    let (total_rank, value) = interpolation_combine(
        (plan0.total_rank, plan0.value),
        (plan1.total_rank, plan1.value),
        theta,
        1.0,
    )?;
    config.budget.check(total_rank)?;
    Ok(AllocationPlan {
        j,
        l: plan1.l,
        regime: Regime::Interpolated,
        blocks: Vec::new(),
        free_parameter: Some(FreeParameter::Theta(theta)),
        tail: value,
        tail_exponent: t,
        total_rank,
        value,
        certification: plan0.certification.weakest(plan1.certification),
    })
}

/// The rate oracle's value `n^{-alpha} (log n)^{(d-1) alpha}` at `n = cumulative_dim(J) + 1`.
pub fn predicted_plan(params: &ParamSpace, j: u32, budget: Budget) -> Result<AllocationPlan> {
    let rate = predict_weyl(params)?;
    let (Some(np), Some(lp)) = (rate.n_power, rate.log_power) else {
        return Err(Error::UncoveredCase(format!("{} is open", rate.case_id)));
    };
    let total_rank = AllocationPlan::index_from_ranks(j, params.d, &[])?;
    budget.check(total_rank)?;
    let n = total_rank as f64;
    let value = n.powf(np) * n.ln().max(1.0).powf(lp);
    Ok(AllocationPlan {
        j,
        l: j,
        regime: Regime::Predicted,
        blocks: Vec::new(),
        free_parameter: None,
        tail: value,
        tail_exponent: -np,
        total_rank,
        value,
        certification: Certification::Predicted,
    })
}

/// Upper bound at level `J` from the construction [`select_regime`] picks.
pub fn estimate_upper(params: &ParamSpace, j: u32, config: &EstimatorConfig) -> Result<AllocationPlan> {
    match select_regime(params)? {
        Regime::Projection => allocate_projection(params, j, config.budget),
        Regime::High => allocate_high_smoothness(params, j, config),
        Regime::Low => allocate_low_smoothness(params, j, config),
        Regime::Interpolated => allocate_interpolated(params, j, config),
        Regime::Predicted => predicted_plan(params, j, config.budget),
    }
}

/// How a finite lower bound is lifted to a block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TransferRule {
    /// From `id: l_2^{D_mu} -> l_{p2}^{D_mu}`, for `p1 <= 2`.
    FromHilbert,
    /// From `id: l_{p1-eps}^{D_mu} -> l_{p2}^{D_mu}`, for `p1 > 2`.
    FromShifted { eps: f64 },
}

impl TransferRule {
    /// The default shift `eps = (p1 - 2) / 2`.
    pub fn shifted_default(params: &ParamSpace) -> Self {
        TransferRule::FromShifted {
            eps: (params.p1() - 2.0) / 2.0,
        }
    }
}

/// Level factor of a transfer rule.
///
/// The polynomial part is `N_mu^{-(1/p2 - 1/2)_+}` with `N_mu` the exact
/// number of compositions of `mu`.
pub fn transfer_factor(params: &ParamSpace, mu: u32, rule: TransferRule) -> Result<f64> {
    let (p1, p2, t) = (params.p1(), params.p2(), params.t());
    let n_blocks = composition_count(mu, params.d)? as f64;
    let poly = n_blocks.powf(-(1.0 / p2 - 0.5).max(0.0));
    let expo = match rule {
        TransferRule::FromHilbert => -t + 0.5 - 1.0 / p2,
        TransferRule::FromShifted { .. } => -t + 1.0 / p1 - 1.0 / p2,
    };
    Ok(poly * 2f64.powf(mu as f64 * expo))
}

/// Lifts a lower bound on a finite identity of dimension `D_mu` to `id*_mu`,
/// and therefore to `id*`, since restricting to a block cannot increase widths.
pub fn transfer_lower(
    params: &ParamSpace,
    mu: u32,
    finite_dim: u128,
    finite_bound: &WidthBound,
    rule: TransferRule,
) -> Result<WidthBound> {
    require_compact(params)?;
    let dim = block_dim(mu, params.d)?;
    if finite_dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim as usize,
            got: finite_dim as usize,
        });
    }
    if finite_bound.direction != Direction::Lower {
        return Err(Error::InvalidParameter("only lower bounds can be transferred".into()));
    }
    let certification = match rule {
        TransferRule::FromHilbert => {
            if params.p1() > 2.0 {
                return Err(Error::InvalidParameter("the Hilbert transfer needs p1 <= 2".into()));
            }
            finite_bound.certification
        }
        TransferRule::FromShifted { eps } => {
            if !(eps > 0.0 && params.p1() - eps > 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "eps = {eps} must satisfy 2 < p1 - eps"
                )));
            }
            finite_bound.certification.weakest(Certification::RateOnly)
        }
    };
    Ok(WidthBound {
        kind: finite_bound.kind,
        n: finite_bound.n,
        value: transfer_factor(params, mu, rule)? * finite_bound.value,
        direction: Direction::Lower,
        certification,
        witness: finite_bound.witness.clone(),
    })
}

/// Certified lower bound on `x_n(id*)` at `n = [D_mu / 2]` through the Hilbert transfer.
pub fn hilbert_transfer_lower(params: &ParamSpace, mu: u32) -> Result<WidthBound> {
    let dim = block_dim(mu, params.d)?;
    let n = ((dim / 2).max(1)) as usize;
    let finite = weyl_trace_lower_bound(&FiniteEmbedding::identity(dim as usize, 2.0, params.p2())?, n)?;
    transfer_lower(params, mu, dim, &finite, TransferRule::FromHilbert)
}

/// Lower bounds assembled from per-composition witness subspaces on one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelWitness {
    pub mu: u32,
    /// Nominal index `[mu^{d-1} 2^{2 mu / p1}]`.
    pub n_nominal: u128,
    /// Dimension of the assembled subspace.
    pub dim: u128,
    /// Per-composition subspace dimension `k = [2^{2 mu / p1}]`.
    pub k: usize,
    pub bernstein: Option<WidthBound>,
    pub weyl: WidthBound,
    /// Smallest per-composition Bernstein quotient for target `p2`.
    pub ratios: Vec<f64>,
    /// `value / 2^{-t mu}` of the reported Weyl bound.
    pub constant: f64,
}

fn per_composition_witnesses(
    mu: u32,
    d: usize,
    k: usize,
    p1: f64,
    target: f64,
    config: &EstimatorConfig,
) -> Result<Vec<WidthBound>> {
    let count = composition_count(mu, d)? as usize;
    let size = 1usize << mu;
    let op = FiniteEmbedding::identity(size, p1, target)?;
    par::map_range(count, |i| {
        bernstein_heuristic_witness(&op, k, config.trials, par::split_seed(config.seed, i as u64))
    })
    .into_iter()
    .collect()
}

/// Witness lower bounds for `p1 > 2` on level `mu`.
///
/// Each composition `nu` contributes a `k`-dimensional subspace of its
/// `2^mu` coordinates. On the direct sum the b-scale quotient is
/// `2^{mu(-t + 1/p1 - 1/p2)}` times the smallest per-composition quotient,
/// and for `p1 > 2 >= p2` the f-scale quotient is at least that.
pub fn low_smoothness_witness(params: &ParamSpace, mu: u32, config: &EstimatorConfig) -> Result<LevelWitness> {
    require_compact(params)?;
    let (p1, p2, t, d) = (params.p1(), params.p2(), params.t(), params.d);
    if !(p1 > 2.0 && p2 < p1) {
        return Err(Error::InvalidParameter(
            "level witnesses need p2 < p1 and p1 > 2".into(),
        ));
    }
    let dim_level = block_dim(mu, d)?;
    config.budget.check(dim_level)?;
    let k = (2f64.powf(2.0 * mu as f64 / p1).floor() as usize).clamp(1, 1usize << mu);
    let count = composition_count(mu, d)?;
    let dim = count * k as u128;
    let n_nominal = ((mu as f64).powi(d as i32 - 1) * 2f64.powf(2.0 * mu as f64 / p1))
        .floor()
        .max(1.0) as u128;
    let n = n_nominal.min(dim) as usize;

    let quotient = |bounds: &[WidthBound], target: f64| -> (f64, Certification) {
        let min = bounds.iter().map(|b| b.value).fold(f64::INFINITY, f64::min);
        let cert = bounds
            .iter()
            .fold(Certification::Certified, |c, b| c.weakest(b.certification));
        (2f64.powf(mu as f64 * (-t + 1.0 / p1 - 1.0 / target)) * min, cert)
    };
    let subspace = |bounds: &[WidthBound]| {
        Witness::Formula(format!(
            "direct sum of {} subspaces of dimension {k} on level {mu}; per-block quotients {:?}",
            bounds.len(),
            bounds.iter().map(|b| b.value).collect::<Vec<_>>()
        ))
    };

    let to_two = per_composition_witnesses(mu, d, k, p1, 2.0, config)?;
    let (b_two, cert_two) = quotient(&to_two, 2.0);

    let (bernstein, ratios) = if p2 <= 2.0 {
        let own = if p2 == 2.0 {
            to_two.clone()
        } else {
            per_composition_witnesses(mu, d, k, p1, p2, config)?
        };
        let (value, cert) = quotient(&own, p2);
        let bound = WidthBound {
            kind: WidthKind::Bernstein,
            n,
            value,
            direction: Direction::Lower,
            certification: cert,
            witness: Some(subspace(&own)),
        };
        (Some(bound), own.iter().map(|b| b.value).collect())
    } else {
        (None, to_two.iter().map(|b| b.value).collect())
    };

    // Weyl numbers into a Hilbert target dominate Bernstein numbers. For p2 > 2
    // the target norm only grows; for p2 < 2 the target 2 is interpolated
    // between p2 and the source.
    let weyl_value = if p2 >= 2.0 {
        b_two
    } else {
        let theta = (1.0 / p2 - 0.5) / (1.0 / p2 - 1.0 / p1);
        (b_two * 2f64.powf(t * mu as f64 * theta)).powf(1.0 / (1.0 - theta))
    };
    let weyl = WidthBound {
        kind: WidthKind::Weyl,
        n,
        value: weyl_value,
        direction: Direction::Lower,
        certification: cert_two,
        witness: Some(subspace(&to_two)),
    };
    Ok(LevelWitness {
        mu,
        n_nominal,
        dim,
        k,
        constant: weyl_value / 2f64.powf(-t * mu as f64),
        bernstein,
        weyl,
        ratios,
    })
}

/// `b_{2n-1}(T) <= e (prod_{k<=n} x_k(T))^{1/n}`.
pub fn weyl_bernstein_geometric(weyl_values: &[f64]) -> Result<f64> {
    if weyl_values.is_empty() {
        return Err(Error::InvalidParameter("need at least one Weyl number".into()));
    }
    if weyl_values.iter().any(|v| !(*v > 0.0)) || weyl_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter(
            "Weyl numbers must be positive and nonincreasing".into(),
        ));
    }
    let mean_log = weyl_values.iter().map(|v| v.ln()).sum::<f64>() / weyl_values.len() as f64;
    Ok(std::f64::consts::E * mean_log.exp())
}

/// One output row of an estimator sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    #[serde(rename = "J")]
    pub j: u32,
    pub regime: Regime,
    pub total_rank: u128,
    pub value: f64,
    pub direction: Direction,
    pub certified: Certification,
    pub case_id: CaseId,
}

/// Upper rows for `J` in `j_min..=j_max` and lower rows where the regime has them.
///
/// Witness rows are produced only up to `witness_max_level`.
pub fn sweep(
    params: &ParamSpace,
    j_min: u32,
    j_max: u32,
    config: &EstimatorConfig,
    witness_max_level: u32,
) -> Result<Vec<EstimateRow>> {
    if j_min > j_max {
        return Err(Error::InvalidParameter(format!("empty sweep {j_min}..={j_max}")));
    }
    let regime = select_regime(params)?;
    let rate: RateExponent = predict_weyl(params)?;
    let levels: Vec<u32> = (j_min..=j_max).collect();
    let per_level = par::map(&levels, |&j| -> Result<Vec<EstimateRow>> {
        let mut rows = Vec::new();
        let plan = estimate_upper(params, j, config).map_err(|e| match e {
            Error::BudgetExceeded { count, budget } => {
                Error::InvalidParameter(format!("J = {j}: index {count} exceeds the budget {budget}"))
            }
            other => other,
        })?;
        rows.push(EstimateRow {
            j,
            regime,
            total_rank: plan.total_rank,
            value: plan.value,
            direction: Direction::Upper,
            certified: plan.certification,
            case_id: rate.case_id,
        });
        let lower = match regime {
            Regime::Low | Regime::Predicted if params.p1() > 2.0 && params.p2() < params.p1() => {
                if j <= witness_max_level {
                    Some(low_smoothness_witness(params, j, config)?.weyl)
                } else {
                    None
                }
            }
            _ if params.p1() <= 2.0 => Some(hilbert_transfer_lower(params, j)?),
            _ => None,
        };
        if let Some(b) = lower {
            rows.push(EstimateRow {
                j,
                regime,
                total_rank: b.n as u128,
                value: b.value,
                direction: Direction::Lower,
                certified: b.certification,
                case_id: rate.case_id,
            });
        }
        Ok(rows)
    });
    let mut rows: Vec<EstimateRow> = per_level
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| a.j.cmp(&b.j).then(a.direction.cmp(&b.direction)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ps(p1: &str, p2: &str, t: &str, d: usize) -> ParamSpace {
        ParamSpace::parse(p1, p2, t, d).unwrap()
    }

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::default()
    }

    #[test]
    fn block_norms() {
        let p = ps("2", "2", "1", 2);
        assert_eq!(block_operator_norm(&p, 0).unwrap().0, 1.0);
        assert_relative_eq!(block_operator_norm(&p, 3).unwrap().0, 0.125);
        let (v, c) = block_operator_norm(&ps("2", "4", "1", 2), 2).unwrap();
        assert_relative_eq!(v, 2f64.powf(-1.5));
        assert_eq!(c, Certification::Certified);
        assert_eq!(
            block_operator_norm(&ps("3", "4", "1", 2), 2).unwrap().1,
            Certification::RateOnly
        );
        // t = (1/p1 - 1/p2)_+ + 1 at mu = 0.
        assert_eq!(block_operator_norm(&ps("1.5", "3", "1.3333", 2), 0).unwrap().0, 1.0);
        assert!(block_operator_norm(&ps("2", "4", "0.25", 2), 1).is_err());
    }

    #[test]
    fn projection_examples() {
        let p = ps("2", "2", "1", 2);
        let plan = allocate_projection(&p, 5, Budget::default()).unwrap();
        assert_relative_eq!(plan.value, 2f64.powi(-5), max_relative = 1e-14);
        assert_eq!(allocate_projection(&p, 3, Budget::default()).unwrap().total_rank, 50);
        assert_eq!(cumulative_dim(3, 2).unwrap(), 49);
        let p = ps("1.5", "1.2", "0.7", 3);
        let plan = allocate_projection(&p, 0, Budget::default()).unwrap();
        let series: f64 = (1..200).map(|mu| 2f64.powf(-0.7 * mu as f64)).sum();
        assert_relative_eq!(plan.value, series, max_relative = 1e-12);
        assert!(allocate_projection(&ps("2", "3", "1", 2), 3, Budget::default()).is_err());
    }

    // Exact Weyl numbers for p1 = p2 = 2: 2^{-mu t} with multiplicity D_mu.
    fn hilbert_weyl(n: u128, t: f64, d: usize) -> f64 {
        let mut seen = 0u128;
        for mu in 0.. {
            seen += block_dim(mu, d).unwrap();
            if seen >= n {
                return 2f64.powf(-(mu as f64) * t);
            }
        }
        unreachable!()
    }

    #[test]
    fn projection_dominates_exact_hilbert_widths() {
        let p = ps("2", "2", "1", 2);
        for j in 0..10 {
            let plan = allocate_projection(&p, j, Budget::default()).unwrap();
            let exact = hilbert_weyl(plan.total_rank, 1.0, 2);
            assert_relative_eq!(exact, 2f64.powi(-(j as i32 + 1)));
            assert!(exact <= plan.value);
            let lower = hilbert_transfer_lower(&p, j).unwrap();
            assert!(lower.certified());
            assert!(lower.value <= hilbert_weyl(lower.n as u128, 1.0, 2) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn high_smoothness_examples() {
        let p = ps("2", "2", "1", 2);
        for j in 1..8 {
            let high = allocate_high_smoothness(&p, j, &cfg()).unwrap();
            let proj = allocate_projection(&p, j, Budget::default()).unwrap();
            assert_relative_eq!(high.value, proj.value, max_relative = 1e-12);
            assert!(high.total_rank >= proj.total_rank);
        }
        let p = ps("2", "4", "1", 2);
        let plan = allocate_high_smoothness(&p, 0, &cfg()).unwrap();
        let (norm, _) = block_operator_norm(&p, 0).unwrap();
        assert!(plan.value >= 0.5 * norm * 2f64.powf(-0.75) && plan.total_rank <= 3);
        let plan = allocate_high_smoothness(&p, 6, &cfg()).unwrap();
        assert_eq!(plan.free_parameter, Some(FreeParameter::Lambda(2.0)));
        assert!(plan.certification.is_certified());
        let plan = allocate_high_smoothness(&ps("1.5", "3", "1", 2), 6, &cfg()).unwrap();
        let Some(FreeParameter::Lambda(l)) = plan.free_parameter else {
            panic!()
        };
        let (lo, hi) = lambda_interval(&ps("1.5", "3", "1", 2));
        assert_relative_eq!(l, (lo + hi) / 2.0);
        assert_eq!(plan.certification, Certification::RateOnly);
        let bad = EstimatorConfig {
            lambda: Some(0.5),
            ..cfg()
        };
        assert!(matches!(
            allocate_high_smoothness(&p, 4, &bad),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn low_smoothness_examples() {
        let p = ps("4", "2", "0.2", 2);
        assert_relative_eq!(summing_exponent_inverse(&p), 0.5);
        assert_relative_eq!(p.low_smoothness_threshold().value(), 0.25);
        let plan = allocate_low_smoothness(&p, 6, &cfg()).unwrap();
        let Some(FreeParameter::Beta(beta)) = plan.free_parameter else {
            panic!()
        };
        assert_relative_eq!(beta, 0.05, max_relative = 1e-12);
        assert_eq!(plan.l, 12);
        // Hand evaluation at mu = L.
        let (mu, n, v) = *plan.blocks.last().unwrap();
        let dim = block_dim(mu, 2).unwrap() as f64;
        let expected =
            (2f64.powf(mu as f64 * (-0.2 + 0.25 - 0.5)) * (dim / n as f64).sqrt()).min(2f64.powf(-0.2 * mu as f64));
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert_eq!(n, (dim * 2f64.powf(6.0 - 12.0)).floor() as u128);
        assert!(allocate_low_smoothness(&ps("2", "2", "0.2", 2), 4, &cfg()).is_err());
        assert!(allocate_low_smoothness(&ps("4", "2", "0.3", 2), 4, &cfg()).is_err());
        // Target below 2 routes through 2.
        let q = ps("4", "1.5", "0.2", 2);
        assert_relative_eq!(summing_exponent_inverse(&q), 0.5);
        assert!(allocate_low_smoothness(&q, 5, &cfg()).is_ok());
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolation_combine((3, 2.5), (4, 2.5), 0.3, 1.0).unwrap(), (6, 2.5));
        let (n, v) = interpolation_combine((1, 4.0), (1, 1.0), 0.5, 1.0).unwrap();
        assert_eq!(n, 1);
        assert_relative_eq!(v, 2.0);
        assert!(interpolation_combine((1, 4.0), (1, 1.0), 1.0, 1.0).is_err());
        let plan = allocate_interpolated(&ps("1.25", "1.6", "1.1", 2), 5, &cfg()).unwrap();
        assert_eq!(plan.regime, Regime::Interpolated);
        assert!(plan.value > 0.0);
    }

    #[test]
    fn geometric_mean_examples() {
        assert_relative_eq!(weyl_bernstein_geometric(&[1.0; 5]).unwrap(), std::f64::consts::E);
        let v = weyl_bernstein_geometric(&[0.5, 0.25, 0.125]).unwrap();
        assert_relative_eq!(v, std::f64::consts::E * 0.25, max_relative = 1e-14);
        assert!(weyl_bernstein_geometric(&[]).is_err());
        assert!(weyl_bernstein_geometric(&[0.5, 1.0]).is_err());
    }

    #[test]
    fn transfer_examples() {
        let p = ps("2", "2", "1", 2);
        let mu = 4;
        let dim = block_dim(mu, 2).unwrap();
        let finite = WidthBound {
            kind: WidthKind::Weyl,
            n: (dim / 2) as usize,
            value: 1.0,
            direction: Direction::Lower,
            certification: Certification::Certified,
            witness: None,
        };
        let b = transfer_lower(&p, mu, dim, &finite, TransferRule::FromHilbert).unwrap();
        assert_relative_eq!(b.value, 2f64.powi(-4));
        assert_eq!(transfer_factor(&p, 0, TransferRule::FromHilbert).unwrap(), 1.0);
        let q = ps("2", "4", "1", 2);
        assert_relative_eq!(
            transfer_factor(&q, 4, TransferRule::FromHilbert).unwrap(),
            2f64.powi(-3)
        );
        assert!(transfer_lower(&p, mu, dim + 1, &finite, TransferRule::FromHilbert).is_err());
        let r = ps("4", "2", "1", 2);
        let shifted = transfer_lower(&r, mu, dim, &finite, TransferRule::shifted_default(&r)).unwrap();
        assert_eq!(shifted.certification, Certification::RateOnly);
        assert!(transfer_lower(&r, mu, dim, &finite, TransferRule::FromShifted { eps: 3.0 }).is_err());
    }

    #[test]
    fn level_witness_examples() {
        let p = ps("4", "2", "0.2", 2);
        let w = low_smoothness_witness(&p, 0, &cfg()).unwrap();
        assert_eq!((w.k, w.dim, w.weyl.n), (1, 1, 1));
        assert_relative_eq!(w.weyl.value, 1.0);
        let w = low_smoothness_witness(&p, 3, &cfg()).unwrap();
        assert_eq!(w.k, 2);
        for r in &w.ratios {
            assert!(*r >= 0.5 * 8f64.powf(0.25), "per-block quotient {r}");
        }
        assert_eq!(w.bernstein.as_ref().unwrap().value, w.weyl.value);
        let again = low_smoothness_witness(&p, 3, &cfg()).unwrap();
        assert_eq!(again, w);
        let q = ps("4", "1.5", "0.2", 2);
        let w = low_smoothness_witness(&q, 3, &cfg()).unwrap();
        assert!(w.bernstein.is_some() && w.weyl.value > 0.0);
        assert!(low_smoothness_witness(&ps("2", "2", "1", 2), 3, &cfg()).is_err());
    }

    #[test]
    fn regimes() {
        assert_eq!(select_regime(&ps("2", "2", "1", 2)).unwrap(), Regime::Projection);
        assert_eq!(select_regime(&ps("2", "3", "1", 2)).unwrap(), Regime::High);
        assert_eq!(select_regime(&ps("1.5", "1.2", "1", 2)).unwrap(), Regime::Projection);
        assert_eq!(select_regime(&ps("1.2", "1.5", "1", 2)).unwrap(), Regime::Interpolated);
        assert_eq!(select_regime(&ps("4", "2", "0.2", 2)).unwrap(), Regime::Low);
        assert_eq!(select_regime(&ps("4", "2", "1", 2)).unwrap(), Regime::Predicted);
        assert_eq!(select_regime(&ps("3", "4", "1", 2)).unwrap(), Regime::Predicted);
        assert!(select_regime(&ps("4", "2", "0.25", 2)).is_err());
        assert!(select_regime(&ps("2", "4", "0", 2)).is_err());
    }

    #[test]
    fn sweep_rows() {
        let rows = sweep(&ps("2", "2", "1", 2), 3, 8, &cfg(), 6).unwrap();
        let upper: Vec<_> = rows.iter().filter(|r| r.direction == Direction::Upper).collect();
        assert_eq!(upper.len(), 6);
        for r in &upper {
            assert_relative_eq!(r.value, 2f64.powi(-(r.j as i32)), max_relative = 1e-12);
        }
        let rows = sweep(&ps("4", "2", "0.2", 2), 3, 6, &cfg(), 6).unwrap();
        assert!(rows.iter().any(|r| r.direction == Direction::Lower));
        assert!(rows.iter().any(|r| r.direction == Direction::Upper));
        assert!(sweep(&ps("2", "3", "-0.5", 2), 3, 6, &cfg(), 6).is_err());
    }

    fn params() -> impl Strategy<Value = ParamSpace> {
        (1.1f64..5.0, 1.1f64..5.0, 0.05f64..2.5, 1usize..4).prop_filter_map("compact", |(p1, p2, t, d)| {
            let p = ParamSpace::from_f64(p1, p2, t, d).ok()?;
            p.check_compact().ok()?;
            select_regime(&p).ok()?;
            Some(p)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn plans_are_consistent(p in params(), j in 0u32..9) {
            let plan = estimate_upper(&p, j, &cfg()).unwrap();
            if plan.regime != Regime::Interpolated {
                prop_assert!((plan.recomputed_value() - plan.value).abs() <= 1e-12 * plan.value);
                prop_assert_eq!(plan.total_rank, AllocationPlan::index_from_ranks(j, p.d, &plan.blocks).unwrap());
            }
            for &(mu, n, _) in &plan.blocks {
                prop_assert!(n >= 1 && n <= block_dim(mu, p.d).unwrap() + 1);
                prop_assert!(mu > plan.j && mu <= plan.l);
            }
            if !plan.blocks.is_empty() {
                prop_assert!(plan.j < plan.l);
            }
            let next = estimate_upper(&p, j + 1, &cfg()).unwrap();
            prop_assume!(plan.regime != Regime::Predicted);
            prop_assert!(next.value <= plan.value * (1.0 + 1e-12));
        }

        #[test]
        fn certified_lower_below_certified_upper(p in params(), mu in 0u32..8) {
            prop_assume!(p.p1() <= 2.0);
            let lower = hilbert_transfer_lower(&p, mu).unwrap();
            prop_assert!(lower.certified());
            for j in 0..12 {
                let plan = estimate_upper(&p, j, &cfg()).unwrap();
                if plan.certification.is_certified() && plan.total_rank <= lower.n as u128 {
                    prop_assert!(lower.value <= plan.value * (1.0 + 1e-12),
                        "lower {} at {} above upper {} at {}", lower.value, lower.n, plan.value, plan.total_rank);
                }
            }
        }
    }
}
