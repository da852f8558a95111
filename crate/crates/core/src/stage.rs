//! One-stage soft-constraint problem.
//!
//! A symmetric scheduling policy splits the real line into an idle region
//! (estimate 0), a noisy region (affine codec, error `Var/(1+γ)`) and a
//! perfect region (zero error). With the sign side channel the optimal policy
//! is threshold-in-threshold: idle for `|x| <= β₁`, noisy for
//! `β₁ < |x| <= β₂`, perfect beyond. This module evaluates expected costs of
//! such policies and of arbitrary region partitions, and finds the optimal
//! thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{ChannelParams, CodecParams, DEFAULT_POWER};
use crate::error::{invalid, Error, Result};
use crate::source::{IntervalMoments, SourceDensity};

/// First-order residual tolerance for interior solutions.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_FIXED_POINT_ITERS: usize = 10_000;
const DAMPING: f64 = 0.5;
const RESTARTS: usize = 8;
const RESTART_SEED: u64 = 0x7e57_5eed;
const MAX_DOUBLINGS: usize = 1000;

/// Per-use prices of the noisy (`c1`) and perfect (`c2`) channels, and the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftCosts {
    pub c1: f64,
    pub c2: f64,
    pub snr: f64,
}

impl SoftCosts {
    pub fn new(c1: f64, c2: f64, snr: f64) -> Result<Self> {
        if !(c1 >= 0.0 && c1.is_finite()) {
            return Err(invalid("c1", format!("must be nonnegative and finite, got {c1}")));
        }
        if !(c2 >= 0.0 && c2.is_finite()) {
            return Err(invalid("c2", format!("must be nonnegative and finite, got {c2}")));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(invalid("gamma", format!("must be positive and finite, got {snr}")));
        }
        Ok(SoftCosts { c1, c2, snr })
    }

    /// `√((c₂ − c₁)(1 + γ))`, the gap between `β₂` and the noisy-region mean.
    fn upper_gap(&self) -> f64 {
        ((self.c2 - self.c1) * (1.0 + self.snr)).sqrt()
    }
}

/// Parameters of the per-realization stage costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCostParams {
    pub costs: SoftCosts,
    /// Codec offset `b` (zero without the side channel).
    pub offset: f64,
    /// Codec gain `α`.
    pub gain: f64,
}

/// Expected cost of each action for one realization `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCosts {
    pub idle: f64,
    pub noisy: f64,
    pub perfect: f64,
}

impl StageCosts {
    /// Cheapest action; ties go to the lower action index.
    pub fn argmin(&self) -> Action {
        let mut best = (Action::Idle, self.idle);
        if self.noisy < best.1 {
            best = (Action::Noisy, self.noisy);
        }
        if self.perfect < best.1 {
            best = (Action::Perfect, self.perfect);
        }
        best.0
    }
}

pub fn stage_costs(x: f64, params: &StageCostParams, noise_variance: f64) -> StageCosts {
    let g = params.costs.snr;
    let g1 = g + 1.0;
    let bias = x.abs() - params.offset;
    StageCosts {
        idle: x * x,
        noisy: params.costs.c1
            + bias * bias / (g1 * g1)
            + g * g * noise_variance / (params.gain * params.gain * g1 * g1),
        perfect: params.costs.c2,
    }
}

/// Scheduling decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Idle = 0,
    Noisy = 1,
    Perfect = 2,
}

impl Action {
    pub fn index(self) -> u8 {
        self as u8
    }
}

/// Threshold-in-threshold decision, ties resolved toward the lower action.
pub fn threshold_action(x: f64, beta1: f64, beta2: f64) -> Action {
    let ax = x.abs();
    if ax <= beta1 {
        Action::Idle
    } else if ax <= beta2 {
        Action::Noisy
    } else {
        Action::Perfect
    }
}

/// A labelled half-open interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
    pub action: Action,
}

/// Partition of (part of) the real line into idle / noisy / perfect regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRegions {
    regions: Vec<Region>,
    symmetric: bool,
}

impl PolicyRegions {
    /// Sorts the regions and drops empty ones. Fails if any two overlap.
    /// When `symmetric` is set, evaluation checks that the labelling is even.
    pub fn new(mut regions: Vec<Region>, symmetric: bool) -> Result<Self> {
        regions.retain(|r| r.hi > r.lo);
        if regions.iter().any(|r| r.lo.is_nan() || r.hi.is_nan()) {
            return Err(invalid("regions", "NaN bound"));
        }
        regions.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in regions.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::MalformedRegions { at: w[1].lo });
            }
        }
        Ok(PolicyRegions { regions, symmetric })
    }

    /// Regions of the threshold-in-threshold policy with `0 <= β₁ <= β₂`.
    pub fn thresholds(beta1: f64, beta2: f64) -> Self {
        let regions = vec![
            Region {
                lo: f64::NEG_INFINITY,
                hi: -beta2,
                action: Action::Perfect,
            },
            Region {
                lo: -beta2,
                hi: -beta1,
                action: Action::Noisy,
            },
            Region {
                lo: -beta1,
                hi: beta1,
                action: Action::Idle,
            },
            Region {
                lo: beta1,
                hi: beta2,
                action: Action::Noisy,
            },
            Region {
                lo: beta2,
                hi: f64::INFINITY,
                action: Action::Perfect,
            },
        ];
        PolicyRegions::new(regions, true).expect("threshold regions are ordered")
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub fn label(&self, x: f64) -> Option<Action> {
        self.regions.iter().find(|r| r.lo < x && x <= r.hi).map(|r| r.action)
    }

    /// Checks `label(x) == label(-x)` on every cell of the breakpoint grid.
    pub fn check_symmetry(&self) -> Result<()> {
        let mut cuts: Vec<f64> = self
            .regions
            .iter()
            .flat_map(|r| [r.lo, r.hi, -r.lo, -r.hi])
            .filter(|x| x.is_finite())
            .collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut probes: Vec<f64> = cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let first = cuts[0];
        let last = cuts[cuts.len() - 1];
        probes.push(first - 1.0 - first.abs());
        probes.push(last + 1.0 + last.abs());
        for x in probes {
            if self.label(x) != self.label(-x) {
                return Err(Error::AsymmetricPolicy { x });
            }
        }
        Ok(())
    }

    /// Moments of each region with the given action.
    fn pieces(&self, density: &SourceDensity, action: Action) -> Vec<IntervalMoments> {
        self.regions
            .iter()
            .filter(|r| r.action == action)
            .map(|r| density.interval_moments_or_empty(r.lo, r.hi))
            .collect()
    }

    /// Per-label probabilities `[P(T₀), P(T₁), P(T₂)]`.
    pub fn label_masses(&self, density: &SourceDensity) -> [f64; 3] {
        let mut out = [0.0; 3];
        for r in &self.regions {
            out[r.action.index() as usize] += density.mass(r.lo, r.hi);
        }
        out
    }

    /// Union moments of the noisy region, split by sign when `side_channel`
    /// is set (positive part first).
    pub fn noisy_moments(&self, density: &SourceDensity, side_channel: bool) -> Vec<IntervalMoments> {
        if !side_channel {
            return vec![IntervalMoments::combine(self.pieces(density, Action::Noisy))];
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for r in self.regions.iter().filter(|r| r.action == Action::Noisy) {
            if r.hi > 0.0 {
                pos.push(density.interval_moments_or_empty(r.lo.max(0.0), r.hi));
            }
            if r.lo < 0.0 {
                neg.push(density.interval_moments_or_empty(r.lo, r.hi.min(0.0)));
            }
        }
        vec![IntervalMoments::combine(pos), IntervalMoments::combine(neg)]
    }
}

/// Expected one-stage cost of a region policy:
/// `Var(X|T₀)P(T₀) + c₁P(T₁) + Var(X|T₁)P(T₁)/(γ+1) + c₂P(T₂)`.
/// With `side_channel`, the noisy term is taken separately over the positive
/// and negative parts of `T₁`.
pub fn eval_region_cost(
    regions: &PolicyRegions,
    density: &SourceDensity,
    costs: &SoftCosts,
    side_channel: bool,
) -> Result<f64> {
    if regions.symmetric {
        regions.check_symmetry()?;
    }
    let idle = IntervalMoments::combine(regions.pieces(density, Action::Idle));
    let perfect_mass: f64 = regions.pieces(density, Action::Perfect).iter().map(|m| m.mass).sum();
    let noisy: f64 = regions
        .noisy_moments(density, side_channel)
        .iter()
        .map(|m| costs.c1 * m.mass + m.variance * m.mass / (costs.snr + 1.0))
        .sum();
    Ok(idle.variance * idle.mass + noisy + costs.c2 * perfect_mass)
}

/// Expected cost of the threshold-in-threshold policy with side channel:
/// `2∫₀^β₁ x²p + 2c₁P(β₁,β₂) + 2/(γ+1)·Var(X|(β₁,β₂))·P(β₁,β₂) + 2c₂P(X>β₂)`.
///
/// Inputs are clamped to `0 <= β₁ <= β₂`; `β₂` may be infinite.
pub fn eval_threshold_cost(beta1: f64, beta2: f64, density: &SourceDensity, costs: &SoftCosts) -> f64 {
    let b1 = beta1.max(0.0);
    let b2 = beta2.max(b1);
    let idle = density.interval_moments_or_empty(0.0, b1);
    let noisy = density.interval_moments_or_empty(b1, b2);
    let perfect = density.mass(b2, f64::INFINITY);
    2.0 * idle.raw_second_moment()
        + 2.0 * costs.c1 * noisy.mass
        + 2.0 / (costs.snr + 1.0) * noisy.variance * noisy.mass
        + 2.0 * costs.c2 * perfect
}

/// Residuals of the two first-order conditions at `(β₁, β₂)`:
/// `β₁² − (β₁−m)²/(γ+1) − c₁` and `(β₂−m)²/(γ+1) + c₁ − c₂` with
/// `m = E[X | X ∈ (β₁, β₂)]`. A degenerate interval uses `m = β₁`.
pub fn first_order_residuals(beta1: f64, beta2: f64, density: &SourceDensity, costs: &SoftCosts) -> (f64, f64) {
    let m = if beta2 > beta1 {
        match density.interval_moments(beta1, beta2) {
            Ok(mm) => mm.mean,
            Err(_) => beta1,
        }
    } else {
        beta1
    };
    let g1 = costs.snr + 1.0;
    let r1 = beta1 * beta1 - (beta1 - m).powi(2) / g1 - costs.c1;
    let r2 = (beta2 - m).powi(2) / g1 + costs.c1 - costs.c2;
    (r1, r2)
}

/// Optimal thresholds of the soft-constraint stage problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftSolution {
    pub beta1: f64,
    pub beta2: f64,
    pub cost: f64,
    /// True when the returned point lies on the boundary of the feasible set
    /// rather than being an interior first-order root.
    pub used_boundary: bool,
    /// Codec for the positive noisy region `(β₁, β₂]` at unit power, if nonempty.
    pub codec: Option<CodecParams>,
    pub residuals: (f64, f64),
}

impl SoftSolution {
    fn at(beta1: f64, beta2: f64, used_boundary: bool, density: &SourceDensity, costs: &SoftCosts) -> Self {
        let codec = ChannelParams::new(DEFAULT_POWER, costs.snr).ok().and_then(|ch| {
            let region = density.interval_moments(beta1, beta2).ok()?;
            CodecParams::for_region(&region, &ch).ok()
        });
        SoftSolution {
            beta1,
            beta2,
            cost: eval_threshold_cost(beta1, beta2, density, costs),
            used_boundary,
            codec,
            residuals: first_order_residuals(beta1, beta2, density, costs),
        }
    }

    pub fn action(&self, x: f64) -> Action {
        threshold_action(x, self.beta1, self.beta2)
    }
}

/// Perfect-channel-only solution `β₁ = β₂ = √c₂`.
pub fn perfect_only(density: &SourceDensity, costs: &SoftCosts) -> SoftSolution {
    let beta = costs.c2.sqrt();
    SoftSolution::at(beta, beta, true, density, costs)
}

/// `Δβ·e^{λΔβ}/(e^{λΔβ}−1)`, strictly increasing from `1/λ` to ∞.
fn laplace_gap_lhs(delta: f64, rate: f64) -> f64 {
    delta / -(-rate * delta).exp_m1()
}

/// Closed-form path for a Laplace(λ) source. Solves the scalar equation in
/// `Δβ = β₂ − β₁` by bisection and recovers `β₁`, then keeps whichever of the
/// interior point and the perfect-only boundary is cheaper.
pub fn solve_laplace_thresholds(costs: &SoftCosts, rate: f64) -> Result<SoftSolution> {
    let costs = SoftCosts::new(costs.c1, costs.c2, costs.snr)?;
    let density = SourceDensity::laplace(rate)?;
    if costs.c1 >= costs.c2 {
        return Ok(perfect_only(&density, &costs));
    }
    let gap = costs.upper_gap();
    let target = 1.0 / rate + gap;

    let mut lo = 1e-12;
    let delta = if laplace_gap_lhs(lo, rate) >= target {
        // Root lies below the bracket floor; lhs ≈ 1/λ + Δ/2 there.
        2.0 * gap
    } else {
        let mut hi = 1.0 / rate;
        let mut doublings = 0;
        while laplace_gap_lhs(hi, rate) < target {
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::NoBracket { iterations: doublings });
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if laplace_gap_lhs(mid, rate) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let beta1 = (costs.c1 + (delta - gap).powi(2) / (1.0 + costs.snr)).sqrt();
    let beta2 = beta1 + delta;

    let interior = SoftSolution::at(beta1, beta2, false, &density, &costs);
    let boundary = perfect_only(&density, &costs);
    Ok(if boundary.cost < interior.cost {
        boundary
    } else {
        interior
    })
}

/// A point beyond which the density carries negligible mass.
fn search_upper(density: &SourceDensity, costs: &SoftCosts) -> f64 {
    let (_, hi) = density.support();
    if hi.is_finite() {
        return hi;
    }
    let mut x = density.variance().sqrt().max(1.0);
    while density.mass(x, f64::INFINITY) > 1e-18 && x < 1e6 {
        x *= 1.5;
    }
    x.max(costs.c2.sqrt() + costs.upper_gap().max(0.0) + 1.0)
}

/// Minimizes `f` on `[lo, hi]` by a coarse scan followed by golden-section
/// refinement around the best scan point.
fn minimize_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    const SCAN: usize = 512;
    let step = (hi - lo) / SCAN as f64;
    let (mut best_i, mut best_v) = (0, f(lo));
    for i in 1..=SCAN {
        let v = f(lo + step * i as f64);
        if v < best_v {
            best_i = i;
            best_v = v;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v <= best_v {
        (x, v)
    } else {
        (lo + step * best_i as f64, best_v)
    }
}

/// Positive root `β₁` of `β₁² − (β₁−m)²/(γ+1) = c₁`.
fn beta1_from_mean(m: f64, costs: &SoftCosts) -> f64 {
    let g = costs.snr;
    ((1.0 + g) * m * m + g * (g + 1.0) * costs.c1).sqrt().max(m.abs()) / g - m / g
}

enum FixedPoint {
    Root(f64, f64),
    Left,
    Stalled((f64, f64)),
}

fn fixed_point(density: &SourceDensity, costs: &SoftCosts, start: (f64, f64)) -> FixedPoint {
    let gap = costs.upper_gap();
    let (mut b1, mut b2) = start;
    let mut mean = 0.5 * (b1 + b2);
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let (r1, r2) = first_order_residuals(b1, b2, density, costs);
        if b2 > b1 && r1.abs().max(r2.abs()) < RESIDUAL_TOL {
            return FixedPoint::Root(b1, b2);
        }
        let next2 = mean + gap;
        let next1 = beta1_from_mean(mean, costs);
        b1 = DAMPING * b1 + (1.0 - DAMPING) * next1;
        b2 = DAMPING * b2 + (1.0 - DAMPING) * next2;
        if !(b2 > b1) || !b1.is_finite() || !b2.is_finite() {
            return FixedPoint::Left;
        }
        mean = match density.interval_moments(b1, b2) {
            Ok(m) => m.mean,
            Err(_) => return FixedPoint::Left,
        };
    }
    FixedPoint::Stalled(first_order_residuals(b1, b2, density, costs))
}

/// Solver for any symmetric unimodal density. Runs a damped fixed-point
/// iteration on the first-order system from several starts, then compares the
/// roots found against the three boundary families (`β₁ = 0`, `β₂ = ∞`,
/// `β₁ = β₂ = √c₂`) by direct cost evaluation.
pub fn solve_generic_thresholds(density: &SourceDensity, costs: &SoftCosts) -> Result<SoftSolution> {
    let costs = SoftCosts::new(costs.c1, costs.c2, costs.snr)?;
    if costs.c1 >= costs.c2 {
        return Ok(perfect_only(density, &costs));
    }
    let upper = search_upper(density, &costs);
    let gap = costs.upper_gap();

    let mut starts = vec![(costs.c1.sqrt(), costs.c1.sqrt() + 2.0 * gap)];
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..RESTARTS {
        let b1 = rng.random::<f64>() * upper.min(2.0 * costs.c2.sqrt() + 1.0);
        let b2 = b1 + rng.random::<f64>() * 2.0 * gap + 1e-6;
        starts.push((b1, b2));
    }

    let mut roots = Vec::new();
    let mut stalled: Option<(f64, f64)> = None;
    for start in starts {
        match fixed_point(density, &costs, start) {
            FixedPoint::Root(b1, b2) => roots.push(SoftSolution::at(b1, b2, false, density, &costs)),
            FixedPoint::Left => {}
            FixedPoint::Stalled(res) => stalled = Some(res),
        }
    }
    if roots.is_empty() {
        if let Some(residuals) = stalled {
            return Err(Error::NonConvergence {
                iterations: MAX_FIXED_POINT_ITERS,
                residuals,
            });
        }
    }

    let mut candidates = roots;
    candidates.push(perfect_only(density, &costs));
    let (b2, _) = minimize_1d(|b| eval_threshold_cost(0.0, b, density, &costs), 0.0, upper);
    candidates.push(SoftSolution::at(0.0, b2, true, density, &costs));
    let (b1, _) = minimize_1d(|b| eval_threshold_cost(b, f64::INFINITY, density, &costs), 0.0, upper);
    candidates.push(SoftSolution::at(b1, f64::INFINITY, true, density, &costs));

    Ok(candidates
        .into_iter()
        .fold(None::<SoftSolution>, |best, c| match best {
            Some(b) if b.cost <= c.cost => Some(b),
            _ => Some(c),
        })
        .expect("at least one candidate"))
}

/// Closed form for Laplace sources, generic iteration otherwise.
pub fn solve_thresholds(density: &SourceDensity, costs: &SoftCosts) -> Result<SoftSolution> {
    match density.laplace_rate() {
        Some(rate) => solve_laplace_thresholds(costs, rate),
        None => solve_generic_thresholds(density, costs),
    }
}

/// Optimal `β₁` when only the noisy channel is available (`β₂ = ∞`).
/// For Laplace sources the tail mean is `β₁ + 1/λ`, giving
/// `β₁ = √(c₁ + 1/(λ²(1+γ)))`.
pub fn solve_noisy_only(density: &SourceDensity, c1: f64, snr: f64) -> Result<SoftSolution> {
    let costs = SoftCosts::new(c1, c1, snr)?;
    if let Some(rate) = density.laplace_rate() {
        let beta1 = (c1 + 1.0 / (rate * rate * (1.0 + snr))).sqrt();
        return Ok(SoftSolution::at(beta1, f64::INFINITY, false, density, &costs));
    }
    let upper = search_upper(density, &costs);
    let (b1, v) = minimize_1d(|b| eval_threshold_cost(b, f64::INFINITY, density, &costs), 0.0, upper);
    // Sharpen with the first-order condition when it improves the scan.
    let mut beta1 = b1;
    let mut x = b1;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let m = match density.interval_moments(x, f64::INFINITY) {
            Ok(m) => m.mean,
            Err(_) => break,
        };
        let next = DAMPING * x + (1.0 - DAMPING) * beta1_from_mean(m, &costs);
        if (next - x).abs() < 1e-14 * (1.0 + x) {
            x = next;
            if eval_threshold_cost(x, f64::INFINITY, density, &costs) <= v {
                beta1 = x;
            }
            break;
        }
        x = next;
    }
    Ok(SoftSolution::at(beta1, f64::INFINITY, beta1 == 0.0, density, &costs))
}

/// Exhaustive search over a square grid with spacing `step` on
/// `[0, upper]²`; a fallback when the iterative solver stalls.
pub fn grid_thresholds(density: &SourceDensity, costs: &SoftCosts, upper: f64, step: f64) -> Result<SoftSolution> {
    let costs = SoftCosts::new(costs.c1, costs.c2, costs.snr)?;
    if !(step > 0.0 && upper > 0.0) {
        return Err(invalid("grid", "step and upper bound must be positive"));
    }
    let n = (upper / step).ceil() as usize;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..=n {
        let b1 = i as f64 * step;
        for j in i..=n {
            let b2 = j as f64 * step;
            let v = eval_threshold_cost(b1, b2, density, &costs);
            if v < best.2 {
                best = (b1, b2, v);
            }
        }
    }
    Ok(SoftSolution::at(best.0, best.1, true, density, &costs))
}
