//! Region-shifting constructions that compare a policy against a rearranged
//! one with the same per-label probabilities.
//!
//! * Uniform source, no side channel: the symmetric threshold-in-threshold
//!   policy `f*` is beaten by `f′`, which moves the negative half of the
//!   noisy region next to the positive half. The connected region has the
//!   same mass but smaller conditional variance.
//! * With the side channel, a policy whose positive noisy region
//!   `(β₁₂ₗ, β₁₂ᵣ]` is separated from the idle region by a perfect band is
//!   weakly improved by moving the noisy region inward to `(β₁, β₂′]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::source::SourceDensity;
use crate::stage::{eval_region_cost, Action, PolicyRegions, Region, SoftCosts};

/// Tolerance on per-label mass agreement between the two policies.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConstruction {
    pub original: PolicyRegions,
    pub shifted: PolicyRegions,
    /// Whether the sign side channel is available to the noisy codec.
    pub side_channel: bool,
}

/// Per-label `(original, shifted)` probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassCertificate {
    pub idle: (f64, f64),
    pub noisy: (f64, f64),
    pub perfect: (f64, f64),
}

impl MassCertificate {
    pub fn max_gap(&self) -> f64 {
        [self.idle, self.noisy, self.perfect]
            .iter()
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl ShiftConstruction {
    pub fn masses(&self, density: &SourceDensity) -> MassCertificate {
        let a = self.original.label_masses(density);
        let b = self.shifted.label_masses(density);
        MassCertificate {
            idle: (a[0], b[0]),
            noisy: (a[1], b[1]),
            perfect: (a[2], b[2]),
        }
    }

    /// The same policy on both sides.
    pub fn null(regions: PolicyRegions, side_channel: bool) -> Self {
        ShiftConstruction {
            original: regions.clone(),
            shifted: regions,
            side_channel,
        }
    }
}

fn region(lo: f64, hi: f64, action: Action) -> Region {
    Region { lo, hi, action }
}

/// Builds `f*` (threshold-in-threshold on `[-L, L]`) and `f′` (noisy region
/// `(β₁*, 2β₂* − β₁*]`). Requires `0 < β₁* < β₂*`, `2β₂* − β₁* < L`, and
/// `β₂* < √(c₂ − c₁)·(γ + 1)`, the bound satisfied by any optimal `β₂*`.
pub fn build_uniform_counterexample(
    half_width: f64,
    beta1: f64,
    beta2: f64,
    costs: &SoftCosts,
) -> Result<ShiftConstruction> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(invalid("L", "must be positive"));
    }
    if !(beta1 > 0.0 && beta2 > beta1) {
        return Err(Error::GeometryViolation(format!(
            "need 0 < beta1 < beta2, got ({beta1}, {beta2})"
        )));
    }
    let far = 2.0 * beta2 - beta1;
    if far >= half_width {
        return Err(Error::GeometryViolation(format!(
            "2*beta2 - beta1 = {far} must be below L = {half_width}"
        )));
    }
    if !(costs.c1 < costs.c2) {
        return Err(Error::GeometryViolation("need c1 < c2".into()));
    }
    let bound = (costs.c2 - costs.c1).sqrt() * (costs.snr + 1.0);
    if beta2 >= bound {
        return Err(Error::GeometryViolation(format!(
            "beta2 = {beta2} must be below sqrt(c2 - c1)(gamma + 1) = {bound}"
        )));
    }
    let l = half_width;
    let original = PolicyRegions::new(
        vec![
            region(-l, -beta2, Action::Perfect),
            region(-beta2, -beta1, Action::Noisy),
            region(-beta1, beta1, Action::Idle),
            region(beta1, beta2, Action::Noisy),
            region(beta2, l, Action::Perfect),
        ],
        true,
    )?;
    let shifted = PolicyRegions::new(
        vec![
            region(-l, -beta1, Action::Perfect),
            region(-beta1, beta1, Action::Idle),
            region(beta1, far, Action::Noisy),
            region(far, l, Action::Perfect),
        ],
        false,
    )?;
    Ok(ShiftConstruction {
        original,
        shifted,
        side_channel: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ShiftedStrictlyBetter,
    Tie,
    ShiftedWorse,
}

/// Costs of both policies and their noisy-region conditional variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub j_original: f64,
    pub j_shifted: f64,
    /// `J(shifted) − J(original)`.
    pub difference: f64,
    /// Conditional variance of the noisy region (positive part with side channel).
    pub noisy_variance_original: f64,
    pub noisy_variance_shifted: f64,
    pub verdict: Verdict,
}

/// Differences within this band count as a tie.
pub const TIE_TOL: f64 = 1e-12;

pub fn compare_costs(
    construction: &ShiftConstruction,
    density: &SourceDensity,
    costs: &SoftCosts,
) -> Result<CostComparison> {
    let side = construction.side_channel;
    let j_original = eval_region_cost(&construction.original, density, costs, side)?;
    let j_shifted = eval_region_cost(&construction.shifted, density, costs, side)?;
    let difference = j_shifted - j_original;
    let verdict = if difference < -TIE_TOL {
        Verdict::ShiftedStrictlyBetter
    } else if difference > TIE_TOL {
        Verdict::ShiftedWorse
    } else {
        Verdict::Tie
    };
    Ok(CostComparison {
        j_original,
        j_shifted,
        difference,
        noisy_variance_original: construction.original.noisy_moments(density, side)[0].variance,
        noisy_variance_shifted: construction.shifted.noisy_moments(density, side)[0].variance,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InwardShift {
    /// Outer edge of the moved noisy region.
    pub beta2_prime: f64,
    pub construction: ShiftConstruction,
}

/// Moves the noisy band `±(β₁₂ₗ, β₁₂ᵣ]` inward to `±(β₁, β₂′]`, with `β₂′`
/// chosen by bisection so that both bands carry the same probability.
pub fn build_inward_shift(beta1: f64, left: f64, right: f64, density: &SourceDensity) -> Result<InwardShift> {
    if !(beta1 >= 0.0 && left >= beta1 && right > left) {
        return Err(invalid(
            "thresholds",
            format!("need 0 <= beta1 <= beta12l < beta12r, got ({beta1}, {left}, {right})"),
        ));
    }
    let target = density.mass(left, right);
    let beta2_prime = if left == beta1 {
        right
    } else {
        // mass(β₁, β₁ + w) >= mass(β₁₂ₗ, β₁₂ₗ + w) for a unimodal density,
        // so the root lies within [β₁, β₁ + (β₁₂ᵣ − β₁₂ₗ)].
        let mut lo = beta1;
        let mut hi = beta1 + (right - left);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if density.mass(beta1, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let pick_hi = (density.mass(beta1, hi) - target).abs() <= (density.mass(beta1, lo) - target).abs();
        if pick_hi {
            hi
        } else {
            lo
        }
    };

    let original = PolicyRegions::new(
        vec![
            region(f64::NEG_INFINITY, -right, Action::Perfect),
            region(-right, -left, Action::Noisy),
            region(-left, -beta1, Action::Perfect),
            region(-beta1, beta1, Action::Idle),
            region(beta1, left, Action::Perfect),
            region(left, right, Action::Noisy),
            region(right, f64::INFINITY, Action::Perfect),
        ],
        true,
    )?;
    let shifted = PolicyRegions::new(
        vec![
            region(f64::NEG_INFINITY, -beta2_prime, Action::Perfect),
            region(-beta2_prime, -beta1, Action::Noisy),
            region(-beta1, beta1, Action::Idle),
            region(beta1, beta2_prime, Action::Noisy),
            region(beta2_prime, f64::INFINITY, Action::Perfect),
        ],
        true,
    )?;
    Ok(InwardShift {
        beta2_prime,
        construction: ShiftConstruction {
            original,
            shifted,
            side_channel: true,
        },
    })
}

/// Everything needed to audit one comparison, serialisable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub original: Vec<Region>,
    pub shifted: Vec<Region>,
    pub side_channel: bool,
    pub masses: MassCertificate,
    pub comparison: CostComparison,
}

pub fn report(construction: &ShiftConstruction, density: &SourceDensity, costs: &SoftCosts) -> Result<ShiftReport> {
    Ok(ShiftReport {
        original: construction.original.regions().to_vec(),
        shifted: construction.shifted.regions().to_vec(),
        side_channel: construction.side_channel,
        masses: construction.masses(density),
        comparison: compare_costs(construction, density, costs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs() -> SoftCosts {
        SoftCosts::new(0.5, 2.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_geometry() {
        let c = build_uniform_counterexample(10.0, 0.5, 1.0, &costs()).unwrap();
        let noisy: Vec<_> = c
            .shifted
            .regions()
            .iter()
            .filter(|r| r.action == Action::Noisy)
            .collect();
        assert_eq!(noisy.len(), 1);
        assert_eq!((noisy[0].lo, noisy[0].hi), (0.5, 1.5));
        let d = SourceDensity::uniform(10.0).unwrap();
        let m = c.masses(&d);
        assert!((m.noisy.0 - 0.05).abs() < 1e-15 && (m.noisy.1 - 0.05).abs() < 1e-15);
        assert!(m.max_gap() < MASS_TOL);
    }

    #[test]
    fn uniform_preconditions() {
        assert!(matches!(
            build_uniform_counterexample(10.0, 1.0, 1.0, &costs()),
            Err(Error::GeometryViolation(_))
        ));
        assert!(matches!(
            build_uniform_counterexample(1.2, 0.5, 1.0, &costs()),
            Err(Error::GeometryViolation(_))
        ));
        let expensive_noisy = SoftCosts::new(2.0, 1.0, 1.0).unwrap();
        assert!(build_uniform_counterexample(10.0, 0.5, 1.0, &expensive_noisy).is_err());
    }

    #[test]
    fn null_shift_ties() {
        let d = SourceDensity::laplace(1.0).unwrap();
        let c = ShiftConstruction::null(PolicyRegions::thresholds(0.8, 2.0), true);
        let cmp = compare_costs(&c, &d, &costs()).unwrap();
        assert_eq!(cmp.difference, 0.0);
        assert_eq!(cmp.verdict, Verdict::Tie);
    }

    #[test]
    fn inward_shift_identity_when_connected() {
        let d = SourceDensity::laplace(1.0).unwrap();
        let s = build_inward_shift(1.0, 1.0, 3.0, &d).unwrap();
        assert_eq!(s.beta2_prime, 3.0);
    }

    #[test]
    fn inward_shift_uniform_keeps_width() {
        let d = SourceDensity::uniform(10.0).unwrap();
        let s = build_inward_shift(0.7, 2.0, 3.3, &d).unwrap();
        assert!((s.beta2_prime - (0.7 + 1.3)).abs() < 1e-12);
    }

    #[test]
    fn inward_shift_rejects_bad_order() {
        let d = SourceDensity::laplace(1.0).unwrap();
        assert!(build_inward_shift(2.0, 1.0, 3.0, &d).is_err());
        assert!(build_inward_shift(0.5, 1.0, 1.0, &d).is_err());
    }
}
