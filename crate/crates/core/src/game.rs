//! Best responses and Nash equilibria of the installation game for a fixed
//! incentive split β.
//!
//! Both payoffs depend on the other member only through the aggregate
//! y = y_h + y_b, and each is concave in its own installation. A member's
//! best response is therefore "bring the aggregate to my target T, within my
//! box": clamp(T − y_other, 0, θ). The target is
//!
//! * +∞ when the unit gain g is non-negative (install fully),
//! * −∞ when even the full incentive share cannot make the gain positive,
//!   g + share·Z/(r+λ) ≤ 0 (stay idle),
//! * otherwise the root of the first-order condition, which lies above the
//!   demand d when share > threshold (the m₂ branch of w) and at or below it
//!   otherwise (the m₁ branch).
//!
//! When the two targets differ at most one member can be interior, so every
//! equilibrium has a member at a bound and a finite enumeration finds it.
//! Equal finite targets happen only at β = β_n, where any split of the common
//! target is an equilibrium.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::incentive::IncentiveCoefficients;
use crate::payoffs::{InstallationPair, Member, UnitGains};
use crate::scenario::MarketScenario;

/// Relative band around β_n inside which the continuum branch is used.
pub const BETA_N_TOLERANCE: f64 = 1e-9;

/// Default position of the selected point in a continuum of equilibria:
/// the household takes this fraction of the aggregate target.
pub const DEFAULT_CONTINUUM_SPLIT: f64 = 0.5;

const FIXED_POINT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("β_n = g_h/(g_h+g_b) is undefined because g_h + g_b = 0")]
    UndefinedBetaN,
    #[error("no equilibrium found at β = {beta}")]
    NoEquilibrium { beta: f64 },
}

/// Split values at which the members' best-response regimes change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Household share above which its target exceeds the demand.
    pub beta_h: f64,
    /// Household share below which the biogas target exceeds the demand.
    pub beta_b: f64,
    /// g_h/(g_h+g_b), where the two targets coincide; `None` if g_h+g_b = 0.
    pub beta_n: Option<f64>,
}

impl Thresholds {
    pub fn new(gains: &UnitGains, coeffs: &IncentiveCoefficients, s: &MarketScenario) -> Self {
        let seam = s.incentive * coeffs.seam_marginal();
        let sum = gains.g_h + gains.g_b;
        Self {
            beta_h: -gains.g_h / seam,
            beta_b: 1.0 + gains.g_b / seam,
            beta_n: (sum != 0.0).then(|| gains.g_h / sum),
        }
    }

    /// β_h < β_b, equivalently Z B₁(m₂−1) < g_h + g_b: the continuum at β_n
    /// sits above the demand.
    pub fn continuum_above_demand(&self) -> bool {
        self.beta_h < self.beta_b
    }
}

/// Thresholds, failing when β_n is undefined.
pub fn thresholds(
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    s: &MarketScenario,
) -> Result<Thresholds, GameError> {
    let t = Thresholds::new(gains, coeffs, s);
    t.beta_n.ok_or(GameError::UndefinedBetaN)?;
    Ok(t)
}

/// Aggregate installation a member would like to reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// Non-negative unit gain: install the cap whatever the other does.
    All,
    /// The incentive share cannot make the gain positive.
    Nothing,
    Aggregate { total: f64, above_demand: bool },
}

impl Target {
    pub fn regime(&self) -> Regime {
        match *self {
            Target::All => Regime::Full,
            Target::Nothing => Regime::Idle,
            Target::Aggregate { above_demand: true, .. } => Regime::AboveDemand,
            Target::Aggregate { above_demand: false, .. } => Regime::BelowDemand,
        }
    }

    /// clamp(T − other, 0, cap).
    pub fn respond(&self, other: f64, cap: f64) -> f64 {
        match *self {
            Target::All => cap,
            Target::Nothing => 0.0,
            Target::Aggregate { total, .. } => (total - other).clamp(0.0, cap),
        }
    }

    fn total(&self) -> Option<f64> {
        match *self {
            Target::Aggregate { total, .. } => Some(total),
            _ => None,
        }
    }
}

pub fn target(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    member: Member,
    beta: f64,
) -> Target {
    let g = match member {
        Member::Household => gains.g_h,
        Member::Biogas => gains.g_b,
    };
    let share = member.share(beta);
    if g >= 0.0 {
        return Target::All;
    }
    let full_value = share * s.incentive / coeffs.killing_rate;
    if g + full_value <= 0.0 {
        return Target::Nothing;
    }
    let d = s.demand.initial_value;
    // First-order condition g + share·Z·∂w/∂y = 0 on each branch of w, with
    // (d/y)^m isolated. On the m₂ branch the ratio equals threshold/share.
    let above = -g / (share * s.incentive * coeffs.seam_marginal());
    if above < 1.0 {
        return Target::Aggregate {
            total: d * (-above.ln() / coeffs.m2).exp(),
            above_demand: true,
        };
    }
    let below = -(g + full_value) / (share * s.incentive * coeffs.c1 * (1.0 - coeffs.m1));
    Target::Aggregate {
        total: d * (-below.ln() / coeffs.m1).exp(),
        above_demand: false,
    }
}

pub fn best_response_household(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    y_b: f64,
    beta: f64,
) -> f64 {
    target(s, gains, coeffs, Member::Household, beta).respond(y_b, s.household_cap)
}

pub fn best_response_biogas(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    y_h: f64,
    beta: f64,
) -> f64 {
    target(s, gains, coeffs, Member::Biogas, beta).respond(y_h, s.biogas_cap)
}

/// Where an interior best response puts the aggregate relative to the
/// demand: `Greater` when it exceeds d, `Equal` at the threshold.
pub fn aggregate_vs_demand(thresholds: &Thresholds, member: Member, beta: f64) -> Ordering {
    let ordering = match member {
        Member::Household => beta.partial_cmp(&thresholds.beta_h),
        Member::Biogas => thresholds.beta_b.partial_cmp(&beta),
    };
    ordering.unwrap_or(Ordering::Equal)
}

/// Best-response regime of one member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Full,
    Idle,
    AboveDemand,
    BelowDemand,
}

impl Regime {
    fn id(self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::Idle => "idle",
            Regime::AboveDemand => "above",
            Regime::BelowDemand => "below",
        }
    }

    fn is_interior(self) -> bool {
        matches!(self, Regime::AboveDemand | Regime::BelowDemand)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Full => "installs fully",
            Regime::Idle => "idle",
            Regime::AboveDemand => "interior above demand",
            Regime::BelowDemand => "interior below demand",
        })
    }
}

/// Which family of equilibria a solution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EquilibriumCase {
    /// The biogas producer may install and at most one member is interior.
    Installing { household: Regime, biogas: Regime },
    /// β = β_n: every split of the common target is an equilibrium.
    Continuum { above_demand: bool },
    /// g_b + Z(1−β)/(r+λ) ≤ 0: the biogas producer never installs.
    BiogasPricedOut { household: Regime },
    /// Both members have interior targets but β ≠ β_n, so the targets differ
    /// and one member ends up at a bound.
    Crossed { household: Regime, biogas: Regime },
}

impl EquilibriumCase {
    /// Stable machine-readable identifier, used in CSV output.
    pub fn id(&self) -> String {
        match *self {
            EquilibriumCase::Installing {
                household: Regime::Full,
                biogas: Regime::Full,
            } => "both_gains_positive".into(),
            EquilibriumCase::Installing { household, biogas } => {
                format!("community_{}_{}", household.id(), biogas.id())
            }
            EquilibriumCase::Continuum { above_demand: true } => "continuum_above".into(),
            EquilibriumCase::Continuum { above_demand: false } => "continuum_below".into(),
            EquilibriumCase::BiogasPricedOut { household } => {
                format!("no_community_{}", household.id())
            }
            EquilibriumCase::Crossed { household, biogas } => {
                format!("crossed_{}_{}", household.id(), biogas.id())
            }
        }
    }
}

impl fmt::Display for EquilibriumCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquilibriumCase::Installing {
                household: Regime::Full,
                biogas: Regime::Full,
            } => write!(f, "both gains positive"),
            EquilibriumCase::Installing { household, biogas } => {
                write!(f, "community: household {household}, biogas {biogas}")
            }
            EquilibriumCase::Continuum { above_demand } => write!(
                f,
                "continuum of equilibria, aggregate {} demand",
                if *above_demand { "above" } else { "at or below" }
            ),
            EquilibriumCase::BiogasPricedOut { household } => {
                write!(f, "no community: biogas priced out, household {household}")
            }
            EquilibriumCase::Crossed { household, biogas } => {
                write!(f, "targets differ: household {household}, biogas {biogas}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub beta: f64,
    pub case: EquilibriumCase,
    /// The equilibrium, or the selected split for a continuum.
    pub installs: InstallationPair,
    /// Common aggregate target of a continuum of equilibria.
    pub aggregate_target: Option<f64>,
    /// The biogas producer installs and its incentive share makes the
    /// community worthwhile: g_b + Z(1−β)/(r+λ) ≥ 0 and y_b > 0.
    pub community_formed: bool,
}

pub fn nash_equilibrium(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    thresholds: &Thresholds,
    beta: f64,
) -> Result<EquilibriumOutcome, GameError> {
    nash_equilibrium_with_split(s, gains, coeffs, thresholds, beta, DEFAULT_CONTINUUM_SPLIT)
}

/// As [`nash_equilibrium`], selecting the point of a continuum where the
/// household holds `split` of the aggregate (clamped to the boxes).
pub fn nash_equilibrium_with_split(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    thresholds: &Thresholds,
    beta: f64,
    split: f64,
) -> Result<EquilibriumOutcome, GameError> {
    let t_h = target(s, gains, coeffs, Member::Household, beta);
    let t_b = target(s, gains, coeffs, Member::Biogas, beta);
    let (theta_h, theta_b) = (s.household_cap, s.biogas_cap);
    let biogas_viable =
        gains.g_b + s.incentive * (1.0 - beta) / coeffs.killing_rate >= 0.0;
    let outcome = |case, installs: InstallationPair, aggregate_target| EquilibriumOutcome {
        beta,
        case,
        installs,
        aggregate_target,
        community_formed: biogas_viable && installs.y_b > 0.0,
    };

    if let (Some(beta_n), Some(_), Some(_)) = (thresholds.beta_n, t_h.total(), t_b.total()) {
        if (beta - beta_n).abs() <= BETA_N_TOLERANCE * beta_n.abs() {
            let above = thresholds.continuum_above_demand();
            let total = continuum_target(s, gains, coeffs, above);
            if total < theta_h + theta_b {
                let y_h = (split * total).clamp((total - theta_b).max(0.0), theta_h.min(total));
                let installs = InstallationPair::new(y_h, (total - y_h).clamp(0.0, theta_b));
                let case = EquilibriumCase::Continuum { above_demand: above };
                return Ok(outcome(case, installs, Some(total)));
            }
        }
    }

    let installs = corner_equilibrium(&t_h, &t_b, theta_h, theta_b)
        .ok_or(GameError::NoEquilibrium { beta })?;
    let (household, biogas) = (t_h.regime(), t_b.regime());
    let case = if biogas == Regime::Idle {
        EquilibriumCase::BiogasPricedOut { household }
    } else if household.is_interior() && biogas.is_interior() {
        EquilibriumCase::Crossed { household, biogas }
    } else {
        EquilibriumCase::Installing { household, biogas }
    };
    Ok(outcome(case, installs, None))
}

/// Common target at β = β_n, from the gain sum.
pub fn continuum_target(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    above_demand: bool,
) -> f64 {
    let d = s.demand.initial_value;
    let z = s.incentive;
    let sum = gains.g_h + gains.g_b;
    if above_demand {
        d * ((z * coeffs.b1 * (coeffs.m2 - 1.0) / sum).ln() / coeffs.m2).exp()
    } else {
        let ratio = z * coeffs.c1 * (coeffs.m1 - 1.0) / (sum + z / coeffs.killing_rate);
        d * (ratio.ln() / coeffs.m1).exp()
    }
}

/// The equilibrium with at least one member at a bound of its box.
fn corner_equilibrium(
    t_h: &Target,
    t_b: &Target,
    theta_h: f64,
    theta_b: f64,
) -> Option<InstallationPair> {
    let consistent = |a: f64, b: f64| (a - b).abs() <= FIXED_POINT_TOLERANCE;
    for y_h in [0.0, theta_h] {
        let y_b = t_b.respond(y_h, theta_b);
        if consistent(t_h.respond(y_b, theta_h), y_h) {
            return Some(InstallationPair::new(y_h, y_b));
        }
    }
    for y_b in [0.0, theta_b] {
        let y_h = t_h.respond(y_b, theta_h);
        if consistent(t_b.respond(y_h, theta_b), y_b) {
            return Some(InstallationPair::new(y_h, y_b));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incentive::coefficients;
    use crate::payoffs::unit_gains;
    use crate::scenario::compute_net_rates;
    use crate::testing::{example1, example2};

    fn setup(s: &MarketScenario) -> (UnitGains, IncentiveCoefficients, Thresholds) {
        let rates = compute_net_rates(s).unwrap();
        let gains = unit_gains(s, &rates);
        let coeffs = coefficients(s, &rates).unwrap();
        let t = Thresholds::new(&gains, &coeffs, s);
        (gains, coeffs, t)
    }

    #[test]
    fn injected_biogas_gain_reproduces_threshold() {
        let s = example1();
        let (_, coeffs, _) = setup(&s);
        let gains = UnitGains {
            g_h: 1.4056e7,
            g_b: -6.256e6,
        };
        let t = Thresholds::new(&gains, &coeffs, &s);
        assert!((t.beta_b + 42.6169).abs() < 0.5, "{}", t.beta_b);
        assert!(t.beta_h < 0.0);
    }

    #[test]
    fn symmetric_negative_gains_split_evenly() {
        let s = example1();
        let (_, coeffs, _) = setup(&s);
        let g = UnitGains {
            g_h: -1e6,
            g_b: -1e6,
        };
        assert_eq!(thresholds(&g, &coeffs, &s).unwrap().beta_n, Some(0.5));
        let zero = UnitGains { g_h: 1e6, g_b: -1e6 };
        assert_eq!(thresholds(&zero, &coeffs, &s), Err(GameError::UndefinedBetaN));
    }

    #[test]
    fn threshold_identities() {
        let s = example2();
        let (g, _, t) = setup(&s);
        let lhs = t.beta_h / g.g_h;
        let rhs = (1.0 - t.beta_b) / g.g_b;
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs());
    }

    #[test]
    fn ordering_of_aggregate() {
        let t = Thresholds {
            beta_h: 0.3,
            beta_b: 0.6,
            beta_n: Some(0.4),
        };
        assert_eq!(aggregate_vs_demand(&t, Member::Household, 0.3), Ordering::Equal);
        assert_eq!(aggregate_vs_demand(&t, Member::Household, 0.5), Ordering::Greater);
        assert_eq!(aggregate_vs_demand(&t, Member::Household, 0.1), Ordering::Less);
        assert_eq!(aggregate_vs_demand(&t, Member::Biogas, 0.5), Ordering::Greater);
        assert_eq!(aggregate_vs_demand(&t, Member::Biogas, 0.7), Ordering::Less);
    }

    #[test]
    fn household_target_matches_threshold_form() {
        let mut s = example1();
        let rates = compute_net_rates(&s).unwrap();
        s.household_cost = s.spot_price.initial_value / rates.spot + 7e4;
        let (g, c, t) = setup(&s);
        assert!(g.g_h < 0.0 && t.beta_h > 0.0 && t.beta_h < 1.0, "{t:?}");
        let z_r = s.incentive / c.killing_rate;
        for beta in [0.5 * t.beta_h, t.beta_h, 0.5 * (1.0 + t.beta_h)] {
            let Target::Aggregate { total, .. } = target(&s, &g, &c, Member::Household, beta)
            else {
                panic!("expected interior target at β = {beta}");
            };
            let expected = if beta > t.beta_h {
                0.3 * (beta / t.beta_h).powf(1.0 / c.m2)
            } else {
                0.3 * ((g.g_h / t.beta_h + z_r) / (g.g_h / beta + z_r)).powf(1.0 / c.m1)
            };
            assert!((total - expected).abs() < 1e-9 * expected, "{total} vs {expected}");
        }
    }

    #[test]
    fn example1_base_case_has_no_community() {
        let s = example1();
        let (g, c, t) = setup(&s);
        for beta in [1e-6, 0.2, 0.5, 0.9] {
            let eq = nash_equilibrium(&s, &g, &c, &t, beta).unwrap();
            assert!(!eq.community_formed);
            assert_eq!(eq.installs, InstallationPair::new(0.32, 0.0));
        }
    }

    #[test]
    fn example2_installs_fully() {
        let s = example2();
        let (g, c, t) = setup(&s);
        let eq = nash_equilibrium(&s, &g, &c, &t, 0.5).unwrap();
        assert_eq!(eq.case.to_string(), "both gains positive");
        assert_eq!(eq.case.id(), "both_gains_positive");
        assert_eq!(eq.installs, InstallationPair::new(0.4737, 0.2));
        assert!(eq.community_formed);
    }

    #[test]
    fn nobody_installs_when_incentive_too_small() {
        let mut s = example1();
        s.household_cost = 1e9;
        s.biogas_cost = 1e9;
        let (g, c, t) = setup(&s);
        let eq = nash_equilibrium(&s, &g, &c, &t, 0.5).unwrap();
        assert_eq!(eq.installs, InstallationPair::default());
        assert_eq!(
            eq.case,
            EquilibriumCase::BiogasPricedOut {
                household: Regime::Idle
            }
        );
        assert!(!eq.community_formed);
    }

    #[test]
    fn continuum_at_beta_n() {
        let mut s = example2();
        s.spot_price.initial_value = 5.0;
        let (g, c, t) = setup(&s);
        let beta_n = t.beta_n.unwrap();
        let eq = nash_equilibrium(&s, &g, &c, &t, beta_n).unwrap();
        let total = eq.aggregate_target.unwrap();
        assert!(matches!(eq.case, EquilibriumCase::Continuum { .. }));
        assert!((eq.installs.y_h - eq.installs.y_b).abs() < 1e-15);
        let t_h = target(&s, &g, &c, Member::Household, beta_n).total().unwrap();
        assert!((total - t_h).abs() < 1e-9 * total);
        let off = nash_equilibrium(&s, &g, &c, &t, beta_n * 0.99).unwrap();
        assert!(matches!(off.case, EquilibriumCase::Crossed { .. }));
    }
}
