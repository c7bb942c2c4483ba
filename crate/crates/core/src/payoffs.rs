//! Member payoffs, with and without the self-consumption incentive.
//!
//! Without the incentive both payoffs are linear in the member's own
//! installation:
//!
//! ```text
//! J⁰_h = y_h g_h − x_c d / r_cd          g_h = x_v/r_v − c_h
//! J⁰_b = y_b g_b + p b K_g / r_p         g_b = x_v/r_v − p/r_p − c_b
//! ```
//!
//! The incentive adds β Z w to the household and (1−β) Z w to the biogas
//! producer. All values are in € discounted to time zero.

use serde::{Deserialize, Serialize};

use crate::incentive::{IncentiveCoefficients, IncentiveError};
use crate::scenario::{MarketScenario, NetRates};

/// Discounted net profit per MW installed, without incentive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitGains {
    pub g_h: f64,
    pub g_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InstallationPair {
    pub y_h: f64,
    pub y_b: f64,
}

impl InstallationPair {
    pub fn new(y_h: f64, y_b: f64) -> Self {
        Self { y_h, y_b }
    }

    pub fn total(&self) -> f64 {
        self.y_h + self.y_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Household,
    Biogas,
}

impl Member {
    /// This member's fraction of the incentive when the household gets β.
    pub fn share(self, beta: f64) -> f64 {
        match self {
            Member::Household => beta,
            Member::Biogas => 1.0 - beta,
        }
    }
}

/// Payoffs if the community is not formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub d_h: f64,
    pub d_b: f64,
}

pub fn unit_gains(s: &MarketScenario, rates: &NetRates) -> UnitGains {
    let spot_value = s.spot_price.initial_value / rates.spot;
    UnitGains {
        g_h: spot_value - s.household_cost,
        g_b: spot_value - s.gas_price.initial_value / rates.gas - s.biogas_cost,
    }
}

pub fn j0_h(s: &MarketScenario, rates: &NetRates, gains: &UnitGains, y: InstallationPair) -> f64 {
    y.y_h * gains.g_h - purchase_cost(s, rates)
}

pub fn j0_b(s: &MarketScenario, rates: &NetRates, gains: &UnitGains, y: InstallationPair) -> f64 {
    y.y_b * gains.g_b + gas_sales(s, rates)
}

/// x_c d / r_cd: discounted cost of buying the whole demand.
pub fn purchase_cost(s: &MarketScenario, rates: &NetRates) -> f64 {
    s.purchase_price.initial_value * s.demand.initial_value / rates.purchase_demand
}

/// p b K_g / r_p: discounted revenue from selling all the gas.
pub fn gas_sales(s: &MarketScenario, rates: &NetRates) -> f64 {
    s.gas_price.initial_value * s.conversion * s.gas_capacity / rates.gas
}

/// All-or-nothing optimum without incentive; a zero gain installs fully.
pub fn no_incentive_optimum(gains: &UnitGains, s: &MarketScenario) -> InstallationPair {
    InstallationPair {
        y_h: if gains.g_h >= 0.0 { s.household_cap } else { 0.0 },
        y_b: if gains.g_b >= 0.0 { s.biogas_cap } else { 0.0 },
    }
}

pub fn disagreement_points(s: &MarketScenario, rates: &NetRates, gains: &UnitGains) -> Disagreement {
    let y = no_incentive_optimum(gains, s);
    Disagreement {
        d_h: j0_h(s, rates, gains, y),
        d_b: j0_b(s, rates, gains, y),
    }
}

pub fn j_h(
    s: &MarketScenario,
    rates: &NetRates,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    y: InstallationPair,
    beta: f64,
) -> f64 {
    j0_h(s, rates, gains, y) + beta * s.incentive * w_at(s, coeffs, y)
}

pub fn j_b(
    s: &MarketScenario,
    rates: &NetRates,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    y: InstallationPair,
    beta: f64,
) -> f64 {
    j0_b(s, rates, gains, y) + (1.0 - beta) * s.incentive * w_at(s, coeffs, y)
}

/// ∂J_h/∂y_h.
pub fn dj_h(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    y: InstallationPair,
    beta: f64,
) -> Result<f64, IncentiveError> {
    let dw = coeffs.partial_capacity(y.y_h, y.y_b, s.demand.initial_value)?;
    Ok(gains.g_h + beta * s.incentive * dw)
}

/// ∂J_b/∂y_b.
pub fn dj_b(
    s: &MarketScenario,
    gains: &UnitGains,
    coeffs: &IncentiveCoefficients,
    y: InstallationPair,
    beta: f64,
) -> Result<f64, IncentiveError> {
    let dw = coeffs.partial_capacity(y.y_h, y.y_b, s.demand.initial_value)?;
    Ok(gains.g_b + (1.0 - beta) * s.incentive * dw)
}

fn w_at(s: &MarketScenario, coeffs: &IncentiveCoefficients, y: InstallationPair) -> f64 {
    coeffs.value(y.y_h, y.y_b, s.demand.initial_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incentive::coefficients;
    use crate::scenario::compute_net_rates;
    use crate::testing::example1;

    #[test]
    fn example1_gains() {
        let s = example1();
        let rates = compute_net_rates(&s).unwrap();
        let g = unit_gains(&s, &rates);
        assert!((g.g_h / 1.4056e7 - 1.0).abs() < 1e-3, "{}", g.g_h);
        assert!((g.g_b / -6.256e6 - 1.0).abs() < 1e-3, "{}", g.g_b);
        assert_eq!(
            no_incentive_optimum(&g, &s),
            InstallationPair::new(s.household_cap, 0.0)
        );
    }

    #[test]
    fn break_even_cost_gives_zero_gain_and_full_install() {
        let mut s = example1();
        let rates = compute_net_rates(&s).unwrap();
        s.household_cost = s.spot_price.initial_value / rates.spot;
        let g = unit_gains(&s, &rates);
        assert_eq!(g.g_h, 0.0);
        assert_eq!(no_incentive_optimum(&g, &s).y_h, s.household_cap);
    }

    #[test]
    fn no_installation_payoffs() {
        let s = example1();
        let rates = compute_net_rates(&s).unwrap();
        let g = unit_gains(&s, &rates);
        let zero = InstallationPair::default();
        let cost = 65.0 * 0.3 / rates.purchase_demand;
        assert!((j0_h(&s, &rates, &g, zero) + cost).abs() < 1e-9 * cost);
        let sales = 74.7 * 0.01056 * 18.9394 / rates.gas;
        assert!((j0_b(&s, &rates, &g, zero) - sales).abs() < 1e-9 * sales);
    }

    #[test]
    fn members_are_independent_without_incentive() {
        let s = example1();
        let rates = compute_net_rates(&s).unwrap();
        let g = unit_gains(&s, &rates);
        let a = InstallationPair::new(0.1, 0.0);
        let b = InstallationPair::new(0.1, 0.2);
        assert_eq!(j0_h(&s, &rates, &g, a), j0_h(&s, &rates, &g, b));
        let c = InstallationPair::new(0.3, 0.2);
        assert_eq!(j0_b(&s, &rates, &g, b), j0_b(&s, &rates, &g, c));
    }

    #[test]
    fn incentive_split_extremes() {
        let s = example1();
        let rates = compute_net_rates(&s).unwrap();
        let g = unit_gains(&s, &rates);
        let c = coefficients(&s, &rates).unwrap();
        let y = InstallationPair::new(0.32, 0.2);
        assert_eq!(j_b(&s, &rates, &g, &c, y, 1.0), j0_b(&s, &rates, &g, y));
        assert_eq!(j_h(&s, &rates, &g, &c, y, 0.0), j0_h(&s, &rates, &g, y));
        assert_eq!(dj_h(&s, &g, &c, y, 0.0).unwrap(), g.g_h);
        let seam = InstallationPair::new(0.1, 0.2);
        let at_seam = dj_h(&s, &g, &c, seam, 0.3).unwrap();
        let expected = g.g_h + 0.3 * s.incentive * c.b1 * (1.0 - c.m2);
        assert!((at_seam - expected).abs() < 1e-9 * expected.abs());
    }
}
