//! Model parameters, validation of the integrability conditions and net
//! discount rates.
//!
//! Time is measured in hours everywhere: drifts are 1/h, volatilities
//! 1/√h and the discount rate 1/h.

mod file;

pub use file::{BargainingSection, DriftSpec, ScenarioFile};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hours in a (non-leap) year, used to convert annual rates.
pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("net discount rates must be strictly positive: {}", fmt_violations(.violations))]
    AssumptionViolation { violations: Vec<(NetRateKind, f64)> },
    #[error("initial demand {demand} MW must be below total capacity {capacity} MW")]
    DemandExceedsCapacity { demand: f64, capacity: f64 },
    #[error("biogas cap {cap} MW exceeds gas-derived power {available} MW")]
    TurbineExceedsGas { cap: f64, available: f64 },
    #[error("scenario file: {0}")]
    Parse(String),
}

fn fmt_violations(v: &[(NetRateKind, f64)]) -> String {
    v.iter()
        .map(|(k, x)| format!("{k} = {x:e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Names of the five net rates, used in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetRateKind {
    Spot,
    Gas,
    Purchase,
    Demand,
    PurchaseDemand,
}

impl std::fmt::Display for NetRateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NetRateKind::Spot => "r_v",
            NetRateKind::Gas => "r_p",
            NetRateKind::Purchase => "r_c",
            NetRateKind::Demand => "r_d",
            NetRateKind::PurchaseDemand => "r_cd",
        })
    }
}

/// Parameters of X(s) = x·exp(drift·s + volatility·W(s)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmSpec {
    pub initial_value: f64,
    pub drift: f64,
    pub volatility: f64,
}

impl GbmSpec {
    pub fn new(initial_value: f64, drift: f64, volatility: f64) -> Self {
        Self {
            initial_value,
            drift,
            volatility,
        }
    }

    /// Same process with the drift replaced by −σ²/2, which makes the level
    /// a martingale.
    pub fn martingale_adjust(&self) -> Self {
        Self {
            drift: -0.5 * self.volatility * self.volatility,
            ..*self
        }
    }

    /// r − μ − σ²/2: the rate at which E[e^{−rs}X(s)] decays.
    pub fn net_rate(&self, discount_rate: f64) -> f64 {
        // Grouped so that a martingale drift cancels exactly.
        discount_rate - (self.drift + 0.5 * self.volatility * self.volatility)
    }

    fn check(&self, name: &str) -> Result<(), ScenarioError> {
        positive(&format!("{name}.initial_value"), self.initial_value)?;
        positive(&format!("{name}.volatility"), self.volatility)?;
        finite(&format!("{name}.drift"), self.drift)
    }
}

/// All exogenous constants of the two-member community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketScenario {
    /// Spot sale price of electricity X_v, €/MWh.
    pub spot_price: GbmSpec,
    /// Purchase price of electricity X_c, €/MWh.
    pub purchase_price: GbmSpec,
    /// Gas spot price P, €/MWh.
    pub gas_price: GbmSpec,
    /// Household power demand D, MW.
    pub demand: GbmSpec,
    /// Correlation between the demand and purchase-price Brownian motions.
    pub rho_c: f64,
    /// Discount rate r, 1/h.
    pub discount_rate: f64,
    /// Intensity λ of the exponential incentive expiry time, 1/h.
    pub expiry_intensity: f64,
    /// Self-consumption incentive Z, €/MWh.
    pub incentive: f64,
    /// PV installation cost c_h, €/MW.
    pub household_cost: f64,
    /// Turbine installation cost c_b, €/MW.
    pub biogas_cost: f64,
    /// Maximum PV installation θ_h, MW.
    pub household_cap: f64,
    /// Maximum turbine installation θ_b, MW.
    pub biogas_cap: f64,
    /// Gas production capacity K_g, m³.
    pub gas_capacity: f64,
    /// Conversion factor b, MW/m³.
    pub conversion: f64,
}

impl MarketScenario {
    /// r + λ, the effective discount of the incentive stream.
    pub fn killing_rate(&self) -> f64 {
        self.discount_rate + self.expiry_intensity
    }

    /// Field-level checks plus the structural invariants (demand below total
    /// capacity, turbine within gas-derived power). Does not look at the net
    /// rates; see [`compute_net_rates`].
    pub fn validate_fields(&self) -> Result<(), ScenarioError> {
        self.spot_price.check("spot_price")?;
        self.purchase_price.check("purchase_price")?;
        self.gas_price.check("gas_price")?;
        self.demand.check("demand")?;
        finite("rho_c", self.rho_c)?;
        if !(-1.0..=1.0).contains(&self.rho_c) {
            return Err(ScenarioError::InvalidField {
                field: "rho_c".into(),
                reason: format!("correlation {} outside [-1, 1]", self.rho_c),
            });
        }
        positive("discount_rate", self.discount_rate)?;
        positive("expiry_intensity", self.expiry_intensity)?;
        positive("incentive", self.incentive)?;
        positive("household.cost", self.household_cost)?;
        positive("biogas.cost", self.biogas_cost)?;
        positive("household.cap", self.household_cap)?;
        positive("biogas.cap", self.biogas_cap)?;
        positive("biogas.gas_capacity", self.gas_capacity)?;
        positive("biogas.conversion", self.conversion)?;

        let capacity = self.household_cap + self.biogas_cap;
        if self.demand.initial_value >= capacity {
            return Err(ScenarioError::DemandExceedsCapacity {
                demand: self.demand.initial_value,
                capacity,
            });
        }
        let available = self.conversion * self.gas_capacity;
        if self.biogas_cap > available {
            return Err(ScenarioError::TurbineExceedsGas {
                cap: self.biogas_cap,
                available,
            });
        }
        Ok(())
    }

    /// Replaces all four drifts by their martingale values.
    pub fn martingale(&self) -> Self {
        Self {
            spot_price: self.spot_price.martingale_adjust(),
            purchase_price: self.purchase_price.martingale_adjust(),
            gas_price: self.gas_price.martingale_adjust(),
            demand: self.demand.martingale_adjust(),
            ..self.clone()
        }
    }
}

fn finite(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::InvalidField {
            field: field.into(),
            reason: format!("must be finite, got {v}"),
        })
    }
}

fn positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::InvalidField {
            field: field.into(),
            reason: format!("must be strictly positive, got {v}"),
        })
    }
}

/// Discount rates net of the expected growth of each process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetRates {
    pub spot: f64,
    pub gas: f64,
    pub purchase: f64,
    pub demand: f64,
    /// r_c + r_d − r − ρ_c σ_c σ_d, the rate of the purchase cost X_c·D.
    pub purchase_demand: f64,
}

/// Net rates of a scenario. Fails with every non-positive rate listed, since
/// none of the closed forms hold in that case.
pub fn compute_net_rates(s: &MarketScenario) -> Result<NetRates, ScenarioError> {
    let rates = raw_net_rates(s);
    let violations: Vec<_> = [
        (NetRateKind::Spot, rates.spot),
        (NetRateKind::Gas, rates.gas),
        (NetRateKind::Purchase, rates.purchase),
        (NetRateKind::Demand, rates.demand),
        (NetRateKind::PurchaseDemand, rates.purchase_demand),
    ]
    .into_iter()
    .filter(|(_, v)| !(*v > 0.0))
    .collect();
    if violations.is_empty() {
        Ok(rates)
    } else {
        Err(ScenarioError::AssumptionViolation { violations })
    }
}

/// The net-rate formulas without the positivity check.
pub fn raw_net_rates(s: &MarketScenario) -> NetRates {
    let r = s.discount_rate;
    let spot = s.spot_price.net_rate(r);
    let gas = s.gas_price.net_rate(r);
    let purchase = s.purchase_price.net_rate(r);
    let demand = s.demand.net_rate(r);
    let purchase_demand =
        purchase + demand - r - s.rho_c * s.purchase_price.volatility * s.demand.volatility;
    NetRates {
        spot,
        gas,
        purchase,
        demand,
        purchase_demand,
    }
}

/// A scenario that passed field validation and whose net rates are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    market: MarketScenario,
    rates: NetRates,
}

impl Scenario {
    pub fn new(market: MarketScenario) -> Result<Self, ScenarioError> {
        market.validate_fields()?;
        let rates = compute_net_rates(&market)?;
        Ok(Self { market, rates })
    }

    pub fn market(&self) -> &MarketScenario {
        &self.market
    }

    pub fn rates(&self) -> &NetRates {
        &self.rates
    }
}

impl std::ops::Deref for Scenario {
    type Target = MarketScenario;

    fn deref(&self) -> &MarketScenario {
        &self.market
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::example1;

    #[test]
    fn martingale_drifts_match_reference_values() {
        let v = GbmSpec::new(56.7, 0.0, 0.09281802).martingale_adjust();
        assert!((v.drift - -0.004307592).abs() < 1e-9);
        let d = GbmSpec::new(0.3, 0.0, 0.03812835).martingale_adjust();
        assert!((d.drift - -7.268855e-4).abs() < 1e-10);
        let flat = GbmSpec::new(1.0, 0.3, 0.0).martingale_adjust();
        assert_eq!(flat.drift, 0.0);
        assert_eq!(flat.volatility, 0.0);
        assert_eq!(flat.initial_value, 1.0);
    }

    #[test]
    fn martingale_rates_collapse_to_discount_rate() {
        let mut s = example1().martingale();
        s.rho_c = 0.0;
        let rates = compute_net_rates(&s).unwrap();
        let r = s.discount_rate;
        for v in [rates.spot, rates.gas, rates.purchase, rates.demand, rates.purchase_demand] {
            assert!((v - r).abs() <= 1e-12 * r, "{v} vs {r}");
        }
    }

    #[test]
    fn example1_spot_rate() {
        let rates = compute_net_rates(&example1()).unwrap();
        assert!((rates.spot - 3.4247e-6).abs() < 1e-12);
        let s = example1();
        let expected = rates.purchase + rates.demand
            - s.discount_rate
            - s.rho_c * s.purchase_price.volatility * s.demand.volatility;
        assert!((rates.purchase_demand - expected).abs() < 1e-15);
    }

    #[test]
    fn estimated_gas_drift_violates_integrability() {
        let mut s = example1();
        s.gas_price.drift = 0.01539092;
        match compute_net_rates(&s) {
            Err(ScenarioError::AssumptionViolation { violations }) => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].0, NetRateKind::Gas);
                assert!(violations[0].1 < 0.0);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn all_violations_are_reported() {
        let mut s = example1();
        s.gas_price.drift = 0.1;
        s.spot_price.drift = 0.1;
        let err = compute_net_rates(&s).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("r_v") && msg.contains("r_p"), "{msg}");
    }

    #[test]
    fn demand_at_capacity_is_rejected() {
        let mut s = example1();
        s.demand.initial_value = s.household_cap + s.biogas_cap;
        assert!(matches!(
            Scenario::new(s),
            Err(ScenarioError::DemandExceedsCapacity { .. })
        ));
    }

    #[test]
    fn turbine_cap_bounded_by_gas() {
        let mut s = example1();
        s.biogas_cap = 0.25;
        s.demand.initial_value = 0.1;
        assert!(matches!(
            Scenario::new(s),
            Err(ScenarioError::TurbineExceedsGas { .. })
        ));
    }

    #[test]
    fn non_positive_fields_are_named() {
        let mut s = example1();
        s.household_cost = 0.0;
        let err = Scenario::new(s).unwrap_err();
        assert!(err.to_string().contains("household.cost"));
    }
}
