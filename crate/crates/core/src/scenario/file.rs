//! TOML scenario files.
//!
//! ```toml
//! discount_rate = 3.4247e-6     # r, 1/h (or discount_rate_annual, converted /8760)
//! expiry_intensity = 1e-5       # λ, 1/h
//! incentive = 110.0             # Z, €/MWh
//!
//! [household]
//! cost = 2.5e6                  # c_h, €/MW
//! cap = 0.32                    # θ_h, MW
//!
//! [biogas]
//! cost = 1.0e6                  # c_b, €/MW
//! cap = 0.2                     # θ_b, MW
//! gas_capacity = 18.9394        # K_g, m³
//! conversion = 0.01056          # b, MW/m³
//!
//! [spot_price]                  # X_v, €/MWh
//! initial_value = 56.7
//! drift = "martingale"          # or a number, 1/h
//! volatility = 0.09281802       # 1/√h
//! ```
//!
//! plus `[purchase_price]`, `[gas_price]`, `[demand]` sections of the same
//! shape, an optional `[correlations]` section and an optional
//! `[bargaining]` section. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GbmSpec, MarketScenario, ScenarioError, HOURS_PER_YEAR};
use crate::bargaining::{BargainingConfig, CommunityRule};

/// Drift given either numerically (1/h) or as the keyword `"martingale"`,
/// which resolves to −σ²/2 at load time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Value(f64),
    Keyword(DriftKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKeyword {
    Martingale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub initial_value: f64,
    pub drift: DriftSpec,
    pub volatility: f64,
}

impl ProcessSection {
    fn resolve(&self) -> GbmSpec {
        let spec = GbmSpec::new(self.initial_value, 0.0, self.volatility);
        match self.drift {
            DriftSpec::Value(mu) => GbmSpec { drift: mu, ..spec },
            DriftSpec::Keyword(DriftKeyword::Martingale) => spec.martingale_adjust(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseholdSection {
    pub cost: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiogasSection {
    pub cost: f64,
    pub cap: f64,
    pub gas_capacity: f64,
    pub conversion: f64,
}

/// Only `demand_purchase` (ρ_c) enters the model; the other pairs are
/// accepted for completeness and ignored with a warning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    #[serde(default)]
    pub demand_purchase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_gas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_purchase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_demand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_purchase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_demand: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BargainingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community_rule: Option<CommunityRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuum_split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount_rate_annual: Option<f64>,
    pub expiry_intensity: f64,
    pub incentive: f64,
    pub household: HouseholdSection,
    pub biogas: BiogasSection,
    pub spot_price: ProcessSection,
    pub purchase_price: ProcessSection,
    pub gas_price: ProcessSection,
    pub demand: ProcessSection,
    #[serde(default)]
    pub correlations: CorrelationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bargaining: Option<BargainingSection>,
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario file is always serializable")
    }

    /// Discount rate in 1/h, converting an annual rate if that is what the
    /// file provides.
    pub fn hourly_discount_rate(&self) -> Result<f64, ScenarioError> {
        match (self.discount_rate, self.discount_rate_annual) {
            (Some(r), None) => Ok(r),
            (None, Some(annual)) => Ok(annual / HOURS_PER_YEAR),
            (Some(_), Some(_)) => Err(ScenarioError::Parse(
                "give either `discount_rate` or `discount_rate_annual`, not both".into(),
            )),
            (None, None) => Err(ScenarioError::Parse(
                "missing `discount_rate` (1/h) or `discount_rate_annual`".into(),
            )),
        }
    }

    /// Builds the market scenario. Field validation is left to
    /// [`super::Scenario::new`].
    pub fn to_market(&self) -> Result<MarketScenario, ScenarioError> {
        let c = &self.correlations;
        for (name, v) in [
            ("spot_gas", c.spot_gas),
            ("spot_purchase", c.spot_purchase),
            ("spot_demand", c.spot_demand),
            ("gas_purchase", c.gas_purchase),
            ("gas_demand", c.gas_demand),
        ] {
            if let Some(v) = v {
                log::warn!("correlation `{name}` = {v} does not enter the model and is ignored");
            }
        }
        Ok(MarketScenario {
            spot_price: self.spot_price.resolve(),
            purchase_price: self.purchase_price.resolve(),
            gas_price: self.gas_price.resolve(),
            demand: self.demand.resolve(),
            rho_c: c.demand_purchase,
            discount_rate: self.hourly_discount_rate()?,
            expiry_intensity: self.expiry_intensity,
            incentive: self.incentive,
            household_cost: self.household.cost,
            biogas_cost: self.biogas.cost,
            household_cap: self.household.cap,
            biogas_cap: self.biogas.cap,
            gas_capacity: self.biogas.gas_capacity,
            conversion: self.biogas.conversion,
        })
    }

    pub fn bargaining_config(&self) -> Result<BargainingConfig, ScenarioError> {
        let mut cfg = BargainingConfig::default();
        if let Some(section) = &self.bargaining {
            if let Some(rule) = section.community_rule {
                cfg.community_rule = rule;
            }
            if let Some(alpha) = section.continuum_split {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(ScenarioError::InvalidField {
                        field: "bargaining.continuum_split".into(),
                        reason: format!("must lie in [0, 1], got {alpha}"),
                    });
                }
                cfg.continuum_split = alpha;
            }
            if let Some(n) = section.grid_points {
                if n < 3 {
                    return Err(ScenarioError::InvalidField {
                        field: "bargaining.grid_points".into(),
                        reason: format!("need at least 3 points, got {n}"),
                    });
                }
                cfg.grid_points = n;
            }
        }
        Ok(cfg)
    }

    /// Parameter paths accepted by [`Self::set_parameter`].
    pub const PARAMETERS: &'static [&'static str] = &[
        "discount_rate",
        "expiry_intensity",
        "incentive",
        "household.cost",
        "household.cap",
        "biogas.cost",
        "biogas.cap",
        "biogas.gas_capacity",
        "biogas.conversion",
        "correlations.demand_purchase",
        "spot_price.initial_value",
        "spot_price.drift",
        "spot_price.volatility",
        "purchase_price.initial_value",
        "purchase_price.drift",
        "purchase_price.volatility",
        "gas_price.initial_value",
        "gas_price.drift",
        "gas_price.volatility",
        "demand.initial_value",
        "demand.drift",
        "demand.volatility",
    ];

    /// Overwrites one numeric parameter addressed by a dotted path such as
    /// `gas_price.initial_value`. A `"martingale"` drift stays tied to the
    /// volatility, so sweeping a volatility re-derives it.
    pub fn set_parameter(&mut self, path: &str, value: f64) -> Result<(), ScenarioError> {
        let slot: &mut f64 = match path {
            "discount_rate" => {
                self.discount_rate_annual = None;
                self.discount_rate.insert(value)
            }
            "expiry_intensity" => &mut self.expiry_intensity,
            "incentive" => &mut self.incentive,
            "household.cost" => &mut self.household.cost,
            "household.cap" => &mut self.household.cap,
            "biogas.cost" => &mut self.biogas.cost,
            "biogas.cap" => &mut self.biogas.cap,
            "biogas.gas_capacity" => &mut self.biogas.gas_capacity,
            "biogas.conversion" => &mut self.biogas.conversion,
            "correlations.demand_purchase" => &mut self.correlations.demand_purchase,
            _ => {
                let (process, field) = path.split_once('.').ok_or_else(|| unknown(path))?;
                let section = match process {
                    "spot_price" => &mut self.spot_price,
                    "purchase_price" => &mut self.purchase_price,
                    "gas_price" => &mut self.gas_price,
                    "demand" => &mut self.demand,
                    _ => return Err(unknown(path)),
                };
                match field {
                    "initial_value" => &mut section.initial_value,
                    "volatility" => &mut section.volatility,
                    "drift" => {
                        section.drift = DriftSpec::Value(value);
                        return Ok(());
                    }
                    _ => return Err(unknown(path)),
                }
            }
        };
        *slot = value;
        Ok(())
    }
}

fn unknown(path: &str) -> ScenarioError {
    ScenarioError::InvalidField {
        field: path.into(),
        reason: format!(
            "unknown parameter; expected one of {}",
            ScenarioFile::PARAMETERS.join(", ")
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
discount_rate_annual = 0.03
expiry_intensity = 1e-5
incentive = 110.0

[household]
cost = 2.5e6
cap = 0.32

[biogas]
cost = 1.0e6
cap = 0.2
gas_capacity = 18.9394
conversion = 0.01056

[spot_price]
initial_value = 56.7
drift = "martingale"
volatility = 0.09281802

[purchase_price]
initial_value = 65.0
drift = -2.14e-6
volatility = 0.00128

[gas_price]
initial_value = 74.7
drift = "martingale"
volatility = 0.8371437

[demand]
initial_value = 0.3
drift = "martingale"
volatility = 0.03812835

[correlations]
demand_purchase = 0.01
spot_gas = 0.4
"#;

    #[test]
    fn parses_and_resolves() {
        let file = ScenarioFile::from_toml_str(MINIMAL).unwrap();
        let m = file.to_market().unwrap();
        assert!((m.discount_rate - 0.03 / 8760.0).abs() < 1e-18);
        assert!((m.spot_price.drift + 0.5 * 0.09281802f64.powi(2)).abs() < 1e-18);
        assert_eq!(m.purchase_price.drift, -2.14e-6);
        assert_eq!(m.rho_c, 0.01);
        super::super::Scenario::new(m).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("cap = 0.32", "cap = 0.32\ncapp = 1.0");
        let err = ScenarioFile::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("capp"), "{err}");
        let bad = MINIMAL.replace("drift = \"martingale\"", "drift = \"flat\"");
        assert!(ScenarioFile::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rate_given_twice_is_an_error() {
        let text = format!("discount_rate = 1e-6\n{MINIMAL}");
        let file = ScenarioFile::from_toml_str(&text).unwrap();
        assert!(file.to_market().is_err());
    }

    #[test]
    fn toml_round_trip_is_bit_exact() {
        let mut file = ScenarioFile::from_toml_str(MINIMAL).unwrap();
        file.demand.volatility = 0.03812835;
        file.set_parameter("gas_price.drift", -0.350404787224845).unwrap();
        file.set_parameter("household.cost", 1.0 / 3.0).unwrap();
        let back = ScenarioFile::from_toml_str(&file.to_toml_string()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.demand.volatility.to_bits(), 0.03812835f64.to_bits());
        assert_eq!(back.household.cost.to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn set_parameter_paths() {
        let mut file = ScenarioFile::from_toml_str(MINIMAL).unwrap();
        file.set_parameter("gas_price.initial_value", 53.45).unwrap();
        file.set_parameter("discount_rate", 1e-6).unwrap();
        file.set_parameter("demand.volatility", 0.05).unwrap();
        let m = file.to_market().unwrap();
        assert_eq!(m.gas_price.initial_value, 53.45);
        assert_eq!(m.discount_rate, 1e-6);
        assert!((m.demand.drift + 0.00125).abs() < 1e-18);
        assert!(file.set_parameter("gas_price.colour", 1.0).is_err());
        assert!(file.set_parameter("nonsense", 1.0).is_err());
    }
}
