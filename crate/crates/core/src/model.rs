//! A validated scenario together with everything derived from it once:
//! unit gains, incentive coefficients, thresholds and disagreement points.

use crate::game::{self, EquilibriumOutcome, Target, Thresholds};
use crate::incentive::{self, IncentiveCoefficients, IncentiveError};
use crate::payoffs::{self, Disagreement, InstallationPair, Member, UnitGains};
use crate::scenario::{MarketScenario, NetRates, Scenario};
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityModel {
    scenario: Scenario,
    pub gains: UnitGains,
    pub coeffs: IncentiveCoefficients,
    pub thresholds: Thresholds,
    pub disagreement: Disagreement,
}

impl CommunityModel {
    pub fn new(market: MarketScenario) -> Result<Self, Error> {
        Self::from_scenario(Scenario::new(market)?)
    }

    pub fn from_scenario(scenario: Scenario) -> Result<Self, Error> {
        let rates = *scenario.rates();
        let gains = payoffs::unit_gains(&scenario, &rates);
        let coeffs = incentive::coefficients(&scenario, &rates)?;
        let thresholds = Thresholds::new(&gains, &coeffs, &scenario);
        let disagreement = payoffs::disagreement_points(&scenario, &rates, &gains);
        Ok(Self {
            scenario,
            gains,
            coeffs,
            thresholds,
            disagreement,
        })
    }

    /// Same model with the incentive constants replaced, e.g. to check that a
    /// validation run detects wrong coefficients.
    pub fn with_coefficients(&self, coeffs: IncentiveCoefficients) -> Self {
        let thresholds = Thresholds::new(&self.gains, &coeffs, &self.scenario);
        Self {
            coeffs,
            thresholds,
            ..self.clone()
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn market(&self) -> &MarketScenario {
        self.scenario.market()
    }

    pub fn rates(&self) -> &NetRates {
        self.scenario.rates()
    }

    /// w at the scenario's initial demand.
    pub fn w(&self, y: InstallationPair) -> f64 {
        self.coeffs.value(y.y_h, y.y_b, self.scenario.demand.initial_value)
    }

    pub fn j_h(&self, y: InstallationPair, beta: f64) -> f64 {
        payoffs::j_h(self.market(), self.rates(), &self.gains, &self.coeffs, y, beta)
    }

    pub fn j_b(&self, y: InstallationPair, beta: f64) -> f64 {
        payoffs::j_b(self.market(), self.rates(), &self.gains, &self.coeffs, y, beta)
    }

    pub fn payoff(&self, member: Member, y: InstallationPair, beta: f64) -> f64 {
        match member {
            Member::Household => self.j_h(y, beta),
            Member::Biogas => self.j_b(y, beta),
        }
    }

    pub fn dj_h(&self, y: InstallationPair, beta: f64) -> Result<f64, IncentiveError> {
        payoffs::dj_h(self.market(), &self.gains, &self.coeffs, y, beta)
    }

    pub fn dj_b(&self, y: InstallationPair, beta: f64) -> Result<f64, IncentiveError> {
        payoffs::dj_b(self.market(), &self.gains, &self.coeffs, y, beta)
    }

    pub fn target(&self, member: Member, beta: f64) -> Target {
        game::target(self.market(), &self.gains, &self.coeffs, member, beta)
    }

    pub fn best_response(&self, member: Member, other: f64, beta: f64) -> f64 {
        let cap = match member {
            Member::Household => self.scenario.household_cap,
            Member::Biogas => self.scenario.biogas_cap,
        };
        self.target(member, beta).respond(other, cap)
    }

    pub fn equilibrium(&self, beta: f64, split: f64) -> Result<EquilibriumOutcome, game::GameError> {
        game::nash_equilibrium_with_split(
            self.market(),
            &self.gains,
            &self.coeffs,
            &self.thresholds,
            beta,
            split,
        )
    }
}
