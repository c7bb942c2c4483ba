//! Expected discounted self-consumption w(y_h, y_b, d).
//!
//! With τ ~ Exp(λ) independent of the demand, the incentive horizon can be
//! replaced by killing at rate λ, so w solves
//!
//! ```text
//! (r+λ) w − (μ_d + σ_d²/2) d w′ − (σ_d²/2) d² w″ = min(d, y)
//! ```
//!
//! on d > 0 with y = y_h + y_b. Requiring w(0) = 0, boundedness as d → ∞ and
//! C¹ pasting at d = y gives
//!
//! ```text
//! w = B₁ y^{1−m₂} d^{m₂} + d/(r_d+λ)      d < y
//! w = C₁ y^{1−m₁} d^{m₁} + y/(r+λ)        d ≥ y
//! ```
//!
//! where m₁ < 0 < 1 < m₂ are the roots of (σ²/2)m² + μ m − (r+λ) = 0.
//! Every quantity depends on the installations only through their sum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{MarketScenario, NetRates};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IncentiveError {
    #[error("net demand rate r_d = {0:e} must be strictly positive")]
    RateViolation(f64),
    #[error("marginal incentive value is undefined at zero aggregate capacity")]
    DegenerateAggregate,
}

/// Roots and pasting constants of the closed form, together with the rates
/// needed to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncentiveCoefficients {
    pub m1: f64,
    pub m2: f64,
    pub b1: f64,
    pub c1: f64,
    /// r + λ.
    pub killing_rate: f64,
    /// r_d + λ.
    pub demand_rate: f64,
    pub demand_drift: f64,
    pub demand_volatility: f64,
}

/// Coefficients for a scenario whose net demand rate is known.
pub fn coefficients(
    s: &MarketScenario,
    rates: &NetRates,
) -> Result<IncentiveCoefficients, IncentiveError> {
    if !(rates.demand > 0.0) {
        return Err(IncentiveError::RateViolation(rates.demand));
    }
    IncentiveCoefficients::new(
        s.demand.drift,
        s.demand.volatility,
        s.discount_rate,
        s.expiry_intensity,
    )
}

impl IncentiveCoefficients {
    pub fn new(
        drift: f64,
        volatility: f64,
        discount_rate: f64,
        expiry_intensity: f64,
    ) -> Result<Self, IncentiveError> {
        let var = volatility * volatility;
        let net_demand = discount_rate - (drift + 0.5 * var);
        if !(net_demand > 0.0) {
            return Err(IncentiveError::RateViolation(net_demand));
        }
        let killing = discount_rate + expiry_intensity;
        let demand_rate = net_demand + expiry_intensity;

        let disc = (drift * drift + 2.0 * killing * var).sqrt();
        // m1 = (−μ − √Δ)/σ² loses precision when √Δ ≈ |μ| with μ < 0, so take
        // whichever root is computed without cancellation and recover the
        // other from the product m1·m2 = −2(r+λ)/σ².
        let product = -2.0 * killing / var;
        let (m1, m2) = if drift <= 0.0 {
            let m2 = (-drift + disc) / var;
            (product / m2, m2)
        } else {
            let m1 = (-drift - disc) / var;
            (m1, product / m1)
        };

        let denom = killing * demand_rate * (m2 - m1);
        let b1 = (m1 * drift + 0.5 * m1 * var - killing) / denom;
        let c1 = (m2 * drift + 0.5 * m2 * var - killing) / denom;
        Ok(Self {
            m1,
            m2,
            b1,
            c1,
            killing_rate: killing,
            demand_rate,
            demand_drift: drift,
            demand_volatility: volatility,
        })
    }

    /// w(y_h, y_b, d) in MWh (discounted); multiply by Z for euros.
    pub fn value(&self, y_h: f64, y_b: f64, d: f64) -> f64 {
        let y = y_h + y_b;
        if y <= 0.0 || d <= 0.0 {
            return 0.0;
        }
        if d < y {
            self.b1 * y * pow_ratio(d, y, self.m2) + d / self.demand_rate
        } else {
            self.c1 * y * pow_ratio(d, y, self.m1) + y / self.killing_rate
        }
    }

    /// ∂w/∂y_h = ∂w/∂y_b.
    pub fn partial_capacity(&self, y_h: f64, y_b: f64, d: f64) -> Result<f64, IncentiveError> {
        let y = y_h + y_b;
        if !(y > 0.0) {
            return Err(IncentiveError::DegenerateAggregate);
        }
        if d <= 0.0 {
            return Ok(0.0);
        }
        Ok(if d < y {
            self.b1 * (1.0 - self.m2) * pow_ratio(d, y, self.m2)
        } else {
            self.c1 * (1.0 - self.m1) * pow_ratio(d, y, self.m1) + 1.0 / self.killing_rate
        })
    }

    /// Limit of the marginal value as the aggregate capacity goes to zero:
    /// the d ≥ y branch with (d/y)^{m₁} → 0, i.e. 1/(r+λ).
    pub fn marginal_at_zero_capacity(&self) -> f64 {
        1.0 / self.killing_rate
    }

    /// Marginal value exactly at the seam y = d, B₁(1−m₂).
    pub fn seam_marginal(&self) -> f64 {
        self.b1 * (1.0 - self.m2)
    }

    /// ∂w/∂d.
    pub fn demand_derivative(&self, y_h: f64, y_b: f64, d: f64) -> f64 {
        let y = y_h + y_b;
        if y <= 0.0 {
            return 0.0;
        }
        if d < y {
            self.b1 * self.m2 * pow_ratio(d, y, self.m2 - 1.0) + 1.0 / self.demand_rate
        } else {
            self.c1 * self.m1 * pow_ratio(d, y, self.m1 - 1.0)
        }
    }

    /// ∂²w/∂d².
    pub fn demand_second_derivative(&self, y_h: f64, y_b: f64, d: f64) -> f64 {
        let y = y_h + y_b;
        if y <= 0.0 {
            return 0.0;
        }
        let (c, m) = if d < y {
            (self.b1, self.m2)
        } else {
            (self.c1, self.m1)
        };
        c * m * (m - 1.0) * pow_ratio(d, y, m - 2.0) / y
    }

    /// Residual of the generator equation at (y, d), using the analytic
    /// derivatives.
    pub fn ode_residual(&self, y_h: f64, y_b: f64, d: f64) -> f64 {
        let half_var = 0.5 * self.demand_volatility * self.demand_volatility;
        self.killing_rate * self.value(y_h, y_b, d)
            - (self.demand_drift + half_var) * d * self.demand_derivative(y_h, y_b, d)
            - half_var * d * d * self.demand_second_derivative(y_h, y_b, d)
            - d.min(y_h + y_b)
    }

    /// Supremum of w over the demand, y/(r+λ).
    pub fn upper_bound(&self, y_h: f64, y_b: f64) -> f64 {
        (y_h + y_b).max(0.0) / self.killing_rate
    }
}

/// (d/y)^m on strictly positive arguments.
fn pow_ratio(d: f64, y: f64, m: f64) -> f64 {
    (m * (d / y).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::compute_net_rates;
    use crate::testing::example1;

    fn ex1() -> IncentiveCoefficients {
        let s = example1();
        coefficients(&s, &compute_net_rates(&s).unwrap()).unwrap()
    }

    #[test]
    fn zero_drift_gives_symmetric_roots() {
        let c = IncentiveCoefficients::new(0.0, 0.02, 1e-3, 2e-3).unwrap();
        let expected = (2.0f64 * 3e-3).sqrt() / 0.02;
        assert!((c.m2 - expected).abs() < 1e-12 * expected);
        assert!((c.m1 + expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn example1_coefficients() {
        let c = ex1();
        assert!((c.m2 - 1.0181).abs() < 1e-4, "m2 = {}", c.m2);
        assert!((c.m1 + 0.01814).abs() < 1e-4, "m1 = {}", c.m1);
        assert!((c.b1 + 7.19e4).abs() < 0.01e4, "B1 = {}", c.b1);
        assert!(c.c1 < 0.0);
        let lhs = c.b1 * (1.0 - c.m2);
        let rhs = c.c1 * (1.0 - c.m1) + 1.0 / c.killing_rate;
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs());
    }

    #[test]
    fn no_capacity_no_value() {
        let c = ex1();
        assert_eq!(c.value(0.0, 0.0, 0.3), 0.0);
        assert_eq!(c.value(0.2, 0.1, 0.0), 0.0);
        assert_eq!(
            c.partial_capacity(0.0, 0.0, 0.3),
            Err(IncentiveError::DegenerateAggregate)
        );
        let tiny = c.partial_capacity(1e-300, 0.0, 0.3).unwrap();
        assert!((tiny - c.marginal_at_zero_capacity()).abs() < 1e-3 * tiny);
    }

    #[test]
    fn large_demand_saturates() {
        let c = ex1();
        let bound = c.upper_bound(0.32, 0.2);
        let far = c.value(0.32, 0.2, 1e300);
        assert!((far - bound).abs() < 1e-3 * bound, "{far} vs {bound}");
        assert!(far <= bound);
    }

    #[test]
    fn seam_derivative_matches_both_branches() {
        let c = ex1();
        let d = 0.3;
        let above = c.partial_capacity(d * (1.0 + 1e-13), 0.0, d).unwrap();
        let at = c.partial_capacity(d, 0.0, d).unwrap();
        assert!((above - c.seam_marginal()).abs() < 1e-10 * at.abs());
        assert!((at - c.seam_marginal()).abs() < 1e-10 * at.abs());
    }

    #[test]
    fn negative_net_demand_rate_is_rejected() {
        assert!(matches!(
            IncentiveCoefficients::new(0.01, 0.05, 1e-3, 1e-3),
            Err(IncentiveError::RateViolation(_))
        ));
    }

    #[test]
    fn capacity_partial_decays() {
        let c = ex1();
        let a = c.partial_capacity(10.0, 0.0, 0.3).unwrap();
        let b = c.partial_capacity(1e4, 0.0, 0.3).unwrap();
        assert!(a > b && b > 0.0);
    }
}
