//! Reference scenarios and random scenario generation shared by the unit,
//! integration and acceptance tests.

use rand::Rng;

use crate::scenario::{GbmSpec, MarketScenario};

/// Full-precision martingale drifts of the base example.
pub const SPOT_DRIFT: f64 = -0.004307592418360;
pub const GAS_DRIFT: f64 = -0.350404787224845;
pub const DEMAND_DRIFT: f64 = -7.268855368612499e-4;

/// The base example: martingale spot, gas and demand, purchase price with
/// its estimated drift. The turbine cost is 1.0e6 €/MW, the value that
/// reproduces the reference results (the constants listing gives 9·10⁵).
pub fn example1() -> MarketScenario {
    MarketScenario {
        spot_price: GbmSpec::new(56.7, SPOT_DRIFT, 0.09281802),
        purchase_price: GbmSpec::new(65.0, -2.14e-6, 0.00128),
        gas_price: GbmSpec::new(74.7, GAS_DRIFT, 0.8371437),
        demand: GbmSpec::new(0.3, DEMAND_DRIFT, 0.03812835),
        rho_c: 0.01,
        discount_rate: 3.4247e-6,
        expiry_intensity: 1e-5,
        incentive: 110.0,
        household_cost: 2.5e6,
        biogas_cost: 1.0e6,
        household_cap: 0.32,
        biogas_cap: 0.2,
        gas_capacity: 18.9394,
        conversion: 0.01056,
    }
}

/// The second example: higher prices and different volatilities, with the
/// drifts kept at the base example's values.
pub fn example2() -> MarketScenario {
    MarketScenario {
        spot_price: GbmSpec::new(80.0, SPOT_DRIFT, 0.0928),
        purchase_price: GbmSpec::new(85.0, -2.14e-6, 0.0008),
        gas_price: GbmSpec::new(68.0, GAS_DRIFT, 0.75),
        demand: GbmSpec::new(0.3, DEMAND_DRIFT, 0.0019),
        household_cost: 1.9e6,
        biogas_cost: 1.1e6,
        household_cap: 0.4737,
        ..example1()
    }
}

/// A valid random scenario in which every equilibrium regime is reachable.
///
/// The unit gains are drawn on the scale of the incentive value Z/(r+λ)
/// and the costs are backed out from them, so negative, marginal and
/// positive gains all occur with sizeable probability.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R) -> MarketScenario {
    let r = log_uniform(rng, 1e-6, 1e-5);
    let lambda = log_uniform(rng, 1e-5, 1e-3);
    let incentive = rng.random_range(20.0..200.0);
    let scale = incentive / (r + lambda);

    let demand_vol = log_uniform(rng, 2e-3, 6e-2);
    let half_var = 0.5 * demand_vol * demand_vol;
    // Drift around the martingale value, keeping r_d ≥ r/4.
    let demand_drift = -half_var + rng.random_range(-2.0 * r..0.75 * r);
    let household_cap = rng.random_range(0.05..0.5);
    let biogas_cap = rng.random_range(0.05..0.3);
    let demand = rng.random_range(0.05..0.95) * (household_cap + biogas_cap);

    let spot_vol = rng.random_range(0.01..0.1);
    let spot_drift = -0.5 * spot_vol * spot_vol + rng.random_range(-r..0.5 * r);
    let spot_rate = r - spot_drift - 0.5 * spot_vol * spot_vol;

    let gas_vol = rng.random_range(0.05..0.9);
    let gas_drift = -0.5 * gas_vol * gas_vol;

    let g_h = rng.random_range(-1.5..0.4) * scale;
    let g_b = rng.random_range(-1.5..0.4) * scale;
    // The spot value x_v/r_v must exceed both gains for the costs to be
    // positive.
    let spot = rng
        .random_range(20.0f64..120.0)
        .max(1.5 * g_h.max(g_b) * spot_rate);
    let spot_value = spot / spot_rate;
    let household_cost = spot_value - g_h;
    let gas_share = rng.random_range(0.1..0.9);
    let gas_value = gas_share * (spot_value - g_b);
    let gas = gas_value * r;
    let biogas_cost = spot_value - gas_value - g_b;

    // Small enough that ρ_c σ_c σ_d cannot eat up r_d.
    let purchase_vol = rng.random_range(0.01..0.2) * r / demand_vol;
    MarketScenario {
        spot_price: GbmSpec::new(spot, spot_drift, spot_vol),
        purchase_price: GbmSpec::new(
            rng.random_range(20.0..120.0),
            -0.5 * purchase_vol * purchase_vol,
            purchase_vol,
        ),
        gas_price: GbmSpec::new(gas, gas_drift, gas_vol),
        demand: GbmSpec::new(demand, demand_drift, demand_vol),
        rho_c: rng.random_range(-1.0..1.0),
        discount_rate: r,
        expiry_intensity: lambda,
        incentive,
        household_cost,
        biogas_cost,
        household_cap,
        biogas_cap,
        gas_capacity: 20.0,
        conversion: biogas_cap / 20.0 * rng.random_range(1.0..1.5),
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}
