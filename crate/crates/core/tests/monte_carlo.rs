use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use recgame_core::model::CommunityModel;
use recgame_core::payoffs::{j0_b, j0_h, unit_gains, InstallationPair, Member};
use recgame_core::scenario::{raw_net_rates, GbmSpec, MarketScenario};
use recgame_core::simulation::{
    payoff_estimate_reliable, simulate_discounted_level, simulate_payoff, simulate_w_killed,
    simulate_w_tau, McConfig,
};
use recgame_core::testing::{example1, random_scenario};

/// Faster rates and milder volatilities than the reference examples, so
/// that the payoff integrals can be estimated with a modest path count.
fn moderate() -> MarketScenario {
    let martingale = |x: f64, sigma: f64| GbmSpec::new(x, -0.5 * sigma * sigma, sigma);
    MarketScenario {
        spot_price: martingale(56.7, 0.01),
        purchase_price: martingale(65.0, 0.005),
        gas_price: martingale(74.7, 0.012),
        demand: martingale(0.3, 0.01),
        rho_c: 0.6,
        discount_rate: 1e-4,
        expiry_intensity: 2e-4,
        household_cost: 4.0e5,
        biogas_cost: 1.5e5,
        ..example1()
    }
}

fn check_w(s: &MarketScenario, y: InstallationPair, paths: usize, seed: u64) {
    let model = CommunityModel::new(s.clone()).unwrap();
    let w = model.w(y);
    let cfg = McConfig::for_incentive(&model, y, paths, seed);
    let tau = simulate_w_tau(s, y, &cfg).unwrap();
    let killed = simulate_w_killed(s, y, &McConfig { seed: seed + 1, ..cfg }).unwrap();
    assert!(tau.agrees_with(w, 3.0), "τ-sampled z = {:.2}", tau.z_score(w));
    assert!(killed.agrees_with(w, 3.0), "killed z = {:.2}", killed.z_score(w));
    assert!(tau.agrees_with_estimate(&killed, 3.0));
}

#[test]
fn example1_incentive_matches_closed_form() {
    check_w(&example1(), InstallationPair::new(0.32, 0.2), 100_000, 1);
}

#[test]
fn random_incentives_match_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..5 {
        let s = random_scenario(&mut rng);
        let y = InstallationPair::new(0.6 * s.household_cap, 0.9 * s.biogas_cap);
        check_w(&s, y, 20_000, 100 + 2 * i);
    }
}

#[test]
fn demand_below_and_above_capacity() {
    let s = example1();
    check_w(&s, InstallationPair::new(0.1, 0.05), 20_000, 5);
    check_w(&s, InstallationPair::new(0.32, 0.0), 20_000, 7);
}

#[test]
fn payoffs_match_closed_forms() {
    let s = moderate();
    let paths = 20_000;
    payoff_estimate_reliable(&s, paths).unwrap();
    let model = CommunityModel::new(s.clone()).unwrap();
    let cfg = McConfig::for_payoff(&s, paths, 9);
    for (y, beta) in [
        (InstallationPair::new(0.0, 0.0), 0.5),
        (InstallationPair::new(0.32, 0.2), 0.3),
        (InstallationPair::new(0.1, 0.15), 0.8),
    ] {
        for member in [Member::Household, Member::Biogas] {
            let est = simulate_payoff(&s, y, beta, &cfg, member).unwrap();
            let exact = model.payoff(member, y, beta);
            assert!(
                est.agrees_with(exact, 3.0),
                "{member:?} {y:?} β={beta}: z = {:.2}",
                est.z_score(exact)
            );
        }
    }
}

#[test]
fn zero_incentive_leaves_the_base_payoff() {
    // Z = 0 is not a valid scenario, but the integrals are still defined.
    let mut s = moderate();
    s.incentive = 0.0;
    let rates = raw_net_rates(&s);
    let gains = unit_gains(&s, &rates);
    let y = InstallationPair::new(0.2, 0.1);
    let cfg = McConfig::for_payoff(&s, 20_000, 13);
    for beta in [0.0, 0.4, 1.0] {
        let h = simulate_payoff(&s, y, beta, &cfg, Member::Household).unwrap();
        let b = simulate_payoff(&s, y, beta, &cfg, Member::Biogas).unwrap();
        assert!(h.agrees_with(j0_h(&s, &rates, &gains, y), 3.0));
        assert!(b.agrees_with(j0_b(&s, &rates, &gains, y), 3.0));
    }
}

#[test]
fn perfectly_correlated_purchase_and_demand() {
    let mut s = moderate();
    let sigma = 0.005;
    s.rho_c = 1.0;
    s.purchase_price = GbmSpec::new(65.0, -0.5 * sigma * sigma, sigma);
    s.demand = GbmSpec::new(0.3, -0.5 * sigma * sigma, sigma);
    let model = CommunityModel::new(s.clone()).unwrap();
    let y = InstallationPair::new(0.0, 0.0);
    let cfg = McConfig::for_payoff(&s, 20_000, 17);
    let est = simulate_payoff(&s, y, 0.5, &cfg, Member::Household).unwrap();
    let r_cd = s.discount_rate - sigma * sigma;
    let exact = -65.0 * 0.3 / r_cd;
    assert!((model.j_h(y, 0.5) - exact).abs() < 1e-9 * exact.abs());
    assert!(est.agrees_with(exact, 3.0), "z = {:.2}", est.z_score(exact));
}

#[test]
fn discounted_level_matches_net_rate() {
    let g = GbmSpec::new(50.0, -0.002, 0.05);
    let (r, t) = (1e-3, 200.0);
    let est = simulate_discounted_level(&g, r, t, 50_000, 3).unwrap();
    let exact = 50.0 * (-g.net_rate(r) * t).exp();
    assert!(est.agrees_with(exact, 3.0), "z = {:.2}", est.z_score(exact));
}

#[test]
fn standard_error_shrinks_as_root_paths() {
    let s = example1();
    let model = CommunityModel::new(s.clone()).unwrap();
    let y = InstallationPair::new(0.32, 0.2);
    let small = McConfig::for_incentive(&model, y, 1000, 21);
    let large = McConfig { paths: 4000, ..small };
    let a = simulate_w_killed(&s, y, &small).unwrap();
    let b = simulate_w_killed(&s, y, &large).unwrap();
    let ratio = a.standard_error / b.standard_error;
    assert!((ratio - 2.0).abs() <= 0.3, "ratio {ratio}");
}
