use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use recgame_core::bargaining::{self, BargainingConfig};
use recgame_core::game::DEFAULT_CONTINUUM_SPLIT;
use recgame_core::model::CommunityModel;
use recgame_core::payoffs::{InstallationPair, Member};
use recgame_core::testing::random_scenario;

fn model(seed: u64) -> CommunityModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CommunityModel::new(random_scenario(&mut rng)).unwrap()
}

fn pair(member: Member, own: f64, other: f64) -> InstallationPair {
    match member {
        Member::Household => InstallationPair::new(own, other),
        Member::Biogas => InstallationPair::new(other, own),
    }
}

fn cap(m: &CommunityModel, member: Member) -> f64 {
    match member {
        Member::Household => m.market().household_cap,
        Member::Biogas => m.market().biogas_cap,
    }
}

/// Payoff without the terms that do not depend on the member's own
/// installation, so that grid comparisons are not swamped by rounding in a
/// large constant.
fn varying_payoff(m: &CommunityModel, member: Member, own: f64, other: f64, beta: f64) -> f64 {
    m.payoff(member, pair(member, own, other), beta) - m.payoff(member, pair(member, 0.0, other), beta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Analytic best responses against a 10⁴-point grid search, for both
    /// members and 10 splits per scenario.
    #[test]
    fn best_response_beats_grid_search(seed in any::<u64>(), others in prop::array::uniform10(0.0f64..1.0)) {
        let m = model(seed);
        const N: usize = 10_000;
        for (k, other_frac) in others.iter().enumerate() {
            let beta = (k as f64 + 0.5) / 10.0;
            for member in [Member::Household, Member::Biogas] {
                let theta = cap(&m, member);
                let other = other_frac * cap(&m, match member {
                    Member::Household => Member::Biogas,
                    Member::Biogas => Member::Household,
                });
                let step = theta / (N - 1) as f64;
                let (mut best_y, mut best_j) = (0.0, f64::NEG_INFINITY);
                for i in 0..N {
                    let y = i as f64 * step;
                    let j = varying_payoff(&m, member, y, other, beta);
                    if j > best_j {
                        (best_y, best_j) = (y, j);
                    }
                }
                let br = m.best_response(member, other, beta);
                let j_br = varying_payoff(&m, member, br, other, beta);
                let full = m.payoff(member, pair(member, br, other), beta);
                prop_assert!(
                    j_br >= best_j - 1e-9 * full.abs(),
                    "{member:?} β={beta}: analytic {j_br} < grid {best_j}"
                );
                // Where the payoff is flat to rounding, any point of the
                // plateau is a valid argmax.
                let tie = (j_br - best_j).abs() <= 1e-12 * full.abs();
                prop_assert!(
                    (br - best_y).abs() <= step * (1.0 + 1e-9) || tie,
                    "{member:?} β={beta}: analytic {br} vs grid {best_y}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn no_profitable_unilateral_deviation(
        seed in any::<u64>(),
        beta in 1e-6f64..(1.0 - 1e-6),
        deviations in prop::collection::vec(0.0f64..1.0, 50),
    ) {
        let m = model(seed);
        let eq = m.equilibrium(beta, DEFAULT_CONTINUUM_SPLIT).unwrap();
        let y = eq.installs;
        prop_assert!(y.y_h >= 0.0 && y.y_h <= m.market().household_cap);
        prop_assert!(y.y_b >= 0.0 && y.y_b <= m.market().biogas_cap);
        for member in [Member::Household, Member::Biogas] {
            let (own, other) = match member {
                Member::Household => (y.y_h, y.y_b),
                Member::Biogas => (y.y_b, y.y_h),
            };
            let base = m.payoff(member, y, beta);
            for &u in &deviations {
                let dev = m.payoff(member, pair(member, u * cap(&m, member), other), beta);
                prop_assert!(
                    dev - base <= 1e-6 * base.abs(),
                    "{member:?} gains {} by moving {own} → {}", dev - base, u * cap(&m, member)
                );
            }
            // The equilibrium is a fixed point of the best responses.
            let br = m.best_response(member, other, beta);
            prop_assert!((br - own).abs() <= 1e-9 * cap(&m, member).max(own) || eq.aggregate_target.is_some());
        }
    }

    #[test]
    fn payoff_slopes_match_finite_differences(seed in any::<u64>(), beta in 0.01f64..0.99, a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let m = model(seed);
        let y = InstallationPair::new(a * m.market().household_cap, b * m.market().biogas_cap);
        let h = 1e-6 * y.total();
        let fd_h = (m.j_h(InstallationPair::new(y.y_h + h, y.y_b), beta)
            - m.j_h(InstallationPair::new(y.y_h - h, y.y_b), beta)) / (2.0 * h);
        let fd_b = (m.j_b(InstallationPair::new(y.y_h, y.y_b + h), beta)
            - m.j_b(InstallationPair::new(y.y_h, y.y_b - h), beta)) / (2.0 * h);
        let (dh, db) = (m.dj_h(y, beta).unwrap(), m.dj_b(y, beta).unwrap());
        let scale_h = m.gains.g_h.abs() + m.market().incentive / m.coeffs.killing_rate;
        let scale_b = m.gains.g_b.abs() + m.market().incentive / m.coeffs.killing_rate;
        prop_assert!((fd_h - dh).abs() < 1e-4 * scale_h, "{fd_h} vs {dh}");
        prop_assert!((fd_b - db).abs() < 1e-4 * scale_b, "{fd_b} vs {db}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    /// The bargaining optimum is never beaten by a 10⁴-point β grid.
    #[test]
    fn bargaining_beats_beta_grid(seed in any::<u64>()) {
        let m = model(seed);
        let cfg = BargainingConfig::default();
        let sol = bargaining::solve_bargaining(&m, &cfg).unwrap();
        prop_assert!(sol.beta_star > 0.0 && sol.beta_star < 1.0);
        const N: usize = 10_000;
        let (grid_best, gap_h, gap_b) = (0..N)
            .map(|i| {
                let beta = bargaining::BETA_EPSILON
                    + (1.0 - 2.0 * bargaining::BETA_EPSILON) * i as f64 / (N - 1) as f64;
                let e = bargaining::evaluate(&m, beta, &cfg).unwrap();
                (e.nash_product, e.j_h - m.disagreement.d_h, e.j_b - m.disagreement.d_b)
            })
            .fold((0.0, 0.0, 0.0), |best, x| if x.0 > best.0 { x } else { best });
        // Each gap J − d carries a few ulps of the disagreement point; with
        // near-zero installations that rounding is all there is to F.
        let rounding = 1e-13 * (m.disagreement.d_h.abs() * gap_b.abs() + m.disagreement.d_b.abs() * gap_h.abs());
        prop_assert!(
            sol.nash_product >= grid_best * (1.0 - 1e-8) - rounding,
            "β* = {} gives {} < grid {}", sol.beta_star, sol.nash_product, grid_best
        );
        if m.gains.g_h >= 0.0 && m.gains.g_b >= 0.0 {
            prop_assert_eq!(sol.beta_star, 0.5);
        }
    }
}

#[test]
fn nash_product_case_formula_agrees_with_direct_product() {
    let cfg = BargainingConfig::default();
    let mut checked = 0;
    for seed in 0..300 {
        let m = model(seed);
        for k in 1..20 {
            let beta = k as f64 / 20.0;
            let e = bargaining::evaluate(&m, beta, &cfg).unwrap();
            if e.nash_product > 0.0 {
                let by_case = bargaining::nash_product_by_case(&m, &e.outcome);
                // The direct product subtracts large payoffs; allow for the
                // rounding of each gap.
                let gap_h = e.j_h - m.disagreement.d_h;
                let gap_b = e.j_b - m.disagreement.d_b;
                let rounding = 1e-13 * (gap_h * e.j_b.abs() + gap_b * e.j_h.abs());
                assert!(
                    (by_case - e.nash_product).abs() <= 1e-9 * e.nash_product + rounding,
                    "seed {seed} β {beta}: {by_case} vs {}",
                    e.nash_product
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "only {checked} formed communities");
}
