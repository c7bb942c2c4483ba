//! The coordinator's problem: choose the household share β maximizing the
//! Nash product F(β) = (J_h − d_h)(J_b − d_b), with the installations
//! re-solved as a Nash equilibrium at every β.
//!
//! F is piecewise smooth in β, with kinks or jumps where a member's regime
//! changes (β_h, β_b, the formation boundaries) and possibly an isolated
//! value at β_n, where a continuum of equilibria appears. The solver scans a
//! uniform grid augmented with those special points and refines around the
//! best one by golden-section search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game::{EquilibriumOutcome, GameError, DEFAULT_CONTINUUM_SPLIT};
use crate::model::CommunityModel;

/// Distance kept from the ends of (0, 1).
pub const BETA_EPSILON: f64 = 1e-6;
const GOLDEN_TOLERANCE: f64 = 1e-9;
const TIE_TOLERANCE: f64 = 1e-9;

/// When the community counts as formed for the Nash product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunityRule {
    /// The biogas producer installs something and its incentive share
    /// covers its negative gain.
    #[default]
    BiogasInstalls,
    /// Additionally the household must install something.
    BothInstall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BargainingConfig {
    pub community_rule: CommunityRule,
    /// Household fraction of the aggregate in a continuum of equilibria.
    pub continuum_split: f64,
    pub grid_points: usize,
}

impl Default for BargainingConfig {
    fn default() -> Self {
        Self {
            community_rule: CommunityRule::default(),
            continuum_split: DEFAULT_CONTINUUM_SPLIT,
            grid_points: 512,
        }
    }
}

/// Equilibrium and payoffs at one β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub outcome: EquilibriumOutcome,
    pub j_h: f64,
    pub j_b: f64,
    /// Formed under the configured rule.
    pub community_formed: bool,
    /// (J_h − d_h)(J_b − d_b) when the community forms and both members
    /// gain from it, zero otherwise.
    pub nash_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BargainingSolution {
    pub beta_star: f64,
    pub outcome: EquilibriumOutcome,
    pub j_h_star: f64,
    pub j_b_star: f64,
    pub d_h: f64,
    pub d_b: f64,
    pub nash_product: f64,
    pub community_formed: bool,
    /// Another β with the same Nash product, if one was found.
    pub alternative_beta: Option<f64>,
}

pub fn evaluate(
    model: &CommunityModel,
    beta: f64,
    cfg: &BargainingConfig,
) -> Result<Evaluation, GameError> {
    let outcome = model.equilibrium(beta, cfg.continuum_split)?;
    let y = outcome.installs;
    let j_h = model.j_h(y, beta);
    let j_b = model.j_b(y, beta);
    let community_formed = outcome.community_formed
        && (cfg.community_rule == CommunityRule::BiogasInstalls || y.y_h > 0.0);
    let gap_h = j_h - model.disagreement.d_h;
    let gap_b = j_b - model.disagreement.d_b;
    let nash_product = if community_formed && gap_h >= 0.0 && gap_b >= 0.0 {
        gap_h * gap_b
    } else {
        0.0
    };
    Ok(Evaluation {
        outcome,
        j_h,
        j_b,
        community_formed,
        nash_product,
    })
}

pub fn nash_product(
    model: &CommunityModel,
    beta: f64,
    cfg: &BargainingConfig,
) -> Result<f64, GameError> {
    Ok(evaluate(model, beta, cfg)?.nash_product)
}

/// F written out by the signs of the unit gains, for an equilibrium in which
/// the community forms. Agrees with the direct product whenever both
/// disagreement gaps are non-negative.
pub fn nash_product_by_case(model: &CommunityModel, outcome: &EquilibriumOutcome) -> f64 {
    let (g_h, g_b) = (model.gains.g_h, model.gains.g_b);
    let beta = outcome.beta;
    let y = outcome.installs;
    let zw = model.market().incentive * model.w(y);
    let shared = beta * (1.0 - beta) * zw * zw;
    match (g_h >= 0.0, g_b >= 0.0) {
        (true, true) => shared,
        (false, true) => shared + (1.0 - beta) * zw * g_h * y.y_h,
        (true, false) => shared + beta * zw * g_b * y.y_b,
        (false, false) => {
            shared
                + beta * zw * g_b * y.y_b
                + (1.0 - beta) * zw * g_h * y.y_h
                + y.y_h * y.y_b * g_h * g_b
        }
    }
}

/// Shapley value share of each member in a two-member community where only
/// the grand coalition creates value.
pub fn shapley_share() -> f64 {
    0.5
}

pub fn solve_bargaining(
    model: &CommunityModel,
    cfg: &BargainingConfig,
) -> Result<BargainingSolution, GameError> {
    let solution = |beta: f64, alternative_beta| -> Result<BargainingSolution, GameError> {
        let e = evaluate(model, beta, cfg)?;
        Ok(BargainingSolution {
            beta_star: beta,
            outcome: e.outcome,
            j_h_star: e.j_h,
            j_b_star: e.j_b,
            d_h: model.disagreement.d_h,
            d_b: model.disagreement.d_b,
            nash_product: e.nash_product,
            community_formed: e.community_formed && e.nash_product > 0.0,
            alternative_beta,
        })
    };

    let g = model.gains;
    if g.g_h >= 0.0 && g.g_b >= 0.0 {
        // F = β(1−β)Z²w(θ_h, θ_b)², maximal at one half.
        return solution(0.5, None);
    }

    let betas = candidate_betas(model, cfg.grid_points);
    let values = betas
        .par_iter()
        .map(|&b| nash_product(model, b, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    if !(values[best] > 0.0) {
        log::info!("the community does not form for any β; reporting β = 0.5");
        let mut s = solution(0.5, None)?;
        s.community_formed = false;
        s.nash_product = 0.0;
        return Ok(s);
    }

    let f = |b: f64| nash_product(model, b, cfg).unwrap_or(0.0);
    let (mut beta_star, mut f_star) = (betas[best], values[best]);
    if best > 0 {
        let (b, v) = golden_max(&f, betas[best - 1], betas[best]);
        if v > f_star {
            (beta_star, f_star) = (b, v);
        }
    }
    if best + 1 < betas.len() {
        let (b, v) = golden_max(&f, betas[best], betas[best + 1]);
        if v > f_star {
            (beta_star, f_star) = (b, v);
        }
    }

    let alternative = competing_peak(&betas, &values, beta_star, f_star);
    if let Some(alt) = alternative {
        log::info!(
            "Nash product ties at β = {beta_star} and β = {alt}; keeping the smaller"
        );
        if alt < beta_star {
            return solution(alt, Some(beta_star));
        }
    }
    solution(beta_star, alternative)
}

/// Uniform grid on [ε, 1−ε] plus every β at which the equilibrium changes
/// regime, sorted and deduplicated.
fn candidate_betas(model: &CommunityModel, grid_points: usize) -> Vec<f64> {
    let n = grid_points.max(3);
    let (lo, hi) = (BETA_EPSILON, 1.0 - BETA_EPSILON);
    let mut betas: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let t = model.thresholds;
    let z_r = model.market().incentive / model.coeffs.killing_rate;
    let specials = [
        Some(t.beta_h),
        Some(t.beta_b),
        t.beta_n,
        Some(1.0 + model.gains.g_b / z_r),
        Some(-model.gains.g_h / z_r),
    ];
    betas.extend(
        specials
            .into_iter()
            .flatten()
            .filter(|b| b.is_finite() && *b > lo && *b < hi),
    );
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    betas
}

/// A separate local maximum whose value ties with the best one.
fn competing_peak(betas: &[f64], values: &[f64], beta_star: f64, f_star: f64) -> Option<f64> {
    let n = values.len();
    (0..n).find_map(|i| {
        let left = i == 0 || values[i] >= values[i - 1];
        let right = i + 1 == n || values[i] >= values[i + 1];
        let far = (betas[i] - beta_star).abs() > 1e-3;
        (left && right && far && values[i] >= f_star * (1.0 - TIE_TOLERANCE)).then_some(betas[i])
    })
}

/// Golden-section search for the maximum of `f` on [a, b]; returns the best
/// point evaluated.
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOLERANCE {
        if fc >= fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
