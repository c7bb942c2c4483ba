//! Monte Carlo estimates of the incentive value and the payoffs, used as an
//! independent check on the closed forms.
//!
//! Paths are sampled with exact log-normal transitions, so the only
//! discretization error comes from integrating over time. Within each step
//! the integrand is interpolated linearly while the discount factor is
//! integrated exactly; a constant integrand is therefore integrated without
//! error. The time grid is either uniform or graded: the step grows in
//! proportion to elapsed time, which keeps the relative quadrature error
//! small while reaching horizons of many times 1/(r+λ).
//!
//! Paths are simulated in fixed-size batches, each with its own ChaCha
//! stream derived from the seed, and the batch statistics are merged in
//! batch order: a seed and configuration always give bit-identical results,
//! whatever the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CommunityModel;
use crate::payoffs::{InstallationPair, Member};
use crate::scenario::{raw_net_rates, GbmSpec, MarketScenario};

/// The ignored tail of the integral must be below this fraction of the
/// estimate.
pub const TRUNCATION_FRACTION: f64 = 1e-3;
const BATCH: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "horizon {horizon} h too short: the ignored tail can reach {tail_bound:e}, \
         more than {TRUNCATION_FRACTION} of the estimate {estimate:e}"
    )]
    TruncationTooShort {
        horizon: f64,
        tail_bound: f64,
        estimate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    /// Truncation time T, hours.
    pub horizon: f64,
    /// Uniform step, or the first step of a graded grid, hours.
    pub step: f64,
    /// A positive value grades the grid: each step is max(step, growth·t),
    /// capped at `max_step`.
    pub growth: f64,
    pub max_step: f64,
    pub seed: u64,
}

impl McConfig {
    pub fn uniform(paths: usize, horizon: f64, step: f64, seed: u64) -> Self {
        Self {
            paths,
            horizon,
            step,
            growth: 0.0,
            max_step: step,
            seed,
        }
    }

    /// Graded grid resolving both the demand volatility and the discounting
    /// of the incentive, with a horizon meeting the truncation bound.
    ///
    /// The horizon needs a guess of the size of w, for which the closed form
    /// is used; the bound itself is then checked against the simulated
    /// estimate.
    pub fn for_incentive(model: &CommunityModel, y: InstallationPair, paths: usize, seed: u64) -> Self {
        let s = model.market();
        let killing = s.killing_rate();
        let total = y.total();
        let w = model.w(y);
        let guess = if w > 0.0 { w } else { y.total() / killing };
        let ratio = (total / (killing * guess)).max(1.0);
        // Far beyond the required bound: the extra horizon is cheap on a
        // graded grid and keeps the truncation bias below the noise.
        let horizon = (ratio * 1e7).ln() / killing;
        graded(paths, horizon, s.demand.volatility, killing, seed)
    }

    /// Graded grid for the payoff integrals, resolving the slowest net rate.
    pub fn for_payoff(s: &MarketScenario, paths: usize, seed: u64) -> Self {
        let rates = raw_net_rates(s);
        let slowest = [rates.spot, rates.gas, rates.purchase_demand, s.killing_rate()]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let horizon = 1e7f64.ln() / slowest;
        let vol = [
            s.spot_price.volatility,
            s.gas_price.volatility,
            s.purchase_price.volatility,
            s.demand.volatility,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        graded(paths, horizon, vol, slowest, seed)
    }

    fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidConfig(m.into()));
        if self.paths < 2 {
            return bad("need at least 2 paths for a standard error");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive and finite");
        }
        if !(self.step > 0.0) || !(self.max_step >= self.step) || !(self.growth >= 0.0) {
            return bad("steps must be positive with max_step ≥ step and growth ≥ 0");
        }
        if self.growth == 0.0 {
            let n = self.horizon / self.step;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return bad("a uniform step must divide the horizon");
            }
        }
        Ok(())
    }

    /// Grid times from 0 to the horizon inclusive.
    pub fn grid(&self) -> Vec<f64> {
        if self.growth == 0.0 {
            let n = (self.horizon / self.step).round() as usize;
            return (0..=n).map(|k| self.horizon * k as f64 / n as f64).collect();
        }
        let mut t = vec![0.0];
        let mut now = 0.0;
        while now < self.horizon {
            let dt = (self.growth * now).clamp(self.step, self.max_step);
            now = if now + dt >= self.horizon * (1.0 - 1e-12) {
                self.horizon
            } else {
                now + dt
            };
            t.push(now);
        }
        t
    }
}

fn graded(paths: usize, horizon: f64, vol: f64, rate: f64, seed: u64) -> McConfig {
    let max_step = 0.02 / rate;
    McConfig {
        paths,
        horizon,
        step: (0.02 / (vol * vol)).min(max_step).min(horizon / 100.0),
        growth: 0.05,
        max_step: max_step.min(horizon / 10.0),
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub paths_used: usize,
}

impl McEstimate {
    /// |mean − value| ≤ k·SE.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.standard_error
    }

    /// The two estimates agree within k combined standard errors.
    pub fn agrees_with_estimate(&self, other: &McEstimate, k: f64) -> bool {
        let se = self.standard_error.hypot(other.standard_error);
        (self.mean - other.mean).abs() <= k * se
    }

    /// Distance to a reference value in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value) / self.standard_error
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n * other.n) as f64 / n as f64,
        }
    }

    fn estimate(&self) -> McEstimate {
        let var = self.m2 / (self.n - 1) as f64;
        McEstimate {
            mean: self.mean,
            standard_error: (var / self.n as f64).sqrt(),
            paths_used: self.n,
        }
    }
}

/// Runs `path` once per simulated path, batch by batch, and merges the
/// sample moments in batch order.
fn run_batches<F>(cfg: &McConfig, path: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let batches = cfg.paths.div_ceil(BATCH);
    let moments: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let mut m = Moments::default();
            for _ in 0..BATCH.min(cfg.paths - b * BATCH) {
                m.push(path(&mut rng));
            }
            m
        })
        .collect();
    moments
        .into_iter()
        .fold(Moments::default(), Moments::merge)
        .estimate()
}

/// Exact-discount trapezoid weights: ∫ e^{−ρs} f(s) ds ≈ Σ_k weight_k f(t_k)
/// for f linear between grid points.
fn trapezoid_weights(grid: &[f64], rate: f64) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let (a, b) = interval_weights(grid[k], grid[k + 1], rate);
        w[k] += a;
        w[k + 1] += b;
    }
    w
}

/// Weights (on f(a), f(b)) of ∫_a^b e^{−ρs} f(s) ds for f linear on [a, b].
fn interval_weights(a: f64, b: f64, rate: f64) -> (f64, f64) {
    let h = b - a;
    let x = rate * h;
    let ea = (-rate * a).exp();
    // ∫_0^h e^{−ρu}(1 − u/h) du and ∫_0^h e^{−ρu} u/h du, with series
    // expansions where the closed forms cancel.
    let (left, right) = if x < 1e-4 {
        (
            h * (0.5 - x / 6.0 + x * x / 24.0),
            h * (0.5 - x / 3.0 + x * x / 8.0),
        )
    } else {
        let e = (-x).exp();
        let one_minus = -(-x).exp_m1();
        (
            h * (x - one_minus) / (x * x),
            h * (one_minus - x * e) / (x * x),
        )
    };
    (ea * left, ea * right)
}

/// Per-step log-increment mean and standard deviation of a GBM on a grid.
fn log_steps(grid: &[f64], g: &GbmSpec) -> Vec<(f64, f64)> {
    grid.windows(2)
        .map(|t| {
            let dt = t[1] - t[0];
            (g.drift * dt, g.volatility * dt.sqrt())
        })
        .collect()
}

fn check_truncation(cfg: &McConfig, tail_bound: f64, scale: f64) -> Result<(), SimulationError> {
    if tail_bound < TRUNCATION_FRACTION * scale.abs() {
        Ok(())
    } else {
        Err(SimulationError::TruncationTooShort {
            horizon: cfg.horizon,
            tail_bound,
            estimate: scale,
        })
    }
}

fn incentive_tail(s: &MarketScenario, y: InstallationPair, horizon: f64) -> f64 {
    let killing = s.killing_rate();
    (-killing * horizon).exp() * y.total() / killing
}

/// w by sampling the expiry time τ ~ Exp(λ) and integrating e^{−rs}
/// min(D, y) up to min(τ, T).
pub fn simulate_w_tau(
    s: &MarketScenario,
    y: InstallationPair,
    cfg: &McConfig,
) -> Result<McEstimate, SimulationError> {
    cfg.validate()?;
    let grid = cfg.grid();
    let r = s.discount_rate;
    let steps = log_steps(&grid, &s.demand);
    let weights: Vec<(f64, f64)> = grid
        .windows(2)
        .map(|t| interval_weights(t[0], t[1], r))
        .collect();
    let expiry = Exp::new(s.expiry_intensity)
        .map_err(|e| SimulationError::InvalidConfig(format!("expiry intensity: {e}")))?;
    let (cap, log_cap) = (y.total(), y.total().ln());
    let g = s.demand;
    let clip = |log_d: f64| if log_d >= log_cap { cap } else { log_d.exp() };
    let log_d0 = g.initial_value.ln();

    let est = run_batches(cfg, |rng| {
        let tau: f64 = rng.sample(expiry);
        let mut log_d = log_d0;
        let mut f = clip(log_d);
        let mut total = 0.0;
        for (k, &(mean, sd)) in steps.iter().enumerate() {
            if tau < grid[k + 1] {
                let dt = tau - grid[k];
                let z: f64 = rng.sample(StandardNormal);
                let end = clip(log_d + g.drift * dt + g.volatility * dt.sqrt() * z);
                let (a, b) = interval_weights(grid[k], tau, r);
                return total + a * f + b * end;
            }
            let z: f64 = rng.sample(StandardNormal);
            log_d += mean + sd * z;
            let next = clip(log_d);
            total += weights[k].0 * f + weights[k].1 * next;
            f = next;
        }
        total
    });
    check_truncation(cfg, incentive_tail(s, y, cfg.horizon), est.mean)?;
    Ok(est)
}

/// w by integrating e^{−(r+λ)s} min(D, y) up to T: the expiry time replaced
/// by killing at rate λ.
pub fn simulate_w_killed(
    s: &MarketScenario,
    y: InstallationPair,
    cfg: &McConfig,
) -> Result<McEstimate, SimulationError> {
    cfg.validate()?;
    let grid = cfg.grid();
    let steps = log_steps(&grid, &s.demand);
    let weights = trapezoid_weights(&grid, s.killing_rate());
    let (cap, log_cap) = (y.total(), y.total().ln());
    let log_d0 = s.demand.initial_value.ln();

    let est = run_batches(cfg, |rng| {
        let mut log_d = log_d0;
        let mut total = weights[0] * if log_d >= log_cap { cap } else { log_d.exp() };
        for (&(mean, sd), &w) in steps.iter().zip(&weights[1..]) {
            let z: f64 = rng.sample(StandardNormal);
            log_d += mean + sd * z;
            total += w * if log_d >= log_cap { cap } else { log_d.exp() };
        }
        total
    });
    check_truncation(cfg, incentive_tail(s, y, cfg.horizon), est.mean)?;
    Ok(est)
}

/// A member's payoff J from its defining integrals, with the incentive in
/// its killed form. The demand and purchase-price noises are correlated
/// with ρ_c; all other pairs are independent.
pub fn simulate_payoff(
    s: &MarketScenario,
    y: InstallationPair,
    beta: f64,
    cfg: &McConfig,
    member: Member,
) -> Result<McEstimate, SimulationError> {
    cfg.validate()?;
    let grid = cfg.grid();
    let r = s.discount_rate;
    let w_r = trapezoid_weights(&grid, r);
    let w_inc = trapezoid_weights(&grid, s.killing_rate());
    let spot = log_steps(&grid, &s.spot_price);
    let purchase = log_steps(&grid, &s.purchase_price);
    let gas = log_steps(&grid, &s.gas_price);
    let demand = log_steps(&grid, &s.demand);
    let rho = s.rho_c;
    let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
    let (cap, log_cap) = (y.total(), y.total().ln());
    let gas_power = s.conversion * s.gas_capacity;
    let incentive = member.share(beta) * s.incentive;

    let flow = |x_v: f64, x_c: f64, p: f64, d: f64| match member {
        Member::Household => x_v * y.y_h - x_c * d,
        Member::Biogas => x_v * y.y_b + p * (gas_power - y.y_b),
    };
    let clip = |log_d: f64| {
        if cap <= 0.0 {
            0.0
        } else if log_d >= log_cap {
            cap
        } else {
            log_d.exp()
        }
    };
    let start = [
        s.spot_price.initial_value.ln(),
        s.purchase_price.initial_value.ln(),
        s.gas_price.initial_value.ln(),
        s.demand.initial_value.ln(),
    ];

    let est = run_batches(cfg, |rng| {
        let [mut lv, mut lc, mut lp, mut ld] = start;
        let level = |lv: f64, lc: f64, lp: f64, ld: f64| flow(lv.exp(), lc.exp(), lp.exp(), ld.exp());
        let mut total = w_r[0] * level(lv, lc, lp, ld) + incentive * w_inc[0] * clip(ld);
        for k in 0..demand.len() {
            let z_d: f64 = rng.sample(StandardNormal);
            let z_perp: f64 = rng.sample(StandardNormal);
            let z_v: f64 = rng.sample(StandardNormal);
            let z_p: f64 = rng.sample(StandardNormal);
            ld += demand[k].0 + demand[k].1 * z_d;
            lc += purchase[k].0 + purchase[k].1 * (rho * z_d + rho_perp * z_perp);
            lv += spot[k].0 + spot[k].1 * z_v;
            lp += gas[k].0 + gas[k].1 * z_p;
            total += w_r[k + 1] * level(lv, lc, lp, ld) + incentive * w_inc[k + 1] * clip(ld);
        }
        total
    });

    let rates = raw_net_rates(s);
    let t = cfg.horizon;
    let cost = match member {
        Member::Household => s.household_cost * y.y_h,
        Member::Biogas => s.biogas_cost * y.y_b,
    };
    let terms: [(f64, f64); 4] = match member {
        Member::Household => [
            (s.spot_price.initial_value * y.y_h, rates.spot),
            (s.purchase_price.initial_value * s.demand.initial_value, rates.purchase_demand),
            (incentive * cap, s.killing_rate()),
            (0.0, 1.0),
        ],
        Member::Biogas => [
            (s.spot_price.initial_value * y.y_b, rates.spot),
            (s.gas_price.initial_value * gas_power, rates.gas),
            (s.gas_price.initial_value * y.y_b, rates.gas),
            (incentive * cap, s.killing_rate()),
        ],
    };
    let tail: f64 = terms.iter().map(|(a, rate)| a * (-rate * t).exp() / rate).sum();
    let scale: f64 = terms.iter().map(|(a, rate)| a / rate).sum();
    check_truncation(cfg, tail, scale)?;
    Ok(McEstimate {
        mean: est.mean - cost,
        ..est
    })
}

/// E[e^{−rs} X(s)] at a fixed time, which should equal x e^{−(r−μ−σ²/2)s}.
pub fn simulate_discounted_level(
    g: &GbmSpec,
    discount_rate: f64,
    time: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate, SimulationError> {
    if paths < 2 {
        return Err(SimulationError::InvalidConfig("need at least 2 paths".into()));
    }
    let cfg = McConfig::uniform(paths, time, time, seed);
    let (mean, sd) = (g.drift * time, g.volatility * time.sqrt());
    let discount = (-discount_rate * time).exp();
    Ok(run_batches(&cfg, |rng| {
        let z: f64 = rng.sample(StandardNormal);
        discount * g.initial_value * (mean + sd * z).exp()
    }))
}

/// Whether a payoff estimate can be trusted at this number of paths.
///
/// The spot and gas levels are log-normal with log-variance σ²s over the
/// discounting horizon s ≈ 1/r_net; once that variance is large, the sample
/// mean of a few million paths is dominated by rare paths and badly
/// underestimates the expectation. Returns the offending process otherwise.
pub fn payoff_estimate_reliable(s: &MarketScenario, paths: usize) -> Result<(), String> {
    let rates = raw_net_rates(s);
    let budget = (paths as f64).ln() - 4.6;
    for (name, g, rate) in [
        ("spot_price", &s.spot_price, rates.spot),
        ("gas_price", &s.gas_price, rates.gas),
        ("purchase_price", &s.purchase_price, rates.purchase),
        ("demand", &s.demand, rates.demand),
    ] {
        let log_var = g.volatility * g.volatility * 3.0 / rate;
        if log_var > budget {
            return Err(format!(
                "{name}: log-variance {log_var:.3e} over the discounting horizon exceeds \
                 {budget:.2}, the most {paths} paths can resolve"
            ));
        }
    }
    Ok(())
}
