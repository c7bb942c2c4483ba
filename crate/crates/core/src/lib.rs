//! Two-member renewable energy community: a household with PV panels and a
//! biogas producer with a turbine share a self-consumption incentive Z paid
//! on min(production, demand). A coordinator picks the household's share β;
//! the members then choose their installations in a Nash equilibrium.
//!
//! The crate evaluates the closed-form incentive value ([`incentive`]),
//! payoffs ([`payoffs`]), best responses and equilibria ([`game`]), the Nash
//! bargaining split ([`bargaining`]), calibrates GBM parameters from hourly
//! data ([`calibration`]) and provides a Monte Carlo oracle for all of the
//! closed forms ([`simulation`]).
//!
//! ```
//! use recgame_core::{bargaining, model::CommunityModel, testing};
//!
//! let model = CommunityModel::new(testing::example2()).unwrap();
//! let solution = bargaining::solve_bargaining(&model, &Default::default()).unwrap();
//! assert_eq!(solution.beta_star, 0.5);
//! ```

pub mod bargaining;
pub mod calibration;
pub mod game;
pub mod incentive;
pub mod model;
pub mod payoffs;
pub mod scenario;
pub mod simulation;
#[doc(hidden)]
pub mod testing;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Incentive(#[from] incentive::IncentiveError),
    #[error(transparent)]
    Game(#[from] game::GameError),
}
