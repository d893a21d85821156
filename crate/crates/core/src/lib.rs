//! Calibration, simulation and auditing of the innkeeper mediator.
//!
//! The innkeeper is a recommendation mechanism for a two-armed bandit
//! played by a stream of myopic agents, each of whom sees only the arm and
//! reward of the agent right before it. The mediator recommends, signals
//! its phase, and pays a small subsidy for switch recommendations. With the
//! right constants it is incentive compatible, spends at most β, and
//! reaches a (1 − ε) fraction of the best arm's value.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: environment parameters, arms, messages, realized utility.
//! - [`beliefs`]: exact pre-intervention posteriors and end-of-phase events.
//! - [`calibration`]: K, n̂, N′, the subsidy and the coin bias δ.
//! - [`mediator`]: the phase state machine.
//! - [`agents`]: compliant and scripted-deviant strategies.
//! - [`engine`]: seeded single runs and trace output.
//! - [`harness`]: Monte Carlo aggregation, IC audit and statistical checks.
//! - [`cli`]: the `innkeeper` command-line front end.
//!
//! ```
//! use innkeeper::{calibration, model::ModelParams};
//!
//! let model = ModelParams::new(0.5, 0.8, 0.3, 0.5);
//! let cal = calibration::calibrate(&model, 0.1, 1.0).unwrap();
//! assert_eq!((cal.params.k, cal.params.n_hat, cal.params.n_prime), (135, 3375, 70200));
//! ```

pub mod agents;
pub mod beliefs;
pub mod calibration;
pub mod cli;
pub mod engine;
pub mod error;
pub mod harness;
pub mod mediator;
pub mod model;

pub use error::{Error, Result};
