//! Deep hedging of a European call option in a market with convex,
//! persistent price impact.
//!
//! The library simulates mid prices with a geometric Brownian motion,
//! models execution against a limit order book through supply curves with
//! exponentially decaying impact persistence, and unrolls a self-financing
//! hedging account over the option's life. Hedging policies come in two
//! flavours:
//!
//! * analytic baselines — Black-Scholes delta hedging and the Leland
//!   transaction-cost adjustment ([`baselines`]);
//! * a feedforward policy network trained by pathwise policy gradients
//!   through the whole episode, using the crate's own reverse-mode tape
//!   ([`autodiff`], [`policy`], [`trainer`]).
//!
//! Risk is measured by the semi-quadratic penalty `E[(max(0, R))^2]`,
//! which penalises losses only. Everything is seeded and deterministic:
//! the same configuration and seed reproduce checkpoints and CSV outputs
//! byte for byte.
//!
//! The `examples/` directory walks through every major capability; the
//! `impact-hedger` binary exposes the experiment runners in
//! [`experiments`] as subcommands.

pub mod account;
pub mod adam;
pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod market;
pub mod output;
pub mod policy;
pub mod trainer;

pub use account::{AccountState, EpisodeRecord, OptionSpec};
pub use autodiff::{Real, Tape, Var};
pub use baselines::BaselineKind;
pub use market::{ImpactState, MarketParams, PricePath, Side};
pub use policy::{Activation, PolicyParams};
pub use trainer::{RiskReport, TrainConfig, TrainResult};
