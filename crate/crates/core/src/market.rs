//! Market environment: geometric Brownian mid prices and the limit order
//! book impact model.
//!
//! Execution against the book is summarised by supply curves
//!
//! ```text
//! G_buy(s, x)  = s * ((1 + x)^alpha - 1)        alpha >= 1
//! G_sell(s, x) = s * ((1 + x)^beta  - 1)        0 < beta <= 1
//! ```
//!
//! so the cost of buying (revenue from selling) `x` shares when cumulative
//! depth `y` has already been consumed is `G(s, x + y) - G(s, y)`. The
//! consumed-depth states decay geometrically between rebalances with rates
//! `lambda_a`/`lambda_b`; `+inf` means impact vanishes immediately after
//! the trade and `0` means it is permanent.
//!
//! Everything here is generic over [`Real`] so the trainer can record the
//! exact same arithmetic on its tape.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::autodiff::Real;
use crate::output::fmt_f64;

/// Hard cap on `(horizon + 1) * n_paths` stored elements for batch
/// simulation; larger jobs should stream paths one at a time.
pub const MAX_PATH_ELEMENTS: usize = 100_000_000;

/// All exogenous market constants.
///
/// Rates are per the unit stated in each field name; `lambda_a`/`lambda_b`
/// accept `f64::INFINITY` for the no-persistence case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Annualized drift (1/year).
    pub mu: f64,
    /// Annualized volatility (1/sqrt(year)).
    pub sigma: f64,
    /// Initial mid price.
    pub s0: f64,
    /// Period length in years.
    pub dt: f64,
    /// Per-period risk-free rate; cash accrues by `e^r` each step.
    pub r: f64,
    /// Buy-side impact exponent (>= 1).
    pub alpha: f64,
    /// Sell-side impact exponent (in (0, 1]).
    pub beta: f64,
    /// Buy-side persistence decay rate per step (>= 0, may be infinite).
    pub lambda_a: f64,
    /// Sell-side persistence decay rate per step.
    pub lambda_b: f64,
    /// Initial buy-side persistence state (shares).
    pub a0: f64,
    /// Initial sell-side persistence state (shares).
    pub b0: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("invalid market parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "path storage budget exceeded: {requested} elements > {budget} \
         (reduce n_paths or the horizon, or stream paths instead)"
    )]
    StorageBudget { requested: usize, budget: usize },
}

impl MarketParams {
    /// Drift and volatility estimated on S&P 500 returns, monthly steps,
    /// strike-scale prices; the setting used throughout the experiments.
    pub fn monthly_sp500() -> Self {
        Self {
            mu: 0.0892,
            sigma: 0.1952,
            s0: 1000.0,
            dt: 1.0 / 12.0,
            r: 0.0,
            alpha: 1.0,
            beta: 1.0,
            lambda_a: f64::INFINITY,
            lambda_b: f64::INFINITY,
            a0: 0.0,
            b0: 0.0,
        }
    }

    pub fn with_impact(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn with_persistence(mut self, lambda_a: f64, lambda_b: f64) -> Self {
        self.lambda_a = lambda_a;
        self.lambda_b = lambda_b;
        self
    }

    pub fn with_drift(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// Annualized risk-free rate implied by the per-step rate.
    pub fn r_annualized(&self) -> f64 {
        self.r / self.dt
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(MarketError::InvalidParameter(msg.to_string()))
            }
        };
        check(self.mu.is_finite(), "mu must be finite")?;
        check(self.sigma.is_finite() && self.sigma >= 0.0, "sigma must be >= 0")?;
        check(self.s0.is_finite() && self.s0 > 0.0, "s0 must be > 0")?;
        check(self.dt.is_finite() && self.dt > 0.0, "dt must be > 0")?;
        check(self.r.is_finite(), "r must be finite")?;
        check(self.alpha.is_finite() && self.alpha >= 1.0, "alpha must be >= 1")?;
        check(
            self.beta.is_finite() && self.beta > 0.0 && self.beta <= 1.0,
            "beta must be in (0, 1]",
        )?;
        check(self.lambda_a >= 0.0, "lambda_a must be >= 0")?;
        check(self.lambda_b >= 0.0, "lambda_b must be >= 0")?;
        check(self.a0.is_finite() && self.a0 >= 0.0, "a0 must be >= 0")?;
        check(self.b0.is_finite() && self.b0 >= 0.0, "b0 must be >= 0")?;
        Ok(())
    }
}

/// Which side of the book a transaction consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Buy,
    Sell,
}

/// One simulated mid-price path together with the Gaussian draws that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    /// `S_0..S_T`, length `horizon + 1`.
    pub prices: Vec<f64>,
    /// Innovations `Z_1..Z_T`, length `horizon`.
    pub draws: Vec<f64>,
    /// Master seed the path batch was generated from.
    pub seed: u64,
}

impl PricePath {
    pub fn horizon(&self) -> usize {
        self.draws.len()
    }

    /// A fictitious path pinned at a constant price (used by the
    /// constant-price experiment; the draws are zero placeholders).
    pub fn constant(price: f64, horizon: usize) -> Self {
        assert!(price > 0.0);
        Self {
            prices: vec![price; horizon + 1],
            draws: vec![0.0; horizon],
            seed: 0,
        }
    }
}

/// Buy/sell persistence pair `(A_t, B_t)` carried between rebalances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactState<R> {
    pub a: R,
    pub b: R,
}

impl ImpactState<f64> {
    pub fn initial(params: &MarketParams) -> Self {
        Self {
            a: params.a0,
            b: params.b0,
        }
    }
}

impl<R: Real> ImpactState<R> {
    /// Lifts the initial state into the context of `witness` (a tape leaf
    /// for `Var`, a plain number for `f64`).
    pub fn initial_in(params: &MarketParams, witness: R) -> Self {
        Self {
            a: witness.constant(params.a0),
            b: witness.constant(params.b0),
        }
    }
}

/// One step of the log-Euler (exact) GBM recursion:
/// `S' = S * exp((mu - sigma^2/2) dt + sigma sqrt(dt) z)`.
pub fn gbm_step(prev_price: f64, params: &MarketParams, z: f64) -> f64 {
    assert!(
        prev_price.is_finite() && prev_price > 0.0 && z.is_finite(),
        "gbm_step requires finite inputs and a positive price"
    );
    let drift = (params.mu - 0.5 * params.sigma * params.sigma) * params.dt;
    prev_price * (drift + params.sigma * params.dt.sqrt() * z).exp()
}

/// RNG for path `stream` of the batch seeded by `seed`.
///
/// Stream splitting: one ChaCha stream per path, indexed by the path's
/// position, so batches are order-independent and any path can be
/// regenerated in isolation.
fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates the path at position `stream` of the batch seeded by `seed`.
pub fn simulate_path(params: &MarketParams, horizon: usize, seed: u64, stream: u64) -> PricePath {
    assert!(horizon >= 1, "horizon must be >= 1");
    let mut rng = path_rng(seed, stream);
    let mut prices = Vec::with_capacity(horizon + 1);
    let mut draws = Vec::with_capacity(horizon);
    prices.push(params.s0);
    let mut s = params.s0;
    for _ in 0..horizon {
        let z: f64 = StandardNormal.sample(&mut rng);
        s = gbm_step(s, params, z);
        draws.push(z);
        prices.push(s);
    }
    PricePath {
        prices,
        draws,
        seed,
    }
}

/// Simulates `n_paths` mutually independent paths. Deterministic in
/// `(params, horizon, n_paths, seed)`.
pub fn simulate_paths(
    params: &MarketParams,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PricePath>, MarketError> {
    assert!(horizon >= 1 && n_paths >= 1);
    params.validate()?;
    let requested = n_paths
        .checked_mul(horizon + 1)
        .unwrap_or(usize::MAX);
    if requested > MAX_PATH_ELEMENTS {
        return Err(MarketError::StorageBudget {
            requested,
            budget: MAX_PATH_ELEMENTS,
        });
    }
    Ok((0..n_paths)
        .map(|i| simulate_path(params, horizon, seed, i as u64))
        .collect())
}

/// Cumulative cost (buy) or revenue (sell) of transacting `x` shares from
/// an untouched book: `s * ((1 + x)^exponent - 1)`.
pub fn supply_curve<R: Real>(side: Side, s_t: f64, x: R, exponent: f64) -> R {
    debug_assert!(s_t > 0.0);
    assert!(
        x.value() >= 0.0,
        "supply_curve takes a nonnegative quantity; split signed trades first"
    );
    match side {
        Side::Buy => debug_assert!(exponent >= 1.0),
        Side::Sell => debug_assert!(exponent > 0.0 && exponent <= 1.0),
    }
    ((x + 1.0).powc(exponent) - 1.0) * s_t
}

/// Marginal book transaction on top of already-consumed depth `y`:
/// `G(s, x + y) - G(s, y)`.
pub fn impact_trade<R: Real>(side: Side, s_t: f64, y: R, x: R, exponent: f64) -> R {
    assert!(y.value() >= 0.0, "persistence state must be nonnegative");
    supply_curve(side, s_t, x + y, exponent) - supply_curve(side, s_t, y, exponent)
}

/// Persistence update after a signed trade `trade_delta`:
/// `a' = e^{-lambda_a} (a + dx^+)`, `b' = e^{-lambda_b} (b + dx^-)`.
///
/// Infinite rates short-circuit to an exact constant zero rather than
/// multiplying by `e^{-inf}`, which keeps NaNs out of recorded episodes.
pub fn persistence_step<R: Real>(
    state: &ImpactState<R>,
    trade_delta: R,
    params: &MarketParams,
) -> ImpactState<R> {
    let a = if params.lambda_a.is_infinite() {
        state.a.constant(0.0)
    } else {
        (state.a + trade_delta.pos_part()) * (-params.lambda_a).exp()
    };
    let b = if params.lambda_b.is_infinite() {
        state.b.constant(0.0)
    } else {
        (state.b + trade_delta.neg_part()) * (-params.lambda_b).exp()
    };
    ImpactState { a, b }
}

/// Writes a path batch as CSV with columns `path_id,t,s_t`.
pub fn write_paths_csv<W: Write>(paths: &[PricePath], mut w: W) -> std::io::Result<()> {
    writeln!(w, "path_id,t,s_t")?;
    for (id, path) in paths.iter().enumerate() {
        for (t, s) in path.prices.iter().enumerate() {
            writeln!(w, "{id},{t},{}", fmt_f64(*s))?;
        }
    }
    Ok(())
}
