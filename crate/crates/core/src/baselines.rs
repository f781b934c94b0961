//! Analytic benchmark strategies: Black-Scholes delta hedging and the
//! Leland volatility adjustment for proportional costs, plus the
//! calibration that maps the sell-side impact exponent to Leland's cost
//! rate `k`.
//!
//! The normal CDF is computed in-house so CSV outputs are bit-stable
//! across platforms: a divergence-free power series below `|x| = 5.5` and
//! the Mills-ratio continued fraction in the tails. Absolute error is well
//! under 1e-14 on `[-8, 8]` and `phi(-x) + phi(x) = 1` holds to machine
//! precision by construction.

use crate::account::{run_episode, EpisodeRecord, OptionSpec};
use crate::market::{MarketParams, PricePath};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    assert!(x.is_finite());
    let t = x.abs();
    let lower = if t < 5.5 {
        // phi(t) * sum_{n>=0} t^(2n+1) / (1*3*...*(2n+1)) = Phi(t) - 1/2,
        // all terms positive.
        let mut term = t;
        let mut sum = t;
        let mut odd = 1.0;
        while term > sum * 1e-18 {
            odd += 2.0;
            term *= t * t / odd;
            sum += term;
        }
        0.5 - density(t) * sum
    } else {
        // Mills ratio continued fraction: Phi(-t)/phi(t) =
        // 1/(t + 1/(t + 2/(t + 3/(...)))), evaluated bottom-up.
        let mut f = t;
        for k in (1..=40u32).rev() {
            f = t + f64::from(k) / f;
        }
        density(t) / f
    };
    if x >= 0.0 {
        1.0 - lower
    } else {
        lower
    }
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / std::f64::consts::TAU.sqrt()
}

/// Black-Scholes hedge ratio `Phi(d1)` with `steps_remaining * dt` years
/// to maturity.
pub fn bs_delta(
    s_t: f64,
    strike: f64,
    r_annualized: f64,
    sigma: f64,
    steps_remaining: usize,
    dt: f64,
) -> f64 {
    assert!(steps_remaining >= 1, "settle instead of hedging at expiry");
    assert!(s_t > 0.0 && strike > 0.0 && sigma > 0.0);
    let tau = steps_remaining as f64 * dt;
    let d1 = ((s_t / strike).ln() + (r_annualized + 0.5 * sigma * sigma) * tau)
        / (sigma * tau.sqrt());
    norm_cdf(d1)
}

/// Black-Scholes price of a European call.
pub fn bs_call_price(s: f64, strike: f64, r_annualized: f64, sigma: f64, maturity: f64) -> f64 {
    assert!(s > 0.0 && strike > 0.0 && maturity >= 0.0 && sigma >= 0.0);
    let vol = sigma * maturity.sqrt();
    if vol == 0.0 {
        return (s - strike * (-r_annualized * maturity).exp()).max(0.0);
    }
    let d1 = ((s / strike).ln() + (r_annualized + 0.5 * sigma * sigma) * maturity) / vol;
    let d2 = d1 - vol;
    s * norm_cdf(d1) - strike * (-r_annualized * maturity).exp() * norm_cdf(d2)
}

/// Proportional cost rate matching the sell-side book: solves
/// `S0 (1 - k) = F_sell(S0, 0, 1)`, i.e. `k = 2 - 2^beta`.
pub fn calibrate_k(beta: f64) -> f64 {
    assert!(beta > 0.0 && beta <= 1.0);
    2.0 - 2.0f64.powf(beta)
}

/// Buy-side alternative: solves `S0 (1 + k) = F_buy(S0, 0, 1)`, i.e.
/// `k = 2^alpha - 2`. Exposed as a config override.
pub fn calibrate_k_buy_side(alpha: f64) -> f64 {
    assert!(alpha >= 1.0);
    2.0f64.powf(alpha) - 2.0
}

/// Leland's adjusted volatility
/// `sigma * sqrt(1 + sqrt(2/pi) * k / (sigma * sqrt(dt)))`.
pub fn leland_sigma(sigma: f64, k: f64, dt: f64) -> f64 {
    assert!(sigma > 0.0 && dt > 0.0 && k >= 0.0);
    let load = (2.0 / std::f64::consts::PI).sqrt() * k / (sigma * dt.sqrt());
    sigma * (1.0 + load).sqrt()
}

/// Which analytic benchmark to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    BlackScholes,
    Leland { k: f64 },
}

impl BaselineKind {
    /// Leland with `k` calibrated from the sell-side exponent.
    pub fn leland_calibrated(beta: f64) -> Self {
        let k = calibrate_k(beta);
        assert!((0.0..1.0).contains(&k));
        Self::Leland { k }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::BlackScholes => "black_scholes",
            Self::Leland { .. } => "leland",
        }
    }

    fn effective_sigma(&self, market: &MarketParams) -> f64 {
        match self {
            Self::BlackScholes => market.sigma,
            Self::Leland { k } => leland_sigma(market.sigma, *k, market.dt),
        }
    }

    /// Position for decision time `t`. Baselines read only the price and
    /// the time; impact states and the portfolio value never enter.
    pub fn action(&self, s_t: f64, t: usize, option: &OptionSpec, market: &MarketParams) -> f64 {
        bs_delta(
            s_t,
            option.strike,
            market.r_annualized(),
            self.effective_sigma(market),
            option.horizon - t,
            market.dt,
        )
    }
}

/// Runs a baseline through the hedging account along `path`.
pub fn baseline_rollout(
    kind: BaselineKind,
    path: &PricePath,
    option: &OptionSpec,
    params: &MarketParams,
) -> EpisodeRecord {
    let outcome = run_episode(path, option, params, 0.0f64, |t, s_t, _, _| {
        kind.action(s_t, t, option, params)
    })
    .expect("baseline actions are finite");
    outcome.record
}
