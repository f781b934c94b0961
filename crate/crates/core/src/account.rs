//! Self-financing hedging account: trade execution against the impact
//! model, the cash recursion, portfolio valuation and option settlement.
//!
//! Timeline convention: the action chosen at decision time `t` sets
//! `X_{t+1}`. Its cost is priced on the pre-trade persistence states
//! `(A_t, B_t)` at the current price `S_t`; the persistence states then
//! absorb the trade and decay once before the next decision. Cash accrues
//! by `e^r` per period, so after the final rebalance the account holds
//! `M_T`. Settlement unwinds the terminal position net of the exercise
//! delivery.
//!
//! All transitions are generic over [`Real`], so the trainer can record an
//! entire episode on a tape while baselines run the identical arithmetic
//! on plain floats.

use std::io::Write;

use thiserror::Error;

use crate::autodiff::Real;
use crate::baselines::bs_call_price;
use crate::market::{impact_trade, persistence_step, ImpactState, MarketParams, PricePath, Side};
use crate::output::fmt_f64;

/// The hedged instrument: a European call plus the premium received for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    /// Number of rebalancing periods until expiry.
    pub horizon: usize,
    /// Premium received at `t = 0`; seeds the cash account.
    pub premium: f64,
}

impl OptionSpec {
    /// Premium set to the Black-Scholes value of the call under `market`
    /// (maturity `horizon * dt`, the annualized risk-free rate implied by
    /// the per-step rate).
    pub fn with_bs_premium(strike: f64, horizon: usize, market: &MarketParams) -> Self {
        let maturity = horizon as f64 * market.dt;
        let premium = bs_call_price(
            market.s0,
            strike,
            market.r_annualized(),
            market.sigma,
            maturity,
        );
        Self {
            strike,
            horizon,
            premium,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err("strike must be > 0".into());
        }
        if self.horizon < 1 {
            return Err("horizon must be >= 1".into());
        }
        if !(self.premium.is_finite() && self.premium >= 0.0) {
            return Err("premium must be >= 0".into());
        }
        Ok(())
    }
}

/// Hedger state between decision times.
#[derive(Debug, Clone, Copy)]
pub struct AccountState<R> {
    /// Current decision time.
    pub t: usize,
    /// Position `X_t` held over `(t-1, t]`.
    pub position: R,
    /// Total shares bought since initiation.
    pub cum_buys: R,
    /// Total shares sold since initiation.
    pub cum_sells: R,
    /// Cash `M_t`, pre-rebalance convention.
    pub cash: R,
    pub impact: ImpactState<R>,
}

impl AccountState<f64> {
    pub fn new(option: &OptionSpec, params: &MarketParams) -> Self {
        Self::new_in(option, params, 0.0)
    }
}

impl<R: Real> AccountState<R> {
    /// Fresh account in the numeric context of `witness`: no position,
    /// cash equal to the premium, initial persistence states.
    pub fn new_in(option: &OptionSpec, params: &MarketParams, witness: R) -> Self {
        Self {
            t: 0,
            position: witness.constant(0.0),
            cum_buys: witness.constant(0.0),
            cum_sells: witness.constant(0.0),
            cash: witness.constant(option.premium),
            impact: ImpactState::initial_in(params, witness),
        }
    }
}

/// Signed cash amount of rebalancing by `trade_delta` at price `s_t`:
/// buy cost minus sell revenue, priced on the current persistence states.
/// Positive values are outflows.
pub fn transaction_amount<R: Real>(
    s_t: f64,
    impact: &ImpactState<R>,
    trade_delta: R,
    params: &MarketParams,
) -> R {
    let buy = impact_trade(Side::Buy, s_t, impact.a, trade_delta.pos_part(), params.alpha);
    let sell = impact_trade(
        Side::Sell,
        s_t,
        impact.b,
        trade_delta.neg_part(),
        params.beta,
    );
    buy - sell
}

/// Executes the decision `new_position` at time `t`, returning the next
/// state and the transaction amount `c_t`.
pub fn rebalance<R: Real>(
    state: &AccountState<R>,
    s_t: f64,
    new_position: R,
    params: &MarketParams,
) -> (AccountState<R>, R) {
    assert!(
        new_position.value().is_finite(),
        "rebalance rejects non-finite positions"
    );
    let delta = new_position - state.position;
    let cost = transaction_amount(s_t, &state.impact, delta, params);
    let cash = (state.cash - cost) * params.r.exp();
    let impact = persistence_step(&state.impact, delta, params);
    (
        AccountState {
            t: state.t + 1,
            position: new_position,
            cum_buys: state.cum_buys + delta.pos_part(),
            cum_sells: state.cum_sells + delta.neg_part(),
            cash,
            impact,
        },
        cost,
    )
}

/// 0/1 indicator of exercise: the holder exercises iff selling one share
/// under impact beats the strike, `F_sell(S_T, B_T, 1) > K` (strict).
pub fn exercise_indicator<R: Real>(
    s_terminal: f64,
    impact: &ImpactState<R>,
    strike: f64,
    params: &MarketParams,
) -> R {
    let one = impact.b.constant(1.0);
    let revenue = impact_trade(Side::Sell, s_terminal, impact.b, one, params.beta);
    (revenue - strike).gt_zero()
}

/// Boolean form of [`exercise_indicator`] for plain-float callers.
pub fn exercise_event(
    s_terminal: f64,
    impact: &ImpactState<f64>,
    strike: f64,
    params: &MarketParams,
) -> bool {
    exercise_indicator(s_terminal, impact, strike, params) > 0.5
}

/// Total profit right after maturity: unwinds the terminal position net of
/// the delivered share and collects the strike when exercised.
pub fn settle<R: Real>(
    state: &AccountState<R>,
    s_terminal: f64,
    strike: f64,
    params: &MarketParams,
) -> R {
    let e = exercise_indicator(s_terminal, &state.impact, strike, params);
    let leftover = (state.position - e).pos_part();
    let shortfall = (e - state.position).pos_part();
    let sale = impact_trade(Side::Sell, s_terminal, state.impact.b, leftover, params.beta);
    let purchase = impact_trade(Side::Buy, s_terminal, state.impact.a, shortfall, params.alpha);
    sale - purchase + state.cash + e * strike
}

/// Mark-to-liquidation portfolio value
/// `V_t = M_t + F_sell(S_t, B_t, X_t^+) - F_buy(S_t, A_t, X_t^-)`.
pub fn portfolio_value<R: Real>(state: &AccountState<R>, s_t: f64, params: &MarketParams) -> R {
    let long = impact_trade(
        Side::Sell,
        s_t,
        state.impact.b,
        state.position.pos_part(),
        params.beta,
    );
    let short = impact_trade(
        Side::Buy,
        s_t,
        state.impact.a,
        state.position.neg_part(),
        params.alpha,
    );
    state.cash + long - short
}

/// Plain-float trace of one hedging episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub path: PricePath,
    /// Positions `X_1..X_T` chosen at decision times `0..T-1`.
    pub actions: Vec<f64>,
    /// Transaction amounts `c_0..c_{T-1}`.
    pub costs: Vec<f64>,
    /// Cash `M_0..M_T`.
    pub cash: Vec<f64>,
    /// Portfolio values `V_0..V_T` (terminal value marked pre-settlement).
    pub values: Vec<f64>,
    /// Buy-side persistence `A_0..A_T`.
    pub impact_a: Vec<f64>,
    /// Sell-side persistence `B_0..B_T`.
    pub impact_b: Vec<f64>,
    /// Terminal profit `P_X`.
    pub profit: f64,
}

impl EpisodeRecord {
    /// Loss `R = -P_X`.
    pub fn loss(&self) -> f64 {
        -self.profit
    }

    pub fn terminal_cash(&self) -> f64 {
        *self.cash.last().unwrap()
    }

    /// Total absolute position adjustment over the hedge's life.
    pub fn turnover(&self) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for &x in &self.actions {
            total += (x - prev).abs();
            prev = x;
        }
        total
    }

    /// Cost paid in excess of frictionless mid-price execution,
    /// `sum_t (c_t - S_t * dX_{t+1})`.
    pub fn excess_cost(&self) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for (t, &x) in self.actions.iter().enumerate() {
            total += self.costs[t] - self.path.prices[t] * (x - prev);
            prev = x;
        }
        total
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: &'static str },
}

/// Result of unrolling one episode in numeric context `R`.
pub struct EpisodeOutcome<R> {
    /// Differentiable loss `R = -P_X`.
    pub loss: R,
    pub profit: R,
    pub record: EpisodeRecord,
}

/// Unrolls a full hedging episode along `path`, asking `act` for each
/// decision. The callback receives the decision time, the current price,
/// the account state and the current portfolio value, and returns the next
/// position `X_{t+1}`.
pub fn run_episode<R: Real, F>(
    path: &PricePath,
    option: &OptionSpec,
    params: &MarketParams,
    witness: R,
    mut act: F,
) -> Result<EpisodeOutcome<R>, EpisodeError>
where
    F: FnMut(usize, f64, &AccountState<R>, R) -> R,
{
    let horizon = option.horizon;
    assert_eq!(
        path.horizon(),
        horizon,
        "path length must match the option horizon"
    );
    let mut state = AccountState::new_in(option, params, witness);
    let mut record = EpisodeRecord {
        path: path.clone(),
        actions: Vec::with_capacity(horizon),
        costs: Vec::with_capacity(horizon),
        cash: Vec::with_capacity(horizon + 1),
        values: Vec::with_capacity(horizon + 1),
        impact_a: Vec::with_capacity(horizon + 1),
        impact_b: Vec::with_capacity(horizon + 1),
        profit: f64::NAN,
    };

    for t in 0..horizon {
        let s_t = path.prices[t];
        let v_t = portfolio_value(&state, s_t, params);
        record.cash.push(state.cash.value());
        record.values.push(v_t.value());
        record.impact_a.push(state.impact.a.value());
        record.impact_b.push(state.impact.b.value());

        let action = act(t, s_t, &state, v_t);
        if !action.value().is_finite() {
            return Err(EpisodeError::NonFinite { step: t, what: "action" });
        }
        let (next, cost) = rebalance(&state, s_t, action, params);
        if !cost.value().is_finite() || !next.cash.value().is_finite() {
            return Err(EpisodeError::NonFinite { step: t, what: "cash" });
        }
        record.actions.push(action.value());
        record.costs.push(cost.value());
        state = next;
    }

    let s_terminal = path.prices[horizon];
    record.cash.push(state.cash.value());
    record
        .values
        .push(portfolio_value(&state, s_terminal, params).value());
    record.impact_a.push(state.impact.a.value());
    record.impact_b.push(state.impact.b.value());

    let profit = settle(&state, s_terminal, option.strike, params);
    if !profit.value().is_finite() {
        return Err(EpisodeError::NonFinite {
            step: horizon,
            what: "settlement",
        });
    }
    record.profit = profit.value();
    Ok(EpisodeOutcome {
        loss: -profit,
        profit,
        record,
    })
}

/// Writes episode records as CSV. One row per time step and path;
/// action/cost cells are empty on the terminal row, which carries `P_X`.
pub fn write_episodes_csv<W: Write>(records: &[EpisodeRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "path_id,t,s_t,x_next,cost,cash,value,impact_a,impact_b,profit")?;
    for (id, rec) in records.iter().enumerate() {
        let horizon = rec.actions.len();
        for t in 0..=horizon {
            let (x_next, cost, profit) = if t < horizon {
                (fmt_f64(rec.actions[t]), fmt_f64(rec.costs[t]), String::new())
            } else {
                (String::new(), String::new(), fmt_f64(rec.profit))
            };
            writeln!(
                w,
                "{id},{t},{},{x_next},{cost},{},{},{},{},{profit}",
                fmt_f64(rec.path.prices[t]),
                fmt_f64(rec.cash[t]),
                fmt_f64(rec.values[t]),
                fmt_f64(rec.impact_a[t]),
                fmt_f64(rec.impact_b[t]),
            )?;
        }
    }
    Ok(())
}
