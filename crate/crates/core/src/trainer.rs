//! Policy-gradient training of the hedging network and out-of-sample
//! evaluation of policies and baselines.
//!
//! Each iteration simulates a minibatch of price paths, unrolls the
//! account along every path with the network choosing actions, scores the
//! batch with the semi-quadratic risk `mean(max(0, R)^2)` and takes one
//! Adam step on the exact pathwise gradient recorded by the tape. Prices
//! are constants of the recorded computation; actions, cash, impact states
//! and the settlement are differentiable end to end.
//!
//! Minibatches are fresh by default (`resample = true`); with
//! `resample = false` every iteration reuses the same seeded sample, which
//! turns the loop into full-batch descent on one empirical risk surface —
//! handy for pinning the optimum against a brute-force oracle.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::account::{run_episode, EpisodeError, EpisodeOutcome, OptionSpec};
use crate::adam::{adam_step, AdamError, AdamParams, AdamState};
use crate::autodiff::{gradient, GradientError, Real, Tape};
use crate::baselines::BaselineKind;
use crate::market::{simulate_path, ImpactState, MarketError, MarketParams, PricePath};
use crate::output::{fmt_f64, write_file};
use crate::policy::{ffnn_forward, Activation, Checkpoint, CheckpointError, PolicyParams, FEATURE_COUNT};

/// Normalized state vector fed to the policy:
/// `(t/T, log(S_t/K), A_t, B_t, X_t, V_t/V_0)`.
pub fn normalize_state<R: Real>(
    t: usize,
    horizon: usize,
    s_t: f64,
    impact: &ImpactState<R>,
    position: R,
    value: R,
    strike: f64,
    v0: f64,
) -> [R; FEATURE_COUNT] {
    assert!(v0 != 0.0, "premium must make V_0 nonzero");
    assert!(s_t > 0.0);
    [
        position.constant(t as f64 / horizon as f64),
        position.constant((s_t / strike).ln()),
        impact.a,
        impact.b,
        position,
        value / v0,
    ]
}

/// Differentiable clip of the action to `[-bound, bound]` built from
/// positive parts, so the gradient is zero outside the band.
fn clip_action<R: Real>(x: R, bound: f64) -> R {
    let minned = -((-x + bound).pos_part()) + bound;
    (minned + bound).pos_part() - bound
}

/// Unrolls one episode with the network driving the account, recording on
/// whatever numeric carrier `theta` lives on. Returns the differentiable
/// loss `R = -P_X` along with the float trace.
#[allow(clippy::too_many_arguments)]
pub fn rollout_episode<R: Real>(
    layer_sizes: &[usize],
    activation: Activation,
    theta: &[R],
    path: &PricePath,
    option: &OptionSpec,
    market: &MarketParams,
    clip_shares: Option<f64>,
    witness: R,
) -> Result<EpisodeOutcome<R>, EpisodeError> {
    assert!(option.premium > 0.0, "training requires a positive premium");
    let v0 = option.premium;
    let horizon = option.horizon;
    let strike = option.strike;
    run_episode(path, option, market, witness, |t, s_t, state, v_t| {
        let features = normalize_state(
            t,
            horizon,
            s_t,
            &state.impact,
            state.position,
            v_t,
            strike,
            v0,
        );
        let raw = ffnn_forward(layer_sizes, activation, theta, &features);
        match clip_shares {
            Some(bound) => clip_action(raw, bound),
            None => raw,
        }
    })
}

/// Semi-quadratic Monte-Carlo risk `mean_i (max(0, R_i))^2`. Gains are
/// never penalized; differentiable through the positive part.
pub fn semi_quadratic_risk<R: Real>(losses: &[R]) -> R {
    assert!(!losses.is_empty(), "risk of an empty batch is undefined");
    let mut acc = losses[0].constant(0.0);
    for &loss in losses {
        let clipped = loss.pos_part();
        acc = acc + clipped * clipped;
    }
    acc / losses.len() as f64
}

/// Full training configuration. Defaults reproduce the experiments at
/// desk scale: fresh minibatches of 256 paths, 5000 Adam iterations at
/// 1e-3 with a 0.5 decay every 2000, a 3x64 ReLU network and a +/-5-share
/// action guard.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub market: MarketParams,
    pub option: OptionSpec,
    pub batch_size: usize,
    pub n_iterations: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    /// Iterations between learning-rate decays; 0 disables the schedule.
    pub lr_decay_every: usize,
    pub seed: u64,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    /// Optional guard clipping actions to `[-clip, clip]` shares.
    pub clip_shares: Option<f64>,
    /// Fresh minibatch every iteration when true; one fixed seeded sample
    /// when false.
    pub resample: bool,
    /// Iterations between checkpoint files when an output directory is
    /// given; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(market: MarketParams, option: OptionSpec) -> Self {
        Self {
            market,
            option,
            batch_size: 256,
            n_iterations: 5000,
            lr: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 2000,
            seed: 42,
            hidden_layers: vec![64, 64, 64],
            activation: Activation::Relu,
            clip_shares: Some(5.0),
            resample: true,
            checkpoint_every: 500,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.market.validate()?;
        self.option.validate().map_err(TrainError::Config)?;
        if self.option.premium <= 0.0 {
            return Err(TrainError::Config(
                "premium must be positive (V_0 normalizes the state)".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(TrainError::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config("lr must be positive".into()));
        }
        if self.hidden_layers.iter().any(|&h| h == 0) {
            return Err(TrainError::Config("hidden layers must be nonempty".into()));
        }
        Ok(())
    }

    fn lr_at(&self, iteration: usize) -> f64 {
        if self.lr_decay_every == 0 {
            self.lr
        } else {
            self.lr
                * self
                    .lr_decay_factor
                    .powi((iteration / self.lr_decay_every) as i32)
        }
    }
}

/// Per-iteration training diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct IterationStats {
    pub iteration: usize,
    /// Batch risk under the pre-update parameters (NaN on aborted steps).
    pub rho_hat: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub policy: PolicyParams,
    pub adam: AdamState,
    pub history: Vec<IterationStats>,
    pub aborted_steps: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("{aborted} of {total} iterations aborted on non-finite values (limit 1%)")]
    TooManyAborted { aborted: usize, total: usize },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs the policy-gradient loop. With an output directory, writes
/// intermediate checkpoints, `checkpoint_final.txt` and
/// `training_log.csv` there. Deterministic in the configuration: the
/// returned policy and every checkpoint byte depend only on it.
pub fn train(config: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let horizon = config.option.horizon;
    let n = config.batch_size;

    let mut policy = PolicyParams::init(&config.hidden_layers, config.activation, config.seed);
    let mut adam = AdamState::zeros(policy.theta.len());
    let mut history = Vec::with_capacity(config.n_iterations);
    let mut aborted = 0usize;

    // The fixed-sample mode simulates its batch once up front.
    let fixed_sample: Option<Vec<PricePath>> = if config.resample {
        None
    } else {
        Some(
            (0..n)
                .map(|i| simulate_path(&config.market, horizon, config.seed, i as u64))
                .collect(),
        )
    };

    let tape = Tape::new();
    let mut losses = Vec::with_capacity(n);
    for j in 0..config.n_iterations {
        let started = Instant::now();
        tape.clear();
        losses.clear();
        let theta_vars = tape.leaves(&policy.theta);
        let witness = theta_vars[0];

        let mut failed = false;
        for i in 0..n {
            let owned;
            let path = match &fixed_sample {
                Some(paths) => &paths[i],
                None => {
                    let stream = (j * n + i) as u64;
                    owned = simulate_path(&config.market, horizon, config.seed, stream);
                    &owned
                }
            };
            match rollout_episode(
                &policy.layer_sizes,
                config.activation,
                &theta_vars,
                path,
                &config.option,
                &config.market,
                config.clip_shares,
                witness,
            ) {
                Ok(outcome) => losses.push(outcome.loss),
                Err(err) => {
                    eprintln!("iteration {j}: aborted ({err})");
                    failed = true;
                    break;
                }
            }
        }

        let mut stats = IterationStats {
            iteration: j,
            rho_hat: f64::NAN,
            grad_norm: f64::NAN,
            wall_ms: 0.0,
        };
        if !failed {
            let rho = semi_quadratic_risk(&losses);
            stats.rho_hat = rho.value();
            match gradient(&tape, rho, &theta_vars) {
                Ok(grad) => {
                    stats.grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                    let params = AdamParams {
                        lr: config.lr_at(j),
                        ..AdamParams::default()
                    };
                    match adam_step(&mut policy.theta, &grad, &mut adam, &params) {
                        Ok(()) => {}
                        Err(AdamError::NonFiniteGradient(i)) => {
                            eprintln!("iteration {j}: aborted (non-finite gradient at {i})");
                            failed = true;
                        }
                        Err(e @ AdamError::ShapeMismatch { .. }) => {
                            unreachable!("gradient shape is fixed: {e}")
                        }
                    }
                }
                Err(err @ (GradientError::NonFiniteLoss(_) | GradientError::NonFiniteAdjoint { .. })) => {
                    eprintln!("iteration {j}: aborted ({err})");
                    failed = true;
                }
            }
        }
        if failed {
            aborted += 1;
        }
        stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        history.push(stats);

        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && (j + 1) % config.checkpoint_every == 0 {
                let ck = Checkpoint::new(policy.clone(), adam.clone(), config.seed);
                std::fs::create_dir_all(dir)?;
                ck.save(&dir.join(format!("checkpoint_{:06}.txt", j + 1)))?;
            }
        }
    }

    if aborted * 100 > config.n_iterations {
        return Err(TrainError::TooManyAborted {
            aborted,
            total: config.n_iterations,
        });
    }

    if let Some(dir) = out_dir {
        let ck = Checkpoint::new(policy.clone(), adam.clone(), config.seed);
        std::fs::create_dir_all(dir)?;
        ck.save(&dir.join("checkpoint_final.txt"))?;
        write_file(dir, "training_log.csv", &render_training_log(&history))?;
    }

    Ok(TrainResult {
        policy,
        adam,
        history,
        aborted_steps: aborted,
    })
}

/// Training log CSV: `iteration,rho_hat,grad_norm,wall_ms`. The timing
/// column is wall-clock and is the one part of a run that legitimately
/// differs between reruns.
pub fn render_training_log(history: &[IterationStats]) -> String {
    let mut out = String::from("iteration,rho_hat,grad_norm,wall_ms\n");
    for s in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.iteration,
            fmt_f64(s.rho_hat),
            fmt_f64(s.grad_norm),
            fmt_f64(s.wall_ms)
        ));
    }
    out
}

/// What to run through the evaluation harness.
pub enum Strategy<'a> {
    /// Trained network plus the action guard it was trained with.
    Policy {
        params: &'a PolicyParams,
        clip_shares: Option<f64>,
    },
    Baseline(BaselineKind),
}

impl Strategy<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Policy { .. } => "drl",
            Strategy::Baseline(kind) => kind.label(),
        }
    }

    /// Plain-float action at an arbitrary decision state.
    #[allow(clippy::too_many_arguments)]
    pub fn action(
        &self,
        t: usize,
        s_t: f64,
        impact: &ImpactState<f64>,
        position: f64,
        value: f64,
        option: &OptionSpec,
        market: &MarketParams,
    ) -> f64 {
        match self {
            Strategy::Baseline(kind) => kind.action(s_t, t, option, market),
            Strategy::Policy {
                params,
                clip_shares,
            } => {
                let features = normalize_state(
                    t,
                    option.horizon,
                    s_t,
                    impact,
                    position,
                    value,
                    option.strike,
                    option.premium,
                );
                let raw = params.forward(&features);
                match clip_shares {
                    Some(bound) => clip_action(raw, *bound),
                    None => raw,
                }
            }
        }
    }
}

/// Out-of-sample summary over a common-seed test set.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub label: String,
    /// Semi-quadratic risk estimate.
    pub rho_hat: f64,
    pub mean_profit: f64,
    pub std_profit: f64,
    /// Mean total absolute position adjustment per path.
    pub mean_turnover: f64,
    /// Mean cost in excess of frictionless mid-price execution.
    pub mean_excess_cost: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Evaluates a strategy on `n_paths` fresh paths generated from `seed`
/// (streams `0..n_paths`, so every strategy sees identical prices).
/// Streams paths one at a time; memory stays flat in `n_paths`.
pub fn evaluate(
    strategy: &Strategy<'_>,
    n_paths: usize,
    seed: u64,
    market: &MarketParams,
    option: &OptionSpec,
) -> RiskReport {
    assert!(n_paths >= 1);
    market.validate().expect("valid market parameters");
    let mut sum_sq_loss = 0.0;
    let mut sum_profit = 0.0;
    let mut sum_profit_sq = 0.0;
    let mut sum_turnover = 0.0;
    let mut sum_excess = 0.0;
    for i in 0..n_paths {
        let path = simulate_path(market, option.horizon, seed, i as u64);
        let outcome = run_episode(&path, option, market, 0.0f64, |t, s_t, state, v_t| {
            strategy.action(t, s_t, &state.impact, state.position, v_t, option, market)
        })
        .expect("finite evaluation episode");
        let record = outcome.record;
        let loss = record.loss();
        sum_sq_loss += loss.max(0.0) * loss.max(0.0);
        sum_profit += record.profit;
        sum_profit_sq += record.profit * record.profit;
        sum_turnover += record.turnover();
        sum_excess += record.excess_cost();
    }
    let n = n_paths as f64;
    let mean_profit = sum_profit / n;
    let var = if n_paths > 1 {
        ((sum_profit_sq - n * mean_profit * mean_profit) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    RiskReport {
        label: strategy.label().to_string(),
        rho_hat: sum_sq_loss / n,
        mean_profit,
        std_profit: var.sqrt(),
        mean_turnover: sum_turnover / n,
        mean_excess_cost: sum_excess / n,
        n_paths,
        seed,
    }
}

/// Renders risk reports as one CSV row per strategy.
pub fn render_risk_reports(reports: &[RiskReport]) -> String {
    let mut out = String::from(
        "strategy,rho_hat,mean_profit,std_profit,mean_turnover,mean_excess_cost,n_paths,seed\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label,
            fmt_f64(r.rho_hat),
            fmt_f64(r.mean_profit),
            fmt_f64(r.std_profit),
            fmt_f64(r.mean_turnover),
            fmt_f64(r.mean_excess_cost),
            r.n_paths,
            r.seed
        ));
    }
    out
}

/// Convenience: the DRL report next to both baseline reports on the same
/// test set, Leland calibrated from the market's sell-side exponent.
pub fn evaluate_against_baselines(
    policy: &PolicyParams,
    clip_shares: Option<f64>,
    n_paths: usize,
    seed: u64,
    market: &MarketParams,
    option: &OptionSpec,
) -> Vec<RiskReport> {
    let drl = Strategy::Policy {
        params: policy,
        clip_shares,
    };
    let bs = Strategy::Baseline(BaselineKind::BlackScholes);
    let leland = Strategy::Baseline(BaselineKind::leland_calibrated(market.beta));
    vec![
        evaluate(&drl, n_paths, seed, market, option),
        evaluate(&bs, n_paths, seed, market, option),
        evaluate(&leland, n_paths, seed, market, option),
    ]
}
