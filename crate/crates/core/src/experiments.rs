//! Seeded experiment runners emitting CSVs for external plotting: the
//! policy surface, hedging paths across impact levels, the constant-price
//! drift comparison and the pin-risk persistence study, plus the `train`
//! and `evaluate` commands the experiments build on.
//!
//! Every runner is a pure function of `(config, seed, checkpoints)` and
//! writes a `manifest.conf` beside its CSVs holding the fully resolved
//! configuration and the SHA-256 of every checkpoint it touched; rerunning
//! from the manifest reproduces the outputs byte for byte.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::account::{write_episodes_csv, EpisodeRecord, OptionSpec};
use crate::baselines::{calibrate_k_buy_side, BaselineKind};
use crate::config::{
    market_entries, option_entries, train_config_from, train_entries, ConfigError, ConfigFile,
};
use crate::market::{simulate_path, MarketParams, PricePath};
use crate::output::{fmt_f64, Csv, Manifest};
use crate::policy::{Checkpoint, CheckpointError, PolicyParams};
use crate::trainer::{
    evaluate, render_risk_reports, train, RiskReport, Strategy, TrainError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing checkpoint `{path}`: {hint}")]
    MissingCheckpoint { path: String, hint: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn load_checkpoint(path: &Path, hint: &str) -> Result<Checkpoint, ExperimentError> {
    if !path.exists() {
        return Err(ExperimentError::MissingCheckpoint {
            path: path.display().to_string(),
            hint: hint.to_string(),
        });
    }
    Ok(Checkpoint::load(path)?)
}

/// One market-impact scenario with the policy trained for it.
struct Level {
    alpha: f64,
    beta: f64,
    checkpoint_path: PathBuf,
    policy: PolicyParams,
}

/// Reads `"{section}.level.{i}.{alpha,beta,checkpoint}"`, defaulting
/// alpha/beta to the canonical liquidity ladder.
fn impact_levels(
    cfg: &ConfigFile,
    section: &str,
    defaults: &[(f64, f64)],
) -> Result<Vec<Level>, ExperimentError> {
    defaults
        .iter()
        .enumerate()
        .map(|(i, &(da, db))| {
            let alpha = cfg.f64_or(&format!("{section}.level.{i}.alpha"), da)?;
            let beta = cfg.f64_or(&format!("{section}.level.{i}.beta"), db)?;
            let key = format!("{section}.level.{i}.checkpoint");
            let path = cfg.path(&key).ok_or_else(|| {
                ExperimentError::MissingCheckpoint {
                    path: format!("<{key}>"),
                    hint: format!(
                        "train a policy with market.alpha = {alpha}, market.beta = {beta} \
                         and set {key} to its checkpoint_final.txt"
                    ),
                }
            })?;
            let ck = load_checkpoint(
                &path,
                &format!(
                    "required by {key}; train with market.alpha = {alpha}, market.beta = {beta}"
                ),
            )?;
            Ok(Level {
                alpha,
                beta,
                checkpoint_path: path,
                policy: ck.policy,
            })
        })
        .collect()
}

/// Resolves the `baselines.leland_k` override: `auto` (sell-side
/// calibration, the default), `buy_side`, or an explicit number.
fn leland_for(cfg: &ConfigFile, alpha: f64, beta: f64) -> Result<BaselineKind, ExperimentError> {
    let mode = cfg
        .string("baselines.leland_k")
        .unwrap_or_else(|| "auto".into());
    let kind = match mode.as_str() {
        "auto" => BaselineKind::leland_calibrated(beta),
        "buy_side" => BaselineKind::Leland {
            k: calibrate_k_buy_side(alpha),
        },
        other => {
            let k: f64 = other.parse().map_err(|e| ConfigError::Invalid {
                key: "baselines.leland_k".into(),
                msg: format!("expected auto|buy_side|<number>: {e}"),
            })?;
            BaselineKind::Leland { k }
        }
    };
    Ok(kind)
}

fn clip_from(cfg: &ConfigFile) -> Result<Option<f64>, ExperimentError> {
    Ok(match cfg.string("train.clip_shares") {
        None => Some(5.0),
        Some(ref v) if v == "none" => None,
        Some(v) => Some(v.parse::<f64>().map_err(|e| ConfigError::Invalid {
            key: "train.clip_shares".into(),
            msg: format!("{e}"),
        })?),
    })
}

fn column_suffix(alpha: f64, beta: f64) -> String {
    format!("a{alpha}_b{beta}")
}

/// `train` command: runs the configured training loop, writing checkpoints
/// and the training log under `out`.
pub fn run_train(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let config = train_config_from(cfg, seed_override)?;
    cfg.finish()?;
    train(&config, Some(out))?;
    let final_path = out.join("checkpoint_final.txt");

    let mut manifest = Manifest::new("train");
    manifest.set("run.seed", config.seed);
    manifest.extend_config(&train_entries(&config));
    manifest.checkpoint_hash("produced.checkpoint_final", &final_path)?;
    manifest.write_to(out)?;
    Ok(vec![final_path, out.join("training_log.csv")])
}

/// `evaluate` command: common-seed risk report for a trained policy next
/// to both baselines.
pub fn run_evaluate(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let market = crate::config::market_from(cfg)?;
    let option = crate::config::option_from(cfg, &market)?;
    let clip = clip_from(cfg)?;
    let ck_path = cfg.path("evaluate.checkpoint").ok_or_else(|| {
        ExperimentError::MissingCheckpoint {
            path: "<evaluate.checkpoint>".into(),
            hint: "set evaluate.checkpoint to a checkpoint produced by `train`".into(),
        }
    })?;
    let n_paths = cfg.usize_or("evaluate.n_paths", 100_000)?;
    let seed = match seed_override {
        Some(s) => s,
        None => cfg.u64_or("evaluate.seed", 4242)?,
    };
    let leland = leland_for(cfg, market.alpha, market.beta)?;
    cfg.finish()?;

    let ck = load_checkpoint(&ck_path, "produced by a `train` run with this market section")?;
    let reports: Vec<RiskReport> = vec![
        evaluate(
            &Strategy::Policy {
                params: &ck.policy,
                clip_shares: clip,
            },
            n_paths,
            seed,
            &market,
            &option,
        ),
        evaluate(
            &Strategy::Baseline(BaselineKind::BlackScholes),
            n_paths,
            seed,
            &market,
            &option,
        ),
        evaluate(&Strategy::Baseline(leland), n_paths, seed, &market, &option),
    ];
    let csv_path = {
        std::fs::create_dir_all(out)?;
        let path = out.join("risk_report.csv");
        std::fs::write(&path, render_risk_reports(&reports))?;
        path
    };

    let mut manifest = Manifest::new("evaluate");
    manifest.set("run.seed", seed);
    manifest.extend_config(&market_entries(&market));
    manifest.extend_config(&option_entries(&option));
    manifest.set("evaluate.checkpoint", ck_path.display());
    manifest.set("evaluate.n_paths", n_paths);
    manifest.set("evaluate.seed", seed);
    manifest.checkpoint_hash("evaluate.checkpoint", &ck_path)?;
    manifest.write_to(out)?;
    Ok(vec![csv_path])
}

/// Policy surface at mid-horizon: positions as a function of the price and
/// the portfolio value, frictionless vs. impacted, against both baselines.
/// The previous position is held fixed and persistence states are zero.
pub fn run_policy_surface(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let market = crate::config::market_from(cfg)?;
    let option = crate::config::option_from(cfg, &market)?;
    let clip = clip_from(cfg)?;
    let leland_mode = cfg_leland(cfg)?;
    let levels = impact_levels(cfg, "surface", &[(1.0, 1.0), (1.01, 0.99)])?;
    let t = cfg.usize_or("surface.time_step", option.horizon / 2)?;
    let prev_position = cfg.f64_or("surface.prev_position", 0.5)?;
    let s_min = cfg.f64_or("surface.s_min", 600.0)?;
    let s_max = cfg.f64_or("surface.s_max", 1400.0)?;
    let s_count = cfg.usize_or("surface.s_count", 81)?;
    let v_count = cfg.usize_or("surface.v_count", 5)?;
    let v_min_frac = cfg.f64_or("surface.v_min_frac", 0.5)?;
    let v_max_frac = cfg.f64_or("surface.v_max_frac", 1.5)?;
    let seed = seed_override.unwrap_or(0);
    cfg.finish()?;
    if t >= option.horizon || s_count < 2 || v_count < 1 {
        return Err(ConfigError::Invalid {
            key: "surface".into(),
            msg: "need time_step < horizon, s_count >= 2, v_count >= 1".into(),
        }
        .into());
    }

    let v0 = option.premium;
    let mut csv = Csv::new("alpha,beta,s_t,v_t,x_drl,x_bs,x_leland");
    for level in &levels {
        let level_market = market.with_impact(level.alpha, level.beta);
        let leland = leland_for_level(leland_mode.clone(), level)?;
        let drl = Strategy::Policy {
            params: &level.policy,
            clip_shares: clip,
        };
        for i in 0..s_count {
            let s = s_min + (s_max - s_min) * i as f64 / (s_count - 1) as f64;
            for j in 0..v_count {
                let frac = if v_count == 1 {
                    1.0
                } else {
                    v_min_frac + (v_max_frac - v_min_frac) * j as f64 / (v_count - 1) as f64
                };
                let v_t = frac * v0;
                let impact = crate::market::ImpactState { a: 0.0, b: 0.0 };
                let x_drl =
                    drl.action(t, s, &impact, prev_position, v_t, &option, &level_market);
                let x_bs = BaselineKind::BlackScholes.action(s, t, &option, &level_market);
                let x_leland = leland.action(s, t, &option, &level_market);
                csv.row(&[
                    format!("{}", level.alpha),
                    format!("{}", level.beta),
                    fmt_f64(s),
                    fmt_f64(v_t),
                    fmt_f64(x_drl),
                    fmt_f64(x_bs),
                    fmt_f64(x_leland),
                ]);
            }
        }
    }
    let csv_path = csv.write_to(out, "policy_surface.csv")?;

    let mut manifest = Manifest::new("policy-surface");
    manifest.set("run.seed", seed);
    manifest.extend_config(&market_entries(&market));
    manifest.extend_config(&option_entries(&option));
    manifest.set("surface.time_step", t);
    manifest.set("surface.prev_position", prev_position);
    manifest.set("surface.s_min", s_min);
    manifest.set("surface.s_max", s_max);
    manifest.set("surface.s_count", s_count);
    manifest.set("surface.v_count", v_count);
    manifest.set("surface.v_min_frac", v_min_frac);
    manifest.set("surface.v_max_frac", v_max_frac);
    write_level_manifest(&mut manifest, "surface", &levels)?;
    manifest.write_to(out)?;
    Ok(vec![csv_path])
}

// The leland override mode has to be read once (consumption tracking) but
// applied per level; split resolution in two steps.
fn cfg_leland(cfg: &ConfigFile) -> Result<String, ExperimentError> {
    Ok(cfg
        .string("baselines.leland_k")
        .unwrap_or_else(|| "auto".into()))
}

fn leland_for_level(mode: String, level: &Level) -> Result<BaselineKind, ExperimentError> {
    match mode.as_str() {
        "auto" => Ok(BaselineKind::leland_calibrated(level.beta)),
        "buy_side" => Ok(BaselineKind::Leland {
            k: calibrate_k_buy_side(level.alpha),
        }),
        other => {
            let k: f64 = other.parse().map_err(|e| ConfigError::Invalid {
                key: "baselines.leland_k".into(),
                msg: format!("expected auto|buy_side|<number>: {e}"),
            })?;
            Ok(BaselineKind::Leland { k })
        }
    }
}

fn write_level_manifest(
    manifest: &mut Manifest,
    section: &str,
    levels: &[Level],
) -> Result<(), ExperimentError> {
    for (i, level) in levels.iter().enumerate() {
        manifest.set(&format!("{section}.level.{i}.alpha"), level.alpha);
        manifest.set(&format!("{section}.level.{i}.beta"), level.beta);
        manifest.set(
            &format!("{section}.level.{i}.checkpoint"),
            level.checkpoint_path.display(),
        );
        manifest.checkpoint_hash(
            &format!("{section}.level.{i}"),
            &level.checkpoint_path,
        )?;
    }
    Ok(())
}

/// Runs a policy episode along a fixed path and returns the record.
fn policy_episode(
    policy: &PolicyParams,
    clip: Option<f64>,
    path: &PricePath,
    option: &OptionSpec,
    market: &MarketParams,
) -> EpisodeRecord {
    let strategy = Strategy::Policy {
        params: policy,
        clip_shares: clip,
    };
    crate::account::run_episode(path, option, market, 0.0f64, |t, s_t, state, v_t| {
        strategy.action(t, s_t, &state.impact, state.position, v_t, option, market)
    })
    .expect("finite experiment episode")
    .record
}

fn baseline_episode(
    kind: BaselineKind,
    path: &PricePath,
    option: &OptionSpec,
    market: &MarketParams,
) -> EpisodeRecord {
    crate::baselines::baseline_rollout(kind, path, option, market)
}

/// Hedging position sequences along one simulated path for the three
/// liquidity levels, plus a Monte-Carlo turnover summary per strategy.
pub fn run_path_comparison(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let market = crate::config::market_from(cfg)?;
    let option = crate::config::option_from(cfg, &market)?;
    let clip = clip_from(cfg)?;
    let leland_mode = cfg_leland(cfg)?;
    let levels = impact_levels(
        cfg,
        "compare",
        &[(1.0, 1.0), (1.01, 0.99), (1.02, 0.98)],
    )?;
    let seed = match seed_override {
        Some(s) => s,
        None => cfg.u64_or("compare.seed", 2024)?,
    };
    let mc_paths = cfg.usize_or("compare.n_paths", 10_000)?;
    let mc_seed = cfg.u64_or("compare.mc_seed", 555)?;
    cfg.finish()?;

    let display_path = simulate_path(&market, option.horizon, seed, 0);

    // Wide CSV: shared price column, one action column per strategy.
    let mut header = String::from("t,s_t,x_bs");
    for level in &levels {
        let suffix = column_suffix(level.alpha, level.beta);
        header.push_str(&format!(",x_leland_{suffix},x_drl_{suffix}"));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let bs_record = baseline_episode(
        BaselineKind::BlackScholes,
        &display_path,
        &option,
        &market,
    );
    columns.push(bs_record.actions.clone());
    let mut episode_records = Vec::new();
    for level in &levels {
        let level_market = market.with_impact(level.alpha, level.beta);
        let leland = leland_for_level(leland_mode.clone(), level)?;
        columns.push(baseline_episode(leland, &display_path, &option, &level_market).actions);
        let drl = policy_episode(&level.policy, clip, &display_path, &option, &level_market);
        columns.push(drl.actions.clone());
        episode_records.push(drl);
    }
    let mut csv = Csv::new(&header);
    for t in 0..=option.horizon {
        let mut row = vec![t.to_string(), fmt_f64(display_path.prices[t])];
        for col in &columns {
            row.push(if t < option.horizon {
                fmt_f64(col[t])
            } else {
                String::new()
            });
        }
        csv.row(&row);
    }
    let positions_path = csv.write_to(out, "path_comparison.csv")?;

    // Monte-Carlo turnover per strategy on a common-seed test set.
    let mut turnover = Csv::new("strategy,alpha,beta,mean_turnover,rho_hat");
    let bs_report = evaluate(
        &Strategy::Baseline(BaselineKind::BlackScholes),
        mc_paths,
        mc_seed,
        &market,
        &option,
    );
    turnover.row(&[
        "black_scholes".into(),
        format!("{}", market.alpha),
        format!("{}", market.beta),
        fmt_f64(bs_report.mean_turnover),
        fmt_f64(bs_report.rho_hat),
    ]);
    for level in &levels {
        let level_market = market.with_impact(level.alpha, level.beta);
        let leland = leland_for_level(leland_mode.clone(), level)?;
        for (label, strategy) in [
            ("leland", Strategy::Baseline(leland)),
            (
                "drl",
                Strategy::Policy {
                    params: &level.policy,
                    clip_shares: clip,
                },
            ),
        ] {
            let report = evaluate(&strategy, mc_paths, mc_seed, &level_market, &option);
            turnover.row(&[
                label.into(),
                format!("{}", level.alpha),
                format!("{}", level.beta),
                fmt_f64(report.mean_turnover),
                fmt_f64(report.rho_hat),
            ]);
        }
    }
    let turnover_path = turnover.write_to(out, "turnover_summary.csv")?;

    let mut manifest = Manifest::new("path-comparison");
    manifest.set("run.seed", seed);
    manifest.extend_config(&market_entries(&market));
    manifest.extend_config(&option_entries(&option));
    manifest.set("compare.seed", seed);
    manifest.set("compare.n_paths", mc_paths);
    manifest.set("compare.mc_seed", mc_seed);
    write_level_manifest(&mut manifest, "compare", &levels)?;
    manifest.write_to(out)?;
    Ok(vec![positions_path, turnover_path])
}

/// Positions along the fictitious constant-at-strike price sequence, for
/// policies trained with the historical drift and with zero drift.
pub fn run_constant_price(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let market = crate::config::market_from(cfg)?;
    let option = crate::config::option_from(cfg, &market)?;
    let clip = clip_from(cfg)?;
    let leland_mode = cfg_leland(cfg)?;
    let price = cfg.f64_or("constant.price", option.strike)?;
    let seed = seed_override.unwrap_or(0);

    let defaults = [(1.0, 1.0), (1.01, 0.99), (1.02, 0.98)];
    let mut levels = Vec::new();
    for (i, &(da, db)) in defaults.iter().enumerate() {
        let alpha = cfg.f64_or(&format!("constant.level.{i}.alpha"), da)?;
        let beta = cfg.f64_or(&format!("constant.level.{i}.beta"), db)?;
        let mut policies = Vec::new();
        for drift in ["checkpoint_mu_trained", "checkpoint_mu_zero"] {
            let key = format!("constant.level.{i}.{drift}");
            let path = cfg
                .path(&key)
                .ok_or_else(|| ExperimentError::MissingCheckpoint {
                    path: format!("<{key}>"),
                    hint: format!(
                        "train with market.alpha = {alpha}, market.beta = {beta} \
                         ({drift} wants market.mu_annual = {}) and set {key}",
                        if drift.ends_with("zero") { "0" } else { "the historical drift" }
                    ),
                })?;
            let ck = load_checkpoint(&path, &format!("required by {key}"))?;
            policies.push((path, ck.policy));
        }
        levels.push((alpha, beta, policies));
    }
    cfg.finish()?;

    let path = PricePath::constant(price, option.horizon);
    let mut header = String::from("t,s_t,x_bs");
    for (alpha, beta, _) in &levels {
        let suffix = column_suffix(*alpha, *beta);
        header.push_str(&format!(
            ",x_leland_{suffix},x_drl_mu_trained_{suffix},x_drl_mu_zero_{suffix}"
        ));
    }
    let bs_actions = baseline_episode(BaselineKind::BlackScholes, &path, &option, &market).actions;
    let mut columns: Vec<Vec<f64>> = vec![bs_actions];
    for (alpha, beta, policies) in &levels {
        let level_market = market.with_impact(*alpha, *beta);
        let leland = leland_for_level(
            leland_mode.clone(),
            &Level {
                alpha: *alpha,
                beta: *beta,
                checkpoint_path: PathBuf::new(),
                policy: policies[0].1.clone(),
            },
        )?;
        columns.push(baseline_episode(leland, &path, &option, &level_market).actions);
        for (_, policy) in policies {
            columns.push(policy_episode(policy, clip, &path, &option, &level_market).actions);
        }
    }
    let mut csv = Csv::new(&header);
    for t in 0..=option.horizon {
        let mut row = vec![t.to_string(), fmt_f64(path.prices[t])];
        for col in &columns {
            row.push(if t < option.horizon {
                fmt_f64(col[t])
            } else {
                String::new()
            });
        }
        csv.row(&row);
    }
    let csv_path = csv.write_to(out, "constant_price.csv")?;

    let mut manifest = Manifest::new("constant-price");
    manifest.set("run.seed", seed);
    manifest.extend_config(&market_entries(&market));
    manifest.extend_config(&option_entries(&option));
    manifest.set("constant.price", price);
    for (i, (alpha, beta, policies)) in levels.iter().enumerate() {
        manifest.set(&format!("constant.level.{i}.alpha"), alpha);
        manifest.set(&format!("constant.level.{i}.beta"), beta);
        for (path, drift) in policies
            .iter()
            .map(|(p, _)| p)
            .zip(["checkpoint_mu_trained", "checkpoint_mu_zero"])
        {
            manifest.set(&format!("constant.level.{i}.{drift}"), path.display());
            manifest.checkpoint_hash(&format!("constant.level.{i}.{drift}"), path)?;
        }
    }
    manifest.write_to(out)?;
    Ok(vec![csv_path])
}

/// Pin-risk study: hourly rebalancing of an at-the-money option a few
/// hours from expiry, across impact-persistence levels. Reports the
/// per-level episode records and the dispersion of late rebalances.
pub fn run_pin_risk(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    // This experiment's market defaults differ from the yearly setup.
    let base = MarketParams {
        dt: 1.0 / (8.0 * 252.0),
        alpha: 1.001,
        beta: 0.999,
        ..MarketParams::monthly_sp500()
    };
    let market = MarketParams {
        mu: cfg.f64_or("market.mu_annual", base.mu)?,
        sigma: cfg.f64_or("market.sigma_annual", base.sigma)?,
        s0: cfg.f64_or("market.s0", base.s0)?,
        dt: cfg.f64_or("market.dt_years", base.dt)?,
        r: cfg.f64_or("market.r_per_step", base.r)?,
        alpha: cfg.f64_or("market.alpha", base.alpha)?,
        beta: cfg.f64_or("market.beta", base.beta)?,
        lambda_a: f64::INFINITY, // per-level below
        lambda_b: f64::INFINITY,
        a0: cfg.f64_or("market.a0_shares", 0.0)?,
        b0: cfg.f64_or("market.b0_shares", 0.0)?,
    };
    let strike = cfg.f64_or("option.strike", market.s0)?;
    let horizon = cfg.usize_or("option.horizon_steps", 8)?;
    let option = OptionSpec::with_bs_premium(strike, horizon, &market);
    let clip = clip_from(cfg)?;
    let leland_mode = cfg_leland(cfg)?;
    let seed = match seed_override {
        Some(s) => s,
        None => cfg.u64_or("pin.seed", 77)?,
    };

    // Persistence ladder: none, halving per step, permanent.
    let lambda_defaults = [f64::INFINITY, 2.0f64.ln(), 0.0];
    let mut levels: Vec<(f64, PathBuf, PolicyParams)> = Vec::new();
    for (i, &dl) in lambda_defaults.iter().enumerate() {
        let lambda = cfg.f64_or(&format!("pin.level.{i}.lambda"), dl)?;
        let key = format!("pin.level.{i}.checkpoint");
        let path = cfg
            .path(&key)
            .ok_or_else(|| ExperimentError::MissingCheckpoint {
                path: format!("<{key}>"),
                hint: format!(
                    "train with market.lambda_a_per_step = market.lambda_b_per_step = {} \
                     on the pin-risk market and set {key}",
                    if lambda.is_infinite() { "inf".into() } else { format!("{lambda}") }
                ),
            })?;
        let ck = load_checkpoint(&path, &format!("required by {key}"))?;
        levels.push((lambda, path, ck.policy));
    }
    cfg.finish()?;

    let display_path = simulate_path(&market, horizon, seed, 0);
    let lambda_label = |lambda: f64| -> String {
        if lambda.is_infinite() {
            "inf".into()
        } else if lambda == 0.0 {
            "zero".into()
        } else if (lambda - 2.0f64.ln()).abs() < 1e-12 {
            "half".into() // impact halves each step
        } else {
            format!("{lambda:.4}")
        }
    };

    let leland = leland_for_level(
        leland_mode,
        &Level {
            alpha: market.alpha,
            beta: market.beta,
            checkpoint_path: PathBuf::new(),
            policy: levels[0].2.clone(),
        },
    )?;
    let bs_record = baseline_episode(BaselineKind::BlackScholes, &display_path, &option, &market);
    let leland_record = baseline_episode(leland, &display_path, &option, &market);

    let mut header = String::from("t,s_t,x_bs,x_leland");
    for (lambda, _, _) in &levels {
        header.push_str(&format!(",x_drl_lambda_{}", lambda_label(*lambda)));
    }
    let mut drl_records = Vec::new();
    for (lambda, _, policy) in &levels {
        let level_market = market.with_persistence(*lambda, *lambda);
        drl_records.push(policy_episode(policy, clip, &display_path, &option, &level_market));
    }
    let mut csv = Csv::new(&header);
    for t in 0..=horizon {
        let mut row = vec![t.to_string(), fmt_f64(display_path.prices[t])];
        for rec in [&bs_record, &leland_record]
            .into_iter()
            .chain(drl_records.iter())
        {
            row.push(if t < horizon {
                fmt_f64(rec.actions[t])
            } else {
                String::new()
            });
        }
        csv.row(&row);
    }
    let positions_path = csv.write_to(out, "pin_risk_positions.csv")?;

    // Dispersion of the final three rebalances per strategy.
    let stdev_last3 = |rec: &EpisodeRecord| -> f64 {
        let mut deltas = Vec::new();
        let mut prev = 0.0;
        for &x in &rec.actions {
            deltas.push(x - prev);
            prev = x;
        }
        let last = &deltas[deltas.len() - 3..];
        let mean = last.iter().sum::<f64>() / 3.0;
        (last.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 2.0).sqrt()
    };
    let mut summary = Csv::new("strategy,lambda,stdev_dx_last3");
    summary.row(&[
        "black_scholes".into(),
        String::new(),
        fmt_f64(stdev_last3(&bs_record)),
    ]);
    summary.row(&[
        "leland".into(),
        String::new(),
        fmt_f64(stdev_last3(&leland_record)),
    ]);
    for ((lambda, _, _), rec) in levels.iter().zip(&drl_records) {
        summary.row(&[
            format!("drl_lambda_{}", lambda_label(*lambda)),
            if lambda.is_infinite() { "inf".into() } else { format!("{lambda}") },
            fmt_f64(stdev_last3(rec)),
        ]);
    }
    let summary_path = summary.write_to(out, "pin_risk_summary.csv")?;

    // Full per-level episode records (the persistence states are the
    // interesting part here).
    let mut episode_paths = Vec::new();
    for ((lambda, _, _), rec) in levels.iter().zip(&drl_records) {
        let mut buf = Vec::new();
        write_episodes_csv(std::slice::from_ref(rec), &mut buf)?;
        let name = format!("episode_lambda_{}.csv", lambda_label(*lambda));
        std::fs::create_dir_all(out)?;
        let p = out.join(&name);
        std::fs::write(&p, buf)?;
        episode_paths.push(p);
    }

    let mut manifest = Manifest::new("pin-risk");
    manifest.set("run.seed", seed);
    manifest.extend_config(&market_entries(&market));
    manifest.set("option.strike", strike);
    manifest.set("option.horizon_steps", horizon);
    manifest.set("pin.seed", seed);
    for (i, (lambda, path, _)) in levels.iter().enumerate() {
        manifest.set(
            &format!("pin.level.{i}.lambda"),
            if lambda.is_infinite() { "inf".to_string() } else { format!("{lambda}") },
        );
        manifest.set(&format!("pin.level.{i}.checkpoint"), path.display());
        manifest.checkpoint_hash(&format!("pin.level.{i}"), path)?;
    }
    manifest.write_to(out)?;

    let mut outputs = vec![positions_path, summary_path];
    outputs.extend(episode_paths);
    Ok(outputs)
}
