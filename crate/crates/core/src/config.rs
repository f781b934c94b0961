//! Flat, sectioned key-value configuration files.
//!
//! Syntax: one `section.key = value` per line, `#` comments, blank lines
//! ignored. Key names carry their units (`market.sigma_annual`,
//! `market.dt_years`, `market.r_per_step`) because dimensional ambiguity
//! is the easiest way to ruin a reproduction. Unknown keys are rejected to
//! catch typos; the `run.` and `hash.` namespaces are reserved for
//! manifests and ignored on input, so a manifest is itself a runnable
//! config.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::account::OptionSpec;
use crate::market::MarketParams;
use crate::policy::Activation;
use crate::trainer::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required config key `{0}`")]
    Missing(String),
    #[error("config key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("unknown config keys: {0} (misspelled?)")]
    Unknown(String),
}

/// Every key any command understands. One config file may drive several
/// commands (train, then evaluate, then an experiment), so validation
/// checks keys against the full registry rather than per command.
const KNOWN_KEYS: &[&str] = &[
    "market.mu_annual",
    "market.sigma_annual",
    "market.s0",
    "market.dt_years",
    "market.r_per_step",
    "market.alpha",
    "market.beta",
    "market.lambda_a_per_step",
    "market.lambda_b_per_step",
    "market.a0_shares",
    "market.b0_shares",
    "option.strike",
    "option.horizon_steps",
    "option.premium",
    "train.batch_size",
    "train.n_iterations",
    "train.lr",
    "train.lr_decay_factor",
    "train.lr_decay_every",
    "train.seed",
    "train.hidden_layers",
    "train.activation",
    "train.clip_shares",
    "train.resample",
    "train.checkpoint_every",
    "evaluate.checkpoint",
    "evaluate.n_paths",
    "evaluate.seed",
    "baselines.leland_k",
    "surface.time_step",
    "surface.prev_position",
    "surface.s_min",
    "surface.s_max",
    "surface.s_count",
    "surface.v_count",
    "surface.v_min_frac",
    "surface.v_max_frac",
    "compare.seed",
    "compare.n_paths",
    "compare.mc_seed",
    "constant.price",
    "pin.seed",
];

fn is_known_key(key: &str) -> bool {
    if key.starts_with("run.") || key.starts_with("hash.") {
        return true; // manifest namespaces
    }
    if KNOWN_KEYS.contains(&key) {
        return true;
    }
    // Per-level checkpoint tables: "<section>.level.<i>.<field>".
    let mut parts = key.split('.');
    if let (Some(section), Some("level"), Some(index), Some(field), None) = (
        parts.next(),
        parts.next(),
        parts.next(),
        parts.next(),
        parts.next(),
    ) {
        let section_ok = matches!(section, "surface" | "compare" | "constant" | "pin");
        let field_ok = matches!(
            field,
            "alpha" | "beta" | "lambda" | "checkpoint" | "checkpoint_mu_trained" | "checkpoint_mu_zero"
        );
        return section_ok && field_ok && index.parse::<usize>().is_ok();
    }
    false
}

/// A parsed config file. [`ConfigFile::finish`] rejects keys no command
/// understands, which catches misspellings early.
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: format!("bad key `{key}`"),
                });
            }
            if entries.iter().any(|(k, _)| k == &key) {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            entries.push((key, value));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    pub fn require_string(&self, key: &str) -> Result<String, ConfigError> {
        self.string(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    /// Floats accept `inf`/`+inf` for the no-persistence sentinel.
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_f64(v).map_err(|msg| ConfigError::Invalid {
                key: key.into(),
                msg,
            }),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self
            .raw(key)
            .ok_or_else(|| ConfigError::Missing(key.into()))?;
        parse_f64(v).map_err(|msg| ConfigError::Invalid {
            key: key.into(),
            msg,
        })
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| ConfigError::Invalid {
                key: key.into(),
                msg: format!("{e}"),
            }),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| ConfigError::Invalid {
                key: key.into(),
                msg: format!("{e}"),
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::Invalid {
                key: key.into(),
                msg: format!("expected true|false, got `{v}`"),
            }),
        }
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| ConfigError::Invalid {
                    key: key.into(),
                    msg: format!("{e}"),
                }),
        }
    }

    /// Errors on keys no command understands (the `run.`/`hash.` manifest
    /// namespaces are always accepted).
    pub fn finish(&self) -> Result<(), ConfigError> {
        let unknown: Vec<&str> = self
            .entries
            .iter()
            .map(|(k, _)| k.as_str())
            .filter(|k| !is_known_key(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown(unknown.join(", ")))
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    match v {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => v
            .parse::<f64>()
            .map_err(|e| format!("{e}"))
            .and_then(|x| {
                if x.is_nan() {
                    Err("NaN is not a valid config value".into())
                } else {
                    Ok(x)
                }
            }),
    }
}

fn fmt_cfg_f64(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Reads the `market.*` section, defaulting to the monthly S&P 500 setup.
pub fn market_from(cfg: &ConfigFile) -> Result<MarketParams, ConfigError> {
    let d = MarketParams::monthly_sp500();
    let params = MarketParams {
        mu: cfg.f64_or("market.mu_annual", d.mu)?,
        sigma: cfg.f64_or("market.sigma_annual", d.sigma)?,
        s0: cfg.f64_or("market.s0", d.s0)?,
        dt: cfg.f64_or("market.dt_years", d.dt)?,
        r: cfg.f64_or("market.r_per_step", d.r)?,
        alpha: cfg.f64_or("market.alpha", d.alpha)?,
        beta: cfg.f64_or("market.beta", d.beta)?,
        lambda_a: cfg.f64_or("market.lambda_a_per_step", d.lambda_a)?,
        lambda_b: cfg.f64_or("market.lambda_b_per_step", d.lambda_b)?,
        a0: cfg.f64_or("market.a0_shares", d.a0)?,
        b0: cfg.f64_or("market.b0_shares", d.b0)?,
    };
    params.validate().map_err(|e| ConfigError::Invalid {
        key: "market".into(),
        msg: e.to_string(),
    })?;
    Ok(params)
}

/// Reads the `option.*` section. `option.premium = auto` (the default)
/// prices the call with Black-Scholes under the market parameters.
pub fn option_from(cfg: &ConfigFile, market: &MarketParams) -> Result<OptionSpec, ConfigError> {
    let strike = cfg.f64_or("option.strike", 1000.0)?;
    let horizon = cfg.usize_or("option.horizon_steps", 12)?;
    let premium_raw = cfg.string("option.premium").unwrap_or_else(|| "auto".into());
    let option = if premium_raw == "auto" {
        OptionSpec::with_bs_premium(strike, horizon, market)
    } else {
        let premium = parse_f64(&premium_raw).map_err(|msg| ConfigError::Invalid {
            key: "option.premium".into(),
            msg,
        })?;
        OptionSpec {
            strike,
            horizon,
            premium,
        }
    };
    option.validate().map_err(|e| ConfigError::Invalid {
        key: "option".into(),
        msg: e,
    })?;
    Ok(option)
}

/// Reads the `train.*` section on top of the market/option sections.
/// `seed_override` (the CLI's `--seed`) wins over `train.seed`.
pub fn train_config_from(
    cfg: &ConfigFile,
    seed_override: Option<u64>,
) -> Result<TrainConfig, ConfigError> {
    let market = market_from(cfg)?;
    let option = option_from(cfg, &market)?;
    let defaults = TrainConfig::new(market, option);
    let clip = match cfg.string("train.clip_shares") {
        None => defaults.clip_shares,
        Some(ref v) if v == "none" => None,
        Some(v) => Some(parse_f64(&v).map_err(|msg| ConfigError::Invalid {
            key: "train.clip_shares".into(),
            msg,
        })?),
    };
    let activation: Activation = match cfg.string("train.activation") {
        None => defaults.activation,
        Some(v) => v.parse().map_err(|msg: String| ConfigError::Invalid {
            key: "train.activation".into(),
            msg,
        })?,
    };
    let config = TrainConfig {
        market,
        option,
        batch_size: cfg.usize_or("train.batch_size", defaults.batch_size)?,
        n_iterations: cfg.usize_or("train.n_iterations", defaults.n_iterations)?,
        lr: cfg.f64_or("train.lr", defaults.lr)?,
        lr_decay_factor: cfg.f64_or("train.lr_decay_factor", defaults.lr_decay_factor)?,
        lr_decay_every: cfg.usize_or("train.lr_decay_every", defaults.lr_decay_every)?,
        seed: match seed_override {
            Some(s) => s,
            None => cfg.u64_or("train.seed", defaults.seed)?,
        },
        hidden_layers: cfg.usize_list_or("train.hidden_layers", &defaults.hidden_layers)?,
        activation,
        clip_shares: clip,
        resample: cfg.bool_or("train.resample", defaults.resample)?,
        checkpoint_every: cfg.usize_or("train.checkpoint_every", defaults.checkpoint_every)?,
    };
    config.validate().map_err(|e| ConfigError::Invalid {
        key: "train".into(),
        msg: e.to_string(),
    })?;
    Ok(config)
}

/// Resolved `market.*` entries for a manifest.
pub fn market_entries(m: &MarketParams) -> Vec<(String, String)> {
    vec![
        ("market.mu_annual".into(), fmt_cfg_f64(m.mu)),
        ("market.sigma_annual".into(), fmt_cfg_f64(m.sigma)),
        ("market.s0".into(), fmt_cfg_f64(m.s0)),
        ("market.dt_years".into(), fmt_cfg_f64(m.dt)),
        ("market.r_per_step".into(), fmt_cfg_f64(m.r)),
        ("market.alpha".into(), fmt_cfg_f64(m.alpha)),
        ("market.beta".into(), fmt_cfg_f64(m.beta)),
        ("market.lambda_a_per_step".into(), fmt_cfg_f64(m.lambda_a)),
        ("market.lambda_b_per_step".into(), fmt_cfg_f64(m.lambda_b)),
        ("market.a0_shares".into(), fmt_cfg_f64(m.a0)),
        ("market.b0_shares".into(), fmt_cfg_f64(m.b0)),
    ]
}

/// Resolved `option.*` entries for a manifest.
pub fn option_entries(o: &OptionSpec) -> Vec<(String, String)> {
    vec![
        ("option.strike".into(), fmt_cfg_f64(o.strike)),
        ("option.horizon_steps".into(), o.horizon.to_string()),
        ("option.premium".into(), fmt_cfg_f64(o.premium)),
    ]
}

/// Resolved `train.*` entries for a manifest.
pub fn train_entries(c: &TrainConfig) -> Vec<(String, String)> {
    let hidden: Vec<String> = c.hidden_layers.iter().map(|h| h.to_string()).collect();
    let mut out = market_entries(&c.market);
    out.extend(option_entries(&c.option));
    out.extend([
        ("train.batch_size".into(), c.batch_size.to_string()),
        ("train.n_iterations".into(), c.n_iterations.to_string()),
        ("train.lr".into(), fmt_cfg_f64(c.lr)),
        ("train.lr_decay_factor".into(), fmt_cfg_f64(c.lr_decay_factor)),
        ("train.lr_decay_every".into(), c.lr_decay_every.to_string()),
        ("train.seed".into(), c.seed.to_string()),
        ("train.hidden_layers".into(), hidden.join(",")),
        ("train.activation".into(), c.activation.to_string()),
        (
            "train.clip_shares".into(),
            c.clip_shares.map_or("none".into(), fmt_cfg_f64),
        ),
        ("train.resample".into(), c.resample.to_string()),
        ("train.checkpoint_every".into(), c.checkpoint_every.to_string()),
    ]);
    out
}
