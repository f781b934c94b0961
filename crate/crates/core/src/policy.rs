//! The feedforward hedging policy: architecture, initialization, forward
//! pass and checkpoint serialization.
//!
//! The network maps the 6-dimensional normalized state to one unbounded
//! action (the next position). Hidden layers use ReLU or tanh; the output
//! is identity. The forward pass is generic over [`Real`], so the same
//! code runs as plain inference or records onto a tape during training.
//!
//! Checkpoints are line-oriented text: a versioned header carrying the
//! architecture, activation, optimizer step count and training seed,
//! followed by `theta`, `m` and `v` with 17 significant digits so every
//! 64-bit value round-trips exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adam::AdamState;
use crate::autodiff::Real;

/// Number of state features consumed by the policy.
pub const FEATURE_COUNT: usize = 6;

/// Stream index reserved for parameter initialization within a seed's
/// ChaCha stream space (path simulation uses ascending indices from 0).
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Relu => "relu",
            Self::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            other => Err(format!("unknown activation `{other}` (expected relu|tanh)")),
        }
    }
}

/// Flat parameter vector plus the architecture it instantiates.
///
/// Layout: for each layer, `out * in` weights in row-major order followed
/// by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// Layer widths, input first: `[6, hidden.., 1]`.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub theta: Vec<f64>,
}

/// Total parameter count for the given layer widths.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

impl PolicyParams {
    /// Fan-in-scaled uniform initialization of hidden layers; the output
    /// layer starts at zero so the initial policy never trades.
    pub fn init(hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(FEATURE_COUNT);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut theta = Vec::with_capacity(param_count(&layer_sizes));
        let last_layer = layer_sizes.len() - 2;
        for (layer, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n = fan_in * fan_out + fan_out;
            if layer == last_layer {
                theta.extend(std::iter::repeat(0.0).take(n));
            } else {
                theta.extend((0..n).map(|_| rng.gen_range(-bound..bound)));
            }
        }
        Self {
            layer_sizes,
            activation,
            theta,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.layer_sizes.len() < 2 {
            return Err("network needs at least input and output layers".into());
        }
        if self.layer_sizes[0] != FEATURE_COUNT {
            return Err(format!("input layer must have {FEATURE_COUNT} units"));
        }
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err("output layer must have 1 unit".into());
        }
        let expected = param_count(&self.layer_sizes);
        if self.theta.len() != expected {
            return Err(format!(
                "theta length {} does not match architecture ({} expected)",
                self.theta.len(),
                expected
            ));
        }
        if !self.theta.iter().all(|x| x.is_finite()) {
            return Err("theta contains non-finite entries".into());
        }
        Ok(())
    }

    /// Plain-float forward pass.
    pub fn forward(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        ffnn_forward(&self.layer_sizes, self.activation, &self.theta, features)
    }
}

/// Dense forward pass over any [`Real`] carrier. `theta` must follow the
/// [`PolicyParams`] layout; hidden layers apply the activation, the output
/// layer is identity (the action is unbounded).
pub fn ffnn_forward<R: Real>(
    layer_sizes: &[usize],
    activation: Activation,
    theta: &[R],
    input: &[R],
) -> R {
    assert_eq!(input.len(), layer_sizes[0]);
    assert_eq!(theta.len(), param_count(layer_sizes));
    let mut offset = 0;
    let mut current: Vec<R> = input.to_vec();
    let last_layer = layer_sizes.len() - 2;
    for (layer, w) in layer_sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights_at = offset;
        let biases_at = offset + fan_in * fan_out;
        offset = biases_at + fan_out;
        let mut next = Vec::with_capacity(fan_out);
        for j in 0..fan_out {
            let row = &theta[weights_at + j * fan_in..weights_at + (j + 1) * fan_in];
            let mut unit = R::dot_affine(row, &current, theta[biases_at + j]);
            if layer != last_layer {
                unit = match activation {
                    Activation::Relu => unit.pos_part(),
                    Activation::Tanh => unit.tanh(),
                };
            }
            next.push(unit);
        }
        current = next;
    }
    current[0]
}

/// A training snapshot: policy, optimizer state and the run's seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: PolicyParams,
    pub adam: AdamState,
    pub seed: u64,
}

const CHECKPOINT_MAGIC: &str = "impact-hedger-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

impl Checkpoint {
    pub fn new(policy: PolicyParams, adam: AdamState, seed: u64) -> Self {
        assert_eq!(policy.theta.len(), adam.m.len());
        Self { policy, adam, seed }
    }

    pub fn to_text(&self) -> String {
        let sizes: Vec<String> = self.policy.layer_sizes.iter().map(|s| s.to_string()).collect();
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        out.push_str(&format!("layer_sizes = {}\n", sizes.join(",")));
        out.push_str(&format!("activation = {}\n", self.policy.activation));
        out.push_str(&format!("step_count = {}\n", self.adam.step_count));
        out.push_str(&format!("seed = {}\n", self.seed));
        for (name, values) in [
            ("theta", &self.policy.theta),
            ("m", &self.adam.m),
            ("v", &self.adam.v),
        ] {
            out.push_str(&format!("{name} = {}\n", values.len()));
            for v in values.iter() {
                out.push_str(&format!("{v:.16e}\n"));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        fn malformed(msg: String) -> CheckpointError {
            CheckpointError::Malformed(msg)
        }
        fn field<'a>(
            lines: &mut std::str::Lines<'a>,
            name: &str,
        ) -> Result<&'a str, CheckpointError> {
            let line = lines
                .next()
                .ok_or_else(|| malformed(format!("missing field {name}")))?;
            line.strip_prefix(&format!("{name} = "))
                .ok_or_else(|| malformed(format!("expected `{name} = ...`, got `{line}`")))
        }
        fn read_block(
            lines: &mut std::str::Lines<'_>,
            name: &str,
        ) -> Result<Vec<f64>, CheckpointError> {
            let len: usize = field(lines, name)?
                .parse()
                .map_err(|e| malformed(format!("bad {name} length: {e}")))?;
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                let line = lines
                    .next()
                    .ok_or_else(|| malformed(format!("truncated {name} block")))?;
                values.push(
                    line.parse::<f64>()
                        .map_err(|e| malformed(format!("bad value in {name}: {e}")))?,
                );
            }
            Ok(values)
        }

        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(malformed("missing or unsupported header".into()));
        }
        let layer_sizes: Vec<usize> = field(&mut lines, "layer_sizes")?
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| malformed(format!("bad layer_sizes: {e}")))?;
        let activation: Activation = field(&mut lines, "activation")?
            .parse()
            .map_err(|e: String| malformed(e))?;
        let step_count: u64 = field(&mut lines, "step_count")?
            .parse()
            .map_err(|e| malformed(format!("bad step_count: {e}")))?;
        let seed: u64 = field(&mut lines, "seed")?
            .parse()
            .map_err(|e| malformed(format!("bad seed: {e}")))?;

        let theta = read_block(&mut lines, "theta")?;
        let m = read_block(&mut lines, "m")?;
        let v = read_block(&mut lines, "v")?;

        let policy = PolicyParams {
            layer_sizes,
            activation,
            theta,
        };
        policy.validate().map_err(malformed)?;
        if m.len() != policy.theta.len() || v.len() != policy.theta.len() {
            return Err(malformed("moment vectors do not match theta length".into()));
        }
        Ok(Self {
            policy,
            adam: AdamState { m, v, step_count },
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_text()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}
