//! Trains a hedging policy for the low-liquidity market at reduced desk
//! scale and writes checkpoints plus the training log.
//!
//! ```bash
//! cargo run --release --example train_policy
//! ```
//!
//! The checkpoint lands in `runs/examples/train-low-liquidity/` where
//! `evaluate_policy` picks it up.

use std::path::Path;

use impact_hedger::account::OptionSpec;
use impact_hedger::market::MarketParams;
use impact_hedger::trainer::{train, TrainConfig};

fn main() {
    let market = MarketParams::monthly_sp500().with_impact(1.02, 0.98);
    let option = OptionSpec::with_bs_premium(1000.0, 12, &market);
    let mut config = TrainConfig::new(market, option);
    // Reduced scale: a couple of minutes of CPU instead of a long run.
    config.hidden_layers = vec![32, 32];
    config.batch_size = 128;
    config.n_iterations = 1500;
    config.lr_decay_every = 750;

    let out = Path::new("runs/examples/train-low-liquidity");
    println!(
        "training {}x{} policy, {} iterations of {} paths (alpha 1.02, beta 0.98)...",
        config.hidden_layers.len(),
        config.hidden_layers[0],
        config.n_iterations,
        config.batch_size
    );
    let started = std::time::Instant::now();
    let result = train(&config, Some(out)).unwrap();
    println!("done in {:.1}s, {} aborted steps", started.elapsed().as_secs_f64(), result.aborted_steps);

    let window = 50;
    let early: f64 = result.history[..window].iter().map(|s| s.rho_hat).sum::<f64>() / window as f64;
    let late: f64 = result.history[result.history.len() - window..]
        .iter()
        .map(|s| s.rho_hat)
        .sum::<f64>()
        / window as f64;
    println!("risk trend: first-{window} avg {early:.1} -> trailing-{window} avg {late:.1}");
    println!("checkpoint: {}", out.join("checkpoint_final.txt").display());
    println!("log:        {}", out.join("training_log.csv").display());
}
