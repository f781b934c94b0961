//! Out-of-sample risk report: the trained policy against Black-Scholes
//! and Leland delta hedging on a common-seed test set.
//!
//! Run `train_policy` first (or this example will train a quick policy
//! itself).
//!
//! ```bash
//! cargo run --release --example evaluate_policy
//! ```

use std::path::Path;

use impact_hedger::account::OptionSpec;
use impact_hedger::market::MarketParams;
use impact_hedger::policy::Checkpoint;
use impact_hedger::trainer::{evaluate_against_baselines, train, TrainConfig};

fn main() {
    let market = MarketParams::monthly_sp500().with_impact(1.02, 0.98);
    let option = OptionSpec::with_bs_premium(1000.0, 12, &market);

    let checkpoint_path = Path::new("runs/examples/train-low-liquidity/checkpoint_final.txt");
    let policy = if checkpoint_path.exists() {
        println!("loading {}", checkpoint_path.display());
        Checkpoint::load(checkpoint_path).unwrap().policy
    } else {
        println!("no checkpoint found, training a quick policy first...");
        let mut config = TrainConfig::new(market, option);
        config.hidden_layers = vec![32, 32];
        config.batch_size = 128;
        config.n_iterations = 1500;
        config.lr_decay_every = 750;
        train(&config, None).unwrap().policy
    };

    let n_paths = 50_000;
    let seed = 987_654;
    println!("evaluating on {n_paths} common-seed paths (seed {seed})...\n");
    let reports = evaluate_against_baselines(&policy, Some(5.0), n_paths, seed, &market, &option);
    println!(
        "{:>14} {:>12} {:>12} {:>10} {:>10} {:>12}",
        "strategy", "rho_hat", "mean_pnl", "std_pnl", "turnover", "excess_cost"
    );
    for r in &reports {
        println!(
            "{:>14} {:>12.3} {:>12.3} {:>10.3} {:>10.3} {:>12.3}",
            r.label, r.rho_hat, r.mean_profit, r.std_profit, r.mean_turnover, r.mean_excess_cost
        );
    }
    let drl = &reports[0];
    let best_baseline = reports[1].rho_hat.min(reports[2].rho_hat);
    println!(
        "\nlearned policy risk is {:.1}% of the best baseline's",
        100.0 * drl.rho_hat / best_baseline
    );
}
