//! Hedging position sequences along one simulated path for the three
//! liquidity levels, plus the Monte-Carlo turnover summary showing how
//! market impact dampens rebalancing.
//!
//! ```bash
//! cargo run --release --example path_comparison
//! ```

use std::path::Path;

use impact_hedger::account::OptionSpec;
use impact_hedger::config::ConfigFile;
use impact_hedger::experiments::run_path_comparison;
use impact_hedger::market::MarketParams;
use impact_hedger::trainer::{train, TrainConfig};

const LEVELS: [(f64, f64, &str); 3] = [
    (1.0, 1.0, "train-infinite-liquidity"),
    (1.01, 0.99, "train-high-liquidity"),
    (1.02, 0.98, "train-low-liquidity"),
];

fn main() {
    let root = Path::new("runs/examples/path-comparison");
    for (alpha, beta, dir) in LEVELS {
        let out = root.join(dir);
        if out.join("checkpoint_final.txt").exists() {
            continue;
        }
        let market = MarketParams::monthly_sp500().with_impact(alpha, beta);
        let option = OptionSpec::with_bs_premium(1000.0, 12, &market);
        let mut config = TrainConfig::new(market, option);
        config.hidden_layers = vec![32, 32];
        config.batch_size = 128;
        config.n_iterations = 800;
        config.lr_decay_every = 400;
        config.checkpoint_every = 0;
        println!("training (alpha = {alpha}, beta = {beta})...");
        train(&config, Some(&out)).unwrap();
    }

    let mut config_text = String::from("compare.n_paths = 4000\n");
    for (i, (_, _, dir)) in LEVELS.iter().enumerate() {
        config_text.push_str(&format!(
            "compare.level.{i}.checkpoint = {}\n",
            root.join(dir).join("checkpoint_final.txt").display()
        ));
    }
    let cfg = ConfigFile::parse(&config_text).unwrap();
    let outputs = run_path_comparison(&cfg, None, root).unwrap();
    for p in &outputs {
        println!("wrote {}", p.display());
    }

    let turnover = std::fs::read_to_string(&outputs[1]).unwrap();
    println!("\nmean turnover over 4000 common-seed paths:");
    for line in turnover.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        println!(
            "  {:>13} (alpha {:>4}, beta {:>4}): {:.4}",
            cells[0],
            cells[1],
            cells[2],
            cells[3].parse::<f64>().unwrap()
        );
    }
    println!("\nthe learned policy trades less as liquidity dries up.");
}
