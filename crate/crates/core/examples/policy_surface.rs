//! Reproduces the mid-horizon policy surface: hedging position against
//! price and portfolio value, frictionless vs. impacted, next to both
//! baselines. Trains two quick policies, then runs the experiment exactly
//! as the CLI would.
//!
//! ```bash
//! cargo run --release --example policy_surface
//! ```

use std::path::Path;

use impact_hedger::account::OptionSpec;
use impact_hedger::config::ConfigFile;
use impact_hedger::experiments::run_policy_surface;
use impact_hedger::market::MarketParams;
use impact_hedger::trainer::{train, TrainConfig};

fn quick_policy(alpha: f64, beta: f64, out: &Path) {
    if out.join("checkpoint_final.txt").exists() {
        return;
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
    train(&config, Some(out)).unwrap();
}

fn main() {
    let root = Path::new("runs/examples/policy-surface");
    quick_policy(1.0, 1.0, &root.join("train-frictionless"));
    quick_policy(1.01, 0.99, &root.join("train-impact"));

    let config_text = format!(
        "surface.level.0.checkpoint = {}\n\
         surface.level.1.checkpoint = {}\n\
         surface.s_min = 700\n\
         surface.s_max = 1300\n\
         surface.s_count = 25\n",
        root.join("train-frictionless/checkpoint_final.txt").display(),
        root.join("train-impact/checkpoint_final.txt").display(),
    );
    let cfg = ConfigFile::parse(&config_text).unwrap();
    let outputs = run_policy_surface(&cfg, None, root).unwrap();
    for p in &outputs {
        println!("wrote {}", p.display());
    }

    // Show the impacted panel at the central value level.
    let csv = std::fs::read_to_string(&outputs[0]).unwrap();
    println!("\npositions at V = V_0, alpha = 1.01 (S, X_drl, X_bs, X_leland):");
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let (alpha, v): (f64, f64) = (cells[0].parse().unwrap(), cells[3].parse().unwrap());
        let v0_row = (v / 77.75 - 1.0).abs() < 0.02;
        if alpha > 1.0 && v0_row {
            let s: f64 = cells[2].parse().unwrap();
            if (s as i64) % 100 == 0 {
                println!(
                    "  {:>6.0} {:>8.4} {:>8.4} {:>8.4}",
                    s,
                    cells[4].parse::<f64>().unwrap(),
                    cells[5].parse::<f64>().unwrap(),
                    cells[6].parse::<f64>().unwrap()
                );
            }
        }
    }
}
