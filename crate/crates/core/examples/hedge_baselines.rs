//! Delta-hedging baselines through the self-financing account: positions
//! along one path, and the classical risk reduction from rebalancing more
//! often in a frictionless market.
//!
//! ```bash
//! cargo run --release --example hedge_baselines
//! ```

use impact_hedger::account::OptionSpec;
use impact_hedger::baselines::{baseline_rollout, calibrate_k, leland_sigma, BaselineKind};
use impact_hedger::market::{simulate_path, MarketParams};
use impact_hedger::trainer::{evaluate, Strategy};

fn main() {
    let market = MarketParams::monthly_sp500().with_impact(1.01, 0.99);
    let option = OptionSpec::with_bs_premium(1000.0, 12, &market);
    let k = calibrate_k(market.beta);
    println!(
        "Leland calibration: beta = {} -> k = {:.6}, sigma {:.4} -> {:.4}",
        market.beta,
        k,
        market.sigma,
        leland_sigma(market.sigma, k, market.dt)
    );

    let path = simulate_path(&market, 12, 7, 0);
    let bs = baseline_rollout(BaselineKind::BlackScholes, &path, &option, &market);
    let leland = baseline_rollout(BaselineKind::leland_calibrated(market.beta), &path, &option, &market);
    println!("\npositions along one seeded path (strike 1000, premium {:.2}):", option.premium);
    println!("{:>3} {:>10} {:>10} {:>10}", "t", "S_t", "X_bs", "X_leland");
    for t in 0..12 {
        println!(
            "{t:>3} {:>10.2} {:>10.4} {:>10.4}",
            path.prices[t], bs.actions[t], leland.actions[t]
        );
    }
    println!("terminal P&L: bs {:.2}, leland {:.2}", bs.profit, leland.profit);

    // Frictionless convergence: daily rebalancing carries less risk than
    // monthly on a common-seed test set.
    let frictionless = MarketParams::monthly_sp500();
    let strategy = Strategy::Baseline(BaselineKind::BlackScholes);
    let monthly = evaluate(&strategy, 20_000, 99, &frictionless, &option);
    let daily_market = MarketParams {
        dt: 1.0 / 252.0,
        ..frictionless
    };
    let daily_option = OptionSpec::with_bs_premium(1000.0, 252, &daily_market);
    let daily = evaluate(&strategy, 20_000, 99, &daily_market, &daily_option);
    println!("\nfrictionless semi-quadratic risk, 20k common-seed paths:");
    println!("  monthly (T=12)  rho = {:.2}", monthly.rho_hat);
    println!("  daily  (T=252)  rho = {:.2}", daily.rho_hat);
    assert!(daily.rho_hat < monthly.rho_hat);
    println!("  finer rebalancing reduces risk, as it should");
}
