//! The limit-order-book impact model: supply curves, marginal trades on
//! top of consumed depth, and persistence decay.
//!
//! ```bash
//! cargo run --release --example impact_model
//! ```

use impact_hedger::market::{impact_trade, persistence_step, supply_curve, ImpactState, MarketParams, Side};

fn main() {
    let s = 1000.0;
    println!("cost of buying x shares at mid {s} (excess over mid-price execution):");
    println!("{:>6} {:>12} {:>12} {:>12}", "x", "alpha=1.00", "alpha=1.01", "alpha=1.02");
    for x in [0.1, 0.25, 0.5, 1.0, 2.0] {
        let row: Vec<f64> = [1.0, 1.01, 1.02]
            .iter()
            .map(|&a| supply_curve(Side::Buy, s, x, a) - s * x)
            .collect();
        println!("{x:>6} {:>12.3} {:>12.3} {:>12.3}", row[0], row[1], row[2]);
    }

    println!("\nrevenue shortfall selling x shares (mid-price minus revenue):");
    println!("{:>6} {:>12} {:>12} {:>12}", "x", "beta=1.00", "beta=0.99", "beta=0.98");
    for x in [0.1, 0.25, 0.5, 1.0, 2.0] {
        let row: Vec<f64> = [1.0, 0.99, 0.98]
            .iter()
            .map(|&b| s * x - supply_curve(Side::Sell, s, x, b))
            .collect();
        println!("{x:>6} {:>12.3} {:>12.3} {:>12.3}", row[0], row[1], row[2]);
    }

    // Consumed depth makes the next trade dearer.
    let alpha = 1.01;
    println!("\nbuying 0.5 shares with prior consumed depth y (alpha = {alpha}):");
    for y in [0.0, 0.5, 1.0, 2.0] {
        let cost = impact_trade(Side::Buy, s, y, 0.5, alpha);
        println!("  y = {y:>4}: cost {cost:.3}");
    }

    // Persistence: the same trade sequence under three decay regimes.
    println!("\nbuy-side persistence A_t after repeated 0.5-share buys:");
    let trades = [0.5, 0.5, 0.5, 0.0, 0.0];
    for (label, lambda) in [("inf", f64::INFINITY), ("ln 2", 2.0f64.ln()), ("0", 0.0)] {
        let params = MarketParams::monthly_sp500().with_persistence(lambda, lambda);
        let mut state = ImpactState { a: 0.0, b: 0.0 };
        let mut trace = Vec::new();
        for &dx in &trades {
            state = persistence_step(&state, dx, &params);
            trace.push(format!("{:.3}", state.a));
        }
        println!("  lambda = {label:>5}: [{}]", trace.join(", "));
    }
}
