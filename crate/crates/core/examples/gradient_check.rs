//! Reverse-mode gradients of a full hedging episode checked against
//! central finite differences.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use impact_hedger::account::OptionSpec;
use impact_hedger::autodiff::{gradient, Real, Tape};
use impact_hedger::market::{simulate_path, MarketParams};
use impact_hedger::policy::{ffnn_forward, Activation, PolicyParams};
use impact_hedger::trainer::{normalize_state, rollout_episode, semi_quadratic_risk};

fn main() {
    let market = MarketParams::monthly_sp500()
        .with_impact(1.02, 0.98)
        .with_persistence(2.0f64.ln(), 2.0f64.ln());
    let option = OptionSpec::with_bs_premium(1000.0, 4, &market);
    let mut policy = PolicyParams::init(&[2], Activation::Relu, 5);
    for (i, w) in policy.theta.iter_mut().enumerate() {
        *w = 0.3 * ((i as f64) * 0.9).cos();
    }
    let paths: Vec<_> = (0..8).map(|i| simulate_path(&market, 4, 13, i)).collect();
    println!(
        "episode batch: {} paths, horizon {}, {} parameters, impact (1.02, 0.98), lambda = ln 2",
        paths.len(),
        option.horizon,
        policy.theta.len()
    );

    // Taped gradient of the batch risk.
    let tape = Tape::new();
    let theta_vars = tape.leaves(&policy.theta);
    let witness = theta_vars[0];
    let losses: Vec<_> = paths
        .iter()
        .map(|p| {
            rollout_episode(
                &policy.layer_sizes,
                policy.activation,
                &theta_vars,
                p,
                &option,
                &market,
                None,
                witness,
            )
            .unwrap()
            .loss
        })
        .collect();
    let rho = semi_quadratic_risk(&losses);
    let grad = gradient(&tape, rho, &theta_vars).unwrap();
    println!("rho = {:.4}, recorded {} tape values", rho.value(), tape.len());

    // Finite differences of the same batch risk as plain floats.
    let batch_risk = |theta: &[f64]| {
        let losses: Vec<f64> = paths
            .iter()
            .map(|p| {
                impact_hedger::account::run_episode(p, &option, &market, 0.0f64, |t, s, state, v| {
                    let features = normalize_state(
                        t,
                        option.horizon,
                        s,
                        &state.impact,
                        state.position,
                        v,
                        option.strike,
                        option.premium,
                    );
                    ffnn_forward(&policy.layer_sizes, policy.activation, theta, &features)
                })
                .unwrap()
                .record
                .loss()
            })
            .collect();
        semi_quadratic_risk(&losses)
    };
    let h = 1e-5;
    let mut theta = policy.theta.clone();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let saved = theta[i];
        theta[i] = saved + h;
        let up = batch_risk(&theta);
        theta[i] = saved - h;
        let down = batch_risk(&theta);
        theta[i] = saved;
        let fd = (up - down) / (2.0 * h);
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-10);
        worst = worst.max(rel);
        if i < 5 {
            println!("  theta[{i}]: ad {:+.6e}  fd {:+.6e}  rel {rel:.2e}", grad[i], fd);
        }
    }
    println!("max elementwise relative error over {} params: {worst:.2e}", theta.len());
    assert!(worst < 1e-5);
    println!("within 1e-5 of central finite differences");
}
