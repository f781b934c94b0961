//! End-to-end tests of the command-line surface: exit codes, output
//! shapes, manifests and experiment-level contracts.

use std::path::{Path, PathBuf};

use impact_hedger::cli::{
    cli_main, EXIT_CONFIG, EXIT_MISSING_CHECKPOINT, EXIT_OK, EXIT_USAGE,
};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["impact-hedger".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    cli_main(argv)
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

const TINY_TRAIN: &str = "market.alpha = 1.01\n\
                          market.beta = 0.99\n\
                          train.batch_size = 8\n\
                          train.n_iterations = 25\n\
                          train.hidden_layers = 4\n\
                          train.checkpoint_every = 10\n";

fn train_tiny(root: &Path, name: &str) -> PathBuf {
    let cfg = write(&root.join(format!("{name}.conf")), TINY_TRAIN);
    let out = root.join(name);
    let code = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    out.join("checkpoint_final.txt")
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["no-such-command"]), EXIT_USAGE);
    assert_eq!(run(&["train", "--config", "x.conf", "--bogus-flag"]), EXIT_USAGE);
    assert_eq!(run(&["train"]), EXIT_USAGE); // --config is required
    assert_eq!(run(&["--help"]), EXIT_OK);
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // Unreadable config file.
    assert_eq!(
        run(&["train", "--config", "/nonexistent/x.conf", "--out", out.to_str().unwrap()]),
        EXIT_CONFIG
    );
    // Malformed line.
    let bad = write(&dir.path().join("bad.conf"), "market.alpha 1.01\n");
    assert_eq!(
        run(&["train", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_CONFIG
    );
    // Unknown key.
    let typo = write(&dir.path().join("typo.conf"), "market.alhpa = 1.01\n");
    assert_eq!(
        run(&["train", "--config", typo.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_CONFIG
    );
    // Invalid value.
    let invalid = write(&dir.path().join("invalid.conf"), "market.beta = 2.0\n");
    assert_eq!(
        run(&["train", "--config", invalid.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_CONFIG
    );
}

#[test]
fn missing_checkpoints_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // evaluate without any checkpoint key.
    let no_key = write(&dir.path().join("nokey.conf"), "evaluate.n_paths = 10\n");
    assert_eq!(
        run(&["evaluate", "--config", no_key.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_MISSING_CHECKPOINT
    );
    // evaluate pointing at a nonexistent file.
    let gone = write(
        &dir.path().join("gone.conf"),
        "evaluate.checkpoint = /nonexistent/checkpoint.txt\nevaluate.n_paths = 10\n",
    );
    assert_eq!(
        run(&["evaluate", "--config", gone.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_MISSING_CHECKPOINT
    );
    // experiments name the missing run the same way.
    let surface = write(&dir.path().join("surface.conf"), "surface.s_count = 5\n");
    assert_eq!(
        run(&["policy-surface", "--config", surface.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_MISSING_CHECKPOINT
    );
}

#[test]
fn train_twice_produces_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_tiny(dir.path(), "a");
    let b = train_tiny(dir.path(), "b");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn policy_surface_row_count_is_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let ck = train_tiny(dir.path(), "train");
    let cfg = write(
        &dir.path().join("surface.conf"),
        &format!(
            "surface.level.0.checkpoint = {ck}\n\
             surface.level.1.checkpoint = {ck}\n\
             surface.s_count = 13\n\
             surface.v_count = 4\n",
            ck = ck.display()
        ),
    );
    let out = dir.path().join("surface");
    assert_eq!(
        run(&["policy-surface", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_OK
    );
    let csv = std::fs::read_to_string(out.join("policy_surface.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 13 * 4 * 2);

    // Frictionless level: Leland coincides with Black-Scholes, and both
    // baselines are constant in V while the policy column may vary.
    let mut bs_by_s: std::collections::HashMap<String, Vec<(String, String)>> = Default::default();
    for row in &rows {
        let cells: Vec<&str> = row.split(',').collect();
        let (alpha, s, _v) = (cells[0], cells[2], cells[3]);
        if alpha == "1" {
            assert_eq!(cells[5], cells[6], "leland must equal bs at alpha = beta = 1");
        }
        bs_by_s
            .entry(format!("{alpha}/{s}"))
            .or_default()
            .push((cells[5].to_string(), cells[4].to_string()));
    }
    let mut drl_varies_somewhere = false;
    for group in bs_by_s.values() {
        let (bs0, _) = &group[0];
        assert!(group.iter().all(|(bs, _)| bs == bs0), "baseline varies with V_t");
        let (_, drl0) = &group[0];
        drl_varies_somewhere |= group.iter().any(|(_, drl)| drl != drl0);
    }
    assert!(drl_varies_somewhere, "policy column never reacts to V_t");

    // The manifest reproduces the run byte for byte.
    let rerun = dir.path().join("surface-rerun");
    let manifest = out.join("manifest.conf");
    assert_eq!(
        run(&["policy-surface", "--config", manifest.to_str().unwrap(), "--out", rerun.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(
        std::fs::read(out.join("policy_surface.csv")).unwrap(),
        std::fs::read(rerun.join("policy_surface.csv")).unwrap()
    );
}

#[test]
fn path_comparison_emits_positions_and_turnover() {
    let dir = tempfile::tempdir().unwrap();
    let ck = train_tiny(dir.path(), "train");
    let cfg = write(
        &dir.path().join("compare.conf"),
        &format!(
            "compare.level.0.checkpoint = {ck}\n\
             compare.level.1.checkpoint = {ck}\n\
             compare.level.2.checkpoint = {ck}\n\
             compare.n_paths = 50\n",
            ck = ck.display()
        ),
    );
    let out = dir.path().join("compare");
    assert_eq!(
        run(&["path-comparison", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_OK
    );
    let csv = std::fs::read_to_string(out.join("path_comparison.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 2 + 1 + 6);
    assert_eq!(lines.count(), 13); // t = 0..=12
    let turnover = std::fs::read_to_string(out.join("turnover_summary.csv")).unwrap();
    assert_eq!(turnover.lines().count(), 1 + 1 + 6);

    // All strategies start from a zero position: the first action leads
    // from X_0 = 0 for every column.
    let second = csv.lines().nth(1).unwrap();
    assert!(second.starts_with("0,"));
}

#[test]
fn pin_risk_episode_records_respect_persistence_limits() {
    let dir = tempfile::tempdir().unwrap();
    // Train one tiny pin-market policy and reuse it for all three levels.
    let pin_train = write(
        &dir.path().join("pin-train.conf"),
        "market.dt_years = 0.000496031746031746\n\
         market.alpha = 1.001\n\
         market.beta = 0.999\n\
         option.horizon_steps = 8\n\
         train.batch_size = 8\n\
         train.n_iterations = 25\n\
         train.hidden_layers = 4\n\
         train.checkpoint_every = 0\n",
    );
    let train_out = dir.path().join("pin-policy");
    assert_eq!(
        run(&["train", "--config", pin_train.to_str().unwrap(), "--seed", "3", "--out", train_out.to_str().unwrap()]),
        EXIT_OK
    );
    let ck = train_out.join("checkpoint_final.txt");
    let cfg = write(
        &dir.path().join("pin.conf"),
        &format!(
            "pin.level.0.checkpoint = {ck}\n\
             pin.level.1.checkpoint = {ck}\n\
             pin.level.2.checkpoint = {ck}\n",
            ck = ck.display()
        ),
    );
    let out = dir.path().join("pin");
    assert_eq!(
        run(&["pin-risk", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_OK
    );

    let parse_episode = |name: &str| -> Vec<Vec<f64>> {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        text.lines()
            .skip(1)
            .map(|l| {
                l.split(',')
                    .map(|c| c.parse::<f64>().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect()
    };

    // lambda = inf: persistence states are exactly zero at every step.
    let rows = parse_episode("episode_lambda_inf.csv");
    for row in &rows {
        assert_eq!(row[7], 0.0, "impact_a must be 0 under lambda = inf");
        assert_eq!(row[8], 0.0, "impact_b must be 0 under lambda = inf");
    }

    // lambda = 0: A_t accumulates the positive trade parts exactly.
    let rows = parse_episode("episode_lambda_zero.csv");
    let mut prev_x = 0.0;
    let mut acc = 0.0;
    for row in rows.iter().take(8) {
        // Columns: path_id,t,s_t,x_next,cost,cash,value,impact_a,impact_b.
        assert_eq!(row[7], acc, "A_t must equal the accumulated buys");
        let dx = row[3] - prev_x;
        acc += dx.max(0.0);
        prev_x = row[3];
    }
    assert_eq!(rows[8][7], acc, "terminal A_T mismatch");

    let summary = std::fs::read_to_string(out.join("pin_risk_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 + 3);
}

#[test]
fn constant_price_baselines_are_drift_free() {
    let dir = tempfile::tempdir().unwrap();
    let ck = train_tiny(dir.path(), "train");
    let mut cfg_text = String::new();
    for i in 0..3 {
        cfg_text.push_str(&format!(
            "constant.level.{i}.checkpoint_mu_trained = {ck}\n\
             constant.level.{i}.checkpoint_mu_zero = {ck}\n",
            ck = ck.display()
        ));
    }
    let cfg = write(&dir.path().join("constant.conf"), &cfg_text);
    let out = dir.path().join("constant");
    assert_eq!(
        run(&["constant-price", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        EXIT_OK
    );
    let csv = std::fs::read_to_string(out.join("constant_price.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    // One shared BS column (drift never enters the baselines), plus per
    // level: leland and the two drift-trained policy columns.
    assert_eq!(header.split(',').count(), 2 + 1 + 3 * 3);
    assert_eq!(csv.lines().count(), 1 + 13);
    // The price column is pinned at the strike.
    for line in csv.lines().skip(1) {
        let s: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(s, 1000.0);
    }
}

#[test]
fn seed_override_changes_the_display_path() {
    let dir = tempfile::tempdir().unwrap();
    let ck = train_tiny(dir.path(), "train");
    let cfg = write(
        &dir.path().join("compare.conf"),
        &format!(
            "compare.level.0.checkpoint = {ck}\n\
             compare.level.1.checkpoint = {ck}\n\
             compare.level.2.checkpoint = {ck}\n\
             compare.n_paths = 20\n",
            ck = ck.display()
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert_eq!(
        run(&["path-comparison", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out_a.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(
        run(&["path-comparison", "--config", cfg.to_str().unwrap(), "--seed", "2", "--out", out_b.to_str().unwrap()]),
        EXIT_OK
    );
    let a = std::fs::read_to_string(out_a.join("path_comparison.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("path_comparison.csv")).unwrap();
    assert_ne!(a, b, "different seeds must change the display path");
}
