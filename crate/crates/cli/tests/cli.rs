use std::process::{Command, Output};

fn precml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_precml")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn catalog_lists_every_target() {
    let o = precml(&["catalog"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("name,dim,max_arity,description\n"));
    for name in ["cos2x", "xy", "xyz", "dot3", "poly1d", "teacher"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name},"))), "{name} missing");
    }
    let o = precml(&["catalog", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.as_array().unwrap().iter().any(|e| e["name"] == "dot3" && e["dim"] == 6));
}

#[test]
fn sweep_then_powerlaw() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let csv = csv_path.to_str().unwrap();
    let o = precml(&["sweep", "--method", "simplex", "--target", "xy", "--sizes", "128,256,512", "--seed", "0", "--out", csv]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,target,n_train,n_params,seed,train_rmse_rel,test_rmse_rel,wall_seconds");
    assert_eq!(lines.len(), 4);
    for (line, n) in lines[1..].iter().zip([128, 256, 512]) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 8);
        assert_eq!((f[0], f[1], f[2], f[4]), ("simplex", "xy", n.to_string().as_str(), "0"));
        assert!(f[5].parse::<f64>().unwrap() <= 1e-12);
    }

    let o = precml(&["powerlaw", "--in", csv, "--floor", "1e-13"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("alpha,") && text.contains("r_squared,"));
    let o = precml(&["powerlaw", "--in", csv, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let alpha = v["alpha"].as_f64().unwrap();
    assert!(alpha > 0.5 && alpha < 1.5, "{alpha}");
}

#[test]
fn sweeps_are_deterministic_apart_from_timing() {
    let run = || {
        let o = precml(&["sweep", "--method", "spline-3", "--target", "cos2x", "--sizes", "16,32,64", "--seeds", "0,1", "--test-size", "3000"]);
        assert!(o.status.success());
        stdout(&o).lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 7);
    assert_eq!(a, b);
}

#[test]
fn fit_writes_a_model_and_spectrum_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("net.json");
    let m = model.to_str().unwrap();
    let o = precml(&[
        "fit", "--method", "tanh-mlp", "--target", "xy", "--size", "64", "--width", "5", "--hidden-layers", "1", "--optimizer", "bfgs", "--max-iters", "50",
        "--test-size", "500", "--out", m, "--format", "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(metrics["n_params"], 21);
    assert!(metrics["train_rmse_rel"].as_f64().unwrap() < 0.5);
    let net: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(net["layer_dims"], serde_json::json!([2, 5, 1]));

    let o = precml(&["spectrum", "--model", m, "--target", "xy", "--size", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,eigenvalue,grad_projection_abs");
    assert_eq!(lines.len(), 22);
    let eig: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(eig.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn boost_emits_both_phases() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("boosted.json");
    let hist = dir.path().join("history.csv");
    let o = precml(&[
        "boost", "--target", "poly1d", "--widths", "20,20", "--optimizer", "bfgs", "--max-iters", "150", "--size", "200",
        "--out", model.to_str().unwrap(), "--history", hist.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&hist).unwrap();
    assert!(text.starts_with("step,mse,rmse_rel,phase\n"));
    let phases: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(phases.into_iter().collect::<Vec<_>>(), vec!["stage1", "stage2"]);
    let net: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(net["layer_dims"], serde_json::json!([1, 40, 40, 1]));
}

#[test]
fn bad_flags_fail_with_usage() {
    let o = precml(&["sweep", "--method", "simplex"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = precml(&["fit", "--method", "lasso", "--target", "xy", "--size", "10"]);
    assert!(!o.status.success());
    let o = precml(&["catalog", "--format", "xml"]);
    assert!(!o.status.success());
}

#[test]
fn failed_cells_exit_zero_with_flagged_rows() {
    let o = precml(&["sweep", "--method", "simplex", "--target", "xy", "--sizes", "2", "--test-size", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().contains("NaN"));
}
