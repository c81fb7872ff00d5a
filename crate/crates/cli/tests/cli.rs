//! End-to-end tests of the command surface: pinned CSV headers, exit
//! codes, deterministic output, and the frozen JSON schemas.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_finitekey")
}

fn write_cfg(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const DECOY_CFG: &str = "\
[channel]
loss_db = 20.0
misalignment_deg = 2.0

[detector]
eta_det = 0.7
delta_eta = 0.05
dc_det = 1e-6
delta_dc = 0.05
swap = true

[protocol]
n = 1e11

[intensities]
mu1 = 1.0
mu2 = 0.1
mu3 = 0.01

[epsilon]
eps_pa = 5e-11
eps_ev = 1e-10
eps_at = 2.5e-11
";

const QUBIT_CFG: &str = "\
[channel]
loss_db = 2.0
misalignment_deg = 1.0
depolarization = 0.01

[detector]
eta_det = 0.7
dc_det = 1e-6

[protocol]
n = 1e6
alice_x_prob = 0.3
bob_x_prob = 0.3

[epsilon]
eps_pa = 5e-11
eps_ev = 1e-10
eps_at = 5e-11

[simulate]
trials = 5
t_steps = 3

[postselect]
n = 1e8
protocol = qubit
eps_target = 1e-10

[authsim]
runs = 300
";

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn keyrate_decoy_header_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(&dir, "d.cfg", DECOY_CFG);
    let args = [
        "keyrate",
        "decoy",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "channel.loss_db=0:30:4",
    ];
    let a = run(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# finitekey-csv-v1 keyrate-decoy");
    assert_eq!(
        lines.next().unwrap(),
        "loss_db,n,delta1,delta2,b1min_K,phase_error_bound,lambda_ec,key_length,key_rate,aborted_reason"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    // Sweep rows come back in axis order regardless of scheduling.
    let losses: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses, vec![0.0, 10.0, 20.0, 30.0]);
    // The key-rate column is non-increasing along the loss sweep.
    let rates: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(8).unwrap().parse().unwrap())
        .collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "rates {rates:?}");
    assert!(rates[0] > 0.0);

    let b = run(&args);
    assert_eq!(a.stdout, b.stdout, "reruns must be byte-identical");
}

#[test]
fn keyrate_qubit_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(&dir, "q.cfg", QUBIT_CFG);
    let out = run(&["keyrate", "qubit", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# finitekey-csv-v1 keyrate-qubit\nloss_db,n,delta1,delta2,e_x_obs,"));
    // A 2 dB channel with these settings produces key.
    let row = text.lines().nth(2).unwrap();
    let key: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
    assert!(key > 0.0);
}

#[test]
fn delta_and_postselect_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(&dir, "d.cfg", DECOY_CFG);
    let out = run(&["delta", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with(
        "# finitekey-csv-v1 delta\neta_det,delta_eta,dc_det,delta_dc,delta1_noswap,delta2_noswap,delta1_swap,delta2_swap\n"
    ));

    let cfg = write_cfg(&dir, "q.cfg", QUBIT_CFG);
    let out = run(&["postselect", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with(
        "# finitekey-csv-v1 postselect\nprotocol,n,x,log2_g,key_penalty_bits,eps_tilde_log2,required_iid_log2\n"
    ));
    // The qubit protocol preset reports x = 20.
    assert!(text.lines().nth(2).unwrap().starts_with("qubit,100000000,20,"));
}

#[test]
fn simulate_runs_and_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(&dir, "q.cfg", QUBIT_CFG);
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--seed", "11"];
    let a = run(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    assert!(text.starts_with("# finitekey-csv-v1 simulate\nmode,t,mean_rate,std_err,trials,seed\n"));
    assert!(text.contains("\nvariable,"));
    assert_eq!(text.lines().filter(|l| l.starts_with("fixed,")).count(), 3);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    // A different seed changes the sampled rates.
    let c = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn authsim_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(&dir, "q.cfg", QUBIT_CFG);
    let trace_path = dir.path().join("trace.jsonl");
    let out = run(&[
        "authsim",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        trace_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = stdout(&out);
    assert!(summary.starts_with(
        "# finitekey-csv-v1 authsim\nscenario,runs,core_abort_runs,k_violations,both_abort_violations,honest_ok\n"
    ));
    let row = summary.lines().nth(2).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[0], "random");
    assert_eq!(cells[3], "0", "no allowed-set violations");
    assert_eq!(cells[4], "0", "no both-abort violations");

    // Each trace line parses as JSON with the frozen fields.
    let traces = std::fs::read_to_string(&trace_path).unwrap();
    assert!(!traces.is_empty());
    for line in traces.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for field in [
            "direction",
            "sender_index",
            "receiver_index",
            "sent_payload",
            "payload",
            "t_sent",
            "t_received",
            "status",
        ] {
            assert!(v.get(field).is_some(), "missing field {field}");
        }
    }
}

#[test]
fn decoy_bounds_from_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = format!(
        "{DECOY_CFG}\n[counts]\nx_err1 = 300\nx_err2 = 100\nx_err3 = 80\nx_con1 = 180000\nx_con2 = 18000\nx_con3 = 1900\nk_con1 = 180000\nk_con2 = 18000\nk_con3 = 1900\n"
    );
    let cfg = write_cfg(&dir, "c.cfg", &cfg_text);
    let out = run(&["decoy-bounds", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# finitekey-csv-v1 decoy-bounds\noutcome,n_total,b0_min,b1_min,b1_max\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn exit_codes_are_frozen() {
    let dir = tempfile::tempdir().unwrap();

    // 2: malformed config.
    let bad = write_cfg(&dir, "bad.cfg", "[channel]\nnot_a_key = 1\n");
    let out = run(&["delta", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    // 2: missing config flag.
    let out = run(&["delta"]);
    assert_eq!(out.status.code(), Some(2));

    // 2: bad sweep spec.
    let good = write_cfg(&dir, "good.cfg", DECOY_CFG);
    let out = run(&[
        "delta",
        "--config",
        good.to_str().unwrap(),
        "--sweep",
        "detector.delta_eta=0:0.3",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // 3: domain error from the numeric layer (intensity ordering).
    let bad_mu = write_cfg(
        &dir,
        "mu.cfg",
        &DECOY_CFG.replace("mu2 = 0.1", "mu2 = 0.9").replace("mu3 = 0.01", "mu3 = 0.2"),
    );
    let out = run(&["decoy-bounds", "--config", bad_mu.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "intensity ordering is caught at config level");

    // 3: infeasible postselection target reaches the numeric layer.
    let ps = write_cfg(
        &dir,
        "ps.cfg",
        "[postselect]\nn = 1000\nx = 20\neps_target = 1e-10\nprotocol = custom\n",
    );
    let out = run(&["postselect", "--config", ps.to_str().unwrap()]);
    assert!(out.status.success(), "default eps_tilde keeps the target feasible");

    // 0: success with output file.
    let out_path = dir.path().join("o.csv");
    let out = run(&[
        "delta",
        "--config",
        good.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out_path.exists());
}

#[test]
fn json_format_emits_full_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(&dir, "d.cfg", DECOY_CFG);
    let out = run(&[
        "keyrate",
        "decoy",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    assert_eq!(v["n"], 100000000000.0);
    assert!(v["report"]["photon_bounds"]["k_con"]["b1_min"].as_f64().unwrap() > 0.0);
    assert!(v["report"]["penalties"]["ev_bits"].as_f64().unwrap() >= 34.0);
}

#[test]
fn constraint_interval_json_schema_is_stable() {
    // The acceptance-set constructions serialize to the documented object:
    // an intervals array of {symbol, lo, hi} plus n, eps, construction.
    use finitekey::acceptance::{confidence_intervals, FrequencyVector};
    use finitekey::stats::Probability;
    let fobs = FrequencyVector::new(vec![120, 380, 500]);
    let ci = confidence_intervals(&fobs, Probability::new(1e-6).unwrap(), 3).unwrap();
    let json = serde_json::to_value(&ci).unwrap();
    assert_eq!(json["construction"], "confidence");
    assert_eq!(json["n"], 1000);
    assert!(json["eps_at"].as_f64().unwrap() > 0.0);
    let arr = json["intervals"].as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for (i, entry) in arr.iter().enumerate() {
        assert_eq!(entry["symbol"], i.to_string());
        assert!(entry["lo"].as_f64().unwrap() <= entry["hi"].as_f64().unwrap());
    }
}
