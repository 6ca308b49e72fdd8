use std::fs;
use std::process::{Command, Output};

fn fracboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracboot")).args(args).env_remove("FRACBOOT_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_then_estimate_and_correct() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("y.txt");
    let s = series.to_str().unwrap();
    stdout(&fracboot(&["simulate", "--d", "0.3", "--phi", "0.2", "--T", "400", "--seed", "5", "--out", s]));
    let values = fs::read_to_string(&series).unwrap();
    assert_eq!(values.lines().count(), 400);

    let again = dir.path().join("y2.txt");
    stdout(&fracboot(&["simulate", "--d", "0.3", "--phi", "0.2", "--T", "400", "--seed", "5", "--out", again.to_str().unwrap()]));
    assert_eq!(fs::read(&series).unwrap(), fs::read(&again).unwrap());

    let out = stdout(&fracboot(&["estimate", "--in", s, "--family", "lpr", "--P", "1"]));
    assert!(out.contains("LPR(1)"));
    assert!(out.contains("N              66"));

    let out = stdout(&fracboot(&["bias-correct", "--in", s, "--family", "splw", "--B", "20", "--iterate", "--seed", "3"]));
    for field in ["d_hat", "bias_hat", "d_tilde", "hpd_95", "stop"] {
        assert!(out.contains(field), "missing {field} in\n{out}");
    }
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fracboot"));
        c.args(["simulate", "--d", "0.1", "--T", "30"]);
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        match env {
            Some(e) => c.env("FRACBOOT_SEED", e),
            None => c.env_remove("FRACBOOT_SEED"),
        };
        c.output().unwrap()
    };
    let from_env = stdout(&run(Some("8"), None));
    assert_eq!(from_env, stdout(&run(None, Some("8"))));
    assert_eq!(stdout(&run(Some("1"), Some("8"))), from_env);
    assert!(!run(None, None).status.success());
}

#[test]
fn several_series_become_columns() {
    let out = stdout(&fracboot(&["simulate", "--d", "0", "--T", "10", "--n", "3", "--seed", "1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "y1,y2,y3");
    assert_eq!(lines.len(), 11);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));
}

#[test]
fn exit_codes() {
    let bad_param = fracboot(&["simulate", "--d", "0.7", "--T", "10", "--seed", "1"]);
    assert_eq!(bad_param.status.code(), Some(2));
    let bad_flag = fracboot(&["estimate", "--family", "gph"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nreplications = 2\nT = [100]\nd = [0.9]\nphi = [0.0]\n[[estimator]]\nfamily = \"lpr\"\np = 0\n").unwrap();
    let out = fracboot(&["mc-run", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let flat = dir.path().join("flat.txt");
    fs::write(&flat, "1\n".repeat(64)).unwrap();
    let out = fracboot(&["estimate", "--in", flat.to_str().unwrap(), "--family", "lpr"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn mc_run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("design.toml");
    fs::write(&cfg, "seed = 4\nreplications = 3\nT = [120]\nd = [0.1]\nphi = [0.3]\n[[estimator]]\nfamily = \"splw\"\np = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    stdout(&fracboot(&[
        "mc-run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--statistic",
        "bias",
        "--statistic",
        "mse",
    ]));
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("T,d,phi,estimator,P,correction,K,statistic,value,R_effective,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("120,0.1,0.3,SPLW,1,none,0,bias,"));
    assert!(rows[0].ends_with(",3,4"));
    assert!(fs::read_to_string(out_dir.join("summary.txt")).unwrap().contains("wall_time_s"));
}
