use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ctdr(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctdr"));
    cmd.args(args).env_remove("CTDR_SEED");
    if let Some(s) = env_seed {
        cmd.env("CTDR_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    ctdr(&args, None)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const COMMANDS: [(&str, &str, &[&str]); 4] = [
    ("simulate", "simulate_small.conf", &["report.csv"]),
    ("dr-matrix", "dr_small.conf", &["report.csv"]),
    (
        "diagnose",
        "diagnose_small.conf",
        &[
            "tv_gap.csv",
            "tv_gap_smooth.csv",
            "norm_decay.csv",
            "rates.csv",
            "rates_detail.csv",
        ],
    ),
    ("decompose", "decompose_small.conf", &["decomposition.csv"]),
];

#[test]
fn outputs_match_golden_files() {
    for (sub, conf, files) in COMMANDS {
        let dir = TempDir::new().unwrap();
        let o = run(sub, &fixture(conf), dir.path(), &[]);
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
        for file in files {
            let golden = std::fs::read_to_string(fixture(&format!("golden/{sub}/{file}"))).unwrap();
            assert_eq!(read(dir.path(), file), golden, "{sub}/{file}");
        }
    }
}

#[test]
fn headers_are_frozen() {
    let dir = TempDir::new().unwrap();
    assert!(run("simulate", &fixture("simulate_small.conf"), dir.path(), &[])
        .status
        .success());
    let report = read(dir.path(), "report.csv");
    assert_eq!(
        report.lines().next().unwrap(),
        "cell,n,R,bias,sd,mean_se,coverage,mcse,failures"
    );
    assert_eq!(report.lines().count(), 3);
    assert!(report.lines().nth(1).unwrap().starts_with("oracle-oracle,100,20,"));
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    for (sub, conf, files) in COMMANDS {
        let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
        for (dir, threads) in dirs.iter().zip(["1", "8", "8"]) {
            let o = run(sub, &fixture(conf), dir.path(), &["--threads", threads]);
            assert!(o.status.success(), "{sub}: {}", stderr(&o));
        }
        for file in files {
            let first = read(dirs[0].path(), file);
            for dir in &dirs[1..] {
                assert_eq!(read(dir.path(), file), first, "{sub}/{file}");
            }
        }
    }
}

#[test]
fn missing_scenario_exits_two() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "run.n = 100\n").unwrap();
    let o = run("simulate", &conf, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("CTDR-E2:"), "{err}");
    assert!(err.contains("dgp.scenario"), "{err}");
}

#[test]
fn bad_flags_exit_two() {
    let o = ctdr(&["simulate", "--config"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("CTDR-E2:"));
}

#[test]
fn unreadable_config_exits_one() {
    let dir = TempDir::new().unwrap();
    let o = run("simulate", &dir.path().join("absent.conf"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("CTDR-E1:"));
}

#[test]
fn failing_replications_exit_three() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("nocens.conf");
    std::fs::write(
        &conf,
        "dgp.scenario=censoring\ndgp.coarsening_rate=0\nrun.n=100\nrun.replications=3\nnuisance.coarsening=correct\n",
    )
    .unwrap();
    let o = run("simulate", &conf, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("CTDR-E3:"));
}

#[test]
fn seed_flag_beats_environment() {
    let conf = fixture("simulate_small.conf");
    let go = |extra: &[&str], env: Option<&str>| {
        let dir = TempDir::new().unwrap();
        let mut args = vec![
            "simulate",
            "--config",
            conf.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = ctdr(&args, env);
        assert!(o.status.success(), "{}", stderr(&o));
        (read(dir.path(), "report.csv"), read(dir.path(), "manifest.json"))
    };
    let (base, _) = go(&[], None);
    let (env, manifest) = go(&[], Some("5"));
    assert_ne!(base, env);
    assert!(manifest.contains("\"master_seed\": 5"));
    let (flag, manifest) = go(&["--seed", "42"], Some("5"));
    assert_eq!(flag, base);
    assert!(manifest.contains("\"master_seed\": 42"));
}

#[test]
fn manifest_lists_outputs_and_digest() {
    let dir = TempDir::new().unwrap();
    assert!(run("decompose", &fixture("decompose_small.conf"), dir.path(), &[])
        .status
        .success());
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "decompose");
    assert_eq!(manifest["outputs"], serde_json::json!(["decomposition.csv"]));
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 16);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}
