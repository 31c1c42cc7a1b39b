use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_multistage");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn multistage")
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().into_string().unwrap()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn run_writes_results_with_requested_seed_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = cli(&[
        "run",
        "fig7-D2L2",
        "--t",
        "200,400,800",
        "--seeds",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("fig7-D2L2_results.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(
        header,
        ["scenario", "policy", "D", "L", "T", "seed_count", "mean_time_avg_regret", "stddev"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(&r[5], "3");
        assert_eq!((&r[2], &r[3]), ("2", "2"));
        let m: f64 = r[6].parse().unwrap();
        assert!(m.is_finite());
    }
    assert!(out.join("fig7-D2L2_slopes.csv").is_file());
}

#[test]
fn invalid_config_exits_one_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "scenario = \"bad\"\n\
             topology = {{ kind = \"uniform\", fanout = 2, depth = 0 }}\n\
             environment = {{ kind = \"bernoulli\", p_min = 0.2 }}\n\
             policies = [{{ kind = \"eps-exp3\" }}]\n\
             horizon = {{ grid = [100] }}\n\
             output = {{ dir = {:?} }}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    for sub in ["validate", "run"] {
        let o = cli(&[sub, cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{sub}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("topology.depth"), "{sub}");
    }
    assert!(!out.exists());
    assert_eq!(files(dir.path()), ["bad.toml"]);
}

#[test]
fn scenarios_lists_every_bundled_config() {
    let o = cli(&["scenarios"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(names.len(), 10);
    for n in multistage::harness::bundled_names() {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn same_invocation_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = cli(&[
            "trace",
            "fig8-transient",
            "--t",
            "3000",
            "--seeds",
            "4",
            "--trace-window",
            "100",
            "--per-seed",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let names = files(&a);
    assert_eq!(names, files(&b));
    assert!(names.iter().any(|n| n.contains("_trace_exp3_T3000")));
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["run", "fig7-D2L2", "--bogus"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "no-such-scenario"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "fig7-D2L2", "--policy", "nope"]).status.code(), Some(1));
    assert_eq!(cli(&[]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}
