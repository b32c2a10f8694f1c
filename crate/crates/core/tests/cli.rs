use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "dataset.path = synthetic:400:2\nstrategies = cafda, random\nhorizon = 20\nreplications = 2\n\
                      split.init_fraction = 0.05\nestimator.n_trees = 20\n";

fn cafda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cafda"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("CAFDA_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), CONFIG).unwrap();
    dir
}

#[test]
fn run_writes_logs_curves_and_metadata() {
    let dir = setup();
    let o = cafda(dir.path(), &["run", "--config", "exp.cfg", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["curves.csv", "summary.csv", "effective.cfg", "metadata.json", "logs/cafda/seed-0.jsonl", "logs/random/seed-1.jsonl"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap(), "strategy,t,mean_cum_reward,sd,min,max");
    assert_eq!(curves.lines().count(), 1 + 2 * 20);
    let log = fs::read_to_string(out.join("logs/cafda/seed-0.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 20);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("cafda") && stdout.contains("random"));
}

#[test]
fn logs_depend_on_the_seed_only() {
    let dir = setup();
    let run = |out: &str, seed: &str| {
        let o = cafda(dir.path(), &["run", "-c", "exp.cfg", "--set", &format!("seed={seed}"), "--output-dir", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(dir.path().join(out).join(format!("logs/cafda/seed-{seed}.jsonl"))).unwrap()
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unknown_key_is_a_usage_error_naming_the_key() {
    let dir = setup();
    let o = cafda(dir.path(), &["run", "-c", "exp.cfg", "--set", "cafda.kk=3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cafda.kk"));
    let o = cafda(dir.path(), &["run", "-c", "exp.cfg", "--set", "horizon=-3"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cafda(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(cafda(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = setup();
    let o = cafda(dir.path(), &["run", "-c", "exp.cfg", "--set", "dataset.path=nope.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn dataset_path_is_relative_to_the_config_file() {
    let dir = setup();
    let sub = dir.path().join("exp");
    fs::create_dir(&sub).unwrap();
    let mut csv = String::from("x,label\n");
    for i in 0..200 {
        csv.push_str(&format!("{},{}\n", i, u8::from(i % 10 == 0)));
    }
    fs::write(sub.join("data.csv"), csv).unwrap();
    fs::write(
        sub.join("exp.cfg"),
        "dataset.path = data.csv\nstrategies = random\nhorizon = 5\nreplications = 1\nsplit.init_fraction = 0.1\n",
    )
    .unwrap();
    let o = cafda(dir.path(), &["run", "-c", "exp/exp.cfg", "--output-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn compare_ranks_and_rejects_bad_inputs() {
    let dir = setup();
    assert!(cafda(dir.path(), &["run", "-c", "exp.cfg", "--output-dir", "r1"]).status.success());
    assert!(cafda(dir.path(), &["run", "-c", "exp.cfg", "--set", "strategies=base", "--output-dir", "r2"])
        .status
        .success());
    let o = cafda(dir.path(), &["compare", "r1", "r2", "--output", "cmp.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let lines: Vec<&str> = cmp.lines().collect();
    assert_eq!(lines[0], "rank,run,strategy,horizon,mean,sd,min,max");
    assert_eq!(lines.len(), 4);
    let means: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[0] >= w[1]));

    let o = cafda(dir.path(), &["compare", "r1", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing"));

    assert!(cafda(dir.path(), &["run", "-c", "exp.cfg", "--set", "horizon=10", "--output-dir", "r3"])
        .status
        .success());
    let o = cafda(dir.path(), &["compare", "r1", "r3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizon"));
}

#[test]
fn prepare_data_converts_and_reports_schema_errors() {
    let dir = setup();
    let rows: String = [1, 1, 4, 2].iter().map(|c| format!("50 0 81 0 -6 11 25 88 64 {c}\n")).collect();
    fs::write(dir.path().join("shuttle.trn"), rows).unwrap();
    let o = cafda(dir.path(), &["prepare-data", "shuttle", "shuttle.trn", "shuttle.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("n_samples=3"));
    let csv = fs::read_to_string(dir.path().join("shuttle.csv")).unwrap();
    assert!(csv.starts_with("a1,a2,a3,a4,a5,a6,a7,a8,a9,label\n"));
    assert_eq!(csv.lines().count(), 4);

    fs::write(dir.path().join("bad.trn"), "1 2 3 4 5 6 7 8 9 1\n1 2 3\n").unwrap();
    let o = cafda(dir.path(), &["prepare-data", "shuttle", "bad.trn", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = cafda(dir.path(), &["prepare-data", "kddcup", "x", "y"]);
    assert_eq!(o.status.code(), Some(1));
}
