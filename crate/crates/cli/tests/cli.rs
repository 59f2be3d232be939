use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use asrank::data::{read_records, LabelMode};
use asrank::eval::{auc_fast, TiePolicy};
use asrank::harness::runner::read_summary;
use asrank::synth::two_gaussians;

fn asrank(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asrank"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ASRANK_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_ttest_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("g.train"),
        two_gaussians(40, 60, 4, 1.5, 1).unwrap().to_libsvm(),
    )
    .unwrap();
    fs::write(
        d.join("g.test"),
        two_gaussians(30, 30, 4, 1.5, 2).unwrap().to_libsvm(),
    )
    .unwrap();
    let o = asrank(
        &[
            "run",
            "--dataset",
            "g.train",
            "--test",
            "g.test",
            "--strategies",
            "soft-close,random",
            "--gammas",
            "1,uniform",
            "--budget",
            "200",
            "--batch",
            "50",
            "--seeds",
            "0,1,2",
            "--reference",
            "random",
            "--output",
            "out",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);

    let summary = read_summary(&d.join("out/summary.csv")).unwrap();
    let o = asrank(&["ttest", "out/summary.csv", "soft-close@1", "random@1"], d);
    assert!(o.status.success());
    let verdict = stdout(&o);
    assert!(
        ["win", "loss", "tie"]
            .iter()
            .any(|v| verdict.starts_with(v)),
        "{verdict}"
    );

    // One seed and a held-out file: the summary mean is that model's AUC.
    let o = asrank(
        &[
            "run",
            "--dataset",
            "g.train",
            "--test",
            "g.test",
            "--strategies",
            "soft-close",
            "--budget",
            "200",
            "--batch",
            "50",
            "--seeds",
            "5",
            "--output",
            "one",
        ],
        d,
    );
    assert!(o.status.success());
    let expected = read_summary(&d.join("one/summary.csv")).unwrap()[0].auc_mean;
    let o = asrank(
        &["predict", "one/models/g_soft-close_1_5_0.json", "g.test"],
        d,
    );
    assert!(o.status.success());
    let scores: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    let labels = read_records(&d.join("g.test"), None, LabelMode::Sign)
        .unwrap()
        .labels;
    assert_eq!(scores.len(), 60);
    assert_eq!(
        auc_fast(&scores, &labels, TiePolicy::Loss).unwrap().auc,
        expected
    );
    assert_eq!(summary.len(), 4);
}

#[test]
fn predict_on_empty_file_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("m.json"), r#"{"mode":"plain","weights":[1.0,2.0]}"#).unwrap();
    fs::write(d.join("empty.txt"), "").unwrap();
    let o = asrank(&["predict", "m.json", "empty.txt"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());

    fs::write(d.join("wide.txt"), "1 5:1\n").unwrap();
    assert_eq!(
        asrank(&["predict", "m.json", "wide.txt"], d).status.code(),
        Some(1)
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("x.txt"), "+1 1:1\n-1 1:-1\n").unwrap();
    let o = asrank(&["run", "--dataset", "x.txt", "--strategies", "softest"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("softest"));
    assert_eq!(
        asrank(&["run", "--dataset", "x.txt", "--budget", "0"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(asrank(&["run", "--bogus"], d).status.code(), Some(2));
    assert_eq!(
        asrank(&["run", "--dataset", "missing.txt"], d)
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cv.txt"),
        two_gaussians(20, 25, 3, 2.0, 9).unwrap().to_libsvm(),
    )
    .unwrap();
    fs::write(
        d.join("exp.toml"),
        "datasets = [\"cv.txt\"]\nfolds = 3\nstrategies = [\"hard-correct\", \"wsvm\"]\nbudget = 90\nbatch = 30\nseeds = [1, 2]\noutput = \"cfg\"\n",
    )
    .unwrap();
    let o = asrank(
        &[
            "run",
            "--config",
            "exp.toml",
            "--budget",
            "60",
            "--no-save-models",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = fs::read_to_string(d.join("cfg/curve.csv")).unwrap();
    assert!(curve.starts_with(
        "dataset,strategy,gamma,mode,seed,fold,iter,pool_size,auc,rejections,wall_time_s,tie_policy\n"
    ));
    let active = curve
        .lines()
        .filter(|l| l.contains(",hard-correct,"))
        .count();
    // 2 seeds × 3 folds × 2 iterations
    assert_eq!(active, 12);
    assert!(!d.join("cfg/models").exists());

    fs::write(d.join("typo.toml"), "budgte = 3\n").unwrap();
    assert_eq!(
        asrank(&["run", "--config", "typo.toml"], d).status.code(),
        Some(2)
    );
}

#[test]
fn theorem_fuzz_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = asrank(
        &["theorem-fuzz", "--trials", "200", "--seed", "4"],
        dir.path(),
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("plain: 200 trials, 0 violations"), "{out}");
    assert!(out.contains("threshold: 200 trials, 0 violations"), "{out}");
}

#[test]
fn fetch_from_local_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("part1"), "1 1:0.5\n").unwrap();
    fs::write(d.join("part2"), "2 1:-0.5\n").unwrap();
    let manifest = format!(
        "[tiny]\nfiles = [{{ url = \"file://{0}/part1\" }}, {{ url = \"file://{0}/part2\" }}]\n",
        d.display()
    );
    fs::write(d.join("m.toml"), manifest).unwrap();
    let o = asrank(
        &["fetch", "tiny", "--manifest", "m.toml", "--dir", "data"],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(d.join("data/tiny")).unwrap(),
        "1 1:0.5\n2 1:-0.5\n"
    );
    assert_eq!(
        asrank(&["fetch", "nothing", "--manifest", "m.toml"], d)
            .status
            .code(),
        Some(1)
    );
}
