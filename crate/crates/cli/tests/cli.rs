use std::path::Path;
use std::process::{Command, Output};

use mll_cli::{CalculationReport, Verdict};
use mll_core::family::{registry_entry, FamilyFile};
use mll_core::optimizer::RunRecord;

fn mll(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mll"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MLL_THREADS")
        .output()
        .expect("spawn mll")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(dir: &Path, stem: &str) -> CalculationReport {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn list_shows_every_family() {
    let dir = tempfile::tempdir().unwrap();
    let o = mll(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 16);
    let geo3: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("geo3 "))
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(geo3[4], "24");
    let crosses: Vec<&str> = text.lines().filter(|l| l.starts_with("cross")).collect();
    assert_eq!(crosses.len(), 6);
    assert!(crosses.iter().all(|l| l.contains("μ=128")));
}

#[test]
fn describe_prints_notation_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = mll(&["describe", "geo1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("geo1  A(0,4,6,[8,12+];2←4)"));
    assert!(text.contains("\"threshold\""));
}

#[test]
fn run_writes_record_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = mll(
        &[
            "run",
            "--family",
            "demo",
            "--seed",
            "3",
            "--budget-evals",
            "200000",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = dir.path().join("out");
    let r = report(&out, "demo-seed3");
    assert_eq!(r.verdict, Verdict::NoCounterexampleFound);
    assert_eq!(r.margin, r.best_value - r.threshold);
    assert_eq!(r.evaluations, 200_000);
    assert_eq!(r.provenance.seed, Some(3));
    let rec = RunRecord::from_json(&std::fs::read_to_string(dir.path().join(&r.run_file)).unwrap())
        .unwrap();
    assert_eq!(rec.best_value, r.best_value);
    assert_eq!(rec.config.seed, 3);
    // no temporaries left behind
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2);
}

#[test]
fn counterexample_exits_two_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut f = registry_entry("demo").unwrap();
    f.name = "demo-high".into();
    f.threshold = 2.0;
    let text = serde_json::to_string(&FamilyFile::new(vec![f])).unwrap();
    std::fs::write(dir.path().join("fam.json"), text).unwrap();
    let args = [
        "run",
        "--family-file",
        "fam.json",
        "--budget-evals",
        "50000",
        "--out",
        "out",
    ];
    let first = mll(&args, dir.path());
    assert_eq!(
        first.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let a = report(&dir.path().join("out"), "demo-high-seed1");
    assert_eq!(a.verdict, Verdict::CounterexampleFound);
    assert!(a.margin < 0.0);
    let second = mll(&args, dir.path());
    assert_eq!(second.status.code(), Some(2));
    let b = report(&dir.path().join("out"), "demo-high-seed1");
    assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
}

#[test]
fn overrides_reach_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = mll(
        &[
            "run",
            "--family",
            "geo2",
            "--budget-evals",
            "20000",
            "--refresh-evals",
            "5000",
            "--step-max",
            "0.1",
            "--coercion",
            "32",
            "--mask-a",
            "0.5",
            "--signs=1,-1",
            "--out",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rec = RunRecord::from_json(
        &std::fs::read_to_string(dir.path().join("geo2-seed1.run.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rec.config.step_max, 0.1);
    assert_eq!(rec.config.coercion, 32.0);
    assert_eq!(rec.config.mask_a, Some(0.5));
    assert_eq!(rec.family_spec.mask.as_ref().unwrap().a, 0.5);
    assert_eq!(rec.best_point.signs, vec![1, -1]);
    assert_eq!(rec.restart_count, 4);
}

#[test]
fn exports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = mll(
        &[
            "run",
            "--family",
            "cross1",
            "--budget-evals",
            "20000",
            "--out",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = mll(
        &[
            "export",
            "--run",
            "cross1-seed1.run.json",
            "--format",
            "realization-csv",
        ],
        dir.path(),
    );
    assert_eq!(csv.status.code(), Some(0));
    let rows = stdout(&csv).lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 4 * 4);
    for format in ["ladder-json", "realization-svg"] {
        let a = mll(
            &[
                "export",
                "--run",
                "cross1-seed1.run.json",
                "--format",
                format,
                "--out",
                "a",
            ],
            dir.path(),
        );
        let b = mll(
            &[
                "export",
                "--run",
                "cross1-seed1.run.json",
                "--format",
                format,
                "--out",
                "b",
            ],
            dir.path(),
        );
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(b.status.code(), Some(0));
        let a = std::fs::read(dir.path().join("a")).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b")).unwrap());
        assert!(String::from_utf8(a).unwrap().contains("chacha8"));
    }
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--family", "nope"][..],
        &["run", "--family", "demo", "--step-max", "0"],
        &["run", "--family", "demo", "--mask-a", "0.3"],
        &["run", "--family", "geo2", "--signs=1,1,1"],
        &["run"],
        &["export", "--run", "missing.json", "--format", "ladder-json"],
        &["describe", "nope"],
        &["export", "--run", "x.json", "--format", "png"],
        &["run", "--family", "demo", "--seed", "abc"],
    ] {
        let o = mll(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(
            String::from_utf8_lossy(&o.stderr).starts_with("error: "),
            "{args:?}"
        );
    }
    std::fs::write(dir.path().join("junk.json"), "{}").unwrap();
    let o = mll(
        &["export", "--run", "junk.json", "--format", "ladder-json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kernel_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mll(&["verify", "--suite", "kernel"], dir.path());
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
