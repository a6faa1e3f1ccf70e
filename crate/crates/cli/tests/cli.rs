use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqrb::record::TrialRecord;

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn seqrb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrb"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEQRB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).expect(key);
    line[key.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

/// CSV rows as maps from header to cell.
fn csv_rows(path: &Path) -> Vec<std::collections::BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            header
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, c)| (h.to_string(), c.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn design_check_default_four_arm() {
    let d = tempfile::tempdir().unwrap();
    let o = seqrb(d.path(), &["design-check", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = stdout(&o);
    assert!(t.contains("feasible from interim 7"), "{t}");
    assert_eq!(
        std::fs::read_to_string(d.path().join("o/design_check.txt")).unwrap(),
        t
    );
}

#[test]
fn design_check_two_arm_calibration() {
    let d = tempfile::tempdir().unwrap();
    let o = seqrb(
        d.path(),
        &[
            "design-check",
            "--config",
            repo("configs/two_arm.toml").to_str().unwrap(),
            "--out",
            "o",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let t = stdout(&o);
    assert!(
        (value_after(&t, "type I error") - 0.025).abs() < 1e-3,
        "{t}"
    );
    assert!((value_after(&t, "power") - 0.90).abs() < 5e-3, "{t}");
    assert!(t.contains("not part of a two-arm design"));
}

#[test]
fn design_check_without_inner_slope_never_allows_no_difference() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("c.toml"),
        "[design]\nslope_out = 0.0\nslope_in = 0.0\n",
    )
    .unwrap();
    let o = seqrb(d.path(), &["design-check", "--config", "c.toml"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("never feasible"));
}

#[test]
fn invalid_constants_and_unknown_keys_exit_2() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("a.toml"), "[design]\nslope_out = 0.5\n").unwrap();
    std::fs::write(d.path().join("b.toml"), "[design]\nslopes = 0.5\n").unwrap();
    for f in ["a.toml", "b.toml"] {
        let o = seqrb(d.path(), &["design-check", "--config", f]);
        assert_eq!(o.status.code(), Some(2), "{f}: {}", stderr(&o));
    }
    let o = seqrb(d.path(), &["design-check", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn oc_is_reproducible_across_runs_and_threads() {
    let d = tempfile::tempdir().unwrap();
    let run = |out: &str, threads: &str| {
        let o = seqrb(
            d.path(),
            &[
                "oc",
                "--replicates",
                "1500",
                "--seed",
                "11",
                "--threads",
                threads,
                "--out",
                out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(d.path().join(out).join("oc.csv")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));
    let o = Command::new(env!("CARGO_BIN_EXE_seqrb"))
        .args(["oc", "--replicates", "1500", "--seed", "11", "--out", "e"])
        .current_dir(d.path())
        .env("SEQRB_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(a, std::fs::read(d.path().join("e/oc.csv")).unwrap());
    let o = seqrb(
        d.path(),
        &["oc", "--replicates", "1500", "--seed", "12", "--out", "g"],
    );
    assert!(o.status.success());
    assert_ne!(a, std::fs::read(d.path().join("g/oc.csv")).unwrap());
}

#[test]
fn oc_case_one_row() {
    let d = tempfile::tempdir().unwrap();
    let o = seqrb(d.path(), &["oc", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("o/oc.csv"));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    let num = |k: &str| r[k].parse::<f64>().unwrap();
    assert_eq!(r["replicates"], "10000");
    assert!((num("win_1") - 0.819).abs() < 0.015, "{r:?}");
    assert!((num("elim_4") - 0.920).abs() < 0.015, "{r:?}");
    assert!((num("nod") - 0.045).abs() < 0.015, "{r:?}");
    assert!((num("expected_n") / 1426.0 - 1.0).abs() < 0.03, "{r:?}");
}

#[test]
fn zero_replicates_give_empty_summaries() {
    let d = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("oc", "oc.csv"),
        ("study", "study.csv"),
        ("simulate", "simulate.csv"),
    ] {
        let o = seqrb(d.path(), &[cmd, "--replicates", "0", "--out", "o"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        assert!(stderr(&o).contains("warning: 0 replicates"), "{cmd}");
        let text = std::fs::read_to_string(d.path().join("o").join(file)).unwrap();
        assert_eq!(text.lines().count(), 1, "{cmd}: {text}");
    }
}

#[test]
fn simulated_records_round_trip_and_repeat() {
    let d = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = seqrb(
            d.path(),
            &["simulate", "--replicates", "3", "--seed", "5", "--out", out],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let dir = d.path().join("a/records/scenario_01");
    for r in 1..=3 {
        let name = format!("replicate_{r:06}.json");
        let text = std::fs::read_to_string(dir.join(&name)).unwrap();
        let rec = TrialRecord::from_json(&text).unwrap();
        assert_eq!(rec.to_json(), text);
        assert_eq!(
            text,
            std::fs::read_to_string(d.path().join("b/records/scenario_01").join(&name)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(d.path().join("a/simulate.csv")).unwrap(),
        std::fs::read(d.path().join("b/simulate.csv")).unwrap()
    );
}

#[test]
fn malformed_record_exits_2_naming_the_violation() {
    let d = tempfile::tempdir().unwrap();
    let mut rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(repo("data/two_arm_trial.json")).unwrap())
            .unwrap();
    rec["treatments"][1]["strata"][0]["s"][2] = serde_json::json!(500);
    std::fs::write(d.path().join("bad.json"), rec.to_string()).unwrap();
    let o = seqrb(d.path(), &["analyze", "bad.json", "--method", "naive"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("treatment 2") && e.contains("interim 3"), "{e}");

    std::fs::write(d.path().join("junk.json"), "{\"design\": 3}").unwrap();
    let o = seqrb(d.path(), &["analyze", "junk.json"]);
    assert_eq!(o.status.code(), Some(2));

    let o = seqrb(d.path(), &["analyze", "absent.json"]);
    assert_eq!(o.status.code(), Some(4));
}

fn report<'a>(
    rows: &'a [std::collections::BTreeMap<String, String>],
    method: &str,
    comparison: &str,
) -> &'a std::collections::BTreeMap<String, String> {
    rows.iter()
        .find(|r| r["method"] == method && r["comparison"] == comparison)
        .unwrap_or_else(|| panic!("{method} {comparison}"))
}

fn num(r: &std::collections::BTreeMap<String, String>, k: &str) -> f64 {
    r[k].parse().unwrap()
}

#[test]
fn analyze_two_arm_record_with_all_methods() {
    let d = tempfile::tempdir().unwrap();
    let rec = repo("data/two_arm_trial.json");
    let o = seqrb(
        d.path(),
        &[
            "analyze",
            rec.to_str().unwrap(),
            "--reverse-replicates",
            "200000",
            "--out",
            "o",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("o/analysis.csv"));
    let c = "T1 vs T2";
    let naive = report(&rows, "naive", c);
    assert!((num(naive, "estimate") - 0.471).abs() <= 0.001);
    assert!((num(naive, "theta_l") - 0.124).abs() <= 0.001);
    let ord = report(&rows, "orderings", c);
    for (k, v) in [
        ("estimate", 0.454),
        ("theta_l", 0.097),
        ("theta_u", 0.807),
        ("p_value", 0.007),
    ] {
        assert!((num(ord, k) - v).abs() <= 0.005, "orderings {k}");
    }
    let rb1 = report(&rows, "rb1", c);
    assert!((num(rb1, "estimate") - 0.420).abs() <= 0.01);
    assert!((num(rb1, "se") - 0.197).abs() <= 0.01);
    let rb2 = report(&rows, "rb2", c);
    assert!((num(rb2, "estimate") - 0.424).abs() <= 0.02);
    assert!((num(rb2, "se") - 0.185).abs() <= 0.01);
    assert!((num(rb2, "proportion_complete") - 0.637).abs() <= 0.01);
    let json: Vec<seqrb::estimate::EstimateReport> =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("o/analysis.json")).unwrap())
            .unwrap();
    assert_eq!(json.len(), 4);
}

#[test]
fn analyze_four_arm_record_with_option_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = repo("configs/four_arm.toml");
    let o = seqrb(
        d.path(),
        &[
            "analyze",
            "--config",
            cfg.to_str().unwrap(),
            "--reverse-replicates",
            "200000",
            "--option",
            "2",
            "--out",
            "o",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("o/analysis.csv"));
    for (c, est, se, complete) in [
        ("T1 vs T2", 0.869, 0.286, 0.7381),
        ("T1 vs T3", 0.405, 0.220, 0.0199),
        ("T1 vs T4", 0.667, 0.256, 0.3050),
    ] {
        let r = report(&rows, "rb2", c);
        assert!((num(r, "estimate") - est).abs() <= 0.03, "{c} {r:?}");
        assert!((num(r, "se") - se).abs() <= 0.02, "{c} {r:?}");
        assert!(
            (num(r, "proportion_complete") - complete).abs() <= 0.005,
            "{c} {r:?}"
        );
    }
}

#[test]
fn record_stopping_at_first_interim_gives_z_over_v() {
    let d = tempfile::tempdir().unwrap();
    let mut rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(repo("data/two_arm_trial.json")).unwrap())
            .unwrap();
    for (arm, s) in [(0, 30), (1, 8)] {
        rec["treatments"][arm]["last_interim"] = serde_json::json!(1);
        rec["treatments"][arm]["strata"][0]["n"] = serde_json::json!([36]);
        rec["treatments"][arm]["strata"][0]["s"] = serde_json::json!([s]);
    }
    std::fs::write(d.path().join("one.json"), rec.to_string()).unwrap();
    let o = seqrb(
        d.path(),
        &["analyze", "one.json", "--method", "naive", "--out", "o"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (z, v) = (
        (36.0 * 30.0 - 36.0 * 8.0) / 72.0,
        36.0 * 36.0 * 38.0 * 34.0 / 72f64.powi(3),
    );
    let rows = csv_rows(&d.path().join("o/analysis.csv"));
    assert!((num(&rows[0], "estimate") - z / v).abs() < 1e-4);
}

#[test]
fn reverse_simulation_without_consistent_histories_exits_3() {
    let d = tempfile::tempdir().unwrap();
    // Every backward draw at interim 1 puts all successes on the first arm,
    // which crosses the upper boundary.
    let rec = serde_json::json!({
        "design": {
            "boundary": {"kind": "two_arm_triangular", "intercept": 1.0, "slope_out": 0.0, "slope_in": 0.5},
            "per_arm_increment": 4, "v_increment_nominal": 0.5, "max_total_patients": null,
            "planned_interims": 2, "max_interims": 2, "n_strata": 1
        },
        "treatments": [
            {"treatment": 1, "last_interim": 2, "strata": [{"centre": 1, "n": [4, 8], "s": [4, 8]}]},
            {"treatment": 2, "last_interim": 2, "strata": [{"centre": 1, "n": [4, 8], "s": [0, 0]}]}
        ]
    });
    std::fs::write(d.path().join("r.json"), rec.to_string()).unwrap();
    let o = seqrb(
        d.path(),
        &[
            "analyze",
            "r.json",
            "--method",
            "rb2",
            "--reverse-replicates",
            "1000",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn plots_mark_wedge_and_reference_line() {
    let d = tempfile::tempdir().unwrap();
    let o = seqrb(d.path(), &["plot", "--out", "p"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("only the boundary diagram"));
    let svg = std::fs::read_to_string(d.path().join("p/boundaries.svg")).unwrap();
    assert!(svg.contains("opens at V = 29.356"));
    assert!(!d.path().join("p/estimates.svg").exists());

    let two = repo("configs/two_arm.toml");
    let rec = repo("data/two_arm_trial.json");
    let o = seqrb(
        d.path(),
        &[
            "analyze",
            rec.to_str().unwrap(),
            "--method",
            "naive,rb1",
            "--out",
            "a",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = seqrb(
        d.path(),
        &[
            "plot",
            "a/analysis.json",
            "--config",
            two.to_str().unwrap(),
            "--out",
            "q",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(d.path().join("q/estimates.svg")).unwrap();
    assert!(svg.contains(">0.2463<"), "reference line label missing");
    assert!(svg.contains("rb1"));
}

#[test]
fn study_writes_one_row_per_method() {
    let d = tempfile::tempdir().unwrap();
    let two = repo("configs/two_arm.toml");
    let o = seqrb(
        d.path(),
        &[
            "study",
            "--config",
            two.to_str().unwrap(),
            "--replicates",
            "4",
            "--reverse-replicates",
            "20000",
            "--method",
            "naive,rb1,rb2",
            "--out",
            "s",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("s/study.csv"));
    assert_eq!(rows.len(), 9);
    assert!(rows
        .iter()
        .all(|r| r["used"].parse::<u64>().unwrap() + r["excluded"].parse::<u64>().unwrap() == 4));
}
