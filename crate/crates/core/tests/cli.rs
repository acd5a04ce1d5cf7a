//! End-to-end checks of the `mas-trigger` binary.

use std::fs;
use std::process::{Command, Output};

use mas_trigger::experiment::CSV_COLUMNS;

fn mas_trigger(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mas-trigger"))
        .args(args)
        .output()
        .expect("spawn mas-trigger")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SMALL: &[&str] = &[
    "simulate", "--agents", "2,3", "--runs-t", "200", "--runs-q", "400", "--seed", "5",
];

#[test]
fn simulate_writes_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let mut args = SMALL.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    let o = mas_trigger(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("crossover"));

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for (row, n) in rows.iter().zip([2.0, 3.0]) {
        assert_eq!(row.len(), CSV_COLUMNS.len());
        assert_eq!(row[0], n);
        // e_t interval and ratio interval bracket their means.
        assert!(row[2] <= row[1] && row[1] <= row[3]);
        assert!(row[9] <= row[8] && row[8] <= row[10]);
    }
}

#[test]
fn json_config_matches_equivalent_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"agent_counts": [2, 3], "runs_t": 200, "runs_q": 400, "master_seed": 5}"#,
    )
    .unwrap();
    let from_json = mas_trigger(&["simulate", "--config", cfg.to_str().unwrap()]);
    let from_flags = mas_trigger(SMALL);
    assert!(from_json.status.success(), "{}", stderr(&from_json));
    assert_eq!(stdout(&from_json), stdout(&from_flags));
}

#[test]
fn cross_check_reports_both_estimators() {
    let mut args = SMALL.to_vec();
    args.push("--cross-check");
    let o = mas_trigger(&args);
    assert!(o.status.success());
    assert!(stderr(&o).contains("q_direct"));
}

#[test]
fn edge_list_file_drives_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("path4.txt");
    fs::write(&edges, "# path on four nodes\n0 1\n1 2\n\n2 3\n").unwrap();
    let o = mas_trigger(&[
        "simulate", "--agents", "4", "--runs-t", "100", "--runs-q", "100", "--edges-file",
        edges.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row: Vec<f64> = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    // Periodic cost uses |E| = 6 directed edges.
    assert!((row[7] - 3.0 * row[1]).abs() <= 1e-12 * row[7]);
}

#[test]
fn precondition_failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let disconnected = dir.path().join("split.txt");
    fs::write(&disconnected, "0 1\n2 3\n").unwrap();
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, r#"{"agent_counts": [2], "runs": 5}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--agents", "1"],
        vec!["simulate", "--agents", "3", "--gamma", "1.5"],
        vec!["simulate", "--agents", "3", "--runs-t", "1"],
        vec!["simulate", "--agents", "4", "--edges-file", disconnected.to_str().unwrap()],
        vec!["simulate", "--config", bad_json.to_str().unwrap()],
        vec!["simulate", "--agents", "2", "--graph", "ring"],
        vec!["oracle", "--agents", "3", "--scheme", "sometimes:1"],
        vec!["asymptotics", "--agents", "1"],
    ];
    for args in cases {
        let o = mas_trigger(&args);
        assert!(!o.status.success(), "{args:?} succeeded");
        let err = stderr(&o);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("mas-trigger: "), "{args:?}: {err}");
    }
}

#[test]
fn asymptotics_table_has_one_row_per_agent_count() {
    let o = mas_trigger(&["asymptotics", "--agents", "10,80", "--edges", "complete"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("80,"));
    let fixed = mas_trigger(&["asymptotics", "--agents", "80", "--edges", "6320"]);
    assert_eq!(stdout(&fixed).lines().nth(1), Some(lines[2]));
}

#[test]
fn gumbel_check_reports_both_centerings() {
    let o = mas_trigger(&["gumbel-check", "--agents", "10", "--runs", "200", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("published,") && text.contains("two_sided,"));
}

#[test]
fn oracle_prints_a_positive_cost() {
    let o = mas_trigger(&[
        "oracle", "--graph", "complete", "--agents", "2", "--scheme", "periodic:0.5",
        "--horizon", "20", "--step", "1e-3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cost: f64 = stdout(&o).trim().parse().unwrap();
    assert!(cost > 0.0);
}
