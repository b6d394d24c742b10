use std::fs::{self, File};
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tagtrend::synthbench::{synth_corpus, write_comments_csv, write_seeds_csv, CorpusSpec};

const RULES_HEADER: &str = "index,LHS,RHS,support,confidence,count,week";

fn tagtrend(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagtrend"))
        .args(args)
        .current_dir(dir)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_corpus(dir: &Path, n_proposals: usize) {
    let corpus = synth_corpus(&CorpusSpec {
        n_proposals,
        weeks: 30,
        ..CorpusSpec::default()
    })
    .unwrap();
    write_comments_csv(&corpus.comments, File::create(dir.join("comments.csv")).unwrap()).unwrap();
    write_seeds_csv(&corpus.seeds, File::create(dir.join("seeds.csv")).unwrap()).unwrap();
}

fn write_config(dir: &Path, out: &str, seeds: &str) {
    fs::write(
        dir.join(format!("{out}.toml")),
        format!(
            "comments = \"comments.csv\"\nseeds = \"{seeds}\"\noutput_dir = \"{out}\"\nepoch_date = \"2016-10-03\"\nnotes_boards = [\"notes\"]\ntransaction_unit = \"comment\"\nalpha = 0.05\n\n[thresholds]\nmin_support = 0.001\nmin_confidence = 0.001\n"
        ),
    )
    .unwrap();
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d, 2);
    write_config(d, "a", "seeds.csv");
    write_config(d, "b", "seeds.csv");
    let summary: Value = serde_json::from_str(&stdout(&tagtrend(d, &["run", "--config", "a.toml"]))).unwrap();
    assert_eq!(summary["n_proposals"], 2);
    stdout(&tagtrend(d, &["run", "--config", "b.toml"]));

    let rules = fs::read_to_string(d.join("a/P00/rules.csv")).unwrap();
    assert_eq!(rules.lines().next(), Some(RULES_HEADER));
    assert!(d.join("a/P01/series").read_dir().unwrap().count() > 0);

    let canon_a = stdout(&tagtrend(d, &["report", "--input", "a/report.json"]));
    let canon_b = stdout(&tagtrend(
        d,
        &["report", "--input", "b/report.json", "--format", "json"],
    ));
    assert_eq!(canon_a, canon_b);
    assert!(!canon_a.contains("generated_at"));

    let csv = stdout(&tagtrend(d, &["report", "--input", "a/report.json", "--format", "csv"]));
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("proposal_id,LHS,RHS,"));
    assert_eq!(lines.count() as u64, summary["n_pairs"].as_u64().unwrap());
}

#[test]
fn empty_seeds_run_warns_and_reports_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d, 1);
    fs::write(d.join("none.csv"), "proposal_id,submission_date,seed_tag\n").unwrap();
    write_config(d, "empty", "none.csv");
    let out = tagtrend(d, &["run", "--config", "empty.toml"]);
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["n_proposals"], 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no seed tags"));
}

#[test]
fn missing_input_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "x", "seeds.csv");
    let out = tagtrend(dir.path(), &["run", "--config", "x.toml"]);
    assert!(!out.status.success());
}

#[test]
fn mine_and_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d, 2);
    let args = [
        "mine",
        "--comments",
        "comments.csv",
        "--seeds",
        "seeds.csv",
        "--min-support",
        "0.001",
        "--min-confidence",
        "0.001",
    ];
    assert!(
        !tagtrend(d, &args).status.success(),
        "two proposals need --proposal or --out-dir"
    );

    let rules = stdout(&tagtrend(d, &[&args[..], &["--proposal", "P01"]].concat()));
    let mut lines = rules.lines();
    assert_eq!(lines.next(), Some(RULES_HEADER));
    assert!(lines.next().unwrap().starts_with("1,{ },{#p01tag"));

    stdout(&tagtrend(d, &[&args[..], &["--out-dir", "mined"]].concat()));
    assert!(d.join("mined/P00/rules.csv").exists() && d.join("mined/P01/rules.csv").exists());

    let ingest: Value = serde_json::from_str(&stdout(&tagtrend(
        d,
        &["ingest", "--comments", "comments.csv", "--notes-boards", "notes"],
    )))
    .unwrap();
    assert!(ingest["n_after_board_filter"].as_u64() < ingest["n_comments"].as_u64());
    assert_eq!(ingest["epoch_date"], "2016-10-03");
    assert_eq!(ingest["first_week"], 0);
}

#[test]
fn series_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout(&tagtrend(
        d,
        &[
            "synth",
            "--kind",
            "damped-oscillation",
            "--length",
            "30",
            "--decay",
            "0.5",
            "--out",
            "damped.csv",
        ],
    ));
    let text = fs::read_to_string(d.join("damped.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("week,support"));
    assert_eq!(text.lines().count(), 31);

    let conv: Value = serde_json::from_str(&stdout(&tagtrend(
        d,
        &[
            "converge",
            "--input",
            "damped.csv",
            "--alpha",
            "0.05",
            "--first-week",
            "10",
            "--submission-week",
            "45",
        ],
    )))
    .unwrap();
    assert_eq!(conv["start_index"], 1);
    assert_eq!(conv["weeks_before_submission"], 35);

    fs::write(d.join("down.csv"), "value\n5\n4\n3\n2\n1\n").unwrap();
    let mk: Value = serde_json::from_str(&stdout(&tagtrend(d, &["mk", "--input", "down.csv"]))).unwrap();
    assert_eq!(mk["s"], -10);
    assert!((mk["z"].as_f64().unwrap() + 2.2045).abs() < 1e-3);

    stdout(&tagtrend(
        d,
        &[
            "synth",
            "--kind",
            "iid-noise",
            "--length",
            "80",
            "--seed",
            "4",
            "--out",
            "iid.csv",
        ],
    ));
    let scan: Value = serde_json::from_str(&stdout(&tagtrend(
        d,
        &[
            "stationarity",
            "--input",
            "iid.csv",
            "--alpha",
            "0.05",
            "--lags",
            "auto",
        ],
    )))
    .unwrap();
    assert_eq!(scan["stationary"], true);
    assert!(!tagtrend(d, &["stationarity", "--input", "iid.csv", "--lags", "many"])
        .status
        .success());
}

#[test]
fn power_reports_rates_and_rejects_few_trials() {
    let dir = tempfile::tempdir().unwrap();
    let report: Value = serde_json::from_str(&stdout(&tagtrend(
        dir.path(),
        &["power", "--trials", "50", "--summary"],
    )))
    .unwrap();
    assert_eq!(report["n_trials"], 50);
    assert!(report["detection_rate"].as_f64().unwrap() >= report["null_rate"].as_f64().unwrap());
    assert!(!tagtrend(dir.path(), &["power", "--trials", "0"]).status.success());
}
