use std::path::Path;
use std::process::{Command, Output};

fn trendcast(dir: &Path, args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trendcast"));
    cmd.current_dir(dir).args(args).env_remove("TRENDCAST_SEED");
    if let Some(seed) = env_seed {
        cmd.env("TRENDCAST_SEED", seed);
    }
    cmd.output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = trendcast(dir, args, None);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn line_series(dir: &Path) {
    let body: String = (0..36)
        .map(|t| {
            format!(
                "{}-{:02},{}\n",
                2010 + t / 12,
                t % 12 + 1,
                10.0 + 0.5 * t as f64 + (t % 5) as f64
            )
        })
        .collect();
    std::fs::write(dir.join("series.csv"), format!("period,value\n{body}")).unwrap();
}

#[test]
fn average_of_three_queries() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("panel.csv"),
        "Category: All categories\n\nMonth,a,b,c\n2004-01,10,40,70\n2004-02,20,50,80\n2004-03,30,60,90\n",
    )
    .unwrap();
    ok(dir.path(), &["--out", "o", "average", "panel.csv"]);
    assert_eq!(
        read(dir.path(), "o/series.csv"),
        "period,value\n2004-01,40\n2004-02,50\n2004-03,60\n"
    );
}

#[test]
fn fit_is_byte_identical_for_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    line_series(dir.path());
    let args = |out: &'static str| {
        [
            "--seed",
            "3",
            "--out",
            out,
            "fit",
            "series.csv",
            "--iterations",
            "300",
            "--burnin",
            "50",
        ]
    };
    ok(dir.path(), &args("a"));
    ok(dir.path(), &args("b"));
    for file in ["summary.json", "draws.json", "manifest.json"] {
        assert_eq!(
            read(dir.path(), &format!("a/{file}")),
            read(dir.path(), &format!("b/{file}")),
            "{file}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "a/manifest.json")).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["config"]["mcmc"]["seed"], 3);
    assert_eq!(manifest["config"]["mcmc"]["iterations"], 300);
    assert_eq!(
        manifest["config"]["model"]["components"][0]["type"],
        "local_linear_trend"
    );
}

#[test]
fn correlate_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    line_series(dir.path());
    ok(
        dir.path(),
        &["--out", "o", "correlate", "series.csv", "series.csv"],
    );
    assert_eq!(
        read(dir.path(), "o/correlation.json"),
        "{\n  \"correlation\": 1.0\n}\n"
    );
}

#[test]
fn seed_precedence_flag_then_file_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    line_series(dir.path());
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"seed": 11, "iterations": 120, "burnin": 20}"#,
    )
    .unwrap();
    let seed_of = |out: &str| -> u64 {
        let m: serde_json::Value =
            serde_json::from_str(&read(dir.path(), &format!("{out}/manifest.json"))).unwrap();
        assert_eq!(m["config"]["mcmc"]["iterations"], 120);
        m["config"]["mcmc"]["seed"].as_u64().unwrap()
    };
    let base = ["--config", "cfg.json", "fit", "series.csv"];
    assert!(trendcast(
        dir.path(),
        &[&["--out", "f", "--seed", "5"][..], &base].concat(),
        Some("7")
    )
    .status
    .success());
    assert!(trendcast(
        dir.path(),
        &[&["--out", "c"][..], &base].concat(),
        Some("7")
    )
    .status
    .success());
    let no_seed = [
        "--out",
        "e",
        "fit",
        "series.csv",
        "--iterations",
        "120",
        "--burnin",
        "20",
    ];
    assert!(trendcast(dir.path(), &no_seed, Some("7")).status.success());
    assert_eq!((seed_of("f"), seed_of("c"), seed_of("e")), (5, 11, 7));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    line_series(dir.path());
    let code = |args: &[&str]| trendcast(dir.path(), args, None).status.code().unwrap();
    assert_eq!(code(&["fit", "missing.csv"]), 2);
    assert_eq!(
        code(&["fit", "series.csv", "--iterations", "5", "--burnin", "9"]),
        2
    );
    assert_eq!(
        code(&["impact", "series.csv", "--pre", "2010-01..2011-12"]),
        2
    );
    assert_eq!(code(&["bogus"]), 2);
    std::fs::write(
        dir.path().join("gap.csv"),
        "Month,q\n2004-01,3\n2004-03,4\n",
    )
    .unwrap();
    assert_eq!(code(&["ingest", "gap.csv"]), 3);
    std::fs::write(
        dir.path().join("range.csv"),
        "Month,q\n2004-01,3\n2004-02,140\n",
    )
    .unwrap();
    assert_eq!(code(&["ingest", "range.csv"]), 3);
    std::fs::write(
        dir.path().join("flat.csv"),
        "period,value\n2004,3\n2005,3\n2006,3\n",
    )
    .unwrap();
    assert_eq!(code(&["correlate", "flat.csv", "flat.csv"]), 3);
}

#[test]
fn lt_half_toggle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.csv"), "Month,q\n2004-01,<1\n2004-02,7\n").unwrap();
    ok(dir.path(), &["--out", "half", "ingest", "t.csv"]);
    ok(
        dir.path(),
        &["--out", "zero", "ingest", "t.csv", "--lt-half", "false"],
    );
    assert!(read(dir.path(), "half/panel.csv").contains("2004-01,0.5\n"));
    assert!(read(dir.path(), "zero/panel.csv").contains("2004-01,0.0\n"));
}

#[test]
fn impact_accepts_positions_and_periods() {
    let dir = tempfile::tempdir().unwrap();
    line_series(dir.path());
    let mcmc = ["--iterations", "200", "--burnin", "50", "--seed", "1"];
    ok(
        dir.path(),
        &[
            &[
                "--out",
                "p",
                "impact",
                "series.csv",
                "--pre",
                "2010-01..2011-12",
                "--post",
                "2012-01..2012-12",
            ][..],
            &mcmc,
        ]
        .concat(),
    );
    ok(
        dir.path(),
        &[
            &[
                "--out",
                "i",
                "impact",
                "series.csv",
                "--pre",
                "0..23",
                "--post",
                "24..35",
            ][..],
            &mcmc,
        ]
        .concat(),
    );
    assert_eq!(
        read(dir.path(), "p/impact.json"),
        read(dir.path(), "i/impact.json")
    );
    assert!(read(dir.path(), "p/impact.txt")
        .contains("Pre-period 2010-01 to 2011-12, post-period 2012-01 to 2012-12"));
}
