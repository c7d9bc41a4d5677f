use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bandreg::bands::read_band_csv;
use bandreg::optimizer::{rows_from_csv, walk_forward, WalkForwardPlan};
use bandreg::{align_pair, bollinger_bands, parse_price_csv, BandParams};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn bandreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn pair_args() -> Vec<String> {
    vec![
        "--z".into(),
        fixture("z.csv").display().to_string(),
        "--x".into(),
        fixture("x.csv").display().to_string(),
    ]
}

fn run_in(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec![cmd.into()];
    args.extend(pair_args());
    args.extend(extra.iter().map(|s| s.to_string()));
    args.extend(["--out".into(), dir.display().to_string()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    bandreg(&refs)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_prices(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
    let mut text = String::from("date,price\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("2020-01-{:02},{}\n", i + 1, v));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn bands_file_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "bands", &["--n", "20", "--k", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert!(text.starts_with("date,y,center,sigma,upper,lower\n"));
    let rows = read_band_csv(text.as_bytes()).unwrap();

    let z = parse_price_csv(fixture("z.csv"), "z").unwrap();
    let x = parse_price_csv(fixture("x.csv"), "x").unwrap();
    let series = align_pair(&z, &x).unwrap();
    let bands = bollinger_bands(series.values(), BandParams::new(20, 2.0).unwrap()).unwrap();
    assert_eq!(rows.len(), series.len());
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.y, series.values()[i]);
        assert_eq!(r.center, bands.center[i]);
        assert_eq!(r.sigma, bands.sigma[i]);
        assert_eq!(r.upper, bands.upper[i]);
        assert_eq!(r.lower, bands.lower[i]);
    }
}

#[test]
fn bands_reject_oversized_window() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), "bands", &["--n", "5000", "--k", "2"]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("window size n = 5000"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn bbpt_ledger_matches_golden() {
    let dir = TempDir::new().unwrap();
    let out = run_in(
        dir.path(),
        "backtest",
        &["--strategy", "bbpt", "--n", "20", "--k", "2"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let got = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    let want = fs::read_to_string(fixture("bbpt_n20_k2_lagged.csv")).unwrap();
    assert_eq!(got, want);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(
        report["report"]["trades"].as_array().unwrap().len(),
        got.lines().count() - 1
    );
    assert!(fs::read_to_string(dir.path().join("report.txt"))
        .unwrap()
        .contains("strategy return:"));
}

#[test]
fn ffmdpt_ledger_respects_window() {
    let dir = TempDir::new().unwrap();
    let out = run_in(
        dir.path(),
        "backtest",
        &["--strategy", "ffmdpt", "--n", "15", "--k", "1.5"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let duration: usize = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(duration <= 15, "{line}");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run_in(
        dir.path(),
        "backtest",
        &["--strategy", "momentum", "--n", "20", "--k", "2"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("momentum"));
}

fn compare_difference(dir: &Path, y: &[f64]) -> f64 {
    let z: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let zp = write_prices(dir, "z.csv", &z);
    let xp = write_prices(dir, "x.csv", &vec![1.0; y.len()]);
    let out_dir = dir.join("out");
    let out = bandreg(&[
        "compare",
        "--z",
        zp.to_str().unwrap(),
        "--x",
        xp.to_str().unwrap(),
        "--n",
        "4",
        "--k",
        "1",
        "--execution",
        "idealized",
        "--weighting",
        "sum",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("compare.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("compare.json")).unwrap()).unwrap();
    json["return_difference"].as_f64().unwrap()
}

#[test]
fn compare_reports_ffmdpt_advantage() {
    // After the dip, y sits between the falling average and the entry
    // average, so BBPT exits a bar before FFMDPT.
    let dir = TempDir::new().unwrap();
    let y = [0.0, 0.1, 0.0, 0.1, 0.0, -1.0, -0.28, 0.1, 0.0, 0.1];
    assert!(compare_difference(dir.path(), &y) > 0.0);
}

#[test]
fn compare_identical_exits_give_zero() {
    let dir = TempDir::new().unwrap();
    let y = [0.0, 0.1, 0.0, 0.1, 0.0, -1.0, -0.5, 0.0, 0.1, 0.0];
    assert_eq!(compare_difference(dir.path(), &y), 0.0);
}

#[test]
fn optimize_three_splits_round_trip() {
    let dir = TempDir::new().unwrap();
    let plan_path = fixture("plan3.txt");
    let out = run_in(
        dir.path(),
        "optimize",
        &["--plan", plan_path.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = rows_from_csv(&fs::read_to_string(dir.path().join("table.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);

    let z = parse_price_csv(fixture("z.csv"), "z").unwrap();
    let x = parse_price_csv(fixture("x.csv"), "x").unwrap();
    let series = align_pair(&z, &x).unwrap();
    let plan = WalkForwardPlan::parse(&fs::read_to_string(plan_path).unwrap()).unwrap();
    assert_eq!(rows, walk_forward(&series, &plan).unwrap());
    let table = fs::read_to_string(dir.path().join("table.txt")).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn optimize_degenerate_plan_matches_backtest() {
    let dir = TempDir::new().unwrap();
    let plan = dir.path().join("plan.txt");
    fs::write(
        &plan,
        "k = 2\nn_grid = 20\nsplit = all, 2001-01-01, 2004-12-31, 2001-01-01, 2004-12-31\n",
    )
    .unwrap();
    let opt_dir = dir.path().join("opt");
    let out = run_in(&opt_dir, "optimize", &["--plan", plan.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = rows_from_csv(&fs::read_to_string(opt_dir.join("table.csv")).unwrap()).unwrap();

    for (strategy, rtn) in [("bbpt", rows[0].rtn_bbpt), ("ffmdpt", rows[0].rtn_ffmdpt)] {
        let bt_dir = dir.path().join(strategy);
        let out = run_in(
            &bt_dir,
            "backtest",
            &["--strategy", strategy, "--n", "20", "--k", "2"],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(bt_dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(
            report["report"]["strategy_return"]["value"]
                .as_f64()
                .unwrap(),
            rtn
        );
    }
}

#[test]
fn optimize_rejects_dates_outside_data() {
    let dir = TempDir::new().unwrap();
    let plan = dir.path().join("plan.txt");
    fs::write(
        &plan,
        "k = 1\nn_grid = 10\nsplit = late, 2004-01-01, 2004-12-31, 2005-01-01, 2005-06-30\n",
    )
    .unwrap();
    let out = run_in(
        &dir.path().join("o"),
        "optimize",
        &["--plan", plan.to_str().unwrap()],
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("outside the data span"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn verify_exit_status_tracks_violations() {
    let dir = TempDir::new().unwrap();
    let out = bandreg(&[
        "verify",
        "--mode",
        "exhaustive",
        "--length",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let report = fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(report.contains("gated"));
    let violations: u64 = report
        .lines()
        .find_map(|l| l.strip_prefix("total violations: "))
        .unwrap()
        .parse()
        .unwrap();
    let expected = if violations == 0 { 0 } else { 1 };
    assert_eq!(out.status.code(), Some(expected));
}

#[test]
fn verify_labels_lagged_mode() {
    let dir = TempDir::new().unwrap();
    let out = bandreg(&[
        "verify",
        "--mode",
        "montecarlo",
        "--seed",
        "5",
        "--walks",
        "50",
        "--execution",
        "lagged",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("outside the theorem's assumptions"));
}

#[test]
fn verify_montecarlo_needs_seed() {
    let dir = TempDir::new().unwrap();
    let out = bandreg(&[
        "verify",
        "--mode",
        "montecarlo",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--seed"));
}

#[test]
fn modelmap_chains() {
    let out = bandreg(&["modelmap", "q", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with(key))
            .and_then(|l| l.split('=').nth(1))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!((value("theta") + 0.381966).abs() < 1e-6);
    assert!((value("lambda") - 1.381966).abs() < 1e-6);
    assert!((value("n ") - 0.4472).abs() < 1e-4);

    let text = String::from_utf8(bandreg(&["modelmap", "n", "20"]).stdout).unwrap();
    assert!(text.contains("q      = undefined"));
    assert!(text.contains(&format!("lambda = {}", 2.0 / 21.0)));
    assert!(text.contains(&format!("theta  = {}", 1.0 - 2.0 / 21.0)));

    let text = String::from_utf8(bandreg(&["modelmap", "theta", "0"]).stdout).unwrap();
    assert!(text.contains("lambda = 1\n") && text.contains("n      = 1\n"));

    let out = bandreg(&["modelmap", "theta", "-0.5"]);
    assert!(out.status.success());
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let plan = fixture("plan3.txt");
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("bands", vec!["--n", "20", "--k", "2"]),
        (
            "backtest",
            vec!["--strategy", "ffmdpt", "--n", "20", "--k", "2"],
        ),
        ("compare", vec!["--n", "20", "--k", "2"]),
        ("optimize", vec!["--plan", plan.to_str().unwrap()]),
    ];
    for (cmd, extra) in cases {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let oa = run_in(a.path(), cmd, &extra);
        let ob = run_in(b.path(), cmd, &extra);
        assert!(oa.status.success(), "{cmd}: {}", stderr(&oa));
        assert_eq!(oa.stdout, ob.stdout, "{cmd}");
        assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()), "{cmd}");
    }
}
