use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tailrisk(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailrisk"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = tailrisk(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_owned).collect()
}

fn bundled(dir: &Path) {
    ok(&["synth", "--out", "data"], dir);
}

fn run_var(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "var",
        "--prices",
        "data/prices.csv",
        "--rates",
        "data/rates.csv",
        "--out",
        "var",
    ];
    args.extend_from_slice(extra);
    tailrisk(&args, dir)
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("var/summary.json")).unwrap()).unwrap()
}

/// Writes `entity,date,close` rows and a flat rate file covering every date.
fn write_panel(dir: &Path, series: &[(&str, Vec<(&str, f64)>)]) {
    fs::create_dir_all(dir.join("data")).unwrap();
    let mut prices = String::from("entity,date,close\n");
    let mut dates = std::collections::BTreeSet::new();
    for (id, points) in series {
        for (d, c) in points {
            prices.push_str(&format!("{id},{d},{c}\n"));
            dates.insert(*d);
        }
    }
    let mut rates = String::from("date,rate\n");
    for d in dates {
        rates.push_str(&format!("{d},0.0001\n"));
    }
    fs::write(dir.join("data/prices.csv"), prices).unwrap();
    fs::write(dir.join("data/rates.csv"), rates).unwrap();
}

/// Business days from `start` onward, with closes from a deterministic wiggle.
fn daily(start: (i32, u32, u32), n: usize, phase: f64) -> Vec<(String, f64)> {
    let mut d = chrono::NaiveDate::from_ymd_opt(start.0, start.1, start.2).unwrap();
    let mut out = Vec::new();
    let mut p = 100.0;
    for i in 0..n {
        while matches!(d.format("%a").to_string().as_str(), "Sat" | "Sun") {
            d = d.succ_opt().unwrap();
        }
        p *= 1.0 + 0.02 * ((i as f64) * 0.7 + phase).sin() * ((i as f64) * 0.13).cos();
        out.push((d.format("%Y-%m-%d").to_string(), p));
        d = d.succ_opt().unwrap();
    }
    out
}

fn as_refs(v: &[(String, f64)]) -> Vec<(&str, f64)> {
    v.iter().map(|(d, c)| (d.as_str(), *c)).collect()
}

#[test]
fn var_on_bundled_data_writes_one_file_per_entity() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    bundled(dir);
    assert!(run_var(dir, &[]).status.success());

    // Returns are dated by their later price, so each entity's first date
    // carries no return.
    let mut per_month: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut seen = BTreeMap::new();
    for r in rows(&dir.join("data/prices.csv")) {
        if seen.insert(r[0].clone(), ()).is_none() {
            continue;
        }
        *per_month
            .entry(r[0].clone())
            .or_default()
            .entry(r[1][..7].to_owned())
            .or_default() += 1;
    }
    let s = summary(dir);
    for (entity, months) in &per_month {
        let file = dir.join(format!("var/var_{entity}.csv"));
        assert!(file.exists(), "missing {}", file.display());
        let expected = months.values().filter(|&&n| n >= 10).count();
        let got = s["entities"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["entity"] == entity.as_str())
            .unwrap()["windows"]
            .as_u64()
            .unwrap();
        assert_eq!(got as usize, expected, "{entity}");
        assert_eq!(rows(&file).len(), months.len());
    }
    assert_eq!(per_month.len(), 9);
}

#[test]
fn summary_echoes_every_default() {
    let tmp = TempDir::new().unwrap();
    bundled(tmp.path());
    assert!(run_var(tmp.path(), &[]).status.success());
    let c = &summary(tmp.path())["config"];
    assert_eq!(c["threshold_confidence"], 0.8);
    assert_eq!(c["var_p"], 0.95);
    assert_eq!(c["estimator"], "profile_mle");
    assert_eq!(c["r_zhang"], -0.5);
    assert_eq!(c["min_obs"], 10);
    assert_eq!(c["pool_window"], 1);
    assert_eq!(c["prices"], "data/prices.csv");
}

#[test]
fn misordered_levels_are_a_config_error() {
    let tmp = TempDir::new().unwrap();
    bundled(tmp.path());
    let out = run_var(
        tmp.path(),
        &["--threshold-confidence", "0.9", "--var-p", "0.85"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("threshold_confidence < var_p"));
    assert!(!tmp.path().join("var").exists());
}

#[test]
fn empty_price_file_fails() {
    let tmp = TempDir::new().unwrap();
    write_panel(tmp.path(), &[]);
    let out = run_var(tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = run_var(tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn var_runs_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    bundled(dir);
    assert!(run_var(dir, &["--estimator", "zhang_lm"]).status.success());
    let first = fs::read(dir.join("var/var_E03.csv")).unwrap();
    fs::remove_dir_all(dir.join("var")).unwrap();
    assert!(run_var(dir, &["--estimator", "zhang_lm"]).status.success());
    assert_eq!(first, fs::read(dir.join("var/var_E03.csv")).unwrap());
}

#[test]
fn write_returns_is_opt_in() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    bundled(dir);
    assert!(run_var(dir, &[]).status.success());
    assert!(!dir.join("var/returns_E01.csv").exists());
    assert!(run_var(dir, &["--write-returns"]).status.success());
    assert_eq!(
        header(&dir.join("var/returns_E01.csv")),
        ["entity", "date", "ar", "loss"]
    );
}

fn diagnostics(dir: &Path, entity: &str, month: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "diagnostics",
        "--prices",
        "data/prices.csv",
        "--rates",
        "data/rates.csv",
        "--entity",
        entity,
        "--month",
        month,
        "--out",
        "diag",
    ];
    args.extend_from_slice(extra);
    tailrisk(&args, dir)
}

#[test]
fn diagnostics_writes_three_tables() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    bundled(dir);
    let out = diagnostics(dir, "E02", "2016-03", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for (name, cols) in [
        ("mean_excess.csv", vec!["u", "mean_excess"]),
        ("hill.csv", vec!["k", "hill"]),
        ("stability.csv", vec!["u", "k_hat", "sigma_hat", "ks"]),
    ] {
        let path = dir.join("diag").join(name);
        assert_eq!(header(&path), cols);
        assert!(!rows(&path).is_empty(), "{name} is empty");
    }
    assert_eq!(rows(&dir.join("diag/stability.csv")).len(), 10);
}

#[test]
fn diagnostics_names_a_skipped_month() {
    let tmp = TempDir::new().unwrap();
    bundled(tmp.path());
    let out = diagnostics(tmp.path(), "E02", "2016-03", &["--min-obs", "25"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("skipped"), "{}", stderr(&out));
}

#[test]
fn diagnostics_rejects_unknown_entity_and_bad_month() {
    let tmp = TempDir::new().unwrap();
    bundled(tmp.path());
    let out = diagnostics(tmp.path(), "NOPE", "2016-03", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("unknown entity"));
    let out = diagnostics(tmp.path(), "E01", "2016-13", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hill_is_empty_when_no_loss_is_positive() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mut up = daily((2020, 1, 1), 40, 0.0);
    let mut p = 100.0;
    for (_, c) in up.iter_mut() {
        p *= 1.01;
        *c = p;
    }
    write_panel(dir, &[("UP", as_refs(&up))]);
    let out = diagnostics(dir, "UP", "2020-01", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
    assert!(rows(&dir.join("diag/hill.csv")).is_empty());
    assert_eq!(header(&dir.join("diag/hill.csv")), ["k", "hill"]);
}

fn analyze(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["analyze", "--var-dir", "var", "--out", "analysis"];
    args.extend_from_slice(extra);
    tailrisk(&args, dir)
}

fn matrix(path: &Path) -> Vec<Vec<String>> {
    rows(path).into_iter().map(|r| r[1..].to_vec()).collect()
}

#[test]
fn analyze_two_entities() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let a = daily((2020, 1, 1), 160, 0.0);
    let b = daily((2020, 1, 1), 160, 1.3);
    write_panel(dir, &[("A", as_refs(&a)), ("B", as_refs(&b))]);
    assert!(run_var(dir, &[]).status.success());
    let out = analyze(dir, &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    for name in ["corr_var", "corr_rfr", "pair_counts_var", "pair_counts_rfr"] {
        let path = dir.join(format!("analysis/{name}.csv"));
        assert_eq!(header(&path), ["entity", "A", "B"]);
        assert_eq!(matrix(&path).len(), 2);
    }
    let corr = matrix(&dir.join("analysis/corr_var.csv"));
    assert_eq!(corr[0][0], "1");
    assert_eq!(corr[0][1], corr[1][0]);

    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows(&dir.join("analysis/shares.csv")) {
        if let Ok(s) = r[2].parse::<f64>() {
            *totals.entry(r[0].clone()).or_default() += s;
        }
    }
    assert!(!totals.is_empty());
    for (m, t) in totals {
        assert!((t - 1.0).abs() < 1e-9, "{m}: {t}");
    }
    assert!(!dir.join("analysis/comparison.csv").exists());
}

#[test]
fn analyze_needs_two_entities() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_panel(dir, &[("A", as_refs(&daily((2020, 1, 1), 80, 0.0)))]);
    assert!(run_var(dir, &[]).status.success());
    let out = analyze(dir, &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn analyze_rejects_unknown_index() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    bundled(dir);
    assert!(run_var(dir, &[]).status.success());
    let out = analyze(dir, &["--index", "NOPE"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn disjoint_coverage_leaves_a_missing_cell() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let a = daily((2020, 1, 1), 130, 0.0);
    let b = daily((2020, 1, 1), 130, 0.4);
    let late = daily((2021, 1, 1), 130, 2.0);
    write_panel(
        dir,
        &[
            ("A", as_refs(&a)),
            ("B", as_refs(&b)),
            ("C", as_refs(&late)),
        ],
    );
    assert!(run_var(dir, &[]).status.success());
    assert!(analyze(dir, &[]).status.success());

    let corr = matrix(&dir.join("analysis/corr_var.csv"));
    let counts = matrix(&dir.join("analysis/pair_counts_var.csv"));
    assert_eq!(counts[0][2], "0");
    assert_eq!(corr[0][2], "");
    assert_ne!(counts[0][1], "0");
    assert_ne!(corr[0][1], "");
}

#[test]
fn index_rfr_is_more_volatile_than_every_entity() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    bundled(dir);
    assert!(run_var(dir, &[]).status.success());
    let out = analyze(dir, &["--index", "IDXA", "--index", "IDXB"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let comparison = rows(&dir.join("analysis/comparison.csv"));
    assert_eq!(comparison.len(), 7 * 2);
    for r in comparison {
        let ratio: f64 = r[4].parse().unwrap();
        assert!(ratio > 1.0, "{} vs {}: {ratio}", r[0], r[1]);
    }
    let entities = header(&dir.join("analysis/corr_var.csv"));
    assert!(!entities.iter().any(|e| e.starts_with("IDX")));
}
