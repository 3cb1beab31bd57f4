use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mrprune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrprune")).args(args).output().expect("spawn mrprune")
}

fn ok(args: &[&str]) -> Output {
    let out = mrprune(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const MINIMAL: &str = "I = 2\nJ = 3\nK = 1\nrepeats = 3\nseed = 7\n";
/// Five simulated days, small enough for debug-speed runs.
const FIVE_DAY: &str =
    "crops = 400\nworkers = 20\nquestions = 2\nrepeats = 5-12\nbeta_t1 = -0.3\nbeta_t2 = 0.04\nseed = 7\n";

fn generated(dir: &Path, body: &str) -> PathBuf {
    let cfg = write_config(dir, "gen.cfg", body);
    let out = dir.join("gen");
    ok(&["gen", "--config", p(&cfg), "--out", p(&out)]);
    out.join("log.csv")
}

#[test]
fn gen_minimal_config_writes_six_rows() {
    let dir = TempDir::new().unwrap();
    let log = generated(dir.path(), MINIMAL);
    let text = fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("task_id,crop_id,question_id,worker_id,start_time_s,duration_s,response,day\n"));
    for f in ["truth_crops.csv", "truth_workers.csv", "manifest.json"] {
        assert!(log.with_file_name(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(log.with_file_name("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "gen");
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", FIVE_DAY);
    for run in ["a", "b"] {
        ok(&["gen", "--config", p(&cfg), "--out", p(&dir.path().join(run))]);
    }
    for f in ["log.csv", "truth_crops.csv", "truth_workers.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn gen_warns_on_even_repeats() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "I = 4\nJ = 6\nrepeats = 4-6\ntheory_check = true\n");
    let out = ok(&["gen", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Assumption 1 requires odd n"));
}

#[test]
fn gen_config_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(dir.path(), "bad.cfg", "sigma_u = -1\nbogus = 3\n");
    let out = mrprune(&["gen", "--config", p(&bad), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma_u") && err.contains("bogus"), "{err}");

    let missing = mrprune(&["gen", "--config", p(&dir.path().join("nope.cfg")), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&missing), 3);

    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let cfg = write_config(dir.path(), "ok.cfg", MINIMAL);
    assert_eq!(code(&mrprune(&["gen", "--config", p(&cfg), "--out", p(&file)])), 3);
}

fn fit(dir: &Path, log: &Path, model: &str) -> (serde_json::Value, serde_json::Value) {
    let out = dir.join(format!("{model}.json"));
    ok(&["fit", "--log", p(log), "--model", model, "--out", p(&out)]);
    let m = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let metrics =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{model}.metrics.json"))).unwrap()).unwrap();
    assert!(dir.join(format!("{model}.manifest.json")).exists());
    (m, metrics)
}

#[test]
fn fit_model_ladder() {
    let dir = TempDir::new().unwrap();
    let log = generated(dir.path(), FIVE_DAY);
    let (base, base_metrics) = fit(dir.path(), &log, "base");
    assert!(base.get("worker_effects").is_none() && base.get("crop_effects").is_none());
    assert!(base["metadata"]["converged"].as_bool().unwrap());
    let (awc, awc_metrics) = fit(dir.path(), &log, "awc");
    assert!(awc["worker_effects"].as_object().unwrap().len() == 20);
    let auc = |m: &serde_json::Value| m["auc"].as_f64().unwrap();
    assert!(auc(&awc_metrics) >= auc(&base_metrics), "{} < {}", auc(&awc_metrics), auc(&base_metrics));
    assert!(awc_metrics["lrt"]["p_value"].as_f64().unwrap() < 0.001);
}

#[test]
fn fit_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&mrprune(&["fit", "--log", p(&dir.path().join("missing.csv")), "--out", "x.json"])), 3);

    // Unanimous votes: no minority reports at all.
    let mut csv = String::from("task_id,crop_id,question_id,worker_id,start_time_s,duration_s,response,day\n");
    for w in 0..3 {
        csv.push_str(&format!("c:q,c,q,w{w},{},1,yes,2024-01-01\n", 100 + w));
    }
    let log = dir.path().join("flat.csv");
    fs::write(&log, csv).unwrap();
    let out = mrprune(&["fit", "--log", p(&log), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate labels"));
}

#[test]
fn malformed_csv_reports_line() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("bad.csv");
    fs::write(&log, "task_id,crop_id,question_id,worker_id,start_time_s,duration_s,response,day\nc:q,c,q,w1,100,1,yes,d\nc:q,c,q,w2,oops,1,no,d\n").unwrap();
    let out = mrprune(&["fit", "--log", p(&log), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

fn horizon(log: &Path) -> f64 {
    let times: Vec<i64> = fs::read_to_string(log)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    let first = *times.iter().min().unwrap();
    let origin = first.div_euclid(86_400) * 86_400;
    (times.iter().max().unwrap() - origin) as f64 / 3600.0
}

fn eval(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap()
}

#[test]
fn prune_single_policies() {
    let dir = TempDir::new().unwrap();
    let log = generated(dir.path(), FIVE_DAY);

    let out = dir.path().join("p99");
    ok(&["prune", "--log", p(&log), "--out", p(&out), "--theta", "0.99", "--delta", "1", "--tau", "36"]);
    let r = eval(&out);
    let rate = r["prune_rate"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&rate));
    assert_eq!(r["seed"], 7);
    assert_eq!(r["policy"]["tau_hours"], 36.0);
    for f in ["decisions.csv", "refits.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let out = dir.path().join("p50");
    ok(&["prune", "--log", p(&log), "--out", p(&out), "--theta", "50%", "--delta", "1", "--tau", "36"]);
    let rate = eval(&out)["prune_rate"].as_f64().unwrap();
    assert!(rate > 0.0 && rate < 1.0, "{rate}");

    let out = dir.path().join("np");
    ok(&["prune", "--log", p(&log), "--out", p(&out), "--mode", "np", "--delta", "inf", "--tau", "36"]);
    let decisions = fs::read_to_string(out.join("decisions.csv")).unwrap();
    assert!(decisions.lines().skip(1).all(|l| l.ends_with(',')), "np rows carry no predicted_p");
    assert!(decisions.contains(",pruned,"));
    assert_eq!(fs::read_to_string(out.join("refits.json")).unwrap().trim(), "[]");

    let h = horizon(&log);
    let out = dir.path().join("all_warm");
    ok(&["prune", "--log", p(&log), "--out", p(&out), "--mode", "np", "--tau", &h.to_string()]);
    let r = eval(&out);
    assert_eq!((r["prune_rate"].as_f64(), r["accuracy"].as_f64()), (Some(0.0), Some(1.0)));

    let late =
        mrprune(&["prune", "--log", p(&log), "--out", p(&dir.path().join("late")), "--tau", &(h + 1.0).to_string()]);
    assert_eq!(code(&late), 2);
    assert_eq!(code(&mrprune(&["prune", "--log", p(&log), "--out", p(&dir.path().join("x")), "--theta", "1"])), 2);
    assert_eq!(code(&mrprune(&["prune", "--log", p(&log), "--out", p(&dir.path().join("x")), "--mode", "bogus"])), 2);
}

#[test]
fn prune_sweep_and_report() {
    let dir = TempDir::new().unwrap();
    let log = generated(dir.path(), FIVE_DAY);
    let out = dir.path().join("sweep");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mrprune"));
    cmd.args([
        "prune",
        "--log",
        p(&log),
        "--out",
        p(&out),
        "--sweep-theta",
        "0.1,0.99,0.5",
        "--sweep-mode",
        "predictive,np",
        "--tau",
        "36",
    ]);
    cmd.env("MRPRUNE_JOBS", "2");
    let res = cmd.output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let sweep_csv = out.join("sweep.csv");
    let text = fs::read_to_string(&sweep_csv).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let thetas: Vec<f64> = rows[..3].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(thetas, vec![0.99, 0.5, 0.1]);
    assert_eq!(rows[3][2], "np");

    // Single evaluation: one-row table.
    let single = dir.path().join("single");
    ok(&["prune", "--log", p(&log), "--out", p(&single), "--theta", "0.5", "--tau", "36"]);
    let report = dir.path().join("r1.md");
    ok(&["report", p(&single.join("eval.json")), "--out", p(&report)]);
    let md = fs::read_to_string(&report).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("| predictive")).count(), 1);
    assert!(dir.path().join("r1.csv").exists());

    // Sweep input: rows by descending theta.
    let report = dir.path().join("r2.md");
    ok(&["report", p(&sweep_csv), "--out", p(&report)]);
    let md = fs::read_to_string(&report).unwrap();
    let shown: Vec<f64> = md
        .lines()
        .filter(|l| l.starts_with("| predictive"))
        .map(|l| l.split('|').nth(2).unwrap().trim().parse().unwrap())
        .collect();
    assert_eq!(shown, vec![0.99, 0.5, 0.1]);

    // Mixed theory and pruning inputs: two sections.
    let curve = dir.path().join("curve.csv");
    ok(&["theory", "curve", "--n", "5", "--gauss", "0.5,-0.5,1", "--p", "0.05", "--out", p(&curve)]);
    let report = dir.path().join("r3.md");
    ok(&["report", p(&sweep_csv), p(&curve), "--out", p(&report)]);
    let md = fs::read_to_string(&report).unwrap();
    assert!(md.contains("## Pruning policies") && md.contains("## Theory curves"));

    assert_eq!(code(&mrprune(&["report"])), 2);
    assert_eq!(code(&mrprune(&["report", p(&log), "--out", p(&dir.path().join("r4.md"))])), 2);
}

#[test]
fn theory_subcommands() {
    let out = ok(&["theory", "perr", "--n", "5", "--p", "0", "--qt", "0.9", "--qf", "0.3"]);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v - 0.00243).abs() < 1e-15);

    let out = ok(&["theory", "oracle", "--n", "5", "--p", "0.1", "--qt", "0.8", "--qf", "0.2"]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let diff: f64 =
        text.lines().find(|l| l.starts_with("abs_diff")).unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(diff <= 1e-10);

    let out = ok(&["theory", "curve", "--n", "11", "--gauss", "0.5,-0.5,1", "--p", "0.0417"]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let mut pts: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
            (f[5], f[7])
        })
        .collect();
    assert_eq!(pts.len(), 99);
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(pts.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));

    let out = ok(&["theory", "lemma", "--n", "5", "--qt", "0.8", "--qf", "0.2"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);

    assert_eq!(code(&mrprune(&["theory", "perr", "--n", "4", "--p", "0.1", "--qt", "0.9", "--qf", "0.3"])), 2);
    assert_eq!(code(&mrprune(&["theory", "perr", "--n", "5", "--p", "1.5", "--qt", "0.9", "--qf", "0.3"])), 2);
    let pct = ok(&["theory", "perr", "--n", "5", "--p", "0%", "--qt", "90%", "--qf", "30%"]);
    assert_eq!(pct.stdout, ok(&["theory", "perr", "--n", "5", "--p", "0", "--qt", "0.9", "--qf", "0.3"]).stdout);
}

#[test]
fn commands_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let log = generated(dir.path(), FIVE_DAY);
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        fs::create_dir_all(&d).unwrap();
        ok(&["fit", "--log", p(&log), "--model", "awc", "--out", p(&d.join("m.json"))]);
        ok(&["prune", "--log", p(&log), "--out", p(&d.join("p")), "--theta", "0.5", "--tau", "36"]);
        ok(&[
            "prune",
            "--log",
            p(&log),
            "--out",
            p(&d.join("s")),
            "--sweep-theta",
            "0.5,0.1",
            "--tau",
            "36",
            "--jobs",
            "3",
        ]);
        ok(&[
            "theory",
            "curve",
            "--n",
            "7",
            "--qt",
            "0.8",
            "--qf",
            "0.2",
            "--p",
            "0.01,0.1",
            "--out",
            p(&d.join("c.csv")),
        ]);
        // Relative inputs, since the report records source paths.
        let res = Command::new(env!("CARGO_BIN_EXE_mrprune"))
            .current_dir(&d)
            .args(["report", "s/sweep.csv", "p/eval.json", "--out", "r.md"])
            .output()
            .unwrap();
        assert!(res.status.success());
    }
    for f in
        ["m.json", "m.metrics.json", "p/decisions.csv", "p/eval.json", "p/refits.json", "s/sweep.csv", "c.csv", "r.csv"]
    {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}
