use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn resdens(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resdens"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn bundled(name: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    root.to_string_lossy().into_owned()
}

/// Directory listing relative to `root`, sorted.
fn tree(root: &Path) -> Vec<PathBuf> {
    let mut all = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path.clone());
            }
            all.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    all.sort();
    all
}

fn simulated_sample(dir: &Path) -> PathBuf {
    let out = resdens(&["simulate", "--n", "500", "--seed", "7", "--out", "sample"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("sample/sample.csv")
}

fn read_curve(path: &Path) -> (Vec<f64>, Vec<f64>) {
    let text = fs::read_to_string(path).unwrap();
    let (mut e, mut f) = (Vec::new(), Vec::new());
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let (a, b) = line.split_once(',').unwrap();
        e.push(a.parse().unwrap());
        f.push(b.parse().unwrap());
    }
    (e, f)
}

#[test]
fn estimate_writes_a_normalized_curve() {
    let tmp = TempDir::new().unwrap();
    simulated_sample(tmp.path());
    let out = resdens(
        &["estimate", "--input", "sample/sample.csv", "--b0", "0.15", "--b1", "0.3", "--out", "est"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("n = 500") && text.contains("n_kept = ") && text.contains("n_undefined = "));

    let (e, f) = read_curve(&tmp.path().join("est/density.csv"));
    assert!(f.iter().all(|v| *v >= 0.0));
    let mass: f64 = e
        .windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum();
    assert!((mass - 1.0).abs() <= 1e-6, "{mass}");
}

#[test]
fn estimate_rejects_non_finite_rows() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.csv"), "x1,y\n0.1,0.5\n0.4,NaN\n0.7,0.2\n").unwrap();
    let out = resdens(
        &["estimate", "--input", "bad.csv", "--b0", "0.2", "--b1", "0.2", "--out", "est"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert!(!tmp.path().join("est").exists());
}

#[test]
fn estimate_with_an_empty_trim_box_fails() {
    let tmp = TempDir::new().unwrap();
    simulated_sample(tmp.path());
    let out = resdens(
        &[
            "estimate", "--input", "sample/sample.csv", "--b0", "0.15", "--b1", "0.3",
            "--trim-lo", "2", "--trim-hi", "3", "--out", "est",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("all observations trimmed"));
}

#[test]
fn kernel_check_verdicts() {
    let tmp = TempDir::new().unwrap();
    let ok = resdens(&["kernel-check", "--kernel", "quadweight"], tmp.path());
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));

    let tri = resdens(&["kernel-check", "--kernel", "triweight"], tmp.path());
    assert_eq!(code(&tri), 1);
    assert!(stderr(&tri).contains("K1^(3) continuous"), "{}", stderr(&tri));
    assert!(!stderr(&tri).contains("K1^(2) continuous"));

    assert_eq!(code(&resdens(&["kernel-check", "--kernel", "foo"], tmp.path())), 2);
    assert!(tree(tmp.path()).is_empty());
}

#[test]
fn bundled_rate_config_passes() {
    let tmp = TempDir::new().unwrap();
    let config = bundled("rates_prop1.cfg");
    let out = resdens(&["rates", "--config", &config, "--out", "rates"], tmp.path());
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("rates/rate_report.json")).unwrap())
            .unwrap();
    assert!(report["slope"].is_f64());
    assert_eq!(report["pass"], true);
    let points = fs::read_to_string(tmp.path().join("rates/rate_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 6);
}

#[test]
fn short_grids_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("short.cfg"),
        "target = \"expected-bias\"\ngrid = [0.1, 0.2, 0.3]\n",
    )
    .unwrap();
    let out = resdens(&["rates", "--config", "short.cfg", "--out", "rates"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(">= 4 grid points required"), "{}", stderr(&out));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("typo.cfg"),
        "target = \"expected-bias\"\ngrid = [0.1, 0.2, 0.3, 0.4]\nreplicatons = 30\n",
    )
    .unwrap();
    let out = resdens(&["rates", "--config", "typo.cfg"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("replicatons"));
}

#[test]
fn inadmissible_schedules_warn_and_run() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("wide.cfg"),
        "target = \"design-noise\"\ngrid = [200, 400, 800, 1600]\nb0_c = 0.5\nb0_a = 0.5\nreplications = 20\n",
    )
    .unwrap();
    let out = resdens(&["rates", "--config", "wide.cfg", "--out", "rates"], tmp.path());
    assert_ne!(code(&out), 2);
    assert_ne!(code(&out), 3);
    assert!(stderr(&out).contains("warning") && stderr(&out).contains("A8"), "{}", stderr(&out));
    assert!(tmp.path().join("rates/rate_report.json").exists());
}

#[test]
fn degenerate_experiments_are_runtime_errors() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("tiny.cfg"),
        "target = \"smoothing-bias\"\ngrid = [0.001, 0.002, 0.003, 0.004]\nn = 3\nreplications = 20\n",
    )
    .unwrap();
    let out = resdens(&["rates", "--config", "tiny.cfg", "--out", "rates"], tmp.path());
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn bandwidth_verdicts() {
    let tmp = TempDir::new().unwrap();
    let args = |d: &str, a: &str, g: &str| {
        code(&resdens(&["validate-bandwidths", "--d", d, "--a", a, "--gamma", g], tmp.path()))
    };
    assert_eq!(args("1", "0.2", "0.2"), 0);
    let a8 = resdens(&["validate-bandwidths", "--d", "1", "--a", "0.4"], tmp.path());
    assert_eq!(code(&a8), 1);
    assert!(stderr(&a8).contains("A8") && !stderr(&a8).contains("A9"));
    assert_eq!(args("1", "0.2", "0.3"), 1);
    assert_eq!(args("0", "0.2", "0.2"), 2);
}

#[test]
fn reruns_are_byte_identical_and_stay_in_the_output_directory() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("small.cfg"),
        "target = \"smoothing-bias\"\ngrid = [0.1, 0.15, 0.2, 0.3]\nn = 300\nreplications = 20\n",
    )
    .unwrap();
    let run = |dir: &str, workers: &str| {
        let sim = resdens(&["simulate", "--n", "300", "--seed", "4", "--out", dir], tmp.path());
        assert_eq!(code(&sim), 0);
        let input = format!("{dir}/sample.csv");
        let est = resdens(
            &["estimate", "--input", &input, "--b0", "0.2", "--b1", "0.25", "--out", dir],
            tmp.path(),
        );
        assert_eq!(code(&est), 0, "{}", stderr(&est));
        let rates = resdens(
            &["rates", "--config", "small.cfg", "--workers", workers, "--out", dir],
            tmp.path(),
        );
        assert!(code(&rates) <= 1, "{}", stderr(&rates));
    };
    run("first", "1");
    run("second", "3");
    let names = ["sample.csv", "density.csv", "rate_report.json", "rate_points.csv"];
    for name in names {
        let a = fs::read(tmp.path().join("first").join(name)).unwrap();
        let b = fs::read(tmp.path().join("second").join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
    let mut expected: Vec<PathBuf> = vec!["first".into(), "second".into(), "small.cfg".into()];
    for dir in ["first", "second"] {
        expected.extend(names.iter().map(|n| Path::new(dir).join(n)));
    }
    expected.sort();
    assert_eq!(tree(tmp.path()), expected);
}
