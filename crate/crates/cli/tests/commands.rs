use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SHORT: &str = "model.preset = maglev-sim
probe.epsilon = 1/300
sim.horizon = 0.5
sim.t_settle = 0.25
";

fn virtout(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virtout"))
        .args(args)
        .env("VIRTOUT_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_writes_trajectory_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "sim.cfg", SHORT);
    let csv = dir.path().join("sim.csv");
    let o = virtout(&["simulate", cfg.to_str().unwrap(), "-o", csv.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,q_star,lambda,q,p,i,y,u_c,u,S,Y,yv,yv_hat,"), "{header}");
    // 0.5 s at 100 steps per period of 1/300 s, plus the initial row
    assert_eq!(text.lines().count(), 1 + 15001);
    let second = text.lines().nth(1).unwrap();
    for v in second.split(',') {
        let mantissa = v.split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{v}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("yv_rms = "));
}

#[test]
fn simulate_honours_output_columns_and_default_dir() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SHORT}output.every = 100\noutput.columns = t,q,yv_hat\n");
    let cfg = write_cfg(dir.path(), "cols.cfg", &text);
    let out = dir.path().join("out");
    let o = virtout(&["simulate", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("cols.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,q,yv_hat");
    assert_eq!(text.lines().count(), 1 + 151);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", &format!("{SHORT}drem.gamme = 1\n"));
    let o = virtout(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("drem.gamme") && err.contains("line 5"), "{err}");
}

#[test]
fn missing_epsilon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "noeps.cfg", "model.preset = maglev-sim\n");
    let o = virtout(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("probe.epsilon"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = virtout(&["simulate", dir.path().join("absent.cfg").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_abort_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // the initial state sits on the magnet
    let cfg = write_cfg(dir.path(), "abort.cfg", &format!("{SHORT}init.lambda = 0.1\ninit.q = 0.005\ninit.p = 0\n"));
    let o = virtout(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn sweep_over_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "eps.cfg", &format!("{SHORT}sim.steps_per_period = 200\n"));
    let out = dir.path().join("sweep");
    let o = virtout(
        &[
            "sweep",
            cfg.to_str().unwrap(),
            "--param",
            "probe.epsilon",
            "--values",
            "1/150,1/300,1/600",
            "-o",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..3 {
        assert!(out.join(format!("eps_{i:03}.csv")).is_file());
    }
    let summary = fs::read_to_string(out.join("eps_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header[0], "probe.epsilon");
    let col = header.iter().position(|h| *h == "ratio_yv_rms").unwrap();
    assert_eq!(lines[1].split(',').nth(col), Some(""));
    let r: f64 = lines[2].split(',').nth(col).unwrap().parse().unwrap();
    assert!(r.is_finite() && r > 0.0);
}

#[test]
fn sweep_needs_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "eps.cfg", SHORT);
    for extra in [&["--values", ""][..], &[][..]] {
        let mut args = vec!["sweep", cfg.to_str().unwrap(), "--param", "probe.epsilon"];
        args.extend_from_slice(extra);
        let o = virtout(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    }
}

#[test]
fn compare_filters_side_by_side() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "cmp.cfg", &format!("{SHORT}noise.power = 0\n"));
    let csv = dir.path().join("cmp.csv");
    let o = virtout(&["compare-filters", cfg.to_str().unwrap(), "-o", csv.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,y,yv,yv_hat,yv_hat_baseline");
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("yv_rms = ") && stdout.contains("yv_baseline_rms = "));
}

#[test]
fn freq_response_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = 0.01;
    let csv = dir.path().join("g.csv");
    let omega_max = 2.0 * std::f64::consts::PI / d;
    let o = virtout(
        &[
            "freq-response",
            "--d",
            &d.to_string(),
            "--omega-max",
            &omega_max.to_string(),
            "--points",
            "401",
            "-o",
            csv.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let t = rows(&csv);
    assert_eq!(t.len(), 401);
    assert_eq!(t[0][0], 0.0);
    assert_eq!(t[0][1], 0.0);
    // ωd = π gives e^{−jπ} + (e^{−2jπ} − 1)/(2jπ) = −1
    let w = t[200][0];
    assert!((w - std::f64::consts::PI / d).abs() < 1e-9);
    assert!((t[200][1] - 1.0).abs() < 1e-12, "{}", t[200][1]);
    for k in 1..=100 {
        assert!(t[k][1] > t[k - 1][1]);
    }
}

#[test]
fn freq_response_rejects_bad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = virtout(&["freq-response", "--d", "0.01", "--omega-max", "10", "--points", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = virtout(&["freq-response", "--d=-1", "--omega-max", "10", "--points", "5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

fn summary_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn probe_frequency_trades_accuracy_for_jitter() {
    let dir = tempfile::tempdir().unwrap();
    let base = "model.preset = maglev-sim
probe.epsilon = 1/300
sim.horizon = 4
sim.t_settle = 2
drem.units = normalized
drem.gamma = 3889
sim.steps_per_period = 200
";
    let clean = write_cfg(dir.path(), "clean.cfg", &format!("{base}noise.power = 0\n"));
    let noisy = write_cfg(dir.path(), "noisy.cfg", base);
    for cfg in [&clean, &noisy] {
        let o = virtout(
            &["sweep", cfg.to_str().unwrap(), "--param", "probe.epsilon", "--values", "1/150,1/300,1/600,1/1200"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let err = summary_column(&dir.path().join("clean/clean_summary.csv"), "q_rms");
    let jitter = summary_column(&dir.path().join("noisy/noisy_summary.csv"), "p_jitter");
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
    assert!(jitter.windows(2).all(|w| w[1] > w[0]), "{jitter:?}");
}
