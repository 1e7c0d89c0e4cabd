use std::path::Path;
use std::process::{Command, Output};

fn pcl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcl")).args(args).current_dir(cwd).env_remove("PCL_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_after(text: &str, key: &str) -> f64 {
    let start = text.find(key).unwrap_or_else(|| panic!("`{key}` missing in {text}")) + key.len();
    text[start..].split(|c: char| c == ',' || c.is_whitespace()).find(|s| !s.is_empty()).unwrap().parse().unwrap()
}

#[test]
fn charfn_at_pi_is_poisson_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcl(&["charfn", "--kernel", "indicator:0,1", "--theta", "3.14159265"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let re = value_after(&out, "re = ");
    let im = value_after(&out, "im = ");
    // exp(e^{i pi} - 1 - i pi) = e^{-2} (cos pi, -sin pi)
    assert!((re + (-2.0f64).exp()).abs() < 1e-6, "{out}");
    assert!(im.abs() < 1e-6, "{out}");
    assert!(dir.path().join("pcl-out/manifest.txt").exists());
    assert!(dir.path().join("pcl-out/charfn.csv").exists());
}

#[test]
fn negative_theta_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcl(&["charfn", "--kernel", "indicator:0,1", "--theta", "-2,2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn variance_of_first_chaos_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcl(&["variance", "--kernel", "indicator:0,1", "--phi", "poly:x", "--d", "1", "--method", "covariance_series"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let mu2 = value_after(&stdout(&o), "mu2 = ");
    assert!((mu2 - 1.0).abs() < 1e-6);
}

#[test]
fn hypothesis_violation_exits_one_with_inequality() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "alpha=0.7\nd=1\n").unwrap();
    let o = pcl(&["clt", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha > 1/2 + 1/(2d) = 1"), "{err}");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pcl(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(pcl(&[], dir.path()).status.code(), Some(1));
    assert_eq!(pcl(&["charfn", "--theta", "abc"], dir.path()).status.code(), Some(1));
    assert_eq!(pcl(&["charfn", "--kernel", "triangle:1"], dir.path()).status.code(), Some(1));
    assert_eq!(pcl(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(pcl(&["clt", "--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn numerical_guard_exits_two() {
    // a constant phi has no chaos of order >= 1, so the limit variance is zero
    let dir = tempfile::tempdir().unwrap();
    let o = pcl(&["clt", "--kernel", "indicator:0,1", "--phi", "poly:1", "--d", "1", "--n", "64", "--reps", "100"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn clt_is_deterministic_and_rerunnable_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), "# small run\nkernel=power_law:2\nphi=gaussian_bump\nd=1\nn=128,512\nreps=200\n").unwrap();
    for out in ["a", "b"] {
        let o = pcl(&["clt", "--config", "run.cfg", "--seed", "42", "--out", out], d);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(d.join("a/report.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/report.csv")).unwrap());
    assert_eq!(std::fs::read(d.join("a/summary.json")).unwrap(), std::fs::read(d.join("b/summary.json")).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("# pcl-report v1\n"));

    let manifest = std::fs::read_to_string(d.join("a/manifest.txt")).unwrap();
    assert!(manifest.contains("config.seed=42\n"));
    assert!(manifest.contains("subcommand=clt\n"));
    let o = pcl(&["clt", "--config", "a/manifest.txt", "--out", "c"], d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(a, std::fs::read(d.join("c/report.csv")).unwrap());
    let hash = |m: &str| m.lines().find(|l| l.starts_with("config_hash=")).unwrap().to_string();
    assert_eq!(hash(&manifest), hash(&std::fs::read_to_string(d.join("c/manifest.txt")).unwrap()));
}

#[test]
fn missing_seed_defaults_to_zero_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcl(&["charfn", "--kernel", "indicator:0,1", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let manifest = std::fs::read_to_string(dir.path().join("m/manifest.txt")).unwrap();
    assert!(manifest.contains("config.seed=0\n"), "{manifest}");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_pcl"))
            .args(["clt", "--n", "128", "--reps", "100", "--out", out])
            .current_dir(d)
            .env("PCL_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(d.join(out).join("report.csv")).unwrap()
    };
    assert_eq!(run("1", "t1"), run("3", "t3"));
}
