use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn blowlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn powers(p1: f64, p2: f64, q1: f64, q2: f64, extra: &str) -> String {
    format!("[model]\np1 = {p1:?}\np2 = {p2:?}\nq1 = {q1:?}\nq2 = {q2:?}\n{extra}")
}

const QUICK: &str = "[grid]\nnodes = 201\n[time]\nm_stop = 1e6\n";

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(dir.path(), "ok.toml", &powers(2.0, 3.0, 1.2, 1.2, ""));
    let o = blowlab(&["check", "--config", ok.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("α = 0.6, β = 0.8"));

    let fujita = write_config(
        dir.path(),
        "n3.toml",
        &powers(2.0, 2.0, 1.2, 1.2, "n = 3\n"),
    );
    assert_eq!(
        code(&blowlab(&["check", "--config", fujita.to_str().unwrap()])),
        2
    );

    let bad = write_config(dir.path(), "bad.toml", "[model\np1 = 2");
    let o = blowlab(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parse error"));

    let q = write_config(dir.path(), "q.toml", &powers(2.0, 2.0, 2.5, 1.2, ""));
    let o = blowlab(&["check", "--config", q.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("q_1,q_2∈(1,2]"));

    let unknown = write_config(
        dir.path(),
        "u.toml",
        &powers(2.0, 2.0, 1.2, 1.2, "pp = 3.0\n"),
    );
    assert_eq!(
        code(&blowlab(&["check", "--config", unknown.to_str().unwrap()])),
        1
    );
}

#[test]
fn check_json_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &powers(2.0, 3.0, 1.2, 1.2, ""));
    let o = blowlab(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "n=3",
        "--json",
    ]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["holds"], false);
    assert_eq!(v["exponents"]["alpha"], 0.6);
    assert_eq!(v["hypothesis_report"]["cond_fujita"], false);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&blowlab(&["frobnicate"])), 1);
    assert_eq!(code(&blowlab(&["check"])), 1);
    assert_eq!(code(&blowlab(&["--help"])), 0);
    assert_eq!(code(&blowlab(&["--version"])), 0);
}

#[test]
fn fit_family_needs_a_prior_run() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["fit", "doubling", "ratio", "rescale-verify"] {
        let o = blowlab(&[cmd, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{cmd}");
        assert!(stderr(&o).contains("no prior run"), "{cmd}: {}", stderr(&o));
    }
}

#[test]
fn oracle_ode_reports_the_closed_form_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ode.toml",
        &powers(
            2.0,
            2.0,
            1.5,
            1.5,
            "[domain]\nkind = \"truncated-space\"\nboundary = \"neumann\"\n[grid]\nnodes = 3\n\
             [init]\nkind = \"constant\"\namplitude_u = 1.0\namplitude_v = 1.0\n",
        ),
    );
    let out = dir.path().join("ode");
    let o = blowlab(&[
        "oracle-ode",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("T_est 1.0001 vs exact 1.0000"), "{text}");
    assert!(
        text.lines()
            .all(|l| l.ends_with("PASS") || l.contains(" PASS@")),
        "{text}"
    );
    assert!(out.join("oracle-ode.manifest.json").exists());
    assert!(out.join("doubling.csv").exists());

    // The solver's default cap biases Euler's blow-up time by about 5%.
    let o = blowlab(&[
        "oracle-ode",
        "--config",
        cfg.to_str().unwrap(),
        "--reaction-cap",
        "0.05",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL@1e-3"));
}

#[test]
fn run_then_analyse_a_symmetric_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sym.toml", &powers(2.0, 2.0, 1.2, 1.2, QUICK));
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let o = blowlab(&["run", "--config", cfg.to_str().unwrap(), "--out", run_s]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("run: stopped (threshold)"));
    for f in [
        "series.csv",
        "snapshots.csv",
        "fit.csv",
        "series.svg",
        "manifest.json",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }

    let o = blowlab(&["ratio", "--out", run_s]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "ratio: Φ ∈ [1,1] PASS@1e-10");
    assert!(run.join("ratio.csv").exists() && run.join("ratio.manifest.json").exists());

    let o = blowlab(&["doubling", "--out", run_s, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["command"], "doubling");
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 3);
    assert_eq!(code(&o), if v["pass"] == true { 0 } else { 3 });
    assert!(run.join("doubling.csv").exists());

    let o = blowlab(&["fit", "--out", run_s, "--window-lo", "0.002"]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    assert!(stdout(&o).contains("fit: M_u exponent"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("fit.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["config_echo"]["fit"]["window_lo"], 0.002);
    assert_eq!(m["command"], "fit");

    // A threshold override changes the verdict, not the numbers.
    let o = blowlab(&[
        "ratio",
        "--out",
        run_s,
        "--threshold",
        "symmetric_phi_tol=0.5",
    ]);
    assert!(stdout(&o).contains("PASS@5e-1"));
    assert_eq!(
        code(&blowlab(&[
            "ratio",
            "--out",
            run_s,
            "--threshold",
            "nope=1"
        ])),
        1
    );
}

#[test]
fn replaying_a_manifest_reproduces_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &powers(2.0, 3.0, 1.2, 1.2, QUICK));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        code(&blowlab(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap()
        ])),
        0
    );
    let manifest = a.join("manifest.json");
    let o = blowlab(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("series.csv")).unwrap(),
        std::fs::read(b.join("series.csv")).unwrap()
    );
}

#[test]
fn sweep_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &powers(2.0, 2.0, 1.2, 1.2, QUICK));
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let o = blowlab(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--vary",
            "p1=1.5:3.0:0.5",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read_to_string(out.join("phase.csv")).unwrap()
    };
    let one = run("1", "j1");
    let four = run("4", "j4");
    assert_eq!(one, four);
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("p1,cond_fujita,cond_q,alpha,beta,stop_reason,T_est,M_u_exponent"));
    assert!(dir.path().join("j1/cell_0003/manifest.json").exists());

    let o = blowlab(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--vary",
        "p1=3:1:0.5",
        "--out",
        "x",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("empty range"));
}
