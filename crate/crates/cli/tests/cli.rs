use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    report: Value,
    out: TempDir,
}

impl Run {
    fn verdict(&self, name: &str) -> &Value {
        self.report["verdicts"]
            .as_array()
            .unwrap()
            .iter()
            .find(|v| v["name"] == name)
            .unwrap_or_else(|| panic!("no verdict {name}: {}", self.report["verdicts"]))
    }

    fn identity(&self, name: &str) -> &Value {
        self.report["results"]["identities"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["name"] == name)
            .unwrap()
    }

    fn files(&self) -> Vec<String> {
        let mut v: Vec<String> = fs::read_dir(self.out.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    }
}

fn run_with(cmd: &str, config: &Path, extra: &[&str], threads: Option<&str>) -> Run {
    let out = tempfile::tempdir().unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_wcurvlab"));
    c.arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out.path())
        .args(extra);
    match threads {
        Some(t) => c.env("WCURVLAB_THREADS", t),
        None => c.env_remove("WCURVLAB_THREADS"),
    };
    let o = c.output().unwrap();
    let report = fs::read(out.path().join("report.json"))
        .map(|b| serde_json::from_slice(&b).unwrap())
        .unwrap_or(Value::Null);
    Run {
        code: o.status.code().unwrap(),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
        report,
        out,
    }
}

fn run(cmd: &str, config: &str, extra: &[&str]) -> Run {
    run_with(cmd, &configs().join(config), extra, None)
}

fn inline(text: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, text).unwrap();
    (dir, path)
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn curvature_of_sine_potential_matches_closed_form() {
    let r = run("curvature", "flat_t2_sine.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(f(&r.report["results"]["r_phi_closed_form_error"]) <= 1e-5);
    assert_eq!(r.report["status"], "pass");
    let csv = fs::read_to_string(r.out.path().join("r_phi.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,x1,r_phi"));
    assert_eq!(lines.count(), 64 * 64);
    assert_eq!(r.report["dumps"][0]["rows"], 64 * 64);
}

#[test]
fn curvature_of_linear_potential_is_minus_two() {
    let r = run("curvature", "rn_box.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rp = &r.report["results"]["r_phi"];
    assert!(
        (f(&rp["min"]) + 2.0).abs() <= 1e-8 && (f(&rp["max"]) + 2.0).abs() <= 1e-8,
        "{rp}"
    );
}

#[test]
fn malformed_metric_names_the_missing_component() {
    let r = run("curvature", "malformed_g.toml", &[]);
    assert_eq!(r.code, 2);
    assert!(
        r.stderr.contains("fields.g: missing component g01"),
        "{}",
        r.stderr
    );
    assert_eq!(r.report["status"], "error");
    assert_eq!(r.report["exit_code"], 2);
    assert!(r.report["error"].as_str().unwrap().contains("g01"));
    assert_eq!(r.files(), ["report.json"]);
}

#[test]
fn verify_random_torus_passes_every_identity() {
    let r = run("verify", "verify_random_t2.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    for row in r.report["results"]["identities"].as_array().unwrap() {
        assert_eq!(row["status"], "pass", "{row}");
        if row["name"] != "linearization" {
            assert!(f(&row["order"]) >= 4.0, "{row}");
            assert_eq!(row["levels"].as_array().unwrap().len(), 3);
        }
    }
    let fd = &r.identity("linearization")["finite_difference"];
    assert!(f(&fd["fd_defect_t_1e-3"]) <= 1e-5);
    assert!((f(&fd["t_slope"]) - 2.0).abs() < 0.1, "{fd}");
}

#[test]
fn verify_flat_constant_potential() {
    let r = run("verify", "verify_flat_const.toml", &[]);
    for name in [
        "integration_by_parts",
        "weighted_bianchi",
        "trace_identity",
        "linearization",
        "adjointness",
        "divergence_laplacian_metric",
        "divergence_ricci",
    ] {
        assert!(
            f(&r.identity(name)["defect"]) <= 1e-10,
            "{}",
            r.identity(name)
        );
    }
    // composed first differences against the second-difference stencil:
    // truncation error of the stencils, converging at their order
    for name in ["divergence_hessian", "commutator_anchor"] {
        let row = r.identity(name);
        assert!(f(&row["defect"]) > 1e-10, "{row}");
        assert!((f(&row["order"]) - 4.0).abs() < 0.3, "{row}");
    }
    assert_eq!(r.code, 1);
}

#[test]
fn verify_on_a_box_skips_closed_chart_identities() {
    let r = run("verify", "verify_box.toml", &[]);
    let row = r.identity("adjointness");
    assert_eq!(row["status"], "skipped");
    assert_eq!(row["note"], "skipped: requires closed chart");
    assert!(r
        .stdout
        .contains("adjointness                  skipped: requires closed chart"));
    assert_eq!(r.identity("integration_by_parts")["status"], "skipped");
    assert_eq!(r.identity("weighted_bianchi")["status"], "pass");
    assert_eq!(r.code, 0, "{}", r.stdout);
}

#[test]
fn static_check_on_the_line_example() {
    let r = run("static-check", "rn_line.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let line = r.stdout.lines().next().unwrap();
    assert!(
        line.starts_with("weighted static: PASS (sup residual "),
        "{line}"
    );
    assert!(line.ends_with("R_φ^m = -2"), "{line}");
}

#[test]
fn static_check_on_the_three_dimensional_example_fails() {
    // transverse entries of eq1 are −f(m+1)/m² in three dimensions
    let r = run("static-check", "rn_box.toml", &[]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.starts_with("weighted static: FAIL"));
    assert!(r.stdout.contains("R_φ^m = -2"));
}

#[test]
fn kernel_of_flat_torus() {
    let r = run("kernel", "kernel_flat_t3.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(
        r.stdout
            .starts_with("kernel dim 1; condition (i) fails at λ = 0"),
        "{}",
        r.stdout
    );
    let k = &r.report["results"]["drdr_star"];
    assert!(f(&k["constant_cosine"]) >= 1.0 - 1e-8);
    assert_eq!(k["unknowns"], 512);
}

#[test]
fn kernel_of_bump_space_is_trivial() {
    let r = run("kernel", "bump.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["results"]["drdr_star"]["kernel_dim"], 0);
}

#[test]
fn prescribe_on_bump_space_converges() {
    let r = run("prescribe", "bump.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let trace = r.report["traces"]["newton"].as_array().unwrap();
    assert!(!trace.is_empty() && trace.len() <= 11);
    let res: Vec<f64> = trace.iter().map(|t| f(&t["residual"])).collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    assert!(f(&r.report["results"]["residual_l2_phi"]) <= 1e-6);
    assert!(r.verdict("self_consistency")["pass"].as_bool().unwrap());
    assert_eq!(r.files(), ["report.json", "residual.csv", "u.csv"]);
}

#[test]
fn prescribe_fifty_times_needs_scaling() {
    let r = run("prescribe", "bump_50x.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(f(&r.report["results"]["scale"]) > 1.0);
    assert!(f(&r.report["results"]["residual_recomputed"]) <= 1e-5);
    assert!(!r.report["traces"]["scales"].as_array().unwrap().is_empty());
}

#[test]
fn prescribe_on_static_torus_reports_the_kernel() {
    let r = run("prescribe", "static_flat_t3.toml", &[]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("kernel nonempty"), "{}", r.stderr);
    assert_eq!(r.report["results"]["failure"]["kernel_dim"], 1);
    assert_eq!(r.report["status"], "error");
    assert_eq!(r.files(), ["report.json"]);
}

#[test]
fn ode_closed_form() {
    let r = run("ode", "ode_closed_form.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rf = &r.report["results"]["reference"];
    assert!(f(&rf["sup_error"]) <= 1e-8);
    assert!((f(&rf["order"]) - 4.0).abs() < 0.3, "{rf}");
    let csv = fs::read_to_string(r.out.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn ode_floor_hit_is_a_solver_failure() {
    let (_d, cfg) = inline(
        "version = 1\nm = 1.0\n[ode]\nf0 = 1.0\ndf0 = -2.0\nphi0 = 0.0\ndphi0 = 0.0\nx_end = 3.0\nstep = 1e-3\ndump = true\n",
    );
    let r = run_with("ode", &cfg, &[], None);
    assert_eq!(r.code, 3, "{}", r.stdout);
    assert!(
        r.stdout.contains("candidate static horizon"),
        "{}",
        r.stdout
    );
    assert!(f(&r.report["results"]["floor_hit"]["x"]) < 3.0);
    assert_eq!(r.files(), ["report.json"]);
}

#[test]
fn warp_checks() {
    let r = run("warp-check", "warp_fiber_t2.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let fiber = &r.report["results"]["fiber"];
    assert!(
        f(&fiber["defect"]) <= 1e-4 && f(&fiber["order"]) >= 3.0,
        "{fiber}"
    );

    let r = run("warp-check", "rn_line.toml", &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(f(&r.report["results"]["lorentzian"]["k_error"]) <= 1e-6);

    let r = run("warp-check", "rn_box.toml", &[]);
    assert_eq!(r.code, 1);
    let d = f(&r.report["results"]["lorentzian"]["defect"]);
    assert!((d - 40f64.sqrt() / 3.0).abs() < 1e-6, "{d}");
}

#[test]
fn csv_input_agrees_with_the_expression() {
    let dir = tempfile::tempdir().unwrap();
    let n = 24;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut csv = String::from("x0,x1,phi\n");
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            csv.push_str(&format!("{x:e},{y:e},{:e}\n", 0.3 * x.sin() * y.cos()));
        }
    }
    fs::write(dir.path().join("phi.csv"), csv).unwrap();
    let head = format!("version = 1\nm = 2.0\n[chart]\nkind = \"torus\"\nn = 2\nsizes = [{n}, {n}]\nextents = [\"2*pi\", \"2*pi\"]\n");
    fs::write(
        dir.path().join("a.toml"),
        format!("{head}[fields]\nphi = {{ csv = \"phi.csv\" }}\n"),
    )
    .unwrap();
    fs::write(
        dir.path().join("b.toml"),
        format!("{head}[fields]\nphi = \"0.3*sin(x0)*cos(x1)\"\n"),
    )
    .unwrap();
    let a = run_with("curvature", &dir.path().join("a.toml"), &[], None);
    let b = run_with("curvature", &dir.path().join("b.toml"), &[], None);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let (ra, rb) = (
        f(&a.report["results"]["r_phi"]["sup"]),
        f(&b.report["results"]["r_phi"]["sup"]),
    );
    assert!((ra - rb).abs() <= 1e-12, "{ra} vs {rb}");

    // CSV fields cannot be resampled, so verify runs a single level
    let v = run_with(
        "verify",
        &dir.path().join("a.toml"),
        &["--refine", "3"],
        None,
    );
    assert_eq!(v.report["results"]["levels"], 1);
    assert!(v.stdout.contains("CSV-sourced fields cannot be resampled"));
}

#[test]
fn csv_with_wrong_coordinates_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    // node 3 of an 8-node box on [0, 7] sits at 3, not 3.5
    let rows: String = (0..8)
        .map(|i| format!("{},1.0\n", if i == 3 { 3.5 } else { i as f64 }))
        .collect();
    fs::write(dir.path().join("phi.csv"), format!("x0,phi\n{rows}")).unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "version = 1\nm = 1.0\n[chart]\nkind = \"box\"\nn = 1\nsizes = [8]\nextents = [7.0]\n[fields]\nphi = { csv = \"phi.csv\" }\n",
    )
    .unwrap();
    let r = run_with("curvature", &cfg, &[], None);
    assert_eq!(r.code, 2);
    assert!(
        r.stderr.contains("fields.phi") && r.stderr.contains("row 4"),
        "{}",
        r.stderr
    );
}

#[test]
fn overrides_are_echoed() {
    let r = run(
        "verify",
        "verify_random_t2.toml",
        &["--seed", "7", "--order", "4", "--refine", "2"],
    );
    let cfg = &r.report["config"];
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["order"], 4);
    assert_eq!(cfg["verify"]["levels"], 2);
    assert_eq!(r.report["results"]["levels"], 2);
    assert_ne!(r.report, run("verify", "verify_random_t2.toml", &[]).report);
}

#[test]
fn reports_are_byte_identical_across_thread_counts() {
    let cfg = configs().join("verify_random_t2.toml");
    let a = run_with("verify", &cfg, &[], Some("1"));
    let b = run_with("verify", &cfg, &[], Some("3"));
    let c = run_with("verify", &cfg, &[], None);
    let bytes = |r: &Run| fs::read(r.out.path().join("report.json")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(bytes(&a), bytes(&c));
}

#[test]
fn config_errors_exit_two() {
    let cases = [
        ("version = 2\nm = 1.0\n", "version"),
        ("version = 1\nm = 1.0\nbogus = 3\n", "bogus"),
        ("version = 1\nm = 1.0\n[chart]\nkind = \"torus\"\nn = 2\nsizes = [16, 16]\nextents = [1.0, 1.0]\n[fields]\nphi = \"x2\"\n", "x2"),
        ("version = 1\nm = 1.0\n[chart]\nkind = \"torus\"\nn = 2\nsizes = [16, 16]\nextents = [1.0, 1.0]\n[curvature]\ndump = [\"nope\"]\n", "nope"),
    ];
    for (text, needle) in cases {
        let (_d, cfg) = inline(text);
        let r = run_with("curvature", &cfg, &[], None);
        assert_eq!(r.code, 2, "{text}");
        assert!(r.stderr.contains(needle), "{needle}: {}", r.stderr);
    }
    let r = run_with("curvature", Path::new("/nonexistent/cfg.toml"), &[], None);
    assert_eq!(r.code, 2);
}

#[test]
fn invalid_thread_count_is_rejected() {
    let r = run_with(
        "curvature",
        &configs().join("rn_box.toml"),
        &[],
        Some("many"),
    );
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("WCURVLAB_THREADS"), "{}", r.stderr);
}
