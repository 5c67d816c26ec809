use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hyqmom::cli_harness::{read_profile, RunConfig};

fn hyqmom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyqmom")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hyqmom-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run", "--output-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = hyqmom(&all);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn smooth_run_reports_table_error() {
    let dir = scratch("smooth");
    let out = run_in(&dir, &["--problem", "smooth", "--order", "4", "--nelem", "40", "--limiters", "off"]);
    let line = stdout(&out).lines().find(|l| l.starts_with("error ")).unwrap().to_string();
    let e: f64 = line[6..].parse().unwrap();
    assert!((e - 5.337e-6).abs() / 5.337e-6 < 0.05, "{line}");

    let profile = read_profile(&dir.join("profile.csv")).unwrap();
    assert_eq!(profile.len(), 4 * 40);
    let header = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert!(header.starts_with("x,rho,u,p,h,k,r\n"));

    // the metadata echo parses back to the configuration that ran
    let meta = std::fs::read_to_string(dir.join("metadata.txt")).unwrap();
    let back = RunConfig::parse(&meta).unwrap();
    assert_eq!(back.n_elem, 40);
    assert_eq!(back.order, 4);
    assert!(!back.limit_points);
    assert_eq!(back.output_dir, dir);
    assert!(meta.contains("# steps="));
}

#[test]
fn shock_run_stays_positive_and_is_reproducible() {
    let (a, b) = (scratch("shock-a"), scratch("shock-b"));
    run_in(&a, &["--problem", "shock1", "--order", "4", "--nelem", "200"]);
    run_in(&b, &["--problem", "shock1", "--order", "4", "--nelem", "200"]);
    let pa = std::fs::read(a.join("profile.csv")).unwrap();
    assert_eq!(pa, std::fs::read(b.join("profile.csv")).unwrap());
    let profile = read_profile(&a.join("profile.csv")).unwrap();
    assert!(profile.iter().all(|p| p.alpha.rho > 0.0 && p.alpha.p > 0.0 && p.alpha.k > 0.0));
    let meta = std::fs::read_to_string(a.join("metadata.txt")).unwrap();
    assert!(meta.contains("not a published value"));
    let log = std::fs::read_to_string(a.join("limiters.log")).unwrap();
    assert!(log.contains("oscillation_limited"));
}

#[test]
fn bgk_sod_writes_euler_overlay() {
    let dir = scratch("sod");
    run_in(&dir, &["--problem", "bgk_sod", "--eps", "1e-4", "--order", "4", "--nelem", "200"]);
    let dg = read_profile(&dir.join("profile.csv")).unwrap();
    let exact = read_profile(&dir.join("euler_exact.csv")).unwrap();
    assert_eq!(dg.len(), exact.len());
    assert!(dg.iter().zip(&exact).all(|(a, b)| a.x == b.x));
    let l1: f64 = dg.iter().zip(&exact).map(|(a, b)| (a.alpha.rho - b.alpha.rho).abs() * 0.01 / 4.0).sum();
    assert!(l1 < 0.02, "L1 {l1}");
}

#[test]
fn riemann_reference_shares_the_schema() {
    let dir = scratch("reference");
    run_in(&dir, &["--problem", "vacuum", "--order", "2", "--nelem", "50", "--reference-cells", "400"]);
    let reference = read_profile(&dir.join("reference.csv")).unwrap();
    assert_eq!(reference.len(), 400);
    assert!(reference.iter().all(|p| p.alpha.rho > 0.0));
}

#[test]
fn config_file_with_overrides() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("run.cfg");
    std::fs::write(&file, "# smooth, third order\nproblem=smooth\norder=3\nnelem=12\nlimiters=off\n").unwrap();
    run_in(&dir, &["--config", file.to_str().unwrap(), "--nelem", "16", "--set", "t_final=0.5"]);
    let back = RunConfig::load(&dir.join("metadata.txt")).unwrap();
    assert_eq!((back.order, back.n_elem, back.t_final), (3, 16, Some(0.5)));
}

#[test]
fn converge_writes_both_tables() {
    let dir = scratch("converge");
    let out = hyqmom(&[
        "converge",
        "--problem",
        "smooth",
        "--order",
        "2",
        "--limiters",
        "off",
        "--n-list",
        "10,20,40",
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n_elem,error,log2_ratio");
    assert!(lines[1].starts_with("10,1.15"), "{}", lines[1]);
    assert_eq!(lines.len(), 4);
    assert!(std::fs::read_to_string(dir.join("convergence.txt")).unwrap().contains("smooth order 2"));
}

#[test]
fn diagnostics_and_fuzz() {
    let out = hyqmom(&["qmom-report", "--samples", "20"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().filter(|l| l.trim_end().ends_with("ok")).count(), 4);

    let clean = stdout(&hyqmom(&["positivity-fuzz", "--trials", "20000"]));
    assert!(clean.trim_end().ends_with("violations 0"), "{clean}");
    let broken = stdout(&hyqmom(&["positivity-fuzz", "--trials", "20000", "--cfl", "2"]));
    assert!(!broken.trim_end().ends_with("violations 0"), "{broken}");
}

#[test]
fn bad_input_fails_with_context() {
    let out = hyqmom(&["run", "--problem", "smooth", "--order", "9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported order 9"));

    let out = hyqmom(&["run", "--config", "/nonexistent/run.cfg"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/run.cfg"));

    let out = hyqmom(&["run", "--set", "colour=blue"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `colour`"));
}
