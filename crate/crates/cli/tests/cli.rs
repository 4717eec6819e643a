use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Copies a sample config into `dir`, pointing its output at `dir/out`.
fn stage(dir: &Path, name: &str) -> PathBuf {
    let text = std::fs::read_to_string(configs().join(name)).unwrap();
    let text: String = text
        .lines()
        .map(|l| if l.starts_with("output") { "output = \"out\"".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let p = dir.join(name);
    std::fs::write(&p, text + "\n").unwrap();
    p
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncfolner")).arg(cmd).arg(config).output().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn empty_suite_selection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage(dir.path(), "empty.toml");
    let o = run("verify", &cfg);
    assert_eq!(code(&o), 0);
    let r = report(dir.path());
    assert_eq!(r["rows"].as_array().unwrap().len(), 0);
    assert_eq!(r["summary"]["pass"], true);
    assert!(dir.path().join("out/tables.csv").exists());
}

#[test]
fn default_z_demo_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage(dir.path(), "z_demo.toml");
    let o = run("verify", &cfg);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path());
    assert_eq!(r["summary"]["failed"], 0);
    let rows = r["rows"].as_array().unwrap();
    for name in ["folner_boundary_bk", "adm_coverage", "weak11_constant", "l2_bound"] {
        assert!(rows.iter().any(|c| c["name"] == name), "missing {name}");
    }
}

#[test]
fn bad_folner_schedule_fails_regularity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage(dir.path(), "z_bad_schedule.toml");
    let o = run("verify", &cfg);
    assert_eq!(code(&o), 1);
    let r = report(dir.path());
    let failed: Vec<&Value> = r["rows"].as_array().unwrap().iter().filter(|c| c["asserted"] == true && c["holds"] == false).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| c["name"] == "folner_boundary_bk"));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "group = \"Z\"\neps = \"1/4\"\n[schedule]\nkind = \"geometric\"\nbase = \"four\"\n");
    let o = run("tile", &bad);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    let unknown = write(dir.path(), "unknown.toml", "group = \"Z\"\neps = \"1/4\"\nwindw = 3\n");
    let o = run("verify", &unknown);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("windw"));
    let decreasing = write(dir.path(), "dec.toml", "group = \"Z\"\neps = \"1/4\"\ndepth = 2\n[schedule]\nkind = \"explicit\"\nvalues = [4, 2, 8]\n");
    assert_eq!(code(&run("verify", &decreasing)), 2);
    let group = write(dir.path(), "group.toml", "group = \"Q8\"\neps = \"1/4\"\n");
    assert_eq!(code(&run("verify", &group)), 2);
    let noseed = write(dir.path(), "noseed.toml", "group = \"Z\"\neps = \"1/4\"\ndepth = 1\nlambdas = [1.0]\n[suites]\ncz = true\n");
    let o = run("verify", &noseed);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn trivial_single_scale_tiling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "group = \"Z\"\neps = \"1/8\"\noutput = \"out\"\n[tile]\nwindow = 64\nscales = [64]\n");
    assert_eq!(code(&run("tile", &cfg)), 0);
    let r = report(dir.path());
    assert_eq!(r["details"]["coverage"]["covered"], 64);
}

#[test]
fn z2_tile_demo_passes_with_figure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage(dir.path(), "z2_tile.toml");
    assert_eq!(code(&run("tile", &cfg)), 0);
    let svg = std::fs::read_to_string(dir.path().join("out/figures/tiling.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<rect"));
}

#[test]
fn z2_partition_and_filtration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage(dir.path(), "z2_partition.toml");
    assert_eq!(code(&run("partition", &cfg)), 0);
    let cfg = stage(dir.path(), "z2_filtration.toml");
    assert_eq!(code(&run("filtration", &cfg)), 0);
    let r = report(dir.path());
    let levels = r["details"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    assert!(levels[0]["atoms"].as_array().unwrap().iter().all(|a| a["elements"].is_array()));
    for n in 0..3 {
        assert!(dir.path().join(format!("out/figures/level_{n}.svg")).exists());
    }
}

#[test]
fn ergodic_demos_write_convergence_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = stage(dir.path(), "ergodic_torus.toml");
    assert_eq!(code(&run("ergodic", &cfg)), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/tables.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,size,distance,oracle");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("2,") && lines[3].contains(",0e0,"));
    let cfg = stage(dir.path(), "ergodic_unitary.toml");
    assert_eq!(code(&run("ergodic", &cfg)), 0);
    let mismatched = write(dir.path(), "m.toml", "group = \"Z2\"\neps = \"1/4\"\nseed = 1\n[ergodic]\naction = \"conjugation\"\n");
    assert_eq!(code(&run("ergodic", &mismatched)), 2);
}

#[test]
fn reports_are_deterministic() {
    let strip = |dir: &Path| {
        let mut r = report(dir);
        r.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&r).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let cfg = stage(d.path(), "z_demo.toml");
        assert_eq!(code(&run("verify", &cfg)), 0);
    }
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(
        std::fs::read(a.path().join("out/tables.csv")).unwrap(),
        std::fs::read(b.path().join("out/tables.csv")).unwrap()
    );
}

#[test]
fn cz_reads_function_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(configs().join("point_masses.txt"), dir.path().join("point_masses.txt")).unwrap();
    let cfg = stage(dir.path(), "z_cz_file.toml");
    let o = run("cz", &cfg);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path());
    assert_eq!(r["details"]["function"]["support"], 3);
    assert_eq!(r["details"]["cz"].as_array().unwrap().len(), 3);
    std::fs::write(dir.path().join("point_masses.txt"), "# group Z d 2\n3 ; 1 0\n").unwrap();
    let o = run("cz", &cfg);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}
