use std::path::Path;
use std::process::{Command, Output};

use isoscatter::bem::{solve_scattering, QuadSettings, WaveContext};
use isoscatter::container::Container;
use isoscatter::geometry::builtin;
use isoscatter::interface::{sample_cauchy, InterfaceCauchyData, InterfaceGrid};

fn isoscatter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoscatter")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SINGLE_SOLVE: &str = r#"{"kl": {"max_modes": 0}, "budget": {"a": 0, "n_min": 1}, "exterior": {"points": 10}}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn file_bytes(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn single_solve_matches_plain_bem_and_reruns_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SINGLE_SOLVE);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let first = isoscatter(&["--config", &cfg, "--mode", "forward-mean", "--out", out_s, "--threads", "2"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(String::from_utf8_lossy(&first.stdout).contains("solves 1"));

    let c = Container::read(&out.join("mean_cauchy.isc")).unwrap();
    let mean = InterfaceCauchyData::from_container(&c).unwrap();
    let ctx = WaveContext::new(1.0, [0.0, 0.0, 1.0]).unwrap();
    let (space, sol) = solve_scattering(&builtin::cube::<f64>(), 2, 0, &ctx, &QuadSettings::default()).unwrap();
    let grid = InterfaceGrid::standard(&builtin::cuboid_shell([-1.0; 3], [2.0; 3]).unwrap()).unwrap();
    let direct = sample_cauchy(&sol, &space, &ctx, &grid).unwrap();
    let gap = mean.to_vec().iter().zip(direct.to_vec()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap <= 1e-14, "{gap}");

    let names = ["mean_cauchy.isc", "level_contributions.csv", "exterior_mean.csv"];
    let before = file_bytes(&out, &names);
    let second = isoscatter(&["--config", &cfg, "--mode", "forward-mean", "--out", out_s, "--threads", "1"]);
    assert!(second.status.success(), "{}", stderr(&second));
    let text = String::from_utf8_lossy(&second.stdout);
    assert!(text.contains("solves 0") && text.contains("1 on disk"), "{text}");
    assert_eq!(before, file_bytes(&out, &names));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "forward-mean");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn kl_mode_writes_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kl");
    let o = isoscatter(&["--mode", "kl", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("kl_eigenvalues.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 15);
    assert!(rows.last().unwrap().split(',').nth(2).unwrap().parse::<f64>().unwrap() > 0.99 - 1e-12);
    assert!(out.join("kl.isc").exists() && out.join("kl_modes.vtk").exists());
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();

    let bad = write_config(dir.path(), r#"{"kappa": -1}"#);
    let o = isoscatter(&["--config", &bad, "--mode", "forward-mean", "--out", out_s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error [config]"));

    let o = isoscatter(&["--mode", "kl", "--out", out_s, "--seed-override", "truht=3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = isoscatter(&["--mode", "kl", "--out", out_s, "--seed-override", "truth"]);
    assert_eq!(o.status.code(), Some(2));

    let o = isoscatter(&["--config", "/nonexistent/config.json", "--mode", "kl", "--out", out_s]);
    assert_eq!(o.status.code(), Some(2));

    let o = isoscatter(&["--mode", "sideways"]);
    assert!(!o.status.success());

    // interface box that cuts through the scatterer
    let tight = write_config(dir.path(), r#"{"interface": {"lo": [0.2, 0.2, 0.2], "hi": [0.8, 0.8, 0.8]}, "kl": {"max_modes": 0}}"#);
    let o = isoscatter(&["--config", &tight, "--mode", "forward-mean", "--out", out_s]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("sample-rejected"));
}
