use std::collections::BTreeMap;
use std::path::Path;

use isoscatter::pipeline::{run, Mode, RuleChoice, RunConfig};

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.kl.max_modes = Some(3);
    c.max_level = 1;
    c.budget.a = 3;
    c.budget.r = 2;
    c.budget.n_min = 2;
    c.exterior.points = 12;
    c
}

fn hashes(dir: &Path, mode: Mode, cfg: &RunConfig) -> (BTreeMap<String, String>, usize, usize) {
    let out = run(cfg, mode, dir, 1).unwrap();
    let h = out.manifest.outputs.iter().map(|f| (f.file.clone(), f.sha256.clone())).collect();
    (h, out.manifest.cache.solves, out.manifest.cache.disk_hits)
}

#[test]
fn interrupted_runs_resume_to_identical_outputs() {
    let cfg = small();
    let full = tempfile::tempdir().unwrap();
    let (want, total, _) = hashes(full.path(), Mode::ForwardVariance, &cfg);

    // an interrupted run leaves only part of the checkpoints behind
    let partial = tempfile::tempdir().unwrap();
    let cache_src = std::fs::read_dir(full.path().join("cache")).unwrap().next().unwrap().unwrap().path();
    let cache_dst = partial.path().join("cache").join(cache_src.file_name().unwrap());
    std::fs::create_dir_all(&cache_dst).unwrap();
    let mut entries: Vec<_> = std::fs::read_dir(&cache_src).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    assert_eq!(entries.len(), total);
    for e in entries.iter().step_by(2) {
        std::fs::copy(e, cache_dst.join(e.file_name().unwrap())).unwrap();
    }
    let (got, solves, disk) = hashes(partial.path(), Mode::ForwardVariance, &cfg);
    assert_eq!(got, want);
    assert_eq!(disk, entries.len().div_ceil(2));
    assert_eq!(solves + disk, total);

    let (again, solves, disk) = hashes(partial.path(), Mode::ForwardVariance, &cfg);
    assert_eq!((again, solves, disk), (want, 0, total));
}

#[test]
fn sparse_grid_forward_mean_runs() {
    let mut cfg = small();
    cfg.rule = RuleChoice::Sg;
    cfg.sparse.base = 1.0;
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, Mode::ForwardMean, dir.path(), 2).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("level_contributions.csv")).unwrap();
    let counts: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 2);
    assert!(counts[0] > counts[1] && counts[1] >= 1, "{counts:?}");
    assert!(out.summary.contains("samples per level"));
}

#[test]
fn inversion_reports_are_consistent() {
    let mut cfg = small();
    cfg.max_level = 0;
    cfg.budget.a = 5;
    cfg.inversion.report_grid = 2;
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, Mode::Invert, dir.path(), 1).unwrap();
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("posterior.json")).unwrap()).unwrap();
    let ess = summary["effective_sample_size"].as_f64().unwrap();
    assert!(ess >= 1.0 && ess <= 32.0 + 1e-9, "{ess}");
    assert!(summary["log_z"].as_f64().unwrap().is_finite());
    let rows = std::fs::read_to_string(dir.path().join("posterior.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 6 * 4);
    let obs = std::fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 1 + 6);
    for f in ["posterior.vtk", "prior.vtk", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn modes_parse_from_their_names() {
    for m in [Mode::Kl, Mode::ForwardMean, Mode::ForwardVariance, Mode::Invert, Mode::Verify] {
        assert_eq!(m.name().parse::<Mode>().unwrap(), m);
    }
    assert!("inverse".parse::<Mode>().is_err());
}

#[test]
fn shipped_configurations_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            RunConfig::load(&p, &[]).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
