use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bayes::{gaussian_potential, ml_ratio_posterior, posterior_surface_report, synthesize_observations, write_report_csv, write_report_vtk};
use crate::bem::{solve_scattering, PotentialEvaluator, QuadSettings, WaveContext};
use crate::container::sha256_hex;
use crate::error::{Error, Result};
use crate::geometry::{builtin, io::write_vtk};
use crate::interface::{correlation_at, eval_from_interface, InterfaceCauchyData, SecondMomentData};
use crate::mie::SoundSoftSphere;
use crate::mlq::{ml_estimate, MlEstimate};

use super::config::RunConfig;
use super::problem::{CacheStats, Problem};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Kl,
    ForwardMean,
    ForwardVariance,
    Invert,
    Verify,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kl" => Mode::Kl,
            "forward-mean" => Mode::ForwardMean,
            "forward-variance" => Mode::ForwardVariance,
            "invert" => Mode::Invert,
            "verify" => Mode::Verify,
            other => return Err(Error::Config(format!("unknown mode '{other}'"))),
        })
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Kl => "kl",
            Mode::ForwardMean => "forward-mean",
            Mode::ForwardVariance => "forward-variance",
            Mode::Invert => "invert",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Record of a completed run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub format: u32,
    pub version: &'static str,
    pub mode: Mode,
    pub config_hash: String,
    pub config: RunConfig,
    pub threads: usize,
    pub timings: Vec<(String, f64)>,
    pub cache: CacheStats,
    pub outputs: Vec<OutputFile>,
}

/// Result of [`run`]: the manifest plus a human-readable summary.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub summary: String,
    pub passed: bool,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &path)?;
        self.files.push(OutputFile { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn text(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

struct Stages(Vec<(String, f64)>, Instant);

impl Stages {
    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.0.push((name.to_string(), (now - self.1).as_secs_f64()));
        self.1 = now;
    }
}

/// Fibonacci points on the sphere of radius `r`.
pub fn sphere_points(r: f64, n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            [r * s * phi.cos(), r * s * phi.sin(), r * z]
        })
        .collect()
}

fn csv_c(z: C) -> String {
    format!("{:.17e},{:.17e}", z.re, z.im)
}

/// Executes `mode` with a pool of `threads` workers, writing artifacts to `out`.
pub fn run(config: &RunConfig, mode: Mode, out: &Path, threads: usize) -> Result<RunOutcome> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(config, mode, out, threads.max(1)))
}

fn run_inner(config: &RunConfig, mode: Mode, out: &Path, threads: usize) -> Result<RunOutcome> {
    let mut stages = Stages(Vec::new(), Instant::now());
    let mut outputs = Outputs { dir: out.to_path_buf(), files: Vec::new() };
    let (summary, passed, cache) = if mode == Mode::Verify {
        let (s, ok) = verify(config, &mut outputs, &mut stages)?;
        (s, ok, CacheStats::default())
    } else {
        let problem = Problem::new(config.clone(), Some(out.join("cache")))?;
        stages.mark("setup");
        let s = match mode {
            Mode::Kl => kl_mode(&problem, &mut outputs)?,
            Mode::ForwardMean => forward(&problem, false, &mut outputs, &mut stages)?,
            Mode::ForwardVariance => forward(&problem, true, &mut outputs, &mut stages)?,
            Mode::Invert => invert(&problem, &mut outputs, &mut stages)?,
            Mode::Verify => unreachable!("handled above"),
        };
        (s, true, problem.cache.stats())
    };
    stages.mark("output");
    let manifest = RunManifest {
        format: 1,
        version: env!("CARGO_PKG_VERSION"),
        mode,
        config_hash: config.hash(),
        config: config.clone(),
        threads,
        timings: stages.0,
        cache,
        outputs: outputs.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    let tmp = out.join(".manifest.json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, out.join("manifest.json"))?;
    if !passed {
        return Err(Error::Verification(summary));
    }
    Ok(RunOutcome { manifest, summary, passed })
}

fn kl_mode(problem: &Problem, outputs: &mut Outputs) -> Result<String> {
    let kl = problem.kl().ok_or_else(|| Error::Config("kl mode needs kl.max_modes > 0".into()))?;
    outputs.write("kl.isc", &kl.to_container()?.to_bytes())?;
    let total: f64 = kl.eigenvalues.iter().sum();
    outputs.text("kl_eigenvalues.csv", |w| {
        writeln!(w, "k,lambda,cumulative")?;
        let mut acc = 0.0;
        for (k, l) in kl.eigenvalues.iter().enumerate() {
            acc += l;
            writeln!(w, "{},{:.17e},{:.17e}", k + 1, l, acc / total)?;
        }
        Ok(())
    })?;
    let reference = problem.deformation.as_ref().expect("kl present").reference()?;
    let nm = kl.rank().min(3);
    let coeffs: Vec<Vec<f64>> = (0..nm)
        .map(|k| {
            let mut y = vec![0.0; kl.rank()];
            y[k] = 1.0;
            kl.coefficients(&y)
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = (0..nm).map(|k| format!("mode_{}", k + 1)).collect();
    let fields: Vec<Box<dyn Fn(usize, f64, f64, [f64; 3]) -> f64>> = (0..nm)
        .map(|k| {
            let c = coeffs[k].clone();
            Box::new(move |p: usize, u: f64, v: f64, _: [f64; 3]| {
                let d = kl.displacement(&c, p, u, v);
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            }) as Box<dyn Fn(usize, f64, f64, [f64; 3]) -> f64>
        })
        .collect();
    let refs: Vec<(&str, &dyn Fn(usize, f64, f64, [f64; 3]) -> f64)> =
        names.iter().zip(&fields).map(|(n, f)| (n.as_str(), f.as_ref())).collect();
    outputs.text("kl_modes.vtk", |w| write_vtk(&reference, 8, &refs, w))?;
    Ok(format!(
        "KL: {} modes, leading eigenvalue {:.6e}, captured variance {:.6e}",
        kl.rank(),
        kl.eigenvalues.first().copied().unwrap_or(0.0),
        total
    ))
}

/// Multilevel mean and optionally second moment of the interface data.
pub fn forward_estimate(problem: &Problem, second: bool) -> Result<(MlEstimate, Option<SecondMomentData>)> {
    let h = problem.hierarchy()?;
    let model = |l: usize, y: &[f64]| Ok(problem.cauchy(l, problem.parameter(y))?.to_vec());
    let (mean, mom) = ml_estimate(&h, &model, second)?;
    let mom = mom.map(|m| SecondMomentData::from_dense(problem.grid.len(), m.total)).transpose()?;
    Ok((mean, mom))
}

fn forward(problem: &Problem, second: bool, outputs: &mut Outputs, stages: &mut Stages) -> Result<String> {
    let (est, mom) = forward_estimate(problem, second)?;
    stages.mark("estimate");
    let counts = problem.hierarchy()?.counts();
    let mean = InterfaceCauchyData::from_vec(&est.total)?;
    let header = serde_json::json!({ "config_hash": problem.config.hash(), "counts": counts });
    outputs.write("mean_cauchy.isc", &mean.to_container(header.clone()).to_bytes())?;
    outputs.text("level_contributions.csv", |w| {
        writeln!(w, "level,samples,linf")?;
        for (l, c) in est.contributions.iter().enumerate() {
            let m = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
            writeln!(w, "{l},{},{m:.17e}", counts[l])?;
        }
        Ok(())
    })?;
    let pts = sphere_points(problem.config.exterior.radius, problem.config.exterior.points);
    let mut vmin = f64::INFINITY;
    match &mom {
        None => outputs.text("exterior_mean.csv", |w| {
            writeln!(w, "x,y,z,re,im")?;
            for x in &pts {
                let v = eval_from_interface(&mean, &problem.grid, &problem.ctx, *x)?;
                writeln!(w, "{:.17e},{:.17e},{:.17e},{}", x[0], x[1], x[2], csv_c(v))?;
            }
            Ok(())
        })?,
        Some(m) => {
            outputs.write("second_moment.isc", &m.to_container(header).to_bytes())?;
            outputs.text("exterior_variance.csv", |w| {
                writeln!(w, "x,y,z,mean_re,mean_im,second_re,second_im,variance,imag_residual")?;
                for x in &pts {
                    let e = eval_from_interface(&mean, &problem.grid, &problem.ctx, *x)?;
                    let c = correlation_at(m, &problem.grid, &problem.ctx, *x, *x)?;
                    let v = c.re - e.norm_sqr();
                    vmin = vmin.min(v);
                    let im = c.im.abs() / c.norm().max(f64::MIN_POSITIVE);
                    writeln!(w, "{:.17e},{:.17e},{:.17e},{},{},{v:.17e},{im:.3e}", x[0], x[1], x[2], csv_c(e), csv_c(c))?;
                }
                Ok(())
            })?;
        }
    }
    stages.mark("exterior");
    let mut s = format!("samples per level {counts:?}, {} interface nodes", problem.grid.len());
    if mom.is_some() {
        let _ = write!(s, ", smallest exterior variance {vmin:.3e}");
    }
    Ok(s)
}

/// Truth parameter drawn uniformly from `[-1, 1]^M`.
pub fn truth_parameter(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn invert(problem: &Problem, outputs: &mut Outputs, stages: &mut Stages) -> Result<String> {
    let cfg = &problem.config;
    let m = problem.dim();
    let ystar = truth_parameter(m, cfg.seeds.truth);
    let truth = problem.observations(cfg.max_level, &ystar)?;
    let setup = synthesize_observations(&truth, cfg.inversion.sigma_rel, cfg.seeds.noise)?;
    stages.mark("truth");
    let h = problem.hierarchy()?;
    let form = cfg.inversion.misfit;
    let potential = |l: usize, y: &[f64]| {
        let g = problem.observations(l, problem.parameter(y))?;
        gaussian_potential(&setup.data, &g, &setup.covariance, form)
    };
    let quantity = |y: &[f64]| problem.displacement(problem.parameter(y));
    let post = ml_ratio_posterior(&h, &potential, &quantity)?;
    stages.mark("posterior");
    let reference = problem.report_positions()?;
    let prior = vec![[0.0; 3]; reference.len()];
    let rows = posterior_surface_report(&post, &reference, &prior)?;
    outputs.text("posterior.csv", |w| write_report_csv(&rows, w))?;
    outputs.text("posterior.vtk", |w| write_report_vtk(&rows, w))?;
    let base = match &problem.deformation {
        Some(d) => d.reference()?,
        None => problem.base.clone(),
    };
    outputs.text("prior.vtk", |w| write_vtk(&base, 8, &[], w))?;
    let mids = problem.grid.midpoints();
    outputs.text("observations.csv", |w| {
        writeln!(w, "node,x,y,z,truth_re,truth_im,data_re,data_im")?;
        for (i, &k) in mids.iter().enumerate() {
            let x = problem.grid.x[k];
            writeln!(w, "{k},{:.17e},{:.17e},{:.17e},{},{}", x[0], x[1], x[2], csv_c(setup.truth[i]), csv_c(setup.data[i]))?;
        }
        Ok(())
    })?;
    let chi = problem.displacement(&ystar)?;
    let dist = |a: &[[f64; 3]]| -> f64 {
        a.iter().zip(&chi).map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>()).sum::<f64>().sqrt()
    };
    let (d_post, d_prior) = (dist(&post.mean), dist(&prior));
    let summary = serde_json::json!({
        "truth_parameter": ystar,
        "sigma": setup.sigma,
        "log_z": post.log_z(),
        "effective_sample_size": post.ess,
        "distance_posterior_mean_to_truth": d_post,
        "distance_prior_mean_to_truth": d_prior,
    });
    outputs.write("posterior.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(format!(
        "posterior mean distance to truth {d_post:.4e} (prior {d_prior:.4e}), effective sample size {:.1}",
        post.ess
    ))
}

/// One row of the sphere verification.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub level: usize,
    pub dofs: usize,
    pub rel_error: f64,
    pub dn_rel_error: f64,
}

/// Relative l-infinity errors of `u_s` at 20 points on the radius-3 sphere
/// and of its radial derivative, against the series solution.
pub fn sphere_errors(level: usize, kappa: f64) -> Result<VerifyRow> {
    let ctx = WaveContext::new(kappa, [0.0, 0.0, 1.0])?;
    let mie = SoundSoftSphere::new(kappa, 1.0, [0.0, 0.0, 1.0]);
    let (space, sol) = solve_scattering(&builtin::sphere::<f64>(builtin::SPHERE_SPANS), 2, level, &ctx, &QuadSettings::default())?;
    let ev = PotentialEvaluator::new(&space, &sol, &ctx)?;
    let (mut e, mut m, mut ed, mut md) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for x in sphere_points(3.0, 20) {
        let n = x.map(|c| c / 3.0);
        let (u, dn) = ev.cauchy(x, Some(n));
        let (a, b) = (mie.scattered(x), mie.normal_derivative(x, n));
        e = e.max((u.value - a).norm());
        m = m.max(a.norm());
        ed = ed.max((dn.value - b).norm());
        md = md.max(b.norm());
    }
    Ok(VerifyRow { level, dofs: space.dim(), rel_error: e / m, dn_rel_error: ed / md })
}

/// Tolerance of the sphere check on level 2.
pub const VERIFY_TOLERANCE: f64 = 1e-3;

fn verify(config: &RunConfig, outputs: &mut Outputs, stages: &mut Stages) -> Result<(String, bool)> {
    let mut rows = Vec::new();
    for level in 0..=2 {
        rows.push(sphere_errors(level, config.kappa)?);
        stages.mark(&format!("level {level}"));
    }
    let monotone = rows.windows(2).all(|w| w[1].rel_error < w[0].rel_error);
    let accurate = rows[2].rel_error <= VERIFY_TOLERANCE;
    outputs.text("verify.csv", |w| {
        writeln!(w, "level,dofs,rel_error,dn_rel_error")?;
        for r in &rows {
            writeln!(w, "{},{},{:.6e},{:.6e}", r.level, r.dofs, r.rel_error, r.dn_rel_error)?;
        }
        Ok(())
    })?;
    let mut s = String::from("level  dofs  rel. error u_s  rel. error du_s/dn\n");
    for r in &rows {
        let _ = writeln!(s, "{:>5}  {:>4}  {:>14.3e}  {:>18.3e}", r.level, r.dofs, r.rel_error, r.dn_rel_error);
    }
    let mark = |b: bool| if b { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "{}  level-2 error <= {VERIFY_TOLERANCE:e}", mark(accurate));
    let _ = write!(s, "{}  errors decrease with the level", mark(monotone));
    Ok((s, accurate && monotone))
}
