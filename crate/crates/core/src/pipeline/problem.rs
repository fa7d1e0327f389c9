use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;

use crate::bem::{solve_scattering, PotentialEvaluator, QuadSettings, WaveContext};
use crate::container::{sha256_hex, Container};
use crate::error::{Error, Result};
use crate::geometry::{builtin, io::load_patches, io::write_patches, MultipatchSurface};
use crate::interface::{sample_cauchy_with, InterfaceCauchyData, InterfaceGrid};
use crate::mlq::LevelHierarchy;
use crate::quadrature::AnisotropyWeights;
use crate::randomfield::{compute_kl, gaussian_kernel, DeformationModel, KlExpansion, KlSettings};

use super::config::{RuleChoice, RunConfig};

type C = Complex64;

/// Cache statistics of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub memory_hits: usize,
    pub disk_hits: usize,
    pub solves: usize,
}

/// Solved interface data keyed by level and parameter bits, in memory and
/// optionally on disk.
#[derive(Debug)]
pub struct SampleCache {
    prefix: String,
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<(usize, Vec<u64>), Arc<InterfaceCauchyData>>>,
    memory_hits: AtomicUsize,
    disk_hits: AtomicUsize,
    solves: AtomicUsize,
}

impl SampleCache {
    pub fn new(prefix: String, dir: Option<PathBuf>) -> Self {
        Self {
            prefix,
            dir,
            mem: Mutex::new(HashMap::new()),
            memory_hits: AtomicUsize::new(0),
            disk_hits: AtomicUsize::new(0),
            solves: AtomicUsize::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            memory_hits: self.memory_hits.load(Ordering::Relaxed),
            disk_hits: self.disk_hits.load(Ordering::Relaxed),
            solves: self.solves.load(Ordering::Relaxed),
        }
    }

    pub fn len(&self) -> usize {
        self.mem.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path(&self, level: usize, bits: &[u64]) -> Option<PathBuf> {
        let mut key = format!("{}:{level}:", self.prefix);
        for b in bits {
            key.push_str(&format!("{b:016x}"));
        }
        let h = sha256_hex(key.as_bytes());
        self.dir.as_ref().map(|d| d.join(&self.prefix[..16]).join(format!("l{level}-{}.isc", &h[..32])))
    }

    pub fn get_or_compute(
        &self,
        level: usize,
        y: &[f64],
        compute: impl FnOnce() -> Result<InterfaceCauchyData>,
    ) -> Result<Arc<InterfaceCauchyData>> {
        let bits: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        let key = (level, bits);
        if let Some(v) = self.mem.lock().expect("cache lock").get(&key) {
            self.memory_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v.clone());
        }
        let path = self.path(level, &key.1);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            let c = Container::read(p)?;
            let ok = c.kind == "interface-cauchy"
                && c.header["prefix"] == self.prefix.as_str()
                && c.header["level"] == level
                && c.header["y_bits"].as_array().is_some_and(|a| {
                    a.len() == key.1.len() && a.iter().zip(&key.1).all(|(s, b)| s.as_str() == Some(&format!("{b:016x}")))
                });
            if !ok {
                return Err(Error::CacheCorrupt(format!("{} does not belong to this sample", p.display())));
            }
            let v = Arc::new(InterfaceCauchyData::from_container(&c)?);
            self.disk_hits.fetch_add(1, Ordering::Relaxed);
            self.mem.lock().expect("cache lock").insert(key, v.clone());
            return Ok(v);
        }
        let v = Arc::new(compute()?);
        self.solves.fetch_add(1, Ordering::Relaxed);
        if let Some(p) = path {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let header = serde_json::json!({
                "prefix": self.prefix,
                "level": level,
                "y_bits": key.1.iter().map(|b| format!("{b:016x}")).collect::<Vec<_>>(),
            });
            v.to_container(header).write(&p)?;
        }
        self.mem.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}

/// Everything shared by the samples of a run: geometry, random surface
/// model, interface and solve settings.
pub struct Problem {
    pub config: RunConfig,
    pub base: MultipatchSurface<f64>,
    pub deformation: Option<DeformationModel>,
    pub grid: InterfaceGrid,
    pub ctx: WaveContext,
    pub quad: QuadSettings,
    pub cache: SampleCache,
}

/// Points `(patch, u, v)` on an `n x n` cell-centred grid per patch.
pub fn report_points(patches: usize, n: usize) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::with_capacity(patches * n * n);
    for p in 0..patches {
        for a in 0..n {
            for b in 0..n {
                out.push((p, (a as f64 + 0.5) / n as f64, (b as f64 + 0.5) / n as f64));
            }
        }
    }
    out
}

impl Problem {
    /// Builds the problem; samples are cached on disk under `cache_dir` if given.
    pub fn new(config: RunConfig, cache_dir: Option<PathBuf>) -> Result<Self> {
        config.validate()?;
        let base = match &config.geometry_file {
            Some(p) => load_patches::<f64>(p)?,
            None => builtin::by_name::<f64>(&config.geometry)?,
        };
        let deformation = if config.kl.max_modes == Some(0) {
            None
        } else {
            let kl = compute_kl(&base, &gaussian_kernel(config.kernel.amplitude, config.kernel.length), &Self::kl_settings(&config))?;
            if kl.rank() == 0 {
                None
            } else {
                Some(DeformationModel::new(kl)?)
            }
        };
        let i = &config.interface;
        let t = builtin::cuboid_shell(i.lo, i.hi)?;
        let grid = InterfaceGrid::new(&t, i.degree, i.splits, i.subcells, i.order)?;
        let ctx = WaveContext::new(config.kappa, config.direction)?;
        let quad = QuadSettings { singular_order: config.bem.singular_order, far_scale: config.bem.far_scale, dof_cap: config.bem.dof_cap };
        let mut key = String::new();
        key.push_str(&write_patches(&base)?);
        key.push_str(&serde_json::to_string(&(
            &config.interface,
            config.kappa,
            config.direction,
            config.degree,
            &config.bem,
            &config.kernel,
            &config.kl,
        ))?);
        let prefix = sha256_hex(key.as_bytes());
        let cache = SampleCache::new(prefix, if config.cache { cache_dir } else { None });
        Ok(Self { config, base, deformation, grid, ctx, quad, cache })
    }

    pub fn kl_settings(config: &RunConfig) -> KlSettings {
        KlSettings {
            degree: config.kl.degree,
            level: config.kl.level,
            cholesky_tol: config.kl.cholesky_tol,
            trace_frac: config.kl.trace_frac,
            max_modes: config.kl.max_modes,
        }
    }

    pub fn kl(&self) -> Option<&KlExpansion> {
        self.deformation.as_ref().map(|d| d.kl())
    }

    /// Number of random parameters.
    pub fn dim(&self) -> usize {
        self.kl().map_or(0, |k| k.rank())
    }

    /// Scatterer for parameter `y`.
    pub fn surface(&self, y: &[f64]) -> Result<MultipatchSurface<f64>> {
        match &self.deformation {
            Some(d) => d.deform(y),
            None if y.is_empty() => Ok(self.base.clone()),
            None => Err(Error::DimensionMismatch { expected: 0, found: y.len() }),
        }
    }

    /// Interface Cauchy data of the sample `y` solved on `level`.
    pub fn cauchy(&self, level: usize, y: &[f64]) -> Result<Arc<InterfaceCauchyData>> {
        self.cache.get_or_compute(level, y, || {
            let s = self.surface(y)?;
            self.grid.check_enclosure(&s)?;
            let (space, sol) = solve_scattering(&s, self.config.degree, level, &self.ctx, &self.quad)?;
            let ev = PotentialEvaluator::new(&space, &sol, &self.ctx)?;
            Ok(sample_cauchy_with(&ev, &self.grid))
        })
    }

    /// Scattered field at the interface patch midpoints.
    pub fn observations(&self, level: usize, y: &[f64]) -> Result<Vec<C>> {
        let d = self.cauchy(level, y)?;
        Ok(self.grid.midpoints().iter().map(|&k| d.u[k]).collect())
    }

    /// Rule hierarchy of the configuration with a given Halton block.
    pub fn hierarchy_with(&self, max_level: usize, a: u32, n_min: u64, block: u64) -> Result<LevelHierarchy> {
        let m = self.dim().max(1);
        match self.config.rule {
            RuleChoice::Qmc => LevelHierarchy::qmc(m, max_level, a, self.config.budget.r, n_min, block),
            RuleChoice::Sg => {
                let w = match self.kl() {
                    Some(kl) => AnisotropyWeights::from_eigenvalues(&kl.eigenvalues),
                    None => AnisotropyWeights::isotropic(1),
                };
                LevelHierarchy::sparse(max_level, self.config.sparse.base, self.config.sparse.step, &w)
            }
        }
    }

    pub fn hierarchy(&self) -> Result<LevelHierarchy> {
        let b = &self.config.budget;
        self.hierarchy_with(self.config.max_level, b.a, b.n_min, self.config.seeds.qmc_block)
    }

    /// Rule nodes are drawn in `[-1, 1]^max(M, 1)`; a deterministic problem
    /// ignores the dummy coordinate.
    pub fn parameter<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        &y[..self.dim().min(y.len())]
    }

    /// Reference positions of the report points.
    pub fn report_positions(&self) -> Result<Vec<[f64; 3]>> {
        let s = match &self.deformation {
            Some(d) => d.reference()?,
            None => self.base.clone(),
        };
        Ok(report_points(s.len(), self.config.inversion.report_grid)
            .into_iter()
            .map(|(p, u, v)| s.patch(p).eval(u, v))
            .collect())
    }

    /// Displacement at the report points.
    pub fn displacement(&self, y: &[f64]) -> Result<Vec<[f64; 3]>> {
        let pts = report_points(self.base.len(), self.config.inversion.report_grid);
        match self.kl() {
            Some(kl) => {
                let c = kl.coefficients(y)?;
                Ok(pts.into_iter().map(|(p, u, v)| kl.displacement(&c, p, u, v)).collect())
            }
            None => Ok(vec![[0.0; 3]; pts.len()]),
        }
    }
}
