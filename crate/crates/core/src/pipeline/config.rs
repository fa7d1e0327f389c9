use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes::MisfitForm;
use crate::container::sha256_hex;
use crate::error::{Error, Result};
use crate::mlq::allocate_samples;

/// Largest admissible refinement level.
pub const MAX_LEVEL: usize = 6;

/// Parameter-domain rule family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleChoice {
    #[default]
    Qmc,
    Sg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterfaceConfig {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Interpolation degree on each tile.
    pub degree: usize,
    /// Tiles per patch and direction.
    pub splits: usize,
    /// Quadrature sub-cells per tile and direction.
    pub subcells: usize,
    pub order: usize,
}

impl Default for InterfaceConfig {
    fn default() -> Self {
        Self { lo: [-1.0; 3], hi: [2.0; 3], degree: 6, splits: 2, subcells: 2, order: 8 }
    }
}

/// QMC budget `N_l = max(2^(a - r l), N_min)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub a: u32,
    pub r: u32,
    pub n_min: u64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { a: 10, r: 6, n_min: 4 }
    }
}

/// Sparse grid levels `base + step (L - l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparseConfig {
    pub base: f64,
    pub step: f64,
}

impl Default for SparseConfig {
    fn default() -> Self {
        Self { base: 1.0, step: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub amplitude: f64,
    pub length: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { amplitude: 0.05, length: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KlConfig {
    pub degree: usize,
    pub level: usize,
    pub cholesky_tol: f64,
    pub trace_frac: f64,
    /// `0` switches the deformation off.
    pub max_modes: Option<usize>,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self { degree: 2, level: 0, cholesky_tol: 1e-10, trace_frac: 0.99, max_modes: Some(20) }
    }
}

/// Named seeds; every random quantity of a run derives from one of these.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Block of Halton indices used on every level.
    pub qmc_block: u64,
    /// Parameter point of the synthetic truth.
    pub truth: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { qmc_block: 0, truth: 1, noise: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    pub sigma_rel: f64,
    pub misfit: MisfitForm,
    /// Report points per patch and direction.
    pub report_grid: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self { sigma_rel: 0.1, misfit: MisfitForm::HalfSquared, report_grid: 4 }
    }
}

/// Exterior checkpoints on a sphere about the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExteriorConfig {
    pub radius: f64,
    pub points: usize,
}

impl Default for ExteriorConfig {
    fn default() -> Self {
        Self { radius: 5.0, points: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BemConfig {
    pub singular_order: Option<usize>,
    pub far_scale: usize,
    pub dof_cap: usize,
}

impl Default for BemConfig {
    fn default() -> Self {
        Self { singular_order: None, far_scale: 1, dof_cap: 12_000 }
    }
}

/// Complete description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Built-in geometry name, ignored when `geometry_file` is set.
    pub geometry: String,
    pub geometry_file: Option<PathBuf>,
    pub interface: InterfaceConfig,
    pub kappa: f64,
    pub direction: [f64; 3],
    /// Spline degree of the density space.
    pub degree: usize,
    pub max_level: usize,
    pub rule: RuleChoice,
    pub budget: BudgetConfig,
    pub sparse: SparseConfig,
    pub kernel: KernelConfig,
    pub kl: KlConfig,
    pub seeds: Seeds,
    pub inversion: InversionConfig,
    pub exterior: ExteriorConfig,
    pub bem: BemConfig,
    /// Reuse and store solved samples under `<out>/cache`.
    pub cache: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: "cube".into(),
            geometry_file: None,
            interface: InterfaceConfig::default(),
            kappa: 1.0,
            direction: [0.0, 0.0, 1.0],
            degree: 2,
            max_level: 0,
            rule: RuleChoice::Qmc,
            budget: BudgetConfig::default(),
            sparse: SparseConfig::default(),
            kernel: KernelConfig::default(),
            kl: KlConfig::default(),
            seeds: Seeds::default(),
            inversion: InversionConfig::default(),
            exterior: ExteriorConfig::default(),
            bem: BemConfig::default(),
            cache: true,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    /// Parses JSON text, applying `key=value` seed overrides first.
    pub fn from_json(text: &str, seed_overrides: &[(String, u64)]) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(config_err)?;
        if !v.is_object() {
            return Err(Error::Config("configuration must be a JSON object".into()));
        }
        for (k, s) in seed_overrides {
            let seeds = v.as_object_mut().expect("checked above").entry("seeds").or_insert_with(|| serde_json::json!({}));
            seeds.as_object_mut().ok_or_else(|| Error::Config("`seeds` must be an object".into()))?.insert(k.clone(), (*s).into());
        }
        let c: Self = serde_json::from_value(v).map_err(config_err)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, seed_overrides: &[(String, u64)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, seed_overrides)
    }

    /// Parses a `key=value` seed override.
    pub fn parse_seed_override(s: &str) -> Result<(String, u64)> {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("seed override '{s}' is not key=value")))?;
        let v = v.trim().parse::<u64>().map_err(|e| Error::Config(format!("seed override '{s}': {e}")))?;
        Ok((k.trim().to_string(), v))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.direction.iter().all(|c| *c == 0.0) || self.direction.iter().any(|c| !c.is_finite()) {
            return bad("direction must be a finite nonzero vector".into());
        }
        if self.max_level > MAX_LEVEL {
            return bad(format!("max_level {} exceeds {MAX_LEVEL}", self.max_level));
        }
        if !(1..=4).contains(&self.degree) {
            return bad(format!("degree {} outside 1..=4", self.degree));
        }
        let i = &self.interface;
        if (0..3).any(|c| !(i.hi[c] > i.lo[c])) || i.degree < 1 || i.splits < 1 || i.subcells < 1 || i.order < 1 {
            return bad("interface needs lo < hi and positive resolution".into());
        }
        allocate_samples(self.budget.a, self.budget.r, self.budget.n_min, self.max_level).map_err(config_err)?;
        if !(self.kernel.amplitude > 0.0 && self.kernel.length > 0.0) {
            return bad("kernel amplitude and length must be positive".into());
        }
        if !(self.kl.trace_frac > 0.0 && self.kl.trace_frac <= 1.0) || !(self.kl.cholesky_tol > 0.0) {
            return bad("kl.trace_frac must lie in (0, 1] and kl.cholesky_tol must be positive".into());
        }
        if !(1..=4).contains(&self.kl.degree) {
            return bad(format!("kl.degree {} outside 1..=4", self.kl.degree));
        }
        if !(self.inversion.sigma_rel >= 0.0) || self.inversion.report_grid < 1 {
            return bad("inversion.sigma_rel must be nonnegative and report_grid positive".into());
        }
        if !(self.exterior.radius > 0.0) || self.exterior.points < 1 {
            return bad("exterior sphere needs a positive radius and at least one point".into());
        }
        if self.bem.far_scale < 1 || self.bem.dof_cap < 1 {
            return bad("bem.far_scale and bem.dof_cap must be positive".into());
        }
        if !(self.sparse.base >= 0.0 && self.sparse.step >= 0.0) {
            return bad("sparse levels must be nonnegative".into());
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::from_json("{}", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let back = RunConfig::from_json(&c.canonical_json(), &[]).unwrap();
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [r#"{"kapa": 1.0}"#, r#"{"budget": {"a": 3, "b": 1}}"#, r#"{"seeds": {"truht": 3}}"#] {
            assert!(matches!(RunConfig::from_json(text, &[]), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invariants_are_checked() {
        for text in [r#"{"kappa": 0.0}"#, r#"{"max_level": 7}"#, r#"{"budget": {"a": 40}}"#, r#"{"interface": {"lo": [3, 0, 0]}}"#] {
            assert!(matches!(RunConfig::from_json(text, &[]), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn seed_overrides() {
        let o = RunConfig::parse_seed_override("truth=17").unwrap();
        let c = RunConfig::from_json(r#"{"seeds": {"noise": 5}}"#, &[o]).unwrap();
        assert_eq!((c.seeds.truth, c.seeds.noise), (17, 5));
        let bad = RunConfig::parse_seed_override("nonsense=1").unwrap();
        assert!(RunConfig::from_json("{}", &[bad]).is_err());
        assert!(RunConfig::parse_seed_override("truth").is_err());
        assert!(RunConfig::parse_seed_override("truth=x").is_err());
    }
}
