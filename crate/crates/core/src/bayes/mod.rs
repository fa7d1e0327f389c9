//! Bayesian shape inversion from noisy far observations with a multilevel
//! ratio estimator for posterior moments of the surface displacement.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlq::LevelHierarchy;

type C = Complex64;
pub type Mat3 = [[f64; 3]; 3];

/// How the misfit enters the likelihood `exp(-Phi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisfitForm {
    /// `Phi = 1/2 |delta - g|_Sigma^2`.
    #[default]
    HalfSquared,
    /// `Phi = |delta - g|_Sigma`.
    Norm,
}

/// Lower Cholesky factor of a noise covariance.
#[derive(Clone, Debug)]
pub struct NoiseCovariance {
    l: DMatrix<f64>,
}

impl NoiseCovariance {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::NotSpd("noise covariance is not square".into()));
        }
        let l = sigma.cholesky().ok_or_else(|| Error::NotSpd("noise covariance".into()))?.l();
        Ok(Self { l })
    }

    /// `sigma^2 I_n`.
    pub fn scaled_identity(n: usize, sigma: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(n, n, sigma * sigma))
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `|L^{-1} r|` for complex `r`.
    pub fn whitened_norm(&self, r: &[C]) -> Result<f64> {
        let n = self.dim();
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: r.len() });
        }
        let mut z = vec![C::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = r[i];
            for j in 0..i {
                s -= z[j] * self.l[(i, j)];
            }
            z[i] = s / self.l[(i, i)];
        }
        Ok(z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
    }
}

/// Misfit `1/2 (delta - g)^H Sigma^{-1} (delta - g)`, or its unsquared variant.
pub fn gaussian_potential(delta: &[C], g: &[C], sigma: &NoiseCovariance, form: MisfitForm) -> Result<f64> {
    if delta.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: delta.len(), found: g.len() });
    }
    let r: Vec<C> = delta.iter().zip(g).map(|(a, b)| a - b).collect();
    let n = sigma.whitened_norm(&r)?;
    Ok(match form {
        MisfitForm::HalfSquared => 0.5 * n * n,
        MisfitForm::Norm => n,
    })
}

/// Synthetic data `delta = G(y*) + eta` with circular complex Gaussian noise.
#[derive(Clone, Debug)]
pub struct ObservationSetup {
    pub truth: Vec<C>,
    pub data: Vec<C>,
    /// Absolute noise level `sigma = sigma_rel * max |G(y*)|`.
    pub sigma: f64,
    pub covariance: NoiseCovariance,
    pub seed: u64,
}

/// Standard circular noise `xi` with `E[xi xi^H] = I`; a fixed seed gives
/// common random numbers across noise levels.
pub fn circular_noise(n: usize, seed: u64) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 0.5f64.sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C::new(s * re, s * im)
        })
        .collect()
}

/// `delta = truth + sigma xi` with `Sigma = sigma^2 I`.
pub fn synthesize_observations(truth: &[C], sigma_rel: f64, seed: u64) -> Result<ObservationSetup> {
    if !(sigma_rel >= 0.0) {
        return Err(Error::Domain(format!("relative noise level {sigma_rel} must be nonnegative")));
    }
    let sigma = sigma_rel * truth.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let xi = circular_noise(truth.len(), seed);
    let data = truth.iter().zip(&xi).map(|(t, x)| t + x * sigma).collect();
    // a vanishing noise level keeps data exact but needs a usable covariance
    let covariance = NoiseCovariance::scaled_identity(truth.len(), if sigma > 0.0 { sigma } else { 1.0 })?;
    Ok(ObservationSetup { truth: truth.to_vec(), data, sigma, covariance, seed })
}

/// Posterior moments of the displacement at surface sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    /// Estimated normalization `Z` relative to `exp(-shift)`.
    pub z_shifted: f64,
    /// Common potential shift; `log Z = ln z_shifted - shift`.
    pub shift: f64,
    pub mean: Vec<[f64; 3]>,
    pub second: Vec<Mat3>,
    pub covariance: Vec<Mat3>,
    /// Kish effective sample size of the likelihood weights on level 0.
    pub ess: f64,
}

impl PosteriorSummary {
    pub fn log_z(&self) -> f64 {
        self.z_shifted.ln() - self.shift
    }

    /// Componentwise variances.
    pub fn variance(&self) -> Vec<[f64; 3]> {
        self.covariance.iter().map(|c| [c[0][0], c[1][1], c[2][2]]).collect()
    }
}

/// Potential closure `(level, y) -> Phi_l(y)`.
pub type Potential<'a> = dyn Fn(usize, &[f64]) -> Result<f64> + Sync + 'a;
/// Quantity closure `y -> chi(., y)` at the surface sample points.
pub type Quantity<'a> = dyn Fn(&[f64]) -> Result<Vec<[f64; 3]>> + Sync + 'a;

struct NodeEval {
    w: f64,
    fine: f64,
    coarse: Option<f64>,
    chi: Vec<[f64; 3]>,
}

/// Ratio estimator `sum_l Q_{L-l}(chi (rho_l - rho_{l-1})) / sum_l Q_{L-l}(rho_l - rho_{l-1})`
/// with `rho_l = exp(-Phi_l)`, shifted by the smallest potential encountered.
pub fn ml_ratio_posterior(hierarchy: &LevelHierarchy, potential: &Potential<'_>, quantity: &Quantity<'_>) -> Result<PosteriorSummary> {
    let mut levels: Vec<Vec<NodeEval>> = Vec::new();
    for level in 0..=hierarchy.max_level() {
        let rule = hierarchy.rule(level);
        let evals = (0..rule.len())
            .into_par_iter()
            .map(|i| {
                let y = rule.node(i);
                let fine = potential(level, y)?;
                let coarse = if level > 0 { Some(potential(level - 1, y)?) } else { None };
                Ok(NodeEval { w: rule.weights()[i], fine, coarse, chi: quantity(y)? })
            })
            .collect::<Result<Vec<_>>>()?;
        levels.push(evals);
    }
    let mut shift = f64::INFINITY;
    for e in levels.iter().flatten() {
        shift = shift.min(e.fine).min(e.coarse.unwrap_or(f64::INFINITY));
    }
    if !shift.is_finite() {
        return Err(Error::Estimator("potentials are not finite".into()));
    }
    let npts = levels[0].first().map_or(0, |e| e.chi.len());
    let mut z = 0.0;
    let mut m1 = vec![[0.0; 3]; npts];
    let mut m2 = vec![[[0.0; 3]; 3]; npts];
    for e in levels.iter().flatten() {
        let rho = (-(e.fine - shift)).exp() - e.coarse.map_or(0.0, |c| (-(c - shift)).exp());
        let a = e.w * rho;
        z += a;
        if e.chi.len() != npts {
            return Err(Error::DimensionMismatch { expected: npts, found: e.chi.len() });
        }
        for (p, x) in e.chi.iter().enumerate() {
            for i in 0..3 {
                m1[p][i] += a * x[i];
                for j in 0..3 {
                    m2[p][i][j] += a * x[i] * x[j];
                }
            }
        }
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Estimator(format!(
            "normalization estimate {z:e} is not positive (shift {shift:.4e}); increase the sample budget"
        )));
    }
    let (s1, s2) = levels[0].iter().fold((0.0, 0.0), |(a, b), e| {
        let r = e.w * (-(e.fine - shift)).exp();
        (a + r, b + r * r)
    });
    let mean: Vec<[f64; 3]> = m1.iter().map(|m| m.map(|v| v / z)).collect();
    let second: Vec<Mat3> = m2.iter().map(|m| m.map(|r| r.map(|v| v / z))).collect();
    let covariance = second
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = s[i][j] - m[i] * m[j];
                }
            }
            c
        })
        .collect();
    Ok(PosteriorSummary { z_shifted: z, shift, mean, second, covariance, ess: s1 * s1 / s2 })
}

/// One row of the surface report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub reference: [f64; 3],
    pub prior_mean: [f64; 3],
    pub posterior_mean: [f64; 3],
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

/// Prior and posterior mean positions with componentwise two-sigma bounds.
pub fn posterior_surface_report(summary: &PosteriorSummary, reference: &[[f64; 3]], prior_mean: &[[f64; 3]]) -> Result<Vec<ReportRow>> {
    if reference.len() != summary.mean.len() || prior_mean.len() != summary.mean.len() {
        return Err(Error::DimensionMismatch { expected: summary.mean.len(), found: reference.len().min(prior_mean.len()) });
    }
    Ok(summary
        .mean
        .iter()
        .zip(summary.variance())
        .enumerate()
        .map(|(p, (m, v))| {
            let x = reference[p];
            let pm = [0, 1, 2].map(|c| x[c] + m[c]);
            let half = v.map(|s| 2.0 * s.max(0.0).sqrt());
            ReportRow {
                reference: x,
                prior_mean: [0, 1, 2].map(|c| x[c] + prior_mean[p][c]),
                posterior_mean: pm,
                lower: [0, 1, 2].map(|c| pm[c] - half[c]),
                upper: [0, 1, 2].map(|c| pm[c] + half[c]),
            }
        })
        .collect())
}

pub fn write_report_csv(rows: &[ReportRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "x,y,z,prior_x,prior_y,prior_z,post_x,post_y,post_z,lo_x,lo_y,lo_z,hi_x,hi_y,hi_z")?;
    for r in rows {
        let v: Vec<String> = [r.reference, r.prior_mean, r.posterior_mean, r.lower, r.upper]
            .iter()
            .flatten()
            .map(|x| format!("{x:.12e}"))
            .collect();
        writeln!(out, "{}", v.join(","))?;
    }
    Ok(())
}

/// Legacy VTK point cloud of the posterior mean with the two-sigma half widths.
pub fn write_report_vtk(rows: &[ReportRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0\nposterior surface\nASCII\nDATASET POLYDATA")?;
    writeln!(out, "POINTS {} double", rows.len())?;
    for r in rows {
        writeln!(out, "{:.12e} {:.12e} {:.12e}", r.posterior_mean[0], r.posterior_mean[1], r.posterior_mean[2])?;
    }
    writeln!(out, "VERTICES {} {}", rows.len(), 2 * rows.len())?;
    for i in 0..rows.len() {
        writeln!(out, "1 {i}")?;
    }
    writeln!(out, "POINT_DATA {}\nVECTORS two_sigma double", rows.len())?;
    for r in rows {
        writeln!(out, "{:.12e} {:.12e} {:.12e}", r.upper[0] - r.posterior_mean[0], r.upper[1] - r.posterior_mean[1], r.upper[2] - r.posterior_mean[2])?;
    }
    writeln!(out, "VECTORS prior_mean double")?;
    for r in rows {
        writeln!(out, "{:.12e} {:.12e} {:.12e}", r.prior_mean[0], r.prior_mean[1], r.prior_mean[2])?;
    }
    Ok(())
}
