use nalgebra::{DMatrix, DVector};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::geometry::io::{read_patches, write_patches};

use super::cholesky::{pivoted_cholesky, LowRankFactor};
use super::kernel::MatrixKernel;
use super::mass::{assemble_mass, CsrMatrix};
use super::space::SplineSpace;

/// Eigenpairs of the discrete covariance problem `C chi = lambda M chi`.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// One coefficient vector per eigenvalue, length `3 * dim`, component-interleaved.
    pub vectors: Vec<Vec<f64>>,
}

/// Applies `M^{-1}` to every column of a component-interleaved matrix.
fn mass_solve(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = chol.l_dirty().nrows();
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for j in 0..b.ncols() {
        for c in 0..3 {
            let rhs = DVector::from_fn(n, |g, _| b[(3 * g + c, j)]);
            let x = chol.solve(&rhs);
            for g in 0..n {
                out[(3 * g + c, j)] = x[g];
            }
        }
    }
    out
}

/// Solves the reduced symmetric eigenproblem `L^T M^{-1} L psi = lambda psi`
/// and recovers `chi = M^{-1} L psi / sqrt(lambda)`, so that `chi^T M chi = 1`.
/// Eigenvalues are returned in descending order; numerically zero ones
/// (below `1e-13` times the largest) are dropped.
pub fn reduced_eig(factor: &LowRankFactor, mass: &CsrMatrix) -> Result<Eigenpairs> {
    let l = &factor.l;
    if l.ncols() == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: vec![] });
    }
    if l.nrows() != 3 * mass.n {
        return Err(Error::DimensionMismatch { expected: 3 * mass.n, found: l.nrows() });
    }
    let chol = mass.to_dense().cholesky().ok_or_else(|| Error::NotSpd("mass matrix".into()))?;
    let ml = mass_solve(&chol, l);
    let mut s = l.transpose() * &ml;
    s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for &k in &order {
        let lam = eig.eigenvalues[k];
        if !(lam > 1e-13 * top) {
            break;
        }
        let psi = eig.eigenvectors.column(k);
        let chi = (&ml * psi) / lam.sqrt();
        values.push(lam);
        vectors.push(chi.iter().copied().collect());
    }
    Ok(Eigenpairs { values, vectors })
}

/// Smallest number of leading eigenvalues whose sum reaches `trace_frac` of the total.
pub fn truncation_rank(values: &[f64], trace_frac: f64) -> usize {
    let total: f64 = values.iter().sum();
    if trace_frac >= 1.0 {
        return values.len();
    }
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        acc += v;
        if acc >= trace_frac * total {
            return k + 1;
        }
    }
    values.len()
}

/// Truncated Karhunen-Loeve expansion of a vector-valued surface deformation.
#[derive(Clone, Debug)]
pub struct KlExpansion {
    pub space: SplineSpace,
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// Mean deformation coefficients, length `3 * dim`.
    pub mean: Vec<f64>,
}

/// Keeps the leading modes carrying `trace_frac` of the total variance, at
/// most `max_modes` of them.
pub fn truncate(space: &SplineSpace, pairs: &Eigenpairs, trace_frac: f64, max_modes: Option<usize>) -> Result<KlExpansion> {
    if !(trace_frac > 0.0 && trace_frac <= 1.0) {
        return Err(Error::Domain(format!("trace fraction {trace_frac} outside (0, 1]")));
    }
    let mut m = truncation_rank(&pairs.values, trace_frac);
    if let Some(cap) = max_modes {
        m = m.min(cap);
    }
    Ok(KlExpansion {
        space: space.clone(),
        eigenvalues: pairs.values[..m].to_vec(),
        modes: pairs.vectors[..m].to_vec(),
        mean: vec![0.0; 3 * space.dim()],
    })
}

/// Settings of the surface Karhunen-Loeve computation.
#[derive(Clone, Debug)]
pub struct KlSettings {
    pub degree: usize,
    pub level: usize,
    pub cholesky_tol: f64,
    pub trace_frac: f64,
    pub max_modes: Option<usize>,
}

impl Default for KlSettings {
    fn default() -> Self {
        Self { degree: 2, level: 0, cholesky_tol: 1e-10, trace_frac: 0.99, max_modes: None }
    }
}

/// Full chain: continuous space, mass matrix, pivoted Cholesky, reduced
/// eigenproblem and truncation.
pub fn compute_kl(
    surface: &crate::geometry::MultipatchSurface<f64>,
    kernel: &MatrixKernel,
    settings: &KlSettings,
) -> Result<KlExpansion> {
    let space = SplineSpace::new(surface, settings.degree, settings.level, true)?;
    let mass = assemble_mass(&space, settings.degree + 2)?;
    let factor = pivoted_cholesky(kernel, &space, settings.cholesky_tol)?;
    let pairs = reduced_eig(&factor, &mass)?;
    truncate(&space, &pairs, settings.trace_frac, settings.max_modes)
}

impl KlExpansion {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Displacement coefficients `mean + sum_k sqrt(lambda_k) y_k chi_k`.
    pub fn coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), found: y.len() });
        }
        let mut c = self.mean.clone();
        for ((lam, chi), &yk) in self.eigenvalues.iter().zip(&self.modes).zip(y) {
            let s = lam.sqrt() * yk;
            for (ci, xi) in c.iter_mut().zip(chi) {
                *ci += s * xi;
            }
        }
        Ok(c)
    }

    /// Displacement at a parameter point of a patch for coefficient vector `coeffs`.
    pub fn displacement(&self, coeffs: &[f64], patch: usize, u: f64, v: f64) -> [f64; 3] {
        let (mut idx, mut val) = (Vec::new(), Vec::new());
        self.space.eval_local(patch, u, v, &mut idx, &mut val);
        let mut d = [0.0; 3];
        for (i, b) in idx.iter().zip(&val) {
            let g = self.space.global_index(*i);
            for c in 0..3 {
                d[c] += b * coeffs[3 * g + c];
            }
        }
        d
    }
}

impl KlExpansion {
    /// Snapshot with the geometry as patch-file text in the header and the
    /// modes stored row-major, one mode per row.
    pub fn to_container(&self) -> Result<Container> {
        let header = serde_json::json!({
            "degree": self.space.degree(),
            "level": self.space.level(),
            "continuous": self.space.is_continuous(),
            "rank": self.rank(),
            "dim": self.space.dim(),
            "geometry": write_patches(self.space.surface())?,
        });
        let mut c = Container::new("kl-expansion", header);
        c.push("eigenvalues", self.eigenvalues.clone());
        c.push("modes", self.modes.concat());
        c.push("mean", self.mean.clone());
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "kl-expansion" {
            return Err(Error::Format(format!("expected a kl-expansion container, found '{}'", c.kind)));
        }
        let h = &c.header;
        let field = |k: &str| h.get(k).ok_or_else(|| Error::Format(format!("header lacks '{k}'")));
        let num = |k: &str| field(k).and_then(|v| v.as_u64().map(|x| x as usize).ok_or_else(|| Error::Format(format!("'{k}' is not an integer"))));
        let geometry = field("geometry")?.as_str().ok_or_else(|| Error::Format("geometry is not a string".into()))?;
        let continuous = field("continuous")?.as_bool().unwrap_or(true);
        let surface = read_patches::<f64>(geometry)?;
        let space = SplineSpace::new(&surface, num("degree")?, num("level")?, continuous)?;
        let (rank, n) = (num("rank")?, 3 * space.dim());
        let eigenvalues = c.array("eigenvalues")?.to_vec();
        let modes = c.array("modes")?;
        let mean = c.array("mean")?.to_vec();
        if eigenvalues.len() != rank || modes.len() != rank * n || mean.len() != n {
            return Err(Error::Format("kl-expansion arrays do not match the header".into()));
        }
        Ok(Self { space, eigenvalues, modes: modes.chunks(n.max(1)).take(rank).map(|m| m.to_vec()).collect(), mean })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin;
    use crate::randomfield::cholesky::pivoted_cholesky_with;
    use crate::randomfield::kernel::gaussian_kernel;

    #[test]
    fn cumulative_truncation() {
        assert_eq!(truncation_rank(&[4.0, 2.0, 1.0, 1.0], 0.75), 2);
        assert_eq!(truncation_rank(&[4.0, 2.0, 1.0, 1.0], 1.0), 4);
    }

    #[test]
    fn covariance_equal_to_mass_gives_unit_spectrum() {
        let space = SplineSpace::new(&builtin::cube::<f64>(), 1, 0, true).unwrap();
        let mass = assemble_mass(&space, 3).unwrap();
        // vector mass matrix M (x) I_3 and its Cholesky factor as L
        let m = mass.to_dense();
        let n = m.nrows();
        let big = DMatrix::from_fn(3 * n, 3 * n, |i, j| if i % 3 == j % 3 { m[(i / 3, j / 3)] } else { 0.0 });
        let f = pivoted_cholesky_with(3 * n, (0..3 * n).map(|i| big[(i, i)]).collect(), |j| big.column(j).iter().copied().collect(), 1e-15).unwrap();
        let pairs = reduced_eig(&f, &mass).unwrap();
        assert_eq!(pairs.values.len(), 3 * n);
        for v in &pairs.values {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn modes_are_mass_orthonormal_and_sorted() {
        let cube = builtin::cube::<f64>();
        let kl = compute_kl(&cube, &gaussian_kernel(0.05, 4.0), &KlSettings { level: 1, ..KlSettings::default() }).unwrap();
        assert!(kl.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let mass = assemble_mass(&kl.space, 4).unwrap();
        for (j, a) in kl.modes.iter().enumerate() {
            for (k, b) in kl.modes.iter().enumerate() {
                let mut s = 0.0;
                for c in 0..3 {
                    let ac: Vec<f64> = (0..mass.n).map(|g| a[3 * g + c]).collect();
                    let bc: Vec<f64> = (0..mass.n).map(|g| b[3 * g + c]).collect();
                    s += mass.matvec(&ac).iter().zip(&bc).map(|(x, y)| x * y).sum::<f64>();
                }
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-8, "{j} {k} {s}");
            }
        }
    }

    #[test]
    fn empty_factor_gives_empty_expansion() {
        let space = SplineSpace::new(&builtin::cube::<f64>(), 1, 0, true).unwrap();
        let mass = assemble_mass(&space, 3).unwrap();
        let f = LowRankFactor { l: DMatrix::zeros(3 * space.dim(), 0), trace: 0.0, residuals: vec![] };
        assert!(reduced_eig(&f, &mass).unwrap().values.is_empty());
    }

    #[test]
    fn container_round_trip() {
        let kl = compute_kl(&builtin::sphere::<f64>(2), &gaussian_kernel(0.05, 4.0), &KlSettings { max_modes: Some(5), ..KlSettings::default() }).unwrap();
        let c = Container::from_bytes(&kl.to_container().unwrap().to_bytes()).unwrap();
        let back = KlExpansion::from_container(&c).unwrap();
        assert_eq!(back.eigenvalues, kl.eigenvalues);
        assert_eq!(back.modes, kl.modes);
        assert_eq!(back.space.dim(), kl.space.dim());
        let y = [0.3, -0.1, 0.5, 0.9, -1.0];
        let (a, b) = (kl.coefficients(&y).unwrap(), back.coefficients(&y).unwrap());
        assert_eq!(a, b);
        assert_eq!(back.displacement(&b, 3, 0.2, 0.6), kl.displacement(&a, 3, 0.2, 0.6));
    }
}
