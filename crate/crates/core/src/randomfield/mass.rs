use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::space::SplineSpace;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(n: usize, rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.indptr[i]..self.indptr[i + 1]).map(|k| self.values[k] * x[self.indices[k]]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.values[k];
            }
        }
        m
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Galerkin mass matrix `M_ij = int_S phi_i phi_j` of the global basis, by
/// tensor Gauss quadrature of the given order on every integration cell.
pub fn assemble_mass(space: &SplineSpace, order: usize) -> Result<CsrMatrix> {
    if order < space.degree() + 1 {
        return Err(Error::Domain(format!(
            "mass quadrature order {order} below degree + 1 = {}",
            space.degree() + 1
        )));
    }
    let q = space.quadrature(order)?;
    let n = space.dim();
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for k in 0..q.len() {
        let (b, l) = (&q.basis[k * q.nb..(k + 1) * q.nb], &q.local[k * q.nb..(k + 1) * q.nb]);
        for a in 0..q.nb {
            let ga = space.global_index(l[a]);
            let fa = q.w[k] * b[a];
            for c in 0..q.nb {
                *rows[ga].entry(space.global_index(l[c])).or_insert(0.0) += fa * b[c];
            }
        }
    }
    let m = CsrMatrix::from_rows(n, rows);
    if m.to_dense().cholesky().is_none() {
        return Err(Error::NotSpd("mass matrix (degenerate patch?)".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin, KnotVector, MultipatchSurface, NurbsPatch};

    fn unit_square() -> MultipatchSurface<f64> {
        let k = KnotVector::uniform(1, 1);
        let p = NurbsPatch::bspline(
            k.clone(),
            k,
            vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
        )
        .unwrap();
        MultipatchSurface::new(vec![p]).unwrap()
    }

    #[test]
    fn piecewise_constants_on_square() {
        let s = SplineSpace::new(&unit_square(), 0, 1, false).unwrap();
        let m = assemble_mass(&s, 1).unwrap();
        assert_eq!(m.n, 4);
        assert_eq!(m.nnz(), 4);
        for i in 0..4 {
            assert!((m.get(i, i) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn cube_total_is_area_and_matrix_is_symmetric() {
        let s = SplineSpace::new(&builtin::cube::<f64>(), 2, 1, true).unwrap();
        let m = assemble_mass(&s, 4).unwrap();
        assert!((m.total() - 6.0).abs() < 1e-10);
        let d = m.to_dense();
        assert!((&d - d.transpose()).amax() < 1e-15);
        assert!(d.cholesky().is_some());
    }

    #[test]
    fn order_too_low_is_rejected() {
        let s = SplineSpace::new(&builtin::cube::<f64>(), 2, 0, true).unwrap();
        assert!(assemble_mass(&s, 2).is_err());
    }
}
