use std::io::Write;

use crate::error::Result;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Qmc,
    SparseGrid,
    Tensor,
}

/// Weighted point set on `[-1, 1]^dim` for the uniform probability measure.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    dim: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
    kind: RuleKind,
}

impl<T: Real> QuadratureRule<T> {
    /// `nodes` is row-major `weights.len() x dim`.
    pub fn new(dim: usize, nodes: Vec<T>, weights: Vec<T>, kind: RuleKind) -> Self {
        assert_eq!(nodes.len(), dim * weights.len(), "node array does not match weights");
        Self { dim, nodes, weights, kind }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn node(&self, i: usize) -> &[T] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        (0..self.len()).map(move |i| (self.node(i), self.weights[i]))
    }

    /// Sequential weighted sum in node order.
    pub fn integrate(&self, f: impl Fn(&[T]) -> T) -> T {
        self.iter().fold(T::zero(), |acc, (y, w)| acc + w * f(y))
    }

    /// Writes `y0,...,y{dim-1},weight` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("y{k}")).chain(["weight".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (y, w) in self.iter() {
            let row: Vec<String> = y.iter().chain([&w]).map(|v| format!("{:e}", v.to_f64_())).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Full tensor product of the `n`-point Gauss-Legendre rule in `dim` dimensions.
pub fn tensor_gauss<T: Real>(n: usize, dim: usize) -> QuadratureRule<T> {
    let (x, w) = super::gauss::gauss_legendre::<T>(n);
    let total = n.pow(dim as u32);
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut wt = T::one();
        let start = nodes.len();
        nodes.resize(start + dim, T::zero());
        for d in (0..dim).rev() {
            let i = idx % n;
            idx /= n;
            nodes[start + d] = x[i];
            wt = wt * w[i];
        }
        weights.push(wt);
    }
    QuadratureRule::new(dim, nodes, weights, RuleKind::Tensor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rule_integrates_products() {
        let r = tensor_gauss::<f64>(2, 3);
        assert_eq!(r.len(), 8);
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
        let v = r.integrate(|y| y[0] * y[0] * y[1] * y[1] * (1.0 + y[2]));
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let r = tensor_gauss::<f64>(1, 2);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "y0,y1,weight");
        assert_eq!(s.lines().count(), 2);
    }
}
