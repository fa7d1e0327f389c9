use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::gauss::gauss_legendre;
use super::rule::{QuadratureRule, RuleKind};

/// Positive, nondecreasing per-dimension costs of the anisotropic index set.
#[derive(Clone, Debug, PartialEq)]
pub struct AnisotropyWeights<T> {
    gamma: Vec<T>,
}

impl<T: Real> AnisotropyWeights<T> {
    pub fn new(gamma: Vec<T>) -> Result<Self> {
        if gamma.iter().any(|&g| !(g > T::zero())) {
            return Err(Error::Domain("anisotropy weights must be positive".into()));
        }
        if gamma.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("anisotropy weights must be nondecreasing".into()));
        }
        Ok(Self { gamma })
    }

    pub fn isotropic(m: usize) -> Self {
        Self { gamma: vec![T::one(); m] }
    }

    /// `gamma_k = max(1, log2(lambda_1 / lambda_k) / 2)` for descending eigenvalues.
    pub fn from_eigenvalues(lambda: &[T]) -> Self {
        let l1 = lambda.first().copied().unwrap_or(T::one());
        let mut gamma: Vec<T> = lambda
            .iter()
            .map(|&l| {
                let g = if l > T::zero() { (l1 / l).log2() * T::c(0.5) } else { T::c(64.0) };
                g.max(T::one())
            })
            .collect();
        for k in 1..gamma.len() {
            gamma[k] = gamma[k].max(gamma[k - 1]);
        }
        Self { gamma }
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Number of Gauss-Legendre points of the 1D rule at index `j`: `max(1, 2^j - 1)`.
pub fn level_points(j: usize) -> usize {
    ((1usize << j) - 1).max(1)
}

/// Multi-indices `k` with `sum gamma_i k_i <= q`, in lexicographic order.
pub fn index_set<T: Real>(q: T, weights: &AnisotropyWeights<T>) -> Vec<Vec<usize>> {
    fn rec<T: Real>(d: usize, budget: T, g: &[T], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == g.len() {
            out.push(cur.clone());
            return;
        }
        let mut k = 0usize;
        let tol = T::c(1e-12);
        loop {
            let cost = g[d] * T::from_usize_(k);
            if cost > budget + tol {
                break;
            }
            cur.push(k);
            rec(d + 1, budget - cost, g, cur, out);
            cur.pop();
            k += 1;
        }
    }
    let mut out = Vec::new();
    if q + T::c(1e-12) >= T::zero() {
        rec(0, q, weights.gamma(), &mut Vec::new(), &mut out);
    }
    out
}

/// Anisotropic Smolyak rule of level `q` built from the Gauss-Legendre
/// sequence [`level_points`] with combination coefficients
/// `c_k = sum_{e in {0,1}^M, k+e in I} (-1)^|e|`. Coincident nodes are merged.
pub fn sparse_grid<T: Real>(q: T, weights: &AnisotropyWeights<T>) -> Result<QuadratureRule<T>> {
    let m = weights.dim();
    let set = index_set(q, weights);
    if set.is_empty() {
        return Err(Error::Domain("sparse grid index set is empty".into()));
    }
    let members: std::collections::HashSet<Vec<usize>> = set.iter().cloned().collect();
    let max_j = set.iter().flat_map(|k| k.iter().copied()).max().unwrap_or(0);
    let rules: Vec<(Vec<T>, Vec<T>)> = (0..=max_j).map(|j| gauss_legendre::<T>(level_points(j))).collect();
    let mut acc: BTreeMap<Vec<u64>, (Vec<T>, T)> = BTreeMap::new();
    for k in &set {
        let c = combination_coefficient(k, &members);
        if c == 0 {
            continue;
        }
        let cf = T::c(c as f64);
        let sizes: Vec<usize> = k.iter().map(|&j| rules[j].0.len()).collect();
        let total: usize = sizes.iter().product();
        for mut idx in 0..total {
            let mut node = vec![T::zero(); m];
            let mut w = cf;
            for d in (0..m).rev() {
                let i = idx % sizes[d];
                idx /= sizes[d];
                let (x, wt) = (&rules[k[d]].0, &rules[k[d]].1);
                node[d] = x[i] + T::zero();
                w = w * wt[i];
            }
            let key: Vec<u64> = node.iter().map(|x| sortable_bits(x.to_f64_())).collect();
            let e = acc.entry(key).or_insert_with(|| (node, T::zero()));
            e.1 = e.1 + w;
        }
    }
    let mut nodes = Vec::with_capacity(acc.len() * m);
    let mut wts = Vec::with_capacity(acc.len());
    for (_, (x, w)) in acc {
        if w != T::zero() {
            nodes.extend(x);
            wts.push(w);
        }
    }
    Ok(QuadratureRule::new(m, nodes, wts, RuleKind::SparseGrid))
}

/// Bit pattern whose unsigned order matches the numeric order of `x`.
fn sortable_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn combination_coefficient(k: &[usize], members: &std::collections::HashSet<Vec<usize>>) -> i64 {
    fn rec(d: usize, cur: &mut Vec<usize>, sign: i64, members: &std::collections::HashSet<Vec<usize>>) -> i64 {
        if d == cur.len() {
            return sign;
        }
        let mut s = rec(d + 1, cur, sign, members);
        cur[d] += 1;
        if members.contains(cur.as_slice()) {
            s += rec(d + 1, cur, -sign, members);
        }
        cur[d] -= 1;
        s
    }
    let mut cur = k.to_vec();
    rec(0, &mut cur, 1, members)
}
