//! Multilevel telescoping quadrature over a hierarchy of spatial levels.
//!
//! The difference `rho_l - rho_{l-1}` of a level-dependent model is integrated
//! with the rule `Q_{L-l}`; both terms are evaluated at the same parameter
//! nodes. Nodes are evaluated in parallel and accumulated in node order, so
//! results do not depend on the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{halton_rule_offset, sparse_grid, AnisotropyWeights, QuadratureRule};

type C = Complex64;

/// Model closure `(level, y) -> values`.
pub type Model<'a> = dyn Fn(usize, &[f64]) -> Result<Vec<C>> + Sync + 'a;

/// `N_l = max(2^(a - r l), N_min)` for `l = 0..=levels`.
pub fn allocate_samples(a: u32, r: u32, n_min: u64, levels: usize) -> Result<Vec<u64>> {
    if r < 1 || n_min < 1 {
        return Err(Error::Domain("sample allocation needs r >= 1 and N_min >= 1".into()));
    }
    if a > 31 {
        return Err(Error::Overflow(a));
    }
    if n_min > 1 << 31 {
        return Err(Error::Overflow(64 - n_min.leading_zeros()));
    }
    Ok((0..=levels as u64)
        .map(|l| {
            let e = a as i64 - (r as u64 * l) as i64;
            let n = if e >= 0 { 1u64 << e } else { 0 };
            n.max(n_min)
        })
        .collect())
}

/// Rules per level: `rules[l]` integrates the difference on level `l`.
#[derive(Clone, Debug)]
pub struct LevelHierarchy {
    rules: Vec<QuadratureRule<f64>>,
}

impl LevelHierarchy {
    pub fn from_rules(rules: Vec<QuadratureRule<f64>>) -> Result<Self> {
        let dim = rules.first().ok_or_else(|| Error::Domain("hierarchy needs at least one level".into()))?.dim();
        if rules.iter().any(|r| r.dim() != dim) {
            return Err(Error::Domain("all level rules must share the parameter dimension".into()));
        }
        Ok(Self { rules })
    }

    /// Halton rules with `N_l` points from [`allocate_samples`]; level `l`
    /// uses point indices `block * N_l + 1 ..= (block + 1) * N_l`.
    pub fn qmc(dim: usize, max_level: usize, a: u32, r: u32, n_min: u64, block: u64) -> Result<Self> {
        let counts = allocate_samples(a, r, n_min, max_level)?;
        Self::from_rules(counts.iter().map(|&n| halton_rule_offset(n as usize, dim, block * n)).collect())
    }

    /// Sparse grids of level `base + step * (L - l)` on level `l`.
    pub fn sparse(max_level: usize, base: f64, step: f64, weights: &AnisotropyWeights<f64>) -> Result<Self> {
        let rules = (0..=max_level)
            .map(|l| sparse_grid(base + step * (max_level - l) as f64, weights))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rules(rules)
    }

    pub fn max_level(&self) -> usize {
        self.rules.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.rules[0].dim()
    }

    pub fn rule(&self, level: usize) -> &QuadratureRule<f64> {
        &self.rules[level]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.rules.iter().map(|r| r.len()).collect()
    }
}

/// Multilevel estimate with the addend of every level difference.
#[derive(Clone, Debug, PartialEq)]
pub struct MlEstimate {
    pub total: Vec<C>,
    pub contributions: Vec<Vec<C>>,
}

/// Multilevel estimate of a second moment, dense row-major `dim x dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlSecondMoment {
    pub dim: usize,
    pub total: Vec<C>,
    pub contributions: Vec<Vec<C>>,
}

fn tag(e: Error, level: usize, y: &[f64]) -> Error {
    match e {
        Error::SampleRejected(m) => Error::SampleRejected(format!("level {level}, y = {y:?}: {m}")),
        other => other,
    }
}

/// Coupled evaluations of one level stream: `(rho_l(y), rho_{l-1}(y))`.
fn coupled(model: &Model<'_>, level: usize, rule: &QuadratureRule<f64>, range: std::ops::Range<usize>) -> Result<Vec<(Vec<C>, Option<Vec<C>>)>> {
    range
        .into_par_iter()
        .map(|i| {
            let y = rule.node(i);
            let fine = model(level, y).map_err(|e| tag(e, level, y))?;
            let coarse = if level > 0 { Some(model(level - 1, y).map_err(|e| tag(e, level - 1, y))?) } else { None };
            if coarse.as_ref().is_some_and(|c| c.len() != fine.len()) {
                return Err(Error::DimensionMismatch { expected: fine.len(), found: coarse.map_or(0, |c| c.len()) });
            }
            Ok((fine, coarse))
        })
        .collect()
}

const CHUNK: usize = 64;

/// Mean and optionally second moment in one sweep over all levels.
pub fn ml_estimate(
    hierarchy: &LevelHierarchy,
    model: &Model<'_>,
    second: bool,
) -> Result<(MlEstimate, Option<MlSecondMoment>)> {
    let mut mean: Option<MlEstimate> = None;
    let mut mom: Option<MlSecondMoment> = None;
    for level in 0..=hierarchy.max_level() {
        let rule = hierarchy.rule(level);
        let mut c1: Vec<C> = Vec::new();
        let mut c2: Vec<C> = Vec::new();
        let mut start = 0;
        while start < rule.len() {
            let end = (start + CHUNK).min(rule.len());
            let vals = coupled(model, level, rule, start..end)?;
            for (k, (fine, coarse)) in vals.iter().enumerate() {
                let w = rule.weights()[start + k];
                let n = fine.len();
                if c1.is_empty() {
                    c1 = vec![C::new(0.0, 0.0); n];
                    if second {
                        c2 = vec![C::new(0.0, 0.0); n * n];
                    }
                } else if c1.len() != n {
                    return Err(Error::DimensionMismatch { expected: c1.len(), found: n });
                }
                for (i, f) in fine.iter().enumerate() {
                    c1[i] += f * w - coarse.as_ref().map_or(C::new(0.0, 0.0), |c| c[i] * w);
                }
                if second {
                    for i in 0..n {
                        let row = &mut c2[i * n..(i + 1) * n];
                        let a = fine[i] * w;
                        for (r, b) in row.iter_mut().zip(fine) {
                            *r += a * b.conj();
                        }
                        if let Some(c) = coarse {
                            let a = c[i] * w;
                            for (r, b) in row.iter_mut().zip(c) {
                                *r -= a * b.conj();
                            }
                        }
                    }
                }
            }
            start = end;
        }
        let m = mean.get_or_insert_with(|| MlEstimate { total: vec![C::new(0.0, 0.0); c1.len()], contributions: vec![] });
        if m.total.len() != c1.len() {
            return Err(Error::DimensionMismatch { expected: m.total.len(), found: c1.len() });
        }
        for (t, c) in m.total.iter_mut().zip(&c1) {
            *t += c;
        }
        m.contributions.push(c1);
        if second {
            let s = mom.get_or_insert_with(|| MlSecondMoment {
                dim: m.total.len(),
                total: vec![C::new(0.0, 0.0); c2.len()],
                contributions: vec![],
            });
            for (t, c) in s.total.iter_mut().zip(&c2) {
                *t += c;
            }
            s.contributions.push(c2);
        }
    }
    Ok((mean.expect("hierarchy has at least one level"), mom))
}

/// `sum_l Q_{L-l}(rho_l - rho_{l-1})` with `rho_{-1} = 0`.
pub fn ml_mean(hierarchy: &LevelHierarchy, model: &Model<'_>) -> Result<MlEstimate> {
    Ok(ml_estimate(hierarchy, model, false)?.0)
}

/// `sum_l Q_{L-l}(rho_l rho_l^H - rho_{l-1} rho_{l-1}^H)`.
pub fn ml_second_moment(hierarchy: &LevelHierarchy, model: &Model<'_>) -> Result<MlSecondMoment> {
    Ok(ml_estimate(hierarchy, model, true)?.1.expect("second moment requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{halton_rule, tensor_gauss};

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn allocation() {
        assert_eq!(allocate_samples(21, 6, 256, 3).unwrap(), vec![2_097_152, 32_768, 512, 256]);
        assert_eq!(allocate_samples(10, 6, 4, 2).unwrap(), vec![1024, 16, 4]);
        assert_eq!(allocate_samples(7, 3, 1, 0).unwrap(), vec![128]);
        assert!(matches!(allocate_samples(32, 6, 1, 1), Err(Error::Overflow(32))));
        assert!(allocate_samples(5, 0, 1, 1).is_err());
    }

    #[test]
    fn level_independent_model_collapses() {
        let rule = halton_rule::<f64>(37, 2);
        let h = LevelHierarchy::from_rules(vec![rule.clone(), rule.clone(), rule.clone()]).unwrap();
        let model = |_: usize, y: &[f64]| Ok(vec![c(y[0] * y[1] + 1.0), C::new(y[0], y[1].powi(2))]);
        let (est, mom) = ml_estimate(&h, &model, true).unwrap();
        let (plain, plain2) = ml_estimate(&LevelHierarchy::from_rules(vec![rule]).unwrap(), &model, true).unwrap();
        assert_eq!(est.total, plain.total);
        assert!(est.contributions[1..].iter().flatten().all(|z| *z == C::new(0.0, 0.0)));
        assert_eq!(mom.unwrap().total, plain2.unwrap().total);
    }

    #[test]
    fn linear_toy_model_has_zero_mean() {
        let g = tensor_gauss::<f64>(2, 1);
        let h = LevelHierarchy::from_rules(vec![g.clone(), g.clone(), g]).unwrap();
        let model = |l: usize, y: &[f64]| Ok(vec![c((1.0 - 0.5f64.powi(l as i32)) * y[0])]);
        let est = ml_mean(&h, &model).unwrap();
        assert!(est.total[0].norm() < 1e-15);
    }

    #[test]
    fn hand_telescoped_second_moment() {
        // two levels, two-point rule, scalar model
        let g = tensor_gauss::<f64>(2, 1);
        let h = LevelHierarchy::from_rules(vec![g.clone(), g.clone()]).unwrap();
        let f = |l: usize, y: f64| C::new(1.0 + y + l as f64 * y * y, 0.5 * l as f64);
        let model = move |l: usize, y: &[f64]| Ok(vec![f(l, y[0])]);
        let mom = ml_second_moment(&h, &model).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let mut hand = C::new(0.0, 0.0);
        for y in [-s, s] {
            hand += f(0, y).norm_sqr() * 0.5;
            hand += (f(1, y).norm_sqr() - f(0, y).norm_sqr()) * 0.5;
        }
        assert!((mom.total[0] - hand).norm() < 1e-14);
        let sum: C = mom.contributions.iter().map(|c| c[0]).sum();
        assert!((sum - mom.total[0]).norm() < 1e-15);
    }

    #[test]
    fn qmc_hierarchy_and_rejection_context() {
        let h = LevelHierarchy::qmc(3, 2, 6, 2, 3, 1).unwrap();
        assert_eq!(h.counts(), vec![64, 16, 4]);
        let first = h.rule(1).node(0)[0];
        assert_eq!(first, halton_rule_offset::<f64>(17, 3, 0).node(16)[0]);
        let model = |l: usize, y: &[f64]| {
            if l == 1 && y[0] > 0.0 {
                Err(Error::SampleRejected("folded".into()))
            } else {
                Ok(vec![c(y[0])])
            }
        };
        match ml_mean(&h, &model) {
            Err(Error::SampleRejected(m)) => assert!(m.starts_with("level 1, y = [")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_sample_second_moment_is_outer_product() {
        let rule = QuadratureRule::new(1, vec![0.3], vec![1.0], crate::quadrature::RuleKind::Tensor);
        let h = LevelHierarchy::from_rules(vec![rule]).unwrap();
        let v = [C::new(1.0, 2.0), C::new(-0.5, 0.25)];
        let model = move |_: usize, _: &[f64]| Ok(v.to_vec());
        let mom = ml_second_moment(&h, &model).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(mom.total[i * 2 + j], v[i] * v[j].conj());
            }
        }
    }
}
