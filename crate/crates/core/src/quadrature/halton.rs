use crate::scalar::Real;

use super::rule::{QuadratureRule, RuleKind};

/// The first `m` primes.
pub fn primes(m: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(m);
    let mut c = 2u64;
    while out.len() < m {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points with indices `skip + 1 ..= skip + n` mapped to `[-1, 1]^m`,
/// equal weights `1 / n`.
pub fn halton_rule_offset<T: Real>(n: usize, m: usize, skip: u64) -> QuadratureRule<T> {
    let bases = primes(m);
    let mut nodes = Vec::with_capacity(n * m);
    for i in 1..=n as u64 {
        for &b in &bases {
            nodes.push(T::c(2.0 * radical_inverse(skip + i, b) - 1.0));
        }
    }
    let w = T::one() / T::from_usize_(n);
    QuadratureRule::new(m, nodes, vec![w; n], RuleKind::Qmc)
}

/// Unscrambled Halton rule skipping index zero.
pub fn halton_rule<T: Real>(n: usize, m: usize) -> QuadratureRule<T> {
    halton_rule_offset(n, m, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let r = halton_rule::<f64>(1, 2);
        assert_eq!(r.node(0)[0], 0.0);
        assert!((r.node(0)[1] + 1.0 / 3.0).abs() < 1e-15);
        let r = halton_rule::<f64>(3, 1);
        let raw: Vec<f64> = (0..3).map(|i| 0.5 * (r.node(i)[0] + 1.0)).collect();
        assert_eq!(raw, vec![0.5, 0.25, 0.75]);
        assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn primes_are_primes() {
        assert_eq!(primes(8), vec![2, 3, 5, 7, 11, 13, 17, 19]);
    }

    #[test]
    fn offset_is_a_tail() {
        let a = halton_rule::<f64>(10, 3);
        let b = halton_rule_offset::<f64>(4, 3, 6);
        for i in 0..4 {
            assert_eq!(a.node(6 + i), b.node(i));
        }
    }

    #[test]
    fn cosine_product_converges() {
        // E[prod cos(y_k)] over U(-1,1)^m is sin(1)^m
        let m = 3;
        let exact = 1f64.sin().powi(m as i32);
        let mut errs = Vec::new();
        for e in [6, 10, 14] {
            let n = 1usize << e;
            let r = halton_rule::<f64>(n, m);
            let v = r.integrate(|y| y.iter().map(|x| x.cos()).product::<f64>());
            errs.push((n as f64, (v - exact).abs()));
        }
        let rate = (errs[0].1 / errs[2].1).ln() / (errs[2].0 / errs[0].0).ln();
        assert!(rate > 0.8, "empirical rate {rate}");
    }
}
