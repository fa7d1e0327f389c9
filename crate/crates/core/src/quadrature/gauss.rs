use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]` for the Lebesgue measure,
/// computed in double precision by Newton iteration on `P_n`.
pub fn gauss_legendre_raw(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule on `[-1, 1]` normalized to the uniform probability
/// measure (weights sum to one).
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre_raw(n);
    (x.into_iter().map(T::c).collect(), w.into_iter().map(|w| T::c(0.5 * w)).collect())
}

/// Gauss-Legendre rule on `[0, 1]` with weights summing to one.
pub fn gauss_legendre_unit<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre_raw(n);
    (
        x.into_iter().map(|x| T::c(0.5 * (x + 1.0))).collect(),
        w.into_iter().map(|w| T::c(0.5 * w)).collect(),
    )
}
