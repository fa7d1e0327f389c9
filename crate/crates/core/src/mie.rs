//! Series solution for plane-wave scattering by a sound-soft sphere.

use num_complex::Complex64;

/// Spherical Bessel functions `j_0..j_n` at `z > 0` by downward recurrence
/// normalized against `j_0 = sin z / z`.
pub fn spherical_j(n: usize, z: f64) -> Vec<f64> {
    let start = n + 20 + (z.abs() as usize) * 2;
    let mut out = vec![0.0; n + 1];
    let (mut jp1, mut j) = (0.0, 1e-300);
    for k in (0..=start).rev() {
        let jm1 = (2 * k + 1) as f64 / z * j - jp1;
        if k <= n {
            out[k] = j;
        }
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            let s = 1e-250;
            j *= s;
            jp1 *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let scale = (z.sin() / z) / out[0];
    if !scale.is_finite() || out[0] == 0.0 {
        // j_0 vanishes: normalize with j_1 instead
        let scale = (z.sin() / (z * z) - z.cos() / z) / out[1];
        return out.into_iter().map(|v| v * scale).collect();
    }
    out.into_iter().map(|v| v * scale).collect()
}

/// Spherical Neumann functions `y_0..y_n` by upward recurrence.
pub fn spherical_y(n: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(-z.cos() / z);
    if n >= 1 {
        out.push(-z.cos() / (z * z) - z.sin() / z);
    }
    for k in 1..n {
        let next = (2 * k + 1) as f64 / z * out[k] - out[k - 1];
        out.push(next);
    }
    out
}

/// Spherical Hankel functions of the first kind `h_n = j_n + i y_n`.
pub fn spherical_h(n: usize, z: f64) -> Vec<Complex64> {
    spherical_j(n, z).into_iter().zip(spherical_y(n, z)).map(|(j, y)| Complex64::new(j, y)).collect()
}

/// Legendre polynomials `P_0..P_n` at `t`.
pub fn legendre(n: usize, t: f64) -> Vec<f64> {
    let mut p = vec![1.0; n + 1];
    if n >= 1 {
        p[1] = t;
    }
    for k in 1..n {
        p[k + 1] = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

/// Scattered field of `exp(i kappa <d, x>)` by the sound-soft sphere of
/// radius `a` centred at the origin, together with its radial derivative.
#[derive(Clone, Debug)]
pub struct SoundSoftSphere {
    pub kappa: f64,
    pub radius: f64,
    pub direction: [f64; 3],
    /// Series coefficients `-i^n (2n+1) j_n(ka) / h_n(ka)`.
    coeffs: Vec<Complex64>,
}

impl SoundSoftSphere {
    pub fn new(kappa: f64, radius: f64, direction: [f64; 3]) -> Self {
        let ka = kappa * radius;
        let n = (ka + 4.0 * ka.cbrt() + 25.0) as usize;
        let (j, h) = (spherical_j(n, ka), spherical_h(n, ka));
        let coeffs = (0..=n)
            .map(|k| -Complex64::i().powu(k as u32) * (2 * k + 1) as f64 * j[k] / h[k])
            .collect();
        Self { kappa, radius, direction, coeffs }
    }

    fn terms(&self, x: [f64; 3]) -> (f64, f64, Vec<Complex64>, Vec<f64>) {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let d = self.direction;
        let ct = ((x[0] * d[0] + x[1] * d[1] + x[2] * d[2]) / r).clamp(-1.0, 1.0);
        let n = self.coeffs.len() - 1;
        (r, ct, spherical_h(n + 1, self.kappa * r), legendre(n, ct))
    }

    /// `u_s(x)` for `|x| >= radius`.
    pub fn scattered(&self, x: [f64; 3]) -> Complex64 {
        let (_, _, h, p) = self.terms(x);
        self.coeffs.iter().enumerate().map(|(k, c)| c * h[k] * p[k]).sum()
    }

    /// Gradient of the scattered field, `grad u_s(x)`.
    pub fn gradient(&self, x: [f64; 3]) -> [Complex64; 3] {
        let (r, ct, h, p) = self.terms(x);
        let z = self.kappa * r;
        let n = self.coeffs.len() - 1;
        // derivative of P_n with respect to cos(theta)
        let mut dp = vec![0.0; n + 1];
        for k in 1..=n {
            dp[k] = k as f64 * p[k - 1] + ct * dp[k - 1];
        }
        let (mut ur, mut ut) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for k in 0..=n {
            let hd = k as f64 / z * h[k] - h[k + 1];
            ur += self.coeffs[k] * self.kappa * hd * p[k];
            ut += self.coeffs[k] * h[k] * dp[k];
        }
        let d = self.direction;
        let xh = [x[0] / r, x[1] / r, x[2] / r];
        // grad(cos theta) = (d - cos theta xh) / r
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for c in 0..3 {
            g[c] = ur * xh[c] + ut * (d[c] - ct * xh[c]) / r;
        }
        g
    }

    /// `<grad u_s(x), n>`.
    pub fn normal_derivative(&self, x: [f64; 3], n: [f64; 3]) -> Complex64 {
        let g = self.gradient(x);
        g[0] * n[0] + g[1] * n[1] + g[2] * n[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_closed_forms() {
        let z = 1.7;
        let j = spherical_j(3, z);
        let y = spherical_y(3, z);
        assert!((j[0] - z.sin() / z).abs() < 1e-15);
        assert!((j[1] - (z.sin() / (z * z) - z.cos() / z)).abs() < 1e-15);
        let j2 = (3.0 / (z * z) - 1.0) * z.sin() / z - 3.0 * z.cos() / (z * z);
        assert!((j[2] - j2).abs() < 1e-14);
        let y2 = (-3.0 / (z * z) + 1.0) * z.cos() / z - 3.0 * z.sin() / (z * z);
        assert!((y[2] - y2).abs() < 1e-14);
    }

    #[test]
    fn wronskian() {
        for &z in &[0.3, 1.0, 5.0] {
            let (j, y) = (spherical_j(12, z), spherical_y(12, z));
            for n in 0..11 {
                // j_n y_{n+1} - j_{n+1} y_n = -1/z^2
                let w = j[n] * y[n + 1] - j[n + 1] * y[n];
                assert!((w * z * z + 1.0).abs() < 1e-10, "z={z} n={n} {w}");
            }
        }
    }

    #[test]
    fn boundary_condition_holds() {
        let s = SoundSoftSphere::new(1.0, 1.0, [0.0, 0.0, 1.0]);
        for k in 0..10 {
            let t = 0.3 * k as f64;
            let x = [t.sin(), 0.0, t.cos()];
            let inc = Complex64::new(0.0, x[2]).exp();
            assert!((s.scattered(x) + inc).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = SoundSoftSphere::new(1.3, 1.0, [0.6, 0.0, 0.8]);
        let x = [1.2, -0.9, 2.1];
        let g = s.gradient(x);
        let h = 1e-5;
        for c in 0..3 {
            let (mut a, mut b) = (x, x);
            a[c] += h;
            b[c] -= h;
            let fd = (s.scattered(a) - s.scattered(b)) / (2.0 * h);
            assert!((fd - g[c]).norm() < 1e-8 * g[c].norm().max(1.0));
        }
    }
}
