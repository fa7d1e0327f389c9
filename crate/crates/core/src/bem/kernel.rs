use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const FOUR_PI: f64 = 4.0 * PI;

/// Wavenumber, coupling parameter and incident direction of a plane wave.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveContext {
    pub kappa: f64,
    pub eta: f64,
    pub direction: [f64; 3],
}

impl WaveContext {
    /// Coupling `eta = kappa / 2`; the direction is normalized.
    pub fn new(kappa: f64, direction: [f64; 3]) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("wavenumber {kappa} must be positive")));
        }
        let n = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
        if !(n > 0.0) {
            return Err(Error::Domain("incident direction must be nonzero".into()));
        }
        Ok(Self { kappa, eta: kappa / 2.0, direction: direction.map(|c| c / n) })
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }
}

/// Incident plane wave and its normal derivative at `x`.
pub fn incident_trace(ctx: &WaveContext, x: [f64; 3], n: [f64; 3]) -> (Complex64, Complex64) {
    let d = ctx.direction;
    let phase = ctx.kappa * (d[0] * x[0] + d[1] * x[1] + d[2] * x[2]);
    let u = Complex64::new(phase.cos(), phase.sin());
    let dn = d[0] * n[0] + d[1] * n[1] + d[2] * n[2];
    (u, Complex64::new(0.0, ctx.kappa * dn) * u)
}

fn distance(x: [f64; 3], z: [f64; 3]) -> Result<f64> {
    let r = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + (x[2] - z[2]).powi(2)).sqrt();
    if r < 1e-14 {
        return Err(Error::Domain(format!("kernel evaluated at coincident points (r = {r:e})")));
    }
    Ok(r)
}

/// `Phi(x, z) = exp(i kappa r) / (4 pi r)`; `kappa = 0` gives the Laplace kernel.
pub fn helmholtz_kernel(kappa: f64, x: [f64; 3], z: [f64; 3]) -> Result<Complex64> {
    let r = distance(x, z)?;
    Ok(Complex64::from_polar(1.0, kappa * r) / (FOUR_PI * r))
}

/// `d Phi(x, z) / d n_z`.
pub fn dlp_kernel(kappa: f64, x: [f64; 3], z: [f64; 3], nz: [f64; 3]) -> Result<Complex64> {
    let r = distance(x, z)?;
    let d = (z[0] - x[0]) * nz[0] + (z[1] - x[1]) * nz[1] + (z[2] - x[2]) * nz[2];
    Ok(radial(kappa, r) * d)
}

/// `d Phi(x, z) / d n_x`.
pub fn adjoint_dlp_kernel(kappa: f64, x: [f64; 3], z: [f64; 3], nx: [f64; 3]) -> Result<Complex64> {
    let r = distance(x, z)?;
    let d = (x[0] - z[0]) * nx[0] + (x[1] - z[1]) * nx[1] + (x[2] - z[2]) * nx[2];
    Ok(radial(kappa, r) * d)
}

/// `exp(i kappa r) (i kappa r - 1) / (4 pi r^3)`.
#[inline]
pub(crate) fn radial(kappa: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0, kappa * r) * Complex64::new(-1.0, kappa * r) / (FOUR_PI * r * r * r)
}

/// Single-layer kernel and the radial factor for a difference vector `x - z`.
#[inline]
pub(crate) fn kernel_pair(kappa: f64, diff: [f64; 3]) -> (Complex64, Complex64, f64) {
    let r = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
    let (s, c) = (kappa * r).sin_cos();
    let e = Complex64::new(c, s);
    let inv = 1.0 / (FOUR_PI * r);
    let phi = e * inv;
    let rad = phi * Complex64::new(-1.0, kappa * r) / (r * r);
    (phi, rad, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn unit_distance_value() {
        let v = helmholtz_kernel(1.0, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert!((v.re - 1f64.cos() / (4.0 * PI)).abs() < 1e-15);
        assert!((v.im - 1f64.sin() / (4.0 * PI)).abs() < 1e-15);
        // quoted six-digit reference values, the imaginary one is off in the last digits
        assert!((v.re - 0.042996).abs() < 1e-6 && (v.im - 0.066959).abs() < 5e-6);
    }

    #[test]
    fn laplace_limit_and_conjugate_symmetry() {
        let (x, z) = ([0.1, 0.2, 0.3], [1.0, -0.5, 0.7]);
        let r = ((0.9f64).powi(2) + 0.7f64.powi(2) + 0.4f64.powi(2)).sqrt();
        let l = helmholtz_kernel(0.0, x, z).unwrap();
        assert!((l.re - 1.0 / (4.0 * PI * r)).abs() < 1e-15 && l.im == 0.0);
        let (a, b) = (helmholtz_kernel(2.0, x, z).unwrap(), helmholtz_kernel(-2.0, x, z).unwrap());
        assert!((a - b.conj()).norm() < 1e-16);
    }

    #[test]
    fn coincident_points_are_rejected() {
        assert!(helmholtz_kernel(1.0, [0.0; 3], [0.0; 3]).is_err());
        assert!(dlp_kernel(1.0, [0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn double_layer_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let z: [f64; 3] = [rng.gen::<f64>() + 1.0, rng.gen(), rng.gen()];
            let mut n: [f64; 3] = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
            let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            n = n.map(|c| c / nn);
            let h = 1e-5;
            let zp = [z[0] + h * n[0], z[1] + h * n[1], z[2] + h * n[2]];
            let zm = [z[0] - h * n[0], z[1] - h * n[1], z[2] - h * n[2]];
            let fd = (helmholtz_kernel(1.5, x, zp).unwrap() - helmholtz_kernel(1.5, x, zm).unwrap()) / (2.0 * h);
            assert!((fd - dlp_kernel(1.5, x, z, n).unwrap()).norm() < 1e-6);
            let xp = [x[0] + h * n[0], x[1] + h * n[1], x[2] + h * n[2]];
            let xm = [x[0] - h * n[0], x[1] - h * n[1], x[2] - h * n[2]];
            let fd = (helmholtz_kernel(1.5, xp, z).unwrap() - helmholtz_kernel(1.5, xm, z).unwrap()) / (2.0 * h);
            assert!((fd - adjoint_dlp_kernel(1.5, x, z, n).unwrap()).norm() < 1e-6);
        }
    }

    #[test]
    fn double_layer_special_cases() {
        let (x, z) = ([0.0; 3], [0.0, 0.0, 2.0]);
        assert_eq!(dlp_kernel(1.0, x, z, [1.0, 0.0, 0.0]).unwrap(), Complex64::new(0.0, 0.0));
        let v = dlp_kernel(0.0, x, z, [0.0, 0.0, 1.0]).unwrap();
        assert!((v.re + 1.0 / (4.0 * PI * 4.0)).abs() < 1e-16);
    }

    #[test]
    fn fast_pair_agrees_with_checked_kernels() {
        let (x, z, n) = ([0.3, 0.1, -0.2], [1.1, 0.4, 0.9], [0.0, 0.6, 0.8]);
        let (phi, rad, _) = kernel_pair(1.2, [x[0] - z[0], x[1] - z[1], x[2] - z[2]]);
        assert!((phi - helmholtz_kernel(1.2, x, z).unwrap()).norm() < 1e-16);
        let d = (x[0] - z[0]) * n[0] + (x[1] - z[1]) * n[1] + (x[2] - z[2]) * n[2];
        assert!((rad * d - adjoint_dlp_kernel(1.2, x, z, n).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn incident_wave() {
        let ctx = WaveContext::new(1.0, [0.0, 0.0, 2.0]).unwrap();
        assert_eq!(ctx.direction, [0.0, 0.0, 1.0]);
        assert_eq!(ctx.eta, 0.5);
        assert_eq!(incident_trace(&ctx, [0.0; 3], [1.0, 0.0, 0.0]).0, Complex64::new(1.0, 0.0));
        let (x, n) = ([0.3, -0.7, 1.9], [0.0, 0.6, 0.8]);
        let (u, du) = incident_trace(&ctx, x, n);
        assert!((u.norm() - 1.0).abs() < 1e-15);
        let h = 1e-5;
        let up = incident_trace(&ctx, [x[0], x[1] + h * 0.6, x[2] + h * 0.8], n).0;
        let um = incident_trace(&ctx, [x[0], x[1] - h * 0.6, x[2] - h * 0.8], n).0;
        assert!(((up - um) / (2.0 * h) - du).norm() < 1e-6);
    }
}
