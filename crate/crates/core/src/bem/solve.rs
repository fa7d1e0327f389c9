use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::assemble::{assemble_cfie, assemble_rhs, BemSystem, QuadSettings};
use super::kernel::{kernel_pair, WaveContext};
use super::space::{BoundarySpace, Cell};

type C = Complex64;

/// Relative residual accepted from the dense solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Neumann trace of the total field in the density space of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySolution {
    pub coeffs: Vec<C>,
    pub level: usize,
    pub y: Vec<f64>,
    pub residual: f64,
}

/// Dense LU solve of the combined field system for the plane wave of `ctx`.
pub fn solve_density(system: &BemSystem, space: &BoundarySpace, ctx: &WaveContext) -> Result<DensitySolution> {
    let rhs = assemble_rhs(space, ctx);
    solve_with_rhs(&system.matrix(), &rhs, space.level())
}

pub(crate) fn solve_with_rhs(a: &DMatrix<C>, rhs: &[C], level: usize) -> Result<DensitySolution> {
    let n = rhs.len();
    let b = DVector::from_column_slice(rhs);
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(DensitySolution { coeffs: vec![C::new(0.0, 0.0); n], level, y: vec![], residual: 0.0 });
    }
    let x = a.clone().lu().solve(&b).ok_or(Error::SingularSystem)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let residual = (a * &x - &b).norm() / bnorm;
    if residual > SOLVER_TOLERANCE {
        return Err(Error::Residual { residual, tolerance: SOLVER_TOLERANCE });
    }
    Ok(DensitySolution { coeffs: x.iter().copied().collect(), level, y: vec![], residual })
}

/// Discretization, assembly and solve for one surface.
pub fn solve_scattering(
    surface: &crate::geometry::MultipatchSurface<f64>,
    degree: usize,
    level: usize,
    ctx: &WaveContext,
    settings: &QuadSettings,
) -> Result<(BoundarySpace, DensitySolution)> {
    let space = BoundarySpace::new(surface, degree, level)?;
    let system = assemble_cfie(&space, ctx, settings)?;
    let sol = solve_density(&system, &space, ctx)?;
    Ok((space, sol))
}

/// Potential value with a flag for evaluation points closer to the surface
/// than one cell diameter, where accuracy is not guaranteed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluated {
    pub value: C,
    pub near_surface: bool,
}

const ORDERS: [usize; 4] = [4, 6, 8, 10];
const MAX_DEPTH: usize = 4;

fn order_index(rho: f64) -> Option<usize> {
    match rho {
        r if r >= 8.0 => Some(0),
        r if r >= 3.0 => Some(1),
        r if r >= 1.5 => Some(2),
        r if r >= 1.0 => Some(3),
        _ => None,
    }
}

/// Evaluates the scattered field `u_s = -V psi` and its derivatives at
/// exterior points from a density on a boundary space.
pub struct PotentialEvaluator<'a> {
    space: &'a BoundarySpace,
    coeffs: &'a [C],
    kappa: f64,
    /// Density values at the Gauss points of every cell, per entry of `ORDERS`.
    psi: Vec<[Vec<C>; 4]>,
}

impl<'a> PotentialEvaluator<'a> {
    pub fn new(space: &'a BoundarySpace, density: &'a DensitySolution, ctx: &WaveContext) -> Result<Self> {
        if density.coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: density.coeffs.len() });
        }
        let coeffs = &density.coeffs[..];
        let psi = space
            .cells
            .iter()
            .map(|c| {
                ORDERS.map(|o| {
                    let q = c.gauss(o);
                    let nb = c.nb();
                    (0..q.x.len())
                        .map(|k| (0..nb).map(|a| coeffs[c.dofs[a]] * q.basis[k * nb + a]).sum())
                        .collect()
                })
            })
            .collect();
        Ok(Self { space, coeffs, kappa: ctx.kappa, psi })
    }

    /// `(u_s(x), du_s/dn_x(x))`; the derivative is zero when `n` is `None`.
    pub fn cauchy(&self, x: [f64; 3], n: Option<[f64; 3]>) -> (Evaluated, Evaluated) {
        let nn = n.unwrap_or([0.0; 3]);
        let mut acc = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        let mut near = false;
        for (ci, cell) in self.space.cells.iter().enumerate() {
            let rho = dist(x, cell.centre) / (2.0 * cell.radius);
            match order_index(rho) {
                Some(k) => {
                    let q = cell.gauss(ORDERS[k]);
                    for (p, psi) in self.psi[ci][k].iter().enumerate() {
                        add(&mut acc, self.kappa, x, nn, q.x[p], q.w[p] * psi);
                    }
                }
                None => {
                    near = true;
                    self.subdivide(cell, (0.0, 1.0), (0.0, 1.0), 0, x, nn, &mut acc);
                }
            }
        }
        (Evaluated { value: -acc.0, near_surface: near }, Evaluated { value: -acc.1, near_surface: near })
    }

    #[allow(clippy::too_many_arguments)]
    fn subdivide(&self, cell: &Cell, s: (f64, f64), t: (f64, f64), depth: usize, x: [f64; 3], n: [f64; 3], acc: &mut (C, C)) {
        let (hs, ht) = (s.1 - s.0, t.1 - t.0);
        let c = cell.point(s.0 + 0.5 * hs, t.0 + 0.5 * ht).x;
        // subcell radius scaled from the full cell
        let r = cell.radius * hs.max(ht);
        let rho = dist(x, c) / (2.0 * r);
        let order = match order_index(rho) {
            Some(k) => ORDERS[k],
            None if depth >= MAX_DEPTH => ORDERS[3],
            None => {
                let (sm, tm) = (s.0 + 0.5 * hs, t.0 + 0.5 * ht);
                for ss in [(s.0, sm), (sm, s.1)] {
                    for tt in [(t.0, tm), (tm, t.1)] {
                        self.subdivide(cell, ss, tt, depth + 1, x, n, acc);
                    }
                }
                return;
            }
        };
        let (g, w) = crate::quadrature::gauss_legendre_unit::<f64>(order);
        let nb = cell.nb();
        let mut b = [0.0; 81];
        for (i, &a) in g.iter().enumerate() {
            for (j, &bb) in g.iter().enumerate() {
                let (ss, tt) = (s.0 + a * hs, t.0 + bb * ht);
                let p = cell.point(ss, tt);
                cell.basis(ss, tt, &mut b[..nb]);
                let psi: C = (0..nb).map(|k| self.coeffs[cell.dofs[k]] * b[k]).sum();
                add(acc, self.kappa, x, n, p.x, psi * (w[i] * w[j] * hs * ht * p.measure));
            }
        }
    }

    pub fn potential(&self, x: [f64; 3]) -> Evaluated {
        self.cauchy(x, None).0
    }

    pub fn normal_derivative(&self, x: [f64; 3], n: [f64; 3]) -> Evaluated {
        self.cauchy(x, Some(n)).1
    }
}

#[inline]
fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[inline]
fn add(acc: &mut (C, C), kappa: f64, x: [f64; 3], n: [f64; 3], y: [f64; 3], f: C) {
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let (phi, rad, _) = kernel_pair(kappa, d);
    acc.0 += phi * f;
    acc.1 += rad * (d[0] * n[0] + d[1] * n[1] + d[2] * n[2]) * f;
}

/// `u_s(x) = -int_S Phi(x, z) psi(z) dsigma_z`.
pub fn eval_potential(density: &DensitySolution, space: &BoundarySpace, ctx: &WaveContext, x: [f64; 3]) -> Result<Evaluated> {
    Ok(PotentialEvaluator::new(space, density, ctx)?.potential(x))
}

/// `du_s/dn_x(x) = -int_S dPhi(x, z)/dn_x psi(z) dsigma_z`.
pub fn eval_potential_normal_derivative(
    density: &DensitySolution,
    space: &BoundarySpace,
    ctx: &WaveContext,
    x: [f64; 3],
    n: [f64; 3],
) -> Result<Evaluated> {
    Ok(PotentialEvaluator::new(space, density, ctx)?.normal_derivative(x, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin;

    fn cube_solution() -> (BoundarySpace, DensitySolution, WaveContext) {
        let ctx = WaveContext::new(1.0, [0.0, 0.6, 0.8]).unwrap();
        let (space, sol) = solve_scattering(&builtin::cube::<f64>(), 2, 1, &ctx, &QuadSettings::default()).unwrap();
        (space, sol, ctx)
    }

    #[test]
    fn zero_incident_wave_gives_zero_density() {
        let space = BoundarySpace::new(&builtin::cube::<f64>(), 1, 0).unwrap();
        let sys = assemble_cfie(&space, &WaveContext::new(1.0, [1.0, 0.0, 0.0]).unwrap(), &QuadSettings::default()).unwrap();
        let sol = solve_with_rhs(&sys.matrix(), &vec![C::new(0.0, 0.0); space.dim()], 0).unwrap();
        assert!(sol.coeffs.iter().all(|z| *z == C::new(0.0, 0.0)));
        let ev = PotentialEvaluator::new(&space, &sol, &WaveContext::new(1.0, [1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(ev.potential([3.0, 0.0, 0.0]).value, C::new(0.0, 0.0));
        assert_eq!(ev.normal_derivative([3.0, 0.0, 0.0], [1.0, 0.0, 0.0]).value, C::new(0.0, 0.0));
    }

    #[test]
    fn residual_is_small() {
        let (_, sol, _) = cube_solution();
        assert!(sol.residual <= SOLVER_TOLERANCE);
    }

    #[test]
    fn potential_solves_helmholtz_equation() {
        let (space, sol, ctx) = cube_solution();
        let ev = PotentialEvaluator::new(&space, &sol, &ctx).unwrap();
        let x = [2.6, -1.4, 1.9];
        let h = 1e-3;
        let u0 = ev.potential(x).value;
        let mut lap = -6.0 * u0;
        for c in 0..3 {
            for s in [-1.0, 1.0] {
                let mut y = x;
                y[c] += s * h;
                lap += ev.potential(y).value;
            }
        }
        lap /= h * h;
        let res = (lap + u0).norm() / u0.norm();
        assert!(res < 1e-4, "{res}");
    }

    #[test]
    fn normal_derivative_matches_finite_difference() {
        let (space, sol, ctx) = cube_solution();
        let ev = PotentialEvaluator::new(&space, &sol, &ctx).unwrap();
        let (x, n) = ([2.5, 0.5, -1.0], [0.48, 0.6, -0.64]);
        let h = 1e-4;
        let fd = (ev.potential([x[0] + h * n[0], x[1] + h * n[1], x[2] + h * n[2]]).value
            - ev.potential([x[0] - h * n[0], x[1] - h * n[1], x[2] - h * n[2]]).value)
            / (2.0 * h);
        let d = ev.normal_derivative(x, n).value;
        assert!((fd - d).norm() < 1e-5 * d.norm(), "{fd} {d}");
    }

    #[test]
    fn near_points_are_flagged() {
        let (space, sol, ctx) = cube_solution();
        let ev = PotentialEvaluator::new(&space, &sol, &ctx).unwrap();
        assert!(ev.potential([0.5, 0.5, 1.05]).near_surface);
        assert!(!ev.potential([0.5, 0.5, 6.0]).near_surface);
    }

    #[test]
    fn linear_in_density() {
        let (space, sol, ctx) = cube_solution();
        let scaled = DensitySolution { coeffs: sol.coeffs.iter().map(|z| z * C::new(0.5, -2.0)).collect(), ..sol.clone() };
        let x = [1.5, 2.5, 0.2];
        let a = eval_potential(&sol, &space, &ctx, x).unwrap().value;
        let b = eval_potential(&scaled, &space, &ctx, x).unwrap().value;
        assert!((a * C::new(0.5, -2.0) - b).norm() < 1e-14 * b.norm());
    }
}
