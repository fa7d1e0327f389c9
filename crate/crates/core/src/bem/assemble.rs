use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::kernel::{incident_trace, kernel_pair, WaveContext};
use super::singular::{self, Dihedral, Rule4};
use super::space::{BoundarySpace, Cell};

type C = Complex64;

/// Quadrature configuration of the Galerkin assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadSettings {
    /// Gauss order of the regularized rules; `None` means degree + 4.
    pub singular_order: Option<usize>,
    /// Multiplier on the distance-dependent order of separated pairs.
    pub far_scale: usize,
    /// Largest number of density unknowns accepted by the dense solver.
    pub dof_cap: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { singular_order: None, far_scale: 1, dof_cap: 12_000 }
    }
}

/// Gauss order per direction for cells whose centres are `rho` summed radii apart.
pub fn far_order(rho: f64) -> usize {
    match rho {
        r if r < 1.25 => 12,
        r if r < 1.6 => 10,
        r if r < 2.2 => 8,
        r if r < 3.5 => 7,
        r if r < 6.0 => 6,
        r if r < 12.0 => 5,
        _ => 4,
    }
}

/// Galerkin blocks of the combined field operator.
#[derive(Clone, Debug)]
pub struct BemSystem {
    /// Single layer `<V phi_j, phi_i>`.
    pub v: DMatrix<C>,
    /// Adjoint double layer `<K' phi_j, phi_i>`.
    pub k: DMatrix<C>,
    /// Mass matrix `<phi_j, phi_i>`.
    pub m: DMatrix<f64>,
    pub kappa: f64,
    pub eta: f64,
    pub settings: QuadSettings,
}

impl BemSystem {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// `1/2 M + K' - i eta V`.
    pub fn matrix(&self) -> DMatrix<C> {
        let mut a = self.k.clone();
        let ie = C::new(0.0, self.eta);
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                a[(i, j)] += 0.5 * self.m[(i, j)] - ie * self.v[(i, j)];
            }
        }
        a
    }
}

enum Relation {
    Identical,
    Edge(Dihedral, Dihedral),
    Vertex(Dihedral, Dihedral),
    Far,
}

fn relation(i: usize, ci: &Cell, cj: &Cell, j: usize) -> Relation {
    if i == j {
        return Relation::Identical;
    }
    let shared: Vec<(usize, usize)> = (0..4)
        .filter_map(|a| (0..4).find(|&b| ci.corners[a] == cj.corners[b]).map(|b| (a, b)))
        .collect();
    match shared.len() {
        0 => Relation::Far,
        1 => {
            let (a, b) = shared[0];
            Relation::Vertex(Dihedral::placing(a, None).unwrap(), Dihedral::placing(b, None).unwrap())
        }
        2 => {
            let ((a0, b0), (a1, b1)) = (shared[0], shared[1]);
            match (Dihedral::placing(a0, Some(a1)), Dihedral::placing(b0, Some(b1))) {
                (Some(di), Some(dj)) => Relation::Edge(di, dj),
                // diagonal corners only: treat the two points as separate vertices
                _ => Relation::Vertex(Dihedral::placing(a0, None).unwrap(), Dihedral::placing(b0, None).unwrap()),
            }
        }
        _ => Relation::Identical,
    }
}

struct Rules {
    identical: Rule4,
    edge: Rule4,
    vertex: Rule4,
}

#[allow(clippy::too_many_arguments)]
fn singular_block(ci: &Cell, di: Dihedral, cj: &Cell, dj: Dihedral, rule: &Rule4, kappa: f64, bv: &mut [C], bk: &mut [C]) {
    let (ni, nj) = (ci.nb(), cj.nb());
    let mut ba = [0.0; 81];
    let mut bb = [0.0; 81];
    for p in rule {
        let (s1, t1) = di.apply(p[0], p[1]);
        let (s2, t2) = dj.apply(p[2], p[3]);
        let (a, b) = (ci.point(s1, t1), cj.point(s2, t2));
        ci.basis(s1, t1, &mut ba[..ni]);
        cj.basis(s2, t2, &mut bb[..nj]);
        let d = [a.x[0] - b.x[0], a.x[1] - b.x[1], a.x[2] - b.x[2]];
        let (phi, rad, _) = kernel_pair(kappa, d);
        let w = p[4] * a.measure * b.measure;
        let fv = phi * w;
        let fk = rad * ((d[0] * a.normal[0] + d[1] * a.normal[1] + d[2] * a.normal[2]) * w);
        for ia in 0..ni {
            let (gv, gk) = (fv * ba[ia], fk * ba[ia]);
            let row = ia * nj;
            for ib in 0..nj {
                bv[row + ib] += gv * bb[ib];
                bk[row + ib] += gk * bb[ib];
            }
        }
    }
}

fn regular_block(ci: &Cell, cj: &Cell, order: usize, kappa: f64, bv: &mut [C], bk: &mut [C]) {
    let (qi, qj) = (ci.gauss(order), cj.gauss(order));
    let (ni, nj) = (ci.nb(), cj.nb());
    let mut tv = vec![C::new(0.0, 0.0); nj];
    let mut tk = vec![C::new(0.0, 0.0); nj];
    for a in 0..qi.x.len() {
        tv.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        tk.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        let (xa, na) = (qi.x[a], qi.n[a]);
        for b in 0..qj.x.len() {
            let xb = qj.x[b];
            let d = [xa[0] - xb[0], xa[1] - xb[1], xa[2] - xb[2]];
            let (phi, rad, _) = kernel_pair(kappa, d);
            let w = qj.w[b];
            let fv = phi * w;
            let fk = rad * ((d[0] * na[0] + d[1] * na[1] + d[2] * na[2]) * w);
            let row = &qj.basis[b * nj..(b + 1) * nj];
            for ib in 0..nj {
                tv[ib] += fv * row[ib];
                tk[ib] += fk * row[ib];
            }
        }
        let wa = qi.w[a];
        let row = &qi.basis[a * ni..(a + 1) * ni];
        for ia in 0..ni {
            let f = wa * row[ia];
            for ib in 0..nj {
                bv[ia * nj + ib] += tv[ib] * f;
                bk[ia * nj + ib] += tk[ib] * f;
            }
        }
    }
}

fn mass_block(c: &Cell, order: usize, out: &mut [f64]) {
    let q = c.gauss(order);
    let n = c.nb();
    for k in 0..q.x.len() {
        let b = &q.basis[k * n..(k + 1) * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += q.w[k] * b[i] * b[j];
            }
        }
    }
}

/// Galerkin assembly of the single layer, adjoint double layer and mass
/// matrices on the patchwise discontinuous density space.
///
/// Pairs of cells sharing the whole cell, an edge or a vertex use the
/// regularized rules of the `singular` module; all other pairs use tensor
/// Gauss rules whose order grows as the cells get closer. Rows are computed
/// in parallel per test cell and summed in cell order, so the result does not
/// depend on the number of threads.
pub fn assemble_cfie(space: &BoundarySpace, ctx: &WaveContext, settings: &QuadSettings) -> Result<BemSystem> {
    let n = space.dim();
    if n > settings.dof_cap {
        return Err(Error::TooManyDofs { dofs: n, cap: settings.dof_cap });
    }
    let p = space.degree();
    let q_sing = settings.singular_order.unwrap_or(p + 4);
    let rules = Rules { identical: singular::identical(q_sing), edge: singular::edge(q_sing), vertex: singular::vertex(q_sing) };
    let cells = &space.cells;
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, c) in cells.iter().enumerate() {
        for &v in &c.corners {
            by_vertex.entry(v).or_default().push(k);
        }
    }
    let kappa = ctx.kappa;
    let nb_max = cells.iter().map(|c| c.nb()).max().unwrap_or(1);
    let chunk = ((1usize << 24) / (nb_max * n.max(1) * 32)).clamp(1, 64);

    let mut v = DMatrix::<C>::zeros(n, n);
    let mut k = DMatrix::<C>::zeros(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let ids: Vec<usize> = (0..cells.len()).collect();
    for group in ids.chunks(chunk * rayon::current_num_threads().max(1)) {
        let strips: Vec<Result<(Vec<C>, Vec<C>, Vec<f64>)>> = group
            .par_iter()
            .with_max_len(1)
            .map(|&i| {
                let ci = &cells[i];
                let ni = ci.nb();
                let mut sv = vec![C::new(0.0, 0.0); ni * n];
                let mut sk = vec![C::new(0.0, 0.0); ni * n];
                let mut sm = vec![0.0; ni * ni];
                mass_block(ci, p + 3, &mut sm);
                let mut bv = vec![C::new(0.0, 0.0); ni * nb_max];
                let mut bk = vec![C::new(0.0, 0.0); ni * nb_max];
                for (j, cj) in cells.iter().enumerate() {
                    let nj = cj.nb();
                    bv[..ni * nj].iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
                    bk[..ni * nj].iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
                    let (bv, bk) = (&mut bv[..ni * nj], &mut bk[..ni * nj]);
                    let near = ci.corners.iter().any(|c| by_vertex[c].contains(&j));
                    let rel = if near { relation(i, ci, cj, j) } else { Relation::Far };
                    match rel {
                        Relation::Identical => singular_block(ci, Dihedral::IDENTITY, cj, Dihedral::IDENTITY, &rules.identical, kappa, bv, bk),
                        Relation::Edge(di, dj) => singular_block(ci, di, cj, dj, &rules.edge, kappa, bv, bk),
                        Relation::Vertex(di, dj) => singular_block(ci, di, cj, dj, &rules.vertex, kappa, bv, bk),
                        Relation::Far => {
                            let d = ((ci.centre[0] - cj.centre[0]).powi(2)
                                + (ci.centre[1] - cj.centre[1]).powi(2)
                                + (ci.centre[2] - cj.centre[2]).powi(2))
                            .sqrt();
                            let order = far_order(d / (ci.radius + cj.radius)) * settings.far_scale;
                            regular_block(ci, cj, order, kappa, bv, bk);
                        }
                    }
                    if bv.iter().chain(bk.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                        return Err(Error::Quadrature(i, j));
                    }
                    for ia in 0..ni {
                        for ib in 0..nj {
                            sv[ia * n + cj.dofs[ib]] += bv[ia * nj + ib];
                            sk[ia * n + cj.dofs[ib]] += bk[ia * nj + ib];
                        }
                    }
                }
                Ok((sv, sk, sm))
            })
            .collect();
        for (&i, strip) in group.iter().zip(strips) {
            let (sv, sk, sm) = strip?;
            let ci = &cells[i];
            let ni = ci.nb();
            for (ia, &row) in ci.dofs.iter().enumerate() {
                for col in 0..n {
                    v[(row, col)] += sv[ia * n + col];
                    k[(row, col)] += sk[ia * n + col];
                }
                for (ib, &col) in ci.dofs.iter().enumerate() {
                    m[(row, col)] += sm[ia * ni + ib];
                }
            }
        }
    }
    Ok(BemSystem { v, k, m, kappa, eta: ctx.eta, settings: settings.clone() })
}

/// Galerkin right-hand side `<du_inc/dn - i eta u_inc, phi_i>`.
pub fn assemble_rhs(space: &BoundarySpace, ctx: &WaveContext) -> Vec<C> {
    let mut b = vec![C::new(0.0, 0.0); space.dim()];
    let order = space.degree() + 8;
    let ie = C::new(0.0, ctx.eta);
    for c in &space.cells {
        let q = c.gauss(order);
        let nb = c.nb();
        for k in 0..q.x.len() {
            let (u, du) = incident_trace(ctx, q.x[k], q.n[k]);
            let g = (du - ie * u) * q.w[k];
            for a in 0..nb {
                b[c.dofs[a]] += g * q.basis[k * nb + a];
            }
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin;

    fn ctx(kappa: f64) -> WaveContext {
        WaveContext::new(kappa, [0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn laplace_single_layer_has_positive_diagonal() {
        let space = BoundarySpace::new(&builtin::cube::<f64>(), 1, 1).unwrap();
        let mut c = ctx(1.0);
        c.kappa = 0.0;
        let sys = assemble_cfie(&space, &c.with_eta(0.0), &QuadSettings::default()).unwrap();
        for i in 0..sys.dim() {
            assert!(sys.v[(i, i)].re > 0.0 && sys.v[(i, i)].im.abs() < 1e-15);
        }
    }

    #[test]
    fn single_layer_is_complex_symmetric() {
        let space = BoundarySpace::new(&builtin::cube::<f64>(), 2, 1).unwrap();
        let sys = assemble_cfie(&space, &ctx(1.0), &QuadSettings::default()).unwrap();
        let vmax = sys.v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let asym = (&sys.v - sys.v.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(asym <= 1e-8 * vmax, "{asym} {vmax}");
        let masym = (&sys.m - sys.m.transpose()).amax();
        assert!(masym < 1e-15);
        assert!((sys.m.sum() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn separated_pair_order_is_converged() {
        // 24 cells on the cube: level 1 with one span per face gives 4 per face
        let space = BoundarySpace::new(&builtin::cube::<f64>(), 2, 1).unwrap();
        assert_eq!(space.cells.len(), 24);
        let base = assemble_cfie(&space, &ctx(1.0), &QuadSettings::default()).unwrap();
        let fine = assemble_cfie(&space, &ctx(1.0), &QuadSettings { far_scale: 2, ..QuadSettings::default() }).unwrap();
        for (a, b) in [(&base.v, &fine.v), (&base.k, &fine.k)] {
            let amax = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff <= 1e-10 * amax, "{diff:e} vs {amax:e}");
        }
    }

    #[test]
    fn adjoint_double_layer_reproduces_gauss_identity() {
        // Laplace: int_S dPhi(x,y)/dn_x dsigma_x = -1/2 for y on a closed
        // surface, so column sums of K' are -1/2 times those of M
        let space = BoundarySpace::new(&builtin::cube::<f64>(), 2, 1).unwrap();
        let mut c = ctx(1.0);
        c.kappa = 0.0;
        let sys = assemble_cfie(&space, &c, &QuadSettings::default()).unwrap();
        let ones = nalgebra::DVector::from_element(space.dim(), C::new(1.0, 0.0));
        let lhs = sys.k.transpose() * &ones;
        let mass: Vec<f64> = (0..space.dim()).map(|i| sys.m.column(i).sum()).collect();
        for i in 0..space.dim() {
            assert!((lhs[i].re + 0.5 * mass[i]).abs() < 1e-6 * mass[i].abs().max(1e-3), "{i} {} {}", lhs[i], mass[i]);
        }
    }

    #[test]
    fn dof_cap_is_enforced() {
        let space = BoundarySpace::new(&builtin::cube::<f64>(), 2, 1).unwrap();
        let r = assemble_cfie(&space, &ctx(1.0), &QuadSettings { dof_cap: 10, ..QuadSettings::default() });
        assert!(matches!(r, Err(Error::TooManyDofs { .. })));
    }
}
