//! Plain-text multipatch files and legacy VTK polygon export.
//!
//! Patch file layout:
//!
//! ```text
//! patches M degree p1 p2
//! patch 0 orientation 1
//! k1_len
//! xi_0 xi_1 ...
//! k2_len
//! eta_0 eta_1 ...
//! x y z w        (k1 * k2 lines, second parameter fastest)
//! patch 1 orientation -1
//! ...
//! ```
//!
//! The `patch ... orientation` line is optional and defaults to `1`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::knots::KnotVector;
use super::multipatch::MultipatchSurface;
use super::patch::NurbsPatch;

pub fn write_patches<T: Real>(surface: &MultipatchSurface<T>) -> Result<String> {
    let p0 = surface.patch(0);
    let (pu, pv) = (p0.knots_u().degree(), p0.knots_v().degree());
    let mut s = String::new();
    writeln!(s, "patches {} degree {pu} {pv}", surface.len()).unwrap();
    for (i, p) in surface.patches().iter().enumerate() {
        if p.knots_u().degree() != pu || p.knots_v().degree() != pv {
            return Err(Error::Format("all patches must share the same degrees".into()));
        }
        writeln!(s, "patch {i} orientation {}", p.orientation()).unwrap();
        for kv in [p.knots_u(), p.knots_v()] {
            writeln!(s, "{}", kv.knots().len()).unwrap();
            let line: Vec<String> = kv.knots().iter().map(|x| format!("{:e}", x.to_f64_())).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        for (c, w) in p.control().iter().zip(p.weights()) {
            writeln!(
                s,
                "{:e} {:e} {:e} {:e}",
                c[0].to_f64_(),
                c[1].to_f64_(),
                c[2].to_f64_(),
                w.to_f64_()
            )
            .unwrap();
        }
    }
    Ok(s)
}

pub fn read_patches<T: Real>(text: &str) -> Result<MultipatchSurface<T>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).peekable();
    let bad = |m: &str| Error::Format(m.to_string());
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty patch file"))?.split_whitespace().collect();
    if header.len() != 5 || header[0] != "patches" || header[2] != "degree" {
        return Err(bad("expected header 'patches M degree p1 p2'"));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer '{s}'")));
    let parse_f = |s: &str| {
        s.parse::<f64>().map(T::c).map_err(|_| bad(&format!("bad number '{s}'")))
    };
    let m = parse_usize(header[1])?;
    let (pu, pv) = (parse_usize(header[3])?, parse_usize(header[4])?);
    let mut patches = Vec::with_capacity(m);
    for _ in 0..m {
        let mut orientation = 1i8;
        if let Some(l) = lines.peek() {
            if l.starts_with("patch") {
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() == 4 && f[2] == "orientation" {
                    orientation = if f[3].parse::<i32>().map_err(|_| bad("bad orientation"))? < 0 { -1 } else { 1 };
                }
                lines.next();
            }
        }
        let mut kvs = Vec::with_capacity(2);
        for deg in [pu, pv] {
            let n = parse_usize(lines.next().ok_or_else(|| bad("missing knot count"))?)?;
            let knots: Vec<T> = lines
                .next()
                .ok_or_else(|| bad("missing knot line"))?
                .split_whitespace()
                .map(parse_f)
                .collect::<Result<_>>()?;
            if knots.len() != n {
                return Err(bad("knot count does not match knot line"));
            }
            kvs.push(KnotVector::new(deg, knots)?);
        }
        let kv = kvs.pop().unwrap();
        let ku = kvs.pop().unwrap();
        let count = ku.dim() * kv.dim();
        let mut control = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            let f: Vec<T> = lines
                .next()
                .ok_or_else(|| bad("missing control point"))?
                .split_whitespace()
                .map(parse_f)
                .collect::<Result<_>>()?;
            if f.len() != 4 {
                return Err(bad("control point lines need 'x y z w'"));
            }
            control.push([f[0], f[1], f[2]]);
            weights.push(f[3]);
        }
        patches.push(NurbsPatch::new(ku, kv, control, weights)?.with_orientation(orientation));
    }
    MultipatchSurface::new(patches)
}

pub fn load_patches<T: Real>(path: &Path) -> Result<MultipatchSurface<T>> {
    read_patches(&std::fs::read_to_string(path)?)
}

/// Samples each patch on an `n x n` grid of quads and writes a legacy ASCII
/// VTK polydata file with optional per-point scalar fields.
pub fn write_vtk<T: Real>(
    surface: &MultipatchSurface<T>,
    n: usize,
    fields: &[(&str, &dyn Fn(usize, T, T, [T; 3]) -> f64)],
    out: &mut impl Write,
) -> Result<()> {
    let n = n.max(1);
    let per = (n + 1) * (n + 1);
    let mut points = Vec::with_capacity(surface.len() * per);
    let mut params = Vec::with_capacity(points.capacity());
    for (i, p) in surface.patches().iter().enumerate() {
        for a in 0..=n {
            for b in 0..=n {
                let (u, v) = (T::from_usize_(a) / T::from_usize_(n), T::from_usize_(b) / T::from_usize_(n));
                points.push(p.eval(u, v));
                params.push((i, u, v));
            }
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "multipatch surface")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for x in &points {
        writeln!(out, "{:e} {:e} {:e}", x[0].to_f64_(), x[1].to_f64_(), x[2].to_f64_())?;
    }
    let quads = surface.len() * n * n;
    writeln!(out, "POLYGONS {quads} {}", quads * 5)?;
    for i in 0..surface.len() {
        let base = i * per;
        for a in 0..n {
            for b in 0..n {
                let id = |a: usize, b: usize| base + a * (n + 1) + b;
                writeln!(out, "4 {} {} {} {}", id(a, b), id(a + 1, b), id(a + 1, b + 1), id(a, b + 1))?;
            }
        }
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", points.len())?;
        for (name, f) in fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for (x, &(i, u, v)) in points.iter().zip(&params) {
                writeln!(out, "{:e}", f(i, u, v, *x))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin;

    #[test]
    fn roundtrip_sphere() {
        let s = builtin::sphere::<f64>(3);
        let text = write_patches(&s).unwrap();
        let back: MultipatchSurface<f64> = read_patches(&text).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back.glue().len(), 12);
        for (a, b) in s.patches().iter().zip(back.patches()) {
            assert_eq!(a.orientation(), b.orientation());
            let (x, y) = (a.eval(0.3, 0.8), b.eval(0.3, 0.8));
            for d in 0..3 {
                assert!((x[d] - y[d]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_patches::<f64>("patches 1 degree 1\n").is_err());
        assert!(read_patches::<f64>("patches 1 degree 1 1\n4\n0 0 1 1\n4\n0 0 1 1\n0 0 0 1\n").is_err());
    }

    #[test]
    fn vtk_counts() {
        let mut buf = Vec::new();
        let f = |_: usize, _: f64, _: f64, x: [f64; 3]| x[2];
        write_vtk(&builtin::cube::<f64>(), 2, &[("z", &f)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 54 double"));
        assert!(s.contains("POLYGONS 24 120"));
        assert!(s.contains("SCALARS z double 1"));
    }
}
