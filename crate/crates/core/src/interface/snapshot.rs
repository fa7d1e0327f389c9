use num_complex::Complex64;

use crate::container::Container;
use crate::error::{Error, Result};

use super::grid::InterfaceCauchyData;
use super::moments::SecondMomentData;

type C = Complex64;

fn split(v: &[C]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())
}

fn join(re: &[f64], im: &[f64]) -> Result<Vec<C>> {
    if re.len() != im.len() {
        return Err(Error::Format("real and imaginary parts differ in length".into()));
    }
    Ok(re.iter().zip(im).map(|(a, b)| C::new(*a, *b)).collect())
}

impl InterfaceCauchyData {
    pub fn to_container(&self, header: serde_json::Value) -> Container {
        let mut c = Container::new("interface-cauchy", header);
        let (ur, ui) = split(&self.u);
        let (dr, di) = split(&self.dn);
        c.push("u_re", ur);
        c.push("u_im", ui);
        c.push("dn_re", dr);
        c.push("dn_im", di);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "interface-cauchy" {
            return Err(Error::Format(format!("expected interface-cauchy, found {}", c.kind)));
        }
        let u = join(c.array("u_re")?, c.array("u_im")?)?;
        let dn = join(c.array("dn_re")?, c.array("dn_im")?)?;
        if u.len() != dn.len() {
            return Err(Error::Format("trace arrays differ in length".into()));
        }
        Ok(Self { u, dn })
    }
}

impl SecondMomentData {
    pub fn from_dense(nodes: usize, data: Vec<C>) -> Result<Self> {
        if data.len() != 4 * nodes * nodes {
            return Err(Error::DimensionMismatch { expected: 4 * nodes * nodes, found: data.len() });
        }
        let mut m = Self::zeros(0);
        m.reset(nodes, data);
        Ok(m)
    }

    pub fn to_container(&self, header: serde_json::Value) -> Container {
        let mut c = Container::new("second-moment", header);
        let (re, im) = split(&self.data);
        c.push("re", re);
        c.push("im", im);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "second-moment" {
            return Err(Error::Format(format!("expected second-moment, found {}", c.kind)));
        }
        let data = join(c.array("re")?, c.array("im")?)?;
        let m = (data.len() as f64).sqrt().round() as usize;
        if m * m != data.len() || m % 2 != 0 {
            return Err(Error::Format("second moment is not a square of even order".into()));
        }
        Self::from_dense(m / 2, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let d = InterfaceCauchyData { u: vec![C::new(1.0, -2.0), C::new(0.5, 0.0)], dn: vec![C::new(0.0, 3.0), C::new(-1.0, 1e-300)] };
        let c = Container::from_bytes(&d.to_container(serde_json::json!({"level": 1})).to_bytes()).unwrap();
        assert_eq!(InterfaceCauchyData::from_container(&c).unwrap(), d);
        let mut m = SecondMomentData::zeros(2);
        m.accumulate(&d, 0.25).unwrap();
        let c = Container::from_bytes(&m.to_container(serde_json::Value::Null).to_bytes()).unwrap();
        assert_eq!(SecondMomentData::from_container(&c).unwrap(), m);
        assert!(InterfaceCauchyData::from_container(&c).is_err());
    }
}
