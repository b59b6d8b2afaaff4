//! Small helpers around `Complex64`.

use num_complex::Complex64 as Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Relative closeness `|a - b| <= tol * (1 + |b|)`.
pub fn close(a: Complex, b: Complex, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

pub fn is_finite(z: Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Shortest round-trip text of `x`, in exponent form outside `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Parses `"re,im"` or a bare real.
pub fn parse(s: &str) -> Option<Complex> {
    let mut parts = s.split(',');
    let re = parts.next()?.trim().parse::<f64>().ok()?;
    let im = match parts.next() {
        Some(p) => p.trim().parse::<f64>().ok()?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return None;
    }
    Some(Complex::new(re, im))
}

/// Serde adapter writing a complex number as `[re, im]`.
pub mod pair {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex::new(re, im))
    }
}

/// Serde adapter for `Vec<Complex>` as a list of `[re, im]` pairs.
pub mod pairs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| Complex::new(re, im)).collect())
    }
}

/// Serde adapter for `Option<Complex>` as `[re, im]` or `null`.
pub mod option_pair {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Option<Complex>, s: S) -> Result<S::Ok, S::Error> {
        z.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[re, im]| Complex::new(re, im)))
    }
}

/// Serde adapter mapping non-finite floats to `null`, read back as `+inf`.
pub mod finite_or_null {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_some(x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
