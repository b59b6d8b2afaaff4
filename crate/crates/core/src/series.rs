//! Truncated power series with a certified safe-evaluation radius.
//!
//! A [`TruncatedSeries`] stores `a_0, …, a_{N}` at a center. Its safe radius is
//! the largest `r` for which a geometric majorant of the missing tail stays
//! below `tail_eps`; the majorant's growth rate is the larger of the last-8
//! coefficient ratios and the root-test rate over the last quarter.

use crate::{Complex, Error, Result};
use serde::{Deserialize, Serialize};

/// Default number of stored coefficients for the series solvers.
pub const DEFAULT_TERMS: usize = 64;
/// Default tail tolerance of the safe-radius certificate.
pub const DEFAULT_TAIL_EPS: f64 = 1e-16;
/// Below this many coefficients a list is treated as an exact polynomial.
pub const MIN_CERTIFIED_TERMS: usize = 16;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// Result of [`safe_radius_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeRadius {
    /// Largest radius at which the tail majorant stays below `eps`.
    #[serde(with = "crate::cplx::finite_or_null")]
    pub radius: f64,
    /// `1 / max |a_n|^{1/n}` over the last quarter of the coefficients.
    #[serde(with = "crate::cplx::finite_or_null")]
    pub root_test_radius: f64,
    /// The trailing coefficients vanish: the list is a polynomial.
    pub degenerate: bool,
    /// `false` when the last-8 ratios grow faster than the root test allows;
    /// the radius is then computed from the root-test rate and is only
    /// empirical.
    pub certified: bool,
}

impl SafeRadius {
    fn polynomial() -> Self {
        SafeRadius {
            radius: f64::INFINITY,
            root_test_radius: f64::INFINITY,
            degenerate: true,
            certified: true,
        }
    }
}

/// Estimates the safe evaluation radius of a coefficient list.
///
/// Returns the `+∞` sentinel (with `degenerate` set) when the last eight
/// coefficients are all zero.
pub fn safe_radius_estimate(coeffs: &[Complex], eps: f64) -> Result<SafeRadius> {
    if coeffs.len() < MIN_CERTIFIED_TERMS {
        return Err(Error::InsufficientData(format!(
            "safe radius needs at least {MIN_CERTIFIED_TERMS} coefficients, got {}",
            coeffs.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::BadParams("tail eps must be positive".into()));
    }
    let len = coeffs.len();
    let last_nonzero = match coeffs.iter().rposition(|a| a.norm() > 0.0) {
        Some(m) if m + 8 >= len && m > 0 => m,
        _ => return Ok(SafeRadius::polynomial()),
    };

    // Ratio rate over consecutive nonzero coefficients among the last eight.
    let tail_idx: Vec<usize> = (len - 8..len).filter(|&i| coeffs[i].norm() > 0.0).collect();
    let mut ratio_rate: f64 = 0.0;
    for w in tail_idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        let r = (coeffs[j].norm() / coeffs[i].norm()).powf(1.0 / (j - i) as f64);
        ratio_rate = ratio_rate.max(r);
    }

    let start = (3 * len / 4).min(len - 8).max(1);
    let mut root_rate: f64 = 0.0;
    for (i, a) in coeffs.iter().enumerate().skip(start) {
        let m = a.norm();
        if m > 0.0 {
            root_rate = root_rate.max((m.ln() / i as f64).exp());
        }
    }
    let root_test_radius = if root_rate > 0.0 { 1.0 / root_rate } else { f64::INFINITY };
    // Irregular ratios (small divisors) exceed the root-test rate; the radius
    // then rests on the root test alone and is flagged as empirical.
    let certified = ratio_rate <= root_rate * (1.0 + 1e-12);
    let rate = if certified { ratio_rate.max(root_rate) } else { root_rate };

    // log of the majorant  |a_m| g^{-m} (g r)^{len} / (1 - g r)
    let log_am = coeffs[last_nonzero].norm().ln();
    let m = last_nonzero as f64;
    let n = len as f64;
    let log_tail = |r: f64| {
        let gr = rate * r;
        log_am - m * rate.ln() + n * gr.ln() - (1.0 - gr).ln()
    };
    let target = eps.ln();
    let (mut lo, mut hi) = (f64::MIN_POSITIVE.ln(), (1.0 / rate).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_tail(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SafeRadius {
        radius: lo.exp(),
        root_test_radius,
        degenerate: false,
        certified,
    })
}

/// A power series `Σ a_n (z − center)^n` truncated after `coeffs.len()` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    pub center: Complex,
    pub coeffs: Vec<Complex>,
    pub safe_radius: f64,
    pub tail_eps: f64,
    pub radius_info: SafeRadius,
}

impl TruncatedSeries {
    /// Builds a series and computes its safe radius. Lists shorter than
    /// [`MIN_CERTIFIED_TERMS`] are exact polynomials with an infinite radius.
    pub fn new(center: Complex, coeffs: Vec<Complex>, tail_eps: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::BadParams("series needs at least one coefficient".into()));
        }
        let radius_info = if coeffs.len() < MIN_CERTIFIED_TERMS {
            SafeRadius::polynomial()
        } else {
            safe_radius_estimate(&coeffs, tail_eps)?
        };
        Ok(TruncatedSeries {
            center,
            coeffs,
            safe_radius: radius_info.radius,
            tail_eps,
            radius_info,
        })
    }

    pub fn at_origin(coeffs: Vec<Complex>) -> Result<Self> {
        Self::new(ZERO, coeffs, DEFAULT_TAIL_EPS)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Horner evaluation, checked against the safe radius.
    pub fn eval(&self, z: Complex) -> Result<Complex> {
        let distance = (z - self.center).norm();
        if distance > self.safe_radius {
            return Err(Error::OutOfSafeRadius {
                distance,
                radius: self.safe_radius,
            });
        }
        Ok(self.eval_unchecked(z))
    }

    /// Horner evaluation without the radius check.
    #[inline]
    pub fn eval_unchecked(&self, z: Complex) -> Complex {
        let x = z - self.center;
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * x + a)
    }

    /// Value and first derivative in one Horner pass, without the radius check.
    #[inline]
    pub fn eval_with_derivative_unchecked(&self, z: Complex) -> (Complex, Complex) {
        let x = z - self.center;
        let mut p = ZERO;
        let mut dp = ZERO;
        for &a in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + a;
        }
        (p, dp)
    }

    /// Termwise derivative; the safe radius is recomputed.
    pub fn derivative(&self) -> TruncatedSeries {
        let coeffs: Vec<Complex> = if self.coeffs.len() <= 1 {
            vec![ZERO]
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, &a)| a * n as f64)
                .collect()
        };
        TruncatedSeries::new(self.center, coeffs, self.tail_eps)
            .expect("derivative of a valid series")
    }

    /// Compositional inverse `t` with `s(t(w)) = w + O(w^{terms+1})`.
    ///
    /// Requires `a_0 = 0` (relative to the center, i.e. a germ fixing the
    /// origin) and `a_1 ≠ 0`. Computed by Newton's method on series
    /// composition, doubling the attained degree each round.
    pub fn reversion(&self, terms: usize) -> Result<TruncatedSeries> {
        if self.center.norm() != 0.0 || self.coeffs[0].norm() != 0.0 {
            return Err(Error::BadParams(
                "reversion needs a series at 0 with zero constant term".into(),
            ));
        }
        let a1 = self.coeffs.get(1).copied().unwrap_or(ZERO);
        if a1.norm() == 0.0 {
            return Err(Error::NotInvertible);
        }
        let n = terms + 1;
        let s: Vec<Complex> = (0..n).map(|i| self.coeffs.get(i).copied().unwrap_or(ZERO)).collect();
        let ds: Vec<Complex> = (1..=n)
            .map(|i| s.get(i).copied().unwrap_or(ZERO) * i as f64)
            .collect();

        let mut t = vec![ZERO; n];
        if n > 1 {
            t[1] = ONE / a1;
        }
        let mut prec = 2usize;
        while prec < n {
            prec = (2 * prec).min(n);
            let tp = &t[..prec];
            let mut g = compose(&s[..prec], tp, prec);
            if prec > 1 {
                g[1] -= ONE;
            }
            let dg = compose(&ds[..prec], tp, prec);
            let corr = div(&g, &dg, prec);
            for i in 0..prec {
                t[i] -= corr[i];
            }
            t[0] = ZERO;
            if !t.iter().all(|c| crate::cplx::is_finite(*c)) {
                return Err(Error::Overflow);
            }
        }
        // One more polishing step at full length.
        let mut g = compose(&s, &t, n);
        if n > 1 {
            g[1] -= ONE;
        }
        let dg = compose(&ds, &t, n);
        let corr = div(&g, &dg, n);
        for i in 0..n {
            t[i] -= corr[i];
        }
        t[0] = ZERO;
        TruncatedSeries::new(ZERO, t, self.tail_eps)
    }

    /// Persistence document with the given provenance record.
    pub fn to_document(&self, provenance: serde_json::Value) -> SeriesDocument {
        SeriesDocument {
            center: self.center,
            coeffs: self.coeffs.clone(),
            safe_radius: self.safe_radius,
            tail_eps: self.tail_eps,
            provenance,
        }
    }

    /// Rebuilds a series from a document. The stored safe radius is kept.
    pub fn from_document(doc: &SeriesDocument) -> Result<Self> {
        let mut s = TruncatedSeries::new(doc.center, doc.coeffs.clone(), doc.tail_eps)?;
        s.safe_radius = doc.safe_radius;
        Ok(s)
    }
}

/// JSON persistence format of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    #[serde(with = "crate::cplx::pair")]
    pub center: Complex,
    #[serde(with = "crate::cplx::pairs")]
    pub coeffs: Vec<Complex>,
    #[serde(with = "crate::cplx::finite_or_null")]
    pub safe_radius: f64,
    pub tail_eps: f64,
    pub provenance: serde_json::Value,
}

/// Cauchy product truncated to `n` terms.
pub fn mul(a: &[Complex], b: &[Complex], n: usize) -> Vec<Complex> {
    let mut out = vec![ZERO; n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai.norm_sqr() == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `outer(inner(w))` truncated to `n` terms; `inner` must have zero constant term.
pub fn compose(outer: &[Complex], inner: &[Complex], n: usize) -> Vec<Complex> {
    debug_assert!(inner.first().is_none_or(|c| c.norm() == 0.0));
    let k = outer.len().min(n);
    let mut acc = vec![ZERO; n];
    for i in (0..k).rev() {
        acc = mul(&acc, inner, n);
        acc[0] += outer[i];
    }
    acc
}

/// `a / b` truncated to `n` terms; `b[0] ≠ 0`.
pub fn div(a: &[Complex], b: &[Complex], n: usize) -> Vec<Complex> {
    let b0 = b[0];
    let mut q = vec![ZERO; n];
    for k in 0..n {
        let mut acc = a.get(k).copied().unwrap_or(ZERO);
        for j in 1..=k.min(b.len().saturating_sub(1)) {
            acc -= b[j] * q[k - j];
        }
        q[k] = acc / b0;
    }
    q
}
