//! Poincaré functions at repelling fixed points.
//!
//! The local solution `f(z) = z0 + z + O(z²)` of `P(f(z)) = f(μz)` comes from
//! the coefficient recursion `a_n (μⁿ − μ) = Σ_{i+j=n, i,j≥1} a_i a_j`, which
//! holds for both normal forms because `λ + 2z0 = μ` (resp. `2z0 = μ`).
//! Away from the origin `f(z) = P^k(f(z/μ^k))` with the smallest `k` that
//! brings `z/μ^k` into the base disk `|ζ| <= r0`.

use crate::dyncore::{order_from_multiplier, QuadMap};
use crate::series::{TruncatedSeries, DEFAULT_TAIL_EPS, DEFAULT_TERMS};
use crate::{Complex, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// Values above this modulus are reported as [`Error::Overflow`].
pub const OVERFLOW_MODULUS: f64 = 1e290;
/// Past this modulus iteration continues on `log|u|` alone.
pub const LOG_TRACKING_THRESHOLD: f64 = 1e100;
/// Number of circle samples used for the maximum modulus.
pub const ORDER_CIRCLE_SAMPLES: usize = 512;
/// Radii discarded at the start of the order fit.
pub const ORDER_DISCARD: usize = 5;

/// Coefficients `a_0 = z0, a_1 = 1, …` of the Poincaré function at `z0`.
pub fn poincare_coefficients(map: &QuadMap, z0: Complex, terms: usize) -> Result<TruncatedSeries> {
    let fixed_residual = (map.eval(z0) - z0).norm();
    if fixed_residual > 1e-12 * (1.0 + z0.norm()) {
        return Err(Error::NotFixedPoint(fixed_residual));
    }
    let mu = map.multiplier_at(z0);
    if mu.norm() <= 1.0 {
        return Err(Error::NotRepelling(mu.norm()));
    }
    let n_max = terms.max(1);
    let mut a = vec![ZERO; n_max + 1];
    a[0] = z0;
    a[1] = ONE;
    let mut mu_n = mu;
    for n in 2..=n_max {
        mu_n *= mu;
        let mut acc = ZERO;
        for i in 1..n {
            acc += a[i] * a[n - i];
        }
        a[n] = acc / (mu_n - mu);
    }
    TruncatedSeries::new(ZERO, a, DEFAULT_TAIL_EPS)
}

/// Least-squares growth-order estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub rho_hat: f64,
    /// `(log r, log log M(r))` for every computed radius, including the
    /// discarded transient ones.
    pub samples: Vec<(f64, f64)>,
    /// Number of leading samples left out of the fit.
    pub discarded: usize,
    pub rho_formula: f64,
    /// RMS deviation of the fitted line.
    pub fit_residual: f64,
}

impl OrderEstimate {
    pub fn deviation(&self) -> f64 {
        (self.rho_hat - self.rho_formula).abs()
    }
}

/// The Poincaré function of a quadratic map at a repelling fixed point.
#[derive(Debug, Clone)]
pub struct PoincareMap {
    pub map: QuadMap,
    pub z0: Complex,
    pub mu: Complex,
    pub series_f: TruncatedSeries,
    /// Base radius of the pullback.
    pub r0: f64,
    log_mu: f64,
    series_df: TruncatedSeries,
}

impl PoincareMap {
    /// Poincaré function at `z0` with `terms` coefficients.
    ///
    /// `r0` is half the safe radius, further capped where `Σ_{n≥1} |a_n| r^n`
    /// would exceed `max(1, |z0|)` so that the series is summed without
    /// cancellation.
    pub fn new(map: QuadMap, z0: Complex, terms: usize) -> Result<Self> {
        let series_f = poincare_coefficients(&map, z0, terms)?;
        let mu = map.multiplier_at(z0);
        let r0 = base_radius(&series_f);
        let series_df = series_f.derivative();
        Ok(PoincareMap {
            map,
            z0,
            mu,
            log_mu: mu.norm().ln(),
            series_f,
            r0,
            series_df,
        })
    }

    /// Poincaré function at the natural repelling fixed point: `1 − λ` in
    /// `λ`-form, the fixed point of largest multiplier in `c`-form.
    pub fn at_repelling_fixed_point(map: QuadMap, terms: usize) -> Result<Self> {
        let z0 = repelling_fixed_point(&map);
        Self::new(map, z0, terms)
    }

    /// Chebyshev map `z² − 2` at `z0 = 2`.
    pub fn chebyshev() -> Self {
        Self::new(QuadMap::c_form(Complex::new(-2.0, 0.0)), Complex::new(2.0, 0.0), DEFAULT_TERMS)
            .expect("Chebyshev Poincaré function")
    }

    pub fn order(&self) -> f64 {
        order_from_multiplier(self.mu).map(|o| o.rho).unwrap_or(f64::NAN)
    }

    /// Pullback depth `max(0, ⌈log(|z|/r0) / log|μ|⌉)`.
    pub fn depth(&self, z: Complex) -> usize {
        let m = z.norm();
        if m <= self.r0 {
            0
        } else {
            ((m / self.r0).ln() / self.log_mu).ceil().max(0.0) as usize
        }
    }

    fn mu_pow_inv(&self, k: usize) -> Complex {
        ONE / self.mu.powi(k as i32)
    }

    /// `P^k(series_f(z/μ^k))` for an explicit depth `k`; may be non-finite.
    pub fn eval_at_depth(&self, z: Complex, k: usize) -> Complex {
        let zeta = z * self.mu_pow_inv(k);
        let mut u = self.series_f.eval_unchecked(zeta);
        for _ in 0..k {
            u = self.map.eval(u);
        }
        u
    }

    /// `f(z)` on the whole plane.
    pub fn eval(&self, z: Complex) -> Result<Complex> {
        let v = self.eval_at_depth(z, self.depth(z));
        check_overflow(v)
    }

    /// `(f(z), f'(z))`, the derivative by the chain rule through the pullback.
    pub fn eval_with_derivative(&self, z: Complex) -> Result<(Complex, Complex)> {
        let k = self.depth(z);
        let inv = self.mu_pow_inv(k);
        let zeta = z * inv;
        let mut u = self.series_f.eval_unchecked(zeta);
        let mut d = self.series_df.eval_unchecked(zeta) * inv;
        for _ in 0..k {
            d *= self.map.derivative(u);
            u = self.map.eval(u);
        }
        Ok((check_overflow(u)?, check_overflow(d)?))
    }

    pub fn derivative_eval(&self, z: Complex) -> Result<Complex> {
        self.eval_with_derivative(z).map(|(_, d)| d)
    }

    /// `log|f(z)|`, switching to pure log-modulus tracking once `|u|` passes
    /// [`LOG_TRACKING_THRESHOLD`] (there `log|P(u)| = 2 log|u|` to within
    /// `1e-100`).
    pub fn log_modulus_eval(&self, z: Complex) -> f64 {
        let k = self.depth(z);
        let zeta = z * self.mu_pow_inv(k);
        let mut u = self.series_f.eval_unchecked(zeta);
        for j in 0..k {
            if u.norm() > LOG_TRACKING_THRESHOLD {
                let remaining = (k - j) as i32;
                return u.norm().ln() * 2f64.powi(remaining);
            }
            u = self.map.eval(u);
        }
        u.norm().ln()
    }

    /// `f'(z) / (f(z) − w)` without overflow: beyond the tracking threshold
    /// the logarithmic derivative `f'/f` doubles per iteration and `w/f` is
    /// negligible.
    pub fn log_derivative_shifted(&self, z: Complex, w: Complex) -> Complex {
        let k = self.depth(z);
        let inv = self.mu_pow_inv(k);
        let zeta = z * inv;
        let mut u = self.series_f.eval_unchecked(zeta);
        let mut d = self.series_df.eval_unchecked(zeta) * inv;
        for j in 0..k {
            if u.norm() > LOG_TRACKING_THRESHOLD {
                let t = d / u;
                return t * 2f64.powi((k - j) as i32);
            }
            d *= self.map.derivative(u);
            u = self.map.eval(u);
        }
        d / (u - w)
    }

    /// Relative functional-equation residual
    /// `|P(f(z)) − f(μz)| / (1 + |f(μz)|)`.
    pub fn functional_residual(&self, z: Complex) -> Result<f64> {
        let lhs = self.map.eval(self.eval(z)?);
        let rhs = self.eval(self.mu * z)?;
        Ok((lhs - rhs).norm() / (1.0 + rhs.norm()))
    }

    /// Growth order from `M(r)` at `r = |μ|^k r0`, `k = 0..=k_max`; the first
    /// [`ORDER_DISCARD`] radii are dropped from the least-squares fit.
    pub fn order_estimate(&self, k_max: usize) -> Result<OrderEstimate> {
        if k_max < 10 {
            return Err(Error::BadParams("order estimate needs k_max >= 10".into()));
        }
        let rho_formula = order_from_multiplier(self.mu)?.rho;
        let mu_abs = self.mu.norm();
        let mut samples = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let r = mu_abs.powi(k as i32) * self.r0;
            let log_m = (0..ORDER_CIRCLE_SAMPLES)
                .into_par_iter()
                .map(|j| {
                    let z = Complex::from_polar(r, TAU * j as f64 / ORDER_CIRCLE_SAMPLES as f64);
                    self.log_modulus_eval(z)
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            samples.push((r.ln(), log_m.ln()));
        }
        let fit: Vec<(f64, f64)> = samples
            .iter()
            .skip(ORDER_DISCARD)
            .copied()
            .filter(|(_, y)| y.is_finite())
            .collect();
        if fit.len() < 3 {
            return Err(Error::InsufficientData(
                "too few radii with M(r) > e for an order fit".into(),
            ));
        }
        let (slope, intercept) = least_squares(&fit);
        let rss: f64 = fit
            .iter()
            .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
            .sum();
        Ok(OrderEstimate {
            rho_hat: slope,
            samples,
            discarded: ORDER_DISCARD,
            rho_formula,
            fit_residual: (rss / fit.len() as f64).sqrt(),
        })
    }

    /// Provenance record for series persistence.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "poincare",
            "map": self.map,
            "z0": [self.z0.re, self.z0.im],
            "mu": [self.mu.re, self.mu.im],
            "N": self.series_f.coeffs.len() - 1,
            "r0": self.r0,
        })
    }
}

/// Repelling fixed point used by default: `1 − λ` in `λ`-form, otherwise the
/// fixed point with the larger multiplier modulus.
pub fn repelling_fixed_point(map: &QuadMap) -> Complex {
    let (a, b) = map.fixed_points();
    match map {
        QuadMap::LambdaForm { .. } => b,
        QuadMap::CForm { .. } => {
            if map.multiplier_at(a).norm() >= map.multiplier_at(b).norm() {
                a
            } else {
                b
            }
        }
    }
}

fn check_overflow(v: Complex) -> Result<Complex> {
    let m = v.norm();
    if !m.is_finite() || m > OVERFLOW_MODULUS {
        Err(Error::Overflow)
    } else {
        Ok(v)
    }
}

fn base_radius(series: &TruncatedSeries) -> f64 {
    let half_safe = 0.5 * series.safe_radius.min(1e6);
    let budget = series.coeffs[0].norm().max(1.0);
    let tail = |r: f64| -> f64 {
        series
            .coeffs
            .iter()
            .skip(1)
            .rev()
            .fold(0.0, |acc, a| acc * r + a.norm())
            * r
    };
    if tail(half_safe) <= budget {
        return half_safe;
    }
    let (mut lo, mut hi) = (0.0, half_safe);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siegel::RotationAngle;

    fn two_cosh_sqrt(z: Complex) -> Complex {
        2.0 * z.sqrt().cosh()
    }

    #[test]
    fn chebyshev_coefficients_are_two_over_even_factorials() {
        let pm = PoincareMap::chebyshev();
        let mut fact = 1.0f64;
        for (n, a) in pm.series_f.coeffs.iter().enumerate().take(20) {
            if n > 0 {
                fact *= (2 * n - 1) as f64 * (2 * n) as f64;
            }
            let expected = 2.0 / fact;
            assert!((a.re - expected).abs() <= 1e-15 * expected, "n={n}");
            assert_eq!(a.im, 0.0);
        }
        assert_eq!(pm.series_f.coeffs[2], Complex::new(1.0 / 12.0, 0.0));
    }

    #[test]
    fn lambda_form_second_coefficient() {
        let lambda = RotationAngle::golden().lambda;
        let map = QuadMap::lambda_form(lambda);
        let pm = PoincareMap::at_repelling_fixed_point(map, 64).unwrap();
        assert_eq!(pm.z0, 1.0 - lambda);
        let mu = 2.0 - lambda;
        assert!((pm.mu - mu).norm() < 1e-15);
        let a2 = ONE / (mu * mu - mu);
        assert!((pm.series_f.coeffs[2] - a2).norm() < 1e-14 * a2.norm());
        assert_eq!(pm.series_f.coeffs[1], ONE);
    }

    #[test]
    fn rejects_non_repelling() {
        let map = QuadMap::lambda_form(RotationAngle::golden().lambda);
        assert!(matches!(
            poincare_coefficients(&map, ZERO, 16),
            Err(Error::NotRepelling(_))
        ));
        assert!(matches!(
            poincare_coefficients(&map, Complex::new(0.3, 0.0), 16),
            Err(Error::NotFixedPoint(_))
        ));
    }

    #[test]
    fn chebyshev_closed_form_values() {
        let pm = PoincareMap::chebyshev();
        assert_eq!(pm.eval(ZERO).unwrap(), Complex::new(2.0, 0.0));
        let v = pm.eval(Complex::new(25.0, 0.0)).unwrap();
        assert!((v.re - 2.0 * 5f64.cosh()).abs() < 1e-9 * v.re);
        assert!((v.re - 148.419_897_049_575_7).abs() < 1e-9 * 148.42);
        let v = pm.eval(Complex::new(-std::f64::consts::PI.powi(2), 0.0)).unwrap();
        assert!((v - Complex::new(-2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn chebyshev_derivative_values() {
        let pm = PoincareMap::chebyshev();
        assert!((pm.derivative_eval(ZERO).unwrap() - ONE).norm() < 1e-15);
        let d = pm.derivative_eval(Complex::new(25.0, 0.0)).unwrap();
        let expected = 5f64.sinh() / 5.0;
        assert!((d.re - expected).abs() < 1e-9 * expected);
        let z = Complex::new(-4.0 * std::f64::consts::PI.powi(2), 0.0);
        assert!(pm.derivative_eval(z).unwrap().norm() < 1e-9);
    }

    #[test]
    fn chebyshev_random_disk_oracle() {
        let pm = PoincareMap::chebyshev();
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let z = Complex::from_polar(100.0 * ((i as f64 + 0.5) / 200.0).sqrt(), 2.399_963 * i as f64);
            let f = pm.eval(z).unwrap();
            let exact = two_cosh_sqrt(z);
            worst = worst.max((f - exact).norm() / (1.0 + exact.norm()));
        }
        assert!(worst < 1e-9, "{worst:e}");
    }

    #[test]
    fn log_modulus_matches_closed_form_and_direct() {
        let pm = PoincareMap::chebyshev();
        assert!((pm.log_modulus_eval(ZERO) - 2f64.ln()).abs() < 1e-15);
        for r in [1e4f64, 1e8, 1e12, 1e20] {
            let s = r.sqrt();
            let expected = s + (1.0 + (-2.0 * s).exp()).ln();
            let got = pm.log_modulus_eval(Complex::new(r, 0.0));
            assert!((got - expected).abs() < 1e-6 * expected.max(1.0), "r={r}: {got} vs {expected}");
        }
        // |f| ≈ 1e50 where direct evaluation still works
        let z = Complex::new(115.13f64.powi(2), 0.0);
        let direct = pm.eval(z).unwrap().norm().ln();
        assert!((pm.log_modulus_eval(z) - direct).abs() < 1e-8 * direct);
    }

    #[test]
    fn overflow_is_reported() {
        let pm = PoincareMap::chebyshev();
        assert_eq!(pm.eval(Complex::new(1e6, 0.0)), Err(Error::Overflow));
    }
}
