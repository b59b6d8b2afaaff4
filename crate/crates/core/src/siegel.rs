//! Linearization of Siegel fixed points and Siegel cycles.
//!
//! For `P(w) = λw + w²` with `λ = e^{2πiγ}` the linearizer `h(z) = z + Σ b_n z^n`
//! solves `h(λz) = P(h(z))`. Matching coefficients gives
//! `b_n (λⁿ − λ) = Σ_{i+j=n} b_i b_j`. For a cycle of `z² + c` the same
//! recursion is run on the Taylor expansion of `P^q` at a cycle point.

use crate::dyncore::{Cycle, QuadMap};
use crate::series::{TruncatedSeries, DEFAULT_TAIL_EPS};
use crate::{Complex, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// Divisors below this magnitude are treated as exact resonances.
pub const RESONANCE_TOL: f64 = 1e-14;
/// Default series length for Siegel linearizers.
pub const DEFAULT_SIEGEL_TERMS: usize = 256;
/// Fraction of the estimated conformal radius defining the sub-Siegel disk.
pub const DEFAULT_SUB_FRACTION: f64 = 0.5;
/// Absolute conjugacy residual used to cross-check the root-test radius.
pub const RADIUS_RESIDUAL_TOL: f64 = 1e-8;

const CIRCLE_POINTS: usize = 256;
const INVERSE_NEWTON_STEPS: usize = 50;

/// Rotation number `γ`, optionally given by its continued fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationAngle {
    pub gamma: f64,
    /// Partial quotients `[a1, a2, …]` of `γ = 1/(a1 + 1/(a2 + …))`.
    pub cf_terms: Option<Vec<u64>>,
    #[serde(with = "crate::cplx::pair")]
    pub lambda: Complex,
}

impl RotationAngle {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::BadParams(format!("rotation number {gamma} not in (0,1)")));
        }
        Ok(RotationAngle {
            gamma,
            cf_terms: None,
            lambda: Complex::from_polar(1.0, TAU * gamma),
        })
    }

    /// Angle from partial quotients `[a1, a2, …]` (leading zero omitted).
    pub fn from_cf(terms: &[u64]) -> Result<Self> {
        if terms.is_empty() || terms.contains(&0) || (terms.len() == 1 && terms[0] == 1) {
            return Err(Error::BadParams("continued fraction terms must be positive and define a value in (0,1)".into()));
        }
        let mut x = 0.0f64;
        for &a in terms.iter().rev() {
            x = 1.0 / (a as f64 + x);
        }
        let mut angle = RotationAngle::new(x)?;
        angle.cf_terms = Some(terms.to_vec());
        Ok(angle)
    }

    /// Golden mean `γ = (√5 − 1)/2 = [0; 1, 1, 1, …]`.
    pub fn golden() -> Self {
        let gamma = (5f64.sqrt() - 1.0) / 2.0;
        RotationAngle {
            gamma,
            cf_terms: Some(vec![1; 40]),
            lambda: Complex::from_polar(1.0, TAU * gamma),
        }
    }

    /// Bounded-type angle `[0; 2, 20, 1, 1, …]` (40 terms) close to 1/2.
    pub fn near_half() -> Self {
        let mut terms = vec![2, 20];
        terms.resize(40, 1);
        RotationAngle::from_cf(&terms).expect("valid continued fraction")
    }

    /// Small divisor `λⁿ − λ = λ (e^{2πi(n−1)γ} − 1)`, computed from the
    /// reduced angle so that its modulus is `2|sin(π(n−1)γ)|` to rounding.
    pub fn small_divisor(&self, n: usize) -> Complex {
        let k = (n - 1) as f64;
        let p = k * self.gamma;
        // exact product split as p + e
        let e = k.mul_add(self.gamma, -p);
        let theta = p.fract() + e;
        let half = PI * theta;
        self.lambda * Complex::new(0.0, 2.0 * half.sin()) * Complex::from_polar(1.0, half)
    }
}

/// Linearizer coefficients of `λw + w²` for `λ = e^{2πiγ}`, `b_1 = 1`.
pub fn siegel_coefficients(angle: &RotationAngle, terms: usize) -> Result<TruncatedSeries> {
    let n_max = terms.max(1);
    let mut b = vec![ZERO; n_max + 1];
    b[1] = ONE;
    for n in 2..=n_max {
        let divisor = angle.small_divisor(n);
        if divisor.norm() < RESONANCE_TOL {
            return Err(Error::ResonantAngle {
                n,
                divisor: divisor.norm(),
            });
        }
        let mut acc = ZERO;
        for i in 1..n {
            acc += b[i] * b[n - i];
        }
        b[n] = acc / divisor;
    }
    TruncatedSeries::new(ZERO, b, DEFAULT_TAIL_EPS)
}

/// Linearizer of a germ `F(x) = λx + Σ_{m≥2} c_m x^m` fixing the origin,
/// given as `germ = [0, λ, c_2, …]`. Returns `h` with `h(λz) = F(h(z))`,
/// `h'(0) = 1`, up to `terms`.
pub fn linearize_germ(germ: &[Complex], terms: usize) -> Result<TruncatedSeries> {
    if germ.len() < 2 {
        return Err(Error::BadParams("germ needs a linear coefficient".into()));
    }
    let lambda = germ[1];
    let degree = germ.len() - 1;
    let n_max = terms.max(1);
    let mut b = vec![ZERO; n_max + 1];
    b[1] = ONE;
    // pow[m][n] = [h^m]_n for 2 <= m <= degree
    let mut pow = vec![vec![ZERO; n_max + 1]; degree + 1];
    if degree >= 1 {
        pow[1][1] = ONE;
    }
    for (m, row) in pow.iter_mut().enumerate().take(degree.min(n_max) + 1).skip(2) {
        row[m] = ONE;
    }
    let mut lambda_n = lambda;
    for n in 2..=n_max {
        lambda_n *= lambda;
        for m in 2..=degree.min(n) {
            if m == n {
                continue;
            }
            let mut acc = ZERO;
            for j in 1..=(n - m + 1) {
                acc += b[j] * pow[m - 1][n - j];
            }
            pow[m][n] = acc;
        }
        let mut rhs = ZERO;
        for m in 2..=degree.min(n) {
            rhs += germ[m] * pow[m][n];
        }
        let divisor = lambda_n - lambda;
        if divisor.norm() < RESONANCE_TOL {
            return Err(Error::ResonantAngle {
                n,
                divisor: divisor.norm(),
            });
        }
        b[n] = rhs / divisor;
        pow[1][n] = b[n];
    }
    TruncatedSeries::new(ZERO, b, DEFAULT_TAIL_EPS)
}

/// Taylor coefficients of `P^q(ζ + x) − ζ` in `x`; the constant term is
/// dropped to zero (it is the cycle residual).
pub fn iterate_germ(map: &QuadMap, zeta: Complex, q: usize) -> Vec<Complex> {
    let mut p = vec![zeta, ONE];
    for _ in 0..q {
        let sq = crate::series::mul(&p, &p, 2 * p.len() - 1);
        p = match *map {
            QuadMap::CForm { c } => {
                let mut out = sq;
                out[0] += c;
                out
            }
            QuadMap::LambdaForm { lambda } => {
                let mut out = sq;
                for (i, &a) in p.iter().enumerate() {
                    out[i] += lambda * a;
                }
                out
            }
        };
    }
    p[0] = ZERO;
    p
}

/// Conformal-radius estimate of a linearizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Conservative estimate `R̂`.
    #[serde(with = "crate::cplx::finite_or_null")]
    pub radius_hat: f64,
    #[serde(with = "crate::cplx::finite_or_null")]
    pub root_test: f64,
    #[serde(with = "crate::cplx::finite_or_null")]
    pub residual_radius: f64,
    /// The two estimates differ by more than a factor 2.
    pub inconclusive: bool,
}

/// `R̂ = 1 / max |b_n|^{1/n}` over the last quarter of the coefficients,
/// cross-checked against the largest radius where `residual(r)` stays below
/// [`RADIUS_RESIDUAL_TOL`]. `residual(r)` is the sup of the conjugacy residual
/// on the circle `|z| = r`.
pub fn siegel_radius_estimate(
    h: &TruncatedSeries,
    residual: impl Fn(f64) -> f64,
) -> Result<RadiusEstimate> {
    let len = h.coeffs.len();
    if len < 64 {
        return Err(Error::InsufficientData(format!(
            "radius estimate needs >= 64 coefficients, got {len}"
        )));
    }
    let mut rate: f64 = 0.0;
    for (n, b) in h.coeffs.iter().enumerate().skip(3 * len / 4) {
        let m = b.norm();
        if m > 0.0 {
            rate = rate.max((m.ln() / n as f64).exp());
        }
    }
    if rate == 0.0 {
        return Ok(RadiusEstimate {
            radius_hat: f64::INFINITY,
            root_test: f64::INFINITY,
            residual_radius: f64::INFINITY,
            inconclusive: false,
        });
    }
    let root_test = 1.0 / rate;
    let mut residual_radius = 0.0;
    for i in 0..60 {
        let r = root_test * (1.5 - 0.025 * i as f64);
        if r <= 0.0 {
            break;
        }
        if residual(r) < RADIUS_RESIDUAL_TOL {
            residual_radius = r;
            break;
        }
    }
    let inconclusive = residual_radius <= 0.0
        || root_test > 2.0 * residual_radius
        || residual_radius > 2.0 * root_test;
    let radius_hat = if inconclusive {
        root_test.min(residual_radius)
    } else {
        root_test
    };
    Ok(RadiusEstimate {
        radius_hat,
        root_test,
        residual_radius,
        inconclusive,
    })
}

/// Linearizer of a Siegel fixed point or of one point of a Siegel cycle.
#[derive(Debug, Clone)]
pub struct SiegelMap {
    pub angle: RotationAngle,
    pub map: QuadMap,
    /// Period of the Siegel cycle (1 for a fixed point).
    pub period: usize,
    /// Center of the Siegel disk, i.e. the linearized periodic point.
    pub center: Complex,
    /// Multiplier used in the recursion (`λ`, or the cycle multiplier).
    pub rotation: Complex,
    /// `h(z) = center + scale · series_h(z)`; `series_h` has `b_0 = 0`,
    /// `b_1 = 1`.
    pub series_h: TruncatedSeries,
    /// Unit of the linearizing coordinate: 1 for `λ`-form maps, `1/|g_2|`
    /// for cycles with return-map germ `λw + g_2 w² + …` when `|g_2| > 1`.
    pub scale: f64,
    pub radius: RadiusEstimate,
    pub radius_hat: f64,
    pub sub_fraction: f64,
    inverse_seed: TruncatedSeries,
}

impl SiegelMap {
    /// Linearizer of `λw + w²` at `0`.
    pub fn lambda_form(angle: RotationAngle, terms: usize) -> Result<Self> {
        let series = siegel_coefficients(&angle, terms)?;
        let map = QuadMap::lambda_form(angle.lambda);
        let rotation = angle.lambda;
        Self::assemble(angle, map, 1, ZERO, rotation, series, 1.0)
    }

    /// Linearizer of `P^q` at the first point of a Siegel cycle.
    pub fn cycle(map: QuadMap, cycle: &Cycle, terms: usize) -> Result<Self> {
        let zeta = cycle.points[0];
        let germ = iterate_germ(&map, zeta, cycle.period);
        let rotation = germ[1];
        let gamma = (rotation.arg() / TAU).rem_euclid(1.0);
        let angle = RotationAngle::new(gamma)?;
        // small cycle disks: rescale so the coefficients stay O(1)
        let scale = 1.0 / germ.get(2).map_or(1.0, |g| g.norm()).max(1.0);
        let scaled: Vec<Complex> = germ
            .iter()
            .enumerate()
            .map(|(k, g)| g * scale.powi(k as i32 - 1))
            .collect();
        let series = linearize_germ(&scaled, terms)?;
        Self::assemble(angle, map, cycle.period, zeta, rotation, series, scale)
    }

    fn assemble(
        angle: RotationAngle,
        map: QuadMap,
        period: usize,
        center: Complex,
        rotation: Complex,
        series_h: TruncatedSeries,
        scale: f64,
    ) -> Result<Self> {
        let radius = siegel_radius_estimate(&series_h, |r| {
            let (res, _) = conjugacy_residual_raw(&map, period, center, rotation, &series_h, scale, r, CIRCLE_POINTS);
            res / scale
        })?;
        let terms = series_h.coeffs.len() - 1;
        let inverse_seed = series_h.reversion(terms)?;
        Ok(SiegelMap {
            angle,
            map,
            period,
            center,
            rotation,
            radius_hat: radius.radius_hat,
            radius,
            series_h,
            scale,
            sub_fraction: DEFAULT_SUB_FRACTION,
            inverse_seed,
        })
    }

    pub fn with_sub_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::BadParams("sub_fraction must lie in (0,1)".into()));
        }
        self.sub_fraction = fraction;
        Ok(self)
    }

    /// Radius of the sub-Siegel disk in linearizing coordinates.
    pub fn sub_radius(&self) -> f64 {
        self.sub_fraction * self.radius_hat
    }

    /// The return map `P^q` whose linearizer this is.
    pub fn first_return(&self, w: Complex) -> Complex {
        self.map.iterate(w, self.period)
    }

    /// `h(z)` for `|z| <= sub_fraction · R̂`.
    pub fn h_eval(&self, z: Complex) -> Result<Complex> {
        if z.norm() > self.sub_radius() * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!(
                "|z| = {} exceeds the sub-disk radius {}",
                z.norm(),
                self.sub_radius()
            )));
        }
        Ok(self.h_eval_unchecked(z))
    }

    /// `h(z)` without the domain check (any `|z|` below the safe radius).
    pub fn h_eval_unchecked(&self, z: Complex) -> Complex {
        self.center + self.series_h.eval_unchecked(z) * self.scale
    }

    /// `h⁻¹(w)` by the reversion seed and Newton polish, with a homotopy
    /// fallback from the center.
    pub fn h_inverse(&self, w: Complex) -> Result<Complex> {
        let target = (w - self.center) / self.scale;
        let seed = if target.norm() <= self.inverse_seed.safe_radius {
            self.inverse_seed.eval_unchecked(target)
        } else {
            target
        };
        if let Some(z) = self.newton_inverse(target, seed) {
            return Ok(z);
        }
        // Homotopy along t·target.
        let steps = 16;
        let mut z = ZERO;
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            z = self.newton_inverse(target * t, z).ok_or_else(|| {
                Error::OutOfDomain(format!("h⁻¹ Newton failed for w = {w}"))
            })?;
        }
        Ok(z)
    }

    fn newton_inverse(&self, target: Complex, seed: Complex) -> Option<Complex> {
        let limit = self.radius_hat;
        let mut z = seed;
        for _ in 0..INVERSE_NEWTON_STEPS {
            let (v, dv) = self.series_h.eval_with_derivative_unchecked(z);
            if dv.norm() == 0.0 {
                return None;
            }
            let step = (v - target) / dv;
            z -= step;
            if !(z.norm() <= limit) {
                return None;
            }
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                let (v, _) = self.series_h.eval_with_derivative_unchecked(z);
                if (v - target).norm() <= 1e-13 * (1.0 + target.norm()) {
                    return Some(z);
                }
            }
        }
        let (v, _) = self.series_h.eval_with_derivative_unchecked(z);
        ((v - target).norm() <= 1e-12 * (1.0 + target.norm())).then_some(z)
    }

    /// Whether `w` lies in the sub-Siegel disk `W`.
    pub fn in_sub_disk(&self, w: Complex) -> bool {
        match self.h_inverse(w) {
            Ok(u) => u.norm() <= self.sub_radius() * (1.0 + 1e-9),
            Err(_) => false,
        }
    }

    /// `P^{−k}(w) = h(λ^{−k} h⁻¹(w))`, the branch of the inverse fixing `W`
    /// (for a cycle, `P` stands for the return map `P^q`).
    pub fn p_inverse_on_disk(&self, w: Complex, k: usize) -> Result<Complex> {
        if k == 0 {
            return Ok(w);
        }
        let u = self.h_inverse(w)?;
        let uk = u * self.rotation.powi(-(k as i32));
        if uk.norm() > self.sub_radius() * (1.0 + 1e-9) {
            return Err(Error::OutOfDomain(format!(
                "|h⁻¹(w)| = {} outside the sub-disk",
                uk.norm()
            )));
        }
        Ok(self.h_eval_unchecked(uk))
    }

    /// Deterministic points `h(u)` with `u` uniform on the sub-disk.
    pub fn sub_siegel_sample(&self, count: usize, seed: u64) -> Vec<Complex> {
        self.sub_siegel_sample_with_coords(count, seed)
            .into_iter()
            .map(|(_, w)| w)
            .collect()
    }

    /// Like [`SiegelMap::sub_siegel_sample`], also returning the linearizing
    /// coordinate `u` of each sample.
    pub fn sub_siegel_sample_with_coords(&self, count: usize, seed: u64) -> Vec<(Complex, Complex)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = self.sub_radius();
        (0..count)
            .map(|_| {
                let r = rho * rng.gen::<f64>().sqrt();
                let t = TAU * rng.gen::<f64>();
                let u = Complex::from_polar(r, t);
                (u, self.h_eval_unchecked(u))
            })
            .collect()
    }

    /// Sup of `|F(h(z)) − h(λz)|` and of `|h(z)|` over `n` points of `|z| = r`.
    pub fn conjugacy_residual(&self, r: f64, n: usize) -> (f64, f64) {
        conjugacy_residual_raw(
            &self.map,
            self.period,
            self.center,
            self.rotation,
            &self.series_h,
            self.scale,
            r,
            n,
        )
    }

    /// Provenance record for series persistence.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "siegel",
            "map": self.map,
            "period": self.period,
            "center": [self.center.re, self.center.im],
            "gamma": self.angle.gamma,
            "cf_terms": self.angle.cf_terms,
            "N": self.series_h.coeffs.len() - 1,
            "scale": self.scale,
            "radius_hat": self.radius_hat,
            "radius_inconclusive": self.radius.inconclusive,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn conjugacy_residual_raw(
    map: &QuadMap,
    period: usize,
    center: Complex,
    rotation: Complex,
    series: &TruncatedSeries,
    scale: f64,
    r: f64,
    n: usize,
) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut sup_h: f64 = 0.0;
    for j in 0..n {
        let z = Complex::from_polar(r, TAU * j as f64 / n as f64);
        let hz = center + series.eval_unchecked(z) * scale;
        let lhs = map.iterate(hz, period);
        let rhs = center + series.eval_unchecked(rotation * z) * scale;
        let d = (lhs - rhs).norm();
        worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        sup_h = sup_h.max(hz.norm());
    }
    (worst, sup_h)
}
