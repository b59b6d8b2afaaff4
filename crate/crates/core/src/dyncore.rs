//! Quadratic polynomial maps, their fixed points, cycles and multipliers.

use crate::cplx::close;
use crate::{Complex, Error, Result};
use serde::{Deserialize, Serialize};

/// A quadratic polynomial in one of its two normal forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum QuadMap {
    /// `w ↦ λw + w²`, fixed points `0` (multiplier `λ`) and `1 − λ`.
    LambdaForm {
        #[serde(with = "crate::cplx::pair")]
        lambda: Complex,
    },
    /// `z ↦ z² + c`.
    CForm {
        #[serde(with = "crate::cplx::pair")]
        c: Complex,
    },
}

impl QuadMap {
    pub fn lambda_form(lambda: Complex) -> Self {
        QuadMap::LambdaForm { lambda }
    }

    pub fn c_form(c: Complex) -> Self {
        QuadMap::CForm { c }
    }

    #[inline]
    pub fn eval(&self, z: Complex) -> Complex {
        match *self {
            QuadMap::LambdaForm { lambda } => z * (lambda + z),
            QuadMap::CForm { c } => z * z + c,
        }
    }

    /// Derivative of the map at `z`.
    #[inline]
    pub fn derivative(&self, z: Complex) -> Complex {
        match *self {
            QuadMap::LambdaForm { lambda } => lambda + 2.0 * z,
            QuadMap::CForm { .. } => 2.0 * z,
        }
    }

    /// The critical point (`−λ/2` or `0`).
    pub fn critical_point(&self) -> Complex {
        match *self {
            QuadMap::LambdaForm { lambda } => -lambda / 2.0,
            QuadMap::CForm { .. } => Complex::new(0.0, 0.0),
        }
    }

    /// `q`-fold iterate together with its derivative by the chain rule.
    pub fn iterate_with_derivative(&self, z: Complex, q: usize) -> (Complex, Complex) {
        let mut u = z;
        let mut d = Complex::new(1.0, 0.0);
        for _ in 0..q {
            d *= self.derivative(u);
            u = self.eval(u);
        }
        (u, d)
    }

    pub fn iterate(&self, z: Complex, q: usize) -> Complex {
        (0..q).fold(z, |u, _| self.eval(u))
    }

    /// Radius outside of which every orbit escapes to infinity.
    pub fn escape_radius(&self) -> f64 {
        match *self {
            QuadMap::LambdaForm { lambda } => 1.0 + lambda.norm(),
            QuadMap::CForm { c } => 0.5 + (0.25 + c.norm()).sqrt(),
        }
    }

    /// Affinely conjugate `z² + c` form together with the shift `s`, so that
    /// `z = w + s` carries orbits of `self` onto orbits of the returned map.
    pub fn to_c_form(&self) -> (QuadMap, Complex) {
        match *self {
            QuadMap::LambdaForm { lambda } => {
                let c = lambda / 2.0 - lambda * lambda / 4.0;
                (QuadMap::CForm { c }, lambda / 2.0)
            }
            QuadMap::CForm { .. } => (*self, Complex::new(0.0, 0.0)),
        }
    }

    /// Affinely conjugate `λw + w²` form together with the shift `s`, so that
    /// `w = z + s`. For a `z² + c` map the fixed point `(1 − √(1−4c))/2` is sent
    /// to `0`, hence `λ = 1 − √(1−4c)`.
    pub fn to_lambda_form(&self) -> (QuadMap, Complex) {
        match *self {
            QuadMap::LambdaForm { .. } => (*self, Complex::new(0.0, 0.0)),
            QuadMap::CForm { c } => {
                let alpha = (1.0 - (1.0 - 4.0 * c).sqrt()) / 2.0;
                (QuadMap::LambdaForm { lambda: 2.0 * alpha }, -alpha)
            }
        }
    }

    /// Both finite fixed points. A double fixed point is returned twice.
    ///
    /// For `λw + w²` these are exactly `(0, 1 − λ)`; for `z² + c` the roots of
    /// `z² − z + c`, larger real part first.
    pub fn fixed_points(&self) -> (Complex, Complex) {
        match *self {
            QuadMap::LambdaForm { lambda } => (Complex::new(0.0, 0.0), 1.0 - lambda),
            QuadMap::CForm { c } => {
                let disc = (1.0 - 4.0 * c).sqrt();
                let a = (1.0 + disc) / 2.0;
                let b = (1.0 - disc) / 2.0;
                if a.re >= b.re {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        }
    }

    /// Derivative at an arbitrary point; at a fixed point this is its multiplier.
    pub fn multiplier_at(&self, z: Complex) -> Complex {
        self.derivative(z)
    }
}

/// A periodic orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    #[serde(with = "crate::cplx::pairs")]
    pub points: Vec<Complex>,
    pub period: usize,
    #[serde(with = "crate::cplx::pair")]
    pub multiplier: Complex,
}

impl Cycle {
    /// Smallest distance between two distinct points of the cycle.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                best = best.min((self.points[i] - self.points[j]).norm());
            }
        }
        best
    }
}

/// Iteration cap for the damped Newton cycle search.
pub const CYCLE_NEWTON_MAX_ITER: usize = 200;
const CYCLE_TOL: f64 = 1e-12;

/// Locates a cycle of period dividing `q` by damped Newton on `P^q(z) − z`.
///
/// The step is halved until `|P^q(z) − z|` decreases. Parabolic and other
/// degenerate cycles are returned as found.
pub fn find_cycle(map: &QuadMap, q: usize, seed: Complex) -> Result<Cycle> {
    if q == 0 {
        return Err(Error::BadParams("cycle period must be >= 1".into()));
    }
    let residual = |z: Complex| {
        let (u, d) = map.iterate_with_derivative(z, q);
        (u - z, d - 1.0)
    };
    let mut z = seed;
    let (mut f, mut df) = residual(z);
    let mut converged = false;
    for _ in 0..CYCLE_NEWTON_MAX_ITER {
        if !f.norm().is_finite() {
            break;
        }
        if f.norm() < 0.1 * CYCLE_TOL * (1.0 + z.norm()) {
            converged = true;
            break;
        }
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = z - step * t;
            let (fc, dfc) = residual(cand);
            if fc.norm() < f.norm() {
                z = cand;
                f = fc;
                df = dfc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            // Stagnation at rounding level.
            converged = f.norm() < CYCLE_TOL * (1.0 + z.norm());
            break;
        }
    }
    if !converged && f.norm() >= CYCLE_TOL * (1.0 + z.norm()) {
        return Err(Error::NoConvergence(format!(
            "period-{q} cycle from seed {seed}: residual {:e}",
            f.norm()
        )));
    }
    Ok(cycle_from_point(map, q, z))
}

/// Builds the cycle through `z` by forward iteration, with the multiplier as
/// the product of derivatives along the orbit.
pub fn cycle_from_point(map: &QuadMap, q: usize, z: Complex) -> Cycle {
    let mut points = Vec::with_capacity(q);
    let mut u = z;
    let mut multiplier = Complex::new(1.0, 0.0);
    for _ in 0..q {
        points.push(u);
        multiplier *= map.derivative(u);
        u = map.eval(u);
    }
    Cycle {
        points,
        period: q,
        multiplier,
    }
}

/// Checks `|P^q(p) − p| < tol (1 + |p|)` at every cycle point.
pub fn cycle_residual_ok(map: &QuadMap, cycle: &Cycle, tol: f64) -> bool {
    cycle
        .points
        .iter()
        .all(|&p| close(map.iterate(p, cycle.period), p, tol))
}

/// Growth order of the Poincaré function attached to a repelling multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderValue {
    pub rho: f64,
}

/// `ρ = log 2 / log |μ|`.
pub fn order_from_multiplier(mu: Complex) -> Result<OrderValue> {
    let m = mu.norm();
    if m <= 1.0 || !m.is_finite() {
        return Err(Error::NotRepelling(m));
    }
    Ok(OrderValue {
        rho: std::f64::consts::LN_2 / m.ln(),
    })
}

/// `e^{2πiγ}`.
pub fn rotation(gamma: f64) -> Complex {
    Complex::from_polar(1.0, std::f64::consts::TAU * gamma)
}
