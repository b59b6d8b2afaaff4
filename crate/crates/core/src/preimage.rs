//! Orbit preimages `z⁽ᵏ⁾ = μᵏ g₀(P⁻ᵏ(w))` of points in the sub-Siegel disk.
//!
//! `g₀` is the branch of `f⁻¹` onto one component `U₀` of `f⁻¹(V)`. Since
//! `f(μᵏζ) = Pᵏ(f(ζ))`, every `z⁽ᵏ⁾` solves `f(z) = w`, and the points lie in
//! the distinct components `μᵏU₀`.

use crate::cplx::num;
use crate::poincare::PoincareMap;
use crate::sets::SetModel;
use crate::siegel::SiegelMap;
use crate::{Complex, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Mutex;

/// Grid points per side of the base-preimage search.
pub const BASE_GRID: usize = 41;
/// Boundary probes of `W` used for the constant `C₁`.
pub const BOUNDARY_PROBES: usize = 256;
/// Relative margin applied to the probed boundary maximum.
pub const C1_MARGIN: f64 = 1e-3;
const NEWTON_MAX: usize = 60;
const CORRECTOR_MAX: usize = 12;
const MIN_STEP: f64 = 1e-6;
const INITIAL_NODES: usize = 1 << 10;
const MAX_NODES: usize = 1 << 18;

/// Newton on `f(z) = w` from `z`; `None` if it does not settle.
fn newton(pm: &PoincareMap, w: Complex, mut z: Complex, max_iter: usize) -> Option<Complex> {
    let tol = 1e-12 * (1.0 + w.norm());
    for _ in 0..max_iter {
        let (v, d) = pm.eval_with_derivative(z).ok()?;
        if !(d.norm() > 1e-300) {
            return None;
        }
        let step = (v - w) / d;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            let v = pm.eval(z).ok()?;
            return ((v - w).norm() <= tol).then_some(z);
        }
    }
    let v = pm.eval(z).ok()?;
    ((v - w).norm() <= tol).then_some(z)
}

/// Branch `g₀` of `f⁻¹` from the sub-Siegel disk `W` onto `U₀`.
#[derive(Debug)]
pub struct InverseBranch {
    pub pm: PoincareMap,
    pub sm: SiegelMap,
    /// Solution of `f(z) = center of V` in `U₀`.
    pub base_point: Complex,
    /// `C₁ >= sup_W |g₀|`, fixed at construction.
    pub c1: f64,
    cache: Mutex<Vec<(Complex, Complex)>>,
}

fn grid_solutions(pm: &PoincareMap, target: Complex, radius: f64, side: usize) -> Vec<Complex> {
    let seeds: Vec<Complex> = (0..side * side)
        .map(|i| {
            let (a, b) = (i % side, i / side);
            let x = -radius + 2.0 * radius * a as f64 / (side - 1) as f64;
            let y = -radius + 2.0 * radius * b as f64 / (side - 1) as f64;
            Complex::new(x, y)
        })
        .filter(|z| z.norm() <= radius)
        .collect();
    let found: Vec<Option<Complex>> = seeds
        .par_iter()
        .map(|&s| newton(pm, target, s, NEWTON_MAX))
        .collect();
    let mut unique: Vec<Complex> = Vec::new();
    for z in found.into_iter().flatten() {
        if !unique.iter().any(|u| (u - z).norm() <= 1e-6 * (1.0 + z.norm())) {
            unique.push(z);
        }
    }
    unique
}

/// Smallest modulus first, then smallest argument in `[0, 2π)`.
fn canonical_order(a: &Complex, b: &Complex) -> std::cmp::Ordering {
    let key = |z: &Complex| (z.norm(), z.arg().rem_euclid(TAU));
    let (ka, kb) = (key(a), key(b));
    if (ka.0 - kb.0).abs() <= 1e-9 * ka.0.max(kb.0) {
        ka.1.total_cmp(&kb.1)
    } else {
        ka.0.total_cmp(&kb.0)
    }
}

/// Locates the base preimage of the Siegel center and builds `g₀`.
pub fn find_base_preimage(pm: &PoincareMap, sm: &SiegelMap) -> Result<InverseBranch> {
    find_base_preimage_with_grid(pm, sm, BASE_GRID)
}

/// [`find_base_preimage`] with an explicit grid resolution.
pub fn find_base_preimage_with_grid(pm: &PoincareMap, sm: &SiegelMap, side: usize) -> Result<InverseBranch> {
    if pm.map != sm.map {
        return Err(Error::BadParams("Poincaré and Siegel maps differ".into()));
    }
    if sm.period != 1 {
        return Err(Error::BadParams(
            "orbit preimages need a fixed Siegel disk (period 1)".into(),
        ));
    }
    let side = side.max(3);
    let mut sols = grid_solutions(pm, sm.center, 20.0 * pm.r0, side);
    if sols.is_empty() {
        sols = grid_solutions(pm, sm.center, 40.0 * pm.r0, 2 * side);
    }
    sols.sort_by(canonical_order);
    let base_point = *sols
        .first()
        .ok_or_else(|| Error::NotFound("no preimage of the Siegel center on the search grid".into()))?;
    let mut ib = InverseBranch {
        pm: pm.clone(),
        sm: sm.clone(),
        base_point,
        c1: 0.0,
        cache: Mutex::new(Vec::new()),
    };
    let rho = sm.sub_radius();
    let probes: Vec<Result<(Complex, Complex)>> = (0..BOUNDARY_PROBES)
        .into_par_iter()
        .map(|j| {
            let u = Complex::from_polar(rho, TAU * j as f64 / BOUNDARY_PROBES as f64);
            ib.continue_from_center(u).map(|z| (sm.h_eval_unchecked(u), z))
        })
        .collect();
    let probes = probes.into_iter().collect::<Result<Vec<_>>>()?;
    let sup = probes.iter().map(|(_, z)| z.norm()).fold(0.0, f64::max);
    ib.c1 = sup * (1.0 + C1_MARGIN);
    *ib.cache.lock().unwrap() = probes;
    Ok(ib)
}

impl InverseBranch {
    /// Continuation of `g₀` along `t ↦ h(t·u)`, `t ∈ [0, 1]`.
    fn continue_from_center(&self, u: Complex) -> Result<Complex> {
        let pm = &self.pm;
        let sm = &self.sm;
        let mut z = self.base_point;
        if u == Complex::new(0.0, 0.0) {
            return Ok(z);
        }
        let mut t = 0.0f64;
        let mut dt = 0.125f64;
        let mut w_prev = sm.center;
        while t < 1.0 {
            let t1 = (t + dt).min(1.0);
            let w1 = sm.h_eval_unchecked(u * t1);
            let step = pm.eval_with_derivative(z).ok().and_then(|(_, d)| {
                if d.norm() < 1e-12 {
                    return None;
                }
                let predicted = z + (w1 - w_prev) / d;
                let corrected = newton(pm, w1, predicted, CORRECTOR_MAX)?;
                let jump = (corrected - predicted).norm();
                (jump <= 0.25 * (predicted - z).norm() + 1e-10 * (1.0 + z.norm())).then_some(corrected)
            });
            match step {
                Some(next) => {
                    z = next;
                    t = t1;
                    w_prev = w1;
                    dt = (dt * 1.5).min(0.25);
                }
                None => {
                    dt *= 0.5;
                    if dt < MIN_STEP {
                        return Err(Error::ContinuationLost(format!(
                            "step below {MIN_STEP} at t = {t} toward u = {u}"
                        )));
                    }
                }
            }
        }
        Ok(z)
    }

    /// `g₀(w)` for `w ∈ W`.
    pub fn branch_continue(&self, w: Complex) -> Result<Complex> {
        let u = self.sm.h_inverse(w)?;
        self.branch_continue_coord(u)
    }

    /// `g₀(h(u))` for `|u| <=` the sub-disk radius.
    pub fn branch_continue_coord(&self, u: Complex) -> Result<Complex> {
        if u.norm() > self.sm.sub_radius() * (1.0 + 1e-9) {
            return Err(Error::OutOfDomain(format!(
                "|h⁻¹(w)| = {} exceeds the sub-disk radius",
                u.norm()
            )));
        }
        let z = self.continue_from_center(u)?;
        self.cache
            .lock()
            .unwrap()
            .push((self.sm.h_eval_unchecked(u), z));
        Ok(z)
    }

    /// Snapshot of the continuation table `(w, g₀(w))`.
    pub fn cached_pairs(&self) -> Vec<(Complex, Complex)> {
        self.cache.lock().unwrap().clone()
    }

    /// `f(μᵏζ)` evaluated as `Pᵏ(f(ζ))`, so every intermediate stays near `V`.
    pub fn eval_at_level(&self, zeta: Complex, k: usize) -> Result<Complex> {
        let mut v = self.pm.eval(zeta)?;
        for _ in 0..k {
            v = self.pm.map.eval(v);
        }
        Ok(v)
    }

    /// Radius `|μ|ᵏ C₁` enclosing `z⁽ᵏ⁾`.
    pub fn enclosing_radius(&self, k: usize) -> f64 {
        self.pm.mu.norm().powi(k as i32) * self.c1
    }

    /// `z⁽ᵏ⁾` for `k = 0..=k_max` with their relative residuals
    /// `|f(z) − w| / (1 + |w|)`.
    pub fn orbit_with_residuals(&self, w: Complex, k_max: usize) -> Result<Vec<OrbitPoint>> {
        let u = self.sm.h_inverse(w)?;
        self.orbit_from_coord(u, w, k_max)
    }

    fn orbit_from_coord(&self, u: Complex, w: Complex, k_max: usize) -> Result<Vec<OrbitPoint>> {
        let mut out = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let uk = u * self.sm.rotation.powi(-(k as i32));
            let zeta = self.branch_continue_coord(uk)?;
            let z = self.pm.mu.powi(k as i32) * zeta;
            let residual = (self.eval_at_level(zeta, k)? - w).norm() / (1.0 + w.norm());
            if !(residual < 1e-8) {
                return Err(Error::NoConvergence(format!(
                    "orbit preimage k = {k} has residual {residual:e}"
                )));
            }
            out.push(OrbitPoint {
                k,
                z,
                zeta,
                in_s: false,
                residual,
            });
        }
        Ok(out)
    }

    /// Koebe profile reusing one set of `g₀` samples.
    ///
    /// If `w` is uniform in linearizing coordinates on `W` then so is
    /// `P⁻ᵏ(w)`, hence `μᵏ g₀(w_i)` samples the `k`-th orbit preimages with the
    /// correct distribution for every `k` at once.
    pub fn koebe_profile(
        &self,
        set: &SetModel,
        ks: &[usize],
        samples: usize,
        seed: u64,
    ) -> Result<Vec<KoebeRow>> {
        let coords = self.sm.sub_siegel_sample_with_coords(samples, seed);
        let zetas: Vec<Result<Complex>> = coords
            .par_iter()
            .map(|&(u, _)| self.continue_from_center(u))
            .collect();
        let zetas = zetas.into_iter().collect::<Result<Vec<_>>>()?;
        ks.iter()
            .map(|&k| {
                let scale = self.pm.mu.powi(k as i32);
                let hits = zetas.par_iter().filter(|&&z| set.contains(scale * z)).count();
                let hit_fraction = hits as f64 / samples.max(1) as f64;
                let bound = set.certified_bound(self.enclosing_radius(k))?;
                Ok(KoebeRow {
                    k,
                    hit_fraction,
                    bound,
                    ratio: if bound > 0.0 { hit_fraction / bound } else { 0.0 },
                })
            })
            .collect()
    }
}

/// One orbit preimage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub k: usize,
    #[serde(with = "crate::cplx::pair")]
    pub z: Complex,
    /// `g₀(P⁻ᵏ(w)) = z / μᵏ`.
    #[serde(with = "crate::cplx::pair")]
    pub zeta: Complex,
    pub in_s: bool,
    pub residual: f64,
}

/// `(k, z⁽ᵏ⁾)` for `k = 0..=k_max`.
pub fn orbit_preimages(ib: &InverseBranch, w: Complex, k_max: usize) -> Result<Vec<(usize, Complex)>> {
    Ok(ib
        .orbit_with_residuals(w, k_max)?
        .into_iter()
        .map(|p| (p.k, p.z))
        .collect())
}

/// Details of an argument-principle count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgumentCount {
    pub count: usize,
    /// Radius actually used (after a possible 1% nudge).
    pub radius: f64,
    pub nodes: usize,
    /// Final estimate of `(1/2πi)∮ f'/(f − w) dz`.
    #[serde(with = "crate::cplx::pair")]
    pub estimate: Complex,
}

/// Number of solutions of `f(z) = w` in `𝔻_r`, with multiplicity.
pub fn argument_principle_count(pm: &PoincareMap, w: Complex, r: f64) -> Result<usize> {
    argument_principle_detail(pm, w, r).map(|a| a.count)
}

fn circle_node(r: f64, j: usize, n: usize) -> Complex {
    Complex::from_polar(r, TAU * j as f64 / n as f64)
}

fn min_gap(pm: &PoincareMap, w: Complex, r: f64, n: usize) -> f64 {
    (0..n)
        .into_par_iter()
        .map(|j| match pm.eval(circle_node(r, j, n)) {
            Ok(v) => (v - w).norm(),
            Err(_) => f64::INFINITY,
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Sum of `z f'(z)/(f(z) − w)` over nodes `j = start, start+stride, …` of `n`.
fn node_sum(pm: &PoincareMap, w: Complex, r: f64, n: usize, start: usize, stride: usize) -> Complex {
    let terms: Vec<Complex> = (start..n)
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let z = circle_node(r, j, n);
            z * pm.log_derivative_shifted(z, w)
        })
        .collect();
    terms.into_iter().sum()
}

/// [`argument_principle_count`] with the quadrature details.
///
/// Trapezoid rule on `|z| = r`, doubling the node count from 2¹⁰ until two
/// consecutive estimates lie within `1e-3` of the same integer.
pub fn argument_principle_detail(pm: &PoincareMap, w: Complex, r: f64) -> Result<ArgumentCount> {
    if !(r > 0.0) {
        return Err(Error::BadParams("radius must be positive".into()));
    }
    let mut radius = r;
    if min_gap(pm, w, radius, INITIAL_NODES) <= 1e-6 {
        radius *= 1.01;
        if min_gap(pm, w, radius, INITIAL_NODES) <= 1e-6 {
            return Err(Error::Degenerate(format!(
                "preimage of w on |z| = {r} and on the nudged circle"
            )));
        }
    }
    let mut n = INITIAL_NODES;
    let mut sum = node_sum(pm, w, radius, n, 0, 1);
    let mut prev = sum / n as f64;
    while n < MAX_NODES {
        sum += node_sum(pm, w, radius, 2 * n, 1, 2);
        n *= 2;
        let est = sum / n as f64;
        let k = est.re.round();
        let near = |e: Complex| (e - Complex::new(k, 0.0)).norm() < 1e-3;
        if near(est) && near(prev) && k >= 0.0 {
            return Ok(ArgumentCount {
                count: k as usize,
                radius,
                nodes: n,
                estimate: est,
            });
        }
        prev = est;
    }
    Err(Error::NoConvergence(format!(
        "argument count at r = {radius}: last estimates {prev} after {n} nodes"
    )))
}

/// Empirical Koebe transfer at one `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoebeRow {
    pub k: usize,
    /// Fraction of sampled `w` whose `k`-th orbit preimage lies in `S`.
    pub hit_fraction: f64,
    /// Certified density bound of `S` at radius `|μ|ᵏ C₁`.
    pub bound: f64,
    /// `hit_fraction / bound`, the empirical distortion constant.
    pub ratio: f64,
}

/// `(hit_fraction, certified bound at |μ|ᵏ C₁)` from `samples` points of `W`.
pub fn koebe_density_transfer(
    ib: &InverseBranch,
    set: &SetModel,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let bound = set.certified_bound(ib.enclosing_radius(k))?;
    let coords = ib.sm.sub_siegel_sample_with_coords(samples, seed);
    let hits: Vec<Result<bool>> = coords
        .par_iter()
        .map(|&(u, _)| {
            let uk = u * ib.sm.rotation.powi(-(k as i32));
            let zeta = ib.continue_from_center(uk)?;
            Ok(set.contains(ib.pm.mu.powi(k as i32) * zeta))
        })
        .collect();
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
    let count = hits.iter().filter(|&&h| h).count();
    Ok((count as f64 / samples.max(1) as f64, bound))
}

/// Orbit preimages of one `w` with an optional argument-principle cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageReport {
    #[serde(with = "crate::cplx::pair")]
    pub w: Complex,
    pub r: f64,
    pub orbit_points: Vec<OrbitPoint>,
    pub argument_count: Option<usize>,
    pub notes: Vec<String>,
}

impl PreimageReport {
    pub fn build(ib: &InverseBranch, set: &SetModel, w: Complex, k_max: usize, r: Option<f64>) -> Result<Self> {
        let mut orbit_points = ib.orbit_with_residuals(w, k_max)?;
        for p in &mut orbit_points {
            p.in_s = set.contains(p.z);
        }
        let mut notes = vec![format!(
            "z_k = mu^k g0(P^-k(w)); residual verified at pullback depth k; C1 = {}",
            ib.c1
        )];
        let (r, argument_count) = match r {
            Some(r) => {
                let a = argument_principle_detail(&ib.pm, w, r)?;
                notes.push(format!(
                    "argument principle on |z| = {} with {} nodes",
                    a.radius, a.nodes
                ));
                (r, Some(a.count))
            }
            None => (ib.enclosing_radius(k_max), None),
        };
        Ok(PreimageReport {
            w,
            r,
            orbit_points,
            argument_count,
            notes,
        })
    }

    /// Orbit points with `|z| <= r`.
    pub fn orbit_count_within(&self, r: f64) -> usize {
        self.orbit_points.iter().filter(|p| p.z.norm() <= r).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::OutOfDomain(format!("csv: {e}"));
        wr.write_record([
            "k",
            "re_z",
            "im_z",
            "abs_z=|z|",
            "in_S",
            "residual=|f(z)-w|/(1+|w|)",
        ])
        .map_err(io)?;
        for p in &self.orbit_points {
            wr.write_record([
                p.k.to_string(),
                num(p.z.re),
                num(p.z.im),
                num(p.z.norm()),
                p.in_s.to_string(),
                format!("{:e}", p.residual),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| Error::OutOfDomain(format!("csv: {e}")))?;
        Ok(())
    }
}
