//! Integrals of the spherical derivative `P^# = 2|P'|/(1+|P|²)` over the unit
//! disk, the bound `∬_𝔻 P^# <= 2π√n`, and empirical degree exponents.

use crate::cplx::num;
use crate::poincare::least_squares;
use crate::{Complex, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Evaluation budget of the adaptive quadrature.
pub const EVALUATION_BUDGET: u64 = 100_000_000;
/// Largest iterate depth accepted by [`iterate_family_integrals`].
pub const MAX_ITERATE_DEPTH: usize = 14;
const MAX_INITIAL_CELLS: usize = 1_000_000;
const MIN_CELL: f64 = 1e-10;
/// Samples used by the Monte Carlo fallback.
pub const MONTE_CARLO_SAMPLES: usize = 1 << 20;
/// Past this modulus iterates are tracked by logarithms.
const LOG_THRESHOLD: f64 = 1e100;

/// A polynomial that can be evaluated with its derivative.
pub trait PolyEvaluator: Sync {
    fn degree(&self) -> usize;
    fn eval_with_derivative(&self, z: Complex) -> (Complex, Complex);

    /// `2|P'(z)| / (1 + |P(z)|²)`.
    fn spherical(&self, z: Complex) -> f64 {
        let (p, d) = self.eval_with_derivative(z);
        let m = p.norm();
        if m > LOG_THRESHOLD {
            2.0 * d.norm() / m / m
        } else {
            2.0 * d.norm() / (1.0 + m * m)
        }
    }
}

/// `zⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial(pub usize);

impl PolyEvaluator for Monomial {
    fn degree(&self) -> usize {
        self.0
    }

    fn eval_with_derivative(&self, z: Complex) -> (Complex, Complex) {
        let n = self.0 as i32;
        if n == 0 {
            return (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        }
        (z.powi(n), z.powi(n - 1) * n as f64)
    }

    fn spherical(&self, z: Complex) -> f64 {
        let n = self.0 as f64;
        if self.0 == 0 {
            return 0.0;
        }
        let r = z.norm();
        if r == 0.0 {
            return if self.0 == 1 { 2.0 } else { 0.0 };
        }
        // 2n r^{n−1} / (1 + r^{2n}) in logs
        let log_rn = n * r.ln();
        let log_num = (2.0 * n).ln() + (n - 1.0) * r.ln();
        let log_den = if log_rn > 0.0 {
            2.0 * log_rn + (-2.0 * log_rn).exp().ln_1p()
        } else {
            (2.0 * log_rn).exp().ln_1p()
        };
        (log_num - log_den).exp()
    }
}

/// `P^∘n` for `P(z) = z² + c`, of degree `2ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateFamily {
    pub c: Complex,
    pub n: usize,
}

impl PolyEvaluator for IterateFamily {
    fn degree(&self) -> usize {
        1 << self.n
    }

    fn eval_with_derivative(&self, z: Complex) -> (Complex, Complex) {
        let (mut u, mut d) = (z, Complex::new(1.0, 0.0));
        for _ in 0..self.n {
            d *= 2.0 * u;
            u = u * u + self.c;
        }
        (u, d)
    }

    fn spherical(&self, z: Complex) -> f64 {
        let (mut u, mut d) = (z, Complex::new(1.0, 0.0));
        for j in 0..self.n {
            if u.norm() > LOG_THRESHOLD {
                // |u| squares and |d| gains a factor 2|u| per remaining step
                let m = (self.n - j) as i32;
                let log_u = u.norm().ln();
                let log_d = d.norm().ln() + m as f64 * std::f64::consts::LN_2 + log_u * (2f64.powi(m) - 1.0);
                return 2.0 * (log_d - 2.0 * log_u * 2f64.powi(m)).exp();
            }
            d *= 2.0 * u;
            u = u * u + self.c;
        }
        let m = u.norm();
        if m > LOG_THRESHOLD {
            2.0 * (d.norm().ln() - 2.0 * m.ln()).exp()
        } else {
            2.0 * d.norm() / (1.0 + m * m)
        }
    }
}

/// Polynomial from coefficients `a_0, a_1, …` (Horner).
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(pub Vec<Complex>);

impl PolyEvaluator for Coefficients {
    fn degree(&self) -> usize {
        self.0.iter().rposition(|a| *a != Complex::new(0.0, 0.0)).unwrap_or(0)
    }

    fn eval_with_derivative(&self, z: Complex) -> (Complex, Complex) {
        let mut p = Complex::new(0.0, 0.0);
        let mut d = Complex::new(0.0, 0.0);
        for a in self.0.iter().rev() {
            d = d * z + p;
            p = p * z + a;
        }
        (p, d)
    }
}

/// `2|P'(z)| / (1 + |P(z)|²)`.
pub fn spherical_derivative(p: &dyn PolyEvaluator, z: Complex) -> f64 {
    p.spherical(z)
}

/// How an [`IntegralEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adaptive,
    /// Stratified sampling after the adaptive budget ran out; the error bound
    /// is three standard errors.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub evaluations: u64,
    pub degree: usize,
    pub method: Method,
}

impl IntegralEstimate {
    /// `2π√n`.
    pub fn cs_bound(&self) -> f64 {
        TAU * (self.degree as f64).sqrt()
    }

    pub fn satisfies_cs_bound(&self) -> bool {
        self.value <= self.cs_bound() + self.error_bound
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    r0: f64,
    r1: f64,
    t0: f64,
    t1: f64,
}

/// A quadrature cell with its Richardson value and error indicators.
#[derive(Debug, Clone, Copy)]
struct Leaf {
    cell: Cell,
    value: f64,
    /// Richardson discrepancy `|value − fine| = |fine − coarse| / 3`.
    discrepancy: f64,
    /// One-dimensional midpoint discrepancies along `r` and `θ`.
    radial: f64,
    angular: f64,
}

const EVALS_PER_CELL: u64 = 9;

impl Cell {
    fn evaluate(self, p: &dyn PolyEvaluator) -> Leaf {
        let (dr, dt) = (self.r1 - self.r0, self.t1 - self.t0);
        let g = |r: f64, t: f64| p.spherical(Complex::from_polar(r, t)) * r;
        let (rm, tm) = (self.r0 + 0.5 * dr, self.t0 + 0.5 * dt);
        let (ra, rb) = (self.r0 + 0.25 * dr, self.r0 + 0.75 * dr);
        let (ta, tb) = (self.t0 + 0.25 * dt, self.t0 + 0.75 * dt);
        let centre = g(rm, tm);
        let quarters = g(ra, ta) + g(ra, tb) + g(rb, ta) + g(rb, tb);
        let along_r = 0.5 * (g(ra, tm) + g(rb, tm));
        let along_t = 0.5 * (g(rm, ta) + g(rm, tb));
        let area = dr * dt;
        let coarse = centre * area;
        let fine = 0.25 * quarters * area;
        Leaf {
            cell: self,
            value: fine + (fine - coarse) / 3.0,
            discrepancy: (fine - coarse).abs() / 3.0,
            radial: (along_r - centre).abs() * area,
            angular: (along_t - centre).abs() * area,
        }
    }

    fn splittable(&self) -> bool {
        (self.r1 - self.r0).max(self.t1 - self.t0) >= MIN_CELL
    }
}

impl Leaf {
    /// Halves the cell along the direction with the larger midpoint error,
    /// or both ways when neither dominates.
    fn children(&self) -> Vec<Cell> {
        let c = self.cell;
        let (dr, dt) = (c.r1 - c.r0, c.t1 - c.t0);
        let (rm, tm) = (c.r0 + 0.5 * dr, c.t0 + 0.5 * dt);
        let split_r = [Cell { r1: rm, ..c }, Cell { r0: rm, ..c }];
        if self.radial > 2.0 * self.angular {
            split_r.to_vec()
        } else if self.angular > 2.0 * self.radial {
            vec![Cell { t1: tm, ..c }, Cell { t0: tm, ..c }]
        } else {
            split_r
                .iter()
                .flat_map(|h| [Cell { t1: tm, ..*h }, Cell { t0: tm, ..*h }])
                .collect()
        }
    }
}

fn initial_cells(degree: usize) -> Vec<Cell> {
    let d = degree.max(1) as f64;
    let radial = ((d / 2.0).ceil() as usize).max(16);
    let angular = ((PI * d).ceil() as usize)
        .min(MAX_INITIAL_CELLS / radial)
        .max(32);
    let mut cells = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        for j in 0..angular {
            cells.push(Cell {
                r0: i as f64 / radial as f64,
                r1: (i + 1) as f64 / radial as f64,
                t0: TAU * j as f64 / angular as f64,
                t1: TAU * (j + 1) as f64 / angular as f64,
            });
        }
    }
    cells
}

/// Adaptive polar quadrature of `∬_𝔻 P^#`.
///
/// Every cell compares its one-point midpoint value with the 2×2 midpoint
/// value and contributes the Richardson combination. While the summed
/// Richardson discrepancy exceeds `tol`, the cells holding the largest half
/// of it are split. The error bound is the final discrepancy sum. Past the evaluation
/// budget the result falls back to stratified Monte Carlo.
pub fn disk_integral(p: &dyn PolyEvaluator, tol: f64) -> Result<IntegralEstimate> {
    match adaptive_integral(p, tol, EVALUATION_BUDGET) {
        Err(Error::BudgetExceeded { evaluations }) => {
            let mut est = monte_carlo_integral(p, MONTE_CARLO_SAMPLES, 0);
            est.evaluations += evaluations;
            Ok(est)
        }
        other => other,
    }
}

fn evaluate_all(cells: Vec<Cell>, p: &dyn PolyEvaluator) -> Vec<Leaf> {
    cells.into_par_iter().map(|c| c.evaluate(p)).collect()
}

/// The adaptive rule alone, failing with [`Error::BudgetExceeded`].
pub fn adaptive_integral(p: &dyn PolyEvaluator, tol: f64, budget: u64) -> Result<IntegralEstimate> {
    if !(tol > 0.0) {
        return Err(Error::BadParams("tolerance must be positive".into()));
    }
    let cells = initial_cells(p.degree());
    let mut evaluations = EVALS_PER_CELL * cells.len() as u64;
    if evaluations > budget {
        return Err(Error::BudgetExceeded { evaluations });
    }
    let mut leaves = evaluate_all(cells, p);
    loop {
        let total: f64 = leaves.iter().map(|l| l.discrepancy).sum();
        if total <= tol {
            break;
        }
        let mut order: Vec<usize> = (0..leaves.len())
            .filter(|&i| leaves[i].cell.splittable())
            .collect();
        if order.is_empty() {
            break;
        }
        order.sort_by(|&a, &b| {
            leaves[b]
                .discrepancy
                .total_cmp(&leaves[a].discrepancy)
                .then(a.cmp(&b))
        });
        let mut chosen = vec![false; leaves.len()];
        let mut acc = 0.0;
        for &i in &order {
            if acc >= 0.5 * total {
                break;
            }
            chosen[i] = true;
            acc += leaves[i].discrepancy;
        }
        let mut kept = Vec::with_capacity(leaves.len());
        let mut fresh = Vec::new();
        for (leaf, split) in leaves.into_iter().zip(chosen) {
            if split {
                fresh.extend(leaf.children());
            } else {
                kept.push(leaf);
            }
        }
        evaluations += EVALS_PER_CELL * fresh.len() as u64;
        if evaluations > budget {
            return Err(Error::BudgetExceeded { evaluations });
        }
        kept.extend(evaluate_all(fresh, p));
        leaves = kept;
    }
    Ok(IntegralEstimate {
        value: leaves.iter().map(|l| l.value).sum(),
        error_bound: leaves.iter().map(|l| l.discrepancy).sum(),
        evaluations,
        degree: p.degree(),
        method: Method::Adaptive,
    })
}

/// Stratified Monte Carlo on `𝔻` (one uniform point per equal-area cell of a
/// polar grid); the error bound is three standard errors.
pub fn monte_carlo_integral(p: &dyn PolyEvaluator, samples: usize, seed: u64) -> IntegralEstimate {
    let side = (samples as f64).sqrt().ceil().max(1.0) as usize;
    let rows: Vec<(f64, f64)> = (0..side)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for j in 0..side {
                let u = (i as f64 + rng.gen::<f64>()) / side as f64;
                let t = TAU * (j as f64 + rng.gen::<f64>()) / side as f64;
                let v = p.spherical(Complex::from_polar(u.sqrt(), t));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let n = (side * side) as f64;
    let (s, s2) = rows.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    IntegralEstimate {
        value: PI * mean,
        error_bound: 3.0 * PI * (var / n).sqrt(),
        evaluations: n as u64,
        degree: p.degree(),
        method: Method::MonteCarlo,
    }
}

/// `∬_𝔻 (P^∘n)^#` for `n = 1..=n_max`, `P = z² + c`.
pub fn iterate_family_integrals(c: Complex, n_max: usize, tol: f64) -> Result<Vec<IntegralEstimate>> {
    if n_max > MAX_ITERATE_DEPTH {
        return Err(Error::BadParams(format!(
            "n_max = {n_max} exceeds {MAX_ITERATE_DEPTH}"
        )));
    }
    (1..=n_max)
        .map(|n| disk_integral(&IterateFamily { c, n }, tol))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// `(ln degree, ln value)`, sorted by degree.
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    /// `1/2 − slope`.
    pub alpha_hat: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares slope of `ln value` against `ln degree`.
pub fn exponent_fit(estimates: &[IntegralEstimate]) -> Result<ExponentFit> {
    let mut pairs: Vec<(usize, f64)> = estimates.iter().map(|e| (e.degree, e.value)).collect();
    pairs.sort_by_key(|p| p.0);
    pairs.dedup_by_key(|p| p.0);
    if pairs.len() < 4 || pairs.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::InsufficientData(
            "exponent fit needs >= 4 distinct degrees with positive values".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = pairs
        .into_iter()
        .map(|(d, v)| ((d as f64).ln(), v.ln()))
        .collect();
    let (slope, intercept) = least_squares(&pairs);
    let rss: f64 = pairs
        .iter()
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(ExponentFit {
        residual: (rss / pairs.len() as f64).sqrt(),
        alpha_hat: 0.5 - slope,
        slope,
        pairs,
    })
}

pub fn write_csv<W: Write>(estimates: &[IntegralEstimate], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::OutOfDomain(format!("csv: {e}"));
    wr.write_record([
        "degree",
        "value=integral over unit disk of 2|P'|/(1+|P|^2) dx dy",
        "error_bound",
        "cs_bound=2*pi*sqrt(degree)",
        "evaluations",
        "method",
    ])
    .map_err(io)?;
    for e in estimates {
        wr.write_record([
            e.degree.to_string(),
            num(e.value),
            num(e.error_bound),
            num(e.cs_bound()),
            e.evaluations.to_string(),
            serde_json::to_value(e.method)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::OutOfDomain(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tanh-sinh rule for `∫₀¹ g`.
    fn tanh_sinh(g: impl Fn(f64) -> f64) -> f64 {
        let h = 1.0 / 64.0;
        let mut sum = 0.0;
        for k in -400i32..=400 {
            let t = k as f64 * h;
            let s = 0.5 * PI * t.sinh();
            let x = 0.5 * (1.0 + s.tanh());
            let w = 0.25 * PI * t.cosh() / s.cosh().powi(2);
            if x > 0.0 && x < 1.0 && w > 0.0 {
                sum += w * g(x);
            }
        }
        sum * h
    }

    fn monomial_oracle(n: usize) -> f64 {
        4.0 * PI * tanh_sinh(|u| u.powf(1.0 / n as f64) / (1.0 + u * u))
    }

    #[test]
    fn oracle_sanity() {
        assert!((monomial_oracle(1) - TAU * 2f64.ln()).abs() < 1e-13);
        assert!((4.0 * tanh_sinh(|u| 1.0 / (1.0 + u * u)) - PI).abs() < 1e-13);
    }

    #[test]
    fn spherical_examples() {
        let z0 = Complex::new(0.0, 0.0);
        assert_eq!(spherical_derivative(&Monomial(1), z0), 2.0);
        let unit = Complex::from_polar(1.0, 0.3);
        assert!((spherical_derivative(&Monomial(1), unit) - 1.0).abs() < 1e-15);
        assert!((spherical_derivative(&Monomial(2), Complex::new(1.0, 0.0)) - 2.0).abs() < 1e-15);
        let q = Coefficients(vec![z0, z0, Complex::new(1.0, 0.0)]);
        assert!((spherical_derivative(&q, unit) - 2.0).abs() < 1e-14);
        assert_eq!(q.degree(), 2);
    }

    #[test]
    fn log_safe_paths_agree() {
        let fam = IterateFamily { c: Complex::new(-1.0, 0.0), n: 6 };
        for &z in &[Complex::new(0.9, 0.5), Complex::new(0.3, -0.2), Complex::new(1.3, 0.1)] {
            let (p, d) = fam.eval_with_derivative(z);
            let direct = 2.0 * d.norm() / (1.0 + p.norm_sqr());
            assert!((fam.spherical(z) - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
        let deep = IterateFamily { c: Complex::new(-1.0, 0.0), n: 14 };
        let v = deep.spherical(Complex::new(1.0, 0.9));
        assert!(v.is_finite() && v >= 0.0);
        let m = Monomial(7);
        let z = Complex::new(0.8, 0.4);
        let (p, d) = m.eval_with_derivative(z);
        assert!((m.spherical(z) - 2.0 * d.norm() / (1.0 + p.norm_sqr())).abs() < 1e-14);
    }

    #[test]
    fn degree_one_closed_form() {
        let est = disk_integral(&Monomial(1), 1e-8).unwrap();
        assert!((est.value - TAU * 2f64.ln()).abs() < 1e-6, "{est:?}");
        assert!(est.satisfies_cs_bound());
    }

    #[test]
    fn monomials_match_oracle() {
        for n in [2usize, 8, 64, 512] {
            let tol = 1e-4;
            let est = disk_integral(&Monomial(n), tol).unwrap();
            let oracle = monomial_oracle(n);
            assert!((est.value - oracle).abs() < tol.max(1e-8), "n = {n}: {} vs {oracle}", est.value);
            assert!(est.satisfies_cs_bound());
        }
    }

    #[test]
    fn c_zero_family_is_monomial() {
        let fam = iterate_family_integrals(Complex::new(0.0, 0.0), 4, 1e-4).unwrap();
        for (n, est) in fam.iter().enumerate() {
            let oracle = monomial_oracle(1 << (n + 1));
            assert!((est.value - oracle).abs() < 1e-4);
        }
    }

    #[test]
    fn refinement_stays_within_error_bound() {
        let p = IterateFamily { c: Complex::new(-1.0, 0.0), n: 3 };
        let coarse = disk_integral(&p, 1e-3).unwrap();
        let fine = disk_integral(&p, 1e-4).unwrap();
        assert!((coarse.value - fine.value).abs() < coarse.error_bound);
    }

    #[test]
    fn budget_fallback() {
        let p = IterateFamily { c: Complex::new(-1.0, 0.0), n: 4 };
        assert!(matches!(
            adaptive_integral(&p, 1e-6, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
        let mc = monte_carlo_integral(&p, 1 << 16, 3);
        let reference = disk_integral(&p, 1e-5).unwrap();
        assert!((mc.value - reference.value).abs() < mc.error_bound + reference.error_bound);
        assert_eq!(mc.method, Method::MonteCarlo);
    }

    #[test]
    fn synthetic_fit() {
        let est: Vec<IntegralEstimate> = [3usize, 10, 40, 100, 700]
            .iter()
            .map(|&d| IntegralEstimate {
                value: 2.5 * (d as f64).powf(0.4),
                error_bound: 0.0,
                evaluations: 0,
                degree: d,
                method: Method::Adaptive,
            })
            .collect();
        let fit = exponent_fit(&est).unwrap();
        assert!((fit.alpha_hat - 0.1).abs() < 1e-10);
        assert!(exponent_fit(&est[..3]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let est = iterate_family_integrals(Complex::new(-2.0, 0.0), 3, 1e-3).unwrap();
        let mut buf = Vec::new();
        write_csv(&est, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("degree,"));
        assert!(iterate_family_integrals(Complex::new(0.0, 0.0), 15, 1e-3).is_err());
    }
}
