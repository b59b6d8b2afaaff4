//! Quadratics `z² + c` near the Chebyshev parameter `c = −2`: superattracting
//! centres, parabolic and Siegel parameters of period-`q` cycles, and the
//! repelling fixed point continuing `z = 2` of `z² − 2`.

use crate::cplx::num;
use crate::dyncore::{cycle_from_point, find_cycle, order_from_multiplier, Cycle, QuadMap};
use crate::siegel::{RotationAngle, SiegelMap};
use crate::{Complex, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Substeps used to carry a cycle from one parameter to the next.
pub const CONTINUATION_STEPS: usize = 32;
/// Linearizer length used for the Siegel-cycle residual of a family row.
pub const FAMILY_SIEGEL_TERMS: usize = 128;
const SCAN_START: f64 = 1e-15;
const SCAN_FACTOR: f64 = 1.02;
const MULTIPLIER_NEWTON_MAX: usize = 60;
const MULTIPLIER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Superattracting,
    Parabolic,
    SiegelTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSearchResult {
    #[serde(with = "crate::cplx::pair")]
    pub c: Complex,
    pub q: usize,
    pub cycle: Cycle,
    #[serde(with = "crate::cplx::pair")]
    pub multiplier: Complex,
    /// `|multiplier − target|`.
    pub residual: f64,
    pub kind: ParamKind,
    /// `|c − seed_c|` for multiplier searches.
    pub seed_distance: Option<f64>,
}

fn critical_orbit(c: f64, q: usize) -> f64 {
    let mut x = 0.0;
    for _ in 0..q {
        x = x * x + c;
    }
    x
}

/// Real `c` with `Q_c^q(0) = 0`, the root closest to the lower end of
/// `bracket`.
///
/// The scan steps geometrically in `c − lo` from `1e-15` (factor 1.02) up to
/// the first sign change, which is then bisected to machine precision.
pub fn find_superattracting(q: usize, bracket: (f64, f64)) -> Result<ParamSearchResult> {
    if q == 0 {
        return Err(Error::BadParams("period must be >= 1".into()));
    }
    let (lo, hi) = bracket;
    if !(lo >= -2.0 && hi <= 0.25 && lo < hi) {
        return Err(Error::BadParams(format!(
            "bracket ({lo}, {hi}) not inside [-2, 0.25]"
        )));
    }
    let mut a = lo + SCAN_START;
    let mut ga = critical_orbit(a, q);
    let mut step = SCAN_START;
    let mut found = None;
    while a < hi {
        if ga == 0.0 {
            found = Some((a, a));
            break;
        }
        step *= SCAN_FACTOR;
        let b = (lo + step).min(hi);
        let gb = critical_orbit(b, q);
        if gb == 0.0 || ga.signum() != gb.signum() {
            found = Some((a, b));
            break;
        }
        a = b;
        ga = gb;
    }
    let (mut a, mut b) = found.ok_or_else(|| {
        Error::NoSignChange(format!("Q_c^{q}(0) keeps its sign on ({lo}, {hi}]"))
    })?;
    let sa = critical_orbit(a, q).signum();
    while b - a > 2.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = critical_orbit(m, q);
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    let c = if critical_orbit(a, q).abs() <= critical_orbit(b, q).abs() { a } else { b };
    let cz = Complex::new(c, 0.0);
    let cycle = cycle_from_point(&QuadMap::c_form(cz), q, Complex::new(0.0, 0.0));
    Ok(ParamSearchResult {
        c: cz,
        q,
        residual: cycle.multiplier.norm(),
        multiplier: cycle.multiplier,
        cycle,
        kind: ParamKind::Superattracting,
        seed_distance: None,
    })
}

/// Period-`q` cycle at `seed_c`, located from the critical orbit.
fn seed_cycle(c: Complex, q: usize) -> Result<Cycle> {
    let map = QuadMap::c_form(c);
    let mut z = Complex::new(0.0, 0.0);
    for _ in 0..2000 * q {
        z = map.eval(z);
        if !(z.norm() < 1e3) {
            break;
        }
    }
    let seeds = [z, Complex::new(0.0, 0.0), Complex::new(0.5, 0.5), Complex::new(-0.5, -0.5)];
    let mut last = Error::NotFound(format!("no period-{q} cycle at c = {c}"));
    for s in seeds {
        if !(s.norm() < 1e3) {
            continue;
        }
        match find_cycle(&map, q, s) {
            Ok(cy) if exact_period(&cy) => return Ok(cy),
            Ok(_) => last = Error::CycleCollision(format!("cycle at c = {c} has period below {q}")),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn exact_period(cycle: &Cycle) -> bool {
    cycle.period == 1 || cycle.min_separation() > 1e-8 * (1.0 + cycle.points[0].norm())
}

/// Carries `cycle` from `from` to `to` in [`CONTINUATION_STEPS`] substeps.
fn track(cycle: &Cycle, from: Complex, to: Complex) -> Result<Cycle> {
    let q = cycle.period;
    let mut z = cycle.points[0];
    let mut current = cycle.clone();
    for s in 1..=CONTINUATION_STEPS {
        let c = from + (to - from) * (s as f64 / CONTINUATION_STEPS as f64);
        current = find_cycle(&QuadMap::c_form(c), q, z)?;
        if !exact_period(&current) {
            return Err(Error::CycleCollision(format!(
                "period-{q} cycle degenerates near c = {c}"
            )));
        }
        z = current.points[0];
    }
    Ok(current)
}

/// Newton in `c` on `multiplier(c) − target` for the period-`q` cycle
/// continued from `seed_c`.
pub fn find_multiplier_param(q: usize, target: Complex, seed_c: Complex) -> Result<ParamSearchResult> {
    if q == 0 {
        return Err(Error::BadParams("period must be >= 1".into()));
    }
    let mut c = seed_c;
    let mut cycle = seed_cycle(c, q)?;
    for _ in 0..MULTIPLIER_NEWTON_MAX {
        let residual = cycle.multiplier - target;
        if residual.norm() < 1e-13 {
            break;
        }
        let h = 1e-7 * (1.0 + c.norm());
        let shifted = track(&cycle, c, c + h)?;
        let slope = (shifted.multiplier - cycle.multiplier) / h;
        if !(slope.norm() > 1e-300) {
            return Err(Error::NoConvergence(format!("multiplier derivative vanishes at c = {c}")));
        }
        let mut step = residual / slope;
        // keep each update modest so the tracked cycle is not exchanged
        let cap = 0.1;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let next = c - step;
        cycle = track(&cycle, c, next)?;
        c = next;
        if step.norm() < 1e-15 * (1.0 + c.norm()) {
            break;
        }
    }
    let residual = (cycle.multiplier - target).norm();
    if !(residual < MULTIPLIER_TOL) {
        return Err(Error::NoConvergence(format!(
            "multiplier residual {residual:e} at c = {c}"
        )));
    }
    let kind = if (target + 1.0).norm() < 1e-12 {
        ParamKind::Parabolic
    } else if (target.norm() - 1.0).abs() < 1e-12 {
        ParamKind::SiegelTarget
    } else {
        ParamKind::Superattracting
    };
    Ok(ParamSearchResult {
        c,
        q,
        multiplier: cycle.multiplier,
        cycle,
        residual,
        kind,
        seed_distance: Some((c - seed_c).norm()),
    })
}

/// Repelling fixed point data continuing `(z, μ, ρ) = (2, 4, 1/2)` from
/// `c = −2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedData {
    #[serde(with = "crate::cplx::pair")]
    pub z_fixed: Complex,
    #[serde(with = "crate::cplx::pair")]
    pub mu: Complex,
    pub rho: f64,
}

/// `z = (1 + √(1 − 4c))/2` (principal root), `μ = 2z`, `ρ = log 2 / log|μ|`.
pub fn repelling_fixed_data(c: Complex) -> Result<FixedData> {
    let disc = Complex::new(1.0, 0.0) - 4.0 * c;
    if disc.norm() == 0.0 {
        return Err(Error::Degenerate("c = 1/4 has a double fixed point".into()));
    }
    let z_fixed = (1.0 + disc.sqrt()) * 0.5;
    let mu = 2.0 * z_fixed;
    let rho = order_from_multiplier(mu)?.rho;
    Ok(FixedData { z_fixed, mu, rho })
}

/// One period of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub q: usize,
    pub c_super: Option<f64>,
    #[serde(with = "crate::cplx::option_pair")]
    pub c_parabolic: Option<Complex>,
    #[serde(with = "crate::cplx::option_pair")]
    pub c_siegel: Option<Complex>,
    /// `|c_siegel − c_parabolic|`.
    pub siegel_parabolic_distance: Option<f64>,
    pub fixed: Option<FixedData>,
    pub parabolic_residual: Option<f64>,
    pub siegel_residual: Option<f64>,
    /// Relative conjugacy residual of the Siegel-cycle linearizer at half its
    /// radius estimate.
    pub linearizer_residual: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyLimits {
    pub c: f64,
    pub mu: f64,
    pub rho: f64,
    /// Largest `q` with a Siegel parameter and its `|c + 2|`, `ρ`.
    pub closest: Option<(usize, f64, f64)>,
    pub c_super_decreasing: bool,
    pub all_mu_below_4: bool,
    pub all_rho_above_half: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub gamma: RotationAngle,
    pub rows: Vec<FamilyRow>,
    pub limits: FamilyLimits,
}

fn family_row(q: usize, gamma: &RotationAngle) -> FamilyRow {
    let mut row = FamilyRow {
        q,
        c_super: None,
        c_parabolic: None,
        c_siegel: None,
        siegel_parabolic_distance: None,
        fixed: None,
        parabolic_residual: None,
        siegel_residual: None,
        linearizer_residual: None,
        errors: Vec::new(),
    };
    let sup = match find_superattracting(q, (-2.0, 0.25)) {
        Ok(s) => s,
        Err(e) => {
            row.errors.push(format!("superattracting: {e}"));
            return row;
        }
    };
    row.c_super = Some(sup.c.re);
    match find_multiplier_param(q, Complex::new(-1.0, 0.0), sup.c) {
        Ok(p) => {
            row.c_parabolic = Some(p.c);
            row.parabolic_residual = Some(p.residual);
        }
        Err(e) => row.errors.push(format!("parabolic: {e}")),
    }
    let siegel_seed = row.c_parabolic.unwrap_or(sup.c);
    match find_multiplier_param(q, gamma.lambda, siegel_seed) {
        Ok(s) => {
            row.c_siegel = Some(s.c);
            row.siegel_residual = Some(s.residual);
            row.siegel_parabolic_distance = row.c_parabolic.map(|p| (s.c - p).norm());
            match repelling_fixed_data(s.c) {
                Ok(f) => row.fixed = Some(f),
                Err(e) => row.errors.push(format!("fixed point: {e}")),
            }
            let map = QuadMap::c_form(s.c);
            match SiegelMap::cycle(map, &s.cycle, FAMILY_SIEGEL_TERMS) {
                Ok(sm) => {
                    let (res, sup_h) = sm.conjugacy_residual(0.5 * sm.radius_hat, 256);
                    row.linearizer_residual = Some(res / (1.0 + sup_h));
                }
                Err(e) => row.errors.push(format!("linearizer: {e}")),
            }
        }
        Err(e) => row.errors.push(format!("siegel: {e}")),
    }
    row
}

/// Superattracting, parabolic and Siegel parameters for each period in
/// `q_list`, with the repelling fixed data at the Siegel parameter.
pub fn family_report(q_list: &[usize], gamma: &RotationAngle) -> Result<FamilyReport> {
    if q_list.is_empty() || q_list.windows(2).any(|w| w[0] >= w[1]) || q_list[0] == 0 {
        return Err(Error::BadParams("q_list must be positive and increasing".into()));
    }
    let rows: Vec<FamilyRow> = q_list.par_iter().map(|&q| family_row(q, gamma)).collect();
    let supers: Vec<f64> = rows.iter().filter_map(|r| r.c_super).collect();
    let fixed: Vec<&FixedData> = rows.iter().filter_map(|r| r.fixed.as_ref()).collect();
    let closest = rows
        .iter()
        .rev()
        .find_map(|r| Some((r.q, (r.c_siegel? + 2.0).norm(), r.fixed?.rho)));
    let limits = FamilyLimits {
        c: -2.0,
        mu: 4.0,
        rho: 0.5,
        closest,
        c_super_decreasing: supers.windows(2).all(|w| w[1] < w[0]),
        all_mu_below_4: fixed.iter().all(|f| f.mu.norm() < 4.0),
        all_rho_above_half: fixed.iter().all(|f| f.rho > 0.5),
    };
    Ok(FamilyReport {
        gamma: gamma.clone(),
        rows,
        limits,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl FamilyReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::OutOfDomain(format!("csv: {e}"));
        wr.write_record([
            "q",
            "c_super_re (Q_c^q(0)=0)",
            "c_parab_re",
            "c_parab_im (cycle multiplier -1)",
            "c_siegel_re",
            "c_siegel_im (cycle multiplier exp(2*pi*i*gamma))",
            "z_re",
            "z_im (z=(1+sqrt(1-4c))/2 at c_siegel)",
            "mu_re",
            "mu_im (mu=2z)",
            "abs_mu=|mu|",
            "rho=ln(2)/ln|mu|",
            "parab_residual=|multiplier+1|",
            "siegel_residual=|multiplier-exp(2*pi*i*gamma)|",
            "linearizer_residual=sup|P^q(h(u))-h(lambda u)|/(1+sup|h|) at |u|=R/2",
            "errors",
        ])
        .map_err(io)?;
        for r in &self.rows {
            let (z, mu) = match r.fixed {
                Some(f) => (Some(f.z_fixed), Some(f.mu)),
                None => (None, None),
            };
            wr.write_record([
                r.q.to_string(),
                opt(r.c_super),
                opt(r.c_parabolic.map(|c| c.re)),
                opt(r.c_parabolic.map(|c| c.im)),
                opt(r.c_siegel.map(|c| c.re)),
                opt(r.c_siegel.map(|c| c.im)),
                opt(z.map(|c| c.re)),
                opt(z.map(|c| c.im)),
                opt(mu.map(|c| c.re)),
                opt(mu.map(|c| c.im)),
                opt(mu.map(|c| c.norm())),
                opt(r.fixed.map(|f| f.rho)),
                opt(r.parabolic_residual),
                opt(r.siegel_residual),
                opt(r.linearizer_residual),
                r.errors.join("; "),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| Error::OutOfDomain(format!("csv: {e}")))?;
        Ok(())
    }
}
