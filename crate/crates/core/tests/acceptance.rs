//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p poincare-lab-core --test acceptance -- --nocapture`.

use poincare_lab::chebfamily::{family_report, find_superattracting};
use poincare_lab::dyncore::QuadMap;
use poincare_lab::exceptional::{exceptional_survey, median, ExceptionalReport};
use poincare_lab::littlewood::{disk_integral, iterate_family_integrals, exponent_fit, IntegralEstimate, Monomial};
use poincare_lab::poincare::PoincareMap;
use poincare_lab::preimage::{argument_principle_count, find_base_preimage, InverseBranch, PreimageReport};
use poincare_lab::sets::{density_estimate, make_powerlaw_set, SetModel};
use poincare_lab::siegel::{RotationAngle, SiegelMap};
use poincare_lab::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{LN_2, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || {
        format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn golden_branch() -> InverseBranch {
    let sm = SiegelMap::lambda_form(RotationAngle::golden(), 256).unwrap();
    let pm = PoincareMap::at_repelling_fixed_point(sm.map, 64).unwrap();
    find_base_preimage(&pm, &sm).unwrap()
}

fn uniform_disk(rng: &mut ChaCha8Rng, r: f64) -> Complex {
    Complex::from_polar(r * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>())
}

/// `2 cosh √z` as an entire function of `z`.
fn two_cosh_sqrt(z: Complex) -> Complex {
    2.0 * z.sqrt().cosh()
}

fn c1_chebyshev_oracle() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let t = Instant::now();
        let pm = PoincareMap::new(QuadMap::c_form(Complex::new(-2.0, 0.0)), Complex::new(2.0, 0.0), 64)
            .map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let z = uniform_disk(&mut rng, 100.0);
            let exact = two_cosh_sqrt(z);
            let f = pm.eval(z).map_err(|e| e.to_string())?;
            worst = worst.max((f - exact).norm() / (1.0 + exact.norm()));
        }
        let elapsed = t.elapsed();
        check(worst < 1e-9, || format!("max relative error {worst:e}"))?;
        within(elapsed, 5.0, "1000 evaluations")?;
        Ok(format!("max relative error {worst:.2e} in {:.2} s", elapsed.as_secs_f64()))
    })
}

fn c2_coefficients() -> Outcome {
    let cheb = PoincareMap::chebyshev();
    let a = &cheb.series_f.coeffs;
    let mut fact = 1.0;
    let mut worst: f64 = 0.0;
    for (n, an) in a.iter().enumerate() {
        if n > 0 {
            fact *= ((2 * n - 1) * (2 * n)) as f64;
        }
        let exact = 2.0 / fact;
        worst = worst.max((an - exact).norm() / exact.max(1.0));
    }
    check((a[2].re - 1.0 / 12.0).abs() <= 1e-15 && a[2].im == 0.0, || format!("a2 = {}", a[2]))?;
    check((a[3].re - 1.0 / 360.0).abs() <= 1e-15 && a[3].im == 0.0, || format!("a3 = {}", a[3]))?;
    check(worst <= 1e-15, || format!("2/(2n)! mismatch {worst:e}"))?;

    let gold = RotationAngle::golden();
    let pm = PoincareMap::at_repelling_fixed_point(QuadMap::lambda_form(gold.lambda), 64).map_err(|e| e.to_string())?;
    let a2 = 1.0 / (pm.mu * pm.mu - pm.mu);
    let da = (pm.series_f.coeffs[2] - a2).norm() / a2.norm();
    check(da < 1e-13, || format!("golden a2 relative error {da:e}"))?;

    let sm = SiegelMap::lambda_form(gold.clone(), 256).map_err(|e| e.to_string())?;
    let lam = gold.lambda;
    let b2 = 1.0 / (lam * lam - lam);
    let db = (sm.series_h.coeffs[2] - b2).norm() / b2.norm();
    check(db < 1e-13, || format!("Siegel b2 relative error {db:e}"))?;
    Ok(format!("Chebyshev 2/(2n)! to {worst:.1e}, golden a2 {da:.1e}, Siegel b2 {db:.1e}"))
}

fn functional_sup(pm: &PoincareMap) -> Result<(f64, f64), String> {
    let (mut res, mut sup): (f64, f64) = (0.0, 0.0);
    for s in [0.5, 5.0, 50.0] {
        for i in 0..256 {
            let z = Complex::from_polar(s * pm.r0, TAU * i as f64 / 256.0);
            let lhs = pm.map.eval(pm.eval(z).map_err(|e| e.to_string())?);
            let rhs = pm.eval(pm.mu * z).map_err(|e| e.to_string())?;
            res = res.max((lhs - rhs).norm());
            sup = sup.max(rhs.norm()).max(lhs.norm());
        }
    }
    Ok((res, sup))
}

fn c3_functional_equations() -> Outcome {
    let mut detail = Vec::new();
    let maps = [
        ("chebyshev", PoincareMap::chebyshev()),
        (
            "golden",
            PoincareMap::at_repelling_fixed_point(QuadMap::lambda_form(RotationAngle::golden().lambda), 64)
                .map_err(|e| e.to_string())?,
        ),
    ];
    for (name, pm) in &maps {
        let (res, sup) = functional_sup(pm)?;
        check(res < 1e-9 * (1.0 + sup), || format!("{name}: residual {res:e}, sup|f| {sup:e}"))?;
        detail.push(format!("{name} {:.1e}", res / (1.0 + sup)));
    }
    let sm = SiegelMap::lambda_form(RotationAngle::golden(), 256).map_err(|e| e.to_string())?;
    let (res, _) = sm.conjugacy_residual(0.5 * sm.radius_hat, 256);
    check(res < 1e-10, || format!("Siegel conjugacy residual {res:e}"))?;
    detail.push(format!("Siegel {res:.1e}"));
    Ok(detail.join(", "))
}

fn c4_argument_counts() -> Outcome {
    let t = Instant::now();
    let pm = PoincareMap::chebyshev();
    let w = Complex::new(2.0, 0.0);
    let mut got = Vec::new();
    for r in [10.0, 100.0, 1000.0, 10000.0f64] {
        let n = argument_principle_count(&pm, w, r).map_err(|e| e.to_string())?;
        let formula = 1 + 2 * (r.sqrt() / TAU).floor() as usize;
        check(n == formula, || format!("r = {r}: count {n}, formula {formula}"))?;
        got.push(n);
    }
    let elapsed = t.elapsed();
    within(elapsed, 10.0, "four counts")?;
    Ok(format!("counts {got:?} in {:.2} s", elapsed.as_secs_f64()))
}

fn c5_orders() -> Outcome {
    let cheb = PoincareMap::chebyshev().order_estimate(40).map_err(|e| e.to_string())?;
    check((0.48..=0.52).contains(&cheb.rho_hat), || format!("Chebyshev rho_hat {}", cheb.rho_hat))?;
    let gold = RotationAngle::golden();
    let pm = PoincareMap::at_repelling_fixed_point(QuadMap::lambda_form(gold.lambda), 64).map_err(|e| e.to_string())?;
    let est = pm.order_estimate(40).map_err(|e| e.to_string())?;
    let formula = LN_2 / (2.0 - gold.lambda).norm().ln();
    let dev = (est.rho_hat - formula).abs();
    check(dev < 0.02, || format!("golden rho_hat {} vs {formula}", est.rho_hat))?;
    Ok(format!(
        "Chebyshev {:.4}, golden {:.4} (formula {:.4})",
        cheb.rho_hat, est.rho_hat, formula
    ))
}

/// Double-exponential quadrature on `[0, 1]`.
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

/// `∬_𝔻 (zⁿ)^# = 4π ∫₀¹ u^{1/n} / (1 + u²) du` after `u = ρⁿ`.
fn monomial_oracle(n: usize) -> f64 {
    4.0 * PI * tanh_sinh(|u| u.powf(1.0 / n as f64) / (1.0 + u * u))
}

fn c6_littlewood() -> Outcome {
    let t = Instant::now();
    let tol = 1e-4;
    let mut all: Vec<IntegralEstimate> = Vec::new();

    let d1 = disk_integral(&Monomial(1), 1e-7).map_err(|e| e.to_string())?;
    let err1 = (d1.value - TAU * LN_2).abs();
    check(err1 <= 1e-6, || format!("degree-1 value {} (error {err1:e})", d1.value))?;
    all.push(d1);

    let mut worst: f64 = 0.0;
    for j in 0..=12 {
        let n = 1usize << j;
        let est = disk_integral(&Monomial(n), tol).map_err(|e| e.to_string())?;
        let err = (est.value - monomial_oracle(n)).abs();
        check(err <= tol.max(1e-8), || format!("z^{n}: value {} error {err:e}", est.value))?;
        worst = worst.max(err);
        all.push(est);
    }

    let fam = iterate_family_integrals(Complex::new(-1.0, 0.0), 10, tol).map_err(|e| e.to_string())?;
    let fit = exponent_fit(&fam).map_err(|e| e.to_string())?;
    check(fit.slope < 0.5, || format!("c = -1 slope {}", fit.slope))?;
    all.extend(fam.iter().copied());

    for e in &all {
        check(e.satisfies_cs_bound(), || {
            format!("degree {}: {} > 2 pi sqrt(n) + {}", e.degree, e.value, e.error_bound)
        })?;
    }
    let elapsed = t.elapsed();
    within(elapsed, 600.0, "Littlewood scan")?;
    Ok(format!(
        "deg-1 error {err1:.1e}, monomial max error {worst:.1e}, c=-1 slope {:.3}, {} estimates within 2 pi sqrt(n), {:.0} s",
        fit.slope,
        all.len(),
        elapsed.as_secs_f64()
    ))
}

fn no_hits_between(rep: &ExceptionalReport, lo: usize, hi: usize) -> usize {
    rep.records
        .iter()
        .filter(|r| !r.hits.iter().any(|&k| (lo..=hi).contains(&k)))
        .count()
}

fn c7_exceptional() -> Outcome {
    let t = Instant::now();
    let ib = golden_branch();
    let target = 1.0 / ib.pm.mu.norm().ln();
    let set = make_powerlaw_set(10.0, 0.5, 0).map_err(|e| e.to_string())?;
    let rep = exceptional_survey(&ib, &set, 50, 30, 0).map_err(|e| e.to_string())?;
    let free = no_hits_between(&rep, 20, 30);
    check(free * 10 >= 9 * rep.records.len(), || format!("(a) only {free} of 50 w escape"))?;
    let finals: Vec<f64> = rep.records.iter().map(|r| r.final_ratio()).collect();
    let m = median(&finals);
    check(m >= 0.9 * target, || format!("(b) median ratio {m} < 0.9 * {target}"))?;

    let empty = exceptional_survey(&ib, &SetModel::empty(), 50, 30, 0).map_err(|e| e.to_string())?;
    let m0 = empty.median_final_ratio;
    check(m0 >= 0.95 * target, || format!("(c) empty-set median {m0} < 0.95 * {target}"))?;
    let elapsed = t.elapsed();
    within(elapsed, 300.0, "survey")?;
    Ok(format!(
        "(a) {free}/50 escape, (b) {:.3} of target, (c) {:.3} of target",
        m / target,
        m0 / target
    ))
}

fn c8_family() -> Outcome {
    let expected = [0.0, -1.0, -1.754877666];
    for (q, &c) in (1..=3).zip(&expected) {
        let r = find_superattracting(q, (-2.0, 0.25)).map_err(|e| e.to_string())?;
        check((r.c.re - c).abs() <= 1e-8, || format!("q = {q}: c_super {}", r.c.re))?;
    }
    let gold = RotationAngle::golden();
    let lam = gold.lambda;
    let rep = family_report(&[1, 2, 3, 4, 5, 6], &gold).map_err(|e| e.to_string())?;
    let row = |q: usize| rep.rows.iter().find(|r| r.q == q).unwrap();

    let p2 = row(2).c_parabolic.ok_or("q = 2 has no parabolic parameter")?;
    check((p2 - Complex::new(-1.25, 0.0)).norm() <= 1e-8, || format!("parabolic q = 2: {p2}"))?;
    let s1 = row(1).c_siegel.ok_or("q = 1 has no Siegel parameter")?;
    let s1_exact = lam / 2.0 - lam * lam / 4.0;
    check((s1 - s1_exact).norm() <= 1e-8, || format!("Siegel q = 1: {s1} vs {s1_exact}"))?;
    let s2 = row(2).c_siegel.ok_or("q = 2 has no Siegel parameter")?;
    let s2_exact = -1.0 + lam / 4.0;
    check((s2 - s2_exact).norm() <= 1e-8, || format!("Siegel q = 2: {s2} vs {s2_exact}"))?;

    let mut mu_max: f64 = 0.0;
    let mut rho_min = f64::INFINITY;
    for r in &rep.rows {
        check(r.errors.is_empty(), || format!("q = {}: {:?}", r.q, r.errors))?;
        let fx = r.fixed.as_ref().ok_or_else(|| format!("q = {}: no fixed-point data", r.q))?;
        check(fx.mu.norm() < 4.0, || format!("q = {}: |mu| = {}", r.q, fx.mu.norm()))?;
        check(fx.rho > 0.5, || format!("q = {}: rho = {}", r.q, fx.rho))?;
        for (name, v) in [("parabolic", r.parabolic_residual), ("siegel", r.siegel_residual)] {
            let v = v.ok_or_else(|| format!("q = {}: no {name} residual", r.q))?;
            check(v < 1e-8, || format!("q = {}: {name} residual {v:e}", r.q))?;
        }
        mu_max = mu_max.max(fx.mu.norm());
        rho_min = rho_min.min(fx.rho);
    }
    Ok(format!(
        "q = 1..6: max |mu| {mu_max:.4}, min rho {rho_min:.5}, Siegel q=1,2 and parabolic q=2 within 1e-8"
    ))
}

fn c9_consistency() -> Outcome {
    let ib = golden_branch();
    let set = make_powerlaw_set(10.0, 0.5, 0).map_err(|e| e.to_string())?;

    let ws = ib.sm.sub_siegel_sample(20, 42);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for &w in &ws {
        let r = 20.0 * 50f64.powf(rng.gen::<f64>());
        let rep = PreimageReport::build(&ib, &set, w, 20, Some(r)).map_err(|e| e.to_string())?;
        let orbit = rep.orbit_count_within(r);
        let arg = rep.argument_count.unwrap();
        check(orbit <= arg, || format!("w = {w}, r = {r}: orbit {orbit} > argument {arg}"))?;
    }

    for j in 0..20 {
        let r = 1.3 * 2f64.powi(j);
        let est = density_estimate(&set, r, 100_000, j as u64).map_err(|e| e.to_string())?;
        let bound = set.certified_bound(r).map_err(|e| e.to_string())?;
        check(est.value <= bound + 3.0 * est.std_error, || {
            format!("r = {r}: density {} > {bound} + 3 * {}", est.value, est.std_error)
        })?;
    }

    let mut fd_worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for pm in [PoincareMap::chebyshev(), ib.pm.clone()] {
        for _ in 0..50 {
            let z = uniform_disk(&mut rng, 50.0);
            let h = 1e-6 * (1.0 + z.norm());
            let fd = (pm.eval(z + h).map_err(|e| e.to_string())? - pm.eval(z - h).map_err(|e| e.to_string())?) / (2.0 * h);
            let d = pm.derivative_eval(z).map_err(|e| e.to_string())?;
            let rel = (d - fd).norm() / d.norm().max(1e-300);
            check(rel < 1e-6, || format!("z = {z}: f' {d} vs FD {fd}"))?;
            fd_worst = fd_worst.max(rel);
        }
    }

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let rep = exceptional_survey(&ib, &set, 12, 20, 9).unwrap();
            let dens = density_estimate(&set, 300.0, 50_000, 3).unwrap();
            let mut csv = Vec::new();
            PreimageReport::build(&ib, &set, ws[0], 15, None)
                .unwrap()
                .write_csv(&mut csv)
                .unwrap();
            (serde_json::to_string(&rep).unwrap(), serde_json::to_string(&dens).unwrap(), csv)
        })
    };
    let a = run(1);
    let b = run(4);
    let c = run(4);
    check(a == b && b == c, || "reruns differ".into())?;
    Ok(format!(
        "20 (w, r) pairs consistent, 20 radii within 3 sigma, FD max {fd_worst:.1e}, reruns identical"
    ))
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 Chebyshev Poincare oracle", c1_chebyshev_oracle),
        ("2 coefficient oracles", c2_coefficients),
        ("3 functional equations", c3_functional_equations),
        ("4 argument-principle counts", c4_argument_counts),
        ("5 order estimates", c5_orders),
        ("6 Littlewood integrals", c6_littlewood),
        ("7 exceptional-set survey", c7_exceptional),
        ("8 Chebyshev family pipeline", c8_family),
        ("9 consistency suite", c9_consistency),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
