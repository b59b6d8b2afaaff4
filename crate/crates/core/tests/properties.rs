use poincare_lab::chebfamily::find_multiplier_param;
use poincare_lab::dyncore::{cycle_from_point, QuadMap};
use poincare_lab::exceptional::exceptional_count;
use poincare_lab::littlewood::{disk_integral, Coefficients};
use poincare_lab::poincare::PoincareMap;
use poincare_lab::preimage::{argument_principle_count, find_base_preimage, InverseBranch};
use poincare_lab::series::{safe_radius_estimate, TruncatedSeries};
use poincare_lab::sets::{density_estimate, make_annular_sectors, make_powerlaw_set};
use poincare_lab::siegel::{RotationAngle, SiegelMap};
use poincare_lab::Complex;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

fn golden_branch() -> &'static InverseBranch {
    static IB: OnceLock<InverseBranch> = OnceLock::new();
    IB.get_or_init(|| {
        let sm = SiegelMap::lambda_form(RotationAngle::golden(), 256).unwrap();
        let pm = PoincareMap::at_repelling_fixed_point(sm.map, 64).unwrap();
        find_base_preimage(&pm, &sm).unwrap()
    })
}

fn chebyshev() -> &'static PoincareMap {
    static PM: OnceLock<PoincareMap> = OnceLock::new();
    PM.get_or_init(PoincareMap::chebyshev)
}

fn polar(r: f64, t: f64) -> Complex {
    Complex::from_polar(r, TAU * t)
}

/// `z + Σ_{n=2}^{len-1} a_n z^n` with `|a_n| <= 1`.
fn unit_series(len: usize) -> impl Strategy<Value = Vec<Complex>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), len - 2).prop_map(|raw| {
        let mut c = vec![Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)];
        c.extend(raw.into_iter().map(|(r, t)| polar(r, t)));
        c
    })
}

/// `k·x mod 1` for `x ∈ (0, 1)`, reduced exactly in integer arithmetic.
fn frac_multiple(x: f64, k: u64) -> f64 {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32 - 1075;
    let mant = (bits & ((1 << 52) - 1)) | (1 << 52);
    let shift = (-exp) as u32;
    let rem = (mant as u128 * k as u128) & ((1u128 << shift) - 1);
    rem as f64 * 2f64.powi(exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_fixed_point_multiplier(t in 1e-3..0.999f64) {
        let lambda = polar(1.0, t);
        let map = QuadMap::lambda_form(lambda);
        let mu = map.multiplier_at(1.0 - lambda);
        prop_assert!((mu - (2.0 - lambda)).norm() <= 1e-15);
        prop_assert!(mu.norm() > 1.0 && mu.norm() < 3.0);
    }

    #[test]
    fn lambda_and_c_forms_conjugate(t in 0.0..1.0f64, r in 0.0..0.3f64, s in 0.0..1.0f64) {
        let lambda = polar(1.0, t);
        let lf = QuadMap::lambda_form(lambda);
        let (cf, shift) = lf.to_c_form();
        let mut w = polar(r, s);
        let mut z = w + shift;
        for _ in 0..5 {
            w = lf.eval(w);
            z = cf.eval(z);
            prop_assert!(((w + shift) - z).norm() <= 1e-12 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn period_two_multiplier_is_derivative_product(cr in -1.2..-0.8f64, ci in -0.2..0.2f64) {
        let c = Complex::new(cr, ci);
        let map = QuadMap::c_form(c);
        // period-2 points solve z² + z + c + 1 = 0
        let disc = (1.0 - 4.0 * (c + 1.0)).sqrt();
        let z1 = (-1.0 + disc) / 2.0;
        let cycle = cycle_from_point(&map, 2, z1);
        let exact = 4.0 * (c + 1.0);
        prop_assert!((cycle.multiplier - exact).norm() <= 1e-12 * (1.0 + exact.norm()));
    }

    #[test]
    fn series_reversion_round_trip(coeffs in unit_series(24), r in 0.0..1.0f64, t in 0.0..1.0f64) {
        let s = TruncatedSeries::at_origin(coeffs).unwrap();
        let inv = s.reversion(64).unwrap();
        let radius = 0.5 * inv.safe_radius.min(s.safe_radius);
        let z = polar(r * radius, t);
        let w = s.eval_unchecked(z);
        let back = inv.eval_unchecked(w);
        prop_assert!((back - z).norm() <= 1e-10, "{} vs {}", back, z);
    }

    #[test]
    fn series_derivative_matches_difference(coeffs in unit_series(24), r in 0.0..1.0f64, t in 0.0..1.0f64) {
        let s = TruncatedSeries::at_origin(coeffs).unwrap();
        let z = polar(r * 0.5 * s.safe_radius.min(0.4), t);
        let h = 1e-5;
        let fd = (s.eval_unchecked(z + h) - s.eval_unchecked(z - h)) / (2.0 * h);
        let d = s.derivative().eval_unchecked(z);
        prop_assert!((fd - d).norm() <= 1e-7 * (1.0 + d.norm()));
    }

    #[test]
    fn safe_radius_monotone_in_eps(coeffs in unit_series(40), e1 in -16.0..-4.0f64, de in 0.0..8.0f64) {
        let small = safe_radius_estimate(&coeffs, 10f64.powf(e1)).unwrap();
        let large = safe_radius_estimate(&coeffs, 10f64.powf(e1 + de)).unwrap();
        prop_assert!(small.radius <= large.radius);
    }

    #[test]
    fn small_divisor_modulus(gamma in 0.01..0.99f64, n in 2usize..=256) {
        let angle = RotationAngle::new(gamma).unwrap();
        let d = angle.small_divisor(n).norm();
        let exact = 2.0 * (PI * frac_multiple(gamma, n as u64 - 1)).sin().abs();
        prop_assert!((d - exact).abs() <= 1e-14);
    }

    #[test]
    fn sub_siegel_disk_forward_invariant(r in 0.0..1.0f64, t in 0.0..1.0f64) {
        let sm = &golden_branch().sm;
        let w = sm.h_eval_unchecked(polar(r.sqrt() * 0.999 * sm.sub_radius(), t));
        prop_assert!(sm.in_sub_disk(w));
        prop_assert!(sm.in_sub_disk(sm.map.eval(w)));
    }

    #[test]
    fn functional_equation_random_points(r in 0.0..1.0f64, t in 0.0..1.0f64) {
        for pm in [chebyshev(), &golden_branch().pm] {
            let z = polar(r * 1e3 * pm.r0, t);
            let res = pm.functional_residual(z).unwrap();
            prop_assert!(res < 1e-9, "z = {}: {:e}", z, res);
        }
    }

    #[test]
    fn pullback_depth_independent(r in 0.0..1.0f64, t in 0.0..1.0f64) {
        for pm in [chebyshev(), &golden_branch().pm] {
            let z = polar(r * 1e4 * pm.r0, t);
            let k = pm.depth(z);
            let a = pm.eval_at_depth(z, k);
            let b = pm.eval_at_depth(z, k + 2);
            prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn membership_is_deterministic(seed in 0u64..1000, r in 1.0..5000.0f64, t in 0.0..1.0f64) {
        let z = polar(r, t);
        let a = make_powerlaw_set(10.0, 0.5, seed).unwrap();
        let b = make_powerlaw_set(10.0, 0.5, seed).unwrap();
        prop_assert_eq!(a.contains(z), a.contains(z));
        prop_assert_eq!(a.contains(z), b.contains(z));
    }

    #[test]
    fn certificate_independent_of_seed(s1 in any::<u64>(), s2 in any::<u64>(), r in 1.0..1e6f64) {
        let a = make_powerlaw_set(3.0, 0.7, s1).unwrap();
        let b = make_powerlaw_set(3.0, 0.7, s2).unwrap();
        prop_assert_eq!(a.certificate(), b.certificate());
        prop_assert_eq!(a.certified_bound(r).unwrap(), b.certified_bound(r).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn density_below_certificate(seed in any::<u64>(), j in 0i32..20, delta in 0.2..1.8f64) {
        let r = 2f64.powi(j);
        for set in [make_powerlaw_set(5.0, delta, seed).unwrap(), make_annular_sectors(5.0, delta).unwrap()] {
            let est = density_estimate(&set, r, 20_000, seed).unwrap();
            let bound = set.certified_bound(r).unwrap();
            prop_assert!(est.value <= bound + 3.0 * est.std_error, "r = {}: {} vs {}", r, est.value, bound);
        }
    }

    #[test]
    fn orbit_preimages_valid(seed in 0u64..10_000, r in 10.0..400.0f64) {
        let ib = golden_branch();
        let w = ib.sm.sub_siegel_sample(1, seed)[0];
        let pts = ib.orbit_with_residuals(w, 14).unwrap();
        for p in &pts {
            prop_assert!(p.residual < 1e-8);
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                prop_assert!((pts[i].z - pts[j].z).norm() > 1e-6);
            }
        }
        let orbit = pts.iter().filter(|p| p.z.norm() <= r).count();
        let count = argument_principle_count(&ib.pm, w, r).unwrap();
        prop_assert!(orbit <= count, "{} > {}", orbit, count);
    }

    #[test]
    fn larger_set_never_increases_counts(seed in 0u64..10_000, c_small in 0.5..5.0f64, grow in 1.0..4.0f64) {
        let ib = golden_branch();
        let w = ib.sm.sub_siegel_sample(1, seed)[0];
        let small = make_annular_sectors(c_small, 0.5).unwrap();
        let large = make_annular_sectors(c_small * grow, 0.5).unwrap();
        let a = exceptional_count(ib, &small, w, 20).unwrap();
        let b = exceptional_count(ib, &large, w, 20).unwrap();
        for (x, y) in a.ratios.iter().zip(&b.ratios) {
            prop_assert!(y.count <= x.count);
        }
    }

    #[test]
    fn cauchy_schwarz_bound(raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..6)) {
        let coeffs: Vec<Complex> = raw.into_iter().map(|(r, t)| polar(0.1 + r, t)).collect();
        let p = Coefficients(coeffs);
        let coarse = disk_integral(&p, 1e-3).unwrap();
        prop_assert!(coarse.satisfies_cs_bound());
        let fine = disk_integral(&p, 1e-4).unwrap();
        prop_assert!(fine.satisfies_cs_bound());
        prop_assert!((fine.value - coarse.value).abs() < coarse.error_bound, "{} vs {} ± {}", fine.value, coarse.value, coarse.error_bound);
    }

    #[test]
    fn siegel_target_multiplier_unimodular(gamma in 0.05..0.95f64) {
        let lambda = polar(1.0, gamma);
        let exact = lambda / 2.0 - lambda * lambda / 4.0;
        let res = find_multiplier_param(1, lambda, exact + Complex::new(0.01, -0.01)).unwrap();
        prop_assert!((res.multiplier.norm() - 1.0).abs() <= 1e-8);
        prop_assert!((res.c - exact).norm() <= 1e-8);
    }
}
