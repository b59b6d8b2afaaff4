use poincare_lab::poincare::{least_squares, PoincareMap};
use poincare_lab::preimage::find_base_preimage;
use poincare_lab::sets::make_powerlaw_set;
use poincare_lab::siegel::{RotationAngle, SiegelMap};

/// Hit fractions of the k-th preimage layer decay like `|μ|^{-δk}`.
#[test]
fn hit_fraction_slope_tracks_delta() {
    let sm = SiegelMap::lambda_form(RotationAngle::golden(), 256).unwrap();
    let pm = PoincareMap::at_repelling_fixed_point(sm.map, 64).unwrap();
    let ib = find_base_preimage(&pm, &sm).unwrap();
    let delta = 0.5;
    let set = make_powerlaw_set(10.0, delta, 0).unwrap();
    let ks: Vec<usize> = (4..=14).collect();
    let expected = -delta * pm.mu.norm().ln();
    for seed in [0, 1] {
        let rows = ib.koebe_profile(&set, &ks, 40_000, seed).unwrap();
        assert!(rows.iter().all(|r| r.hit_fraction > 0.0), "{rows:?}");
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.hit_fraction.ln())).collect();
        let (slope, _) = least_squares(&pts);
        let ratio = slope / expected;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "slope {slope} vs {expected}");
    }
}
