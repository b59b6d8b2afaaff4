//! Borel sets with certified density decay `dens(S, 𝔻_r) <= C r^{-δ}`.
//!
//! The built-in sets live in the dyadic annuli `A_j = {2^j <= |z| < 2^{j+1}}`,
//! `j >= 0`, and cover a fraction
//!
//! ```text
//! f_j = s · min(1, C 2^{-(j+1)δ}),   s = (2^{2−δ} − 1) / (3 · 2^{2−2δ})
//! ```
//!
//! of each annulus. For `2^J <= r < 2^{J+1}` only annuli `j <= J` meet `𝔻_r`, so
//!
//! ```text
//! |S ∩ 𝔻_r| <= Σ_{j<=J} f_j 3π 4^j <= s 3π C 2^{-δ} 2^{(J+1)(2−δ)} / (2^{2−δ} − 1)
//!           = C π 2^{J(2−δ)} <= C π r^{2−δ},
//! ```
//!
//! which is the certificate; for `r < 1` the set misses `𝔻_r` entirely.

use crate::{Complex, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::{Arc, OnceLock};

/// Disks placed in every annulus of a power-law set.
pub const DISKS_PER_ANNULUS: usize = 256;
/// Annuli beyond this index are not represented (`2^1024` overflows `f64`).
pub const MAX_ANNULUS: usize = 1024;
const SECTORS: usize = 64;
const PLACEMENT_ATTEMPTS: usize = 32;
const DENSITY_BLOCK: usize = 4096;

/// Membership predicate of a custom set.
pub type Predicate = Arc<dyn Fn(Complex) -> bool + Send + Sync>;

/// A density certificate `dens(S, 𝔻_r) <= min(1, C r^{-δ})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
}

#[derive(Clone)]
pub enum SetKind {
    Empty,
    PowerLawDisks { c: f64, delta: f64, seed: u64 },
    AnnularSectors { c: f64, delta: f64 },
    Custom {
        name: String,
        predicate: Predicate,
        certificate: Option<Certificate>,
    },
}

impl fmt::Debug for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetKind::Empty => write!(f, "Empty"),
            SetKind::PowerLawDisks { c, delta, seed } => {
                write!(f, "PowerLawDisks(C={c}, delta={delta}, seed={seed})")
            }
            SetKind::AnnularSectors { c, delta } => write!(f, "AnnularSectors(C={c}, delta={delta})"),
            SetKind::Custom { name, certificate, .. } => {
                write!(f, "Custom({name}, certificate={certificate:?})")
            }
        }
    }
}

/// Serializable description of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDescriptor {
    pub kind: String,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Disk {
    center: Complex,
    radius: f64,
}

#[derive(Debug)]
struct AnnulusPack {
    disks: Vec<Disk>,
    sectors: Vec<Vec<u32>>,
}

/// A Borel set given by a membership predicate and an optional certificate.
#[derive(Clone)]
pub struct SetModel {
    pub kind: SetKind,
    packs: Option<Arc<Vec<OnceLock<AnnulusPack>>>>,
}

impl fmt::Debug for SetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

fn check_params(c: f64, delta: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::BadParams(format!("C must be positive, got {c}")));
    }
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::BadParams(format!("delta must lie in (0,2), got {delta}")));
    }
    Ok(())
}

/// Power-law set of randomly packed disks.
pub fn make_powerlaw_set(c: f64, delta: f64, seed: u64) -> Result<SetModel> {
    check_params(c, delta)?;
    let packs = (0..MAX_ANNULUS).map(|_| OnceLock::new()).collect();
    Ok(SetModel {
        kind: SetKind::PowerLawDisks { c, delta, seed },
        packs: Some(Arc::new(packs)),
    })
}

/// Power-law set of angular sectors `0 <= arg z < 2π f_j` in each annulus.
/// Sets with equal `δ` are nested in `C`.
pub fn make_annular_sectors(c: f64, delta: f64) -> Result<SetModel> {
    check_params(c, delta)?;
    Ok(SetModel {
        kind: SetKind::AnnularSectors { c, delta },
        packs: None,
    })
}

/// Area fraction of annulus `j` covered by a built-in set.
pub fn annulus_fraction(c: f64, delta: f64, j: usize) -> f64 {
    let s = (2f64.powf(2.0 - delta) - 1.0) / (3.0 * 2f64.powf(2.0 - 2.0 * delta));
    s * (c * 2f64.powf(-((j + 1) as f64) * delta)).min(1.0)
}

fn annulus_index(z: Complex) -> Option<usize> {
    let m = z.norm();
    if !(m >= 1.0) || !m.is_finite() {
        return None;
    }
    let j = m.log2().floor() as usize;
    // guard the floor against rounding at exact powers of two
    let j = if 2f64.powi(j as i32) > m { j - 1 } else { j };
    (j < MAX_ANNULUS).then_some(j)
}

fn sector_of(theta: f64) -> usize {
    (((theta.rem_euclid(TAU)) / TAU * SECTORS as f64) as usize).min(SECTORS - 1)
}

fn build_pack(c: f64, delta: f64, seed: u64, j: usize) -> AnnulusPack {
    let inner = 2f64.powi(j as i32);
    let outer = 2.0 * inner;
    let target_area = annulus_fraction(c, delta, j) * PI * (outer * outer - inner * inner);
    let radius = (target_area / (DISKS_PER_ANNULUS as f64 * PI)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    let (lo, hi) = (inner + radius, outer - radius);
    let mut disks: Vec<Disk> = Vec::with_capacity(DISKS_PER_ANNULUS);
    for _ in 0..DISKS_PER_ANNULUS {
        let mut candidate = Complex::new(0.0, 0.0);
        for _ in 0..PLACEMENT_ATTEMPTS {
            let u: f64 = rng.gen();
            let rr = (lo * lo + u * (hi * hi - lo * lo)).sqrt();
            candidate = Complex::from_polar(rr, TAU * rng.gen::<f64>());
            // overlap beyond roughly 10% of a disk's area is rejected
            let clash = disks
                .iter()
                .any(|d| (d.center - candidate).norm() < 1.8 * radius);
            if !clash {
                break;
            }
        }
        disks.push(Disk {
            center: candidate,
            radius,
        });
    }
    let mut sectors = vec![Vec::new(); SECTORS];
    for (i, d) in disks.iter().enumerate() {
        let half_width = (d.radius / d.center.norm()).min(1.0).asin() + 1e-12;
        let a = d.center.arg();
        let first = ((a - half_width).rem_euclid(TAU) / TAU * SECTORS as f64).floor() as i64;
        let span = (2.0 * half_width / TAU * SECTORS as f64).ceil() as i64 + 1;
        for s in first..=first + span {
            let idx = s.rem_euclid(SECTORS as i64) as usize;
            if !sectors[idx].contains(&(i as u32)) {
                sectors[idx].push(i as u32);
            }
        }
    }
    AnnulusPack { disks, sectors }
}

impl SetModel {
    pub fn empty() -> Self {
        SetModel {
            kind: SetKind::Empty,
            packs: None,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        predicate: impl Fn(Complex) -> bool + Send + Sync + 'static,
        certificate: Option<Certificate>,
    ) -> Self {
        SetModel {
            kind: SetKind::Custom {
                name: name.into(),
                predicate: Arc::new(predicate),
                certificate,
            },
            packs: None,
        }
    }

    /// The whole plane, uncertified.
    pub fn full_plane() -> Self {
        Self::custom("full_plane", |_| true, None)
    }

    pub fn contains(&self, z: Complex) -> bool {
        match &self.kind {
            SetKind::Empty => false,
            SetKind::Custom { predicate, .. } => predicate(z),
            SetKind::AnnularSectors { c, delta } => match annulus_index(z) {
                Some(j) => z.arg().rem_euclid(TAU) < TAU * annulus_fraction(*c, *delta, j),
                None => false,
            },
            SetKind::PowerLawDisks { c, delta, seed } => {
                let Some(j) = annulus_index(z) else {
                    return false;
                };
                let packs = self.packs.as_ref().expect("power-law packs");
                let pack = packs[j].get_or_init(|| build_pack(*c, *delta, *seed, j));
                pack.sectors[sector_of(z.arg())]
                    .iter()
                    .any(|&i| {
                        let d = pack.disks[i as usize];
                        (z - d.center).norm() <= d.radius
                    })
            }
        }
    }

    /// Disks of a power-law set meeting `𝔻_r`, as `(center, radius)`.
    pub fn disks_within(&self, r: f64) -> Vec<(Complex, f64)> {
        let SetKind::PowerLawDisks { c, delta, seed } = self.kind else {
            return Vec::new();
        };
        let Some(packs) = self.packs.as_ref() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (j, slot) in packs.iter().enumerate() {
            if 2f64.powi(j as i32) > r {
                break;
            }
            let pack = slot.get_or_init(|| build_pack(c, delta, seed, j));
            out.extend(
                pack.disks
                    .iter()
                    .filter(|d| d.center.norm() - d.radius <= r)
                    .map(|d| (d.center, d.radius)),
            );
        }
        out
    }

    pub fn certificate(&self) -> Option<Certificate> {
        match &self.kind {
            SetKind::Empty => Some(Certificate { c: 0.0, delta: 1.0 }),
            SetKind::PowerLawDisks { c, delta, .. } | SetKind::AnnularSectors { c, delta } => {
                Some(Certificate {
                    c: *c,
                    delta: *delta,
                })
            }
            SetKind::Custom { certificate, .. } => *certificate,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.certificate().is_some()
    }

    /// `min(1, C r^{-δ})` (zero for the empty set).
    pub fn certified_bound(&self, r: f64) -> Result<f64> {
        if let SetKind::Empty = self.kind {
            return Ok(0.0);
        }
        let cert = self.certificate().ok_or(Error::NoCertificate)?;
        Ok((cert.c * r.powf(-cert.delta)).min(1.0))
    }

    pub fn descriptor(&self) -> SetDescriptor {
        let blank = SetDescriptor {
            kind: String::new(),
            c: None,
            delta: None,
            seed: None,
            name: None,
        };
        match &self.kind {
            SetKind::Empty => SetDescriptor {
                kind: "empty".into(),
                ..blank
            },
            SetKind::PowerLawDisks { c, delta, seed } => SetDescriptor {
                kind: "powerlaw".into(),
                c: Some(*c),
                delta: Some(*delta),
                seed: Some(*seed),
                ..blank
            },
            SetKind::AnnularSectors { c, delta } => SetDescriptor {
                kind: "sectors".into(),
                c: Some(*c),
                delta: Some(*delta),
                ..blank
            },
            SetKind::Custom {
                name, certificate, ..
            } => SetDescriptor {
                kind: "custom".into(),
                c: certificate.map(|c| c.c),
                delta: certificate.map(|c| c.delta),
                name: Some(name.clone()),
                ..blank
            },
        }
    }

    /// Rebuilds a built-in set from its descriptor.
    pub fn from_descriptor(d: &SetDescriptor) -> Result<Self> {
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::BadParams(format!("descriptor lacks {what}")))
        };
        match d.kind.as_str() {
            "empty" => Ok(SetModel::empty()),
            "powerlaw" => make_powerlaw_set(need(d.c, "C")?, need(d.delta, "delta")?, d.seed.unwrap_or(0)),
            "sectors" => make_annular_sectors(need(d.c, "C")?, need(d.delta, "delta")?),
            other => Err(Error::BadParams(format!("cannot rebuild set kind {other:?}"))),
        }
    }
}

/// Monte Carlo density of a set in a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Uniform Monte Carlo estimate of `dens(S, 𝔻_r)`.
///
/// Samples are drawn in blocks of 4096 from per-block ChaCha streams, so the
/// estimate depends only on `(seed, samples)`.
pub fn density_estimate(set: &SetModel, r: f64, samples: usize, seed: u64) -> Result<DensityEstimate> {
    if !(r > 0.0) {
        return Err(Error::BadParams("radius must be positive".into()));
    }
    if samples < 1000 {
        return Err(Error::BadParams("density estimate needs >= 1000 samples".into()));
    }
    let blocks = samples.div_ceil(DENSITY_BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = DENSITY_BLOCK.min(samples - b * DENSITY_BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            (0..n)
                .filter(|_| {
                    let rr = r * rng.gen::<f64>().sqrt();
                    let z = Complex::from_polar(rr, TAU * rng.gen::<f64>());
                    set.contains(z)
                })
                .count()
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(DensityEstimate {
        value: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set() {
        let s = SetModel::empty();
        assert!(!s.contains(Complex::new(3.0, 1.0)));
        let d = density_estimate(&s, 10.0, 2000, 1).unwrap();
        assert_eq!((d.value, d.std_error), (0.0, 0.0));
        assert_eq!(s.certified_bound(10.0).unwrap(), 0.0);
    }

    #[test]
    fn half_plane_density() {
        let s = SetModel::custom("upper", |z| z.im > 0.0, None);
        let d = density_estimate(&s, 3.0, 20_000, 7).unwrap();
        assert!((d.value - 0.5).abs() < 3.0 * d.std_error + 1e-12);
        assert_eq!(s.certified_bound(1.0), Err(Error::NoCertificate));
    }

    #[test]
    fn certified_bound_arithmetic() {
        let s = make_powerlaw_set(10.0, 0.5, 3).unwrap();
        assert!((s.certified_bound(1e4).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(s.certified_bound(1.0).unwrap(), 1.0);
        assert!(s.certified_bound(1e300).unwrap() < 1e-140);
    }

    #[test]
    fn bad_params() {
        assert!(make_powerlaw_set(10.0, 2.5, 0).is_err());
        assert!(make_powerlaw_set(-1.0, 0.5, 0).is_err());
        assert!(make_annular_sectors(1.0, 0.0).is_err());
    }

    #[test]
    fn annulus_fractions_respect_certificate() {
        // Σ_{j<=J} f_j 3π 4^j <= C π 2^{J(2−δ)} for every J
        for &(c, delta) in &[(10.0, 0.5), (1.0, 1.0), (0.5, 1.9), (100.0, 0.1)] {
            let mut area = 0.0;
            for j in 0..200usize {
                area += annulus_fraction(c, delta, j) * 3.0 * PI * 4f64.powi(j as i32);
                let bound = (c * PI * 2f64.powf(j as f64 * (2.0 - delta)))
                    .min(PI * 4f64.powi(j as i32 + 1));
                assert!(area <= bound * (1.0 + 1e-12), "C={c} δ={delta} j={j}");
            }
        }
    }

    #[test]
    fn powerlaw_density_below_certificate() {
        let s = make_powerlaw_set(10.0, 0.5, 11).unwrap();
        let r = 2f64.powi(10);
        let d = density_estimate(&s, r, 50_000, 5).unwrap();
        assert!(d.value <= 10.0 * 2f64.powi(-5) + 3.0 * d.std_error);
        assert!(d.value > 0.0);
        let d4 = density_estimate(&s, 4.0, 20_000, 5).unwrap();
        assert!(d4.value <= s.certified_bound(4.0).unwrap());
    }

    #[test]
    fn membership_is_deterministic_and_seed_dependent() {
        let a = make_powerlaw_set(10.0, 0.5, 1).unwrap();
        let b = make_powerlaw_set(10.0, 0.5, 1).unwrap();
        let c = make_powerlaw_set(10.0, 0.5, 2).unwrap();
        let pts: Vec<Complex> = (0..2000)
            .map(|i| Complex::from_polar(1.0 + i as f64 * 0.05, i as f64 * 0.7))
            .collect();
        let ma: Vec<bool> = pts.iter().map(|&z| a.contains(z)).collect();
        let ma2: Vec<bool> = pts.iter().map(|&z| a.contains(z)).collect();
        let mb: Vec<bool> = pts.iter().map(|&z| b.contains(z)).collect();
        let mc: Vec<bool> = pts.iter().map(|&z| c.contains(z)).collect();
        assert_eq!(ma, ma2);
        assert_eq!(ma, mb);
        assert_ne!(ma, mc);
        assert_eq!(a.certified_bound(50.0), c.certified_bound(50.0));
    }

    #[test]
    fn sectors_are_nested_in_c() {
        let small = make_annular_sectors(1.0, 0.5).unwrap();
        let big = make_annular_sectors(10.0, 0.5).unwrap();
        for i in 0..5000 {
            let z = Complex::from_polar(1.0 + i as f64 * 0.3, i as f64 * 1.3);
            if small.contains(z) {
                assert!(big.contains(z));
            }
        }
    }

    #[test]
    fn descriptor_json() {
        let s = make_powerlaw_set(10.0, 0.5, 9).unwrap();
        let text = serde_json::to_string(&s.descriptor()).unwrap();
        assert_eq!(text, r#"{"kind":"powerlaw","C":10.0,"delta":0.5,"seed":9}"#);
        let back = SetModel::from_descriptor(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.descriptor(), s.descriptor());
    }
}
