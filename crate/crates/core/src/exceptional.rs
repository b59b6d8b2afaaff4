//! Exceptional orbit preimages: points `z⁽ᵏ⁾` that avoid a thinning set `S`.
//!
//! For `r_k = |μ|ᵏ C₁` the count `#{j : |z⁽ʲ⁾| <= r_k, z⁽ʲ⁾ ∉ S}` is a lower
//! bound for `#(E_w ∩ 𝔻_{r_k})`; its ratio to `log r_k` is compared with
//! `1/log|μ| = ρ/log 2`.

use crate::cplx::num;
use crate::dyncore::order_from_multiplier;
use crate::preimage::{InverseBranch, OrbitPoint};
use crate::sets::{SetDescriptor, SetModel};
use crate::{Complex, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

/// Count and ratio at one radius `r_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub k: usize,
    pub r: f64,
    pub count: usize,
    /// `count / ln r`.
    pub ratio: f64,
}

/// Orbit preimages of one `w` and their classification against `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WRecord {
    #[serde(with = "crate::cplx::pair")]
    pub w: Complex,
    pub points: Vec<OrbitPoint>,
    pub ratios: Vec<RatioRow>,
    /// Indices `k` with `z⁽ᵏ⁾ ∈ S`.
    pub hits: Vec<usize>,
    /// No hits among the last third of the indices.
    pub escape: bool,
    /// Minimum ratio over the last third of the radii.
    pub liminf_proxy: f64,
}

impl WRecord {
    pub fn final_ratio(&self) -> f64 {
        self.ratios.last().map(|r| r.ratio).unwrap_or(f64::NAN)
    }

    pub fn count_at(&self, r: f64) -> usize {
        self.points
            .iter()
            .filter(|p| p.z.norm() <= r && !p.in_s)
            .count()
    }
}

/// First index of the final third of `0..=k_max`.
pub fn final_third_start(k_max: usize) -> usize {
    k_max - k_max / 3
}

/// Classifies the orbit preimages of `w` against `S`.
pub fn exceptional_count(ib: &InverseBranch, set: &SetModel, w: Complex, k_max: usize) -> Result<WRecord> {
    let mut points = ib.orbit_with_residuals(w, k_max)?;
    for p in &mut points {
        p.in_s = set.contains(p.z);
    }
    let hits: Vec<usize> = points.iter().filter(|p| p.in_s).map(|p| p.k).collect();
    let mut record = WRecord {
        w,
        points,
        ratios: Vec::new(),
        escape: false,
        hits,
        liminf_proxy: f64::NAN,
    };
    record.ratios = (0..=k_max)
        .map(|k| {
            let r = ib.enclosing_radius(k);
            let count = record.count_at(r);
            RatioRow {
                k,
                r,
                count,
                ratio: count as f64 / r.ln(),
            }
        })
        .collect();
    let start = final_third_start(k_max);
    record.escape = record.hits.iter().all(|&k| k < start);
    record.liminf_proxy = record.ratios[start..]
        .iter()
        .filter(|row| row.r > 1.0)
        .map(|row| row.ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(record)
}

/// Survey of sampled `w ∈ W` against one set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalReport {
    pub map: serde_json::Value,
    pub set: SetDescriptor,
    /// `S` carries no density certificate; conclusions are conditional.
    pub conditional: bool,
    #[serde(with = "crate::cplx::pair")]
    pub mu: Complex,
    pub c1: f64,
    pub rho: f64,
    /// `ρ / log 2 = 1 / log|μ|`.
    pub target: f64,
    pub k_max: usize,
    pub seed: u64,
    pub records: Vec<WRecord>,
    pub escape_fraction: f64,
    pub median_final_ratio: f64,
    pub median_liminf_proxy: f64,
    pub liminf_proxies: Vec<f64>,
    pub notes: Vec<String>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs [`exceptional_count`] for `w_count` sub-Siegel samples.
pub fn exceptional_survey(
    ib: &InverseBranch,
    set: &SetModel,
    w_count: usize,
    k_max: usize,
    seed: u64,
) -> Result<ExceptionalReport> {
    if w_count < 10 {
        return Err(Error::BadParams("survey needs at least 10 samples".into()));
    }
    let rho = order_from_multiplier(ib.pm.mu)?.rho;
    let ws = ib.sm.sub_siegel_sample(w_count, seed);
    let records: Vec<Result<WRecord>> = ws
        .par_iter()
        .map(|&w| exceptional_count(ib, set, w, k_max))
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = records.iter().map(WRecord::final_ratio).collect();
    let proxies: Vec<f64> = records.iter().map(|r| r.liminf_proxy).collect();
    let escapes = records.iter().filter(|r| r.escape).count();
    let conditional = !set.is_certified();
    let mut notes = vec![
        format!("r_k = |mu|^k * C1 with C1 = {}", ib.c1),
        "count(r) = #{k : |z_k| <= r, z_k not in S}, a lower bound for #(E_w in D_r)".into(),
        format!(
            "liminf proxy = min of count/ln r over k >= {}",
            final_third_start(k_max)
        ),
    ];
    if conditional {
        notes.push("S has no density certificate: results are conditional".into());
    }
    Ok(ExceptionalReport {
        map: serde_json::to_value(ib.pm.map).unwrap_or_default(),
        set: set.descriptor(),
        conditional,
        mu: ib.pm.mu,
        c1: ib.c1,
        rho,
        target: rho / LN_2,
        k_max,
        seed,
        escape_fraction: escapes as f64 / records.len() as f64,
        median_final_ratio: median(&finals),
        median_liminf_proxy: median(&proxies),
        liminf_proxies: proxies,
        records,
        notes,
    })
}

/// Row of the log-growth table: median count over the sampled `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub r: f64,
    pub count: f64,
    pub ratio: f64,
    pub target: f64,
}

/// Median count at each `r_k` with its ratio to `ln r_k`.
pub fn log_growth_table(report: &ExceptionalReport) -> Vec<GrowthRow> {
    let Some(first) = report.records.first() else {
        return Vec::new();
    };
    (0..first.ratios.len())
        .map(|i| {
            let counts: Vec<f64> = report
                .records
                .iter()
                .map(|rec| rec.ratios[i].count as f64)
                .collect();
            let r = first.ratios[i].r;
            let count = median(&counts);
            GrowthRow {
                r,
                count,
                ratio: count / r.ln(),
                target: report.target,
            }
        })
        .collect()
}

pub fn write_growth_csv<W: Write>(rows: &[GrowthRow], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::OutOfDomain(format!("csv: {e}"));
    wr.write_record([
        "r=|mu|^k*C1",
        "count=median #{k: |z_k|<=r, z_k not in S}",
        "ratio=count/ln(r)",
        "target=rho/ln(2)=1/ln|mu|",
    ])
    .map_err(io)?;
    for row in rows {
        wr.write_record([
            num(row.r),
            num(row.count),
            num(row.ratio),
            num(row.target),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::OutOfDomain(format!("csv: {e}")))?;
    Ok(())
}
