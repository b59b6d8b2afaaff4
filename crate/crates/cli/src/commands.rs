use crate::args::*;
use poincare_lab::cplx::num;
use crate::{CliError, CliResult};
use poincare_lab::chebfamily::family_report;
use poincare_lab::exceptional::{exceptional_survey, log_growth_table, write_growth_csv};
use poincare_lab::littlewood::{
    adaptive_integral, exponent_fit, monte_carlo_integral, write_csv as write_littlewood_csv,
    IntegralEstimate, IterateFamily, Monomial, PolyEvaluator, MAX_ITERATE_DEPTH,
    MONTE_CARLO_SAMPLES,
};
use poincare_lab::poincare::{repelling_fixed_point, PoincareMap};
use poincare_lab::preimage::{argument_principle_detail, find_base_preimage, InverseBranch, PreimageReport};
use poincare_lab::sets::density_estimate;
use poincare_lab::siegel::{RotationAngle, SiegelMap};
use poincare_lab::{Complex, Error};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

const CIRCLE_POINTS: usize = 16;
const CF_TERMS: usize = 40;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn poincare_map(spec: &MapSpec, z0: Option<Complex>, terms: usize) -> CliResult<PoincareMap> {
    let map = spec.quad_map();
    let z0 = z0.unwrap_or_else(|| repelling_fixed_point(&map));
    Ok(PoincareMap::new(map, z0, terms)?)
}

/// Poincaré function, Siegel linearizer and inverse branch of a `λ`-form map.
pub fn inverse_branch(angle: RotationAngle, terms: usize) -> CliResult<InverseBranch> {
    let sm = SiegelMap::lambda_form(angle.clone(), poincare_lab::siegel::DEFAULT_SIEGEL_TERMS)?;
    let pm = PoincareMap::at_repelling_fixed_point(sm.map, terms)?;
    Ok(find_base_preimage(&pm, &sm)?)
}

pub fn poincare(a: &PoincareArgs, out: &Path) -> CliResult<()> {
    let spec = a.map.require()?;
    let pm = poincare_map(&spec, a.map.z0()?, a.terms)?;
    let points: Vec<Complex> = if a.eval.is_empty() {
        [0.5, 5.0, 50.0]
            .iter()
            .flat_map(|&s| {
                (0..CIRCLE_POINTS).map(move |i| {
                    Complex::from_polar(s, std::f64::consts::TAU * i as f64 / CIRCLE_POINTS as f64)
                })
            })
            .map(|z| z * pm.r0)
            .collect()
    } else {
        a.eval
            .iter()
            .map(|s| parse_complex(s, "--eval"))
            .collect::<CliResult<_>>()?
    };

    let series_path = out.join("poincare_series.json");
    write_json(&series_path, &pm.series_f.to_document(pm.provenance()))?;
    report(&series_path);

    let table_path = out.join("poincare_eval.csv");
    let mut wr = csv_writer(&table_path)?;
    wr.write_record([
        "re_z",
        "im_z",
        "re_f",
        "im_f",
        "abs_f=|f(z)|",
        "residual=|P(f(z))-f(mu*z)|/(1+|f(mu*z)|)",
    ])?;
    let mut worst: f64 = 0.0;
    for z in points {
        let f = pm.eval(z)?;
        let res = pm.functional_residual(z)?;
        worst = worst.max(res);
        wr.write_record([
            num(z.re),
            num(z.im),
            num(f.re),
            num(f.im),
            num(f.norm()),
            num(res),
        ])?;
        println!("f({}, {}) = {} + {}i  residual {:e}", z.re, z.im, f.re, f.im, res);
    }
    wr.flush()?;
    report(&table_path);
    println!("mu = {} + {}i, r0 = {}, max residual {:e}", pm.mu.re, pm.mu.im, pm.r0, worst);
    Ok(())
}

pub fn siegel(a: &SiegelArgs, out: &Path) -> CliResult<()> {
    let angle = a.map.angle_or_golden()?;
    let sm = SiegelMap::lambda_form(angle, a.terms)?.with_sub_fraction(a.sub_fraction)?;

    let series_path = out.join("siegel_series.json");
    write_json(&series_path, &sm.series_h.to_document(sm.provenance()))?;
    report(&series_path);

    let table_path = out.join("siegel_residuals.csv");
    let mut wr = csv_writer(&table_path)?;
    wr.write_record([
        "t=|z|/radius_hat",
        "r=|z|",
        "residual=max over 256 points of |P(h(z))-h(lambda*z)|",
        "sup_h=max |h(z)|",
        "relative=residual/(1+sup_h)",
    ])?;
    for i in 1..=9 {
        let t = i as f64 / 10.0;
        let r = t * sm.radius_hat;
        let (res, sup_h) = sm.conjugacy_residual(r, 256);
        wr.write_record([
            num(t),
            num(r),
            num(res),
            num(sup_h),
            num(res / (1.0 + sup_h)),
        ])?;
    }
    wr.flush()?;
    report(&table_path);
    let (res, sup_h) = sm.conjugacy_residual(sm.sub_radius(), 256);
    println!(
        "radius_hat = {} (root test {}, residual radius {}{}), sub-disk radius {}, residual there {:e}",
        sm.radius_hat,
        sm.radius.root_test,
        sm.radius.residual_radius,
        if sm.radius.inconclusive { ", inconclusive" } else { "" },
        sm.sub_radius(),
        res / (1.0 + sup_h)
    );
    Ok(())
}

#[derive(Serialize)]
struct ArgumentOnly {
    #[serde(with = "poincare_lab::cplx::pair")]
    w: Complex,
    r: f64,
    argument_count: usize,
    radius_used: f64,
    nodes: usize,
    notes: Vec<String>,
}

pub fn preimages(a: &PreimageArgs, out: &Path) -> CliResult<()> {
    let spec = a.map.require()?;
    let w = a.w.as_deref().map(|s| parse_complex(s, "--w")).transpose()?;
    match spec {
        MapSpec::C(_) => {
            let w = w.ok_or_else(|| CliError::Usage("--w is required for a c-form map".into()))?;
            let pm = poincare_map(&spec, a.map.z0()?, a.terms)?;
            let count = argument_principle_detail(&pm, w, a.r)?;
            let path = out.join("preimages.json");
            write_json(
                &path,
                &ArgumentOnly {
                    w,
                    r: a.r,
                    argument_count: count.count,
                    radius_used: count.radius,
                    nodes: count.nodes,
                    notes: vec!["c-form map: no Siegel disk, orbit preimages not traced".into()],
                },
            )?;
            report(&path);
            println!("argument count in D_{}: {}", a.r, count.count);
        }
        MapSpec::Lambda(angle) => {
            let ib = inverse_branch(angle, a.terms)?;
            let w = match w {
                Some(w) => w,
                None => ib.sm.sub_siegel_sample(1, a.seed)[0],
            };
            let set = a.set.build()?;
            let rep = PreimageReport::build(&ib, &set, w, a.kmax, Some(a.r))?;
            let json_path = out.join("preimages.json");
            write_json(&json_path, &rep)?;
            report(&json_path);
            let csv_path = out.join("preimages.csv");
            rep.write_csv(File::create(&csv_path)?)?;
            report(&csv_path);
            let orbit = rep.orbit_count_within(a.r);
            let arg = rep.argument_count.unwrap_or(0);
            println!("w = {} + {}i", w.re, w.im);
            println!("orbit preimages in D_{}: {orbit}", a.r);
            println!("argument count in D_{}: {arg}", a.r);
            if orbit > arg {
                return Err(CliError::Numeric(Error::Degenerate(format!(
                    "orbit count {orbit} exceeds argument count {arg}"
                ))));
            }
            println!("consistent: orbit count <= argument count");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct WRow {
    index: usize,
    re_w: f64,
    im_w: f64,
    hits: usize,
    escape: bool,
    final_ratio: f64,
    liminf_proxy: f64,
}

pub fn exceptional(a: &ExceptionalArgs, out: &Path) -> CliResult<()> {
    let set = a.set.build()?;
    let ib = inverse_branch(a.map.angle_or_golden()?, poincare_lab::series::DEFAULT_TERMS)?;
    let rep = exceptional_survey(&ib, &set, a.samples, a.kmax, a.seed)?;

    let json_path = out.join("exceptional_report.json");
    write_json(&json_path, &rep)?;
    report(&json_path);

    let ratio_path = out.join("exceptional_ratios.csv");
    write_growth_csv(&log_growth_table(&rep), File::create(&ratio_path)?)?;
    report(&ratio_path);

    let w_path = out.join("exceptional_w.csv");
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_path(&w_path)?;
    wr.write_record([
        "index",
        "re_w",
        "im_w",
        "hits=#{k: z_k in S}",
        "escape=no hits for k >= kmax-kmax/3",
        "final_ratio=count(r_kmax)/ln(r_kmax)",
        "liminf_proxy=min count(r_k)/ln(r_k) over the final third",
    ])?;
    for (i, r) in rep.records.iter().enumerate() {
        let row = WRow {
            index: i,
            re_w: r.w.re,
            im_w: r.w.im,
            hits: r.hits.len(),
            escape: r.escape,
            final_ratio: r.final_ratio(),
            liminf_proxy: r.liminf_proxy,
        };
        wr.serialize(row)?;
    }
    wr.flush()?;
    report(&w_path);

    println!(
        "target 1/ln|mu| = {}, median final ratio = {} ({:.3} of target), median liminf proxy = {}, escape fraction = {}",
        rep.target,
        rep.median_final_ratio,
        rep.median_final_ratio / rep.target,
        rep.median_liminf_proxy,
        rep.escape_fraction
    );
    if rep.conditional {
        println!("S is uncertified: conclusions are conditional");
    }
    Ok(())
}

fn integral(p: &dyn PolyEvaluator, a: &LittlewoodArgs) -> CliResult<IntegralEstimate> {
    match adaptive_integral(p, a.tol, a.budget) {
        Err(Error::BudgetExceeded { evaluations }) if !a.strict => {
            let mut est = monte_carlo_integral(p, MONTE_CARLO_SAMPLES, a.seed);
            est.evaluations += evaluations;
            Ok(est)
        }
        other => Ok(other?),
    }
}

pub fn littlewood(a: &LittlewoodArgs, out: &Path) -> CliResult<()> {
    let mut estimates = Vec::new();
    match a.family {
        Family::Iterates => {
            if a.nmax == 0 || a.nmax > MAX_ITERATE_DEPTH {
                return Err(CliError::Usage(format!("--nmax must lie in 1..={MAX_ITERATE_DEPTH}")));
            }
            let c = parse_complex(&a.c, "--c")?;
            for n in 1..=a.nmax {
                estimates.push(integral(&IterateFamily { c, n }, a)?);
            }
        }
        Family::Monomial => {
            if a.nmax > 20 {
                return Err(CliError::Usage("--nmax must be <= 20 for monomials".into()));
            }
            for j in 0..=a.nmax {
                estimates.push(integral(&Monomial(1 << j), a)?);
            }
        }
    }
    let csv_path = out.join("littlewood.csv");
    write_littlewood_csv(&estimates, File::create(&csv_path)?)?;
    report(&csv_path);

    let fit = exponent_fit(&estimates).ok();
    let json_path = out.join("littlewood.json");
    write_json(
        &json_path,
        &serde_json::json!({ "estimates": estimates, "fit": fit }),
    )?;
    report(&json_path);

    for e in &estimates {
        println!(
            "degree {:>6}: {} ± {:e}  bound {}  {:?}{}",
            e.degree,
            e.value,
            e.error_bound,
            e.cs_bound(),
            e.method,
            if e.satisfies_cs_bound() { "" } else { "  BOUND VIOLATED" }
        );
    }
    if let Some(fit) = &fit {
        println!("slope = {}, alpha_hat = {}", fit.slope, fit.alpha_hat);
    }
    Ok(())
}

pub fn chebyshev(a: &ChebyshevArgs, out: &Path) -> CliResult<()> {
    let angle = match (&a.gamma_cf, &a.lambda_gamma) {
        (Some(cf), _) => {
            let mut terms = cf.clone();
            if terms.len() < CF_TERMS {
                terms.resize(CF_TERMS, 1);
            }
            RotationAngle::from_cf(&terms)?
        }
        (None, Some(g)) => parse_angle(g)?,
        (None, None) => RotationAngle::golden(),
    };
    if a.q.is_empty() || a.q.contains(&0) {
        return Err(CliError::Usage("--q needs positive periods".into()));
    }
    let rep = family_report(&a.q, &angle)?;
    let csv_path = out.join("chebyshev_family.csv");
    rep.write_csv(File::create(&csv_path)?)?;
    report(&csv_path);
    let json_path = out.join("chebyshev_family.json");
    write_json(&json_path, &rep)?;
    report(&json_path);
    for row in &rep.rows {
        let fx = row.fixed.as_ref();
        println!(
            "q = {}: c_super = {:?}, c_parabolic = {:?}, c_siegel = {:?}, |mu| = {:?}, rho = {:?}{}",
            row.q,
            row.c_super,
            row.c_parabolic.map(|c| (c.re, c.im)),
            row.c_siegel.map(|c| (c.re, c.im)),
            fx.map(|f| f.mu.norm()),
            fx.map(|f| f.rho),
            if row.errors.is_empty() {
                String::new()
            } else {
                format!("  errors: {}", row.errors.join("; "))
            }
        );
    }
    println!(
        "all |mu| < 4: {}, all rho > 1/2: {}",
        rep.limits.all_mu_below_4, rep.limits.all_rho_above_half
    );
    Ok(())
}

pub fn density(a: &DensityArgs, out: &Path) -> CliResult<()> {
    let set = a.set.build()?;
    let radii: Vec<f64> = if a.radii.is_empty() {
        (0..20).map(|j| 2f64.powi(j)).collect()
    } else {
        a.radii.clone()
    };
    let path = out.join("density.csv");
    let mut wr = csv_writer(&path)?;
    wr.write_record([
        "r",
        "density=|S cap D_r|/(pi r^2) (Monte Carlo)",
        "std_error",
        "samples",
        "bound=min(1,C*r^-delta)",
        "within=density<=bound+3*std_error",
    ])?;
    let mut violations = 0;
    for (i, &r) in radii.iter().enumerate() {
        let est = density_estimate(&set, r, a.samples, a.seed.wrapping_add(i as u64))?;
        let bound = set.certified_bound(r)?;
        let within = est.value <= bound + 3.0 * est.std_error;
        if !within {
            violations += 1;
        }
        wr.write_record([
            num(r),
            num(est.value),
            num(est.std_error),
            est.samples.to_string(),
            num(bound),
            within.to_string(),
        ])?;
        println!("r = {r}: density {} ± {:e}, bound {bound}", est.value, est.std_error);
    }
    wr.flush()?;
    report(&path);
    println!("{} of {} radii within bound + 3 sigma", radii.len() - violations, radii.len());
    Ok(())
}
