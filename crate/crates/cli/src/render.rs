//! Static images: binary PPM (P6) or minimal SVG.

use crate::args::{RenderArgs, View};
use crate::commands::{inverse_branch, poincare_map};
use crate::{CliError, CliResult};
use poincare_lab::siegel::SiegelMap;
use poincare_lab::Complex;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

const CURVE_POINTS: usize = 1024;
const SVG_MAX_CELLS: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Ppm,
    Svg,
}

type Rgb = [u8; 3];

fn format_of(path: &Path) -> CliResult<Format> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => Ok(Format::Ppm),
        Some("svg") => Ok(Format::Svg),
        _ => Err(CliError::Usage(format!(
            "--out must end in .ppm or .svg, got {}",
            path.display()
        ))),
    }
}

/// Row-major RGB raster.
struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Canvas {
    fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Canvas {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    fn put(&mut self, x: f64, y: f64, color: Rgb) {
        if x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = color;
        }
    }

    fn square(&mut self, x: f64, y: f64, half: i64, color: Rgb) {
        for dy in -half..=half {
            for dx in -half..=half {
                self.put(x + dx as f64, y + dy as f64, color);
            }
        }
    }

    fn disk(&mut self, x: f64, y: f64, radius: f64, color: Rgb) {
        let r = radius.max(0.5);
        let (x0, x1) = ((x - r).floor().max(0.0), (x + r).ceil().min(self.width as f64 - 1.0));
        let (y0, y1) = ((y - r).floor().max(0.0), (y + r).ceil().min(self.height as f64 - 1.0));
        let mut py = y0;
        while py <= y1 {
            let mut px = x0;
            while px <= x1 {
                if (px + 0.5 - x).hypot(py + 0.5 - y) <= r {
                    self.put(px, py, color);
                }
                px += 1.0;
            }
            py += 1.0;
        }
    }

    fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn svg_open(width: usize, height: usize) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"#000000\"/>\n"
    )
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor();
    let f = h - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8]
}

/// Hue from the argument, brightness bands from `log₂|f|`.
fn domain_color(value: Option<Complex>, log_modulus: f64) -> Rgb {
    if !log_modulus.is_finite() {
        return [0, 0, 0];
    }
    let band = (log_modulus / std::f64::consts::LN_2).rem_euclid(1.0);
    match value {
        Some(f) if f.re.is_finite() && f.im.is_finite() => hsv(f.arg() / TAU, 0.9, 0.55 + 0.45 * band),
        _ => {
            let g = (80.0 + 100.0 * band) as u8;
            [g, g, g]
        }
    }
}

pub fn render(a: &RenderArgs) -> CliResult<()> {
    let format = format_of(&a.out)?;
    if a.width == 0 || a.height == 0 {
        return Err(CliError::Usage("image dimensions must be positive".into()));
    }
    let bytes = match a.what {
        View::Domain => domain(a, format)?,
        View::Siegel => siegel(a, format)?,
        View::Orbit => orbit(a, format)?,
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.out, bytes)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Domain coloring of the Poincaré function on the square `[-r, r]²`.
fn domain(a: &RenderArgs, format: Format) -> CliResult<Vec<u8>> {
    let spec = match a.map.spec()? {
        Some(s) => s,
        None => crate::args::MapSpec::Lambda(poincare_lab::siegel::RotationAngle::golden()),
    };
    let pm = poincare_map(&spec, a.map.z0()?, a.terms)?;
    let r = a.r.unwrap_or(100.0);
    let (w, h) = match format {
        Format::Ppm => (a.width, a.height),
        Format::Svg => (a.width.min(SVG_MAX_CELLS), a.height.min(SVG_MAX_CELLS)),
    };
    let colors: Vec<Rgb> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (px, py) = (i % w, i / w);
            let z = Complex::new(
                r * (2.0 * (px as f64 + 0.5) / w as f64 - 1.0),
                r * (1.0 - 2.0 * (py as f64 + 0.5) / h as f64),
            );
            domain_color(pm.eval(z).ok(), pm.log_modulus_eval(z))
        })
        .collect();
    Ok(match format {
        Format::Ppm => Canvas {
            width: w,
            height: h,
            pixels: colors,
        }
        .to_ppm(),
        Format::Svg => {
            let (cw, ch) = (a.width as f64 / w as f64, a.height as f64 / h as f64);
            let mut s = svg_open(a.width, a.height);
            for (i, c) in colors.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\"/>",
                    (i % w) as f64 * cw,
                    (i / w) as f64 * ch,
                    cw,
                    ch,
                    hex(*c)
                );
            }
            s.push_str("</svg>\n");
            s.into_bytes()
        }
    })
}

/// Level curves `h(t R̂ e^{iθ})` of the Siegel linearizer; the sub-Siegel
/// boundary is highlighted.
fn siegel(a: &RenderArgs, format: Format) -> CliResult<Vec<u8>> {
    let sm = SiegelMap::lambda_form(a.map.angle_or_golden()?, poincare_lab::siegel::DEFAULT_SIEGEL_TERMS)?;
    let mut curves: Vec<(Vec<Complex>, bool)> = (1..=9)
        .map(|i| (i as f64 / 10.0 * sm.radius_hat, false))
        .chain(std::iter::once((sm.sub_radius(), true)))
        .map(|(r, sub)| {
            let pts = (0..CURVE_POINTS)
                .map(|j| sm.h_eval_unchecked(Complex::from_polar(r, TAU * j as f64 / CURVE_POINTS as f64)))
                .collect();
            (pts, sub)
        })
        .collect();
    curves.retain(|(pts, _)| pts.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    let all = curves.iter().flat_map(|(p, _)| p.iter().copied());
    let view = View2d::fit(all.chain(std::iter::once(sm.center)), a.width, a.height);
    let level: Rgb = [90, 140, 220];
    let sub: Rgb = [250, 210, 60];
    let center: Rgb = [230, 60, 60];
    Ok(match format {
        Format::Ppm => {
            let mut cv = Canvas::new(a.width, a.height, [0, 0, 0]);
            for (pts, is_sub) in &curves {
                for &z in pts {
                    let (x, y) = view.pixel(z);
                    cv.put(x, y, if *is_sub { sub } else { level });
                }
            }
            let (x, y) = view.pixel(sm.center);
            cv.square(x, y, 2, center);
            cv.to_ppm()
        }
        Format::Svg => {
            let mut s = svg_open(a.width, a.height);
            for (pts, is_sub) in &curves {
                let mut path = String::new();
                for &z in pts {
                    let (x, y) = view.pixel(z);
                    let _ = write!(path, "{x:.3},{y:.3} ");
                }
                let _ = writeln!(
                    s,
                    "<polygon class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\"/>",
                    if *is_sub { "sub-disk" } else { "level" },
                    path.trim_end(),
                    hex(if *is_sub { sub } else { level })
                );
            }
            let (x, y) = view.pixel(sm.center);
            let _ = writeln!(s, "<circle class=\"center\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{}\"/>", hex(center));
            s.push_str("</svg>\n");
            s.into_bytes()
        }
    })
}

/// Affine map from a bounding box of the plane to pixels.
struct View2d {
    center: Complex,
    scale: f64,
    width: usize,
    height: usize,
}

impl View2d {
    fn fit(points: impl Iterator<Item = Complex>, width: usize, height: usize) -> Self {
        let (mut lo, mut hi) = (Complex::new(f64::MAX, f64::MAX), Complex::new(f64::MIN, f64::MIN));
        for z in points {
            lo = Complex::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12) * 1.1;
        View2d {
            center: (lo + hi) / 2.0,
            scale: width.min(height) as f64 / span,
            width,
            height,
        }
    }

    fn pixel(&self, z: Complex) -> (f64, f64) {
        let d = (z - self.center) * self.scale;
        (self.width as f64 / 2.0 + d.re, self.height as f64 / 2.0 - d.im)
    }
}

/// Log-radial chart of `𝔻_R`: `z ↦ ln(1+|z|)/ln(1+R) · e^{i arg z}` scaled to
/// the image, so points from `|z| ~ 1` to `|z| ~ R` stay visible.
struct LogRadial {
    log_r: f64,
    half: f64,
    cx: f64,
    cy: f64,
}

impl LogRadial {
    fn pixel(&self, z: Complex) -> (f64, f64) {
        let rho = (1.0 + z.norm()).ln() / self.log_r * self.half;
        let t = z.arg();
        (self.cx + rho * t.cos(), self.cy - rho * t.sin())
    }

    /// Image radius of a small disk of radius `r` centered at `z`.
    fn radius(&self, z: Complex, r: f64) -> f64 {
        r / (1.0 + z.norm()) / self.log_r * self.half
    }
}

/// Orbit preimages `z⁽ᵏ⁾`, `k = 0..=kmax`, over the disks of `S` in `𝔻_R`.
fn orbit(a: &RenderArgs, format: Format) -> CliResult<Vec<u8>> {
    let set = a.set.build()?;
    let ib = inverse_branch(a.map.angle_or_golden()?, a.terms)?;
    let w = match &a.w {
        Some(s) => crate::args::parse_complex(s, "--w")?,
        None => ib.sm.sub_siegel_sample(1, a.seed)[0],
    };
    let mut points = ib.orbit_with_residuals(w, a.kmax)?;
    for p in &mut points {
        p.in_s = set.contains(p.z);
    }
    let big_r = a
        .r
        .unwrap_or_else(|| ib.enclosing_radius(a.kmax))
        .max(points.iter().map(|p| p.z.norm()).fold(0.0, f64::max));
    let disks = set.disks_within(big_r);
    let half = a.width.min(a.height) as f64 / 2.0 * 0.95;
    let chart = LogRadial {
        log_r: (1.0 + big_r).ln(),
        half,
        cx: a.width as f64 / 2.0,
        cy: a.height as f64 / 2.0,
    };
    let disk_color: Rgb = [60, 110, 170];
    let free: Rgb = [250, 250, 250];
    let hit: Rgb = [230, 60, 60];
    Ok(match format {
        Format::Ppm => {
            let mut cv = Canvas::new(a.width, a.height, [0, 0, 0]);
            for j in 0..4 * CURVE_POINTS {
                let t = TAU * j as f64 / (4 * CURVE_POINTS) as f64;
                cv.put(chart.cx + half * t.cos(), chart.cy - half * t.sin(), [120, 120, 120]);
            }
            for &(c, r) in &disks {
                let (x, y) = chart.pixel(c);
                cv.disk(x, y, chart.radius(c, r), disk_color);
            }
            for p in &points {
                let (x, y) = chart.pixel(p.z);
                cv.square(x, y, 2, if p.in_s { hit } else { free });
            }
            cv.to_ppm()
        }
        Format::Svg => {
            let mut s = svg_open(a.width, a.height);
            let _ = writeln!(
                s,
                "<!-- log-radial chart of |z| <= {big_r}: z -> ln(1+|z|)/ln(1+R) e^(i arg z) -->"
            );
            let _ = writeln!(
                s,
                "<circle class=\"boundary\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"{half:.3}\" fill=\"none\" stroke=\"#787878\"/>",
                chart.cx, chart.cy
            );
            for &(c, r) in &disks {
                let (x, y) = chart.pixel(c);
                let _ = writeln!(
                    s,
                    "<circle class=\"s-disk\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{:.4}\" fill=\"{}\"/>",
                    chart.radius(c, r),
                    hex(disk_color)
                );
            }
            for p in &points {
                let (x, y) = chart.pixel(p.z);
                let _ = writeln!(
                    s,
                    "<circle class=\"marker\" data-k=\"{}\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{}\"/>",
                    p.k,
                    hex(if p.in_s { hit } else { free })
                );
            }
            s.push_str("</svg>\n");
            s.into_bytes()
        }
    })
}
