use crate::{CliError, CliResult};
use clap::{Args, Parser, Subcommand, ValueEnum};
use poincare_lab::dyncore::QuadMap;
use poincare_lab::sets::{make_annular_sectors, make_powerlaw_set, SetModel};
use poincare_lab::siegel::RotationAngle;
use poincare_lab::{cplx, Complex};
use std::path::PathBuf;

/// Poincaré functions of quadratic polynomials: series, Siegel linearizers,
/// orbit preimages and exceptional-set experiments.
#[derive(Debug, Parser)]
#[command(name = "poincare-lab", version)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "POINCARE_LAB_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Directory receiving CSV/JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poincaré series and evaluation table.
    Poincare(PoincareArgs),
    /// Siegel linearizer series and conjugacy residuals.
    Siegel(SiegelArgs),
    /// Orbit preimages of one w, cross-checked by the argument principle.
    Preimages(PreimageArgs),
    /// Exceptional-set survey over sampled w in the sub-Siegel disk.
    Exceptional(ExceptionalArgs),
    /// Spherical-derivative integrals over the unit disk.
    Littlewood(LittlewoodArgs),
    /// Parameter pipeline of the family z^2 + c towards c = -2.
    Chebyshev(ChebyshevArgs),
    /// Monte Carlo density of a set against its certificate.
    Density(DensityArgs),
    /// Static PPM or SVG image.
    Render(RenderArgs),
}

/// Choice of quadratic map.
#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    /// `λ`-form map `λz + z²` with `λ = e^{2πiγ}`: `golden`, `near-half` or a
    /// number in (0,1).
    #[arg(long, conflicts_with_all = ["c", "gamma_cf"])]
    pub lambda_gamma: Option<String>,
    /// `λ`-form map with `γ` given by partial quotients `a1,a2,…`.
    #[arg(long, value_delimiter = ',', conflicts_with = "c")]
    pub gamma_cf: Option<Vec<u64>>,
    /// `c`-form map `z² + c`, given as `RE,IM`.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    /// Repelling fixed point used for the Poincaré function (`c`-form only).
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<String>,
}

pub enum MapSpec {
    Lambda(RotationAngle),
    C(Complex),
}

impl MapArgs {
    pub fn spec(&self) -> CliResult<Option<MapSpec>> {
        if let Some(c) = &self.c {
            return Ok(Some(MapSpec::C(parse_complex(c, "--c")?)));
        }
        Ok(self.angle()?.map(MapSpec::Lambda))
    }

    pub fn require(&self) -> CliResult<MapSpec> {
        self.spec()?.ok_or_else(|| {
            CliError::Usage("a map is required: --lambda-gamma G | --gamma-cf A,B,.. | --c RE,IM".into())
        })
    }

    /// The rotation angle, if the map was given in `λ`-form.
    pub fn angle(&self) -> CliResult<Option<RotationAngle>> {
        if let Some(g) = &self.lambda_gamma {
            return parse_angle(g).map(Some);
        }
        if let Some(cf) = &self.gamma_cf {
            return Ok(Some(RotationAngle::from_cf(cf)?));
        }
        Ok(None)
    }

    /// The angle, golden mean when none was given.
    pub fn angle_or_golden(&self) -> CliResult<RotationAngle> {
        if self.c.is_some() {
            return Err(CliError::Usage("this command needs a λ-form map, not --c".into()));
        }
        Ok(self.angle()?.unwrap_or_else(RotationAngle::golden))
    }

    pub fn z0(&self) -> CliResult<Option<Complex>> {
        self.z0.as_deref().map(|s| parse_complex(s, "--z0")).transpose()
    }
}

impl MapSpec {
    pub fn quad_map(&self) -> QuadMap {
        match self {
            MapSpec::Lambda(a) => QuadMap::lambda_form(a.lambda),
            MapSpec::C(c) => QuadMap::c_form(*c),
        }
    }
}

pub fn parse_angle(s: &str) -> CliResult<RotationAngle> {
    match s {
        "golden" => Ok(RotationAngle::golden()),
        "near-half" => Ok(RotationAngle::near_half()),
        other => {
            let g: f64 = other
                .parse()
                .map_err(|_| CliError::Usage(format!("--lambda-gamma: cannot parse {other:?}")))?;
            Ok(RotationAngle::new(g)?)
        }
    }
}

pub fn parse_complex(s: &str, flag: &str) -> CliResult<Complex> {
    cplx::parse(s).ok_or_else(|| CliError::Usage(format!("{flag}: expected RE,IM, got {s:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetChoice {
    Empty,
    Powerlaw,
    Sectors,
}

/// Choice of the set `S`.
#[derive(Debug, Clone, Args)]
pub struct SetArgs {
    #[arg(long = "set", value_enum, default_value = "powerlaw")]
    pub kind: SetChoice,
    /// Density constant `C`.
    #[arg(long = "C", default_value_t = 10.0)]
    pub big_c: f64,
    /// Decay exponent `δ ∈ (0, 2)`.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// Seed of the disk placement.
    #[arg(long, default_value_t = 0)]
    pub set_seed: u64,
}

impl SetArgs {
    pub fn build(&self) -> CliResult<SetModel> {
        Ok(match self.kind {
            SetChoice::Empty => SetModel::empty(),
            SetChoice::Powerlaw => make_powerlaw_set(self.big_c, self.delta, self.set_seed)?,
            SetChoice::Sectors => make_annular_sectors(self.big_c, self.delta)?,
        })
    }
}

#[derive(Debug, Args)]
pub struct PoincareArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 64)]
    pub terms: usize,
    /// Evaluation points `RE,IM`; repeat the flag for several. Defaults to 16
    /// points on each of the circles |z| = 0.5 r0, 5 r0, 50 r0.
    #[arg(long, allow_hyphen_values = true)]
    pub eval: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SiegelArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 256)]
    pub terms: usize,
    /// Radius fraction of the sub-Siegel disk.
    #[arg(long, default_value_t = 0.5)]
    pub sub_fraction: f64,
}

#[derive(Debug, Args)]
pub struct PreimageArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub set: SetArgs,
    /// Target value `RE,IM`; sampled from the sub-Siegel disk when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Radius of the argument-principle disk.
    #[arg(long, default_value_t = 1000.0)]
    pub r: f64,
    #[arg(long, default_value_t = 20)]
    pub kmax: usize,
    #[arg(long, default_value_t = 64)]
    pub terms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExceptionalArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long, default_value_t = 30)]
    pub kmax: usize,
    /// Number of sampled `w`.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Iterates,
    Monomial,
}

#[derive(Debug, Args)]
pub struct LittlewoodArgs {
    #[arg(long, value_enum, default_value = "iterates")]
    pub family: Family,
    /// Parameter of the iterate family, `RE,IM`.
    #[arg(long, allow_hyphen_values = true, default_value = "-1,0")]
    pub c: String,
    /// Iterates `n = 1..=nmax`, or monomials `z^(2^j)` for `j = 0..=nmax`.
    #[arg(long, default_value_t = 10)]
    pub nmax: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Evaluation budget of the adaptive rule per integral.
    #[arg(long, default_value_t = poincare_lab::littlewood::EVALUATION_BUDGET)]
    pub budget: u64,
    /// Fail with exit code 4 instead of falling back to Monte Carlo.
    #[arg(long)]
    pub strict: bool,
    /// Seed of the Monte Carlo fallback.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ChebyshevArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub q: Vec<usize>,
    /// Leading partial quotients of `γ`; padded with 1s to 40 terms.
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda_gamma")]
    pub gamma_cf: Option<Vec<u64>>,
    #[arg(long)]
    pub lambda_gamma: Option<String>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub set: SetArgs,
    /// Radii; defaults to 2^j for j = 0..20.
    #[arg(long, value_delimiter = ',')]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum View {
    Domain,
    Siegel,
    Orbit,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_enum)]
    pub what: View,
    /// Output file ending in `.ppm` or `.svg`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub set: SetArgs,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    /// Half-width of the domain view, or radius of the orbit view.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Target of the orbit view; sampled from the sub-Siegel disk when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub terms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
