//! Command-line front end.
//!
//! Every run writes `<subcommand>.json` (and CSV tables where declared) to
//! the output directory and echoes the JSON on stdout. Values come from
//! flags, then from the `--config` JSON file, then from defaults; the
//! resolved values are echoed under `"config"`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::bogoliubov::{
    assemble_bound, default_ell, ell_from_nu, kernels_beta, kernels_eff, AssembleConfig, BoundRegime, KernelSet,
    DEFAULT_KERNEL_CUTOFF,
};
use crate::born::{self, BornConfig, SamplerConfig};
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, LanczosConfig, ModeSet, Sector, Variant};
use crate::jastrow::{self, Estimator, JastrowState, McConfig};
use crate::lattice::{self, Acceleration, MomentumLattice};
use crate::potential::{PotentialSpec, RadialPotential, ScaledPotential};
use crate::scattering::{self, correlation_kernel};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DILUTE_BOSE_OUT";
/// Version tag of the JSON output schemas in `docs/schemas`.
pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Parser)]
#[command(name = "dilute-bose", version, about = "Energy bounds and oracles for dilute Bose gases")]
pub struct Cli {
    /// JSON file of default flag values (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $DILUTE_BOSE_OUT or the current directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write a gnuplot script for each CSV table.
    #[arg(long, global = true)]
    pub gnuplot_script: bool,
    /// Do not echo the JSON result on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a radial scattering problem.
    Scatter(ScatterArgs),
    /// Born series for the scaled scattering length.
    Born(BornArgs),
    /// Assemble an energy upper bound.
    Bound(BoundArgs),
    /// Finite-size lattice constant.
    Elambda(ElambdaArgs),
    /// Fock-space diagonalization against the Bogoliubov formula.
    FockCheck(FockArgs),
    /// Monte-Carlo energy of the pair-product trial state.
    Jastrow(JastrowArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scatter(_) => "scatter",
            Command::Born(_) => "born",
            Command::Bound(_) => "bound",
            Command::Elambda(_) => "elambda",
            Command::FockCheck(_) => "fock-check",
            Command::Jastrow(_) => "jastrow",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, serde::Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKindArg {
    SoftSphere,
    HardCore,
    Tabulated,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    #[arg(long, value_enum)]
    pub kind: Option<PotentialKindArg>,
    /// Soft-sphere height.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Soft-sphere or hard-core radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// CSV of `r,V(r)` for a tabulated potential.
    #[arg(long)]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, serde::Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Whole,
    Neumann,
    HardCore,
    Modified,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Which radial problem to solve.
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    /// Scaling exponent in (0, 1] (neumann).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Particle number.
    #[arg(long)]
    pub n: Option<u64>,
    /// Hard-core scattering length; the core radius is `a/N` (hard-core, modified).
    #[arg(long)]
    pub a: Option<f64>,
    /// Neumann radius.
    #[arg(long)]
    pub ell: Option<f64>,
    /// Outer radius of the modified problem.
    #[arg(long)]
    pub ell0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BornArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Scaling exponent in (0, 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Particle number.
    #[arg(long)]
    pub n: Option<u64>,
    /// Monte-Carlo samples per stochastic order.
    #[arg(long)]
    pub samples: Option<u64>,
    /// RNG seed of the Monte-Carlo orders.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Euclidean momentum cutoff (default `16 N^β / R_V`).
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Evaluate up to this order instead of `m_β`.
    #[arg(long)]
    pub order: Option<u32>,
    /// Compare with the radial-ODE scattering length.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, serde::Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RegimeArg {
    Beta,
    Gp,
    Hc,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Soft potential with scaling exponent, Gross-Pitaevskii, or hard core.
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Scaling exponent in (0, 1) (beta).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Particle number.
    #[arg(long)]
    pub n: Option<u64>,
    /// Scattering length (gp, hc).
    #[arg(long)]
    pub a: Option<f64>,
    /// Soft-sphere height (beta).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Soft-sphere radius (beta).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Exponent with `ℓ = N^{ν−1}` (hc kernels).
    #[arg(long)]
    pub ell_nu: Option<f64>,
    /// Outer radius of the modified problem (hc kernels).
    #[arg(long)]
    pub ell0: Option<f64>,
    /// Euclidean cutoff of the kernel table.
    #[arg(long)]
    pub kernel_cutoff: Option<f64>,
    /// Euclidean cutoff of the correction sum.
    #[arg(long)]
    pub correction_cutoff: Option<f64>,
    /// Cube size for the finite-size constant.
    #[arg(long)]
    pub mmax: Option<u32>,
    /// Monte-Carlo samples per Born order (beta).
    #[arg(long)]
    pub samples: Option<u64>,
    /// RNG seed of the Born orders (beta).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the kernel table.
    #[arg(long)]
    pub no_kernels: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum AccelArg {
    None,
    Cesaro,
    Richardson,
}

impl From<AccelArg> for Acceleration {
    fn from(a: AccelArg) -> Self {
        match a {
            AccelArg::None => Acceleration::None,
            AccelArg::Cesaro => Acceleration::CesaroAverage,
            AccelArg::Richardson => Acceleration::Richardson,
        }
    }
}

#[derive(Debug, Args)]
pub struct ElambdaArgs {
    /// Largest cube half-width `M`.
    #[arg(long)]
    pub mmax: Option<u32>,
    /// Acceleration of the cube partial sums.
    #[arg(long, value_enum)]
    pub accel: Option<AccelArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum VariantArg {
    A,
    B,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SectorArg {
    Pair,
    Full,
}

#[derive(Debug, Args)]
pub struct FockArgs {
    /// Number of `±p` mode pairs, taken from the shortest lattice vectors.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Truncation of the total excitation number.
    #[arg(long)]
    pub nmax: Option<u32>,
    /// Plain (a) or particle-number-corrected (b) operators.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Particle number for the b variant.
    #[arg(long)]
    pub n: Option<u64>,
    /// JSON file `{"f": [...], "g": [...]}` with one value per pair (or scalars).
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// `F` for every pair (overrides the default `p² + A`).
    #[arg(long)]
    pub f: Option<f64>,
    /// `G` for every pair (overrides the default `A`).
    #[arg(long)]
    pub g: Option<f64>,
    /// Coupling `A` of the default kernels.
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Pair-diagonal sector or the full truncated space.
    #[arg(long, value_enum)]
    pub sector: Option<SectorArg>,
    /// Lanczos residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum EstimatorArg {
    Local,
    Dirichlet,
}

#[derive(Debug, Args)]
pub struct JastrowArgs {
    /// Particle number.
    #[arg(long)]
    pub n: Option<usize>,
    /// Hard-core scattering length; the core radius is `a/N`.
    #[arg(long)]
    pub a: Option<f64>,
    /// Correlation radius.
    #[arg(long)]
    pub ell: Option<f64>,
    /// Comma-separated grid of `ℓ` values.
    #[arg(long, value_delimiter = ',')]
    pub ell_scan: Option<Vec<f64>>,
    /// Measured sweeps per chain.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Discarded sweeps per chain, used to tune the step size.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Independent chains.
    #[arg(long)]
    pub chains: Option<usize>,
    /// RNG seed; chain `i` uses stream `i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-sample energy estimator.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
}

/// Flag, then config file, then default; records what was used.
struct Resolver {
    file: Map<String, Value>,
    echo: Map<String, Value>,
}

impl Resolver {
    fn new(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => match serde_json::from_str::<Value>(&fs::read_to_string(p)?)? {
                Value::Object(m) => m,
                _ => return Err(Error::config("config file must hold a JSON object")),
            },
        };
        Ok(Self { file, echo: Map::new() })
    }

    fn opt<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    serde_json::from_value(raw.clone())
                        .map_err(|e| Error::config(format!("config key {key}: {e}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.echo.insert(key.into(), serde_json::to_value(v)?);
        }
        Ok(v)
    }

    fn get<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        match self.opt(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.echo.insert(key.into(), serde_json::to_value(&default)?);
                Ok(default)
            }
        }
    }

    fn req<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.opt(key, flag)?
            .ok_or_else(|| Error::config(format!("missing --{}", key.replace('_', "-"))))
    }

    fn positive(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        let v = self.get(key, flag, default)?;
        if !(v > 0.0) {
            return Err(Error::config(format!("{key} must be > 0, got {v}")));
        }
        Ok(v)
    }

    /// Potential from flags or from a `"potential"` object in the file.
    fn potential(&mut self, args: &PotentialArgs) -> Result<RadialPotential> {
        let spec = match args.kind {
            Some(PotentialKindArg::SoftSphere) => PotentialSpec::SoftSphere {
                height: self.req("kappa", args.kappa)?,
                radius: self.req("radius", args.radius)?,
            },
            Some(PotentialKindArg::HardCore) => PotentialSpec::HardCore {
                radius: self.req("radius", args.radius)?,
            },
            Some(PotentialKindArg::Tabulated) => PotentialSpec::Tabulated {
                path: self.req("path", args.path.clone())?,
            },
            None => self.req("potential", None::<PotentialSpec>)?,
        };
        self.echo.insert("potential".into(), serde_json::to_value(&spec)?);
        RadialPotential::from_spec(&spec)
    }
}

/// A finished run: JSON document plus CSV tables `(suffix, header, rows)`.
struct Output {
    json: Value,
    tables: Vec<(String, Vec<String>, Vec<Vec<f64>>)>,
}

fn with_envelope(name: &str, result: impl Serialize, echo: Map<String, Value>) -> Result<Value> {
    let mut v = serde_json::to_value(result)?;
    let Value::Object(m) = &mut v else {
        return Err(Error::config("result is not a JSON object"));
    };
    m.insert("schema".into(), json!(format!("dilute-bose/{name}/{SCHEMA_VERSION}")));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("config".into(), Value::Object(echo));
    Ok(v)
}

fn scatter(args: &ScatterArgs, r: &mut Resolver) -> Result<Output> {
    let problem = r.get("problem", args.problem, Problem::Whole)?;
    let sol = match problem {
        Problem::Whole => scattering::solve_whole_space(&r.potential(&args.potential)?)?,
        Problem::Neumann => {
            let v = r.potential(&args.potential)?;
            let s = ScaledPotential::new(v, r.req("n", args.n)?, r.req("beta", args.beta)?)?;
            scattering::solve_soft_neumann(&s, r.req("ell", args.ell)?)?
        }
        Problem::HardCore => scattering::solve_hard_core(r.req("a", args.a)?, r.req("n", args.n)?, r.req("ell", args.ell)?)?,
        Problem::Modified => {
            let hc = scattering::solve_hard_core(r.req("a", args.a)?, r.req("n", args.n)?, r.req("ell", args.ell)?)?;
            scattering::solve_modified(&hc, r.req("ell0", args.ell0)?)?
        }
    };
    let rows = sol.grid.iter().zip(&sol.f).map(|(&x, &f)| vec![x, f]).collect();
    let json = with_envelope("scatter", sol.summary(), std::mem::take(&mut r.echo))?;
    Ok(Output {
        json,
        tables: vec![(String::new(), vec!["r".into(), "f".into()], rows)],
    })
}

fn born_cmd(args: &BornArgs, r: &mut Resolver) -> Result<Output> {
    let v = r.potential(&args.potential)?;
    let beta = r.req("beta", args.beta)?;
    let n = r.req("n", args.n)?;
    let s = ScaledPotential::new(v, n, beta)?;
    let defaults = SamplerConfig::default();
    let cfg = BornConfig {
        sampler: SamplerConfig {
            samples: r.get("samples", args.samples, defaults.samples)?,
            seed: r.get("seed", args.seed, defaults.seed)?,
            ..defaults
        },
        force_order: r.opt("order", args.order)?,
        estimate_next: true,
    };
    let lattice = match r.opt("cutoff", args.cutoff)? {
        Some(k) => MomentumLattice::euclidean(k)?,
        None => born::default_lattice(&s)?,
    };
    let series = born::born_scattering_length(&s, &lattice, &cfg)?;
    let oracle = if r.get("oracle", args.oracle.then_some(true), false)? {
        Some(8.0 * PI * n as f64 * scattering::scattering_length_scaled(&s)?.value)
    } else {
        None
    };
    let mut json = with_envelope("born", &series, std::mem::take(&mut r.echo))?;
    json["oracle_value"] = json!(oracle);
    Ok(Output { json, tables: vec![] })
}

fn kernel_rows(k: &KernelSet) -> Vec<Vec<f64>> {
    k.points.iter().map(|p| vec![p.p2, p.diagonal, p.pairing, p.tau, p.dispersion]).collect()
}

fn bound_cmd(args: &BoundArgs, r: &mut Resolver) -> Result<Output> {
    let regime = r.req("regime", args.regime)?;
    let n = r.req("n", args.n)?;
    let defaults = AssembleConfig::default();
    let cfg = AssembleConfig {
        correction_cutoff: r.positive("correction_cutoff", args.correction_cutoff, defaults.correction_cutoff)?,
        e_lambda_m_max: r.get("mmax", args.mmax, defaults.e_lambda_m_max)?,
        born: BornConfig {
            sampler: SamplerConfig {
                samples: r.get("samples", args.samples, defaults.born.sampler.samples)?,
                seed: r.get("seed", args.seed, defaults.born.sampler.seed)?,
                ..defaults.born.sampler
            },
            ..defaults.born
        },
        ..defaults
    };
    let kernel_cutoff = r.positive("kernel_cutoff", args.kernel_cutoff, DEFAULT_KERNEL_CUTOFF)?;
    let with_kernels = !r.get("no_kernels", args.no_kernels.then_some(true), false)?;
    let (breakdown, kernels) = match regime {
        RegimeArg::Beta => {
            let kappa = r.req("kappa", args.kappa)?;
            let radius = r.req("radius", args.radius)?;
            let beta = r.req("beta", args.beta)?;
            let v = RadialPotential::soft_sphere(kappa, radius)?;
            let b = assemble_bound(
                &BoundRegime::Beta {
                    potential: v,
                    beta,
                    particles: n,
                },
                &cfg,
            )?;
            let k = if with_kernels {
                Some(kernel_rows(&beta_kernel_table(kappa, radius, beta, n, kernel_cutoff)?))
            } else {
                None
            };
            (b, k)
        }
        RegimeArg::Gp => {
            let a = r.req("a", args.a)?;
            let b = assemble_bound(&BoundRegime::Gp { scattering_length: a, particles: n }, &cfg)?;
            // F = p² + 8πa, G = 8πa
            let k = with_kernels.then(|| {
                let c = 8.0 * PI * a;
                MomentumLattice::euclidean(kernel_cutoff)
                    .map(|lat| {
                        lat.shells()
                            .iter()
                            .map(|s| {
                                let (f, g) = (s.p2() + c, c);
                                vec![s.p2(), f, g, -0.5 * (g / f).atanh(), (s.p2() * (s.p2() + 2.0 * c)).sqrt()]
                            })
                            .collect()
                    })
            });
            (b, k.transpose()?)
        }
        RegimeArg::Hc => {
            let a = r.req("a", args.a)?;
            let b = assemble_bound(&BoundRegime::HardCore { scattering_length: a, particles: n }, &cfg)?;
            let k = if with_kernels {
                let nu = r.get("ell_nu", args.ell_nu, 0.5)?;
                let ell0 = r.get("ell0", args.ell0, 0.1)?;
                let lat = MomentumLattice::euclidean(kernel_cutoff)?;
                let (ks, _) = kernels_eff(a, n, ell_from_nu(n, nu), ell0, &lat)?;
                Some(kernel_rows(&ks))
            } else {
                None
            };
            (b, k)
        }
    };
    let json = with_envelope("bound", &breakdown, std::mem::take(&mut r.echo))?;
    let tables = kernels
        .map(|rows| {
            vec![(
                "_kernels".to_string(),
                ["p2", "F", "G", "tau", "dispersion"].map(String::from).to_vec(),
                rows,
            )]
        })
        .unwrap_or_default();
    Ok(Output { json, tables })
}

fn elambda_cmd(args: &ElambdaArgs, r: &mut Resolver) -> Result<Output> {
    let m_max = r.get("mmax", args.mmax, 128)?;
    let accel = args.accel.map(Acceleration::from);
    let accel = r.get("accel", accel, Acceleration::CesaroAverage)?;
    let e = lattice::e_lambda(m_max, accel)?;
    let result = json!({
        "partial_sums": e.sums.cutoff_sequence,
        "cutoffs": e.sums.cutoffs,
        "accelerated": e.sums.accelerated,
        "extrapolated": e.sums.extrapolated,
        "error_estimate": e.sums.error_estimate,
        "e_lambda": e.e_lambda,
        "stability": e.stability,
        "acceleration": e.acceleration,
    });
    let rows = e
        .sums
        .cutoffs
        .iter()
        .zip(&e.sums.cutoff_sequence)
        .map(|(&m, &s)| vec![m, s])
        .collect();
    Ok(Output {
        json: with_envelope("elambda", result, std::mem::take(&mut r.echo))?,
        tables: vec![(String::new(), vec!["m".into(), "partial_sum".into()], rows)],
    })
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(self, pairs: usize) -> Result<Vec<f64>> {
        match self {
            OneOrMany::One(x) => Ok(vec![x; pairs]),
            OneOrMany::Many(v) if v.len() == pairs => Ok(v),
            OneOrMany::Many(v) => Err(Error::config(format!("{} kernel values for {pairs} pairs", v.len()))),
        }
    }
}

#[derive(serde::Deserialize)]
struct KernelFile {
    f: OneOrMany,
    g: OneOrMany,
}

fn fock_cmd(args: &FockArgs, r: &mut Resolver) -> Result<Output> {
    let pairs = r.get("pairs", args.pairs, 1)?;
    let n_max = r.get("nmax", args.nmax, 64)?;
    let variant = match args.variant {
        Some(VariantArg::A) => Some(Variant::A),
        Some(VariantArg::B) => Some(Variant::B),
        None => None,
    };
    let variant = r.get("variant", variant, Variant::A)?;
    let n = match variant {
        Variant::A => r.opt("n", args.n)?,
        Variant::B => Some(r.get("n", args.n, 1000)?),
    };
    let sector = match args.sector {
        Some(SectorArg::Full) => Some(Sector::Full),
        Some(SectorArg::Pair) => Some(Sector::PairDiagonal),
        None => None,
    };
    let sector = r.get("sector", sector, Sector::PairDiagonal)?;
    let tol = r.positive("tol", args.tol, 1e-10)?;
    let modes = ModeSet::first_pairs(pairs)?;
    let (mut f, mut g): (Vec<f64>, Vec<f64>) = match r.opt("kernels", args.kernels.clone())? {
        Some(path) => {
            let k: KernelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            (k.f.expand(pairs)?, k.g.expand(pairs)?)
        }
        None => {
            let c = r.get("coupling", args.coupling, 8.0 * PI)?;
            (0..pairs).map(|i| (modes.p2(2 * i) + c, c)).unzip()
        }
    };
    if let Some(x) = r.opt("f", args.f)? {
        f = vec![x; pairs];
    }
    if let Some(x) = r.opt("g", args.g)? {
        g = vec![x; pairs];
    }
    let per_mode = |v: &[f64]| v.iter().flat_map(|&x| [x, x]).collect::<Vec<f64>>();
    let (fm, gm) = (per_mode(&f), per_mode(&g));
    let formula = fock::pair_formula(&fm, &gm)?;
    let basis = FockBasis::new(modes.clone(), n_max, sector)?;
    let q = fock::build_quadratic(&fm, &gm, &basis, variant, n)?;
    let gs = fock::ground_state(&q, &LanczosConfig { tol, ..Default::default() })?;
    let diag = fock::diagnostics(&gs.vector, &basis, &[2.5])?;
    let result = json!({
        "ground_energy": gs.energy,
        "formula_value": formula,
        "gap": (gs.energy - formula).abs(),
        "dimension": basis.dimension(),
        "residuals": {
            "lanczos": gs.residual,
            "symmetry": q.symmetry_defect(),
            "iterations": gs.iterations,
        },
        "diagnostics": diag,
        "pairs": modes.modes().iter().step_by(2).zip(f.iter().zip(&g))
            .map(|(m, (f, g))| json!({"mode": m, "diagonal": f, "pairing": g})).collect::<Vec<_>>(),
    });
    Ok(Output {
        json: with_envelope("fock-check", result, std::mem::take(&mut r.echo))?,
        tables: vec![],
    })
}

fn jastrow_cmd(args: &JastrowArgs, r: &mut Resolver) -> Result<Output> {
    let n = r.req("n", args.n)?;
    let a = r.req("a", args.a)?;
    let defaults = McConfig::default();
    let estimator = match args.estimator {
        Some(EstimatorArg::Local) => Some(Estimator::LocalEnergy),
        Some(EstimatorArg::Dirichlet) => Some(Estimator::Dirichlet),
        None => None,
    };
    let cfg = McConfig {
        steps: r.get("steps", args.steps, defaults.steps)?,
        warmup: r.get("warmup", args.warmup, defaults.warmup)?,
        chains: r.get("chains", args.chains, defaults.chains)?,
        seed: r.get("seed", args.seed, defaults.seed)?,
        estimator: r.get("estimator", estimator, defaults.estimator)?,
        ..defaults
    };
    let header = ["ell", "energy", "std_error"].map(String::from).to_vec();
    if let Some(grid) = r.opt("ell_scan", args.ell_scan.clone())? {
        let scan = jastrow::ell_scan(n, a, &grid, &cfg)?;
        let rows = scan.rows.iter().map(|x| vec![x.ell, x.energy, x.std_error]).collect();
        return Ok(Output {
            json: with_envelope("jastrow", &scan, std::mem::take(&mut r.echo))?,
            tables: vec![(String::new(), header, rows)],
        });
    }
    let ell = r.req("ell", args.ell)?;
    let state = JastrowState::new(n, a, ell)?;
    let est = jastrow::metropolis_run(&state, &cfg)?;
    let exact = if n == 2 { Some(jastrow::two_body_energy_from_lambda(&state)?) } else { None };
    let result = json!({
        "particles": n,
        "scattering_length": a,
        "estimates": [{"ell": ell, "estimate": est}],
        "two_body_exact": exact,
        "leading": 4.0 * PI * a * n as f64,
    });
    Ok(Output {
        json: with_envelope("jastrow", result, std::mem::take(&mut r.echo))?,
        tables: vec![(String::new(), header, vec![vec![ell, est.mean, est.std_error]])],
    })
}

fn write_outputs(cli: &Cli, name: &str, out: &Output) -> Result<()> {
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let text = serde_json::to_string_pretty(&out.json)?;
    fs::write(dir.join(format!("{name}.json")), &text)?;
    for (suffix, header, rows) in &out.tables {
        let file = dir.join(format!("{name}{suffix}.csv"));
        let mut w = csv::Writer::from_path(&file)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        if cli.gnuplot_script {
            let script = format!(
                "set datafile separator ','\nset key autotitle columnhead\nplot {}\n",
                (2..=header.len())
                    .map(|c| format!("'{name}{suffix}.csv' using 1:{c} with linespoints"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            fs::write(dir.join(format!("{name}{suffix}.gp")), script)?;
        }
    }
    if !cli.quiet {
        println!("{text}");
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::config("--threads must be positive"));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            warn!("thread pool already initialized; --threads ignored");
        }
    }
    let mut r = Resolver::new(cli.config.as_deref())?;
    let out = match &cli.command {
        Command::Scatter(a) => scatter(a, &mut r)?,
        Command::Born(a) => born_cmd(a, &mut r)?,
        Command::Bound(a) => bound_cmd(a, &mut r)?,
        Command::Elambda(a) => elambda_cmd(a, &mut r)?,
        Command::FockCheck(a) => fock_cmd(a, &mut r)?,
        Command::Jastrow(a) => jastrow_cmd(a, &mut r)?,
    };
    write_outputs(cli, cli.command.name(), &out)
}

/// Parse `argv` and run; returns the process exit code (0 success, 1 domain
/// or configuration error, 2 numerical failure).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Kernel table of the β regime at the default `ℓ`, for callers outside
/// the CLI.
pub fn beta_kernel_table(kappa: f64, radius: f64, beta: f64, n: u64, cutoff: f64) -> Result<KernelSet> {
    let s = ScaledPotential::new(RadialPotential::soft_sphere(kappa, radius)?, n, beta)?;
    let sol = scattering::solve_soft_neumann(&s, default_ell(n, beta))?;
    let lat = MomentumLattice::euclidean(cutoff)?;
    let kern = correlation_kernel(&sol, &lat, n)?;
    kernels_beta(&s, &sol, &kern, &lat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> (i32, Option<Value>) {
        let mut argv = vec!["dilute-bose", "--quiet", "--out-dir", dir.to_str().unwrap()];
        argv.extend_from_slice(args);
        let code = run(argv);
        let names = ["scatter", "born", "bound", "elambda", "fock-check", "jastrow"];
        let name = args.iter().find(|a| names.contains(a)).unwrap();
        let json = fs::read_to_string(dir.join(format!("{name}.json")))
            .ok()
            .map(|t| serde_json::from_str(&t).unwrap());
        (code, json)
    }

    #[test]
    fn hard_core_bound() {
        let dir = tempfile::tempdir().unwrap();
        let (code, json) = run_in(dir.path(), &["bound", "--regime", "hc", "--a", "1", "--n", "10000", "--no-kernels"]);
        assert_eq!(code, 0);
        let j = json.unwrap();
        assert_eq!(j["leading"].as_f64().unwrap(), 4.0 * PI * 9999.0);
        assert_eq!(j["schema"], "dilute-bose/bound/v1");
        assert_eq!(j["config"]["n"], 10000);
    }

    #[test]
    fn elambda_sequence_length() {
        let dir = tempfile::tempdir().unwrap();
        let (code, json) = run_in(dir.path(), &["elambda", "--mmax", "64", "--accel", "cesaro"]);
        assert_eq!(code, 0);
        let j = json.unwrap();
        assert_eq!(j["partial_sums"].as_array().unwrap().len(), 64);
        assert!(dir.path().join("elambda.csv").exists());
    }

    #[test]
    fn fock_check_with_kernel_file() {
        let dir = tempfile::tempdir().unwrap();
        let kf = dir.path().join("k.json");
        fs::write(&kf, r#"{"f": 5.0, "g": 3.0}"#).unwrap();
        let (code, json) = run_in(
            dir.path(),
            &["fock-check", "--pairs", "1", "--nmax", "64", "--variant", "a", "--kernels", kf.to_str().unwrap()],
        );
        assert_eq!(code, 0);
        assert!(json.unwrap()["gap"].as_f64().unwrap() <= 1e-6);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["elambda", "--bogus"]).0, 1);
        assert_eq!(run_in(dir.path(), &["bound", "--regime", "hc", "--a=-1", "--n", "10", "--no-kernels"]).0, 1);
        assert_eq!(run_in(dir.path(), &["bound", "--regime", "hc", "--n", "10"]).0, 1);
        assert_eq!(run(["dilute-bose", "--help"]), 0);
    }

    #[test]
    fn config_file_merges_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cf = dir.path().join("run.json");
        fs::write(&cf, r#"{"problem": "hard_core", "a": 1.0, "n": 100, "ell": 0.2}"#).unwrap();
        let (code, json) = run_in(dir.path(), &["--config", cf.to_str().unwrap(), "scatter", "--ell", "0.3"]);
        assert_eq!(code, 0);
        let j = json.unwrap();
        assert_eq!(j["ell"], 0.3);
        assert_eq!(j["config"]["a"], 1.0);
        let rows = fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
        assert!(rows.starts_with("r,f"));
    }

    #[test]
    fn echoed_config_reproduces_run() {
        let dir = tempfile::tempdir().unwrap();
        let args = ["jastrow", "--n", "3", "--a", "0.2", "--ell", "0.2", "--steps", "300", "--warmup", "40", "--chains", "1"];
        let (_, first) = run_in(dir.path(), &args);
        let first = first.unwrap();
        let cf = dir.path().join("echo.json");
        fs::write(&cf, first["config"].to_string()).unwrap();
        let (code, second) = run_in(dir.path(), &["--config", cf.to_str().unwrap(), "jastrow"]);
        assert_eq!(code, 0);
        assert_eq!(first["estimates"], second.unwrap()["estimates"]);
    }
}
