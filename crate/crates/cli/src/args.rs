use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vstruct_core::analytic::Family;
use vstruct_core::model::{
    from_effect_params, parse_params, Design, EffectParams, Regime, VStructParams,
};
use vstruct_core::numeric::{format_rational, parse_rational};
use vstruct_core::report::Method;
use vstruct_core::{Error, Result};

type Exact = num_rational::BigRational;

#[derive(Parser, Debug)]
#[command(
    name = "vstruct",
    version,
    about = "Moments of the raw-conditional and marginalisation estimators on a binary v-structure"
)]
pub struct Cli {
    /// TOML file of `key = value` defaults; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "VSTRUCT_WORKERS")]
    pub workers: Option<usize>,

    /// Write the artifact here instead of stdout; a manifest with a
    /// timestamp is written next to it as `<FILE>.manifest.json`.
    #[arg(long, short, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Write the run manifest to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Closed-form moments: C[R,M] for random X, V[R], V[M], C[M,R] for fixed X.
    Analytic(AnalyticArgs),
    /// Exact moments by summing over every multinomial outcome.
    Enumerate(EnumerateArgs),
    /// Random-X moments as a binomial mixture of fixed-design moments over the treated-arm size.
    Mixture(MixtureArgs),
    /// Seeded Monte Carlo of R and M.
    Simulate(SimulateArgs),
    /// Grid sweep over the treatment fraction and C, as CSV or JSON.
    Sweep(SweepArgs),
    /// Analytic-versus-enumeration grid, errata checks and golden values.
    Verify(VerifyArgs),
    /// Re-run the command recorded in a manifest or artifact.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// P(X = 1); fractions such as 1/3 are parsed exactly.
    #[arg(long)]
    pub px: Option<String>,
    /// P(Z = 1).
    #[arg(long)]
    pub pz: Option<String>,
    /// P(Y = 1 | X, Z) for stratum 2X + Z, as four comma-separated values.
    #[arg(long, value_name = "P0,P1,P2,P3")]
    pub py: Option<String>,
    /// Outcome level at X = 0; with --q1, --c and --d an
    /// alternative to --py.
    #[arg(long)]
    pub q0: Option<String>,
    /// Outcome level at X = 1.
    #[arg(long)]
    pub q1: Option<String>,
    /// Effect of Z on Y.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    /// X-by-Z interaction (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<String>,
}

fn named(name: &str, text: &str) -> Result<Exact> {
    parse_rational(text).map_err(|e| Error::domain(name, e.to_string()))
}

impl ParamArgs {
    /// Exact parameters. `p_X` is required only for the random design.
    pub fn resolve(&self, regime: Regime) -> Result<VStructParams<Exact>> {
        let pz = self
            .pz
            .as_deref()
            .ok_or_else(|| Error::domain("pz", "missing --pz"))?;
        let px = match (&self.px, regime) {
            (Some(px), _) => px.as_str(),
            (None, Regime::Fixed) => "1/2",
            (None, Regime::Random) => return Err(Error::domain("px", "missing --px")),
        };
        if let Some(py) = &self.py {
            if self.q0.is_some() || self.q1.is_some() || self.c.is_some() {
                return Err(Error::domain(
                    "py",
                    "give either --py or --q0/--q1/--c/--d, not both",
                ));
            }
            let parts: Vec<&str> = py.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(Error::domain(
                    "py",
                    format!("expected four values, got {}", parts.len()),
                ));
            }
            return parse_params(px, pz, [parts[0], parts[1], parts[2], parts[3]]);
        }
        fn need<'a>(name: &str, v: &'a Option<String>) -> Result<&'a str> {
            v.as_deref()
                .ok_or_else(|| Error::domain(name, format!("missing --{name} (or give --py)")))
        }
        let e = EffectParams {
            q0: named("q0", need("q0", &self.q0)?)?,
            q1: named("q1", need("q1", &self.q1)?)?,
            c: named("c", need("c", &self.c)?)?,
            d: named("d", self.d.as_deref().unwrap_or("0"))?,
            pz: named("pz", pz)?,
            px: named("px", px)?,
        };
        from_effect_params(&e)
    }
}

/// Parameters as recorded in manifests.
pub fn params_json(p: &VStructParams<Exact>, regime: Regime) -> serde_json::Value {
    let mut v = json!({
        "pz": format_rational(&p.pz),
        "py": p.py.iter().map(format_rational).collect::<Vec<_>>(),
    });
    if regime == Regime::Random {
        v["px"] = json!(format_rational(&p.px));
    }
    v
}

#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    /// `random` (X drawn with P(X = 1) = px) or `fixed` (arm sizes n0, n1).
    #[arg(long, alias = "design", default_value = "random")]
    pub regime: Regime,
    /// Sample size (random design).
    #[arg(long)]
    pub n: Option<u32>,
    /// Control-arm size (fixed design).
    #[arg(long)]
    pub n0: Option<u32>,
    /// Treated-arm size (fixed design).
    #[arg(long)]
    pub n1: Option<u32>,
}

impl DesignArgs {
    pub fn design(&self) -> Result<Design> {
        match self.regime {
            Regime::Random => {
                Design::random(self.n.ok_or_else(|| Error::domain("n", "missing --n"))?)
            }
            Regime::Fixed => {
                let n0 = self.n0.ok_or_else(|| Error::domain("n0", "missing --n0"))?;
                let n1 = self.n1.ok_or_else(|| Error::domain("n1", "missing --n1"))?;
                if let Some(n) = self.n.filter(|&n| n != n0 + n1) {
                    return Err(Error::domain("n", format!("{n} != n0 + n1 = {}", n0 + n1)));
                }
                Design::fixed(n0, n1)
            }
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    /// `large-sample` (the published closed forms) or `exact` (conditional
    /// moments, equal to enumeration at every N).
    #[arg(long, default_value = "large-sample")]
    pub family: Family,
    /// Add the term-by-term breakdown of the closed forms.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    /// Sum in exact rational arithmetic and also report the fractions.
    #[arg(long)]
    pub rational: bool,
    /// Largest random-design N to enumerate.
    #[arg(long, default_value_t = 16)]
    pub max_n: u32,
    /// Largest fixed-design support to enumerate.
    #[arg(long, default_value_t = 5_000_000)]
    pub max_support: u64,
}

#[derive(Args, Debug, Clone)]
pub struct MixtureArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub n: u32,
    /// `large-sample` mixes the closed forms, `exact` the conditional moments.
    #[arg(long, default_value = "large-sample")]
    pub family: Family,
    /// Exact rational arithmetic (exact family only).
    #[arg(long)]
    pub rational: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draws per independently seeded chunk; part of the result's identity.
    #[arg(long, default_value_t = 1 << 16)]
    pub chunk_size: u64,
    /// Extra alpha values at which to report V[P(alpha)].
    #[arg(long = "alpha", value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, alias = "design", default_value = "random")]
    pub regime: Regime,
    #[arg(long)]
    pub n: u32,
    /// Treatment fraction axis: p_X (random) or xi (fixed).
    #[arg(long, alias = "px-from", alias = "xi-from")]
    pub frac_from: f64,
    #[arg(long, alias = "px-to", alias = "xi-to")]
    pub frac_to: f64,
    #[arg(long, alias = "px-steps", alias = "xi-steps", default_value_t = 21)]
    pub frac_steps: u32,
    /// C axis; see also --c-full-range.
    #[arg(long, allow_negative_numbers = true)]
    pub c_from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_to: Option<f64>,
    #[arg(long, default_value_t = 21)]
    pub c_steps: u32,
    /// Span every C keeping the induced p_Y in [0, 1].
    #[arg(long, conflicts_with_all = ["c_from", "c_to"])]
    pub c_full_range: bool,
    /// Divide every C by this, as for zoomed plots at larger N.
    #[arg(long, default_value_t = 1.0)]
    pub zoom: f64,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub d: String,
    #[arg(long)]
    pub q0: String,
    #[arg(long)]
    pub q1: String,
    #[arg(long)]
    pub pz: String,
    /// Default: mixture (random) or analytic (fixed).
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, default_value = "large-sample")]
    pub family: Family,
    /// Monte Carlo repetitions per point with --method monte-carlo.
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `csv` or `json`.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Largest random-design N compared with enumeration.
    #[arg(long, default_value_t = 8)]
    pub nmax: u32,
    /// Largest arm size in the fixed-design comparison.
    #[arg(long, default_value_t = 5)]
    pub arm_max: u32,
    /// Largest N in the mixture-versus-enumeration comparison.
    #[arg(long, default_value_t = 10)]
    pub mixture_nmax: u32,
    /// Parameter sets drawn from the full grid.
    #[arg(long, default_value_t = 20)]
    pub grid_size: usize,
    /// Absolute tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Also re-evaluate the bundled golden values.
    #[arg(long)]
    pub golden: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// A manifest, or an artifact with an embedded manifest.
    pub file: PathBuf,
}
