use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use renewal_bias::{Method, Shape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "renewal-bias",
    version,
    about = "Hidden-bias estimation at renewal times"
)]
pub struct Cli {
    /// Progress messages on standard error (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one observation sequence and write it as CSV.
    Simulate(SimulateArgs),
    /// Confidence interval for theta (or delta) from an observation CSV.
    Estimate(EstimateArgs),
    /// Interval trajectories across horizons.
    Sweep(ExperimentArgs),
    /// Empirical coverage per horizon.
    Coverage(ExperimentArgs),
    /// Recurrence class, fitted growth exponent and convergence verdict for a family.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Coin,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Chebyshev,
    Hoeffding,
    Normal,
}

impl From<RuleArg> for Method {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Chebyshev => Method::Chebyshev,
            RuleArg::Hoeffding => Method::Hoeffding,
            RuleArg::Normal => Method::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Gaussian,
    UniformBounded,
    BernoulliScaled,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Gaussian => Shape::Gaussian,
            ShapeArg::UniformBounded => Shape::UniformBounded,
            ShapeArg::BernoulliScaled => Shape::BernoulliScaled,
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct FamilyArgs {
    /// Renewal family: bernoulli, srw_z, srw_z2, defective_geometric, srw_zd, powerlaw_tail.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// Extra family parameter as key=value.
    #[arg(long = "param", value_parser = parse_key_value)]
    pub params: Vec<(String, f64)>,
}

impl FamilyArgs {
    pub fn param_overrides(&self) -> BTreeMap<String, f64> {
        let mut map: BTreeMap<String, f64> = self.params.iter().cloned().collect();
        for (key, value) in [
            ("p", self.p),
            ("mass", self.mass),
            ("beta", self.beta),
            ("d", self.d),
        ] {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        }
        map
    }
}

fn parse_key_value(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected a,b, got `{s}`"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|_| format!("`{a}` is not a number"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|_| format!("`{b}` is not a number"))?;
    Ok((a, b))
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Coin bias in [-1/2, 1/2].
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Base mean M of the L2 model.
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    /// Mean shift at renewals (simulation only).
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma_w: Option<f64>,
    /// Support bounds as a,b.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub bounds: Option<(f64, f64)>,
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also emit the renewal indicator column.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Observation CSV with a `value` column.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_enum, default_value = "coin")]
    pub model: ModelKind,
    /// Known base mean M (L2 model).
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    /// Known standard deviation (L2 model).
    #[arg(long)]
    pub sigma_w: Option<f64>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub bounds: Option<(f64, f64)>,
    #[arg(long, value_enum, default_value = "hoeffding")]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    /// Subtract the correction constant k.
    #[arg(long)]
    pub apply_k: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated, strictly increasing horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub apply_k: bool,
    /// Output directory for artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Largest horizon; the report uses the decades n-max/100, n-max/10, n-max.
    #[arg(long, conflicts_with = "horizons")]
    pub n_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "hoeffding")]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
