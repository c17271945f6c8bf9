use std::path::{Path, PathBuf};

use renewal_bias::{ExperimentConfig, FamilySpec, Method, ModelSpec, RuleSpec, Shape};
use serde::{Deserialize, Serialize};

use crate::args::{ExperimentArgs, Format, ModelArgs, ModelKind};
use crate::CliError;

/// Experiment file layout: every field of the experiment config plus output
/// plumbing. All fields are optional here; flags fill or override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub family: Option<FamilySpec>,
    pub model: Option<ModelSpec>,
    pub rule: Option<RuleSpec>,
    pub horizons: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub apply_k: Option<bool>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub verbosity: Option<u8>,
    pub threads: Option<usize>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Everything a sweep or coverage run needs after merging file and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub out: PathBuf,
    pub format: Format,
    pub verbosity: u8,
    pub threads: Option<usize>,
}

pub fn resolve(args: &ExperimentArgs, verbose: u8) -> Result<Resolved, CliError> {
    let file = match &args.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };

    let family = {
        let overrides = args.family.param_overrides();
        match (&args.family.family, file.family) {
            (Some(name), Some(spec)) if *name == spec.name => {
                let mut params = spec.params;
                params.extend(overrides);
                FamilySpec {
                    name: name.clone(),
                    params,
                }
            }
            (Some(name), _) => FamilySpec {
                name: name.clone(),
                params: overrides,
            },
            (None, Some(mut spec)) => {
                spec.params.extend(overrides);
                spec
            }
            (None, None) => return Err(missing("family")),
        }
    };

    let model = merge_model(&args.model, file.model)?;

    let rule = {
        let base = file.rule;
        let method = args
            .rule
            .map(Method::from)
            .or(base.map(|r| r.method))
            .unwrap_or(Method::Hoeffding);
        let gamma = args.gamma.or(base.map(|r| r.gamma)).unwrap_or(0.95);
        RuleSpec { method, gamma }
    };

    let experiment = ExperimentConfig {
        family,
        model,
        rule,
        horizons: args
            .horizons
            .clone()
            .or(file.horizons)
            .ok_or_else(|| missing("horizons"))?,
        trials: args
            .trials
            .or(file.trials)
            .ok_or_else(|| missing("trials"))?,
        master_seed: args.seed.or(file.master_seed).unwrap_or(0),
        apply_k: args.apply_k || file.apply_k.unwrap_or(false),
    };
    experiment.validate()?;

    Ok(Resolved {
        experiment,
        out: args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(".")),
        format: args.format.or(file.format).unwrap_or(Format::Both),
        verbosity: verbose.max(file.verbosity.unwrap_or(0)),
        threads: args.threads.or(file.threads),
    })
}

fn missing(what: &str) -> CliError {
    CliError::Input(format!("missing `{what}` (flag or config file)"))
}

/// Build a model from flags, falling back to the file model of the same kind.
pub fn merge_model(flags: &ModelArgs, file: Option<ModelSpec>) -> Result<ModelSpec, CliError> {
    let file_kind = file.as_ref().map(|m| match m {
        ModelSpec::Coin { .. } => ModelKind::Coin,
        ModelSpec::L2 { .. } => ModelKind::L2,
    });
    let inferred = if flags.theta.is_some() {
        Some(ModelKind::Coin)
    } else if flags.delta.is_some() || flags.mean.is_some() {
        Some(ModelKind::L2)
    } else {
        None
    };
    let kind = flags
        .model
        .or(file_kind)
        .or(inferred)
        .ok_or_else(|| missing("model"))?;
    let base = if file_kind == Some(kind) { file } else { None };

    match kind {
        ModelKind::Coin => {
            let theta = match (flags.theta, base) {
                (Some(t), _) => t,
                (None, Some(ModelSpec::Coin { theta })) => theta,
                _ => return Err(missing("theta")),
            };
            Ok(ModelSpec::Coin { theta })
        }
        ModelKind::L2 => {
            let (mean, delta, sigma_w, bounds, shape) = match base {
                Some(ModelSpec::L2 {
                    mean,
                    delta,
                    sigma_w,
                    bounds,
                    shape,
                }) => (Some(mean), Some(delta), Some(sigma_w), bounds, Some(shape)),
                _ => (None, None, None, None, None),
            };
            Ok(ModelSpec::L2 {
                mean: flags.mean.or(mean).ok_or_else(|| missing("mean"))?,
                delta: flags.delta.or(delta).ok_or_else(|| missing("delta"))?,
                sigma_w: flags
                    .sigma_w
                    .or(sigma_w)
                    .ok_or_else(|| missing("sigma-w"))?,
                bounds: flags.bounds.or(bounds),
                shape: flags
                    .shape
                    .map(Shape::from)
                    .or(shape)
                    .unwrap_or(Shape::Gaussian),
            })
        }
    }
}
