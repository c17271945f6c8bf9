use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renewal_bias::experiments::{with_threads, Model};
use renewal_bias::observation::read_values_csv;
use renewal_bias::{
    coin_interval, confidence_interval, corrected_interval, correction_k, family,
    run_condition_classifier, run_convergence_sweep, run_coverage_study, sample_coin_run,
    sample_l2_run, sample_renewals, EpsilonRule, ExperimentResult, Method,
};

use crate::args::{ClassifyArgs, EstimateArgs, ExperimentArgs, Format, ModelKind, SimulateArgs};
use crate::config::{merge_model, resolve};
use crate::CliError;

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(bytes)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn simulate(args: &SimulateArgs, verbose: u8) -> Result<(), CliError> {
    let name = args
        .family
        .family
        .as_deref()
        .ok_or_else(|| CliError::Input("missing --family".into()))?;
    let fam = family(name, &args.family.param_overrides())?;
    if args.n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    let model = merge_model(&args.model, None)?.resolve()?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let delta = sample_renewals(fam.first_renewal(), args.n, &mut rng)?;
    let run = match &model {
        Model::Coin(m) => sample_coin_run(&delta, m, &mut rng),
        Model::L2(m) => sample_l2_run(&delta, m, &mut rng),
    };
    if verbose > 0 {
        let renewals = delta.iter().filter(|&&d| d).count();
        eprintln!(
            "simulated {} observations, {} renewals, mean {}",
            run.len(),
            renewals,
            run.sample_mean
        );
    }
    let mut buf = Vec::with_capacity(args.n * 8);
    run.write_csv(&mut buf, args.oracle)?;
    write_output(args.out.as_deref(), &buf)
}

pub fn estimate(args: &EstimateArgs, verbose: u8) -> Result<(), CliError> {
    let name = args
        .family
        .family
        .as_deref()
        .ok_or_else(|| CliError::Input("missing --family".into()))?;
    let fam = family(name, &args.family.param_overrides())?;
    let file = fs::File::open(&args.input)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    let values = read_values_csv(io::BufReader::new(file))?;
    let n = values.len();
    let sample_mean = values.iter().sum::<f64>() / n as f64;
    let method = Method::from(args.rule);

    let u = fam.renewal_probabilities(n)?;
    let expected = u.expected_renewals(n);
    if verbose > 0 {
        eprintln!("N = {n}, mean = {sample_mean}, U_N = {expected}");
    }

    let (rule, est) = match args.model {
        ModelKind::Coin => {
            let rule = EpsilonRule::coin(method, args.gamma)?;
            (rule, coin_interval(sample_mean, n, expected, &rule)?)
        }
        ModelKind::L2 => {
            let mean = args
                .mean
                .ok_or_else(|| CliError::Input("missing --mean".into()))?;
            let sigma = args
                .sigma_w
                .ok_or_else(|| CliError::Input("missing --sigma-w".into()))?;
            let width = args.bounds.map(|(a, b)| b - a);
            let rule = EpsilonRule::new(method, args.gamma, sigma, width)?;
            (
                rule,
                confidence_interval(sample_mean, n, expected, mean, &rule)?,
            )
        }
    };
    let est = if args.apply_k {
        let k = correction_k(&fam, &rule)?;
        corrected_interval(&est, k)?
    } else {
        est
    };
    write_output(args.out.as_deref(), &json_bytes(&est)?)
}

#[derive(Debug, Clone, Copy)]
pub enum Study {
    Sweep,
    Coverage,
}

pub fn experiment(args: &ExperimentArgs, verbose: u8, study: Study) -> Result<(), CliError> {
    let resolved = resolve(args, verbose)?;
    let cfg = &resolved.experiment;
    if resolved.verbosity > 0 {
        eprintln!(
            "{} `{}`: horizons {:?}, {} trials, seed {}",
            match study {
                Study::Sweep => "sweep",
                Study::Coverage => "coverage",
            },
            cfg.family.name,
            cfg.horizons,
            cfg.trials,
            cfg.master_seed
        );
    }
    let result = with_threads(resolved.threads, || match study {
        Study::Sweep => run_convergence_sweep(cfg),
        Study::Coverage => run_coverage_study(cfg),
    })??;

    fs::create_dir_all(&resolved.out)
        .map_err(|e| CliError::Input(format!("{}: {e}", resolved.out.display())))?;
    if matches!(resolved.format, Format::Csv | Format::Both) {
        let file = fs::File::create(resolved.out.join("trials.csv"))?;
        let mut w = BufWriter::new(file);
        result.write_trials_csv(&mut w)?;
        w.flush()?;
    }
    if matches!(resolved.format, Format::Json | Format::Both) {
        fs::write(
            resolved.out.join("aggregate.json"),
            json_bytes(&result.aggregate_json())?,
        )?;
    }
    print_table(&result, study)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn print_table(result: &ExperimentResult, study: Study) -> io::Result<()> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    match study {
        Study::Sweep => {
            writeln!(
                w,
                "{:>10} {:>14} {:>10} {:>10} {:>12} {:>12} {:>12} {:>8}",
                "N",
                "U_N",
                "epsilon",
                "eps*N/U_N",
                "mean_width",
                "mean_abs_err",
                "p90_abs_err",
                "failed"
            )?;
            for h in &result.horizons {
                writeln!(
                    w,
                    "{:>10} {:>14.4} {:>10.6} {:>10} {:>12} {:>12} {:>12} {:>8}",
                    h.horizon,
                    h.expected_renewals,
                    h.epsilon,
                    opt(h.k_finite),
                    opt(h.mean_width),
                    opt(h.mean_abs_error),
                    opt(h.p90_abs_error),
                    h.failures
                )?;
            }
        }
        Study::Coverage => {
            writeln!(
                w,
                "{:>10} {:>8} {:>10} {:>10} {:>12} {:>8}",
                "N", "trials", "coverage", "se", "mean_width", "failed"
            )?;
            for h in &result.horizons {
                writeln!(
                    w,
                    "{:>10} {:>8} {:>10} {:>10} {:>12} {:>8}",
                    h.horizon,
                    h.trials,
                    opt(h.coverage),
                    opt(h.coverage_se),
                    opt(h.mean_width),
                    h.failures
                )?;
            }
        }
    }
    let k = result
        .k
        .map_or_else(|| "diverges".to_string(), |k| format!("{k:.6}"));
    writeln!(
        w,
        "truth: {}  verdict: {}  k: {}",
        result.truth, result.verdict, k
    )?;
    w.flush()
}

pub fn classify(args: &ClassifyArgs, verbose: u8) -> Result<(), CliError> {
    let name = args
        .family
        .family
        .as_deref()
        .ok_or_else(|| CliError::Input("missing --family".into()))?;
    let fam = family(name, &args.family.param_overrides())?;
    let horizons = match (&args.horizons, args.n_max) {
        (Some(h), _) => h.clone(),
        (None, n_max) => {
            let n = n_max.unwrap_or(100_000);
            let mut h: Vec<usize> = [n / 100, n / 10, n]
                .into_iter()
                .filter(|&x| x > 0)
                .collect();
            h.dedup();
            h
        }
    };
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(CliError::Input("horizons must be positive".into()));
    }
    let rule = EpsilonRule::coin(Method::from(args.rule), args.gamma)?;
    if verbose > 0 {
        eprintln!(
            "classifying `{}` up to N = {}",
            fam.name(),
            horizons.iter().max().unwrap()
        );
    }
    let report = run_condition_classifier(&fam, &horizons, &rule)?;

    if let Some(path) = &args.out {
        fs::write(path, json_bytes(&report)?)?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "family: {} {:?}", report.family, report.parameters)?;
    writeln!(w, "class: {}", report.class)?;
    writeln!(
        w,
        "mu: {}",
        report
            .mu
            .map_or_else(|| "inf".to_string(), |m| m.to_string())
    )?;
    writeln!(
        w,
        "beta_hat: {:.6} (window {}..={}, r2 {:.6})",
        report.beta_hat, report.window.0, report.window.1, report.fit.r2
    )?;
    for (n, k) in &report.k_trajectory {
        writeln!(w, "eps*N/U_N at {n}: {k:.6}")?;
    }
    writeln!(
        w,
        "k: {}",
        report
            .k
            .map_or_else(|| "diverges".to_string(), |k| format!("{k:.6}"))
    )?;
    writeln!(w, "verdict: {}", report.verdict)?;
    w.flush()?;
    Ok(())
}
