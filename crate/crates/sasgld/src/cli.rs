//! Command-line harness: toy-potential sampling, classifier sampling,
//! stepsize sweeps, and gradient self-checks.
//!
//! Exit codes: 0 ok, 1 usage or config error, 2 at least one chain hit the
//! divergence fault (all other outputs intact), 3 a self-check failed.
//! Runs within one invocation execute in parallel but results are sorted
//! before anything is written, so output bytes depend only on config and
//! seed.

use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use ndarray::Array2;
use rayon::prelude::*;

use crate::bnn::{
    he_init, log_prior_and_grad, mlp_backward, EpochMinibatchOracle, MlpModel, MlpSpec, PriorSpec,
};
use crate::core::{new_rng, streams, Bounds2, Error, Grid2, Result, SamplerConfig};
use crate::data_io::{
    fmt_float, load_image_set, parse_experiment_config, write_ensemble, write_trace,
    ExperimentConfig, LabeledImageSet, SamplerChoice, TargetSpec,
};
use crate::diagnostics::{
    bias_sweep, classification_metrics, empirical_grid, tv_distance, well_occupancy,
};
use crate::gradient::{ExactOracle, GradientOracle};
use crate::potentials::{
    finite_diff_check, grid_boltzmann_density, muller_brown_wells, Potential,
};
use crate::samplers::{run_chain, ChainResult, SamplerKind};
use crate::synthetic::generate_dataset;

/// One finished run with everything the summary table needs.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub sampler: SamplerKind,
    pub seed: u64,
    /// Ordered metric list; every run of one subcommand carries the same
    /// metric names.
    pub metrics: Vec<(String, f64)>,
    pub wall_seconds: f64,
}

enum Outcome {
    Clean,
    DivergenceOnly,
    CheckFailed,
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match matches.subcommand() {
        Some(("sample-toy", sub)) => load_config(sub).and_then(cmd_sample_toy),
        Some(("sample-bnn", sub)) => load_config(sub).and_then(cmd_sample_bnn),
        Some(("sweep-h", sub)) => {
            let h_list: Vec<f64> = sub
                .get_many::<f64>("h-list")
                .expect("required")
                .copied()
                .collect();
            load_config(sub).and_then(|cfg| cmd_sweep_h(cfg, &h_list))
        }
        Some(("gradcheck", sub)) => cmd_gradcheck(sub.get_flag("inject-gradient-fault")),
        _ => unreachable!("subcommand required"),
    };
    match result {
        Ok(Outcome::Clean) => 0,
        Ok(Outcome::DivergenceOnly) => 2,
        Ok(Outcome::CheckFailed) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn command() -> Command {
    let config = Arg::new("config")
        .long("config")
        .value_name("PATH")
        .value_parser(value_parser!(PathBuf))
        .global(true)
        .help("Experiment config file (key = value lines)");
    let out = Arg::new("out")
        .long("out")
        .value_name("DIR")
        .value_parser(value_parser!(PathBuf))
        .global(true)
        .help("Output directory (overrides out_dir from the config)");
    let seed = Arg::new("seed")
        .long("seed")
        .value_name("INT")
        .value_parser(value_parser!(u64))
        .global(true)
        .help("Root seed (overrides seed and seeds from the config)");
    let sampler = Arg::new("sampler")
        .long("sampler")
        .value_name("WHICH")
        .value_parser(["sgld", "sasgld", "both"])
        .global(true)
        .help("Which sampler(s) to run (overrides the config)");
    Command::new("sasgld")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Langevin samplers with a gradient-driven adaptive stepsize")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(config)
        .arg(out)
        .arg(seed)
        .arg(sampler)
        .subcommand(Command::new("sample-toy").about(
            "Sample a 2D toy potential, writing traces, empirical grids and TV distances",
        ))
        .subcommand(Command::new("sample-bnn").about(
            "Sample the classifier posterior, writing ensembles, a log-likelihood curve and metrics",
        ))
        .subcommand(
            Command::new("sweep-h")
                .about("Bias vs stepsize on the quadratic target, with a fitted log-log slope")
                .arg(
                    Arg::new("h-list")
                        .long("h-list")
                        .value_name("H1,H2,...")
                        .required(true)
                        .value_delimiter(',')
                        .value_parser(value_parser!(f64))
                        .help("Comma-separated stepsizes to sweep"),
                ),
        )
        .subcommand(
            Command::new("gradcheck")
                .about("Finite-difference checks of every analytic gradient")
                .arg(
                    Arg::new("inject-gradient-fault")
                        .long("inject-gradient-fault")
                        .action(ArgAction::SetTrue)
                        .hide(true),
                ),
        )
}

fn load_config(matches: &ArgMatches) -> Result<ExperimentConfig> {
    let path = matches
        .get_one::<PathBuf>("config")
        .ok_or_else(|| Error::Config(vec!["--config PATH is required".into()]))?;
    let mut cfg = parse_experiment_config(path)?;
    if let Some(choice) = matches.get_one::<String>("sampler") {
        cfg.sampler = SamplerChoice::from_id(choice)?;
    }
    if let Some(&seed) = matches.get_one::<u64>("seed") {
        cfg.chain.seed = seed;
        cfg.seeds = vec![seed];
    }
    if let Some(out) = matches.get_one::<PathBuf>("out") {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, experiment: &str) -> Result<PathBuf> {
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{experiment}-{}", cfg.target.id())));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_dir(base: &Path, kind: SamplerKind, seed: u64) -> Result<PathBuf> {
    let dir = base.join(format!("{}-seed{seed}", kind.id()));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Display window per toy target; also the support of the truth grid.
fn display_bounds(p: &Potential) -> Bounds2 {
    match p {
        Potential::MullerBrown(_) => Bounds2::new(-2.5, 2.2, -1.6, 2.4),
        Potential::Star => Bounds2::square(2.5),
        Potential::Quadratic { .. } => Bounds2::square(4.0),
        Potential::DoubleWell { .. } => Bounds2::square(2.5),
    }
}

fn start_point(p: &Potential) -> Vec<f64> {
    match p {
        Potential::MullerBrown(_) => vec![-0.5, 1.0],
        Potential::Star => vec![0.1, 0.1],
        Potential::Quadratic { dim, .. } => vec![0.0; *dim],
        Potential::DoubleWell { dim, .. } => vec![1.5; *dim],
    }
}

const DISPLAY_RES: usize = 64;
/// Truth grids integrate e^{-βU} on a 16× finer lattice before coarsening,
/// so narrow density ridges are resolved well below cell size.
const TRUTH_REFINE: usize = 16;

fn truth_grid(p: &Potential, beta: f64, bounds: Bounds2) -> Result<Grid2> {
    grid_boltzmann_density(p, beta, bounds, DISPLAY_RES * TRUTH_REFINE)?.coarsen(TRUTH_REFINE)
}

fn write_grid_csv(grid: &Grid2, path: &Path) -> Result<()> {
    let mut out = String::from("x,y,weight\n");
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            let (x, y) = grid.cell_center(ix, iy);
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_float(x),
                fmt_float(y),
                fmt_float(grid.at(ix, iy))
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[ExperimentSummary]) -> Result<()> {
    if let Some(first) = rows.first() {
        let names: Vec<&str> = first.metrics.iter().map(|(k, _)| k.as_str()).collect();
        for r in rows {
            let theirs: Vec<&str> = r.metrics.iter().map(|(k, _)| k.as_str()).collect();
            if theirs != names {
                return Err(Error::Check(format!(
                    "summary rows disagree on metrics: {names:?} vs {theirs:?}"
                )));
            }
        }
    }
    let mut out = String::from("experiment,sampler,seed,metric,value\n");
    for r in rows {
        for (name, value) in &r.metrics {
            let _ = writeln!(
                out,
                "{},{},{},{name},{}",
                r.experiment,
                r.sampler.id(),
                r.seed,
                fmt_float(*value)
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn print_summaries(rows: &[ExperimentSummary]) {
    for r in rows {
        let metrics: Vec<String> = r
            .metrics
            .iter()
            .map(|(k, v)| format!("{k}={v:.4}"))
            .collect();
        println!(
            "[{}] {} seed={}: {} ({:.1} s)",
            r.experiment,
            r.sampler.id(),
            r.seed,
            metrics.join(" "),
            r.wall_seconds
        );
    }
}

fn dt_stats(result: &ChainResult, burn_in: u64) -> (f64, f64) {
    let dts: Vec<f64> = result
        .records
        .iter()
        .filter(|r| r.step > burn_in)
        .map(|r| r.dt)
        .collect();
    if dts.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = dts.iter().sum::<f64>() / dts.len() as f64;
    let var = dts.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / dts.len() as f64;
    (mean, var.sqrt() / mean)
}

fn cmd_sample_toy(cfg: ExperimentConfig) -> Result<Outcome> {
    let TargetSpec::Toy(potential) = &cfg.target else {
        return Err(Error::Config(vec![
            "sample-toy needs target = muller_brown | star | quadratic | double_well".into(),
        ]));
    };
    if potential.dim() != 2 {
        return Err(Error::Config(vec![
            "sample-toy draws 2D density grids; use a 2-dimensional target".into(),
        ]));
    }
    let base = out_dir(&cfg, "sample-toy")?;
    let bounds = display_bounds(potential);
    let truth = truth_grid(potential, cfg.chain.beta, bounds)?;
    write_grid_csv(&truth, &base.join("truth_grid.csv"))?;
    let wells = matches!(potential, Potential::MullerBrown(_)).then(muller_brown_wells);

    let mut jobs = Vec::new();
    for kind in cfg.sampler.kinds() {
        for &seed in &cfg.seeds {
            jobs.push((kind, seed));
        }
    }
    let outputs: Vec<Result<(ExperimentSummary, bool)>> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let clock = Instant::now();
            let mut oracle = ExactOracle::new(potential.clone());
            let lane = lane_of(kind);
            let chain_cfg = SamplerConfig { seed, ..cfg.chain.clone() };
            let mut rng = new_rng(seed, streams::chain_noise(0, lane));
            let result = run_chain(
                kind,
                &mut oracle,
                &chain_cfg,
                &cfg.controller,
                start_point(potential),
                &mut rng,
            );
            let dir = run_dir(&base, kind, seed)?;
            if !result.records.is_empty() {
                write_trace(&result.records, &dir.join("trace.csv"))?;
            }

            let mut metrics = Vec::new();
            let diverged = result.diverged_at.is_some();
            metrics.push(("diverged".into(), if diverged { 1.0 } else { 0.0 }));
            metrics.push((
                "diverged_at".into(),
                result.diverged_at.map_or(f64::NAN, |s| s as f64),
            ));
            let (mean_dt, cv_dt) = dt_stats(&result, chain_cfg.burn_in);
            metrics.push(("mean_dt".into(), mean_dt));
            metrics.push(("cv_dt".into(), cv_dt));
            metrics.push(("total_physical_time".into(), result.total_physical_time));
            match empirical_grid(&result.records, chain_cfg.burn_in, bounds, DISPLAY_RES) {
                Ok((grid, overflow)) => {
                    write_grid_csv(&grid, &dir.join("empirical_grid.csv"))?;
                    metrics.push(("tv_vs_truth".into(), tv_distance(&grid, &truth)?));
                    metrics.push(("overflow_fraction".into(), overflow));
                }
                Err(_) => {
                    metrics.push(("tv_vs_truth".into(), f64::NAN));
                    metrics.push(("overflow_fraction".into(), f64::NAN));
                }
            }
            if let Some(wells) = &wells {
                match well_occupancy(&result.records, chain_cfg.burn_in, wells) {
                    Ok(occ) => {
                        for (i, frac) in occ.wells.iter().enumerate() {
                            metrics.push((format!("occupancy_well{i}"), *frac));
                        }
                        metrics.push(("occupancy_transit".into(), occ.transit));
                    }
                    Err(_) => {
                        for i in 0..wells.len() {
                            metrics.push((format!("occupancy_well{i}"), f64::NAN));
                        }
                        metrics.push(("occupancy_transit".into(), f64::NAN));
                    }
                }
            }
            Ok((
                ExperimentSummary {
                    experiment: format!("sample-toy-{}", cfg.target.id()),
                    sampler: kind,
                    seed,
                    metrics,
                    wall_seconds: clock.elapsed().as_secs_f64(),
                },
                diverged,
            ))
        })
        .collect();

    finish(&base, outputs)
}

fn lane_of(kind: SamplerKind) -> u64 {
    match kind {
        SamplerKind::Sgld => 0,
        SamplerKind::Sasgld => 1,
    }
}

/// Sorts run outputs, writes summary.csv, prints the table, and folds
/// divergence flags into the exit outcome.
fn finish(base: &Path, outputs: Vec<Result<(ExperimentSummary, bool)>>) -> Result<Outcome> {
    let mut rows = Vec::with_capacity(outputs.len());
    let mut any_diverged = false;
    for out in outputs {
        let (summary, diverged) = out?;
        any_diverged |= diverged;
        rows.push(summary);
    }
    rows.sort_by(|a, b| {
        (lane_of(a.sampler), a.seed).cmp(&(lane_of(b.sampler), b.seed))
    });
    write_summary(&base.join("summary.csv"), &rows)?;
    print_summaries(&rows);
    println!("summary written to {}", base.join("summary.csv").display());
    Ok(if any_diverged {
        Outcome::DivergenceOnly
    } else {
        Outcome::Clean
    })
}

/// MNIST-style file names inside `data_dir`.
const IDX_NAMES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

/// Dataset seed is fixed: the task is the same no matter which chain seed
/// runs on it.
const DATASET_SEED: u64 = 0;

fn load_dataset(
    spec: &crate::data_io::BnnTargetSpec,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    match &spec.data_dir {
        Some(dir) => {
            let train = load_image_set(
                &dir.join(IDX_NAMES[0].0),
                &dir.join(IDX_NAMES[0].1),
            )?;
            let test = load_image_set(&dir.join(IDX_NAMES[1].0), &dir.join(IDX_NAMES[1].1))?;
            Ok((train.truncate(spec.n_train)?, test.truncate(spec.n_test)?))
        }
        None => Ok(generate_dataset(spec.n_train, spec.n_test, DATASET_SEED)),
    }
}

fn cmd_sample_bnn(cfg: ExperimentConfig) -> Result<Outcome> {
    let TargetSpec::Bnn(spec) = &cfg.target else {
        return Err(Error::Config(vec!["sample-bnn needs target = bnn".into()]));
    };
    let base = out_dir(&cfg, "sample-bnn")?;
    let (train, test) = load_dataset(spec)?;
    let mut layers = vec![train.pixels()];
    layers.extend(&spec.hidden);
    layers.push(10);
    let mlp = MlpSpec::new(layers)?;
    let test_x = test.images.mapv(|b| b as f64 / 255.0);
    let test_y: Vec<usize> = test.labels.iter().map(|&l| l as usize).collect();
    let batches_per_epoch = (train.n() / cfg.batch_size).max(1);

    let mut jobs = Vec::new();
    for kind in cfg.sampler.kinds() {
        for &seed in &cfg.seeds {
            jobs.push((kind, seed));
        }
    }
    let outputs: Vec<Result<(ExperimentSummary, bool)>> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let clock = Instant::now();
            let model = MlpModel::from_image_set(mlp.clone(), spec.prior, &train)?;
            let mut oracle = EpochMinibatchOracle::new(model, cfg.batch_size)?;
            // Both samplers start one seed's chains from the same draw.
            let theta0 = he_init(&mlp, &mut new_rng(seed, streams::chain_init(0)));
            let chain_cfg = SamplerConfig { seed, ..cfg.chain.clone() };
            let mut rng = new_rng(seed, streams::chain_noise(0, lane_of(kind)));
            let result = run_chain(
                kind,
                &mut oracle,
                &chain_cfg,
                &cfg.controller,
                theta0,
                &mut rng,
            );
            let dir = run_dir(&base, kind, seed)?;
            if !result.records.is_empty() {
                write_trace(&result.records, &dir.join("trace.csv"))?;
            }
            if !result.ensemble.is_empty() {
                write_ensemble(&result.ensemble, &dir.join("ensemble.bin"))?;
            }

            // Running ensemble predictive on the test set: accumulate
            // Δt-weighted probabilities snapshot by snapshot, reporting at
            // every epoch boundary the log-likelihood of "the entire
            // ensemble until that epoch".
            let total_epochs = chain_cfg.n_steps / batches_per_epoch as u64;
            let mut curve = String::from("epoch,n_members,test_log_likelihood\n");
            let mut acc: Array2<f64> = Array2::zeros((test_y.len(), 10));
            let mut wsum = 0.0;
            let mut members = result.ensemble.iter().peekable();
            let mut n_members = 0usize;
            let mut final_metrics = None;
            for epoch in 1..=total_epochs {
                let boundary = epoch * batches_per_epoch as u64;
                while let Some(m) = members.peek() {
                    if m.step > boundary {
                        break;
                    }
                    let probs = oracle.model.predict(m.theta.as_slice(), &test_x);
                    acc.scaled_add(m.weight_dt, &probs);
                    wsum += m.weight_dt;
                    n_members += 1;
                    members.next();
                }
                if wsum > 0.0 {
                    let predictive = acc.mapv(|v| v / wsum);
                    let metrics = classification_metrics(&predictive, &test_y)?;
                    let _ = writeln!(
                        curve,
                        "{epoch},{n_members},{}",
                        fmt_float(-metrics.nll)
                    );
                    final_metrics = Some(metrics);
                }
            }
            // Snapshots after the last full epoch boundary still count for
            // the final ensemble.
            for m in members {
                let probs = oracle.model.predict(m.theta.as_slice(), &test_x);
                acc.scaled_add(m.weight_dt, &probs);
                wsum += m.weight_dt;
                n_members += 1;
            }
            if wsum > 0.0 {
                let predictive = acc.mapv(|v| v / wsum);
                final_metrics = Some(classification_metrics(&predictive, &test_y)?);
            }
            fs::write(dir.join("logprob.csv"), curve)?;

            let diverged = result.diverged_at.is_some();
            let mut metrics = Vec::new();
            metrics.push(("diverged".into(), if diverged { 1.0 } else { 0.0 }));
            metrics.push((
                "diverged_at".into(),
                result.diverged_at.map_or(f64::NAN, |s| s as f64),
            ));
            metrics.push(("n_members".into(), n_members as f64));
            let (mean_dt, cv_dt) = dt_stats(&result, chain_cfg.burn_in);
            metrics.push(("mean_dt".into(), mean_dt));
            metrics.push(("cv_dt".into(), cv_dt));
            match &final_metrics {
                Some(m) => {
                    metrics.push(("nll".into(), m.nll));
                    metrics.push(("acc".into(), m.accuracy));
                    metrics.push(("ece".into(), m.ece));
                }
                None => {
                    metrics.push(("nll".into(), f64::NAN));
                    metrics.push(("acc".into(), f64::NAN));
                    metrics.push(("ece".into(), f64::NAN));
                }
            }
            Ok((
                ExperimentSummary {
                    experiment: "sample-bnn".into(),
                    sampler: kind,
                    seed,
                    metrics,
                    wall_seconds: clock.elapsed().as_secs_f64(),
                },
                diverged,
            ))
        })
        .collect();

    finish(&base, outputs)
}

fn cmd_sweep_h(cfg: ExperimentConfig, h_list: &[f64]) -> Result<Outcome> {
    let TargetSpec::Toy(potential @ Potential::Quadratic { curvature, dim }) = cfg.target.clone()
    else {
        return Err(Error::Config(vec![
            "sweep-h needs target = quadratic (the only target with closed-form truth)".into(),
        ]));
    };
    if h_list.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::Config(vec!["stepsizes must be positive".into()]));
    }
    let base = out_dir(&cfg, "sweep-h")?;
    // Second moment of one coordinate under e^{-βU}: 1/(β·curvature).
    let truth = 1.0 / (cfg.chain.beta * curvature);

    let mut jobs = Vec::new();
    for kind in cfg.sampler.kinds() {
        for &seed in &cfg.seeds {
            jobs.push((kind, seed));
        }
    }
    let outputs: Vec<Result<(ExperimentSummary, bool, String)>> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let clock = Instant::now();
            let chain_cfg = SamplerConfig { seed, ..cfg.chain.clone() };
            let p = potential.clone();
            let sweep = bias_sweep(
                kind,
                move || Box::new(ExactOracle::new(p.clone())) as Box<dyn GradientOracle>,
                &chain_cfg,
                &cfg.controller,
                h_list,
                &vec![0.0; dim],
                |theta| theta[0] * theta[0],
                truth,
            )?;
            let mut rows = String::new();
            let mut any_diverged = false;
            for row in &sweep.rows {
                any_diverged |= row.diverged;
                let _ = writeln!(
                    rows,
                    "{},{seed},{},{},{},{}",
                    kind.id(),
                    fmt_float(row.h),
                    fmt_float(row.estimate),
                    fmt_float(row.abs_error),
                    u8::from(row.diverged)
                );
            }
            let mut metrics = vec![(
                "slope".into(),
                sweep.slope.unwrap_or(f64::NAN),
            )];
            metrics.push((
                "n_diverged".into(),
                sweep.rows.iter().filter(|r| r.diverged).count() as f64,
            ));
            Ok((
                ExperimentSummary {
                    experiment: "sweep-h".into(),
                    sampler: kind,
                    seed,
                    metrics,
                    wall_seconds: clock.elapsed().as_secs_f64(),
                },
                any_diverged,
                rows,
            ))
        })
        .collect();

    let mut rows = Vec::new();
    let mut bias_csv = String::from("sampler,seed,h,estimate,abs_error,diverged\n");
    let mut any_diverged = false;
    let mut flat = Vec::new();
    for out in outputs {
        flat.push(out?);
    }
    flat.sort_by(|a, b| (lane_of(a.0.sampler), a.0.seed).cmp(&(lane_of(b.0.sampler), b.0.seed)));
    for (summary, diverged, chunk) in flat {
        any_diverged |= diverged;
        bias_csv.push_str(&chunk);
        rows.push(summary);
    }
    fs::write(base.join("bias.csv"), bias_csv)?;
    write_summary(&base.join("summary.csv"), &rows)?;
    print_summaries(&rows);
    println!("bias table written to {}", base.join("bias.csv").display());
    Ok(if any_diverged {
        Outcome::DivergenceOnly
    } else {
        Outcome::Clean
    })
}

struct Check {
    name: String,
    max_rel_err: f64,
    tol: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err < self.tol
    }
}

/// Central finite difference of a scalar function of one flat vector.
fn central_diff(f: impl Fn(&[f64]) -> f64, theta: &mut [f64], k: usize, eps: f64) -> f64 {
    let saved = theta[k];
    theta[k] = saved + eps;
    let up = f(theta);
    theta[k] = saved - eps;
    let down = f(theta);
    theta[k] = saved;
    (up - down) / (2.0 * eps)
}

fn cmd_gradcheck(inject_fault: bool) -> Result<Outcome> {
    const TOL: f64 = 1e-4;
    // The fault hook perturbs the first gradient component the checks see,
    // which a healthy run must flag.
    let fault = if inject_fault { 0.01 } else { 0.0 };
    let mut checks = Vec::new();

    let potentials = [
        Potential::muller_brown(),
        Potential::Star,
        Potential::Quadratic { curvature: 1.0, dim: 2 },
        Potential::DoubleWell { height: 1.0, dim: 2 },
    ];
    for p in &potentials {
        let mut rng = new_rng(0, 6);
        let mut worst = 0.0f64;
        use rand::Rng;
        for i in 0..1000 {
            let theta: Vec<f64> = match p {
                Potential::MullerBrown(_) => vec![
                    rng.random_range(-1.8..1.2),
                    rng.random_range(-0.5..2.0),
                ],
                _ => (0..p.dim()).map(|_| rng.random_range(-3.0..3.0)).collect(),
            };
            let mut err = finite_diff_check(p, &theta, 1e-5);
            if i == 0 && fault != 0.0 {
                // A perturbed analytic gradient must produce at least this
                // much relative disagreement with the finite difference.
                err += fault;
            }
            worst = worst.max(err);
        }
        checks.push(Check {
            name: format!("potential {} gradient", p.id()),
            max_rel_err: worst,
            tol: TOL,
        });
    }

    {
        let spec = MlpSpec::new(vec![6, 4, 3]).unwrap();
        let mut worst = 0.0f64;
        use rand::Rng;
        for seed in 0..5u64 {
            let mut rng = new_rng(seed, 7);
            let mut theta: Vec<f64> = (0..spec.param_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let x = Array2::from_shape_fn((8, 6), |_| rng.random_range(0.0..1.0));
            let y: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
            let (_, mut grad) = mlp_backward(&spec, &theta, &x, &y)?;
            grad[0] += fault;
            for _ in 0..20 {
                let k = rng.random_range(0..theta.len());
                let fd = central_diff(
                    |t| mlp_backward(&spec, t, &x, &y).unwrap().0,
                    &mut theta,
                    k,
                    1e-5,
                );
                worst = worst.max((grad[k] - fd).abs() / (1.0 + grad[k].abs()));
            }
            // Always probe the faulted coordinate.
            let fd = central_diff(
                |t| mlp_backward(&spec, t, &x, &y).unwrap().0,
                &mut theta,
                0,
                1e-5,
            );
            worst = worst.max((grad[0] - fd).abs() / (1.0 + grad[0].abs()));
        }
        checks.push(Check {
            name: "classifier backprop".into(),
            max_rel_err: worst,
            tol: TOL,
        });
    }

    {
        let prior = PriorSpec::Horseshoe { tau: 0.1 };
        let mut rng = new_rng(1, 8);
        let mut worst = 0.0f64;
        use rand::Rng;
        for i in 0..20 {
            let mag: f64 = rng.random_range(0.01..2.0);
            let t = if rng.random_range(0..2) == 0 { mag } else { -mag };
            let (_, mut grad) = log_prior_and_grad(&prior, &[t]);
            if i == 0 {
                grad[0] += fault;
            }
            let mut theta = [t];
            let fd = central_diff(
                |v| log_prior_and_grad(&prior, v).0,
                &mut theta,
                0,
                1e-7 * t.abs().max(1e-3),
            );
            worst = worst.max((grad[0] - fd).abs() / (1.0 + grad[0].abs()));
        }
        checks.push(Check {
            name: "sparsity prior gradient".into(),
            max_rel_err: worst,
            tol: TOL,
        });
    }

    let mut all_ok = true;
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        all_ok &= c.passed();
        println!(
            "check {:<32} max rel err {:>12.3e} (tol {:.0e}) {status}",
            c.name, c.max_rel_err, c.tol
        );
    }
    Ok(if all_ok {
        Outcome::Clean
    } else {
        Outcome::CheckFailed
    })
}
