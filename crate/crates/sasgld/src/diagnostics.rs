//! Ergodic averages, density comparisons, stepsize-bias sweeps, well
//! occupancy, and classification metrics.
//!
//! The adaptive sampler spends steps unevenly in state space, so every
//! trajectory statistic here weights samples by their Δt; the unweighted
//! mean is kept only as a foil (it estimates the ψ-tilted measure, not the
//! target).

use ndarray::Array2;

use crate::core::{
    Bounds2, ChainRecord, ControllerConfig, EnsembleMember, Error, Grid2, ParameterVector, Result,
    SamplerConfig,
};
use crate::core::{new_rng, streams};
use crate::gradient::GradientOracle;
use crate::potentials::Well;
use crate::samplers::{run_chain, SamplerKind};

/// A Δt-weighted time average `Σ Δt_k f(θ_k) / Σ Δt_k` with its bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct WeightedEstimate {
    pub value: f64,
    /// Σ Δt over the averaged records.
    pub total_weight: f64,
    pub n_samples: usize,
}

fn snapshot_records<'a>(
    records: &'a [ChainRecord],
    burn_in: u64,
) -> impl Iterator<Item = (&'a ChainRecord, &'a [f64])> {
    records.iter().filter_map(move |r| {
        if r.step <= burn_in {
            return None;
        }
        r.theta.as_ref().map(|t| (r, t.as_slice()))
    })
}

/// `Σ Δt_k f(θ_k) / Σ Δt_k` over post-burn-in records carrying snapshots.
pub fn weighted_average(
    records: &[ChainRecord],
    burn_in: u64,
    f: impl Fn(&[f64]) -> f64,
) -> Result<WeightedEstimate> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut n = 0usize;
    for (r, theta) in snapshot_records(records, burn_in) {
        num += r.dt * f(theta);
        den += r.dt;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Check(
            "weighted average over empty record set".into(),
        ));
    }
    Ok(WeightedEstimate {
        value: num / den,
        total_weight: den,
        n_samples: n,
    })
}

/// Plain mean of f over post-burn-in records. Converges to the ψ-tilted
/// marginal for adaptive chains; exposed to demonstrate exactly that.
pub fn unweighted_average(
    records: &[ChainRecord],
    burn_in: u64,
    f: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (_, theta) in snapshot_records(records, burn_in) {
        sum += f(theta);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Check(
            "unweighted average over empty record set".into(),
        ));
    }
    Ok(sum / n as f64)
}

/// Δt-weighted histogram of 2D snapshots, with in-bounds mass normalized to
/// 1. Returns the grid and the weight fraction that fell outside the bounds.
pub fn empirical_grid(
    records: &[ChainRecord],
    burn_in: u64,
    bounds: Bounds2,
    resolution: usize,
) -> Result<(Grid2, f64)> {
    assert!(resolution >= 1);
    let mut grid = Grid2::zeros(bounds, resolution, resolution);
    let mut overflow = 0.0;
    let mut total = 0.0;
    let mut n = 0usize;
    for (r, theta) in snapshot_records(records, burn_in) {
        if theta.len() != 2 {
            return Err(Error::Shape(format!(
                "empirical grid needs 2D snapshots, found dimension {}",
                theta.len()
            )));
        }
        total += r.dt;
        n += 1;
        match grid.cell_of(theta[0], theta[1]) {
            Some((ix, iy)) => *grid.at_mut(ix, iy) += r.dt,
            None => overflow += r.dt,
        }
    }
    if n == 0 {
        return Err(Error::Check("empirical grid over empty record set".into()));
    }
    grid.normalize()?;
    Ok((grid, overflow / total))
}

/// Total-variation distance `½·Σ|g1−g2|` between two normalized grids.
pub fn tv_distance(g1: &Grid2, g2: &Grid2) -> Result<f64> {
    if g1.nx != g2.nx || g1.ny != g2.ny {
        return Err(Error::Shape(format!(
            "grid shapes differ: {}x{} vs {}x{}",
            g1.nx, g1.ny, g2.nx, g2.ny
        )));
    }
    for g in [g1, g2] {
        if (g.total() - 1.0).abs() > 1e-9 {
            return Err(Error::Check(format!(
                "tv_distance input sums to {}, not 1",
                g.total()
            )));
        }
    }
    Ok(0.5 * g1.w.iter().zip(&g2.w).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Δt-weighted occupancy fractions of disjoint well balls; weight not in any
/// ball is the transit fraction. Fractions sum to 1.
#[derive(Debug, Clone)]
pub struct OccupancyReport {
    pub wells: Vec<f64>,
    pub transit: f64,
}

pub fn well_occupancy(
    records: &[ChainRecord],
    burn_in: u64,
    wells: &[Well],
) -> Result<OccupancyReport> {
    for i in 0..wells.len() {
        for j in (i + 1)..wells.len() {
            let dx = wells[i].center[0] - wells[j].center[0];
            let dy = wells[i].center[1] - wells[j].center[1];
            if (dx * dx + dy * dy).sqrt() <= wells[i].radius + wells[j].radius {
                return Err(Error::Check(format!(
                    "wells {i} and {j} overlap; occupancy fractions would double-count"
                )));
            }
        }
    }
    let mut masses = vec![0.0; wells.len()];
    let mut transit = 0.0;
    let mut total = 0.0;
    let mut n = 0usize;
    for (r, theta) in snapshot_records(records, burn_in) {
        if theta.len() != 2 {
            return Err(Error::Shape("well occupancy needs 2D snapshots".into()));
        }
        total += r.dt;
        n += 1;
        match wells.iter().position(|w| w.contains(theta[0], theta[1])) {
            Some(k) => masses[k] += r.dt,
            None => transit += r.dt,
        }
    }
    if n == 0 {
        return Err(Error::Check("well occupancy over empty record set".into()));
    }
    Ok(OccupancyReport {
        wells: masses.iter().map(|m| m / total).collect(),
        transit: transit / total,
    })
}

/// One stepsize's long-run estimate in a bias sweep.
#[derive(Debug, Clone, Copy)]
pub struct BiasRow {
    pub h: f64,
    /// Weighted long-run estimate of f; NaN when the run diverged.
    pub estimate: f64,
    pub abs_error: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct BiasSweep {
    pub rows: Vec<BiasRow>,
    /// Least-squares slope of log|error| against log h over completed rows;
    /// None when fewer than two usable rows exist.
    pub slope: Option<f64>,
}

/// Runs one chain per stepsize and reports |weighted estimate − truth|
/// together with the fitted log-log error slope. `cfg.dtau` is ignored;
/// each row substitutes its own h. Chains draw from per-row rng streams of
/// `cfg.seed`.
pub fn bias_sweep(
    sampler: SamplerKind,
    mut make_oracle: impl FnMut() -> Box<dyn GradientOracle>,
    cfg: &SamplerConfig,
    ctl: &ControllerConfig,
    h_list: &[f64],
    theta0: &[f64],
    f: impl Fn(&[f64]) -> f64,
    truth: f64,
) -> Result<BiasSweep> {
    if h_list.is_empty() {
        return Err(Error::Check("bias sweep over empty stepsize list".into()));
    }
    let lane = match sampler {
        SamplerKind::Sgld => 0,
        SamplerKind::Sasgld => 1,
    };
    let mut rows = Vec::with_capacity(h_list.len());
    for (i, &h) in h_list.iter().enumerate() {
        let mut oracle = make_oracle();
        let run_cfg = SamplerConfig {
            dtau: h,
            ..cfg.clone()
        };
        let mut rng = new_rng(cfg.seed, streams::chain_noise(i as u64, lane));
        let out = run_chain(sampler, &mut *oracle, &run_cfg, ctl, theta0.to_vec(), &mut rng);
        if out.diverged_at.is_some() {
            rows.push(BiasRow {
                h,
                estimate: f64::NAN,
                abs_error: f64::NAN,
                diverged: true,
            });
            continue;
        }
        let est = weighted_average(&out.records, cfg.burn_in, &f)?;
        rows.push(BiasRow {
            h,
            estimate: est.value,
            abs_error: (est.value - truth).abs(),
            diverged: false,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.diverged && r.abs_error > 0.0)
        .map(|r| (r.h.ln(), r.abs_error.ln()))
        .collect();
    let slope = if points.len() >= 2 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(BiasSweep { rows, slope })
}

/// Equal-width confidence bins over [0,1] accumulating (confidence,
/// correctness) pairs, the standard reliability-diagram bookkeeping.
#[derive(Debug, Clone)]
pub struct ReliabilityBins {
    pub confidence_sum: Vec<f64>,
    pub accuracy_sum: Vec<f64>,
    pub count: Vec<u64>,
}

impl ReliabilityBins {
    pub fn new(n_bins: usize) -> Self {
        assert!(n_bins >= 1);
        Self {
            confidence_sum: vec![0.0; n_bins],
            accuracy_sum: vec![0.0; n_bins],
            count: vec![0; n_bins],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.count.len()
    }

    pub fn total(&self) -> u64 {
        self.count.iter().sum()
    }

    fn add(&mut self, confidence: f64, correct: bool) {
        let n = self.n_bins();
        let bin = ((confidence * n as f64) as usize).min(n - 1);
        self.confidence_sum[bin] += confidence;
        self.accuracy_sum[bin] += correct as u64 as f64;
        self.count[bin] += 1;
    }

    /// `Σ_b (count_b/total)·|avg confidence_b − avg accuracy_b|`.
    pub fn ece(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let mut e = 0.0;
        for b in 0..self.n_bins() {
            if self.count[b] == 0 {
                continue;
            }
            let c = self.count[b] as f64;
            e += (c / total as f64) * (self.confidence_sum[b] / c - self.accuracy_sum[b] / c).abs();
        }
        e
    }
}

/// Number of ECE bins used unless a caller asks otherwise.
pub const DEFAULT_ECE_BINS: usize = 15;

#[derive(Debug, Clone, Copy)]
pub struct ClassificationMetrics {
    pub nll: f64,
    pub accuracy: f64,
    pub ece: f64,
}

fn check_predictions(probs: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if probs.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} prediction rows for {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    if probs.nrows() == 0 {
        return Err(Error::Check("no predictions to score".into()));
    }
    for (i, row) in probs.outer_iter().enumerate() {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Check(format!(
                "prediction row {i} sums to {sum}, not 1"
            )));
        }
        if labels[i] >= probs.ncols() {
            return Err(Error::Check(format!(
                "label {} out of range for {} classes",
                labels[i],
                probs.ncols()
            )));
        }
    }
    Ok(())
}

/// Builds the reliability bookkeeping for a prediction matrix.
pub fn reliability_bins(
    probs: &Array2<f64>,
    labels: &[usize],
    n_bins: usize,
) -> Result<ReliabilityBins> {
    check_predictions(probs, labels)?;
    let mut bins = ReliabilityBins::new(n_bins);
    for (row, &label) in probs.outer_iter().zip(labels) {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        bins.add(row[best], best == label);
    }
    Ok(bins)
}

/// NLL, top-1 accuracy, and ECE of a row-stochastic prediction matrix.
pub fn classification_metrics(
    probs: &Array2<f64>,
    labels: &[usize],
) -> Result<ClassificationMetrics> {
    classification_metrics_binned(probs, labels, DEFAULT_ECE_BINS)
}

pub fn classification_metrics_binned(
    probs: &Array2<f64>,
    labels: &[usize],
    n_bins: usize,
) -> Result<ClassificationMetrics> {
    let bins = reliability_bins(probs, labels, n_bins)?;
    let mut nll = 0.0;
    let mut correct = 0usize;
    for (row, &label) in probs.outer_iter().zip(labels) {
        // Clamp away exact zeros so a confidently wrong model scores a large
        // finite penalty instead of poisoning the mean with infinity.
        nll -= row[label].max(1e-300).ln();
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        correct += (best == label) as usize;
    }
    let n = labels.len() as f64;
    Ok(ClassificationMetrics {
        nll: nll / n,
        accuracy: correct as f64 / n,
        ece: bins.ece(),
    })
}

/// How ensemble members are combined into one predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictiveWeighting {
    /// Plain mean over members.
    Uniform,
    /// Δt-weighted mean, consistent with the trajectory-average estimator.
    DtWeighted,
}

/// Averages per-member predictive distributions `predict(θ)` over the
/// ensemble. Each `predict` call must return one row-stochastic matrix over
/// the same inputs; the result is their convex combination, so its rows sum
/// to 1 as well.
pub fn posterior_predictive(
    ensemble: &[EnsembleMember],
    weighting: PredictiveWeighting,
    predict: impl Fn(&ParameterVector) -> Array2<f64>,
) -> Result<Array2<f64>> {
    if ensemble.is_empty() {
        return Err(Error::Check(
            "posterior predictive over empty ensemble".into(),
        ));
    }
    let mut acc: Option<Array2<f64>> = None;
    let mut total_weight = 0.0;
    for member in ensemble {
        let w = match weighting {
            PredictiveWeighting::Uniform => 1.0,
            PredictiveWeighting::DtWeighted => member.weight_dt,
        };
        let p = predict(&member.theta) * w;
        total_weight += w;
        acc = Some(match acc {
            None => p,
            Some(a) => a + p,
        });
    }
    Ok(acc.unwrap() / total_weight)
}
