//! The two Langevin samplers and the chain driver.
//!
//! Both samplers share [`langevin_update`] for the θ move, so an adaptive
//! run with m = M = c is bit-for-bit the fixed-step run at h = c·Δτ under
//! the same rng stream: ψ collapses to the constant c exactly, and the rng
//! consumption per step (oracle draws, then one normal per coordinate) is
//! identical across samplers.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::controller::ControllerState;
use crate::core::{
    ChainRecord, ControllerConfig, EnsembleMember, Error, ParameterVector, Result, SamplerConfig,
};
use crate::gradient::{GradientEstimate, GradientOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Sgld,
    Sasgld,
}

impl SamplerKind {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "sgld" => Ok(SamplerKind::Sgld),
            "sasgld" => Ok(SamplerKind::Sasgld),
            other => Err(Error::Parse(format!(
                "unknown sampler '{other}' (expected sgld or sasgld)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            SamplerKind::Sgld => "sgld",
            SamplerKind::Sasgld => "sasgld",
        }
    }
}

/// In-place Euler-Maruyama move `θ ← θ − dt·G + sqrt(2·dt/β)·ε`.
///
/// Draws exactly `θ.len()` standard normals, even when β = ∞ suppresses the
/// noise term, so rng streams stay aligned across configurations.
pub fn langevin_update(
    theta: &mut [f64],
    grad: &[f64],
    dt: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) {
    debug_assert_eq!(theta.len(), grad.len());
    let noise_scale = (2.0 * dt / beta).sqrt();
    for (t, g) in theta.iter_mut().zip(grad) {
        let z: f64 = StandardNormal.sample(rng);
        *t = *t - dt * g + noise_scale * z;
    }
}

/// One fixed-stepsize move from `theta` using the supplied gradient estimate.
pub fn sgld_step(
    theta: &[f64],
    estimate: &GradientEstimate,
    h: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    assert!(h > 0.0, "stepsize must be positive");
    let mut next = theta.to_vec();
    langevin_update(&mut next, &estimate.grad, h, beta, rng);
    next
}

/// Scalar outputs of one adaptive step, consumed by the chain driver.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub dt: f64,
    pub zeta: f64,
    /// Potential estimate at the pre-step point, from the step's own
    /// gradient call.
    pub potential: f64,
}

/// One adaptive move: queries the oracle at `theta`, folds the squared
/// gradient norm into the monitor, derives `Δt = ψ(ζ)·Δτ`, and applies the
/// Langevin update **with that same gradient**. The monitor update strictly
/// precedes the move, so the stepsize a gradient produces already applies to
/// its own step.
pub fn sasgld_step<O: GradientOracle + ?Sized>(
    theta: &mut Vec<f64>,
    state: &mut ControllerState,
    oracle: &mut O,
    ctl: &ControllerConfig,
    dtau: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> StepInfo {
    let estimate = oracle.estimate(theta, rng);
    let grad_sq = estimate.grad.iter().map(|g| g * g).sum();
    state.update_monitor(ctl, grad_sq, dtau);
    let dt = state.next_timestep(ctl, dtau);
    langevin_update(theta, &estimate.grad, dt, beta, rng);
    StepInfo {
        dt,
        zeta: state.monitor_value(),
        potential: estimate.potential,
    }
}

/// Everything a finished (or aborted) chain reports.
#[derive(Debug, Clone)]
pub struct ChainResult {
    /// One record per completed step, 1-indexed. θ snapshots are attached at
    /// thinning points for targets of dimension ≤ 4; the snapshot is the
    /// post-move state of its step, while `potential` is the estimate at the
    /// pre-move point.
    pub records: Vec<ChainRecord>,
    /// Thinned post-burn-in θ snapshots with their Δt weights.
    pub ensemble: Vec<EnsembleMember>,
    pub final_theta: ParameterVector,
    /// First step whose gradient or updated state went non-finite. That step
    /// leaves no record; everything before it is kept.
    pub diverged_at: Option<u64>,
    /// Σ Δt over completed steps.
    pub total_physical_time: f64,
}

/// Runs `n_steps` of the chosen sampler from `theta0`.
///
/// For SGLD the `dtau` field of the config is the fixed stepsize h; for
/// SA-SGLD it is the Sundman increment Δτ, and every recorded Δt lies in
/// [m·Δτ, M·Δτ]. Divergence is recorded, not thrown: the first non-finite
/// gradient or state truncates the run with `diverged_at` set to that step.
pub fn run_chain<O: GradientOracle + ?Sized>(
    sampler: SamplerKind,
    oracle: &mut O,
    cfg: &SamplerConfig,
    ctl: &ControllerConfig,
    theta0: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> ChainResult {
    assert_eq!(theta0.len(), oracle.dim(), "theta0 dimension mismatch");
    assert!(cfg.thinning >= 1, "thinning interval must be >= 1");
    let dim = theta0.len();
    let keep_theta = dim <= 4;

    let mut theta = theta0;
    let mut state = ControllerState::new();
    let mut records = Vec::with_capacity(cfg.n_steps.min(1 << 22) as usize);
    let mut ensemble = Vec::new();
    let mut diverged_at = None;
    let mut total_physical_time = 0.0;

    for step in 1..=cfg.n_steps {
        let estimate = oracle.estimate(&theta, rng);
        debug_assert_eq!(estimate.grad.len(), dim);
        if !estimate.grad.iter().all(|g| g.is_finite()) {
            diverged_at = Some(step);
            break;
        }
        let (dt, zeta) = match sampler {
            SamplerKind::Sgld => (cfg.dtau, 0.0),
            SamplerKind::Sasgld => {
                let grad_sq: f64 = estimate.grad.iter().map(|g| g * g).sum();
                // Components can each be finite while the squared norm
                // overflows; that state is already past saving, so it trips
                // the same fault as a non-finite gradient.
                if !grad_sq.is_finite() {
                    diverged_at = Some(step);
                    break;
                }
                state.update_monitor(ctl, grad_sq, cfg.dtau);
                (state.next_timestep(ctl, cfg.dtau), state.monitor_value())
            }
        };
        langevin_update(&mut theta, &estimate.grad, dt, cfg.beta, rng);
        if !theta.iter().all(|t| t.is_finite()) {
            diverged_at = Some(step);
            break;
        }
        total_physical_time += dt;
        let at_thinning_point = step % cfg.thinning == 0;
        records.push(ChainRecord {
            step,
            theta: if keep_theta && at_thinning_point {
                Some(ParameterVector::new(theta.clone()))
            } else {
                None
            },
            dt,
            zeta,
            potential: estimate.potential,
        });
        if step > cfg.burn_in && at_thinning_point {
            ensemble.push(EnsembleMember {
                step,
                weight_dt: dt,
                theta: ParameterVector::new(theta.clone()),
            });
        }
    }

    ChainResult {
        records,
        ensemble,
        final_theta: ParameterVector::new(theta),
        diverged_at,
        total_physical_time,
    }
}
