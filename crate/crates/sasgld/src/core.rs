//! Shared domain types, configuration, seeded RNG streams, and errors.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// One message per violated configuration invariant.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{0}")]
    Parse(String),
    #[error("IDX file error: {0}")]
    Idx(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("chain diverged at step {step}")]
    Diverged { step: u64 },
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Flat sampler state θ. Entries are finite in a healthy chain; a non-finite
/// entry is a detectable fault, never a silently propagated value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// Per-chain sampling schedule.
///
/// `dtau` is the Sundman time increment Δτ; for the SGLD baseline it is the
/// fixed stepsize h itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub dtau: f64,
    /// Inverse temperature β of the target exp(−β·U).
    pub beta: f64,
    pub seed: u64,
    pub n_steps: u64,
    /// Keep a θ snapshot every `thinning` steps.
    pub thinning: u64,
    /// Steps discarded before ensemble collection.
    pub burn_in: u64,
}

/// Constants of the ζ monitor and the ψ transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Monitor decay rate α (units 1/time); ρ = exp(−α·Δτ).
    pub alpha: f64,
    /// Transition sharpness exponent of ψ.
    pub r: f64,
    /// Monitor scale: ψ uses (s·ζ)^r.
    pub s: f64,
    /// Lower stepsize multiplier: Δt ≥ m·Δτ.
    pub m: f64,
    /// Upper stepsize multiplier: Δt ≤ M·Δτ.
    pub m_upper: f64,
    /// Monitor floor δ added to ‖G‖².
    pub delta: f64,
}

impl Default for ControllerConfig {
    /// The m=0.5, M=2 bounds with a mild transform; δ=1e-8.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            r: 0.5,
            s: 1.0,
            m: 0.5,
            m_upper: 2.0,
            delta: 1e-8,
        }
    }
}

/// One step of a chain: the state snapshot (kept only at thinning points for
/// low-dimensional targets), the adaptive increment Δt, the monitor ζ, and
/// the minibatch potential estimate Ũ from the gradient call that produced
/// the step (evaluated at the pre-step point; no second likelihood pass).
#[derive(Debug, Clone)]
pub struct ChainRecord {
    /// 1-indexed step counter.
    pub step: u64,
    pub theta: Option<ParameterVector>,
    pub dt: f64,
    /// 0 for SGLD records (no monitor).
    pub zeta: f64,
    pub potential: f64,
}

/// A stored parameter snapshot with the Δt weight of the step that produced
/// it, consumed by posterior-predictive evaluation.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub step: u64,
    pub weight_dt: f64,
    pub theta: ParameterVector,
}

/// Deterministic random stream: identical `(seed, stream_id)` yields
/// identical draws, distinct `stream_id`s yield independent streams. One
/// root seed plus per-chain stream ids keeps multi-chain runs reproducible
/// independently of execution order.
pub fn new_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream-id layout for a single experiment invocation. Each logical chain
/// `k` owns a block of ids so samplers never share a generator.
pub mod streams {
    /// Noise stream of chain `k` for the given sampler lane (0=SGLD, 1=SA-SGLD).
    pub fn chain_noise(chain: u64, lane: u64) -> u64 {
        chain * 8 + lane
    }
    /// Gradient-oracle stream (minibatch draws, synthetic noise) of chain `k`.
    pub fn chain_oracle(chain: u64, lane: u64) -> u64 {
        chain * 8 + 2 + lane
    }
    /// Parameter-initialization stream of chain `k` (shared by both lanes so
    /// compared samplers start from the same point).
    pub fn chain_init(chain: u64) -> u64 {
        chain * 8 + 4
    }
    /// Dataset-generation stream (independent of all chains).
    pub const DATA: u64 = u64::MAX;
}

/// Checks every invariant of both configs and returns all violations, not
/// just the first.
pub fn validate_config(
    cfg: &SamplerConfig,
    ctl: &ControllerConfig,
) -> std::result::Result<(), Vec<String>> {
    let mut errs = Vec::new();
    if !(cfg.dtau > 0.0) {
        errs.push(format!("dtau > 0 violated (dtau = {})", cfg.dtau));
    }
    if !(cfg.beta > 0.0) {
        errs.push(format!("beta > 0 violated (beta = {})", cfg.beta));
    }
    if cfg.thinning < 1 {
        errs.push("thinning >= 1 violated (thinning = 0)".to_string());
    }
    if cfg.n_steps > 0 && cfg.burn_in >= cfg.n_steps {
        errs.push(format!(
            "burn_in < n_steps violated (burn_in = {}, n_steps = {})",
            cfg.burn_in, cfg.n_steps
        ));
    }
    if !(ctl.alpha > 0.0) {
        errs.push(format!("alpha > 0 violated (alpha = {})", ctl.alpha));
    }
    if !(ctl.r > 0.0) {
        errs.push(format!("r > 0 violated (r = {})", ctl.r));
    }
    if !(ctl.s > 0.0) {
        errs.push(format!("s > 0 violated (s = {})", ctl.s));
    }
    if !(ctl.m > 0.0) {
        errs.push(format!("m > 0 violated (m = {})", ctl.m));
    }
    if !(ctl.m_upper.is_finite() && ctl.m_upper > 0.0) {
        errs.push(format!(
            "M finite and positive violated (M = {})",
            ctl.m_upper
        ));
    }
    // m == M is allowed: the stepsize map degenerates to the constant m and
    // the sampler matches plain dynamics at h = m·Δτ.
    if ctl.m > 0.0 && ctl.m_upper > 0.0 && ctl.m > ctl.m_upper {
        errs.push(format!(
            "m <= M violated (m = {}, M = {})",
            ctl.m, ctl.m_upper
        ));
    }
    if !(ctl.delta > 0.0) {
        errs.push(format!("delta > 0 violated (delta = {})", ctl.delta));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds2 {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds2 {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        assert!(xmin < xmax && ymin < ymax, "bounds must be nonempty");
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    /// Square box [−half, half]².
    pub fn square(half: f64) -> Self {
        Self::new(-half, half, -half, half)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x < self.xmax && y >= self.ymin && y < self.ymax
    }
}

/// Uniform 2D grid of nonnegative weights, row-major in x then y.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub bounds: Bounds2,
    pub nx: usize,
    pub ny: usize,
    pub w: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(bounds: Bounds2, nx: usize, ny: usize) -> Self {
        Self {
            bounds,
            nx,
            ny,
            w: vec![0.0; nx * ny],
        }
    }

    /// Cell index of a point, or None outside the bounds.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.bounds.contains(x, y) {
            return None;
        }
        let fx = (x - self.bounds.xmin) / (self.bounds.xmax - self.bounds.xmin);
        let fy = (y - self.bounds.ymin) / (self.bounds.ymax - self.bounds.ymin);
        let ix = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let iy = ((fy * self.ny as f64) as usize).min(self.ny - 1);
        Some((ix, iy))
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.w[ix * self.ny + iy]
    }

    pub fn at_mut(&mut self, ix: usize, iy: usize) -> &mut f64 {
        &mut self.w[ix * self.ny + iy]
    }

    /// Center coordinates of cell (ix, iy).
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let dx = (self.bounds.xmax - self.bounds.xmin) / self.nx as f64;
        let dy = (self.bounds.ymax - self.bounds.ymin) / self.ny as f64;
        (
            self.bounds.xmin + (ix as f64 + 0.5) * dx,
            self.bounds.ymin + (iy as f64 + 0.5) * dy,
        )
    }

    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Scales weights so they sum to 1. Errors on a zero grid.
    pub fn normalize(&mut self) -> Result<()> {
        let t = self.total();
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Shape(format!(
                "cannot normalize grid with total weight {t}"
            )));
        }
        for v in &mut self.w {
            *v /= t;
        }
        Ok(())
    }

    /// Sums `factor × factor` blocks into a coarser grid over the same
    /// bounds. Used to carry a fine quadrature density onto a display
    /// partition without re-evaluating the potential.
    pub fn coarsen(&self, factor: usize) -> Result<Grid2> {
        if factor == 0 || self.nx % factor != 0 || self.ny % factor != 0 {
            return Err(Error::Shape(format!(
                "coarsen factor {factor} does not divide {}x{}",
                self.nx, self.ny
            )));
        }
        let nx = self.nx / factor;
        let ny = self.ny / factor;
        let mut out = Grid2::zeros(self.bounds, nx, ny);
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                *out.at_mut(ix / factor, iy / factor) += self.at(ix, iy);
            }
        }
        Ok(out)
    }

    /// Variance of the x- and y-marginals of the grid measure.
    pub fn marginal_variances(&self) -> (f64, f64) {
        let total = self.total();
        let (mut mx, mut my) = (0.0, 0.0);
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let (cx, cy) = self.cell_center(ix, iy);
                let p = self.at(ix, iy) / total;
                mx += p * cx;
                my += p * cy;
            }
        }
        let (mut vx, mut vy) = (0.0, 0.0);
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let (cx, cy) = self.cell_center(ix, iy);
                let p = self.at(ix, iy) / total;
                vx += p * (cx - mx) * (cx - mx);
                vy += p * (cy - my) * (cy - my);
            }
        }
        (vx, vy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn valid_sampler() -> SamplerConfig {
        SamplerConfig {
            dtau: 0.2,
            beta: 1.0,
            seed: 0,
            n_steps: 100,
            thinning: 1,
            burn_in: 10,
        }
    }

    #[test]
    fn same_seed_and_stream_reproduce_draws() {
        let mut a = new_rng(7, 0);
        let mut b = new_rng(7, 0);
        for _ in 0..100 {
            let x: f64 = StandardNormal.sample(&mut a);
            let y: f64 = StandardNormal.sample(&mut b);
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn different_streams_differ() {
        let mut a = new_rng(7, 0);
        let mut b = new_rng(7, 1);
        let xs: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut a)).collect();
        let ys: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut b)).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn normal_draws_match_moments() {
        let mut rng = new_rng(123, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean = {mean}");
        assert!((var - 1.0).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn paper_bounds_validate_ok() {
        let ctl = ControllerConfig {
            m: 0.5,
            m_upper: 2.0,
            ..ControllerConfig::default()
        };
        assert!(validate_config(&valid_sampler(), &ctl).is_ok());
    }

    #[test]
    fn swapped_bounds_report_m_less_than_upper() {
        let ctl = ControllerConfig {
            m: 2.0,
            m_upper: 0.5,
            ..ControllerConfig::default()
        };
        let errs = validate_config(&valid_sampler(), &ctl).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("m <= M violated")),
            "got {errs:?}"
        );
        // Equal bounds are legal: the collapse configuration.
        let collapsed = ControllerConfig {
            m: 1.0,
            m_upper: 1.0,
            ..ControllerConfig::default()
        };
        assert!(validate_config(&valid_sampler(), &collapsed).is_ok());
    }

    #[test]
    fn zero_delta_rejected() {
        let ctl = ControllerConfig {
            delta: 0.0,
            ..ControllerConfig::default()
        };
        let errs = validate_config(&valid_sampler(), &ctl).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("delta > 0 violated")),
            "got {errs:?}"
        );
    }

    #[test]
    fn all_violations_reported_together() {
        let cfg = SamplerConfig {
            dtau: -1.0,
            beta: 0.0,
            seed: 0,
            n_steps: 10,
            thinning: 0,
            burn_in: 10,
        };
        let ctl = ControllerConfig {
            alpha: 0.0,
            r: 0.0,
            s: 0.0,
            m: 0.0,
            m_upper: f64::INFINITY,
            delta: 0.0,
        };
        let errs = validate_config(&cfg, &ctl).unwrap_err();
        assert!(errs.len() >= 9, "expected every violation, got {errs:?}");
    }

    #[test]
    fn grid_cell_lookup_and_centers() {
        let g = Grid2::zeros(Bounds2::new(0.0, 1.0, 0.0, 2.0), 4, 8);
        assert_eq!(g.cell_of(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.cell_of(0.999, 1.999), Some((3, 7)));
        assert_eq!(g.cell_of(1.0, 0.5), None);
        let (cx, cy) = g.cell_center(0, 0);
        assert!((cx - 0.125).abs() < 1e-15 && (cy - 0.125).abs() < 1e-15);
    }

    #[test]
    fn coarsen_preserves_total_weight() {
        let mut g = Grid2::zeros(Bounds2::square(1.0), 8, 8);
        for (i, v) in g.w.iter_mut().enumerate() {
            *v = i as f64;
        }
        let c = g.coarsen(4).unwrap();
        assert_eq!(c.nx, 2);
        assert!((c.total() - g.total()).abs() < 1e-9);
        assert!(g.coarsen(3).is_err());
    }
}
