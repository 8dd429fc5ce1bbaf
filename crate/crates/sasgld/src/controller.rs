//! Adaptive stepsize control: an exponential moving average ζ of the squared
//! gradient norm, mapped through a bounded decreasing transform ψ to a
//! stepsize multiplier.
//!
//! The monitor obeys `ζ_{n+1} = ρ·ζ_n + ((1−ρ)/α)·g_n` with `ρ = exp(−α·Δτ)`
//! and `g_n = ‖G_n‖² + δ`, so ζ tracks g/α with relaxation time 1/α in
//! physical time. The stepsize is `Δt = ψ(ζ)·Δτ` with
//! `ψ(ζ) = m·((s·ζ)^r + M/m) / ((s·ζ)^r + 1)`, which decreases strictly from
//! M at ζ=0 toward m as ζ→∞. Large gradients therefore shrink the step and
//! flat regions stretch it, while Δt stays inside [m·Δτ, M·Δτ] no matter what
//! the gradients do.

use crate::core::ControllerConfig;

/// Running monitor state. ζ initializes lazily at the fixed point g₀/α of
/// the first observed gradient, so the first step is already consistent with
/// a stationary monitor instead of warming up from an arbitrary zero.
#[derive(Debug, Clone, Default)]
pub struct ControllerState {
    zeta: f64,
    initialized: bool,
}

impl ControllerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current ζ (0 before the first gradient is observed).
    pub fn monitor_value(&self) -> f64 {
        self.zeta
    }

    /// Folds the squared gradient norm of the current step into ζ.
    ///
    /// After any update, `ζ ≥ (1−ρ)·δ/α > 0` holds: the increment term alone
    /// already clears that floor because `g = grad_sq + δ ≥ δ`.
    pub fn update_monitor(&mut self, cfg: &ControllerConfig, grad_sq: f64, dtau: f64) {
        assert!(
            grad_sq.is_finite() && grad_sq >= 0.0,
            "squared gradient norm must be finite and nonnegative, got {grad_sq}"
        );
        let g = grad_sq + cfg.delta;
        if !self.initialized {
            self.zeta = g / cfg.alpha;
            self.initialized = true;
            return;
        }
        let rho = (-cfg.alpha * dtau).exp();
        self.zeta = rho * self.zeta + (1.0 - rho) / cfg.alpha * g;
    }

    /// The next adaptive increment `ψ(ζ)·Δτ`, guaranteed inside
    /// `[m·Δτ, M·Δτ]` (with the products evaluated in f64).
    pub fn next_timestep(&self, cfg: &ControllerConfig, dtau: f64) -> f64 {
        let dt = psi(cfg, self.zeta) * dtau;
        dt.clamp(cfg.m * dtau, cfg.m_upper * dtau)
    }
}

/// The stepsize multiplier `ψ(ζ) = m·((s·ζ)^r + M/m) / ((s·ζ)^r + 1)`.
///
/// Exact endpoints: ψ(0) = M bit-for-bit, and m = M makes ψ ≡ m bit-for-bit
/// (the ratio collapses to 1), which is what lets an adaptive chain with
/// m = M = 1 replay a fixed-step chain exactly. Saturation and non-finite
/// intermediates land on m, and the result is clamped into [m, M].
pub fn psi(cfg: &ControllerConfig, zeta: f64) -> f64 {
    assert!(zeta >= 0.0, "monitor value must be nonnegative, got {zeta}");
    if zeta == 0.0 {
        return cfg.m_upper;
    }
    let x = (cfg.s * zeta).powf(cfg.r);
    if !x.is_finite() {
        return cfg.m;
    }
    let value = cfg.m * ((x + cfg.m_upper / cfg.m) / (x + 1.0));
    value.clamp(cfg.m, cfg.m_upper)
}
