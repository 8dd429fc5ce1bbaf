//! Analytic potentials U(θ) with exact gradients, a finite-difference
//! checker, and midpoint-quadrature grid densities.

use crate::core::{Bounds2, Error, Grid2, Result};

/// Parameters of the four-term Müller-Brown exponential sum
/// `U = scale · Σᵢ Cᵢ·exp(aᵢ(x−uᵢ)² + bᵢ(x−uᵢ)(y−vᵢ) + cᵢ(y−vᵢ)²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MullerBrownParams {
    pub big_c: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub c: [f64; 4],
    pub u: [f64; 4],
    pub v: [f64; 4],
    pub scale: f64,
}

impl Default for MullerBrownParams {
    fn default() -> Self {
        Self {
            big_c: [-267.0, -285.0, -275.0, 2.5],
            a: [-0.9, -0.9, -9.5, 0.6],
            b: [0.0, 0.0, 10.0, 0.1],
            c: [-9.0, -9.0, -5.5, 0.1],
            u: [1.35, -0.95, -1.05, -1.0],
            v: [-0.5, -0.15, 1.05, 0.9],
            scale: 1.0 / 20.0,
        }
    }
}

/// A built-in potential-energy function.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    MullerBrown(MullerBrownParams),
    /// `U(x,y) = x² + 1000·x²y² + y²`: four narrow arms along the axes.
    Star,
    /// Isotropic `U = κ·‖θ‖²/2` in any dimension.
    Quadratic { curvature: f64, dim: usize },
    /// Separable `U = height·Σᵢ(θᵢ²−1)²`, dissipative with known wells.
    DoubleWell { height: f64, dim: usize },
}

impl Potential {
    pub fn muller_brown() -> Self {
        Potential::MullerBrown(MullerBrownParams::default())
    }

    /// Resolves a potential id used in config files and CLI flags.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "muller_brown" => Ok(Self::muller_brown()),
            "star" => Ok(Potential::Star),
            "quadratic" => Ok(Potential::Quadratic {
                curvature: 1.0,
                dim: 2,
            }),
            "double_well" => Ok(Potential::DoubleWell {
                height: 1.0,
                dim: 2,
            }),
            other => Err(Error::Parse(format!(
                "unknown potential '{other}' (expected muller_brown, star, quadratic, double_well)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Potential::MullerBrown(_) => "muller_brown",
            Potential::Star => "star",
            Potential::Quadratic { .. } => "quadratic",
            Potential::DoubleWell { .. } => "double_well",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Potential::MullerBrown(_) | Potential::Star => 2,
            Potential::Quadratic { dim, .. } | Potential::DoubleWell { dim, .. } => *dim,
        }
    }

    fn check_dim(&self, theta: &[f64]) {
        assert_eq!(
            theta.len(),
            self.dim(),
            "theta dimension {} does not match potential '{}' dimension {}",
            theta.len(),
            self.id(),
            self.dim()
        );
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.check_dim(theta);
        match self {
            Potential::MullerBrown(p) => {
                let (x, y) = (theta[0], theta[1]);
                let mut total = 0.0;
                for i in 0..4 {
                    let dx = x - p.u[i];
                    let dy = y - p.v[i];
                    let l = p.a[i] * dx * dx + p.b[i] * dx * dy + p.c[i] * dy * dy;
                    total += p.big_c[i] * l.exp();
                }
                p.scale * total
            }
            Potential::Star => {
                let (x, y) = (theta[0], theta[1]);
                x * x + 1000.0 * x * x * y * y + y * y
            }
            Potential::Quadratic { curvature, .. } => {
                0.5 * curvature * theta.iter().map(|t| t * t).sum::<f64>()
            }
            Potential::DoubleWell { height, .. } => {
                height
                    * theta
                        .iter()
                        .map(|t| {
                            let w = t * t - 1.0;
                            w * w
                        })
                        .sum::<f64>()
            }
        }
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.check_dim(theta);
        match self {
            Potential::MullerBrown(p) => {
                let (x, y) = (theta[0], theta[1]);
                let (mut gx, mut gy) = (0.0, 0.0);
                for i in 0..4 {
                    let dx = x - p.u[i];
                    let dy = y - p.v[i];
                    let l = p.a[i] * dx * dx + p.b[i] * dx * dy + p.c[i] * dy * dy;
                    let e = p.scale * p.big_c[i] * l.exp();
                    gx += e * (2.0 * p.a[i] * dx + p.b[i] * dy);
                    gy += e * (p.b[i] * dx + 2.0 * p.c[i] * dy);
                }
                vec![gx, gy]
            }
            Potential::Star => {
                let (x, y) = (theta[0], theta[1]);
                vec![
                    2.0 * x + 2000.0 * x * y * y,
                    2000.0 * x * x * y + 2.0 * y,
                ]
            }
            Potential::Quadratic { curvature, .. } => {
                theta.iter().map(|t| curvature * t).collect()
            }
            Potential::DoubleWell { height, .. } => theta
                .iter()
                .map(|t| 4.0 * height * t * (t * t - 1.0))
                .collect(),
        }
    }
}

/// Maximum over coordinates of
/// `|gradᵢ − (U(θ+ε·eᵢ) − U(θ−ε·eᵢ))/(2ε)| / (1 + |gradᵢ|)`.
pub fn finite_diff_check(p: &Potential, theta: &[f64], eps: f64) -> f64 {
    assert!(eps > 0.0 && eps <= 1e-3, "eps must lie in (0, 1e-3]");
    let grad = p.grad(theta);
    let mut worst: f64 = 0.0;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = p.value(&probe);
        probe[i] = theta[i] - eps;
        let down = p.value(&probe);
        probe[i] = theta[i];
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max((grad[i] - numeric).abs() / (1.0 + grad[i].abs()));
    }
    worst
}

/// Midpoint-quadrature Boltzmann density: cell weights ∝ exp(−β·U(center)),
/// normalized to sum 1. The caller is responsible for bounds covering the
/// dominant mass and for a resolution fine enough that midpoint evaluation
/// resolves the density's features (check: doubling the resolution and
/// coarsening back should change the measure by little).
pub fn grid_boltzmann_density(
    p: &Potential,
    beta: f64,
    bounds: Bounds2,
    resolution: usize,
) -> Result<Grid2> {
    assert!(resolution >= 16, "resolution must be at least 16");
    assert_eq!(p.dim(), 2, "grid density requires a 2D potential");
    let mut grid = Grid2::zeros(bounds, resolution, resolution);
    // Shift by the grid minimum before exponentiating; normalization removes
    // the shift and the exp never overflows on deep wells.
    let mut umin = f64::INFINITY;
    let mut values = vec![0.0; resolution * resolution];
    for ix in 0..resolution {
        for iy in 0..resolution {
            let (cx, cy) = grid.cell_center(ix, iy);
            let u = p.value(&[cx, cy]);
            if !u.is_finite() {
                return Err(Error::Check(format!(
                    "potential '{}' non-finite at grid cell ({cx}, {cy})",
                    p.id()
                )));
            }
            values[ix * resolution + iy] = u;
            umin = umin.min(u);
        }
    }
    for (w, u) in grid.w.iter_mut().zip(&values) {
        *w = (-beta * (u - umin)).exp();
    }
    grid.normalize()?;
    Ok(grid)
}

/// A metastable well: the Euclidean ball of `radius` around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Well {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Well {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Deterministic gradient descent with backtracking, used to locate minima.
pub fn descend(p: &Potential, start: [f64; 2], max_iters: usize) -> [f64; 2] {
    let mut theta = vec![start[0], start[1]];
    let mut step = 1e-2;
    let mut value = p.value(&theta);
    for _ in 0..max_iters {
        let g = p.grad(&theta);
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if norm < 1e-12 {
            break;
        }
        let cand = vec![theta[0] - step * g[0], theta[1] - step * g[1]];
        let cand_value = p.value(&cand);
        if cand_value < value {
            theta = cand;
            value = cand_value;
            step = (step * 1.2).min(0.1);
        } else {
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
    }
    [theta[0], theta[1]]
}

/// Radius of the well balls used for occupancy statistics; keeps the three
/// Müller-Brown balls disjoint (pairwise minimum separation ≈ 1.21).
pub const WELL_RADIUS: f64 = 0.35;

/// The three Müller-Brown wells, located by descent from fixed probes and
/// ordered by ascending potential value (deepest first).
pub fn muller_brown_wells() -> [Well; 3] {
    let p = Potential::muller_brown();
    let mut minima: Vec<[f64; 2]> = [[-0.5, 1.5], [0.0, 0.5], [0.6, 0.0]]
        .iter()
        .map(|s| descend(&p, *s, 20_000))
        .collect();
    minima.sort_by(|a, b| p.value(a).partial_cmp(&p.value(b)).unwrap());
    [
        Well {
            center: minima[0],
            radius: WELL_RADIUS,
        },
        Well {
            center: minima[1],
            radius: WELL_RADIUS,
        },
        Well {
            center: minima[2],
            radius: WELL_RADIUS,
        },
    ]
}
