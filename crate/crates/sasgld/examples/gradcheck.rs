//! Central-difference validation of every analytic gradient in the crate:
//! the four toy potentials, the classifier's manual backprop, and both
//! prior families. A fresh model should print errors around 1e-9; anything
//! near 1e-4 means a broken derivative.

use ndarray::Array2;
use rand::Rng;
use sasgld::bnn::{log_prior_and_grad, mlp_backward, MlpSpec, PriorSpec};
use sasgld::core::new_rng;
use sasgld::potentials::{finite_diff_check, Potential};

fn central_diff(f: impl Fn(&[f64]) -> f64, theta: &mut [f64], k: usize, eps: f64) -> f64 {
    let saved = theta[k];
    theta[k] = saved + eps;
    let up = f(theta);
    theta[k] = saved - eps;
    let down = f(theta);
    theta[k] = saved;
    (up - down) / (2.0 * eps)
}

fn main() {
    let potentials = [
        Potential::muller_brown(),
        Potential::Star,
        Potential::Quadratic { curvature: 2.0, dim: 3 },
        Potential::DoubleWell { height: 1.0, dim: 2 },
    ];
    for p in &potentials {
        let mut rng = new_rng(0, 6);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let theta: Vec<f64> = match p {
                // Stay on the surface's bounded patch; the exponentials
                // overflow the finite-difference quotient far outside it.
                Potential::MullerBrown(_) => {
                    vec![rng.random_range(-1.8..1.2), rng.random_range(-0.5..2.0)]
                }
                _ => (0..p.dim()).map(|_| rng.random_range(-3.0..3.0)).collect(),
            };
            worst = worst.max(finite_diff_check(p, &theta, 1e-5));
        }
        println!("potential {:<14} max rel err {worst:.2e}", p.id());
    }

    let spec = MlpSpec::new(vec![6, 4, 3]).unwrap();
    let mut rng = new_rng(1, 7);
    let mut theta: Vec<f64> = (0..spec.param_count())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let x = Array2::from_shape_fn((8, 6), |_| rng.random_range(0.0..1.0));
    let y: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
    let (_, grad) = mlp_backward(&spec, &theta, &x, &y).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let k = rng.random_range(0..theta.len());
        let fd = central_diff(
            |t| mlp_backward(&spec, t, &x, &y).unwrap().0,
            &mut theta,
            k,
            1e-5,
        );
        worst = worst.max((grad[k] - fd).abs() / (1.0 + grad[k].abs()));
    }
    println!("classifier backprop     max rel err {worst:.2e}");

    for prior in [
        PriorSpec::Gaussian { sigma_p: 1.0 },
        PriorSpec::Horseshoe { tau: 0.1 },
    ] {
        let mut theta: Vec<f64> = (0..20).map(|_| rng.random_range(0.2..2.0)).collect();
        let (_, grad) = log_prior_and_grad(&prior, &theta);
        let mut worst = 0.0f64;
        for k in 0..theta.len() {
            let fd = central_diff(
                |t| log_prior_and_grad(&prior, t).0,
                &mut theta,
                k,
                1e-6,
            );
            worst = worst.max((grad[k] - fd).abs() / (1.0 + grad[k].abs()));
        }
        println!("prior {prior:?} max rel err {worst:.2e}");
    }
}
