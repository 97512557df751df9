//! Single-example analytic problems with known `L`, `μ` and `f*`.
//!
//! With `n = 1` the stochastic gradient is the full gradient, so the strong
//! growth condition holds with `ρ = 1` exactly and every stochastic rate bound
//! becomes a deterministic one that must hold at every iteration.

use super::{FiniteSum, Smoothness};
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// `f(w) = ½ Σ_j a_j (w_j − c_j)²` with `a_j ≥ 0`.
///
/// Strongly convex when every `a_j > 0`; a zero curvature entry gives a flat
/// direction (convex, not strongly convex).
#[derive(Debug, Clone)]
pub struct Quadratic {
    curvature: Vec<f64>,
    center: Vector,
}

impl Quadratic {
    pub fn new(curvature: Vec<f64>, center: Vector) -> Result<Self> {
        if curvature.len() != center.dim() {
            return Err(Error::DimensionMismatch {
                expected: curvature.len(),
                found: center.dim(),
            });
        }
        if curvature.is_empty() || curvature.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument("curvatures must be finite and ≥ 0".into()));
        }
        if curvature.iter().all(|a| *a == 0.0) {
            return Err(Error::InvalidArgument("at least one curvature must be positive".into()));
        }
        Ok(Quadratic { curvature, center })
    }

    pub fn minimizer(&self) -> &Vector {
        &self.center
    }

    /// Projection of `w` onto the minimizer set (flat directions keep `w_j`).
    pub fn nearest_minimizer(&self, w: &[f64]) -> Vector {
        self.curvature
            .iter()
            .zip(w)
            .zip(self.center.iter())
            .map(|((a, wj), cj)| if *a == 0.0 { *wj } else { *cj })
            .collect::<Vec<_>>()
            .into()
    }
}

impl FiniteSum for Quadratic {
    fn num_examples(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn example_loss(&self, w: &[f64], _i: usize) -> f64 {
        0.5 * self
            .curvature
            .iter()
            .zip(w)
            .zip(self.center.iter())
            .map(|((a, wj), cj)| a * (wj - cj) * (wj - cj))
            .sum::<f64>()
    }

    fn example_grad_into(&self, w: &[f64], _i: usize, out: &mut [f64]) {
        for (((o, a), wj), cj) in out.iter_mut().zip(&self.curvature).zip(w).zip(self.center.iter()) {
            *o = a * (wj - cj);
        }
    }

    fn smoothness(&self) -> Option<Smoothness> {
        let l = self.curvature.iter().copied().fold(0.0, f64::max);
        let mu = self.curvature.iter().copied().fold(f64::INFINITY, f64::min);
        Some(Smoothness {
            l,
            l_max: l,
            mu: (mu > 0.0).then_some(mu),
        })
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(u, v) = u² + 3 sin²(u) + ½ v²`: smooth, non-convex in `u`, and PL.
///
/// `∂²f/∂u² = 2 + 6 cos(2u) ∈ [−4, 8]`, so `L = 8`. The one-dimensional part
/// `u² + 3 sin² u` satisfies PL with constant 1/32, and the `v` part with
/// constant 1, so `μ = 1/32`. The unique minimizer is the origin with `f* = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlNonconvex;

impl PlNonconvex {
    pub const L: f64 = 8.0;
    pub const MU: f64 = 1.0 / 32.0;
}

impl FiniteSum for PlNonconvex {
    fn num_examples(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        2
    }

    fn example_loss(&self, w: &[f64], _i: usize) -> f64 {
        let s = w[0].sin();
        w[0] * w[0] + 3.0 * s * s + 0.5 * w[1] * w[1]
    }

    fn example_grad_into(&self, w: &[f64], _i: usize, out: &mut [f64]) {
        out[0] = 2.0 * w[0] + 3.0 * (2.0 * w[0]).sin();
        out[1] = w[1];
    }

    fn smoothness(&self) -> Option<Smoothness> {
        Some(Smoothness {
            l: Self::L,
            l_max: Self::L,
            mu: Some(Self::MU),
        })
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pl_inequality_holds_on_grid() {
        let f = PlNonconvex;
        let mut g = [0.0; 2];
        for i in -4000..=4000 {
            for v in [-3.0, -0.5, 0.0, 0.1, 2.0] {
                let w = [i as f64 * 0.005, v];
                let fw = f.example_loss(&w, 0);
                f.example_grad_into(&w, 0, &mut g);
                let gn = g[0] * g[0] + g[1] * g[1];
                assert!(gn >= 2.0 * PlNonconvex::MU * fw - 1e-15, "PL fails at {w:?}");
            }
        }
    }

    #[test]
    fn pl_function_is_not_convex() {
        // Second derivative in u at u = π/2 is 2 + 6 cos(π) = −4.
        let f = PlNonconvex;
        let h = 1e-4;
        let u = std::f64::consts::FRAC_PI_2;
        let second = (f.example_loss(&[u + h, 0.0], 0) - 2.0 * f.example_loss(&[u, 0.0], 0)
            + f.example_loss(&[u - h, 0.0], 0))
            / (h * h);
        assert!((second + 4.0).abs() < 1e-5, "{second}");
    }

    #[test]
    fn quadratic_constants() {
        let q = Quadratic::new(vec![4.0, 1.0, 0.25], Vector::from(vec![1.0, 2.0, 3.0])).unwrap();
        let s = q.smoothness().unwrap();
        assert_eq!((s.l, s.mu), (4.0, Some(0.25)));
        assert_eq!(q.example_loss(&[1.0, 2.0, 3.0], 0), 0.0);
        let flat = Quadratic::new(vec![1.0, 0.0], Vector::zeros(2)).unwrap();
        assert_eq!(flat.smoothness().unwrap().mu, None);
        assert_eq!(flat.nearest_minimizer(&[3.0, 5.0]).as_slice(), &[0.0, 5.0]);
        assert!(Quadratic::new(vec![0.0], Vector::zeros(1)).is_err());
    }
}
