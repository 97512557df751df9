//! Constant step-size SGD, three-sequence accelerated SGD, and their
//! line-search variants.
//!
//! Every step draws exactly one example index (and, with `sigma > 0`, one
//! additive Gaussian noise vector) from the caller's [`Rng`]. The accelerated
//! step evaluates that single stochastic gradient at the extrapolation point
//! and uses it in both the iterate and the estimate-sequence update.

mod accel;
mod run;

pub use accel::{accel_step, line_search_accel_step, AccelMode, AccelSchedule, AccelState};
pub use run::{geometric_grid, run, Method, RunSettings};

use crate::error::{Error, Result};
use crate::numerics::{norm_sq, Rng, Vector};
use crate::objectives::FiniteSum;

/// Hard cap on line-search doublings within one iteration.
pub const MAX_DOUBLINGS: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub eta: f64,
    /// Additive noise level: each step adds `ξ` with `E‖ξ‖² = σ²`.
    pub sigma: f64,
    pub seed: u64,
    /// Report the running mean of the iterates instead of the last one.
    pub averaging: bool,
}

impl SgdConfig {
    pub fn new(eta: f64) -> Self {
        SgdConfig {
            eta,
            sigma: 0.0,
            seed: 0,
            averaging: false,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_averaging(mut self, averaging: bool) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.eta
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be ≥ 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Per-step diagnostics.
///
/// `loss` and `stoch_grad_sq_norm` refer to the sampled example at the point
/// where its gradient was evaluated. Full-objective metrics cost a pass over
/// the data and are taken by [`run`] at its logging points instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Zero-based index of the step just taken.
    pub k: u64,
    pub index: usize,
    pub loss: f64,
    pub stoch_grad_sq_norm: f64,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    grad: Vec<f64>,
    trial: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(dim: usize) -> Self {
        Workspace {
            grad: vec![0.0; dim],
            trial: vec![0.0; dim],
        }
    }
}

/// Samples one example, writes `∇f_i(point) + ξ` into `grad`, and returns the
/// index and `f_i(point)`.
pub(crate) fn draw_gradient<F: FiniteSum + ?Sized>(
    obj: &F,
    point: &[f64],
    sigma: f64,
    rng: &mut Rng,
    grad: &mut [f64],
) -> Result<(usize, f64)> {
    let i = rng.index(obj.num_examples());
    obj.example_grad_into(point, i, grad);
    if sigma > 0.0 {
        let std = sigma / (grad.len() as f64).sqrt();
        for g in grad.iter_mut() {
            *g += std * rng.normal();
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index: i });
    }
    Ok((i, obj.example_loss(point, i)))
}

fn check_dim<F: FiniteSum + ?Sized>(obj: &F, w: &[f64]) -> Result<()> {
    if w.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: w.len(),
        });
    }
    Ok(())
}

/// In-place SGD iterate with optional running average.
#[derive(Debug, Clone)]
pub struct Sgd {
    w: Vector,
    avg: Option<Vector>,
    k: u64,
    eta: f64,
    sigma: f64,
    ws: Workspace,
}

impl Sgd {
    pub fn new(w0: Vector, cfg: &SgdConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = w0.dim();
        Ok(Sgd {
            avg: cfg.averaging.then(|| w0.clone()),
            w: w0,
            k: 0,
            eta: cfg.eta,
            sigma: cfg.sigma,
            ws: Workspace::new(dim),
        })
    }

    pub fn iterate(&self) -> &Vector {
        &self.w
    }

    /// Running mean `(1/k) Σ_{i=1..k} w_i` when averaging, else the iterate.
    pub fn reported(&self) -> &Vector {
        self.avg.as_ref().unwrap_or(&self.w)
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn step<F: FiniteSum + ?Sized>(&mut self, obj: &F, rng: &mut Rng) -> Result<StepReport> {
        let (index, loss) = draw_gradient(obj, &self.w, self.sigma, rng, &mut self.ws.grad)?;
        for (w, g) in self.w.iter_mut().zip(&self.ws.grad) {
            *w -= self.eta * g;
        }
        let report = StepReport {
            k: self.k,
            index,
            loss,
            stoch_grad_sq_norm: norm_sq(&self.ws.grad),
        };
        self.k += 1;
        self.update_average();
        Ok(report)
    }

    /// SGD step whose step size comes from the sampled-example line search.
    /// `l_hat` is doubled in place until the sufficient-decrease test passes.
    pub fn line_search_step<F: FiniteSum + ?Sized>(
        &mut self,
        obj: &F,
        l_hat: &mut f64,
        rng: &mut Rng,
    ) -> Result<StepReport> {
        if !(*l_hat > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "L estimate must be positive, got {l_hat}"
            )));
        }
        let (index, loss) = draw_gradient(obj, &self.w, 0.0, rng, &mut self.ws.grad)?;
        let g_sq = norm_sq(&self.ws.grad);
        let mut doublings = 0;
        loop {
            let step = 1.0 / *l_hat;
            for ((t, w), g) in self.ws.trial.iter_mut().zip(self.w.iter()).zip(&self.ws.grad) {
                *t = w - step * g;
            }
            if obj.example_loss(&self.ws.trial, index) <= loss - 0.5 * step * g_sq {
                break;
            }
            if doublings == MAX_DOUBLINGS {
                return Err(Error::LineSearch {
                    doublings,
                    estimate: *l_hat,
                });
            }
            *l_hat *= 2.0;
            doublings += 1;
        }
        self.w.copy_from_slice(&self.ws.trial);
        let report = StepReport {
            k: self.k,
            index,
            loss,
            stoch_grad_sq_norm: g_sq,
        };
        self.k += 1;
        self.update_average();
        Ok(report)
    }

    fn update_average(&mut self) {
        if let Some(avg) = self.avg.as_mut() {
            let inv = 1.0 / self.k as f64;
            for (a, w) in avg.iter_mut().zip(self.w.iter()) {
                *a += (w - *a) * inv;
            }
        }
    }
}

/// One SGD step `w' = w − η (∇f_i(w) + ξ)`.
pub fn sgd_step<F: FiniteSum + ?Sized>(
    obj: &F,
    w: &Vector,
    cfg: &SgdConfig,
    rng: &mut Rng,
) -> Result<(Vector, StepReport)> {
    check_dim(obj, w)?;
    let mut sgd = Sgd::new(w.clone(), &cfg.clone().with_averaging(false))?;
    let report = sgd.step(obj, rng)?;
    Ok((sgd.w, report))
}

/// One line-search SGD step. Returns the new iterate and the (never
/// decreased) estimate `L̂`.
pub fn line_search_sgd_step<F: FiniteSum + ?Sized>(
    obj: &F,
    w: &Vector,
    l_hat: f64,
    rng: &mut Rng,
) -> Result<(Vector, f64, StepReport)> {
    check_dim(obj, w)?;
    let mut sgd = Sgd::new(w.clone(), &SgdConfig::new(1.0))?;
    let mut l_hat = l_hat;
    let report = sgd.line_search_step(obj, &mut l_hat, rng)?;
    Ok((sgd.w, l_hat, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::objectives::testfns::Quadratic;
    use crate::objectives::{Dataset, LossKind, Objective};

    /// Squared loss with a 1-d feature equal to 1: `f_i(w) = ½(w − y_i)²`.
    fn one_dim_targets(targets: &[f64]) -> Objective {
        let x = Matrix::from_row_major(targets.len(), 1, vec![1.0; targets.len()]).unwrap();
        let data = Dataset::new(x, targets.to_vec()).unwrap();
        Objective::new(LossKind::Squared, data).unwrap()
    }

    #[test]
    fn unit_step_solves_sampled_example() {
        let obj = one_dim_targets(&[1.0, -1.0]);
        let mut rng = Rng::new(4);
        let mut probe = rng.clone();
        let i = probe.index(2);
        let (w, report) = sgd_step(&obj, &Vector::from(vec![0.3]), &SgdConfig::new(1.0), &mut rng).unwrap();
        assert_eq!(report.index, i);
        assert_eq!(w[0], obj.data().labels()[i]);
    }

    #[test]
    fn hand_unrolled_three_steps() {
        // f_i(w) = ½(w − y_i)², η = 0.5: w ← w − 0.5 (w − y_i) = (w + y_i) / 2
        let obj = one_dim_targets(&[1.0, -1.0]);
        let seed = 17;
        let mut probe = Rng::new(seed);
        let mut expected = 2.0;
        for _ in 0..3 {
            let y = obj.data().labels()[probe.index(2)];
            expected = expected - 0.5 * (expected - y);
        }
        let mut rng = Rng::new(seed);
        let mut w = Vector::from(vec![2.0]);
        for _ in 0..3 {
            w = sgd_step(&obj, &w, &SgdConfig::new(0.5), &mut rng).unwrap().0;
        }
        assert_eq!(w[0], expected);
    }

    #[test]
    fn interpolating_point_is_fixed() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let data = Dataset::new(x, vec![1.0, -1.0]).unwrap();
        let obj = Objective::new(LossKind::SquaredHinge, data).unwrap();
        let w = Vector::from(vec![2.0, -2.0]);
        let mut rng = Rng::new(0);
        for _ in 0..10 {
            let (next, _) = sgd_step(&obj, &w, &SgdConfig::new(0.7), &mut rng).unwrap();
            assert_eq!(next, w);
        }
    }

    #[test]
    fn non_finite_gradient_names_index() {
        let obj = one_dim_targets(&[1.0]);
        let mut rng = Rng::new(0);
        let err = sgd_step(&obj, &Vector::from(vec![f64::INFINITY]), &SgdConfig::new(1.0), &mut rng).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 0 }));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SgdConfig::new(0.0).validate().is_err());
        assert!(SgdConfig::new(1.0).with_sigma(-1.0).validate().is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let obj = one_dim_targets(&[1.0]);
        let err = sgd_step(&obj, &Vector::zeros(2), &SgdConfig::new(1.0), &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn averaging_tracks_running_mean() {
        let q = Quadratic::new(vec![1.0], Vector::zeros(1)).unwrap();
        let mut sgd = Sgd::new(Vector::from(vec![8.0]), &SgdConfig::new(0.5).with_averaging(true)).unwrap();
        let mut rng = Rng::new(0);
        for _ in 0..3 {
            sgd.step(&q, &mut rng).unwrap();
        }
        // iterates 4, 2, 1
        assert!((sgd.reported()[0] - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(sgd.iterate()[0], 1.0);
    }

    #[test]
    fn noise_has_requested_energy() {
        let q = Quadratic::new(vec![1.0; 8], Vector::zeros(8)).unwrap();
        let mut rng = Rng::new(3);
        let mut buf = vec![0.0; 8];
        let trials = 20_000;
        let mut total = 0.0;
        for _ in 0..trials {
            draw_gradient(&q, &[0.0; 8], 0.3, &mut rng, &mut buf).unwrap();
            total += norm_sq(&buf);
        }
        let mean = total / trials as f64;
        assert!((mean - 0.09).abs() < 0.09 * 0.03, "{mean}");
    }

    #[test]
    fn line_search_accepts_true_smoothness() {
        let q = Quadratic::new(vec![1.0], Vector::zeros(1)).unwrap();
        let (w, l_hat, _) = line_search_sgd_step(&q, &Vector::from(vec![3.0]), 1.0, &mut Rng::new(0)).unwrap();
        assert_eq!((w[0], l_hat), (0.0, 1.0));
    }

    #[test]
    fn line_search_doubles_to_four() {
        // f = 2w²: at L̂ = 1 the trial is −3w, at L̂ = 2 it is −w, both fail;
        // at L̂ = 4 the trial is 0 and the test holds with equality.
        let q = Quadratic::new(vec![4.0], Vector::zeros(1)).unwrap();
        let (w, l_hat, _) = line_search_sgd_step(&q, &Vector::from(vec![1.0]), 1.0, &mut Rng::new(0)).unwrap();
        assert_eq!((w[0], l_hat), (0.0, 4.0));
    }

    #[test]
    fn line_search_keeps_estimate_at_zero_gradient() {
        let q = Quadratic::new(vec![4.0], Vector::zeros(1)).unwrap();
        let (w, l_hat, _) = line_search_sgd_step(&q, &Vector::zeros(1), 0.125, &mut Rng::new(0)).unwrap();
        assert_eq!((w[0], l_hat), (0.0, 0.125));
    }

    #[test]
    fn line_search_gives_up_on_pathological_objective() {
        let q = Quadratic::new(vec![1e300], Vector::zeros(1)).unwrap();
        let err = line_search_sgd_step(&q, &Vector::from(vec![1e-200]), 1e-300, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::LineSearch { doublings: 64, .. }), "{err:?}");
    }
}
