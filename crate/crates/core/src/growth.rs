//! Growth constants ρ: analytic values, pointwise ratios, sampled audits and
//! the step-size grid search.

use std::fmt;
use std::thread;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, norm_sq, Rng, Vector};
use crate::objectives::{Dataset, FiniteSum};
use crate::optimizers::{run, AccelMode, Method, RunSettings, Sgd, SgdConfig};

/// Full gradients with squared norm at or below this are treated as zero.
pub const VANISHING_GRAD: f64 = 1e-12;

/// Loss growth beyond this multiple of the initial loss marks a run unstable.
pub const STABILITY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GrowthRoute {
    WgcAnalytic,
    SgcMargin,
    EmpiricalRatio,
    GridSearch,
}

impl fmt::Display for GrowthRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthRoute::WgcAnalytic => "wgc_analytic",
            GrowthRoute::SgcMargin => "sgc_margin",
            GrowthRoute::EmpiricalRatio => "empirical_ratio",
            GrowthRoute::GridSearch => "grid_search",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEstimate {
    pub rho: f64,
    pub route: GrowthRoute,
    pub detail: String,
}

/// `ρ = L_max / L`.
pub fn rho_wgc<F: FiniteSum + ?Sized>(obj: &F) -> Result<GrowthEstimate> {
    let s = obj.smoothness().ok_or(Error::NonSmooth("objective"))?;
    let rho = s.l_max / s.l;
    // L ≤ L_max holds exactly; allow only rounding slack from the power iteration.
    if !(rho >= 1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!("L_max/L = {rho} is below 1")));
    }
    Ok(GrowthEstimate {
        rho: rho.max(1.0),
        route: GrowthRoute::WgcAnalytic,
        detail: format!("L_max = {}, L = {}", s.l_max, s.l),
    })
}

/// `ρ = c / τ²` for uniform sampling over a support of size `c`.
pub fn rho_sgc_margin(data: &Dataset) -> Result<GrowthEstimate> {
    let tau = data.margin().ok_or(Error::MissingCertificate("margin τ"))?;
    let c = data.support_size().ok_or(Error::MissingCertificate("support size c"))?;
    Ok(GrowthEstimate {
        rho: c as f64 / (tau * tau),
        route: GrowthRoute::SgcMargin,
        detail: format!("c = {c}, tau = {tau}"),
    })
}

/// `(1/n) Σ_i ‖∇f_i(w)‖²`.
pub fn mean_example_grad_sq<F: FiniteSum + ?Sized>(obj: &F, w: &[f64]) -> f64 {
    let n = obj.num_examples();
    let mut g = vec![0.0; obj.dim()];
    let mut total = 0.0;
    for i in 0..n {
        obj.example_grad_into(w, i, &mut g);
        total += norm_sq(&g);
    }
    total / n as f64
}

/// `E_i‖∇f_i(w)‖² / ‖∇f(w)‖²`.
pub fn empirical_sgc_ratio<F: FiniteSum + ?Sized>(obj: &F, w: &[f64]) -> Result<f64> {
    if w.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: w.len(),
        });
    }
    let full = norm_sq(&obj.full_grad(w));
    if full <= VANISHING_GRAD {
        return Err(Error::VanishingGradient(full));
    }
    Ok(mean_example_grad_sq(obj, w) / full)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    /// Half-width of the sampling box around `center`.
    pub radius: f64,
    pub center: Option<Vector>,
    /// SGD step for the trajectory half; `1/L_max` when absent.
    pub eta: Option<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            radius: 1.0,
            center: None,
            eta: None,
        }
    }
}

impl AuditConfig {
    /// Box radius `1/τ`, the scale of the certified separator.
    pub fn for_margin(tau: f64) -> Self {
        AuditConfig {
            radius: 1.0 / tau,
            ..Default::default()
        }
    }
}

/// Largest pointwise ratio over `sample_count` points with the default audit
/// configuration.
pub fn audit_sgc<F: FiniteSum + ?Sized>(obj: &F, sample_count: usize, rng: &mut Rng) -> Result<GrowthEstimate> {
    audit_sgc_with(obj, sample_count, &AuditConfig::default(), rng)
}

/// Half the points are uniform in the box, half are consecutive iterates of
/// SGD started at the box center. Points with a vanishing full gradient are
/// skipped.
pub fn audit_sgc_with<F: FiniteSum + ?Sized>(
    obj: &F,
    sample_count: usize,
    cfg: &AuditConfig,
    rng: &mut Rng,
) -> Result<GrowthEstimate> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be ≥ 1".into()));
    }
    let d = obj.dim();
    let center = cfg.center.clone().unwrap_or_else(|| Vector::zeros(d));
    let box_points = sample_count / 2;
    let mut best = f64::NEG_INFINITY;
    let mut used = 0usize;
    let mut consider = |w: &[f64]| {
        if let Ok(r) = empirical_sgc_ratio(obj, w) {
            best = best.max(r);
            used += 1;
        }
    };
    for _ in 0..box_points {
        let w: Vec<f64> = center
            .iter()
            .map(|c| c + cfg.radius * (2.0 * rng.uniform() - 1.0))
            .collect();
        consider(&w);
    }
    let eta = match cfg.eta {
        Some(eta) => eta,
        None => 1.0 / obj.smoothness().ok_or(Error::NonSmooth("objective"))?.l_max,
    };
    let mut sgd = Sgd::new(center, &SgdConfig::new(eta))?;
    consider(sgd.iterate());
    for _ in 1..sample_count - box_points {
        sgd.step(obj, rng)?;
        consider(sgd.iterate());
    }
    if used == 0 {
        return Err(Error::AllInterpolating);
    }
    Ok(GrowthEstimate {
        rho: best,
        route: GrowthRoute::EmpiricalRatio,
        detail: format!("max over {used} of {sample_count} points, box radius {}", cfg.radius),
    })
}

/// Outcome of one grid-search candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub rho: f64,
    pub final_loss: f64,
    pub stable: bool,
}

/// Accelerated convex runs with `η = 1/(ρL)`, one per candidate, run
/// concurrently. Returns the stable candidate with the lowest final loss.
///
/// The schedule itself uses `max(ρ, 1)`; candidates below one only enlarge
/// the step.
pub fn grid_search_rho<F: FiniteSum + ?Sized>(
    obj: &F,
    candidates: &[f64],
    passes: usize,
    seed: u64,
) -> Result<GrowthEstimate> {
    let l = obj.smoothness().ok_or(Error::NonSmooth("objective"))?.l;
    grid_search_rho_with(obj, candidates, passes, l, seed)
}

/// [`grid_search_rho`] with the step computed from a caller-supplied `L`.
pub fn grid_search_rho_with<F: FiniteSum + ?Sized>(
    obj: &F,
    candidates: &[f64],
    passes: usize,
    l: f64,
    seed: u64,
) -> Result<GrowthEstimate> {
    let points = grid_search_points(obj, candidates, passes, l, seed)?;
    let best = points
        .iter()
        .filter(|p| p.stable)
        .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss));
    match best {
        Some(p) => Ok(GrowthEstimate {
            rho: p.rho,
            route: GrowthRoute::GridSearch,
            detail: format!(
                "final losses: {}",
                points
                    .iter()
                    .map(|p| format!("{}={:e}", p.rho, p.final_loss))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }),
        None => Err(Error::AllDiverged(
            points.iter().map(|p| (p.rho, p.final_loss)).collect(),
        )),
    }
}

pub fn grid_search_points<F: FiniteSum + ?Sized>(
    obj: &F,
    candidates: &[f64],
    passes: usize,
    l: f64,
    seed: u64,
) -> Result<Vec<GridPoint>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    if let Some(bad) = candidates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "candidate ρ must be positive, got {bad}"
        )));
    }
    thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .iter()
            .enumerate()
            .map(|(i, &rho)| {
                scope.spawn(move || {
                    let settings = RunSettings::new(Method::Accel, 1.0 / (rho * l), passes)
                        .with_rho(rho.max(1.0))
                        .with_mode(AccelMode::Convex)
                        .with_seed(derive_seed(seed, i as u64));
                    match run(obj, &settings) {
                        Ok(rec) => {
                            let initial = rec.initial_loss().unwrap_or(f64::INFINITY);
                            let final_loss = rec.final_loss().unwrap_or(f64::INFINITY);
                            GridPoint {
                                rho,
                                final_loss,
                                stable: final_loss.is_finite() && rec.max_loss() <= STABILITY_FACTOR * initial,
                            }
                        }
                        Err(_) => GridPoint {
                            rho,
                            final_loss: f64::INFINITY,
                            stable: false,
                        },
                    }
                })
            })
            .collect();
        Ok(handles
            .into_iter()
            .map(|h| h.join().expect("grid search worker panicked"))
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_margin_data;
    use crate::numerics::Matrix;
    use crate::objectives::testfns::Quadratic;
    use crate::objectives::{LossKind, Objective};

    fn toy() -> Dataset {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.6, 0.8], vec![-0.8, 0.6], vec![0.0, -1.0]]).unwrap();
        Dataset::new(x, vec![1.0, 1.0, -1.0, -1.0]).unwrap()
    }

    #[test]
    fn wgc_unit_rows_single_direction() {
        // Every row is ±e_1, so XᵀX/n = e_1e_1ᵀ and L = L_max.
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let data = Dataset::new(x, vec![1.0, -1.0]).unwrap();
        let obj = Objective::new(LossKind::SquaredHinge, data).unwrap();
        let est = rho_wgc(&obj).unwrap();
        assert!((est.rho - 1.0).abs() < 1e-12);
        assert_eq!(est.route, GrowthRoute::WgcAnalytic);
    }

    #[test]
    fn wgc_matches_brute_force_on_toy() {
        let obj = Objective::new(LossKind::SquaredHinge, toy()).unwrap();
        // Gram/n = [[0.5, 0], [0, 0.5]] + off-diagonal (0.48 − 0.48)/4 = 0.
        let g = obj.data().features().gram();
        let (a, b, c) = (g.get(0, 0) / 4.0, g.get(0, 1) / 4.0, g.get(1, 1) / 4.0);
        let lam = 0.5 * (a + c) + (0.25 * (a - c).powi(2) + b * b).sqrt();
        let est = rho_wgc(&obj).unwrap();
        assert!((est.rho - 2.0 / (2.0 * lam)).abs() < 1e-9);
    }

    #[test]
    fn wgc_rejects_hinge() {
        assert!(Objective::new(LossKind::Hinge, toy())
            .map(|o| rho_wgc(&o))
            .unwrap()
            .is_err());
    }

    #[test]
    fn generator_wgc_constant() {
        let data = generate_margin_data(200, 20, 0.1, 0).unwrap();
        let obj = Objective::new(LossKind::SquaredHinge, data).unwrap();
        let s = obj.smoothness().unwrap();
        assert!((s.l_max - 2.0).abs() < 1e-12);
        assert!((rho_wgc(&obj).unwrap().rho - 2.0 / s.l).abs() < 1e-9);
    }

    #[test]
    fn sgc_margin_formula() {
        let data = toy();
        let cases = [(1.0, 1, 1.0), (0.5, 4, 16.0), (0.1, 8000, 8e5)];
        for (tau, c, rho) in cases {
            let (x, y, ..) = data.clone().into_parts();
            let d = Dataset::from_parts_unchecked(x, y, Some(tau), None, Some(c));
            let est = rho_sgc_margin(&d).unwrap();
            assert!((est.rho - rho).abs() <= 1e-9 * rho);
        }
        assert!(matches!(rho_sgc_margin(&data), Err(Error::MissingCertificate(_))));
    }

    #[test]
    fn ratio_single_example_is_one() {
        let q = Quadratic::new(vec![1.0, 3.0], Vector::from(vec![1.0, 2.0])).unwrap();
        assert_eq!(empirical_sgc_ratio(&q, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn ratio_two_points_by_hand() {
        // Squared loss with x_1 = 1, y_1 = 1 and x_2 = −1, y_2 = 1 at w = 2:
        // residuals 1 and −3, gradients 1·1 = 1 and −3·(−1) = 3.
        // Mean squared norm (1 + 9)/2 = 5; full gradient 2, squared 4.
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let data = Dataset::new(x, vec![1.0, 1.0]).unwrap();
        let obj = Objective::new(LossKind::Squared, data).unwrap();
        assert!((empirical_sgc_ratio(&obj, &[2.0]).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn ratio_at_interpolation_is_an_error() {
        let q = Quadratic::new(vec![1.0], Vector::from(vec![1.0])).unwrap();
        assert!(matches!(
            empirical_sgc_ratio(&q, &[1.0]),
            Err(Error::VanishingGradient(_))
        ));
    }

    #[test]
    fn audit_single_example_is_one() {
        let q = Quadratic::new(vec![1.0, 2.0], Vector::from(vec![1.0, 1.0])).unwrap();
        let est = audit_sgc(&q, 50, &mut Rng::new(0)).unwrap();
        assert_eq!(est.rho, 1.0);
        assert_eq!(est.route, GrowthRoute::EmpiricalRatio);
    }

    #[test]
    fn audit_below_margin_constant_and_seeded() {
        let data = generate_margin_data(40, 5, 0.2, 1).unwrap();
        let bound = rho_sgc_margin(&data).unwrap().rho;
        let obj = Objective::new(LossKind::SquaredHinge, data).unwrap();
        let cfg = AuditConfig::for_margin(0.2);
        let a = audit_sgc_with(&obj, 400, &cfg, &mut Rng::new(3)).unwrap();
        let b = audit_sgc_with(&obj, 400, &cfg, &mut Rng::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.rho >= 1.0 - 1e-12 && a.rho <= bound, "{} vs {bound}", a.rho);
    }

    #[test]
    fn audit_all_interpolating_errors() {
        let q = Quadratic::new(vec![1.0], Vector::from(vec![0.0])).unwrap();
        let cfg = AuditConfig {
            radius: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            audit_sgc_with(&q, 10, &cfg, &mut Rng::new(0)),
            Err(Error::AllInterpolating)
        ));
    }

    #[test]
    fn grid_single_candidate() {
        let data = generate_margin_data(50, 5, 0.2, 2).unwrap();
        let obj = Objective::new(LossKind::SquaredHinge, data).unwrap();
        let est = grid_search_rho(&obj, &[3.0], 3, 0).unwrap();
        assert_eq!(est.rho, 3.0);
        assert_eq!(est.route, GrowthRoute::GridSearch);
    }

    #[test]
    fn grid_picks_best_stable_candidate() {
        // n = 1 quadratic: true ρ = 1.
        let q = Quadratic::new(vec![1.0, 0.5], Vector::from(vec![1.0, -1.0])).unwrap();
        let cands = [0.5, 1.0, 2.0];
        let points = grid_search_points(&q, &cands, 40, 1.0, 7).unwrap();
        let est = grid_search_rho(&q, &cands, 40, 7).unwrap();
        let best = points
            .iter()
            .filter(|p| p.stable)
            .map(|p| p.final_loss)
            .fold(f64::INFINITY, f64::min);
        let chosen = points.iter().find(|p| p.rho == est.rho).unwrap();
        assert!(chosen.stable);
        assert!(chosen.final_loss <= 2.0 * best);
        assert_eq!(est, grid_search_rho(&q, &cands, 40, 7).unwrap());
    }

    #[test]
    fn grid_all_diverged() {
        // η = 1/(ρL) with ρ = 0.01 is a hundred times the stable step.
        let q = Quadratic::new(vec![1.0], Vector::from(vec![1.0])).unwrap();
        match grid_search_rho(&q, &[0.01, 0.005], 20, 0) {
            Err(Error::AllDiverged(losses)) => assert_eq!(losses.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(grid_search_rho(&q, &[], 5, 0).is_err());
    }
}
