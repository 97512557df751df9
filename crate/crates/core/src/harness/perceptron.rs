//! Mistake-bound check for SGD and accelerated SGD on the squared-hinge loss.

use std::fmt;
use std::thread;

use super::experiment::Constants;
use super::rates::{fit_rate, RateFit, Regime};
use super::record::{MetricRow, RunRecord};
use crate::data::generate_margin_data;
use crate::error::Result;
use crate::numerics::derive_seed;
use crate::objectives::{LossKind, Objective};
use crate::optimizers::{geometric_grid, run, AccelMode, Method, RunSettings};

/// Seeds averaged for the bound comparison.
pub const SEEDS: u64 = 10;
/// Slack on the SGD bound `8/(τ²k)` that absorbs seed variance.
pub const BOUND_SLACK: f64 = 10.0;
/// Step size for the SGD variant.
pub const SGD_ETA: f64 = 0.25;
pub const SGD_SLOPE_RANGE: (f64, f64) = (-1.6, -0.6);
pub const ACCEL_MAX_SLOPE: f64 = -1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronConfig {
    pub tau: f64,
    pub n: usize,
    pub d: usize,
    pub passes: usize,
    pub seed: u64,
    /// Logged rows per decade of iterations; the rate fit is on a log axis.
    pub per_decade: usize,
}

impl PerceptronConfig {
    pub fn new(tau: f64, n: usize, d: usize, passes: usize, seed: u64) -> Self {
        PerceptronConfig {
            tau,
            n,
            d,
            passes,
            seed,
            per_decade: 10,
        }
    }
}

/// First logged point at which a check failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub iteration: u64,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated at k = {}: {:e} > {:e}",
            self.check, self.iteration, self.value, self.bound
        )
    }
}

#[derive(Debug, Clone)]
pub struct PerceptronReport {
    pub config: PerceptronConfig,
    /// Seed-averaged SGD curve.
    pub sgd: RunRecord,
    /// Seed-averaged accelerated curve.
    pub accel: RunRecord,
    pub sgd_fit: Option<RateFit>,
    pub accel_fit: Option<RateFit>,
    pub violations: Vec<Violation>,
}

impl PerceptronReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let fit = |f: &Option<RateFit>| match f {
            Some(f) => format!("{:.3} (r² {:.3})", f.slope, f.r_squared),
            None => "n/a".into(),
        };
        let mut s = format!(
            "tau = {}, n = {}, d = {}, passes = {}, seeds = {SEEDS}\nSGD slope {}\naccelerated slope {}\n",
            self.config.tau,
            self.config.n,
            self.config.d,
            self.config.passes,
            fit(&self.sgd_fit),
            fit(&self.accel_fit)
        );
        if self.passed() {
            s.push_str("all checks passed\n");
        }
        for v in &self.violations {
            s.push_str(&format!("{v}\n"));
        }
        s
    }
}

/// SGD bound `8/(τ²k)` at iteration `k`.
pub fn sgd_bound(tau: f64, k: u64) -> f64 {
    8.0 / (tau * tau * k as f64)
}

/// Runs both variants from `w₀ = 0` on [`SEEDS`] unit-norm datasets with
/// margin `τ` and checks, at every logged row:
///
/// - `mistake_rate ≤ train_loss` on every individual run;
/// - the seed-averaged SGD loss is at most `10·8/(τ²k)`;
/// - the SGD curve decays like `k^p` with `p ∈ [−1.6, −0.6]`;
/// - the accelerated curve decays with `p ≤ −1.5`.
///
/// The accelerated variant uses `ρ = 1/τ` and `η = τ/λ_max(XᵀX)`.
pub fn perceptron_check(tau: f64, n: usize, d: usize, passes: usize, seed: u64) -> Result<PerceptronReport> {
    perceptron_check_with(&PerceptronConfig::new(tau, n, d, passes, seed))
}

pub fn perceptron_check_with(cfg: &PerceptronConfig) -> Result<PerceptronReport> {
    let runs: Vec<Result<(RunRecord, RunRecord)>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..SEEDS)
            .map(|s| scope.spawn(move || seed_runs(cfg, derive_seed(cfg.seed, s))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("perceptron worker panicked"))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut violations = Vec::new();
    for (sgd, accel) in &runs {
        for r in sgd.rows.iter().chain(&accel.rows) {
            if r.mistake_rate > r.train_loss {
                violations.push(Violation {
                    check: "mistake_rate ≤ train_loss",
                    iteration: r.iteration,
                    value: r.mistake_rate,
                    bound: r.train_loss,
                });
                break;
            }
        }
    }
    let sgd = average(runs.iter().map(|r| &r.0), "SGD");
    let accel = average(runs.iter().map(|r| &r.1), "Acc-SGD");
    if let Some(r) = sgd
        .rows
        .iter()
        .find(|r| r.iteration > 0 && r.train_loss > BOUND_SLACK * sgd_bound(cfg.tau, r.iteration))
    {
        violations.push(Violation {
            check: "SGD loss ≤ 10·8/(τ²k)",
            iteration: r.iteration,
            value: r.train_loss,
            bound: BOUND_SLACK * sgd_bound(cfg.tau, r.iteration),
        });
    }
    let sgd_fit = fit_rate(&sgd.rows, Regime::Polynomial).ok();
    let accel_fit = fit_rate(&accel.rows, Regime::Polynomial).ok();
    let last = sgd.rows.last().map_or(0, |r| r.iteration);
    match sgd_fit {
        Some(f) if f.slope >= SGD_SLOPE_RANGE.0 && f.slope <= SGD_SLOPE_RANGE.1 => {}
        _ => violations.push(Violation {
            check: "SGD slope in [−1.6, −0.6]",
            iteration: last,
            value: sgd_fit.map_or(f64::NAN, |f| f.slope),
            bound: SGD_SLOPE_RANGE.1,
        }),
    }
    match accel_fit {
        Some(f) if f.slope <= ACCEL_MAX_SLOPE => {}
        _ => violations.push(Violation {
            check: "accelerated slope ≤ −1.5",
            iteration: last,
            value: accel_fit.map_or(f64::NAN, |f| f.slope),
            bound: ACCEL_MAX_SLOPE,
        }),
    }
    Ok(PerceptronReport {
        config: cfg.clone(),
        sgd,
        accel,
        sgd_fit,
        accel_fit,
        violations,
    })
}

fn seed_runs(cfg: &PerceptronConfig, seed: u64) -> Result<(RunRecord, RunRecord)> {
    let data = generate_margin_data(cfg.n, cfg.d, cfg.tau, seed)?;
    let obj = Objective::new(LossKind::SquaredHinge, data)?;
    let grid = geometric_grid((cfg.n * cfg.passes) as u64, cfg.per_decade);
    let sgd = RunSettings::new(Method::Sgd, SGD_ETA, cfg.passes)
        .with_seed(derive_seed(seed, 1))
        .with_log_at(grid.clone());
    let gram_l = Constants::of(&obj, None)?.gram_l;
    let accel = RunSettings::new(Method::Accel, cfg.tau / gram_l, cfg.passes)
        .with_rho(1.0 / cfg.tau)
        .with_mode(AccelMode::Convex)
        .with_seed(derive_seed(seed, 2))
        .with_log_at(grid);
    Ok((run(&obj, &sgd)?, run(&obj, &accel)?))
}

/// Row-wise mean of runs that share their logging grid.
fn average<'a>(runs: impl Iterator<Item = &'a RunRecord>, label: &str) -> RunRecord {
    let runs: Vec<&RunRecord> = runs.collect();
    let mut rec = RunRecord::new(label);
    let m = runs.len() as f64;
    for (i, first) in runs[0].rows.iter().enumerate() {
        let mean = |f: fn(&MetricRow) -> f64| runs.iter().map(|r| f(&r.rows[i])).sum::<f64>() / m;
        rec.rows.push(MetricRow::new(
            first.pass,
            first.iteration,
            mean(|r| r.train_loss),
            mean(|r| r.grad_sq_norm),
            mean(|r| r.mistake_rate),
            0,
        ));
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formula() {
        assert!((sgd_bound(0.1, 8) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn first_row_is_one_and_mistakes_stay_below_loss() {
        let r = perceptron_check_with(&PerceptronConfig {
            per_decade: 2,
            ..PerceptronConfig::new(0.2, 60, 5, 3, 1)
        })
        .unwrap();
        assert_eq!(r.sgd.rows[0].train_loss, 1.0);
        assert_eq!(r.accel.rows[0].train_loss, 1.0);
        assert!(r.violations.iter().all(|v| v.check != "mistake_rate ≤ train_loss"));
        // k = 0 plus 1, 3, 10, 32, 100 and the final 180
        assert_eq!(r.sgd.rows.len(), 7);
    }
}
