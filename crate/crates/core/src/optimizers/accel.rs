//! Three-sequence accelerated SGD.
//!
//! Per iteration k, with one stochastic gradient `g = ∇f(ζ_k, z_k)`:
//!
//! ```text
//! ζ_k     = α_k v_k + (1 − α_k) w_k
//! w_{k+1} = ζ_k − η g
//! v_{k+1} = β_k v_k + (1 − β_k) ζ_k − γ_k η g
//! ```
//!
//! Convex schedule: `γ_k = (1/ρ + √(1/ρ² + 4γ_{k−1}²)) / 2` with `γ_{−1} = 0`,
//! `β_k = 1`, `a_k = γ_{k−1}√(ηρ)`, `b_k = 1`. The first iteration therefore
//! uses `γ_0 = 1/ρ` and `α_0 = 1`.
//!
//! Strongly convex schedule: `γ = 1/√(μηρ)`, `β = 1 − √(μη/ρ)`, constant in k.
//! The sequences `a_k`, `b_k` grow geometrically, so only the ratio
//! `a_k² / b_{k+1}² = γ²ηρβ` is kept and `α` is formed from it.

use super::{draw_gradient, StepReport, Workspace, MAX_DOUBLINGS};
use crate::error::{Error, Result};
use crate::numerics::{norm_sq, Rng, Vector};
use crate::objectives::FiniteSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccelMode {
    Convex,
    StronglyConvex { mu: f64 },
}

impl AccelMode {
    fn mu(self) -> f64 {
        match self {
            AccelMode::Convex => 0.0,
            AccelMode::StronglyConvex { mu } => mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccelSchedule {
    mode: AccelMode,
    rho: f64,
    eta: f64,
    gamma_prev: f64,
    gamma: f64,
    alpha: f64,
    beta: f64,
    ab_ratio: f64,
    k: u64,
}

impl AccelSchedule {
    /// A schedule that has not been advanced yet. Call [`advance`] to obtain
    /// the parameters of iteration 0.
    ///
    /// [`advance`]: AccelSchedule::advance
    pub fn new(mode: AccelMode, rho: f64, eta: f64) -> Result<Self> {
        validate(mode, rho, eta)?;
        // The strongly convex schedule is stationary, so γ_{−1} = γ.
        let gamma = match mode {
            AccelMode::Convex => 0.0,
            AccelMode::StronglyConvex { mu } => 1.0 / (mu * eta * rho).sqrt(),
        };
        Ok(AccelSchedule {
            mode,
            rho,
            eta,
            gamma_prev: gamma,
            gamma,
            alpha: 1.0,
            beta: 1.0,
            ab_ratio: 0.0,
            k: 0,
        })
    }

    /// Parameters for the next iteration; the counter moves forward by one.
    pub fn advance(&self) -> Result<Self> {
        validate(self.mode, self.rho, self.eta)?;
        let (rho, eta) = (self.rho, self.eta);
        let gamma_prev = self.gamma;
        let (gamma, beta, ab_ratio) = match self.mode {
            AccelMode::Convex => {
                let inv = 1.0 / rho;
                let gamma = 0.5 * (inv + (inv * inv + 4.0 * gamma_prev * gamma_prev).sqrt());
                // a_k² with a_k = γ_{k−1}√(ηρ); b ≡ 1.
                (gamma, 1.0, gamma_prev * gamma_prev * eta * rho)
            }
            AccelMode::StronglyConvex { mu } => {
                let gamma = 1.0 / (mu * eta * rho).sqrt();
                let beta = 1.0 - (mu * eta / rho).sqrt();
                (gamma, beta, gamma * gamma * eta * rho * beta)
            }
        };
        let num = gamma * beta * eta;
        let alpha = if num + ab_ratio > 0.0 {
            num / (num + ab_ratio)
        } else {
            // β = 0: both terms vanish; take the β → 0 limit 1/(1 + γρ).
            1.0 / (1.0 + gamma * rho)
        };
        Ok(AccelSchedule {
            gamma_prev,
            gamma,
            alpha,
            beta,
            ab_ratio,
            k: self.k + 1,
            ..*self
        })
    }

    /// Same γ history under a new `(ρ, η)`; used by the line search.
    pub fn reparameterized(&self, rho: f64, eta: f64) -> Result<Self> {
        validate(self.mode, rho, eta)?;
        let mut next = self.clone();
        next.rho = rho;
        next.eta = eta;
        if let AccelMode::StronglyConvex { mu } = self.mode {
            let gamma = 1.0 / (mu * eta * rho).sqrt();
            next.gamma = gamma;
            next.gamma_prev = gamma;
        }
        Ok(next)
    }

    /// `(γ_k² − γ_k[1/ρ − μηγ_{k−1}²] − γ_{k−1}²) / max(γ_k², 1)`.
    pub fn gamma_residual(&self) -> f64 {
        let (g, gp) = (self.gamma, self.gamma_prev);
        let mu = self.mode.mu();
        let r = g * g - g * (1.0 / self.rho - mu * self.eta * gp * gp) - gp * gp;
        r / (g * g).max(1.0)
    }

    pub fn mode(&self) -> AccelMode {
        self.mode
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_prev(&self) -> f64 {
        self.gamma_prev
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `a_k² / b_{k+1}²`.
    pub fn ab_ratio(&self) -> f64 {
        self.ab_ratio
    }

    /// Number of times the schedule has been advanced; the current parameters
    /// belong to iteration `advances() − 1`.
    pub fn advances(&self) -> u64 {
        self.k
    }
}

fn validate(mode: AccelMode, rho: f64, eta: f64) -> Result<()> {
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::InvalidSchedule(format!("rho must be ≥ 1, got {rho}")));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidSchedule(format!("step size must be positive, got {eta}")));
    }
    if let AccelMode::StronglyConvex { mu } = mode {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidSchedule(format!("mu must be positive, got {mu}")));
        }
        if mu * eta / rho > 1.0 {
            return Err(Error::InvalidSchedule(format!(
                "mu * eta / rho = {} exceeds 1",
                mu * eta / rho
            )));
        }
    }
    Ok(())
}

/// Iterate `w`, extrapolation point `ζ` and estimate-sequence point `v`.
#[derive(Debug, Clone)]
pub struct AccelState {
    w: Vector,
    zeta: Vector,
    v: Vector,
    schedule: AccelSchedule,
    avg: Option<Vector>,
    ws: Workspace,
}

impl AccelState {
    pub fn new(w0: Vector, schedule: AccelSchedule) -> Self {
        let dim = w0.dim();
        AccelState {
            zeta: w0.clone(),
            v: w0.clone(),
            w: w0,
            schedule,
            avg: None,
            ws: Workspace::new(dim),
        }
    }

    /// Also maintain the running mean of the `w` iterates.
    pub fn with_averaging(mut self) -> Self {
        self.avg = Some(self.w.clone());
        self
    }

    pub fn w(&self) -> &Vector {
        &self.w
    }

    /// The extrapolation point used by the most recent step.
    pub fn zeta(&self) -> &Vector {
        &self.zeta
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    pub fn schedule(&self) -> &AccelSchedule {
        &self.schedule
    }

    pub fn reported(&self) -> &Vector {
        self.avg.as_ref().unwrap_or(&self.w)
    }

    /// Advances the schedule, then applies one accelerated step.
    pub fn step<F: FiniteSum + ?Sized>(&mut self, obj: &F, sigma: f64, rng: &mut Rng) -> Result<StepReport> {
        let schedule = self.schedule.advance()?;
        self.mix(schedule.alpha);
        let (index, loss) = draw_gradient(obj, &self.zeta, sigma, rng, &mut self.ws.grad)?;
        self.apply(schedule);
        Ok(self.last_report(index, loss))
    }

    /// Accelerated step whose `ρL` comes from the sampled-example line search.
    ///
    /// For each candidate `ρL̂` the schedule for this iteration is rebuilt with
    /// `η = 1/ρL̂` and `ρ = max(ρL̂ / L, 1)`, `ζ` is recomputed, and the
    /// sufficient-decrease test is run on the sampled example at `ζ`.
    pub fn line_search_step<F: FiniteSum + ?Sized>(
        &mut self,
        obj: &F,
        l: f64,
        rho_l_hat: &mut f64,
        rng: &mut Rng,
    ) -> Result<StepReport> {
        if !(*rho_l_hat > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ρL estimate must be positive, got {rho_l_hat}"
            )));
        }
        if !(l > 0.0) {
            return Err(Error::InvalidArgument(format!("smoothness must be positive, got {l}")));
        }
        let index = rng.index(obj.num_examples());
        let mut doublings = 0;
        loop {
            let eta = 1.0 / *rho_l_hat;
            let rho = (*rho_l_hat / l).max(1.0);
            // An infeasible strongly convex pairing counts as a failed test.
            if let Ok(schedule) = self.schedule.reparameterized(rho, eta).and_then(|s| s.advance()) {
                self.mix(schedule.alpha);
                obj.example_grad_into(&self.zeta, index, &mut self.ws.grad);
                if self.ws.grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteGradient { index });
                }
                let loss = obj.example_loss(&self.zeta, index);
                let g_sq = norm_sq(&self.ws.grad);
                for ((t, z), g) in self.ws.trial.iter_mut().zip(self.zeta.iter()).zip(&self.ws.grad) {
                    *t = z - eta * g;
                }
                if obj.example_loss(&self.ws.trial, index) <= loss - 0.5 * eta * g_sq {
                    self.apply(schedule);
                    return Ok(self.last_report(index, loss));
                }
            }
            if doublings == MAX_DOUBLINGS {
                return Err(Error::LineSearch {
                    doublings,
                    estimate: *rho_l_hat,
                });
            }
            *rho_l_hat *= 2.0;
            doublings += 1;
        }
    }

    fn mix(&mut self, alpha: f64) {
        for ((z, v), w) in self.zeta.iter_mut().zip(self.v.iter()).zip(self.w.iter()) {
            *z = alpha * v + (1.0 - alpha) * w;
        }
    }

    // Consumes the gradient in the workspace.
    fn apply(&mut self, schedule: AccelSchedule) {
        let (eta, beta, gamma) = (schedule.eta, schedule.beta, schedule.gamma);
        for (((w, v), z), g) in self
            .w
            .iter_mut()
            .zip(self.v.iter_mut())
            .zip(self.zeta.iter())
            .zip(&self.ws.grad)
        {
            *w = z - eta * g;
            *v = beta * *v + (1.0 - beta) * z - gamma * eta * g;
        }
        self.schedule = schedule;
        if let Some(avg) = self.avg.as_mut() {
            let inv = 1.0 / self.schedule.k as f64;
            for (a, w) in avg.iter_mut().zip(self.w.iter()) {
                *a += (w - *a) * inv;
            }
        }
    }

    fn last_report(&self, index: usize, loss: f64) -> StepReport {
        StepReport {
            k: self.schedule.k - 1,
            index,
            loss,
            stoch_grad_sq_norm: norm_sq(&self.ws.grad),
        }
    }
}

/// One accelerated step from `st`, returning the successor state.
pub fn accel_step<F: FiniteSum + ?Sized>(
    obj: &F,
    st: &AccelState,
    sigma: f64,
    rng: &mut Rng,
) -> Result<(AccelState, StepReport)> {
    let mut next = st.clone();
    let report = next.step(obj, sigma, rng)?;
    Ok((next, report))
}

/// One line-search accelerated step; returns the successor state and the
/// (never decreased) estimate `ρL̂`. `L` is read from the objective.
pub fn line_search_accel_step<F: FiniteSum + ?Sized>(
    obj: &F,
    st: &AccelState,
    rho_l_hat: f64,
    rng: &mut Rng,
) -> Result<(AccelState, f64, StepReport)> {
    let l = obj.smoothness().ok_or(Error::NonSmooth("objective"))?.l;
    let mut next = st.clone();
    let mut estimate = rho_l_hat;
    let report = next.line_search_step(obj, l, &mut estimate, rng)?;
    Ok((next, estimate, report))
}
