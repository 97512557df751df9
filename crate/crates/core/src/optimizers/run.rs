use std::time::Instant;

use super::{AccelMode, AccelSchedule, AccelState, Sgd, SgdConfig};
use crate::error::{Error, Result};
use crate::harness::record::{MetricRow, RunRecord};
use crate::numerics::{norm_sq, Rng, Vector};
use crate::objectives::FiniteSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sgd,
    Accel,
    SgdLs,
    AccelLs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Accel => "accel",
            Method::SgdLs => "sgd_ls",
            Method::AccelLs => "accel_ls",
        }
    }

    pub fn is_accelerated(self) -> bool {
        matches!(self, Method::Accel | Method::AccelLs)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sgd" => Ok(Method::Sgd),
            "accel" => Ok(Method::Accel),
            "sgd_ls" => Ok(Method::SgdLs),
            "accel_ls" => Ok(Method::AccelLs),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Everything a single optimizer run needs besides the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub method: Method,
    /// Step size for `sgd` and `accel`.
    pub eta: f64,
    /// Growth constant for `accel`.
    pub rho: f64,
    pub mode: AccelMode,
    pub sigma: f64,
    pub seed: u64,
    pub averaging: bool,
    pub passes: usize,
    /// Log every this many iterations; defaults to once per pass.
    pub log_every: Option<usize>,
    /// Explicit iterations to log instead of the regular grid.
    pub log_at: Option<Vec<u64>>,
    /// Fill `elapsed_ms`; off by default so output bytes depend only on the seed.
    pub record_time: bool,
    /// Starting point; zero when absent.
    pub w0: Option<Vector>,
    /// Initial `L̂` (or `ρL̂`) for the line-search methods.
    pub ls_init: f64,
    /// Smoothness used to split `ρL̂` into `ρ` and `η`; the objective's `L`
    /// when absent.
    pub ls_reference_l: Option<f64>,
}

impl RunSettings {
    pub fn new(method: Method, eta: f64, passes: usize) -> Self {
        RunSettings {
            method,
            eta,
            rho: 1.0,
            mode: AccelMode::Convex,
            sigma: 0.0,
            seed: 0,
            averaging: false,
            passes,
            log_every: None,
            log_at: None,
            record_time: false,
            w0: None,
            ls_init: 1.0,
            ls_reference_l: None,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_mode(mut self, mode: AccelMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_averaging(mut self, averaging: bool) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_log_every(mut self, every: usize) -> Self {
        self.log_every = Some(every);
        self
    }

    pub fn with_log_at(mut self, iterations: Vec<u64>) -> Self {
        self.log_at = Some(iterations);
        self
    }

    pub fn with_w0(mut self, w0: Vector) -> Self {
        self.w0 = Some(w0);
        self
    }
}

enum Engine {
    Sgd(Sgd),
    SgdLs(Sgd, f64),
    Accel(AccelState),
    AccelLs(AccelState, f64, f64),
}

impl Engine {
    fn reported(&self) -> &Vector {
        match self {
            Engine::Sgd(s) | Engine::SgdLs(s, _) => s.reported(),
            Engine::Accel(a) | Engine::AccelLs(a, ..) => a.reported(),
        }
    }

    fn step<F: FiniteSum + ?Sized>(&mut self, obj: &F, sigma: f64, rng: &mut Rng) -> Result<()> {
        match self {
            Engine::Sgd(s) => s.step(obj, rng).map(drop),
            Engine::SgdLs(s, l_hat) => s.line_search_step(obj, l_hat, rng).map(drop),
            Engine::Accel(a) => a.step(obj, sigma, rng).map(drop),
            Engine::AccelLs(a, l, est) => a.line_search_step(obj, *l, est, rng).map(drop),
        }
    }
}

/// Runs `passes · n` stochastic steps, logging full-objective metrics at
/// iteration 0, every `log_every` iterations, and at the end.
///
/// One effective pass is `n` single-example steps. With averaging enabled the
/// metrics are taken at the running mean of the iterates.
pub fn run<F: FiniteSum + ?Sized>(obj: &F, settings: &RunSettings) -> Result<RunRecord> {
    let n = obj.num_examples();
    if settings.passes == 0 {
        return Err(Error::InvalidArgument("passes must be ≥ 1".into()));
    }
    let w0 = match &settings.w0 {
        Some(w) if w.dim() != obj.dim() => {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                found: w.dim(),
            })
        }
        Some(w) => w.clone(),
        None => Vector::zeros(obj.dim()),
    };
    let sgd_cfg = SgdConfig::new(settings.eta)
        .with_sigma(settings.sigma)
        .with_seed(settings.seed)
        .with_averaging(settings.averaging);
    let mut engine = match settings.method {
        Method::Sgd => Engine::Sgd(Sgd::new(w0, &sgd_cfg)?),
        Method::SgdLs => Engine::SgdLs(Sgd::new(w0, &sgd_cfg)?, settings.ls_init),
        Method::Accel => {
            let schedule = AccelSchedule::new(settings.mode, settings.rho, settings.eta)?;
            Engine::Accel(accel_state(w0, schedule, settings.averaging))
        }
        Method::AccelLs => {
            let l = match settings.ls_reference_l {
                Some(l) => l,
                None => obj.smoothness().ok_or(Error::NonSmooth("objective"))?.l,
            };
            let rho = (settings.ls_init / l).max(1.0);
            let schedule = AccelSchedule::new(settings.mode, rho, 1.0 / settings.ls_init)?;
            Engine::AccelLs(accel_state(w0, schedule, settings.averaging), l, settings.ls_init)
        }
    };

    let mut record = RunRecord::new(settings.method.name());
    record.echo("method", settings.method.name());
    record.echo("eta", settings.eta);
    if settings.method.is_accelerated() {
        record.echo("rho", settings.rho);
        record.echo("mode", format!("{:?}", settings.mode));
    }
    record.echo("sigma", settings.sigma);
    record.echo("seed", settings.seed);
    record.echo("averaging", settings.averaging);
    record.echo("passes", settings.passes);

    let start = Instant::now();
    let elapsed = |start: &Instant| {
        if settings.record_time {
            start.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let mut grad = vec![0.0; obj.dim()];
    let mut log = |iteration: u64, w: &Vector, record: &mut RunRecord| {
        let loss = obj.full_loss(w);
        obj.full_grad_into(w, &mut grad);
        record.rows.push(MetricRow::new(
            iteration / n as u64,
            iteration,
            loss,
            norm_sq(&grad),
            obj.mistake_rate(w).unwrap_or(0.0),
            elapsed(&start),
        ));
    };

    let mut rng = Rng::new(settings.seed);
    let total = (settings.passes * n) as u64;
    let every = settings.log_every.unwrap_or(n).max(1) as u64;
    let mut marks = settings.log_at.as_deref().unwrap_or(&[]).iter().copied().peekable();
    let mut due = |it: u64| match settings.log_at {
        Some(_) => {
            let mut hit = false;
            while marks.next_if(|m| *m <= it).is_some() {
                hit = true;
            }
            hit
        }
        None => it % every == 0,
    };
    log(0, engine.reported(), &mut record);
    for it in 1..=total {
        engine
            .step(obj, settings.sigma, &mut rng)
            .map_err(|e| e.context(format!("{} pass {}", settings.method.name(), (it - 1) / n as u64)))?;
        if due(it) || it == total {
            log(it, engine.reported(), &mut record);
        }
    }
    Ok(record)
}

/// Roughly `per_decade` log-spaced iterations in `1..=total`, deduplicated.
pub fn geometric_grid(total: u64, per_decade: usize) -> Vec<u64> {
    let factor = 10f64.powf(1.0 / per_decade.max(1) as f64);
    let mut out = Vec::new();
    let mut x = 1.0f64;
    while x.round() as u64 <= total {
        let k = x.round() as u64;
        if out.last() != Some(&k) {
            out.push(k);
        }
        x *= factor;
    }
    out
}

fn accel_state(w0: Vector, schedule: AccelSchedule, averaging: bool) -> AccelState {
    let st = AccelState::new(w0, schedule);
    if averaging {
        st.with_averaging()
    } else {
        st
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::objectives::testfns::Quadratic;
    use crate::objectives::{Dataset, LossKind, Objective};

    fn small_problem() -> Objective {
        let mut rng = Rng::new(2);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| rng.unit_sphere(3).into_inner()).collect();
        let y = rows.iter().map(|r| if r[0] >= 0.0 { 1.0 } else { -1.0 }).collect();
        Objective::new(
            LossKind::SquaredHinge,
            Dataset::new(Matrix::from_rows(&rows).unwrap(), y).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn one_pass_is_n_steps_with_two_rows() {
        let obj = small_problem();
        let rec = run(&obj, &RunSettings::new(Method::Sgd, 0.5, 1)).unwrap();
        assert_eq!(rec.rows.len(), 2);
        assert_eq!(rec.rows[0].iteration, 0);
        assert_eq!(rec.rows[1].iteration, 10);
        assert_eq!(rec.rows[1].pass, 1);
        assert_eq!(rec.rows[0].train_loss, 1.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let obj = small_problem();
        for method in [Method::Sgd, Method::Accel, Method::SgdLs, Method::AccelLs] {
            let s = RunSettings::new(method, 0.25, 5).with_seed(9).with_rho(2.0);
            let a = run(&obj, &s).unwrap();
            let b = run(&obj, &s).unwrap();
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }

    #[test]
    fn every_method_fixes_the_minimizer() {
        let q = Quadratic::new(vec![1.0, 2.0], Vector::from(vec![3.0, -1.0])).unwrap();
        for method in [Method::Sgd, Method::Accel, Method::SgdLs, Method::AccelLs] {
            let s = RunSettings::new(method, 0.5, 20).with_w0(q.minimizer().clone());
            let rec = run(&q, &s).unwrap();
            assert!(rec.rows.iter().all(|r| r.train_loss == 0.0), "{method:?}");
        }
    }

    #[test]
    fn step_errors_carry_pass_index() {
        let q = Quadratic::new(vec![1.0], Vector::zeros(1)).unwrap();
        // η = 3 on curvature 1 diverges geometrically (factor −2 per step).
        let err = run(
            &q,
            &RunSettings::new(Method::Sgd, 3.0, 5000).with_w0(Vector::from(vec![1.0])),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("sgd pass "), "{msg}");
    }

    #[test]
    fn explicit_log_points() {
        let obj = small_problem();
        let s = RunSettings::new(Method::Sgd, 0.5, 3).with_log_at(vec![1, 5, 5, 12, 100]);
        let its: Vec<u64> = run(&obj, &s).unwrap().rows.iter().map(|r| r.iteration).collect();
        assert_eq!(its, [0, 1, 5, 12, 30]);
    }

    #[test]
    fn geometric_grid_spacing() {
        assert_eq!(geometric_grid(100, 1), [1, 10, 100]);
        let g = geometric_grid(1_000_000, 10);
        assert_eq!(g.len(), 58);
        assert_eq!(g[..8], [1, 2, 3, 4, 5, 6, 8, 10]);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_passes_rejected() {
        let q = Quadratic::new(vec![1.0], Vector::zeros(1)).unwrap();
        assert!(run(&q, &RunSettings::new(Method::Sgd, 1.0, 0)).is_err());
    }
}
