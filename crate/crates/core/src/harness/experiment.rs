//! End-to-end runs: dataset, objective, constants, growth constant and one
//! record per method.

use std::path::{Path, PathBuf};
use std::thread;

use super::config::{DatasetSpec, ExperimentConfig, RhoRule, StepRule};
use super::record::RunRecord;
use crate::data::{
    generate_margin_data_with, load_libsvm, normalize_rows, rbf_features, subsample, MarginDataConfig, RbfConfig,
};
use crate::error::{Error, Result};
use crate::growth::{grid_search_rho_with, rho_sgc_margin};
use crate::numerics::{derive_seed, spectral_norm_gram};
use crate::objectives::{Dataset, FiniteSum, Objective, SPECTRAL_MAX_ITER, SPECTRAL_TOL};
use crate::optimizers::{run, AccelMode, Method, RunSettings};

/// Seed stream indices, so that data, features and runs never share draws.
const DATA_STREAM: u64 = 0;
const RBF_STREAM: u64 = 1;
const SUBSAMPLE_STREAM: u64 = 2;
const RUN_STREAM: u64 = 100;

/// Legend label for a method.
pub fn legend(method: Method) -> &'static str {
    match method {
        Method::Sgd => "SGD",
        Method::Accel => "Acc-SGD",
        Method::SgdLs => "SGD(LS)",
        Method::AccelLs => "Acc-SGD(LS)",
    }
}

/// Smoothness quantities an experiment needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub n: usize,
    pub d: usize,
    /// `λ_max(XᵀX)`, the experimental smoothness estimate used by step rules.
    pub gram_l: f64,
    /// Smoothness of the mean objective, when the loss is smooth.
    pub l: Option<f64>,
    pub l_max: Option<f64>,
    pub tau: Option<f64>,
}

impl Constants {
    pub fn of(obj: &Objective, tau: Option<f64>) -> Result<Self> {
        let data = obj.data();
        let s = obj.smoothness();
        let gram_l = match (s, obj.kind().curvature()) {
            (Some(s), Some(kappa)) => s.l * data.len() as f64 / kappa,
            _ => spectral_norm_gram(data.features(), SPECTRAL_TOL, SPECTRAL_MAX_ITER)?,
        };
        Ok(Constants {
            n: data.len(),
            d: data.dim(),
            gram_l,
            l: s.map(|s| s.l),
            l_max: s.map(|s| s.l_max),
            tau: tau.or(data.margin()),
        })
    }

    pub fn step(&self, rule: StepRule, rho: f64) -> Result<f64> {
        match rule {
            StepRule::OneOverLmax => Ok(1.0 / self.l_max.ok_or(Error::NonSmooth("objective"))?),
            StepRule::TauOverL => Ok(self.tau.ok_or(Error::MissingCertificate("margin τ"))? / self.gram_l),
            StepRule::OneOverRhoL => Ok(1.0 / (rho * self.gram_l)),
            StepRule::Explicit(eta) => Ok(eta),
        }
    }
}

/// Builds the dataset named by `spec`; `seed` drives generation, subsampling
/// and RBF centers through separate derived streams.
pub fn build_dataset(spec: &DatasetSpec, normalize: bool, seed: u64) -> Result<Dataset> {
    let data = match spec {
        DatasetSpec::Synthetic { n, d, tau, balanced } => generate_margin_data_with(&MarginDataConfig {
            balanced: *balanced,
            ..MarginDataConfig::new(*n, *d, *tau, derive_seed(seed, DATA_STREAM))
        })?,
        DatasetSpec::Libsvm {
            path,
            n_sub,
            dim,
            rbf,
            rbf_centers,
        } => {
            if !path.is_file() {
                return Err(Error::Config(format!("dataset file {} not found", path.display())));
            }
            let mut data = load_libsvm(path, *dim)?;
            if let Some(m) = n_sub {
                data = subsample(&data, (*m).min(data.len()), derive_seed(seed, SUBSAMPLE_STREAM))?;
            }
            if *rbf {
                let cfg = RbfConfig::median_heuristic(data.features(), *rbf_centers, derive_seed(seed, RBF_STREAM))?;
                let x = rbf_features(data.features(), &cfg)?;
                data = Dataset::new(x, data.labels().to_vec())?;
            }
            data
        }
    };
    if normalize {
        normalize_rows(&data)
    } else {
        Ok(data)
    }
}

pub fn build_objective(cfg: &ExperimentConfig) -> Result<Objective> {
    let data = build_dataset(&cfg.dataset, cfg.normalize, cfg.seed)?;
    let obj = Objective::new(cfg.loss, data)?;
    Ok(match cfg.mu {
        Some(mu) => obj.with_mu(mu),
        None => obj,
    })
}

/// Resolves the growth constant for the accelerated methods.
pub fn resolve_rho(cfg: &ExperimentConfig, obj: &Objective, consts: &Constants) -> Result<f64> {
    Ok(match &cfg.rho {
        RhoRule::OneOverTau => 1.0 / consts.tau.ok_or(Error::MissingCertificate("margin τ"))?,
        RhoRule::COverTauSq => rho_sgc_margin(obj.data())?.rho,
        RhoRule::Explicit(rho) => *rho,
        // Grid candidates are scored on the experimental L, like the step rules.
        RhoRule::Grid(cands) => grid_search_rho_with(obj, cands, cfg.grid_passes.max(1), consts.gram_l, cfg.seed)?.rho,
    })
}

/// Run settings for `method` under `cfg`. The schedule uses `max(ρ, 1)`;
/// smaller values of `ρ` only enter through the step rule.
pub fn settings_for(cfg: &ExperimentConfig, method: Method, consts: &Constants, rho: f64) -> Result<RunSettings> {
    let eta = match method {
        Method::Sgd => consts.step(cfg.step_sgd, rho)?,
        Method::Accel => consts.step(cfg.step_accel, rho)?,
        Method::SgdLs | Method::AccelLs => 1.0 / cfg.ls_init,
    };
    let mode = match cfg.mu {
        Some(mu) => AccelMode::StronglyConvex { mu },
        None => AccelMode::Convex,
    };
    let mut s = RunSettings::new(method, eta, cfg.passes)
        .with_rho(rho.max(1.0))
        .with_mode(mode)
        .with_sigma(if method.is_accelerated() { cfg.sigma } else { 0.0 })
        .with_averaging(cfg.averaging);
    s.log_every = cfg.log_every;
    s.record_time = cfg.record_time;
    s.ls_init = cfg.ls_init;
    s.ls_reference_l = Some(consts.gram_l);
    Ok(s)
}

/// Runs labelled curves concurrently; curve `i` gets seed `derive_seed(seed, RUN_STREAM + i)`.
pub fn run_curves<F: FiniteSum + ?Sized>(
    obj: &F,
    curves: Vec<(String, RunSettings)>,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    thread::scope(|scope| {
        let handles: Vec<_> = curves
            .into_iter()
            .enumerate()
            .map(|(i, (label, settings))| {
                scope.spawn(move || {
                    let settings = settings.with_seed(derive_seed(seed, RUN_STREAM + i as u64));
                    run(obj, &settings)
                        .map(|mut rec| {
                            rec.label = label.clone();
                            rec
                        })
                        .map_err(|e| e.context(label))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("curve worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub constants: Constants,
    pub rho: f64,
    pub records: Vec<RunRecord>,
}

/// Dataset → objective → constants → ρ → one run per method.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let obj = build_objective(cfg)?;
    let constants = Constants::of(&obj, cfg.tau)?;
    let needs_rho = cfg.methods.iter().any(|m| m.is_accelerated());
    let rho = if needs_rho {
        resolve_rho(cfg, &obj, &constants)?
    } else {
        1.0
    };
    let curves = cfg
        .methods
        .iter()
        .map(|&m| Ok((legend(m).to_string(), settings_for(cfg, m, &constants, rho)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut records = run_curves(&obj, curves, cfg.seed)?;
    for rec in &mut records {
        rec.echo("gram_l", constants.gram_l);
        rec.echo("rho_rule", &cfg.rho);
        rec.echo("rho_value", rho);
    }
    Ok(ExperimentOutput {
        constants,
        rho,
        records,
    })
}

/// File name for a curve label: lowercase, with runs of other characters
/// replaced by `_`.
pub fn file_stem(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Writes one CSV per record plus `manifest.txt` mapping label to file.
pub fn write_records(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let mut paths = Vec::new();
    for rec in records {
        let name = format!("{}.csv", file_stem(&rec.label));
        let path = dir.join(&name);
        rec.write_csv(&path)?;
        manifest.push_str(&format!("{}\t{}\n", rec.label, name));
        paths.push(path);
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(paths)
}
