//! Named figure pipelines: one CSV per curve plus `manifest.txt`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::{DatasetSpec, ExperimentConfig, RhoRule, StepRule};
use super::experiment::{legend, run_experiment, write_records};
use super::record::RunRecord;
use crate::error::{Error, Result};
use crate::numerics::derive_seed;
use crate::optimizers::Method;

pub const SYNTHETIC_N: usize = 8000;
pub const SYNTHETIC_D: usize = 100;
pub const REAL_SUBSAMPLE: usize = 8000;
pub const FIGURE_TAUS: [f64; 4] = [0.1, 0.05, 0.01, 0.005];
pub const COVTYPE_RHO: f64 = 1.0;
pub const PROTEIN_RHO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig1d,
    Fig2Covtype,
    Fig2Protein,
    AppLs,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Fig1a,
        Figure::Fig1b,
        Figure::Fig1c,
        Figure::Fig1d,
        Figure::Fig2Covtype,
        Figure::Fig2Protein,
        Figure::AppLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig1c => "fig1c",
            Figure::Fig1d => "fig1d",
            Figure::Fig2Covtype => "fig2_covtype",
            Figure::Fig2Protein => "fig2_protein",
            Figure::AppLs => "app_ls",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}`")))
    }
}

/// Locations of the optional real datasets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FigurePaths {
    pub covtype: Option<PathBuf>,
    pub protein: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub passes: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            passes: 30,
            seed: 0,
            n: SYNTHETIC_N,
            d: SYNTHETIC_D,
        }
    }
}

/// One dataset setting of a figure and the methods drawn on it.
struct Panel {
    prefix: Option<String>,
    cfg: ExperimentConfig,
    /// Line-search comparisons mark the fixed-step variants with `(T)`.
    theory_suffix: bool,
}

fn synthetic_panel(tau: f64, methods: Vec<Method>, opts: &FigureOptions) -> ExperimentConfig {
    ExperimentConfig {
        methods,
        step_sgd: StepRule::OneOverLmax,
        step_accel: StepRule::TauOverL,
        rho: RhoRule::OneOverTau,
        passes: opts.passes,
        ..ExperimentConfig::synthetic(opts.n, opts.d, tau)
    }
}

fn real_panel(path: &Path, rho: f64, methods: Vec<Method>, opts: &FigureOptions) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Libsvm {
            path: path.to_path_buf(),
            n_sub: Some(REAL_SUBSAMPLE),
            dim: None,
            rbf: true,
            rbf_centers: crate::data::RBF_MAX_CENTERS,
        },
        tau: None,
        methods,
        step_sgd: StepRule::OneOverLmax,
        step_accel: StepRule::OneOverRhoL,
        rho: RhoRule::Explicit(rho),
        passes: opts.passes,
        ..ExperimentConfig::default()
    }
}

fn require(path: &Option<PathBuf>, flag: &str, fig: Figure) -> Result<PathBuf> {
    match path {
        Some(p) if p.is_file() => Ok(p.clone()),
        Some(p) => Err(Error::Config(format!("{fig}: dataset file {} not found", p.display()))),
        None => Err(Error::Config(format!("{fig} needs --{flag} <path>"))),
    }
}

fn panels(fig: Figure, paths: &FigurePaths, opts: &FigureOptions) -> Result<Vec<Panel>> {
    let basic = vec![Method::Sgd, Method::Accel];
    let all = vec![Method::Sgd, Method::SgdLs, Method::Accel, Method::AccelLs];
    let single = |cfg| {
        Ok(vec![Panel {
            prefix: None,
            cfg,
            theory_suffix: false,
        }])
    };
    match fig {
        Figure::Fig1a => single(synthetic_panel(FIGURE_TAUS[0], basic, opts)),
        Figure::Fig1b => single(synthetic_panel(FIGURE_TAUS[1], basic, opts)),
        Figure::Fig1c => single(synthetic_panel(FIGURE_TAUS[2], basic, opts)),
        Figure::Fig1d => single(synthetic_panel(FIGURE_TAUS[3], basic, opts)),
        Figure::Fig2Covtype => single(real_panel(
            &require(&paths.covtype, "covtype", fig)?,
            COVTYPE_RHO,
            basic,
            opts,
        )),
        Figure::Fig2Protein => single(real_panel(
            &require(&paths.protein, "protein", fig)?,
            PROTEIN_RHO,
            basic,
            opts,
        )),
        Figure::AppLs => {
            let mut out: Vec<Panel> = FIGURE_TAUS
                .iter()
                .map(|&tau| Panel {
                    prefix: Some(format!("tau={tau}")),
                    cfg: synthetic_panel(tau, all.clone(), opts),
                    theory_suffix: true,
                })
                .collect();
            for (name, path, rho) in [
                ("covtype", &paths.covtype, COVTYPE_RHO),
                ("protein", &paths.protein, PROTEIN_RHO),
            ] {
                if path.is_some() {
                    out.push(Panel {
                        prefix: Some(name.to_string()),
                        cfg: real_panel(&require(path, name, fig)?, rho, all.clone(), opts),
                        theory_suffix: true,
                    });
                }
            }
            Ok(out)
        }
    }
}

/// Runs every curve of `fig` with default options and writes the CSV set.
pub fn reproduce_figure(fig: Figure, paths: &FigurePaths, out_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    reproduce_figure_with(fig, paths, out_dir, &FigureOptions::default())
}

pub fn reproduce_figure_with(
    fig: Figure,
    paths: &FigurePaths,
    out_dir: &Path,
    opts: &FigureOptions,
) -> Result<Vec<(String, PathBuf)>> {
    let records = figure_records(fig, paths, opts)?;
    let files = write_records(&records, out_dir)?;
    Ok(records.into_iter().map(|r| r.label).zip(files).collect())
}

/// The labelled curves of `fig`, without writing anything.
pub fn figure_records(fig: Figure, paths: &FigurePaths, opts: &FigureOptions) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for (i, panel) in panels(fig, paths, opts)?.into_iter().enumerate() {
        let cfg = ExperimentConfig {
            seed: derive_seed(opts.seed, i as u64),
            ..panel.cfg
        };
        let out = run_experiment(&cfg).map_err(|e| e.context(format!("{fig}")))?;
        for (mut rec, method) in out.records.into_iter().zip(&cfg.methods) {
            let mut label = legend(*method).to_string();
            if panel.theory_suffix && matches!(method, Method::Sgd | Method::Accel) {
                label.push_str("(T)");
            }
            rec.label = match &panel.prefix {
                Some(p) => format!("{p} {label}"),
                None => label,
            };
            rec.echo("figure", fig);
            records.push(rec);
        }
    }
    Ok(records)
}
