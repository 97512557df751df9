//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objectives::LossKind;
use crate::optimizers::Method;

/// Every recognised key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("dataset", "synthetic", "`synthetic` or `libsvm`"),
    ("n", "8000", "synthetic: number of points"),
    ("d", "100", "synthetic: dimension"),
    ("tau", "0.1", "synthetic: margin; libsvm: margin used by the `tau_over_l` and `one_over_tau` rules"),
    ("balanced", "false", "synthetic: redraw until class counts differ by < 5%"),
    ("path", "", "libsvm: data file"),
    ("n_sub", "", "libsvm: subsample size (all rows when empty)"),
    ("dim", "", "libsvm: feature dimension (largest index when empty)"),
    ("rbf", "false", "libsvm: replace features by Gaussian RBF features"),
    ("rbf_centers", "300", "libsvm: maximum number of RBF centers"),
    ("normalize", "false", "scale every row to unit norm"),
    ("loss", "squared_hinge", "`squared`, `squared_hinge`, `hinge` or `logistic`"),
    ("methods", "sgd,accel", "comma list of `sgd`, `accel`, `sgd_ls`, `accel_ls`"),
    ("step_sgd", "one_over_lmax", "step rule for `sgd`"),
    ("step_accel", "one_over_rho_l", "step rule for `accel`"),
    ("rho", "", "`one_over_tau`, `c_over_tau_sq`, a number, or `grid:r1,r2,...`; `one_over_tau` for synthetic data and 1 otherwise when empty"),
    ("grid_passes", "5", "passes per grid-search candidate"),
    ("mu", "", "strong-convexity constant; switches `accel` to its strongly convex schedule"),
    ("passes", "30", "effective passes per method"),
    ("seed", "0", "master seed"),
    ("sigma", "0", "standard deviation of additive gradient noise (accelerated methods)"),
    ("averaging", "false", "report the running mean of the iterates"),
    ("log_every", "", "iterations between logged rows (one pass when empty)"),
    ("ls_init", "1", "initial estimate for the line-search methods"),
    ("record_time", "false", "fill the `elapsed_ms` column (breaks byte determinism)"),
    ("out", "", "output directory for `run`"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Synthetic {
        n: usize,
        d: usize,
        tau: f64,
        balanced: bool,
    },
    Libsvm {
        path: PathBuf,
        n_sub: Option<usize>,
        dim: Option<usize>,
        rbf: bool,
        rbf_centers: usize,
    },
}

/// How a method's step size is chosen. `L` in these rules is the experimental
/// smoothness estimate `λ_max(XᵀX)`; `L_max` is the objective's per-example
/// constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    OneOverLmax,
    TauOverL,
    OneOverRhoL,
    Explicit(f64),
}

impl FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "one_over_lmax" => Ok(StepRule::OneOverLmax),
            "tau_over_l" => Ok(StepRule::TauOverL),
            "one_over_rho_l" => Ok(StepRule::OneOverRhoL),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(StepRule::Explicit(v)),
                _ => Err(Error::Config(format!("unknown step rule `{other}`"))),
            },
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::OneOverLmax => f.write_str("one_over_lmax"),
            StepRule::TauOverL => f.write_str("tau_over_l"),
            StepRule::OneOverRhoL => f.write_str("one_over_rho_l"),
            StepRule::Explicit(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhoRule {
    OneOverTau,
    COverTauSq,
    Explicit(f64),
    Grid(Vec<f64>),
}

impl FromStr for RhoRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "one_over_tau" => return Ok(RhoRule::OneOverTau),
            "c_over_tau_sq" => return Ok(RhoRule::COverTauSq),
            _ => {}
        }
        if let Some(list) = s.strip_prefix("grid:") {
            let cands = list
                .split(',')
                .map(|c| parse_positive(c.trim(), "rho"))
                .collect::<Result<Vec<_>>>()?;
            return Ok(RhoRule::Grid(cands));
        }
        Ok(RhoRule::Explicit(parse_positive(s, "rho")?))
    }
}

impl fmt::Display for RhoRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoRule::OneOverTau => f.write_str("one_over_tau"),
            RhoRule::COverTauSq => f.write_str("c_over_tau_sq"),
            RhoRule::Explicit(v) => write!(f, "{v}"),
            RhoRule::Grid(c) => {
                let list: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "grid:{}", list.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Margin for the τ-based rules; taken from `dataset` when synthetic.
    pub tau: Option<f64>,
    pub normalize: bool,
    pub loss: LossKind,
    pub methods: Vec<Method>,
    pub step_sgd: StepRule,
    pub step_accel: StepRule,
    pub rho: RhoRule,
    pub grid_passes: usize,
    pub mu: Option<f64>,
    pub passes: usize,
    pub seed: u64,
    pub sigma: f64,
    pub averaging: bool,
    pub log_every: Option<usize>,
    pub ls_init: f64,
    pub record_time: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::from_map(&BTreeMap::new()).expect("defaults are valid")
    }
}

impl ExperimentConfig {
    /// Synthetic margin data with every other setting at its default.
    pub fn synthetic(n: usize, d: usize, tau: f64) -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Synthetic {
                n,
                d,
                tau,
                balanced: false,
            },
            tau: Some(tau),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_map(&parse_pairs(&text)?)
    }

    /// Builds a configuration from raw pairs; missing keys take their
    /// defaults and unknown keys are rejected.
    pub fn from_map(raw: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = raw.keys().find(|k| !KEYS.iter().any(|(name, ..)| name == k)) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let get = |key: &str| -> Option<&str> {
            match raw.get(key) {
                Some(v) if !v.trim().is_empty() => Some(v.trim()),
                _ => KEYS
                    .iter()
                    .find(|(k, ..)| *k == key)
                    .map(|(_, default, _)| *default)
                    .filter(|d| !d.is_empty()),
            }
        };
        let req = |key: &str| get(key).ok_or_else(|| Error::Config(format!("`{key}` is required")));
        let explicit_tau = raw.get("tau").map(|v| v.trim()).filter(|v| !v.is_empty());

        let dataset = match req("dataset")? {
            "synthetic" => DatasetSpec::Synthetic {
                n: parse_num(req("n")?, "n")?,
                d: parse_num(req("d")?, "d")?,
                tau: parse_positive(req("tau")?, "tau")?,
                balanced: parse_bool(req("balanced")?, "balanced")?,
            },
            "libsvm" => DatasetSpec::Libsvm {
                path: PathBuf::from(req("path")?),
                n_sub: get("n_sub").map(|v| parse_num(v, "n_sub")).transpose()?,
                dim: get("dim").map(|v| parse_num(v, "dim")).transpose()?,
                rbf: parse_bool(req("rbf")?, "rbf")?,
                rbf_centers: parse_num(req("rbf_centers")?, "rbf_centers")?,
            },
            other => return Err(Error::Config(format!("unknown dataset `{other}`"))),
        };
        let tau = match &dataset {
            DatasetSpec::Synthetic { tau, .. } => Some(*tau),
            DatasetSpec::Libsvm { .. } => explicit_tau.map(|v| parse_positive(v, "tau")).transpose()?,
        };
        let methods = req("methods")?
            .split(',')
            .map(|m| m.trim())
            .filter(|m| !m.is_empty())
            .map(Method::from_str)
            .collect::<Result<Vec<_>>>()?;
        if methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        let rho = match get("rho") {
            Some(v) => v.parse()?,
            None if matches!(dataset, DatasetSpec::Synthetic { .. }) => RhoRule::OneOverTau,
            None => RhoRule::Explicit(1.0),
        };
        let passes = parse_num(req("passes")?, "passes")?;
        if passes == 0 {
            return Err(Error::Config("passes must be ≥ 1".into()));
        }
        let cfg = ExperimentConfig {
            dataset,
            tau,
            normalize: parse_bool(req("normalize")?, "normalize")?,
            loss: req("loss")?.parse()?,
            methods,
            step_sgd: req("step_sgd")?.parse()?,
            step_accel: req("step_accel")?.parse()?,
            rho,
            grid_passes: parse_num(req("grid_passes")?, "grid_passes")?,
            mu: get("mu").map(|v| parse_positive(v, "mu")).transpose()?,
            passes,
            seed: parse_num(req("seed")?, "seed")?,
            sigma: parse_nonneg(req("sigma")?, "sigma")?,
            averaging: parse_bool(req("averaging")?, "averaging")?,
            log_every: get("log_every").map(|v| parse_num(v, "log_every")).transpose()?,
            ls_init: parse_positive(req("ls_init")?, "ls_init")?,
            record_time: parse_bool(req("record_time")?, "record_time")?,
            out: get("out").map(PathBuf::from),
        };
        Ok(cfg)
    }

    /// The configuration as `key = value` lines that [`parse_pairs`] reads back.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| lines.push((k.to_string(), v));
        match &self.dataset {
            DatasetSpec::Synthetic { n, d, tau, balanced } => {
                push("dataset", "synthetic".into());
                push("n", n.to_string());
                push("d", d.to_string());
                push("tau", tau.to_string());
                push("balanced", balanced.to_string());
            }
            DatasetSpec::Libsvm {
                path,
                n_sub,
                dim,
                rbf,
                rbf_centers,
            } => {
                push("dataset", "libsvm".into());
                push("path", path.display().to_string());
                if let Some(v) = n_sub {
                    push("n_sub", v.to_string());
                }
                if let Some(v) = dim {
                    push("dim", v.to_string());
                }
                push("rbf", rbf.to_string());
                push("rbf_centers", rbf_centers.to_string());
                if let Some(t) = self.tau {
                    push("tau", t.to_string());
                }
            }
        }
        push("normalize", self.normalize.to_string());
        push("loss", self.loss.name().to_string());
        push(
            "methods",
            self.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        push("step_sgd", self.step_sgd.to_string());
        push("step_accel", self.step_accel.to_string());
        push("rho", self.rho.to_string());
        push("grid_passes", self.grid_passes.to_string());
        if let Some(mu) = self.mu {
            push("mu", mu.to_string());
        }
        push("passes", self.passes.to_string());
        push("seed", self.seed.to_string());
        push("sigma", self.sigma.to_string());
        push("averaging", self.averaging.to_string());
        if let Some(e) = self.log_every {
            push("log_every", e.to_string());
        }
        push("ls_init", self.ls_init.to_string());
        push("record_time", self.record_time.to_string());
        if let Some(out) = &self.out {
            push("out", out.display().to_string());
        }
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Reads `key = value` lines; `#` starts a comment and blank lines are
/// ignored. Repeated keys are an error.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim().to_string();
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(map)
}

fn parse_num<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_positive(v: &str, key: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(Error::Config(format!("`{key}` must be a positive number, got `{v}`"))),
    }
}

fn parse_nonneg(v: &str, key: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err(Error::Config(format!(
            "`{key}` must be a non-negative number, got `{v}`"
        ))),
    }
}

fn parse_bool(v: &str, key: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` must be true or false, got `{v}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            cfg.dataset,
            DatasetSpec::Synthetic {
                n: 8000,
                d: 100,
                tau: 0.1,
                balanced: false
            }
        );
        assert_eq!(cfg.methods, vec![Method::Sgd, Method::Accel]);
        assert_eq!(cfg.rho, RhoRule::OneOverTau);
        assert_eq!(cfg.passes, 30);
        assert_eq!(cfg.loss, LossKind::SquaredHinge);
    }

    #[test]
    fn parses_file_text() {
        let text = "# comment\n\ndataset = synthetic\nn = 500 # trailing\ntau=0.05\nmethods = accel, sgd_ls\nrho = grid:0.5,1,2\nstep_accel = 0.01\n";
        let cfg = ExperimentConfig::from_map(&parse_pairs(text).unwrap()).unwrap();
        assert_eq!(cfg.tau, Some(0.05));
        assert_eq!(cfg.methods, vec![Method::Accel, Method::SgdLs]);
        assert_eq!(cfg.rho, RhoRule::Grid(vec![0.5, 1.0, 2.0]));
        assert_eq!(cfg.step_accel, StepRule::Explicit(0.01));
    }

    #[test]
    fn text_round_trip() {
        let text = "dataset = libsvm\npath = /tmp/x\nn_sub = 10\nrbf = true\nmu = 0.5\nlog_every = 7\nout = o\n";
        let cfg = ExperimentConfig::from_map(&parse_pairs(text).unwrap()).unwrap();
        assert_eq!(cfg.rho, RhoRule::Explicit(1.0));
        assert_eq!(cfg.tau, None);
        let again = ExperimentConfig::from_map(&parse_pairs(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(cfg, again);
        let syn = ExperimentConfig::synthetic(100, 5, 0.2);
        assert_eq!(
            ExperimentConfig::from_map(&parse_pairs(&syn.to_text()).unwrap()).unwrap(),
            syn
        );
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "colour = red",
            "passes = 0",
            "methods = ,",
            "methods = adam",
            "tau = -1",
            "rho = grid:1,x",
            "averaging = maybe",
            "dataset = libsvm",
            "loss = l1",
            "no equals sign",
            "n = 5\nn = 6",
        ];
        for text in bad {
            let err = parse_pairs(text)
                .and_then(|m| ExperimentConfig::from_map(&m))
                .unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn empty_value_means_default() {
        for (k, ..) in KEYS {
            let mut m = BTreeMap::new();
            m.insert(k.to_string(), String::new());
            assert_eq!(
                ExperimentConfig::from_map(&m).unwrap(),
                ExperimentConfig::default(),
                "{k}"
            );
        }
    }
}
