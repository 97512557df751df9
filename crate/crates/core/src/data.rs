//! Dataset construction: the margin-separable generator, RBF features,
//! LIBSVM text I/O, subsampling and row normalization.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{dist_sq, dot, norm_sq, Matrix, Rng, Vector};
use crate::objectives::Dataset;

/// Consecutive rejections tolerated before the generator gives up.
pub const MAX_REJECTIONS: u64 = 1_000_000;

/// Default cap on the number of RBF centers.
pub const RBF_MAX_CENTERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginDataConfig {
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub seed: u64,
    /// Redraw until the two class counts differ by less than 5% of `n`.
    pub balanced: bool,
    pub max_rejections: u64,
}

impl MarginDataConfig {
    pub fn new(n: usize, d: usize, tau: f64, seed: u64) -> Self {
        MarginDataConfig {
            n,
            d,
            tau,
            seed,
            balanced: false,
            max_rejections: MAX_REJECTIONS,
        }
    }
}

/// Linearly separable data with margin `tau`.
///
/// `w_star` is uniform on the unit sphere, rescaled to norm `1/τ`. Each `x_i`
/// is uniform on the unit sphere and redrawn while `|⟨x_i, w_star⟩| < 1`
/// (equivalently `|⟨x_i, τ w_star⟩| < τ`); `y_i = sign⟨x_i, w_star⟩`. The
/// result carries `(τ, w_star)` as its certificate and `c = n`, and the
/// squared-hinge loss at `w_star` is exactly zero.
pub fn generate_margin_data(n: usize, d: usize, tau: f64, seed: u64) -> Result<Dataset> {
    generate_margin_data_with(&MarginDataConfig::new(n, d, tau, seed))
}

pub fn generate_margin_data_with(cfg: &MarginDataConfig) -> Result<Dataset> {
    if cfg.n < 2 || cfg.d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n ≥ 2 and d ≥ 2, got n={} d={}",
            cfg.n, cfg.d
        )));
    }
    if !(cfg.tau > 0.0 && cfg.tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must lie in (0, 1), got {}",
            cfg.tau
        )));
    }
    if !cfg.balanced {
        return draw_margin_data(cfg, &mut Rng::new(cfg.seed));
    }
    let base = Rng::new(cfg.seed);
    for attempt in 0..1000 {
        let data = draw_margin_data(cfg, &mut base.derive(attempt))?;
        let pos = data.labels().iter().filter(|y| **y > 0.0).count();
        let diff = (2 * pos).abs_diff(cfg.n);
        if (diff as f64) < 0.05 * cfg.n as f64 {
            return Ok(data);
        }
    }
    Err(Error::InvalidArgument(
        "could not draw a balanced dataset in 1000 attempts".into(),
    ))
}

fn draw_margin_data(cfg: &MarginDataConfig, rng: &mut Rng) -> Result<Dataset> {
    let w_star = rng.unit_sphere(cfg.d).scaled(1.0 / cfg.tau);
    let mut data = Vec::with_capacity(cfg.n * cfg.d);
    let mut y = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let mut rejections = 0u64;
        loop {
            let x = rng.unit_sphere(cfg.d);
            // Same dot routine the losses use, so the certificate is exact.
            let s = dot(&x, &w_star);
            if s.abs() >= 1.0 {
                y.push(if s > 0.0 { 1.0 } else { -1.0 });
                data.extend_from_slice(&x);
                break;
            }
            rejections += 1;
            if rejections > cfg.max_rejections {
                return Err(Error::RejectionLimit(cfg.max_rejections));
            }
        }
    }
    let x = Matrix::from_row_major(cfg.n, cfg.d, data)?;
    Ok(Dataset::new(x, y)?
        .with_certificate(cfg.tau, w_star)?
        .with_support_size(cfg.n))
}

/// Gaussian RBF feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfConfig {
    pub centers: Matrix,
    pub bandwidth: f64,
}

impl RbfConfig {
    pub fn new(centers: Matrix, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(RbfConfig { centers, bandwidth })
    }

    /// `min(n, max_centers)` rows drawn without replacement as centers, with
    /// the bandwidth set to the median pairwise distance among them.
    pub fn median_heuristic(x: &Matrix, max_centers: usize, seed: u64) -> Result<Self> {
        let m = x.rows().min(max_centers);
        if m < 2 {
            return Err(Error::InvalidArgument(
                "median heuristic needs at least two centers".into(),
            ));
        }
        let mut idx: Vec<usize> = (0..x.rows()).collect();
        Rng::new(seed).shuffle(&mut idx);
        idx.truncate(m);
        let centers = x.select_rows(&idx);
        let mut dists = Vec::with_capacity(m * (m - 1) / 2);
        for a in 0..m {
            for b in a + 1..m {
                dists.push(dist_sq(centers.row(a), centers.row(b)).sqrt());
            }
        }
        dists.sort_by(f64::total_cmp);
        let mid = dists.len() / 2;
        let median = if dists.len() % 2 == 0 {
            0.5 * (dists[mid - 1] + dists[mid])
        } else {
            dists[mid]
        };
        RbfConfig::new(centers, median)
    }
}

/// Row `i` maps to `[exp(−‖x_i − c_j‖² / (2 h²))]_j`.
pub fn rbf_features(x: &Matrix, cfg: &RbfConfig) -> Result<Matrix> {
    if x.cols() != cfg.centers.cols() {
        return Err(Error::DimensionMismatch {
            expected: cfg.centers.cols(),
            found: x.cols(),
        });
    }
    let m = cfg.centers.rows();
    let scale = -0.5 / (cfg.bandwidth * cfg.bandwidth);
    let mut out = Vec::with_capacity(x.rows() * m);
    for row in x.row_iter() {
        for c in cfg.centers.row_iter() {
            out.push((scale * dist_sq(row, c)).exp());
        }
    }
    Matrix::from_row_major(x.rows(), m, out)
}

/// Reads a binary LIBSVM file into a dense dataset.
///
/// Indices are 1-based; missing indices are zeros; `#` starts a comment.
/// Labels already in {−1, +1} are kept; otherwise exactly two distinct labels
/// are required and map to −1 (smaller) and +1 (larger).
pub fn load_libsvm(path: &Path, expected_dim: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(e).context(path.display().to_string()))?;
    parse_libsvm(BufReader::new(file), path, expected_dim)
}

pub fn parse_libsvm<R: BufRead>(reader: R, path: &Path, expected_dim: Option<usize>) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(lineno, format!("bad label `{label_tok}`")))?;
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|i| *i >= 1)
                .ok_or_else(|| err(lineno, format!("bad index `{idx}`")))?;
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(lineno, format!("bad value `{val}`")))?;
            if let Some(d) = expected_dim {
                if idx > d {
                    return Err(err(lineno, format!("index {idx} exceeds expected dimension {d}")));
                }
            }
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(Error::Empty("LIBSVM file"));
    }
    let d = expected_dim.unwrap_or(max_index).max(1);
    let mut dense = vec![0.0; rows.len() * d];
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            dense[i * d + j] = v;
        }
    }
    let y = map_labels(&labels)?;
    Dataset::new(Matrix::from_row_major(rows.len(), d, dense)?, y)
}

fn map_labels(labels: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = labels.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.iter().all(|l| *l == 1.0 || *l == -1.0) {
        return Ok(labels.to_vec());
    }
    if distinct.len() != 2 {
        return Err(Error::Labels(distinct));
    }
    let map: BTreeMap<u64, f64> = [(distinct[0].to_bits(), -1.0), (distinct[1].to_bits(), 1.0)].into();
    Ok(labels.iter().map(|l| map[&l.to_bits()]).collect())
}

/// Writes `data` in LIBSVM text form, omitting zero entries.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for (row, y) in data.features().row_iter().zip(data.labels()) {
        write!(out, "{}", if *y > 0.0 { "+1" } else { "-1" })?;
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{:?}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Uniform subsample without replacement, in shuffled order. Any margin
/// certificate carries over since it holds on every subset.
pub fn subsample(data: &Dataset, n_sub: usize, seed: u64) -> Result<Dataset> {
    if n_sub > data.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n_sub} rows from a dataset of {}",
            data.len()
        )));
    }
    if n_sub == 0 {
        return Err(Error::Empty("subsample"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    Rng::new(seed).shuffle(&mut idx);
    idx.truncate(n_sub);
    let x = data.features().select_rows(&idx);
    let y = idx.iter().map(|&i| data.labels()[i]).collect();
    Ok(Dataset::from_parts_unchecked(
        x,
        y,
        data.margin(),
        data.w_star().cloned(),
        data.support_size().map(|c| c.min(n_sub)),
    ))
}

/// Scales every row to unit norm. The certificate survives only when the rows
/// were already unit-norm (to 1e−12), since rescaling changes the margins.
pub fn normalize_rows(data: &Dataset) -> Result<Dataset> {
    let norms: Vec<f64> = data.features().row_iter().map(|r| norm_sq(r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|n| *n == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    if norms.iter().all(|n| (n - 1.0).abs() <= 1e-12) {
        return Ok(data.clone());
    }
    let (mut x, y, _, _, support) = data.clone().into_parts();
    for (i, norm) in norms.iter().enumerate() {
        x.row_mut(i).iter_mut().for_each(|v| *v /= norm);
    }
    Ok(Dataset::from_parts_unchecked(x, y, None, None, support))
}

/// Smallest `y_i x_iᵀ w` over the dataset.
pub fn min_functional_margin(data: &Dataset, w: &[f64]) -> f64 {
    data.features()
        .row_iter()
        .zip(data.labels())
        .map(|(r, y)| y * dot(r, w))
        .fold(f64::INFINITY, f64::min)
}

/// Convenience: the certificate's separator, or an error naming what is missing.
pub fn certificate(data: &Dataset) -> Result<(f64, &Vector)> {
    match (data.margin(), data.w_star()) {
        (Some(t), Some(w)) => Ok((t, w)),
        (None, _) => Err(Error::MissingCertificate("margin τ")),
        (_, None) => Err(Error::MissingCertificate("separator w_star")),
    }
}
