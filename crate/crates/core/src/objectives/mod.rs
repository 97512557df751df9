//! Finite-sum objectives `f(w) = (1/n) Σ f_i(w)` with per-example oracles.
//!
//! The optimizers only see the [`FiniteSum`] trait. [`Objective`] implements it
//! for the four linear-model losses over a [`Dataset`]; [`testfns`] holds small
//! analytic problems with known constants used to check rate bounds.

pub mod testfns;

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, spectral_norm_gram, Matrix, Vector};

/// Relative tolerance for the power iteration behind `L`.
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 100_000;

/// Smoothness metadata of a finite sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    /// Smoothness of the mean objective.
    pub l: f64,
    /// Largest per-example smoothness constant.
    pub l_max: f64,
    /// Strong-convexity or PL constant, when known.
    pub mu: Option<f64>,
}

/// Oracle interface consumed by the optimizers.
///
/// The slice-based methods do not validate dimensions; the checked entry
/// points live on [`Objective`].
pub trait FiniteSum: Sync {
    fn num_examples(&self) -> usize;

    fn dim(&self) -> usize;

    fn example_loss(&self, w: &[f64], i: usize) -> f64;

    /// Writes `∇f_i(w)` into `out`, overwriting it.
    fn example_grad_into(&self, w: &[f64], i: usize, out: &mut [f64]);

    fn full_loss(&self, w: &[f64]) -> f64 {
        let n = self.num_examples();
        (0..n).map(|i| self.example_loss(w, i)).sum::<f64>() / n as f64
    }

    fn full_grad_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.num_examples();
        let mut g = vec![0.0; self.dim()];
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..n {
            self.example_grad_into(w, i, &mut g);
            axpy(1.0, &g, out);
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    fn full_grad(&self, w: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.full_grad_into(w, &mut out);
        out
    }

    /// `None` for non-smooth objectives.
    fn smoothness(&self) -> Option<Smoothness>;

    /// `f*`, when known.
    fn optimal_value(&self) -> Option<f64>;

    /// Fraction of examples with `y xᵀw ≤ 0`; `None` when there are no labels.
    fn mistake_rate(&self, _w: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `½(xᵀw − y)²`
    Squared,
    /// `max(0, 1 − y xᵀw)²`
    SquaredHinge,
    /// `max(0, 1 − y xᵀw)`
    Hinge,
    /// `log(1 + exp(−y xᵀw))`
    Logistic,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::SquaredHinge => "squared_hinge",
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        }
    }

    /// Curvature factor κ with `L_i = κ‖x_i‖²`; `None` for the hinge.
    pub fn curvature(self) -> Option<f64> {
        match self {
            LossKind::Squared => Some(1.0),
            LossKind::SquaredHinge => Some(2.0),
            LossKind::Logistic => Some(0.25),
            LossKind::Hinge => None,
        }
    }

    /// Loss as a function of the margin `m = y xᵀw` (squared loss uses the
    /// residual form instead, see [`Objective`]).
    #[inline]
    fn margin_loss(self, m: f64) -> f64 {
        match self {
            LossKind::SquaredHinge => {
                let h = (1.0 - m).max(0.0);
                h * h
            }
            LossKind::Hinge => (1.0 - m).max(0.0),
            LossKind::Logistic => softplus(-m),
            LossKind::Squared => unreachable!("squared loss is not a margin loss"),
        }
    }

    /// `d loss / d m`.
    #[inline]
    fn margin_slope(self, m: f64) -> f64 {
        match self {
            LossKind::SquaredHinge => -2.0 * (1.0 - m).max(0.0),
            // Zero-side subgradient at the kink m = 1.
            LossKind::Hinge => {
                if m < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Logistic => -sigmoid(-m),
            LossKind::Squared => unreachable!("squared loss is not a margin loss"),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "squared" => Ok(LossKind::Squared),
            "squared_hinge" => Ok(LossKind::SquaredHinge),
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::Config(format!("unknown loss kind `{other}`"))),
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Design matrix with ±1 labels and an optional separability certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    margin: Option<f64>,
    w_star: Option<Vector>,
    support_size: Option<usize>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
            return Err(Error::InvalidArgument(format!("label {bad} is not ±1")));
        }
        Ok(Dataset {
            x,
            y,
            margin: None,
            w_star: None,
            support_size: None,
        })
    }

    /// Attaches a separator `w_star` with `y_i x_iᵀ w_star ≥ 1` for all i and
    /// the margin τ it certifies. Fails if any example violates the bound.
    pub fn with_certificate(mut self, margin: f64, w_star: Vector) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
        }
        if w_star.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w_star.dim(),
            });
        }
        if let Some(i) = (0..self.len()).find(|&i| self.y[i] * dot(self.x.row(i), &w_star) < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "separator violates the unit functional margin at example {i}"
            )));
        }
        self.margin = Some(margin);
        self.w_star = Some(w_star);
        Ok(self)
    }

    pub fn with_support_size(mut self, c: usize) -> Self {
        self.support_size = Some(c);
        self
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn margin(&self) -> Option<f64> {
        self.margin
    }

    pub fn w_star(&self) -> Option<&Vector> {
        self.w_star.as_ref()
    }

    pub fn support_size(&self) -> Option<usize> {
        self.support_size
    }

    pub fn has_certificate(&self) -> bool {
        self.margin.is_some() && self.w_star.is_some()
    }

    pub(crate) fn into_parts(self) -> (Matrix, Vec<f64>, Option<f64>, Option<Vector>, Option<usize>) {
        (self.x, self.y, self.margin, self.w_star, self.support_size)
    }

    pub(crate) fn from_parts_unchecked(
        x: Matrix,
        y: Vec<f64>,
        margin: Option<f64>,
        w_star: Option<Vector>,
        support_size: Option<usize>,
    ) -> Self {
        Dataset {
            x,
            y,
            margin,
            w_star,
            support_size,
        }
    }

    /// Fraction of examples with `y xᵀw ≤ 0`.
    pub fn mistake_rate(&self, w: &[f64]) -> f64 {
        let wrong = self
            .x
            .row_iter()
            .zip(&self.y)
            .filter(|(row, y)| *y * dot(row, w) <= 0.0)
            .count();
        wrong as f64 / self.len() as f64
    }
}

/// `(L, L_max)` for a smooth loss: `L = κ λ_max(XᵀX) / n` for the mean
/// objective and `L_max = κ max_i ‖x_i‖²`.
pub fn smoothness_constants(kind: LossKind, data: &Dataset) -> Result<(f64, f64)> {
    let kappa = kind.curvature().ok_or(Error::NonSmooth("hinge"))?;
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let lambda = spectral_norm_gram(data.features(), SPECTRAL_TOL, SPECTRAL_MAX_ITER)?;
    let max_row = data
        .features()
        .row_iter()
        .map(crate::numerics::norm_sq)
        .fold(0.0, f64::max);
    Ok((kappa * lambda / data.len() as f64, kappa * max_row))
}

/// A linear-model loss over a dataset.
#[derive(Debug, Clone)]
pub struct Objective {
    kind: LossKind,
    data: Dataset,
    smoothness: Option<Smoothness>,
    f_star: Option<f64>,
}

impl Objective {
    /// Builds the objective and computes `(L, L_max)` for smooth kinds.
    ///
    /// `f*` defaults to 0 for the margin losses (squared hinge, hinge,
    /// logistic) when the dataset carries a separator certificate.
    pub fn new(kind: LossKind, data: Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let smoothness = match kind {
            LossKind::Hinge => None,
            _ => {
                let (l, l_max) = smoothness_constants(kind, &data)?;
                Some(Smoothness { l, l_max, mu: None })
            }
        };
        let f_star = match kind {
            LossKind::Squared => None,
            _ if data.has_certificate() => Some(0.0),
            _ => None,
        };
        Ok(Objective {
            kind,
            data,
            smoothness,
            f_star,
        })
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        if let Some(s) = self.smoothness.as_mut() {
            s.mu = Some(mu);
        }
        self
    }

    pub fn with_optimal_value(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                found: w.len(),
            });
        }
        Ok(())
    }

    pub fn loss_full(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        Ok(self.full_loss(w))
    }

    pub fn grad_example(&self, w: &[f64], i: usize) -> Result<Vector> {
        self.check_dim(w)?;
        if i >= self.data.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.data.len(),
            });
        }
        let mut out = Vector::zeros(self.data.dim());
        self.example_grad_into(w, i, &mut out);
        Ok(out)
    }

    pub fn grad_full(&self, w: &[f64]) -> Result<Vector> {
        self.check_dim(w)?;
        Ok(self.full_grad(w))
    }

    /// `dℓ/d(xᵀw)` for example `i`, so that `∇f_i(w) = coef · x_i`.
    #[inline]
    fn coefficient(&self, w: &[f64], i: usize) -> f64 {
        let score = dot(self.data.x.row(i), w);
        let y = self.data.y[i];
        match self.kind {
            LossKind::Squared => score - y,
            kind => y * kind.margin_slope(y * score),
        }
    }
}

impl FiniteSum for Objective {
    fn num_examples(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    #[inline]
    fn example_loss(&self, w: &[f64], i: usize) -> f64 {
        let score = dot(self.data.x.row(i), w);
        let y = self.data.y[i];
        match self.kind {
            LossKind::Squared => 0.5 * (score - y) * (score - y),
            kind => kind.margin_loss(y * score),
        }
    }

    #[inline]
    fn example_grad_into(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let coef = self.coefficient(w, i);
        for (o, x) in out.iter_mut().zip(self.data.x.row(i)) {
            *o = coef * x;
        }
    }

    fn full_grad_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.data.len();
        let coefs: Vec<f64> = (0..n).map(|i| self.coefficient(w, i)).collect();
        self.data.x.tr_mul_vec_into(&coefs, out);
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    fn smoothness(&self) -> Option<Smoothness> {
        self.smoothness
    }

    fn optimal_value(&self) -> Option<f64> {
        self.f_star
    }

    fn mistake_rate(&self, w: &[f64]) -> Option<f64> {
        Some(self.data.mistake_rate(w))
    }
}
