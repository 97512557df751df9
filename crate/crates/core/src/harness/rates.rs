//! Least-squares rate fits on logged loss curves.

use super::record::{MetricRow, LOSS_FLOOR};
use crate::error::{Error, Result};

/// Minimum number of rows above the loss floor for a fit.
pub const MIN_FIT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `ln(loss)` against iteration; the slope is `ln q` for `loss ∝ q^k`.
    Linear,
    /// `ln(loss)` against `ln(iteration)`; the slope is `−p` for `loss ∝ k^(−p)`.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub regime: Regime,
    pub slope: f64,
    pub r_squared: f64,
    /// First and last pass inside the fitted window.
    pub window: (u64, u64),
}

/// Fits the decay of `rows` in the given regime.
///
/// Rows stop at the first loss at or below [`LOSS_FLOOR`]; iteration 0 is
/// dropped in the polynomial regime. The first 10% of what remains is
/// discarded as transient.
pub fn fit_rate(rows: &[MetricRow], regime: Regime) -> Result<RateFit> {
    let usable: Vec<&MetricRow> = rows
        .iter()
        .take_while(|r| r.train_loss > LOSS_FLOOR)
        .filter(|r| regime == Regime::Linear || r.iteration > 0)
        .collect();
    if usable.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientRows {
            found: usable.len(),
            required: MIN_FIT_ROWS,
        });
    }
    let window = &usable[usable.len() / 10..];
    let xs: Vec<f64> = window
        .iter()
        .map(|r| match regime {
            Regime::Linear => r.iteration as f64,
            Regime::Polynomial => (r.iteration as f64).ln(),
        })
        .collect();
    let ys: Vec<f64> = window.iter().map(|r| r.train_loss.ln()).collect();
    let (slope, r_squared) = least_squares(&xs, &ys);
    Ok(RateFit {
        regime,
        slope,
        r_squared,
        window: (window[0].pass, window[window.len() - 1].pass),
    })
}

/// Slope and coefficient of determination of the ordinary least-squares line.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    (slope, r2)
}
