//! Per-run metric series and their CSV form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const CSV_HEADER: &str = "pass,iteration,train_loss,log10_loss,grad_sq_norm,mistake_rate,elapsed_ms";

/// Losses below this are treated as zero in log plots and rate fits.
pub const LOSS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub pass: u64,
    pub iteration: u64,
    pub train_loss: f64,
    pub log10_loss: f64,
    pub grad_sq_norm: f64,
    pub mistake_rate: f64,
    pub elapsed_ms: u64,
}

impl MetricRow {
    pub fn new(
        pass: u64,
        iteration: u64,
        train_loss: f64,
        grad_sq_norm: f64,
        mistake_rate: f64,
        elapsed_ms: u64,
    ) -> Self {
        MetricRow {
            pass,
            iteration,
            train_loss,
            log10_loss: train_loss.max(1e-300).log10(),
            grad_sq_norm,
            mistake_rate,
            elapsed_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub label: String,
    /// `key = value` lines describing how the run was configured.
    pub config: Vec<(String, String)>,
    pub rows: Vec<MetricRow>,
}

impl RunRecord {
    pub fn new(label: impl Into<String>) -> Self {
        RunRecord {
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn echo(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    pub fn initial_loss(&self) -> Option<f64> {
        self.rows.first().map(|r| r.train_loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_loss)
    }

    pub fn max_loss(&self) -> f64 {
        self.rows.iter().map(|r| r.train_loss).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            // Debug formatting is shortest round-trip, locale independent, and
            // switches to exponent form for very small and large magnitudes.
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{:?},{:?},{}",
                r.pass, r.iteration, r.train_loss, r.log10_loss, r.grad_sq_norm, r.mistake_rate, r.elapsed_ms
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn config_text(&self) -> String {
        self.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses CSV text produced by [`RunRecord::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricRow>> {
    let bad = |line: usize, msg: &str| crate::error::Error::Parse {
        path: "<csv>".into(),
        line,
        message: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(bad(1, "missing or unexpected header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(i + 1, "expected 7 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad(i + 1, "bad integer"));
        rows.push(MetricRow {
            pass: int(f[0])?,
            iteration: int(f[1])?,
            train_loss: num(f[2])?,
            log10_loss: num(f[3])?,
            grad_sq_norm: num(f[4])?,
            mistake_rate: num(f[5])?,
            elapsed_ms: int(f[6])?,
        });
    }
    Ok(rows)
}
