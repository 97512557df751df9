use growthsgd::harness::config::parse_pairs;
use growthsgd::harness::{fit_rate, run_experiment, ExperimentConfig, Regime};
use growthsgd::objectives::testfns::Quadratic;
use growthsgd::optimizers::run;
use growthsgd::{AccelMode, Method, RunSettings, Vector};

fn synthetic(tau: f64, seed: u64) -> ExperimentConfig {
    let text = format!(
        "n = 2000\nd = 50\ntau = {tau}\nstep_accel = tau_over_l\nrho = one_over_tau\npasses = 30\nseed = {seed}\n"
    );
    ExperimentConfig::from_map(&parse_pairs(&text).unwrap()).unwrap()
}

#[test]
fn smoothed_sgd_curve_is_non_increasing() {
    for (tau, seed) in [(0.1, 41), (0.05, 42)] {
        let out = run_experiment(&synthetic(tau, seed)).unwrap();
        let losses: Vec<f64> = out.records[0].rows.iter().map(|r| r.train_loss).collect();
        let smooth: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        for w in smooth.windows(2) {
            assert!(w[1] <= w[0], "tau {tau}: {} > {}", w[1], w[0]);
        }
    }
}

#[test]
fn accelerated_curve_below_sgd_after_five_passes() {
    for seed in 43..47 {
        let text = format!(
            "n = 8000\nd = 100\ntau = 0.1\nstep_accel = tau_over_l\nrho = one_over_tau\npasses = 12\nseed = {seed}\n"
        );
        let out = run_experiment(&ExperimentConfig::from_map(&parse_pairs(&text).unwrap()).unwrap()).unwrap();
        let (sgd, acc) = (&out.records[0], &out.records[1]);
        for (s, a) in sgd.rows.iter().zip(&acc.rows).filter(|(s, _)| s.pass > 5) {
            // Both curves may sit at exactly zero loss.
            let below = a.train_loss < s.train_loss || (a.train_loss == 0.0 && s.train_loss == 0.0);
            assert!(
                below,
                "seed {seed}, pass {}: {} ≥ {}",
                s.pass, a.train_loss, s.train_loss
            );
        }
    }
}

#[test]
fn strongly_convex_fit_reaches_half_the_rate_exponent() {
    let (l, mu, rho) = (2.0, 0.02, 1.0);
    let q = Quadratic::new(vec![l, 0.5, mu], Vector::zeros(3)).unwrap();
    let settings = RunSettings::new(Method::Accel, 1.0 / (rho * l), 300)
        .with_rho(rho)
        .with_mode(AccelMode::StronglyConvex { mu })
        .with_w0(Vector::from_elem(3, 1.0));
    let rec = run(&q, &settings).unwrap();
    let fit = fit_rate(&rec.rows, Regime::Linear).unwrap();
    let exponent = (1.0 - (mu / (rho * rho * l)).sqrt()).ln();
    assert!(fit.slope <= 0.5 * exponent, "{} > {}", fit.slope, 0.5 * exponent);
}
