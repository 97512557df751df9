//! `growthsgd` command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use growthsgd::data::{certificate, load_libsvm};
use growthsgd::growth::{audit_sgc_with, grid_search_points, rho_sgc_margin, rho_wgc, AuditConfig};
use growthsgd::harness::config::{parse_pairs, KEYS};
use growthsgd::harness::experiment::{build_objective, write_records, Constants};
use growthsgd::harness::figures::{reproduce_figure_with, FigureOptions, FigurePaths};
use growthsgd::harness::{perceptron_check, ExperimentConfig, Figure, RhoRule};
use growthsgd::numerics::{derive_seed, spectral_norm_gram};
use growthsgd::Rng;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

/// Usage problems detected by the front end itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn config_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .help("key = value configuration file"),
    );
    KEYS.iter().fold(cmd, |cmd, (key, default, help)| {
        let flag = key.replace('_', "-");
        let mut arg = Arg::new(*key).long(flag).value_name("VALUE").help(*help);
        if key.contains('_') {
            arg = arg.alias(*key);
        }
        if !default.is_empty() {
            arg = arg.long_help(format!("{help} [default: {default}]"));
        }
        cmd.arg(arg)
    })
}

fn cli() -> Command {
    Command::new("growthsgd")
        .about("Constant step-size SGD and accelerated SGD under growth conditions")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(config_args(
            Command::new("run").about("Run one experiment and write a CSV per method into `out`"),
        ))
        .subcommand(
            Command::new("reproduce")
                .about("Reproduce a named figure as a CSV set")
                .arg(
                    Arg::new("figure")
                        .required(true)
                        .value_parser(Figure::ALL.map(|f| f.name()))
                        .help("figure name"),
                )
                .arg(path_arg("covtype", "LIBSVM file for the CovType panels"))
                .arg(path_arg("protein", "LIBSVM file for the Protein panels"))
                .arg(path_arg("out", "output directory").required(true))
                .arg(num_arg::<usize>("passes", "effective passes per curve", "30"))
                .arg(num_arg::<u64>("seed", "master seed", "0"))
                .arg(num_arg::<usize>("n", "synthetic number of points", "8000"))
                .arg(num_arg::<usize>("d", "synthetic dimension", "100")),
        )
        .subcommand(
            Command::new("perceptron")
                .about("Check the mistake bounds of SGD and accelerated SGD on margin data")
                .arg(num_arg::<f64>("tau", "margin", "0.1"))
                .arg(num_arg::<usize>("n", "number of points", "1000"))
                .arg(num_arg::<usize>("d", "dimension", "20"))
                .arg(num_arg::<usize>("passes", "effective passes", "30"))
                .arg(num_arg::<u64>("seed", "master seed", "0"))
                .arg(path_arg("out", "write the seed-averaged curves here")),
        )
        .subcommand(
            config_args(Command::new("audit-rho").about("Estimate the growth constant of a configured objective"))
                .arg(num_arg::<usize>("samples", "points in the empirical audit", "2000")),
        )
        .subcommand(
            Command::new("spectral")
                .about("Largest eigenvalue of XᵀX for a LIBSVM file")
                .arg(path_arg("libsvm", "data file").required(true))
                .arg(
                    Arg::new("dim")
                        .long("dim")
                        .value_name("INT")
                        .value_parser(value_parser!(usize))
                        .help("feature dimension"),
                ),
        )
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("PATH")
        .value_parser(value_parser!(PathBuf))
        .help(help)
}

fn num_arg<T: Clone + Send + Sync + std::str::FromStr + 'static>(
    name: &'static str,
    help: &'static str,
    default: &'static str,
) -> Arg
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    Arg::new(name)
        .long(name)
        .value_name("VALUE")
        .default_value(default)
        .value_parser(|s: &str| s.parse::<T>())
        .action(ArgAction::Set)
        .help(help)
}

/// File pairs overlaid with any explicitly given flags.
fn load_pairs(m: &ArgMatches) -> anyhow::Result<BTreeMap<String, String>> {
    let mut pairs = match m.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| growthsgd::Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_pairs(&text)?
        }
        None => BTreeMap::new(),
    };
    for (key, ..) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            pairs.insert(key.to_string(), v.clone());
        }
    }
    Ok(pairs)
}

fn load_config(m: &ArgMatches) -> anyhow::Result<ExperimentConfig> {
    Ok(ExperimentConfig::from_map(&load_pairs(m)?)?)
}

fn cmd_run(m: &ArgMatches) -> anyhow::Result<Outcome> {
    let cfg = load_config(m)?;
    let Some(out) = cfg.out.clone() else {
        return Err(UsageError("run needs an output directory (`out` key or --out)".into()).into());
    };
    let result = growthsgd::harness::run_experiment(&cfg)?;
    let files = write_records(&result.records, &out)?;
    std::fs::write(out.join("config.txt"), cfg.to_text()).context("writing config.txt")?;
    let c = &result.constants;
    println!(
        "n = {}, d = {}, lambda_max(XᵀX) = {:e}, rho = {}",
        c.n, c.d, c.gram_l, result.rho
    );
    for (rec, path) in result.records.iter().zip(&files) {
        let last = rec.last().map_or(f64::NAN, |r| r.log10_loss);
        println!("{:<14} final log10 loss {:>9.3}  {}", rec.label, last, path.display());
    }
    Ok(Outcome::Ok)
}

fn cmd_reproduce(m: &ArgMatches) -> anyhow::Result<Outcome> {
    let fig: Figure = m.get_one::<String>("figure").expect("required").parse()?;
    let paths = FigurePaths {
        covtype: m.get_one::<PathBuf>("covtype").cloned(),
        protein: m.get_one::<PathBuf>("protein").cloned(),
    };
    let out = m.get_one::<PathBuf>("out").expect("required");
    let opts = FigureOptions {
        passes: *m.get_one("passes").expect("default"),
        seed: *m.get_one("seed").expect("default"),
        n: *m.get_one("n").expect("default"),
        d: *m.get_one("d").expect("default"),
    };
    for (label, path) in reproduce_figure_with(fig, &paths, out, &opts)? {
        println!("{label}\t{}", path.display());
    }
    Ok(Outcome::Ok)
}

fn cmd_perceptron(m: &ArgMatches) -> anyhow::Result<Outcome> {
    let report = perceptron_check(
        *m.get_one("tau").expect("default"),
        *m.get_one("n").expect("default"),
        *m.get_one("d").expect("default"),
        *m.get_one("passes").expect("default"),
        *m.get_one("seed").expect("default"),
    )?;
    if let Some(out) = m.get_one::<PathBuf>("out") {
        write_records(&[report.sgd.clone(), report.accel.clone()], out)?;
    }
    print!("{}", report.summary());
    Ok(if report.passed() {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

fn cmd_audit(m: &ArgMatches) -> anyhow::Result<Outcome> {
    let cfg = load_config(m)?;
    let samples: usize = *m.get_one("samples").expect("default");
    let obj = build_objective(&cfg)?;
    let consts = Constants::of(&obj, cfg.tau)?;
    println!(
        "n = {}, d = {}, lambda_max(XᵀX) = {:e}",
        consts.n, consts.d, consts.gram_l
    );
    match rho_wgc(&obj) {
        Ok(e) => println!("{}: {} ({})", e.route, e.rho, e.detail),
        Err(e) => println!("weak growth: unavailable ({e})"),
    }
    match rho_sgc_margin(obj.data()) {
        Ok(e) => println!("{}: {} ({})", e.route, e.rho, e.detail),
        Err(e) => println!("margin bound: unavailable ({e})"),
    }
    let audit_cfg = match (certificate(obj.data()), cfg.tau) {
        (Ok((tau, _)), _) | (Err(_), Some(tau)) => AuditConfig::for_margin(tau),
        _ => AuditConfig::default(),
    };
    let mut rng = Rng::new(derive_seed(cfg.seed, 3));
    match audit_sgc_with(&obj, samples, &audit_cfg, &mut rng) {
        Ok(e) => println!("{}: {} ({})", e.route, e.rho, e.detail),
        Err(e) => println!("empirical audit: unavailable ({e})"),
    }
    if let RhoRule::Grid(cands) = &cfg.rho {
        println!("grid search over {} passes:", cfg.grid_passes);
        for p in grid_search_points(&obj, cands, cfg.grid_passes, consts.gram_l, cfg.seed)? {
            println!(
                "  rho {:<8} final loss {:e}{}",
                p.rho,
                p.final_loss,
                if p.stable { "" } else { "  (unstable)" }
            );
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_spectral(m: &ArgMatches) -> anyhow::Result<Outcome> {
    let path = m.get_one::<PathBuf>("libsvm").expect("required");
    let data = load_libsvm(Path::new(path), m.get_one::<usize>("dim").copied())?;
    let x = data.features();
    let lambda = spectral_norm_gram(x, 1e-12, 100_000)?;
    let max_row = x.row_iter().map(growthsgd::numerics::norm_sq).fold(0.0, f64::max);
    println!("n = {}", data.len());
    println!("d = {}", data.dim());
    println!("lambda_max(XᵀX) = {lambda:e}");
    println!("max ‖x_i‖² = {max_row:e}");
    Ok(Outcome::Ok)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<growthsgd::Error>() {
        Some(e) if e.is_config() => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match matches.subcommand() {
        Some(("run", m)) => cmd_run(m),
        Some(("reproduce", m)) => cmd_reproduce(m),
        Some(("perceptron", m)) => cmd_perceptron(m),
        Some(("audit-rho", m)) => cmd_audit(m),
        Some(("spectral", m)) => cmd_spectral(m),
        _ => unreachable!("subcommand required"),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(EXIT_ASSERTION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
