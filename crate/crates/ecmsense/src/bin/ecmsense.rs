use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ecmsense::config::{resolve_seed, ReductionName, RunConfig, SEED_ENV};
use ecmsense::pipeline::{self, MorrisOutcome, MorrisOverrides};
use ecmsense::synth::DatasetSpec;
use ecmsense::{Error, Result};
use ecmsense_core::morris::MorrisConfig;

const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "ecmsense", version, about = "Battery ECM identification and Morris sensitivity screening")]
struct Cli {
    /// Run configuration (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; falls back to $ECMSENSE_SEED, then the config
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory [default: <config dir>/out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Monte Carlo runs per interval
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
    /// Perturbation in standard deviations
    #[arg(long, global = true, value_name = "X")]
    delta: Option<f64>,
    /// Time reduction of the voltage difference
    #[arg(long, global = true, value_enum)]
    reduction: Option<ReductionArg>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Only errors on stderr, nothing on stdout
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ReductionArg {
    Mean,
    Rms,
}

impl From<ReductionArg> for ReductionName {
    fn from(r: ReductionArg) -> Self {
        match r {
            ReductionArg::Mean => ReductionName::Mean,
            ReductionArg::Rms => ReductionName::Rms,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Average the OCV sweeps and fit the polynomial
    FitOcv,
    /// Replay a drive cycle through the schedule
    Simulate {
        /// Drive cycle to replay [default: data.training_cycle]
        #[arg(long, value_name = "PATH")]
        cycle: Option<PathBuf>,
    },
    /// Identify one parameter set per SOC interval
    Identify,
    /// Morris and enhanced Morris screening per SOC interval
    Morris,
    /// Three-case replay of the validation cycle
    Validate,
    /// Morris screening of y = theta1 + 5 theta2
    DemoLinear,
    /// Write a synthetic data set and a matching run.toml
    GenData {
        /// Measurement noise RMS in volts
        #[arg(long, default_value_t = 1e-3, value_name = "V")]
        noise: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required for this command".into()))?;
    let cfg = RunConfig::load(path)?;
    let out = match &cli.out {
        Some(o) => o.clone(),
        None => path.parent().unwrap_or(Path::new(".")).join("out"),
    };
    Ok((cfg, out))
}

fn seed(cli: &Cli, config: Option<u64>) -> Result<u64> {
    let env = std::env::var(SEED_ENV).ok();
    resolve_seed(cli.seed, env.as_deref(), config)
}

fn overrides(cli: &Cli, config: Option<u64>) -> Result<MorrisOverrides> {
    Ok(MorrisOverrides {
        seed: seed(cli, config)?,
        runs: cli.runs.map(|n| n as usize),
        delta: cli.delta,
        reduction: cli.reduction.map(Into::into),
        workers: cli.workers.map(|n| n as usize),
    })
}

fn mv(v: f64) -> String {
    format!("{:.3}", v * 1e3)
}

fn run(cli: &Cli) -> Result<u8> {
    let say = |s: String| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match &cli.command {
        Command::FitOcv => {
            let (cfg, out) = load_config(cli)?;
            let (_, s) = pipeline::fit_ocv(&cfg, &out)?;
            say(format!(
                "degree {} over [{}%, {}%], {} points: rmse {} mV, max {} mV",
                s.degree,
                s.valid_range_percent[0],
                s.valid_range_percent[1],
                s.points,
                mv(s.rmse_v),
                mv(s.max_abs_v)
            ));
        }
        Command::Simulate { cycle } => {
            let (cfg, out) = load_config(cli)?;
            let s = pipeline::simulate_cycle(&cfg, &out, cycle.as_deref())?;
            let mut line = format!(
                "{} samples, SOC {}% -> {:.4}%",
                s.samples, s.initial_soc_percent, s.final_soc_percent
            );
            if let (Some(r), Some(m)) = (s.rmse_v, s.max_abs_v) {
                line += &format!(", rmse {} mV, max {} mV", mv(r), mv(m));
            }
            if let Some(k) = s.first_clamp {
                line += &format!(", SOC clamped from sample {k}");
            }
            say(line);
        }
        Command::Identify => {
            let (cfg, out) = load_config(cli)?;
            let o = pipeline::identify(&cfg, &out, cli.workers.map(|n| n as usize))?;
            let s = &o.summary;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            say(format!(
                "{:<9} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>5} {:>4}",
                "interval", "samples", "tau1_s", "tau2_s", "c1_f", "c2_f", "rs_mohm", "rmse_mV", "iter", "conv"
            ));
            for i in &s.intervals {
                say(format!(
                    "{:<9} {:>7} {:>9.3} {:>9.2} {:>9.1} {:>9.1} {:>9.3} {:>9.3} {:>5} {:>4}",
                    i.interval,
                    i.samples,
                    i.tau1_s,
                    i.tau2_s,
                    i.c1_f,
                    i.c2_f,
                    i.rs_ohm * 1e3,
                    i.rmse_v * 1e3,
                    i.iterations,
                    if i.converged { "yes" } else { "no" }
                ));
            }
            if !s.all_converged {
                let failed: Vec<&str> = s
                    .intervals
                    .iter()
                    .filter(|i| !i.converged)
                    .map(|i| i.interval.as_str())
                    .collect();
                eprintln!("error: {}", Error::Convergence(failed.join(", ")));
                return Ok(2);
            }
        }
        Command::Morris => {
            let (cfg, out) = load_config(cli)?;
            let o = pipeline::morris(&cfg, &out, &overrides(cli, cfg.morris.seed)?)?;
            print_ranking(cli, &o);
        }
        Command::Validate => {
            let (cfg, out) = load_config(cli)?;
            let o = pipeline::validate(&cfg, &out)?;
            say(format!(
                "{:<6} {:<22} {:>9} {:>9}",
                "case", "fixed", "rmse_mV", "max_mV"
            ));
            for c in &o.summary.cases {
                let fixed = if c.fixed.is_empty() {
                    "-".to_string()
                } else {
                    c.fixed.join(",")
                };
                say(format!(
                    "{:<6} {:<22} {:>9} {:>9}",
                    c.case,
                    fixed,
                    mv(c.rmse_v),
                    mv(c.max_abs_v)
                ));
            }
            if !o.summary.ordering_holds {
                eprintln!("warning: rmse does not increase from case1 to case3");
            }
        }
        Command::DemoLinear => {
            let (base, out) = match &cli.config {
                Some(_) => {
                    let (cfg, out) = load_config(cli)?;
                    (Some(cfg), out)
                }
                None => (None, cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
            };
            let cfg = base.unwrap_or_default();
            let ov = overrides(cli, cfg.morris.seed)?;
            let mut mc: MorrisConfig = cfg.morris_config(ov.seed);
            if let Some(n) = ov.runs {
                mc.n_runs = n;
            }
            if let Some(d) = ov.delta {
                mc.delta = d;
            }
            if let Some(r) = ov.reduction {
                mc.reduction = r.into();
            }
            let o = pipeline::demo_linear(&out, &mc, ov.workers.or(cfg.morris.workers))?;
            let r = &o.report;
            say(format!(
                "{:<9} {:>12} {:>14} {:>8} {:>12}",
                "parameter", "morris_mean", "enhanced_mean", "stdev", "n_effective"
            ));
            for (name, c) in r.parameters.iter().zip(&r.intervals[0].cells) {
                say(format!(
                    "{:<9} {:>12} {:>14} {:>8} {:>12}",
                    name, c.morris_mean, c.enhanced_mean, c.stdev, c.n_effective
                ));
            }
        }
        Command::GenData { noise } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
            let spec = DatasetSpec {
                seed: seed(cli, None)?,
                noise_rms: *noise,
                ..DatasetSpec::default()
            };
            let (_, s) = pipeline::gen_data(&out, &spec)?;
            say(format!(
                "wrote {} (training {} samples, validation {}, excitation {}); run with --config {}",
                out.display(),
                s.training_samples,
                s.validation_samples,
                s.excitation_samples,
                out.join(pipeline::RUN_CONFIG_FILE).display()
            ));
        }
    }
    Ok(0)
}

fn print_ranking(cli: &Cli, o: &MorrisOutcome) {
    if cli.quiet {
        return;
    }
    let r = &o.report;
    let mut header = format!("{:<9}", "interval");
    for p in &r.parameters {
        header += &format!(" {:>9}", p);
    }
    println!("{header}   ranking (enhanced mean, mV)");
    for (iv, ranked) in r.intervals.iter().zip(&o.summary.intervals) {
        let mut line = format!("{:<9}", iv.label);
        for c in &iv.cells {
            line += &format!(" {:>9}", mv(c.enhanced_mean));
        }
        println!("{line}   {}", ranked.ranking.join(" > "));
    }
    let overall: Vec<&str> = o.summary.overall.iter().map(|e| e.parameter.as_str()).collect();
    println!("overall: {}", overall.join(" > "));
}
