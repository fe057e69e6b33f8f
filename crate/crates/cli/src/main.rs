use std::path::PathBuf;
use std::process::ExitCode;

use abcmle::gradcheck::{check_model_gradients, DEFAULT_STEP, DEFAULT_TOLERANCE};
use abcmle::{build_model, simulate, Kernel, ModelOptions, Streams};
use abcmle_cli::config::Mode;
use abcmle_cli::output::{fmt_f64, version};
use abcmle_cli::{run_experiment, CliError, CliResult, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abcmle", version = version(), about = "Noisy-ABC maximum likelihood experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Run even if the config is marked disabled.
        #[arg(long)]
        force: bool,
    },
    /// Compare analytic model gradients with finite differences.
    CheckGradients { config: PathBuf },
    /// Probability integral transform check at the config's theta0.
    Pit { config: PathBuf },
    /// Print a simulated series, one observation per line.
    Simulate {
        model: String,
        /// Parameter values followed by the series length and the seed.
        #[arg(required = true, num_args = 3.., allow_negative_numbers = true)]
        args: Vec<String>,
        #[arg(long)]
        with_drift: bool,
    },
}

fn report_run(cfg: &ExperimentConfig) -> CliResult<i32> {
    let report = run_experiment(cfg)?;
    for o in &report.outcomes {
        if let Err(e) = &o.result {
            eprintln!("replicate {}: {e}", o.index);
        }
    }
    println!(
        "{}: {} of {} replicates finished; results in {}",
        cfg.name,
        report.outcomes.len() - report.failed(),
        report.outcomes.len(),
        report.dir.display()
    );
    Ok(report.exit_code())
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run { config, force } => {
            let cfg = ExperimentConfig::load(&config)?;
            if !cfg.enabled && !force {
                return Err(CliError::Config(format!("{} is disabled; pass --force to run it", config.display())));
            }
            report_run(&cfg)
        }
        Command::CheckGradients { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let model = cfg.build_model()?;
            let kernel = Kernel::for_model(model.as_ref(), cfg.epsilon)?;
            let report = check_model_gradients(
                model.as_ref(),
                &kernel,
                cfg.gradient_points,
                DEFAULT_STEP,
                DEFAULT_TOLERANCE,
                &Streams::new(cfg.seed),
            );
            println!(
                "{}: {} points, {} comparisons, max relative error {:.3e}, {} rounding-limited, {} mismatches",
                model.name(),
                report.points,
                report.comparisons,
                report.max_relative_error,
                report.roundoff_limited,
                report.mismatches.len()
            );
            for m in report.mismatches.iter().take(10) {
                eprintln!("  {m:?}");
            }
            Ok(if report.passed() { 0 } else { 3 })
        }
        Command::Pit { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.mode = Mode::PitCheck;
            cfg.validate()?;
            report_run(&cfg)
        }
        Command::Simulate { model, args, with_drift } => {
            let bad = |m: String| CliError::Config(m);
            let (theta_s, tail) = args.split_at(args.len() - 2);
            let theta = theta_s
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad parameter value {s:?}"))))
                .collect::<CliResult<Vec<_>>>()?;
            let n: usize = tail[0].parse().map_err(|_| bad(format!("bad length {:?}", tail[0])))?;
            let seed: u64 = tail[1].parse().map_err(|_| bad(format!("bad seed {:?}", tail[1])))?;
            let opts = ModelOptions {
                with_drift,
                ..ModelOptions::default()
            };
            let m = build_model(&model, &opts).map_err(|e| bad(e.to_string()))?;
            if theta.len() != m.dim_theta() {
                return Err(bad(format!("{model} needs {} parameters, got {}", m.dim_theta(), theta.len())));
            }
            m.check_theta(&theta).map_err(|e| bad(e.to_string()))?;
            let sim = simulate(m.as_ref(), &theta, n, &Streams::new(seed))?;
            let mut out = String::with_capacity(sim.y.len() * 20);
            for y in &sim.y {
                out.push_str(&fmt_f64(*y));
                out.push('\n');
            }
            print!("{out}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
