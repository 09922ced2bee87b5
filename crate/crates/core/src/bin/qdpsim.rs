use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qdpsim::cli::{
    compare_strategies, resolve_seed, run_scenario, CliError, ExperimentConfig, OutputFormat,
    OutputSpec, RunReport, SEED_ENV,
};
use qdpsim::engine::StrategyConfig;

#[derive(Parser)]
#[command(
    name = "qdpsim",
    version,
    about = "Quantum dynamic programming simulator"
)]
struct Args {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(clap::Args)]
struct Overrides {
    /// Overrides the config seed (and QDPSIM_SEED).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the query count of qdp and hybrid strategies.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with the config's strategy.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the config's `strategies` list side by side.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print unfolding and QDP cost tables.
    Cost {
        #[arg(long, default_value = "grover")]
        scenario: String,
        #[arg(long = "L")]
        l: u64,
        #[arg(long = "N")]
        n: u32,
        #[arg(long, default_value_t = 64)]
        m: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

fn override_m(s: &mut StrategyConfig, new_m: usize) {
    match s {
        StrategyConfig::Qdp { m, .. } | StrategyConfig::Hybrid { m, .. } => *m = new_m,
        _ => {}
    }
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    let env = std::env::var(SEED_ENV).ok();
    cfg.seed = resolve_seed(cfg.seed, o.seed, env.as_deref())?;
    if let Some(p) = &o.output {
        let format = o
            .format
            .map(Into::into)
            .or(cfg.output.as_ref().map(|x| x.format))
            .unwrap_or_default();
        cfg.output = Some(OutputSpec {
            path: p.clone(),
            format,
        });
    } else if let (Some(f), Some(out)) = (o.format, cfg.output.as_mut()) {
        out.format = f.into();
    }
    if let Some(m) = o.m {
        if let Some(s) = cfg.strategy.as_mut() {
            override_m(s, m);
        }
        for s in cfg.strategies.iter_mut() {
            override_m(s, m);
        }
    }
    Ok(cfg)
}

fn emit(report: &RunReport, cfg: &ExperimentConfig, format: Option<Format>) {
    if cfg.output.is_none() {
        match format.map(Into::into).unwrap_or_default() {
            OutputFormat::Csv => print!("{}", report.to_csv()),
            OutputFormat::Json => print!("{}", report.to_json()),
        }
    }
    for c in &report.checks {
        eprintln!(
            "check {}: measured {:.6e} bound {:.6e} {}",
            c.name,
            c.measured,
            c.bound,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
}

fn execute(args: Args) -> Result<(), CliError> {
    match args.cmd {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let report = run_scenario(&cfg)?;
            emit(&report, &cfg, overrides.format);
        }
        Command::Compare { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let report = compare_strategies(&cfg, &cfg.strategies)?;
            emit(&report, &cfg, overrides.format);
        }
        Command::Cost {
            scenario,
            l,
            n,
            m,
            output,
            format,
        } => {
            if scenario != "grover" {
                return Err(CliError::Config(format!(
                    "--scenario: cost tables exist for grover only, got {:?}",
                    scenario
                )));
            }
            let text = serde_json::json!({
                "version": 1,
                "scenario": "cost",
                "params": {"L": l, "N": n, "m": m},
            })
            .to_string();
            let mut cfg = ExperimentConfig::from_json(&text)?;
            cfg.output = output.map(|path| OutputSpec {
                path,
                format: format.map(Into::into).unwrap_or_default(),
            });
            let report = run_scenario(&cfg)?;
            emit(&report, &cfg, format);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdpsim: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
