use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tailq::harness::{self, CommandOutput, ExperimentConfig, Format, Overrides};
use tailq::{Error, Result};

#[derive(Parser)]
#[command(name = "tailq", version, about = "Extreme sojourn-time quantiles of a non-preemptive priority queue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CE-tuned IS estimate for every target, plus configured baselines.
    Estimate(Common),
    /// Replicated comparison against the baselines.
    Benchmark(Common),
    /// Predecessor classes of long-delayed jobs under each measure.
    BlockingProfile(Common),
    /// Sized per-class SLA run with independent validation.
    Sla8(Common),
    /// Cross-entropy search only.
    CeSearch(Common),
    /// Tail probability at a given level.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Level γ; defaults to each target's reference quantile.
        #[arg(long)]
        gamma: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Sets m1 = m2 (and the profile cycle count).
    #[arg(long)]
    cycles: Option<usize>,
    /// Target class, 1-based.
    #[arg(long)]
    class: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// A level or `auto`.
    #[arg(long)]
    gamma_max: Option<String>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        let gamma_max = self.gamma_max.as_deref().map(harness::parse_gamma_max).transpose()?;
        Overrides {
            seed: self.seed,
            cycles: self.cycles,
            class: self.class,
            p: self.p,
            gamma_max,
            batches: self.batches,
            workers: self.workers,
        }
        .apply(&mut cfg)?;
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn emit(cfg: &ExperimentConfig, common: &Common, out: &CommandOutput) -> Result<()> {
    let mut stdout = io::stdout().lock();
    let format = match common.format {
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Csv) => Format::Csv,
        None => Format::Csv,
    };
    match &cfg.out {
        Some(dir) => {
            for (stem, table) in &out.tables {
                let path = table.write(dir, stem, format)?;
                put(&mut stdout, &table.to_text())?;
                put(&mut stdout, &format!("wrote {}\n\n", path.display()))?;
            }
            let stem = format!("{}_timings", out.tables[0].0);
            out.timings.write(dir, &stem, format)?;
        }
        None if common.format.is_some() => {
            for (_, table) in &out.tables {
                put(&mut stdout, &table.render(format))?;
            }
        }
        None => {
            for (_, table) in &out.tables {
                put(&mut stdout, &format!("{}\n", table.to_text()))?;
            }
            put(&mut stdout, &out.timings.to_text())?;
        }
    }
    Ok(())
}

/// Writes to stdout; a closed pipe is not an error.
fn put(out: &mut impl Write, text: &str) -> Result<()> {
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, gamma) = match &cli.command {
        Command::Validate { common, gamma } => (common, *gamma),
        Command::Estimate(c)
        | Command::Benchmark(c)
        | Command::BlockingProfile(c)
        | Command::Sla8(c)
        | Command::CeSearch(c) => (c, None),
    };
    let cfg = common.load()?;
    let out = match &cli.command {
        Command::Estimate(_) => harness::estimate(&cfg)?,
        Command::Benchmark(_) => harness::benchmark(&cfg)?,
        Command::BlockingProfile(_) => harness::blocking_profile(&cfg)?,
        Command::Sla8(_) => harness::sla8(&cfg)?,
        Command::CeSearch(_) => harness::ce_search(&cfg)?,
        Command::Validate { .. } => harness::validate(&cfg, gamma)?,
    };
    emit(&cfg, common, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
