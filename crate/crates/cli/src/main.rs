use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dsag_cli::predict::{self, Mode, PredictOptions};
use dsag_cli::{config, ingest, parse_rate, profiles, runtrace, CliError, CliResult};
use dsag_core::harness::coded_bound_trace;
use dsag_core::Experiment;

#[derive(Parser)]
#[command(name = "dsag", version, about = "Straggler-tolerant optimization on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-worker latency profiles to a task-latency trace.
    Fit {
        trace: PathBuf,
        /// Only use rows from the last this many seconds (needs timestamp_s).
        #[arg(long)]
        window: Option<f64>,
        /// Read a CSV column as a trace field, e.g. `--map lat=total_latency_s`.
        #[arg(long = "map", value_name = "COLUMN=FIELD")]
        map: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the latency of waiting for the w fastest workers.
    Predict {
        profiles: PathBuf,
        #[arg(long)]
        w: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::OrderStat)]
        mode: ModeArg,
        /// Iterations simulated in iterative mode.
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        /// Monte Carlo samples in order-stat mode.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Extra wait after the w-th result, relative to the iteration time.
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pool all workers into one shared latency distribution.
        #[arg(long)]
        iid: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulated experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add fresh_i, p_i, comm_i, comp_i columns for every worker.
        #[arg(long)]
        per_worker: bool,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rescale a gradient-descent trace to an idealized coded scheme.
    CodedBound {
        /// Trace written by `run --per-worker` for method gd.
        trace: PathBuf,
        /// Code rate in (0, 1], as a decimal or a fraction like 45/49.
        #[arg(long)]
        rate: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    OrderStat,
    Iterative,
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path.display().to_string(), e))
}

/// Writes CSV output to `--out` or stdout, then the summary to stdout, or to
/// stderr when stdout carries the CSV.
fn emit(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> CliResult<()>,
    summary: &str,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(|e| CliError::io(path.display().to_string(), e))?;
            print!("{summary}");
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit { trace, window, map, out } => {
            let map = ingest::ColumnMap::parse(&map)?;
            let mut records = ingest::read_trace(open(&trace)?, &map)
                .map_err(|e| CliError::Usage(format!("{}: {e}", trace.display())))?;
            if let Some(w) = window {
                records = profiles::apply_window(records, w)?;
            }
            let fitted = profiles::fit_profiles(&records)?;
            let degenerate = fitted.iter().filter(|p| p.degenerate).count();
            let mut summary = format!("fitted {} worker(s) from {} row(s)\n", fitted.len(), records.len());
            if degenerate > 0 {
                summary.push_str(&format!("{degenerate} worker(s) with degenerate variance\n"));
            }
            emit(out.as_deref(), |w| profiles::write_profiles(&fitted, w), &summary)
        }
        Command::Predict {
            profiles: path,
            w,
            mode,
            iterations,
            samples,
            margin,
            seed,
            iid,
            out,
        } => {
            let profs = profiles::read_profiles(open(&path)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let opts = PredictOptions {
                w,
                mode: match mode {
                    ModeArg::OrderStat => Mode::OrderStat,
                    ModeArg::Iterative => Mode::Iterative,
                },
                iterations,
                samples,
                margin,
                seed,
                iid,
            };
            let pred = predict::predict(&profs, &opts)?;
            let mut summary = format!("mean latency per iteration: {:.9e} s\n", pred.mean_latency());
            if iid {
                let het = predict::predict_with(&profs, &opts)?;
                let (a, b) = (pred.mean_latency(), het.mean_latency());
                summary.push_str(&format!(
                    "heterogeneous prediction: {b:.9e} s, i.i.d. differs by {:+.2}%\n",
                    100.0 * (a - b) / b
                ));
            }
            emit(out.as_deref(), |wr| predict::write_prediction(&pred, &opts, wr), &summary)
        }
        Command::Run {
            config: path,
            out,
            per_worker,
            seed,
        } => {
            let mut cfg = config::load_config(&path)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let trace = Experiment::new(cfg)?.run()?;
            let summary = runtrace::summary(&trace);
            emit(out.as_deref(), |w| runtrace::write_run_trace(&trace, per_worker, w), &summary)
        }
        Command::CodedBound { trace, rate, out } => {
            let rate = parse_rate(&rate)?;
            let gd = runtrace::read_run_trace(open(&trace)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", trace.display())))?;
            if gd.num_workers == 0 {
                return Err(CliError::usage(
                    "trace lacks per-worker latency columns; write it with `run --per-worker`",
                ));
            }
            let coded = coded_bound_trace(&gd, rate)?;
            let summary = format!(
                "waits for {} of {} workers; simulated time {:.6} s (gradient descent: {:.6} s)\n",
                dsag_core::harness::coded_wait_count(rate, gd.num_workers),
                gd.num_workers,
                coded.total_time(),
                gd.total_time()
            );
            emit(out.as_deref(), |w| runtrace::write_run_trace(&coded, true, w), &summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
