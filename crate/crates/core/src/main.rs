use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ensy::bench::BenchConfig;
use ensy::cli::{cmd_augment, cmd_bench, cmd_evaluate, cmd_inspect, Evaluator, RunConfig, RunFile};
use ensy::validator::ClassifierSpec;
use ensy::Error;

#[derive(Parser)]
#[command(
    name = "ensy",
    version,
    about = "Validator-filtered oversampling for imbalanced tabular data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-class counts and shares.
    Inspect {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Split, augment the training half, write CSVs and a JSON report.
    Augment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// ensy | ros | smote-nc
        #[arg(long)]
        method: Option<String>,
        /// `balance` or `class=count,...`
        #[arg(long)]
        plan: Option<String>,
        #[arg(long)]
        test_frac: Option<f64>,
        #[arg(long)]
        stratified: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Validator for ensy, e.g. `forest:trees=50,depth=8`
        #[arg(long)]
        validator: Option<String>,
        /// Optional evaluation classifier for the augmented training set
        #[arg(long)]
        classifier: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Score a classifier (or an external prediction file) on a test CSV.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value = "knn:k=5")]
        classifier: String,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded two-class benchmark: raw vs ros vs smote-nc vs ensy.
    Bench {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        minority_frac: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Inspect { data, schema } => {
            print!("{}", cmd_inspect(&data, &schema)?);
            Ok(0)
        }
        Command::Augment {
            config,
            data,
            schema,
            method,
            plan,
            test_frac,
            stratified,
            seed,
            out,
            validator,
            classifier,
            k,
        } => {
            let base = match config {
                Some(path) => RunFile::load(path)?,
                None => RunFile::default(),
            };
            let flags = RunFile {
                data,
                schema,
                method,
                plan,
                seed,
                out,
                test_frac,
                stratified: stratified.then_some(true),
                validator,
                classifier,
                smote_k: k,
                ..RunFile::default()
            };
            let cfg = RunConfig::try_from(base.merged(flags))?;
            let outcome = cmd_augment(&cfg)?;
            for c in &outcome.report.classes {
                eprintln!(
                    "{}: requested {} accepted {} rejected {} attempts {} rate {:.4}",
                    c.class, c.requested, c.accepted, c.rejected, c.attempts, c.acceptance_rate
                );
            }
            eprintln!("wall time {:.3}s", outcome.report.wall_time.as_secs_f64());
            if let Some(r) = &outcome.evaluation {
                print!("{}", r.to_table());
            }
            match outcome.starvation() {
                Some(e) => {
                    eprintln!(
                        "error: {e} (partial outputs written to {})",
                        cfg.out.display()
                    );
                    Ok(e.exit_code())
                }
                None => Ok(0),
            }
        }
        Command::Evaluate {
            train,
            test,
            schema,
            classifier,
            predictions,
            seed,
            out,
        } => {
            let evaluator = match predictions {
                Some(p) => Evaluator::Predictions(p),
                None => Evaluator::Builtin(classifier.parse::<ClassifierSpec>()?.with_seed(seed)),
            };
            let r = cmd_evaluate(&train, &test, &schema, &evaluator, out.as_deref())?;
            print!("{}", r.to_table());
            Ok(0)
        }
        Command::Bench {
            seed,
            minority_frac,
            n,
            out,
        } => {
            if !(minority_frac > 0.0 && minority_frac < 1.0) {
                return Err(Error::InvalidConfig(
                    "minority fraction must lie in (0, 1)".into(),
                ));
            }
            let cfg = BenchConfig {
                seed,
                n,
                minority_frac,
                ..BenchConfig::default()
            };
            let result = cmd_bench(&cfg, &out)?;
            print!("{}", result.to_table());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
