//! Command-line front end. Every subcommand reads and writes plain CSV files;
//! configuration comes from flags only.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::correction::adjust_posteriors;
use crate::data::io::{
    format_f64, read_labels, read_posteriors, read_prior, write_atomic, write_labels, write_posteriors, write_prior,
    write_trace,
};
use crate::data::{compute_ratios, EstimationTrace};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate, split_likelihood_diagnostic, EstimatorConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};
use crate::evaluation::{evaluate, format_report};
use crate::online::{online_adapt, write_snapshots, DEFAULT_REFIT_EVERY};
use crate::synthesis::{bayes_optimal_accuracy, make_model, sample_contaminated, Contamination, PriorFamily};

/// XORed into `--seed` to seed the test-set sampler; the model uses the seed
/// as given.
pub const SAMPLE_SEED_MASK: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Parser)]
#[command(name = "priorshift", version, about = "Adapt classifier posteriors to shifted class priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Re-weight posteriors from the training prior to a known test prior.
    Adjust {
        /// Posterior CSV, one row per sample.
        #[arg(long)]
        posteriors: PathBuf,
        /// Training prior, one value per line.
        #[arg(long)]
        train_prior: PathBuf,
        /// Test prior, one value per line.
        #[arg(long)]
        test_prior: PathBuf,
        /// Output posterior CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the test prior from unlabeled posteriors.
    Estimate {
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Starting estimate (default: the training prior).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Write the iteration trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output prior file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Adjust a stream of posteriors using only the rows seen so far.
    Online {
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Refit the estimate every this many rows.
        #[arg(long, default_value_t = DEFAULT_REFIT_EVERY)]
        refit_every: usize,
        /// Output posterior CSV, row i adjusted with rows before i.
        #[arg(long)]
        out: PathBuf,
        /// Output CSV of estimates, one line per refit.
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Accuracy, per-class errors and prior distances against labels.
    Evaluate {
        #[arg(long)]
        posteriors: PathBuf,
        /// Labels, one 0-based class index per line.
        #[arg(long)]
        labels: PathBuf,
        /// With --test-prior: adjust the posteriors before evaluating.
        #[arg(long, requires = "test_prior")]
        train_prior: Option<PathBuf>,
        #[arg(long, requires = "train_prior")]
        test_prior: Option<PathBuf>,
        /// Output report CSV.
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a calibrated synthetic data set under a prior shift.
    Simulate {
        #[arg(long)]
        classes: usize,
        /// Size of the observation alphabet (at least --classes).
        #[arg(long)]
        symbols: usize,
        /// Probability that a class emits its own symbol, in (0, 1].
        #[arg(long)]
        separability: f64,
        /// uniform, exp[:RATE], exp-rev[:RATE], linear, linear-rev or peaked:FRACTION:MASS.
        #[arg(long)]
        train_prior_family: PriorFamily,
        /// Same choices as --train-prior-family.
        #[arg(long)]
        test_prior_family: PriorFamily,
        /// Number of test samples.
        #[arg(long)]
        n: usize,
        /// Fraction of rows replaced by Dirichlet noise.
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        /// Concentration of the outlier Dirichlet.
        #[arg(long, default_value_t = 1.0)]
        outlier_concentration: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_posteriors: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
        #[arg(long)]
        out_train_prior: PathBuf,
        #[arg(long)]
        out_test_prior: PathBuf,
    },
    /// Fit on a random part of the rows and track the likelihood of the rest.
    DiagnoseSplit {
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Share of rows used for fitting.
        #[arg(long)]
        split_fraction: f64,
        #[arg(long)]
        seed: u64,
        /// Starting estimate (default: the training prior).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Write the trace of the fitted part here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output CSV with the mean log-likelihood of both parts per iteration.
        #[arg(long)]
        report: PathBuf,
        /// Output prior file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Em,
    PgaMle,
    PgaMap,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long)]
    posteriors: PathBuf,
    #[arg(long)]
    train_prior: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Dirichlet concentration, at least 1. Required for pga-map.
    #[arg(long, required_if_eq("method", "pga-map"))]
    alpha: Option<f64>,
    /// Gradient step for the PGA methods (default 0.1 / rows).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    /// Stop when no coordinate moves more than this.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Keep the estimate of every iteration in the trace, not every 10th.
    #[arg(long)]
    full_trace: bool,
}

impl EstimatorArgs {
    fn config(&self, init: Option<&Path>) -> Result<EstimatorConfig> {
        let mut config = match self.method {
            MethodArg::Em => EstimatorConfig::em(),
            MethodArg::PgaMle => EstimatorConfig::pga_mle(),
            MethodArg::PgaMap => EstimatorConfig::pga_map(self.alpha.unwrap_or(f64::NAN)),
        }
        .max_iterations(self.max_iters)
        .tolerance(self.tol)
        .full_trace(self.full_trace);
        if let Some(lr) = self.lr {
            config = config.learning_rate(lr);
        }
        if let Some(path) = init {
            config = config.initial(read_prior(path)?);
        }
        config.validate()?;
        Ok(config)
    }
}

fn summary(trace: &EstimationTrace) -> String {
    format!(
        "{}: {}\niterations: {}\ntermination: {}\n",
        trace.objective_kind().column_name(),
        format_f64(trace.final_objective()),
        trace.iterations(),
        trace.termination().as_str()
    )
}

fn run(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let say = |stdout: &mut dyn Write, text: &str| {
        // A closed stdout is not worth failing a run whose files are written.
        let _ = stdout.write_all(text.as_bytes());
    };
    match command {
        Command::Adjust { posteriors, train_prior, test_prior, out } => {
            let post = read_posteriors(&posteriors)?;
            let adjusted = adjust_posteriors(&post, &read_prior(&train_prior)?, &read_prior(&test_prior)?)?;
            write_posteriors(&out, &adjusted)?;
        }
        Command::Estimate { estimator, init, trace, out } => {
            let config = estimator.config(init.as_deref())?;
            let post = read_posteriors(&estimator.posteriors)?;
            let ratios = compute_ratios(&post, &read_prior(&estimator.train_prior)?)?;
            let result = estimate(&ratios, &config)?;
            write_prior(&out, &result.prior)?;
            if let Some(path) = trace {
                write_trace(&path, &result.trace)?;
            }
            say(stdout, &summary(&result.trace));
        }
        Command::Online { estimator, refit_every, out, snapshots } => {
            let config = estimator.config(None)?;
            let post = read_posteriors(&estimator.posteriors)?;
            let result = online_adapt(&post, &read_prior(&estimator.train_prior)?, &config, refit_every)?;
            write_posteriors(&out, &result.adjusted)?;
            write_snapshots(&snapshots, &result.snapshots)?;
            say(stdout, &format!("refits: {}\n", result.snapshots.len() - 1));
        }
        Command::Evaluate { posteriors, labels, train_prior, test_prior, report } => {
            let mut post = read_posteriors(&posteriors)?;
            if let (Some(train), Some(test)) = (train_prior, test_prior) {
                post = adjust_posteriors(&post, &read_prior(&train)?, &read_prior(&test)?)?;
            }
            let labels = read_labels(&labels, post.cols())?;
            let result = evaluate(&post, &labels)?;
            write_atomic(&report, &format_report(&result))?;
            say(stdout, &format!("accuracy: {}\n", format_f64(result.accuracy)));
        }
        Command::Simulate {
            classes,
            symbols,
            separability,
            train_prior_family,
            test_prior_family,
            n,
            outliers,
            outlier_concentration,
            seed,
            out_posteriors,
            out_labels,
            out_train_prior,
            out_test_prior,
        } => {
            let train = train_prior_family.prior(classes)?;
            let test = test_prior_family.prior(classes)?;
            let model = make_model(classes, symbols, separability, train, seed)?;
            let contamination = Contamination { fraction: outliers, concentration: outlier_concentration };
            let sample = sample_contaminated(&model, &test, n, contamination, seed ^ SAMPLE_SEED_MASK)?;
            write_posteriors(&out_posteriors, &sample.posteriors)?;
            write_labels(&out_labels, &sample.labels)?;
            write_prior(&out_train_prior, model.train_prior())?;
            write_prior(&out_test_prior, &test)?;
            let bayes = bayes_optimal_accuracy(&model, &test)?;
            say(stdout, &format!("bayes_optimal_accuracy: {}\n", format_f64(bayes)));
        }
        Command::DiagnoseSplit { estimator, split_fraction, seed, init, trace, report, out } => {
            let config = estimator.config(init.as_deref())?;
            let post = read_posteriors(&estimator.posteriors)?;
            let ratios = compute_ratios(&post, &read_prior(&estimator.train_prior)?)?;
            let d = split_likelihood_diagnostic(&ratios, &config, split_fraction, seed)?;
            let mut text = String::from("iteration,optimization_mean_log_likelihood,validation_mean_log_likelihood\n");
            for (a, b) in d.optimization.records().iter().zip(d.validation.records()) {
                text.push_str(&format!("{},{},{}\n", a.iteration, format_f64(a.objective), format_f64(b.objective)));
            }
            write_atomic(&report, &text)?;
            write_prior(&out, &d.estimate)?;
            if let Some(path) = trace {
                write_trace(&path, &d.optimization)?;
            }
            say(
                stdout,
                &format!(
                    "optimization_rows: {}\nvalidation_rows: {}\n{}",
                    d.optimization_rows.len(),
                    d.validation_rows.len(),
                    summary(&d.optimization)
                ),
            );
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on invalid input, 2 on usage errors.
pub fn dispatch<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", one_line(&e));
            1
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}
