//! Batch estimators of unknown test-time class priors.
//!
//! All three estimators maximize over the simplex the log-likelihood
//! `l(P) = sum_i log sum_k P_k a_ik` of the test rows, where `a_ik` is the
//! posterior-to-training-prior ratio held by [`RatioMatrix`]:
//!
//! * [`Method::Em`]: the fixed-point iteration that alternates posterior
//!   re-weighting with averaging. It never leaves the simplex and never
//!   decreases `l`.
//! * [`Method::PgaMle`]: constant-step projected gradient ascent on `l`.
//! * [`Method::PgaMap`]: the same ascent on `l` plus the log-density of a
//!   symmetric Dirichlet with concentration `alpha >= 1`, which keeps every
//!   coordinate away from zero.
//!
//! When `l` has several maximizers no global search is attempted: the result
//! is whatever the chosen method reaches from its initialization.

mod objective;
mod split;

pub use objective::{
    log_likelihood, log_likelihood_gradient, log_posterior_gradient, log_posterior_objective,
    DIRICHLET_GRADIENT_FLOOR,
};
pub use split::{split_likelihood_diagnostic, SplitDiagnostic};

use crate::data::{
    max_abs_diff, EstimationTrace, ObjectiveKind, PriorVector, RatioMatrix, Termination, TraceRecorder,
};
use crate::error::{Error, Result};
use crate::simplex::project_to_simplex;

/// Default learning rate is this value divided by the number of rows.
pub const DEFAULT_LEARNING_RATE_SCALE: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Em,
    PgaMle,
    PgaMap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialEstimate {
    /// Start from the training prior stored in the ratio matrix.
    TrainPrior,
    Given(PriorVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Dirichlet concentration; read only by [`Method::PgaMap`].
    pub alpha: f64,
    /// Gradient step; `None` means `0.1 / N`.
    pub learning_rate: Option<f64>,
    pub max_iterations: usize,
    /// Stop once the max-abs change of the estimate drops below this.
    pub tolerance: f64,
    pub initial: InitialEstimate,
    /// Keep the estimate of every iteration in the trace instead of every 10th.
    pub full_trace: bool,
}

impl EstimatorConfig {
    fn with_method(method: Method, alpha: f64) -> Self {
        EstimatorConfig {
            method,
            alpha,
            learning_rate: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            initial: InitialEstimate::TrainPrior,
            full_trace: false,
        }
    }

    pub fn em() -> Self {
        Self::with_method(Method::Em, 1.0)
    }

    pub fn pga_mle() -> Self {
        Self::with_method(Method::PgaMle, 1.0)
    }

    pub fn pga_map(alpha: f64) -> Self {
        Self::with_method(Method::PgaMap, alpha)
    }

    pub fn learning_rate(mut self, rate: f64) -> Self {
        self.learning_rate = Some(rate);
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn initial(mut self, init: PriorVector) -> Self {
        self.initial = InitialEstimate::Given(init);
        self
    }

    pub fn full_trace(mut self, on: bool) -> Self {
        self.full_trace = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::PgaMap && !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be a finite value >= 1, got {}", self.alpha)));
        }
        if let Some(rate) = self.learning_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidConfig(format!("learning rate must be positive, got {rate}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }

    fn objective_kind(&self) -> ObjectiveKind {
        match self.method {
            Method::PgaMap => ObjectiveKind::LogPosteriorUnnormalized,
            Method::Em | Method::PgaMle => ObjectiveKind::LogLikelihood,
        }
    }

    fn dirichlet_alpha(&self) -> f64 {
        match self.method {
            Method::PgaMap => self.alpha,
            Method::Em | Method::PgaMle => 1.0,
        }
    }
}

/// Final estimate and the trace of the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub prior: PriorVector,
    pub trace: EstimationTrace,
}

/// Runs the configured method.
pub fn estimate(ratios: &RatioMatrix, config: &EstimatorConfig) -> Result<Estimate> {
    run(ratios, config, &mut |_, _, _| {})
}

/// EM: `P_k <- (1/N) sum_i P_k a_ik / sum_j P_j a_ij`.
pub fn estimate_em(ratios: &RatioMatrix, config: &EstimatorConfig) -> Result<Estimate> {
    if config.method != Method::Em {
        return Err(Error::InvalidConfig("estimate_em needs method EM".into()));
    }
    estimate(ratios, config)
}

/// Projected gradient ascent: `P <- project(P + lambda * gradient)`.
pub fn estimate_pga(ratios: &RatioMatrix, config: &EstimatorConfig) -> Result<Estimate> {
    if config.method == Method::Em {
        return Err(Error::InvalidConfig("estimate_pga needs method PGA_MLE or PGA_MAP".into()));
    }
    estimate(ratios, config)
}

fn initial_estimate(ratios: &RatioMatrix, config: &EstimatorConfig) -> Result<PriorVector> {
    let init = match &config.initial {
        InitialEstimate::TrainPrior => ratios.train_prior().clone(),
        InitialEstimate::Given(p) => p.clone(),
    };
    if init.len() != ratios.cols() {
        return Err(Error::DimensionMismatch { context: "estimation", expected: ratios.cols(), found: init.len() });
    }
    Ok(init)
}

/// Shared iteration loop. `observe` sees every iterate with its index and
/// max-abs change, including iteration 0 (the initial estimate).
pub(crate) fn run(
    ratios: &RatioMatrix,
    config: &EstimatorConfig,
    observe: &mut dyn FnMut(usize, &PriorVector, f64),
) -> Result<Estimate> {
    config.validate()?;
    if ratios.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let n = ratios.rows() as f64;
    let alpha = config.dirichlet_alpha();
    let learning_rate = config.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE_SCALE / n);
    let mut recorder = TraceRecorder::new(config.objective_kind(), ratios.cols(), config.full_trace);

    let mut current = initial_estimate(ratios, config)?;
    let mut change = 0.0;
    let mut iteration = 0;
    let termination = loop {
        let pass = objective::evaluate(ratios, current.values(), true);
        let objective = match objective::dirichlet_log_density(current.values(), alpha) {
            Ok(prior_term) => prior_term + pass.log_likelihood,
            Err(_) => f64::NEG_INFINITY,
        };
        recorder.push(iteration, &current, objective, change);
        observe(iteration, &current, change);

        if iteration > 0 && change < config.tolerance {
            break Termination::Converged;
        }
        if iteration == config.max_iterations {
            break Termination::MaxIterations;
        }

        let next = match config.method {
            Method::Em => {
                if let Some(row) = pass.zero_support_row {
                    return Err(Error::MinusInfinity { row });
                }
                let weights = current.values().iter().zip(&pass.gradient).map(|(p, g)| p * g / n).collect();
                PriorVector::from_weights_unchecked(weights)
            }
            Method::PgaMle | Method::PgaMap => {
                let mut gradient = pass.gradient;
                objective::add_dirichlet_gradient(&mut gradient, current.values(), alpha);
                if pass.zero_support_row.is_some() || gradient.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteGradient { iteration });
                }
                let stepped: Vec<f64> = current
                    .values()
                    .iter()
                    .zip(&gradient)
                    .map(|(p, g)| p + learning_rate * g)
                    .collect();
                project_to_simplex(&stepped).map_err(|_| Error::NonFiniteGradient { iteration })?
            }
        };
        change = max_abs_diff(next.values(), current.values());
        current = next;
        iteration += 1;
    };
    let trace = recorder.finish(termination, &current);
    Ok(Estimate { prior: current, trace })
}
