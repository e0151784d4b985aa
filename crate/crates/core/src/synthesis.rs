//! Synthetic, exactly calibrated classifier outputs under a controlled prior
//! shift.
//!
//! Observations are symbols from a finite alphabet of size `M`. Each class has
//! a fixed distribution over symbols (a row of the likelihood table), and the
//! "classifier" outputs the exact training-time posterior of the observed
//! symbol. Because everything is discrete, the Bayes-optimal accuracy under
//! any test prior can be computed by enumeration.
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`. Uniform reals are the top 53 bits of a `u64` scaled by
//! `2^-53`; categorical draws use the inverse CDF in class order. Per sample,
//! the stream is consumed as: label uniform, outlier uniform, then either one
//! symbol uniform or `K` Gamma draws for an outlier row.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::{LabelVector, PosteriorMatrix, PriorVector};
use crate::error::{Error, Result};

pub const DEFAULT_EXP_RATE: f64 = 0.3;

/// Shapes of class priors used for training and test distributions. Shapes
/// decrease with the class index unless reversed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorFamily {
    Uniform,
    /// `p_k ∝ exp(-rate * k)`.
    Exponential { rate: f64, reversed: bool },
    /// `p_k ∝ K - k`.
    Linear { reversed: bool },
    /// The first `ceil(fraction * K)` classes share `mass` equally, the rest
    /// share `1 - mass`.
    Peaked { fraction: f64, mass: f64 },
}

impl PriorFamily {
    pub fn prior(&self, classes: usize) -> Result<PriorVector> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        let k = classes as f64;
        let (weights, reversed): (Vec<f64>, bool) = match *self {
            PriorFamily::Uniform => return PriorVector::uniform(classes),
            PriorFamily::Exponential { rate, reversed } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidModel(format!("exponential rate must be >= 0, got {rate}")));
                }
                ((0..classes).map(|i| (-rate * i as f64).exp()).collect(), reversed)
            }
            PriorFamily::Linear { reversed } => ((0..classes).map(|i| k - i as f64).collect(), reversed),
            PriorFamily::Peaked { fraction, mass } => {
                if !(fraction > 0.0 && fraction <= 1.0) || !(0.0..=1.0).contains(&mass) {
                    return Err(Error::InvalidModel(format!(
                        "peaked family needs fraction in (0, 1] and mass in [0, 1], got {fraction}, {mass}"
                    )));
                }
                let head = ((fraction * k).ceil() as usize).clamp(1, classes);
                let tail = classes - head;
                let weights = (0..classes)
                    .map(|i| match (i < head, tail) {
                        (true, 0) => 1.0 / head as f64,
                        (true, _) => mass / head as f64,
                        (false, _) => (1.0 - mass) / tail as f64,
                    })
                    .collect();
                (weights, false)
            }
        };
        let mut weights = weights;
        if reversed {
            weights.reverse();
        }
        Ok(PriorVector::from_weights_unchecked(weights))
    }
}

impl FromStr for PriorFamily {
    type Err = String;

    /// `uniform`, `exp[:RATE]`, `exp-rev[:RATE]`, `linear`, `linear-rev`,
    /// `peaked:FRACTION:MASS`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or("");
        let args: Vec<&str> = parts.collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number {t:?} in prior family {s:?}"));
        match (name, args.as_slice()) {
            ("uniform", []) => Ok(PriorFamily::Uniform),
            ("exp" | "exp-rev", []) => Ok(PriorFamily::Exponential { rate: DEFAULT_EXP_RATE, reversed: name == "exp-rev" }),
            ("exp" | "exp-rev", [rate]) => Ok(PriorFamily::Exponential { rate: num(rate)?, reversed: name == "exp-rev" }),
            ("linear", []) => Ok(PriorFamily::Linear { reversed: false }),
            ("linear-rev", []) => Ok(PriorFamily::Linear { reversed: true }),
            ("peaked", [fraction, mass]) => Ok(PriorFamily::Peaked { fraction: num(fraction)?, mass: num(mass)? }),
            _ => Err(format!(
                "unknown prior family {s:?} (expected uniform, exp[:RATE], exp-rev[:RATE], linear, linear-rev, peaked:FRACTION:MASS)"
            )),
        }
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorFamily::Uniform => write!(f, "uniform"),
            PriorFamily::Exponential { rate, reversed } => {
                write!(f, "{}:{rate}", if *reversed { "exp-rev" } else { "exp" })
            }
            PriorFamily::Linear { reversed } => write!(f, "{}", if *reversed { "linear-rev" } else { "linear" }),
            PriorFamily::Peaked { fraction, mass } => write!(f, "peaked:{fraction}:{mass}"),
        }
    }
}

/// Class-conditional symbol distributions plus the training prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    classes: usize,
    symbols: usize,
    /// K x M, row-major; row `k` is the symbol distribution of class `k`.
    likelihood: Vec<f64>,
    train_prior: PriorVector,
    seed: u64,
}

impl SyntheticModel {
    /// Builds a model from an explicit K x M likelihood table.
    pub fn from_table(likelihood: Vec<Vec<f64>>, train_prior: PriorVector, seed: u64) -> Result<Self> {
        let classes = likelihood.len();
        if classes != train_prior.len() {
            return Err(Error::DimensionMismatch { context: "synthesis", expected: classes, found: train_prior.len() });
        }
        let symbols = likelihood.first().map_or(0, Vec::len);
        if symbols < classes {
            return Err(Error::InvalidModel(format!("need at least as many symbols ({symbols}) as classes ({classes})")));
        }
        for (k, row) in likelihood.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != symbols || row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("likelihood row {k} is not a distribution")));
            }
        }
        Ok(SyntheticModel { classes, symbols, likelihood: likelihood.concat(), train_prior, seed })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_prior(&self) -> &PriorVector {
        &self.train_prior
    }

    /// Symbol distribution of class `k`.
    pub fn likelihood(&self, k: usize) -> &[f64] {
        &self.likelihood[k * self.symbols..(k + 1) * self.symbols]
    }

    /// Exact training-time posterior of every symbol, M rows of K entries.
    /// Symbols that no class can emit get the training prior.
    pub fn posterior_table(&self) -> Vec<Vec<f64>> {
        (0..self.symbols)
            .map(|m| {
                let joint: Vec<f64> = (0..self.classes)
                    .map(|k| self.likelihood(k)[m] * self.train_prior.values()[k])
                    .collect();
                let total: f64 = joint.iter().sum();
                if total > 0.0 {
                    joint.iter().map(|j| j / total).collect()
                } else {
                    self.train_prior.values().to_vec()
                }
            })
            .collect()
    }
}

/// Random model: class `k` puts `separability` on symbol `k` and spreads the
/// rest over the other `symbols - 1` symbols with seeded random weights.
pub fn make_model(
    classes: usize,
    symbols: usize,
    separability: f64,
    train_prior: PriorVector,
    seed: u64,
) -> Result<SyntheticModel> {
    if !(separability > 0.0 && separability <= 1.0) {
        return Err(Error::BadSeparability(separability));
    }
    if train_prior.len() != classes {
        return Err(Error::DimensionMismatch { context: "synthesis", expected: classes, found: train_prior.len() });
    }
    if symbols < classes {
        return Err(Error::InvalidModel(format!("need at least as many symbols ({symbols}) as classes ({classes})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = 1.0 - separability;
    let table = (0..classes)
        .map(|k| {
            // 1 - u lies in (0, 1], so every off-diagonal weight is positive.
            let spread: Vec<f64> = (0..symbols - 1).map(|_| 1.0 - rng.random::<f64>()).collect();
            let total: f64 = spread.iter().sum();
            let mut others = spread.into_iter().map(|w| rest * w / total);
            (0..symbols)
                .map(|m| if m == k { separability } else { others.next().unwrap_or(0.0) })
                .collect()
        })
        .collect();
    SyntheticModel::from_table(table, train_prior, seed)
}

/// Rows whose posterior is drawn from a symmetric Dirichlet, independent of
/// the sample's label and symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contamination {
    pub fraction: f64,
    pub concentration: f64,
}

impl Contamination {
    pub const NONE: Contamination = Contamination { fraction: 0.0, concentration: 1.0 };

    pub fn new(fraction: f64) -> Self {
        Contamination { fraction, concentration: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub posteriors: PosteriorMatrix,
    pub labels: LabelVector,
    /// Emitted symbol per row; `None` for outlier rows.
    pub symbols: Vec<Option<usize>>,
}

/// Inverse-CDF draw; never returns an index with zero probability.
fn categorical(probabilities: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            cumulative += p;
            if u < cumulative {
                return i;
            }
        }
    }
    last_positive
}

/// Draws `n` labelled rows without contamination.
pub fn sample_testset(model: &SyntheticModel, test_prior: &PriorVector, n: usize, seed: u64) -> Result<SyntheticSample> {
    sample_contaminated(model, test_prior, n, Contamination::NONE, seed)
}

/// For each row: label from `test_prior`, then either an outlier row (with
/// probability `contamination.fraction`) or a symbol from the label's
/// likelihood row, reported through its exact training-time posterior.
pub fn sample_contaminated(
    model: &SyntheticModel,
    test_prior: &PriorVector,
    n: usize,
    contamination: Contamination,
    seed: u64,
) -> Result<SyntheticSample> {
    if test_prior.len() != model.classes {
        return Err(Error::DimensionMismatch {
            context: "synthesis",
            expected: model.classes,
            found: test_prior.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&contamination.fraction) {
        return Err(Error::InvalidModel(format!("outlier fraction must lie in [0, 1], got {}", contamination.fraction)));
    }
    let gamma = Gamma::new(contamination.concentration, 1.0).map_err(|_| {
        Error::InvalidModel(format!("outlier concentration must be positive, got {}", contamination.concentration))
    })?;
    let table = model.posterior_table();
    let k = model.classes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    let mut symbols = Vec::with_capacity(n);
    for _ in 0..n {
        let label = categorical(test_prior.values(), rng.random::<f64>());
        labels.push(label);
        if rng.random::<f64>() < contamination.fraction {
            let draws: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            if total > 0.0 && total.is_finite() {
                data.extend(draws.iter().map(|d| d / total));
            } else {
                data.extend(std::iter::repeat_n(1.0 / k as f64, k));
            }
            symbols.push(None);
        } else {
            let symbol = categorical(model.likelihood(label), rng.random::<f64>());
            data.extend_from_slice(&table[symbol]);
            symbols.push(Some(symbol));
        }
    }
    Ok(SyntheticSample {
        posteriors: PosteriorMatrix::from_flat_unchecked(n, k, data),
        labels: LabelVector::new(labels, k)?,
        symbols,
    })
}

/// Expected top-1 accuracy of the classifier corrected with the true test
/// prior: `sum_m max_k likelihood(k, m) * test_prior(k)`.
pub fn bayes_optimal_accuracy(model: &SyntheticModel, test_prior: &PriorVector) -> Result<f64> {
    if test_prior.len() != model.classes {
        return Err(Error::DimensionMismatch {
            context: "synthesis",
            expected: model.classes,
            found: test_prior.len(),
        });
    }
    Ok((0..model.symbols)
        .map(|m| {
            (0..model.classes)
                .map(|k| model.likelihood(k)[m] * test_prior.values()[k])
                .fold(0.0, f64::max)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{empirical_prior, marginalized_prior};

    #[test]
    fn full_separability_gives_identity_table() {
        let m = make_model(4, 4, 1.0, PriorVector::uniform(4).unwrap(), 3).unwrap();
        for k in 0..4 {
            let expected: Vec<f64> = (0..4).map(|j| if j == k { 1.0 } else { 0.0 }).collect();
            assert_eq!(m.likelihood(k), expected.as_slice());
        }
        assert_eq!(bayes_optimal_accuracy(&m, &PriorVector::uniform(4).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn two_by_two_table() {
        let m = make_model(2, 2, 0.8, PriorVector::uniform(2).unwrap(), 9).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(m.likelihood(0), &[0.8, 0.2]));
        assert!(close(m.likelihood(1), &[0.2, 0.8]));
        let half = PriorVector::uniform(2).unwrap();
        assert!((bayes_optimal_accuracy(&m, &half).unwrap() - 0.8).abs() < 1e-15);
        let delta = PriorVector::delta(2, 0).unwrap();
        assert!((bayes_optimal_accuracy(&m, &delta).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_model() {
        let p = PriorFamily::Linear { reversed: false }.prior(5).unwrap();
        let a = make_model(5, 9, 0.6, p.clone(), 42).unwrap();
        let b = make_model(5, 9, 0.6, p.clone(), 42).unwrap();
        let c = make_model(5, 9, 0.6, p, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for k in 0..5 {
            assert!(a.likelihood(k).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn bad_inputs() {
        let u = PriorVector::uniform(3).unwrap();
        assert!(matches!(make_model(3, 3, 0.0, u.clone(), 0), Err(Error::BadSeparability(_))));
        assert!(matches!(make_model(3, 3, 1.5, u.clone(), 0), Err(Error::BadSeparability(_))));
        assert!(make_model(3, 2, 0.5, u.clone(), 0).is_err());
        let m = make_model(3, 3, 0.5, u, 0).unwrap();
        assert!(sample_testset(&m, &PriorVector::uniform(2).unwrap(), 10, 0).is_err());
        assert!(sample_contaminated(&m, m.train_prior(), 10, Contamination::new(1.5), 0).is_err());
    }

    #[test]
    fn one_hot_posteriors_at_full_separability() {
        let m = make_model(3, 3, 1.0, PriorFamily::Linear { reversed: false }.prior(3).unwrap(), 1).unwrap();
        let test = PriorFamily::Exponential { rate: 1.0, reversed: true }.prior(3).unwrap();
        let s = sample_testset(&m, &test, 200, 5).unwrap();
        for (row, &label) in s.posteriors.iter_rows().zip(s.labels.labels()) {
            let expected: Vec<f64> = (0..3).map(|j| if j == label { 1.0 } else { 0.0 }).collect();
            assert_eq!(row, expected.as_slice());
        }
        assert_eq!(marginalized_prior(&s.posteriors).unwrap(), empirical_prior(&s.labels).unwrap());
    }

    #[test]
    fn rows_are_exact_posteriors_of_their_symbol() {
        let m = make_model(4, 7, 0.5, PriorFamily::Exponential { rate: 0.5, reversed: false }.prior(4).unwrap(), 2).unwrap();
        let table = m.posterior_table();
        let s = sample_contaminated(&m, &PriorVector::uniform(4).unwrap(), 500, Contamination::new(0.2), 8).unwrap();
        let mut outliers = 0;
        for (i, sym) in s.symbols.iter().enumerate() {
            match sym {
                Some(sym) => assert_eq!(s.posteriors.row(i), table[*sym].as_slice()),
                None => outliers += 1,
            }
            assert!((s.posteriors.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((60..=140).contains(&outliers), "{outliers}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = make_model(3, 5, 0.7, PriorVector::uniform(3).unwrap(), 4).unwrap();
        let a = sample_contaminated(&m, m.train_prior(), 100, Contamination::new(0.3), 77).unwrap();
        let b = sample_contaminated(&m, m.train_prior(), 100, Contamination::new(0.3), 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn family_shapes_and_parsing() {
        let lin = PriorFamily::Linear { reversed: false }.prior(4).unwrap();
        let expect = [0.4, 0.3, 0.2, 0.1];
        assert!(lin.values().iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
        let peaked = PriorFamily::Peaked { fraction: 0.1, mass: 0.99 }.prior(20).unwrap();
        assert!((peaked.values()[0] - 0.495).abs() < 1e-15);
        assert!((peaked.values()[19] - 0.01 / 18.0).abs() < 1e-15);
        let rev = PriorFamily::Exponential { rate: 0.5, reversed: true }.prior(3).unwrap();
        assert!(rev.values()[2] > rev.values()[0]);

        for s in ["uniform", "exp:0.5", "exp-rev:0.25", "linear", "linear-rev", "peaked:0.1:0.99"] {
            let f: PriorFamily = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert_eq!("exp".parse::<PriorFamily>().unwrap(), PriorFamily::Exponential { rate: DEFAULT_EXP_RATE, reversed: false });
        assert!("gauss".parse::<PriorFamily>().is_err());
        assert!("peaked:0.1".parse::<PriorFamily>().is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(32))]

        #[test]
        fn rows_with_the_same_symbol_average_to_its_posterior(
            seed in 0u64..1000,
            separability in 0.2f64..1.0,
            outliers in 0.0f64..0.5,
        ) {
            let m = make_model(3, 6, separability, PriorFamily::Linear { reversed: true }.prior(3).unwrap(), seed).unwrap();
            let s = sample_contaminated(&m, &PriorVector::uniform(3).unwrap(), 200, Contamination::new(outliers), seed).unwrap();
            let table = m.posterior_table();
            for symbol in 0..6 {
                let rows: Vec<usize> = (0..200).filter(|&i| s.symbols[i] == Some(symbol)).collect();
                if rows.is_empty() {
                    continue;
                }
                let avg = marginalized_prior(&s.posteriors.select_rows(&rows)).unwrap();
                for (a, b) in avg.values().iter().zip(&table[symbol]) {
                    proptest::prop_assert!((a - b).abs() <= 1e-15);
                }
            }
            for k in 0..3 {
                let sum: f64 = m.likelihood(k).iter().sum();
                proptest::prop_assert!((sum - 1.0).abs() <= 1e-9);
            }
        }
    }
}
