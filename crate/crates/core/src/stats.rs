//! Symmetric hypothesis testing between two Bernoulli distributions.
//!
//! A detector repeatedly observes a binary outcome whose single-trial success
//! probability is `p` under the null hypothesis and `q` under the alternative.
//! The Chernoff distance `C(p, q)` governs how fast the best symmetric test
//! drives its error down: after `n` trials the error of a maximum-likelihood
//! decision is at most `(1/2)·e^(-n·C)`, which inverts to the number of trials
//! needed for a target error level.
//!
//! All logarithms are natural; distances are in nats.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    /// Both hypotheses are deterministic with different supports; a single
    /// trial distinguishes them and the Chernoff exponent is infinite.
    #[error("hypotheses are perfectly distinguishable in one trial")]
    PerfectlyDistinguishable,
    /// Zero Chernoff distance: no number of trials separates the hypotheses.
    #[error("hypotheses are indistinguishable (zero Chernoff distance)")]
    IndistinguishableHypotheses,
    #[error("max error {0} is outside (0, 0.5)")]
    InvalidMaxError(f64),
    #[error("invalid observation: {successes} successes in {trials} trials")]
    InvalidObservation { successes: u64, trials: u64 },
}

/// Null/alternative single-trial success probabilities for a symmetric
/// binary hypothesis test.
///
/// `p` is the null-hypothesis ("bright port" / class-1) probability and `q`
/// the alternative. Complements are derived on demand so that `p + p_bar()`
/// and `q + q_bar()` are exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliHypothesisPair {
    p: f64,
    q: f64,
}

impl BernoulliHypothesisPair {
    pub fn new(p: f64, q: f64) -> Result<Self, StatsError> {
        for v in [p, q] {
            if !(0.0..=1.0).contains(&v) {
                return Err(StatsError::InvalidProbability(v));
            }
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p_bar(&self) -> f64 {
        1.0 - self.p
    }

    pub fn q_bar(&self) -> f64 {
        1.0 - self.q
    }

    fn is_degenerate_p(&self) -> bool {
        self.p == 0.0 || self.p == 1.0
    }

    fn is_degenerate_q(&self) -> bool {
        self.q == 0.0 || self.q == 1.0
    }
}

/// Outcome of a maximum-likelihood decision between the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Null,
    Alternative,
}

/// A planned fixed-sample-size test: distance, crossover threshold, trial
/// budget and the error bound it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPlan {
    pub chernoff_distance: f64,
    /// Success-fraction crossover at which the two likelihoods balance.
    /// When `p == q` there is no crossover and this holds the common value.
    pub xi: f64,
    /// Minimal trial count meeting `max_error`, or `None` when the
    /// hypotheses are indistinguishable and no trial count suffices.
    pub trials: Option<u64>,
    pub max_error: f64,
}

impl DetectionPlan {
    /// Plans a test reaching `max_error` for the given hypothesis pair.
    pub fn for_hypotheses(
        h: BernoulliHypothesisPair,
        max_error: f64,
    ) -> Result<Self, StatsError> {
        validate_max_error(max_error)?;
        let c = chernoff_distance(h)?;
        let xi = if h.p == h.q {
            h.p
        } else {
            crossover_threshold(h)?
        };
        let trials = if c > 0.0 {
            Some(trials_from_distance(c, max_error))
        } else {
            None
        };
        Ok(Self {
            chernoff_distance: c,
            xi,
            trials,
            max_error,
        })
    }
}

fn validate_max_error(max_error: f64) -> Result<(), StatsError> {
    if max_error > 0.0 && max_error < 0.5 {
        Ok(())
    } else {
        Err(StatsError::InvalidMaxError(max_error))
    }
}

fn trials_from_distance(c: f64, max_error: f64) -> u64 {
    let n = (-(2.0 * max_error).ln() / c).ceil();
    (n as u64).max(1)
}

/// Chernoff distance `C(p, q)` between the two Bernoulli distributions.
///
/// Computed as the relative entropy from the crossover type `xi` to the null
/// distribution, `xi·ln(xi/p) + (1-xi)·ln((1-xi)/(1-p))`, which at the
/// balance point equals the distance to the alternative as well, making the
/// result symmetric in `(p, q)`.
///
/// Degenerate supports take the analytic limit (`C = -ln q` for `p = 1`,
/// `C = -ln(1-q)` for `p = 0`, and symmetrically in `q`) rather than an
/// epsilon perturbation, so exact inputs give exact exponents. Two
/// deterministic distributions with different supports have infinite
/// distance and are reported as [`StatsError::PerfectlyDistinguishable`].
pub fn chernoff_distance(h: BernoulliHypothesisPair) -> Result<f64, StatsError> {
    if h.p == h.q {
        return Ok(0.0);
    }
    match (h.is_degenerate_p(), h.is_degenerate_q()) {
        (true, true) => Err(StatsError::PerfectlyDistinguishable),
        (true, false) => Ok(if h.p == 1.0 {
            -h.q.ln()
        } else {
            -h.q_bar().ln()
        }),
        (false, true) => Ok(if h.q == 1.0 {
            -h.p.ln()
        } else {
            -h.p_bar().ln()
        }),
        (false, false) => {
            let xi = crossover_interior(h);
            let xi_bar = 1.0 - xi;
            Ok(xi * (xi / h.p).ln() + xi_bar * (xi_bar / h.p_bar()).ln())
        }
    }
}

/// Crossover success fraction `xi` at which the binomial likelihoods of the
/// two hypotheses balance. Lies strictly between `p` and `q` for
/// non-degenerate pairs; degenerate supports push it to the closed boundary.
pub fn crossover_threshold(h: BernoulliHypothesisPair) -> Result<f64, StatsError> {
    if h.p == h.q {
        return Err(StatsError::IndistinguishableHypotheses);
    }
    if h.is_degenerate_p() && h.is_degenerate_q() {
        return Err(StatsError::PerfectlyDistinguishable);
    }
    if h.p == 1.0 || h.q == 1.0 {
        return Ok(1.0);
    }
    if h.p == 0.0 || h.q == 0.0 {
        return Ok(0.0);
    }
    Ok(crossover_interior(h))
}

fn crossover_interior(h: BernoulliHypothesisPair) -> f64 {
    let num = (h.q_bar() / h.p_bar()).ln();
    let den = (h.p / h.p_bar()).ln() + (h.q_bar() / h.q).ln();
    num / den
}

/// Upper bound `(1/2)·e^(-n·C(p, q))` on the symmetric-test error after `n`
/// trials.
pub fn max_error_probability(n: u64, h: BernoulliHypothesisPair) -> Result<f64, StatsError> {
    let c = chernoff_distance(h)?;
    Ok(0.5 * (-(n as f64) * c).exp())
}

/// Minimal number of trials such that the Chernoff bound reaches `max_error`,
/// `ceil(-ln(2·max_error) / C)`, with a floor of one trial.
pub fn trials_needed(h: BernoulliHypothesisPair, max_error: f64) -> Result<u64, StatsError> {
    validate_max_error(max_error)?;
    let c = chernoff_distance(h)?;
    if c == 0.0 {
        return Err(StatsError::IndistinguishableHypotheses);
    }
    Ok(trials_from_distance(c, max_error))
}

/// Maximum-likelihood decision between the hypotheses given `successes` out
/// of `trials` observations.
///
/// Compares the binomial likelihoods of the observed count (equivalently,
/// the observed success fraction against the `xi` crossover). Ties are
/// broken toward [`Hypothesis::Null`]: absent evidence we do not raise an
/// alarm.
pub fn decide_hypothesis(
    successes: u64,
    trials: u64,
    h: BernoulliHypothesisPair,
) -> Result<Hypothesis, StatsError> {
    if h.p == h.q {
        return Err(StatsError::IndistinguishableHypotheses);
    }
    if trials == 0 || successes > trials {
        return Err(StatsError::InvalidObservation { successes, trials });
    }
    let log_null = log_likelihood(h.p, successes, trials);
    let log_alt = log_likelihood(h.q, successes, trials);
    if log_null >= log_alt {
        Ok(Hypothesis::Null)
    } else {
        Ok(Hypothesis::Alternative)
    }
}

// Binomial coefficients cancel in the comparison, so only the success/failure
// factors are accumulated. A zero-probability factor with a nonzero count is
// -inf; with a zero count it contributes nothing.
fn log_likelihood(rate: f64, successes: u64, trials: u64) -> f64 {
    let failures = trials - successes;
    let mut total = 0.0;
    for (count, prob) in [(successes, rate), (failures, 1.0 - rate)] {
        if count == 0 {
            continue;
        }
        if prob == 0.0 {
            return f64::NEG_INFINITY;
        }
        total += count as f64 * prob.ln();
    }
    total
}
