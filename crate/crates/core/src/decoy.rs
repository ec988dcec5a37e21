//! Coherent decoy-state analysis: how far a number-splitting attack shifts
//! the received intensity-class mix, and how many pulses Alice must send to
//! expose the shift at a given confidence.
//!
//! The received mix is compared among nonvacuum pulses only; a vacuum pulse
//! produces no click at Bob and is indistinguishable from loss.

use thiserror::Error;

use crate::ee::{ee_pulses_needed, ProtocolError};
use crate::sources::{multi_photon_probability, nonvacuum_probability, DecoyIntensityConfig};
use crate::stats::{trials_needed, BernoulliHypothesisPair, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecoyError {
    #[error("loss {0} is outside [0, 1)")]
    InvalidLoss(f64),
    #[error("confidence {0} is outside (0.5, 1)")]
    InvalidConfidence(f64),
    #[error("no nonvacuum pulses reach the receiver under this configuration")]
    NoForwardedBudget,
    #[error("the attack leaves the received fractions unchanged (equal intensities or no loss to hide in)")]
    AttackUndetectable,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// One decoy-state detection scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyScenario {
    pub intensities: DecoyIntensityConfig,
    pub loss: f64,
    pub confidence: f64,
}

impl DecoyScenario {
    pub fn new(
        intensities: DecoyIntensityConfig,
        loss: f64,
        confidence: f64,
    ) -> Result<Self, DecoyError> {
        if !(0.0..1.0).contains(&loss) {
            return Err(DecoyError::InvalidLoss(loss));
        }
        if !(confidence > 0.5 && confidence < 1.0) {
            return Err(DecoyError::InvalidConfidence(confidence));
        }
        Ok(Self { intensities, loss, confidence })
    }
}

/// Comparison of the two schemes at one loss value. `pulses_ee` is aligned
/// with the dephasing levels the curve was built for, and `ratio` is the
/// first EE series divided by the decoy series.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyComparisonPoint {
    pub loss: f64,
    pub pulses_decoy: u64,
    pub pulses_ee: Vec<u64>,
    pub ratio: f64,
}

// Per-class emission rates of single-photon, multi-photon and nonvacuum
// pulses (per pulse sent).
struct ClassRates {
    single: [f64; 2],
    multi: [f64; 2],
    nonvacuum: [f64; 2],
}

impl ClassRates {
    fn of(cfg: &DecoyIntensityConfig) -> Self {
        let mus = [cfg.mu1(), cfg.mu2()];
        let fractions = [cfg.fraction1(), cfg.fraction2()];
        let mut rates = ClassRates {
            single: [0.0; 2],
            multi: [0.0; 2],
            nonvacuum: [0.0; 2],
        };
        for i in 0..2 {
            let multi = multi_photon_probability(mus[i]).expect("validated mean");
            let nonvacuum = nonvacuum_probability(mus[i]);
            rates.multi[i] = fractions[i] * multi;
            rates.nonvacuum[i] = fractions[i] * nonvacuum;
            rates.single[i] = fractions[i] * (nonvacuum - multi);
        }
        rates
    }

    fn total_nonvacuum(&self) -> f64 {
        self.nonvacuum[0] + self.nonvacuum[1]
    }
}

/// Per-pulse probability that a sent pulse is nonvacuum.
pub fn nonvacuum_fraction(cfg: &DecoyIntensityConfig) -> f64 {
    ClassRates::of(cfg).total_nonvacuum()
}

/// Class-1 share of the nonvacuum pulses Bob receives with no attack.
/// Whole-pulse loss is class-blind, so this equals the sent nonvacuum share.
pub fn null_received_fraction(cfg: &DecoyIntensityConfig) -> Result<f64, DecoyError> {
    let rates = ClassRates::of(cfg);
    let total = rates.total_nonvacuum();
    if total == 0.0 {
        return Err(DecoyError::NoForwardedBudget);
    }
    Ok(rates.nonvacuum[0] / total)
}

/// Closed-form expectation of the class-1 share among the pulses Eve
/// forwards.
///
/// The attack passes every multi-photon pulse, fills the remaining forward
/// budget `(1 - loss) x nonvacuum rate` with single-photon pulses drawn
/// blindly in proportion to the per-class single rates, and when the
/// multi-photon pulses alone exceed the budget sheds them proportionally
/// instead.
pub fn attack_fraction_oracle(
    cfg: &DecoyIntensityConfig,
    loss: f64,
) -> Result<f64, DecoyError> {
    if !(0.0..1.0).contains(&loss) {
        return Err(DecoyError::InvalidLoss(loss));
    }
    let rates = ClassRates::of(cfg);
    let total_nonvacuum = rates.total_nonvacuum();
    if total_nonvacuum == 0.0 {
        return Err(DecoyError::NoForwardedBudget);
    }
    if loss == 0.0 {
        // Full budget: everything passes and the mix is exactly the sent one.
        return Ok(rates.nonvacuum[0] / total_nonvacuum);
    }

    let budget = (1.0 - loss) * total_nonvacuum;
    let total_multi = rates.multi[0] + rates.multi[1];
    let total_single = rates.single[0] + rates.single[1];

    let forwarded: [f64; 2] = if budget >= total_multi {
        let singles_kept = budget - total_multi;
        let fill = |i: usize| {
            if total_single > 0.0 {
                singles_kept * rates.single[i] / total_single
            } else {
                0.0
            }
        };
        [rates.multi[0] + fill(0), rates.multi[1] + fill(1)]
    } else {
        let keep = budget / total_multi;
        [rates.multi[0] * keep, rates.multi[1] * keep]
    };

    let total = forwarded[0] + forwarded[1];
    if total <= 0.0 {
        return Err(DecoyError::NoForwardedBudget);
    }
    Ok(forwarded[0] / total)
}

/// Pulses Alice must send for one decoy-state detection at the scenario's
/// confidence: the received-pulse trial plan against the attack-shifted
/// fraction, divided by the per-pulse probability that a sent pulse is
/// received under the null channel.
pub fn decoy_pulses_needed(scenario: &DecoyScenario) -> Result<u64, DecoyError> {
    if scenario.loss == 0.0 || !scenario.intensities.has_distinct_intensities() {
        return Err(DecoyError::AttackUndetectable);
    }
    let null_share = null_received_fraction(&scenario.intensities)?;
    let attack_share = attack_fraction_oracle(&scenario.intensities, scenario.loss)?;
    let h = BernoulliHypothesisPair::new(null_share, attack_share)?;
    let trials = trials_needed(h, 1.0 - scenario.confidence)?;
    let receive_probability =
        (1.0 - scenario.loss) * nonvacuum_fraction(&scenario.intensities);
    Ok(((trials as f64 / receive_probability).ceil() as u64).max(1))
}

/// Builds the decoy-vs-EE comparison over a loss grid. Each point carries the
/// decoy pulse count, one EE pulse count per dephasing level, and the ratio
/// of the first EE series to the decoy series.
pub fn comparison_curve(
    loss_grid: &[f64],
    dephasing_levels: &[f64],
    intensities: &DecoyIntensityConfig,
    confidence: f64,
) -> Result<Vec<DecoyComparisonPoint>, DecoyError> {
    assert!(
        !dephasing_levels.is_empty(),
        "at least one dephasing level is required"
    );
    loss_grid
        .iter()
        .map(|&loss| {
            let scenario = DecoyScenario::new(*intensities, loss, confidence)?;
            let pulses_decoy = decoy_pulses_needed(&scenario)?;
            let pulses_ee = dephasing_levels
                .iter()
                .map(|&d| Ok(ee_pulses_needed(d, loss, confidence)?))
                .collect::<Result<Vec<u64>, DecoyError>>()?;
            let ratio = pulses_ee[0] as f64 / pulses_decoy as f64;
            Ok(DecoyComparisonPoint { loss, pulses_decoy, pulses_ee, ratio })
        })
        .collect()
}
