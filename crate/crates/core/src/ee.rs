//! Entanglement-augmented BB84: mode scheduling, the signal exchange with
//! sifting, the time-bin interferometer at Bob's side, and eavesdropper
//! detection from bright/dark-port statistics.
//!
//! Alice and Bob independently alternate between a signal mode (plain
//! weak-laser BB84) and a decoy mode (time-bin entangled ancilla). Only slots
//! where both chose decoy mode produce interference evidence; slots where Bob
//! chose signal mode exchange key bits regardless of Alice's source, and the
//! remaining combination is wasted.

use rand::Rng;
use thiserror::Error;

use crate::channel::{
    apply_dephasing, apply_loss, AttackLedger, ChannelConfig, EveStrategy,
};
use crate::seed::ProtocolRngs;
use crate::sources::{
    emit_heralded_ancilla, emit_signal_pulse, Basis, Polarization, PulseRecord, TimeBin,
    WlpSourceConfig, ANCILLA_LAUNCH_PROBABILITY,
};
use crate::stats::{
    chernoff_distance, decide_hypothesis, trials_needed, BernoulliHypothesisPair,
    Hypothesis, StatsError,
};

/// Probability that a detected ancilla lands in the middle time bin, where
/// the short-long and long-short paths interfere. Balanced beamsplitters in
/// both labs put 1/4 of the amplitude on short-short, 1/4 on long-long and
/// 1/2 on the indistinguishable middle pair.
pub const MIDDLE_BIN_PROBABILITY: f64 = 0.5;

const PATH_SS_PROBABILITY: f64 = 0.25;
const PATH_LL_PROBABILITY: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("mode frequency {0} is outside [0, 1]")]
    InvalidFrequency(f64),
    #[error("interferometer requires an entangled ancilla pulse")]
    NotAnAncilla,
    #[error("confidence {0} is outside (0.5, 1)")]
    InvalidConfidence(f64),
    #[error("dephasing {0} is outside [0, 0.5)")]
    DephasingOutOfRange(f64),
    #[error("loss {0} is outside [0, 1)")]
    LossOutOfRange(f64),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Operating mode of one lab for one time slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatingMode {
    Signal,
    Decoy,
}

/// Alice's and Bob's decoy-mode frequencies. Signal frequencies are the
/// derived complements, so each pair sums to one exactly. Mode choices are
/// independent per slot and between the two labs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSchedule {
    alice_decoy: f64,
    bob_decoy: f64,
}

impl ModeSchedule {
    pub fn new(alice_decoy: f64, bob_decoy: f64) -> Result<Self, ProtocolError> {
        for f in [alice_decoy, bob_decoy] {
            if !(0.0..=1.0).contains(&f) {
                return Err(ProtocolError::InvalidFrequency(f));
            }
        }
        Ok(Self { alice_decoy, bob_decoy })
    }

    pub fn alice_decoy_frequency(&self) -> f64 {
        self.alice_decoy
    }

    pub fn bob_decoy_frequency(&self) -> f64 {
        self.bob_decoy
    }

    pub fn alice_signal_frequency(&self) -> f64 {
        1.0 - self.alice_decoy
    }

    pub fn bob_signal_frequency(&self) -> f64 {
        1.0 - self.bob_decoy
    }

    pub fn sample_alice(&self, rng: &mut impl Rng) -> OperatingMode {
        if rng.random::<f64>() < self.alice_decoy {
            OperatingMode::Decoy
        } else {
            OperatingMode::Signal
        }
    }

    pub fn sample_bob(&self, rng: &mut impl Rng) -> OperatingMode {
        if rng.random::<f64>() < self.bob_decoy {
            OperatingMode::Decoy
        } else {
            OperatingMode::Signal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotCategory {
    KeyExchange,
    DecoyDetection,
    Wasted,
}

/// Classifies a slot from the two mode choices. Bob in signal mode always
/// measures polarization, so both of Alice's sources yield key bits there;
/// both in decoy mode yields interference evidence; Alice-signal/Bob-decoy
/// yields nothing, since a phase measurement carries no polarization
/// information.
pub fn classify_slot(alice: OperatingMode, bob: OperatingMode) -> SlotCategory {
    match (alice, bob) {
        (_, OperatingMode::Signal) => SlotCategory::KeyExchange,
        (OperatingMode::Decoy, OperatingMode::Decoy) => SlotCategory::DecoyDetection,
        (OperatingMode::Signal, OperatingMode::Decoy) => SlotCategory::Wasted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferometerOutcome {
    ShortShort,
    LongLong,
    MiddleBright,
    MiddleDark,
}

/// Sends a surviving ancilla through Bob's interferometer.
///
/// Path classes carry fixed probabilities (SS 1/4, LL 1/4, middle 1/2). In
/// the middle bin the photon self-interferes: bright with probability
/// `(1 + coherence)/2`, or exactly 1/2 when the superposition was collapsed
/// by a number measurement (`eve_collapsed`, or a collapsed time-bin state on
/// the pulse itself).
pub fn interferometer_outcome(
    pulse: &PulseRecord,
    eve_collapsed: bool,
    rng: &mut impl Rng,
) -> Result<InterferometerOutcome, ProtocolError> {
    if !pulse.is_ancilla() {
        return Err(ProtocolError::NotAnAncilla);
    }
    let collapsed = eve_collapsed
        || matches!(pulse.timebin, TimeBin::CollapsedEarly | TimeBin::CollapsedLate);
    let bright_probability = if collapsed {
        0.5
    } else {
        match pulse.timebin {
            TimeBin::Superposed { coherence } => (1.0 + coherence) / 2.0,
            // Unreachable for well-formed ancillas; treat as collapsed.
            _ => 0.5,
        }
    };

    let path = rng.random::<f64>();
    if path < PATH_SS_PROBABILITY {
        Ok(InterferometerOutcome::ShortShort)
    } else if path < PATH_SS_PROBABILITY + PATH_LL_PROBABILITY {
        Ok(InterferometerOutcome::LongLong)
    } else if rng.random::<f64>() < bright_probability {
        Ok(InterferometerOutcome::MiddleBright)
    } else {
        Ok(InterferometerOutcome::MiddleDark)
    }
}

/// Per-slot result of a key-exchange slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyExchangeOutcome {
    SiftedBit(bool),
    BasisMismatch,
    Lost,
}

/// Per-slot result of a decoy-detection slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoyOutcome {
    ShortShort,
    LongLong,
    MiddleBright,
    MiddleDark,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    KeyExchange(KeyExchangeOutcome),
    DecoyDetection(DecoyOutcome),
    Wasted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeStats {
    pub sifted_len: usize,
    pub qber: f64,
    /// Nonvacuum pulses that reached Bob's lab, across all slot categories.
    pub received_pulses: u64,
    /// Fraction of sifted key bits whose pulse Eve split and will read after
    /// basis reveal.
    pub eve_known_bit_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeResult {
    pub sifted_key_alice: Vec<bool>,
    pub sifted_key_bob: Vec<bool>,
    pub slot_outcomes: Vec<SlotOutcome>,
    pub stats: ExchangeStats,
    pub ledger: AttackLedger,
}

impl ExchangeResult {
    /// The decoy-detection outcomes in slot order, ready for
    /// [`detect_eavesdropper`].
    pub fn decoy_outcomes(&self) -> Vec<DecoyOutcome> {
        self.slot_outcomes
            .iter()
            .filter_map(|slot| match slot {
                SlotOutcome::DecoyDetection(outcome) => Some(*outcome),
                _ => None,
            })
            .collect()
    }
}

/// Runs `n_slots` of the protocol end to end.
///
/// Alice emits according to her mode (weak laser pulse in signal mode,
/// heralded ancilla in decoy mode), the channel or Eve acts on the whole
/// stream, and Bob measures according to his mode. Basis-matched detections
/// in key-exchange slots become sifted bits on both sides.
pub fn run_bb84_exchange(
    n_slots: usize,
    source: &WlpSourceConfig,
    schedule: &ModeSchedule,
    channel: &ChannelConfig,
    eve: &EveStrategy,
    rngs: &mut ProtocolRngs,
) -> ExchangeResult {
    struct SlotPlan {
        category: SlotCategory,
        alice_bit: bool,
    }

    let mut plans = Vec::with_capacity(n_slots);
    let mut pulses = Vec::with_capacity(n_slots);
    for slot in 0..n_slots {
        let alice_mode = schedule.sample_alice(&mut rngs.schedule);
        let bob_mode = schedule.sample_bob(&mut rngs.schedule);
        let category = classify_slot(alice_mode, bob_mode);

        let pulse = match alice_mode {
            OperatingMode::Signal => {
                let basis = if rngs.source.random_bool(0.5) {
                    Basis::Diagonal
                } else {
                    Basis::Rectilinear
                };
                let bit = rngs.source.random_bool(0.5);
                emit_signal_pulse(
                    source,
                    Polarization::from_basis_bit(basis, bit),
                    &mut rngs.source,
                    slot as u64,
                )
            }
            OperatingMode::Decoy => emit_heralded_ancilla(&mut rngs.source, slot as u64),
        };
        let polarization = pulse.polarization.expect("emitted pulses carry polarization");
        plans.push(SlotPlan {
            category,
            alice_bit: polarization.bit(),
        });
        pulses.push(pulse);
    }

    // Eve's replacement line is lossless and noise-free; otherwise the real
    // channel applies loss and dephasing.
    let (arrived, ledger) = match eve {
        EveStrategy::Absent => {
            let arrived = pulses
                .into_iter()
                .map(|pulse| {
                    apply_loss(pulse, channel, &mut rngs.channel)
                        .map(|p| apply_dephasing(p, channel))
                })
                .collect::<Vec<_>>();
            (arrived, AttackLedger::default())
        }
        EveStrategy::PnsQnd { .. } => eve_process_stream_owned(pulses, eve, &mut rngs.eve),
    };

    let mut sifted_key_alice = Vec::new();
    let mut sifted_key_bob = Vec::new();
    let mut slot_outcomes = Vec::with_capacity(n_slots);
    let mut received_pulses = 0u64;
    let mut known_sifted = 0usize;

    for (slot, (plan, arrival)) in plans.iter().zip(arrived).enumerate() {
        let detected = match arrival {
            Some(pulse) if !pulse.is_vacuum() => {
                received_pulses += 1;
                Some(pulse)
            }
            _ => None,
        };

        let outcome = match plan.category {
            SlotCategory::Wasted => SlotOutcome::Wasted,
            SlotCategory::KeyExchange => match detected {
                None => SlotOutcome::KeyExchange(KeyExchangeOutcome::Lost),
                Some(pulse) => {
                    let bob_basis = if rngs.bob.random_bool(0.5) {
                        Basis::Diagonal
                    } else {
                        Basis::Rectilinear
                    };
                    let polarization =
                        pulse.polarization.expect("forwarded pulses keep polarization");
                    if polarization.basis() == bob_basis {
                        let bob_bit = polarization.bit();
                        sifted_key_alice.push(plan.alice_bit);
                        sifted_key_bob.push(bob_bit);
                        if ledger.known_bit_indices.contains(&slot) {
                            known_sifted += 1;
                        }
                        SlotOutcome::KeyExchange(KeyExchangeOutcome::SiftedBit(bob_bit))
                    } else {
                        SlotOutcome::KeyExchange(KeyExchangeOutcome::BasisMismatch)
                    }
                }
            },
            SlotCategory::DecoyDetection => match detected {
                None => SlotOutcome::DecoyDetection(DecoyOutcome::Lost),
                Some(pulse) => {
                    let outcome = interferometer_outcome(&pulse, false, &mut rngs.bob)
                        .expect("decoy-mode slots launch ancillas");
                    SlotOutcome::DecoyDetection(match outcome {
                        InterferometerOutcome::ShortShort => DecoyOutcome::ShortShort,
                        InterferometerOutcome::LongLong => DecoyOutcome::LongLong,
                        InterferometerOutcome::MiddleBright => DecoyOutcome::MiddleBright,
                        InterferometerOutcome::MiddleDark => DecoyOutcome::MiddleDark,
                    })
                }
            },
        };
        slot_outcomes.push(outcome);
    }

    let sifted_len = sifted_key_alice.len();
    let errors = sifted_key_alice
        .iter()
        .zip(&sifted_key_bob)
        .filter(|(a, b)| a != b)
        .count();
    let qber = if sifted_len == 0 {
        0.0
    } else {
        errors as f64 / sifted_len as f64
    };
    let eve_known_bit_fraction = if sifted_len == 0 {
        0.0
    } else {
        known_sifted as f64 / sifted_len as f64
    };

    ExchangeResult {
        sifted_key_alice,
        sifted_key_bob,
        slot_outcomes,
        stats: ExchangeStats {
            sifted_len,
            qber,
            received_pulses,
            eve_known_bit_fraction,
        },
        ledger,
    }
}

fn eve_process_stream_owned(
    pulses: Vec<PulseRecord>,
    eve: &EveStrategy,
    rng: &mut impl Rng,
) -> (Vec<Option<PulseRecord>>, AttackLedger) {
    crate::channel::eve_process_stream(pulses, eve, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionDecision {
    NoEavesdropper,
    EavesdropperDetected,
    Inconclusive,
}

/// Summary of one detection attempt over a decoy-outcome stream. Only middle
/// time-bin events carry interference evidence, so
/// `trials_used = middle_bright + middle_dark`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub middle_bright: u64,
    pub middle_dark: u64,
    pub ss: u64,
    pub ll: u64,
    pub chernoff: f64,
    pub trials_used: u64,
    pub decision: DetectionDecision,
}

/// Fixed-sample-size eavesdropper detection.
///
/// Under the null hypothesis a middle-bin event is bright with probability
/// `1 - d`; under a number-measuring eavesdropper it is a fair coin. The test
/// plans `trials_needed` middle events for the requested confidence, consumes
/// the stream until it has them, and applies the maximum-likelihood decision
/// to the bright count. A stream that ends early is inconclusive. At
/// `d = 0.5` the hypotheses coincide and the error is propagated.
pub fn detect_eavesdropper(
    outcomes: impl IntoIterator<Item = DecoyOutcome>,
    channel: &ChannelConfig,
    confidence: f64,
) -> Result<DetectionReport, ProtocolError> {
    if !(confidence > 0.5 && confidence < 1.0) {
        return Err(ProtocolError::InvalidConfidence(confidence));
    }
    let d = channel.dephasing();
    let h = BernoulliHypothesisPair::new(1.0 - d, 0.5)?;
    let planned = trials_needed(h, 1.0 - confidence)?;

    let mut report = DetectionReport {
        middle_bright: 0,
        middle_dark: 0,
        ss: 0,
        ll: 0,
        chernoff: chernoff_distance(h)?,
        trials_used: 0,
        decision: DetectionDecision::Inconclusive,
    };
    for outcome in outcomes {
        match outcome {
            DecoyOutcome::ShortShort => report.ss += 1,
            DecoyOutcome::LongLong => report.ll += 1,
            DecoyOutcome::Lost => {}
            DecoyOutcome::MiddleBright => report.middle_bright += 1,
            DecoyOutcome::MiddleDark => report.middle_dark += 1,
        }
        report.trials_used = report.middle_bright + report.middle_dark;
        if report.trials_used == planned {
            break;
        }
    }
    if report.trials_used == planned {
        report.decision = match decide_hypothesis(report.middle_bright, planned, h)? {
            Hypothesis::Null => DetectionDecision::NoEavesdropper,
            Hypothesis::Alternative => DetectionDecision::EavesdropperDetected,
        };
    }
    Ok(report)
}

/// Trials needed for the requested confidence at each dephasing level:
/// `n(d) = trials_needed(1 - d, 1/2)`. Nondecreasing in `d` and divergent as
/// `d` approaches 0.5.
pub fn trials_vs_dephasing_curve(
    d_grid: &[f64],
    confidence: f64,
) -> Result<Vec<(f64, u64)>, ProtocolError> {
    if !(confidence > 0.5 && confidence < 1.0) {
        return Err(ProtocolError::InvalidConfidence(confidence));
    }
    d_grid
        .iter()
        .map(|&d| {
            if !(0.0..0.5).contains(&d) {
                return Err(ProtocolError::DephasingOutOfRange(d));
            }
            let h = BernoulliHypothesisPair::new(1.0 - d, 0.5)?;
            Ok((d, trials_needed(h, 1.0 - confidence)?))
        })
        .collect()
}

/// Pulses Alice must generate for one detection at the given dephasing and
/// loss: the planned middle-bin trials divided by the per-pulse probability
/// of producing one, `(1 - loss) x middle-bin 1/2 x launch 1/2`.
pub fn ee_pulses_needed(
    dephasing: f64,
    loss: f64,
    confidence: f64,
) -> Result<u64, ProtocolError> {
    if !(0.0..0.5).contains(&dephasing) {
        return Err(ProtocolError::DephasingOutOfRange(dephasing));
    }
    if !(0.0..1.0).contains(&loss) {
        return Err(ProtocolError::LossOutOfRange(loss));
    }
    if !(confidence > 0.5 && confidence < 1.0) {
        return Err(ProtocolError::InvalidConfidence(confidence));
    }
    let h = BernoulliHypothesisPair::new(1.0 - dephasing, 0.5)?;
    let trials = trials_needed(h, 1.0 - confidence)?;
    let per_pulse = (1.0 - loss) * MIDDLE_BIN_PROBABILITY * ANCILLA_LAUNCH_PROBABILITY;
    Ok(((trials as f64 / per_pulse).ceil() as u64).max(1))
}
