//! The quantum channel (whole-pulse loss, dephasing) and the
//! photon-number-splitting adversary.
//!
//! Eve replaces the lossy line with a lossless one, reads the photon number
//! of every pulse without touching its polarization, splits a photon off
//! every multi-photon pulse, and blocks just enough single-photon pulses that
//! the count Bob sees still looks like the original loss. The one thing the
//! number measurement cannot leave intact is the ancilla's time-bin
//! superposition: reading the photon's position in time collapses it.

use std::collections::BTreeSet;

use rand::Rng;
use thiserror::Error;

use crate::sources::{PulseRecord, TimeBin};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("loss {0} is outside [0, 1]")]
    InvalidLoss(f64),
    #[error("dephasing {0} is outside [0, 0.5]")]
    InvalidDephasing(f64),
    #[error("no nonvacuum pulses were forwarded")]
    NoForwardedPulses,
}

/// Channel parameters: whole-pulse loss probability and the dephasing level
/// `d`, defined as the dark-port probability an ideal ancilla would show
/// downstream with no eavesdropper (0.5 = complete dephasing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    loss: f64,
    dephasing: f64,
}

impl ChannelConfig {
    pub fn new(loss: f64, dephasing: f64) -> Result<Self, ChannelError> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(ChannelError::InvalidLoss(loss));
        }
        if !(0.0..=0.5).contains(&dephasing) {
            return Err(ChannelError::InvalidDephasing(dephasing));
        }
        Ok(Self { loss, dephasing })
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn transmittivity(&self) -> f64 {
        1.0 - self.loss
    }

    pub fn dephasing(&self) -> f64 {
        self.dephasing
    }
}

/// Eavesdropper strategy. `PnsQnd` assumes a lossless replacement line and
/// counterfeits `replaced_loss` (worst case: the channel's own loss) by
/// blocking pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EveStrategy {
    Absent,
    PnsQnd { replaced_loss: f64 },
}

/// Eve's bookkeeping. Stored photons are bookkeeping only: one per split
/// pulse, readable after basis reveal, so `known_bit_indices` holds the pulse
/// indices whose key bits she will learn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackLedger {
    pub pulses_seen: u64,
    pub pulses_blocked: u64,
    pub pulses_split: u64,
    pub photons_stored: u64,
    pub known_bit_indices: BTreeSet<usize>,
}

impl AttackLedger {
    pub fn pulses_forwarded(&self) -> u64 {
        self.pulses_seen - self.pulses_blocked
    }
}

/// Whole-pulse loss: with probability `loss` the pulse vanishes entirely,
/// otherwise it passes unchanged. Per-photon attenuation is deliberately not
/// modeled; the decoy analysis is defined in terms of whole pulses.
pub fn apply_loss(
    pulse: PulseRecord,
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> Option<PulseRecord> {
    if rng.random::<f64>() < cfg.loss() {
        None
    } else {
        Some(pulse)
    }
}

/// Environmental dephasing of a superposed ancilla: sets the coherence to
/// `1 - 2d` so that the downstream middle-bin dark-port probability equals
/// `d`. Pulses without a superposed time bin pass unchanged.
pub fn apply_dephasing(pulse: PulseRecord, cfg: &ChannelConfig) -> PulseRecord {
    match pulse.timebin {
        TimeBin::Superposed { .. } => PulseRecord {
            timebin: TimeBin::Superposed {
                coherence: 1.0 - 2.0 * cfg.dephasing(),
            },
            ..pulse
        },
        _ => pulse,
    }
}

/// Runs Eve's PNS/QND attack over a pulse stream.
///
/// Multi-photon pulses are forwarded with one photon removed and their index
/// recorded as known-after-basis-reveal. Single-photon pulses are blocked
/// independently at a rate chosen so the expected forwarded nonvacuum count
/// equals `(1 - replaced_loss) x (nonvacuum pulses sent)`; when the
/// multi-photon pulses alone exceed that budget the excess is shed by
/// blocking multi-photon pulses proportionally instead. Vacuum pulses pass
/// through as vacuum. Any forwarded pulse that carried a time-bin
/// superposition leaves collapsed to an equal mix of early and late.
///
/// Blocking targets the expected count rather than an exact per-batch quota,
/// and the choice among singles is uniform and blind to everything but the
/// measured photon number.
pub fn eve_process_stream(
    pulses: Vec<PulseRecord>,
    strategy: &EveStrategy,
    rng: &mut impl Rng,
) -> (Vec<Option<PulseRecord>>, AttackLedger) {
    let replaced_loss = match strategy {
        EveStrategy::Absent => {
            // Absent means exactly that: the stream is untouched and the
            // ledger stays empty. Channel effects are applied elsewhere.
            return (pulses.into_iter().map(Some).collect(), AttackLedger::default());
        }
        EveStrategy::PnsQnd { replaced_loss } => *replaced_loss,
    };
    assert!(
        (0.0..=1.0).contains(&replaced_loss),
        "replaced_loss {replaced_loss} outside [0, 1]"
    );

    let n_single = pulses.iter().filter(|p| p.photon_count == 1).count();
    let n_multi = pulses.iter().filter(|p| p.is_multiphoton()).count();
    let n_nonvacuum = n_single + n_multi;
    let budget = (1.0 - replaced_loss) * n_nonvacuum as f64;

    let (single_block, multi_block) = if budget >= n_multi as f64 {
        let keep = budget - n_multi as f64;
        let sb = if n_single == 0 {
            0.0
        } else {
            (1.0 - keep / n_single as f64).clamp(0.0, 1.0)
        };
        (sb, 0.0)
    } else {
        // Least-advantage fallback: every single is blocked and multi-photon
        // pulses are shed class-blind until the budget fits.
        (1.0, 1.0 - budget / n_multi as f64)
    };

    let mut ledger = AttackLedger::default();
    let mut forwarded = Vec::with_capacity(pulses.len());
    for (index, pulse) in pulses.into_iter().enumerate() {
        ledger.pulses_seen += 1;
        if pulse.is_vacuum() {
            forwarded.push(Some(pulse));
            continue;
        }
        let block_probability = if pulse.is_multiphoton() {
            multi_block
        } else {
            single_block
        };
        if rng.random::<f64>() < block_probability {
            ledger.pulses_blocked += 1;
            forwarded.push(None);
            continue;
        }
        let mut output = pulse;
        if output.is_multiphoton() {
            output.photon_count -= 1;
            ledger.pulses_split += 1;
            ledger.photons_stored += 1;
            ledger.known_bit_indices.insert(index);
        }
        if matches!(output.timebin, TimeBin::Superposed { .. }) {
            // The number measurement localizes the photon in time.
            output.timebin = if rng.random::<f64>() < 0.5 {
                TimeBin::CollapsedEarly
            } else {
                TimeBin::CollapsedLate
            };
        }
        forwarded.push(Some(output));
    }
    (forwarded, ledger)
}

/// Monte Carlo estimate of the intensity-class shares Eve's attack leaves
/// among forwarded nonvacuum decoy pulses. Returns `(share1, share2)`.
pub fn eve_decoy_fractions(
    cfg: &crate::sources::DecoyIntensityConfig,
    loss: f64,
    n_pulses: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64), ChannelError> {
    use crate::sources::{emit_decoy_pulse, IntensityClass, SourceClass};

    if !(0.0..=1.0).contains(&loss) {
        return Err(ChannelError::InvalidLoss(loss));
    }
    let pulses: Vec<PulseRecord> = (0..n_pulses)
        .map(|i| emit_decoy_pulse(cfg, rng, i as u64))
        .collect();
    let strategy = EveStrategy::PnsQnd { replaced_loss: loss };
    let (forwarded, _) = eve_process_stream(pulses, &strategy, rng);

    let mut class1 = 0u64;
    let mut class2 = 0u64;
    for pulse in forwarded.into_iter().flatten() {
        if pulse.is_vacuum() {
            continue;
        }
        match pulse.source_class {
            SourceClass::Decoy(IntensityClass::One) => class1 += 1,
            SourceClass::Decoy(IntensityClass::Two) => class2 += 1,
            _ => {}
        }
    }
    let total = class1 + class2;
    if total == 0 {
        return Err(ChannelError::NoForwardedPulses);
    }
    Ok((class1 as f64 / total as f64, class2 as f64 / total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{
        emit_heralded_ancilla, DecoyIntensityConfig, SourceClass, WlpSourceConfig,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn wlp_pulse(count: u32, time: u64) -> PulseRecord {
        PulseRecord {
            source_class: SourceClass::Signal { mu: 0.5 },
            photon_count: count,
            polarization: Some(crate::sources::Polarization::H),
            timebin: TimeBin::None,
            emission_time: time,
        }
    }

    #[test]
    fn config_bounds_are_enforced() {
        assert!(matches!(
            ChannelConfig::new(1.5, 0.0),
            Err(ChannelError::InvalidLoss(_))
        ));
        assert!(matches!(
            ChannelConfig::new(0.5, 0.6),
            Err(ChannelError::InvalidDephasing(_))
        ));
        let cfg = ChannelConfig::new(0.25, 0.1).unwrap();
        assert_eq!(cfg.transmittivity(), 0.75);
    }

    #[test]
    fn lossless_channel_passes_everything() {
        let cfg = ChannelConfig::new(0.0, 0.0).unwrap();
        let mut r = rng(1);
        for _ in 0..100 {
            assert!(apply_loss(wlp_pulse(1, 0), &cfg, &mut r).is_some());
        }
    }

    #[test]
    fn opaque_channel_drops_everything() {
        let cfg = ChannelConfig::new(1.0, 0.0).unwrap();
        let mut r = rng(2);
        for _ in 0..100 {
            assert!(apply_loss(wlp_pulse(1, 0), &cfg, &mut r).is_none());
        }
    }

    #[test]
    fn half_loss_passes_half_the_stream() {
        let cfg = ChannelConfig::new(0.5, 0.0).unwrap();
        let mut r = rng(3);
        let n = 1_000_000usize;
        let passed = (0..n)
            .filter(|_| apply_loss(wlp_pulse(1, 0), &cfg, &mut r).is_some())
            .count();
        let freq = passed as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * se, "pass fraction {freq}");
    }

    #[test]
    fn dephasing_rewrites_coherence() {
        let mut r = rng(4);
        let ancilla = emit_heralded_ancilla(&mut r, 0);
        for (d, expected) in [(0.0, 1.0), (0.1, 0.8), (0.5, 0.0)] {
            let cfg = ChannelConfig::new(0.0, d).unwrap();
            let out = apply_dephasing(ancilla, &cfg);
            match out.timebin {
                TimeBin::Superposed { coherence } => {
                    assert!((coherence - expected).abs() < 1e-15)
                }
                other => panic!("unexpected timebin {other:?}"),
            }
        }
    }

    #[test]
    fn dephasing_ignores_pulses_without_superposition() {
        let cfg = ChannelConfig::new(0.0, 0.3).unwrap();
        let pulse = wlp_pulse(2, 7);
        assert_eq!(apply_dephasing(pulse, &cfg), pulse);
    }

    #[test]
    fn absent_eve_is_an_identity() {
        let pulses = vec![wlp_pulse(0, 0), wlp_pulse(1, 1), wlp_pulse(3, 2)];
        let (out, ledger) = eve_process_stream(pulses.clone(), &EveStrategy::Absent, &mut rng(5));
        assert_eq!(out, pulses.into_iter().map(Some).collect::<Vec<_>>());
        assert_eq!(ledger, AttackLedger::default());
    }

    #[test]
    fn all_vacuum_stream_passes_untouched() {
        let pulses: Vec<_> = (0..50).map(|t| wlp_pulse(0, t)).collect();
        let strategy = EveStrategy::PnsQnd { replaced_loss: 0.5 };
        let (out, ledger) = eve_process_stream(pulses.clone(), &strategy, &mut rng(6));
        assert_eq!(out, pulses.into_iter().map(Some).collect::<Vec<_>>());
        assert_eq!(ledger.pulses_seen, 50);
        assert_eq!(ledger.pulses_blocked, 0);
        assert_eq!(ledger.pulses_split, 0);
        assert!(ledger.known_bit_indices.is_empty());
    }

    #[test]
    fn zero_replaced_loss_blocks_nothing_but_still_splits() {
        let pulses = vec![wlp_pulse(1, 0), wlp_pulse(2, 1), wlp_pulse(5, 2)];
        let strategy = EveStrategy::PnsQnd { replaced_loss: 0.0 };
        let (out, ledger) = eve_process_stream(pulses, &strategy, &mut rng(7));
        assert_eq!(ledger.pulses_blocked, 0);
        assert_eq!(ledger.pulses_split, 2);
        assert_eq!(ledger.photons_stored, 2);
        assert_eq!(out[1].unwrap().photon_count, 1);
        assert_eq!(out[2].unwrap().photon_count, 4);
        assert_eq!(
            ledger.known_bit_indices.iter().copied().collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn forwarded_count_matches_counterfeited_loss() {
        let cfg = WlpSourceConfig::new(0.5).unwrap();
        let mut source_rng = rng(8);
        let pulses: Vec<PulseRecord> = (0..1_000_000u64)
            .map(|t| {
                crate::sources::emit_signal_pulse(
                    &cfg,
                    crate::sources::Polarization::H,
                    &mut source_rng,
                    t,
                )
            })
            .collect();
        let n_nonvacuum = pulses.iter().filter(|p| !p.is_vacuum()).count();
        let n_single = pulses.iter().filter(|p| p.photon_count == 1).count();
        let n_multi = n_nonvacuum - n_single;

        let strategy = EveStrategy::PnsQnd { replaced_loss: 0.5 };
        let (out, ledger) = eve_process_stream(pulses, &strategy, &mut rng(9));
        let forwarded_nonvacuum = out
            .iter()
            .flatten()
            .filter(|p| !p.is_vacuum())
            .count();

        // Expected forwarded count and its spread under the blocking policy.
        let target = 0.5 * n_nonvacuum as f64;
        let keep = (target - n_multi as f64) / n_single as f64;
        let sd = (n_single as f64 * keep * (1.0 - keep)).sqrt();
        assert!(
            (forwarded_nonvacuum as f64 - target).abs() <= 3.0 * sd,
            "forwarded {forwarded_nonvacuum} vs target {target}"
        );

        // Split share among forwarded nonvacuum pulses vs. an independent
        // straightforward re-simulation of the policy.
        let split_share = ledger.pulses_split as f64 / forwarded_nonvacuum as f64;
        let mut oracle_rng = rng(10);
        let mut oracle_forwarded = 0u64;
        let mut oracle_split = 0u64;
        for _ in 0..n_multi {
            oracle_forwarded += 1;
            oracle_split += 1;
        }
        for _ in 0..n_single {
            if oracle_rng.random::<f64>() < keep {
                oracle_forwarded += 1;
            }
        }
        let oracle_share = oracle_split as f64 / oracle_forwarded as f64;
        let se = (split_share * (1.0 - split_share) / forwarded_nonvacuum as f64).sqrt();
        assert!(
            (split_share - oracle_share).abs() <= 3.0 * se,
            "split share {split_share} vs oracle {oracle_share}"
        );
    }

    #[test]
    fn qnd_preserves_polarization_and_never_adds_photons() {
        let cfg = DecoyIntensityConfig::new(0.1, 0.5, 0.7).unwrap();
        let mut source_rng = rng(11);
        let pulses: Vec<PulseRecord> = (0..10_000u64)
            .map(|t| crate::sources::emit_decoy_pulse(&cfg, &mut source_rng, t))
            .collect();
        let strategy = EveStrategy::PnsQnd { replaced_loss: 0.3 };
        let (out, _) = eve_process_stream(pulses.clone(), &strategy, &mut rng(12));
        for (sent, received) in pulses.iter().zip(out.iter()) {
            if let Some(received) = received {
                assert_eq!(received.polarization, sent.polarization);
                assert!(received.photon_count <= sent.photon_count);
                if sent.is_multiphoton() {
                    assert_eq!(received.photon_count, sent.photon_count - 1);
                }
            }
        }
    }

    #[test]
    fn qnd_collapses_forwarded_ancillas() {
        let mut source_rng = rng(13);
        let pulses: Vec<PulseRecord> = (0..20_000u64)
            .map(|t| emit_heralded_ancilla(&mut source_rng, t))
            .collect();
        let strategy = EveStrategy::PnsQnd { replaced_loss: 0.0 };
        let (out, _) = eve_process_stream(pulses, &strategy, &mut rng(14));
        let mut early = 0u64;
        let mut late = 0u64;
        for pulse in out.into_iter().flatten() {
            match pulse.timebin {
                TimeBin::CollapsedEarly => early += 1,
                TimeBin::CollapsedLate => late += 1,
                other => panic!("ancilla left uncollapsed: {other:?}"),
            }
        }
        let total = (early + late) as f64;
        let freq = early as f64 / total;
        let se = (0.25 / total).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * se, "early fraction {freq}");
    }

    #[test]
    fn decoy_fractions_without_blocking_match_sent_shares() {
        let cfg = DecoyIntensityConfig::new(0.1, 0.5, 0.7).unwrap();
        let (share1, share2) =
            eve_decoy_fractions(&cfg, 0.0, 1_000_000, &mut rng(15)).unwrap();
        // With no loss there is no blocking budget, so the nonvacuum mix is
        // exactly what the source emitted.
        let nv1 = 0.7 * crate::sources::nonvacuum_probability(0.1);
        let nv2 = 0.3 * crate::sources::nonvacuum_probability(0.5);
        let expected = nv1 / (nv1 + nv2);
        let se = (expected * (1.0 - expected) / 180_000.0).sqrt();
        assert!((share1 - expected).abs() <= 3.0 * se, "share1 {share1}");
        assert!((share1 + share2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_intensities_leave_shares_unchanged() {
        let cfg = DecoyIntensityConfig::new(0.3, 0.3, 0.7).unwrap();
        let (share1, _) = eve_decoy_fractions(&cfg, 0.5, 1_000_000, &mut rng(16)).unwrap();
        let received = 1_000_000.0 * 0.5 * crate::sources::nonvacuum_probability(0.3);
        let se = (0.7 * 0.3 / received).sqrt();
        assert!((share1 - 0.7).abs() <= 3.0 * se, "share1 {share1}");
    }

    #[test]
    fn fully_blocked_stream_is_reported() {
        let cfg = DecoyIntensityConfig::new(0.1, 0.5, 0.7).unwrap();
        assert_eq!(
            eve_decoy_fractions(&cfg, 1.0, 10_000, &mut rng(17)),
            Err(ChannelError::NoForwardedPulses)
        );
    }
}
