//! Subcommand implementations.

use std::path::Path;

use qkdlab_core::channel::{eve_process_stream, EveStrategy};
use qkdlab_core::decoy::{
    attack_fraction_oracle, comparison_curve, null_received_fraction, DecoyScenario,
};
use qkdlab_core::ee::{
    detect_eavesdropper, run_bb84_exchange, trials_vs_dephasing_curve, DecoyOutcome,
    DetectionDecision, KeyExchangeOutcome, SlotOutcome,
};
use qkdlab_core::seed::ProtocolRngs;
use qkdlab_core::sources::{emit_decoy_pulse, IntensityClass, SourceClass};
use qkdlab_core::stats::{
    decide_hypothesis, trials_needed, BernoulliHypothesisPair, DetectionPlan, Hypothesis,
};

use crate::config::{resolve_seed_override, ScenarioConfig, SourceConfig};
use crate::output::{fmt_real, linspace, CsvWriter};
use crate::{CliError, CurveArgs};

/// Dephasing levels carried by the decoy-curve and compare outputs.
const EE_DEPHASING_LEVELS: [f64; 2] = [0.10, 0.30];

fn domain<E: std::fmt::Display>(err: E) -> CliError {
    CliError::Domain(err.to_string())
}

pub fn chernoff(p: f64, q: f64, max_error: f64) -> Result<(), CliError> {
    let pair = BernoulliHypothesisPair::new(p, q).map_err(domain)?;
    let plan = DetectionPlan::for_hypotheses(pair, max_error).map_err(domain)?;
    let trials = plan
        .trials
        .ok_or_else(|| CliError::Domain("indistinguishable hypotheses: p = q".to_string()))?;
    let bound = 0.5 * (-(trials as f64) * plan.chernoff_distance).exp();
    println!("chernoff_distance = {}", fmt_real(plan.chernoff_distance));
    println!("xi = {}", fmt_real(plan.xi));
    println!("trials_needed = {trials}");
    println!("max_error_bound = {}", fmt_real(bound));
    Ok(())
}

pub fn ee_curve(
    d_min: f64,
    d_max: f64,
    steps: usize,
    confidence: f64,
    out: &str,
) -> Result<(), CliError> {
    if steps == 0 {
        return Err(CliError::Config("steps must be positive".to_string()));
    }
    if d_min > d_max {
        return Err(CliError::Config(format!(
            "d_min {d_min} exceeds d_max {d_max}"
        )));
    }
    let grid = linspace(d_min, d_max, steps);
    let curve = trials_vs_dephasing_curve(&grid, confidence).map_err(domain)?;
    let mut csv = CsvWriter::create(Path::new(out), "dephasing,trials_needed")?;
    for (d, trials) in curve {
        csv.row(&format!("{},{trials}", fmt_real(d)))?;
    }
    csv.finish()?;
    Ok(())
}

pub fn decoy_curve(args: &CurveArgs, print_table: bool) -> Result<(), CliError> {
    if args.steps == 0 {
        return Err(CliError::Config("steps must be positive".to_string()));
    }
    if args.loss_min > args.loss_max {
        return Err(CliError::Config(format!(
            "loss_min {} exceeds loss_max {}",
            args.loss_min, args.loss_max
        )));
    }
    let intensities =
        qkdlab_core::sources::DecoyIntensityConfig::new(args.mu1, args.mu2, args.fraction1)
            .map_err(domain)?;
    let grid = linspace(args.loss_min, args.loss_max, args.steps);
    let points = comparison_curve(&grid, &EE_DEPHASING_LEVELS, &intensities, args.confidence)
        .map_err(domain)?;

    let mut csv = CsvWriter::create(
        Path::new(&args.out),
        "loss,pulses_decoy,pulses_ee_d10,pulses_ee_d30,ratio_d10",
    )?;
    for point in &points {
        csv.row(&format!(
            "{},{},{},{},{}",
            fmt_real(point.loss),
            point.pulses_decoy,
            point.pulses_ee[0],
            point.pulses_ee[1],
            fmt_real(point.ratio)
        ))?;
    }
    csv.finish()?;

    if print_table {
        println!(
            "{:>10} {:>14} {:>14} {:>14} {:>12}",
            "loss", "pulses_decoy", "pulses_ee_d10", "pulses_ee_d30", "ratio_d10"
        );
        for point in &points {
            println!(
                "{:>10} {:>14} {:>14} {:>14} {:>12}",
                fmt_real(point.loss),
                point.pulses_decoy,
                point.pulses_ee[0],
                point.pulses_ee[1],
                fmt_real(point.ratio)
            );
        }
        match points.iter().find(|p| p.pulses_decoy <= p.pulses_ee[0]) {
            Some(point) => println!(
                "crossover: decoy needs fewer pulses than EE (d=0.10) from loss {}",
                fmt_real(point.loss)
            ),
            None => println!("crossover: none within grid (EE cheaper at every point)"),
        }
        if let Some(point) = points
            .iter()
            .min_by(|a, b| (a.loss - 0.5).abs().total_cmp(&(b.loss - 0.5).abs()))
        {
            println!(
                "ee/decoy ratio at loss {}: {}",
                fmt_real(point.loss),
                fmt_real(point.ratio)
            );
        }
    }
    Ok(())
}

pub fn simulate(
    config_path: &str,
    out: &str,
    slot_log: Option<&str>,
    seed_flag: Option<u64>,
) -> Result<(), CliError> {
    let seed_override = resolve_seed_override(seed_flag)?;
    let config = ScenarioConfig::load(Path::new(config_path), seed_override)?;
    match &config.source {
        SourceConfig::Wlp(source) => simulate_wlp(&config, *source, out, slot_log),
        SourceConfig::Decoy(intensities) => {
            simulate_decoy(&config, *intensities, out, slot_log)
        }
    }
}

fn simulate_wlp(
    config: &ScenarioConfig,
    source: qkdlab_core::sources::WlpSourceConfig,
    out: &str,
    slot_log: Option<&str>,
) -> Result<(), CliError> {
    let mut rngs = ProtocolRngs::from_master(config.seed);
    let result = run_bb84_exchange(
        config.n_slots,
        &source,
        &config.schedule,
        &config.channel,
        &config.eve,
        &mut rngs,
    );
    let report = detect_eavesdropper(
        result.decoy_outcomes(),
        &config.channel,
        config.confidence,
    )
    .map_err(domain)?;

    let mut csv = CsvWriter::create(Path::new(out), "metric,value")?;
    csv.row(&format!("scenario,{}", config.scenario_name))?;
    csv.row(&format!("seed,{}", config.seed))?;
    csv.row(&format!("n_slots,{}", config.n_slots))?;
    csv.row(&format!("sifted_key_length,{}", result.stats.sifted_len))?;
    csv.row(&format!("qber,{}", fmt_real(result.stats.qber)))?;
    csv.row(&format!("received_pulses,{}", result.stats.received_pulses))?;
    csv.row(&format!(
        "eve_known_bit_fraction,{}",
        fmt_real(result.stats.eve_known_bit_fraction)
    ))?;
    csv.row(&format!("middle_bright,{}", report.middle_bright))?;
    csv.row(&format!("middle_dark,{}", report.middle_dark))?;
    csv.row(&format!("ss_events,{}", report.ss))?;
    csv.row(&format!("ll_events,{}", report.ll))?;
    csv.row(&format!("chernoff_distance,{}", fmt_real(report.chernoff)))?;
    csv.row(&format!("trials_used,{}", report.trials_used))?;
    csv.row(&format!("decision,{}", decision_name(report.decision)))?;
    csv.finish()?;

    if let Some(path) = slot_log {
        let mut log = CsvWriter::create(Path::new(path), "slot,category,detail")?;
        for (slot, outcome) in result.slot_outcomes.iter().enumerate() {
            let (category, detail) = describe_slot(outcome);
            log.row(&format!("{slot},{category},{detail}"))?;
        }
        log.finish()?;
    }

    println!("scenario: {}", config.scenario_name);
    println!("sifted key length: {}", result.stats.sifted_len);
    println!("qber: {}", fmt_real(result.stats.qber));
    println!(
        "eve known-bit fraction: {}",
        fmt_real(result.stats.eve_known_bit_fraction)
    );
    println!(
        "decision: {} (trials used: {})",
        decision_name(report.decision),
        report.trials_used
    );
    Ok(())
}

// Decoy-intensity scenario: stream pulses through the channel or the
// adversary, then test the received intensity mix against the attack-shifted
// expectation.
fn simulate_decoy(
    config: &ScenarioConfig,
    intensities: qkdlab_core::sources::DecoyIntensityConfig,
    out: &str,
    slot_log: Option<&str>,
) -> Result<(), CliError> {
    let scenario = DecoyScenario::new(intensities, config.channel.loss(), config.confidence)
        .map_err(domain)?;
    let null_share = null_received_fraction(&intensities).map_err(domain)?;
    let attack_share =
        attack_fraction_oracle(&intensities, config.channel.loss()).map_err(domain)?;
    let pair = BernoulliHypothesisPair::new(null_share, attack_share).map_err(domain)?;
    let planned = trials_needed(pair, 1.0 - config.confidence).map_err(|_| {
        CliError::Domain(
            "the attack would not shift the received fractions; detection unreachable"
                .to_string(),
        )
    })?;

    let mut rngs = ProtocolRngs::from_master(config.seed);
    let pulses: Vec<_> = (0..config.n_slots)
        .map(|t| emit_decoy_pulse(&intensities, &mut rngs.source, t as u64))
        .collect();
    let arrived = match config.eve {
        EveStrategy::Absent => pulses
            .into_iter()
            .map(|p| qkdlab_core::channel::apply_loss(p, &config.channel, &mut rngs.channel))
            .collect::<Vec<_>>(),
        EveStrategy::PnsQnd { .. } => {
            let (arrived, _) = eve_process_stream(pulses, &config.eve, &mut rngs.eve);
            arrived
        }
    };

    let mut received = [0u64; 2];
    let mut decision_count = [0u64; 2]; // class-1 successes, trials, over the plan
    for pulse in arrived.iter().flatten() {
        if pulse.is_vacuum() {
            continue;
        }
        let class = match pulse.source_class {
            SourceClass::Decoy(IntensityClass::One) => 0,
            SourceClass::Decoy(IntensityClass::Two) => 1,
            _ => continue,
        };
        received[class] += 1;
        if decision_count[1] < planned {
            decision_count[0] += (class == 0) as u64;
            decision_count[1] += 1;
        }
    }
    let total = received[0] + received[1];
    let decision = if decision_count[1] < planned {
        DetectionDecision::Inconclusive
    } else {
        match decide_hypothesis(decision_count[0], planned, pair).map_err(domain)? {
            Hypothesis::Null => DetectionDecision::NoEavesdropper,
            Hypothesis::Alternative => DetectionDecision::EavesdropperDetected,
        }
    };

    let mut csv = CsvWriter::create(Path::new(out), "metric,value")?;
    csv.row(&format!("scenario,{}", config.scenario_name))?;
    csv.row(&format!("seed,{}", config.seed))?;
    csv.row(&format!("pulses_sent,{}", config.n_slots))?;
    csv.row(&format!("received_class1,{}", received[0]))?;
    csv.row(&format!("received_class2,{}", received[1]))?;
    let observed = if total == 0 {
        0.0
    } else {
        received[0] as f64 / total as f64
    };
    csv.row(&format!("received_fraction1,{}", fmt_real(observed)))?;
    csv.row(&format!("null_fraction1,{}", fmt_real(null_share)))?;
    csv.row(&format!("attack_fraction1,{}", fmt_real(attack_share)))?;
    csv.row(&format!("trials_planned,{planned}"))?;
    csv.row(&format!("trials_used,{}", decision_count[1]))?;
    csv.row(&format!("decision,{}", decision_name(decision)))?;
    csv.row(&format!(
        "pulses_needed_for_confidence,{}",
        qkdlab_core::decoy::decoy_pulses_needed(&scenario).map_err(domain)?
    ))?;
    csv.finish()?;

    if let Some(path) = slot_log {
        let mut log = CsvWriter::create(Path::new(path), "slot,category,detail")?;
        for (slot, pulse) in arrived.iter().enumerate() {
            let detail = match pulse {
                None => "lost".to_string(),
                Some(p) if p.is_vacuum() => "vacuum".to_string(),
                Some(p) => match p.source_class {
                    SourceClass::Decoy(IntensityClass::One) => "received_class1".to_string(),
                    SourceClass::Decoy(IntensityClass::Two) => "received_class2".to_string(),
                    _ => "received".to_string(),
                },
            };
            log.row(&format!("{slot},decoy_intensity,{detail}"))?;
        }
        log.finish()?;
    }

    println!("scenario: {}", config.scenario_name);
    println!(
        "received fraction (class 1): {} (null {}, attack {})",
        fmt_real(observed),
        fmt_real(null_share),
        fmt_real(attack_share)
    );
    println!(
        "decision: {} (trials used: {} of {})",
        decision_name(decision),
        decision_count[1],
        planned
    );
    Ok(())
}

fn decision_name(decision: DetectionDecision) -> &'static str {
    match decision {
        DetectionDecision::NoEavesdropper => "no_eavesdropper",
        DetectionDecision::EavesdropperDetected => "eavesdropper_detected",
        DetectionDecision::Inconclusive => "inconclusive",
    }
}

fn describe_slot(outcome: &SlotOutcome) -> (&'static str, String) {
    match outcome {
        SlotOutcome::Wasted => ("wasted", "-".to_string()),
        SlotOutcome::KeyExchange(detail) => (
            "key_exchange",
            match detail {
                KeyExchangeOutcome::SiftedBit(bit) => format!("sifted_bit_{}", *bit as u8),
                KeyExchangeOutcome::BasisMismatch => "basis_mismatch".to_string(),
                KeyExchangeOutcome::Lost => "lost".to_string(),
            },
        ),
        SlotOutcome::DecoyDetection(detail) => (
            "decoy_detection",
            match detail {
                DecoyOutcome::ShortShort => "ss".to_string(),
                DecoyOutcome::LongLong => "ll".to_string(),
                DecoyOutcome::MiddleBright => "middle_bright".to_string(),
                DecoyOutcome::MiddleDark => "middle_dark".to_string(),
                DecoyOutcome::Lost => "lost".to_string(),
            },
        ),
    }
}
