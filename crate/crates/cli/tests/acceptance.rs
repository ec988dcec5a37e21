//! Acceptance suite. One test per criterion; each prints a pass/fail line
//! (run with `--nocapture` to see the lines for passing tests too).

use std::path::Path;
use std::process::Command;

use qkdlab_core::channel::{ChannelConfig, EveStrategy};
use qkdlab_core::decoy::{attack_fraction_oracle, null_received_fraction, nonvacuum_fraction};
use qkdlab_core::ee::{
    classify_slot, detect_eavesdropper, run_bb84_exchange, trials_vs_dephasing_curve,
    DetectionDecision, ModeSchedule, SlotCategory,
};
use qkdlab_core::seed::ProtocolRngs;
use qkdlab_core::sources::{DecoyIntensityConfig, WlpSourceConfig};
use qkdlab_core::stats::{
    chernoff_distance, decide_hypothesis, max_error_probability, trials_needed,
    BernoulliHypothesisPair, Hypothesis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn pair(p: f64, q: f64) -> BernoulliHypothesisPair {
    BernoulliHypothesisPair::new(p, q).unwrap()
}

/// Independent Chernoff oracle: golden-section minimization of
/// s -> sum_x p(x)^s q(x)^(1-s), returning -ln of the minimum.
fn chernoff_by_minimization(p: f64, q: f64) -> f64 {
    let f =
        |s: f64| p.powf(s) * q.powf(1.0 - s) + (1.0 - p).powf(s) * (1.0 - q).powf(1.0 - s);
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..300 {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    -f(0.5 * (a + b)).ln()
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_01_headline_numbers() {
    let trials = trials_needed(pair(1.0, 0.5), 0.01).unwrap();
    let distance = chernoff_distance(pair(1.0, 0.5)).unwrap();
    let ok = trials == 6 && (distance - 2.0f64.ln()).abs() < 1e-9;
    report(
        "1 (headline numbers)",
        ok,
        &format!("trials={trials}, C={distance:.10}"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_error_bound_validity() {
    let mut rng = ChaCha12Rng::seed_from_u64(2025);
    let reps = 100_000u64;
    let mut all_ok = true;
    let mut details = Vec::new();
    for (p, q) in [(0.9, 0.5), (0.8, 0.6)] {
        let h = pair(p, q);
        for n in [10u64, 50] {
            let bound = max_error_probability(n, h).unwrap();
            let mut wrong = 0u64;
            for _ in 0..reps {
                let null_true = rng.random_bool(0.5);
                let rate = if null_true { p } else { q };
                let successes = (0..n).filter(|_| rng.random_bool(rate)).count() as u64;
                let correct = match decide_hypothesis(successes, n, h).unwrap() {
                    Hypothesis::Null => null_true,
                    Hypothesis::Alternative => !null_true,
                };
                if !correct {
                    wrong += 1;
                }
            }
            let err = wrong as f64 / reps as f64;
            let se = (err * (1.0 - err) / reps as f64).sqrt();
            let ok = err <= bound + 3.0 * se;
            all_ok &= ok;
            details.push(format!("(p={p},q={q},n={n}): err={err:.4}<=bound={bound:.4}"));
        }
    }
    report("2 (error bound validity)", all_ok, &details.join("; "));
    assert!(all_ok);
}

#[test]
fn criterion_03_oracle_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(314159);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.random_range(0.01..0.99);
        let q = rng.random_range(0.01..0.99);
        let closed = chernoff_distance(pair(p, q)).unwrap();
        let oracle = chernoff_by_minimization(p, q);
        worst = worst.max((closed - oracle).abs());
    }
    let ok = worst < 1e-9;
    report(
        "3 (oracle equivalence)",
        ok,
        &format!("worst |closed - oracle| = {worst:.3e} over 1000 pairs"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_dephasing_curve_reproduction() {
    let grid: Vec<f64> = (0..=45).map(|i| i as f64 * 0.01).collect();
    let curve = trials_vs_dephasing_curve(&grid, 0.99).unwrap();
    let n0 = curve[0].1;
    let monotone = curve.windows(2).all(|w| w[1].1 >= w[0].1);
    let n45 = curve.last().unwrap().1;
    let spot = |d: f64| {
        let idx = (d / 0.01).round() as usize;
        let expected =
            ((-(2.0f64 * 0.01).ln()) / chernoff_by_minimization(1.0 - d, 0.5)).ceil() as u64;
        (curve[idx].1, expected)
    };
    let (n10, e10) = spot(0.10);
    let (n25, e25) = spot(0.25);
    let ok = n0 == 6 && monotone && n45 > 100 * n0 && n10 == e10 && n25 == e25;
    report(
        "4 (dephasing curve)",
        ok,
        &format!(
            "n(0)={n0}, monotone={monotone}, n(0.45)={n45}, n(0.10)={n10}/{e10}, n(0.25)={n25}/{e25}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_mode_schedule_identity() {
    // Dyadic frequencies keep the analytic identity exact in floats.
    let schedule = ModeSchedule::new(0.25, 0.5).unwrap();
    let f_sa = schedule.alice_signal_frequency();
    let f_da = schedule.alice_decoy_frequency();
    let f_sb = schedule.bob_signal_frequency();
    let f_db = schedule.bob_decoy_frequency();
    let expected = [
        f_sa * f_sb + f_da * f_sb,
        f_da * f_db,
        f_sa * f_db,
    ];
    let exact = expected.iter().sum::<f64>() == 1.0;

    let mut rng = ChaCha12Rng::seed_from_u64(55);
    let n = 1_000_000usize;
    let mut counts = [0u64; 3];
    for _ in 0..n {
        let category =
            classify_slot(schedule.sample_alice(&mut rng), schedule.sample_bob(&mut rng));
        counts[match category {
            SlotCategory::KeyExchange => 0,
            SlotCategory::DecoyDetection => 1,
            SlotCategory::Wasted => 2,
        }] += 1;
    }
    let mut within = true;
    for i in 0..3 {
        let observed = counts[i] as f64 / n as f64;
        let se = (expected[i] * (1.0 - expected[i]) / n as f64).sqrt();
        within &= (observed - expected[i]).abs() <= 3.0 * se;
    }
    let ok = exact && within;
    report(
        "5 (mode-schedule identity)",
        ok,
        &format!("terms sum exactly to 1: {exact}; empirical within 3 sigma: {within}"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_eve_invisibility_in_signal_mode() {
    let source = WlpSourceConfig::new(0.5).unwrap();
    let schedule = ModeSchedule::new(0.0, 0.0).unwrap();
    let channel = ChannelConfig::new(0.5, 0.0).unwrap();
    let slots = 1_000_000usize;

    let mut rngs = ProtocolRngs::from_master(601);
    let absent = run_bb84_exchange(
        slots,
        &source,
        &schedule,
        &channel,
        &EveStrategy::Absent,
        &mut rngs,
    );
    let mut rngs = ProtocolRngs::from_master(602);
    let attacked = run_bb84_exchange(
        slots,
        &source,
        &schedule,
        &channel,
        &EveStrategy::PnsQnd { replaced_loss: 0.5 },
        &mut rngs,
    );

    let p_hat = (absent.stats.received_pulses + attacked.stats.received_pulses) as f64
        / (2.0 * slots as f64);
    let sigma = (2.0 * slots as f64 * p_hat * (1.0 - p_hat)).sqrt();
    let count_diff =
        absent.stats.received_pulses as f64 - attacked.stats.received_pulses as f64;
    let counts_close = count_diff.abs() <= 3.0 * sigma;
    let qber_equal = absent.stats.qber == attacked.stats.qber;
    let eve_learns = attacked.stats.eve_known_bit_fraction > 0.0;
    let ok = counts_close && qber_equal && eve_learns;
    report(
        "6 (eve invisibility)",
        ok,
        &format!(
            "counts {} vs {} (3sigma={:.0}), qber {}={}, known fraction {:.4}",
            absent.stats.received_pulses,
            attacked.stats.received_pulses,
            3.0 * sigma,
            absent.stats.qber,
            attacked.stats.qber,
            attacked.stats.eve_known_bit_fraction
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_decoy_attack_direction_and_oracle() {
    let cfg = DecoyIntensityConfig::new(0.1, 0.5, 0.7).unwrap();
    let null_share2 = 1.0 - null_received_fraction(&cfg).unwrap();
    let mut all_ok = true;
    let mut details = Vec::new();
    for (i, loss) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let expected1 = attack_fraction_oracle(&cfg, loss).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(700 + i as u64);
        let n = 1_000_000usize;
        let (share1, share2) =
            qkdlab_core::channel::eve_decoy_fractions(&cfg, loss, n, &mut rng).unwrap();
        let received = n as f64 * (1.0 - loss) * nonvacuum_fraction(&cfg);
        let se = (expected1 * (1.0 - expected1) / received).sqrt();
        let oracle_ok = (share1 - expected1).abs() <= 3.0 * se;
        let direction_ok = share2 > null_share2;
        all_ok &= oracle_ok && direction_ok;
        details.push(format!(
            "loss={loss}: mc={share1:.4} oracle={expected1:.4} (3se={:.4}), bright-class gain {}",
            3.0 * se,
            direction_ok
        ));
    }
    report("7 (decoy direction + oracle)", all_ok, &details.join("; "));
    assert!(all_ok);
}

struct CompareRow {
    loss: f64,
    pulses_decoy: u64,
    pulses_ee_d10: u64,
    ratio_d10: f64,
}

fn run_compare(dir: &Path) -> Vec<CompareRow> {
    let out = dir.join("compare.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_qkdlab"))
        .args(["compare", "--out", out.to_str().unwrap()])
        .output()
        .expect("compare runs");
    assert!(status.status.success(), "compare failed: {status:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            CompareRow {
                loss: fields[0].parse().unwrap(),
                pulses_decoy: fields[1].parse().unwrap(),
                pulses_ee_d10: fields[2].parse().unwrap(),
                ratio_d10: fields[4].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn criterion_08a_ee_cheaper_below_three_quarters_loss() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_compare(dir.path());
    let ok = rows
        .iter()
        .filter(|r| r.loss < 0.75)
        .all(|r| r.pulses_ee_d10 < r.pulses_decoy);
    report(
        "8a (EE cheaper for loss < 0.75)",
        ok,
        &format!("checked {} grid points", rows.iter().filter(|r| r.loss < 0.75).count()),
    );
    assert!(ok);
}

#[test]
fn criterion_08b_decoy_crossover_at_high_loss() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_compare(dir.path());
    let crossover = rows.iter().find(|r| r.pulses_decoy <= r.pulses_ee_d10);
    let ok = crossover.is_some();
    report(
        "8b (decoy crossover at very high loss)",
        ok,
        &match crossover {
            Some(row) => format!("decoy wins from loss {}", row.loss),
            None => format!(
                "no crossover: EE/decoy ratio saturates at {:.4} (< 1) once only \
                 multi-photon pulses remain",
                rows.last().unwrap().ratio_d10
            ),
        },
    );
    assert!(ok, "no loss value lets the decoy scheme beat EE at d=0.10");
}

#[test]
fn criterion_08c_pulse_ratio_near_one_third_at_half_loss() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_compare(dir.path());
    let row = rows
        .iter()
        .min_by(|a, b| (a.loss - 0.5).abs().total_cmp(&(b.loss - 0.5).abs()))
        .unwrap();
    let ok = row.ratio_d10 >= 0.17 && row.ratio_d10 <= 0.5;
    report(
        "8c (EE/decoy ratio in [0.17, 0.5] at 50% loss)",
        ok,
        &format!("ratio at loss {} is {:.5}", row.loss, row.ratio_d10),
    );
    assert!(
        ok,
        "EE/decoy ratio at 50% loss is {} with the default calibration",
        row.ratio_d10
    );
}

#[test]
fn criterion_09_end_to_end_detection_rate() {
    let source = WlpSourceConfig::new(0.5).unwrap();
    let schedule = ModeSchedule::new(0.25, 0.25).unwrap();
    let channel = ChannelConfig::new(0.5, 0.0).unwrap();
    let eve = EveStrategy::PnsQnd { replaced_loss: 0.5 };
    let episodes = 1000u64;
    let mut detected = 0u64;
    for seed in 0..episodes {
        let mut rngs = ProtocolRngs::from_master(seed);
        let result = run_bb84_exchange(2000, &source, &schedule, &channel, &eve, &mut rngs);
        let detection =
            detect_eavesdropper(result.decoy_outcomes(), &channel, 0.99).unwrap();
        if detection.decision == DetectionDecision::EavesdropperDetected
            && detection.trials_used == 6
        {
            detected += 1;
        }
    }
    let rate = detected as f64 / episodes as f64;
    let ok = rate >= 0.99;
    report(
        "9 (end-to-end detection rate)",
        ok,
        &format!(
            "{detected}/{episodes} episodes detected with 6 middle events (rate {rate:.4}; \
             an attack collapse leaves all six events bright with probability 2^-6 = 0.015625)"
        ),
    );
    assert!(ok, "detection rate {rate} is below 0.99");
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("scenario.cfg");
    std::fs::write(
        &config_path,
        "scenario_name = determinism\n\
         seed = 4242\n\
         confidence = 0.99\n\
         n_slots = 5000\n\
         [source]\n\
         kind = wlp\n\
         mu = 0.5\n\
         [schedule]\n\
         f_da = 0.2\n\
         f_db = 0.2\n\
         [channel]\n\
         loss = 0.3\n\
         dephasing = 0.1\n\
         [eve]\n\
         kind = pns-qnd\n",
    )
    .unwrap();

    let run = |out: &Path, log: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_qkdlab"))
            .args([
                "simulate",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--slot-log",
                log.to_str().unwrap(),
            ])
            .output()
            .expect("simulate runs");
        assert!(status.status.success(), "simulate failed: {status:?}");
    };
    let (out1, log1) = (dir.path().join("a.csv"), dir.path().join("a_slots.csv"));
    let (out2, log2) = (dir.path().join("b.csv"), dir.path().join("b_slots.csv"));
    run(&out1, &log1);
    run(&out2, &log2);

    let summary_equal = std::fs::read(&out1).unwrap() == std::fs::read(&out2).unwrap();
    let log_equal = std::fs::read(&log1).unwrap() == std::fs::read(&log2).unwrap();
    let ok = summary_equal && log_equal;
    report(
        "10 (determinism)",
        ok,
        &format!("summary identical: {summary_equal}, slot log identical: {log_equal}"),
    );
    assert!(ok);
}
