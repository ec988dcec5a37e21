//! Alice's photon sources: Poissonian weak laser pulses, two-intensity decoy
//! pulses, and the heralded time-bin entangled ancilla.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

/// Probability that a generated ancilla exits Alice's output beamsplitter
/// into the channel (balanced splitter). Pulses that exit the wrong port are
/// heralded away before launch; this constant only enters pulses-generated
/// versus pulses-launched accounting.
pub const ANCILLA_LAUNCH_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("mean photon number {0} must be finite and nonnegative")]
    InvalidMeanPhotonNumber(f64),
    #[error("fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
}

/// Weak laser pulse source with Poissonian photon statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlpSourceConfig {
    mu: f64,
}

impl WlpSourceConfig {
    pub fn new(mu: f64) -> Result<Self, SourceError> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(SourceError::InvalidMeanPhotonNumber(mu));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Two-intensity decoy source: a `fraction1` share of pulses at mean photon
/// number `mu1`, the rest at `mu2`. The two shares sum to one exactly because
/// the second is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyIntensityConfig {
    mu1: f64,
    mu2: f64,
    fraction1: f64,
}

impl DecoyIntensityConfig {
    pub fn new(mu1: f64, mu2: f64, fraction1: f64) -> Result<Self, SourceError> {
        for mu in [mu1, mu2] {
            if !mu.is_finite() || mu < 0.0 {
                return Err(SourceError::InvalidMeanPhotonNumber(mu));
            }
        }
        if !(0.0..=1.0).contains(&fraction1) {
            return Err(SourceError::InvalidFraction(fraction1));
        }
        Ok(Self { mu1, mu2, fraction1 })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn fraction1(&self) -> f64 {
        self.fraction1
    }

    pub fn fraction2(&self) -> f64 {
        1.0 - self.fraction1
    }

    /// Equal intensities are permitted but make the decoy scheme inert; the
    /// received mix can then never betray a number-splitting attack.
    pub fn has_distinct_intensities(&self) -> bool {
        self.mu1 != self.mu2
    }

    pub fn mu(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::One => self.mu1,
            IntensityClass::Two => self.mu2,
        }
    }

    pub fn fraction(&self, class: IntensityClass) -> f64 {
        match class {
            IntensityClass::One => self.fraction1(),
            IntensityClass::Two => self.fraction2(),
        }
    }
}

/// Which of the two decoy intensities a pulse was emitted at. Known to Alice,
/// opaque to anyone watching the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityClass {
    One,
    Two,
}

/// Preparation/measurement basis for the polarization encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

/// Four-state polarization alphabet: H/V span the rectilinear basis, D/A the
/// diagonal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

impl Polarization {
    pub const ALL: [Polarization; 4] =
        [Polarization::H, Polarization::V, Polarization::D, Polarization::A];

    pub fn basis(&self) -> Basis {
        match self {
            Polarization::H | Polarization::V => Basis::Rectilinear,
            Polarization::D | Polarization::A => Basis::Diagonal,
        }
    }

    pub fn bit(&self) -> bool {
        matches!(self, Polarization::V | Polarization::A)
    }

    pub fn from_basis_bit(basis: Basis, bit: bool) -> Self {
        match (basis, bit) {
            (Basis::Rectilinear, false) => Polarization::H,
            (Basis::Rectilinear, true) => Polarization::V,
            (Basis::Diagonal, false) => Polarization::D,
            (Basis::Diagonal, true) => Polarization::A,
        }
    }
}

/// Time-bin state of a pulse. Only ancilla pulses carry one; `coherence` is 1
/// for the ideal early/late superposition and 0 when fully dephased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeBin {
    None,
    Superposed { coherence: f64 },
    CollapsedEarly,
    CollapsedLate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceClass {
    Signal { mu: f64 },
    Decoy(IntensityClass),
    EntangledAncilla,
}

/// One emitted optical pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    pub source_class: SourceClass,
    pub photon_count: u32,
    pub polarization: Option<Polarization>,
    pub timebin: TimeBin,
    /// Herald/emission tick; granularity only needs to separate time bins.
    pub emission_time: u64,
}

impl PulseRecord {
    pub fn is_vacuum(&self) -> bool {
        self.photon_count == 0
    }

    pub fn is_multiphoton(&self) -> bool {
        self.photon_count >= 2
    }

    pub fn is_ancilla(&self) -> bool {
        matches!(self.source_class, SourceClass::EntangledAncilla)
    }
}

/// Poisson photon-number probability `P_n = mu^n e^(-mu) / n!`.
pub fn photon_number_probability(mu: f64, n: u32) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let mut log_p = -mu + n as f64 * mu.ln();
    for k in 2..=n {
        log_p -= (k as f64).ln();
    }
    log_p.exp()
}

/// Probability that a pulse carries at least one photon, `1 - e^(-mu)`.
pub fn nonvacuum_probability(mu: f64) -> f64 {
    1.0 - (-mu).exp()
}

/// Probability `P_M = 1 - e^(-mu) - mu·e^(-mu)` that a pulse carries two or
/// more photons and is therefore splittable.
pub fn multi_photon_probability(mu: f64) -> Result<f64, SourceError> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(SourceError::InvalidMeanPhotonNumber(mu));
    }
    let e = (-mu).exp();
    Ok((1.0 - e - mu * e).max(0.0))
}

/// Samples a photon count from the Poisson distribution at the configured
/// mean. Driven solely by `rng`, so identical streams reproduce identical
/// counts.
pub fn sample_photon_number(cfg: &WlpSourceConfig, rng: &mut impl Rng) -> u32 {
    sample_poisson(cfg.mu(), rng)
}

fn sample_poisson(mu: f64, rng: &mut impl Rng) -> u32 {
    if mu == 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mu).expect("mean validated at construction");
    let n: f64 = poisson.sample(rng);
    n as u32
}

pub fn random_polarization(rng: &mut impl Rng) -> Polarization {
    Polarization::ALL[rng.random_range(0..4)]
}

/// Emits one heralded entangled ancilla: exactly one photon, uniformly random
/// polarization, ideal early/late superposition. Wrong-port exits at Alice's
/// output beamsplitter are already post-selected away; see
/// [`ANCILLA_LAUNCH_PROBABILITY`] for the accounting constant.
pub fn emit_heralded_ancilla(rng: &mut impl Rng, emission_time: u64) -> PulseRecord {
    PulseRecord {
        source_class: SourceClass::EntangledAncilla,
        photon_count: 1,
        polarization: Some(random_polarization(rng)),
        timebin: TimeBin::Superposed { coherence: 1.0 },
        emission_time,
    }
}

/// Emits one decoy pulse: intensity class 1 with probability `fraction1`,
/// Poisson photon count at the chosen mean, random polarization, no time-bin
/// structure.
pub fn emit_decoy_pulse(
    cfg: &DecoyIntensityConfig,
    rng: &mut impl Rng,
    emission_time: u64,
) -> PulseRecord {
    let class = if rng.random::<f64>() < cfg.fraction1() {
        IntensityClass::One
    } else {
        IntensityClass::Two
    };
    PulseRecord {
        source_class: SourceClass::Decoy(class),
        photon_count: sample_poisson(cfg.mu(class), rng),
        polarization: Some(random_polarization(rng)),
        timebin: TimeBin::None,
        emission_time,
    }
}

/// Emits one weak laser signal pulse carrying the given polarization.
pub fn emit_signal_pulse(
    cfg: &WlpSourceConfig,
    polarization: Polarization,
    rng: &mut impl Rng,
    emission_time: u64,
) -> PulseRecord {
    PulseRecord {
        source_class: SourceClass::Signal { mu: cfg.mu() },
        photon_count: sample_photon_number(cfg, rng),
        polarization: Some(polarization),
        timebin: TimeBin::None,
        emission_time,
    }
}
