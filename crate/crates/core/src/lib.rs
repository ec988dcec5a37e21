//! Simulation and analysis toolkit for BB84 quantum key distribution under
//! the photon-number-splitting attack.
//!
//! The crate models two defenses and the statistics that power both:
//!
//! - [`stats`]: symmetric Bernoulli hypothesis testing via the Chernoff
//!   distance — error bounds, trial planning, and the maximum-likelihood
//!   decision rule.
//! - [`sources`]: weak laser pulses, two-intensity decoy pulses, and the
//!   heralded time-bin entangled ancilla.
//! - [`channel`]: whole-pulse loss, dephasing, and the number-splitting
//!   eavesdropper with its bookkeeping ledger.
//! - [`ee`]: the entanglement-augmented protocol — mode scheduling, sifting,
//!   the time-bin interferometer, and eavesdropper detection from
//!   bright/dark-port counts.
//! - [`decoy`]: the coherent decoy-state alternative — received-fraction
//!   shifts under attack and pulse budgets for detection, plus the
//!   comparison between the two schemes.
//! - [`seed`]: named, counter-derived random substreams so every run is
//!   reproducible from a single master seed.

pub mod channel;
pub mod decoy;
pub mod ee;
pub mod seed;
pub mod sources;
pub mod stats;
