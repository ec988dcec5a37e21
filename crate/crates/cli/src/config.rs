//! Scenario config files: flat `key = value` text with `[section]` headers
//! and `#` comments. Diff-friendly on purpose; no external parser involved.
//!
//! ```text
//! scenario_name = pns_demo
//! seed = 42
//! confidence = 0.99
//! n_slots = 20000
//!
//! [source]
//! kind = wlp          # wlp | decoy
//! mu = 0.5
//!
//! [schedule]
//! f_da = 0.2
//! f_db = 0.2
//!
//! [channel]
//! loss = 0.5
//! dephasing = 0.0
//!
//! [eve]
//! kind = pns-qnd      # absent | pns-qnd
//! replaced_loss = 0.5 # optional; defaults to the channel loss
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use qkdlab_core::channel::{ChannelConfig, EveStrategy};
use qkdlab_core::ee::ModeSchedule;
use qkdlab_core::sources::{DecoyIntensityConfig, WlpSourceConfig};

use crate::CliError;

#[derive(Debug, Clone)]
pub enum SourceConfig {
    Wlp(WlpSourceConfig),
    Decoy(DecoyIntensityConfig),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario_name: String,
    pub source: SourceConfig,
    pub schedule: ModeSchedule,
    pub channel: ChannelConfig,
    pub eve: EveStrategy,
    pub confidence: f64,
    pub n_slots: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Loads and validates a scenario. `seed_override` is the resolved
    /// flag/env override, if any; the config's own `seed` key is required
    /// only when no override is given.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let raw = RawConfig::parse(&text, &path.display().to_string())?;
        raw.build(seed_override, &path.display().to_string())
    }
}

// Parsed key/value pairs, grouped by section, with line numbers kept for
// diagnostics.
struct RawConfig {
    values: BTreeMap<(String, String), (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (number, raw_line) in text.lines().enumerate() {
            let line_no = number + 1;
            let line = match raw_line.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw_line.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::Config(format!("{origin}:{line_no}: unterminated section header"))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{origin}:{line_no}: expected `key = value`, got `{line}`"
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(CliError::Config(format!(
                    "{origin}:{line_no}: empty key or value"
                )));
            }
            if values
                .insert((section.clone(), key.clone()), (value, line_no))
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "{origin}:{line_no}: duplicate key `{key}`"
                )));
            }
        }
        Ok(RawConfig { values })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.values.remove(&(section.to_string(), key.to_string()))
    }

    fn require(
        &mut self,
        section: &str,
        key: &str,
        origin: &str,
    ) -> Result<(String, usize), CliError> {
        self.take(section, key).ok_or_else(|| {
            let place = if section.is_empty() {
                "top level".to_string()
            } else {
                format!("section [{section}]")
            };
            CliError::Config(format!("{origin}: missing key `{key}` in {place}"))
        })
    }

    fn build(mut self, seed_override: Option<u64>, origin: &str) -> Result<ScenarioConfig, CliError> {
        let scenario_name = self
            .take("", "scenario_name")
            .map(|(v, _)| v)
            .unwrap_or_else(|| "scenario".to_string());

        let seed = match seed_override {
            Some(seed) => {
                self.take("", "seed");
                seed
            }
            None => {
                let (value, line) = self.require("", "seed", origin)?;
                parse_number::<u64>(&value, "seed", line, origin)?
            }
        };

        let (value, line) = self.require("", "confidence", origin)?;
        let confidence = parse_number::<f64>(&value, "confidence", line, origin)?;
        let (value, line) = self.require("", "n_slots", origin)?;
        let n_slots = parse_number::<usize>(&value, "n_slots", line, origin)?;

        let (kind, kind_line) = self.require("source", "kind", origin)?;
        let source = match kind.as_str() {
            "wlp" => {
                let (value, line) = self.require("source", "mu", origin)?;
                let mu = parse_number::<f64>(&value, "mu", line, origin)?;
                SourceConfig::Wlp(WlpSourceConfig::new(mu).map_err(|e| {
                    CliError::Config(format!("{origin}:{line}: {e}"))
                })?)
            }
            "decoy" => {
                let (v1, l1) = self.require("source", "mu1", origin)?;
                let (v2, l2) = self.require("source", "mu2", origin)?;
                let (vf, lf) = self.require("source", "fraction1", origin)?;
                let mu1 = parse_number::<f64>(&v1, "mu1", l1, origin)?;
                let mu2 = parse_number::<f64>(&v2, "mu2", l2, origin)?;
                let fraction1 = parse_number::<f64>(&vf, "fraction1", lf, origin)?;
                SourceConfig::Decoy(
                    DecoyIntensityConfig::new(mu1, mu2, fraction1).map_err(|e| {
                        CliError::Config(format!("{origin}:{lf}: {e}"))
                    })?,
                )
            }
            other => {
                return Err(CliError::Config(format!(
                    "{origin}:{kind_line}: unknown source kind `{other}` (wlp | decoy)"
                )))
            }
        };

        let (value, line) = self.require("schedule", "f_da", origin)?;
        let f_da = parse_number::<f64>(&value, "f_da", line, origin)?;
        let (value, line) = self.require("schedule", "f_db", origin)?;
        let f_db = parse_number::<f64>(&value, "f_db", line, origin)?;
        let schedule = ModeSchedule::new(f_da, f_db)
            .map_err(|e| CliError::Config(format!("{origin}:{line}: {e}")))?;

        let (value, line) = self.require("channel", "loss", origin)?;
        let loss = parse_number::<f64>(&value, "loss", line, origin)?;
        let (value, line) = self.require("channel", "dephasing", origin)?;
        let dephasing = parse_number::<f64>(&value, "dephasing", line, origin)?;
        let channel = ChannelConfig::new(loss, dephasing)
            .map_err(|e| CliError::Config(format!("{origin}:{line}: {e}")))?;

        let (kind, kind_line) = self.require("eve", "kind", origin)?;
        let eve = match kind.as_str() {
            "absent" => {
                self.take("eve", "replaced_loss");
                EveStrategy::Absent
            }
            "pns-qnd" => {
                let replaced_loss = match self.take("eve", "replaced_loss") {
                    Some((value, line)) => {
                        parse_number::<f64>(&value, "replaced_loss", line, origin)?
                    }
                    // Worst case: Eve counterfeits exactly the channel loss.
                    None => channel.loss(),
                };
                if !(0.0..=1.0).contains(&replaced_loss) {
                    return Err(CliError::Config(format!(
                        "{origin}: replaced_loss {replaced_loss} is outside [0, 1]"
                    )));
                }
                EveStrategy::PnsQnd { replaced_loss }
            }
            other => {
                return Err(CliError::Config(format!(
                    "{origin}:{kind_line}: unknown eve kind `{other}` (absent | pns-qnd)"
                )))
            }
        };

        if let Some(((section, key), (_, line))) = self.values.into_iter().next() {
            let place = if section.is_empty() {
                "top level".to_string()
            } else {
                format!("[{section}]")
            };
            return Err(CliError::Config(format!(
                "{origin}:{line}: unknown key `{key}` in {place}"
            )));
        }

        if !(confidence > 0.5 && confidence < 1.0) {
            return Err(CliError::Config(format!(
                "{origin}: confidence {confidence} is outside (0.5, 1)"
            )));
        }
        if n_slots == 0 {
            return Err(CliError::Config(format!("{origin}: n_slots must be positive")));
        }

        Ok(ScenarioConfig {
            scenario_name,
            source,
            schedule,
            channel,
            eve,
            confidence,
            n_slots,
            seed,
        })
    }
}

fn parse_number<T: std::str::FromStr>(
    value: &str,
    key: &str,
    line: usize,
    origin: &str,
) -> Result<T, CliError> {
    value.parse::<T>().map_err(|_| {
        CliError::Config(format!(
            "{origin}:{line}: cannot parse `{value}` as a number for `{key}`"
        ))
    })
}

/// Resolves the master seed with flag > env > config precedence. Returns the
/// override when the flag or `QKDLAB_SEED` is set; `None` defers to the
/// config file.
pub fn resolve_seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("QKDLAB_SEED") {
        Ok(value) => value
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| {
                CliError::Config(format!(
                    "QKDLAB_SEED must be an unsigned 64-bit integer, got `{value}`"
                ))
            }),
        Err(_) => Ok(None),
    }
}
