//! Sectioned key=value run configuration.
//!
//! The format is plain text: `[section]` headers, `key = value` lines, and
//! `#` comments. Floats accept scientific notation; ε values may be given
//! in log₂ via a `log2:` prefix (`eps_pa = log2:-34.2`). Unknown sections
//! or keys are rejected with a line diagnostic.

use std::collections::BTreeMap;
use std::fmt;

use finitekey::decoy::IntensitySpec;
use finitekey::detector::DetectorSpec;
use finitekey::keyrate::{BudgetMode, EpsilonBudget};
use finitekey::logdomain::LogProb;
use finitekey::simulate::{ChannelModel, ProtocolParams};

/// A configuration problem: reported with line/key context, exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError {
        message: message.into(),
    }
}

/// Known sections and their keys. Anything else is rejected.
const SCHEMA: &[(&str, &[&str])] = &[
    ("channel", &["loss_db", "misalignment_deg", "depolarization"]),
    ("detector", &["eta_det", "delta_eta", "dc_det", "delta_dc", "swap"]),
    ("protocol", &["n", "alice_x_prob", "bob_x_prob", "f_ec"]),
    ("intensities", &["mu1", "mu2", "mu3", "p_mu1", "p_mu2", "p_mu3"]),
    ("epsilon", &["mode", "eps_pa", "eps_ev", "eps_at"]),
    ("postselect", &["n", "x", "protocol", "eps_target"]),
    (
        "simulate",
        &["trials", "mode", "t_start", "t_stop", "t_steps"],
    ),
    ("authsim", &["n_messages", "runs", "scenario", "key_bits"]),
    (
        "counts",
        &[
            "x_err1", "x_err2", "x_err3", "x_con1", "x_con2", "x_con3", "k_con1", "k_con2",
            "k_con3",
        ],
    ),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed configuration document.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw_line.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(err(format!("line {line_no}: unknown section [{name}]")));
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim();
            let value = value.trim();
            let section = current
                .clone()
                .ok_or_else(|| err(format!("line {line_no}: key outside any [section]")))?;
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(err(format!(
                    "line {line_no}: unknown key '{section}.{key}'"
                )));
            }
            let entry = Entry {
                value: value.to_string(),
                line: line_no,
            };
            if sections
                .entry(section.clone())
                .or_default()
                .insert(key.to_string(), entry)
                .is_some()
            {
                return Err(err(format!(
                    "line {line_no}: duplicate key '{section}.{key}'"
                )));
            }
        }
        Ok(RunConfig { sections })
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn entry(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .ok_or_else(|| err(format!("missing required key '{section}.{key}'")))
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.sections
            .get(section)
            .is_some_and(|s| s.contains_key(key))
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let e = self.entry(section, key)?;
        e.value.parse::<f64>().map_err(|_| {
            err(format!(
                "line {}: '{}.{}' must be a number, got '{}'",
                e.line, section, key, e.value
            ))
        })
    }

    pub fn get_f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        if self.has(section, key) {
            self.get_f64(section, key)
        } else {
            Ok(default)
        }
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<u64, ConfigError> {
        let e = self.entry(section, key)?;
        if let Ok(v) = e.value.parse::<u64>() {
            return Ok(v);
        }
        // Allow scientific notation for large round counts (n = 1e12).
        match e.value.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= 1.8e19 => Ok(v as u64),
            _ => Err(err(format!(
                "line {}: '{}.{}' must be a non-negative integer, got '{}'",
                e.line, section, key, e.value
            ))),
        }
    }

    pub fn get_u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        if self.has(section, key) {
            self.get_u64(section, key)
        } else {
            Ok(default)
        }
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<bool, ConfigError> {
        let e = self.entry(section, key)?;
        match e.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(err(format!(
                "line {}: '{}.{}' must be a boolean, got '{other}'",
                e.line, section, key
            ))),
        }
    }

    pub fn get_str(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        Ok(self.entry(section, key)?.value.as_str())
    }

    /// An ε value: linear (`1e-10`) or log₂ with the `log2:` prefix.
    pub fn get_eps(&self, section: &str, key: &str) -> Result<LogProb, ConfigError> {
        let e = self.entry(section, key)?;
        if let Some(log2) = e.value.strip_prefix("log2:") {
            let v = log2.trim().parse::<f64>().map_err(|_| {
                err(format!(
                    "line {}: '{}.{}' has a malformed log2 value '{}'",
                    e.line, section, key, e.value
                ))
            })?;
            return Ok(LogProb::from_log2(v));
        }
        let v = e.value.parse::<f64>().map_err(|_| {
            err(format!(
                "line {}: '{}.{}' must be a probability, got '{}'",
                e.line, section, key, e.value
            ))
        })?;
        if !(v > 0.0 && v < 1.0) {
            return Err(err(format!(
                "line {}: '{}.{}' must lie strictly in (0, 1)",
                e.line, section, key
            )));
        }
        Ok(LogProb::from_linear(v))
    }

    /// Overrides one `section.key` with a numeric value (sweep axes).
    pub fn override_value(&mut self, dotted: &str, value: f64) -> Result<(), ConfigError> {
        let (section, key) = dotted
            .split_once('.')
            .ok_or_else(|| err(format!("sweep key '{dotted}' must look like section.key")))?;
        let allowed = SCHEMA
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| err(format!("sweep key '{dotted}' names an unknown section")))?;
        if !allowed.contains(&key) {
            return Err(err(format!("sweep key '{dotted}' names an unknown key")));
        }
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(
                key.to_string(),
                Entry {
                    value: format!("{value:e}"),
                    line: 0,
                },
            );
        Ok(())
    }

    pub fn detector(&self) -> Result<DetectorSpec, ConfigError> {
        let swap = if self.has("detector", "swap") {
            self.get_bool("detector", "swap")?
        } else {
            false
        };
        DetectorSpec::new(
            self.get_f64("detector", "eta_det")?,
            self.get_f64_or("detector", "delta_eta", 0.0)?,
            self.get_f64("detector", "dc_det")?,
            self.get_f64_or("detector", "delta_dc", 0.0)?,
            swap,
        )
        .map_err(|e| err(format!("[detector]: {e}")))
    }

    pub fn channel(&self) -> Result<ChannelModel, ConfigError> {
        let model = ChannelModel {
            loss_db: self.get_f64("channel", "loss_db")?,
            misalignment_deg: self.get_f64_or("channel", "misalignment_deg", 0.0)?,
            depolarization: self.get_f64_or("channel", "depolarization", 0.0)?,
            detector: self.detector()?,
        };
        model.validate().map_err(|e| err(format!("[channel]: {e}")))?;
        Ok(model)
    }

    pub fn intensities(&self) -> Result<IntensitySpec, ConfigError> {
        let mu = [
            self.get_f64("intensities", "mu1")?,
            self.get_f64("intensities", "mu2")?,
            self.get_f64("intensities", "mu3")?,
        ];
        let spec = if self.has("intensities", "p_mu1") {
            IntensitySpec::new(
                mu,
                [
                    self.get_f64("intensities", "p_mu1")?,
                    self.get_f64("intensities", "p_mu2")?,
                    self.get_f64("intensities", "p_mu3")?,
                ],
            )
        } else {
            IntensitySpec::with_equal_probs(mu)
        };
        spec.map_err(|e| err(format!("[intensities]: {e}")))
    }

    pub fn budget(&self, default_mode: BudgetMode) -> Result<EpsilonBudget, ConfigError> {
        let mode = if self.has("epsilon", "mode") {
            match self.get_str("epsilon", "mode")? {
                "qubit" => BudgetMode::Qubit,
                "decoy" => BudgetMode::Decoy,
                other => {
                    return Err(err(format!(
                        "'epsilon.mode' must be qubit or decoy, got '{other}'"
                    )))
                }
            }
        } else {
            default_mode
        };
        let eps_pa = self.get_eps("epsilon", "eps_pa")?;
        let eps_ev = self.get_eps("epsilon", "eps_ev")?;
        let eps_at = self.get_eps("epsilon", "eps_at")?;
        let budget = match mode {
            BudgetMode::Qubit => EpsilonBudget::qubit_even(eps_pa, eps_ev, eps_at),
            BudgetMode::Decoy => EpsilonBudget::decoy_even(eps_pa, eps_ev, eps_at),
        };
        budget.map_err(|e| err(format!("[epsilon]: {e}")))
    }

    pub fn protocol(&self, mode: BudgetMode) -> Result<ProtocolParams, ConfigError> {
        let params = ProtocolParams {
            n: self.get_u64("protocol", "n")?,
            alice_x_prob: self.get_f64_or("protocol", "alice_x_prob", 0.5)?,
            bob_x_prob: self.get_f64_or("protocol", "bob_x_prob", 0.5)?,
            intensities: if mode == BudgetMode::Decoy {
                Some(self.intensities()?)
            } else {
                None
            },
            budget: self.budget(mode)?,
            f_ec: self.get_f64_or("protocol", "f_ec", 1.16)?,
        };
        params.validate().map_err(|e| err(format!("[protocol]: {e}")))?;
        Ok(params)
    }
}
