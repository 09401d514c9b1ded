//! TOML scenario files.
//!
//! User-facing units are GHz (frequencies), MHz (couplings), microseconds
//! (photon lifetimes `1/kappa`) and nanoseconds (integrator times). They
//! are converted to rad/s and seconds here and nowhere else.
//!
//! ```toml
//! name = "trq_fig2"
//!
//! [bus]
//! freq_ghz = 6.25
//! kappa_inv_us = 10.0
//!
//! [[resonators]]
//! label = "r1"
//! freq_ghz = 5.75
//! g_mhz = 50.0
//! kappa_inv_us = 10.0
//!
//! [sim]
//! dt_ns = 0.01
//! t_max_ns = 50.0
//! frame = "interaction"      # optional
//! fock_dim = 2               # optional, default: initial excitations + 1
//! gprime_formula = "half"    # optional
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{
    consecutive_pairs, Frame, GPrimeFormula, DEFAULT_DISPERSIVE_WARN_THRESHOLD, TWO_PI,
};
use crate::engine::IntegratorConfig;
use crate::error::{Error, Result};
use crate::scenario::{bell_targets_for_pairs, device_from_lab_units, BasisKind, Scenario};

pub const DEFAULT_SAMPLE_EVERY: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersive_warn_threshold: Option<f64>,
    pub bus: BusSection,
    pub resonators: Vec<ResonatorSection>,
    pub sim: SimSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSection {
    pub freq_ghz: f64,
    pub kappa_inv_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub label: String,
    pub freq_ghz: f64,
    pub g_mhz: f64,
    pub kappa_inv_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt_ns: f64,
    pub t_max_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gprime_formula: Option<GPrimeFormula>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<usize>,
    /// Initial photon numbers, resonators in order then the bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<usize>>,
    /// Resonator index pairs to entangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisKind>,
}

pub fn parse_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".into());
    parse_config_str(&text, &fallback)
}

/// Parses a config document; `default_name` is used when it has no `name`.
pub fn parse_config_str(text: &str, default_name: &str) -> Result<Scenario> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::config(path, inner.message().to_string())
    })?;
    file.into_scenario(default_name)
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && !v.is_nan() {
        Ok(v)
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn finite_positive(path: &str, v: f64) -> Result<f64> {
    positive(path, v).and_then(|v| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::config(path, "must be finite"))
        }
    })
}

impl ConfigFile {
    pub fn into_scenario(self, default_name: &str) -> Result<Scenario> {
        finite_positive("bus.freq_ghz", self.bus.freq_ghz)?;
        positive("bus.kappa_inv_us", self.bus.kappa_inv_us)?;
        if self.resonators.is_empty() {
            return Err(Error::config("resonators", "at least one resonator is required"));
        }
        for (i, r) in self.resonators.iter().enumerate() {
            finite_positive(&format!("resonators[{i}].freq_ghz"), r.freq_ghz)?;
            if !(r.g_mhz >= 0.0 && r.g_mhz.is_finite()) {
                return Err(Error::config(
                    format!("resonators[{i}].g_mhz"),
                    format!("must be non-negative and finite, got {}", r.g_mhz),
                ));
            }
            positive(&format!("resonators[{i}].kappa_inv_us"), r.kappa_inv_us)?;
            if self.resonators[..i].iter().any(|o| o.label == r.label) {
                return Err(Error::config(format!("resonators[{i}].label"), "labels must be unique"));
            }
        }
        let dt_ns = finite_positive("sim.dt_ns", self.sim.dt_ns)?;
        let t_max_ns = finite_positive("sim.t_max_ns", self.sim.t_max_ns)?;
        let n_res = self.resonators.len();

        let pairs = match self.sim.pairs {
            Some(p) => p,
            None => consecutive_pairs(n_res).unwrap_or_default(),
        };
        let initial = match self.sim.initial {
            Some(v) => v,
            None => {
                let mut v = vec![0; n_res + 1];
                if pairs.is_empty() {
                    v[0] = 1;
                }
                for &(a, _) in &pairs {
                    if a < n_res {
                        v[a] = 1;
                    }
                }
                v
            }
        };
        if initial.len() != n_res + 1 {
            return Err(Error::config(
                "sim.initial",
                format!("expected {} entries (resonators then bus), got {}", n_res + 1, initial.len()),
            ));
        }
        let excitations: usize = initial.iter().sum();
        let fock_dim = self.sim.fock_dim.unwrap_or((excitations + 1).max(2));
        if fock_dim < 2 {
            return Err(Error::config("sim.fock_dim", "must be at least 2"));
        }
        if let Some(m) = initial.iter().position(|&n| n >= fock_dim) {
            return Err(Error::config(
                format!("sim.initial[{m}]"),
                format!("{} photons do not fit in fock_dim {fock_dim}", initial[m]),
            ));
        }
        let sample_every = self.sim.sample_every.unwrap_or(DEFAULT_SAMPLE_EVERY);
        if sample_every == 0 {
            return Err(Error::config("sim.sample_every", "must be at least 1"));
        }
        let threshold = self
            .dispersive_warn_threshold
            .unwrap_or(DEFAULT_DISPERSIVE_WARN_THRESHOLD);
        positive("dispersive_warn_threshold", threshold)?;

        let specs: Vec<(&str, f64, f64, f64)> = self
            .resonators
            .iter()
            .map(|r| (r.label.as_str(), r.freq_ghz, r.g_mhz, r.kappa_inv_us))
            .collect();
        let mut device = device_from_lab_units(self.bus.freq_ghz, self.bus.kappa_inv_us, &specs, fock_dim);
        device.dispersive_warn_threshold = threshold;

        let scenario = Scenario {
            name: self.name.unwrap_or_else(|| default_name.to_string()),
            device,
            initial_occupations: initial,
            targets: bell_targets_for_pairs(&pairs),
            pairs,
            integrator: IntegratorConfig::new(dt_ns / 1e9, t_max_ns / 1e9, sample_every),
            frame: self.sim.frame.unwrap_or(Frame::Interaction),
            gprime_formula: self.sim.gprime_formula.unwrap_or(GPrimeFormula::Half),
            basis: self.sim.basis.unwrap_or(BasisKind::Full),
        };
        scenario.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(format!("sim.{name}"), reason),
            other => Error::config("sim", other.to_string()),
        })?;
        Ok(scenario)
    }
}

/// Rounds to 12 significant digits so unit conversions read back cleanly.
fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn lifetime_us(kappa: f64) -> f64 {
    if kappa == 0.0 {
        f64::INFINITY
    } else {
        sig12(1.0 / kappa * 1e6)
    }
}

impl ConfigFile {
    /// Config-file form of a scenario, in laboratory units.
    pub fn from_scenario(s: &Scenario) -> Self {
        let d = &s.device;
        ConfigFile {
            name: Some(s.name.clone()),
            dispersive_warn_threshold: (d.dispersive_warn_threshold != DEFAULT_DISPERSIVE_WARN_THRESHOLD)
                .then_some(d.dispersive_warn_threshold),
            bus: BusSection {
                freq_ghz: sig12(d.bus_omega / (TWO_PI * 1e9)),
                kappa_inv_us: lifetime_us(d.bus_kappa),
            },
            resonators: d
                .resonators
                .iter()
                .map(|r| ResonatorSection {
                    label: r.label.clone(),
                    freq_ghz: sig12(r.omega / (TWO_PI * 1e9)),
                    g_mhz: sig12(r.g / (TWO_PI * 1e6)),
                    kappa_inv_us: lifetime_us(r.kappa),
                })
                .collect(),
            sim: SimSection {
                dt_ns: sig12(s.integrator.dt * 1e9),
                t_max_ns: sig12(s.integrator.t_max * 1e9),
                frame: Some(s.frame),
                fock_dim: Some(d.bus_fock_dim),
                gprime_formula: Some(s.gprime_formula),
                sample_every: Some(s.integrator.sample_every),
                initial: Some(s.initial_occupations.clone()),
                pairs: Some(s.pairs.clone()),
                basis: Some(s.basis),
            },
        }
    }
}

pub fn scenario_to_toml(s: &Scenario) -> Result<String> {
    toml::to_string(&ConfigFile::from_scenario(s)).map_err(|e| Error::Serialization(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, builtin_scenarios, TRQ_FIG2};

    const TRQ_TOML: &str = r#"
name = "trq_fig2"

[bus]
freq_ghz = 6.25
kappa_inv_us = 10.0

[[resonators]]
label = "r1"
freq_ghz = 5.75
g_mhz = 50.0
kappa_inv_us = 10.0

[[resonators]]
label = "r2"
freq_ghz = 5.75
g_mhz = 50.0
kappa_inv_us = 10.0

[sim]
dt_ns = 0.01
t_max_ns = 50.0
frame = "interaction"
fock_dim = 2
gprime_formula = "half"
"#;

    #[test]
    fn handwritten_trq_file_matches_builtin() {
        let parsed = parse_config_str(TRQ_TOML, "x").unwrap();
        assert_eq!(parsed, builtin_scenario(TRQ_FIG2).unwrap());
        let expected = 2.0 * std::f64::consts::PI * 5.75e9;
        assert!((parsed.device.resonators[0].omega - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn builtins_round_trip_exactly() {
        for s in builtin_scenarios() {
            let text = scenario_to_toml(&s).unwrap();
            let back = parse_config_str(&text, "x").unwrap();
            assert_eq!(back, s, "{}", s.name);
            assert_eq!(scenario_to_toml(&back).unwrap(), text);
        }
    }

    #[test]
    fn negative_lifetime_names_key() {
        let text = TRQ_TOML.replacen("kappa_inv_us = 10.0\n\n[[resonators]]\nlabel = \"r2\"", "kappa_inv_us = -3.0\n\n[[resonators]]\nlabel = \"r2\"", 1);
        let err = parse_config_str(&text, "x").unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "resonators[0].kappa_inv_us"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_missing_and_non_numeric_keys() {
        let unknown = TRQ_TOML.replace("dt_ns = 0.01", "dt_ns = 0.01\nbogus = 1");
        let Error::Config { path, message } = parse_config_str(&unknown, "x").unwrap_err() else {
            panic!()
        };
        assert!(path.starts_with("sim"), "{path}");
        assert!(message.contains("bogus"), "{message}");

        let missing = TRQ_TOML.replacen("g_mhz = 50.0\n", "", 1);
        let Error::Config { path, message } = parse_config_str(&missing, "x").unwrap_err() else {
            panic!()
        };
        assert!(path.starts_with("resonators"), "{path}");
        assert!(message.contains("g_mhz"), "{message}");

        let text = TRQ_TOML.replace("freq_ghz = 6.25", "freq_ghz = \"fast\"");
        let Error::Config { path, .. } = parse_config_str(&text, "x").unwrap_err() else {
            panic!()
        };
        assert_eq!(path, "bus.freq_ghz");
    }

    #[test]
    fn defaults_fill_in() {
        let text = TRQ_TOML
            .replace("frame = \"interaction\"\n", "")
            .replace("fock_dim = 2\n", "")
            .replace("gprime_formula = \"half\"\n", "")
            .replace("name = \"trq_fig2\"\n", "");
        let s = parse_config_str(&text, "from_file").unwrap();
        assert_eq!(s.name, "from_file");
        assert_eq!(s.device.mode_dims(), vec![2, 2, 2]);
        assert_eq!(s.initial_occupations, vec![1, 0, 0]);
        assert_eq!(s.frame, Frame::Interaction);
    }

    #[test]
    fn infinite_lifetime_means_no_decay() {
        let text = TRQ_TOML.replace("kappa_inv_us = 10.0", "kappa_inv_us = inf");
        let s = parse_config_str(&text, "x").unwrap();
        assert_eq!(s.device.bus_kappa, 0.0);
        assert!(s.device.resonators.iter().all(|r| r.kappa == 0.0));
        let back = parse_config_str(&scenario_to_toml(&s).unwrap(), "x").unwrap();
        assert_eq!(back, s);
    }
}
