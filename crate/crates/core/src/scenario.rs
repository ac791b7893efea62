//! Scenario constants and the `key=value` configuration format.
//!
//! A config file holds one `key=value` pair per line; `#` starts a comment.
//! Keys are the short symbols used throughout the crate (`K`, `N`, `T`,
//! `delta`, `H`, `rho0`, `N0`, `Bmax`, `Pmax`, `gamma_th`, `Vmin`, `Vmax`,
//! `epsilon`, `Lmax`, `Minner`, `Mouter`, `Ve`, `seed`, `safe_radius`, `R0`,
//! `r_pert`, `dual_tol`). Logarithmic units are accepted through suffixed
//! keys (`Pmax_dBm`, `Pmax_W`, `rho0_dB`, `N0_dBm_Hz`) and converted to
//! linear SI values on load. Keys not present take the default values of
//! [`default_config`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Every physical and algorithmic constant of a scenario. SI units
/// throughout; powers in W, bandwidth in Hz, rates in bit/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of ground users `K`.
    pub users: usize,
    /// Number of time slots `N` in one trajectory adjustment period.
    pub slots: usize,
    /// Trajectory adjustment period `T` (s).
    pub period: f64,
    /// Slot length `delta = T / N` (s).
    pub slot_length: f64,
    /// Flight altitude `H` (m).
    pub altitude: f64,
    /// Channel power gain at 1 m (linear).
    pub rho0: f64,
    /// Noise power spectral density `N0` (W/Hz).
    pub noise_psd: f64,
    /// Total bandwidth `B_max` (Hz).
    pub bandwidth_max: f64,
    /// Peak transmit power `P_max` (W).
    pub power_max: f64,
    /// Per-slot rate floor for scheduled users (bit/s).
    pub rate_threshold: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Outer-loop stopping tolerance on the max-min throughput (bit/s).
    pub epsilon: f64,
    /// Outer iteration cap `L_max`.
    pub max_iterations: usize,
    pub dual_inner_iterations: usize,
    pub dual_outer_iterations: usize,
    /// Relative tolerance on the dual multiplier change.
    pub dual_tolerance: f64,
    /// Speed of the group reference point `V_e` (m/s).
    pub group_speed: f64,
    pub seed: u64,
    /// Minimum turning radius of the airframe (m).
    pub safe_radius: f64,
    /// Radius of the disk the users' fixed offsets are drawn from (m).
    pub group_radius: f64,
    /// Radius of the per-slot positional jitter (m).
    pub perturbation_radius: f64,
}

/// The evaluation setup: 6 users, 500 m altitude, 30 dBm, -50 dB reference
/// gain, 8 Mbit/s floor, 20 MHz, -169 dBm/Hz noise, 20..100 m/s, 1 s slots.
pub fn default_config() -> ScenarioConfig {
    ScenarioConfig {
        users: 6,
        slots: 120,
        period: 120.0,
        slot_length: 1.0,
        altitude: 500.0,
        rho0: db_to_linear(-50.0),
        noise_psd: dbm_to_watts(-169.0),
        bandwidth_max: 20e6,
        power_max: dbm_to_watts(30.0),
        rate_threshold: 8e6,
        speed_min: 20.0,
        speed_max: 100.0,
        epsilon: 1e-3,
        max_iterations: 50,
        dual_inner_iterations: 200,
        dual_outer_iterations: 100,
        dual_tolerance: 1e-4,
        group_speed: 5.0,
        seed: 1,
        safe_radius: 200.0,
        group_radius: 300.0,
        perturbation_radius: 2.0,
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        default_config()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::parse_with_overrides(&text, &[])
}

/// Splits `key=value` text into pairs, keeping the 1-based line number.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: idx + 1,
                message: format!("expected key=value, found {line:?}"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: idx + 1,
                message: "empty key".into(),
            });
        }
        pairs.push((idx + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("{key}: not a number: {value:?}"),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("{key}: not a non-negative integer: {value:?}"),
    })
}

impl ScenarioConfig {
    /// Parses config text, then applies `key=value` overrides on top.
    ///
    /// Overriding exactly one of `T`/`N` re-derives the other from `delta`
    /// unless the override list pins it too.
    pub fn parse_with_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<ScenarioConfig, ConfigError> {
        let mut pairs = parse_pairs(text)?;
        let overridden = |k: &str| overrides.iter().any(|(key, _)| key == k);
        if overridden("T") && !overridden("N") {
            pairs.retain(|(_, k, _)| k != "N");
        }
        if overridden("N") && !overridden("T") {
            pairs.retain(|(_, k, _)| k != "T");
        }
        pairs.extend(overrides.iter().map(|(k, v)| (0, k.clone(), v.clone())));

        let mut cfg = default_config();
        let mut given_t = None;
        let mut given_n = None;
        let mut given_delta = None;
        for (line, key, value) in &pairs {
            let (line, key, value) = (*line, key.as_str(), value.as_str());
            match key {
                "K" => cfg.users = parse_usize(line, key, value)?,
                "N" => given_n = Some(parse_usize(line, key, value)?),
                "T" => given_t = Some(parse_f64(line, key, value)?),
                "delta" => given_delta = Some(parse_f64(line, key, value)?),
                "H" => cfg.altitude = parse_f64(line, key, value)?,
                "rho0" => cfg.rho0 = parse_f64(line, key, value)?,
                "rho0_dB" => cfg.rho0 = db_to_linear(parse_f64(line, key, value)?),
                "N0" | "N0_W_Hz" => cfg.noise_psd = parse_f64(line, key, value)?,
                "N0_dBm_Hz" => cfg.noise_psd = dbm_to_watts(parse_f64(line, key, value)?),
                "Bmax" | "Bmax_Hz" => cfg.bandwidth_max = parse_f64(line, key, value)?,
                "Bmax_MHz" => cfg.bandwidth_max = parse_f64(line, key, value)? * 1e6,
                "Pmax" | "Pmax_W" => cfg.power_max = parse_f64(line, key, value)?,
                "Pmax_dBm" => cfg.power_max = dbm_to_watts(parse_f64(line, key, value)?),
                "gamma_th" => cfg.rate_threshold = parse_f64(line, key, value)?,
                "Vmin" => cfg.speed_min = parse_f64(line, key, value)?,
                "Vmax" => cfg.speed_max = parse_f64(line, key, value)?,
                "epsilon" => cfg.epsilon = parse_f64(line, key, value)?,
                "Lmax" => cfg.max_iterations = parse_usize(line, key, value)?,
                "Minner" => cfg.dual_inner_iterations = parse_usize(line, key, value)?,
                "Mouter" => cfg.dual_outer_iterations = parse_usize(line, key, value)?,
                "dual_tol" => cfg.dual_tolerance = parse_f64(line, key, value)?,
                "Ve" => cfg.group_speed = parse_f64(line, key, value)?,
                "seed" => {
                    cfg.seed = value.parse::<u64>().map_err(|_| ConfigError::Parse {
                        line,
                        message: format!("seed: not a 64-bit unsigned integer: {value:?}"),
                    })?
                }
                "safe_radius" => cfg.safe_radius = parse_f64(line, key, value)?,
                "R0" => cfg.group_radius = parse_f64(line, key, value)?,
                "r_pert" => cfg.perturbation_radius = parse_f64(line, key, value)?,
                other => {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.resolve_timing(given_t, given_n, given_delta)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_timing(
        &mut self,
        t: Option<f64>,
        n: Option<usize>,
        delta: Option<f64>,
    ) -> Result<(), ConfigError> {
        let default = default_config();
        match (t, n, delta) {
            (Some(t), Some(n), Some(d)) => {
                self.period = t;
                self.slots = n;
                self.slot_length = d;
            }
            (Some(t), Some(n), None) => {
                self.period = t;
                self.slots = n;
                self.slot_length = if n > 0 { t / n as f64 } else { f64::NAN };
            }
            (None, Some(n), d) => {
                self.slots = n;
                self.slot_length = d.unwrap_or(default.slot_length);
                self.period = n as f64 * self.slot_length;
            }
            (t, None, d) => {
                self.period = t.unwrap_or(default.period);
                self.slot_length = d.unwrap_or(default.slot_length);
                if !(self.slot_length > 0.0) || !self.period.is_finite() {
                    return Err(invalid("delta", "slot length must be positive"));
                }
                let n = (self.period / self.slot_length).round();
                if !(0.0..1e9).contains(&n) {
                    return Err(invalid("N", format!("T/delta = {n} slots is out of range")));
                }
                self.slots = n as usize;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        }
        fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(
                    field,
                    format!("must be finite and non-negative, got {v}"),
                ))
            }
        }
        if self.users < 1 {
            return Err(invalid("K", "need at least one user"));
        }
        if self.slots < 2 {
            return Err(invalid("N", "need at least two slots"));
        }
        positive("T", self.period)?;
        positive("delta", self.slot_length)?;
        let implied = self.slots as f64 * self.slot_length;
        if (implied - self.period).abs() > 1e-9 * self.period {
            return Err(invalid(
                "N",
                format!(
                    "N*delta = {implied} does not match T = {} (N={}, delta={})",
                    self.period, self.slots, self.slot_length
                ),
            ));
        }
        positive("H", self.altitude)?;
        positive("rho0", self.rho0)?;
        positive("N0", self.noise_psd)?;
        positive("Bmax", self.bandwidth_max)?;
        positive("Pmax", self.power_max)?;
        non_negative("gamma_th", self.rate_threshold)?;
        positive("Vmin", self.speed_min)?;
        positive("Vmax", self.speed_max)?;
        if self.speed_min > self.speed_max {
            return Err(invalid(
                "Vmin/Vmax",
                format!(
                    "Vmin = {} exceeds Vmax = {}",
                    self.speed_min, self.speed_max
                ),
            ));
        }
        positive("epsilon", self.epsilon)?;
        if self.max_iterations < 1 {
            return Err(invalid("Lmax", "need at least one outer iteration"));
        }
        if self.dual_inner_iterations < 1 {
            return Err(invalid("Minner", "need at least one iteration"));
        }
        if self.dual_outer_iterations < 1 {
            return Err(invalid("Mouter", "need at least one iteration"));
        }
        positive("dual_tol", self.dual_tolerance)?;
        non_negative("Ve", self.group_speed)?;
        positive("safe_radius", self.safe_radius)?;
        non_negative("R0", self.group_radius)?;
        non_negative("r_pert", self.perturbation_radius)?;
        Ok(())
    }

    /// Serialises every field in the config-file format. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("K", self.users.to_string());
        put("N", self.slots.to_string());
        put("T", format!("{:?}", self.period));
        put("delta", format!("{:?}", self.slot_length));
        put("H", format!("{:?}", self.altitude));
        put("rho0", format!("{:?}", self.rho0));
        put("N0", format!("{:?}", self.noise_psd));
        put("Bmax", format!("{:?}", self.bandwidth_max));
        put("Pmax", format!("{:?}", self.power_max));
        put("gamma_th", format!("{:?}", self.rate_threshold));
        put("Vmin", format!("{:?}", self.speed_min));
        put("Vmax", format!("{:?}", self.speed_max));
        put("epsilon", format!("{:?}", self.epsilon));
        put("Lmax", self.max_iterations.to_string());
        put("Minner", self.dual_inner_iterations.to_string());
        put("Mouter", self.dual_outer_iterations.to_string());
        put("dual_tol", format!("{:?}", self.dual_tolerance));
        put("Ve", format!("{:?}", self.group_speed));
        put("seed", self.seed.to_string());
        put("safe_radius", format!("{:?}", self.safe_radius));
        put("R0", format!("{:?}", self.group_radius));
        put("r_pert", format!("{:?}", self.perturbation_radius));
        s
    }

    /// Maximum per-slot flight distance `V_max * delta`.
    pub fn max_step(&self) -> f64 {
        self.speed_max * self.slot_length
    }

    /// Minimum per-slot flight distance `V_min * delta`.
    pub fn min_step(&self) -> f64 {
        self.speed_min * self.slot_length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse_with_overrides(text, &[])
    }

    #[test]
    fn defaults_are_valid_and_in_linear_units() {
        let cfg = default_config();
        cfg.validate().unwrap();
        assert!((cfg.power_max - 1.0).abs() < 1e-15);
        assert!((cfg.rho0 - 1e-5).abs() < 1e-20);
        // -169 dBm/Hz = 10^(-19.9) W/Hz
        assert!((cfg.noise_psd - 1.2589e-20).abs() / 1.2589e-20 < 1e-4);
        assert_eq!(cfg.epsilon, 1e-3);
        assert_eq!(cfg.safe_radius, 200.0);
        assert_eq!(cfg.users, 6);
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse("").unwrap(), default_config());
        assert_eq!(parse("# only a comment\n\n").unwrap(), default_config());
    }

    #[test]
    fn single_key_overrides_one_field() {
        let cfg = parse("K=6\n").unwrap();
        assert_eq!(cfg, default_config());
        let cfg = parse("K = 9 # nine users\n").unwrap();
        assert_eq!(cfg.users, 9);
    }

    #[test]
    fn speed_bounds_violation_names_fields() {
        let err = parse("Vmin=100\nVmax=20\n").unwrap_err();
        match err {
            ConfigError::Validation { field, .. } => assert_eq!(field, "Vmin/Vmax"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_is_a_parse_error() {
        match parse("K=6\nnonsense\n").unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("K=x").unwrap_err(),
            ConfigError::Parse { .. }
        ));
        assert!(matches!(
            parse("bogus=1").unwrap_err(),
            ConfigError::Parse { .. }
        ));
    }

    #[test]
    fn log_unit_keys_convert() {
        let cfg = parse("Pmax_dBm=33\nrho0_dB=-60\nN0_dBm_Hz=-174\n").unwrap();
        assert!((cfg.power_max - 1.9952623149688795).abs() < 1e-12);
        assert!((cfg.rho0 - 1e-6).abs() < 1e-21);
        assert!((cfg.noise_psd - 10f64.powf(-20.4)).abs() < 1e-33);
    }

    #[test]
    fn slot_count_derived_from_period() {
        let cfg = parse("T=60\ndelta=2\n").unwrap();
        assert_eq!(cfg.slots, 30);
        let cfg = parse("T=90\n").unwrap();
        assert_eq!(cfg.slots, 90);
        let cfg = parse("N=40\nT=80\n").unwrap();
        assert_eq!(cfg.slot_length, 2.0);
        assert!(parse("T=60\nN=50\ndelta=1\n").is_err());
        assert!(parse("T=60.5\ndelta=1\n").is_err());
    }

    #[test]
    fn overriding_period_rederives_slots() {
        let base = "T=120\nN=120\ndelta=1\n";
        let cfg = ScenarioConfig::parse_with_overrides(base, &[("T".into(), "60".into())]).unwrap();
        assert_eq!(cfg.slots, 60);
        assert_eq!(cfg.period, 60.0);
    }

    #[test]
    fn infinite_epsilon_is_accepted() {
        let cfg = parse("epsilon=inf").unwrap();
        assert!(cfg.epsilon.is_infinite());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut cfg = default_config();
        cfg.power_max = 0.1 + 0.2;
        cfg.seed = u64::MAX;
        cfg.group_speed = 1.0 / 3.0;
        let back = parse(&cfg.to_config_text()).unwrap();
        assert_eq!(back, cfg);
    }
}
