//! Experiment configuration file: one flat `key = value` namespace covering
//! filter tuning, gait generation, simulated sensor noise and convergence bands.

use std::path::Path;

use crate::error::ConfigError;
use crate::gait::{default_bias, GaitConfig, SimNoise};
use crate::harness::{Channel, ConvergenceCriteria};
use crate::state::{parse_assignments, parse_number, BiasVector, NoiseParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub noise: NoiseParams,
    pub gait: GaitConfig,
    pub sim_noise: SimNoise,
    pub sim_bias: BiasVector,
    pub criteria: ConvergenceCriteria,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            noise: NoiseParams::default(),
            gait: GaitConfig::default(),
            sim_noise: SimNoise::default(),
            sim_bias: default_bias(),
            criteria: ConvergenceCriteria::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for entry in parse_assignments(text)? {
            let known = cfg
                .set(&entry.key, entry.value)
                .map_err(|e| e.at_line(entry.line))?;
            if !known {
                return Err(ConfigError::UnknownKey {
                    line: entry.line,
                    key: entry.key,
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise.validate()?;
        self.gait.validate()?;
        for (name, v) in [
            ("sim_std_gyro", self.sim_noise.std_gyro),
            ("sim_std_accel", self.sim_noise.std_accel),
            ("sim_std_fk", self.sim_noise.std_fk),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be >= 0")));
            }
        }
        if !(self.criteria.hold >= 0.0 && self.criteria.hold.is_finite()) {
            return Err(ConfigError::Invalid("conv_hold must be >= 0".into()));
        }
        for (c, b) in &self.criteria.bands {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(ConfigError::Invalid(format!("conv_band_{c} must be positive")));
            }
        }
        Ok(())
    }

    /// Sets one key; `Ok(false)` if the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        if self.noise.set(key, value)? {
            return Ok(true);
        }
        let g = &mut self.gait;
        let f = || parse_number::<f64>(key, value);
        match key {
            "step_length" => g.step_length = f()?,
            "turn_per_step" => g.turn_per_step = f()?,
            "step_time" => g.step_time = f()?,
            "dsp_time" => g.dsp_time = f()?,
            "control_rate" => g.control_rate = f()?,
            "n_steps" => g.n_steps = parse_number(key, value)?,
            "base_height" => g.base_height = f()?,
            "foot_separation" => g.foot_separation = f()?,
            "swing_height" => g.swing_height = f()?,
            "sway_amplitude" => g.sway_amplitude = f()?,
            "roll_amplitude" => g.roll_amplitude = f()?,
            "rng_seed" => g.rng_seed = parse_number(key, value)?,
            "sim_std_gyro" => self.sim_noise.std_gyro = f()?,
            "sim_std_accel" => self.sim_noise.std_accel = f()?,
            "sim_std_fk" => self.sim_noise.std_fk = f()?,
            "conv_hold" => self.criteria.hold = f()?,
            _ => return self.set_vector_or_band(key, value),
        }
        Ok(true)
    }

    fn set_vector_or_band(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        if let Some(rest) = key.strip_prefix("conv_band_") {
            let channel = Channel::ALL.into_iter().find(|c| c.name() == rest);
            return match channel {
                Some(c) => {
                    self.criteria.bands.insert(c, parse_number(key, value)?);
                    Ok(true)
                }
                None => Ok(false),
            };
        }
        let (target, axis) = match key.rsplit_once('_') {
            Some((head, axis)) => (head, axis),
            None => return Ok(false),
        };
        let i = match axis {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return Ok(false),
        };
        let slot = match target {
            "sim_bias_g" => &mut self.sim_bias.bg[i],
            "sim_bias_a" => &mut self.sim_bias.ba[i],
            _ => return Ok(false),
        };
        *slot = parse_number(key, value)?;
        Ok(true)
    }
}
