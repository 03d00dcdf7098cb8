//! Flat `key = value` configuration for the whole pipeline.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::path::PathBuf;

use thiserror::Error;

use crate::codegen::HeaderFormat;
use crate::gait::{neutral_gamma0, GaitParams};
use crate::motionplan::PlanConfig;
use crate::qlearn::Hyperparams;
use crate::simulate::NoiseModel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("UnknownKey: line {line}: {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("BadValue: line {line}: {key} = {value:?}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("SyntaxError: line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("InvalidConfig: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub hyper: Hyperparams,
    pub plan: PlanConfig,
    pub gait: GaitParams,
    pub noise: NoiseModel,
    /// Monte Carlo trials per multiplier in a sweep.
    pub trials: usize,
    pub sweep_min: u32,
    pub sweep_max: u32,
    pub format: HeaderFormat,
    pub map: Option<PathBuf>,
    pub out: PathBuf,
    /// Set when `gamma0` was given explicitly rather than derived.
    gamma0_explicit: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            hyper: Hyperparams::default(),
            plan: PlanConfig::default(),
            gait: GaitParams::default(),
            noise: NoiseModel::none(),
            trials: 100,
            sweep_min: 5,
            sweep_max: 10,
            format: HeaderFormat::Commands,
            map: None,
            out: PathBuf::from("out"),
            gamma0_explicit: false,
        }
    }
}

pub fn parse_format(s: &str) -> Result<HeaderFormat, String> {
    match s {
        "raw" => Ok(HeaderFormat::RawActions),
        "commands" => Ok(HeaderFormat::Commands),
        other => Err(format!("expected raw or commands, got {other:?}")),
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected true or false, got {other:?}")),
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set_at(key.trim(), value.trim(), i + 1)?;
        }
        self.finish()
    }

    /// Sets one key; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, 0)?;
        self.finish()
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let v = value;
        let result: Result<(), String> = match key {
            "alpha" => num(v).map(|x| self.hyper.alpha = x),
            "discount" => num(v).map(|x| self.hyper.discount = x),
            "eps_min" => num(v).map(|x| self.hyper.eps_min = x),
            "eps_max" => num(v).map(|x| self.hyper.eps_max = x),
            "decay_rate" => num(v).map(|x| self.hyper.decay_rate = x),
            "episodes" => num(v).map(|x| self.hyper.episodes = x),
            "max_steps" => num(v).map(|x| self.hyper.max_steps = x),
            "seed" => num(v).map(|x| self.hyper.seed = x),
            "slippery" => boolean(v).map(|x| self.hyper.slippery = x),
            "tie_break" => v
                .parse()
                .map(|x| self.hyper.tie_break = x)
                .map_err(|e| e.to_string()),
            "initial_heading" => v.parse().map(|x| self.plan.initial_heading = x),
            "multiplier" => num::<u32>(v).and_then(|x| {
                if x == 0 {
                    Err("multiplier must be at least 1".into())
                } else {
                    self.plan.multiplier = x;
                    Ok(())
                }
            }),
            "step_length" => num(v).map(|x| {
                self.plan.step_length = x;
                self.gait.step_length = x;
            }),
            "cell_size" => num(v).map(|x| self.plan.cell_size = x),
            "d" => num(v).map(|x| self.gait.d = x),
            "l0" => num(v).map(|x| self.gait.l0 = x),
            "toeout0" => num(v).map(|x| self.gait.toeout0 = x),
            "height0" => num(v).map(|x| self.gait.height0 = x),
            "gamma0" => num(v).map(|x| {
                self.gait.gamma0 = x;
                self.gamma0_explicit = true;
            }),
            "body_radius" => num(v).map(|x| self.gait.body_radius = x),
            "phi0" => num(v).map(|x| self.gait.phi0 = x),
            "lift_height" => num(v).map(|x| self.gait.lift_height = x),
            "body_shift" => num(v).map(|x| self.gait.body_shift = x),
            "timestep" => num(v).map(|x| self.gait.timestep = x),
            "max_servo_speed" => num(v).map(|x| self.gait.max_servo_speed = x),
            "step_sigma" => num(v).map(|x| self.noise.step_sigma = x),
            "turn_sigma" => num(v).map(|x| self.noise.turn_sigma = x),
            "noise_seed" => num(v).map(|x| self.noise.seed = x),
            "trials" => num(v).map(|x| self.trials = x),
            "sweep_min" => num(v).map(|x| self.sweep_min = x),
            "sweep_max" => num(v).map(|x| self.sweep_max = x),
            "format" => parse_format(v).map(|x| self.format = x),
            "map" => {
                self.map = Some(PathBuf::from(v));
                Ok(())
            }
            "out" => {
                self.out = PathBuf::from(v);
                Ok(())
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        };
        result.map_err(|reason| ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
            reason,
        })
    }

    /// Re-derives dependent fields and checks component invariants.
    fn finish(&mut self) -> Result<(), ConfigError> {
        if !self.gamma0_explicit {
            self.gait.gamma0 = neutral_gamma0(self.gait.toeout0, self.gait.height0);
        }
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.hyper.validate().map_err(|e| invalid(&e))?;
        self.gait.validate().map_err(|e| invalid(&e))?;
        if !(self.plan.cell_size > 0.0 && self.plan.step_length > 0.0) {
            return Err(ConfigError::Invalid(
                "cell_size and step_length must be positive".into(),
            ));
        }
        if !(self.noise.step_sigma >= 0.0 && self.noise.turn_sigma >= 0.0) {
            return Err(ConfigError::Invalid(
                "noise sigmas must be non-negative".into(),
            ));
        }
        if self.sweep_min == 0 || self.sweep_min > self.sweep_max {
            return Err(ConfigError::Invalid(
                "need 1 <= sweep_min <= sweep_max".into(),
            ));
        }
        Ok(())
    }
}
