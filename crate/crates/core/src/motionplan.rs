//! Lowering of grid actions to robot gait commands.
//!
//! The planner tracks the robot's heading in the y-up grid frame, emits
//! quarter turns to face each action's direction, then `multiplier` forward
//! creep cycles per cell.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gridworld::Action;
use crate::policy::ActionSequence;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("IllegalCode: {token:?} at position {index} is not a command code 0-5")]
    IllegalCode { index: usize, token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Heading {
    /// Yaw in degrees, counter-clockwise from +x.
    pub fn yaw_deg(self) -> i32 {
        match self {
            Heading::PlusX => 0,
            Heading::PlusY => 90,
            Heading::MinusX => 180,
            Heading::MinusY => 270,
        }
    }

    pub fn from_yaw_deg(yaw: i32) -> Option<Self> {
        match yaw.rem_euclid(360) {
            0 => Some(Heading::PlusX),
            90 => Some(Heading::PlusY),
            180 => Some(Heading::MinusX),
            270 => Some(Heading::MinusY),
            _ => None,
        }
    }

    pub fn of_action(action: Action) -> Self {
        match action {
            Action::Left => Heading::MinusX,
            Action::Right => Heading::PlusX,
            Action::Up => Heading::PlusY,
            Action::Down => Heading::MinusY,
        }
    }

    pub fn left(self) -> Self {
        Self::from_yaw_deg(self.yaw_deg() + 90).unwrap()
    }

    pub fn right(self) -> Self {
        Self::from_yaw_deg(self.yaw_deg() - 90).unwrap()
    }
}

impl FromStr for Heading {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+x" | "plus_x" => Ok(Heading::PlusX),
            "-x" | "minus_x" => Ok(Heading::MinusX),
            "+y" | "plus_y" => Ok(Heading::PlusY),
            "-y" | "minus_y" => Ok(Heading::MinusY),
            other => Err(format!("unknown heading {other:?}")),
        }
    }
}

/// Robot-level gait command. Discriminants are the wire codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Command {
    FwdStep = 0,
    RevStep = 1,
    TurnL10 = 2,
    TurnR10 = 3,
    TurnL90 = 4,
    TurnR90 = 5,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::FwdStep,
        Command::RevStep,
        Command::TurnL10,
        Command::TurnR10,
        Command::TurnL90,
        Command::TurnR90,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Yaw change in degrees; positive is a left (counter-clockwise) turn.
    pub fn yaw_change(self) -> f64 {
        match self {
            Command::FwdStep | Command::RevStep => 0.0,
            Command::TurnL10 => 10.0,
            Command::TurnR10 => -10.0,
            Command::TurnL90 => 90.0,
            Command::TurnR90 => -90.0,
        }
    }

    /// Firmware dispatcher mnemonic.
    pub fn mnemonic(self) -> &'static str {
        match self {
            Command::FwdStep => "FWD",
            Command::RevStep => "REV",
            Command::TurnL10 => "L10",
            Command::TurnR10 => "R10",
            Command::TurnL90 => "L90",
            Command::TurnR90 => "R90",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandProgram(pub Vec<Command>);

impl CommandProgram {
    pub fn commands(&self) -> &[Command] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn codes(&self) -> Vec<u8> {
        self.0.iter().map(|c| c.code()).collect()
    }

    pub fn count(&self, cmd: Command) -> usize {
        self.0.iter().filter(|c| **c == cmd).count()
    }

    pub fn encode(&self) -> String {
        self.to_string()
    }

    pub fn decode(line: &str) -> Result<Self, ProgramError> {
        line.parse()
    }
}

impl fmt::Display for CommandProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<String> = self.0.iter().map(|c| c.code().to_string()).collect();
        f.write_str(&codes.join(","))
    }
}

impl FromStr for CommandProgram {
    type Err = ProgramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(CommandProgram::default());
        }
        s.split(',')
            .enumerate()
            .map(|(index, tok)| {
                tok.trim()
                    .parse::<u8>()
                    .ok()
                    .and_then(Command::from_code)
                    .ok_or_else(|| ProgramError::IllegalCode {
                        index,
                        token: tok.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(CommandProgram)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub initial_heading: Heading,
    /// Forward creep cycles per grid cell.
    pub multiplier: u32,
    pub step_length: f64,
    pub cell_size: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            initial_heading: Heading::MinusY,
            multiplier: 9,
            step_length: 5.0,
            cell_size: 45.5,
        }
    }
}

/// Nearest whole number of steps covering one cell, at least one.
pub fn multiplier_for(cell_size: f64, step_length: f64) -> u32 {
    assert!(
        cell_size > 0.0 && step_length > 0.0,
        "lengths must be positive"
    );
    ((cell_size / step_length).round() as u32).max(1)
}

/// Turn commands taking `from` to `to`. A reversal is two right quarter turns.
pub fn turns_between(from: Heading, to: Heading) -> &'static [Command] {
    match (to.yaw_deg() - from.yaw_deg()).rem_euclid(360) {
        0 => &[],
        90 => &[Command::TurnL90],
        180 => &[Command::TurnR90, Command::TurnR90],
        270 => &[Command::TurnR90],
        _ => unreachable!("headings are quarter turns"),
    }
}

/// Lowers grid actions to gait commands; returns the program and final heading.
pub fn plan_with_heading(actions: &ActionSequence, cfg: &PlanConfig) -> (CommandProgram, Heading) {
    let mut heading = cfg.initial_heading;
    let mut out = Vec::with_capacity(actions.len() * (cfg.multiplier as usize + 1));
    for &action in actions.actions() {
        let target = Heading::of_action(action);
        out.extend_from_slice(turns_between(heading, target));
        heading = target;
        out.extend(std::iter::repeat_n(
            Command::FwdStep,
            cfg.multiplier as usize,
        ));
    }
    (CommandProgram(out), heading)
}

pub fn plan(actions: &ActionSequence, cfg: &PlanConfig) -> CommandProgram {
    plan_with_heading(actions, cfg).0
}
