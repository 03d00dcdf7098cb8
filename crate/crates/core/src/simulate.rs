//! Open-loop geometric replay of a command program on a metric grid.
//!
//! World frame: origin at the bottom-left corner of the grid, `x` along
//! columns, `y` up the rendered rows, yaw in degrees counter-clockwise from
//! `+x`. The robot is a point; its cell is whichever cell contains it.

use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::exec::Execution;
use crate::gridworld::{MapSpec, State};
use crate::motionplan::{plan, Command, CommandProgram, Heading, PlanConfig};
use crate::policy::ActionSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub map: MapSpec,
    /// Edge length of a square cell, cm.
    pub cell_size: f64,
    pub start_heading: Heading,
}

impl WorldModel {
    pub fn new(map: MapSpec, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell_size must be positive");
        WorldModel {
            map,
            cell_size,
            start_heading: Heading::MinusY,
        }
    }

    pub fn width(&self) -> f64 {
        self.map.n_cols() as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.map.n_rows() as f64 * self.cell_size
    }

    pub fn cell_center(&self, state: State) -> (f64, f64) {
        let (x, y) = self.map.state_xy(state);
        (
            (x as f64 + 0.5) * self.cell_size,
            (y as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn start_pose(&self) -> Pose {
        let (x, y) = self.cell_center(self.map.start_state());
        Pose {
            x,
            y,
            yaw: self.start_heading.yaw_deg() as f64,
        }
    }

    /// Cell containing a point, or `None` outside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<State> {
        if !(x >= 0.0 && y >= 0.0 && x < self.width() && y < self.height()) {
            return None;
        }
        let cx = (x / self.cell_size).floor() as usize;
        let cy = (y / self.cell_size).floor() as usize;
        self.map.xy_state(cx, cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Per-step distance noise, cm.
    pub step_sigma: f64,
    /// Per-turn yaw noise, degrees.
    pub turn_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            step_sigma: 0.0,
            turn_sigma: 0.0,
            seed: 0,
        }
    }

    /// Rng for one trial: the seed picks the key, the trial index the stream.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

/// Gaussian sample truncated to `[-3 sigma, 3 sigma]` by rejection.
/// Returns exactly zero without drawing when `sigma` is zero.
pub fn truncated_gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 3.0 {
            return z * sigma;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecOutcome {
    Success,
    /// Entered a hole cell after command `at`.
    HitObstacle {
        at: usize,
    },
    /// Left the grid after command `at`.
    OutOfGrid {
        at: usize,
    },
    MissedGoal,
}

impl ExecOutcome {
    pub fn is_success(self) -> bool {
        self == ExecOutcome::Success
    }
}

impl fmt::Display for ExecOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecOutcome::Success => write!(f, "Success"),
            ExecOutcome::HitObstacle { at } => write!(f, "HitObstacle at command {at}"),
            ExecOutcome::OutOfGrid { at } => write!(f, "OutOfGrid at command {at}"),
            ExecOutcome::MissedGoal => write!(f, "MissedGoal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// `trace[0]` is the start pose; `trace[k]` is the pose after `k` commands.
    pub trace: Vec<Pose>,
    /// Occupied cell for each trace pose; `None` once off the grid.
    pub cells: Vec<Option<State>>,
    pub outcome: ExecOutcome,
}

impl Replay {
    pub fn final_pose(&self) -> Pose {
        *self.trace.last().expect("trace holds the start pose")
    }

    /// Occupied cells with consecutive repeats collapsed.
    pub fn cell_sequence(&self) -> Vec<State> {
        let mut out: Vec<State> = Vec::new();
        for cell in self.cells.iter().flatten() {
            if out.last() != Some(cell) {
                out.push(*cell);
            }
        }
        out
    }

    /// `cmd_index,x,y,yaw` rows; row `k` is the pose after `k` commands.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("cmd_index,x,y,yaw\n");
        for (i, p) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", p.x, p.y, p.yaw);
        }
        out
    }
}

/// Unit heading vector; exact on quarter turns.
fn direction(yaw: f64) -> (f64, f64) {
    let r = yaw.rem_euclid(360.0);
    match r {
        0.0 => (1.0, 0.0),
        90.0 => (0.0, 1.0),
        180.0 => (-1.0, 0.0),
        270.0 => (0.0, -1.0),
        _ => {
            let rad = r.to_radians();
            (rad.cos(), rad.sin())
        }
    }
}

fn replay<R: Rng + ?Sized>(
    program: &CommandProgram,
    world: &WorldModel,
    noise: &NoiseModel,
    step_length: f64,
    rng: &mut R,
) -> Replay {
    let mut pose = world.start_pose();
    let mut trace = Vec::with_capacity(program.len() + 1);
    let mut cells = Vec::with_capacity(program.len() + 1);
    trace.push(pose);
    cells.push(world.cell_at(pose.x, pose.y));
    for (at, &cmd) in program.commands().iter().enumerate() {
        match cmd {
            Command::FwdStep | Command::RevStep => {
                let sign = if cmd == Command::FwdStep { 1.0 } else { -1.0 };
                let dist = sign * (step_length + truncated_gaussian(noise.step_sigma, rng));
                let (ux, uy) = direction(pose.yaw);
                pose.x += dist * ux;
                pose.y += dist * uy;
            }
            turn => {
                let yaw = pose.yaw + turn.yaw_change() + truncated_gaussian(noise.turn_sigma, rng);
                pose.yaw = yaw.rem_euclid(360.0);
            }
        }
        let cell = world.cell_at(pose.x, pose.y);
        trace.push(pose);
        cells.push(cell);
        match cell {
            None => {
                return Replay {
                    trace,
                    cells,
                    outcome: ExecOutcome::OutOfGrid { at },
                }
            }
            Some(s) if world.map.is_hole(s) => {
                return Replay {
                    trace,
                    cells,
                    outcome: ExecOutcome::HitObstacle { at },
                }
            }
            Some(_) => {}
        }
    }
    let outcome = if cells.last() == Some(&Some(world.map.goal_state())) {
        ExecOutcome::Success
    } else {
        ExecOutcome::MissedGoal
    };
    Replay {
        trace,
        cells,
        outcome,
    }
}

/// Replays `program` open loop. Noise draws come from trial stream 0.
pub fn execute(
    program: &CommandProgram,
    world: &WorldModel,
    noise: &NoiseModel,
    step_length: f64,
) -> Replay {
    execute_trial(program, world, noise, step_length, 0)
}

pub fn execute_trial(
    program: &CommandProgram,
    world: &WorldModel,
    noise: &NoiseModel,
    step_length: f64,
    trial: u64,
) -> Replay {
    replay(
        program,
        world,
        noise,
        step_length,
        &mut noise.trial_rng(trial),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepRow {
    pub multiplier: u32,
    pub successes: usize,
    pub trials: usize,
}

pub struct SweepSpec<'a> {
    pub world: &'a WorldModel,
    pub actions: &'a ActionSequence,
    pub multipliers: std::ops::RangeInclusive<u32>,
    pub trials: usize,
    pub noise: &'a NoiseModel,
    pub step_length: f64,
}

/// For each multiplier, plans `actions` and counts successful noisy replays.
/// Trial `t` uses noise stream `t` for every multiplier.
pub fn multiplier_sweep(spec: &SweepSpec<'_>, exec: Execution) -> Vec<SweepRow> {
    spec.multipliers
        .clone()
        .map(|multiplier| {
            let cfg = PlanConfig {
                initial_heading: spec.world.start_heading,
                multiplier,
                step_length: spec.step_length,
                cell_size: spec.world.cell_size,
            };
            let program = plan(spec.actions, &cfg);
            let successes = exec
                .map_range(spec.trials, |t| {
                    execute_trial(&program, spec.world, spec.noise, spec.step_length, t as u64)
                        .outcome
                        .is_success()
                })
                .into_iter()
                .filter(|ok| *ok)
                .count();
            SweepRow {
                multiplier,
                successes,
                trials: spec.trials,
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("multiplier,successes,trials\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.multiplier, r.successes, r.trials);
    }
    out
}
