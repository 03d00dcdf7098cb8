//! Grid Q-learning lowered to quadruped gait commands.
//!
//! The pipeline trains a tabular agent on a Frozen-Lake style map
//! ([`gridworld`], [`qlearn`]), extracts the greedy route ([`policy`]),
//! lowers it to creep-gait commands ([`motionplan`]), emits a firmware
//! header ([`codegen`]), expands the commands into 12-servo joint
//! trajectories ([`gait`]) and replays the program open loop on a metric
//! grid ([`simulate`]).
//!
//! Data-parallel loops go through [`exec::Execution`]; the `parallel`
//! feature (on by default) backs them with rayon.

pub mod codegen;
pub mod config;
pub mod exec;
pub mod gait;
pub mod gridworld;
pub mod motionplan;
pub mod pipeline;
pub mod policy;
pub mod qlearn;
pub mod simulate;

use thiserror::Error;

pub use exec::Execution;

/// Any stage failure. Display strings start with a machine-readable kind.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Map(#[from] gridworld::MapError),
    #[error(transparent)]
    Step(#[from] gridworld::StepError),
    #[error(transparent)]
    Q(#[from] qlearn::QError),
    #[error(transparent)]
    Sequence(#[from] policy::SequenceError),
    #[error(transparent)]
    Program(#[from] motionplan::ProgramError),
    #[error(transparent)]
    Header(#[from] codegen::HeaderError),
    #[error(transparent)]
    Gait(#[from] gait::GaitError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("RolloutFailed: greedy rollout ended with {0}")]
    RolloutFailed(policy::RolloutOutcome),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}
