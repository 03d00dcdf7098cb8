//! End-to-end composition: train, roll out, lower, emit, expand, replay.
//!
//! Every stage produces plain text so each boundary can be diffed.

use crate::codegen::{emit_header, HeaderFormat};
use crate::config::PipelineConfig;
use crate::exec::Execution;
use crate::gait::{expand_program_with, trajectory_csv, TrajectoryFrame};
use crate::gridworld::MapSpec;
use crate::motionplan::{plan, CommandProgram};
use crate::policy::{rollout, ActionSequence, Rollout, RolloutOutcome};
use crate::qlearn::{train, QTable, TrainingLog};
use crate::simulate::{execute, Replay, WorldModel};
use crate::Error;

/// Header payload for the chosen format.
pub fn header_payload(
    format: HeaderFormat,
    actions: &ActionSequence,
    program: &CommandProgram,
) -> Vec<u8> {
    match format {
        HeaderFormat::RawActions => actions.codes(),
        HeaderFormat::Commands => program.codes(),
    }
}

pub fn world_for(map: &MapSpec, cfg: &PipelineConfig) -> WorldModel {
    WorldModel {
        start_heading: cfg.plan.initial_heading,
        ..WorldModel::new(map.clone(), cfg.plan.cell_size)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub qtable: QTable,
    pub log: TrainingLog,
    pub rollout: Rollout,
    pub program: CommandProgram,
    pub header: String,
    pub trajectory: Vec<TrajectoryFrame>,
    pub replay: Replay,
}

impl PipelineRun {
    /// One `key=value` line summarising the run.
    pub fn verdict(&self) -> String {
        let end = self.replay.final_pose();
        format!(
            "verdict={} rollout={} actions={} commands={} frames={} final_x={} final_y={} final_yaw={}",
            self.replay.outcome,
            self.rollout.outcome,
            self.rollout.actions,
            self.program.len(),
            self.trajectory.len(),
            end.x,
            end.y,
            end.yaw
        )
        .replace(" at command ", "@")
    }

    /// `(file name, contents)` for every stage artifact.
    pub fn artifacts(&self) -> Vec<(&'static str, String)> {
        vec![
            ("qtable.csv", self.qtable.to_csv()),
            ("training_log.csv", self.log.to_csv()),
            ("actions.txt", format!("{}\n", self.rollout.actions)),
            ("program.txt", format!("{}\n", self.program)),
            ("dataArray.h", self.header.clone()),
            ("trajectory.csv", trajectory_csv(&self.trajectory)),
            ("trace.csv", self.replay.trace_csv()),
            ("verdict.txt", format!("{}\n", self.verdict())),
        ]
    }
}

pub fn run_pipeline(
    map: &MapSpec,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<PipelineRun, Error> {
    let (qtable, log) = train(map, &cfg.hyper)?;
    let rollout = rollout(map, &qtable, cfg.hyper.max_steps);
    if rollout.outcome != RolloutOutcome::ReachedGoal {
        return Err(Error::RolloutFailed(rollout.outcome));
    }
    let program = plan(&rollout.actions, &cfg.plan);
    let header = emit_header(
        &header_payload(cfg.format, &rollout.actions, &program),
        cfg.format,
    )?;
    let trajectory = expand_program_with(&program, &cfg.gait, exec)?;
    let replay = execute(
        &program,
        &world_for(map, cfg),
        &cfg.noise,
        cfg.plan.step_length,
    );
    Ok(PipelineRun {
        qtable,
        log,
        rollout,
        program,
        header,
        trajectory,
        replay,
    })
}
