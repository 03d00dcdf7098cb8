use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lakewalk::codegen::{emit_header, HeaderError};
use lakewalk::config::PipelineConfig;
use lakewalk::gait::{expand_program_with, trajectory_csv};
use lakewalk::gridworld::MapSpec;
use lakewalk::motionplan::{plan, CommandProgram};
use lakewalk::pipeline::{run_pipeline, world_for};
use lakewalk::policy::{rollout, ActionSequence, RolloutOutcome};
use lakewalk::qlearn::{train, QTable};
use lakewalk::simulate::{execute, multiplier_sweep, sweep_csv, SweepSpec};
use lakewalk::{Error, Execution};

/// Exit status when every stage ran but the replay did not end on the goal.
const EXIT_NOT_SUCCESS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lakewalk",
    version,
    about = "Grid Q-learning to quadruped gait commands"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Map file (rows of S, F, H, G); defaults to the built-in 4x4 lake.
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    slippery: bool,
    #[arg(long, global = true)]
    multiplier: Option<u32>,
    /// Header payload: raw (grid actions) or commands (gait commands).
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Per-step translation noise sigma in cm.
    #[arg(long = "noise-step", global = true)]
    noise_step: Option<f64>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a Q-table; writes qtable.csv and training_log.csv.
    Train,
    /// Greedy rollout of a Q-table; writes actions.txt.
    Rollout {
        #[arg(long)]
        qtable: PathBuf,
    },
    /// Lower grid actions to gait commands; writes program.txt.
    Plan {
        #[arg(long)]
        actions: PathBuf,
    },
    /// Emit the firmware header dataArray.h from a comma-separated code list.
    Emit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Expand a command program to joint angles; writes trajectory.csv.
    Gait {
        #[arg(long)]
        program: PathBuf,
    },
    /// Replay a command program on the metric grid; writes trace.csv.
    Simulate {
        #[arg(long)]
        program: PathBuf,
    },
    /// Success counts per multiplier for an action sequence; writes sweep.csv.
    Sweep {
        #[arg(long)]
        actions: PathBuf,
    },
    /// Run every stage and write all artifacts plus verdict.txt.
    Pipeline,
}

struct Ctx {
    cfg: PipelineConfig,
    map: MapSpec,
    exec: Execution,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn context(c: &Common) -> Result<Ctx, Error> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &c.config {
        cfg.apply_text(&read(path)?)?;
    }
    let mut set = |key: &str, value: Option<String>| -> Result<(), Error> {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
        Ok(())
    };
    set("seed", c.seed.map(|v| v.to_string()))?;
    set("slippery", c.slippery.then(|| "true".into()))?;
    set("multiplier", c.multiplier.map(|v| v.to_string()))?;
    set("format", c.format.clone())?;
    set("trials", c.trials.map(|v| v.to_string()))?;
    set("step_sigma", c.noise_step.map(|v| v.to_string()))?;
    set("map", c.map.as_ref().map(|p| p.display().to_string()))?;
    set("out", c.out.as_ref().map(|p| p.display().to_string()))?;
    let map = match &cfg.map {
        Some(path) => read(path)?.parse()?,
        None => MapSpec::default_4x4(),
    };
    let exec = if c.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    Ok(Ctx { cfg, map, exec })
}

/// Comma-separated integer codes; range checks are left to the header emitter.
fn parse_codes(text: &str) -> Result<Vec<i64>, HeaderError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut offset = 0;
    let mut codes = Vec::new();
    for tok in text.split(',') {
        let lead = tok.len() - tok.trim_start().len();
        let code = tok
            .trim()
            .parse::<i64>()
            .map_err(|_| HeaderError::MalformedHeader {
                offset: offset + lead,
                reason: format!("payload token {:?} is not an integer", tok.trim()),
            })?;
        codes.push(code);
        offset += tok.len() + 1;
    }
    Ok(codes)
}

fn emit(codes: &[i64], ctx: &Ctx) -> Result<String, Error> {
    let format = ctx.cfg.format;
    let mut bytes = Vec::with_capacity(codes.len());
    for (index, &code) in codes.iter().enumerate() {
        if !(0..=format.max_code() as i64).contains(&code) {
            return Err(HeaderError::IllegalCodeForFormat {
                index,
                code,
                max: format.max_code(),
                format: format.tag(),
            }
            .into());
        }
        bytes.push(code as u8);
    }
    Ok(emit_header(&bytes, format)?)
}

fn run(cli: Cli) -> Result<u8, Error> {
    let ctx = context(&cli.common)?;
    let out = ctx.cfg.out.clone();
    match cli.command {
        Cmd::Train => {
            let (q, log) = train(&ctx.map, &ctx.cfg.hyper)?;
            write(&out, "qtable.csv", &q.to_csv())?;
            write(&out, "training_log.csv", &log.to_csv())?;
            println!("episodes={} states={}", log.len(), q.n_states());
        }
        Cmd::Rollout { qtable } => {
            let q = QTable::from_csv(&read(&qtable)?)?;
            q.check_shape(&ctx.map)?;
            let r = rollout(&ctx.map, &q, ctx.cfg.hyper.max_steps);
            if r.outcome != RolloutOutcome::ReachedGoal {
                return Err(Error::RolloutFailed(r.outcome));
            }
            write(&out, "actions.txt", &format!("{}\n", r.actions))?;
            println!("rollout={} actions={}", r.outcome, r.actions);
        }
        Cmd::Plan { actions } => {
            let actions: ActionSequence = read(&actions)?.parse()?;
            let program = plan(&actions, &ctx.cfg.plan);
            write(&out, "program.txt", &format!("{program}\n"))?;
            println!("commands={}", program.len());
        }
        Cmd::Emit { input } => {
            let header = emit(&parse_codes(&read(&input)?)?, &ctx)?;
            write(&out, "dataArray.h", &header)?;
        }
        Cmd::Gait { program } => {
            let program: CommandProgram = read(&program)?.parse()?;
            let frames = expand_program_with(&program, &ctx.cfg.gait, ctx.exec)?;
            write(&out, "trajectory.csv", &trajectory_csv(&frames))?;
            println!("frames={}", frames.len());
        }
        Cmd::Simulate { program } => {
            let program: CommandProgram = read(&program)?.parse()?;
            let replay = execute(
                &program,
                &world_for(&ctx.map, &ctx.cfg),
                &ctx.cfg.noise,
                ctx.cfg.plan.step_length,
            );
            write(&out, "trace.csv", &replay.trace_csv())?;
            println!("verdict={}", replay.outcome);
            if !replay.outcome.is_success() {
                return Ok(EXIT_NOT_SUCCESS);
            }
        }
        Cmd::Sweep { actions } => {
            let actions: ActionSequence = read(&actions)?.parse()?;
            let world = world_for(&ctx.map, &ctx.cfg);
            let rows = multiplier_sweep(
                &SweepSpec {
                    world: &world,
                    actions: &actions,
                    multipliers: ctx.cfg.sweep_min..=ctx.cfg.sweep_max,
                    trials: ctx.cfg.trials,
                    noise: &ctx.cfg.noise,
                    step_length: ctx.cfg.plan.step_length,
                },
                ctx.exec,
            );
            let csv = sweep_csv(&rows);
            write(&out, "sweep.csv", &csv)?;
            print!("{csv}");
        }
        Cmd::Pipeline => {
            let run = run_pipeline(&ctx.map, &ctx.cfg, ctx.exec)?;
            for (name, contents) in run.artifacts() {
                write(&out, name, &contents)?;
            }
            println!("{}", run.verdict());
            if !run.replay.outcome.is_success() {
                return Ok(EXIT_NOT_SUCCESS);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
