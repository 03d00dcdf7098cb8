//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each, and
//! exits non-zero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lakewalk::codegen::{emit_header, parse_header, HeaderFormat};
use lakewalk::exec::Execution;
use lakewalk::gait::{
    ankle_gamma, check_speed_bound, expand_program, gen_command_trajectory, ik_leg, knee_beta,
    neutral_pose, FootDisplacement, GaitParams, Leg, Side,
};
use lakewalk::gridworld::{Action, MapSpec};
use lakewalk::motionplan::{plan, Command, CommandProgram, Heading, PlanConfig};
use lakewalk::policy::{bfs_shortest_path, rollout, ActionSequence, RolloutOutcome};
use lakewalk::qlearn::{epsilon, q_update, train, train_seeds, Hyperparams, QTable};
use lakewalk::simulate::{
    execute, multiplier_sweep, ExecOutcome, NoiseModel, SweepSpec, WorldModel,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
const PIPELINE_SEED: u64 = 0;

fn trained_rollout(seed: u64) -> (MapSpec, ActionSequence, Vec<usize>) {
    let map = MapSpec::default_4x4();
    let hp = Hyperparams {
        seed,
        ..Hyperparams::default()
    };
    let (q, _) = train(&map, &hp).unwrap();
    let r = rollout(&map, &q, hp.max_steps);
    assert_eq!(r.outcome, RolloutOutcome::ReachedGoal);
    (map, r.actions, r.path.0)
}

fn q_update_arithmetic() -> Check {
    let hp = Hyperparams::default();
    let mut q = QTable::zeros(2);
    let fixed = q_update(&mut q, 0, Action::Right, 0.0, 1, &hp);
    ensure(fixed.abs() <= 1e-12, format!("fixed point gave {fixed}"))?;
    let mut q = QTable::zeros(2);
    let one = q_update(&mut q, 0, Action::Right, 1.0, 1, &hp);
    ensure((one - 0.1).abs() <= 1e-12, format!("0 -> {one}, want 0.1"))?;
    let mut q = QTable::from_rows(&[[0.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 0.0]]);
    let two = q_update(&mut q, 0, Action::Right, 0.0, 1, &hp);
    ensure(
        (two - 0.549).abs() <= 1e-12,
        format!("0.5 -> {two}, want 0.549"),
    )?;
    Ok("0, 0.1, 0.549 within 1e-12".into())
}

fn decay_schedule() -> Check {
    let hp = Hyperparams::default();
    let closed = |e: f64| 0.01 + 0.99 * (-0.01 * e).exp();
    for (e, want) in [(0usize, 1.0), (100, 0.374_200_646_8), (1_000_000, 0.01)] {
        let got = epsilon(e, &hp);
        ensure(
            (got - closed(e as f64)).abs() <= 1e-12,
            format!("eps({e}) = {got}"),
        )?;
        ensure(
            (got - want).abs() <= 1e-10,
            format!("eps({e}) = {got}, want {want}"),
        )?;
    }
    Ok(format!("eps(100) = {:.10}", epsilon(100, &hp)))
}

fn training_convergence() -> Check {
    let start = Instant::now();
    let map = MapSpec::default_4x4();
    let runs = train_seeds(&map, &Hyperparams::default(), &SEEDS, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut good = 0;
    let mut detail = Vec::new();
    for (seed, (q, log)) in SEEDS.iter().zip(&runs) {
        let ma = log.moving_average(50);
        let worst = ma[ma.len() - 100..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let reaches = rollout(&map, q, 1000).outcome == RolloutOutcome::ReachedGoal;
        if worst >= 0.9 && reaches {
            good += 1;
        }
        detail.push(format!(
            "{seed}:{worst:.2}{}",
            if reaches { "" } else { "!" }
        ));
    }
    ensure(
        good >= 9,
        format!("{good}/10 seeds converged [{}]", detail.join(" ")),
    )?;
    ensure(elapsed < 5.0, format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "{good}/10 seeds, min MA50 over final 100 [{}], {elapsed:.2}s",
        detail.join(" ")
    ))
}

fn shortest_path_oracle() -> Check {
    let (map, actions, path) = trained_rollout(PIPELINE_SEED);
    let bfs = bfs_shortest_path(&map)
        .length()
        .ok_or("default map unreachable")?;
    ensure(
        actions.len() == 6 && bfs == 6,
        format!("rollout {} vs bfs {bfs}", actions.len()),
    )?;
    ensure(path.iter().all(|s| !map.is_hole(*s)), "path visits a hole")?;
    Ok(format!(
        "rollout {actions} length 6 == BFS 6, path {path:?}"
    ))
}

/// Leg length rebuilt from the knee angle alone.
fn fk_length(beta: f64, d: f64) -> f64 {
    2.0 * d * (beta.to_radians() / 2.0).cos()
}

/// Leg length straight from the foot target and the returned ankle angle.
fn reference_length(disp: FootDisplacement, gamma: f64, side: Side, p: &GaitParams) -> f64 {
    let a = match side {
        Side::Left => p.gamma0 + gamma,
        Side::Right => p.gamma0 - gamma,
    };
    let vertical = p.l0 - disp.dz / a.to_radians().cos();
    (vertical * vertical + disp.dx * disp.dx).sqrt()
}

fn kinematics_identities() -> Check {
    let p = GaitParams::default();
    ensure(knee_beta(2.0 * p.d, p.d).unwrap() == 0.0, "beta(2d) != 0")?;
    ensure(
        (knee_beta(p.d, p.d).unwrap() - 120.0).abs() <= 1e-12,
        "beta(d) != 120",
    )?;
    let beta0 = 2.0 * (p.l0 / (2.0 * p.d)).acos().to_degrees();
    for leg in Leg::ALL {
        let a = ik_leg(FootDisplacement::ZERO, leg.side(), leg.end(), &p).unwrap();
        ensure(
            a.alpha == beta0 / 2.0 && a.beta == beta0 && a.gamma == 0.0,
            format!("neutral pose off for {leg:?}: {a:?}"),
        )?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_mirror: f64 = 0.0;
    for _ in 0..1000 {
        let dy = rng.gen_range(-4.0..4.0);
        let dz = rng.gen_range(-5.0..7.0);
        let l = ankle_gamma(dy, dz, Side::Left, &p).unwrap();
        let r = ankle_gamma(-dy, dz, Side::Right, &p).unwrap();
        worst_mirror = worst_mirror.max((l + r).abs());
    }
    ensure(
        worst_mirror <= 1e-12,
        format!("mirror residual {worst_mirror:e}"),
    )?;

    let mut checked = 0;
    let mut worst_fk: f64 = 0.0;
    while checked < 1000 {
        let disp = FootDisplacement::new(
            rng.gen_range(-6.0..6.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..5.0),
        );
        let leg = Leg::ALL[rng.gen_range(0..4)];
        let gamma = ankle_gamma(disp.dy, disp.dz, leg.side(), &p).unwrap();
        let reference = reference_length(disp, gamma, leg.side(), &p);
        let reachable = reference > 0.0 && reference <= 2.0 * p.d;
        match ik_leg(disp, leg.side(), leg.end(), &p) {
            Ok(a) => {
                ensure(reachable, format!("ik accepted unreachable {disp:?}"))?;
                worst_fk = worst_fk.max((fk_length(a.beta, p.d) - reference).abs());
                checked += 1;
            }
            Err(_) => ensure(!reachable, format!("ik rejected reachable {disp:?}"))?,
        }
    }
    ensure(worst_fk <= 1e-9, format!("FK residual {worst_fk:e}"))?;
    Ok(format!(
        "mirror max {worst_mirror:.1e}, FK max {worst_fk:.1e} cm over 1000 samples"
    ))
}

fn default_program() -> CommandProgram {
    let (_, actions, _) = trained_rollout(PIPELINE_SEED);
    plan(&actions, &PlanConfig::default())
}

fn trajectory_well_formed() -> Check {
    let p = GaitParams::default();
    let program = default_program();
    let frames = expand_program(&program, &p).map_err(|e| e.to_string())?;
    check_speed_bound(&frames, &p).map_err(|e| e.to_string())?;
    let neutral = neutral_pose(&p).unwrap();
    for cmd in program.commands() {
        let piece = gen_command_trajectory(*cmd, &p).unwrap();
        ensure(
            piece[0].angles == neutral && piece.last().unwrap().angles == neutral,
            format!("{cmd:?} seam frames differ from neutral"),
        )?;
    }
    let fwd = gen_command_trajectory(Command::FwdStep, &p).unwrap();
    ensure(
        fwd[0].angles == fwd.last().unwrap().angles,
        "FWD_STEP not periodic",
    )?;
    let expected_len: usize = program
        .commands()
        .iter()
        .map(|c| gen_command_trajectory(*c, &p).unwrap().len() - 1)
        .sum::<usize>()
        + 1;
    ensure(
        frames.len() == expected_len,
        "seam frames not shared exactly once",
    )?;
    Ok(format!(
        "{} commands, {} frames, bound {} deg/frame",
        program.len(),
        frames.len(),
        p.frame_bound()
    ))
}

fn codegen_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..1000 {
        let format = if i % 2 == 0 {
            HeaderFormat::RawActions
        } else {
            HeaderFormat::Commands
        };
        let len = rng.gen_range(0..120);
        let payload: Vec<u8> = (0..len)
            .map(|_| rng.gen_range(0..=format.max_code()))
            .collect();
        let text = emit_header(&payload, format).map_err(|e| e.to_string())?;
        ensure(
            text == emit_header(&payload, format).unwrap(),
            "emission not stable",
        )?;
        let parsed = parse_header(&text).map_err(|e| e.to_string())?;
        ensure(
            parsed == (format, payload.clone()),
            format!("round trip failed at {i}"),
        )?;
        ensure(
            emit_header(&parsed.1, parsed.0).unwrap() == text,
            "re-emission differs",
        )?;
    }
    Ok("1000 payloads, both formats".into())
}

fn geometric_transfer() -> Check {
    let (map, actions, path) = trained_rollout(PIPELINE_SEED);
    let cfg = PlanConfig::default();
    let program = plan(&actions, &cfg);
    let world = WorldModel::new(map.clone(), 45.5);
    let replay = execute(&program, &world, &NoiseModel::none(), 5.0);
    ensure(
        replay.outcome == ExecOutcome::Success,
        format!("outcome {}", replay.outcome),
    )?;
    let (gx, gy) = world.cell_center(map.goal_state());
    let end = replay.final_pose();
    let (ex, ey) = ((end.x - gx).abs(), (end.y - gy).abs());
    ensure(
        (ex - 1.5).abs() <= 1e-9 && (ey - 1.5).abs() <= 1e-9,
        format!("terminal error ({ex}, {ey})"),
    )?;
    ensure(
        replay.cell_sequence() == path,
        format!("cells {:?} vs path {path:?}", replay.cell_sequence()),
    )?;
    Ok(format!(
        "Success, terminal error ({ex}, {ey}) cm, cells == {path:?}"
    ))
}

/// First step index at which straight-line waypoint arithmetic leaves the
/// intended cell sequence or ends off the goal; `None` if it tracks it.
fn waypoint_failure(
    map: &MapSpec,
    actions: &ActionSequence,
    m: u32,
    step: f64,
    cell: f64,
) -> Option<(usize, f64, f64)> {
    let (sx, sy) = map.state_xy(map.start_state());
    let (mut x, mut y) = ((sx as f64 + 0.5) * cell, (sy as f64 + 0.5) * cell);
    let mut intended = vec![map.start_state()];
    let mut s = map.start_state();
    for a in actions.actions() {
        s = map.neighbor(s, *a);
        intended.push(s);
    }
    let mut k = 0;
    let mut seen = vec![map.start_state()];
    for a in actions.actions() {
        let (dx, dy) = a.delta();
        for _ in 0..m {
            x += dx as f64 * step;
            y += dy as f64 * step;
            k += 1;
            let (cx, cy) = ((x / cell).floor(), (y / cell).floor());
            let state = (cx >= 0.0 && cy >= 0.0)
                .then(|| map.xy_state(cx as usize, cy as usize))
                .flatten();
            match state {
                Some(st) if !map.is_hole(st) => {
                    if *seen.last().unwrap() != st {
                        seen.push(st);
                    }
                    if !intended.starts_with(&seen) {
                        return Some((k, x, y));
                    }
                }
                _ => return Some((k, x, y)),
            }
        }
    }
    (seen != intended).then_some((k, x, y))
}

fn multiplier_experiment() -> Check {
    let start = Instant::now();
    let (map, actions, _) = trained_rollout(PIPELINE_SEED);
    let world = WorldModel {
        start_heading: Heading::MinusY,
        ..WorldModel::new(map.clone(), 45.5)
    };
    let zero = multiplier_sweep(
        &SweepSpec {
            world: &world,
            actions: &actions,
            multipliers: 5..=10,
            trials: 1,
            noise: &NoiseModel::none(),
            step_length: 5.0,
        },
        Execution::Parallel,
    );
    let winners: Vec<u32> = zero
        .iter()
        .filter(|r| r.successes == 1)
        .map(|r| r.multiplier)
        .collect();
    ensure(
        winners == [8, 9, 10],
        format!("zero-noise successes {winners:?}"),
    )?;
    let mut failures = Vec::new();
    for m in 5..=7 {
        let oracle = waypoint_failure(&map, &actions, m, 5.0, 45.5)
            .ok_or(format!("waypoint arithmetic says m={m} succeeds"))?;
        let replay = execute(
            &plan(
                &actions,
                &PlanConfig {
                    multiplier: m,
                    ..PlanConfig::default()
                },
            ),
            &world,
            &NoiseModel::none(),
            5.0,
        );
        ensure(
            !replay.outcome.is_success(),
            format!("m={m} replay succeeded"),
        )?;
        failures.push(format!(
            "m={m} leaves at ({:.0},{:.0}) -> {}",
            oracle.1, oracle.2, replay.outcome
        ));
    }
    for m in 8..=10 {
        ensure(
            waypoint_failure(&map, &actions, m, 5.0, 45.5).is_none(),
            format!("waypoints fail for m={m}"),
        )?;
    }

    let noise = NoiseModel {
        step_sigma: 2.0,
        turn_sigma: 0.0,
        seed: 7,
    };
    let noisy = multiplier_sweep(
        &SweepSpec {
            world: &world,
            actions: &actions,
            multipliers: 5..=10,
            trials: 100,
            noise: &noise,
            step_length: 5.0,
        },
        Execution::Parallel,
    );
    let nine = noisy.iter().find(|r| r.multiplier == 9).unwrap().successes;
    let counts: Vec<String> = noisy
        .iter()
        .map(|r| format!("{}:{}", r.multiplier, r.successes))
        .collect();
    ensure(
        noisy.iter().all(|r| r.successes <= nine),
        format!("m=9 not optimal [{}]", counts.join(" ")),
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "zero noise {{8,9,10}}; {}; sigma=2 x100 [{}]; {elapsed:.2}s",
        failures.join(", "),
        counts.join(" ")
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("q-update arithmetic", q_update_arithmetic),
        ("decay schedule", decay_schedule),
        ("training convergence", training_convergence),
        ("shortest-path oracle", shortest_path_oracle),
        ("kinematics identities", kinematics_identities),
        ("trajectory well-formedness", trajectory_well_formed),
        ("codegen round-trip", codegen_round_trip),
        ("geometric transfer", geometric_transfer),
        ("multiplier experiment", multiplier_experiment),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
