//! Quadruped kinematics and creep-gait trajectory generation.
//!
//! Each leg has a hip swing angle `alpha`, a knee angle `beta` and an ankle
//! roll `gamma`. Foot targets are displacements from the neutral stance in
//! the body frame: `dx` forward, `dy` to the left, `dz` up. Angles cross the
//! public interface in degrees.
//!
//! Trajectories are sampled every `timestep` ms. Every linear (or arc) piece
//! of a foot path is subdivided until no joint moves more than
//! `max_servo_speed * timestep` between consecutive frames.

use std::fmt::Write as _;

use thiserror::Error;

use crate::exec::Execution;
use crate::motionplan::{Command, CommandProgram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("OutOfReach: leg length {length} exceeds reach {reach}")]
    OutOfReach { length: f64, reach: f64 },
    #[error("DegenerateLength: leg length {0} is not positive")]
    DegenerateLength(f64),
    #[error("SwingOutOfRange: |dx| = {dx} exceeds leg length {length}")]
    SwingOutOfRange { dx: f64, length: f64 },
    #[error("FootAboveHip: dz = {dz} reaches standing height {height}")]
    FootAboveHip { dz: f64, height: f64 },
    #[error("SingularAnkle: cos({angle} deg) vanishes")]
    SingularAnkle { angle: f64 },
    #[error("InvalidGaitParams: {0}")]
    InvalidParams(String),
    #[error("GaitInfeasible: {command:?} phase target fails: {source}")]
    GaitInfeasible {
        command: Command,
        #[source]
        source: Box<GaitError>,
    },
    #[error("SeamDiscontinuity: command {index} does not start where the previous one ended")]
    SeamDiscontinuity { index: usize },
    #[error("SpeedBound: frame {frame} joint {joint} moves {delta} deg, bound {bound}")]
    SpeedBound {
        frame: usize,
        joint: usize,
        delta: f64,
        bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitParams {
    /// Upper and lower leg segment length, cm.
    pub d: f64,
    /// Neutral leg length, cm.
    pub l0: f64,
    pub toeout0: f64,
    pub height0: f64,
    /// Neutral ankle angle, degrees. Must equal `atan(toeout0 / height0)`.
    pub gamma0: f64,
    pub body_radius: f64,
    /// Arc phase of the front-left foot, degrees.
    pub phi0: f64,
    pub step_length: f64,
    pub lift_height: f64,
    /// Lateral body shift during the creep cycle, cm.
    pub body_shift: f64,
    /// Frame spacing, ms.
    pub timestep: f64,
    /// Degrees per ms.
    pub max_servo_speed: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        let toeout0 = 1.5;
        let height0 = 7.5;
        GaitParams {
            d: 5.0,
            l0: 8.0,
            toeout0,
            height0,
            gamma0: neutral_gamma0(toeout0, height0),
            body_radius: 6.0,
            phi0: 45.0,
            step_length: 5.0,
            lift_height: 2.0,
            body_shift: 1.0,
            timestep: 20.0,
            max_servo_speed: 0.3,
        }
    }
}

/// The ankle offset that makes the neutral stance read `gamma = 0`.
pub fn neutral_gamma0(toeout0: f64, height0: f64) -> f64 {
    (toeout0 / height0).atan().to_degrees()
}

impl GaitParams {
    pub fn validate(&self) -> Result<(), GaitError> {
        let bad = |m: String| Err(GaitError::InvalidParams(m));
        for (name, v) in [
            ("d", self.d),
            ("l0", self.l0),
            ("toeout0", self.toeout0),
            ("height0", self.height0),
            ("body_radius", self.body_radius),
            ("step_length", self.step_length),
            ("timestep", self.timestep),
            ("max_servo_speed", self.max_servo_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("lift_height", self.lift_height),
            ("body_shift", self.body_shift),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.l0 > 2.0 * self.d {
            return bad(format!(
                "l0 = {} exceeds full reach 2d = {}",
                self.l0,
                2.0 * self.d
            ));
        }
        let want = neutral_gamma0(self.toeout0, self.height0);
        if (self.gamma0 - want).abs() > 1e-9 {
            return bad(format!(
                "gamma0 = {} but atan(toeout0/height0) = {want}",
                self.gamma0
            ));
        }
        if !self.phi0.is_finite() {
            return bad("phi0 must be finite".into());
        }
        Ok(())
    }

    /// Largest joint move allowed between consecutive frames, degrees.
    pub fn frame_bound(&self) -> f64 {
        self.max_servo_speed * self.timestep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Front,
    Rear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

impl Leg {
    /// Frame column order.
    pub const ALL: [Leg; 4] = [
        Leg::FrontLeft,
        Leg::FrontRight,
        Leg::RearLeft,
        Leg::RearRight,
    ];

    pub fn side(self) -> Side {
        match self {
            Leg::FrontLeft | Leg::RearLeft => Side::Left,
            Leg::FrontRight | Leg::RearRight => Side::Right,
        }
    }

    pub fn end(self) -> End {
        match self {
            Leg::FrontLeft | Leg::FrontRight => End::Front,
            Leg::RearLeft | Leg::RearRight => End::Rear,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Angular position of the foot around the body centre, degrees.
    pub fn arc_phase(self, phi0: f64) -> f64 {
        match self {
            Leg::FrontLeft => phi0,
            Leg::FrontRight => -phi0,
            Leg::RearLeft => 180.0 - phi0,
            Leg::RearRight => 180.0 + phi0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootDisplacement {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl FootDisplacement {
    pub const ZERO: FootDisplacement = FootDisplacement {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
    };

    pub fn new(dx: f64, dy: f64, dz: f64) -> Self {
        FootDisplacement { dx, dy, dz }
    }

    fn lerp(self, to: Self, u: f64) -> Self {
        FootDisplacement {
            dx: self.dx + (to.dx - self.dx) * u,
            dy: self.dy + (to.dy - self.dy) * u,
            dz: self.dz + (to.dz - self.dz) * u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFrame {
    pub t: f64,
    /// `(alpha, beta, gamma)` for front-left, front-right, rear-left, rear-right.
    pub angles: [f64; 12],
}

impl TrajectoryFrame {
    pub fn leg(&self, leg: Leg) -> LegAngles {
        let i = leg.index() * 3;
        LegAngles {
            alpha: self.angles[i],
            beta: self.angles[i + 1],
            gamma: self.angles[i + 2],
        }
    }
}

/// `beta = 2 acos(L / 2d)`
pub fn knee_beta(length: f64, d: f64) -> Result<f64, GaitError> {
    if length.is_nan() || length <= 0.0 {
        return Err(GaitError::DegenerateLength(length));
    }
    if length > 2.0 * d {
        return Err(GaitError::OutOfReach {
            length,
            reach: 2.0 * d,
        });
    }
    Ok(2.0 * (length / (2.0 * d)).acos().to_degrees())
}

/// Front: `beta/2 - asin(dx/L)`; rear: `beta/2 + asin(dx/L)`.
pub fn hip_alpha(dx: f64, length: f64, beta: f64, end: End) -> Result<f64, GaitError> {
    if dx.is_nan() || dx.abs() > length {
        return Err(GaitError::SwingOutOfRange { dx, length });
    }
    let swing = (dx / length).asin().to_degrees();
    Ok(match end {
        End::Front => beta / 2.0 - swing,
        End::Rear => beta / 2.0 + swing,
    })
}

pub fn ankle_gamma(dy: f64, dz: f64, side: Side, p: &GaitParams) -> Result<f64, GaitError> {
    if dz.is_nan() || dz >= p.height0 {
        return Err(GaitError::FootAboveHip {
            dz,
            height: p.height0,
        });
    }
    let h = p.height0 - dz;
    Ok(match side {
        Side::Left => ((p.toeout0 + dy) / h).atan().to_degrees() - p.gamma0,
        Side::Right => p.gamma0 - ((p.toeout0 - dy) / h).atan().to_degrees(),
    })
}

pub fn leg_length(
    dx: f64,
    dz: f64,
    gamma: f64,
    side: Side,
    p: &GaitParams,
) -> Result<f64, GaitError> {
    let angle = match side {
        Side::Left => p.gamma0 + gamma,
        Side::Right => p.gamma0 - gamma,
    };
    let c = angle.to_radians().cos();
    if c.abs() < 1e-12 {
        return Err(GaitError::SingularAnkle { angle });
    }
    Ok((p.l0 - dz / c).hypot(dx))
}

/// Joint angles for one foot target, solved ankle first, then leg length,
/// knee and hip.
pub fn ik_leg(
    disp: FootDisplacement,
    side: Side,
    end: End,
    p: &GaitParams,
) -> Result<LegAngles, GaitError> {
    let gamma = ankle_gamma(disp.dy, disp.dz, side, p)?;
    let length = leg_length(disp.dx, disp.dz, gamma, side, p)?;
    let beta = knee_beta(length, p.d)?;
    let alpha = hip_alpha(disp.dx, length, beta, end)?;
    Ok(LegAngles { alpha, beta, gamma })
}

/// Servo speed in degrees per ms for one timestep.
pub fn servo_plan(theta_old: f64, theta_new: f64, timestep: f64) -> f64 {
    assert!(timestep > 0.0, "timestep must be positive");
    (theta_new - theta_old) / timestep
}

/// Longitudinal foot coordinate on the turning arc: `body_radius * cos(phi0 + f)`.
pub fn turn_position(f: f64, p: &GaitParams) -> f64 {
    p.body_radius * (p.phi0 + f).to_radians().cos()
}

/// Displacement from neutral for a foot rotated by `f` degrees along the
/// body-radius arc.
pub fn arc_displacement(leg: Leg, f: f64, p: &GaitParams) -> FootDisplacement {
    let phase = leg.arc_phase(p.phi0);
    let at = |deg: f64| {
        let r = deg.to_radians();
        (p.body_radius * r.cos(), p.body_radius * r.sin())
    };
    let (x0, y0) = at(phase);
    let (x1, y1) = at(phase + f);
    FootDisplacement::new(x1 - x0, y1 - y0, 0.0)
}

fn pose(feet: &[FootDisplacement; 4], p: &GaitParams) -> Result<[f64; 12], GaitError> {
    let mut out = [0.0; 12];
    for leg in Leg::ALL {
        let a = ik_leg(feet[leg.index()], leg.side(), leg.end(), p)?;
        out[leg.index() * 3..leg.index() * 3 + 3].copy_from_slice(&[a.alpha, a.beta, a.gamma]);
    }
    Ok(out)
}

/// The neutral stance: every foot at zero displacement.
pub fn neutral_pose(p: &GaitParams) -> Result<[f64; 12], GaitError> {
    pose(&[FootDisplacement::ZERO; 4], p)
}

fn max_delta(a: &[f64; 12], b: &[f64; 12]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Subdivision limit for a single path piece.
const MAX_SUBDIVISIONS: usize = 1 << 16;

/// Samples `path(u)` for `u` in `[0, 1]` finely enough to respect the speed
/// bound. `path(0)` and `path(1)` must be exact endpoints. Appends every pose
/// after the first.
fn sample_piece(
    frames: &mut Vec<[f64; 12]>,
    path: impl Fn(f64) -> [FootDisplacement; 4],
    p: &GaitParams,
) -> Result<(), GaitError> {
    let bound = p.frame_bound();
    let start = pose(&path(0.0), p)?;
    let end = pose(&path(1.0), p)?;
    let mut n = ((max_delta(&start, &end) / bound).ceil() as usize).max(1);
    loop {
        let mut poses = Vec::with_capacity(n);
        let mut prev = start;
        let mut ok = true;
        for i in 1..=n {
            let next = if i == n {
                end
            } else {
                pose(&path(i as f64 / n as f64), p)?
            };
            if max_delta(&prev, &next) > bound {
                ok = false;
                break;
            }
            poses.push(next);
            prev = next;
        }
        if ok {
            frames.extend(poses);
            return Ok(());
        }
        if n >= MAX_SUBDIVISIONS {
            return Err(GaitError::InvalidParams(
                "speed bound unreachable by subdivision".into(),
            ));
        }
        n *= 2;
    }
}

/// Straight-line move of all four feet.
fn linear(
    frames: &mut Vec<[f64; 12]>,
    from: [FootDisplacement; 4],
    to: [FootDisplacement; 4],
    p: &GaitParams,
) -> Result<(), GaitError> {
    sample_piece(
        frames,
        |u| {
            if u == 1.0 {
                to
            } else {
                std::array::from_fn(|i| from[i].lerp(to[i], u))
            }
        },
        p,
    )
}

/// Lift, carry and lower one foot to `target`; the others hold still.
fn swing(
    frames: &mut Vec<[f64; 12]>,
    feet: &mut [FootDisplacement; 4],
    leg: Leg,
    target: FootDisplacement,
    p: &GaitParams,
) -> Result<(), GaitError> {
    let i = leg.index();
    let lift = |f: FootDisplacement| FootDisplacement {
        dz: f.dz + p.lift_height,
        ..f
    };
    let mut up = *feet;
    up[i] = lift(feet[i]);
    let mut over = *feet;
    over[i] = lift(target);
    let mut down = *feet;
    down[i] = target;
    linear(frames, *feet, up, p)?;
    linear(frames, up, over, p)?;
    linear(frames, over, down, p)?;
    *feet = down;
    Ok(())
}

fn creep_cycle(direction: f64, p: &GaitParams) -> Result<Vec<[f64; 12]>, GaitError> {
    let mut frames = vec![neutral_pose(p)?];
    let mut feet = [FootDisplacement::ZERO; 4];
    let step = direction * p.step_length;

    // Body shifts right, so the feet sit further left in the body frame.
    let shifted = feet.map(|f| FootDisplacement {
        dy: p.body_shift,
        ..f
    });
    linear(&mut frames, feet, shifted, p)?;
    feet = shifted;

    for leg in [Leg::RearLeft, Leg::FrontLeft] {
        let i = leg.index();
        let target = FootDisplacement {
            dx: feet[i].dx + step,
            ..feet[i]
        };
        swing(&mut frames, &mut feet, leg, target, p)?;
    }

    let shifted = feet.map(|f| FootDisplacement {
        dy: -p.body_shift,
        ..f
    });
    linear(&mut frames, feet, shifted, p)?;
    feet = shifted;

    for leg in [Leg::RearRight, Leg::FrontRight] {
        let i = leg.index();
        let target = FootDisplacement {
            dx: feet[i].dx + step,
            ..feet[i]
        };
        swing(&mut frames, &mut feet, leg, target, p)?;
    }

    // All feet push back together: the body advances by one step and recentres.
    linear(&mut frames, feet, [FootDisplacement::ZERO; 4], p)?;
    Ok(frames)
}

fn turn_cycle(degrees: f64, p: &GaitParams) -> Result<Vec<[f64; 12]>, GaitError> {
    let mut frames = vec![neutral_pose(p)?];
    let mut feet = [FootDisplacement::ZERO; 4];
    for leg in [
        Leg::RearLeft,
        Leg::FrontLeft,
        Leg::RearRight,
        Leg::FrontRight,
    ] {
        swing(
            &mut frames,
            &mut feet,
            leg,
            arc_displacement(leg, degrees, p),
            p,
        )?;
    }
    // Stance feet slide back along the arc while the body yaws by `degrees`.
    sample_piece(
        &mut frames,
        |u| {
            if u == 1.0 {
                [FootDisplacement::ZERO; 4]
            } else {
                Leg::ALL.map(|leg| arc_displacement(leg, degrees * (1.0 - u), p))
            }
        },
        p,
    )?;
    Ok(frames)
}

fn cycle_poses(cmd: Command, p: &GaitParams) -> Result<Vec<[f64; 12]>, GaitError> {
    match cmd {
        Command::FwdStep => creep_cycle(1.0, p),
        Command::RevStep => creep_cycle(-1.0, p),
        Command::TurnL10 => turn_cycle(10.0, p),
        Command::TurnR10 => turn_cycle(-10.0, p),
        Command::TurnL90 | Command::TurnR90 => {
            let single = turn_cycle(if cmd == Command::TurnL90 { 10.0 } else { -10.0 }, p)?;
            let mut out = single.clone();
            for _ in 1..9 {
                out.extend_from_slice(&single[1..]);
            }
            Ok(out)
        }
    }
}

/// Joint trajectory for one command, starting at `t = 0` and beginning and
/// ending in the neutral stance.
pub fn gen_command_trajectory(
    cmd: Command,
    p: &GaitParams,
) -> Result<Vec<TrajectoryFrame>, GaitError> {
    p.validate()?;
    let poses = cycle_poses(cmd, p).map_err(|e| GaitError::GaitInfeasible {
        command: cmd,
        source: Box::new(e),
    })?;
    Ok(poses
        .into_iter()
        .enumerate()
        .map(|(i, angles)| TrajectoryFrame {
            t: i as f64 * p.timestep,
            angles,
        })
        .collect())
}

/// Concatenates per-command trajectories, sharing each seam frame.
pub fn expand_program(
    program: &CommandProgram,
    p: &GaitParams,
) -> Result<Vec<TrajectoryFrame>, GaitError> {
    expand_program_with(program, p, Execution::default())
}

pub fn expand_program_with(
    program: &CommandProgram,
    p: &GaitParams,
    exec: Execution,
) -> Result<Vec<TrajectoryFrame>, GaitError> {
    p.validate()?;
    let pieces: Vec<Vec<TrajectoryFrame>> = exec
        .map_slice(program.commands(), |&cmd| gen_command_trajectory(cmd, p))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let mut out: Vec<TrajectoryFrame> = Vec::with_capacity(pieces.iter().map(Vec::len).sum());
    for (index, piece) in pieces.into_iter().enumerate() {
        let skip = match out.last() {
            Some(last) => {
                if last.angles != piece[0].angles {
                    return Err(GaitError::SeamDiscontinuity { index });
                }
                1
            }
            None => 0,
        };
        for frame in piece.into_iter().skip(skip) {
            let t = out.len() as f64 * p.timestep;
            out.push(TrajectoryFrame { t, ..frame });
        }
    }
    Ok(out)
}

/// Checks the per-frame joint speed bound over a whole trajectory.
pub fn check_speed_bound(frames: &[TrajectoryFrame], p: &GaitParams) -> Result<(), GaitError> {
    let bound = p.frame_bound();
    for (i, w) in frames.windows(2).enumerate() {
        for j in 0..12 {
            let delta = (w[1].angles[j] - w[0].angles[j]).abs();
            if delta > bound {
                return Err(GaitError::SpeedBound {
                    frame: i + 1,
                    joint: j,
                    delta,
                    bound,
                });
            }
        }
    }
    Ok(())
}

pub const TRAJECTORY_HEADER: &str =
    "t_ms,a_fl,b_fl,g_fl,a_fr,b_fr,g_fr,a_rl,b_rl,g_rl,a_rr,b_rr,g_rr";

pub fn trajectory_csv(frames: &[TrajectoryFrame]) -> String {
    let mut out = String::with_capacity(frames.len() * 160);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for f in frames {
        let _ = write!(out, "{}", f.t);
        for a in f.angles {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}
