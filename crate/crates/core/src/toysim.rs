//! Planar-body locomotion surrogate.
//!
//! A quadruped is reduced to its center of mass. Skills are open-loop
//! parametric generators that emit 12 joint targets (4 legs × hip, abduction,
//! knee); the dynamics read the leg-averaged targets as a commanded body
//! velocity, scale it by a friction factor, add a downhill drift and a
//! flatness-dependent noise, and Euler-integrate. Contacts come from the knee
//! channel: a leg is in stance while its vertical target is non-positive.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::catalog::EnvInstance;
use crate::rng::{self, Rng, Stream};

pub const DT: f64 = 0.02;
pub const ACTION_DIM: usize = 12;
pub const LEGS: usize = 4;
/// Planar speed (m/s) commanded by a unit leg-averaged hip/abduction target.
pub const SPEED_GAIN: f64 = 2.0;
/// Yaw rate (rad/s) commanded by a unit differential hip target.
pub const YAW_GAIN: f64 = 4.0;
pub const VERTICAL_GAIN: f64 = 1.0;
pub const NOMINAL_HEIGHT: f64 = 0.3;
pub const HEIGHT_STIFFNESS: f64 = 5.0;
pub const DRIFT_GAIN: f64 = 1.0;
/// Velocity noise standard deviation per unit flatness.
pub const FLATNESS_NOISE: f64 = 0.01;
/// Friction at which the achievable speed is `1 - 1/e` of the command.
pub const FRICTION_SCALE: f64 = 0.2;
pub const DEFAULT_FREQUENCY: f64 = 2.5;

/// Trot ordering FR, FL, RR, RL: diagonal pairs share a phase.
const LEG_PHASE: [f64; LEGS] = [0.0, 0.5, 0.5, 0.0];
/// +1 for right legs, -1 for left legs.
const LEG_SIDE: [f64; LEGS] = [1.0, -1.0, 1.0, -1.0];

pub type Action = [f64; ACTION_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: [f64; 3],
    /// Body-frame linear velocity (forward, left, up).
    pub velocity: [f64; 3],
    pub yaw: f64,
    pub yaw_rate: f64,
    pub height: f64,
    /// Base pitch; follows the terrain slope.
    pub pitch: f64,
}

impl BodyState {
    pub fn at_rest(env: &EnvDynamics) -> Self {
        Self {
            position: [0.0, 0.0, NOMINAL_HEIGHT],
            velocity: [0.0; 3],
            yaw: 0.0,
            yaw_rate: 0.0,
            height: NOMINAL_HEIGHT,
            pitch: env.pitch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Gait,
    Jump,
    Posture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Planar drive magnitude in action units.
    pub amplitude: f64,
    /// Drive heading in the body frame (rad, 0 = forward, π/2 = left).
    pub direction: f64,
    /// Differential hip drive; positive turns counter-clockwise.
    #[serde(default)]
    pub turn: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    /// Leg oscillation amplitude; cancels in the leg average.
    #[serde(default)]
    pub swing: f64,
    /// Vertical impulse applied as a once-per-cycle bump.
    #[serde(default)]
    pub vertical: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            direction: 0.0,
            turn: 0.0,
            frequency: DEFAULT_FREQUENCY,
            phase: 0.0,
            swing: 0.0,
            vertical: 0.0,
        }
    }
}

/// Parametric skill policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillGenerator {
    pub kind: GeneratorKind,
    pub params: GeneratorParams,
}

/// Number of generator parameters tuned by fine-tuning.
pub const TUNABLE_PARAMS: usize = 4;

impl SkillGenerator {
    pub fn new(kind: GeneratorKind, params: GeneratorParams) -> Self {
        Self { kind, params }
    }

    /// Walking gait with planar drive `speed` (m/s) along `direction` and yaw rate `yaw_rate` (rad/s).
    pub fn gait(speed: f64, direction: f64, yaw_rate: f64) -> Self {
        Self::new(
            GeneratorKind::Gait,
            GeneratorParams {
                amplitude: speed / SPEED_GAIN,
                direction,
                turn: yaw_rate / YAW_GAIN,
                swing: 0.3,
                ..GeneratorParams::default()
            },
        )
    }

    pub fn jump(speed: f64, direction: f64, vertical: f64) -> Self {
        Self::new(
            GeneratorKind::Jump,
            GeneratorParams {
                amplitude: speed / SPEED_GAIN,
                direction,
                vertical,
                ..GeneratorParams::default()
            },
        )
    }

    pub fn posture() -> Self {
        Self::new(GeneratorKind::Posture, GeneratorParams::default())
    }

    pub fn validate(&self) -> Result<(), String> {
        let p = &self.params;
        let all = [
            p.amplitude,
            p.direction,
            p.turn,
            p.frequency,
            p.phase,
            p.swing,
            p.vertical,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite generator parameter".into());
        }
        if p.frequency <= 0.0 {
            return Err(format!("frequency must be positive, got {}", p.frequency));
        }
        Ok(())
    }

    /// Tunable parameters `[amplitude, direction, turn, vertical]`.
    pub fn tunable(&self) -> [f64; TUNABLE_PARAMS] {
        let p = &self.params;
        [p.amplitude, p.direction, p.turn, p.vertical]
    }

    pub fn set_tunable(&mut self, phi: &[f64]) {
        let p = &mut self.params;
        p.amplitude = phi[0];
        p.direction = phi[1];
        p.turn = phi[2];
        p.vertical = phi[3];
    }

    /// Steps per generator cycle at time step `dt`.
    pub fn period_steps(&self, dt: f64) -> usize {
        ((1.0 / (self.params.frequency * dt)).round() as usize).max(1)
    }
}

fn vertical_bump(phase: f64) -> f64 {
    let s = (std::f64::consts::PI * phase).sin();
    s * s
}

/// Joint targets of `gen` at cycle phase `phase`; periodic with period 1 and clamped to `[-1, 1]`.
pub fn generator_action(gen: &SkillGenerator, _state: &BodyState, phase: f64) -> Action {
    let p = &gen.params;
    let cycle = (phase + p.phase).rem_euclid(1.0);
    let (sin_dir, cos_dir) = p.direction.sin_cos();
    let bump = p.vertical * vertical_bump(cycle);
    let mut a = [0.0; ACTION_DIM];
    for leg in 0..LEGS {
        let theta = 2.0 * std::f64::consts::PI * (cycle + LEG_PHASE[leg]);
        let (s, c) = theta.sin_cos();
        a[3 * leg] = p.amplitude * cos_dir - LEG_SIDE[leg] * p.turn + p.swing * s;
        a[3 * leg + 1] = p.amplitude * sin_dir;
        a[3 * leg + 2] = p.swing * c + bump;
    }
    for v in &mut a {
        *v = v.clamp(-1.0, 1.0);
    }
    a
}

/// Anything that emits an action per time step.
pub trait Policy {
    fn action(&self, state: &BodyState, step: usize, dt: f64) -> Action;
}

impl Policy for SkillGenerator {
    fn action(&self, state: &BodyState, step: usize, dt: f64) -> Action {
        let phase = step as f64 * dt * self.params.frequency;
        generator_action(self, state, phase)
    }
}

/// Linear combination `Σ wᵢ aⁱ + b` of generator actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePolicy {
    pub parts: Vec<WeightedGenerator>,
    /// Length 1 (broadcast) or `ACTION_DIM`.
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGenerator {
    pub weight: f64,
    pub generator: SkillGenerator,
}

impl Policy for CompositePolicy {
    fn action(&self, state: &BodyState, step: usize, dt: f64) -> Action {
        let mut out = [0.0; ACTION_DIM];
        for part in &self.parts {
            let a = part.generator.action(state, step, dt);
            for (o, x) in out.iter_mut().zip(a) {
                *o += part.weight * x;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += if self.bias.len() == 1 { self.bias[0] } else { self.bias[i] };
        }
        out
    }
}

/// Registry entry: a primitive generator or a composed skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Primitive(SkillGenerator),
    Composite(CompositePolicy),
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            GeneratorSpec::Primitive(g) => g.validate(),
            GeneratorSpec::Composite(c) => {
                if c.parts.is_empty() {
                    return Err("composite generator has no parts".into());
                }
                if c.bias.len() != 1 && c.bias.len() != ACTION_DIM {
                    return Err(format!("bias must have 1 or {ACTION_DIM} entries"));
                }
                c.parts.iter().try_for_each(|p| p.generator.validate())
            }
        }
    }

    /// Cycle length used when extracting task profiles.
    pub fn period_steps(&self, dt: f64) -> usize {
        match self {
            GeneratorSpec::Primitive(g) => g.period_steps(dt),
            GeneratorSpec::Composite(c) => c
                .parts
                .iter()
                .map(|p| p.generator.period_steps(dt))
                .max()
                .unwrap_or(1),
        }
    }
}

impl Policy for GeneratorSpec {
    fn action(&self, state: &BodyState, step: usize, dt: f64) -> Action {
        match self {
            GeneratorSpec::Primitive(g) => g.action(state, step, dt),
            GeneratorSpec::Composite(c) => c.action(state, step, dt),
        }
    }
}

/// Environment as seen by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvDynamics {
    /// Fraction of the commanded planar speed and yaw rate that is realized.
    pub friction_factor: f64,
    pub noise_std: f64,
    /// Constant forward velocity induced by the slope; positive when downhill.
    pub drift: f64,
    pub pitch: f64,
    /// Scale of per-step uniform disturbances (±0.1 m/s planar, ±0.3 rad/s yaw).
    pub disturbance: f64,
}

pub fn friction_factor(friction: f64) -> f64 {
    1.0 - (-friction.max(0.0) / FRICTION_SCALE).exp()
}

impl EnvDynamics {
    pub fn from_instance(env: &EnvInstance) -> Self {
        Self {
            friction_factor: friction_factor(env.friction),
            noise_std: FLATNESS_NOISE * env.flatness.max(0.0),
            drift: -DRIFT_GAIN * env.slope,
            pitch: env.slope,
            disturbance: 0.0,
        }
    }

    pub fn with_disturbance(mut self, scale: f64) -> Self {
        self.disturbance = scale;
        self
    }
}

/// Leg `j` is in stance while its knee target is non-positive.
pub fn contacts(action: &Action) -> u8 {
    (0..LEGS).filter(|&j| action[3 * j + 2] <= 0.0).count() as u8
}

fn leg_mean(action: &Action, channel: usize) -> f64 {
    (0..LEGS).map(|j| action[3 * j + channel]).sum::<f64>() / LEGS as f64
}

/// Commanded body velocity `(vx, vy, vz, yaw rate)` before environment effects.
pub fn commanded_velocity(action: &Action) -> [f64; 4] {
    let yaw = (0..LEGS).map(|j| -LEG_SIDE[j] * action[3 * j]).sum::<f64>() / LEGS as f64;
    [
        SPEED_GAIN * leg_mean(action, 0),
        SPEED_GAIN * leg_mean(action, 1),
        VERTICAL_GAIN * leg_mean(action, 2),
        YAW_GAIN * yaw,
    ]
}

/// One Euler step. Draws from `rng` only when the environment is noisy.
pub fn step(state: &BodyState, action: &Action, env: &EnvDynamics, dt: f64, rng: &mut Rng) -> BodyState {
    let [cx, cy, cz, cw] = commanded_velocity(action);
    let mut vx = env.friction_factor * cx + env.drift;
    let mut vy = env.friction_factor * cy;
    let mut w = env.friction_factor * cw;
    if env.noise_std > 0.0 {
        let n = Normal::new(0.0, env.noise_std).expect("finite positive std");
        vx += n.sample(rng);
        vy += n.sample(rng);
        w += n.sample(rng);
    }
    if env.disturbance > 0.0 {
        let d = env.disturbance;
        vx += rng.random_range(-0.1..=0.1) * d;
        vy += rng.random_range(-0.1..=0.1) * d;
        w += rng.random_range(-0.3..=0.3) * d;
    }
    let vz = cz - HEIGHT_STIFFNESS * (state.height - NOMINAL_HEIGHT);
    let height = (state.height + vz * dt).max(0.0);
    let (s, c) = state.yaw.sin_cos();
    BodyState {
        position: [
            state.position[0] + (vx * c - vy * s) * dt,
            state.position[1] + (vx * s + vy * c) * dt,
            height,
        ],
        velocity: [vx, vy, vz],
        yaw: state.yaw + w * dt,
        yaw_rate: w,
        height,
        pitch: env.pitch,
    }
}

/// States `s_0..s_H`, actions `a_0..a_{H-1}` and per-step stance counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<BodyState>,
    pub actions: Vec<Action>,
    pub contacts: Vec<u8>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "step", "t", "x", "y", "z", "vx", "vy", "vz", "yaw", "yaw_rate", "height", "pitch",
            "contacts",
        ])?;
        for (k, s) in self.states.iter().enumerate() {
            let contacts = if k == 0 { 0 } else { self.contacts[k - 1] };
            w.write_record(
                [
                    k.to_string(),
                    format!("{}", k as f64 * self.dt),
                    s.position[0].to_string(),
                    s.position[1].to_string(),
                    s.position[2].to_string(),
                    s.velocity[0].to_string(),
                    s.velocity[1].to_string(),
                    s.velocity[2].to_string(),
                    s.yaw.to_string(),
                    s.yaw_rate.to_string(),
                    s.height.to_string(),
                    s.pitch.to_string(),
                    contacts.to_string(),
                ]
                .iter(),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `policy` for `horizon` steps from rest; deterministic given `seed`.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    env: &EnvDynamics,
    horizon: usize,
    seed: u64,
) -> Trajectory {
    let mut rng = rng::stream(seed, Stream::Dynamics);
    let mut state = BodyState::at_rest(env);
    let mut traj = Trajectory {
        dt: DT,
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        contacts: Vec::with_capacity(horizon),
    };
    traj.states.push(state);
    for t in 0..horizon {
        let action = policy.action(&state, t, DT);
        state = step(&state, &action, env, DT, &mut rng);
        traj.contacts.push(contacts(&action));
        traj.actions.push(action);
        traj.states.push(state);
    }
    traj
}

/// Commanded planar velocity and yaw rate at one waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandPoint {
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

/// Periodic command: the 11 waypoints span `period_steps` simulation steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCommand {
    pub schedule: Vec<CommandPoint>,
    pub h_target: f64,
    pub period_steps: usize,
}

impl TaskCommand {
    pub fn constant(vx: f64, vy: f64, yaw_rate: f64) -> Self {
        Self {
            schedule: vec![CommandPoint { vx, vy, yaw_rate }; crate::catalog::TASK_STEPS],
            h_target: NOMINAL_HEIGHT,
            period_steps: crate::catalog::TASK_STEPS,
        }
    }

    pub fn at(&self, step: usize) -> CommandPoint {
        let n = self.schedule.len();
        let period = self.period_steps.max(1);
        let idx = (step % period) * n / period;
        self.schedule[idx.min(n - 1)]
    }
}

/// Trajectory averages of the reward terms that enter the optimization target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    /// Linear velocity tracking.
    pub lvt: f64,
    /// Angular (yaw) velocity tracking.
    pub avt: f64,
    /// Lie orientation, from projected gravity.
    pub lo: f64,
    /// Lie orientation from base pitch.
    pub lorpy: f64,
    /// Foot full contact count.
    pub ffc: f64,
    /// Jump body height.
    pub jbh: f64,
    /// Action rate.
    pub ar: f64,
    /// Torque square, approximated by the squared action.
    pub ts: f64,
}

pub fn lvt(vx: f64, vy: f64, cmd_vx: f64, cmd_vy: f64) -> f64 {
    let d2 = (vx - cmd_vx).powi(2) + (vy - cmd_vy).powi(2);
    (-d2 / 0.25).exp()
}

pub fn avt(w: f64, cmd_w: f64) -> f64 {
    (-(w - cmd_w).powi(2) / 0.25).exp()
}

pub fn lie_orientation(pitch: f64) -> f64 {
    // g₃ = -cos(pitch), default -1
    (-(1.0 - pitch.cos()).abs() / 0.25).exp()
}

pub fn lie_orientation_rpy(pitch: f64) -> f64 {
    (-pitch.abs() / 0.25).exp()
}

pub fn jump_body_height(height: f64, h_target: f64, vz: f64) -> f64 {
    if vz > 0.0 {
        (-(height - h_target).abs() / 0.25).exp() * vz
    } else {
        0.0
    }
}

pub fn reward_terms(traj: &Trajectory, cmd: &TaskCommand) -> RewardTerms {
    let h = traj.horizon();
    if h == 0 {
        return RewardTerms::default();
    }
    let mut acc = RewardTerms::default();
    for t in 0..h {
        let s = &traj.states[t + 1];
        let a = &traj.actions[t];
        let c = cmd.at(t);
        acc.lvt += lvt(s.velocity[0], s.velocity[1], c.vx, c.vy);
        acc.avt += avt(s.yaw_rate, c.yaw_rate);
        acc.lo += lie_orientation(s.pitch);
        acc.lorpy += lie_orientation_rpy(s.pitch);
        acc.ffc += traj.contacts[t] as f64;
        acc.jbh += jump_body_height(s.height, cmd.h_target, s.velocity[2]);
        if t > 0 {
            let prev = &traj.actions[t - 1];
            acc.ar += a.iter().zip(prev).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        acc.ts += a.iter().map(|x| x * x).sum::<f64>();
    }
    let n = h as f64;
    RewardTerms {
        lvt: acc.lvt / n,
        avt: acc.avt / n,
        lo: acc.lo / n,
        lorpy: acc.lorpy / n,
        ffc: acc.ffc / n,
        jbh: acc.jbh / n,
        ar: acc.ar / n,
        ts: acc.ts / n,
    }
}

impl RewardTerms {
    pub fn target(&self) -> f64 {
        5.0 * self.lvt + 1.5 * self.avt + 0.3 * self.lo + 0.3 * self.lorpy - 0.3 * self.ffc
            + 0.3 * self.jbh
            - 0.003 * self.ar
            - 0.00003 * self.ts
    }
}

pub fn r_target(traj: &Trajectory, cmd: &TaskCommand) -> f64 {
    reward_terms(traj, cmd).target()
}
