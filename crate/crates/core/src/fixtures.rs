//! Built-in catalogs: the 12 terrain classes, the 31-task / 320-skill inventory,
//! a compact 12 × 8 catalog for evaluation, and a one-to-many toy graph.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::catalog::{EnvClass, Interval, SkillCatalog, SkillRecord};
use crate::toysim::{GeneratorKind, GeneratorParams, GeneratorSpec, SkillGenerator};

pub const ANCHOR_CLASS: &str = "Indoor Floor";

pub fn full_env_classes() -> Vec<EnvClass> {
    let i = Interval::new;
    let p = Interval::point;
    vec![
        EnvClass::new("Indoor Floor", i(0.6, 0.9), p(0.0), p(0.0)),
        EnvClass::new("Ice Surface", i(0.01, 0.1), p(0.0), p(0.0)),
        EnvClass::new("Upstairs", i(1.2, 1.5), i(0.0, 13.125), i(0.0, 0.4)),
        EnvClass::new("Downstairs", i(1.2, 1.5), i(0.0, 14.375), i(-0.26, 0.0)),
        EnvClass::new("Marble Slope Uphill", i(0.7, 1.1), i(2.25, 2.625), i(0.15, 0.25)),
        EnvClass::new("Marble Slope Downhill", i(0.7, 1.1), i(3.0, 3.375), i(-0.3, -0.18)),
        EnvClass::new("Grassland", i(0.5, 0.7), i(0.25, 9.0), p(0.0)),
        EnvClass::new("Grassland Slope Uphill", i(0.5, 0.7), i(0.25, 6.125), i(0.06, 0.1)),
        EnvClass::new("Grassland Slope Downhill", i(0.5, 0.7), i(0.375, 7.75), i(-0.25, -0.15)),
        EnvClass::new("Grass and Pebble", i(0.05, 0.1), i(0.0, 25.375), p(0.0)),
        EnvClass::new("Steps", i(0.6, 1.2), i(0.0, 12.75), p(0.0)),
        EnvClass::new("Grass and Sand", i(0.3, 0.4), i(0.25, 5.625), p(0.0)),
    ]
}

fn gait(speed: f64, dir: f64, yaw: f64) -> SkillGenerator {
    SkillGenerator::gait(speed, dir, yaw)
}

fn small_gait(speed: f64, swing: f64) -> SkillGenerator {
    let mut g = gait(speed, 0.0, 0.0);
    g.params.swing = swing;
    g
}

/// The 31 task names with their generators.
pub fn full_tasks() -> Vec<(&'static str, SkillGenerator)> {
    let back = PI;
    let left = FRAC_PI_2;
    let right = -FRAC_PI_2;
    let jump = |speed, dir| SkillGenerator::jump(speed, dir, 0.8);
    vec![
        ("Forward Walking", gait(0.6, 0.0, 0.0)),
        ("Forward Right", gait(0.4, 0.0, -0.4)),
        ("Forward Left", gait(0.4, 0.0, 0.4)),
        ("Backward Walking", gait(0.6, back, 0.0)),
        ("Backward Right", gait(0.5, back, 0.4)),
        ("Backward Left", gait(0.4, back, 0.4)),
        ("Sidestep Right", gait(0.6, right, 0.0)),
        ("Sidestep Left", gait(0.6, left, 0.0)),
        ("Spin Clockwise", gait(0.0, 0.0, -4.0)),
        ("Spin Counter-clockwise", gait(0.0, 0.0, 4.0)),
        ("Gallop", gait(2.0, 0.0, 0.0)),
        ("Forward Walking Fast", gait(1.0, 0.0, 0.0)),
        ("Forward Mass", gait(0.6, 0.0, 0.0)),
        ("Forward Noise", gait(0.6, 0.0, 0.0)),
        ("Jump in Place", jump(0.0, 0.0)),
        ("Jump Backward", jump(1.0, back)),
        ("Jump Forward", jump(1.0, 0.0)),
        ("Jump Left", jump(0.75, left)),
        ("Jump Right", jump(0.75, right)),
        ("Roll", SkillGenerator::posture()),
        ("Standup", SkillGenerator::posture()),
        ("Crawl", small_gait(0.3, 0.15)),
        ("Trot", gait(0.3, 0.0, 0.0)),
        ("Pace", small_gait(0.3, 0.25)),
        ("Small Steps", small_gait(0.3, 0.1)),
        ("Backward Walking Slow", gait(0.3, back, 0.0)),
        ("Forward Walking Slow", gait(0.3, 0.0, 0.0)),
        ("Sidestep Left Slow", gait(0.3, left, 0.0)),
        ("Sidestep Right Slow", gait(0.3, right, 0.0)),
        ("Spin Clockwise Slow", gait(0.0, 0.0, -0.8)),
        ("Spin Counterclockwise Slow", gait(0.0, 0.0, 0.8)),
    ]
}

pub fn slug(name: &str) -> String {
    name.to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn build(
    env_classes: Vec<EnvClass>,
    tasks: &[(&str, SkillGenerator)],
    pairs: impl IntoIterator<Item = (usize, usize)>,
) -> SkillCatalog {
    let mut cat = SkillCatalog::new(ANCHOR_CLASS, env_classes);
    for (name, gen) in tasks {
        cat.generators
            .insert(format!("gen:{}", slug(name)), GeneratorSpec::Primitive(*gen));
    }
    for (e, t) in pairs {
        let env = cat.env_classes[e].name.clone();
        let task = tasks[t].0;
        cat.skills.push(SkillRecord {
            id: format!("{}@{}", slug(task), slug(&env)),
            name: format!("{task}_{env}"),
            env_class: env,
            task_name: task.to_string(),
            generator: format!("gen:{}", slug(task)),
        });
    }
    cat
}

/// 320 skills over 12 environment classes and 31 tasks.
///
/// Every task is trained on the anchor class; each other class carries 26
/// tasks in a class-dependent rotation, and the first three carry a 27th.
pub fn full_catalog() -> SkillCatalog {
    let tasks = full_tasks();
    let nt = tasks.len();
    let mut pairs: Vec<(usize, usize)> = (0..nt).map(|t| (0, t)).collect();
    for e in 1..12 {
        let count = if e <= 3 { 27 } else { 26 };
        pairs.extend((0..count).map(|k| (e, (k + 3 * e) % nt)));
    }
    build(full_env_classes(), &tasks, pairs)
}

pub const SYNTHETIC_TASKS: [&str; 8] = [
    "Forward Walking",
    "Backward Walking",
    "Sidestep Left",
    "Sidestep Right",
    "Spin Clockwise",
    "Spin Counter-clockwise",
    "Jump in Place",
    "Forward Left",
];

/// Full cross product of the 12 terrain classes and 8 well-separated tasks.
pub fn synthetic_catalog() -> SkillCatalog {
    let all = full_tasks();
    let tasks: Vec<_> = SYNTHETIC_TASKS
        .iter()
        .map(|n| *all.iter().find(|(m, _)| m == n).expect("known task"))
        .collect();
    let pairs = (0..12).flat_map(|e| (0..tasks.len()).map(move |t| (e, t)));
    build(full_env_classes(), &tasks, pairs)
}

/// A single point environment linked to three skills with distinct tasks.
pub fn one_to_many_catalog() -> SkillCatalog {
    let env = EnvClass::new(
        ANCHOR_CLASS,
        Interval::point(0.75),
        Interval::point(0.0),
        Interval::point(0.0),
    );
    let all = full_tasks();
    let tasks: Vec<_> = ["Forward Walking", "Backward Walking", "Spin Counter-clockwise"]
        .iter()
        .map(|n| *all.iter().find(|(m, _)| m == n).expect("known task"))
        .collect();
    build(vec![env], &tasks, (0..3).map(|t| (0, t)))
}

/// Generator with all drives at zero, the starting point of from-scratch learning.
pub fn blank_generator() -> SkillGenerator {
    SkillGenerator::new(
        GeneratorKind::Gait,
        GeneratorParams {
            swing: 0.3,
            ..GeneratorParams::default()
        },
    )
}

pub fn by_name(name: &str) -> Option<SkillCatalog> {
    match name {
        "full" => Some(full_catalog()),
        "synthetic" => Some(synthetic_catalog()),
        "one-to-many" => Some(one_to_many_catalog()),
        _ => None,
    }
}
