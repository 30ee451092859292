use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

use rsg_core::catalog::{load_catalog, EnvInstance, SkillCatalog, TaskVector};
use rsg_core::composition::GpHyper;
use rsg_core::fixtures;
use rsg_core::inference::{Thresholds, ALPHA_HIGH, ALPHA_LOW, DEFAULT_SELECT};
use rsg_core::sketch::{sketch_to_task, SketchPoint, DEFAULT_WINDOW};

/// Input error detected after argument parsing; exits with the usage code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Args)]
pub struct CatalogArg {
    /// Catalog JSON file, or `preset:full`, `preset:synthetic`, `preset:one-to-many`.
    #[arg(long, default_value = "preset:synthetic")]
    pub catalog: String,
}

impl CatalogArg {
    pub fn load(&self) -> Result<SkillCatalog> {
        match self.catalog.strip_prefix("preset:") {
            Some(name) => fixtures::by_name(name).ok_or_else(|| usage(format!("unknown catalog preset {name:?}"))),
            None => Ok(load_catalog(&self.catalog)?),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        (!self.catalog.starts_with("preset:")).then(|| Path::new(&self.catalog))
    }
}

#[derive(Debug, Clone, Args)]
pub struct EnvArgs {
    /// Environment as JSON: `{"friction":..,"flatness":..,"slope":..}`.
    #[arg(long)]
    pub env: Option<String>,
    /// Query the midpoint of a catalog environment class instead.
    #[arg(long, conflicts_with = "env")]
    pub env_class: Option<String>,
}

impl EnvArgs {
    pub fn resolve(&self, catalog: &SkillCatalog) -> Result<EnvInstance> {
        match (&self.env, &self.env_class) {
            (Some(json), None) => {
                let mut env: EnvInstance = serde_json::from_str(json).context("parsing --env")?;
                if env.class_name.is_empty() {
                    env.class_name = "query".into();
                }
                if ![env.friction, env.flatness, env.slope].iter().all(|v| v.is_finite()) {
                    anyhow::bail!(rsg_core::Error::Invalid("environment parameters must be finite".into()));
                }
                Ok(env)
            }
            (None, Some(name)) => catalog
                .env_class(name)
                .map(|c| c.midpoint())
                .ok_or_else(|| rsg_core::Error::Invalid(format!("no environment class {name:?}")).into()),
            _ => Err(usage("give --env or --env-class")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TaskArgs {
    /// Task vector JSON (`rsg-task-v1` document or a flat array of 77 numbers).
    #[arg(long)]
    pub task: Option<PathBuf>,
    /// Sketch polyline, as a JSON array of `{x, y, t}` or a CSV with an `x,y,t` header.
    #[arg(long, conflicts_with = "task")]
    pub sketch: Option<PathBuf>,
    /// Moving-average window applied to sketches.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
}

impl TaskArgs {
    pub fn resolve(&self, v_max: f64) -> Result<TaskVector> {
        match (&self.task, &self.sketch) {
            (Some(path), None) => read_task(path),
            (None, Some(path)) => Ok(sketch_to_task(&read_sketch(path)?, self.window, v_max)?),
            _ => Err(usage("give --task or --sketch")),
        }
    }

    pub fn given(&self) -> bool {
        self.task.is_some() || self.sketch.is_some()
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| {
        rsg_core::Error::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

pub fn read_task(path: &Path) -> Result<TaskVector> {
    Ok(TaskVector::from_json(&read_text(path)?)?)
}

pub fn read_sketch(path: &Path) -> Result<Vec<SketchPoint>> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing sketch {}", path.display()));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<csv::Result<Vec<SketchPoint>>>()
        .with_context(|| format!("parsing sketch {}", path.display()))
}

#[derive(Debug, Clone, Args)]
pub struct DispatchArgs {
    #[arg(long, default_value_t = ALPHA_HIGH)]
    pub alpha_high: f64,
    #[arg(long, default_value_t = ALPHA_LOW)]
    pub alpha_low: f64,
    /// Skills handed to composition.
    #[arg(long, default_value_t = DEFAULT_SELECT)]
    pub select: usize,
}

impl DispatchArgs {
    pub fn thresholds(&self) -> Result<Thresholds> {
        let t = Thresholds {
            high: self.alpha_high,
            low: self.alpha_low,
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GpArgs {
    #[arg(long, default_value_t = 2.0)]
    pub sigma_f: f64,
    #[arg(long, default_value_t = 1.0)]
    pub length_scale: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub sigma_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gp_mean: f64,
}

impl GpArgs {
    pub fn hyper(&self) -> GpHyper {
        GpHyper {
            sigma_f: self.sigma_f,
            length: self.length_scale,
            sigma_noise: self.sigma_noise,
            mean: self.gp_mean,
        }
    }
}

/// Where a composed or fine-tuned skill is registered.
#[derive(Debug, Clone, Args)]
pub struct RegisterArgs {
    /// Add the result to the catalog under this skill id.
    #[arg(long)]
    pub register: Option<String>,
    /// Task class name of the registered skill (defaults to the id).
    #[arg(long, requires = "register")]
    pub task_name: Option<String>,
    /// Catalog file to write; defaults to the --catalog file itself.
    #[arg(long, requires = "register")]
    pub catalog_out: Option<PathBuf>,
    /// Training facts of the model; with --model-out the graph is retrained to include the skill.
    #[arg(long, requires = "model_out")]
    pub facts: Option<PathBuf>,
    #[arg(long, requires_all = ["register", "facts"])]
    pub model_out: Option<PathBuf>,
    #[arg(long, requires = "model_out")]
    pub facts_out: Option<PathBuf>,
    /// Warm-start epochs after registration.
    #[arg(long, default_value_t = 20)]
    pub retrain_epochs: usize,
    /// Facts sampled per relation for the new skill.
    #[arg(long, default_value_t = 20)]
    pub register_instances: usize,
}
