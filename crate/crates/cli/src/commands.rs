use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;
use tracing::info;

use rsg_core::catalog::{materialize, EnvInstance, GraphFacts, SkillCatalog, TaskVector, DEFAULT_V_MAX};
use rsg_core::composition::{
    add_skill_to_catalog, bo_optimize, composite_policy, finetune as run_finetune, primitive_generators,
    register_new_skill, BoConfig, CompositionParams, FinetuneConfig, NewSkill,
};
use rsg_core::embedding::{train as run_train, Optimizer, ScoreMode, TrainConfig};
use rsg_core::eval::{
    class_query_top1, class_score_distributions, instance_query_top1, ranking_auc, sbm_class_score_distributions,
    summarize, write_class_scores_csv, SeparationReport,
};
use rsg_core::inference::{dispatch_with, query, score_matrix, write_score_matrix_csv, DispatchMode, QueryReport, SkillScore};
use rsg_core::toysim::{r_target, rollout as run_rollout, EnvDynamics, GeneratorSpec, SkillGenerator};
use rsg_core::Graph;
use rsg_service::{AppState, Settings};

use crate::args::{read_text, usage, DispatchArgs, RegisterArgs};
use crate::{
    BuildArgs, ComposeArgs, DispatchCmd, EvalArgs, FinetuneArgs, InferArgs, ModeArg, OptimizerArg, RolloutArgs,
    ServeArgs, SketchArgs, TrainArgs,
};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| {
        rsg_core::Error::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => write_file(path, &(json + "\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    Graph::load(path).with_context(|| format!("loading model {}", path.display()))
}

pub fn build(a: BuildArgs) -> Result<()> {
    let catalog = a.catalog.load()?;
    let facts = materialize(&catalog, a.instances, a.seed)?;
    facts.save(&a.out)?;
    if let Some(path) = &a.catalog_out {
        catalog.save(path)?;
    }
    println!(
        "{} skills, {} environment and {} task instances, {} facts -> {}",
        facts.skill_ids.len(),
        facts.env_instances.len(),
        facts.task_instances.len(),
        facts.positives.len(),
        a.out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let catalog = a.catalog.load()?;
    let facts = match &a.facts {
        Some(path) => GraphFacts::load(path)?,
        None => materialize(&catalog, a.instances, a.seed)?,
    };
    let cfg = TrainConfig {
        optimizer: match a.optimizer {
            OptimizerArg::Adam => Optimizer::Adam,
            OptimizerArg::Sgd => Optimizer::Sgd,
        },
        dim: a.dim,
        hidden: a.hidden,
        lambda: a.lambda,
        lr: a.lr,
        lr_decay: a.lr_decay,
        epochs: a.epochs,
        batch_size: a.batch_size,
        k_neg: a.k_neg,
        k_soft: a.k_soft,
        seed: a.seed,
        mode: match a.mode {
            ModeArg::Transh => ScoreMode::TransH,
            ModeArg::Transe => ScoreMode::TransE,
        },
        ortho_weight: a.ortho_weight,
        c_delta_env: a.c_delta_env,
        c_delta_task: a.c_delta_task,
    };
    info!(epochs = cfg.epochs, skills = catalog.skills.len(), "training");
    let outcome = run_train::<f64>(&catalog, &facts, &cfg)?;
    outcome.graph.save(&a.out)?;
    if let Some(path) = &a.loss_csv {
        outcome.write_loss_csv(path)?;
    }
    let first = outcome.loss_trace.first().copied().unwrap_or(f64::NAN);
    let last = outcome.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} skills for {} epochs, loss {first:.5} -> {last:.5} -> {}",
        outcome.graph.num_skills(),
        cfg.epochs,
        a.out.display()
    );
    Ok(())
}

struct Query {
    catalog: SkillCatalog,
    graph: Graph,
    env: EnvInstance,
    task: TaskVector,
    report: QueryReport,
}

fn run_query(
    model: &Path,
    catalog: &crate::args::CatalogArg,
    env: &crate::args::EnvArgs,
    task: &crate::args::TaskArgs,
    top: usize,
    dispatch: &DispatchArgs,
) -> Result<Query> {
    let thresholds = dispatch.thresholds()?;
    let catalog = catalog.load()?;
    let graph = load_graph(model)?;
    let env = env.resolve(&catalog)?;
    let task = task.resolve(catalog.v_max)?;
    let report = query(&graph, &env, &task, top, dispatch.select, &thresholds)?;
    Ok(Query {
        catalog,
        graph,
        env,
        task,
        report,
    })
}

pub fn infer(a: InferArgs) -> Result<()> {
    let q = run_query(&a.model, &a.catalog, &a.env, &a.task, a.top, &a.dispatch)?;
    if let Some(path) = &a.matrix_csv {
        let envs: Vec<EnvInstance> = q.catalog.env_classes.iter().map(|c| c.midpoint()).collect();
        let rows = score_matrix(&q.graph, &envs, std::slice::from_ref(&q.task))?;
        write_score_matrix_csv(&rows, path)?;
    }
    emit(&q.report, a.out.as_deref())?;
    if let Some(path) = &a.out {
        let d = &q.report.decision;
        println!("top score {:.4} ({:?}) -> {}", d.top_score, d.mode, path.display());
    }
    Ok(())
}

pub fn dispatch(a: DispatchCmd) -> Result<()> {
    let thresholds = a.dispatch.thresholds()?;
    let text = read_text(&a.ranking)?;
    let value: serde_json::Value = serde_json::from_str(&text).context("parsing ranking")?;
    let ranking = value.get("ranking").cloned().unwrap_or(value);
    let ranking: Vec<SkillScore> = serde_json::from_value(ranking).context("parsing ranking")?;
    let decision = dispatch_with(&ranking, a.dispatch.select, &thresholds)?;
    emit(&decision, None)
}

#[derive(Serialize)]
struct RolloutSummary {
    skill: String,
    horizon: usize,
    final_position: [f64; 3],
    r_target: Option<f64>,
}

pub fn rollout(a: RolloutArgs) -> Result<()> {
    let catalog = a.catalog.load()?;
    let skill = catalog
        .skill(&a.skill)
        .ok_or_else(|| rsg_core::Error::Invalid(format!("no skill {:?}", a.skill)))?;
    let generator = catalog.generator(skill)?;
    let env = a.env.resolve(&catalog)?;
    let traj = run_rollout(generator, &EnvDynamics::from_instance(&env), a.horizon, a.seed);
    let reward = if a.task.given() {
        let task = a.task.resolve(catalog.v_max)?;
        Some(r_target(&traj, &task.command(catalog.v_max, a.period)))
    } else {
        None
    };
    let summary = RolloutSummary {
        skill: a.skill.clone(),
        horizon: traj.horizon(),
        final_position: traj.states.last().map_or([0.0; 3], |s| s.position),
        r_target: reward,
    };
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|source| rsg_core::Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            traj.write_csv(file)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        None => {
            traj.write_csv(std::io::stdout().lock())?;
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
    }
    Ok(())
}

/// Returns the selected skills' generators, refusing an execute decision unless forced.
fn composable(q: &Query, force: bool) -> Result<Vec<SkillGenerator>> {
    let d = &q.report.decision;
    if d.mode == DispatchMode::Execute && !force {
        return Err(rsg_core::Error::Invalid(format!(
            "top score {:.4} deploys {} directly; pass --force to adapt anyway",
            d.top_score, d.selected[0]
        ))
        .into());
    }
    Ok(primitive_generators(&q.catalog, &d.selected)?)
}

/// Catalog file a registration writes to, checked before any work is done.
fn register_target(r: &RegisterArgs, catalog_arg: &crate::args::CatalogArg) -> Result<Option<PathBuf>> {
    if r.register.is_none() {
        return Ok(None);
    }
    match (&r.catalog_out, catalog_arg.path()) {
        (Some(p), _) => Ok(Some(p.clone())),
        (None, Some(p)) => Ok(Some(p.to_path_buf())),
        (None, None) => Err(usage("registering into a preset catalog needs --catalog-out")),
    }
}

fn register(q: &Query, r: &RegisterArgs, catalog_out: Option<PathBuf>, generator: GeneratorSpec, seed: u64) -> Result<()> {
    let (Some(id), Some(catalog_out)) = (&r.register, catalog_out) else {
        return Ok(());
    };
    let skill = NewSkill {
        id: id.clone(),
        name: id.clone(),
        task_name: r.task_name.clone().unwrap_or_else(|| id.clone()),
        env: q.env.clone(),
        generator,
    };
    match (&r.model_out, &r.facts) {
        (Some(model_out), Some(facts)) => {
            let facts = GraphFacts::load(facts)?;
            let cfg = TrainConfig {
                epochs: r.retrain_epochs,
                dim: q.graph.dim,
                lambda: q.graph.lambda,
                mode: q.graph.mode,
                seed,
                ..Default::default()
            };
            let reg = register_new_skill(&q.graph, &q.catalog, &facts, skill, r.register_instances, cfg.seed, &cfg)?;
            reg.catalog.save(&catalog_out)?;
            reg.graph.save(model_out)?;
            if let Some(path) = &r.facts_out {
                reg.facts.save(path)?;
            }
            println!("registered {id} -> {}, {}", catalog_out.display(), model_out.display());
        }
        _ => {
            add_skill_to_catalog(&q.catalog, &skill)?.save(&catalog_out)?;
            println!("registered {id} -> {}", catalog_out.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ComposeResult {
    mode: DispatchMode,
    selected: Vec<String>,
    scores: Vec<f64>,
    params: CompositionParams<f64>,
    best_return: f64,
    iterations: usize,
}

pub fn compose(a: ComposeArgs) -> Result<()> {
    let q = run_query(&a.model, &a.catalog, &a.env, &a.task, a.dispatch.select, &a.dispatch)?;
    let target = register_target(&a.register, &a.catalog)?;
    let generators = composable(&q, a.force)?;
    let cfg = BoConfig {
        budget: a.budget,
        candidates: a.candidates,
        bias_bound: a.bias_bound,
        horizon: a.horizon,
        hyper: a.gp.hyper(),
        xi: a.xi,
        center: !a.no_center,
        ..Default::default()
    };
    let cmd = q.task.command(q.catalog.v_max, a.period);
    let d = &q.report.decision;
    let (params, trace) = bo_optimize(&generators, &d.scores, &cmd, &q.env, &cfg, a.seed)?;
    if let Some(path) = &a.trace {
        trace.write_csv(path)?;
    }
    let result = ComposeResult {
        mode: d.mode,
        selected: d.selected.clone(),
        scores: d.scores.clone(),
        params: params.clone(),
        best_return: trace.best(),
        iterations: trace.steps.len(),
    };
    emit(&result, a.out.as_deref())?;
    if a.out.is_some() {
        println!(
            "composed {} over {} iterations, best return {:.4}",
            d.selected.join(" + "),
            result.iterations,
            result.best_return
        );
    }
    let policy = composite_policy(&generators, &params);
    register(&q, &a.register, target, GeneratorSpec::Composite(policy), a.seed)
}

#[derive(Serialize)]
struct FinetuneResult {
    mode: DispatchMode,
    selected: Vec<String>,
    scores: Vec<f64>,
    params: CompositionParams<f64>,
    generators: Vec<SkillGenerator>,
    initial_return: f64,
    final_return: f64,
    env_steps: usize,
}

pub fn finetune(a: FinetuneArgs) -> Result<()> {
    let q = run_query(&a.model, &a.catalog, &a.env, &a.task, a.dispatch.select, &a.dispatch)?;
    let target = register_target(&a.register, &a.catalog)?;
    let generators = composable(&q, a.force)?;
    let cfg = FinetuneConfig {
        budget_steps: a.budget,
        horizon: a.horizon,
        episodes_per_update: a.episodes,
        sigma: a.sigma,
        lr: a.lr,
        clip: a.clip,
        tune_generators: !a.freeze_generators,
        ..Default::default()
    };
    let cmd = q.task.command(q.catalog.v_max, a.period);
    let d = &q.report.decision;
    let out = run_finetune(&generators, &d.scores, &cmd, &q.env, &cfg, a.seed)?;
    if let Some(path) = &a.trace {
        out.write_csv(path)?;
    }
    let result = FinetuneResult {
        mode: d.mode,
        selected: d.selected.clone(),
        scores: d.scores.clone(),
        params: out.params.clone(),
        generators: out.generators.clone(),
        initial_return: out.initial_return,
        final_return: out.final_return(),
        env_steps: out.env_steps,
    };
    emit(&result, a.out.as_deref())?;
    if a.out.is_some() {
        println!(
            "fine-tuned {} with {} steps, return {:.4} -> {:.4}",
            d.selected.join(" + "),
            result.env_steps,
            result.initial_return,
            result.final_return
        );
    }
    let policy = composite_policy(&out.generators, &out.params);
    register(&q, &a.register, target, GeneratorSpec::Composite(policy), a.seed)
}

#[derive(Serialize)]
struct EvalSummary {
    class_query_top1: f64,
    instance_query_top1: f64,
    held_out_auc: f64,
    rsg: SeparationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    rsg_transe: Option<SeparationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sbm: Option<SeparationReport>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let catalog = a.catalog.load()?;
    let graph = load_graph(&a.model)?;
    let facts = match &a.facts {
        Some(path) => GraphFacts::load(path)?,
        None => materialize(&catalog, a.instances, a.seed)?,
    };
    let held = materialize(&catalog, a.eval_instances, a.eval_seed)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|source| rsg_core::Error::Io {
        path: a.out_dir.display().to_string(),
        source,
    })?;

    let rsg = class_score_distributions(&graph, &catalog, &held)?;
    write_class_scores_csv(a.out_dir.join("rsg_scores.csv"), &catalog, &rsg)?;
    let mut summary = EvalSummary {
        class_query_top1: class_query_top1(&graph, &catalog, &held)?.rate(),
        instance_query_top1: instance_query_top1(&graph, &held)?.rate(),
        held_out_auc: ranking_auc(&graph, &held, 4, a.seed)?,
        rsg: summarize(&catalog, &rsg),
        rsg_transe: None,
        sbm: None,
    };

    if a.compare.is_some() {
        let transe = match &a.transe_model {
            Some(path) => load_graph(path)?,
            None => {
                let cfg = TrainConfig {
                    mode: ScoreMode::TransE,
                    epochs: a.transe_epochs,
                    seed: a.seed,
                    ..Default::default()
                };
                info!(epochs = cfg.epochs, "training TransE-mode graph");
                run_train::<f64>(&catalog, &facts, &cfg)?.graph
            }
        };
        let te = class_score_distributions(&transe, &catalog, &held)?;
        write_class_scores_csv(a.out_dir.join("rsg_transe_scores.csv"), &catalog, &te)?;
        summary.rsg_transe = Some(summarize(&catalog, &te));
        let sbm = sbm_class_score_distributions(&catalog, &facts, &held, a.tau)?;
        write_class_scores_csv(a.out_dir.join("sbm_scores.csv"), &catalog, &sbm)?;
        summary.sbm = Some(summarize(&catalog, &sbm));
    }

    let path = a.out_dir.join("summary.json");
    write_file(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "class-query top-1 {:.3}, instance top-1 {:.3}, held-out AUC {:.3}",
        summary.class_query_top1, summary.instance_query_top1, summary.held_out_auc
    )?;
    let line = |name: &str, r: &SeparationReport| {
        format!(
            "{name:<11} env separated {:.3}, task separated {:.3}, overlap {:.4}",
            r.env_separated,
            r.task_separated,
            r.overlap.fraction()
        )
    };
    writeln!(out, "{}", line("rsg", &summary.rsg))?;
    if let Some(r) = &summary.rsg_transe {
        writeln!(out, "{}", line("rsg-transe", r))?;
    }
    if let Some(r) = &summary.sbm {
        writeln!(out, "{}", line("sbm", r))?;
    }
    writeln!(out, "wrote {}", a.out_dir.display())?;
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let catalog = a.catalog.load()?;
    let graph = load_graph(&a.model)?;
    let mut settings = Settings {
        top_k: a.top,
        n_select: a.dispatch.select,
        thresholds: a.dispatch.thresholds()?,
        seed: a.seed,
        ..Default::default()
    };
    settings.bo.budget = a.budget;
    let state = AppState::new(graph, catalog, settings).map_err(rsg_core::Error::Invalid)?;
    let addr = format!("{}:{}", a.host, a.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("listening on http://{addr}");
        rsg_service::serve(listener, Arc::new(state)).await?;
        Ok(())
    })
}

pub fn sketch2task(a: SketchArgs) -> Result<()> {
    let v_max = match a.v_max {
        Some(v) => v,
        None if a.catalog.path().is_some() => a.catalog.load()?.v_max,
        None => DEFAULT_V_MAX,
    };
    let points = crate::args::read_sketch(&a.sketch)?;
    let task = rsg_core::sketch::sketch_to_task(&points, a.window, v_max)?;
    match &a.out {
        Some(path) => {
            write_file(path, &(task.to_json() + "\n"))?;
            println!("{} sketch points -> {}", points.len(), path.display());
        }
        None => println!("{}", task.to_json()),
    }
    Ok(())
}
