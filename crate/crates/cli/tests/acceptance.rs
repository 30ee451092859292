//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails at the end if any criterion failed.
//!
//! Run with `cargo test -p rsg-cli --test acceptance -- --nocapture` to see the report.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng as _;

use rsg_core::catalog::{materialize, EnvInstance, GraphFacts, SkillCatalog, TaskVector, TripleKind};
use rsg_core::composition::bo::random_candidate;
use rsg_core::composition::{
    bo_maximize, bo_optimize, evaluate_composition, finetune, finetune_from, gp_fit, gp_predict, BoConfig,
    CompositionParams, FinetuneConfig, GpHyper,
};
use rsg_core::embedding::gradcheck::check_batch;
use rsg_core::embedding::kernels::ENV_KAPPA_CAP;
use rsg_core::embedding::{
    env_kappa, generate_triples, init_graph, soft_margin, task_kappa, train, transh_score, triple_loss,
    RelationEmbedding, ScoreMode, SoftMargin, TrainConfig, TrainedGraph, TripleConfig, TriplePools,
};
use rsg_core::eval::{class_query_top1, one_to_many_scores, rsg_separation, sbm_separation};
use rsg_core::fixtures::{blank_generator, one_to_many_catalog, full_env_classes, full_tasks, synthetic_catalog};
use rsg_core::inference::{dispatch, infer, DispatchMode, SkillScore};
use rsg_core::rng::{mix, stream, Stream};
use rsg_core::sketch::{sketch_to_task, SketchPoint, DEFAULT_WINDOW};
use rsg_core::toysim::{
    jump_body_height, lvt, r_target, reward_terms, BodyState, GeneratorSpec, RewardTerms, SkillGenerator,
    TaskCommand, Trajectory, ACTION_DIM, DT,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Report {
    lines: Vec<(usize, bool)>,
}

impl Report {
    fn run(&mut self, id: usize, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut out = f();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                out.pass = false;
                out.detail.push_str(&format!("; over the {limit:?} limit"));
            }
        }
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id}: {} ({:.2?})", out.detail, elapsed);
        self.lines.push((id, out.pass));
    }
}

fn gradient_suite() -> Outcome {
    let catalog = synthetic_catalog();
    let facts = materialize(&catalog, 3, 11).unwrap();
    let pools = TriplePools::new(&facts);
    let tcfg = TripleConfig {
        k_neg: 4,
        k_soft: 2,
        env_margin: SoftMargin {
            scale: 7.0,
            cap: ENV_KAPPA_CAP,
        },
        task_margin: SoftMargin::task(),
        env_pair_norm_max: catalog.env_pair_norm_max(),
    };
    let mut rng = stream(1, Stream::Evaluation);
    let mut worst = (0.0f64, "");
    for batch_no in 0..100u64 {
        let cfg = TrainConfig {
            seed: batch_no,
            mode: if batch_no % 4 == 3 { ScoreMode::TransE } else { ScoreMode::TransH },
            ..Default::default()
        };
        let graph: TrainedGraph<f64> = init_graph(&catalog, &cfg);
        let positives: Vec<_> = facts.positives.choose_multiple(&mut rng, 3).cloned().collect();
        let augmented = generate_triples(&positives, &facts, &pools, &tcfg, &mut rng).unwrap();
        let batch: Vec<_> = augmented.choose_multiple(&mut rng, 5).cloned().collect();
        let ortho = if batch_no % 2 == 0 { 1e-3 } else { 0.0 };
        for c in check_batch(&graph, &facts, &batch, ortho, 1e-6, &mut rng) {
            if c.rel_error > worst.0 {
                worst = (c.rel_error, c.group);
            }
        }
    }
    Outcome::new(
        worst.0 < 1e-4,
        format!("100 batches x 7 groups, worst relative error {:.2e} ({})", worst.0, worst.1),
    )
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn gp_oracle() -> Outcome {
    let hyper = GpHyper::default();
    let sf2 = hyper.sigma_f * hyper.sigma_f;
    let kernel = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        sf2 * (-d2 / (2.0 * hyper.length * hyper.length)).exp()
    };
    let mut rng = stream(2, Stream::Evaluation);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(2..=4);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let gp = gp_fit(xs.clone(), ys.clone(), hyper).unwrap();
        let jitter = if gp.jittered() { 1e-8 * sf2 } else { 0.0 };
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let diag = if i == j { hyper.sigma_noise.powi(2) + jitter } else { 0.0 };
                        kernel(&xs[i], &xs[j]) + diag
                    })
                    .collect()
            })
            .collect();
        let alpha = dense_solve(gram.clone(), ys.clone());
        for _ in 0..5 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let kq: Vec<f64> = xs.iter().map(|x| kernel(x, &q)).collect();
            let mean: f64 = kq.iter().zip(&alpha).map(|(a, b)| a * b).sum();
            let v = dense_solve(gram.clone(), kq.clone());
            let var = sf2 - kq.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let (m, s2) = gp_predict(&gp, &q);
            worst = worst.max((m - mean).abs()).max((s2 - var).abs());
        }
    }
    Outcome::new(worst <= 1e-8, format!("50 fixtures x 5 queries, worst deviation {worst:.2e}"))
}

struct Trained {
    catalog: SkillCatalog,
    facts: GraphFacts,
    held: GraphFacts,
    graph: TrainedGraph<f64>,
}

fn link_prediction(t: &Trained) -> Outcome {
    let top1 = class_query_top1(&t.graph, &t.catalog, &t.held).unwrap();
    let sep = rsg_separation(&t.graph, &t.catalog, &t.held).unwrap();

    let otm = one_to_many_catalog();
    let otm_facts = materialize(&otm, 20, 3).unwrap();
    let otm_scores = |mode| {
        let cfg = TrainConfig {
            mode,
            epochs: 200,
            ..Default::default()
        };
        let g = train::<f64>(&otm, &otm_facts, &cfg).unwrap().graph;
        one_to_many_scores(&g, &otm_facts.env_instances[0])
    };
    let transh = otm_scores(ScoreMode::TransH);
    let transe = otm_scores(ScoreMode::TransE);
    let transh_ok = transh.iter().all(|&s| s > 0.9);
    let transe_ok = transe.iter().all(|&s| s > 0.9);

    let pass = top1.rate() >= 0.9 && sep.env_separated >= 0.8 && sep.task_separated >= 0.8 && transh_ok && !transe_ok;
    let fmt = |v: &[f64]| v.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", ");
    Outcome::new(
        pass,
        format!(
            "class-query top-1 {:.3}, separated env {:.3} task {:.3}; one-to-many TransH [{}], TransE [{}]",
            top1.rate(),
            sep.env_separated,
            sep.task_separated,
            fmt(&transh),
            fmt(&transe)
        ),
    )
}

fn sbm_comparison(t: &Trained) -> Outcome {
    let rsg = rsg_separation(&t.graph, &t.catalog, &t.held).unwrap().overlap.fraction();
    let sbm = sbm_separation(&t.catalog, &t.facts, &t.held).unwrap().overlap.fraction();
    Outcome::new(rsg < sbm, format!("overlap RSG {rsg:.4} vs SBM {sbm:.4}"))
}

fn dispatch_table() -> Outcome {
    let expected = |s: f64| {
        if s >= 0.9 {
            DispatchMode::Execute
        } else if s >= 0.7 {
            DispatchMode::Compose
        } else {
            DispatchMode::Finetune
        }
    };
    let mut scores: Vec<f64> = (0..=100_000).map(|i| i as f64 / 100_000.0).collect();
    for b in [0.9f64, 0.7] {
        scores.extend([b, b.next_down(), b.next_up()]);
    }
    let mut wrong = 0;
    for &s in &scores {
        let ranked = vec![
            SkillScore {
                skill_id: "a".into(),
                s_task: 1.0,
                s_env: s,
                s,
            },
            SkillScore {
                skill_id: "b".into(),
                s_task: 1.0,
                s_env: s / 2.0,
                s: s / 2.0,
            },
        ];
        let d = dispatch(&ranked, 3).unwrap();
        let want = expected(s);
        let selected_ok = match want {
            DispatchMode::Execute => d.selected == ["a"],
            _ => d.selected == ["a", "b"],
        };
        if DispatchMode::for_score(s) != want || d.mode != want || !selected_ok {
            wrong += 1;
        }
    }
    let boundary = DispatchMode::for_score(0.9) == DispatchMode::Execute && DispatchMode::for_score(0.7) == DispatchMode::Compose;
    Outcome::new(
        wrong == 0 && boundary,
        format!("{} scores checked, {wrong} misrouted; 0.9 -> execute, 0.7 -> compose", scores.len()),
    )
}

fn generator(name: &str) -> SkillGenerator {
    full_tasks().into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn bo_composition() -> Outcome {
    let gens = vec![generator("Forward Walking"), generator("Sidestep Left")];
    let cmd = TaskCommand::constant(0.3, 0.3, 0.0);
    let env = full_env_classes()[0].midpoint();
    let cfg = BoConfig {
        budget: 100,
        ..Default::default()
    };
    let scores = [0.8, 0.78];
    let mut reached = 0;
    let mut seeded_wins = 0;
    let mut worst_ratio = f64::INFINITY;
    let mut iters = Vec::new();
    for seed in 0..10u64 {
        let rollout_seed = mix(seed, 0);
        let objective = |p: &CompositionParams<f64>| evaluate_composition(&gens, p, &cmd, &env, cfg.horizon, rollout_seed);
        let mut oracle = f64::NEG_INFINITY;
        for i in 0..100 {
            for j in 0..100 {
                let w = i as f64 / 99.0;
                let p = CompositionParams::new(vec![w, 1.0 - w], vec![-0.5 + j as f64 / 99.0]).unwrap();
                oracle = oracle.max(objective(&p));
            }
        }
        let (_, seeded) = bo_optimize(&gens, &scores, &cmd, &env, &cfg, seed).unwrap();
        let init = random_candidate(2, &cfg, &mut stream(seed, Stream::Evaluation));
        let (_, uniform) = bo_maximize(init, &cfg, seed, |p| Ok(objective(p)), |_| {}).unwrap();
        let ratio = seeded.best() / oracle;
        worst_ratio = worst_ratio.min(ratio);
        if ratio >= 0.95 {
            reached += 1;
        }
        let s90 = seeded.iterations_to(0.9 * oracle).unwrap_or(usize::MAX);
        let u90 = uniform.iterations_to(0.9 * oracle).unwrap_or(usize::MAX);
        if s90 < u90 {
            seeded_wins += 1;
        }
        iters.push(format!("{s90}/{}", if u90 == usize::MAX { "-".to_string() } else { u90.to_string() }));
    }
    Outcome::new(
        reached == 10 && seeded_wins >= 8,
        format!(
            "95% of grid oracle on {reached}/10 seeds (worst {worst_ratio:.3}); seeded beats uniform on {seeded_wins}/10, iterations to 90% seeded/uniform [{}]",
            iters.join(" ")
        ),
    )
}

/// Constant-speed arc sketched at `speed` m/s while turning at `yaw` rad/s.
fn arc_sketch(speed: f64, yaw: f64) -> Vec<SketchPoint> {
    let r = speed / yaw;
    (0..60)
        .map(|i| {
            let t = i as f64 * 0.05;
            SketchPoint {
                x: r * (yaw * t).sin(),
                y: r * (1.0 - (yaw * t).cos()),
                t,
            }
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn finetune_efficiency(t: &Trained) -> Outcome {
    let catalog = &t.catalog;
    let task = sketch_to_task(&arc_sketch(0.7, 0.5), DEFAULT_WINDOW, catalog.v_max).unwrap();
    let env = full_env_classes()[6].midpoint();
    let ranked = infer(&t.graph, &env, &task);
    let decision = dispatch(&ranked, 3).unwrap();
    let gens: Vec<SkillGenerator> = decision
        .selected
        .iter()
        .map(|id| match catalog.generator(catalog.skill(id).unwrap()).unwrap() {
            GeneratorSpec::Primitive(g) => *g,
            GeneratorSpec::Composite(_) => unreachable!("catalog skills are primitive"),
        })
        .collect();
    let cmd = task.command(catalog.v_max, 50);
    let cfg = FinetuneConfig {
        budget_steps: 120_000,
        ..Default::default()
    };
    let scratch_init = CompositionParams::new(vec![1.0], vec![0.0]).unwrap();
    let mut ratios = Vec::new();
    let mut ft_finals = Vec::new();
    let mut bo_bests = Vec::new();
    for seed in 0..5u64 {
        let scratch = finetune_from(&[blank_generator()], scratch_init.clone(), 0, &cmd, &env, &cfg, seed).unwrap();
        let tail = &scratch.curve[scratch.curve.len() * 4 / 5..];
        let asymptote = tail.iter().map(|c| c.policy_return).sum::<f64>() / tail.len() as f64;
        let ft = finetune(&gens, &decision.scores, &cmd, &env, &cfg, seed).unwrap();
        let level = 0.9 * asymptote;
        let ratio = match (ft.steps_to(level), scratch.steps_to(level)) {
            (Some(f), Some(s)) if s > 0 => f as f64 / s as f64,
            _ => f64::INFINITY,
        };
        ratios.push(ratio);
        ft_finals.push(ft.final_return());
        let bo_cfg = BoConfig {
            budget: 100,
            ..Default::default()
        };
        bo_bests.push(bo_optimize(&gens, &decision.scores, &cmd, &env, &bo_cfg, seed).unwrap().1.best());
    }
    let ratio = median(ratios.clone());
    let ft_final = median(ft_finals);
    let bo_best = median(bo_bests);
    let fmt = ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    Outcome::new(
        decision.mode == DispatchMode::Finetune && ratio <= 0.2 && bo_best < ft_final,
        format!(
            "mode {:?} (top {:.3}), step ratio median {ratio:.3} [{fmt}]; BO best {bo_best:.3} < fine-tune {ft_final:.3}",
            decision.mode, decision.top_score
        ),
    )
}

fn rsg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rsg")).args(args).output().expect("run rsg")
}

fn same_files(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    for run in ["a", "b"] {
        let out = rsg(&[
            "train",
            "--catalog",
            "preset:synthetic",
            "--instances",
            "3",
            "--epochs",
            "5",
            "--seed",
            "17",
            "--out",
            &p(&format!("model_{run}.json")),
            "--loss-csv",
            &p(&format!("loss_{run}.csv")),
        ]);
        if !out.status.success() {
            return Outcome::new(false, format!("rsg train failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let sketch = serde_json::to_string(&arc_sketch(0.7, 0.5)).unwrap();
    std::fs::write(p("sketch.json"), sketch).unwrap();
    for run in ["a", "b"] {
        let out = rsg(&[
            "compose",
            "--model",
            &p("model_a.json"),
            "--catalog",
            "preset:synthetic",
            "--env-class",
            "Grassland",
            "--sketch",
            &p("sketch.json"),
            "--budget",
            "20",
            "--seed",
            "17",
            "--force",
            "--trace",
            &p(&format!("trace_{run}.csv")),
            "--out",
            &p(&format!("compose_{run}.json")),
        ]);
        if !out.status.success() {
            return Outcome::new(false, format!("rsg compose failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let pairs = ["model", "loss", "trace", "compose"];
    let ext = |k: &str| if k == "loss" || k == "trace" { "csv" } else { "json" };
    let differing: Vec<&str> = pairs
        .iter()
        .copied()
        .filter(|k| !same_files(Path::new(&p(&format!("{k}_a.{}", ext(k)))), Path::new(&p(&format!("{k}_b.{}", ext(k))))))
        .collect();
    Outcome::new(
        differing.is_empty(),
        if differing.is_empty() {
            "train model/loss and compose trace/result identical across runs".to_string()
        } else {
            format!("differing outputs: {differing:?}")
        },
    )
}

fn task_with(step: [f64; 7]) -> TaskVector {
    TaskVector { steps: [step; 11] }
}

fn unit_examples() -> Outcome {
    let mut failures: Vec<&str> = Vec::new();
    let mut check = |ok: bool, name: &'static str| {
        if !ok {
            failures.push(name);
        }
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;

    let e = EnvInstance::new("x", 0.6, 0.8, 0.1);
    check(env_kappa(&e, &e, 0.5) == 0.0, "env kappa identical");
    let flat = EnvInstance::new("x", 0.6, 0.8, 0.0);
    let sloped = EnvInstance::new("x", 0.6, 0.8, 0.4);
    check(close(env_kappa(&flat, &sloped, 0.5), 0.2), "env kappa slope");
    let catalog = synthetic_catalog();
    let x_max = catalog.env_pair_norm_max();
    let far = EnvInstance::new("x", 0.6 + x_max, 0.8, 0.0);
    check(close(env_kappa(&flat, &far, x_max), 1.0), "env kappa normalized maximum");

    let base = task_with([0.5, 0.2, 0.0, 0.5385, 1.0, 0.0, 0.3]);
    check(task_kappa(&base, &base) == 0.0, "task kappa identical");
    let reversed = task_with([-0.5, -0.2, 0.0, 0.5385, 1.0, 0.0, 0.3]);
    check(close(task_kappa(&base, &reversed), 22.0), "task kappa reversed velocity");
    let flipped = task_with([0.5, 0.2, 0.0, 0.5385, 0.0, 1.0, 0.3]);
    check(close(task_kappa(&base, &flipped), 22.0), "task kappa flipped yaw");

    let cap = 4.0;
    check(soft_margin(0.0, 1.0, cap) == 0.0, "delta at zero kappa");
    check(soft_margin(cap, 1.0, cap) == 1.0, "delta at cap");
    check(soft_margin(cap / 2.0, 1.0, cap) == 0.5, "delta at half cap");

    let delta = 0.3;
    let total = triple_loss(TripleKind::Positive, 1.0, 0.0)
        + triple_loss(TripleKind::Negative, 0.0, 0.0)
        + triple_loss(TripleKind::Soft, 1.0 - delta, delta);
    check(total == 0.0, "loss vanishes at ideal scores");
    check(triple_loss(TripleKind::Positive, 0.5, 0.0) == 0.25, "positive loss at 0.5");
    check(close(triple_loss(TripleKind::Soft, 1.0, 0.3), 0.3), "soft hinge");

    let rel = RelationEmbedding {
        normal: vec![1.0, 0.0, 0.0],
        translation: vec![0.0; 3],
    };
    check(transh_score(&[0.0, 1.0, 0.0], &rel, &[0.0, 1.0, 0.0], 3.0) == 1.0, "score at zero residual");
    check(close(transh_score(&[5.0, 1.0, 0.0], &rel, &[0.0; 3], 3.0), (-3.0f64).exp()), "score at unit residual");

    check(lvt(0.6, 0.0, 0.6, 0.0) == 1.0, "LVT exact tracking");
    check(close(lvt(1.1, 0.0, 0.6, 0.0), (-1.0f64).exp()), "LVT at 0.5 error");
    check(jump_body_height(0.35, 0.3, 0.0) == 0.0 && jump_body_height(0.35, 0.3, -0.2) == 0.0, "JBH without lift");

    let ideal = RewardTerms {
        lvt: 1.0,
        avt: 1.0,
        lo: 1.0,
        lorpy: 1.0,
        ..Default::default()
    };
    check(close(ideal.target(), 7.1), "r_target coefficient sum");

    let rest = BodyState {
        position: [0.0, 0.0, 0.3],
        velocity: [0.0; 3],
        yaw: 0.0,
        yaw_rate: 0.0,
        height: 0.3,
        pitch: 0.0,
    };
    let still = Trajectory {
        dt: DT,
        states: vec![rest; 11],
        actions: vec![[0.0; ACTION_DIM]; 10],
        contacts: vec![0; 10],
    };
    let zero = reward_terms(&still, &TaskCommand::constant(0.0, 0.0, 0.0));
    check(zero.lvt == 1.0 && zero.avt == 1.0, "zero trajectory tracks zero command");

    let mut traj = Trajectory {
        dt: DT,
        states: vec![rest],
        actions: Vec::new(),
        contacts: Vec::new(),
    };
    for k in 0..20 {
        let f = k as f64;
        let mut s = rest;
        s.velocity = [0.4 + 0.01 * f, -0.05 * (f * 0.3).sin(), 0.1 * (f * 0.7).cos()];
        s.yaw_rate = 0.2 - 0.02 * f;
        s.height = 0.3 + 0.01 * (f * 0.5).sin();
        s.pitch = 0.05 * (f * 0.2).cos();
        traj.states.push(s);
        traj.actions.push(std::array::from_fn(|j| 0.1 * ((f + j as f64) * 0.37).sin()));
        traj.contacts.push((k % 5) as u8);
    }
    let cmd = TaskCommand::constant(0.5, 0.0, 0.1);
    let mut sum = 0.0;
    for t in 0..20 {
        let s = &traj.states[t + 1];
        let a = &traj.actions[t];
        let lvt_t = (-((s.velocity[0] - 0.5).powi(2) + s.velocity[1].powi(2)) / 0.25).exp();
        let avt_t = (-(s.yaw_rate - 0.1).powi(2) / 0.25).exp();
        let lo_t = (-(1.0 - s.pitch.cos()).abs() / 0.25).exp();
        let lorpy_t = (-s.pitch.abs() / 0.25).exp();
        let jbh_t = if s.velocity[2] > 0.0 {
            (-(s.height - cmd.h_target).abs() / 0.25).exp() * s.velocity[2]
        } else {
            0.0
        };
        let ar_t: f64 = if t > 0 {
            a.iter().zip(&traj.actions[t - 1]).map(|(x, y)| (x - y).powi(2)).sum()
        } else {
            0.0
        };
        let ts_t: f64 = a.iter().map(|x| x * x).sum();
        sum += 5.0 * lvt_t + 1.5 * avt_t + 0.3 * lo_t + 0.3 * lorpy_t - 0.3 * traj.contacts[t] as f64 + 0.3 * jbh_t
            - 0.003 * ar_t
            - 0.00003 * ts_t;
    }
    check(close(r_target(&traj, &cmd), sum / 20.0), "r_target term-by-term oracle");

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "kappa, delta, loss, score and reward examples all hold".to_string()
        } else {
            format!("failing examples: {failures:?}")
        },
    )
}

#[test]
fn acceptance_criteria() {
    let mut report = Report { lines: Vec::new() };
    report.run(1, Some(Duration::from_secs(30)), gradient_suite);
    report.run(2, Some(Duration::from_secs(5)), gp_oracle);

    let start = Instant::now();
    let catalog = synthetic_catalog();
    let facts = materialize(&catalog, 20, 0).unwrap();
    let held = materialize(&catalog, 10, 999).unwrap();
    let graph = train::<f64>(&catalog, &facts, &TrainConfig::default()).unwrap().graph;
    let trained = Trained {
        catalog,
        facts,
        held,
        graph,
    };
    let training_time = start.elapsed();
    println!("trained the synthetic fixture in {training_time:.2?}");

    report.run(3, Some(Duration::from_secs(600).saturating_sub(training_time)), || link_prediction(&trained));
    report.run(4, None, || sbm_comparison(&trained));
    report.run(5, None, dispatch_table);
    report.run(6, Some(Duration::from_secs(120)), bo_composition);
    report.run(7, Some(Duration::from_secs(600)), || finetune_efficiency(&trained));
    report.run(8, None, determinism);
    report.run(9, None, unit_examples);

    let failed: Vec<usize> = report.lines.iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
