use std::sync::OnceLock;

use rsg_core::catalog::{materialize, EnvInstance, GraphFacts, SkillCatalog};
use rsg_core::composition::{register_new_skill, NewSkill};
use rsg_core::embedding::{train, TrainConfig, TrainedGraph};
use rsg_core::eval::{instance_query_top1, ranking_auc};
use rsg_core::fixtures::{full_tasks, synthetic_catalog};
use rsg_core::inference::{infer, score_matrix};
use rsg_core::toysim::{GeneratorSpec, SkillGenerator};
use rsg_core::Error;

struct Fixture {
    catalog: SkillCatalog,
    facts: GraphFacts,
    graph: TrainedGraph<f64>,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let catalog = synthetic_catalog();
        let facts = materialize(&catalog, 20, 0).unwrap();
        let graph = train::<f64>(&catalog, &facts, &TrainConfig::default()).unwrap().graph;
        Fixture { catalog, facts, graph }
    })
}

#[test]
fn held_out_ranking_auc() {
    let f = fixture();
    let held = materialize(&f.catalog, 10, 999).unwrap();
    let auc = ranking_auc(&f.graph, &held, 4, 1).unwrap();
    assert!(auc >= 0.95, "auc {auc}");
}

#[test]
fn training_pairs_mostly_rank_their_skill_first() {
    let f = fixture();
    let rate = instance_query_top1(&f.graph, &f.facts).unwrap();
    assert_eq!(rate.queries, 96 * 20);
    assert!(rate.rate() >= 0.85, "{rate:?}");
}

#[test]
fn score_matrix_has_one_row_per_class() {
    let f = fixture();
    let envs: Vec<EnvInstance> = f.catalog.env_classes.iter().map(|c| c.midpoint()).collect();
    let task = &f.facts.task_instances[0];
    let rows = score_matrix(&f.graph, &envs, std::slice::from_ref(task)).unwrap();
    assert_eq!(rows.len(), 12);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.env_index, i);
        assert_eq!(row.scores, infer(&f.graph, &envs[i], task));
    }
    let one = score_matrix(&f.graph, &envs[..1], std::slice::from_ref(task)).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].scores, infer(&f.graph, &envs[0], task));
}

fn gallop_skill() -> NewSkill {
    let gallop = full_tasks().into_iter().find(|(n, _)| *n == "Gallop").unwrap().1;
    NewSkill {
        id: "gallop@meadow".into(),
        name: "Gallop_Meadow".into(),
        task_name: "Gallop".into(),
        env: EnvInstance::new("Meadow", 0.45, 1.0, 0.02),
        generator: GeneratorSpec::Primitive(gallop),
    }
}

#[test]
fn registered_skill_ranks_first_in_its_own_context() {
    let f = fixture();
    let cfg = TrainConfig {
        epochs: 20,
        ..Default::default()
    };
    let reg = register_new_skill(&f.graph, &f.catalog, &f.facts, gallop_skill(), 20, 0, &cfg).unwrap();
    assert_eq!(reg.catalog.skills.len(), 97);
    assert_eq!(reg.graph.num_skills(), 97);
    let k = reg.facts.skill_ids.len() - 1;
    let env = &reg.facts.env_instances[reg.facts.env_owner.iter().position(|&o| o == k).unwrap()];
    let task = &reg.facts.task_instances[reg.facts.task_owner.iter().position(|&o| o == k).unwrap()];
    let ranked = infer(&reg.graph, env, task);
    assert_eq!(ranked[0].skill_id, "gallop@meadow", "{:?}", &ranked[..3]);
}

#[test]
fn zero_epoch_registration_keeps_existing_parameters() {
    let f = fixture();
    let cfg = TrainConfig {
        epochs: 0,
        ..Default::default()
    };
    let reg = register_new_skill(&f.graph, &f.catalog, &f.facts, gallop_skill(), 5, 0, &cfg).unwrap();
    let g = &reg.graph;
    assert_eq!(g.env_encoder, f.graph.env_encoder);
    assert_eq!(g.task_encoder, f.graph.task_encoder);
    assert_eq!(g.env_relation, f.graph.env_relation);
    assert_eq!(g.task_relation, f.graph.task_relation);
    assert_eq!(&g.skill_vectors[..96], &f.graph.skill_vectors[..]);
    assert!(reg.loss_trace.is_empty());
}

#[test]
fn duplicate_registration_is_rejected() {
    let f = fixture();
    let mut skill = gallop_skill();
    skill.id = f.catalog.skills[3].id.clone();
    skill.generator = GeneratorSpec::Primitive(SkillGenerator::gait(0.2, 0.0, 0.0));
    let err = register_new_skill(&f.graph, &f.catalog, &f.facts, skill, 5, 0, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::DuplicateId(_)));
}
