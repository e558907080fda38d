//! Two teachers, each knowing half of the entity types, distilled into one
//! student over unlabeled text, next to the token-level merge of their
//! decodes.
//!
//! Set `TAGUNIFY_CACHE_DIR` to reuse teacher marginals between runs.

use std::sync::Arc;

use tagunify::corpus::{generate_synthetic, selective_retag, GeneratorSpec};
use tagunify::evalmetrics::micro_prf;
use tagunify::model::ModelKind;
use tagunify::tagspace::TagHierarchy;
use tagunify::trainer::{evaluate_checkpoint, to_bio, DevSet, TrainConfig};
use tagunify::unify::{
    cache_dir_from_env, distill, merge_corpus, train_supervised, Mode, Scenario, TeacherHandle,
};

fn main() -> tagunify::Result<()> {
    env_logger::init();
    let spec = GeneratorSpec {
        types: vec!["PER".into(), "ORG".into(), "LOC".into(), "MISC".into()],
        trigger_prob: 0.3,
        confusable: vec![
            vec!["PER".into(), "ORG".into()],
            vec!["LOC".into(), "MISC".into()],
        ],
        shared_prob: 0.6,
        ..Default::default()
    };
    let corpus = |seed: u64, n: usize| {
        generate_synthetic(
            &GeneratorSpec {
                seed,
                ..spec.clone()
            },
            n,
        )
    };
    let h = Arc::new(TagHierarchy::parse(
        "tagset a: PER,LOC\ntagset b: ORG,MISC\n",
    )?);

    let cfg = TrainConfig {
        learning_rate: 0.5,
        max_epochs: 8,
        ..Default::default()
    };
    let view_a = selective_retag(&corpus(1, 500)?, &["PER", "LOC"])?.with_tag_set_id("a")?;
    let view_b = selective_retag(&corpus(2, 500)?, &["ORG", "MISC"])?.with_tag_set_id("b")?;
    let (ta, _) = train_supervised(&view_a, ModelKind::Crf, None, &cfg)?;
    let (tb, _) = train_supervised(&view_b, ModelKind::Crf, None, &cfg)?;
    let teachers = vec![TeacherHandle::new(ta, &h)?, TeacherHandle::new(tb, &h)?];

    let test = corpus(4, 400)?;
    let gold = test.bio_labels();
    let unified = h.unified();

    let merged = merge_corpus(&teachers, &test.tokens())?;
    let merge_f1 = micro_prf(&gold, &to_bio(unified, &merged))?.f1;

    let mut scenario = Scenario::new(Mode::Mardi, Arc::clone(&h), teachers);
    scenario.unlabeled = corpus(5, 1000)?.tokens();
    scenario.distill.temperature = 1.0;
    scenario.cache_dir = cache_dir_from_env();
    let (student, _) = distill(&scenario, None, &cfg)?;
    // test gold was generated with types in generator order; score by name
    let student_f1 = evaluate_checkpoint(&student, &DevSet::new(test.tokens(), gold)?)?.f1;

    println!("merge of teacher decodes   F1 {:.2}", 100.0 * merge_f1);
    println!("distilled student          F1 {:.2}", 100.0 * student_f1);
    Ok(())
}
