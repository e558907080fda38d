//! One CRF trained jointly on two corpora that annotate different entity
//! types. Each corpus's `O` tokens may hide the other corpus's types, so the
//! loss marginalizes over every unified labeling consistent with them.

use tagunify::corpus::{generate_synthetic, selective_retag, GeneratorSpec};
use tagunify::tagspace::TagHierarchy;
use tagunify::trainer::{evaluate_checkpoint, DevSet, TrainConfig};
use tagunify::unify::train_marginal_crf;

fn main() -> tagunify::Result<()> {
    env_logger::init();
    let spec = GeneratorSpec {
        types: vec!["PER".into(), "LOC".into(), "ORG".into()],
        trigger_prob: 0.5,
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

    let h = TagHierarchy::parse("tagset people: PER\ntagset places: LOC,ORG\n")?;
    let people = selective_retag(&corpus(1, 400)?, &["PER"])?.with_tag_set_id("people")?;
    let places = selective_retag(&corpus(2, 400)?, &["LOC", "ORG"])?.with_tag_set_id("places")?;

    // gold over all three types, relabeled into the unified order
    let test = corpus(3, 300)?;
    let test = DevSet::new(test.tokens(), test.bio_labels())?;

    let cfg = TrainConfig {
        learning_rate: 0.5,
        max_epochs: 10,
        ..Default::default()
    };
    let (model, report) = train_marginal_crf(&[people, places], &h, None, &cfg)?;
    println!(
        "trained {} epochs, final loss {:.4}",
        report.epochs.len(),
        report.epochs.last().unwrap().loss
    );
    let r = evaluate_checkpoint(&model, &test)?;
    print!("{}", r.table());
    Ok(())
}
