//! Central finite differences against the analytic gradient of the CRF
//! distillation loss, with a teacher on a coarser tag set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagunify::emissions::{Featurized, Sentence};
use tagunify::model::{Model, ModelKind, ParamId};
use tagunify::objectives::{crf_distill_loss, teacher_targets, DistillConfig};
use tagunify::tagspace::TagHierarchy;

fn randomize(m: &mut Model, s: &Featurized, rng: &mut ChaCha8Rng) {
    let l = m.label_count();
    for t in 0..s.len() {
        for &f in s.at(t) {
            for i in 0..l {
                m.set_param(ParamId::Emission(f, i), rng.gen_range(-1.0..1.0));
            }
        }
    }
    for i in 0..l {
        m.set_param(ParamId::Start(i), rng.gen_range(-1.0..1.0));
        m.set_param(ParamId::Stop(i), rng.gen_range(-1.0..1.0));
        for j in 0..l {
            m.set_param(ParamId::Transition(i, j), rng.gen_range(-1.0..1.0));
        }
    }
}

fn main() -> tagunify::Result<()> {
    let h =
        TagHierarchy::parse("tagset coarse: PER\ntagset fine: DOC\nedge PER -> DOC\nopen PER\n")?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = Featurized::new(&Sentence::new(["Dr", "Kim", "saw", "Lee"])?, 0);

    let mut teacher = Model::new(
        ModelKind::Crf,
        h.tag_set("coarse").unwrap().clone(),
        h.id(),
        0,
    );
    randomize(&mut teacher, &s, &mut rng);
    let mut student = Model::new(ModelKind::Crf, h.unified().clone(), h.id(), 0);
    randomize(&mut student, &s, &mut rng);

    let cfg = DistillConfig {
        temperature: 2.0,
        alpha: 0.5,
    };
    let q = teacher_targets(&teacher, &s, cfg.temperature)?;
    let proj = h.projection("coarse").unwrap();
    let analytic = crf_distill_loss(&student, &s, &q, &proj, &cfg)?;
    println!("loss {:.6}", analytic.loss);

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for p in student.weights().param_ids() {
        let mut plus = student.clone();
        plus.set_param(p, student.param(p) + step);
        let mut minus = student.clone();
        minus.set_param(p, student.param(p) - step);
        let numeric = (crf_distill_loss(&plus, &s, &q, &proj, &cfg)?.loss
            - crf_distill_loss(&minus, &s, &q, &proj, &cfg)?.loss)
            / (2.0 * step);
        let a = analytic.grad.get(p);
        let rel = (numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-8);
        worst = worst.max(rel);
        if matches!(p, ParamId::Transition(0, _)) {
            println!("{p:?}: analytic {a:+.8} numeric {numeric:+.8}");
        }
    }
    println!(
        "{} weights, worst relative error {worst:.2e}",
        student.weights().param_ids().len()
    );
    Ok(())
}
