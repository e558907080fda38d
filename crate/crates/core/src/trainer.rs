//! Mini-batch training shared by every objective.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emissions::{score_lattice, Featurized, Sentence};
use crate::error::{Error, Result};
use crate::evalmetrics::{micro_prf, EvalResult};
use crate::lattice::{viterbi, LabelConstraint};
use crate::model::{Gradient, Model};
use crate::objectives::{
    distill_loss, marginal_nll_loss, nll_loss, DistillConfig, LossGrad, SoftTargets,
};
use crate::tagspace::{BioLabel, Projection, TagSet};

/// The candidate mixing weights searched by [`select_alpha`].
pub const ALPHA_GRID: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Inverse-time decay: epoch `e` uses `learning_rate / (1 + lr_decay·e)`.
    pub lr_decay: f64,
    pub max_epochs: usize,
    /// Epochs without a dev-F1 improvement before stopping.
    pub patience: usize,
    pub l2: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Worker threads for gradient evaluation; `None` uses all cores.
    pub workers: Option<usize>,
    /// Line-delimited JSON record per epoch.
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            learning_rate: 0.015,
            lr_decay: 0.05,
            max_epochs: 30,
            patience: 5,
            l2: 1e-6,
            optimizer: Optimizer::Sgd,
            seed: 1,
            workers: None,
            log_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.lr_decay >= 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument(
                "lr_decay and l2 must be >= 0".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        Ok(())
    }

    pub fn epoch_rate(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * epoch as f64)
    }
}

/// Gold signal attached to one training sentence.
#[derive(Clone, Debug)]
pub enum Supervision {
    None,
    Full(Vec<usize>),
    Partial(LabelConstraint),
}

/// One teacher's soft targets for a sentence, with the projection that
/// maps its labels onto the student's.
#[derive(Clone, Debug)]
pub struct TeacherSignal {
    pub targets: SoftTargets,
    pub projection: Arc<Projection>,
}

/// A featurized sentence with everything its loss needs.
#[derive(Clone, Debug)]
pub struct Instance {
    pub features: Featurized,
    pub supervision: Supervision,
    pub teachers: Vec<TeacherSignal>,
}

/// Relative weight of the student and distillation terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mixing {
    pub student: f64,
    pub distill: f64,
}

impl Mixing {
    pub const SUPERVISED: Mixing = Mixing {
        student: 1.0,
        distill: 0.0,
    };
    pub const DISTILL_ONLY: Mixing = Mixing {
        student: 0.0,
        distill: 1.0,
    };

    /// `α` on the student loss and `1 − α` on the distillation losses.
    pub fn blended(alpha: f64) -> Result<Mixing> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0,1], got {alpha}"
            )));
        }
        Ok(Mixing {
            student: alpha,
            distill: 1.0 - alpha,
        })
    }
}

/// Training instances plus how their loss terms are weighted.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub instances: Vec<Instance>,
    pub mixing: Mixing,
    pub distill: DistillConfig,
}

impl TrainingSet {
    pub fn supervised(instances: Vec<Instance>) -> Self {
        TrainingSet {
            instances,
            mixing: Mixing::SUPERVISED,
            distill: DistillConfig::default(),
        }
    }

    /// Loss and gradient of instance `idx` at `m`. Terms with zero weight
    /// are not evaluated, so gold labels are never read when the student
    /// weight is zero.
    pub fn loss_grad(&self, m: &Model, idx: usize) -> Result<LossGrad> {
        let inst = &self.instances[idx];
        let mut out = LossGrad {
            loss: 0.0,
            grad: Gradient::zeros(m.label_count()),
        };
        if self.mixing.student > 0.0 {
            let student = match &inst.supervision {
                Supervision::None => None,
                Supervision::Full(y) => Some(nll_loss(m, &inst.features, y)?),
                Supervision::Partial(c) => Some(marginal_nll_loss(m, &inst.features, c)?),
            };
            if let Some(s) = student {
                out.loss += self.mixing.student * s.loss;
                out.grad.add_scaled(&s.grad, self.mixing.student);
            }
        }
        if self.mixing.distill > 0.0 {
            for t in &inst.teachers {
                let d = distill_loss(m, &inst.features, &t.targets, &t.projection, &self.distill)?;
                out.loss += self.mixing.distill * d.loss;
                out.grad.add_scaled(&d.grad, self.mixing.distill);
            }
        }
        Ok(out)
    }
}

/// Sentences with gold labels over the student's label space.
#[derive(Clone, Debug)]
pub struct DevSet {
    pub sentences: Vec<Sentence>,
    pub gold: Vec<Vec<BioLabel>>,
}

impl DevSet {
    pub fn new(sentences: Vec<Sentence>, gold: Vec<Vec<BioLabel>>) -> Result<Self> {
        if sentences.len() != gold.len() {
            return Err(Error::Dimension(
                "dev sentences and labels differ in count".into(),
            ));
        }
        Ok(DevSet { sentences, gold })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Viterbi decode restricted to valid BIO sequences.
pub fn decode(m: &Model, s: &Featurized) -> Vec<usize> {
    let lat = score_lattice(m, s)
        .with_bio_mask(m.tag_set())
        .expect("model lattice matches its tag set");
    viterbi(&lat).0
}

/// Decodes every sentence, in parallel, in order.
pub fn decode_all(m: &Model, sentences: &[Sentence]) -> Vec<Vec<usize>> {
    sentences
        .par_iter()
        .map(|s| decode(m, &Featurized::new(s, m.hash_seed())))
        .collect()
}

pub fn to_bio(tag_set: &TagSet, labels: &[Vec<usize>]) -> Vec<Vec<BioLabel>> {
    labels
        .iter()
        .map(|r| r.iter().map(|&y| tag_set.label(y)).collect())
        .collect()
}

/// Micro P/R/F1 of the model's BIO-masked Viterbi decodes.
pub fn evaluate_checkpoint(m: &Model, dev: &DevSet) -> Result<EvalResult> {
    let pred = to_bio(m.tag_set(), &decode_all(m, &dev.sentences));
    micro_prf(&dev.gold, &pred)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&EvalResult> for DevScore {
    fn from(r: &EvalResult) -> Self {
        DevScore {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean instance loss over the epoch.
    pub loss: f64,
    pub dev: Option<DevScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch of the returned checkpoint; 0 is the initial model.
    pub best_epoch: usize,
    pub best_dev: Option<DevScore>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn best_f1(&self) -> f64 {
        self.best_dev.map_or(0.0, |d| d.f1)
    }
}

struct AdamState {
    m: Gradient,
    v: Gradient,
    steps: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(
    w: &mut Model,
    g: &Gradient,
    rate: f64,
    cfg: &TrainConfig,
    adam: Option<&mut AdamState>,
) {
    let l2 = cfg.l2;
    let weights = w.weights_mut();
    match adam {
        None => {
            for (f, row) in g.emission_rows() {
                let wr = weights.emission_row_mut(f);
                for (w, g) in wr.iter_mut().zip(row) {
                    *w -= rate * (g + l2 * *w);
                }
            }
            let dense = |w: &mut [f64], g: &[f64]| {
                for (w, g) in w.iter_mut().zip(g) {
                    *w -= rate * (g + l2 * *w);
                }
            };
            dense(weights.transition_mut(), g.transition());
            dense(weights.start_mut(), g.start());
            dense(weights.stop_mut(), g.stop());
        }
        Some(state) => {
            state.steps += 1;
            let c1 = 1.0 - BETA1.powi(state.steps);
            let c2 = 1.0 - BETA2.powi(state.steps);
            let step = |w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..w.len() {
                    let gi = g[i] + l2 * w[i];
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                    w[i] -= rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            };
            for (f, row) in g.emission_rows() {
                step(
                    weights.emission_row_mut(f),
                    row,
                    state.m.emission_row_mut(f),
                    state.v.emission_row_mut(f),
                );
            }
            step(
                weights.transition_mut(),
                g.transition(),
                state.m.transition_mut(),
                state.v.transition_mut(),
            );
            step(
                weights.start_mut(),
                g.start(),
                state.m.start_mut(),
                state.v.start_mut(),
            );
            step(
                weights.stop_mut(),
                g.stop(),
                state.m.stop_mut(),
                state.v.stop_mut(),
            );
        }
    }
}

/// Batch-mean loss and gradient. Per-instance work fans out over the pool;
/// the reduction runs in instance order so results do not depend on the
/// number of threads.
pub fn batch_gradient(m: &Model, data: &TrainingSet, batch: &[usize]) -> Result<LossGrad> {
    let parts: Vec<Result<LossGrad>> = batch.par_iter().map(|&i| data.loss_grad(m, i)).collect();
    let mut total = LossGrad {
        loss: 0.0,
        grad: Gradient::zeros(m.label_count()),
    };
    for p in parts {
        let p = p?;
        total.loss += p.loss;
        total.grad.add_scaled(&p.grad, 1.0);
    }
    let scale = 1.0 / batch.len() as f64;
    total.loss *= scale;
    total.grad.scale(scale);
    Ok(total)
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Trains from `init` and returns the checkpoint with the best dev F1 (the
/// last epoch when no dev set is given).
pub fn train(
    init: Model,
    data: &TrainingSet,
    dev: Option<&DevSet>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    data.distill.validate()?;
    if data.instances.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    with_pool(cfg.workers, || train_inner(init, data, dev, cfg))?
}

fn train_inner(
    init: Model,
    data: &TrainingSet,
    dev: Option<&DevSet>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    let started = Instant::now();
    let mut log = match &cfg.log_path {
        Some(p) => Some(BufWriter::new(
            File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.instances.len()).collect();
    let mut adam = (cfg.optimizer == Optimizer::Adam).then(|| AdamState {
        m: Gradient::zeros(init.label_count()),
        v: Gradient::zeros(init.label_count()),
        steps: 0,
    });

    let mut best_dev = match dev {
        Some(d) => Some(DevScore::from(&evaluate_checkpoint(&init, d)?)),
        None => None,
    };
    let mut best = init.clone();
    let mut best_epoch = 0;
    let mut model = init;
    let mut epochs = Vec::new();
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let rate = cfg.epoch_rate(epoch - 1);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let lg = batch_gradient(&model, data, batch)?;
            if !lg.loss.is_finite() || !lg.grad.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    detail: format!(
                        "batch starting at instance {} gave loss {}",
                        batch[0], lg.loss
                    ),
                });
            }
            loss_sum += lg.loss * batch.len() as f64;
            apply_update(&mut model, &lg.grad, rate, cfg, adam.as_mut());
        }
        if !model.weights().is_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: "weights diverged".into(),
            });
        }
        let score = match dev {
            Some(d) => Some(DevScore::from(&evaluate_checkpoint(&model, d)?)),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            learning_rate: rate,
            loss: loss_sum / data.instances.len() as f64,
            dev: score,
        };
        log::info!(
            "epoch {epoch}: loss {:.6}{}",
            record.loss,
            score
                .map(|s| format!(" dev f1 {:.4}", s.f1))
                .unwrap_or_default()
        );
        if let Some(w) = log.as_mut() {
            let line = serde_json::to_string(&record)?;
            writeln!(w, "{line}")
                .map_err(|e| Error::io(cfg.log_path.as_ref().expect("open"), e))?;
        }
        epochs.push(record);

        match (score, best_dev) {
            (Some(s), Some(b)) if s.f1 > b.f1 => {
                best_dev = Some(s);
                best = model.clone();
                best_epoch = epoch;
                stale = 0;
            }
            (Some(_), _) => {
                stale += 1;
                if stale >= cfg.patience.max(1) {
                    break;
                }
            }
            (None, _) => {
                best = model.clone();
                best_epoch = epoch;
            }
        }
    }
    if let Some(mut w) = log {
        w.flush()
            .map_err(|e| Error::io(cfg.log_path.as_ref().expect("open"), e))?;
    }
    Ok((
        best,
        TrainReport {
            epochs,
            best_epoch,
            best_dev,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    ))
}

/// Runs `fit` for every value in `grid` and keeps the result with the
/// highest best-dev F1; ties go to the earlier value.
pub fn select_alpha<F>(grid: &[f64], mut fit: F) -> Result<(f64, Model, TrainReport)>
where
    F: FnMut(f64) -> Result<(Model, TrainReport)>,
{
    let mut best: Option<(f64, Model, TrainReport)> = None;
    for &alpha in grid {
        let (m, r) = fit(alpha)?;
        log::info!("alpha {alpha}: dev f1 {:.4}", r.best_f1());
        if best.as_ref().is_none_or(|b| r.best_f1() > b.2.best_f1()) {
            best = Some((alpha, m, r));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("alpha grid is empty".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, split, GeneratorSpec};
    use crate::model::{ModelKind, ParamId};
    use rand::Rng;

    fn supervised_set(c: &crate::corpus::AnnotatedCorpus, seed: u64) -> TrainingSet {
        TrainingSet::supervised(
            c.sentences()
                .iter()
                .map(|s| Instance {
                    features: Featurized::new(&s.sentence, seed),
                    supervision: Supervision::Full(s.labels.clone()),
                    teachers: Vec::new(),
                })
                .collect(),
        )
    }

    fn separable() -> (crate::corpus::AnnotatedCorpus, DevSet) {
        let spec = GeneratorSpec {
            types: vec!["A".into(), "B".into()],
            entity_vocab: 20,
            background_vocab: 50,
            ..Default::default()
        };
        let c = generate_synthetic(&spec, 200).unwrap();
        let (train, dev, _) = split(&c, [0.75, 0.25, 0.0], 4).unwrap();
        let dev = DevSet::new(dev.tokens(), dev.bio_labels()).unwrap();
        (train, dev)
    }

    #[test]
    fn learns_separable_data() {
        let (train, dev) = separable();
        let data = supervised_set(&train, 5);
        let init = Model::new(ModelKind::Crf, train.tag_set().clone(), "h", 5);
        let cfg = TrainConfig {
            max_epochs: 8,
            patience: 8,
            learning_rate: 1.0,
            ..Default::default()
        };
        let (m, report) = train_fn(init, &data, Some(&dev), &cfg);
        let losses: Vec<f64> = report.epochs.iter().take(5).map(|e| e.loss).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
        assert!(report.best_f1() >= 0.99, "{}", report.best_f1());
        assert_eq!(evaluate_checkpoint(&m, &dev).unwrap().f1, report.best_f1());
        let best = report.best_f1();
        assert!(report
            .epochs
            .iter()
            .filter_map(|e| e.dev)
            .all(|d| d.f1 <= best));
    }

    fn train_fn(
        init: Model,
        data: &TrainingSet,
        dev: Option<&DevSet>,
        cfg: &TrainConfig,
    ) -> (Model, TrainReport) {
        train(init, data, dev, cfg).unwrap()
    }

    #[test]
    fn zero_rate_is_fixed_point() {
        let (train_c, _) = separable();
        let data = supervised_set(&train_c, 5);
        let mut init = Model::new(ModelKind::Crf, train_c.tag_set().clone(), "h", 5);
        init.set_param(ParamId::Transition(0, 1), 0.3);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 3,
            ..Default::default()
        };
        let (m, _) = train_fn(init.clone(), &data, None, &cfg);
        assert_eq!(m.weights().max_abs_diff(init.weights()), 0.0);
    }

    #[test]
    fn deterministic_across_threads() {
        let (train_c, _) = separable();
        let data = supervised_set(&train_c, 5);
        let init = Model::new(ModelKind::Crf, train_c.tag_set().clone(), "h", 5);
        let run = |workers| {
            let cfg = TrainConfig {
                max_epochs: 2,
                workers: Some(workers),
                ..Default::default()
            };
            train_fn(init.clone(), &data, None, &cfg).0.to_text()
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(3));
    }

    #[test]
    fn small_step_decreases_instance_loss() {
        let (train_c, _) = separable();
        let data = supervised_set(&train_c, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = Model::new(ModelKind::Crf, train_c.tag_set().clone(), "h", 5);
        for i in 0..5 {
            for j in 0..5 {
                m.set_param(ParamId::Transition(i, j), rng.gen_range(-1.0..1.0));
            }
        }
        let cfg = TrainConfig {
            l2: 0.0,
            ..Default::default()
        };
        let mut decreases = 0;
        let mut total_change = 0.0;
        let n = 40;
        for idx in 0..n {
            let before = data.loss_grad(&m, idx).unwrap();
            let mut stepped = m.clone();
            apply_update(&mut stepped, &before.grad, 1e-3, &cfg, None);
            let after = data.loss_grad(&stepped, idx).unwrap().loss;
            if after < before.loss {
                decreases += 1;
            }
            total_change += after - before.loss;
        }
        assert!(decreases as f64 >= 0.95 * n as f64);
        assert!(total_change < 0.0);
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let init = Model::new(ModelKind::Crf, TagSet::new("k", ["A"]).unwrap(), "h", 5);
        let empty = TrainingSet::supervised(Vec::new());
        assert!(train(init.clone(), &empty, None, &TrainConfig::default()).is_err());
        let (train_c, _) = separable();
        let data = supervised_set(&train_c, 5);
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(train(init, &data, None, &bad).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (train_c, _) = separable();
        let data = supervised_set(&train_c, 5);
        let init = Model::new(ModelKind::Crf, train_c.tag_set().clone(), "h", 5);
        let cfg = TrainConfig {
            learning_rate: 1e300,
            max_epochs: 3,
            ..Default::default()
        };
        assert!(matches!(
            train(init, &data, None, &cfg),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn adam_and_log_file() {
        let (train_c, dev) = separable();
        let data = supervised_set(&train_c, 5);
        let init = Model::new(ModelKind::Crf, train_c.tag_set().clone(), "h", 5);
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 0.1,
            max_epochs: 3,
            log_path: Some(dir.path().join("log.jsonl")),
            ..Default::default()
        };
        let (_, report) = train_fn(init, &data, Some(&dev), &cfg);
        assert!(report.best_f1() > 0.8, "{:?}", report.epochs);
        let text = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
        let records: Vec<EpochRecord> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records, report.epochs);
    }

    #[test]
    fn alpha_selection_prefers_best_then_first() {
        let score = |f1: f64| TrainReport {
            epochs: Vec::new(),
            best_epoch: 0,
            best_dev: Some(DevScore {
                precision: f1,
                recall: f1,
                f1,
            }),
            wall_clock_secs: 0.0,
        };
        let m = Model::new(ModelKind::Crf, TagSet::new("k", ["A"]).unwrap(), "h", 5);
        let (a, _, _) = select_alpha(&ALPHA_GRID, |a| {
            Ok((m.clone(), score(if a == 0.6 { 0.9 } else { 0.5 })))
        })
        .unwrap();
        assert_eq!(a, 0.6);
        let (a, _, _) = select_alpha(&ALPHA_GRID, |_| Ok((m.clone(), score(0.5)))).unwrap();
        assert_eq!(a, 0.2);
        assert!(select_alpha(&[], |_| Ok((m.clone(), score(0.5)))).is_err());
    }
}
