//! Multi-teacher scenarios: marginal distillation with and without partial
//! annotations, progressive adaptation, and the post-processing merge
//! baseline.

use std::collections::BTreeMap;
use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::corpus::{read_conll, read_tokens, AnnotatedCorpus};
use crate::emissions::{score_lattice, Featurized, Sentence, DEFAULT_HASH_SEED};
use crate::error::{Error, Result};
use crate::lattice::{self, MarginalTable};
use crate::model::{Model, ModelKind};
use crate::objectives::{
    model_marginals, partial_annotation, teacher_targets, DistillConfig, SoftTargets,
};
use crate::tagspace::{Projection, TagHierarchy, TagSet};
use crate::trainer::{
    decode, select_alpha, train, DevSet, Instance, Mixing, Supervision, TeacherSignal, TrainConfig,
    TrainReport, TrainingSet, ALPHA_GRID,
};

/// Environment variable naming the teacher-marginal cache directory.
pub const CACHE_ENV: &str = "TAGUNIFY_CACHE_DIR";

pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// A frozen teacher with its projection onto the unified labels.
#[derive(Clone, Debug)]
pub struct TeacherHandle {
    model: Arc<Model>,
    projection: Arc<Projection>,
}

impl TeacherHandle {
    pub fn new(model: Model, hierarchy: &TagHierarchy) -> Result<Self> {
        Self::shared(Arc::new(model), hierarchy)
    }

    pub fn shared(model: Arc<Model>, hierarchy: &TagHierarchy) -> Result<Self> {
        let projection = hierarchy.projection_for(model.tag_set())?;
        projection.validate()?;
        Ok(TeacherHandle { model, projection })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn tag_set(&self) -> &TagSet {
        self.model.tag_set()
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn projection(&self) -> &Arc<Projection> {
        &self.projection
    }

    /// Hash of the serialized model.
    pub fn fingerprint(&self) -> u64 {
        let mut h = XxHash64::with_seed(0);
        h.write(self.model.to_text().as_bytes());
        h.finish()
    }
}

fn corpus_fingerprint(sentences: &[Sentence]) -> u64 {
    let mut h = XxHash64::with_seed(0);
    for s in sentences {
        for tok in s.tokens() {
            h.write(tok.as_bytes());
            h.write_u8(0x1f);
        }
        h.write_u8(0x1e);
    }
    h.finish()
}

/// Teacher soft targets for every sentence at temperature `tau`, read from
/// or written to `cache_dir` when given.
pub fn teacher_marginals(
    teacher: &TeacherHandle,
    sentences: &[Sentence],
    tau: f64,
    cache_dir: Option<&Path>,
) -> Result<Vec<SoftTargets>> {
    let path = cache_dir.map(|d| {
        d.join(format!(
            "{:016x}-{:016x}-{:016x}.json",
            teacher.fingerprint(),
            corpus_fingerprint(sentences),
            tau.to_bits()
        ))
    });
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let rows: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)?;
        if rows.len() == sentences.len() {
            log::debug!("teacher marginals from cache {}", p.display());
            return rows
                .into_iter()
                .map(|r| SoftTargets::new(teacher.tag_set().id(), MarginalTable::from_rows(r)?))
                .collect();
        }
        log::warn!("ignoring stale cache entry {}", p.display());
    }
    let m = teacher.model();
    let targets: Vec<SoftTargets> = sentences
        .par_iter()
        .map(|s| teacher_targets(m, &Featurized::new(s, m.hash_seed()), tau))
        .collect::<Result<_>>()?;
    if let Some(p) = path {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let rows: Vec<Vec<Vec<f64>>> = targets
            .iter()
            .map(|t| (0..t.len()).map(|i| t.table().row(i).to_vec()).collect())
            .collect();
        fs::write(&p, serde_json::to_string(&rows)?).map_err(|e| Error::io(&p, e))?;
    }
    Ok(targets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Distillation from teachers over unlabeled text only.
    Mardi,
    /// Distillation plus marginal likelihood on partially labeled data.
    MardiData,
    /// One source teacher plus labeled target data.
    Progressive,
    /// Per-token merge of teacher decodes; no training.
    Postprocess,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mardi" => Ok(Mode::Mardi),
            "mardi-data" => Ok(Mode::MardiData),
            "progressive" => Ok(Mode::Progressive),
            "postprocess" => Ok(Mode::Postprocess),
            other => Err(Error::Scenario(format!("unknown mode `{other}`"))),
        }
    }
}

/// A fully loaded distillation scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub mode: Mode,
    pub hierarchy: Arc<TagHierarchy>,
    pub teachers: Vec<TeacherHandle>,
    /// Text the teachers are distilled over.
    pub unlabeled: Vec<Sentence>,
    /// Extra source-domain text for progressive adaptation.
    pub source_unlabeled: Vec<Sentence>,
    /// Partially annotated corpora, each under one declared tag set.
    pub labeled: Vec<AnnotatedCorpus>,
    pub distill: DistillConfig,
    /// Search α over the fixed grid instead of using `distill.alpha`.
    pub select_alpha: bool,
    pub student_kind: ModelKind,
    pub hash_seed: u64,
    /// Starting point for the student; zeros when absent.
    pub init: Option<Model>,
    pub cache_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn new(mode: Mode, hierarchy: Arc<TagHierarchy>, teachers: Vec<TeacherHandle>) -> Self {
        Scenario {
            mode,
            hierarchy,
            teachers,
            unlabeled: Vec::new(),
            source_unlabeled: Vec::new(),
            labeled: Vec::new(),
            distill: DistillConfig::default(),
            select_alpha: false,
            student_kind: ModelKind::Crf,
            hash_seed: DEFAULT_HASH_SEED,
            init: None,
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Scenario(msg.into()))
            }
        };
        self.distill.validate()?;
        match self.mode {
            Mode::Mardi => {
                need(
                    !self.teachers.is_empty(),
                    "mardi needs at least one teacher",
                )?;
                need(!self.unlabeled.is_empty(), "mardi needs unlabeled text")?;
            }
            Mode::MardiData => {
                need(
                    !self.teachers.is_empty(),
                    "mardi-data needs at least one teacher",
                )?;
                need(!self.labeled.is_empty(), "mardi-data needs labeled data")?;
            }
            Mode::Progressive => {
                need(
                    self.teachers.len() == 1,
                    "progressive needs exactly one source teacher",
                )?;
                need(
                    !self.labeled.is_empty(),
                    "progressive needs labeled target data",
                )?;
            }
            Mode::Postprocess => need(
                !self.teachers.is_empty(),
                "postprocess needs at least one teacher",
            )?,
        }
        for t in &self.teachers {
            self.hierarchy.projection_for(t.tag_set())?;
        }
        if let Some(m) = &self.init {
            if !m.tag_set().same_as(self.hierarchy.unified()) || m.kind() != self.student_kind {
                return Err(Error::Scenario(
                    "initial student does not match the unified tag set".into(),
                ));
            }
        }
        Ok(())
    }

    fn initial_student(&self) -> Model {
        self.init.clone().unwrap_or_else(|| {
            Model::new(
                self.student_kind,
                self.hierarchy.unified().clone(),
                self.hierarchy.id(),
                self.hash_seed,
            )
        })
    }

    /// Teacher signals for `sentences`, one list per sentence.
    fn teacher_signals(&self, sentences: &[Sentence]) -> Result<Vec<Vec<TeacherSignal>>> {
        let mut per_sentence: Vec<Vec<TeacherSignal>> = vec![Vec::new(); sentences.len()];
        for t in &self.teachers {
            let targets = teacher_marginals(
                t,
                sentences,
                self.distill.temperature,
                self.cache_dir.as_deref(),
            )?;
            for (slot, q) in per_sentence.iter_mut().zip(targets) {
                slot.push(TeacherSignal {
                    targets: q,
                    projection: Arc::clone(t.projection()),
                });
            }
        }
        Ok(per_sentence)
    }

    /// Instances for every sentence: labeled data first, then the
    /// unlabeled corpora. With `read_labels` false no gold label is read.
    fn instances(&self, read_labels: bool) -> Result<Vec<Instance>> {
        let seed = self.hash_seed;
        let mut out = Vec::new();
        for corpus in &self.labeled {
            let proj = self.hierarchy.projection_for(corpus.tag_set())?;
            let tokens = corpus.tokens();
            let signals = self.teacher_signals(&tokens)?;
            for (s, teachers) in corpus.sentences().iter().zip(signals) {
                let supervision = if read_labels {
                    Supervision::Partial(partial_annotation(&s.labels, &proj)?)
                } else {
                    Supervision::None
                };
                out.push(Instance {
                    features: Featurized::new(&s.sentence, seed),
                    supervision,
                    teachers,
                });
            }
        }
        for text in [&self.unlabeled, &self.source_unlabeled] {
            let signals = self.teacher_signals(text)?;
            for (s, teachers) in text.iter().zip(signals) {
                out.push(Instance {
                    features: Featurized::new(s, seed),
                    supervision: Supervision::None,
                    teachers,
                });
            }
        }
        Ok(out)
    }
}

/// Trains the scenario's student. For the merge baseline use
/// [`postprocess_merge`] instead.
pub fn distill(
    scenario: &Scenario,
    dev: Option<&DevSet>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    scenario.validate()?;
    if scenario.mode == Mode::Postprocess {
        return Err(Error::Scenario(
            "postprocess mode has no student to train; use merge".into(),
        ));
    }
    let init = scenario.initial_student();
    if scenario.mode == Mode::Mardi {
        let data = TrainingSet {
            instances: scenario.instances(false)?,
            mixing: Mixing::DISTILL_ONLY,
            distill: scenario.distill,
        };
        return train(init, &data, dev, cfg);
    }
    let build = |alpha: f64| -> Result<TrainingSet> {
        Ok(TrainingSet {
            instances: scenario.instances(alpha > 0.0)?,
            mixing: Mixing::blended(alpha)?,
            distill: scenario.distill,
        })
    };
    if scenario.select_alpha {
        let mut base = build(ALPHA_GRID[0])?;
        let (alpha, m, r) = select_alpha(&ALPHA_GRID, |alpha| {
            base.mixing = Mixing::blended(alpha)?;
            train(init.clone(), &base, dev, cfg)
        })?;
        log::info!("selected alpha {alpha}");
        return Ok((m, r));
    }
    train(init, &build(scenario.distill.alpha)?, dev, cfg)
}

/// Decode with the BIO mask plus node marginals of the same lattice.
pub fn decode_with_marginals(m: &Model, s: &Featurized) -> (Vec<usize>, MarginalTable) {
    match m.kind() {
        ModelKind::Crf => {
            let lat = score_lattice(m, s)
                .with_bio_mask(m.tag_set())
                .expect("model lattice matches its tag set");
            (lattice::viterbi(&lat).0, lattice::node_marginals(&lat))
        }
        ModelKind::Local => (decode(m, s), model_marginals(m, s, 1.0)),
    }
}

/// Turns every `I-X` that does not continue an `X` span into `B-X`. Works
/// on label indices of any tag set.
pub fn repair_bio(labels: &mut [usize]) {
    for t in 0..labels.len() {
        let y = labels[t];
        let inside = y != 0 && y % 2 == 0;
        if inside && (t == 0 || labels[t - 1] == 0 || (labels[t - 1] + 1) / 2 != y / 2) {
            labels[t] = y - 1;
        }
    }
}

/// Post-processing baseline: per token, the non-`O` teacher label with the
/// highest marginal wins (earlier teachers win ties) and is mapped to its
/// representative unified label; all-`O` tokens stay `O`. Orphan `I-X`
/// are repaired afterwards.
pub fn postprocess_merge(teachers: &[TeacherHandle], s: &Sentence) -> Result<Vec<usize>> {
    let first = teachers
        .first()
        .ok_or_else(|| Error::Scenario("merge needs at least one teacher".into()))?;
    let unified = first.projection().unified_label_count();
    if teachers
        .iter()
        .any(|t| t.projection().unified_label_count() != unified)
    {
        return Err(Error::Scenario(
            "teachers project onto different label spaces".into(),
        ));
    }
    let decodes: Vec<(Vec<usize>, MarginalTable)> = teachers
        .iter()
        .map(|t| decode_with_marginals(t.model(), &Featurized::new(s, t.model().hash_seed())))
        .collect();
    let mut out = vec![0; s.len()];
    for (t, slot) in out.iter_mut().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (teacher, (path, marg)) in teachers.iter().zip(&decodes) {
            let y = path[t];
            if y == 0 {
                continue;
            }
            let p = marg.get(t, y);
            if best.is_none_or(|(bp, _)| p > bp) {
                best = Some((p, teacher.projection().representative(y)));
            }
        }
        if let Some((_, u)) = best {
            *slot = u;
        }
    }
    repair_bio(&mut out);
    Ok(out)
}

/// [`postprocess_merge`] over many sentences, in parallel, in order.
pub fn merge_corpus(teachers: &[TeacherHandle], sentences: &[Sentence]) -> Result<Vec<Vec<usize>>> {
    sentences
        .par_iter()
        .map(|s| postprocess_merge(teachers, s))
        .collect()
}

fn supervised_instances(corpus: &AnnotatedCorpus, seed: u64) -> Vec<Instance> {
    corpus
        .sentences()
        .iter()
        .map(|s| Instance {
            features: Featurized::new(&s.sentence, seed),
            supervision: Supervision::Full(s.labels.clone()),
            teachers: Vec::new(),
        })
        .collect()
}

/// Fully supervised tagger over the corpus's own tag set.
pub fn train_supervised(
    corpus: &AnnotatedCorpus,
    kind: ModelKind,
    dev: Option<&DevSet>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    let hierarchy = TagHierarchy::identity(corpus.tag_set())?;
    let init = Model::new(
        kind,
        corpus.tag_set().clone(),
        hierarchy.id(),
        DEFAULT_HASH_SEED,
    );
    train(
        init,
        &TrainingSet::supervised(supervised_instances(corpus, DEFAULT_HASH_SEED)),
        dev,
        cfg,
    )
}

/// Marginal CRF over the unified labels, trained jointly on corpora
/// annotated under different tag sets of `hierarchy`.
pub fn train_marginal_crf(
    corpora: &[AnnotatedCorpus],
    hierarchy: &TagHierarchy,
    dev: Option<&DevSet>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    if corpora.is_empty() {
        return Err(Error::InvalidArgument(
            "marginal training needs at least one corpus".into(),
        ));
    }
    let mut instances = Vec::new();
    for c in corpora {
        let proj = hierarchy.projection_for(c.tag_set())?;
        for s in c.sentences() {
            instances.push(Instance {
                features: Featurized::new(&s.sentence, DEFAULT_HASH_SEED),
                supervision: Supervision::Partial(partial_annotation(&s.labels, &proj)?),
                teachers: Vec::new(),
            });
        }
    }
    let init = Model::new(
        ModelKind::Crf,
        hierarchy.unified().clone(),
        hierarchy.id(),
        DEFAULT_HASH_SEED,
    );
    train(init, &TrainingSet::supervised(instances), dev, cfg)
}

/// On-disk scenario description. Relative paths resolve against the
/// directory holding the file.
///
/// ```toml
/// mode = "mardi"
/// hierarchy = "hierarchy.txt"
/// teachers = ["a.model", "b.model"]
/// unlabeled = ["raw.txt"]
/// dev = "dev.conll"
///
/// [distill]
/// temperature = 1.0
/// alpha = 0.5
///
/// [train]
/// learning_rate = 0.5
/// max_epochs = 20
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub hierarchy: PathBuf,
    #[serde(default)]
    pub teachers: Vec<PathBuf>,
    #[serde(default)]
    pub unlabeled: Vec<PathBuf>,
    #[serde(default)]
    pub source_unlabeled: Vec<PathBuf>,
    /// Tag-set id to CoNLL path.
    #[serde(default)]
    pub labeled: BTreeMap<String, PathBuf>,
    /// Dev corpus over the unified labels.
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default)]
    pub select_alpha: bool,
    #[serde(default = "default_kind")]
    pub student: ModelKind,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_kind() -> ModelKind {
    ModelKind::Crf
}

impl ScenarioConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ScenarioConfig = toml::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve(&base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.hierarchy);
        self.teachers.iter_mut().for_each(fix);
        self.unlabeled.iter_mut().for_each(fix);
        self.source_unlabeled.iter_mut().for_each(fix);
        self.labeled.values_mut().for_each(fix);
        if let Some(d) = self.dev.as_mut() {
            fix(d);
        }
        if let Some(l) = self.train.log_path.as_mut() {
            fix(l);
        }
    }

    /// Loads every referenced file.
    pub fn load(&self) -> Result<(Scenario, Option<DevSet>)> {
        let hierarchy = Arc::new(TagHierarchy::from_file(&self.hierarchy)?);
        let teachers = self
            .teachers
            .iter()
            .map(|p| TeacherHandle::new(Model::load(p)?, &hierarchy))
            .collect::<Result<Vec<_>>>()?;
        let mut s = Scenario::new(self.mode, Arc::clone(&hierarchy), teachers);
        let read_all = |paths: &[PathBuf]| -> Result<Vec<Sentence>> {
            let mut out = Vec::new();
            for p in paths {
                out.extend(read_tokens(p)?);
            }
            Ok(out)
        };
        s.unlabeled = read_all(&self.unlabeled)?;
        s.source_unlabeled = read_all(&self.source_unlabeled)?;
        for (id, path) in &self.labeled {
            let k = hierarchy.tag_set(id).ok_or_else(|| {
                Error::Scenario(format!("tag set `{id}` is not declared in the hierarchy"))
            })?;
            s.labeled.push(read_conll(path, k)?);
        }
        s.distill = self.distill;
        s.select_alpha = self.select_alpha;
        s.student_kind = self.student;
        s.cache_dir = cache_dir_from_env();
        let dev = match &self.dev {
            Some(p) => {
                let c = read_conll(p, hierarchy.unified())?;
                Some(DevSet::new(c.tokens(), c.bio_labels())?)
            }
            None => None,
        };
        s.validate()?;
        Ok((s, dev))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamId;
    use crate::tagspace::BioLabel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sentence(words: &[&str]) -> Sentence {
        Sentence::new(words.iter().copied()).unwrap()
    }

    /// A CRF whose decode is driven by the bias feature of each word.
    fn word_model(k: &TagSet, rules: &[(&str, &str, f64)]) -> Model {
        let mut m = Model::new(ModelKind::Crf, k.clone(), "h", DEFAULT_HASH_SEED);
        for (word, label, score) in rules {
            let f = crate::emissions::hash_feature(
                &format!("word={}", word.to_lowercase()),
                DEFAULT_HASH_SEED,
            );
            let y = k.parse_label(label).unwrap();
            m.set_param(ParamId::Emission(f, y), *score);
        }
        m
    }

    fn two_teachers() -> (TagHierarchy, TeacherHandle, TeacherHandle) {
        let h = TagHierarchy::parse("tagset g: GPE\ntagset d: DATE\n").unwrap();
        let a = word_model(
            h.tag_set("g").unwrap(),
            &[("paris", "B-GPE", 5.0), ("may", "B-GPE", 2.2)],
        );
        let b = word_model(
            h.tag_set("d").unwrap(),
            &[("may", "B-DATE", 1.0), ("june", "B-DATE", 5.0)],
        );
        let ta = TeacherHandle::new(a, &h).unwrap();
        let tb = TeacherHandle::new(b, &h).unwrap();
        (h, ta, tb)
    }

    fn labels(k: &TagSet, y: &[usize]) -> Vec<String> {
        y.iter().map(|&i| k.label(i).to_string()).collect()
    }

    #[test]
    fn merge_prefers_confident_teacher() {
        let (h, ta, tb) = two_teachers();
        let s = sentence(&["in", "Paris", "in", "June", "May"]);
        let merged = postprocess_merge(&[ta.clone(), tb.clone()], &s).unwrap();
        assert_eq!(
            labels(h.unified(), &merged),
            ["O", "B-GPE", "O", "B-DATE", "B-GPE"]
        );
        let solo = postprocess_merge(&[tb.clone()], &s).unwrap();
        let (path, _) = decode_with_marginals(tb.model(), &Featurized::new(&s, DEFAULT_HASH_SEED));
        let projected: Vec<usize> = path
            .iter()
            .map(|&y| tb.projection().representative(y))
            .collect();
        assert_eq!(solo, projected);
        assert!(postprocess_merge(&[], &s).is_err());
    }

    #[test]
    fn merge_ties_go_to_first_teacher() {
        let h = TagHierarchy::parse("tagset g: GPE\ntagset d: DATE\n").unwrap();
        let a = TeacherHandle::new(
            word_model(h.tag_set("g").unwrap(), &[("x", "B-GPE", 3.0)]),
            &h,
        )
        .unwrap();
        let b = TeacherHandle::new(
            word_model(h.tag_set("d").unwrap(), &[("x", "B-DATE", 3.0)]),
            &h,
        )
        .unwrap();
        let s = sentence(&["x"]);
        assert_eq!(
            labels(
                h.unified(),
                &postprocess_merge(&[a.clone(), b.clone()], &s).unwrap()
            ),
            ["B-GPE"]
        );
        assert_eq!(
            labels(h.unified(), &postprocess_merge(&[b, a], &s).unwrap()),
            ["B-DATE"]
        );
    }

    #[test]
    fn merge_uses_placeholder_for_coarse_labels() {
        let h = TagHierarchy::parse(
            "tagset c: PERSON\ntagset f: DOCTOR\nedge PERSON -> DOCTOR\nopen PERSON\n",
        )
        .unwrap();
        let coarse = TeacherHandle::new(
            word_model(h.tag_set("c").unwrap(), &[("bob", "B-PERSON", 4.0)]),
            &h,
        )
        .unwrap();
        let s = sentence(&["bob", "ok"]);
        let merged = postprocess_merge(&[coarse], &s).unwrap();
        assert_eq!(labels(h.unified(), &merged), ["B-PERSON-OTHER", "O"]);
    }

    #[test]
    fn repair_fixes_orphans() {
        let k = TagSet::new("k", ["A", "B"]).unwrap();
        let mut y = vec![2, 0, 2, 4, 3, 4];
        repair_bio(&mut y);
        assert_eq!(labels(&k, &y), ["B-A", "O", "B-A", "B-B", "B-B", "I-B"]);
    }

    #[test]
    fn merged_output_is_valid_bio() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = TagHierarchy::parse("tagset g: GPE,ORG\ntagset d: DATE\n").unwrap();
        let random = |k: &TagSet, rng: &mut ChaCha8Rng| {
            let mut m = Model::new(ModelKind::Crf, k.clone(), "h", DEFAULT_HASH_SEED);
            for w in ["a", "b", "c", "d"] {
                let f = crate::emissions::hash_feature(&format!("word={w}"), DEFAULT_HASH_SEED);
                for y in 0..k.label_count() {
                    m.set_param(ParamId::Emission(f, y), rng.gen_range(-3.0..3.0));
                }
            }
            m
        };
        for _ in 0..20 {
            let ta = TeacherHandle::new(random(h.tag_set("g").unwrap(), &mut rng), &h).unwrap();
            let tb = TeacherHandle::new(random(h.tag_set("d").unwrap(), &mut rng), &h).unwrap();
            let words: Vec<&str> = (0..8)
                .map(|_| ["a", "b", "c", "d"][rng.gen_range(0..4)])
                .collect();
            let merged = postprocess_merge(&[ta, tb], &sentence(&words)).unwrap();
            assert!(crate::corpus::is_valid_bio(h.unified(), &merged));
        }
    }

    #[test]
    fn self_distillation_is_a_no_op() {
        let k = TagSet::new("k", ["A"]).unwrap();
        let h = Arc::new(TagHierarchy::identity(&k).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut teacher = Model::new(
            ModelKind::Crf,
            h.unified().clone(),
            h.id(),
            DEFAULT_HASH_SEED,
        );
        for w in ["x", "y", "z"] {
            let f = crate::emissions::hash_feature(&format!("word={w}"), DEFAULT_HASH_SEED);
            for y in 0..3 {
                teacher.set_param(ParamId::Emission(f, y), rng.gen_range(-1.0..1.0));
            }
        }
        teacher.set_param(ParamId::Transition(1, 2), 0.7);
        let before = teacher.to_text();
        let handle = TeacherHandle::new(teacher.clone(), &h).unwrap();
        let mut sc = Scenario::new(Mode::Mardi, Arc::clone(&h), vec![handle.clone()]);
        sc.unlabeled = vec![sentence(&["x", "y", "z"]), sentence(&["z", "x"])];
        sc.init = Some(teacher.clone());
        let cfg = TrainConfig {
            learning_rate: 0.5,
            max_epochs: 5,
            l2: 0.0,
            ..Default::default()
        };
        let (student, _) = distill(&sc, None, &cfg).unwrap();
        assert!(student.weights().max_abs_diff(teacher.weights()) <= 1e-6);
        assert_eq!(handle.model().to_text(), before);
    }

    #[test]
    fn zero_alpha_never_reads_labels() {
        let (h, ta, tb) = two_teachers();
        let h = Arc::new(h);
        let labeled = AnnotatedCorpus::from_conll_str(
            "in O\nParis B-GPE\n\nJune O\n",
            "mem",
            Some(h.tag_set("g").unwrap()),
            "g",
        )
        .unwrap();
        let blank: Vec<_> = labeled
            .sentences()
            .iter()
            .map(|s| crate::corpus::AnnotatedSentence {
                sentence: s.sentence.clone(),
                labels: vec![0; s.len()],
            })
            .collect();
        let stripped = AnnotatedCorpus::new(labeled.tag_set().clone(), blank).unwrap();
        let run = |c: AnnotatedCorpus| {
            let mut sc = Scenario::new(
                Mode::MardiData,
                Arc::clone(&h),
                vec![ta.clone(), tb.clone()],
            );
            sc.labeled = vec![c];
            sc.distill.alpha = 0.0;
            let cfg = TrainConfig {
                max_epochs: 2,
                learning_rate: 0.3,
                ..Default::default()
            };
            distill(&sc, None, &cfg).unwrap().0.to_text()
        };
        assert_eq!(run(labeled), run(stripped));
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let (_, ta, _) = two_teachers();
        let dir = tempfile::tempdir().unwrap();
        let text = vec![sentence(&["Paris", "in", "May"]), sentence(&["June"])];
        let fresh = teacher_marginals(&ta, &text, 1.3, Some(dir.path())).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let cached = teacher_marginals(&ta, &text, 1.3, Some(dir.path())).unwrap();
        assert_eq!(fresh, cached);
        let other_tau = teacher_marginals(&ta, &text, 2.0, Some(dir.path())).unwrap();
        assert_ne!(fresh, other_tau);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn mode_requirements() {
        let (h, ta, tb) = two_teachers();
        let h = Arc::new(h);
        let sc = Scenario::new(Mode::Mardi, Arc::clone(&h), vec![ta.clone()]);
        assert!(sc.validate().is_err());
        let mut prog = Scenario::new(Mode::Progressive, Arc::clone(&h), vec![ta, tb]);
        prog.labeled =
            vec![AnnotatedCorpus::new(h.tag_set("d").unwrap().clone(), Vec::new()).unwrap()];
        assert!(prog.validate().is_err());
        let stranger = TagSet::new("x", ["ORG"]).unwrap();
        let bad = word_model(&stranger, &[]);
        assert!(TeacherHandle::new(bad, &h).is_err());
        assert!("bogus".parse::<Mode>().is_err());
        assert_eq!("mardi-data".parse::<Mode>().unwrap(), Mode::MardiData);
    }

    #[test]
    fn scenario_file_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("h.txt"), "tagset g: GPE\ntagset d: DATE\n").unwrap();
        let (_, ta, tb) = two_teachers();
        ta.model().save(dir.path().join("a.model")).unwrap();
        tb.model().save(dir.path().join("b.model")).unwrap();
        fs::write(dir.path().join("raw.txt"), "Paris\nin\nJune\n\n").unwrap();
        fs::write(
            dir.path().join("dev.conll"),
            "Paris B-GPE\nin O\nJune B-DATE\n",
        )
        .unwrap();
        let cfg_text = "mode = \"mardi\"\nhierarchy = \"h.txt\"\nteachers = [\"a.model\", \"b.model\"]\nunlabeled = [\"raw.txt\"]\ndev = \"dev.conll\"\n[train]\nmax_epochs = 2\n";
        fs::write(dir.path().join("s.toml"), cfg_text).unwrap();
        let cfg = ScenarioConfig::from_file(dir.path().join("s.toml")).unwrap();
        assert_eq!(cfg.hierarchy, dir.path().join("h.txt"));
        let (sc, dev) = cfg.load().unwrap();
        assert_eq!(sc.teachers.len(), 2);
        let dev = dev.unwrap();
        assert_eq!(dev.gold[0][2], BioLabel::Begin("DATE".into()));
        let (m, report) = distill(&sc, Some(&dev), &cfg.train).unwrap();
        assert!(report.epochs.len() <= 2);
        assert!(m.tag_set().same_as(sc.hierarchy.unified()));
        fs::write(
            dir.path().join("bad.toml"),
            "mode = \"mardi\"\nhierarchy = \"h.txt\"\nextra = 1\n",
        )
        .unwrap();
        assert!(ScenarioConfig::from_file(dir.path().join("bad.toml")).is_err());
    }
}
