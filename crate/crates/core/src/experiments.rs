//! End-to-end synthetic recipes comparing the training strategies on data
//! with known ground truth.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    generate_synthetic, retype, selective_retag, split, AnnotatedCorpus, GeneratorSpec,
};
use crate::error::Result;
use crate::evalmetrics::micro_prf;
use crate::model::{Model, ModelKind};
use crate::tagspace::{BioLabel, TagHierarchy, TagSet};
use crate::trainer::{decode_all, evaluate_checkpoint, to_bio, DevSet, TrainConfig};
use crate::unify::{
    distill, merge_corpus, train_marginal_crf, train_supervised, Mode, Scenario, TeacherHandle,
};

/// Test-set micro F1 of each strategy, in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores(pub BTreeMap<String, f64>);

impl Scores {
    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(f64::NAN)
    }

    fn set(&mut self, name: &str, f1: f64) {
        self.0.insert(name.to_string(), f1);
    }
}

impl std::fmt::Display for Scores {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, v) in &self.0 {
            writeln!(f, "{name:<28} {:6.2}", 100.0 * v)?;
        }
        Ok(())
    }
}

fn dev_of(c: &AnnotatedCorpus) -> Result<DevSet> {
    DevSet::new(c.tokens(), c.bio_labels())
}

fn view(c: &AnnotatedCorpus, keep: &[&str], id: &str) -> Result<AnnotatedCorpus> {
    selective_retag(c, keep)?.with_tag_set_id(id)
}

fn test_f1(m: &Model, test: &AnnotatedCorpus) -> Result<f64> {
    let r = evaluate_checkpoint(m, &dev_of(test)?)?;
    log::debug!("\n{}", r.table());
    Ok(r.f1)
}

fn merge_f1(teachers: &[TeacherHandle], unified: &TagSet, test: &AnnotatedCorpus) -> Result<f64> {
    let merged = merge_corpus(teachers, &test.tokens())?;
    let r = micro_prf(&test.bio_labels(), &to_bio(unified, &merged))?;
    log::debug!("\n{}", r.table());
    Ok(r.f1)
}

/// Two tag-set views of one corpus, each annotating half the types on a
/// disjoint half of the training sentences.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtensionSetup {
    pub generator: GeneratorSpec,
    pub view_a: Vec<String>,
    pub view_b: Vec<String>,
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
    pub temperature: f64,
}

impl Default for ExtensionSetup {
    fn default() -> Self {
        let types = ["PER", "ORG", "LOC", "MISC"];
        ExtensionSetup {
            generator: GeneratorSpec {
                types: types.iter().map(|t| t.to_string()).collect(),
                entity_vocab: 80,
                background_vocab: 400,
                entity_start_prob: 0.18,
                mean_entity_len: 1.6,
                trigger_prob: 0.3,
                confusable: vec![
                    vec!["PER".into(), "ORG".into()],
                    vec!["LOC".into(), "MISC".into()],
                ],
                shared_vocab: 30,
                shared_prob: 0.8,
                seed: 11,
                ..Default::default()
            },
            view_a: vec!["PER".into(), "LOC".into()],
            view_b: vec!["ORG".into(), "MISC".into()],
            train_sentences: 2000,
            dev_sentences: 300,
            test_sentences: 1000,
            teacher: TrainConfig {
                learning_rate: 0.5,
                max_epochs: 15,
                patience: 4,
                ..Default::default()
            },
            student: TrainConfig {
                learning_rate: 0.5,
                max_epochs: 15,
                patience: 4,
                ..Default::default()
            },
            temperature: 1.0,
        }
    }
}

impl ExtensionSetup {
    pub fn hierarchy(&self) -> Result<TagHierarchy> {
        TagHierarchy::parse(&format!(
            "tagset a: {}\ntagset b: {}\n",
            self.view_a.join(","),
            self.view_b.join(",")
        ))
    }

    /// Skyline, marginal CRF, MARDI, and the merge baseline on held-out
    /// test data.
    pub fn run(&self) -> Result<Scores> {
        let h = Arc::new(self.hierarchy()?);
        let n = self.train_sentences + self.dev_sentences + self.test_sentences;
        let gold = generate_synthetic(&self.generator, n)?;
        // relabel into the hierarchy's leaf order
        let unified = h.unified().clone();
        let identity: BTreeMap<String, String> = unified
            .types()
            .iter()
            .map(|t| (t.clone(), t.clone()))
            .collect();
        let gold = retype(&gold, &unified, &identity)?;
        let total = n as f64;
        let (train, dev, test) = split(
            &gold,
            [
                self.train_sentences as f64 / total,
                self.dev_sentences as f64 / total,
                self.test_sentences as f64 / total,
            ],
            self.generator.seed,
        )?;
        let half = train.len() / 2;
        let idx: Vec<usize> = (0..train.len()).collect();
        let keep_a: Vec<&str> = self.view_a.iter().map(String::as_str).collect();
        let keep_b: Vec<&str> = self.view_b.iter().map(String::as_str).collect();
        let view_a = view(&train.subset(&idx[..half]), &keep_a, "a")?;
        let view_b = view(&train.subset(&idx[half..]), &keep_b, "b")?;
        let dev_a = dev_of(&view(&dev, &keep_a, "a")?)?;
        let dev_b = dev_of(&view(&dev, &keep_b, "b")?)?;
        let dev_u = dev_of(&dev)?;

        let mut scores = Scores::default();
        let (skyline, _) = train_supervised(&train, ModelKind::Crf, Some(&dev_u), &self.student)?;
        scores.set("skyline", test_f1(&skyline, &test)?);

        let (ta, _) = train_supervised(&view_a, ModelKind::Crf, Some(&dev_a), &self.teacher)?;
        let (tb, _) = train_supervised(&view_b, ModelKind::Crf, Some(&dev_b), &self.teacher)?;
        let teachers = vec![TeacherHandle::new(ta, &h)?, TeacherHandle::new(tb, &h)?];
        scores.set("postprocess", merge_f1(&teachers, &unified, &test)?);

        let (marginal, _) = train_marginal_crf(
            &[view_a.clone(), view_b.clone()],
            &h,
            Some(&dev_u),
            &self.student,
        )?;
        scores.set("marginal_crf", test_f1(&marginal, &test)?);

        let mut sc = Scenario::new(Mode::Mardi, Arc::clone(&h), teachers);
        sc.unlabeled = train.tokens();
        sc.distill.temperature = self.temperature;
        let (mardi, _) = distill(&sc, Some(&dev_u), &self.student)?;
        scores.set("mardi", test_f1(&mardi, &test)?);
        Ok(scores)
    }
}

/// A parent type split into three children: one view annotates the parent,
/// the other names two of the children and leaves the third as `O`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchySetup {
    pub generator: GeneratorSpec,
    pub parent: String,
    pub children: Vec<String>,
    pub coarse_other: Vec<String>,
    pub fine_other: Vec<String>,
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
}

impl Default for HierarchySetup {
    fn default() -> Self {
        HierarchySetup {
            generator: GeneratorSpec {
                types: ["DOCTOR", "PATIENT", "PERSON-OTHER", "DATE", "CITY"]
                    .iter()
                    .map(|t| t.to_string())
                    .collect(),
                entity_vocab: 80,
                background_vocab: 400,
                entity_start_prob: 0.18,
                mean_entity_len: 1.6,
                trigger_prob: 0.6,
                seed: 21,
                ..Default::default()
            },
            parent: "PERSON".into(),
            children: vec!["DOCTOR".into(), "PATIENT".into(), "PERSON-OTHER".into()],
            coarse_other: vec!["DATE".into()],
            fine_other: vec!["CITY".into()],
            train_sentences: 2000,
            dev_sentences: 300,
            test_sentences: 1000,
            teacher: ExtensionSetup::default().teacher,
            student: ExtensionSetup::default().student,
        }
    }
}

impl HierarchySetup {
    pub fn hierarchy(&self) -> Result<TagHierarchy> {
        let mut coarse = vec![self.parent.clone()];
        coarse.extend(self.coarse_other.iter().cloned());
        let named: Vec<String> = self
            .children
            .iter()
            .filter(|c| !c.ends_with(crate::tagspace::PLACEHOLDER_SUFFIX))
            .cloned()
            .collect();
        let mut fine = named.clone();
        fine.extend(self.fine_other.iter().cloned());
        let mut text = format!(
            "tagset coarse: {}\ntagset fine: {}\n",
            coarse.join(","),
            fine.join(",")
        );
        for c in &named {
            text.push_str(&format!("edge {} -> {c}\n", self.parent));
        }
        text.push_str(&format!("open {}\n", self.parent));
        TagHierarchy::parse(&text)
    }

    /// Marginal CRF against MARDI, scored on fine leaves and after
    /// collapsing leaves to their roots.
    pub fn run(&self) -> Result<Scores> {
        let h = Arc::new(self.hierarchy()?);
        let unified = h.unified().clone();
        let n = self.train_sentences + self.dev_sentences + self.test_sentences;
        let gold = generate_synthetic(&self.generator, n)?;
        let identity: BTreeMap<String, String> = unified
            .types()
            .iter()
            .map(|t| (t.clone(), t.clone()))
            .collect();
        let gold = retype(&gold, &unified, &identity)?;
        let total = n as f64;
        let (train, dev, test) = split(
            &gold,
            [
                self.train_sentences as f64 / total,
                self.dev_sentences as f64 / total,
                self.test_sentences as f64 / total,
            ],
            self.generator.seed,
        )?;

        let coarse_k = h.tag_set("coarse").expect("declared").clone();
        let fine_k = h.tag_set("fine").expect("declared").clone();
        let mut to_coarse: BTreeMap<String, String> = self
            .children
            .iter()
            .map(|c| (c.clone(), self.parent.clone()))
            .collect();
        for t in &self.coarse_other {
            to_coarse.insert(t.clone(), t.clone());
        }
        let to_fine: BTreeMap<String, String> = fine_k
            .types()
            .iter()
            .map(|t| (t.clone(), t.clone()))
            .collect();
        let half = train.len() / 2;
        let idx: Vec<usize> = (0..train.len()).collect();
        let view_c = retype(&train.subset(&idx[..half]), &coarse_k, &to_coarse)?;
        let view_f = retype(&train.subset(&idx[half..]), &fine_k, &to_fine)?;
        let dev_c = dev_of(&retype(&dev, &coarse_k, &to_coarse)?)?;
        let dev_f = dev_of(&retype(&dev, &fine_k, &to_fine)?)?;
        let dev_u = dev_of(&dev)?;

        let (tc, _) = train_supervised(&view_c, ModelKind::Crf, Some(&dev_c), &self.teacher)?;
        let (tf, _) = train_supervised(&view_f, ModelKind::Crf, Some(&dev_f), &self.teacher)?;
        let teachers = vec![TeacherHandle::new(tc, &h)?, TeacherHandle::new(tf, &h)?];

        let (marginal, _) = train_marginal_crf(&[view_c, view_f], &h, Some(&dev_u), &self.student)?;
        let mut sc = Scenario::new(Mode::Mardi, Arc::clone(&h), teachers.clone());
        sc.unlabeled = train.tokens();
        let (mardi, _) = distill(&sc, Some(&dev_u), &self.student)?;

        let (roots, root_map) = h.root_tag_set()?;
        let coarse_gold: Vec<Vec<BioLabel>> = test
            .label_indices()
            .iter()
            .map(|r| r.iter().map(|&y| roots.label(root_map[y])).collect())
            .collect();
        let coarse_f1 = |pred: &[Vec<usize>]| -> Result<f64> {
            let p: Vec<Vec<BioLabel>> = pred
                .iter()
                .map(|r| r.iter().map(|&y| roots.label(root_map[y])).collect())
                .collect();
            Ok(micro_prf(&coarse_gold, &p)?.f1)
        };
        let mut scores = Scores::default();
        for (name, m) in [("marginal_crf", &marginal), ("mardi", &mardi)] {
            let pred = decode_all(m, &test.tokens());
            scores.set(
                &format!("{name}.fine"),
                micro_prf(&test.bio_labels(), &to_bio(&unified, &pred))?.f1,
            );
            scores.set(&format!("{name}.coarse"), coarse_f1(&pred)?);
        }
        let merged = merge_corpus(&teachers, &test.tokens())?;
        scores.set(
            "postprocess.fine",
            micro_prf(&test.bio_labels(), &to_bio(&unified, &merged))?.f1,
        );
        scores.set("postprocess.coarse", coarse_f1(&merged)?);
        Ok(scores)
    }
}

/// A source model adapted to a target domain whose labeled data names new
/// types, with and without source-domain unlabeled text.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProgressiveSetup {
    pub generator: GeneratorSpec,
    pub source_types: Vec<String>,
    pub target_types: Vec<String>,
    pub target_offset: usize,
    /// Frequency of the target-only types in source text relative to the
    /// source types.
    pub source_other_weight: f64,
    pub source_sentences: usize,
    pub source_unlabeled_sentences: usize,
    pub target_train_sentences: usize,
    pub target_unlabeled_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub alpha: f64,
    pub teacher: TrainConfig,
    pub student: TrainConfig,
}

impl Default for ProgressiveSetup {
    fn default() -> Self {
        ProgressiveSetup {
            generator: GeneratorSpec {
                types: ["PER", "ORG", "LOC", "MISC"]
                    .iter()
                    .map(|t| t.to_string())
                    .collect(),
                entity_vocab: 300,
                background_vocab: 400,
                entity_start_prob: 0.18,
                mean_entity_len: 1.6,
                trigger_prob: 0.9,
                zipf_exponent: 1.0,
                seed: 31,
                ..Default::default()
            },
            source_types: vec!["PER".into(), "LOC".into()],
            target_types: vec!["ORG".into(), "MISC".into()],
            target_offset: 20,
            source_other_weight: 1.0,
            source_sentences: 2000,
            source_unlabeled_sentences: 3000,
            target_train_sentences: 100,
            target_unlabeled_sentences: 300,
            dev_sentences: 300,
            test_sentences: 1000,
            alpha: 0.9,
            teacher: ExtensionSetup::default().teacher,
            student: ExtensionSetup::default().student,
        }
    }
}

impl ProgressiveSetup {
    pub fn hierarchy(&self) -> Result<TagHierarchy> {
        TagHierarchy::parse(&format!(
            "tagset source: {}\ntagset target: {}\n",
            self.source_types.join(","),
            self.target_types.join(",")
        ))
    }

    /// Progressive distillation with and without source unlabeled text,
    /// and the merge of the source teacher with a target-only model.
    pub fn run(&self) -> Result<Scores> {
        let h = Arc::new(self.hierarchy()?);
        let unified = h.unified().clone();
        let identity: BTreeMap<String, String> = unified
            .types()
            .iter()
            .map(|t| (t.clone(), t.clone()))
            .collect();
        let source_weights: Vec<f64> = self
            .generator
            .types
            .iter()
            .map(|t| {
                if self.source_types.contains(t) {
                    1.0
                } else {
                    self.source_other_weight
                }
            })
            .collect();
        let gen = |source: bool, seed_shift: u64, n: usize| -> Result<AnnotatedCorpus> {
            let mut spec = GeneratorSpec {
                seed: self.generator.seed.wrapping_add(seed_shift),
                ..self.generator.clone()
            };
            if source {
                spec.type_weights = source_weights.clone();
            } else {
                spec.domain_offset = self.target_offset;
            }
            retype(&generate_synthetic(&spec, n)?, &unified, &identity)
        };
        let source = gen(true, 0, self.source_sentences)?;
        let source_text = gen(true, 1, self.source_unlabeled_sentences)?.tokens();
        let target_train = gen(false, 2, self.target_train_sentences)?;
        let target_text = gen(false, 3, self.target_unlabeled_sentences)?.tokens();
        let dev = gen(false, 4, self.dev_sentences)?;
        let test = gen(false, 5, self.test_sentences)?;

        let keep_s: Vec<&str> = self.source_types.iter().map(String::as_str).collect();
        let keep_t: Vec<&str> = self.target_types.iter().map(String::as_str).collect();
        let source_view = view(&source, &keep_s, "source")?;
        let target_view = view(&target_train, &keep_t, "target")?;
        let dev_s = dev_of(&view(
            &gen(true, 6, self.dev_sentences)?,
            &keep_s,
            "source",
        )?)?;
        let dev_t = dev_of(&view(&dev, &keep_t, "target")?)?;
        let dev_u = dev_of(&dev)?;

        let (src_model, _) =
            train_supervised(&source_view, ModelKind::Crf, Some(&dev_s), &self.teacher)?;
        let (tgt_model, _) =
            train_supervised(&target_view, ModelKind::Crf, Some(&dev_t), &self.teacher)?;
        let src = TeacherHandle::new(src_model, &h)?;
        let tgt = TeacherHandle::new(tgt_model, &h)?;

        let mut scores = Scores::default();
        scores.set(
            "postprocess",
            merge_f1(&[src.clone(), tgt], &unified, &test)?,
        );
        for (name, with_source) in [
            ("progressive.target_text", false),
            ("progressive.source_text", true),
        ] {
            let mut sc = Scenario::new(Mode::Progressive, Arc::clone(&h), vec![src.clone()]);
            sc.labeled = vec![target_view.clone()];
            sc.unlabeled = target_text.clone();
            if with_source {
                sc.source_unlabeled = source_text.clone();
            }
            sc.distill.alpha = self.alpha;
            let (m, _) = distill(&sc, Some(&dev_u), &self.student)?;
            scores.set(name, test_f1(&m, &test)?);
        }
        Ok(scores)
    }
}
