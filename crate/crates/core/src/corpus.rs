//! Labeled corpora: CoNLL I/O, tag-set surgery, splitting, and a synthetic
//! generator with exact ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::emissions::Sentence;
use crate::error::{Error, Result};
use crate::evalmetrics::extract_spans;
use crate::tagspace::{BioKind, BioLabel, TagSet};

const DOCSTART: &str = "-DOCSTART-";

/// Tokens with one label index per token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub labels: Vec<usize>,
}

impl AnnotatedSentence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Sentences labeled under one tag set.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedCorpus {
    tag_set: TagSet,
    sentences: Vec<AnnotatedSentence>,
    note: String,
}

impl AnnotatedCorpus {
    pub fn new(tag_set: TagSet, sentences: Vec<AnnotatedSentence>) -> Result<Self> {
        for (n, s) in sentences.iter().enumerate() {
            if s.labels.len() != s.sentence.len() {
                return Err(Error::Dimension(format!(
                    "sentence {n} has {} tokens and {} labels",
                    s.sentence.len(),
                    s.labels.len()
                )));
            }
            if let Some(&bad) = s.labels.iter().find(|&&y| y >= tag_set.label_count()) {
                return Err(Error::InvalidArgument(format!(
                    "sentence {n}: label {bad} outside tag set `{}`",
                    tag_set.id()
                )));
            }
        }
        Ok(AnnotatedCorpus {
            tag_set,
            sentences,
            note: String::new(),
        })
    }

    pub fn tag_set(&self) -> &TagSet {
        &self.tag_set
    }

    pub fn sentences(&self) -> &[AnnotatedSentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Free-form provenance.
    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Same corpus under a renamed tag set.
    pub fn with_tag_set_id(mut self, id: &str) -> Result<Self> {
        self.tag_set = TagSet::new(id, self.tag_set.types().to_vec())?;
        Ok(self)
    }

    pub fn tokens(&self) -> Vec<Sentence> {
        self.sentences.iter().map(|s| s.sentence.clone()).collect()
    }

    pub fn label_indices(&self) -> Vec<Vec<usize>> {
        self.sentences.iter().map(|s| s.labels.clone()).collect()
    }

    pub fn bio_labels(&self) -> Vec<Vec<BioLabel>> {
        self.sentences
            .iter()
            .map(|s| s.labels.iter().map(|&y| self.tag_set.label(y)).collect())
            .collect()
    }

    /// Sub-corpus at the given sentence indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        AnnotatedCorpus {
            tag_set: self.tag_set.clone(),
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            note: self.note.clone(),
        }
    }

    /// Concatenation of two corpora over the same tag set.
    pub fn concat(&self, other: &AnnotatedCorpus) -> Result<Self> {
        if !self.tag_set.same_as(&other.tag_set) {
            return Err(Error::TagSet(format!(
                "cannot concatenate `{}` and `{}`",
                self.tag_set.id(),
                other.tag_set.id()
            )));
        }
        let mut out = self.clone();
        out.sentences.extend(other.sentences.iter().cloned());
        Ok(out)
    }

    pub fn to_conll_string(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.sentences {
            for (tok, &y) in s.sentence.tokens().iter().zip(&s.labels) {
                if tok.contains(char::is_whitespace) {
                    return Err(Error::InvalidArgument(format!(
                        "token {tok:?} contains whitespace and cannot be written as CoNLL"
                    )));
                }
                let _ = writeln!(out, "{tok} {}", self.tag_set.label(y));
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses CoNLL text. Labels must belong to `tag_set` when given;
    /// otherwise the entity types are collected in order of appearance into
    /// a tag set named `id`.
    pub fn from_conll_str(
        text: &str,
        origin: &str,
        tag_set: Option<&TagSet>,
        id: &str,
    ) -> Result<Self> {
        let format_err = |line: usize, message: String| Error::Format {
            path: origin.into(),
            line,
            message,
        };
        let mut raw: Vec<Vec<(usize, String, BioLabel)>> = Vec::new();
        let mut current = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                if !current.is_empty() {
                    raw.push(std::mem::take(&mut current));
                }
                continue;
            }
            if cols[0] == DOCSTART {
                continue;
            }
            if cols.len() != 2 {
                return Err(format_err(
                    line_no,
                    format!("expected `token label`, found {} column(s)", cols.len()),
                ));
            }
            let label: BioLabel = cols[1]
                .parse()
                .map_err(|_| format_err(line_no, format!("malformed label `{}`", cols[1])))?;
            current.push((line_no, cols[0].to_string(), label));
        }
        if !current.is_empty() {
            raw.push(current);
        }

        let tag_set = match tag_set {
            Some(k) => k.clone(),
            None => {
                let mut types: Vec<String> = Vec::new();
                for (_, _, label) in raw.iter().flatten() {
                    if let Some(x) = label.entity_type() {
                        if !types.iter().any(|t| t == x) {
                            types.push(x.to_string());
                        }
                    }
                }
                TagSet::new(id, types)?
            }
        };

        let mut sentences = Vec::with_capacity(raw.len());
        for rows in raw {
            let mut labels = Vec::with_capacity(rows.len());
            let mut prev: Option<&BioLabel> = None;
            for (line_no, _, label) in &rows {
                let fixed = match label {
                    BioLabel::Inside(x) if !continues(prev, x) => {
                        log::warn!("{origin}:{line_no}: orphan {label} repaired to B-{x}");
                        BioLabel::Begin(x.clone())
                    }
                    other => other.clone(),
                };
                let idx = tag_set.index_of(&fixed).ok_or_else(|| {
                    format_err(
                        *line_no,
                        format!("label `{label}` not in tag set `{}`", tag_set.id()),
                    )
                })?;
                labels.push(idx);
                prev = Some(label);
            }
            let sentence = Sentence::new(rows.into_iter().map(|(_, tok, _)| tok))?;
            sentences.push(AnnotatedSentence { sentence, labels });
        }
        Ok(AnnotatedCorpus::new(tag_set, sentences)?.with_note(origin))
    }
}

fn continues(prev: Option<&BioLabel>, x: &str) -> bool {
    matches!(prev, Some(BioLabel::Begin(y) | BioLabel::Inside(y)) if y == x)
}

/// Reads a two-column CoNLL file (`token label`, blank line between
/// sentences). `-DOCSTART-` lines are skipped and orphan `I-X` labels are
/// repaired to `B-X` with a warning.
pub fn read_conll(path: impl AsRef<Path>, tag_set: &TagSet) -> Result<AnnotatedCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AnnotatedCorpus::from_conll_str(
        &text,
        &path.display().to_string(),
        Some(tag_set),
        tag_set.id(),
    )
}

/// [`read_conll`] with the tag set inferred from the labels present.
pub fn read_conll_inferred(path: impl AsRef<Path>, id: &str) -> Result<AnnotatedCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AnnotatedCorpus::from_conll_str(&text, &path.display().to_string(), None, id)
}

pub fn write_conll(corpus: &AnnotatedCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, corpus.to_conll_string()?).map_err(|e| Error::io(path, e))
}

/// Token-only reader: one or two columns per line, the first being the
/// token.
pub fn read_tokens(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.len() {
            0 => {
                if !current.is_empty() {
                    out.push(Sentence::new(std::mem::take(&mut current))?);
                }
            }
            1 | 2 if cols[0] == DOCSTART => {}
            1 | 2 => current.push(cols[0].to_string()),
            k => {
                return Err(Error::Format {
                    path: path.into(),
                    line: n + 1,
                    message: format!("expected 1 or 2 columns, found {k}"),
                })
            }
        }
    }
    if !current.is_empty() {
        out.push(Sentence::new(current)?);
    }
    Ok(out)
}

/// Writes sentences one token per line.
pub fn write_tokens(sentences: &[Sentence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in sentences {
        for tok in s.tokens() {
            out.push_str(tok);
            out.push('\n');
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Relabels every span through `map` (source type → target type) into
/// `target`; spans of unmapped types become `O`. Span boundaries are kept.
pub fn retype(
    corpus: &AnnotatedCorpus,
    target: &TagSet,
    map: &BTreeMap<String, String>,
) -> Result<AnnotatedCorpus> {
    for (from, to) in map {
        if corpus.tag_set.type_index(from).is_none() {
            return Err(Error::TagSet(format!(
                "`{from}` is not a type of `{}`",
                corpus.tag_set.id()
            )));
        }
        if target.type_index(to).is_none() {
            return Err(Error::TagSet(format!(
                "`{to}` is not a type of `{}`",
                target.id()
            )));
        }
    }
    let sentences = corpus
        .sentences
        .iter()
        .map(|s| {
            let bio: Vec<BioLabel> = s.labels.iter().map(|&y| corpus.tag_set.label(y)).collect();
            let mut labels = vec![0; s.len()];
            for span in extract_spans(&bio) {
                if let Some(to) = map.get(&span.entity_type) {
                    labels[span.start] = target
                        .index_of(&BioLabel::Begin(to.clone()))
                        .expect("checked");
                    for y in &mut labels[span.start + 1..span.end] {
                        *y = target
                            .index_of(&BioLabel::Inside(to.clone()))
                            .expect("checked");
                    }
                }
            }
            AnnotatedSentence {
                sentence: s.sentence.clone(),
                labels,
            }
        })
        .collect();
    Ok(AnnotatedCorpus::new(target.clone(), sentences)?.with_note(corpus.note.clone()))
}

/// Keeps only spans whose type is in `keep`; everything else becomes `O`.
/// The result is labeled under the reduced tag set `{id}:{A+B+...}`, or the
/// original one when every type is kept.
pub fn selective_retag(corpus: &AnnotatedCorpus, keep: &[&str]) -> Result<AnnotatedCorpus> {
    let k = &corpus.tag_set;
    if let Some(bad) = keep.iter().find(|t| k.type_index(t).is_none()) {
        return Err(Error::TagSet(format!(
            "`{bad}` is not a type of `{}`",
            k.id()
        )));
    }
    let kept: Vec<String> = k
        .types()
        .iter()
        .filter(|t| keep.contains(&t.as_str()))
        .cloned()
        .collect();
    let target = if kept.len() == k.types().len() {
        k.clone()
    } else {
        TagSet::new(format!("{}:{}", k.id(), kept.join("+")), kept.clone())?
    };
    let map = kept.iter().map(|t| (t.clone(), t.clone())).collect();
    retype(corpus, &target, &map)
}

/// Seeded shuffle into train/dev/test. Dev and test sizes are
/// `floor(ratio·n)`; the remainder goes to train.
pub fn split(
    corpus: &AnnotatedCorpus,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(AnnotatedCorpus, AnnotatedCorpus, AnnotatedCorpus)> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev = (ratios[1] * n as f64).floor() as usize;
    let test = (ratios[2] * n as f64).floor() as usize;
    let train = n - dev - test;
    Ok((
        corpus.subset(&order[..train]),
        corpus.subset(&order[train..train + dev]),
        corpus.subset(&order[train + dev..]),
    ))
}

/// Parameters of the synthetic corpus generator.
///
/// Sentences are produced left to right: each background position may
/// start an entity of a type drawn by `type_weights` (uniform when empty),
/// optionally preceded by a
/// lowercase cue word for that type. Entity tokens come from the type's own
/// vocabulary block, or, for types in a confusable group, from a pool
/// shared by the whole group. Every entity is followed by background text.
/// Words are drawn by a Zipf law over ranks; `domain_offset` rotates the
/// ranks so different domains favor different words of the same
/// vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub tag_set: String,
    pub types: Vec<String>,
    /// Relative frequency of each type; a zero removes the type from the
    /// text without changing the vocabulary.
    pub type_weights: Vec<f64>,
    pub entity_vocab: usize,
    pub background_vocab: usize,
    pub entity_start_prob: f64,
    pub mean_entity_len: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub trigger_prob: f64,
    pub triggers_per_type: usize,
    pub confusable: Vec<Vec<String>>,
    pub shared_vocab: usize,
    pub shared_prob: f64,
    pub zipf_exponent: f64,
    pub domain_offset: usize,
    pub vocab_seed: u64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            tag_set: "gold".into(),
            types: vec!["PER".into(), "LOC".into()],
            type_weights: Vec::new(),
            entity_vocab: 60,
            background_vocab: 300,
            entity_start_prob: 0.15,
            mean_entity_len: 1.5,
            min_len: 6,
            max_len: 18,
            trigger_prob: 0.0,
            triggers_per_type: 3,
            confusable: Vec::new(),
            shared_vocab: 20,
            shared_prob: 0.0,
            zipf_exponent: 1.0,
            domain_offset: 0,
            vocab_seed: 7,
            seed: 1,
        }
    }
}

impl GeneratorSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: GeneratorSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn tag_set(&self) -> Result<TagSet> {
        TagSet::new(self.tag_set.clone(), self.types.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let k = self.tag_set()?;
        let unit = |p: f64| (0.0..1.0).contains(&p);
        if !unit(self.entity_start_prob) || !unit(self.trigger_prob) || !unit(self.shared_prob) {
            return bad("generator probabilities must lie in [0,1)".into());
        }
        if !(self.mean_entity_len >= 1.0) {
            return bad(format!(
                "mean_entity_len must be >= 1, got {}",
                self.mean_entity_len
            ));
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return bad(format!(
                "invalid length range {}..={}",
                self.min_len, self.max_len
            ));
        }
        if self.background_vocab == 0 || (!k.types().is_empty() && self.entity_vocab == 0) {
            return bad("vocabularies must be non-empty".into());
        }
        if self.trigger_prob > 0.0 && self.triggers_per_type == 0 {
            return bad("trigger_prob > 0 needs triggers_per_type >= 1".into());
        }
        if !self.type_weights.is_empty() {
            if self.type_weights.len() != k.types().len() {
                return bad(format!(
                    "{} type weights for {} types",
                    self.type_weights.len(),
                    k.types().len()
                ));
            }
            if self
                .type_weights
                .iter()
                .any(|w| !(*w >= 0.0) || !w.is_finite())
                || self.type_weights.iter().sum::<f64>() <= 0.0
            {
                return bad("type weights must be non-negative with a positive sum".into());
            }
        }
        if !(self.zipf_exponent >= 0.0) {
            return bad("zipf_exponent must be >= 0".into());
        }
        let mut seen = FxHashSet::default();
        for group in &self.confusable {
            if group.len() < 2 {
                return bad("confusable groups need at least two types".into());
            }
            for t in group {
                if k.type_index(t).is_none() {
                    return bad(format!("confusable type `{t}` is not generated"));
                }
                if !seen.insert(t.as_str()) {
                    return bad(format!("type `{t}` appears in two confusable groups"));
                }
            }
        }
        if !self.confusable.is_empty() && self.shared_vocab == 0 {
            return bad("confusable groups need shared_vocab >= 1".into());
        }
        Ok(())
    }
}

struct Lexicon {
    background: Vec<String>,
    entity: Vec<Vec<String>>,
    cues: Vec<Vec<String>>,
    shared: Vec<Vec<String>>,
    group_of: Vec<Option<usize>>,
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st",
];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

impl Lexicon {
    fn build(spec: &GeneratorSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.vocab_seed);
        let mut used = FxHashSet::default();
        let mut word = |rng: &mut ChaCha8Rng, capital: bool| loop {
            let syllables = rng.gen_range(2..=4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
                w.push_str(NUCLEI[rng.gen_range(0..NUCLEI.len())]);
            }
            if rng.gen_bool(0.3) {
                w.push_str(ONSETS[rng.gen_range(0..12)]);
            }
            if used.insert(w.clone()) {
                if capital {
                    let mut c = w.chars();
                    let first = c.next().expect("non-empty").to_ascii_uppercase();
                    return std::iter::once(first).chain(c).collect();
                }
                return w;
            }
        };
        let n_types = spec.types.len();
        let background = (0..spec.background_vocab)
            .map(|_| word(&mut rng, false))
            .collect();
        let entity = (0..n_types)
            .map(|_| {
                (0..spec.entity_vocab)
                    .map(|_| word(&mut rng, true))
                    .collect()
            })
            .collect();
        let cues = (0..n_types)
            .map(|_| {
                (0..spec.triggers_per_type)
                    .map(|_| word(&mut rng, false))
                    .collect()
            })
            .collect();
        let shared = spec
            .confusable
            .iter()
            .map(|_| {
                (0..spec.shared_vocab)
                    .map(|_| word(&mut rng, true))
                    .collect()
            })
            .collect();
        let mut group_of = vec![None; n_types];
        for (g, group) in spec.confusable.iter().enumerate() {
            for t in group {
                if let Some(i) = spec.types.iter().position(|x| x == t) {
                    group_of[i] = Some(g);
                }
            }
        }
        Lexicon {
            background,
            entity,
            cues,
            shared,
            group_of,
        }
    }
}

struct ZipfPool<'a> {
    words: &'a [String],
    ranks: WeightedIndex<f64>,
    offset: usize,
}

impl<'a> ZipfPool<'a> {
    fn new(words: &'a [String], exponent: f64, offset: usize) -> Self {
        let weights: Vec<f64> = (0..words.len())
            .map(|r| 1.0 / ((r + 1) as f64).powf(exponent))
            .collect();
        ZipfPool {
            words,
            ranks: WeightedIndex::new(weights).expect("non-empty pool"),
            offset,
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> &'a str {
        let r = self.ranks.sample(rng);
        &self.words[(r + self.offset) % self.words.len()]
    }
}

/// Samples `n_sentences` sentences with exact BIO labels.
pub fn generate_synthetic(spec: &GeneratorSpec, n_sentences: usize) -> Result<AnnotatedCorpus> {
    spec.validate()?;
    let k = spec.tag_set()?;
    let lex = Lexicon::build(spec);
    let (exp, offset) = (spec.zipf_exponent, spec.domain_offset);
    let background = ZipfPool::new(&lex.background, exp, offset);
    let entity: Vec<ZipfPool> = lex
        .entity
        .iter()
        .map(|w| ZipfPool::new(w, exp, offset))
        .collect();
    let shared: Vec<ZipfPool> = lex
        .shared
        .iter()
        .map(|w| ZipfPool::new(w, exp, offset))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_types = spec.types.len();
    let type_dist = if spec.type_weights.is_empty() || n_types == 0 {
        None
    } else {
        Some(WeightedIndex::new(&spec.type_weights).expect("validated weights"))
    };
    let continue_prob = 1.0 - 1.0 / spec.mean_entity_len;

    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut tokens: Vec<String> = Vec::with_capacity(len);
        let mut labels: Vec<usize> = Vec::with_capacity(len);
        while tokens.len() < len {
            let start_entity = n_types > 0 && rng.gen_bool(spec.entity_start_prob);
            if !start_entity {
                tokens.push(background.draw(&mut rng).to_string());
                labels.push(0);
                continue;
            }
            let ty = match &type_dist {
                Some(d) => d.sample(&mut rng),
                None => rng.gen_range(0..n_types),
            };
            if rng.gen_bool(spec.trigger_prob) && tokens.len() + 1 < len {
                let cue = &lex.cues[ty][rng.gen_range(0..lex.cues[ty].len())];
                tokens.push(cue.clone());
                labels.push(0);
            }
            let mut span = 0;
            loop {
                let from_shared = match lex.group_of[ty] {
                    Some(g) if rng.gen_bool(spec.shared_prob) => Some(&shared[g]),
                    _ => None,
                };
                let w = from_shared.unwrap_or(&entity[ty]).draw(&mut rng);
                tokens.push(w.to_string());
                labels.push(if span == 0 { 2 * ty + 1 } else { 2 * ty + 2 });
                span += 1;
                if tokens.len() >= len || !rng.gen_bool(continue_prob) {
                    break;
                }
            }
            if tokens.len() < len {
                tokens.push(background.draw(&mut rng).to_string());
                labels.push(0);
            }
        }
        sentences.push(AnnotatedSentence {
            sentence: Sentence::new(tokens)?,
            labels,
        });
    }
    Ok(AnnotatedCorpus::new(k, sentences)?.with_note(format!("synthetic seed={}", spec.seed)))
}

/// True when no `I-X` follows anything but `B-X` or `I-X`.
pub fn is_valid_bio(tag_set: &TagSet, labels: &[usize]) -> bool {
    let mut prev: Option<usize> = None;
    for &y in labels {
        if tag_set.kind_of(y) == BioKind::I {
            let ok = prev.is_some_and(|p| {
                tag_set.kind_of(p) != BioKind::O && tag_set.type_of(p) == tag_set.type_of(y)
            });
            if !ok {
                return false;
            }
        }
        prev = Some(y);
    }
    true
}
