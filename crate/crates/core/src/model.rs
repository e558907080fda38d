//! Model weights, gradients and the model file format.
//!
//! The file is a canonical text container:
//!
//! ```text
//! TAGUNIFY-MODEL
//! format 1
//! kind crf
//! hierarchy 3f09a1c2b7d4e5f6
//! tagset unified PERSON,GPE
//! hash-seed 8386112036597106297
//! hash-bits 22
//! start <L weights>
//! stop <L weights>
//! transition
//! <L rows of L weights>
//! emission <rows>
//! <feature id> <L weights>      (ascending feature id)
//! end
//! ```
//!
//! Weights are written in Rust's shortest round-trip notation, so
//! save → load → save is byte-identical and load → save → load is
//! bit-identical.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rustc_hash::FxHashMap;

use crate::emissions::HASH_BITS;
use crate::error::{Error, Result};
use crate::tagspace::TagSet;

pub const MAGIC: &str = "TAGUNIFY-MODEL";
pub const FORMAT_VERSION: u32 = 1;

/// Local models score tokens independently (per-token softmax over
/// emissions); CRF models add transition, start and stop scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Crf,
    Local,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Crf => "crf",
            ModelKind::Local => "local",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crf" => Ok(ModelKind::Crf),
            "local" => Ok(ModelKind::Local),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

/// Address of a single weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamId {
    Emission(u32, usize),
    Transition(usize, usize),
    Start(usize),
    Stop(usize),
}

/// Sparse emission rows plus dense structural weights. Used both for model
/// parameters and for gradients of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    labels: usize,
    emission: FxHashMap<u32, Vec<f64>>,
    transition: Vec<f64>,
    start: Vec<f64>,
    stop: Vec<f64>,
}

impl Weights {
    pub fn zeros(labels: usize) -> Self {
        Weights {
            labels,
            emission: FxHashMap::default(),
            transition: vec![0.0; labels * labels],
            start: vec![0.0; labels],
            stop: vec![0.0; labels],
        }
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn emission_row(&self, feature: u32) -> Option<&[f64]> {
        self.emission.get(&feature).map(Vec::as_slice)
    }

    pub fn emission_row_mut(&mut self, feature: u32) -> &mut [f64] {
        let l = self.labels;
        self.emission.entry(feature).or_insert_with(|| vec![0.0; l])
    }

    /// Emission rows sorted by feature id.
    pub fn emission_rows(&self) -> Vec<(u32, &[f64])> {
        let mut rows: Vec<(u32, &[f64])> = self
            .emission
            .iter()
            .map(|(f, r)| (*f, r.as_slice()))
            .collect();
        rows.sort_unstable_by_key(|(f, _)| *f);
        rows
    }

    pub fn emission_row_count(&self) -> usize {
        self.emission.len()
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn transition_mut(&mut self) -> &mut [f64] {
        &mut self.transition
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn start_mut(&mut self) -> &mut [f64] {
        &mut self.start
    }

    pub fn stop(&self) -> &[f64] {
        &self.stop
    }

    pub fn stop_mut(&mut self) -> &mut [f64] {
        &mut self.stop
    }

    pub fn get(&self, p: ParamId) -> f64 {
        let l = self.labels;
        match p {
            ParamId::Emission(f, i) => self.emission.get(&f).map_or(0.0, |r| r[i]),
            ParamId::Transition(i, j) => self.transition[i * l + j],
            ParamId::Start(i) => self.start[i],
            ParamId::Stop(i) => self.stop[i],
        }
    }

    pub fn set(&mut self, p: ParamId, v: f64) {
        let l = self.labels;
        match p {
            ParamId::Emission(f, i) => self.emission_row_mut(f)[i] = v,
            ParamId::Transition(i, j) => self.transition[i * l + j] = v,
            ParamId::Start(i) => self.start[i] = v,
            ParamId::Stop(i) => self.stop[i] = v,
        }
    }

    /// Every addressable weight that is stored, in a fixed order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let l = self.labels;
        let mut ids: Vec<ParamId> = self
            .emission_rows()
            .into_iter()
            .flat_map(|(f, _)| (0..l).map(move |i| ParamId::Emission(f, i)))
            .collect();
        for i in 0..l {
            for j in 0..l {
                ids.push(ParamId::Transition(i, j));
            }
        }
        ids.extend((0..l).map(ParamId::Start));
        ids.extend((0..l).map(ParamId::Stop));
        ids
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        assert_eq!(self.labels, other.labels, "label dimension mismatch");
        for (f, row) in &other.emission {
            let mine = self.emission_row_mut(*f);
            mine.iter_mut().zip(row).for_each(|(a, b)| *a += scale * b);
        }
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(a, b)| *a += scale * b);
        add(&mut self.transition, &other.transition);
        add(&mut self.start, &other.start);
        add(&mut self.stop, &other.stop);
    }

    pub fn scale(&mut self, factor: f64) {
        self.emission
            .values_mut()
            .flatten()
            .chain(self.transition.iter_mut())
            .chain(self.start.iter_mut())
            .chain(self.stop.iter_mut())
            .for_each(|v| *v *= factor);
    }

    /// Largest absolute coordinate difference; missing rows count as zero.
    pub fn max_abs_diff(&self, other: &Weights) -> f64 {
        let mut worst: f64 = 0.0;
        let zeros = vec![0.0; self.labels];
        for f in self.emission.keys().chain(other.emission.keys()) {
            let a = self.emission.get(f).unwrap_or(&zeros);
            let b = other.emission.get(f).unwrap_or(&zeros);
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        for (a, b) in [
            (&self.transition, &other.transition),
            (&self.start, &other.start),
            (&self.stop, &other.stop),
        ] {
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.emission
            .values()
            .flatten()
            .chain(&self.transition)
            .chain(&self.start)
            .chain(&self.stop)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.emission
            .values()
            .flatten()
            .chain(&self.transition)
            .chain(&self.start)
            .chain(&self.stop)
            .all(|v| v.is_finite())
    }

    /// Keys of the stored emission rows.
    pub fn features(&self) -> impl Iterator<Item = u32> + '_ {
        self.emission.keys().copied()
    }
}

/// Gradients share the weight layout.
pub type Gradient = Weights;

/// Feature weights, transition weights and the tag space they score.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    kind: ModelKind,
    tag_set: TagSet,
    hierarchy_id: String,
    hash_seed: u64,
    weights: Weights,
}

impl Model {
    pub fn new(
        kind: ModelKind,
        tag_set: TagSet,
        hierarchy_id: impl Into<String>,
        hash_seed: u64,
    ) -> Self {
        let labels = tag_set.label_count();
        Model {
            kind,
            tag_set,
            hierarchy_id: hierarchy_id.into(),
            hash_seed,
            weights: Weights::zeros(labels),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn tag_set(&self) -> &TagSet {
        &self.tag_set
    }

    pub fn hierarchy_id(&self) -> &str {
        &self.hierarchy_id
    }

    pub fn hash_seed(&self) -> u64 {
        self.hash_seed
    }

    pub fn label_count(&self) -> usize {
        self.tag_set.label_count()
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Weights {
        &mut self.weights
    }

    pub fn emission_row(&self, feature: u32) -> Option<&[f64]> {
        self.weights.emission_row(feature)
    }

    pub fn transition(&self) -> &[f64] {
        self.weights.transition()
    }

    pub fn start(&self) -> &[f64] {
        self.weights.start()
    }

    pub fn stop(&self) -> &[f64] {
        self.weights.stop()
    }

    pub fn param(&self, p: ParamId) -> f64 {
        self.weights.get(p)
    }

    pub fn set_param(&mut self, p: ParamId, v: f64) {
        self.weights.set(p, v);
    }

    /// `w += scale · other` for a model over the same tag space.
    pub fn add_weights(&mut self, other: &Model, scale: f64) -> Result<()> {
        if !self.tag_set.same_as(&other.tag_set) {
            return Err(Error::Dimension(
                "models are bound to different tag sets".into(),
            ));
        }
        self.weights.add_scaled(&other.weights, scale);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &self.weights;
        let l = self.label_count();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "format {FORMAT_VERSION}").unwrap();
        writeln!(out, "kind {}", self.kind.as_str()).unwrap();
        writeln!(out, "hierarchy {}", self.hierarchy_id).unwrap();
        writeln!(
            out,
            "tagset {} {}",
            self.tag_set.id(),
            self.tag_set.types().join(",")
        )
        .unwrap();
        writeln!(out, "hash-seed {}", self.hash_seed).unwrap();
        writeln!(out, "hash-bits {HASH_BITS}").unwrap();
        writeln!(out, "start {}", join(w.start())).unwrap();
        writeln!(out, "stop {}", join(w.stop())).unwrap();
        writeln!(out, "transition").unwrap();
        for row in w.transition().chunks(l) {
            writeln!(out, "{}", join(row)).unwrap();
        }
        let rows = w.emission_rows();
        writeln!(out, "emission {}", rows.len()).unwrap();
        for (f, row) in rows {
            writeln!(out, "{f} {}", join(row)).unwrap();
        }
        writeln!(out, "end").unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        ModelReader::new(text).read()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Format { line, message, .. } => Error::Format {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }
}

struct ModelReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> ModelReader<'a> {
    fn new(text: &'a str) -> Self {
        ModelReader {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: "<model>".into(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((n, l)) => {
                self.line = n + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of model file")),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ if line == key => Ok(""),
            _ => Err(self.err(format!("expected `{key}`"))),
        }
    }

    fn floats(&self, s: &str, n: usize) -> Result<Vec<f64>> {
        let v = s
            .split_ascii_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.err(format!("bad weight: {e}")))?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} weights, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.err("non-finite weight"));
        }
        Ok(v)
    }

    fn read(mut self) -> Result<Model> {
        if self.next()? != MAGIC {
            return Err(self.err(format!("missing `{MAGIC}` header")));
        }
        let version: u32 = self
            .keyed("format")?
            .parse()
            .map_err(|_| self.err("bad format version"))?;
        if version != FORMAT_VERSION {
            return Err(self.err(format!("unsupported format version {version}")));
        }
        let kind: ModelKind = self
            .keyed("kind")?
            .parse()
            .map_err(|e: Error| self.err(e.to_string()))?;
        let hierarchy_id = self.keyed("hierarchy")?.to_string();
        let tagset = self.keyed("tagset")?;
        let (id, types) = tagset.split_once(' ').unwrap_or((tagset, ""));
        let types: Vec<&str> = types.split(',').filter(|t| !t.is_empty()).collect();
        let tag_set = TagSet::new(id, types).map_err(|e| self.err(e.to_string()))?;
        let hash_seed: u64 = self
            .keyed("hash-seed")?
            .parse()
            .map_err(|_| self.err("bad hash seed"))?;
        let bits: u32 = self
            .keyed("hash-bits")?
            .parse()
            .map_err(|_| self.err("bad hash bits"))?;
        if bits != HASH_BITS {
            return Err(self.err(format!("model uses {bits} hash bits, expected {HASH_BITS}")));
        }
        let l = tag_set.label_count();
        let mut model = Model::new(kind, tag_set, hierarchy_id, hash_seed);
        let start = self.keyed("start")?;
        model.weights.start = self.floats(start, l)?;
        let stop = self.keyed("stop")?;
        model.weights.stop = self.floats(stop, l)?;
        self.keyed("transition")?;
        let mut transition = Vec::with_capacity(l * l);
        for _ in 0..l {
            let row = self.next()?;
            transition.extend(self.floats(row, l)?);
        }
        model.weights.transition = transition;
        let rows: usize = self
            .keyed("emission")?
            .parse()
            .map_err(|_| self.err("bad emission row count"))?;
        let mut last: Option<u32> = None;
        for _ in 0..rows {
            let line = self.next()?;
            let (f, rest) = line
                .split_once(' ')
                .ok_or_else(|| self.err("bad emission row"))?;
            let f: u32 = f.parse().map_err(|_| self.err("bad feature id"))?;
            if f >= (1 << HASH_BITS) || last.is_some_and(|p| p >= f) {
                return Err(self.err("feature ids must be ascending and in range"));
            }
            last = Some(f);
            let row = self.floats(rest, l)?;
            model.weights.emission.insert(f, row);
        }
        if self.next()? != "end" {
            return Err(self.err("expected `end`"));
        }
        Ok(model)
    }
}
