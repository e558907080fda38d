//! Log-linear emission scorer: hashed surface features per token, lattice
//! construction from a [`Model`], and expected feature counts.

use std::hash::Hasher;

use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, MarginalTable, PairMarginals};
use crate::model::{Gradient, Model, ModelKind};

/// Width of the hashed feature space.
pub const HASH_BITS: u32 = 22;

/// Seed used unless a model is created with another one.
pub const DEFAULT_HASH_SEED: u64 = 0x7461_6775_6e69_6679;

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

/// A tokenized sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidArgument(
                "sentence must have at least one token".into(),
            ));
        }
        if tokens.iter().any(String::is_empty) {
            return Err(Error::InvalidArgument("tokens must be non-empty".into()));
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Collapses runs of the same character class: `Paris` → `Aa`, `F-16` → `A-0`.
pub fn word_shape(token: &str) -> String {
    let mut shape = String::new();
    let mut last = None;
    for c in token.chars() {
        let class = if c.is_uppercase() {
            'A'
        } else if c.is_lowercase() {
            'a'
        } else if c.is_numeric() {
            '0'
        } else {
            c
        };
        if last != Some(class) {
            shape.push(class);
            last = Some(class);
        }
    }
    shape
}

fn affixes(lower: &str) -> (Vec<String>, Vec<String>) {
    let chars: Vec<char> = lower.chars().collect();
    let mut pre = Vec::new();
    let mut suf = Vec::new();
    for n in 1..=3.min(chars.len()) {
        pre.push(chars[..n].iter().collect());
        suf.push(chars[chars.len() - n..].iter().collect());
    }
    (pre, suf)
}

/// Human-readable features of token `t`.
pub fn feature_strings(s: &Sentence, t: usize) -> Vec<String> {
    assert!(t < s.len(), "position {t} out of range");
    let token = &s.tokens[t];
    let lower = token.to_lowercase();
    let mut out = vec![
        "bias".to_string(),
        format!("word={lower}"),
        format!("shape={}", word_shape(token)),
    ];
    let (pre, suf) = affixes(&lower);
    for (n, p) in pre.iter().enumerate() {
        out.push(format!("pre{}={p}", n + 1));
    }
    for (n, p) in suf.iter().enumerate() {
        out.push(format!("suf{}={p}", n + 1));
    }
    let neighbor = |offset: isize| -> String {
        let pos = t as isize + offset;
        if pos < 0 {
            BOS.to_string()
        } else if pos as usize >= s.len() {
            EOS.to_string()
        } else {
            s.tokens[pos as usize].to_lowercase()
        }
    };
    out.push(format!("prev1={}", neighbor(-1)));
    out.push(format!("prev2={}", neighbor(-2)));
    out.push(format!("next1={}", neighbor(1)));
    out.push(format!("next2={}", neighbor(2)));
    out
}

/// Bucket of a feature string in the hashed space.
pub fn hash_feature(feature: &str, seed: u64) -> u32 {
    let mut h = XxHash64::with_seed(seed);
    h.write(feature.as_bytes());
    (h.finish() & ((1u64 << HASH_BITS) - 1)) as u32
}

/// Sorted, de-duplicated feature ids of token `t`.
pub fn extract_features(s: &Sentence, t: usize, seed: u64) -> Vec<u32> {
    let mut ids: Vec<u32> = feature_strings(s, t)
        .iter()
        .map(|f| hash_feature(f, seed))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// A sentence with its per-token feature ids precomputed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Featurized {
    features: Vec<Vec<u32>>,
}

impl Featurized {
    pub fn new(s: &Sentence, seed: u64) -> Self {
        Featurized {
            features: (0..s.len()).map(|t| extract_features(s, t, seed)).collect(),
        }
    }

    /// Builds directly from feature id lists (one per token).
    pub fn from_ids(features: Vec<Vec<u32>>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument(
                "featurized sentence must be non-empty".into(),
            ));
        }
        Ok(Featurized { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn at(&self, t: usize) -> &[u32] {
        &self.features[t]
    }
}

/// Emission scores `Σ_f w(f, i)` for every token, row-major `T×L`.
pub fn emission_scores(m: &Model, s: &Featurized) -> Vec<f64> {
    let l = m.label_count();
    let mut out = vec![0.0; s.len() * l];
    for t in 0..s.len() {
        let row = &mut out[t * l..(t + 1) * l];
        for f in s.at(t) {
            if let Some(w) = m.emission_row(*f) {
                row.iter_mut().zip(w).for_each(|(r, w)| *r += w);
            }
        }
    }
    out
}

/// Lattice of a sentence under `m`. Local models contribute no
/// transition, start or stop scores.
pub fn score_lattice(m: &Model, s: &Featurized) -> Lattice {
    let l = m.label_count();
    let emission = emission_scores(m, s);
    let (transition, start, stop) = match m.kind() {
        ModelKind::Crf => (
            m.transition().to_vec(),
            m.start().to_vec(),
            m.stop().to_vec(),
        ),
        ModelKind::Local => (vec![0.0; l * l], vec![0.0; l], vec![0.0; l]),
    };
    Lattice::from_parts(s.len(), l, emission, transition, start, stop)
        .expect("model weights are finite and dimensions agree")
}

/// Adds `scale · E[counts]` to `grad`, where the expectation uses the given
/// node weights (`T×L`) and optional pair weights (`(T-1)×L×L`). The
/// weights need not be normalized.
pub(crate) fn accumulate_counts(
    grad: &mut Gradient,
    kind: ModelKind,
    s: &Featurized,
    node: &[f64],
    pair: Option<&[f64]>,
    scale: f64,
) {
    let l = grad.label_count();
    let n = s.len();
    for t in 0..n {
        let row = &node[t * l..(t + 1) * l];
        for &f in s.at(t) {
            let g = grad.emission_row_mut(f);
            g.iter_mut().zip(row).for_each(|(g, p)| *g += scale * p);
        }
    }
    if kind == ModelKind::Crf {
        for i in 0..l {
            grad.start_mut()[i] += scale * node[i];
            grad.stop_mut()[i] += scale * node[(n - 1) * l + i];
        }
        if let Some(pair) = pair {
            let tr = grad.transition_mut();
            for slice in pair.chunks_exact(l * l) {
                tr.iter_mut().zip(slice).for_each(|(g, p)| *g += scale * p);
            }
        }
    }
}

/// `E[count(f, i)] = Σ_t p_{t,i}·[f active at t]`, transition expectations
/// from the pairwise marginals, start/stop from the first and last rows.
pub fn expected_feature_counts(
    m: &Model,
    s: &Featurized,
    marg: &MarginalTable,
    pair: Option<&PairMarginals>,
) -> Result<Gradient> {
    let l = m.label_count();
    if marg.len() != s.len() || marg.labels() != l {
        return Err(Error::Dimension(format!(
            "marginals are {}x{}, expected {}x{l}",
            marg.len(),
            marg.labels(),
            s.len()
        )));
    }
    if let Some(p) = pair {
        if p.len() + 1 != s.len() || p.labels() != l {
            return Err(Error::Dimension(
                "pairwise marginals do not match the sentence".into(),
            ));
        }
    }
    let mut grad = Gradient::zeros(l);
    accumulate_counts(
        &mut grad,
        m.kind(),
        s,
        marg.as_slice(),
        pair.map(PairMarginals::as_slice),
        1.0,
    );
    Ok(grad)
}

/// Feature counts of one label sequence.
pub fn observed_counts(m: &Model, s: &Featurized, path: &[usize]) -> Result<Gradient> {
    let l = m.label_count();
    if path.len() != s.len() {
        return Err(Error::Dimension(format!(
            "label sequence has {} entries, sentence has {}",
            path.len(),
            s.len()
        )));
    }
    if let Some(&bad) = path.iter().find(|&&y| y >= l) {
        return Err(Error::Dimension(format!("label {bad} >= L={l}")));
    }
    let mut node = vec![0.0; s.len() * l];
    for (t, &y) in path.iter().enumerate() {
        node[t * l + y] = 1.0;
    }
    let mut pair = vec![0.0; s.len().saturating_sub(1) * l * l];
    for t in 1..path.len() {
        pair[((t - 1) * l + path[t - 1]) * l + path[t]] = 1.0;
    }
    let mut grad = Gradient::zeros(l);
    accumulate_counts(&mut grad, m.kind(), s, &node, Some(&pair), 1.0);
    Ok(grad)
}
