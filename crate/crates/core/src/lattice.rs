//! Exact inference over linear-chain CRF potential tables.
//!
//! A [`Lattice`] holds log-potentials: `T×L` emission scores, an `L×L`
//! transition matrix and explicit start/stop vectors. The score of a path
//! `y` is `start[y_0] + Σ_t emission[t][y_t] + Σ_t transition[y_{t-1}][y_t] + stop[y_{T-1}]`.
//!
//! Hard constraints are expressed by adding [`FORBIDDEN`] to a score rather
//! than using `-inf`, which keeps every difference of log-values finite.

use crate::error::{Error, Result};
use crate::tagspace::{BioKind, TagSet};

/// Log-potential marking a forbidden label or transition.
pub const FORBIDDEN: f64 = -1e30;

/// Stable `ln Σ exp(x)`; `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Per-sentence table of log-potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    len: usize,
    labels: usize,
    emission: Vec<f64>,
    transition: Vec<f64>,
    start: Vec<f64>,
    stop: Vec<f64>,
}

impl Lattice {
    /// All-zero lattice of `len` tokens over `labels` labels.
    pub fn zeros(len: usize, labels: usize) -> Result<Self> {
        if len == 0 || labels == 0 {
            return Err(Error::Dimension(format!(
                "lattice needs T >= 1 and L >= 1, got T={len}, L={labels}"
            )));
        }
        Ok(Lattice {
            len,
            labels,
            emission: vec![0.0; len * labels],
            transition: vec![0.0; labels * labels],
            start: vec![0.0; labels],
            stop: vec![0.0; labels],
        })
    }

    pub fn from_parts(
        len: usize,
        labels: usize,
        emission: Vec<f64>,
        transition: Vec<f64>,
        start: Vec<f64>,
        stop: Vec<f64>,
    ) -> Result<Self> {
        let mut lat = Lattice::zeros(len, labels)?;
        if emission.len() != len * labels
            || transition.len() != labels * labels
            || start.len() != labels
            || stop.len() != labels
        {
            return Err(Error::Dimension(format!(
                "lattice parts do not match T={len}, L={labels}"
            )));
        }
        if emission
            .iter()
            .chain(&transition)
            .chain(&start)
            .chain(&stop)
            .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(Error::InvalidArgument(
                "lattice scores must not be NaN or +inf".into(),
            ));
        }
        lat.emission = emission;
        lat.transition = transition;
        lat.start = start;
        lat.stop = stop;
        Ok(lat)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn emission(&self, t: usize, i: usize) -> f64 {
        self.emission[t * self.labels + i]
    }

    pub fn emission_row(&self, t: usize) -> &[f64] {
        &self.emission[t * self.labels..(t + 1) * self.labels]
    }

    pub fn emission_row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.emission[t * self.labels..(t + 1) * self.labels]
    }

    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.labels + j]
    }

    pub fn set_transition(&mut self, i: usize, j: usize, v: f64) {
        self.transition[i * self.labels + j] = v;
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn stop(&self) -> &[f64] {
        &self.stop
    }

    pub fn start_mut(&mut self) -> &mut [f64] {
        &mut self.start
    }

    pub fn stop_mut(&mut self) -> &mut [f64] {
        &mut self.stop
    }

    /// Every score multiplied by `factor` (temperature `τ` uses `1/τ`).
    pub fn scaled(&self, factor: f64) -> Lattice {
        let scale = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect();
        Lattice {
            len: self.len,
            labels: self.labels,
            emission: scale(&self.emission),
            transition: scale(&self.transition),
            start: scale(&self.start),
            stop: scale(&self.stop),
        }
    }

    /// Raw score of a complete label sequence.
    pub fn path_score(&self, path: &[usize]) -> Result<f64> {
        self.check_path(path)?;
        // Same association order as the forward recursion.
        let mut score = self.start[path[0]] + self.emission(0, path[0]);
        for t in 1..self.len {
            score = score + self.transition(path[t - 1], path[t]) + self.emission(t, path[t]);
        }
        Ok(score + self.stop[path[self.len - 1]])
    }

    /// Lattice whose disallowed labels carry [`FORBIDDEN`] emissions.
    pub fn constrained(&self, c: &LabelConstraint) -> Result<Lattice> {
        c.check(self.len, self.labels)?;
        let mut out = self.clone();
        let mut allowed = vec![false; self.labels];
        for t in 0..self.len {
            allowed.iter_mut().for_each(|a| *a = false);
            for &i in c.allowed(t) {
                allowed[i] = true;
            }
            for (i, e) in out.emission_row_mut(t).iter_mut().enumerate() {
                if !allowed[i] {
                    *e += FORBIDDEN;
                }
            }
        }
        Ok(out)
    }

    /// Lattice with position `t` restricted to `subset`.
    pub fn clamped(&self, t: usize, subset: &[usize]) -> Result<Lattice> {
        if t >= self.len {
            return Err(Error::Dimension(format!("position {t} >= T={}", self.len)));
        }
        if subset.is_empty() {
            return Err(Error::InvalidArgument("clamp set must be non-empty".into()));
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= self.labels) {
            return Err(Error::Dimension(format!(
                "label {bad} >= L={}",
                self.labels
            )));
        }
        let mut out = self.clone();
        let row = out.emission_row_mut(t);
        for (i, e) in row.iter_mut().enumerate() {
            if !subset.contains(&i) {
                *e += FORBIDDEN;
            }
        }
        Ok(out)
    }

    /// Forbids BIO-invalid starts and transitions: `I-X` may only follow
    /// `B-X` or `I-X`.
    pub fn with_bio_mask(&self, tag_set: &TagSet) -> Result<Lattice> {
        if tag_set.label_count() != self.labels {
            return Err(Error::Dimension(format!(
                "tag set `{}` has {} labels, lattice has {}",
                tag_set.id(),
                tag_set.label_count(),
                self.labels
            )));
        }
        let mut out = self.clone();
        for j in 0..self.labels {
            if tag_set.kind_of(j) != BioKind::I {
                continue;
            }
            out.start[j] += FORBIDDEN;
            let ty = tag_set.type_of(j);
            for i in 0..self.labels {
                if tag_set.kind_of(i) == BioKind::O || tag_set.type_of(i) != ty {
                    out.transition[i * self.labels + j] += FORBIDDEN;
                }
            }
        }
        Ok(out)
    }

    fn check_path(&self, path: &[usize]) -> Result<()> {
        if path.len() != self.len {
            return Err(Error::Dimension(format!(
                "path length {} != T={}",
                path.len(),
                self.len
            )));
        }
        if let Some(&bad) = path.iter().find(|&&i| i >= self.labels) {
            return Err(Error::Dimension(format!(
                "label {bad} >= L={}",
                self.labels
            )));
        }
        Ok(())
    }
}

/// Per-token sets of allowed labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelConstraint {
    allowed: Vec<Vec<usize>>,
}

impl LabelConstraint {
    pub fn new(allowed: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(t) = allowed.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!(
                "empty allowed-label set at position {t}"
            )));
        }
        let allowed = allowed
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        Ok(LabelConstraint { allowed })
    }

    /// Every label allowed everywhere.
    pub fn unconstrained(len: usize, labels: usize) -> Self {
        LabelConstraint {
            allowed: vec![(0..labels).collect(); len],
        }
    }

    /// A single label per position.
    pub fn from_path(path: &[usize]) -> Self {
        LabelConstraint {
            allowed: path.iter().map(|&i| vec![i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn allowed(&self, t: usize) -> &[usize] {
        &self.allowed[t]
    }

    /// The path when every position has exactly one allowed label.
    pub fn single_path(&self) -> Option<Vec<usize>> {
        self.allowed
            .iter()
            .map(|s| (s.len() == 1).then(|| s[0]))
            .collect()
    }

    fn check(&self, len: usize, labels: usize) -> Result<()> {
        if self.allowed.len() != len {
            return Err(Error::Dimension(format!(
                "constraint covers {} tokens, lattice has {len}",
                self.allowed.len()
            )));
        }
        if let Some(&bad) = self.allowed.iter().flatten().find(|&&i| i >= labels) {
            return Err(Error::Dimension(format!("label {bad} >= L={labels}")));
        }
        Ok(())
    }
}

/// Token-level posteriors `p(y_t = i | x)`, row-major `T×L`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    len: usize,
    labels: usize,
    probs: Vec<f64>,
}

impl MarginalTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let len = rows.len();
        let labels = rows.first().map_or(0, Vec::len);
        if len == 0 || labels == 0 || rows.iter().any(|r| r.len() != labels) {
            return Err(Error::Dimension(
                "marginal rows must be non-empty and equal length".into(),
            ));
        }
        Ok(MarginalTable {
            len,
            labels,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub(crate) fn from_raw(len: usize, labels: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), len * labels);
        MarginalTable { len, labels, probs }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.probs[t * self.labels + i]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.labels..(t + 1) * self.labels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Checks entries in `[0, 1]` and rows summing to one within `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        for t in 0..self.len {
            let row = self.row(t);
            if row.iter().any(|&p| !(-tol..=1.0 + tol).contains(&p)) {
                return Err(Error::InvalidArgument(format!(
                    "row {t} has entries outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidArgument(format!("row {t} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// `p(y_t = i, y_{t+1} = j | x)`, stored `(T-1)×L×L`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMarginals {
    len: usize,
    labels: usize,
    probs: Vec<f64>,
}

impl PairMarginals {
    /// Number of adjacent position pairs (`T - 1`).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.probs[(t * self.labels + i) * self.labels + j]
    }

    /// The `L×L` slice for positions `(t, t+1)`.
    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.labels * self.labels;
        &self.probs[t * n..(t + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Forward/backward tables and everything derived from them.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub log_z: f64,
    pub node: MarginalTable,
    pub pair: PairMarginals,
}

fn forward(lat: &Lattice) -> (Vec<f64>, f64) {
    let (n, l) = (lat.len, lat.labels);
    let mut alpha = vec![0.0; n * l];
    for j in 0..l {
        alpha[j] = lat.start[j] + lat.emission[j];
    }
    let mut scratch = vec![0.0; l];
    for t in 1..n {
        for j in 0..l {
            for i in 0..l {
                scratch[i] = alpha[(t - 1) * l + i] + lat.transition[i * l + j];
            }
            alpha[t * l + j] = log_sum_exp(&scratch) + lat.emission[t * l + j];
        }
    }
    for j in 0..l {
        scratch[j] = alpha[(n - 1) * l + j] + lat.stop[j];
    }
    (alpha, log_sum_exp(&scratch))
}

fn backward(lat: &Lattice) -> Vec<f64> {
    let (n, l) = (lat.len, lat.labels);
    let mut beta = vec![0.0; n * l];
    beta[(n - 1) * l..].copy_from_slice(&lat.stop);
    let mut scratch = vec![0.0; l];
    for t in (0..n - 1).rev() {
        for i in 0..l {
            for j in 0..l {
                scratch[j] = lat.transition[i * l + j]
                    + lat.emission[(t + 1) * l + j]
                    + beta[(t + 1) * l + j];
            }
            beta[t * l + i] = log_sum_exp(&scratch);
        }
    }
    beta
}

/// `log Z`: log-sum of exp(path score) over all `L^T` paths.
pub fn log_partition(lat: &Lattice) -> f64 {
    forward(lat).1
}

/// Log-sum over the paths allowed by `c`.
pub fn constrained_log_partition(lat: &Lattice, c: &LabelConstraint) -> Result<f64> {
    Ok(log_partition(&lat.constrained(c)?))
}

/// Node and pairwise marginals in one forward-backward pass.
pub fn posterior(lat: &Lattice) -> Posterior {
    let (n, l) = (lat.len, lat.labels);
    let (alpha, log_z) = forward(lat);
    let beta = backward(lat);
    let mut node: Vec<f64> = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a + b - log_z).exp())
        .collect();
    for row in node.chunks_mut(l) {
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
    }
    let mut pair = vec![0.0; n.saturating_sub(1) * l * l];
    for t in 0..n.saturating_sub(1) {
        for i in 0..l {
            let a = alpha[t * l + i];
            for j in 0..l {
                let s = a
                    + lat.transition[i * l + j]
                    + lat.emission[(t + 1) * l + j]
                    + beta[(t + 1) * l + j];
                pair[(t * l + i) * l + j] = (s - log_z).exp();
            }
        }
    }
    Posterior {
        log_z,
        node: MarginalTable::from_raw(n, l, node),
        pair: PairMarginals {
            len: n.saturating_sub(1),
            labels: l,
            probs: pair,
        },
    }
}

/// `p(y_t = i | x)` by forward-backward.
pub fn node_marginals(lat: &Lattice) -> MarginalTable {
    posterior(lat).node
}

/// Node marginals conditioned on `y_t ∈ subset`.
pub fn clamped_node_marginals(lat: &Lattice, t: usize, subset: &[usize]) -> Result<MarginalTable> {
    Ok(node_marginals(&lat.clamped(t, subset)?))
}

/// `p(y_t = i, y_{t+1} = j | x)`; needs `T ≥ 2`.
pub fn pairwise_marginals(lat: &Lattice) -> Result<PairMarginals> {
    if lat.len < 2 {
        return Err(Error::Dimension("pairwise marginals need T >= 2".into()));
    }
    Ok(posterior(lat).pair)
}

/// Highest-scoring path and its raw score. Ties go to the smallest label
/// index, both at each backpointer and at the final position.
pub fn viterbi(lat: &Lattice) -> (Vec<usize>, f64) {
    let (n, l) = (lat.len, lat.labels);
    let mut delta: Vec<f64> = (0..l).map(|j| lat.start[j] + lat.emission[j]).collect();
    let mut back = vec![0usize; n * l];
    let mut next = vec![0.0; l];
    for t in 1..n {
        for j in 0..l {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, d) in delta.iter().enumerate() {
                let s = d + lat.transition[i * l + j];
                if s > best.1 {
                    best = (i, s);
                }
            }
            back[t * l + j] = best.0;
            next[j] = best.1 + lat.emission[t * l + j];
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = (0, f64::NEG_INFINITY);
    for (j, d) in delta.iter().enumerate() {
        let s = d + lat.stop[j];
        if s > last.1 {
            last = (j, s);
        }
    }
    let mut path = vec![0usize; n];
    path[n - 1] = last.0;
    for t in (1..n).rev() {
        path[t - 1] = back[t * l + path[t]];
    }
    (path, last.1)
}

/// `E[W·1{y_t = i}]` and `E[W·1{y_t = i, y_{t+1} = j}]` for the additive
/// path weight `W = Σ_t w[t][y_t]`, from one forward-backward pass over an
/// expectation semiring. `w` is `T×L` and must be non-negative.
pub fn weighted_expectations(lat: &Lattice, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, l) = (lat.len, lat.labels);
    if w.len() != n * l {
        return Err(Error::Dimension(format!(
            "weights have {} entries, expected {}",
            w.len(),
            n * l
        )));
    }
    if let Some(bad) = w.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "position weights must be finite and >= 0, got {bad}"
        )));
    }
    let (alpha, log_z) = forward(lat);
    let beta = backward(lat);
    let log_w: Vec<f64> = w.iter().map(|v| v.ln()).collect();

    let mut alpha_w = vec![f64::NEG_INFINITY; n * l];
    for j in 0..l {
        alpha_w[j] = alpha[j] + log_w[j];
    }
    let mut scratch = vec![0.0; l];
    for t in 1..n {
        for j in 0..l {
            for i in 0..l {
                scratch[i] = alpha_w[(t - 1) * l + i] + lat.transition[i * l + j];
            }
            let carried = log_sum_exp(&scratch) + lat.emission[t * l + j];
            alpha_w[t * l + j] = log_sum_exp(&[carried, alpha[t * l + j] + log_w[t * l + j]]);
        }
    }
    let mut beta_w = vec![f64::NEG_INFINITY; n * l];
    for t in (0..n - 1).rev() {
        for i in 0..l {
            for j in 0..l {
                let k = (t + 1) * l + j;
                let tail = log_sum_exp(&[log_w[k] + beta[k], beta_w[k]]);
                scratch[j] = lat.transition[i * l + j] + lat.emission[k] + tail;
            }
            beta_w[t * l + i] = log_sum_exp(&scratch);
        }
    }

    let node: Vec<f64> = (0..n * l)
        .map(|k| log_sum_exp(&[alpha_w[k] + beta[k], alpha[k] + beta_w[k]]) - log_z)
        .map(f64::exp)
        .collect();
    let mut pair = vec![0.0; n.saturating_sub(1) * l * l];
    for t in 0..n.saturating_sub(1) {
        for i in 0..l {
            let (a, aw) = (alpha[t * l + i], alpha_w[t * l + i]);
            for j in 0..l {
                let k = (t + 1) * l + j;
                let edge = lat.transition[i * l + j] + lat.emission[k];
                let tail = log_sum_exp(&[log_w[k] + beta[k], beta_w[k]]);
                let v = log_sum_exp(&[aw + beta[k], a + tail]) + edge - log_z;
                pair[(t * l + i) * l + j] = v.exp();
            }
        }
    }
    Ok((node, pair))
}

/// Exhaustive-enumeration references for the dynamic programs above.
pub mod brute_force {
    use super::*;

    /// Largest number of paths enumerated.
    pub const MAX_PATHS: usize = 1 << 20;

    fn paths(lat: &Lattice) -> Result<impl Iterator<Item = Vec<usize>> + '_> {
        let too_large = Error::TooLarge {
            labels: lat.labels,
            len: lat.len,
        };
        let total = u32::try_from(lat.len)
            .ok()
            .and_then(|n| lat.labels.checked_pow(n))
            .ok_or(too_large)?;
        if total > MAX_PATHS {
            return Err(Error::TooLarge {
                labels: lat.labels,
                len: lat.len,
            });
        }
        let (n, l) = (lat.len, lat.labels);
        Ok((0..total).map(move |mut code| {
            // first position is the most significant digit: lexicographic order
            let mut path = vec![0; n];
            for t in (0..n).rev() {
                path[t] = code % l;
                code /= l;
            }
            path
        }))
    }

    fn allowed(c: Option<&LabelConstraint>, path: &[usize]) -> bool {
        c.is_none_or(|c| {
            path.iter()
                .enumerate()
                .all(|(t, y)| c.allowed(t).contains(y))
        })
    }

    /// Path scores of every path compatible with `c`.
    fn scored(lat: &Lattice, c: Option<&LabelConstraint>) -> Result<Vec<(Vec<usize>, f64)>> {
        if let Some(c) = c {
            c.check(lat.len, lat.labels)?;
        }
        Ok(paths(lat)?
            .filter(|p| allowed(c, p))
            .map(|p| {
                let s = lat.path_score(&p).expect("valid path");
                (p, s)
            })
            .collect())
    }

    pub fn log_partition(lat: &Lattice) -> Result<f64> {
        let scores: Vec<f64> = scored(lat, None)?.into_iter().map(|(_, s)| s).collect();
        Ok(log_sum_exp(&scores))
    }

    pub fn constrained_log_partition(lat: &Lattice, c: &LabelConstraint) -> Result<f64> {
        let scores: Vec<f64> = scored(lat, Some(c))?.into_iter().map(|(_, s)| s).collect();
        Ok(log_sum_exp(&scores))
    }

    /// Enumeration counterpart of [`super::weighted_expectations`].
    pub fn weighted_expectations(lat: &Lattice, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, l) = (lat.len, lat.labels);
        let all = scored(lat, None)?;
        let log_z = log_sum_exp(&all.iter().map(|(_, s)| *s).collect::<Vec<_>>());
        let mut node = vec![0.0; n * l];
        let mut pair = vec![0.0; n.saturating_sub(1) * l * l];
        for (p, s) in &all {
            let weight: f64 = p.iter().enumerate().map(|(t, &y)| w[t * l + y]).sum();
            let mass = (s - log_z).exp() * weight;
            for (t, &y) in p.iter().enumerate() {
                node[t * l + y] += mass;
            }
            for (t, y) in p.windows(2).enumerate() {
                pair[(t * l + y[0]) * l + y[1]] += mass;
            }
        }
        Ok((node, pair))
    }

    /// Node marginals, optionally restricted to the paths allowed by `c`.
    pub fn node_marginals(lat: &Lattice, c: Option<&LabelConstraint>) -> Result<MarginalTable> {
        let all = scored(lat, c)?;
        let log_z = log_sum_exp(&all.iter().map(|(_, s)| *s).collect::<Vec<_>>());
        let mut probs = vec![0.0; lat.len * lat.labels];
        for (p, s) in &all {
            let w = (s - log_z).exp();
            for (t, &y) in p.iter().enumerate() {
                probs[t * lat.labels + y] += w;
            }
        }
        Ok(MarginalTable::from_raw(lat.len, lat.labels, probs))
    }

    pub fn pairwise_marginals(lat: &Lattice) -> Result<PairMarginals> {
        if lat.len < 2 {
            return Err(Error::Dimension("pairwise marginals need T >= 2".into()));
        }
        let all = scored(lat, None)?;
        let log_z = log_sum_exp(&all.iter().map(|(_, s)| *s).collect::<Vec<_>>());
        let l = lat.labels;
        let mut probs = vec![0.0; (lat.len - 1) * l * l];
        for (p, s) in &all {
            let w = (s - log_z).exp();
            for t in 0..lat.len - 1 {
                probs[(t * l + p[t]) * l + p[t + 1]] += w;
            }
        }
        Ok(PairMarginals {
            len: lat.len - 1,
            labels: l,
            probs,
        })
    }

    /// Best path; among equal scores the lexicographically smallest.
    pub fn viterbi(lat: &Lattice) -> Result<(Vec<usize>, f64)> {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for (p, s) in scored(lat, None)? {
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((p, s));
            }
        }
        Ok(best.expect("at least one path"))
    }
}
