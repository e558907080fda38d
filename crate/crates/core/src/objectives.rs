//! Training losses and their analytic gradients.
//!
//! Every function returns the loss together with its gradient with respect
//! to the model weights (`∂loss/∂w`), in the [`Gradient`] layout.

use crate::emissions::{accumulate_counts, emission_scores, score_lattice, Featurized};
use crate::error::{Error, Result};
use crate::lattice::{self, log_sum_exp, LabelConstraint, MarginalTable};
use crate::model::{Gradient, Model, ModelKind};
use crate::tagspace::Projection;

/// Soft-target groups with less teacher mass than this are dropped from
/// the distillation loss and its gradient.
pub const MIN_TARGET_MASS: f64 = 1e-12;

/// A loss value with its weight gradient.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Gradient,
}

/// Teacher token distributions over the teacher's own labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftTargets {
    teacher: String,
    table: MarginalTable,
}

impl SoftTargets {
    pub fn new(teacher: impl Into<String>, table: MarginalTable) -> Result<Self> {
        table.check_normalized(1e-9)?;
        Ok(SoftTargets {
            teacher: teacher.into(),
            table,
        })
    }

    pub fn teacher(&self) -> &str {
        &self.teacher
    }

    pub fn table(&self) -> &MarginalTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Temperature and the student/distillation mixing weight.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub temperature: f64,
    pub alpha: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            temperature: 1.0,
            alpha: 0.5,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0,1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Unified-label constraint induced by labels observed under a source tag
/// set: token `t` may take any label in the image of its observed label.
pub fn partial_annotation(observed: &[usize], proj: &Projection) -> Result<LabelConstraint> {
    let groups = proj.group_count();
    if let Some(&bad) = observed.iter().find(|&&y| y >= groups) {
        return Err(Error::Dimension(format!(
            "label {bad} outside tag set `{}`",
            proj.source().id()
        )));
    }
    LabelConstraint::new(observed.iter().map(|&y| proj.image(y).to_vec()).collect())
}

/// Teacher soft targets at temperature `tau`: CRF node marginals, or the
/// per-token softmax for local models.
pub fn teacher_targets(teacher: &Model, s: &Featurized, tau: f64) -> Result<SoftTargets> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let table = model_marginals(teacher, s, tau);
    SoftTargets::new(teacher.tag_set().id(), table)
}

/// Token marginals of any model kind at temperature `tau`.
pub fn model_marginals(m: &Model, s: &Featurized, tau: f64) -> MarginalTable {
    match m.kind() {
        ModelKind::Crf => lattice::node_marginals(&score_lattice(m, s).scaled(1.0 / tau)),
        ModelKind::Local => {
            let l = m.label_count();
            let mut z = emission_scores(m, s);
            z.iter_mut().for_each(|v| *v /= tau);
            softmax_rows(&mut z, l);
            MarginalTable::from_raw(s.len(), l, z)
        }
    }
}

fn softmax_rows(z: &mut [f64], l: usize) {
    for row in z.chunks_mut(l) {
        let lse = log_sum_exp(row);
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
}

/// Negative log-likelihood of a complete label sequence:
/// `log Z − score(y)`, gradient `E[counts] − counts(y)`.
pub fn nll_loss(m: &Model, s: &Featurized, y: &[usize]) -> Result<LossGrad> {
    check_labels(m, s, y)?;
    constrained_nll(m, s, &LabelConstraint::from_path(y))
}

/// Negative log marginal likelihood of a partial annotation:
/// `log Z − log Z_c`, gradient `E[counts] − E_c[counts]`.
pub fn marginal_nll_loss(m: &Model, s: &Featurized, c: &LabelConstraint) -> Result<LossGrad> {
    if c.len() != s.len() {
        return Err(Error::Dimension(format!(
            "constraint covers {} tokens, sentence has {}",
            c.len(),
            s.len()
        )));
    }
    for t in 0..c.len() {
        if c.allowed(t).is_empty() {
            return Err(Error::InvalidArgument(format!(
                "empty constraint at position {t}"
            )));
        }
    }
    constrained_nll(m, s, c)
}

fn check_labels(m: &Model, s: &Featurized, y: &[usize]) -> Result<()> {
    if y.len() != s.len() {
        return Err(Error::Dimension(format!(
            "label sequence has {} entries, sentence has {}",
            y.len(),
            s.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&i| i >= m.label_count()) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {} labels",
            m.label_count()
        )));
    }
    Ok(())
}

fn constrained_nll(m: &Model, s: &Featurized, c: &LabelConstraint) -> Result<LossGrad> {
    let l = m.label_count();
    match m.kind() {
        ModelKind::Crf => {
            let lat = score_lattice(m, s);
            let post = lattice::posterior(&lat);
            let mut grad = Gradient::zeros(l);
            accumulate_counts(
                &mut grad,
                m.kind(),
                s,
                post.node.as_slice(),
                Some(post.pair.as_slice()),
                1.0,
            );
            let loss = if let Some(path) = c.single_path() {
                let observed = crate::emissions::observed_counts(m, s, &path)?;
                grad.add_scaled(&observed, -1.0);
                post.log_z - lat.path_score(&path)?
            } else {
                let clamped = lattice::posterior(&lat.constrained(c)?);
                accumulate_counts(
                    &mut grad,
                    m.kind(),
                    s,
                    clamped.node.as_slice(),
                    Some(clamped.pair.as_slice()),
                    -1.0,
                );
                post.log_z - clamped.log_z
            };
            Ok(LossGrad { loss, grad })
        }
        ModelKind::Local => {
            let mut z = emission_scores(m, s);
            let mut loss = 0.0;
            let mut sub = Vec::with_capacity(l);
            for t in 0..s.len() {
                let row = &mut z[t * l..(t + 1) * l];
                let allowed = c.allowed(t);
                sub.clear();
                sub.extend(allowed.iter().map(|&i| row[i]));
                let (lse_all, lse_sub) = (log_sum_exp(row), log_sum_exp(&sub));
                loss += lse_all - lse_sub;
                // ∂/∂z_j = p_j − [j ∈ A]·p_j / P_A
                for (j, v) in row.iter_mut().enumerate() {
                    let p = (*v - lse_all).exp();
                    let inside = if allowed.contains(&j) {
                        (*v - lse_sub).exp()
                    } else {
                        0.0
                    };
                    *v = p - inside;
                }
            }
            let mut grad = Gradient::zeros(l);
            accumulate_counts(&mut grad, m.kind(), s, &z, None, 1.0);
            Ok(LossGrad { loss, grad })
        }
    }
}

fn check_targets(q: &SoftTargets, proj: &Projection, len: usize, labels: usize) -> Result<()> {
    if q.table().labels() != proj.group_count() {
        return Err(Error::Dimension(format!(
            "soft targets have {} labels, projection of `{}` has {}",
            q.table().labels(),
            proj.source().id(),
            proj.group_count()
        )));
    }
    if proj.unified_label_count() != labels {
        return Err(Error::Dimension(format!(
            "projection targets {} unified labels, student has {labels}",
            proj.unified_label_count()
        )));
    }
    if q.len() != len {
        return Err(Error::Dimension(format!(
            "soft targets cover {} tokens, sentence has {len}",
            q.len()
        )));
    }
    Ok(())
}

/// Distillation loss for per-token distributions,
/// `−Σ_t Σ_i q_{t,i} log Σ_{j ∈ proj(i)} p_{t,j}`.
///
/// `p` holds the student's softmax rows; the returned gradient is with
/// respect to the logits that produced them.
pub fn local_distill_loss(
    p: &MarginalTable,
    q: &SoftTargets,
    proj: &Projection,
) -> Result<(f64, Vec<f64>)> {
    let l = p.labels();
    check_targets(q, proj, p.len(), l)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p.len() * l];
    for t in 0..p.len() {
        let row = p.row(t);
        let g = &mut grad[t * l..(t + 1) * l];
        let mut mass = 0.0;
        for (i, &qi) in q.table().row(t).iter().enumerate() {
            if qi < MIN_TARGET_MASS {
                continue;
            }
            mass += qi;
            let image = proj.image(i);
            let group: f64 = image.iter().map(|&j| row[j]).sum();
            loss -= qi * group.ln();
            for &j in image {
                g[j] -= qi * row[j] / group;
            }
        }
        g.iter_mut().zip(row).for_each(|(g, p)| *g += mass * p);
    }
    Ok((loss, grad))
}

/// CRF distillation through node marginals. `P_{t,i}` sums the student's
/// node marginals over `proj(i)`; the gradient uses
/// `∇ log P_{t,i} = E[counts | y_t ∈ proj(i)] − E[counts]`, with every
/// lattice score divided by the temperature. All clamped expectations are
/// gathered in a single weighted forward-backward pass.
pub fn crf_distill_loss(
    m: &Model,
    s: &Featurized,
    q: &SoftTargets,
    proj: &Projection,
    cfg: &DistillConfig,
) -> Result<LossGrad> {
    cfg.validate()?;
    if m.kind() != ModelKind::Crf {
        return Err(Error::InvalidArgument(
            "crf_distill_loss needs a CRF student".into(),
        ));
    }
    let l = m.label_count();
    check_targets(q, proj, s.len(), l)?;
    let inv_tau = 1.0 / cfg.temperature;
    let lat = score_lattice(m, s).scaled(inv_tau);
    let post = lattice::posterior(&lat);

    // Σ_i q_{t,i}·E[counts | y_t ∈ proj(i)] summed over t equals E[W·counts]
    // for the path weight W = Σ_t w_t(y_t), w_t(j) = q_{t,i}/P_{t,i} on proj(i).
    let n = s.len();
    let mut position_weight = vec![0.0; n * l];
    let mut total_mass = 0.0;
    let mut loss = 0.0;
    for t in 0..n {
        for (i, &qi) in q.table().row(t).iter().enumerate() {
            if qi < MIN_TARGET_MASS {
                continue;
            }
            let image = proj.image(i);
            let group: f64 = image.iter().map(|&j| post.node.get(t, j)).sum();
            loss -= qi * group.ln();
            total_mass += qi;
            for &j in image {
                position_weight[t * l + j] = qi / group;
            }
        }
    }
    let (mut node_coef, mut pair_coef) = lattice::weighted_expectations(&lat, &position_weight)?;
    node_coef.iter_mut().for_each(|c| *c = -*c);
    pair_coef.iter_mut().for_each(|c| *c = -*c);
    node_coef
        .iter_mut()
        .zip(post.node.as_slice())
        .for_each(|(c, p)| *c += total_mass * p);
    pair_coef
        .iter_mut()
        .zip(post.pair.as_slice())
        .for_each(|(c, p)| *c += total_mass * p);

    let mut grad = Gradient::zeros(l);
    accumulate_counts(
        &mut grad,
        m.kind(),
        s,
        &node_coef,
        Some(&pair_coef),
        inv_tau,
    );
    Ok(LossGrad { loss, grad })
}

/// Distillation loss for either student kind: CRF students use node
/// marginals, local students their per-token softmax.
pub fn distill_loss(
    m: &Model,
    s: &Featurized,
    q: &SoftTargets,
    proj: &Projection,
    cfg: &DistillConfig,
) -> Result<LossGrad> {
    match m.kind() {
        ModelKind::Crf => crf_distill_loss(m, s, q, proj, cfg),
        ModelKind::Local => {
            cfg.validate()?;
            let p = model_marginals(m, s, cfg.temperature);
            let (loss, dz) = local_distill_loss(&p, q, proj)?;
            let mut grad = Gradient::zeros(m.label_count());
            accumulate_counts(&mut grad, m.kind(), s, &dz, None, 1.0 / cfg.temperature);
            Ok(LossGrad { loss, grad })
        }
    }
}

/// `α·ℓ_s + (1−α)·Σ_k ℓ_k` with a student loss, `Σ_k ℓ_k` without.
pub fn combined_loss(
    distill: &[LossGrad],
    student: Option<&LossGrad>,
    alpha: f64,
) -> Result<LossGrad> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    let labels = distill
        .first()
        .or(student)
        .ok_or_else(|| Error::InvalidArgument("combined loss needs at least one term".into()))?
        .grad
        .label_count();
    let distill_weight = if student.is_some() { 1.0 - alpha } else { 1.0 };
    let mut out = LossGrad {
        loss: 0.0,
        grad: Gradient::zeros(labels),
    };
    if let Some(s) = student {
        out.loss += alpha * s.loss;
        out.grad.add_scaled(&s.grad, alpha);
    }
    for d in distill {
        out.loss += distill_weight * d.loss;
        out.grad.add_scaled(&d.grad, distill_weight);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emissions::Sentence;
    use crate::lattice::brute_force;
    use crate::model::ParamId;
    use crate::tagspace::{TagHierarchy, TagSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn featurized(n: usize) -> Featurized {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        Featurized::new(&Sentence::new(words).unwrap(), 5)
    }

    fn random_model(
        rng: &mut impl Rng,
        kind: ModelKind,
        k: TagSet,
        s: &Featurized,
        scale: f64,
    ) -> Model {
        let l = k.label_count();
        let mut m = Model::new(kind, k, "h", 5);
        for t in 0..s.len() {
            for &f in s.at(t) {
                for i in 0..l {
                    m.set_param(ParamId::Emission(f, i), rng.gen_range(-scale..scale));
                }
            }
        }
        if kind == ModelKind::Crf {
            for i in 0..l {
                m.set_param(ParamId::Start(i), rng.gen_range(-scale..scale));
                m.set_param(ParamId::Stop(i), rng.gen_range(-scale..scale));
                for j in 0..l {
                    m.set_param(ParamId::Transition(i, j), rng.gen_range(-scale..scale));
                }
            }
        }
        m
    }

    /// Central differences over every stored weight.
    fn check_gradient(m: &Model, analytic: &Gradient, f: impl Fn(&Model) -> f64) {
        let h = 1e-5;
        for p in m.weights().param_ids() {
            let mut plus = m.clone();
            plus.set_param(p, m.param(p) + h);
            let mut minus = m.clone();
            minus.set_param(p, m.param(p) - h);
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let a = analytic.get(p);
            assert!(
                (fd - a).abs() <= 1e-4 * fd.abs().max(a.abs()).max(1e-3),
                "{p:?}: analytic {a} vs numeric {fd}"
            );
        }
    }

    fn xy() -> TagSet {
        TagSet::new("k", ["X"]).unwrap()
    }

    #[test]
    fn saturated_model_has_zero_loss() {
        let s = featurized(3);
        let mut m = Model::new(ModelKind::Crf, xy(), "h", 5);
        let y = [1, 2, 0];
        for (t, &yt) in y.iter().enumerate() {
            m.set_param(ParamId::Emission(s.at(t)[0], yt), 60.0);
        }
        assert!(nll_loss(&m, &s, &y).unwrap().loss < 1e-20);
    }

    #[test]
    fn zero_model_loss_is_uniform() {
        let s = featurized(4);
        let m = Model::new(ModelKind::Crf, xy(), "h", 5);
        let lg = nll_loss(&m, &s, &[0, 1, 2, 0]).unwrap();
        assert!((lg.loss - 4.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = featurized(4);
        for kind in [ModelKind::Crf, ModelKind::Local] {
            let m = random_model(&mut rng, kind, xy(), &s, 1.0);
            let y = [1, 2, 0, 1];
            let lg = nll_loss(&m, &s, &y).unwrap();
            check_gradient(&m, &lg.grad, |m| nll_loss(m, &s, &y).unwrap().loss);
        }
    }

    #[test]
    fn nll_rejects_bad_labels() {
        let s = featurized(2);
        let m = Model::new(ModelKind::Crf, xy(), "h", 5);
        assert!(nll_loss(&m, &s, &[0, 3]).is_err());
        assert!(nll_loss(&m, &s, &[0]).is_err());
    }

    #[test]
    fn fully_observed_partial_equals_nll() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s = featurized(5);
        let m = random_model(&mut rng, ModelKind::Crf, xy(), &s, 1.0);
        let y = [0, 1, 2, 2, 0];
        let a = nll_loss(&m, &s, &y).unwrap();
        let b = marginal_nll_loss(&m, &s, &LabelConstraint::from_path(&y)).unwrap();
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        assert_eq!(a.grad, b.grad);
    }

    #[test]
    fn vacuous_constraint_is_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = featurized(4);
        for kind in [ModelKind::Crf, ModelKind::Local] {
            let m = random_model(&mut rng, kind, xy(), &s, 1.0);
            let lg = marginal_nll_loss(&m, &s, &LabelConstraint::unconstrained(4, 3)).unwrap();
            assert!(lg.loss.abs() < 1e-12);
            assert!(lg.grad.max_abs() < 1e-12);
        }
    }

    #[test]
    fn outside_expansion_matches_enumeration() {
        // GPE observed; O tokens may also be B-DATE / I-DATE
        let h = TagHierarchy::parse("tagset g: GPE\ntagset d: DATE\n").unwrap();
        let proj = h.projection("g").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let s = featurized(4);
        let m = random_model(&mut rng, ModelKind::Crf, h.unified().clone(), &s, 1.0);
        let observed = [0, 1, 2, 0];
        let c = partial_annotation(&observed, &proj).unwrap();
        let lg = marginal_nll_loss(&m, &s, &c).unwrap();
        let lat = score_lattice(&m, &s);
        let expected = brute_force::log_partition(&lat).unwrap()
            - brute_force::constrained_log_partition(&lat, &c).unwrap();
        assert!((lg.loss - expected).abs() < 1e-9);
        check_gradient(&m, &lg.grad, |m| marginal_nll_loss(m, &s, &c).unwrap().loss);
    }

    #[test]
    fn empty_partial_annotation_rejected() {
        let h = TagHierarchy::parse("tagset g: GPE\n").unwrap();
        let proj = h.projection("g").unwrap();
        assert!(partial_annotation(&[0, 7], &proj).is_err());
    }

    #[test]
    fn self_distillation_of_softmax_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let k = xy();
        let s = featurized(3);
        let m = random_model(&mut rng, ModelKind::Local, k.clone(), &s, 1.0);
        let p = model_marginals(&m, &s, 1.0);
        let q = SoftTargets::new("self", p.clone()).unwrap();
        let (loss, dz) = local_distill_loss(&p, &q, &Projection::identity(&k)).unwrap();
        let entropy: f64 = p.as_slice().iter().map(|p| -p * p.ln()).sum();
        assert!((loss - entropy).abs() < 1e-12);
        assert!(dz.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn one_hot_target_is_group_log_loss() {
        let h = TagHierarchy::parse("tagset g: GPE\ntagset d: DATE\n").unwrap();
        let proj = h.projection("g").unwrap();
        let p = MarginalTable::from_rows(vec![vec![0.1, 0.2, 0.3, 0.25, 0.15]]).unwrap();
        let q = SoftTargets::new(
            "g",
            MarginalTable::from_rows(vec![vec![1.0, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let (loss, _) = local_distill_loss(&p, &q, &proj).unwrap();
        // image of O: {O, B-DATE, I-DATE} = labels 0, 3, 4
        assert!((loss + (0.1f64 + 0.25 + 0.15).ln()).abs() < 1e-15);
    }

    #[test]
    fn local_distill_matches_independent_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        // two groups over four unified labels: {0, 2} and {1, 3}
        let h = TagHierarchy::parse("tagset a: A\ntagset b: B\n").unwrap();
        let proj = h.projection("a").unwrap();
        let logits: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let qrows: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
                let z: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / z).collect()
            })
            .collect();
        let q = SoftTargets::new("a", MarginalTable::from_rows(qrows.clone()).unwrap()).unwrap();
        let softmax = |z: &[f64]| -> Vec<f64> {
            let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        };
        // direct evaluation of the cross-entropy against grouped probabilities
        let direct = |logits: &[Vec<f64>]| -> f64 {
            let mut total = 0.0;
            for (t, z) in logits.iter().enumerate() {
                let p = softmax(z);
                let groups = [p[0] + p[3] + p[4], p[1], p[2]];
                for i in 0..3 {
                    total -= qrows[t][i] * groups[i].ln();
                }
            }
            total
        };
        let p = MarginalTable::from_rows(logits.iter().map(|z| softmax(z)).collect()).unwrap();
        let (loss, grad) = local_distill_loss(&p, &q, &proj).unwrap();
        assert!((loss - direct(&logits)).abs() < 1e-12);
        for t in 0..3 {
            for j in 0..5 {
                let mut up = logits.clone();
                up[t][j] += 1e-6;
                let mut down = logits.clone();
                down[t][j] -= 1e-6;
                let fd = (direct(&up) - direct(&down)) / 2e-6;
                assert!((fd - grad[t * 5 + j]).abs() < 1e-6);
            }
        }
    }

    /// Gradient from one clamped forward-backward per (token, group).
    fn clamped_reference(
        m: &Model,
        s: &Featurized,
        q: &SoftTargets,
        proj: &Projection,
        tau: f64,
    ) -> Gradient {
        let l = m.label_count();
        let lat = score_lattice(m, s).scaled(1.0 / tau);
        let post = lattice::posterior(&lat);
        let mut grad = Gradient::zeros(l);
        for t in 0..s.len() {
            for (i, &qi) in q.table().row(t).iter().enumerate() {
                if qi < MIN_TARGET_MASS {
                    continue;
                }
                let clamped = lattice::posterior(&lat.clamped(t, proj.image(i)).unwrap());
                let pair = Some(post.pair.as_slice());
                accumulate_counts(&mut grad, m.kind(), s, post.node.as_slice(), pair, qi / tau);
                let pair = Some(clamped.pair.as_slice());
                accumulate_counts(
                    &mut grad,
                    m.kind(),
                    s,
                    clamped.node.as_slice(),
                    pair,
                    -qi / tau,
                );
            }
        }
        grad
    }

    #[test]
    fn single_pass_matches_clamped_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = TagHierarchy::parse("tagset a: A,C\ntagset b: B\n").unwrap();
        for (tag_set, n) in [("a", 5), ("b", 3), ("a", 1)] {
            let proj = h.projection(tag_set).unwrap();
            let s = featurized(n);
            let student = random_model(&mut rng, ModelKind::Crf, h.unified().clone(), &s, 1.0);
            let teacher = random_model(
                &mut rng,
                ModelKind::Crf,
                h.tag_set(tag_set).unwrap().clone(),
                &s,
                1.0,
            );
            let q = teacher_targets(&teacher, &s, 1.5).unwrap();
            let cfg = DistillConfig {
                temperature: 1.5,
                alpha: 0.5,
            };
            let fast = crf_distill_loss(&student, &s, &q, &proj, &cfg)
                .unwrap()
                .grad;
            let slow = clamped_reference(&student, &s, &q, &proj, 1.5);
            assert!(
                fast.max_abs_diff(&slow) < 1e-10,
                "{}",
                fast.max_abs_diff(&slow)
            );
        }
    }

    #[test]
    fn crf_self_distillation_gradient_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let k = TagSet::new("k", ["X", "Y"]).unwrap();
        let s = featurized(5);
        let m = random_model(&mut rng, ModelKind::Crf, k.clone(), &s, 1.0);
        let cfg = DistillConfig::default();
        let q = teacher_targets(&m, &s, 1.0).unwrap();
        let lg = crf_distill_loss(&m, &s, &q, &Projection::identity(&k), &cfg).unwrap();
        assert!(lg.grad.max_abs() <= 1e-9, "max |g| = {}", lg.grad.max_abs());
    }

    #[test]
    fn single_token_crf_reduces_to_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let h = TagHierarchy::parse("tagset a: A\ntagset b: B\n").unwrap();
        let proj = h.projection("a").unwrap();
        let s = featurized(1);
        let m = random_model(&mut rng, ModelKind::Crf, h.unified().clone(), &s, 1.0);
        let q = SoftTargets::new(
            "a",
            MarginalTable::from_rows(vec![vec![0.5, 0.3, 0.2]]).unwrap(),
        )
        .unwrap();
        let crf = crf_distill_loss(&m, &s, &q, &proj, &DistillConfig::default()).unwrap();
        let lat = score_lattice(&m, &s);
        let row: Vec<f64> = (0..5)
            .map(|i| lat.start()[i] + lat.emission(0, i) + lat.stop()[i])
            .collect();
        let lse = log_sum_exp(&row);
        let p =
            MarginalTable::from_rows(vec![row.iter().map(|v| (v - lse).exp()).collect()]).unwrap();
        let (loss, _) = local_distill_loss(&p, &q, &proj).unwrap();
        assert!((crf.loss - loss).abs() < 1e-12);
    }

    #[test]
    fn crf_distill_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let h = TagHierarchy::parse("tagset a: A\ntagset b: B\n").unwrap();
        let proj = h.projection("b").unwrap();
        let s = featurized(4);
        let student = random_model(&mut rng, ModelKind::Crf, h.unified().clone(), &s, 1.0);
        let teacher = random_model(
            &mut rng,
            ModelKind::Crf,
            h.tag_set("b").unwrap().clone(),
            &s,
            1.0,
        );
        for tau in [1.0, 2.5] {
            let cfg = DistillConfig {
                temperature: tau,
                alpha: 0.5,
            };
            let q = teacher_targets(&teacher, &s, tau).unwrap();
            let lg = crf_distill_loss(&student, &s, &q, &proj, &cfg).unwrap();
            check_gradient(&student, &lg.grad, |m| {
                crf_distill_loss(m, &s, &q, &proj, &cfg).unwrap().loss
            });
        }
    }

    #[test]
    fn local_student_distill_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let h = TagHierarchy::parse("tagset a: A\ntagset b: B\n").unwrap();
        let proj = h.projection("a").unwrap();
        let s = featurized(3);
        let student = random_model(&mut rng, ModelKind::Local, h.unified().clone(), &s, 1.0);
        let teacher = random_model(
            &mut rng,
            ModelKind::Crf,
            h.tag_set("a").unwrap().clone(),
            &s,
            1.0,
        );
        let cfg = DistillConfig {
            temperature: 2.0,
            alpha: 0.5,
        };
        let q = teacher_targets(&teacher, &s, 2.0).unwrap();
        let lg = distill_loss(&student, &s, &q, &proj, &cfg).unwrap();
        check_gradient(&student, &lg.grad, |m| {
            distill_loss(m, &s, &q, &proj, &cfg).unwrap().loss
        });
    }

    #[test]
    fn distill_errors() {
        let h = TagHierarchy::parse("tagset a: A\ntagset b: B\n").unwrap();
        let s = featurized(2);
        let m = Model::new(ModelKind::Crf, h.unified().clone(), "h", 5);
        let q = SoftTargets::new(
            "a",
            MarginalTable::from_rows(vec![vec![1.0, 0.0, 0.0]; 2]).unwrap(),
        )
        .unwrap();
        let bad_tau = DistillConfig {
            temperature: 0.0,
            alpha: 0.5,
        };
        assert!(crf_distill_loss(&m, &s, &q, &h.projection("a").unwrap(), &bad_tau).is_err());
        let identity = Projection::identity(h.unified());
        assert!(crf_distill_loss(&m, &s, &q, &identity, &DistillConfig::default()).is_err());
        assert!(
            SoftTargets::new("x", MarginalTable::from_rows(vec![vec![0.5, 0.6]]).unwrap()).is_err()
        );
    }

    #[test]
    fn combination_rules() {
        let term = |v: f64| {
            let mut g = Gradient::zeros(1);
            g.start_mut()[0] = v;
            LossGrad { loss: v, grad: g }
        };
        let (s, d1, d2) = (term(2.0), term(3.0), term(5.0));
        assert_eq!(
            combined_loss(&[d1.clone()], Some(&s), 1.0).unwrap().loss,
            2.0
        );
        assert_eq!(
            combined_loss(&[d1.clone()], Some(&s), 0.0).unwrap().loss,
            3.0
        );
        let mixed = combined_loss(&[d1.clone(), d2.clone()], Some(&s), 0.4).unwrap();
        assert!((mixed.loss - (0.4 * 2.0 + 0.6 * 8.0)).abs() < 1e-15);
        assert!((mixed.grad.start()[0] - mixed.loss).abs() < 1e-15);
        assert_eq!(
            combined_loss(&[d1.clone(), d2], None, 0.4).unwrap().loss,
            8.0
        );
        assert!(combined_loss(&[d1], Some(&s), 1.5).is_err());
        assert!(combined_loss(&[], None, 0.5).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn cross_entropy_floor(seed in 0u64..10_000, n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = TagHierarchy::parse("tagset a: A\ntagset b: B\n").unwrap();
            let proj = h.projection("a").unwrap();
            let s = featurized(n);
            let student = random_model(&mut rng, ModelKind::Crf, h.unified().clone(), &s, 2.0);
            let teacher = random_model(&mut rng, ModelKind::Crf, h.tag_set("a").unwrap().clone(), &s, 2.0);
            let q = teacher_targets(&teacher, &s, 1.0).unwrap();
            let lg = crf_distill_loss(&student, &s, &q, &proj, &DistillConfig::default()).unwrap();
            let entropy: f64 = q.table().as_slice().iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum();
            proptest::prop_assert!(lg.loss >= entropy - 1e-9);
        }

        #[test]
        fn hotter_marginals_approach_uniform(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = featurized(3);
            let m = random_model(&mut rng, ModelKind::Crf, xy(), &s, 2.0);
            let kl_to_uniform = |tau: f64| -> f64 {
                let p = model_marginals(&m, &s, tau);
                let u = 1.0 / 3.0;
                p.as_slice().iter().filter(|&&v| v > 0.0).map(|v| v * (v / u).ln()).sum()
            };
            let base = score_lattice(&m, &s);
            proptest::prop_assert_eq!(&base.scaled(1.0), &base);
            let kls: Vec<f64> = [1.0, 4.0, 16.0, 64.0, 1024.0].iter().map(|&t| kl_to_uniform(t)).collect();
            proptest::prop_assert!(kls.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", kls);
            proptest::prop_assert!(kls[4] < 1e-3);
        }
    }
}
