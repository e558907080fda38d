//! Exact-match span scoring for BIO sequences.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagspace::{BioLabel, TagSet};

/// Entity span `[start, end)` of one type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

/// Maximal B-led runs. An `I-X` that does not continue an `X` span opens a
/// new one.
pub fn extract_spans(labels: &[BioLabel]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (t, label) in labels.iter().enumerate() {
        let continues =
            matches!((label, &open), (BioLabel::Inside(x), Some(s)) if *x == s.entity_type);
        if continues {
            continue;
        }
        if let Some(mut s) = open.take() {
            s.end = t;
            spans.push(s);
        }
        match label {
            BioLabel::Outside => {}
            BioLabel::Begin(x) | BioLabel::Inside(x) => {
                open = Some(Span {
                    start: t,
                    end: t + 1,
                    entity_type: x.clone(),
                })
            }
        }
    }
    if let Some(mut s) = open {
        s.end = labels.len();
        spans.push(s);
    }
    spans
}

/// [`extract_spans`] over label indices of `tag_set`.
pub fn spans_of(tag_set: &TagSet, labels: &[usize]) -> Vec<Span> {
    let labels: Vec<BioLabel> = labels.iter().map(|&i| tag_set.label(i)).collect();
    extract_spans(&labels)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl TypeCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Micro-averaged scores plus per-type counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub total: TypeCounts,
    pub per_type: BTreeMap<String, TypeCounts>,
}

impl EvalResult {
    fn from_counts(per_type: BTreeMap<String, TypeCounts>) -> Self {
        let mut total = TypeCounts::default();
        for c in per_type.values() {
            total.gold += c.gold;
            total.predicted += c.predicted;
            total.correct += c.correct;
        }
        EvalResult {
            precision: total.precision(),
            recall: total.recall(),
            f1: total.f1(),
            total,
            per_type,
        }
    }

    /// Fixed-width text report, one row per type then the micro total.
    pub fn table(&self) -> String {
        let width = self
            .per_type
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max("overall".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}",
            "type", "gold", "pred", "corr", "precision", "recall", "f1"
        );
        let mut row = |name: &str, c: &TypeCounts, p: f64, r: f64, f: f64| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6} {:>6} {:>6}  {:>9.3} {:>9.3} {:>9.3}",
                name, c.gold, c.predicted, c.correct, p, r, f
            );
        };
        for (name, c) in &self.per_type {
            row(name, c, c.precision(), c.recall(), c.f1());
        }
        row("overall", &self.total, self.precision, self.recall, self.f1);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Exact-match micro precision/recall/F1 over aligned sentences.
pub fn micro_prf(gold: &[Vec<BioLabel>], pred: &[Vec<BioLabel>]) -> Result<EvalResult> {
    if gold.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut per_type: BTreeMap<String, TypeCounts> = BTreeMap::new();
    for (n, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Dimension(format!(
                "sentence {n}: gold has {} tokens, prediction has {}",
                g.len(),
                p.len()
            )));
        }
        let gs = extract_spans(g);
        let ps = extract_spans(p);
        for s in &gs {
            per_type.entry(s.entity_type.clone()).or_default().gold += 1;
        }
        for s in &ps {
            let c = per_type.entry(s.entity_type.clone()).or_default();
            c.predicted += 1;
            if gs.contains(s) {
                c.correct += 1;
            }
        }
    }
    Ok(EvalResult::from_counts(per_type))
}

/// [`micro_prf`] over label indices of one tag set.
pub fn micro_prf_indices(
    tag_set: &TagSet,
    gold: &[Vec<usize>],
    pred: &[Vec<usize>],
) -> Result<EvalResult> {
    let convert = |rows: &[Vec<usize>]| -> Vec<Vec<BioLabel>> {
        rows.iter()
            .map(|r| r.iter().map(|&i| tag_set.label(i)).collect())
            .collect()
    };
    micro_prf(&convert(gold), &convert(pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bio(s: &str) -> Vec<BioLabel> {
        s.split_whitespace().map(|l| l.parse().unwrap()).collect()
    }

    fn span(start: usize, end: usize, t: &str) -> Span {
        Span {
            start,
            end,
            entity_type: t.into(),
        }
    }

    #[test]
    fn spans() {
        assert_eq!(
            extract_spans(&bio("B-GPE I-GPE O")),
            vec![span(0, 2, "GPE")]
        );
        assert!(extract_spans(&bio("O O O")).is_empty());
        assert_eq!(extract_spans(&bio("I-GPE O")), vec![span(0, 1, "GPE")]);
        assert_eq!(
            extract_spans(&bio("B-A I-B I-B B-A B-A I-A")),
            vec![
                span(0, 1, "A"),
                span(1, 3, "B"),
                span(3, 4, "A"),
                span(4, 6, "A")
            ]
        );
        assert!(extract_spans(&[]).is_empty());
    }

    #[test]
    fn identity_scores_one() {
        let g = vec![bio("B-GPE I-GPE O B-DATE")];
        let r = micro_prf(&g, &g).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_recall() {
        let g = vec![bio("B-GPE O B-DATE")];
        let p = vec![bio("B-GPE O O")];
        let r = micro_prf(&g, &p).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 0.5);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_predictions() {
        let r = micro_prf(&[bio("B-GPE O")], &[bio("O O")]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn boundary_mismatch_is_wrong() {
        let r = micro_prf(&[bio("B-GPE I-GPE")], &[bio("B-GPE O")]).unwrap();
        assert_eq!(r.total.correct, 0);
    }

    #[test]
    fn alignment_errors() {
        assert!(micro_prf(&[bio("O")], &[]).is_err());
        assert!(micro_prf(&[bio("O")], &[bio("O O")]).is_err());
    }

    #[test]
    fn report_formats() {
        let r = micro_prf(&[bio("B-GPE O B-DATE")], &[bio("B-GPE O O")]).unwrap();
        let table = r.table();
        assert!(table.contains("GPE"));
        assert!(table.lines().last().unwrap().contains("0.667"));
        let back: EvalResult = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    fn label_seq() -> impl Strategy<Value = Vec<BioLabel>> {
        prop::collection::vec(0usize..5, 0..12).prop_map(|v| {
            let k = TagSet::new("k", ["A", "B"]).unwrap();
            v.into_iter().map(|i| k.label(i)).collect()
        })
    }

    proptest! {
        #[test]
        fn self_match_and_count_consistency(
            gold in prop::collection::vec(label_seq(), 1..6),
            pred_seed in prop::collection::vec(label_seq(), 6),
        ) {
            let pred: Vec<Vec<BioLabel>> = gold
                .iter()
                .zip(&pred_seed)
                .map(|(g, p)| (0..g.len()).map(|t| p.get(t).cloned().unwrap_or(BioLabel::Outside)).collect())
                .collect();
            let r = micro_prf(&gold, &pred).unwrap();
            let correct: usize = r.per_type.values().map(|c| c.correct).sum();
            prop_assert_eq!(correct, r.total.correct);
            for c in r.per_type.values() {
                prop_assert!(c.correct <= c.gold.min(c.predicted));
            }
            let mut rev_g = gold.clone();
            let mut rev_p = pred.clone();
            rev_g.reverse();
            rev_p.reverse();
            prop_assert_eq!(micro_prf(&rev_g, &rev_p).unwrap(), r);
            if gold.iter().any(|g| !extract_spans(g).is_empty()) {
                let s = micro_prf(&gold, &gold).unwrap();
                prop_assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
            }
        }
    }
}
