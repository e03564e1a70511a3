//! Entity-level evaluation: per-group precision/recall/F1 for named and
//! nominal mentions, overall micro-F1, and recall on out-of-vocabulary
//! entities.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::corpus::{
    entities_lenient, split_positional, EntitySpan, MentionKind, Sentence, TagScheme,
};
use crate::{Error, Result};

/// Counts and derived scores for one group of entity types.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl GroupScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        GroupScores {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    fn merge(&self, other: &GroupScores) -> GroupScores {
        GroupScores::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OovScores {
    pub recall: f64,
    pub found: usize,
    pub total: usize,
    /// No gold entity was out of vocabulary; `recall` is reported as 0.
    pub zero_support: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub named: GroupScores,
    pub nominal: GroupScores,
    /// Micro-averaged over every entity type.
    pub overall: GroupScores,
    /// `None` when no training vocabulary was supplied.
    pub oov: Option<OovScores>,
}

impl EvalReport {
    pub fn group(&self, kind: MentionKind) -> &GroupScores {
        match kind {
            MentionKind::Named => &self.named,
            MentionKind::Nominal => &self.nominal,
        }
    }

    /// Aligned table: named and nominal P/R/F1, overall F1 and OOV recall,
    /// as percentages. Missing OOV is shown as `-`.
    pub fn to_table(&self) -> String {
        let pct = |v: f64| format!("{:.2}", 100.0 * v);
        let oov = self.oov.map_or("-".to_string(), |o| pct(o.recall));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10}{:>10}{:>10}{:>10}",
            "", "Precision", "Recall", "F1"
        );
        for (name, g) in [("Named", &self.named), ("Nominal", &self.nominal)] {
            let _ = writeln!(
                out,
                "{:<10}{:>10}{:>10}{:>10}",
                name,
                pct(g.precision),
                pct(g.recall),
                pct(g.f1)
            );
        }
        let _ = writeln!(out, "{:<10}{:>10}", "Overall", pct(self.overall.f1));
        let _ = writeln!(out, "{:<10}{:>10}", "OOV", oov);
        out
    }

    /// One tab-separated line per group plus `overall` and `oov`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("group\tprecision\trecall\tf1\ttp\tfp\tfn\n");
        for (name, g) in [
            ("named", &self.named),
            ("nominal", &self.nominal),
            ("overall", &self.overall),
        ] {
            let _ = writeln!(
                out,
                "{name}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                g.precision, g.recall, g.f1, g.tp, g.fp, g.fn_
            );
        }
        match self.oov {
            Some(o) => {
                let _ = writeln!(
                    out,
                    "oov\t-\t{:.6}\t-\t{}\t-\t{}",
                    o.recall,
                    o.found,
                    o.total - o.found
                );
            }
            None => out.push_str("oov\t-\t-\t-\t-\t-\t-\n"),
        }
        out
    }
}

/// Surface string of an entity: the concatenated base characters.
pub fn entity_surface(tokens: &[String], span: &EntitySpan) -> String {
    tokens[span.start..span.end]
        .iter()
        .map(|t| split_positional(t).0)
        .collect()
}

/// Every gold entity surface in a labeled corpus.
pub fn entity_surfaces(sentences: &[Sentence], scheme: &TagScheme) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for s in sentences {
        for span in entities_lenient(s.gold()?, scheme) {
            out.insert(entity_surface(&s.tokens, &span));
        }
    }
    Ok(out)
}

fn check_shapes<G: AsRef<[usize]>, P: AsRef<[usize]>>(gold: &[G], predicted: &[P]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: predicted.len(),
        });
    }
    for (g, p) in gold.iter().zip(predicted) {
        if g.as_ref().len() != p.as_ref().len() {
            return Err(Error::LengthMismatch {
                expected: g.as_ref().len(),
                found: p.as_ref().len(),
            });
        }
    }
    Ok(())
}

#[derive(Default)]
struct Counts {
    tp: [usize; 2],
    fp: [usize; 2],
    fn_: [usize; 2],
    oov_found: usize,
    oov_total: usize,
}

fn kind_slot(scheme: &TagScheme, span: &EntitySpan) -> usize {
    match scheme.entity_types()[span.entity_type].kind {
        MentionKind::Named => 0,
        MentionKind::Nominal => 1,
    }
}

fn count_sentence(
    gold: &[usize],
    predicted: &[usize],
    scheme: &TagScheme,
    oov: Option<(&[String], &HashSet<String>)>,
    c: &mut Counts,
) {
    let g: HashSet<EntitySpan> = entities_lenient(gold, scheme).into_iter().collect();
    let p: HashSet<EntitySpan> = entities_lenient(predicted, scheme).into_iter().collect();
    for span in &p {
        let k = kind_slot(scheme, span);
        if g.contains(span) {
            c.tp[k] += 1;
        } else {
            c.fp[k] += 1;
        }
    }
    for span in &g {
        if !p.contains(span) {
            c.fn_[kind_slot(scheme, span)] += 1;
        }
        if let Some((tokens, vocab)) = oov {
            if !vocab.contains(&entity_surface(tokens, span)) {
                c.oov_total += 1;
                if p.contains(span) {
                    c.oov_found += 1;
                }
            }
        }
    }
}

fn report(c: Counts, with_oov: bool) -> EvalReport {
    let named = GroupScores::from_counts(c.tp[0], c.fp[0], c.fn_[0]);
    let nominal = GroupScores::from_counts(c.tp[1], c.fp[1], c.fn_[1]);
    let oov = with_oov.then(|| OovScores {
        recall: if c.oov_total == 0 {
            0.0
        } else {
            c.oov_found as f64 / c.oov_total as f64
        },
        found: c.oov_found,
        total: c.oov_total,
        zero_support: c.oov_total == 0,
    });
    EvalReport {
        named,
        nominal,
        overall: named.merge(&nominal),
        oov,
    }
}

/// Scores predictions against gold sentences. Spans match exactly on type,
/// start and end. With `train_vocab`, OOV recall covers gold entities whose
/// surface never occurs among the training entities.
pub fn evaluate<P: AsRef<[usize]>>(
    gold: &[Sentence],
    predicted: &[P],
    scheme: &TagScheme,
    train_vocab: Option<&HashSet<String>>,
) -> Result<EvalReport> {
    let gold_labels = gold
        .iter()
        .map(Sentence::gold)
        .collect::<Result<Vec<_>>>()?;
    check_shapes(&gold_labels, predicted)?;
    let mut c = Counts::default();
    for ((s, g), p) in gold.iter().zip(&gold_labels).zip(predicted) {
        count_sentence(
            g,
            p.as_ref(),
            scheme,
            train_vocab.map(|v| (s.tokens.as_slice(), v)),
            &mut c,
        );
    }
    Ok(report(c, train_vocab.is_some()))
}

/// [`evaluate`] on bare label sequences, without OOV recall.
pub fn evaluate_sequences<G: AsRef<[usize]>, P: AsRef<[usize]>>(
    gold: &[G],
    predicted: &[P],
    scheme: &TagScheme,
) -> Result<EvalReport> {
    check_shapes(gold, predicted)?;
    let mut c = Counts::default();
    for (g, p) in gold.iter().zip(predicted) {
        count_sentence(g.as_ref(), p.as_ref(), scheme, None, &mut c);
    }
    Ok(report(c, false))
}

/// Fraction of positions where the labels agree (1.0 for an empty corpus).
pub fn token_accuracy<G: AsRef<[usize]>, P: AsRef<[usize]>>(
    gold: &[G],
    predicted: &[P],
) -> Result<f64> {
    check_shapes(gold, predicted)?;
    let (mut same, mut total) = (0usize, 0usize);
    for (g, p) in gold.iter().zip(predicted) {
        total += g.as_ref().len();
        same += g
            .as_ref()
            .iter()
            .zip(p.as_ref())
            .filter(|(a, b)| a == b)
            .count();
    }
    Ok(if total == 0 {
        1.0
    } else {
        same as f64 / total as f64
    })
}
