//! Sentence-level scoring with a learned transition matrix, exact Viterbi
//! decoding and beam-search top-k enumeration.
//!
//! Every routine here accumulates a path score in the same order,
//! `((score + A[prev, cur]) + e[t, cur])`, so a sequence scored by
//! [`sentence_score`], [`viterbi`] or [`beam_topk`] gets bit-identical values.

use std::cmp::Ordering;

use crate::network::EmissionMatrix;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// `(|Y| + 1) × |Y|` transition scores; row `|Y|` scores the first label.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    scores: Matrix,
}

impl TransitionMatrix {
    pub fn zeros(labels: usize) -> Self {
        TransitionMatrix {
            scores: Matrix::zeros(labels + 1, labels),
        }
    }

    /// Panics unless `scores` is `(labels + 1) × labels`.
    pub fn from_matrix(scores: Matrix) -> Self {
        assert_eq!(scores.rows(), scores.cols() + 1, "transition matrix shape");
        TransitionMatrix { scores }
    }

    pub fn labels(&self) -> usize {
        self.scores.cols()
    }

    pub fn start_row(&self) -> usize {
        self.scores.cols()
    }

    /// `A[prev, cur]`; `prev = None` reads the start row.
    #[inline]
    pub fn score(&self, prev: Option<usize>, cur: usize) -> f64 {
        self.scores.get(prev.unwrap_or(self.start_row()), cur)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.scores
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.scores
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub labels: Vec<usize>,
    pub score: f64,
}

/// `Σ_t (A[l_{t-1}, l_t] + log y_t[l_t])`, starting from the start row.
pub fn sentence_score(y: &EmissionMatrix, a: &TransitionMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: labels.len(),
        });
    }
    Ok(path_score(y.label_scores(), y.labels(), a, labels))
}

pub(crate) fn path_score(
    scores: &[f64],
    width: usize,
    a: &TransitionMatrix,
    labels: &[usize],
) -> f64 {
    let mut total = 0.0;
    let mut prev = None;
    for (t, &l) in labels.iter().enumerate() {
        total = total + a.score(prev, l) + scores[t * width + l];
        prev = Some(l);
    }
    total
}

/// Exact argmax of [`sentence_score`]. Ties go to the lower label index at
/// every comparison.
pub fn viterbi(y: &EmissionMatrix, a: &TransitionMatrix) -> ScoredSequence {
    viterbi_scores(y.label_scores(), y.len(), a)
}

/// Viterbi over an arbitrary row-major `n × |Y|` per-position score table
/// (label scores, possibly loss-augmented).
pub fn viterbi_scores(scores: &[f64], n: usize, a: &TransitionMatrix) -> ScoredSequence {
    let labels = a.labels();
    if n == 0 {
        return ScoredSequence {
            labels: Vec::new(),
            score: 0.0,
        };
    }
    let mut best: Vec<f64> = (0..labels)
        .map(|j| 0.0 + a.score(None, j) + scores[j])
        .collect();
    let mut back = vec![0usize; n * labels];
    for t in 1..n {
        let mut next = vec![0.0; labels];
        for j in 0..labels {
            let mut arg = 0;
            let mut val = best[0] + a.score(Some(0), j);
            for (i, &b) in best.iter().enumerate().skip(1) {
                let v = b + a.score(Some(i), j);
                if v > val {
                    val = v;
                    arg = i;
                }
            }
            next[j] = val + scores[t * labels + j];
            back[t * labels + j] = arg;
        }
        best = next;
    }
    let mut last = 0;
    for j in 1..labels {
        if best[j] > best[last] {
            last = j;
        }
    }
    let score = best[last];
    let mut path = vec![0usize; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * labels + path[t]];
    }
    ScoredSequence {
        labels: path,
        score,
    }
}

/// Orders by descending score, then ascending label sequence.
pub(crate) fn rank(a: &ScoredSequence, b: &ScoredSequence) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.labels.cmp(&b.labels))
}

/// Up to `k` distinct sequences in non-increasing score order. The beam keeps
/// the best `k` prefixes at each position; the Viterbi sequence is always
/// placed first so the true argmax is never lost to pruning.
pub fn beam_topk(y: &EmissionMatrix, a: &TransitionMatrix, k: usize) -> Vec<ScoredSequence> {
    let k = k.max(1);
    let best = viterbi(y, a);
    if k == 1 || y.is_empty() {
        return vec![best];
    }
    let labels = a.labels();
    let scores = y.label_scores();
    let mut beam = vec![ScoredSequence {
        labels: Vec::new(),
        score: 0.0,
    }];
    for t in 0..y.len() {
        let mut expanded = Vec::with_capacity(beam.len() * labels);
        for prefix in &beam {
            let prev = prefix.labels.last().copied();
            for l in 0..labels {
                let mut seq = Vec::with_capacity(t + 1);
                seq.extend_from_slice(&prefix.labels);
                seq.push(l);
                expanded.push(ScoredSequence {
                    labels: seq,
                    score: prefix.score + a.score(prev, l) + scores[t * labels + l],
                });
            }
        }
        expanded.sort_by(rank);
        expanded.truncate(k);
        beam = expanded;
    }
    let mut out = Vec::with_capacity(k);
    out.extend(beam.into_iter().filter(|s| s.labels != best.labels));
    out.sort_by(rank);
    out.insert(0, best);
    out.truncate(k);
    out
}
