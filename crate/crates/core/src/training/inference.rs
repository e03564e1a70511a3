//! Loss-augmented inference and the per-instance structured hinge loss.

use crate::corpus::{EncodedSentence, TagScheme};
use crate::network::{self, EmissionMatrix, ForwardPass};
use crate::structured::{
    self, beam_topk, path_score, viterbi_scores, ScoredSequence, TransitionMatrix,
};
use crate::triggers::Trigger;
use crate::{Error, Result};

use super::ModelParams;

/// Argmax of `s + Δ`: the sequence with its plain score `s` and its loss `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub sequence: ScoredSequence,
    pub delta: f64,
}

impl Augmented {
    pub fn augmented_score(&self) -> f64 {
        self.sequence.score + self.delta
    }
}

/// Loss-augmented decoding on precomputed emissions. The Hamming trigger is
/// folded into the label scores and decoded exactly; other triggers rerank
/// the Viterbi-seeded beam plus the gold sequence by `s + Δ` (ties go to the
/// lexicographically smaller label sequence).
pub fn loss_augmented_decode(
    y: &EmissionMatrix,
    a: &TransitionMatrix,
    gold: &[usize],
    trigger: &Trigger,
    beam_k: usize,
    scheme: &TagScheme,
) -> Result<Augmented> {
    let n = y.len();
    if gold.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: gold.len(),
        });
    }
    let width = y.labels();
    let gold_score = path_score(y.label_scores(), width, a, gold);
    let gold_candidate = Augmented {
        sequence: ScoredSequence {
            labels: gold.to_vec(),
            score: gold_score,
        },
        delta: 0.0,
    };

    if trigger.kind.decomposes() {
        let mut costs = y.label_scores().to_vec();
        for (t, &g) in gold.iter().enumerate() {
            for l in 0..width {
                costs[t * width + l] += trigger.position_cost(g, l);
            }
        }
        let best = viterbi_scores(&costs, n, a);
        let score = path_score(y.label_scores(), width, a, &best.labels);
        let delta = trigger.delta(gold, &best.labels, scheme)?;
        let found = Augmented {
            sequence: ScoredSequence {
                labels: best.labels,
                score,
            },
            delta,
        };
        // guards against rounding pushing a non-gold sequence below gold
        return Ok(
            if found.augmented_score() < gold_candidate.augmented_score() {
                gold_candidate
            } else {
                found
            },
        );
    }

    let mut best = gold_candidate;
    for candidate in beam_topk(y, a, beam_k) {
        if candidate.labels == best.sequence.labels {
            continue;
        }
        let delta = trigger.delta(gold, &candidate.labels, scheme)?;
        let cand = Augmented {
            sequence: candidate,
            delta,
        };
        let better = match cand.augmented_score().total_cmp(&best.augmented_score()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => cand.sequence.labels < best.sequence.labels,
            std::cmp::Ordering::Less => false,
        };
        if better {
            best = cand;
        }
    }
    Ok(best)
}

/// `q = max_l̄ (s(l̄) + Δ(l, l̄)) − s(l)` together with the maximizer.
pub fn instance_loss_from_emissions(
    y: &EmissionMatrix,
    a: &TransitionMatrix,
    gold: &[usize],
    trigger: &Trigger,
    beam_k: usize,
    scheme: &TagScheme,
) -> Result<(f64, Augmented)> {
    let best = loss_augmented_decode(y, a, gold, trigger, beam_k, scheme)?;
    if best.sequence.labels == gold {
        return Ok((0.0, best));
    }
    let gold_score = path_score(y.label_scores(), y.labels(), a, gold);
    Ok((best.augmented_score() - gold_score, best))
}

pub fn loss_augmented_predict(
    sentence: &EncodedSentence,
    params: &ModelParams,
    scheme: &TagScheme,
    trigger: &Trigger,
    beam_k: usize,
) -> Result<Augmented> {
    let gold = sentence.gold()?;
    let pass = network::forward(params, sentence)?;
    loss_augmented_decode(
        &pass.emissions,
        &params.transitions,
        gold,
        trigger,
        beam_k,
        scheme,
    )
}

pub fn instance_loss(
    sentence: &EncodedSentence,
    params: &ModelParams,
    scheme: &TagScheme,
    trigger: &Trigger,
    beam_k: usize,
) -> Result<(f64, Augmented)> {
    let gold = sentence.gold()?;
    let pass = network::forward(params, sentence)?;
    instance_loss_from_emissions(
        &pass.emissions,
        &params.transitions,
        gold,
        trigger,
        beam_k,
        scheme,
    )
}

/// Forward pass, loss-augmented inference and (when the maximizer is not the
/// gold sequence) the subgradient of `q`.
pub fn instance_loss_and_gradient(
    sentence: &EncodedSentence,
    params: &ModelParams,
    scheme: &TagScheme,
    trigger: &Trigger,
    beam_k: usize,
) -> Result<(f64, Augmented, Option<network::Gradients>, ForwardPass)> {
    let gold = sentence.gold()?;
    let pass = network::forward(params, sentence)?;
    let (q, best) = instance_loss_from_emissions(
        &pass.emissions,
        &params.transitions,
        gold,
        trigger,
        beam_k,
        scheme,
    )?;
    let grads = if best.sequence.labels == gold {
        None
    } else {
        Some(network::score_difference_gradient(
            params,
            sentence,
            &pass,
            &best.sequence.labels,
            gold,
        )?)
    };
    Ok((q, best, grads, pass))
}

/// Plain Viterbi prediction.
pub fn predict(sentence: &EncodedSentence, params: &ModelParams) -> Result<ScoredSequence> {
    let pass = network::forward(params, sentence)?;
    Ok(structured::viterbi(&pass.emissions, &params.transitions))
}
