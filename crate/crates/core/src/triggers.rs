//! Structured margin losses ("triggers") that decide which predictions the
//! max-margin objective penalizes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{entities_lenient, TagScheme};
use crate::{Error, Result};

pub const DEFAULT_KAPPA: f64 = 0.2;
pub const DEFAULT_BETA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriggerKind {
    /// κ per mislabeled position.
    Hamming,
    /// κ·(1 − sentence entity F1).
    FScore,
    /// F-score trigger plus β times the Hamming trigger.
    #[default]
    Integrated,
}

impl TriggerKind {
    /// Whether the loss decomposes over positions (exact augmented Viterbi).
    pub fn decomposes(self) -> bool {
        self == TriggerKind::Hamming
    }
}

impl fmt::Display for TriggerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriggerKind::Hamming => "hamming",
            TriggerKind::FScore => "fscore",
            TriggerKind::Integrated => "integrated",
        })
    }
}

impl FromStr for TriggerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(TriggerKind::Hamming),
            "fscore" => Ok(TriggerKind::FScore),
            "integrated" => Ok(TriggerKind::Integrated),
            other => Err(Error::Config(format!(
                "unknown trigger `{other}` (hamming|fscore|integrated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub kind: TriggerKind,
    pub kappa: f64,
    pub beta: f64,
}

impl Default for Trigger {
    fn default() -> Self {
        Trigger {
            kind: TriggerKind::default(),
            kappa: DEFAULT_KAPPA,
            beta: DEFAULT_BETA,
        }
    }
}

impl Trigger {
    pub fn new(kind: TriggerKind, kappa: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("beta", beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Trigger { kind, kappa, beta })
    }

    pub fn hamming(kappa: f64) -> Self {
        Trigger {
            kind: TriggerKind::Hamming,
            kappa,
            beta: 0.0,
        }
    }

    pub fn fscore(kappa: f64) -> Self {
        Trigger {
            kind: TriggerKind::FScore,
            kappa,
            beta: 0.0,
        }
    }

    pub fn integrated(kappa: f64, beta: f64) -> Self {
        Trigger {
            kind: TriggerKind::Integrated,
            kappa,
            beta,
        }
    }

    /// Δ(gold, predicted) for this trigger.
    pub fn delta(&self, gold: &[usize], predicted: &[usize], scheme: &TagScheme) -> Result<f64> {
        match self.kind {
            TriggerKind::Hamming => hamming_delta(gold, predicted, self.kappa),
            TriggerKind::FScore => fscore_delta(gold, predicted, self.kappa, scheme),
            TriggerKind::Integrated => {
                integrated_delta(gold, predicted, self.kappa, self.beta, scheme)
            }
        }
    }

    /// Per-position cost added to label scores for loss-augmented Viterbi;
    /// only defined for decomposable triggers.
    pub fn position_cost(&self, gold_label: usize, label: usize) -> f64 {
        debug_assert!(self.kind.decomposes());
        if gold_label == label {
            0.0
        } else {
            self.kappa
        }
    }
}

fn check_lengths(gold: &[usize], predicted: &[usize]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: predicted.len(),
        });
    }
    Ok(())
}

pub fn hamming_delta(gold: &[usize], predicted: &[usize], kappa: f64) -> Result<f64> {
    check_lengths(gold, predicted)?;
    let mismatches = gold.iter().zip(predicted).filter(|(g, p)| g != p).count();
    Ok(kappa * mismatches as f64)
}

/// Exact-span, exact-type entity F1 between two label sequences. Both
/// sides are read with orphan `I-X` taken as `B-X`. Two entity-free
/// sequences score 1; one empty side scores 0.
pub fn sentence_f1(gold: &[usize], predicted: &[usize], scheme: &TagScheme) -> Result<f64> {
    check_lengths(gold, predicted)?;
    let g = entities_lenient(gold, scheme);
    let p = entities_lenient(predicted, scheme);
    Ok(span_f1(&g, &p))
}

fn span_f1<T: Eq + std::hash::Hash>(gold: &[T], predicted: &[T]) -> f64 {
    match (gold.is_empty(), predicted.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let gold: HashSet<&T> = gold.iter().collect();
    let matches = predicted.iter().filter(|s| gold.contains(s)).count() as f64;
    let precision = matches / predicted.len() as f64;
    let recall = matches / gold.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn fscore_delta(
    gold: &[usize],
    predicted: &[usize],
    kappa: f64,
    scheme: &TagScheme,
) -> Result<f64> {
    Ok(kappa * (1.0 - sentence_f1(gold, predicted, scheme)?))
}

pub fn integrated_delta(
    gold: &[usize],
    predicted: &[usize],
    kappa: f64,
    beta: f64,
    scheme: &TagScheme,
) -> Result<f64> {
    Ok(fscore_delta(gold, predicted, kappa, scheme)?
        + beta * hamming_delta(gold, predicted, kappa)?)
}
