//! Central finite-difference check of the instance loss `q` against the
//! analytic subgradient, over every trainable tensor of tiny random models.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{repair_bio, EncodedSentence, TagScheme};
use crate::triggers::{Trigger, TriggerKind};
use crate::Result;

use super::inference::{instance_loss, instance_loss_and_gradient};
use super::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Number of independent tiny instances.
    pub instances: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    /// Redraw budget per instance when the maximizer is the gold sequence or
    /// changes within ±ε.
    pub max_resamples: usize,
    /// Fault injection: perturbs the analytic gradient before comparing.
    pub corrupt: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seed: 1,
            instances: 24,
            epsilon: 1e-4,
            tolerance: 1e-4,
            floor: 1e-6,
            max_resamples: 200,
            corrupt: false,
        }
    }
}

/// Worst entry of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCheck {
    pub seed: u64,
    pub trigger: TriggerKind,
    pub length: usize,
    pub parameters: usize,
    pub resamples: usize,
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub checks: Vec<InstanceCheck>,
}

impl GradcheckReport {
    pub fn worst(&self) -> Option<&InstanceCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }

    pub fn max_relative_error(&self) -> f64 {
        self.worst().map_or(0.0, |w| w.relative_error)
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.max_relative_error() <= self.tolerance
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "seed\ttrigger\tn\tparams\tresamples\tmax_rel_err\ttensor"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{:.3e}\t{}[{}]",
                c.seed,
                c.trigger,
                c.length,
                c.parameters,
                c.resamples,
                c.relative_error,
                c.tensor,
                c.index
            )?;
        }
        if let Some(w) = self.worst() {
            writeln!(
                f,
                "worst: seed {} {}[{}] analytic {:.9e} numeric {:.9e} relative error {:.3e} (tolerance {:.0e})",
                w.seed, w.tensor, w.index, w.analytic, w.numeric, w.relative_error, self.tolerance
            )?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub fn gradcheck_scheme() -> TagScheme {
    TagScheme::from_entity_types(&["X"]).expect("valid scheme")
}

/// Tiny model and labeled sentence. Even draws use a 3-wide window over
/// tokens only, odd draws a 1-wide window with two feature slots, so both
/// input paths are exercised with LSTM input width ≤ 8.
fn draw_instance(
    rng: &mut ChaCha8Rng,
    scheme: &TagScheme,
    windowed: bool,
) -> Result<(ModelParams, EncodedSentence)> {
    let labels = scheme.len();
    let vocab = 6;
    let hidden = rng.gen_range(2..=4);
    let n = rng.gen_range(2..=4);
    let (params, feature_ids) = if windowed {
        let p = ModelParams::random(vocab, 2, &[], vec![], 3, hidden, labels, rng)?;
        (p, vec![vec![]; n])
    } else {
        let p = ModelParams::random(vocab, 3, &[(5, 2)], vec![0, 0], 1, hidden, labels, rng)?;
        let f = (0..n)
            .map(|_| vec![rng.gen_range(0..5), rng.gen_range(0..5)])
            .collect();
        (p, f)
    };
    let mut params = params;
    // spread the transition scores so the decoders see non-trivial structure
    for v in params.transitions.matrix_mut().as_mut_slice() {
        *v = rng.gen_range(-0.5..0.5);
    }
    let mut gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..labels)).collect();
    repair_bio(&mut gold, scheme);
    let sentence = EncodedSentence {
        token_ids: (0..n).map(|_| rng.gen_range(0..vocab)).collect(),
        feature_ids,
        gold: Some(gold),
    };
    Ok((params, sentence))
}

fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

struct EntryCheck {
    tensor: String,
    index: usize,
    analytic: f64,
    numeric: f64,
    relative_error: f64,
}

/// Checks one instance, returning its worst entry and the number of entries
/// checked; `None` when the maximizer is not locally stable (or
/// is the gold sequence) and the instance must be redrawn.
fn check_instance(
    params: &ModelParams,
    sentence: &EncodedSentence,
    scheme: &TagScheme,
    trigger: &Trigger,
    beam_k: usize,
    config: &GradcheckConfig,
) -> Result<Option<(EntryCheck, usize)>> {
    let (_, best, grads, _) =
        instance_loss_and_gradient(sentence, params, scheme, trigger, beam_k)?;
    let Some(grads) = grads else {
        return Ok(None);
    };
    let mut analytic = grads.dense(params);
    if config.corrupt {
        analytic.iter_mut().flatten().for_each(|g| *g *= 1.01);
    }
    let names: Vec<(String, bool)> = params
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.trainable))
        .collect();
    let mut probe = params.clone();
    let mut worst = EntryCheck {
        tensor: String::new(),
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        relative_error: -1.0,
    };
    let mut count = 0;
    for (ti, (name, trainable)) in names.iter().enumerate() {
        if !trainable {
            continue;
        }
        for (k, &a) in analytic[ti].iter().enumerate() {
            let original = probe.tensors_mut()[ti].data[k];
            let mut eval_at = |value: f64| -> Result<Option<f64>> {
                probe.tensors_mut()[ti].data[k] = value;
                let (q, b) = instance_loss(sentence, &probe, scheme, trigger, beam_k)?;
                Ok((b.sequence.labels == best.sequence.labels).then_some(q))
            };
            let plus = eval_at(original + config.epsilon)?;
            let minus = eval_at(original - config.epsilon)?;
            probe.tensors_mut()[ti].data[k] = original;
            let (Some(plus), Some(minus)) = (plus, minus) else {
                return Ok(None);
            };
            let numeric = (plus - minus) / (2.0 * config.epsilon);
            let err = relative_error(a, numeric, config.floor);
            count += 1;
            if err > worst.relative_error {
                worst = EntryCheck {
                    tensor: name.clone(),
                    index: k,
                    analytic: a,
                    numeric,
                    relative_error: err,
                };
            }
        }
    }
    Ok(Some((worst, count)))
}

/// Runs the check over `config.instances` seeds, rotating through the three
/// triggers. The beam is wide enough to enumerate every sequence, so the
/// loss-augmented maximizer is exact for all triggers.
pub fn gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let scheme = gradcheck_scheme();
    let kinds = [
        TriggerKind::Hamming,
        TriggerKind::FScore,
        TriggerKind::Integrated,
    ];
    let beam_k = scheme.len().pow(4);
    let mut checks = Vec::with_capacity(config.instances);
    for i in 0..config.instances {
        let seed = config.seed.wrapping_add(i as u64);
        let kind = kinds[i % kinds.len()];
        let trigger = Trigger::new(kind, 0.2, 0.2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for resamples in 0..=config.max_resamples {
            let (params, sentence) = draw_instance(&mut rng, &scheme, i % 2 == 0)?;
            if let Some((worst, parameters)) =
                check_instance(&params, &sentence, &scheme, &trigger, beam_k, config)?
            {
                checks.push(InstanceCheck {
                    seed,
                    trigger: kind,
                    length: sentence.len(),
                    parameters,
                    resamples,
                    tensor: worst.tensor,
                    index: worst.index,
                    analytic: worst.analytic,
                    numeric: worst.numeric,
                    relative_error: worst.relative_error,
                });
                break;
            }
        }
    }
    Ok(GradcheckReport {
        tolerance: config.tolerance,
        checks,
    })
}
