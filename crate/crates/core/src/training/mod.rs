//! Max-margin training: the regularized objective, per-instance SGD with
//! learning-rate decay, dev-set model selection and model files.

pub mod gradcheck;
pub mod inference;
pub mod model;
pub mod params;
pub mod sgd;

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{EncodedSentence, MentionKind, Sentence, TagScheme};
use crate::eval::{evaluate_sequences, EvalReport};
use crate::triggers::{Trigger, TriggerKind};
use crate::{Error, Result};

pub use inference::{
    instance_loss, loss_augmented_decode, loss_augmented_predict, predict, Augmented,
};
pub use model::{load_model, save_model, Model};
pub use params::ModelParams;
pub use sgd::sgd_step;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub trigger: Trigger,
    pub learning_rate: f64,
    pub decay: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub beam_k: usize,
    pub seed: u64,
    pub window: usize,
    pub token_dim: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            trigger: Trigger::default(),
            learning_rate: 0.1,
            decay: 0.95,
            l2_lambda: 1e-6,
            epochs: 20,
            beam_k: 8,
            seed: 1,
            window: 5,
            token_dim: 100,
            feature_dim: 100,
            hidden_dim: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        Trigger::new(self.trigger.kind, self.trigger.kappa, self.trigger.beta)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2 must be non-negative, got {}", self.l2_lambda));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.beam_k == 0 {
            return bad("beam-k must be at least 1".into());
        }
        if self.window.is_multiple_of(2) {
            return bad(format!("window must be odd, got {}", self.window));
        }
        if self.token_dim == 0 || self.feature_dim == 0 || self.hidden_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        Ok(())
    }

    /// Learning rate of 0-based epoch `e`: `lr · decay^e`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi(epoch as i32)
    }
}

/// `J(θ) = (1/m) Σ q_i(θ) + (λ/2)·‖θ‖²`.
pub fn objective(
    dataset: &[EncodedSentence],
    params: &ModelParams,
    scheme: &TagScheme,
    config: &TrainConfig,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let losses = dataset
        .par_iter()
        .map(|s| instance_loss(s, params, scheme, &config.trigger, config.beam_k).map(|(q, _)| q))
        .collect::<Result<Vec<f64>>>()?;
    let mean = losses.iter().sum::<f64>() / dataset.len() as f64;
    Ok(mean + 0.5 * config.l2_lambda * params.squared_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    /// Dev report; `None` when the dev set is empty.
    pub dev: Option<EvalReport>,
}

impl EpochMetrics {
    pub fn dev_overall_f1(&self) -> Option<f64> {
        self.dev.as_ref().map(|d| d.overall.f1)
    }
}

impl fmt::Display for EpochMetrics {
    /// `epoch  lr  mean-q  named-F1  nominal-F1  overall-F1`, tab-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.6}\t{:.6}",
            self.epoch, self.learning_rate, self.mean_loss
        )?;
        match &self.dev {
            Some(d) => write!(
                f,
                "\t{:.6}\t{:.6}\t{:.6}",
                d.group(MentionKind::Named).f1,
                d.group(MentionKind::Nominal).f1,
                d.overall.f1
            ),
            None => write!(f, "\t-\t-\t-"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub log: Vec<EpochMetrics>,
}

impl TrainOutcome {
    pub fn log_text(&self) -> String {
        self.log.iter().map(|m| format!("{m}\n")).collect()
    }
}

/// Viterbi predictions for every sentence, in input order.
pub fn predict_all(sentences: &[EncodedSentence], params: &ModelParams) -> Result<Vec<Vec<usize>>> {
    sentences
        .par_iter()
        .map(|s| predict(s, params).map(|p| p.labels))
        .collect()
}

pub fn evaluate_dev(
    dev: &[EncodedSentence],
    params: &ModelParams,
    scheme: &TagScheme,
) -> Result<EvalReport> {
    let predicted = predict_all(dev, params)?;
    let gold = dev.iter().map(|s| s.gold()).collect::<Result<Vec<_>>>()?;
    evaluate_sequences(&gold, &predicted, scheme)
}

/// Per-instance SGD over shuffled epochs. After each epoch the dev set is
/// decoded; the parameters with the best dev overall F1 are returned (the
/// earliest epoch on ties; the last epoch when `dev` is empty).
pub fn train(
    train_set: &[EncodedSentence],
    dev_set: &[EncodedSentence],
    scheme: &TagScheme,
    config: &TrainConfig,
    init: ModelParams,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_set.iter().chain(dev_set).any(|s| s.gold.is_none()) {
        return Err(Error::MissingGold);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut params = init;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for &i in &order {
            let (q, _, grads, _) = inference::instance_loss_and_gradient(
                &train_set[i],
                &params,
                scheme,
                &config.trigger,
                config.beam_k,
            )?;
            total_loss += q;
            sgd::update(&mut params, grads.as_ref(), lr, config.l2_lambda)?;
        }
        let dev = if dev_set.is_empty() {
            None
        } else {
            Some(evaluate_dev(dev_set, &params, scheme)?)
        };
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            learning_rate: lr,
            mean_loss: total_loss / train_set.len() as f64,
            dev,
        };
        let score = metrics.dev_overall_f1().unwrap_or(f64::NEG_INFINITY);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => score > *b || dev_set.is_empty(),
        };
        if improved {
            best = Some((score, epoch + 1, params.clone()));
        }
        log.push(metrics);
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        best_epoch,
        log,
    })
}

/// One β sweep point: the integrated trigger's β and the resulting overall
/// F1 of the selected model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub beta: f64,
    pub overall_f1: f64,
}

/// Trains one integrated-trigger model per β and scores it on `dev` (on
/// `train_set` when `dev` is empty). `build` creates the initial model for a
/// given config, so every β starts from the same seed.
pub fn beta_sweep<F>(
    train_set: &[Sentence],
    dev: &[Sentence],
    config: &TrainConfig,
    betas: &[f64],
    build: F,
) -> Result<Vec<SweepPoint>>
where
    F: Fn(&TrainConfig) -> Result<Model>,
{
    let mut points = Vec::with_capacity(betas.len());
    for &beta in betas {
        let mut cfg = config.clone();
        cfg.trigger = Trigger::new(TriggerKind::Integrated, config.trigger.kappa, beta)?;
        let model = build(&cfg)?;
        let train_enc = model.encode_all(train_set)?;
        let dev_enc = model.encode_all(dev)?;
        let outcome = train(
            &train_enc,
            &dev_enc,
            &model.scheme,
            &cfg,
            model.params.clone(),
        )?;
        let eval_set = if dev_enc.is_empty() {
            &train_enc
        } else {
            &dev_enc
        };
        let report = evaluate_dev(eval_set, &outcome.params, &model.scheme)?;
        points.push(SweepPoint {
            beta,
            overall_f1: report.overall.f1,
        });
    }
    Ok(points)
}

/// `beta\toverall_f1` header plus one line per point.
pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = String::from("beta\toverall_f1\n");
    for p in points {
        out.push_str(&format!("{}\t{:.6}\n", p.beta, p.overall_f1));
    }
    out
}
