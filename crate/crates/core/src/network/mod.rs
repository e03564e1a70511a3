//! BiLSTM encoder, softmax emission layer, and exact reverse-mode gradients
//! of sentence-level scores with respect to every parameter.

pub mod emission;
pub mod lstm;

use crate::corpus::EncodedSentence;
use crate::embeddings::RowGrads;
use crate::tensor::Matrix;
use crate::training::ModelParams;
use crate::{Error, Result};

pub use emission::{emissions, EmissionMatrix, ProjectionParams};
pub use lstm::{bilstm_forward, lstm_cell, BiLstm, BiLstmGrads, LstmGrads, LstmParams};

/// Cached activations of one sentence's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    generation: u64,
    inputs: Vec<Vec<f64>>,
    lstm: lstm::BiLstmCache,
    hidden: Vec<Vec<f64>>,
    pub emissions: EmissionMatrix,
}

impl ForwardPass {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn hidden(&self) -> &[Vec<f64>] {
        &self.hidden
    }
}

pub fn forward(params: &ModelParams, sentence: &EncodedSentence) -> Result<ForwardPass> {
    let inputs = params.input.assemble_window(sentence);
    let (hidden, cache) = lstm::bilstm_forward_cached(&inputs, &params.lstm)?;
    if params.projection.weights.cols() != params.lstm.output_dim() {
        return Err(Error::Dimension(format!(
            "projection expects width {}, encoder produces {}",
            params.projection.weights.cols(),
            params.lstm.output_dim()
        )));
    }
    let emissions = emission::emissions(&hidden, &params.projection);
    Ok(ForwardPass {
        generation: params.generation(),
        inputs,
        lstm: cache,
        hidden,
        emissions,
    })
}

/// Parameter gradients; embedding tables are sparse by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tokens: RowGrads,
    pub features: Vec<RowGrads>,
    pub lstm: BiLstmGrads,
    pub projection_weights: Matrix,
    pub projection_bias: Vec<f64>,
    pub transitions: Matrix,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            tokens: RowGrads::new(),
            features: vec![RowGrads::new(); params.input.features.len()],
            lstm: BiLstmGrads::zeros_like(&params.lstm),
            projection_weights: Matrix::zeros(
                params.projection.weights.rows(),
                params.projection.weights.cols(),
            ),
            projection_bias: vec![0.0; params.projection.bias.len()],
            transitions: Matrix::zeros(
                params.transitions.matrix().rows(),
                params.transitions.matrix().cols(),
            ),
        }
    }

    /// Dense copies in the order of [`ModelParams::tensors`].
    pub fn dense(&self, params: &ModelParams) -> Vec<Vec<f64>> {
        let sparse = |rows: &RowGrads, table: &Matrix| {
            let mut d = vec![0.0; table.rows() * table.cols()];
            for (&r, g) in rows {
                d[r * table.cols()..(r + 1) * table.cols()].copy_from_slice(g);
            }
            d
        };
        let mut out = vec![sparse(&self.tokens, &params.input.tokens.vectors)];
        for (g, t) in self.features.iter().zip(&params.input.features) {
            out.push(sparse(g, &t.vectors));
        }
        for g in [&self.lstm.forward, &self.lstm.backward] {
            out.push(g.weights.as_slice().to_vec());
            out.push(g.bias.clone());
        }
        out.push(self.projection_weights.as_slice().to_vec());
        out.push(self.projection_bias.clone());
        out.push(self.transitions.as_slice().to_vec());
        out
    }

    pub fn is_zero(&self) -> bool {
        let dense_zero = |v: &[f64]| v.iter().all(|&x| x == 0.0);
        self.tokens.values().all(|v| dense_zero(v))
            && self
                .features
                .iter()
                .all(|f| f.values().all(|v| dense_zero(v)))
            && [&self.lstm.forward, &self.lstm.backward]
                .iter()
                .all(|g| dense_zero(g.weights.as_slice()) && dense_zero(&g.bias))
            && dense_zero(self.projection_weights.as_slice())
            && dense_zero(&self.projection_bias)
            && dense_zero(self.transitions.as_slice())
    }
}

/// Adds `sign · ∂s(labels)/∂(label scores, A)` into the two upstream buffers.
pub fn accumulate_score_gradient(
    labels: &[usize],
    sign: f64,
    score_grad: &mut [f64],
    transition_grad: &mut Matrix,
) {
    let width = transition_grad.cols();
    let start = transition_grad.rows() - 1;
    let mut prev = start;
    for (t, &l) in labels.iter().enumerate() {
        score_grad[t * width + l] += sign;
        transition_grad.add_at(prev, l, sign);
        prev = l;
    }
}

/// Backpropagates upstream gradients on the `n × |Y|` label-score matrix and
/// on the transition matrix through the whole network.
pub fn backward(
    params: &ModelParams,
    sentence: &EncodedSentence,
    pass: &ForwardPass,
    score_grad: &[f64],
    transition_grad: &Matrix,
) -> Result<Gradients> {
    if pass.generation != params.generation() || pass.len() != sentence.len() {
        return Err(Error::StaleCache);
    }
    let labels = params.labels();
    if score_grad.len() != pass.len() * labels
        || transition_grad.shape() != params.transitions.matrix().shape()
    {
        return Err(Error::Dimension(
            "upstream gradient shapes do not match the forward pass".into(),
        ));
    }
    let mut grads = Gradients::zeros_like(params);
    grads.transitions = transition_grad.clone();
    let dh = emission::emission_backward(
        &pass.hidden,
        &pass.emissions,
        score_grad,
        &params.projection,
        &mut grads.projection_weights,
        &mut grads.projection_bias,
    );
    let dx = lstm::bilstm_backward(&pass.lstm, &dh, &params.lstm, &mut grads.lstm);
    params
        .input
        .scatter_gradient(sentence, &dx, &mut grads.tokens, &mut grads.features);
    for (table, rows) in std::iter::once(&params.input.tokens)
        .chain(&params.input.features)
        .zip(std::iter::once(&mut grads.tokens).chain(grads.features.iter_mut()))
    {
        if !table.trainable {
            rows.clear();
        }
    }
    Ok(grads)
}

/// Gradient of `s(predicted) − s(gold)` for one sentence.
pub fn score_difference_gradient(
    params: &ModelParams,
    sentence: &EncodedSentence,
    pass: &ForwardPass,
    predicted: &[usize],
    gold: &[usize],
) -> Result<Gradients> {
    let n = pass.len();
    if predicted.len() != n || gold.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: if predicted.len() != n {
                predicted.len()
            } else {
                gold.len()
            },
        });
    }
    let labels = params.labels();
    let mut score_grad = vec![0.0; n * labels];
    let mut transition_grad = Matrix::zeros(labels + 1, labels);
    accumulate_score_gradient(predicted, 1.0, &mut score_grad, &mut transition_grad);
    accumulate_score_gradient(gold, -1.0, &mut score_grad, &mut transition_grad);
    backward(params, sentence, pass, &score_grad, &transition_grad)
}
