//! Softmax emission layer `y_t = softmax(W_hy h_t + b_y)` and the per-position
//! label score `log y_t[l]`.

use rand::Rng;

use crate::tensor::{axpy, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionParams {
    /// `|Y| × 2·hidden`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl ProjectionParams {
    pub fn zeros(labels: usize, input: usize) -> Self {
        ProjectionParams {
            weights: Matrix::zeros(labels, input),
            bias: vec![0.0; labels],
        }
    }

    pub fn init<R: Rng>(labels: usize, input: usize, rng: &mut R) -> Self {
        ProjectionParams {
            weights: Matrix::glorot(labels, input, rng),
            bias: vec![0.0; labels],
        }
    }

    pub fn labels(&self) -> usize {
        self.weights.rows()
    }
}

/// Row-stochastic `n × |Y|` matrix. Log-probabilities are computed directly
/// from the logits so label scores stay finite even when a probability
/// underflows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    rows: usize,
    labels: usize,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl EmissionMatrix {
    /// Softmax of each logit row, with max subtraction.
    pub fn from_logits(logits: &[Vec<f64>]) -> Self {
        let labels = logits.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(logits.len() * labels);
        let mut log_probs = Vec::with_capacity(logits.len() * labels);
        for row in logits {
            debug_assert_eq!(row.len(), labels);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
            let log_sum = sum.ln();
            for z in row {
                let lp = z - max - log_sum;
                log_probs.push(lp);
                probs.push(lp.exp());
            }
        }
        EmissionMatrix {
            rows: logits.len(),
            labels,
            probs,
            log_probs,
        }
    }

    /// From explicit probability rows (used for fixtures and tests).
    pub fn from_probs(rows: &[Vec<f64>]) -> Self {
        let labels = rows.first().map_or(0, Vec::len);
        let probs: Vec<f64> = rows.iter().flatten().copied().collect();
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        EmissionMatrix {
            rows: rows.len(),
            labels,
            probs,
            log_probs,
        }
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn prob(&self, t: usize, l: usize) -> f64 {
        self.probs[t * self.labels + l]
    }

    pub fn prob_row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.labels..(t + 1) * self.labels]
    }

    /// `log y_t[l]`, the per-position label score.
    pub fn label_score(&self, t: usize, l: usize) -> f64 {
        self.log_probs[t * self.labels + l]
    }

    /// Row-major `n × |Y|` label scores.
    pub fn label_scores(&self) -> &[f64] {
        &self.log_probs
    }
}

pub fn logits(h: &[Vec<f64>], proj: &ProjectionParams) -> Vec<Vec<f64>> {
    h.iter()
        .map(|ht| {
            let mut z = proj.weights.matvec(ht);
            axpy(1.0, &proj.bias, &mut z);
            z
        })
        .collect()
}

pub fn emissions(h: &[Vec<f64>], proj: &ProjectionParams) -> EmissionMatrix {
    EmissionMatrix::from_logits(&logits(h, proj))
}

/// Backward through log-softmax and the projection. `score_grad` is the
/// upstream gradient on the `n × |Y|` label-score matrix. Returns `dL/dh_t`.
pub fn emission_backward(
    h: &[Vec<f64>],
    y: &EmissionMatrix,
    score_grad: &[f64],
    proj: &ProjectionParams,
    grad_w: &mut Matrix,
    grad_b: &mut [f64],
) -> Vec<Vec<f64>> {
    let labels = y.labels();
    h.iter()
        .enumerate()
        .map(|(t, ht)| {
            let g = &score_grad[t * labels..(t + 1) * labels];
            let total: f64 = g.iter().sum();
            let dz: Vec<f64> = g
                .iter()
                .zip(y.prob_row(t))
                .map(|(gi, p)| gi - p * total)
                .collect();
            grad_w.add_outer(&dz, ht);
            axpy(1.0, &dz, grad_b);
            let mut dh = vec![0.0; ht.len()];
            proj.weights.add_transpose_matvec(&dz, &mut dh);
            dh
        })
        .collect()
}
