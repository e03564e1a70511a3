use rand::Rng;

use crate::embeddings::{EmbeddingTable, InputAssembly};
use crate::network::{BiLstm, ProjectionParams};
use crate::structured::TransitionMatrix;
use crate::tensor::Matrix;
use crate::Result;

/// Every trainable tensor of the tagger.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub input: InputAssembly,
    pub lstm: BiLstm,
    pub projection: ProjectionParams,
    pub transitions: TransitionMatrix,
    /// Bumped on every mutable tensor access; forward caches record it.
    generation: u64,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.input == other.input
            && self.lstm == other.lstm
            && self.projection == other.projection
            && self.transitions == other.transitions
    }
}

/// Read-only view of one named tensor.
#[derive(Debug)]
pub struct TensorView<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
    pub trainable: bool,
}

#[derive(Debug)]
pub struct TensorViewMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
    pub trainable: bool,
}

impl ModelParams {
    pub fn new(
        input: InputAssembly,
        lstm: BiLstm,
        projection: ProjectionParams,
        transitions: TransitionMatrix,
    ) -> Self {
        ModelParams {
            input,
            lstm,
            projection,
            transitions,
            generation: 0,
        }
    }

    /// Glorot-initialized BiLSTM and projection over the given input tables;
    /// zero transition matrix.
    pub fn init<R: Rng>(
        input: InputAssembly,
        hidden_dim: usize,
        labels: usize,
        rng: &mut R,
    ) -> Self {
        let lstm = BiLstm::init(input.width(), hidden_dim, rng);
        let projection = ProjectionParams::init(labels, 2 * hidden_dim, rng);
        Self::new(input, lstm, projection, TransitionMatrix::zeros(labels))
    }

    /// Builds randomly initialized embedding tables then calls [`ModelParams::init`].
    #[allow(clippy::too_many_arguments)]
    pub fn random<R: Rng>(
        vocab_size: usize,
        token_dim: usize,
        feature_tables: &[(usize, usize)],
        slots: Vec<usize>,
        window: usize,
        hidden_dim: usize,
        labels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let tokens = EmbeddingTable::random(vocab_size, token_dim, rng);
        let features = feature_tables
            .iter()
            .map(|&(rows, dim)| EmbeddingTable::random(rows, dim, rng))
            .collect();
        let input = InputAssembly::new(window, tokens, features, slots)?;
        Ok(Self::init(input, hidden_dim, labels, rng))
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn labels(&self) -> usize {
        self.transitions.labels()
    }

    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = Vec::new();
        out.push(view(
            "embed.tokens",
            &self.input.tokens.vectors,
            self.input.tokens.trainable,
        ));
        for (i, t) in self.input.features.iter().enumerate() {
            out.push(view(
                &format!("embed.features.{i}"),
                &t.vectors,
                t.trainable,
            ));
        }
        for (dir, p) in [
            ("forward", &self.lstm.forward),
            ("backward", &self.lstm.backward),
        ] {
            out.push(view(&format!("lstm.{dir}.weights"), &p.weights, true));
            out.push(vector_view(&format!("lstm.{dir}.bias"), &p.bias));
        }
        out.push(view("projection.weights", &self.projection.weights, true));
        out.push(vector_view("projection.bias", &self.projection.bias));
        out.push(view("transitions", self.transitions.matrix(), true));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        self.generation += 1;
        let mut out = Vec::new();
        let tokens = &mut self.input.tokens;
        out.push(view_mut(
            "embed.tokens".into(),
            &mut tokens.vectors,
            tokens.trainable,
        ));
        for (i, t) in self.input.features.iter_mut().enumerate() {
            out.push(view_mut(
                format!("embed.features.{i}"),
                &mut t.vectors,
                t.trainable,
            ));
        }
        for (dir, p) in [
            ("forward", &mut self.lstm.forward),
            ("backward", &mut self.lstm.backward),
        ] {
            let len = p.bias.len();
            out.push(view_mut(
                format!("lstm.{dir}.weights"),
                &mut p.weights,
                true,
            ));
            out.push(TensorViewMut {
                name: format!("lstm.{dir}.bias"),
                rows: 1,
                cols: len,
                data: &mut p.bias,
                trainable: true,
            });
        }
        out.push(view_mut(
            "projection.weights".into(),
            &mut self.projection.weights,
            true,
        ));
        let len = self.projection.bias.len();
        out.push(TensorViewMut {
            name: "projection.bias".into(),
            rows: 1,
            cols: len,
            data: &mut self.projection.bias,
            trainable: true,
        });
        out.push(view_mut(
            "transitions".into(),
            self.transitions.matrix_mut(),
            true,
        ));
        out
    }

    /// `Σ θ²` over every trainable tensor.
    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|t| t.trainable)
            .map(|t| t.data.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

fn view<'a>(name: &str, m: &'a Matrix, trainable: bool) -> TensorView<'a> {
    TensorView {
        name: name.to_string(),
        rows: m.rows(),
        cols: m.cols(),
        data: m.as_slice(),
        trainable,
    }
}

fn vector_view<'a>(name: &str, v: &'a [f64]) -> TensorView<'a> {
    TensorView {
        name: name.to_string(),
        rows: 1,
        cols: v.len(),
        data: v,
        trainable: true,
    }
}

fn view_mut(name: String, m: &mut Matrix, trainable: bool) -> TensorViewMut<'_> {
    let (rows, cols) = m.shape();
    TensorViewMut {
        name,
        rows,
        cols,
        data: m.as_mut_slice(),
        trainable,
    }
}
