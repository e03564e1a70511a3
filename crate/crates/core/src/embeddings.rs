//! Embedding lookup tables, the word2vec text-format loader, and windowed
//! input assembly.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::features::EncodedSentence;
use crate::corpus::vocab::{Vocab, PAD, UNK};
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Bound of the uniform initializer for rows without a pretrained vector.
pub const FALLBACK_INIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vectors: Matrix,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// Every row uniform in ±[`FALLBACK_INIT`]. Tables always hold at least the
    /// UNK and PAD rows.
    pub fn random<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Self {
        EmbeddingTable {
            vectors: Matrix::uniform(rows.max(2), dim, FALLBACK_INIT, rng),
            trainable: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn vector(&self, idx: usize) -> &[f64] {
        self.vectors.row(idx)
    }
}

/// Loads word2vec text output: `<word> v1 … v_dim` per line, with an optional
/// `<count> <dim>` header. Vocabulary words missing from the file get the
/// uniform fallback; UNK becomes the mean of every vector in the file (zero
/// for an empty file).
pub fn load_pretrained<R: Rng>(
    text: &str,
    vocab: &Vocab,
    dim: usize,
    rng: &mut R,
) -> Result<EmbeddingTable> {
    let mut found: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    let mut sum = vec![0.0; dim];
    let mut loaded = 0usize;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok()) {
            let header_dim: usize = fields[1].parse().expect("checked above");
            if header_dim != dim {
                return Err(Error::EmbeddingDim {
                    line: line_no,
                    expected: dim,
                    found: header_dim,
                });
            }
            continue;
        }
        let values = &fields[1..];
        if values.len() != dim {
            return Err(Error::EmbeddingDim {
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        let vector = values
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::EmbeddingValue {
                        line: line_no,
                        value: v.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        for (s, v) in sum.iter_mut().zip(&vector) {
            *s += v;
        }
        loaded += 1;
        if let Some(idx) = vocab.get(fields[0]) {
            let slot = &mut found[idx];
            if slot.is_none() {
                *slot = Some(vector);
            }
        }
    }

    let mut vectors = Matrix::zeros(vocab.len().max(2), dim);
    for (idx, slot) in found.into_iter().enumerate() {
        if idx == UNK {
            continue;
        }
        let row = vectors.row_mut(idx);
        match slot {
            Some(v) => row.copy_from_slice(&v),
            None => row
                .iter_mut()
                .for_each(|x| *x = rng.gen_range(-FALLBACK_INIT..=FALLBACK_INIT)),
        }
    }
    if loaded > 0 {
        let unk = vectors.row_mut(UNK);
        for (u, s) in unk.iter_mut().zip(&sum) {
            *u = s / loaded as f64;
        }
    }
    Ok(EmbeddingTable {
        vectors,
        trainable: true,
    })
}

/// Sparse per-row gradient of one table.
pub type RowGrads = BTreeMap<usize, Vec<f64>>;

/// Concatenates a window of token embeddings with per-position feature
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct InputAssembly {
    pub window: usize,
    pub tokens: EmbeddingTable,
    pub features: Vec<EmbeddingTable>,
    /// Feature table read by each slot of `EncodedSentence::feature_ids`.
    pub slots: Vec<usize>,
}

impl InputAssembly {
    pub fn new(
        window: usize,
        tokens: EmbeddingTable,
        features: Vec<EmbeddingTable>,
        slots: Vec<usize>,
    ) -> Result<Self> {
        if window.is_multiple_of(2) {
            return Err(Error::Config(format!("window must be odd, got {window}")));
        }
        if let Some(&bad) = slots.iter().find(|&&s| s >= features.len()) {
            return Err(Error::Config(format!(
                "feature slot refers to missing table {bad}"
            )));
        }
        Ok(InputAssembly {
            window,
            tokens,
            features,
            slots,
        })
    }

    pub fn half_window(&self) -> usize {
        (self.window - 1) / 2
    }

    pub fn width(&self) -> usize {
        self.window * self.tokens.dim()
            + self
                .slots
                .iter()
                .map(|&s| self.features[s].dim())
                .sum::<usize>()
    }

    fn token_at(&self, sentence: &EncodedSentence, pos: isize) -> usize {
        if pos < 0 || pos as usize >= sentence.len() {
            PAD
        } else {
            sentence.token_ids[pos as usize]
        }
    }

    pub fn assemble_window(&self, sentence: &EncodedSentence) -> Vec<Vec<f64>> {
        let w = self.half_window() as isize;
        (0..sentence.len())
            .map(|t| {
                let mut v = Vec::with_capacity(self.width());
                for off in -w..=w {
                    v.extend_from_slice(
                        self.tokens
                            .vector(self.token_at(sentence, t as isize + off)),
                    );
                }
                for (slot, &id) in self.slots.iter().zip(&sentence.feature_ids[t]) {
                    v.extend_from_slice(self.features[*slot].vector(id));
                }
                v
            })
            .collect()
    }

    /// Routes gradients w.r.t. assembled inputs back onto embedding rows.
    pub fn scatter_gradient(
        &self,
        sentence: &EncodedSentence,
        input_grads: &[Vec<f64>],
        token_grads: &mut RowGrads,
        feature_grads: &mut [RowGrads],
    ) {
        let w = self.half_window() as isize;
        let dim = self.tokens.dim();
        for (t, g) in input_grads.iter().enumerate() {
            let mut offset = 0;
            for off in -w..=w {
                let row = self.token_at(sentence, t as isize + off);
                add_row(token_grads, row, &g[offset..offset + dim]);
                offset += dim;
            }
            for (slot, &id) in self.slots.iter().zip(&sentence.feature_ids[t]) {
                let d = self.features[*slot].dim();
                add_row(&mut feature_grads[*slot], id, &g[offset..offset + d]);
                offset += d;
            }
        }
    }
}

fn add_row(grads: &mut RowGrads, row: usize, g: &[f64]) {
    let acc = grads.entry(row).or_insert_with(|| vec![0.0; g.len()]);
    for (a, x) in acc.iter_mut().zip(g) {
        *a += x;
    }
}
