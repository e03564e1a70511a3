//! Plain SGD with an L2 penalty: `θ ← θ − lr·(g + λ·θ)` on every trainable
//! tensor.

use crate::embeddings::RowGrads;
use crate::network::Gradients;
use crate::{Error, Result};

use super::ModelParams;

enum GradRef<'a> {
    Dense(&'a [f64]),
    Rows(&'a RowGrads),
}

fn grad_refs(g: &Gradients) -> Vec<GradRef<'_>> {
    let mut out = vec![GradRef::Rows(&g.tokens)];
    out.extend(g.features.iter().map(GradRef::Rows));
    for l in [&g.lstm.forward, &g.lstm.backward] {
        out.push(GradRef::Dense(l.weights.as_slice()));
        out.push(GradRef::Dense(&l.bias));
    }
    out.push(GradRef::Dense(g.projection_weights.as_slice()));
    out.push(GradRef::Dense(&g.projection_bias));
    out.push(GradRef::Dense(g.transitions.as_slice()));
    out
}

fn check_shapes(params: &ModelParams, grads: &[GradRef<'_>]) -> Result<()> {
    let tensors = params.tensors();
    if tensors.len() != grads.len() {
        return Err(Error::Dimension(format!(
            "{} gradient tensors for {} parameter tensors",
            grads.len(),
            tensors.len()
        )));
    }
    for (t, g) in tensors.iter().zip(grads) {
        match g {
            GradRef::Dense(d) if d.len() != t.data.len() => {
                return Err(Error::Dimension(format!(
                    "gradient for {} has {} values, expected {}",
                    t.name,
                    d.len(),
                    t.data.len()
                )))
            }
            GradRef::Rows(rows) => {
                if let Some((r, v)) = rows.iter().find(|(&r, v)| r >= t.rows || v.len() != t.cols) {
                    return Err(Error::Dimension(format!(
                        "gradient row {r} (width {}) does not fit {} ({}×{})",
                        v.len(),
                        t.name,
                        t.rows,
                        t.cols
                    )));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn sgd_step(params: &mut ModelParams, grads: &Gradients, lr: f64, l2: f64) -> Result<()> {
    update(params, Some(grads), lr, l2)
}

/// One update; `None` means a zero gradient (only the L2 decay applies).
pub(crate) fn update(
    params: &mut ModelParams,
    grads: Option<&Gradients>,
    lr: f64,
    l2: f64,
) -> Result<()> {
    let refs = grads.map(grad_refs);
    if let Some(r) = &refs {
        check_shapes(params, r)?;
    }
    if refs.is_none() && (l2 == 0.0 || lr == 0.0) {
        return Ok(());
    }
    for (i, tensor) in params.tensors_mut().into_iter().enumerate() {
        if !tensor.trainable {
            continue;
        }
        let data = tensor.data;
        match refs.as_ref().map(|r| &r[i]) {
            None => data
                .iter_mut()
                .for_each(|theta| *theta -= lr * (0.0 + l2 * *theta)),
            Some(GradRef::Dense(g)) => {
                for (theta, gi) in data.iter_mut().zip(g.iter()) {
                    *theta -= lr * (gi + l2 * *theta);
                }
            }
            Some(GradRef::Rows(rows)) => {
                let cols = tensor.cols;
                for (r, row) in data.chunks_mut(cols.max(1)).enumerate() {
                    match rows.get(&r) {
                        Some(g) => {
                            for (theta, gi) in row.iter_mut().zip(g) {
                                *theta -= lr * (gi + l2 * *theta);
                            }
                        }
                        None if l2 != 0.0 => row
                            .iter_mut()
                            .for_each(|theta| *theta -= lr * (0.0 + l2 * *theta)),
                        None => {}
                    }
                }
            }
        }
    }
    Ok(())
}
