//! Forget-gate LSTM (no peepholes) and its bidirectional wrapper, with
//! cached forward state for backpropagation through time.

use rand::Rng;

use crate::tensor::{axpy, sigmoid, Matrix};
use crate::{Error, Result};

/// Gate blocks are stacked row-wise in the order input, forget, output,
/// candidate; each block is `hidden × (input + hidden)` acting on `[x; h_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            input_dim,
            hidden_dim,
            weights: Matrix::zeros(4 * hidden_dim, input_dim + hidden_dim),
            bias: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Glorot-uniform per gate block, zero biases.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let cols = input_dim + hidden_dim;
        for gate in 0..4 {
            let block = Matrix::glorot(hidden_dim, cols, rng);
            let start = gate * hidden_dim * cols;
            p.weights.as_mut_slice()[start..start + hidden_dim * cols]
                .copy_from_slice(block.as_slice());
        }
        p
    }

    fn check(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
        if x.len() != self.input_dim
            || h_prev.len() != self.hidden_dim
            || c_prev.len() != self.hidden_dim
        {
            return Err(Error::Dimension(format!(
                "lstm cell expects x:{} h:{} c:{}, got x:{} h:{} c:{}",
                self.input_dim,
                self.hidden_dim,
                self.hidden_dim,
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros_like(p: &LstmParams) -> Self {
        LstmGrads {
            weights: Matrix::zeros(p.weights.rows(), p.weights.cols()),
            bias: vec![0.0; p.bias.len()],
        }
    }
}

/// Everything one cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct CellCache {
    z: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// One step: gates from `[x; h_prev]`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check(x, h_prev, c_prev)?;
    let cache = cell_forward(x, h_prev, c_prev, params);
    Ok((cache.h, cache.c))
}

pub fn cell_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], params: &LstmParams) -> CellCache {
    let hd = params.hidden_dim;
    let mut z = Vec::with_capacity(x.len() + h_prev.len());
    z.extend_from_slice(x);
    z.extend_from_slice(h_prev);
    let mut pre = params.weights.matvec(&z);
    for (p, b) in pre.iter_mut().zip(&params.bias) {
        *p += b;
    }
    let i: Vec<f64> = pre[0..hd].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = pre[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<f64> = pre[2 * hd..3 * hd].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = pre[3 * hd..4 * hd].iter().map(|&v| v.tanh()).collect();
    let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
    CellCache {
        z,
        i,
        f,
        o,
        g,
        c_prev: c_prev.to_vec(),
        tanh_c,
        h,
        c,
    }
}

/// Backward through one step given upstream `dh` and `dc`. Accumulates into
/// `grads` and returns `(dx, dh_prev, dc_prev)`.
pub fn cell_backward(
    cache: &CellCache,
    dh: &[f64],
    dc: &[f64],
    params: &LstmParams,
    grads: &mut LstmGrads,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = params.hidden_dim;
    let mut dpre = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let (i, f, o, g, tc) = (
            cache.i[k],
            cache.f[k],
            cache.o[k],
            cache.g[k],
            cache.tanh_c[k],
        );
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dpre[k] = dct * g * i * (1.0 - i);
        dpre[hd + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        dpre[2 * hd + k] = dh[k] * tc * o * (1.0 - o);
        dpre[3 * hd + k] = dct * i * (1.0 - g * g);
        dc_prev[k] = dct * f;
    }
    grads.weights.add_outer(&dpre, &cache.z);
    axpy(1.0, &dpre, &mut grads.bias);
    let mut dz = vec![0.0; params.input_dim + hd];
    params.weights.add_transpose_matvec(&dpre, &mut dz);
    let dh_prev = dz.split_off(params.input_dim);
    (dz, dh_prev, dc_prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmGrads {
    pub forward: LstmGrads,
    pub backward: LstmGrads,
}

impl BiLstm {
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let forward = LstmParams::init(input_dim, hidden_dim, rng);
        let backward = LstmParams::init(input_dim, hidden_dim, rng);
        BiLstm { forward, backward }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }
}

impl BiLstmGrads {
    pub fn zeros_like(p: &BiLstm) -> Self {
        BiLstmGrads {
            forward: LstmGrads::zeros_like(&p.forward),
            backward: LstmGrads::zeros_like(&p.backward),
        }
    }
}

/// Per-step caches; `backward[k]` belongs to position `n - 1 - k`.
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    forward: Vec<CellCache>,
    backward: Vec<CellCache>,
}

/// `h_t = [forward_h_t ; backward_h_t]`, both directions from zero state.
pub fn bilstm_forward(inputs: &[Vec<f64>], params: &BiLstm) -> Result<Vec<Vec<f64>>> {
    bilstm_forward_cached(inputs, params).map(|(h, _)| h)
}

pub fn bilstm_forward_cached(
    inputs: &[Vec<f64>],
    params: &BiLstm,
) -> Result<(Vec<Vec<f64>>, BiLstmCache)> {
    if inputs.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != params.input_dim()) {
        return Err(Error::Dimension(format!(
            "bilstm expects inputs of width {}, got {}",
            params.input_dim(),
            x.len()
        )));
    }
    let run = |p: &LstmParams, order: &mut dyn Iterator<Item = &Vec<f64>>| {
        let zero = vec![0.0; p.hidden_dim];
        let mut caches: Vec<CellCache> = Vec::with_capacity(inputs.len());
        for x in order {
            let (h, c) = caches
                .last()
                .map_or((&zero, &zero), |prev| (&prev.h, &prev.c));
            let cache = cell_forward(x, h, c, p);
            caches.push(cache);
        }
        caches
    };
    let forward = run(&params.forward, &mut inputs.iter());
    let backward = run(&params.backward, &mut inputs.iter().rev());
    let n = inputs.len();
    let hidden = (0..n)
        .map(|t| {
            let mut h = forward[t].h.clone();
            h.extend_from_slice(&backward[n - 1 - t].h);
            h
        })
        .collect();
    Ok((hidden, BiLstmCache { forward, backward }))
}

/// Backpropagation through time for both directions. `dh[t]` has width
/// `2·hidden`; returns the gradient w.r.t. each input vector.
pub fn bilstm_backward(
    cache: &BiLstmCache,
    dh: &[Vec<f64>],
    params: &BiLstm,
    grads: &mut BiLstmGrads,
) -> Vec<Vec<f64>> {
    let n = cache.forward.len();
    let hd = params.hidden_dim();
    let mut dx = vec![vec![0.0; params.input_dim()]; n];

    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    for t in (0..n).rev() {
        let mut dh_t = dh[t][..hd].to_vec();
        axpy(1.0, &dh_next, &mut dh_t);
        let (dxt, dhp, dcp) = cell_backward(
            &cache.forward[t],
            &dh_t,
            &dc_next,
            &params.forward,
            &mut grads.forward,
        );
        axpy(1.0, &dxt, &mut dx[t]);
        dh_next = dhp;
        dc_next = dcp;
    }

    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    for k in (0..n).rev() {
        let t = n - 1 - k;
        let mut dh_t = dh[t][hd..].to_vec();
        axpy(1.0, &dh_next, &mut dh_t);
        let (dxt, dhp, dcp) = cell_backward(
            &cache.backward[k],
            &dh_t,
            &dc_next,
            &params.backward,
            &mut grads.backward,
        );
        axpy(1.0, &dxt, &mut dx[t]);
        dh_next = dhp;
        dc_next = dcp;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_fixed_point() {
        let p = LstmParams::zeros(3, 2);
        let (h, c) = lstm_cell(&[1.0, -2.0, 0.5], &[0.0, 0.0], &[0.0, 0.0], &p).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
        // i = f = o = 0.5, g = 0: c = 0.5·c_prev, h = 0.5·tanh(c)
        let (h, c) = lstm_cell(&[1.0, 1.0, 1.0], &[0.3, 0.1], &[1.0, -2.0], &p).unwrap();
        assert_eq!(c, vec![0.5, -1.0]);
        assert_eq!(h, vec![0.5 * 0.5f64.tanh(), 0.5 * (-1.0f64).tanh()]);
    }

    /// Scalar case hand-evaluated from the five cell equations:
    /// x = 1, h_prev = 0.5, c_prev = -1, every gate row [w_x, w_h] with bias b.
    #[test]
    fn scalar_hand_computation() {
        let mut p = LstmParams::zeros(1, 1);
        // rows: input, forget, output, candidate
        let rows = [
            (0.5, -1.0, 0.1),
            (1.0, 1.0, 0.0),
            (-0.5, 2.0, 0.2),
            (2.0, 0.0, -1.0),
        ];
        for (r, &(wx, wh, b)) in rows.iter().enumerate() {
            p.weights.set(r, 0, wx);
            p.weights.set(r, 1, wh);
            p.bias[r] = b;
        }
        let (h, c) = lstm_cell(&[1.0], &[0.5], &[-1.0], &p).unwrap();
        // pre-activations: i: 0.5 - 0.5 + 0.1 = 0.1; f: 1 + 0.5 = 1.5; o: -0.5 + 1 + 0.2 = 0.7; g: 2 - 1 = 1
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (i, f, o, g) = (sig(0.1), sig(1.5), sig(0.7), 1.0f64.tanh());
        let c_exp = -f + i * g;
        let h_exp = o * c_exp.tanh();
        assert!((c[0] - c_exp).abs() < 1e-15);
        assert!((h[0] - h_exp).abs() < 1e-15);
        // numeric values frozen from the expressions above
        assert!((c[0] - (-0.4177533950)).abs() < 1e-9, "{}", c[0]);
        assert!((h[0] - (-0.2639582929)).abs() < 1e-9, "{}", h[0]);
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmParams::zeros(3, 2);
        assert!(lstm_cell(&[1.0], &[0.0, 0.0], &[0.0, 0.0], &p).is_err());
        assert!(lstm_cell(&[1.0, 2.0, 3.0], &[0.0], &[0.0, 0.0], &p).is_err());
    }

    /// Central differences of a random linear functional of (h, c).
    #[test]
    fn cell_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (d, hd) = (3, 4);
        let mut p = LstmParams::init(d, hd, &mut rng);
        p.bias
            .iter_mut()
            .for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h0: Vec<f64> = (0..hd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c0: Vec<f64> = (0..hd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rh: Vec<f64> = (0..hd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rc: Vec<f64> = (0..hd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let objective = |p: &LstmParams, x: &[f64], h0: &[f64], c0: &[f64]| {
            let (h, c) = lstm_cell(x, h0, c0, p).unwrap();
            crate::tensor::dot(&h, &rh) + crate::tensor::dot(&c, &rc)
        };

        let cache = cell_forward(&x, &h0, &c0, &p);
        let mut grads = LstmGrads::zeros_like(&p);
        let (dx, dh0, dc0) = cell_backward(&cache, &rh, &rc, &p, &mut grads);

        let eps = 1e-4;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        let mut worst: f64 = 0.0;
        for k in 0..p.weights.as_slice().len() {
            let mut pp = p.clone();
            pp.weights.as_mut_slice()[k] += eps;
            let up = objective(&pp, &x, &h0, &c0);
            pp.weights.as_mut_slice()[k] -= 2.0 * eps;
            let down = objective(&pp, &x, &h0, &c0);
            worst = worst.max(rel(grads.weights.as_slice()[k], (up - down) / (2.0 * eps)));
        }
        for k in 0..p.bias.len() {
            let mut pp = p.clone();
            pp.bias[k] += eps;
            let up = objective(&pp, &x, &h0, &c0);
            pp.bias[k] -= 2.0 * eps;
            let down = objective(&pp, &x, &h0, &c0);
            worst = worst.max(rel(grads.bias[k], (up - down) / (2.0 * eps)));
        }
        let mut check_input = |v: &[f64], analytic: &[f64], which: usize| {
            for k in 0..v.len() {
                let mut up_v = v.to_vec();
                up_v[k] += eps;
                let mut dn_v = v.to_vec();
                dn_v[k] -= eps;
                let (up, down) = match which {
                    0 => (
                        objective(&p, &up_v, &h0, &c0),
                        objective(&p, &dn_v, &h0, &c0),
                    ),
                    1 => (objective(&p, &x, &up_v, &c0), objective(&p, &x, &dn_v, &c0)),
                    _ => (objective(&p, &x, &h0, &up_v), objective(&p, &x, &h0, &dn_v)),
                };
                worst = worst.max(rel(analytic[k], (up - down) / (2.0 * eps)));
            }
        };
        check_input(&x, &dx, 0);
        check_input(&h0, &dh0, 1);
        check_input(&c0, &dc0, 2);
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    fn random_inputs(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn bilstm_single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BiLstm::init(3, 2, &mut rng);
        let x = random_inputs(1, 3, &mut rng);
        let h = bilstm_forward(&x, &p).unwrap();
        let (fh, _) = lstm_cell(&x[0], &[0.0; 2], &[0.0; 2], &p.forward).unwrap();
        let (bh, _) = lstm_cell(&x[0], &[0.0; 2], &[0.0; 2], &p.backward).unwrap();
        assert_eq!(h[0], [fh, bh].concat());
    }

    #[test]
    fn bilstm_matches_manual_unrolling() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = BiLstm::init(3, 2, &mut rng);
        let x = random_inputs(3, 3, &mut rng);
        let h = bilstm_forward(&x, &p).unwrap();
        let z = vec![0.0; 2];
        let (f1, c1) = lstm_cell(&x[0], &z, &z, &p.forward).unwrap();
        let (f2, c2) = lstm_cell(&x[1], &f1, &c1, &p.forward).unwrap();
        let (f3, _) = lstm_cell(&x[2], &f2, &c2, &p.forward).unwrap();
        let (b3, d3) = lstm_cell(&x[2], &z, &z, &p.backward).unwrap();
        let (b2, d2) = lstm_cell(&x[1], &b3, &d3, &p.backward).unwrap();
        let (b1, _) = lstm_cell(&x[0], &b2, &d2, &p.backward).unwrap();
        assert_eq!(
            h,
            vec![[f1, b1].concat(), [f2, b2].concat(), [f3, b3].concat()]
        );
    }

    #[test]
    fn bilstm_reversal_swaps_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = BiLstm::init(2, 3, &mut rng);
        let swapped = BiLstm {
            forward: p.backward.clone(),
            backward: p.forward.clone(),
        };
        let x = random_inputs(4, 2, &mut rng);
        let rev: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
        let h = bilstm_forward(&x, &p).unwrap();
        let hr = bilstm_forward(&rev, &swapped).unwrap();
        for t in 0..4 {
            let a = &h[t];
            let b = &hr[3 - t];
            assert_eq!(&a[..3], &b[3..]);
            assert_eq!(&a[3..], &b[..3]);
        }
    }

    #[test]
    fn bilstm_empty_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = BiLstm::init(2, 2, &mut rng);
        assert!(matches!(bilstm_forward(&[], &p), Err(Error::EmptySequence)));
        let x = random_inputs(5, 2, &mut rng);
        assert_eq!(
            bilstm_forward(&x, &p).unwrap(),
            bilstm_forward(&x, &p).unwrap()
        );
    }
}
