//! Single-layer LSTM without peepholes:
//!
//! ```text
//! i = σ(x·W_xi + s·W_si + b_i)     f = σ(x·W_xf + s·W_sf + b_f)
//! o = σ(x·W_xo + s·W_so + b_o)     g = tanh(x·W_xc + s·W_sc + b_c)
//! c' = f ⊙ c + i ⊙ g               s' = o ⊙ tanh(c')
//! ```
//!
//! All functions operate on a batch: `x` is `B × input`, states are `B × s`.
//! A 1-D `x` is treated as a batch of one.

use rand::Rng;

use crate::error::{Error, Result};

use super::{xavier_init_with, ParamSet, Parameter, Real, Tensor};

/// Hidden and cell state; both always have the same extent.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<T> {
    pub hidden: Tensor<T>,
    pub cell: Tensor<T>,
}

impl<T: Real> LstmState<T> {
    /// All-zeros initial state for `batch` rows.
    pub fn zeros(batch: usize, size: usize) -> Self {
        LstmState {
            hidden: Tensor::zeros(&[batch, size]),
            cell: Tensor::zeros(&[batch, size]),
        }
    }

    pub fn size(&self) -> usize {
        self.hidden.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams<T> {
    pub w_xi: Parameter<T>,
    pub w_si: Parameter<T>,
    pub w_xf: Parameter<T>,
    pub w_sf: Parameter<T>,
    pub w_xo: Parameter<T>,
    pub w_so: Parameter<T>,
    pub w_xc: Parameter<T>,
    pub w_sc: Parameter<T>,
    pub b_i: Parameter<T>,
    pub b_f: Parameter<T>,
    pub b_o: Parameter<T>,
    pub b_c: Parameter<T>,
}

impl<T: Real> LstmCellParams<T> {
    pub fn zeros(prefix: &str, input_size: usize, state_size: usize) -> Self {
        let wx = |n: &str| Parameter::zeros(format!("{prefix}.{n}"), &[input_size, state_size]);
        let ws = |n: &str| Parameter::zeros(format!("{prefix}.{n}"), &[state_size, state_size]);
        let b = |n: &str| Parameter::zeros(format!("{prefix}.{n}"), &[state_size]);
        LstmCellParams {
            w_xi: wx("w_xi"),
            w_si: ws("w_si"),
            w_xf: wx("w_xf"),
            w_sf: ws("w_sf"),
            w_xo: wx("w_xo"),
            w_so: ws("w_so"),
            w_xc: wx("w_xc"),
            w_sc: ws("w_sc"),
            b_i: b("b_i"),
            b_f: b("b_f"),
            b_o: b("b_o"),
            b_c: b("b_c"),
        }
    }

    /// Xavier weights drawn in field order, zero biases.
    pub fn xavier<R: Rng + ?Sized>(prefix: &str, input_size: usize, state_size: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(prefix, input_size, state_size);
        for w in p.weights_mut() {
            let shape = w.shape().to_vec();
            w.value = xavier_init_with(&shape, rng)?;
        }
        Ok(p)
    }

    pub fn input_size(&self) -> usize {
        self.w_xi.shape()[0]
    }

    pub fn state_size(&self) -> usize {
        self.w_xi.shape()[1]
    }

    fn weights_mut(&mut self) -> [&mut Parameter<T>; 8] {
        [
            &mut self.w_xi,
            &mut self.w_si,
            &mut self.w_xf,
            &mut self.w_sf,
            &mut self.w_xo,
            &mut self.w_so,
            &mut self.w_xc,
            &mut self.w_sc,
        ]
    }
}

impl<T: Real> ParamSet<T> for LstmCellParams<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![
            &self.w_xi, &self.w_si, &self.w_xf, &self.w_sf, &self.w_xo, &self.w_so, &self.w_xc, &self.w_sc, &self.b_i,
            &self.b_f, &self.b_o, &self.b_c,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![
            &mut self.w_xi,
            &mut self.w_si,
            &mut self.w_xf,
            &mut self.w_sf,
            &mut self.w_xo,
            &mut self.w_so,
            &mut self.w_xc,
            &mut self.w_sc,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }
}

/// Values kept from the forward step for the backward step.
#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    pub x: Tensor<T>,
    pub prev_hidden: Tensor<T>,
    pub prev_cell: Tensor<T>,
    pub input_gate: Tensor<T>,
    pub forget_gate: Tensor<T>,
    pub output_gate: Tensor<T>,
    pub candidate: Tensor<T>,
    pub tanh_cell: Tensor<T>,
}

fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn as_batch<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (r, c) = x.dims();
    x.clone().reshape(vec![r, c])
}

fn pre_activation<T: Real>(
    x: &Tensor<T>,
    h: &Tensor<T>,
    wx: &Parameter<T>,
    ws: &Parameter<T>,
    b: &Parameter<T>,
) -> Result<Tensor<T>> {
    let mut z = x.matmul(&wx.value)?;
    z.add_assign(&h.matmul(&ws.value)?)?;
    z.add_row(&b.value)?;
    Ok(z)
}

fn map<T: Real>(mut t: Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    t.data_mut().iter_mut().for_each(|v| *v = f(*v));
    t
}

fn check_shapes<T: Real>(x: &Tensor<T>, prev: &LstmState<T>, params: &LstmCellParams<T>) -> Result<()> {
    if x.cols() != params.input_size() {
        return Err(Error::Dimension {
            context: "lstm_step (input vs W_x*)",
            left: x.shape().to_vec(),
            right: params.w_xi.shape().to_vec(),
        });
    }
    let s = params.state_size();
    if prev.hidden.dims() != (x.rows(), s) || prev.cell.dims() != (x.rows(), s) {
        return Err(Error::Dimension {
            context: "lstm_step (state vs W_s*)",
            left: prev.hidden.shape().to_vec(),
            right: params.w_si.shape().to_vec(),
        });
    }
    Ok(())
}

/// One LSTM step, returning the next state.
pub fn lstm_step<T: Real>(x: &Tensor<T>, prev: &LstmState<T>, params: &LstmCellParams<T>) -> Result<LstmState<T>> {
    lstm_forward_step(x, prev, params).map(|(state, _)| state)
}

/// One LSTM step, also returning the cache needed by [`lstm_backward_step`].
pub fn lstm_forward_step<T: Real>(
    x: &Tensor<T>,
    prev: &LstmState<T>,
    params: &LstmCellParams<T>,
) -> Result<(LstmState<T>, LstmCache<T>)> {
    check_shapes(x, prev, params)?;
    let x = as_batch(x)?;
    let h = &prev.hidden;
    let p = params;
    let i = map(pre_activation(&x, h, &p.w_xi, &p.w_si, &p.b_i)?, sigmoid);
    let f = map(pre_activation(&x, h, &p.w_xf, &p.w_sf, &p.b_f)?, sigmoid);
    let o = map(pre_activation(&x, h, &p.w_xo, &p.w_so, &p.b_o)?, sigmoid);
    let g = map(pre_activation(&x, h, &p.w_xc, &p.w_sc, &p.b_c)?, T::tanh);

    let mut cell = Tensor::zeros(prev.cell.shape());
    for (k, c) in cell.data_mut().iter_mut().enumerate() {
        *c = f.data()[k] * prev.cell.data()[k] + i.data()[k] * g.data()[k];
    }
    let tanh_cell = map(cell.clone(), T::tanh);
    let mut hidden = Tensor::zeros(prev.hidden.shape());
    for (k, s) in hidden.data_mut().iter_mut().enumerate() {
        *s = o.data()[k] * tanh_cell.data()[k];
    }

    let cache = LstmCache {
        x,
        prev_hidden: prev.hidden.clone(),
        prev_cell: prev.cell.clone(),
        input_gate: i,
        forget_gate: f,
        output_gate: o,
        candidate: g,
        tanh_cell,
    };
    Ok((LstmState { hidden, cell }, cache))
}

/// Backward of one step. Given `∂L/∂s'` and `∂L/∂c'`, accumulates parameter
/// gradients and returns `(∂L/∂x, ∂L/∂s, ∂L/∂c)`.
pub fn lstm_backward_step<T: Real>(
    cache: &LstmCache<T>,
    grad_hidden: &Tensor<T>,
    grad_cell: &Tensor<T>,
    params: &mut LstmCellParams<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let shape = cache.prev_cell.shape().to_vec();
    if grad_hidden.len() != cache.prev_hidden.len() || grad_cell.len() != cache.prev_cell.len() {
        return Err(Error::Dimension {
            context: "lstm_backward_step",
            left: grad_hidden.shape().to_vec(),
            right: shape,
        });
    }
    let n = grad_hidden.len();
    let one = T::one();
    let mut da_i = Tensor::zeros(&shape);
    let mut da_f = Tensor::zeros(&shape);
    let mut da_o = Tensor::zeros(&shape);
    let mut da_g = Tensor::zeros(&shape);
    let mut d_prev_cell = Tensor::zeros(&shape);
    for k in 0..n {
        let i = cache.input_gate.data()[k];
        let f = cache.forget_gate.data()[k];
        let o = cache.output_gate.data()[k];
        let g = cache.candidate.data()[k];
        let tc = cache.tanh_cell.data()[k];
        let dh = grad_hidden.data()[k];
        let dc = grad_cell.data()[k] + dh * o * (one - tc * tc);
        da_o.data_mut()[k] = dh * tc * o * (one - o);
        da_i.data_mut()[k] = dc * g * i * (one - i);
        da_f.data_mut()[k] = dc * cache.prev_cell.data()[k] * f * (one - f);
        da_g.data_mut()[k] = dc * i * (one - g * g);
        d_prev_cell.data_mut()[k] = dc * f;
    }

    let x = &cache.x;
    let h = &cache.prev_hidden;
    let mut dx = Tensor::zeros(&[x.rows(), x.cols()]);
    let mut dh_prev = Tensor::zeros(&shape);
    let p = params;
    for (da, wx, ws, b) in [
        (&da_i, &mut p.w_xi, &mut p.w_si, &mut p.b_i),
        (&da_f, &mut p.w_xf, &mut p.w_sf, &mut p.b_f),
        (&da_o, &mut p.w_xo, &mut p.w_so, &mut p.b_o),
        (&da_g, &mut p.w_xc, &mut p.w_sc, &mut p.b_c),
    ] {
        wx.grad.add_t_matmul(x, da)?;
        ws.grad.add_t_matmul(h, da)?;
        b.grad.add_assign(&da.sum_rows())?;
        dx.add_assign(&da.matmul_t(&wx.value)?)?;
        dh_prev.add_assign(&da.matmul_t(&ws.value)?)?;
    }
    Ok((dx, dh_prev, d_prev_cell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmCellParams::<f64>::zeros("l", 3, 2);
        let prev = LstmState::zeros(1, 2);
        let x = Tensor::from_vec(vec![1.0, -2.0, 5.0]);
        let next = lstm_step(&x, &prev, &p).unwrap();
        assert!(next.hidden.data().iter().all(|&v| v == 0.0));
        assert!(next.cell.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = LstmCellParams::<f64>::zeros("l", 1, 1);
        p.b_f.value = Tensor::from_vec(vec![20.0]);
        let prev = LstmState {
            hidden: Tensor::zeros(&[1, 1]),
            cell: Tensor::from_f64(&[1, 1], &[1.0]).unwrap(),
        };
        let next = lstm_step(&Tensor::from_vec(vec![0.0]), &prev, &p).unwrap();
        assert!((next.cell.data()[0] - 1.0).abs() < 1e-8);
        assert!((next.hidden.data()[0] - 0.5 * 1f64.tanh()).abs() < 1e-8);
        assert!((next.hidden.data()[0] - 0.38080).abs() < 1e-4);
    }

    #[test]
    fn hidden_and_cell_share_extent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmCellParams::<f32>::xavier("l", 5, 3, &mut rng).unwrap();
        let x = Tensor::zeros(&[4, 5]);
        let s = lstm_step(&x, &LstmState::zeros(4, 3), &p).unwrap();
        assert_eq!(s.hidden.shape(), s.cell.shape());
        assert_eq!(s.hidden.shape(), &[4, 3]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let p = LstmCellParams::<f64>::zeros("l", 3, 2);
        let err = lstm_step(&Tensor::zeros(&[1, 4]), &LstmState::zeros(1, 2), &p).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        let err = lstm_step(&Tensor::zeros(&[1, 3]), &LstmState::zeros(1, 5), &p).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    /// Scalar loss over a 3-step unroll: Σ_t w_t·s_t + Σ u·c_T.
    fn unrolled_loss(p: &LstmCellParams<f64>, xs: &[Tensor<f64>], wh: &[f64], wc: &[f64]) -> Result<f64> {
        let b = xs[0].rows();
        let mut state = LstmState::zeros(b, p.state_size());
        let mut loss = 0.0;
        for x in xs {
            state = lstm_step(x, &state, p)?;
            loss += state.hidden.data().iter().zip(wh).map(|(a, b)| a * b).sum::<f64>();
        }
        loss += state.cell.data().iter().zip(wc).map(|(a, b)| a * b).sum::<f64>();
        Ok(loss)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (input, s, batch) = (3, 4, 2);
        let mut p = LstmCellParams::<f64>::xavier("l", input, s, &mut rng).unwrap();
        for b in [&mut p.b_i, &mut p.b_f, &mut p.b_o, &mut p.b_c] {
            b.value = Tensor::new(vec![s], (0..s).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap();
        }
        let xs: Vec<Tensor<f64>> = (0..3)
            .map(|_| {
                Tensor::new(
                    vec![batch, input],
                    (0..batch * input).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        let wh: Vec<f64> = (0..batch * s).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wc: Vec<f64> = (0..batch * s).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut state = LstmState::zeros(batch, s);
        let mut caches = Vec::new();
        for x in &xs {
            let (next, cache) = lstm_forward_step(x, &state, &p).unwrap();
            caches.push(cache);
            state = next;
        }
        let dh_out = Tensor::from_f64(&[batch, s], &wh).unwrap();
        let mut dh = dh_out.clone();
        let mut dc = Tensor::from_f64(&[batch, s], &wc).unwrap();
        for cache in caches.iter().rev() {
            let (_, dh_prev, dc_prev) = lstm_backward_step(cache, &dh, &dc, &mut p).unwrap();
            dh = dh_prev;
            dh.add_assign(&dh_out).unwrap();
            dc = dc_prev;
        }

        let report = grad_check(&mut p, |p: &LstmCellParams<f64>| unrolled_loss(p, &xs, &wh, &wc), 1e-4).unwrap();
        assert!(report.passed(), "{:?}", report.worst());
    }
}
