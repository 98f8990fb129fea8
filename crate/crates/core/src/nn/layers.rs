use crate::error::{Error, Result};

use super::{Parameter, Real, Tensor};

/// `input · W + b`. A 1-D input yields a 1-D output.
pub fn dense_forward<T: Real>(input: &Tensor<T>, weights: &Parameter<T>, bias: &Parameter<T>) -> Result<Tensor<T>> {
    let w = &weights.value;
    if w.rank() != 2 || input.cols() != w.shape()[0] {
        return Err(Error::Dimension {
            context: "dense_forward (input vs weights)",
            left: input.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    if bias.value.len() != w.shape()[1] {
        return Err(Error::Dimension {
            context: "dense_forward (weights vs bias)",
            left: w.shape().to_vec(),
            right: bias.shape().to_vec(),
        });
    }
    let mut out = input.matmul(w)?;
    out.add_row(&bias.value)?;
    if input.rank() == 1 {
        out = out.reshape(vec![w.shape()[1]])?;
    }
    Ok(out)
}

/// Backward of [`dense_forward`]: accumulates `dW += xᵀ·dy`, `db += Σ dy`
/// and returns `dx = dy·Wᵀ`.
pub fn dense_backward<T: Real>(
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
    weights: &mut Parameter<T>,
    bias: &mut Parameter<T>,
) -> Result<Tensor<T>> {
    if grad_out.cols() != weights.value.shape()[1] || grad_out.rows() != input.rows() {
        return Err(Error::Dimension {
            context: "dense_backward",
            left: grad_out.shape().to_vec(),
            right: weights.shape().to_vec(),
        });
    }
    weights.grad.add_t_matmul(input, grad_out)?;
    bias.grad.add_assign(&grad_out.sum_rows())?;
    let mut dx = grad_out.matmul_t(&weights.value)?;
    if input.rank() == 1 {
        dx = dx.reshape(vec![input.len()])?;
    }
    Ok(dx)
}

/// Row gather from an embedding table; returns `len(indices) × dim`.
pub fn embedding_lookup<T: Real>(indices: &[usize], table: &Parameter<T>) -> Result<Tensor<T>> {
    let (v, d) = table.value.dims();
    let mut data = Vec::with_capacity(indices.len() * d);
    for &idx in indices {
        if idx >= v {
            return Err(Error::Vocabulary { index: idx, size: v });
        }
        data.extend_from_slice(table.value.row(idx));
    }
    Tensor::new(vec![indices.len(), d], data)
}

/// Scatters `grad_out` rows back into the touched table rows, in index order.
pub fn embedding_backward<T: Real>(indices: &[usize], grad_out: &Tensor<T>, table: &mut Parameter<T>) -> Result<()> {
    let (v, d) = table.value.dims();
    if grad_out.dims() != (indices.len(), d) && !(indices.is_empty() && grad_out.is_empty()) {
        return Err(Error::Dimension {
            context: "embedding_backward",
            left: grad_out.shape().to_vec(),
            right: vec![indices.len(), d],
        });
    }
    for (r, &idx) in indices.iter().enumerate() {
        if idx >= v {
            return Err(Error::Vocabulary { index: idx, size: v });
        }
        let src = grad_out.row(r);
        for (g, s) in table.grad.row_mut(idx).iter_mut().zip(src) {
            *g += *s;
        }
    }
    Ok(())
}
