use crate::error::{Error, Result};

use super::Real;

/// Log-softmax via the max-shifted log-sum-exp.
pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `−log softmax(logits)[target]`.
pub fn softmax_xent<T: Real>(logits: &[T], target: usize) -> Result<T> {
    if target >= logits.len() {
        return Err(Error::Vocabulary {
            index: target,
            size: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    Ok(lse - logits[target])
}

/// Loss and its gradient `softmax − one_hot(target)`.
pub fn softmax_xent_grad<T: Real>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    let loss = softmax_xent(logits, target)?;
    let mut grad = softmax(logits);
    grad[target] -= T::one();
    Ok((loss, grad))
}
