use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Real, Tensor};

/// Half-width of the Glorot uniform interval, `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform samples for a 2-D weight shape.
pub fn xavier_init<T: Real>(shape: &[usize], seed: u64) -> Result<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_init_with(shape, &mut rng)
}

pub fn xavier_init_with<T: Real, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Tensor<T>> {
    let &[fan_in, fan_out] = shape else {
        return Err(Error::usage(format!(
            "xavier initialization needs a 2-D shape, got {shape:?}"
        )));
    };
    if fan_in + fan_out == 0 {
        return Ok(Tensor::zeros(shape));
    }
    let limit = xavier_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| T::lit(rng.random_range(-limit..=limit)))
        .collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_close_to_glorot() {
        let w: Tensor<f64> = xavier_init(&[1000, 1000], 7).unwrap();
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let target = 2.0 / 2000.0;
        assert!((var - target).abs() / target < 0.10, "variance {var}");
    }

    #[test]
    fn samples_within_bound() {
        let w: Tensor<f32> = xavier_init(&[1000, 1000], 3).unwrap();
        let bound = (6.0f64 / 2000.0).sqrt() as f32;
        assert!(w.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn deterministic_per_seed() {
        let a: Tensor<f64> = xavier_init(&[20, 30], 11).unwrap();
        let b: Tensor<f64> = xavier_init(&[20, 30], 11).unwrap();
        let c: Tensor<f64> = xavier_init(&[20, 30], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_matrix_shapes() {
        assert!(matches!(xavier_init::<f64>(&[10], 0), Err(Error::Usage(_))));
        assert!(matches!(xavier_init::<f64>(&[2, 3, 4], 0), Err(Error::Usage(_))));
    }
}
