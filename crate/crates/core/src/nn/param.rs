use super::{Real, Tensor};

/// A trainable array with its gradient and Adam moment slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub first_moment: Tensor<T>,
    pub second_moment: Tensor<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Parameter {
            name: name.into(),
            grad: zeros.clone(),
            first_moment: zeros.clone(),
            second_moment: zeros,
            value,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, Tensor::zeros(shape))
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    /// Replaces the value, keeping optimizer state. Shapes must match.
    pub fn set_value(&mut self, value: Tensor<T>) -> crate::Result<()> {
        if value.shape() != self.value.shape() {
            return Err(crate::Error::Dimension {
                context: "set_value",
                left: self.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        self.value = value;
        Ok(())
    }
}

/// Anything that owns an ordered collection of parameters.
///
/// The order is fixed and is the order gradients are checked, optimizer
/// updates are applied and checkpoints are written.
pub trait ParamSet<T: Real> {
    fn params(&self) -> Vec<&Parameter<T>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_weights(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

impl<T: Real> ParamSet<T> for Vec<Parameter<T>> {
    fn params(&self) -> Vec<&Parameter<T>> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.iter_mut().collect()
    }
}

impl<T: Real> ParamSet<T> for Parameter<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![self]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![self]
    }
}
