use crate::error::{Error, Result};

use super::Real;

/// Dense row-major array. One-dimensional arrays behave as a single row
/// wherever a matrix is expected.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || expected != data.len() {
            return Err(Error::Dimension {
                context: "tensor construction",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::Dimension {
                    context: "from_rows",
                    left: vec![rows.len(), cols],
                    right: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Tensor {
            shape: vec![rows.len(), cols],
            data,
        })
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// `(rows, cols)` of the matrix view; vectors are one row.
    pub fn dims(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => (s[..s.len() - 1].iter().product(), s[s.len() - 1]),
        }
    }

    pub fn rows(&self) -> usize {
        self.dims().0
    }

    pub fn cols(&self) -> usize {
        self.dims().1
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Dimension {
                context: "reshape",
                left: self.shape,
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    /// `self · other` for `(m×k)·(k×n)`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, k) = self.dims();
        let (k2, n) = other.dims();
        if k != k2 {
            return Err(Error::Dimension {
                context: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        gemm_nn(m, k, n, &self.data, &other.data, T::zero(), &mut out.data);
        Ok(out)
    }

    /// `self · otherᵀ` for `(m×k)·(n×k)ᵀ`.
    pub fn matmul_t(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, k) = self.dims();
        let (n, k2) = other.dims();
        if k != k2 {
            return Err(Error::Dimension {
                context: "matmul_t",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        if m * n > 0 {
            T::gemm(
                m,
                k,
                n,
                T::one(),
                &self.data,
                k as isize,
                1,
                &other.data,
                1,
                k as isize,
                T::zero(),
                &mut out.data,
                n as isize,
                1,
            );
        }
        Ok(out)
    }

    /// `self += aᵀ · b` for `a: (m×k)`, `b: (m×n)`, `self: (k×n)`.
    pub fn add_t_matmul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
        let (m, k) = a.dims();
        let (m2, n) = b.dims();
        if m != m2 || self.dims() != (k, n) {
            return Err(Error::Dimension {
                context: "add_t_matmul",
                left: a.shape.clone(),
                right: b.shape.clone(),
            });
        }
        if k * n > 0 {
            T::gemm(
                k,
                m,
                n,
                T::one(),
                &a.data,
                1,
                k as isize,
                &b.data,
                n as isize,
                1,
                T::one(),
                &mut self.data,
                n as isize,
                1,
            );
        }
        Ok(())
    }

    /// Adds `bias` to every row.
    pub fn add_row(&mut self, bias: &Tensor<T>) -> Result<()> {
        let c = self.cols();
        if bias.len() != c {
            return Err(Error::Dimension {
                context: "add_row",
                left: self.shape.clone(),
                right: bias.shape.clone(),
            });
        }
        for row in self.data.chunks_mut(c.max(1)) {
            for (v, b) in row.iter_mut().zip(&bias.data) {
                *v += *b;
            }
        }
        Ok(())
    }

    /// Column sums in row order.
    pub fn sum_rows(&self) -> Tensor<T> {
        let (r, c) = self.dims();
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += *v;
            }
        }
        Tensor::from_vec(out)
    }

    /// `[self | other]` along columns.
    pub fn concat_cols(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (r, c1) = self.dims();
        let (r2, c2) = other.dims();
        if r != r2 {
            return Err(Error::Dimension {
                context: "concat_cols",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut data = Vec::with_capacity(r * (c1 + c2));
        for i in 0..r {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Tensor {
            shape: vec![r, c1 + c2],
            data,
        })
    }

    /// Splits columns at `at`, returning `(left, right)`.
    pub fn split_cols(&self, at: usize) -> Result<(Tensor<T>, Tensor<T>)> {
        let (r, c) = self.dims();
        if at > c {
            return Err(Error::Dimension {
                context: "split_cols",
                left: self.shape.clone(),
                right: vec![at],
            });
        }
        let mut left = Vec::with_capacity(r * at);
        let mut right = Vec::with_capacity(r * (c - at));
        for i in 0..r {
            let row = self.row(i);
            left.extend_from_slice(&row[..at]);
            right.extend_from_slice(&row[at..]);
        }
        Ok((
            Tensor {
                shape: vec![r, at],
                data: left,
            },
            Tensor {
                shape: vec![r, c - at],
                data: right,
            },
        ))
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.data.len() != other.data.len() {
            return Err(Error::Dimension {
                context: "add_assign",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }
}

fn gemm_nn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    if m * n == 0 {
        return;
    }
    T::gemm(
        m,
        k,
        n,
        T::one(),
        a,
        k as isize,
        1,
        b,
        n as isize,
        1,
        beta,
        c,
        n as isize,
        1,
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn construction_checks_extent() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert_eq!(Tensor::<f64>::zeros(&[2, 3]).len(), 6);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = t(&[3, 2], &[7., 8., 9., 10., 11., 12.]);
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[58., 64., 139., 154.]);

        let bt = t(&[2, 3], &[7., 9., 11., 8., 10., 12.]);
        assert_eq!(a.matmul_t(&bt).unwrap().data(), ab.data());

        // aᵀ·c with a: 2×3, c: 2×2 → 3×2
        let c = t(&[2, 2], &[1., 0., 0., 1.]);
        let mut acc = Tensor::zeros(&[3, 2]);
        acc.add_t_matmul(&a, &c).unwrap();
        assert_eq!(acc.data(), &[1., 4., 2., 5., 3., 6.]);
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = t(&[2, 3], &[0.; 6]);
        let err = a.matmul(&a).unwrap_err();
        assert!(err.to_string().contains("[2, 3]"));
    }

    #[test]
    fn concat_and_split_are_inverse() {
        let a = t(&[2, 1], &[1., 2.]);
        let b = t(&[2, 2], &[3., 4., 5., 6.]);
        let ab = a.concat_cols(&b).unwrap();
        assert_eq!(ab.data(), &[1., 3., 4., 2., 5., 6.]);
        let (l, r) = ab.split_cols(1).unwrap();
        assert_eq!(l, a);
        assert_eq!(r, b);
    }
}
