use crate::error::{CdroError, Result};

/// A time-indexed family of vectors in `R^d`, one for each step `n = 1..=N`.
///
/// Used for pathwise derivative fields, their projections, predictable
/// compensators `h` and perturbation directions; each path in a model carries
/// one `Field`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    data: Vec<f64>,
    n_steps: usize,
    dim: usize,
}

impl Field {
    pub fn zero(n_steps: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; n_steps * dim],
            n_steps,
            dim,
        }
    }

    pub fn from_flat(data: Vec<f64>, n_steps: usize, dim: usize) -> Result<Self> {
        if data.len() != n_steps * dim {
            return Err(CdroError::ShapeMismatch(format!(
                "field data length {} != {}",
                data.len(),
                n_steps * dim
            )));
        }
        Ok(Self {
            data,
            n_steps,
            dim,
        })
    }

    /// Builds the field from a function of the time index `n = 1..=N`.
    pub fn from_fn(n_steps: usize, dim: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(n_steps * dim);
        for n in 1..=n_steps {
            let v = f(n);
            debug_assert_eq!(v.len(), dim);
            data.extend_from_slice(&v);
        }
        Self {
            data,
            n_steps,
            dim,
        }
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at time `n`, `1 <= n <= N`.
    #[inline]
    pub fn at(&self, n: usize) -> &[f64] {
        debug_assert!(n >= 1 && n <= self.n_steps);
        &self.data[(n - 1) * self.dim..n * self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize) -> &mut [f64] {
        debug_assert!(n >= 1 && n <= self.n_steps);
        &mut self.data[(n - 1) * self.dim..n * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        if self.n_steps != other.n_steps || self.dim != other.dim {
            return Err(CdroError::ShapeMismatch("field subtraction".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            data,
            n_steps: self.n_steps,
            dim: self.dim,
        })
    }

    pub fn add_scaled(&mut self, other: &Field, a: f64) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
