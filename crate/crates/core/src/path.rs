use crate::error::{CdroError, Result};

/// A discrete path `(x_0, x_1, ..., x_N)` in `R^d` with `x_0 = 0`.
///
/// Points are stored flat, row-major by time index. The increment map
/// `(0, x_1, x_2 - x_1, ...)` and its inverse (cumulative sum) are both
/// closed on this type, so increment-space objects reuse it.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    data: Vec<f64>,
    n_steps: usize,
    dim: usize,
}

impl DiscretePath {
    /// Builds a path from `N + 1` points, checking the origin pin `x_0 = 0`.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CdroError::InvalidParameter(
                "a path needs at least one step".into(),
            ));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(CdroError::InvalidParameter("state dimension 0".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(CdroError::ShapeMismatch(
                "points with unequal dimensions".into(),
            ));
        }
        if points[0].iter().any(|&v| v != 0.0) {
            return Err(CdroError::InvalidParameter(
                "path must start at the origin".into(),
            ));
        }
        let n_steps = points.len() - 1;
        let data = points.into_iter().flatten().collect();
        Ok(Self { data, n_steps, dim })
    }

    /// Builds a path from flat row-major data of length `(n_steps + 1) * dim`.
    pub fn from_flat(data: Vec<f64>, n_steps: usize, dim: usize) -> Result<Self> {
        if data.len() != (n_steps + 1) * dim {
            return Err(CdroError::ShapeMismatch(format!(
                "flat data length {} != {}",
                data.len(),
                (n_steps + 1) * dim
            )));
        }
        if data[..dim].iter().any(|&v| v != 0.0) {
            return Err(CdroError::InvalidParameter(
                "path must start at the origin".into(),
            ));
        }
        Ok(Self { data, n_steps, dim })
    }

    /// Scalar path (d = 1) from its values; `values[0]` must be 0.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        DiscretePath::from_flat(values.to_vec(), values.len() - 1, 1)
    }

    pub fn zero(n_steps: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; (n_steps + 1) * dim],
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

    /// The point `x_k`, `0 <= k <= N`.
    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn terminal(&self) -> &[f64] {
        self.point(self.n_steps)
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// The increment map: `(0, x_1, x_2 - x_1, ..., x_N - x_{N-1})`.
    pub fn increments(&self) -> DiscretePath {
        let mut data = self.data.clone();
        for k in (1..=self.n_steps).rev() {
            for i in 0..self.dim {
                data[k * self.dim + i] -= self.data[(k - 1) * self.dim + i];
            }
        }
        DiscretePath {
            data,
            n_steps: self.n_steps,
            dim: self.dim,
        }
    }

    /// Inverse of [`increments`](Self::increments): cumulative sums.
    pub fn cumulative(&self) -> DiscretePath {
        let mut data = self.data.clone();
        for k in 1..=self.n_steps {
            for i in 0..self.dim {
                data[k * self.dim + i] += data[(k - 1) * self.dim + i];
            }
        }
        DiscretePath {
            data,
            n_steps: self.n_steps,
            dim: self.dim,
        }
    }

    /// `x + eps * e_comp * 1_{[n..N]}`: shifts one coordinate of every point
    /// from time `n` onward by `eps`.
    pub fn bumped(&self, n: usize, comp: usize, eps: f64) -> DiscretePath {
        debug_assert!(n >= 1 && n <= self.n_steps && comp < self.dim);
        let mut out = self.clone();
        for k in n..=self.n_steps {
            out.data[k * self.dim + comp] += eps;
        }
        out
    }

    /// Componentwise average over all `N + 1` points.
    pub fn average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.dim];
        for k in 0..=self.n_steps {
            for i in 0..self.dim {
                avg[i] += self.data[k * self.dim + i];
            }
        }
        let m = (self.n_steps + 1) as f64;
        avg.iter_mut().for_each(|v| *v /= m);
        avg
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Adds `other` (same shape, zero at the origin) pointwise.
    pub fn add(&self, other: &DiscretePath) -> Result<DiscretePath> {
        if self.n_steps != other.n_steps || self.dim != other.dim {
            return Err(CdroError::ShapeMismatch("path addition".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DiscretePath {
            data,
            n_steps: self.n_steps,
            dim: self.dim,
        })
    }
}
