use crate::error::{CdroError, Result};
use crate::path::DiscretePath;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::Write;

/// A Monte Carlo reference model: `M` simulated paths with uniform weight
/// `1/M` over a fixed time grid.
///
/// Each path is drawn from its own counter-based RNG stream (seed, path
/// index), so regeneration with the same seed is bit-exact regardless of
/// evaluation order.
#[derive(Clone, Debug)]
pub struct SampleEnsemble {
    pub paths: Vec<DiscretePath>,
    /// Strictly increasing times `t_0 = 0 < ... < t_N = T`; the integer grid
    /// for purely discrete problems.
    pub time_grid: Vec<f64>,
    pub rng_seed: u64,
}

impl SampleEnsemble {
    /// Discretized Brownian paths: increments `~ Normal(0, (T/N) I_d)`.
    pub fn brownian(horizon: f64, n_steps: usize, dim: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if !(horizon > 0.0) || n_steps == 0 || dim == 0 || n_paths == 0 {
            return Err(CdroError::InvalidParameter(
                "brownian sampler needs positive T, N, d, M".into(),
            ));
        }
        let dt = horizon / n_steps as f64;
        let vol = dt.sqrt();
        let paths = (0..n_paths)
            .map(|i| {
                let mut rng = path_stream(seed, i);
                let mut flat = vec![0.0; (n_steps + 1) * dim];
                for k in 1..=n_steps {
                    for c in 0..dim {
                        let z: f64 = rng.sample(StandardNormal);
                        flat[k * dim + c] = flat[(k - 1) * dim + c] + vol * z;
                    }
                }
                DiscretePath::from_flat(flat, n_steps, dim).expect("origin-pinned by construction")
            })
            .collect();
        Ok(Self {
            paths,
            time_grid: uniform_grid(horizon, n_steps),
            rng_seed: seed,
        })
    }

    /// Symmetric random-walk paths with jump size `jump` on the integer grid
    /// (the Monte Carlo surrogate of [`LatticeModel::symmetric_walk`]).
    ///
    /// [`LatticeModel::symmetric_walk`]: crate::lattice::LatticeModel::symmetric_walk
    pub fn rademacher_walk(n_steps: usize, jump: f64, n_paths: usize, seed: u64) -> Result<Self> {
        if n_steps == 0 || n_paths == 0 {
            return Err(CdroError::InvalidParameter(
                "walk sampler needs positive N, M".into(),
            ));
        }
        let paths = (0..n_paths)
            .map(|i| {
                let mut rng = path_stream(seed, i);
                let mut flat = vec![0.0; n_steps + 1];
                for k in 1..=n_steps {
                    let step = if rng.random::<bool>() { jump } else { -jump };
                    flat[k] = flat[k - 1] + step;
                }
                DiscretePath::from_flat(flat, n_steps, 1).expect("origin-pinned by construction")
            })
            .collect();
        Ok(Self {
            paths,
            time_grid: (0..=n_steps).map(|k| k as f64).collect(),
            rng_seed: seed,
        })
    }

    /// Wraps externally built paths (e.g. enumerated scenarios pushed through
    /// a perturbation) with a uniform grid.
    pub fn from_paths(paths: Vec<DiscretePath>, time_grid: Vec<f64>, seed: u64) -> Result<Self> {
        if paths.is_empty() {
            return Err(CdroError::InvalidParameter("empty ensemble".into()));
        }
        let (n, d) = (paths[0].n_steps(), paths[0].dim());
        if paths.iter().any(|p| p.n_steps() != n || p.dim() != d) {
            return Err(CdroError::ShapeMismatch("mixed path shapes".into()));
        }
        if time_grid.len() != n + 1
            || time_grid[0] != 0.0
            || time_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(CdroError::InvalidParameter(
                "time grid must be strictly increasing from 0 with N+1 points".into(),
            ));
        }
        Ok(Self {
            paths,
            time_grid,
            rng_seed: seed,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.paths[0].dim()
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().unwrap()
    }

    /// Grid spacing `t_k - t_{k-1}`, `1 <= k <= N`.
    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.time_grid[k] - self.time_grid[k - 1]
    }

    /// Writes `path_id,t,x_1..x_d` rows, one per (path, time).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "path_id,t")?;
        for c in 1..=self.dim() {
            write!(w, ",x_{c}")?;
        }
        writeln!(w)?;
        for (i, path) in self.paths.iter().enumerate() {
            for (k, &t) in self.time_grid.iter().enumerate() {
                write!(w, "{i},{}", fmt_sig(t))?;
                for v in path.point(k) {
                    write!(w, ",{}", fmt_sig(*v))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// 12-significant-digit decimal used for all numeric text output.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.11e}")
}

fn path_stream(seed: u64, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index as u64 + 1);
    rng
}

fn uniform_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps)
        .map(|k| horizon * k as f64 / n_steps as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_under_seed() {
        let a = SampleEnsemble::brownian(1.0, 8, 2, 64, 99).unwrap();
        let b = SampleEnsemble::brownian(1.0, 8, 2, 64, 99).unwrap();
        for (x, y) in a.paths.iter().zip(&b.paths) {
            assert_eq!(x.flat(), y.flat());
        }
    }

    #[test]
    fn terminal_moments_match_brownian_marginal() {
        let m = 200_000;
        let t = 2.0;
        let e = SampleEnsemble::brownian(t, 16, 1, m, 7).unwrap();
        let mean: f64 = e.paths.iter().map(|p| p.terminal()[0]).sum::<f64>() / m as f64;
        let var: f64 = e
            .paths
            .iter()
            .map(|p| (p.terminal()[0] - mean).powi(2))
            .sum::<f64>()
            / (m - 1) as f64;
        // 4 standard errors
        let se_mean = (t / m as f64).sqrt();
        let se_var = t * (2.0 / m as f64).sqrt();
        assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
        assert!((var - t).abs() < 4.0 * se_var, "var {var}");
    }

    #[test]
    fn quadratic_variation_identity() {
        let m = 100_000;
        let t = 1.5;
        let e = SampleEnsemble::brownian(t, 32, 1, m, 11).unwrap();
        let qv: f64 = e
            .paths
            .iter()
            .map(|p| {
                let dx = p.increments();
                (1..=32).map(|k| dx.point(k)[0].powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / m as f64;
        // E sum |dX|^2 = T; each path's sum has std ~ T * sqrt(2/N)
        let se = t * (2.0 / (32.0 * m as f64)).sqrt();
        assert!((qv - t).abs() < 5.0 * se, "qv {qv} vs {t}");
    }

    #[test]
    fn csv_shape() {
        let e = SampleEnsemble::rademacher_walk(3, 1.0, 2, 1).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,t,x_1");
        assert_eq!(lines.len(), 1 + 2 * 4);
    }
}
