//! Randomized model and payoff generators for property suites and fuzzing.

use crate::error::Result;
use crate::field::Field;
use crate::lattice::{LatticeModel, LatticeNode};
use crate::malliavin::Payoff;
use crate::path::DiscretePath;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random non-recombining martingale tree: 2 or 3 children per node,
/// random positive transition probabilities, increments recentred so every
/// node drift is exactly zero.
pub fn random_martingale_lattice(
    seed: u64,
    n_steps: usize,
    dim: usize,
) -> Result<LatticeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![LatticeNode {
        time: 0,
        state: vec![0.0; dim],
        children: vec![],
    }];
    let mut frontier = vec![0usize];
    for t in 0..n_steps {
        let mut next = Vec::new();
        for &idx in &frontier {
            let fanout = if rng.random::<bool>() { 2 } else { 3 };
            let mut probs: Vec<f64> = (0..fanout).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let mut moves: Vec<Vec<f64>> = (0..fanout)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            for c in 0..dim {
                let drift: f64 = probs.iter().zip(&moves).map(|(p, m)| p * m[c]).sum();
                for m in moves.iter_mut() {
                    m[c] -= drift;
                }
            }
            for (p, m) in probs.iter().zip(&moves) {
                let child = nodes.len();
                let state = nodes[idx]
                    .state
                    .iter()
                    .zip(m)
                    .map(|(s, d)| s + d)
                    .collect();
                nodes.push(LatticeNode {
                    time: t + 1,
                    state,
                    children: vec![],
                });
                nodes[idx].children.push((child, *p));
                next.push(child);
            }
        }
        frontier = next;
    }
    LatticeModel::new(nodes, true)
}

/// A random smooth payoff: a mixture of coordinate-wise trigonometric and
/// polynomial terms over the whole path, with analytic gradient.
pub struct RandomSmoothPayoff {
    /// per-term (time index weight vector, frequency, amplitude)
    terms: Vec<(Vec<f64>, f64, f64)>,
    dim: usize,
}

impl RandomSmoothPayoff {
    pub fn sample(seed: u64, n_steps: usize, dim: usize, n_terms: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..n_terms)
            .map(|_| {
                let weights: Vec<f64> = (0..n_steps * dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                (
                    weights,
                    rng.random_range(0.3..2.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        Self { terms, dim }
    }

    fn inner(&self, weights: &[f64], path: &DiscretePath) -> f64 {
        let d = self.dim;
        (1..=path.n_steps())
            .flat_map(|k| (0..d).map(move |c| (k, c)))
            .map(|(k, c)| weights[(k - 1) * d + c] * path.point(k)[c])
            .sum()
    }
}

impl Payoff for RandomSmoothPayoff {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        self.terms
            .iter()
            .map(|(w, freq, amp)| amp * (freq * self.inner(w, path)).sin())
            .sum()
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let d = self.dim;
        let mut data = vec![0.0; path.n_steps() * d];
        for (w, freq, amp) in &self.terms {
            let arg = freq * self.inner(w, path);
            let outer = amp * freq * arg.cos();
            for (slot, wk) in w.iter().enumerate() {
                data[slot] += outer * wk;
            }
        }
        Field::from_flat(data, path.n_steps(), d).ok()
    }

    fn growth_exponent(&self) -> f64 {
        0.0
    }

    fn name(&self) -> &str {
        "random_smooth"
    }
}

/// Random fields (one per path) for projection property tests.
pub fn random_fields(seed: u64, n_paths: usize, n_steps: usize, dim: usize) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_paths)
        .map(|_| {
            Field::from_fn(n_steps, dim, |_| {
                (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::malliavin::validate_gradient;

    #[test]
    fn random_lattices_are_martingales() {
        for seed in 0..5 {
            let m = random_martingale_lattice(seed, 4, 1).unwrap();
            let chk = m.check_martingale(1e-12);
            assert!(chk.ok, "seed {seed}: violation {}", chk.worst_violation);
        }
    }

    #[test]
    fn random_payoffs_have_valid_gradients() {
        let probes = vec![
            DiscretePath::scalar(&[0.0, 0.3, -0.4, 0.8]).unwrap(),
            DiscretePath::scalar(&[0.0, -1.0, 0.2, 0.1]).unwrap(),
        ];
        for seed in 0..5 {
            let f = RandomSmoothPayoff::sample(seed, 3, 1, 3);
            validate_gradient(&f, &probes).unwrap();
        }
    }
}
