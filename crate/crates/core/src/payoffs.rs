//! Builtin objective functionals.

use crate::field::Field;
use crate::malliavin::Payoff;
use crate::path::DiscretePath;
use crate::sens_continuous::{SigmaSpec, UtilitySpec};
use std::sync::Arc;

/// `f(x) = <a, x_N>`.
#[derive(Clone, Debug)]
pub struct LinearPayoff {
    weights: Vec<f64>,
}

impl LinearPayoff {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Payoff for LinearPayoff {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        path.terminal()
            .iter()
            .zip(&self.weights)
            .map(|(x, a)| x * a)
            .sum()
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let n = path.n_steps();
        Some(Field::from_fn(n, path.dim(), |k| {
            if k == n {
                self.weights.clone()
            } else {
                vec![0.0; path.dim()]
            }
        }))
    }

    fn growth_exponent(&self) -> f64 {
        0.0
    }

    fn name(&self) -> &str {
        "linear"
    }
}

/// Discretely monitored Asian call `max(0, mean(x) - K)`, `d = 1`.
///
/// The derivative uses the one-sided convention `1_{mean >= K}` at the kink;
/// paths sitting exactly on the kink are surfaced via [`AsianCall::at_kink`].
#[derive(Clone, Copy, Debug)]
pub struct AsianCall {
    strike: f64,
}

impl AsianCall {
    pub fn new(strike: f64) -> Self {
        Self { strike }
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn at_kink(&self, path: &DiscretePath, tol: f64) -> bool {
        (path.average()[0] - self.strike).abs() <= tol
    }
}

impl Payoff for AsianCall {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        (path.average()[0] - self.strike).max(0.0)
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let n = path.n_steps();
        let slope = if path.average()[0] >= self.strike {
            1.0 / (n + 1) as f64
        } else {
            0.0
        };
        Some(Field::from_fn(n, 1, |_| vec![slope]))
    }

    fn on_kink(&self, path: &DiscretePath) -> bool {
        self.at_kink(path, 1e-12)
    }

    fn name(&self) -> &str {
        "asian"
    }
}

/// Half the discrete quadratic variation `0.5 * sum_n |x_n - x_{n-1}|^2`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticVariation;

impl Payoff for QuadraticVariation {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        let mut total = 0.0;
        for n in 1..=path.n_steps() {
            for c in 0..path.dim() {
                let d = path.point(n)[c] - path.point(n - 1)[c];
                total += d * d;
            }
        }
        0.5 * total
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let n = path.n_steps();
        let d = path.dim();
        Some(Field::from_fn(n, d, |k| {
            (0..d)
                .map(|c| {
                    let dk = path.point(k)[c] - path.point(k - 1)[c];
                    if k < n {
                        dk - (path.point(k + 1)[c] - path.point(k)[c])
                    } else {
                        dk
                    }
                })
                .collect()
        }))
    }

    fn growth_exponent(&self) -> f64 {
        1.0
    }

    fn name(&self) -> &str {
        "quad_var"
    }
}

/// Realized log-wealth of the optimal constant-proportion investor:
/// `log(kappa) + (r + lambda^2 / 2) T + lambda * x_N`, `d = 1`.
#[derive(Clone, Copy, Debug)]
pub struct MertonLogWealth {
    pub lambda: f64,
    pub rate: f64,
    pub initial_wealth: f64,
    pub horizon: f64,
}

impl MertonLogWealth {
    pub fn new(lambda: f64, rate: f64, initial_wealth: f64, horizon: f64) -> Self {
        Self {
            lambda,
            rate,
            initial_wealth,
            horizon,
        }
    }
}

impl Payoff for MertonLogWealth {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        self.initial_wealth.ln()
            + (self.rate + 0.5 * self.lambda * self.lambda) * self.horizon
            + self.lambda * path.terminal()[0]
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let n = path.n_steps();
        Some(Field::from_fn(n, 1, |k| {
            vec![if k == n { self.lambda } else { 0.0 }]
        }))
    }

    fn growth_exponent(&self) -> f64 {
        0.0
    }

    fn name(&self) -> &str {
        "merton"
    }
}

/// Smooth cubic test objective `x_N^3 + reg * x_N^2`, `d = 1`.
#[derive(Clone, Copy, Debug)]
pub struct CubicTerminal {
    pub reg: f64,
}

impl Payoff for CubicTerminal {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        let x = path.terminal()[0];
        x.powi(3) + self.reg * x * x
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let n = path.n_steps();
        let x = path.terminal()[0];
        Some(Field::from_fn(n, 1, |k| {
            vec![if k == n { 3.0 * x * x + 2.0 * self.reg * x } else { 0.0 }]
        }))
    }

    fn growth_exponent(&self) -> f64 {
        2.0
    }

    fn name(&self) -> &str {
        "cubic"
    }
}

/// Utility of a discretized stochastic integral,
/// `f(x) = U( sum_j sigma(t_j, x_j) (x_{j+1} - x_j) )` with left-point sums
/// over a fixed time grid; `d = 1`.
///
/// With `U(x) = x^2 / 2` this is the ex-post value of a log contract written
/// on `dS = S sigma dX` (its price equals half the accumulated squared
/// integrand).
#[derive(Clone)]
pub struct ItoIntegralUtility {
    sigma: SigmaSpec,
    utility: UtilitySpec,
    times: Arc<Vec<f64>>,
}

impl ItoIntegralUtility {
    pub fn new(sigma: SigmaSpec, utility: UtilitySpec, times: Vec<f64>) -> Self {
        Self {
            sigma,
            utility,
            times: Arc::new(times),
        }
    }

    pub fn sigma(&self) -> &SigmaSpec {
        &self.sigma
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    /// Left-point integral `sum_j sigma(t_j, x_j) (x_{j+1} - x_j)`.
    pub fn ito_sum(&self, path: &DiscretePath) -> f64 {
        let mut h = 0.0;
        for j in 0..path.n_steps() {
            h += self.sigma.value(self.times[j], path.point(j)[0])
                * (path.point(j + 1)[0] - path.point(j)[0]);
        }
        h
    }
}

impl Payoff for ItoIntegralUtility {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        self.utility.value(self.ito_sum(path))
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        let n = path.n_steps();
        let du = self.utility.derivative(self.ito_sum(path));
        Some(Field::from_fn(n, 1, |k| {
            let t = self.times[k];
            let x = path.point(k)[0];
            let dh = if k < n {
                let dxk1 = path.point(k + 1)[0] - x;
                self.sigma.dx(t, x) * dxk1 - self.sigma.value(t, x)
                    + self.sigma.value(self.times[k - 1], path.point(k - 1)[0])
            } else {
                self.sigma.value(self.times[k - 1], path.point(k - 1)[0])
            };
            vec![du * dh]
        }))
    }

    fn growth_exponent(&self) -> f64 {
        1.0
    }

    fn grid_free(&self) -> bool {
        false
    }

    fn name(&self) -> &str {
        "ito_utility"
    }
}

/// Closure-backed payoff for CLI expression files and tests.
pub struct CustomPayoff {
    label: String,
    growth: f64,
    eval: Arc<dyn Fn(&DiscretePath) -> f64 + Send + Sync>,
}

impl CustomPayoff {
    pub fn new(
        label: impl Into<String>,
        growth: f64,
        eval: Arc<dyn Fn(&DiscretePath) -> f64 + Send + Sync>,
    ) -> Self {
        Self {
            label: label.into(),
            growth,
            eval,
        }
    }
}

impl Payoff for CustomPayoff {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        (self.eval)(path)
    }

    fn growth_exponent(&self) -> f64 {
        self.growth
    }

    fn name(&self) -> &str {
        &self.label
    }
}

/// `alpha * f`, keeping the inner payoff's gradient when it has one.
pub struct Scaled<P> {
    pub inner: P,
    pub factor: f64,
}

impl<P: Payoff> Payoff for Scaled<P> {
    fn evaluate(&self, path: &DiscretePath) -> f64 {
        self.factor * self.inner.evaluate(path)
    }

    fn coordinate_gradient(&self, path: &DiscretePath) -> Option<Field> {
        self.inner.coordinate_gradient(path).map(|mut g| {
            g.scale(self.factor);
            g
        })
    }

    fn growth_exponent(&self) -> f64 {
        self.inner.growth_exponent()
    }

    fn name(&self) -> &str {
        "scaled"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::malliavin::validate_gradient;

    fn probes() -> Vec<DiscretePath> {
        vec![
            DiscretePath::scalar(&[0.0, 0.4, 1.3, 0.9, 1.7]).unwrap(),
            DiscretePath::scalar(&[0.0, -0.8, -0.1, 0.5, -1.2]).unwrap(),
        ]
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let times: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
        let payoffs: Vec<Box<dyn Payoff>> = vec![
            Box::new(LinearPayoff::new(vec![1.5])),
            Box::new(QuadraticVariation),
            Box::new(MertonLogWealth::new(0.5, 0.01, 1.0, 1.0)),
            Box::new(CubicTerminal { reg: 0.25 }),
            Box::new(ItoIntegralUtility::new(
                SigmaSpec::tanh(0.2, 0.05),
                UtilitySpec::quadratic(),
                times,
            )),
        ];
        for f in &payoffs {
            validate_gradient(f.as_ref(), &probes()).unwrap();
        }
        // Asian away from the kink
        validate_gradient(&AsianCall::new(-5.0), &probes()).unwrap();
    }

    #[test]
    fn asian_kink_detection() {
        let f = AsianCall::new(0.5);
        let x = DiscretePath::scalar(&[0.0, 1.0, 1.0]).unwrap(); // mean = 2/3
        assert!(!f.at_kink(&x, 1e-12));
        let y = DiscretePath::scalar(&[0.0, 0.5, 1.0]).unwrap(); // mean = 0.5
        assert!(f.at_kink(&y, 1e-12));
    }

    #[test]
    fn ito_sum_constant_sigma_is_terminal_scaled() {
        let times: Vec<f64> = (0..=3).map(|k| k as f64).collect();
        let f = ItoIntegralUtility::new(SigmaSpec::constant(0.3), UtilitySpec::linear(), times);
        let x = DiscretePath::scalar(&[0.0, 1.0, -0.5, 2.0]).unwrap();
        assert!((f.ito_sum(&x) - 0.3 * 2.0).abs() < 1e-15);
    }
}
