use crate::error::{CdroError, Result};
use crate::path::DiscretePath;
use serde::{Deserialize, Serialize};

/// Cost scaling regime.
///
/// `Discrete` leaves the increment cost unscaled; `Hyperbolic` multiplies by
/// `N^{p-1} / T^{p-1}`, turning the sum into a Sobolev-type cost that prices
/// drift perturbations; `Parabolic` is the unscaled `p = 2` regime whose limit
/// is the terminal quadratic variation of the difference, pricing volatility
/// perturbations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Discrete,
    Hyperbolic,
    Parabolic,
}

/// Transport-cost specification: exponent `p > 1` and scaling regime.
///
/// The dual exponent `q = p / (p - 1)` is always derived, never stored. The
/// state norm is the `l_p` norm, tied to the cost exponent.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CostSpec {
    p: f64,
    scaling: Scaling,
    /// Model-time horizon `T`; defaults to 1 for problems with no clock.
    horizon: f64,
}

impl CostSpec {
    pub fn new(p: f64, scaling: Scaling) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(CdroError::InvalidParameter(format!(
                "cost exponent p must be finite and > 1, got {p}"
            )));
        }
        if scaling == Scaling::Parabolic && (p - 2.0).abs() > 1e-12 {
            return Err(CdroError::InvalidParameter(
                "parabolic scaling requires p = 2".into(),
            ));
        }
        Ok(Self {
            p,
            scaling,
            horizon: 1.0,
        })
    }

    pub fn discrete(p: f64) -> Result<Self> {
        Self::new(p, Scaling::Discrete)
    }

    pub fn with_horizon(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(CdroError::InvalidParameter(format!(
                "horizon must be positive, got {t}"
            )));
        }
        self.horizon = t;
        Ok(self)
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Dual exponent `q` with `1/p + 1/q = 1`.
    #[inline]
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    #[inline]
    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Multiplier applied to the raw increment cost sum.
    pub fn scale_factor(&self, n_steps: usize) -> f64 {
        match self.scaling {
            Scaling::Hyperbolic => (n_steps as f64 / self.horizon).powf(self.p - 1.0),
            Scaling::Discrete | Scaling::Parabolic => 1.0,
        }
    }
}

/// `sum_i |v_i|^p` — the `p`-th power of the `l_p` norm.
#[inline]
pub fn lp_pow(v: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        v.iter().map(|x| x * x).sum()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum()
    }
}

/// Increment transport cost `sum_n |dx_n - dy_n|_p^p`, scaled per the spec.
pub fn cost_cn(x: &DiscretePath, y: &DiscretePath, spec: &CostSpec) -> Result<f64> {
    if x.n_steps() != y.n_steps() || x.dim() != y.dim() {
        return Err(CdroError::ShapeMismatch(format!(
            "cost_cn: ({}, {}) vs ({}, {})",
            x.n_steps(),
            x.dim(),
            y.n_steps(),
            y.dim()
        )));
    }
    let p = spec.p();
    let d = x.dim();
    let mut total = 0.0;
    let mut diff = vec![0.0; d];
    for n in 1..=x.n_steps() {
        let (xa, xb) = (x.point(n), x.point(n - 1));
        let (ya, yb) = (y.point(n), y.point(n - 1));
        for i in 0..d {
            diff[i] = (xa[i] - xb[i]) - (ya[i] - yb[i]);
        }
        total += lp_pow(&diff, p);
    }
    Ok(total * spec.scale_factor(x.n_steps()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_coupling_costs_zero() {
        let x = DiscretePath::scalar(&[0.0, 0.7, -0.2, 1.4]).unwrap();
        let spec = CostSpec::discrete(2.0).unwrap();
        assert_eq!(cost_cn(&x, &x, &spec).unwrap(), 0.0);
    }

    #[test]
    fn two_step_hand_values() {
        let y = DiscretePath::scalar(&[0.0, 0.0, 0.0]).unwrap();
        let spec = CostSpec::discrete(2.0).unwrap();
        // dx = (1, 0)
        let x = DiscretePath::scalar(&[0.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(cost_cn(&x, &y, &spec).unwrap(), 1.0, epsilon = 1e-15);
        // dx = (1, -1)
        let x2 = DiscretePath::scalar(&[0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(cost_cn(&x2, &y, &spec).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hyperbolic_scale_factor() {
        let unscaled = CostSpec::discrete(2.0).unwrap();
        let scaled = CostSpec::new(2.0, Scaling::Hyperbolic)
            .unwrap()
            .with_horizon(1.0)
            .unwrap();
        let x = DiscretePath::scalar(&[0.0, 0.3, -0.1, 0.2, 0.9]).unwrap();
        let y = DiscretePath::zero(4, 1);
        let a = cost_cn(&x, &y, &unscaled).unwrap();
        let b = cost_cn(&x, &y, &scaled).unwrap();
        assert_relative_eq!(b, 4.0 * a, epsilon = 1e-14);
    }

    #[test]
    fn q_is_derived() {
        let spec = CostSpec::discrete(3.0).unwrap();
        assert_relative_eq!(1.0 / spec.p() + 1.0 / spec.q(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn parabolic_requires_p2() {
        assert!(CostSpec::new(3.0, Scaling::Parabolic).is_err());
        assert!(CostSpec::new(2.0, Scaling::Parabolic).is_ok());
    }

    #[test]
    fn symmetry_and_positivity() {
        let x = DiscretePath::scalar(&[0.0, 0.5, 1.5, -0.5]).unwrap();
        let y = DiscretePath::scalar(&[0.0, -0.2, 0.4, 0.1]).unwrap();
        let spec = CostSpec::discrete(1.7).unwrap();
        assert_relative_eq!(
            cost_cn(&x, &y, &spec).unwrap(),
            cost_cn(&y, &x, &spec).unwrap(),
            epsilon = 1e-15
        );
        // zero exactly when the increments coincide
        assert!(cost_cn(&x, &y, &spec).unwrap() > 0.0);
        assert_eq!(cost_cn(&y, &y, &spec).unwrap(), 0.0);
    }
}
