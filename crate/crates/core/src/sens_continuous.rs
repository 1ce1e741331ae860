//! Continuous-time sensitivity estimators on simulated time grids.
//!
//! Hyperbolic scaling prices drift perturbations: the estimator is the
//! grid version of `L*((int_0^T E|oD_t f|_q^q dt)^{1/q})`, built from
//! permanent-shift bumps and a regression optional projection.
//!
//! Parabolic scaling prices volatility perturbations of a Brownian
//! reference for objectives `f = U(int <h, dX>)` with `h(t, w) = sigma(t, w_t)`.
//! The estimator assembles the predictable field
//! `phi_s = p{ U''(H) (D_{s+}H)(D_s H) + U'(H) int_s^T sigma_xx dX }`
//! from left-point Ito sums and backward tail sums, then
//! `Upsilon_Mart = L*((E int_0^T phi_t^2 dt)^{1/2})`.

use crate::cost::{CostSpec, Scaling};
use crate::ensemble::SampleEnsemble;
use crate::error::{CdroError, Result};
use crate::field::Field;
use crate::malliavin::Payoff;
use crate::penalty::Penalty;
use crate::projection::{build_design, fit_coefficients, predict, BasisSpec, BasisVar};
use crate::report::{Diagnostics, SensitivityReport};
use crate::sens_discrete::{upsilon, DiscreteModel, SensOptions};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A state-dependent integrand `sigma(t, x)` with analytic `x`-partials,
/// scalar state.
#[derive(Clone)]
pub struct SigmaSpec {
    label: String,
    value: ScalarFn,
    dx: ScalarFn,
    dxx: ScalarFn,
    sup_bound: f64,
}

impl SigmaSpec {
    pub fn constant(c: f64) -> Self {
        Self {
            label: format!("const:{c}"),
            value: Arc::new(move |_, _| c),
            dx: Arc::new(|_, _| 0.0),
            dxx: Arc::new(|_, _| 0.0),
            sup_bound: c.abs(),
        }
    }

    /// `sigma(t, x) = base + amp * tanh(x)`; bounded with bounded partials.
    pub fn tanh(base: f64, amp: f64) -> Self {
        Self {
            label: format!("tanh:a={base},b={amp}"),
            value: Arc::new(move |_, x: f64| base + amp * x.tanh()),
            dx: Arc::new(move |_, x: f64| amp * (1.0 - x.tanh().powi(2))),
            dxx: Arc::new(move |_, x: f64| {
                let th = x.tanh();
                -2.0 * amp * th * (1.0 - th * th)
            }),
            sup_bound: base.abs() + amp.abs(),
        }
    }

    pub fn custom(
        label: impl Into<String>,
        value: ScalarFn,
        dx: ScalarFn,
        dxx: ScalarFn,
        sup_bound: f64,
    ) -> Self {
        Self {
            label: label.into(),
            value,
            dx,
            dxx,
            sup_bound,
        }
    }

    /// Parses `const:0.2` or `tanh:a=0.2,b=0.05`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match name {
            "const" => Ok(Self::constant(rest.parse().map_err(|_| {
                CdroError::Config(format!("bad sigma constant {rest:?}"))
            })?)),
            "tanh" => {
                let mut a = None;
                let mut b = None;
                for kv in rest.split(',') {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| CdroError::Config(format!("bad sigma field {kv:?}")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| CdroError::Config(format!("bad sigma value {kv:?}")))?;
                    match k {
                        "a" => a = Some(v),
                        "b" => b = Some(v),
                        _ => return Err(CdroError::Config(format!("unknown sigma field {k:?}"))),
                    }
                }
                match (a, b) {
                    (Some(a), Some(b)) => Ok(Self::tanh(a, b)),
                    _ => Err(CdroError::Config("tanh sigma needs a= and b=".into())),
                }
            }
            _ => Err(CdroError::Config(format!("unknown sigma family {name:?}"))),
        }
    }

    #[inline]
    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }

    #[inline]
    pub fn dx(&self, t: f64, x: f64) -> f64 {
        (self.dx)(t, x)
    }

    #[inline]
    pub fn dxx(&self, t: f64, x: f64) -> f64 {
        (self.dxx)(t, x)
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Central-difference audit of the declared partials at random points.
    pub fn validate(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = 1e-5;
        for _ in 0..64 {
            let t: f64 = rng.random_range(0.0..1.0);
            let x: f64 = rng.random_range(-3.0..3.0);
            let fd1 = (self.value(t, x + eps) - self.value(t, x - eps)) / (2.0 * eps);
            if (fd1 - self.dx(t, x)).abs() > 1e-6 * (1.0 + fd1.abs()) {
                return Err(CdroError::NumericalFailure(format!(
                    "sigma {}: dx mismatch at (t={t}, x={x})",
                    self.label
                )));
            }
            let fd2 =
                (self.value(t, x + eps) - 2.0 * self.value(t, x) + self.value(t, x - eps))
                    / (eps * eps);
            if (fd2 - self.dxx(t, x)).abs() > 1e-4 * (1.0 + fd2.abs()) {
                return Err(CdroError::NumericalFailure(format!(
                    "sigma {}: dxx mismatch at (t={t}, x={x})",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A utility `U` in `C^2` with bounded second derivative.
#[derive(Clone)]
pub struct UtilitySpec {
    label: String,
    u: RealFn,
    du: RealFn,
    ddu: RealFn,
    ddu_bound: f64,
}

impl UtilitySpec {
    pub fn linear() -> Self {
        Self {
            label: "linear".into(),
            u: Arc::new(|x| x),
            du: Arc::new(|_| 1.0),
            ddu: Arc::new(|_| 0.0),
            ddu_bound: 0.0,
        }
    }

    /// `U(x) = scale * x^2 / 2`.
    pub fn quadratic_scaled(scale: f64) -> Self {
        Self {
            label: if scale == 1.0 {
                "quad".into()
            } else {
                format!("quad:scale={scale}")
            },
            u: Arc::new(move |x| 0.5 * scale * x * x),
            du: Arc::new(move |x| scale * x),
            ddu: Arc::new(move |_| scale),
            ddu_bound: scale.abs(),
        }
    }

    pub fn quadratic() -> Self {
        Self::quadratic_scaled(1.0)
    }

    pub fn custom(
        label: impl Into<String>,
        u: RealFn,
        du: RealFn,
        ddu: RealFn,
        ddu_bound: f64,
    ) -> Self {
        Self {
            label: label.into(),
            u,
            du,
            ddu,
            ddu_bound,
        }
    }

    /// Parses `linear`, `quad` or `quad:scale=2`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match name {
            "linear" => Ok(Self::linear()),
            "quad" => {
                if rest.is_empty() {
                    Ok(Self::quadratic())
                } else {
                    let v = rest
                        .strip_prefix("scale=")
                        .and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| {
                            CdroError::Config(format!("bad utility spec {spec:?}"))
                        })?;
                    Ok(Self::quadratic_scaled(v))
                }
            }
            _ => Err(CdroError::Config(format!("unknown utility {name:?}"))),
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.u)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.du)(x)
    }

    #[inline]
    pub fn second(&self, x: f64) -> f64 {
        (self.ddu)(x)
    }

    pub fn second_bound(&self) -> f64 {
        self.ddu_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn validate(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = 1e-5;
        for _ in 0..64 {
            let x: f64 = rng.random_range(-3.0..3.0);
            let fd1 = (self.value(x + eps) - self.value(x - eps)) / (2.0 * eps);
            if (fd1 - self.derivative(x)).abs() > 1e-6 * (1.0 + fd1.abs()) {
                return Err(CdroError::NumericalFailure(format!(
                    "utility {}: U' mismatch at x={x}",
                    self.label
                )));
            }
            let fd2 = (self.value(x + eps) - 2.0 * self.value(x) + self.value(x - eps))
                / (eps * eps);
            if (fd2 - self.second(x)).abs() > 1e-4 * (1.0 + fd2.abs()) {
                return Err(CdroError::NumericalFailure(format!(
                    "utility {}: U'' mismatch at x={x}",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// Drift-type sensitivity on a simulated ensemble under hyperbolic cost
/// scaling. Adds a two-grid refinement diagnostic when the payoff is
/// grid-free and the step count is even.
pub fn upsilon_hyperbolic(
    ens: &SampleEnsemble,
    f: &dyn Payoff,
    spec: &CostSpec,
    penalty: &Penalty,
    opts: &SensOptions,
) -> Result<SensitivityReport> {
    if spec.scaling() != Scaling::Hyperbolic {
        return Err(CdroError::InvalidParameter(
            "hyperbolic estimator needs hyperbolic cost scaling".into(),
        ));
    }
    let spec = CostSpec::new(spec.p(), Scaling::Hyperbolic)?.with_horizon(ens.horizon())?;
    let mut report = upsilon(DiscreteModel::Ensemble(ens), f, &spec, penalty, opts)?;
    report.diagnostics.backend = "monte-carlo-hyperbolic".into();
    if f.grid_free() && ens.n_steps() % 2 == 0 && ens.n_steps() >= 4 {
        let coarse = subsample_every_other(ens)?;
        let coarse_report = upsilon(DiscreteModel::Ensemble(&coarse), f, &spec, penalty, opts)?;
        report.diagnostics.grid_refinement_delta = Some((report.r_norm - coarse_report.r_norm).abs());
    }
    Ok(report)
}

fn subsample_every_other(ens: &SampleEnsemble) -> Result<SampleEnsemble> {
    let n = ens.n_steps();
    let keep: Vec<usize> = (0..=n).step_by(2).collect();
    let d = ens.dim();
    let paths = ens
        .paths
        .iter()
        .map(|p| {
            let mut flat = Vec::with_capacity(keep.len() * d);
            for &k in &keep {
                flat.extend_from_slice(p.point(k));
            }
            crate::path::DiscretePath::from_flat(flat, keep.len() - 1, d)
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = keep.iter().map(|&k| ens.time_grid[k]).collect();
    SampleEnsemble::from_paths(paths, grid, ens.rng_seed)
}

/// Per-path ingredients of the parabolic integrand: `H`, the derivative
/// tails, and the raw integrand `psi_k` at each left grid point.
fn parabolic_raw(
    ens: &SampleEnsemble,
    sigma: &SigmaSpec,
    utility: &UtilitySpec,
) -> Result<Vec<Vec<f64>>> {
    if ens.dim() != 1 {
        return Err(CdroError::UnsupportedBackend(
            "parabolic estimator is scalar-state only".into(),
        ));
    }
    let n = ens.n_steps();
    let grid = &ens.time_grid;
    let mut out = Vec::with_capacity(ens.len());
    for path in &ens.paths {
        let x = |k: usize| path.point(k)[0];
        let mut h = 0.0;
        for j in 0..n {
            h += sigma.value(grid[j], x(j)) * (x(j + 1) - x(j));
        }
        let du = utility.derivative(h);
        let ddu = utility.second(h);
        // Backward tails: after the update at k they hold the left-point
        // sums over j = k..N-1, i.e. int_{t_k}^T of the sigma partials.
        // D_{t_k} H = sigma(t_k, x_k) + tail; the right-limit D_{t_k+}
        // coincides with it on the grid for continuous integrands.
        let mut tail_dx = 0.0;
        let mut tail_dxx = 0.0;
        let mut psi = vec![0.0; n];
        for k in (0..n).rev() {
            let dxk = x(k + 1) - x(k);
            tail_dx += sigma.dx(grid[k], x(k)) * dxk;
            tail_dxx += sigma.dxx(grid[k], x(k)) * dxk;
            let dh = sigma.value(grid[k], x(k)) + tail_dx;
            psi[k] = ddu * dh * dh + du * tail_dxx;
        }
        out.push(psi);
    }
    Ok(out)
}

/// The predictable volatility-response field `phi` on the grid: raw
/// integrand per path, then a per-time regression on the previous grid
/// point's state (the time-`t_{k-1}` information).
///
/// Index convention: the returned field stores `phi_{t_k}` at time slot
/// `k + 1`, for `k = 0..N-1` (left quadrature points of `[0, T]`).
pub fn phi_parabolic(
    ens: &SampleEnsemble,
    sigma: &SigmaSpec,
    utility: &UtilitySpec,
    basis: &BasisSpec,
) -> Result<Vec<Field>> {
    let n = ens.n_steps();
    let m = ens.len();
    let raw = parabolic_raw(ens, sigma, utility)?;
    let n_features = basis.feature_count(1);
    if m < 10 * n_features {
        return Err(CdroError::ProjectionFailure(format!(
            "need at least 10x more paths than basis functions: {m} paths, {n_features} features"
        )));
    }
    let mut out = vec![Field::zero(n, 1); m];
    let mut y = vec![0.0; m];
    for k in 0..n {
        for (i, psi) in raw.iter().enumerate() {
            y[i] = psi[k];
        }
        if k == 0 {
            let mean = y.iter().sum::<f64>() / m as f64;
            for f in out.iter_mut() {
                f.at_mut(1)[0] = mean;
            }
        } else {
            let design = build_design(ens, k - 1, basis);
            let coeffs = fit_coefficients(&design, &y, None, 1e-8)?;
            let fitted = predict(&design, &coeffs);
            for (i, v) in fitted.into_iter().enumerate() {
                out[i].at_mut(k + 1)[0] = v;
            }
        }
    }
    Ok(out)
}

/// Default parabolic regression basis: cubic in the conditioning state.
pub fn parabolic_basis() -> BasisSpec {
    BasisSpec {
        degree: 3,
        vars: vec![BasisVar::State],
    }
}

/// Volatility-uncertainty sensitivity of `U(int sigma(t, X_t) dX_t)` under
/// a Brownian reference: `Upsilon_Mart = L*((E sum_k dt phi_{t_k}^2)^{1/2})`.
pub fn upsilon_mart_parabolic(
    ens: &SampleEnsemble,
    sigma: &SigmaSpec,
    utility: &UtilitySpec,
    penalty: &Penalty,
    basis: &BasisSpec,
    bootstrap_resamples: usize,
) -> Result<SensitivityReport> {
    let n = ens.n_steps();
    let m = ens.len();
    let phi = phi_parabolic(ens, sigma, utility, basis)?;
    let mut contrib = vec![0.0; n];
    for f in &phi {
        for k in 0..n {
            contrib[k] += ens.dt(k + 1) * f.at(k + 1)[0].powi(2) / m as f64;
        }
    }
    let r = contrib.iter().sum::<f64>().sqrt();
    let upsilon = penalty.conjugate(r);
    let u_star = penalty.optimal_u(r)?;
    let mut diagnostics = Diagnostics {
        backend: "monte-carlo-parabolic".into(),
        ..Diagnostics::default()
    };
    if let crate::penalty::GrowthCheck::Warn(msg) = penalty.validate_growth(2.0) {
        diagnostics.growth_warning = Some(msg);
    }
    if bootstrap_resamples > 0 {
        let per_path: Vec<f64> = phi
            .iter()
            .map(|f| (0..n).map(|k| ens.dt(k + 1) * f.at(k + 1)[0].powi(2)).sum())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let rs: Vec<f64> = (0..bootstrap_resamples)
            .map(|_| {
                let total: f64 = (0..m).map(|_| per_path[rng.random_range(0..m)]).sum();
                (total / m as f64).sqrt()
            })
            .collect();
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        let var = rs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rs.len() - 1) as f64;
        diagnostics.bootstrap_se_r = Some(var.sqrt());
    }
    Ok(SensitivityReport {
        upsilon,
        r_norm: r,
        u_star,
        per_time_contribution: contrib,
        adversarial_field: None,
        diagnostics,
    })
}

/// Discrete-time martingale sensitivity of the same grid objective, used
/// only as a flagged consistency diagnostic for the parabolic estimator
/// (the naive discretization's limit need not coincide with it).
pub fn parabolic_discrete_surrogate(
    ens: &SampleEnsemble,
    sigma: &SigmaSpec,
    utility: &UtilitySpec,
    penalty: &Penalty,
    opts: &SensOptions,
) -> Result<f64> {
    let payoff = crate::payoffs::ItoIntegralUtility::new(
        sigma.clone(),
        utility.clone(),
        ens.time_grid.clone(),
    );
    let spec = CostSpec::new(2.0, Scaling::Parabolic)?;
    let rep = crate::sens_discrete::upsilon_mart(
        DiscreteModel::Ensemble(ens),
        &payoff,
        &spec,
        penalty,
        opts,
    )?;
    Ok(rep.upsilon)
}

/// Analytic reference sensitivities (indicator penalty of radius 1).
#[derive(Clone, Copy, Debug)]
pub enum ReferenceCase {
    /// Log-investor terminal utility: `lambda * sqrt(T)`.
    Merton { lambda: f64, horizon: f64 },
    /// Log contract under constant volatility: `sigma^2 * sqrt(T)`.
    LogContract { sigma: f64, horizon: f64 },
    /// Half the terminal quadratic variation: `sqrt(T)`.
    QuadVar { horizon: f64 },
}

pub fn closed_form_reference(case: ReferenceCase) -> f64 {
    match case {
        ReferenceCase::Merton { lambda, horizon } => lambda * horizon.sqrt(),
        ReferenceCase::LogContract { sigma, horizon } => sigma * sigma * horizon.sqrt(),
        ReferenceCase::QuadVar { horizon } => horizon.sqrt(),
    }
}
