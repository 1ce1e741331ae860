//! Discrete-time sensitivities and the first-order optimal adversarial
//! perturbation.
//!
//! Unconstrained: `Upsilon = L*(r)` with `r^q = sum_n w_n E |oD_n f|_q^q`
//! where `oD` is the optional projection of the pathwise derivative field
//! and `w_n` are 1 for unscaled costs and `dt` under hyperbolic scaling.
//! Martingale-constrained: `r` is the distance between `oD f` and its best
//! predictable `L^q` approximation `h*`; at `p = 2`, `h*` is the predictable
//! projection itself.

use crate::cost::{cost_cn, lp_pow, CostSpec, Scaling};
use crate::ensemble::SampleEnsemble;
use crate::error::{CdroError, Result};
use crate::field::Field;
use crate::lattice::{EnumeratedPaths, LatticeModel};
use crate::malliavin::{discrete_malliavin, GradientBackend, Payoff};
use crate::path::DiscretePath;
use crate::penalty::Penalty;
use crate::projection::{
    exact_projection, lq_predictable_projection, regression_projection, BasisSpec,
    ProjectionKind, RegressionOptions,
};
use crate::report::{Diagnostics, SensitivityReport};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Martingale tolerance demanded of models fed to the constrained
/// sensitivity, loose enough to accept perturbed models built in floats.
pub const MARTINGALE_TOL: f64 = 1e-8;

/// A discrete-time reference model: exact tree or Monte Carlo ensemble.
#[derive(Clone, Copy)]
pub enum DiscreteModel<'a> {
    Lattice(&'a LatticeModel),
    Ensemble(&'a SampleEnsemble),
}

/// Knobs shared by the discrete estimators.
#[derive(Clone, Debug)]
pub struct SensOptions {
    pub gradient: GradientBackend,
    pub basis: BasisSpec,
    pub regression: RegressionOptions,
    /// Bootstrap resamples for Monte Carlo error bars on `r_norm`.
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Attach the per-path perturbation increments to the report.
    pub attach_adversarial: bool,
}

impl Default for SensOptions {
    fn default() -> Self {
        Self {
            gradient: GradientBackend::Auto,
            basis: BasisSpec::default(),
            regression: RegressionOptions::default(),
            bootstrap_resamples: 200,
            bootstrap_seed: 0x5eed,
            attach_adversarial: false,
        }
    }
}

/// The Hoelder-extremal direction `v(e) = (e_i |e_i|^{q-2})_i`, extended
/// continuously by `v(0) = 0`.
///
/// Converts an `l_q` gradient into the `l_p`-optimal perturbation:
/// `<v(e), e> = |e|_q^q` and `|v(e)|_p^p = |e|_q^q`.
pub fn v_map(e: &[f64], q: f64) -> Vec<f64> {
    e.iter()
        .map(|&x| {
            if x == 0.0 {
                0.0
            } else {
                x.signum() * x.abs().powf(q - 1.0)
            }
        })
        .collect()
}

/// First-order optimal perturbation of a reference model: each scenario `x`
/// maps to `x + scale * cumsum(v(oD f - h*))`, scaled so the realized
/// transport cost is exactly `(u delta)^p` in expectation.
pub struct AdversarialOutput {
    pub base: Vec<DiscretePath>,
    pub perturbed: Vec<DiscretePath>,
    pub weights: Vec<f64>,
    pub realized_cost: f64,
    pub realized_gain: f64,
    pub u: f64,
    pub delta: f64,
    pub r_norm: f64,
    /// Same-topology tree with perturbed states, when the base model is a
    /// lattice (the perturbation is adapted, so states stay node-attached).
    pub perturbed_lattice: Option<LatticeModel>,
}

struct ModelData {
    paths: Vec<DiscretePath>,
    weights: Vec<f64>,
    enumerated: Option<EnumeratedPaths>,
    time_grid: Option<Vec<f64>>,
    backend_label: &'static str,
}

fn load_model(model: DiscreteModel) -> Result<ModelData> {
    match model {
        DiscreteModel::Lattice(l) => {
            let e = l.enumerate()?;
            Ok(ModelData {
                paths: e.paths.clone(),
                weights: e.probs.clone(),
                enumerated: Some(e),
                time_grid: None,
                backend_label: "exact-lattice",
            })
        }
        DiscreteModel::Ensemble(ens) => {
            let w = 1.0 / ens.len() as f64;
            Ok(ModelData {
                paths: ens.paths.clone(),
                weights: vec![w; ens.len()],
                enumerated: None,
                time_grid: Some(ens.time_grid.clone()),
                backend_label: "monte-carlo",
            })
        }
    }
}

/// Per-time weights turning the `L^q` sum into the scaled-cost norm:
/// `dt` under hyperbolic scaling, 1 otherwise.
fn time_weights(spec: &CostSpec, n_steps: usize, grid: Option<&[f64]>) -> Vec<f64> {
    match spec.scaling() {
        Scaling::Hyperbolic => match grid {
            Some(g) => (1..=n_steps).map(|k| g[k] - g[k - 1]).collect(),
            None => vec![spec.horizon() / n_steps as f64; n_steps],
        },
        Scaling::Discrete | Scaling::Parabolic => vec![1.0; n_steps],
    }
}

fn derivative_fields(
    paths: &[DiscretePath],
    f: &dyn Payoff,
    backend: GradientBackend,
) -> Result<Vec<Field>> {
    paths
        .iter()
        .map(|p| discrete_malliavin(f, p, backend))
        .collect()
}

fn kink_mass(paths: &[DiscretePath], weights: &[f64], f: &dyn Payoff) -> Option<f64> {
    let mass: f64 = paths
        .iter()
        .zip(weights)
        .filter(|(p, _)| f.on_kink(p))
        .map(|(_, w)| w)
        .sum();
    (mass > 0.0).then_some(mass)
}

fn optional_of(
    data: &ModelData,
    ens: Option<&SampleEnsemble>,
    fields: &[Field],
    opts: &SensOptions,
) -> Result<Vec<Field>> {
    match (&data.enumerated, ens) {
        (Some(e), _) => exact_projection(e, fields, ProjectionKind::Optional),
        (None, Some(ens)) => regression_projection(
            ens,
            fields,
            ProjectionKind::Optional,
            &opts.basis,
            &opts.regression,
        ),
        _ => unreachable!("ensemble data without ensemble handle"),
    }
}

/// `q`-th-power per-time contributions `w_n * E |field_n|_q^q`.
fn contributions(fields: &[Field], weights: &[f64], tw: &[f64], q: f64) -> Vec<f64> {
    let n_steps = tw.len();
    let mut contrib = vec![0.0; n_steps];
    for (field, &w) in fields.iter().zip(weights) {
        for n in 1..=n_steps {
            contrib[n - 1] += tw[n - 1] * w * lp_pow(field.at(n), q);
        }
    }
    contrib
}

fn bootstrap_se_r(
    fields: &[Field],
    tw: &[f64],
    q: f64,
    resamples: usize,
    seed: u64,
) -> Option<f64> {
    if resamples == 0 || fields.is_empty() {
        return None;
    }
    let m = fields.len();
    let per_path: Vec<f64> = fields
        .iter()
        .map(|f| {
            (1..=tw.len())
                .map(|n| tw[n - 1] * lp_pow(f.at(n), q))
                .sum::<f64>()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rs: Vec<f64> = (0..resamples)
        .map(|_| {
            let total: f64 = (0..m).map(|_| per_path[rng.random_range(0..m)]).sum();
            (total / m as f64).powf(1.0 / q)
        })
        .collect();
    let mean = rs.iter().sum::<f64>() / resamples as f64;
    let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Some(var.sqrt())
}

fn finish_report(
    contrib: Vec<f64>,
    q: f64,
    penalty: &Penalty,
    spec: &CostSpec,
    mut diagnostics: Diagnostics,
    adversarial_field: Option<Vec<Field>>,
) -> Result<SensitivityReport> {
    let r = contrib.iter().sum::<f64>().powf(1.0 / q);
    let upsilon = penalty.conjugate(r);
    let u_star = penalty.optimal_u(r)?;
    if let crate::penalty::GrowthCheck::Warn(msg) = penalty.validate_growth(spec.p()) {
        diagnostics.growth_warning = Some(msg);
    }
    Ok(SensitivityReport {
        upsilon,
        r_norm: r,
        u_star,
        per_time_contribution: contrib,
        adversarial_field,
        diagnostics,
    })
}

/// Unconstrained first-order sensitivity `Upsilon = L*(||oD f||_{L^q})`.
///
/// Accepts unscaled and hyperbolically scaled costs (the latter weights the
/// per-time terms by the grid spacing); parabolic scaling has no
/// unconstrained reading and is rejected.
pub fn upsilon(
    model: DiscreteModel,
    f: &dyn Payoff,
    spec: &CostSpec,
    penalty: &Penalty,
    opts: &SensOptions,
) -> Result<SensitivityReport> {
    if spec.scaling() == Scaling::Parabolic {
        return Err(CdroError::UnsupportedBackend(
            "unconstrained sensitivity: use discrete or hyperbolic cost scaling".into(),
        ));
    }
    let data = load_model(model)?;
    let ens = match model {
        DiscreteModel::Ensemble(e) => Some(e),
        _ => None,
    };
    let q = spec.q();
    let n_steps = data.paths[0].n_steps();
    let tw = time_weights(spec, n_steps, data.time_grid.as_deref());
    let fields = derivative_fields(&data.paths, f, opts.gradient)?;
    let optional = optional_of(&data, ens, &fields, opts)?;
    let contrib = contributions(&optional, &data.weights, &tw, q);
    let mut diagnostics = Diagnostics {
        backend: data.backend_label.to_string(),
        atom_mass: kink_mass(&data.paths, &data.weights, f),
        ..Diagnostics::default()
    };
    if ens.is_some() {
        diagnostics.bootstrap_se_r = bootstrap_se_r(
            &optional,
            &tw,
            q,
            opts.bootstrap_resamples,
            opts.bootstrap_seed,
        );
    }
    let adv = opts
        .attach_adversarial
        .then(|| optional.iter().map(|e| map_field(e, q)).collect());
    finish_report(contrib, q, penalty, spec, diagnostics, adv)
}

/// Martingale-constrained sensitivity
/// `Upsilon_Mart = L*(inf_h ||oD f - h||_{L^q})` over predictable `h`.
///
/// `p = 2` uses the predictable projection; general `p` solves the nodewise
/// `L^q` problem and is exact-lattice only. Models must pass the martingale
/// audit. Hyperbolic scaling is rejected: martingale laws at finite
/// Sobolev-type transport cost coincide, so the constrained problem
/// degenerates under that regime.
pub fn upsilon_mart(
    model: DiscreteModel,
    f: &dyn Payoff,
    spec: &CostSpec,
    penalty: &Penalty,
    opts: &SensOptions,
) -> Result<SensitivityReport> {
    if spec.scaling() == Scaling::Hyperbolic {
        return Err(CdroError::UnsupportedBackend(
            "martingale-constrained sensitivity is degenerate under hyperbolic scaling".into(),
        ));
    }
    let p_is_two = (spec.p() - 2.0).abs() < 1e-12;
    let data = load_model(model)?;
    let ens = match model {
        DiscreteModel::Ensemble(e) => Some(e),
        _ => None,
    };
    let mut diagnostics = Diagnostics {
        backend: data.backend_label.to_string(),
        ..Diagnostics::default()
    };
    match model {
        DiscreteModel::Lattice(l) => {
            let chk = l.check_martingale(MARTINGALE_TOL);
            if !chk.ok {
                return Err(CdroError::NotMartingale {
                    violation: chk.worst_violation,
                    tol: MARTINGALE_TOL,
                });
            }
        }
        DiscreteModel::Ensemble(_) => {
            if !p_is_two {
                return Err(CdroError::UnsupportedBackend(
                    "general-p martingale sensitivity needs the exact lattice backend".into(),
                ));
            }
            diagnostics
                .notes
                .push("martingale property of the sampler assumed, not audited".into());
        }
    }
    let q = spec.q();
    let n_steps = data.paths[0].n_steps();
    let tw = time_weights(spec, n_steps, data.time_grid.as_deref());
    let fields = derivative_fields(&data.paths, f, opts.gradient)?;
    let optional = optional_of(&data, ens, &fields, opts)?;
    let centered: Vec<Field> = if p_is_two {
        let predictable = match (&data.enumerated, ens) {
            (Some(e), _) => exact_projection(e, &optional, ProjectionKind::Predictable)?,
            (None, Some(ens)) => regression_projection(
                ens,
                &fields,
                ProjectionKind::Predictable,
                &opts.basis,
                &opts.regression,
            )?,
            _ => unreachable!(),
        };
        optional
            .iter()
            .zip(&predictable)
            .map(|(o, h)| o.sub(h))
            .collect::<Result<_>>()?
    } else {
        let e = data.enumerated.as_ref().expect("lattice-only path");
        let (hstar, _) = lq_predictable_projection(e, &optional, q)?;
        optional
            .iter()
            .zip(&hstar)
            .map(|(o, h)| o.sub(h))
            .collect::<Result<_>>()?
    };
    let contrib = contributions(&centered, &data.weights, &tw, q);
    diagnostics.atom_mass = kink_mass(&data.paths, &data.weights, f);
    if ens.is_some() {
        diagnostics.bootstrap_se_r = bootstrap_se_r(
            &centered,
            &tw,
            q,
            opts.bootstrap_resamples,
            opts.bootstrap_seed,
        );
    }
    let adv = opts
        .attach_adversarial
        .then(|| centered.iter().map(|e| map_field(e, q)).collect());
    finish_report(contrib, q, penalty, spec, diagnostics, adv)
}

fn map_field(e: &Field, q: f64) -> Field {
    Field::from_fn(e.n_steps(), e.dim(), |n| v_map(e.at(n), q))
}

/// Builds the first-order optimal adversarial model at penalty strength
/// `delta`; `constrained` keeps the pushforward a martingale by centering
/// the direction with the predictable `L^q` projection.
pub fn adversarial_map(
    model: DiscreteModel,
    f: &dyn Payoff,
    spec: &CostSpec,
    penalty: &Penalty,
    delta: f64,
    constrained: bool,
    opts: &SensOptions,
) -> Result<AdversarialOutput> {
    if !(delta > 0.0) {
        return Err(CdroError::InvalidParameter("delta must be positive".into()));
    }
    let p_is_two = (spec.p() - 2.0).abs() < 1e-12;
    let data = load_model(model)?;
    let ens = match model {
        DiscreteModel::Ensemble(e) => Some(e),
        _ => None,
    };
    let q = spec.q();
    let p = spec.p();
    let n_steps = data.paths[0].n_steps();
    let fields = derivative_fields(&data.paths, f, opts.gradient)?;
    let optional = optional_of(&data, ens, &fields, opts)?;
    let direction: Vec<Field> = if constrained {
        if p_is_two {
            let predictable = match (&data.enumerated, ens) {
                (Some(e), _) => exact_projection(e, &optional, ProjectionKind::Predictable)?,
                (None, Some(ens)) => regression_projection(
                    ens,
                    &fields,
                    ProjectionKind::Predictable,
                    &opts.basis,
                    &opts.regression,
                )?,
                _ => unreachable!(),
            };
            optional
                .iter()
                .zip(&predictable)
                .map(|(o, h)| o.sub(h))
                .collect::<Result<_>>()?
        } else {
            let e = data.enumerated.as_ref().ok_or_else(|| {
                CdroError::UnsupportedBackend(
                    "constrained adversarial map with p != 2 needs a lattice".into(),
                )
            })?;
            let (hstar, _) = lq_predictable_projection(e, &optional, q)?;
            optional
                .iter()
                .zip(&hstar)
                .map(|(o, h)| o.sub(h))
                .collect::<Result<_>>()?
        }
    } else {
        optional
    };

    // Unweighted q-norm power of the direction field; the scaled-cost norm
    // only differs by the scale factor, folded into `scale_c` below.
    let raw_q: f64 = direction
        .iter()
        .zip(&data.weights)
        .map(|(e, &w)| {
            (1..=n_steps)
                .map(|n| w * lp_pow(e.at(n), q))
                .sum::<f64>()
        })
        .sum();
    let s = spec.scale_factor(n_steps);
    let r = s.powf(-1.0 / p) * raw_q.powf(1.0 / q);
    let u = penalty.optimal_u(r)?;
    if r == 0.0 {
        return Ok(AdversarialOutput {
            perturbed: data.paths.clone(),
            base: data.paths,
            weights: data.weights,
            realized_cost: 0.0,
            realized_gain: 0.0,
            u,
            delta,
            r_norm: 0.0,
            perturbed_lattice: match model {
                DiscreteModel::Lattice(l) => Some(l.clone()),
                _ => None,
            },
        });
    }
    let scale_c = u * delta / (s * raw_q).powf(1.0 / p);
    let mut perturbed = Vec::with_capacity(data.paths.len());
    let mut realized_cost = 0.0;
    let mut realized_gain = 0.0;
    for ((x, e), &w) in data.paths.iter().zip(&direction).zip(&data.weights) {
        let mut y = x.clone();
        let mut acc = vec![0.0; x.dim()];
        for n in 1..=n_steps {
            let phi = v_map(e.at(n), q);
            for c in 0..x.dim() {
                acc[c] += scale_c * phi[c];
                y.point_mut(n)[c] += acc[c];
            }
        }
        realized_cost += w * cost_cn(x, &y, spec)?;
        realized_gain += w * (f.evaluate(&y) - f.evaluate(x));
        perturbed.push(y);
    }
    let perturbed_lattice = match model {
        DiscreteModel::Lattice(l) => {
            let e = data.enumerated.as_ref().expect("lattice enumeration");
            Some(perturbed_tree(l, e, &perturbed)?)
        }
        _ => None,
    };
    Ok(AdversarialOutput {
        base: data.paths,
        perturbed,
        weights: data.weights,
        realized_cost,
        realized_gain,
        u,
        delta,
        r_norm: r,
        perturbed_lattice,
    })
}

/// Reattaches perturbed path states to the tree nodes: the map is adapted,
/// so every path through a node agrees on the node's new state.
fn perturbed_tree(
    base: &LatticeModel,
    e: &EnumeratedPaths,
    perturbed: &[DiscretePath],
) -> Result<LatticeModel> {
    let mut states: Vec<Option<Vec<f64>>> = vec![None; base.n_nodes()];
    for (trail, path) in e.nodes.iter().zip(perturbed) {
        for (k, &node) in trail.iter().enumerate() {
            let s = path.point(k);
            match &states[node] {
                None => states[node] = Some(s.to_vec()),
                Some(prev) => {
                    debug_assert!(
                        prev.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-9),
                        "perturbation not adapted"
                    );
                }
            }
        }
    }
    base.with_states(|i| states[i].clone().expect("all nodes visited"))
}
