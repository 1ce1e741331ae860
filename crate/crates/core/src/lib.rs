//! Sensitivity of causal (adapted) Wasserstein DRO values to model uncertainty.
//!
//! The crate computes the first-order coefficient `Upsilon` of the penalized
//! worst-case value
//!
//! ```text
//! V(delta) = sup_nu { E_nu[f(X)] - L_delta(d_c(mu, nu)^{1/p}) } = V(0) + Upsilon * delta + o(delta)
//! ```
//!
//! where `d_c` is the causal transport cost on path space built from
//! increment costs `sum_n |dx_n - dy_n|_p^p`, and `L_delta(x) = delta * L(x / delta)`
//! rescales a penalty `L`. The unconstrained coefficient is
//! `L*(||oD f||_{L^q})`, the conjugate penalty applied to the `L^q` norm of the
//! optionally projected pathwise derivative of the objective; under a
//! martingale constraint the norm is taken of the distance between the
//! optional projection and its best predictable approximation.
//!
//! Three estimator families are provided:
//!
//! * exact enumeration on finite non-recombining trees ([`lattice`]),
//! * least-squares Monte Carlo on simulated path ensembles ([`ensemble`],
//!   [`projection`]),
//! * continuous-time limits on time grids: drift-type sensitivities under
//!   hyperbolic cost scaling and volatility-type martingale sensitivities
//!   under parabolic scaling ([`sens_continuous`]).
//!
//! Every first-order formula is backed by a brute-force verification
//! [`oracle`] that maximizes the penalized objective over adapted Monge
//! perturbations of small trees and checks the fitted slope of `V(delta)`.

pub mod cost;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod lattice;
pub mod malliavin;
pub mod oracle;
pub mod path;
pub mod payoffs;
pub mod penalty;
pub mod projection;
pub mod report;
pub mod sens_continuous;
pub mod sens_discrete;
pub mod testkit;

pub use cost::{cost_cn, CostSpec, Scaling};
pub use ensemble::SampleEnsemble;
pub use error::{CdroError, Result};
pub use field::Field;
pub use lattice::{EnumeratedPaths, LatticeModel, LatticeNode, MartingaleCheck};
pub use malliavin::{bump_derivative, discrete_malliavin, grid_malliavin_ct, GradientBackend, Payoff};
pub use path::DiscretePath;
pub use penalty::{GrowthCheck, Penalty};
pub use projection::{lq_predictable_projection, BasisSpec, ProjectionKind};
pub use report::{Diagnostics, SensitivityReport};
pub use sens_continuous::{
    closed_form_reference, phi_parabolic, upsilon_hyperbolic, upsilon_mart_parabolic,
    ReferenceCase, SigmaSpec, UtilitySpec,
};
pub use sens_discrete::{adversarial_map, upsilon, upsilon_mart, v_map, AdversarialOutput, DiscreteModel, SensOptions};
