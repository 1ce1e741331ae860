use crate::field::Field;
use serde::Serialize;

/// Side information attached to a sensitivity computation.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    /// `exact-lattice` or `monte-carlo`.
    pub backend: String,
    /// Growth-condition audit of the penalty against the cost exponent.
    pub growth_warning: Option<String>,
    /// Bootstrap standard error of `r_norm` (Monte Carlo backends).
    pub bootstrap_se_r: Option<f64>,
    /// Probability mass sitting exactly on the payoff's kink, if any.
    pub atom_mass: Option<f64>,
    /// |r(fine grid) - r(coarse grid)| from the grid-refinement diagnostic.
    pub grid_refinement_delta: Option<f64>,
    pub notes: Vec<String>,
}

/// First-order sensitivity of the penalized worst-case value.
///
/// `upsilon = L*(r_norm)` always, with `r_norm^q = sum(per_time_contribution)`;
/// both identities are recomputable from the fields here.
#[derive(Clone, Debug, Serialize)]
pub struct SensitivityReport {
    pub upsilon: f64,
    /// The norm fed to the conjugate penalty.
    pub r_norm: f64,
    /// Budget multiplier `u` attaining `u r - L(u) = L*(r)`.
    pub u_star: f64,
    /// Per-time-index terms whose sum is `r_norm^q` (q-th power).
    pub per_time_contribution: Vec<f64>,
    /// Unnormalized adversarial direction per path (the extremal map of the
    /// projected derivative field); the applied perturbation increments are
    /// this field times `u delta / r^{q/p}`.
    #[serde(skip)]
    pub adversarial_field: Option<Vec<Field>>,
    pub diagnostics: Diagnostics,
}

impl SensitivityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
