use crate::ensemble::SampleEnsemble;
use crate::error::{CdroError, Result};
use crate::field::Field;
use crate::lattice::EnumeratedPaths;
use nalgebra::{Cholesky, DMatrix, DVector};

/// Conditioning convention: `Optional` projects on the time-`n` history,
/// `Predictable` on the time-`n-1` history.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionKind {
    Optional,
    Predictable,
}

/// History statistics usable as regression variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisVar {
    /// Current state `x_k`.
    State,
    /// Running mean of `x_0..x_k`.
    RunningMean,
    /// Last increment `x_k - x_{k-1}`.
    Increment,
}

/// Polynomial regression basis: all monomials of total degree `<= degree`
/// in the selected history variables.
#[derive(Clone, Debug)]
pub struct BasisSpec {
    pub degree: usize,
    pub vars: Vec<BasisVar>,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            degree: 3,
            vars: vec![BasisVar::State, BasisVar::RunningMean],
        }
    }
}

impl BasisSpec {
    /// Parses strings like `poly:3:state,runmean` or `poly:2:state,increment`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 || parts[0] != "poly" {
            return Err(CdroError::Config(format!(
                "basis spec must look like poly:3:state,runmean, got {spec:?}"
            )));
        }
        let degree: usize = parts[1]
            .parse()
            .map_err(|_| CdroError::Config(format!("bad basis degree {:?}", parts[1])))?;
        if degree == 0 || degree > 8 {
            return Err(CdroError::Config("basis degree out of range 1..=8".into()));
        }
        let mut vars = Vec::new();
        for v in parts[2].split(',') {
            vars.push(match v {
                "state" => BasisVar::State,
                "runmean" => BasisVar::RunningMean,
                "increment" => BasisVar::Increment,
                _ => return Err(CdroError::Config(format!("unknown basis variable {v:?}"))),
            });
        }
        if vars.is_empty() {
            return Err(CdroError::Config("basis needs at least one variable".into()));
        }
        Ok(Self { degree, vars })
    }

    pub fn describe(&self) -> String {
        let names: Vec<&str> = self
            .vars
            .iter()
            .map(|v| match v {
                BasisVar::State => "state",
                BasisVar::RunningMean => "runmean",
                BasisVar::Increment => "increment",
            })
            .collect();
        format!("poly:{}:{}", self.degree, names.join(","))
    }

    fn raw_vars(&self, path: &crate::path::DiscretePath, k: usize) -> Vec<f64> {
        let d = path.dim();
        let mut out = Vec::with_capacity(self.vars.len() * d);
        for v in &self.vars {
            match v {
                BasisVar::State => out.extend_from_slice(path.point(k)),
                BasisVar::RunningMean => {
                    let mut mean = vec![0.0; d];
                    for j in 0..=k {
                        for c in 0..d {
                            mean[c] += path.point(j)[c];
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= (k + 1) as f64);
                    out.extend_from_slice(&mean);
                }
                BasisVar::Increment => {
                    if k == 0 {
                        out.extend(std::iter::repeat(0.0).take(d));
                    } else {
                        for c in 0..d {
                            out.push(path.point(k)[c] - path.point(k - 1)[c]);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn feature_count(&self, dim: usize) -> usize {
        monomials(self.vars.len() * dim, self.degree).len()
    }
}

/// Exponent multi-indices of total degree `<= degree` over `n_vars`
/// variables, graded-lexicographic, intercept first.
fn monomials(n_vars: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut all = vec![vec![0; n_vars]];
    for _ in 0..degree {
        let mut next = Vec::new();
        let start = all.len() - count_of_degree(&all);
        for m in &all[start..] {
            // extend only at or after the last nonzero slot to avoid duplicates
            let first = m
                .iter()
                .rposition(|&e| e > 0)
                .unwrap_or(0);
            for v in first..n_vars {
                let mut grown = m.clone();
                grown[v] += 1;
                next.push(grown);
            }
        }
        all.extend(next);
    }
    all
}

fn count_of_degree(all: &[Vec<usize>]) -> usize {
    let top: usize = all.last().map(|m| m.iter().sum()).unwrap_or(0);
    all.iter()
        .rev()
        .take_while(|m| m.iter().sum::<usize>() == top)
        .count()
}

/// Dense per-time design matrix of basis features.
pub struct DesignMatrix {
    data: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Evaluates the basis features of every path's history at grid index `k`.
pub fn build_design(ens: &SampleEnsemble, k: usize, basis: &BasisSpec) -> DesignMatrix {
    let monos = monomials(basis.vars.len() * ens.dim(), basis.degree);
    let n_cols = monos.len();
    let mut data = Vec::with_capacity(ens.len() * n_cols);
    for path in &ens.paths {
        let raw = basis.raw_vars(path, k);
        for m in &monos {
            let mut v = 1.0;
            for (e, x) in m.iter().zip(&raw) {
                for _ in 0..*e {
                    v *= x;
                }
            }
            data.push(v);
        }
    }
    DesignMatrix {
        data,
        n_rows: ens.len(),
        n_cols,
    }
}

/// Ridge-damped least-squares fit of `y` against the design, restricted to
/// `subset` rows when given. Returns the coefficient vector.
pub fn fit_coefficients(
    design: &DesignMatrix,
    y: &[f64],
    subset: Option<&[usize]>,
    ridge: f64,
) -> Result<Vec<f64>> {
    let b = design.n_cols;
    let mut ata = DMatrix::<f64>::zeros(b, b);
    let mut aty = DVector::<f64>::zeros(b);
    let mut fold = |i: usize| {
        let row = design.row(i);
        for r in 0..b {
            aty[r] += row[r] * y[i];
            for c in r..b {
                ata[(r, c)] += row[r] * row[c];
            }
        }
    };
    match subset {
        Some(idx) => idx.iter().for_each(|&i| fold(i)),
        None => (0..design.n_rows).for_each(&mut fold),
    }
    // damping is relative to the Gram matrix's own scale, so exactly
    // collinear features (constant states on a walk) stay solvable
    let diag_scale = (0..b).map(|r| ata[(r, r)]).fold(0.0_f64, f64::max).max(1.0);
    for r in 0..b {
        for c in 0..r {
            ata[(r, c)] = ata[(c, r)];
        }
        ata[(r, r)] += ridge * diag_scale;
    }
    let chol = Cholesky::new(ata).ok_or_else(|| {
        CdroError::ProjectionFailure("design matrix rank-deficient after ridge damping".into())
    })?;
    Ok(chol.solve(&aty).iter().copied().collect())
}

pub fn predict(design: &DesignMatrix, coeffs: &[f64]) -> Vec<f64> {
    (0..design.n_rows)
        .map(|i| {
            design
                .row(i)
                .iter()
                .zip(coeffs)
                .map(|(a, c)| a * c)
                .sum()
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct RegressionOptions {
    pub ridge: f64,
    /// Fit coefficients on the first half of the paths only; fitted values
    /// are still produced for every path. Diagnostic against in-sample bias.
    pub out_of_sample: bool,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-8,
            out_of_sample: false,
        }
    }
}

/// Least-squares Monte Carlo estimate of the optional or predictable
/// projection of a per-path field, one regression per time index and
/// component, fitted in-sample on history features.
pub fn regression_projection(
    ens: &SampleEnsemble,
    fields: &[Field],
    kind: ProjectionKind,
    basis: &BasisSpec,
    opts: &RegressionOptions,
) -> Result<Vec<Field>> {
    if fields.len() != ens.len() {
        return Err(CdroError::ShapeMismatch(
            "one field per ensemble path required".into(),
        ));
    }
    let (n_steps, dim) = (ens.n_steps(), ens.dim());
    let n_features = basis.feature_count(dim);
    if ens.len() < 10 * n_features {
        return Err(CdroError::ProjectionFailure(format!(
            "need at least 10x more paths than basis functions: {} paths, {} features",
            ens.len(),
            n_features
        )));
    }
    let subset: Option<Vec<usize>> = opts
        .out_of_sample
        .then(|| (0..ens.len() / 2).collect());
    let mut out = vec![Field::zero(n_steps, dim); ens.len()];
    let mut y = vec![0.0; ens.len()];
    for n in 1..=n_steps {
        let cond = match kind {
            ProjectionKind::Optional => n,
            ProjectionKind::Predictable => n - 1,
        };
        let design = build_design(ens, cond, basis);
        for c in 0..dim {
            for (i, f) in fields.iter().enumerate() {
                y[i] = f.at(n)[c];
            }
            let coeffs = fit_coefficients(&design, &y, subset.as_deref(), opts.ridge)?;
            let fitted = predict(&design, &coeffs);
            for (i, v) in fitted.into_iter().enumerate() {
                out[i].at_mut(n)[c] = v;
            }
        }
    }
    Ok(out)
}

/// Exact optional/predictable projection on an enumerated tree: at each
/// history node, the probability-weighted average of the field over the
/// scenarios through that node, written back to those scenarios.
pub fn exact_projection(
    e: &EnumeratedPaths,
    fields: &[Field],
    kind: ProjectionKind,
) -> Result<Vec<Field>> {
    if fields.len() != e.len() {
        return Err(CdroError::ShapeMismatch(
            "one field per enumerated path required".into(),
        ));
    }
    let (n_steps, dim) = (e.n_steps, e.dim);
    let mut out = vec![Field::zero(n_steps, dim); e.len()];
    for n in 1..=n_steps {
        let cond = match kind {
            ProjectionKind::Optional => n,
            ProjectionKind::Predictable => n - 1,
        };
        for (_, members) in e.groups_at(cond) {
            let total: f64 = members.iter().map(|&i| e.probs[i]).sum();
            for c in 0..dim {
                let avg: f64 = members
                    .iter()
                    .map(|&i| e.probs[i] * fields[i].at(n)[c])
                    .sum::<f64>()
                    / total;
                for &i in &members {
                    out[i].at_mut(n)[c] = avg;
                }
            }
        }
    }
    Ok(out)
}

/// The predictable field `h*` minimizing `sum_n E |Z_n - h_n|_q^q` over
/// predictable fields, solved exactly nodewise on a tree, plus the attained
/// norm `(sum_n E |Z_n - h*_n|_q^q)^{1/q}`.
///
/// The `l_q`-power objective separates across components, so each node
/// reduces to one-dimensional convex problems solved by safeguarded Newton
/// with a bisection fallback. At `q = 2` the minimizer is the weighted mean,
/// i.e. the predictable projection.
pub fn lq_predictable_projection(
    e: &EnumeratedPaths,
    fields: &[Field],
    q: f64,
) -> Result<(Vec<Field>, f64)> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(CdroError::InvalidParameter(format!(
            "lq projection needs finite q > 1, got {q}"
        )));
    }
    if fields.len() != e.len() {
        return Err(CdroError::ShapeMismatch(
            "one field per enumerated path required".into(),
        ));
    }
    let (n_steps, dim) = (e.n_steps, e.dim);
    let mut out = vec![Field::zero(n_steps, dim); e.len()];
    let mut residual_pow = 0.0;
    for n in 1..=n_steps {
        for (node, members) in e.groups_at(n - 1) {
            for c in 0..dim {
                let zs: Vec<f64> = members.iter().map(|&i| fields[i].at(n)[c]).collect();
                let ws: Vec<f64> = members.iter().map(|&i| e.probs[i]).collect();
                let h = scalar_lq_minimizer(&zs, &ws, q).map_err(|err| {
                    CdroError::ProjectionFailure(format!(
                        "node {node}, time {n}, component {c}: {err}"
                    ))
                })?;
                for (&i, &z) in members.iter().zip(&zs) {
                    out[i].at_mut(n)[c] = h;
                    residual_pow += e.probs[i] * (z - h).abs().powf(q);
                }
            }
        }
    }
    Ok((out, residual_pow.powf(1.0 / q)))
}

/// Minimizes `h -> sum_i w_i |z_i - h|^q` for `q > 1`.
///
/// The derivative is continuous and nondecreasing in `h`, so a Newton
/// iteration clipped into a shrinking sign-change bracket cannot escape or
/// stall; convergence is declared when the gradient falls below 1e-10 on
/// the problem's own scale.
fn scalar_lq_minimizer(zs: &[f64], ws: &[f64], q: f64) -> std::result::Result<f64, String> {
    let wsum: f64 = ws.iter().sum();
    if q == 2.0 {
        return Ok(zs.iter().zip(ws).map(|(z, w)| z * w).sum::<f64>() / wsum);
    }
    let (mut lo, mut hi) = zs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| {
            (a.min(z), b.max(z))
        });
    if hi - lo < 1e-300 {
        return Ok(lo);
    }
    let grad = |h: f64| -> f64 {
        zs.iter()
            .zip(ws)
            .map(|(&z, &w)| {
                let d = h - z;
                w * q * d.signum() * d.abs().powf(q - 1.0)
            })
            .sum()
    };
    let hess = |h: f64| -> f64 {
        zs.iter()
            .zip(ws)
            .map(|(&z, &w)| {
                let d = (h - z).abs();
                w * q * (q - 1.0) * d.powf(q - 2.0)
            })
            .sum()
    };
    let scale = wsum * q * (hi - lo).powf(q - 1.0);
    let tol = 1e-10 * scale.max(1e-30);
    let mut h = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = grad(h);
        if g.abs() <= tol {
            return Ok(h);
        }
        if g > 0.0 {
            hi = h;
        } else {
            lo = h;
        }
        let hs = hess(h);
        let newton = h - g / hs;
        h = if hs.is_finite() && hs > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + h.abs()) {
            return Ok(h);
        }
    }
    Err(format!(
        "no convergence in 200 iterations (q = {q}, bracket [{lo}, {hi}])"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeModel;
    use crate::malliavin::{discrete_malliavin, GradientBackend};
    use crate::payoffs::AsianCall;
    use approx::assert_relative_eq;

    fn terminal_field(e: &EnumeratedPaths) -> Vec<Field> {
        e.paths
            .iter()
            .map(|p| Field::from_fn(p.n_steps(), 1, |_| vec![p.terminal()[0]]))
            .collect()
    }

    #[test]
    fn optional_projection_of_terminal_value_is_current_state() {
        let m = LatticeModel::symmetric_walk(5, 1.0).unwrap();
        let e = m.enumerate().unwrap();
        let z = terminal_field(&e);
        let o = exact_projection(&e, &z, ProjectionKind::Optional).unwrap();
        for (i, p) in e.paths.iter().enumerate() {
            for n in 1..=5 {
                assert_relative_eq!(o[i].at(n)[0], p.point(n)[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projections_are_idempotent_and_towered() {
        let m = LatticeModel::binary_walk(4, 1.0, -0.8, 0.45).unwrap();
        let e = m.enumerate().unwrap();
        let z = terminal_field(&e);
        for kind in [ProjectionKind::Optional, ProjectionKind::Predictable] {
            let once = exact_projection(&e, &z, kind).unwrap();
            let twice = exact_projection(&e, &once, kind).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                for n in 1..=4 {
                    assert_relative_eq!(a.at(n)[0], b.at(n)[0], epsilon = 1e-12);
                }
            }
            for n in 1..=4 {
                let mean_raw: f64 = e.probs.iter().zip(&z).map(|(w, f)| w * f.at(n)[0]).sum();
                let mean_proj: f64 = e.probs.iter().zip(&once).map(|(w, f)| w * f.at(n)[0]).sum();
                assert_relative_eq!(mean_raw, mean_proj, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn deterministic_chain_leaves_fields_unchanged() {
        // one child per node: both projections are the identity
        use crate::lattice::{LatticeModel, LatticeNode};
        let nodes = vec![
            LatticeNode { time: 0, state: vec![0.0], children: vec![(1, 1.0)] },
            LatticeNode { time: 1, state: vec![0.7], children: vec![(2, 1.0)] },
            LatticeNode { time: 2, state: vec![-0.1], children: vec![] },
        ];
        let m = LatticeModel::new(nodes, false).unwrap();
        let e = m.enumerate().unwrap();
        let z = vec![Field::from_flat(vec![3.0, -1.5], 2, 1).unwrap()];
        for kind in [ProjectionKind::Optional, ProjectionKind::Predictable] {
            let out = exact_projection(&e, &z, kind).unwrap();
            assert_eq!(out[0], z[0]);
        }
    }

    #[test]
    fn martingale_increments_have_zero_predictable_projection() {
        let m = LatticeModel::symmetric_walk(4, 0.7).unwrap();
        let e = m.enumerate().unwrap();
        let incr: Vec<Field> = e
            .paths
            .iter()
            .map(|p| {
                let dx = p.increments();
                Field::from_fn(4, 1, |n| vec![dx.point(n)[0]])
            })
            .collect();
        let pred = exact_projection(&e, &incr, ProjectionKind::Predictable).unwrap();
        for f in &pred {
            assert!(f.max_abs() < 1e-12);
        }
    }

    #[test]
    fn asian_small_walk_subtree_average_by_hand() {
        // N = 2 symmetric unit walk, K = 0: four equiprobable paths.
        let m = LatticeModel::symmetric_walk(2, 1.0).unwrap();
        let e = m.enumerate().unwrap();
        let f = AsianCall::new(0.0);
        let fields: Vec<Field> = e
            .paths
            .iter()
            .map(|p| discrete_malliavin(&f, p, GradientBackend::Analytic).unwrap())
            .collect();
        let o = exact_projection(&e, &fields, ProjectionKind::Optional).unwrap();
        // D_1 f = (2/3) 1_{mean >= 0}; conditioning on F_1: the up-node sees
        // paths (0,1,2) and (0,1,0) (means 1 and 1/3, both >= 0) -> 2/3;
        // the down-node sees means -1 and -1/3 -> 0.
        for (i, p) in e.paths.iter().enumerate() {
            let expect = if p.point(1)[0] > 0.0 { 2.0 / 3.0 } else { 0.0 };
            assert_relative_eq!(o[i].at(1)[0], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn lq_matches_predictable_projection_at_q2() {
        let m = LatticeModel::binary_walk(3, 1.0, -0.6, 0.35).unwrap();
        let e = m.enumerate().unwrap();
        let z = terminal_field(&e);
        let pred = exact_projection(&e, &z, ProjectionKind::Predictable).unwrap();
        let (h, _) = lq_predictable_projection(&e, &z, 2.0).unwrap();
        for (a, b) in pred.iter().zip(&h) {
            for n in 1..=3 {
                assert!((a.at(n)[0] - b.at(n)[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lq_symmetric_two_point_minimizer_is_zero() {
        let zs = [-1.0, 1.0];
        let ws = [0.5, 0.5];
        let h = scalar_lq_minimizer(&zs, &ws, 4.0).unwrap();
        assert!(h.abs() < 1e-10);
    }

    #[test]
    fn lq_multidimensional_euler_lagrange() {
        use crate::testkit::{random_fields, random_martingale_lattice};
        let m = random_martingale_lattice(8, 3, 2).unwrap();
        let e = m.enumerate().unwrap();
        let z = random_fields(80, e.len(), 3, 2);
        for q in [1.5, 3.0] {
            let (h, _) = lq_predictable_projection(&e, &z, q).unwrap();
            for n in 1..=3 {
                for (_, members) in e.groups_at(n - 1) {
                    let mass: f64 = members.iter().map(|&i| e.probs[i]).sum();
                    for c in 0..2 {
                        let resid: f64 = members
                            .iter()
                            .map(|&i| {
                                let d = z[i].at(n)[c] - h[i].at(n)[c];
                                e.probs[i] * d.signum() * d.abs().powf(q - 1.0)
                            })
                            .sum::<f64>()
                            / mass;
                        assert!(resid.abs() < 1e-8, "EL residual {resid} (q={q})");
                    }
                }
            }
        }
    }

    #[test]
    fn lq_constant_children_give_zero_residual() {
        let m = LatticeModel::symmetric_walk(2, 1.0).unwrap();
        let e = m.enumerate().unwrap();
        let z: Vec<Field> = (0..e.len()).map(|_| Field::from_fn(2, 1, |_| vec![3.25])).collect();
        let (h, res) = lq_predictable_projection(&e, &z, 3.0).unwrap();
        assert!(res < 1e-12);
        for f in &h {
            for n in 1..=2 {
                assert_relative_eq!(f.at(n)[0], 3.25, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn regression_recovers_constant_field() {
        let ens = SampleEnsemble::brownian(1.0, 4, 1, 512, 3).unwrap();
        let fields: Vec<Field> = (0..ens.len())
            .map(|_| Field::from_fn(4, 1, |_| vec![1.7]))
            .collect();
        let proj = regression_projection(
            &ens,
            &fields,
            ProjectionKind::Optional,
            &BasisSpec::default(),
            &RegressionOptions::default(),
        )
        .unwrap();
        for f in &proj {
            for n in 1..=4 {
                assert_relative_eq!(f.at(n)[0], 1.7, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn regression_projection_of_terminal_value_tracks_state() {
        let m = 20_000;
        let ens = SampleEnsemble::brownian(1.0, 4, 1, m, 5).unwrap();
        let fields: Vec<Field> = ens
            .paths
            .iter()
            .map(|p| Field::from_fn(4, 1, |_| vec![p.terminal()[0]]))
            .collect();
        let proj = regression_projection(
            &ens,
            &fields,
            ProjectionKind::Optional,
            &BasisSpec::default(),
            &RegressionOptions::default(),
        )
        .unwrap();
        // E[X_T | F_t] = X_t; L2 error of the fit is O(sqrt(B/M))
        let mut err2 = 0.0;
        for (f, p) in proj.iter().zip(&ens.paths) {
            for n in 1..=4 {
                err2 += (f.at(n)[0] - p.point(n)[0]).powi(2);
            }
        }
        err2 /= m as f64;
        assert!(err2.sqrt() < 0.05, "l2 gap {}", err2.sqrt());
    }

    #[test]
    fn regression_error_shrinks_with_more_paths() {
        let gap_at = |m: usize| -> f64 {
            let ens = SampleEnsemble::brownian(1.0, 4, 1, m, 5).unwrap();
            let fields: Vec<Field> = ens
                .paths
                .iter()
                .map(|p| Field::from_fn(4, 1, |_| vec![p.terminal()[0]]))
                .collect();
            let proj = regression_projection(
                &ens,
                &fields,
                ProjectionKind::Optional,
                &BasisSpec::default(),
                &RegressionOptions::default(),
            )
            .unwrap();
            let mut err2 = 0.0;
            for (f, p) in proj.iter().zip(&ens.paths) {
                for n in 1..=4 {
                    err2 += (f.at(n)[0] - p.point(n)[0]).powi(2);
                }
            }
            (err2 / m as f64).sqrt()
        };
        let coarse = gap_at(2_000);
        let fine = gap_at(50_000);
        println!("regression L2 gap: M=2000 -> {coarse:.5}, M=50000 -> {fine:.5}");
        assert!(fine < coarse, "error must shrink with M");
        // O(1/sqrt(M)) scaling, with slack for randomness
        assert!(fine < coarse * 0.5);
    }

    #[test]
    fn out_of_sample_split_is_close_to_in_sample() {
        let ens = SampleEnsemble::brownian(1.0, 3, 1, 4000, 9).unwrap();
        let fields: Vec<Field> = ens
            .paths
            .iter()
            .map(|p| Field::from_fn(3, 1, |_| vec![p.terminal()[0]]))
            .collect();
        let in_sample = regression_projection(
            &ens,
            &fields,
            ProjectionKind::Optional,
            &BasisSpec::default(),
            &RegressionOptions::default(),
        )
        .unwrap();
        let oos = regression_projection(
            &ens,
            &fields,
            ProjectionKind::Optional,
            &BasisSpec::default(),
            &RegressionOptions {
                out_of_sample: true,
                ..RegressionOptions::default()
            },
        )
        .unwrap();
        let mut gap = 0.0;
        for (a, b) in in_sample.iter().zip(&oos) {
            for n in 1..=3 {
                gap += (a.at(n)[0] - b.at(n)[0]).powi(2);
            }
        }
        assert!((gap / 4000.0).sqrt() < 0.1);
    }

    #[test]
    fn guard_rejects_small_ensembles() {
        let ens = SampleEnsemble::brownian(1.0, 3, 1, 30, 1).unwrap();
        let fields: Vec<Field> = (0..30).map(|_| Field::zero(3, 1)).collect();
        assert!(regression_projection(
            &ens,
            &fields,
            ProjectionKind::Optional,
            &BasisSpec::default(),
            &RegressionOptions::default(),
        )
        .is_err());
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(3, 2).len(), 10);
    }
}
