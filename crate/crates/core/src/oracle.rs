//! Brute-force verification of the first-order expansion
//! `V(delta) = V(0) + Upsilon * delta + o(delta)` on small trees.
//!
//! The penalized worst-case value is maximized directly over adapted Monge
//! perturbations: one increment variable per tree node, so the candidate
//! transport map is non-anticipative by construction. The maximizer is a
//! lower bound on `V(delta)` (randomized couplings are not searched), which
//! is enough to bracket the first-order coefficient: the theory's upper
//! bound holds over all causal couplings while its optimal construction is
//! itself a Monge map.

use crate::cost::{lp_pow, CostSpec};
use crate::error::{CdroError, Result};
use crate::field::Field;
use crate::lattice::{EnumeratedPaths, LatticeModel};
use crate::malliavin::{discrete_malliavin, GradientBackend, Payoff};
use crate::penalty::Penalty;
use crate::sens_discrete::{upsilon, upsilon_mart, AdversarialOutput, DiscreteModel, SensOptions};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_NODES: usize = 1000;
const ARMIJO_C: f64 = 1e-4;
const MAX_ITERS: usize = 600;
const MAX_HALVINGS: usize = 60;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub multistarts: usize,
    pub seed: u64,
    pub gradient: GradientBackend,
    /// Extra start taken from a first-order construction's per-path
    /// increment perturbations.
    pub warm_start: Option<Vec<Field>>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            multistarts: 8,
            seed: 7,
            gradient: GradientBackend::Auto,
            warm_start: None,
        }
    }
}

/// Outcome of one penalized maximization.
#[derive(Clone, Debug)]
pub struct BruteForceResult {
    /// `sup E[f(Y)] - L_delta(cost^{1/p})` over the searched maps.
    pub value: f64,
    pub gain: f64,
    pub cost: f64,
    /// Winning start (0 = zero field) and its iteration count.
    pub start: usize,
    pub iterations: usize,
    /// Per-path increment perturbations of the argmax field.
    pub field: Vec<Field>,
}

/// Ladder fit of `V(delta) - V(0)` against `s delta + c delta^2`.
#[derive(Clone, Debug)]
pub struct SlopeReport {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub v0: f64,
    pub slope: f64,
    pub curvature: f64,
    pub upsilon: f64,
    pub rel_err: f64,
    pub pass: bool,
    pub monotone: bool,
}

/// Audit of a constructed coupling's budget: measured cost vs `u^p delta^p`.
#[derive(Clone, Copy, Debug)]
pub struct CostAudit {
    pub pass: bool,
    pub measured: f64,
    pub budget: f64,
}

struct Problem<'a> {
    e: &'a EnumeratedPaths,
    f: &'a dyn Payoff,
    spec: &'a CostSpec,
    penalty: &'a Penalty,
    delta: f64,
    constrained: bool,
    gradient: GradientBackend,
    /// variable slot per node (root and grouping handled via the tree)
    slot: Vec<usize>,
    n_vars: usize,
    dim: usize,
    n_steps: usize,
    /// total path probability through each node
    node_mass: Vec<f64>,
    /// (parent group) -> child slots and conditional probabilities
    groups: Vec<Vec<(usize, f64)>>,
    scale: f64,
    /// indicator-ball budget on the scaled cost, when the penalty is a ball
    ball_budget: Option<f64>,
}

impl<'a> Problem<'a> {
    fn new(
        model: &'a LatticeModel,
        e: &'a EnumeratedPaths,
        f: &'a dyn Payoff,
        spec: &'a CostSpec,
        penalty: &'a Penalty,
        delta: f64,
        constrained: bool,
        gradient: GradientBackend,
    ) -> Result<Self> {
        if model.n_nodes() > MAX_NODES {
            return Err(CdroError::SizeGuard {
                leaves: model.n_nodes(),
                max: MAX_NODES,
            });
        }
        let dim = model.dim();
        let mut slot = vec![usize::MAX; model.n_nodes()];
        let mut n_vars = 0;
        for (i, node) in model.nodes().iter().enumerate() {
            if node.time >= 1 {
                slot[i] = n_vars;
                n_vars += 1;
            }
        }
        let mut node_mass = vec![0.0; model.n_nodes()];
        for (trail, &w) in e.nodes.iter().zip(&e.probs) {
            for &idx in trail {
                node_mass[idx] += w;
            }
        }
        let groups = model
            .nodes()
            .iter()
            .filter(|node| !node.children.is_empty())
            .map(|node| {
                node.children
                    .iter()
                    .map(|&(c, p)| (slot[c], p))
                    .collect::<Vec<_>>()
            })
            .collect();
        let ball_budget = penalty
            .is_indicator()
            .map(|rho| (rho * delta).powf(spec.p()));
        Ok(Self {
            e,
            f,
            spec,
            penalty,
            delta,
            constrained,
            gradient,
            slot,
            n_vars,
            dim,
            n_steps: model.n_steps(),
            node_mass,
            groups,
            scale: spec.scale_factor(model.n_steps()),
            ball_budget,
        })
    }

    #[inline]
    fn var<'v>(&self, vars: &'v [f64], node: usize) -> &'v [f64] {
        let s = self.slot[node];
        &vars[s * self.dim..(s + 1) * self.dim]
    }

    /// Scaled transport cost of the perturbation field.
    fn cost(&self, vars: &[f64]) -> f64 {
        let p = self.spec.p();
        let mut total = 0.0;
        for (i, &s) in self.slot.iter().enumerate() {
            if s != usize::MAX {
                total += self.node_mass[i]
                    * lp_pow(&vars[s * self.dim..(s + 1) * self.dim], p);
            }
        }
        total * self.scale
    }

    fn perturbed_path(&self, path_idx: usize) -> impl Fn(&[f64]) -> crate::path::DiscretePath + '_ {
        let trail = &self.e.nodes[path_idx];
        let base = &self.e.paths[path_idx];
        move |vars: &[f64]| {
            let mut y = base.clone();
            let mut acc = vec![0.0; self.dim];
            for (k, &node) in trail.iter().enumerate().skip(1) {
                let psi = self.var(vars, node);
                for c in 0..self.dim {
                    acc[c] += psi[c];
                    y.point_mut(k)[c] += acc[c];
                }
            }
            y
        }
    }

    fn expected_payoff(&self, vars: &[f64]) -> f64 {
        self.e
            .probs
            .iter()
            .enumerate()
            .map(|(i, &w)| w * self.f.evaluate(&self.perturbed_path(i)(vars)))
            .sum()
    }

    /// Objective `E[f(Y)] - L_delta(cost^{1/p})`; the ball case keeps
    /// iterates feasible, so the penalty term vanishes there.
    fn objective(&self, vars: &[f64]) -> f64 {
        let gain = self.expected_payoff(vars);
        if self.ball_budget.is_some() {
            gain
        } else {
            let v = self.cost(vars).powf(1.0 / self.spec.p());
            gain - self.penalty.parametrized(self.delta, v)
        }
    }

    /// Euclidean objective gradient per variable, via the chain rule through
    /// the cumulative-sum map: the derivative of `E[f(Y)]` in the increment
    /// at (node, time n) is the pathwise derivative field at time n summed
    /// over the paths through the node.
    fn gradient(&self, vars: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n_vars * self.dim];
        for (i, &w) in self.e.probs.iter().enumerate() {
            let y = self.perturbed_path(i)(vars);
            let d = discrete_malliavin(self.f, &y, self.gradient)?;
            for (k, &node) in self.e.nodes[i].iter().enumerate().skip(1) {
                let s = self.slot[node];
                for c in 0..self.dim {
                    g[s * self.dim + c] += w * d.at(k)[c];
                }
            }
        }
        if self.ball_budget.is_none() {
            let cost = self.cost(vars);
            if cost > 1e-300 {
                let p = self.spec.p();
                let v = cost.powf(1.0 / p);
                let lprime = self.penalty.derivative(v / self.delta);
                let dv_dcost = v / (p * cost);
                for (i, &s) in self.slot.iter().enumerate() {
                    if s == usize::MAX {
                        continue;
                    }
                    for c in 0..self.dim {
                        let x = vars[s * self.dim + c];
                        let dcost = self.scale
                            * self.node_mass[i]
                            * p
                            * x.signum()
                            * x.abs().powf(p - 1.0);
                        g[s * self.dim + c] -= lprime * dv_dcost * dcost;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Natural-gradient direction: node aggregates divided by node mass, the
    /// `L^2(mu)` representation under which the ball projection is exact.
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let mut dir = g.to_vec();
        for (i, &s) in self.slot.iter().enumerate() {
            if s == usize::MAX {
                continue;
            }
            let m = self.node_mass[i].max(1e-300);
            for c in 0..self.dim {
                dir[s * self.dim + c] /= m;
            }
        }
        dir
    }

    /// Feasibility map: conditional centering (martingale constraint), then
    /// global rescaling onto the cost ball.
    fn project(&self, vars: &mut [f64]) {
        if self.constrained {
            for group in &self.groups {
                for c in 0..self.dim {
                    let mean: f64 = group
                        .iter()
                        .map(|&(s, p)| p * vars[s * self.dim + c])
                        .sum();
                    for &(s, _) in group {
                        vars[s * self.dim + c] -= mean;
                    }
                }
            }
        }
        if let Some(budget) = self.ball_budget {
            let cost = self.cost(vars);
            if cost > budget {
                let shrink = (budget / cost).powf(1.0 / self.spec.p());
                vars.iter_mut().for_each(|v| *v *= shrink);
            }
        }
    }

    fn ascend(&self, mut vars: Vec<f64>) -> Result<(f64, Vec<f64>, usize)> {
        self.project(&mut vars);
        let mut value = self.objective(&vars);
        let mut step = 1.0;
        let mut flat_rounds = 0;
        let mut iters = 0;
        for _ in 0..MAX_ITERS {
            iters += 1;
            let g = self.gradient(&vars)?;
            let dir = self.precondition(&g);
            let mut alpha = step;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let mut cand = vars.clone();
                cand.iter_mut()
                    .zip(&dir)
                    .for_each(|(v, d)| *v += alpha * d);
                self.project(&mut cand);
                let cand_value = self.objective(&cand);
                let first_order: f64 = g
                    .iter()
                    .zip(cand.iter().zip(&vars))
                    .map(|(gi, (c, v))| gi * (c - v))
                    .sum();
                if cand_value >= value + ARMIJO_C * first_order && cand_value.is_finite() {
                    let improvement = cand_value - value;
                    vars = cand;
                    value = cand_value;
                    step = (alpha * 2.0).min(1e6);
                    if improvement.abs() <= 1e-13 * (1.0 + value.abs()) {
                        flat_rounds += 1;
                    } else {
                        flat_rounds = 0;
                    }
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if gnorm <= 1e-9 * (1.0 + value.abs()) || self.ball_budget.is_some() {
                    // at the ball boundary the projected step can stall
                    // exactly at the maximizer; treat as converged
                    break;
                }
                return Err(CdroError::NumericalFailure(
                    "projected ascent diverged: no Armijo step accepted".into(),
                ));
            }
            if flat_rounds >= 2 {
                break;
            }
        }
        Ok((value, vars, iters))
    }
}

/// Restricted worst-case value at strength `delta`: maximizes
/// `E[f(X + cumsum(psi))] - L_delta(E[c_N]^{1/p})` over adapted node fields
/// `psi` by projected natural-gradient ascent with random multistarts.
pub fn brute_force_value(
    model: &LatticeModel,
    f: &dyn Payoff,
    spec: &CostSpec,
    penalty: &Penalty,
    delta: f64,
    constrained: bool,
    opts: &OracleOptions,
) -> Result<BruteForceResult> {
    let e = model.enumerate()?;
    if delta == 0.0 {
        let v0: f64 = e
            .probs
            .iter()
            .zip(&e.paths)
            .map(|(&w, p)| w * f.evaluate(p))
            .sum();
        return Ok(BruteForceResult {
            value: v0,
            gain: 0.0,
            cost: 0.0,
            start: 0,
            iterations: 0,
            field: vec![Field::zero(model.n_steps(), model.dim()); e.len()],
        });
    }
    let prob = Problem::new(model, &e, f, spec, penalty, delta, constrained, opts.gradient)?;
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; prob.n_vars * prob.dim]];
    if let Some(warm) = &opts.warm_start {
        starts.push(node_vars_from_paths(&prob, warm)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let target = prob
        .ball_budget
        .unwrap_or_else(|| delta.powf(spec.p()));
    for _ in 0..opts.multistarts.saturating_sub(1) {
        let mut vars: Vec<f64> = (0..prob.n_vars * prob.dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let cost = prob.cost(&vars);
        if cost > 0.0 {
            let shrink = (0.5 * target / cost).powf(1.0 / spec.p());
            vars.iter_mut().for_each(|v| *v *= shrink);
        }
        starts.push(vars);
    }
    let mut best: Option<(f64, Vec<f64>, usize, usize)> = None;
    for (si, start) in starts.into_iter().enumerate() {
        let (value, vars, iters) = prob.ascend(start)?;
        if best.as_ref().map(|b| value > b.0).unwrap_or(true) {
            best = Some((value, vars, si, iters));
        }
    }
    let (value, vars, start, iterations) = best.expect("at least the zero start ran");
    let gain = prob.expected_payoff(&vars)
        - e.probs
            .iter()
            .zip(&e.paths)
            .map(|(&w, p)| w * f.evaluate(p))
            .sum::<f64>();
    let cost = prob.cost(&vars);
    let field = (0..e.len())
        .map(|i| {
            Field::from_fn(prob.n_steps, prob.dim, |n| {
                prob.var(&vars, e.nodes[i][n]).to_vec()
            })
        })
        .collect();
    Ok(BruteForceResult {
        value,
        gain,
        cost,
        start,
        iterations,
        field,
    })
}

fn node_vars_from_paths(prob: &Problem, per_path: &[Field]) -> Result<Vec<f64>> {
    if per_path.len() != prob.e.len() {
        return Err(CdroError::ShapeMismatch(
            "warm start needs one field per enumerated path".into(),
        ));
    }
    let mut vars = vec![0.0; prob.n_vars * prob.dim];
    for (trail, field) in prob.e.nodes.iter().zip(per_path) {
        for (k, &node) in trail.iter().enumerate().skip(1) {
            let s = prob.slot[node];
            vars[s * prob.dim..(s + 1) * prob.dim].copy_from_slice(field.at(k));
        }
    }
    Ok(vars)
}

/// Runs the oracle over a delta ladder, fits `V(delta) - V(0) = s delta + c delta^2`
/// by least squares and compares the slope against the first-order formula.
pub fn slope_check(
    model: &LatticeModel,
    f: &dyn Payoff,
    spec: &CostSpec,
    penalty: &Penalty,
    deltas: &[f64],
    constrained: bool,
    opts: &OracleOptions,
) -> Result<SlopeReport> {
    if deltas.len() < 2 || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(CdroError::InvalidParameter(
            "slope check needs at least two positive deltas".into(),
        ));
    }
    let sens_opts = SensOptions {
        gradient: opts.gradient,
        ..SensOptions::default()
    };
    let reference = if constrained {
        upsilon_mart(DiscreteModel::Lattice(model), f, spec, penalty, &sens_opts)?
    } else {
        upsilon(DiscreteModel::Lattice(model), f, spec, penalty, &sens_opts)?
    };
    let v0 = brute_force_value(model, f, spec, penalty, 0.0, constrained, opts)?.value;
    let mut values = Vec::with_capacity(deltas.len());
    for &d in deltas {
        values.push(brute_force_value(model, f, spec, penalty, d, constrained, opts)?.value);
    }
    // least squares for (s, c) in dv = s d + c d^2
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&d, &v) in deltas.iter().zip(&values) {
        let dv = v - v0;
        s11 += d * d;
        s12 += d * d * d;
        s22 += d * d * d * d;
        b1 += d * dv;
        b2 += d * d * dv;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-300 {
        return Err(CdroError::NumericalFailure(
            "degenerate delta ladder".into(),
        ));
    }
    let slope = (b1 * s22 - b2 * s12) / det;
    let curvature = (s11 * b2 - s12 * b1) / det;
    let upsilon_ref = reference.upsilon;
    let tol = (0.05 * upsilon_ref).max(1e-6);
    let err = (slope - upsilon_ref).abs();
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].partial_cmp(&deltas[b]).unwrap());
    let monotone = order
        .windows(2)
        .all(|w| values[w[1]] >= values[w[0]] - 1e-12 * (1.0 + values[w[0]].abs()));
    Ok(SlopeReport {
        deltas: deltas.to_vec(),
        values,
        v0,
        slope,
        curvature,
        upsilon: upsilon_ref,
        rel_err: if upsilon_ref.abs() > 0.0 {
            err / upsilon_ref.abs()
        } else {
            err
        },
        pass: err <= tol,
        monotone,
    })
}

/// Recomputes the transport cost of a constructed coupling and audits it
/// against the first-order budget `u^p delta^p`.
pub fn coupling_cost_audit(adv: &AdversarialOutput, spec: &CostSpec) -> CostAudit {
    let measured: f64 = adv
        .base
        .iter()
        .zip(&adv.perturbed)
        .zip(&adv.weights)
        .map(|((x, y), &w)| w * crate::cost::cost_cn(x, y, spec).expect("matched shapes"))
        .sum();
    let budget = (adv.u * adv.delta).powf(spec.p());
    CostAudit {
        pass: measured <= budget * (1.0 + 1e-9),
        measured,
        budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{AsianCall, CubicTerminal, LinearPayoff};
    use approx::assert_relative_eq;

    fn indicator() -> Penalty {
        Penalty::indicator(1.0).unwrap()
    }

    #[test]
    fn zero_delta_returns_reference_expectation() {
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = AsianCall::new(0.0);
        let spec = CostSpec::discrete(2.0).unwrap();
        let r = brute_force_value(&m, &f, &spec, &indicator(), 0.0, false, &OracleOptions::default())
            .unwrap();
        let e = m.enumerate().unwrap();
        let v0: f64 = e
            .probs
            .iter()
            .zip(&e.paths)
            .map(|(&w, p)| w * f.evaluate(p))
            .sum();
        assert_relative_eq!(r.value, v0, epsilon = 1e-15);
    }

    #[test]
    fn linear_payoff_ladder_is_exact() {
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = LinearPayoff::new(vec![1.25]);
        let spec = CostSpec::discrete(2.0).unwrap();
        let opts = OracleOptions::default();
        let e = m.enumerate().unwrap();
        let v0: f64 = e
            .probs
            .iter()
            .zip(&e.paths)
            .map(|(&w, p)| w * f.evaluate(p))
            .sum();
        for delta in [0.2, 0.05] {
            let r =
                brute_force_value(&m, &f, &spec, &indicator(), delta, false, &opts).unwrap();
            let expect = v0 + delta * 3f64.sqrt() * 1.25;
            assert_relative_eq!(r.value, expect, epsilon = 1e-10);
            assert!(r.cost <= (delta * delta) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn lower_bound_property_holds() {
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = CubicTerminal { reg: 0.25 };
        let spec = CostSpec::discrete(2.0).unwrap();
        let e = m.enumerate().unwrap();
        let v0: f64 = e
            .probs
            .iter()
            .zip(&e.paths)
            .map(|(&w, p)| w * f.evaluate(p))
            .sum();
        let r = brute_force_value(
            &m,
            &f,
            &spec,
            &indicator(),
            0.1,
            false,
            &OracleOptions::default(),
        )
        .unwrap();
        assert!(r.value >= v0 - 1e-12);
    }

    #[test]
    fn slope_matches_linear_formula_to_1e9() {
        let m = LatticeModel::symmetric_walk(2, 1.0).unwrap();
        let f = LinearPayoff::new(vec![0.9]);
        let spec = CostSpec::discrete(2.0).unwrap();
        let deltas = [0.1, 0.05, 0.025, 0.0125];
        let rep = slope_check(
            &m,
            &f,
            &spec,
            &indicator(),
            &deltas,
            false,
            &OracleOptions::default(),
        )
        .unwrap();
        assert!(rep.monotone);
        assert!(
            (rep.slope - rep.upsilon).abs() <= 1e-9,
            "slope {} vs upsilon {}",
            rep.slope,
            rep.upsilon
        );
    }

    #[test]
    fn constrained_linear_payoff_cannot_gain() {
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = LinearPayoff::new(vec![1.0]);
        let spec = CostSpec::discrete(2.0).unwrap();
        let e = m.enumerate().unwrap();
        let v0: f64 = e
            .probs
            .iter()
            .zip(&e.paths)
            .map(|(&w, p)| w * f.evaluate(p))
            .sum();
        let r = brute_force_value(
            &m,
            &f,
            &spec,
            &indicator(),
            0.2,
            true,
            &OracleOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, v0, epsilon = 1e-9);
    }

    #[test]
    fn values_nondecreasing_in_delta_for_indicator() {
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = AsianCall::new(0.45);
        let spec = CostSpec::discrete(2.0).unwrap();
        let opts = OracleOptions::default();
        let mut last = f64::NEG_INFINITY;
        for delta in [0.0, 0.02, 0.05, 0.1, 0.2] {
            let v = brute_force_value(&m, &f, &spec, &indicator(), delta, false, &opts)
                .unwrap()
                .value;
            assert!(v >= last - 1e-12, "value decreased at delta {delta}");
            last = v;
        }
    }

    #[test]
    fn warm_start_from_first_order_map_is_near_optimal() {
        // The ascent may polish the first-order construction, but only by
        // o(delta): the per-delta improvement must vanish along the ladder.
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = AsianCall::new(0.45);
        let spec = CostSpec::discrete(2.0).unwrap();
        let penalty = indicator();
        let mut ratios = Vec::new();
        for delta in [0.2, 0.1, 0.05, 0.025] {
            let adv = crate::sens_discrete::adversarial_map(
                crate::sens_discrete::DiscreteModel::Lattice(&m),
                &f,
                &spec,
                &penalty,
                delta,
                false,
                &SensOptions::default(),
            )
            .unwrap();
            let warm: Vec<Field> = adv
                .base
                .iter()
                .zip(&adv.perturbed)
                .map(|(x, y)| {
                    let dx = x.increments();
                    let dy = y.increments();
                    Field::from_fn(x.n_steps(), 1, |n| vec![dy.point(n)[0] - dx.point(n)[0]])
                })
                .collect();
            let opts = OracleOptions {
                warm_start: Some(warm),
                ..OracleOptions::default()
            };
            let best = brute_force_value(&m, &f, &spec, &penalty, delta, false, &opts).unwrap();
            ratios.push((best.gain - adv.realized_gain) / delta);
        }
        for w in ratios.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "improvement per delta grew: {ratios:?}");
        }
        assert!(
            *ratios.last().unwrap() < 0.02,
            "first-order map left {} per unit delta on the table",
            ratios.last().unwrap()
        );
    }

    #[test]
    fn hyperbolic_scaled_cost_slope_matches() {
        use crate::cost::Scaling;
        let m = LatticeModel::symmetric_walk(4, 0.5).unwrap();
        let f = LinearPayoff::new(vec![0.8]);
        let spec = CostSpec::new(2.0, Scaling::Hyperbolic)
            .unwrap()
            .with_horizon(1.0)
            .unwrap();
        let deltas = [0.1, 0.05, 0.025];
        let rep = slope_check(
            &m,
            &f,
            &spec,
            &indicator(),
            &deltas,
            false,
            &OracleOptions::default(),
        )
        .unwrap();
        // r = |a| sqrt(T) under the dt-weighted norm
        assert!((rep.upsilon - 0.8).abs() < 1e-12);
        assert!(
            (rep.slope - rep.upsilon).abs() <= 1e-9,
            "slope {} vs {}",
            rep.slope,
            rep.upsilon
        );
    }

    #[test]
    fn general_p_linear_slope_is_exact() {
        // the preconditioned gradient of a terminal-linear payoff is the
        // same vector at every node, and the extremal direction map
        // preserves constants, so the ascent lands on the optimum for any p
        let m = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let f = LinearPayoff::new(vec![1.0]);
        let spec = CostSpec::discrete(3.0).unwrap();
        let deltas = [0.1, 0.05, 0.025];
        let rep = slope_check(
            &m,
            &f,
            &spec,
            &indicator(),
            &deltas,
            false,
            &OracleOptions::default(),
        )
        .unwrap();
        // q = 3/2: upsilon = N^{2/3}
        assert!((rep.upsilon - 3f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!(
            (rep.slope - rep.upsilon).abs() <= 1e-9,
            "slope {} vs {}",
            rep.slope,
            rep.upsilon
        );
    }

    #[test]
    fn power_penalty_slope_matches_conjugate_formula() {
        // Non-indicator route: unconstrained penalized ascent.
        let m = LatticeModel::symmetric_walk(2, 1.0).unwrap();
        let f = LinearPayoff::new(vec![1.0]);
        let spec = CostSpec::discrete(2.0).unwrap();
        let penalty = Penalty::power(3.0, 1.0).unwrap();
        let deltas = [0.2, 0.1, 0.05, 0.025];
        let rep = slope_check(&m, &f, &spec, &penalty, &deltas, false, &OracleOptions::default())
            .unwrap();
        // r = sqrt(2), upsilon = L*(r) = r^{1.5}/1.5
        let r = 2f64.sqrt();
        let expect = r.powf(1.5) / 1.5;
        assert!((rep.upsilon - expect).abs() < 1e-12);
        assert!(
            rep.rel_err <= 0.05,
            "slope {} vs {} (rel {})",
            rep.slope,
            rep.upsilon,
            rep.rel_err
        );
    }

    #[test]
    fn manual_over_budget_field_fails_audit() {
        let m = LatticeModel::symmetric_walk(2, 1.0).unwrap();
        let f = LinearPayoff::new(vec![1.0]);
        let spec = CostSpec::discrete(2.0).unwrap();
        let mut adv = crate::sens_discrete::adversarial_map(
            crate::sens_discrete::DiscreteModel::Lattice(&m),
            &f,
            &spec,
            &indicator(),
            0.1,
            false,
            &SensOptions::default(),
        )
        .unwrap();
        assert!(coupling_cost_audit(&adv, &spec).pass);
        // inflate the perturbation beyond its budget
        for y in adv.perturbed.iter_mut() {
            for k in 1..=y.n_steps() {
                y.point_mut(k)[0] *= 2.0;
            }
        }
        assert!(!coupling_cost_audit(&adv, &spec).pass);
    }
}
