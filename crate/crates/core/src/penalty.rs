use crate::error::{CdroError, Result};
use serde::Serialize;

/// Outcome of the superlinear-growth audit `liminf L(u)/u^p = +inf`.
///
/// A warning never blocks evaluation; the first-order formula is still
/// reported, the caller just learns the expansion's hypothesis is not met.
#[derive(Clone, Debug, Serialize)]
pub enum GrowthCheck {
    Ok,
    Warn(String),
}

impl GrowthCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, GrowthCheck::Ok)
    }
}

#[derive(Clone, Debug)]
enum Family {
    /// `0` on `[0, radius]`, `+inf` beyond.
    Indicator { radius: f64 },
    /// `scale * u^exponent / exponent`.
    Power { exponent: f64, scale: f64 },
    /// Piecewise-linear through `(u_i, L_i)` knots, linearly extended past
    /// the last knot.
    Table { us: Vec<f64>, ls: Vec<f64> },
}

/// A penalty shape `L`: continuous, non-decreasing, `L(0) = 0`.
///
/// The caller applies the strength parametrization `L_delta(v) = delta * L(v / delta)`;
/// `delta` never enters this type's state.
#[derive(Clone, Debug)]
pub struct Penalty {
    family: Family,
}

impl Penalty {
    /// The hard ball of radius `rho`: free inside, forbidden outside.
    pub fn indicator(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(CdroError::InvalidParameter(format!(
                "indicator radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            family: Family::Indicator { radius },
        })
    }

    /// `L(u) = scale * u^exponent / exponent` with `exponent > 1`.
    pub fn power(exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent > 1.0) || !(scale > 0.0) {
            return Err(CdroError::InvalidParameter(format!(
                "power penalty needs exponent > 1 and scale > 0, got ({exponent}, {scale})"
            )));
        }
        Ok(Self {
            family: Family::Power { exponent, scale },
        })
    }

    /// Convex-usable tabulated penalty from `(u, L(u))` samples.
    pub fn from_table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        match points.first() {
            Some(&(u0, l0)) if u0 == 0.0 => {
                if l0 != 0.0 {
                    return Err(CdroError::InvalidParameter(
                        "tabulated penalty must satisfy L(0) = 0".into(),
                    ));
                }
            }
            _ => points.insert(0, (0.0, 0.0)),
        }
        if points.len() < 2 {
            return Err(CdroError::InvalidParameter(
                "tabulated penalty needs at least one positive knot".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(CdroError::InvalidParameter(
                    "tabulated penalty knots must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(CdroError::InvalidParameter(
                    "tabulated penalty must be non-decreasing".into(),
                ));
            }
        }
        let (us, ls) = points.into_iter().unzip();
        Ok(Self {
            family: Family::Table { us, ls },
        })
    }

    /// Parses `indicator:1.0`, `power:m=3,kappa=1` or `table:file.csv`
    /// (CSV rows `u,L`).
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match name {
            "indicator" => {
                let radius: f64 = rest
                    .parse()
                    .map_err(|_| CdroError::Config(format!("bad indicator radius {rest:?}")))?;
                Self::indicator(radius)
            }
            "power" => {
                let mut m = None;
                let mut kappa = 1.0;
                for kv in rest.split(',').filter(|s| !s.is_empty()) {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| CdroError::Config(format!("bad penalty field {kv:?}")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| CdroError::Config(format!("bad penalty value {kv:?}")))?;
                    match k {
                        "m" => m = Some(v),
                        "kappa" => kappa = v,
                        _ => return Err(CdroError::Config(format!("unknown penalty field {k:?}"))),
                    }
                }
                let m =
                    m.ok_or_else(|| CdroError::Config("power penalty needs m=...".into()))?;
                Self::power(m, kappa)
            }
            "table" => {
                let text = std::fs::read_to_string(rest)?;
                let mut points = Vec::new();
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let (u, l) = line
                        .split_once(',')
                        .ok_or_else(|| CdroError::Config(format!("bad table row {line:?}")))?;
                    points.push((
                        u.trim().parse().map_err(|_| {
                            CdroError::Config(format!("bad table value {line:?}"))
                        })?,
                        l.trim().parse().map_err(|_| {
                            CdroError::Config(format!("bad table value {line:?}"))
                        })?,
                    ));
                }
                Self::from_table(points)
            }
            _ => Err(CdroError::Config(format!("unknown penalty family {name:?}"))),
        }
    }

    pub fn describe(&self) -> String {
        match &self.family {
            Family::Indicator { radius } => format!("indicator:{radius}"),
            Family::Power { exponent, scale } => format!("power:m={exponent},kappa={scale}"),
            Family::Table { us, .. } => format!("table[{} knots]", us.len()),
        }
    }

    /// `L(u)`; `+inf` is a legal value.
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        match &self.family {
            Family::Indicator { radius } => {
                if u <= *radius {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::Power { exponent, scale } => scale * u.powf(*exponent) / exponent,
            Family::Table { us, ls } => {
                let k = us.len();
                if u >= us[k - 1] {
                    let slope = (ls[k - 1] - ls[k - 2]) / (us[k - 1] - us[k - 2]);
                    return ls[k - 1] + slope * (u - us[k - 1]);
                }
                let j = us.partition_point(|&x| x <= u).max(1);
                let w = (u - us[j - 1]) / (us[j] - us[j - 1]);
                ls[j - 1] + w * (ls[j] - ls[j - 1])
            }
        }
    }

    /// The strength-parametrized penalty `L_delta(v) = delta * L(v / delta)`.
    pub fn parametrized(&self, delta: f64, v: f64) -> f64 {
        debug_assert!(delta > 0.0);
        delta * self.eval(v / delta)
    }

    /// Convex conjugate `L*(v) = sup_{u >= 0} { u v - L(u) }`.
    ///
    /// Indicator and power conjugates are closed-form; the tabulated family
    /// is piecewise linear, so the supremum is exact over the knots, with
    /// `+inf` once `v` exceeds the final slope.
    pub fn conjugate(&self, v: f64) -> f64 {
        debug_assert!(v >= 0.0);
        match &self.family {
            Family::Indicator { radius } => radius * v,
            Family::Power { exponent, scale } => {
                // Legendre pair: conjugate exponent m' with 1/m + 1/m' = 1.
                let mp = exponent / (exponent - 1.0);
                v.powf(mp) * scale.powf(1.0 - mp) / mp
            }
            Family::Table { us, ls } => {
                let k = us.len();
                let final_slope = (ls[k - 1] - ls[k - 2]) / (us[k - 1] - us[k - 2]);
                if v > final_slope {
                    return f64::INFINITY;
                }
                us.iter()
                    .zip(ls)
                    .map(|(&u, &l)| u * v - l)
                    .fold(0.0_f64, f64::max)
            }
        }
    }

    /// A maximizer of `u -> u r - L(u)`, the budget consumed by the
    /// first-order optimal perturbation: `u r - L(u) = L*(r)`.
    pub fn optimal_u(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(CdroError::InvalidParameter("optimal_u needs r >= 0".into()));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            Family::Indicator { radius } => Ok(*radius),
            Family::Power { exponent, scale } => Ok((r / scale).powf(1.0 / (exponent - 1.0))),
            Family::Table { us, ls } => {
                let k = us.len();
                let final_slope = (ls[k - 1] - ls[k - 2]) / (us[k - 1] - us[k - 2]);
                if r > final_slope {
                    return Err(CdroError::NumericalFailure(format!(
                        "u r - L(u) unbounded: tabulated final slope {final_slope} < r = {r}"
                    )));
                }
                let (best, _) = us
                    .iter()
                    .zip(ls)
                    .map(|(&u, &l)| (u, u * r - l))
                    .fold((0.0, 0.0_f64), |acc, cand| {
                        if cand.1 > acc.1 {
                            cand
                        } else {
                            acc
                        }
                    });
                Ok(best)
            }
        }
    }

    /// One-sided derivative `L'(u)` used by the oracle's penalized ascent.
    pub fn derivative(&self, u: f64) -> f64 {
        match &self.family {
            Family::Indicator { radius } => {
                if u < *radius {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::Power { exponent, scale } => scale * u.powf(exponent - 1.0),
            Family::Table { us, ls } => {
                let k = us.len();
                if u >= us[k - 1] {
                    return (ls[k - 1] - ls[k - 2]) / (us[k - 1] - us[k - 2]);
                }
                let j = us.partition_point(|&x| x <= u).max(1);
                (ls[j] - ls[j - 1]) / (us[j] - us[j - 1])
            }
        }
    }

    pub fn is_indicator(&self) -> Option<f64> {
        match &self.family {
            Family::Indicator { radius } => Some(*radius),
            _ => None,
        }
    }

    /// Audits `liminf_{u->inf} L(u)/u^p = +inf` against the cost exponent.
    pub fn validate_growth(&self, p: f64) -> GrowthCheck {
        match &self.family {
            Family::Indicator { .. } => GrowthCheck::Ok,
            Family::Power { exponent, .. } => {
                if *exponent > p {
                    GrowthCheck::Ok
                } else {
                    GrowthCheck::Warn(format!(
                        "power penalty exponent m = {exponent} <= p = {p}: L(u)/u^p stays bounded, the first-order expansion is unsupported"
                    ))
                }
            }
            Family::Table { us, ls } => {
                // Sampled heuristic: the ratio L(u)/u^p must keep growing
                // over the last knots; a linearly extended table cannot.
                let k = us.len();
                let ratio = |i: usize| ls[i] / us[i].powf(p);
                let tail_growing = k >= 3 && ratio(k - 1) > ratio(k - 2) && ratio(k - 2) > ratio(k - 3);
                if tail_growing {
                    GrowthCheck::Warn(format!(
                        "tabulated penalty: sampled ratio L(u)/u^{p} grows up to u = {} but the linear extension beyond the last knot violates the growth condition",
                        us[k - 1]
                    ))
                } else {
                    GrowthCheck::Warn(format!(
                        "tabulated penalty: L(u)/u^{p} is not increasing at the sampled tail; growth condition unverifiable"
                    ))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn indicator_conjugate_is_scaled_identity() {
        let l = Penalty::indicator(1.0).unwrap();
        for v in [0.0, 0.3, 1.0, 7.5] {
            assert_relative_eq!(l.conjugate(v), v, epsilon = 1e-15);
        }
        let l2 = Penalty::indicator(2.5).unwrap();
        assert_relative_eq!(l2.conjugate(3.0), 7.5, epsilon = 1e-14);
    }

    #[test]
    fn power_conjugate_is_legendre_pair() {
        let l = Penalty::power(3.0, 1.0).unwrap();
        let mp = 1.5;
        for v in [0.0, 0.5, 1.0, 4.0] {
            assert_relative_eq!(l.conjugate(v), v.powf(mp) / mp, epsilon = 1e-12);
        }
    }

    #[test]
    fn conjugate_vanishes_at_zero() {
        for l in [
            Penalty::indicator(0.7).unwrap(),
            Penalty::power(2.5, 3.0).unwrap(),
            Penalty::from_table(vec![(0.0, 0.0), (1.0, 0.5), (2.0, 3.0)]).unwrap(),
        ] {
            assert_eq!(l.conjugate(0.0), 0.0);
        }
    }

    #[test]
    fn optimal_u_closed_forms() {
        let ind = Penalty::indicator(1.0).unwrap();
        assert_eq!(ind.optimal_u(2.0).unwrap(), 1.0);
        assert_eq!(ind.optimal_u(0.0).unwrap(), 0.0);
        let pow = Penalty::power(3.0, 1.0).unwrap();
        assert_relative_eq!(pow.optimal_u(4.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(pow.optimal_u(0.0).unwrap(), 0.0);
    }

    #[test]
    fn fenchel_young_with_equality_at_maximizer() {
        let penalties = [
            Penalty::indicator(1.3).unwrap(),
            Penalty::power(3.0, 2.0).unwrap(),
            Penalty::power(1.8, 0.5).unwrap(),
        ];
        for l in &penalties {
            for v in [0.1, 0.9, 2.7, 6.0] {
                let lv = l.conjugate(v);
                for u in [0.0, 0.2, 0.8, 1.3, 4.0] {
                    assert!(u * v <= l.eval(u) + lv + 1e-9);
                }
                let u_star = l.optimal_u(v).unwrap();
                assert_relative_eq!(u_star * v - l.eval(u_star), lv, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn growth_validation() {
        assert!(Penalty::indicator(1.0).unwrap().validate_growth(2.0).is_ok());
        assert!(Penalty::power(3.0, 1.0).unwrap().validate_growth(2.0).is_ok());
        assert!(!Penalty::power(2.0, 1.0).unwrap().validate_growth(2.0).is_ok());
    }

    #[test]
    fn table_conjugate_reports_infinity_beyond_final_slope() {
        let l = Penalty::from_table(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 3.0)]).unwrap();
        // final slope 2
        assert!(l.conjugate(1.9).is_finite());
        assert!(l.conjugate(2.1).is_infinite());
        assert!(l.optimal_u(2.1).is_err());
    }

    #[test]
    fn parametrized_indicator_is_scaled_ball() {
        let l = Penalty::indicator(1.5).unwrap();
        let delta = 0.2;
        assert_eq!(l.parametrized(delta, 0.29), 0.0);
        assert!(l.parametrized(delta, 0.31).is_infinite());
    }

    #[test]
    fn parse_specs() {
        assert!(Penalty::parse("indicator:1.0").is_ok());
        assert!(Penalty::parse("power:m=3,kappa=1").is_ok());
        assert!(Penalty::parse("nope:1").is_err());
    }

    #[test]
    fn monotone_convex_conjugate_on_grid() {
        let l = Penalty::from_table(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0), (2.0, 4.0)]).unwrap();
        let vs: Vec<f64> = (0..40).map(|i| i as f64 * 0.07).collect();
        let cs: Vec<f64> = vs.iter().map(|&v| l.conjugate(v)).collect();
        for w in cs.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        // convexity via midpoint on the finite part
        for i in 1..vs.len() - 1 {
            if cs[i + 1].is_finite() {
                assert!(cs[i] <= 0.5 * (cs[i - 1] + cs[i + 1]) + 1e-12);
            }
        }
    }
}
