//! Spec-string parsing for models and payoffs, and the run manifest.

use crate::expr;
use cdro_core::payoffs::{
    AsianCall, CubicTerminal, CustomPayoff, ItoIntegralUtility, LinearPayoff, MertonLogWealth,
    QuadraticVariation,
};
use cdro_core::{
    CdroError, GradientBackend, LatticeModel, Payoff, Result, SampleEnsemble, SigmaSpec,
    UtilitySpec,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

/// A reference model parsed from its CLI spec string.
pub enum ModelSpec {
    Lattice(LatticeModel),
    Ensemble(SampleEnsemble),
}

impl ModelSpec {
    pub fn time_grid(&self) -> Vec<f64> {
        match self {
            ModelSpec::Lattice(l) => (0..=l.n_steps()).map(|k| k as f64).collect(),
            ModelSpec::Ensemble(e) => e.time_grid.clone(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ModelSpec::Lattice(_) => None,
            ModelSpec::Ensemble(e) => Some(e.rng_seed),
        }
    }
}

fn kv_map(rest: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for item in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CdroError::Config(format!("expected key=value, got {item:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn take_f64(map: &BTreeMap<String, String>, key: &str, default: Option<f64>) -> Result<f64> {
    match map.get(key) {
        Some(v) => v
            .parse()
            .map_err(|_| CdroError::Config(format!("bad numeric value for {key}: {v:?}"))),
        None => default.ok_or_else(|| CdroError::Config(format!("missing field {key}"))),
    }
}

fn take_usize(map: &BTreeMap<String, String>, key: &str, default: Option<usize>) -> Result<usize> {
    match map.get(key) {
        Some(v) => v
            .parse()
            .map_err(|_| CdroError::Config(format!("bad integer value for {key}: {v:?}"))),
        None => default.ok_or_else(|| CdroError::Config(format!("missing field {key}"))),
    }
}

/// Parses `walk:N=10,jump=1`, `lattice:FILE`,
/// `brownian:T=1,N=64,d=1,M=100000,seed=7` or
/// `rademacher:N=4,jump=1,M=100000,seed=7`.
pub fn parse_model(spec: &str) -> Result<ModelSpec> {
    let (name, rest) = spec
        .split_once(':')
        .ok_or_else(|| CdroError::Config(format!("model spec needs a family prefix: {spec:?}")))?;
    match name {
        "walk" => {
            let map = kv_map(rest)?;
            let n = take_usize(&map, "N", None)?;
            let jump = take_f64(&map, "jump", Some(1.0))?;
            Ok(ModelSpec::Lattice(LatticeModel::symmetric_walk(n, jump)?))
        }
        "lattice" => Ok(ModelSpec::Lattice(LatticeModel::from_json_file(Path::new(
            rest,
        ))?)),
        "brownian" => {
            let map = kv_map(rest)?;
            Ok(ModelSpec::Ensemble(SampleEnsemble::brownian(
                take_f64(&map, "T", Some(1.0))?,
                take_usize(&map, "N", None)?,
                take_usize(&map, "d", Some(1))?,
                take_usize(&map, "M", None)?,
                take_f64(&map, "seed", Some(7.0))? as u64,
            )?))
        }
        "rademacher" => {
            let map = kv_map(rest)?;
            Ok(ModelSpec::Ensemble(SampleEnsemble::rademacher_walk(
                take_usize(&map, "N", None)?,
                take_f64(&map, "jump", Some(1.0))?,
                take_usize(&map, "M", None)?,
                take_f64(&map, "seed", Some(7.0))? as u64,
            )?))
        }
        _ => Err(CdroError::Config(format!("unknown model family {name:?}"))),
    }
}

/// Parses the payoff registry:
/// `linear:a=1` (multi-d via `a=1|0.5`), `asian:K=0`, `quadvar`,
/// `merton:lambda=0.5,r=0,kappa=1,T=1`, `cubic:reg=0.25`,
/// `logcontract:<sigma spec>`, `expr:FILE`.
pub fn parse_payoff(spec: &str, times: &[f64]) -> Result<Box<dyn Payoff>> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match name {
        "linear" => {
            let map = kv_map(rest)?;
            let a = map
                .get("a")
                .ok_or_else(|| CdroError::Config("linear payoff needs a=".into()))?;
            let weights: Vec<f64> = a
                .split('|')
                .map(|v| {
                    v.parse()
                        .map_err(|_| CdroError::Config(format!("bad weight {v:?}")))
                })
                .collect::<Result<_>>()?;
            Ok(Box::new(LinearPayoff::new(weights)))
        }
        "asian" => {
            let map = kv_map(rest)?;
            Ok(Box::new(AsianCall::new(take_f64(&map, "K", Some(0.0))?)))
        }
        "quadvar" => Ok(Box::new(QuadraticVariation)),
        "merton" => {
            let map = kv_map(rest)?;
            Ok(Box::new(MertonLogWealth::new(
                take_f64(&map, "lambda", None)?,
                take_f64(&map, "r", Some(0.0))?,
                take_f64(&map, "kappa", Some(1.0))?,
                take_f64(&map, "T", Some(*times.last().unwrap()))?,
            )))
        }
        "cubic" => {
            let map = kv_map(rest)?;
            Ok(Box::new(CubicTerminal {
                reg: take_f64(&map, "reg", Some(0.25))?,
            }))
        }
        "logcontract" => {
            let sigma = SigmaSpec::parse(rest)?;
            sigma.validate(11)?;
            Ok(Box::new(ItoIntegralUtility::new(
                sigma,
                UtilitySpec::quadratic(),
                times.to_vec(),
            )))
        }
        "expr" => {
            let text = std::fs::read_to_string(rest)?;
            let ast = expr::parse(&text)?;
            let label = format!("expr:{rest}");
            Ok(Box::new(CustomPayoff::new(
                label,
                2.0,
                Arc::new(move |p| expr::eval(&ast, p)),
            )))
        }
        _ => Err(CdroError::Config(format!("unknown payoff {name:?}"))),
    }
}

pub fn parse_gradient_backend(spec: &str) -> Result<GradientBackend> {
    match spec {
        "auto" => Ok(GradientBackend::Auto),
        "analytic" => Ok(GradientBackend::Analytic),
        "bump" => Ok(GradientBackend::Bump {
            eps: None,
            richardson: false,
        }),
        "bump-richardson" => Ok(GradientBackend::Bump {
            eps: None,
            richardson: true,
        }),
        _ => Err(CdroError::Config(format!(
            "unknown gradient backend {spec:?} (auto|analytic|bump|bump-richardson)"
        ))),
    }
}

/// Every run writes one of these next to its outputs; re-running the stored
/// argv reproduces the outputs byte for byte.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    /// Fully resolved argv (defaults made explicit), without the binary name.
    pub command: Vec<String>,
    /// RNG seed of the sampled model, when one was sampled.
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CdroError::Config(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CdroError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_specs_parse() {
        assert!(matches!(
            parse_model("walk:N=4").unwrap(),
            ModelSpec::Lattice(_)
        ));
        assert!(matches!(
            parse_model("brownian:T=1,N=8,d=1,M=16,seed=3").unwrap(),
            ModelSpec::Ensemble(_)
        ));
        assert!(parse_model("walk:").is_err());
        assert!(parse_model("nope:N=4").is_err());
    }

    #[test]
    fn payoff_specs_parse() {
        let times: Vec<f64> = (0..=4).map(|k| k as f64).collect();
        for spec in [
            "linear:a=1",
            "asian:K=0.5",
            "quadvar",
            "merton:lambda=0.5",
            "cubic:reg=0.1",
            "logcontract:const:0.2",
        ] {
            parse_payoff(spec, &times).unwrap();
        }
        assert!(parse_payoff("mystery:1", &times).is_err());
    }
}
