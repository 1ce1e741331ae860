//! Subcommand implementations, output files and exit-code policy.
//!
//! Exit codes: 0 success, 1 failed verification (repro tolerance or oracle
//! slope), 2 invalid configuration, 3 numerical failure.

use crate::config::{parse_gradient_backend, parse_model, parse_payoff, Manifest, ModelSpec};
use cdro_core::ensemble::fmt_sig;
use cdro_core::oracle::{slope_check, OracleOptions};
use cdro_core::payoffs::AsianCall;
use cdro_core::projection::RegressionOptions;
use cdro_core::sens_continuous::{parabolic_basis, parabolic_discrete_surrogate};
use cdro_core::{
    adversarial_map, discrete_malliavin, upsilon, upsilon_hyperbolic, upsilon_mart,
    upsilon_mart_parabolic, BasisSpec, CdroError, CostSpec, DiscreteModel, Field, LatticeModel,
    Penalty, ProjectionKind, SampleEnsemble, Scaling, SensOptions, SensitivityReport, SigmaSpec,
    UtilitySpec,
};
use clap::{Args, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<CdroError> for CliError {
    fn from(e: CdroError) -> Self {
        let code = match &e {
            CdroError::NumericalFailure(_) | CdroError::ProjectionFailure(_) => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn verification_failure(message: String) -> CliError {
    CliError { code: 1, message }
}

type CliResult = Result<(), CliError>;

#[derive(Subcommand)]
pub enum SensCmd {
    /// Discrete-time sensitivity (exact lattice or Monte Carlo ensemble)
    Discrete(SensArgs),
    /// Continuous-time drift sensitivity under hyperbolic cost scaling
    Hyperbolic(SensArgs),
    /// Continuous-time volatility sensitivity under parabolic scaling
    Parabolic(ParabolicArgs),
}

#[derive(Args, Clone)]
pub struct SensArgs {
    /// walk:N=10[,jump=1] | lattice:FILE | brownian:T=1,N=64,d=1,M=100000,seed=7 | rademacher:N=4,M=...,seed=...
    #[arg(long)]
    pub model: String,
    /// linear:a=.. | asian:K=.. | quadvar | merton:lambda=..[,r=..,kappa=..,T=..] | cubic:reg=.. | logcontract:<sigma> | expr:FILE
    #[arg(long)]
    pub payoff: String,
    /// Cost exponent p > 1
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// indicator:RHO | power:m=..,kappa=.. | table:FILE
    #[arg(long, default_value = "indicator:1")]
    pub penalty: String,
    /// Impose the martingale constraint
    #[arg(long)]
    pub mart: bool,
    /// Regression basis for Monte Carlo projections
    #[arg(long, default_value = "poly:3:state,runmean")]
    pub basis: String,
    /// Derivative backend: auto | analytic | bump | bump-richardson
    #[arg(long, default_value = "auto")]
    pub backend: String,
    /// Bootstrap resamples for Monte Carlo error bars
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Fit regressions on half the paths (diagnostic)
    #[arg(long)]
    pub oos: bool,
    /// Also build the first-order adversarial model at this strength and audit its budget
    #[arg(long)]
    pub adversarial_delta: Option<f64>,
    /// Dump the projected derivative field to projection.csv
    #[arg(long)]
    pub dump_projection: bool,
    /// Dump sampled ensemble paths to paths.csv
    #[arg(long)]
    pub dump_paths: bool,
    /// Output directory (default: $CDRO_OUT or .)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct ParabolicArgs {
    /// brownian:T=..,N=..,d=1,M=..,seed=..
    #[arg(long)]
    pub model: String,
    /// const:0.2 | tanh:a=0.2,b=0.05
    #[arg(long)]
    pub sigma: String,
    /// linear | quad | quad:scale=..
    #[arg(long, default_value = "quad")]
    pub utility: String,
    #[arg(long, default_value = "indicator:1")]
    pub penalty: String,
    /// Regression basis for the predictable projection
    #[arg(long, default_value = "poly:3:state")]
    pub basis: String,
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Also report the discrete-time surrogate (flagged diagnostic)
    #[arg(long)]
    pub surrogate: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReproTarget {
    /// Strike sweep of the walk-monitored average-strike call
    AsianFigure,
    /// Log-investor drift sensitivity, lambda sqrt(T)
    Merton,
    /// Log contract volatility sensitivity, sigma^2 sqrt(T)
    Logcontract,
    /// Half quadratic variation, sqrt(T)
    Quadvar,
}

#[derive(Subcommand)]
pub enum OracleCmd {
    /// Fit the worst-case value ladder and compare its slope to the formula
    Check(OracleArgs),
}

#[derive(Args, Clone)]
pub struct OracleArgs {
    /// walk:N=..[,jump=..] | lattice:FILE (small trees only)
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub payoff: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value = "indicator:1")]
    pub penalty: String,
    /// Comma-separated strengths, e.g. 0.1,0.05,0.025,0.0125
    #[arg(long, default_value = "0.1,0.05,0.025,0.0125")]
    pub deltas: String,
    #[arg(long)]
    pub mart: bool,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("CDRO_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError {
        code: 2,
        message: format!("cannot create output directory {}: {e}", dir.display()),
    })
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text).map_err(|e| CliError {
        code: 2,
        message: format!("cannot write {name}: {e}"),
    })
}

fn per_time_csv(report: &SensitivityReport) -> String {
    let mut s = String::from("n,contribution\n");
    for (i, c) in report.per_time_contribution.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, fmt_sig(*c));
    }
    s
}

fn projection_csv(fields: &[Field]) -> String {
    let mut s = String::from("path_id,n,component,value\n");
    for (i, f) in fields.iter().enumerate() {
        for n in 1..=f.n_steps() {
            for (c, v) in f.at(n).iter().enumerate() {
                let _ = writeln!(s, "{i},{n},{},{}", c + 1, fmt_sig(*v));
            }
        }
    }
    s
}

fn sens_manifest(kind: &str, a: &SensArgs, seed: Option<u64>, outputs: Vec<String>) -> Manifest {
    let mut command = vec![
        "sens".into(),
        kind.into(),
        "--model".into(),
        a.model.clone(),
        "--payoff".into(),
        a.payoff.clone(),
        "--p".into(),
        a.p.to_string(),
        "--penalty".into(),
        a.penalty.clone(),
        "--basis".into(),
        a.basis.clone(),
        "--backend".into(),
        a.backend.clone(),
        "--bootstrap".into(),
        a.bootstrap.to_string(),
    ];
    if a.mart {
        command.push("--mart".into());
    }
    if a.oos {
        command.push("--oos".into());
    }
    if a.dump_projection {
        command.push("--dump-projection".into());
    }
    if a.dump_paths {
        command.push("--dump-paths".into());
    }
    if let Some(d) = a.adversarial_delta {
        command.push("--adversarial-delta".into());
        command.push(d.to_string());
    }
    Manifest {
        command,
        seed,
        outputs,
    }
}

pub fn cmd_sens(which: &SensCmd) -> CliResult {
    match which {
        SensCmd::Discrete(a) => sens_discrete_like(a, Scaling::Discrete, "discrete"),
        SensCmd::Hyperbolic(a) => sens_discrete_like(a, Scaling::Hyperbolic, "hyperbolic"),
        SensCmd::Parabolic(a) => sens_parabolic(a),
    }
}

fn sens_discrete_like(a: &SensArgs, scaling: Scaling, kind: &str) -> CliResult {
    let dir = out_dir(&a.out);
    ensure_dir(&dir)?;
    let model = parse_model(&a.model)?;
    let times = model.time_grid();
    let payoff = parse_payoff(&a.payoff, &times)?;
    let penalty = Penalty::parse(&a.penalty)?;
    let spec = match &model {
        ModelSpec::Ensemble(e) => CostSpec::new(a.p, scaling)?.with_horizon(e.horizon())?,
        ModelSpec::Lattice(_) => CostSpec::new(a.p, scaling)?,
    };
    let opts = SensOptions {
        gradient: parse_gradient_backend(&a.backend)?,
        basis: BasisSpec::parse(&a.basis)?,
        regression: RegressionOptions {
            out_of_sample: a.oos,
            ..RegressionOptions::default()
        },
        bootstrap_resamples: a.bootstrap,
        ..SensOptions::default()
    };
    let model_ref = match &model {
        ModelSpec::Lattice(l) => DiscreteModel::Lattice(l),
        ModelSpec::Ensemble(e) => DiscreteModel::Ensemble(e),
    };
    let report = match (scaling, &model) {
        (Scaling::Hyperbolic, ModelSpec::Ensemble(e)) => {
            upsilon_hyperbolic(e, payoff.as_ref(), &spec, &penalty, &opts)?
        }
        _ if a.mart => upsilon_mart(model_ref, payoff.as_ref(), &spec, &penalty, &opts)?,
        _ => upsilon(model_ref, payoff.as_ref(), &spec, &penalty, &opts)?,
    };

    let mut outputs = vec!["report.json".to_string(), "per_time.csv".to_string()];
    write_text(&dir, "report.json", &(report.to_json() + "\n"))?;
    write_text(&dir, "per_time.csv", &per_time_csv(&report))?;

    if a.dump_projection {
        let fields = projected_field_for_dump(&model, payoff.as_ref(), &spec, a.mart, &opts)?;
        write_text(&dir, "projection.csv", &projection_csv(&fields))?;
        outputs.push("projection.csv".into());
    }

    if a.dump_paths {
        let ModelSpec::Ensemble(ens) = &model else {
            return Err(CliError {
                code: 2,
                message: "--dump-paths needs a sampled ensemble model".into(),
            });
        };
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).map_err(|e| CliError {
            code: 2,
            message: format!("cannot serialize paths: {e}"),
        })?;
        write_text(&dir, "paths.csv", &String::from_utf8_lossy(&buf))?;
        outputs.push("paths.csv".into());
    }

    if let Some(delta) = a.adversarial_delta {
        let adv = adversarial_map(
            match &model {
                ModelSpec::Lattice(l) => DiscreteModel::Lattice(l),
                ModelSpec::Ensemble(e) => DiscreteModel::Ensemble(e),
            },
            payoff.as_ref(),
            &spec,
            &penalty,
            delta,
            a.mart,
            &opts,
        )?;
        let audit = cdro_core::oracle::coupling_cost_audit(&adv, &spec);
        let audit_json = serde_json::json!({
            "delta": delta,
            "u": adv.u,
            "realized_gain": adv.realized_gain,
            "realized_cost": adv.realized_cost,
            "budget": audit.budget,
            "pass": audit.pass,
        });
        write_text(&dir, "adversarial_audit.json", &(audit_json.to_string() + "\n"))?;
        outputs.push("adversarial_audit.json".into());
        println!(
            "adversarial delta {}: gain {} cost {} budget {} ({})",
            fmt_sig(delta),
            fmt_sig(adv.realized_gain),
            fmt_sig(adv.realized_cost),
            fmt_sig(audit.budget),
            if audit.pass { "within budget" } else { "OVER BUDGET" }
        );
    }

    sens_manifest(kind, a, model.seed(), outputs).write(&dir)?;
    println!(
        "upsilon{} = {}  (r = {}, u* = {})",
        if a.mart { "_mart" } else { "" },
        fmt_sig(report.upsilon),
        fmt_sig(report.r_norm),
        fmt_sig(report.u_star)
    );
    if let Some(se) = report.diagnostics.bootstrap_se_r {
        println!("bootstrap se(r) = {}", fmt_sig(se));
    }
    if let Some(warn) = &report.diagnostics.growth_warning {
        println!("growth warning: {warn}");
    }
    Ok(())
}

/// Recomputes the projected derivative field that feeds the norm, for the
/// projection.csv dump.
fn projected_field_for_dump(
    model: &ModelSpec,
    payoff: &dyn cdro_core::Payoff,
    spec: &CostSpec,
    mart: bool,
    opts: &SensOptions,
) -> Result<Vec<Field>, CliError> {
    use cdro_core::projection::{exact_projection, regression_projection};
    let fields: Vec<Field> = match model {
        ModelSpec::Lattice(l) => {
            let e = l.enumerate()?;
            let raw: Vec<Field> = e
                .paths
                .iter()
                .map(|p| discrete_malliavin(payoff, p, opts.gradient))
                .collect::<Result<_, _>>()?;
            let optional = exact_projection(&e, &raw, ProjectionKind::Optional)?;
            if mart {
                if (spec.p() - 2.0).abs() < 1e-12 {
                    let pred = exact_projection(&e, &optional, ProjectionKind::Predictable)?;
                    optional
                        .iter()
                        .zip(&pred)
                        .map(|(o, h)| o.sub(h))
                        .collect::<Result<_, _>>()?
                } else {
                    let (h, _) =
                        cdro_core::lq_predictable_projection(&e, &optional, spec.q())?;
                    optional
                        .iter()
                        .zip(&h)
                        .map(|(o, hh)| o.sub(hh))
                        .collect::<Result<_, _>>()?
                }
            } else {
                optional
            }
        }
        ModelSpec::Ensemble(ens) => {
            let raw: Vec<Field> = ens
                .paths
                .iter()
                .map(|p| discrete_malliavin(payoff, p, opts.gradient))
                .collect::<Result<_, _>>()?;
            let optional = regression_projection(
                ens,
                &raw,
                ProjectionKind::Optional,
                &opts.basis,
                &opts.regression,
            )?;
            if mart {
                let pred = regression_projection(
                    ens,
                    &raw,
                    ProjectionKind::Predictable,
                    &opts.basis,
                    &opts.regression,
                )?;
                optional
                    .iter()
                    .zip(&pred)
                    .map(|(o, h)| o.sub(h))
                    .collect::<Result<_, _>>()?
            } else {
                optional
            }
        }
    };
    Ok(fields)
}

fn sens_parabolic(a: &ParabolicArgs) -> CliResult {
    let dir = out_dir(&a.out);
    ensure_dir(&dir)?;
    let model = parse_model(&a.model)?;
    let ModelSpec::Ensemble(ens) = &model else {
        return Err(CliError {
            code: 2,
            message: "parabolic estimator needs a sampled ensemble model".into(),
        });
    };
    let sigma = SigmaSpec::parse(&a.sigma)?;
    sigma.validate(11)?;
    let utility = UtilitySpec::parse(&a.utility)?;
    utility.validate(12)?;
    let penalty = Penalty::parse(&a.penalty)?;
    let basis = if a.basis == "poly:3:state" {
        parabolic_basis()
    } else {
        BasisSpec::parse(&a.basis)?
    };
    let mut report = upsilon_mart_parabolic(ens, &sigma, &utility, &penalty, &basis, a.bootstrap)?;
    if a.surrogate {
        let surrogate =
            parabolic_discrete_surrogate(ens, &sigma, &utility, &penalty, &SensOptions::default())?;
        report.diagnostics.notes.push(format!(
            "discrete-time surrogate (diagnostic only, not an estimator): {}",
            fmt_sig(surrogate)
        ));
    }

    write_text(&dir, "report.json", &(report.to_json() + "\n"))?;
    let mut phi_csv = String::from("k,t,phi_sq_mean,contribution\n");
    for (k, c) in report.per_time_contribution.iter().enumerate() {
        let dt = ens.dt(k + 1);
        let _ = writeln!(
            phi_csv,
            "{k},{},{},{}",
            fmt_sig(ens.time_grid[k]),
            fmt_sig(c / dt),
            fmt_sig(*c)
        );
    }
    write_text(&dir, "per_time.csv", &phi_csv)?;

    let mut command = vec![
        "sens".to_string(),
        "parabolic".into(),
        "--model".into(),
        a.model.clone(),
        "--sigma".into(),
        a.sigma.clone(),
        "--utility".into(),
        a.utility.clone(),
        "--penalty".into(),
        a.penalty.clone(),
        "--basis".into(),
        a.basis.clone(),
        "--bootstrap".into(),
        a.bootstrap.to_string(),
    ];
    if a.surrogate {
        command.push("--surrogate".into());
    }
    Manifest {
        command,
        seed: model.seed(),
        outputs: vec!["report.json".into(), "per_time.csv".into()],
    }
    .write(&dir)?;

    println!(
        "upsilon_mart = {}  (r = {}, u* = {})",
        fmt_sig(report.upsilon),
        fmt_sig(report.r_norm),
        fmt_sig(report.u_star)
    );
    for note in &report.diagnostics.notes {
        println!("note: {note}");
    }
    Ok(())
}

pub fn cmd_repro(target: ReproTarget, out: &Option<PathBuf>) -> CliResult {
    let dir = out_dir(out);
    ensure_dir(&dir)?;
    match target {
        ReproTarget::AsianFigure => repro_asian_figure(&dir),
        ReproTarget::Merton => repro_scalar(
            &dir,
            "merton",
            0.5,
            0.01,
            || {
                let ens = SampleEnsemble::brownian(1.0, 64, 1, 100_000, 414141)?;
                let f = cdro_core::payoffs::MertonLogWealth::new(0.5, 0.02, 1.0, 1.0);
                let spec = CostSpec::new(2.0, Scaling::Hyperbolic)?;
                let rep = upsilon_hyperbolic(
                    &ens,
                    &f,
                    &spec,
                    &Penalty::indicator(1.0)?,
                    &SensOptions::default(),
                )?;
                Ok(rep.upsilon)
            },
        ),
        ReproTarget::Logcontract => repro_scalar(
            &dir,
            "logcontract",
            0.04,
            0.02,
            || {
                let ens = SampleEnsemble::brownian(1.0, 64, 1, 100_000, 424242)?;
                let rep = upsilon_mart_parabolic(
                    &ens,
                    &SigmaSpec::constant(0.2),
                    &UtilitySpec::quadratic(),
                    &Penalty::indicator(1.0)?,
                    &parabolic_basis(),
                    0,
                )?;
                Ok(rep.upsilon)
            },
        ),
        ReproTarget::Quadvar => repro_scalar(
            &dir,
            "quadvar",
            1.0,
            0.01,
            || {
                let ens = SampleEnsemble::brownian(1.0, 64, 1, 100_000, 434343)?;
                let rep = upsilon_mart_parabolic(
                    &ens,
                    &SigmaSpec::constant(1.0),
                    &UtilitySpec::quadratic(),
                    &Penalty::indicator(1.0)?,
                    &parabolic_basis(),
                    0,
                )?;
                Ok(rep.upsilon)
            },
        ),
    }
}

fn repro_scalar(
    dir: &Path,
    name: &str,
    closed_form: f64,
    rel_tol: f64,
    compute: impl FnOnce() -> Result<f64, CdroError>,
) -> CliResult {
    let computed = compute()?;
    let rel_err = (computed - closed_form).abs() / closed_form.abs();
    let json = serde_json::json!({
        "target": name,
        "computed": computed,
        "closed_form": closed_form,
        "rel_err": rel_err,
    });
    write_text(dir, &format!("{name}.json"), &(json.to_string() + "\n"))?;
    Manifest {
        command: vec!["repro".into(), name.into()],
        seed: None,
        outputs: vec![format!("{name}.json")],
    }
    .write(dir)?;
    println!(
        "{name}: computed {} vs closed form {} (rel err {})",
        fmt_sig(computed),
        fmt_sig(closed_form),
        fmt_sig(rel_err)
    );
    if rel_err > rel_tol {
        return Err(verification_failure(format!(
            "{name}: relative error {rel_err:.3e} exceeds {rel_tol}"
        )));
    }
    Ok(())
}

fn repro_asian_figure(dir: &Path) -> CliResult {
    let n = 10;
    let model = LatticeModel::symmetric_walk(n, 1.0)?;
    let e = model.enumerate()?;
    let spec = CostSpec::discrete(2.0)?;
    let penalty = Penalty::indicator(1.0)?;
    let opts = SensOptions::default();
    let (lo, hi) = e
        .paths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            let v = p.average()[0];
            (a.min(v), b.max(v))
        });
    let mut csv = String::from("K,upsilon_mart,parametric\n");
    let mut violations = Vec::new();
    for i in 0..21 {
        // half-gridstep offset keeps every strike off the mean's atoms
        let k = lo + (i as f64 + 0.5) * (hi - lo) / 21.0;
        let rep = upsilon_mart(
            DiscreteModel::Lattice(&model),
            &AsianCall::new(k),
            &spec,
            &penalty,
            &opts,
        )?;
        // price slope in the jump size, per unit of adapted transport
        // distance (the jump perturbation j -> 1 + delta/sqrt(N) moves the
        // model by exactly delta)
        let parametric: f64 = e
            .paths
            .iter()
            .zip(&e.probs)
            .map(|(p, &w)| {
                let mean = p.average()[0];
                if mean >= k {
                    w * mean
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / (n as f64).sqrt();
        if rep.upsilon < parametric {
            violations.push(k);
        }
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_sig(k),
            fmt_sig(rep.upsilon),
            fmt_sig(parametric)
        );
    }
    write_text(dir, "asian_figure.csv", &csv)?;
    Manifest {
        command: vec!["repro".into(), "asian-figure".into()],
        seed: None,
        outputs: vec!["asian_figure.csv".into()],
    }
    .write(dir)?;
    println!("asian-figure: 21 strikes written to asian_figure.csv");
    if !violations.is_empty() {
        return Err(verification_failure(format!(
            "dominance upsilon_mart >= parametric fails at strikes {violations:?}"
        )));
    }
    println!("dominance upsilon_mart >= parametric holds at every strike");
    Ok(())
}

pub fn cmd_oracle(a: &OracleArgs) -> CliResult {
    let dir = out_dir(&a.out);
    ensure_dir(&dir)?;
    let model = parse_model(&a.model)?;
    let ModelSpec::Lattice(lattice) = &model else {
        return Err(CliError {
            code: 2,
            message: "the oracle needs an exact lattice model".into(),
        });
    };
    let times = model.time_grid();
    let payoff = parse_payoff(&a.payoff, &times)?;
    let penalty = Penalty::parse(&a.penalty)?;
    let spec = CostSpec::discrete(a.p)?;
    let deltas: Vec<f64> = a
        .deltas
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CdroError::Config(format!("bad delta {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let opts = OracleOptions {
        seed: a.seed,
        ..OracleOptions::default()
    };
    let rep = slope_check(lattice, payoff.as_ref(), &spec, &penalty, &deltas, a.mart, &opts)?;

    println!("delta          v_hat             v_hat - v0");
    let mut csv = String::from("delta,v_hat,gain\n");
    for (d, v) in rep.deltas.iter().zip(&rep.values) {
        println!("{:<14} {:<17} {}", fmt_sig(*d), fmt_sig(*v), fmt_sig(v - rep.v0));
        let _ = writeln!(csv, "{},{},{}", fmt_sig(*d), fmt_sig(*v), fmt_sig(v - rep.v0));
    }
    let status = if rep.pass { "PASS" } else { "FAIL" };
    println!(
        "slope {} vs upsilon{} {}  rel_err {}  [{status}]{}",
        fmt_sig(rep.slope),
        if a.mart { "_mart" } else { "" },
        fmt_sig(rep.upsilon),
        fmt_sig(rep.rel_err),
        if rep.monotone { "" } else { "  (non-monotone ladder: likely ascent failure)" }
    );
    write_text(&dir, "oracle.csv", &csv)?;
    let json = serde_json::json!({
        "v0": rep.v0,
        "slope": rep.slope,
        "curvature": rep.curvature,
        "upsilon": rep.upsilon,
        "rel_err": rep.rel_err,
        "pass": rep.pass,
        "monotone": rep.monotone,
    });
    write_text(&dir, "oracle.json", &(json.to_string() + "\n"))?;
    let mut command = vec![
        "oracle".to_string(),
        "check".into(),
        "--model".into(),
        a.model.clone(),
        "--payoff".into(),
        a.payoff.clone(),
        "--p".into(),
        a.p.to_string(),
        "--penalty".into(),
        a.penalty.clone(),
        "--deltas".into(),
        a.deltas.clone(),
        "--seed".into(),
        a.seed.to_string(),
    ];
    if a.mart {
        command.push("--mart".into());
    }
    Manifest {
        command,
        seed: Some(a.seed),
        outputs: vec!["oracle.csv".into(), "oracle.json".into()],
    }
    .write(&dir)?;
    if !rep.pass {
        return Err(verification_failure(format!(
            "oracle slope {} disagrees with upsilon {} (rel err {:.3e})",
            rep.slope, rep.upsilon, rep.rel_err
        )));
    }
    Ok(())
}
