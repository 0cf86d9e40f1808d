//! The scenario registry and per-scenario runners. Every runner produces
//! deterministic file bodies for a fixed (config, seed, build); wall-clock
//! stamps live in the manifest only.

use crate::config::{experiment_block, EvolveBlock, Exponent, InitialDataBlock, ScenarioConfig};
use crate::CliError;
use fracwave::diagnostics::{
    decay_scan_from_values, energy, mass, mixed_norm, morawetz_action, morawetz_rhs,
    records_to_csv, records_to_jsonl, scattering_extract, DiagnosticsRecord, NormSpec,
    SpacetimeAccumulator, WeightSpec,
};
use fracwave::evolve::{evolve, evolve_observed, EvolveOptions};
use fracwave::grid::{boundary_leak, make_grid, sample_function, Field, WaveguideGrid};
use fracwave::operators::{lambda_max, Multiplier, QuadratureSpec};
use fracwave::strichartz::{
    bilinear_experiment, measure_mixed_strichartz, measure_scaling, PropagatorSign, ScalingConfig,
    StrichartzPrediction,
};
use fracwave::wellposedness::{
    contraction_metric, picard_iterate, solve_index_system, zt_norms, PicardConfig,
    WellposednessError,
};
use fracwave::ModelParams;
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

pub struct ScenarioInfo {
    pub name: &'static str,
    pub required_keys: &'static str,
    pub checks: &'static str,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "conservation",
        required_keys: "grid, model, initial_data, evolve, seed",
        checks: "mass and Hamiltonian drift of the split-step flow",
    },
    ScenarioInfo {
        name: "morawetz-identity",
        required_keys: "grid, model, initial_data, evolve, seed; experiment.probe_times",
        checks: "d/dt of the weighted momentum action against its resolvent-quadrature identity",
    },
    ScenarioInfo {
        name: "morawetz-inequality",
        required_keys: "grid, model, initial_data, evolve, seed",
        checks: "weighted space-time integral bounded by the supremum H^sigma mass",
    },
    ScenarioInfo {
        name: "decay",
        required_keys: "grid, model, initial_data, evolve, seed; experiment.q",
        checks: "monotone trend of L^q norms along the defocusing flow",
    },
    ScenarioInfo {
        name: "scattering",
        required_keys: "grid, model, initial_data, evolve, seed; experiment.sample_times",
        checks: "Cauchy differences of linear pull-back profiles in H^sigma",
    },
    ScenarioInfo {
        name: "strichartz-scaling",
        required_keys: "grid, model, seed; experiment.n_list, experiment.trials",
        checks: "dyadic space-time scaling of the linear flow with both dispersion compensations",
    },
    ScenarioInfo {
        name: "strichartz-mixed",
        required_keys: "grid, model, seed; experiment.pairs, experiment.lambdas",
        checks: "mixed-norm space-time bounds over a rescaled radial family",
    },
    ScenarioInfo {
        name: "bilinear",
        required_keys: "grid, model, seed; experiment.n, experiment.k_list",
        checks: "K-scaling and N-uniformity of products of frequency-separated linear waves",
    },
    ScenarioInfo {
        name: "picard",
        required_keys: "grid, model, initial_data, seed; experiment.t_final, experiment.dt",
        checks: "contraction of the Duhamel fixed-point iteration and scheme norms",
    },
    ScenarioInfo {
        name: "index-system",
        required_keys: "grid, model, seed",
        checks: "feasibility of the exponent systems behind the contraction scheme",
    },
];

pub fn scenario_table() -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<20} {:<70} checks", "scenario", "required keys");
    for s in SCENARIOS {
        let _ = writeln!(out, "{:<20} {:<70} {}", s.name, s.required_keys, s.checks);
    }
    out
}

pub struct ScenarioOutput {
    /// (file name, file bytes)
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
    /// true when the run ended in a numerical abort (exit code 3)
    pub aborted: bool,
}

fn build_grid(cfg: &ScenarioConfig) -> Result<Arc<WaveguideGrid>, CliError> {
    make_grid(
        cfg.grid.d,
        cfg.grid.n,
        cfg.grid.half_length,
        cfg.grid.nx,
        cfg.grid.ny,
    )
    .map_err(|e| CliError::Config(format!("grid: {e}")))
}

fn build_params(cfg: &ScenarioConfig) -> Result<ModelParams, CliError> {
    ModelParams::new(
        cfg.model.sigma,
        cfg.model.mu,
        cfg.model.p,
        cfg.grid.d,
        cfg.grid.n,
    )
    .map_err(|e| CliError::Config(format!("model: {e}")))
}

fn build_initial(
    cfg: &ScenarioConfig,
    grid: &Arc<WaveguideGrid>,
) -> Result<Field, CliError> {
    let block: &InitialDataBlock = cfg
        .initial_data
        .as_ref()
        .ok_or_else(|| CliError::Config("this scenario needs an initial_data block".into()))?;
    if block.kind != "gaussian" {
        return Err(CliError::Config(format!(
            "initial_data.kind {:?} unknown; supported: \"gaussian\"",
            block.kind
        )));
    }
    let amp = block.amplitude;
    let w2 = block.width * block.width;
    let yc = block.y_cosine;
    Ok(sample_function(grid, move |x, y| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let yfac = if y.is_empty() { 1.0 } else { 1.0 + yc * y[0].cos() };
        Complex64::new(amp * (-r2 / w2).exp() * yfac, 0.0)
    }))
}

fn evolve_block(cfg: &ScenarioConfig) -> Result<&EvolveBlock, CliError> {
    cfg.evolve
        .as_ref()
        .ok_or_else(|| CliError::Config("this scenario needs an evolve block".into()))
}

fn fmt_rows(header: &str, rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioOutput, CliError> {
    match cfg.scenario.as_str() {
        "conservation" => conservation(cfg),
        "morawetz-identity" => morawetz_identity(cfg),
        "morawetz-inequality" => morawetz_inequality(cfg),
        "decay" => decay(cfg),
        "scattering" => scattering(cfg),
        "strichartz-scaling" => strichartz_scaling(cfg, seed),
        "strichartz-mixed" => strichartz_mixed(cfg),
        "bilinear" => bilinear(cfg, seed),
        "picard" => picard(cfg),
        "index-system" => index_system(cfg),
        other => Err(CliError::Config(format!(
            "unknown scenario {other:?}; `fracwave list` shows the registry"
        ))),
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConservationExp {
    leak_window_fraction: f64,
    leak_threshold: f64,
}

impl Default for ConservationExp {
    fn default() -> Self {
        ConservationExp {
            leak_window_fraction: 0.8,
            leak_threshold: 1e-8,
        }
    }
}

fn conservation(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let exp: ConservationExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let params = build_params(cfg)?;
    let mult = Multiplier::new(&grid, params.sigma).map_err(CliError::config_from)?;
    let u0 = build_initial(cfg, &grid)?;
    let ev = evolve_block(cfg)?;
    let opts = EvolveOptions {
        leak_window_fraction: exp.leak_window_fraction,
        leak_threshold: exp.leak_threshold,
        ..EvolveOptions::default()
    };
    let traj = evolve(&u0, &mult, &params, ev.t_final, ev.dt, ev.record_stride, &opts)
        .map_err(CliError::numerical_from)?;
    let weight = WeightSpec::half_square();
    let l4 = NormSpec::lebesgue(4.0);
    let mut records = Vec::new();
    for (t, f) in traj.times.iter().zip(&traj.snapshots) {
        let mut norms = BTreeMap::new();
        norms.insert(l4.label(), mixed_norm(f, &l4).map_err(CliError::numerical_from)?);
        records.push(DiagnosticsRecord {
            t: *t,
            mass: mass(f),
            energy: energy(f, &mult, &params).map_err(CliError::numerical_from)?,
            morawetz_action: morawetz_action(f, &weight).map_err(CliError::numerical_from)?,
            morawetz_rhs: None,
            boundary_leak: boundary_leak(f, exp.leak_window_fraction)
                .map_err(CliError::numerical_from)?,
            norms,
        });
    }
    let m0 = records.first().map(|r| r.mass).unwrap_or(0.0);
    let e0 = records.first().map(|r| r.energy).unwrap_or(0.0);
    let mass_drift = records
        .iter()
        .map(|r| (r.mass - m0).abs() / m0)
        .fold(0.0, f64::max);
    let energy_drift = records
        .iter()
        .map(|r| (r.energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let summary = json!({
        "mass_drift": mass_drift,
        "energy_drift": energy_drift,
        "records": records.len(),
        "aborted": traj.aborted.is_some(),
    });
    Ok(ScenarioOutput {
        files: vec![
            ("records.csv".into(), records_to_csv(&records).into_bytes()),
            ("records.jsonl".into(), records_to_jsonl(&records).into_bytes()),
            ("summary.json".into(), pretty(&summary)),
        ],
        warnings: traj.warnings.clone(),
        aborted: traj.aborted.is_some(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityExp {
    probe_times: Vec<f64>,
    #[serde(default = "default_quad_tol")]
    quad_tol: f64,
}

fn default_quad_tol() -> f64 {
    1e-7
}

fn morawetz_identity(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let exp: IdentityExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let params = build_params(cfg)?;
    let mult = Multiplier::new(&grid, params.sigma).map_err(CliError::config_from)?;
    let u0 = build_initial(cfg, &grid)?;
    let ev = evolve_block(cfg)?;
    let weight = WeightSpec::half_square();
    let quad = QuadratureSpec::with_tolerance(params.sigma, lambda_max(&grid), exp.quad_tol);
    let dt = ev.dt;
    for &tp in &exp.probe_times {
        let steps = tp / dt;
        if (steps - steps.round()).abs() > 1e-9 || tp <= dt || tp >= ev.t_final {
            return Err(CliError::Config(format!(
                "probe time {tp} must sit on the step lattice strictly inside (dt, t_final)"
            )));
        }
    }
    let mut action: Vec<(f64, f64)> = Vec::new();
    let mut rhs: Vec<(f64, f64)> = Vec::new();
    let mut failure: Option<CliError> = None;
    let (warnings, abort) = evolve_observed(
        &u0,
        &mult,
        &params,
        ev.t_final,
        dt,
        ev.record_stride,
        &EvolveOptions::default(),
        |evn| {
            if failure.is_some() {
                return;
            }
            let near = exp
                .probe_times
                .iter()
                .any(|&tp| (evn.time - tp).abs() < 1.5 * dt + 1e-12);
            if near {
                match morawetz_action(evn.field, &weight) {
                    Ok(a) => action.push((evn.time, a)),
                    Err(e) => failure = Some(CliError::numerical_from(e)),
                }
                if exp.probe_times.iter().any(|&tp| (evn.time - tp).abs() < 1e-9) {
                    match morawetz_rhs(evn.field, &weight, &params, &quad) {
                        Ok(r) => rhs.push((evn.time, r)),
                        Err(e) => failure = Some(CliError::numerical_from(e)),
                    }
                }
            }
        },
    )
    .map_err(CliError::numerical_from)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &(tp, r) in &rhs {
        let lookup = |t: f64| {
            action
                .iter()
                .find(|(tt, _)| (tt - t).abs() < 1e-9)
                .map(|(_, a)| *a)
        };
        if let (Some(a_m), Some(a_p)) = (lookup(tp - dt), lookup(tp + dt)) {
            let fd = (a_p - a_m) / (2.0 * dt);
            let resid = (r - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(resid);
            rows.push(vec![tp, a_m, a_p, fd, r, resid]);
        }
    }
    let summary = json!({
        "worst_residual": worst,
        "probes": rows.len(),
        "aborted": abort.is_some(),
    });
    Ok(ScenarioOutput {
        files: vec![
            (
                "identity.csv".into(),
                fmt_rows("t,action_before,action_after,fd,rhs,residual", &rows),
            ),
            ("summary.json".into(), pretty(&summary)),
        ],
        warnings,
        aborted: abort.is_some(),
    })
}

fn morawetz_inequality(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let grid = build_grid(cfg)?;
    let params = build_params(cfg)?;
    let mult = Multiplier::new(&grid, params.sigma).map_err(CliError::config_from)?;
    let u0 = build_initial(cfg, &grid)?;
    let ev = evolve_block(cfg)?;
    let weight = WeightSpec::abs_x_regularized_for_grid(&grid);
    let mut acc = SpacetimeAccumulator::new(weight, params).map_err(CliError::config_from)?;
    let mut failure: Option<CliError> = None;
    let (warnings, abort) = evolve_observed(
        &u0,
        &mult,
        &params,
        ev.t_final,
        ev.dt,
        ev.record_stride,
        &EvolveOptions::default(),
        |evn| {
            if failure.is_none() && evn.is_record {
                if let Err(e) = acc.push(evn.time, evn.field) {
                    failure = Some(CliError::numerical_from(e));
                }
            }
        },
    )
    .map_err(CliError::numerical_from)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let report = acc.report();
    let rows: Vec<Vec<f64>> = report.samples.iter().map(|&(t, g)| vec![t, g]).collect();
    let summary = json!({
        "value": report.value,
        "sup_hsigma": report.sup_hsigma,
        "ratio": report.ratio,
        "aborted": abort.is_some(),
    });
    Ok(ScenarioOutput {
        files: vec![
            ("spacetime.csv".into(), fmt_rows("t,integrand", &rows)),
            ("summary.json".into(), pretty(&summary)),
        ],
        warnings,
        aborted: abort.is_some(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayExp {
    q: f64,
}

fn decay(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let exp: DecayExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let params = build_params(cfg)?;
    let mult = Multiplier::new(&grid, params.sigma).map_err(CliError::config_from)?;
    let u0 = build_initial(cfg, &grid)?;
    let ev = evolve_block(cfg)?;
    let spec = NormSpec::lebesgue(exp.q);
    spec.validate().map_err(CliError::config_from)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut failure: Option<CliError> = None;
    let (mut warnings, abort) = evolve_observed(
        &u0,
        &mult,
        &params,
        ev.t_final,
        ev.dt,
        ev.record_stride,
        &EvolveOptions::default(),
        |evn| {
            if failure.is_none() && evn.is_record {
                match mixed_norm(evn.field, &spec) {
                    Ok(v) => {
                        times.push(evn.time);
                        values.push(v);
                    }
                    Err(e) => failure = Some(CliError::numerical_from(e)),
                }
            }
        },
    )
    .map_err(CliError::numerical_from)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let scan =
        decay_scan_from_values(&times, &values, exp.q, &params).map_err(CliError::numerical_from)?;
    if !scan.in_theorem_band {
        warnings.push(format!(
            "q = {} sits outside the decay band (2, {:.4}]; computed anyway",
            exp.q, scan.q_bound
        ));
    }
    let rows: Vec<Vec<f64>> = times
        .iter()
        .zip(&values)
        .map(|(&t, &v)| vec![t, v])
        .collect();
    let summary = json!({
        "q": exp.q,
        "q_bound": scan.q_bound,
        "in_theorem_band": scan.in_theorem_band,
        "transient_index": scan.transient_index,
        "decreasing_fraction": scan.decreasing_fraction,
        "initial": values.first(),
        "final": values.last(),
        "aborted": abort.is_some(),
    });
    Ok(ScenarioOutput {
        files: vec![
            ("decay.csv".into(), fmt_rows("t,norm", &rows)),
            ("summary.json".into(), pretty(&summary)),
        ],
        warnings,
        aborted: abort.is_some(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScatteringExp {
    sample_times: Vec<f64>,
    #[serde(default = "default_window")]
    leak_window_fraction: f64,
    #[serde(default = "default_leak")]
    leak_threshold: f64,
}

fn default_window() -> f64 {
    0.8
}
fn default_leak() -> f64 {
    1e-4
}

fn scattering(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let exp: ScatteringExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let params = build_params(cfg)?;
    let mult = Multiplier::new(&grid, params.sigma).map_err(CliError::config_from)?;
    let u0 = build_initial(cfg, &grid)?;
    let ev = evolve_block(cfg)?;
    let mut samples: Vec<(f64, Field)> = Vec::new();
    let (mut warnings, abort) = evolve_observed(
        &u0,
        &mult,
        &params,
        ev.t_final,
        ev.dt,
        ev.record_stride,
        &EvolveOptions::default(),
        |evn| {
            if exp
                .sample_times
                .iter()
                .any(|&ts| (evn.time - ts).abs() < 1e-9)
            {
                samples.push((evn.time, evn.field.clone()));
            }
        },
    )
    .map_err(CliError::numerical_from)?;
    let report = scattering_extract(
        &samples,
        &mult,
        &params,
        exp.leak_window_fraction,
        exp.leak_threshold,
    )
    .map_err(CliError::numerical_from)?;
    if report.truncated {
        warnings.push("sample list truncated at the leak cutoff".into());
    }
    let mut rows = Vec::new();
    for (i, t) in report.times.iter().enumerate() {
        let delta = if i == 0 { f64::NAN } else { report.deltas[i - 1] };
        rows.push(vec![*t, report.profile_norms[i], delta]);
    }
    let summary = json!({
        "deltas": report.deltas,
        "strictly_decreasing": report.deltas.windows(2).all(|w| w[1] < w[0]),
        "truncated": report.truncated,
        "aborted": abort.is_some(),
    });
    Ok(ScenarioOutput {
        files: vec![
            (
                "pullbacks.csv".into(),
                fmt_rows("t,profile_hsigma,delta", &rows),
            ),
            ("summary.json".into(), pretty(&summary)),
        ],
        warnings,
        aborted: abort.is_some() || report.truncated,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingExp {
    n_list: Vec<f64>,
    trials: usize,
    #[serde(default = "default_time_samples")]
    time_samples: usize,
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    sign: Option<String>,
}

fn default_time_samples() -> usize {
    64
}

fn strichartz_scaling(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioOutput, CliError> {
    let exp: ScalingExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let pred = StrichartzPrediction::new(cfg.model.sigma, cfg.grid.d + cfg.grid.n, cfg.grid.n);
    let p = exp.p.unwrap_or_else(|| pred.p_endpoint());
    let mut config = ScalingConfig::new(exp.n_list.clone(), p, exp.trials, seed);
    config.time_samples = exp.time_samples;
    config.sign = match exp.sign.as_deref() {
        None | Some("plus") => PropagatorSign::Plus,
        Some("minus") => PropagatorSign::Minus,
        Some(other) => {
            return Err(CliError::Config(format!(
                "experiment.sign {other:?} unknown; use \"plus\" or \"minus\""
            )))
        }
    };
    let report = measure_scaling(&grid, &pred, &config).map_err(CliError::numerical_from)?;
    let rows: Vec<Vec<f64>> = report
        .samples
        .iter()
        .map(|s| vec![s.n_dyadic, s.trial as f64, s.norm])
        .collect();
    let fit = json!({
        "p": p,
        "predicted_slope": report.predicted_slope,
        "time_samples": report.time_samples,
        "trials": report.trials,
        "raw": {"slope": report.raw.slope, "band95": report.raw.band95, "per_n_median": report.raw.per_n_median},
        "hessian_compensated": {"slope": report.hessian_compensated.slope, "band95": report.hessian_compensated.band95},
        "symbol_compensated": {"slope": report.symbol_compensated.slope, "band95": report.symbol_compensated.band95},
        "flatter_compensation": if report.hessian_compensated.slope.abs() <= report.symbol_compensated.slope.abs() {"hessian"} else {"symbol"},
    });
    Ok(ScenarioOutput {
        files: vec![
            ("samples.csv".into(), fmt_rows("n,trial,norm", &rows)),
            ("fit.json".into(), pretty(&fit)),
        ],
        warnings: Vec::new(),
        aborted: false,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixedPair {
    p: Exponent,
    q: Exponent,
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixedExp {
    pairs: Vec<MixedPair>,
    lambdas: Vec<f64>,
    #[serde(default = "one_f")]
    width: f64,
    #[serde(default = "default_time_samples")]
    time_samples: usize,
}

fn one_f() -> f64 {
    1.0
}

fn strichartz_mixed(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let exp: MixedExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let mult = Multiplier::new(&grid, cfg.model.sigma).map_err(CliError::config_from)?;
    let family: Vec<Field> = exp
        .lambdas
        .iter()
        .map(|&l| {
            let w2 = exp.width * exp.width;
            sample_function(&grid, move |x, _| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Complex64::new((-l * l * r2 / w2).exp(), 0.0)
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for pair in &exp.pairs {
        let p = pair.p.value().map_err(CliError::Config)?;
        let q = pair.q.value().map_err(CliError::Config)?;
        let rep = measure_mixed_strichartz(&family, &mult, p, q, pair.gamma, exp.time_samples)
            .map_err(CliError::numerical_from)?;
        for (lam, ratio) in exp.lambdas.iter().zip(&rep.ratios) {
            rows.push(vec![p, q, pair.gamma, *lam, *ratio]);
        }
        summaries.push(json!({
            "p": exp_json(p), "q": exp_json(q), "gamma": pair.gamma,
            "max_ratio": rep.max_ratio, "min_ratio": rep.min_ratio,
        }));
    }
    Ok(ScenarioOutput {
        files: vec![
            ("ratios.csv".into(), fmt_rows("p,q,gamma,lambda,ratio", &rows)),
            ("summary.json".into(), pretty(&json!({"pairs": summaries}))),
        ],
        warnings: Vec::new(),
        aborted: false,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BilinearExp {
    n: f64,
    k_list: Vec<f64>,
    trials: usize,
    #[serde(default = "default_time_samples")]
    time_samples: usize,
}

fn bilinear(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioOutput, CliError> {
    let exp: BilinearExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let report = bilinear_experiment(
        &grid,
        cfg.model.sigma,
        exp.n,
        &exp.k_list,
        exp.trials,
        exp.time_samples,
        seed,
    )
    .map_err(CliError::numerical_from)?;
    let rows: Vec<Vec<f64>> = report
        .samples
        .iter()
        .map(|s| vec![s.k_dyadic, s.trial as f64, s.norm])
        .collect();
    let fit = json!({
        "n": report.n_dyadic,
        "k_slope": report.k_slope,
        "separated": report.separated,
        "per_k_median": report.per_k_median,
    });
    Ok(ScenarioOutput {
        files: vec![
            ("samples.csv".into(), fmt_rows("k,trial,norm", &rows)),
            ("fit.json".into(), pretty(&fit)),
        ],
        warnings: if report.separated {
            Vec::new()
        } else {
            vec!["some K exceed N/4; scales are not separated".into()]
        },
        aborted: false,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PicardExp {
    t_final: f64,
    dt: f64,
    record_stride: usize,
    iterations: usize,
}

fn picard(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let exp: PicardExp = experiment_block(&cfg.experiment).map_err(CliError::Config)?;
    let grid = build_grid(cfg)?;
    let params = build_params(cfg)?;
    let mult = Multiplier::new(&grid, params.sigma).map_err(CliError::config_from)?;
    let u0 = build_initial(cfg, &grid)?;
    let (mq, mr) = contraction_metric(params.sigma, params.d, params.p);
    let pc = PicardConfig {
        t_final: exp.t_final,
        dt: exp.dt,
        record_stride: exp.record_stride,
        iterations: exp.iterations,
        metric_q: mq,
        metric_r: mr,
    };
    let rep = picard_iterate(&u0, &mult, &params, &pc).map_err(CliError::numerical_from)?;
    // scheme norms of the final iterate; exponents fall back with the metric
    let delta = if params.sigma > 0.5 {
        0.5 * (params.sigma - 0.5)
    } else {
        0.25
    };
    let z = zt_norms(
        &rep.final_iterate,
        &rep.times,
        mq,
        mr,
        f64::INFINITY,
        2.0,
        delta,
        params.sigma,
    )
    .map_err(CliError::numerical_from)?;
    let mut jsonl = String::new();
    for (k, d) in rep.distances.iter().enumerate() {
        let rho = if k == 0 { None } else { Some(rep.ratios[k - 1]) };
        let line = json!({"k": k, "distance": d, "rho": rho,
            "x_t": z.x_t, "y1_t": z.y1_t, "y2_t": z.y2_t, "z_t": z.z_t});
        jsonl.push_str(&serde_json::to_string(&line).expect("serializes"));
        jsonl.push('\n');
    }
    let summary = json!({
        "metric": {"q": if mq.is_finite() {json!(mq)} else {json!("inf")}, "r": mr},
        "ratios": rep.ratios,
        "diverged": rep.diverged,
        "z_t": z.z_t,
    });
    Ok(ScenarioOutput {
        files: vec![
            ("iterations.jsonl".into(), jsonl.into_bytes()),
            ("summary.json".into(), pretty(&summary)),
        ],
        warnings: Vec::new(),
        aborted: rep.diverged,
    })
}

fn index_system(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    let out = match solve_index_system(cfg.model.sigma, cfg.grid.d, cfg.model.p) {
        Ok(sys) => {
            let validators: Vec<_> = sys
                .validate()
                .into_iter()
                .map(|(name, ok)| json!({"name": name, "ok": ok}))
                .collect();
            json!({"feasible": true, "system": sys, "validators": validators})
        }
        Err(WellposednessError::Infeasible(cert)) => {
            json!({"feasible": false, "certificate": *cert})
        }
        Err(e) => return Err(CliError::Config(format!("{e}"))),
    };
    Ok(ScenarioOutput {
        files: vec![("system.json".into(), pretty(&out))],
        warnings: Vec::new(),
        aborted: false,
    })
}

fn exp_json(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("inf")
    }
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("json serializes");
    bytes.push(b'\n');
    bytes
}
