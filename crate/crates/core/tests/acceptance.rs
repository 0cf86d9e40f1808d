//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured figures. Criteria sharing the long defocusing run reuse one
//! lazily-built fixture; a global lock keeps the timed sections serialized
//! so wall-clock budgets are measured in isolation.
//!
//! Run with `cargo test -p fracwave --test acceptance -- --nocapture`.

use fracwave::diagnostics::{
    decay_scan_from_values, energy, mass, mixed_norm, morawetz_action, morawetz_rhs,
    scattering_extract, sobolev_norm, NormSpec, WeightSpec,
};
use fracwave::evolve::{evolve, evolve_observed, EvolveOptions};
use fracwave::grid::{make_grid, sample_function, Field, Space, WaveguideGrid};
use fracwave::operators::{
    apply_multiplier, balakrishnan_apply, lambda_max, lp_project, DyadicProjector, Multiplier,
    ProjectorKind, QuadratureSpec,
};
use fracwave::rng::CounterRng;
use fracwave::strichartz::{bilinear_experiment, measure_scaling, ScalingConfig, StrichartzPrediction};
use fracwave::wellposedness::{contraction_metric, picard_iterate, PicardConfig};
use fracwave::ModelParams;
use num_complex::Complex64;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

const SIGMA: f64 = 0.75;
const PROBES: [f64; 3] = [0.48, 0.96, 1.44];
const PULLBACK_TIMES: [f64; 4] = [0.16, 0.32, 0.64, 1.28];

struct RunStats {
    elapsed_secs: f64,
    mass_drift: f64,
    energy_drift: f64,
    /// per probe: (t, dM/dt by centered difference, identity rhs)
    probes: Vec<(f64, f64, f64)>,
    /// per record point: (t, L⁴ norm, spacetime integrand, ‖u‖_{H^σ})
    records: Vec<(f64, f64, f64, f64)>,
    pullbacks: Vec<(f64, Field)>,
}

struct BigRun {
    params: ModelParams,
    mult: Multiplier,
    coarse: RunStats,
    fine: RunStats,
}

fn big_initial_datum(grid: &Arc<WaveguideGrid>) -> Field {
    sample_function(grid, |x, y| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new((-r2).exp() * (1.0 + 0.5 * y[0].cos()), 0.0)
    })
}

fn run_big(dt: f64) -> RunStats {
    let grid = make_grid(3, 1, 12.0, 64, 16).unwrap();
    let params = ModelParams::new(SIGMA, -1, 1.5, 3, 1).unwrap();
    let mult = Multiplier::new(&grid, SIGMA).unwrap();
    let u0 = big_initial_datum(&grid);
    let weight = WeightSpec::half_square();
    let reg = WeightSpec::abs_x_regularized_for_grid(&grid);
    let quad = QuadratureSpec::with_tolerance(SIGMA, lambda_max(&grid), 1e-7);
    let l4 = NormSpec::lebesgue(4.0);
    let record_stride = (0.16 / dt).round() as usize;
    let e0 = energy(&u0, &mult, &params).unwrap();
    let m0 = mass(&u0);

    let mut mass_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    let mut action_hist: Vec<(f64, f64)> = Vec::new();
    let mut rhs_hist: Vec<(f64, f64)> = Vec::new();
    let mut records: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut pullbacks: Vec<(f64, Field)> = Vec::new();
    let half_exp = (params.p + 2.0) / 2.0;

    let start = Instant::now();
    let (_warnings, abort) = evolve_observed(
        &u0,
        &mult,
        &params,
        2.0,
        dt,
        record_stride,
        &EvolveOptions::default(),
        |ev| {
            let near =
                PROBES.iter().any(|&tp| (ev.time - tp).abs() < dt * 1.5 + 1e-12);
            if near {
                action_hist.push((ev.time, morawetz_action(ev.field, &weight).unwrap()));
                if PROBES.iter().any(|&tp| (ev.time - tp).abs() < 1e-9) {
                    rhs_hist.push((
                        ev.time,
                        morawetz_rhs(ev.field, &weight, &params, &quad).unwrap(),
                    ));
                }
            }
            if ev.is_record {
                mass_drift = mass_drift.max((mass(ev.field) - m0).abs() / m0);
                energy_drift = energy_drift
                    .max((energy(ev.field, &mult, &params).unwrap() - e0).abs() / e0.abs());
                let grid = ev.field.grid().clone();
                let mut g = 0.0f64;
                grid.for_each_point(|flat, x, _| {
                    g += ev.field.values()[flat].norm_sqr().powf(half_exp) / reg.phi(x);
                });
                records.push((
                    ev.time,
                    mixed_norm(ev.field, &l4).unwrap(),
                    g * grid.cell_volume(),
                    sobolev_norm(ev.field, SIGMA).unwrap(),
                ));
                if PULLBACK_TIMES.iter().any(|&ts| (ev.time - ts).abs() < 1e-9) {
                    pullbacks.push((ev.time, ev.field.clone()));
                }
            }
        },
    )
    .unwrap();
    let elapsed_secs = start.elapsed().as_secs_f64();
    assert!(abort.is_none(), "defocusing run must not trip the guard");

    let probes = PROBES
        .iter()
        .map(|&tp| {
            let at = |t: f64| {
                action_hist
                    .iter()
                    .find(|(tt, _)| (tt - t).abs() < 1e-9)
                    .unwrap_or_else(|| panic!("no action sample at {t}"))
                    .1
            };
            let fd = (at(tp + dt) - at(tp - dt)) / (2.0 * dt);
            let rhs = rhs_hist
                .iter()
                .find(|(tt, _)| (tt - tp).abs() < 1e-9)
                .unwrap()
                .1;
            (tp, fd, rhs)
        })
        .collect();

    RunStats {
        elapsed_secs,
        mass_drift,
        energy_drift,
        probes,
        records,
        pullbacks,
    }
}

fn big_run() -> &'static BigRun {
    static CELL: OnceLock<BigRun> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = make_grid(3, 1, 12.0, 64, 16).unwrap();
        BigRun {
            params: ModelParams::new(SIGMA, -1, 1.5, 3, 1).unwrap(),
            mult: Multiplier::new(&grid, SIGMA).unwrap(),
            coarse: run_big(0.08),
            fine: run_big(0.04),
        }
    })
}

#[test]
fn c1_conservation() {
    let _guard = serial();
    let run = big_run();
    let ratio = run.coarse.energy_drift / run.fine.energy_drift;
    assert!(
        run.coarse.mass_drift <= 1e-12,
        "mass drift {}",
        run.coarse.mass_drift
    );
    assert!(
        (3.5..=4.5).contains(&ratio),
        "energy refinement ratio {ratio}"
    );
    assert!(
        run.coarse.elapsed_secs <= 120.0,
        "runtime {}s",
        run.coarse.elapsed_secs
    );
    println!(
        "ACCEPTANCE C1 conservation: PASS (mass drift {:.2e}, energy ratio {:.3}, runtime {:.1}s)",
        run.coarse.mass_drift, ratio, run.coarse.elapsed_secs
    );
}

#[test]
fn c2_balakrishnan_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let grid = make_grid(1, 1, std::f64::consts::PI, 16, 8).unwrap();
    let band = DyadicProjector::new(&grid, 2.0, ProjectorKind::Band).unwrap();
    let mut rng = CounterRng::new(1234, 0);
    let mut raw = Field::zeros(&grid, Space::Physical);
    for v in raw.values_mut() {
        let (re, im) = rng.next_complex_gaussian();
        *v = Complex64::new(re, im);
    }
    let f = lp_project(&raw, &band).unwrap();
    let mut worst: f64 = 0.0;
    for sigma in [0.25, 0.5, 0.75] {
        let direct = Multiplier::new(&grid, sigma).unwrap();
        let want = apply_multiplier(&f, direct.x_part(), Complex64::new(1.0, 0.0)).unwrap();
        let spec = QuadratureSpec::with_tolerance(sigma, lambda_max(&grid), 1e-8);
        let got = balakrishnan_apply(&f, sigma, &spec).unwrap();
        let rel = got.distance_l2(&want).unwrap() / want.l2();
        assert!(rel <= 1e-6, "sigma {sigma}: rel {rel}");
        worst = worst.max(rel);
    }
    println!(
        "ACCEPTANCE C2 balakrishnan-oracle: PASS (worst rel error {:.2e}, {:.1}s)",
        worst,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn c3_morawetz_identity() {
    let _guard = serial();
    let run = big_run();
    let resid = |stats: &RunStats| -> f64 {
        stats
            .probes
            .iter()
            .map(|(_, fd, rhs)| (rhs - fd).abs() / fd.abs())
            .fold(0.0, f64::max)
    };
    let coarse = resid(&run.coarse);
    let fine = resid(&run.fine);
    assert!(coarse <= 1e-3, "coarse residual {coarse}");
    assert!(fine < coarse, "residual did not shrink: {coarse} -> {fine}");
    println!(
        "ACCEPTANCE C3 morawetz-identity: PASS (residual {:.2e} -> {:.2e} under dt halving)",
        coarse, fine
    );
}

#[test]
fn c4_morawetz_inequality() {
    let _guard = serial();
    let run = big_run();
    let ratio_up_to = |horizon: f64| -> f64 {
        let pts: Vec<(f64, f64)> = run
            .coarse
            .records
            .iter()
            .filter(|(t, _, _, _)| *t <= horizon + 1e-9)
            .map(|(t, _, g, _)| (*t, *g))
            .collect();
        let mut value = 0.0;
        for w in pts.windows(2) {
            value += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        let sup = run
            .coarse
            .records
            .iter()
            .filter(|(t, _, _, _)| *t <= horizon + 1e-9)
            .map(|(_, _, _, hs)| *hs)
            .fold(0.0, f64::max);
        value / (sup * sup)
    };
    let r1 = ratio_up_to(1.0);
    let r2 = ratio_up_to(2.0);
    let growth = r2 / r1;
    assert!(growth <= 1.2, "ratio growth {growth}");
    println!(
        "ACCEPTANCE C4 morawetz-inequality: PASS (ratio {:.4} -> {:.4}, growth {:.3} <= 1.2)",
        r1, r2, growth
    );
}

#[test]
fn c5_strichartz_scaling() {
    let _guard = serial();
    let start = Instant::now();
    let grid = make_grid(1, 1, 144.0, 12288, 256).unwrap();
    let mut lines = Vec::new();
    for sigma in [0.75, 1.0] {
        let pred = StrichartzPrediction::new(sigma, 2, 1);
        let p = pred.p_endpoint();
        assert!((p - 4.0).abs() < 1e-12);
        let predicted = pred.slope(p);
        let mut cfg = ScalingConfig::new(vec![4.0, 8.0, 16.0, 32.0], p, 16, 4242);
        cfg.time_samples = 8;
        let rep = measure_scaling(&grid, &pred, &cfg).unwrap();
        let lo = predicted - 0.15;
        let hi = predicted + 0.25;
        for (name, slope) in [
            ("hessian", rep.hessian_compensated.slope),
            ("symbol", rep.symbol_compensated.slope),
        ] {
            assert!(
                (lo..=hi).contains(&slope),
                "sigma {sigma} {name}-compensated slope {slope} outside [{lo}, {hi}]"
            );
        }
        lines.push(format!(
            "sigma {sigma}: hessian {:+.3}, symbol {:+.3} in [{lo:+.2}, {hi:+.2}]",
            rep.hessian_compensated.slope, rep.symbol_compensated.slope
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 300.0, "runtime {elapsed}s");
    println!(
        "ACCEPTANCE C5 strichartz-scaling: PASS ({}; runtime {:.0}s <= 300s)",
        lines.join("; "),
        elapsed
    );
}

#[test]
fn c6_bilinear_n_uniformity() {
    let _guard = serial();
    let start = Instant::now();
    let grid = make_grid(1, 1, 64.0, 4096, 192).unwrap();
    let k_fixed = [4.0];
    let med = |n: f64| {
        let rep = bilinear_experiment(&grid, 0.75, n, &k_fixed, 8, 8, 777).unwrap();
        assert!(rep.separated);
        rep.per_k_median[0].1
    };
    let m16 = med(16.0);
    let m32 = med(32.0);
    let variation = (m32 / m16 - 1.0).abs();
    assert!(variation <= 0.2, "variation {variation}");
    println!(
        "ACCEPTANCE C6 bilinear-uniformity: PASS (K=4 medians {:.5} vs {:.5}, variation {:.1}% <= 20%, {:.0}s)",
        m16,
        m32,
        100.0 * variation,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn c7_picard_contraction() {
    let _guard = serial();
    let grid = make_grid(3, 1, 6.0, 16, 8).unwrap();
    let params = ModelParams::new(SIGMA, -1, 1.5, 3, 1).unwrap();
    let mult = Multiplier::new(&grid, SIGMA).unwrap();
    let u0 = sample_function(&grid, |x, y| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new((-r2).exp() * (1.0 + 0.3 * y[0].cos()), 0.0)
    });
    let (mq, mr) = contraction_metric(SIGMA, 3, params.p);
    let cfg = PicardConfig {
        t_final: 0.2,
        dt: 0.002,
        record_stride: 5,
        iterations: 6,
        metric_q: mq,
        metric_r: mr,
    };
    let rep = picard_iterate(&u0, &mult, &params, &cfg).unwrap();
    assert!(!rep.diverged);
    let late: Vec<f64> = rep
        .ratios
        .iter()
        .cloned()
        .filter(|r| *r > 0.0)
        .collect();
    assert!(late.len() >= 3, "ratios {:?}", rep.ratios);
    for rho in &late {
        assert!(*rho < 1.0, "non-contractive ratio {rho}: {:?}", rep.ratios);
    }
    // approximately geometric: every per-step rate within a constant factor
    // of the geometric mean, with no drift toward 1
    let geomean = (late.iter().map(|r| r.ln()).sum::<f64>() / late.len() as f64).exp();
    let spread = late
        .iter()
        .map(|r| (r.ln() - geomean.ln()).abs())
        .fold(0.0, f64::max);
    assert!(
        spread <= 3.0f64.ln(),
        "ratios not roughly geometric (spread {spread:.2} in log): {:?}",
        rep.ratios
    );
    assert!(late.last().unwrap() <= &(1.5 * late[0]), "rates drifting up: {late:?}");
    let traj = evolve(
        &u0,
        &mult,
        &params,
        cfg.t_final,
        cfg.dt,
        cfg.record_stride,
        &EvolveOptions::default(),
    )
    .unwrap();
    let fixed = rep.final_iterate.last().unwrap();
    let rel = fixed.distance_l2(traj.final_state()).unwrap() / traj.final_state().l2();
    assert!(rel <= 1e-4, "fixed point vs split step: {rel}");
    println!(
        "ACCEPTANCE C7 picard-contraction: PASS (ratios {:?}, geometric mean {:.3}, cross-solver {:.2e} <= 1e-4)",
        rep.ratios
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        geomean,
        rel
    );
}

#[test]
fn c8_decay_and_scattering() {
    let _guard = serial();
    let run = big_run();
    let times: Vec<f64> = run.coarse.records.iter().map(|r| r.0).collect();
    let l4: Vec<f64> = run.coarse.records.iter().map(|r| r.1).collect();
    let scan = decay_scan_from_values(&times, &l4, 4.0, &run.params).unwrap();
    assert!(scan.in_theorem_band, "q=4 must sit in the decay band");
    assert!(
        scan.decreasing_fraction >= 0.9,
        "decreasing fraction {}",
        scan.decreasing_fraction
    );
    let final_ratio = l4.last().unwrap() / l4[0];
    assert!(final_ratio <= 0.5, "final/initial {final_ratio}");

    let report = scattering_extract(&run.coarse.pullbacks, &run.mult, &run.params, 0.8, 1e-4)
        .unwrap();
    assert!(!report.truncated, "leak cutoff before the last doubling");
    assert_eq!(report.deltas.len(), 3);
    for w in report.deltas.windows(2) {
        assert!(w[1] < w[0], "deltas not strictly decreasing: {:?}", report.deltas);
    }
    println!(
        "ACCEPTANCE C8 decay-scattering: PASS (L4 {:.3} -> {:.3}, trend {:.0}%, deltas {:.3} > {:.3} > {:.3})",
        l4[0],
        l4.last().unwrap(),
        100.0 * scan.decreasing_fraction,
        report.deltas[0],
        report.deltas[1],
        report.deltas[2]
    );
}

#[test]
fn c9_toy_scale_oracles() {
    let _guard = serial();
    // independent direct-summation oracle, no FFT shared with the library
    let grid = make_grid(1, 1, 1.9, 8, 8).unwrap();
    let mut rng = CounterRng::new(31, 0);
    let mut f = Field::zeros(&grid, Space::Physical);
    for v in f.values_mut() {
        let (re, im) = rng.next_complex_gaussian();
        *v = Complex64::new(re, im);
    }
    let hat = f.forward_transform().unwrap();
    let mut worst: f64 = 0.0;
    let mut direct = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (kflat, slot) in direct.iter_mut().enumerate() {
        let kx = kflat / 8;
        let ky = kflat % 8;
        let xi = grid.euclid_freqs()[kx];
        let eta = grid.torus_freqs()[ky] as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (zflat, v) in f.values().iter().enumerate() {
            let x = grid.axis_coord(0, zflat / 8);
            let y = grid.axis_coord(1, zflat % 8);
            acc += v * Complex64::from_polar(1.0, -(xi * x + eta * y));
        }
        *slot = acc * grid.cell_volume();
    }
    let scale: f64 = direct.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let err: f64 = hat
        .values()
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / scale;
    assert!(err <= 1e-12, "transform vs direct sum: {err}");
    worst = worst.max(err);

    // Plancherel through the oracle spectrum
    let plancherel =
        (direct.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.spectral_weight()).sqrt();
    let e2 = (plancherel - f.l2()).abs() / f.l2();
    assert!(e2 <= 1e-12);
    worst = worst.max(e2);

    // mixed norm against nested summation
    let spec = NormSpec::xy(4.0, fracwave::diagnostics::TorusNorm::Lebesgue(2.0));
    let got = mixed_norm(&f, &spec).unwrap();
    let hy = 2.0 * std::f64::consts::PI / 8.0;
    let mut outer = 0.0f64;
    for ix in 0..8 {
        let mut inner = 0.0f64;
        for iy in 0..8 {
            inner += f.values()[ix * 8 + iy].norm_sqr() * hy;
        }
        outer += inner.sqrt().powi(4) * grid.spacing_x();
    }
    let e3 = (got - outer.powf(0.25)).abs() / got;
    assert!(e3 <= 1e-12);
    worst = worst.max(e3);
    println!("ACCEPTANCE C9 toy-scale-oracles: PASS (worst rel deviation {:.2e})", worst);
}
