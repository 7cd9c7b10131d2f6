use std::io;

use magtrace_core::dixmier::{a_sequence, element_dixmier, DixmierEstimate, DixmierWeight};
use magtrace_core::elements::tau_p;
use magtrace_core::hull::HullPoint;
use magtrace_core::numerics::{ln_factorial, QuadratureConfig};
use magtrace_core::scaling::{g_l1_norm, scaled_partial_sum};
use magtrace_core::tuv::{consistency_2lambda, tuv_estimate, tuv_expectation, FolnerShape};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ConfigError, Setup};
use crate::output::{cnum, json_complex, num, OutputDir};

#[derive(Debug)]
pub enum Failure {
    Numeric(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Numeric(e.0)
    }
}

impl From<magtrace_core::Error> for Failure {
    fn from(e: magtrace_core::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

/// Ok(true) when every checked claim holds.
pub type Outcome = Result<bool, Failure>;

/// Σ_{m<N} e^{−x} x^m / m!, summed term by term in log space.
fn poisson_cdf(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let ln_x = x.ln();
    (0..n).map(|m| (m as f64 * ln_x - x - ln_factorial(m)).exp()).sum()
}

pub fn scaling(setup: &Setup, out: &OutputDir) -> Outcome {
    let cfg = &setup.config.scaling;
    let mut all_pass = true;
    let mut rows = Vec::new();
    for &[i, j] in &cfg.indices {
        for &n in &cfg.n {
            for &xi in &cfg.xi {
                let g = scaled_partial_sum(i, j, n, xi)?;
                let oracle = if i == 0 && j == 0 { num(poisson_cdf(n, n as f64 * xi)) } else { String::new() };
                let (claim, limit, tol) = if xi == 1.0 {
                    ("no-claim", f64::NAN, f64::NAN)
                } else if i == j {
                    ("limit", if xi < 1.0 { 1.0 } else { 0.0 }, cfg.diagonal_tolerance)
                } else {
                    ("limit", 0.0, cfg.off_diagonal_tolerance)
                };
                let err = (g - limit).abs();
                let pass = claim == "no-claim" || err <= tol;
                all_pass &= pass;
                rows.push(vec![
                    i.to_string(),
                    j.to_string(),
                    n.to_string(),
                    num(xi),
                    num(g),
                    oracle,
                    claim.to_string(),
                    if claim == "no-claim" { String::new() } else { num(limit) },
                    if claim == "no-claim" { String::new() } else { num(err) },
                    pass.to_string(),
                ]);
            }
        }
    }
    out.table(
        "scaling_pointwise.csv",
        &["G_N(xi) = sum_{m<N} R_m(N xi); oracle = Poisson CDF for i=j=0; xi=1 carries no limit claim".into()],
        &["i", "j", "N", "xi", "G", "poisson_oracle", "claim", "limit", "abs_error", "pass"],
        &rows,
    )?;

    let quad = QuadratureConfig::default();
    let mut l1_rows = Vec::new();
    let mut l1_pass = true;
    for &[i, j] in &cfg.indices {
        for &n in &cfg.l1_n {
            let v = g_l1_norm(i, j, n, &quad)?;
            let (claim, bound, pass) = if i == j {
                ("equals 1", 1.0, (v - 1.0).abs() <= cfg.l1_tolerance)
            } else if j == 0 {
                let b = (i as f64 / n as f64).sqrt();
                ("at most sqrt(i/N)", b, v <= b + cfg.l1_tolerance)
            } else {
                ("no-claim", f64::NAN, true)
            };
            l1_pass &= pass;
            l1_rows.push(vec![
                i.to_string(),
                j.to_string(),
                n.to_string(),
                num(v),
                claim.to_string(),
                if bound.is_nan() { String::new() } else { num(bound) },
                pass.to_string(),
            ]);
        }
    }
    out.table("scaling_l1.csv", &[], &["i", "j", "N", "l1_norm", "claim", "bound", "pass"], &l1_rows)?;
    out.summary(json!({
        "pointwise_pass": all_pass,
        "l1_pass": l1_pass,
        "pass": all_pass && l1_pass,
    }))?;
    Ok(all_pass && l1_pass)
}

fn estimate_json(e: &DixmierEstimate) -> Value {
    json!({
        "value": json_complex(e.value),
        "uncertainty": e.uncertainty,
        "residual": e.residual,
        "slope": json_complex(e.slope),
    })
}

pub fn dixmier(setup: &Setup, out: &OutputDir, schedule: &[usize]) -> Outcome {
    let cfg = &setup.config;
    let dcfg = cfg.dixmier_config(setup.params);
    let mut seq_rows = Vec::new();
    let mut est_rows = Vec::new();
    let mut records = Vec::new();
    let mut all_pass = true;
    let mut failure = None;
    'runs: for run in &cfg.dixmier.runs {
        let region = &setup.regions[&run.region];
        let expected = region.analytic_density().map(|d| if run.j == run.k { d } else { 0.0 });
        for lambda in cfg.lambdas() {
            let weight = DixmierWeight::Region(region.clone());
            let table = match a_sequence(run.j, run.k, lambda, &weight, schedule, &dcfg).and_then(|t| t.extrapolate()) {
                Ok(t) => t,
                Err(e) => {
                    failure = Some(Failure::from(e));
                    break 'runs;
                }
            };
            for (n, v) in table.schedule().iter().zip(table.values()) {
                let [re, im] = cnum(*v);
                seq_rows.push(vec![run.region.clone(), run.j.to_string(), run.k.to_string(), num(lambda), n.to_string(), re, im]);
            }
            let est = table.extrapolated().unwrap();
            let pass = expected.is_none_or(|x| (est.value - Complex64::new(x, 0.0)).norm() <= cfg.dixmier.tolerance);
            all_pass &= pass;
            let [re, im] = cnum(est.value);
            est_rows.push(vec![
                run.region.clone(),
                run.j.to_string(),
                run.k.to_string(),
                num(lambda),
                re,
                im,
                num(est.uncertainty),
                num(est.residual),
                expected.map(num).unwrap_or_default(),
                pass.to_string(),
            ]);
            records.push(json!({
                "region": run.region, "j": run.j, "k": run.k, "lambda": lambda,
                "estimate": estimate_json(est), "expected": expected, "pass": pass,
            }));
        }
    }
    out.table(
        "dixmier_sequences.csv",
        &["A_N = (log N)^-1 sum_{m<N} <psi_{j,m}, P psi_{k,m}>/(m + k + 1 + lambda)".into()],
        &["region", "j", "k", "lambda", "N", "value_re", "value_im"],
        &seq_rows,
    )?;
    out.table(
        "dixmier_estimates.csv",
        &["extrapolated with value_N = a + b/log N".into()],
        &["region", "j", "k", "lambda", "value_re", "value_im", "uncertainty", "residual", "expected", "pass"],
        &est_rows,
    )?;
    out.summary(json!({ "runs": records, "pass": all_pass && failure.is_none(), "schedule": schedule }))?;
    match failure {
        Some(f) => Err(f),
        None => Ok(all_pass),
    }
}

pub fn tuv(setup: &Setup, out: &OutputDir) -> Outcome {
    let cfg = &setup.config;
    let tcfg = cfg.tuv_config(setup.params);
    let origin = setup.hull.origin();
    let mut rows = Vec::new();
    let mut expectations = Vec::new();
    for square in [true, false] {
        let sched = cfg.folner(square)?;
        let name = if sched.shape() == FolnerShape::Square { "square" } else { "disk" };
        let est = tuv_estimate(&setup.element, &origin, &sched, &setup.params, &tcfg.quad)?;
        for (l, v) in est.sizes.iter().zip(&est.values) {
            let [re, im] = cnum(*v);
            rows.push(vec![name.to_string(), num(*l), re, im]);
        }
        expectations.push((name, tuv_expectation(&setup.element, &sched, &tcfg)?));
    }
    out.table(
        "tuv.csv",
        &["box traces at the hull origin; expectation over the hull is in summary.json".into()],
        &["shape", "size", "value_re", "value_im"],
        &rows,
    )?;
    let report = consistency_2lambda(&setup.element, &cfg.folner(true)?, &tcfg)?;
    let (sq, dk) = (expectations[0].1.value, expectations[1].1.value);
    let scale = sq.norm().max(dk.norm());
    let shape_rel = if scale > 0.0 { (sq - dk).norm() / scale } else { 0.0 };
    let pass = report.relative <= cfg.tuv.tolerance && shape_rel <= cfg.tuv.shape_tolerance;
    out.summary(json!({
        "tuv_expectation": expectations.iter().map(|(n, e)| json!({"shape": n, "value": json_complex(e.value), "uncertainty": e.error})).collect::<Vec<_>>(),
        "tau_p": json_complex(report.tau_p.value),
        "scaled_tuv": json_complex(report.scaled_tuv.value),
        "discrepancy": report.discrepancy,
        "relative_discrepancy": report.relative,
        "shape_relative_discrepancy": shape_rel,
        "pass": pass,
    }))?;
    Ok(pass)
}

/// Seeded uniform hull points; the singleton hull has exactly one.
fn omega_samples(setup: &Setup) -> Vec<HullPoint> {
    let d = setup.hull.dim();
    if d == 0 {
        return vec![setup.hull.origin()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(setup.config.seed);
    (0..setup.config.compare.omega_samples)
        .map(|_| HullPoint((0..d).map(|_| rng.gen::<f64>()).collect()))
        .collect()
}

pub fn compare(setup: &Setup, out: &OutputDir, schedule: &[usize]) -> Outcome {
    let cfg = &setup.config;
    let dcfg = cfg.dixmier_config(setup.params);
    let tcfg = cfg.tuv_config(setup.params);
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut failure = None;
    for (s, w) in omega_samples(setup).iter().enumerate() {
        match element_dixmier(&setup.element, w, cfg.magnetic.lambda, schedule, &dcfg) {
            Ok(e) => {
                let [re, im] = cnum(e.value);
                let coords = w.coords().iter().map(|c| num(*c)).collect::<Vec<_>>().join(" ");
                rows.push(vec![s.to_string(), coords, re, im, num(e.uncertainty)]);
                values.push(e);
            }
            Err(e) => {
                failure = Some(Failure::from(e));
                break;
            }
        }
    }
    out.table(
        "compare.csv",
        &[format!("element_dixmier per hull sample, lambda = {}", num(cfg.magnetic.lambda))],
        &["sample", "omega", "value_re", "value_im", "uncertainty"],
        &rows,
    )?;
    if let Some(f) = failure {
        return Err(f);
    }
    let k = values.len() as f64;
    let dix = values.iter().map(|e| e.value).sum::<Complex64>() / k;
    let dix_unc = values.iter().map(|e| e.uncertainty).sum::<f64>() / k;
    let tau = tau_p(&setup.element, &cfg.expectation_config());
    let t = tuv_expectation(&setup.element, &cfg.folner(true)?, &tcfg)?;
    let area = 1.0 / setup.params.c0();
    let tuv_value = t.value * area;
    let d_dix = (dix - tau.value).norm();
    let d_tuv = (tuv_value - tau.value).norm();
    let pass = d_dix <= cfg.compare.dixmier_tolerance && d_tuv <= cfg.compare.tuv_tolerance;
    out.summary(json!({
        "dixmier_average": json_complex(dix),
        "dixmier_uncertainty": dix_unc,
        "tau_p": json_complex(tau.value),
        "tau_p_uncertainty": tau.error,
        "scaled_tuv": json_complex(tuv_value),
        "scaled_tuv_uncertainty": t.error * area,
        "discrepancy_dixmier_tau": d_dix,
        "discrepancy_tuv_tau": d_tuv,
        "discrepancy_dixmier_tuv": (dix - tuv_value).norm(),
        "pass": pass,
    }))?;
    Ok(pass)
}
