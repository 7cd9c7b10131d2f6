//! Dixmier-trace approximants for weighted Landau-level transitions.
//!
//! Every sequence here is built from the diagonal-in-m matrix elements
//! e_m = ⟨ψ_{i,m}, W ψ_{j,m}⟩, computed once up to the largest N of a schedule.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::elements::{weighted_element, ElementQuadrature, L1Element, PlaneWaveSweep, RegionSweep, TermOrder};
use crate::error::{domain, Error, Result};
use crate::hull::{HullModel, HullPoint, PotentialSymbol};
use crate::laguerre::MagneticParams;
use crate::numerics::{composite_nodes, digamma, gauss_legendre, pairwise_sum};
use crate::regions::{angular_fourier, RegionSpec};
use crate::scaling::scaled_partial_sum;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Extrapolated limit of a sequence under the model a + b/log N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DixmierEstimate {
    pub value: Complex64,
    /// Standard error of the intercept from the fit residuals.
    pub uncertainty: f64,
    /// Root-mean-square fit residual.
    pub residual: f64,
    pub slope: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTable {
    schedule: Vec<usize>,
    values: Vec<Complex64>,
    extrapolated: Option<DixmierEstimate>,
}

pub fn validate_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() {
        return domain("empty schedule");
    }
    if schedule[0] < 2 {
        return domain(format!("schedule must start at N >= 2, got {}", schedule[0]));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return domain("schedule must be strictly increasing");
    }
    Ok(())
}

/// Roughly log-spaced schedule from `first` to `last` with `per_decade` points per decade.
pub fn log_schedule(first: usize, last: usize, per_decade: usize) -> Result<Vec<usize>> {
    if first < 2 || last <= first || per_decade == 0 {
        return domain("log_schedule needs 2 <= first < last and per_decade >= 1");
    }
    let decades = (last as f64 / first as f64).log10();
    let steps = (decades * per_decade as f64).ceil().max(1.0) as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|s| (first as f64 * (last as f64 / first as f64).powf(s as f64 / steps as f64)).round() as usize)
        .collect();
    out.dedup();
    *out.last_mut().unwrap() = last;
    Ok(out)
}

impl SequenceTable {
    pub fn new(schedule: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        validate_schedule(&schedule)?;
        if schedule.len() != values.len() {
            return domain("schedule and values differ in length");
        }
        Ok(Self {
            schedule,
            values,
            extrapolated: None,
        })
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn extrapolated(&self) -> Option<&DixmierEstimate> {
        self.extrapolated.as_ref()
    }

    /// Fits the table and stores the estimate.
    pub fn extrapolate(mut self) -> Result<Self> {
        self.extrapolated = Some(dixmier_estimate(&self)?);
        Ok(self)
    }

    pub fn last(&self) -> Complex64 {
        *self.values.last().unwrap()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            schedule: self.schedule.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            extrapolated: None,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.schedule != other.schedule {
            return domain("tables on different schedules");
        }
        Ok(Self {
            schedule: self.schedule.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            extrapolated: None,
        })
    }

    /// Columns N, value_re, value_im with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,value_re,value_im\n");
        for (n, v) in self.schedule.iter().zip(&self.values) {
            let _ = writeln!(out, "{n},{:.16e},{:.16e}", v.re, v.im);
        }
        out
    }
}

/// The multiplier W in ⟨ψ_{i,m}, W ψ_{j,m}⟩.
#[derive(Debug, Clone)]
pub enum DixmierWeight {
    Region(RegionSpec),
    /// M_{g,ω}; the hull supplies the flow that turns g into a field on the plane.
    Potential(PotentialSymbol, HullModel, HullPoint),
}

impl DixmierWeight {
    fn check(&self) -> Result<()> {
        match self {
            DixmierWeight::Region(_) => Ok(()),
            DixmierWeight::Potential(g, hull, w) => {
                if !g.sup_bound().is_finite() {
                    return domain("potential with infinite sup bound");
                }
                if w.coords().len() != hull.dim() {
                    return domain("hull point has wrong dimension");
                }
                Ok(())
            }
        }
    }
}

/// Controls shared by all sequence computations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DixmierConfig {
    pub params: MagneticParams,
    pub quad: ElementQuadrature,
}

/// e_m = ⟨ψ_{i,m}, W ψ_{j,m}⟩ for m < count.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalElements {
    pub i: usize,
    pub j: usize,
    values: Vec<Complex64>,
    /// Set when every element equals this value (radially constant regions).
    constant: Option<Complex64>,
}

impl DiagonalElements {
    pub fn compute(i: usize, j: usize, weight: &DixmierWeight, count: usize, cfg: &DixmierConfig) -> Result<Self> {
        weight.check()?;
        match weight {
            DixmierWeight::Region(region) => {
                if region.is_radially_constant() {
                    let c = if i == j { angular_fourier(region, 0, 1.0, &cfg.params) } else { ZERO };
                    return Ok(Self::constant(i, j, c));
                }
                let sweep = RegionSweep::new(region, i, j, count.saturating_sub(1), &cfg.params, &cfg.quad);
                Ok(Self::from_values(i, j, sweep.elements(count)))
            }
            DixmierWeight::Potential(g, hull, omega) => {
                let field = g.field(hull, omega)?;
                if let Some(sweep) = PlaneWaveSweep::new(&field, i, j, &cfg.params) {
                    return Ok(Self::from_values(i, j, sweep?.elements(count)?));
                }
                let values: Result<Vec<Complex64>> = (0..count)
                    .into_par_iter()
                    .map(|m| weighted_element(g, hull, omega, i, j, m, &cfg.params, &cfg.quad))
                    .collect();
                Ok(Self::from_values(i, j, values?))
            }
        }
    }

    pub fn from_values(i: usize, j: usize, values: Vec<Complex64>) -> Self {
        Self {
            i,
            j,
            values,
            constant: None,
        }
    }

    pub fn constant(i: usize, j: usize, c: Complex64) -> Self {
        Self {
            i,
            j,
            values: Vec::new(),
            constant: Some(c),
        }
    }

    pub fn constant_value(&self) -> Option<Complex64> {
        self.constant
    }

    /// Number of stored elements; unbounded for constant sequences.
    pub fn len(&self) -> usize {
        if self.constant.is_some() {
            usize::MAX
        } else {
            self.values.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, m: usize) -> Complex64 {
        self.constant.unwrap_or_else(|| self.values[m])
    }

    fn covers(&self, n: usize) -> Result<()> {
        if n > self.len() {
            return domain(format!("elements cover m < {}, schedule needs m < {n}", self.len()));
        }
        Ok(())
    }
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Running {
    sum: Complex64,
    comp: Complex64,
}

impl Running {
    fn add(&mut self, x: Complex64) {
        let t = self.sum + x;
        let fix = |s: f64, x: f64, t: f64| if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        self.comp += Complex64::new(fix(self.sum.re, x.re, t.re), fix(self.sum.im, x.im, t.im));
        self.sum = t;
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// Samples the prefix sums P_N = Σ_{m<N} f(m) at each N of the schedule.
fn prefix_at(schedule: &[usize], f: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(schedule.len());
    let mut acc = Running::default();
    let mut m = 0;
    for &n in schedule {
        while m < n {
            acc.add(f(m));
            m += 1;
        }
        out.push(acc.value());
    }
    out
}

/// D_N = N⁻¹ Σ_{m<N} e_m.
pub fn d_from_elements(e: &DiagonalElements, schedule: &[usize]) -> Result<SequenceTable> {
    validate_schedule(schedule)?;
    if let Some(c) = e.constant {
        return SequenceTable::new(schedule.to_vec(), vec![c; schedule.len()]);
    }
    e.covers(*schedule.last().unwrap())?;
    let sums = prefix_at(schedule, |m| e.values[m]);
    SequenceTable::new(schedule.to_vec(), sums.iter().zip(schedule).map(|(s, &n)| s / n as f64).collect())
}

pub fn d_sequence(i: usize, j: usize, weight: &DixmierWeight, schedule: &[usize], cfg: &DixmierConfig) -> Result<SequenceTable> {
    validate_schedule(schedule)?;
    let e = DiagonalElements::compute(i, j, weight, *schedule.last().unwrap(), cfg)?;
    d_from_elements(&e, schedule)
}

/// D_1, …, D_{count}: every running mean, the input W_N needs.
pub fn running_means(e: &DiagonalElements, count: usize) -> Result<Vec<Complex64>> {
    if let Some(c) = e.constant {
        return Ok(vec![c; count]);
    }
    e.covers(count)?;
    let mut acc = Running::default();
    Ok((0..count)
        .map(|m| {
            acc.add(e.values[m]);
            acc.value() / (m + 1) as f64
        })
        .collect())
}

/// W_N = (log N)⁻¹ Σ_{m<N} D_{m+1}/(m+ζ), from the running means D_1, D_2, ….
pub fn w_sequence(means: &[Complex64], zeta: f64, schedule: &[usize]) -> Result<SequenceTable> {
    if !(zeta > 0.0) {
        return domain(format!("W_N needs zeta > 0, got {zeta}"));
    }
    validate_schedule(schedule)?;
    let top = *schedule.last().unwrap();
    if means.len() < top {
        return domain(format!("W_N at N = {top} needs D_1..D_{top}, have {}", means.len()));
    }
    let sums = prefix_at(schedule, |m| means[m] / (m as f64 + zeta));
    SequenceTable::new(schedule.to_vec(), sums.iter().zip(schedule).map(|(s, &n)| s / (n as f64).ln()).collect())
}

pub fn zeta(target: usize, lambda: f64) -> Result<f64> {
    if !(lambda > -1.0) {
        return domain(format!("lambda must exceed -1, got {lambda}"));
    }
    Ok(target as f64 + 1.0 + lambda)
}

/// A_N = (log N)⁻¹ Σ_{m<N} e_m/(m+ζ). Constant sequences use the digamma
/// closed form Σ_{m<N} 1/(m+ζ) = ψ(N+ζ) − ψ(ζ).
pub fn a_from_elements(e: &DiagonalElements, zeta: f64, schedule: &[usize]) -> Result<SequenceTable> {
    if !(zeta > 0.0) {
        return domain(format!("A_N needs zeta > 0, got {zeta}"));
    }
    validate_schedule(schedule)?;
    if let Some(c) = e.constant {
        let psi0 = digamma(zeta);
        let values = schedule
            .iter()
            .map(|&n| c * ((digamma(n as f64 + zeta) - psi0) / (n as f64).ln()))
            .collect();
        return SequenceTable::new(schedule.to_vec(), values);
    }
    e.covers(*schedule.last().unwrap())?;
    let sums = prefix_at(schedule, |m| e.values[m] / (m as f64 + zeta));
    SequenceTable::new(schedule.to_vec(), sums.iter().zip(schedule).map(|(s, &n)| s / (n as f64).ln()).collect())
}

/// Approximant sequence of Tr_Dix(Q_λ⁻¹ Υ_{j→k} W), elements ⟨ψ_{j,m}, W ψ_{k,m}⟩, ζ = k+1+λ.
pub fn a_sequence(j: usize, k: usize, lambda: f64, weight: &DixmierWeight, schedule: &[usize], cfg: &DixmierConfig) -> Result<SequenceTable> {
    let z = zeta(k, lambda)?;
    validate_schedule(schedule)?;
    let e = DiagonalElements::compute(j, k, weight, *schedule.last().unwrap(), cfg)?;
    a_from_elements(&e, z, schedule)
}

/// One row of the summation-by-parts identity
/// A_N log N = (N−1)D_N/(N−1+ζ) + W_N log N − ζ Σ_{m=1}^{N−1} D_m/((m−1+ζ)(m+ζ)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionRow {
    pub n: usize,
    pub a_log: Complex64,
    pub boundary: Complex64,
    pub w_log: Complex64,
    pub correction: Complex64,
}

impl DecompositionRow {
    pub fn residual(&self) -> f64 {
        (self.a_log - (self.boundary + self.w_log - self.correction)).norm()
    }
}

/// Evaluates each side of the identity by separate summations.
pub fn decomposition(e: &DiagonalElements, zeta: f64, schedule: &[usize]) -> Result<Vec<DecompositionRow>> {
    let a = a_from_elements(e, zeta, schedule)?;
    let top = *schedule.last().unwrap();
    let means = running_means(e, top)?;
    let w = w_sequence(&means, zeta, schedule)?;
    let corr = prefix_at(schedule, |m| {
        if m == 0 {
            ZERO
        } else {
            let mf = m as f64;
            means[m - 1] * (zeta / ((mf - 1.0 + zeta) * (mf + zeta)))
        }
    });
    Ok(schedule
        .iter()
        .enumerate()
        .map(|(s, &n)| {
            let log = (n as f64).ln();
            let nf = n as f64;
            DecompositionRow {
                n,
                a_log: a.values[s] * log,
                boundary: means[n - 1] * ((nf - 1.0) / (nf - 1.0 + zeta)),
                w_log: w.values[s] * log,
                correction: corr[s],
            }
        })
        .collect())
}

/// At least 4 points spanning two decades.
pub fn validate_extrapolation_schedule(ns: &[usize]) -> Result<()> {
    validate_schedule(ns)?;
    let k = ns.len();
    if k < 4 {
        return domain(format!("extrapolation needs at least 4 schedule points, got {k}"));
    }
    if (ns[k - 1] as f64) < 100.0 * ns[0] as f64 {
        return domain(format!("extrapolation needs two decades, schedule spans {}..{}", ns[0], ns[k - 1]));
    }
    Ok(())
}

/// Least-squares fit of value_N = a + b/log N.
pub fn dixmier_estimate(table: &SequenceTable) -> Result<DixmierEstimate> {
    let ns = &table.schedule;
    let k = ns.len();
    validate_extrapolation_schedule(ns)?;
    let fail = |what: &str, achieved: f64, requested: f64| Error::NumericFailure {
        what: format!("{what}; raw table:\n{}", table.to_csv()),
        achieved,
        requested,
    };
    if table.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(fail("non-finite sequence value", f64::INFINITY, 0.0));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| 1.0 / (n as f64).ln()).collect();
    let kf = k as f64;
    let mean_x = xs.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let cond = xs.iter().map(|x| x * x).sum::<f64>() / sxx;
    if !(cond < 1e12) {
        return Err(fail("ill-conditioned a + b/log N fit", cond, 1e12));
    }
    let mean_y = table.values.iter().sum::<Complex64>() / kf;
    let sxy: Complex64 = xs.iter().zip(&table.values).map(|(x, y)| (y - mean_y) * (x - mean_x)).sum();
    let slope = sxy / sxx;
    let value = mean_y - slope * mean_x;
    let rss: f64 = xs.iter().zip(&table.values).map(|(x, y)| (y - value - slope * x).norm_sqr()).sum();
    let sigma2 = rss / (kf - 2.0);
    let uncertainty = (sigma2 * (1.0 / kf + mean_x * mean_x / sxx)).sqrt();
    Ok(DixmierEstimate {
        value,
        uncertainty,
        residual: (rss / kf).sqrt(),
        slope,
    })
}

/// Moduli of the entries when every row and column holds at most one
/// nonzero, padded with zeros; these are then the exact singular values.
fn monomial_moduli(t: &DMatrix<Complex64>) -> Option<Vec<f64>> {
    let mut col_used = vec![false; t.ncols()];
    let mut out = Vec::with_capacity(t.nrows().min(t.ncols()));
    for r in 0..t.nrows() {
        let mut found = None;
        for c in 0..t.ncols() {
            let z = t[(r, c)];
            if z != Complex64::new(0.0, 0.0) {
                if found.is_some() || col_used[c] {
                    return None;
                }
                found = Some(c);
                col_used[c] = true;
                out.push(z.norm());
            }
        }
    }
    out.resize(t.nrows().min(t.ncols()), 0.0);
    Some(out)
}

/// Singular values of `t` in decreasing order.
pub fn singular_values(t: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if let Some(mut mu) = monomial_moduli(t) {
        mu.sort_by(|a, b| b.total_cmp(a));
        return Ok(mu);
    }
    let svd = t.clone().try_svd(false, false, f64::EPSILON, 0).ok_or_else(|| Error::NumericFailure {
        what: "singular value decomposition did not converge".into(),
        achieved: f64::NAN,
        requested: f64::EPSILON,
    })?;
    let mut mu: Vec<f64> = svd.singular_values.iter().copied().collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok(mu)
}

/// γ_N = (log N)⁻¹ Σ_{n<N} μ_n from sorted singular values.
pub fn gamma_from_singular_values(mu: &[f64], schedule: &[usize]) -> Result<SequenceTable> {
    validate_schedule(schedule)?;
    let top = *schedule.last().unwrap();
    if top > mu.len() {
        return domain(format!("γ_N at N = {top} needs {top} singular values, matrix has {}", mu.len()));
    }
    let sums = prefix_at(schedule, |n| Complex64::new(mu[n], 0.0));
    SequenceTable::new(schedule.to_vec(), sums.iter().zip(schedule).map(|(s, &n)| s / (n as f64).ln()).collect())
}

pub fn gamma_sequence(t: &DMatrix<Complex64>, schedule: &[usize]) -> Result<SequenceTable> {
    gamma_from_singular_values(&singular_values(t)?, schedule)
}

/// sup_{2 ≤ N ≤ n_max} γ_N.
pub fn calderon_norm(t: &DMatrix<Complex64>, n_max: usize) -> Result<f64> {
    let mu = singular_values(t)?;
    let top = n_max.min(mu.len());
    if top < 2 {
        return domain("calderon_norm needs N_max >= 2");
    }
    let mut acc = mu[0];
    let mut best = 0.0f64;
    for n in 2..=top {
        acc += mu[n - 1];
        best = best.max(acc / (n as f64).ln());
    }
    Ok(best)
}

/// Estimate of Tr_Dix(Q_λ⁻¹ S_ω), term by term: each Υ_{n→k} M_g contributes
/// the A-sequence with elements ⟨ψ_{n,m}, M_{g,ω} ψ_{k,m}⟩ and ζ = k+1+λ.
pub fn element_dixmier(s: &L1Element, omega: &HullPoint, lambda: f64, schedule: &[usize], cfg: &DixmierConfig) -> Result<DixmierEstimate> {
    Ok(*element_dixmier_table(s, omega, lambda, schedule, cfg)?.extrapolated().unwrap())
}

/// Summed A-table behind [`element_dixmier`], with its extrapolation attached.
pub fn element_dixmier_table(s: &L1Element, omega: &HullPoint, lambda: f64, schedule: &[usize], cfg: &DixmierConfig) -> Result<SequenceTable> {
    zeta(0, lambda)?;
    validate_schedule(schedule)?;
    if s.order() != TermOrder::TransitionFirst {
        return domain("element_dixmier expects terms of the form Υ M_g");
    }
    let mut total = SequenceTable::new(schedule.to_vec(), vec![ZERO; schedule.len()])?;
    for t in s.terms() {
        if t.symbol.is_zero() {
            continue;
        }
        let weight = DixmierWeight::Potential(t.symbol.clone(), s.hull().clone(), omega.clone());
        let a = a_sequence(t.transition.source, t.transition.target, lambda, &weight, schedule, cfg)?;
        total = total.add(&a)?;
    }
    total.extrapolate()
}

/// D_N for a region weight through the scaling form
/// D_N = ∫₀^∞ dξ c_{j−i}(Nξ) G_N^{(i,j)}(ξ), c_k the angular Fourier
/// coefficients of the region at polar radius r = Nξ.
pub fn d_by_scaling(region: &RegionSpec, i: usize, j: usize, n: usize, cfg: &DixmierConfig) -> Result<Complex64> {
    if n < 2 {
        return domain("D_N by scaling needs N >= 2");
    }
    let params = &cfg.params;
    let k = j as i64 - i as i64;
    let nf = n as f64;
    // G_N is negligible beyond the Laguerre bulk of the top level N−1
    let (_, hi) = cfg.quad.window(i, j, n);
    let l2 = 2.0 * params.ell() * params.ell();
    let mut breaks = vec![0.0];
    for rho in region.radial_kinks(params.radius_of(hi)) {
        let r = rho * rho / l2;
        if r > 0.0 && r < hi {
            breaks.push(r / nf);
        }
    }
    breaks.push(hi / nf);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let integrate = |nodes: usize| -> Result<Complex64> {
        let gl = gauss_legendre(nodes);
        let scale = cfg.quad.panel_scale;
        // same panel widths as the radial element rule, expressed in ξ
        let pts = composite_nodes(&breaks, |xi| scale * (nf * xi).max(1.0).sqrt() / nf, &gl);
        let terms: Result<Vec<Complex64>> = pts
            .par_iter()
            .map(|&(xi, w)| Ok(angular_fourier(region, k, nf * xi, params) * (w * scaled_partial_sum(i, j, n, xi)?)))
            .collect();
        Ok(pairwise_sum(&terms?))
    };
    let coarse = integrate(cfg.quad.nodes)?;
    let fine = integrate(2 * cfg.quad.nodes)?;
    let diff = (coarse - fine).norm();
    if diff > cfg.quad.tolerance {
        return Err(Error::NumericFailure {
            what: "D_N by scaling: doubled-node check".into(),
            achieved: diff,
            requested: cfg.quad.tolerance,
        });
    }
    Ok(fine)
}
