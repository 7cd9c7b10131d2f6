//! Trace per unit volume of weighted-transition operators.
//!
//! For S = Σ Υ_{n→m} M_g the integral kernel on the diagonal is
//! K_{S_ω}(x,x) = (2πℓ²)⁻¹ Σ_n g_{n,n}(t_x ω); off-diagonal transitions do not
//! contribute. Box traces are 2D averages of that function.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::elements::{tau_p, L1Element};
use crate::error::{domain, Result};
use crate::hull::{disk_average, evaluate_potential, hull_samples, square_average, AverageQuadrature, ExpectationConfig, HullPoint, PotentialField};
use crate::laguerre::MagneticParams;
use crate::numerics::{pairwise_sum, Estimate};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// K_{S_ω}(x, x).
pub fn diagonal_kernel(s: &L1Element, omega: &HullPoint, x: [f64; 2], params: &MagneticParams) -> Complex64 {
    let mut acc = ZERO;
    for t in s.terms() {
        if t.transition.is_projection() {
            acc += evaluate_potential(&t.symbol, s.hull(), omega, x);
        }
    }
    acc * params.c0()
}

/// Diagonal potentials g_{n,n} of S as fields on the plane at ω.
fn diagonal_fields(s: &L1Element, omega: &HullPoint) -> Result<Vec<PotentialField>> {
    s.terms()
        .iter()
        .filter(|t| t.transition.is_projection() && !t.symbol.is_zero())
        .map(|t| t.symbol.field(s.hull(), omega))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FolnerShape {
    Square,
    /// Disk with the area of the square of the same size.
    Disk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FolnerSchedule {
    shape: FolnerShape,
    sizes: Vec<f64>,
}

impl FolnerSchedule {
    pub fn new(shape: FolnerShape, sizes: Vec<f64>) -> Result<Self> {
        if sizes.len() < 3 {
            return domain("Følner schedule needs at least 3 sizes");
        }
        if !sizes.iter().all(|s| s.is_finite() && *s > 0.0) {
            return domain("Følner sizes must be positive");
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return domain("Følner sizes must increase");
        }
        Ok(Self { shape, sizes })
    }

    pub fn square(sizes: Vec<f64>) -> Result<Self> {
        Self::new(FolnerShape::Square, sizes)
    }

    pub fn disk(sizes: Vec<f64>) -> Result<Self> {
        Self::new(FolnerShape::Disk, sizes)
    }

    pub fn shape(&self) -> FolnerShape {
        self.shape
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }
}

/// A box of the Følner family, centred anywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FolnerBox {
    pub shape: FolnerShape,
    pub size: f64,
    pub center: [f64; 2],
}

impl FolnerBox {
    pub fn centered(shape: FolnerShape, size: f64) -> Self {
        Self {
            shape,
            size,
            center: [0.0, 0.0],
        }
    }

    pub fn area(&self) -> f64 {
        self.size * self.size
    }
}

/// Closed-form square average of e^{iq·x}: e^{iq·c} sinc(q₁L/2) sinc(q₂L/2).
fn square_plane_wave(q: [f64; 2], center: [f64; 2], side: f64) -> Complex64 {
    let sinc = |t: f64| if t.abs() < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    Complex64::from_polar(1.0, q[0] * center[0] + q[1] * center[1]) * (sinc(0.5 * q[0] * side) * sinc(0.5 * q[1] * side))
}

fn field_average(field: &PotentialField, b: &FolnerBox, quad: &AverageQuadrature, closed_form: bool) -> Complex64 {
    if let Some((c, waves)) = field.plane_waves() {
        if waves.is_empty() {
            return c;
        }
        if closed_form && b.shape == FolnerShape::Square {
            return c + waves.iter().map(|w| w.amplitude * square_plane_wave(w.q, b.center, b.size)).sum::<Complex64>();
        }
    }
    let panel = quad.panel_for(field.max_wavenumber());
    match b.shape {
        FolnerShape::Square => square_average(|x| field.eval(x), b.center, b.size, panel, quad.nodes),
        FolnerShape::Disk => {
            let radius = b.size / std::f64::consts::PI.sqrt();
            disk_average(|x| field.eval(x), b.center, radius, panel, quad.nodes)
        }
    }
}

/// |Λ|⁻¹ ∫_Λ K_{S_ω}(x, x) dx. Trigonometric potentials on squares use the
/// closed-form plane-wave average; everything else is 2D Gauss–Legendre.
pub fn box_trace(s: &L1Element, omega: &HullPoint, b: &FolnerBox, params: &MagneticParams, quad: &AverageQuadrature) -> Result<Complex64> {
    box_trace_with(s, omega, b, params, quad, true)
}

/// [`box_trace`] forced through quadrature.
pub fn box_trace_quadrature(s: &L1Element, omega: &HullPoint, b: &FolnerBox, params: &MagneticParams, quad: &AverageQuadrature) -> Result<Complex64> {
    box_trace_with(s, omega, b, params, quad, false)
}

fn box_trace_with(
    s: &L1Element,
    omega: &HullPoint,
    b: &FolnerBox,
    params: &MagneticParams,
    quad: &AverageQuadrature,
    closed_form: bool,
) -> Result<Complex64> {
    if !(b.size > 0.0) {
        return domain("box size must be positive");
    }
    let mut acc = ZERO;
    for field in diagonal_fields(s, omega)? {
        acc += field_average(&field, b, quad, closed_form);
    }
    Ok(acc * params.c0())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuvEstimate {
    pub value: Complex64,
    /// |last − second-to-last| along the schedule.
    pub uncertainty: f64,
    pub sizes: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl TuvEstimate {
    /// Columns size, value_re, value_im.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,value_re,value_im\n");
        for (l, v) in self.sizes.iter().zip(&self.values) {
            let _ = writeln!(out, "{l:.16e},{:.16e},{:.16e}", v.re, v.im);
        }
        out
    }
}

pub fn tuv_estimate(
    s: &L1Element,
    omega: &HullPoint,
    schedule: &FolnerSchedule,
    params: &MagneticParams,
    quad: &AverageQuadrature,
) -> Result<TuvEstimate> {
    let values = schedule
        .sizes
        .iter()
        .map(|&l| box_trace(s, omega, &FolnerBox::centered(schedule.shape, l), params, quad))
        .collect::<Result<Vec<_>>>()?;
    let k = values.len();
    Ok(TuvEstimate {
        value: values[k - 1],
        uncertainty: (values[k - 1] - values[k - 2]).norm(),
        sizes: schedule.sizes.clone(),
        values,
    })
}

/// Controls for hull-averaged traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuvConfig {
    pub params: MagneticParams,
    pub quad: AverageQuadrature,
    /// Hull sampling; tori use the tensor trapezoid grid, so a few points per
    /// dimension already average low-degree trigonometric potentials exactly.
    pub omega: ExpectationConfig,
}

impl Default for TuvConfig {
    fn default() -> Self {
        Self {
            params: MagneticParams::default(),
            quad: AverageQuadrature::default(),
            omega: ExpectationConfig {
                points: 8,
                ..ExpectationConfig::default()
            },
        }
    }
}

/// ∫dP(ω) of the Følner estimate. The uncertainty adds the mean schedule
/// spread and, for Monte Carlo hulls, the sampling standard error.
pub fn tuv_expectation(s: &L1Element, schedule: &FolnerSchedule, cfg: &TuvConfig) -> Result<Estimate> {
    let samples = hull_samples(s.hull(), &cfg.omega);
    let ests = samples
        .par_iter()
        .map(|w| tuv_estimate(s, w, schedule, &cfg.params, &cfg.quad))
        .collect::<Result<Vec<_>>>()?;
    let n = ests.len() as f64;
    let values: Vec<Complex64> = ests.iter().map(|e| e.value).collect();
    let mean = pairwise_sum(&values) / n;
    let spread = ests.iter().map(|e| e.uncertainty).sum::<f64>() / n;
    let sampling = if s.hull().has_exact_expectation() || ests.len() < 2 {
        0.0
    } else {
        let var: f64 = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(Estimate {
        value: mean,
        error: spread + sampling,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub tau_p: Estimate,
    /// 2πℓ² times the trace per unit volume.
    pub scaled_tuv: Estimate,
    pub discrepancy: f64,
    /// discrepancy / max(|τ_P|, |scaled_tuv|), or 0 when both vanish.
    pub relative: f64,
}

/// τ_P(S) against 2πℓ²·T_u.v.(S).
pub fn consistency_2lambda(s: &L1Element, schedule: &FolnerSchedule, cfg: &TuvConfig) -> Result<ConsistencyReport> {
    let tau = tau_p(s, &cfg.omega);
    let t = tuv_expectation(s, schedule, cfg)?;
    let area = 1.0 / cfg.params.c0();
    let scaled = Estimate {
        value: t.value * area,
        error: t.error * area,
    };
    let discrepancy = (tau.value - scaled.value).norm();
    let scale = tau.value.norm().max(scaled.value.norm());
    Ok(ConsistencyReport {
        tau_p: tau,
        scaled_tuv: scaled,
        discrepancy,
        relative: if scale > 0.0 { discrepancy / scale } else { 0.0 },
    })
}

/// A window function supported in the square of side `side` centred at `center`.
#[derive(Clone)]
pub struct Window {
    f: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    center: [f64; 2],
    side: f64,
}

impl std::fmt::Debug for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Window").field("center", &self.center).field("side", &self.side).finish()
    }
}

impl Window {
    pub fn new(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static, center: [f64; 2], side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return domain("window support must have positive side");
        }
        Ok(Self {
            f: Arc::new(f),
            center,
            side,
        })
    }

    /// (πσ²)^{-1/2} e^{−|x|²/(2σ²)}, unit L² norm, cropped at 10σ.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return domain("window width must be positive");
        }
        let norm = 1.0 / (std::f64::consts::PI.sqrt() * sigma);
        Self::new(move |x| norm * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma * sigma)).exp(), [0.0, 0.0], 20.0 * sigma)
    }

    /// Normalized indicator of the square of side `side` centred at `center`.
    pub fn square_indicator(center: [f64; 2], side: f64) -> Result<Self> {
        let h = 1.0 / side;
        Self::new(move |_| h, center, side)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        (self.f)(x)
    }
}

fn window_integral(window: &Window, f: impl Fn([f64; 2]) -> Complex64 + Sync, panel: f64, nodes: usize) -> Complex64 {
    let area = window.side * window.side;
    square_average(|x| f(x) * window.eval(x).powi(2), window.center, window.side, panel, nodes) * area
}

/// ∫dP(ω) ∫dx window(x)² K_{S_ω}(x, x).
pub fn windowed_trace(s: &L1Element, window: &Window, cfg: &TuvConfig) -> Result<Complex64> {
    let panel = cfg.quad.max_panel;
    let norm = window_integral(window, |_| Complex64::new(1.0, 0.0), panel, cfg.quad.nodes).re;
    if (norm - 1.0).abs() > 1e-8 {
        return domain(format!("window must have unit L² norm, got {norm}"));
    }
    let samples = hull_samples(s.hull(), &cfg.omega);
    let vals = samples
        .par_iter()
        .map(|w| {
            let fields = diagonal_fields(s, w)?;
            let band = fields.iter().filter_map(|f| f.max_wavenumber()).fold(0.0, f64::max);
            let p = panel.min(cfg.quad.panel_for(Some(band)));
            Ok(window_integral(window, |x| fields.iter().map(|f| f.eval(x)).sum::<Complex64>(), p, cfg.quad.nodes))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&vals) / vals.len() as f64 * cfg.params.c0())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(FolnerSchedule::square(vec![1.0, 2.0]).is_err());
        assert!(FolnerSchedule::square(vec![1.0, 3.0, 2.0]).is_err());
        assert!(FolnerSchedule::disk(vec![0.0, 1.0, 2.0]).is_err());
        assert!(FolnerSchedule::disk(vec![1.0, 2.0, 4.0]).is_ok());
    }

    #[test]
    fn sinc_average_matches_direct() {
        let q = [0.7, -1.3];
        let c = [0.4, 2.0];
        let direct = square_average(|x| Complex64::from_polar(1.0, q[0] * x[0] + q[1] * x[1]), c, 3.3, 0.5, 12);
        assert!((direct - square_plane_wave(q, c, 3.3)).norm() < 1e-14);
    }
}
