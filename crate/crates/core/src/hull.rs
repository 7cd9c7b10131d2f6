//! Hulls (Ω, ℝ², t, P) realized as linear flows on tori, and the potentials
//! living on them.

use crate::error::{domain, Result};
use crate::numerics::{gauss_legendre, pairwise_sum, Estimate, GaussLegendre};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

/// Convergent denominators below this count as a rational relation.
pub const RATIONAL_DENOMINATOR_THRESHOLD: u64 = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum HullKind {
    Singleton,
    /// Lattice-periodic potentials; Ω = ℝ²/(αℤ + βℤ) in lattice coordinates.
    Torus { alpha: [f64; 2], beta: [f64; 2] },
    QuasiPeriodic,
    /// A fixed random trigonometric field per seed; Ω = phases on T^modes.
    RandomFourier { modes: usize, decay: f64, seed: u64 },
}

/// Ω = T^d with the linear action t_x(ω) = ω + F x mod 1 and Haar measure.
/// The singleton hull is the case d = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HullModel {
    kind: HullKind,
    flow: Vec<[f64; 2]>,
    ergodic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullPoint(pub Vec<f64>);

impl HullPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl HullModel {
    pub fn singleton() -> Self {
        Self {
            kind: HullKind::Singleton,
            flow: Vec::new(),
            ergodic: true,
        }
    }

    /// Periodic hull for the lattice spanned by the columns α, β.
    pub fn torus(alpha: [f64; 2], beta: [f64; 2]) -> Result<Self> {
        let det = alpha[0] * beta[1] - alpha[1] * beta[0];
        let scale = alpha[0].hypot(alpha[1]) * beta[0].hypot(beta[1]);
        if !(det.abs() > 1e-12 * scale) || !det.is_finite() {
            return domain("torus lattice vectors must be linearly independent");
        }
        // rows of B^{-1}, B = [α β]
        let flow = vec![[beta[1] / det, -beta[0] / det], [-alpha[1] / det, alpha[0] / det]];
        Ok(Self {
            kind: HullKind::Torus { alpha, beta },
            flow,
            ergodic: true,
        })
    }

    /// Square lattice of the given period.
    pub fn square_torus(period: f64) -> Result<Self> {
        Self::torus([period, 0.0], [0.0, period])
    }

    /// Quasi-periodic hull with frequency matrix F (one row per torus angle).
    /// The ergodic flag is cleared when an integer relation nᵀF = 0 with small
    /// coefficients is detected.
    pub fn quasi_periodic(freqs: Vec<[f64; 2]>) -> Result<Self> {
        if freqs.is_empty() {
            return domain("quasi-periodic hull needs at least one frequency row");
        }
        if freqs.iter().flatten().any(|v| !v.is_finite()) {
            return domain("non-finite frequency");
        }
        let ergodic = !has_small_integer_relation(&freqs);
        Ok(Self {
            kind: HullKind::QuasiPeriodic,
            flow: freqs,
            ergodic,
        })
    }

    /// Random-phase hull: `modes` plane waves with seeded random wave vectors
    /// of wavelength between 2/3 and 2, amplitudes decay^j.
    pub fn random_fourier(modes: usize, decay: f64, seed: u64) -> Result<Self> {
        if modes == 0 {
            return domain("random Fourier hull needs at least one mode");
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return domain(format!("decay must lie in (0, 1], got {decay}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flow = (0..modes)
            .map(|_| {
                let angle = rng.gen::<f64>() * TAU;
                let inv_wavelength = 0.5 + rng.gen::<f64>();
                [inv_wavelength * angle.cos(), inv_wavelength * angle.sin()]
            })
            .collect();
        Ok(Self {
            kind: HullKind::RandomFourier { modes, decay, seed },
            flow,
            ergodic: true,
        })
    }

    pub fn kind(&self) -> &HullKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.flow.len()
    }

    /// Rows of the flow matrix F.
    pub fn flow(&self) -> &[[f64; 2]] {
        &self.flow
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodic
    }

    /// Whether `expectation` is a deterministic quadrature (as opposed to
    /// Monte Carlo).
    pub fn has_exact_expectation(&self) -> bool {
        !matches!(self.kind, HullKind::RandomFourier { .. })
    }

    pub fn point(&self, coords: &[f64]) -> Result<HullPoint> {
        if coords.len() != self.dim() {
            return domain(format!("hull point needs {} coordinates, got {}", self.dim(), coords.len()));
        }
        Ok(HullPoint(coords.iter().map(|c| c.rem_euclid(1.0)).collect()))
    }

    pub fn origin(&self) -> HullPoint {
        HullPoint(vec![0.0; self.dim()])
    }

    /// t_a(ω) = ω + F a mod 1.
    pub fn translate(&self, omega: &HullPoint, a: [f64; 2]) -> HullPoint {
        HullPoint(
            omega
                .0
                .iter()
                .zip(&self.flow)
                .map(|(w, f)| (w + f[0] * a[0] + f[1] * a[1]).rem_euclid(1.0))
                .collect(),
        )
    }
}

fn small_denominator(x: f64) -> bool {
    // continued fraction convergents p/q of x
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if k1 >= RATIONAL_DENOMINATOR_THRESHOLD as f64 {
            return false;
        }
        if (x - h1 / k1).abs() <= 1e-9 * x.abs().max(1.0) {
            return true;
        }
        let frac = r - a;
        if frac.abs() < 1e-15 {
            return true;
        }
        r = 1.0 / frac;
    }
    false
}

/// Detects integer vectors n with nᵀF = 0 among small denominators. Exact for
/// d ≤ 3; for larger d every three-row subsystem is checked.
fn has_small_integer_relation(freqs: &[[f64; 2]]) -> bool {
    let d = freqs.len();
    match d {
        1 => freqs[0][0] == 0.0 && freqs[0][1] == 0.0,
        2 => {
            let det = freqs[0][0] * freqs[1][1] - freqs[0][1] * freqs[1][0];
            if det.abs() > 1e-12 {
                return false;
            }
            // rank one: a relation exists iff the rows are rationally proportional
            let (a, b) = if freqs[0][0].abs() + freqs[1][0].abs() > 0.0 {
                (freqs[0][0], freqs[1][0])
            } else {
                (freqs[0][1], freqs[1][1])
            };
            a == 0.0 || b == 0.0 || small_denominator((a / b).abs())
        }
        3 => {
            let (u, v, w) = (freqs[0], freqs[1], freqs[2]);
            // kernel of Fᵀ is spanned by the cross product of the two columns
            let c1 = [u[0], v[0], w[0]];
            let c2 = [u[1], v[1], w[1]];
            let k = [
                c1[1] * c2[2] - c1[2] * c2[1],
                c1[2] * c2[0] - c1[0] * c2[2],
                c1[0] * c2[1] - c1[1] * c2[0],
            ];
            let big = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if big == 0.0 {
                return true;
            }
            k.iter().all(|&c| c.abs() < 1e-14 * big || small_denominator((c / big).abs()))
        }
        _ => {
            for a in 0..d {
                for b in a + 1..d {
                    for c in b + 1..d {
                        if has_small_integer_relation(&[freqs[a], freqs[b], freqs[c]]) {
                            return true;
                        }
                    }
                }
            }
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// Trigonometric polynomial.
    Analytic,
    Smooth,
    Continuous,
}

/// a · e^{2πi n·ω}.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigMode {
    pub freq: Vec<i64>,
    pub amplitude: Complex64,
}

type SymbolFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum SymbolKind {
    Trig { constant: Complex64, modes: Vec<TrigMode> },
    Custom(SymbolFn),
}

/// A continuous function g : Ω → ℂ.
#[derive(Clone)]
pub struct PotentialSymbol {
    kind: SymbolKind,
    sup_bound: f64,
    smoothness: Smoothness,
}

impl fmt::Debug for PotentialSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SymbolKind::Trig { constant, modes } => f
                .debug_struct("PotentialSymbol")
                .field("constant", constant)
                .field("modes", modes)
                .finish(),
            SymbolKind::Custom(_) => f
                .debug_struct("PotentialSymbol")
                .field("custom", &true)
                .field("sup_bound", &self.sup_bound)
                .finish(),
        }
    }
}

impl PotentialSymbol {
    pub fn constant(c: Complex64) -> Self {
        Self {
            kind: SymbolKind::Trig {
                constant: c,
                modes: Vec::new(),
            },
            sup_bound: c.norm(),
            smoothness: Smoothness::Analytic,
        }
    }

    pub fn real_constant(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    /// c + Σ a_k e^{2πi n_k·ω}.
    pub fn trig(constant: Complex64, modes: Vec<TrigMode>) -> Self {
        let mut merged: Vec<TrigMode> = Vec::new();
        let mut constant = constant;
        for m in modes {
            if m.freq.iter().all(|&k| k == 0) {
                constant += m.amplitude;
            } else if let Some(e) = merged.iter_mut().find(|e| e.freq == m.freq) {
                e.amplitude += m.amplitude;
            } else {
                merged.push(m);
            }
        }
        merged.retain(|m| m.amplitude != Complex64::new(0.0, 0.0));
        let sup_bound = constant.norm() + merged.iter().map(|m| m.amplitude.norm()).sum::<f64>();
        Self {
            kind: SymbolKind::Trig {
                constant,
                modes: merged,
            },
            sup_bound,
            smoothness: Smoothness::Analytic,
        }
    }

    /// c + a cos(2π n·ω).
    pub fn cosine(offset: f64, amplitude: f64, freq: Vec<i64>) -> Self {
        let neg: Vec<i64> = freq.iter().map(|k| -k).collect();
        let half = Complex64::new(0.5 * amplitude, 0.0);
        Self::trig(
            Complex64::new(offset, 0.0),
            vec![
                TrigMode {
                    freq,
                    amplitude: half,
                },
                TrigMode {
                    freq: neg,
                    amplitude: half,
                },
            ],
        )
    }

    /// Σ_j decay^j cos(2π ω_j) on a random Fourier hull.
    pub fn random_fourier(hull: &HullModel) -> Result<Self> {
        let HullKind::RandomFourier { modes, decay, .. } = *hull.kind() else {
            return domain("random_fourier symbol needs a random Fourier hull");
        };
        let mut terms = Vec::with_capacity(2 * modes);
        for j in 0..modes {
            let a = 0.5 * decay.powi(j as i32);
            for s in [1i64, -1] {
                let mut freq = vec![0i64; modes];
                freq[j] = s;
                terms.push(TrigMode {
                    freq,
                    amplitude: Complex64::new(a, 0.0),
                });
            }
        }
        Ok(Self::trig(Complex64::new(0.0, 0.0), terms))
    }

    pub fn custom(
        f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
        sup_bound: f64,
        smoothness: Smoothness,
    ) -> Self {
        Self {
            kind: SymbolKind::Custom(Arc::new(f)),
            sup_bound,
            smoothness,
        }
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Constant term and modes when the symbol is a trigonometric polynomial.
    pub fn as_trig(&self) -> Option<(Complex64, &[TrigMode])> {
        match &self.kind {
            SymbolKind::Trig { constant, modes } => Some((*constant, modes)),
            SymbolKind::Custom(_) => None,
        }
    }

    pub fn as_constant(&self) -> Option<Complex64> {
        match self.as_trig() {
            Some((c, modes)) if modes.is_empty() => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, omega: &[f64]) -> Complex64 {
        match &self.kind {
            SymbolKind::Trig { constant, modes } => {
                let mut acc = *constant;
                for m in modes {
                    let phase: f64 = m.freq.iter().zip(omega).map(|(&k, &w)| k as f64 * w).sum();
                    acc += m.amplitude * Complex64::from_polar(1.0, TAU * phase);
                }
                acc
            }
            SymbolKind::Custom(f) => f(omega),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        match &self.kind {
            SymbolKind::Trig { constant, modes } => Self::trig(
                constant * c,
                modes
                    .iter()
                    .map(|m| TrigMode {
                        freq: m.freq.clone(),
                        amplitude: m.amplitude * c,
                    })
                    .collect(),
            ),
            SymbolKind::Custom(f) => {
                let f = f.clone();
                Self::custom(move |w| c * f(w), self.sup_bound * c.norm(), self.smoothness)
            }
        }
    }

    pub fn conj(&self) -> Self {
        match &self.kind {
            SymbolKind::Trig { constant, modes } => Self::trig(
                constant.conj(),
                modes
                    .iter()
                    .map(|m| TrigMode {
                        freq: m.freq.iter().map(|k| -k).collect(),
                        amplitude: m.amplitude.conj(),
                    })
                    .collect(),
            ),
            SymbolKind::Custom(f) => {
                let f = f.clone();
                Self::custom(move |w| f(w).conj(), self.sup_bound, self.smoothness)
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (&self.kind, &other.kind) {
            (SymbolKind::Trig { constant: c1, modes: m1 }, SymbolKind::Trig { constant: c2, modes: m2 }) => {
                Self::trig(c1 + c2, m1.iter().chain(m2).cloned().collect())
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let smooth = if self.smoothness == Smoothness::Continuous || other.smoothness == Smoothness::Continuous {
                    Smoothness::Continuous
                } else {
                    Smoothness::Smooth
                };
                Self::custom(move |w| a.eval(w) + b.eval(w), self.sup_bound + other.sup_bound, smooth)
            }
        }
    }

    /// The function x ↦ g(t_x ω).
    pub fn field(&self, hull: &HullModel, omega: &HullPoint) -> Result<PotentialField> {
        if omega.0.len() != hull.dim() {
            return domain("hull point does not match hull dimension");
        }
        let kind = match &self.kind {
            SymbolKind::Trig { constant, modes } => {
                let mut waves = Vec::with_capacity(modes.len());
                for m in modes {
                    if m.freq.len() != hull.dim() {
                        return domain(format!(
                            "symbol mode has {} frequencies, hull has dimension {}",
                            m.freq.len(),
                            hull.dim()
                        ));
                    }
                    let phase: f64 = m.freq.iter().zip(&omega.0).map(|(&k, &w)| k as f64 * w).sum();
                    let mut q = [0.0; 2];
                    for (k, f) in m.freq.iter().zip(hull.flow()) {
                        q[0] += TAU * *k as f64 * f[0];
                        q[1] += TAU * *k as f64 * f[1];
                    }
                    waves.push(PlaneWave {
                        amplitude: m.amplitude * Complex64::from_polar(1.0, TAU * phase),
                        q,
                    });
                }
                FieldKind::Waves {
                    constant: *constant,
                    waves,
                }
            }
            SymbolKind::Custom(f) => FieldKind::Custom {
                f: f.clone(),
                hull: hull.clone(),
                omega: omega.clone(),
            },
        };
        Ok(PotentialField { kind })
    }
}

/// a e^{i q·x}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub amplitude: Complex64,
    pub q: [f64; 2],
}

#[derive(Clone)]
enum FieldKind {
    Waves { constant: Complex64, waves: Vec<PlaneWave> },
    Custom { f: SymbolFn, hull: HullModel, omega: HullPoint },
}

/// A potential realized at a fixed hull point: x ↦ g(t_x ω).
#[derive(Clone)]
pub struct PotentialField {
    kind: FieldKind,
}

impl PotentialField {
    pub fn eval(&self, x: [f64; 2]) -> Complex64 {
        match &self.kind {
            FieldKind::Waves { constant, waves } => {
                let mut acc = *constant;
                for w in waves {
                    acc += w.amplitude * Complex64::from_polar(1.0, w.q[0] * x[0] + w.q[1] * x[1]);
                }
                acc
            }
            FieldKind::Custom { f, hull, omega } => f(&hull.translate(omega, x).0),
        }
    }

    /// Constant part and plane waves when the symbol is a trigonometric polynomial.
    pub fn plane_waves(&self) -> Option<(Complex64, &[PlaneWave])> {
        match &self.kind {
            FieldKind::Waves { constant, waves } => Some((*constant, waves)),
            FieldKind::Custom { .. } => None,
        }
    }

    /// Largest |q| when known.
    pub fn max_wavenumber(&self) -> Option<f64> {
        self.plane_waves()
            .map(|(_, w)| w.iter().map(|p| p.q[0].hypot(p.q[1])).fold(0.0, f64::max))
    }
}

/// V_ω(x) = g(t_x(ω)).
pub fn evaluate_potential(g: &PotentialSymbol, hull: &HullModel, omega: &HullPoint, x: [f64; 2]) -> Complex64 {
    g.eval(&hull.translate(omega, x).0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationConfig {
    /// Trapezoid points per torus dimension (capped so the grid stays below 2^20 points).
    pub points: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for ExpectationConfig {
    fn default() -> Self {
        Self {
            points: 64,
            mc_samples: 20_000,
            seed: 0x5eed,
        }
    }
}

fn torus_trapezoid(d: usize, n: usize, g: &PotentialSymbol) -> Complex64 {
    let total = n.pow(d as u32);
    let mut coords = vec![0.0; d];
    let vals: Vec<Complex64> = (0..total)
        .map(|mut idx| {
            for c in coords.iter_mut() {
                *c = (idx % n) as f64 / n as f64;
                idx /= n;
            }
            g.eval(&coords)
        })
        .collect();
    pairwise_sum(&vals) / total as f64
}

/// Hull points of the tensor trapezoid grid used by [`expectation`], or
/// seeded uniform samples for Monte Carlo hulls.
pub fn hull_samples(hull: &HullModel, cfg: &ExpectationConfig) -> Vec<HullPoint> {
    let d = hull.dim();
    if d == 0 {
        return vec![HullPoint(Vec::new())];
    }
    if !hull.has_exact_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        return (0..cfg.mc_samples)
            .map(|_| HullPoint((0..d).map(|_| rng.gen::<f64>()).collect()))
            .collect();
    }
    let n = grid_points(d, cfg.points);
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            HullPoint(
                (0..d)
                    .map(|_| {
                        let c = (idx % n) as f64 / n as f64;
                        idx /= n;
                        c
                    })
                    .collect(),
            )
        })
        .collect()
}

fn grid_points(d: usize, requested: usize) -> usize {
    let mut n = requested.max(2);
    while (n as f64).powi(d as i32) > (1u64 << 20) as f64 {
        n /= 2;
    }
    n
}

/// E[g] = ∫ g dP.
///
/// Tensor trapezoid on the torus (exact for trigonometric polynomials of
/// degree below the grid size), the error being the change against the
/// half-resolution grid. Random Fourier hulls use seeded Monte Carlo with the
/// standard error reported.
pub fn expectation(hull: &HullModel, g: &PotentialSymbol, cfg: &ExpectationConfig) -> Estimate {
    let d = hull.dim();
    if d == 0 {
        return Estimate::exact(g.eval(&[]));
    }
    if !hull.has_exact_expectation() {
        let samples = hull_samples(hull, cfg);
        let vals: Vec<Complex64> = samples.iter().map(|w| g.eval(&w.0)).collect();
        let n = vals.len() as f64;
        let mean = pairwise_sum(&vals) / n;
        let var: f64 = pairwise_sum(&vals.iter().map(|v| (v - mean).norm_sqr()).collect::<Vec<_>>()) / (n - 1.0);
        return Estimate {
            value: mean,
            error: (var / n).sqrt(),
        };
    }
    let n = grid_points(d, cfg.points);
    let fine = torus_trapezoid(d, n, g);
    let coarse = torus_trapezoid(d, (n / 2).max(1), g);
    Estimate {
        value: fine,
        error: (fine - coarse).norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageQuadrature {
    /// Gauss–Legendre nodes per panel and direction.
    pub nodes: usize,
    /// Largest panel width used when the potential bandwidth is unknown.
    pub max_panel: f64,
}

impl Default for AverageQuadrature {
    fn default() -> Self {
        Self {
            nodes: 10,
            max_panel: 0.5,
        }
    }
}

impl AverageQuadrature {
    /// Panel width resolving a field of the given bandwidth.
    pub fn panel_for(&self, wavenumber: Option<f64>) -> f64 {
        match wavenumber {
            Some(q) if q > 0.0 => PI / q,
            Some(_) => f64::INFINITY,
            None => self.max_panel,
        }
    }
}

pub(crate) fn line_rule(lo: f64, hi: f64, panel: f64, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let pieces = if panel.is_finite() {
        ((hi - lo) / panel).ceil().max(1.0) as usize
    } else {
        1
    };
    let step = (hi - lo) / pieces as f64;
    let mut out = Vec::with_capacity(pieces * gl.len());
    for p in 0..pieces {
        let a = lo + p as f64 * step;
        out.extend(gl.mapped(a, a + step));
    }
    out
}

/// |Λ|^{-1} ∫_Λ f over the square of side `side` centred at `center`.
pub fn square_average(f: impl Fn([f64; 2]) -> Complex64 + Sync, center: [f64; 2], side: f64, panel: f64, nodes: usize) -> Complex64 {
    let gl = gauss_legendre(nodes);
    let h = 0.5 * side;
    let xs = line_rule(center[0] - h, center[0] + h, panel, &gl);
    let ys = line_rule(center[1] - h, center[1] + h, panel, &gl);
    let rows: Vec<Complex64> = {
        use rayon::prelude::*;
        ys.par_iter()
            .map(|&(y, wy)| {
                let row: Vec<Complex64> = xs.iter().map(|&(x, wx)| f([x, y]) * wx).collect();
                pairwise_sum(&row) * wy
            })
            .collect()
    };
    pairwise_sum(&rows) / (side * side)
}

/// |B|^{-1} ∫_B f over the disk of radius `radius` centred at `center`.
pub fn disk_average(
    f: impl Fn([f64; 2]) -> Complex64 + Sync,
    center: [f64; 2],
    radius: f64,
    panel: f64,
    nodes: usize,
) -> Complex64 {
    use rayon::prelude::*;
    let gl = gauss_legendre(nodes);
    let rs = line_rule(0.0, radius, panel, &gl);
    let rings: Vec<Complex64> = rs
        .par_iter()
        .map(|&(r, wr)| {
            // trapezoid in angle, resolving the arc length at this radius
            let m = ((TAU * r / panel.min(radius)) * 2.0).ceil().max(16.0) as usize;
            let pts: Vec<Complex64> = (0..m)
                .map(|k| {
                    let t = TAU * (k as f64 + 0.5) / m as f64;
                    f([center[0] + r * t.cos(), center[1] + r * t.sin()])
                })
                .collect();
            pairwise_sum(&pts) * (TAU / m as f64) * r * wr
        })
        .collect();
    pairwise_sum(&rings) / (PI * radius * radius)
}

/// |Λ|^{-1} ∫_Λ g(t_{−x}(ω)) dx over the centred square of side L.
pub fn birkhoff_average(
    hull: &HullModel,
    g: &PotentialSymbol,
    omega: &HullPoint,
    side: f64,
    quad: &AverageQuadrature,
) -> Result<Complex64> {
    if !(side > 0.0) {
        return domain("box side must be positive");
    }
    let field = g.field(hull, omega)?;
    let panel = quad.panel_for(field.max_wavenumber());
    Ok(square_average(|x| field.eval([-x[0], -x[1]]), [0.0, 0.0], side, panel, quad.nodes))
}

/// Same average over the centred disk of the given radius.
pub fn birkhoff_disk_average(
    hull: &HullModel,
    g: &PotentialSymbol,
    omega: &HullPoint,
    radius: f64,
    quad: &AverageQuadrature,
) -> Result<Complex64> {
    if !(radius > 0.0) {
        return domain("disk radius must be positive");
    }
    let field = g.field(hull, omega)?;
    let panel = quad.panel_for(field.max_wavenumber());
    Ok(disk_average(|x| field.eval([-x[0], -x[1]]), [0.0, 0.0], radius, panel, quad.nodes))
}

/// A compactly supported mollifier profile φ on ℝ².
#[derive(Clone)]
pub struct MollifierProfile {
    f: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    radius: f64,
    l1_norm: f64,
}

impl fmt::Debug for MollifierProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MollifierProfile")
            .field("radius", &self.radius)
            .field("l1_norm", &self.l1_norm)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifyQuadrature {
    /// Radial Gauss–Legendre panels and nodes per panel.
    pub panels: usize,
    pub nodes: usize,
    /// Trapezoid points in angle.
    pub angles: usize,
}

impl Default for MollifyQuadrature {
    fn default() -> Self {
        Self {
            panels: 8,
            nodes: 20,
            angles: 64,
        }
    }
}

impl MollifyQuadrature {
    fn fine() -> Self {
        Self {
            panels: 32,
            nodes: 20,
            angles: 128,
        }
    }
}

/// Polar product rule on the disk: Gauss–Legendre panels in r, trapezoid in angle.
fn polar_nodes(radius: f64, quad: &MollifyQuadrature) -> Vec<([f64; 2], f64)> {
    let gl = gauss_legendre(quad.nodes);
    let rs = line_rule(0.0, radius, radius / quad.panels.max(1) as f64, &gl);
    let m = quad.angles.max(4);
    let dt = TAU / m as f64;
    let mut out = Vec::with_capacity(rs.len() * m);
    for &(r, wr) in &rs {
        for k in 0..m {
            let t = (k as f64 + 0.5) * dt;
            out.push(([r * t.cos(), r * t.sin()], r * wr * dt));
        }
    }
    out
}

fn bump_raw(y: [f64; 2], radius: f64) -> f64 {
    let s = (y[0] * y[0] + y[1] * y[1]) / (radius * radius);
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s)).exp()
    }
}

impl MollifierProfile {
    /// Profile from an arbitrary function supported in the disk of `radius`.
    pub fn new(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return domain("mollifier support radius must be positive");
        }
        let f: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync> = Arc::new(f);
        let l1 = polar_nodes(radius, &MollifyQuadrature::fine())
            .iter()
            .map(|&(y, w)| f(y).abs() * w)
            .sum();
        Ok(Self { f, radius, l1_norm: l1 })
    }

    /// The standard bump e^{−1/(1−|y|²/R²)} normalized to unit integral.
    pub fn bump(radius: f64) -> Result<Self> {
        let raw = Self::new(move |y| bump_raw(y, radius), radius)?;
        let c = 1.0 / raw.l1_norm;
        let mut out = Self::new(move |y| c * bump_raw(y, radius), radius)?;
        out.l1_norm = 1.0;
        Ok(out)
    }

    /// ∂_j of the normalized bump of the given radius.
    pub fn bump_partial(radius: f64, axis: usize) -> Result<Self> {
        if axis > 1 {
            return domain("axis must be 0 or 1");
        }
        let base = Self::bump(radius)?;
        let phi = base.f.clone();
        Self::new(
            move |y| {
                let s = (y[0] * y[0] + y[1] * y[1]) / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    phi(y) * (-2.0 * y[axis] / (radius * radius)) / ((1.0 - s) * (1.0 - s))
                }
            },
            radius,
        )
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        (self.f)(y)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }
}

/// g_φ(ω) = ∫ φ(y) g(t_{−y}(ω)) dy as a new symbol with sup bound ‖φ‖₁‖g‖_∞.
pub fn mollify(
    hull: &HullModel,
    g: &PotentialSymbol,
    phi: &MollifierProfile,
    quad: &MollifyQuadrature,
) -> PotentialSymbol {
    let nodes: Vec<([f64; 2], f64)> = polar_nodes(phi.radius, quad)
        .into_iter()
        .map(|(y, w)| (y, phi.eval(y) * w))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let hull = hull.clone();
    let g2 = g.clone();
    let bound = phi.l1_norm * g.sup_bound();
    let smooth = if g.smoothness() == Smoothness::Analytic {
        Smoothness::Analytic
    } else {
        Smoothness::Smooth
    };
    PotentialSymbol::custom(
        move |omega| {
            let w = HullPoint(omega.to_vec());
            let vals: Vec<Complex64> = nodes
                .iter()
                .map(|&(y, wt)| g2.eval(&hull.translate(&w, [-y[0], -y[1]]).0) * wt)
                .collect();
            pairwise_sum(&vals)
        },
        bound,
        smooth,
    )
}
