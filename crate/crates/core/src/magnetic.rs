//! The twisted kernel algebra on Ω × ℝ²: cocycle, magnetic translations,
//! twisted convolution, involution, norms, the kernel trace, and the magnetic
//! operators K_f of the one-point hull.

use crate::error::{domain, Error, Result};
use crate::hull::{HullModel, HullPoint, PotentialSymbol};
use crate::laguerre::{psi, BasisIndex, MagneticParams};
use crate::numerics::pairwise_sum;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn wedge(x: [f64; 2], y: [f64; 2]) -> f64 {
    x[0] * y[1] - x[1] * y[0]
}

/// Θ_B(x, y) = e^{i x∧y / 2ℓ²}.
pub fn theta(x: [f64; 2], y: [f64; 2], params: &MagneticParams) -> Complex64 {
    let l = params.ell();
    Complex64::from_polar(1.0, wedge(x, y) / (2.0 * l * l))
}

/// e^{i p h² / 2ℓ²} for integer p in [−max, max].
struct PhaseTable {
    max: i64,
    table: Vec<Complex64>,
}

impl PhaseTable {
    fn new(max: i64, step: f64, params: &MagneticParams) -> Self {
        let l = params.ell();
        let unit = step * step / (2.0 * l * l);
        let table = (-max..=max).map(|p| Complex64::from_polar(1.0, p as f64 * unit)).collect();
        Self { max, table }
    }

    #[inline]
    fn get(&self, p: i64) -> Complex64 {
        self.table[(p + self.max) as usize]
    }
}

/// Square grid {h(i, j) : |i|, |j| ≤ half_width}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    step: f64,
    half_width: usize,
}

impl Grid2 {
    pub fn new(step: f64, half_width: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return domain("grid step must be positive");
        }
        Ok(Self { step, half_width })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn extent(&self) -> f64 {
        self.step * self.half_width as f64
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        let n = self.half_width as i64;
        i.abs() <= n && j.abs() <= n
    }

    #[inline]
    pub(crate) fn index(&self, i: i64, j: i64) -> usize {
        let n = self.half_width as i64;
        ((i + n) as usize) * self.side() + (j + n) as usize
    }

    #[inline]
    pub(crate) fn coords(&self, flat: usize) -> (i64, i64) {
        let n = self.half_width as i64;
        ((flat / self.side()) as i64 - n, (flat % self.side()) as i64 - n)
    }

    pub fn point(&self, i: i64, j: i64) -> [f64; 2] {
        [i as f64 * self.step, j as f64 * self.step]
    }

    fn with_half_width(&self, half_width: usize) -> Self {
        Self {
            step: self.step,
            half_width,
        }
    }
}

/// A wavefunction sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWave {
    grid: Grid2,
    values: Vec<Complex64>,
}

impl SampledWave {
    pub fn from_fn(grid: Grid2, f: impl Fn([f64; 2]) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.coords(k);
                f(grid.point(i, j))
            })
            .collect();
        Self { grid, values }
    }

    pub fn basis(idx: BasisIndex, grid: Grid2, params: &MagneticParams) -> Self {
        Self::from_fn(grid, |x| psi(idx, x, params))
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, i: i64, j: i64) -> Complex64 {
        if self.grid.contains(i, j) {
            self.values[self.grid.index(i, j)]
        } else {
            ZERO
        }
    }

    /// h² Σ conj(self)·other.
    pub fn inner(&self, other: &SampledWave) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::Structural("sampled waves live on different grids".into()));
        }
        let terms: Vec<Complex64> = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).collect();
        Ok(pairwise_sum(&terms) * self.grid.step * self.grid.step)
    }

    pub fn max_abs_diff(&self, other: &SampledWave) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn boundary_max(&self) -> f64 {
        let n = self.grid.half_width as i64;
        (-n..=n)
            .flat_map(|k| [(k, n), (k, -n), (n, k), (-n, k)])
            .map(|(i, j)| self.at(i, j).norm())
            .fold(0.0, f64::max)
    }
}

/// Outcome of snapping a translation to the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Translation {
    /// The translation actually applied (a grid vector).
    pub applied: [f64; 2],
    /// Whether the requested vector had to be rounded to the grid.
    pub snapped: bool,
}

fn translate_sampled(a: [f64; 2], psi: &SampledWave, params: &MagneticParams, sign: f64) -> (SampledWave, Translation) {
    let h = psi.grid.step;
    let si = (a[0] / h).round();
    let sj = (a[1] / h).round();
    let snapped = (a[0] - si * h).abs() > 1e-12 * h.max(a[0].abs()) || (a[1] - sj * h).abs() > 1e-12 * h.max(a[1].abs());
    let (si, sj) = (si as i64, sj as i64);
    let applied = [si as f64 * h, sj as f64 * h];
    let l = params.ell();
    let grid = psi.grid;
    let values = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            let x = grid.point(i, j);
            let phase = sign * wedge(x, applied) / (2.0 * l * l);
            Complex64::from_polar(1.0, phase) * psi.at(i - si, j - sj)
        })
        .collect();
    (SampledWave { grid, values }, Translation { applied, snapped })
}

/// (U(a)ψ)(x) = e^{−i x∧a/2ℓ²} ψ(x − a); a is snapped to the grid and
/// values shifted in from outside the grid are zero.
pub fn apply_u(a: [f64; 2], psi: &SampledWave, params: &MagneticParams) -> (SampledWave, Translation) {
    translate_sampled(a, psi, params, -1.0)
}

/// (V(a)ψ)(x) = e^{+i x∧a/2ℓ²} ψ(x − a).
pub fn apply_v(a: [f64; 2], psi: &SampledWave, params: &MagneticParams) -> (SampledWave, Translation) {
    translate_sampled(a, psi, params, 1.0)
}

/// Uniform grid on the hull torus, commensurate with a spatial step: every
/// spatial grid translation moves ω by whole ω-grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaGrid {
    points: usize,
    /// Per torus dimension, the ω-cell shift caused by one spatial step along each axis.
    shifts: Vec<[i64; 2]>,
}

impl OmegaGrid {
    pub fn new(hull: &HullModel, points: usize, step: f64) -> Result<Self> {
        if hull.dim() == 0 {
            return Ok(Self {
                points: 1,
                shifts: Vec::new(),
            });
        }
        if points == 0 {
            return domain("ω grid needs at least one point per dimension");
        }
        if (points as f64).powi(hull.dim() as i32) > (1u64 << 22) as f64 {
            return domain("ω grid too large");
        }
        let mut shifts = Vec::with_capacity(hull.dim());
        for row in hull.flow() {
            let mut s = [0i64; 2];
            for c in 0..2 {
                let v = row[c] * step * points as f64;
                if (v - v.round()).abs() > 1e-9 {
                    return Err(Error::Structural(format!(
                        "spatial step {step} is not commensurate with the hull flow on a {points}-point ω grid"
                    )));
                }
                s[c] = v.round() as i64;
            }
            shifts.push(s);
        }
        Ok(Self { points, shifts })
    }

    pub fn dim(&self) -> usize {
        self.shifts.len()
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, flat: usize) -> HullPoint {
        let mut rest = flat;
        HullPoint(
            (0..self.dim())
                .map(|_| {
                    let c = (rest % self.points) as f64 / self.points as f64;
                    rest /= self.points;
                    c
                })
                .collect(),
        )
    }

    /// Index of t_{h(i,j)}(ω).
    fn translated(&self, flat: usize, i: i64, j: i64) -> usize {
        let n = self.points as i64;
        let mut rest = flat;
        let mut out = 0usize;
        let mut stride = 1usize;
        for s in &self.shifts {
            let k = (rest % self.points) as i64;
            rest /= self.points;
            let moved = (k + s[0] * i + s[1] * j).rem_euclid(n) as usize;
            out += moved * stride;
            stride *= self.points;
        }
        out
    }
}

/// Spatial grid and ω resolution for kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGrid {
    pub step: f64,
    pub half_width: usize,
    pub omega_points: usize,
}

impl KernelGrid {
    /// h = ℓ/8, extent 12ℓ, 64 ω points per torus dimension.
    pub fn standard(params: &MagneticParams) -> Self {
        Self {
            step: params.ell() / 8.0,
            half_width: 96,
            omega_points: 64,
        }
    }
}

/// A kernel F(ω, x) sampled on an ω grid times a centred spatial grid,
/// with bilinear interpolation in x and zero outside the grid.
#[derive(Clone)]
pub struct KernelFunction {
    hull: HullModel,
    params: MagneticParams,
    omega: OmegaGrid,
    grid: Grid2,
    /// values[ω * grid.len() + x]
    values: Vec<Complex64>,
    truncation: f64,
    rounding: f64,
}

impl fmt::Debug for KernelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFunction")
            .field("hull", self.hull.kind())
            .field("omega_points", &self.omega.len())
            .field("grid", &self.grid)
            .field("error_budget", &self.error_budget())
            .finish()
    }
}

impl KernelFunction {
    pub fn from_fn(
        hull: &HullModel,
        params: &MagneticParams,
        spec: &KernelGrid,
        f: impl Fn(&HullPoint, [f64; 2]) -> Complex64 + Sync,
    ) -> Result<Self> {
        let grid = Grid2::new(spec.step, spec.half_width)?;
        let omega = OmegaGrid::new(hull, spec.omega_points, spec.step)?;
        let npts = grid.len();
        let values: Vec<Complex64> = (0..omega.len() * npts)
            .into_par_iter()
            .map(|k| {
                let w = omega.point(k / npts);
                let (i, j) = grid.coords(k % npts);
                f(&w, grid.point(i, j))
            })
            .collect();
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return domain("kernel values must be finite");
        }
        Ok(Self {
            hull: hull.clone(),
            params: *params,
            omega,
            grid,
            values,
            truncation: 0.0,
            rounding: 0.0,
        })
    }

    /// F(ω, x) = g(ω) f(x).
    pub fn product(
        hull: &HullModel,
        params: &MagneticParams,
        spec: &KernelGrid,
        g: &PotentialSymbol,
        f: &MagneticSymbol,
    ) -> Result<Self> {
        Self::from_fn(hull, params, spec, |w, x| g.eval(w.coords()) * f.eval(x))
    }

    /// ι_n = n² (πℓ²/2) χ_{[−1/n, 1/n]²}, cell-averaged onto the grid so that
    /// |||ι_n|||₁ = 1 holds exactly.
    pub fn approximate_identity(hull: &HullModel, params: &MagneticParams, spec: &KernelGrid, n: usize) -> Result<Self> {
        if n == 0 {
            return domain("approximate identity index must be positive");
        }
        let h = spec.step;
        let half = 1.0 / n as f64;
        let half_width = (half / h + 0.5).ceil() as usize;
        let overlap = |i: i64| {
            let lo = (i as f64 - 0.5) * h;
            let hi = (i as f64 + 0.5) * h;
            (hi.min(half) - lo.max(-half)).max(0.0)
        };
        let height = (n * n) as f64 * params.lambda_b() / 2.0;
        let spec = KernelGrid { half_width, ..*spec };
        Self::from_fn(hull, params, &spec, |_, x| {
            let i = (x[0] / h).round() as i64;
            let j = (x[1] / h).round() as i64;
            Complex64::new(height * overlap(i) * overlap(j) / (h * h), 0.0)
        })
    }

    pub fn hull(&self) -> &HullModel {
        &self.hull
    }

    pub fn params(&self) -> &MagneticParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn omega_grid(&self) -> &OmegaGrid {
        &self.omega
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// L¹ mass dropped by truncations.
    pub fn truncation_error(&self) -> f64 {
        self.truncation
    }

    /// Truncation plus accumulated rounding, in |||·|||₁ units.
    pub fn error_budget(&self) -> f64 {
        self.truncation + self.rounding
    }

    /// Value at ω-grid index `w` and spatial grid index (i, j); zero off the grid.
    pub fn value(&self, w: usize, i: i64, j: i64) -> Complex64 {
        if self.grid.contains(i, j) {
            self.values[w * self.grid.len() + self.grid.index(i, j)]
        } else {
            ZERO
        }
    }

    /// Bilinear interpolation in x at ω-grid index `w`.
    pub fn eval(&self, w: usize, x: [f64; 2]) -> Complex64 {
        let h = self.grid.step;
        let (u, v) = (x[0] / h, x[1] / h);
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let (i0, j0) = (i0 as i64, j0 as i64);
        self.value(w, i0, j0) * ((1.0 - fu) * (1.0 - fv))
            + self.value(w, i0 + 1, j0) * (fu * (1.0 - fv))
            + self.value(w, i0, j0 + 1) * ((1.0 - fu) * fv)
            + self.value(w, i0 + 1, j0 + 1) * (fu * fv)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.hull != other.hull {
            return Err(Error::Structural("kernels live on different hulls".into()));
        }
        if self.params != other.params {
            return Err(Error::Structural("kernels use different magnetic lengths".into()));
        }
        if self.grid.step != other.grid.step || self.omega != other.omega {
            return Err(Error::Structural("kernel grids are incompatible".into()));
        }
        Ok(())
    }

    fn cell_weight(&self) -> f64 {
        self.grid.step * self.grid.step * self.params.c0()
    }

    /// Zero-pads or crops to the given half width; the cropped L¹ mass is
    /// added to the truncation budget.
    pub fn resized(&self, half_width: usize) -> Self {
        let grid = self.grid.with_half_width(half_width);
        let npts = grid.len();
        let mut values = vec![ZERO; self.omega.len() * npts];
        for (k, v) in values.iter_mut().enumerate() {
            let (i, j) = grid.coords(k % npts);
            *v = self.value(k / npts, i, j);
        }
        let mut dropped = 0.0;
        if half_width < self.grid.half_width {
            let hw = half_width as i64;
            for k in 0..self.grid.len() {
                let (i, j) = self.grid.coords(k);
                if i.abs() > hw || j.abs() > hw {
                    dropped += (0..self.omega.len()).map(|w| self.value(w, i, j).norm()).fold(0.0, f64::max);
                }
            }
        }
        Self {
            grid,
            values,
            truncation: self.truncation + dropped * self.cell_weight(),
            ..self.clone()
        }
    }

    fn combine(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        let hw = self.grid.half_width.max(other.grid.half_width);
        let (a, b) = (self.resized(hw), other.resized(hw));
        Ok(Self {
            values: a.values.iter().zip(&b.values).map(|(x, y)| f(*x, *y)).collect(),
            truncation: a.truncation + b.truncation,
            rounding: a.rounding + b.rounding,
            ..a
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            truncation: self.truncation * c.norm(),
            rounding: self.rounding * c.norm(),
            ..self.clone()
        }
    }

    /// Little-endian (re, im) f64 pairs in storage order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    /// Inverse of [`to_le_bytes`](Self::to_le_bytes) for the given hull and grid.
    pub fn from_le_bytes(hull: &HullModel, params: &MagneticParams, spec: &KernelGrid, bytes: &[u8]) -> Result<Self> {
        let grid = Grid2::new(spec.step, spec.half_width)?;
        let omega = OmegaGrid::new(hull, spec.omega_points, spec.step)?;
        if bytes.len() != omega.len() * grid.len() * 16 {
            return Err(Error::Structural("kernel byte length does not match the grid".into()));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(Self {
            hull: hull.clone(),
            params: *params,
            omega,
            grid,
            values,
            truncation: 0.0,
            rounding: 0.0,
        })
    }

    /// Sidecar description of the storage layout and norms, one `key = value` per line.
    pub fn metadata(&self) -> String {
        format!(
            "layout = omega-major, x1-major, (re, im) f64 little-endian\nell = {:e}\nstep = {:e}\nhalf_width = {}\nomega_points_per_dim = {}\nomega_dim = {}\nhull = {:?}\nl1_norm = {:e}\nl2_norm = {:e}\nerror_budget = {:e}\n",
            self.params.ell(),
            self.grid.step,
            self.grid.half_width,
            self.omega.points_per_dim(),
            self.omega.dim(),
            self.hull.kind(),
            l1_norm(self),
            inner0(self, self).map(|v| v.re.sqrt()).unwrap_or(f64::NAN),
            self.error_budget(),
        )
    }
}

/// |||F|||₁ = (2πℓ²)⁻¹ ∫ dx sup_ω |F(ω, x)|, sup over the ω grid.
pub fn l1_norm(f: &KernelFunction) -> f64 {
    let npts = f.grid.len();
    let sups: Vec<f64> = (0..npts)
        .map(|x| (0..f.omega.len()).map(|w| f.values[w * npts + x].norm()).fold(0.0, f64::max))
        .collect();
    pairwise_sum(&sups) * f.cell_weight()
}

/// ⟨⟨F₁, F₂⟩⟩₀ = (2πℓ²)⁻¹ ∫ dx ∫ dP conj(F₁) F₂.
pub fn inner0(f1: &KernelFunction, f2: &KernelFunction) -> Result<Complex64> {
    f1.check_compatible(f2)?;
    let hw = f1.grid.half_width.min(f2.grid.half_width) as i64;
    let nw = f1.omega.len();
    let mut terms = Vec::with_capacity(nw * (2 * hw as usize + 1).pow(2));
    for w in 0..nw {
        for i in -hw..=hw {
            for j in -hw..=hw {
                terms.push(f1.value(w, i, j).conj() * f2.value(w, i, j));
            }
        }
    }
    Ok(pairwise_sum(&terms) * f1.cell_weight() / nw as f64)
}

/// τ_P = ∫ F(ω, 0) dP(ω).
pub fn kernel_trace(f: &KernelFunction) -> Complex64 {
    let vals: Vec<Complex64> = (0..f.omega.len()).map(|w| f.value(w, 0, 0)).collect();
    pairwise_sum(&vals) / f.omega.len() as f64
}

/// F^★(ω, x) = conj F(t_{−x}(ω), −x).
pub fn involution(f: &KernelFunction) -> KernelFunction {
    let npts = f.grid.len();
    let values = (0..f.values.len())
        .map(|k| {
            let (i, j) = f.grid.coords(k % npts);
            let w = f.omega.translated(k / npts, -i, -j);
            f.value(w, -i, -j).conj()
        })
        .collect();
    KernelFunction { values, ..f.clone() }
}

/// (F★G)(ω, x) = (2πℓ²)⁻¹ ∫ F(ω, y) G(t_{−y}(ω), x − y) Θ(y, x) dy on the
/// Minkowski-sum grid, so no support is truncated.
pub fn twisted_convolve(f: &KernelFunction, g: &KernelFunction) -> Result<KernelFunction> {
    f.check_compatible(g)?;
    let nf = f.grid.half_width as i64;
    let ng = g.grid.half_width as i64;
    let grid = f.grid.with_half_width((nf + ng) as usize);
    let no = nf + ng;
    let phases = PhaseTable::new(2 * nf * no, f.grid.step, &f.params);
    let nw = f.omega.len();
    // ω index of t_{−y}(ω) for every y in the support of F
    let shift: Vec<usize> = (0..f.grid.len())
        .flat_map(|y| {
            let (a, b) = f.grid.coords(y);
            (0..nw).map(move |w| (a, b, w))
        })
        .map(|(a, b, w)| f.omega.translated(w, -a, -b))
        .collect();
    let npts = grid.len();
    let (fpts, gpts) = (f.grid.len(), g.grid.len());
    let weight = f.cell_weight();
    let values: Vec<Complex64> = (0..nw * npts)
        .into_par_iter()
        .map(|k| {
            let w = k / npts;
            let (c, d) = grid.coords(k % npts);
            let mut acc = ZERO;
            for a in (-nf).max(c - ng)..=nf.min(c + ng) {
                for b in (-nf).max(d - ng)..=nf.min(d + ng) {
                    let y = f.grid.index(a, b);
                    let fv = f.values[w * fpts + y];
                    if fv == ZERO {
                        continue;
                    }
                    let w2 = shift[y * nw + w];
                    let gv = g.values[w2 * gpts + g.grid.index(c - a, d - b)];
                    acc += fv * gv * phases.get(a * d - b * c);
                }
            }
            acc * weight
        })
        .collect();
    let (lf, lg) = (l1_norm(f), l1_norm(g));
    let terms = f.grid.len() as f64;
    Ok(KernelFunction {
        hull: f.hull.clone(),
        params: f.params,
        omega: f.omega.clone(),
        grid,
        values,
        truncation: lf * g.truncation + lg * f.truncation + f.truncation * g.truncation,
        rounding: lf * g.rounding + lg * f.rounding + 4.0 * f64::EPSILON * terms.sqrt() * lf * lg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayClass {
    SchwartzLike,
    CompactlySupported,
    Laguerre,
}

/// An absolutely integrable f : ℝ² → ℂ defining the magnetic operator K_f.
#[derive(Clone)]
pub struct MagneticSymbol {
    f: Arc<dyn Fn([f64; 2]) -> Complex64 + Send + Sync>,
    decay: DecayClass,
}

impl fmt::Debug for MagneticSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MagneticSymbol").field("decay", &self.decay).finish()
    }
}

impl MagneticSymbol {
    pub fn new(f: impl Fn([f64; 2]) -> Complex64 + Send + Sync + 'static, decay: DecayClass) -> Self {
        Self { f: Arc::new(f), decay }
    }

    pub fn zero() -> Self {
        Self::new(|_| ZERO, DecayClass::CompactlySupported)
    }

    /// f = ψ_{n,m}.
    pub fn laguerre(idx: BasisIndex, params: &MagneticParams) -> Self {
        let p = *params;
        Self::new(move |x| psi(idx, x, &p), DecayClass::Laguerre)
    }

    /// e^{−|x|²/(2 width²)}.
    pub fn gaussian(width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return domain("Gaussian width must be positive");
        }
        Ok(Self::new(
            move |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1]) / (2.0 * width * width)).exp(), 0.0),
            DecayClass::SchwartzLike,
        ))
    }

    pub fn decay(&self) -> DecayClass {
        self.decay
    }

    pub fn eval(&self, x: [f64; 2]) -> Complex64 {
        (self.f)(x)
    }

    /// f⁻(x) = f(−x).
    pub fn reflected(&self) -> Self {
        let f = self.f.clone();
        Self::new(move |x| f([-x[0], -x[1]]), self.decay)
    }
}

/// Grid for the quadrature of K_f matrix elements, in units of ℓ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGrid {
    pub step_over_ell: f64,
    pub extent_over_ell: f64,
    /// Largest tolerated boundary magnitude of the sampled functions, relative to their peak.
    pub tolerance: f64,
}

impl Default for ElementGrid {
    fn default() -> Self {
        Self {
            step_over_ell: 1.0 / 3.0,
            extent_over_ell: 11.0,
            tolerance: 1e-6,
        }
    }
}

impl ElementGrid {
    pub fn grid(&self, params: &MagneticParams) -> Result<Grid2> {
        if !(self.step_over_ell > 0.0 && self.extent_over_ell > 0.0) {
            return domain("element grid step and extent must be positive");
        }
        let half = (self.extent_over_ell / self.step_over_ell).round() as usize;
        Grid2::new(self.step_over_ell * params.ell(), half)
    }
}

/// (K_f φ)(x) = (2πℓ²)⁻¹ ∫ f(x − y) Θ(x, y) φ(y) dy by the trapezoid rule on φ's grid.
pub fn apply_magnetic_operator(f: &MagneticSymbol, phi: &SampledWave, params: &MagneticParams) -> SampledWave {
    let grid = phi.grid;
    let n = grid.half_width as i64;
    let diff = grid.with_half_width(2 * grid.half_width);
    let fvals: Vec<Complex64> = (0..diff.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = diff.coords(k);
            f.eval(diff.point(i, j))
        })
        .collect();
    let phases = PhaseTable::new(2 * n * n, grid.step, params);
    let weight = grid.step * grid.step * params.c0();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (c, d) = grid.coords(k);
            let mut acc = ZERO;
            for a in -n..=n {
                for b in -n..=n {
                    let p = phi.values[grid.index(a, b)];
                    if p == ZERO {
                        continue;
                    }
                    acc += fvals[diff.index(c - a, d - b)] * phases.get(c * b - d * a) * p;
                }
            }
            acc * weight
        })
        .collect();
    SampledWave { grid, values }
}

fn check_boundary(what: &str, wave: &SampledWave, tol: f64) -> Result<()> {
    let peak = wave.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = wave.boundary_max();
    if !(peak.is_finite() && edge.is_finite()) {
        return Err(Error::NumericFailure {
            what: format!("{what} is not finite on the quadrature grid"),
            achieved: f64::INFINITY,
            requested: tol,
        });
    }
    if peak > 0.0 && edge > tol * peak {
        return Err(Error::NumericFailure {
            what: format!("{what} does not decay inside the quadrature grid"),
            achieved: edge / peak,
            requested: tol,
        });
    }
    Ok(())
}

/// All ⟨ψ_{a,b}, K_f ψ_{c,d}⟩ with a, b, c, d ≤ `max_index`, indexed
/// `[a * (max_index+1) + b][c * (max_index+1) + d]`.
pub fn op_matrix_block(
    f: &MagneticSymbol,
    max_index: usize,
    params: &MagneticParams,
    quad: &ElementGrid,
) -> Result<Vec<Vec<Complex64>>> {
    let grid = quad.grid(params)?;
    let side = max_index + 1;
    let waves: Vec<SampledWave> = (0..side * side)
        .map(|k| SampledWave::basis(BasisIndex::new(k / side, k % side), grid, params))
        .collect();
    for w in &waves {
        check_boundary("basis function", w, quad.tolerance)?;
    }
    check_boundary("symbol", &SampledWave::from_fn(grid.with_half_width(2 * grid.half_width), |x| f.eval(x)), quad.tolerance)?;
    let images: Vec<SampledWave> = waves.iter().map(|w| apply_magnetic_operator(f, w, params)).collect();
    let mut block = vec![vec![ZERO; side * side]; side * side];
    for (bra, row) in waves.iter().zip(block.iter_mut()) {
        for (img, entry) in images.iter().zip(row.iter_mut()) {
            *entry = bra.inner(img)?;
        }
    }
    Ok(block)
}

/// ⟨ψ_{a,b}, K_f ψ_{c,d}⟩ by trapezoid quadrature of the K_f integral followed
/// by the grid inner product.
pub fn op_matrix_element(
    f: &MagneticSymbol,
    bra: BasisIndex,
    ket: BasisIndex,
    params: &MagneticParams,
    quad: &ElementGrid,
) -> Result<Complex64> {
    let grid = quad.grid(params)?;
    let left = SampledWave::basis(bra, grid, params);
    let right = SampledWave::basis(ket, grid, params);
    check_boundary("basis function", &left, quad.tolerance)?;
    check_boundary("basis function", &right, quad.tolerance)?;
    check_boundary("symbol", &SampledWave::from_fn(grid.with_half_width(2 * grid.half_width), |x| f.eval(x)), quad.tolerance)?;
    let image = apply_magnetic_operator(f, &right, params);
    let v = left.inner(&image)?;
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NumericFailure {
            what: "matrix element".into(),
            achieved: f64::INFINITY,
            requested: quad.tolerance,
        });
    }
    Ok(v)
}

/// (√(2π) ℓ)⁻¹, the scale relating K_{ψ_{j,k}} to a transition operator.
pub fn basis_kernel_scale(params: &MagneticParams) -> f64 {
    1.0 / ((2.0 * PI).sqrt() * params.ell())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_normalization() {
        let p = MagneticParams::new(0.8).unwrap();
        let x = [0.3, -1.7];
        assert_eq!(theta(x, x, &p), Complex64::new(1.0, 0.0));
        assert_eq!(theta(x, [0.0, 0.0], &p), Complex64::new(1.0, 0.0));
        assert!((theta(x, [-0.3, 1.7], &p) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn grid_indexing_roundtrip() {
        let g = Grid2::new(0.5, 3).unwrap();
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            assert_eq!(g.index(i, j), k);
        }
    }

    #[test]
    fn omega_grid_requires_commensurate_step() {
        let t = HullModel::square_torus(2.0).unwrap();
        assert!(OmegaGrid::new(&t, 8, 0.25).is_ok());
        assert!(matches!(OmegaGrid::new(&t, 8, 0.3), Err(Error::Structural(_))));
        let g = OmegaGrid::new(&t, 8, 0.25).unwrap();
        // one step of 0.25 along x1 moves ω1 by 1/8
        let w = g.translated(0, 1, 0);
        assert_eq!(g.point(w).0, vec![0.125, 0.0]);
        assert_eq!(g.translated(w, -1, 0), 0);
    }

    #[test]
    fn approximate_identity_has_unit_norm() {
        let p = MagneticParams::default();
        let s = HullModel::singleton();
        for n in [1, 3, 4, 7, 32] {
            let spec = KernelGrid {
                step: 0.1,
                half_width: 0,
                omega_points: 1,
            };
            let iota = KernelFunction::approximate_identity(&s, &p, &spec, n).unwrap();
            assert!((l1_norm(&iota) - 1.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn zero_symbol_gives_zero_element() {
        let p = MagneticParams::default();
        let v = op_matrix_element(&MagneticSymbol::zero(), BasisIndex::new(1, 0), BasisIndex::new(1, 0), &p, &ElementGrid::default()).unwrap();
        assert_eq!(v, ZERO);
    }
}
