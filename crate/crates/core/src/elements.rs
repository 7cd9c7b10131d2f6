//! Finitely supported elements S = Σ Υ_{n→m} M_{g_{n,m}}, the transition
//! algebra, matrix elements in the Laguerre basis, τ_P, and norm bounds.

use crate::error::{domain, Error, Result};
use crate::hull::{expectation, hull_samples, ExpectationConfig, HullModel, HullPoint, PotentialField, PotentialSymbol};
use crate::laguerre::{psi, weighted_laguerre, weighted_laguerre_sequence, BasisIndex, MagneticParams};
use crate::numerics::{composite_nodes, gauss_legendre, pairwise_sum, Estimate};
use crate::regions::{angular_fourier, RegionSpec};
use crate::scaling::RadialProfile;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Υ_{source→target}: ψ_{n,m} ↦ δ_{source,n} ψ_{target,m}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionTerm {
    pub source: usize,
    pub target: usize,
}

impl TransitionTerm {
    pub fn new(source: usize, target: usize) -> Self {
        Self { source, target }
    }

    pub fn adjoint(self) -> Self {
        Self::new(self.target, self.source)
    }

    pub fn is_projection(self) -> bool {
        self.source == self.target
    }

    pub fn apply(self, idx: BasisIndex) -> Option<BasisIndex> {
        (idx.n == self.source).then_some(BasisIndex::new(self.target, idx.m))
    }
}

/// The product `first · second` (apply `second`, then `first`):
/// Υ_{j→k} Υ_{m→n} = δ_{j,n} Υ_{m→k}.
pub fn compose_transitions(first: TransitionTerm, second: TransitionTerm) -> Option<TransitionTerm> {
    (first.source == second.target).then_some(TransitionTerm::new(second.source, first.target))
}

/// ⟨n|D(β)|n'⟩ for the displacement operator on a single oscillator.
fn displacement(n: usize, n2: usize, beta: Complex64) -> Result<Complex64> {
    let x = beta.norm_sqr();
    let arg = beta.arg();
    if n >= n2 {
        let w = weighted_laguerre(n2, (n - n2) as f64, x)?;
        Ok(Complex64::from_polar(w, (n - n2) as f64 * arg))
    } else {
        let w = weighted_laguerre(n, (n2 - n) as f64, x)?;
        let sign = if (n2 - n) % 2 == 1 { -1.0 } else { 1.0 };
        Ok(Complex64::from_polar(sign * w, -((n2 - n) as f64) * arg))
    }
}

/// κ = ℓ(q₁ + i q₂)/√2 for the wave vector q.
fn kappa(q: [f64; 2], params: &MagneticParams) -> Complex64 {
    Complex64::new(q[0], q[1]) * (params.ell() * FRAC_1_SQRT_2)
}

/// ⟨ψ_{i,a}, e^{iq·x} ψ_{j,b}⟩ = (−1)^{i+j} ⟨i|D(iκ̄)|j⟩ ⟨a|D(iκ)|b⟩.
pub fn plane_wave_element(q: [f64; 2], bra: BasisIndex, ket: BasisIndex, params: &MagneticParams) -> Result<Complex64> {
    let k = kappa(q, params);
    let i = Complex64::new(0.0, 1.0);
    let level = displacement(bra.n, ket.n, i * k.conj())?;
    let orbit = displacement(bra.m, ket.m, i * k)?;
    let sign = if (bra.n + ket.n) % 2 == 1 { -1.0 } else { 1.0 };
    Ok(level * orbit * sign)
}

/// Quadrature controls for weighted matrix elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementQuadrature {
    /// Gauss–Legendre nodes per radial panel.
    pub nodes: usize,
    /// Radial panels are at most `panel_scale · √max(r, 1)` wide.
    pub panel_scale: f64,
    /// Half-width of the radial window around r = m, in units of √m.
    pub window_sigmas: f64,
    /// Smallest number of angular trapezoid points for opaque potentials.
    pub angular_points: usize,
    /// Largest arc length between angular points, in units of ℓ.
    pub angular_spacing: f64,
    /// Agreement required between the rule and its doubled-node version.
    pub tolerance: f64,
}

impl Default for ElementQuadrature {
    fn default() -> Self {
        Self {
            nodes: 16,
            panel_scale: 0.25,
            window_sigmas: 12.0,
            angular_points: 64,
            angular_spacing: 0.25,
            tolerance: 1e-9,
        }
    }
}

impl ElementQuadrature {
    fn doubled(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            angular_points: 2 * self.angular_points,
            angular_spacing: 0.5 * self.angular_spacing,
            ..*self
        }
    }

    /// Polar-radius interval carrying all but e^{−70} of R_m^{(i,j)}.
    pub fn window(&self, i: usize, j: usize, m: usize) -> (f64, f64) {
        let mf = m as f64;
        let pad = 30.0 + 4.0 * (i + j) as f64;
        let lo = (mf - self.window_sigmas * mf.sqrt() - pad).max(0.0);
        let hi = mf + self.window_sigmas * (mf + 1.0).sqrt() + pad;
        (lo, hi)
    }

    fn radial_nodes(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        let gl = gauss_legendre(self.nodes);
        let scale = self.panel_scale;
        composite_nodes(breaks, |r| scale * r.max(1.0).sqrt(), &gl)
    }
}

fn check_finite(v: Complex64, what: &str, tol: f64) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericFailure {
            what: what.into(),
            achieved: f64::INFINITY,
            requested: tol,
        })
    }
}

fn verified(what: &str, tol: f64, coarse: Complex64, fine: Complex64) -> Result<Complex64> {
    let fine = check_finite(fine, what, tol)?;
    let diff = (coarse - fine).norm();
    if diff > tol {
        return Err(Error::NumericFailure {
            what: format!("{what}: doubled-node check"),
            achieved: diff,
            requested: tol,
        });
    }
    Ok(fine)
}

/// ⟨ψ_{i,m}, χ_Σ ψ_{j,m}⟩ = ∫dr c_{j−i}(r) R_m^{(i,j)}(r), c_k the angular
/// Fourier coefficients of the region.
pub fn region_element(
    region: &RegionSpec,
    i: usize,
    j: usize,
    m: usize,
    params: &MagneticParams,
    quad: &ElementQuadrature,
) -> Result<Complex64> {
    let k = j as i64 - i as i64;
    if region.is_radially_constant() {
        // ∫ R_m^{(i,j)} dr = δ_{i,j}
        return Ok(if i == j { angular_fourier(region, 0, 1.0, params) } else { ZERO });
    }
    let (lo, hi) = quad.window(i, j, m);
    let integrate = |q: &ElementQuadrature| {
        let breaks = region_breaks(region, lo, hi, params);
        let profile = RadialProfile::new(i, j, m);
        let terms: Vec<Complex64> = q
            .radial_nodes(&breaks)
            .into_iter()
            .map(|(r, w)| angular_fourier(region, k, r, params) * (w * profile.eval(r)))
            .collect();
        pairwise_sum(&terms)
    };
    verified("region element", quad.tolerance, integrate(quad), integrate(&quad.doubled()))
}

/// Panel breaks in polar-radius units: the window ends and every radius
/// where the region's arc structure changes.
fn region_breaks(region: &RegionSpec, lo: f64, hi: f64, params: &MagneticParams) -> Vec<f64> {
    let l2 = 2.0 * params.ell() * params.ell();
    let mut breaks = vec![lo];
    for rho in region.radial_kinks(params.radius_of(hi)) {
        let r = rho * rho / l2;
        if r > lo && r < hi {
            breaks.push(r);
        }
    }
    breaks.push(hi);
    breaks
}

/// Radial node grid with cached angular coefficients, reused for every m of
/// a sweep over a fixed region and index pair.
#[derive(Debug, Clone)]
pub struct RegionSweep {
    i: usize,
    j: usize,
    radii: Vec<f64>,
    weights: Vec<Complex64>,
    quad: ElementQuadrature,
    constant: Option<Complex64>,
}

impl RegionSweep {
    pub fn new(region: &RegionSpec, i: usize, j: usize, m_max: usize, params: &MagneticParams, quad: &ElementQuadrature) -> Self {
        if region.is_radially_constant() {
            let c = if i == j { angular_fourier(region, 0, 1.0, params) } else { ZERO };
            return Self {
                i,
                j,
                radii: Vec::new(),
                weights: Vec::new(),
                quad: *quad,
                constant: Some(c),
            };
        }
        let k = j as i64 - i as i64;
        let (_, hi) = quad.window(i, j, m_max);
        let nodes = quad.radial_nodes(&region_breaks(region, 0.0, hi, params));
        let weights = nodes
            .par_iter()
            .map(|&(r, w)| angular_fourier(region, k, r, params) * w)
            .collect();
        Self {
            i,
            j,
            radii: nodes.iter().map(|n| n.0).collect(),
            weights,
            quad: *quad,
            constant: None,
        }
    }

    pub fn element(&self, m: usize) -> Complex64 {
        if let Some(c) = self.constant {
            return c;
        }
        let (lo, hi) = self.quad.window(self.i, self.j, m);
        let a = self.radii.partition_point(|&r| r < lo);
        let b = self.radii.partition_point(|&r| r <= hi);
        let profile = RadialProfile::new(self.i, self.j, m);
        let terms: Vec<Complex64> = (a..b).map(|k| self.weights[k] * profile.eval(self.radii[k])).collect();
        pairwise_sum(&terms)
    }

    /// Elements for m = 0, …, count−1.
    pub fn elements(&self, count: usize) -> Vec<Complex64> {
        (0..count).into_par_iter().map(|m| self.element(m)).collect()
    }
}

/// Plane-wave decomposition of a trigonometric potential field, prepared for
/// the diagonal-in-m elements ⟨ψ_{i,m}, M_g ψ_{j,m}⟩.
#[derive(Debug, Clone)]
pub struct PlaneWaveSweep {
    constant: Complex64,
    /// (coefficient, |κ|²) per wave: element_m = Σ coefficient · ℒ_m^{(0)}(|κ|²).
    waves: Vec<(Complex64, f64)>,
}

impl PlaneWaveSweep {
    pub fn new(field: &PotentialField, i: usize, j: usize, params: &MagneticParams) -> Option<Result<Self>> {
        let (c, waves) = field.plane_waves()?;
        Some((|| {
            let mut out = Vec::with_capacity(waves.len());
            for w in waves {
                let k = kappa(w.q, params);
                let ik = Complex64::new(0.0, 1.0) * k.conj();
                let sign = if (i + j) % 2 == 1 { -1.0 } else { 1.0 };
                out.push((w.amplitude * displacement(i, j, ik)? * sign, k.norm_sqr()));
            }
            Ok(Self {
                constant: if i == j { c } else { ZERO },
                waves: out,
            })
        })())
    }

    pub fn elements(&self, count: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![self.constant; count];
        for &(coef, xi) in &self.waves {
            let seq = weighted_laguerre_sequence(0.0, xi, count)?;
            for (o, s) in out.iter_mut().zip(seq) {
                *o += coef * s;
            }
        }
        Ok(out)
    }
}

/// ⟨ψ_{i,m}, M_{g,ω} ψ_{j,m}⟩ = (2π)⁻¹∫dθ e^{i(j−i)θ} ∫dr g(t_{x(r,θ)}ω) R_m^{(i,j)}(r).
///
/// Trigonometric potentials use the closed plane-wave form; other potentials
/// use polar quadrature, checked against a doubled-node rule.
#[allow(clippy::too_many_arguments)]
pub fn weighted_element(
    g: &PotentialSymbol,
    hull: &HullModel,
    omega: &HullPoint,
    i: usize,
    j: usize,
    m: usize,
    params: &MagneticParams,
    quad: &ElementQuadrature,
) -> Result<Complex64> {
    let field = g.field(hull, omega)?;
    if let Some(sweep) = PlaneWaveSweep::new(&field, i, j, params) {
        let sweep = sweep?;
        let mut acc = sweep.constant;
        for &(coef, xi) in &sweep.waves {
            acc += coef * weighted_laguerre(m, 0.0, xi)?;
        }
        return Ok(acc);
    }
    let coarse = polar_element(&field, i, j, m, params, quad);
    let fine = polar_element(&field, i, j, m, params, &quad.doubled());
    verified("weighted element", quad.tolerance, coarse, fine)
}

fn polar_element(field: &PotentialField, i: usize, j: usize, m: usize, params: &MagneticParams, quad: &ElementQuadrature) -> Complex64 {
    let (lo, hi) = quad.window(i, j, m);
    let k = j as f64 - i as f64;
    let profile = RadialProfile::new(i, j, m);
    let terms: Vec<Complex64> = quad
        .radial_nodes(&[lo, hi])
        .par_iter()
        .map(|&(r, w)| {
            let rho = params.radius_of(r);
            let count = quad.angular_points.max((TAU * rho / (quad.angular_spacing * params.ell())).ceil() as usize);
            let dt = TAU / count as f64;
            let ring: Vec<Complex64> = (0..count)
                .map(|s| {
                    let t = s as f64 * dt;
                    field.eval([rho * t.cos(), rho * t.sin()]) * Complex64::from_polar(1.0, k * t)
                })
                .collect();
            pairwise_sum(&ring) / count as f64 * (w * profile.eval(r))
        })
        .collect();
    pairwise_sum(&terms)
}

/// ⟨ψ_{i,a}, M_{g,ω} ψ_{j,b}⟩ for arbitrary basis indices. Trigonometric
/// potentials use the plane-wave closed form; otherwise a 2D trapezoid grid.
pub fn potential_matrix_element(
    g: &PotentialSymbol,
    hull: &HullModel,
    omega: &HullPoint,
    bra: BasisIndex,
    ket: BasisIndex,
    params: &MagneticParams,
) -> Result<Complex64> {
    let field = g.field(hull, omega)?;
    if let Some((c, waves)) = field.plane_waves() {
        let mut acc = if bra == ket { c } else { ZERO };
        for w in waves {
            acc += w.amplitude * plane_wave_element(w.q, bra, ket, params)?;
        }
        return Ok(acc);
    }
    let top = bra.n.max(bra.m).max(ket.n).max(ket.m) as f64;
    let l = params.ell();
    let extent = l * ((2.0 * (2.0 * top + 1.0)).sqrt() + 10.0);
    let h = l / 4.0;
    let half = (extent / h).ceil() as i64;
    let rows: Vec<Complex64> = (-half..=half)
        .into_par_iter()
        .map(|a| {
            let row: Vec<Complex64> = (-half..=half)
                .map(|b| {
                    let x = [a as f64 * h, b as f64 * h];
                    psi(bra, x, params).conj() * field.eval(x) * psi(ket, x, params)
                })
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    check_finite(pairwise_sum(&rows) * h * h, "potential matrix element", 0.0)
}

/// Whether each term reads Υ_{n→m} M_g or M_g Υ_{n→m}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermOrder {
    TransitionFirst,
    PotentialFirst,
}

#[derive(Debug, Clone)]
pub struct ElementTerm {
    pub transition: TransitionTerm,
    pub symbol: PotentialSymbol,
}

/// S = Σ Υ_{n→m} M_{g_{n,m}} with finite support (or the mirrored order
/// Σ M_g Υ_{n→m} produced by adjoints).
#[derive(Debug, Clone)]
pub struct L1Element {
    hull: HullModel,
    order: TermOrder,
    terms: Vec<ElementTerm>,
}

impl L1Element {
    pub fn new(hull: &HullModel) -> Self {
        Self {
            hull: hull.clone(),
            order: TermOrder::TransitionFirst,
            terms: Vec::new(),
        }
    }

    /// Υ_{source→target} M_g.
    pub fn single(hull: &HullModel, source: usize, target: usize, g: PotentialSymbol) -> Self {
        Self::new(hull).with_term(source, target, g)
    }

    /// Adds Υ_{source→target} M_g, merging with an existing term on the same transition.
    pub fn with_term(mut self, source: usize, target: usize, g: PotentialSymbol) -> Self {
        let t = TransitionTerm::new(source, target);
        match self.terms.binary_search_by(|e| e.transition.cmp(&t)) {
            Ok(k) => self.terms[k].symbol = self.terms[k].symbol.add(&g),
            Err(k) => self.terms.insert(k, ElementTerm { transition: t, symbol: g }),
        }
        self
    }

    pub fn hull(&self) -> &HullModel {
        &self.hull
    }

    pub fn order(&self) -> TermOrder {
        self.order
    }

    pub fn terms(&self) -> &[ElementTerm] {
        &self.terms
    }

    /// Σ ‖g_{n,m}‖_∞.
    pub fn l1_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.symbol.sup_bound()).sum()
    }

    pub fn max_level(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.transition.source.max(t.transition.target))
            .max()
            .unwrap_or(0)
    }

    /// (Υ_{n→m} M_g)^* = M_{ḡ} Υ_{m→n}.
    pub fn adjoint(&self) -> Self {
        let mut terms: Vec<ElementTerm> = self
            .terms
            .iter()
            .map(|t| ElementTerm {
                transition: t.transition.adjoint(),
                symbol: t.symbol.conj(),
            })
            .collect();
        terms.sort_by(|a, b| a.transition.cmp(&b.transition));
        Self {
            hull: self.hull.clone(),
            order: match self.order {
                TermOrder::TransitionFirst => TermOrder::PotentialFirst,
                TermOrder::PotentialFirst => TermOrder::TransitionFirst,
            },
            terms,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ElementTerm {
                    transition: t.transition,
                    symbol: t.symbol.scale(c),
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Sum of two elements with the same hull and term order.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.hull != other.hull || self.order != other.order {
            return Err(Error::Structural("elements differ in hull or term order".into()));
        }
        let mut out = self.clone();
        for t in &other.terms {
            out = out.with_term(t.transition.source, t.transition.target, t.symbol.clone());
        }
        Ok(out)
    }
}

/// τ_P(S) = Σ_n E[g_{n,n}].
pub fn tau_p(s: &L1Element, cfg: &ExpectationConfig) -> Estimate {
    let mut value = ZERO;
    let mut error = 0.0;
    for t in s.terms.iter().filter(|t| t.transition.is_projection()) {
        let e = expectation(&s.hull, &t.symbol, cfg);
        value += e.value;
        error += e.error;
    }
    Estimate { value, error }
}

/// τ_P(Υ_{left} M_g Υ_{right}) by cyclicity: M_g Υ_{right} Υ_{left} reduced
/// through [`compose_transitions`].
pub fn sandwich_trace(
    left: TransitionTerm,
    g: &PotentialSymbol,
    right: TransitionTerm,
    hull: &HullModel,
    cfg: &ExpectationConfig,
) -> Estimate {
    match compose_transitions(right, left) {
        Some(t) => {
            let mut s = L1Element::single(hull, t.source, t.target, g.clone());
            s.order = TermOrder::PotentialFirst;
            tau_p(&s, cfg)
        }
        None => Estimate::exact(ZERO),
    }
}

/// ⟨ψ_{bra}, S_ω ψ_{ket}⟩.
pub fn element_matrix_entry(
    s: &L1Element,
    omega: &HullPoint,
    bra: BasisIndex,
    ket: BasisIndex,
    params: &MagneticParams,
) -> Result<Complex64> {
    let mut acc = ZERO;
    for t in &s.terms {
        let tr = t.transition;
        acc += match s.order {
            // ⟨ψ_{i,a}, Υ_{n→m} M_g ψ_{j,b}⟩ = δ_{i,m} ⟨ψ_{n,a}, M_g ψ_{j,b}⟩
            TermOrder::TransitionFirst if bra.n == tr.target => {
                potential_matrix_element(&t.symbol, &s.hull, omega, BasisIndex::new(tr.source, bra.m), ket, params)?
            }
            // ⟨ψ_{i,a}, M_g Υ_{n→m} ψ_{j,b}⟩ = δ_{j,n} ⟨ψ_{i,a}, M_g ψ_{m,b}⟩
            TermOrder::PotentialFirst if ket.n == tr.source => {
                potential_matrix_element(&t.symbol, &s.hull, omega, bra, BasisIndex::new(tr.target, ket.m), params)?
            }
            _ => ZERO,
        };
    }
    Ok(acc)
}

/// Basis order used by truncated matrices: ψ_{n,m} with n, m < cutoff at
/// position n·cutoff + m.
pub fn truncated_basis(cutoff: usize) -> Vec<BasisIndex> {
    (0..cutoff * cutoff).map(|k| BasisIndex::new(k / cutoff, k % cutoff)).collect()
}

/// Matrix of S_ω on the span of ψ_{n,m}, n, m < cutoff.
pub fn truncated_matrix(s: &L1Element, omega: &HullPoint, cutoff: usize, params: &MagneticParams) -> Result<DMatrix<Complex64>> {
    let basis = truncated_basis(cutoff);
    let d = basis.len();
    let entries: Vec<Result<Complex64>> = (0..d * d)
        .into_par_iter()
        .map(|k| element_matrix_entry(s, omega, basis[k / d], basis[k % d], params))
        .collect();
    let mut out = DMatrix::zeros(d, d);
    for (k, e) in entries.into_iter().enumerate() {
        out[(k / d, k % d)] = e?;
    }
    Ok(out)
}

/// S = S₁ S₂ with S₁ = Σ_r d_r Υ_{r→r}, d_r = sup_n √‖g_{n,r}‖_∞, and
/// S₂ = Σ Υ_{n→s} M_{h_s g_{n,s}}, h_s = 1/d_s or 0 when d_s = 0.
pub fn factorize(s: &L1Element) -> Result<(L1Element, L1Element)> {
    if s.order != TermOrder::TransitionFirst {
        return domain("factorize expects terms of the form Υ M_g");
    }
    let top = s.max_level();
    let mut d = vec![0.0f64; top + 1];
    for t in &s.terms {
        let r = t.transition.target;
        d[r] = d[r].max(t.symbol.sup_bound().sqrt());
    }
    let mut s1 = L1Element::new(&s.hull);
    for (r, &dr) in d.iter().enumerate() {
        if dr > 0.0 {
            s1 = s1.with_term(r, r, PotentialSymbol::real_constant(dr));
        }
    }
    let mut s2 = L1Element::new(&s.hull);
    for t in &s.terms {
        let dr = d[t.transition.target];
        let h = if dr > 0.0 { 1.0 / dr } else { 0.0 };
        s2 = s2.with_term(t.transition.source, t.transition.target, t.symbol.scale(Complex64::new(h, 0.0)));
    }
    Ok((s1, s2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBounds {
    /// Σ ‖g_{n,m}‖_∞.
    pub l1_bound: f64,
    /// √(sup_ω Σ |g_{n,m}(ω)|²), the sup taken over the hull sample grid.
    pub l2_kernel_bound: f64,
}

pub fn norm_bounds(s: &L1Element, cfg: &ExpectationConfig) -> NormBounds {
    let samples = hull_samples(&s.hull, cfg);
    let sup = samples
        .par_iter()
        .map(|w| s.terms.iter().map(|t| t.symbol.eval(w.coords()).norm_sqr()).sum::<f64>())
        .reduce(|| 0.0, f64::max);
    NormBounds {
        l1_bound: s.l1_bound(),
        l2_kernel_bound: sup.sqrt(),
    }
}

/// Largest singular value of a dense matrix.
pub fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}
