//! Generalized Laguerre polynomials and the magnetic Laguerre basis ψ_{n,m}.

use crate::error::{domain, Result};
use crate::numerics::{ln_factorial, ln_gamma};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Magnetic length and the constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticParams {
    ell: f64,
}

impl MagneticParams {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return domain(format!("magnetic length must be positive, got {ell}"));
        }
        Ok(Self { ell })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Area π ℓ² of the magnetic disk.
    pub fn lambda_b(&self) -> f64 {
        PI * self.ell * self.ell
    }

    /// 1 / (2π ℓ²).
    pub fn c0(&self) -> f64 {
        1.0 / (2.0 * PI * self.ell * self.ell)
    }

    /// Polar radius coordinate r = |x|² / (2ℓ²).
    pub fn polar_r(&self, x: [f64; 2]) -> f64 {
        (x[0] * x[0] + x[1] * x[1]) / (2.0 * self.ell * self.ell)
    }

    /// Euclidean radius of the circle with polar coordinate r.
    pub fn radius_of(&self, r: f64) -> f64 {
        self.ell * (2.0 * r).sqrt()
    }
}

impl Default for MagneticParams {
    fn default() -> Self {
        Self { ell: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex {
    pub n: usize,
    pub m: usize,
}

impl BasisIndex {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }
}

/// A real number stored as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: 0.0,
        log_scale: 0.0,
    };

    pub fn value(self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }

    pub fn mul(self, other: Scaled) -> Scaled {
        Scaled {
            mantissa: self.mantissa * other.mantissa,
            log_scale: self.log_scale + other.log_scale,
        }
    }

    pub fn neg(self) -> Scaled {
        Scaled {
            mantissa: -self.mantissa,
            ..self
        }
    }

    /// ln|value|, −∞ for zero.
    pub fn ln_abs(self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.log_scale
        }
    }
}

/// L_n^{(α)}(ξ).
///
/// Nonnegative α uses the three-term recurrence. Negative integer α with
/// −n ≤ α < 0 is rerouted through
/// L_n^{(−k)}(ξ) = (−ξ)^k (n−k)!/n! · L_{n−k}^{(k)}(ξ); other negative α use the
/// defining finite series.
pub fn laguerre_poly(n: usize, alpha: f64, xi: f64) -> Result<f64> {
    if !xi.is_finite() {
        return domain(format!("laguerre_poly: non-finite argument {xi}"));
    }
    if !alpha.is_finite() {
        return domain(format!("laguerre_poly: non-finite parameter {alpha}"));
    }
    if alpha >= 0.0 {
        return Ok(laguerre_recurrence(n, alpha, xi));
    }
    let k = -alpha;
    if k.fract() == 0.0 && (k as usize) <= n {
        let k = k as usize;
        let ratio = (ln_factorial(n - k) - ln_factorial(n)).exp();
        return Ok((-xi).powi(k as i32) * ratio * laguerre_recurrence(n - k, k as f64, xi));
    }
    Ok(laguerre_series(n, alpha, xi))
}

fn laguerre_recurrence(n: usize, alpha: f64, xi: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - xi;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - xi) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Σ_{i≤n} (−1)^i C(n+α, n−i) ξ^i / i!, accumulated with Neumaier summation.
fn laguerre_series(n: usize, alpha: f64, xi: f64) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut power = 1.0; // ξ^i / i!
    for i in 0..=n {
        // C(n+α, n−i) = Π_{t=1..n−i} (α+i+t)/t
        let mut binom = 1.0;
        for t in 1..=(n - i) {
            binom *= (alpha + (i + t) as f64) / t as f64;
        }
        let term = if i % 2 == 0 { binom * power } else { -binom * power };
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        power *= xi / (i as f64 + 1.0);
    }
    sum + comp
}

/// Squared weighted norm Γ(α+n+1)/n! of L_n^{(α)}.
pub fn laguerre_norm_sq(n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > -1.0) {
        return domain(format!("laguerre_norm_sq needs alpha > -1, got {alpha}"));
    }
    Ok((ln_gamma(alpha + n as f64 + 1.0) - ln_factorial(n)).exp())
}

/// e^{−ξ/2} ξ^{α/2} L_n^{(α)}(ξ) / √(Γ(n+α+1)/n!), overflow-safe.
pub fn weighted_laguerre(n: usize, alpha: f64, xi: f64) -> Result<f64> {
    Ok(weighted_laguerre_scaled(n, alpha, xi)?.value())
}

/// Same as [`weighted_laguerre`] but with the exponent kept separate.
pub fn weighted_laguerre_scaled(n: usize, alpha: f64, xi: f64) -> Result<Scaled> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return domain(format!("weighted_laguerre needs alpha >= 0, got {alpha}"));
    }
    if !(xi >= 0.0) || !xi.is_finite() {
        return domain(format!("weighted_laguerre needs finite xi >= 0, got {xi}"));
    }
    Ok(weighted_unchecked(n, alpha, xi, ln_gamma(alpha + 1.0)))
}

/// Normalized upward recurrence
/// √((k+1)(k+α+1)) ℒ_{k+1} = (2k+α+1−ξ) ℒ_k − √(k(k+α)) ℒ_{k−1},
/// started from ℒ_0 = e^{−ξ/2} ξ^{α/2} / √Γ(α+1) in the log domain.
pub(crate) fn weighted_unchecked(n: usize, alpha: f64, xi: f64, ln_gamma_alpha1: f64) -> Scaled {
    if xi == 0.0 {
        // ξ^{α/2} vanishes unless α = 0, where ℒ_n(0) = L_n(0) = 1.
        return if alpha == 0.0 {
            Scaled {
                mantissa: 1.0,
                log_scale: 0.0,
            }
        } else {
            Scaled::ZERO
        };
    }
    let log_start = -0.5 * xi + 0.5 * alpha * xi.ln() - 0.5 * ln_gamma_alpha1;
    let mut log_scale = log_start;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + alpha + 1.0 - xi) * cur - (kf * (kf + alpha)).sqrt() * prev)
            / ((kf + 1.0) * (kf + alpha + 1.0)).sqrt();
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > 1e150 || (big < 1e-150 && big > 0.0) {
            let s = big.ln();
            cur /= big;
            prev /= big;
            log_scale += s;
        }
    }
    Scaled {
        mantissa: cur,
        log_scale,
    }
}

/// The values ℒ_0^{(α)}(ξ), …, ℒ_{count−1}^{(α)}(ξ) of the normalized weighted
/// Laguerre functions, from a single recurrence pass.
pub fn weighted_laguerre_sequence(alpha: f64, xi: f64, count: usize) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) || !(xi >= 0.0) || !xi.is_finite() {
        return domain(format!("weighted_laguerre_sequence: alpha={alpha}, xi={xi}"));
    }
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    if xi == 0.0 {
        out.resize(count, if alpha == 0.0 { 1.0 } else { 0.0 });
        return Ok(out);
    }
    let mut log_scale = -0.5 * xi + 0.5 * alpha * xi.ln() - 0.5 * ln_gamma(alpha + 1.0);
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..count {
        out.push(if cur == 0.0 { 0.0 } else { cur * log_scale.exp() });
        let kf = k as f64;
        let next = ((2.0 * kf + alpha + 1.0 - xi) * cur - (kf * (kf + alpha)).sqrt() * prev)
            / ((kf + 1.0) * (kf + alpha + 1.0)).sqrt();
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > 1e150 || (big < 1e-150 && big > 0.0) {
            cur /= big;
            prev /= big;
            log_scale += big.ln();
        }
    }
    Ok(out)
}

/// Radial factor φ_{n,m}(r) of ψ_{n,m}, signed and in scaled form.
///
/// For m ≥ n this is ℒ_n^{(m−n)}(r); for m < n the swap identity
/// φ_{n,m} = (−1)^{n−m} φ_{m,n} avoids negative parameters.
pub fn radial_phi(n: usize, m: usize, r: f64) -> Scaled {
    if m >= n {
        let alpha = (m - n) as f64;
        weighted_unchecked(n, alpha, r, ln_factorial(m - n))
    } else {
        let s = weighted_unchecked(m, (n - m) as f64, r, ln_factorial(n - m));
        if (n - m) % 2 == 1 {
            s.neg()
        } else {
            s
        }
    }
}

/// ψ_{n,m}(x) = (√(2π) ℓ)^{-1} φ_{n,m}(|x|²/2ℓ²) e^{i(n−m)θ}.
pub fn psi(idx: BasisIndex, x: [f64; 2], params: &MagneticParams) -> Complex64 {
    let r = params.polar_r(x);
    let radial = radial_phi(idx.n, idx.m, r).value();
    if radial == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let theta = x[1].atan2(x[0]);
    let phase = (idx.n as f64 - idx.m as f64) * theta;
    let amp = radial / ((2.0 * PI).sqrt() * params.ell());
    Complex64::from_polar(amp, phase)
}
