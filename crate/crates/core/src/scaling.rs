//! Radial profiles R_m^{(i,j)} and their partial sums g_N, G_N.

use crate::error::{domain, Error, Result};
use crate::laguerre::{laguerre_poly, radial_phi, weighted_unchecked, Scaled};
use crate::numerics::{gauss_kronrod, ln_factorial, ln_gamma, pairwise_sum_by, QuadratureConfig};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileQuery {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub xi: f64,
}

/// R_m^{(i,j)}(ξ) = φ_{i,m}(ξ) φ_{j,m}(ξ)
/// = (√(i! j!)/m!) e^{−ξ} ξ^{m−(i+j)/2} L_i^{(m−i)}(ξ) L_j^{(m−j)}(ξ).
pub fn radial_profile(q: ProfileQuery) -> f64 {
    radial_phi(q.i, q.m, q.xi).mul(radial_phi(q.j, q.m, q.xi)).value()
}

/// R_m^{(i,j)} with the parameter-dependent log-gamma constants hoisted out,
/// for repeated evaluation at many radii.
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile {
    i: usize,
    j: usize,
    m: usize,
    lg_i: f64,
    lg_j: f64,
}

impl RadialProfile {
    pub fn new(i: usize, j: usize, m: usize) -> Self {
        Self {
            i,
            j,
            m,
            lg_i: ln_factorial(i.abs_diff(m)),
            lg_j: ln_factorial(j.abs_diff(m)),
        }
    }

    fn phi(n: usize, m: usize, r: f64, lg: f64) -> Scaled {
        if m >= n {
            weighted_unchecked(n, (m - n) as f64, r, lg)
        } else {
            let s = weighted_unchecked(m, (n - m) as f64, r, lg);
            if (n - m) % 2 == 1 {
                s.neg()
            } else {
                s
            }
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let a = Self::phi(self.i, self.m, r, self.lg_i);
        if self.i == self.j {
            return a.mul(a).value();
        }
        a.mul(Self::phi(self.j, self.m, r, self.lg_j)).value()
    }
}

/// Σ_{m<N} e^{−x} x^m / m!.
fn poisson_partial(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let lx = x.ln();
    pairwise_sum_by(n, |m| (-x + m as f64 * lx - ln_factorial(m)).exp())
}

/// Closed telescoped form of g_N^{(i,0)}, i ≥ 1, N ≥ i:
/// i g_N^{(i,0)}(x) = −√(i!) e^{−x} x^{N−i/2} L_{i−1}^{(N−i)}(x) / (N−1)!.
fn g_form(i: usize, n: usize, x: f64) -> f64 {
    debug_assert!(i >= 1 && n >= i);
    if x == 0.0 {
        return 0.0;
    }
    let lag = laguerre_poly(i - 1, (n - i) as f64, x).expect("finite argument");
    if lag == 0.0 {
        return 0.0;
    }
    let log_mag =
        0.5 * ln_factorial(i) - x + (n as f64 - 0.5 * i as f64) * x.ln() - ln_gamma(n as f64) + lag.abs().ln();
    -lag.signum() * log_mag.exp() / i as f64
}

/// g_N^{(i,j)}(x) by plain summation of the radial profiles over m < N.
pub fn g_partial_direct(i: usize, j: usize, n: usize, x: f64) -> f64 {
    pairwise_sum_by(n, |m| RadialProfile::new(i, j, m).eval(x))
}

/// g_N^{(i,j)}(x) = Σ_{m<N} R_m^{(i,j)}(x).
///
/// The (0,0) family is a Poisson partial sum; when exactly one index is zero
/// the telescoped closed form is used. With both indices positive the value is
/// climbed up from the boundary family through
/// i g^{(i,j)} = √(ij) g^{(i−1,j−1)} + D^{(i,j)}, which keeps relative accuracy
/// where the sum is exponentially small and plain summation would only return
/// rounding noise. Tiny N and x = 0 fall back to direct summation.
pub fn g_partial(i: usize, j: usize, n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return domain("g_partial needs N >= 1");
    }
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("g_partial needs finite x >= 0, got {x}"));
    }
    if n < i.max(j) || (x == 0.0 && i.min(j) > 0) {
        return Ok(g_partial_direct(i, j, n, x));
    }
    let d = i.min(j);
    let (a, b) = (i - d, j - d);
    let mut g = match (a, b) {
        (0, 0) => poisson_partial(n, x),
        (k, 0) | (0, k) => g_form(k, n, x),
        _ => unreachable!(),
    };
    for t in 1..=d {
        let (p, q) = (a + t, b + t);
        g = (((p * q) as f64).sqrt() * g + remainder_d(p, q, n, x)?) / p as f64;
    }
    Ok(g)
}

/// G_N^{(i,j)}(ξ) = g_N^{(i,j)}(Nξ).
pub fn scaled_partial_sum(i: usize, j: usize, n: usize, xi: f64) -> Result<f64> {
    if n < 2 {
        return domain("G_N needs N >= 2");
    }
    g_partial(i, j, n, n as f64 * xi)
}

/// D_N^{(i,j)}(x) = −√(i! j!) e^{−x} x^{N−(i+j)/2} L_{i−1}^{(N−i)}(x) L_j^{(N−j)}(x) / (N−1)!.
pub fn remainder_d(i: usize, j: usize, n: usize, x: f64) -> Result<f64> {
    if i == 0 || j == 0 {
        return domain("remainder_d needs i, j >= 1; use the closed g-form instead");
    }
    if n == 0 {
        return domain("remainder_d needs N >= 1");
    }
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("remainder_d needs finite x >= 0, got {x}"));
    }
    let power = n as f64 - 0.5 * (i + j) as f64;
    if x == 0.0 {
        if power > 0.0 {
            return Ok(0.0);
        }
        if power < 0.0 {
            return domain("remainder_d is singular at x = 0 for these indices");
        }
    }
    let li = laguerre_poly(i - 1, n as f64 - i as f64, x)?;
    let lj = laguerre_poly(j, n as f64 - j as f64, x)?;
    let prod = li * lj;
    if prod == 0.0 {
        return Ok(0.0);
    }
    let xpow = if x == 0.0 { 0.0 } else { power * x.ln() };
    let log_mag = 0.5 * (ln_factorial(i) + ln_factorial(j)) - x + xpow - ln_gamma(n as f64) + prod.abs().ln();
    Ok(-prod.signum() * log_mag.exp())
}

/// Large-deviation exponent N(ξ − 1 − ln ξ).
fn rate(n: usize, xi: f64) -> f64 {
    n as f64 * (xi - 1.0 - xi.ln())
}

/// Upper bound for i |G_N^{(i,0)}(ξ)| from the Stirling estimate.
pub fn bound_g_i0(i: usize, n: usize, xi: f64) -> f64 {
    let lg = 0.5 * (ln_factorial(i) - (2.0 * PI).ln()) - 0.5 * i as f64 * xi.ln()
        + 2.0 * xi
        + 0.5 * (i as f64 - 1.0) * (n as f64).ln()
        - rate(n, xi);
    lg.exp()
}

/// Upper bound for |D_N^{(i,j)}(Nξ)| from the Stirling estimate.
pub fn bound_d(i: usize, j: usize, n: usize, xi: f64) -> f64 {
    let lg = 0.5 * (ln_factorial(i) + ln_factorial(j) - (2.0 * PI).ln()) - 0.5 * (i + j) as f64 * xi.ln()
        + 3.0 * xi
        + 0.5 * ((i + j) as f64 - 1.0) * (n as f64).ln()
        - rate(n, xi);
    lg.exp()
}

/// ∫_0^∞ |G_N^{(i,j)}(ξ)| dξ.
///
/// The mass sits in an O(1/√N) window around ξ = 1, so the half-line is
/// split at 1 ± 5/√N and at 8; beyond 8 the integration continues until the
/// large-deviation factor e^{−N(ξ−1−ln ξ)} is negligible.
pub fn g_l1_norm(i: usize, j: usize, n: usize, quad: &QuadratureConfig) -> Result<f64> {
    if n < 2 {
        return domain("G_l1_norm needs N >= 2");
    }
    let w = 5.0 / (n as f64).sqrt();
    let mut cuts = vec![0.0];
    for c in [1.0 - w, 1.0 + w, 8.0] {
        if c > *cuts.last().unwrap() {
            cuts.push(c);
        }
    }
    let mut upper = 8.0;
    while rate(n, upper) < 60.0 + (i + j) as f64 * upper.ln() {
        upper *= 1.5;
    }
    if upper > 8.0 {
        cuts.push(upper);
    }
    let f = |xi: f64| scaled_partial_sum(i, j, n, xi).map(f64::abs).unwrap_or(f64::NAN);
    let mut total = 0.0;
    for win in cuts.windows(2) {
        let (v, _) = gauss_kronrod(f, win[0], win[1], quad).map_err(|e| match e {
            Error::NumericFailure { achieved, requested, .. } => Error::NumericFailure {
                what: format!("G_l1_norm({i},{j},{n}) on [{}, {}]", win[0], win[1]),
                achieved,
                requested,
            },
            other => other,
        })?;
        total += v;
    }
    Ok(total)
}
