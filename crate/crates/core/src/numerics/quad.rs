//! Gauss–Legendre rules and adaptive Gauss–Kronrod integration.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of the adaptive driver.
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_depth: 40,
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn gauss_legendre(n: usize) -> GaussLegendre {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussLegendre { nodes, weights }
}

impl GaussLegendre {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x);
        }
        acc
    }
}

/// Composite rule on the panels `breaks[k]..breaks[k+1]`, each further split so
/// no panel is wider than `max_width(midpoint)`.
///
/// Every panel is mapped through the smoothstep substitution
/// x = a + (b−a)(3t² − 2t³), which turns square-root behaviour at panel ends
/// into smooth integrands; place the breaks on such points.
pub fn composite_nodes(breaks: &[f64], max_width: impl Fn(f64) -> f64, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        let width = max_width(0.5 * (a + b)).max(1e-300);
        let pieces = ((b - a) / width).ceil().max(1.0) as usize;
        let step = (b - a) / pieces as f64;
        for p in 0..pieces {
            let lo = a + p as f64 * step;
            let hi = if p + 1 == pieces { b } else { lo + step };
            push_smoothstep_panel(&mut out, lo, hi, gl);
        }
    }
    out
}

fn push_smoothstep_panel(out: &mut Vec<(f64, f64)>, a: f64, b: f64, gl: &GaussLegendre) {
    for (t, w) in gl.mapped(0.0, 1.0) {
        let s = t * t * (3.0 - 2.0 * t);
        let ds = 6.0 * t * (1.0 - t);
        out.push((a + (b - a) * s, w * (b - a) * ds));
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive G7/K15 integration of `f` over [a, b].
///
/// Returns the integral and an error estimate. Fails if some panel cannot be
/// resolved within `max_depth` bisections.
pub fn gauss_kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (coarse, _) = gk15(&f, a, b);
    let scale = coarse.abs();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut worst = 0.0f64;
    // Explicit stack keeps the panel order deterministic.
    let mut stack = vec![(a, b, 0u32)];
    let width = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        if !v.is_finite() {
            return Err(Error::NumericFailure {
                what: format!("non-finite integrand on [{lo}, {hi}]"),
                achieved: f64::INFINITY,
                requested: cfg.abs_tol,
            });
        }
        let share = (hi - lo).abs() / width;
        let budget = (cfg.abs_tol.max(cfg.rel_tol * scale)) * share.max(1e-3);
        if e <= budget || depth >= cfg.max_depth {
            if e > budget {
                worst = worst.max(e);
            }
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    let requested = cfg.abs_tol.max(cfg.rel_tol * total.abs());
    if worst > 0.0 && err > requested {
        return Err(Error::NumericFailure {
            what: "adaptive Gauss-Kronrod did not converge".into(),
            achieved: err,
            requested,
        });
    }
    Ok((total, err))
}
