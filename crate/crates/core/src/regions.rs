//! Planar regions Σ: indicators, angular averages on circles, densities.

use crate::error::{domain, Result};
use crate::laguerre::MagneticParams;
use crate::numerics::{composite_nodes, gauss_legendre};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Number of trapezoid points on a circle when no exact arc set is known.
pub const FALLBACK_ANGLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Intersection,
    /// First child minus all the others.
    Difference,
    /// Complement of the single child.
    Complement,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionSpec {
    FullPlane,
    /// { x : x·normal ≥ offset }, normal of unit length.
    HalfPlane { normal: [f64; 2], offset: f64 },
    /// Polar angles θ with (θ − θ₁) mod 2π ≤ θ₂ − θ₁.
    Sector { theta1: f64, theta2: f64 },
    /// { x : (x·direction − phase) mod period ∈ [0, width] }.
    Stripes {
        direction: [f64; 2],
        width: f64,
        period: f64,
        phase: f64,
    },
    Disk { center: [f64; 2], radius: f64 },
    Combo { op: BoolOp, children: Vec<RegionSpec> },
}

fn unit(v: [f64; 2]) -> Result<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    if !(n > 0.0) || !n.is_finite() {
        return domain("direction vector must be nonzero and finite");
    }
    Ok([v[0] / n, v[1] / n])
}

impl RegionSpec {
    pub fn half_plane(normal: [f64; 2], offset: f64) -> Result<Self> {
        Ok(Self::HalfPlane {
            normal: unit(normal)?,
            offset,
        })
    }

    pub fn sector(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta2 > theta1) || theta2 - theta1 > TAU + 1e-15 {
            return domain(format!("sector needs θ₁ < θ₂ ≤ θ₁ + 2π, got [{theta1}, {theta2}]"));
        }
        Ok(Self::Sector { theta1, theta2 })
    }

    pub fn stripes(direction: [f64; 2], width: f64, period: f64, phase: f64) -> Result<Self> {
        if !(width > 0.0 && width <= period) {
            return domain(format!("stripes need 0 < width ≤ period, got {width} / {period}"));
        }
        Ok(Self::Stripes {
            direction: unit(direction)?,
            width,
            period,
            phase,
        })
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return domain(format!("disk radius must be nonnegative, got {radius}"));
        }
        Ok(Self::Disk { center, radius })
    }

    pub fn combo(op: BoolOp, children: Vec<RegionSpec>) -> Result<Self> {
        match op {
            BoolOp::Complement if children.len() != 1 => domain("complement takes exactly one region"),
            _ if children.is_empty() => domain("boolean combination of no regions"),
            _ => Ok(Self::Combo { op, children }),
        }
    }

    /// Membership of x, boundary included.
    pub fn indicator(&self, x: [f64; 2]) -> bool {
        match self {
            Self::FullPlane => true,
            Self::HalfPlane { normal, offset } => x[0] * normal[0] + x[1] * normal[1] >= *offset,
            Self::Sector { theta1, theta2 } => {
                let theta = x[1].atan2(x[0]);
                (theta - theta1).rem_euclid(TAU) <= theta2 - theta1
            }
            Self::Stripes {
                direction,
                width,
                period,
                phase,
            } => {
                let t = x[0] * direction[0] + x[1] * direction[1] - phase;
                t.rem_euclid(*period) <= *width
            }
            Self::Disk { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) <= *radius,
            Self::Combo { op, children } => match op {
                BoolOp::Union => children.iter().any(|c| c.indicator(x)),
                BoolOp::Intersection => children.iter().all(|c| c.indicator(x)),
                BoolOp::Difference => children[0].indicator(x) && !children[1..].iter().any(|c| c.indicator(x)),
                BoolOp::Complement => !children[0].indicator(x),
            },
        }
    }

    /// dens[Σ] where symmetry forces its value.
    pub fn analytic_density(&self) -> Option<f64> {
        match self {
            Self::FullPlane => Some(1.0),
            Self::HalfPlane { .. } => Some(0.5),
            Self::Sector { theta1, theta2 } => Some((theta2 - theta1) / TAU),
            Self::Stripes { width, period, .. } => Some(width / period),
            Self::Disk { .. } => Some(0.0),
            Self::Combo {
                op: BoolOp::Complement,
                children,
            } => children[0].analytic_density().map(|d| 1.0 - d),
            Self::Combo { .. } => None,
        }
    }

    /// True when the circle fraction does not depend on the radius.
    pub fn is_radially_constant(&self) -> bool {
        matches!(self, Self::FullPlane | Self::Sector { .. })
    }

    /// Arcs of the circle of Euclidean radius ρ lying in Σ, as sorted,
    /// disjoint angle intervals inside [0, 2π). `None` when no exact arc set
    /// is available (boolean combinations). At ρ = 0 the limit ρ → 0⁺ is
    /// returned.
    pub fn arcs(&self, rho: f64) -> Option<Vec<(f64, f64)>> {
        let rho = rho.max(1e-300);
        let mut arcs = Vec::new();
        match self {
            Self::FullPlane => arcs.push((0.0, TAU)),
            Self::HalfPlane { normal, offset } => {
                let phi = normal[1].atan2(normal[0]);
                band_arcs(&mut arcs, phi, *offset, f64::INFINITY, rho);
            }
            Self::Sector { theta1, theta2 } => push_arc(&mut arcs, *theta1, *theta2),
            Self::Stripes {
                direction,
                width,
                period,
                phase,
            } => {
                let phi = direction[1].atan2(direction[0]);
                let first = ((-rho - phase - width) / period).floor() as i64;
                let last = ((rho - phase) / period).ceil() as i64;
                for k in first..=last {
                    let lo = phase + k as f64 * period;
                    band_arcs(&mut arcs, phi, lo, lo + width, rho);
                }
            }
            Self::Disk { center, radius } => {
                let c = center[0].hypot(center[1]);
                if c == 0.0 {
                    if rho <= *radius {
                        arcs.push((0.0, TAU));
                    }
                } else {
                    let tau = (rho * rho + c * c - radius * radius) / (2.0 * rho * c);
                    if tau <= -1.0 {
                        arcs.push((0.0, TAU));
                    } else if tau <= 1.0 {
                        let phi = center[1].atan2(center[0]);
                        let w = tau.acos();
                        push_arc(&mut arcs, phi - w, phi + w);
                    }
                }
            }
            Self::Combo { .. } => return None,
        }
        Some(merge_arcs(arcs))
    }

    /// Euclidean radii at which the arc structure changes; panel breaks for
    /// radial quadrature.
    pub fn radial_kinks(&self, rho_max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_kinks(rho_max, &mut out);
        out.retain(|&r| r > 0.0 && r < rho_max);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        out
    }

    fn collect_kinks(&self, rho_max: f64, out: &mut Vec<f64>) {
        match self {
            Self::FullPlane | Self::Sector { .. } => {}
            Self::HalfPlane { offset, .. } => out.push(offset.abs()),
            Self::Stripes {
                width,
                period,
                phase,
                ..
            } => {
                let first = ((-rho_max - phase - width) / period).floor() as i64;
                let last = ((rho_max - phase) / period).ceil() as i64;
                for k in first..=last {
                    let lo = phase + k as f64 * period;
                    out.push(lo.abs());
                    out.push((lo + width).abs());
                }
            }
            Self::Disk { center, radius } => {
                let c = center[0].hypot(center[1]);
                out.push((radius - c).abs());
                out.push(radius + c);
            }
            Self::Combo { children, .. } => {
                for c in children {
                    c.collect_kinks(rho_max, out);
                }
            }
        }
    }

    /// Fraction of the circle of Euclidean radius ρ inside Σ.
    pub fn circle_fraction(&self, rho: f64) -> f64 {
        self.circle_fourier(0, rho).re
    }

    /// (2π)^{-1} ∫ e^{ikθ} χ_Σ(ρ cos θ, ρ sin θ) dθ.
    pub fn circle_fourier(&self, k: i64, rho: f64) -> Complex64 {
        match self.arcs(rho) {
            Some(arcs) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in arcs {
                    acc += if k == 0 {
                        Complex64::new(b - a, 0.0)
                    } else {
                        let kf = k as f64;
                        (Complex64::from_polar(1.0, kf * b) - Complex64::from_polar(1.0, kf * a))
                            / Complex64::new(0.0, kf)
                    };
                }
                acc / TAU
            }
            None => {
                let n = FALLBACK_ANGLES;
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..n {
                    let theta = TAU * s as f64 / n as f64;
                    if self.indicator([rho * theta.cos(), rho * theta.sin()]) {
                        acc += Complex64::from_polar(1.0, k as f64 * theta);
                    }
                }
                acc / n as f64
            }
        }
    }
}

/// Angles with ρ cos(θ − φ) ∈ [lo, hi].
fn band_arcs(arcs: &mut Vec<(f64, f64)>, phi: f64, lo: f64, hi: f64, rho: f64) {
    let a = (lo / rho).max(-1.0);
    let b = (hi / rho).min(1.0);
    if a > b {
        return;
    }
    let inner = b.acos();
    let outer = a.acos();
    push_arc(arcs, phi + inner, phi + outer);
    push_arc(arcs, phi - outer, phi - inner);
}

fn push_arc(arcs: &mut Vec<(f64, f64)>, a: f64, b: f64) {
    if b - a >= TAU {
        arcs.push((0.0, TAU));
        return;
    }
    let start = a.rem_euclid(TAU);
    let end = start + (b - a);
    if end <= TAU {
        arcs.push((start, end));
    } else {
        arcs.push((start, TAU));
        arcs.push((0.0, end - TAU));
    }
}

fn merge_arcs(mut arcs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    arcs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(arcs.len());
    for (a, b) in arcs {
        if let Some(last) = out.last_mut() {
            if a <= last.1 {
                last.1 = last.1.max(b);
                continue;
            }
        }
        out.push((a, b));
    }
    out
}

/// a_Σ(r): circle fraction at the polar-radius coordinate r = |x|²/(2ℓ²).
pub fn angular_average(region: &RegionSpec, r: f64, params: &MagneticParams) -> f64 {
    region.circle_fraction(params.radius_of(r))
}

/// Angular Fourier coefficient at the polar-radius coordinate r.
pub fn angular_fourier(region: &RegionSpec, k: i64, r: f64, params: &MagneticParams) -> Complex64 {
    region.circle_fourier(k, params.radius_of(r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallQuadrature {
    /// Gauss–Legendre nodes per radial panel.
    pub nodes: usize,
    /// Upper bound on the radial panel width.
    pub max_panel: f64,
}

impl Default for BallQuadrature {
    fn default() -> Self {
        Self {
            nodes: 12,
            max_panel: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// (ρ, |B(ρ)|^{-1} ∫_{B(ρ)} χ_Σ) for every radius of the schedule.
    pub per_radius: Vec<(f64, f64)>,
    pub value: f64,
    /// Spread between the last two radii.
    pub stderr: f64,
}

/// |B₀(ρ)|^{-1} ∫_{B₀(ρ)} χ_Σ = (2/ρ²) ∫_0^ρ s a(s) ds.
pub fn ball_fraction(region: &RegionSpec, rho: f64, quad: &BallQuadrature) -> f64 {
    if rho == 0.0 {
        return if region.indicator([0.0, 0.0]) { 1.0 } else { 0.0 };
    }
    let mut breaks = vec![0.0];
    breaks.extend(region.radial_kinks(rho));
    breaks.push(rho);
    let gl = gauss_legendre(quad.nodes);
    let nodes = composite_nodes(&breaks, |_| quad.max_panel, &gl);
    let s: f64 = nodes.iter().map(|&(s, w)| w * s * region.circle_fraction(s)).sum();
    2.0 * s / (rho * rho)
}

pub fn empirical_density(region: &RegionSpec, radii: &[f64], quad: &BallQuadrature) -> Result<DensityEstimate> {
    if radii.is_empty() {
        return domain("empirical_density needs at least one radius");
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return domain("empirical_density radii must be increasing");
    }
    let per_radius: Vec<(f64, f64)> = radii.iter().map(|&r| (r, ball_fraction(region, r, quad))).collect();
    let value = per_radius.last().unwrap().1;
    let stderr = if per_radius.len() > 1 {
        (value - per_radius[per_radius.len() - 2].1).abs()
    } else {
        0.0
    };
    Ok(DensityEstimate {
        per_radius,
        value,
        stderr,
    })
}
