use magtrace_core::hull::*;
use magtrace_core::numerics::{gauss_kronrod, QuadratureConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn quasi_hull() -> HullModel {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    HullModel::quasi_periodic(vec![[1.0, 0.0], [0.0, 1.0], [golden / 3.0, 2f64.sqrt() / 3.0]]).unwrap()
}

fn torus_distance(a: &HullPoint, b: &HullPoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn group_law(w0 in 0.0..1.0f64, w1 in 0.0..1.0f64, a in prop::array::uniform2(-50.0..50.0f64), b in prop::array::uniform2(-50.0..50.0f64)) {
        let t = HullModel::torus([1.3, 0.2], [-0.4, 0.9]).unwrap();
        let w = t.point(&[w0, w1]).unwrap();
        let lhs = t.translate(&t.translate(&w, a), b);
        let rhs = t.translate(&w, [a[0] + b[0], a[1] + b[1]]);
        prop_assert!(torus_distance(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn covariance(w in prop::array::uniform3(0.0..1.0f64), a in prop::array::uniform2(-20.0..20.0f64), x in prop::array::uniform2(-20.0..20.0f64)) {
        let h = quasi_hull();
        let g = PotentialSymbol::cosine(0.2, 1.0, vec![1, 0, -1]).add(&PotentialSymbol::cosine(0.0, 0.5, vec![0, 2, 1]));
        let w = h.point(&w).unwrap();
        let lhs = evaluate_potential(&g, &h, &h.translate(&w, a), x);
        let rhs = evaluate_potential(&g, &h, &w, [x[0] + a[0], x[1] + a[1]]);
        prop_assert!((lhs - rhs).norm() < 1e-10);
        let field = g.field(&h, &w).unwrap();
        prop_assert!((field.eval(x) - evaluate_potential(&g, &h, &w, x)).norm() < 1e-10);
    }

    #[test]
    fn expectation_translation_invariant(a in prop::array::uniform2(-10.0..10.0f64)) {
        let t = HullModel::square_torus(1.7).unwrap();
        let g = PotentialSymbol::custom(|w| Complex64::new((TAU * w[0]).sin().exp() * (1.0 + 0.5 * (TAU * w[1]).cos()), 0.0), 2.0 * 1.5f64.exp(), Smoothness::Smooth);
        let shifted = {
            let t2 = t.clone();
            let g2 = g.clone();
            PotentialSymbol::custom(move |w| g2.eval(t2.translate(&HullPoint(w.to_vec()), a).coords()), g.sup_bound(), Smoothness::Smooth)
        };
        let cfg = ExpectationConfig::default();
        let e1 = expectation(&t, &g, &cfg);
        let e2 = expectation(&t, &shifted, &cfg);
        prop_assert!((e1.value - e2.value).norm() < 1e-12);
    }

    #[test]
    fn sup_bound_holds(w in prop::array::uniform3(0.0..1.0f64)) {
        let g = PotentialSymbol::cosine(0.2, 1.0, vec![1, 0, -1]).add(&PotentialSymbol::cosine(0.0, 0.5, vec![0, 2, 1]));
        prop_assert!(g.eval(&w).norm() <= g.sup_bound() + 1e-14);
    }
}

#[test]
fn random_fourier_reproducible() {
    let a = HullModel::random_fourier(6, 0.7, 42).unwrap();
    let b = HullModel::random_fourier(6, 0.7, 42).unwrap();
    assert_eq!(a, b);
    let g = PotentialSymbol::random_fourier(&a).unwrap();
    let cfg = ExpectationConfig {
        mc_samples: 4000,
        ..Default::default()
    };
    let e1 = expectation(&a, &g, &cfg);
    let e2 = expectation(&b, &g, &cfg);
    assert_eq!(e1.value.re.to_bits(), e2.value.re.to_bits());
    assert!(e1.value.norm() < 5.0 * e1.error);
    assert_ne!(a, HullModel::random_fourier(6, 0.7, 43).unwrap());
}

#[test]
fn birkhoff_examples() {
    let quad = AverageQuadrature::default();
    let s = HullModel::singleton();
    let c = PotentialSymbol::real_constant(1.25);
    assert!((birkhoff_average(&s, &c, &s.origin(), 7.0, &quad).unwrap().re - 1.25).abs() < 1e-14);

    let t = HullModel::square_torus(1.0).unwrap();
    let g = PotentialSymbol::cosine(0.0, 1.0, vec![1, 0]);
    for side in [1.0, 3.0, 10.0] {
        assert!(birkhoff_average(&t, &g, &t.origin(), side, &quad).unwrap().norm() < 1e-13);
    }
}

/// Box average of Σ a e^{iq·x} is Σ a Π sinc(q_i L/2), so the deviation from the
/// mean is at most Σ 2|a| / (L max|q_i|).
fn box_rate(field: &PotentialField, side: f64) -> f64 {
    let (_, waves) = field.plane_waves().unwrap();
    waves
        .iter()
        .map(|w| 2.0 * w.amplitude.norm() / (side * w.q[0].abs().max(w.q[1].abs())))
        .sum()
}

#[test]
fn birkhoff_converges_to_expectation() {
    let h = quasi_hull();
    assert!(h.is_ergodic());
    let g = PotentialSymbol::cosine(0.4, 1.0, vec![1, 0, -1]).add(&PotentialSymbol::cosine(0.0, 0.5, vec![0, 2, 1]));
    let w = h.point(&[0.13, 0.71, 0.42]).unwrap();
    let mean = expectation(&h, &g, &ExpectationConfig::default()).value;
    assert!((mean.re - 0.4).abs() < 1e-14);
    let field = g.field(&h, &w).unwrap();
    let quad = AverageQuadrature::default();
    for side in [10.3, 40.7, 160.1] {
        let avg = birkhoff_average(&h, &g, &w, side, &quad).unwrap();
        assert!((avg - mean).norm() <= box_rate(&field, side), "L={side}");
        let disk = birkhoff_disk_average(&h, &g, &w, side / PI.sqrt(), &quad).unwrap();
        assert!((avg - disk).norm() <= 2.0 * box_rate(&field, side), "L={side}");
    }
}

#[test]
fn mollify_constant() {
    let t = HullModel::square_torus(2.0).unwrap();
    let phi = MollifierProfile::bump(0.6).unwrap();
    let g = mollify(&t, &PotentialSymbol::real_constant(3.0), &phi, &MollifyQuadrature::default());
    let v = g.eval(&[0.3, 0.8]).re;
    assert!((v - 3.0).abs() < 1e-11, "{v}");
    assert!((g.sup_bound() - 3.0).abs() < 1e-12);
}

fn bessel_j0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= -(x * x / 4.0) / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn mollified_cosine_is_damped_by_fourier_transform() {
    let period = 1.5;
    let radius = 0.5;
    let t = HullModel::square_torus(period).unwrap();
    let phi = MollifierProfile::bump(radius).unwrap();
    let g = PotentialSymbol::cosine(0.0, 1.0, vec![1, 0]);
    let gphi = mollify(&t, &g, &phi, &MollifyQuadrature::default());
    // radial profile: φ̂(q) = 2π ∫ r φ(r) J0(q r) dr
    let q = TAU / period;
    let cfg = QuadratureConfig::default();
    let (ft, _) = gauss_kronrod(|r| TAU * r * phi.eval([r, 0.0]) * bessel_j0(q * r), 0.0, radius, &cfg).unwrap();
    for w0 in [0.0, 0.2, 0.65] {
        let expect = ft * (TAU * w0).cos();
        let got = gphi.eval(&[w0, 0.4]).re;
        assert!((got - expect).abs() < 1e-10, "w0={w0} {got} {expect}");
    }
}

#[test]
fn mollifier_derivative_law() {
    let h = quasi_hull();
    let g = PotentialSymbol::cosine(0.0, 1.0, vec![1, 0, -1]).add(&PotentialSymbol::cosine(0.3, 0.5, vec![0, 2, 1]));
    let quad = MollifyQuadrature::default();
    let radius = 0.4;
    let gphi = mollify(&h, &g, &MollifierProfile::bump(radius).unwrap(), &quad);
    let w = h.point(&[0.1, 0.5, 0.8]).unwrap();
    let step = 1e-3;
    for axis in 0..2 {
        let dphi = MollifierProfile::bump_partial(radius, axis).unwrap();
        let lhs = mollify(&h, &g, &dphi, &quad).eval(w.coords());
        let mut e = [0.0; 2];
        let mut at = |s: f64| {
            e[axis] = s;
            gphi.eval(h.translate(&w, e).coords())
        };
        let fd = (at(-2.0 * step) - 8.0 * at(-step) + 8.0 * at(step) - at(2.0 * step)) / (12.0 * step);
        assert!((lhs - fd).norm() < 1e-6, "axis {axis}: {lhs} vs {fd}");
    }
}
