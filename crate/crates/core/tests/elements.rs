use magtrace_core::elements::*;
use magtrace_core::hull::*;
use magtrace_core::laguerre::psi;
use magtrace_core::numerics::{gauss_kronrod, QuadratureConfig};
use magtrace_core::regions::RegionSpec;
use magtrace_core::scaling::RadialProfile;
use magtrace_core::{BasisIndex, MagneticParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn transition_algebra_relations() {
    for j in 0..=8 {
        for k in 0..=8 {
            let a = TransitionTerm::new(j, k);
            assert_eq!(a.adjoint().adjoint(), a);
            for m in 0..=8 {
                for n in 0..=8 {
                    let b = TransitionTerm::new(m, n);
                    let prod = compose_transitions(a, b);
                    assert_eq!(prod.is_some(), j == n);
                    // agrees with acting on every basis vector
                    for level in 0..=8 {
                        let idx = BasisIndex::new(level, 3);
                        let two_step = b.apply(idx).and_then(|v| a.apply(v));
                        assert_eq!(two_step, prod.and_then(|p| p.apply(idx)));
                    }
                    // (ab)* = b* a*
                    assert_eq!(prod.map(|p| p.adjoint()), compose_transitions(b.adjoint(), a.adjoint()));
                }
            }
        }
    }
}

fn grid_element(f: impl Fn([f64; 2]) -> Complex64, bra: BasisIndex, ket: BasisIndex, p: &MagneticParams) -> Complex64 {
    let h = 0.15 * p.ell();
    let n = (13.0 * p.ell() / h) as i64;
    let mut acc = c(0.0, 0.0);
    for a in -n..=n {
        for b in -n..=n {
            let x = [a as f64 * h, b as f64 * h];
            acc += psi(bra, x, p).conj() * f(x) * psi(ket, x, p);
        }
    }
    acc * h * h
}

#[test]
fn plane_wave_closed_form_matches_grid() {
    let p = MagneticParams::new(0.9).unwrap();
    let q = [0.8, -0.5];
    for (bra, ket) in [((0, 0), (0, 0)), ((1, 0), (0, 0)), ((0, 2), (1, 1)), ((2, 3), (0, 3)), ((1, 2), (2, 2))] {
        let bra = BasisIndex::new(bra.0, bra.1);
        let ket = BasisIndex::new(ket.0, ket.1);
        let closed = plane_wave_element(q, bra, ket, &p).unwrap();
        let grid = grid_element(|x| Complex64::from_polar(1.0, q[0] * x[0] + q[1] * x[1]), bra, ket, &p);
        assert!((closed - grid).norm() < 1e-10, "{bra:?} {ket:?}: {closed} vs {grid}");
    }
}

fn opaque(g: &PotentialSymbol) -> PotentialSymbol {
    let inner = g.clone();
    PotentialSymbol::custom(move |w| inner.eval(w), g.sup_bound(), Smoothness::Smooth)
}

#[test]
fn fast_path_matches_polar_quadrature() {
    let p = MagneticParams::default();
    let hull = HullModel::square_torus(3.0).unwrap();
    let g = PotentialSymbol::cosine(1.0, 0.5, vec![1, 0]).add(&PotentialSymbol::cosine(0.0, 0.3, vec![1, -1]));
    let w = hull.point(&[0.2, 0.7]).unwrap();
    let quad = ElementQuadrature::default();
    for (i, j, m) in [(0, 0, 0), (0, 0, 40), (1, 2, 15), (2, 1, 300), (1, 1, 2000)] {
        let fast = weighted_element(&g, &hull, &w, i, j, m, &p, &quad).unwrap();
        let slow = weighted_element(&opaque(&g), &hull, &w, i, j, m, &p, &quad).unwrap();
        assert!((fast - slow).norm() < 1e-9, "({i},{j},{m}): {fast} vs {slow}");
    }
}

#[test]
fn weighted_element_matches_monte_carlo() {
    let p = MagneticParams::default();
    let hull = HullModel::square_torus(2.5).unwrap();
    let g = PotentialSymbol::cosine(0.0, 1.0, vec![1, 0]);
    let w = hull.point(&[0.1, 0.0]).unwrap();
    let field = g.field(&hull, &w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (i, j, m) in [(0, 0, 1), (1, 0, 2), (1, 2, 1)] {
        let exact = weighted_element(&g, &hull, &w, i, j, m, &p, &ElementQuadrature::default()).unwrap();
        // sample x from the density |x|-radial Gaussian e^{-|x|²/(2σ²)}/(2πσ²)
        let sigma = 2.0;
        let n = 200_000;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen::<f64>().max(1e-300);
            let rho = sigma * (-2.0 * u.ln()).sqrt();
            let t = rng.gen::<f64>() * TAU;
            let x = [rho * t.cos(), rho * t.sin()];
            let dens = (-(rho * rho) / (2.0 * sigma * sigma)).exp() / (TAU * sigma * sigma);
            let v = psi(BasisIndex::new(i, m), x, &p).conj() * field.eval(x) * psi(BasisIndex::new(j, m), x, &p) / dens;
            vals.push(v);
        }
        let mean: Complex64 = vals.iter().sum::<Complex64>() / n as f64;
        let var: f64 = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        assert!((mean - exact).norm() < 3.0 * stderr, "({i},{j},{m}): {exact} vs {mean} ± {stderr}");
    }
}

/// Independent route: adaptive radial integration with a brute-force angular
/// average of the indicator.
fn region_oracle(region: &RegionSpec, i: usize, j: usize, m: usize, p: &MagneticParams) -> Complex64 {
    let k = j as f64 - i as f64;
    let profile = RadialProfile::new(i, j, m);
    let count = 20_000;
    let table: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|s| {
            let t = (s as f64 + 0.5) * TAU / count as f64;
            (t.cos(), t.sin(), (k * t).cos(), (k * t).sin())
        })
        .collect();
    let angular = |r: f64, part: usize| {
        let rho = p.radius_of(r);
        let mut acc = 0.0;
        for &(ct, st, ck, sk) in &table {
            if region.indicator([rho * ct, rho * st]) {
                acc += if part == 0 { ck } else { sk };
            }
        }
        acc / count as f64
    };
    let cfg = QuadratureConfig {
        abs_tol: 1e-6,
        rel_tol: 1e-6,
        max_depth: 20,
    };
    let hi = m as f64 + 12.0 * (m as f64 + 1.0).sqrt() + 40.0;
    let re = gauss_kronrod(|r| angular(r, 0) * profile.eval(r), 0.0, hi, &cfg).unwrap().0;
    let im = gauss_kronrod(|r| angular(r, 1) * profile.eval(r), 0.0, hi, &cfg).unwrap().0;
    c(re, im)
}

#[test]
fn region_element_matches_independent_route() {
    let p = MagneticParams::default();
    let quad = ElementQuadrature::default();
    let stripes = RegionSpec::stripes([1.0, 0.0], 1.0, 3.0, 0.0).unwrap();
    let disk = RegionSpec::disk([1.0, 0.5], 2.0).unwrap();
    for (region, i, j, m) in [(&stripes, 0, 0, 3), (&stripes, 0, 1, 10), (&disk, 1, 1, 2), (&disk, 0, 2, 1)] {
        let v = region_element(region, i, j, m, &p, &quad).unwrap();
        let o = region_oracle(region, i, j, m, &p);
        assert!((v - o).norm() < 2e-4, "({i},{j},{m}): {v} vs {o}");
    }
}

#[test]
fn region_sweep_matches_single_elements() {
    let p = MagneticParams::new(1.2).unwrap();
    let quad = ElementQuadrature::default();
    let stripes = RegionSpec::stripes([0.6, 0.8], 1.0, 3.0, 0.4).unwrap();
    for (i, j) in [(0, 0), (0, 1), (2, 1)] {
        let sweep = RegionSweep::new(&stripes, i, j, 3000, &p, &quad);
        for m in [0, 1, 17, 400, 2999] {
            let a = sweep.element(m);
            let b = region_element(&stripes, i, j, m, &p, &quad).unwrap();
            assert!((a - b).norm() < 1e-10, "({i},{j},{m}): {a} vs {b}");
        }
    }
}

#[test]
fn region_element_swap_conjugates() {
    let p = MagneticParams::default();
    let quad = ElementQuadrature::default();
    let r = RegionSpec::half_plane([0.6, -0.8], 0.7).unwrap();
    for m in [0, 3, 50] {
        let a = region_element(&r, 0, 2, m, &p, &quad).unwrap();
        let b = region_element(&r, 2, 0, m, &p, &quad).unwrap();
        assert!((a - b.conj()).norm() < 1e-12);
    }
}

#[test]
fn tau_p_examples() {
    let cfg = ExpectationConfig::default();
    let hull = HullModel::square_torus(1.0).unwrap();
    let g = PotentialSymbol::cosine(0.75, 0.5, vec![1, 0]);
    for (n, m) in [(0, 0), (2, 2), (1, 2), (3, 0)] {
        let s = L1Element::single(&hull, n, m, g.clone());
        let want = if n == m { 0.75 } else { 0.0 };
        assert!((tau_p(&s, &cfg).value.re - want).abs() < 1e-14);
    }
    let s = L1Element::single(&HullModel::singleton(), 0, 0, PotentialSymbol::real_constant(2.5));
    assert_eq!(tau_p(&s, &cfg).value, c(2.5, 0.0));

    for (j, k, n, m) in [(0, 1, 1, 0), (0, 1, 2, 0), (2, 2, 2, 2), (3, 1, 1, 2)] {
        let v = sandwich_trace(TransitionTerm::new(j, k), &g, TransitionTerm::new(n, m), &hull, &cfg).value;
        let want = if n == k && j == m { 0.75 } else { 0.0 };
        assert!((v.re - want).abs() < 1e-14, "({j},{k},{n},{m})");
    }
}

#[test]
fn tau_p_linear_and_adjoint_conjugates() {
    let cfg = ExpectationConfig::default();
    let hull = HullModel::square_torus(1.0).unwrap();
    let g = PotentialSymbol::trig(c(0.3, 0.4), vec![TrigMode { freq: vec![0, 1], amplitude: c(0.0, 1.0) }]);
    let h = PotentialSymbol::cosine(-1.0, 0.2, vec![1, 1]);
    let s = L1Element::single(&hull, 0, 0, g.clone()).with_term(1, 2, h.clone()).with_term(1, 1, h.clone());
    let t = L1Element::single(&hull, 1, 1, g).with_term(2, 2, h);
    let a = c(0.5, -2.0);
    let lhs = tau_p(&s.scale(a).add(&t).unwrap(), &cfg).value;
    let rhs = a * tau_p(&s, &cfg).value + tau_p(&t, &cfg).value;
    assert!((lhs - rhs).norm() < 1e-14);
    assert!((tau_p(&s.adjoint(), &cfg).value - tau_p(&s, &cfg).value.conj()).norm() < 1e-14);
}

fn dense_oracle(s: &L1Element, omega: &HullPoint, cutoff: usize, p: &MagneticParams) -> DMatrix<Complex64> {
    // sample every ψ and every potential on one grid, then assemble by inner products
    let h = 0.2 * p.ell();
    let n = (12.0 * p.ell() / h) as i64;
    let pts: Vec<[f64; 2]> = (-n..=n).flat_map(|a| (-n..=n).map(move |b| [a as f64 * h, b as f64 * h])).collect();
    let basis = truncated_basis(cutoff);
    let levels = cutoff.max(s.max_level() + 1);
    let sample = |idx: BasisIndex| pts.iter().map(|&x| psi(idx, x, p)).collect::<Vec<_>>();
    let waves: Vec<Vec<Vec<Complex64>>> = (0..levels).map(|l| (0..cutoff).map(|m| sample(BasisIndex::new(l, m))).collect()).collect();
    let inner = |a: &[Complex64], f: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(f).zip(b).map(|((x, y), z)| x.conj() * y * z).sum::<Complex64>() * h * h
    };
    let d = basis.len();
    let mut out = DMatrix::zeros(d, d);
    for t in s.terms() {
        let field = t.symbol.field(s.hull(), omega).unwrap();
        let fv: Vec<Complex64> = pts.iter().map(|&x| field.eval(x)).collect();
        for (r, bra) in basis.iter().enumerate() {
            for (col, ket) in basis.iter().enumerate() {
                let tr = t.transition;
                let v = match s.order() {
                    TermOrder::TransitionFirst if bra.n == tr.target => inner(&waves[tr.source][bra.m], &fv, &waves[ket.n][ket.m]),
                    TermOrder::PotentialFirst if ket.n == tr.source => inner(&waves[bra.n][bra.m], &fv, &waves[tr.target][ket.m]),
                    _ => c(0.0, 0.0),
                };
                out[(r, col)] += v;
            }
        }
    }
    out
}

#[test]
fn truncated_matrix_matches_dense_grid() {
    let p = MagneticParams::default();
    let hull = HullModel::square_torus(2.0).unwrap();
    let w = hull.point(&[0.3, 0.6]).unwrap();
    let s = L1Element::single(&hull, 0, 0, PotentialSymbol::cosine(1.0, 0.5, vec![1, 0]))
        .with_term(1, 2, PotentialSymbol::cosine(0.0, 0.7, vec![0, 1]))
        .with_term(3, 1, PotentialSymbol::real_constant(0.4));
    for elem in [s.clone(), s.adjoint()] {
        let m = truncated_matrix(&elem, &w, 4, &p).unwrap();
        let o = dense_oracle(&elem, &w, 4, &p);
        let err = (&m - &o).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
    // adjoint element gives the conjugate-transposed matrix
    let a = truncated_matrix(&s, &w, 4, &p).unwrap();
    let b = truncated_matrix(&s.adjoint(), &w, 4, &p).unwrap();
    assert!((a.adjoint() - b).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
}

#[test]
fn projection_and_transition_matrices() {
    let p = MagneticParams::default();
    let hull = HullModel::singleton();
    let one = PotentialSymbol::real_constant(1.0);
    let proj = truncated_matrix(&L1Element::single(&hull, 0, 0, one.clone()), &hull.origin(), 3, &p).unwrap();
    let basis = truncated_basis(3);
    for (r, a) in basis.iter().enumerate() {
        for (col, b) in basis.iter().enumerate() {
            let want = if a == b && a.n == 0 { 1.0 } else { 0.0 };
            assert!((proj[(r, col)] - want).norm() < 1e-14);
        }
    }
    let up = truncated_matrix(&L1Element::single(&hull, 1, 2, one), &hull.origin(), 3, &p).unwrap();
    for (r, a) in basis.iter().enumerate() {
        for (col, b) in basis.iter().enumerate() {
            let want = if b.n == 1 && a.n == 2 && a.m == b.m { 1.0 } else { 0.0 };
            assert!((up[(r, col)] - want).norm() < 1e-14);
        }
    }
}

#[test]
fn factorization_examples() {
    let hull = HullModel::singleton();
    let s = L1Element::single(&hull, 2, 2, PotentialSymbol::real_constant(4.0));
    let (s1, s2) = factorize(&s).unwrap();
    assert_eq!(s1.terms().len(), 1);
    assert!((s1.terms()[0].symbol.as_constant().unwrap().re - 2.0).abs() < 1e-15);
    assert!((s2.terms()[0].symbol.as_constant().unwrap().re - 2.0).abs() < 1e-15);

    let z = L1Element::single(&hull, 0, 1, PotentialSymbol::real_constant(0.0)).with_term(1, 0, PotentialSymbol::real_constant(1.0));
    let (s1, s2) = factorize(&z).unwrap();
    assert!(s1.terms().iter().all(|t| t.transition.target != 1));
    assert!(s2.terms().iter().find(|t| t.transition.target == 1).unwrap().symbol.is_zero());
}

fn compose_matrices(s1: &L1Element, s2: &L1Element, w: &HullPoint, cutoff: usize, p: &MagneticParams) -> DMatrix<Complex64> {
    truncated_matrix(s1, w, cutoff, p).unwrap() * truncated_matrix(s2, w, cutoff, p).unwrap()
}

#[test]
fn random_factorization_reproduces_matrix() {
    let p = MagneticParams::default();
    let hull = HullModel::square_torus(1.5).unwrap();
    let w = hull.point(&[0.4, 0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..3 {
        let mut s = L1Element::new(&hull);
        for _ in 0..5 {
            let amp = rng.gen_range(0.1..2.0);
            let g = PotentialSymbol::cosine(rng.gen_range(-1.0..1.0), amp, vec![rng.gen_range(-1..=1), rng.gen_range(-1..=1)]);
            s = s.with_term(rng.gen_range(0..4), rng.gen_range(0..4), g);
        }
        let (s1, s2) = factorize(&s).unwrap();
        let direct = truncated_matrix(&s, &w, 4, &p).unwrap();
        let product = compose_matrices(&s1, &s2, &w, 4, &p);
        let err = (&direct - &product).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}

#[test]
fn norm_bounds_dominate_truncated_norm() {
    let p = MagneticParams::default();
    let cfg = ExpectationConfig::default();
    let single = L1Element::single(&HullModel::singleton(), 0, 0, PotentialSymbol::real_constant(1.0));
    let b = norm_bounds(&single, &cfg);
    assert_eq!((b.l1_bound, b.l2_kernel_bound), (1.0, 1.0));

    let hull = HullModel::square_torus(2.0).unwrap();
    let w = hull.point(&[0.25, 0.5]).unwrap();
    let s = L1Element::single(&hull, 0, 0, PotentialSymbol::cosine(1.0, 0.5, vec![1, 0]))
        .with_term(1, 2, PotentialSymbol::cosine(0.0, 0.8, vec![1, 1]))
        .with_term(2, 0, PotentialSymbol::real_constant(0.3));
    let b = norm_bounds(&s, &cfg);
    let op = operator_norm(&truncated_matrix(&s, &w, 12, &p).unwrap());
    assert!(op <= b.l1_bound + 1e-10, "{op} > {}", b.l1_bound);
    assert!(op <= b.l2_kernel_bound + 1e-10, "{op} > {}", b.l2_kernel_bound);
    assert!(b.l2_kernel_bound <= b.l1_bound + 1e-12);
}

#[test]
fn sector_element_equals_angular_fraction() {
    let p = MagneticParams::default();
    let quad = ElementQuadrature::default();
    let s = RegionSpec::sector(0.3, 0.3 + PI / 3.0).unwrap();
    for j in 0..4 {
        for m in [0, 9, 12345] {
            let v = region_element(&s, j, j, m, &p, &quad).unwrap();
            assert!((v.re - 1.0 / 6.0).abs() < 1e-15);
        }
    }
}
