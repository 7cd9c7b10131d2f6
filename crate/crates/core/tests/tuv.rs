use magtrace_core::elements::{tau_p, L1Element};
use magtrace_core::hull::*;
use magtrace_core::laguerre::psi;
use magtrace_core::numerics::gauss_legendre;
use magtrace_core::tuv::*;
use magtrace_core::{BasisIndex, Error, MagneticParams};
use num_complex::Complex64;
use std::f64::consts::PI;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn torus_element() -> (HullModel, L1Element, PotentialSymbol) {
    let hull = HullModel::square_torus(2.0).unwrap();
    let g = PotentialSymbol::cosine(1.0, 0.5, vec![1, 0]);
    let h = PotentialSymbol::cosine(0.25, 0.75, vec![1, 1]);
    let s = L1Element::single(&hull, 0, 0, g.clone())
        .with_term(1, 2, h.clone())
        .with_term(2, 2, h);
    (hull, s, g)
}

/// K(x,x) = Σ_{terms} Σ_{a<cutoff} ψ_{m,a}(x) conj ψ_{n,a}(x) g(t_x ω) from the
/// kernel of Υ_{n→m} = Σ_a |ψ_{m,a}⟩⟨ψ_{n,a}|.
fn dense_kernel(s: &L1Element, omega: &HullPoint, x: [f64; 2], p: &MagneticParams, cutoff: usize) -> Complex64 {
    s.terms()
        .iter()
        .map(|t| {
            let (n, m) = (t.transition.source, t.transition.target);
            let sum: Complex64 = (0..cutoff)
                .map(|a| psi(BasisIndex::new(m, a), x, p) * psi(BasisIndex::new(n, a), x, p).conj())
                .sum();
            sum * evaluate_potential(&t.symbol, s.hull(), omega, x)
        })
        .sum()
}

#[test]
fn diagonal_kernel_matches_dense_assembly() {
    let p = MagneticParams::new(1.3).unwrap();
    let (hull, s, _) = torus_element();
    let w = hull.point(&[0.1, 0.7]).unwrap();
    for x in [[0.0, 0.0], [0.5, -0.3], [1.2, 1.9], [-2.0, 0.4]] {
        let k = diagonal_kernel(&s, &w, x, &p);
        let o = dense_kernel(&s, &w, x, &p, 80);
        assert!((k - o).norm() < 1e-12, "{x:?}: {k} vs {o}");
    }
}

#[test]
fn diagonal_kernel_examples() {
    let p = MagneticParams::new(0.8).unwrap();
    let single = HullModel::singleton();
    let proj = L1Element::single(&single, 0, 0, PotentialSymbol::real_constant(1.0));
    let up = L1Element::single(&single, 1, 2, PotentialSymbol::real_constant(3.0));
    for x in [[0.0, 0.0], [4.0, -1.0]] {
        assert!((diagonal_kernel(&proj, &single.origin(), x, &p) - c(p.c0())).norm() < 1e-15);
        assert_eq!(diagonal_kernel(&up, &single.origin(), x, &p), c(0.0));
    }
    let (hull, _, g) = torus_element();
    let s = L1Element::single(&hull, 0, 0, g.clone());
    let w = hull.point(&[0.3, 0.0]).unwrap();
    let x = [0.7, 0.2];
    let want = evaluate_potential(&g, &hull, &w, x) * p.c0();
    assert!((diagonal_kernel(&s, &w, x, &p) - want).norm() < 1e-15);
}

#[test]
fn box_trace_matches_dense_trace_on_small_box() {
    let p = MagneticParams::default();
    let (hull, s, _) = torus_element();
    let w = hull.point(&[0.45, 0.2]).unwrap();
    let side = 4.0;
    let gl = gauss_legendre(12);
    let mut dense = c(0.0);
    for panel_x in 0..8 {
        for panel_y in 0..8 {
            let (x0, y0) = (-2.0 + 0.5 * panel_x as f64, -2.0 + 0.5 * panel_y as f64);
            for (x, wx) in gl.mapped(x0, x0 + 0.5) {
                for (y, wy) in gl.mapped(y0, y0 + 0.5) {
                    dense += dense_kernel(&s, &w, [x, y], &p, 50) * (wx * wy);
                }
            }
        }
    }
    dense /= side * side;
    let b = FolnerBox::centered(FolnerShape::Square, side);
    let quad = AverageQuadrature::default();
    let v = box_trace(&s, &w, &b, &p, &quad).unwrap();
    assert!((v - dense).norm() < 1e-10, "{v} vs {dense}");
}

#[test]
fn box_trace_examples() {
    let p = MagneticParams::default();
    let quad = AverageQuadrature::default();
    let single = HullModel::singleton();
    let proj = L1Element::single(&single, 0, 0, PotentialSymbol::real_constant(1.0));
    let up = L1Element::single(&single, 1, 2, PotentialSymbol::real_constant(1.0));
    for size in [0.5, 3.0, 40.0] {
        for shape in [FolnerShape::Square, FolnerShape::Disk] {
            let b = FolnerBox::centered(shape, size);
            assert!((box_trace(&proj, &single.origin(), &b, &p, &quad).unwrap() - c(p.c0())).norm() < 1e-15);
            assert_eq!(box_trace(&up, &single.origin(), &b, &p, &quad).unwrap(), c(0.0));
        }
    }
    let (hull, _, g) = torus_element();
    let s = L1Element::single(&hull, 0, 0, g);
    let w = hull.point(&[0.37, 0.81]).unwrap();
    for periods in [1.0, 3.0, 10.0] {
        let b = FolnerBox::centered(FolnerShape::Square, 2.0 * periods);
        let fast = box_trace(&s, &w, &b, &p, &quad).unwrap();
        let slow = box_trace_quadrature(&s, &w, &b, &p, &quad).unwrap();
        assert!((fast - c(p.c0())).norm() < 1e-15);
        assert!((slow - c(p.c0())).norm() < 1e-13);
    }
    let b = FolnerBox {
        shape: FolnerShape::Square,
        size: 3.3,
        center: [0.4, -1.1],
    };
    let fast = box_trace(&s, &w, &b, &p, &quad).unwrap();
    let slow = box_trace_quadrature(&s, &w, &b, &p, &quad).unwrap();
    assert!((fast - slow).norm() < 1e-13);
    assert!(matches!(box_trace(&s, &w, &FolnerBox::centered(FolnerShape::Square, 0.0), &p, &quad), Err(Error::Domain(_))));
}

#[test]
fn box_trace_covariance() {
    let p = MagneticParams::default();
    let quad = AverageQuadrature::default();
    let (hull, s, _) = torus_element();
    let w = hull.point(&[0.12, 0.5]).unwrap();
    let a = [0.9, -2.3];
    for shape in [FolnerShape::Square, FolnerShape::Disk] {
        let moved = FolnerBox {
            shape,
            size: 5.5,
            center: [a[0] + 0.3, a[1] - 0.2],
        };
        let base = FolnerBox {
            shape,
            size: 5.5,
            center: [0.3, -0.2],
        };
        let lhs = box_trace(&s, &hull.translate(&w, a), &base, &p, &quad).unwrap();
        let rhs = box_trace(&s, &w, &moved, &p, &quad).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
    }
}

#[test]
fn tuv_estimate_converges_like_inverse_size() {
    let p = MagneticParams::default();
    let quad = AverageQuadrature::default();
    let (hull, _, g) = torus_element();
    let s = L1Element::single(&hull, 0, 0, g);
    let w = hull.point(&[0.2, 0.3]).unwrap();
    let sizes: Vec<f64> = [2.5, 5.5, 10.5, 20.5, 40.5].iter().map(|k| 2.0 * k).collect();
    let est = tuv_estimate(&s, &w, &FolnerSchedule::square(sizes.clone()).unwrap(), &p, &quad).unwrap();
    // |average of 0.5 cos(q·x + φ)| over a square ≤ 0.5 · 2/(L |q|)
    let q = PI;
    for (l, v) in sizes.iter().zip(&est.values) {
        assert!((v / p.c0() - c(1.0)).norm() <= 0.5 * 2.0 / (l * q) + 1e-14, "L={l}: {v}");
    }
    assert!(est.uncertainty > 0.0 && est.uncertainty < 0.01);

    let single = HullModel::singleton();
    let proj = L1Element::single(&single, 0, 0, PotentialSymbol::real_constant(2.0));
    let e = tuv_estimate(&proj, &single.origin(), &FolnerSchedule::disk(vec![1.0, 2.0, 3.0]).unwrap(), &p, &quad).unwrap();
    assert_eq!(e.uncertainty, 0.0);
    assert!(e.to_csv().starts_with("size,value_re,value_im\n"));
}

#[test]
fn square_and_disk_schedules_agree() {
    let p = MagneticParams::default();
    let quad = AverageQuadrature::default();
    let (hull, s, _) = torus_element();
    let w = hull.point(&[0.6, 0.15]).unwrap();
    let sizes = vec![20.3, 50.3, 100.3];
    let sq = tuv_estimate(&s, &w, &FolnerSchedule::square(sizes.clone()).unwrap(), &p, &quad).unwrap();
    let dk = tuv_estimate(&s, &w, &FolnerSchedule::disk(sizes).unwrap(), &p, &quad).unwrap();
    assert!(((sq.value - dk.value) / sq.value).norm() < 2e-3, "{} vs {}", sq.value, dk.value);
}

#[test]
fn tuv_expectation_examples() {
    let cfg = TuvConfig::default();
    let sched = FolnerSchedule::square(vec![3.0, 7.0, 11.0]).unwrap();
    let single = HullModel::singleton();
    let proj = L1Element::single(&single, 0, 0, PotentialSymbol::real_constant(1.5));
    let e = tuv_expectation(&proj, &sched, &cfg).unwrap();
    let direct = tuv_estimate(&proj, &single.origin(), &sched, &cfg.params, &cfg.quad).unwrap();
    assert_eq!(e.value, direct.value);

    let (hull, s, g) = torus_element();
    let e = tuv_expectation(&s, &sched, &cfg).unwrap();
    // diagonal terms: g and h, with E[g] = 1, E[h] = 0.25
    let want = (expectation(&hull, &g, &cfg.omega).value + c(0.25)) * cfg.params.c0();
    assert!((e.value - want).norm() < 1e-14, "{} vs {want}", e.value);

    let zero = L1Element::new(&hull);
    assert_eq!(tuv_expectation(&zero, &sched, &cfg).unwrap().value, c(0.0));
}

#[test]
fn consistency_reports() {
    let cfg = TuvConfig::default();
    let sched = FolnerSchedule::square(vec![10.0, 30.0, 101.0]).unwrap();
    let single = HullModel::singleton();
    let proj = L1Element::single(&single, 0, 0, PotentialSymbol::real_constant(1.0));
    let r = consistency_2lambda(&proj, &sched, &cfg).unwrap();
    assert!((r.tau_p.value - c(1.0)).norm() < 1e-15 && r.relative < 1e-12);

    let (hull, _, g) = torus_element();
    let s = L1Element::single(&hull, 0, 0, g);
    let r = consistency_2lambda(&s, &sched, &cfg).unwrap();
    assert!(r.relative < 1e-3, "{r:?}");

    let off = L1Element::single(&hull, 0, 3, PotentialSymbol::cosine(1.0, 1.0, vec![0, 1]));
    let r = consistency_2lambda(&off, &sched, &cfg).unwrap();
    assert_eq!((r.tau_p.value, r.scaled_tuv.value, r.relative), (c(0.0), c(0.0), 0.0));
    assert_eq!(tau_p(&off, &cfg.omega).value, c(0.0));
}

#[test]
fn windowed_trace_examples() {
    let cfg = TuvConfig::default();
    let single = HullModel::singleton();
    let proj = L1Element::single(&single, 0, 0, PotentialSymbol::real_constant(1.0));
    let v = windowed_trace(&proj, &Window::gaussian(1.7).unwrap(), &cfg).unwrap();
    assert!((v - c(cfg.params.c0())).norm() < 1e-12);

    let (hull, _, g) = torus_element();
    let s = L1Element::single(&hull, 0, 0, g);
    let cell = Window::square_indicator([0.3, 0.1], 2.0).unwrap();
    let v = windowed_trace(&s, &cell, &cfg).unwrap();
    let b = FolnerBox {
        shape: FolnerShape::Square,
        size: 2.0,
        center: [0.3, 0.1],
    };
    let boxes: Vec<Complex64> = hull_samples(&hull, &cfg.omega)
        .iter()
        .map(|w| box_trace(&s, w, &b, &cfg.params, &cfg.quad).unwrap())
        .collect();
    let mean = boxes.iter().sum::<Complex64>() / boxes.len() as f64;
    assert!((v - mean).norm() < 1e-13);
    assert!((v - c(cfg.params.c0())).norm() < 1e-13);

    assert_eq!(windowed_trace(&L1Element::new(&hull), &cell, &cfg).unwrap(), c(0.0));
    let loose = Window::new(|_| 1.0, [0.0, 0.0], 2.0).unwrap();
    assert!(matches!(windowed_trace(&s, &loose, &cfg), Err(Error::Domain(_))));
}
