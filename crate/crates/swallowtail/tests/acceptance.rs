//! Acceptance gate: one test per criterion, each printing a pass line.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use swallowtail::charpoly::{char_poly, cycle_expansion, CharPolyFamily};
use swallowtail::classifier::{bands_along_path, gyroid_diagonal_closed_form, Classification};
use swallowtail::critical::{find_critical_points, point_distance, CriticalPoint, FinderOptions, SingularLocus};
use swallowtail::graph::{builtin_model, Domain, ModelSpec, MODEL_NAMES};
use swallowtail::rational::GaussRat;
use swallowtail::region::{sample_region, scan_ranges, RegionOptions};
use swallowtail::singularity::{a3_slice_closed_form_exact, discriminant_exact, Stratum};
use swallowtail::trigpoly::{Backend, TrigPoly};

fn pass(criterion: usize, name: &str) {
    // Direct fd write so the line shows even under libtest output capture.
    use std::io::Write;
    let _ = writeln!(
        std::io::stderr().lock(),
        "[acceptance] criterion {criterion:2} ({name}): PASS"
    );
}

fn gyroid() -> (ModelSpec, CharPolyFamily) {
    let m = builtin_model("gyroid").unwrap();
    let cp = char_poly(&m.family).unwrap();
    (m, cp)
}

fn locus(name: &str, grid: usize) -> (SingularLocus, Domain) {
    let m = builtin_model(name).unwrap();
    let cp = char_poly(&m.family).unwrap();
    let opts = FinderOptions {
        grid,
        ..FinderOptions::default()
    };
    (
        find_critical_points(&cp, Some(&m.family), m.domain, &opts),
        m.domain,
    )
}

fn find_point<'a>(
    locus: &'a SingularLocus,
    domain: Domain,
    b: &[f64],
    z: f64,
    tol: f64,
) -> &'a CriticalPoint {
    locus
        .points
        .iter()
        .find(|p| point_distance(domain, &p.b, p.z, b, z) < tol)
        .unwrap_or_else(|| panic!("no critical point near ({b:?}, {z})"))
}

#[test]
fn criterion_01_gyroid_exact_coefficients() {
    let (m, cp) = gyroid();
    let n = 3;
    let t = Backend::Torus;
    assert!(cp.coeffs[3].is_zero());
    assert_eq!(cp.coeffs[2], TrigPoly::from_int(n, t, -6));
    let a1 = TrigPoly::two_cos(n, vec![1, 0, 0])
        .add(&TrigPoly::two_cos(n, vec![0, 1, 0]))
        .unwrap()
        .add(&TrigPoly::two_cos(n, vec![0, 0, 1]))
        .unwrap()
        .add(&TrigPoly::two_cos(n, vec![1, 1, 1]))
        .unwrap()
        .neg();
    assert_eq!(cp.coeffs[1], a1);
    let a0 = TrigPoly::from_int(n, t, 3)
        .sub(&TrigPoly::two_cos(n, vec![1, 1, 0]))
        .unwrap()
        .sub(&TrigPoly::two_cos(n, vec![0, 1, 1]))
        .unwrap()
        .sub(&TrigPoly::two_cos(n, vec![1, 0, 1]))
        .unwrap();
    assert_eq!(cp.coeffs[0], a0);
    let ce = cycle_expansion(m.graph.as_ref().unwrap()).unwrap();
    assert_eq!(cp, ce, "cycle expansion must agree exactly");
    pass(1, "gyroid exact coefficients");
}

#[test]
fn criterion_02_discriminant_closed_form() {
    // Exact rational comparison: the resultant-based discriminant on the
    // slice (a_2, a_3) = (-6, 0) equals the sextic closed form with global
    // constant exactly 1, so the relative error is identically zero.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let denom = BigInt::from(1i64 << 16);
    for _ in 0..10_000 {
        let mut draw = || {
            let num = BigInt::from(rng.gen_range(-10 * (1i64 << 16)..=10 * (1i64 << 16)));
            BigRational::new(num, denom.clone())
        };
        let a0 = draw();
        let a1 = draw();
        let lambda = vec![
            a0.clone(),
            a1.clone(),
            BigRational::from_integer(BigInt::from(-6)),
        ];
        let resultant = discriminant_exact(&lambda, 4).unwrap();
        let closed = a3_slice_closed_form_exact(&a0, &a1);
        assert_eq!(resultant, closed, "at a0={a0}, a1={a1}");
    }
    pass(2, "discriminant closed form, constant 1, 10^4 exact points");
}

#[test]
fn criterion_03_gyroid_singular_set() {
    let s3 = 3f64.sqrt();
    let q = FRAC_PI_2;
    let expected: [(Vec<f64>, f64, &[usize]); 6] = [
        (vec![0.0, 0.0, 0.0], -1.0, &[2]),
        (vec![PI, PI, PI], 1.0, &[2]),
        (vec![q, q, q], s3, &[1, 1]),
        (vec![q, q, q], -s3, &[1, 1]),
        (vec![3.0 * q, 3.0 * q, 3.0 * q], s3, &[1, 1]),
        (vec![3.0 * q, 3.0 * q, 3.0 * q], -s3, &[1, 1]),
    ];
    for grid in [8, 16] {
        let (locus, domain) = locus("gyroid", grid);
        assert_eq!(locus.points.len(), 6, "grid {grid}: no other points");
        for (b, z, parts) in &expected {
            let p = find_point(&locus, domain, b, *z, 1e-8);
            assert!(point_distance(domain, &p.b, p.z, b, *z) < 1e-8);
            assert_eq!(p.stratum, Stratum::new(parts.to_vec()), "at ({b:?}, {z})");
        }
    }
    pass(3, "gyroid singular set at G=8 and G=16");
}

#[test]
fn criterion_04_gyroid_hessians() {
    let (locus, domain) = locus("gyroid", 8);
    let s3 = 3f64.sqrt();
    let q = FRAC_PI_2;
    let dirac = find_point(&locus, domain, &[q, q, q], s3, 1e-8);
    let expect = [
        [-4.0, -2.0, -2.0, 0.0],
        [-2.0, -4.0, -2.0, 0.0],
        [-2.0, -2.0, -4.0, 0.0],
        // z-row: P_zz = 12 z^2 - 12 = 24 at z = ±√3, mixed entries vanish.
        [0.0, 0.0, 0.0, 24.0],
    ];
    for i in 0..4 {
        for j in 0..4 {
            assert!(
                (dirac.hessian[i][j] - expect[i][j]).abs() < 1e-8,
                "H[{i}][{j}] = {} vs {}",
                dirac.hessian[i][j],
                expect[i][j]
            );
        }
    }
    assert_eq!(dirac.classification, Classification::Dirac);
    assert!(dirac.tilt_free);
    assert_eq!(
        (dirac.signature.minus, dirac.signature.zero, dirac.signature.plus),
        (3, 0, 1)
    );
    for (b, z) in [(vec![0.0, 0.0, 0.0], -1.0), (vec![PI, PI, PI], 1.0)] {
        let p = find_point(&locus, domain, &b, z, 1e-8);
        for row in &p.hessian {
            for &v in row {
                assert!(v.abs() < 1e-8, "A_2 Hessian entry {v} not zero");
            }
        }
    }
    pass(4, "gyroid Dirac and A_2 Hessians");
}

#[test]
fn criterion_05_honeycomb_dirac() {
    let (locus, domain) = locus("honeycomb", 8);
    assert_eq!(locus.points.len(), 2);
    let t = 2.0 * PI / 3.0;
    for b in [[t, TAU - t], [TAU - t, t]] {
        let p = find_point(&locus, domain, &b, 0.0, 1e-8);
        assert_eq!(p.classification, Classification::Dirac);
        assert_eq!(
            (p.signature.minus, p.signature.zero, p.signature.plus),
            (2, 0, 1)
        );
    }
    pass(5, "honeycomb Dirac pair");
}

#[test]
fn criterion_06_diamond_circles() {
    let (locus, _) = locus("diamond", 8);
    assert!(!locus.points.is_empty());
    let d_s1 = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    };
    for p in &locus.points {
        assert_eq!(p.locus_dim_estimate, 1, "dimension at {:?}", p.b);
        let u = &p.b;
        let on_circle = [(0, 1, 2), (1, 0, 2), (2, 0, 1)].iter().any(|&(i, j, k)| {
            d_s1(u[i], PI).max(d_s1(u[j], u[k] + PI)) <= 1e-6
        });
        assert!(on_circle, "off-circle locus point {u:?}");
    }
    assert!(locus.dirac_points().is_empty());
    pass(6, "diamond dimension-1 locus, no Dirac points");
}

#[test]
fn criterion_07_triangle() {
    let (locus, domain) = locus("triangle", 16);
    assert_eq!(locus.points.len(), 2);
    for (b, z) in [(vec![0.0], -1.0), (vec![PI], 1.0)] {
        let p = find_point(&locus, domain, &b, z, 1e-8);
        assert_eq!(p.classification, Classification::Dirac);
        let h = &p.hessian;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        assert!((det - (-12.0)).abs() < 1e-9, "det Hess = {det}");
        assert_eq!(
            (p.signature.minus, p.signature.zero, p.signature.plus),
            (1, 0, 1)
        );
    }
    pass(7, "triangle single bond");
}

#[test]
fn criterion_08_triangle_double_bond() {
    let (locus, domain) = locus("triangle_ab", 16);
    let third = PI / 3.0;
    let cases = [
        (vec![third, TAU - third], -1.0, (1usize, 0usize, 2usize)),
        (vec![2.0 * third, TAU - 2.0 * third], 1.0, (2, 0, 1)),
    ];
    for (b, z, sig) in &cases {
        let p = find_point(&locus, domain, b, *z, 1e-7);
        assert_eq!(p.classification, Classification::Dirac);
        assert_eq!(
            (p.signature.minus, p.signature.zero, p.signature.plus),
            *sig
        );
        assert!(!p.tilt_free, "cone at {b:?} must be tilted");
    }
    // Exactly two solutions up to the b -> -b spectral symmetry: every
    // located point is one of the pair above or its mirror image.
    for p in &locus.points {
        let near = cases.iter().any(|(b, z, _)| {
            let mirror: Vec<f64> = b.iter().map(|x| TAU - x).collect();
            point_distance(domain, &p.b, p.z, b, *z) < 1e-7
                || point_distance(domain, &p.b, p.z, &mirror, *z) < 1e-7
        });
        assert!(near, "extra critical point {:?}", p.b);
    }
    assert_eq!(locus.points.len(), 4, "{:#?}", locus.points);
    pass(8, "triangle double bond: tilted Dirac pair (and mirrors)");
}

#[test]
fn criterion_09_p_lattice_and_vnw() {
    let (empty, _) = locus("p_lattice", 6);
    assert!(empty.is_empty());

    let (v3, d3) = locus("vnw3", 5);
    assert_eq!(v3.points.len(), 1);
    let p = find_point(&v3, d3, &[0.0, 0.0, 0.0], 0.0, 1e-8);
    assert_eq!(p.classification, Classification::Dirac);
    assert_eq!(
        (p.signature.minus, p.signature.zero, p.signature.plus),
        (3, 0, 1)
    );

    let (v4, _) = locus("vnw4", 5);
    assert!(!v4.is_empty());
    for p in &v4.points {
        assert!(p.b[0].abs() < 1e-7 && p.b[1].abs() < 1e-7 && p.b[2].abs() < 1e-7);
        assert!((p.b[3] - p.z).abs() < 1e-7, "locus must follow z = d");
        assert_eq!(p.locus_dim_estimate, 1);
    }
    pass(9, "p_lattice empty; vnw3 single cone; vnw4 line of cones");
}

#[test]
fn criterion_10_region_containment() {
    for name in MODEL_NAMES {
        let m = builtin_model(name).unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let grid = match cp.n {
            0 | 1 => 128,
            2 => 48,
            3 => 24,
            _ => 10,
        };
        let (_, _, disc_min, scale) = scan_ranges(&xi, cp.k, m.domain, grid);
        assert!(
            disc_min >= -1e-9 * scale,
            "{name}: min disc {disc_min} below -1e-9 * {scale}"
        );
    }
    // Gyroid slice coordinate is exactly -6 on every sample.
    let (m, cp) = gyroid();
    let xi = cp.characteristic_map();
    let data = sample_region(
        &xi,
        cp.k,
        m.domain,
        &RegionOptions {
            grid: 16,
            ..RegionOptions::default()
        },
    );
    for s in &data.samples {
        assert_eq!(s.xi[2], -6.0);
    }
    // Honeycomb and diamond intervals at G = 200.
    for (name, lo) in [("honeycomb", -9.0), ("diamond", -16.0)] {
        let m = builtin_model(name).unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let (xi_min, xi_max, _, _) = scan_ranges(&xi, cp.k, m.domain, 200);
        assert!((xi_min[0] - lo).abs() <= 1e-6, "{name} min {}", xi_min[0]);
        assert!(xi_max[0].abs() <= 1e-6, "{name} max {}", xi_max[0]);
    }
    pass(10, "region containment and intervals");
}

#[test]
fn criterion_11_diagonal_spectrum() {
    let (m, cp) = gyroid();
    let bands = bands_along_path(&cp, Some(&m.family), &[0.0; 3], &[TAU; 3], 100);
    assert_eq!(bands.len(), 100);
    for (b, vals) in &bands {
        let mut expect = gyroid_diagonal_closed_form(b[0]);
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut got = vals.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got.len(), 4);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-9, "band {g} vs closed form {e} at {b:?}");
        }
    }
    pass(11, "gyroid diagonal bands vs closed forms");
}

#[test]
fn criterion_12_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_000C);
    for name in MODEL_NAMES {
        let m = builtin_model(name).unwrap();
        let cp = char_poly(&m.family).unwrap();
        let dd = cp.derivative_data();
        let n = cp.n;
        let random_b = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| match m.domain {
                    Domain::Torus => rng.gen_range(0.0..TAU),
                    Domain::Box { half_width } => rng.gen_range(-half_width..half_width),
                })
                .collect()
        };
        // Analytic gradient and Hessian vs central finite differences.
        let h = 1e-5;
        for _ in 0..100 {
            let b = random_b(&mut rng);
            let z = rng.gen_range(-3.0..3.0);
            let grad = dd.eval_grad(&b, z);
            let hess = dd.eval_hessian(&b, z);
            let eval = |b: &[f64], z: f64| dd.eval_p(b, z);
            let fd_partial = |axis: usize, b: &[f64], z: f64| -> f64 {
                if axis == n {
                    (eval(b, z + h) - eval(b, z - h)) / (2.0 * h)
                } else {
                    let mut bp = b.to_vec();
                    let mut bm = b.to_vec();
                    bp[axis] += h;
                    bm[axis] -= h;
                    (eval(&bp, z) - eval(&bm, z)) / (2.0 * h)
                }
            };
            for i in 0..=n {
                let fd = fd_partial(i, &b, z);
                let scale = 1.0 + grad[i].abs().max(fd.abs());
                assert!(
                    (grad[i] - fd).abs() / scale <= 1e-6,
                    "{name}: grad[{i}] {} vs fd {}",
                    grad[i],
                    fd
                );
                for j in 0..=n {
                    // FD of the analytic j-th partial along axis i.
                    let fd2 = if i == n {
                        (dd.eval_grad(&b, z + h)[j] - dd.eval_grad(&b, z - h)[j]) / (2.0 * h)
                    } else {
                        let mut bp = b.to_vec();
                        let mut bm = b.to_vec();
                        bp[i] += h;
                        bm[i] -= h;
                        (dd.eval_grad(&bp, z)[j] - dd.eval_grad(&bm, z)[j]) / (2.0 * h)
                    };
                    let scale = 1.0 + hess[(i, j)].abs().max(fd2.abs());
                    assert!(
                        (hess[(i, j)] - fd2).abs() / scale <= 1e-5,
                        "{name}: hess[{i}][{j}] {} vs fd {}",
                        hess[(i, j)],
                        fd2
                    );
                }
            }
        }
        // Hermitian eigenvalues (independent nalgebra oracle on the real
        // symmetric embedding) vs roots of P(b, ·).
        for _ in 0..200 {
            let b = random_b(&mut rng);
            let hm = m.family.evaluate(&b);
            let k = cp.k;
            let mut emb = DMatrix::<f64>::zeros(2 * k, 2 * k);
            for i in 0..k {
                for j in 0..k {
                    let v = hm[(i, j)];
                    emb[(i, j)] = v.re;
                    emb[(i + k, j + k)] = v.re;
                    emb[(i + k, j)] = v.im;
                    emb[(i, j + k)] = -v.im;
                }
            }
            let mut eigs: Vec<f64> = emb.symmetric_eigen().eigenvalues.iter().cloned().collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let eigs: Vec<f64> = eigs.into_iter().step_by(2).collect();
            let coeffs: Vec<f64> = cp
                .coeffs
                .iter()
                .map(|c| c.evaluate_real(&b).unwrap())
                .collect();
            let mut roots: Vec<f64> = swallowtail::singularity::companion_roots(&coeffs)
                .iter()
                .map(|r| r.re)
                .collect();
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(roots.len(), eigs.len());
            for (r, e) in roots.iter().zip(&eigs) {
                assert!(
                    (r - e).abs() <= 1e-8,
                    "{name}: root {r} vs eigenvalue {e} at {b:?}"
                );
            }
        }
    }
    // Exercised indirectly above; keep the exact coefficient path honest too.
    let one = GaussRat::one();
    assert!(one.is_real());
    pass(12, "finite-difference and eigensolver oracles");
}
