//! Hessian signature analysis and the Dirac-point decision at critical
//! points, plus the gyroid diagonal-spectrum cross check.

use crate::charpoly::{CharPolyFamily, DerivativeData};
use crate::singularity::{stratum_from_roots, Stratum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Relative zero-eigenvalue tolerance for the signature, with an absolute
/// floor for near-zero matrices.
pub const SIGNATURE_REL_TOL: f64 = 1e-7;
pub const SIGNATURE_ABS_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "dirac")]
    Dirac,
    #[serde(rename = "morse-other")]
    MorseOther,
    #[serde(rename = "degenerate")]
    Degenerate,
}

/// Inertia counts (n_minus, n_zero, n_plus).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub minus: usize,
    pub zero: usize,
    pub plus: usize,
}

/// Cyclic Jacobi eigensolver for real symmetric matrices: returns the
/// eigenvalues (ascending) and the orthogonal eigenvector matrix Q with
/// A = Q diag(λ) Qᵀ.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * (1.0 + m.norm()) {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m[(p, r)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(r, r)];
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root of t^2 + 2 t theta - 1 = 0.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for idx in 0..n {
                    let mip = m[(idx, p)];
                    let miq = m[(idx, r)];
                    m[(idx, p)] = c * mip - s * miq;
                    m[(idx, r)] = s * mip + c * miq;
                }
                for idx in 0..n {
                    let mpi = m[(p, idx)];
                    let mqi = m[(r, idx)];
                    m[(p, idx)] = c * mpi - s * mqi;
                    m[(r, idx)] = s * mpi + c * mqi;
                }
                for idx in 0..n {
                    let qip = q[(idx, p)];
                    let qiq = q[(idx, r)];
                    q[(idx, p)] = c * qip - s * qiq;
                    q[(idx, r)] = s * qip + c * qiq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[(i, i)], i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut qs = DMatrix::zeros(n, n);
    for (newcol, (_, oldcol)) in pairs.iter().enumerate() {
        for i in 0..n {
            qs[(i, newcol)] = q[(i, *oldcol)];
        }
    }
    (vals, qs)
}

/// Eigenvalues of a complex Hermitian matrix via the real symmetric
/// embedding [[X, -Y], [Y, X]] of H = X + iY, whose spectrum is that of H
/// doubled. Hermitian eigenvalues are perfectly conditioned, which keeps
/// multiple roots tight where companion matrices scatter them.
pub fn hermitian_eigenvalues(h: &DMatrix<num_complex::Complex64>) -> Vec<f64> {
    let k = h.nrows();
    assert_eq!(k, h.ncols());
    let mut m = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let v = h[(i, j)];
            m[(i, j)] = v.re;
            m[(i + k, j + k)] = v.re;
            m[(i + k, j)] = v.im;
            m[(i, j + k)] = -v.im;
        }
    }
    let (vals, _) = jacobi_eigen(&m);
    // Doubled spectrum, already ascending: take every other entry.
    vals.into_iter().step_by(2).collect()
}

/// Hermitian eigen-decomposition: ascending eigenvalues with an orthonormal
/// complex eigenvector per column. The embedding doubles every eigenvalue
/// (the pair spans {v, iv}), so complex Gram–Schmidt over the mapped real
/// eigenvectors keeps exactly one representative each.
pub fn hermitian_eigen(
    h: &DMatrix<num_complex::Complex64>,
) -> (Vec<f64>, DMatrix<num_complex::Complex64>) {
    use num_complex::Complex64;
    let k = h.nrows();
    assert_eq!(k, h.ncols());
    let mut m = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let v = h[(i, j)];
            m[(i, j)] = v.re;
            m[(i + k, j + k)] = v.re;
            m[(i + k, j)] = v.im;
            m[(i, j + k)] = -v.im;
        }
    }
    let (vals, q) = jacobi_eigen(&m);
    let mut out_vals = Vec::with_capacity(k);
    let mut vecs: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    for col in 0..2 * k {
        if vecs.len() == k {
            break;
        }
        // Map [x; y] to x + iy and orthogonalize against everything kept.
        let mut w: Vec<Complex64> = (0..k)
            .map(|i| Complex64::new(q[(i, col)], q[(i + k, col)]))
            .collect();
        for kept in &vecs {
            let dot: Complex64 = kept.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (wi, ki) in w.iter_mut().zip(kept) {
                *wi -= dot * ki;
            }
        }
        let norm: f64 = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for v in &mut w {
                *v /= norm;
            }
            out_vals.push(vals[col]);
            vecs.push(w);
        }
    }
    let mat = DMatrix::from_fn(k, vecs.len(), |i, j| vecs[j][i]);
    (out_vals, mat)
}

/// Signature of a symmetric matrix: eigenvalue counts below / within /
/// above the zero band `±max(tol·max|λ|, floor)`.
pub fn signature(a: &DMatrix<f64>, tol: f64) -> Signature {
    let (vals, _) = jacobi_eigen(a);
    let max_abs = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let band = (tol * max_abs).max(SIGNATURE_ABS_FLOOR);
    let mut sig = Signature {
        minus: 0,
        zero: 0,
        plus: 0,
    };
    for v in vals {
        if v < -band {
            sig.minus += 1;
        } else if v > band {
            sig.plus += 1;
        } else {
            sig.zero += 1;
        }
    }
    sig
}

/// Analytic Hessian of P at (b, z), symmetrized.
pub fn hessian_at(dd: &DerivativeData, b: &[f64], z: f64) -> DMatrix<f64> {
    dd.eval_hessian(b, z)
}

pub struct ClassifyOutcome {
    pub classification: Classification,
    pub signature: Signature,
    pub tilt_free: bool,
    pub stratum: Stratum,
    pub fiber_roots: Vec<f64>,
}

/// Classify a critical point of P from its Hessian and the fiber roots over
/// its base point. Dirac iff the Hessian is nondegenerate with inertia
/// (n,0,1) or (1,0,n); the untilted-cone condition is reported separately.
pub fn classify(
    dd: &DerivativeData,
    b: &[f64],
    z: f64,
    fiber_roots: &[f64],
    root_tol: f64,
    tilt_tol: f64,
) -> ClassifyOutcome {
    let n = dd.n;
    let hess = hessian_at(dd, b, z);
    let sig = signature(&hess, SIGNATURE_REL_TOL);
    let (stratum, _) = stratum_from_roots(fiber_roots, root_tol);
    let classification = if sig.zero == 0 {
        if (sig.minus == n && sig.plus == 1) || (sig.minus == 1 && sig.plus == n) {
            Classification::Dirac
        } else {
            Classification::MorseOther
        }
    } else {
        Classification::Degenerate
    };
    let tilt_free = (0..n).all(|i| hess[(i, n)].abs() <= tilt_tol);
    ClassifyOutcome {
        classification,
        signature: sig,
        tilt_free,
        stratum,
        fiber_roots: fiber_roots.to_vec(),
    }
}

/// Closed-form gyroid bands along the diagonal a = b = c:
/// λ1 = 2cos(a + 2π/3), λ2 = 2cos(a - 2π/3), λ3,4 = cos a ∓ √(cos²a + 3).
pub fn gyroid_diagonal_closed_form(a: f64) -> [f64; 4] {
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let c = a.cos();
    let s = (c * c + 3.0).sqrt();
    [2.0 * (a + third).cos(), 2.0 * (a - third).cos(), c - s, c + s]
}

/// Numeric bands of a family along a straight path in the base, each row the
/// sorted roots of P(b, ·). With the Hamiltonian at hand the roots come from
/// Hermitian eigenvalues, which stay accurate through band crossings where
/// companion matrices lose ~ε^(1/3).
pub fn bands_along_path(
    cp: &CharPolyFamily,
    family: Option<&crate::graph::HamiltonianFamily>,
    start: &[f64],
    end: &[f64],
    samples: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::with_capacity(samples);
    for s in 0..samples {
        let t = if samples <= 1 {
            0.0
        } else {
            s as f64 / (samples - 1) as f64
        };
        let b: Vec<f64> = start
            .iter()
            .zip(end)
            .map(|(a, z)| a + t * (z - a))
            .collect();
        let mut roots: Vec<f64> = match family {
            Some(f) => hermitian_eigenvalues(&f.evaluate(&b)),
            None => {
                let coeffs: Vec<f64> = cp
                    .coeffs
                    .iter()
                    .map(|c| c.evaluate_real(&b).expect("real coefficients"))
                    .collect();
                crate::singularity::companion_roots(&coeffs)
                    .iter()
                    .map(|r| r.re)
                    .collect()
            }
        };
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push((b, roots));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charpoly::char_poly;
    use crate::graph::builtin_model;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        0.5 * (&m + m.transpose())
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = random_symmetric(&mut rng, 5);
            let (vals, q) = jacobi_eigen(&a);
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone()));
            let rec = &q * lam * q.transpose();
            let err = (&a - rec).amax();
            assert!(err <= 1e-10 * (1.0 + a.amax()), "reconstruction error {err}");
        }
    }

    #[test]
    fn sylvester_law_of_inertia() {
        // Signature invariant under congruence by well-conditioned matrices.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let a = random_symmetric(&mut rng, 4);
            let s0 = signature(&a, SIGNATURE_REL_TOL);
            if s0.zero != 0 {
                continue; // random matrices should be nonsingular; skip ties
            }
            let mut c = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            for i in 0..4 {
                c[(i, i)] += 3.0; // keep it well conditioned
            }
            let b = c.transpose() * &a * &c;
            let s1 = signature(&b, SIGNATURE_REL_TOL);
            assert_eq!(s0, s1);
            checked += 1;
        }
    }

    #[test]
    fn zero_matrix_signature() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let s = signature(&z, SIGNATURE_REL_TOL);
        assert_eq!((s.minus, s.zero, s.plus), (0, 4, 0));
    }

    #[test]
    fn gyroid_dirac_hessian() {
        let cp = char_poly(&builtin_model("gyroid").unwrap().family).unwrap();
        let dd = cp.derivative_data();
        let h = std::f64::consts::FRAC_PI_2;
        let z = 3f64.sqrt();
        let hess = hessian_at(&dd, &[h, h, h], z);
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                -4.0, -2.0, -2.0, 0.0, //
                -2.0, -4.0, -2.0, 0.0, //
                -2.0, -2.0, -4.0, 0.0, //
                0.0, 0.0, 0.0, 24.0,
            ],
        );
        assert!((hess - expect).amax() < 1e-8);
    }

    #[test]
    fn gyroid_cusp_hessian_vanishes() {
        let cp = char_poly(&builtin_model("gyroid").unwrap().family).unwrap();
        let dd = cp.derivative_data();
        let hess = hessian_at(&dd, &[0.0, 0.0, 0.0], -1.0);
        assert!(hess.amax() < 1e-10);
    }

    #[test]
    fn triangle_hessian_and_classification() {
        let cp = char_poly(&builtin_model("triangle").unwrap().family).unwrap();
        let dd = cp.derivative_data();
        let hess = hessian_at(&dd, &[0.0], -1.0);
        assert!((hess[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((hess[(1, 1)] + 6.0).abs() < 1e-12);
        assert!((hess.determinant() + 12.0).abs() < 1e-9);
        let outcome = classify(&dd, &[0.0], -1.0, &[-1.0, -1.0, 2.0], 1e-6, 1e-8);
        assert_eq!(outcome.classification, Classification::Dirac);
        assert!(outcome.tilt_free);
        assert_eq!(
            (outcome.signature.minus, outcome.signature.zero, outcome.signature.plus),
            (1, 0, 1)
        );
    }

    #[test]
    fn vnw3_origin_is_dirac() {
        let cp = char_poly(&builtin_model("vnw3").unwrap().family).unwrap();
        let dd = cp.derivative_data();
        let outcome = classify(&dd, &[0.0, 0.0, 0.0], 0.0, &[0.0, 0.0], 1e-6, 1e-8);
        assert_eq!(outcome.classification, Classification::Dirac);
        assert_eq!(
            (outcome.signature.minus, outcome.signature.zero, outcome.signature.plus),
            (3, 0, 1)
        );
    }

    #[test]
    fn diagonal_closed_forms_match_numerics() {
        let m = builtin_model("gyroid").unwrap();
        let cp = char_poly(&m.family).unwrap();
        for i in 0..20 {
            let a = i as f64 * 0.33;
            let mut closed = gyroid_diagonal_closed_form(a).to_vec();
            closed.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let bands = bands_along_path(&cp, Some(&m.family), &[a, a, a], &[a, a, a], 1);
            for (c, n) in closed.iter().zip(&bands[0].1) {
                assert!((c - n).abs() < 1e-9, "a={a}: {c} vs {n}");
            }
        }
    }

    #[test]
    fn diagonal_spectrum_special_points() {
        let sort = |mut v: Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let at0 = sort(gyroid_diagonal_closed_form(0.0).to_vec());
        for (x, y) in at0.iter().zip([-1.0, -1.0, -1.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        let s3 = 3f64.sqrt();
        let athalf = sort(gyroid_diagonal_closed_form(std::f64::consts::FRAC_PI_2).to_vec());
        for (x, y) in athalf.iter().zip([-s3, -s3, s3, s3]) {
            assert!((x - y).abs() < 1e-12);
        }
        let atpi = sort(gyroid_diagonal_closed_form(std::f64::consts::PI).to_vec());
        for (x, y) in atpi.iter().zip([-3.0, 1.0, 1.0, 1.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
