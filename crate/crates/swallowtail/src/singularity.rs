//! Discriminant and stratum machinery for the miniversal unfolding of
//! A_{k-1}: F(a, z) = z^k + a_{k-2} z^{k-2} + ... + a_0 over Λ = R^{k-1}.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SingularityError {
    #[error("discriminant requires k >= 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("unfolding point has {0} coefficients, expected {1}")]
    BadLength(usize, usize),
    #[error("polynomial has a root with imaginary part {0:e}; not a Hermitian fiber")]
    ComplexRoots(f64),
}

/// A point of the unfolding base: (a_0, ..., a_{k-2}).
#[derive(Clone, Debug, PartialEq)]
pub struct UnfoldingPoint {
    pub lambda: Vec<f64>,
}

impl UnfoldingPoint {
    pub fn new(lambda: Vec<f64>) -> Self {
        UnfoldingPoint { lambda }
    }
}

/// Degeneracy type of a fiber: a multiset (A_{n_1}, ..., A_{n_l}).
/// The empty multiset is a nonsingular fiber.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub struct Stratum {
    /// Sorted descending.
    pub parts: Vec<usize>,
}

impl Stratum {
    pub fn new(mut parts: Vec<usize>) -> Self {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Stratum { parts }
    }

    pub fn empty() -> Self {
        Stratum { parts: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn label(&self) -> String {
        if self.parts.is_empty() {
            "nonsingular".to_string()
        } else {
            format!(
                "({})",
                self.parts
                    .iter()
                    .map(|n| format!("A{n}"))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
    }
}

/// Grothendieck constraint: Σ n_i ≤ k - l for l parts.
pub fn grothendieck_valid(s: &Stratum, k: usize) -> bool {
    let l = s.parts.len();
    let sum: usize = s.parts.iter().sum();
    sum + l <= k && s.parts.iter().all(|&n| n <= k - 1)
}

/// Monic coefficient vector of F: z^k + a_{k-2} z^{k-2} + ... + a_0,
/// lowest degree first, length k+1.
fn monic_coeffs(lambda: &[f64], k: usize) -> Result<Vec<f64>, SingularityError> {
    if k < 2 {
        return Err(SingularityError::DegreeTooSmall(k));
    }
    if lambda.len() != k - 1 {
        return Err(SingularityError::BadLength(lambda.len(), k - 1));
    }
    let mut c = vec![0.0; k + 1];
    c[..(k - 1)].copy_from_slice(lambda);
    c[k] = 1.0;
    Ok(c)
}

/// Sylvester matrix of (f, g) given coefficient vectors lowest-first.
fn sylvester<T: Clone + Zero>(f: &[T], g: &[T]) -> Vec<Vec<T>> {
    let m = f.len() - 1; // deg f
    let n = g.len() - 1; // deg g
    let size = m + n;
    let mut mat = vec![vec![T::zero(); size]; size];
    for row in 0..n {
        for (i, c) in f.iter().rev().enumerate() {
            mat[row][row + i] = c.clone();
        }
    }
    for row in 0..m {
        for (i, c) in g.iter().rev().enumerate() {
            mat[n + row][row + i] = c.clone();
        }
    }
    mat
}

fn disc_sign(k: usize) -> f64 {
    if (k * (k - 1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// disc(F) = (-1)^{k(k-1)/2} Res(F, F') for the monic unfolding polynomial;
/// nonnegative exactly when all roots are real. Float LU path.
pub fn discriminant(point: &UnfoldingPoint, k: usize) -> Result<f64, SingularityError> {
    let f = monic_coeffs(&point.lambda, k)?;
    let df: Vec<f64> = f
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, c)| d as f64 * c)
        .collect();
    let syl = sylvester(&f, &df);
    let size = syl.len();
    let mat = DMatrix::from_fn(size, size, |i, j| syl[i][j]);
    let res = mat.lu().determinant();
    Ok(disc_sign(k) * res)
}

/// Exact-rational discriminant of the same polynomial; used where the inputs
/// are exactly representable and the answer must carry no rounding.
pub fn discriminant_exact(lambda: &[BigRational], k: usize) -> Result<BigRational, SingularityError> {
    if k < 2 {
        return Err(SingularityError::DegreeTooSmall(k));
    }
    if lambda.len() != k - 1 {
        return Err(SingularityError::BadLength(lambda.len(), k - 1));
    }
    let mut f = vec![BigRational::zero(); k + 1];
    f[..(k - 1)].clone_from_slice(lambda);
    f[k] = BigRational::one();
    let df: Vec<BigRational> = f
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, c)| BigRational::from_integer(BigInt::from(d)) * c)
        .collect();
    let mut mat = sylvester(&f, &df);
    let size = mat.len();
    // Rational Gaussian elimination with partial (nonzero) pivoting.
    let mut det = BigRational::one();
    for col in 0..size {
        let pivot_row = (col..size).find(|&r| !mat[r][col].is_zero());
        let Some(pr) = pivot_row else {
            return Ok(BigRational::zero());
        };
        if pr != col {
            mat.swap(pr, col);
            det = -det;
        }
        let pivot = mat[col][col].clone();
        det *= &pivot;
        for r in (col + 1)..size {
            if mat[r][col].is_zero() {
                continue;
            }
            let factor = &mat[r][col] / &pivot;
            for c in col..size {
                let sub = &factor * &mat[col][c];
                mat[r][c] -= sub;
            }
        }
    }
    let sign = if (k * (k - 1) / 2) % 2 == 0 {
        BigRational::one()
    } else {
        -BigRational::one()
    };
    Ok(sign * det)
}

/// The displayed sextic for the k = 4 slice a_2 = -6, a_3 = 0:
/// `20736 a0 - 4608 a0² + 256 a0³ + 864 a1² - 864 a0 a1² - 27 a1⁴`.
pub fn a3_slice_closed_form(a0: f64, a1: f64) -> f64 {
    20736.0 * a0 - 4608.0 * a0 * a0 + 256.0 * a0.powi(3) + 864.0 * a1 * a1
        - 864.0 * a0 * a1 * a1
        - 27.0 * a1.powi(4)
}

/// Exact-rational version of [`a3_slice_closed_form`].
pub fn a3_slice_closed_form_exact(a0: &BigRational, a1: &BigRational) -> BigRational {
    let int = |v: i64| BigRational::from_integer(BigInt::from(v));
    let a0_2 = a0 * a0;
    let a1_2 = a1 * a1;
    int(20736) * a0 - int(4608) * &a0_2 + int(256) * &a0_2 * a0 + int(864) * &a1_2
        - int(864) * a0 * &a1_2
        - int(27) * &a1_2 * &a1_2
}

/// All roots of the monic polynomial via companion-matrix eigenvalues.
/// Coefficients lowest-first, leading 1 omitted from `c` (length = degree).
pub fn companion_roots(c: &[f64]) -> Vec<num_complex::Complex64> {
    let k = c.len();
    if k == 0 {
        return Vec::new();
    }
    let mat = DMatrix::from_fn(k, k, |i, j| {
        if j == k - 1 {
            -c[i]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    // Bounded Schur: the unshifted QR in `complex_eigenvalues` can cycle
    // forever on companion matrices with symmetric root patterns.
    if let Some(schur) = nalgebra::linalg::Schur::try_new(mat, f64::EPSILON, 500) {
        return schur.complex_eigenvalues().iter().cloned().collect();
    }
    durand_kerner(c)
}

/// Durand–Kerner simultaneous iteration; fallback when Schur stalls. Seeds on
/// a circle of the Cauchy root bound at an angle avoiding the real axis.
fn durand_kerner(c: &[f64]) -> Vec<num_complex::Complex64> {
    use num_complex::Complex64;
    let k = c.len();
    let bound = 1.0 + c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..k).map(|i| bound * seed.powu(i as u32 + 1)).collect();
    let eval = |z: Complex64| {
        let mut acc = Complex64::new(1.0, 0.0);
        for ci in c.iter().rev() {
            acc = acc * z + ci;
        }
        acc
    };
    for _ in 0..200 {
        let mut delta: f64 = 0.0;
        for i in 0..k {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..k {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 * bound {
            break;
        }
    }
    roots
}

/// Real roots of F at an unfolding point; errors when a root has an
/// imaginary part beyond `tol` (outside the characteristic region).
pub fn real_roots(point: &UnfoldingPoint, k: usize, tol: f64) -> Result<Vec<f64>, SingularityError> {
    let f = monic_coeffs(&point.lambda, k)?;
    let mut roots = companion_roots(&f[..k]);
    let scale = 1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    // A multiple root of multiplicity m scatters into a cluster with radius
    // ~ε^(1/m) (conjugate pairs included), but the cluster mean is accurate
    // to ~ε: replace chained clusters by their means before the reality test.
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let radius = 5e-4 * scale;
    let mut assigned = vec![false; roots.len()];
    let mut out = Vec::with_capacity(k);
    for i in 0..roots.len() {
        if assigned[i] {
            continue;
        }
        let mut cluster = vec![i];
        assigned[i] = true;
        let mut cursor = 0;
        while cursor < cluster.len() {
            let c = roots[cluster[cursor]];
            for (j, r) in roots.iter().enumerate() {
                if !assigned[j] && (r - c).norm() <= radius {
                    assigned[j] = true;
                    cluster.push(j);
                }
            }
            cursor += 1;
        }
        let mean = cluster.iter().map(|&j| roots[j]).sum::<num_complex::Complex64>()
            / cluster.len() as f64;
        if mean.im.abs() > tol * scale {
            return Err(SingularityError::ComplexRoots(mean.im));
        }
        out.extend(std::iter::repeat(mean.re).take(cluster.len()));
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Cluster sorted real roots within a scale-aware tolerance; each cluster of
/// size m ≥ 2 contributes A_{m-1}.
pub fn stratum_from_roots(roots: &[f64], tol: f64) -> (Stratum, Vec<Vec<f64>>) {
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = 1.0 + sorted.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let eff = tol * scale;
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for &r in &sorted {
        match clusters.last_mut() {
            Some(c) if (r - *c.last().unwrap()).abs() <= eff => c.push(r),
            _ => clusters.push(vec![r]),
        }
    }
    let parts: Vec<usize> = clusters
        .iter()
        .filter(|c| c.len() >= 2)
        .map(|c| c.len() - 1)
        .collect();
    (Stratum::new(parts), clusters)
}

pub const DEFAULT_ROOT_CLUSTER_TOL: f64 = 1e-6;

/// Stratum of the fiber over an unfolding point, using companion-matrix
/// roots (the route for bare Λ points; fibers with a known Hamiltonian use
/// its eigenvalues instead via [`stratum_from_roots`]).
pub fn stratum_of(
    point: &UnfoldingPoint,
    k: usize,
    tol: f64,
) -> Result<(Stratum, Vec<Vec<f64>>), SingularityError> {
    let roots = real_roots(point, k, 1e-6)?;
    Ok(stratum_from_roots(&roots, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    #[test]
    fn quadratic_discriminant() {
        // disc(z^2 + a0) = -4 a0
        let d0 = discriminant(&UnfoldingPoint::new(vec![0.0]), 2).unwrap();
        assert!(d0.abs() < 1e-12);
        let d1 = discriminant(&UnfoldingPoint::new(vec![-1.0]), 2).unwrap();
        assert!((d1 - 4.0).abs() < 1e-12);
        assert_eq!(discriminant_exact(&[rat(-1)], 2).unwrap(), rat(4));
    }

    #[test]
    fn degree_too_small() {
        assert!(discriminant(&UnfoldingPoint::new(vec![]), 1).is_err());
    }

    #[test]
    fn gyroid_cusp_and_double_point_lie_on_discriminant() {
        // (z-3)(z+1)^3 = z^4 - 6z^2 - 8z - 3: triple root at -1.
        let d = discriminant(&UnfoldingPoint::new(vec![-3.0, -8.0, -6.0]), 4).unwrap();
        assert!(d.abs() < 1e-6, "got {d}");
        assert!(discriminant_exact(&[rat(-3), rat(-8), rat(-6)], 4)
            .unwrap()
            .is_zero());
        // (z^2-3)^2 = z^4 - 6 z^2 + 9: double roots ±√3.
        assert!(discriminant_exact(&[rat(9), rat(0), rat(-6)], 4)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn slice_closed_form_values() {
        assert_eq!(a3_slice_closed_form(9.0, 0.0), 0.0);
        assert!(a3_slice_closed_form(-3.0, -8.0).abs() < 1e-6);
        assert_eq!(a3_slice_closed_form(0.0, 0.0), 0.0);
        assert!(a3_slice_closed_form_exact(&rat(-3), &rat(-8)).is_zero());
    }

    #[test]
    fn closed_form_equals_resultant_on_slice() {
        // Normalization constant between the two routes is exactly 1.
        for (a0, a1) in [(2, 3), (-5, 1), (7, -4), (0, 0), (9, 0)] {
            let lhs = discriminant_exact(&[rat(a0), rat(a1), rat(-6)], 4).unwrap();
            let rhs = a3_slice_closed_form_exact(&rat(a0), &rat(a1));
            assert_eq!(lhs, rhs, "mismatch at ({a0},{a1})");
        }
    }

    #[test]
    fn strata_of_gyroid_fibers() {
        let (s, _) = stratum_of(&UnfoldingPoint::new(vec![-3.0, -8.0, -6.0]), 4, 1e-6).unwrap();
        assert_eq!(s, Stratum::new(vec![2]));
        let (s, clusters) =
            stratum_of(&UnfoldingPoint::new(vec![9.0, 0.0, -6.0]), 4, 1e-6).unwrap();
        assert_eq!(s, Stratum::new(vec![1, 1]));
        assert_eq!(clusters.len(), 2);
        let (s, _) = stratum_of(&UnfoldingPoint::new(vec![1.0, 0.0, -6.0]), 4, 1e-6).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn grothendieck_bounds() {
        assert!(grothendieck_valid(&Stratum::new(vec![2]), 4));
        assert!(grothendieck_valid(&Stratum::new(vec![1, 1]), 4));
        assert!(!grothendieck_valid(&Stratum::new(vec![3]), 3));
    }

    #[test]
    fn complex_roots_rejected() {
        // z^2 + 1 has roots ±i.
        let err = real_roots(&UnfoldingPoint::new(vec![1.0]), 2, 1e-8);
        assert!(matches!(err, Err(SingularityError::ComplexRoots(_))));
    }

    #[test]
    fn stratum_labels() {
        assert_eq!(Stratum::empty().label(), "nonsingular");
        assert_eq!(Stratum::new(vec![1, 2]).label(), "(A2,A1)");
    }
}
