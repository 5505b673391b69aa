//! Exact characteristic polynomial families P(b,z) = det(zI - H(b)),
//! the traceless shift, and the characteristic map.
//!
//! P is dense in the z-power and sparse in the base frequencies: a vector of
//! [`TrigPoly`] coefficients indexed by z-degree. Two independent expansions
//! are provided: cofactor expansion of the symbolic determinant and the
//! permutation-cycle formula on the simplified graph.

use crate::graph::{HamiltonianFamily, QuotientGraph};
use crate::rational::GaussRat;
use crate::trigpoly::{Backend, TrigPoly};
use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CharPolyError {
    #[error("Hamiltonian family is not Hermitian")]
    NotHermitian,
    #[error("matrix size {0} exceeds the exact-expansion limit 8")]
    TooLarge(usize),
    #[error("coefficient a_{0} failed the reality check")]
    CoefficientNotReal(usize),
}

/// A polynomial in z with TrigPoly coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct ZPoly {
    pub n: usize,
    pub backend: Backend,
    pub coeffs: Vec<TrigPoly>,
}

impl ZPoly {
    pub fn zero(n: usize, backend: Backend) -> Self {
        ZPoly {
            n,
            backend,
            coeffs: Vec::new(),
        }
    }

    pub fn from_trig(t: TrigPoly) -> Self {
        let (n, backend) = (t.n(), t.backend());
        let mut p = ZPoly {
            n,
            backend,
            coeffs: vec![t],
        };
        p.trim();
        p
    }

    /// `z - t`.
    pub fn z_minus(t: &TrigPoly) -> Self {
        ZPoly {
            n: t.n(),
            backend: t.backend(),
            coeffs: vec![t.neg(), TrigPoly::one(t.n(), t.backend())],
        }
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, deg: usize) -> TrigPoly {
        self.coeffs
            .get(deg)
            .cloned()
            .unwrap_or_else(|| TrigPoly::zero(self.n, self.backend))
    }

    pub fn add(&self, other: &ZPoly) -> ZPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(len);
        for d in 0..len {
            coeffs.push(self.coeff(d).add(&other.coeff(d)).expect("same ring"));
        }
        let mut p = ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs,
        };
        p.trim();
        p
    }

    pub fn neg(&self) -> ZPoly {
        ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn mul(&self, other: &ZPoly) -> ZPoly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return ZPoly::zero(self.n, self.backend);
        }
        let mut coeffs =
            vec![TrigPoly::zero(self.n, self.backend); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j]
                    .add(&a.mul(b).expect("same ring"))
                    .expect("same ring");
            }
        }
        let mut p = ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs,
        };
        p.trim();
        p
    }

    pub fn mul_trig(&self, t: &TrigPoly) -> ZPoly {
        let mut p = ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.mul(t).expect("same ring"))
                .collect(),
        };
        p.trim();
        p
    }

    /// d/dz.
    pub fn derivative_z(&self) -> ZPoly {
        if self.coeffs.len() <= 1 {
            return ZPoly::zero(self.n, self.backend);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(d, c)| c.scale(&GaussRat::from_int(d as i64)))
            .collect();
        let mut p = ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs,
        };
        p.trim();
        p
    }

    /// d/db_axis.
    pub fn derivative_b(&self, axis: usize) -> ZPoly {
        let mut p = ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.partial_derivative(axis))
                .collect(),
        };
        p.trim();
        p
    }

    pub fn evaluate(&self, b: &[f64], z: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c.evaluate(b);
        }
        acc
    }

    pub fn evaluate_real(&self, b: &[f64], z: f64) -> f64 {
        let v = self.evaluate(b, z);
        debug_assert!(v.im.abs() <= 1e-9 * (1.0 + v.re.abs()), "imag residue {}", v.im);
        v.re
    }
}

/// Float-compiled form of a [`ZPoly`] for tight numeric loops: coefficients
/// converted to `Complex64` once.
#[derive(Clone, Debug)]
pub struct CompiledZPoly {
    backend: Backend,
    /// Per z-degree: the (frequency, coefficient) terms.
    zcoeffs: Vec<Vec<(Vec<i64>, Complex64)>>,
}

impl CompiledZPoly {
    pub fn evaluate(&self, b: &[f64], z: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for terms in self.zcoeffs.iter().rev() {
            let mut c = Complex64::new(0.0, 0.0);
            for (m, coeff) in terms {
                let factor = match self.backend {
                    Backend::Torus => {
                        let phase: f64 = m.iter().zip(b).map(|(&mi, &bi)| mi as f64 * bi).sum();
                        Complex64::from_polar(1.0, phase)
                    }
                    Backend::Affine => {
                        let v: f64 = m
                            .iter()
                            .zip(b)
                            .map(|(&mi, &bi)| bi.powi(mi as i32))
                            .product();
                        Complex64::new(v, 0.0)
                    }
                };
                c += coeff * factor;
            }
            acc = acc * z + c;
        }
        acc.re
    }
}

impl ZPoly {
    pub fn compile(&self) -> CompiledZPoly {
        CompiledZPoly {
            backend: self.backend,
            zcoeffs: self
                .coeffs
                .iter()
                .map(|c| {
                    c.terms()
                        .map(|(m, coeff)| (m.clone(), coeff.to_complex()))
                        .collect()
                })
                .collect(),
        }
    }
}

/// The family P(b,z) with its traceless (Tschirnhaus-shifted) form.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPolyFamily {
    pub k: usize,
    pub n: usize,
    pub backend: Backend,
    /// a_0 .. a_{k-1}; P = z^k + a_{k-1} z^{k-1} + ... + a_0.
    pub coeffs: Vec<TrigPoly>,
    /// â_0 .. â_{k-2} after z ↦ z - a_{k-1}/k.
    pub shifted: Vec<TrigPoly>,
    /// a_{k-1}/k.
    pub shift: TrigPoly,
}

impl CharPolyFamily {
    fn from_monic(k: usize, zp: &ZPoly) -> Result<Self, CharPolyError> {
        assert_eq!(zp.degree(), Some(k));
        assert_eq!(zp.coeff(k), TrigPoly::one(zp.n, zp.backend));
        let coeffs: Vec<TrigPoly> = (0..k).map(|d| zp.coeff(d)).collect();
        for (j, a) in coeffs.iter().enumerate() {
            let real = match zp.backend {
                Backend::Torus => a.is_real_valued(),
                Backend::Affine => a.is_real_valued(),
            };
            if !real {
                return Err(CharPolyError::CoefficientNotReal(j));
            }
        }
        let mut cp = CharPolyFamily {
            k,
            n: zp.n,
            backend: zp.backend,
            coeffs,
            shifted: Vec::new(),
            shift: TrigPoly::zero(zp.n, zp.backend),
        };
        cp.apply_traceless_shift();
        Ok(cp)
    }

    /// The full polynomial as a ZPoly (monic of degree k).
    pub fn as_zpoly(&self) -> ZPoly {
        let mut coeffs = self.coeffs.clone();
        coeffs.push(TrigPoly::one(self.n, self.backend));
        ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs,
        }
    }

    /// The shifted polynomial ẑ^k + â_{k-2} ẑ^{k-2} + ... + â_0.
    pub fn shifted_zpoly(&self) -> ZPoly {
        let mut coeffs = self.shifted.clone();
        coeffs.push(TrigPoly::zero(self.n, self.backend)); // z^{k-1} term
        coeffs.push(TrigPoly::one(self.n, self.backend));
        let mut p = ZPoly {
            n: self.n,
            backend: self.backend,
            coeffs,
        };
        p.trim();
        p
    }

    pub fn is_traceless(&self) -> bool {
        self.coeffs[self.k - 1].is_zero()
    }

    /// Populates `shifted` and `shift` exactly: P(b, z - a_{k-1}(b)/k).
    fn apply_traceless_shift(&mut self) {
        let k = self.k;
        let s = self.coeffs[k - 1].scale(&GaussRat::from_ratio(1, k as i64));
        // Substitute z -> z - s by expanding Σ a_j (z - s)^j.
        let z_minus_s = ZPoly::z_minus(&s);
        let mut power = ZPoly::from_trig(TrigPoly::one(self.n, self.backend));
        let mut total = ZPoly::zero(self.n, self.backend);
        for j in 0..=k {
            let aj = if j == k {
                TrigPoly::one(self.n, self.backend)
            } else {
                self.coeffs[j].clone()
            };
            total = total.add(&power.mul_trig(&aj));
            if j < k {
                power = power.mul(&z_minus_s);
            }
        }
        assert!(
            total.coeff(k - 1).is_zero(),
            "shifted family must lose its z^{{k-1}} term"
        );
        assert_eq!(total.coeff(k), TrigPoly::one(self.n, self.backend));
        self.shifted = (0..k.saturating_sub(1)).map(|d| total.coeff(d)).collect();
        self.shift = s;
    }

    pub fn characteristic_map(&self) -> CharacteristicMap {
        CharacteristicMap {
            n: self.n,
            components: self.shifted.clone(),
        }
    }

    /// First and second partial derivatives of P in (b_1..b_n, z).
    pub fn derivative_data(&self) -> DerivativeData {
        DerivativeData::new(self)
    }

    pub fn evaluate(&self, b: &[f64], z: f64) -> f64 {
        self.as_zpoly().evaluate_real(b, z)
    }

    /// Render P in cosine form, e.g. `z^4 - 6z^2 + (...)z + (...)`.
    pub fn render(&self, names: &[&str]) -> String {
        let mut parts: Vec<String> = vec![format!("z^{}", self.k)];
        for d in (0..self.k).rev() {
            let a = &self.coeffs[d];
            if a.is_zero() {
                continue;
            }
            let zpow = match d {
                0 => String::new(),
                1 => "z".into(),
                _ => format!("z^{d}"),
            };
            let rendered = a.render(names);
            let bare = rendered.strip_prefix('-').unwrap_or(&rendered);
            if zpow.is_empty() {
                parts.push(format!("({rendered})"));
            } else if a.num_terms() == 1 && !bare.contains(['+', '-', 'c', 's']) {
                parts.push(format!("{rendered}{zpow}"));
            } else {
                parts.push(format!("({rendered}){zpow}"));
            }
        }
        let mut out = parts.remove(0);
        for p in parts {
            if let Some(rest) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(&p);
            }
        }
        out
    }
}

/// det(zI - H) by cofactor expansion over the exact TrigPoly ring.
pub fn char_poly(h: &HamiltonianFamily) -> Result<CharPolyFamily, CharPolyError> {
    if !h.is_hermitian() {
        return Err(CharPolyError::NotHermitian);
    }
    if h.k > 8 {
        return Err(CharPolyError::TooLarge(h.k));
    }
    let mat: Vec<Vec<ZPoly>> = (0..h.k)
        .map(|i| {
            (0..h.k)
                .map(|j| {
                    if i == j {
                        ZPoly::z_minus(&h.entries[i][j])
                    } else {
                        ZPoly::from_trig(h.entries[i][j].neg())
                    }
                })
                .collect()
        })
        .collect();
    let det = det_cofactor(&mat, h.n, h.backend);
    CharPolyFamily::from_monic(h.k, &det)
}

fn det_cofactor(mat: &[Vec<ZPoly>], n: usize, backend: Backend) -> ZPoly {
    let k = mat.len();
    if k == 0 {
        return ZPoly::from_trig(TrigPoly::one(n, backend));
    }
    if k == 1 {
        return mat[0][0].clone();
    }
    let mut det = ZPoly::zero(n, backend);
    for i in 0..k {
        if mat[i][0].coeffs.is_empty() {
            continue;
        }
        let minor: Vec<Vec<ZPoly>> = (0..k)
            .filter(|&r| r != i)
            .map(|r| mat[r][1..].to_vec())
            .collect();
        let sub = det_cofactor(&minor, n, backend);
        let term = mat[i][0].mul(&sub);
        det = if i % 2 == 0 {
            det.add(&term)
        } else {
            det.add(&term.neg())
        };
    }
    det
}

/// The permutation-cycle expansion of det(zI - H) on the simplified graph:
/// an independent route to the same family.
pub fn cycle_expansion(g: &QuotientGraph) -> Result<CharPolyFamily, CharPolyError> {
    let k = g.k;
    if k > 8 {
        return Err(CharPolyError::TooLarge(k));
    }
    let n = g.n;
    let backend = Backend::Torus;
    // w+ on the simplified graph: merged parallel-edge weights.
    let mut wplus = vec![vec![TrigPoly::zero(n, backend); k]; k];
    let mut loops = vec![TrigPoly::zero(n, backend); k];
    for e in &g.edges {
        let w = TrigPoly::phase(n, e.m.clone());
        if e.from == e.to {
            loops[e.from] = loops[e.from]
                .add(&w.add(&w.conjugate()).unwrap())
                .unwrap();
        } else {
            wplus[e.from][e.to] = wplus[e.from][e.to].add(&w).unwrap();
            wplus[e.to][e.from] = wplus[e.to][e.from].add(&w.conjugate()).unwrap();
        }
    }
    let mut total = ZPoly::zero(n, backend);
    for perm in (0..k).permutations(k) {
        // Decompose into cycles; track sign via cycle count.
        let mut seen = vec![false; k];
        let mut p_sigma = ZPoly::from_trig(TrigPoly::one(n, backend));
        let mut num_cycles = 0usize;
        let mut dead = false;
        for start in 0..k {
            if seen[start] {
                continue;
            }
            num_cycles += 1;
            let mut cycle = vec![start];
            seen[start] = true;
            let mut v = perm[start];
            while v != start {
                seen[v] = true;
                cycle.push(v);
                v = perm[v];
            }
            if cycle.len() == 1 {
                // w+(c) = -z + Σ loop weights (or just -z).
                let one_cycle = ZPoly {
                    n,
                    backend,
                    coeffs: vec![loops[start].clone(), TrigPoly::from_int(n, backend, -1)],
                };
                p_sigma = p_sigma.mul(&one_cycle);
            } else {
                let mut w = TrigPoly::one(n, backend);
                for r in 0..cycle.len() {
                    let a = cycle[r];
                    let b = cycle[(r + 1) % cycle.len()];
                    if wplus[a][b].is_zero() {
                        dead = true;
                        break;
                    }
                    w = w.mul(&wplus[a][b]).unwrap();
                }
                if dead {
                    break;
                }
                p_sigma = p_sigma.mul_trig(&w);
            }
        }
        if dead {
            continue;
        }
        // sign(σ) = (-1)^{k - #cycles}; overall prefactor (-1)^k.
        let sign_exp = (k - num_cycles) + k;
        let term = if sign_exp % 2 == 0 {
            p_sigma
        } else {
            p_sigma.neg()
        };
        total = total.add(&term);
    }
    CharPolyFamily::from_monic(k, &total)
}

/// For simply-laced no-loop graphs, checks that â_{k-2} is the constant
/// -|E| exactly.
pub fn edge_count_identity(
    g: &QuotientGraph,
    cp: &CharPolyFamily,
) -> Result<(bool, i64), crate::graph::ModelError> {
    let (no_loops, laced, edge_count) = g.simple_laced_no_loops();
    if !no_loops || !laced {
        return Err(crate::graph::ModelError::NotSimplyLaced);
    }
    let expect = TrigPoly::from_int(cp.n, cp.backend, -(edge_count as i64));
    let got = &cp.shifted[cp.k - 2];
    Ok((*got == expect, -(edge_count as i64)))
}

/// The characteristic map Ξ: b ↦ (â_0(b), ..., â_{k-2}(b)).
#[derive(Clone, Debug)]
pub struct CharacteristicMap {
    pub n: usize,
    pub components: Vec<TrigPoly>,
}

impl CharacteristicMap {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn evaluate(&self, b: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.evaluate_real(b).expect("coefficients are real-valued"))
            .collect()
    }

    /// Analytic (k-1) x n Jacobian at b.
    pub fn jacobian(&self, b: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.components.len(), self.n, |i, j| {
            self.components[i]
                .partial_derivative(j)
                .evaluate_real(b)
                .expect("derivative of real-valued is real-valued")
        })
    }

    /// Numerical rank of the Jacobian at threshold `tol * σ_max`.
    pub fn jacobian_rank(&self, b: &[f64], tol: f64) -> usize {
        let j = self.jacobian(b);
        if j.nrows() == 0 || j.ncols() == 0 {
            return 0;
        }
        let svd = j.svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        svd.singular_values
            .iter()
            .filter(|&&s| s > tol * smax.max(1.0))
            .count()
    }
}

/// All first and second partial derivatives of P in (b_1..b_n, z),
/// exact as z-polynomials, with float evaluation helpers. The z coordinate
/// is the last index.
#[derive(Clone, Debug)]
pub struct DerivativeData {
    pub n: usize,
    pub p: ZPoly,
    pub grad: Vec<ZPoly>,
    pub hess: Vec<Vec<ZPoly>>,
}

impl DerivativeData {
    fn new(cp: &CharPolyFamily) -> Self {
        let p = cp.as_zpoly();
        let n = cp.n;
        let mut grad: Vec<ZPoly> = (0..n).map(|i| p.derivative_b(i)).collect();
        grad.push(p.derivative_z());
        let hess: Vec<Vec<ZPoly>> = (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| {
                        if j == n {
                            grad[i].derivative_z()
                        } else {
                            grad[i].derivative_b(j)
                        }
                    })
                    .collect()
            })
            .collect();
        DerivativeData { n, p, grad, hess }
    }

    pub fn eval_p(&self, b: &[f64], z: f64) -> f64 {
        self.p.evaluate_real(b, z)
    }

    pub fn eval_grad(&self, b: &[f64], z: f64) -> Vec<f64> {
        self.grad.iter().map(|g| g.evaluate_real(b, z)).collect()
    }

    pub fn eval_hessian(&self, b: &[f64], z: f64) -> DMatrix<f64> {
        let m = DMatrix::from_fn(self.n + 1, self.n + 1, |i, j| {
            self.hess[i][j].evaluate_real(b, z)
        });
        // Symmetrize away the last float rounding.
        0.5 * (&m + m.transpose())
    }
}
