//! Sparse trigonometric Laurent polynomials on the n-torus, with an ordinary
//! multivariate polynomial backend for families over R^n.
//!
//! A torus-backend value is a finite sum `Σ c_m e^{i m·b}` with `m ∈ Z^n` and
//! Gaussian-rational `c_m`; an affine-backend value is `Σ c_m b^m` with
//! nonnegative multi-exponents. Both are immutable and exact; floats only
//! appear in [`TrigPoly::evaluate`].

use crate::rational::{GaussRat, GaussRatRepr};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

/// Exponent vector: the `m` of `e^{i m·b}` (torus) or of `b^m` (affine).
pub type Frequency = Vec<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Torus,
    Affine,
}

#[derive(Error, Debug, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("backend mismatch")]
    BackendMismatch,
    #[error("reality invariant broken: imaginary residue {0:e} at evaluation")]
    RealityBroken(f64),
}

/// A sparse exact trigonometric (or affine) polynomial.
///
/// Terms are kept in a `BTreeMap` so the representation is canonical
/// (lexicographic in the exponent vector) and equality is structural.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrigPoly {
    n: usize,
    backend: Backend,
    terms: BTreeMap<Frequency, GaussRat>,
}

impl TrigPoly {
    pub fn zero(n: usize, backend: Backend) -> Self {
        TrigPoly {
            n,
            backend,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, backend: Backend, c: GaussRat) -> Self {
        let mut p = Self::zero(n, backend);
        if !c.is_zero() {
            p.terms.insert(vec![0; n], c);
        }
        p
    }

    pub fn one(n: usize, backend: Backend) -> Self {
        Self::constant(n, backend, GaussRat::one())
    }

    pub fn from_int(n: usize, backend: Backend, v: i64) -> Self {
        Self::constant(n, backend, GaussRat::from_int(v))
    }

    /// `e^{i m·b}` (torus) or the monomial `b^m` (affine).
    pub fn monomial(n: usize, backend: Backend, m: Frequency, c: GaussRat) -> Self {
        assert_eq!(m.len(), n, "frequency length must equal base dimension");
        if backend == Backend::Affine {
            assert!(m.iter().all(|&e| e >= 0), "affine exponents must be nonnegative");
        }
        let mut p = Self::zero(n, backend);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    /// `e^{i m·b}` with unit coefficient.
    pub fn phase(n: usize, m: Frequency) -> Self {
        Self::monomial(n, Backend::Torus, m, GaussRat::one())
    }

    /// `2 cos(m·b) = e^{i m·b} + e^{-i m·b}`.
    pub fn two_cos(n: usize, m: Frequency) -> Self {
        let neg: Frequency = m.iter().map(|&x| -x).collect();
        let a = Self::phase(n, m);
        let b = Self::phase(n, neg);
        a.add(&b).expect("same dimension")
    }

    /// The affine coordinate `b_axis`.
    pub fn affine_var(n: usize, axis: usize) -> Self {
        let mut m = vec![0; n];
        m[axis] = 1;
        Self::monomial(n, Backend::Affine, m, GaussRat::one())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Frequency, &GaussRat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn check_compat(&self, other: &TrigPoly) -> Result<(), AlgebraError> {
        if self.n != other.n {
            return Err(AlgebraError::DimensionMismatch(self.n, other.n));
        }
        if self.backend != other.backend {
            return Err(AlgebraError::BackendMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &TrigPoly) -> Result<TrigPoly, AlgebraError> {
        self.check_compat(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let entry = terms.entry(m.clone()).or_insert_with(GaussRat::zero);
            *entry = entry.clone() + c;
            if entry.is_zero() {
                terms.remove(m);
            }
        }
        Ok(TrigPoly {
            n: self.n,
            backend: self.backend,
            terms,
        })
    }

    pub fn sub(&self, other: &TrigPoly) -> Result<TrigPoly, AlgebraError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> TrigPoly {
        TrigPoly {
            n: self.n,
            backend: self.backend,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &TrigPoly) -> Result<TrigPoly, AlgebraError> {
        self.check_compat(other)?;
        let mut terms: BTreeMap<Frequency, GaussRat> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m: Frequency = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                let c = c1 * c2;
                let entry = terms.entry(m.clone()).or_insert_with(GaussRat::zero);
                *entry = entry.clone() + &c;
                if entry.is_zero() {
                    terms.remove(&m);
                }
            }
        }
        Ok(TrigPoly {
            n: self.n,
            backend: self.backend,
            terms,
        })
    }

    pub fn scale(&self, c: &GaussRat) -> TrigPoly {
        if c.is_zero() {
            return Self::zero(self.n, self.backend);
        }
        TrigPoly {
            n: self.n,
            backend: self.backend,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    /// Complex conjugate. On the torus backend frequencies are negated as
    /// well (`conj e^{i m·b} = e^{-i m·b}`); on the affine backend only the
    /// coefficients are conjugated.
    pub fn conjugate(&self) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let m = if self.backend == Backend::Torus {
                    m.iter().map(|&x| -x).collect()
                } else {
                    m.clone()
                };
                (m, c.conj())
            })
            .collect();
        TrigPoly {
            n: self.n,
            backend: self.backend,
            terms,
        }
    }

    /// Exact Hermitian-coefficient check: real-valued iff the coefficient
    /// at `-m` equals the conjugate of the coefficient at `m`.
    pub fn is_real_valued(&self) -> bool {
        match self.backend {
            Backend::Torus => self.terms.iter().all(|(m, c)| {
                let neg: Frequency = m.iter().map(|&x| -x).collect();
                match self.terms.get(&neg) {
                    Some(cn) => *cn == c.conj(),
                    None => false,
                }
            }),
            Backend::Affine => self.terms.values().all(|c| c.is_real()),
        }
    }

    pub fn evaluate(&self, b: &[f64]) -> Complex64 {
        assert_eq!(b.len(), self.n, "evaluation point has wrong dimension");
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
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
            acc += c.to_complex() * factor;
        }
        acc
    }

    /// Evaluate a real-valued polynomial, asserting the reality invariant.
    pub fn evaluate_real(&self, b: &[f64]) -> Result<f64, AlgebraError> {
        let v = self.evaluate(b);
        if v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
            return Err(AlgebraError::RealityBroken(v.im));
        }
        Ok(v.re)
    }

    /// Exact partial derivative along `axis`.
    pub fn partial_derivative(&self, axis: usize) -> TrigPoly {
        assert!(axis < self.n, "axis out of range");
        let mut terms: BTreeMap<Frequency, GaussRat> = BTreeMap::new();
        for (m, c) in &self.terms {
            match self.backend {
                Backend::Torus => {
                    // d/db e^{i m·b} = i m_axis e^{i m·b}
                    let d = c.mul_i_int(m[axis]);
                    if !d.is_zero() {
                        terms.insert(m.clone(), d);
                    }
                }
                Backend::Affine => {
                    if m[axis] > 0 {
                        let mut m2 = m.clone();
                        m2[axis] -= 1;
                        let d = c * &GaussRat::from_int(m[axis]);
                        let entry = terms.entry(m2.clone()).or_insert_with(GaussRat::zero);
                        *entry = entry.clone() + &d;
                        if entry.is_zero() {
                            terms.remove(&m2);
                        }
                    }
                }
            }
        }
        TrigPoly {
            n: self.n,
            backend: self.backend,
            terms,
        }
    }

    /// Integer power by repeated multiplication.
    pub fn pow(&self, e: u32) -> TrigPoly {
        let mut acc = Self::one(self.n, self.backend);
        for _ in 0..e {
            acc = acc.mul(self).expect("same ring");
        }
        acc
    }

    /// Render in cosine/sine form when real-valued, e.g. `-3 + 2cos(a+b)`,
    /// falling back to raw `e^{i(..)}` terms otherwise. `names` supplies the
    /// variable names (defaults `b1..bn` when too short).
    pub fn render(&self, names: &[&str]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let name = |i: usize| -> String {
            names
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("b{}", i + 1))
        };
        let lin_comb = |m: &Frequency| -> String {
            let mut s = String::new();
            for (i, &mi) in m.iter().enumerate() {
                if mi == 0 {
                    continue;
                }
                if s.is_empty() {
                    if mi < 0 {
                        s.push('-');
                    }
                } else if mi < 0 {
                    s.push('-');
                } else {
                    s.push('+');
                }
                if mi.abs() != 1 {
                    let _ = write!(s, "{}", mi.abs());
                }
                s.push_str(&name(i));
            }
            s
        };
        let mut parts: Vec<String> = Vec::new();
        if self.backend == Backend::Affine {
            for (m, c) in &self.terms {
                let mono: String = m
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e != 0)
                    .map(|(i, &e)| {
                        if e == 1 {
                            name(i)
                        } else {
                            format!("{}^{}", name(i), e)
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("*");
                if mono.is_empty() {
                    parts.push(format!("{c}"));
                } else if *c == GaussRat::one() {
                    parts.push(mono);
                } else {
                    parts.push(format!("{c}*{mono}"));
                }
            }
            return parts.join(" + ");
        }
        if self.is_real_valued() {
            // Pair m with -m: c_m e^{imb} + conj(c_m) e^{-imb}
            //               = 2 Re(c_m) cos(m·b) - 2 Im(c_m) sin(m·b).
            let mut seen: std::collections::BTreeSet<Frequency> = Default::default();
            for (m, c) in &self.terms {
                let neg: Frequency = m.iter().map(|&x| -x).collect();
                if seen.contains(m) {
                    continue;
                }
                seen.insert(m.clone());
                seen.insert(neg.clone());
                if m.iter().all(|&x| x == 0) {
                    parts.push(format!("{}", c.re));
                    continue;
                }
                // Canonical representative: the lexicographically larger of m, -m.
                let (rep, cc) = if *m > neg { (m.clone(), c.clone()) } else { (neg, c.conj()) };
                let arg = lin_comb(&rep);
                let two_re = cc.re.clone() + cc.re.clone();
                let two_im = cc.im.clone() + cc.im.clone();
                if !num_traits::Zero::is_zero(&two_re) {
                    parts.push(format!("{two_re}cos({arg})"));
                }
                if !num_traits::Zero::is_zero(&two_im) {
                    parts.push(format!("{}sin({arg})", -two_im));
                }
            }
        } else {
            for (m, c) in &self.terms {
                if m.iter().all(|&x| x == 0) {
                    parts.push(format!("{c}"));
                } else {
                    parts.push(format!("({c})e^{{i({})}}", lin_comb(m)));
                }
            }
        }
        let mut out = String::new();
        for (i, p) in parts.iter().enumerate() {
            if i == 0 {
                out.push_str(p);
            } else if let Some(rest) = p.strip_prefix('-') {
                let _ = write!(out, " - {rest}");
            } else {
                let _ = write!(out, " + {p}");
            }
        }
        out
    }

    pub fn to_repr(&self) -> TrigPolyRepr {
        TrigPolyRepr {
            n: self.n,
            backend: self.backend,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermRepr {
                    m: m.clone(),
                    coeff: c.to_repr(),
                })
                .collect(),
        }
    }

    pub fn from_repr(repr: &TrigPolyRepr) -> Result<TrigPoly, String> {
        let mut terms = BTreeMap::new();
        for t in &repr.terms {
            if t.m.len() != repr.n {
                return Err(format!("term frequency length {} != n {}", t.m.len(), repr.n));
            }
            let c = GaussRat::from_repr(&t.coeff)?;
            if !c.is_zero() {
                terms.insert(t.m.clone(), c);
            }
        }
        Ok(TrigPoly {
            n: repr.n,
            backend: repr.backend,
            terms,
        })
    }
}

/// Lossless structured-text form of a [`TrigPoly`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrigPolyRepr {
    pub n: usize,
    pub backend: Backend,
    pub terms: Vec<TermRepr>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermRepr {
    pub m: Frequency,
    pub coeff: GaussRatRepr,
}
