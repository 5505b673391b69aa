//! Multistart damped Newton search for the singular locus: all solutions of
//! ∇P = 0 with P = 0 on T^n × R (or box × R for affine families), with
//! torus deduplication, component clustering, and dimension estimates.

use crate::charpoly::{CharPolyFamily, CompiledZPoly, DerivativeData};
use crate::classifier::{self, Classification, Signature};
use crate::graph::{Domain, HamiltonianFamily};
use crate::trigpoly::TrigPoly;
use crate::singularity::{self, Stratum, UnfoldingPoint};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FinderOptions {
    /// Seed grid points per base axis.
    pub grid: usize,
    pub grad_tol: f64,
    pub val_tol: f64,
    /// Torus metric radius below which two converged points are the same.
    pub dedup_radius: f64,
    /// Chaining radius for grouping points into locus components.
    pub cluster_radius: f64,
    pub max_newton_iters: usize,
    pub max_backtracks: usize,
    /// Hessian eigenvalues with |μ| ≤ this × max|μ| count as zero directions.
    pub hessian_zero_rel: f64,
    /// Root clustering tolerance for fiber strata.
    pub root_cluster_tol: f64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        FinderOptions {
            grid: 8,
            grad_tol: 1e-8,
            val_tol: 1e-8,
            dedup_radius: 1e-4,
            cluster_radius: 0.3,
            max_newton_iters: 100,
            max_backtracks: 30,
            hessian_zero_rel: 1e-6,
            root_cluster_tol: 1e-6,
        }
    }
}

/// A polished critical point of P with critical value 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Base coordinates, canonicalized to [0, 2π) on the torus.
    pub b: Vec<f64>,
    pub z: f64,
    pub residual_grad: f64,
    pub residual_val: f64,
    /// Symmetric (n+1)×(n+1) Hessian in coordinates (b_1..b_n, z), row-major.
    pub hessian: Vec<Vec<f64>>,
    pub signature: Signature,
    pub tilt_free: bool,
    pub classification: Classification,
    pub stratum: Stratum,
    pub fiber_roots: Vec<f64>,
    /// Number of near-zero Hessian eigenvalues.
    pub hessian_deficiency: usize,
    pub locus_dim_estimate: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocusComponent {
    pub point_indices: Vec<usize>,
    pub dim_estimate: usize,
    /// Secondary indicators backing the estimate.
    pub pca_dim: usize,
    pub hessian_deficiency: usize,
    pub ambiguous: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FinderDiagnostics {
    pub seeds: usize,
    pub converged: usize,
    pub filtered: usize,
    pub deduped: usize,
    pub no_convergence: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularLocus {
    pub points: Vec<CriticalPoint>,
    pub components: Vec<LocusComponent>,
    pub diagnostics: FinderDiagnostics,
}

impl SingularLocus {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dirac_points(&self) -> Vec<&CriticalPoint> {
        self.points
            .iter()
            .filter(|p| p.classification == Classification::Dirac)
            .collect()
    }
}

fn torus_dist_1d(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// max over base coordinates of the per-axis distance, combined with |Δz|.
pub fn point_distance(domain: Domain, a: &[f64], za: f64, b: &[f64], zb: f64) -> f64 {
    let base = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| match domain {
            Domain::Torus => torus_dist_1d(x, y),
            Domain::Box { .. } => (x - y).abs(),
        })
        .fold(0.0, f64::max);
    base.max((za - zb).abs())
}

fn canonicalize(domain: Domain, b: &mut [f64]) {
    if let Domain::Torus = domain {
        for x in b.iter_mut() {
            *x = x.rem_euclid(TAU);
            // Collapse values indistinguishable from the period back to 0.
            if (TAU - *x).abs() < 1e-9 {
                *x = 0.0;
            }
        }
    }
}

struct CompiledSystem {
    n: usize,
    p: CompiledZPoly,
    grad: Vec<CompiledZPoly>,
    hess: Vec<Vec<CompiledZPoly>>,
}

impl CompiledSystem {
    fn new(dd: &DerivativeData) -> Self {
        CompiledSystem {
            n: dd.n,
            p: dd.p.compile(),
            grad: dd.grad.iter().map(|g| g.compile()).collect(),
            hess: dd
                .hess
                .iter()
                .map(|row| row.iter().map(|h| h.compile()).collect())
                .collect(),
        }
    }

    fn grad_at(&self, b: &[f64], z: f64) -> DVector<f64> {
        DVector::from_iterator(self.n + 1, self.grad.iter().map(|g| g.evaluate(b, z)))
    }

    fn hess_at(&self, b: &[f64], z: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n + 1, self.n + 1, |i, j| {
            self.hess[i][j].evaluate(b, z)
        })
    }
}

/// Damped Newton from one seed; returns (b, z) on convergence of ‖∇P‖.
fn newton_polish(
    sys: &CompiledSystem,
    domain: Domain,
    mut b: Vec<f64>,
    mut z: f64,
    opts: &FinderOptions,
) -> Option<(Vec<f64>, f64)> {
    let n = sys.n;
    let target = 1e-11;
    let mut g = sys.grad_at(&b, z);
    for _ in 0..opts.max_newton_iters {
        let gnorm = g.amax();
        if gnorm <= target {
            return Some((b, z));
        }
        let h = sys.hess_at(&b, z);
        // SVD least-squares step handles the rank-deficient Hessians that
        // occur along continuum loci.
        let svd = h.svd(true, true);
        let step = svd.solve(&(-&g), 1e-12).ok()?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..=opts.max_backtracks {
            let mut b_try: Vec<f64> = b.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            let z_try = z + t * step[n];
            canonicalize(domain, &mut b_try);
            if let Domain::Box { half_width } = domain {
                if b_try.iter().any(|x| x.abs() > 3.0 * half_width) || z_try.abs() > 1e6 {
                    t *= 0.5;
                    continue;
                }
            }
            let g_try = sys.grad_at(&b_try, z_try);
            if g_try.amax() < gnorm {
                b = b_try;
                z = z_try;
                g = g_try;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if g.amax() <= opts.grad_tol {
        Some((b, z))
    } else {
        None
    }
}

pub(crate) fn seed_grid(domain: Domain, n: usize, g: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = match domain {
        Domain::Torus => (0..g).map(|i| i as f64 * TAU / g as f64).collect(),
        Domain::Box { half_width } => (0..g)
            .map(|i| -half_width + (2.0 * half_width) * (i as f64 + 0.5) / g as f64)
            .collect(),
    };
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn z_seeds(cp: &CharPolyFamily, b: &[f64]) -> Vec<f64> {
    let coeffs: Vec<f64> = cp
        .coeffs
        .iter()
        .map(|c| c.evaluate_real(b).expect("real coefficients"))
        .collect();
    singularity::companion_roots(&coeffs)
        .iter()
        .map(|r| r.re)
        .collect()
}

/// Locate, polish, deduplicate, and classify all critical points of P with
/// critical value 0. When the Hamiltonian family is supplied, fiber roots
/// come from its (perfectly conditioned) Hermitian eigenvalues instead of a
/// companion matrix.
pub fn find_critical_points(
    cp: &CharPolyFamily,
    family: Option<&HamiltonianFamily>,
    domain: Domain,
    opts: &FinderOptions,
) -> SingularLocus {
    let dd = cp.derivative_data();
    let sys = CompiledSystem::new(&dd);
    let seeds: Vec<(Vec<f64>, f64)> = seed_grid(domain, cp.n, opts.grid)
        .into_iter()
        .flat_map(|b| {
            z_seeds(cp, &b)
                .into_iter()
                .map(move |z| (b.clone(), z))
                .collect::<Vec<_>>()
        })
        .collect();
    let num_seeds = seeds.len();
    let converged: Vec<(Vec<f64>, f64)> = seeds
        .into_par_iter()
        .filter_map(|(b, z)| newton_polish(&sys, domain, b, z, opts))
        .collect();
    let num_converged = converged.len();
    // Filter by critical value 0, then re-polish fully degenerate points:
    // where the Hessian (near-)vanishes the gradient is only quadratic in the
    // offset, so plain Newton stalls around 1e-6.
    let filtered: Vec<(Vec<f64>, f64)> = converged
        .into_iter()
        .filter(|(b, z)| sys.p.evaluate(b, *z).abs() <= opts.val_tol)
        .map(|(b, z)| {
            let hnorm = sys.hess_at(&b, z).amax();
            if hnorm <= 1e-3 {
                degenerate_polish(cp, &dd, &sys, domain, &b, z, opts).unwrap_or((b, z))
            } else if let Some(f) = family {
                eigengap_polish(f, &sys, domain, &b, z, opts).unwrap_or((b, z))
            } else {
                (b, z)
            }
        })
        .collect();
    let num_filtered = filtered.len();
    // Deduplicate on the torus metric; deterministic order.
    let mut sorted = filtered;
    sorted.sort_by(|a, b| {
        a.0.iter()
            .chain(std::iter::once(&a.1))
            .zip(b.0.iter().chain(std::iter::once(&b.1)))
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut unique: Vec<(Vec<f64>, f64)> = Vec::new();
    for (b, z) in sorted {
        if !unique
            .iter()
            .any(|(ub, uz)| point_distance(domain, ub, *uz, &b, z) <= opts.dedup_radius)
        {
            unique.push((b, z));
        }
    }
    // Classify each unique point.
    let mut points: Vec<CriticalPoint> = unique
        .iter()
        .map(|(b, z)| make_point(cp, family, &dd, &sys, b, *z, opts))
        .collect();
    let components = cluster_components(domain, &mut points, opts);
    SingularLocus {
        points,
        components,
        diagnostics: FinderDiagnostics {
            seeds: num_seeds,
            converged: num_converged,
            filtered: num_filtered,
            deduped: unique.len(),
            no_convergence: num_seeds - num_converged,
        },
    }
}

/// High-accuracy polish for fully degenerate critical points (zero Hessian,
/// e.g. cusp points). There J_Ξ vanishes, so the base point is a
/// nondegenerate critical point of some shifted coefficient â_j: Newton on
/// ∇â_j = 0 converges quadratically where Newton on ∇P stalls. The fiber
/// coordinate is then re-polished as a root of the (m-1)-st z-derivative of
/// P, m being the local root multiplicity.
fn degenerate_polish(
    cp: &CharPolyFamily,
    dd: &DerivativeData,
    sys: &CompiledSystem,
    domain: Domain,
    b: &[f64],
    z: f64,
    opts: &FinderOptions,
) -> Option<(Vec<f64>, f64)> {
    let n = cp.n;
    let old_grad = sys.grad_at(b, z).amax();
    for comp in &cp.shifted {
        let Some(mut bb) = component_grad_newton(comp, n, b) else {
            continue;
        };
        if point_distance(domain, &bb, 0.0, b, 0.0) > 1e-3 {
            continue;
        }
        canonicalize(domain, &mut bb);
        // Multiplicity of z in the fiber over bb, then 1-d Newton on the
        // (m-1)-st derivative, whose root at z is simple.
        let m = z_seeds(cp, &bb)
            .iter()
            .filter(|r| (*r - z).abs() <= 1e-3)
            .count()
            .max(1);
        let mut q = dd.p.clone();
        for _ in 0..m - 1 {
            q = q.derivative_z();
        }
        let qd = q.derivative_z();
        let (qc, qdc) = (q.compile(), qd.compile());
        let mut zz = z;
        for _ in 0..60 {
            let f = qc.evaluate(&bb, zz);
            let fd = qdc.evaluate(&bb, zz);
            if fd.abs() < 1e-8 {
                break;
            }
            let step = f / fd;
            zz -= step;
            if step.abs() < 1e-15 * (1.0 + zz.abs()) {
                break;
            }
        }
        if (zz - z).abs() > 1e-3 {
            continue;
        }
        let new_grad = sys.grad_at(&bb, zz).amax();
        if new_grad <= old_grad.max(1e-12) && sys.p.evaluate(&bb, zz).abs() <= opts.val_tol {
            return Some((bb, zz));
        }
    }
    None
}

/// Newton to a nondegenerate critical point of one scalar trig polynomial;
/// None when the component is constant or the iteration leaves the basin.
fn component_grad_newton(comp: &TrigPoly, n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let grads: Vec<TrigPoly> = (0..n).map(|i| comp.partial_derivative(i)).collect();
    if grads.iter().all(|g| g.is_zero()) {
        return None;
    }
    let hess: Vec<Vec<TrigPoly>> = grads
        .iter()
        .map(|g| (0..n).map(|j| g.partial_derivative(j)).collect())
        .collect();
    let mut bb = b.to_vec();
    for _ in 0..60 {
        let gv = DVector::from_iterator(n, grads.iter().map(|g| g.evaluate_real(&bb).unwrap()));
        if gv.amax() <= 1e-13 {
            return Some(bb);
        }
        let hm = DMatrix::from_fn(n, n, |i, j| hess[i][j].evaluate_real(&bb).unwrap());
        let svd = hm.svd(true, true);
        let Ok(step) = svd.solve(&(-&gv), 1e-10) else {
            return None;
        };
        if step.amax() > 0.5 {
            return None;
        }
        for i in 0..n {
            bb[i] += step[i];
        }
    }
    None
}

/// Entries of the cluster block B† H(b) B measured against a scalar matrix:
/// off-diagonal real/imag parts plus consecutive diagonal gaps.
fn block_residual(
    family: &HamiltonianFamily,
    b: &[f64],
    basis: &DMatrix<num_complex::Complex64>,
) -> DVector<f64> {
    let h = family.evaluate(b);
    let block = basis.adjoint() * h * basis;
    let m = block.nrows();
    let mut out = Vec::with_capacity(m * m - 1);
    for i in 0..m {
        for j in (i + 1)..m {
            out.push(block[(i, j)].re);
            out.push(block[(i, j)].im);
        }
    }
    for i in 0..m - 1 {
        out.push(block[(i, i)].re - block[(i + 1, i + 1)].re);
    }
    DVector::from_vec(out)
}

/// Polish a near-degenerate point with Gauss–Newton on the eigenvalue
/// crossing itself: the cluster block V†H(b)V must be scalar. Unlike ∇P,
/// whose components vanish to second or third order along continuum loci and
/// near their intersections, the block entries vanish to first order, so
/// this recovers full precision where Newton on ∇P stalls around 1e-4.
fn eigengap_polish(
    family: &HamiltonianFamily,
    sys: &CompiledSystem,
    domain: Domain,
    b: &[f64],
    z: f64,
    opts: &FinderOptions,
) -> Option<(Vec<f64>, f64)> {
    let n = sys.n;
    let (eigs, vecs) = classifier::hermitian_eigen(&family.evaluate(b));
    let scale = 1.0 + eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let idx: Vec<usize> = (0..eigs.len())
        .filter(|&i| (eigs[i] - z).abs() <= 1e-3 * scale)
        .collect();
    let m = idx.len();
    if m < 2 || vecs.ncols() != eigs.len() {
        return None;
    }
    let mut bb = b.to_vec();
    let fd = 1e-6;
    for _ in 0..40 {
        let (_, vnow) = classifier::hermitian_eigen(&family.evaluate(&bb));
        if vnow.ncols() != eigs.len() {
            return None;
        }
        let basis = vnow.select_columns(idx.iter());
        let g0 = block_residual(family, &bb, &basis);
        if g0.amax() <= 1e-14 * scale {
            break;
        }
        // Central-difference Jacobian with the basis frozen.
        let mut jac = DMatrix::zeros(g0.len(), n);
        for a in 0..n {
            let mut bp = bb.clone();
            let mut bm = bb.clone();
            bp[a] += fd;
            bm[a] -= fd;
            let gp = block_residual(family, &bp, &basis);
            let gm = block_residual(family, &bm, &basis);
            for r in 0..g0.len() {
                jac[(r, a)] = (gp[r] - gm[r]) / (2.0 * fd);
            }
        }
        let svd = jac.svd(true, true);
        let Ok(step) = svd.solve(&(-&g0), 1e-9) else {
            break;
        };
        if step.amax() > 0.3 {
            break;
        }
        for i in 0..n {
            bb[i] += step[i];
        }
        if step.amax() <= 1e-14 {
            break;
        }
    }
    canonicalize(domain, &mut bb);
    if point_distance(domain, &bb, 0.0, b, 0.0) > 1e-2 {
        return None;
    }
    // Accept on the crossing itself: the cluster spread must not grow. ∇P is
    // the wrong yardstick here — it can be smaller at a spurious stall point
    // off the locus than at the polished point on it.
    let spread = |ev: &[f64]| {
        idx.iter().map(|&i| ev[i]).fold(f64::NEG_INFINITY, f64::max)
            - idx.iter().map(|&i| ev[i]).fold(f64::INFINITY, f64::min)
    };
    let eigs2 = classifier::hermitian_eigenvalues(&family.evaluate(&bb));
    let zz = idx.iter().map(|&i| eigs2[i]).sum::<f64>() / m as f64;
    let ok = spread(&eigs2) <= spread(&eigs).max(1e-12)
        && sys.grad_at(&bb, zz).amax() <= opts.grad_tol
        && sys.p.evaluate(&bb, zz).abs() <= opts.val_tol;
    if ok {
        Some((bb, zz))
    } else {
        None
    }
}

fn make_point(
    cp: &CharPolyFamily,
    family: Option<&HamiltonianFamily>,
    dd: &DerivativeData,
    sys: &CompiledSystem,
    b: &[f64],
    z: f64,
    opts: &FinderOptions,
) -> CriticalPoint {
    let g = sys.grad_at(b, z);
    let residual_grad = g.amax();
    let residual_val = sys.p.evaluate(b, z).abs();
    let fiber_roots = {
        let mut r = match family {
            Some(f) => classifier::hermitian_eigenvalues(&f.evaluate(b)),
            None => z_seeds(cp, b),
        };
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r
    };
    let outcome = classifier::classify(dd, b, z, &fiber_roots, opts.root_cluster_tol, 1e-8);
    let hess = dd.eval_hessian(b, z);
    let (eigs, _) = classifier::jacobi_eigen(&hess);
    let max_eig = eigs.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let band = (opts.hessian_zero_rel * max_eig).max(1e-10);
    let deficiency = eigs.iter().filter(|e| e.abs() <= band).count();
    let n = cp.n;
    CriticalPoint {
        b: b.to_vec(),
        z,
        residual_grad,
        residual_val,
        hessian: (0..=n)
            .map(|i| (0..=n).map(|j| hess[(i, j)]).collect())
            .collect(),
        signature: outcome.signature,
        tilt_free: outcome.tilt_free,
        classification: outcome.classification,
        stratum: outcome.stratum,
        fiber_roots,
        hessian_deficiency: deficiency,
        locus_dim_estimate: 0, // filled by component clustering
    }
}

fn cluster_components(
    domain: Domain,
    points: &mut [CriticalPoint],
    opts: &FinderOptions,
) -> Vec<LocusComponent> {
    let k = points.len();
    let mut comp = vec![usize::MAX; k];
    let mut next = 0usize;
    for i in 0..k {
        if comp[i] != usize::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![i];
        comp[i] = id;
        while let Some(v) = stack.pop() {
            for w in 0..k {
                if comp[w] == usize::MAX
                    && point_distance(domain, &points[v].b, points[v].z, &points[w].b, points[w].z)
                        <= opts.cluster_radius
                {
                    comp[w] = id;
                    stack.push(w);
                }
            }
        }
    }
    let mut out = Vec::new();
    for id in 0..next {
        let members: Vec<usize> = (0..k).filter(|&i| comp[i] == id).collect();
        let pca = pca_dim(domain, points, &members);
        // Hessian rank deficiency: majority vote over the component.
        let mut defs: Vec<usize> = members.iter().map(|&i| points[i].hessian_deficiency).collect();
        defs.sort_unstable();
        let def_mode = mode(&defs);
        // Singleton fallback: no cloud to measure, so read the Hessian. A
        // fully degenerate Hessian is an isolated higher singularity (dim 0);
        // a partial deficiency signals flat locus directions, reported as 1
        // (transverse multi-branch points would otherwise inflate it).
        let estimate = if members.len() == 1 {
            let def = points[members[0]].hessian_deficiency;
            let full = points[members[0]].b.len() + 1;
            if def >= full {
                0
            } else {
                def.min(1)
            }
        } else {
            def_mode.min(pca.max(1))
        };
        let ambiguous = members.len() > 1 && pca != def_mode;
        for &i in &members {
            points[i].locus_dim_estimate = estimate;
        }
        out.push(LocusComponent {
            point_indices: members,
            dim_estimate: estimate,
            pca_dim: pca,
            hessian_deficiency: def_mode,
            ambiguous,
        });
    }
    out
}

fn mode(sorted: &[usize]) -> usize {
    let mut best = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best.1 {
            best = (sorted[i], j);
        }
        i += j;
    }
    best.0
}

/// Principal-component dimension of a component's point cloud in (b, z).
fn pca_dim(domain: Domain, points: &[CriticalPoint], members: &[usize]) -> usize {
    if members.len() < 2 {
        return 0;
    }
    let n = points[members[0]].b.len();
    let rep = &points[members[0]];
    // Unwrap torus coordinates around the representative before centering.
    let rows: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| {
            let p = &points[i];
            let mut row: Vec<f64> = p
                .b
                .iter()
                .zip(&rep.b)
                .map(|(&x, &r)| match domain {
                    Domain::Torus => {
                        let mut d = (x - r).rem_euclid(TAU);
                        if d > std::f64::consts::PI {
                            d -= TAU;
                        }
                        d
                    }
                    Domain::Box { .. } => x - r,
                })
                .collect();
            row.push(p.z - rep.z);
            row
        })
        .collect();
    let mean: Vec<f64> = (0..=n)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect();
    let data = DMatrix::from_fn(rows.len(), n + 1, |i, j| rows[i][j] - mean[j]);
    let svd = (data / (rows.len() as f64).sqrt()).svd(false, false);
    svd.singular_values.iter().filter(|&&s| s > 0.05).count()
}

/// Grid-seeded Gauss–Newton for all solutions of Ξ(b) = λ; used to test
/// fiber discreteness independently of the critical-point search.
pub fn singular_fiber_solve(
    xi: &crate::charpoly::CharacteristicMap,
    lambda: &UnfoldingPoint,
    domain: Domain,
    grid: usize,
    tol: f64,
) -> Vec<Vec<f64>> {
    let n = xi.n;
    let seeds = seed_grid(domain, n, grid);
    let mut found: Vec<Vec<f64>> = Vec::new();
    for seed in seeds {
        let mut b = seed;
        let mut resid = residual(xi, &b, lambda);
        // Iterate to stall rather than stopping at `tol`: convergence is only
        // linear where J_Ξ degenerates, and stopping early scatters seeds of
        // the same solution across a ball wider than the dedup radius.
        for _ in 0..200 {
            let rnorm = resid.amax();
            let jac = xi.jacobian(&b);
            let svd = jac.svd(true, true);
            let Ok(step) = svd.solve(&(-&resid), 1e-12) else {
                break;
            };
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let mut b_try: Vec<f64> =
                    b.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
                canonicalize(domain, &mut b_try);
                let r_try = residual(xi, &b_try, lambda);
                if r_try.amax() < rnorm {
                    b = b_try;
                    resid = r_try;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        // Over discriminant values the fiber points are critical points of
        // the components themselves (J_Ξ singular) and the stall above leaves
        // ~1e-6 of slack; a component-gradient Newton recovers them exactly.
        if resid.amax() <= 1e3 * tol {
            for comp in &xi.components {
                if let Some(bb) = component_grad_newton(comp, n, &b) {
                    if point_distance(domain, &bb, 0.0, &b, 0.0) <= 1e-3 {
                        let r_new = residual(xi, &bb, lambda);
                        if r_new.amax() <= resid.amax() {
                            b = bb;
                            resid = r_new;
                            break;
                        }
                    }
                }
            }
        }
        if resid.amax() <= tol {
            canonicalize(domain, &mut b);
            if !found
                .iter()
                .any(|f| point_distance(domain, f, 0.0, &b, 0.0) <= 1e-4)
            {
                found.push(b);
            }
        }
    }
    found.sort_by(|a, b| a.partial_cmp(b).unwrap());
    found
}

fn residual(
    xi: &crate::charpoly::CharacteristicMap,
    b: &[f64],
    lambda: &UnfoldingPoint,
) -> DVector<f64> {
    let v = xi.evaluate(b);
    DVector::from_iterator(v.len(), v.iter().zip(&lambda.lambda).map(|(a, l)| a - l))
}

/// Per-point consistency record: disc(Ξ(b)) ≈ 0 and non-maximal Jacobian
/// rank of Ξ at b.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyRecord {
    pub disc_value: f64,
    pub jac_rank: usize,
    pub max_rank: usize,
    pub consistent: bool,
}

pub fn verify_discriminant_consistency(
    locus: &SingularLocus,
    xi: &crate::charpoly::CharacteristicMap,
    k: usize,
    disc_tol: f64,
) -> Vec<ConsistencyRecord> {
    // Scale reference: discriminant magnitude over the located points plus 1.
    let discs: Vec<f64> = locus
        .points
        .iter()
        .map(|p| {
            if k >= 2 {
                singularity::discriminant(&UnfoldingPoint::new(xi.evaluate(&p.b)), k).unwrap()
            } else {
                0.0
            }
        })
        .collect();
    let scale = 1.0 + discs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    locus
        .points
        .iter()
        .zip(discs)
        .map(|(p, d)| {
            let max_rank = xi.dim().min(xi.n);
            let rank = xi.jacobian_rank(&p.b, 1e-8);
            ConsistencyRecord {
                disc_value: d,
                jac_rank: rank,
                max_rank,
                consistent: d.abs() <= disc_tol * scale && (max_rank == 0 || rank < max_rank),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charpoly::char_poly;
    use crate::graph::builtin_model;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn locus_for(name: &str, grid: usize) -> (SingularLocus, crate::graph::Domain) {
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

    #[test]
    fn gyroid_critical_points() {
        let (locus, domain) = locus_for("gyroid", 8);
        assert_eq!(locus.points.len(), 6, "{:#?}", locus.points);
        let s3 = 3f64.sqrt();
        let expect: Vec<(Vec<f64>, f64)> = vec![
            (vec![0.0, 0.0, 0.0], -1.0),
            (vec![PI, PI, PI], 1.0),
            (vec![FRAC_PI_2, FRAC_PI_2, FRAC_PI_2], s3),
            (vec![FRAC_PI_2, FRAC_PI_2, FRAC_PI_2], -s3),
            (vec![3.0 * FRAC_PI_2, 3.0 * FRAC_PI_2, 3.0 * FRAC_PI_2], s3),
            (vec![3.0 * FRAC_PI_2, 3.0 * FRAC_PI_2, 3.0 * FRAC_PI_2], -s3),
        ];
        for (b, z) in &expect {
            assert!(
                locus
                    .points
                    .iter()
                    .any(|p| point_distance(domain, &p.b, p.z, b, *z) < 1e-8),
                "missing ({b:?}, {z})"
            );
        }
        for p in &locus.points {
            assert!(p.residual_grad <= 1e-8);
            assert!(p.residual_val <= 1e-8);
            assert_eq!(p.locus_dim_estimate, 0);
        }
    }

    #[test]
    fn honeycomb_dirac_points() {
        let (locus, domain) = locus_for("honeycomb", 8);
        assert_eq!(locus.points.len(), 2);
        let third = 2.0 * PI / 3.0;
        for b in [[third, TAU - third], [TAU - third, third]] {
            assert!(locus
                .points
                .iter()
                .any(|p| point_distance(domain, &p.b, p.z, &b, 0.0) < 1e-8));
        }
        for p in &locus.points {
            assert_eq!(p.classification, Classification::Dirac);
        }
    }

    #[test]
    fn triangle_two_points() {
        let (locus, domain) = locus_for("triangle", 16);
        assert_eq!(locus.points.len(), 2);
        assert!(locus
            .points
            .iter()
            .any(|p| point_distance(domain, &p.b, p.z, &[0.0], -1.0) < 1e-8));
        assert!(locus
            .points
            .iter()
            .any(|p| point_distance(domain, &p.b, p.z, &[PI], 1.0) < 1e-8));
    }

    #[test]
    fn p_lattice_empty() {
        let (locus, _) = locus_for("p_lattice", 6);
        assert!(locus.is_empty());
        assert_eq!(locus.diagnostics.deduped, 0);
    }

    #[test]
    fn vnw3_single_dirac() {
        let (locus, domain) = locus_for("vnw3", 5);
        assert_eq!(locus.points.len(), 1);
        assert!(point_distance(domain, &locus.points[0].b, locus.points[0].z, &[0.0; 3], 0.0) < 1e-8);
        assert_eq!(locus.points[0].classification, Classification::Dirac);
    }

    #[test]
    fn vnw4_line_of_cones() {
        let (locus, _) = locus_for("vnw4", 5);
        assert!(!locus.is_empty());
        // All points on (0,0,0,d) with z = d.
        for p in &locus.points {
            assert!(p.b[0].abs() < 1e-7 && p.b[1].abs() < 1e-7 && p.b[2].abs() < 1e-7);
            assert!((p.b[3] - p.z).abs() < 1e-7);
        }
        assert_eq!(locus.components.len(), 1);
        assert_eq!(locus.components[0].dim_estimate, 1);
    }

    #[test]
    fn diamond_circle_locus() {
        let (locus, _) = locus_for("diamond", 8);
        assert!(locus.points.len() > 10);
        // φ_i = π and φ_j ≡ φ_k + π for some axis permutation.
        for p in &locus.points {
            let u = &p.b;
            let ok = [(0, 1, 2), (1, 0, 2), (2, 0, 1)].iter().any(|&(i, j, k)| {
                torus_dist_1d(u[i], PI).max(torus_dist_1d(u[j], u[k] + PI)) < 1e-6
            });
            assert!(ok, "off-circle point {u:?}");
            assert!(p.z.abs() < 1e-8);
        }
        let dims: Vec<usize> = locus.components.iter().map(|c| c.dim_estimate).collect();
        assert!(dims.iter().all(|&d| d == 1), "dims {dims:?}");
        assert!(locus.dirac_points().is_empty());
    }

    #[test]
    fn grid_refinement_stability_gyroid() {
        let (a, domain) = locus_for("gyroid", 8);
        let (b, _) = locus_for("gyroid", 16);
        assert_eq!(a.points.len(), b.points.len());
        for p in &a.points {
            assert!(b
                .points
                .iter()
                .any(|q| point_distance(domain, &p.b, p.z, &q.b, q.z) < 1e-6));
        }
    }

    #[test]
    fn gyroid_fiber_solve() {
        let m = builtin_model("gyroid").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let fiber = singular_fiber_solve(
            &xi,
            &UnfoldingPoint::new(vec![9.0, 0.0, -6.0]),
            m.domain,
            8,
            1e-9,
        );
        assert_eq!(fiber.len(), 2, "fiber {fiber:?}");
        for b in &fiber {
            let diag = [FRAC_PI_2, 3.0 * FRAC_PI_2]
                .iter()
                .any(|&v| b.iter().all(|&x| torus_dist_1d(x, v) < 1e-6));
            assert!(diag, "unexpected fiber point {b:?}");
        }
    }

    #[test]
    fn honeycomb_fiber_solve() {
        let m = builtin_model("honeycomb").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let fiber = singular_fiber_solve(&xi, &UnfoldingPoint::new(vec![0.0]), m.domain, 12, 1e-9);
        assert_eq!(fiber.len(), 2, "fiber {fiber:?}");
    }

    #[test]
    fn consistency_check_gyroid() {
        let m = builtin_model("gyroid").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let (locus, _) = locus_for("gyroid", 8);
        let xi = cp.characteristic_map();
        let records = verify_discriminant_consistency(&locus, &xi, cp.k, 1e-8);
        assert!(records.iter().all(|r| r.consistent), "{records:#?}");
        assert!(records.iter().all(|r| r.jac_rank == 0));
    }
}
