//! Characteristic-region sampling: the image of Ξ over the base, disc∘Ξ and
//! Jacobian-rank evaluation, discriminant-contact detection, and CSV / SVG /
//! JSON export.

use crate::charpoly::CharacteristicMap;
use crate::critical::seed_grid;
use crate::graph::{Domain, ModelSpec};
use crate::singularity::{self, UnfoldingPoint};
use crate::trigpoly::{Backend, TrigPoly};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegionOptions {
    /// Grid points per base axis.
    pub grid: usize,
    /// Rank threshold passed to the Jacobian SVD.
    pub jac_tol: f64,
    /// |disc| ≤ this × scale marks a sample near the discriminant.
    pub near_disc_rel: f64,
    /// |disc| ≤ this × scale selects cells for one bisection refinement.
    pub refine_rel: f64,
    /// Λ-space chaining radius for contact clustering, relative to the
    /// sampled Ξ span.
    pub contact_cluster_rel: f64,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            grid: 40,
            jac_tol: 1e-8,
            near_disc_rel: 1e-9,
            refine_rel: 1e-4,
            contact_cluster_rel: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionSample {
    pub b: Vec<f64>,
    /// (â_0, …, â_{k−2}) at b.
    pub xi: Vec<f64>,
    pub disc: f64,
    pub jac_rank: usize,
    pub near_disc: bool,
}

/// A point where the sampled region touches the discriminant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Contact {
    pub xi: Vec<f64>,
    pub b: Vec<f64>,
    pub disc: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionData {
    pub k: usize,
    pub n: usize,
    pub samples: Vec<RegionSample>,
    /// Componentwise Ξ ranges, extremum-polished.
    pub xi_min: Vec<f64>,
    pub xi_max: Vec<f64>,
    pub disc_min: f64,
    pub disc_scale: f64,
    pub contacts: Vec<Contact>,
}

/// Flat float compilation of a TrigPoly for tight sampling loops.
struct FastPoly {
    backend: Backend,
    terms: Vec<(Vec<i64>, f64, f64)>,
}

impl FastPoly {
    fn new(p: &TrigPoly) -> Self {
        FastPoly {
            backend: p.backend(),
            terms: p
                .terms()
                .map(|(m, c)| {
                    let v = c.to_complex();
                    (m.clone(), v.re, v.im)
                })
                .collect(),
        }
    }

    fn evaluate(&self, b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (m, re, im) in &self.terms {
            match self.backend {
                Backend::Torus => {
                    let phase: f64 = m.iter().zip(b).map(|(&mi, &bi)| mi as f64 * bi).sum();
                    // Imaginary parts cancel across conjugate term pairs.
                    acc += re * phase.cos() - im * phase.sin();
                }
                Backend::Affine => {
                    let mono: f64 = m
                        .iter()
                        .zip(b)
                        .map(|(&mi, &bi)| bi.powi(mi as i32))
                        .product();
                    acc += re * mono;
                }
            }
        }
        acc
    }
}

struct FastMap {
    n: usize,
    k: usize,
    comps: Vec<FastPoly>,
    jac: Vec<Vec<FastPoly>>,
}

impl FastMap {
    fn new(xi: &CharacteristicMap, k: usize) -> Self {
        FastMap {
            n: xi.n,
            k,
            comps: xi.components.iter().map(FastPoly::new).collect(),
            jac: xi
                .components
                .iter()
                .map(|c| (0..xi.n).map(|j| FastPoly::new(&c.partial_derivative(j))).collect())
                .collect(),
        }
    }

    fn xi(&self, b: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.evaluate(b)).collect()
    }

    fn disc(&self, xi: &[f64]) -> f64 {
        if self.k < 2 {
            // k = 1 has an empty unfolding base; no multiple roots ever.
            return 1.0;
        }
        singularity::discriminant(&UnfoldingPoint::new(xi.to_vec()), self.k)
            .expect("valid unfolding dimension")
    }

    fn jac_rank(&self, b: &[f64], tol: f64) -> usize {
        let rows = self.jac.len();
        if rows == 0 || self.n == 0 {
            return 0;
        }
        let j = DMatrix::from_fn(rows, self.n, |i, c| self.jac[i][c].evaluate(b));
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

fn raw_sample(fm: &FastMap, b: Vec<f64>, opts: &RegionOptions) -> RegionSample {
    let xi = fm.xi(&b);
    let disc = fm.disc(&xi);
    let jac_rank = fm.jac_rank(&b, opts.jac_tol);
    RegionSample {
        b,
        xi,
        disc,
        jac_rank,
        near_disc: false, // set once the discriminant scale is known
    }
}

/// Sample Ξ on a G^n grid, flag near-discriminant samples (with one level of
/// bisection refinement around them), polish the componentwise ranges, and
/// cluster discriminant contacts in Λ-space.
pub fn sample_region(
    xi: &CharacteristicMap,
    k: usize,
    domain: Domain,
    opts: &RegionOptions,
) -> RegionData {
    assert!(opts.grid >= 2, "grid must have at least 2 points per axis");
    let fm = FastMap::new(xi, k);
    let mut samples: Vec<RegionSample> = seed_grid(domain, xi.n, opts.grid)
        .into_par_iter()
        .map(|b| raw_sample(&fm, b, opts))
        .collect();
    let scale = 1.0 + samples.iter().map(|s| s.disc.abs()).fold(0.0, f64::max);
    // One bisection level around near-discriminant cells.
    let spacing = match domain {
        Domain::Torus => TAU / opts.grid as f64,
        Domain::Box { half_width } => 2.0 * half_width / opts.grid as f64,
    };
    let refined: Vec<RegionSample> = samples
        .par_iter()
        .filter(|s| s.disc.abs() <= opts.refine_rel * scale)
        .flat_map_iter(|s| {
            half_step_offsets(xi.n).into_iter().map(move |off| {
                let b: Vec<f64> = s
                    .b
                    .iter()
                    .zip(&off)
                    .map(|(&x, &o)| match domain {
                        Domain::Torus => (x + o * spacing).rem_euclid(TAU),
                        Domain::Box { .. } => x + o * spacing,
                    })
                    .collect();
                b
            })
        })
        .map(|b| raw_sample(&fm, b, opts))
        .collect();
    samples.extend(refined);
    for s in &mut samples {
        s.near_disc = s.disc.abs() <= opts.near_disc_rel * scale;
    }
    finish(xi, k, domain, samples, scale, opts)
}

fn half_step_offsets(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                [-0.5, 0.0, 0.5].iter().map(move |&o| {
                    let mut q = p.clone();
                    q.push(o);
                    q
                })
            })
            .collect();
    }
    out.retain(|o| o.iter().any(|&x| x != 0.0));
    out
}

fn finish(
    xi: &CharacteristicMap,
    k: usize,
    domain: Domain,
    samples: Vec<RegionSample>,
    scale: f64,
    opts: &RegionOptions,
) -> RegionData {
    let dim = xi.dim();
    let mut xi_min = vec![f64::INFINITY; dim];
    let mut xi_max = vec![f64::NEG_INFINITY; dim];
    let mut arg_min = vec![0usize; dim];
    let mut arg_max = vec![0usize; dim];
    let mut disc_min = f64::INFINITY;
    for (i, s) in samples.iter().enumerate() {
        for j in 0..dim {
            if s.xi[j] < xi_min[j] {
                xi_min[j] = s.xi[j];
                arg_min[j] = i;
            }
            if s.xi[j] > xi_max[j] {
                xi_max[j] = s.xi[j];
                arg_max[j] = i;
            }
        }
        disc_min = disc_min.min(s.disc);
    }
    // Polish each range endpoint: Newton on ∇â_j = 0 from the best sample
    // converges quadratically, recovering interval endpoints the grid only
    // brackets. Critical values always lie inside the true range, so taking
    // min/max with the polished value cannot overshoot.
    for j in 0..dim {
        for (arg, slot, is_min) in [
            (arg_min[j], &mut xi_min[j], true),
            (arg_max[j], &mut xi_max[j], false),
        ] {
            if samples.is_empty() {
                continue;
            }
            if let Some((_, v)) =
                polish_extremum(&xi.components[j], domain, &samples[arg].b)
            {
                if is_min {
                    *slot = slot.min(v);
                } else {
                    *slot = slot.max(v);
                }
            }
        }
    }
    let contacts = cluster_contacts(&samples, &xi_min, &xi_max, opts);
    RegionData {
        k,
        n: xi.n,
        samples,
        xi_min,
        xi_max,
        disc_min,
        disc_scale: scale,
        contacts,
    }
}

/// Newton on the gradient of one Ξ component from a starting base point;
/// returns the critical point and value on convergence nearby.
fn polish_extremum(comp: &TrigPoly, domain: Domain, start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = start.len();
    let grads: Vec<TrigPoly> = (0..n).map(|i| comp.partial_derivative(i)).collect();
    if grads.iter().all(|g| g.is_zero()) {
        return None;
    }
    let hess: Vec<Vec<TrigPoly>> = grads
        .iter()
        .map(|g| (0..n).map(|j| g.partial_derivative(j)).collect())
        .collect();
    let mut b = start.to_vec();
    let mut ok = false;
    for _ in 0..60 {
        let gv = DVector::from_iterator(n, grads.iter().map(|g| g.evaluate_real(&b).unwrap()));
        if gv.amax() <= 1e-12 {
            ok = true;
            break;
        }
        let hm = DMatrix::from_fn(n, n, |i, j| hess[i][j].evaluate_real(&b).unwrap());
        let svd = hm.svd(true, true);
        let step = svd.solve(&(-&gv), 1e-10).ok()?;
        if step.amax() > 1.0 {
            return None;
        }
        for i in 0..n {
            b[i] += step[i];
        }
    }
    if !ok {
        return None;
    }
    if let Domain::Box { half_width } = domain {
        // Reject escapes: box extrema on the boundary are not critical points.
        if b.iter().any(|x| x.abs() > half_width + 1e-9) {
            return None;
        }
    }
    let drift: f64 = b
        .iter()
        .zip(start)
        .map(|(&x, &s)| match domain {
            Domain::Torus => {
                let d = (x - s).rem_euclid(TAU);
                d.min(TAU - d)
            }
            Domain::Box { .. } => (x - s).abs(),
        })
        .fold(0.0, f64::max);
    if drift > 1.0 {
        return None;
    }
    let v = comp.evaluate_real(&b).unwrap();
    Some((b, v))
}

fn cluster_contacts(
    samples: &[RegionSample],
    xi_min: &[f64],
    xi_max: &[f64],
    opts: &RegionOptions,
) -> Vec<Contact> {
    let flagged: Vec<&RegionSample> = samples.iter().filter(|s| s.near_disc).collect();
    if flagged.is_empty() || xi_min.is_empty() {
        return Vec::new();
    }
    let span = xi_min
        .iter()
        .zip(xi_max)
        .map(|(lo, hi)| hi - lo)
        .fold(0.0, f64::max)
        .max(1e-6);
    let radius = opts.contact_cluster_rel * span;
    let mut assigned = vec![usize::MAX; flagged.len()];
    let mut next = 0usize;
    for i in 0..flagged.len() {
        if assigned[i] != usize::MAX {
            continue;
        }
        assigned[i] = next;
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            for w in 0..flagged.len() {
                if assigned[w] == usize::MAX && xi_dist(&flagged[v].xi, &flagged[w].xi) <= radius {
                    assigned[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    let mut contacts = Vec::new();
    for id in 0..next {
        let best = flagged
            .iter()
            .zip(&assigned)
            .filter(|(_, &a)| a == id)
            .map(|(s, _)| *s)
            .min_by(|a, b| a.disc.abs().partial_cmp(&b.disc.abs()).unwrap())
            .unwrap();
        contacts.push(Contact {
            xi: best.xi.clone(),
            b: best.b.clone(),
            disc: best.disc,
        });
    }
    contacts.sort_by(|a, b| a.xi.partial_cmp(&b.xi).unwrap());
    contacts
}

fn xi_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Add a sample at an exact base point (e.g. a located critical point) so it
/// participates in near-discriminant flagging and contact clustering.
pub fn refine_at(data: &mut RegionData, xi: &CharacteristicMap, b: &[f64], opts: &RegionOptions) {
    let fm = FastMap::new(xi, data.k);
    let mut s = raw_sample(&fm, b.to_vec(), opts);
    s.near_disc = s.disc.abs() <= opts.near_disc_rel * data.disc_scale;
    data.disc_min = data.disc_min.min(s.disc);
    for j in 0..s.xi.len() {
        data.xi_min[j] = data.xi_min[j].min(s.xi[j]);
        data.xi_max[j] = data.xi_max[j].max(s.xi[j]);
    }
    data.samples.push(s);
    let (xi_min, xi_max) = (data.xi_min.clone(), data.xi_max.clone());
    data.contacts = cluster_contacts(&data.samples, &xi_min, &xi_max, opts);
}

/// Streaming range/discriminant scan for grids too dense to retain: returns
/// (xi_min, xi_max, disc_min, disc_scale) with polished range endpoints.
pub fn scan_ranges(
    xi: &CharacteristicMap,
    k: usize,
    domain: Domain,
    grid: usize,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let fm = FastMap::new(xi, k);
    let dim = xi.dim();
    #[derive(Clone)]
    struct Acc {
        xi_min: Vec<f64>,
        xi_max: Vec<f64>,
        b_min: Vec<Vec<f64>>,
        b_max: Vec<Vec<f64>>,
        disc_min: f64,
        disc_absmax: f64,
    }
    let empty = Acc {
        xi_min: vec![f64::INFINITY; dim],
        xi_max: vec![f64::NEG_INFINITY; dim],
        b_min: vec![Vec::new(); dim],
        b_max: vec![Vec::new(); dim],
        disc_min: f64::INFINITY,
        disc_absmax: 0.0,
    };
    let merge = |mut a: Acc, b: Acc| {
        for j in 0..dim {
            if b.xi_min[j] < a.xi_min[j] {
                a.xi_min[j] = b.xi_min[j];
                a.b_min[j] = b.b_min[j].clone();
            }
            if b.xi_max[j] > a.xi_max[j] {
                a.xi_max[j] = b.xi_max[j];
                a.b_max[j] = b.b_max[j].clone();
            }
        }
        a.disc_min = a.disc_min.min(b.disc_min);
        a.disc_absmax = a.disc_absmax.max(b.disc_absmax);
        a
    };
    let acc = seed_grid(domain, xi.n, grid)
        .into_par_iter()
        .fold(
            || empty.clone(),
            |mut a, b| {
                let v = fm.xi(&b);
                let d = fm.disc(&v);
                for j in 0..dim {
                    if v[j] < a.xi_min[j] {
                        a.xi_min[j] = v[j];
                        a.b_min[j] = b.clone();
                    }
                    if v[j] > a.xi_max[j] {
                        a.xi_max[j] = v[j];
                        a.b_max[j] = b.clone();
                    }
                }
                a.disc_min = a.disc_min.min(d);
                a.disc_absmax = a.disc_absmax.max(d.abs());
                a
            },
        )
        .reduce(|| empty.clone(), merge);
    let mut xi_min = acc.xi_min;
    let mut xi_max = acc.xi_max;
    for j in 0..dim {
        if !acc.b_min[j].is_empty() {
            if let Some((_, v)) = polish_extremum(&xi.components[j], domain, &acc.b_min[j]) {
                xi_min[j] = xi_min[j].min(v);
            }
            if let Some((_, v)) = polish_extremum(&xi.components[j], domain, &acc.b_max[j]) {
                xi_max[j] = xi_max[j].max(v);
            }
        }
    }
    (xi_min, xi_max, acc.disc_min, 1.0 + acc.disc_absmax)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub label: String,
    pub t: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
}

/// Declared boundary parameterizations: the gyroid region is bounded by the
/// Ξ-images of the diagonals a=b=c and a=b=−c. Other models declare none.
pub fn boundary_curves(
    model: &ModelSpec,
    xi: &CharacteristicMap,
    samples: usize,
) -> Vec<BoundaryCurve> {
    if model.name != "gyroid" || samples == 0 {
        return Vec::new();
    }
    let curves: [(&str, fn(f64) -> Vec<f64>); 2] = [
        ("a=b=c", |t| vec![t, t, t]),
        ("a=b=-c", |t| vec![t, t, (-t).rem_euclid(TAU)]),
    ];
    curves
        .iter()
        .map(|(label, param)| {
            let t: Vec<f64> = (0..samples).map(|i| i as f64 * TAU / samples as f64).collect();
            let pts: Vec<Vec<f64>> = t.iter().map(|&v| xi.evaluate(&param(v))).collect();
            BoundaryCurve {
                label: label.to_string(),
                t,
                xi: pts,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Svg,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv, svg, or json)")),
        }
    }
}

/// Render the sampled region in the requested format; returns file content.
pub fn export(
    data: &RegionData,
    curves: &[BoundaryCurve],
    var_names: &[String],
    format: ExportFormat,
) -> String {
    match format {
        ExportFormat::Csv => export_csv(data, var_names),
        ExportFormat::Json => export_json(data, curves),
        ExportFormat::Svg => export_svg(data, curves),
    }
}

fn export_csv(data: &RegionData, var_names: &[String]) -> String {
    let mut out = String::new();
    let mut cols: Vec<String> = (0..data.n)
        .map(|i| {
            var_names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("b{i}"))
        })
        .collect();
    for j in 0..data.k.saturating_sub(1) {
        cols.push(format!("a{j}"));
    }
    cols.push("disc".into());
    cols.push("jac_rank".into());
    cols.push("near_disc".into());
    out.push_str(&cols.join(","));
    out.push_str("\r\n");
    for s in &data.samples {
        let mut row: Vec<String> = s.b.iter().map(|v| format!("{v:.12}")).collect();
        row.extend(s.xi.iter().map(|v| format!("{v:.12}")));
        row.push(format!("{:.12e}", s.disc));
        row.push(s.jac_rank.to_string());
        row.push(s.near_disc.to_string());
        out.push_str(&row.join(","));
        out.push_str("\r\n");
    }
    out
}

#[derive(Serialize)]
struct RegionDocument<'a> {
    schema: &'static str,
    #[serde(flatten)]
    data: &'a RegionData,
    boundary_curves: &'a [BoundaryCurve],
}

fn export_json(data: &RegionData, curves: &[BoundaryCurve]) -> String {
    serde_json::to_string_pretty(&RegionDocument {
        schema: "1",
        data,
        boundary_curves: curves,
    })
    .expect("region data serializes")
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const MARGIN: f64 = 70.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (SVG_W - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        SVG_H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (SVG_H - 2.0 * MARGIN)
    }
}

/// Self-contained SVG scatter of (â_0, â_1) (or the â_0 line for interval
/// regions) with axes, contact flags, boundary-curve overlays, and — for
/// quartic families on a constant-â_2 slice — the discriminant contour traced
/// by marching squares.
fn export_svg(data: &RegionData, curves: &[BoundaryCurve]) -> String {
    let dim = data.k.saturating_sub(1);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if data.samples.is_empty() || dim == 0 {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"16\">empty characteristic region</text>\n</svg>\n",
            SVG_W / 2.0,
            SVG_H / 2.0
        ));
        return svg;
    }
    let planar = dim >= 2;
    let (mut x0, mut x1) = (data.xi_min[0], data.xi_max[0]);
    let (mut y0, mut y1) = if planar {
        (data.xi_min[1], data.xi_max[1])
    } else {
        (-1.0, 1.0)
    };
    let pad = |lo: &mut f64, hi: &mut f64| {
        let w = (*hi - *lo).max(1e-9);
        *lo -= 0.12 * w;
        *hi += 0.12 * w;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let frame = Frame { x0, x1, y0, y1 };
    draw_axes(&mut svg, &frame, planar);
    // Discriminant contour on the constant-â_2 slice for quartic families.
    if data.k == 4 {
        let a2 = data.samples[0].xi[2];
        if data.samples.iter().all(|s| (s.xi[2] - a2).abs() < 1e-9) {
            let f = |a0: f64, a1: f64| {
                if (a2 + 6.0).abs() < 1e-12 {
                    singularity::a3_slice_closed_form(a0, a1)
                } else {
                    singularity::discriminant(&UnfoldingPoint::new(vec![a0, a1, a2]), 4)
                        .expect("quartic discriminant")
                }
            };
            for (ax0, ay0, ax1, ay1) in marching_squares(&f, x0, x1, y0, y1, 220, 160) {
                svg.push_str(&format!(
                    "<line class=\"disc-contour\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" \
                     y2=\"{:.2}\" stroke=\"#cc3333\" stroke-width=\"1\"/>\n",
                    frame.px(ax0),
                    frame.py(ay0),
                    frame.px(ax1),
                    frame.py(ay1)
                ));
            }
        }
    }
    for c in curves {
        if c.xi.is_empty() {
            continue;
        }
        let pts: String = c
            .xi
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    frame.px(p[0]),
                    frame.py(if planar { p[1] } else { 0.0 })
                )
            })
            .collect::<Vec<_>>()
            .join(" ");
        svg.push_str(&format!(
            "<polyline class=\"boundary\" points=\"{pts}\" fill=\"none\" stroke=\"#222222\" \
             stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>\n"
        ));
    }
    for s in &data.samples {
        let y = if planar { s.xi[1] } else { 0.0 };
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.4\" fill=\"#3366cc\" fill-opacity=\"0.45\"/>\n",
            frame.px(s.xi[0]),
            frame.py(y)
        ));
    }
    for c in &data.contacts {
        let y = if planar { c.xi[1] } else { 0.0 };
        svg.push_str(&format!(
            "<circle class=\"contact\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"6\" fill=\"none\" \
             stroke=\"#cc3333\" stroke-width=\"2\"/>\n",
            frame.px(c.xi[0]),
            frame.py(y)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">a0</text>\n",
        SVG_W / 2.0,
        SVG_H - MARGIN / 3.0
    ));
    if planar {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\" transform=\"rotate(-90 {} {})\">a1</text>\n",
            MARGIN / 3.0,
            SVG_H / 2.0,
            MARGIN / 3.0,
            SVG_H / 2.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn draw_axes(svg: &mut String, frame: &Frame, planar: bool) {
    let (left, right) = (MARGIN, SVG_W - MARGIN);
    let (top, bottom) = (MARGIN, SVG_H - MARGIN);
    svg.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"#888888\"/>\n",
        right - left,
        bottom - top
    ));
    for i in 0..=5 {
        let fx = frame.x0 + (frame.x1 - frame.x0) * i as f64 / 5.0;
        let px = frame.px(fx);
        svg.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{bottom}\" x2=\"{px:.1}\" y2=\"{}\" stroke=\"#888888\"/>\n\
             <text x=\"{px:.1}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{fx:.3}</text>\n",
            bottom + 5.0,
            bottom + 20.0
        ));
        if planar {
            let fy = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 5.0;
            let py = frame.py(fy);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py:.1}\" x2=\"{left}\" y2=\"{py:.1}\" stroke=\"#888888\"/>\n\
                 <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
                 font-size=\"11\">{fy:.3}</text>\n",
                left - 5.0,
                left - 8.0,
                py + 4.0
            ));
        }
    }
}

/// Zero-contour segments of f over [x0,x1]×[y0,y1] on an nx×ny cell grid.
fn marching_squares(
    f: &dyn Fn(f64, f64) -> f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
) -> Vec<(f64, f64, f64, f64)> {
    let xs: Vec<f64> = (0..=nx).map(|i| x0 + (x1 - x0) * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| y0 + (y1 - y0) * j as f64 / ny as f64).collect();
    let grid: Vec<Vec<f64>> = xs.iter().map(|&x| ys.iter().map(|&y| f(x, y)).collect()).collect();
    let lerp = |a: f64, b: f64, fa: f64, fb: f64| {
        if (fa - fb).abs() < 1e-300 {
            (a + b) / 2.0
        } else {
            a + (b - a) * fa / (fa - fb)
        }
    };
    let mut segs = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let (fa, fb, fc, fd) = (grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]);
            let code = (usize::from(fa > 0.0))
                | (usize::from(fb > 0.0) << 1)
                | (usize::from(fc > 0.0) << 2)
                | (usize::from(fd > 0.0) << 3);
            if code == 0 || code == 15 {
                continue;
            }
            // Edge midzeros: bottom (a-b), right (b-c), top (d-c), left (a-d).
            let bottom = (lerp(xs[i], xs[i + 1], fa, fb), ys[j]);
            let right = (xs[i + 1], lerp(ys[j], ys[j + 1], fb, fc));
            let top = (lerp(xs[i], xs[i + 1], fd, fc), ys[j + 1]);
            let left = (xs[i], lerp(ys[j], ys[j + 1], fa, fd));
            let mut push = |p: (f64, f64), q: (f64, f64)| segs.push((p.0, p.1, q.0, q.1));
            match code {
                1 | 14 => push(bottom, left),
                2 | 13 => push(bottom, right),
                3 | 12 => push(left, right),
                4 | 11 => push(right, top),
                6 | 9 => push(bottom, top),
                7 | 8 => push(left, top),
                5 | 10 => {
                    // Saddle: disambiguate with the cell center.
                    let cx = (xs[i] + xs[i + 1]) / 2.0;
                    let cy = (ys[j] + ys[j + 1]) / 2.0;
                    let center = f(cx, cy) > 0.0;
                    let same_as_a = center == (fa > 0.0);
                    if (code == 5) == same_as_a {
                        push(bottom, right);
                        push(left, top);
                    } else {
                        push(bottom, left);
                        push(right, top);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charpoly::char_poly;
    use crate::graph::builtin_model;

    fn region_for(name: &str, grid: usize) -> (RegionData, crate::graph::ModelSpec) {
        let m = builtin_model(name).unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let opts = RegionOptions {
            grid,
            ..RegionOptions::default()
        };
        (sample_region(&xi, cp.k, m.domain, &opts), m)
    }

    #[test]
    fn gyroid_region_slice_and_ranges() {
        let (data, _) = region_for("gyroid", 40);
        for s in &data.samples {
            assert_eq!(s.xi[2], -6.0, "slice coordinate must be exact");
        }
        assert!((data.xi_min[0] - (-3.0)).abs() < 1e-9, "{}", data.xi_min[0]);
        assert!((data.xi_max[0] - 9.0).abs() < 1e-9);
        assert!((data.xi_min[1] - (-8.0)).abs() < 1e-9);
        assert!((data.xi_max[1] - 8.0).abs() < 1e-9);
        assert!(data.disc_min >= -1e-9 * data.disc_scale);
    }

    #[test]
    fn gyroid_three_contacts() {
        let (data, _) = region_for("gyroid", 40);
        assert_eq!(data.contacts.len(), 3, "{:?}", data.contacts);
        let expect = [[-3.0, -8.0], [-3.0, 8.0], [9.0, 0.0]];
        for e in &expect {
            assert!(
                data.contacts
                    .iter()
                    .any(|c| (c.xi[0] - e[0]).abs() < 1e-6 && (c.xi[1] - e[1]).abs() < 1e-6),
                "missing contact near {e:?}: {:?}",
                data.contacts
            );
        }
    }

    #[test]
    fn honeycomb_interval() {
        let (data, _) = region_for("honeycomb", 100);
        assert!((data.xi_min[0] - (-9.0)).abs() < 1e-9);
        assert!(data.xi_max[0].abs() < 1e-9, "{}", data.xi_max[0]);
        assert!(data.disc_min >= -1e-9 * data.disc_scale);
    }

    #[test]
    fn diamond_interval_scan() {
        let m = builtin_model("diamond").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let (lo, hi, disc_min, scale) = scan_ranges(&xi, cp.k, m.domain, 60);
        assert!((lo[0] - (-16.0)).abs() < 1e-6, "{lo:?}");
        assert!(hi[0].abs() < 1e-6, "{hi:?}");
        assert!(disc_min >= -1e-9 * scale);
    }

    #[test]
    fn gyroid_jacobian_ranks() {
        let m = builtin_model("gyroid").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let fm = FastMap::new(&xi, cp.k);
        let q = std::f64::consts::FRAC_PI_2;
        assert_eq!(fm.jac_rank(&[q, q, q], 1e-8), 0);
        assert_eq!(fm.jac_rank(&[0.3, 1.1, 2.0], 1e-8), 2);
        assert_eq!(xi.jacobian_rank(&[0.3, 1.1, 2.0], 1e-8), 2);
    }

    #[test]
    fn honeycomb_dirac_rank_zero() {
        let m = builtin_model("honeycomb").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let t = 2.0 * std::f64::consts::PI / 3.0;
        assert_eq!(xi.jacobian_rank(&[t, TAU - t], 1e-6), 0);
    }

    #[test]
    fn boundary_curve_values() {
        let m = builtin_model("gyroid").unwrap();
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let curves = boundary_curves(&m, &xi, 8);
        assert_eq!(curves.len(), 2);
        // Both diagonals start at Ξ(0) = (-3, -8, -6).
        for c in &curves {
            assert!((c.xi[0][0] - (-3.0)).abs() < 1e-12);
            assert!((c.xi[0][1] - (-8.0)).abs() < 1e-12);
        }
        // a=b=c at a=π/2 (index 2 of 8) lands on the double point (9, 0).
        let diag = &curves[0];
        assert!((diag.xi[2][0] - 9.0).abs() < 1e-12);
        assert!(diag.xi[2][1].abs() < 1e-12);
        let other = builtin_model("honeycomb").unwrap();
        assert!(boundary_curves(&other, &xi, 8).is_empty());
    }

    #[test]
    fn refine_at_flags_critical_point() {
        let (mut data, m) = region_for("honeycomb", 30);
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let t = 2.0 * std::f64::consts::PI / 3.0;
        let opts = RegionOptions {
            grid: 30,
            ..RegionOptions::default()
        };
        refine_at(&mut data, &xi, &[t, TAU - t], &opts);
        let s = data.samples.last().unwrap();
        assert!(s.near_disc, "disc {} scale {}", s.disc, data.disc_scale);
        assert!(!data.contacts.is_empty());
    }

    #[test]
    fn csv_export_shape() {
        let (data, m) = region_for("honeycomb", 10);
        let text = export(&data, &[], &m.var_names, ExportFormat::Csv);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "u,v,a0,disc,jac_rank,near_disc");
        assert!(lines.count() >= 100);
        let empty = RegionData {
            k: 2,
            n: 2,
            samples: Vec::new(),
            xi_min: Vec::new(),
            xi_max: Vec::new(),
            disc_min: f64::INFINITY,
            disc_scale: 1.0,
            contacts: Vec::new(),
        };
        let text = export(&empty, &[], &m.var_names, ExportFormat::Csv);
        assert_eq!(text, "u,v,a0,disc,jac_rank,near_disc\r\n");
    }

    #[test]
    fn gyroid_svg_contacts_and_contour() {
        let (data, m) = region_for("gyroid", 40);
        let cp = char_poly(&m.family).unwrap();
        let xi = cp.characteristic_map();
        let curves = boundary_curves(&m, &xi, 64);
        let svg = export(&data, &curves, &m.var_names, ExportFormat::Svg);
        assert_eq!(svg.matches("class=\"contact\"").count(), 3);
        assert!(svg.contains("class=\"disc-contour\""));
        assert_eq!(svg.matches("class=\"boundary\"").count(), 2);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn json_export_round_trip() {
        let (data, _) = region_for("honeycomb", 12);
        let text = export(&data, &[], &[], ExportFormat::Json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], "1");
        assert_eq!(
            v["samples"].as_array().unwrap().len(),
            data.samples.len()
        );
    }

    #[test]
    fn marching_squares_circle() {
        let f = |x: f64, y: f64| x * x + y * y - 1.0;
        let segs = marching_squares(&f, -2.0, 2.0, -2.0, 2.0, 64, 64);
        assert!(!segs.is_empty());
        for (x0, y0, x1, y1) in segs {
            for (x, y) in [(x0, y0), (x1, y1)] {
                let r = (x * x + y * y).sqrt();
                assert!((r - 1.0).abs() < 0.05, "segment endpoint off circle: r={r}");
            }
        }
    }
}
