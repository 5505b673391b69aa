//! End-to-end analysis pipeline and its serializable report.

use crate::charpoly::{char_poly, edge_count_identity, CharPolyError, CharPolyFamily};
use crate::critical::{
    find_critical_points, verify_discriminant_consistency, ConsistencyRecord, CriticalPoint,
    FinderDiagnostics, FinderOptions, LocusComponent,
};
use crate::classifier::Classification;
use crate::graph::{ModelError, ModelSpec};
use crate::region::{
    boundary_curves, refine_at, sample_region, BoundaryCurve, Contact, RegionData, RegionOptions,
};
use crate::trigpoly::TrigPolyRepr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    CharPoly(#[from] CharPolyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeCountCheck {
    pub holds: bool,
    pub expected: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionSummary {
    pub grid: usize,
    pub xi_min: Vec<f64>,
    pub xi_max: Vec<f64>,
    pub disc_min: f64,
    pub disc_scale: f64,
    pub contacts: Vec<Contact>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub version: String,
    pub model: String,
    pub k: usize,
    pub n: usize,
    pub char_poly_rendered: String,
    /// Coefficients a_0 .. a_{k-1} of P, exact.
    pub coefficients: Vec<TrigPolyRepr>,
    /// Shifted coefficients â_0 .. â_{k-2}, exact.
    pub shifted_coefficients: Vec<TrigPolyRepr>,
    pub traceless: bool,
    pub edge_count: Option<EdgeCountCheck>,
    pub critical_points: Vec<CriticalPoint>,
    pub components: Vec<LocusComponent>,
    pub dirac_count: usize,
    pub consistency: Vec<ConsistencyRecord>,
    pub region: RegionSummary,
    pub diagnostics: FinderDiagnostics,
    pub finder_options: FinderOptions,
    pub region_options: RegionOptions,
}

/// Full pipeline on one model: exact characteristic polynomial, critical
/// points, classification, region summary, and consistency records.
pub fn analyze(
    model: &ModelSpec,
    finder: &FinderOptions,
    region_opts: &RegionOptions,
) -> Result<AnalysisReport, PipelineError> {
    let cp = char_poly(&model.family)?;
    let locus = find_critical_points(&cp, Some(&model.family), model.domain, finder);
    let xi = cp.characteristic_map();
    let mut region = sample_region(&xi, cp.k, model.domain, region_opts);
    for p in &locus.points {
        refine_at(&mut region, &xi, &p.b, region_opts);
    }
    let consistency = verify_discriminant_consistency(&locus, &xi, cp.k, 1e-8);
    let edge_count = model
        .graph
        .as_ref()
        .and_then(|g| edge_count_identity(g, &cp).ok())
        .map(|(holds, expected)| EdgeCountCheck { holds, expected });
    Ok(AnalysisReport {
        schema: SCHEMA_VERSION.to_string(),
        version: TOOL_VERSION.to_string(),
        model: model.name.clone(),
        k: cp.k,
        n: cp.n,
        char_poly_rendered: cp.render(&model.names()),
        coefficients: cp.coeffs.iter().map(|c| c.to_repr()).collect(),
        shifted_coefficients: cp.shifted.iter().map(|c| c.to_repr()).collect(),
        traceless: cp.is_traceless(),
        edge_count,
        dirac_count: locus
            .points
            .iter()
            .filter(|p| p.classification == Classification::Dirac)
            .count(),
        critical_points: locus.points,
        components: locus.components,
        consistency,
        region: RegionSummary {
            grid: region_opts.grid,
            xi_min: region.xi_min.clone(),
            xi_max: region.xi_max.clone(),
            disc_min: region.disc_min,
            disc_scale: region.disc_scale,
            contacts: region.contacts.clone(),
        },
        diagnostics: locus.diagnostics,
        finder_options: *finder,
        region_options: *region_opts,
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-readable summary for terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "model {}  (k = {}, n = {})\n",
            self.model, self.k, self.n
        ));
        out.push_str(&format!("P(b, z) = {}\n", self.char_poly_rendered));
        out.push_str(&format!("traceless: {}\n", self.traceless));
        if let Some(ec) = &self.edge_count {
            out.push_str(&format!(
                "edge-count identity (shifted a_{} = {}): {}\n",
                self.k - 2,
                ec.expected,
                if ec.holds { "holds" } else { "VIOLATED" }
            ));
        }
        if self.critical_points.is_empty() {
            out.push_str("no singularities\n");
        } else {
            out.push_str(&format!(
                "{} critical point(s), {} dirac, {} component(s)\n",
                self.critical_points.len(),
                self.dirac_count,
                self.components.len()
            ));
            for p in &self.critical_points {
                let b: Vec<String> = p.b.iter().map(|v| format!("{v:.6}")).collect();
                out.push_str(&format!(
                    "  b = ({}), z = {:.6}  {:?}  signature ({},{},{})  stratum {}  dim {}{}\n",
                    b.join(", "),
                    p.z,
                    p.classification,
                    p.signature.minus,
                    p.signature.zero,
                    p.signature.plus,
                    p.stratum.label(),
                    p.locus_dim_estimate,
                    if p.classification == Classification::Dirac && p.tilt_free {
                        "  tilt-free"
                    } else {
                        ""
                    }
                ));
            }
        }
        let fmt_vec = |v: &[f64]| {
            let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
            format!("({})", parts.join(", "))
        };
        out.push_str(&format!(
            "region: xi range {} .. {}, min disc {:.3e}, {} contact(s)\n",
            fmt_vec(&self.region.xi_min),
            fmt_vec(&self.region.xi_max),
            self.region.disc_min,
            self.region.contacts.len()
        ));
        out.push_str(&format!(
            "diagnostics: {} seeds, {} converged, {} on-level, {} unique\n",
            self.diagnostics.seeds,
            self.diagnostics.converged,
            self.diagnostics.filtered,
            self.diagnostics.deduped
        ));
        out
    }
}

/// Region pipeline for the `region` subcommand: samples plus boundary-curve
/// overlays.
pub fn region_data(
    model: &ModelSpec,
    opts: &RegionOptions,
) -> Result<(RegionData, Vec<BoundaryCurve>, CharPolyFamily), PipelineError> {
    let cp = char_poly(&model.family)?;
    let xi = cp.characteristic_map();
    let data = sample_region(&xi, cp.k, model.domain, opts);
    let curves = boundary_curves(model, &xi, 256);
    Ok((data, curves, cp))
}
