//! Command-line front end: model zoo listing, full analysis, region export,
//! and band spectra along base paths.

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use swallowtail::charpoly::char_poly;
use swallowtail::classifier::{bands_along_path, gyroid_diagonal_closed_form};
use swallowtail::critical::FinderOptions;
use swallowtail::graph::{builtin_model, Domain, ModelSpec, QuotientGraph, MODEL_NAMES};
use swallowtail::region::{export, ExportFormat, RegionOptions};
use swallowtail::report::{analyze, region_data};
use swallowtail::trigpoly::{Backend, TrigPoly, TrigPolyRepr};

const EXIT_USAGE: u8 = 2;
const EXIT_MODEL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "swallowtail",
    version,
    about = "Spectral degeneracies of Harper operator families via the A_{k-1} unfolding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List built-in models, or dump one as a reloadable JSON model file.
    Models {
        /// Write the named model's JSON definition to stdout.
        #[arg(long)]
        dump: Option<String>,
    },
    /// Run the full pipeline on a model: exact characteristic polynomial,
    /// critical points, classification, region summary.
    Analyze {
        /// Built-in model name or path to a model JSON file.
        model: String,
        /// Seed grid points per base axis.
        #[arg(long, default_value_t = FinderOptions::default().grid)]
        grid: usize,
        #[arg(long, default_value_t = FinderOptions::default().grad_tol)]
        grad_tol: f64,
        #[arg(long, default_value_t = FinderOptions::default().val_tol)]
        val_tol: f64,
        /// Write the JSON report here in addition to the text summary.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sample the characteristic region and export it.
    Region {
        model: String,
        #[arg(long, default_value_t = RegionOptions::default().grid)]
        grid: usize,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        /// Output file; defaults to <model>-region.<format>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Band energies along a path in the base.
    Spectrum {
        model: String,
        /// `diag` for the full diagonal, or `x1,..,xn;y1,..,yn` waypoints.
        #[arg(long, default_value = "diag")]
        path: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Output CSV file; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Reloadable model file: quotient graph when one exists, otherwise the
/// explicit entry matrix.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    name: String,
    k: usize,
    n: usize,
    backend: Backend,
    var_names: Vec<String>,
    domain: Domain,
    graph: Option<QuotientGraph>,
    entries: Vec<Vec<TrigPolyRepr>>,
}

impl ModelFile {
    fn from_spec(m: &ModelSpec) -> Self {
        ModelFile {
            name: m.name.clone(),
            k: m.family.k,
            n: m.family.n,
            backend: m.family.backend,
            var_names: m.var_names.clone(),
            domain: m.domain,
            graph: m.graph.clone(),
            entries: m
                .family
                .entries
                .iter()
                .map(|row| row.iter().map(|e| e.to_repr()).collect())
                .collect(),
        }
    }

    fn into_spec(self) -> Result<ModelSpec, String> {
        if let Some(g) = self.graph {
            g.validate().map_err(|e| e.to_string())?;
            let names: Vec<&str> = self.var_names.iter().map(|s| s.as_str()).collect();
            let mut spec = ModelSpec::from_graph(g, &names);
            spec.name = self.name;
            spec.domain = self.domain;
            return Ok(spec);
        }
        let mut entries = Vec::new();
        for row in &self.entries {
            let mut out = Vec::new();
            for repr in row {
                out.push(TrigPoly::from_repr(repr)?);
            }
            entries.push(out);
        }
        let family = swallowtail::graph::HamiltonianFamily {
            k: self.k,
            n: self.n,
            backend: self.backend,
            entries,
        };
        if !family.is_hermitian() {
            return Err("model file entries are not Hermitian".into());
        }
        Ok(ModelSpec {
            name: self.name,
            family,
            graph: None,
            var_names: self.var_names,
            domain: self.domain,
        })
    }
}

fn resolve_model(name: &str) -> Result<ModelSpec, (u8, String)> {
    if let Ok(m) = builtin_model(name) {
        return Ok(m);
    }
    let path = Path::new(name);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| (EXIT_IO, format!("cannot read {name}: {e}")))?;
        // Accept a full model file or a bare quotient graph.
        if let Ok(mf) = serde_json::from_str::<ModelFile>(&text) {
            return mf.into_spec().map_err(|e| (EXIT_MODEL, e));
        }
        let g = QuotientGraph::from_json(&text)
            .map_err(|e| (EXIT_MODEL, format!("invalid model file {name}: {e}")))?;
        let names: Vec<String> = (1..=g.n).map(|i| format!("b{i}")).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        return Ok(ModelSpec::from_graph(g, &name_refs));
    }
    Err((
        EXIT_MODEL,
        format!(
            "unknown model `{name}`; available: {}",
            MODEL_NAMES.join(", ")
        ),
    ))
}

fn cmd_models(dump: Option<String>) -> Result<(), (u8, String)> {
    match dump {
        None => {
            for name in MODEL_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Some(name) => {
            let m = builtin_model(&name).map_err(|_| {
                (
                    EXIT_MODEL,
                    format!(
                        "unknown model `{name}`; available: {}",
                        MODEL_NAMES.join(", ")
                    ),
                )
            })?;
            let text = serde_json::to_string_pretty(&ModelFile::from_spec(&m))
                .expect("model serializes");
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_analyze(
    model: &str,
    grid: usize,
    grad_tol: f64,
    val_tol: f64,
    json: Option<PathBuf>,
) -> Result<(), (u8, String)> {
    if grid < 2 {
        return Err((EXIT_USAGE, "--grid must be at least 2".into()));
    }
    let m = resolve_model(model)?;
    let finder = FinderOptions {
        grid,
        grad_tol,
        val_tol,
        ..FinderOptions::default()
    };
    let region_opts = RegionOptions::default();
    let report =
        analyze(&m, &finder, &region_opts).map_err(|e| (EXIT_MODEL, e.to_string()))?;
    print!("{}", report.render_text());
    if let Some(path) = json {
        std::fs::write(&path, report.to_json())
            .map_err(|e| (EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_region(
    model: &str,
    grid: usize,
    format: ExportFormat,
    out: Option<PathBuf>,
) -> Result<(), (u8, String)> {
    if grid < 2 {
        return Err((EXIT_USAGE, "--grid must be at least 2".into()));
    }
    let m = resolve_model(model)?;
    let opts = RegionOptions {
        grid,
        ..RegionOptions::default()
    };
    let (data, curves, _) = region_data(&m, &opts).map_err(|e| (EXIT_MODEL, e.to_string()))?;
    let content = export(&data, &curves, &m.var_names, format);
    let ext = match format {
        ExportFormat::Csv => "csv",
        ExportFormat::Svg => "svg",
        ExportFormat::Json => "json",
    };
    let path = out.unwrap_or_else(|| PathBuf::from(format!("{}-region.{ext}", m.name)));
    std::fs::write(&path, content)
        .map_err(|e| (EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
    println!(
        "wrote {} ({} samples, {} contacts)",
        path.display(),
        data.samples.len(),
        data.contacts.len()
    );
    Ok(())
}

fn parse_waypoints(spec: &str, n: usize, domain: Domain) -> Result<Vec<Vec<f64>>, String> {
    if spec == "diag" {
        let end = match domain {
            Domain::Torus => TAU,
            Domain::Box { half_width } => half_width,
        };
        let start = match domain {
            Domain::Torus => 0.0,
            Domain::Box { half_width } => -half_width,
        };
        return Ok(vec![vec![start; n], vec![end; n]]);
    }
    let points: Result<Vec<Vec<f64>>, String> = spec
        .split(';')
        .map(|chunk| {
            let coords: Result<Vec<f64>, String> = chunk
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("bad coordinate `{t}` in path"))
                })
                .collect();
            let coords = coords?;
            if coords.len() != n {
                return Err(format!(
                    "waypoint `{chunk}` has {} coordinates, model base has {n}",
                    coords.len()
                ));
            }
            Ok(coords)
        })
        .collect();
    let points = points?;
    if points.len() < 2 {
        return Err("path needs at least two waypoints (or `diag`)".into());
    }
    Ok(points)
}

fn cmd_spectrum(
    model: &str,
    path_spec: &str,
    samples: usize,
    out: Option<PathBuf>,
) -> Result<(), (u8, String)> {
    if samples == 0 {
        return Err((EXIT_USAGE, "--samples must be positive".into()));
    }
    let m = resolve_model(model)?;
    let cp = char_poly(&m.family).map_err(|e| (EXIT_MODEL, e.to_string()))?;
    let waypoints =
        parse_waypoints(path_spec, cp.n, m.domain).map_err(|e| (EXIT_USAGE, e))?;
    let gyroid_diag = m.name == "gyroid" && path_spec == "diag";
    let mut rows: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let legs = waypoints.len() - 1;
    let mut t_acc = 0.0;
    for (li, pair) in waypoints.windows(2).enumerate() {
        let per_leg = if li + 1 == legs {
            samples - (samples / legs) * (legs - 1)
        } else {
            samples / legs
        };
        let bands = bands_along_path(&cp, Some(&m.family), &pair[0], &pair[1], per_leg.max(1));
        let leg_len: f64 = pair[0]
            .iter()
            .zip(&pair[1])
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        let count = bands.len();
        for (si, (b, vals)) in bands.into_iter().enumerate() {
            let frac = if count <= 1 {
                0.0
            } else {
                si as f64 / (count - 1) as f64
            };
            rows.push((t_acc + frac * leg_len, b, vals));
        }
        t_acc += leg_len;
    }
    let mut text = String::new();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(m.var_names.iter().cloned());
    header.extend((1..=cp.k).map(|i| format!("band{i}")));
    if gyroid_diag {
        header.extend((1..=4).map(|i| format!("closed_form{i}")));
    }
    text.push_str(&header.join(","));
    text.push_str("\r\n");
    for (t, b, vals) in &rows {
        let mut row: Vec<String> = vec![format!("{t:.12}")];
        row.extend(b.iter().map(|v| format!("{v:.12}")));
        row.extend(vals.iter().map(|v| format!("{v:.12}")));
        if gyroid_diag {
            let mut cf = gyroid_diagonal_closed_form(b[0]);
            cf.sort_by(|a, b| a.partial_cmp(b).unwrap());
            row.extend(cf.iter().map(|v| format!("{v:.12}")));
        }
        text.push_str(&row.join(","));
        text.push_str("\r\n");
    }
    match out {
        Some(path) => {
            std::fs::write(&path, text)
                .map_err(|e| (EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SWALLOWTAIL_THREADS") {
        if let Ok(count) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(count.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Models { dump } => cmd_models(dump),
        Command::Analyze {
            model,
            grid,
            grad_tol,
            val_tol,
            json,
        } => cmd_analyze(&model, grid, grad_tol, val_tol, json),
        Command::Region {
            model,
            grid,
            format,
            out,
        } => cmd_region(&model, grid, format, out),
        Command::Spectrum {
            model,
            path,
            samples,
            out,
        } => cmd_spectrum(&model, &path, samples, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
