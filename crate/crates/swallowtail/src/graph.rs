//! Decorated quotient graphs and the Harper Hamiltonian family they induce.
//!
//! A quotient graph stores one directed representative per undirected edge;
//! the reversed edge implicitly carries the negated translation vector.
//! Spanning-tree edges are gauge-fixed to weight 1 (translation vector 0).

use crate::rational::GaussRat;
use crate::trigpoly::{Backend, Frequency, TrigPoly};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("vertex index {0} out of range (k = {1})")]
    VertexOutOfRange(usize, usize),
    #[error("edge translation vector has length {0}, expected {1}")]
    BadFrequencyLength(usize, usize),
    #[error("underlying graph is not connected")]
    Disconnected,
    #[error("spanning tree must have exactly {expected} edges, found {found}")]
    TreeSize { expected: usize, found: usize },
    #[error("tree edges do not form an acyclic spanning tree")]
    TreeNotSpanning,
    #[error("tree edge ({0},{1}) carries a nonzero translation vector")]
    TreeEdgeNonzeroWeight(usize, usize),
    #[error("loop edge ({0},{0}) cannot be a tree edge")]
    LoopInTree(usize),
    #[error("unknown model {0:?}; available: {1}")]
    UnknownModel(String, String),
    #[error("invalid model file: {0}")]
    Parse(String),
    #[error("operation requires a graph with no small loops and simple lacing")]
    NotSimplyLaced,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub m: Frequency,
    #[serde(default)]
    pub tree: bool,
}

/// Finite multigraph with per-edge translation vectors and a rooted spanning
/// tree (root = vertex 0).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientGraph {
    pub name: String,
    pub k: usize,
    pub n: usize,
    pub edges: Vec<Edge>,
}

impl QuotientGraph {
    pub fn new(name: &str, k: usize, n: usize, edges: Vec<Edge>) -> Result<Self, ModelError> {
        let g = QuotientGraph {
            name: name.to_string(),
            k,
            n,
            edges,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for e in &self.edges {
            if e.from >= self.k {
                return Err(ModelError::VertexOutOfRange(e.from, self.k));
            }
            if e.to >= self.k {
                return Err(ModelError::VertexOutOfRange(e.to, self.k));
            }
            if e.m.len() != self.n {
                return Err(ModelError::BadFrequencyLength(e.m.len(), self.n));
            }
            if e.tree && e.m.iter().any(|&x| x != 0) {
                return Err(ModelError::TreeEdgeNonzeroWeight(e.from, e.to));
            }
            if e.tree && e.from == e.to {
                return Err(ModelError::LoopInTree(e.from));
            }
        }
        // Connectivity of the underlying undirected graph.
        let mut seen = vec![false; self.k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for e in &self.edges {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if a == v && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(ModelError::Disconnected);
        }
        // Tree edges: exactly k-1, acyclic, spanning (union-find).
        let tree: Vec<&Edge> = self.edges.iter().filter(|e| e.tree).collect();
        if tree.len() != self.k - 1 {
            return Err(ModelError::TreeSize {
                expected: self.k - 1,
                found: tree.len(),
            });
        }
        let mut parent: Vec<usize> = (0..self.k).collect();
        fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for e in &tree {
            let a = find(&mut parent, e.from);
            let b = find(&mut parent, e.to);
            if a == b {
                return Err(ModelError::TreeNotSpanning);
            }
            parent[a] = b;
        }
        Ok(())
    }

    pub fn has_small_loops(&self) -> bool {
        self.edges.iter().any(|e| e.from == e.to)
    }

    /// Number of undirected edge classes of the simplified graph (parallel
    /// edges between the same vertex pair merged), ignoring loops.
    pub fn simple_edge_count(&self) -> usize {
        let mut classes: std::collections::BTreeSet<(usize, usize)> = Default::default();
        for e in &self.edges {
            if e.from == e.to {
                continue;
            }
            let pair = (e.from.min(e.to), e.from.max(e.to));
            classes.insert(pair);
        }
        classes.len()
    }

    /// Flags `(no_small_loops, simply_laced)` plus the undirected edge count
    /// of the simplified graph.
    pub fn simple_laced_no_loops(&self) -> (bool, bool, usize) {
        let no_loops = !self.has_small_loops();
        let non_loop_edges = self.edges.iter().filter(|e| e.from != e.to).count();
        let simple = self.simple_edge_count();
        let simply_laced = no_loops && non_loop_edges == simple;
        (no_loops, simply_laced, simple)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let g: QuotientGraph =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

/// The Harper family H(b): a Hermitian k x k matrix of exact trig polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianFamily {
    pub k: usize,
    pub n: usize,
    pub backend: Backend,
    pub entries: Vec<Vec<TrigPoly>>,
}

impl HamiltonianFamily {
    pub fn zero(k: usize, n: usize, backend: Backend) -> Self {
        HamiltonianFamily {
            k,
            n,
            backend,
            entries: vec![vec![TrigPoly::zero(n, backend); k]; k],
        }
    }

    /// Symbolic Hermiticity check: `H[j][i] == conj(H[i][j])` exactly.
    pub fn is_hermitian(&self) -> bool {
        for i in 0..self.k {
            for j in 0..self.k {
                if self.entries[j][i] != self.entries[i][j].conjugate() {
                    return false;
                }
            }
        }
        true
    }

    pub fn trace(&self) -> TrigPoly {
        let mut t = TrigPoly::zero(self.n, self.backend);
        for i in 0..self.k {
            t = t.add(&self.entries[i][i]).expect("same ring");
        }
        t
    }

    pub fn evaluate(&self, b: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.k, self.k, |i, j| self.entries[i][j].evaluate(b))
    }
}

/// Builds H from the graph: `H_ij = Σ_{edges i→j} e^{i m·b}`, Hermitian by
/// construction. A loop edge contributes `e^{i m·b} + e^{-i m·b}` to the
/// diagonal (the two orientations of the loop).
pub fn harper_hamiltonian(g: &QuotientGraph) -> HamiltonianFamily {
    let mut h = HamiltonianFamily::zero(g.k, g.n, Backend::Torus);
    for e in &g.edges {
        let w = TrigPoly::phase(g.n, e.m.clone());
        if e.from == e.to {
            let d = w.add(&w.conjugate()).expect("same ring");
            h.entries[e.from][e.from] = h.entries[e.from][e.from].add(&d).expect("same ring");
        } else {
            h.entries[e.from][e.to] = h.entries[e.from][e.to].add(&w).expect("same ring");
            h.entries[e.to][e.from] = h.entries[e.to][e.from]
                .add(&w.conjugate())
                .expect("same ring");
        }
    }
    debug_assert!(h.is_hermitian());
    h
}

/// Where the family lives: the torus (period 2π per axis) or a box in R^n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Torus,
    Box { half_width: f64 },
}

/// A zoo entry: the Hamiltonian family plus presentation metadata.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub family: HamiltonianFamily,
    pub graph: Option<QuotientGraph>,
    pub var_names: Vec<String>,
    pub domain: Domain,
}

impl ModelSpec {
    pub fn from_graph(g: QuotientGraph, var_names: &[&str]) -> Self {
        let family = harper_hamiltonian(&g);
        ModelSpec {
            name: g.name.clone(),
            family,
            graph: Some(g),
            var_names: var_names.iter().map(|s| s.to_string()).collect(),
            domain: Domain::Torus,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.var_names.iter().map(|s| s.as_str()).collect()
    }
}

pub const MODEL_NAMES: &[&str] = &[
    "gyroid",
    "honeycomb",
    "diamond",
    "p_lattice",
    "triangle",
    "triangle_ab",
    "triangle_abc",
    "triangle_abd",
    "triangle_abcd",
    "vnw3",
    "vnw4",
];

fn edge(from: usize, to: usize, m: &[i64], tree: bool) -> Edge {
    Edge {
        from,
        to,
        m: m.to_vec(),
        tree,
    }
}

/// Built-in model zoo.
pub fn builtin_model(name: &str) -> Result<ModelSpec, ModelError> {
    match name {
        "gyroid" => {
            // Full square K4; H12 = A, H13 = B*, H23 = C.
            let g = QuotientGraph::new(
                "gyroid",
                4,
                3,
                vec![
                    edge(0, 1, &[0, 0, 0], true),
                    edge(0, 2, &[0, 0, 0], true),
                    edge(0, 3, &[0, 0, 0], true),
                    edge(1, 2, &[1, 0, 0], false),
                    edge(3, 1, &[0, 1, 0], false),
                    edge(2, 3, &[0, 0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["a", "b", "c"]))
        }
        "honeycomb" => {
            let g = QuotientGraph::new(
                "honeycomb",
                2,
                2,
                vec![
                    edge(0, 1, &[0, 0], true),
                    edge(0, 1, &[1, 0], false),
                    edge(0, 1, &[0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["u", "v"]))
        }
        "diamond" => {
            let g = QuotientGraph::new(
                "diamond",
                2,
                3,
                vec![
                    edge(0, 1, &[0, 0, 0], true),
                    edge(0, 1, &[1, 0, 0], false),
                    edge(0, 1, &[0, 1, 0], false),
                    edge(0, 1, &[0, 0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["u", "v", "w"]))
        }
        "p_lattice" => {
            let g = QuotientGraph::new(
                "p_lattice",
                1,
                3,
                vec![
                    edge(0, 0, &[1, 0, 0], false),
                    edge(0, 0, &[0, 1, 0], false),
                    edge(0, 0, &[0, 0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["u", "v", "w"]))
        }
        "triangle" => {
            let g = QuotientGraph::new(
                "triangle",
                3,
                1,
                vec![
                    edge(0, 1, &[0], true),
                    edge(0, 2, &[0], true),
                    edge(1, 2, &[1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["a"]))
        }
        "triangle_ab" => {
            // One double bond: H12 = A + B.
            let g = QuotientGraph::new(
                "triangle_ab",
                3,
                2,
                vec![
                    edge(0, 1, &[0, 0], true),
                    edge(0, 2, &[0, 0], true),
                    edge(1, 2, &[1, 0], false),
                    edge(1, 2, &[0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["a", "b"]))
        }
        "triangle_abc" => {
            // One triple bond: H12 = A + B + C.
            let g = QuotientGraph::new(
                "triangle_abc",
                3,
                3,
                vec![
                    edge(0, 1, &[0, 0, 0], true),
                    edge(0, 2, &[0, 0, 0], true),
                    edge(1, 2, &[1, 0, 0], false),
                    edge(1, 2, &[0, 1, 0], false),
                    edge(1, 2, &[0, 0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["a", "b", "c"]))
        }
        "triangle_abd" => {
            // Two double bonds: H12 = A + B, H02 = 1 + D.
            let g = QuotientGraph::new(
                "triangle_abd",
                3,
                3,
                vec![
                    edge(0, 1, &[0, 0, 0], true),
                    edge(0, 2, &[0, 0, 0], true),
                    edge(1, 2, &[1, 0, 0], false),
                    edge(1, 2, &[0, 1, 0], false),
                    edge(0, 2, &[0, 0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["a", "b", "d"]))
        }
        "triangle_abcd" => {
            // Three double bonds: H12 = A + B, H02 = 1 + C, H01 = 1 + D.
            let g = QuotientGraph::new(
                "triangle_abcd",
                3,
                4,
                vec![
                    edge(0, 1, &[0, 0, 0, 0], true),
                    edge(0, 2, &[0, 0, 0, 0], true),
                    edge(1, 2, &[1, 0, 0, 0], false),
                    edge(1, 2, &[0, 1, 0, 0], false),
                    edge(0, 2, &[0, 0, 1, 0], false),
                    edge(0, 1, &[0, 0, 0, 1], false),
                ],
            )?;
            Ok(ModelSpec::from_graph(g, &["a", "b", "c", "d"]))
        }
        "vnw3" => Ok(vnw_family(false)),
        "vnw4" => Ok(vnw_family(true)),
        other => Err(ModelError::UnknownModel(
            other.to_string(),
            MODEL_NAMES.join(", "),
        )),
    }
}

/// The Pauli-matrix families over R^3 / R^4:
/// `H = a σx + b σy + c σz (+ d Id)`, on the affine backend.
fn vnw_family(with_identity: bool) -> ModelSpec {
    let n = if with_identity { 4 } else { 3 };
    let a = TrigPoly::affine_var(n, 0);
    let b = TrigPoly::affine_var(n, 1);
    let c = TrigPoly::affine_var(n, 2);
    let ib = b.scale(&GaussRat::i());
    let mut h = HamiltonianFamily::zero(2, n, Backend::Affine);
    // [[c, a - i b], [a + i b, -c]]
    h.entries[0][0] = c.clone();
    h.entries[1][1] = c.neg();
    h.entries[0][1] = a.sub(&ib).unwrap();
    h.entries[1][0] = a.add(&ib).unwrap();
    let (name, vars): (&str, Vec<&str>) = if with_identity {
        let d = TrigPoly::affine_var(n, 3);
        h.entries[0][0] = h.entries[0][0].add(&d).unwrap();
        h.entries[1][1] = h.entries[1][1].add(&d).unwrap();
        ("vnw4", vec!["a", "b", "c", "d"])
    } else {
        ("vnw3", vec!["a", "b", "c"])
    };
    debug_assert!(h.is_hermitian());
    ModelSpec {
        name: name.to_string(),
        family: h,
        graph: None,
        var_names: vars.iter().map(|s| s.to_string()).collect(),
        domain: Domain::Box { half_width: 2.0 },
    }
}
