//! Exact characteristic polynomials of Harper-type operator families on
//! quotient graphs, pulled back through the miniversal unfolding of the
//! A_{k-1} singularity: critical-point search on the spectrum, Dirac-point
//! classification, stratified fiber analysis, and characteristic-region
//! sampling/export.

pub mod charpoly;
pub mod classifier;
pub mod critical;
pub mod graph;
pub mod rational;
pub mod region;
pub mod report;
pub mod singularity;
pub mod trigpoly;

pub use charpoly::{char_poly, cycle_expansion, CharPolyFamily, CharacteristicMap};
pub use classifier::{Classification, Signature};
pub use critical::{find_critical_points, FinderOptions, SingularLocus};
pub use graph::{builtin_model, harper_hamiltonian, HamiltonianFamily, ModelSpec, QuotientGraph};
pub use singularity::{discriminant, Stratum, UnfoldingPoint};
pub use trigpoly::{Backend, TrigPoly};
