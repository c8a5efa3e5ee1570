//! Lie-algebra models of g-foliations, weak metric structures on them, and the
//! normalized partial Ricci flow.
//!
//! Every tensor is left-invariant, so everything reduces to constant matrices
//! in the invariant frame `E_0..E_{N-1}`:
//!
//! * [`model`] holds the bracket table, the vertical frame `ξ_1..ξ_p` and the
//!   metric, plus the built-in model families.
//! * [`geometry`] computes the Levi-Civita connection, curvature, the
//!   foliation tensors `h`, `T`, `A_ξ`, `T♯_ξ`, `C_ξ` and partial Ricci
//!   curvature (by two independent routes).
//! * [`structures`] checks the axioms of weak almost contact, weak p-contact,
//!   weak f- and weak para-φ structures and classifies them.
//! * [`flow`] integrates the normalized partial Ricci flow of the horizontal
//!   metric and verifies the retraction onto classical structures.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod structures;

pub use error::{Error, FlowError, GeometryError, ModelError, StructureError};
pub use flow::{
    closed_form_mu, comparison_closed_form, convergence_report, flow_rhs, integrate_flow,
    limit_metric, retract_and_verify, scalar_case_i, FlowConfig, FlowTrajectory, ScalarOdeSpec,
};
pub use geometry::{GeometryReport, PartialRicci};
pub use model::{builtin, builtin_from_ref, load_model, LieFoliationModel};
pub use structures::{classify, Classification, FramedStructure, StructureClass, StructureKind};
