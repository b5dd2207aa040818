//! The model triple: structure, parameters and their Dirichlet beliefs.

pub mod format;
pub mod model;
pub mod spec;

pub use format::{
    deserialize_hyperparams, deserialize_model, deserialize_spec, serialize_hyperparams,
    serialize_model, serialize_spec, MODEL_FORMAT,
};
pub use model::{transition_parent_values, GenerativeModel, HyperParams};
pub use spec::{
    StructureBounds, StructureKey, StructureSpec, TransitionEdges, ValidityReport, Violation,
};

use crate::error::Result;

/// Symmetric Dirichlet hyperparameters at `concentration` for every column.
pub fn instantiate_flat(spec: &StructureSpec, concentration: f64) -> Result<HyperParams> {
    HyperParams::flat(spec, concentration)
}

/// Dirichlet-mean model of `h`.
pub fn expected_model(h: &HyperParams) -> Result<GenerativeModel> {
    h.expected_model()
}

/// One-move neighbourhood of `spec`; see [`StructureSpec::neighbors`].
pub fn enumerate_neighbors(spec: &StructureSpec, bounds: &StructureBounds) -> Vec<StructureSpec> {
    spec.neighbors(bounds)
}

pub fn canonical_form(spec: &StructureSpec) -> StructureSpec {
    spec.canonical_form()
}
