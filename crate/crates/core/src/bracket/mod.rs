//! Polynomial vector fields, Lie brackets, iterated commutators and the
//! growth analysis of a frame at a point.

mod field;
mod frame;
mod growth;

pub use field::{lie_bracket, CompiledField, VectorField};
pub use frame::{CompiledFrame, Frame, FrameJson, Metric, MetricF64, MultiIndex};
pub use growth::{
    adapted_basis, condition_13_from_dims, equiregularity, growth_report, iterated_commutator, layer_at,
    layer_dims_f64, weight_gap_check, weights_satisfy_gap, AdaptedBasis, CommutatorTable, EquiregularityReport,
    EquiregularitySample, GrowthReport, DEFAULT_CAP, FLOAT_RANK_TOL,
};

#[cfg(test)]
mod tests;
