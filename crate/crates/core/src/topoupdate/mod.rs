//! Low-rank topology modifications of the DC+ model.
//!
//! Every modification is expressed as `ΔM = S R` and applied to an
//! [`InverseHandle`] through the Woodbury identity, so the base model is
//! factored once. Covered: branch outages and parameter changes (single and
//! simultaneous), 2×2 line modification distribution factors, closing a
//! zero-impedance coupler, and splitting a bus into two busbars.

mod handle;
mod lmdf;
mod split;
mod switch;
mod update;

pub use handle::{InverseHandle, DEFAULT_MAX_DEPTH};
pub use lmdf::{
    admissibility_warnings, d_matrix, line_modification_update, lmdf, LmdfContext, LmdfMatrix, LmdfTolerance, Mat2,
};
pub use split::{
    merge_contraction, open_split, pad_for_split, split_layer, BranchAssignment, Busbar, SplitAssignment,
    SplitContext,
};
pub use switch::{close_switch, coupler_update, unit_coupler_factors};
pub use update::{
    apply_modification, block_delta, branch_delta, multi_branch_delta, state_delta, woodbury_update,
    LowRankUpdate, Modification, SparseVec,
};
