//! Boundary conditions as subspaces of boundary data, constrained cylinder
//! operators, their Fredholm index and the index identities.
//!
//! A constrained operator is the midpoint scheme of a cylinder operator acting on
//! node sections whose end values lie in prescribed subspaces. Its index always
//! equals `dim V - dim W`; the interesting content is that kernels and cokernels
//! computed from singular values agree with this count.

mod checks;
mod condition;
mod green;
mod index;

pub use checks::{
    check_condition_change, check_dual_change, check_independence, check_reduction, check_splitting,
    check_vanishing, ConditionChangeVerdict, IndependenceVerdict, ReductionVerdict, SplittingVerdict,
    VanishingVerdict,
};
pub use condition::{
    adjoint_condition, adjoint_condition_oriented, aps_condition, dual_aps_condition, relative_index,
    transmission_condition, BoundaryCondition, ConditionTag, Side,
};
pub use green::{green_residual_exact, green_residual_rectangle, section_norm};
pub use index::{
    adjoint_bvp, assemble_bvp, assemble_multi, compute_index, ConstrainedOperator, End, EndCondition,
    IndexOptions, IndexReport, IndexRoute, TRANSFER_RANK_TOL,
};
