//! SEP targets as conservative linear constraints on the noiseless receive
//! signal, and their assembly into the real-valued sparse system
//! `min ‖x̃‖² s.t. Ax̃ ≤ c, Bx̃ = e`.

mod assemble;
mod geometry;
mod qfunc;

pub use assemble::{assemble_qp, stack, unstack, ConstraintSystem, RowKind, RowLayout, RowProvenance};
pub use geometry::{
    axis_correct_probability, boundary_points, box_region, constraint_region, decision_interval,
    exact_correct_probability, Axis, BoundaryPoint, ConstellationSpec, ConstraintRegion, Equality,
    HalfPlane,
};
pub use qfunc::{
    delta_probability, in_cell_probability, min_scaling_16qam, min_scaling_4qam,
    min_scaling_replica, q_function, q_inverse, solve_delta,
};
