//! Effective-medium limit of a dense cloud of small particles: existence diagnostics, the
//! potential q(y, β) = N(y)𝒮(β) and the self-consistent field equation on a voxel grid.

mod density;
mod diagnostics;
mod solve;

pub use density::{read_density_csv, DensityField, DirectionLookup, GridMeta, PotentialQ, VoxelGrid, q_from_density};
pub use diagnostics::{limit_diagnostics, LimitDiagnostics, LimitRegime};
pub use solve::{solve_effective_field, ball_green_integral, EffectiveField, EffectiveOptions, EffectiveRoute};
