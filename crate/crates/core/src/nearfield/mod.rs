//! Fields next to a perfectly conducting particle: the tangential surface current j solves
//! (I + kA) j = −(k/2π)[𝒩, E_exc] on the particle surface, and the field outside is
//! E = E_exc + ∇×∫ g j.

mod current;
mod field;
mod kernel;
mod operator;

pub use current::{current_rhs, solve_current, CurrentOptions, SurfaceCurrent, NEAR_EIGENVALUE_CONDITION};
pub use field::{near_field, near_field_at, near_field_e, scattered_field};
pub use operator::{BoundaryOperatorA, DENSE_PANEL_CAP};
