//! Electric and magnetic polarizability tensors from the iterated boundary-integral series.

mod chain;
mod contrast;
mod operators;
mod tensor;

pub use chain::{compute_b_tensor, BChain, BChainTensor, OuterWeight};
pub use contrast::{MaterialContrast, SKIN_DEPTH_RATIO};
pub use operators::{psi_kernel, PanelOperators, DEFAULT_PANEL_BUDGET};
pub use tensor::{alpha_approx, ball_polarizability, beta_tensor, induced_moments, PolarizabilityTensor};
pub(crate) use tensor::write_complex_rows;
