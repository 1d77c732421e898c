//! Differentiable garment draping.
//!
//! Garments are sewing patterns (2D panels with seams) simulated in 3D with
//! XPBD on a skinned parametric body. The backward pass differentiates the
//! recorded Gauss-Seidel projections exactly, which gives gradients of a
//! garment-matching loss with respect to the pattern (through a mean-value
//! control cage), the cloth material and the body shape and pose.

pub mod adjoint;
pub mod body;
pub mod cage;
pub mod dual;
pub mod error;
pub mod loss;
pub mod math;
pub mod optim;
pub mod pattern;
pub mod scenes;
pub mod sim;

pub use error::{Error, Result};
