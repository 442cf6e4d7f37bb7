//! Small-time stabilizing feedback for integrator chains, the unicycle and
//! the slider, with the tools to check and simulate them.

pub mod appendix;
pub mod cli;
pub mod error;
pub mod feedback;
pub mod hompow;
pub mod lyapunov;
pub mod plants;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
