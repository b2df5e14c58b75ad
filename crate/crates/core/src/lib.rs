//! ALE simulation of a corotational Oldroyd-B fluid in a domain bounded by a
//! viscoelastic shell, together with the diffusion-free limit system and
//! tools for comparing the two.

pub mod coupled;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod fluid;
pub mod fp_oracle;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod periodic;
pub mod solute;
pub mod structure;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
