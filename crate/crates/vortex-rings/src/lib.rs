//! Giant vortex and vortex-ring states of a rotating condensate in a flat
//! disc trap, close to the rotation speed where bulk vortices disappear.

pub mod cli;
pub mod cost;
pub mod electro;
pub mod error;
pub mod giant_vortex;
pub mod gp2d;
pub mod numerics;
pub mod params;
pub mod tf;
pub mod trial;

pub use error::{Error, Result};
