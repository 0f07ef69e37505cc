//! Haptic navigation through deformable garments: funnel-world policy
//! learning, position-based cloth simulation and manipulator dressing control.

pub mod cloth;
pub mod dressing;
pub mod config;
pub mod error;
pub mod funnel_env;
pub mod geom;
pub mod manipulator;
pub mod par;
pub mod policy;
pub mod seed;
pub mod trpo;

pub use error::{Error, Result};
