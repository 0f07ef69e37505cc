//! Position-based dynamics cloth with kinematic capsule colliders, friction and
//! per-vertex contact forces, plus garment generators and tearing calibration.

mod calibrate;
mod generate;
pub mod io;
mod mesh;
mod solver;

pub use calibrate::{
    calibrate_fmax, probe_patch, probe_push, replay_force_limited, FmaxCalibration, ProbeProtocol, ProbeRun, ReplayResult,
};
pub use generate::{generate_patch, generate_sleeve_garment, generate_tube, SleeveSpec};
pub use mesh::{ClothMaterial, ClothMesh, DistanceConstraint};
pub use solver::{step_cloth, stretch_sweep, ClothParams, ColliderMotion, ContactReport};
