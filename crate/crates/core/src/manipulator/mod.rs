//! Capsule manipulators carrying haptic-sensing spheres: kinematics, force binning,
//! per-sphere commands, weighted IK and the closed control loop.

mod chain;
mod control;
pub mod file;
mod ik;
mod layout;

pub use chain::{JointKind, KinematicChain, Link, Pose};
pub use control::{
    control_step, linear_commands, query_sphere_policies, sphere_observation, ControlConfig, ControlState, Controller, StepFlags,
    TearMonitor,
};
pub use file::{parse_manipulator, read_manipulator, write_manipulator, Manipulator};
pub use ik::{ik_energy, ik_solve, IkConfig, IkResult};
pub use layout::{bin_forces, nearest_sphere, HapticSphere, HapticSphereLayout, SphereCommand, AUTO_SPACING, LEADING_WEIGHT_RATIO};
