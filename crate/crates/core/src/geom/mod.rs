//! Geometry shared by every other module: vectors, rotations, capsules, the
//! training funnel and guiding-path splines. Everything here is pure.

mod capsule;
mod funnel;
mod rotation;
mod spline;
mod vec3;

pub use capsule::{Capsule, CapsuleContact};
pub use funnel::{FunnelContact, FunnelSurface, Penetration};
pub use rotation::Rotation;
pub use spline::{spline_from_centroids, Spline};
pub use vec3::Vec3;
