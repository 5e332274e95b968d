//! Lipschitz-graph domains, normals, cones and clipped quadrature.

pub mod cap;
pub mod domain;
pub mod graph;

pub use cap::{ball_integral, boundary_integral, sphere_cap_quadrature, sphere_integral, CapQuadrature, Side};
pub use domain::{BoundaryPoint, ConeCheck, ConeOrientation, ConeSpec, GraphDomain};
pub use graph::{GraphKind, LipschitzGraph};
