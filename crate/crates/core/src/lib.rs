//! Perception and planning for a tethered team of hopping climbing robots.
//!
//! The pipeline turns a range scan into a hop plan:
//!
//! 1. [`geometry`]: load or simulate a scan, recover oriented normals.
//! 2. [`reconstruct`]: screened Poisson solve on a regular grid, marching cubes.
//! 3. [`anchors`]: score every surface vertex for gripping risk and keep the best.
//! 4. [`scenegraph`]: directed graph of anchors weighted by distance and loss.
//! 5. [`planner_local`]: bounded-leg A* per robot under hop and tether limits.
//! 6. [`planner_global`]: D* Lite over the grid of scenes, turning local failures into walls.
//!
//! [`sim`] drives the whole loop with a simulated LIDAR and a kinematic hop gait.
//!
//! Geometry and planning code is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the simulator and CLI use.

pub mod anchors;
pub mod config;
pub mod geometry;
pub mod pipeline;
pub mod planner_global;
pub mod planner_local;
pub mod reconstruct;
pub mod scalar;
pub mod scenegraph;
pub mod sim;

pub use scalar::Real;

pub type Vec3d = geometry::Vec3<f64>;
pub type Point3d = geometry::Point3<f64>;
pub type PointCloudd = geometry::PointCloud<f64>;
pub type OrientedPointd = geometry::OrientedPoint<f64>;
pub type ScalarGridd = reconstruct::ScalarGrid<f64>;
pub type VectorGridd = reconstruct::VectorGrid<f64>;
pub type TriangleMeshd = reconstruct::TriangleMesh<f64>;
pub type AnchorPointd = anchors::AnchorPoint<f64>;
pub type SceneGraphd = scenegraph::SceneGraph<f64>;
pub type HopPland = planner_local::HopPlan<f64>;

pub type Vec3f = geometry::Vec3<f32>;
pub type PointCloudf = geometry::PointCloud<f32>;
pub type TriangleMeshf = reconstruct::TriangleMesh<f32>;
pub type SceneGraphf = scenegraph::SceneGraph<f32>;

