//! Multi-layer lidar intensity maps for navigating among solid, passable and
//! transparent obstacles.
//!
//! The pipeline per frame: bin an intensity point cloud into height layers
//! ([`map_builder`]), split occupied cells into solid and passable
//! ([`classifier`]), track transparent surfaces across frames
//! ([`fn_tracker`]), inflate solid cells along the goal direction and fuse a
//! plan map ([`inflation`]), and pick a velocity with a dynamic-window planner
//! ([`planner`]). [`sim`] provides the synthetic lidar and scenes, [`episode`]
//! the closed loop and [`metrics`] the batch statistics.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which the simulator uses throughout.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod config;
pub mod episode;
pub mod error;
pub mod export;
pub mod fn_tracker;
pub mod geometry;
pub mod grid;
pub mod inflation;
pub mod kinematics;
pub mod map_builder;
pub mod metrics;
pub mod planner;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = geometry::IntensityPoint<f64>;
pub type Geometry = geometry::GridGeometry<f64>;
pub type Interval = geometry::HeightInterval<f64>;
pub type Pose = geometry::Pose2<f64>;
pub type State = geometry::RobotState<f64>;
pub type Layer = map_builder::LayerGrid<f64>;
pub type LayerStack = map_builder::MultiLayerMap<f64>;
pub type Layers = map_builder::LayerSpec<f64>;
pub type Classified = classifier::ClassifiedMaps<f64>;
pub type Gamma = classifier::ClassifierParams<f64>;
pub type FnGrid = fn_tracker::FnMap<f64>;
pub type Tracker = fn_tracker::FnTracker<f64>;
pub type Delta = fn_tracker::MotionDelta<f64>;
pub type Plan = inflation::PlanMap<f64>;
pub type Planner = planner::PlannerParams<f64>;
pub type BoolGrid = grid::Mask<f64>;
