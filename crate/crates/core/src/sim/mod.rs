//! Synthetic world: materials, scenes and the lidar model.

pub mod lidar;
pub mod material;
pub mod scene;

use crate::geometry::RobotState;
use crate::kinematics::step_pose;
use crate::scalar::Real;

/// Advances the simulated robot by one command and records the command as
/// its current velocity.
pub fn step_robot<T: Real>(robot: RobotState<T>, v: T, omega: T, dt: T) -> RobotState<T> {
    RobotState {
        pose: step_pose(robot.pose, v, omega, dt),
        twist: crate::geometry::Twist::new(v, omega),
    }
}
