//! Unicycle motion model shared by the simulator and the planner rollouts.

use crate::geometry::{normalize_angle, Pose2};
use crate::scalar::Real;

/// Below this `|omega| * dt` the straight-line update is used.
const ARC_THRESHOLD: f64 = 1e-6;

/// Integrates a constant `(v, omega)` command for `dt` seconds.
///
/// Uses the exact circular-arc solution when the heading change exceeds
/// `1e-6` rad and the Euler step (`yaw += omega dt`, then advance along the
/// new heading) otherwise.
pub fn step_pose<T: Real>(pose: Pose2<T>, v: T, omega: T, dt: T) -> Pose2<T> {
    let dyaw = omega * dt;
    if dyaw.abs() > T::of(ARC_THRESHOLD) {
        let radius = v / omega;
        let yaw1 = pose.yaw + dyaw;
        Pose2 {
            x: pose.x + radius * (yaw1.sin() - pose.yaw.sin()),
            y: pose.y + radius * (pose.yaw.cos() - yaw1.cos()),
            yaw: normalize_angle(yaw1),
        }
    } else {
        let yaw1 = normalize_angle(pose.yaw + dyaw);
        Pose2 {
            x: pose.x + v * yaw1.cos() * dt,
            y: pose.y + v * yaw1.sin() * dt,
            yaw: yaw1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Pose2<f64>, b: (f64, f64, f64)) -> bool {
        (a.x - b.0).abs() < 1e-9 && (a.y - b.1).abs() < 1e-9 && (a.yaw - b.2).abs() < 1e-9
    }

    #[test]
    fn straight_line() {
        assert!(close(
            step_pose(Pose2::default(), 1.0, 0.0, 1.0),
            (1.0, 0.0, 0.0)
        ));
    }

    #[test]
    fn rotate_in_place() {
        assert!(close(
            step_pose(Pose2::default(), 0.0, FRAC_PI_2, 1.0),
            (0.0, 0.0, FRAC_PI_2)
        ));
    }

    #[test]
    fn quarter_arc_endpoint() {
        // x = (v/w) sin(w dt), y = (v/w)(1 - cos(w dt)).
        let p = step_pose(Pose2::default(), 1.0, FRAC_PI_2, 1.0);
        let r = 1.0 / FRAC_PI_2;
        assert!(close(p, (r, r, FRAC_PI_2)));
        assert!((p.x - std::f64::consts::FRAC_2_PI).abs() < 1e-12);
    }

    #[test]
    fn arc_converges_to_line_for_tiny_omega() {
        let a = step_pose(Pose2::new(1.0f64, 2.0, 0.3), 0.8, 2e-6, 1.0);
        let b = step_pose(Pose2::new(1.0, 2.0, 0.3), 0.8, 0.0, 1.0);
        assert!((a.x - b.x).abs() < 1e-5 && (a.y - b.y).abs() < 1e-5);
    }

    #[test]
    fn arc_composes() {
        // Two half steps land where one full step does.
        let p0 = Pose2::new(0.5f64, -1.0, 2.9);
        let full = step_pose(p0, 0.7, 1.3, 0.4);
        let half = step_pose(step_pose(p0, 0.7, 1.3, 0.2), 0.7, 1.3, 0.2);
        assert!((full.x - half.x).abs() < 1e-12 && (full.y - half.y).abs() < 1e-12);
        assert!((normalize_angle(full.yaw - half.yaw)).abs() < 1e-12);
    }

    #[test]
    fn f32_quarter_arc() {
        let p = step_pose(
            Pose2::<f32>::default(),
            1.0,
            std::f32::consts::FRAC_PI_2,
            1.0,
        );
        let r = std::f32::consts::FRAC_2_PI;
        assert!((p.x - r).abs() < 1e-4 && (p.y - r).abs() < 1e-4);
    }
}
