//! Gripper trajectory: a natural cubic spline through the start pose and the
//! three action waypoints, sampled at uniform times.

use rodsim_core::{GripperPose, Vec3};

use crate::action::{ActionBounds, FlingAction};
use crate::error::{FlingError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<GripperPose>,
    /// The action had to be clamped into its bounds.
    pub clamped: bool,
}

/// Natural cubic spline through `y` at knots `0, 1, .., y.len() - 1`.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas)
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i] - 2.0 * y[i + 1] + y[i + 2]);
                let denom = if i == 0 { 4.0 } else { 4.0 - c[i - 1] };
                c[i] = 1.0 / denom;
                d[i] = if i == 0 { rhs / denom } else { (rhs - d[i - 1]) / denom };
            }
            for i in (0..k).rev() {
                m[i + 1] = if i + 1 == k { d[i] } else { d[i] - c[i] * m[i + 2] };
            }
        }
        Self { y: y.to_vec(), m }
    }

    /// Value at knot coordinate `t`, clamped to the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let last = self.y.len() - 1;
        if last == 0 {
            return self.y[0];
        }
        let t = t.clamp(0.0, last as f64);
        let i = (t.floor() as usize).min(last - 1);
        let b = t - i as f64;
        let a = 1.0 - b;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) / 6.0
    }
}

/// Gripper pose for offsets `(Δy, Δz, pitch)` from `start`.
pub fn offset_pose(start: &GripperPose, o: &[f64; 3]) -> GripperPose {
    let (s, c) = o[2].sin_cos();
    let d = start.direction;
    GripperPose {
        position: start.position + Vec3::new(0.0, o[0], o[1]),
        direction: Vec3::new(d.x, c * d.y - s * d.z, s * d.y + c * d.z),
        twist: start.twist,
    }
}

/// Samples `n_steps` poses at uniform times from the start pose (first sample)
/// to the last waypoint (last sample).
pub fn build_trajectory(
    a: &FlingAction,
    bounds: &ActionBounds,
    start: &GripperPose,
    n_steps: usize,
) -> Result<Trajectory> {
    if n_steps < 4 {
        return Err(FlingError::Config(format!("a trajectory needs at least 4 steps, got {n_steps}")));
    }
    let (a, clamped) = a.clamped(bounds);
    let splines: Vec<NaturalSpline> = (0..3)
        .map(|k| {
            let mut knots = vec![0.0];
            knots.extend(a.offsets.iter().map(|o| o[k]));
            NaturalSpline::new(&knots)
        })
        .collect();
    let poses = (0..n_steps)
        .map(|i| {
            let t = if i == 0 { 0.0 } else { 3.0 * i as f64 / (n_steps - 1) as f64 };
            let o = [splines[0].eval(t), splines[1].eval(t), splines[2].eval(t)];
            if i == 0 {
                *start
            } else {
                offset_pose(start, &o)
            }
        })
        .collect();
    Ok(Trajectory { poses, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn start() -> GripperPose {
        GripperPose {
            position: Vec3::new(0.125, 0.0, 1.0),
            direction: Vec3::z(),
            twist: 0.0,
        }
    }

    fn sample_action() -> FlingAction {
        FlingAction {
            offsets: [[0.3, -0.2, 0.4], [-0.1, 0.5, -0.9], [0.55, 0.1, 1.2]],
        }
    }

    #[test]
    fn zero_action_is_constant() {
        let t = build_trajectory(&FlingAction::zero(), &ActionBounds::default(), &start(), 75).unwrap();
        assert_eq!(t.poses.len(), 75);
        assert!(!t.clamped);
        for p in &t.poses {
            assert_relative_eq!(p.position, start().position, epsilon = 1e-15);
            assert_relative_eq!(p.direction, start().direction, epsilon = 1e-15);
        }
    }

    #[test]
    fn passes_through_all_control_poses() {
        // 76 samples put the waypoints exactly on samples 0, 25, 50, 75
        let a = sample_action();
        let t = build_trajectory(&a, &ActionBounds::default(), &start(), 76).unwrap();
        assert_eq!(t.poses[0], start());
        for (k, o) in a.offsets.iter().enumerate() {
            let want = offset_pose(&start(), o);
            let got = t.poses[25 * (k + 1)];
            assert_relative_eq!(got.position, want.position, epsilon = 1e-9);
            assert_relative_eq!(got.direction, want.direction, epsilon = 1e-9);
        }
    }

    #[test]
    fn seventy_five_setpoints_end_on_last_waypoint() {
        let a = sample_action();
        let t = build_trajectory(&a, &ActionBounds::default(), &start(), 75).unwrap();
        assert_eq!(t.poses.len(), 75);
        let want = offset_pose(&start(), &a.offsets[2]);
        assert_relative_eq!(t.poses[74].position, want.position, epsilon = 1e-12);
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(build_trajectory(&FlingAction::zero(), &ActionBounds::default(), &start(), 3).is_err());
    }

    #[test]
    fn out_of_bounds_action_is_clamped() {
        let mut a = sample_action();
        a.offsets[2][0] = 5.0;
        let t = build_trajectory(&a, &ActionBounds::default(), &start(), 76).unwrap();
        assert!(t.clamped);
        assert_relative_eq!(t.poses[75].position.y, 0.6, epsilon = 1e-9);
    }

    #[test]
    fn spline_reproduces_a_line_and_has_zero_end_curvature() {
        let s = NaturalSpline::new(&[1.0, 3.0, 5.0, 7.0]);
        for k in 0..=30 {
            let t = 0.1 * k as f64;
            assert_relative_eq!(s.eval(t), 1.0 + 2.0 * t, epsilon = 1e-12);
        }
        // second difference vanishes towards the ends of a natural spline but
        // not inside
        let s = NaturalSpline::new(&[0.0, 1.0, -2.0, 0.5]);
        let h = 1e-4;
        let mid = (s.eval(1.0 + h) - 2.0 * s.eval(1.0) + s.eval(1.0 - h)) / (h * h);
        assert!(mid.abs() > 1.0);
        for t in [h, 3.0 - h] {
            let dd = (s.eval(t + h) - 2.0 * s.eval(t) + s.eval(t - h)) / (h * h);
            assert!(dd.abs() < 1e-2, "{dd}");
        }
    }

    #[test]
    fn pitch_keeps_direction_unit_and_turns_about_x() {
        let p = offset_pose(&start(), &[0.0, 0.0, 0.7]);
        assert_relative_eq!(p.direction.norm(), 1.0, epsilon = 1e-15);
        assert_eq!(p.direction.x, 0.0);
        assert_relative_eq!(p.direction.z, 0.7f64.cos(), epsilon = 1e-15);
    }
}
