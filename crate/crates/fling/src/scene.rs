//! Task geometry. Axes: `x` runs across the table (anchor to gripper), `y`
//! points from the wire toward the obstacles, `z` is up.

use serde::{Deserialize, Serialize};

use rodsim_core::dynamics::{project_inextensibility, relax, RelaxConfig};
use rodsim_core::{
    AxisBox, BoundaryCondition, Centerline, ContactParams, GripperPose, RodParams, RodState, SceneConfig, StepConfig,
    Vec3,
};

use crate::action::ActionBounds;
use crate::error::{FlingError, Result};

/// Point the task error is measured to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalPoint {
    /// Midpoint of the two obstacle top centres.
    GapMidpoint,
    /// Whichever obstacle top centre is closer.
    NearestTopCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlingEnv {
    pub wire_length: f64,
    pub sections: usize,
    /// Mass per unit length (kg/m).
    pub density: f64,
    /// Velocity damping rate of the wire (1/s).
    pub damping: f64,
    /// Fixed end of the wire; its first edge is clamped pointing down.
    pub anchor: Vec3,
    /// Gripper position before the fling; the grasped edge points up into it.
    pub gripper_start: Vec3,
    /// Obstacle extents along x, y and z.
    pub obstacle_size: Vec3,
    /// y of the near face of the first obstacle.
    pub first_obstacle_y: f64,
    /// Distance between the inner faces of the two obstacles.
    pub gap_width: f64,
    pub gravity: f64,
    pub contact: ContactParams,
    pub goal: GoalPoint,
    pub bounds: ActionBounds,
    pub dt: f64,
    pub control_steps: usize,
    /// Duration of the gripper motion (s).
    pub fling_duration: f64,
    /// Longest time the wire may take to come to rest after the motion (s).
    pub settle_time: f64,
    /// Kinetic energy below which the wire counts as at rest (J).
    pub settle_kinetic: f64,
    /// Damping used to let the initial hanging shape come to rest (1/s).
    pub hang_damping: f64,
    pub hang_max_steps: usize,
}

impl Default for FlingEnv {
    fn default() -> Self {
        Self {
            wire_length: 2.0,
            sections: 30,
            density: 0.05,
            damping: 2.0,
            anchor: Vec3::new(-0.125, 0.0, 1.0),
            gripper_start: Vec3::new(0.125, 0.0, 1.0),
            obstacle_size: Vec3::new(0.4, 0.1, 0.3),
            first_obstacle_y: 0.3,
            gap_width: 0.3,
            gravity: 9.81,
            contact: ContactParams {
                stiffness: 1e4,
                normal_damping: 1.0,
                friction: 0.1,
                radius: 0.005,
                damping_ramp: 1e-3,
            },
            goal: GoalPoint::GapMidpoint,
            bounds: ActionBounds::default(),
            dt: 0.002,
            control_steps: 75,
            fling_duration: 1.5,
            settle_time: 4.0,
            settle_kinetic: 1e-4,
            hang_damping: 20.0,
            hang_max_steps: 3000,
        }
    }
}

/// Region between the obstacles' inner faces, across their common width,
/// from the ground up to their top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapVolume {
    pub min: Vec3,
    pub max: Vec3,
}

impl GapVolume {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }
}

impl FlingEnv {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FlingError::Config(m.into()));
        if !(self.wire_length > 0.0) || self.sections < 4 || !(self.density > 0.0) || !(self.damping >= 0.0) {
            return bad("wire length, density and damping must be positive and sections at least 4");
        }
        if self.obstacle_size.iter().any(|s| !(*s > 0.0)) || !(self.gap_width > 0.0) {
            return bad("obstacle extents and gap width must be positive");
        }
        if !(self.dt > 0.0) || self.control_steps < 4 || !(self.fling_duration > 0.0) {
            return bad("time step and fling duration must be positive, with at least 4 control steps");
        }
        if !(self.settle_time >= 0.0) || !(self.settle_kinetic > 0.0) || !(self.hang_damping >= 0.0) {
            return bad("settling parameters must be non-negative");
        }
        if self.substeps() == 0 {
            return bad("fling too short for the time step");
        }
        let edge = self.wire_length / self.sections as f64;
        if (self.gripper_start - self.anchor).norm() + 2.0 * edge >= self.wire_length {
            return bad("anchor and gripper are farther apart than the wire allows");
        }
        self.bounds.validate()?;
        self.scene().validate()?;
        Ok(())
    }

    /// Physics steps per control step.
    pub fn substeps(&self) -> usize {
        (self.fling_duration / (self.control_steps as f64 * self.dt)).round() as usize
    }

    pub fn edge_length(&self) -> f64 {
        self.wire_length / self.sections as f64
    }

    pub fn obstacles(&self) -> [AxisBox; 2] {
        let half = self.obstacle_size * 0.5;
        let first = self.first_obstacle_y + half.y;
        let second = self.first_obstacle_y + self.obstacle_size.y + self.gap_width + half.y;
        [
            AxisBox::new(Vec3::new(0.0, first, half.z), half),
            AxisBox::new(Vec3::new(0.0, second, half.z), half),
        ]
    }

    pub fn scene(&self) -> SceneConfig {
        SceneConfig {
            gravity: Vec3::new(0.0, 0.0, -self.gravity),
            ground_height: Some(0.0),
            obstacles: self.obstacles().to_vec(),
            contact: self.contact,
        }
    }

    pub fn gap(&self) -> GapVolume {
        let [a, b] = self.obstacles();
        GapVolume {
            min: Vec3::new(-0.5 * self.obstacle_size.x, a.max().y, 0.0),
            max: Vec3::new(0.5 * self.obstacle_size.x, b.min().y, self.obstacle_size.z),
        }
    }

    /// y of the outer face of the far obstacle.
    pub fn far_face_y(&self) -> f64 {
        self.obstacles()[1].max().y
    }

    pub fn goal_points(&self) -> Vec<Vec3> {
        let [a, b] = self.obstacles();
        match self.goal {
            GoalPoint::GapMidpoint => vec![0.5 * (a.top_center() + b.top_center())],
            GoalPoint::NearestTopCenter => vec![a.top_center(), b.top_center()],
        }
    }

    pub fn start_pose(&self) -> GripperPose {
        GripperPose {
            position: self.gripper_start,
            direction: Vec3::z(),
            twist: 0.0,
        }
    }

    pub fn rod_params(&self, c: &Centerline, alpha: f64, beta: f64) -> RodParams {
        RodParams::with_linear_density(c, alpha, beta, self.density, self.damping)
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt: self.dt,
            ..StepConfig::default()
        }
    }

    /// Anchor clamp plus the gripper at `pose`.
    pub fn boundary(&self, c: &Centerline, pose: &GripperPose) -> BoundaryCondition {
        let mut bc = BoundaryCondition::free()
            .pin(0, self.anchor)
            .pin(1, self.anchor - Vec3::z() * c.rest_lengths[0])
            .clamp_theta(0, 0.0);
        bc.set_gripper(c, pose);
        bc
    }

    /// Rough U-shaped loop hanging from both ends, with exact edge lengths.
    fn initial_centerline(&self) -> Result<Centerline> {
        let n = self.sections;
        let l = self.edge_length();
        let (a, g) = (self.anchor, self.gripper_start);
        let span = (g - a).norm();
        let across = (g - a) / span;
        // two vertical arms joined by a half circle
        let radius = 0.5 * span;
        let arm = 0.5 * (self.wire_length - std::f64::consts::PI * radius);
        let point = |s: f64| -> Vec3 {
            if s <= arm {
                a - Vec3::z() * s
            } else if s >= self.wire_length - arm {
                g - Vec3::z() * (self.wire_length - s)
            } else {
                let phi = (s - arm) / radius;
                let centre = 0.5 * (a + g) - Vec3::z() * arm;
                centre - across * (radius * phi.cos()) - Vec3::z() * (radius * phi.sin())
            }
        };
        let nodes = (0..=n).map(|i| point(i as f64 * l)).collect();
        let mut c = Centerline::new(nodes, vec![l; n])?;
        let mut inv = vec![1.0; n + 1];
        for i in [0, 1, n - 1, n] {
            inv[i] = 0.0;
        }
        c.nodes[1] = a - Vec3::z() * l;
        c.nodes[n - 1] = g - Vec3::z() * l;
        project_inextensibility(&mut c, &inv, 1e-12, 100)?;
        Ok(c)
    }

    /// The wire hanging at rest between the anchor and the gripper start pose.
    pub fn initial_state(&self, alpha: f64, beta: f64) -> Result<(RodState, RodParams)> {
        let c = self.initial_centerline()?;
        let p = self.rod_params(&c, alpha, beta);
        let bc = self.boundary(&c, &self.start_pose());
        let mut s = RodState::new(c, &Vec3::x())?;
        let cfg = RelaxConfig {
            max_steps: self.hang_max_steps,
            kinetic_tol: 1e-3 * self.settle_kinetic,
            damping: self.hang_damping,
        };
        relax(&mut s, &p, &bc, &self.scene(), &self.step_config(), &cfg)?;
        s.velocities.iter_mut().for_each(|v| *v = Vec3::zeros());
        s.time = 0.0;
        s.steps = 0;
        Ok((s, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_layout() {
        let env = FlingEnv::default();
        env.validate().unwrap();
        let [a, b] = env.obstacles();
        assert_relative_eq!(b.min().y - a.max().y, 0.3, epsilon = 1e-12);
        assert_relative_eq!(a.min().z, 0.0, epsilon = 1e-12);
        assert_relative_eq!(a.max().z, 0.3, epsilon = 1e-12);
        assert_relative_eq!((env.gripper_start - env.anchor).norm(), 0.25, epsilon = 1e-12);
        let g = env.goal_points()[0];
        assert_relative_eq!(g, 0.5 * (a.top_center() + b.top_center()), epsilon = 1e-12);
        assert_relative_eq!(g.z, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn gap_volume_bounds() {
        let env = FlingEnv::default();
        let gap = env.gap();
        let mid = env.goal_points()[0] - Vec3::z() * 0.1;
        assert!(gap.contains(&mid));
        assert!(!gap.contains(&(mid + Vec3::z() * 0.2)));
        assert!(!gap.contains(&(mid + Vec3::y() * 0.2)));
        assert!(!gap.contains(&(mid - Vec3::y() * 0.2)));
        assert!(!gap.contains(&Vec3::new(mid.x, mid.y, -0.01)));
    }

    #[test]
    fn hanging_start_is_at_rest_and_inextensible() {
        let env = FlingEnv::default();
        let (s, p) = env.initial_state(0.01, 0.01).unwrap();
        assert!(s.centerline.max_strain() < 1e-8);
        assert_relative_eq!(s.centerline.nodes[0], env.anchor, epsilon = 1e-12);
        assert_relative_eq!(s.centerline.nodes[env.sections], env.gripper_start, epsilon = 1e-12);
        assert_eq!(s.kinetic_energy(&p), 0.0);
        // the loop hangs below the grip points and clear of the obstacles
        let low = s.centerline.nodes.iter().map(|x| x.z).fold(f64::INFINITY, f64::min);
        assert!(low < env.anchor.z - 0.5);
        assert!(s.centerline.nodes.iter().all(|x| x.y.abs() < 1e-9));
    }

    #[test]
    fn rejects_anchor_out_of_reach() {
        let env = FlingEnv {
            gripper_start: Vec3::new(2.5, 0.0, 1.0),
            ..FlingEnv::default()
        };
        assert!(env.validate().is_err());
    }
}
