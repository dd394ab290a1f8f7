//! Task error, reward and success test.

use rodsim_core::{RodParams, RodState, Vec3};

use crate::error::{FlingError, Result};
use crate::scene::FlingEnv;

/// Reward for a successful episode.
pub const SUCCESS_REWARD: f64 = 10.0;

/// Zero if any node is inside the gap, otherwise the smallest node distance
/// to the goal.
pub fn d_err(nodes: &[Vec3], env: &FlingEnv) -> f64 {
    let gap = env.gap();
    if nodes.iter().any(|x| gap.contains(x)) {
        return 0.0;
    }
    let goals = env.goal_points();
    nodes
        .iter()
        .flat_map(|x| goals.iter().map(move |g| (x - g).norm()))
        .fold(f64::INFINITY, f64::min)
}

pub fn reward(min_d_err: f64, success: bool) -> f64 {
    if success {
        SUCCESS_REWARD
    } else {
        -min_d_err
    }
}

/// The lowest node of the free span rests inside the gap and nothing lies
/// beyond the far obstacle. The free span excludes the two clamped nodes at
/// each end.
pub fn check_success(s: &RodState, p: &RodParams, env: &FlingEnv) -> Result<bool> {
    let kinetic = s.kinetic_energy(p);
    if !(kinetic <= env.settle_kinetic) {
        return Err(FlingError::NotSettled {
            kinetic,
            threshold: env.settle_kinetic,
        });
    }
    Ok(wire_in_gap(&s.centerline.nodes, env))
}

/// Geometric part of the success test.
pub fn wire_in_gap(nodes: &[Vec3], env: &FlingEnv) -> bool {
    let n = nodes.len();
    let free = &nodes[2..n - 2];
    let lowest = free.iter().min_by(|a, b| a.z.total_cmp(&b.z)).expect("free span is never empty");
    let far = env.far_face_y();
    env.gap().contains(lowest) && nodes.iter().all(|x| x.y <= far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::GoalPoint;
    use approx::assert_relative_eq;

    fn line(from: Vec3, to: Vec3, n: usize) -> Vec<Vec3> {
        (0..=n).map(|i| from + (to - from) * (i as f64 / n as f64)).collect()
    }

    #[test]
    fn reward_branch_table() {
        assert_eq!(reward(0.37, true), 10.0);
        assert_eq!(reward(0.0, true), 10.0);
        assert_eq!(reward(0.25, false), -0.25);
        assert_eq!(reward(0.0, false), 0.0);
    }

    #[test]
    fn success_term_dominates_any_distance() {
        for m in [0.0, 0.01, 0.5, 3.0, 50.0] {
            assert_eq!(reward(m, true), f64::max(-m, SUCCESS_REWARD));
            assert_eq!(reward(m, false), -m);
            assert!(reward(m, false) <= 0.0);
        }
    }

    #[test]
    fn distance_oracle() {
        let env = FlingEnv::default();
        let g = env.goal_points()[0];
        // nearest node offset (0.1, 0, 0.05) from the goal, above the obstacles
        let nodes = vec![g + Vec3::new(0.1, 0.0, 0.05), g + Vec3::new(0.5, 0.0, 0.5)];
        assert_relative_eq!(d_err(&nodes, &env), 0.1118033988749895, epsilon = 1e-12);
        assert_relative_eq!(d_err(&nodes, &env), 0.1118, epsilon = 1e-4);
    }

    #[test]
    fn distance_of_a_far_wire() {
        let env = FlingEnv::default();
        let g = env.goal_points()[0];
        let nodes = vec![g + Vec3::new(0.0, -0.8, 0.6); 5];
        assert_relative_eq!(d_err(&nodes, &env), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_iff_a_node_is_in_the_gap() {
        let env = FlingEnv::default();
        let g = env.goal_points()[0];
        let outside = vec![g + Vec3::new(0.0, 0.0, 0.2), g + Vec3::new(0.0, -0.3, 0.1)];
        assert!(d_err(&outside, &env) > 0.0);
        let mut inside = outside.clone();
        inside.push(g - Vec3::new(0.0, 0.0, 0.1));
        assert_eq!(d_err(&inside, &env), 0.0);
    }

    #[test]
    fn nearest_top_centre_goal() {
        let env = FlingEnv {
            goal: GoalPoint::NearestTopCenter,
            ..FlingEnv::default()
        };
        let [a, _] = env.obstacles();
        let nodes = vec![a.top_center() + Vec3::new(0.0, 0.0, 0.2)];
        assert_relative_eq!(d_err(&nodes, &env), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn success_geometry() {
        let env = FlingEnv::default();
        let g = env.goal_points()[0];
        let [a, b] = env.obstacles();
        let anchor = env.anchor;
        // draped over the first obstacle and hanging into the gap
        let mut draped = line(anchor, a.top_center() + Vec3::z() * 0.01, 10);
        draped.extend(line(a.top_center() + Vec3::new(0.0, 0.06, 0.0), g - Vec3::z() * 0.25, 5));
        draped.extend(line(g - Vec3::z() * 0.2, env.gripper_start, 10));
        assert!(wire_in_gap(&draped, &env));
        // short of the first obstacle
        let short = line(anchor, Vec3::new(0.0, 0.1, 0.05), 10);
        assert!(!wire_in_gap(&[short.clone(), line(Vec3::new(0.0, 0.1, 0.05), env.gripper_start, 10)].concat(), &env));
        // over both obstacles
        let mut over = draped.clone();
        over[15] = b.top_center() + Vec3::new(0.0, 0.2, -0.25);
        assert!(!wire_in_gap(&over, &env));
    }
}
