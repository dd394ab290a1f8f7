//! One fling: drive the gripper along the action trajectory, let the wire
//! come to rest, score the outcome.

use serde::{Deserialize, Serialize};

use rodsim_core::trace::Trace;
use rodsim_core::{step, BoundaryCondition, GripperPose, RodParams, RodState};

use crate::action::FlingAction;
use crate::error::{FlingError, Result};
use crate::scene::FlingEnv;
use crate::task::{check_success, d_err, reward};
use crate::trajectory::build_trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub reward: f64,
    pub min_d_err: f64,
    pub success: bool,
    /// Task error of the hanging wire before the motion.
    pub start_d_err: f64,
    pub diverged: bool,
    /// The wire came to rest before the settling time ran out.
    pub settled: bool,
    /// The action was clamped into its bounds.
    pub clamped: bool,
    /// Divergence message, if any.
    pub failure: Option<String>,
    /// Centreline snapshots, one per control period; empty unless requested.
    #[serde(skip)]
    pub trace: Trace,
}

fn blend(a: &GripperPose, b: &GripperPose, w: f64) -> GripperPose {
    GripperPose {
        position: a.position * (1.0 - w) + b.position * w,
        direction: (a.direction * (1.0 - w) + b.direction * w).normalize(),
        twist: a.twist * (1.0 - w) + b.twist * w,
    }
}

/// Runs an episode for wire moduli `alpha`, `beta`.
pub fn run_episode(a: &FlingAction, env: &FlingEnv, alpha: f64, beta: f64, record: bool) -> Result<EpisodeResult> {
    let (s, p) = env.initial_state(alpha, beta)?;
    run_episode_from(a, env, s, &p, record)
}

/// Runs an episode from a prepared hanging state.
pub fn run_episode_from(
    a: &FlingAction,
    env: &FlingEnv,
    mut s: RodState,
    p: &RodParams,
    record: bool,
) -> Result<EpisodeResult> {
    env.validate()?;
    let traj = build_trajectory(a, &env.bounds, &env.start_pose(), env.control_steps)?;
    let scene = env.scene();
    let cfg = env.step_config();
    let mut bc = env.boundary(&s.centerline, &traj.poses[0]);
    let substeps = env.substeps();
    let start_d_err = d_err(&s.centerline.nodes, env);
    let mut min_d_err = start_d_err;
    let mut trace = Trace::new();
    if record {
        trace.push(s.time, &s.centerline.nodes);
    }

    let mut outcome = EpisodeResult {
        reward: -start_d_err,
        min_d_err,
        success: false,
        start_d_err,
        diverged: false,
        settled: false,
        clamped: traj.clamped,
        failure: None,
        trace: Trace::new(),
    };

    let mut failure: Option<String> = None;
    let mut advance = |s: &mut RodState, bc: &BoundaryCondition, min_d: &mut f64| match step(s, p, bc, &scene, &cfg) {
        Ok(_) => {
            *min_d = min_d.min(d_err(&s.centerline.nodes, env));
            true
        }
        Err(e) => {
            failure = Some(e.to_string());
            false
        }
    };

    // drive: control step k moves the gripper from setpoint k - 1 to k
    let mut ok = true;
    'drive: for k in 0..traj.poses.len() {
        let from = traj.poses[k.saturating_sub(1)];
        let to = traj.poses[k];
        for j in 1..=substeps {
            bc.set_gripper(&s.centerline, &blend(&from, &to, j as f64 / substeps as f64));
            if !advance(&mut s, &bc, &mut min_d_err) {
                ok = false;
                break 'drive;
            }
        }
        if record {
            trace.push(s.time, &s.centerline.nodes);
        }
    }

    // settle: the wire must stay below the kinetic threshold for a whole
    // control period
    if ok {
        let max_steps = (env.settle_time / env.dt).ceil() as usize;
        let mut quiet = 0;
        for k in 1..=max_steps {
            if !advance(&mut s, &bc, &mut min_d_err) {
                break;
            }
            quiet = if s.kinetic_energy(p) <= env.settle_kinetic { quiet + 1 } else { 0 };
            if record && k % substeps == 0 {
                trace.push(s.time, &s.centerline.nodes);
            }
            if quiet >= substeps {
                outcome.settled = true;
                break;
            }
        }
    }
    outcome.diverged = failure.is_some();
    outcome.failure = failure;

    outcome.trace = trace;
    if outcome.diverged {
        return Ok(outcome);
    }
    outcome.min_d_err = min_d_err;
    outcome.success = match check_success(&s, p, env) {
        Ok(ok) => ok,
        Err(FlingError::NotSettled { .. }) => false,
        Err(e) => return Err(e),
    };
    outcome.reward = reward(min_d_err, outcome.success);
    Ok(outcome)
}
