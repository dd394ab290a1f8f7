//! Wire flinging: a kinematic gripper swings a wire held at its other end over
//! an obstacle into a gap, and a Gaussian policy learns the swing.

pub mod action;
pub mod episode;
pub mod error;
pub mod policy;
pub mod scene;
pub mod task;
pub mod train;
pub mod trajectory;

pub use action::{ActionBounds, FlingAction, ACTION_DIM};
pub use episode::{run_episode, run_episode_from, EpisodeResult};
pub use error::{FlingError, Result};
pub use scene::{FlingEnv, GapVolume, GoalPoint};
pub use task::{check_success, d_err, reward, wire_in_gap, SUCCESS_REWARD};
pub use trajectory::{build_trajectory, NaturalSpline, Trajectory};
pub use policy::{
    sample_action, surrogate, surrogate_gradient, update_policy, GaussianPolicy, RewardBaseline, Sample, SampledAction,
    UpdateConfig, UpdateStats,
};
pub use train::{
    evaluate, train, train_from, CurvePoint, EpisodeRecord, EvalReport, TrainConfig, TrainOutput, TrainState,
};
