//! Batch training loop, evaluation and on-disk artefacts.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::FlingAction;
use crate::episode::{run_episode, EpisodeResult};
use crate::error::{FlingError, Result};
use crate::policy::{sample_action, update_policy, GaussianPolicy, RewardBaseline, Sample, UpdateConfig, OBS_DIM};
use crate::scene::FlingEnv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub total_episodes: usize,
    pub batch_size: usize,
    pub update: UpdateConfig,
    pub baseline_decay: f64,
    pub seed: u64,
    /// Range the bending modulus is drawn from (N m^2).
    pub alpha_range: [f64; 2],
    /// Range the twisting modulus is drawn from (N m^2).
    pub beta_range: [f64; 2],
    /// Initial spread of every action component, in units of its bound.
    pub initial_std: f64,
    /// Batches between evaluations of the mean policy.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_episodes: 5000,
            batch_size: 50,
            update: UpdateConfig::default(),
            baseline_decay: 0.9,
            seed: 7,
            alpha_range: [0.005, 0.02],
            beta_range: [0.005, 0.02],
            initial_std: 0.5,
            eval_every: 5,
            eval_episodes: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: &[f64; 2]| r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite();
        if self.total_episodes == 0 || self.batch_size == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(FlingError::Config("episode, batch and evaluation counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) || !(self.initial_std > 0.0) {
            return Err(FlingError::Config("baseline decay must be in [0, 1) and the initial spread positive".into()));
        }
        if !range_ok(&self.alpha_range) || !range_ok(&self.beta_range) {
            return Err(FlingError::Config("moduli ranges must be positive and ordered".into()));
        }
        self.update.validate()
    }

    pub fn num_batches(&self) -> usize {
        self.total_episodes / self.batch_size
    }

    pub fn initial_policy(&self, env: &FlingEnv) -> GaussianPolicy {
        let hi = |r: &[f64; 2]| if r[1] > r[0] { r[1] } else { r[0] * (1.0 + 1e-9) };
        GaussianPolicy::new(
            [self.alpha_range[0], self.beta_range[0]],
            [hi(&self.alpha_range), hi(&self.beta_range)],
            env.bounds,
            self.initial_std,
        )
    }
}

/// Random stream of episode `index` under `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_obs(rng: &mut ChaCha8Rng, alpha: &[f64; 2], beta: &[f64; 2]) -> [f64; OBS_DIM] {
    let mut u = |r: &[f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..r[1]) } else { r[0] };
    [u(alpha), u(beta)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub batch: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub success_rate: f64,
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub batch: usize,
    pub alpha: f64,
    pub beta: f64,
    pub action: FlingAction,
    pub reward: f64,
    pub min_d_err: f64,
    pub success: bool,
    pub diverged: bool,
    pub settled: bool,
    pub error: Option<String>,
}

/// Resumable training state; this is the checkpoint document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub policy: GaussianPolicy,
    /// Policy with the best evaluation score so far.
    pub best_policy: GaussianPolicy,
    pub best_eval_reward: Option<f64>,
    pub baseline: RewardBaseline,
    pub episodes_done: usize,
    pub curve: Vec<CurvePoint>,
    pub episode_errors: usize,
}

impl TrainState {
    pub fn new(env: &FlingEnv, tc: &TrainConfig) -> Self {
        let policy = tc.initial_policy(env);
        Self {
            best_policy: policy.clone(),
            policy,
            best_eval_reward: None,
            baseline: RewardBaseline::new(tc.baseline_decay),
            episodes_done: 0,
            curve: Vec::new(),
            episode_errors: 0,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| FlingError::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub success_rate: f64,
    pub mean_reward: f64,
    pub episodes: Vec<EvalEpisode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEpisode {
    pub alpha: f64,
    pub beta: f64,
    pub action: FlingAction,
    pub result: EpisodeResult,
}

/// Runs `episodes` evaluation episodes with moduli drawn from the ranges
/// under `seed`; the mean action when `deterministic`, otherwise a sample.
pub fn evaluate(
    policy: &GaussianPolicy,
    env: &FlingEnv,
    tc: &TrainConfig,
    episodes: usize,
    deterministic: bool,
    seed: u64,
    record: bool,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(FlingError::Config("evaluation needs at least one episode".into()));
    }
    let results: Vec<Result<EvalEpisode>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(seed, i as u64);
            let obs = draw_obs(&mut rng, &tc.alpha_range, &tc.beta_range);
            let action = if deterministic {
                policy.deterministic_action(&obs)
            } else {
                sample_action(policy, &obs, &mut rng).action
            };
            let result = run_episode(&action, env, obs[0], obs[1], record)?;
            Ok(EvalEpisode {
                alpha: obs[0],
                beta: obs[1],
                action,
                result,
            })
        })
        .collect();
    let episodes_out = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = episodes_out.len() as f64;
    Ok(EvalReport {
        success_rate: episodes_out.iter().filter(|e| e.result.success).count() as f64 / n,
        mean_reward: episodes_out.iter().map(|e| e.result.reward).sum::<f64>() / n,
        episodes: episodes_out,
    })
}

/// Seed of the evaluation stream used to rank policies during training.
pub fn selection_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub state: TrainState,
    pub records: Vec<EpisodeRecord>,
}

pub fn train(env: &FlingEnv, tc: &TrainConfig) -> Result<TrainOutput> {
    train_from(env, tc, TrainState::new(env, tc), &mut |_, _| Ok(()))
}

/// Continues training from `state` until `tc.total_episodes` episodes have
/// run; `on_batch` sees the state and the batch's records after each update.
pub fn train_from(
    env: &FlingEnv,
    tc: &TrainConfig,
    mut state: TrainState,
    on_batch: &mut dyn FnMut(&TrainState, &[EpisodeRecord]) -> Result<()>,
) -> Result<TrainOutput> {
    env.validate()?;
    tc.validate()?;
    state.policy.validate()?;
    if state.episodes_done % tc.batch_size != 0 {
        return Err(FlingError::Config("checkpoint does not end on a batch boundary".into()));
    }
    let mut records = Vec::new();
    let mut batch_index = state.episodes_done / tc.batch_size;
    while batch_index < tc.num_batches() {
        let first = state.episodes_done;
        let policy = state.policy.clone();
        let rollouts: Vec<(Sample, EpisodeRecord)> = (0..tc.batch_size)
            .into_par_iter()
            .map(|k| {
                let episode = first + k;
                let mut rng = episode_rng(tc.seed, episode as u64);
                let obs = draw_obs(&mut rng, &tc.alpha_range, &tc.beta_range);
                let draw = sample_action(&policy, &obs, &mut rng);
                let outcome = run_episode(&draw.action, env, obs[0], obs[1], false);
                let (reward, record) = match outcome {
                    Ok(r) => (
                        r.reward,
                        EpisodeRecord {
                            episode,
                            batch: batch_index,
                            alpha: obs[0],
                            beta: obs[1],
                            action: draw.action,
                            reward: r.reward,
                            min_d_err: r.min_d_err,
                            success: r.success,
                            diverged: r.diverged,
                            settled: r.settled,
                            error: r.failure,
                        },
                    ),
                    Err(e) => (
                        f64::NAN,
                        EpisodeRecord {
                            episode,
                            batch: batch_index,
                            alpha: obs[0],
                            beta: obs[1],
                            action: draw.action,
                            reward: f64::NAN,
                            min_d_err: f64::NAN,
                            success: false,
                            diverged: false,
                            settled: false,
                            error: Some(e.to_string()),
                        },
                    ),
                };
                let sample = Sample {
                    obs,
                    unit: draw.unit,
                    log_prob: draw.log_prob,
                    reward,
                };
                (sample, record)
            })
            .collect();

        // episodes that could not run at all are left out of the update
        let samples: Vec<Sample> = rollouts.iter().map(|r| r.0).filter(|s| s.reward.is_finite()).collect();
        state.episode_errors += tc.batch_size - samples.len();
        let batch_records: Vec<EpisodeRecord> = rollouts.into_iter().map(|r| r.1).collect();
        if !samples.is_empty() {
            let rewards: Vec<f64> = samples.iter().map(|s| s.reward).collect();
            let n = rewards.len() as f64;
            let mean = rewards.iter().sum::<f64>() / n;
            let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
            let successes = batch_records.iter().filter(|r| r.success).count() as f64;
            state.curve.push(CurvePoint {
                batch: batch_index,
                mean_reward: mean,
                std_reward: std,
                success_rate: successes / tc.batch_size as f64,
            });
            update_policy(&mut state.policy, &samples, &mut state.baseline, &tc.update)?;
        }
        state.episodes_done += tc.batch_size;
        batch_index += 1;

        if batch_index % tc.eval_every == 0 || batch_index == tc.num_batches() {
            let score = evaluate(&state.policy, env, tc, tc.eval_episodes, true, selection_seed(tc.seed), false)?;
            if state.best_eval_reward.map_or(true, |b| score.mean_reward >= b) {
                state.best_eval_reward = Some(score.mean_reward);
                state.best_policy = state.policy.clone();
            }
        }
        on_batch(&state, &batch_records)?;
        records.extend(batch_records);
    }
    Ok(TrainOutput { state, records })
}

pub fn write_curve_csv(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends records to a JSON-lines log.
pub fn append_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Mean rewards of the first and last quarters of a learning curve.
pub fn quartile_means(curve: &[CurvePoint]) -> Option<(f64, f64)> {
    let q = curve.len() / 4;
    if q == 0 {
        return None;
    }
    let mean = |s: &[CurvePoint]| s.iter().map(|p| p.mean_reward).sum::<f64>() / s.len() as f64;
    Some((mean(&curve[..q]), mean(&curve[curve.len() - q..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        TrainConfig {
            total_episodes: 12,
            batch_size: 4,
            eval_every: 2,
            eval_episodes: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn curve_length_and_determinism() {
        let env = FlingEnv::default();
        let tc = tiny();
        let a = train(&env, &tc).unwrap();
        assert_eq!(a.state.curve.len(), tc.total_episodes / tc.batch_size);
        assert_eq!(a.records.len(), tc.total_episodes);
        assert!(a.state.best_eval_reward.is_some());
        let b = train(&env, &tc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resuming_matches_an_uninterrupted_run() {
        let env = FlingEnv::default();
        let tc = tiny();
        let full = train(&env, &tc).unwrap();
        let half = train(
            &env,
            &TrainConfig {
                total_episodes: 8,
                ..tc.clone()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        half.state.save(&path).unwrap();
        let resumed = train_from(&env, &tc, TrainState::load(&path).unwrap(), &mut |_, _| Ok(())).unwrap();
        assert_eq!(resumed.state, full.state);
    }

    #[test]
    fn evaluation_rates_are_fractions() {
        let env = FlingEnv::default();
        let tc = tiny();
        let p = tc.initial_policy(&env);
        let r = evaluate(&p, &env, &tc, 3, true, 1, false).unwrap();
        assert!((0.0..=1.0).contains(&r.success_rate));
        assert_eq!(r.episodes.len(), 3);
        // the zero-mean policy does not move the gripper
        assert_eq!(r.success_rate, 0.0);
        assert!(r.episodes.iter().all(|e| e.action == FlingAction::zero()));
    }

    #[test]
    fn artefacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let curve = vec![
            CurvePoint {
                batch: 0,
                mean_reward: -0.5,
                std_reward: 0.1,
                success_rate: 0.0,
            },
            CurvePoint {
                batch: 1,
                mean_reward: 2.0,
                std_reward: 4.0,
                success_rate: 0.25,
            },
        ];
        let path = dir.path().join("curve.csv");
        write_curve_csv(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("batch,mean_reward,std_reward,success_rate"));
        assert_eq!(text.lines().count(), 3);
        let log = dir.path().join("log.jsonl");
        append_jsonl(&curve, &log).unwrap();
        append_jsonl(&curve[..1], &log).unwrap();
        assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 3);
    }

    #[test]
    fn quartiles_of_a_rising_curve() {
        let curve: Vec<CurvePoint> = (0..8)
            .map(|b| CurvePoint {
                batch: b,
                mean_reward: b as f64,
                std_reward: 0.0,
                success_rate: 0.0,
            })
            .collect();
        assert_eq!(quartile_means(&curve), Some((0.5, 6.5)));
        assert_eq!(quartile_means(&curve[..3]), None);
    }
}
