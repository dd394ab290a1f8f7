//! Affine Gaussian policy over normalised actions and its clipped
//! policy-gradient update.
//!
//! Actions live in unit coordinates: component `i` of the sampled vector is
//! scaled by its bound, so the box `[-1, 1]^9` covers every admissible action.
//! Samples outside the box are clamped before they reach the environment,
//! while log-probabilities refer to the unclamped draw.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::action::{ActionBounds, FlingAction, ACTION_DIM};
use crate::error::{FlingError, Result};

/// Observation: bending and twisting moduli.
pub const OBS_DIM: usize = 2;
/// Weights, biases, log standard deviations.
pub const PARAM_DIM: usize = ACTION_DIM * OBS_DIM + 2 * ACTION_DIM;

const LN_SQRT_TAU: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    /// `mean = weights * obs_normalised + bias`, in unit action coordinates.
    pub weights: [[f64; OBS_DIM]; ACTION_DIM],
    pub bias: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
    /// Observation ranges mapped onto `[-1, 1]`.
    pub obs_low: [f64; OBS_DIM],
    pub obs_high: [f64; OBS_DIM],
    pub bounds: ActionBounds,
    /// Limits applied to `log_std` after every update.
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// One draw from the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledAction {
    /// Unclamped draw in unit coordinates.
    pub unit: [f64; ACTION_DIM],
    /// The clamped action handed to the environment.
    pub action: FlingAction,
    pub log_prob: f64,
}

/// Everything the update needs from one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub obs: [f64; OBS_DIM],
    pub unit: [f64; ACTION_DIM],
    /// Log-probability under the policy that drew the sample.
    pub log_prob: f64,
    pub reward: f64,
}

impl GaussianPolicy {
    /// Zero weights and bias (mean action is no motion) with a uniform spread.
    pub fn new(obs_low: [f64; OBS_DIM], obs_high: [f64; OBS_DIM], bounds: ActionBounds, std: f64) -> Self {
        Self {
            weights: [[0.0; OBS_DIM]; ACTION_DIM],
            bias: [0.0; ACTION_DIM],
            log_std: [std.ln(); ACTION_DIM],
            obs_low,
            obs_high,
            bounds,
            log_std_min: (0.02f64).ln(),
            log_std_max: (2.0f64).ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.params().iter().all(|v| v.is_finite());
        let ranges = (0..OBS_DIM).all(|k| self.obs_high[k] > self.obs_low[k]);
        if finite && ranges && self.log_std_min < self.log_std_max {
            self.bounds.validate()
        } else {
            Err(FlingError::Config("policy parameters must be finite with non-empty ranges".into()))
        }
    }

    pub fn normalise(&self, obs: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let mut o = [0.0; OBS_DIM];
        for k in 0..OBS_DIM {
            o[k] = 2.0 * (obs[k] - self.obs_low[k]) / (self.obs_high[k] - self.obs_low[k]) - 1.0;
        }
        o
    }

    /// Mean of the action distribution in unit coordinates.
    pub fn mean(&self, obs: &[f64; OBS_DIM]) -> [f64; ACTION_DIM] {
        let o = self.normalise(obs);
        let mut mu = self.bias;
        for (j, m) in mu.iter_mut().enumerate() {
            for k in 0..OBS_DIM {
                *m += self.weights[j][k] * o[k];
            }
        }
        mu
    }

    pub fn std(&self) -> [f64; ACTION_DIM] {
        self.log_std.map(f64::exp)
    }

    pub fn log_prob(&self, obs: &[f64; OBS_DIM], unit: &[f64; ACTION_DIM]) -> f64 {
        let mu = self.mean(obs);
        (0..ACTION_DIM)
            .map(|j| {
                let z = (unit[j] - mu[j]) / self.log_std[j].exp();
                -0.5 * z * z - self.log_std[j] - LN_SQRT_TAU
            })
            .sum()
    }

    /// Clamped environment action for a unit-coordinate vector.
    pub fn to_action(&self, unit: &[f64; ACTION_DIM]) -> FlingAction {
        FlingAction::from_unit(unit, &self.bounds).clamped(&self.bounds).0
    }

    pub fn deterministic_action(&self, obs: &[f64; OBS_DIM]) -> FlingAction {
        self.to_action(&self.mean(obs))
    }

    /// Flattened parameters: weights row by row, then bias, then log_std.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PARAM_DIM);
        v.extend(self.weights.iter().flatten());
        v.extend(&self.bias);
        v.extend(&self.log_std);
        v
    }

    pub fn set_params(&mut self, v: &[f64]) {
        assert_eq!(v.len(), PARAM_DIM);
        for j in 0..ACTION_DIM {
            for k in 0..OBS_DIM {
                self.weights[j][k] = v[j * OBS_DIM + k];
            }
        }
        let b = ACTION_DIM * OBS_DIM;
        self.bias.copy_from_slice(&v[b..b + ACTION_DIM]);
        self.log_std.copy_from_slice(&v[b + ACTION_DIM..]);
    }

    /// Gradient of `log_prob` with respect to the flattened parameters.
    pub fn log_prob_gradient(&self, obs: &[f64; OBS_DIM], unit: &[f64; ACTION_DIM]) -> Vec<f64> {
        let o = self.normalise(obs);
        let mu = self.mean(obs);
        let mut g = vec![0.0; PARAM_DIM];
        let b = ACTION_DIM * OBS_DIM;
        for j in 0..ACTION_DIM {
            let var = (2.0 * self.log_std[j]).exp();
            let diff = unit[j] - mu[j];
            let dmu = diff / var;
            for k in 0..OBS_DIM {
                g[j * OBS_DIM + k] = dmu * o[k];
            }
            g[b + j] = dmu;
            g[b + ACTION_DIM + j] = diff * diff / var - 1.0;
        }
        g
    }
}

pub fn sample_action<R: Rng + ?Sized>(policy: &GaussianPolicy, obs: &[f64; OBS_DIM], rng: &mut R) -> SampledAction {
    let mu = policy.mean(obs);
    let mut unit = [0.0; ACTION_DIM];
    for j in 0..ACTION_DIM {
        let z: f64 = rng.sample(StandardNormal);
        unit[j] = mu[j] + policy.log_std[j].exp() * z;
    }
    SampledAction {
        unit,
        action: policy.to_action(&unit),
        log_prob: policy.log_prob(obs, &unit),
    }
}

/// Exponentially weighted running mean of batch rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBaseline {
    pub value: f64,
    /// Weight kept by the old value at each update.
    pub decay: f64,
    pub initialized: bool,
}

impl RewardBaseline {
    pub fn new(decay: f64) -> Self {
        Self {
            value: 0.0,
            decay,
            initialized: false,
        }
    }

    pub fn update(&mut self, batch_mean: f64) {
        self.value = self.decay * self.value + (1.0 - self.decay) * batch_mean;
        self.initialized = true;
    }

    /// Advantages `reward - baseline` against the baseline before this batch
    /// (seeded with the batch mean on first use), optionally divided by the
    /// batch reward spread; then folds the batch into the baseline.
    pub fn advantages(&mut self, rewards: &[f64], normalize: bool) -> Vec<f64> {
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        if !self.initialized {
            self.value = mean;
            self.initialized = true;
        }
        let mut adv: Vec<f64> = rewards.iter().map(|r| r - self.value).collect();
        if normalize {
            let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
            if std <= 1e-12 * (1.0 + mean.abs()) {
                adv.iter_mut().for_each(|a| *a = 0.0);
            } else {
                adv.iter_mut().for_each(|a| *a /= std);
            }
        }
        self.update(mean);
        adv
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateConfig {
    pub learning_rate: f64,
    pub clip_ratio: f64,
    /// Gradient steps taken on each batch.
    pub epochs: usize,
    pub normalize_advantages: bool,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            clip_ratio: 0.2,
            epochs: 4,
            normalize_advantages: true,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate > 0.0 && self.clip_ratio > 0.0 && self.clip_ratio < 1.0 && self.epochs >= 1 {
            Ok(())
        } else {
            Err(FlingError::Config(
                "learning rate must be positive, clip ratio in (0, 1), at least one epoch".into(),
            ))
        }
    }
}

/// Clipped surrogate `mean_i min(rho_i A_i, clip(rho_i, 1 - eps, 1 + eps) A_i)`
/// with `rho_i` the probability ratio against the sampling policy.
pub fn surrogate(policy: &GaussianPolicy, batch: &[Sample], advantages: &[f64], clip: f64) -> f64 {
    batch
        .iter()
        .zip(advantages)
        .map(|(s, a)| {
            let rho = (policy.log_prob(&s.obs, &s.unit) - s.log_prob).exp();
            f64::min(rho * a, rho.clamp(1.0 - clip, 1.0 + clip) * a)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Analytic gradient of [`surrogate`]. A sample contributes only while its
/// ratio is inside the clip range on the side its advantage pushes towards.
pub fn surrogate_gradient(policy: &GaussianPolicy, batch: &[Sample], advantages: &[f64], clip: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; PARAM_DIM];
    for (i, (s, &a)) in batch.iter().zip(advantages).enumerate() {
        if a == 0.0 {
            continue;
        }
        let rho = (policy.log_prob(&s.obs, &s.unit) - s.log_prob).exp();
        if !rho.is_finite() || !a.is_finite() {
            return Err(FlingError::NonFiniteGradient { index: i });
        }
        let active = if a > 0.0 { rho < 1.0 + clip } else { rho > 1.0 - clip };
        if !active {
            continue;
        }
        let gl = policy.log_prob_gradient(&s.obs, &s.unit);
        let w = a * rho;
        if gl.iter().any(|v| !v.is_finite()) {
            return Err(FlingError::NonFiniteGradient { index: i });
        }
        for (gk, lk) in g.iter_mut().zip(&gl) {
            *gk += w * lk;
        }
    }
    let n = batch.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub advantages: Vec<f64>,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
}

/// Advantages from the baseline, then `epochs` plain gradient-ascent steps
/// on the clipped surrogate.
pub fn update_policy(
    policy: &mut GaussianPolicy,
    batch: &[Sample],
    baseline: &mut RewardBaseline,
    cfg: &UpdateConfig,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(FlingError::Config("empty batch".into()));
    }
    cfg.validate()?;
    let rewards: Vec<f64> = batch.iter().map(|s| s.reward).collect();
    let advantages = baseline.advantages(&rewards, cfg.normalize_advantages);
    let surrogate_before = surrogate(policy, batch, &advantages, cfg.clip_ratio);
    for _ in 0..cfg.epochs {
        let g = surrogate_gradient(policy, batch, &advantages, cfg.clip_ratio)?;
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        let mut p = policy.params();
        for (pk, gk) in p.iter_mut().zip(&g) {
            *pk += cfg.learning_rate * gk;
        }
        policy.set_params(&p);
        for l in &mut policy.log_std {
            *l = l.clamp(policy.log_std_min, policy.log_std_max);
        }
    }
    let surrogate_after = surrogate(policy, batch, &advantages, cfg.clip_ratio);
    Ok(UpdateStats {
        advantages,
        surrogate_before,
        surrogate_after,
    })
}
