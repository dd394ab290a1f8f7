//! Per-step cost with and without the elastic-force computation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use rodsim_core::{step, BoundaryCondition, Centerline, RodParams, RodState, SceneConfig, StepConfig, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n_values: Vec<usize>,
    /// Timed repetitions per variant; the median is reported.
    pub repeats: usize,
    /// Steps per repetition.
    pub steps: usize,
    /// Untimed steps before the first repetition.
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_values: vec![20, 30, 40, 50, 60],
            repeats: 51,
            steps: 200,
            warmup: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    /// Median seconds per step without elastic forces.
    pub time_without: f64,
    pub time_with: f64,
    pub overhead_pct: f64,
}

/// A 1 m wire with one end clamped, starting bent into a loose helix so the
/// elastic forces are not trivially zero, swinging under gravity.
fn bench_rod(n: usize) -> (RodState, RodParams, BoundaryCondition, SceneConfig) {
    let l = 1.0 / n as f64;
    let mut nodes = vec![Vec3::zeros()];
    for i in 0..n {
        let a = 0.15 * i as f64;
        nodes.push(nodes[i] + Vec3::new(a.cos(), a.sin(), 0.3).normalize() * l);
    }
    let c = Centerline::from_nodes(nodes).expect("bench rod is valid");
    let p = RodParams::with_linear_density(&c, 0.01, 0.01, 0.05, 0.5);
    let bc = BoundaryCondition::free().pin(0, c.nodes[0]).pin(1, c.nodes[1]).clamp_theta(0, 0.0);
    let s = RodState::new(c, &Vec3::z()).expect("bench rod is valid");
    let scene = SceneConfig {
        gravity: Vec3::new(0.0, 0.0, -9.81),
        ..SceneConfig::empty()
    };
    (s, p, bc, scene)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn time_per_step(n: usize, elastic: bool, cfg: &BenchConfig) -> rodsim_core::Result<f64> {
    let (s0, p, bc, scene) = bench_rod(n);
    let step_cfg = StepConfig {
        elastic,
        ..StepConfig::default()
    };
    let mut s = s0.clone();
    for _ in 0..cfg.warmup {
        step(&mut s, &p, &bc, &scene, &step_cfg)?;
    }
    let mut samples = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats.max(1) {
        let mut s = s0.clone();
        let t = Instant::now();
        for _ in 0..cfg.steps.max(1) {
            step(&mut s, &p, &bc, &scene, &step_cfg)?;
        }
        samples.push(t.elapsed().as_secs_f64() / cfg.steps.max(1) as f64);
    }
    Ok(median(samples))
}

/// Runs the variants interleaved per `n` so slow drifts of the machine affect
/// both alike.
pub fn run_bench(cfg: &BenchConfig) -> rodsim_core::Result<Vec<BenchRow>> {
    cfg.n_values
        .iter()
        .map(|&n| {
            let time_without = time_per_step(n, false, cfg)?;
            let time_with = time_per_step(n, true, cfg)?;
            Ok(BenchRow {
                n,
                time_without,
                time_with,
                overhead_pct: 100.0 * (time_with - time_without) / time_without,
            })
        })
        .collect()
}

pub fn write_bench_csv<W: std::io::Write>(rows: &[BenchRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
