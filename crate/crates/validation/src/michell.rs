//! Out-of-plane instability of a twisted closed ring.
//!
//! A planar ring carrying uniform twist is an equilibrium for any twist, and
//! becomes unstable at `2 pi sqrt(3) / (beta / alpha)` for unit radius. The
//! measurement raises the twist stepwise, injects small out-of-plane noise at
//! every level, and lets the ring evolve for a fixed time; once a level makes
//! the ring leave its plane, the threshold is bisected from the last planar
//! state.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rodsim_core::dynamics::project_inextensibility;
use rodsim_core::geometry::time_parallel_update;
use rodsim_core::{step, BoundaryCondition, Centerline, RodParams, RodState, SceneConfig, StepConfig, Vec3};

use crate::error::{Result, ValidationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MichellConfig {
    pub n: usize,
    pub alpha: f64,
    pub radius: f64,
    /// Mass per unit length.
    pub density: f64,
    pub damping: f64,
    pub dt: f64,
    /// Out-of-plane noise amplitude, in units of the radius.
    pub noise_amplitude: f64,
    /// Out-of-plane deviation that counts as buckled, in units of the radius.
    pub threshold: f64,
    /// Twist increment of the coarse scan (rad).
    pub twist_step: f64,
    /// Simulated time at each coarse level.
    pub coarse_time: f64,
    /// Simulated time of each bisection trial.
    pub bisection_time: f64,
    /// Bisection stops once the bracket is narrower than this (rad).
    pub bisection_tol: f64,
    /// Give up when the twist exceeds this multiple of the closed-form threshold.
    pub max_factor: f64,
    pub seed: u64,
}

impl Default for MichellConfig {
    fn default() -> Self {
        Self {
            n: 50,
            alpha: 1.0,
            radius: 1.0,
            density: 1.0,
            damping: 0.05,
            dt: 0.01,
            noise_amplitude: 1e-4,
            threshold: 0.05,
            twist_step: 0.5,
            coarse_time: 40.0,
            bisection_time: 150.0,
            bisection_tol: 0.02,
            max_factor: 2.0,
            seed: 7,
        }
    }
}

impl MichellConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 6
            && self.alpha > 0.0
            && self.radius > 0.0
            && self.density > 0.0
            && self.damping >= 0.0
            && self.dt > 0.0
            && self.noise_amplitude > 0.0
            && self.threshold > 0.0
            && self.twist_step > 0.0
            && self.coarse_time > 0.0
            && self.bisection_time > 0.0
            && self.bisection_tol > 0.0
            && self.max_factor > 1.0;
        if ok {
            Ok(())
        } else {
            Err(ValidationError::Config("invalid ring buckling configuration".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MichellResult {
    pub beta_over_alpha: f64,
    pub theta_c_measured: f64,
    pub theta_c_analytic: f64,
    pub deviation_pct: f64,
}

/// Critical ring twist for unit radius.
pub fn michell_analytic(beta_over_alpha: f64) -> f64 {
    std::f64::consts::TAU * 3f64.sqrt() / beta_over_alpha
}

/// Largest distance of a node from the best-fit plane of all nodes.
pub fn out_of_plane_deviation(nodes: &[Vec3]) -> f64 {
    let centroid = nodes.iter().sum::<Vec3>() / nodes.len() as f64;
    let cov = nodes.iter().fold(Matrix3::zeros(), |acc, x| {
        let d = x - centroid;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let normal = eig.eigenvectors.column(k).into_owned();
    nodes.iter().map(|x| (x - centroid).dot(&normal).abs()).fold(0.0, f64::max)
}

/// Planar ring of `n` equal edges in the xy plane.
pub fn ring(n: usize, radius: f64) -> Result<Centerline> {
    let nodes: Vec<Vec3> = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
        .collect();
    Ok(Centerline::closed_from_nodes(nodes)?)
}

struct Ring {
    params: RodParams,
    bc: BoundaryCondition,
    scene: SceneConfig,
    step_cfg: StepConfig,
}

impl Ring {
    /// Adds out-of-plane noise, restores edge lengths and the material frame.
    fn perturb(&self, s: &mut RodState, amplitude: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut c = s.centerline.clone();
        for x in &mut c.nodes {
            x.z += rng.random_range(-amplitude..=amplitude);
        }
        let inv = self.bc.inverse_masses(&self.params);
        project_inextensibility(&mut c, &inv, self.step_cfg.projection_tol, self.step_cfg.projection_max_iters)?;
        s.frames = time_parallel_update(&s.frames, &c)?;
        s.centerline = c;
        s.relax_material(&self.params, &self.bc)?;
        Ok(())
    }

    /// Evolves for `duration`; true as soon as the ring leaves its plane.
    fn buckles(&self, s: &mut RodState, duration: f64, threshold: f64) -> Result<bool> {
        let steps = (duration / self.step_cfg.dt).ceil() as usize;
        for k in 0..steps {
            step(s, &self.params, &self.bc, &self.scene, &self.step_cfg)?;
            if k % 25 == 0 && out_of_plane_deviation(&s.centerline.nodes) > threshold {
                return Ok(true);
            }
        }
        Ok(out_of_plane_deviation(&s.centerline.nodes) > threshold)
    }
}

/// Measures the critical twist of one stiffness ratio.
pub fn measure_critical_twist(beta_over_alpha: f64, cfg: &MichellConfig) -> Result<MichellResult> {
    cfg.validate()?;
    if !(beta_over_alpha > 0.0) {
        return Err(ValidationError::Config("stiffness ratio must be positive".into()));
    }
    let analytic = michell_analytic(beta_over_alpha) / cfg.radius;
    let c = ring(cfg.n, cfg.radius)?;
    let params = RodParams::with_linear_density(&c, cfg.alpha, beta_over_alpha * cfg.alpha, cfg.density, cfg.damping);
    let sim = Ring {
        params,
        bc: BoundaryCondition::free().clamp_theta(0, 0.0),
        scene: SceneConfig::empty(),
        step_cfg: StepConfig {
            dt: cfg.dt,
            ..StepConfig::default()
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amplitude = cfg.noise_amplitude * cfg.radius;
    let threshold = cfg.threshold * cfg.radius;

    let mut state = RodState::new(c, &Vec3::z())?;
    state.relax_material(&sim.params, &sim.bc)?;
    let mut planar = state.clone();
    let mut lo = 0.0;
    let mut twist = 0.0;
    let hi = loop {
        twist += cfg.twist_step;
        if twist > cfg.max_factor * analytic {
            return Err(ValidationError::NoRingBuckling { max_twist: lo });
        }
        state.material.seam_twist = twist;
        sim.perturb(&mut state, amplitude, &mut rng)?;
        if sim.buckles(&mut state, cfg.coarse_time, threshold)? {
            break twist;
        }
        planar = state.clone();
        lo = twist;
    };

    let mut hi = hi;
    while hi - lo > cfg.bisection_tol {
        let mid = 0.5 * (lo + hi);
        let mut trial = planar.clone();
        trial.material.seam_twist = mid;
        sim.perturb(&mut trial, amplitude, &mut rng)?;
        if sim.buckles(&mut trial, cfg.bisection_time, threshold)? {
            hi = mid;
        } else {
            lo = mid;
            planar = trial;
        }
    }
    let measured = 0.5 * (lo + hi);
    Ok(MichellResult {
        beta_over_alpha,
        theta_c_measured: measured,
        theta_c_analytic: analytic,
        deviation_pct: 100.0 * (measured - analytic).abs() / analytic,
    })
}

/// Sweeps stiffness ratios in parallel.
pub fn run_michell(beta_over_alpha_values: &[f64], cfg: &MichellConfig) -> Result<Vec<MichellResult>> {
    beta_over_alpha_values
        .par_iter()
        .map(|&r| measure_critical_twist(r, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Unit};

    #[test]
    fn analytic_examples() {
        assert_relative_eq!(michell_analytic(1.0), 10.882796185405306, epsilon = 1e-12);
        assert_relative_eq!(michell_analytic(0.5), 21.765592370810612, epsilon = 1e-12);
        assert_relative_eq!(michell_analytic(2.0), 0.5 * michell_analytic(1.0), epsilon = 1e-12);
    }

    #[test]
    fn planar_ring_has_no_deviation_in_any_orientation() {
        let c = ring(30, 1.0).unwrap();
        assert!(out_of_plane_deviation(&c.nodes) < 1e-12);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, 0.5)), 0.8);
        let moved: Vec<Vec3> = c.nodes.iter().map(|x| rot * x + Vec3::new(3.0, 0.0, -1.0)).collect();
        assert!(out_of_plane_deviation(&moved) < 1e-12);
    }

    #[test]
    fn deviation_of_a_saddle() {
        // opposite nodes up, the pair between them down: the best-fit plane
        // stays at z = 0 by symmetry
        let mut c = ring(40, 1.0).unwrap();
        for (i, h) in [(0, 0.1), (20, 0.1), (10, -0.1), (30, -0.1)] {
            c.nodes[i].z = h;
        }
        assert_relative_eq!(out_of_plane_deviation(&c.nodes), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn twisted_planar_ring_is_an_equilibrium() {
        let c = ring(24, 1.0).unwrap();
        let mut s = RodState::new(c, &Vec3::z()).unwrap();
        let p = RodParams::with_linear_density(&s.centerline, 1.0, 1.0, 1.0, 0.0);
        let bc = BoundaryCondition::free().clamp_theta(0, 0.0);
        s.material.seam_twist = 5.0;
        s.relax_material(&p, &bc).unwrap();
        let start = s.centerline.clone();
        for _ in 0..200 {
            step(&mut s, &p, &bc, &SceneConfig::empty(), &StepConfig::default()).unwrap();
        }
        for (a, b) in s.centerline.nodes.iter().zip(&start.nodes) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
