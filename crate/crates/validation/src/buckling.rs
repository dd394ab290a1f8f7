//! Localized helical buckling of a straight rod with clamped ends under
//! imposed end twist and end shortening.
//!
//! The tangent deviation `phi(s)` from the clamp axis is compared against the
//! closed-form envelope. With `f(phi) = (cos phi - cos phi0) / (1 - cos phi0)`
//! the equilibrium profile is `f = tanh^2((s - s_c) / s*)`, where `s_c` is the
//! buckle center and `1/s* = (beta m / 2 alpha) sqrt((1 - cos phi0) / (1 + cos phi0))`.

use nalgebra::Rotation3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rodsim_core::dynamics::{relax, RelaxConfig};
use rodsim_core::energy::vertex_twists;
use rodsim_core::{step, BoundaryCondition, Centerline, RodParams, RodState, SceneConfig, StepConfig, Vec3};

use crate::error::{Result, ValidationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucklingConfig {
    pub length: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Imposed end twist in full turns.
    pub turns: f64,
    /// End-to-end shortening, same length unit as `length`.
    pub end_shift: f64,
    pub n_values: Vec<usize>,
    pub twist_increments: usize,
    pub shift_increments: usize,
    pub steps_per_increment: usize,
    pub dt: f64,
    /// Mass per unit length.
    pub density: f64,
    /// Velocity damping rate during the ramps.
    pub damping: f64,
    pub final_relax_steps: usize,
    pub final_kinetic_tol: f64,
    /// Peak tangent angle of the initial bump that selects the buckle site (rad).
    pub seed_angle: f64,
    /// Outcomes with a smaller maximal deviation count as not buckled (rad).
    pub min_phi0: f64,
    /// Axis-angle rotation applied to the whole setup.
    pub orientation: [f64; 3],
    /// Seed for the reference director of the first edge.
    pub reference_dir: [f64; 3],
}

impl Default for BucklingConfig {
    fn default() -> Self {
        Self {
            length: 9.29,
            alpha: 1.345,
            beta: 0.789,
            turns: 27.0,
            end_shift: 0.3,
            n_values: vec![40, 80, 140],
            twist_increments: 2000,
            shift_increments: 2000,
            steps_per_increment: 4,
            dt: 0.005,
            density: 1.0,
            damping: 10.0,
            final_relax_steps: 40_000,
            final_kinetic_tol: 1e-14,
            seed_angle: 0.05,
            min_phi0: 0.05,
            orientation: [0.0; 3],
            reference_dir: [0.0, 0.0, 1.0],
        }
    }
}

impl BucklingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ValidationError::Config(m.to_string()));
        if !(self.turns > 0.0) {
            return bad("turns must be positive");
        }
        if !(self.end_shift > 0.0 && self.end_shift < self.length) {
            return bad("end shift must lie in (0, length)");
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad("moduli must be positive");
        }
        if self.n_values.iter().any(|&n| n < 8) {
            return bad("each section count must be at least 8");
        }
        if self.twist_increments == 0 || self.shift_increments == 0 || self.steps_per_increment == 0 {
            return bad("ramp increments and steps must be positive");
        }
        if !(self.dt > 0.0 && self.density > 0.0 && self.damping >= 0.0) {
            return bad("dt and density must be positive, damping non-negative");
        }
        Ok(())
    }

    fn rotation(&self) -> Rotation3<f64> {
        Rotation3::new(Vec3::from(self.orientation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub s_over_sstar: f64,
    pub f_measured: f64,
    pub f_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub n: usize,
    pub samples: Vec<EnvelopeSample>,
    pub avg_error: f64,
    pub phi0: f64,
    pub s_star: f64,
    /// Twist per unit length carried by the rod after buckling.
    pub twist_density: f64,
    /// Arc length of the buckle center.
    pub center: f64,
}

/// `(cos phi - cos phi0) / (1 - cos phi0)`.
pub fn analytic_envelope(phi: f64, phi0: f64) -> Result<f64> {
    let denom = 1.0 - phi0.cos();
    if !(phi0 > 0.0 && phi0 < std::f64::consts::PI) || denom < 1e-14 {
        return Err(ValidationError::Config(format!("maximal deviation {phi0} must lie in (0, pi)")));
    }
    Ok((phi.cos() - phi0.cos()) / denom)
}

/// Closed-form envelope as a function of distance from the buckle center.
pub fn envelope_profile(s_over_sstar: f64) -> f64 {
    s_over_sstar.tanh().powi(2)
}

/// `s*` from the twist density and the maximal deviation.
pub fn decay_length(alpha: f64, beta: f64, twist_density: f64, phi0: f64) -> f64 {
    let k = beta * twist_density / (2.0 * alpha) * ((1.0 - phi0.cos()) / (1.0 + phi0.cos())).sqrt();
    1.0 / k
}

/// Straight rod along +x with a small antisymmetric bend in the middle that
/// keeps both end edges on the axis and the far end on the axis.
fn seeded_rod(cfg: &BucklingConfig, n: usize) -> Result<Centerline> {
    let ell = cfg.length / n as f64;
    let mid = 0.5 * cfg.length;
    let width = 0.5;
    let angles: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return 0.0;
            }
            let u = ((i as f64 + 0.5) * ell - mid) / width;
            cfg.seed_angle * std::f64::consts::E.sqrt() * std::f64::consts::SQRT_2 * u * (-u * u).exp()
        })
        .collect();
    let mut nodes = vec![Vec3::zeros()];
    for a in &angles {
        let last = *nodes.last().expect("non-empty");
        nodes.push(last + Vec3::new(a.cos(), a.sin(), 0.0) * ell);
    }
    Ok(Centerline::new(nodes, vec![ell; n])?)
}

/// Simulates one discretization and fits the envelope.
pub fn buckle_once(cfg: &BucklingConfig, n: usize) -> Result<EnvelopeResult> {
    let state = simulate_buckling(cfg, n)?;
    measure_envelope(cfg, &state, n)
}

/// Twists, shortens and relaxes a rod of `n` edges; returns the final state.
pub fn simulate_buckling(cfg: &BucklingConfig, n: usize) -> Result<RodState> {
    cfg.validate()?;
    let rot = cfg.rotation();
    let axis = rot * Vec3::x();
    let ell = cfg.length / n as f64;
    let c = seeded_rod(cfg, n)?.map_nodes(|x| rot * x);
    let u0 = rot * Vec3::from(cfg.reference_dir);
    let mut state = RodState::new(c, &u0)?;
    let params = RodParams::with_linear_density(&state.centerline, cfg.alpha, cfg.beta, cfg.density, cfg.damping);
    let scene = SceneConfig::empty();
    let step_cfg = StepConfig {
        dt: cfg.dt,
        ..StepConfig::default()
    };
    let total_twist = cfg.turns * std::f64::consts::TAU;

    let nodes = state.centerline.nodes.clone();
    let far_start = [nodes[n - 1], nodes[n]];
    let far_end = [
        nodes[0] + axis * (cfg.length - cfg.end_shift - ell),
        nodes[0] + axis * (cfg.length - cfg.end_shift),
    ];
    let mut bc = BoundaryCondition::free()
        .pin(0, nodes[0])
        .pin(1, nodes[1])
        .pin(n - 1, far_start[0])
        .pin(n, far_start[1])
        .clamp_theta(0, 0.0)
        .clamp_theta(n - 1, 0.0);
    state.relax_material(&params, &bc)?;

    for k in 1..=cfg.twist_increments {
        bc.set_theta(n - 1, total_twist * k as f64 / cfg.twist_increments as f64);
        for _ in 0..cfg.steps_per_increment {
            step(&mut state, &params, &bc, &scene, &step_cfg)?;
        }
    }
    for k in 1..=cfg.shift_increments {
        let t = k as f64 / cfg.shift_increments as f64;
        bc.set_pin(n - 1, far_start[0].lerp(&far_end[0], t));
        bc.set_pin(n, far_start[1].lerp(&far_end[1], t));
        for _ in 0..cfg.steps_per_increment {
            step(&mut state, &params, &bc, &scene, &step_cfg)?;
        }
    }
    relax(
        &mut state,
        &params,
        &bc,
        &scene,
        &step_cfg,
        &RelaxConfig {
            max_steps: cfg.final_relax_steps,
            kinetic_tol: cfg.final_kinetic_tol,
            damping: cfg.damping,
        },
    )?;
    Ok(state)
}

/// Fits the envelope to a buckled state of `n` edges.
pub fn measure_envelope(cfg: &BucklingConfig, state: &RodState, n: usize) -> Result<EnvelopeResult> {
    let axis = cfg.rotation() * Vec3::x();
    let ell = cfg.length / n as f64;
    let phis: Vec<f64> = state
        .frames
        .tangents
        .iter()
        .map(|t| t.dot(&axis).clamp(-1.0, 1.0).acos())
        .collect();
    let arc: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * ell).collect();

    // peak of phi, refined by a parabola through the largest sample and its neighbours
    let imax = (1..n - 1)
        .max_by(|&a, &b| phis[a].total_cmp(&phis[b]))
        .expect("at least three edges");
    let (pm, p0, pp) = (phis[imax - 1], phis[imax], phis[imax + 1]);
    let curv = pm - 2.0 * p0 + pp;
    let (offset, phi0) = if curv < 0.0 {
        let d = (0.5 * (pm - pp) / curv).clamp(-0.5, 0.5);
        (d, p0 - 0.25 * (pm - pp) * d)
    } else {
        (0.0, p0)
    };
    let center = arc[imax] + offset * ell;
    if phi0 < cfg.min_phi0 {
        return Err(ValidationError::NotBuckled { phi0 });
    }

    let twists = vertex_twists(&state.centerline, &state.frames, &state.material);
    let voronoi: f64 = state.centerline.vertices().map(|v| state.centerline.voronoi_length(&v)).sum();
    let twist_density = twists.iter().sum::<f64>() / voronoi;
    let s_star = decay_length(cfg.alpha, cfg.beta, twist_density.abs(), phi0);

    let samples: Vec<EnvelopeSample> = (1..n - 1)
        .map(|i| {
            let x = (arc[i] - center) / s_star;
            Ok(EnvelopeSample {
                s_over_sstar: x,
                f_measured: analytic_envelope(phis[i], phi0)?,
                f_analytic: envelope_profile(x),
            })
        })
        .collect::<Result<_>>()?;
    let avg_error =
        samples.iter().map(|s| (s.f_measured - s.f_analytic).abs()).sum::<f64>() / samples.len() as f64;
    Ok(EnvelopeResult {
        n,
        samples,
        avg_error,
        phi0,
        s_star,
        twist_density,
        center,
    })
}

/// Runs every section count of `cfg`, in parallel.
pub fn run_helical_buckling(cfg: &BucklingConfig) -> Result<Vec<EnvelopeResult>> {
    cfg.validate()?;
    cfg.n_values.par_iter().map(|&n| buckle_once(cfg, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn envelope_examples() {
        assert_relative_eq!(analytic_envelope(0.0, 0.9).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(analytic_envelope(0.9, 0.9).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(analytic_envelope(FRAC_PI_4, FRAC_PI_2).unwrap(), FRAC_PI_4.cos(), epsilon = 1e-15);
        assert!(analytic_envelope(0.0, 0.0).is_err());
        assert!(analytic_envelope(0.0, PI).is_err());
    }

    #[test]
    fn profile_is_zero_at_center_and_one_far_away() {
        assert_eq!(envelope_profile(0.0), 0.0);
        assert!((envelope_profile(10.0) - 1.0).abs() < 1e-8);
        assert_eq!(envelope_profile(-1.3), envelope_profile(1.3));
    }

    #[test]
    fn decay_length_matches_shortening_balance() {
        // the buckle absorbs end shortening (1 - cos phi0) * 2 s*
        let (alpha, beta) = (1.345, 0.789);
        let m = 27.0 * std::f64::consts::TAU / 9.29;
        let shift: f64 = 0.3;
        let phi0 = (shift * beta * m / (4.0 * alpha)).asin();
        let s_star = decay_length(alpha, beta, m, phi0);
        assert_relative_eq!(2.0 * s_star * (1.0 - phi0.cos()), shift, epsilon = 1e-12);
        assert!((phi0.to_degrees() - 53.5).abs() < 0.5);
        assert!((s_star - 0.37).abs() < 0.01);
    }

    #[test]
    fn seeded_rod_is_clamped_on_axis() {
        let cfg = BucklingConfig::default();
        let c = seeded_rod(&cfg, 40).unwrap();
        let t = c.tangents().unwrap();
        assert_eq!(t[0], Vec3::x());
        assert_eq!(t[39], Vec3::x());
        let end = c.nodes[40];
        assert!(end.y.abs() < 1e-12 && end.x < cfg.length && end.x > cfg.length - 1e-2);
    }

    #[test]
    fn config_checks() {
        let mut cfg = BucklingConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.end_shift = 10.0;
        assert!(cfg.validate().is_err());
        cfg = BucklingConfig {
            turns: 0.0,
            ..BucklingConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
