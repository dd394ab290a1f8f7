//! Constrained time stepping of a discrete elastic rod.
//!
//! One step: elastic forces from the relaxed material frame, gravity and
//! penalty contact; a semi-implicit Euler velocity update; exponential
//! velocity damping; position update; inextensibility projection with
//! velocity correction; boundary conditions; frame transport and a fresh
//! quasi-static material-frame solve.
//!
//! The velocity update is linearly implicit in a constant bending stiffness
//! (the small-angle Hessian of the bending energy about a straight rod) and
//! in the penalty contact stiffness and damping. The forces themselves are
//! evaluated exactly at the current configuration, so equilibria are those of
//! the full model; the implicit terms only remove the explicit stability limit
//! of the stiffest modes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::contact::{node_contact, NodeContact, SceneConfig};
use crate::energy::{centerline_forces, elastic_energy, solve_quasistatic_thetas, MaterialFrame, RodParams};
use crate::error::{Result, RodError};
use crate::geometry::{init_reference_frames, time_parallel_update, Centerline, FrameSet};
use crate::linalg::{solve_cyclic_tridiagonal, solve_tridiagonal, SymBand};
use crate::Vec3;

pub const DEFAULT_DT: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub centerline: Centerline,
    pub velocities: Vec<Vec3>,
    pub frames: FrameSet,
    pub material: MaterialFrame,
    pub time: f64,
    #[serde(default)]
    pub steps: u64,
    /// Constraint force carried by each edge (positive pulls its nodes
    /// together), accumulated from the projection and fed into the next step
    /// so that constrained equilibria are fixed points of the integrator.
    #[serde(default)]
    pub edge_tensions: Vec<f64>,
}

impl RodState {
    /// Rod at rest with reference frames seeded from `u0` and an untwisted
    /// material frame.
    pub fn new(centerline: Centerline, u0: &Vec3) -> Result<Self> {
        centerline.validate()?;
        let frames = init_reference_frames(&centerline, u0)?;
        let material = MaterialFrame::untwisted(&centerline);
        Ok(Self {
            velocities: vec![Vec3::zeros(); centerline.num_nodes()],
            edge_tensions: vec![0.0; centerline.num_edges()],
            centerline,
            frames,
            material,
            time: 0.0,
            steps: 0,
        })
    }

    pub fn kinetic_energy(&self, p: &RodParams) -> f64 {
        self.velocities
            .iter()
            .zip(&p.node_masses)
            .map(|(v, m)| 0.5 * m * v.norm_squared())
            .sum()
    }

    pub fn gravitational_energy(&self, p: &RodParams, gravity: &Vec3) -> f64 {
        -self
            .centerline
            .nodes
            .iter()
            .zip(&p.node_masses)
            .map(|(x, m)| m * gravity.dot(x))
            .sum::<f64>()
    }

    pub fn elastic_energy(&self, p: &RodParams) -> Result<f64> {
        elastic_energy(&self.centerline, &self.frames, &self.material, p)
    }

    /// Elastic + kinetic + gravitational energy.
    pub fn mechanical_energy(&self, p: &RodParams, gravity: &Vec3) -> Result<f64> {
        Ok(self.elastic_energy(p)? + self.kinetic_energy(p) + self.gravitational_energy(p, gravity))
    }

    /// Re-imposes clamps and re-solves the free material angles.
    pub fn relax_material(&mut self, p: &RodParams, bc: &BoundaryCondition) -> Result<()> {
        bc.apply_to_material(&mut self.material);
        self.material = solve_quasistatic_thetas(&self.centerline, &self.frames, &self.material, p)?;
        Ok(())
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// A node held at a prescribed world position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub node: usize,
    pub position: Vec3,
}

/// Gripper pose: position of the grasped end node, unit direction of the
/// grasped edge (pointing into the gripper), and material twist of that edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperPose {
    pub position: Vec3,
    pub direction: Vec3,
    pub twist: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub pins: Vec<Pin>,
    /// `(edge, angle)` pairs held fixed in the material-frame solve.
    pub theta_clamps: Vec<(usize, f64)>,
}

impl BoundaryCondition {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn pin(mut self, node: usize, position: Vec3) -> Self {
        self.set_pin(node, position);
        self
    }

    pub fn clamp_theta(mut self, edge: usize, angle: f64) -> Self {
        self.set_theta(edge, angle);
        self
    }

    pub fn set_pin(&mut self, node: usize, position: Vec3) {
        match self.pins.iter_mut().find(|p| p.node == node) {
            Some(p) => p.position = position,
            None => self.pins.push(Pin { node, position }),
        }
    }

    pub fn set_theta(&mut self, edge: usize, angle: f64) {
        match self.theta_clamps.iter_mut().find(|(e, _)| *e == edge) {
            Some(c) => c.1 = angle,
            None => self.theta_clamps.push((edge, angle)),
        }
    }

    /// Holds the last edge of an open rod in a gripper: pins the end node and
    /// its neighbour along the gripper direction, and clamps the edge twist.
    pub fn set_gripper(&mut self, rod: &Centerline, pose: &GripperPose) {
        let n = rod.num_edges();
        let d = pose.direction.normalize();
        self.set_pin(n, pose.position);
        self.set_pin(n - 1, pose.position - d * rod.rest_lengths[n - 1]);
        self.set_theta(n - 1, pose.twist);
    }

    pub fn is_pinned(&self, node: usize) -> bool {
        self.pins.iter().any(|p| p.node == node)
    }

    pub fn validate(&self, c: &Centerline) -> Result<()> {
        for (i, p) in self.pins.iter().enumerate() {
            if p.node >= c.num_nodes() {
                return Err(RodError::Config(format!("pinned node {} out of range", p.node)));
            }
            if self.pins[..i].iter().any(|q| q.node == p.node) {
                return Err(RodError::Config(format!("node {} pinned twice", p.node)));
            }
        }
        if let Some((e, _)) = self.theta_clamps.iter().find(|(e, _)| *e >= c.num_edges()) {
            return Err(RodError::Config(format!("clamped edge {e} out of range")));
        }
        Ok(())
    }

    /// Writes the clamped angles into `m` and marks them clamped.
    pub fn apply_to_material(&self, m: &mut MaterialFrame) {
        for &(e, angle) in &self.theta_clamps {
            m.thetas[e] = angle;
            if !m.clamped.contains(&e) {
                m.clamped.push(e);
            }
        }
    }

    /// Node inverse masses with pinned nodes made immovable.
    pub fn inverse_masses(&self, p: &RodParams) -> Vec<f64> {
        let mut w: Vec<f64> = p.node_masses.iter().map(|m| 1.0 / m).collect();
        for pin in &self.pins {
            w[pin.node] = 0.0;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepConfig {
    pub dt: f64,
    /// Relative edge-length tolerance of the inextensibility projection.
    pub projection_tol: f64,
    pub projection_max_iters: usize,
    /// Scale of the implicit bending stiffness (0 gives plain symplectic Euler).
    pub implicit_bending: f64,
    /// Elastic forces can be switched off (benchmark baseline).
    pub elastic: bool,
    /// Speeds above this are reported as divergence (m/s).
    pub max_speed: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            projection_tol: 1e-10,
            projection_max_iters: 50,
            implicit_bending: 1.0,
            elastic: true,
            max_speed: 1e4,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(RodError::Config("time step must be positive".into()));
        }
        if !(self.projection_tol > 0.0) || self.projection_max_iters == 0 {
            return Err(RodError::Config("projection tolerance and iteration cap must be positive".into()));
        }
        if self.implicit_bending < 0.0 {
            return Err(RodError::Config("implicit bending scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProjectionStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Projects the centerline onto `|e_i| = rest_i` by Newton iterations on the
/// edge-length constraints (fast projection). Each iteration solves the
/// tridiagonal (cyclic for loops) system `J W J^T dl = C` and applies the
/// mass-weighted correction `dx = -W J^T dl`. Nodes with zero inverse mass
/// never move. Edges whose two nodes are both immovable are left to the
/// boundary conditions.
pub fn project_inextensibility(
    c: &mut Centerline,
    inv_mass: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<ProjectionStats> {
    let mut multipliers = vec![0.0; c.num_edges()];
    project_with_multipliers(c, inv_mass, tol, max_iters, &mut multipliers)
}

/// As [`project_inextensibility`], also adding the Newton multipliers of
/// every edge (summed over iterations) to `multipliers`.
pub fn project_with_multipliers(
    c: &mut Centerline,
    inv_mass: &[f64],
    tol: f64,
    max_iters: usize,
    multipliers: &mut [f64],
) -> Result<ProjectionStats> {
    let n = c.num_edges();
    let mut residual = 0.0;
    let mut lower = vec![0.0; n.saturating_sub(1)];
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut tangents = vec![Vec3::zeros(); n];

    for iter in 0..=max_iters {
        residual = 0.0;
        for i in 0..n {
            let (a, b) = c.edge_nodes(i);
            let e = c.nodes[b] - c.nodes[a];
            let len = e.norm();
            if len < crate::geometry::MIN_EDGE_LENGTH {
                return Err(RodError::DegenerateEdge { edge: i, length: len });
            }
            tangents[i] = e / len;
            let w = inv_mass[a] + inv_mass[b];
            if w == 0.0 {
                diag[i] = 1.0;
                rhs[i] = 0.0;
            } else {
                diag[i] = w;
                rhs[i] = len - c.rest_lengths[i];
                residual = f64::max(residual, (rhs[i] / c.rest_lengths[i]).abs());
            }
        }
        if residual <= tol {
            return Ok(ProjectionStats { iterations: iter, residual });
        }
        if !residual.is_finite() || iter == max_iters {
            break;
        }
        for i in 0..n.saturating_sub(1) {
            lower[i] = -inv_mass[i + 1] * tangents[i].dot(&tangents[i + 1]);
        }
        let lambda = if c.closed {
            let corner = -inv_mass[0] * tangents[n - 1].dot(&tangents[0]);
            solve_cyclic_tridiagonal(&lower, &diag, &lower, corner, corner, &rhs)
        } else {
            solve_tridiagonal(&lower, &diag, &lower, &rhs)
        }
        .ok_or(RodError::ConstraintNotConverged { iterations: iter, residual })?;
        // full Newton step, halved while it makes the worst violation grow
        let start = c.nodes.clone();
        let mut scale = 1.0;
        loop {
            for i in 0..n {
                let (a, b) = c.edge_nodes(i);
                let dl = tangents[i] * (scale * lambda[i]);
                c.nodes[a] += dl * inv_mass[a];
                c.nodes[b] -= dl * inv_mass[b];
            }
            if scale < 1.0 / 64.0 || max_violation(c, inv_mass) < residual {
                break;
            }
            c.nodes.copy_from_slice(&start);
            scale *= 0.5;
        }
        for (m, l) in multipliers.iter_mut().zip(&lambda) {
            *m += scale * l;
        }
    }
    Err(RodError::ConstraintNotConverged {
        iterations: max_iters,
        residual,
    })
}

/// Largest relative edge-length error over edges with a movable node.
fn max_violation(c: &Centerline, inv_mass: &[f64]) -> f64 {
    (0..c.num_edges())
        .filter(|&i| {
            let (a, b) = c.edge_nodes(i);
            inv_mass[a] + inv_mass[b] > 0.0
        })
        .map(|i| ((c.edge(i).norm() - c.rest_lengths[i]) / c.rest_lengths[i]).abs())
        .fold(0.0, f64::max)
}

/// Scales velocities by `exp(-damping dt)`.
pub fn damp_velocities(velocities: &mut [Vec3], damping: f64, dt: f64) {
    if damping == 0.0 {
        return;
    }
    let factor = (-damping * dt).exp();
    for v in velocities {
        *v *= factor;
    }
}

/// Adds the constant small-angle bending stiffness `sum alpha/lbar r r^T` to
/// `add(i, j, value)`, with `r` the second-difference stencil of a vertex.
fn for_each_bending_stiffness(c: &Centerline, alpha: f64, mut add: impl FnMut(usize, usize, f64)) {
    for v in c.vertices() {
        let (a, _) = c.edge_nodes(v.prev_edge);
        let (_, b) = c.edge_nodes(v.next_edge);
        let ip = 1.0 / c.rest_lengths[v.prev_edge];
        let inx = 1.0 / c.rest_lengths[v.next_edge];
        let idx = [a, v.node, b];
        let r = [ip, -(ip + inx), inx];
        let s = alpha / c.voronoi_length(&v);
        for p in 0..3 {
            for q in 0..3 {
                add(idx[p], idx[q], s * r[p] * r[q]);
            }
        }
    }
}

/// Solves `(M + h^2 K + h^2 K_c + h C) v = rhs` per axis, with prescribed
/// velocities on pinned nodes.
fn implicit_velocity_solve(
    c: &Centerline,
    p: &RodParams,
    contacts: &[NodeContact],
    pinned: &[Option<Vec3>],
    h: f64,
    bending_scale: f64,
    rhs: &[Vec3],
) -> Result<Vec<Vec3>> {
    let n = c.num_nodes();
    let any_contact = contacts.iter().any(|k| k.is_active());
    let axes_differ = any_contact;
    let mut out = vec![Vec3::zeros(); n];
    let k_scale = bending_scale * h * h;

    let diag_for = |i: usize, axis: usize| {
        let k = &contacts[i];
        p.node_masses[i] + h * h * k.stiffness[axis] + h * k.damping[axis]
    };

    if c.closed {
        for axis in 0..3 {
            if axis > 0 && !axes_differ {
                break;
            }
            let mut a = DMatrix::<f64>::zeros(n, n);
            for_each_bending_stiffness(c, p.alpha, |i, j, v| a[(i, j)] += k_scale * v);
            for i in 0..n {
                a[(i, i)] += diag_for(i, axis);
            }
            let mut b = DMatrix::<f64>::zeros(n, if axes_differ { 1 } else { 3 });
            for i in 0..n {
                for col in 0..b.ncols() {
                    let ax = if axes_differ { axis } else { col };
                    b[(i, col)] = rhs[i][ax];
                }
            }
            for (i, pin) in pinned.iter().enumerate() {
                if let Some(vp) = pin {
                    for j in 0..n {
                        if j != i {
                            let aji = a[(j, i)];
                            for col in 0..b.ncols() {
                                let ax = if axes_differ { axis } else { col };
                                b[(j, col)] -= aji * vp[ax];
                            }
                            a[(j, i)] = 0.0;
                            a[(i, j)] = 0.0;
                        }
                    }
                    a[(i, i)] = 1.0;
                    for col in 0..b.ncols() {
                        let ax = if axes_differ { axis } else { col };
                        b[(i, col)] = vp[ax];
                    }
                }
            }
            let chol = a.cholesky().ok_or_else(|| RodError::Diverged {
                step: 0,
                time: 0.0,
                reason: "implicit system not positive definite".into(),
            })?;
            let x = chol.solve(&b);
            for i in 0..n {
                for col in 0..x.ncols() {
                    let ax = if axes_differ { axis } else { col };
                    out[i][ax] = x[(i, col)];
                }
            }
        }
        return Ok(out);
    }

    let mut base = SymBand::zeros(n, 2);
    for_each_bending_stiffness(c, p.alpha, |i, j, v| {
        if i >= j {
            base.add(i, j, k_scale * v);
        }
    });
    let axes: &[usize] = if axes_differ { &[0, 1, 2] } else { &[0] };
    for &axis in axes {
        let mut a = base.clone();
        for i in 0..n {
            a.add(i, i, diag_for(i, axis));
        }
        let cols: Vec<usize> = if axes_differ { vec![axis] } else { vec![0, 1, 2] };
        let mut bs: Vec<Vec<f64>> = cols.iter().map(|&ax| rhs.iter().map(|r| r[ax]).collect()).collect();
        for (i, pin) in pinned.iter().enumerate() {
            if let Some(vp) = pin {
                for (j, aij) in a.pin(i) {
                    for (b, &ax) in bs.iter_mut().zip(&cols) {
                        b[j] -= aij * vp[ax];
                    }
                }
                for (b, &ax) in bs.iter_mut().zip(&cols) {
                    b[i] = vp[ax];
                }
            }
        }
        let chol = a.cholesky().ok_or_else(|| RodError::Diverged {
            step: 0,
            time: 0.0,
            reason: "implicit system not positive definite".into(),
        })?;
        for (b, &ax) in bs.iter_mut().zip(&cols) {
            chol.solve_in_place(b);
            for i in 0..n {
                out[i][ax] = b[i];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub projection: ProjectionStats,
}

/// Advances `s` by one time step.
pub fn step(
    s: &mut RodState,
    p: &RodParams,
    bc: &BoundaryCondition,
    scene: &SceneConfig,
    cfg: &StepConfig,
) -> Result<StepStats> {
    let h = cfg.dt;
    let n = s.centerline.num_nodes();
    let step_index = s.steps;
    let diverged = |reason: String, time: f64| RodError::Diverged {
        step: step_index,
        time,
        reason,
    };

    // forces at the current configuration
    let mut force = if cfg.elastic {
        centerline_forces(&s.centerline, &s.frames, &s.material, p)
            .map_err(|e| diverged(e.to_string(), s.time))?
    } else {
        vec![Vec3::zeros(); n]
    };
    for (f, m) in force.iter_mut().zip(&p.node_masses) {
        *f += scene.gravity * *m;
    }
    let contacts: Vec<NodeContact> = if scene.has_contact() {
        s.centerline.nodes.iter().map(|x| node_contact(scene, x)).collect()
    } else {
        vec![NodeContact::default(); n]
    };
    for (f, k) in force.iter_mut().zip(&contacts) {
        *f += k.spring;
    }
    let n_edges = s.centerline.num_edges();
    if s.edge_tensions.len() != n_edges {
        s.edge_tensions = vec![0.0; n_edges];
    }
    for (i, sigma) in s.edge_tensions.iter().enumerate() {
        let (a, b) = s.centerline.edge_nodes(i);
        let pull = s.frames.tangents[i] * *sigma;
        force[a] += pull;
        force[b] -= pull;
    }

    let mut pinned: Vec<Option<Vec3>> = vec![None; n];
    for pin in &bc.pins {
        pinned[pin.node] = Some((pin.position - s.centerline.nodes[pin.node]) / h);
    }

    // semi-implicit velocity update
    let bending_scale = if cfg.elastic { cfg.implicit_bending } else { 0.0 };
    let any_contact = contacts.iter().any(|k| k.is_active());
    let mut v_new = if bending_scale == 0.0 && !any_contact {
        s.velocities
            .iter()
            .zip(&force)
            .zip(&p.node_masses)
            .map(|((v, f), m)| v + f * (h / m))
            .collect::<Vec<_>>()
    } else {
        let rhs: Vec<Vec3> = s
            .velocities
            .iter()
            .zip(&force)
            .zip(&p.node_masses)
            .map(|((v, f), m)| v * *m + f * h)
            .collect();
        implicit_velocity_solve(&s.centerline, p, &contacts, &pinned, h, bending_scale, &rhs)
            .map_err(|e| diverged(e.to_string(), s.time))?
    };
    for (v, pin) in v_new.iter_mut().zip(&pinned) {
        if let Some(vp) = pin {
            *v = *vp;
        }
    }
    damp_velocities(&mut v_new, p.damping, h);
    for (v, pin) in v_new.iter_mut().zip(&pinned) {
        if let Some(vp) = pin {
            *v = *vp;
        }
    }

    let mut next = s.centerline.clone();
    for (x, v) in next.nodes.iter_mut().zip(&v_new) {
        *x += v * h;
    }
    // exact pin positions, free of roundoff from v h
    for pin in &bc.pins {
        next.nodes[pin.node] = pin.position;
    }

    // inextensibility with velocity correction
    let predicted = next.nodes.clone();
    let inv_mass = bc.inverse_masses(p);
    let mut multipliers = vec![0.0; n_edges];
    let projection =
        project_with_multipliers(&mut next, &inv_mass, cfg.projection_tol, cfg.projection_max_iters, &mut multipliers)
            .map_err(|e| diverged(e.to_string(), s.time + h))?;
    for ((v, x), x0) in v_new.iter_mut().zip(&next.nodes).zip(&predicted) {
        *v += (x - x0) / h;
    }

    let frames = time_parallel_update(&s.frames, &next).map_err(|e| diverged(e.to_string(), s.time + h))?;
    let mut material = s.material.clone();
    bc.apply_to_material(&mut material);
    // the material frame only enters the elastic energy
    let material = if cfg.elastic {
        solve_quasistatic_thetas(&next, &frames, &material, p)?
    } else {
        material
    };

    let bad = next.nodes.iter().chain(&v_new).any(|x| !x.iter().all(|c| c.is_finite()));
    if bad {
        return Err(diverged("non-finite state".into(), s.time + h));
    }
    let vmax = v_new.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if vmax > cfg.max_speed {
        return Err(diverged(format!("speed {vmax:.3e} m/s exceeds limit"), s.time + h));
    }

    for (sigma, l) in s.edge_tensions.iter_mut().zip(&multipliers) {
        *sigma += l / (h * h);
    }
    s.centerline = next;
    s.velocities = v_new;
    s.frames = frames;
    s.material = material;
    s.time += h;
    s.steps += 1;
    Ok(StepStats { projection })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaxConfig {
    pub max_steps: usize,
    /// Converged once total kinetic energy drops below this (J).
    pub kinetic_tol: f64,
    /// Damping rate used while relaxing, if stronger than the rod's own (1/s).
    pub damping: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            max_steps: 20_000,
            kinetic_tol: 1e-10,
            damping: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOutcome {
    pub converged: bool,
    pub steps: usize,
}

/// Steps with strong damping until the kinetic energy falls below
/// `kinetic_tol` (checked after at least one step, unless already at rest)
/// or `max_steps` is reached.
pub fn relax(
    s: &mut RodState,
    p: &RodParams,
    bc: &BoundaryCondition,
    scene: &SceneConfig,
    cfg: &StepConfig,
    relax: &RelaxConfig,
) -> Result<RelaxOutcome> {
    if !(relax.kinetic_tol > 0.0) {
        return Err(RodError::Config("kinetic tolerance must be positive".into()));
    }
    let mut damped = p.clone();
    damped.damping = damped.damping.max(relax.damping);
    s.relax_material(p, bc)?;
    if s.kinetic_energy(p) < relax.kinetic_tol && is_at_rest(s, p, bc, scene)? {
        return Ok(RelaxOutcome { converged: true, steps: 0 });
    }
    for k in 1..=relax.max_steps {
        step(s, &damped, bc, scene, cfg)?;
        if s.kinetic_energy(p) < relax.kinetic_tol {
            return Ok(RelaxOutcome { converged: true, steps: k });
        }
    }
    Ok(RelaxOutcome {
        converged: false,
        steps: relax.max_steps,
    })
}

/// True if no unbalanced force would set the rod in motion: free nodes feel
/// (numerically) zero net force along directions the constraints allow.
fn is_at_rest(s: &RodState, p: &RodParams, bc: &BoundaryCondition, scene: &SceneConfig) -> Result<bool> {
    if bc.pins.iter().any(|pin| (pin.position - s.centerline.nodes[pin.node]).norm() > 0.0) {
        return Ok(false);
    }
    let mut probe = s.clone();
    let mut damped = p.clone();
    damped.damping = 0.0;
    let cfg = StepConfig {
        implicit_bending: 0.0,
        ..StepConfig::default()
    };
    step(&mut probe, &damped, bc, scene, &cfg)?;
    Ok(probe.kinetic_energy(p) < 1e-24 * p.total_mass().max(1.0))
}
