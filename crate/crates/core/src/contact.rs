//! Penalty contact of rod nodes against a ground plane and axis-aligned boxes.
//!
//! Every contact normal is a coordinate axis, which keeps the implicit
//! contact terms diagonal per axis in the integrator.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub center: Vec3,
    pub half_extents: Vec3,
}

impl AxisBox {
    pub fn new(center: Vec3, half_extents: Vec3) -> Self {
        Self { center, half_extents }
    }

    pub fn min(&self) -> Vec3 {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Vec3 {
        self.center + self.half_extents
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|d| (p[d] - self.center[d]).abs() <= self.half_extents[d])
    }

    pub fn top_center(&self) -> Vec3 {
        Vec3::new(self.center.x, self.center.y, self.center.z + self.half_extents.z)
    }

    fn overlaps(&self, other: &AxisBox) -> bool {
        (0..3).all(|d| {
            (self.center[d] - other.center[d]).abs() < self.half_extents[d] + other.half_extents[d]
        })
    }

    /// Shallowest way out of the box grown by `radius`: `(axis, outward sign, depth)`.
    fn penetration(&self, p: &Vec3, radius: f64) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for d in 0..3 {
            let rel = p[d] - self.center[d];
            let depth = self.half_extents[d] + radius - rel.abs();
            if depth <= 0.0 {
                return None;
            }
            if best.map_or(true, |(_, _, b)| depth < b) {
                best = Some((d, if rel >= 0.0 { 1.0 } else { -1.0 }, depth));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactParams {
    /// Normal penalty stiffness (N/m).
    pub stiffness: f64,
    /// Normal damping (N s/m).
    pub normal_damping: f64,
    /// Tangential viscous friction (N s/m).
    pub friction: f64,
    /// Nodes are treated as spheres of this radius (m).
    pub radius: f64,
    /// Penetration depth over which damping and friction ramp in (m).
    pub damping_ramp: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 1e4,
            normal_damping: 10.0,
            friction: 1.0,
            radius: 0.0,
            damping_ramp: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub gravity: Vec3,
    /// Height of the ground plane (normal +z); `None` disables it.
    pub ground_height: Option<f64>,
    pub obstacles: Vec<AxisBox>,
    pub contact: ContactParams,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self::empty()
    }
}

impl SceneConfig {
    /// No gravity, no ground, no obstacles.
    pub fn empty() -> Self {
        Self {
            gravity: Vec3::zeros(),
            ground_height: None,
            obstacles: Vec::new(),
            contact: ContactParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contact.stiffness > 0.0) {
            return Err(RodError::Config("contact stiffness must be positive".into()));
        }
        if self.contact.normal_damping < 0.0 || self.contact.friction < 0.0 || self.contact.radius < 0.0 {
            return Err(RodError::Config("contact damping, friction and radius must be non-negative".into()));
        }
        if !(self.contact.damping_ramp > 0.0) {
            return Err(RodError::Config("contact damping ramp must be positive".into()));
        }
        for (i, a) in self.obstacles.iter().enumerate() {
            if a.half_extents.iter().any(|h| !(*h > 0.0)) {
                return Err(RodError::Config(format!("obstacle {i} has non-positive extent")));
            }
            for (j, b) in self.obstacles.iter().enumerate().skip(i + 1) {
                if a.overlaps(b) {
                    return Err(RodError::Config(format!("obstacles {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn has_contact(&self) -> bool {
        self.ground_height.is_some() || !self.obstacles.is_empty()
    }

    /// Every active contact of a point: `(axis, outward sign, depth)`.
    pub fn contacts(&self, p: &Vec3) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let r = self.contact.radius;
        let p = *p;
        let ground = self
            .ground_height
            .and_then(move |h| {
                let depth = h + r - p.z;
                (depth > 0.0).then_some((2, 1.0, depth))
            })
            .into_iter();
        ground.chain(self.obstacles.iter().filter_map(move |b| b.penetration(&p, r)))
    }
}

/// Per-node contact response split for semi-implicit integration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeContact {
    /// Elastic penalty force `k depth n`.
    pub spring: Vec3,
    /// Per-axis penalty stiffness.
    pub stiffness: Vec3,
    /// Per-axis viscous coefficient (normal damping and tangential friction).
    pub damping: Vec3,
}

impl NodeContact {
    pub fn is_active(&self) -> bool {
        self.stiffness != Vec3::zeros()
    }
}

/// Contact response of a single node.
pub fn node_contact(scene: &SceneConfig, p: &Vec3) -> NodeContact {
    let cp = &scene.contact;
    let mut out = NodeContact::default();
    for (axis, sign, depth) in scene.contacts(p) {
        let ramp = (depth / cp.damping_ramp).min(1.0);
        out.spring[axis] += sign * cp.stiffness * depth;
        out.stiffness[axis] += cp.stiffness;
        for d in 0..3 {
            out.damping[d] += if d == axis { cp.normal_damping } else { cp.friction } * ramp;
        }
    }
    out
}

/// Explicit contact force on every node: penalty `k max(0, depth)` plus normal
/// damping (never pulling the node inward), plus tangential viscous friction.
pub fn contact_forces(nodes: &[Vec3], velocities: &[Vec3], scene: &SceneConfig) -> Vec<Vec3> {
    let cp = &scene.contact;
    nodes
        .iter()
        .zip(velocities)
        .map(|(p, v)| {
            let mut f = Vec3::zeros();
            for (axis, sign, depth) in scene.contacts(p) {
                let ramp = (depth / cp.damping_ramp).min(1.0);
                let vn = v[axis] * sign;
                let normal = (cp.stiffness * depth - cp.normal_damping * ramp * vn).max(0.0);
                f[axis] += sign * normal;
                for d in (0..3).filter(|&d| d != axis) {
                    f[d] -= cp.friction * ramp * v[d];
                }
            }
            f
        })
        .collect()
}
