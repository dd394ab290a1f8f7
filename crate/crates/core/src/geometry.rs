//! Discrete centerline kinematics: edges, tangents, parallel transport,
//! reference (Bishop) frames and reference twist.
//!
//! Frames live on edges. Vertex quantities (curvature binormal, reference
//! twist) live on the interior vertices of an open rod, or on every vertex
//! of a closed loop, where vertex `0` is the seam between the last and the
//! first edge.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::Vec3;

/// Edges shorter than this are treated as degenerate.
pub const MIN_EDGE_LENGTH: f64 = 1e-12;

/// Tangents closer than this to antiparallel cannot be transported.
pub const ANTIPARALLEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centerline {
    pub nodes: Vec<Vec3>,
    pub rest_lengths: Vec<f64>,
    /// Closed loops join the last node back to the first.
    #[serde(default)]
    pub closed: bool,
}

/// A vertex joining two consecutive edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vertex {
    /// Position of this vertex in per-vertex arrays.
    pub index: usize,
    pub node: usize,
    pub prev_edge: usize,
    pub next_edge: usize,
    /// True for the vertex that closes a loop.
    pub seam: bool,
}

impl Centerline {
    /// Open rod with explicit rest lengths.
    pub fn new(nodes: Vec<Vec3>, rest_lengths: Vec<f64>) -> Result<Self> {
        let c = Self {
            nodes,
            rest_lengths,
            closed: false,
        };
        c.validate()?;
        Ok(c)
    }

    /// Closed loop with explicit rest lengths; edge `i` joins node `i` to
    /// node `(i + 1) % n`.
    pub fn new_closed(nodes: Vec<Vec3>, rest_lengths: Vec<f64>) -> Result<Self> {
        let c = Self {
            nodes,
            rest_lengths,
            closed: true,
        };
        c.validate()?;
        Ok(c)
    }

    /// Open rod whose rest lengths are the current edge lengths.
    pub fn from_nodes(nodes: Vec<Vec3>) -> Result<Self> {
        let rest = nodes.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        Self::new(nodes, rest)
    }

    /// Closed loop whose rest lengths are the current edge lengths.
    pub fn closed_from_nodes(nodes: Vec<Vec3>) -> Result<Self> {
        let n = nodes.len();
        let rest = (0..n).map(|i| (nodes[(i + 1) % n] - nodes[i]).norm()).collect();
        Self::new_closed(nodes, rest)
    }

    /// Straight open rod from `start` along `direction` with `n` equal edges.
    pub fn straight(start: Vec3, direction: Vec3, length: f64, n: usize) -> Result<Self> {
        let d = direction
            .try_normalize(MIN_EDGE_LENGTH)
            .ok_or_else(|| RodError::InvalidRod("zero direction".into()))?;
        if n < 2 || length <= 0.0 {
            return Err(RodError::InvalidRod(format!(
                "need at least 2 edges and positive length (got n = {n}, L = {length})"
            )));
        }
        let ell = length / n as f64;
        let nodes = (0..=n).map(|i| start + d * (ell * i as f64)).collect();
        Self::new(nodes, vec![ell; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_edges();
        let min_edges = if self.closed { 3 } else { 2 };
        if n < min_edges {
            return Err(RodError::InvalidRod(format!(
                "need at least {min_edges} edges, got {n}"
            )));
        }
        if self.rest_lengths.len() != n {
            return Err(RodError::InvalidRod(format!(
                "{} rest lengths for {n} edges",
                self.rest_lengths.len()
            )));
        }
        if let Some(i) = self.rest_lengths.iter().position(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(RodError::InvalidRod(format!(
                "rest length {i} is not positive ({})",
                self.rest_lengths[i]
            )));
        }
        for i in 0..n {
            let len = self.edge(i).norm();
            if !(len >= MIN_EDGE_LENGTH) {
                return Err(RodError::DegenerateEdge { edge: i, length: len });
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        if self.closed {
            self.nodes.len()
        } else {
            self.nodes.len().saturating_sub(1)
        }
    }

    pub fn num_vertices(&self) -> usize {
        if self.closed {
            self.num_edges()
        } else {
            self.num_edges().saturating_sub(1)
        }
    }

    #[inline]
    pub fn edge_nodes(&self, i: usize) -> (usize, usize) {
        (i, (i + 1) % self.nodes.len())
    }

    #[inline]
    pub fn edge(&self, i: usize) -> Vec3 {
        let (a, b) = self.edge_nodes(i);
        self.nodes[b] - self.nodes[a]
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        let n = self.num_edges();
        if self.closed {
            Vertex {
                index,
                node: index,
                prev_edge: (index + n - 1) % n,
                next_edge: index,
                seam: index == 0,
            }
        } else {
            Vertex {
                index,
                node: index + 1,
                prev_edge: index,
                next_edge: index + 1,
                seam: false,
            }
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.num_vertices()).map(move |k| self.vertex(k))
    }

    /// Voronoi length of a vertex, from rest lengths.
    #[inline]
    pub fn voronoi_length(&self, v: &Vertex) -> f64 {
        0.5 * (self.rest_lengths[v.prev_edge] + self.rest_lengths[v.next_edge])
    }

    pub fn total_rest_length(&self) -> f64 {
        self.rest_lengths.iter().sum()
    }

    pub fn tangents(&self) -> Result<Vec<Vec3>> {
        (0..self.num_edges())
            .map(|i| {
                let e = self.edge(i);
                let len = e.norm();
                if len < MIN_EDGE_LENGTH {
                    Err(RodError::DegenerateEdge { edge: i, length: len })
                } else {
                    Ok(e / len)
                }
            })
            .collect()
    }

    /// Largest relative deviation of an edge length from its rest length.
    pub fn max_strain(&self) -> f64 {
        (0..self.num_edges())
            .map(|i| ((self.edge(i).norm() - self.rest_lengths[i]) / self.rest_lengths[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Applies `f` to every node.
    pub fn map_nodes(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            nodes: self.nodes.iter().map(f).collect(),
            rest_lengths: self.rest_lengths.clone(),
            closed: self.closed,
        }
    }
}

/// Per-edge reference frames and per-vertex reference twist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSet {
    pub tangents: Vec<Vec3>,
    /// Reference director `u` of each edge, orthogonal to its tangent.
    pub reference_dirs: Vec<Vec3>,
    /// Signed angle, about the next edge's tangent, from the space-parallel
    /// transport of the previous reference director to the next one.
    /// Accumulated without wrapping.
    pub reference_twists: Vec<f64>,
}

impl FrameSet {
    /// Worst violation of `|t . u| = 0` and `|u| = 1` over all edges.
    pub fn orthonormality_error(&self) -> f64 {
        self.tangents
            .iter()
            .zip(&self.reference_dirs)
            .map(|(t, u)| t.dot(u).abs().max((u.norm() - 1.0).abs()).max((t.norm() - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}

/// Rotates `v` by the minimal rotation taking unit vector `t_from` onto `t_to`.
pub fn parallel_transport(t_from: &Vec3, t_to: &Vec3, v: &Vec3) -> Result<Vec3> {
    if (t_from + t_to).norm() < ANTIPARALLEL_TOL {
        return Err(RodError::DegenerateTransport);
    }
    let axis = t_from.cross(t_to);
    let sin = axis.norm();
    let cos = t_from.dot(t_to);
    if sin < 1e-300 {
        return Ok(*v);
    }
    let k = axis / sin;
    Ok(v * cos + k.cross(v) * sin + k * (k.dot(v) * (1.0 - cos)))
}

/// Signed angle from `a` to `b` measured about `axis`.
#[inline]
pub fn signed_angle(a: &Vec3, b: &Vec3, axis: &Vec3) -> f64 {
    a.cross(b).dot(axis).atan2(a.dot(b))
}

/// Wraps an angle into `(-pi, pi]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Discrete curvature binormal `2 e x f / (|e||f| + e.f)` at the vertex
/// between edges `e_prev` and `e_next`.
pub fn curvature_binormal(e_prev: &Vec3, e_next: &Vec3) -> Result<Vec3> {
    let denom = e_prev.norm() * e_next.norm() + e_prev.dot(e_next);
    if denom <= 1e-12 * (e_prev.norm_squared() + e_next.norm_squared()).max(1e-300) {
        return Err(RodError::Kink { vertex: 0 });
    }
    Ok(e_prev.cross(e_next) * (2.0 / denom))
}

/// Curvature binormal at each vertex of `c`.
pub fn curvature_binormals(c: &Centerline) -> Result<Vec<Vec3>> {
    c.vertices()
        .map(|v| {
            curvature_binormal(&c.edge(v.prev_edge), &c.edge(v.next_edge))
                .map_err(|_| RodError::Kink { vertex: v.node })
        })
        .collect()
}

fn orthonormalize(u: &Vec3, t: &Vec3) -> Result<Vec3> {
    (u - t * t.dot(u))
        .try_normalize(1e-12)
        .ok_or(RodError::DegenerateTransport)
}

fn vertex_reference_twist(frames_t: &[Vec3], frames_u: &[Vec3], v: &Vertex) -> Result<f64> {
    let t_prev = &frames_t[v.prev_edge];
    let t_next = &frames_t[v.next_edge];
    let moved = parallel_transport(t_prev, t_next, &frames_u[v.prev_edge])?;
    Ok(signed_angle(&moved, &frames_u[v.next_edge], t_next))
}

/// Builds reference frames by space-parallel transport of `u0` along the edges.
///
/// Reference twist is zero on every vertex except the seam of a closed loop,
/// where it records the holonomy of the transport around the loop.
pub fn init_reference_frames(c: &Centerline, u0: &Vec3) -> Result<FrameSet> {
    let tangents = c.tangents()?;
    let mut dirs = Vec::with_capacity(tangents.len());
    let mut u = orthonormalize(u0, &tangents[0])?;
    dirs.push(u);
    for w in tangents.windows(2) {
        u = orthonormalize(&parallel_transport(&w[0], &w[1], &u)?, &w[1])?;
        dirs.push(u);
    }
    let mut twists = vec![0.0; c.num_vertices()];
    if c.closed {
        twists[0] = vertex_reference_twist(&tangents, &dirs, &c.vertex(0))?;
    }
    Ok(FrameSet {
        tangents,
        reference_dirs: dirs,
        reference_twists: twists,
    })
}

/// Carries frames from the previous centerline to `c_new` by time-parallel
/// transport and updates reference twist incrementally, so accumulated
/// twist beyond `±pi` is preserved.
pub fn time_parallel_update(frames_prev: &FrameSet, c_new: &Centerline) -> Result<FrameSet> {
    let tangents = c_new.tangents()?;
    if tangents.len() != frames_prev.tangents.len() {
        return Err(RodError::InvalidRod("frame/centerline size mismatch".into()));
    }
    let dirs = frames_prev
        .tangents
        .iter()
        .zip(&tangents)
        .zip(&frames_prev.reference_dirs)
        .map(|((t_old, t_new), u)| orthonormalize(&parallel_transport(t_old, t_new, u)?, t_new))
        .collect::<Result<Vec<_>>>()?;
    let twists = c_new
        .vertices()
        .map(|v| {
            let raw = vertex_reference_twist(&tangents, &dirs, &v)?;
            let old = frames_prev.reference_twists[v.index];
            Ok(old + wrap_angle(raw - old))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameSet {
        tangents,
        reference_dirs: dirs,
        reference_twists: twists,
    })
}
