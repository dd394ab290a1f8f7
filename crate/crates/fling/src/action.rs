//! Gripper actions: pose offsets at three waypoints after the start pose.

use serde::{Deserialize, Serialize};

use crate::error::{FlingError, Result};

/// Number of scalar action components.
pub const ACTION_DIM: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionBounds {
    /// Largest |Δy| (m).
    pub dy: f64,
    /// Largest |Δz| (m).
    pub dz: f64,
    /// Largest |pitch| (rad).
    pub pitch: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            dy: 0.6,
            dz: 0.6,
            pitch: std::f64::consts::FRAC_PI_2,
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<()> {
        if [self.dy, self.dz, self.pitch].iter().all(|b| *b > 0.0 && b.is_finite()) {
            Ok(())
        } else {
            Err(FlingError::Config("action bounds must be positive and finite".into()))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dy, self.dz, self.pitch]
    }

    /// Bound of flattened component `i`.
    pub fn component(&self, i: usize) -> f64 {
        self.as_array()[i % 3]
    }
}

/// `(Δy, Δz, pitch)` of the gripper at each waypoint, relative to its start
/// pose. Pitch turns the grasped edge about the x axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlingAction {
    pub offsets: [[f64; 3]; 3],
}

impl FlingAction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; ACTION_DIM] {
        let mut out = [0.0; ACTION_DIM];
        for (i, v) in self.offsets.iter().flatten().enumerate() {
            out[i] = *v;
        }
        out
    }

    pub fn from_array(a: &[f64; ACTION_DIM]) -> Self {
        let mut offsets = [[0.0; 3]; 3];
        for (i, v) in a.iter().enumerate() {
            offsets[i / 3][i % 3] = *v;
        }
        Self { offsets }
    }

    /// Maps `[-1, 1]` per component onto the bounds (no clamping).
    pub fn from_unit(u: &[f64; ACTION_DIM], bounds: &ActionBounds) -> Self {
        let mut a = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            a[i] = u[i] * bounds.component(i);
        }
        Self::from_array(&a)
    }

    pub fn to_unit(&self, bounds: &ActionBounds) -> [f64; ACTION_DIM] {
        let mut u = self.to_array();
        for (i, v) in u.iter_mut().enumerate() {
            *v /= bounds.component(i);
        }
        u
    }

    pub fn within(&self, bounds: &ActionBounds) -> bool {
        self.to_array().iter().enumerate().all(|(i, v)| v.abs() <= bounds.component(i))
    }

    /// Clamps every component into its bound; the flag is set if anything
    /// moved. NaN components become zero.
    pub fn clamped(&self, bounds: &ActionBounds) -> (Self, bool) {
        let mut a = self.to_array();
        let mut changed = false;
        for (i, v) in a.iter_mut().enumerate() {
            let b = bounds.component(i);
            let c = if v.is_nan() { 0.0 } else { v.clamp(-b, b) };
            changed |= c != *v || v.is_nan();
            *v = c;
        }
        (Self::from_array(&a), changed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamping_sets_the_flag_only_when_needed() {
        let b = ActionBounds::default();
        let inside = FlingAction {
            offsets: [[0.1, -0.6, 1.0], [0.0; 3], [0.6, 0.0, -1.5]],
        };
        assert_eq!(inside.clamped(&b), (inside, false));
        let outside = FlingAction {
            offsets: [[0.7, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 3.0]],
        };
        let (c, flag) = outside.clamped(&b);
        assert!(flag);
        assert_eq!(c.offsets, [[0.6, 0.0, 0.0], [0.0, -0.6, 0.0], [0.0, 0.0, b.pitch]]);
    }

    proptest! {
        #[test]
        fn clamped_actions_respect_bounds(v in proptest::array::uniform9(-10.0f64..10.0)) {
            let b = ActionBounds::default();
            let (c, _) = FlingAction::from_array(&v).clamped(&b);
            prop_assert!(c.within(&b));
        }

        #[test]
        fn unit_mapping_round_trips(u in proptest::array::uniform9(-1.0f64..1.0)) {
            let b = ActionBounds::default();
            let back = FlingAction::from_unit(&u, &b).to_unit(&b);
            for (x, y) in u.iter().zip(&back) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
