use serde::{Deserialize, Serialize};

/// World-frame position in meters, z up.
pub type Vec3 = [f64; 3];

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub fn planar_distance(a: Vec3, b: Vec3) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Agent stance: position plus heading about +z (radians, 0 = +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw }
    }

    /// Express a world point in the agent frame as (forward, lateral),
    /// lateral positive to the agent's left.
    pub fn to_local(&self, point: Vec3) -> (f64, f64) {
        let dx = point[0] - self.position[0];
        let dy = point[1] - self.position[1];
        let (s, c) = self.yaw.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Whether the xy footprint, grown by `margin`, contains (x, y).
    pub fn footprint_contains(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.min[0] - margin
            && x <= self.max[0] + margin
            && y >= self.min[1] - margin
            && y <= self.max[1] + margin
    }
}
