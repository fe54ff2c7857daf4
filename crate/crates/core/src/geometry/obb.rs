use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec2};

/// Oriented rectangle used for vehicle footprints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbBox {
    pub center: Vec2,
    /// Half length along the heading, half width across it.
    pub half_extents: (f64, f64),
    pub heading: f64,
}

impl ObbBox {
    pub fn new(
        center: Vec2,
        half_extents: (f64, f64),
        heading: f64,
    ) -> Result<Self, GeometryError> {
        if !(half_extents.0 > 0.0 && half_extents.1 > 0.0) {
            return Err(GeometryError::InvalidParameter(
                "box half extents must be positive".into(),
            ));
        }
        Ok(Self {
            center,
            half_extents,
            heading,
        })
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.heading);
        (u, u.perp())
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let (hx, hy) = self.half_extents;
        let (a, b) = (u * hx, v * hy);
        let c = self.center;
        [c - a - b, c + a - b, c + a + b, c - a + b]
    }

    /// Half-width of the box's shadow on a unit axis.
    fn radius_on(&self, axis: Vec2) -> f64 {
        let (u, v) = self.axes();
        self.half_extents.0 * u.dot(axis).abs() + self.half_extents.1 * v.dot(axis).abs()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.half_extents.0 && d.dot(v).abs() <= self.half_extents.1
    }
}

/// Separating-axis overlap test over the four edge normals. Touching boxes
/// count as intersecting.
pub fn obb_intersect(a: &ObbBox, b: &ObbBox) -> bool {
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    let d = b.center - a.center;
    [au, av, bu, bv]
        .into_iter()
        .all(|axis| d.dot(axis).abs() <= a.radius_on(axis) + b.radius_on(axis))
}
