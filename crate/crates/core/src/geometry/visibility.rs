//! Sensor free space by uniform angular ray casting.
//!
//! Each of `n` rays at bearings `2πk/n` stops at the nearest occluder edge or
//! at the sensor range. The resulting polygon is star-shaped around the
//! sensor, which lets containment queries run in constant time: the query
//! bearing selects one fan triangle and a single edge test decides.

use std::f64::consts::PI;

use super::{point_in_polygon, polygon_area, GeometryError, Vec2};

pub const DEFAULT_RAYS: usize = 720;
pub const MIN_RAYS: usize = 36;

/// Star-shaped sensor free space around `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablePolygon {
    origin: Vec2,
    /// Hit distance per ray, ray `k` at bearing `2πk/n`.
    radii: Vec<f64>,
    /// Unit ray directions, cached.
    dirs: Vec<Vec2>,
    vertices: Vec<Vec2>,
}

impl ObservablePolygon {
    /// Builds the fan polygon from per-ray distances.
    pub fn from_radii(origin: Vec2, radii: Vec<f64>) -> Result<Self, GeometryError> {
        if radii.len() < 3 {
            return Err(GeometryError::InvalidParameter(
                "observable polygon needs at least 3 rays".into(),
            ));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(GeometryError::InvalidParameter(
                "ray distances must be positive and finite".into(),
            ));
        }
        let n = radii.len();
        let dirs: Vec<Vec2> = (0..n).map(|k| Vec2::from_angle(bearing(k, n))).collect();
        let vertices = dirs
            .iter()
            .zip(&radii)
            .map(|(d, r)| origin + *d * *r)
            .collect();
        Ok(Self {
            origin,
            radii,
            dirs,
            vertices,
        })
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    /// Counter-clockwise vertex list.
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Constant-time containment; boundary points count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let rel = p - self.origin;
        if rel.x == 0.0 && rel.y == 0.0 {
            return true;
        }
        let n = self.radii.len();
        let step = 2.0 * PI / n as f64;
        let mut phi = rel.angle();
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let k = ((phi / step) as usize) % n;
        let k1 = (k + 1) % n;
        let a = self.dirs[k] * self.radii[k];
        let b = self.dirs[k1] * self.radii[k1];
        let edge = (b - a).cross(rel - a);
        edge >= -1e-12 * (self.radii[k] * self.radii[k1]).max(1.0)
    }

    /// Even-odd containment on the vertex list, independent of the fan
    /// structure.
    pub fn contains_even_odd(&self, p: Vec2) -> bool {
        point_in_polygon(&self.vertices, p)
    }
}

fn bearing(k: usize, n: usize) -> f64 {
    2.0 * PI * k as f64 / n as f64
}

/// Distance along the unit ray `origin + t·dir` to segment `a-b`, if hit.
fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a - origin;
    let t = ao.cross(e) / denom;
    let u = ao.cross(dir) / denom;
    (t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u)).then_some(t)
}

/// Casts `n_rays` uniformly spaced rays from `origin` against every occluder
/// edge. Occluders are closed polygons; a two-vertex occluder is a wall.
pub fn visibility_polygon(
    origin: Vec2,
    occluders: &[Vec<Vec2>],
    sensor_range: f64,
    n_rays: usize,
) -> Result<ObservablePolygon, GeometryError> {
    cast_rays(origin, occluders, sensor_range, n_rays).map(|(poly, _)| poly)
}

/// [`visibility_polygon`] that also reports, per ray, the index of the
/// occluder that stopped it (`None` when the ray reached full range).
pub fn cast_rays(
    origin: Vec2,
    occluders: &[Vec<Vec2>],
    sensor_range: f64,
    n_rays: usize,
) -> Result<(ObservablePolygon, Vec<Option<usize>>), GeometryError> {
    if n_rays < MIN_RAYS {
        return Err(GeometryError::InvalidParameter(format!(
            "n_rays must be at least {MIN_RAYS}"
        )));
    }
    if !(sensor_range > 0.0 && sensor_range.is_finite()) {
        return Err(GeometryError::InvalidParameter(
            "sensor_range must be positive".into(),
        ));
    }
    if occluders
        .iter()
        .any(|o| o.len() >= 3 && point_in_polygon(o, origin))
    {
        return Err(GeometryError::InvalidOrigin {
            x: origin.x,
            y: origin.y,
        });
    }

    // only edges that can come within range matter
    let edges: Vec<(Vec2, Vec2, usize)> = occluders
        .iter()
        .enumerate()
        .flat_map(|(j, poly)| {
            let n = poly.len();
            let count = match n {
                0 | 1 => 0,
                2 => 1,
                _ => n,
            };
            (0..count).map(move |i| (poly[i], poly[(i + 1) % n], j))
        })
        .filter(|&(a, b, _)| segment_distance(origin, a, b) <= sensor_range)
        .collect();

    let mut radii = Vec::with_capacity(n_rays);
    let mut hits = Vec::with_capacity(n_rays);
    for k in 0..n_rays {
        let dir = Vec2::from_angle(bearing(k, n_rays));
        let mut r = sensor_range;
        let mut hit = None;
        for &(a, b, j) in &edges {
            if let Some(t) = ray_segment(origin, dir, a, b) {
                if t < r {
                    r = t;
                    hit = Some(j);
                }
            }
        }
        radii.push(r);
        hits.push(hit);
    }
    Ok((ObservablePolygon::from_radii(origin, radii)?, hits))
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(cx: f64, cy: f64, h: f64) -> Vec<Vec2> {
        vec![
            Vec2::new(cx - h, cy - h),
            Vec2::new(cx + h, cy - h),
            Vec2::new(cx + h, cy + h),
            Vec2::new(cx - h, cy + h),
        ]
    }

    #[test]
    fn hits_name_the_nearest_occluder() {
        let near = square(10.0, 0.0, 1.0);
        let far = square(20.0, 0.0, 3.0);
        let (poly, hits) = cast_rays(Vec2::new(0.0, 0.0), &[far, near], 50.0, 720).unwrap();
        assert_eq!(hits[0], Some(1));
        assert!((poly.radii()[0] - 9.0).abs() < 1e-12);
        // 8 degrees up clears the near box but meets the far one
        assert_eq!(hits[16], Some(0));
        assert_eq!(hits[360], None);
        assert_eq!(poly.radii()[360], 50.0);
    }

    #[test]
    fn empty_scene_is_regular_polygon() {
        let poly = visibility_polygon(Vec2::new(0.0, 0.0), &[], 50.0, 720).unwrap();
        assert_eq!(poly.vertices().len(), 720);
        let expected = 0.5 * 720.0 * 50.0f64.powi(2) * (2.0 * PI / 720.0).sin();
        assert!((poly.area() - expected).abs() < 1e-6 * expected);
        let ratio = poly.area() / (PI * 2500.0);
        assert!((ratio - 0.99999).abs() < 5e-6, "{ratio}");
    }

    #[test]
    fn wall_distance_follows_secant() {
        let wall = vec![Vec2::new(10.0, -10.0), Vec2::new(10.0, 10.0)];
        let poly = visibility_polygon(Vec2::new(0.0, 0.0), &[wall], 50.0, 720).unwrap();
        let mut checked = 0;
        for (k, r) in poly.radii().iter().enumerate() {
            let mut b = bearing(k, 720);
            if b > PI {
                b -= 2.0 * PI;
            }
            if b.abs() < PI / 4.0 - 1e-9 {
                assert!((r - 10.0 / b.cos()).abs() < 1e-9, "bearing {b}: {r}");
                checked += 1;
            } else if b.abs() > PI / 4.0 + 1e-9 {
                assert_eq!(*r, 50.0);
            }
        }
        assert_eq!(checked, 179);
    }

    #[test]
    fn unreachable_occluder_changes_nothing() {
        let o = Vec2::new(0.0, 0.0);
        let free = visibility_polygon(o, &[], 30.0, 360).unwrap();
        let far = visibility_polygon(o, &[square(100.0, 0.0, 5.0)], 30.0, 360).unwrap();
        assert_eq!(free, far);
    }

    #[test]
    fn origin_inside_occluder_is_rejected() {
        let err = visibility_polygon(Vec2::new(0.0, 0.0), &[square(0.0, 0.0, 1.0)], 30.0, 360);
        assert!(matches!(err, Err(GeometryError::InvalidOrigin { .. })));
    }

    #[test]
    fn bad_parameters() {
        assert!(visibility_polygon(Vec2::new(0.0, 0.0), &[], 30.0, 10).is_err());
        assert!(visibility_polygon(Vec2::new(0.0, 0.0), &[], 0.0, 360).is_err());
    }

    #[test]
    fn square_occluder_casts_shadow() {
        let poly =
            visibility_polygon(Vec2::new(0.0, 0.0), &[square(10.0, 0.0, 2.0)], 50.0, 720).unwrap();
        assert!(poly.contains(Vec2::new(7.0, 0.0)));
        assert!(!poly.contains(Vec2::new(20.0, 0.0)));
        assert!(!poly.contains(Vec2::new(10.0, 0.0)));
        assert!(poly.contains(Vec2::new(-20.0, 0.0)));
        assert!(!poly.contains(Vec2::new(60.0, 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fan_containment_matches_even_odd(
            boxes in prop::collection::vec((-40.0f64..40.0, -40.0f64..40.0, 0.5f64..6.0), 0..8),
            pts in prop::collection::vec((-60.0f64..60.0, -60.0f64..60.0), 200),
        ) {
            let occ: Vec<Vec<Vec2>> = boxes
                .iter()
                .map(|&(x, y, h)| square(x, y, h))
                .filter(|sq| !point_in_polygon(sq, Vec2::new(0.0, 0.0)))
                .collect();
            let poly = visibility_polygon(Vec2::new(0.0, 0.0), &occ, 45.0, 360).unwrap();
            let verts = poly.vertices();
            for (x, y) in pts {
                let p = Vec2::new(x, y);
                let near = (0..verts.len()).any(|i| {
                    segment_distance(p, verts[i], verts[(i + 1) % verts.len()]) < 1e-7
                });
                if near {
                    continue;
                }
                prop_assert_eq!(poly.contains(p), poly.contains_even_odd(p));
            }
        }

        #[test]
        fn vertices_within_range_and_area_monotone(
            boxes in prop::collection::vec((-40.0f64..40.0, -40.0f64..40.0, 0.5f64..6.0), 1..8),
        ) {
            let occ: Vec<Vec<Vec2>> = boxes
                .iter()
                .map(|&(x, y, h)| square(x, y, h))
                .filter(|sq| !point_in_polygon(sq, Vec2::new(0.0, 0.0)))
                .collect();
            let o = Vec2::new(0.0, 0.0);
            let mut prev_area = f64::INFINITY;
            for k in 0..=occ.len() {
                let poly = visibility_polygon(o, &occ[..k], 45.0, 360).unwrap();
                for v in poly.vertices() {
                    prop_assert!(v.distance(o) <= 45.0 + 1e-6);
                }
                prop_assert!(poly.area() <= prev_area + 1e-9);
                prev_area = poly.area();
            }
        }
    }
}
