use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose2D, Vec2};

const MIN_SEGMENT: f64 = 1e-9;

/// A piecewise-linear lane centerline parameterized by arc length.
///
/// The lane is the curvilinear frame every agent moves in: a state is just
/// the arc length `s` along the centerline (lateral offset is always zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaneRecord", into = "LaneRecord")]
pub struct Lane {
    id: String,
    centerline: Vec<Vec2>,
    width: f64,
    cumulative: Vec<f64>,
}

/// On-disk form of a lane; arc lengths are recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneRecord {
    id: String,
    centerline: Vec<Vec2>,
    width: f64,
}

impl TryFrom<LaneRecord> for Lane {
    type Error = GeometryError;
    fn try_from(r: LaneRecord) -> Result<Self, Self::Error> {
        Lane::new(r.id, r.centerline, r.width)
    }
}

impl From<Lane> for LaneRecord {
    fn from(l: Lane) -> Self {
        LaneRecord {
            id: l.id,
            centerline: l.centerline,
            width: l.width,
        }
    }
}

/// Closest centerline point to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProjection {
    pub s: f64,
    /// Signed distance, positive to the left of the travel direction.
    pub lateral: f64,
}

impl Lane {
    pub fn new(
        id: impl Into<String>,
        centerline: Vec<Vec2>,
        width: f64,
    ) -> Result<Self, GeometryError> {
        let id = id.into();
        let invalid = |reason: &str| GeometryError::InvalidLane {
            id: id.clone(),
            reason: reason.to_string(),
        };
        if centerline.len() < 2 {
            return Err(invalid("centerline needs at least two vertices"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("width must be positive"));
        }
        if centerline.iter().any(|p| !p.is_finite()) {
            return Err(invalid("non-finite vertex"));
        }
        let mut cumulative = Vec::with_capacity(centerline.len());
        cumulative.push(0.0);
        for w in centerline.windows(2) {
            let d = w[0].distance(w[1]);
            if d <= MIN_SEGMENT {
                return Err(invalid("consecutive vertices coincide"));
            }
            let last = *cumulative.last().unwrap();
            cumulative.push(last + d);
        }
        Ok(Self {
            id,
            centerline,
            width,
            cumulative,
        })
    }

    /// Straight lane from `start` to `end`.
    pub fn straight(
        id: impl Into<String>,
        start: Vec2,
        end: Vec2,
        width: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(id, vec![start, end], width)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment_dir(&self, i: usize) -> Vec2 {
        let d = self.centerline[i + 1] - self.centerline[i];
        d * (1.0 / (self.cumulative[i + 1] - self.cumulative[i]))
    }

    /// Index of the segment containing arc length `s` (already in range).
    fn segment_at(&self, s: f64) -> usize {
        let n_seg = self.centerline.len() - 1;
        // first vertex with cumulative > s, minus one
        let idx = self.cumulative.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(n_seg - 1)
    }

    /// Pose on the centerline at arc length `s`.
    pub fn arc_length_to_pose(&self, s: f64) -> Result<Pose2D, GeometryError> {
        let length = self.length();
        if !(0.0..=length).contains(&s) {
            return Err(GeometryError::OutOfRange { s, length });
        }
        Ok(self.pose_in_segment(self.segment_at(s), s))
    }

    /// Like [`Lane::arc_length_to_pose`] but continues along the first/last
    /// segment direction outside `[0, length]`. Used for agents upstream of
    /// the mapped segment (negative `s`) or past its end.
    pub fn extrapolated_pose(&self, s: f64) -> Pose2D {
        let n_seg = self.centerline.len() - 1;
        let seg = if s < 0.0 {
            0
        } else if s > self.length() {
            n_seg - 1
        } else {
            self.segment_at(s)
        };
        self.pose_in_segment(seg, s)
    }

    fn pose_in_segment(&self, seg: usize, s: f64) -> Pose2D {
        let dir = self.segment_dir(seg);
        let p = self.centerline[seg] + dir * (s - self.cumulative[seg]);
        Pose2D::new(p.x, p.y, dir.angle())
    }

    /// Projects a Cartesian point onto the centerline. Returns `None` when
    /// the point is farther than `max_lateral` from every segment.
    pub fn project(&self, point: Vec2, max_lateral: f64) -> Option<LaneProjection> {
        let mut best: Option<(f64, LaneProjection)> = None;
        for i in 0..self.centerline.len() - 1 {
            let a = self.centerline[i];
            let seg_len = self.cumulative[i + 1] - self.cumulative[i];
            let dir = self.segment_dir(i);
            let rel = point - a;
            let along = rel.dot(dir).clamp(0.0, seg_len);
            let foot = a + dir * along;
            let dist = point.distance(foot);
            // strict comparison keeps the smallest s on ties
            if best.is_none_or(|(d, _)| dist < d - 1e-12) {
                let side = dir.cross(rel);
                let lateral = if side < 0.0 { -dist } else { dist };
                best = Some((
                    dist,
                    LaneProjection {
                        s: self.cumulative[i] + along,
                        lateral,
                    },
                ));
            }
        }
        best.filter(|(d, _)| *d <= max_lateral).map(|(_, p)| p)
    }

    /// Whether the two centerlines cross or touch anywhere.
    pub fn crosses(&self, other: &Lane) -> bool {
        self.centerline.windows(2).any(|a| {
            other
                .centerline
                .windows(2)
                .any(|b| segments_intersect(a[0], a[1], b[0], b[1]))
        })
    }

    /// Smallest arc length on this lane where `other` crosses it.
    pub fn first_crossing(&self, other: &Lane) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.centerline.windows(2).enumerate() {
            for b in other.centerline.windows(2) {
                if !segments_intersect(a[0], a[1], b[0], b[1]) {
                    continue;
                }
                let (da, db) = (a[1] - a[0], b[1] - b[0]);
                let denom = da.cross(db);
                // collinear overlap: count from the segment start
                let t = if denom.abs() < 1e-15 {
                    0.0
                } else {
                    ((b[0] - a[0]).cross(db) / denom).clamp(0.0, 1.0)
                };
                let s = self.cumulative[i] + t * da.norm();
                best = Some(best.map_or(s, |x: f64| x.min(s)));
            }
            if best.is_some() {
                // later segments only lie further along
                return best;
            }
        }
        best
    }
}

pub(crate) fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_seg = |a: Vec2, b: Vec2, p: Vec2| {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    (d1 == 0.0 && on_seg(p1, p2, q1))
        || (d2 == 0.0 && on_seg(p1, p2, q2))
        || (d3 == 0.0 && on_seg(q1, q2, p1))
        || (d4 == 0.0 && on_seg(q1, q2, p2))
}
