use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{Lane, Vec2};

/// Lanes plus static occluders. The ego drives on `ego_lane`, or on the
/// first lane when that is unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Map {
    #[serde(default = "default_name")]
    pub name: String,
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub occluders: Vec<Vec<Vec2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego_lane: Option<String>,
}

fn default_name() -> String {
    "map".to_string()
}

impl Map {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.lanes.is_empty() {
            return Err(SimError::InvalidMap("map has no lanes".into()));
        }
        for (i, l) in self.lanes.iter().enumerate() {
            if self.lanes[..i].iter().any(|o| o.id() == l.id()) {
                return Err(SimError::InvalidMap(format!(
                    "duplicate lane id {:?}",
                    l.id()
                )));
            }
        }
        if let Some(id) = &self.ego_lane {
            self.lane(id)?;
        }
        for o in &self.occluders {
            if o.len() < 2 || o.iter().any(|p| !p.is_finite()) {
                return Err(SimError::InvalidMap(
                    "occluders need at least two finite vertices".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn lane(&self, id: &str) -> Result<&Lane, SimError> {
        self.lanes
            .iter()
            .find(|l| l.id() == id)
            .ok_or_else(|| SimError::UnknownLane(id.to_string()))
    }

    pub fn ego_lane(&self) -> &Lane {
        self.ego_lane
            .as_deref()
            .and_then(|id| self.lanes.iter().find(|l| l.id() == id))
            .unwrap_or(&self.lanes[0])
    }

    /// Lanes whose centerline crosses the given ego lane.
    pub fn conflicting_lanes(&self, ego: &Lane) -> Vec<Lane> {
        self.lanes
            .iter()
            .filter(|l| l.id() != ego.id() && l.crosses(ego))
            .cloned()
            .collect()
    }

    /// Lanes other agents may use: everything except the ego lane and
    /// lanes sharing its entry point (those would start inside the ego).
    pub fn agent_lanes(&self, ego: &Lane) -> Vec<&Lane> {
        let start = ego.centerline()[0];
        self.lanes
            .iter()
            .filter(|l| l.id() != ego.id() && l.centerline()[0].distance(start) > 1.0)
            .collect()
    }

    /// First arc length on `ego` where another lane crosses it.
    pub fn conflict_s(&self, ego: &Lane) -> Option<f64> {
        self.lanes
            .iter()
            .filter(|l| l.id() != ego.id())
            .filter_map(|l| ego.first_crossing(l))
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EgoTurn {
    #[default]
    Straight,
    Left,
    Right,
}

/// Parameters of the synthetic four-way intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    /// Length of each arm from the center (m).
    pub arm_length: f64,
    pub lane_width: f64,
    /// Gap between the road edge and the buildings (m).
    pub building_setback: f64,
    pub ego_turn: EgoTurn,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            arm_length: 60.0,
            lane_width: 3.5,
            building_setback: 2.0,
            ego_turn: EgoTurn::Straight,
        }
    }
}

/// Four-way perpendicular intersection centered at the origin with one
/// lane per direction (right-hand traffic) and a square building filling
/// each quadrant beyond the setback.
///
/// Through lanes are named after their entry arm: `south_in` runs north at
/// `x = w/2`, `north_in` south, `east_in` west and `west_in` east. The ego
/// starts on the south arm, going straight on `south_in` or turning on
/// `ego_left` / `ego_right`.
pub fn synthetic_intersection(layout: &LayoutConfig) -> Result<Map, SimError> {
    let LayoutConfig {
        arm_length: arm,
        lane_width: w,
        building_setback: setback,
        ego_turn,
    } = *layout;
    if !(arm > 0.0 && w > 0.0 && setback >= 0.0) || !(arm.is_finite() && setback.is_finite()) {
        return Err(SimError::InvalidMap(
            "arm_length and lane_width must be positive, building_setback non-negative".into(),
        ));
    }
    if arm <= 2.0 * w {
        return Err(SimError::InvalidMap(
            "arm_length must exceed twice the lane width".into(),
        ));
    }
    let h = 0.5 * w;
    let p = Vec2::new;
    let mut lanes = vec![
        Lane::straight("south_in", p(h, -arm), p(h, arm), w)?,
        Lane::straight("north_in", p(-h, arm), p(-h, -arm), w)?,
        Lane::straight("east_in", p(arm, h), p(-arm, h), w)?,
        Lane::straight("west_in", p(-arm, -h), p(arm, -h), w)?,
    ];
    let ego_lane = match ego_turn {
        EgoTurn::Straight => None,
        EgoTurn::Left => {
            // quarter circle about (-w, -w) onto the westbound lane
            let c = p(-w, -w);
            let mut pts = vec![p(h, -arm)];
            pts.extend(arc(c, 1.5 * w, 0.0, 0.5 * std::f64::consts::PI));
            pts.push(p(-arm, h));
            lanes.push(Lane::new("ego_left", pts, w)?);
            Some("ego_left".to_string())
        }
        EgoTurn::Right => {
            // quarter circle about (w, -w) onto the eastbound lane
            let c = p(w, -w);
            let mut pts = vec![p(h, -arm)];
            pts.extend(arc(c, h, std::f64::consts::PI, 0.5 * std::f64::consts::PI));
            pts.push(p(arm, -h));
            lanes.push(Lane::new("ego_right", pts, w)?);
            Some("ego_right".to_string())
        }
    };

    let inner = w + setback;
    let occluders = if inner < arm {
        [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .iter()
            .map(|&(sx, sy)| {
                vec![
                    p(sx * inner, sy * inner),
                    p(sx * arm, sy * inner),
                    p(sx * arm, sy * arm),
                    p(sx * inner, sy * arm),
                ]
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(Map {
        name: "synthetic".to_string(),
        lanes,
        occluders,
        ego_lane,
    })
}

/// Points on a circular arc from angle `from` to `to`, endpoints included.
fn arc(center: Vec2, radius: f64, from: f64, to: f64) -> Vec<Vec2> {
    let n = 16;
    (0..=n)
        .map(|k| {
            let a = from + (to - from) * k as f64 / n as f64;
            center + Vec2::from_angle(a) * radius
        })
        .collect()
}
