use super::Vec2;

const BOUNDARY_EPS: f64 = 1e-12;

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a) <= BOUNDARY_EPS;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t) <= BOUNDARY_EPS * (1.0 + len2.sqrt())
}

/// Even-odd containment test. Points on the boundary count as inside.
pub fn point_in_polygon(polygon: &[Vec2], point: Vec2) -> bool {
    let n = polygon.len();
    if n < 3 {
        return n == 2 && on_segment(point, polygon[0], polygon[1]);
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if on_segment(point, a, b) {
            return true;
        }
        if (a.y > point.y) != (b.y > point.y) {
            let x_cross = a.x + (point.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if point.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn polygon_area(polygon: &[Vec2]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += polygon[i].cross(polygon[(i + 1) % n]);
    }
    0.5 * acc
}

/// Winding number of `polygon` around `point` (non-zero means inside).
pub fn winding_number(polygon: &[Vec2], point: Vec2) -> i32 {
    let n = polygon.len();
    let mut wn = 0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let side = (b - a).cross(point - a);
        if a.y <= point.y {
            if b.y > point.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= point.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}
