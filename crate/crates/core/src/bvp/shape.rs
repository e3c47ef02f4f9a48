use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::BvpError;

/// Zero-level set `dS` of the eikonal problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Circle { center: [f64; 2], radius: f64 },
    /// Union of two disjoint discs.
    TwoCircles { centers: [[f64; 2]; 2], radii: [f64; 2] },
    /// Axis-aligned square.
    Square { center: [f64; 2], half_side: f64 },
    /// Boundary samples with no analytic distance.
    PointCloud { points: Vec<[f64; 2]> },
}

impl Shape {
    pub fn validate(&self) -> Result<(), BvpError> {
        let bad = |m: String| Err(BvpError::Shape(m));
        match self {
            Self::Circle { radius, center } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return bad(format!("circle needs a finite centre and positive radius, got {radius}"));
                }
            }
            Self::TwoCircles { centers, radii } => {
                if !radii.iter().all(|r| r.is_finite() && *r > 0.0) {
                    return bad("radii must be positive".into());
                }
                let gap = dist(centers[0], centers[1]) - radii[0] - radii[1];
                if !(gap > 0.0) {
                    return bad("the two circles must be disjoint".into());
                }
            }
            Self::Square { half_side, center } => {
                if !(half_side.is_finite() && *half_side > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return bad(format!("square needs a positive half side, got {half_side}"));
                }
            }
            Self::PointCloud { points } => {
                if points.is_empty() {
                    return bad("point cloud is empty".into());
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("point cloud has non-finite coordinates".into());
                }
            }
        }
        Ok(())
    }

    /// Exact signed distance, negative inside. `None` for point clouds.
    pub fn signed_distance(&self, p: &[f64]) -> Option<f64> {
        let p = [p[0], p[1]];
        match self {
            Self::Circle { center, radius } => Some(dist(p, *center) - radius),
            Self::TwoCircles { centers, radii } => {
                Some((dist(p, centers[0]) - radii[0]).min(dist(p, centers[1]) - radii[1]))
            }
            Self::Square { center, half_side } => {
                let dx = (p[0] - center[0]).abs() - half_side;
                let dy = (p[1] - center[1]).abs() - half_side;
                let outside = dx.max(0.0).hypot(dy.max(0.0));
                Some(outside + dx.max(dy).min(0.0))
            }
            Self::PointCloud { .. } => None,
        }
    }

    /// Unsigned distance to `dS` (nearest sample for point clouds).
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        match self {
            Self::PointCloud { points } => {
                points.iter().map(|q| dist([p[0], p[1]], *q)).fold(f64::INFINITY, f64::min)
            }
            _ => self.signed_distance(p).map_or(f64::INFINITY, f64::abs),
        }
    }

    /// `n` points on `dS`, equally spaced by arc length for analytic shapes.
    /// Point clouds return an evenly strided subset (all points when `n`
    /// is at least the cloud size).
    pub fn boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        match self {
            Self::Circle { center, radius } => circle_points(*center, *radius, n),
            Self::TwoCircles { centers, radii } => {
                let n0 = ((n as f64) * radii[0] / (radii[0] + radii[1])).round() as usize;
                let mut pts = circle_points(centers[0], radii[0], n0);
                pts.extend(circle_points(centers[1], radii[1], n - n0));
                pts
            }
            Self::Square { center, half_side } => {
                let lo = [center[0] - half_side, center[1] - half_side];
                let hi = [center[0] + half_side, center[1] + half_side];
                // Walk the perimeter at uniform arc length.
                let perimeter = 8.0 * half_side;
                let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
                (0..n)
                    .map(|i| {
                        let s = perimeter * i as f64 / n as f64;
                        let side = ((s / (2.0 * half_side)) as usize).min(3);
                        let frac = (s - side as f64 * 2.0 * half_side) / (2.0 * half_side);
                        let (a, b) = (corners[side], corners[(side + 1) % 4]);
                        [a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])]
                    })
                    .collect()
            }
            Self::PointCloud { points } => {
                if n >= points.len() {
                    points.clone()
                } else {
                    (0..n).map(|i| points[i * points.len() / n]).collect()
                }
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn circle_points(center: [f64; 2], radius: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

/// Parses a point-cloud file: one `x y` pair per line, blank lines and lines
/// starting with `#` ignored.
pub fn parse_point_cloud(text: &str) -> Result<Shape, BvpError> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some([x, y]) => points.push([*x, *y]),
            _ => return Err(BvpError::Shape(format!("line {}: expected two numbers, got {line:?}", lineno + 1))),
        }
    }
    let shape = Shape::PointCloud { points };
    shape.validate()?;
    Ok(shape)
}
