//! Oriented bounding boxes and rotated IoU.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rotated rectangle in pixel coordinates. `angle` is in radians, measured
/// from the x axis, normalized to (−π/2, π/2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbDetection {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle: f64,
    #[serde(rename = "class")]
    pub class_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

type Pt = (f64, f64);

impl ObbDetection {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, angle: f64, class_id: u32) -> Self {
        ObbDetection {
            cx,
            cy,
            w,
            h,
            angle: normalize_angle(angle),
            class_id,
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    fn check(&self) -> Result<(), EvalError> {
        let finite = [self.cx, self.cy, self.w, self.h, self.angle]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.w <= 0.0 || self.h <= 0.0 {
            return Err(EvalError::DegenerateBox);
        }
        Ok(())
    }

    /// Corners in counter-clockwise order (y axis up).
    pub fn corners(&self) -> [Pt; 4] {
        let (s, c) = self.angle.sin_cos();
        let (ux, uy) = (c * self.w / 2.0, s * self.w / 2.0);
        let (vx, vy) = (-s * self.h / 2.0, c * self.h / 2.0);
        [
            (self.cx - ux - vx, self.cy - uy - vy),
            (self.cx + ux - vx, self.cy + uy - vy),
            (self.cx + ux + vx, self.cy + uy + vy),
            (self.cx - ux + vx, self.cy - uy + vy),
        ]
    }

    /// Whether point (x, y) lies inside the rectangle.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        u.abs() <= self.w / 2.0 && v.abs() <= self.h / 2.0
    }
}

pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut a = a % PI;
    if a > FRAC_PI_2 {
        a -= PI;
    } else if a <= -FRAC_PI_2 {
        a += PI;
    }
    a
}

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn polygon_area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() / 2.0
}

/// Sutherland–Hodgman clipping of `subject` by the convex CCW polygon `clip`.
fn clip_convex(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let dp = cross(a, b, p);
            let dq = cross(a, b, q);
            if dp >= 0.0 {
                output.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                output.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
    }
    output
}

/// Intersection-over-union of two rotated rectangles.
pub fn obb_iou(a: &ObbDetection, b: &ObbDetection) -> Result<f64, EvalError> {
    a.check()?;
    b.check()?;
    let inter = polygon_area(&clip_convex(&a.corners(), &b.corners()));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Err(EvalError::DegenerateBox);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}
