//! Small planar geometry kit: vectors, 2x2 matrices, quadrature rules,
//! convex polygon clipping.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, `self.x*other.y - self.y*other.x`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counterclockwise quarter turn: `R v = (-y, x)`.
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        Mat2::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn matvec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        let mut r = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

/// Signed area of a simple polygon (positive when counterclockwise).
pub fn polygon_signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Clips a simple polygon against the half plane `n . (x - p) >= 0`
/// (Sutherland-Hodgman pass).
fn clip_half_plane(poly: &[Vec2], p: Vec2, n: Vec2, out: &mut Vec<Vec2>) {
    out.clear();
    let len = poly.len();
    if len == 0 {
        return;
    }
    for i in 0..len {
        let cur = poly[i];
        let nxt = poly[(i + 1) % len];
        let dc = n.dot(cur - p);
        let dn = n.dot(nxt - p);
        if dc >= 0.0 {
            out.push(cur);
            if dn < 0.0 {
                let t = dc / (dc - dn);
                out.push(cur + (nxt - cur) * t);
            }
        } else if dn >= 0.0 {
            let t = dc / (dc - dn);
            out.push(cur + (nxt - cur) * t);
        }
    }
}

/// Clips `subject` (any simple polygon) against the counterclockwise
/// convex polygon `clip`. Returns the clipped polygon, possibly empty.
pub fn clip_polygon_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut work = subject.to_vec();
    let mut buf = Vec::with_capacity(subject.len() + clip.len());
    let n = clip.len();
    for i in 0..n {
        let a = clip[i];
        let b = clip[(i + 1) % n];
        // inward normal of a CCW edge
        let normal = (b - a).rot90();
        clip_half_plane(&work, a, normal, &mut buf);
        std::mem::swap(&mut work, &mut buf);
        if work.is_empty() {
            break;
        }
    }
    work
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(order: usize) -> Vec<(f64, f64)> {
    // nodes/weights on [-1,1], mapped to [0,1]
    let raw: Vec<(f64, f64)> = match order.max(1) {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => {
            let a = 1.0 / 3.0 * (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt();
            let b = 1.0 / 3.0 * (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt();
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            vec![
                (-b, wb),
                (-a, wa),
                (0.0, 128.0 / 225.0),
                (a, wa),
                (b, wb),
            ]
        }
    };
    raw.into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Symmetric quadrature rule on a triangle, given as barycentric points and
/// weights summing to one (multiply by the triangle area).
pub fn triangle_rule(degree: usize) -> Vec<([f64; 3], f64)> {
    match degree {
        0 | 1 => vec![([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)],
        2 => {
            // edge midpoints, exact for quadratics
            let w = 1.0 / 3.0;
            vec![
                ([0.5, 0.5, 0.0], w),
                ([0.0, 0.5, 0.5], w),
                ([0.5, 0.0, 0.5], w),
            ]
        }
        3 | 4 => {
            // 6-point rule, exact to degree 4
            let mut pts = Vec::with_capacity(6);
            let g1 = 0.108_103_018_168_070;
            let g2 = 0.445_948_490_915_965;
            let w1 = 0.223_381_589_678_011;
            let h1 = 0.816_847_572_980_459;
            let h2 = 0.091_576_213_509_771;
            let w2 = 0.109_951_743_655_322;
            for perm in permute3(g1, g2, g2) {
                pts.push((perm, w1));
            }
            for perm in permute3(h1, h2, h2) {
                pts.push((perm, w2));
            }
            pts
        }
        _ => {
            // 12-point rule, exact to degree 6
            let mut pts = Vec::with_capacity(12);
            let a1 = 0.873_821_971_016_996;
            let b1 = 0.063_089_014_491_502;
            let w1 = 0.050_844_906_370_207;
            let a2 = 0.501_426_509_658_179;
            let b2 = 0.249_286_745_170_910;
            let w2 = 0.116_786_275_726_379;
            let a3 = 0.053_145_049_844_817;
            let b3 = 0.310_352_451_033_784;
            let c3 = 1.0 - a3 - b3;
            let w3 = 0.082_851_075_618_374;
            for perm in permute3(a1, b1, b1) {
                pts.push((perm, w1));
            }
            for perm in permute3(a2, b2, b2) {
                pts.push((perm, w2));
            }
            for perm in [
                [a3, b3, c3],
                [b3, c3, a3],
                [c3, a3, b3],
                [a3, c3, b3],
                [c3, b3, a3],
                [b3, a3, c3],
            ] {
                pts.push((perm, w3));
            }
            pts
        }
    }
}

fn permute3(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    [[a, b, c], [b, c, a], [c, a, b]]
}
