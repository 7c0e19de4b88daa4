//! Velocity fields, exact solutions and manufactured sources for the
//! built-in convergence and stability studies.
//!
//! Both studies store plain tangential edge cochains of the unknown vector
//! field `u` and eliminate boundary-edge coefficients (the manufactured
//! solutions vanish on the boundary, so every trace condition holds).
//!
//! The transient studies integrate the adjoint schemes, whose convective
//! limit acts on the complementary form: the continuous operator they
//! approximate is
//!
//!   d_t u + eps curl(rot u) + beta (div u) + R grad(u . R beta) = f,
//!
//! with `rot u = d_x u_2 - d_y u_1`, `curl s = (d_y s, -d_x s)` and `R` the
//! counterclockwise quarter turn. The stationary study uses the direct
//! discretization, whose convective part is the Lie derivative of the
//! stored form itself:
//!
//!   u + eps curl(rot u) + grad(beta . u) + rot(u) R beta = f.
//!
//! Sources are composed from analytic derivatives and cross-checked against
//! finite differences of the continuous operators.

use crate::flow::VelocityField;
use crate::geom::{Mat2, Vec2};
use crate::whitney::AnalyticForm;
use std::f64::consts::PI;

/// Velocity fields of the built-in studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedVelocity {
    /// divergence-free polynomial swirl vanishing on the boundary
    Swirl,
    /// compressible field, tangential on the boundary
    Compressible,
}

impl NamedVelocity {
    pub fn eval(self, x: Vec2) -> Vec2 {
        match self {
            NamedVelocity::Swirl => Vec2::new(
                (1.0 - x.x * x.x).powi(2) * (x.y - x.y.powi(3)),
                -(1.0 - x.y * x.y).powi(2) * (x.x - x.x.powi(3)),
            ),
            NamedVelocity::Compressible => Vec2::new(
                (PI * x.x).sin() * (1.0 - x.y * x.y),
                (PI * x.y).sin() * (1.0 - x.x * x.x),
            ),
        }
    }

    pub fn jacobian(self, x: Vec2) -> Mat2 {
        match self {
            NamedVelocity::Swirl => {
                let dxx = -4.0 * x.x * (1.0 - x.x * x.x) * (x.y - x.y.powi(3));
                let dxy = (1.0 - x.x * x.x).powi(2) * (1.0 - 3.0 * x.y * x.y);
                let dyx = -(1.0 - x.y * x.y).powi(2) * (1.0 - 3.0 * x.x * x.x);
                let dyy = 4.0 * x.y * (1.0 - x.y * x.y) * (x.x - x.x.powi(3));
                Mat2::new(dxx, dxy, dyx, dyy)
            }
            NamedVelocity::Compressible => Mat2::new(
                PI * (PI * x.x).cos() * (1.0 - x.y * x.y),
                -2.0 * x.y * (PI * x.x).sin(),
                -2.0 * x.x * (PI * x.y).sin(),
                PI * (PI * x.y).cos() * (1.0 - x.x * x.x),
            ),
        }
    }

    pub fn field(self) -> VelocityField {
        VelocityField::steady(move |x| self.eval(x)).with_jacobian(move |x, _| self.jacobian(x))
    }
}

/// Spatial shape of the exact solutions:
/// `g = sin(pi x) sin(pi y)`, `p = (1-x^2)(1-y^2)`.
fn shape(x: Vec2) -> (f64, f64) {
    ((PI * x.x).sin() * (PI * x.y).sin(), (1.0 - x.x * x.x) * (1.0 - x.y * x.y))
}

fn shape_grads(x: Vec2) -> (Vec2, Vec2) {
    let g = Vec2::new(
        PI * (PI * x.x).cos() * (PI * x.y).sin(),
        PI * (PI * x.x).sin() * (PI * x.y).cos(),
    );
    let p = Vec2::new(
        -2.0 * x.x * (1.0 - x.y * x.y),
        -2.0 * x.y * (1.0 - x.x * x.x),
    );
    (g, p)
}

/// Static part of the solution shape and its first derivatives.
fn shape_and_derivs(x: Vec2) -> (Vec2, Mat2) {
    let (g, p) = shape(x);
    let (gg, gp) = shape_grads(x);
    (Vec2::new(g, p), Mat2::new(gg.x, gg.y, gp.x, gp.y))
}

/// `rot u = d_x u_2 - d_y u_1` of the static shape.
fn shape_rot(x: Vec2) -> f64 {
    let (gg, gp) = shape_grads(x);
    gp.x - gg.y
}

/// Gradient of `shape_rot`:
/// `rot u = -2x(1-y^2) - pi sin(pi x) cos(pi y)`.
fn shape_rot_grad(x: Vec2) -> Vec2 {
    Vec2::new(
        -2.0 * (1.0 - x.y * x.y) - PI * PI * (PI * x.x).cos() * (PI * x.y).cos(),
        4.0 * x.x * x.y + PI * PI * (PI * x.x).sin() * (PI * x.y).sin(),
    )
}

/// `div u` of the static shape.
fn shape_div(x: Vec2) -> f64 {
    let (gg, gp) = shape_grads(x);
    gg.x + gp.y
}

/// Exact transient solution `u = cos(2 pi t) (g, p)`.
pub fn transient_exact_u(x: Vec2, t: f64) -> Vec2 {
    let (g, p) = shape(x);
    Vec2::new(g, p) * (2.0 * PI * t).cos()
}

pub fn transient_exact_form() -> AnalyticForm {
    AnalyticForm::one_form(transient_exact_u)
}

/// Manufactured source of the transient (adjoint-family) problem:
/// `f = d_t u + beta (div u) + R grad(u . R beta) + eps curl(rot u)`.
pub fn transient_source(vel: NamedVelocity, epsilon: f64) -> AnalyticForm {
    AnalyticForm::one_form(move |x, t| {
        let c = (2.0 * PI * t).cos();
        let dc = -2.0 * PI * (2.0 * PI * t).sin();
        let (u, du) = shape_and_derivs(x);
        let b = vel.eval(x);
        let db = vel.jacobian(x);
        // grad(u . R beta) = Du^T (R beta) + (cross(d_m beta, u))_m
        let rb = b.rot90();
        let dbx = Vec2::new(db.m[0][0], db.m[1][0]);
        let dby = Vec2::new(db.m[0][1], db.m[1][1]);
        let grad_urb =
            du.transpose().matvec(rb) + Vec2::new(dbx.cross(u), dby.cross(u));
        let grot = shape_rot_grad(x);
        let curl_rot = Vec2::new(grot.y, -grot.x);
        u * dc + (b * shape_div(x) + grad_urb.rot90() + curl_rot * epsilon) * c
    })
}

/// Exact solution of the stationary study (same spatial shape).
pub fn stationary_exact_u(x: Vec2) -> Vec2 {
    let (g, p) = shape(x);
    Vec2::new(g, p)
}

/// Scalar curl of the stationary solution.
pub fn stationary_rot_u(x: Vec2) -> f64 {
    shape_rot(x)
}

pub fn stationary_exact_form() -> AnalyticForm {
    AnalyticForm::one_form(|x, _| stationary_exact_u(x))
        .with_exterior_scalar(|x, _| stationary_rot_u(x))
}

/// Manufactured source of the stationary (direct-family) study:
/// `f = u + eps curl(rot u) + grad(beta . u) + rot(u) R beta`.
pub fn stationary_source(vel: NamedVelocity, epsilon: f64) -> AnalyticForm {
    AnalyticForm::one_form(move |x, _| {
        let (u, du) = shape_and_derivs(x);
        let b = vel.eval(x);
        let db = vel.jacobian(x);
        let grad_bu = db.transpose().matvec(u) + du.transpose().matvec(b);
        let rot = shape_rot(x);
        let grot = shape_rot_grad(x);
        let curl_rot = Vec2::new(grot.y, -grot.x);
        u + grad_bu + b.rot90() * rot + curl_rot * epsilon
    })
}
