//! Characteristic ODE integration for vertex trajectories, the induced
//! piecewise-linear flow map, segment tracing through the triangulation, and
//! flow Jacobians for oracles and diagnostics.

use crate::error::{Error, Result};
use crate::geom::{Mat2, Vec2};
use crate::mesh::{SimplicialMesh, TOL_GEOM};
use std::sync::Arc;

type VelFn = Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>;
type JacFn = Arc<dyn Fn(Vec2, f64) -> Mat2 + Send + Sync>;

/// A prescribed velocity field, assumed Lipschitz on the closed domain.
#[derive(Clone)]
pub struct VelocityField {
    eval: VelFn,
    jacobian: Option<JacFn>,
    pub sup_norm_hint: Option<f64>,
}

impl VelocityField {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(Vec2, f64) -> Vec2 + Send + Sync + 'static,
    {
        VelocityField {
            eval: Arc::new(f),
            jacobian: None,
            sup_norm_hint: None,
        }
    }

    /// Steady field: the time argument is ignored.
    pub fn steady<F>(f: F) -> Self
    where
        F: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    {
        VelocityField::new(move |x, _| f(x))
    }

    pub fn with_jacobian<F>(mut self, j: F) -> Self
    where
        F: Fn(Vec2, f64) -> Mat2 + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn with_sup_norm(mut self, s: f64) -> Self {
        self.sup_norm_hint = Some(s);
        self
    }

    pub fn eval(&self, x: Vec2, t: f64) -> Vec2 {
        (self.eval)(x, t)
    }

    /// Spatial Jacobian, analytic when supplied, otherwise central finite
    /// differences.
    pub fn jacobian(&self, x: Vec2, t: f64) -> Mat2 {
        if let Some(j) = &self.jacobian {
            return j(x, t);
        }
        let h = 1e-6;
        let fx1 = self.eval(Vec2::new(x.x + h, x.y), t);
        let fx0 = self.eval(Vec2::new(x.x - h, x.y), t);
        let fy1 = self.eval(Vec2::new(x.x, x.y + h), t);
        let fy0 = self.eval(Vec2::new(x.x, x.y - h), t);
        Mat2::new(
            (fx1.x - fx0.x) / (2.0 * h),
            (fy1.x - fy0.x) / (2.0 * h),
            (fx1.y - fx0.y) / (2.0 * h),
            (fy1.y - fy0.y) / (2.0 * h),
        )
    }

    /// Max Euclidean norm over the mesh vertices (the CFL normalization).
    pub fn sup_norm_on_vertices(&self, mesh: &SimplicialMesh, t: f64) -> f64 {
        if let Some(s) = self.sup_norm_hint {
            return s;
        }
        mesh.vertices
            .iter()
            .map(|&v| self.eval(v, t).norm())
            .fold(0.0_f64, f64::max)
    }

    /// Largest |beta . n| over boundary edge midpoints: the tangency defect.
    pub fn boundary_normal_defect(&self, mesh: &SimplicialMesh, t: f64) -> f64 {
        let mut worst = 0.0_f64;
        for (e, &onb) in mesh.edge_on_boundary.iter().enumerate() {
            if !onb {
                continue;
            }
            let n = mesh.edge_vector(e).rot90().normalized();
            let b = self.eval(mesh.edge_midpoint(e), t);
            worst = worst.max(b.dot(n).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk2,
    Rk4,
}

/// One explicit step of the characteristic ODE.
fn ode_step(beta: &VelocityField, x: Vec2, t: f64, dt: f64, integrator: Integrator) -> Vec2 {
    match integrator {
        Integrator::Euler => x + beta.eval(x, t) * dt,
        Integrator::Rk2 => {
            let k1 = beta.eval(x, t);
            let k2 = beta.eval(x + k1 * (0.5 * dt), t + 0.5 * dt);
            x + k2 * dt
        }
        Integrator::Rk4 => {
            let k1 = beta.eval(x, t);
            let k2 = beta.eval(x + k1 * (0.5 * dt), t + 0.5 * dt);
            let k3 = beta.eval(x + k2 * (0.5 * dt), t + 0.5 * dt);
            let k4 = beta.eval(x + k3 * dt, t + dt);
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        }
    }
}

/// Integrates the characteristic through `x` from `t_from` to `t_to`.
pub fn integrate_characteristic(
    beta: &VelocityField,
    x: Vec2,
    t_from: f64,
    t_to: f64,
    integrator: Integrator,
    substeps: usize,
) -> Vec2 {
    let n = substeps.max(1);
    let dt = (t_to - t_from) / n as f64;
    let mut p = x;
    let mut t = t_from;
    for _ in 0..n {
        p = ode_step(beta, p, t, dt, integrator);
        t += dt;
    }
    p
}

/// Integrates the characteristic together with its Jacobian (the variational
/// equation), using the same integrator for both.
pub fn flow_jacobian(
    beta: &VelocityField,
    x: Vec2,
    t_from: f64,
    t_to: f64,
    substeps: usize,
) -> Mat2 {
    flow_with_jacobian(beta, x, t_from, t_to, substeps).1
}

pub fn flow_with_jacobian(
    beta: &VelocityField,
    x: Vec2,
    t_from: f64,
    t_to: f64,
    substeps: usize,
) -> (Vec2, Mat2) {
    let n = substeps.max(1);
    let dt = (t_to - t_from) / n as f64;
    let mut p = x;
    let mut j = Mat2::IDENTITY;
    let mut t = t_from;
    // rk4 on the augmented system d/dt (x, J) = (beta(x,t), Dbeta(x,t) J)
    for _ in 0..n {
        let k1x = beta.eval(p, t);
        let k1j = beta.jacobian(p, t).matmul(&j);
        let p2 = p + k1x * (0.5 * dt);
        let j2 = j.add(&k1j.scale(0.5 * dt));
        let k2x = beta.eval(p2, t + 0.5 * dt);
        let k2j = beta.jacobian(p2, t + 0.5 * dt).matmul(&j2);
        let p3 = p + k2x * (0.5 * dt);
        let j3 = j.add(&k2j.scale(0.5 * dt));
        let k3x = beta.eval(p3, t + 0.5 * dt);
        let k3j = beta.jacobian(p3, t + 0.5 * dt).matmul(&j3);
        let p4 = p + k3x * dt;
        let j4 = j.add(&k3j.scale(dt));
        let k4x = beta.eval(p4, t + dt);
        let k4j = beta.jacobian(p4, t + dt).matmul(&j4);
        p = p + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        j = j.add(
            &k1j.add(&k2j.scale(2.0))
                .add(&k3j.scale(2.0))
                .add(&k4j)
                .scale(dt / 6.0),
        );
        t += dt;
    }
    (p, j)
}

/// Diagnostics for domain clamping of integrated vertex images.
#[derive(Debug, Clone, Default)]
pub struct ClampReport {
    pub clamped: usize,
    pub max_distance: f64,
}

impl ClampReport {
    pub fn merge(&mut self, other: &ClampReport) {
        self.clamped += other.clamped;
        self.max_distance = self.max_distance.max(other.max_distance);
    }
}

/// Advects every mesh vertex from `t_from` to `t_to`. Images that leave the
/// closed domain (numerical integrators do not preserve tangency exactly)
/// are projected back onto it and the clamp distances recorded.
pub fn advect_vertices(
    mesh: &SimplicialMesh,
    beta: &VelocityField,
    t_from: f64,
    t_to: f64,
    integrator: Integrator,
    substeps: usize,
) -> Result<(Vec<Vec2>, ClampReport)> {
    let mut images = Vec::with_capacity(mesh.vertices.len());
    let mut report = ClampReport::default();
    for (i, &v) in mesh.vertices.iter().enumerate() {
        let raw = integrate_characteristic(beta, v, t_from, t_to, integrator, substeps);
        if !raw.is_finite() {
            return Err(Error::Propagation { vertex: i });
        }
        let clamped = mesh.clamp_to_domain(raw);
        let d = (clamped - raw).norm();
        if d > 0.0 {
            report.clamped += 1;
            report.max_distance = report.max_distance.max(d);
        }
        images.push(clamped);
    }
    Ok((images, report))
}

/// Direction tag of a discrete flow (backward flows appear in direct
/// schemes, forward flows in adjoint ones).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Backward,
}

/// Per-vertex images of an approximate flow map together with their host
/// triangles; defines the piecewise-linear map by barycentric interpolation.
#[derive(Debug, Clone)]
pub struct DiscreteFlow {
    pub direction: FlowDirection,
    pub images: Vec<Vec2>,
    /// host triangle and barycentric coordinates of each image
    pub hosts: Vec<(usize, [f64; 3])>,
    pub clamp: ClampReport,
}

impl DiscreteFlow {
    /// Locates every image inside the mesh (walking from a triangle incident
    /// to the source vertex).
    pub fn build(
        mesh: &SimplicialMesh,
        images: Vec<Vec2>,
        direction: FlowDirection,
        clamp: ClampReport,
    ) -> Result<DiscreteFlow> {
        assert_eq!(images.len(), mesh.vertices.len());
        let mut hosts = Vec::with_capacity(images.len());
        for (v, &img) in images.iter().enumerate() {
            let hint = mesh.vertex_tris[v].first().copied().unwrap_or(0);
            let (t, l) = mesh
                .locate_point(img, hint)
                .map_err(|_| Error::LocationFailure { x: img.x, y: img.y })?;
            hosts.push((t, l));
        }
        Ok(DiscreteFlow {
            direction,
            images,
            hosts,
            clamp,
        })
    }

    /// Convenience: advect and build in one call.
    pub fn advect(
        mesh: &SimplicialMesh,
        beta: &VelocityField,
        t_from: f64,
        t_to: f64,
        integrator: Integrator,
        substeps: usize,
    ) -> Result<DiscreteFlow> {
        let (images, clamp) = advect_vertices(mesh, beta, t_from, t_to, integrator, substeps)?;
        let direction = if t_to < t_from {
            FlowDirection::Backward
        } else {
            FlowDirection::Forward
        };
        DiscreteFlow::build(mesh, images, direction, clamp)
    }

    /// Evaluates the piecewise-linear map on triangle `t`.
    pub fn map_point(&self, mesh: &SimplicialMesh, t: usize, x: Vec2) -> Vec2 {
        let l = mesh.barycentric(t, x);
        let tri = mesh.triangles[t];
        self.images[tri[0]] * l[0] + self.images[tri[1]] * l[1] + self.images[tri[2]] * l[2]
    }
}

/// One straight piece of a traced segment, contained in a single triangle.
/// Consecutive pieces share their Cartesian boundary point exactly.
#[derive(Debug, Clone)]
pub struct SegmentPiece {
    pub tri: usize,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub a_xy: Vec2,
    pub b_xy: Vec2,
}

impl SegmentPiece {
    pub fn length(&self) -> f64 {
        (self.b_xy - self.a_xy).norm()
    }
}

/// Traces the straight segment from a located start point to `end`,
/// splitting it at triangle boundaries. Grazing hits are resolved by nudging
/// the parameter forward and re-locating, so the walk is deterministic.
pub fn trace_segment(
    mesh: &SimplicialMesh,
    start: (usize, [f64; 3]),
    end: Vec2,
) -> Result<Vec<SegmentPiece>> {
    let (mut tri, start_l) = start;
    let start_xy = mesh.point_from_barycentric(tri, start_l);
    let total = end - start_xy;
    let max_pieces = mesh.triangles.len() + 8;
    let mut pieces: Vec<SegmentPiece> = Vec::new();

    if total.norm() == 0.0 {
        pieces.push(SegmentPiece {
            tri,
            a: start_l,
            b: start_l,
            a_xy: start_xy,
            b_xy: start_xy,
        });
        return Ok(pieces);
    }

    // nudge clearing the tie-break slack of locate_point, in segment units
    let nudge = (1e-9 * mesh.h_max / total.norm()).max(1e-9);
    let mut t_cur = 0.0f64;
    let mut cur_xy = start_xy;
    let mut guard = 0usize;
    loop {
        guard += 1;
        if pieces.len() > max_pieces || guard > 64 * max_pieces {
            return Err(Error::TracingCycle { max_pieces });
        }
        let l_cur = mesh.barycentric(tri, cur_xy);
        let l_end = mesh.barycentric(tri, end);
        // first parameter in (t_cur, 1] at which some barycentric coordinate
        // crosses zero from above
        let mut t_exit = 1.0f64;
        let mut exiting = false;
        for k in 0..3 {
            let (lc, le) = (l_cur[k], l_end[k]);
            // the remaining segment is parametrized s in [0,1] from cur to end
            if le < -TOL_GEOM && le < lc {
                let s = (lc / (lc - le)).clamp(0.0, 1.0);
                let t_abs = t_cur + s * (1.0 - t_cur);
                if t_abs < t_exit {
                    t_exit = t_abs;
                    exiting = true;
                }
            }
        }
        if !exiting {
            push_or_extend(&mut pieces, tri, l_cur, cur_xy, l_end, end);
            return Ok(pieces);
        }
        let exit_xy = start_xy + total * t_exit;
        if t_exit > t_cur {
            // degenerate crossings (grazing within the tolerance band) are
            // skipped: zero-length pieces carry no contribution
            push_or_extend(
                &mut pieces,
                tri,
                l_cur,
                cur_xy,
                mesh.barycentric(tri, exit_xy),
                exit_xy,
            );
        }
        t_cur = t_exit;
        cur_xy = exit_xy;
        if t_cur >= 1.0 {
            return Ok(pieces);
        }
        let t_probe = (t_cur + nudge).min(1.0);
        let probe_xy = start_xy + total * t_probe;
        let (next, _) = mesh.locate_point(probe_xy, tri)?;
        if next == tri {
            // grazing run: absorb the nudged stretch into the current triangle
            let stop_xy = if t_probe >= 1.0 { end } else { probe_xy };
            push_or_extend(
                &mut pieces,
                tri,
                mesh.barycentric(tri, cur_xy),
                cur_xy,
                mesh.barycentric(tri, stop_xy),
                stop_xy,
            );
            if t_probe >= 1.0 {
                return Ok(pieces);
            }
            t_cur = t_probe;
            cur_xy = probe_xy;
        } else {
            tri = next;
        }
    }
}

/// Appends a piece, merging it into the previous one when both live in the
/// same triangle and chain at the shared point.
fn push_or_extend(
    pieces: &mut Vec<SegmentPiece>,
    tri: usize,
    a: [f64; 3],
    a_xy: Vec2,
    b: [f64; 3],
    b_xy: Vec2,
) {
    if let Some(last) = pieces.last_mut() {
        if last.tri == tri && last.b_xy == a_xy {
            last.b = b;
            last.b_xy = b_xy;
            return;
        }
    }
    pieces.push(SegmentPiece {
        tri,
        a,
        b,
        a_xy,
        b_xy,
    });
}
