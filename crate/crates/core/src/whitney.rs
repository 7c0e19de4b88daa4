//! Whitney basis evaluation, nodal (DeRham) interpolation, weighted mass and
//! stiffness matrices, and error norms for discrete differential forms.
//!
//! Vector proxies are Euclidean throughout. A discrete 0-form is the usual
//! piecewise-linear hat expansion, a 1-form uses the edge functions
//! `l_a grad(l_b) - l_b grad(l_a)` oriented along the global low-to-high
//! edge direction, and a 2-form is the per-triangle density `1/area`.

use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::linalg::CsrMatrix;
use crate::mesh::{Degree, SimplicialMesh};
use std::sync::Arc;

/// Coefficient vector of a discrete form in the Whitney basis.
#[derive(Debug, Clone)]
pub struct Cochain {
    pub degree: Degree,
    pub values: Vec<f64>,
}

impl Cochain {
    pub fn zeros(mesh: &SimplicialMesh, degree: Degree) -> Self {
        Cochain {
            degree,
            values: vec![0.0; mesh.n_simplices(degree)],
        }
    }

    pub fn from_values(degree: Degree, values: Vec<f64>) -> Self {
        Cochain { degree, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Value of a form proxy at a point: scalar for degrees 0 and 2, a vector
/// for degree 1.
#[derive(Debug, Clone, Copy)]
pub enum FormValue {
    Scalar(f64),
    Vector(Vec2),
}

impl FormValue {
    pub fn scalar(self) -> f64 {
        match self {
            FormValue::Scalar(s) => s,
            FormValue::Vector(_) => panic!("expected scalar proxy"),
        }
    }

    pub fn vector(self) -> Vec2 {
        match self {
            FormValue::Vector(v) => v,
            FormValue::Scalar(_) => panic!("expected vector proxy"),
        }
    }
}

type EvalFn = Arc<dyn Fn(Vec2, f64) -> FormValue + Send + Sync>;

/// A time-dependent analytic form given through its proxy evaluator,
/// optionally with the proxy of its exterior derivative.
#[derive(Clone)]
pub struct AnalyticForm {
    pub degree: Degree,
    eval: EvalFn,
    exterior: Option<EvalFn>,
}

impl AnalyticForm {
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(Vec2, f64) -> f64 + Send + Sync + 'static,
    {
        AnalyticForm {
            degree: Degree::Zero,
            eval: Arc::new(move |x, t| FormValue::Scalar(f(x, t))),
            exterior: None,
        }
    }

    pub fn one_form<F>(f: F) -> Self
    where
        F: Fn(Vec2, f64) -> Vec2 + Send + Sync + 'static,
    {
        AnalyticForm {
            degree: Degree::One,
            eval: Arc::new(move |x, t| FormValue::Vector(f(x, t))),
            exterior: None,
        }
    }

    pub fn density<F>(f: F) -> Self
    where
        F: Fn(Vec2, f64) -> f64 + Send + Sync + 'static,
    {
        AnalyticForm {
            degree: Degree::Two,
            eval: Arc::new(move |x, t| FormValue::Scalar(f(x, t))),
            exterior: None,
        }
    }

    /// Attaches the exterior derivative proxy: the gradient for a 0-form, the
    /// scalar curl `d_x u_2 - d_y u_1` for a 1-form.
    pub fn with_exterior_vector<F>(mut self, f: F) -> Self
    where
        F: Fn(Vec2, f64) -> Vec2 + Send + Sync + 'static,
    {
        self.exterior = Some(Arc::new(move |x, t| FormValue::Vector(f(x, t))));
        self
    }

    pub fn with_exterior_scalar<F>(mut self, f: F) -> Self
    where
        F: Fn(Vec2, f64) -> f64 + Send + Sync + 'static,
    {
        self.exterior = Some(Arc::new(move |x, t| FormValue::Scalar(f(x, t))));
        self
    }

    pub fn eval(&self, x: Vec2, t: f64) -> FormValue {
        (self.eval)(x, t)
    }

    pub fn eval_exterior(&self, x: Vec2, t: f64) -> Option<FormValue> {
        self.exterior.as_ref().map(|f| f(x, t))
    }
}

/// Local Whitney basis values on one triangle.
#[derive(Debug, Clone)]
pub enum BasisValues {
    /// barycentric hats at the three vertices (local order)
    Zero([f64; 3]),
    /// proxies of the three edge functions in local edge order
    /// (v0v1, v1v2, v2v0), global orientation signs applied
    One([Vec2; 3]),
    /// the constant density of the triangle function
    Two(f64),
}

/// Evaluates the local Whitney basis of degree `l` on triangle `t` at `x`.
pub fn evaluate_whitney_basis(
    mesh: &SimplicialMesh,
    l: Degree,
    t: usize,
    x: Vec2,
) -> BasisValues {
    let lam = mesh.barycentric(t, x);
    let g = mesh.tri_geom(t);
    match l {
        Degree::Zero => BasisValues::Zero(lam),
        Degree::One => {
            let mut vals = [Vec2::ZERO; 3];
            for k in 0..3 {
                let (a, b) = (k, (k + 1) % 3);
                let (_, sign) = mesh.tri_edges[t][k];
                vals[k] = (g.grads[b] * lam[a] - g.grads[a] * lam[b]) * sign;
            }
            BasisValues::One(vals)
        }
        Degree::Two => BasisValues::Two(1.0 / g.area),
    }
}

/// Evaluates the proxy of a discrete form inside triangle `t`.
pub fn evaluate_cochain(mesh: &SimplicialMesh, w: &Cochain, t: usize, x: Vec2) -> FormValue {
    match evaluate_whitney_basis(mesh, w.degree, t, x) {
        BasisValues::Zero(lam) => {
            let tri = mesh.triangles[t];
            FormValue::Scalar(
                lam[0] * w.values[tri[0]] + lam[1] * w.values[tri[1]] + lam[2] * w.values[tri[2]],
            )
        }
        BasisValues::One(b) => {
            let mut v = Vec2::ZERO;
            for k in 0..3 {
                let (e, _) = mesh.tri_edges[t][k];
                v += b[k] * w.values[e];
            }
            FormValue::Vector(v)
        }
        BasisValues::Two(b) => FormValue::Scalar(b * w.values[t]),
    }
}

/// Proxy of the elementwise exterior derivative of a discrete form on `t`:
/// the (constant) gradient 1-form for `l = 0`, the constant curl density for
/// `l = 1`.
pub fn evaluate_cochain_exterior(mesh: &SimplicialMesh, w: &Cochain, t: usize) -> FormValue {
    let g = mesh.tri_geom(t);
    match w.degree {
        Degree::Zero => {
            let tri = mesh.triangles[t];
            let mut v = Vec2::ZERO;
            for k in 0..3 {
                v += g.grads[k] * w.values[tri[k]];
            }
            FormValue::Vector(v)
        }
        Degree::One => {
            // sum of signed edge coefficients over the area: Stokes on the cell
            let mut circ = 0.0;
            for &(e, s) in &mesh.tri_edges[t] {
                circ += s * w.values[e];
            }
            FormValue::Scalar(circ / g.area)
        }
        Degree::Two => panic!("no exterior derivative above top degree"),
    }
}

/// Nodal interpolation: evaluates the degrees of freedom of an analytic form
/// (point values, oriented edge line integrals, triangle integrals).
pub fn derham_interpolate(
    mesh: &SimplicialMesh,
    l: Degree,
    form: &AnalyticForm,
    t: f64,
    quad_order: usize,
) -> Cochain {
    assert_eq!(form.degree, l, "form degree must match interpolation degree");
    let mut values = vec![0.0; mesh.n_simplices(l)];
    match l {
        Degree::Zero => {
            for (i, v) in mesh.vertices.iter().enumerate() {
                values[i] = form.eval(*v, t).scalar();
            }
        }
        Degree::One => {
            let rule = geom::gauss_legendre_unit(quad_order);
            for (e, &[a, b]) in mesh.edges.iter().enumerate() {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let d = pb - pa;
                let mut acc = 0.0;
                for &(s, wq) in &rule {
                    let x = pa + d * s;
                    acc += wq * form.eval(x, t).vector().dot(d);
                }
                values[e] = acc;
            }
        }
        Degree::Two => {
            let rule = geom::triangle_rule(quad_order.max(2));
            for t_id in 0..mesh.triangles.len() {
                let verts = mesh.tri_vertices(t_id);
                let area = mesh.tri_geom(t_id).area;
                let mut acc = 0.0;
                for &(lam, wq) in &rule {
                    let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
                    acc += wq * form.eval(x, t).scalar();
                }
                values[t_id] = acc * area;
            }
        }
    }
    Cochain { degree: l, values }
}

fn check_coefficient(alpha: f64, x: Vec2) -> Result<f64> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidCoefficient {
            value: alpha,
            x: x.x,
            y: x.y,
        });
    }
    Ok(alpha)
}

/// Assembles the weighted mass matrix `(i,j) -> integral of a b_i . b_j`.
///
/// Order-2 quadrature: exact for the quadratic Whitney products with
/// piecewise-constant coefficients.
pub fn assemble_mass(
    mesh: &SimplicialMesh,
    l: Degree,
    alpha: &dyn Fn(Vec2) -> f64,
) -> Result<CsrMatrix> {
    let n = mesh.n_simplices(l);
    let rule = geom::triangle_rule(2);
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    for t in 0..mesh.triangles.len() {
        let verts = mesh.tri_vertices(t);
        let area = mesh.tri_geom(t).area;
        // global dof ids of the local basis
        let dofs: [usize; 3] = match l {
            Degree::Zero => mesh.triangles[t],
            Degree::One => [
                mesh.tri_edges[t][0].0,
                mesh.tri_edges[t][1].0,
                mesh.tri_edges[t][2].0,
            ],
            Degree::Two => [t, t, t],
        };
        let mut local = [[0.0f64; 3]; 3];
        for &(lam, wq) in &rule {
            let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
            let a = check_coefficient(alpha(x), x)?;
            match evaluate_whitney_basis(mesh, l, t, x) {
                BasisValues::Zero(b) => {
                    for i in 0..3 {
                        for j in 0..3 {
                            local[i][j] += wq * a * b[i] * b[j];
                        }
                    }
                }
                BasisValues::One(b) => {
                    for i in 0..3 {
                        for j in 0..3 {
                            local[i][j] += wq * a * b[i].dot(b[j]);
                        }
                    }
                }
                BasisValues::Two(b) => {
                    local[0][0] += wq * a * b * b;
                }
            }
        }
        match l {
            Degree::Two => trips.push((t, t, local[0][0] * area)),
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        trips.push((dofs[i], dofs[j], local[i][j] * area));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, &mut trips))
}

/// Assembles the weighted stiffness matrix `(i,j) -> integral of
/// a (d b_i) . (d b_j)` as `D^T M_{l+1}(a) D` with `D` the incidence matrix.
pub fn assemble_stiffness(
    mesh: &SimplicialMesh,
    l: Degree,
    alpha: &dyn Fn(Vec2) -> f64,
) -> Result<CsrMatrix> {
    let next = match l {
        Degree::Zero => Degree::One,
        Degree::One => Degree::Two,
        Degree::Two => {
            return Err(Error::InvalidArgument(
                "top-degree forms have no diffusion term".into(),
            ))
        }
    };
    let d = mesh.incidence_matrix(l)?;
    let m_next = assemble_mass(mesh, next, alpha)?;
    Ok(d.transpose().matmul(&m_next).matmul(d))
}

/// Norm kinds for `error_norm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// graph norm of the exterior derivative: `(L2^2 + |d . - d exact|^2)^(1/2)`
    Hd,
}

/// L2 (or d-graph) distance between a discrete form and an analytic one,
/// by order-6 triangle quadrature.
pub fn error_norm(
    mesh: &SimplicialMesh,
    w: &Cochain,
    exact: &AnalyticForm,
    t: f64,
    kind: NormKind,
) -> f64 {
    assert_eq!(w.degree, exact.degree, "degree mismatch in error norm");
    let rule = geom::triangle_rule(6);
    let mut acc = 0.0;
    for tri in 0..mesh.triangles.len() {
        let verts = mesh.tri_vertices(tri);
        let area = mesh.tri_geom(tri).area;
        let mut cell = 0.0;
        for &(lam, wq) in &rule {
            let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
            let diff2 = match (evaluate_cochain(mesh, w, tri, x), exact.eval(x, t)) {
                (FormValue::Scalar(a), FormValue::Scalar(b)) => (a - b) * (a - b),
                (FormValue::Vector(a), FormValue::Vector(b)) => {
                    let d = a - b;
                    d.dot(d)
                }
                _ => unreachable!(),
            };
            cell += wq * diff2;
            if kind == NormKind::Hd {
                let ed = exact
                    .eval_exterior(x, t)
                    .expect("Hd norm requires the exterior derivative evaluator");
                let dd2 = match (evaluate_cochain_exterior(mesh, w, tri), ed) {
                    (FormValue::Scalar(a), FormValue::Scalar(b)) => (a - b) * (a - b),
                    (FormValue::Vector(a), FormValue::Vector(b)) => {
                        let d = a - b;
                        d.dot(d)
                    }
                    _ => unreachable!(),
                };
                cell += wq * dd2;
            }
        }
        acc += cell * area;
    }
    acc.sqrt()
}

/// Degree-of-freedom functional of an analytic form on a single subsimplex,
/// with dense quadrature; used by unisolvence checks and the test oracles.
pub fn dof_functional(
    mesh: &SimplicialMesh,
    l: Degree,
    idx: usize,
    form: &AnalyticForm,
    t: f64,
    quad_order: usize,
) -> f64 {
    match l {
        Degree::Zero => form.eval(mesh.vertices[idx], t).scalar(),
        Degree::One => {
            let [a, b] = mesh.edges[idx];
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let d = pb - pa;
            geom::gauss_legendre_unit(quad_order)
                .iter()
                .map(|&(s, wq)| wq * form.eval(pa + d * s, t).vector().dot(d))
                .sum()
        }
        Degree::Two => {
            let verts = mesh.tri_vertices(idx);
            let area = mesh.tri_geom(idx).area;
            geom::triangle_rule(quad_order.max(2))
                .iter()
                .map(|&(lam, wq)| {
                    let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
                    wq * form.eval(x, t).scalar()
                })
                .sum::<f64>()
                * area
        }
    }
}

/// Writes a cochain to legacy ASCII VTK as point data (degree 0) or cell
/// data (degrees 1 and 2; the 1-form proxy is sampled at centroids).
pub fn write_cochain_vtk<P: AsRef<std::path::Path>>(
    mesh: &SimplicialMesh,
    w: &Cochain,
    path: P,
    name: &str,
) -> Result<()> {
    use std::io::Write as _;
    mesh.write_vtk(&path, name)?;
    let mut f = std::fs::OpenOptions::new().append(true).open(path)?;
    match w.degree {
        Degree::Zero => {
            writeln!(f, "POINT_DATA {}", mesh.vertices.len())?;
            writeln!(f, "SCALARS {name} double 1")?;
            writeln!(f, "LOOKUP_TABLE default")?;
            for v in &w.values {
                writeln!(f, "{v}")?;
            }
        }
        Degree::One => {
            writeln!(f, "CELL_DATA {}", mesh.triangles.len())?;
            writeln!(f, "VECTORS {name} double")?;
            for t in 0..mesh.triangles.len() {
                let v = evaluate_cochain(mesh, w, t, mesh.centroid(t)).vector();
                writeln!(f, "{} {} 0.0", v.x, v.y)?;
            }
        }
        Degree::Two => {
            writeln!(f, "CELL_DATA {}", mesh.triangles.len())?;
            writeln!(f, "SCALARS {name} double 1")?;
            writeln!(f, "LOOKUP_TABLE default")?;
            for t in 0..mesh.triangles.len() {
                writeln!(f, "{}", w.values[t] / mesh.tri_geom(t).area)?;
            }
        }
    }
    Ok(())
}
