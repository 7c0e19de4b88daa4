//! Eulerian spatial discretizations of the Lie derivative.
//!
//! Two constructions are provided. The *standard* bilinear form is the limit
//! of a variational central finite difference of exact-flow pullbacks; on
//! Whitney forms it splits into broken volume terms (the elementwise Cartan
//! formula) plus central face terms weighting proxy jumps against trace
//! averages on interior edges. The *upwind/downwind interpolated* operator
//! instead evaluates one-sided co-chain limits degree by degree: one-sided
//! vertex traces, one-sided curl integrals along edges, and upwind boundary
//! fluxes for densities.
//!
//! Both are validated against brute-force oracles that transport subsimplices
//! (or integrands) through accurately integrated characteristics; the oracles
//! are deliberately independent of the assembly code paths.

use crate::error::Result;
use crate::flow::{flow_with_jacobian, trace_segment, VelocityField};
use crate::geom::{self, clip_polygon_convex, polygon_signed_area, Vec2};
use crate::linalg::CsrMatrix;
use crate::mesh::{Degree, SimplicialMesh};
use crate::whitney::{evaluate_cochain, evaluate_whitney_basis, BasisValues, Cochain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LieVariant {
    Standard,
    Upwind,
    Downwind,
}

/// Which one-sided limit an interpolated Lie derivative takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneSided {
    Upwind,
    Downwind,
}

/// A spatial Lie-derivative discretization.
///
/// For `Standard` the matrix is variational: entry `(i, j)` is the bilinear
/// form on (trial `j`, test `i`), so it adds directly to mass/stiffness
/// systems. For `Upwind`/`Downwind` the matrix acts on cochain coefficients:
/// row `i` is the one-sided Lie derivative DOF on subsimplex `i`; variational
/// use pairs it with a mass matrix.
#[derive(Debug, Clone)]
pub struct LieMatrix {
    pub degree: Degree,
    pub variant: LieVariant,
    pub matrix: CsrMatrix,
}

/// Unit normal of edge `e` pointing from its lower-index triangle into the
/// higher-index one (or out of the single triangle on the boundary).
fn edge_normal_lo_hi(mesh: &SimplicialMesh, e: usize) -> Vec2 {
    let n = mesh.edge_vector(e).rot90().normalized();
    let (t0, _) = mesh.edge_tris[e];
    // orient away from t0
    let to_mid = mesh.edge_midpoint(e) - mesh.centroid(t0);
    if n.dot(to_mid) >= 0.0 {
        n
    } else {
        -n
    }
}

/// Local trace values of all basis functions of triangle `t` at `x`,
/// flattened to (global dof, proxy value) pairs.
fn local_traces(mesh: &SimplicialMesh, l: Degree, t: usize, x: Vec2) -> Vec<(usize, TraceVal)> {
    match evaluate_whitney_basis(mesh, l, t, x) {
        BasisValues::Zero(b) => {
            let tri = mesh.triangles[t];
            (0..3).map(|k| (tri[k], TraceVal::Scalar(b[k]))).collect()
        }
        BasisValues::One(b) => (0..3)
            .map(|k| (mesh.tri_edges[t][k].0, TraceVal::Vector(b[k])))
            .collect(),
        BasisValues::Two(b) => vec![(t, TraceVal::Scalar(b))],
    }
}

#[derive(Debug, Clone, Copy)]
enum TraceVal {
    Scalar(f64),
    Vector(Vec2),
}

impl TraceVal {
    fn pair(self, other: TraceVal) -> f64 {
        match (self, other) {
            (TraceVal::Scalar(a), TraceVal::Scalar(b)) => a * b,
            (TraceVal::Vector(a), TraceVal::Vector(b)) => a.dot(b),
            _ => unreachable!(),
        }
    }
}

/// Assembles the variational standard Lie matrix with an optional positive
/// weight in the pairing (used by the moving-media application).
pub fn assemble_standard_lie_weighted(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    t_eval: f64,
    alpha: &dyn Fn(Vec2) -> f64,
    quad_order: usize,
) -> LieMatrix {
    let n = mesh.n_simplices(l);
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();

    // volume terms: broken Cartan formula per element
    let tri_rule = geom::triangle_rule(quad_order.max(2));
    for t in 0..mesh.triangles.len() {
        let verts = mesh.tri_vertices(t);
        let area = mesh.tri_geom(t).area;
        let g = mesh.tri_geom(t);
        match l {
            Degree::Zero => {
                let tri = mesh.triangles[t];
                for &(lam, wq) in &tri_rule {
                    let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
                    let b = beta.eval(x, t_eval);
                    let a = alpha(x);
                    for jj in 0..3 {
                        let adv = b.dot(g.grads[jj]);
                        for ii in 0..3 {
                            trips.push((tri[ii], tri[jj], wq * area * a * adv * lam[ii]));
                        }
                    }
                }
            }
            Degree::One => {
                for &(lam, wq) in &tri_rule {
                    let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
                    let b = beta.eval(x, t_eval);
                    let db = beta.jacobian(x, t_eval);
                    let a = alpha(x);
                    let basis = match evaluate_whitney_basis(mesh, Degree::One, t, x) {
                        BasisValues::One(v) => v,
                        _ => unreachable!(),
                    };
                    for jj in 0..3 {
                        let (ecol, sign) = mesh.tri_edges[t][jj];
                        let (va, vb) = (jj, (jj + 1) % 3);
                        let (ga, gb) = (g.grads[va], g.grads[vb]);
                        // grad(beta . u) = Dbeta^T u + (Du)^T beta, with
                        // (Du)^T beta = s (ga (gb.beta) - gb (ga.beta))
                        let dut_beta = (ga * gb.dot(b) - gb * ga.dot(b)) * sign;
                        let rot = 2.0 * ga.cross(gb) * sign;
                        let lie = db.transpose().matvec(basis[jj]) + dut_beta + b.rot90() * rot;
                        for ii in 0..3 {
                            let (erow, _) = mesh.tri_edges[t][ii];
                            trips.push((erow, ecol, wq * area * a * lie.dot(basis[ii])));
                        }
                    }
                }
            }
            Degree::Two => {
                // div(w beta) = w div(beta) for the elementwise-constant density
                let w = 1.0 / area;
                let mut acc = 0.0;
                for &(lam, wq) in &tri_rule {
                    let x = verts[0] * lam[0] + verts[1] * lam[1] + verts[2] * lam[2];
                    let divb = beta.jacobian(x, t_eval).trace();
                    acc += wq * alpha(x) * divb;
                }
                trips.push((t, t, acc * area * w * w));
            }
        }
    }

    // central face terms on interior edges; 0-forms are continuous so the
    // jumps vanish identically and the loop is skipped
    if l != Degree::Zero {
        let rule = geom::gauss_legendre_unit(quad_order.max(2).min(5));
        for e in 0..mesh.edges.len() {
            let (t0, t1) = match mesh.edge_tris[e] {
                (t0, Some(t1)) => (t0, t1),
                _ => continue,
            };
            let nrm = edge_normal_lo_hi(mesh, e);
            let [va, vb] = mesh.edges[e];
            let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
            let d = pb - pa;
            let len = d.norm();
            for &(s, wq) in &rule {
                let x = pa + d * s;
                let bn = beta.eval(x, t_eval).dot(nrm);
                let a = alpha(x);
                let w = 0.5 * wq * len * a * bn;
                let tr0 = local_traces(mesh, l, t0, x);
                let tr1 = local_traces(mesh, l, t1, x);
                // jump (side1 - side0) against sum (side0 + side1)
                for (cj, vj, sj) in tr1
                    .iter()
                    .map(|&(c, v)| (c, v, 1.0))
                    .chain(tr0.iter().map(|&(c, v)| (c, v, -1.0)))
                {
                    for (ri, vi) in tr0.iter().chain(tr1.iter()) {
                        trips.push((*ri, cj, w * sj * vj.pair(*vi)));
                    }
                }
            }
        }
    }

    LieMatrix {
        degree: l,
        variant: LieVariant::Standard,
        matrix: CsrMatrix::from_triplets(n, n, &mut trips),
    }
}

/// Standard (central) Lie matrix with unit pairing weight.
pub fn assemble_standard_lie(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    t_eval: f64,
    quad_order: usize,
) -> LieMatrix {
    assemble_standard_lie_weighted(mesh, l, beta, t_eval, &|_| 1.0, quad_order)
}

/// Relative probe offset for one-sided element selection at vertices.
const PROBE_SCALE: f64 = 1e-8;

/// Selects the one-sided triangle at a point of edge `e` from the sign of
/// `beta . n`; ties go to the lower triangle index.
fn edge_side(
    mesh: &SimplicialMesh,
    e: usize,
    nrm: Vec2,
    b: Vec2,
    side: OneSided,
) -> usize {
    let (t0, t1) = mesh.edge_tris[e];
    let Some(t1) = t1 else { return t0 };
    let g = b.dot(nrm);
    let tol = 1e-13 * (1.0 + b.norm());
    if g > tol {
        // flow crosses from t0 into t1
        match side {
            OneSided::Upwind => t0,
            OneSided::Downwind => t1,
        }
    } else if g < -tol {
        match side {
            OneSided::Upwind => t1,
            OneSided::Downwind => t0,
        }
    } else {
        t0.min(t1)
    }
}

/// One-sided element at a vertex, found by probing a small step along
/// (upwind) or against (downwind) the reversed velocity.
fn vertex_side(
    mesh: &SimplicialMesh,
    v: usize,
    b: Vec2,
    side: OneSided,
) -> Result<usize> {
    let eps = PROBE_SCALE * mesh.h_max;
    let sgn = match side {
        OneSided::Upwind => -1.0,
        OneSided::Downwind => 1.0,
    };
    let probe = mesh.clamp_to_domain(mesh.vertices[v] + b * (sgn * eps));
    let hint = mesh.vertex_tris[v].first().copied().unwrap_or(0);
    Ok(mesh.locate_point(probe, hint)?.0)
}

/// Splits `[0,1]` at the sign changes of `g`, located by scanning and
/// bisection. The one-sided integrands switch elements exactly there, so
/// quadrature panels must not straddle a root. Affine endpoint sampling is
/// not enough: already cubic velocity components produce two interior roots
/// along an edge.
fn sign_split(g: impl Fn(f64) -> f64, scan: usize) -> Vec<(f64, f64)> {
    let mut cuts = vec![0.0];
    let mut prev = g(0.0);
    for i in 1..=scan {
        let s = i as f64 / scan as f64;
        let cur = g(s);
        if prev * cur < 0.0 {
            let (mut lo, mut hi) = ((i - 1) as f64 / scan as f64, s);
            let (mut glo, _) = (prev, cur);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if glo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    cuts.push(1.0);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Assembles the one-sided interpolated Lie derivative as a cochain-action
/// matrix: row `i` evaluates `d(i_beta w) + i_beta(d w)` with one-sided
/// contractions on subsimplex `i`.
pub fn assemble_upwind_lie(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    t_eval: f64,
    side: OneSided,
) -> Result<LieMatrix> {
    let n = mesh.n_simplices(l);
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let rule = geom::gauss_legendre_unit(4);

    match l {
        Degree::Zero => {
            for v in 0..mesh.vertices.len() {
                let b = beta.eval(mesh.vertices[v], t_eval);
                if b == Vec2::ZERO {
                    continue;
                }
                let t = vertex_side(mesh, v, b, side)?;
                let g = mesh.tri_geom(t);
                let tri = mesh.triangles[t];
                for k in 0..3 {
                    trips.push((v, tri[k], b.dot(g.grads[k])));
                }
            }
        }
        Degree::One => {
            for (e, &[vj, vk]) in mesh.edges.iter().enumerate() {
                // endpoint contraction terms: +- u_side(v) . beta(v)
                for (v, pm) in [(vk, 1.0), (vj, -1.0)] {
                    let b = beta.eval(mesh.vertices[v], t_eval);
                    if b == Vec2::ZERO {
                        continue;
                    }
                    let t = vertex_side(mesh, v, b, side)?;
                    if let BasisValues::One(vals) =
                        evaluate_whitney_basis(mesh, Degree::One, t, mesh.vertices[v])
                    {
                        for k in 0..3 {
                            let (ecol, _) = mesh.tri_edges[t][k];
                            trips.push((e, ecol, pm * vals[k].dot(b)));
                        }
                    }
                }
                // one-sided curl integral along the edge, split where beta . n
                // changes sign between the endpoints
                let (pa, pb) = (mesh.vertices[vj], mesh.vertices[vk]);
                let d = pb - pa;
                let nrm = edge_normal_lo_hi(mesh, e);
                let gfun = |s: f64| beta.eval(pa + d * s, t_eval).dot(nrm);
                for (s0, s1) in sign_split(gfun, 16) {
                    if s1 <= s0 {
                        continue;
                    }
                    for &(q, wq) in &rule {
                        let s = s0 + (s1 - s0) * q;
                        let x = pa + d * s;
                        let b = beta.eval(x, t_eval);
                        let t = edge_side(mesh, e, nrm, b, side);
                        let weight = wq * (s1 - s0) * b.rot90().dot(d);
                        let area = mesh.tri_geom(t).area;
                        for &(ecol, sgn) in &mesh.tri_edges[t] {
                            trips.push((e, ecol, weight * sgn / area));
                        }
                    }
                }
            }
        }
        Degree::Two => {
            // one-sided boundary flux over each triangle's edges
            for t in 0..mesh.triangles.len() {
                for k in 0..3 {
                    let tri = mesh.triangles[t];
                    let (pa, pb) = (mesh.vertices[tri[k]], mesh.vertices[tri[(k + 1) % 3]]);
                    let d = pb - pa;
                    let nout = mesh.edge_normal_from(t, k);
                    let len = d.norm();
                    let gfun = |s: f64| beta.eval(pa + d * s, t_eval).dot(nout);
                    for (s0, s1) in sign_split(gfun, 16) {
                        if s1 <= s0 {
                            continue;
                        }
                        for &(q, wq) in &rule {
                            let s = s0 + (s1 - s0) * q;
                            let x = pa + d * s;
                            let b = beta.eval(x, t_eval);
                            let bn = b.dot(nout);
                            let tol = 1e-13 * (1.0 + b.norm());
                            let nb = mesh.tri_neighbors[t][k];
                            let src = if bn > tol {
                                match side {
                                    OneSided::Upwind => t,
                                    OneSided::Downwind => nb.unwrap_or(t),
                                }
                            } else if bn < -tol {
                                match side {
                                    OneSided::Upwind => nb.unwrap_or(t),
                                    OneSided::Downwind => t,
                                }
                            } else {
                                nb.map_or(t, |n2| t.min(n2))
                            };
                            let w = wq * (s1 - s0) * len * bn / mesh.tri_geom(src).area;
                            trips.push((t, src, w));
                        }
                    }
                }
            }
        }
    }

    Ok(LieMatrix {
        degree: l,
        variant: match side {
            OneSided::Upwind => LieVariant::Upwind,
            OneSided::Downwind => LieVariant::Downwind,
        },
        matrix: CsrMatrix::from_triplets(n, n, &mut trips),
    })
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

/// Dense matrix of the central-difference bilinear form with exact-flow
/// pullbacks: entry `(i, j)` approximates the standard Lie matrix entry.
///
/// The integration splits each element into patches on which the pullback is
/// smooth: mesh edges are transported through accurately integrated
/// characteristics, polygonalized with `samples` chords per edge, and clipped
/// against the elements. Plain quadrature cannot see the face strips that
/// produce the jump terms, so this geometric decomposition is essential.
pub fn oracle_lie_matrix(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    t_eval: f64,
    dtau: f64,
    samples: usize,
) -> Vec<Vec<f64>> {
    let n = mesh.n_simplices(l);
    let plus = pullback_pairing_matrix(mesh, l, beta, t_eval, t_eval + dtau, samples);
    let minus = pullback_pairing_matrix(mesh, l, beta, t_eval, t_eval - dtau, samples);
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (plus[i][j] - minus[i][j]) / (2.0 * dtau);
        }
    }
    out
}

/// Central-difference bilinear form evaluated on two cochains.
pub fn oracle_lie_bilinear(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    omega: &Cochain,
    eta: &Cochain,
    t_eval: f64,
    dtau: f64,
    samples: usize,
) -> f64 {
    let m = oracle_lie_matrix(mesh, l, beta, t_eval, dtau, samples);
    let mut acc = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            acc += eta.values[i] * v * omega.values[j];
        }
    }
    acc
}

/// `S[i][j] = integral over the domain of (X*_{t,tau} b_j) . b_i`, with the
/// pullback through the exact flow from `t` to `tau`.
pub fn pullback_pairing_matrix(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    t: f64,
    tau: f64,
    samples: usize,
) -> Vec<Vec<f64>> {
    let n = mesh.n_simplices(l);
    let mut s = vec![vec![0.0; n]; n];
    let m = samples.max(8);

    // polygonalize the inverse-flow images of all mesh edges once
    let mut chains: Vec<Vec<Vec2>> = Vec::with_capacity(mesh.edges.len());
    for &[a, b] in &mesh.edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let mut chain = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let x = pa + (pb - pa) * (i as f64 / m as f64);
            // x lives at time tau; its preimage set under X_{t,tau} is the
            // image under the reversed flow
            let (y, _) = flow_with_jacobian(beta, x, tau, t, 2);
            chain.push(y);
        }
        chains.push(chain);
    }
    // assemble the polygonalized preimage of each source triangle
    let polys: Vec<Vec<Vec2>> = (0..mesh.triangles.len())
        .map(|tt| {
            let mut poly = Vec::with_capacity(3 * m);
            for k in 0..3 {
                let (e, sign) = mesh.tri_edges[tt][k];
                let chain = &chains[e];
                if sign > 0.0 {
                    poly.extend_from_slice(&chain[..m]);
                } else {
                    for i in (1..=m).rev() {
                        poly.push(chain[i]);
                    }
                }
            }
            poly
        })
        .collect();

    let rule = geom::triangle_rule(4);
    for target in 0..mesh.triangles.len() {
        let clip = mesh.tri_vertices(target).to_vec();
        let target_area = mesh.tri_geom(target).area;
        let mut covered = 0.0;
        for (source, poly) in polys.iter().enumerate() {
            let patch = clip_polygon_convex(poly, &clip);
            if patch.len() < 3 {
                continue;
            }
            let area = polygon_signed_area(&patch);
            if area.abs() < 1e-300 {
                continue;
            }
            covered += area;
            // fan triangulation about the centroid, each wedge subdivided
            // radially: the quadrature panels must shrink in every direction
            // or the rule error on the O(dtau) part of the integrand survives
            // the division by dtau
            let centroid = patch
                .iter()
                .fold(Vec2::ZERO, |a, &p| a + p)
                * (1.0 / patch.len() as f64);
            let np = patch.len();
            let radial = 8usize;
            for k in 0..np {
                let (p1, p2) = (patch[k], patch[(k + 1) % np]);
                if (p1 - centroid).cross(p2 - centroid) == 0.0 {
                    continue;
                }
                for r in 0..radial {
                    let (f0, f1) = (r as f64 / radial as f64, (r + 1) as f64 / radial as f64);
                    let q1 = centroid + (p1 - centroid) * f0;
                    let q2 = centroid + (p2 - centroid) * f0;
                    let q3 = centroid + (p1 - centroid) * f1;
                    let q4 = centroid + (p2 - centroid) * f1;
                    let panels: [[Vec2; 3]; 2] = [[q1, q3, q4], [q1, q4, q2]];
                    let take = if r == 0 { 1 } else { 2 };
                    for panel in panels.iter().take(take) {
                        let tri_area = 0.5 * (panel[1] - panel[0]).cross(panel[2] - panel[0]);
                        if tri_area == 0.0 {
                            continue;
                        }
                        for &(lam, wq) in &rule {
                            let x = panel[0] * lam[0] + panel[1] * lam[1] + panel[2] * lam[2];
                            let (y, jac) = flow_with_jacobian(beta, x, t, tau, 2);
                            let w = wq * tri_area;
                            accumulate_pullback_products(
                                mesh, l, target, source, x, y, &jac, w, &mut s,
                            );
                        }
                    }
                }
            }
        }
        debug_assert!(
            (covered - target_area).abs() < 1e-6 * target_area,
            "patch decomposition covers {covered} of {target_area}"
        );
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn accumulate_pullback_products(
    mesh: &SimplicialMesh,
    l: Degree,
    target: usize,
    source: usize,
    x: Vec2,
    y: Vec2,
    jac: &crate::geom::Mat2,
    w: f64,
    s: &mut [Vec<f64>],
) {
    match l {
        Degree::Zero => {
            let (bt, bs) = (
                match evaluate_whitney_basis(mesh, l, target, x) {
                    BasisValues::Zero(b) => b,
                    _ => unreachable!(),
                },
                match evaluate_whitney_basis(mesh, l, source, y) {
                    BasisValues::Zero(b) => b,
                    _ => unreachable!(),
                },
            );
            let (ti, tj) = (mesh.triangles[target], mesh.triangles[source]);
            for i in 0..3 {
                for j in 0..3 {
                    s[ti[i]][tj[j]] += w * bt[i] * bs[j];
                }
            }
        }
        Degree::One => {
            let bt = match evaluate_whitney_basis(mesh, l, target, x) {
                BasisValues::One(b) => b,
                _ => unreachable!(),
            };
            let bs = match evaluate_whitney_basis(mesh, l, source, y) {
                BasisValues::One(b) => b,
                _ => unreachable!(),
            };
            for i in 0..3 {
                let (ei, _) = mesh.tri_edges[target][i];
                for j in 0..3 {
                    let (ej, _) = mesh.tri_edges[source][j];
                    // (X* b_j)(x) = DX(x)^T b_j(X(x))
                    s[ei][ej] += w * jac.transpose().matvec(bs[j]).dot(bt[i]);
                }
            }
        }
        Degree::Two => {
            let bt = 1.0 / mesh.tri_geom(target).area;
            let bs = 1.0 / mesh.tri_geom(source).area;
            s[target][source] += w * jac.det() * bs * bt;
        }
    }
}

/// One-sided co-chain difference quotient through accurately integrated
/// characteristics: per degree of freedom,
/// `(<w, s_i> - <w, X_{t,t-dtau}(s_i)>) / dtau`.
///
/// Transported edges are polygonalized into chords and every chord traced
/// through the mesh, so the discontinuities of the broken integrand never
/// cross a quadrature panel.
pub fn oracle_upwind_cochain(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    w: &Cochain,
    t_eval: f64,
    dtau: f64,
) -> Result<Vec<f64>> {
    oracle_upwind_cochain_sampled(mesh, l, beta, w, t_eval, dtau, 256)
}

/// As `oracle_upwind_cochain` with an explicit polyline resolution. The
/// chord sagitta enters the quotient divided by `dtau`, so the default
/// resolution is generous.
pub fn oracle_upwind_cochain_sampled(
    mesh: &SimplicialMesh,
    l: Degree,
    beta: &VelocityField,
    w: &Cochain,
    t_eval: f64,
    dtau: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    let n = mesh.n_simplices(l);
    let mut out = vec![0.0; n];
    match l {
        Degree::Zero => {
            for v in 0..n {
                let (y, _) = flow_with_jacobian(beta, mesh.vertices[v], t_eval, t_eval - dtau, 2);
                let y = mesh.clamp_to_domain(y);
                let hint = mesh.vertex_tris[v][0];
                let (t, _) = mesh.locate_point(y, hint)?;
                let val = evaluate_cochain(mesh, w, t, y).scalar();
                out[v] = (w.values[v] - val) / dtau;
            }
        }
        Degree::One => {
            for (e, &[a, b]) in mesh.edges.iter().enumerate() {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                // transported polyline
                let mut pts = Vec::with_capacity(samples + 1);
                for i in 0..=samples {
                    let x = pa + (pb - pa) * (i as f64 / samples as f64);
                    let (y, _) = flow_with_jacobian(beta, x, t_eval, t_eval - dtau, 2);
                    pts.push(mesh.clamp_to_domain(y));
                }
                let mut pairing = 0.0;
                let hint = mesh.vertex_tris[a][0];
                let mut start = mesh.locate_point(pts[0], hint)?;
                for i in 0..samples {
                    let pieces = trace_segment(mesh, start, pts[i + 1])?;
                    for p in &pieces {
                        let dir = p.b_xy - p.a_xy;
                        for &(q, wq) in geom::gauss_legendre_unit(2).iter() {
                            let x = p.a_xy + dir * q;
                            let u = evaluate_cochain(mesh, w, p.tri, x).vector();
                            pairing += wq * u.dot(dir);
                        }
                    }
                    let last = pieces.last().unwrap();
                    start = (last.tri, last.b);
                }
                out[e] = (w.values[e] - pairing) / dtau;
            }
        }
        Degree::Two => {
            for t in 0..n {
                // polygonalize the backward image of the triangle boundary
                let tri = mesh.triangles[t];
                let mut poly = Vec::with_capacity(3 * samples);
                for k in 0..3 {
                    let (p0, p1) = (mesh.vertices[tri[k]], mesh.vertices[tri[(k + 1) % 3]]);
                    for i in 0..samples {
                        let x = p0 + (p1 - p0) * (i as f64 / samples as f64);
                        let (y, _) =
                            flow_with_jacobian(beta, x, t_eval, t_eval - dtau, 2);
                        poly.push(mesh.clamp_to_domain(y));
                    }
                }
                let mut pairing = 0.0;
                for cand in 0..mesh.triangles.len() {
                    let clip = mesh.tri_vertices(cand).to_vec();
                    let overlap = clip_polygon_convex(&poly, &clip);
                    let area = polygon_signed_area(&overlap);
                    if area.abs() > 1e-16 {
                        pairing += area / mesh.tri_geom(cand).area * w.values[cand];
                    }
                }
                out[t] = (w.values[t] - pairing) / dtau;
            }
        }
    }
    Ok(out)
}

/// Quadrature applied to the pointwise difference quotient on an edge -- the
/// evaluation order the co-chain limits exist to avoid. Consistent only for
/// globally smooth data; used to demonstrate the order-of-limits failure.
pub fn naive_pointwise_edge_quotient(
    mesh: &SimplicialMesh,
    beta: &VelocityField,
    w: &Cochain,
    edge: usize,
    t_eval: f64,
    dtau: f64,
) -> Result<f64> {
    assert_eq!(w.degree, Degree::One);
    let [a, b] = mesh.edges[edge];
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    let d = pb - pa;
    let mut acc = 0.0;
    for &(q, wq) in geom::gauss_legendre_unit(4).iter() {
        let x = pa + d * q;
        let (tx, _) = mesh.locate_point(x, mesh.vertex_tris[a][0])?;
        let u_here = evaluate_cochain(mesh, w, tx, x).vector();
        let (y, jac) = flow_with_jacobian(beta, x, t_eval, t_eval - dtau, 2);
        let y = mesh.clamp_to_domain(y);
        let (ty, _) = mesh.locate_point(y, tx)?;
        let u_back = jac.transpose().matvec(evaluate_cochain(mesh, w, ty, y).vector());
        acc += wq * (u_here - u_back).dot(d);
    }
    Ok(acc / dtau)
}

/// Extrapolates three samples `f(tau), f(tau/2), f(tau/4)` to `tau -> 0`
/// through the quadratic Lagrange polynomial.
pub fn extrapolate_three(values: [f64; 3]) -> f64 {
    values[0] / 3.0 - 2.0 * values[1] + 8.0 / 3.0 * values[2]
}
