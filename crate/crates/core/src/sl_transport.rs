//! Transport matrices realizing "interpolate the pullback" on cochain
//! coefficients: barycentric sampling for vertices, exact per-piece line
//! integrals along traced segments for edges, and polygon clipping for
//! triangle densities. All three satisfy the discrete commuting identities
//! `d0 P0 = P1 d0` and `d1 P1 = P2 d1`.

use crate::error::{Error, Result};
use crate::flow::{trace_segment, DiscreteFlow, FlowDirection};
use crate::geom::{clip_polygon_convex, polygon_signed_area, Vec2};
use crate::linalg::CsrMatrix;
use crate::mesh::{Degree, SimplicialMesh};

/// Sparse matrix mapping cochain coefficients to the coefficients of the
/// interpolated pullback under a discrete flow.
#[derive(Debug, Clone)]
pub struct TransportMatrix {
    pub degree: Degree,
    pub direction: FlowDirection,
    pub matrix: CsrMatrix,
}

/// Vertex transport: row `i` holds the barycentric coordinates of the image
/// of vertex `i` within its host triangle.
pub fn assemble_p0(mesh: &SimplicialMesh, flow: &DiscreteFlow) -> TransportMatrix {
    let n = mesh.vertices.len();
    let mut trips = Vec::with_capacity(3 * n);
    for (v, &(t, lam)) in flow.hosts.iter().enumerate() {
        let tri = mesh.triangles[t];
        for k in 0..3 {
            if lam[k] != 0.0 {
                trips.push((v, tri[k], lam[k]));
            }
        }
    }
    TransportMatrix {
        degree: Degree::Zero,
        direction: flow.direction,
        matrix: CsrMatrix::from_triplets(n, n, &mut trips),
    }
}

/// Edge transport: row `i` integrates the edge basis functions along the
/// straight segment joining the images of the edge's endpoints. Each piece
/// `[a, b]` inside a triangle contributes the closed form
/// `l_j(a) l_k(b) - l_k(a) l_j(b)` to the column of edge `(j, k)`.
pub fn assemble_p1(mesh: &SimplicialMesh, flow: &DiscreteFlow) -> Result<TransportMatrix> {
    let n = mesh.edges.len();
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    for (e, &[va, vb]) in mesh.edges.iter().enumerate() {
        // oriented low -> high, so trace from image(low) to image(high)
        let start = flow.hosts[va];
        let end = flow.images[vb];
        let pieces = trace_segment(mesh, start, end)?;
        for piece in &pieces {
            let t = piece.tri;
            for k in 0..3 {
                let (col_edge, sign) = mesh.tri_edges[t][k];
                // local edge k joins local vertices k and k+1; `sign` converts
                // the local traversal to the global low -> high orientation
                let (j, kk) = (k, (k + 1) % 3);
                let val = piece.a[j] * piece.b[kk] - piece.a[kk] * piece.b[j];
                if val != 0.0 {
                    trips.push((e, col_edge, sign * val));
                }
            }
        }
    }
    Ok(TransportMatrix {
        degree: Degree::One,
        direction: flow.direction,
        matrix: CsrMatrix::from_triplets(n, n, &mut trips),
    })
}

/// Triangle transport: row `i` clips the affine image of triangle `i`
/// against every overlapping mesh triangle; entry `(i, t)` is the overlap
/// area divided by `area(t)` (the degree of freedom of the pulled-back
/// indicator density).
pub fn assemble_p2(mesh: &SimplicialMesh, flow: &DiscreteFlow) -> Result<TransportMatrix> {
    let n = mesh.triangles.len();
    // bounding boxes of the mesh triangles for candidate rejection
    let boxes: Vec<(Vec2, Vec2)> = (0..n)
        .map(|t| {
            let vs = mesh.tri_vertices(t);
            let mut lo = vs[0];
            let mut hi = vs[0];
            for v in &vs[1..] {
                lo.x = lo.x.min(v.x);
                lo.y = lo.y.min(v.y);
                hi.x = hi.x.max(v.x);
                hi.y = hi.y.max(v.y);
            }
            (lo, hi)
        })
        .collect();

    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    for t in 0..n {
        let tri = mesh.triangles[t];
        let image = [
            flow.images[tri[0]],
            flow.images[tri[1]],
            flow.images[tri[2]],
        ];
        let signed = polygon_signed_area(&image);
        if signed <= 1e-14 * mesh.tri_geom(t).area {
            return Err(Error::SingularFlow {
                triangle: t,
                area: signed,
            });
        }
        let mut lo = image[0];
        let mut hi = image[0];
        for v in &image[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        let subject = image.to_vec();
        for (cand, bb) in boxes.iter().enumerate() {
            if bb.0.x > hi.x || bb.1.x < lo.x || bb.0.y > hi.y || bb.1.y < lo.y {
                continue;
            }
            let clip = mesh.tri_vertices(cand).to_vec();
            let overlap = clip_polygon_convex(&subject, &clip);
            let area = polygon_signed_area(&overlap);
            if area.abs() > 1e-16 {
                trips.push((t, cand, area / mesh.tri_geom(cand).area));
            }
        }
    }
    Ok(TransportMatrix {
        degree: Degree::Two,
        direction: flow.direction,
        matrix: CsrMatrix::from_triplets(n, n, &mut trips),
    })
}

/// Assembles the transport matrix of the requested degree.
pub fn assemble_transport(
    mesh: &SimplicialMesh,
    flow: &DiscreteFlow,
    degree: Degree,
) -> Result<TransportMatrix> {
    match degree {
        Degree::Zero => Ok(assemble_p0(mesh, flow)),
        Degree::One => assemble_p1(mesh, flow),
        Degree::Two => assemble_p2(mesh, flow),
    }
}
