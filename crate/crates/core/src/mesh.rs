//! Oriented 2D simplicial complex: subsimplex enumeration, signed incidence
//! matrices, barycentric coordinates, walking point location and boundary
//! classification.
//!
//! Orientation conventions are global and fixed: edges run from the lower
//! vertex index to the higher one, triangles are counterclockwise. All
//! incidence signs derive from these two rules, which keeps transport-matrix
//! entries reproducible.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::linalg::CsrMatrix;
use std::io::Write;
use std::path::Path;

/// Barycentric slack used for containment tests and tie-breaking.
pub const TOL_GEOM: f64 = 1e-12;

/// Form degree on a 2D complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    Zero,
    One,
    Two,
}

impl Degree {
    pub fn as_usize(self) -> usize {
        match self {
            Degree::Zero => 0,
            Degree::One => 1,
            Degree::Two => 2,
        }
    }

    pub fn from_usize(l: usize) -> Result<Degree> {
        match l {
            0 => Ok(Degree::Zero),
            1 => Ok(Degree::One),
            2 => Ok(Degree::Two),
            _ => Err(Error::InvalidArgument(format!("degree {l} out of range"))),
        }
    }
}

/// Per-triangle geometry cache: barycentric gradients and area.
#[derive(Debug, Clone)]
pub struct TriGeom {
    /// gradient of each barycentric coordinate function
    pub grads: [Vec2; 3],
    /// positive (counterclockwise) area
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub vertices: Vec<Vec2>,
    /// each edge as (low, high) vertex indices; orientation low -> high
    pub edges: Vec<[usize; 2]>,
    /// counterclockwise vertex triples
    pub triangles: Vec<[usize; 3]>,
    /// per triangle: its three edges in local order (v0v1, v1v2, v2v0),
    /// with +1 when the local traversal agrees with the global orientation
    pub tri_edges: Vec<[(usize, f64); 3]>,
    /// neighbor across local edge k, if any
    pub tri_neighbors: Vec<[Option<usize>; 3]>,
    /// triangles incident to each vertex (sorted)
    pub vertex_tris: Vec<Vec<usize>>,
    /// one or two incident triangles per edge (lower index first)
    pub edge_tris: Vec<(usize, Option<usize>)>,
    pub vertex_on_boundary: Vec<bool>,
    pub edge_on_boundary: Vec<bool>,
    pub triangle_on_boundary: Vec<bool>,
    d0: CsrMatrix,
    d1: CsrMatrix,
    tri_geom: Vec<TriGeom>,
    /// axis-aligned bounding box of the domain (used for clamping)
    pub bbox: (Vec2, Vec2),
    /// mesh size: maximum edge length
    pub h_max: f64,
}

impl SimplicialMesh {
    /// Uniform right-triangle mesh of `[-1,1]^2` with `n` subdivisions per
    /// side. Each grid cell is split along its lower-left to upper-right
    /// diagonal.
    pub fn structured(n: usize) -> Result<SimplicialMesh> {
        if n == 0 {
            return Err(Error::InvalidArgument("subdivision count must be >= 1".into()));
        }
        let np = n + 1;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push(Vec2::new(
                    -1.0 + 2.0 * i as f64 / n as f64,
                    -1.0 + 2.0 * j as f64 / n as f64,
                ));
            }
        }
        let vid = |i: usize, j: usize| j * np + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                // lower: (i,j) (i+1,j) (i+1,j+1); upper: (i,j) (i+1,j+1) (i,j+1)
                triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        SimplicialMesh::from_raw(vertices, triangles)
    }

    /// Builds the complex from raw vertices and counterclockwise triangles,
    /// deriving edges, incidence and adjacency. Intended for tests and small
    /// hand-made configurations; `structured` is the production constructor.
    pub fn from_raw(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<SimplicialMesh> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidArgument(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
            let [a, b, c] = *tri;
            let area = 0.5 * (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
            if area <= 0.0 {
                return Err(Error::Geometry(format!(
                    "triangle {t} is not counterclockwise (signed area {area:.3e})"
                )));
            }
        }
        // enumerate edges: unique sorted pairs, lexicographic ids
        let mut pairs: Vec<[usize; 2]> = Vec::with_capacity(triangles.len() * 3);
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                pairs.push([a.min(b), a.max(b)]);
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edges = pairs;
        let edge_id = |a: usize, b: usize| -> usize {
            let key = [a.min(b), a.max(b)];
            edges.binary_search(&key).expect("edge must exist")
        };

        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut edge_tri_list: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [(0usize, 0.0f64); 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_id(a, b);
                te[k] = (e, if a < b { 1.0 } else { -1.0 });
                edge_tri_list[e].push(t);
            }
            tri_edges.push(te);
        }
        let mut edge_tris = Vec::with_capacity(edges.len());
        let mut edge_on_boundary = vec![false; edges.len()];
        for (e, list) in edge_tri_list.iter_mut().enumerate() {
            list.sort_unstable();
            match list.len() {
                1 => {
                    edge_on_boundary[e] = true;
                    edge_tris.push((list[0], None));
                }
                2 => edge_tris.push((list[0], Some(list[1]))),
                k => {
                    return Err(Error::Geometry(format!(
                        "edge {e} has {k} incident triangles"
                    )))
                }
            }
        }
        let mut tri_neighbors = vec![[None; 3]; triangles.len()];
        for (t, te) in tri_edges.iter().enumerate() {
            for k in 0..3 {
                let (e, _) = te[k];
                let (t0, t1) = edge_tris[e];
                tri_neighbors[t][k] = if t0 == t { t1 } else { Some(t0) };
            }
        }
        let mut vertex_tris = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        for list in &mut vertex_tris {
            list.sort_unstable();
        }
        let mut vertex_on_boundary = vec![false; nv];
        for (e, &[a, b]) in edges.iter().enumerate() {
            if edge_on_boundary[e] {
                vertex_on_boundary[a] = true;
                vertex_on_boundary[b] = true;
            }
        }
        let triangle_on_boundary: Vec<bool> = tri_edges
            .iter()
            .map(|te| te.iter().any(|&(e, _)| edge_on_boundary[e]))
            .collect();

        // incidence matrices
        let mut t0 = Vec::with_capacity(edges.len() * 2);
        for (e, &[a, b]) in edges.iter().enumerate() {
            t0.push((e, a, -1.0));
            t0.push((e, b, 1.0));
        }
        let d0 = CsrMatrix::from_triplets(edges.len(), nv, &mut t0);
        let mut t1 = Vec::with_capacity(triangles.len() * 3);
        for (t, te) in tri_edges.iter().enumerate() {
            for &(e, s) in te {
                t1.push((t, e, s));
            }
        }
        let d1 = CsrMatrix::from_triplets(triangles.len(), edges.len(), &mut t1);

        let tri_geom: Vec<TriGeom> = triangles
            .iter()
            .map(|&[a, b, c]| {
                let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
                let twice_area = (pb - pa).cross(pc - pa);
                let area = 0.5 * twice_area;
                // grad lambda_a is the inward normal of edge (b,c) scaled by 1/(2A)
                let g = |p: Vec2, q: Vec2| (q - p).rot90() * (1.0 / twice_area);
                TriGeom {
                    grads: [g(pb, pc), g(pc, pa), g(pa, pb)],
                    area,
                }
            })
            .collect();

        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        let h_max = edges
            .iter()
            .map(|&[a, b]| (vertices[b] - vertices[a]).norm())
            .fold(0.0_f64, f64::max);

        Ok(SimplicialMesh {
            vertices,
            edges,
            triangles,
            tri_edges,
            tri_neighbors,
            vertex_tris,
            edge_tris,
            vertex_on_boundary,
            edge_on_boundary,
            triangle_on_boundary,
            d0,
            d1,
            tri_geom,
            bbox: (lo, hi),
            h_max,
        })
    }

    pub fn n_simplices(&self, l: Degree) -> usize {
        match l {
            Degree::Zero => self.vertices.len(),
            Degree::One => self.edges.len(),
            Degree::Two => self.triangles.len(),
        }
    }

    /// Signed incidence matrix realizing the exterior derivative on cochains
    /// of the given degree (`d0` for 0 -> 1, `d1` for 1 -> 2).
    pub fn incidence_matrix(&self, l: Degree) -> Result<&CsrMatrix> {
        match l {
            Degree::Zero => Ok(&self.d0),
            Degree::One => Ok(&self.d1),
            Degree::Two => Err(Error::InvalidArgument(
                "no exterior derivative above top degree".into(),
            )),
        }
    }

    pub fn tri_geom(&self, t: usize) -> &TriGeom {
        &self.tri_geom[t]
    }

    pub fn tri_vertices(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn barycentric(&self, t: usize, x: Vec2) -> [f64; 3] {
        let g = &self.tri_geom[t];
        if g.area <= 0.0 {
            // from_raw rejects these; guard against degenerate hand inputs
            return [f64::NAN; 3];
        }
        let [a, _, _] = self.triangles[t];
        let pa = self.vertices[a];
        let l1 = g.grads[1].dot(x - pa);
        let l2 = g.grads[2].dot(x - pa);
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn point_from_barycentric(&self, t: usize, l: [f64; 3]) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        self.vertices[a] * l[0] + self.vertices[b] * l[1] + self.vertices[c] * l[2]
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) * (1.0 / 3.0)
    }

    pub fn edge_vector(&self, e: usize) -> Vec2 {
        let [a, b] = self.edges[e];
        self.vertices[b] - self.vertices[a]
    }

    pub fn edge_midpoint(&self, e: usize) -> Vec2 {
        let [a, b] = self.edges[e];
        (self.vertices[a] + self.vertices[b]) * 0.5
    }

    fn contains(&self, t: usize, x: Vec2) -> Option<[f64; 3]> {
        let l = self.barycentric(t, x);
        if l.iter().all(|&li| li >= -TOL_GEOM) {
            Some(l)
        } else {
            None
        }
    }

    /// Locates the triangle containing `x` by walking from `hint`.
    ///
    /// Points within `TOL_GEOM` of a shared subsimplex are assigned to the
    /// lowest incident triangle index, which makes tracing deterministic.
    /// Falls back to an exhaustive scan when the walk stalls.
    pub fn locate_point(&self, x: Vec2, hint: usize) -> Result<(usize, [f64; 3])> {
        let nt = self.triangles.len();
        let mut cur = hint.min(nt - 1);
        let mut steps = 0usize;
        loop {
            let l = self.barycentric(cur, x);
            let (kmin, lmin) = l
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, &v)| (k, v))
                .unwrap();
            if lmin >= -TOL_GEOM {
                return Ok(self.tie_break(cur, x, l));
            }
            // step across the local edge opposite to the most negative coordinate:
            // local edge (k+1, k+2) is opposite vertex k, i.e. local edge index k+1
            let local_edge = (kmin + 1) % 3;
            match self.tri_neighbors[cur][local_edge] {
                Some(next) if steps <= nt => {
                    cur = next;
                    steps += 1;
                }
                _ => break,
            }
        }
        // exhaustive fallback: lowest containing index
        for t in 0..nt {
            if let Some(l) = self.contains(t, x) {
                return Ok(self.tie_break(t, x, l));
            }
        }
        Err(Error::LocationFailure { x: x.x, y: x.y })
    }

    /// Among `t` and its neighbors across near-zero barycentric edges, picks
    /// the lowest triangle index that contains `x`.
    fn tie_break(&self, t: usize, x: Vec2, l: [f64; 3]) -> (usize, [f64; 3]) {
        let mut best = t;
        let mut best_l = l;
        for k in 0..3 {
            if l[k].abs() <= TOL_GEOM {
                // near the local edge opposite vertex k
                if let Some(nb) = self.tri_neighbors[t][(k + 1) % 3] {
                    if nb < best {
                        if let Some(nl) = self.contains(nb, x) {
                            best = nb;
                            best_l = nl;
                        }
                    }
                }
            }
        }
        // near-vertex hits: check all incident triangles of the closest vertex
        if l.iter().filter(|v| v.abs() <= TOL_GEOM).count() >= 2 {
            let k = l
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let v = self.triangles[t][k];
            for &tv in &self.vertex_tris[v] {
                if tv < best {
                    if let Some(nl) = self.contains(tv, x) {
                        best = tv;
                        best_l = nl;
                    }
                }
            }
        }
        (best, best_l)
    }

    /// Projects a point onto the closed domain box.
    pub fn clamp_to_domain(&self, x: Vec2) -> Vec2 {
        Vec2::new(
            x.x.clamp(self.bbox.0.x, self.bbox.1.x),
            x.y.clamp(self.bbox.0.y, self.bbox.1.y),
        )
    }

    pub fn total_area(&self) -> f64 {
        self.tri_geom.iter().map(|g| g.area).sum()
    }

    /// Outward unit normal of a boundary-oriented edge as seen from
    /// triangle `t` (the edge need not be on the domain boundary).
    pub fn edge_normal_from(&self, t: usize, local_edge: usize) -> Vec2 {
        let tri = self.triangles[t];
        let a = self.vertices[tri[local_edge]];
        let b = self.vertices[tri[(local_edge + 1) % 3]];
        // CCW traversal keeps the interior on the left; outward is -rot90
        ((b - a).rot90() * -1.0).normalized()
    }

    /// Legacy ASCII VTK dump of the triangulation.
    pub fn write_vtk<P: AsRef<Path>>(&self, path: P, title: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# vtk DataFile Version 3.0")?;
        writeln!(f, "{title}")?;
        writeln!(f, "ASCII")?;
        writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(f, "POINTS {} double", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(f, "{} {} 0.0", v.x, v.y)?;
        }
        writeln!(f, "CELLS {} {}", self.triangles.len(), 4 * self.triangles.len())?;
        for t in &self.triangles {
            writeln!(f, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(f, "CELL_TYPES {}", self.triangles.len())?;
        for _ in &self.triangles {
            writeln!(f, "5")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn structured_counts() {
        let m = SimplicialMesh::structured(1).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 2);
        assert_eq!(m.edges.len(), 5);

        let m = SimplicialMesh::structured(2).unwrap();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.edges.len(), 16);
        // Euler formula for a disk: V - E + F = 1
        assert_eq!(9 + 8, 16 + 1);

        for n in [1usize, 3, 7] {
            let m = SimplicialMesh::structured(n).unwrap();
            assert_eq!(m.vertices.len(), (n + 1) * (n + 1));
            assert_eq!(m.triangles.len(), 2 * n * n);
            assert_eq!(m.edges.len(), 3 * n * n + 2 * n);
            let h = 2.0 * 2.0f64.sqrt() / n as f64;
            assert!((m.h_max - h).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(SimplicialMesh::structured(0).is_err());
    }

    #[test]
    fn incidence_composition_vanishes() {
        for n in [1usize, 2, 5] {
            let m = SimplicialMesh::structured(n).unwrap();
            let d0 = m.incidence_matrix(Degree::Zero).unwrap();
            let d1 = m.incidence_matrix(Degree::One).unwrap();
            let prod = d1.matmul(d0);
            assert_eq!(prod.max_abs(), 0.0, "d1*d0 must vanish exactly");
        }
        let m = SimplicialMesh::structured(2).unwrap();
        assert!(m.incidence_matrix(Degree::Two).is_err());
    }

    #[test]
    fn incidence_shapes_and_pattern() {
        let m = SimplicialMesh::structured(1).unwrap();
        let d0 = m.incidence_matrix(Degree::Zero).unwrap();
        assert_eq!((d0.nrows, d0.ncols), (5, 4));
        for e in 0..5 {
            let (_, vals) = d0.row(e);
            let mut sorted = vals.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(sorted, vec![-1.0, 1.0]);
        }
        let d1 = m.incidence_matrix(Degree::One).unwrap();
        assert_eq!((d1.nrows, d1.ncols), (2, 5));
        for t in 0..2 {
            let (cols, vals) = d1.row(t);
            assert_eq!(cols.len(), 3);
            assert!(vals.iter().all(|v| v.abs() == 1.0));
        }
    }

    #[test]
    fn boundary_classification() {
        let m = SimplicialMesh::structured(2).unwrap();
        let nb = m.edge_on_boundary.iter().filter(|&&b| b).count();
        assert_eq!(nb, 8); // 2 per side
        // boundary edges each have exactly one incident triangle
        for (e, &b) in m.edge_on_boundary.iter().enumerate() {
            let (_, second) = m.edge_tris[e];
            assert_eq!(b, second.is_none());
        }
        // only the center vertex of the 3x3 grid is interior
        let interior: Vec<usize> = (0..9).filter(|&v| !m.vertex_on_boundary[v]).collect();
        assert_eq!(interior, vec![4]);
    }

    #[test]
    fn total_area_is_four() {
        for n in [1usize, 4, 9] {
            let m = SimplicialMesh::structured(n).unwrap();
            assert!((m.total_area() - 4.0).abs() < 1e-12 * 4.0);
        }
    }

    #[test]
    fn barycentric_identities() {
        let m = SimplicialMesh::structured(3).unwrap();
        // Lagrange property at vertices
        let t = 5;
        for (k, &v) in m.triangles[t].iter().enumerate() {
            let l = m.barycentric(t, m.vertices[v]);
            for j in 0..3 {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((l[j] - expect).abs() < 1e-14);
            }
        }
        // centroid
        let l = m.barycentric(t, m.centroid(t));
        for li in l {
            assert!((li - 1.0 / 3.0).abs() < 1e-14);
        }
        // partition of unity on random points
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let t = rng.gen_range(0..m.triangles.len());
            let l = m.barycentric(t, x);
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_triangle_midpoint() {
        let verts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let m = SimplicialMesh::from_raw(verts, vec![[0, 1, 2]]).unwrap();
        let l = m.barycentric(0, Vec2::new(0.5, 0.5));
        assert!((l[0] - 0.0).abs() < 1e-15);
        assert!((l[1] - 0.5).abs() < 1e-15);
        assert!((l[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn locate_centroids_with_own_hint() {
        let m = SimplicialMesh::structured(4).unwrap();
        for t in 0..m.triangles.len() {
            let (found, l) = m.locate_point(m.centroid(t), t).unwrap();
            assert_eq!(found, t);
            assert!(l.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn locate_shared_edge_prefers_lower_index() {
        let m = SimplicialMesh::structured(2).unwrap();
        for e in 0..m.edges.len() {
            if let (t0, Some(t1)) = m.edge_tris[e] {
                let x = m.edge_midpoint(e);
                let (found, _) = m.locate_point(x, t1).unwrap();
                assert_eq!(found, t0.min(t1), "edge {e}");
            }
        }
    }

    #[test]
    fn locate_agrees_with_exhaustive_scan() {
        let m = SimplicialMesh::structured(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let x = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            // adversarial hint: far corner triangle
            let hint = m.triangles.len() - 1;
            let (t, l) = m.locate_point(x, hint).unwrap();
            assert!(l.iter().all(|&v| v >= -TOL_GEOM));
            // brute force: lowest containing index
            let brute = (0..m.triangles.len())
                .find(|&tt| m.barycentric(tt, x).iter().all(|&v| v >= -TOL_GEOM))
                .unwrap();
            assert_eq!(t, brute);
        }
    }

    #[test]
    fn locate_outside_domain_fails() {
        let m = SimplicialMesh::structured(2).unwrap();
        assert!(matches!(
            m.locate_point(Vec2::new(3.0, 0.0), 0),
            Err(Error::LocationFailure { .. })
        ));
    }

    #[test]
    fn vtk_dump_writes_file() {
        let m = SimplicialMesh::structured(2).unwrap();
        let dir = std::env::temp_dir().join("formflow_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("mesh.vtk");
        m.write_vtk(&p, "mesh").unwrap();
        let body = std::fs::read_to_string(&p).unwrap();
        assert!(body.contains("POINTS 9 double"));
        assert!(body.contains("CELL_TYPES 8"));
    }
}
