// exhaustive search for the order-of-limits counterexample configuration:
// a cochain supported on one edge, the quotient evaluated on an adjacent
// edge, constant velocity; looking for limit = (1-sqrt2)/sqrt2 * grad(l1).beta
use formflow::geom::Vec2;
use formflow::flow::VelocityField;
use formflow::lie_operators::{extrapolate_three, oracle_upwind_cochain};
use formflow::mesh::{Degree, SimplicialMesh};
use formflow::whitney::Cochain;

fn main() {
    let m = SimplicialMesh::structured(2).unwrap();
    let vc = 4usize; // center vertex (0,0)
    let edges_at: Vec<usize> = (0..m.edges.len())
        .filter(|&e| m.edges[e].contains(&vc))
        .collect();
    let target = (1.0 - 2.0f64.sqrt()) / 2.0f64.sqrt();
    let dirs: Vec<Vec2> = (0..16)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / 8.0 + 0.0;
            Vec2::new(a.cos(), a.sin())
        })
        .collect();
    for &e1 in &edges_at {
        for &e2 in &edges_at {
            if e1 == e2 {
                continue;
            }
            let mut w = Cochain::zeros(&m, Degree::One);
            w.values[e1] = 1.0;
            for (di, &d) in dirs.iter().enumerate() {
                let c = 0.31;
                let beta = VelocityField::steady(move |_| d * c)
                    .with_jacobian(|_, _| formflow::geom::Mat2::zero());
                let quots: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
                    .iter()
                    .map(|&dt| oracle_upwind_cochain(&m, Degree::One, &beta, &w, 0.0, dt).unwrap()[e2])
                    .collect();
                let lim = extrapolate_three([quots[0], quots[1], quots[2]]);
                if lim.abs() < 1e-9 {
                    continue;
                }
                // candidate reference values: grad of the hat of either endpoint
                // of e1 in each triangle adjacent to e1
                let [a, b] = m.edges[e1];
                let s1 = if a == vc { b } else { a }; // the outer vertex s1
                let (t0, t1) = m.edge_tris[e1];
                for t in [Some(t0), t1].into_iter().flatten() {
                    if let Some(k) = m.triangles[t].iter().position(|&v| v == s1) {
                        let g = m.tri_geom(t).grads[k];
                        let reference = target * g.dot(d * c);
                        if reference.abs() > 1e-12 && (lim / reference - 1.0).abs() < 5e-3 {
                            println!(
                                "MATCH e1={e1} {:?} e2={e2} {:?} dir#{di}=({:.3},{:.3}) tri={t} lim={lim:.8} ref={reference:.8}",
                                m.edges[e1], m.edges[e2], d.x, d.y
                            );
                        }
                    }
                }
            }
        }
    }
    println!("sweep done");
}
