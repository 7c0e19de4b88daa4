//! Minimal sparse linear algebra: CSR storage, Jacobi-preconditioned
//! conjugate gradients for SPD systems, and a left-looking sparse LU with
//! partial pivoting for the nonsymmetric ones. Matrix Market coordinate
//! files are supported for external inspection.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; nrows];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for i in 0..nrows {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let a = self.row_ptr[i];
        let b = self.row_ptr[i + 1];
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                trips.push((*c, i, *v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &mut trips)
    }

    /// Sparse matrix product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        let mut acc: Vec<f64> = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (k, v) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(*k);
                for (c, w) in ocols.iter().zip(ovals) {
                    if acc[*c] == 0.0 {
                        touched.push(*c);
                    }
                    acc[*c] += v * w;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    trips.push((i, c, acc[c]));
                }
                acc[c] = 0.0;
            }
            touched.clear();
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, &mut trips)
    }

    /// Linear combination `a*self + b*other` (patterns merged).
    pub fn add_scaled(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut trips: Vec<(usize, usize, f64)> =
            Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c1, v1) = self.row(i);
            for (c, v) in c1.iter().zip(v1) {
                trips.push((i, *c, a * *v));
            }
            let (c2, v2) = other.row(i);
            for (c, v) in c2.iter().zip(v2) {
                trips.push((i, *c, b * *v));
            }
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &mut trips)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Extracts the submatrix with the given (sorted) row and column index sets.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trips = Vec::new();
        for (new_r, &old_r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(old_r);
            for (c, v) in cs.iter().zip(vs) {
                let nc = col_map[*c];
                if nc != usize::MAX {
                    trips.push((new_r, nc, *v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &mut trips)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max absolute entry of `self - other` (patterns may differ).
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.add_scaled(1.0, other, -1.0).max_abs()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[i][*c] = *v;
            }
        }
        d
    }

    /// Checks symmetry on a deterministic sample of entries.
    pub fn is_symmetric_sampled(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let stride = (self.nnz() / 200).max(1);
        let mut k = 0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if k % stride == 0 && (v - self.get(*c, i)).abs() > tol {
                    return false;
                }
                k += 1;
            }
        }
        true
    }

    pub fn write_matrix_market<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(f, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(f, "{} {} {:.17e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<P: AsRef<Path>>(path: P) -> Result<CsrMatrix> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix market file".into()))??;
        let symmetric = header.contains("symmetric");
        if !header.starts_with("%%MatrixMarket matrix coordinate real") {
            return Err(Error::Parse(format!("unsupported header: {header}")));
        }
        let mut dims: Option<(usize, usize, usize)> = None;
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let mut it = t.split_whitespace();
            if dims.is_none() {
                let r = parse_usize(it.next())?;
                let c = parse_usize(it.next())?;
                let n = parse_usize(it.next())?;
                dims = Some((r, c, n));
                trips.reserve(n);
            } else {
                let r = parse_usize(it.next())? - 1;
                let c = parse_usize(it.next())? - 1;
                let v: f64 = it
                    .next()
                    .ok_or_else(|| Error::Parse("missing value".into()))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("{e}")))?;
                trips.push((r, c, v));
                if symmetric && r != c {
                    trips.push((c, r, v));
                }
            }
        }
        let (nr, nc, _) = dims.ok_or_else(|| Error::Parse("missing size line".into()))?;
        Ok(CsrMatrix::from_triplets(nr, nc, &mut trips))
    }
}

fn parse_usize(s: Option<&str>) -> Result<usize> {
    s.ok_or_else(|| Error::Parse("missing field".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("{e}")))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone)]
pub struct CgInfo {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
/// The relative residual `||Ax-b||/||b||` is driven below `tol`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgInfo)> {
    assert_eq!(a.nrows, a.ncols);
    assert_eq!(b.len(), a.nrows);
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("rhs contains non-finite values".into()));
    }
    if !a.is_symmetric_sampled(1e-12 * (1.0 + a.max_abs())) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let n = a.nrows;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], CgInfo { iterations: 0, residual: 0.0 }));
    }
    let mut diag = vec![1.0; n];
    for i in 0..n {
        let d = a.get(i, i);
        if d > 0.0 {
            diag[i] = 1.0 / d;
        }
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NonConvergence {
                residual: norm2(&r) / bnorm,
                iterations: it,
                history,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let res = norm2(&r) / bnorm;
        history.push(res);
        if res <= tol {
            return Ok((x, CgInfo { iterations: it + 1, residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] * diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        residual: *history.last().unwrap_or(&f64::INFINITY),
        iterations: max_iter,
        history,
    })
}

/// Sparse LU factorization with partial pivoting (left-looking,
/// Gilbert-Peierls). Factors are stored column-wise.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// row permutation: `perm[k]` = original row index pivotal at stage k
    perm: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>, // strictly lower part, rows in permuted numbering
    u_cols: Vec<Vec<(usize, f64)>>, // upper part including diagonal
}

impl LuFactors {
    pub fn factor(a: &CsrMatrix) -> Result<LuFactors> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        // CSC view of A
        let at = a.transpose(); // rows of `at` are columns of A
        let mut pinv = vec![usize::MAX; n]; // original row -> pivot stage
        let mut perm = vec![usize::MAX; n];
        let mut l_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut u_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut x = vec![0.0f64; n]; // dense work vector indexed by original row
        let mut mark = vec![usize::MAX; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut order: Vec<usize> = Vec::new(); // topological order of pivotal rows reached
        let scale = a.max_abs();

        for j in 0..n {
            // symbolic: rows reachable from the pattern of A[:,j] through L
            let (acols, avals) = at.row(j);
            order.clear();
            for &r0 in acols {
                if mark[r0] == j {
                    continue;
                }
                // DFS from r0 over pivotal rows
                stack.clear();
                stack.push((r0, 0));
                mark[r0] = j;
                loop {
                    let Some(&(r, k)) = stack.last() else { break };
                    let stage = pinv[r];
                    if stage == usize::MAX {
                        // non-pivotal row: leaf
                        order.push(r);
                        stack.pop();
                        continue;
                    }
                    if k < l_cols[stage].len() {
                        stack.last_mut().unwrap().1 = k + 1;
                        let (rn, _) = l_cols[stage][k];
                        if mark[rn] != j {
                            mark[rn] = j;
                            stack.push((rn, 0));
                        }
                    } else {
                        order.push(r);
                        stack.pop();
                    }
                }
            }
            // numeric: x = A[:,j]; eliminate in reverse topological order
            for (&r, &v) in acols.iter().zip(avals) {
                x[r] = v;
            }
            for idx in (0..order.len()).rev() {
                let r = order[idx];
                let stage = pinv[r];
                if stage == usize::MAX {
                    continue;
                }
                let xr = x[r];
                if xr != 0.0 {
                    for &(rn, lv) in &l_cols[stage] {
                        x[rn] -= lv * xr;
                    }
                }
            }
            // pivot: largest magnitude among non-pivotal rows in the pattern
            let mut piv_row = usize::MAX;
            let mut piv_val = 0.0f64;
            for &r in &order {
                if pinv[r] == usize::MAX && x[r].abs() > piv_val.abs() {
                    piv_val = x[r];
                    piv_row = r;
                }
            }
            if piv_row == usize::MAX || piv_val.abs() <= 1e-300 * (1.0 + scale) {
                return Err(Error::SingularMatrix { pivot: j });
            }
            perm[j] = piv_row;
            pinv[piv_row] = j;
            // split into U (pivotal rows) and L (non-pivotal), clear work vector
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            for &r in &order {
                let v = x[r];
                x[r] = 0.0;
                if v == 0.0 {
                    continue;
                }
                let stage = pinv[r];
                if r == piv_row {
                    continue;
                } else if stage != usize::MAX {
                    ucol.push((stage, v));
                } else {
                    lcol.push((r, v / piv_val));
                }
            }
            ucol.push((j, piv_val));
            ucol.sort_unstable_by_key(|e| e.0);
            l_cols.push(lcol);
            u_cols.push(ucol);
        }
        Ok(LuFactors { n, perm, l_cols, u_cols })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        // forward solve L y = b (unit diagonal), y indexed by stage;
        // L columns store original row indices
        let mut work = b.to_vec(); // indexed by original row
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let yj = work[self.perm[j]];
            y[j] = yj;
            if yj != 0.0 {
                for &(r, lv) in &self.l_cols[j] {
                    work[r] -= lv * yj;
                }
            }
        }
        // backward solve U x = y
        let mut x = y;
        for j in (0..self.n).rev() {
            let ucol = &self.u_cols[j];
            let &(dstage, dval) = ucol.last().unwrap();
            debug_assert_eq!(dstage, j);
            let xj = x[j] / dval;
            x[j] = xj;
            if xj != 0.0 {
                for &(stage, uv) in &ucol[..ucol.len() - 1] {
                    x[stage] -= uv * xj;
                }
            }
        }
        x
    }
}

/// Direct solve of a general sparse system; the residual is verified to
/// `1e-10` relative.
pub fn solve_general(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = LuFactors::factor(a)?;
    let x = lu.solve(b);
    let r: Vec<f64> = a
        .matvec(&x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| ax - bi)
        .collect();
    let bnorm = norm2(b).max(1e-300);
    let rel = norm2(&r) / bnorm;
    if rel > 1e-10 {
        return Err(Error::SolveResidual { residual: rel, tol: 1e-10 });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= a[i][j] * x[j];
            }
            x[i] = s / a[i][i];
        }
        x
    }

    #[test]
    fn from_triplets_sums_duplicates() {
        let mut t = vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0), (0, 1, -1.0)];
        let m = CsrMatrix::from_triplets(2, 2, &mut t);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 1), 5.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn cg_identity_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let (x, info) = solve_spd(&a, &b, 1e-12, 10).unwrap();
        assert!(info.iterations <= 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_tridiagonal_matches_dense() {
        let n = 16;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &mut t);
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let (x, _) = solve_spd(&a, &b, 1e-12, 200).unwrap();
        let xd = dense_solve(a.to_dense(), b.clone());
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9, "{i}: {} vs {}", x[i], xd[i]);
        }
    }

    #[test]
    fn cg_iteration_bound_on_mass_matrix() {
        // diagonal preconditioning keeps CG within 10 sqrt(N) iterations on
        // the well-conditioned pairing matrices; a miss flags a bug
        let mesh = crate::mesh::SimplicialMesh::structured(12).unwrap();
        let m = crate::whitney::assemble_mass(&mesh, crate::mesh::Degree::One, &|_| 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b: Vec<f64> = (0..m.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cap = 10 * (m.nrows as f64).sqrt() as usize;
        let (_, info) = solve_spd(&m, &b, 1e-10, cap).unwrap();
        assert!(info.iterations <= cap);
        assert!(info.residual <= 1e-10);
    }

    #[test]
    fn cg_reports_non_convergence_with_history() {
        let n = 16;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &mut t);
        let b = vec![1.0; n];
        match solve_spd(&a, &b, 1e-14, 2) {
            Err(Error::NonConvergence { history, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn lu_permutation_matrix() {
        // permutation: x = P^T b exactly
        let mut t = vec![(0, 2, 1.0), (1, 0, 1.0), (2, 1, 1.0)];
        let a = CsrMatrix::from_triplets(3, 3, &mut t);
        let x = solve_general(&a, &[5.0, 7.0, 9.0]).unwrap();
        assert_eq!(x, vec![7.0, 9.0, 5.0]);
    }

    #[test]
    fn lu_random_diagonally_dominant_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            let mut rowsum = 0.0;
            for _ in 0..5 {
                let j = rng.gen_range(0..n);
                let v: f64 = rng.gen_range(-1.0..1.0);
                t.push((i, j, v));
                rowsum += v.abs();
            }
            t.push((i, i, rowsum + 1.0));
        }
        let a = CsrMatrix::from_triplets(n, n, &mut t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_general(&a, &b).unwrap();
        let xd = dense_solve(a.to_dense(), b.clone());
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn lu_zero_row_is_singular() {
        let mut t = vec![(0, 0, 1.0), (2, 2, 1.0), (2, 0, 0.5)];
        let a = CsrMatrix::from_triplets(3, 3, &mut t);
        match LuFactors::factor(&a) {
            Err(Error::SingularMatrix { .. }) => {}
            other => panic!("expected singular matrix error, got {other:?}"),
        }
    }

    #[test]
    fn spmv_transpose_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nr, nc) = (23, 17);
        let mut t = Vec::new();
        for _ in 0..120 {
            t.push((rng.gen_range(0..nr), rng.gen_range(0..nc), rng.gen_range(-1.0..1.0)));
        }
        let a = CsrMatrix::from_triplets(nr, nc, &mut t);
        let x: Vec<f64> = (0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..nr).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // <Ax, y> == <x, A^T y>
        let lhs = dot(&a.matvec(&x), &y);
        let rhs = dot(&x, &a.matvec_transpose(&y));
        assert!((lhs - rhs).abs() < 1e-13 * (1.0 + lhs.abs()));
        // transpose() agrees with matvec_transpose
        let yt = a.transpose().matvec(&y);
        for (u, v) in yt.iter().zip(a.matvec_transpose(&y)) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn matmul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for _ in 0..60 {
            t1.push((rng.gen_range(0..10), rng.gen_range(0..12), rng.gen_range(-1.0..1.0)));
            t2.push((rng.gen_range(0..12), rng.gen_range(0..8), rng.gen_range(-1.0..1.0)));
        }
        let a = CsrMatrix::from_triplets(10, 12, &mut t1);
        let b = CsrMatrix::from_triplets(12, 8, &mut t2);
        let c = a.matmul(&b);
        let (ad, bd) = (a.to_dense(), b.to_dense());
        for i in 0..10 {
            for j in 0..8 {
                let mut s = 0.0;
                for k in 0..12 {
                    s += ad[i][k] * bd[k][j];
                }
                assert!((c.get(i, j) - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn matrix_market_roundtrip() {
        let mut t = vec![(0, 0, 1.5), (1, 2, -2.25), (3, 1, 0.125)];
        let a = CsrMatrix::from_triplets(4, 3, &mut t);
        let dir = std::env::temp_dir().join("formflow_mm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.mtx");
        a.write_matrix_market(&path).unwrap();
        let b = CsrMatrix::read_matrix_market(&path).unwrap();
        assert_eq!(a, b);
    }
}
