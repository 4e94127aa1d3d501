//! Discrete Neumann Laplacian on cell-centered lattices and a shift-invert
//! Lanczos solver for its smallest eigenpairs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Grid;
use crate::error::{Error, Result};

/// Symmetric sparse matrix in row-list form.
#[derive(Debug, Clone)]
pub struct SparseSym {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        SparseSym { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, a) in r {
                m[(i, j)] += a;
            }
        }
        m
    }

    /// Number of connected components of the off-diagonal sparsity graph.
    pub fn components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for &(j, a) in &self.rows[i] {
                    if j != i && a != 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}

/// 5-point (3-point in 1-D) Neumann Laplacian. A missing neighbor is a ghost
/// cell mirroring the current cell, so its flux term vanishes.
pub fn fd_neumann_matrix(grid: &Grid) -> SparseSym {
    let [hx, hy] = grid.spacing();
    let mut rows = Vec::with_capacity(grid.len());
    for c in grid.cells() {
        let (ix, iy) = (c[0] as isize, c[1] as isize);
        let mut row = Vec::with_capacity(5);
        let mut diag = 0.0;
        let mut neighbors = vec![(ix - 1, iy, hx), (ix + 1, iy, hx)];
        if grid.dim() == 2 {
            neighbors.push((ix, iy - 1, hy));
            neighbors.push((ix, iy + 1, hy));
        }
        for (jx, jy, h) in neighbors {
            if let Some(j) = grid.cell_at(jx, jy) {
                let a = 1.0 / (h * h);
                row.push((j, -a));
                diag += a;
            }
        }
        let i = grid.cell_at(ix, iy).expect("cell is on its own grid");
        row.push((i, diag));
        row.sort_by_key(|&(j, _)| j);
        rows.push(row);
    }
    SparseSym { rows }
}

/// Lower-triangular banded Cholesky factor of `A + shift I`.
struct BandCholesky {
    n: usize,
    b: usize,
    // l[i * (b + 1) + d] = L(i, i - d)
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(a: &SparseSym, shift: f64) -> Result<Self> {
        let n = a.n();
        let b = a.bandwidth();
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for (i, row) in a.rows.iter().enumerate() {
            for &(j, v) in row {
                if j <= i {
                    l[i * w + (i - j)] += v;
                }
            }
            l[i * w] += shift;
        }
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = l[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Eigensolver("shifted matrix is not positive definite".into()));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandCholesky { n, b, l })
    }

    fn solve(&self, x: &mut [f64]) {
        let w = self.b + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.b).min(self.n - 1);
            let mut s = x[i];
            for k in (i + 1)..=hi {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two classical Gram-Schmidt sweeps.
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            axpy(-c, q, v);
        }
    }
}

struct Ritz {
    theta: f64,
    vector: Vec<f64>,
    residual: f64,
}

fn lanczos_pass(
    chol: &BandCholesky,
    locked: &[Vec<f64>],
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Ritz> {
    let n = chol.n;
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, locked);
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut q: Vec<Vec<f64>> = vec![v];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut last_beta = 0.0;
    for step in 0..m {
        let mut w = q[step].clone();
        chol.solve(&mut w);
        let a = dot(&w, &q[step]);
        alpha.push(a);
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &q);
        let b = dot(&w, &w).sqrt();
        last_beta = b;
        if step + 1 == m || b <= 1e-13 * alpha.iter().fold(0.0_f64, |s, x| s.max(x.abs())) {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        q.push(w);
    }
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    (0..k)
        .map(|c| {
            let y = eig.eigenvectors.column(c);
            let mut x = vec![0.0; n];
            for (i, qi) in q.iter().enumerate().take(k) {
                axpy(y[i], qi, &mut x);
            }
            let nx = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            Ritz { theta: eig.eigenvalues[c], vector: x, residual: (last_beta * y[k - 1]).abs() }
        })
        .collect()
}

/// The `k` smallest eigenpairs of a symmetric positive semidefinite sparse
/// matrix. Vectors are Euclidean-orthonormal; eigenvalues are Rayleigh
/// quotients and come back sorted ascending.
pub(crate) fn smallest_eigenpairs(a: &SparseSym, k: usize, seed: u64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::ModesBeyondResolution(format!("requested {k} modes from a matrix of size {n}")));
    }
    let shift = 1.0;
    let chol = BandCholesky::factor(a, shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-11 / shift;

    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut verify_m = 40;
    for _pass in 0..64 {
        let free = n - locked.len();
        if free == 0 {
            break;
        }
        let need = k.saturating_sub(locked.len());
        let m = if need > 0 { (2 * need + 30).max(40) } else { verify_m }.min(free);
        let ritz = lanczos_pass(&chol, &locked, m, &mut rng);
        let top = ritz.iter().fold(f64::NEG_INFINITY, |s, r| s.max(r.theta));

        if need == 0 {
            // Verification pass: anything below the current k-th value that we
            // missed (typically a degenerate partner) must show up here.
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let kth = sorted[k - 1];
            let best = ritz.iter().max_by(|x, y| x.theta.total_cmp(&y.theta)).expect("nonempty pass");
            if best.residual > tol * best.theta.max(1e-300) * 1e3 && m < free {
                verify_m = (2 * verify_m).min(free);
                continue;
            }
            let lam = 1.0 / best.theta - shift;
            if lam > kth * (1.0 + 1e-9) + 1e-12 {
                break;
            }
        }
        let mut added = 0;
        for r in ritz {
            if r.residual <= tol * top.max(1e-300) || m == free {
                let mut ax = vec![0.0; n];
                a.matvec(&r.vector, &mut ax);
                values.push(dot(&ax, &r.vector).max(0.0));
                locked.push(r.vector);
                added += 1;
            }
        }
        if added == 0 && need > 0 {
            return Err(Error::Eigensolver("Lanczos pass produced no converged Ritz pair".into()));
        }
    }
    if locked.len() < k {
        return Err(Error::Eigensolver(format!("only {} of {k} eigenpairs converged", locked.len())));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    order.truncate(k);
    let vals = order.iter().map(|&i| values[i]).collect();
    let vecs = order.iter().map(|&i| locked[i].clone()).collect();
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;

    #[test]
    fn neumann_matrix_kills_constants_and_is_symmetric() {
        let g = Grid::polygon(&Domain::lshape(), 0.25).unwrap();
        let a = fd_neumann_matrix(&g);
        let ones = vec![1.0; a.n()];
        let mut y = vec![0.0; a.n()];
        a.matvec(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        let d = a.to_dense();
        assert!((&d - d.transpose()).amax() < 1e-14);
        assert_eq!(a.components(), 1);
    }

    #[test]
    fn band_cholesky_solves() {
        let g = Grid::polygon(&Domain::lshape(), 0.25).unwrap();
        let a = fd_neumann_matrix(&g);
        let chol = BandCholesky::factor(&a, 1.0).unwrap();
        let x: Vec<f64> = (0..a.n()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; a.n()];
        a.matvec(&x, &mut b);
        axpy(1.0, &x, &mut b);
        chol.solve(&mut b);
        let err = b.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn lanczos_matches_dense_oracle_including_degenerate_pairs() {
        let g = Grid::polygon(&Domain::unit_square_polygon(), 1.0 / 12.0).unwrap();
        let a = fd_neumann_matrix(&g);
        let (vals, vecs) = smallest_eigenpairs(&a, 12, 7).unwrap();
        let mut dense: Vec<f64> = a.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        for (v, d) in vals.iter().zip(&dense) {
            assert!((v - d).abs() < 1e-8 * d.max(1.0), "{v} vs {d}");
        }
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let e = dot(&vecs[i], &vecs[j]) - if i == j { 1.0 } else { 0.0 };
                assert!(e.abs() < 1e-9);
            }
        }
    }
}
