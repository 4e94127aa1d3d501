use super::CubePartition;
use crate::error::{Error, Result};
use crate::spectral::OperatorKernel;

pub const TRIPLE_MAX_ITER: usize = 10_000;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopped once the Rayleigh quotient settles.
fn top_eigenvalue(g: &[f64], n: usize) -> Result<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 2654435761) % 997) as f64 * 1e-3).collect();
    let mut prev = f64::NAN;
    for _ in 0..TRIPLE_MAX_ITER {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w: Vec<f64> = (0..n).map(|i| g[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if rq <= 0.0 {
            return Ok(0.0);
        }
        if (rq - prev).abs() <= 1e-13 * rq {
            return Ok(rq);
        }
        prev = rq;
        v = w;
    }
    Err(Error::NoConvergence { iterations: TRIPLE_MAX_ITER })
}

/// `sup_m || |x - theta^{1/2} m|^alpha A chi_{C_theta(m)} ||_{L^2 -> L^2}`
/// over the nonempty cubes.
pub fn triple_norm(a: &OperatorKernel, alpha: f64, theta: f64, coords: &[[f64; 2]], dim: usize) -> Result<f64> {
    if !(alpha > 0.0) || !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("need alpha > 0 and theta > 0, got {alpha}, {theta}")));
    }
    if coords.len() != a.rows() || a.rows() != a.cols() {
        return Err(Error::GridMismatch { expected: a.rows(), got: coords.len() });
    }
    let side = theta.sqrt();
    let cubes = cube_partition(coords, side, dim);
    let rw = a.row_weights();
    let cw = a.col_weights();
    let mut best: f64 = 0.0;
    for (m, idx) in &cubes {
        let c = [side * m[0] as f64, side * m[1] as f64];
        // B_ij = |x_i - c|^alpha K_ij sqrt(w_j) for j in the cube; the norm is
        // sqrt of the top eigenvalue of B^T W B.
        let dist: Vec<f64> = coords
            .iter()
            .map(|x| {
                let dy = if dim == 1 { 0.0 } else { x[1] - c[1] };
                ((x[0] - c[0]).powi(2) + dy * dy).sqrt().powf(alpha)
            })
            .collect();
        let s = idx.len();
        let cols: Vec<Vec<f64>> = idx
            .iter()
            .map(|&j| (0..a.rows()).map(|i| dist[i] * a.get(i, j) * cw[j].sqrt()).collect())
            .collect();
        let mut g = vec![0.0; s * s];
        for p in 0..s {
            for q in 0..=p {
                let v: f64 = cols[p].iter().zip(&cols[q]).zip(rw).map(|((x, y), w)| w * x * y).sum();
                g[p * s + q] = v;
                g[q * s + p] = v;
            }
        }
        best = best.max(top_eigenvalue(&g, s)?.sqrt());
    }
    Ok(best)
}

fn cube_partition(coords: &[[f64; 2]], side: f64, dim: usize) -> Vec<([i64; 2], Vec<usize>)> {
    let mut map: std::collections::BTreeMap<[i64; 2], Vec<usize>> = Default::default();
    for (i, &x) in coords.iter().enumerate() {
        map.entry(super::cube_index(x, side, dim)).or_default().push(i);
    }
    map.into_iter().collect()
}

impl CubePartition {
    /// Largest distance from a cube center to a point assigned to it.
    pub fn max_center_distance(&self, coords: &[[f64; 2]]) -> f64 {
        let mut best: f64 = 0.0;
        for (m, idx) in &self.cubes {
            let c = self.center(*m);
            for &i in idx {
                let x = coords[i];
                best = best.max(((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt());
            }
        }
        best
    }
}
