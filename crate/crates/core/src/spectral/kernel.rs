use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SymbolFn;
use crate::domains::io::{read_f64s, read_header, write_f64s, write_header};
use crate::domains::{EigenBasis, Grid};
use crate::error::{Error, Result};

/// Largest `rows * cols` a dense kernel may have.
pub const MAX_KERNEL_ENTRIES: usize = 1 << 25;

pub const KERNEL_MAGIC: &[u8; 8] = b"NBKERNL1";

/// Dense integral kernel `K(x_i, y_j)` together with the quadrature weights
/// of both grids, so `(A f)(x_i) = sum_j K_ij w_j f_j`.
#[derive(Debug, Clone)]
pub struct OperatorKernel {
    pub tag: String,
    pub grid_id: u64,
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
    /// `phi(lambda_k)` on the retained spectrum, for multiplier kernels.
    pub symbol_values: Option<Vec<f64>>,
    /// Pointwise bound on the kernel error from the discarded modes.
    pub tail_bound: f64,
}

impl OperatorKernel {
    pub fn new(
        tag: impl Into<String>,
        grid_id: u64,
        matrix: Vec<f64>,
        row_weights: Vec<f64>,
        col_weights: Vec<f64>,
    ) -> Result<Self> {
        let (rows, cols) = (row_weights.len(), col_weights.len());
        if matrix.len() != rows * cols {
            return Err(Error::GridMismatch { expected: rows * cols, got: matrix.len() });
        }
        Ok(OperatorKernel {
            tag: tag.into(),
            grid_id,
            rows,
            cols,
            matrix,
            row_weights,
            col_weights,
            symbol_values: None,
            tail_bound: 0.0,
        })
    }

    /// Kernel of the identity: `delta_ij / w_j`.
    pub fn identity(grid: &Grid) -> Self {
        let n = grid.len();
        let w = grid.weights().to_vec();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0 / w[i];
        }
        let mut k = OperatorKernel::new("identity", grid.id(), m, w.clone(), w).expect("square kernel");
        k.symbol_values = Some(vec![1.0]);
        k
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }

    /// `(A f)_i = sum_j K_ij w_j f_j`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let wf: Vec<f64> = f.iter().zip(&self.col_weights).map(|(a, w)| a * w).collect();
        (0..self.rows).map(|i| self.row(i).iter().zip(&wf).map(|(k, x)| k * x).sum()).collect()
    }

    /// `(A^* g)_j = sum_i K_ij w_i g_i`.
    pub fn apply_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let c = g[i] * self.row_weights[i];
            if c != 0.0 {
                for (o, k) in out.iter_mut().zip(self.row(i)) {
                    *o += c * k;
                }
            }
        }
        out
    }

    /// Largest `|K_ij - K_ji|` relative to `max |K|`.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let scale = self.matrix.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        d / scale
    }

    /// Left-compose with a matrix acting on row samples: `(D K)`.
    pub fn map_columns(&self, tag: impl Into<String>, f: impl Fn(&[f64]) -> Vec<f64>) -> OperatorKernel {
        let mut out = vec![0.0; self.matrix.len()];
        let mut col = vec![0.0; self.rows];
        for j in 0..self.cols {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.get(i, j);
            }
            for (i, v) in f(&col).into_iter().enumerate() {
                out[i * self.cols + j] = v;
            }
        }
        OperatorKernel {
            tag: tag.into(),
            grid_id: self.grid_id,
            rows: self.rows,
            cols: self.cols,
            matrix: out,
            row_weights: self.row_weights.clone(),
            col_weights: self.col_weights.clone(),
            symbol_values: None,
            tail_bound: f64::NAN,
        }
    }

    /// `L^2 -> L^2` norm as the largest singular value of
    /// `W_r^(1/2) K W_c^(1/2)`.
    pub fn l2_norm_svd(&self) -> f64 {
        let m = DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.row_weights[i].sqrt() * self.get(i, j) * self.col_weights[j].sqrt()
        });
        m.singular_values().max()
    }

    /// `L^2 -> L^2` norm by power iteration on `A^* A`.
    pub fn l2_norm_power(&self, max_iter: usize, tol: f64) -> Result<f64> {
        let mut v: Vec<f64> = (0..self.cols).map(|j| 1.0 + 0.01 * ((j * 7919) % 101) as f64).collect();
        let norm = |x: &[f64], w: &[f64]| x.iter().zip(w).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
        let n0 = norm(&v, &self.col_weights);
        v.iter_mut().for_each(|x| *x /= n0);
        let mut prev = 0.0;
        for _ in 0..max_iter {
            let av = self.apply(&v);
            let s2 = norm(&av, &self.row_weights);
            if s2 == 0.0 {
                return Ok(0.0);
            }
            let mut w = self.apply_adjoint(&av);
            let nw = norm(&w, &self.col_weights);
            if nw == 0.0 {
                return Ok(0.0);
            }
            w.iter_mut().for_each(|x| *x /= nw);
            v = w;
            if (s2 - prev).abs() <= tol * s2 {
                return Ok(s2);
            }
            prev = s2;
        }
        Err(Error::NoConvergence { iterations: max_iter })
    }
}

/// `K(x_i, x_j) = sum_k phi(lambda_k) e_k(x_i) e_k(x_j)`.
pub fn multiplier_kernel(phi: &SymbolFn, basis: &EigenBasis) -> Result<OperatorKernel> {
    let n = basis.grid().len();
    if n * n > MAX_KERNEL_ENTRIES {
        return Err(Error::InvalidParameter(format!("dense kernel on {n} points is too large")));
    }
    let values = phi.on_spectrum(basis)?;
    let active: Vec<usize> = (0..basis.len()).filter(|&k| values[k] != 0.0).collect();
    let mut e = DMatrix::<f64>::zeros(n, active.len());
    let mut ep = DMatrix::<f64>::zeros(n, active.len());
    for (c, &k) in active.iter().enumerate() {
        for (i, v) in basis.mode(k).iter().enumerate() {
            e[(i, c)] = *v;
            ep[(i, c)] = values[k] * v;
        }
    }
    let k = &e * ep.transpose();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // Exact symmetry regardless of summation order.
            matrix[i * n + j] = if j <= i { 0.5 * (k[(i, j)] + k[(j, i)]) } else { 0.0 };
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            matrix[i * n + j] = matrix[j * n + i];
        }
    }
    let w = basis.grid().weights().to_vec();
    let mut out = OperatorKernel::new(phi.label(), basis.grid().id(), matrix, w.clone(), w)?;
    out.tail_bound = basis.tail_bound(|l| phi.eval(l));
    out.symbol_values = Some(values);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointNorms {
    pub l1_l1: f64,
    pub l1_linf: f64,
    pub linf_linf: f64,
    pub l2_l2: f64,
}

impl EndpointNorms {
    /// Norm at an endpoint pair `(p, q)` in `{1, 2, inf}`, if exact.
    pub fn get(&self, p: f64, q: f64) -> Option<f64> {
        match (p, q) {
            (a, b) if a == 1.0 && b == 1.0 => Some(self.l1_l1),
            (a, b) if a == 1.0 && b.is_infinite() => Some(self.l1_linf),
            (a, b) if a.is_infinite() && b.is_infinite() => Some(self.linf_linf),
            (a, b) if a == 2.0 && b == 2.0 => Some(self.l2_l2),
            _ => None,
        }
    }
}

/// Exact discrete operator norms at the four endpoints.
pub fn endpoint_norms(kernel: &OperatorKernel) -> Result<EndpointNorms> {
    let (r, c) = (kernel.rows(), kernel.cols());
    let mut col_sums = vec![0.0; c];
    let mut linf_linf: f64 = 0.0;
    let mut l1_linf: f64 = 0.0;
    for i in 0..r {
        let wi = kernel.row_weights()[i];
        let mut row_sum = 0.0;
        for (j, &k) in kernel.row(i).iter().enumerate() {
            let a = k.abs();
            col_sums[j] += wi * a;
            row_sum += kernel.col_weights()[j] * a;
            l1_linf = l1_linf.max(a);
        }
        linf_linf = linf_linf.max(row_sum);
    }
    let l1_l1 = col_sums.into_iter().fold(0.0, f64::max);
    let l2_l2 = match &kernel.symbol_values {
        Some(v) => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        None => kernel.l2_norm_svd(),
    };
    Ok(EndpointNorms { l1_l1, l1_linf, linf_linf, l2_l2 })
}

/// Header of a kernel dump.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelHeader {
    pub tag: String,
    pub grid_id: String,
    pub rows: usize,
    pub cols: usize,
    pub tail_bound: f64,
}

/// Binary dump: magic `NBKERNL1`, JSON header, then row weights, column
/// weights and the row-major matrix as little-endian `f64`.
pub fn write_kernel(w: &mut impl Write, k: &OperatorKernel) -> Result<()> {
    let header = KernelHeader {
        tag: k.tag.clone(),
        grid_id: format!("{:016x}", k.grid_id),
        rows: k.rows,
        cols: k.cols,
        tail_bound: k.tail_bound,
    };
    write_header(w, KERNEL_MAGIC, &header)?;
    write_f64s(w, k.row_weights.iter().copied())?;
    write_f64s(w, k.col_weights.iter().copied())?;
    write_f64s(w, k.matrix.iter().copied())?;
    Ok(())
}

pub fn read_kernel(r: &mut impl Read) -> Result<OperatorKernel> {
    let h: KernelHeader = read_header(r, KERNEL_MAGIC)?;
    if h.rows.checked_mul(h.cols).is_none_or(|s| s > MAX_KERNEL_ENTRIES) {
        return Err(Error::Format("kernel dimensions are implausible".into()));
    }
    let grid_id = u64::from_str_radix(&h.grid_id, 16).map_err(|e| Error::Format(format!("grid id: {e}")))?;
    let rw = read_f64s(r, h.rows)?;
    let cw = read_f64s(r, h.cols)?;
    let m = read_f64s(r, h.rows * h.cols)?;
    let mut k = OperatorKernel::new(h.tag, grid_id, m, rw, cw)?;
    k.tail_bound = h.tail_bound;
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{build_interval_basis, build_rectangle_basis};
    use crate::spectral::heat_kernel;

    #[test]
    fn identity_and_heat_endpoints() {
        let b = build_interval_basis(std::f64::consts::PI, 33, 64).unwrap();
        let k = multiplier_kernel(&SymbolFn::one(), &b).unwrap();
        assert_eq!(endpoint_norms(&k).unwrap().l2_l2, 1.0);
        let k = heat_kernel(0.5, &b).unwrap();
        assert!(k.asymmetry() == 0.0);
        let n = endpoint_norms(&k).unwrap();
        assert!((n.l1_l1 - 1.0).abs() < 1e-10 + k.tail_bound * std::f64::consts::PI, "{n:?}");
        assert!((n.linf_linf - 1.0).abs() < 1e-10 + k.tail_bound * std::f64::consts::PI);
        let far = heat_kernel(60.0, &b).unwrap();
        assert!(far.matrix().iter().all(|v| (v - 1.0 / std::f64::consts::PI).abs() < 1e-12));
    }

    #[test]
    fn power_iteration_matches_spectral_norm() {
        let b = build_rectangle_basis(1.0, 2.0, 20, 8, 12).unwrap();
        let mut k = heat_kernel(0.01, &b).unwrap();
        let exact = endpoint_norms(&k).unwrap().l2_l2;
        k.symbol_values = None;
        let p = k.l2_norm_power(10_000, 1e-13).unwrap();
        assert!((p - exact).abs() < 1e-8, "{p} {exact}");
    }

    #[test]
    fn dump_roundtrip() {
        let b = build_interval_basis(1.0, 5, 10).unwrap();
        let k = heat_kernel(0.1, &b).unwrap();
        let mut bytes = Vec::new();
        write_kernel(&mut bytes, &k).unwrap();
        let back = read_kernel(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.matrix(), k.matrix());
        assert_eq!(back.grid_id, k.grid_id);
        let mut again = Vec::new();
        write_kernel(&mut again, &back).unwrap();
        assert_eq!(bytes, again);
    }
}
