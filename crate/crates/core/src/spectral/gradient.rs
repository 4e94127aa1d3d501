use std::f64::consts::PI;

use super::{analyze, multiplier_kernel, GridFunction, OperatorKernel, SymbolFn};
use crate::domains::{EigenBasis, Grid, Shape};
use crate::error::Result;

/// One grid function per spatial axis.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<GridFunction>,
}

impl VectorField {
    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        let n = self.components[0].values().len();
        (0..n)
            .map(|i| self.components.iter().map(|c| c.values()[i].powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// Largest component-wise `L^p` norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let mut m: f64 = 0.0;
        for c in &self.components {
            m = m.max(c.lp_norm(p)?);
        }
        Ok(m)
    }

    /// `(sum_c ||f_c||_2^2)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        self.components.iter().map(|c| c.inner(c)).sum::<f64>().sqrt()
    }
}

fn sine_factor(length: f64, a: usize, x: f64) -> f64 {
    if a == 0 {
        0.0
    } else {
        let w = a as f64 * PI / length;
        -(2.0 / length).sqrt() * w * (w * x).sin()
    }
}

fn cosine_factor(length: f64, a: usize, x: f64) -> f64 {
    if a == 0 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt() * (a as f64 * PI * x / length).cos()
    }
}

/// Exact gradient samples of analytic mode `k`, one vector per axis.
/// `None` for numeric bases.
pub fn mode_gradient(basis: &EigenBasis, k: usize) -> Option<Vec<Vec<f64>>> {
    let modes = basis.axis_modes()?;
    let [a, b] = modes[k];
    let coords = basis.grid().coords();
    match basis.domain().shape() {
        Shape::Interval { length } => Some(vec![coords.iter().map(|c| sine_factor(*length, a, c[0])).collect()]),
        Shape::Rectangle { lx, ly } => Some(vec![
            coords.iter().map(|c| sine_factor(*lx, a, c[0]) * cosine_factor(*ly, b, c[1])).collect(),
            coords.iter().map(|c| cosine_factor(*lx, a, c[0]) * sine_factor(*ly, b, c[1])).collect(),
        ]),
        Shape::Polygon { .. } => None,
    }
}

/// Finite-difference derivative along `axis`: centered in the interior,
/// one-sided second order where a neighbor is missing.
pub(crate) fn fd_derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.spacing()[axis];
    let step = |c: [usize; 2], d: isize| -> Option<usize> {
        let (x, y) = (c[0] as isize, c[1] as isize);
        if axis == 0 {
            grid.cell_at(x + d, y)
        } else {
            grid.cell_at(x, y + d)
        }
    };
    grid.cells()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let f = |j: usize| values[j];
            match (step(c, -1), step(c, 1)) {
                (Some(l), Some(r)) => (f(r) - f(l)) / (2.0 * h),
                (None, Some(r)) => match step(c, 2) {
                    Some(r2) => (-3.0 * f(i) + 4.0 * f(r) - f(r2)) / (2.0 * h),
                    None => (f(r) - f(i)) / h,
                },
                (Some(l), None) => match step(c, -2) {
                    Some(l2) => (3.0 * f(i) - 4.0 * f(l) + f(l2)) / (2.0 * h),
                    None => (f(i) - f(l)) / h,
                },
                (None, None) => 0.0,
            }
        })
        .collect()
}

/// Spatial gradient. Analytic bases differentiate the cosine expansion of
/// `f` termwise; numeric bases use finite differences on the grid data.
pub fn gradient(f: &GridFunction, basis: &EigenBasis) -> Result<VectorField> {
    let dim = basis.grid().dim();
    if basis.axis_modes().is_some() && basis.domain().shape().is_analytic() {
        let c = analyze(f, basis)?;
        let n = basis.grid().len();
        let mut comps = vec![vec![0.0; n]; dim];
        for (k, &ck) in c.0.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let g = mode_gradient(basis, k).expect("analytic basis");
            for (out, gk) in comps.iter_mut().zip(g) {
                for (o, v) in out.iter_mut().zip(gk) {
                    *o += ck * v;
                }
            }
        }
        let components =
            comps.into_iter().map(|v| GridFunction::new(basis.grid_arc().clone(), v)).collect::<Result<_>>()?;
        return Ok(VectorField { components });
    }
    let components = (0..dim)
        .map(|a| GridFunction::new(basis.grid_arc().clone(), fd_derivative(basis.grid(), f.values(), a)))
        .collect::<Result<_>>()?;
    Ok(VectorField { components })
}

/// Kernels of `d_c phi(H)`, one per axis.
pub fn gradient_kernels(phi: &SymbolFn, basis: &EigenBasis) -> Result<Vec<OperatorKernel>> {
    let k = multiplier_kernel(phi, basis)?;
    let dim = basis.grid().dim();
    if basis.axis_modes().is_some() && basis.domain().shape().is_analytic() {
        let values = k.symbol_values.clone().expect("multiplier kernel carries symbol values");
        let n = basis.grid().len();
        let mut out = Vec::with_capacity(dim);
        for axis in 0..dim {
            let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
            for (kk, &v) in values.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let g = &mode_gradient(basis, kk).expect("analytic basis")[axis];
                let e = basis.mode(kk);
                let gv = nalgebra::DVector::from_iterator(n, g.iter().map(|x| x * v));
                let ev = nalgebra::DVector::from_column_slice(&e);
                m.ger(1.0, &gv, &ev, 1.0);
            }
            let flat: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
            let w = basis.grid().weights().to_vec();
            out.push(OperatorKernel::new(format!("d{axis} {}", phi.label()), basis.grid().id(), flat, w.clone(), w)?);
        }
        return Ok(out);
    }
    Ok((0..dim)
        .map(|axis| {
            k.map_columns(format!("d{axis} {}", phi.label()), |col| fd_derivative(basis.grid(), col, axis))
        })
        .collect())
}
