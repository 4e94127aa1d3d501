use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lq;
use crate::domains::{lp_norm_weighted, Grid};
use crate::error::{Error, Result};
use crate::spectral::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmalgamParams {
    pub p: f64,
    pub q: f64,
    pub theta: f64,
}

impl AmalgamParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for e in [self.p, self.q] {
            if !(e >= 1.0) {
                return Err(Error::InvalidExponent(e));
            }
        }
        if !(self.theta > 0.0) || self.theta.sqrt() < grid.h() * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "cube side theta^(1/2) = {} must be at least the grid spacing {}",
                self.theta.max(0.0).sqrt(),
                grid.h()
            )));
        }
        Ok(())
    }
}

/// Lattice index `m` of the cube centered at `side * m` containing `x`.
pub fn cube_index(x: [f64; 2], side: f64, dim: usize) -> [i64; 2] {
    let k = |v: f64| (v / side + 0.5).floor() as i64;
    if dim == 1 {
        [k(x[0]), 0]
    } else {
        [k(x[0]), k(x[1])]
    }
}

/// Grid points grouped by the cube `C_theta(m)` they fall in.
#[derive(Debug, Clone)]
pub struct CubePartition {
    pub side: f64,
    pub dim: usize,
    /// Nonempty cubes in lattice order with their point indices.
    pub cubes: Vec<([i64; 2], Vec<usize>)>,
}

impl CubePartition {
    pub fn new(grid: &Grid, theta: f64) -> Self {
        let side = theta.sqrt();
        let mut map: BTreeMap<[i64; 2], Vec<usize>> = BTreeMap::new();
        for (i, &x) in grid.coords().iter().enumerate() {
            map.entry(cube_index(x, side, grid.dim())).or_default().push(i);
        }
        CubePartition { side, dim: grid.dim(), cubes: map.into_iter().collect() }
    }

    pub fn center(&self, m: [i64; 2]) -> [f64; 2] {
        [self.side * m[0] as f64, if self.dim == 1 { 0.0 } else { self.side * m[1] as f64 }]
    }

    /// `L^q(C_theta(m))` norm of `values` on every nonempty cube.
    pub fn local_norms(&self, weights: &[f64], values: &[f64], q: f64) -> Result<Vec<f64>> {
        self.cubes
            .iter()
            .map(|(_, idx)| {
                let w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
                let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
                lp_norm_weighted(&w, &v, q)
            })
            .collect()
    }

    /// `l^p(L^q)_theta` norm of raw grid values.
    pub fn norm(&self, weights: &[f64], values: &[f64], p: f64, q: f64) -> Result<f64> {
        Ok(lq(self.local_norms(weights, values, q)?, p))
    }
}

/// `|| { ||f||_{L^q(C_theta(m))} }_m ||_{l^p}`.
pub fn amalgam_norm(f: &GridFunction, params: &AmalgamParams) -> Result<f64> {
    params.validate(f.grid())?;
    CubePartition::new(f.grid(), params.theta).norm(f.grid().weights(), f.values(), params.p, params.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn one_cube_and_equal_exponents() {
        let g = Arc::new(Grid::rectangle(1.0, 0.5, 16, 8).unwrap());
        let f = GridFunction::from_fn(g.clone(), |x| (x[0] * 5.0).sin() + x[1]);
        let big = AmalgamParams { p: 1.0, q: 3.0, theta: 4.0 };
        assert!((amalgam_norm(&f, &big).unwrap() - f.lp_norm(3.0).unwrap()).abs() < 1e-14);
        for p in [1.0, 2.0, 5.0] {
            let a = amalgam_norm(&f, &AmalgamParams { p, q: p, theta: 1.0 / 64.0 }).unwrap();
            assert!((a - f.lp_norm(p).unwrap()).abs() < 1e-12 * a);
        }
        let a = amalgam_norm(&f, &AmalgamParams { p: f64::INFINITY, q: f64::INFINITY, theta: 1.0 / 16.0 }).unwrap();
        assert_eq!(a, f.lp_norm(f64::INFINITY).unwrap());
    }

    #[test]
    fn centered_cube_enumeration() {
        // Centers 0, 1/4, ..., 1: half cubes at both ends.
        let g = Arc::new(Grid::interval(1.0, 64).unwrap());
        let one = GridFunction::constant(g, 1.0);
        let a = amalgam_norm(&one, &AmalgamParams { p: 1.0, q: 2.0, theta: 1.0 / 16.0 }).unwrap();
        let want = 2.0 * (1.0f64 / 8.0).sqrt() + 3.0 * (1.0f64 / 4.0).sqrt();
        assert!((a - want).abs() < 1e-12, "{a} {want}");
    }

    #[test]
    fn rejects_sub_grid_cubes() {
        let g = Arc::new(Grid::interval(1.0, 16).unwrap());
        let one = GridFunction::constant(g, 1.0);
        assert!(amalgam_norm(&one, &AmalgamParams { p: 1.0, q: 2.0, theta: 1e-4 }).is_err());
        assert!(amalgam_norm(&one, &AmalgamParams { p: 0.5, q: 2.0, theta: 1.0 }).is_err());
    }
}
