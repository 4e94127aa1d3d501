//! Bounded model domains, their cell-centered grids, and Neumann eigenbases.

mod basis;
mod fd;
pub mod io;

pub use basis::{build_fd_basis, build_interval_basis, build_rectangle_basis, BasisKind, EigenBasis};
pub use fd::{fd_neumann_matrix, SparseSym};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a bounded Lipschitz model domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `[0, length]`.
    Interval { length: f64 },
    /// `[0, lx] x [0, ly]`.
    Rectangle { lx: f64, ly: f64 },
    /// Simple axis-aligned polygon, vertices in order (closing edge implied).
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    /// Whether closed-form Neumann eigenpairs exist.
    pub fn is_analytic(&self) -> bool {
        !matches!(self, Shape::Polygon { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    shape: Shape,
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidDomain(format!("interval length {length} must be positive")));
        }
        Ok(Domain { shape: Shape::Interval { length } })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidDomain(format!("rectangle sides {lx} x {ly} must be positive")));
        }
        Ok(Domain { shape: Shape::Rectangle { lx, ly } })
    }

    /// Axis-aligned simple polygon. Consecutive edges must alternate between
    /// horizontal and vertical and non-adjacent edges may not touch.
    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        validate_polygon(&vertices)?;
        Ok(Domain { shape: Shape::Polygon { vertices } })
    }

    /// The L-shaped domain `[0,2]^2 \ (1,2)^2`.
    pub fn lshape() -> Self {
        Domain {
            shape: Shape::Polygon {
                vertices: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]],
            },
        }
    }

    /// Unit square as a polygon, for exercising the finite-difference path.
    pub fn unit_square_polygon() -> Self {
        Domain {
            shape: Shape::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] },
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Interval { length } => *length,
            Shape::Rectangle { lx, ly } => lx * ly,
            Shape::Polygon { vertices } => shoelace(vertices).abs(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Interval { length } => *length,
            Shape::Rectangle { lx, ly } => lx.hypot(*ly),
            Shape::Polygon { vertices } => {
                let mut d: f64 = 0.0;
                for a in vertices {
                    for b in vertices {
                        d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
                    }
                }
                d
            }
        }
    }

    /// `(min corner, max corner)`; 1-D domains report `y = 0` for both.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match &self.shape {
            Shape::Interval { length } => ([0.0, 0.0], [*length, 0.0]),
            Shape::Rectangle { lx, ly } => ([0.0, 0.0], [*lx, *ly]),
            Shape::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for a in 0..2 {
                        lo[a] = lo[a].min(v[a]);
                        hi[a] = hi[a].max(v[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Closed-set membership test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match &self.shape {
            Shape::Interval { length } => (0.0..=*length).contains(&p[0]),
            Shape::Rectangle { lx, ly } => (0.0..=*lx).contains(&p[0]) && (0.0..=*ly).contains(&p[1]),
            Shape::Polygon { vertices } => point_in_polygon(vertices, p),
        }
    }

    pub fn label(&self) -> String {
        match &self.shape {
            Shape::Interval { length } => format!("interval(L={length})"),
            Shape::Rectangle { lx, ly } => format!("rectangle(Lx={lx},Ly={ly})"),
            Shape::Polygon { vertices } => format!("polygon({} vertices)", vertices.len()),
        }
    }
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = v.len();
    let mut inside = false;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn validate_polygon(v: &[[f64; 2]]) -> Result<()> {
    let n = v.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidDomain(format!(
            "axis-aligned polygon needs an even number (>= 4) of vertices, got {n}"
        )));
    }
    if v.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidDomain("non-finite vertex".into()));
    }
    let edge = |i: usize| (v[i], v[(i + 1) % n]);
    let mut horizontal = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = edge(i);
        let h = a[1] == b[1] && a[0] != b[0];
        let vert = a[0] == b[0] && a[1] != b[1];
        if !h && !vert {
            return Err(Error::InvalidDomain(format!("edge {i} is not axis-aligned or is degenerate")));
        }
        horizontal.push(h);
    }
    for i in 0..n {
        if horizontal[i] == horizontal[(i + 1) % n] {
            return Err(Error::InvalidDomain(format!("edges {i} and {} are collinear", (i + 1) % n)));
        }
    }
    // Non-adjacent edges must be disjoint.
    let overlap = |a0: f64, a1: f64, b0: f64, b1: f64| a0.min(a1) <= b0.max(b1) && b0.min(b1) <= a0.max(a1);
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if overlap(a[0], b[0], c[0], d[0]) && overlap(a[1], b[1], c[1], d[1]) {
                return Err(Error::InvalidDomain(format!("edges {i} and {j} intersect")));
            }
        }
    }
    if shoelace(v).abs() <= 0.0 {
        return Err(Error::InvalidDomain("polygon has zero area".into()));
    }
    Ok(())
}

/// Cell-centered grid with quadrature weights. Cells live on a lattice over
/// the bounding box so that neighbor lookups work for every domain shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    origin: [f64; 2],
    spacing: [f64; 2],
    lattice: [usize; 2],
    cells: Vec<[usize; 2]>,
    lookup: Vec<usize>,
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    id: u64,
}

const OUTSIDE: usize = usize::MAX;

impl Grid {
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("grid size must be positive".into()));
        }
        let h = length / n as f64;
        let cells = (0..n).map(|i| [i, 0]).collect();
        Ok(Self::from_cells(1, [0.0, 0.0], [h, 1.0], [n, 1], cells, h))
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("grid size must be positive".into()));
        }
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let mut cells = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                cells.push([ix, iy]);
            }
        }
        Ok(Self::from_cells(2, [0.0, 0.0], [hx, hy], [nx, ny], cells, hx * hy))
    }

    /// Cells of spacing `h` whose centers lie inside an axis-aligned polygon.
    /// Every vertex offset from the bounding-box corner must be a multiple of
    /// `h` so that the cells tile the polygon exactly.
    pub fn polygon(domain: &Domain, h: f64) -> Result<Self> {
        let Shape::Polygon { vertices } = domain.shape() else {
            return Err(Error::InvalidDomain("polygon grid requested for a non-polygon domain".into()));
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing h = {h} must be positive")));
        }
        let (lo, hi) = domain.bounding_box();
        for v in vertices {
            for a in 0..2 {
                let r = (v[a] - lo[a]) / h;
                if (r - r.round()).abs() > 1e-9 * r.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "spacing h = {h} does not divide the polygon edge offsets"
                    )));
                }
            }
        }
        let nx = ((hi[0] - lo[0]) / h).round() as usize;
        let ny = ((hi[1] - lo[1]) / h).round() as usize;
        let mut cells = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let c = [lo[0] + (ix as f64 + 0.5) * h, lo[1] + (iy as f64 + 0.5) * h];
                if point_in_polygon(vertices, c) {
                    cells.push([ix, iy]);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidDomain("no grid cell lies inside the polygon".into()));
        }
        Ok(Self::from_cells(2, lo, [h, h], [nx, ny], cells, h * h))
    }

    fn from_cells(
        dim: usize,
        origin: [f64; 2],
        spacing: [f64; 2],
        lattice: [usize; 2],
        cells: Vec<[usize; 2]>,
        weight: f64,
    ) -> Self {
        let mut lookup = vec![OUTSIDE; lattice[0] * lattice[1]];
        let mut coords = Vec::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            lookup[c[0] + lattice[0] * c[1]] = i;
            let y = if dim == 1 { 0.0 } else { origin[1] + (c[1] as f64 + 0.5) * spacing[1] };
            coords.push([origin[0] + (c[0] as f64 + 0.5) * spacing[0], y]);
        }
        let weights = vec![weight; cells.len()];
        let mut grid = Grid { dim, origin, spacing, lattice, cells, lookup, coords, weights, id: 0 };
        grid.id = grid.fingerprint();
        grid
    }

    /// Rebuild a grid from explicit coordinates and weights (file import).
    pub(crate) fn from_parts(
        dim: usize,
        origin: [f64; 2],
        spacing: [f64; 2],
        lattice: [usize; 2],
        cells: Vec<[usize; 2]>,
        coords: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if cells.len() != coords.len() || cells.len() != weights.len() {
            return Err(Error::Format("grid arrays have inconsistent lengths".into()));
        }
        let mut lookup = vec![OUTSIDE; lattice[0] * lattice[1]];
        for (i, c) in cells.iter().enumerate() {
            let idx = c[0] + lattice[0] * c[1];
            if c[0] >= lattice[0] || c[1] >= lattice[1] || lookup[idx] != OUTSIDE {
                return Err(Error::Format("invalid cell lattice index".into()));
            }
            lookup[idx] = i;
        }
        let mut grid = Grid { dim, origin, spacing, lattice, cells, lookup, coords, weights, id: 0 };
        grid.id = grid.fingerprint();
        Ok(grid)
    }

    // FNV-1a over the raw bits of everything that defines the grid.
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.dim as u64);
        eat(self.lattice[0] as u64);
        eat(self.lattice[1] as u64);
        for x in self.origin.iter().chain(&self.spacing) {
            eat(x.to_bits());
        }
        for (c, w) in self.coords.iter().zip(&self.weights) {
            eat(c[0].to_bits());
            eat(c[1].to_bits());
            eat(w.to_bits());
        }
        h
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Largest spacing over the active axes.
    pub fn h(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0].max(self.spacing[1])
        }
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn lattice(&self) -> [usize; 2] {
        self.lattice
    }

    pub fn cells(&self) -> &[[usize; 2]] {
        &self.cells
    }

    /// Index of the cell at lattice position `(ix, iy)`, if it is inside.
    pub fn cell_at(&self, ix: isize, iy: isize) -> Option<usize> {
        if ix < 0 || iy < 0 || ix as usize >= self.lattice[0] || iy as usize >= self.lattice[1] {
            return None;
        }
        let i = self.lookup[ix as usize + self.lattice[0] * iy as usize];
        (i != OUTSIDE).then_some(i)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Quadrature inner product `sum_i w_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), got: values.len() });
        }
        Ok(())
    }
}

/// Quadrature `L^p` norm: `(sum_i w_i |f_i|^p)^(1/p)`, or `max_i |f_i|` for
/// `p = inf`.
pub fn lp_norm(grid: &Grid, values: &[f64], p: f64) -> Result<f64> {
    grid.check_len(values)?;
    lp_norm_weighted(grid.weights(), values, p)
}

pub(crate) fn lp_norm_weighted(weights: &[f64], values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    if p == 1.0 {
        return Ok(weights.iter().zip(values).map(|(w, v)| w * v.abs()).sum());
    }
    if p == 2.0 {
        return Ok(weights.iter().zip(values).map(|(w, v)| w * v * v).sum::<f64>().sqrt());
    }
    // Scale by the max to keep large p from overflowing.
    let m = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = weights.iter().zip(values).map(|(w, v)| w * (v.abs() / m).powf(p)).sum();
    Ok(m * s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_volume() {
        let g = Grid::interval(std::f64::consts::PI, 37).unwrap();
        assert!((g.total_weight() - std::f64::consts::PI).abs() < 1e-12 * std::f64::consts::PI);
        let g = Grid::rectangle(1.5, 0.5, 12, 7).unwrap();
        assert!((g.total_weight() - 0.75).abs() < 1e-12);
        let l = Domain::lshape();
        let g = Grid::polygon(&l, 1.0 / 16.0).unwrap();
        assert_eq!(g.len(), 3 * 256);
        assert!((g.total_weight() - l.volume()).abs() < 1e-12 * 3.0);
        assert!(g.coords().iter().all(|&c| l.contains(c)));
    }

    #[test]
    fn polygon_validation() {
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).is_err());
        // bow-tie-like self touching shape
        let bad = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 2.0], [1.0, -1.0], [0.0, -1.0]];
        assert!(Domain::polygon(bad).is_err());
        assert!((Domain::lshape().volume() - 3.0).abs() < 1e-15);
        assert!(Grid::polygon(&Domain::lshape(), 0.3).is_err());
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = Grid::rectangle(2.0, 3.0, 8, 8).unwrap();
        let f = vec![-1.5; g.len()];
        assert!((lp_norm(&g, &f, 2.0).unwrap() - 1.5 * 6f64.sqrt()).abs() < 1e-12);
        assert!((lp_norm(&g, &f, 3.0).unwrap() - 1.5 * 6f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(lp_norm(&g, &f, f64::INFINITY).unwrap(), 1.5);
        assert!(matches!(lp_norm(&g, &f, 0.5), Err(Error::InvalidExponent(_))));
    }
}
