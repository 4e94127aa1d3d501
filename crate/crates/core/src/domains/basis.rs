use std::borrow::Cow;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fd::{fd_neumann_matrix, smallest_eigenpairs};
use super::{Domain, Grid, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone)]
pub(crate) enum Samples {
    /// Row-major `K x n_points`.
    Dense(Vec<f64>),
    /// Rectangle modes as products of per-axis cosines, `x[a * nx + ix]`.
    Tensor { x: Vec<f64>, y: Vec<f64>, nx: usize, ny: usize },
}

/// Sorted Neumann eigenpairs sampled on a grid: the discrete stand-in for
/// the spectral resolution of the Neumann Laplacian.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    domain: Domain,
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    samples: Samples,
    kind: BasisKind,
    lambda_max: f64,
    /// Per-axis cosine indices `(a, b)` of analytic modes.
    axis_modes: Option<Vec<[usize; 2]>>,
}

fn cosine_factor(length: f64, a: usize, x: f64) -> f64 {
    if a == 0 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt() * (a as f64 * PI * x / length).cos()
    }
}

/// Explicit Neumann eigenpairs of `[0, length]` on an `n`-cell grid.
pub fn build_interval_basis(length: f64, k: usize, n: usize) -> Result<EigenBasis> {
    let domain = Domain::interval(length)?;
    if k == 0 {
        return Err(Error::InvalidParameter("mode count K must be positive".into()));
    }
    if k > n {
        return Err(Error::ModesBeyondResolution(format!("K = {k} modes exceed the grid size N = {n}")));
    }
    let grid = Grid::interval(length, n)?;
    let lambda_max = (PI / (2.0 * grid.h())).powi(2);
    let top = ((k - 1) as f64 * PI / length).powi(2);
    if top > lambda_max * (1.0 + 1e-12) {
        return Err(Error::ModesBeyondResolution(format!(
            "mode {k} has lambda = {top} above the resolution cutoff {lambda_max} (need K - 1 <= N / 2)"
        )));
    }
    let mut values = Vec::with_capacity(k * n);
    let mut eigenvalues = Vec::with_capacity(k);
    for a in 0..k {
        eigenvalues.push((a as f64 * PI / length).powi(2));
        values.extend(grid.coords().iter().map(|c| cosine_factor(length, a, c[0])));
    }
    Ok(EigenBasis {
        domain,
        grid: Arc::new(grid),
        eigenvalues,
        samples: Samples::Dense(values),
        kind: BasisKind::Analytic,
        lambda_max,
        axis_modes: Some((0..k).map(|a| [a, 0]).collect()),
    })
}

/// Tensor-product Neumann eigenpairs of `[0, lx] x [0, ly]`, sorted by
/// eigenvalue with ties broken by the lexicographic mode index `(a, b)`.
pub fn build_rectangle_basis(lx: f64, ly: f64, k: usize, nx: usize, ny: usize) -> Result<EigenBasis> {
    let domain = Domain::rectangle(lx, ly)?;
    if k == 0 {
        return Err(Error::InvalidParameter("mode count K must be positive".into()));
    }
    let grid = Grid::rectangle(lx, ly, nx, ny)?;
    let [hx, hy] = grid.spacing();
    let lambda_max = (PI / (2.0 * hx)).powi(2) + (PI / (2.0 * hy)).powi(2);
    let modes = sorted_rectangle_modes(lx, ly, lambda_max * (1.0 + 1e-12));
    if modes.len() < k {
        return Err(Error::ModesBeyondResolution(format!(
            "only {} modes lie below the cutoff {lambda_max}, K = {k} requested",
            modes.len()
        )));
    }
    let modes: Vec<[usize; 2]> = modes.into_iter().take(k).map(|(_, m)| m).collect();
    if let Some(m) = modes.iter().find(|m| 2 * m[0] > nx || 2 * m[1] > ny) {
        return Err(Error::ModesBeyondResolution(format!(
            "mode ({}, {}) is among the first {k} but exceeds the per-axis resolution ({}, {})",
            m[0],
            m[1],
            nx / 2,
            ny / 2
        )));
    }
    let amax = modes.iter().map(|m| m[0]).max().unwrap_or(0);
    let bmax = modes.iter().map(|m| m[1]).max().unwrap_or(0);
    let mut xf = Vec::with_capacity((amax + 1) * nx);
    for a in 0..=amax {
        xf.extend((0..nx).map(|ix| cosine_factor(lx, a, (ix as f64 + 0.5) * hx)));
    }
    let mut yf = Vec::with_capacity((bmax + 1) * ny);
    for b in 0..=bmax {
        yf.extend((0..ny).map(|iy| cosine_factor(ly, b, (iy as f64 + 0.5) * hy)));
    }
    let eigenvalues = modes.iter().map(|m| rect_lambda(lx, ly, *m)).collect();
    Ok(EigenBasis {
        domain,
        grid: Arc::new(grid),
        eigenvalues,
        samples: Samples::Tensor { x: xf, y: yf, nx, ny },
        kind: BasisKind::Analytic,
        lambda_max,
        axis_modes: Some(modes),
    })
}

fn rect_lambda(lx: f64, ly: f64, m: [usize; 2]) -> f64 {
    (m[0] as f64 * PI / lx).powi(2) + (m[1] as f64 * PI / ly).powi(2)
}

/// All rectangle modes with eigenvalue `<= limit`, sorted.
fn sorted_rectangle_modes(lx: f64, ly: f64, limit: f64) -> Vec<(f64, [usize; 2])> {
    let amax = (limit.sqrt() * lx / PI).floor() as usize;
    let bmax = (limit.sqrt() * ly / PI).floor() as usize;
    let mut modes = Vec::new();
    for a in 0..=amax {
        for b in 0..=bmax {
            let l = rect_lambda(lx, ly, [a, b]);
            if l <= limit {
                modes.push((l, [a, b]));
            }
        }
    }
    modes.sort_by(|p, q| {
        if (p.0 - q.0).abs() <= 1e-12 * p.0.max(q.0) {
            p.1.cmp(&q.1)
        } else {
            p.0.total_cmp(&q.0)
        }
    });
    modes
}

/// Finite-difference Neumann eigenpairs on an axis-aligned polygon.
pub fn build_fd_basis(domain: &Domain, h: f64, k: usize) -> Result<EigenBasis> {
    if !matches!(domain.shape(), Shape::Polygon { .. }) {
        return Err(Error::InvalidDomain("finite-difference bases are built on polygons".into()));
    }
    let grid = Grid::polygon(domain, h)?;
    let matrix = fd_neumann_matrix(&grid);
    let components = matrix.components();
    if components != 1 {
        return Err(Error::DisconnectedMesh { components });
    }
    if k > grid.len() {
        return Err(Error::ModesBeyondResolution(format!("K = {k} exceeds the {} grid cells", grid.len())));
    }
    let (mut eigenvalues, vectors) = smallest_eigenpairs(&matrix, k, 0x5eed_f00d)?;
    if k >= 2 && eigenvalues[1] <= 1e-8 * eigenvalues[k - 1].max(1.0) {
        return Err(Error::DisconnectedMesh { components: 2 });
    }
    let lambda_max = 2.0 * (PI / (2.0 * h)).powi(2);
    if let Some(l) = eigenvalues.iter().find(|&&l| l > lambda_max) {
        return Err(Error::ModesBeyondResolution(format!("eigenvalue {l} exceeds the cutoff {lambda_max}")));
    }
    let scale = 1.0 / grid.weights()[0].sqrt();
    let mut rows: Vec<Vec<f64>> = vectors.into_iter().map(|v| v.into_iter().map(|x| x * scale).collect()).collect();
    orthonormalize_clusters(&grid, &eigenvalues, &mut rows);
    // The zero mode is the normalized constant.
    let c = 1.0 / grid.total_weight().sqrt();
    rows[0].iter_mut().for_each(|v| *v = c);
    eigenvalues[0] = 0.0;
    for row in rows.iter_mut() {
        fix_sign(row);
    }
    let n = grid.len();
    let mut values = Vec::with_capacity(k * n);
    for r in rows {
        values.extend(r);
    }
    Ok(EigenBasis {
        domain: domain.clone(),
        grid: Arc::new(grid),
        eigenvalues,
        samples: Samples::Dense(values),
        kind: BasisKind::Numeric,
        lambda_max,
        axis_modes: None,
    })
}

/// Modified Gram-Schmidt in the quadrature inner product within clusters of
/// numerically equal eigenvalues.
fn orthonormalize_clusters(grid: &Grid, eigenvalues: &[f64], rows: &mut [Vec<f64>]) {
    let scale = eigenvalues.last().copied().unwrap_or(1.0).max(1.0);
    let mut start = 0;
    while start < rows.len() {
        let mut end = start + 1;
        while end < rows.len() && (eigenvalues[end] - eigenvalues[start]).abs() < 1e-8 * scale {
            end += 1;
        }
        for i in start..end {
            for j in start..i {
                let c = grid.inner(&rows[i], &rows[j]);
                let (head, tail) = rows.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= c * y;
                }
            }
            let nrm = grid.inner(&rows[i], &rows[i]).sqrt();
            rows[i].iter_mut().for_each(|x| *x /= nrm);
        }
        start = end;
    }
}

/// First entry of significant size is made positive.
fn fix_sign(row: &mut [f64]) {
    let m = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(first) = row.iter().find(|v| v.abs() > 1e-6 * m) {
        if *first < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

impl EigenBasis {
    /// Assemble a basis from raw parts (file import, fake-spectrum controls).
    pub(crate) fn from_parts(
        domain: Domain,
        grid: Grid,
        eigenvalues: Vec<f64>,
        dense_samples: Vec<f64>,
        kind: BasisKind,
        lambda_max: f64,
        axis_modes: Option<Vec<[usize; 2]>>,
    ) -> Result<Self> {
        if dense_samples.len() != eigenvalues.len() * grid.len() {
            return Err(Error::Format("sample array does not match K x grid size".into()));
        }
        if let Some(m) = &axis_modes {
            if m.len() != eigenvalues.len() {
                return Err(Error::Format("mode index list does not match K".into()));
            }
        }
        Ok(EigenBasis {
            domain,
            grid: Arc::new(grid),
            eigenvalues,
            samples: Samples::Dense(dense_samples),
            kind,
            lambda_max,
            axis_modes,
        })
    }

    /// Copy of this basis with eigenvalue `k` (0-based) replaced. The result
    /// is flagged numeric; it exists for negative controls.
    pub fn with_eigenvalue(&self, k: usize, value: f64) -> Result<Self> {
        if k >= self.len() || !(value >= 0.0) {
            return Err(Error::InvalidParameter(format!("cannot set eigenvalue {k} to {value}")));
        }
        let mut b = self.clone();
        b.eigenvalues[k] = value;
        b.kind = BasisKind::Numeric;
        b.axis_modes = None;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn axis_modes(&self) -> Option<&[[usize; 2]]> {
        self.axis_modes.as_deref()
    }

    /// Samples of eigenfunction `k` (0-based) on the grid.
    pub fn mode(&self, k: usize) -> Cow<'_, [f64]> {
        let n = self.grid.len();
        match &self.samples {
            Samples::Dense(v) => Cow::Borrowed(&v[k * n..(k + 1) * n]),
            Samples::Tensor { x, y, nx, ny } => {
                let [a, b] = self.axis_modes.as_ref().expect("tensor samples carry mode indices")[k];
                let xa = &x[a * nx..(a + 1) * nx];
                let yb = &y[b * ny..(b + 1) * ny];
                let mut out = Vec::with_capacity(n);
                for yv in yb {
                    out.extend(xa.iter().map(|xv| xv * yv));
                }
                Cow::Owned(out)
            }
        }
    }

    /// Row-major `K x n_points` copy of all samples.
    pub fn dense_samples(&self) -> Vec<f64> {
        match &self.samples {
            Samples::Dense(v) => v.clone(),
            Samples::Tensor { .. } => (0..self.len()).flat_map(|k| self.mode(k).into_owned()).collect(),
        }
    }

    /// `sum_k phi_k e_k(x)^2` at every grid point.
    pub fn weighted_square_sum(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        match &self.samples {
            Samples::Tensor { x, y, nx, ny } => {
                let modes = self.axis_modes.as_ref().expect("tensor samples carry mode indices");
                let amax = x.len() / nx;
                let bmax = y.len() / ny;
                // (X^2) Phi (Y^2)^T with Phi indexed by (a, b).
                let mut coef = vec![0.0; amax * bmax];
                for (m, p) in modes.iter().zip(phi) {
                    coef[m[0] * bmax + m[1]] += p;
                }
                let mut partial = vec![0.0; amax * ny];
                for a in 0..amax {
                    for b in 0..bmax {
                        let c = coef[a * bmax + b];
                        if c != 0.0 {
                            for iy in 0..*ny {
                                partial[a * ny + iy] += c * y[b * ny + iy].powi(2);
                            }
                        }
                    }
                }
                for iy in 0..*ny {
                    for a in 0..amax {
                        let p = partial[a * ny + iy];
                        if p != 0.0 {
                            for ix in 0..*nx {
                                out[iy * nx + ix] += p * x[a * nx + ix].powi(2);
                            }
                        }
                    }
                }
            }
            Samples::Dense(v) => {
                for (k, p) in phi.iter().enumerate() {
                    if *p != 0.0 {
                        for (o, e) in out.iter_mut().zip(&v[k * n..(k + 1) * n]) {
                            *o += p * e * e;
                        }
                    }
                }
            }
        }
        out
    }

    /// Largest `|e_k(x)|^2` over the grid and all modes of an analytic basis
    /// (its closed form), or over the retained modes of a numeric one.
    pub fn sup_square(&self) -> f64 {
        match (self.kind, self.domain.shape()) {
            (BasisKind::Analytic, Shape::Interval { length }) => 2.0 / length,
            (BasisKind::Analytic, Shape::Rectangle { lx, ly }) => 4.0 / (lx * ly),
            _ => (0..self.len())
                .map(|k| self.mode(k).iter().fold(0.0_f64, |m, v| m.max(v * v)))
                .fold(0.0, f64::max),
        }
    }

    /// Eigenvalues of the modes that are not retained, up to `limit`.
    /// Analytic bases enumerate them exactly; numeric bases use the Weyl
    /// asymptotics `lambda_k ~ 4 pi k / |Omega|` (2-D).
    pub fn unresolved_eigenvalues(&self, limit: f64) -> Vec<f64> {
        match (self.kind, self.domain.shape()) {
            (BasisKind::Analytic, Shape::Interval { length }) => {
                let amax = (limit.sqrt() * length / PI).floor() as usize;
                (self.len()..=amax).map(|a| (a as f64 * PI / length).powi(2)).collect()
            }
            (BasisKind::Analytic, Shape::Rectangle { lx, ly }) => {
                let kept: std::collections::HashSet<[usize; 2]> =
                    self.axis_modes.iter().flatten().copied().collect();
                sorted_rectangle_modes(*lx, *ly, limit)
                    .into_iter()
                    .filter(|(_, m)| !kept.contains(m))
                    .map(|(l, _)| l)
                    .collect()
            }
            _ => {
                let vol = self.domain.volume();
                let top = self.eigenvalues.last().copied().unwrap_or(0.0);
                let kmax = (limit * vol / (4.0 * PI)).ceil() as usize;
                (self.len() + 1..=kmax.max(self.len()))
                    .map(|k| (4.0 * PI * k as f64 / vol).max(top))
                    .collect()
            }
        }
    }

    /// Truncation certificate for a symbol: `sup|e|^2 * sum_{k > K} |phi(lambda_k)|`
    /// over the unresolved spectrum. Infinite when the sum does not settle.
    pub fn tail_bound(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let limit = 256.0 * self.lambda_max;
        let lams = self.unresolved_eigenvalues(limit);
        let mut sum = 0.0;
        let mut last_shell = 0.0;
        for &l in &lams {
            let v = phi(l).abs();
            if !v.is_finite() {
                return f64::INFINITY;
            }
            sum += v;
            if l > limit / 2.0 {
                last_shell += v;
            }
        }
        if last_shell > 1e-12 * sum.max(1e-300) && last_shell > 1e-300 {
            return f64::INFINITY;
        }
        self.sup_square() * sum
    }

    /// Largest deviation of the quadrature Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let rows: Vec<Cow<'_, [f64]>> = (0..self.len()).map(|k| self.mode(k)).collect();
        let mut dev: f64 = 0.0;
        for i in 0..rows.len() {
            for j in 0..=i {
                let g = self.grid.inner(&rows[i], &rows[j]);
                dev = dev.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        dev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::lp_norm;

    #[test]
    fn interval_closed_form() {
        let b = build_interval_basis(PI, 4, 64).unwrap();
        for (l, e) in b.eigenvalues().iter().zip([0.0, 1.0, 4.0, 9.0]) {
            assert!((l - e).abs() < 1e-12);
        }
        assert!(b.mode(0).iter().all(|v| (v - PI.powf(-0.5)).abs() < 1e-15));
        assert!(b.grid().inner(&b.mode(1), &b.mode(2)).abs() < 1e-12);
        assert!(b.gram_deviation() < 1e-12);
    }

    #[test]
    fn interval_rejects_unresolved_modes() {
        assert!(matches!(build_interval_basis(1.0, 9, 8), Err(Error::ModesBeyondResolution(_))));
        assert!(matches!(build_interval_basis(1.0, 6, 8), Err(Error::ModesBeyondResolution(_))));
        assert!(build_interval_basis(1.0, 5, 8).is_ok());
    }

    #[test]
    fn e2_sup_norm_on_interval() {
        let b = build_interval_basis(PI, 4, 512).unwrap();
        let sup = lp_norm(b.grid(), &b.mode(1), f64::INFINITY).unwrap();
        // cell centers miss x = 0 by h / 2
        let h = PI / 512.0;
        assert!((sup - (2.0 / PI).sqrt()).abs() < (2.0 / PI).sqrt() * h * h);
        assert!((lp_norm(b.grid(), &b.mode(1), 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_ordering_and_ties() {
        let b = build_rectangle_basis(PI, PI, 3, 16, 16).unwrap();
        assert_eq!(b.axis_modes().unwrap(), &[[0, 0], [0, 1], [1, 0]]);
        for (l, e) in b.eigenvalues().iter().zip([0.0, 1.0, 1.0]) {
            assert!((l - e).abs() < 1e-12);
        }
        let b = build_rectangle_basis(PI, 2.0 * PI, 2, 8, 16).unwrap();
        assert!((b.eigenvalues()[1] - 0.25).abs() < 1e-12);
        assert!(build_rectangle_basis(1.0, 1.0, 50, 4, 4).is_err());
    }

    #[test]
    fn rectangle_gram_and_tensor_square_sum() {
        let b = build_rectangle_basis(1.0, 2.0, 40, 12, 20).unwrap();
        assert!(b.gram_deviation() < 1e-12);
        let phi: Vec<f64> = (0..b.len()).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let fast = b.weighted_square_sum(&phi);
        let dense = b.dense_samples();
        let n = b.grid().len();
        for i in 0..n {
            let slow: f64 = (0..b.len()).map(|k| phi[k] * dense[k * n + i].powi(2)).sum();
            assert!((fast[i] - slow).abs() < 1e-12 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn weyl_count_unit_square() {
        let b = build_rectangle_basis(1.0, 1.0, 50, 32, 32).unwrap();
        // Independent count from the closed-form spectrum.
        let lam_top = b.eigenvalues()[49];
        for frac in [0.4, 0.6, 0.8] {
            let lam = frac * lam_top;
            let mut count = 0;
            for a in 0..40 {
                for c in 0..40 {
                    if PI * PI * ((a * a + c * c) as f64) <= lam {
                        count += 1;
                    }
                }
            }
            let weyl = lam / (4.0 * PI);
            assert!(((count as f64) - weyl).abs() <= 0.2 * weyl + 3.0, "count {count} vs weyl {weyl}");
            let mine = b.eigenvalues().iter().filter(|&&l| l <= lam).count();
            assert_eq!(mine, count);
        }
    }

    #[test]
    fn fd_unit_square_close_to_analytic() {
        let b = build_fd_basis(&Domain::unit_square_polygon(), 1.0 / 32.0, 4).unwrap();
        let exact = [0.0, PI * PI, PI * PI, 2.0 * PI * PI];
        assert!(b.eigenvalues()[0].abs() < 1e-10);
        for (l, e) in b.eigenvalues().iter().zip(exact).skip(1) {
            assert!((l - e).abs() < 0.02 * e, "{l} vs {e}");
        }
        assert!(b.gram_deviation() < 1e-6);
        let e1 = b.mode(0);
        let mean = e1.iter().sum::<f64>() / e1.len() as f64;
        let sd = (e1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / e1.len() as f64).sqrt();
        assert!(sd / mean < 1e-6);
    }

    #[test]
    fn fd_rejects_non_polygon() {
        assert!(build_fd_basis(&Domain::interval(1.0).unwrap(), 0.1, 2).is_err());
    }

    #[test]
    fn tail_bound_of_heat_symbol() {
        let b = build_interval_basis(PI, 33, 64).unwrap();
        let t = 0.05;
        let tail = b.tail_bound(|l| (-t * l).exp());
        let direct: f64 = (33..2000).map(|a| (-t * (a * a) as f64).exp()).sum::<f64>() * 2.0 / PI;
        assert!((tail - direct).abs() < 1e-12 * direct.max(1e-300));
        // 1/lambda is not summable in 2-D
        let r = build_rectangle_basis(1.0, 1.0, 20, 16, 16).unwrap();
        assert!(r.tail_bound(|l| 1.0 / (1.0 + l)).is_infinite());
    }
}
