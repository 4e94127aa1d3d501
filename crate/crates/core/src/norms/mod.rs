//! Besov, amalgam and test-function semi-norms computed from dyadic blocks.

mod amalgam;
mod operator;
mod report;
mod triple;

pub use amalgam::{amalgam_norm, cube_index, AmalgamParams, CubePartition};
pub use operator::{operator_norm_bounds, probe_lower_bound, riesz_thorin_bound, NormBounds};
pub use report::{fit_line, Check, EstimateReport, Fit, NormRow, ReportPoint, Verdict};
pub use triple::{triple_norm, TRIPLE_MAX_ITER};

use serde::{Deserialize, Serialize};

use crate::domains::{lp_norm, EigenBasis};
use crate::error::{Error, Result};
use crate::littlewood_paley::PartitionOfUnity;
use crate::spectral::{analyze, apply_to_coeffs, GridFunction, SpectralCoeffs};

/// Coefficients below this fraction of the largest one count as zero.
const NEGLIGIBLE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub j_min: i32,
    pub j_max: i32,
}

impl BesovParams {
    /// Default dyadic range for a basis: `j_min = -ceil(log2(1/h)) - 2`
    /// and `j_max` the first `j` with `2^j >= sqrt(lambda_K)`.
    pub fn for_basis(basis: &EigenBasis, s: f64, p: f64, q: f64) -> Self {
        let (j_min, j_max) = default_range(basis);
        BesovParams { s, p, q, j_min, j_max }
    }

    pub fn validate(&self) -> Result<()> {
        for e in [self.p, self.q] {
            if !(e >= 1.0) {
                return Err(Error::InvalidExponent(e));
            }
        }
        if !self.s.is_finite() {
            return Err(Error::InvalidParameter(format!("smoothness s = {} must be finite", self.s)));
        }
        if self.j_min > 0 || self.j_max < 1 {
            return Err(Error::InvalidParameter(format!(
                "dyadic range [{}, {}] must satisfy j_min <= 0 < j_max",
                self.j_min, self.j_max
            )));
        }
        Ok(())
    }
}

pub fn default_range(basis: &EigenBasis) -> (i32, i32) {
    let h = basis.grid().h();
    let j_min = -((1.0 / h).log2().ceil() as i32) - 2;
    let top = basis.eigenvalues().last().copied().unwrap_or(0.0).sqrt();
    let j_max = if top > 0.0 { (top.log2() - 1e-12).ceil() as i32 } else { 1 };
    (j_min.min(0), j_max.max(1))
}

/// `l^q` norm of a finite sequence; `q = inf` is the supremum.
pub fn lq(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    let v: Vec<f64> = values.into_iter().map(f64::abs).collect();
    let m = v.iter().fold(0.0_f64, |a, &b| a.max(b));
    if q.is_infinite() || m == 0.0 {
        return m;
    }
    m * v.iter().map(|x| (x / m).powf(q)).sum::<f64>().powf(1.0 / q)
}

/// `L^p` norms of the dyadic pieces of one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNorms {
    pub p: f64,
    /// `||psi(H) f||_p`.
    pub psi: f64,
    pub j_min: i32,
    /// `||phi_j(sqrt H) f||_p` for `j = j_min..=j_max`.
    pub blocks: Vec<f64>,
    /// Nonzero blocks with `j < j_min`, as `(j, norm)`.
    pub below: Vec<(i32, f64)>,
}

impl BlockNorms {
    pub fn j_max(&self) -> i32 {
        self.j_min + self.blocks.len() as i32 - 1
    }

    pub fn block(&self, j: i32) -> f64 {
        if j >= self.j_min && j <= self.j_max() {
            return self.blocks[(j - self.j_min) as usize];
        }
        self.below.iter().find(|b| b.0 == j).map_or(0.0, |b| b.1)
    }

    /// Inhomogeneous norm: `psi` term plus `l^q` over `j >= 1`.
    pub fn inhomogeneous(&self, s: f64, q: f64) -> f64 {
        self.psi + lq((1..=self.j_max()).map(|j| 2f64.powf(s * j as f64) * self.block(j)), q)
    }

    /// Truncated homogeneous norm over `[j_min, j_max]` and the exact
    /// `l^q` size of the dropped blocks below `j_min`.
    pub fn homogeneous(&self, s: f64, q: f64) -> (f64, f64) {
        let v = lq((self.j_min..=self.j_max()).map(|j| 2f64.powf(s * j as f64) * self.block(j)), q);
        let tail = lq(self.below.iter().map(|&(j, b)| 2f64.powf(s * j as f64) * b), q);
        (v, tail)
    }
}

/// Dyadic pieces of `f` as grid values.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub psi: Vec<f64>,
    pub j_min: i32,
    pub blocks: Vec<Vec<f64>>,
    pub below: Vec<(i32, Vec<f64>)>,
    weights: Vec<f64>,
}

impl BlockDecomposition {
    pub fn norms(&self, p: f64) -> Result<BlockNorms> {
        let n = |v: &[f64]| crate::domains::lp_norm_weighted(&self.weights, v, p);
        Ok(BlockNorms {
            p,
            psi: n(&self.psi)?,
            j_min: self.j_min,
            blocks: self.blocks.iter().map(|b| n(b)).collect::<Result<_>>()?,
            below: self.below.iter().map(|(j, b)| Ok((*j, n(b)?))).collect::<Result<_>>()?,
        })
    }
}

fn check_band(c: &SpectralCoeffs, basis: &EigenBasis, j_max: i32) -> Result<()> {
    let scale = c.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let edge = 2f64.powi(j_max) * (1.0 + 1e-12);
    for (k, (&ck, &l)) in c.0.iter().zip(basis.eigenvalues()).enumerate() {
        if l.sqrt() > edge && ck.abs() > NEGLIGIBLE * scale {
            return Err(Error::UnresolvedBand(format!(
                "mode {k} with sqrt(lambda) = {} carries coefficient {ck} above 2^j_max = 2^{j_max}",
                l.sqrt()
            )));
        }
    }
    Ok(())
}

/// Split `f` into `psi(H) f` and the blocks `phi_j(sqrt H) f`.
pub fn decompose(
    f: &GridFunction,
    pou: &PartitionOfUnity,
    basis: &EigenBasis,
    j_min: i32,
    j_max: i32,
) -> Result<BlockDecomposition> {
    let c = analyze(f, basis)?;
    decompose_coeffs(&c, pou, basis, j_min, j_max)
}

pub fn decompose_coeffs(
    c: &SpectralCoeffs,
    pou: &PartitionOfUnity,
    basis: &EigenBasis,
    j_min: i32,
    j_max: i32,
) -> Result<BlockDecomposition> {
    if j_min > j_max {
        return Err(Error::InvalidParameter(format!("empty dyadic range [{j_min}, {j_max}]")));
    }
    check_band(c, basis, j_max)?;
    let lams = basis.eigenvalues();
    let piece = |sym: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
        let v: Vec<f64> = lams.iter().map(|&l| sym(l)).collect();
        Ok(apply_to_coeffs(&v, c, basis)?.into_values())
    };
    let psi = piece(&|l| pou.psi(l))?;
    let blocks = (j_min..=j_max).map(|j| piece(&|l| pou.phi_j(j, l.sqrt()))).collect::<Result<Vec<_>>>()?;
    let scale = c.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut low: Vec<i32> = Vec::new();
    for (&l, &ck) in lams.iter().zip(&c.0) {
        if l > 0.0 && ck.abs() > NEGLIGIBLE * scale {
            for j in PartitionOfUnity::active_blocks(l.sqrt()) {
                if j < j_min && pou.phi_j(j, l.sqrt()) != 0.0 && !low.contains(&j) {
                    low.push(j);
                }
            }
        }
    }
    low.sort_unstable();
    let below = low.into_iter().map(|j| Ok((j, piece(&|l| pou.phi_j(j, l.sqrt()))?))).collect::<Result<_>>()?;
    Ok(BlockDecomposition { psi, j_min, blocks, below, weights: basis.grid().weights().to_vec() })
}

pub fn block_norms(f: &GridFunction, params: &BesovParams, pou: &PartitionOfUnity, basis: &EigenBasis) -> Result<BlockNorms> {
    params.validate()?;
    decompose(f, pou, basis, params.j_min, params.j_max)?.norms(params.p)
}

/// `||psi(H) f||_p + || {2^{sj} ||phi_j(sqrt H) f||_p}_{j >= 1} ||_{l^q}`.
pub fn besov_inhom(f: &GridFunction, params: &BesovParams, pou: &PartitionOfUnity, basis: &EigenBasis) -> Result<f64> {
    Ok(block_norms(f, params, pou, basis)?.inhomogeneous(params.s, params.q))
}

/// Homogeneous norm truncated to `[j_min, j_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousNorm {
    pub value: f64,
    /// `l^q` size of the nonzero blocks below `j_min`.
    pub tail_bound: f64,
}

pub fn besov_hom(
    f: &GridFunction,
    params: &BesovParams,
    pou: &PartitionOfUnity,
    basis: &EigenBasis,
) -> Result<HomogeneousNorm> {
    let (value, tail_bound) = block_norms(f, params, pou, basis)?.homogeneous(params.s, params.q);
    Ok(HomogeneousNorm { value, tail_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seminorm {
    pub value: f64,
    /// Highest block included.
    pub j_max: i32,
    /// False when a nonzero mean puts `f` outside the mean-zero test class.
    pub in_class: bool,
}

/// `p_M(f) = ||f||_1 + sup_{j >= 1} 2^{Mj} ||phi_j(sqrt H) f||_1`.
pub fn seminorm_pm(f: &GridFunction, m: u32, pou: &PartitionOfUnity, basis: &EigenBasis) -> Result<Seminorm> {
    let (j_min, j_max) = default_range(basis);
    let b = decompose(f, pou, basis, j_min, j_max)?.norms(1.0)?;
    let sup = (1..=j_max).map(|j| 2f64.powi(m as i32 * j) * b.block(j)).fold(0.0, f64::max);
    Ok(Seminorm { value: f.lp_norm(1.0)? + sup, j_max, in_class: true })
}

/// `q_M(f) = ||f||_1 + sup_j 2^{M|j|} (|f_0| + ||phi_j(sqrt H) f||_1)`.
/// A nonzero mean makes the supremum infinite.
pub fn seminorm_qm(f: &GridFunction, m: u32, pou: &PartitionOfUnity, basis: &EigenBasis) -> Result<Seminorm> {
    let (j_min, j_max) = default_range(basis);
    let l1 = f.lp_norm(1.0)?;
    let f0 = f.mean().abs() * f.grid().total_weight().sqrt();
    let scale = f.lp_norm(2.0)?;
    if f0 > NEGLIGIBLE * scale.max(f64::MIN_POSITIVE) {
        return Ok(Seminorm { value: f64::INFINITY, j_max, in_class: false });
    }
    let b = decompose(f, pou, basis, j_min, j_max)?.norms(1.0)?;
    let sup = (j_min..=j_max)
        .chain(b.below.iter().map(|x| x.0))
        .map(|j| 2f64.powi(m as i32 * j.abs()) * b.block(j))
        .fold(0.0, f64::max);
    Ok(Seminorm { value: l1 + sup, j_max, in_class: true })
}

/// `||f||_p` of a grid function, re-exported for norm tables.
pub fn lebesgue(f: &GridFunction, p: f64) -> Result<f64> {
    lp_norm(f.grid(), f.values(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{build_interval_basis, build_rectangle_basis};
    use crate::littlewood_paley::{make_partition, PartitionVariant};
    use std::f64::consts::PI;

    fn std_pou() -> PartitionOfUnity {
        make_partition(PartitionVariant::Standard)
    }

    #[test]
    fn lq_examples() {
        assert_eq!(lq([3.0, -4.0], 2.0), 5.0);
        assert_eq!(lq([3.0, -4.0], f64::INFINITY), 4.0);
        assert_eq!(lq(Vec::<f64>::new(), 1.0), 0.0);
    }

    #[test]
    fn constants() {
        let b = build_rectangle_basis(1.0, 2.0, 20, 16, 32).unwrap();
        let c = GridFunction::constant(b.grid_arc().clone(), -3.0);
        for p in [1.0, 2.0, f64::INFINITY] {
            let pr = BesovParams::for_basis(&b, 0.5, p, 2.0);
            let want = 3.0 * if p.is_infinite() { 1.0 } else { 2f64.powf(1.0 / p) };
            assert!((besov_inhom(&c, &pr, &std_pou(), &b).unwrap() - want).abs() < 1e-12);
            let h = besov_hom(&c, &pr, &std_pou(), &b).unwrap();
            assert!(h.value < 1e-13 && h.tail_bound == 0.0);
        }
        let q = seminorm_qm(&c, 2, &std_pou(), &b).unwrap();
        assert!(q.value.is_infinite() && !q.in_class);
    }

    #[test]
    fn e2_on_interval_brute_force() {
        let b = build_interval_basis(PI, 32, 256).unwrap();
        let pou = std_pou();
        let e2 = GridFunction::new(b.grid_arc().clone(), b.mode(1).into_owned()).unwrap();
        let pr = BesovParams::for_basis(&b, 0.0, 2.0, 2.0);
        let want = (-1..=1).map(|j| pou.phi_j(j, 1.0).powi(2)).sum::<f64>().sqrt();
        let got = besov_hom(&e2, &pr, &pou, &b).unwrap();
        assert!((got.value - want).abs() < 1e-12, "{} {want}", got.value);
        let pm = seminorm_pm(&e2, 1, &pou, &b).unwrap();
        let l1 = e2.lp_norm(1.0).unwrap();
        let brute = l1 + (1..=8).map(|j| 2f64.powi(j) * pou.phi_j(j, 1.0) * l1).fold(0.0, f64::max);
        assert!((pm.value - brute).abs() < 1e-12);
        for m in 1..=8 {
            let q = seminorm_qm(&e2, m, &pou, &b).unwrap();
            assert!(q.value.is_finite() && q.in_class);
        }
    }

    #[test]
    fn mode_at_dyadic_frequency() {
        // sqrt(lambda) = 2^j0 exactly: a = 2^j0 on [0, pi].
        let b = build_interval_basis(PI, 40, 128).unwrap();
        let pou = std_pou();
        for j0 in 2..=5 {
            let e = GridFunction::new(b.grid_arc().clone(), b.mode(1 << j0).into_owned()).unwrap();
            let pr = BesovParams::for_basis(&b, 0.0, 2.0, f64::INFINITY);
            let got = besov_inhom(&e, &pr, &pou, &b).unwrap();
            let lam = 2f64.powi(j0);
            let want = pou.psi(lam * lam) + (j0 - 1..=j0 + 1).map(|j| pou.phi_j(j, lam)).fold(0.0, f64::max);
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unresolved_band_is_reported() {
        let b = build_interval_basis(PI, 40, 128).unwrap();
        let e = GridFunction::new(b.grid_arc().clone(), b.mode(30).into_owned()).unwrap();
        let mut pr = BesovParams::for_basis(&b, 0.0, 2.0, 2.0);
        pr.j_max = 3;
        assert!(matches!(besov_inhom(&e, &pr, &std_pou(), &b), Err(Error::UnresolvedBand(_))));
        pr.j_min = 1;
        assert!(besov_inhom(&e, &pr, &std_pou(), &b).is_err());
    }

    #[test]
    fn homogeneous_tail_is_exact() {
        let b = build_rectangle_basis(PI, 2.0 * PI, 20, 16, 32).unwrap();
        let e2 = GridFunction::new(b.grid_arc().clone(), b.mode(1).into_owned()).unwrap();
        let mut pr = BesovParams::for_basis(&b, 0.0, 2.0, 2.0);
        let full = besov_hom(&e2, &pr, &std_pou(), &b).unwrap();
        assert_eq!(full.tail_bound, 0.0);
        pr.j_min = 0;
        let cut = besov_hom(&e2, &pr, &std_pou(), &b).unwrap();
        assert!(cut.tail_bound > 0.0);
        assert!(((cut.value.powi(2) + cut.tail_bound.powi(2)).sqrt() - full.value).abs() < 1e-12);
    }
}
