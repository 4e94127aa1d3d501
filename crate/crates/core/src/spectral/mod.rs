//! Functional calculus `phi(H_N)` through a Neumann eigenbasis.

mod gradient;
mod kernel;
mod resolvent;

pub use gradient::{gradient, gradient_kernels, mode_gradient, VectorField};
pub use kernel::{endpoint_norms, multiplier_kernel, read_kernel, write_kernel, EndpointNorms, KernelHeader, OperatorKernel};
pub use resolvent::{resolvent_gamma, GammaQuadrature, GammaResult};

use std::fmt;
use std::sync::Arc;

use crate::domains::{lp_norm, EigenBasis, Grid};
use crate::error::{Error, Result};
use crate::littlewood_paley::PartitionOfUnity;

/// Real values on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(&values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid function has non-finite value {v}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        GridFunction { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid.coords().iter().map(|&x| f(x)).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(&self.grid, &self.values, p)
    }

    pub fn integral(&self) -> f64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.total_weight()
    }

    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.grid.inner(&self.values, &other.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.values.len(), other.values.len(), "grid functions on different grids");
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a * b)
    }
}

/// Coordinates `c_k = <f, e_k>` in an eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs(pub Vec<f64>);

impl SpectralCoeffs {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }
}

fn check_grid(f: &GridFunction, basis: &EigenBasis) -> Result<()> {
    if f.grid().len() != basis.grid().len() || f.grid().id() != basis.grid().id() {
        return Err(Error::GridMismatch { expected: basis.grid().len(), got: f.grid().len() });
    }
    Ok(())
}

pub fn analyze(f: &GridFunction, basis: &EigenBasis) -> Result<SpectralCoeffs> {
    check_grid(f, basis)?;
    let wf: Vec<f64> = f.values().iter().zip(basis.grid().weights()).map(|(v, w)| v * w).collect();
    let coeffs = (0..basis.len()).map(|k| basis.mode(k).iter().zip(&wf).map(|(e, x)| e * x).sum()).collect();
    Ok(SpectralCoeffs(coeffs))
}

pub fn synthesize(c: &SpectralCoeffs, basis: &EigenBasis) -> Result<GridFunction> {
    if c.len() != basis.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for a basis with {} modes",
            c.len(),
            basis.len()
        )));
    }
    let mut values = vec![0.0; basis.grid().len()];
    for (k, &ck) in c.0.iter().enumerate() {
        if ck != 0.0 {
            for (v, e) in values.iter_mut().zip(basis.mode(k).iter()) {
                *v += ck * e;
            }
        }
    }
    GridFunction::new(basis.grid_arc().clone(), values)
}

/// A scalar function of the spectral variable.
#[derive(Clone)]
pub struct SymbolFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Interval outside of which the symbol vanishes, when known.
    pub support: Option<(f64, f64)>,
}

impl fmt::Debug for SymbolFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolFn").field("label", &self.label).field("support", &self.support).finish()
    }
}

impl SymbolFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SymbolFn { label: label.into(), f: Arc::new(f), support: None }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        (self.f)(lambda)
    }

    pub fn one() -> Self {
        SymbolFn::new("1", |_| 1.0)
    }

    pub fn identity() -> Self {
        SymbolFn::new("lambda", |l| l)
    }

    /// `exp(-t lambda)`.
    pub fn heat(t: f64) -> Self {
        SymbolFn::new(format!("heat(t={t})"), move |l| (-t * l).exp())
    }

    /// `(lambda + m)^-beta`.
    pub fn resolvent(beta: f64, m: f64) -> Self {
        SymbolFn::new(format!("resolvent(beta={beta},M={m})"), move |l| (l + m).powf(-beta))
    }

    /// `lambda^alpha phi_j(sqrt(lambda))`, zero wherever the bump vanishes.
    pub fn block(pou: PartitionOfUnity, j: i32, alpha: f64) -> Self {
        let lo = 2f64.powi(2 * (j - 1));
        let hi = 2f64.powi(2 * (j + 1));
        SymbolFn::new(format!("H^{alpha} phi_{j}(sqrt H)"), move |l| {
            let p = pou.phi_j(j, l.max(0.0).sqrt());
            if p == 0.0 {
                0.0
            } else {
                l.powf(alpha) * p
            }
        })
        .with_support(lo, hi)
    }

    /// `lambda^m psi(theta lambda)`.
    pub fn low_pass(pou: PartitionOfUnity, theta: f64, m: i32) -> Self {
        SymbolFn::new(format!("H^{m} psi({theta} H)"), move |l| {
            let p = pou.psi(theta * l);
            if p == 0.0 {
                0.0
            } else {
                l.powi(m) * p
            }
        })
    }

    /// Pointwise product of two symbols.
    pub fn times(&self, other: &SymbolFn) -> SymbolFn {
        let (a, b) = (self.f.clone(), other.f.clone());
        SymbolFn::new(format!("({})*({})", self.label, other.label), move |l| a(l) * b(l))
    }

    /// Values on the retained spectrum; rejects non-finite values.
    pub fn on_spectrum(&self, basis: &EigenBasis) -> Result<Vec<f64>> {
        basis
            .eigenvalues()
            .iter()
            .map(|&l| {
                let v = self.eval(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteSymbol { lambda: l })
                }
            })
            .collect()
    }
}

/// `phi(H) f = sum_k phi(lambda_k) c_k e_k`.
pub fn apply_multiplier(phi: &SymbolFn, f: &GridFunction, basis: &EigenBasis) -> Result<GridFunction> {
    let values = phi.on_spectrum(basis)?;
    let c = analyze(f, basis)?;
    apply_to_coeffs(&values, &c, basis)
}

pub(crate) fn apply_to_coeffs(values: &[f64], c: &SpectralCoeffs, basis: &EigenBasis) -> Result<GridFunction> {
    let scaled = SpectralCoeffs(c.0.iter().zip(values).map(|(c, v)| c * v).collect());
    synthesize(&scaled, basis)
}

pub fn heat(t: f64, f: &GridFunction, basis: &EigenBasis) -> Result<GridFunction> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("heat time t = {t} must be positive")));
    }
    apply_multiplier(&SymbolFn::heat(t), f, basis)
}

pub fn heat_kernel(t: f64, basis: &EigenBasis) -> Result<OperatorKernel> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("heat time t = {t} must be positive")));
    }
    multiplier_kernel(&SymbolFn::heat(t), basis)
}

/// Split `f = f_0 + f_0^perp` with `f_0` the mean (a constant).
pub fn decompose_mean(f: &GridFunction) -> (f64, GridFunction) {
    let m = f.mean();
    (m, f.map(|v| v - m))
}

/// Spectral projection onto `(0, inf)`: on a bounded domain this removes
/// the mean.
pub fn project_p(f: &GridFunction) -> GridFunction {
    decompose_mean(f).1
}

/// Kernel of `P e^{-tH}`: the heat kernel without the zero mode.
pub fn projected_heat_kernel(t: f64, basis: &EigenBasis) -> Result<OperatorKernel> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("heat time t = {t} must be positive")));
    }
    let sym = SymbolFn::new(format!("P heat(t={t})"), move |l| if l > 0.0 { (-t * l).exp() } else { 0.0 });
    multiplier_kernel(&sym, basis)
}

/// `||P e^{-tH}||_{L^2 -> L^2}` over the retained modes.
pub fn projected_heat_l2_norm(t: f64, basis: &EigenBasis) -> f64 {
    basis.eigenvalues().iter().filter(|&&l| l > 0.0).map(|&l| (-t * l).exp()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{build_interval_basis, build_rectangle_basis};
    use crate::littlewood_paley::{make_partition, PartitionVariant};
    use rand::{Rng, SeedableRng};

    fn random_band_limited(basis: &EigenBasis, seed: u64) -> GridFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = SpectralCoeffs((0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        synthesize(&c, basis).unwrap()
    }

    #[test]
    fn analysis_examples() {
        let b = build_interval_basis(std::f64::consts::PI, 16, 64).unwrap();
        let f = GridFunction::new(b.grid_arc().clone(), b.mode(1).iter().map(|v| 3.0 * v).collect()).unwrap();
        let c = analyze(&f, &b).unwrap();
        assert!((c.0[1] - 3.0).abs() < 1e-12);
        assert!(c.0.iter().enumerate().all(|(k, v)| k == 1 || v.abs() < 1e-12));
        let one = GridFunction::constant(b.grid_arc().clone(), 1.0);
        let c = analyze(&one, &b).unwrap();
        assert!((c.0[0] - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(c.0[1..].iter().all(|v| v.abs() < 1e-8));
        let g = random_band_limited(&b, 3);
        let back = synthesize(&analyze(&g, &b).unwrap(), &b).unwrap();
        assert!(back.sub(&g).lp_norm(f64::INFINITY).unwrap() < 1e-10);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = build_interval_basis(1.0, 4, 16).unwrap();
        let b = build_interval_basis(1.0, 4, 32).unwrap();
        let f = GridFunction::constant(b.grid_arc().clone(), 1.0);
        assert!(matches!(analyze(&f, &a), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn multiplier_examples() {
        let b = build_rectangle_basis(1.0, 1.5, 30, 16, 16).unwrap();
        let f = random_band_limited(&b, 9);
        let id = apply_multiplier(&SymbolFn::one(), &f, &b).unwrap();
        assert!(id.sub(&f).lp_norm(2.0).unwrap() < 1e-12);
        let e2 = GridFunction::new(b.grid_arc().clone(), b.mode(1).into_owned()).unwrap();
        let he2 = apply_multiplier(&SymbolFn::identity(), &e2, &b).unwrap();
        assert!(he2.sub(&e2.scale(b.eigenvalues()[1])).lp_norm(2.0).unwrap() < 1e-10);
        let pou = make_partition(PartitionVariant::Standard);
        let top = b.eigenvalues().last().unwrap().sqrt();
        let j = top.log2().ceil() as i32 + 2;
        let z = apply_multiplier(&SymbolFn::block(pou, j, 0.0), &f, &b).unwrap();
        assert_eq!(z.lp_norm(f64::INFINITY).unwrap(), 0.0);
        let bad = SymbolFn::new("1/lambda", |l| 1.0 / l);
        assert!(matches!(apply_multiplier(&bad, &f, &b), Err(Error::NonFiniteSymbol { .. })));
    }

    #[test]
    fn heat_conserves_mass_and_is_a_semigroup() {
        let b = build_interval_basis(2.0, 40, 128).unwrap();
        let f = random_band_limited(&b, 1);
        let u = heat(0.3, &f, &b).unwrap();
        assert!((u.integral() - f.integral()).abs() < 1e-10);
        let st = heat(0.2, &heat(0.1, &f, &b).unwrap(), &b).unwrap();
        assert!(st.sub(&u).lp_norm(2.0).unwrap() < 1e-10);
        assert!(heat(0.0, &f, &b).is_err());
        assert!(heat_kernel(-1.0, &b).is_err());
    }

    #[test]
    fn projection_examples() {
        let b = build_interval_basis(1.0, 8, 32).unwrap();
        let five = GridFunction::constant(b.grid_arc().clone(), 5.0);
        assert!(project_p(&five).lp_norm(f64::INFINITY).unwrap() < 1e-14);
        let e3 = GridFunction::new(b.grid_arc().clone(), b.mode(2).into_owned()).unwrap();
        assert!(project_p(&e3).sub(&e3).lp_norm(f64::INFINITY).unwrap() < 1e-14);
        for t in [0.01, 0.1, 1.0] {
            let n = projected_heat_l2_norm(t, &b);
            assert!((n - (-b.eigenvalues()[1] * t).exp()).abs() < 1e-15);
        }
    }
}
