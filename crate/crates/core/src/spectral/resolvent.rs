//! `(H + M)^-beta = Gamma(beta)^-1 int_0^inf t^(beta-1) e^(-Mt) e^(-tH) dt`,
//! integrated numerically mode by mode.

use super::{analyze, apply_to_coeffs, GridFunction};
use crate::domains::EigenBasis;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaQuadrature {
    /// Log-spaced nodes on `[t_min, T]`.
    pub nodes: usize,
    pub t_min: f64,
    /// `T` is the smallest time with `e^(-MT) T^(beta-1)` below this.
    pub cutoff: f64,
    /// Largest accepted relative error estimate.
    pub tolerance: f64,
}

impl Default for GammaQuadrature {
    fn default() -> Self {
        GammaQuadrature { nodes: 400, t_min: 1e-8, cutoff: 1e-14, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct GammaResult {
    pub value: GridFunction,
    pub t_max: f64,
    /// Largest relative change of a mode weight against a half-size rule.
    pub error_estimate: f64,
}

fn truncation_time(beta: f64, m: f64, cutoff: f64) -> f64 {
    let g = |t: f64| (-m * t).exp() * t.powf(beta - 1.0);
    let peak = ((beta - 1.0) / m).max(0.0);
    let mut hi = peak.max(1.0);
    while g(hi) >= cutoff {
        hi *= 2.0;
    }
    let mut lo = peak.max(hi / 2.0);
    if g(lo) < cutoff {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < cutoff {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `int_0^a t^(beta-1) e^(-ct) dt` from the positive series of the lower
/// incomplete gamma function.
fn head(beta: f64, c: f64, a: f64) -> f64 {
    let x = c * a;
    let mut term = 1.0 / beta;
    let mut sum = term;
    for n in 1..10_000 {
        term *= x / (beta + n as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    a.powf(beta) * (-x).exp() * sum
}

/// Trapezoid rule in `u = ln t` with the Euler-Maclaurin end correction.
fn mode_weight(beta: f64, c: f64, q: &GammaQuadrature, t_max: f64, nodes: usize) -> f64 {
    let (u0, u1) = (q.t_min.ln(), t_max.ln());
    let du = (u1 - u0) / (nodes - 1) as f64;
    let f = |u: f64| (beta * u - c * u.exp()).exp();
    let df = |u: f64| (beta - c * u.exp()) * f(u);
    let mut s = 0.5 * (f(u0) + f(u1));
    for i in 1..nodes - 1 {
        s += f(u0 + i as f64 * du);
    }
    s * du - du * du / 12.0 * (df(u1) - df(u0)) + head(beta, c, q.t_min)
}

pub fn resolvent_gamma(
    beta: f64,
    m: f64,
    f: &GridFunction,
    basis: &EigenBasis,
    quad: &GammaQuadrature,
) -> Result<GammaResult> {
    if !(beta > 0.0) || !(m > 0.0) || !beta.is_finite() || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("need beta > 0 and M > 0, got beta = {beta}, M = {m}")));
    }
    if quad.nodes < 8 || !(quad.t_min > 0.0) {
        return Err(Error::InvalidParameter("quadrature needs >= 8 nodes and t_min > 0".into()));
    }
    let t_max = truncation_time(beta, m, quad.cutoff).max(quad.t_min * 10.0);
    let gamma = libm::tgamma(beta);
    let mut estimate: f64 = 0.0;
    let weights: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|&l| {
            let c = l + m;
            let fine = mode_weight(beta, c, quad, t_max, quad.nodes);
            let coarse = mode_weight(beta, c, quad, t_max, quad.nodes / 2);
            estimate = estimate.max((fine - coarse).abs() / fine.abs().max(1e-300));
            fine / gamma
        })
        .collect();
    if !(estimate <= quad.tolerance) {
        return Err(Error::Quadrature { estimate, tolerance: quad.tolerance });
    }
    let c = analyze(f, basis)?;
    Ok(GammaResult { value: apply_to_coeffs(&weights, &c, basis)?, t_max, error_estimate: estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::build_interval_basis;
    use crate::spectral::{apply_multiplier, SymbolFn};

    #[test]
    fn zero_mode_and_second_mode() {
        let b = build_interval_basis(std::f64::consts::PI, 32, 128).unwrap();
        let one = GridFunction::constant(b.grid_arc().clone(), 1.0);
        let r = resolvent_gamma(1.0, 2.0, &one, &b, &GammaQuadrature::default()).unwrap();
        assert!(r.value.sub(&one.scale(0.5)).lp_norm(f64::INFINITY).unwrap() < 1e-9);
        let e2 = GridFunction::new(b.grid_arc().clone(), b.mode(1).into_owned()).unwrap();
        let r = resolvent_gamma(0.5, 1.0, &e2, &b, &GammaQuadrature::default()).unwrap();
        let want = e2.scale((b.eigenvalues()[1] + 1.0).powf(-0.5));
        assert!(r.value.sub(&want).lp_norm(f64::INFINITY).unwrap() < 1e-6);
    }

    #[test]
    fn agrees_with_spectral_oracle() {
        let b = build_interval_basis(2.0, 40, 128).unwrap();
        let f = GridFunction::from_fn(b.grid_arc().clone(), |x| (3.0 * x[0]).cos() + x[0]);
        for beta in [0.5, 0.75, 1.0, 2.0] {
            for m in [0.5, 1.0, 2.0] {
                let r = resolvent_gamma(beta, m, &f, &b, &GammaQuadrature::default()).unwrap();
                let o = apply_multiplier(&SymbolFn::resolvent(beta, m), &f, &b).unwrap();
                let rel = r.value.sub(&o).lp_norm(2.0).unwrap() / o.lp_norm(2.0).unwrap();
                assert!(rel < 1e-6, "beta {beta} M {m}: {rel}");
            }
        }
    }

    #[test]
    fn coarse_rule_is_reported() {
        let b = build_interval_basis(1.0, 8, 16).unwrap();
        let f = GridFunction::constant(b.grid_arc().clone(), 1.0);
        let q = GammaQuadrature { nodes: 12, ..Default::default() };
        assert!(matches!(resolvent_gamma(0.5, 1.0, &f, &b, &q), Err(Error::Quadrature { .. })));
        assert!(resolvent_gamma(0.0, 1.0, &f, &b, &GammaQuadrature::default()).is_err());
    }
}
