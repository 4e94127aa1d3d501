use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domains::lp_norm_weighted;
use crate::error::{Error, Result};
use crate::spectral::{endpoint_norms, EndpointNorms, OperatorKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub p: f64,
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
    /// Both bounds are the exact discrete norm.
    pub exact: bool,
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `L^p -> L^p` bound from the diagonal endpoints, `a = 1/p`.
fn diagonal_bound(e: &EndpointNorms, a: f64) -> f64 {
    let through_two = if a >= 0.5 {
        let t = 2.0 * a - 1.0;
        e.l1_l1.powf(t) * e.l2_l2.powf(1.0 - t)
    } else {
        let t = 2.0 * a;
        e.l2_l2.powf(t) * e.linf_linf.powf(1.0 - t)
    };
    through_two.min(e.l1_l1.powf(a) * e.linf_linf.powf(1.0 - a))
}

/// Riesz-Thorin upper bound for `L^p -> L^q` from the four exact endpoints.
/// For `q < p` the bounded-domain Hoelder inclusion is used as well.
pub fn riesz_thorin_bound(e: &EndpointNorms, p: f64, q: f64, volume: f64) -> f64 {
    let (a, b) = (inv(p), inv(q));
    if let Some(v) = e.get(p, q) {
        return v;
    }
    if (a - b).abs() < 1e-15 {
        return diagonal_bound(e, a);
    }
    if b < a {
        let t = a - b;
        if t >= 1.0 - 1e-15 {
            return e.l1_linf;
        }
        let d = b / (1.0 - t);
        return e.l1_linf.powf(t) * diagonal_bound(e, d).powf(1.0 - t);
    }
    let holder = volume.powf(b - a);
    (diagonal_bound(e, a) * holder).min(diagonal_bound(e, b) * holder)
}

/// Largest `target(A f) / ||f||_p` over seeded random probes. For `p = 1`
/// the normalized point masses are included, which makes the value exact.
pub fn probe_lower_bound(
    kernel: &OperatorKernel,
    p: f64,
    target: &dyn Fn(&[f64]) -> Result<f64>,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let w = kernel.col_weights();
    let n = kernel.cols();
    let mut best: f64 = 0.0;
    if p == 1.0 {
        let mut col = vec![0.0; kernel.rows()];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = kernel.get(i, j);
            }
            best = best.max(target(&col)?);
        }
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..probes {
        let f: Vec<f64> = match k % 3 {
            // Signs of a kernel row: extremal for sup-type targets.
            0 => {
                let i = rng.gen_range(0..kernel.rows());
                kernel.row(i).iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect()
            }
            // Localized bump.
            1 => {
                let c = rng.gen_range(0..n);
                let width = rng.gen_range(1..=(n / 4).max(1));
                (0..n).map(|j| if j.abs_diff(c) <= width { 1.0 } else { 0.0 }).collect()
            }
            _ => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let norm = lp_norm_weighted(w, &f, p)?;
        if norm > 0.0 {
            best = best.max(target(&kernel.apply(&f))? / norm);
        }
    }
    Ok(best)
}

/// Bounds on `||A||_{L^p -> L^q}`: exact at the endpoints, otherwise the
/// Riesz-Thorin upper bound and a random-probe lower bound.
pub fn operator_norm_bounds(kernel: &OperatorKernel, p: f64, q: f64, probes: usize, seed: u64) -> Result<NormBounds> {
    for e in [p, q] {
        if !(e >= 1.0) {
            return Err(Error::InvalidExponent(e));
        }
    }
    let e = endpoint_norms(kernel)?;
    let volume: f64 = kernel.col_weights().iter().sum();
    if let Some(v) = e.get(p, q) {
        return Ok(NormBounds { p, q, lower: v, upper: v, exact: true });
    }
    let rw = kernel.row_weights().to_vec();
    let target = move |v: &[f64]| lp_norm_weighted(&rw, v, q);
    let lower = probe_lower_bound(kernel, p, &target, probes, seed)?;
    if p == 1.0 {
        return Ok(NormBounds { p, q, lower, upper: lower, exact: true });
    }
    let upper = riesz_thorin_bound(&e, p, q, volume).max(lower);
    Ok(NormBounds { p, q, lower, upper, exact: false })
}
