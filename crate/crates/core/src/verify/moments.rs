//! Low-frequency blocks of functions on the line, computed on a truncated
//! periodic grid with the FFT as the frequency calculus.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::ExperimentSpec;
use crate::error::Result;
use crate::littlewood_paley::{make_partition, PartitionOfUnity};
use crate::norms::{fit_line, EstimateReport, ReportPoint};

/// Uniform grid on `[-r, r)` with spacing `dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentGrid {
    pub r: f64,
    pub dx: f64,
}

impl MomentGrid {
    pub fn len(&self) -> usize {
        (2.0 * self.r / self.dx).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn x(&self, i: usize) -> f64 {
        -self.r + i as f64 * self.dx
    }
}

/// `||phi_j(|D|) f||_{L^1}` for each `j`, with the leakage: the largest
/// `|phi_j(|D|) f|` on the outer tenth of the grid relative to its maximum.
/// Edge values within ten times the imaginary residue of the inverse
/// transform are roundoff and do not count.
pub fn moment_block_norms(
    f: &dyn Fn(f64) -> f64,
    grid: MomentGrid,
    pou: &PartitionOfUnity,
    js: &[i32],
) -> (Vec<f64>, f64) {
    let n = grid.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(f(grid.x(i)), 0.0)).collect();
    fwd.process(&mut spec);
    let period = 2.0 * grid.r;
    let freq = |k: usize| {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        (2.0 * std::f64::consts::PI * kk / period).abs()
    };
    let mut leak: f64 = 0.0;
    let norms = js
        .iter()
        .map(|&j| {
            let mut b: Vec<Complex<f64>> =
                spec.iter().enumerate().map(|(k, c)| c * pou.phi_j(j, freq(k)) / n as f64).collect();
            inv.process(&mut b);
            let peak = b.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
            let noise = 10.0 * b.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
            let edge = (0..n)
                .filter(|&i| grid.x(i).abs() >= 0.9 * grid.r)
                .fold(0.0_f64, |m, i| m.max(b[i].re.abs()));
            if peak > 0.0 {
                leak = leak.max((edge - noise).max(0.0) / peak);
            }
            b.iter().map(|c| c.re.abs()).sum::<f64>() * grid.dx
        })
        .collect();
    (norms, leak)
}

/// `d^m/dx^m exp(-x^2)`: its moments of order `< m` vanish and the `m`-th
/// does not.
fn gaussian_derivative(m: usize, x: f64) -> f64 {
    // Physicists' Hermite polynomials: d^m e^{-x^2} = (-1)^m H_m(x) e^{-x^2}.
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    let hm = match m {
        0 => h0,
        _ => {
            for k in 1..m {
                let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hm * (-x * x).exp()
}

pub fn exp_moment_decay(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let pou = make_partition(spec.pou);
    let [j0, j1] = spec.j_range.unwrap_or([-7, -2]);
    let js: Vec<i32> = (j0..=j1).collect();
    let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let mut grid = MomentGrid { r: 2048.0, dx: 0.125 };
    // Block kernels decay like exp(-c sqrt(2^j |x|)), so the lowest block
    // needs a few hundred of its own scales before the wrap is negligible.
    const MAX_DOUBLINGS: u32 = 6;
    // The control adds a little mass, so no moment vanishes.
    let mass = if spec.negative_control { 0.01 } else { 0.0 };
    let orders: Vec<usize> = if spec.negative_control { vec![1, 2, 3] } else { vec![0, 1, 2, 3, 4] };
    for &m in &orders {
        let f = move |x: f64| gaussian_derivative(m, x) + mass * gaussian_derivative(0, x);
        let (mut norms, mut leak) = moment_block_norms(&f, grid, &pou, &js);
        let mut doublings = 0;
        while leak > 1e-10 && doublings < MAX_DOUBLINGS {
            grid.r *= 2.0;
            doublings += 1;
            (norms, leak) = moment_block_norms(&f, grid, &pou, &js);
        }
        if doublings > 0 {
            r.note(format!("order {m}: R doubled {doublings} time(s) to {}", grid.r));
        }
        if leak > 1e-10 {
            r.inconclusive(format!("order {m}: boundary leakage {leak:.2e} above 1e-10 at R = {}", grid.r));
        }
        let series = format!("order_{m}");
        for (&x, &v) in xs.iter().zip(&norms) {
            r.point(ReportPoint::new(&series, x, v));
        }
        if let Some(fit) = fit_line(&xs, &norms.iter().map(|v| v.log2()).collect::<Vec<_>>()) {
            r.fits.insert(series.clone(), fit);
            if m == 4 {
                r.check_ge("moments 0..3 vanish: decay exponent", fit.slope, 3.5);
            } else {
                r.check_near(&format!("first nonzero moment of order {m}: decay exponent"), fit.slope, m as f64, 0.5);
            }
        }
    }
    r.param("r", grid.r);
    r.param("dx", grid.dx);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        // Riemann sums of x^k times the derivatives.
        for m in 0..5 {
            for k in 0..=m {
                let s: f64 = (-8000..8000).map(|i| i as f64 * 1e-3).map(|x| x.powi(k as i32) * gaussian_derivative(m, x)).sum::<f64>() * 1e-3;
                if k < m {
                    assert!(s.abs() < 1e-9, "m={m} k={k} {s}");
                } else {
                    assert!(s.abs() > 0.1, "m={m} k={k} {s}");
                }
            }
        }
    }
}
