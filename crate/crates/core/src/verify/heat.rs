use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_grid, rectangle_modes_below, ExperimentSpec};
use crate::domains::{build_interval_basis, build_rectangle_basis, EigenBasis};
use crate::error::Result;
use crate::norms::{fit_line, EstimateReport, ReportPoint};
use crate::spectral::{heat_kernel, projected_heat_kernel, projected_heat_l2_norm};

/// Kernels whose tail bound exceeds this fraction of the diagonal are not
/// fitted.
const TAIL_DOMINANCE: f64 = 1e-2;

/// Fitted `K_t(x, y) <= C3 max{t^(-n/2), 1} exp(-|x - y|^2 / (C4 t))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFit {
    pub c3: f64,
    pub c4: f64,
    /// Times kept in the fit.
    pub times: Vec<f64>,
    /// Times dropped because the truncation tail dominates.
    pub dropped: Vec<f64>,
    /// `min_t min_{x,y} (K_t + tail_t)`; nonnegative iff positivity holds.
    pub min_excess: f64,
    /// `max_{x,y} |P K_t|` per kept time.
    pub projected_max: Vec<f64>,
}

/// Largest excess `K - tail` per squared distance, with the diagonal
/// maximum and the minimum of `K + tail`.
struct Profile {
    t: f64,
    m: f64,
    by_distance: Vec<(f64, f64)>,
    min_shifted: f64,
    diag: f64,
    tail: f64,
    projected: f64,
}

fn profile(basis: &EigenBasis, t: f64, tail_override: Option<f64>) -> Result<Profile> {
    let k = heat_kernel(t, basis)?;
    let tail = tail_override.unwrap_or(k.tail_bound);
    // Rounding floor of the dense product.
    let floor = 1e-13 * (0..k.rows()).map(|i| k.get(i, i).abs()).fold(0.0, f64::max);
    let coords = basis.grid().coords();
    let mut map: BTreeMap<i64, f64> = BTreeMap::new();
    let mut min_shifted = f64::INFINITY;
    let mut diag: f64 = 0.0;
    let h = basis.grid().h();
    for i in 0..k.rows() {
        diag = diag.max(k.get(i, i));
        for (j, &v) in k.row(i).iter().enumerate() {
            min_shifted = min_shifted.min(v + tail + floor);
            let excess = v - tail - floor;
            if excess > 0.0 {
                let d2 = (coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2);
                let key = (d2 / (h * h) * 1e6).round() as i64;
                let e = map.entry(key).or_insert(0.0);
                *e = e.max(excess);
            }
        }
    }
    let n = basis.grid().dim() as f64;
    let pk = projected_heat_kernel(t, basis)?;
    let projected = pk.matrix().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(Profile {
        t,
        m: t.powf(-n / 2.0).max(1.0),
        by_distance: map.into_iter().map(|(key, e)| (key as f64 * 1e-6 * h * h, e)).collect(),
        min_shifted,
        diag,
        tail,
        projected,
    })
}

/// Smallest `C` for a given `c` over all profiles.
fn constant_for(profiles: &[Profile], c: f64) -> f64 {
    profiles
        .iter()
        .flat_map(|p| p.by_distance.iter().map(move |&(d2, e)| e * (d2 / (c * p.t)).exp() / p.m))
        .fold(0.0, f64::max)
}

/// Fit `(C3, C4)` valid at every pair and every kept time, minimizing the
/// Gaussian mass `C3 (pi C4)^(n/2)`.
pub fn gaussian_fit(basis: &EigenBasis, ts: &[f64], tail_override: Option<f64>) -> Result<GaussianFit> {
    let all: Vec<Profile> = ts.par_iter().map(|&t| profile(basis, t, tail_override)).collect::<Result<_>>()?;
    let min_excess = all.iter().map(|p| p.min_shifted).fold(f64::INFINITY, f64::min);
    let (kept, dropped): (Vec<Profile>, Vec<Profile>) =
        all.into_iter().partition(|p| p.tail <= TAIL_DOMINANCE * p.diag);
    let n = basis.grid().dim() as f64;
    let mass = |c: f64| constant_for(&kept, c) * (std::f64::consts::PI * c).powf(n / 2.0);
    let grid = log_grid(1e-2, 1e3, 161);
    let vals: Vec<f64> = grid.iter().map(|&c| mass(c)).collect();
    let best = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)].ln(), grid[(best + 1).min(grid.len() - 1)].ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if mass(a.exp()) <= mass(b.exp()) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let c4 = (0.5 * (lo + hi)).exp();
    Ok(GaussianFit {
        c3: constant_for(&kept, c4),
        c4,
        times: kept.iter().map(|p| p.t).collect(),
        dropped: dropped.iter().map(|p| p.t).collect(),
        min_excess,
        projected_max: kept.iter().map(|p| p.projected).collect(),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

pub fn exp_heat_gaussian(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(64);
    let control = spec.negative_control;
    let interval = |n: usize| build_interval_basis(1.0, if control { 3 } else { n / 2 + 1 }, n);
    let rect = |n: usize| {
        let k = if control { 3 } else { rectangle_modes_below(1.0, 1.0, (std::f64::consts::PI * n as f64 / 2.0).powi(2)) };
        build_rectangle_basis(1.0, 1.0, k, n, n)
    };
    let tail = if control { Some(0.0) } else { None };
    let cases = [
        ("interval", interval(n)?, interval(2 * n)?),
        ("rectangle", rect(n / 4)?, rect(n / 2)?),
    ];
    for (name, base, fine) in &cases {
        let h = base.grid().h();
        let [t0, t1] = spec.t_range.unwrap_or([h * h, 10.0]);
        let ts = log_grid(t0, t1, 16);
        let a = gaussian_fit(base, &ts, tail)?;
        let b = gaussian_fit(fine, &ts, tail)?;
        for (label, fit) in [("base", &a), ("fine", &b)] {
            for (&t, &m) in fit.times.iter().zip(&fit.projected_max) {
                r.point(ReportPoint::new(format!("{name}_{label}_projected_max"), t, m));
            }
            r.param(&format!("{name}_{label}"), serde_json::json!({"c3": fit.c3, "c4": fit.c4, "dropped": fit.dropped}));
            if !fit.dropped.is_empty() {
                r.note(format!("{name} {label}: {} time(s) dropped, truncation tail dominates", fit.dropped.len()));
            }
            r.check_ge(&format!("{name} {label}: min (K_t + tail)"), fit.min_excess, 0.0);
        }
        let vol = base.domain().volume();
        r.check_ge(&format!("{name}: C3 >= 1/|Omega|"), a.c3, 1.0 / vol);
        r.check_le(&format!("{name}: C3 drift under refinement"), rel(b.c3, a.c3), 0.2);
        r.check_le(&format!("{name}: C4 drift under refinement"), rel(b.c4, a.c4), 0.2);

        // Spectral identity for the projected semigroup.
        let l2 = base.eigenvalues()[1];
        let worst = ts.iter().map(|&t| rel(projected_heat_l2_norm(t, base), (-l2 * t).exp())).fold(0.0, f64::max);
        r.check_le(&format!("{name}: ||P e^(-tH)||_(2->2) vs exp(-lambda_2 t)"), worst, 1e-10);

        // Exponential rate of max |P K_t| for t >= 1.
        let (xs, ys): (Vec<f64>, Vec<f64>) = a
            .times
            .iter()
            .zip(&a.projected_max)
            .filter(|(t, m)| **t >= 1.0 && **m > 0.0)
            .map(|(&t, &m)| (t, m.ln()))
            .unzip();
        match fit_line(&xs, &ys) {
            Some(f) => {
                let mu = -f.slope;
                r.fits.insert(format!("{name}_projected_rate"), f);
                r.param(&format!("{name}_mu"), mu);
                r.check_ge(&format!("{name}: fitted mu / lambda_2"), mu / l2, 0.5);
            }
            None => r.inconclusive(format!("{name}: fewer than two times t >= 1 for the rate fit")),
        }
    }
    Ok(r)
}
