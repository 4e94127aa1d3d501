use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ExperimentSpec;
use crate::domains::{build_interval_basis, EigenBasis};
use crate::error::Result;
use crate::littlewood_paley::make_partition;
use crate::norms::{fit_line, probe_lower_bound, triple_norm, CubePartition, EstimateReport, ReportPoint};
use crate::spectral::{multiplier_kernel, OperatorKernel, SymbolFn};

/// `max_{m'} sum_m ||chi_m A chi_{m'}||_{L^2 -> L^2}`, an upper bound for
/// the norm of `A` on `l^1(L^2)_theta`.
fn l1_l2_upper(a: &OperatorKernel, part: &CubePartition) -> f64 {
    let w = a.col_weights();
    part.cubes
        .par_iter()
        .map(|(_, cols)| {
            part.cubes
                .iter()
                .map(|(_, rows)| {
                    let b = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
                        let (ri, cj) = (rows[i], cols[j]);
                        w[ri].sqrt() * a.get(ri, cj) * w[cj].sqrt()
                    });
                    b.singular_values().max()
                })
                .sum::<f64>()
        })
        .reduce(|| 0.0, f64::max)
}

/// Probe lower bound on `l^1(L^2)_theta`: normalized cube indicators and
/// seeded random vectors supported in one cube.
fn l1_l2_lower(a: &OperatorKernel, part: &CubePartition, probes: usize, seed: u64) -> Result<f64> {
    let w = a.col_weights();
    let n = a.cols();
    let norm = |v: &[f64]| part.norm(w, v, 1.0, 2.0);
    let mut best: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trial = |f: Vec<f64>| -> Result<()> {
        let d = norm(&f)?;
        if d > 0.0 {
            best = best.max(norm(&a.apply(&f))? / d);
        }
        Ok(())
    };
    for (_, idx) in &part.cubes {
        let mut f = vec![0.0; n];
        idx.iter().for_each(|&i| f[i] = 1.0);
        trial(f)?;
    }
    for _ in 0..probes {
        let (_, idx) = &part.cubes[rng.gen_range(0..part.cubes.len())];
        let mut f = vec![0.0; n];
        idx.iter().for_each(|&i| f[i] = rng.gen_range(-1.0..1.0));
        trial(f)?;
    }
    Ok(best)
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<crate::norms::Fit> {
    fit_line(xs, &ys.iter().map(|v| v.log2()).collect::<Vec<_>>())
}

pub fn exp_amalgam(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(1024);
    let length = 16.0;
    let basis: EigenBasis = build_interval_basis(length, spec.k.unwrap_or(n / 2 + 1), n)?;
    let h = basis.grid().h();
    let [th0, th1] = spec.theta_range.unwrap_or([4.0 * h * h, 1.0]);
    let count = ((th1 / th0).log2().round() as usize + 1).max(2);
    let thetas = super::log_grid(th0, th1, count);
    let pou = make_partition(spec.pou);
    let coords = basis.grid().coords().to_vec();
    let xs: Vec<f64> = thetas.iter().map(|t| t.log2()).collect();

    // Resolvent from L^1 into l^1(L^q)_theta; exact through point masses.
    // The control violates beta > n/2 (1/p - 1/q).
    let (beta, q) = if spec.negative_control { (0.1, f64::INFINITY) } else { (1.0, 2.0) };
    let target = -0.5 * (1.0 - if q.is_infinite() { 0.0 } else { 1.0 / q });
    r.param("beta", beta);
    r.param("q", if q.is_infinite() { "inf".to_string() } else { q.to_string() });
    let res: Vec<f64> = thetas
        .par_iter()
        .map(|&theta| {
            let sym = SymbolFn::new("(theta H + 1)^-beta", move |l: f64| (theta * l + 1.0).powf(-beta));
            let k = multiplier_kernel(&sym, &basis)?;
            let part = CubePartition::new(basis.grid(), theta);
            let w = k.row_weights().to_vec();
            probe_lower_bound(&k, 1.0, &|v: &[f64]| part.norm(&w, v, 1.0, q), 0, spec.seed)
        })
        .collect::<Result<_>>()?;
    for (&x, &v) in xs.iter().zip(&res) {
        r.point(ReportPoint::new("resolvent_l1_to_amalgam", x, v));
    }
    if let Some(f) = slope(&xs, &res) {
        r.fit = Some(f);
        r.fits.insert("resolvent_l1_to_amalgam".into(), f);
        r.check_near("theta-slope of ||(theta H + 1)^-beta||_(L^1 -> l^1(L^q))", f.slope, target, 0.2);
    }
    if spec.negative_control {
        return Ok(r);
    }

    // Triple norm of psi(theta H) with alpha = 1, and its l^1(L^2) norm.
    let alpha = 1.0;
    let rows: Vec<(f64, f64, f64)> = thetas
        .par_iter()
        .map(|&theta| {
            let k = multiplier_kernel(&SymbolFn::low_pass(pou, theta, 0), &basis)?;
            let t = triple_norm(&k, alpha, theta, &coords, 1)?;
            let part = CubePartition::new(basis.grid(), theta);
            let up = l1_l2_upper(&k, &part);
            let lo = l1_l2_lower(&k, &part, 64, spec.seed)?;
            Ok((t, up, lo))
        })
        .collect::<Result<_>>()?;
    let mut gap: f64 = 0.0;
    for (&x, &(t, up, lo)) in xs.iter().zip(&rows) {
        r.point(ReportPoint::new("triple_norm", x, t));
        r.point(ReportPoint::new("l1_l2_bound", x, up).with("lower", lo));
        gap = gap.max(up / lo);
    }
    let triple: Vec<f64> = rows.iter().map(|x| x.0).collect();
    if let Some(f) = slope(&xs, &triple) {
        r.fits.insert("triple_norm".into(), f);
        r.check_near("theta-slope of the triple norm", f.slope, alpha / 2.0, 0.2);
    }
    let upper: Vec<f64> = rows.iter().map(|x| x.1).collect();
    if let Some(f) = slope(&xs, &upper) {
        r.fits.insert("l1_l2_bound".into(), f);
        r.check_near("theta-slope of ||psi(theta H)||_(l^1(L^2))", f.slope, 0.0, 0.2);
    }
    r.param("l1_l2_gap", gap);
    if gap > 10.0 {
        r.inconclusive(format!("upper / lower gap {gap:.2} exceeds 10"));
    }
    Ok(r)
}
