use std::f64::consts::PI;

use rayon::prelude::*;

use super::{log_grid, random_coeffs, ExperimentSpec};
use crate::domains::{build_interval_basis, build_rectangle_basis, EigenBasis};
use crate::error::Result;
use crate::littlewood_paley::{check_partition, make_partition, PartitionVariant};
use crate::norms::{default_range, decompose_coeffs, EstimateReport, ReportPoint};
use crate::spectral::{
    apply_multiplier, heat, project_p, projected_heat_l2_norm, resolvent_gamma, synthesize, GammaQuadrature,
    GridFunction, SymbolFn,
};

pub fn exp_partition(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(512);
    let basis = build_interval_basis(1.0, spec.k.unwrap_or(64), n)?;
    let top = basis.lambda_max();
    let count = spec.samples_or(10_000);
    let samples = log_grid(1e-6, top, count);
    r.param("lambda_range", [1e-6, top]);
    r.param("count", count);
    let variants: Vec<PartitionVariant> = if spec.negative_control {
        vec![PartitionVariant::Broken]
    } else if spec.pou == PartitionVariant::Standard {
        vec![PartitionVariant::Standard, PartitionVariant::Perturbed]
    } else {
        vec![spec.pou]
    };
    for v in variants {
        let pou = make_partition(v);
        let c = check_partition(&pou, &samples);
        for &l in samples.iter().step_by((count / 100).max(1)) {
            r.point(
                ReportPoint::new(format!("{v}"), l, (pou.partition_sum(l) - 1.0).abs())
                    .with("psi_deviation", (pou.inhomogeneous_sum(l) - 1.0).abs()),
            );
        }
        let tol = crate::littlewood_paley::PARTITION_TOLERANCE;
        r.check_le(&format!("{v}: sum phi_j - 1"), c.max_sum_deviation, tol);
        r.check_le(&format!("{v}: psi + sum_(j>=1) phi_j - 1"), c.max_psi_deviation, tol);
        r.check_le(&format!("{v}: Phi_j phi_j - phi_j"), c.max_paley_deviation, tol);
        r.check_le(&format!("{v}: phi_0 outside [1/2, 2]"), c.support_violation.map_or(0.0, |_| 1.0), 0.0);
        r.check_le(&format!("{v}: negative phi_0 values"), c.negative_value.map_or(0.0, |_| 1.0), 0.0);
    }
    Ok(r)
}

fn l2(basis: &EigenBasis, v: &[f64]) -> f64 {
    basis.grid().inner(v, v).sqrt()
}

struct Residuals {
    inhom: f64,
    hom: f64,
    hom_vs_pf: f64,
    mean_gap: f64,
}

fn reconstruct(basis: &EigenBasis, c: &crate::spectral::SpectralCoeffs, spec: &ExperimentSpec) -> Result<Residuals> {
    let pou = make_partition(spec.pou);
    let (j_min, j_max) = default_range(basis);
    let f = synthesize(c, basis)?;
    let d = decompose_coeffs(c, &pou, basis, j_min, j_max)?;
    // The control drops the top block.
    let top = if spec.negative_control { d.blocks.len() - 1 } else { d.blocks.len() };
    let n = f.values().len();
    let mut inhom = d.psi.clone();
    let mut hom = vec![0.0; n];
    for (idx, b) in d.blocks.iter().enumerate().take(top) {
        let j = j_min + idx as i32;
        for i in 0..n {
            if j >= 1 {
                inhom[i] += b[i];
            }
            hom[i] += b[i];
        }
    }
    for (_, b) in &d.below {
        hom.iter_mut().zip(b).for_each(|(h, v)| *h += v);
    }
    let fv = f.values();
    let norm = l2(basis, fv);
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let pf = project_p(&f);
    let hom_res = l2(basis, &diff(fv, &hom)) / norm;
    let mean_part = f.mean().abs() * basis.grid().total_weight().sqrt() / norm;
    Ok(Residuals {
        inhom: l2(basis, &diff(fv, &inhom)) / norm,
        hom: hom_res,
        hom_vs_pf: l2(basis, &diff(pf.values(), &hom)) / norm,
        mean_gap: (hom_res - mean_part).abs(),
    })
}

pub fn exp_reconstruction(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let samples = spec.samples_or(100);
    let (n, k) = (spec.n.unwrap_or(512), spec.k.unwrap_or(64));
    let cases = [
        ("interval", build_interval_basis(1.0, k, n)?),
        ("rectangle", build_rectangle_basis(1.0, 1.0, 200, 32, 32)?),
    ];
    let tol = 1e-8;
    for (stream, (name, basis)) in cases.iter().enumerate() {
        let results: Vec<Result<(Residuals, Residuals)>> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = spec.rng(((stream as u64) << 32) | i as u64);
                let mut c = random_coeffs(basis, basis.len(), 0.0, &mut rng);
                let with_mean = reconstruct(basis, &c, spec)?;
                c.0[0] = 0.0;
                let zero_mean = reconstruct(basis, &c, spec)?;
                Ok((with_mean, zero_mean))
            })
            .collect();
        let mut worst = [0.0_f64; 4];
        for (i, res) in results.into_iter().enumerate() {
            let (a, b) = res?;
            r.point(ReportPoint::new(format!("{name}_inhomogeneous"), i as f64, a.inhom));
            r.point(ReportPoint::new(format!("{name}_homogeneous_mean_zero"), i as f64, b.hom));
            worst[0] = worst[0].max(a.inhom);
            worst[1] = worst[1].max(b.hom);
            worst[2] = worst[2].max(a.hom_vs_pf);
            worst[3] = worst[3].max(a.mean_gap);
        }
        r.check_le(&format!("{name}: inhomogeneous residual"), worst[0], tol);
        r.check_le(&format!("{name}: homogeneous residual, mean zero"), worst[1], tol);
        r.check_le(&format!("{name}: homogeneous reconstruction - P f"), worst[2], tol);
        r.check_le(&format!("{name}: homogeneous residual - |mean| ||1||_2 / ||f||_2"), worst[3], tol);
    }
    r.param("samples", samples);
    Ok(r)
}

pub fn exp_projected_semigroup(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let (n, k) = (spec.n.unwrap_or(512), spec.k.unwrap_or(64));
    let [lo, hi] = spec.t_range.unwrap_or([1e-2, 10.0]);
    let ts = log_grid(lo, hi, spec.samples_or(20));
    let cases = [
        ("interval", build_interval_basis(PI, k, n)?),
        ("rectangle", build_rectangle_basis(PI, 2.0 * PI, 100, 32, 64)?),
    ];
    for (name, basis) in &cases {
        let l2_gap = basis.eigenvalues()[1];
        let e2 = GridFunction::new(basis.grid_arc().clone(), basis.mode(1).into_owned())?;
        let mut worst_spec: f64 = 0.0;
        let mut worst_probe: f64 = 0.0;
        for &t in &ts {
            let want = (-l2_gap * t).exp();
            let (spectral, probe) = if spec.negative_control {
                // Without P the zero mode survives.
                let one = GridFunction::constant(basis.grid_arc().clone(), 1.0);
                let h1 = heat(t, &one, basis)?;
                (1.0, h1.lp_norm(2.0)? / one.lp_norm(2.0)?)
            } else {
                let h = project_p(&heat(t, &e2, basis)?);
                (projected_heat_l2_norm(t, basis), h.lp_norm(2.0)? / e2.lp_norm(2.0)?)
            };
            let es = (spectral - want).abs() / want;
            let ep = (probe - want).abs() / want;
            worst_spec = worst_spec.max(es);
            worst_probe = worst_probe.max(ep);
            r.point(ReportPoint::new(name.to_string(), t, spectral).with("target", want).with("probe", probe));
        }
        r.check_le(&format!("{name}: spectral norm vs exp(-lambda_2 t), relative"), worst_spec, 1e-10);
        r.check_le(&format!("{name}: ||P e^(-tH) e_2|| vs exp(-lambda_2 t), relative"), worst_probe, 1e-10);
    }
    Ok(r)
}

pub const GAMMA_PARAMS: [(f64, f64); 12] = [
    (0.5, 0.5),
    (0.5, 1.0),
    (0.5, 2.0),
    (0.75, 0.5),
    (0.75, 1.0),
    (0.75, 2.0),
    (1.0, 0.5),
    (1.0, 1.0),
    (1.0, 2.0),
    (2.0, 0.5),
    (2.0, 1.0),
    (2.0, 2.0),
];

pub fn exp_resolvent_gamma(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let basis = build_interval_basis(PI, spec.k.unwrap_or(64), spec.n.unwrap_or(512))?;
    let mut rng = spec.rng(0);
    let f = synthesize(&random_coeffs(&basis, basis.len(), 0.0, &mut rng), &basis)?;
    let quad = if spec.negative_control {
        GammaQuadrature { nodes: 20, tolerance: f64::INFINITY, ..Default::default() }
    } else {
        GammaQuadrature::default()
    };
    r.param("nodes", quad.nodes);
    let results: Vec<Result<(f64, f64)>> = GAMMA_PARAMS
        .par_iter()
        .map(|&(beta, m)| {
            let direct = apply_multiplier(&SymbolFn::resolvent(beta, m), &f, &basis)?;
            let g = resolvent_gamma(beta, m, &f, &basis, &quad)?;
            let err = g.value.sub(&direct).lp_norm(2.0)? / direct.lp_norm(2.0)?;
            Ok((err, g.error_estimate))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (i, res) in results.into_iter().enumerate() {
        let (err, est) = res?;
        let (beta, m) = GAMMA_PARAMS[i];
        r.point(ReportPoint::new(format!("M={m}"), beta, err).with("error_estimate", est));
        worst = worst.max(err);
    }
    r.check_le("relative L2 error vs direct multiplier", worst, 1e-6);
    Ok(r)
}
