use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{random_coeffs, ExperimentSpec};
use crate::domains::{build_interval_basis, EigenBasis};
use crate::error::Result;
use crate::littlewood_paley::{make_partition, PartitionOfUnity, PartitionVariant};
use crate::norms::{default_range, decompose_coeffs, lq, BlockDecomposition, EstimateReport, ReportPoint};
use crate::spectral::{analyze, synthesize, SpectralCoeffs};

const INF: f64 = f64::INFINITY;

fn conj(p: f64) -> f64 {
    if p == 1.0 {
        INF
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `1/p`, finite for table keys.
fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn blocks(c: &SpectralCoeffs, pou: &PartitionOfUnity, basis: &EigenBasis) -> Result<BlockDecomposition> {
    let (j_min, j_max) = default_range(basis);
    decompose_coeffs(c, pou, basis, j_min, j_max)
}

/// Besov norm from a decomposition; the homogeneous one includes the
/// nonzero blocks below the table range.
fn bnorm(d: &BlockDecomposition, s: f64, p: f64, q: f64, homogeneous: bool) -> Result<f64> {
    let b = d.norms(p)?;
    Ok(if homogeneous {
        let (v, t) = b.homogeneous(s, q);
        lq([v, t], q)
    } else {
        b.inhomogeneous(s, q)
    })
}

fn lebesgue(c: &SpectralCoeffs, basis: &EigenBasis, p: f64) -> Result<f64> {
    synthesize(c, basis)?.lp_norm(p)
}

fn lift(c: &SpectralCoeffs, basis: &EigenBasis, power: f64) -> SpectralCoeffs {
    SpectralCoeffs(c.0.iter().zip(basis.eigenvalues()).map(|(v, l)| v * (1.0 + l).powf(power)).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

pub fn exp_partition_independence(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(256);
    let k = spec.k.unwrap_or(64);
    let samples = spec.samples_or(100);
    let std = make_partition(PartitionVariant::Standard);
    let other = make_partition(if spec.pou == PartitionVariant::Standard { PartitionVariant::Perturbed } else { spec.pou });
    let ss = [-1.0, 0.0, 0.5, 1.5];
    let ps = [1.0, 2.0, INF];
    let shift = if spec.negative_control { 2.0 } else { 0.0 };
    let mut worst = Vec::new();
    for (label, grid_n) in [("base", n), ("fine", 2 * n)] {
        let basis = build_interval_basis(1.0, k, grid_n)?;
        let mut fs: Vec<SpectralCoeffs> = (0..samples)
            .map(|i| random_coeffs(&basis, k, 0.0, &mut spec.rng(i as u64)))
            .collect();
        for m in [1, 5, 20, k - 1] {
            let mut c = vec![0.0; k];
            c[m] = 1.0;
            fs.push(SpectralCoeffs(c));
        }
        let per_f: Vec<BTreeMap<(u8, usize, usize, usize), f64>> = fs
            .par_iter()
            .map(|c| {
                let a = blocks(c, &std, &basis)?;
                let b = blocks(c, &other, &basis)?;
                let mut out = BTreeMap::new();
                for (si, &s) in ss.iter().enumerate() {
                    for (pi, &p) in ps.iter().enumerate() {
                        for (qi, &q) in ps.iter().enumerate() {
                            for hom in [false, true] {
                                let x = bnorm(&a, s, p, q, hom)?;
                                let y = bnorm(&b, s + shift, p, q, hom)?;
                                if x > 0.0 || y > 0.0 {
                                    out.insert((hom as u8, si, pi, qi), (x / y).max(y / x));
                                }
                            }
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut table: BTreeMap<(u8, usize, usize, usize), f64> = BTreeMap::new();
        for m in &per_f {
            for (key, v) in m {
                let e = table.entry(*key).or_insert(0.0);
                *e = e.max(*v);
            }
        }
        for (i, ((hom, si, pi, qi), v)) in table.iter().enumerate() {
            let series = format!("{label}_{}", if *hom == 1 { "homogeneous" } else { "inhomogeneous" });
            r.point(
                ReportPoint::new(series, i as f64, *v)
                    .with("s", ss[*si])
                    .with("inv_p", inv(ps[*pi]))
                    .with("inv_q", inv(ps[*qi])),
            );
        }
        let c = table.values().cloned().fold(1.0, f64::max);
        r.check_le(&format!("{label}: largest ratio between variants"), c, 3.0);
        worst.push(c);

        let one = SpectralCoeffs({
            let mut v = vec![0.0; k];
            v[0] = 1.0;
            v
        });
        let h = bnorm(&blocks(&one, &std, &basis)?, 0.5, 2.0, 2.0, true)?
            .max(bnorm(&blocks(&one, &other, &basis)?, 0.5, 2.0, 2.0, true)?);
        r.check_le(&format!("{label}: homogeneous norm of a constant"), h, 1e-12);
    }
    r.check_le("drift of the largest ratio under refinement", rel(worst[1], worst[0]), 0.1);
    r.param("samples", samples);
    Ok(r)
}

/// Exponents `(p; p1, p2; p3, p4)` with `1/p = 1/p1 + 1/p2 = 1/p3 + 1/p4`.
pub const LEIBNIZ_TUPLES: [[f64; 5]; 4] =
    [[2.0, 2.0, INF, INF, 2.0], [2.0, 4.0, 4.0, 4.0, 4.0], [1.0, 2.0, 2.0, 2.0, 2.0], [4.0, 4.0, INF, INF, 4.0]];

struct LeibnizConfig {
    label: &'static str,
    n: usize,
    k: usize,
    active: usize,
    pou: PartitionOfUnity,
}

type Key = (usize, usize, usize, u8);

/// Smooth times oscillating pairs, where the two terms of the right-hand
/// side differ most.
const HIGH_LOW_PAIRS: usize = 8;

fn high_low_pair(basis: &EigenBasis, active: usize, i: usize) -> (SpectralCoeffs, SpectralCoeffs) {
    let mut low = vec![0.0; basis.len()];
    low[0] = 1.0;
    low[1] = 0.5;
    let mut high = vec![0.0; basis.len()];
    high[active - 1 - i / 2] = 1.0;
    let (low, high) = (SpectralCoeffs(low), SpectralCoeffs(high));
    if i.is_multiple_of(2) {
        (low, high)
    } else {
        (high, low)
    }
}

fn leibniz_ratios(
    spec: &ExperimentSpec,
    cfg: &LeibnizConfig,
    samples: usize,
    one_term: bool,
) -> Result<(BTreeMap<Key, Vec<f64>>, usize)> {
    let basis = build_interval_basis(1.0, cfg.k, cfg.n)?;
    let ss = [0.5, 1.0, 1.5];
    let qs = [2.0, INF];
    let rows: Vec<Option<Vec<(Key, f64)>>> = (0..samples + HIGH_LOW_PAIRS)
        .into_par_iter()
        .map(|i| {
            let (mut f, mut g) = if i < samples {
                let mut rng = spec.rng(1000 + i as u64);
                (random_coeffs(&basis, cfg.active, 0.0, &mut rng), random_coeffs(&basis, cfg.active, 0.0, &mut rng))
            } else {
                high_low_pair(&basis, cfg.active, i - samples)
            };
            let fg_fn = synthesize(&f, &basis)?.mul(&synthesize(&g, &basis)?);
            let fg = analyze(&fg_fn, &basis)?;
            let kept = synthesize(&fg, &basis)?;
            let lost = fg_fn.sub(&kept).lp_norm(2.0)?.powi(2) / fg_fn.lp_norm(2.0)?.powi(2);
            if lost > 0.01 {
                return Ok(None);
            }
            let mut out = Vec::new();
            for hom in [false, true] {
                if hom {
                    f.0[0] = 0.0;
                    g.0[0] = 0.0;
                }
                let prod = analyze(&synthesize(&f, &basis)?.mul(&synthesize(&g, &basis)?), &basis)?;
                let (df, dg, dp) = (blocks(&f, &cfg.pou, &basis)?, blocks(&g, &cfg.pou, &basis)?, blocks(&prod, &cfg.pou, &basis)?);
                for (ti, t) in LEIBNIZ_TUPLES.iter().enumerate() {
                    let [p, p1, p2, p3, p4] = *t;
                    for (si, &s) in ss.iter().enumerate() {
                        for (qi, &q) in qs.iter().enumerate() {
                            let lhs = bnorm(&dp, s, p, q, hom)?;
                            let first = bnorm(&df, s, p1, q, hom)? * lebesgue(&g, &basis, p2)?;
                            let second = lebesgue(&f, &basis, p3)? * bnorm(&dg, s, p4, q, hom)?;
                            let rhs = if one_term { first } else { first + second };
                            out.push(((ti, si, qi, hom as u8), lhs / rhs));
                        }
                    }
                }
            }
            Ok(Some(out))
        })
        .collect::<Result<_>>()?;
    let mut table: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    let mut discarded = 0;
    for row in rows {
        match row {
            None => discarded += 1,
            Some(v) => {
                for (key, x) in v {
                    table.entry(key).or_default().push(x);
                }
            }
        }
    }
    Ok((table, discarded))
}

pub fn exp_leibniz(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(256);
    let samples = spec.samples_or(100);
    let std = make_partition(PartitionVariant::Standard);
    let other = make_partition(if spec.pou == PartitionVariant::Standard { PartitionVariant::Perturbed } else { spec.pou });
    // Factors use modes up to 32, so products stay inside 65 modes.
    let base = LeibnizConfig { label: "base", n, k: 65, active: 33, pou: std };
    let mut others = vec![
        LeibnizConfig { label: "fine", n: 2 * n, k: 65, active: 33, pou: std },
        LeibnizConfig { label: "variant", n, k: 65, active: 33, pou: other },
    ];
    if spec.negative_control {
        others = vec![LeibnizConfig { label: "fine_wide_band", n: 2 * n, k: 129, active: 65, pou: std }];
    }
    let (c_fit_table, d0) = leibniz_ratios(spec, &base, samples, spec.negative_control)?;
    let c_fit: BTreeMap<Key, f64> =
        c_fit_table.iter().map(|(k, v)| (*k, v.iter().cloned().fold(0.0, f64::max))).collect();
    for (i, (key, c)) in c_fit.iter().enumerate() {
        r.point(
            ReportPoint::new("base_constant", i as f64, *c)
                .with("tuple", key.0 as f64)
                .with("s", [0.5, 1.0, 1.5][key.1])
                .with("inv_q", [0.5, 0.0][key.2])
                .with("homogeneous", key.3 as f64),
        );
    }
    r.param("discarded_base", d0);
    let mut drift: f64 = 0.0;
    let mut excess: f64 = 0.0;
    for cfg in &others {
        let (t, d) = leibniz_ratios(spec, cfg, samples, spec.negative_control)?;
        r.param(&format!("discarded_{}", cfg.label), d);
        for (key, v) in &t {
            let c = v.iter().cloned().fold(0.0, f64::max);
            let fit = c_fit[key];
            drift = drift.max(rel(c, fit));
            excess = excess.max(c / fit);
            r.point(ReportPoint::new(format!("{}_constant", cfg.label), key.0 as f64, c).with("ratio_to_base", c / fit));
        }
    }
    r.check_le("largest relative change of C", drift, 0.25);
    r.check_le("largest sample ratio / fitted C", excess, 1.25);
    r.param("samples", samples);
    r.param("high_low_pairs", HIGH_LOW_PAIRS);
    Ok(r)
}

/// Per-sample ratio for one inequality `LHS <= C RHS`.
type Ratio = Box<dyn Fn(&SpectralCoeffs, &EigenBasis, &PartitionOfUnity) -> Result<f64> + Send + Sync>;

fn embedding_table(control: bool) -> Vec<(String, Ratio)> {
    let mut t: Vec<(String, Ratio)> = Vec::new();
    if control {
        t.push((
            "reversed: B^1_(2,2) <= C B^0_(2,2)".into(),
            Box::new(|c, b, pou| {
                let d = blocks(c, pou, b)?;
                Ok(bnorm(&d, 1.0, 2.0, 2.0, false)? / bnorm(&d, 0.0, 2.0, 2.0, false)?)
            }),
        ));
        return t;
    }
    t.push((
        "B^0_(2,2) <= C L^2".into(),
        Box::new(|c, b, pou| Ok(bnorm(&blocks(c, pou, b)?, 0.0, 2.0, 2.0, false)? / lebesgue(c, b, 2.0)?)),
    ));
    t.push((
        "L^2 <= C B^0_(2,2)".into(),
        Box::new(|c, b, pou| Ok(lebesgue(c, b, 2.0)? / bnorm(&blocks(c, pou, b)?, 0.0, 2.0, 2.0, false)?)),
    ));
    for s0 in [-1.0, 1.0] {
        for s in [0.0, 1.0] {
            for (p, q) in [(2.0, 2.0), (1.0, INF), (4.0, 2.0)] {
                t.push((
                    format!("lifting s0={s0}: (I+H)^(s0/2) f in B^({s}-s0)_({p},{q})"),
                    Box::new(move |c, b, pou| {
                        let lhs = bnorm(&blocks(&lift(c, b, s0 / 2.0), pou, b)?, s - s0, p, q, false)?;
                        Ok(lhs / bnorm(&blocks(c, pou, b)?, s, p, q, false)?)
                    }),
                ));
            }
        }
    }
    for eps in [0.5, 1.0] {
        for p in [1.0, 2.0, INF] {
            t.push((
                format!("eps-loss eps={eps}: B^0.5_({p},1) <= C B^(0.5+eps)_({p},inf)"),
                Box::new(move |c, b, pou| {
                    let d = blocks(c, pou, b)?;
                    Ok(bnorm(&d, 0.5, p, 1.0, false)? / bnorm(&d, 0.5 + eps, p, INF, false)?)
                }),
            ));
        }
    }
    for (rr, p) in [(1.0, 2.0), (2.0, INF), (1.0, INF)] {
        let gain = inv(rr) - inv(p);
        t.push((
            format!("B^({gain})_({rr},2) -> B^0_({p},2)"),
            Box::new(move |c, b, pou| {
                let d = blocks(c, pou, b)?;
                Ok(bnorm(&d, 0.0, p, 2.0, false)? / bnorm(&d, gain, rr, 2.0, false)?)
            }),
        ));
    }
    for p in [1.5, 2.0] {
        t.push((
            format!("L^{p} -> B^0_({p},2)"),
            Box::new(move |c, b, pou| Ok(bnorm(&blocks(c, pou, b)?, 0.0, p, 2.0, false)? / lebesgue(c, b, p)?)),
        ));
    }
    for p in [2.0, 4.0] {
        t.push((
            format!("B^0_({p},2) -> L^{p}"),
            Box::new(move |c, b, pou| Ok(lebesgue(c, b, p)? / bnorm(&blocks(c, pou, b)?, 0.0, p, 2.0, false)?)),
        ));
    }
    t
}

fn max_ratios(spec: &ExperimentSpec, table: &[(String, Ratio)], basis: &EigenBasis, samples: usize) -> Result<Vec<f64>> {
    let pou = make_partition(spec.pou);
    let per: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let c = random_coeffs(basis, basis.len(), 0.0, &mut spec.rng(2000 + i as u64));
            table.iter().map(|(_, f)| f(&c, basis, &pou)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..table.len()).map(|t| per.iter().map(|row| row[t]).fold(0.0, f64::max)).collect())
}

pub fn exp_embeddings(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(256);
    let k = spec.k.unwrap_or(64);
    let samples = spec.samples_or(100);
    let table = embedding_table(spec.negative_control);
    let base = max_ratios(spec, &table, &build_interval_basis(1.0, k, n)?, samples)?;
    let fine = max_ratios(spec, &table, &build_interval_basis(1.0, 2 * k, 2 * n)?, samples)?;
    for (i, ((name, _), (a, b))) in table.iter().zip(base.iter().zip(&fine)).enumerate() {
        r.point(ReportPoint::new("max_ratio", i as f64, *a).with("fine", *b));
        r.check_le(&format!("{name}: fine / base constant"), b / a, 1.1);
        if name.starts_with("eps-loss") {
            let eps: f64 = if name.contains("eps=0.5") { 0.5 } else { 1.0 };
            let bound = 1f64.max(1.0 / (2f64.powf(eps) - 1.0));
            r.check_le(&format!("{name}: geometric bound"), a.max(*b), bound * (1.0 + 1e-12));
        }
        if name.contains("B^0_(2,2) <= C L^2") || name.starts_with("L^2 <= C") {
            r.check_le(&format!("{name}: constant"), a.max(*b), 3.0);
        }
    }
    r.param("samples", samples);
    Ok(r)
}

pub fn exp_duality(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let mut r = EstimateReport::new(spec.id.name(), spec.seed);
    let n = spec.n.unwrap_or(256);
    let k = spec.k.unwrap_or(64);
    let samples = spec.samples_or(100);
    let pou = make_partition(spec.pou);
    let table: Vec<(f64, f64, f64)> = if spec.negative_control {
        vec![(1.0, 2.0, 2.0)]
    } else {
        vec![(0.0, 2.0, 2.0), (0.5, 1.0, 2.0), (-1.0, 2.0, 1.0), (1.0, 4.0, 1.5)]
    };
    let mut constants = Vec::new();
    for (label, grid_n, modes) in [("base", n, k), ("fine", 2 * n, 2 * k)] {
        let basis = build_interval_basis(1.0, modes, grid_n)?;
        let per: Vec<Vec<f64>> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = spec.rng(3000 + i as u64);
                let f = random_coeffs(&basis, modes, 0.0, &mut rng);
                let df = blocks(&f, &pou, &basis)?;
                table
                    .iter()
                    .map(|&(s, p, q)| {
                        // Even samples pair f with an independent g, odd ones
                        // with its lift, which nearly saturates the pairing.
                        let g = if i % 2 == 0 { random_coeffs(&basis, modes, 0.0, &mut rng.clone()) } else { lift(&f, &basis, s) };
                        let pairing: f64 = f.0.iter().zip(&g.0).map(|(a, b)| a * b).sum();
                        let dg = blocks(&g, &pou, &basis)?;
                        let (sf, sg) = if spec.negative_control { (-s, -s) } else { (s, -s) };
                        let rhs = bnorm(&df, sf, p, q, false)? * bnorm(&dg, sg, conj(p), conj(q), false)?;
                        Ok(pairing.abs() / rhs)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let c: Vec<f64> = (0..table.len()).map(|t| per.iter().map(|row| row[t]).fold(0.0, f64::max)).collect();
        for (i, v) in c.iter().enumerate() {
            let (s, p, q) = table[i];
            r.point(ReportPoint::new(label, i as f64, *v).with("s", s).with("inv_p", inv(p)).with("inv_q", inv(q)));
        }
        r.check_le(&format!("{label}: constants finite"), if c.iter().all(|v| v.is_finite()) { 0.0 } else { 1.0 }, 0.0);
        constants.push(c);

        if label == "base" {
            let mut e2 = vec![0.0; modes];
            e2[1] = 1.0;
            let e2 = SpectralCoeffs(e2);
            let d = blocks(&e2, &pou, &basis)?;
            let ratio = 1.0 / (bnorm(&d, 0.0, 2.0, 2.0, false)? * bnorm(&d, 0.0, 2.0, 2.0, false)?);
            r.check_le("f = g = e_2, s = 0, p = q = 2: ratio", ratio, 3.0);
            let mut f = random_coeffs(&basis, modes, 0.0, &mut spec.rng(4000));
            f.0[0] = 0.0;
            let ff = synthesize(&f, &basis)?;
            r.check_le("<f, 1> for mean-zero f, relative", ff.integral().abs() / ff.lp_norm(1.0)?, 1e-12);
            let g = random_coeffs(&basis, modes, 0.0, &mut spec.rng(4001));
            let (s, p, q) = (0.5, 2.0, 2.0);
            let ratio_of = |f: &SpectralCoeffs| -> Result<f64> {
                let pairing: f64 = f.0.iter().zip(&g.0).map(|(a, b)| a * b).sum();
                Ok(pairing.abs()
                    / (bnorm(&blocks(f, &pou, &basis)?, s, p, q, false)?
                        * bnorm(&blocks(&g, &pou, &basis)?, -s, p, q, false)?))
            };
            let doubled = SpectralCoeffs(f.0.iter().map(|v| 2.0 * v).collect());
            r.check_le("ratio change when f is doubled", rel(ratio_of(&doubled)?, ratio_of(&f)?), 1e-12);
        }
    }
    for (i, (a, b)) in constants[0].iter().zip(&constants[1]).enumerate() {
        let (s, p, q) = table[i];
        r.check_le(&format!("(s, p, q) = ({s}, {p}, {q}): fine / base constant"), b / a, 1.1);
    }
    r.param("samples", samples);
    Ok(r)
}
