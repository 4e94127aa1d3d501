use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use nbesov::domains::{build_interval_basis, build_rectangle_basis};
use nbesov::littlewood_paley::{make_partition, PartitionOfUnity, PartitionVariant};
use nbesov::norms::{
    amalgam_norm, besov_hom, besov_inhom, lebesgue, AmalgamParams, BesovParams,
};
use nbesov::spectral::{apply_multiplier, endpoint_norms, heat, multiplier_kernel, project_p, synthesize};
use nbesov::{EigenBasis, GridFunction, SpectralCoeffs, SymbolFn};

fn interval() -> &'static EigenBasis {
    static B: OnceLock<EigenBasis> = OnceLock::new();
    B.get_or_init(|| build_interval_basis(PI, 33, 128).unwrap())
}

fn rectangle() -> &'static EigenBasis {
    static B: OnceLock<EigenBasis> = OnceLock::new();
    B.get_or_init(|| build_rectangle_basis(1.0, 2.0, 60, 16, 32).unwrap())
}

fn std_pou() -> PartitionOfUnity {
    make_partition(PartitionVariant::Standard)
}

fn function(basis: &EigenBasis, c: &[f64]) -> GridFunction {
    let mut v = vec![0.0; basis.len()];
    v[..c.len().min(basis.len())].copy_from_slice(&c[..c.len().min(basis.len())]);
    synthesize(&SpectralCoeffs(v), basis).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 33)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.0, 1.5, 2.0, 4.0, f64::INFINITY])
}

fn conj(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn l2_dist(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).lp_norm(2.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_weights_sum_to_volume(l in 0.2..10.0f64, lx in 0.2..5.0f64, ly in 0.2..5.0f64, n in 8usize..200) {
        let b = build_interval_basis(l, 4, n).unwrap();
        prop_assert!((b.grid().total_weight() / l - 1.0).abs() < 1e-12);
        let r = build_rectangle_basis(lx, ly, 4, 8, 8).unwrap();
        prop_assert!((r.grid().total_weight() / (lx * ly) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_is_ordered_with_simple_zero(l in 0.5..5.0f64, n in 16usize..128) {
        let b = build_interval_basis(l, n / 2 + 1, n).unwrap();
        let ev = b.eigenvalues();
        prop_assert!(ev[0].abs() < 1e-12);
        prop_assert!(ev[1] > 0.0);
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(b.gram_deviation() < 1e-8);
    }

    #[test]
    fn holder(a in coeffs(), b in coeffs(), p in prop::sample::select(vec![1.0, 2.0, 4.0, f64::INFINITY])) {
        let (f, g) = (function(interval(), &a), function(interval(), &b));
        let lhs = f.mul(&g).lp_norm(1.0).unwrap();
        let rhs = f.lp_norm(p).unwrap() * g.lp_norm(conj(p)).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn partition_identities(l in 1e-6..1e6f64, perturbed in any::<bool>()) {
        let pou = make_partition(if perturbed { PartitionVariant::Perturbed } else { PartitionVariant::Standard });
        let sum: f64 = (-30..=30).map(|j| pou.phi_j(j, l)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let inhom = pou.psi(l * l) + (1..=30).map(|j| pou.phi_j(j, l)).sum::<f64>();
        prop_assert!((inhom - 1.0).abs() < 1e-12);
        let nonzero: Vec<i32> = (-30..=30).filter(|&j| pou.phi_j(j, l) != 0.0).collect();
        prop_assert!(nonzero.len() <= 2);
        if nonzero.len() == 2 {
            prop_assert_eq!(nonzero[1], nonzero[0] + 1);
        }
        for j in -30..=30 {
            let p = pou.phi_j(j, l);
            prop_assert!(p >= 0.0);
            prop_assert!((pou.big_phi_j(j, l) * p - p).abs() < 1e-14);
        }
        let p0 = pou.phi0(l);
        prop_assert!(p0 == 0.0 || (0.5..=2.0).contains(&l));
    }

    #[test]
    fn semigroup_law(a in coeffs(), s in 1e-3..2.0f64, t in 1e-3..2.0f64) {
        let b = interval();
        let f = function(b, &a);
        let two = heat(t, &heat(s, &f, b).unwrap(), b).unwrap();
        let one = heat(t + s, &f, b).unwrap();
        prop_assert!(l2_dist(&two, &one) < 1e-10);
    }

    #[test]
    fn multiplier_algebra_and_self_adjointness(a in coeffs(), c in coeffs(), beta in 0.1..2.0f64, t in 1e-3..1.0f64) {
        let b = interval();
        let (f, g) = (function(b, &a), function(b, &c));
        let (phi, eta) = (SymbolFn::resolvent(beta, 1.0), SymbolFn::heat(t));
        let nested = apply_multiplier(&phi, &apply_multiplier(&eta, &f, b).unwrap(), b).unwrap();
        let product = apply_multiplier(&phi.times(&eta), &f, b).unwrap();
        prop_assert!(l2_dist(&nested, &product) < 1e-10);
        let lhs = apply_multiplier(&phi, &f, b).unwrap().inner(&g);
        let rhs = f.inner(&apply_multiplier(&phi, &g, b).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn projected_heat_contracts(a in coeffs(), t in 1e-3..5.0f64) {
        let b = rectangle();
        let f = function(b, &a);
        let l2 = b.eigenvalues()[1];
        let pf = project_p(&heat(t, &f, b).unwrap());
        prop_assert!(pf.lp_norm(2.0).unwrap() <= (-l2 * t).exp() * f.lp_norm(2.0).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn norms_are_homogeneous(a in coeffs(), c in -5.0..5.0f64, s in -1.0..2.0f64, p in exponent(), q in exponent()) {
        let b = interval();
        let pou = std_pou();
        let f = function(b, &a);
        let cf = f.scale(c);
        let pr = BesovParams::for_basis(b, s, p, q);
        let close = |x: f64, y: f64| (x - c.abs() * y).abs() <= 1e-12 * (1.0 + x.abs());
        prop_assert!(close(besov_inhom(&cf, &pr, &pou, b).unwrap(), besov_inhom(&f, &pr, &pou, b).unwrap()));
        prop_assert!(close(besov_hom(&cf, &pr, &pou, b).unwrap().value, besov_hom(&f, &pr, &pou, b).unwrap().value));
        prop_assert!(close(lebesgue(&cf, p).unwrap(), lebesgue(&f, p).unwrap()));
        let am = AmalgamParams { p, q, theta: 0.25 };
        prop_assert!(close(amalgam_norm(&cf, &am).unwrap(), amalgam_norm(&f, &am).unwrap()));
    }

    #[test]
    fn triangle_inequality(a in coeffs(), c in coeffs(), s in -1.0..2.0f64, p in exponent(), q in exponent()) {
        let b = interval();
        let pou = std_pou();
        let (f, g) = (function(b, &a), function(b, &c));
        let fg = f.add(&g);
        let pr = BesovParams::for_basis(b, s, p, q);
        let tri = |x: f64, y: f64, z: f64| x <= (y + z) * (1.0 + 1e-12);
        prop_assert!(tri(
            besov_inhom(&fg, &pr, &pou, b).unwrap(),
            besov_inhom(&f, &pr, &pou, b).unwrap(),
            besov_inhom(&g, &pr, &pou, b).unwrap()
        ));
        prop_assert!(tri(
            besov_hom(&fg, &pr, &pou, b).unwrap().value,
            besov_hom(&f, &pr, &pou, b).unwrap().value,
            besov_hom(&g, &pr, &pou, b).unwrap().value
        ));
        let am = AmalgamParams { p, q, theta: 0.25 };
        prop_assert!(tri(amalgam_norm(&fg, &am).unwrap(), amalgam_norm(&f, &am).unwrap(), amalgam_norm(&g, &am).unwrap()));
    }

    #[test]
    fn homogeneous_norm_ignores_constants(a in coeffs(), k in -20.0..20.0f64, s in -1.0..2.0f64, p in exponent(), q in exponent()) {
        let b = rectangle();
        let pou = std_pou();
        let f = function(b, &a);
        let shifted = f.map(|v| v + k);
        let pr = BesovParams::for_basis(b, s, p, q);
        let (x, y) = (besov_hom(&f, &pr, &pou, b).unwrap().value, besov_hom(&shifted, &pr, &pou, b).unwrap().value);
        prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x));
    }

    #[test]
    fn besov_norms_decrease_in_q(a in coeffs(), s in -1.0..2.0f64, p in exponent(), q0 in 1.0..4.0f64, dq in 0.0..4.0f64) {
        let b = interval();
        let pou = std_pou();
        let f = function(b, &a);
        for q in [q0 + dq, f64::INFINITY] {
            let small = BesovParams::for_basis(b, s, p, q0);
            let big = BesovParams::for_basis(b, s, p, q);
            prop_assert!(besov_inhom(&f, &big, &pou, b).unwrap() <= besov_inhom(&f, &small, &pou, b).unwrap() * (1.0 + 1e-12));
            prop_assert!(besov_hom(&f, &big, &pou, b).unwrap().value <= besov_hom(&f, &small, &pou, b).unwrap().value * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn endpoint_norms_interpolate(t in 1e-3..1.0f64, beta in 0.2..2.0f64, j in 0i32..4, which in 0usize..3) {
        let b = interval();
        let sym = match which {
            0 => SymbolFn::heat(t),
            1 => SymbolFn::resolvent(beta, 1.0),
            _ => SymbolFn::block(std_pou(), j, 0.5),
        };
        let e = endpoint_norms(&multiplier_kernel(&sym, b).unwrap()).unwrap();
        prop_assert!(e.l2_l2 <= (e.l1_l1 * e.linf_linf).sqrt() * (1.0 + 1e-8));
    }
}

/// `||e^(-tH)||_(2 -> inf) t^(n/4)`, maximized over `t <= 1`, is a single
/// constant that survives grid refinement.
#[test]
fn heat_l2_to_linf_constant_is_stable() {
    let constant = |n: usize| {
        let b = build_interval_basis(1.0, n / 2 + 1, n).unwrap();
        let h = b.grid().h();
        nbesov::littlewood_paley::log_samples(4.0 * h * h, 1.0, 24)
            .into_iter()
            .map(|t| {
                let phi: Vec<f64> = b.eigenvalues().iter().map(|l| (-2.0 * t * l).exp()).collect();
                let sup = b.weighted_square_sum(&phi).into_iter().fold(0.0, f64::max).sqrt();
                sup * t.powf(0.25)
            })
            .fold(0.0, f64::max)
    };
    let (c1, c2) = (constant(128), constant(256));
    assert!((c2 / c1 - 1.0).abs() < 0.2, "{c1} {c2}");
}
