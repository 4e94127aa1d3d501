//! Dyadic partition of unity `{psi} U {phi_j}` built from a smooth cutoff.
//!
//! With `chi` smooth, `chi = 1` on `[0, a]` and `chi = 0` on `[2, inf)`, the
//! bump is `phi_0(l) = chi(l) - chi(2 l)` and the low-frequency cap is
//! `psi(m) = chi(sqrt(m))`. Both partition identities telescope exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionVariant {
    /// `chi = 1` on `[0, 1]`.
    Standard,
    /// `chi = 1` on `[0, 1.2]`; admissible, different transition region.
    Perturbed,
    /// `chi = 1` on `[0, 0.8]`, so `supp phi_0 = [0.4, 2]`. Negative control.
    Broken,
}

impl std::str::FromStr for PartitionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PartitionVariant::Standard),
            "perturbed" => Ok(PartitionVariant::Perturbed),
            "broken" => Ok(PartitionVariant::Broken),
            _ => Err(Error::InvalidParameter(format!("unknown partition variant '{s}'"))),
        }
    }
}

impl std::fmt::Display for PartitionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PartitionVariant::Standard => "standard",
            PartitionVariant::Perturbed => "perturbed",
            PartitionVariant::Broken => "broken",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOfUnity {
    variant: PartitionVariant,
    plateau: f64,
    cutoff: f64,
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (`x <= 0`) to 1 (`x >= 1`).
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = flat_exp(x);
    let b = flat_exp(1.0 - x);
    a / (a + b)
}

pub fn make_partition(variant: PartitionVariant) -> PartitionOfUnity {
    let plateau = match variant {
        PartitionVariant::Standard => 1.0,
        PartitionVariant::Perturbed => 1.2,
        PartitionVariant::Broken => 0.8,
    };
    PartitionOfUnity { variant, plateau, cutoff: 2.0 }
}

impl PartitionOfUnity {
    pub fn variant(&self) -> PartitionVariant {
        self.variant
    }

    /// The underlying cutoff `chi`.
    pub fn chi(&self, l: f64) -> f64 {
        if l <= self.plateau {
            1.0
        } else if l >= self.cutoff {
            0.0
        } else {
            1.0 - smooth_step((l - self.plateau) / (self.cutoff - self.plateau))
        }
    }

    pub fn phi0(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        self.chi(l) - self.chi(2.0 * l)
    }

    /// `phi_j(l) = phi_0(2^-j l)`.
    pub fn phi_j(&self, j: i32, l: f64) -> f64 {
        self.phi0(l * 2f64.powi(-j))
    }

    /// `Phi_j = phi_{j-1} + phi_j + phi_{j+1}`.
    pub fn big_phi_j(&self, j: i32, l: f64) -> f64 {
        self.phi_j(j - 1, l) + self.phi_j(j, l) + self.phi_j(j + 1, l)
    }

    /// Low-frequency cap, a function of `mu = lambda^2`.
    pub fn psi(&self, mu: f64) -> f64 {
        if mu < 0.0 {
            return self.chi(0.0);
        }
        self.chi(mu.sqrt())
    }

    /// Block indices `j` whose bump can be nonzero at `l > 0`.
    pub fn active_blocks(l: f64) -> std::ops::RangeInclusive<i32> {
        if l <= 0.0 || !l.is_finite() {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let c = l.log2().floor() as i32;
        (c - 2)..=(c + 2)
    }

    /// `sum_{j in Z} phi_j(l)`.
    pub fn partition_sum(&self, l: f64) -> f64 {
        Self::active_blocks(l).map(|j| self.phi_j(j, l)).sum()
    }

    /// `psi(l^2) + sum_{j >= 1} phi_j(l)`.
    pub fn inhomogeneous_sum(&self, l: f64) -> f64 {
        let top = if l > 0.0 { l.log2().ceil() as i32 + 2 } else { 1 };
        self.psi(l * l) + (1..=top.max(1)).map(|j| self.phi_j(j, l)).sum::<f64>()
    }

    /// Largest `|phi_0''|` estimated by centered second differences on a
    /// `1e-4` grid over the transition region.
    pub fn second_difference_bound(&self) -> f64 {
        let d = 1e-4;
        let mut m: f64 = 0.0;
        let mut x = 0.3;
        while x < 2.2 {
            let dd = (self.phi0(x + d) - 2.0 * self.phi0(x) + self.phi0(x - d)) / (d * d);
            m = m.max(dd.abs());
            x += d;
        }
        m
    }
}

/// Result of validating both partition identities on a sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionCheck {
    pub variant: PartitionVariant,
    pub samples: usize,
    pub max_sum_deviation: f64,
    pub worst_sum_lambda: f64,
    pub max_psi_deviation: f64,
    pub worst_psi_lambda: f64,
    pub max_paley_deviation: f64,
    /// First sample outside `[1/2, 2]` where `phi_0` is nonzero.
    pub support_violation: Option<f64>,
    pub negative_value: Option<f64>,
    pub pass: bool,
}

pub const PARTITION_TOLERANCE: f64 = 1e-10;

/// `n` log-spaced samples in `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn check_partition(pou: &PartitionOfUnity, samples: &[f64]) -> PartitionCheck {
    let mut out = PartitionCheck {
        variant: pou.variant(),
        samples: samples.len(),
        max_sum_deviation: 0.0,
        worst_sum_lambda: f64::NAN,
        max_psi_deviation: 0.0,
        worst_psi_lambda: f64::NAN,
        max_paley_deviation: 0.0,
        support_violation: None,
        negative_value: None,
        pass: true,
    };
    for &l in samples {
        let d = (pou.partition_sum(l) - 1.0).abs();
        if d > out.max_sum_deviation || out.worst_sum_lambda.is_nan() {
            out.max_sum_deviation = d.max(out.max_sum_deviation);
            out.worst_sum_lambda = l;
        }
        let d = (pou.inhomogeneous_sum(l) - 1.0).abs();
        if d > out.max_psi_deviation || out.worst_psi_lambda.is_nan() {
            out.max_psi_deviation = d.max(out.max_psi_deviation);
            out.worst_psi_lambda = l;
        }
        for j in PartitionOfUnity::active_blocks(l) {
            let p = pou.phi_j(j, l);
            out.max_paley_deviation = out.max_paley_deviation.max((pou.big_phi_j(j, l) * p - p).abs());
        }
        let v = pou.phi0(l);
        if v != 0.0 && !(0.5..=2.0).contains(&l) && out.support_violation.is_none() {
            out.support_violation = Some(l);
        }
        if v < 0.0 && out.negative_value.is_none() {
            out.negative_value = Some(l);
        }
    }
    out.pass = out.max_sum_deviation < PARTITION_TOLERANCE
        && out.max_psi_deviation < PARTITION_TOLERANCE
        && out.max_paley_deviation < PARTITION_TOLERANCE
        && out.support_violation.is_none()
        && out.negative_value.is_none();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let p = make_partition(PartitionVariant::Standard);
        assert_eq!(p.partition_sum(1.0), 1.0);
        assert_eq!(p.phi0(0.4), 0.0);
        assert_eq!(p.phi0(2.1), 0.0);
        assert_eq!(p.psi(0.0), 1.0);
        assert_eq!(p.phi_j(3, 8.0), p.phi0(1.0));
        assert_eq!(p.phi_j(-2, 1.0), 0.0);
        let s: f64 = (-20..=20).map(|j| p.phi_j(j, 0.37)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn both_admissible_variants_pass() {
        let samples = log_samples(1e-6, 1e6, 10_000);
        for v in [PartitionVariant::Standard, PartitionVariant::Perturbed] {
            let r = check_partition(&make_partition(v), &samples);
            assert!(r.pass, "{r:?}");
            assert!(r.max_sum_deviation < 1e-12 && r.max_psi_deviation < 1e-12);
            assert!(r.max_paley_deviation < 1e-14);
        }
    }

    #[test]
    fn broken_variant_is_located() {
        let r = check_partition(&make_partition(PartitionVariant::Broken), &log_samples(1e-6, 1e4, 10_000));
        assert!(!r.pass);
        let at = r.support_violation.unwrap();
        assert!((0.4..0.5).contains(&at), "{at}");
    }

    #[test]
    fn at_most_two_consecutive_blocks_and_bounded_curvature() {
        let p = make_partition(PartitionVariant::Standard);
        for l in log_samples(1e-3, 1e3, 2000) {
            let active: Vec<i32> = PartitionOfUnity::active_blocks(l).filter(|&j| p.phi_j(j, l) != 0.0).collect();
            assert!(active.len() <= 2);
            if active.len() == 2 {
                assert_eq!(active[1], active[0] + 1);
            }
        }
        let b = p.second_difference_bound();
        assert!(b.is_finite() && b < 1e3, "{b}");
    }
}
