//! Numerical experiments, one per quantitative estimate, each ending in a
//! pass/fail verdict against tolerances fixed before the run.

mod amalgam;
mod basic;
mod heat;
mod inequalities;
mod moments;
mod scaling;

pub use amalgam::exp_amalgam;
pub use basic::{exp_partition, exp_projected_semigroup, exp_reconstruction, exp_resolvent_gamma};
pub use heat::{exp_heat_gaussian, gaussian_fit, GaussianFit};
pub use inequalities::{exp_duality, exp_embeddings, exp_leibniz, exp_partition_independence};
pub use moments::{exp_moment_decay, moment_block_norms, MomentGrid};
pub use scaling::{exp_gradient, exp_low_freq_decay, exp_multiplier_scaling, low_freq_rate};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::EigenBasis;
use crate::error::{Error, Result};
use crate::littlewood_paley::PartitionVariant;
use crate::norms::EstimateReport;
use crate::spectral::SpectralCoeffs;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "exp_partition")]
    Partition,
    #[serde(rename = "exp_reconstruction")]
    Reconstruction,
    #[serde(rename = "exp_projected_semigroup")]
    ProjectedSemigroup,
    #[serde(rename = "exp_multiplier_scaling")]
    MultiplierScaling,
    #[serde(rename = "exp_low_freq_decay")]
    LowFreqDecay,
    #[serde(rename = "exp_heat_gaussian")]
    HeatGaussian,
    #[serde(rename = "exp_gradient")]
    Gradient,
    #[serde(rename = "exp_partition_independence")]
    PartitionIndependence,
    #[serde(rename = "exp_leibniz")]
    Leibniz,
    #[serde(rename = "exp_amalgam")]
    Amalgam,
    #[serde(rename = "exp_moment_decay")]
    MomentDecay,
    #[serde(rename = "exp_resolvent_gamma")]
    ResolventGamma,
    #[serde(rename = "exp_embeddings")]
    Embeddings,
    #[serde(rename = "exp_duality")]
    Duality,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 14] = [
        ExperimentId::Partition,
        ExperimentId::Reconstruction,
        ExperimentId::ProjectedSemigroup,
        ExperimentId::MultiplierScaling,
        ExperimentId::LowFreqDecay,
        ExperimentId::HeatGaussian,
        ExperimentId::Gradient,
        ExperimentId::PartitionIndependence,
        ExperimentId::Leibniz,
        ExperimentId::Amalgam,
        ExperimentId::MomentDecay,
        ExperimentId::ResolventGamma,
        ExperimentId::Embeddings,
        ExperimentId::Duality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Partition => "exp_partition",
            ExperimentId::Reconstruction => "exp_reconstruction",
            ExperimentId::ProjectedSemigroup => "exp_projected_semigroup",
            ExperimentId::MultiplierScaling => "exp_multiplier_scaling",
            ExperimentId::LowFreqDecay => "exp_low_freq_decay",
            ExperimentId::HeatGaussian => "exp_heat_gaussian",
            ExperimentId::Gradient => "exp_gradient",
            ExperimentId::PartitionIndependence => "exp_partition_independence",
            ExperimentId::Leibniz => "exp_leibniz",
            ExperimentId::Amalgam => "exp_amalgam",
            ExperimentId::MomentDecay => "exp_moment_decay",
            ExperimentId::ResolventGamma => "exp_resolvent_gamma",
            ExperimentId::Embeddings => "exp_embeddings",
            ExperimentId::Duality => "exp_duality",
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s || id.name().trim_start_matches("exp_") == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment '{s}'")))
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_pou() -> PartitionVariant {
    PartitionVariant::Standard
}

/// Parameters of one experiment run. Unset fields take per-experiment
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_pou")]
    pub pou: PartitionVariant,
    /// Run the deliberately violated setup instead; it must fail.
    #[serde(default)]
    pub negative_control: bool,
    /// Grid cells per axis of the base 1-D grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Modes of the base 1-D basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Random samples per table entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_range: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_range: Option<[f64; 2]>,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId) -> Self {
        ExperimentSpec {
            id,
            seed: DEFAULT_SEED,
            pou: PartitionVariant::Standard,
            negative_control: false,
            n: None,
            k: None,
            samples: None,
            j_range: None,
            t_range: None,
            theta_range: None,
        }
    }

    pub fn negative(mut self) -> Self {
        self.negative_control = true;
        self
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    pub(crate) fn samples_or(&self, d: usize) -> usize {
        self.samples.unwrap_or(d)
    }

    fn record(&self, r: &mut EstimateReport) {
        r.param("pou", self.pou);
        r.param("negative_control", self.negative_control);
        for (k, v) in [("n", self.n), ("k", self.k), ("samples", self.samples)] {
            if let Some(v) = v {
                r.param(k, v);
            }
        }
        if let Some(v) = self.j_range {
            r.param("j_range", v);
        }
        if let Some(v) = self.t_range {
            r.param("t_range", v);
        }
        if let Some(v) = self.theta_range {
            r.param("theta_range", v);
        }
    }
}

/// Run one experiment and time it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<EstimateReport> {
    let start = Instant::now();
    let mut report = match spec.id {
        ExperimentId::Partition => exp_partition(spec),
        ExperimentId::Reconstruction => exp_reconstruction(spec),
        ExperimentId::ProjectedSemigroup => exp_projected_semigroup(spec),
        ExperimentId::MultiplierScaling => exp_multiplier_scaling(spec),
        ExperimentId::LowFreqDecay => exp_low_freq_decay(spec),
        ExperimentId::HeatGaussian => exp_heat_gaussian(spec),
        ExperimentId::Gradient => exp_gradient(spec),
        ExperimentId::PartitionIndependence => exp_partition_independence(spec),
        ExperimentId::Leibniz => exp_leibniz(spec),
        ExperimentId::Amalgam => exp_amalgam(spec),
        ExperimentId::MomentDecay => exp_moment_decay(spec),
        ExperimentId::ResolventGamma => exp_resolvent_gamma(spec),
        ExperimentId::Embeddings => exp_embeddings(spec),
        ExperimentId::Duality => exp_duality(spec),
    }?;
    spec.record(&mut report);
    report.runtime = start.elapsed();
    Ok(report)
}

/// Run several experiments concurrently; results keep the input order.
pub fn run_all(specs: &[ExperimentSpec]) -> Vec<Result<EstimateReport>> {
    specs.par_iter().map(run_experiment).collect()
}

/// Random combination of the first `active` modes with coefficients
/// uniform in `[-1, 1]` scaled by `(1 + lambda)^(-decay)`.
pub(crate) fn random_coeffs(basis: &EigenBasis, active: usize, decay: f64, rng: &mut ChaCha8Rng) -> SpectralCoeffs {
    let mut c = vec![0.0; basis.len()];
    for (k, ck) in c.iter_mut().enumerate().take(active.min(basis.len())) {
        *ck = rng.gen_range(-1.0..1.0) * (1.0 + basis.eigenvalues()[k]).powf(-decay);
    }
    SpectralCoeffs(c)
}

/// `n` log-spaced values in `[lo, hi]`.
pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::littlewood_paley::log_samples(lo, hi, n)
}

/// Number of rectangle modes with `lambda <= limit`.
pub(crate) fn rectangle_modes_below(lx: f64, ly: f64, limit: f64) -> usize {
    let pi = std::f64::consts::PI;
    let amax = (limit.sqrt() * lx / pi).floor() as usize;
    let mut count = 0;
    for a in 0..=amax {
        let rest = limit - (a as f64 * pi / lx).powi(2);
        if rest >= 0.0 {
            count += (rest.sqrt() * ly / pi * (1.0 + 1e-12)).floor() as usize + 1;
        }
    }
    count
}
