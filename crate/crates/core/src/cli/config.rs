use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domains::{build_fd_basis, build_interval_basis, build_rectangle_basis, Domain, EigenBasis};
use crate::error::{Error, Result};
use crate::littlewood_paley::PartitionVariant;
use crate::verify::{ExperimentId, ExperimentSpec, DEFAULT_SEED};

/// JSON schema of [`RunConfig`], shipped with the binary.
pub const RUN_CONFIG_SCHEMA: &str = include_str!("../../schema/run_config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
    Lshape,
    Square,
    Polygon { vertices: Vec<[f64; 2]> },
}

impl DomainConfig {
    pub fn domain(&self) -> Result<Domain> {
        match self {
            DomainConfig::Interval { length } => Domain::interval(*length),
            DomainConfig::Rectangle { lx, ly } => Domain::rectangle(*lx, *ly),
            DomainConfig::Lshape => Ok(Domain::lshape()),
            DomainConfig::Square => Ok(Domain::unit_square_polygon()),
            DomainConfig::Polygon { vertices } => Domain::polygon(vertices.clone()),
        }
    }
}

/// Grid and mode counts. Intervals use `n`, rectangles `nx`/`ny` (or `n`
/// for both), polygons the spacing `h`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

pub fn build_basis(domain: &DomainConfig, res: &Resolution) -> Result<EigenBasis> {
    let need = |v: Option<usize>, name: &str| {
        v.ok_or_else(|| Error::InvalidParameter(format!("resolution needs '{name}' for this domain")))
    };
    match domain {
        DomainConfig::Interval { length } => build_interval_basis(*length, res.k, need(res.n, "n")?),
        DomainConfig::Rectangle { lx, ly } => {
            let nx = need(res.nx.or(res.n), "nx")?;
            let ny = need(res.ny.or(res.n), "ny")?;
            build_rectangle_basis(*lx, *ly, res.k, nx, ny)
        }
        _ => {
            let h = res.h.ok_or_else(|| Error::InvalidParameter("resolution needs 'h' for polygons".into()))?;
            build_fd_basis(&domain.domain()?, h, res.k)
        }
    }
}

/// Per-experiment overrides; unset fields fall back to the run defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub id: ExperimentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pou: Option<PartitionVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_control: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_range: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExperimentItem {
    Id(ExperimentId),
    Entry(ExperimentEntry),
}

impl ExperimentItem {
    pub fn id(&self) -> ExperimentId {
        match self {
            ExperimentItem::Id(id) => *id,
            ExperimentItem::Entry(e) => e.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
    #[serde(default = "default_pou")]
    pub pou: PartitionVariant,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub negative_control: bool,
    /// Empty means every experiment.
    #[serde(default)]
    pub experiments: Vec<ExperimentItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_pou() -> PartitionVariant {
    PartitionVariant::Standard
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: None,
            resolution: None,
            pou: PartitionVariant::Standard,
            seed: DEFAULT_SEED,
            negative_control: false,
            experiments: Vec::new(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Parse and validate; serde errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("config does not match the schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.resolution {
            if r.k == 0 {
                return Err(Error::InvalidParameter("resolution.k must be positive".into()));
            }
        }
        for item in &self.experiments {
            if let ExperimentItem::Entry(e) = item {
                for (name, v) in [("n", e.n), ("k", e.k), ("samples", e.samples)] {
                    if v == Some(0) {
                        return Err(Error::InvalidParameter(format!("{}: '{name}' must be positive", e.id)));
                    }
                }
                if let Some([a, b]) = e.j_range {
                    if a > b {
                        return Err(Error::InvalidParameter(format!("{}: empty j_range [{a}, {b}]", e.id)));
                    }
                }
                for (name, r) in [("t_range", e.t_range), ("theta_range", e.theta_range)] {
                    if let Some([a, b]) = r {
                        if !(a > 0.0 && a < b && b.is_finite()) {
                            return Err(Error::InvalidParameter(format!("{}: {name} must satisfy 0 < lo < hi", e.id)));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Experiment specs in configuration order, with run-level defaults.
    pub fn specs(&self) -> Vec<ExperimentSpec> {
        let items: Vec<ExperimentItem> = if self.experiments.is_empty() {
            ExperimentId::ALL.iter().map(|&id| ExperimentItem::Id(id)).collect()
        } else {
            self.experiments.clone()
        };
        items
            .into_iter()
            .map(|item| {
                let mut s = ExperimentSpec::new(item.id());
                s.seed = self.seed;
                s.pou = self.pou;
                s.negative_control = self.negative_control;
                if let ExperimentItem::Entry(e) = item {
                    s.seed = e.seed.unwrap_or(s.seed);
                    s.pou = e.pou.unwrap_or(s.pou);
                    s.negative_control = e.negative_control.unwrap_or(s.negative_control);
                    s.n = e.n;
                    s.k = e.k;
                    s.samples = e.samples;
                    s.j_range = e.j_range;
                    s.t_range = e.t_range;
                    s.theta_range = e.theta_range;
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let cfg = RunConfig::from_json(
            r#"{"seed": 7, "experiments": ["exp_reconstruction", {"id": "exp_leibniz", "samples": 10}]}"#,
        )
        .unwrap();
        let specs = cfg.specs();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].samples, Some(10));
        assert_eq!(specs[1].seed, 7);
        let err = RunConfig::from_json("{\n  \"seed\": 1,\n  \"colour\": 3\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(RunConfig::from_json(r#"{"experiments": ["exp_nothing"]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"experiments": [{"id": "exp_gradient", "j_range": [3, 1]}]}"#).is_err());
        assert_eq!(RunConfig::from_json("{}").unwrap().specs().len(), ExperimentId::ALL.len());
    }

    #[test]
    fn schema_is_json() {
        let v: serde_json::Value = serde_json::from_str(RUN_CONFIG_SCHEMA).unwrap();
        assert_eq!(v["additionalProperties"], serde_json::Value::Bool(false));
    }
}
