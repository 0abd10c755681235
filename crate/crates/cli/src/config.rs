//! Config schema, version 1. The concrete syntax is TOML; see the README for
//! a field-by-field description.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Default thresholds, overridable through `[tolerances]`.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("r_phi", 1e-5),
    ("integration_by_parts", 1e-6),
    ("weighted_bianchi", 1e-4),
    ("trace_identity", 1e-4),
    ("linearization", 1e-9),
    ("linearization_fd", 1e-5),
    ("adjointness", 1e-6),
    ("divergence_laplacian_metric", 1e-4),
    ("divergence_hessian", 1e-4),
    ("divergence_ricci", 1e-4),
    ("commutator_anchor", 1e-4),
    ("static", 1e-8),
    ("fiber_warp", 1e-4),
    ("lorentzian", 1e-6),
    ("k_fit", 1e-6),
    ("ode_reference", 1e-8),
];

/// A number, or an expression in `pi`, `e` and `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Expr(String),
}

/// Where a scalar field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Num(f64),
    /// An expression in `x0..x4`, `m`, `pi`, `e`, or the word `random`.
    Text(String),
    Csv {
        csv: String,
    },
}

/// Metric-like sources: a named preset or one source per component `ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSource {
    Named(String),
    Components(BTreeMap<String, FieldSource>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKindCfg {
    Torus,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBlock {
    pub kind: ChartKindCfg,
    pub n: usize,
    pub sizes: Vec<usize>,
    /// Periods on a torus, edge lengths on a box.
    pub extents: Vec<Scalar>,
    /// Box corner; zero by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<Scalar>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<MetricSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<FieldSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FieldSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<MetricSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<FieldSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<FieldSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<FieldSource>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureOpts {
    /// Closed form to compare `R_φ^m` against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_r_phi: Option<String>,
    /// Any of `r_phi`, `rc_phi`, `p_phi`, `a_phi`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dump: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOpts {
    /// Refinement levels; `--refine` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Subset of identities to run; all when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticCheckOpts {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dump: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelOpts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_head: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpOpts {
    /// `fiber`, `lorentzian` or `both`; by default the fiber warp, plus the
    /// Lorentzian warp when `f` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_k: Option<Scalar>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescribeOpts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// `frozen` or `relinearized`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Target is `R_φ^m` of the base plus the `target` field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_relative: Option<bool>,
    /// Multiplier applied to the assembled target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scale: Option<f64>,
    /// Run the scaling sweep over `c_grid` (the default grid when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dump: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeOpts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dphi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_floor: Option<f64>,
    /// Closed forms in `x0` (the ODE variable) to compare against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartBlock>,
    #[serde(default)]
    pub fields: FieldsBlock,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub curvature: CurvatureOpts,
    #[serde(default)]
    pub verify: VerifyOpts,
    #[serde(default, rename = "static-check")]
    pub static_check: StaticCheckOpts,
    #[serde(default)]
    pub kernel: KernelOpts,
    #[serde(default, rename = "warp-check")]
    pub warp_check: WarpOpts,
    #[serde(default)]
    pub prescribe: PrescribeOpts,
    #[serde(default)]
    pub ode: OdeOpts,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_LEVELS: usize = 3;

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text)
            .map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Checks that do not need field evaluation.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::config(
                "version",
                format!(
                    "unsupported version {} (expected {CONFIG_VERSION})",
                    self.version
                ),
            ));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(CliError::config("m", "must be positive and finite"));
        }
        for (k, v) in &self.tolerances {
            if !TOLERANCES.iter().any(|(name, _)| name == k) {
                let known: Vec<&str> = TOLERANCES.iter().map(|t| t.0).collect();
                return Err(CliError::config(
                    &format!("tolerances.{k}"),
                    format!("unknown tolerance (known: {})", known.join(", ")),
                ));
            }
            if !(*v > 0.0) {
                return Err(CliError::config(
                    &format!("tolerances.{k}"),
                    "must be positive",
                ));
            }
        }
        if let Some(c) = &self.chart {
            c.validate()?;
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            TOLERANCES
                .iter()
                .find(|t| t.0 == name)
                .map(|t| t.1)
                .expect("known tolerance name")
        })
    }

    pub fn chart_block(&self) -> Result<&ChartBlock> {
        self.chart
            .as_ref()
            .ok_or_else(|| CliError::config("chart", "missing block"))
    }
}

impl ChartBlock {
    fn validate(&self) -> Result<()> {
        let max = wcurvlab_core::expr::MAX_COORD + 1;
        if self.n == 0 || self.n > max {
            return Err(CliError::config("chart.n", format!("must be in 1..={max}")));
        }
        if self.sizes.len() != self.n {
            return Err(CliError::config(
                "chart.sizes",
                format!("expected {} entries, found {}", self.n, self.sizes.len()),
            ));
        }
        if self.extents.len() != self.n {
            return Err(CliError::config(
                "chart.extents",
                format!("expected {} entries, found {}", self.n, self.extents.len()),
            ));
        }
        match (&self.origin, self.kind) {
            (Some(_), ChartKindCfg::Torus) => Err(CliError::config(
                "chart.origin",
                "only boxes take an origin",
            )),
            (Some(o), ChartKindCfg::Box) if o.len() != self.n => Err(CliError::config(
                "chart.origin",
                format!("expected {} entries, found {}", self.n, o.len()),
            )),
            _ => Ok(()),
        }
    }
}
