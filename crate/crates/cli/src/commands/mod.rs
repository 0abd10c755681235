pub mod curvature;
pub mod kernel;
pub mod ode;
pub mod prescribe;
pub mod static_check;
pub mod verify;
pub mod warp;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{Map, Value};
use wcurvlab_core::grid::{
    inner_phi, Chart, GridField, MetricMeasureSpace, ScalarField, Sym2Field,
};

use crate::config::{Config, FieldSource, MetricSource, DEFAULT_LEVELS};
use crate::dump::Dumps;
use crate::error::{CliError, Result};
use crate::fields::{build_chart, is_csv, level_scale, metric_uses_csv, Resolver};
use crate::report::{num, Verdict};

/// What a command hands back to the driver.
#[derive(Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub traces: Map<String, Value>,
    pub summary: Vec<String>,
    pub dumps: Option<Dumps>,
    /// Set when a solver ran but could not finish.
    pub solver_failure: Option<String>,
}

impl Outcome {
    pub fn put(&mut self, key: &str, v: Value) {
        self.results.insert(key.to_string(), v);
    }
}

pub struct Ctx {
    pub cfg: Config,
    pub res: Resolver,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: Config, config_path: &Path, out: &Path) -> Self {
        let res = Resolver::new(
            &cfg,
            cfg.seed.unwrap_or(crate::config::DEFAULT_SEED),
            config_path,
        );
        Ctx {
            cfg,
            res,
            out: out.to_path_buf(),
        }
    }

    pub fn order(&self) -> usize {
        self.cfg.order.unwrap_or(crate::config::DEFAULT_ORDER)
    }

    pub fn m(&self) -> f64 {
        self.cfg.m
    }

    /// Configured chart refined to level `j` (level 0 is the chart as given).
    pub fn chart(&self, level: usize) -> Result<Arc<Chart>> {
        build_chart(
            self.cfg.chart_block()?,
            self.cfg.m,
            self.order(),
            level_scale(level),
        )
    }

    /// Fields with CSV sources exist only on the configured chart.
    pub fn refinable(&self) -> bool {
        let f = &self.cfg.fields;
        let scalars = [&f.phi, &f.f, &f.psi, &f.u, &f.target];
        !scalars.iter().any(|s| s.as_ref().is_some_and(is_csv))
            && ![&f.g, &f.h]
                .iter()
                .any(|s| s.as_ref().is_some_and(metric_uses_csv))
    }

    /// Ladder levels: the configured count, or one when fields cannot be resampled.
    pub fn levels(&self, configured: Option<usize>) -> usize {
        if self.refinable() {
            configured.unwrap_or(DEFAULT_LEVELS).max(1)
        } else {
            1
        }
    }

    pub fn metric(&self, chart: &Arc<Chart>) -> Result<Sym2Field> {
        match &self.cfg.fields.g {
            Some(src) => self.res.sym2(src, "fields.g", "g", chart, 1.0),
            None => Ok(Sym2Field::euclidean(chart)),
        }
    }

    pub fn space(&self, chart: &Arc<Chart>) -> Result<MetricMeasureSpace> {
        let g = self.metric(chart)?;
        let phi = match &self.cfg.fields.phi {
            Some(src) => self.res.scalar(src, "fields.phi", "phi", chart)?,
            None => ScalarField::zeros(chart),
        };
        MetricMeasureSpace::new(g, phi, self.cfg.m).map_err(|e| CliError::config("fields", e))
    }

    fn scalar_source(&self, name: &str) -> Option<&FieldSource> {
        let f = &self.cfg.fields;
        match name {
            "f" => f.f.as_ref(),
            "psi" => f.psi.as_ref(),
            "u" => f.u.as_ref(),
            "target" => f.target.as_ref(),
            _ => None,
        }
    }

    /// Optional scalar field `fields.<name>`.
    pub fn field(&self, name: &str, chart: &Arc<Chart>) -> Result<Option<ScalarField>> {
        match self.scalar_source(name) {
            Some(src) => Ok(Some(self.res.scalar(
                src,
                &format!("fields.{name}"),
                name,
                chart,
            )?)),
            None => Ok(None),
        }
    }

    pub fn require(&self, name: &str, chart: &Arc<Chart>, why: &str) -> Result<ScalarField> {
        self.field(name, chart)?
            .ok_or_else(|| CliError::config(&format!("fields.{name}"), format!("missing ({why})")))
    }

    /// `fields.<name>` or a seeded random draw.
    pub fn field_or_random(&self, name: &str, chart: &Arc<Chart>) -> Result<ScalarField> {
        let random = FieldSource::Text(crate::fields::RANDOM.into());
        let src = self.scalar_source(name).unwrap_or(&random);
        self.res.scalar(src, &format!("fields.{name}"), name, chart)
    }

    pub fn deformation_or_random(&self, chart: &Arc<Chart>) -> Result<Sym2Field> {
        let random = MetricSource::Named(crate::fields::RANDOM.into());
        let src = self.cfg.fields.h.as_ref().unwrap_or(&random);
        self.res.sym2(src, "fields.h", "h", chart, 0.3)
    }

    pub fn dumps(&self) -> Result<Dumps> {
        Dumps::new(&self.out)
    }
}

/// Rejects names outside `allowed` in a dump list.
pub fn check_dump_names(path: &str, names: &[String], allowed: &[&str]) -> Result<()> {
    for n in names {
        if !allowed.contains(&n.as_str()) {
            return Err(CliError::config(
                path,
                format!("unknown dump '{n}' (allowed: {})", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

/// sup and, on closed charts, L²_φ norms of a scalar.
pub fn scalar_norms(space: &MetricMeasureSpace, f: &ScalarField) -> Result<Value> {
    let (lo, hi) = f.range();
    let l2 = if space.chart().is_closed() {
        num(inner_phi(space, f, f)?.max(0.0).sqrt())
    } else {
        Value::Null
    };
    Ok(serde_json::json!({
        "sup": num(f.sup()),
        "l2_phi": l2,
        "min": num(lo),
        "max": num(hi),
        "mean": num(f.mean()),
    }))
}

pub fn sym2_norms(space: &MetricMeasureSpace, t: &Sym2Field) -> Result<Value> {
    let l2 = if space.chart().is_closed() {
        num(inner_phi(space, t, t)?.max(0.0).sqrt())
    } else {
        Value::Null
    };
    Ok(serde_json::json!({ "sup": num(t.sup()), "l2_phi": l2 }))
}

/// Compact rendering for summary lines: eight significant digits, no
/// trailing zeros, so `-2.0000000001` prints as `-2`.
pub fn pretty(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..8).contains(&mag) {
        let decimals = (7 - mag).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.7e}")
    }
}

pub fn pass_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
