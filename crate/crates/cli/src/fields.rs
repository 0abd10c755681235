//! Turning config sources into grid fields on a given chart.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use wcurvlab_core::expr::{self, Bindings, Expr};
use wcurvlab_core::fixtures::{sample_sym2, RandomSpec, TrigFactory};
use wcurvlab_core::grid::{sym_index, sym_len, Axis, Chart, ScalarField, Sym2Field};

use crate::config::{ChartBlock, ChartKindCfg, Config, FieldSource, MetricSource, Scalar};
use crate::error::{CliError, Result};

pub const RANDOM: &str = "random";
pub const EUCLIDEAN: &str = "euclidean";

/// Fixed per-slot seed offsets so every field draws from its own stream.
fn slot_offset(slot: &str) -> u64 {
    match slot {
        "g" => 1,
        "phi" => 2,
        "f" => 3,
        "h" => 4,
        "psi" => 5,
        "u" => 6,
        "target" => 7,
        "vector" => 8,
        _ => 9,
    }
}

/// Evaluates config sources on charts. Expression and random sources can be
/// sampled at any resolution; CSV sources only on the configured chart.
pub struct Resolver {
    pub m: f64,
    pub seed: u64,
    pub base_dir: PathBuf,
}

/// Parses a constant expression (no coordinates).
pub fn eval_scalar(s: &Scalar, path: &str, m: f64) -> Result<f64> {
    match s {
        Scalar::Num(v) => Ok(*v),
        Scalar::Expr(src) => {
            let e = expr::parse(src).map_err(|e| CliError::config(path, e))?;
            e.eval_with(&Bindings {
                x: &[],
                t: None,
                m: Some(m),
            })
            .map_err(|e| CliError::config(path, e))
        }
    }
}

pub fn build_chart(
    block: &ChartBlock,
    m: f64,
    order: usize,
    scale: (usize, usize),
) -> Result<Arc<Chart>> {
    let mut axes = Vec::with_capacity(block.n);
    for a in 0..block.n {
        let len = eval_scalar(&block.extents[a], &format!("chart.extents[{a}]"), m)?;
        let nodes = (block.sizes[a] * scale.0 + scale.1 / 2) / scale.1;
        let axis = match block.kind {
            ChartKindCfg::Torus => Axis::periodic(nodes, len),
            ChartKindCfg::Box => {
                let o = match &block.origin {
                    Some(o) => eval_scalar(&o[a], &format!("chart.origin[{a}]"), m)?,
                    None => 0.0,
                };
                Axis::open(nodes, o, len)
            }
        };
        axes.push(axis);
    }
    let chart = Chart::new(axes, order).map_err(|e| CliError::config("chart", e))?;
    Ok(chart.into_shared())
}

/// Node count scale for refinement level `j`: `(2 + j) / 2`.
pub fn level_scale(j: usize) -> (usize, usize) {
    (2 + j, 2)
}

impl Resolver {
    pub fn new(cfg: &Config, seed: u64, config_path: &Path) -> Self {
        let base_dir = config_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Resolver {
            m: cfg.m,
            seed,
            base_dir,
        }
    }

    fn factory(&self, slot: &str, chart: &Chart) -> TrigFactory {
        let periods: Vec<f64> = chart.axes().iter().map(|a| a.length).collect();
        TrigFactory::new(
            self.seed
                .wrapping_add(slot_offset(slot).wrapping_mul(1_000_003)),
            &periods,
            RandomSpec::default(),
        )
    }

    pub fn compile(&self, src: &str, path: &str, dim: usize) -> Result<Expr> {
        let e = expr::parse(src).map_err(|e| CliError::config(path, e))?;
        let (xs, uses_t, _) = e.free_vars();
        if let Some(&i) = xs.iter().find(|&&i| i >= dim) {
            return Err(CliError::config(
                path,
                format!("x{i} is not a coordinate of a {dim}-d chart"),
            ));
        }
        if uses_t {
            return Err(CliError::config(
                path,
                "t is not bound in field expressions",
            ));
        }
        Ok(e)
    }

    fn sample_expr(&self, e: &Expr, path: &str, chart: &Arc<Chart>) -> Result<ScalarField> {
        let m = self.m;
        let vals: Vec<std::result::Result<f64, expr::ExprError>> = (0..chart.len())
            .into_par_iter()
            .map(|k| {
                e.eval_with(&Bindings {
                    x: &chart.coords(k),
                    t: None,
                    m: Some(m),
                })
            })
            .collect();
        // first failing node in node order, so the message is deterministic
        let mut out = Vec::with_capacity(vals.len());
        for (k, v) in vals.into_iter().enumerate() {
            match v {
                Ok(v) => out.push(v),
                Err(err) => {
                    let at: Vec<String> = chart.coords(k).iter().map(|c| format!("{c}")).collect();
                    return Err(CliError::config(
                        path,
                        format!("{err} at node {k} (x = [{}])", at.join(", ")),
                    ));
                }
            }
        }
        Ok(ScalarField::from_values(chart.clone(), out, 0))
    }

    pub fn scalar(
        &self,
        src: &FieldSource,
        path: &str,
        slot: &str,
        chart: &Arc<Chart>,
    ) -> Result<ScalarField> {
        match src {
            FieldSource::Num(v) => Ok(ScalarField::constant(chart, *v)),
            FieldSource::Text(t) if t.trim() == RANDOM => {
                Ok(self.factory(slot, chart).scalar().sample(chart))
            }
            FieldSource::Text(t) => {
                let e = self.compile(t, path, chart.dim())?;
                self.sample_expr(&e, path, chart)
            }
            FieldSource::Csv { csv } => self.read_csv(csv, path, chart),
        }
    }

    /// Symmetric 2-tensor source; `base` is the diagonal constant of a random draw.
    pub fn sym2(
        &self,
        src: &MetricSource,
        path: &str,
        slot: &str,
        chart: &Arc<Chart>,
        base: f64,
    ) -> Result<Sym2Field> {
        let n = chart.dim();
        match src {
            MetricSource::Named(name) if name == EUCLIDEAN => Ok(Sym2Field::euclidean(chart)),
            MetricSource::Named(name) if name == RANDOM => {
                let comps = self.factory(slot, chart).sym2(base);
                Ok(sample_sym2(chart, &comps))
            }
            MetricSource::Named(name) => Err(CliError::config(
                path,
                format!(
                    "unknown preset '{name}' (use '{EUCLIDEAN}', '{RANDOM}' or a component table)"
                ),
            )),
            MetricSource::Components(table) => {
                let mut slots: Vec<Option<&FieldSource>> = vec![None; sym_len(n)];
                for (key, v) in table {
                    let (i, j) = parse_component(key, n).ok_or_else(|| {
                        CliError::config(
                            &format!("{path}.{key}"),
                            format!("not a component of a {n}-d symmetric tensor"),
                        )
                    })?;
                    let s = sym_index(n, i, j);
                    if slots[s].is_some() {
                        return Err(CliError::config(
                            &format!("{path}.{key}"),
                            "component given twice",
                        ));
                    }
                    slots[s] = Some(v);
                }
                let mut comps = Vec::with_capacity(sym_len(n));
                for i in 0..n {
                    for j in i..n {
                        let src = slots[sym_index(n, i, j)].ok_or_else(|| {
                            CliError::config(
                                path,
                                format!("missing component {slot}{i}{j} (all {} components of a {n}-d tensor are required)", sym_len(n)),
                            )
                        })?;
                        let f = self.scalar(src, &format!("{path}.{i}{j}"), slot, chart)?;
                        comps.push((sym_index(n, i, j), f.into_values()));
                    }
                }
                comps.sort_by_key(|c| c.0);
                Ok(Sym2Field::from_components(
                    chart.clone(),
                    comps.into_iter().map(|c| c.1).collect(),
                    0,
                ))
            }
        }
    }

    /// Random vector components for identities that need one.
    pub fn random_vector(&self, chart: &Arc<Chart>) -> Vec<Vec<f64>> {
        let mut fac = self.factory("vector", chart);
        (0..chart.dim())
            .map(|_| fac.scalar().sample(chart).into_values())
            .collect()
    }

    fn read_csv(&self, file: &str, path: &str, chart: &Arc<Chart>) -> Result<ScalarField> {
        let full = self.base_dir.join(file);
        let err = |msg: String| CliError::config(path, format!("{}: {msg}", full.display()));
        let mut rdr = csv::Reader::from_path(&full).map_err(|e| err(e.to_string()))?;
        let header = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        let names = chart.coord_names();
        let n = chart.dim();
        if header.len() != n + 1 || names.iter().zip(header.iter()).any(|(a, b)| a != b.trim()) {
            return Err(err(format!(
                "header must be {} followed by one value column",
                names.join(",")
            )));
        }
        let mut values = Vec::with_capacity(chart.len());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if row >= chart.len() {
                return Err(err(format!(
                    "more rows than the {} chart nodes",
                    chart.len()
                )));
            }
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(format!("row {}: {e}", row + 1)))?;
            let x = chart.coords(row);
            for a in 0..n {
                if (nums[a] - x[a]).abs() > 1e-9 * (1.0 + x[a].abs()) {
                    return Err(err(format!(
                        "row {}: coordinate x{a} = {} does not match node value {}",
                        row + 1,
                        nums[a],
                        x[a]
                    )));
                }
            }
            values.push(nums[n]);
        }
        if values.len() != chart.len() {
            return Err(err(format!(
                "{} rows for a chart with {} nodes",
                values.len(),
                chart.len()
            )));
        }
        Ok(ScalarField::from_values(chart.clone(), values, 0))
    }
}

fn parse_component(key: &str, n: usize) -> Option<(usize, usize)> {
    let b = key.as_bytes();
    if b.len() != 2 || !b[0].is_ascii_digit() || !b[1].is_ascii_digit() {
        return None;
    }
    let (i, j) = ((b[0] - b'0') as usize, (b[1] - b'0') as usize);
    (i < n && j < n).then_some((i.min(j), i.max(j)))
}

pub fn is_csv(src: &FieldSource) -> bool {
    matches!(src, FieldSource::Csv { .. })
}

pub fn metric_uses_csv(src: &MetricSource) -> bool {
    match src {
        MetricSource::Named(_) => false,
        MetricSource::Components(t) => t.values().any(is_csv),
    }
}
