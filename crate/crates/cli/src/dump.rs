//! CSV field dumps. Files are staged in a hidden directory inside the output
//! directory and moved into place only when the command completes, so a
//! failed run leaves no partial dumps behind.

use std::path::Path;

use serde::Serialize;
use tempfile::TempDir;
use wcurvlab_core::grid::{GridField, Riemann4Field, ScalarField, Sym2Field};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DumpEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

pub struct Dumps {
    staging: TempDir,
    entries: Vec<DumpEntry>,
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

impl Dumps {
    pub fn new(out: &Path) -> Result<Self> {
        let staging = tempfile::Builder::new()
            .prefix(".wcurvlab-dumps-")
            .tempdir_in(out)?;
        Ok(Dumps {
            staging,
            entries: Vec::new(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Generic table; rows are written in the given order.
    pub fn table<I>(&mut self, name: &str, columns: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let file = format!("{name}.csv");
        let mut w = csv::Writer::from_path(self.staging.path().join(&file))
            .map_err(|e| crate::error::CliError::Io(e.to_string()))?;
        let io = |e: csv::Error| crate::error::CliError::Io(e.to_string());
        w.write_record(columns).map_err(io)?;
        let mut count = 0;
        for r in rows {
            w.write_record(r.iter().map(|&v| fmt(v))).map_err(io)?;
            count += 1;
        }
        w.flush()?;
        self.entries.push(DumpEntry {
            name: name.to_string(),
            file,
            rows: count,
            columns: columns.to_vec(),
        });
        Ok(())
    }

    /// One component per file: coordinates of every valid node (row-major,
    /// axis 0 slowest) followed by the value.
    fn nodal(
        &mut self,
        name: &str,
        field_chart: &ScalarField,
        value: impl Fn(usize) -> f64,
    ) -> Result<()> {
        let chart = field_chart.chart().clone();
        let mut columns = chart.coord_names();
        columns.push(name.to_string());
        let rows = chart
            .valid_nodes(field_chart.margin())
            .into_iter()
            .map(|k| {
                let mut r = chart.coords(k);
                r.push(value(k));
                r
            });
        self.table(name, &columns, rows)
    }

    pub fn scalar(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        self.nodal(name, f, |k| f.at(k))
    }

    pub fn sym2(&mut self, name: &str, t: &Sym2Field) -> Result<()> {
        let n = t.dim();
        let carrier =
            ScalarField::from_values(t.chart().clone(), vec![0.0; t.chart().len()], t.margin());
        for i in 0..n {
            for j in i..n {
                self.nodal(&format!("{name}_{i}{j}"), &carrier, |k| t.at(k, i, j))?;
            }
        }
        Ok(())
    }

    /// Independent components `ijkl` with `i < j`, `k < l`, `(i, j) <= (k, l)`.
    pub fn riemann(&mut self, name: &str, r: &Riemann4Field) -> Result<()> {
        let n = r.chart().dim();
        let carrier =
            ScalarField::from_values(r.chart().clone(), vec![0.0; r.chart().len()], r.margin());
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[a..] {
                self.nodal(&format!("{name}_{i}{j}{k}{l}"), &carrier, |node| {
                    r.at(node, i, j, k, l)
                })?;
            }
        }
        Ok(())
    }

    /// Moves staged files into `out`.
    pub fn commit(self, out: &Path) -> Result<Vec<DumpEntry>> {
        for e in &self.entries {
            std::fs::rename(self.staging.path().join(&e.file), out.join(&e.file))?;
        }
        Ok(self.entries)
    }
}
