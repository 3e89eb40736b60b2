//! Time-indexed log of named channels and its CSV form.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    dt: f64,
}

impl Trajectory {
    /// The first channel must be `t`.
    pub fn new(names: Vec<String>, dt: f64) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Trajectory { names, columns, dt }
    }

    pub fn with_capacity(names: Vec<String>, dt: f64, rows: usize) -> Self {
        let columns = (0..names.len()).map(|_| Vec::with_capacity(rows)).collect();
        Trajectory { names, columns, dt }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::config(format!(
                "row has {} values for {} channels",
                row.len(),
                self.names.len()
            )));
        }
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    channel: self.names[i].clone(),
                    time: row[0],
                    snapshot: row.to_vec(),
                });
            }
        }
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn time(&self) -> &[f64] {
        &self.columns[0]
    }

    /// Copy restricted to `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Trajectory> {
        let mut out = Trajectory::new(names.to_vec(), self.dt);
        for n in names {
            let i = self
                .names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| {
                    Error::config(format!(
                        "unknown output column `{n}`; available: {}",
                        self.names.join(",")
                    ))
                })?;
            out.columns[out.names.iter().position(|m| m == n).unwrap_or(0)] = self.columns[i].clone();
        }
        Ok(out)
    }

    /// Adds a channel of the same length.
    pub fn add_channel(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::config(format!(
                "channel `{name}` has {} samples, trajectory has {}",
                values.len(),
                self.len()
            )));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }

    /// Header row plus one row per `every`-th grid point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, every: usize) -> Result<()> {
        let every = every.max(1);
        writeln!(w, "{}", self.names.join(","))?;
        let mut line = String::new();
        for r in (0..self.len()).step_by(every) {
            line.clear();
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format_sig17(c[r]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        // writing into a Vec cannot fail
        let _ = self.write_csv(&mut buf, 1);
        String::from_utf8(buf).unwrap_or_default()
    }
}

/// Scientific notation with 17 significant digits; reads back bit-exactly.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}
