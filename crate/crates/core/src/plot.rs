//! Long-format plot data: one `(x, series, value)` row per observation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgs::PointResidual;
use crate::psf::PmfVector;
use crate::thinning::ThinningReport;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to export")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub series: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub rows: Vec<PlotRow>,
}

/// Twelve significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string()
    }
}

impl PlotData {
    pub fn push(&mut self, x: f64, series: impl Into<String>, value: f64) {
        self.rows.push(PlotRow {
            x,
            series: series.into(),
            value,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// TV and fitted θ' against θ, one series per `p`.
    pub fn from_thinning(reports: &[ThinningReport]) -> Self {
        let mut data = PlotData::default();
        for r in reports {
            let tag = format!("{} p={}", r.family, format_number(r.p));
            data.push(r.theta, format!("tv {tag}"), r.tv);
            data.push(r.theta, format!("theta_prime {tag}"), r.fitted_theta_prime);
        }
        data
    }

    /// Heat map of residuals: `x` is the first coordinate of `s`, one series
    /// per `t`.
    pub fn from_residual_field(field: &[PointResidual]) -> Self {
        let mut data = PlotData::default();
        for p in field {
            let t: Vec<String> = p.t.iter().map(|c| format_number(*c)).collect();
            let x = p.s.first().copied().unwrap_or(f64::NAN);
            data.push(x, format!("t={}", t.join(";")), p.residual);
        }
        data
    }

    /// Masses against `k`.
    pub fn from_pmf(series: &str, pmf: &PmfVector) -> Self {
        let mut data = PlotData::default();
        for (k, m) in pmf.masses.iter().enumerate() {
            data.push(k as f64, series, *m);
        }
        data
    }

    pub fn extend(&mut self, other: PlotData) {
        self.rows.extend(other.rows);
    }
}

pub fn write_plot_csv<W: Write>(data: &PlotData, out: W) -> Result<(), PlotError> {
    if data.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "series", "value"])?;
    for row in &data.rows {
        w.write_record([format_number(row.x), row.series.clone(), format_number(row.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_plot_data(data: &PlotData, path: &Path) -> Result<(), PlotError> {
    if data.is_empty() {
        return Err(PlotError::Empty);
    }
    let file = std::fs::File::create(path)?;
    write_plot_csv(data, std::io::BufWriter::new(file))
}
