//! Regression datasets for the inverse operator: decimated output history,
//! instantaneous derivatives, and (for NARX variants) past inputs.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{DERIVATIVE_CHANNELS, MAX_DERIVATIVE};
use crate::trajectory::{write_atomic, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// Output history plus derivatives `y^(0..=l)`.
    HistoryDerivatives,
    /// Output and input history, no derivatives beyond `y^(0)`.
    Narx,
    /// Output and input history plus `y^(0..=2)`.
    NarxStar,
}

impl FeatureMode {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureMode::HistoryDerivatives => "history-derivatives",
            FeatureMode::Narx => "narx",
            FeatureMode::NarxStar => "narx-star",
        }
    }

    pub fn uses_input_history(&self) -> bool {
        !matches!(self, FeatureMode::HistoryDerivatives)
    }
}

/// Window length, tap spacing, derivative order and mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// History window `T`, seconds.
    pub window: f64,
    /// Tap spacing, seconds.
    pub tap_dt: f64,
    /// Highest derivative order included.
    pub order: usize,
    pub mode: FeatureMode,
}

/// Integer layout of a [`FeatureSpec`] on a given base grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TapLayout {
    /// Number of tap intervals in the window, `T / tap_dt`.
    pub taps: usize,
    /// Base samples per tap interval.
    pub stride: usize,
}

impl TapLayout {
    /// Base samples of history a row needs before its own sample.
    pub fn lookback(&self) -> usize {
        self.taps * self.stride
    }
}

fn integral_ratio(num: f64, den: f64) -> Option<usize> {
    let q = num / den;
    let r = q.round();
    ((q - r).abs() < 1e-6 * r.max(1.0) && r >= 1.0).then_some(r as usize)
}

impl FeatureSpec {
    pub fn history_derivatives(window: f64, tap_dt: f64, order: usize) -> Self {
        Self { window, tap_dt, order, mode: FeatureMode::HistoryDerivatives }
    }

    pub fn narx(window: f64, tap_dt: f64) -> Self {
        Self { window, tap_dt, order: 0, mode: FeatureMode::Narx }
    }

    pub fn narx_star(window: f64, tap_dt: f64) -> Self {
        Self { window, tap_dt, order: 2, mode: FeatureMode::NarxStar }
    }

    /// Short operator label, e.g. `G_d2`, `NARX`, `NARX*`.
    pub fn operator_label(&self) -> String {
        match self.mode {
            FeatureMode::HistoryDerivatives => format!("G_d{}", self.order),
            FeatureMode::Narx => "NARX".into(),
            FeatureMode::NarxStar => "NARX*".into(),
        }
    }

    /// Checks the invariants and resolves the tap layout on a base grid.
    pub fn layout(&self, base_dt: f64) -> Result<TapLayout> {
        if self.order > MAX_DERIVATIVE {
            return Err(Error::Domain(format!("derivative order {} exceeds {MAX_DERIVATIVE}", self.order)));
        }
        match (self.mode, self.order) {
            (FeatureMode::Narx, 0) | (FeatureMode::NarxStar, 2) | (FeatureMode::HistoryDerivatives, _) => {}
            (mode, l) => return Err(Error::Domain(format!("{} does not allow derivative order {l}", mode.label()))),
        }
        let taps = integral_ratio(self.window, self.tap_dt)
            .ok_or_else(|| Error::Domain(format!("window {} is not a positive multiple of tap spacing {}", self.window, self.tap_dt)))?;
        let stride = integral_ratio(self.tap_dt, base_dt)
            .ok_or_else(|| Error::Domain(format!("tap spacing {} is not a multiple of base period {base_dt}", self.tap_dt)))?;
        Ok(TapLayout { taps, stride })
    }

    pub fn width(&self, base_dt: f64) -> Result<usize> {
        let l = self.layout(base_dt)?;
        Ok(l.taps + 1 + self.order + 1 + if self.mode.uses_input_history() { l.taps } else { 0 })
    }

    pub fn feature_names(&self, base_dt: f64) -> Result<Vec<String>> {
        let l = self.layout(base_dt)?;
        let mut names = Vec::new();
        for i in 0..=l.taps {
            let back = (l.taps - i) * l.stride;
            names.push(if back == 0 { "y[m]".to_string() } else { format!("y[m-{back}]") });
        }
        for j in 0..=self.order {
            names.push(DERIVATIVE_CHANNELS[j].to_string());
        }
        if self.mode.uses_input_history() {
            for i in 0..l.taps {
                names.push(format!("u[m-{}]", (l.taps - i) * l.stride));
            }
        }
        Ok(names)
    }
}

/// Feature rows with their targets and sample times.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub spec: FeatureSpec,
    /// Sample period of the record the rows were built from.
    pub base_dt: f64,
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub times: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            spec: self.spec,
            base_dt: self.base_dt,
            names: self.names.clone(),
            x: self.x.select_rows(idx),
            y: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i])),
            times: idx.iter().map(|&i| self.times[i]).collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",target_u\n");
        for i in 0..self.len() {
            let _ = write!(out, "{:.16e}", self.times[i]);
            for j in 0..self.width() {
                let _ = write!(out, ",{:.16e}", self.x[(i, j)]);
            }
            let _ = writeln!(out, ",{:.16e}", self.y[i]);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }
}

/// Builds one row per base-rate sample that has a full history window.
///
/// `record` needs channels `y` and the derivative channels through the spec
/// order, plus `u` (the target, and the input taps for NARX modes).
pub fn build_dataset(record: &Trajectory, spec: &FeatureSpec) -> Result<Dataset> {
    let layout = spec.layout(record.dt())?;
    let names = spec.feature_names(record.dt())?;
    let y = record.channel("y")?;
    let u = record.channel("u")?;
    let derivs: Vec<Vec<f64>> = (0..=spec.order).map(|j| record.channel(DERIVATIVE_CHANNELS[j])).collect::<Result<_>>()?;
    let start = layout.lookback();
    if record.len() <= start {
        return Err(Error::EmptyDataset(format!(
            "record has {} samples, window needs {}",
            record.len(),
            start + 1
        )));
    }
    let rows = record.len() - start;
    let width = names.len();
    let mut x = DMatrix::zeros(rows, width);
    let mut target = DVector::zeros(rows);
    let mut times = Vec::with_capacity(rows);
    for (row, m) in (start..record.len()).enumerate() {
        let mut col = 0;
        for i in 0..=layout.taps {
            x[(row, col)] = y[m - (layout.taps - i) * layout.stride];
            col += 1;
        }
        for d in &derivs {
            x[(row, col)] = d[m];
            col += 1;
        }
        if spec.mode.uses_input_history() {
            for i in 0..layout.taps {
                x[(row, col)] = u[m - (layout.taps - i) * layout.stride];
                col += 1;
            }
        }
        debug_assert_eq!(col, width);
        target[row] = u[m];
        times.push(record.time(m));
    }
    Ok(Dataset { spec: *spec, base_dt: record.dt(), names, x, y: target, times })
}

/// Rows for a record that starts from rest: the record is padded with zeros
/// so the first row lands on its first sample.
pub fn build_dataset_from_rest(record: &Trajectory, spec: &FeatureSpec) -> Result<Dataset> {
    let layout = spec.layout(record.dt())?;
    build_dataset(&record.with_rest_prefix(layout.lookback()), spec)
}
