//! Uniformly sampled multi-channel time series and its CSV form.
//!
//! CSV layout: optional `# key=value` metadata lines, then a header row
//! `t,<channel names...>`, then one row per sample. Values are written with
//! 17 significant digits and LF line endings.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Uniformly sampled time series. Rows of `samples` are time, columns are channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    dt: f64,
    t0: f64,
    channels: Vec<String>,
    samples: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, t0: f64, channels: Vec<String>, samples: DMatrix<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("sample period must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::NonFinite("trajectory start time"));
        }
        if samples.nrows() == 0 {
            return Err(Error::Dimension("trajectory needs at least one sample".into()));
        }
        if samples.ncols() != channels.len() {
            return Err(Error::Dimension(format!(
                "{} channel names for {} columns",
                channels.len(),
                samples.ncols()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory samples"));
        }
        Ok(Self { dt, t0, channels, samples })
    }

    /// Single-channel trajectory from a slice of values.
    pub fn from_channel(dt: f64, t0: f64, name: &str, values: &[f64]) -> Result<Self> {
        let samples = DMatrix::from_column_slice(values.len(), 1, values);
        Self::new(dt, t0, vec![name.to_string()], samples)
    }

    /// Samples `f` on `len` grid points starting at `t0`.
    pub fn from_fn(dt: f64, t0: f64, len: usize, name: &str, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..len).map(|i| f(t0 + i as f64 * dt)).collect();
        Self::from_channel(dt, t0, name, &values)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Domain(format!("no channel named {name:?}")))
    }

    /// Copy of one channel.
    pub fn channel(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.channel_index(name)?;
        Ok(self.samples.column(j).iter().copied().collect())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.column(j).iter().copied().collect()
    }

    pub fn value(&self, i: usize, name: &str) -> Result<f64> {
        let j = self.channel_index(name)?;
        Ok(self.samples[(i, j)])
    }

    /// Appends a channel, replacing any existing channel with the same name.
    pub fn with_channel(mut self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Dimension(format!(
                "channel {name:?} has {} samples, trajectory has {}",
                values.len(),
                self.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("appended channel"));
        }
        if let Ok(j) = self.channel_index(name) {
            self.samples.set_column(j, &DVector::from_column_slice(values));
            return Ok(self);
        }
        let n = self.samples.ncols();
        self.samples = self.samples.insert_column(n, 0.0);
        self.samples.set_column(n, &DVector::from_column_slice(values));
        self.channels.push(name.to_string());
        Ok(self)
    }

    /// New trajectory with only the named channels, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names.iter().map(|n| self.channel_index(n)).collect::<Result<_>>()?;
        let samples = self.samples.select_columns(&idx);
        Self::new(self.dt, self.t0, names.iter().map(|s| s.to_string()).collect(), samples)
    }

    /// Rows `start..end` as a new trajectory with shifted start time.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Domain(format!("bad slice {start}..{end} of {} samples", self.len())));
        }
        let samples = self.samples.rows(start, end - start).into_owned();
        Self::new(self.dt, self.time(start), self.channels.clone(), samples)
    }

    /// Prepends `count` all-zero samples, i.e. the system at rest before `t0`.
    pub fn with_rest_prefix(&self, count: usize) -> Self {
        let mut samples = DMatrix::zeros(self.len() + count, self.samples.ncols());
        samples.rows_mut(count, self.len()).copy_from(&self.samples);
        Self {
            dt: self.dt,
            t0: self.t0 - count as f64 * self.dt,
            channels: self.channels.clone(),
            samples,
        }
    }

    /// Linear interpolation of a channel at time `t`, holding the end values outside the record.
    pub fn interpolate(&self, j: usize, t: f64) -> f64 {
        let s = (t - self.t0) / self.dt;
        if s <= 0.0 {
            return self.samples[(0, j)];
        }
        let last = self.len() - 1;
        if s >= last as f64 {
            return self.samples[(last, j)];
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        let a = self.samples[(i, j)];
        let b = self.samples[(i + 1, j)];
        a + frac * (b - a)
    }

    /// Signal view of one channel with linear interpolation.
    pub fn signal(&self, name: &str) -> Result<SampledSignal<'_>> {
        Ok(SampledSignal { traj: self, column: self.channel_index(name)? })
    }

    pub fn to_csv_string(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::with_capacity(self.len() * (self.channels.len() + 1) * 24);
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push('t');
        for c in &self.channels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{:.16e}", self.time(i));
            for j in 0..self.channels.len() {
                let _ = write!(out, ",{:.16e}", self.samples[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, meta: &[(&str, String)]) -> Result<()> {
        write_atomic(path, self.to_csv_string(meta).as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_csv(std::io::BufReader::new(file))
    }

    pub fn parse_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            match &header {
                None => {
                    if fields.first() != Some(&"t") {
                        return Err(Error::Parse("trajectory CSV header must start with `t`".into()));
                    }
                    header = Some(fields[1..].iter().map(|s| s.to_string()).collect());
                }
                Some(h) => {
                    if fields.len() != h.len() + 1 {
                        return Err(Error::Parse(format!(
                            "line {}: expected {} fields, got {}",
                            lineno + 1,
                            h.len() + 1,
                            fields.len()
                        )));
                    }
                    let mut row = fields.iter().map(|f| {
                        f.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                    });
                    times.push(row.next().unwrap()?);
                    for v in row {
                        values.push(v?);
                    }
                }
            }
        }
        let channels = header.ok_or_else(|| Error::Parse("empty trajectory CSV".into()))?;
        if times.is_empty() {
            return Err(Error::Parse("trajectory CSV has no samples".into()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        for (i, t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * dt;
            if (t - expected).abs() > 1e-6 * dt.abs().max(1e-12) + 1e-9 {
                return Err(Error::Parse(format!("non-uniform sampling at row {}", i + 1)));
            }
        }
        let samples = DMatrix::from_row_slice(times.len(), channels.len(), &values);
        Self::new(dt, times[0], channels, samples)
    }
}

/// A scalar function of time.
pub trait Signal {
    fn value(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Signal for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// One trajectory channel, linearly interpolated between grid points.
#[derive(Clone, Copy, Debug)]
pub struct SampledSignal<'a> {
    traj: &'a Trajectory,
    column: usize,
}

impl Signal for SampledSignal<'_> {
    fn value(&self, t: f64) -> f64 {
        self.traj.interpolate(self.column, t)
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
