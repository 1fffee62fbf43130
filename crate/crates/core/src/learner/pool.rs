//! Candidate networks of different hidden widths and the choice among them.

use super::mlp::MlpModel;
use crate::eval::metrics::{argmin_width, MetricReport, WidthErrors};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct PoolEntry {
    pub hidden: usize,
    pub model: MlpModel,
    pub errors: WidthErrors,
}

/// One trained model per hidden width, with its evaluation errors.
#[derive(Clone, Debug, Default)]
pub struct ModelPool {
    pub entries: Vec<PoolEntry>,
}

impl ModelPool {
    pub fn widths(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.hidden).collect()
    }

    /// Entry with the smallest mean error; ties go to the smaller width.
    pub fn select_best(&self) -> Option<&PoolEntry> {
        let errors: Vec<(usize, f64)> = self.entries.iter().map(|e| (e.hidden, e.errors.mean)).collect();
        let best = argmin_width(&errors)?;
        self.entries.iter().find(|e| e.hidden == best)
    }

    pub fn report(&self) -> Result<MetricReport> {
        MetricReport::from_widths(self.entries.iter().map(|e| e.errors.clone()).collect())
    }
}
