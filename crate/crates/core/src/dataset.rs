use std::ops::Range;

use crate::error::{Error, Result};
use crate::fvm::{BoundaryCondition, FieldPair, Grid1D, SoilParams};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub grid: Grid1D,
    pub soil: Option<SoilParams>,
    pub bc_left: BoundaryCondition,
    pub bc_right: BoundaryCondition,
    pub provenance: String,
}

/// Time series of concentration fields, one row per output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub t: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub ct: Vec<Vec<f64>>,
    pub meta: DatasetMeta,
}

/// Which concentration field to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Dissolved,
    Total,
}

impl Dataset {
    pub fn new(t: Vec<f64>, c: Vec<Vec<f64>>, ct: Vec<Vec<f64>>, meta: DatasetMeta) -> Result<Self> {
        let d = Self { t, c, ct, meta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.is_empty() {
            return Err(Error::Format("dataset has no time points".into()));
        }
        if let Some(k) = self.t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Format(format!(
                "time grid not strictly increasing at row {}",
                k + 1
            )));
        }
        let n = self.meta.grid.n_volumes;
        for (name, rows) in [("c", &self.c), ("ct", &self.ct)] {
            if rows.len() != self.t.len() {
                return Err(Error::Format(format!(
                    "{name} has {} rows but the time grid has {}",
                    rows.len(),
                    self.t.len()
                )));
            }
            if let Some(k) = rows.iter().position(|r| r.len() != n) {
                return Err(Error::Format(format!(
                    "{name} row {k} has {} columns, grid has {n} volumes",
                    rows[k].len()
                )));
            }
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.t.len()
    }

    pub fn n_volumes(&self) -> usize {
        self.meta.grid.n_volumes
    }

    pub fn frame(&self, k: usize) -> FieldPair {
        FieldPair {
            c: self.c[k].clone(),
            ct: self.ct[k].clone(),
        }
    }

    pub fn field(&self, which: Field) -> &[Vec<f64>] {
        match which {
            Field::Dissolved => &self.c,
            Field::Total => &self.ct,
        }
    }

    /// Rows in `range`, metadata unchanged.
    pub fn slice_time(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.t.len() {
            return Err(Error::Config(format!(
                "time range {range:?} outside dataset of {} rows",
                self.t.len()
            )));
        }
        Ok(Self {
            t: self.t[range.clone()].to_vec(),
            c: self.c[range.clone()].to_vec(),
            ct: self.ct[range].to_vec(),
            meta: self.meta.clone(),
        })
    }

    /// Builds a dataset from stacked `[c; ct]` states.
    pub fn from_states(t: Vec<f64>, states: &[Vec<f64>], meta: DatasetMeta) -> Result<Self> {
        let n = meta.grid.n_volumes;
        let (c, ct) = states
            .iter()
            .map(|s| (s[..n].to_vec(), s[n..2 * n].to_vec()))
            .unzip();
        Self::new(t, c, ct, meta)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::toy_meta;
    use super::*;

    #[test]
    fn shape_checks() {
        let ok = Dataset::new(
            vec![0.0, 1.0],
            vec![vec![0.0; 3]; 2],
            vec![vec![0.0; 3]; 2],
            toy_meta(3),
        );
        assert!(ok.is_ok());
        let short = Dataset::new(vec![0.0, 1.0], vec![vec![0.0; 3]; 1], vec![vec![0.0; 3]; 2], toy_meta(3));
        assert!(matches!(short, Err(Error::Format(_))));
        let ragged = Dataset::new(
            vec![0.0, 1.0],
            vec![vec![0.0; 3], vec![0.0; 2]],
            vec![vec![0.0; 3]; 2],
            toy_meta(3),
        );
        assert!(matches!(ragged, Err(Error::Format(_))));
        let unsorted = Dataset::new(vec![1.0, 1.0], vec![vec![0.0; 3]; 2], vec![vec![0.0; 3]; 2], toy_meta(3));
        assert!(unsorted.is_err());
    }
}
