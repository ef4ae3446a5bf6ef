//! Observables of a dataset: the outlet breakthrough curve and spatial
//! profiles at one time.

use crate::dataset::{Dataset, Field};
use crate::error::{Error, Result};

/// `(t, c)` at the last volume.
pub fn extract_breakthrough(data: &Dataset) -> Vec<(f64, f64)> {
    let last = data.n_volumes() - 1;
    data.t.iter().zip(&data.c).map(|(&t, row)| (t, row[last])).collect()
}

pub fn extract_profile(data: &Dataset, which: Field, t_index: usize) -> Result<Vec<f64>> {
    data.field(which)
        .get(t_index)
        .cloned()
        .ok_or_else(|| Error::Domain(format!("time index {t_index} outside 0..{}", data.n_times())))
}
