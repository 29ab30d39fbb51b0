//! Elementwise relative comparison of two FRFs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DofLabel, FrfMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub max_rel_err: f64,
    pub argmax_freq_hz: f64,
    pub argmax_out: DofLabel,
    pub argmax_in: DofLabel,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest `|a−b| / max(|a|, |b|, floor)` over all entries, with
/// `floor = 1e-12 ·` the largest magnitude in either FRF. `b` is aligned to
/// the labels of `a` and may hold extra DOFs.
pub fn compare_frf(a: &FrfMatrix, b: &FrfMatrix, tolerance: f64) -> Result<ComparisonResult> {
    if a.freqs_hz.len() != b.freqs_hz.len()
        || a
            .freqs_hz
            .iter()
            .zip(&b.freqs_hz)
            .any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0))
    {
        return Err(Error::GridMismatch);
    }
    let b = b.select(&a.inputs, &a.outputs)?;
    let peak = |f: &FrfMatrix| {
        f.data
            .iter()
            .flat_map(|h| h.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    };
    let floor = 1e-12 * peak(a).max(peak(&b));
    let mut worst = (0.0f64, 0usize, 0usize, 0usize);
    for (k, (ha, hb)) in a.data.iter().zip(&b.data).enumerate() {
        for i in 0..ha.nrows() {
            for j in 0..ha.ncols() {
                let (x, y) = (ha[(i, j)], hb[(i, j)]);
                let den = x.norm().max(y.norm()).max(floor);
                let e = if den == 0.0 { 0.0 } else { (x - y).norm() / den };
                if e > worst.0 || e.is_nan() {
                    worst = (e, k, i, j);
                }
            }
        }
    }
    let (err, k, i, j) = worst;
    Ok(ComparisonResult {
        max_rel_err: err,
        argmax_freq_hz: a.freqs_hz[k],
        argmax_out: a.outputs[i].clone(),
        argmax_in: a.inputs[j].clone(),
        tolerance,
        pass: err <= tolerance,
    })
}
