//! The C index: share of (positive, negative) pairs ranked correctly.

use crate::{Result, StatsError};

/// Concordance of `probs` with binary `outcomes`; ties count one half.
/// Sort-based, O(n log n).
pub fn concordance(probs: &[f64], outcomes: &[bool]) -> Result<f64> {
    if probs.len() != outcomes.len() {
        return Err(StatsError::LengthMismatch {
            left: probs.len(),
            right: outcomes.len(),
        });
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(StatsError::NonFinite { what: "probabilities".into() });
    }
    let n_pos = outcomes.iter().filter(|&&o| o).count();
    let n_neg = outcomes.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass { n: outcomes.len() });
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));

    let mut concordant = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0usize, 0usize);
        while j < order.len() && probs[order[j]] == probs[order[i]] {
            if outcomes[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        concordant += (pos * neg_below) as f64 + 0.5 * (pos * neg) as f64;
        neg_below += neg;
        i = j;
    }
    Ok(concordant / (n_pos as f64 * n_neg as f64))
}
