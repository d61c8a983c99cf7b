use serde::Serialize;

use super::{CVector, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// Residual norms of the accepted pivot columns, in pivot order.
    pub retained: Vec<f64>,
    /// Largest residual left after the last accepted column (0 if none left).
    pub first_rejected: f64,
}

impl RankReport {
    pub fn smallest_retained(&self) -> f64 {
        self.retained.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Numerical rank by Gram-Schmidt with column pivoting.
///
/// At each step the column with the largest residual (after projecting out
/// the accepted directions) is taken; the process stops when that residual is
/// at most `tol` times the largest input column norm.
pub fn column_rank(columns: &[CVector], tol: f64) -> Result<RankReport> {
    let first = columns.first().ok_or_else(|| Error::domain("column_rank needs at least one column"))?;
    let n = first.len();
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::SizeMismatch { expected: n, got: bad.len() });
    }
    let scale = columns.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut residual: Vec<CVector> = columns.to_vec();
    let mut used = vec![false; columns.len()];
    let mut basis: Vec<CVector> = Vec::new();
    let mut retained = Vec::new();
    let mut first_rejected = 0.0;
    while basis.len() < n {
        let pick = (0..residual.len())
            .filter(|&j| !used[j])
            .map(|j| (j, residual[j].norm()))
            .fold(None, |best: Option<(usize, f64)>, x| match best {
                Some(b) if b.1 >= x.1 => Some(b),
                _ => Some(x),
            });
        let Some((j, norm)) = pick else { break };
        if scale == 0.0 || norm <= tol * scale {
            first_rejected = norm;
            break;
        }
        used[j] = true;
        let q = residual[j].unscale(norm);
        for k in 0..residual.len() {
            if used[k] {
                continue;
            }
            // two passes keep the residuals orthogonal to working precision
            for _ in 0..2 {
                let proj: C64 = q.dotc(&residual[k]);
                residual[k] -= &q * proj;
            }
        }
        basis.push(q);
        retained.push(norm);
    }
    Ok(RankReport { rank: basis.len(), retained, first_rejected })
}
