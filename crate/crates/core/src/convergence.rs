//! Empirical convergence orders from refinement studies with halving steps.

use crate::error::{Error, Result};

/// One refinement level: step size and its terminal error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub steps: usize,
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: Level,
    /// `log₂(e_{2h}/e_h)` against the previous level; `None` on the first.
    pub order: Option<f64>,
    /// The error did not decrease, or a ratio is not finite.
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn any_warning(&self) -> bool {
        self.rows.iter().any(|r| r.warning)
    }

    /// Every order lies in `[lo, hi]` and no warning was raised.
    pub fn orders_within(&self, lo: f64, hi: f64) -> bool {
        !self.any_warning() && self.orders().iter().all(|p| (lo..=hi).contains(p))
    }

    /// Ratios `e_{2h}/e_h` of consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].level.error / w[1].level.error).collect()
    }
}

pub const MIN_LEVELS: usize = 3;

/// Empirical orders over consecutive levels, which must halve `h`.
pub fn emit_convergence(levels: &[Level]) -> Result<ConvergenceTable> {
    if levels.len() < MIN_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "convergence study needs ≥ {MIN_LEVELS} levels, got {}",
            levels.len()
        )));
    }
    for w in levels.windows(2) {
        let ratio = w[0].h / w[1].h;
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("levels must halve h, got ratio {ratio}")));
        }
    }
    let mut rows = Vec::with_capacity(levels.len());
    for (i, level) in levels.iter().enumerate() {
        let (order, warning) = if i == 0 {
            (None, !level.error.is_finite())
        } else {
            let prev = levels[i - 1].error;
            let p = (prev / level.error).log2();
            (Some(p), !p.is_finite() || level.error >= prev)
        };
        rows.push(ConvergenceRow { level: *level, order, warning });
    }
    Ok(ConvergenceTable { rows })
}

/// Levels `N₀, 2N₀, 4N₀, …` on a fixed horizon.
pub fn halving_levels(horizon: f64, base_steps: usize, count: usize) -> Vec<(usize, f64)> {
    (0..count).map(|k| {
        let steps = base_steps << k;
        (steps, horizon / steps as f64)
    }).collect()
}
