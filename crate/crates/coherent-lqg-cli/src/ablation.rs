//! The eleven-row ablation grid on the squeezed scenario: feasibility
//! rules, penalty mode, value scaling, and search range are varied one
//! axis at a time against the full algorithm in row 0.

use coherent_lqg::de::{DEConfig, PenaltyMode, RangeMode};
use serde::Serialize;

use crate::CliError;

/// Strict feasibility is realized as an effectively-exact relaxation
/// tolerance at double precision.
pub const STRICT_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeasibilityMode {
    /// Relaxed feasibility rules (δ = 0.01).
    Relaxed,
    /// Strict feasibility rules (δ = 1e-12).
    Strict,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationVariant {
    pub row: usize,
    pub feasibility: FeasibilityMode,
    pub penalty: PenaltyMode,
    pub alpha: f64,
    pub range: RangeMode,
}

/// Builds the grid row. `scaled_fixed_range` selects whether a fixed
/// range combined with value scaling is interpreted in the scaled search
/// space (the default) or in physical units.
pub fn variant(row: usize, scaled_fixed_range: bool) -> Result<AblationVariant, CliError> {
    use FeasibilityMode::*;
    let fixed = |half_width: f64| RangeMode::Fixed { half_width, scaled: scaled_fixed_range };
    // with alpha = 1 both interpretations coincide; keep them scaled
    let fixed_real = |half_width: f64| RangeMode::Fixed { half_width, scaled: true };
    let v = |feasibility, penalty, alpha, range| AblationVariant { row, feasibility, penalty, alpha, range };
    Ok(match row {
        0 => v(Relaxed, PenaltyMode::Scheduled, 1000.0, RangeMode::Adaptive),
        1 => v(Strict, PenaltyMode::Scheduled, 1000.0, RangeMode::Adaptive),
        2 => v(Relaxed, PenaltyMode::Fixed { rho: 0.0 }, 1000.0, RangeMode::Adaptive),
        3 => v(Relaxed, PenaltyMode::Fixed { rho: 100.0 }, 1000.0, RangeMode::Adaptive),
        4 => v(Relaxed, PenaltyMode::Fixed { rho: 1e5 }, 1000.0, RangeMode::Adaptive),
        5 => v(Relaxed, PenaltyMode::Fixed { rho: 1e10 }, 1000.0, RangeMode::Adaptive),
        6 => v(Relaxed, PenaltyMode::Scheduled, 1.0, RangeMode::Adaptive),
        7 => v(Relaxed, PenaltyMode::Scheduled, 1000.0, fixed(10.0)),
        8 => v(Relaxed, PenaltyMode::Scheduled, 1.0, fixed_real(10.0)),
        9 => v(Relaxed, PenaltyMode::Scheduled, 1.0, fixed_real(100.0)),
        10 => v(Relaxed, PenaltyMode::Scheduled, 1.0, fixed_real(1000.0)),
        other => return Err(CliError::Usage(format!("ablation row {other} out of range 0..=10"))),
    })
}

impl AblationVariant {
    pub fn apply(&self, cfg: &mut DEConfig) {
        cfg.delta = match self.feasibility {
            FeasibilityMode::Relaxed => 0.01,
            FeasibilityMode::Strict => STRICT_DELTA,
        };
        cfg.penalty = self.penalty;
        cfg.alpha = self.alpha;
        cfg.range = self.range;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_zero_is_full_algorithm() {
        let v = variant(0, true).unwrap();
        assert_eq!(v.feasibility, FeasibilityMode::Relaxed);
        assert_eq!(v.penalty, PenaltyMode::Scheduled);
        assert_eq!(v.alpha, 1000.0);
        assert_eq!(v.range, RangeMode::Adaptive);
    }

    #[test]
    fn row_eight_unit_scaling_fixed_range() {
        let v = variant(8, true).unwrap();
        assert_eq!(v.alpha, 1.0);
        assert_eq!(v.range, RangeMode::Fixed { half_width: 10.0, scaled: true });
    }

    #[test]
    fn out_of_range_row_rejected() {
        assert!(variant(11, true).is_err());
    }
}
