//! Interferential mixedness reduction (IMR).
//!
//! Only the success branch is simulated. Everything probabilistic is carried
//! by the reported success probability and copy counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, DensityMatrix, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImrError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("mixedness {0:.6} exceeds 1/3")]
    TooMixed(f64),
    #[error("infeasible IMR configuration: {0}")]
    Infeasible(String),
    #[error("invalid IMR configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IMRConfig {
    /// Target reduction factor g > 1.
    pub reduction_factor: f64,
    /// Number of purified output copies M.
    pub copies_out: u64,
    /// Tolerated failure probability.
    pub failure_threshold: f64,
}

impl IMRConfig {
    pub fn validate(&self) -> Result<(), ImrError> {
        if !(self.reduction_factor > 1.0) || !self.reduction_factor.is_finite() {
            return Err(ImrError::InvalidConfig(
                "reduction_factor must be > 1".into(),
            ));
        }
        if self.copies_out == 0 {
            return Err(ImrError::InvalidConfig("copies_out must be >= 1".into()));
        }
        if !(self.failure_threshold > 0.0 && self.failure_threshold < 1.0) {
            return Err(ImrError::InvalidConfig(
                "failure_threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IMROutcome {
    pub state: DensityMatrix,
    pub rounds_used: u32,
    pub copies_consumed: u128,
    pub success_probability: f64,
    /// Survival rate c used for the copy count (1 when no round ran).
    pub survival_rate: f64,
    /// Multiplicity of the largest eigenvalue of the input.
    pub top_multiplicity: usize,
}

/// Rounds, survival rate and bookkeeping for one IMR invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IMRPlan {
    pub rounds: u32,
    pub survival_rate: f64,
    pub copies_consumed: u128,
    pub success_probability: f64,
}

/// 1 − λ_max.
pub fn mixedness(rho: &DensityMatrix) -> f64 {
    (1.0 - rho.spectrum().max()).max(0.0)
}

/// (ρ + ρ²)/(1 + Tr ρ²) and the success probability (1 + Tr ρ²)/2.
pub fn imr_round(rho: &DensityMatrix) -> Result<(DensityMatrix, f64), ImrError> {
    let m = rho.matrix();
    let sq = m * m;
    let purity = sq.trace().re;
    let out = (m + sq) * c(1.0 / (1.0 + purity), 0.0);
    let state = DensityMatrix::repaired(out, rho.factor_dims().to_vec())?;
    Ok((state, 0.5 * (1.0 + purity)))
}

/// Upper bound (1+x)/(2−2x+x²) on the per-round ratio x'/x.
pub fn imr_ratio_bound(x: f64) -> f64 {
    (1.0 + x) / (2.0 - 2.0 * x + x * x)
}

/// Smallest R whose product of per-round bound factors, evaluated along the
/// tracked mixedness, reaches 1/g.
pub fn imr_rounds_needed(x: f64, g: f64) -> u32 {
    if x <= 0.0 {
        return 0;
    }
    let mut prod = 1.0;
    let mut xj = x;
    let mut r = 0;
    while prod > 1.0 / g {
        let f = imr_ratio_bound(xj);
        prod *= f;
        xj *= f;
        r += 1;
    }
    r
}

/// Survival rate, copy count and success-probability bound for R rounds
/// starting from mixedness x.
pub fn imr_plan(x: f64, cfg: &IMRConfig) -> Result<IMRPlan, ImrError> {
    cfg.validate()?;
    if x > 1.0 / 3.0 + 1e-12 {
        return Err(ImrError::TooMixed(x));
    }
    let rounds = imr_rounds_needed(x, cfg.reduction_factor);
    if rounds == 0 {
        return Ok(IMRPlan {
            rounds,
            survival_rate: 1.0,
            copies_consumed: cfg.copies_out as u128,
            success_probability: 1.0,
        });
    }
    let m = cfg.copies_out as f64;
    let slack = ((rounds as f64 / cfg.failure_threshold).ln() / m).sqrt();
    let raw = 1.0 - x - slack;
    if raw <= 0.0 {
        return Err(ImrError::Infeasible(format!(
            "survival rate {:.4} <= 0 for M={} with {} rounds; raise copies_out",
            raw, cfg.copies_out, rounds
        )));
    }
    let survival = raw.min(0.5);
    let gap = 1.0 - x - survival;
    let success = (1.0 - rounds as f64 * (-m * gap * gap).exp()).clamp(0.0, 1.0);
    let copies = (m * (2.0 / survival).powi(rounds as i32)).ceil() as u128;
    Ok(IMRPlan {
        rounds,
        survival_rate: survival,
        copies_consumed: copies,
        success_probability: success,
    })
}

/// Runs the planned number of rounds on the success branch.
pub fn imr_subroutine(rho: &DensityMatrix, cfg: &IMRConfig) -> Result<IMROutcome, ImrError> {
    let sp = rho.spectrum();
    let x = (1.0 - sp.max()).max(0.0);
    let top_multiplicity = sp
        .eigenvalues
        .iter()
        .filter(|l| (sp.max() - **l).abs() < 1e-12)
        .count();
    let plan = imr_plan(x, cfg)?;
    let mut state = rho.clone();
    for _ in 0..plan.rounds {
        state = imr_round(&state)?.0;
    }
    Ok(IMROutcome {
        state,
        rounds_used: plan.rounds,
        copies_consumed: plan.copies_consumed,
        success_probability: plan.success_probability,
        survival_rate: plan.survival_rate,
        top_multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_pure, Hermitian};

    fn diag(v: &[f64]) -> DensityMatrix {
        DensityMatrix::new(
            Hermitian::from_real_diagonal(v).into_matrix(),
            vec![v.len()],
        )
        .unwrap()
    }

    #[test]
    fn mixedness_cases() {
        assert!(mixedness(&random_pure(3, 1).density()) < 1e-12);
        assert!((mixedness(&DensityMatrix::maximally_mixed(vec![4])) - 0.75).abs() < 1e-12);
        assert!((mixedness(&diag(&[0.8, 0.2])) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_round_values() {
        let (out, p) = imr_round(&diag(&[0.8, 0.2])).unwrap();
        assert!((out.matrix()[(0, 0)].re - 1.44 / 1.68).abs() < 1e-12);
        assert!((p - 0.84).abs() < 1e-12);
        let (mm, p) = imr_round(&DensityMatrix::maximally_mixed(vec![3])).unwrap();
        assert!((mm.matrix()[(1, 1)].re - 1.0 / 3.0).abs() < 1e-12);
        assert!((p - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
        let psi = random_pure(3, 2).density();
        let (same, p) = imr_round(&psi).unwrap();
        assert!((same.matrix() - psi.matrix()).norm() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_bound_values() {
        assert_eq!(imr_ratio_bound(0.0), 0.5);
        assert!((imr_ratio_bound(1.0 / 3.0) - 12.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn pure_input_needs_no_rounds() {
        let cfg = IMRConfig {
            reduction_factor: 2.0,
            copies_out: 10,
            failure_threshold: 0.1,
        };
        let out = imr_subroutine(&random_pure(2, 3).density(), &cfg).unwrap();
        assert_eq!(out.rounds_used, 0);
        assert_eq!(out.copies_consumed, 10);
        assert_eq!(out.success_probability, 1.0);
    }

    #[test]
    fn round_counts() {
        // Bound factor at x = 0.01 is 1.01/1.9801 > 1/2, so g = 2 takes two rounds.
        assert_eq!(imr_rounds_needed(0.01, 2.0), 2);
        assert_eq!(imr_rounds_needed(0.1, 2.0), 2);
        assert_eq!(imr_rounds_needed(0.1, 4.0), 3);
        let cfg = IMRConfig {
            reduction_factor: 4.0,
            copies_out: 1000,
            failure_threshold: 0.01,
        };
        let out = imr_subroutine(&diag(&[0.9, 0.1]), &cfg).unwrap();
        assert_eq!(out.rounds_used, 3);
        let mut lam = [0.9f64, 0.1];
        for _ in 0..3 {
            let n: f64 = 1.0 + lam.iter().map(|l| l * l).sum::<f64>();
            lam = [lam[0] * (1.0 + lam[0]) / n, lam[1] * (1.0 + lam[1]) / n];
        }
        assert!((out.state.matrix()[(0, 0)].re - lam[0]).abs() < 1e-12);
        assert!(mixedness(&out.state) <= 0.1 / 4.0);
    }

    #[test]
    fn plan_bookkeeping() {
        let cfg = IMRConfig {
            reduction_factor: 2.0,
            copies_out: 1000,
            failure_threshold: 0.01,
        };
        let plan = imr_plan(0.01, &cfg).unwrap();
        assert_eq!(plan.survival_rate, 0.5);
        assert_eq!(plan.copies_consumed, 1000 * 16);
        assert!(plan.success_probability >= 1.0 - cfg.failure_threshold);
    }

    #[test]
    fn plan_errors() {
        let cfg = IMRConfig {
            reduction_factor: 2.0,
            copies_out: 1,
            failure_threshold: 0.01,
        };
        assert!(matches!(imr_plan(0.1, &cfg), Err(ImrError::Infeasible(_))));
        let ok = IMRConfig {
            copies_out: 1000,
            ..cfg
        };
        assert!(matches!(imr_plan(0.4, &ok), Err(ImrError::TooMixed(_))));
        let bad = IMRConfig {
            reduction_factor: 1.0,
            ..ok
        };
        assert!(matches!(
            imr_plan(0.1, &bad),
            Err(ImrError::InvalidConfig(_))
        ));
    }
}
