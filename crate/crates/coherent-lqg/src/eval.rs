//! The evaluation pipeline the optimizer calls on every candidate:
//! decode, assemble, Hurwitz check, Lyapunov solve, performance index,
//! constraint measures, violation, and penalized fitness.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closed_loop::{assemble, ClosedLoopSystem};
use crate::error::{Error, Result};
use crate::scenarios::{decode, ScenarioSpec};
use crate::system::pr_residual;

/// Sentinel objective for candidates whose closed loop is not Hurwitz.
pub const UNSTABLE_J: f64 = 1e12;
/// Floor added to the violation of any non-Hurwitz candidate so that every
/// solvable candidate beats every unstable one.
pub const INFEASIBILITY_FLOOR: f64 = 1e6;

/// Default relaxation on the equality constraint ‖M‖_max ≤ δ.
pub const DEFAULT_DELTA: f64 = 0.01;
/// Default margin for the λ_min(P) > 0 constraint.
pub const DEFAULT_PHI: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// LQG performance index Tr(𝓒 P 𝓒ᵀ); sentinel when unstable.
    pub j_inf: f64,
    /// λ_min(P); −1 when unstable.
    pub h: f64,
    /// Realizability residual ‖M‖_max.
    pub k: f64,
    /// Constraint violation V = max(0, −h + φ) + max(0, k − δ).
    pub violation: f64,
    /// Penalized objective J∞ + k·ϱ.
    pub fitness: f64,
    pub stable: bool,
    pub spectral_abscissa: f64,
}

impl EvaluationResult {
    pub fn feasible(&self) -> bool {
        self.violation == 0.0
    }
}

/// Largest real part over the eigenvalues of a square real matrix.
/// QR-iteration budget for the Schur-based eigensolve. Unbounded iteration
/// can crawl on ill-conditioned candidates the optimizer throws at it.
const SCHUR_MAX_ITER: usize = 2000;

pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("spectral abscissa needs a square matrix".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Solver("eigenvalue iteration did not converge".into()))?;
    schur
        .complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(None, |acc: Option<f64>, re| Some(acc.map_or(re, |a| a.max(re))))
        .ok_or_else(|| Error::Dimension("empty matrix has no spectrum".into()))
}

/// Solves `A P + P Aᵀ + Q = 0` for symmetric P by vectorizing to the
/// Kronecker system `(I⊗A + A⊗I) vec(P) = -vec(Q)` and LU-solving it.
/// The systems in scope are at most 8x8, so the 64-unknown dense solve is
/// exact territory for LU.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    if a.ncols() != m || q.nrows() != m || q.ncols() != m {
        return Err(Error::Dimension("Lyapunov solve needs square A and Q of equal size".into()));
    }
    let sym_defect = (q - q.transpose()).abs().max();
    if sym_defect > 1e-10 {
        return Err(Error::Dimension(format!(
            "Q must be symmetric, asymmetry {sym_defect:.3e}"
        )));
    }
    let sa = spectral_abscissa(a)?;
    if sa >= 0.0 {
        return Err(Error::NotHurwitz(sa));
    }
    let eye = DMatrix::identity(m, m);
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = nalgebra::DVector::from_column_slice((-q).as_slice());
    let vec_p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular Kronecker Lyapunov system".into()))?;
    let p = DMatrix::from_column_slice(m, m, vec_p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// `J∞ = Tr(𝓒 P 𝓒ᵀ)` for P solving the closed-loop Lyapunov equation
/// with Q = 𝓑𝓑ᵀ.
pub fn j_infinity(cl: &ClosedLoopSystem, p: &DMatrix<f64>) -> Result<f64> {
    if p.nrows() != cl.a_cl.nrows() || p.ncols() != cl.a_cl.ncols() {
        return Err(Error::Dimension("P must match the closed-loop state dimension".into()));
    }
    Ok((&cl.c_cl * p * cl.c_cl.transpose()).trace())
}

/// Constraint violation `V = max(0, -h + φ) + max(0, k - δ)`.
pub fn violation(h: f64, k: f64, phi: f64, delta: f64) -> f64 {
    (-h + phi).max(0.0) + (k - delta).max(0.0)
}

/// Penalized fitness `J∞ + k·ϱ`.
pub fn fitness(j_inf: f64, k: f64, rho: f64) -> f64 {
    j_inf + k * rho
}

fn unstable_sentinel(sa: f64, k: f64, rho: f64, spec: &ScenarioSpec) -> EvaluationResult {
    let _ = spec;
    EvaluationResult {
        j_inf: UNSTABLE_J,
        h: -1.0,
        k,
        violation: INFEASIBILITY_FLOOR + sa.max(0.0),
        fitness: fitness(UNSTABLE_J, k, rho),
        stable: false,
        spectral_abscissa: sa,
    }
}

/// Full evaluation of a decision vector (already in unscaled, physical
/// units). Numerical infeasibility is encoded in the result; only layout
/// errors are returned as `Err`.
pub fn evaluate(
    decision: &[f64],
    spec: &ScenarioSpec,
    rho: f64,
    phi: f64,
    delta: f64,
) -> Result<EvaluationResult> {
    let ctrl = decode(decision, spec)?;
    let (_, k) = pr_residual(&ctrl)?;
    let cl = assemble(&spec.plant, &ctrl, spec.coupling)?;

    // exp(r) in the squeezed scenario can overflow for wild candidates
    if cl.a_cl.iter().any(|v| !v.is_finite())
        || cl.b_cl.iter().any(|v| !v.is_finite())
        || cl.c_cl.iter().any(|v| !v.is_finite())
        || !k.is_finite()
    {
        return Ok(unstable_sentinel(UNSTABLE_J, UNSTABLE_J, rho, spec));
    }

    // A candidate whose eigensolve refuses to converge is as useless as an
    // unstable one; flag it instead of aborting the run.
    let sa = match spectral_abscissa(&cl.a_cl) {
        Ok(sa) => sa,
        Err(Error::Solver(_)) => return Ok(unstable_sentinel(UNSTABLE_J, k, rho, spec)),
        Err(e) => return Err(e),
    };
    if sa >= 0.0 {
        return Ok(unstable_sentinel(sa, k, rho, spec));
    }

    let q = &cl.b_cl * cl.b_cl.transpose();
    if q.iter().any(|v| !v.is_finite()) {
        return Ok(unstable_sentinel(UNSTABLE_J, k, rho, spec));
    }
    // Borderline-Hurwitz candidates can leave the Kronecker system
    // numerically singular; score them as unusable rather than failing.
    let p = match solve_lyapunov(&cl.a_cl, &q) {
        Ok(p) => p,
        Err(Error::Solver(_)) | Err(Error::NotHurwitz(_)) => {
            return Ok(unstable_sentinel(UNSTABLE_J, k, rho, spec))
        }
        Err(e) => return Err(e),
    };
    let j = j_infinity(&cl, &p)?;
    let h = p
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    // J∞ is a steady-state variance; a negative value means the Lyapunov
    // solve was numerical garbage (borderline-Hurwitz, wildly scaled
    // candidate), so don't let the optimizer exploit it.
    if !j.is_finite() || !h.is_finite() || j < 0.0 {
        return Ok(unstable_sentinel(UNSTABLE_J, k, rho, spec));
    }
    let v = violation(h, k, phi, delta);
    Ok(EvaluationResult {
        j_inf: j,
        h,
        k,
        violation: v,
        fitness: fitness(j, k, rho),
        stable: true,
        spectral_abscissa: sa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{encode, published_fixture, ScenarioId, ScenarioSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn spectral_abscissa_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_abscissa_rotation_is_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, -0.1, 0.0]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_hand_cases() {
        let a = -DMatrix::identity(2, 2);
        let q = 2.0 * DMatrix::identity(2, 2);
        let p = solve_lyapunov(&a, &q).unwrap();
        assert_abs_diff_eq!(p, DMatrix::identity(2, 2), epsilon = 1e-12);

        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let p = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(1, 1)], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_rejects_marginally_stable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, -0.1, 0.0]);
        let err = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::NotHurwitz(_)));
    }

    #[test]
    fn violation_cases() {
        assert_eq!(violation(DEFAULT_PHI, DEFAULT_DELTA, DEFAULT_PHI, DEFAULT_DELTA), 0.0);
        assert_abs_diff_eq!(violation(-1.0, 0.0, 1e-6, 0.01), 1.000001, epsilon = 1e-12);
        assert_abs_diff_eq!(violation(1.0, 0.02, 1e-6, 0.01), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn fitness_cases() {
        assert_eq!(fitness(3.0, 0.0, 1e10), 3.0);
        assert_abs_diff_eq!(fitness(2.0, 0.01, 100.0), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fitness(4.08013169, 7.66610068e-20, 1e10),
            4.08013169 + 7.66610068e-10,
            epsilon = 1e-15
        );
    }

    #[test]
    fn evaluate_fixture_a() {
        let spec = ScenarioSpec::new(ScenarioId::A).unwrap();
        let u = encode(&published_fixture(ScenarioId::A).unwrap().controller, &spec).unwrap();
        let r = evaluate(&u, &spec, 1.0, DEFAULT_PHI, DEFAULT_DELTA).unwrap();
        assert!(r.stable);
        assert_abs_diff_eq!(r.j_inf, 4.08013169, epsilon = 1e-3);
        assert!(r.k <= 1e-6);
        assert_eq!(r.violation, 0.0);
    }

    #[test]
    fn evaluate_zero_decision_is_unstable_sentinel() {
        let spec = ScenarioSpec::new(ScenarioId::A).unwrap();
        let r = evaluate(&vec![0.0; 16], &spec, 1.0, DEFAULT_PHI, DEFAULT_DELTA).unwrap();
        assert!(!r.stable);
        assert_eq!(r.j_inf, UNSTABLE_J);
        assert_eq!(r.h, -1.0);
        assert!(r.violation >= INFEASIBILITY_FLOOR);
    }

    #[test]
    fn evaluate_zero_rho_fitness_is_j() {
        let spec = ScenarioSpec::new(ScenarioId::A).unwrap();
        let u = encode(&published_fixture(ScenarioId::A).unwrap().controller, &spec).unwrap();
        let r = evaluate(&u, &spec, 0.0, DEFAULT_PHI, DEFAULT_DELTA).unwrap();
        assert_eq!(r.fitness, r.j_inf);
    }
}
