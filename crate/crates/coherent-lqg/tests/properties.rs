//! Randomized invariants for the realizability algebra, the Lyapunov
//! solver, and the optimizer primitives.

use coherent_lqg::de::{
    adaptive_bounds, binomial_crossover_with, feasibility_select, penalty_schedule, Selection,
};
use coherent_lqg::eval::{fitness, solve_lyapunov, EvaluationResult};
use coherent_lqg::scenarios::{decode, ScenarioId, ScenarioSpec};
use coherent_lqg::system::{
    derive_b21, derive_bk1, invert_b21_to_b12, make_canonical_theta, pr_residual,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![-100.0..100.0f64, -1.0..1.0f64]
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(entry(), rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

proptest! {
    // B_K1 = Θ_K C_Kᵀ diag(J) is linear in C_K.
    #[test]
    fn derive_bk1_is_linear(c1 in matrix(2, 2), c2 in matrix(2, 2), s in -10.0..10.0f64) {
        let theta = make_canonical_theta(2).unwrap();
        let lhs = derive_bk1(&(c1.clone() * s + &c2), &theta).unwrap();
        let rhs = derive_bk1(&c1, &theta).unwrap() * s + derive_bk1(&c2, &theta).unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) <= 1e-10);
    }

    // The residual M is always antisymmetric, whatever the candidate.
    #[test]
    fn pr_residual_is_antisymmetric(u in proptest::collection::vec(entry(), 20)) {
        let spec = ScenarioSpec::new(ScenarioId::B).unwrap();
        let ctrl = decode(&u, &spec).unwrap();
        let (m, k) = pr_residual(&ctrl).unwrap();
        prop_assert!(max_abs(&(m.clone() + m.transpose())) <= 1e-12 * (1.0 + k));
    }

    // B_12 -> B_21 -> B_12 is the identity up to roundoff.
    #[test]
    fn direct_coupling_round_trip(b12 in matrix(2, 2)) {
        let theta = make_canonical_theta(2).unwrap();
        let b21 = derive_b21(&b12, &theta).unwrap();
        let back = invert_b21_to_b12(&b21, &theta).unwrap();
        prop_assert!(max_abs(&(back - b12.clone())) <= 1e-12 * (1.0 + max_abs(&b12)));
    }

    // Decoding places the raw entries into the controller blocks row-major.
    #[test]
    fn decode_places_blocks(u in proptest::collection::vec(entry(), 16)) {
        let spec = ScenarioSpec::new(ScenarioId::A).unwrap();
        let ctrl = decode(&u, &spec).unwrap();
        let blocks = [&ctrl.a_k, &ctrl.c_k, &ctrl.b_k2, &ctrl.b_ky];
        for (b, block) in blocks.iter().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((block[(r, c)] - u[4 * b + 2 * r + c]).abs() <= 1e-14);
                }
            }
        }
    }

    // Shifted random matrices are Hurwitz by construction; the solver must
    // return a residual-free, (numerically) nonnegative P for Q = GGᵀ.
    #[test]
    fn lyapunov_on_random_hurwitz(m in matrix(4, 4), g in matrix(4, 4)) {
        let norm = max_abs(&m);
        let a = &m - DMatrix::identity(4, 4) * (2.0 * norm * 4.0 + 1.0);
        let q = &g * g.transpose();
        let p = solve_lyapunov(&a, &q).unwrap();
        let residual = &a * &p + &p * a.transpose() + &q;
        let scale = 1.0 + max_abs(&a) * max_abs(&p) + max_abs(&q);
        prop_assert!(max_abs(&residual) <= 1e-9 * scale);
        let lam_min = p.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(lam_min >= -1e-9 * scale);
    }

    // f = J + kϱ is monotone in k for fixed J, ϱ ≥ 0.
    #[test]
    fn fitness_monotone_in_k(j in -10.0..10.0f64, k1 in 0.0..1e3f64, dk in 0.0..1e3f64, rho in 0.0..1e10f64) {
        prop_assert!(fitness(j, k1 + dk, rho) >= fitness(j, k1, rho));
    }

    // log ϱ_p is affine in p.
    #[test]
    fn penalty_schedule_log_linear(rounds in 2usize..50, rho_max in 1e2..1e12f64) {
        let step = rho_max.ln() / (rounds as f64 - 1.0);
        for p in 0..rounds {
            let rho = penalty_schedule(p, rounds, rho_max).unwrap();
            let expected = (step * p as f64).exp();
            prop_assert!((rho.ln() - expected.ln()).abs() <= 1e-12 * (1.0 + expected.ln().abs()));
        }
    }

    // Selection never moves lexicographically upward in (V, f).
    #[test]
    fn selection_is_lexicographic(
        v1 in prop_oneof![Just(0.0), 0.0..10.0f64],
        v2 in prop_oneof![Just(0.0), 0.0..10.0f64],
        f1 in -10.0..10.0f64,
        f2 in -10.0..10.0f64,
    ) {
        let target = stub_eval(v1, f1);
        let trial = stub_eval(v2, f2);
        let winner = match feasibility_select(&target, &trial) {
            Selection::Trial => (v2, f2),
            Selection::Target => (v1, f1),
        };
        let min = if (v2, f2) <= (v1, f1) { (v2, f2) } else { (v1, f1) };
        prop_assert_eq!(winner, min);
    }

    // Bounds recentering is exact, componentwise.
    #[test]
    fn bounds_recentering_exact(best in proptest::collection::vec(entry(), 16), zeta in 1e-3..10.0f64) {
        let (lo, hi) = adaptive_bounds(&best, zeta);
        for i in 0..best.len() {
            prop_assert_eq!(lo[i], best[i] - zeta);
            prop_assert_eq!(hi[i], best[i] + zeta);
        }
    }

    // With a forced crossover position the trial differs from the target in
    // at least that component whenever donor differs there.
    #[test]
    fn crossover_keeps_forced_component(
        target in proptest::collection::vec(entry(), 8),
        donor in proptest::collection::vec(entry(), 8),
        j_rand in 0usize..8,
    ) {
        let draws = vec![1.0; 8]; // never below cr, so only j_rand crosses
        let trial = binomial_crossover_with(&target, &donor, 0.5, j_rand, &draws);
        prop_assert_eq!(trial[j_rand], donor[j_rand]);
        for i in (0..8).filter(|&i| i != j_rand) {
            prop_assert_eq!(trial[i], target[i]);
        }
    }
}

fn stub_eval(violation: f64, fitness: f64) -> EvaluationResult {
    EvaluationResult {
        j_inf: fitness,
        h: 1.0,
        k: 0.0,
        violation,
        fitness,
        stable: true,
        spectral_abscissa: -1.0,
    }
}
