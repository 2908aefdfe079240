mod common;

use common::{feeder, random_state};
use lbse_core::estimator::{lm_step, pseudo_from_un, EXACT_FIT_OBJECTIVE};
use lbse_core::nalgebra::{DMatrix, DVector};
use lbse_core::{
    default_plan, eval_h, eval_jacobian, un, wls, Error, MeasurementPlan, Placement, SolverOptions,
    StateVector, WlsProblem,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_plan() -> MeasurementPlan {
    let (net, _) = feeder();
    default_plan(&net, 5, 15, &Placement::reference()).unwrap()
}

fn problem<'a>(
    plan: &'a MeasurementPlan,
    adm: &'a lbse_core::AdmittanceMatrix,
    z: DVector<f64>,
) -> WlsProblem<'a> {
    WlsProblem {
        plan,
        adm,
        z,
        weights: plan.weights(),
        init: StateVector::flat(33, 0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn noise_free_measurements_recover_the_state(seed in any::<u64>()) {
        let (_, adm) = feeder();
        let plan = reference_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_state(&mut rng, 33, 0, 0.05, 15f64.to_radians());
        let rep = wls(&problem(&plan, &adm, eval_h(&truth, &plan, &adm)), &SolverOptions::default()).unwrap();
        prop_assert!(rep.converged);
        let err = (rep.x_hat.to_free() - truth.to_free()).amax();
        prop_assert!(err <= 1e-6, "max error {}", err);
    }

    #[test]
    fn least_norm_step_matches_normal_equations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (43, 65);
        let jw = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let rw = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let dx = lm_step(&jw, &rw, 0.0, 1e-12);
        let gram = &jw * jw.transpose();
        let oracle = jw.transpose() * gram.cholesky().unwrap().solve(&rw);
        prop_assert!((&dx - &oracle).amax() <= 1e-8 * oracle.amax().max(1.0));
        // no component in the null space: dx lies in the row space
        let svd = jw.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let row_space_part = v_t.transpose() * (&v_t * &dx);
        prop_assert!((&dx - row_space_part).amax() <= 1e-8);
    }

    #[test]
    fn accepted_steps_never_increase_the_objective(seed in any::<u64>()) {
        let (_, adm) = feeder();
        let plan = reference_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_state(&mut rng, 33, 0, 0.05, 15f64.to_radians());
        let noise = DVector::from_fn(plan.m(), |i, _| plan.sigmas()[i] * rng.random_range(-2.0..2.0));
        let opts = SolverOptions { trace: true, ..SolverOptions::default() };
        let rep = wls(&problem(&plan, &adm, eval_h(&truth, &plan, &adm) + noise), &opts).unwrap();
        for pair in rep.trace.windows(2) {
            prop_assert!(pair[1].objective <= pair[0].objective);
        }
    }
}

#[test]
fn flat_measurements_need_no_iterations() {
    let (_, adm) = feeder();
    let plan = reference_plan();
    let flat = StateVector::flat(33, 0);
    let rep = wls(
        &problem(&plan, &adm, eval_h(&flat, &plan, &adm)),
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(rep.converged);
    assert!(rep.iterations <= 2);
    assert!(rep.objective <= 1e-16);
}

#[test]
fn un_fits_the_realtime_measurements() {
    let (_, adm) = feeder();
    let rt = reference_plan().realtime();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let truth = random_state(&mut rng, 33, 0, 0.05, 15f64.to_radians());
        let z = eval_h(&truth, &rt, &adm);
        let rep = un(
            &z,
            &rt,
            &rt.weights(),
            &StateVector::flat(33, 0),
            &adm,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!(rep.objective <= EXACT_FIT_OBJECTIVE);
        assert!((eval_h(&rep.x_hat, &rt, &adm) - &z).amax() <= 1e-6);
    }
}

#[test]
fn pseudo_measurements_complete_a_consistent_set() {
    let (_, adm) = feeder();
    let plan = reference_plan();
    let (rt, delayed) = (plan.realtime(), plan.delayed());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth = random_state(&mut rng, 33, 0, 0.05, 15f64.to_radians());
    let z_a = eval_h(&truth, &rt, &adm);
    let x_tilde = un(
        &z_a,
        &rt,
        &rt.weights(),
        &StateVector::flat(33, 0),
        &adm,
        &SolverOptions::default(),
    )
    .unwrap()
    .x_hat;
    let z_pseudo = pseudo_from_un(&x_tilde, &delayed, &adm);
    let mut z = z_a.clone().resize_vertically(plan.m(), 0.0);
    z.rows_mut(plan.m_a(), plan.m_d()).copy_from(&z_pseudo);
    let weights = DVector::from_fn(plan.m(), |i, _| if i < plan.m_a() { 1e4 } else { 0.3 });
    let rep = wls(
        &WlsProblem {
            plan: &plan,
            adm: &adm,
            z: z.clone(),
            weights,
            init: StateVector::flat(33, 0),
        },
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(rep.converged);
    assert!(rep.objective <= 1e-10, "objective {}", rep.objective);
    assert!((eval_h(&rep.x_hat, &plan, &adm) - z).amax() <= 1e-6);
}

#[test]
fn repeated_solves_are_bit_identical() {
    let (_, adm) = feeder();
    let plan = reference_plan();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = random_state(&mut rng, 33, 0, 0.05, 15f64.to_radians());
    let noise = DVector::from_fn(plan.m(), |i, _| {
        plan.sigmas()[i] * rng.random_range(-1.0..1.0)
    });
    let p = problem(&plan, &adm, eval_h(&truth, &plan, &adm) + noise);
    let a = wls(&p, &SolverOptions::default()).unwrap();
    let b = wls(&p, &SolverOptions::default()).unwrap();
    assert_eq!(a.x_hat, b.x_hat);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn underdetermined_wls_points_to_un() {
    let (_, adm) = feeder();
    let rt = reference_plan().realtime();
    let err = wls(
        &problem(&rt, &adm, DVector::zeros(rt.m())),
        &SolverOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Observability(_)));
    assert!(err.to_string().contains("`un`"));
}

#[test]
fn slack_angle_never_moves() {
    let (_, adm) = feeder();
    let rt = reference_plan().realtime();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth = random_state(&mut rng, 33, 0, 0.05, 0.2);
    let z = eval_h(&truth, &rt, &adm);
    let rep = un(
        &z,
        &rt,
        &rt.weights(),
        &StateVector::flat(33, 0),
        &adm,
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.x_hat.theta[0], 0.0);
    let jac = eval_jacobian(&rep.x_hat, &rt, &adm);
    assert_eq!(jac.ncols(), 65);
}
