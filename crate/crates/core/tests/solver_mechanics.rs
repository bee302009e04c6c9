mod common;

use ncvx_sdp::instances;
use ncvx_sdp::solver::{self, Mode, PgaOptions, PowerOptions, ShiftRule, SolverOptions, StepKind, Termination};
use ncvx_sdp::sphere::{self, HessianOperator};
use ncvx_sdp::SymmetricMatrix;

#[test]
fn per_step_increments_meet_ascent_bounds() {
    let (tally, failures) = common::ascent_run(20, 40);
    assert!(failures.is_empty(), "{failures:?}");
    assert!(tally.gradient > 0 && tally.eigen_a > 0 && tally.eigen_b > 0, "{tally:?}");
}

#[test]
fn power_method_reaches_half_of_lambda_max() {
    let (ok, trials) = common::power_method_trials(100);
    assert!(ok * 100 >= 95 * trials, "{ok}/{trials}");
}

#[test]
fn power_method_direction_finding_small() {
    // n = 20, k = 2 with N_H = ⌈8‖A‖₁ log n / max(λ_max, ε)⌉
    let mut ok = 0;
    for seed in 0..20 {
        let a = instances::goe(20, seed).unwrap();
        let s = sphere::random_config(20, 2, seed + 50).unwrap();
        let lmax = common::lambda_max_oracle(&a, &s);
        let power = PowerOptions { lower: lmax.max(1e-3), ..PowerOptions::default() };
        let d = solver::direction_finding(&a, &s, f64::INFINITY, &power, seed).unwrap();
        let g = sphere::gradient(&a, &s).unwrap();
        assert!((d.u.norm() - 1.0).abs() < 1e-12);
        assert!(d.u.dot(g.rows()) >= 0.0);
        if d.lambda_h.unwrap() >= 0.5 * lmax {
            ok += 1;
        }
    }
    assert!(ok >= 19, "{ok}/20");
}

#[test]
fn zero_power_iterations_return_the_start() {
    let a = instances::goe(10, 1).unwrap();
    let s = sphere::random_config(10, 3, 2).unwrap();
    let h = HessianOperator::new(&a, &s).unwrap();
    let u = solver::power_method(&h, 1.0, 0, 7);
    let mut r = ncvx_sdp::rng::seeded(7);
    let start = {
        use ncvx_sdp::geometry::Geometry;
        ncvx_sdp::sphere::Sphere.random_tangent(s.rows(), &mut r)
    };
    assert_eq!(u.rows(), &start);
    // Hess ≡ 0 for the identity: the shift keeps the start direction
    let id = SymmetricMatrix::identity(10);
    let h0 = HessianOperator::new(&id, &s).unwrap();
    let v = solver::power_method(&h0, 1.0, 25, 7);
    assert!((v.rows() - &start).amax() < 1e-12);
}

#[test]
fn trace_is_monotone_and_certificate_is_sound() {
    for seed in 0..4u64 {
        let a = instances::goe(60, seed).unwrap();
        let opts = SolverOptions { epsilon: Some(0.05), ..SolverOptions::warm(&a, 3, seed) };
        let r = solver::solve(&a, &opts).unwrap();
        assert!(r.converged, "{}", r.summary_line());
        let tol = 1e-9 * a.l1_norm() * 60.0;
        for w in r.trace.windows(2) {
            if w[1].kind != StepKind::Pga {
                assert!(w[1].objective >= w[0].objective - tol);
            }
        }
        for probe in 0..5 {
            let power = PowerOptions { shift: ShiftRule::L1, lower: r.epsilon, ..PowerOptions::default() };
            let lh = solver::curvature_probe(&ncvx_sdp::sphere::Sphere, &a, r.sigma.rows(), &power, 1_000 + probe).unwrap();
            assert!(lh <= 2.0 * r.epsilon, "fresh probe {lh} above 2ε");
        }
        let lmax = common::lambda_max_oracle(&a, &r.sigma);
        assert!(lmax <= 2.0 * r.epsilon, "dense oracle {lmax}");
    }
}

#[test]
fn eigen_only_steps_stay_within_budget() {
    for seed in 0..3u64 {
        let a = instances::goe(40, seed).unwrap();
        let pga = PgaOptions { max_iters: 300, ..PgaOptions::tuned(&a) };
        let opts = SolverOptions {
            mode: Mode::EigenOnly,
            epsilon: Some(0.2),
            seed,
            shift: ShiftRule::Spectral,
            warm_start: Some(pga),
            ..SolverOptions::new(2)
        };
        let r = solver::solve(&a, &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations.gradient_steps, 0);
        assert!((r.iterations.eigen_steps as f64) <= r.budgets.eigen_only);
        let n = 40.0;
        let l1 = a.l1_norm();
        assert!((r.budgets.eigen_only - 64e4 * n * l1 * l1 / 0.04).abs() <= 1e-9 * r.budgets.eigen_only);
    }
}

#[test]
fn mode_b_takes_gradient_steps_far_from_stationarity() {
    let a = instances::goe(50, 3).unwrap();
    let opts = SolverOptions { epsilon: Some(0.1), max_iters: Some(30), seed: 3, ..SolverOptions::new(4) };
    let r = solver::solve(&a, &opts).unwrap();
    assert!(r.iterations.gradient_steps > 0);
    assert!(r.trace.iter().all(|t| t.kind != StepKind::Pga));
    let gstep = r.trace.iter().find(|t| t.kind == StepKind::Gradient).unwrap();
    assert!((gstep.step - r.mu_g / (20.0 * a.l1_norm())).abs() < 1e-15);
}

#[test]
fn budget_exhaustion_is_reported_not_raised() {
    let a = instances::goe(50, 4).unwrap();
    let opts = SolverOptions { epsilon: Some(1e-6), max_iters: Some(2), max_power_iters: 500, seed: 4, ..SolverOptions::new(3) };
    let r = solver::solve(&a, &opts).unwrap();
    assert!(!r.converged);
    assert_eq!(r.termination, Termination::BudgetExhausted);
    assert_eq!(r.rtr_steps(), 2);
    assert!(r.curvature_cert.is_none());
}

#[test]
fn solves_are_deterministic_per_seed() {
    let a = instances::goe(40, 9).unwrap();
    let opts = SolverOptions::warm(&a, 3, 11);
    let r1 = solver::solve(&a, &opts).unwrap();
    let r2 = solver::solve(&a, &opts).unwrap();
    assert_eq!(r1.sigma, r2.sigma);
    assert_eq!(r1.trace_csv(), r2.trace_csv());
}

#[test]
fn pga_small_step_is_monotone() {
    for seed in 0..10u64 {
        let a = instances::goe(60, 100 + seed).unwrap();
        let s0 = sphere::random_config(60, 3, seed).unwrap();
        let step = 1.0 / (20.0 * a.l1_norm());
        let r = solver::projected_gradient_ascent(&a, &s0, step, 1_000).unwrap();
        let f0 = sphere::objective(&a, &s0).unwrap();
        let mut prev = f0;
        for t in &r.trace {
            assert!(t.objective >= prev - 1e-12 * a.l1_norm());
            prev = t.objective;
        }
        assert_eq!(r.trace.len(), 1_000);
    }
}

#[test]
fn pga_identity_is_stationary() {
    let a = SymmetricMatrix::identity(8);
    let s0 = sphere::random_config(8, 3, 0).unwrap();
    let r = solver::pga_with(&a, &s0, &PgaOptions { step: Some(0.1), max_iters: 100, grad_tol: 1e-12 }).unwrap();
    assert_eq!(r.iterations.pga_steps, 0);
    assert_eq!(r.sigma, s0);
}

#[test]
fn grothendieck_bound_on_goe_300_k8() {
    use ncvx_sdp::analysis;
    let a = instances::goe(300, 21).unwrap();
    let est = analysis::estimate_sdp(&a, 0.2, 5).unwrap();
    let r = solver::solve(&a, &SolverOptions::warm(&a, 8, 6)).unwrap();
    assert!(r.converged);
    let c = analysis::grothendieck_check(&a, &r.sigma, r.epsilon, &est).unwrap();
    assert!(c.holds, "{c:?}");
    assert!(est.value_plus - r.objective <= est.rg / 7.0 + 150.0 * r.epsilon);
}
