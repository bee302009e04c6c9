#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use ncvx_sdp::instances;
use ncvx_sdp::rng;
use ncvx_sdp::solver::{self, Mode, PgaOptions, PowerOptions, ShiftRule, SolverOptions, StepKind};
use ncvx_sdp::sphere::{self, SphereConfig, TangentField};
use ncvx_sdp::stiefel::{self, StiefelConfig};
use ncvx_sdp::SymmetricMatrix;

/// Outcome of one numbered check, printed by the acceptance harness.
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// Test matrices of three flavours: GOE, dense uniform entries, sparse signed graph.
pub fn test_matrix(n: usize, seed: u64) -> SymmetricMatrix {
    match seed % 3 {
        0 => instances::goe(n, seed).unwrap(),
        1 => {
            let mut r = rng::seeded(seed);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = r.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            SymmetricMatrix::from_dense(m).unwrap()
        }
        _ => {
            let mut r = rng::seeded(seed);
            let mut t = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if r.gen_bool(0.15) {
                        t.push((i, j, if r.gen_bool(0.5) { 1.0 } else { -1.0 }));
                    }
                }
            }
            SymmetricMatrix::from_triplets(n, t).unwrap()
        }
    }
}

/// Central first difference.
pub fn d1(g: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (g(t + h) - g(t - h)) / (2.0 * h)
}

/// Central second difference.
pub fn d2(g: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (g(t + h) - 2.0 * g(t) + g(t - h)) / (h * h)
}

/// Central third difference.
pub fn d3(g: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (g(t + 2.0 * h) - 2.0 * g(t + h) + 2.0 * g(t - h) - g(t - 2.0 * h)) / (2.0 * h * h * h)
}

/// Orthonormal basis of `{v : ⟨v, s⟩ = 0}` for a unit vector `s`.
fn complement_basis(s: &[f64]) -> Vec<Vec<f64>> {
    let k = s.len();
    let p = DMatrix::from_fn(k, k, |a, b| if a == b { 1.0 } else { 0.0 } - s[a] * s[b]);
    let eig = SymmetricEigen::new(p);
    (0..k)
        .filter(|&c| eig.eigenvalues[c] > 0.5)
        .map(|c| eig.eigenvectors.column(c).iter().copied().collect())
        .collect()
}

/// Matrix of the Hessian quadratic form `2⟨v, (A − Λ)u⟩` on an orthonormal basis
/// of the tangent space of the sphere product at `sigma`, built entry by entry.
pub fn dense_tangent_hessian(a: &SymmetricMatrix, sigma: &SphereConfig) -> DMatrix<f64> {
    let s = sigma.rows();
    let (n, k) = s.shape();
    let ad = a.to_dense();
    let lambda: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| ad[(i, j)] * (0..k).map(|c| s[(i, c)] * s[(j, c)]).sum::<f64>()).sum())
        .collect();
    let bases: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| complement_basis(&(0..k).map(|c| s[(i, c)]).collect::<Vec<_>>()))
        .collect();
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..bases[i].len()).map(move |p| (i, p))).collect();
    let dim = idx.len();
    DMatrix::from_fn(dim, dim, |r, c| {
        let (i, p) = idx[r];
        let (j, q) = idx[c];
        let dot: f64 = bases[i][p].iter().zip(&bases[j][q]).map(|(x, y)| x * y).sum();
        let coef = ad[(i, j)] - if i == j { lambda[i] } else { 0.0 };
        2.0 * coef * dot
    })
}

pub fn lambda_max_oracle(a: &SymmetricMatrix, sigma: &SphereConfig) -> f64 {
    SymmetricEigen::new(dense_tangent_hessian(a, sigma)).eigenvalues.max()
}

fn rel_err(x: f64, exact: f64, scale: f64) -> f64 {
    (x - exact).abs() / exact.abs().max(scale).max(f64::MIN_POSITIVE)
}

/// Gradient and Hessian quadratic forms against finite differences along the
/// retraction curve, and projection idempotence / self-adjointness, over 100
/// cases split between the sphere product and the Stiefel product.
pub fn geometry_suite() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for case in 0..100u64 {
        let seed = 1_000 + case;
        let (g_exact, g_scale, h_exact, h_scale, curve, proj_err): (f64, f64, f64, f64, Box<dyn Fn(f64) -> f64>, f64);
        if case % 2 == 0 {
            let n = 5 + (case as usize * 7) % 36;
            let k = 1 + (case as usize / 2) % 6;
            let a = test_matrix(n, seed);
            let s = sphere::random_config(n, k, seed + 1).unwrap();
            let u = sphere::random_tangent(&s, seed + 2);
            let grad = sphere::gradient(&a, &s).unwrap();
            g_exact = grad.dot(&u);
            g_scale = grad.norm() * u.norm();
            let h = sphere::HessianOperator::new(&a, &s).unwrap();
            let hu = sphere::hessian_apply(&h, &u).unwrap();
            h_exact = if u.norm() > 0.0 { sphere::rayleigh(&h, &u).unwrap() * u.norm().powi(2) } else { 0.0 };
            h_scale = hu.norm() * u.norm() + 1e-12 * a.l1_norm();
            if u.norm() > 0.0 {
                let direct = hu.dot(&u);
                let e = rel_err(direct, h_exact, h_scale);
                if e > 1e-10 {
                    failures.push(format!("case {case}: Hessian operator vs quadratic form {e:.2e}"));
                }
            }
            let (a2, s2, u2) = (a.clone(), s.clone(), u.clone());
            curve = Box::new(move |t| sphere::objective(&a2, &sphere::retract(&s2, &u2, t).unwrap()).unwrap());
            let v = DMatrix::from_fn(n, k, |i, j| ((i * 31 + j * 17 + case as usize) % 13) as f64 - 6.0);
            let w = DMatrix::from_fn(n, k, |i, j| ((i * 11 + j * 5 + case as usize) % 7) as f64 - 3.0);
            let pv = sphere::project_tangent(&s, &v).unwrap();
            let ppv = sphere::project_tangent(&s, pv.rows()).unwrap();
            let pw = sphere::project_tangent(&s, &w).unwrap();
            let idem = (ppv.rows() - pv.rows()).norm() / v.norm();
            let adj = (pv.rows().dot(&w) - v.dot(pw.rows())).abs() / (v.norm() * w.norm());
            proj_err = idem.max(adj);
        } else {
            let d = 2 + (case as usize / 2) % 2;
            let m = 3 + (case as usize * 5) % 10;
            let k = d + (case as usize / 4) % 4;
            let a = test_matrix(m * d, seed).with_block_dim(d).unwrap();
            let s = stiefel::oc_random_config(m, d, k, seed + 1).unwrap();
            let u = stiefel::oc_random_tangent(&s, seed + 2);
            let grad = stiefel::oc_gradient(&a, &s).unwrap();
            g_exact = grad.rows().dot(u.rows());
            g_scale = grad.norm() * u.norm();
            h_exact = stiefel::oc_rayleigh(&a, &s, &u).unwrap() * u.norm().powi(2);
            let lam = stiefel::oc_multipliers(&a, &s).unwrap();
            let au = stiefel_apply(&a, u.rows());
            h_scale = 2.0 * (au - lam.apply(u.rows())).norm() * u.norm();
            let (a2, s2, u2) = (a.clone(), s.clone(), u.clone());
            curve = Box::new(move |t| stiefel::oc_objective(&a2, &stiefel::oc_retract(&s2, &u2, t).unwrap()).unwrap());
            let v = DMatrix::from_fn(m * d, k, |i, j| ((i * 31 + j * 17 + case as usize) % 13) as f64 - 6.0);
            let w = DMatrix::from_fn(m * d, k, |i, j| ((i * 11 + j * 5 + case as usize) % 7) as f64 - 3.0);
            let pv = stiefel::oc_project_tangent(&s, &v).unwrap();
            let ppv = stiefel::oc_project_tangent(&s, pv.rows()).unwrap();
            let pw = stiefel::oc_project_tangent(&s, &w).unwrap();
            let idem = (ppv.rows() - pv.rows()).norm() / v.norm();
            let adj = (pv.rows().dot(&w) - v.dot(pw.rows())).abs() / (v.norm() * w.norm());
            proj_err = idem.max(adj);
        }
        let g_fd = d1(&*curve, 0.0, 1e-5);
        let h_fd = d2(&*curve, 0.0, 1e-4);
        let ge = rel_err(g_fd, g_exact, g_scale);
        let he = rel_err(h_fd, h_exact, h_scale);
        worst = (worst.0.max(ge), worst.1.max(he), worst.2.max(proj_err));
        if ge > 1e-5 {
            failures.push(format!("case {case}: gradient rel err {ge:.2e}"));
        }
        if he > 1e-3 {
            failures.push(format!("case {case}: Hessian rel err {he:.2e}"));
        }
        if proj_err > 1e-12 {
            failures.push(format!("case {case}: projection err {proj_err:.2e}"));
        }
    }
    let detail = format!(
        "100 cases; worst rel err gradient {:.1e} (tol 1e-5), Hessian {:.1e} (tol 1e-3), projection {:.1e} (tol 1e-12){}",
        worst.0,
        worst.1,
        worst.2,
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    Outcome::new(failures.is_empty(), detail)
}

fn stiefel_apply(a: &SymmetricMatrix, u: &DMatrix<f64>) -> DMatrix<f64> {
    ncvx_sdp::symmat::symmatmul(a, u).unwrap()
}

/// Unit tangent vectors of three shapes: Gaussian, supported on one row, and
/// supported on a few rows.
pub fn structured_tangent(s: &SphereConfig, seed: u64) -> TangentField {
    let (n, k) = (s.n(), s.k());
    let base = sphere::random_tangent(s, seed);
    let rows = match seed % 3 {
        0 => base.rows().clone(),
        1 => {
            let i = (seed as usize) % n;
            DMatrix::from_fn(n, k, |r, c| if r == i { base.rows()[(r, c)] } else { 0.0 })
        }
        _ => DMatrix::from_fn(n, k, |r, c| if r % 7 == 0 { base.rows()[(r, c)] } else { 0.0 }),
    };
    let t = sphere::project_tangent(s, &rows).unwrap();
    let nrm = t.norm();
    t.scaled(1.0 / nrm)
}

/// Second and third derivatives of `t ↦ f(P(σ + t·u))` against the bounds
/// `‖A‖₁(4 + 8t + 8t²)`, `‖A‖₁(12 + 36t + 48t² + 48t³)` and
/// `6‖A‖₂ + 3‖grad f(σ)‖_F + ‖A‖₁(42t + 72t² + 48t³)`, with 1e-3 relative slack.
pub fn derivative_bounds_suite() -> Outcome {
    let ts = [0.0, 0.25, 0.5, 1.0];
    let (n, k) = (40, 4);
    let mut failures = Vec::new();
    let mut tightest = [0.0f64; 3];
    for triple in 0..50u64 {
        let seed = 5_000 + triple;
        let a = test_matrix(n, seed);
        let s = sphere::random_config(n, k, seed + 1).unwrap();
        let u = structured_tangent(&s, seed + 2);
        let l1 = a.l1_norm();
        let l2 = a.norms().l2_est;
        let g0 = sphere::gradient(&a, &s).unwrap().norm();
        let curve = |t: f64| sphere::objective(&a, &sphere::retract(&s, &u, t).unwrap()).unwrap();
        for &t in &ts {
            let f2 = d2(&curve, t, 1e-4).abs();
            let f3 = d3(&curve, t, 1e-3).abs();
            let b2 = l1 * (4.0 + 8.0 * t + 8.0 * t * t);
            let b3 = l1 * (12.0 + 36.0 * t + 48.0 * t * t + 48.0 * t.powi(3));
            let b4 = 6.0 * l2 + 3.0 * g0 + l1 * (42.0 * t + 72.0 * t * t + 48.0 * t.powi(3));
            for (idx, (val, bound)) in [(f2, b2), (f3, b3), (f3, b4)].into_iter().enumerate() {
                tightest[idx] = tightest[idx].max(val / bound);
                if val > bound * (1.0 + 1e-3) {
                    failures.push(format!("triple {triple} t={t} bound #{idx}: {val:.4e} > {bound:.4e}"));
                }
            }
        }
    }
    let detail = format!(
        "50 triples x 4 values of t; max |f''|/bound {:.3}, |f'''|/bound {:.3}, |f'''|/improved bound {:.3}{}",
        tightest[0],
        tightest[1],
        tightest[2],
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    Outcome::new(failures.is_empty(), detail)
}

/// Counts of checked steps per branch.
#[derive(Debug, Default, Clone, Copy)]
pub struct AscentTally {
    pub gradient: usize,
    pub eigen_a: usize,
    pub eigen_b: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

/// Runs single trust-region steps along trajectories on random instances and
/// checks each realized increment against the per-branch lower bound:
/// gradient `μ_G²/(40‖A‖₁)`, eigen (a) `λ_H³/(4·10⁴‖A‖₁²)`, eigen (b)
/// `min(λ_H²/(864‖A‖₁), λ_H³/(576‖A‖₂²))`, each less `1e-9·n·‖A‖₁`.
pub fn ascent_run(instances: u64, steps: usize) -> (AscentTally, Vec<String>) {
    let mut tally = AscentTally { worst_ratio: f64::INFINITY, ..Default::default() };
    let mut failures = Vec::new();
    for inst in 0..instances {
        let seed = 9_000 + inst;
        let n = 10 + (inst as usize * 13) % 40;
        let k = 2 + (inst as usize) % 4;
        let a = test_matrix(n, seed);
        let l1 = a.l1_norm();
        let l2 = a.norms().l2_est;
        let tol = 1e-9 * n as f64 * l1;
        for mode in [Mode::EigenOnly, Mode::GradientEigen] {
            let opts = SolverOptions {
                mode,
                epsilon: Some(1e-3 * l2),
                seed,
                shift: ShiftRule::Spectral,
                max_power_iters: 2_000,
                ..SolverOptions::new(k)
            };
            let mut s = sphere::random_config(n, k, seed + 1).unwrap();
            if mode == Mode::GradientEigen && inst % 2 == 1 {
                // start some runs below the gradient threshold so eigen-steps trigger
                let pga = PgaOptions { step: Some(0.2 / l2), max_iters: 2_000, grad_tol: 0.9 * l2 };
                s = solver::pga_with(&a, &s, &pga).unwrap().sigma;
            }
            let mut lower = 1e-3 * l2;
            for step in 0..steps {
                let out = solver::rtr_step(&a, &s, &opts, lower, seed * 1_000 + step as u64).unwrap();
                if out.certified {
                    break;
                }
                let inc = out.objective_after - out.objective_before;
                let bound = match (out.kind, mode) {
                    (StepKind::Gradient, _) => {
                        tally.gradient += 1;
                        l2 * l2 / (40.0 * l1)
                    }
                    (_, Mode::EigenOnly) => {
                        tally.eigen_a += 1;
                        out.lambda_h.unwrap().powi(3) / (4e4 * l1 * l1)
                    }
                    (_, Mode::GradientEigen) => {
                        tally.eigen_b += 1;
                        let lh = out.lambda_h.unwrap();
                        (lh * lh / (864.0 * l1)).min(lh.powi(3) / (576.0 * l2 * l2))
                    }
                };
                if bound > 0.0 {
                    tally.worst_ratio = tally.worst_ratio.min(inc / bound);
                }
                if inc < bound - tol {
                    tally.violations += 1;
                    failures.push(format!(
                        "instance {inst} {mode:?} step {step} {:?}: increment {inc:.3e} < bound {bound:.3e}",
                        out.kind
                    ));
                }
                if let Some(lh) = out.lambda_h {
                    lower = lh;
                }
                s = out.sigma_next;
            }
        }
    }
    (tally, failures)
}

/// Fraction of trials in which the power-method direction reaches half the
/// largest tangent-Hessian eigenvalue from the dense oracle, at `n = 30, k = 3`.
pub fn power_method_trials(trials: usize) -> (usize, usize) {
    let (n, k) = (30, 3);
    let mut successes = 0;
    let mut done = 0;
    let mut seed = 20_000u64;
    while done < trials {
        seed += 1;
        let a = test_matrix(n, seed);
        let s = sphere::random_config(n, k, seed + 7).unwrap();
        let lmax = lambda_max_oracle(&a, &s);
        if lmax <= 0.0 {
            continue;
        }
        let power = PowerOptions { lower: lmax, ..PowerOptions::default() };
        let dir = solver::direction_finding(&a, &s, f64::INFINITY, &power, seed).unwrap();
        if dir.lambda_h.unwrap() >= 0.5 * lmax {
            successes += 1;
        }
        done += 1;
    }
    (successes, done)
}

pub fn solver_mechanics_suite() -> Outcome {
    let (tally, failures) = ascent_run(40, 60);
    let branches_seen = tally.gradient > 0 && tally.eigen_a > 0 && tally.eigen_b > 0;
    let (ok, trials) = power_method_trials(100);
    let passed = failures.is_empty() && branches_seen && ok * 100 >= 95 * trials;
    let detail = format!(
        "ascent steps checked: gradient {}, eigen (a) {}, eigen (b) {}, violations {} (min increment/bound {:.3}); power method >= lambda_max/2 in {ok}/{trials} trials (need 95%){}",
        tally.gradient,
        tally.eigen_a,
        tally.eigen_b,
        tally.violations,
        tally.worst_ratio,
        if failures.is_empty() { String::new() } else { format!("; {}", failures.iter().take(5).cloned().collect::<Vec<_>>().join("; ")) }
    );
    Outcome::new(passed, detail)
}

/// Stiefel configuration with `d = 1` holding the same rows as a sphere configuration.
pub fn as_stiefel(s: &SphereConfig) -> StiefelConfig {
    StiefelConfig::new(1, s.rows().clone()).unwrap()
}
