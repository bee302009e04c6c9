//! Fast Riemannian trust-region ascent with a curvature certificate, plus a
//! projected-gradient-ascent baseline.
//!
//! Each trust-region step picks a direction with the direction-finding rule:
//! the normalized Riemannian gradient when `‖grad f‖_F > μ_G`, otherwise a
//! shifted power-method direction of large Hessian curvature. Two step-size
//! schedules are provided:
//!
//! * [`Mode::EigenOnly`]: `μ_G = ∞`, eigen-steps `η = λ_H/(100‖A‖₁)`.
//! * [`Mode::GradientEigen`]: `μ_G = ‖A‖₂`, gradient-steps `η = μ_G/(20‖A‖₁)`
//!   and eigen-steps `η = min(√(λ_H/(216‖A‖₁)), λ_H/(12‖A‖₂))`.
//!
//! A run is certified once a power-method direction has curvature `λ_H ≤ ε`
//! on two independent starts. The engine is generic over [`Geometry`], so the
//! same code drives the sphere product and the Stiefel product.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{self, Geometry, Multipliers};
use crate::rng::{self, SeededRng};
use crate::sphere::{self, HessianOperator, Sphere, SphereConfig, TangentField};
use crate::stiefel::{Stiefel, StiefelConfig};
use crate::symmat::SymmetricMatrix;

/// Explicit constant of the eigen-only iteration bound `T_H ≤ c·n‖A‖₁²/ε²`.
pub const EIGEN_ONLY_BUDGET_CONSTANT: f64 = 64.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Implementation (a): eigen-steps only.
    EigenOnly,
    /// Implementation (b): gradient-steps while `‖grad‖_F > ‖A‖₂`, eigen-steps otherwise.
    GradientEigen,
}

/// Shift `μ_H` for the power method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftRule {
    /// `μ_H = 4‖A‖₁`.
    L1,
    /// `μ_H = 2(1.01·‖A‖₂ + ‖Λ‖₂)`, a tighter bound on `‖Hess f(σ)‖`.
    Spectral,
    Fixed(f64),
}

/// Projected gradient ascent `σ ← P_M(σ + step·grad f(σ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgaOptions {
    /// Fixed step; `None` means `1/(20‖A‖₁)`.
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Stop once `‖grad f‖_F` drops to this value.
    pub grad_tol: f64,
}

impl Default for PgaOptions {
    fn default() -> Self {
        Self { step: None, max_iters: 10_000, grad_tol: 1e-3 }
    }
}

impl PgaOptions {
    /// Step `0.3/‖A‖₂` and stopping tolerance `2·10⁻⁴·√n·‖A‖₂`: far larger steps
    /// than the conservative default, stable in practice on the instances here.
    pub fn tuned(a: &SymmetricMatrix) -> Self {
        let l2 = a.norms().l2_est;
        if l2 == 0.0 {
            return Self::default();
        }
        Self { step: Some(0.3 / l2), max_iters: 20_000, grad_tol: 2e-4 * (a.n() as f64).sqrt() * l2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub k: usize,
    pub mode: Mode,
    /// Target curvature; `None` means `4‖A‖₂/(k − 1)`, which is `2·R/(n(k − 1))`
    /// for the range bound `R = 2n‖A‖₂ ≥ Rg(A)`.
    pub epsilon: Option<f64>,
    /// Trust-region step budget; `None` means the eigen-only iteration bound.
    pub max_iters: Option<usize>,
    /// Constant `C` in `N_H = C·μ_H·log n/(4·max(λ̂_prev, ε))`.
    pub power_c: f64,
    pub max_power_iters: usize,
    pub shift: ShiftRule,
    pub seed: u64,
    /// Optional projected-gradient phase before the trust-region iterations.
    pub warm_start: Option<PgaOptions>,
}

impl SolverOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            mode: Mode::GradientEigen,
            epsilon: None,
            max_iters: None,
            power_c: 8.0,
            max_power_iters: 200_000,
            shift: ShiftRule::L1,
            seed: 0,
            warm_start: None,
        }
    }

    /// Mode (b) with the spectral shift, preceded by a [`PgaOptions::tuned`]
    /// warm start and capped at 5000 trust-region steps.
    pub fn warm(a: &SymmetricMatrix, k: usize, seed: u64) -> Self {
        Self {
            shift: ShiftRule::Spectral,
            max_iters: Some(5_000),
            seed,
            warm_start: Some(PgaOptions::tuned(a)),
            ..Self::new(k)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("rank k must be >= 1".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {e}")));
            }
        } else if self.k < 2 {
            return Err(Error::InvalidParameter("default epsilon needs k >= 2".into()));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.power_c > 0.0) || self.max_power_iters == 0 {
            return Err(Error::InvalidParameter("power method parameters must be positive".into()));
        }
        if let Some(p) = &self.warm_start {
            if let Some(s) = p.step {
                if !(s > 0.0) {
                    return Err(Error::InvalidParameter(format!("PGA step must be > 0, got {s}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Gradient,
    Eigen,
    Pga,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Gradient => "gradient",
            StepKind::Eigen => "eigen",
            StepKind::Pga => "pga",
        }
    }
}

/// One row of the iteration trace; `objective` and `grad_norm` are taken
/// after the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub kind: StepKind,
    pub step: f64,
    /// `λ_H` of the direction for eigen-steps.
    pub curvature: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationCounts {
    pub gradient_steps: usize,
    pub eigen_steps: usize,
    pub pga_steps: usize,
    pub power_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Power-method curvature `≤ ε` on two independent starts.
    Certified,
    /// `A = 0`: every point is optimal.
    ZeroMatrix,
    /// PGA reached its gradient tolerance (no certificate requested).
    GradientTolerance,
    BudgetExhausted,
}

/// Iteration bounds for the run's parameters. The eigen-only bound carries its
/// explicit constant; the mixed-mode bounds are the bare asymptotic forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budgets {
    pub eigen_only: f64,
    pub mixed_eigen: f64,
    pub mixed_gradient: f64,
}

impl Budgets {
    /// `rg` may be any upper bound on `Rg(A)`.
    pub fn new(n: usize, l1: f64, l2: f64, eps: f64, rg: f64) -> Self {
        let n = n as f64;
        Self {
            eigen_only: EIGEN_ONLY_BUDGET_CONSTANT * n * l1 * l1 / (eps * eps),
            mixed_eigen: n * (l2 * l2 / (eps * eps)).max(l1 / eps),
            mixed_gradient: if l2 > 0.0 { rg * l1 / (l2 * l2) } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<C> {
    pub sigma: C,
    pub objective: f64,
    pub grad_norm: f64,
    /// Largest power-method curvature seen at the final point.
    pub curvature_cert: Option<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub epsilon: f64,
    pub mu_g: f64,
    pub iterations: IterationCounts,
    pub budgets: Budgets,
    pub trace: Vec<TraceRecord>,
    pub seed: u64,
}

impl<C> SolveReport<C> {
    fn map<D>(self, f: impl FnOnce(C) -> D) -> SolveReport<D> {
        SolveReport {
            sigma: f(self.sigma),
            objective: self.objective,
            grad_norm: self.grad_norm,
            curvature_cert: self.curvature_cert,
            converged: self.converged,
            termination: self.termination,
            epsilon: self.epsilon,
            mu_g: self.mu_g,
            iterations: self.iterations,
            budgets: self.budgets,
            trace: self.trace,
            seed: self.seed,
        }
    }

    /// Trust-region steps (gradient + eigen).
    pub fn rtr_steps(&self) -> usize {
        self.iterations.gradient_steps + self.iterations.eigen_steps
    }

    /// CSV trace: `iteration,f,grad_norm,kind,step`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,f,grad_norm,kind,step\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{:?},{:?},{},{:?}\n",
                r.iteration,
                r.objective,
                r.grad_norm,
                r.kind.as_str(),
                r.step
            ));
        }
        out
    }

    /// One-line `key=value` summary.
    pub fn summary_line(&self) -> String {
        format!(
            "converged={} termination={:?} f={:?} grad_norm={:?} curvature={} epsilon={:?} gradient_steps={} eigen_steps={} pga_steps={} power_iterations={} seed={}",
            self.converged,
            self.termination,
            self.objective,
            self.grad_norm,
            self.curvature_cert.map_or("none".to_string(), |c| format!("{c:?}")),
            self.epsilon,
            self.iterations.gradient_steps,
            self.iterations.eigen_steps,
            self.iterations.pga_steps,
            self.iterations.power_iterations,
            self.seed
        )
    }
}

/// Local state at a point: `Aσ`, `Λ`, `f`, and the gradient.
#[derive(Debug, Clone)]
struct PointState {
    sigma: DMatrix<f64>,
    a_sigma: DMatrix<f64>,
    lambda: Multipliers,
    objective: f64,
    grad: DMatrix<f64>,
    grad_norm: f64,
}

impl PointState {
    fn new<G: Geometry>(geom: &G, a: &SymmetricMatrix, sigma: DMatrix<f64>) -> Self {
        let a_sigma = a.apply(&sigma);
        let lambda = geom.multipliers(&sigma, &a_sigma);
        let objective = sigma.dot(&a_sigma);
        let grad = (&a_sigma - lambda.apply(&sigma)) * 2.0;
        let grad_norm = grad.norm();
        Self { sigma, a_sigma, lambda, objective, grad, grad_norm }
    }
}

/// Output of the direction-finding rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    /// Unit tangent direction with `⟨u, grad f⟩ ≥ 0`.
    pub u: DMatrix<f64>,
    pub kind: StepKind,
    /// `⟨u, Hess f(σ)[u]⟩` for eigen directions.
    pub lambda_h: Option<f64>,
    pub power_iterations: usize,
}

fn shift_value<G: Geometry>(rule: ShiftRule, a: &SymmetricMatrix, state: &PointState, _geom: &G) -> f64 {
    let norms = a.norms();
    match rule {
        ShiftRule::L1 => 4.0 * norms.l1,
        ShiftRule::Spectral => 2.0 * (1.01 * norms.l2_est + state.lambda.norm_bound()),
        ShiftRule::Fixed(mu) => mu,
    }
}

fn power_iterations_for(c: f64, mu_h: f64, n: usize, lower: f64, cap: usize) -> usize {
    let logn = (n.max(2) as f64).ln();
    let raw = (c * mu_h * logn / (4.0 * lower)).ceil();
    if raw.is_finite() {
        (raw as usize).clamp(1, cap)
    } else {
        cap
    }
}

/// `N` shifted power iterations `u ← (Hess[u] + μ_H·u)/‖·‖_F` from a random
/// unit tangent.
fn power_iterate<G: Geometry>(
    geom: &G,
    a: &SymmetricMatrix,
    state: &PointState,
    mu_h: f64,
    iters: usize,
    rng: &mut SeededRng,
) -> DMatrix<f64> {
    let mut u = geom.random_tangent(&state.sigma, rng);
    for _ in 0..iters {
        let mut next = geom.hessian(a, &state.sigma, &state.a_sigma, &state.lambda, &u);
        next += &u * mu_h;
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        u = next / norm;
    }
    u
}

fn curvature(a: &SymmetricMatrix, state: &PointState, u: &DMatrix<f64>) -> f64 {
    if u.norm_squared() == 0.0 {
        return 0.0;
    }
    geometry::curvature_from_au(u, &a.apply(u), &state.lambda)
}

struct Engine<'a, G> {
    geom: &'a G,
    a: &'a SymmetricMatrix,
    opts: &'a SolverOptions,
    l1: f64,
    l2: f64,
    mu_g: f64,
    eps: f64,
}

impl<'a, G: Geometry> Engine<'a, G> {
    fn new(geom: &'a G, a: &'a SymmetricMatrix, opts: &'a SolverOptions) -> Result<Self> {
        opts.validate()?;
        geom.check_matrix(a)?;
        let norms = a.norms();
        let eps = match opts.epsilon {
            Some(e) => e,
            None => 4.0 * norms.l2_est / (opts.k as f64 - 1.0),
        };
        let mu_g = match opts.mode {
            Mode::EigenOnly => f64::INFINITY,
            Mode::GradientEigen => norms.l2_est,
        };
        Ok(Self { geom, a, opts, l1: norms.l1, l2: norms.l2_est, mu_g, eps })
    }

    fn budgets(&self) -> Budgets {
        let n = self.a.n();
        // eps may be the default derived from l2; a zero matrix gives eps = 0
        let eps = if self.eps > 0.0 { self.eps } else { f64::MIN_POSITIVE };
        Budgets::new(n, self.l1, self.l2, eps, 2.0 * n as f64 * self.l2)
    }

    fn direction(&self, state: &PointState, lower: f64, rng: &mut SeededRng) -> Direction {
        if state.grad_norm > self.mu_g {
            return Direction {
                u: &state.grad / state.grad_norm,
                kind: StepKind::Gradient,
                lambda_h: None,
                power_iterations: 0,
            };
        }
        let mu_h = shift_value(self.opts.shift, self.a, state, self.geom);
        let iters = power_iterations_for(
            self.opts.power_c,
            mu_h,
            self.a.n(),
            lower.max(self.eps),
            self.opts.max_power_iters,
        );
        let mut u = power_iterate(self.geom, self.a, state, mu_h, iters, rng);
        if u.dot(&state.grad) < 0.0 {
            u.neg_mut();
        }
        let lambda_h = curvature(self.a, state, &u);
        Direction { u, kind: StepKind::Eigen, lambda_h: Some(lambda_h), power_iterations: iters }
    }

    fn step_size(&self, dir: &Direction) -> f64 {
        match (dir.kind, self.opts.mode) {
            (StepKind::Gradient, _) => self.mu_g / (20.0 * self.l1),
            (StepKind::Eigen, Mode::EigenOnly) => dir.lambda_h.unwrap_or(0.0) / (100.0 * self.l1),
            (StepKind::Eigen, Mode::GradientEigen) => {
                let lh = dir.lambda_h.unwrap_or(0.0);
                (lh / (216.0 * self.l1)).sqrt().min(lh / (12.0 * self.l2))
            }
            (StepKind::Pga, _) => unreachable!("PGA steps are not trust-region steps"),
        }
    }

    fn pga_phase(
        &self,
        mut state: PointState,
        pga: &PgaOptions,
        counts: &mut IterationCounts,
        trace: &mut Vec<TraceRecord>,
    ) -> Result<PointState> {
        let step = pga.step.unwrap_or(1.0 / (20.0 * self.l1));
        for _ in 0..pga.max_iters {
            if state.grad_norm <= pga.grad_tol {
                break;
            }
            let next = self.geom.retract(&state.sigma, &state.grad, step)?;
            state = PointState::new(self.geom, self.a, next);
            counts.pga_steps += 1;
            trace.push(TraceRecord {
                iteration: trace.len() + 1,
                objective: state.objective,
                grad_norm: state.grad_norm,
                kind: StepKind::Pga,
                step,
                curvature: None,
            });
        }
        Ok(state)
    }

    fn run(&self, sigma0: DMatrix<f64>) -> Result<SolveReport<DMatrix<f64>>> {
        let mut rng = rng::seeded(rng::derive_seed(self.opts.seed, 0xD1EC));
        let mut counts = IterationCounts::default();
        let mut trace = Vec::new();
        let mut state = PointState::new(self.geom, self.a, sigma0);
        let budgets = self.budgets();

        let finish = |state: PointState,
                      counts: IterationCounts,
                      trace: Vec<TraceRecord>,
                      cert: Option<f64>,
                      termination: Termination| SolveReport {
            objective: state.objective,
            grad_norm: state.grad_norm,
            sigma: state.sigma,
            curvature_cert: cert,
            converged: matches!(termination, Termination::Certified | Termination::ZeroMatrix),
            termination,
            epsilon: self.eps,
            mu_g: self.mu_g,
            iterations: counts,
            budgets,
            trace,
            seed: self.opts.seed,
        };

        if self.l1 == 0.0 {
            return Ok(finish(state, counts, trace, Some(0.0), Termination::ZeroMatrix));
        }
        if let Some(pga) = &self.opts.warm_start {
            state = self.pga_phase(state, pga, &mut counts, &mut trace)?;
        }

        let max_iters = self.opts.max_iters.unwrap_or_else(|| {
            let b = budgets.eigen_only.ceil();
            if b.is_finite() && b < usize::MAX as f64 {
                (b as usize).max(1)
            } else {
                usize::MAX
            }
        });
        let mut lower = self.eps;
        let mut steps = 0usize;
        while steps < max_iters {
            let mut dir = self.engine_direction(&state, lower, &mut rng, &mut counts);
            if let Some(lh) = dir.lambda_h {
                if lh <= self.eps {
                    // retry once from a fresh start before declaring convergence
                    let retry = self.engine_direction(&state, lower, &mut rng, &mut counts);
                    let lh2 = retry.lambda_h.unwrap_or(f64::NEG_INFINITY);
                    if lh2 <= self.eps {
                        let cert = lh.max(lh2);
                        return Ok(finish(state, counts, trace, Some(cert), Termination::Certified));
                    }
                    dir = retry;
                }
                lower = dir.lambda_h.unwrap_or(lower);
            }
            let eta = self.step_size(&dir);
            let next = self.geom.retract(&state.sigma, &dir.u, eta)?;
            state = PointState::new(self.geom, self.a, next);
            steps += 1;
            match dir.kind {
                StepKind::Gradient => counts.gradient_steps += 1,
                _ => counts.eigen_steps += 1,
            }
            trace.push(TraceRecord {
                iteration: trace.len() + 1,
                objective: state.objective,
                grad_norm: state.grad_norm,
                kind: dir.kind,
                step: eta,
                curvature: dir.lambda_h,
            });
        }
        Ok(finish(state, counts, trace, None, Termination::BudgetExhausted))
    }

    fn engine_direction(
        &self,
        state: &PointState,
        lower: f64,
        rng: &mut SeededRng,
        counts: &mut IterationCounts,
    ) -> Direction {
        let dir = self.direction(state, lower, rng);
        counts.power_iterations += dir.power_iterations;
        dir
    }
}

/// Runs the trust-region method on the sphere product from a seeded random start.
pub fn solve(a: &SymmetricMatrix, opts: &SolverOptions) -> Result<SolveReport<SphereConfig>> {
    let mut r = rng::seeded(opts.seed);
    let sigma0 = sphere::random_rows(a.n(), opts.k.max(1), &mut r);
    solve_from(a, SphereConfig::from_raw(sigma0), opts)
}

/// Same as [`solve`] from a given starting point (its rank overrides `opts.k`).
pub fn solve_from(
    a: &SymmetricMatrix,
    sigma0: SphereConfig,
    opts: &SolverOptions,
) -> Result<SolveReport<SphereConfig>> {
    sphere::check_dims(a, sigma0.rows())?;
    let opts = SolverOptions { k: sigma0.k(), ..opts.clone() };
    let engine = Engine::new(&Sphere, a, &opts)?;
    Ok(engine.run(sigma0.into_rows())?.map(SphereConfig::from_raw))
}

/// Trust-region method on `O(d,k)^m`, with `d` taken from `A`'s block dimension.
pub fn oc_solve(a: &SymmetricMatrix, opts: &SolverOptions) -> Result<SolveReport<StiefelConfig>> {
    let d = a.block_dim().ok_or(Error::MissingBlockStructure)?;
    if opts.k < d {
        return Err(Error::InvalidParameter(format!("rank k = {} below block dimension d = {d}", opts.k)));
    }
    let geom = Stiefel { d };
    let mut r = rng::seeded(opts.seed);
    let sigma0 = geom.random_point(a.n(), opts.k, &mut r);
    let engine = Engine::new(&geom, a, opts)?;
    Ok(engine.run(sigma0)?.map(|rows| StiefelConfig::from_raw(d, rows)))
}

/// Projected gradient ascent with a fixed step from `sigma0`. Stops early only
/// at an exactly stationary point.
pub fn projected_gradient_ascent(
    a: &SymmetricMatrix,
    sigma0: &SphereConfig,
    step: f64,
    iters: usize,
) -> Result<SolveReport<SphereConfig>> {
    pga_run(&Sphere, a, sigma0.rows().clone(), &PgaOptions { step: Some(step), max_iters: iters, grad_tol: 0.0 })
        .map(|r| r.map(SphereConfig::from_raw))
}

/// PGA on the Stiefel product.
pub fn oc_projected_gradient_ascent(
    a: &SymmetricMatrix,
    sigma0: &StiefelConfig,
    pga: &PgaOptions,
) -> Result<SolveReport<StiefelConfig>> {
    let d = sigma0.d();
    pga_run(&Stiefel { d }, a, sigma0.rows().clone(), pga).map(|r| r.map(|rows| StiefelConfig::from_raw(d, rows)))
}

/// PGA on the sphere product with a tolerance.
pub fn pga_with(
    a: &SymmetricMatrix,
    sigma0: &SphereConfig,
    pga: &PgaOptions,
) -> Result<SolveReport<SphereConfig>> {
    pga_run(&Sphere, a, sigma0.rows().clone(), pga).map(|r| r.map(SphereConfig::from_raw))
}

fn pga_run<G: Geometry>(
    geom: &G,
    a: &SymmetricMatrix,
    sigma0: DMatrix<f64>,
    pga: &PgaOptions,
) -> Result<SolveReport<DMatrix<f64>>> {
    if let Some(s) = pga.step {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("PGA step must be > 0, got {s}")));
        }
    }
    geom.check_matrix(a)?;
    sphere::check_dims(a, &sigma0)?;
    let k = sigma0.ncols();
    let opts = SolverOptions {
        epsilon: Some(f64::INFINITY),
        ..SolverOptions::new(k.max(2))
    };
    let engine = Engine {
        geom,
        a,
        opts: &opts,
        l1: a.norms().l1,
        l2: a.norms().l2_est,
        mu_g: a.norms().l2_est,
        eps: f64::NAN,
    };
    let mut counts = IterationCounts::default();
    let mut trace = Vec::new();
    let state = PointState::new(geom, a, sigma0);
    let state = if engine.l1 == 0.0 {
        state
    } else {
        let step = Some(pga.step.unwrap_or(1.0 / (20.0 * engine.l1)));
        engine.pga_phase(state, &PgaOptions { step, ..*pga }, &mut counts, &mut trace)?
    };
    let termination = if state.grad_norm <= pga.grad_tol {
        Termination::GradientTolerance
    } else {
        Termination::BudgetExhausted
    };
    Ok(SolveReport {
        objective: state.objective,
        grad_norm: state.grad_norm,
        sigma: state.sigma,
        curvature_cert: None,
        converged: termination == Termination::GradientTolerance,
        termination,
        epsilon: f64::NAN,
        mu_g: f64::NAN,
        iterations: counts,
        budgets: Budgets::new(a.n(), engine.l1, engine.l2, 1.0, 2.0 * a.n() as f64 * engine.l2),
        trace,
        seed: 0,
    })
}

/// Parameters of the shifted power method used outside the solver loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub shift: ShiftRule,
    pub c: f64,
    /// Curvature lower bound used in `N_H`.
    pub lower: f64,
    pub max_iters: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { shift: ShiftRule::L1, c: 8.0, lower: 1e-2, max_iters: 200_000 }
    }
}

/// Direction-finding rule at `sigma` with threshold `mu_g` (use `f64::INFINITY`
/// for eigen-only).
pub fn direction_finding(
    a: &SymmetricMatrix,
    sigma: &SphereConfig,
    mu_g: f64,
    power: &PowerOptions,
    seed: u64,
) -> Result<Direction> {
    sphere::check_dims(a, sigma.rows())?;
    let opts = SolverOptions {
        epsilon: Some(power.lower),
        power_c: power.c,
        max_power_iters: power.max_iters,
        shift: power.shift,
        ..SolverOptions::new(sigma.k().max(2))
    };
    let norms = a.norms();
    let engine = Engine {
        geom: &Sphere,
        a,
        opts: &opts,
        l1: norms.l1,
        l2: norms.l2_est,
        mu_g,
        eps: power.lower,
    };
    let state = PointState::new(&Sphere, a, sigma.rows().clone());
    let mut r = rng::seeded(seed);
    Ok(engine.direction(&state, power.lower, &mut r))
}

/// Shifted power method on `Hess f(σ)`: `iters` iterations of
/// `u ← (Hess[u] + μ_H·u)/‖·‖_F` from a uniform random unit tangent.
pub fn power_method(h: &HessianOperator<'_>, mu_h: f64, iters: usize, seed: u64) -> TangentField {
    let a = h.a();
    let state = PointState {
        sigma: h.base().rows().clone(),
        a_sigma: h.a_sigma().clone(),
        lambda: Multipliers::Diagonal(h.lambda().clone()),
        objective: h.lambda().sum(),
        grad: DMatrix::zeros(0, 0),
        grad_norm: 0.0,
    };
    let mut r = rng::seeded(seed);
    TangentField::from_raw(power_iterate(&Sphere, a, &state, mu_h, iters, &mut r))
}

/// Power-method estimate of `λ_max(Hess f(σ))` (the Rayleigh quotient of the
/// returned direction), on either manifold.
pub fn curvature_probe<G: Geometry>(
    geom: &G,
    a: &SymmetricMatrix,
    sigma: &DMatrix<f64>,
    power: &PowerOptions,
    seed: u64,
) -> Result<f64> {
    geom.check_matrix(a)?;
    sphere::check_dims(a, sigma)?;
    let state = PointState::new(geom, a, sigma.clone());
    let mu_h = shift_value(power.shift, a, &state, geom);
    let iters = power_iterations_for(power.c, mu_h, a.n(), power.lower, power.max_iters);
    let mut r = rng::seeded(seed);
    let u = power_iterate(geom, a, &state, mu_h, iters, &mut r);
    Ok(curvature(a, &state, &u))
}

/// Result of a single [`rtr_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub sigma_next: SphereConfig,
    pub kind: StepKind,
    pub step: f64,
    pub lambda_h: Option<f64>,
    pub grad_norm: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    /// True when the direction's curvature is already `≤ ε` (no step taken).
    pub certified: bool,
}

/// One trust-region step from `sigma`. `lower` is the curvature lower bound
/// for `N_H` (the previous eigen-step's `λ_H`, or `ε`).
pub fn rtr_step(
    a: &SymmetricMatrix,
    sigma: &SphereConfig,
    opts: &SolverOptions,
    lower: f64,
    seed: u64,
) -> Result<StepOutcome> {
    sphere::check_dims(a, sigma.rows())?;
    let opts = SolverOptions { k: sigma.k(), ..opts.clone() };
    let engine = Engine::new(&Sphere, a, &opts)?;
    let state = PointState::new(&Sphere, a, sigma.rows().clone());
    let f0 = state.objective;
    if engine.l1 == 0.0 {
        return Ok(StepOutcome {
            sigma_next: sigma.clone(),
            kind: StepKind::Eigen,
            step: 0.0,
            lambda_h: Some(0.0),
            grad_norm: state.grad_norm,
            objective_before: f0,
            objective_after: f0,
            certified: true,
        });
    }
    let mut r = rng::seeded(seed);
    let dir = engine.direction(&state, lower, &mut r);
    if dir.lambda_h.is_some_and(|l| l <= engine.eps) {
        return Ok(StepOutcome {
            sigma_next: sigma.clone(),
            kind: dir.kind,
            step: 0.0,
            lambda_h: dir.lambda_h,
            grad_norm: state.grad_norm,
            objective_before: f0,
            objective_after: f0,
            certified: true,
        });
    }
    let eta = engine.step_size(&dir);
    let next = Sphere.retract(&state.sigma, &dir.u, eta)?;
    let f1 = next.dot(&a.apply(&next));
    Ok(StepOutcome {
        sigma_next: SphereConfig::from_raw(next),
        kind: dir.kind,
        step: eta,
        lambda_h: dir.lambda_h,
        grad_norm: state.grad_norm,
        objective_before: f0,
        objective_after: f1,
        certified: false,
    })
}
