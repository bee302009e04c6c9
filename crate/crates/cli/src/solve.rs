use anyhow::Result;
use clap::{Args, ValueEnum};
use ncvx_sdp::solver::{self, Mode, PgaOptions, ShiftRule, SolveReport, SolverOptions};
use ncvx_sdp::sphere::{self, SphereConfig};
use ncvx_sdp::stiefel::{self, StiefelConfig};
use ncvx_sdp::SymmetricMatrix;

use crate::usage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Pga,
    RtrA,
    RtrB,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Pga => "pga",
            SolverKind::RtrA => "rtr-a",
            SolverKind::RtrB => "rtr-b",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ShiftArg {
    L1,
    Spectral,
}

#[derive(Args, Clone, Debug)]
pub struct SolverArgs {
    /// Solver; PGA for sweeps and rtr-b for `solve` unless given
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Curvature target ε for the trust-region solvers (default 4‖A‖₂/(k−1))
    #[arg(long)]
    pub eps: Option<f64>,
    /// Iteration cap (PGA iterations or trust-region steps); default from the theory
    #[arg(long)]
    pub budget: Option<usize>,
    /// Power-method shift rule
    #[arg(long, value_enum, default_value_t = ShiftArg::Spectral)]
    pub shift: ShiftArg,
    /// Start the trust-region solvers from a random point instead of a PGA warm start
    #[arg(long)]
    pub cold: bool,
    /// Exit with status 3 if any run fails to converge
    #[arg(long)]
    pub strict: bool,
}

impl SolverArgs {
    pub fn validate(&self, kind: SolverKind, k: usize) -> Result<()> {
        if k == 0 {
            return Err(usage("k must be >= 1"));
        }
        if kind != SolverKind::Pga && self.eps.is_none() && k < 2 {
            return Err(usage("trust-region solvers need k >= 2 or an explicit --eps"));
        }
        if let Some(e) = self.eps {
            if !(e > 0.0) {
                return Err(usage(format!("--eps must be positive, got {e}")));
            }
        }
        if self.budget == Some(0) {
            return Err(usage("--budget must be >= 1"));
        }
        Ok(())
    }

    fn pga(&self, a: &SymmetricMatrix) -> PgaOptions {
        let t = PgaOptions::tuned(a);
        PgaOptions { max_iters: self.budget.unwrap_or(t.max_iters), ..t }
    }

    fn options(&self, kind: SolverKind, a: &SymmetricMatrix, k: usize, seed: u64) -> SolverOptions {
        SolverOptions {
            mode: if kind == SolverKind::RtrA { Mode::EigenOnly } else { Mode::GradientEigen },
            epsilon: self.eps,
            max_iters: self.budget,
            shift: match self.shift {
                ShiftArg::L1 => ShiftRule::L1,
                ShiftArg::Spectral => ShiftRule::Spectral,
            },
            seed,
            warm_start: (!self.cold).then(|| PgaOptions::tuned(a)),
            ..SolverOptions::new(k)
        }
    }
}

/// Runs the chosen solver on the sphere product from the seeded start.
pub fn run_sphere(
    a: &SymmetricMatrix,
    k: usize,
    seed: u64,
    args: &SolverArgs,
    kind: SolverKind,
) -> Result<SolveReport<SphereConfig>> {
    Ok(match kind {
        SolverKind::Pga => {
            let s0 = sphere::random_config(a.n(), k, seed)?;
            let mut r = solver::pga_with(a, &s0, &args.pga(a))?;
            r.seed = seed;
            r
        }
        _ => solver::solve(a, &args.options(kind, a, k, seed))?,
    })
}

/// Same for the Stiefel product; `a` must carry a block dimension.
pub fn run_stiefel(
    a: &SymmetricMatrix,
    k: usize,
    seed: u64,
    args: &SolverArgs,
    kind: SolverKind,
) -> Result<SolveReport<StiefelConfig>> {
    Ok(match kind {
        SolverKind::Pga => {
            let d = a.block_dim().unwrap_or(1);
            let s0 = stiefel::oc_random_config(a.n() / d, d, k, seed)?;
            let mut r = solver::oc_projected_gradient_ascent(a, &s0, &args.pga(a))?;
            r.seed = seed;
            r
        }
        _ => solver::oc_solve(a, &args.options(kind, a, k, seed))?,
    })
}

/// True when the report carries a curvature certificate usable in the bound.
pub fn certified<C>(r: &SolveReport<C>) -> bool {
    r.converged && r.epsilon.is_finite()
}
