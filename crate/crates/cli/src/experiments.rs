use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use ncvx_sdp::analysis::{self, SdpEstimate};
use ncvx_sdp::solver::{self, PgaOptions, PowerOptions, ShiftRule, SolveReport};
use ncvx_sdp::sphere::{Sphere, SphereConfig};
use ncvx_sdp::stiefel::{Stiefel, StiefelConfig};
use ncvx_sdp::{instances, SymmetricMatrix};
use serde::Serialize;

use crate::rows::{with_means, write_csv, Row};
use crate::solve::{certified, run_sphere, run_stiefel, SolverKind};
use crate::{
    usage, CheckArgs, GenArgs, Grid, LandscapeArgs, MaxcutArgs, Model, ModeArg, NotConverged, OcsdpArgs, SbmArgs,
    SolveArgs, Z2Args,
};

const LANDSCAPE_MAX_N: usize = 2000;

fn seeds(grid: &Grid) -> Result<&[u64]> {
    if grid.seeds.0.is_empty() {
        return Err(usage("seed list is empty"));
    }
    Ok(&grid.seeds.0)
}

fn k_list(list: &[u64]) -> Result<Vec<usize>> {
    if list.is_empty() {
        return Err(usage("k list is empty"));
    }
    if list.contains(&0) {
        return Err(usage("k must be >= 1"));
    }
    Ok(list.iter().map(|&k| k as usize).collect())
}

fn read_matrix(path: &Path) -> Result<SymmetricMatrix> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(SymmetricMatrix::read_text(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Writes the rows, then reports non-convergence when `--strict` is set.
fn finish(rows: Vec<Row>, grid: &Grid, strict: bool) -> Result<()> {
    let failed = rows.iter().filter(|r| !r.converged).count();
    write_csv(grid.out.as_deref(), &with_means(rows))?;
    if strict && failed > 0 {
        return Err(NotConverged(format!("{failed} run(s) did not converge")).into());
    }
    Ok(())
}

fn estimator_eps(a: &SymmetricMatrix, k: usize) -> f64 {
    4.0 * a.norms().l2_est / (k as f64 - 1.0).max(1.0)
}

fn base_row<C>(model: &'static str, n: usize, k: usize, seed: u64, kind: SolverKind, r: &SolveReport<C>) -> Row {
    Row {
        row: "seed",
        model,
        n,
        k,
        seed: Some(seed),
        count: 1,
        solver: kind.name(),
        eps: r.epsilon.is_finite().then_some(r.epsilon),
        converged: r.converged,
        f: r.objective,
        ..Row::default()
    }
}

fn with_estimate(mut row: Row, est: &SdpEstimate) -> Row {
    row.sdp_est = Some(est.value_plus);
    row.rg_est = Some(est.rg);
    row.gap = Some(est.value_plus - row.f);
    row
}

pub fn gen(args: &GenArgs) -> Result<()> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("--{flag} is required for this model")));
    let graph = matches!(args.model, Model::Er | Model::Regular);
    if args.n == 0 {
        return Err(usage("n must be >= 1"));
    }
    if args.maxcut && !graph {
        return Err(usage("--maxcut applies to er and regular only"));
    }
    if args.centered && !matches!(args.model, Model::Regular) {
        return Err(usage("--centered applies to regular only"));
    }
    if args.truth.is_some() && !matches!(args.model, Model::Spiked | Model::Sbm) {
        return Err(usage("--truth applies to spiked and sbm only"));
    }
    let (n, seed) = (args.n, args.seed);
    let (m, truth, line) = match args.model {
        Model::Goe => (instances::goe(n, seed)?, None, format!("model=goe n={n} seed={seed}")),
        Model::Spiked => {
            let i = instances::spiked(n, need(args.lambda, "lambda")?, seed)?;
            (i.a, i.ground_truth, i.meta.line())
        }
        Model::Sbm => {
            let i = instances::sbm(n, need(args.a, "a")?, need(args.b, "b")?, seed)?;
            (i.a, i.ground_truth, i.meta.line())
        }
        Model::Er => {
            let d = need(args.degree, "degree")?;
            (instances::erdos_renyi(n, d, seed)?, None, format!("model=er n={n} degree={d} seed={seed}"))
        }
        Model::Regular => {
            let d = need(args.degree, "degree")?;
            if d < 0.0 || d.fract() != 0.0 {
                return Err(usage(format!("regular degree must be a non-negative integer, got {d}")));
            }
            let d = d as usize;
            let m = if args.centered {
                instances::centered_regular(n, d, seed)?
            } else {
                instances::random_regular(n, d, seed)?
            };
            (m, None, format!("model=regular n={n} degree={d} seed={seed}"))
        }
    };
    let m = if args.maxcut { instances::maxcut_matrix(&m) } else { m };
    let m = match args.blocks {
        Some(d) => m.with_block_dim(d)?,
        None => m,
    };
    let mut w = create(&args.out)?;
    m.write_text(&mut w)?;
    w.flush()?;
    if let (Some(path), Some(t)) = (&args.truth, &truth) {
        let mut w = create(path)?;
        for v in t {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
    }
    println!("{line}");
    Ok(())
}

pub fn solve_one(args: &SolveArgs) -> Result<()> {
    let kind = match args.mode {
        Some(ModeArg::A) => SolverKind::RtrA,
        Some(ModeArg::B) => SolverKind::RtrB,
        None => args.solver.solver.unwrap_or(SolverKind::RtrB),
    };
    args.solver.validate(kind, args.k)?;
    let a = read_matrix(&args.input)?;
    let (summary, converged, trace) = match a.block_dim() {
        Some(d) if d > 1 => {
            if args.k < d {
                return Err(usage(format!("k = {} is below the block dimension {d}", args.k)));
            }
            let r = run_stiefel(&a, args.k, args.seed, &args.solver, kind)?;
            if let Some(p) = &args.out {
                r.sigma.write_text(create(p)?)?;
            }
            (r.summary_line(), r.converged, r.trace_csv())
        }
        _ => {
            let r = run_sphere(&a, args.k, args.seed, &args.solver, kind)?;
            if let Some(p) = &args.out {
                r.sigma.write_text(create(p)?)?;
            }
            (r.summary_line(), r.converged, r.trace_csv())
        }
    };
    if let Some(p) = &args.trace {
        create(p)?.write_all(trace.as_bytes())?;
    }
    println!("solver={} k={} {summary}", kind.name(), args.k);
    if args.solver.strict && !converged {
        return Err(NotConverged("solver did not converge".into()).into());
    }
    Ok(())
}

pub fn maxcut(args: &MaxcutArgs) -> Result<()> {
    let kind = args.solver.solver.unwrap_or(SolverKind::Pga);
    let seeds = seeds(&args.grid)?;
    let mut ks = k_list(&args.k_list.0)?;
    if args.high_rank {
        ks.push(analysis::sdp_rank(args.n));
    }
    for &k in &ks {
        args.solver.validate(kind, k)?;
    }
    if args.samples == 0 {
        return Err(usage("--samples must be >= 1"));
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        let g = instances::erdos_renyi(args.n, args.degree, seed)?;
        let a = instances::maxcut_matrix(&g);
        for &k in &ks {
            let r = run_sphere(&a, k, seed, &args.solver, kind)?;
            let cut = analysis::gw_round(&g, &r.sigma, args.samples, seed)?;
            rows.push(Row { degree: Some(args.degree), cut: Some(cut.value), ..base_row("er-maxcut", args.n, k, seed, kind, &r) });
        }
    }
    finish(rows, &args.grid, args.solver.strict)
}

fn labelled_row(mut row: Row, sigma: &SphereConfig, truth: &[f64]) -> Result<Row> {
    row.correlation = Some(analysis::correlation(sigma.rows(), truth)?);
    row.overlap = Some(analysis::overlap(&analysis::principal_sign(sigma.rows()), truth)?);
    Ok(row)
}

pub fn z2sync(args: &Z2Args) -> Result<()> {
    let kind = args.solver.solver.unwrap_or(SolverKind::Pga);
    let seeds = seeds(&args.grid)?;
    args.solver.validate(kind, args.k)?;
    if args.lambdas.is_empty() || args.lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(usage("--lambdas must be a non-empty list of non-negative values"));
    }
    let mut rows = Vec::new();
    for &lambda in &args.lambdas {
        for &seed in seeds {
            let inst = instances::spiked(args.n, lambda, seed)?;
            let r = run_sphere(&inst.a, args.k, seed, &args.solver, kind)?;
            let row = Row { lambda: Some(lambda), ..base_row("z2sync", args.n, args.k, seed, kind, &r) };
            rows.push(labelled_row(row, &r.sigma, inst.ground_truth.as_deref().unwrap_or_default())?);
        }
    }
    finish(rows, &args.grid, args.solver.strict)
}

pub fn sbm(args: &SbmArgs) -> Result<()> {
    let kind = args.solver.solver.unwrap_or(SolverKind::Pga);
    let seeds = seeds(&args.grid)?;
    args.solver.validate(kind, args.k)?;
    if args.ab.is_empty() {
        return Err(usage("--ab list is empty"));
    }
    if args.n % 2 != 0 {
        return Err(usage("sbm needs an even n"));
    }
    let mut rows = Vec::new();
    for &(a, b) in &args.ab {
        for &seed in seeds {
            let inst = instances::sbm(args.n, a, b, seed)?;
            let r = run_sphere(&inst.a, args.k, seed, &args.solver, kind)?;
            let row = Row {
                a: Some(a),
                b: Some(b),
                lambda: Some(instances::sbm_snr(a, b)),
                degree: Some((a + b) / 2.0),
                ..base_row("sbm", args.n, args.k, seed, kind, &r)
            };
            rows.push(labelled_row(row, &r.sigma, inst.ground_truth.as_deref().unwrap_or_default())?);
        }
    }
    finish(rows, &args.grid, args.solver.strict)
}

#[derive(Serialize)]
struct TrajectoryPoint {
    n: usize,
    k: usize,
    seed: u64,
    iteration: usize,
    f: f64,
    curvature: f64,
    normalized_gap: f64,
}

pub fn landscape(args: &LandscapeArgs) -> Result<()> {
    let seeds = seeds(&args.grid)?;
    let ks = k_list(&args.k_list.0)?;
    if args.n > LANDSCAPE_MAX_N && !args.allow_large {
        return Err(usage(format!("n = {} exceeds {LANDSCAPE_MAX_N}; pass --allow-large to override", args.n)));
    }
    if args.n < 2 {
        return Err(usage("n must be >= 2"));
    }
    if args.record_every == 0 {
        return Err(usage("--record-every must be >= 1"));
    }
    let budget = args.solver.budget.unwrap_or(PgaOptions::default().max_iters);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &seed in seeds {
        let a = instances::goe(args.n, seed)?;
        let kstar = analysis::sdp_rank(args.n);
        let est = analysis::estimate_sdp(&a, estimator_eps(&a, kstar), seed)?;
        let tuned = PgaOptions::tuned(&a);
        let power = PowerOptions {
            shift: ShiftRule::Spectral,
            lower: 1e-2 * a.norms().l2_est.max(f64::MIN_POSITIVE),
            max_iters: 5000,
            ..PowerOptions::default()
        };
        for &k in &ks {
            let mut sigma = ncvx_sdp::sphere::random_config(args.n, k, seed)?;
            let mut done = 0;
            let mut last = None;
            while done < budget {
                let chunk = args.record_every.min(budget - done);
                let r = solver::pga_with(&a, &sigma, &PgaOptions { max_iters: chunk, ..tuned })?;
                done += r.iterations.pga_steps.max(1);
                let curvature = solver::curvature_probe(&Sphere, &a, r.sigma.rows(), &power, seed ^ done as u64)?;
                points.push(TrajectoryPoint {
                    n: args.n,
                    k,
                    seed,
                    iteration: done,
                    f: r.objective,
                    curvature,
                    normalized_gap: 2.0 * (est.value_plus - r.objective) / args.n as f64,
                });
                let stop = r.converged;
                sigma = r.sigma.clone();
                last = Some(r);
                if stop {
                    break;
                }
            }
            let r = last.expect("budget >= 1");
            let mut row = with_estimate(base_row("goe", args.n, k, seed, SolverKind::Pga, &r), &est);
            row.seed = Some(seed);
            rows.push(row);
        }
    }
    if let Some(p) = &args.trajectory {
        points.sort_by(|x, y| (x.k, x.seed, x.iteration).cmp(&(y.k, y.seed, y.iteration)));
        write_csv(Some(p), &points)?;
    }
    finish(rows, &args.grid, args.solver.strict)
}

pub fn ocsdp(args: &OcsdpArgs) -> Result<()> {
    let kind = args.solver.solver.unwrap_or(SolverKind::Pga);
    let seeds = seeds(&args.grid)?;
    let ks = k_list(&args.k_list.0)?;
    if args.d == 0 || args.n % args.d != 0 {
        return Err(usage(format!("d = {} must divide n = {}", args.d, args.n)));
    }
    for &k in &ks {
        args.solver.validate(kind, k)?;
        if k < args.d {
            return Err(usage(format!("k = {k} is below the block dimension {}", args.d)));
        }
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        let a = instances::goe_blocks(args.n, args.d, seed)?;
        let kstar = analysis::oc_sdp_rank(args.n, args.d);
        let est = analysis::oc_estimate_sdp(&a, estimator_eps(&a, kstar), seed)?;
        for &k in &ks {
            let r = run_stiefel(&a, k, seed, &args.solver, kind)?;
            let mut row = with_estimate(Row { d: Some(args.d), ..base_row("goe-blocks", args.n, k, seed, kind, &r) }, &est);
            if certified(&r) && 2.0 * k as f64 / (args.d as f64 + 1.0) > 1.0 {
                row.bound_slack = Some(analysis::oc_grothendieck_check(&a, &r.sigma, r.epsilon, &est)?.slack);
            }
            rows.push(row);
        }
    }
    finish(rows, &args.grid, args.solver.strict)
}

pub fn check(args: &CheckArgs) -> Result<()> {
    if let Some(e) = args.eps {
        if !(e >= 0.0) {
            return Err(usage(format!("--eps must be non-negative, got {e}")));
        }
    }
    let a = read_matrix(&args.in_matrix)?;
    let cfg = BufReader::new(File::open(&args.in_config).with_context(|| format!("opening {}", args.in_config.display()))?);
    let power = PowerOptions { shift: ShiftRule::Spectral, lower: 1e-3 * a.norms().l2_est.max(f64::MIN_POSITIVE), ..PowerOptions::default() };
    let (check, eps, est) = match a.block_dim() {
        Some(d) if d > 1 => {
            let s = StiefelConfig::read_text(cfg)?;
            let eps = match args.eps {
                Some(e) => e,
                None => solver::curvature_probe(&Stiefel { d }, &a, s.rows(), &power, args.seed)?.max(0.0),
            };
            let kstar = analysis::oc_sdp_rank(a.n(), d);
            let est = analysis::oc_estimate_sdp(&a, estimator_eps(&a, kstar), args.seed)?;
            (analysis::oc_grothendieck_check(&a, &s, eps, &est)?, eps, est)
        }
        _ => {
            let s = SphereConfig::read_text(cfg)?;
            let eps = match args.eps {
                Some(e) => e,
                None => solver::curvature_probe(&Sphere, &a, s.rows(), &power, args.seed)?.max(0.0),
            };
            let kstar = analysis::sdp_rank(a.n());
            let est = analysis::estimate_sdp(&a, estimator_eps(&a, kstar), args.seed)?;
            (analysis::grothendieck_check(&a, &s, eps, &est)?, eps, est)
        }
    };
    println!(
        "holds={} slack={:?} objective={:?} bound={:?} k_eff={:?} eps={:?} eps_source={} sdp_est={:?} rg_est={:?} tolerance={:?}",
        check.holds,
        check.slack,
        check.objective,
        check.bound,
        check.k_eff,
        eps,
        if args.eps.is_some() { "given" } else { "measured" },
        est.value_plus,
        est.rg,
        check.tolerance
    );
    if args.strict && !check.holds {
        return Err(NotConverged("certificate inequality fails".into()).into());
    }
    Ok(())
}
