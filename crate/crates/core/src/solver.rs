//! Branch minimization on N⁺ and N⁻ by ray projection plus preconditioned
//! descent, and the diagnostics built on top of it.
//!
//! Every iterate is a nonnegative, boundary-zero field projected onto the
//! requested branch (`t₁u` for N⁺, `t₂u` for N⁻). The descent direction is
//! the energy gradient mapped through the inverse of `K = MᵀWM + δW`, the
//! quadratic form of the mixed derivative, with its ray component removed.
//! A short L-BFGS memory uses that map as its initial Hessian; it is dropped
//! whenever the two-loop direction stops being a descent direction.
//! `K` is a Kronecker product of one-dimensional factors and is inverted
//! through their eigen-decomposition.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{inner_quad, AnalyticField, Exponents, Field, GridSpec, ProblemParams};
use crate::energy::{default_floor, energy_gradient, floor_activity, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::fracops::Operators;
use crate::nehari::{classify_bundle, fiber_analysis, NehariClass, NehariTag, Tolerances};
use crate::spaces::{lp_modular, luxemburg_from_parts, norm_bundle, NormBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "N_plus")]
    NPlus,
    #[serde(rename = "N_minus")]
    NMinus,
}

impl Branch {
    pub fn tag(self) -> NehariTag {
        match self {
            Branch::NPlus => NehariTag::NPlus,
            Branch::NMinus => NehariTag::NMinus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Bound on the test-basis residual relative to ⟨Au, u⟩.
    pub residual_tol: f64,
    /// Relative energy decrease regarded as a stall.
    pub stall_rel: f64,
    /// Successive stalled iterations before stopping.
    pub stall_window: usize,
    pub max_halvings: usize,
    pub armijo: f64,
    pub tolerances: Tolerances,
    /// Worker threads for restarts and sweeps; 1 is the reproducible reference.
    pub jobs: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 2000,
            restarts: 10,
            seed: 42,
            residual_tol: 1e-4,
            stall_rel: 1e-12,
            stall_window: 5,
            max_halvings: 30,
            armijo: 1e-4,
            tolerances: Tolerances::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub u: Field,
    pub branch: Branch,
    pub energy: EnergyBreakdown,
    pub bundle: NormBundle,
    /// max_k |R(u, h_k)| over the test basis.
    pub residual_max: f64,
    /// `residual_max / ⟨Au, u⟩`.
    pub residual_rel: f64,
    /// |w′(1)| / (A + B + C + λD).
    pub nehari_residual: f64,
    pub class: NehariClass,
    /// Ray parameter of the last projection.
    pub t_project: f64,
    pub iterations: usize,
    pub converged: bool,
    pub floor_activity: f64,
    /// Seed of the initialization that produced this result.
    pub seed: u64,
}

/// Solves `K z = W g` on the interior nodes, `K = S⊗S + δW` (S⊗... in 1-D: `S + δW`).
#[derive(Debug, Clone)]
pub struct Preconditioner {
    grid: GridSpec,
    /// Interior eigenvectors of `S/h` (columns), orthonormal.
    vecs: DMatrix<f64>,
    vals: Vec<f64>,
    delta: f64,
}

impl Preconditioner {
    pub fn new(ops: &Operators) -> Self {
        let grid = ops.grid;
        let n = grid.n;
        let m = n - 2;
        let d = &ops.left.matrix;
        let w = grid.axis_weights();
        let h = grid.spacing();
        // S = Dᵀ W D restricted to interior columns; interior weights are all h
        let mut s = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let v: f64 = (0..n).map(|k| d[(k, a + 1)] * w[k] * d[(k, b + 1)]).sum();
                s[(a, b)] = v / h;
                s[(b, a)] = v / h;
            }
        }
        let eig = SymmetricEigen::new(s);
        let vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let top = vals.iter().cloned().fold(0.0, f64::max);
        let delta = 1e-10 * if grid.dim == 2 { top * top } else { top };
        Preconditioner { grid, vecs: eig.eigenvectors, vals, delta }
    }

    /// z = K⁻¹ (W g) for a quadrature-metric gradient g; boundary entries zero.
    pub fn apply(&self, g: &Field) -> Field {
        let n = self.grid.n;
        let m = n - 2;
        let v = &self.vecs;
        let mut out = Field::zeros(&self.grid);
        if self.grid.dim == 1 {
            // K = h V (Λ + δ) Vᵀ, W g = h g on the interior
            let c: Vec<f64> = (0..m).map(|k| (0..m).map(|a| v[(a, k)] * g.values[a + 1]).sum::<f64>()).collect();
            for a in 0..m {
                out.values[a + 1] = (0..m).map(|k| v[(a, k)] * c[k] / (self.vals[k] + self.delta)).sum();
            }
            return out;
        }
        // K = h² (V⊗V)(Λ⊗Λ + δ)(V⊗V)ᵀ, W g = h² g on the interior
        let gi = DMatrix::from_fn(m, m, |a, b| g.values[(a + 1) * n + b + 1]);
        let mut c = v.transpose() * gi * v;
        for k in 0..m {
            for l in 0..m {
                c[(k, l)] /= self.vals[k] * self.vals[l] + self.delta;
            }
        }
        let z = v * c * v.transpose();
        for a in 0..m {
            for b in 0..m {
                out.values[(a + 1) * n + b + 1] = z[(a, b)];
            }
        }
        out
    }
}

/// The 16 test directions sin(kπx₁/T) sin(lπx₂/T), k, l = 1..4 (k = 1..16 in 1-D).
pub fn test_basis(grid: &GridSpec) -> Vec<Field> {
    let mut out = Vec::with_capacity(16);
    if grid.dim == 1 {
        for k in 1..=16 {
            out.push(Field::dirichlet_from_fn(grid, |x, _| {
                AnalyticField::SineProduct { k1: k, k2: 1 }.eval(x, 0.0, grid.extent, 1)
            }));
        }
        return out;
    }
    for k in 1..=4 {
        for l in 1..=4 {
            let f = AnalyticField::SineProduct { k1: k, k2: l };
            out.push(Field::dirichlet_from_fn(grid, |x1, x2| f.eval(x1, x2, grid.extent, 2)));
        }
    }
    out
}

/// max_k |R(u, ‖u‖_∞ h_k)| over [`test_basis`].
pub fn test_basis_residual(u: &Field, params: &ProblemParams, ops: &Operators, floor: f64) -> Result<f64> {
    let g = energy_gradient(u, params, ops, floor)?;
    let amp = u.max_abs();
    let mut worst: f64 = 0.0;
    for h in test_basis(&u.grid) {
        // ⟨g, h⟩_quad equals the weak residual for interior h
        let r = inner_quad(&g, &h) * amp;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Sine bump with multiplicative seeded nodal noise, `sin sin · (1 + 0.1ξ)`.
pub fn initial_field(grid: &GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bump = AnalyticField::SineProduct { k1: 1, k2: 1 };
    let mut u = Field::from_fn(grid, |x1, x2| bump.eval(x1, x2, grid.extent, grid.dim));
    for v in u.values.iter_mut() {
        *v *= 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
    }
    u.enforce_dirichlet();
    u
}

struct Projected {
    u: Field,
    bundle: NormBundle,
    t: f64,
    energy: f64,
    class: NehariClass,
}

/// Projects the ray of `u` onto the branch; `None` without a usable two-root
/// structure or when the projected point is degenerate.
fn project(
    u: &Field,
    branch: Branch,
    params: &ProblemParams,
    ops: &Operators,
    tol: &Tolerances,
) -> Result<Option<Projected>> {
    if u.is_zero() {
        return Ok(None);
    }
    let e = params.exponents();
    let b = norm_bundle(u, params, ops)?;
    let rep = match fiber_analysis(&b, &e, tol) {
        Ok(r) => r,
        Err(Error::DegenerateDirection(_)) => return Ok(None),
        Err(err) => return Err(err),
    };
    let t = match (branch, rep.t1, rep.t2) {
        (Branch::NPlus, Some(t1), _) => t1,
        (Branch::NMinus, _, Some(t2)) => t2,
        _ => return Ok(None),
    };
    let bt = b.scaled(t, e.p, e.q, e.r, e.gamma);
    let class = classify_bundle(&bt, &e, tol)?;
    if class.tag != branch.tag() {
        return Ok(None);
    }
    let energy = EnergyBreakdown::from_bundle(&bt, params).total;
    if !energy.is_finite() {
        return Err(Error::NumericalBreakdown(format!("energy {energy} at projected iterate")));
    }
    Ok(Some(Projected { u: u.scaled(t), bundle: bt, t, energy, class }))
}

fn remove_ray(d: &Field, u: &Field) -> Field {
    let c = inner_quad(d, u) / inner_quad(u, u);
    d.add_scaled(-c, u)
}

/// Minimizes the energy over one Nehari branch from `init`.
pub fn minimize_on_branch(
    branch: Branch,
    params: &ProblemParams,
    ops: &Operators,
    init: &Field,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let pre = Preconditioner::new(ops);
    minimize_with(branch, params, ops, &pre, init, opts.seed, opts)
}

const LBFGS_MEMORY: usize = 8;

/// Limited-memory quasi-Newton direction in the quadrature metric, with
/// the preconditioner as the initial inverse Hessian.
fn lbfgs_direction(g: &Field, memory: &VecDeque<(Field, Field, f64)>, pre: &Preconditioner) -> Field {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * inner_quad(s, &q);
        q = q.add_scaled(-a, y);
        alphas.push(a);
    }
    let mut z = pre.apply(&q);
    if let Some((s, y, _)) = memory.back() {
        let hy = pre.apply(y);
        let yhy = inner_quad(y, &hy);
        if yhy > 0.0 {
            z = z.scaled(inner_quad(s, y) / yhy);
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * inner_quad(y, &z);
        z = z.add_scaled(a - b, s);
    }
    z
}

#[allow(clippy::too_many_arguments)]
fn minimize_with(
    branch: Branch,
    params: &ProblemParams,
    ops: &Operators,
    pre: &Preconditioner,
    init: &Field,
    seed: u64,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    init.check_finite()?;
    init.same_shape(&params.a)?;
    let tol = &opts.tolerances;
    let mut start = init.abs();
    start.enforce_dirichlet();
    let mut cur = project(&start, branch, params, ops, tol)?;
    let mut used_seed = seed;
    let mut attempt = 0;
    while cur.is_none() {
        if attempt >= opts.restarts {
            return Err(Error::LambdaTooLarge { lambda: params.lambda, attempts: attempt + 1 });
        }
        attempt += 1;
        used_seed = seed.wrapping_add(1000 + attempt as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(used_seed);
        let bump = AnalyticField::random_bump(&mut rng, 3, 1.0).sample(&init.grid);
        start = init.abs();
        for (v, b) in start.values.iter_mut().zip(&bump.values) {
            *v = 0.5 * *v + b * init.max_abs().max(1.0);
        }
        start.enforce_dirichlet();
        cur = project(&start, branch, params, ops, tol)?;
    }
    let mut cur = cur.expect("projected start");
    let mut stalled = 0usize;
    let mut step: f64 = 1.0;
    let mut iterations = 0usize;
    let mut converged_by_stall = false;
    let mut memory: VecDeque<(Field, Field, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut g = energy_gradient(&cur.u, params, ops, default_floor(&cur.u))?;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut d = remove_ray(&lbfgs_direction(&g, &memory, pre), &cur.u).scaled(-1.0);
        d.enforce_dirichlet();
        // directional derivative ⟨g, d⟩_quad
        let mut slope = inner_quad(&g, &d);
        if slope >= 0.0 && !memory.is_empty() {
            memory.clear();
            d = remove_ray(&pre.apply(&g), &cur.u).scaled(-1.0);
            d.enforce_dirichlet();
            slope = inner_quad(&g, &d);
        }
        let mut accepted = None;
        if slope < 0.0 {
            let mut s = if memory.is_empty() { (2.0 * step).min(1e6) } else { 1.0 };
            for _ in 0..=opts.max_halvings {
                let trial = cur.u.add_scaled(s, &d).abs();
                if let Some(p) = project(&trial, branch, params, ops, tol)? {
                    if p.energy <= cur.energy + opts.armijo * s * slope {
                        accepted = Some((p, s));
                        break;
                    }
                }
                s *= 0.5;
            }
        }
        match accepted {
            Some((p, s)) => {
                let decrease = cur.energy - p.energy;
                if memory.is_empty() {
                    step = s;
                }
                if decrease <= opts.stall_rel * cur.energy.abs() {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                let g_new = energy_gradient(&p.u, params, ops, default_floor(&p.u))?;
                let sv = p.u.add_scaled(-1.0, &cur.u);
                let yv = g_new.add_scaled(-1.0, &g);
                let sy = inner_quad(&sv, &yv);
                if sy > 1e-14 * inner_quad(&sv, &sv).sqrt() * inner_quad(&yv, &yv).sqrt() && sy.is_finite() {
                    if memory.len() == LBFGS_MEMORY {
                        memory.pop_front();
                    }
                    memory.push_back((sv, yv, 1.0 / sy));
                }
                cur = p;
                g = g_new;
            }
            None => {
                stalled += 1;
                if memory.is_empty() {
                    step = (step * 1e-3).max(1e-12);
                }
                memory.clear();
            }
        }
        if stalled >= opts.stall_window {
            converged_by_stall = true;
            break;
        }
    }
    finish(branch, params, ops, cur, iterations, converged_by_stall, used_seed, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    branch: Branch,
    params: &ProblemParams,
    ops: &Operators,
    cur: Projected,
    iterations: usize,
    stalled: bool,
    seed: u64,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let floor = default_floor(&cur.u);
    let residual_max = test_basis_residual(&cur.u, params, ops, floor)?;
    let b = cur.bundle;
    let residual_rel = residual_max / (b.dup_p + b.dup_q_mu);
    let scale = b.dup_p + b.dup_q_mu + b.sing + params.lambda * b.ur_r;
    let nehari_residual = cur.class.w1.abs() / scale;
    let activity = floor_activity(&cur.u, floor);
    let energy = EnergyBreakdown::from_bundle(&b, params);
    let sign_ok = match branch {
        Branch::NPlus => energy.total < 0.0,
        Branch::NMinus => energy.total > 0.0,
    };
    let converged = stalled
        && cur.class.tag == branch.tag()
        && nehari_residual <= opts.tolerances.manifold
        && residual_rel <= opts.residual_tol
        && activity == 0.0
        && sign_ok;
    Ok(SolveResult {
        u: cur.u,
        branch,
        energy,
        bundle: b,
        residual_max,
        residual_rel,
        nehari_residual,
        class: cur.class,
        t_project: cur.t,
        iterations,
        converged,
        floor_activity: activity,
        seed,
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs `f` over `items`, in parallel when `jobs > 1`, preserving order.
fn map_jobs<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = pool(jobs)?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn better(a: &SolveResult, b: &SolveResult) -> bool {
    // converged results first, then lower energy; ties keep the earlier run
    (a.converged && !b.converged) || (a.converged == b.converged && a.energy.total < b.energy.total)
}

/// Best result over the restarts (plus any extra initial fields) on one branch.
pub fn solve_branch(
    branch: Branch,
    params: &ProblemParams,
    ops: &Operators,
    opts: &SolveOptions,
    extra_inits: &[Field],
) -> Result<SolveResult> {
    let pre = Preconditioner::new(ops);
    let grid = params.grid();
    let mut inits: Vec<(u64, Field)> =
        (0..opts.restarts.max(1)).map(|k| (opts.seed + k as u64, initial_field(&grid, opts.seed + k as u64))).collect();
    for (k, f) in extra_inits.iter().enumerate() {
        inits.push((opts.seed.wrapping_add(10_000 + k as u64), f.clone()));
    }
    let single = SolveOptions { restarts: opts.restarts.max(1), ..opts.clone() };
    let runs =
        map_jobs(&inits, opts.jobs, |(seed, init)| minimize_with(branch, params, ops, &pre, init, *seed, &single))?;
    let mut best: Option<SolveResult> = None;
    let mut last_err = None;
    for r in runs {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| better(&r, b)) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::LambdaTooLarge { lambda: params.lambda, attempts: 0 }))
}

/// Both solutions: the N⁺ minimizer u* with E < 0 and the N⁻ minimizer v* with E > 0.
pub fn two_solution_solve(
    params: &ProblemParams,
    ops: &Operators,
    opts: &SolveOptions,
) -> Result<(SolveResult, SolveResult)> {
    two_solution_solve_with(params, ops, opts, &[], &[])
}

/// As [`two_solution_solve`], also starting from the given fields per branch.
pub fn two_solution_solve_with(
    params: &ProblemParams,
    ops: &Operators,
    opts: &SolveOptions,
    extra_plus: &[Field],
    extra_minus: &[Field],
) -> Result<(SolveResult, SolveResult)> {
    let plus = solve_branch(Branch::NPlus, params, ops, opts, extra_plus);
    let minus = solve_branch(Branch::NMinus, params, ops, opts, extra_minus);
    let (plus, minus) = match (plus, minus) {
        (Ok(p), Ok(m)) => (p, m),
        (p, m) => {
            let reason = [p.as_ref().err(), m.as_ref().err()]
                .into_iter()
                .flatten()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            // nothing to carry: surface the projection failure itself
            if let (Err(Error::LambdaTooLarge { lambda, attempts }), Err(_)) = (&p, &m) {
                return Err(Error::LambdaTooLarge { lambda: *lambda, attempts: *attempts });
            }
            return Err(Error::TwoSolutionFailure { reason, plus: p.ok().map(Box::new), minus: m.ok().map(Box::new) });
        }
    };
    let mut problems = Vec::new();
    if !(plus.energy.total < 0.0) {
        problems.push(format!("E(u*) = {} is not negative", plus.energy.total));
    }
    if !(minus.energy.total > 0.0) {
        problems.push(format!("E(v*) = {} is not positive", minus.energy.total));
    }
    for r in [&plus, &minus] {
        if !(r.residual_rel <= opts.residual_tol) {
            problems.push(format!("{:?} residual {} above {}", r.branch, r.residual_rel, opts.residual_tol));
        }
        if !r.converged {
            problems.push(format!("{:?} branch did not converge", r.branch));
        }
    }
    if !problems.is_empty() {
        return Err(Error::TwoSolutionFailure {
            reason: problems.join("; "),
            plus: Some(Box::new(plus)),
            minus: Some(Box::new(minus)),
        });
    }
    Ok((plus, minus))
}

/// Sampled lower envelope of the per-direction critical λ.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaStarEstimate {
    /// min over the sample of max Φ̂ / D.
    pub lambda_hat: f64,
    /// Per-direction values, in sampling order (`None` for skipped directions).
    pub per_direction: Vec<Option<f64>>,
    /// Index of the minimizing direction.
    pub argmin: usize,
    /// Entries of the λ grid strictly below the envelope.
    pub admissible: Vec<f64>,
    pub skipped: usize,
}

/// Random smooth positive directions, boundary-zero.
pub fn sample_directions(grid: &GridSpec, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut f = AnalyticField::random_bump(&mut rng, 3, 1.0).sample(grid);
            f.enforce_dirichlet();
            f
        })
        .collect()
}

pub fn estimate_lambda_star(
    params: &ProblemParams,
    ops: &Operators,
    directions: &[Field],
    lambda_grid: &[f64],
) -> Result<LambdaStarEstimate> {
    if directions.len() < 16 {
        return Err(Error::InvalidConfig(format!("{} directions, need at least 16", directions.len())));
    }
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("lambda grid must be increasing".into()));
    }
    let e = params.exponents();
    let mut per = Vec::with_capacity(directions.len());
    let mut skipped = 0;
    for u in directions {
        let b = norm_bundle(u, params, ops)?;
        if !(b.dup_p > 0.0 && b.sing > 0.0 && b.ur_r > 0.0) {
            eprintln!("warning: skipping degenerate direction");
            skipped += 1;
            per.push(None);
            continue;
        }
        // normalize to ∫|Du|^p = 1
        let s = b.dup_p.powf(-1.0 / params.p);
        let bn = b.scaled(s, e.p, e.q, e.r, e.gamma);
        let v = crate::nehari::phi_hat_max_closed_form(&bn, &e)? / bn.ur_r;
        per.push(Some(v));
    }
    let (argmin, lambda_hat) = per
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    if !lambda_hat.is_finite() {
        return Err(Error::DegenerateDirection("every sampled direction is degenerate".into()));
    }
    let admissible = lambda_grid.iter().cloned().filter(|&l| l < lambda_hat).collect();
    Ok(LambdaStarEstimate { lambda_hat, per_direction: per, argmin, admissible, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityRow {
    pub scale: f64,
    pub class: NehariTag,
    /// Luxemburg norm of the derivative of the Nehari point.
    pub norm: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityTable {
    /// Rows ordered by increasing norm.
    pub rows: Vec<CoercivityRow>,
    /// Energy strictly increasing over the upper half of the rows.
    pub increasing_top_half: bool,
}

/// Nehari points of the modulated directions `f_s = f·(1 + ½ sin(sπx₁/T) sin(sπx₂/T))`.
///
/// Each `f_s` gets a fresh bundle; both its N⁺ and N⁻ points are tabulated
/// against the Luxemburg norm of their mixed derivative.
pub fn coercivity_probe(
    params: &ProblemParams,
    ops: &Operators,
    direction: &Field,
    scales: &[f64],
    tol: &Tolerances,
) -> Result<CoercivityTable> {
    if scales.len() < 3 || scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("scales must be increasing with at least 3 entries".into()));
    }
    let e = params.exponents();
    let grid = direction.grid;
    let mut rows = Vec::new();
    for &s in scales {
        let m = Field::from_fn(&grid, |x1, x2| {
            let w = |x: f64| (s * std::f64::consts::PI * x / grid.extent).sin();
            if grid.dim == 1 {
                1.0 + 0.5 * w(x1)
            } else {
                1.0 + 0.5 * w(x1) * w(x2)
            }
        });
        let mut f = direction.abs();
        for (v, mv) in f.values.iter_mut().zip(&m.values) {
            *v *= mv;
        }
        f.enforce_dirichlet();
        let b = norm_bundle(&f, params, ops)?;
        let rep = crate::nehari::find_roots(&b, &e, tol)?;
        let du = ops.mixed_left(&f)?;
        let mp = lp_modular(&du, params.p)?;
        let mq = crate::spaces::weighted_modular(&du, &params.mu, params.q)?;
        for (t, class) in [(rep.t1, rep.class_at_t1), (rep.t2, rep.class_at_t2)] {
            let (t, class) = (t.expect("roots"), class.expect("class"));
            let norm = luxemburg_from_parts(t.powf(params.p) * mp, t.powf(params.q) * mq, params.p, params.q);
            let energy = EnergyBreakdown::from_bundle(&b.scaled(t, e.p, e.q, e.r, e.gamma), params).total;
            rows.push(CoercivityRow { scale: s, class: class.tag, norm, energy });
        }
    }
    rows.sort_by(|a, b| a.norm.total_cmp(&b.norm));
    let half = rows.len() / 2;
    let increasing_top_half = rows[half..].windows(2).all(|w| w[1].energy > w[0].energy);
    Ok(CoercivityTable { rows, increasing_top_half })
}

/// min over sampled fields of ∫|Du|^p / ‖u‖_{L^{p*}}^p.
pub fn estimate_sobolev_constant(params: &ProblemParams, ops: &Operators, directions: &[Field]) -> Result<f64> {
    if directions.len() < 32 {
        return Err(Error::InvalidConfig(format!("{} fields, need at least 32", directions.len())));
    }
    let ps = params.p_star_alpha();
    let mut best = f64::INFINITY;
    for u in directions {
        if u.is_zero() {
            continue;
        }
        let du = ops.mixed_left(u)?;
        let a = lp_modular(&du, params.p)?;
        let lps = lp_modular(u, ps)?.powf(params.p / ps);
        best = best.min(a / lps);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub res_plus: f64,
    pub res_minus: f64,
    pub iters_plus: usize,
    pub iters_minus: usize,
    pub converged_plus: bool,
    pub converged_minus: bool,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub m_plus_negative: bool,
    pub m_plus_nonincreasing: bool,
    pub m_minus_positive: bool,
}

/// Two-solution solves along an increasing λ grid. The N⁺ minimizer of each
/// λ also seeds the next one, so the reported m⁺ can only improve on it.
pub fn lambda_sweep(
    params: &ProblemParams,
    ops: &Operators,
    lambda_grid: &[f64],
    opts: &SolveOptions,
) -> Result<SweepReport> {
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("lambda grid must be increasing".into()));
    }
    let mut rows = Vec::new();
    let mut carry: Vec<Field> = Vec::new();
    for &lambda in lambda_grid {
        let p = params.with_lambda(lambda);
        let (plus, minus, error) = match two_solution_solve_with(&p, ops, opts, &carry, &[]) {
            Ok((a, b)) => (Some(a), Some(b), None),
            Err(Error::TwoSolutionFailure { reason, plus, minus }) => {
                (plus.map(|b| *b), minus.map(|b| *b), Some(reason))
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        if let Some(pl) = &plus {
            carry = vec![pl.u.clone()];
        }
        let get = |r: &Option<SolveResult>| {
            r.as_ref()
                .map_or((f64::NAN, f64::NAN, 0, false), |r| (r.energy.total, r.residual_rel, r.iterations, r.converged))
        };
        let (mp, rp, ip, cp) = get(&plus);
        let (mm, rm, im, cm) = get(&minus);
        rows.push(SweepRow {
            lambda,
            m_plus: mp,
            m_minus: mm,
            res_plus: rp,
            res_minus: rm,
            iters_plus: ip,
            iters_minus: im,
            converged_plus: cp,
            converged_minus: cm,
            error,
        });
    }
    let m_plus_negative = rows.iter().all(|r| r.m_plus < 0.0);
    let m_plus_nonincreasing = rows.windows(2).all(|w| w[1].m_plus <= w[0].m_plus);
    let m_minus_positive = rows.iter().all(|r| r.m_minus > 0.0);
    Ok(SweepReport { rows, m_plus_negative, m_plus_nonincreasing, m_minus_positive })
}

/// Writes sweep rows with the documented column order.
pub fn write_sweep_csv<W: std::io::Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Exponents of a parameter set, re-exported for convenience.
pub fn exponents(params: &ProblemParams) -> Exponents {
    params.exponents()
}
