//! Inner-loop-free fixed-point iteration for GME-regularized problems.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gme_model::{evaluate_objective, GmeProblem};
use crate::linops::{materialize, operator_norm, Gram, LinearMap, MapKind, NORM_MAX_ITER, NORM_TOL};
use crate::proxfns::{prox_conjugate, InnerOptions};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
const SIGMA_MARGIN: f64 = 1.001;
use crate::linops::EXACT_NORM_ENTRIES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub rho: f64,
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub lipschitz_grad_d: f64,
}

impl SolverParams {
    pub fn with_tol(self, tol: f64) -> Self {
        SolverParams { tol, ..self }
    }

    pub fn with_max_iter(self, max_iter: usize) -> Self {
        SolverParams { max_iter, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub z: DVector<f64>,
    pub iteration: usize,
    pub residual_p: f64,
}

impl SolverState {
    pub fn zeros(p: &GmeProblem) -> Self {
        let zd = p.l().out_dim();
        SolverState {
            x: DVector::zeros(p.dim()),
            v: DVector::zeros(zd),
            w: DVector::zeros(zd),
            z: DVector::zeros(p.c().out_dim()),
            iteration: 0,
            residual_p: 0.0,
        }
    }

    /// Zero state except `x = P_Δ(y)` when `A` and `ℭ` are identities.
    pub fn initial(p: &GmeProblem) -> Self {
        let mut h = SolverState::zeros(p);
        if p.a().kind() == MapKind::Identity && p.c().kind() == MapKind::Identity {
            h.x = p.delta().project(p.loss().observation());
        }
        h
    }

    fn diff_norm_sq(&self, other: &SolverState) -> f64 {
        (&self.x - &other.x).norm_squared()
            + (&self.v - &other.v).norm_squared()
            + (&self.w - &other.w).norm_squared()
            + (&self.z - &other.z).norm_squared()
    }

    /// Plain product-space distance.
    pub fn distance(&self, other: &SolverState) -> f64 {
        self.diff_norm_sq(other).sqrt()
    }

    pub fn sub(&self, other: &SolverState) -> SolverState {
        SolverState {
            x: &self.x - &other.x,
            v: &self.v - &other.v,
            w: &self.w - &other.w,
            z: &self.z - &other.z,
            iteration: 0,
            residual_p: 0.0,
        }
    }
}

/// Operator norm, exact through a dense SVD when the map is small.
fn op_norm(l: &LinearMap) -> Result<f64> {
    match l.kind() {
        MapKind::Identity | MapKind::Zero | MapKind::Diagonal | MapKind::FirstDifference | MapKind::Dct => {
            operator_norm(l, NORM_TOL, NORM_MAX_ITER)
        }
        _ if l.in_dim() * l.out_dim() <= EXACT_NORM_ENTRIES => {
            let m = materialize(l, EXACT_NORM_ENTRIES)?;
            Ok(m.singular_values().amax())
        }
        _ => operator_norm(l, NORM_TOL, NORM_MAX_ITER),
    }
}

/// Problem-dependent quantities reused across iterations.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    problem: &'a GmeProblem,
    gram: Gram,
}

impl<'a> Prepared<'a> {
    pub fn new(problem: &'a GmeProblem) -> Result<Self> {
        Ok(Prepared { problem, gram: Gram::new(problem.b())? })
    }

    pub fn problem(&self) -> &GmeProblem {
        self.problem
    }
}

/// `∇𝔡(x) = A*∇f(Ax) - μ𝔏*B*B𝔏x`.
pub fn grad_d(p: &GmeProblem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let prep = Prepared::new(p)?;
    let lx = p.l().apply(x);
    grad_d_cached(&prep, x, &prep.gram.apply(&lx))
}

fn grad_d_cached(prep: &Prepared, x: &DVector<f64>, g_lx: &DVector<f64>) -> Result<DVector<f64>> {
    let p = prep.problem;
    let fid = p.a().apply_adjoint(&p.loss().gradient(&p.a().apply(x))?);
    if matches!(prep.gram, Gram::Zero) {
        return Ok(fid);
    }
    Ok(fid - p.l().apply_adjoint(g_lx) * p.mu())
}

/// Step sizes from the problem's operator norms.
pub fn default_params(p: &GmeProblem) -> Result<SolverParams> {
    if !p.is_convexity_certified() {
        return Err(Error::Parameter("problem has not been certified convex".into()));
    }
    let mu = p.mu();
    let prep = Prepared::new(p)?;
    let lip_d = p.lipschitz() * op_norm(p.a())?.powi(2);
    let b_sq = op_norm(p.b())?.powi(2);
    let denom = lip_d.max(mu * b_sq);
    if !(denom > 0.0) {
        return Err(Error::ParameterDerivation("both the loss and the penalty are flat".into()));
    }
    let rho = 1.0 / denom;
    let tau = 1.5 / rho;
    let k = LinearMap::sum(
        &LinearMap::compose(&p.l().adjoint(), p.l())?,
        &LinearMap::compose(&p.c().adjoint(), p.c())?,
    )?;
    let k_norm = op_norm(&k)?;
    let bbl = match &prep.gram {
        Gram::Zero => 0.0,
        g => op_norm(&LinearMap::compose(&g.as_map(p.l().out_dim())?, p.l())?)?,
    };
    let bbl_sq = bbl * bbl;
    let sigma = SIGMA_MARGIN
        * (mu * k_norm + (2.0 * rho * mu * mu * bbl_sq + tau) / (2.0 * rho * tau - 1.0));
    let schur = mu * k_norm + mu * mu * bbl_sq / tau;
    if !(sigma > schur) {
        return Err(Error::ParameterDerivation(format!(
            "σ = {sigma} does not exceed the positivity bound {schur}"
        )));
    }
    let theta = (sigma + tau - mu * k_norm)
        / (rho * (sigma * tau - tau * mu * k_norm - mu * mu * bbl_sq));
    if !(theta < 2.0 && theta > 0.0) {
        return Err(Error::ParameterDerivation(format!("averagedness constant θ = {theta}")));
    }
    Ok(SolverParams {
        rho,
        sigma,
        tau,
        theta,
        tol: DEFAULT_TOL,
        max_iter: DEFAULT_MAX_ITER,
        lipschitz_grad_d: lip_d,
    })
}

/// One application of `T` given `𝔏x` and `B*B𝔏x`; also returns `𝔏ξ` and
/// `B*B𝔏ξ` for reuse in the next step.
fn step(
    prep: &Prepared,
    params: &SolverParams,
    h: &SolverState,
    lx: &DVector<f64>,
    g_lx: &DVector<f64>,
) -> Result<(SolverState, DVector<f64>, DVector<f64>)> {
    let p = prep.problem;
    let (mu, sigma, tau) = (p.mu(), params.sigma, params.tau);
    let grad = grad_d_cached(prep, &h.x, g_lx)?;
    let gv = prep.gram.apply(&h.v);
    let dual = p.l().apply_adjoint(&(&gv + &h.w)) + p.c().apply_adjoint(&h.z);
    let xi = &h.x - (grad + dual * mu) / sigma;

    let lxi = p.l().apply(&xi);
    let g_lxi = prep.gram.apply(&lxi);
    let r = mu / tau;
    let arg = &g_lxi * (2.0 * r) - g_lx * r + &h.v - &gv * r;
    let zeta = p.psi().prox(&arg, r)?;

    let eta = prox_conjugate(p.psi(), &(&lxi * 2.0 - lx + &h.w))?;

    let u = p.c().apply(&xi) * 2.0 - p.c().apply(&h.x) + &h.z;
    let varsigma = &u - p.delta().project(&u);

    let next = SolverState {
        x: xi,
        v: zeta,
        w: eta,
        z: varsigma,
        iteration: h.iteration + 1,
        residual_p: 0.0,
    };
    Ok((next, lxi, g_lxi))
}

pub fn apply_t(p: &GmeProblem, params: &SolverParams, h: &SolverState) -> Result<SolverState> {
    let prep = Prepared::new(p)?;
    apply_t_prepared(&prep, params, h)
}

pub fn apply_t_prepared(prep: &Prepared, params: &SolverParams, h: &SolverState) -> Result<SolverState> {
    check_state(prep.problem, h)?;
    let lx = prep.problem.l().apply(&h.x);
    let g_lx = prep.gram.apply(&lx);
    Ok(step(prep, params, h, &lx, &g_lx)?.0)
}

fn check_state(p: &GmeProblem, h: &SolverState) -> Result<()> {
    let zd = p.l().out_dim();
    if h.x.len() != p.dim() || h.v.len() != zd || h.w.len() != zd || h.z.len() != p.c().out_dim() {
        return Err(Error::Dimension("state blocks do not match the problem".into()));
    }
    Ok(())
}

/// `√⟨𝔓h, h⟩`.
pub fn pnorm(p: &GmeProblem, params: &SolverParams, h: &SolverState) -> Result<f64> {
    let prep = Prepared::new(p)?;
    pnorm_prepared(&prep, params, h)
}

pub fn pnorm_prepared(prep: &Prepared, params: &SolverParams, h: &SolverState) -> Result<f64> {
    let p = prep.problem;
    check_state(p, h)?;
    let mu = p.mu();
    let lx = p.l().apply(&h.x);
    let cross = prep.gram.apply(&lx).dot(&h.v) + lx.dot(&h.w) + p.c().apply(&h.x).dot(&h.z);
    let q = params.sigma * h.x.norm_squared()
        + params.tau * h.v.norm_squared()
        + mu * (h.w.norm_squared() + h.z.norm_squared())
        - 2.0 * mu * cross;
    if q < -1e-12 {
        return Err(Error::Metric(q));
    }
    Ok(q.max(0.0).sqrt())
}

/// Dense `𝔓` for small instances.
pub fn materialize_p(p: &GmeProblem, params: &SolverParams) -> Result<DMatrix<f64>> {
    let (n, zd, cd) = (p.dim(), p.l().out_dim(), p.c().out_dim());
    let mu = p.mu();
    let total = n + 2 * zd + cd;
    let lm = materialize(p.l(), EXACT_NORM_ENTRIES)?;
    let cm = materialize(p.c(), EXACT_NORM_ENTRIES)?;
    let bm = materialize(p.b(), EXACT_NORM_ENTRIES)?;
    let bbl = bm.tr_mul(&bm) * &lm;
    let mut m = DMatrix::zeros(total, total);
    m.view_mut((0, 0), (n, n)).fill_diagonal(params.sigma);
    m.view_mut((n, n), (zd, zd)).fill_diagonal(params.tau);
    m.view_mut((n + zd, n + zd), (zd, zd)).fill_diagonal(mu);
    m.view_mut((n + 2 * zd, n + 2 * zd), (cd, cd)).fill_diagonal(mu);
    for (row, block) in [(n, &bbl), (n + zd, &lm), (n + 2 * zd, &cm)] {
        let scaled = block * -mu;
        m.view_mut((row, 0), (block.nrows(), n)).copy_from(&scaled);
        m.view_mut((0, row), (n, block.nrows())).copy_from(&scaled.transpose());
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveOptions {
    /// Keep one trace row per iteration.
    pub record_trace: bool,
    /// Also track `‖h_k - h_{k-1}‖_𝔓`.
    pub record_p: bool,
    /// Evaluate the objective every k-th iteration.
    pub objective_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual_h: f64,
    pub residual_p: Option<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: DVector<f64>,
    pub state: SolverState,
    pub converged: bool,
    pub iterations: usize,
    pub residual_h: f64,
    pub trace: Vec<TraceRow>,
}

/// Iterate `h ← T(h)` until `‖h_k - h_{k-1}‖ < tol` or `max_iter`.
pub fn solve(
    p: &GmeProblem,
    params: &SolverParams,
    h0: SolverState,
    opts: SolveOptions,
) -> Result<SolveResult> {
    check_state(p, &h0)?;
    let prep = Prepared::new(p)?;
    let mut h = h0;
    let mut lx = p.l().apply(&h.x);
    let mut g_lx = prep.gram.apply(&lx);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let start = h.iteration;
    while h.iteration - start < params.max_iter {
        let (mut next, lxi, g_lxi) = step(&prep, params, &h, &lx, &g_lx)?;
        residual = next.distance(&h);
        if opts.record_p {
            next.residual_p = pnorm_prepared(&prep, params, &next.sub(&h))?;
        }
        if opts.record_trace {
            let objective = match opts.objective_every {
                Some(k) if k > 0 && next.iteration % k == 0 => {
                    Some(evaluate_objective(p, &next.x, InnerOptions::default())?.total)
                }
                _ => None,
            };
            trace.push(TraceRow {
                iteration: next.iteration,
                residual_h: residual,
                residual_p: opts.record_p.then_some(next.residual_p),
                objective,
            });
        }
        h = next;
        lx = lxi;
        g_lx = g_lxi;
        if residual < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("solver stopped after {} iterations, residual {residual:e}", params.max_iter);
    }
    Ok(SolveResult {
        x: h.x.clone(),
        iterations: h.iteration - start,
        state: h,
        converged,
        residual_h: residual,
        trace,
    })
}

pub fn write_trace<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "iteration,residual_H,residual_P,objective")?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.iteration, r.residual_h, opt(r.residual_p), opt(r.objective))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrapolate::{build_extrapolated, extrapolated_lipschitz, relative_strong_convexity_weights, Tail};
    use crate::gme_model::{design_b_range, design_b_scalar, GmeParts, TOL_PSD};
    use crate::linops::min_eigenvalue_symmetric;
    use crate::losses::{poisson_loss, quadratic_loss};
    use crate::proxfns::{ConstraintSet, ProxFriendly, SimpleSet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_instance(y: &[f64], mu: f64, range: bool) -> GmeProblem {
        let n = y.len();
        let pi = SimpleSet::uniform(n, 5.0, 40.0).unwrap();
        let base = poisson_loss(&DVector::from_column_slice(y)).unwrap();
        let lambda = relative_strong_convexity_weights(&base, &pi).unwrap().lambda;
        let a = LinearMap::identity(n);
        let l = LinearMap::first_difference(n).unwrap();
        let b = if range {
            design_b_range(0.99, mu, &lambda, &a, &l).unwrap()
        } else {
            design_b_scalar(0.99, mu, &lambda, &a, &l).unwrap().b
        };
        let mut p = GmeProblem::new(GmeParts {
            lipschitz: extrapolated_lipschitz(&base, &pi, Tail::Zero).unwrap(),
            loss: build_extrapolated(&base, &pi, Tail::Zero).unwrap(),
            a,
            mu,
            psi: ProxFriendly::L1,
            l,
            b,
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(pi),
            lambda,
        })
        .unwrap();
        assert!(p.certify(TOL_PSD).unwrap().0.holds);
        p
    }

    fn random_state(p: &GmeProblem, rng: &mut ChaCha8Rng, scale: f64) -> SolverState {
        let mut h = SolverState::zeros(p);
        for blk in [&mut h.x, &mut h.v, &mut h.w, &mut h.z] {
            for e in blk.iter_mut() {
                *e = rng.random_range(-scale..scale);
            }
        }
        h.x.add_scalar_mut(20.0);
        h
    }

    #[test]
    fn gradient_without_penalty() {
        let p = poisson_instance(&[10.0, 14.0, 9.0], 1.0, false).with_b(LinearMap::zero(2, 2)).unwrap();
        let x = DVector::from_column_slice(&[8.0, 12.0, 30.0]);
        let direct = p.loss().gradient(&x).unwrap();
        assert_eq!(grad_d(&p, &x).unwrap(), direct);
    }

    #[test]
    fn gradient_at_observation_for_quadratic() {
        let y = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let b = LinearMap::dense(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.2])).unwrap();
        let p = GmeProblem::new(GmeParts {
            loss: quadratic_loss(&y).unwrap(),
            lipschitz: 1.0,
            a: LinearMap::identity(3),
            mu: 0.7,
            psi: ProxFriendly::L1,
            l: LinearMap::first_difference(3).unwrap(),
            b: b.clone(),
            c: LinearMap::identity(3),
            delta: ConstraintSet::Intervals(SimpleSet::whole(3)),
            lambda: DVector::from_element(3, 1.0),
        })
        .unwrap();
        let g = grad_d(&p, &y).unwrap();
        let bl = LinearMap::compose(&b, p.l()).unwrap();
        let expect = bl.apply_adjoint(&bl.apply(&y)) * -0.7;
        assert!((g - expect).amax() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let y = [12.0, 9.0, 15.0, 22.0, 30.0, 28.0, 31.0, 8.0];
        let p = poisson_instance(&y, 2.0, true);
        let bl = LinearMap::compose(p.b(), p.l()).unwrap();
        let d = |x: &DVector<f64>| p.loss().value(x).unwrap() - 0.5 * p.mu() * bl.apply(x).norm_squared();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = DVector::from_fn(y.len(), |_, _| rng.random_range(1.0..60.0));
            let g = grad_d(&p, &x).unwrap();
            for i in 0..y.len() {
                let h = 1e-6 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (d(&xp) - d(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn params_satisfy_rules() {
        let p = poisson_instance(&[12.0, 9.0, 15.0, 22.0, 30.0], 3.0, true);
        let params = default_params(&p).unwrap();
        assert_relative_eq!(2.0 * params.rho * params.tau, 3.0, max_relative = 1e-15);
        assert!(params.theta < 2.0);
        let pm = materialize_p(&p, &params).unwrap();
        assert!(min_eigenvalue_symmetric(&pm).unwrap() > 0.0);

        let flat = p.with_b(LinearMap::zero(4, 4)).unwrap();
        assert!(matches!(default_params(&flat), Err(Error::Parameter(_))));
        let mut flat = flat;
        flat.certify(TOL_PSD).unwrap();
        let fp = default_params(&flat).unwrap();
        assert_relative_eq!(fp.rho, 1.0 / flat.lipschitz(), max_relative = 1e-15);
    }

    #[test]
    fn pnorm_examples() {
        let p = poisson_instance(&[12.0, 9.0, 15.0, 22.0], 1.0, true);
        let params = default_params(&p).unwrap();
        assert_eq!(pnorm(&p, &params, &SolverState::zeros(&p)).unwrap(), 0.0);

        let pm = materialize_p(&p, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let h = random_state(&p, &mut rng, 3.0);
            let flat = DVector::from_iterator(
                pm.nrows(),
                h.x.iter().chain(h.v.iter()).chain(h.w.iter()).chain(h.z.iter()).copied(),
            );
            let dense = flat.dot(&(&pm * &flat)).sqrt();
            assert_relative_eq!(pnorm(&p, &params, &h).unwrap(), dense, max_relative = 1e-10);
        }

        let n = 3;
        let diag_p = GmeProblem::new(GmeParts {
            loss: quadratic_loss(&DVector::zeros(n)).unwrap(),
            lipschitz: 1.0,
            a: LinearMap::identity(n),
            mu: 2.0,
            psi: ProxFriendly::L1,
            l: LinearMap::zero(2, n),
            b: LinearMap::zero(2, 2),
            c: LinearMap::zero(1, n),
            delta: ConstraintSet::Intervals(SimpleSet::whole(1)),
            lambda: DVector::from_element(n, 1.0),
        })
        .unwrap();
        let params = SolverParams { rho: 1.0, sigma: 3.0, tau: 5.0, theta: 1.0, tol: 1e-6, max_iter: 10, lipschitz_grad_d: 1.0 };
        let h = SolverState {
            x: DVector::from_element(n, 1.0),
            v: DVector::from_element(2, 2.0),
            w: DVector::from_element(2, -1.0),
            z: DVector::from_element(1, 3.0),
            iteration: 0,
            residual_p: 0.0,
        };
        let expect = (3.0 * 3.0 + 5.0 * 8.0 + 2.0 * 2.0 + 2.0 * 9.0f64).sqrt();
        assert_relative_eq!(pnorm(&diag_p, &params, &h).unwrap(), expect, max_relative = 1e-15);
    }

    #[test]
    fn t_is_nonexpansive_in_p_metric() {
        let y = [12.0, 9.0, 15.0, 22.0, 30.0, 28.0, 31.0, 8.0, 7.0, 11.0];
        let p = poisson_instance(&y, 2.0, true);
        let params = default_params(&p).unwrap();
        let prep = Prepared::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let h1 = random_state(&p, &mut rng, 10.0);
            let h2 = random_state(&p, &mut rng, 10.0);
            let t1 = apply_t_prepared(&prep, &params, &h1).unwrap();
            let t2 = apply_t_prepared(&prep, &params, &h2).unwrap();
            let before = pnorm_prepared(&prep, &params, &h1.sub(&h2)).unwrap();
            let after = pnorm_prepared(&prep, &params, &t1.sub(&t2)).unwrap();
            assert!(after <= before * (1.0 + 1e-10), "{after} > {before}");
        }
    }

    #[test]
    fn z_block_vanishes_without_constraint() {
        let n = 4;
        let y = DVector::from_column_slice(&[1.0, 2.0, 0.0, -1.0]);
        let mut p = GmeProblem::new(GmeParts {
            loss: quadratic_loss(&y).unwrap(),
            lipschitz: 1.0,
            a: LinearMap::identity(n),
            mu: 0.5,
            psi: ProxFriendly::L1,
            l: LinearMap::first_difference(n).unwrap(),
            b: LinearMap::zero(n - 1, n - 1),
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(SimpleSet::whole(n)),
            lambda: DVector::from_element(n, 1.0),
        })
        .unwrap();
        p.certify(TOL_PSD).unwrap();
        let params = default_params(&p).unwrap();
        let mut h = SolverState::initial(&p);
        for _ in 0..5 {
            h = apply_t(&p, &params, &h).unwrap();
            assert_eq!(h.z, DVector::zeros(n));
        }
    }

    #[test]
    fn trivial_instance_converges_quickly() {
        // f = ½‖x - y‖², 𝔏 = Id, tiny μ: the solution is soft thresholding of y
        let n = 4;
        let y = DVector::from_column_slice(&[3.0, -2.0, 0.5, 1.0]);
        let mu = 1e-9;
        let mut p = GmeProblem::new(GmeParts {
            loss: quadratic_loss(&y).unwrap(),
            lipschitz: 1.0,
            a: LinearMap::identity(n),
            mu,
            psi: ProxFriendly::L1,
            l: LinearMap::identity(n),
            b: LinearMap::zero(n, n),
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(SimpleSet::whole(n)),
            lambda: DVector::from_element(n, 1.0),
        })
        .unwrap();
        p.certify(TOL_PSD).unwrap();
        let params = default_params(&p).unwrap();
        let mut h0 = SolverState::zeros(&p);
        h0.x = crate::proxfns::prox_l1(&y, mu).unwrap();
        h0.w = y.map(|v| v.signum() * 1.0);
        let res = solve(&p, &params, h0, SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 3, "{} iterations", res.iterations);
    }

    #[test]
    fn fejer_monotone_and_fixed_point() {
        let y = [12.0, 9.0, 15.0, 22.0, 30.0, 28.0, 31.0, 8.0];
        let p = poisson_instance(&y, 2.0, true);
        let params = default_params(&p).unwrap().with_tol(1e-11);
        let prep = Prepared::new(&p).unwrap();
        let limit = solve(&p, &params, SolverState::initial(&p), SolveOptions::default()).unwrap();
        assert!(limit.converged);
        let again = apply_t_prepared(&prep, &params, &limit.state).unwrap();
        assert!(pnorm_prepared(&prep, &params, &again.sub(&limit.state)).unwrap() <= 10.0 * 1e-11 * params.sigma.sqrt());

        let mut h = SolverState::initial(&p);
        let mut prev = pnorm_prepared(&prep, &params, &h.sub(&limit.state)).unwrap();
        let mut prev_step = f64::INFINITY;
        for _ in 0..2000 {
            let next = apply_t_prepared(&prep, &params, &h).unwrap();
            let dist = pnorm_prepared(&prep, &params, &next.sub(&limit.state)).unwrap();
            assert!(dist <= prev + 1e-9);
            let stepn = pnorm_prepared(&prep, &params, &next.sub(&h)).unwrap();
            assert!(stepn <= prev_step + 1e-9);
            prev = dist;
            prev_step = stepn;
            h = next;
        }
    }

    #[test]
    fn trace_rows_and_csv() {
        let p = poisson_instance(&[12.0, 9.0, 15.0], 1.0, false);
        let params = default_params(&p).unwrap().with_max_iter(20).with_tol(0.0);
        let opts = SolveOptions { record_trace: true, record_p: true, objective_every: Some(5) };
        let res = solve(&p, &params, SolverState::initial(&p), opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.trace.len(), 20);
        assert!(res.trace[4].objective.is_some() && res.trace[3].objective.is_none());
        let mut buf = Vec::new();
        write_trace(&res.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.starts_with("iteration,residual_H,residual_P,objective\n"));
    }
}
