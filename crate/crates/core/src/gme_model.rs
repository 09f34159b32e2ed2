//! GME-regularized problem instances, GME-matrix design and certification.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linops::{
    materialize, max_eigenvalue_symmetric, min_eigenvalue_symmetric, symmetric_eigenvalues,
    LinearMap, MapKind, MATERIALIZE_BUDGET,
};
use crate::losses::SmoothLoss;
use crate::proxfns::{gme_value, ConstraintSet, InnerOptions, ProxFriendly};

pub const TOL_PSD: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 60;

/// Ingredients of `min_{ℭx ∈ Δ} f(Ax) + μ Ψ_B(𝔏x)`.
#[derive(Debug, Clone)]
pub struct GmeParts {
    pub loss: SmoothLoss,
    /// Lipschitz constant of `∇f`.
    pub lipschitz: f64,
    pub a: LinearMap,
    pub mu: f64,
    pub psi: ProxFriendly,
    pub l: LinearMap,
    pub b: LinearMap,
    pub c: LinearMap,
    pub delta: ConstraintSet,
    /// Diagonal of `Λ`.
    pub lambda: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityCertificate {
    pub min_eig: f64,
    pub norm: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExistenceCondition {
    /// Coercive `f` over a product of intervals.
    I,
    /// Coercive `f` and `null A ∩ null 𝔏 = {0}`.
    II,
    /// `f` bounded below and `𝔏` injective.
    III,
    /// Bounded box `Δ` and `ℭ` injective.
    IV,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Declared {
    pub coercive: bool,
    pub bounded_below: bool,
}

impl Declared {
    pub fn from_loss(loss: &SmoothLoss) -> Self {
        Declared { coercive: loss.is_coercive(), bounded_below: loss.is_bounded_below() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub fidelity: f64,
    pub regularizer: f64,
    pub total: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct GmeProblem {
    parts: GmeParts,
    convexity: Option<ConvexityCertificate>,
    existence: Option<ExistenceCondition>,
}

impl GmeProblem {
    pub fn new(parts: GmeParts) -> Result<Self> {
        let p = &parts;
        let n = p.a.in_dim();
        let dim_err = |what: &str, got: usize, want: usize| {
            Err(Error::Dimension(format!("{what} has dimension {got}, expected {want}")))
        };
        if p.a.out_dim() != p.loss.dim() {
            return dim_err("A codomain", p.a.out_dim(), p.loss.dim());
        }
        if p.l.in_dim() != n {
            return dim_err("𝔏 domain", p.l.in_dim(), n);
        }
        if p.b.in_dim() != p.l.out_dim() {
            return dim_err("B domain", p.b.in_dim(), p.l.out_dim());
        }
        if p.c.in_dim() != n {
            return dim_err("ℭ domain", p.c.in_dim(), n);
        }
        if p.delta.dim() != p.c.out_dim() {
            return dim_err("Δ", p.delta.dim(), p.c.out_dim());
        }
        if p.lambda.len() != p.loss.dim() {
            return dim_err("Λ", p.lambda.len(), p.loss.dim());
        }
        if let ProxFriendly::Indicator(s) = &p.psi {
            if s.dim() != p.l.out_dim() {
                return dim_err("Ψ", s.dim(), p.l.out_dim());
            }
        }
        if !(p.mu > 0.0 && p.mu.is_finite()) {
            return Err(Error::Parameter(format!("μ must be positive, got {}", p.mu)));
        }
        if !(p.lipschitz >= 0.0 && p.lipschitz.is_finite()) {
            return Err(Error::Parameter(format!("invalid Lipschitz constant {}", p.lipschitz)));
        }
        if p.lambda.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Input("Λ must be finite and nonnegative".into()));
        }
        Ok(GmeProblem { parts, convexity: None, existence: None })
    }

    pub fn parts(&self) -> &GmeParts {
        &self.parts
    }

    pub fn loss(&self) -> &SmoothLoss {
        &self.parts.loss
    }

    pub fn lipschitz(&self) -> f64 {
        self.parts.lipschitz
    }

    pub fn a(&self) -> &LinearMap {
        &self.parts.a
    }

    pub fn mu(&self) -> f64 {
        self.parts.mu
    }

    pub fn psi(&self) -> &ProxFriendly {
        &self.parts.psi
    }

    pub fn l(&self) -> &LinearMap {
        &self.parts.l
    }

    pub fn b(&self) -> &LinearMap {
        &self.parts.b
    }

    pub fn c(&self) -> &LinearMap {
        &self.parts.c
    }

    pub fn delta(&self) -> &ConstraintSet {
        &self.parts.delta
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.parts.lambda
    }

    /// Dimension of the unknown.
    pub fn dim(&self) -> usize {
        self.parts.a.in_dim()
    }

    /// Same problem with another GME matrix; certificates are reset.
    pub fn with_b(&self, b: LinearMap) -> Result<GmeProblem> {
        GmeProblem::new(GmeParts { b, ..self.parts.clone() })
    }

    pub fn convexity(&self) -> Option<ConvexityCertificate> {
        self.convexity
    }

    pub fn existence(&self) -> Option<ExistenceCondition> {
        self.existence
    }

    pub fn is_convexity_certified(&self) -> bool {
        self.convexity.is_some_and(|c| c.holds)
    }

    /// Run both certificates and store the outcome.
    pub fn certify(&mut self, tol_psd: f64) -> Result<(ConvexityCertificate, ExistenceCondition)> {
        let conv = check_overall_convexity(self, tol_psd)?;
        let exist = check_existence(self, Declared::from_loss(&self.parts.loss))?;
        self.convexity = Some(conv);
        self.existence = Some(exist);
        Ok((conv, exist))
    }
}

/// `A*ΛA` as a dense matrix.
fn weighted_gram(a: &LinearMap, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
    let am = materialize(a, MATERIALIZE_BUDGET)?;
    let mut scaled = am.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= lambda[i];
    }
    Ok(am.tr_mul(&scaled))
}

/// `𝔏*B*B𝔏` as a dense matrix.
fn penalty_gram(l: &LinearMap, b: &LinearMap) -> Result<DMatrix<f64>> {
    let bl = materialize(&LinearMap::compose(b, l)?, MATERIALIZE_BUDGET)?;
    Ok(bl.tr_mul(&bl))
}

/// Smallest eigenvalue of `A*ΛA - μ𝔏*B*B𝔏` and whether it clears
/// `-tol_psd·(1 + ‖M‖)`.
pub fn check_overall_convexity(p: &GmeProblem, tol_psd: f64) -> Result<ConvexityCertificate> {
    if !(tol_psd >= 0.0) {
        return Err(Error::Parameter(format!("tolerance must be nonnegative, got {tol_psd}")));
    }
    let mut m = weighted_gram(p.a(), p.lambda())?;
    if !p.b().is_zero_map() {
        m -= penalty_gram(p.l(), p.b())? * p.mu();
    }
    let ev = symmetric_eigenvalues(&m)?;
    let min_eig = ev[0];
    let norm = ev[0].abs().max(ev[ev.len() - 1].abs());
    Ok(ConvexityCertificate { min_eig, norm, holds: min_eig >= -tol_psd * (1.0 + norm) })
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("θ must lie in [0, 1), got {theta}")))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("μ must be positive, got {mu}")))
    }
}

fn check_lambda(lambda: &DVector<f64>) -> Result<()> {
    if lambda.iter().all(|&v| v >= 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input("Λ must be finite and nonnegative".into()))
    }
}

/// `B = √(θ/μ)·Λ^{1/2}·𝔏⁻¹`, for `A = Id` and invertible `𝔏`.
pub fn design_b_inverse(
    theta: f64,
    mu: f64,
    lambda: &DVector<f64>,
    a: &LinearMap,
    l: &LinearMap,
) -> Result<LinearMap> {
    check_theta(theta)?;
    check_mu(mu)?;
    check_lambda(lambda)?;
    if a.kind() != MapKind::Identity {
        return Err(Error::Input("the inverse design needs A = Id".into()));
    }
    if lambda.len() != a.out_dim() || l.in_dim() != a.in_dim() {
        return Err(Error::Dimension("Λ, A and 𝔏 sizes disagree".into()));
    }
    let l_inv = l.inverse()?;
    if theta == 0.0 {
        return Ok(LinearMap::zero(l.out_dim(), l.out_dim()));
    }
    let root = LinearMap::diagonal(lambda.map(f64::sqrt))?;
    Ok(LinearMap::scaled((theta / mu).sqrt(), &LinearMap::compose(&root, &l_inv)?))
}

#[derive(Debug, Clone)]
pub struct ScalarDesign {
    pub b: LinearMap,
    /// Largest `c` with `A*ΛA - c𝔏*𝔏 ⪰ 0`.
    pub c_star: f64,
    pub degenerate: bool,
}

/// `B = √(θc*/μ)·Id` where `c*` is the largest `c` keeping
/// `A*ΛA - c𝔏*𝔏` positive semidefinite.
pub fn design_b_scalar(
    theta: f64,
    mu: f64,
    lambda: &DVector<f64>,
    a: &LinearMap,
    l: &LinearMap,
) -> Result<ScalarDesign> {
    check_theta(theta)?;
    check_mu(mu)?;
    check_lambda(lambda)?;
    if lambda.len() != a.out_dim() || l.in_dim() != a.in_dim() {
        return Err(Error::Dimension("Λ, A and 𝔏 sizes disagree".into()));
    }
    let p = l.out_dim();
    let gram = weighted_gram(a, lambda)?;
    let lm = materialize(l, MATERIALIZE_BUDGET)?;
    let ll = lm.tr_mul(&lm);
    let top = max_eigenvalue_symmetric(&ll)?;
    let feasible = |c: f64| -> Result<bool> { Ok(min_eigenvalue_symmetric(&(&gram - &ll * c))? >= 0.0) };

    let mut c_star = 0.0;
    if top > 0.0 && feasible(0.0)? {
        let mut lo = 0.0;
        let mut hi = max_eigenvalue_symmetric(&gram)?.max(0.0) / top;
        if feasible(hi)? {
            lo = hi;
        } else {
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if feasible(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        c_star = lo;
    }
    if c_star == 0.0 {
        log::warn!("scalar GME design is degenerate; falling back to B = 0");
        return Ok(ScalarDesign { b: LinearMap::zero(p, p), c_star, degenerate: true });
    }
    let b = LinearMap::scaled((theta * c_star / mu).sqrt(), &LinearMap::identity(p));
    Ok(ScalarDesign { b, c_star, degenerate: theta == 0.0 })
}

/// Dense `B` with `μ𝔏*B*B𝔏 = θ·A*ΛA` on the part of the domain that `𝔏`
/// can see: `B*B = (θ/μ)(M*M)^†` where `M = R_+^{-1/2} U_+* 𝔏* Π`, with
/// `U_+ R_+ U_+*` the positive spectral part of `A*ΛA` and `Π` the projector
/// off `𝔏(null A*ΛA)`.
pub fn design_b_range(
    theta: f64,
    mu: f64,
    lambda: &DVector<f64>,
    a: &LinearMap,
    l: &LinearMap,
) -> Result<LinearMap> {
    check_theta(theta)?;
    check_mu(mu)?;
    check_lambda(lambda)?;
    if lambda.len() != a.out_dim() || l.in_dim() != a.in_dim() {
        return Err(Error::Dimension("Λ, A and 𝔏 sizes disagree".into()));
    }
    let p = l.out_dim();
    if theta == 0.0 {
        return Ok(LinearMap::zero(p, p));
    }
    let gram = weighted_gram(a, lambda)?;
    let lm = materialize(l, MATERIALIZE_BUDGET)?;
    let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    if top == 0.0 {
        return Ok(LinearMap::zero(p, p));
    }
    let cut = 1e-12 * top;
    let pos: Vec<usize> = (0..gram.nrows()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let null: Vec<usize> = (0..gram.nrows()).filter(|&i| eig.eigenvalues[i] <= cut).collect();

    // Π: projector onto the complement of 𝔏·null(A*ΛA)
    let mut proj = DMatrix::<f64>::identity(p, p);
    if !null.is_empty() {
        let w = &lm * eig.eigenvectors.select_columns(&null);
        let svd = w.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.amax();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-10 * smax.max(1.0) {
                let col = u.column(k);
                proj -= col * col.transpose();
            }
        }
    }
    let mut m = DMatrix::<f64>::zeros(pos.len(), p);
    let lt_proj = lm.transpose() * &proj;
    for (r, &i) in pos.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        let row = eig.eigenvectors.column(i).transpose() * &lt_proj * scale;
        m.row_mut(r).copy_from(&row);
    }
    let h = m.tr_mul(&m);
    let he = SymmetricEigen::new((&h + h.transpose()) * 0.5);
    let hmax = he.eigenvalues.amax();
    let keep = 1e-12 * hmax;
    let inv_sqrt = he.eigenvalues.map(|v| if v > keep { 1.0 / v.sqrt() } else { 0.0 });
    let b = &he.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * he.eigenvectors.transpose();
    LinearMap::dense(b * (theta / mu).sqrt())
}

fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    m.singular_values()
}

fn injective(m: &DMatrix<f64>) -> bool {
    if m.nrows() < m.ncols() {
        return false;
    }
    let sv = singular_values(m);
    let smax = sv.amax();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    smax > 0.0 && smin > 1e-10 * (1.0 + smax)
}

/// First sufficient condition for the existence of a minimizer that holds,
/// tried in the order iv, iii, ii, i.
pub fn check_existence(p: &GmeProblem, declared: Declared) -> Result<ExistenceCondition> {
    let boxed = p.delta().intervals().is_some_and(|s| s.is_bounded());
    if boxed && injective(&materialize(p.c(), MATERIALIZE_BUDGET)?) {
        return Ok(ExistenceCondition::IV);
    }
    let lm = materialize(p.l(), MATERIALIZE_BUDGET)?;
    if declared.bounded_below && injective(&lm) {
        return Ok(ExistenceCondition::III);
    }
    if declared.coercive {
        let am = materialize(p.a(), MATERIALIZE_BUDGET)?;
        let mut stacked = DMatrix::zeros(am.nrows() + lm.nrows(), am.ncols());
        stacked.rows_mut(0, am.nrows()).copy_from(&am);
        stacked.rows_mut(am.nrows(), lm.nrows()).copy_from(&lm);
        if injective(&stacked) {
            return Ok(ExistenceCondition::II);
        }
        if p.delta().intervals().is_some() {
            return Ok(ExistenceCondition::I);
        }
    }
    Ok(ExistenceCondition::None)
}

/// `f(Ax) + μΨ_B(𝔏x)` and feasibility of `x`.
pub fn evaluate_objective(p: &GmeProblem, x: &DVector<f64>, inner: InnerOptions) -> Result<Objective> {
    if x.len() != p.dim() {
        return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), p.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("x must be finite".into()));
    }
    let fidelity = p.loss().value(&p.a().apply(x))?;
    let regularizer = gme_value(p.psi(), p.b(), &p.l().apply(x), inner)?;
    let feasible = p.delta().contains(&p.c().apply(x), FEASIBILITY_TOL);
    Ok(Objective { fidelity, regularizer, total: fidelity + p.mu() * regularizer, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrapolate::{build_extrapolated, extrapolated_lipschitz, relative_strong_convexity_weights, Tail};
    use crate::losses::{clipped_loss, poisson_loss, quadratic_loss};
    use crate::proxfns::SimpleSet;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_problem(y: &[f64], mu: f64) -> GmeProblem {
        let n = y.len();
        let pi = SimpleSet::uniform(n, 5.0, 40.0).unwrap();
        let base = poisson_loss(&DVector::from_column_slice(y)).unwrap();
        let lambda = relative_strong_convexity_weights(&base, &pi).unwrap().lambda;
        let lipschitz = extrapolated_lipschitz(&base, &pi, Tail::Zero).unwrap();
        let loss = build_extrapolated(&base, &pi, Tail::Zero).unwrap();
        GmeProblem::new(GmeParts {
            loss,
            lipschitz,
            a: LinearMap::identity(n),
            mu,
            psi: ProxFriendly::L1,
            l: LinearMap::first_difference(n).unwrap(),
            b: LinearMap::zero(n - 1, n - 1),
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(pi),
            lambda,
        })
        .unwrap()
    }

    fn quadratic_problem(y: &[f64], l: LinearMap, delta: ConstraintSet) -> GmeProblem {
        let n = y.len();
        GmeProblem::new(GmeParts {
            loss: quadratic_loss(&DVector::from_column_slice(y)).unwrap(),
            lipschitz: 1.0,
            a: LinearMap::identity(n),
            mu: 1.0,
            psi: ProxFriendly::L1,
            b: LinearMap::zero(l.out_dim(), l.out_dim()),
            l,
            c: LinearMap::identity(n),
            delta,
            lambda: DVector::from_element(n, 1.0),
        })
        .unwrap()
    }

    #[test]
    fn zero_b_is_convex() {
        let p = poisson_problem(&[10.0, 14.0, 9.0, 30.0], 2.0);
        let cert = check_overall_convexity(&p, TOL_PSD).unwrap();
        assert!(cert.holds);
        let direct = min_eigenvalue_symmetric(&DMatrix::from_diagonal(p.lambda())).unwrap();
        assert_relative_eq!(cert.min_eig, direct, max_relative = 1e-12);
    }

    #[test]
    fn dimension_checks() {
        let p = poisson_problem(&[10.0, 14.0, 9.0], 2.0);
        assert!(matches!(p.with_b(LinearMap::zero(3, 3)), Err(Error::Dimension(_))));
        let mut parts = p.parts().clone();
        parts.mu = -1.0;
        assert!(matches!(GmeProblem::new(parts), Err(Error::Parameter(_))));
    }

    #[test]
    fn inverse_design_examples() {
        let id = LinearMap::identity(3);
        let lam = DVector::from_element(3, 1.0);
        let b = design_b_inverse(0.99, 1.0, &lam, &id, &id).unwrap();
        let bm = materialize(&b, MATERIALIZE_BUDGET).unwrap();
        assert!((bm - DMatrix::identity(3, 3) * 0.99f64.sqrt()).amax() < 1e-15);
        let z = design_b_inverse(0.0, 1.0, &lam, &id, &id).unwrap();
        assert!(z.is_zero_map());
        assert!(matches!(
            design_b_inverse(0.5, 1.0, &lam, &LinearMap::scaled(2.0, &id), &id),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            design_b_inverse(0.5, 1.0, &DVector::from_element(4, 1.0), &LinearMap::identity(4),
                &LinearMap::first_difference(4).unwrap()),
            Err(Error::Designer(_))
        ));
    }

    #[test]
    fn inverse_design_is_exact() {
        let n = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lam = DVector::from_fn(n, |_, _| rng.random_range(0.1..4.0));
        let (theta, mu) = (0.7, 2.5);
        let dct = LinearMap::dct(n).unwrap();
        let b = design_b_inverse(theta, mu, &lam, &LinearMap::identity(n), &dct).unwrap();
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let p = GmeProblem::new(GmeParts {
            loss: quadratic_loss(&y).unwrap(),
            lipschitz: 1.0,
            a: LinearMap::identity(n),
            mu,
            psi: ProxFriendly::L1,
            l: dct,
            b,
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(SimpleSet::whole(n)),
            lambda: lam.clone(),
        })
        .unwrap();
        let cert = check_overall_convexity(&p, TOL_PSD).unwrap();
        assert!(cert.holds);
        assert!((cert.min_eig - (1.0 - theta) * lam.min()).abs() < 1e-10);
    }

    #[test]
    fn declip_design_certifies() {
        let n = 64;
        let (level, s) = (0.4, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-0.6f64..0.6).clamp(-level, level));
        let base = clipped_loss(&y, level, s).unwrap();
        let pi = SimpleSet::new(
            y.iter().map(|&v| if v == level { level - 10.0 * s } else { f64::NEG_INFINITY }).collect(),
            y.iter().map(|&v| if v == -level { -level + 10.0 * s } else { f64::INFINITY }).collect(),
        )
        .unwrap();
        let lambda = relative_strong_convexity_weights(&base, &pi).unwrap().lambda;
        let dct = LinearMap::dct(n).unwrap();
        let mu = 3.0;
        let b = design_b_inverse(0.99, mu, &lambda, &LinearMap::identity(n), &dct).unwrap();
        let mut p = GmeProblem::new(GmeParts {
            lipschitz: extrapolated_lipschitz(&base, &pi, Tail::Zero).unwrap(),
            loss: build_extrapolated(&base, &pi, Tail::Zero).unwrap(),
            a: LinearMap::identity(n),
            mu,
            psi: ProxFriendly::L1,
            l: dct,
            b,
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(pi),
            lambda,
        })
        .unwrap();
        let (cert, exist) = p.certify(TOL_PSD).unwrap();
        assert!(cert.holds && cert.min_eig >= -1e-10);
        assert_eq!(exist, ExistenceCondition::III);
    }

    #[test]
    fn scalar_design_examples() {
        let id = LinearMap::identity(4);
        let d = design_b_scalar(0.5, 2.0, &DVector::from_element(4, 1.0), &id, &id).unwrap();
        assert_relative_eq!(d.c_star, 1.0, max_relative = 1e-12);
        assert!(!d.degenerate);
        let lam = DVector::from_column_slice(&[1.0, 0.0, 2.0, 1.0]);
        let d = design_b_scalar(0.5, 2.0, &lam, &id, &id).unwrap();
        assert_eq!(d.c_star, 0.0);
        assert!(d.degenerate && d.b.is_zero_map());
    }

    #[test]
    fn designers_certify_tv_instance() {
        let y = [12.0, 9.0, 15.0, 22.0, 30.0, 28.0, 31.0, 8.0, 7.0, 11.0];
        let p = poisson_problem(&y, 4.0);
        let (a, l) = (p.a().clone(), p.l().clone());
        let scalar = design_b_scalar(0.99, 4.0, p.lambda(), &a, &l).unwrap();
        let range = design_b_range(0.99, 4.0, p.lambda(), &a, &l).unwrap();
        for b in [scalar.b, range] {
            let q = p.with_b(b).unwrap();
            let cert = check_overall_convexity(&q, TOL_PSD).unwrap();
            assert!(cert.holds, "{cert:?}");
            assert!(cert.min_eig >= -1e-10);
        }
    }

    #[test]
    fn range_design_is_tight_and_handles_zero_weights() {
        let y = [12.0, 0.0, 15.0, 22.0, 30.0, 0.0, 31.0, 8.0];
        let p = poisson_problem(&y, 1.5);
        let b = design_b_range(0.99, 1.5, p.lambda(), p.a(), p.l()).unwrap();
        let q = p.with_b(b.clone()).unwrap();
        let cert = check_overall_convexity(&q, TOL_PSD).unwrap();
        assert!(cert.holds, "{cert:?}");
        // scaling past θ = 1 breaks the condition
        let loud = q.with_b(LinearMap::scaled(1.2, &b)).unwrap();
        assert!(!check_overall_convexity(&loud, TOL_PSD).unwrap().holds);
    }

    #[test]
    fn scaled_design_fails_when_tight() {
        let n = 16;
        let lam = DVector::from_element(n, 2.0);
        let dct = LinearMap::dct(n).unwrap();
        let b = design_b_inverse(0.99, 1.0, &lam, &LinearMap::identity(n), &dct).unwrap();
        let p = quadratic_problem(&vec![0.0; n], dct, ConstraintSet::Intervals(SimpleSet::whole(n)));
        let mut parts = p.parts().clone();
        parts.lambda = lam;
        let p = GmeProblem::new(parts).unwrap();
        assert!(check_overall_convexity(&p.with_b(b.clone()).unwrap(), TOL_PSD).unwrap().holds);
        let loud = p.with_b(LinearMap::scaled(1.2, &b)).unwrap();
        assert!(!check_overall_convexity(&loud, TOL_PSD).unwrap().holds);
    }

    #[test]
    fn existence_examples() {
        let mut p = poisson_problem(&[10.0, 14.0, 9.0], 1.0);
        assert_eq!(p.certify(TOL_PSD).unwrap().1, ExistenceCondition::IV);
        let n = 5;
        let q = quadratic_problem(
            &[1.0; 5],
            LinearMap::first_difference(n).unwrap(),
            ConstraintSet::Intervals(SimpleSet::whole(n)),
        );
        assert_eq!(check_existence(&q, Declared::from_loss(q.loss())).unwrap(), ExistenceCondition::II);
        let none = Declared { coercive: false, bounded_below: false };
        assert_eq!(check_existence(&q, none).unwrap(), ExistenceCondition::None);
    }

    #[test]
    fn objective_examples() {
        let y = [1.0, 3.0, 2.0];
        let q = quadratic_problem(
            &y,
            LinearMap::first_difference(3).unwrap(),
            ConstraintSet::Intervals(SimpleSet::whole(3)),
        );
        let x = DVector::from_column_slice(&[2.0, 2.0, 0.0]);
        let o = evaluate_objective(&q, &x, InnerOptions::default()).unwrap();
        assert_relative_eq!(o.fidelity, 0.5 * (1.0 + 1.0 + 4.0), max_relative = 1e-15);
        assert_relative_eq!(o.regularizer, 2.0, max_relative = 1e-15);
        assert_relative_eq!(o.total, 5.0, max_relative = 1e-15);
        assert!(o.feasible);

        let flat = quadratic_problem(&[2.0; 3], LinearMap::first_difference(3).unwrap(),
            ConstraintSet::Intervals(SimpleSet::whole(3)));
        let o = evaluate_objective(&flat, &DVector::from_element(3, 2.0), InnerOptions::default()).unwrap();
        assert_eq!(o.total, 0.0);
    }

    #[test]
    fn objective_matches_double_grid() {
        let p = poisson_problem(&[10.0, 14.0], 1.0);
        let d = design_b_scalar(0.99, 1.0, p.lambda(), p.a(), p.l()).unwrap();
        let p = p.with_b(d.b).unwrap();
        let b2 = 0.99 * d.c_star;
        let grid_penalty = |z: f64| {
            let (lo, hi) = (z.min(0.0), z.max(0.0));
            let steps = 100_000;
            let mut best = f64::INFINITY;
            for k in 0..=steps {
                let v = lo + (hi - lo) * k as f64 / steps as f64;
                best = best.min(v.abs() + 0.5 * b2 * (z - v) * (z - v));
            }
            z.abs() - best
        };
        for x in [[10.0, 14.0], [5.0, 40.0], [12.5, 11.0], [30.0, 6.0]] {
            let xv = DVector::from_column_slice(&x);
            let o = evaluate_objective(&p, &xv, InnerOptions::default()).unwrap();
            let fid: f64 = [10.0, 14.0].iter().zip(&x).map(|(y, t)| t - y * t.ln()).sum();
            let oracle = fid + grid_penalty(x[1] - x[0]);
            assert!((o.total - oracle).abs() < 1e-6, "{} vs {oracle}", o.total);
            assert!(o.regularizer >= 0.0);
        }
    }

    #[test]
    fn objective_convex_along_segments() {
        let y = [12.0, 9.0, 15.0, 22.0, 30.0, 28.0];
        let p = poisson_problem(&y, 2.0);
        let b = design_b_range(0.99, 2.0, p.lambda(), p.a(), p.l()).unwrap();
        let mut p = p.with_b(b).unwrap();
        assert!(p.certify(TOL_PSD).unwrap().0.holds);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let inner = InnerOptions { tol: 1e-12, max_iter: 1_000_000 };
        let j = |x: &DVector<f64>| evaluate_objective(&p, x, inner).unwrap().total;
        for _ in 0..100 {
            let x1 = DVector::from_fn(6, |_, _| rng.random_range(5.0..40.0));
            let x2 = DVector::from_fn(6, |_, _| rng.random_range(5.0..40.0));
            let lam: f64 = rng.random_range(0.0..1.0);
            let mid = &x1 * lam + &x2 * (1.0 - lam);
            assert!(j(&mid) <= lam * j(&x1) + (1.0 - lam) * j(&x2) + 1e-8);
        }
    }
}
