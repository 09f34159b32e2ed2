//! Prox-friendly convex functions, interval projections and the GME penalty.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linops::{operator_norm, Gram, LinearMap, NORM_MAX_ITER, NORM_TOL};

/// Product of closed intervals `[lo_i, hi_i]`, possibly unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SimpleSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "{} lower bounds but {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l == f64::INFINITY || h == f64::NEG_INFINITY || l > h {
                return Err(Error::Input(format!("invalid interval [{l}, {h}] at coordinate {i}")));
            }
        }
        Ok(SimpleSet { lo, hi })
    }

    /// All of `ℝ^n`.
    pub fn whole(n: usize) -> Self {
        SimpleSet { lo: vec![f64::NEG_INFINITY; n], hi: vec![f64::INFINITY; n] }
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        SimpleSet::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(u.len(), self.dim(), "projection dimension mismatch");
        DVector::from_fn(u.len(), |i, _| u[i].max(self.lo[i]).min(self.hi[i]))
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        u.len() == self.dim()
            && u.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] - tol && v <= self.hi[i] + tol)
    }
}

type ProjectionFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// The constraint set `Δ`: either a product of intervals or an arbitrary
/// closed convex set given through its projection.
#[derive(Clone)]
pub enum ConstraintSet {
    Intervals(SimpleSet),
    Custom { dim: usize, project: Arc<ProjectionFn> },
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSet::Intervals(s) => f.debug_tuple("Intervals").field(s).finish(),
            ConstraintSet::Custom { dim, .. } => write!(f, "Custom({dim})"),
        }
    }
}

impl ConstraintSet {
    pub fn custom<F>(dim: usize, project: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        ConstraintSet::Custom { dim, project: Arc::new(project) }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Intervals(s) => s.dim(),
            ConstraintSet::Custom { dim, .. } => *dim,
        }
    }

    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            ConstraintSet::Intervals(s) => s.project(u),
            ConstraintSet::Custom { project, .. } => project(u),
        }
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        match self {
            ConstraintSet::Intervals(s) => s.contains(u, tol),
            ConstraintSet::Custom { project, .. } => (project(u) - u).amax() <= tol,
        }
    }

    pub fn intervals(&self) -> Option<&SimpleSet> {
        match self {
            ConstraintSet::Intervals(s) => Some(s),
            ConstraintSet::Custom { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    L1,
    Box,
    ProductIntervals,
}

/// A convex function whose prox is available in closed form at every scale.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxFriendly {
    /// `‖·‖₁`
    L1,
    /// Indicator of a product of intervals.
    Indicator(SimpleSet),
}

impl ProxFriendly {
    pub fn kind(&self) -> ProxKind {
        match self {
            ProxFriendly::L1 => ProxKind::L1,
            ProxFriendly::Indicator(s) if s.is_bounded() => ProxKind::Box,
            ProxFriendly::Indicator(_) => ProxKind::ProductIntervals,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            ProxFriendly::L1 => x.lp_norm(1),
            ProxFriendly::Indicator(s) => {
                if s.contains(x, 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `Ψ*(q)`.
    pub fn conjugate_value(&self, q: &DVector<f64>) -> f64 {
        match self {
            ProxFriendly::L1 => {
                if q.amax() <= 1.0 + 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFriendly::Indicator(s) => q
                .iter()
                .enumerate()
                .map(|(i, &qi)| {
                    let (lo, hi) = s.interval(i);
                    if qi > 0.0 {
                        qi * hi
                    } else if qi < 0.0 {
                        qi * lo
                    } else {
                        0.0
                    }
                })
                .sum(),
        }
    }

    /// `min Ψ`, zero for both supported kinds.
    pub fn min_value(&self) -> f64 {
        0.0
    }

    /// `Prox_{γΨ}(x)`.
    pub fn prox(&self, x: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
        match self {
            ProxFriendly::L1 => prox_l1(x, gamma),
            ProxFriendly::Indicator(s) => {
                check_scale(gamma)?;
                Ok(s.project(x))
            }
        }
    }
}

fn check_scale(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("prox scale must be positive and finite, got {gamma}")))
    }
}

/// Soft thresholding.
pub fn prox_l1(x: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    check_scale(gamma)?;
    Ok(x.map(|v| v.signum() * (v.abs() - gamma).max(0.0)))
}

/// `Prox_{Ψ*}(x) = x - Prox_Ψ(x)` (Moreau decomposition at unit scale).
pub fn prox_conjugate(f: &ProxFriendly, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(x - f.prox(x, 1.0)?)
}

pub fn project_intervals(s: &SimpleSet, u: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != s.dim() {
        return Err(Error::Dimension(format!(
            "vector has length {}, set has dimension {}",
            u.len(),
            s.dim()
        )));
    }
    Ok(s.project(u))
}

#[derive(Debug, Clone, Copy)]
pub struct InnerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions { tol: 1e-10, max_iter: 100_000 }
    }
}

/// Value of the GME penalty `Ψ_B(z) = Ψ(z) - min_v [Ψ(v) + ½‖B(z - v)‖²]`.
///
/// The inner minimum is computed by accelerated proximal gradient on `v`
/// with step `1/‖B‖²`, restarted whenever the inner objective increases.
/// It stops once the step residual or the duality gap drops below `tol`.
/// On non-convergence the error carries the best penalty value seen.
pub fn gme_value(
    psi: &ProxFriendly,
    b: &LinearMap,
    z: &DVector<f64>,
    opts: InnerOptions,
) -> Result<f64> {
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!("inner tolerance must be positive, got {}", opts.tol)));
    }
    if z.len() != b.in_dim() {
        return Err(Error::Dimension(format!(
            "z has length {}, B expects {}",
            z.len(),
            b.in_dim()
        )));
    }
    let psi_z = psi.value(z);
    if !psi_z.is_finite() {
        return Ok(f64::INFINITY);
    }
    let lip = operator_norm(b, NORM_TOL, NORM_MAX_ITER)?.powi(2);
    if lip == 0.0 {
        return Ok((psi_z - psi.min_value()).max(0.0));
    }
    let gram = Gram::new(b)?;
    let gz = gram.apply(z);
    // returns ½‖B(v - z)‖² and B*B(v - z)
    let quad = |v: &DVector<f64>| {
        let d = v - z;
        let gd = gram.apply(&d);
        (0.5 * d.dot(&gd), d, gd)
    };
    let step = 1.0 / lip;

    let mut v = z.clone();
    let mut y = v.clone();
    let mut t = 1.0_f64;
    let mut restarted = true;
    let mut best = psi.value(&v);
    let mut current = best;
    for _ in 0..opts.max_iter {
        let grad = gram.apply(&(&y - z));
        let v_next = psi.prox(&(&y - grad * step), step)?;
        let residual = (&v_next - &y).norm();
        let (q, d, gd) = quad(&v_next);
        let val = psi.value(&v_next) + q;
        best = best.min(val);
        if residual < opts.tol || duality_gap(psi, &d, &gd, &gz, val) < opts.tol {
            return Ok((psi_z - best).max(0.0));
        }
        if val > current && !restarted {
            t = 1.0;
            y = v.clone();
            restarted = true;
            continue;
        }
        restarted = false;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &v_next + (&v_next - &v) * ((t - 1.0) / t_next);
        v = v_next;
        t = t_next;
        current = val;
    }
    Err(Error::NonConvergence {
        what: "GME inner minimization",
        iterations: opts.max_iter,
        last: (psi_z - best).max(0.0),
    })
}

/// Gap against the dual point `u = B(v - z)`, written through `d = v - z`,
/// `gd = B*Bd` and `gz = B*Bz`; for `ℓ₁` the point is scaled into the dual ball.
fn duality_gap(psi: &ProxFriendly, d: &DVector<f64>, gd: &DVector<f64>, gz: &DVector<f64>, primal: f64) -> f64 {
    let scale = match psi {
        ProxFriendly::L1 => gd.amax().max(1.0),
        ProxFriendly::Indicator(_) => 1.0,
    };
    let uu = d.dot(gd) / (scale * scale);
    let u_bz = d.dot(gz) / scale;
    let dual = -psi.conjugate_value(&(-gd / scale)) - 0.5 * uu - u_bz;
    primal - dual
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    /// Coordinatewise grid minimization of `γ|p| + ½(p - x)²`.
    fn grid_prox_l1(x: f64, gamma: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut p: f64 = -10.0;
        while p <= 10.0 {
            let obj = gamma * p.abs() + 0.5 * (p - x).powi(2);
            if obj < best.0 {
                best = (obj, p);
            }
            p += 1e-4;
        }
        best.1
    }

    /// Grid minimization of `ι_{[-1,1]}(p) + ½(p - x)²`, i.e. the conjugate prox of |·|.
    fn grid_prox_l1_conj(x: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut k = 0;
        loop {
            let p = -1.0 + k as f64 * 1e-4;
            if p > 1.0 + 1e-12 {
                break;
            }
            let obj = 0.5 * (p - x).powi(2);
            if obj < best.0 {
                best = (obj, p);
            }
            k += 1;
        }
        best.1
    }

    #[test]
    fn prox_l1_examples() {
        assert_eq!(prox_l1(&v(&[0.0, 0.0]), 0.7).unwrap(), v(&[0.0, 0.0]));
        let got = prox_l1(&v(&[3.0, -0.5]), 1.0).unwrap();
        assert_relative_eq!(got[0], grid_prox_l1(3.0, 1.0), epsilon = 1e-3);
        assert_relative_eq!(got[1], grid_prox_l1(-0.5, 1.0), epsilon = 1e-3);
        assert_eq!(got, v(&[2.0, 0.0]));
        let tiny = prox_l1(&v(&[1.5, -2.0]), 1e-12).unwrap();
        assert!((tiny - v(&[1.5, -2.0])).amax() <= 1e-11);
        assert!(matches!(prox_l1(&v(&[1.0]), 0.0), Err(Error::Parameter(_))));
        assert!(matches!(prox_l1(&v(&[1.0]), -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn conjugate_prox_examples() {
        let l1 = ProxFriendly::L1;
        let a = prox_conjugate(&l1, &v(&[3.0])).unwrap();
        assert_relative_eq!(a[0], grid_prox_l1_conj(3.0), epsilon = 1e-3);
        assert_eq!(a, v(&[1.0]));
        assert_eq!(prox_conjugate(&l1, &v(&[0.0])).unwrap(), v(&[0.0]));
        let b = prox_conjugate(&l1, &v(&[0.4, -5.0])).unwrap();
        assert_relative_eq!(b[0], grid_prox_l1_conj(0.4), epsilon = 1e-3);
        assert_relative_eq!(b[1], grid_prox_l1_conj(-5.0), epsilon = 1e-3);
        assert_relative_eq!(b[0], 0.4, epsilon = 1e-15);
        assert_eq!(b[1], -1.0);
    }

    #[test]
    fn moreau_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x = DVector::from_fn(5, |_, _| rng.random_range(-10.0..10.0));
            let sum = prox_l1(&x, 1.0).unwrap() + prox_conjugate(&ProxFriendly::L1, &x).unwrap();
            assert_eq!(sum, x);
        }
    }

    #[test]
    fn projection_examples() {
        let boxed = SimpleSet::uniform(2, 5.0, 40.0).unwrap();
        assert_eq!(project_intervals(&boxed, &v(&[7.0, 39.0])).unwrap(), v(&[7.0, 39.0]));
        assert_eq!(project_intervals(&boxed, &v(&[50.0, 0.0])).unwrap(), v(&[40.0, 5.0]));
        let (level, margin) = (0.4, 0.3);
        let one_sided = SimpleSet::new(vec![level - margin], vec![f64::INFINITY]).unwrap();
        let p = project_intervals(&one_sided, &v(&[level - margin - 1.0])).unwrap();
        assert_eq!(p[0], level - margin);
        assert!(matches!(SimpleSet::new(vec![1.0], vec![0.0]), Err(Error::Input(_))));
        assert!(matches!(
            project_intervals(&boxed, &v(&[1.0])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn indicator_prox_is_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = SimpleSet::new(vec![-1.0, 0.0, f64::NEG_INFINITY], vec![1.0, 3.0, 2.0]).unwrap();
        let ind = ProxFriendly::Indicator(set.clone());
        assert_eq!(ind.kind(), ProxKind::ProductIntervals);
        for _ in 0..1000 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let gamma = rng.random_range(0.01..10.0);
            assert_eq!(ind.prox(&x, gamma).unwrap(), set.project(&x));
        }
    }

    #[test]
    fn prox_optimality_against_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let funcs = [ProxFriendly::L1, ProxFriendly::Indicator(SimpleSet::uniform(4, -1.0, 2.0).unwrap())];
        for f in &funcs {
            for _ in 0..20 {
                let x = DVector::from_fn(4, |_, _| rng.random_range(-4.0..4.0));
                let gamma = rng.random_range(0.05..3.0);
                let p = f.prox(&x, gamma).unwrap();
                let obj = |q: &DVector<f64>| f.value(q) + 0.5 * (q - &x).norm_squared() / gamma;
                let base = obj(&p);
                for _ in 0..100 {
                    let q = &p + DVector::from_fn(4, |_, _| rng.random_range(-0.5..0.5));
                    assert!(base <= obj(&q) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn gme_zero_b_reproduces_l1() {
        let z = v(&[1.0, -2.5, 0.0]);
        let val = gme_value(&ProxFriendly::L1, &LinearMap::zero(2, 3), &z, InnerOptions::default())
            .unwrap();
        assert_eq!(val, 3.5);
    }

    #[test]
    fn gme_scalar_examples() {
        let one = LinearMap::identity(1);
        let at_zero = gme_value(&ProxFriendly::L1, &one, &v(&[0.0]), InnerOptions::default())
            .unwrap();
        assert_eq!(at_zero, 0.0);

        // grid oracle: min over v ∈ [-10, 10], step 1e-4
        let z = 3.0;
        let mut best = f64::INFINITY;
        for k in 0..=200_000 {
            let vv = -10.0 + k as f64 * 1e-4;
            best = best.min(vv.abs() + 0.5 * (z - vv).powi(2));
        }
        let oracle = z.abs() - best;
        let got = gme_value(&ProxFriendly::L1, &one, &v(&[z]), InnerOptions::default()).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn gme_nonnegative_and_below_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = LinearMap::dense(DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap();
        for _ in 0..50 {
            let z = DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0));
            let g = gme_value(&ProxFriendly::L1, &b, &z, InnerOptions { tol: 1e-9, max_iter: 200_000 })
                .unwrap();
            assert!(g >= 0.0);
            assert!(g <= z.lp_norm(1) + 1e-12);
        }
    }

    #[test]
    fn gme_reports_inner_non_convergence() {
        let b = LinearMap::dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.999, 0.999, 1.0])).unwrap();
        let z = v(&[3.0, -1.0]);
        match gme_value(&ProxFriendly::L1, &b, &z, InnerOptions { tol: 1e-14, max_iter: 2 }) {
            Err(Error::NonConvergence { last, .. }) => assert!(last >= 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn prox_l1_firmly_nonexpansive(
            x in proptest::collection::vec(-20.0f64..20.0, 6),
            y in proptest::collection::vec(-20.0f64..20.0, 6),
            gamma in 0.01f64..5.0,
        ) {
            let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
            let (px, py) = (prox_l1(&x, gamma).unwrap(), prox_l1(&y, gamma).unwrap());
            let d = &px - &py;
            prop_assert!(d.norm_squared() <= (&x - &y).dot(&d) + 1e-12);
        }

        #[test]
        fn projection_idempotent_and_nonexpansive(
            u in proptest::collection::vec(-50.0f64..50.0, 5),
            w in proptest::collection::vec(-50.0f64..50.0, 5),
        ) {
            let set = SimpleSet::new(
                vec![-1.0, 5.0, f64::NEG_INFINITY, 0.0, -3.0],
                vec![1.0, 40.0, 0.0, f64::INFINITY, -3.0],
            ).unwrap();
            let (u, w) = (DVector::from_vec(u), DVector::from_vec(w));
            let pu = set.project(&u);
            prop_assert_eq!(set.project(&pu), pu.clone());
            prop_assert!(set.contains(&pu, 0.0));
            prop_assert!((&pu - set.project(&w)).norm() <= (&u - &w).norm() + 1e-12);
        }
    }
}
