//! Quadratic extrapolation of separable losses outside an interval box.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::losses::{curvature_bounds, CoordLoss, Growth, LossKind, SmoothLoss};
use crate::proxfns::SimpleSet;

/// Convex tail `r` added to the Taylor branches as a function of the
/// distance to the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tail {
    #[default]
    Zero,
    CubicQuadratic,
}

impl Tail {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Tail::Zero => 0.0,
            Tail::CubicQuadratic => {
                if t <= 0.0 {
                    0.0
                } else if t < 1.0 {
                    t * t * t / 6.0
                } else {
                    t * t / 2.0 - t / 2.0 + 1.0 / 6.0
                }
            }
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Tail::Zero => 0.0,
            Tail::CubicQuadratic => {
                if t <= 0.0 {
                    0.0
                } else if t < 1.0 {
                    t * t / 2.0
                } else {
                    t - 0.5
                }
            }
        }
    }

    pub fn second(self, t: f64) -> f64 {
        match self {
            Tail::Zero => 0.0,
            Tail::CubicQuadratic => t.clamp(0.0, 1.0),
        }
    }

    pub fn sup_second(self) -> f64 {
        match self {
            Tail::Zero => 0.0,
            Tail::CubicQuadratic => 1.0,
        }
    }
}

/// Endpoint data `(e, f(e), f′(e), f″(e))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub at: f64,
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

impl Anchor {
    fn taylor(&self, t: f64) -> f64 {
        let d = t - self.at;
        0.5 * self.curvature * d * d + self.slope * d + self.value
    }

    fn taylor_derivative(&self, t: f64) -> f64 {
        self.curvature * (t - self.at) + self.slope
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub(crate) base_kind: LossKind,
    pub interval: SimpleSet,
    pub lower: Vec<Option<Anchor>>,
    pub upper: Vec<Option<Anchor>>,
    pub tail: Tail,
}

impl Extension {
    pub(crate) fn value(&self, f: &CoordLoss, i: usize, t: f64) -> f64 {
        if let Some(a) = &self.lower[i] {
            if t <= a.at {
                return a.taylor(t) + self.tail.value(a.at - t);
            }
        }
        if let Some(a) = &self.upper[i] {
            if t >= a.at {
                return a.taylor(t) + self.tail.value(t - a.at);
            }
        }
        f.value(t)
    }

    pub(crate) fn derivative(&self, f: &CoordLoss, i: usize, t: f64) -> Result<f64> {
        if let Some(a) = &self.lower[i] {
            if t <= a.at {
                return Ok(a.taylor_derivative(t) - self.tail.derivative(a.at - t));
            }
        }
        if let Some(a) = &self.upper[i] {
            if t >= a.at {
                return Ok(a.taylor_derivative(t) + self.tail.derivative(t - a.at));
            }
        }
        f.derivative(t)
    }

    pub(crate) fn second(&self, f: &CoordLoss, i: usize, t: f64) -> Result<f64> {
        if let Some(a) = &self.lower[i] {
            if t <= a.at {
                return Ok(a.curvature + self.tail.second(a.at - t));
            }
        }
        if let Some(a) = &self.upper[i] {
            if t >= a.at {
                return Ok(a.curvature + self.tail.second(t - a.at));
            }
        }
        f.second(t)
    }

    pub(crate) fn growth(&self, f: &CoordLoss, i: usize) -> (Growth, Growth) {
        let (mut lo, mut hi) = f.growth();
        let side = |a: &Anchor, outward: f64| {
            if self.tail == Tail::CubicQuadratic || a.curvature > 0.0 || a.slope * outward > 0.0 {
                Growth::Coercive
            } else if a.slope == 0.0 {
                Growth::BoundedBelow
            } else {
                Growth::Unbounded
            }
        };
        if let Some(a) = &self.lower[i] {
            lo = side(a, -1.0);
        }
        if let Some(a) = &self.upper[i] {
            hi = side(a, 1.0);
        }
        (lo, hi)
    }

    /// Bounds of `f̃_i″` over `[l, h]`, splitting at the anchors.
    pub(crate) fn curvature_on(&self, f: &CoordLoss, i: usize, l: f64, h: f64) -> Result<(f64, f64)> {
        let (el, eh) = self.interval.interval(i);
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        let mut merge = |(a, b): (f64, f64)| {
            inf = inf.min(a);
            sup = sup.max(b);
        };
        // the tail curvature is nondecreasing in the distance
        if let Some(a) = &self.lower[i] {
            if l <= a.at {
                let near = a.at - h.min(a.at);
                let far = a.at - l;
                merge((a.curvature + self.tail.second(near), a.curvature + self.tail.second(far)));
            }
        }
        if let Some(a) = &self.upper[i] {
            if h >= a.at {
                let near = l.max(a.at) - a.at;
                let far = h - a.at;
                merge((a.curvature + self.tail.second(near), a.curvature + self.tail.second(far)));
            }
        }
        let (ml, mh) = (l.max(el), h.min(eh));
        if ml <= mh {
            merge(f.curvature_on(ml, mh)?);
        }
        Ok((inf, sup))
    }
}

/// Replace each `f_i` outside `Π_i` by its endpoint Taylor polynomial plus
/// the tail of the distance to the endpoint.
pub fn build_extrapolated(loss: &SmoothLoss, pi: &SimpleSet, tail: Tail) -> Result<SmoothLoss> {
    if loss.extension().is_some() {
        return Err(Error::Construction("loss is already extrapolated".into()));
    }
    if pi.dim() != loss.dim() {
        return Err(Error::Dimension(format!(
            "loss has dimension {}, interval set has dimension {}",
            loss.dim(),
            pi.dim()
        )));
    }
    let anchor = |f: &CoordLoss, at: f64| -> Result<Anchor> {
        let value = f.value(at);
        let slope = f.derivative(at);
        let curvature = f.second(at);
        match (slope, curvature) {
            (Ok(slope), Ok(curvature)) if value.is_finite() => {
                Ok(Anchor { at, value, slope, curvature })
            }
            (Err(e), _) | (_, Err(e)) => {
                Err(Error::Construction(format!("endpoint {at} unusable: {e}")))
            }
            _ => Err(Error::Construction(format!("loss is infinite at endpoint {at}"))),
        }
    };
    let mut lower = Vec::with_capacity(loss.dim());
    let mut upper = Vec::with_capacity(loss.dim());
    for i in 0..loss.dim() {
        let (l, h) = pi.interval(i);
        if l == h {
            return Err(Error::Construction(format!("interval {i} is the single point {l}")));
        }
        let f = loss.coord(i);
        lower.push(if l.is_finite() { Some(anchor(f, l)?) } else { None });
        upper.push(if h.is_finite() { Some(anchor(f, h)?) } else { None });
    }
    Ok(loss.with_extension(Extension {
        base_kind: loss.kind(),
        interval: pi.clone(),
        lower,
        upper,
        tail,
    }))
}

/// Lipschitz constant of the gradient of the extrapolated loss.
pub fn extrapolated_lipschitz(loss: &SmoothLoss, pi: &SimpleSet, tail: Tail) -> Result<f64> {
    let cb = curvature_bounds(loss, pi)?;
    if let Some(i) = cb.sup_hess.iter().position(|v| !v.is_finite()) {
        return Err(Error::UnboundedCurvature(i));
    }
    Ok(cb.max_sup() + tail.sup_second())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityWeights {
    /// Diagonal of `Λ`.
    pub lambda: DVector<f64>,
    /// False when every weight vanishes.
    pub nonzero: bool,
}

pub fn relative_strong_convexity_weights(loss: &SmoothLoss, pi: &SimpleSet) -> Result<ConvexityWeights> {
    let lambda = curvature_bounds(loss, pi)?.lambda();
    let nonzero = lambda.iter().any(|&v| v > 0.0);
    if !nonzero {
        log::warn!("all curvature weights vanish; the penalty degenerates to its convex part");
    }
    Ok(ConvexityWeights { lambda, nonzero })
}
