//! Separable smooth convex data-fidelity terms.
//!
//! Clipped coordinates drop the constant `log(s√(2π))` from their values, so
//! objective values of clipped losses are only comparable with each other.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::extrapolate::Extension;
use crate::proxfns::SimpleSet;
use crate::special::{inv_mills, inv_mills_slope, log_norm_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Quadratic,
    Poisson,
    ClippedGaussian,
    Extrapolated,
}

/// One coordinate `f_i` of a separable loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordLoss {
    /// `½·weight·(t - y)²`
    Quadratic { y: f64, weight: f64 },
    /// `t - y log t` on `t > 0`.
    PoissonCount { y: f64 },
    /// `t` on `t ≥ 0`.
    PoissonZero,
    /// Observation saturated at `+level`: `-log Pr((t - level)/scale)`.
    ClipUpper { level: f64, scale: f64 },
    /// Observation saturated at `-level`: `-log Pr((-level - t)/scale)`.
    ClipLower { level: f64, scale: f64 },
}

/// Behaviour of a coordinate loss as `t` runs off to one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Growth {
    Unbounded,
    BoundedBelow,
    Coercive,
}

impl CoordLoss {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            CoordLoss::Quadratic { y, weight } => 0.5 * weight * (t - y) * (t - y),
            CoordLoss::PoissonCount { y } => {
                if t > 0.0 {
                    t - y * t.ln()
                } else {
                    f64::INFINITY
                }
            }
            CoordLoss::PoissonZero => {
                if t >= 0.0 {
                    t
                } else {
                    f64::INFINITY
                }
            }
            CoordLoss::ClipUpper { level, scale } => -log_norm_cdf((t - level) / scale),
            CoordLoss::ClipLower { level, scale } => -log_norm_cdf((-level - t) / scale),
        }
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        match *self {
            CoordLoss::Quadratic { y, weight } => Ok(weight * (t - y)),
            CoordLoss::PoissonCount { y } => {
                if t > 0.0 {
                    Ok(1.0 - y / t)
                } else {
                    Err(Error::Domain(format!("Poisson derivative requested at t = {t}")))
                }
            }
            CoordLoss::PoissonZero => {
                if t >= 0.0 {
                    Ok(1.0)
                } else {
                    Err(Error::Domain(format!("Poisson derivative requested at t = {t}")))
                }
            }
            CoordLoss::ClipUpper { level, scale } => Ok(-gaussian_hazard(t - level, scale)),
            CoordLoss::ClipLower { level, scale } => Ok(gaussian_hazard(-level - t, scale)),
        }
    }

    pub fn second(&self, t: f64) -> Result<f64> {
        match *self {
            CoordLoss::Quadratic { weight, .. } => Ok(weight),
            CoordLoss::PoissonCount { y } => {
                if t > 0.0 {
                    Ok(y / (t * t))
                } else {
                    Err(Error::Domain(format!("Poisson curvature requested at t = {t}")))
                }
            }
            CoordLoss::PoissonZero => {
                if t >= 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Domain(format!("Poisson curvature requested at t = {t}")))
                }
            }
            CoordLoss::ClipUpper { level, scale } => Ok(clip_curvature(t - level, scale)),
            CoordLoss::ClipLower { level, scale } => Ok(clip_curvature(-level - t, scale)),
        }
    }

    /// Infimum and supremum of `f_i″` over `[l, h]`.
    pub fn curvature_on(&self, l: f64, h: f64) -> Result<(f64, f64)> {
        match *self {
            CoordLoss::Quadratic { weight, .. } => Ok((weight, weight)),
            CoordLoss::PoissonCount { y } => {
                if !(l > 0.0) {
                    return Err(Error::Domain(format!(
                        "interval [{l}, {h}] leaves the Poisson domain"
                    )));
                }
                let inf = if h.is_finite() { y / (h * h) } else { 0.0 };
                Ok((inf, y / (l * l)))
            }
            CoordLoss::PoissonZero => {
                if l < 0.0 {
                    return Err(Error::Domain(format!(
                        "interval [{l}, {h}] leaves the Poisson domain"
                    )));
                }
                Ok((0.0, 0.0))
            }
            // curvature decreases in t
            CoordLoss::ClipUpper { level, scale } => {
                let inf = if h.is_finite() { clip_curvature(h - level, scale) } else { 0.0 };
                let sup = if l.is_finite() {
                    clip_curvature(l - level, scale)
                } else {
                    1.0 / (scale * scale)
                };
                Ok((inf, sup))
            }
            CoordLoss::ClipLower { level, scale } => {
                let inf = if l.is_finite() { clip_curvature(-level - l, scale) } else { 0.0 };
                let sup = if h.is_finite() {
                    clip_curvature(-level - h, scale)
                } else {
                    1.0 / (scale * scale)
                };
                Ok((inf, sup))
            }
        }
    }

    /// `(t → -∞, t → +∞)` growth.
    pub fn growth(&self) -> (Growth, Growth) {
        match self {
            CoordLoss::Quadratic { .. } | CoordLoss::PoissonCount { .. } | CoordLoss::PoissonZero => {
                (Growth::Coercive, Growth::Coercive)
            }
            CoordLoss::ClipUpper { .. } => (Growth::Coercive, Growth::BoundedBelow),
            CoordLoss::ClipLower { .. } => (Growth::BoundedBelow, Growth::Coercive),
        }
    }
}

/// `p(t)/Pr(t)` for the `N(0, s²)` density `p` and its CDF `Pr`.
pub fn gaussian_hazard(t: f64, s: f64) -> f64 {
    assert!(s > 0.0, "noise scale must be positive");
    inv_mills(t / s) / s
}

/// `(-p/Pr)′(u)`.
fn clip_curvature(u: f64, s: f64) -> f64 {
    inv_mills_slope(u / s) / (s * s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Partitions {
    Poisson { positive: Vec<usize>, zero: Vec<usize> },
    Clipped { unclipped: Vec<usize>, upper: Vec<usize>, lower: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct SmoothLoss {
    kind: LossKind,
    coords: Arc<Vec<CoordLoss>>,
    y: DVector<f64>,
    noise_scale: Option<f64>,
    clip_level: Option<f64>,
    partitions: Option<Partitions>,
    ext: Option<Arc<Extension>>,
}

impl SmoothLoss {
    pub(crate) fn with_extension(&self, ext: Extension) -> SmoothLoss {
        SmoothLoss {
            kind: LossKind::Extrapolated,
            ext: Some(Arc::new(ext)),
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Kind of the loss before any extrapolation.
    pub fn base_kind(&self) -> LossKind {
        self.ext.as_ref().map_or(self.kind, |e| e.base_kind)
    }

    pub fn coord(&self, i: usize) -> &CoordLoss {
        &self.coords[i]
    }

    pub fn observation(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn noise_scale(&self) -> Option<f64> {
        self.noise_scale
    }

    pub fn clip_level(&self) -> Option<f64> {
        self.clip_level
    }

    pub fn partitions(&self) -> Option<&Partitions> {
        self.partitions.as_ref()
    }

    pub fn extension(&self) -> Option<&Extension> {
        self.ext.as_deref()
    }

    pub fn coord_value(&self, i: usize, t: f64) -> f64 {
        match &self.ext {
            Some(e) => e.value(&self.coords[i], i, t),
            None => self.coords[i].value(t),
        }
    }

    pub fn coord_derivative(&self, i: usize, t: f64) -> Result<f64> {
        match &self.ext {
            Some(e) => e.derivative(&self.coords[i], i, t),
            None => self.coords[i].derivative(t),
        }
    }

    pub fn coord_second(&self, i: usize, t: f64) -> Result<f64> {
        match &self.ext {
            Some(e) => e.second(&self.coords[i], i, t),
            None => self.coords[i].second(t),
        }
    }

    pub fn value(&self, u: &DVector<f64>) -> Result<f64> {
        self.check_len(u)?;
        Ok(u.iter().enumerate().map(|(i, &t)| self.coord_value(i, t)).sum())
    }

    pub fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(u)?;
        let mut g = DVector::zeros(u.len());
        for (i, &t) in u.iter().enumerate() {
            g[i] = self.coord_derivative(i, t)?;
        }
        Ok(g)
    }

    fn check_len(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "loss has dimension {}, argument has length {}",
                self.dim(),
                u.len()
            )))
        }
    }

    pub fn coord_growth(&self, i: usize) -> (Growth, Growth) {
        match &self.ext {
            Some(e) => e.growth(&self.coords[i], i),
            None => self.coords[i].growth(),
        }
    }

    pub fn is_coercive(&self) -> bool {
        (0..self.dim()).all(|i| {
            let (lo, hi) = self.coord_growth(i);
            lo == Growth::Coercive && hi == Growth::Coercive
        })
    }

    pub fn is_bounded_below(&self) -> bool {
        (0..self.dim()).all(|i| {
            let (lo, hi) = self.coord_growth(i);
            lo != Growth::Unbounded && hi != Growth::Unbounded
        })
    }
}

pub fn quadratic_loss(y: &DVector<f64>) -> Result<SmoothLoss> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("observation {i} is not finite")));
    }
    Ok(SmoothLoss {
        kind: LossKind::Quadratic,
        coords: Arc::new(y.iter().map(|&y| CoordLoss::Quadratic { y, weight: 1.0 }).collect()),
        y: y.clone(),
        noise_scale: None,
        clip_level: None,
        partitions: None,
        ext: None,
    })
}

pub fn poisson_loss(y: &DVector<f64>) -> Result<SmoothLoss> {
    let mut coords = Vec::with_capacity(y.len());
    let (mut positive, mut zero) = (Vec::new(), Vec::new());
    for (i, &v) in y.iter().enumerate() {
        if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0) {
            return Err(Error::Input(format!("count {i} is {v}, expected a nonnegative integer")));
        }
        if v > 0.0 {
            positive.push(i);
            coords.push(CoordLoss::PoissonCount { y: v });
        } else {
            zero.push(i);
            coords.push(CoordLoss::PoissonZero);
        }
    }
    Ok(SmoothLoss {
        kind: LossKind::Poisson,
        coords: Arc::new(coords),
        y: y.clone(),
        noise_scale: None,
        clip_level: None,
        partitions: Some(Partitions::Poisson { positive, zero }),
        ext: None,
    })
}

pub fn clipped_loss(y: &DVector<f64>, level: f64, scale: f64) -> Result<SmoothLoss> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::Parameter(format!("clip level must be positive, got {level}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!("noise scale must be positive, got {scale}")));
    }
    let mut coords = Vec::with_capacity(y.len());
    let (mut unclipped, mut upper, mut lower) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &v) in y.iter().enumerate() {
        if !(v.abs() <= level) {
            return Err(Error::Input(format!("observation {i} = {v} exceeds clip level {level}")));
        }
        if v == level {
            upper.push(i);
            coords.push(CoordLoss::ClipUpper { level, scale });
        } else if v == -level {
            lower.push(i);
            coords.push(CoordLoss::ClipLower { level, scale });
        } else {
            unclipped.push(i);
            coords.push(CoordLoss::Quadratic { y: v, weight: 1.0 / (scale * scale) });
        }
    }
    Ok(SmoothLoss {
        kind: LossKind::ClippedGaussian,
        coords: Arc::new(coords),
        y: y.clone(),
        noise_scale: Some(scale),
        clip_level: Some(level),
        partitions: Some(Partitions::Clipped { unclipped, upper, lower }),
        ext: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBounds {
    pub interval: SimpleSet,
    pub inf_hess: Vec<f64>,
    pub sup_hess: Vec<f64>,
}

impl CurvatureBounds {
    /// Diagonal of `Λ`.
    pub fn lambda(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.inf_hess)
    }

    pub fn max_sup(&self) -> f64 {
        self.sup_hess.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-coordinate infimum and supremum of `f_i″` over `Π_i`.
pub fn curvature_bounds(loss: &SmoothLoss, pi: &SimpleSet) -> Result<CurvatureBounds> {
    if pi.dim() != loss.dim() {
        return Err(Error::Dimension(format!(
            "loss has dimension {}, interval set has dimension {}",
            loss.dim(),
            pi.dim()
        )));
    }
    let mut inf_hess = Vec::with_capacity(loss.dim());
    let mut sup_hess = Vec::with_capacity(loss.dim());
    for i in 0..loss.dim() {
        let (l, h) = pi.interval(i);
        let (a, b) = match &loss.ext {
            Some(e) => e.curvature_on(&loss.coords[i], i, l, h)?,
            None => loss.coords[i].curvature_on(l, h)?,
        };
        inf_hess.push(a);
        sup_hess.push(b);
    }
    Ok(CurvatureBounds { interval: pi.clone(), inf_hess, sup_hess })
}
