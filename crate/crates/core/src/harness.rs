//! Seeded Poisson-denoising and declipping experiments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extrapolate::{build_extrapolated, extrapolated_lipschitz, relative_strong_convexity_weights, Tail};
use crate::gme_model::{
    design_b_inverse, design_b_range, design_b_scalar, evaluate_objective, GmeParts, GmeProblem,
    TOL_PSD,
};
use crate::linops::LinearMap;
use crate::losses::{clipped_loss, poisson_loss, Partitions};
use crate::proxfns::{ConstraintSet, InnerOptions, ProxFriendly, SimpleSet};
use crate::solver::{default_params, solve, SolveOptions, SolverState};

const JUMPS: [f64; 5] = [0.15, 0.3, 0.5, 0.7, 0.85];
const MIN_STEP: f64 = 4.0;
const TV_THRESHOLD: f64 = 1e-4;
const INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Poisson,
    Declip,
}

/// How the GME matrix of the Poisson experiment is designed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Designer {
    Scalar,
    Range,
}

impl FromStr for Designer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(Designer::Scalar),
            "range" => Ok(Designer::Range),
            _ => Err(Error::Input(format!("unknown designer '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub mu: Vec<f64>,
    pub theta: f64,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub objective: bool,
    // poisson
    pub lower: f64,
    pub upper: f64,
    pub designer: Designer,
    // declip
    pub clip_levels: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub margin_factor: f64,
    pub sparsity: usize,
}

impl ScenarioConfig {
    pub fn poisson() -> Self {
        ScenarioConfig {
            scenario: Scenario::Poisson,
            n: 150,
            mu: vec![0.4, 0.5, 0.6, 0.8, 1.0, 1.25, 1.5],
            theta: 0.99,
            trials: 100,
            seed: 0,
            tol: 1e-6,
            max_iter: 1_000_000,
            objective: true,
            lower: 5.0,
            upper: 40.0,
            designer: Designer::Range,
            clip_levels: vec![0.4, 0.6],
            snr_db: vec![5.0, 10.0, 15.0],
            margin_factor: 10.0,
            sparsity: 16,
        }
    }

    pub fn declip() -> Self {
        ScenarioConfig {
            scenario: Scenario::Declip,
            n: 256,
            mu: vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 40.0, 48.0, 64.0, 80.0, 100.0],
            trials: 50,
            tol: 1e-4,
            ..ScenarioConfig::poisson()
        }
    }

    pub fn default_for(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Poisson => ScenarioConfig::poisson(),
            Scenario::Declip => ScenarioConfig::declip(),
        }
    }

    /// Parse `key = value` lines over the defaults of the named scenario.
    /// Blank lines and `#` comments are skipped; unknown keys are errors.
    pub fn parse(text: &str, fallback: Scenario) -> Result<Self> {
        let mut entries = Vec::new();
        let mut scenario = fallback;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected key = value, got '{body}'") })?;
            let (k, v) = (k.trim(), v.trim());
            if k == "scenario" {
                scenario = match v {
                    "poisson" => Scenario::Poisson,
                    "declip" => Scenario::Declip,
                    _ => return Err(Error::Parse { line, msg: format!("unknown scenario '{v}'") }),
                };
            } else {
                entries.push((line, k.to_string(), v.to_string()));
            }
        }
        let mut cfg = ScenarioConfig::default_for(scenario);
        for (line, k, v) in entries {
            cfg.set(&k, &v).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Input(format!("bad value '{v}' for {key}")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>> {
            v.split(',').map(|s| num(key, s.trim())).collect()
        }
        match key {
            "n" => self.n = num(key, value)?,
            "mu" => self.mu = list(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "objective" => self.objective = num(key, value)?,
            "lower" => self.lower = num(key, value)?,
            "upper" => self.upper = num(key, value)?,
            "designer" => self.designer = value.parse()?,
            "clip_levels" => self.clip_levels = list(key, value)?,
            "snr_db" => self.snr_db = list(key, value)?,
            "margin_factor" => self.margin_factor = num(key, value)?,
            "sparsity" => self.sparsity = num(key, value)?,
            _ => return Err(Error::Input(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Input(m.to_string()));
        if self.mu.is_empty() || self.mu.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("mu must be a non-empty list of positive numbers");
        }
        if !(0.0..1.0).contains(&self.theta) {
            return bad("theta must lie in [0, 1)");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return bad("tol and max_iter must be positive");
        }
        match self.scenario {
            Scenario::Poisson => {
                if self.n < 12 {
                    return bad("n must be at least 12");
                }
                if !(self.lower > 0.0 && self.lower < self.upper && self.upper.is_finite()) {
                    return bad("need 0 < lower < upper < ∞");
                }
            }
            Scenario::Declip => {
                if self.clip_levels.is_empty() || self.snr_db.is_empty() {
                    return bad("clip_levels and snr_db must be non-empty");
                }
                if self.clip_levels.iter().any(|&c| !(c > 0.0)) {
                    return bad("clip levels must be positive");
                }
                if !(self.margin_factor >= 0.0) {
                    return bad("margin_factor must be nonnegative");
                }
                if self.sparsity == 0 || self.sparsity > self.n {
                    return bad("sparsity must lie in 1..=n");
                }
            }
        }
        Ok(())
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Six-segment piecewise-constant signal with exactly five jumps.
pub fn gen_piecewise_constant(n: usize, seed: u64) -> Result<DVector<f64>> {
    if n < 12 {
        return Err(Error::Input(format!("need n ≥ 12, got {n}")));
    }
    let mut rng = rng_for(seed, 0);
    let mut bounds: Vec<usize> = JUMPS.iter().map(|f| (f * n as f64).round() as usize).collect();
    bounds.push(n);
    let mut x = DVector::zeros(n);
    let mut start = 0;
    let mut prev = f64::NAN;
    for end in bounds {
        let level = loop {
            let v: f64 = rng.random_range(5.0..=40.0);
            let v = v.clamp(8.0, 38.0);
            if prev.is_nan() || (v - prev).abs() >= MIN_STEP {
                break v;
            }
        };
        x.rows_mut(start, end - start).fill(level);
        prev = level;
        start = end;
    }
    Ok(x)
}

fn poisson_draw(mean: f64, rng: &mut ChaCha8Rng) -> f64 {
    if mean <= INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k as f64
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng)
    }
}

/// Independent Poisson counts with the given means.
pub fn sample_poisson(x: &DVector<f64>, seed: u64) -> Result<DVector<f64>> {
    if let Some(i) = x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Input(format!("mean {i} is {}", x[i])));
    }
    let mut rng = rng_for(seed, 1);
    Ok(x.map(|m| poisson_draw(m, &mut rng)))
}

/// Inverse DCT of a `k`-sparse Gaussian coefficient vector, scaled to
/// `max |x_i| = 0.8`.
pub fn gen_dct_sparse(n: usize, k: usize, seed: u64) -> Result<DVector<f64>> {
    if k == 0 || k > n {
        return Err(Error::Input(format!("sparsity {k} outside 1..={n}")));
    }
    let mut rng = rng_for(seed, 2);
    let mut coef = DVector::zeros(n);
    for i in sample(&mut rng, n, k).into_iter() {
        let mut g: f64 = StandardNormal.sample(&mut rng);
        while g == 0.0 {
            g = StandardNormal.sample(&mut rng);
        }
        coef[i] = g;
    }
    let x = LinearMap::dct(n)?.apply_adjoint(&coef);
    Ok(&x * (0.8 / x.amax()))
}

/// `E‖ε‖ / s` for `ε ~ N(0, s²I_m)`.
pub fn chi_mean(m: usize) -> f64 {
    let m = m as f64;
    2f64.sqrt() * (libm::lgamma((m + 1.0) / 2.0) - libm::lgamma(m / 2.0)).exp()
}

/// Noise scale giving `20 log₁₀(‖x‖ / E‖ε‖) = snr_db`.
pub fn noise_scale_for_snr(x: &DVector<f64>, snr_db: f64) -> f64 {
    x.norm() / (10f64.powf(snr_db / 20.0) * chi_mean(x.len()))
}

/// `clip_ϑ(x + ε)` with `ε ~ N(0, s²I)`.
pub fn clip_observe(x: &DVector<f64>, level: f64, s: f64, seed: u64) -> Result<DVector<f64>> {
    if !(level > 0.0) || !(s >= 0.0) {
        return Err(Error::Parameter(format!("need ϑ > 0 and s ≥ 0, got ({level}, {s})")));
    }
    let mut rng = rng_for(seed, 3);
    Ok(x.map(|v| {
        let e: f64 = StandardNormal.sample(&mut rng);
        let u = v + s * e;
        if u.abs() >= level {
            level * u.signum()
        } else {
            u
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Model {
    Convex,
    Proposed,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Convex => "convex",
            Model::Proposed => "proposed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub model: Model,
    pub theta: f64,
    pub mu: f64,
    pub trial: usize,
    /// `ok`, or the failure message.
    pub status: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual_h: f64,
    pub objective: f64,
    pub ae: f64,
    pub se: f64,
    pub tv_nonzero: usize,
    pub mse: f64,
    pub clip_level: f64,
    pub snr_db: f64,
    pub noise_scale: f64,
}

impl TrialResult {
    fn failed(model: Model, theta: f64, mu: f64, trial: usize, e: &Error) -> Self {
        TrialResult {
            model,
            theta,
            mu,
            trial,
            status: e.to_string().replace([',', '\n'], ";"),
            converged: false,
            iterations: 0,
            residual_h: f64::NAN,
            objective: f64::NAN,
            ae: f64::NAN,
            se: f64::NAN,
            tv_nonzero: 0,
            mse: f64::NAN,
            clip_level: f64::NAN,
            snr_db: f64::NAN,
            noise_scale: f64::NAN,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

struct Outcome {
    x: DVector<f64>,
    converged: bool,
    iterations: usize,
    residual_h: f64,
    objective: f64,
}

fn run_model(mut problem: GmeProblem, cfg: &ScenarioConfig) -> Result<Outcome> {
    let (conv, _) = problem.certify(TOL_PSD)?;
    if !conv.holds {
        return Err(Error::Designer(format!("convexity certificate failed (min eig {:e})", conv.min_eig)));
    }
    let params = default_params(&problem)?.with_tol(cfg.tol).with_max_iter(cfg.max_iter);
    let res = solve(&problem, &params, SolverState::initial(&problem), SolveOptions::default())?;
    let objective = if cfg.objective {
        evaluate_objective(&problem, &res.x, InnerOptions::default())?.total
    } else {
        f64::NAN
    };
    Ok(Outcome {
        x: res.x,
        converged: res.converged,
        iterations: res.iterations,
        residual_h: res.residual_h,
        objective,
    })
}

fn models(cfg: &ScenarioConfig) -> [(Model, f64); 2] {
    [(Model::Convex, 0.0), (Model::Proposed, cfg.theta)]
}

/// Ingredients of one Poisson trial that do not depend on μ.
pub struct PoissonTrial {
    pub observation: DVector<f64>,
    parts: GmeParts,
}

impl PoissonTrial {
    pub fn new(cfg: &ScenarioConfig, counts: DVector<f64>) -> Result<Self> {
        let n = counts.len();
        let pi = SimpleSet::uniform(n, cfg.lower, cfg.upper)?;
        let base = poisson_loss(&counts)?;
        let lambda = relative_strong_convexity_weights(&base, &pi)?.lambda;
        let lipschitz = extrapolated_lipschitz(&base, &pi, Tail::Zero)?;
        let loss = build_extrapolated(&base, &pi, Tail::Zero)?;
        let parts = GmeParts {
            loss,
            lipschitz,
            a: LinearMap::identity(n),
            mu: 1.0,
            psi: ProxFriendly::L1,
            l: LinearMap::first_difference(n)?,
            b: LinearMap::zero(n - 1, n - 1),
            c: LinearMap::identity(n),
            delta: ConstraintSet::Intervals(pi),
            lambda,
        };
        Ok(PoissonTrial { observation: counts, parts })
    }

    /// GME matrix for `μ = 1`; other μ rescale it by `1/√μ`.
    pub fn unit_b(&self, designer: Designer, theta: f64) -> Result<LinearMap> {
        let p = &self.parts;
        match designer {
            Designer::Scalar => Ok(design_b_scalar(theta, 1.0, &p.lambda, &p.a, &p.l)?.b),
            Designer::Range => design_b_range(theta, 1.0, &p.lambda, &p.a, &p.l),
        }
    }

    pub fn problem(&self, mu: f64, unit_b: &LinearMap) -> Result<GmeProblem> {
        let b = if unit_b.is_zero_map() {
            unit_b.clone()
        } else {
            LinearMap::scaled(1.0 / mu.sqrt(), unit_b)
        };
        GmeProblem::new(GmeParts { mu, b, ..self.parts.clone() })
    }
}

pub fn run_poisson_experiment(cfg: &ScenarioConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let truth = gen_piecewise_constant(cfg.n, cfg.seed)?;
    let per_trial: Vec<Vec<TrialResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| poisson_trial(cfg, &truth, trial))
        .collect::<Result<_>>()?;
    Ok(order_rows(per_trial))
}

fn poisson_trial(cfg: &ScenarioConfig, truth: &DVector<f64>, trial: usize) -> Result<Vec<TrialResult>> {
    let counts = sample_poisson(truth, cfg.seed.wrapping_add(trial as u64))?;
    let setup = PoissonTrial::new(cfg, counts)?;
    let d = LinearMap::first_difference(cfg.n)?;
    let mut rows = Vec::new();
    for (model, theta) in models(cfg) {
        let unit_b = if theta == 0.0 {
            Ok(LinearMap::zero(cfg.n - 1, cfg.n - 1))
        } else {
            setup.unit_b(cfg.designer, theta)
        };
        for &mu in &cfg.mu {
            let out = unit_b
                .clone()
                .and_then(|b| setup.problem(mu, &b))
                .and_then(|p| run_model(p, cfg));
            rows.push(match out {
                Ok(o) => {
                    let err = &o.x - truth;
                    TrialResult {
                        model,
                        theta,
                        mu,
                        trial,
                        status: "ok".into(),
                        converged: o.converged,
                        iterations: o.iterations,
                        residual_h: o.residual_h,
                        objective: o.objective,
                        ae: err.lp_norm(1),
                        se: err.norm_squared(),
                        tv_nonzero: d.apply(&o.x).iter().filter(|v| v.abs() > TV_THRESHOLD).count(),
                        ..TrialResult::failed(model, theta, mu, trial, &Error::Input(String::new()))
                    }
                }
                Err(e) => TrialResult::failed(model, theta, mu, trial, &e),
            });
        }
    }
    Ok(rows)
}

/// Rows sorted by model, cell, μ and trial.
fn order_rows(per_trial: Vec<Vec<TrialResult>>) -> Vec<TrialResult> {
    let mut rows: Vec<TrialResult> = per_trial.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.model
            .cmp(&b.model)
            .then(a.clip_level.total_cmp(&b.clip_level))
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.mu.total_cmp(&b.mu))
            .then(a.trial.cmp(&b.trial))
    });
    rows
}

/// Box `Π` keeping saturated samples beyond `±(ϑ - ϖ)`.
pub fn saturation_box(partitions: &Partitions, n: usize, level: f64, margin: f64) -> Result<SimpleSet> {
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    match partitions {
        Partitions::Clipped { upper, lower, .. } => {
            for &i in upper {
                lo[i] = level - margin;
            }
            for &i in lower {
                hi[i] = -level + margin;
            }
        }
        Partitions::Poisson { .. } => return Err(Error::Input("expected a clipped loss".into())),
    }
    SimpleSet::new(lo, hi)
}

/// Declipping problem for one observation; `B` is left at zero.
pub fn declip_problem(y: &DVector<f64>, level: f64, s: f64, margin_factor: f64, mu: f64) -> Result<GmeProblem> {
    let n = y.len();
    let base = clipped_loss(y, level, s)?;
    let pi = saturation_box(base.partitions().expect("clipped partitions"), n, level, margin_factor * s)?;
    let lambda = relative_strong_convexity_weights(&base, &pi)?.lambda;
    let lipschitz = extrapolated_lipschitz(&base, &pi, Tail::Zero)?;
    let loss = build_extrapolated(&base, &pi, Tail::Zero)?;
    GmeProblem::new(GmeParts {
        loss,
        lipschitz,
        a: LinearMap::identity(n),
        mu,
        psi: ProxFriendly::L1,
        l: LinearMap::dct(n)?,
        b: LinearMap::zero(n, n),
        c: LinearMap::identity(n),
        delta: ConstraintSet::Intervals(pi),
        lambda,
    })
}

pub fn run_declip_experiment(cfg: &ScenarioConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let truth = gen_dct_sparse(cfg.n, cfg.sparsity, cfg.seed)?;
    let per_trial: Vec<Vec<TrialResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| declip_trial(cfg, &truth, trial))
        .collect::<Result<_>>()?;
    Ok(order_rows(per_trial))
}

fn declip_trial(cfg: &ScenarioConfig, truth: &DVector<f64>, trial: usize) -> Result<Vec<TrialResult>> {
    let mut rows = Vec::new();
    let seed = cfg.seed.wrapping_add(trial as u64);
    for &level in &cfg.clip_levels {
        for &snr in &cfg.snr_db {
            let s = noise_scale_for_snr(truth, snr);
            let y = clip_observe(truth, level, s, seed)?;
            for (model, theta) in models(cfg) {
                for &mu in &cfg.mu {
                    let out = declip_problem(&y, level, s, cfg.margin_factor, mu)
                        .and_then(|p| {
                            let b = design_b_inverse(theta, mu, p.lambda(), p.a(), p.l())?;
                            p.with_b(b)
                        })
                        .and_then(|p| run_model(p, cfg));
                    let mut row = match out {
                        Ok(o) => TrialResult {
                            status: "ok".into(),
                            converged: o.converged,
                            iterations: o.iterations,
                            residual_h: o.residual_h,
                            objective: o.objective,
                            mse: (&o.x - truth).norm_squared(),
                            ..TrialResult::failed(model, theta, mu, trial, &Error::Input(String::new()))
                        },
                        Err(e) => TrialResult::failed(model, theta, mu, trial, &e),
                    };
                    row.clip_level = level;
                    row.snr_db = snr;
                    row.noise_scale = s;
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

pub const POISSON_HEADER: &str =
    "model,theta,mu,trial,status,converged,iterations,residual_h,ae,se,tv_nonzero,objective";
pub const DECLIP_HEADER: &str =
    "model,theta,clip_level,snr_db,noise_scale,mu,trial,status,converged,iterations,residual_h,mse,objective";

pub fn write_csv<W: Write>(scenario: Scenario, rows: &[TrialResult], mut out: W) -> Result<()> {
    let mut buf = String::new();
    match scenario {
        Scenario::Poisson => {
            buf.push_str(POISSON_HEADER);
            buf.push('\n');
            for r in rows {
                writeln!(
                    buf,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.model.name(), r.theta, r.mu, r.trial, r.status, r.converged, r.iterations,
                    r.residual_h, r.ae, r.se, r.tv_nonzero, r.objective
                )
                .expect("writing to a String");
            }
        }
        Scenario::Declip => {
            buf.push_str(DECLIP_HEADER);
            buf.push('\n');
            for r in rows {
                writeln!(
                    buf,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.model.name(), r.theta, r.clip_level, r.snr_db, r.noise_scale, r.mu, r.trial,
                    r.status, r.converged, r.iterations, r.residual_h, r.mse, r.objective
                )
                .expect("writing to a String");
            }
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Mean of each metric over trials for one (model, cell, μ).
#[derive(Debug, Clone, PartialEq)]
pub struct CellMean {
    pub model: Model,
    pub clip_level: f64,
    pub snr_db: f64,
    pub mu: f64,
    pub trials: usize,
    pub failures: usize,
    pub ae: f64,
    pub se: f64,
    pub tv_nonzero: f64,
    pub mse: f64,
}

/// Averages over trials. A failed row makes its whole cell NaN.
pub fn cell_means(rows: &[TrialResult]) -> Vec<CellMean> {
    let mut groups: BTreeMap<(Model, u64, u64, u64), Vec<&TrialResult>> = BTreeMap::new();
    for r in rows {
        let key = (r.model, r.clip_level.to_bits(), r.snr_db.to_bits(), r.mu.to_bits());
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            let failures = g.iter().filter(|r| !r.is_ok()).count();
            let mean = |f: fn(&TrialResult) -> f64| {
                if failures > 0 {
                    f64::NAN
                } else {
                    g.iter().map(|r| f(r)).sum::<f64>() / k
                }
            };
            CellMean {
                model: g[0].model,
                clip_level: g[0].clip_level,
                snr_db: g[0].snr_db,
                mu: g[0].mu,
                trials: g.len(),
                failures,
                ae: mean(|r| r.ae),
                se: mean(|r| r.se),
                tv_nonzero: mean(|r| r.tv_nonzero as f64),
                mse: mean(|r| r.mse),
            }
        })
        .collect()
}

/// The cell mean minimizing `metric` among rows of `model` (and a cell).
pub fn best_mu(
    means: &[CellMean],
    model: Model,
    cell: Option<(f64, f64)>,
    metric: fn(&CellMean) -> f64,
) -> Option<&CellMean> {
    means
        .iter()
        .filter(|m| m.model == model)
        .filter(|m| cell.is_none_or(|(c, s)| m.clip_level == c && m.snr_db == s))
        .filter(|m| metric(m).is_finite())
        .min_by(|a, b| metric(a).total_cmp(&metric(b)))
}
