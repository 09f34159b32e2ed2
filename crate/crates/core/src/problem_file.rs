//! Line-oriented text description of a single problem instance.
//!
//! ```text
//! loss = poisson          # quadratic | poisson | clipped
//! y = 10, 14
//! lower = 5               # one value, or one per coordinate
//! upper = 40
//! mu = 1
//! l = difference          # identity | difference | dct | dense
//! b = range               # zero | inverse | scalar | range | dense
//! theta = 0.99
//! ```
//!
//! Dense operators are given as `<name> = dense` followed by one
//! `<name>.row = ...` line per row. `a` and `c` default to the identity,
//! `Δ` to the box `lower ≤ x ≤ upper`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::extrapolate::{build_extrapolated, extrapolated_lipschitz, relative_strong_convexity_weights, Tail};
use crate::gme_model::{design_b_inverse, design_b_range, design_b_scalar, GmeParts, GmeProblem};
use crate::linops::{parse_csv_row, LinearMap};
use crate::losses::{clipped_loss, poisson_loss, quadratic_loss};
use crate::proxfns::{ConstraintSet, ProxFriendly, SimpleSet};

#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    Quadratic,
    Poisson,
    Clipped { level: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpSpec {
    Identity,
    Difference,
    Dct,
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BSpec {
    Zero,
    Inverse,
    Scalar,
    Range,
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub loss: LossSpec,
    pub y: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub tail: Tail,
    pub mu: f64,
    pub theta: f64,
    pub a: OpSpec,
    pub l: OpSpec,
    pub c: OpSpec,
    pub b: BSpec,
    /// Use the whole space as `Δ` instead of the box.
    pub unconstrained: bool,
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn fmt_dense(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "{name} = dense").unwrap();
    for row in m.row_iter() {
        let row: Vec<f64> = row.iter().copied().collect();
        writeln!(out, "{name}.row = {}", fmt_row(&row)).unwrap();
    }
}

fn fmt_op(out: &mut String, name: &str, op: &OpSpec) {
    match op {
        OpSpec::Identity => writeln!(out, "{name} = identity").unwrap(),
        OpSpec::Difference => writeln!(out, "{name} = difference").unwrap(),
        OpSpec::Dct => writeln!(out, "{name} = dct").unwrap(),
        OpSpec::Dense(m) => fmt_dense(out, name, m),
    }
}

impl ProblemSpec {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.loss {
            LossSpec::Quadratic => out.push_str("loss = quadratic\n"),
            LossSpec::Poisson => out.push_str("loss = poisson\n"),
            LossSpec::Clipped { level, scale } => {
                writeln!(out, "loss = clipped\nlevel = {level:?}\nscale = {scale:?}").unwrap();
            }
        }
        writeln!(out, "y = {}", fmt_row(self.y.as_slice())).unwrap();
        writeln!(out, "lower = {}", fmt_row(&self.lower)).unwrap();
        writeln!(out, "upper = {}", fmt_row(&self.upper)).unwrap();
        let tail = match self.tail {
            Tail::Zero => "zero",
            Tail::CubicQuadratic => "cubic",
        };
        writeln!(out, "tail = {tail}").unwrap();
        writeln!(out, "mu = {:?}", self.mu).unwrap();
        writeln!(out, "theta = {:?}", self.theta).unwrap();
        fmt_op(&mut out, "a", &self.a);
        fmt_op(&mut out, "l", &self.l);
        fmt_op(&mut out, "c", &self.c);
        match &self.b {
            BSpec::Zero => out.push_str("b = zero\n"),
            BSpec::Inverse => out.push_str("b = inverse\n"),
            BSpec::Scalar => out.push_str("b = scalar\n"),
            BSpec::Range => out.push_str("b = range\n"),
            BSpec::Dense(m) => fmt_dense(&mut out, "b", m),
        }
        writeln!(out, "delta = {}", if self.unconstrained { "whole" } else { "box" }).unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: Vec<(usize, String, String)> = Vec::new();
        let mut rows: [Vec<Vec<f64>>; 4] = Default::default();
        let names = ["a", "l", "c", "b"];
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
            if let Some(op) = k.strip_suffix(".row") {
                let slot = names
                    .iter()
                    .position(|n| *n == op)
                    .ok_or_else(|| Error::Parse { line, msg: format!("unknown operator '{op}'") })?;
                rows[slot].push(parse_csv_row(v).map_err(|msg| Error::Parse { line, msg })?);
            } else {
                if kv.iter().any(|(_, key, _)| key == k) {
                    return Err(Error::Parse { line, msg: format!("duplicate key '{k}'") });
                }
                kv.push((line, k.to_string(), v.to_string()));
            }
        }
        let get = |key: &str| kv.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
        let need = |key: &str| get(key).ok_or_else(|| Error::Parse { line: 0, msg: format!("missing key '{key}'") });
        let scalar = |key: &str| -> Result<Option<f64>> {
            match get(key) {
                None => Ok(None),
                Some((line, v)) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Parse { line, msg: format!("bad number '{v}' for {key}") }),
            }
        };
        for (line, k, _) in &kv {
            const KNOWN: [&str; 14] = [
                "loss", "y", "level", "scale", "lower", "upper", "tail", "mu", "theta", "a", "l", "c", "b",
                "delta",
            ];
            if !KNOWN.contains(&k.as_str()) {
                return Err(Error::Parse { line: *line, msg: format!("unknown key '{k}'") });
            }
        }

        let (yl, yv) = need("y")?;
        let y = DVector::from_vec(parse_csv_row(yv).map_err(|msg| Error::Parse { line: yl, msg })?);
        let n = y.len();
        let loss = match need("loss")? {
            (_, "quadratic") => LossSpec::Quadratic,
            (_, "poisson") => LossSpec::Poisson,
            (line, "clipped") => LossSpec::Clipped {
                level: scalar("level")?.ok_or(Error::Parse { line, msg: "clipped loss needs level".into() })?,
                scale: scalar("scale")?.ok_or(Error::Parse { line, msg: "clipped loss needs scale".into() })?,
            },
            (line, other) => return Err(Error::Parse { line, msg: format!("unknown loss '{other}'") }),
        };
        let bound = |key: &str, default: f64| -> Result<Vec<f64>> {
            match get(key) {
                None => Ok(vec![default; n]),
                Some((line, v)) => {
                    let vals = parse_csv_row(v).map_err(|msg| Error::Parse { line, msg })?;
                    match vals.len() {
                        1 => Ok(vec![vals[0]; n]),
                        k if k == n => Ok(vals),
                        k => Err(Error::Parse { line, msg: format!("{key} has {k} entries, expected 1 or {n}") }),
                    }
                }
            }
        };
        let tail = match get("tail") {
            None | Some((_, "zero")) => Tail::Zero,
            Some((_, "cubic")) => Tail::CubicQuadratic,
            Some((line, t)) => return Err(Error::Parse { line, msg: format!("unknown tail '{t}'") }),
        };
        let mut take_rows = |slot: usize, line: usize| -> Result<DMatrix<f64>> {
            let r = std::mem::take(&mut rows[slot]);
            if r.is_empty() {
                return Err(Error::Parse { line, msg: format!("dense operator '{}' has no rows", names[slot]) });
            }
            let cols = r[0].len();
            if r.iter().any(|row| row.len() != cols) {
                return Err(Error::Parse { line, msg: format!("ragged rows for '{}'", names[slot]) });
            }
            Ok(DMatrix::from_fn(r.len(), cols, |i, j| r[i][j]))
        };
        let mut op = |slot: usize, default: OpSpec| -> Result<OpSpec> {
            match get(names[slot]) {
                None => Ok(default),
                Some((_, "identity")) => Ok(OpSpec::Identity),
                Some((_, "difference")) => Ok(OpSpec::Difference),
                Some((_, "dct")) => Ok(OpSpec::Dct),
                Some((line, "dense")) => Ok(OpSpec::Dense(take_rows(slot, line)?)),
                Some((line, o)) => Err(Error::Parse { line, msg: format!("unknown operator kind '{o}'") }),
            }
        };
        let a = op(0, OpSpec::Identity)?;
        let l = op(1, OpSpec::Identity)?;
        let c = op(2, OpSpec::Identity)?;
        let b = match get("b") {
            None | Some((_, "zero")) => BSpec::Zero,
            Some((_, "inverse")) => BSpec::Inverse,
            Some((_, "scalar")) => BSpec::Scalar,
            Some((_, "range")) => BSpec::Range,
            Some((line, "dense")) => BSpec::Dense(take_rows(3, line)?),
            Some((line, o)) => return Err(Error::Parse { line, msg: format!("unknown b '{o}'") }),
        };
        if let Some(slot) = rows.iter().position(|r| !r.is_empty()) {
            return Err(Error::Parse { line: 0, msg: format!("rows given for non-dense '{}'", names[slot]) });
        }
        let unconstrained = match get("delta") {
            None | Some((_, "box")) => false,
            Some((_, "whole")) => true,
            Some((line, d)) => return Err(Error::Parse { line, msg: format!("unknown delta '{d}'") }),
        };
        Ok(ProblemSpec {
            loss,
            lower: bound("lower", f64::NEG_INFINITY)?,
            upper: bound("upper", f64::INFINITY)?,
            y,
            tail,
            mu: scalar("mu")?.unwrap_or(1.0),
            theta: scalar("theta")?.unwrap_or(0.99),
            a,
            l,
            c,
            b,
            unconstrained,
        })
    }

    pub fn build(&self) -> Result<GmeProblem> {
        let n = self.y.len();
        let pi = SimpleSet::new(self.lower.clone(), self.upper.clone())?;
        let base = match self.loss {
            LossSpec::Quadratic => quadratic_loss(&self.y)?,
            LossSpec::Poisson => poisson_loss(&self.y)?,
            LossSpec::Clipped { level, scale } => clipped_loss(&self.y, level, scale)?,
        };
        let lambda = relative_strong_convexity_weights(&base, &pi)?.lambda;
        let lipschitz = extrapolated_lipschitz(&base, &pi, self.tail)?;
        let loss = build_extrapolated(&base, &pi, self.tail)?;
        let map = |op: &OpSpec, rows: usize| -> Result<LinearMap> {
            match op {
                OpSpec::Identity => Ok(LinearMap::identity(rows)),
                OpSpec::Difference => LinearMap::first_difference(n),
                OpSpec::Dct => LinearMap::dct(n),
                OpSpec::Dense(m) => LinearMap::dense(m.clone()),
            }
        };
        let a = map(&self.a, n)?;
        let l = map(&self.l, n)?;
        let c = map(&self.c, n)?;
        let b = match &self.b {
            BSpec::Zero => LinearMap::zero(l.out_dim(), l.out_dim()),
            BSpec::Inverse => design_b_inverse(self.theta, self.mu, &lambda, &a, &l)?,
            BSpec::Scalar => design_b_scalar(self.theta, self.mu, &lambda, &a, &l)?.b,
            BSpec::Range => design_b_range(self.theta, self.mu, &lambda, &a, &l)?,
            BSpec::Dense(m) => LinearMap::dense(m.clone())?,
        };
        let delta = if self.unconstrained {
            ConstraintSet::Intervals(SimpleSet::whole(c.out_dim()))
        } else {
            ConstraintSet::Intervals(pi)
        };
        GmeProblem::new(GmeParts {
            loss,
            lipschitz,
            a,
            mu: self.mu,
            psi: ProxFriendly::L1,
            l,
            b,
            c,
            delta,
            lambda,
        })
    }
}
