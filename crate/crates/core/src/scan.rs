//! One-parameter sweeps and threshold bisection over a state family.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{build_state_with, StateFamily, DEFAULT_TAIL_TOL};
use crate::witness::{Condition, Engine, OperatorChoice, WitnessReport, DEFAULT_EPSILON};

/// Column order of the CSV and JSON row schema.
pub const COLUMNS: [&str; 8] = ["param", "lhs", "rhs1", "rhs2", "margin1", "margin2", "detected1", "detected2"];

const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: StateFamily,
    /// Parameters set to the swept value; several names move together.
    pub params: Vec<String>,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub ops: OperatorChoice,
    pub condition: Condition,
    pub epsilon: f64,
    pub tail_tol: f64,
    pub engine: Engine,
}

impl SweepSpec {
    /// Validated spec with default tolerances, canonical operators and both
    /// conditions.
    pub fn new(family: StateFamily, params: &[&str], lo: f64, hi: f64, steps: usize) -> Result<Self> {
        let spec = Self {
            family,
            params: params.iter().map(|s| s.to_string()).collect(),
            lo,
            hi,
            steps,
            ops: OperatorChoice::Canonical,
            condition: Condition::Both,
            epsilon: DEFAULT_EPSILON,
            tail_tol: DEFAULT_TAIL_TOL,
            engine: Engine::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_ops(mut self, ops: OperatorChoice) -> Self {
        self.ops = ops;
        self
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = condition;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::BadParameter(format!("grid needs lo < hi, got ({}, {})", self.lo, self.hi)));
        }
        if self.steps < 2 {
            return Err(Error::BadParameter(format!("grid needs at least 2 steps, got {}", self.steps)));
        }
        if self.params.is_empty() {
            return Err(Error::BadParameter("no swept parameter given".into()));
        }
        for name in &self.params {
            self.family.with_param(name, self.lo)?;
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::BadParameter(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Inclusive grid `lo, …, hi` with `steps` points.
    pub fn grid(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| if i == last { self.hi } else { self.lo + span * i as f64 / last as f64 })
            .collect()
    }

    pub fn family_at(&self, value: f64) -> Result<StateFamily> {
        let mut family = self.family.clone();
        for name in &self.params {
            family = family.with_param(name, value)?;
        }
        Ok(family)
    }

    /// Builds the state at `value` and evaluates both conditions.
    pub fn evaluate_at(&self, value: f64) -> Result<WitnessReport> {
        let family = self.family_at(value)?;
        let state = build_state_with(&family, self.tail_tol)?;
        let ops = self.ops.assign(&family, state.dims())?;
        self.engine.evaluate(&state, &ops, self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    #[serde(flatten)]
    pub report: WitnessReport,
}

/// Evaluates every grid point; rows come back in grid order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.grid()
        .into_par_iter()
        .map(|param| Ok(SweepRow { param, report: spec.evaluate_at(param)? }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectedSide {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub value: f64,
    pub bracket_width: f64,
    pub detected_side: DetectedSide,
}

/// Bisects on the sign of the selected margin; `epsilon` plays no part.
/// The result is the midpoint of the final bracket.
pub fn find_threshold(spec: &SweepSpec, bracket: (f64, f64), tol: f64) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::BadParameter(format!("bracket needs lo < hi, got ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance must be positive, got {tol}")));
    }
    let positive = |v: f64| -> Result<bool> { Ok(spec.condition.margin(&spec.evaluate_at(v)?) > 0.0) };
    let lo_pos = positive(lo)?;
    if lo_pos == positive(hi)? {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut steps = 0;
    while hi - lo > tol && steps < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive(mid)? == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let detected_side = if lo_pos { DetectedSide::Below } else { DetectedSide::Above };
    Ok(ThresholdResult { value: 0.5 * (lo + hi), bracket_width: hi - lo, detected_side })
}

fn float_cell(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the header and one record per row; floats carry 17 significant digits.
pub fn write_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(COLUMNS).map_err(io)?;
    for row in rows {
        let r = &row.report;
        w.write_record([
            float_cell(row.param),
            float_cell(r.lhs),
            float_cell(r.rhs1),
            float_cell(r.rhs2),
            float_cell(r.margin1),
            float_cell(r.margin2),
            r.detected1.to_string(),
            r.detected2.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}

/// JSON rows with the CSV column names.
pub fn rows_json(rows: &[SweepRow]) -> serde_json::Value {
    serde_json::Value::Array(
        rows.iter()
            .map(|row| {
                let r = &row.report;
                serde_json::json!({
                    "param": row.param,
                    "lhs": r.lhs,
                    "rhs1": r.rhs1,
                    "rhs2": r.rhs2,
                    "margin1": r.margin1,
                    "margin2": r.margin2,
                    "detected1": r.detected1,
                    "detected2": r.detected2,
                })
            })
            .collect(),
    )
}
