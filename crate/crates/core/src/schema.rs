//! JSON documents read by the command-line front end: martingale models,
//! concentration corpora and bound sequences.
//!
//! Every document carries `"schema": "normbound/1"`. Errors are
//! [`Error::Schema`] values whose `path` is the JSON path of the offending
//! field, e.g. `steps[2].probs`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constants::{aggregate, step_scale};
use crate::error::{Error, Result};
use crate::lipschitz::{BuiltinG, DiscreteVariable, Point};
use crate::martingale_lab::{Branch, Conditions, MartingaleModel, ModelKind, Selector, Step};
use crate::tail_bounds::{combined_bound, truncation_bound, BoundQuery, TruncationInput};

/// The only schema version understood.
pub const SCHEMA_VERSION: &str = "normbound/1";

fn schema_err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T> {
    Err(Error::Schema {
        path: path.into(),
        message: message.into(),
    })
}

/// Deserializes `text`, reporting the JSON path of the first mismatch.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

fn check_version(v: &str) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        schema_err("schema", format!("expected \"{SCHEMA_VERSION}\", got \"{v}\""))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepType {
    Iid,
    Adapted,
}

/// A law with its declared conditions: either `C`, `D`, `s` or `D`, `var`,
/// `s_hat`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<f64>,
}

/// An override of an adapted step; exactly one of `path`, `sum_lt`,
/// `sum_ge` selects the histories it applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_lt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_ge: Option<f64>,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    #[serde(rename = "type")]
    pub step_type: StepType,
    /// The step is repeated this many times (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<OverrideDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub schema: String,
    pub kind: ModelKind,
    #[serde(default)]
    pub initial: f64,
    pub steps: Vec<StepDoc>,
}

fn build_branch(
    path: &str,
    support: &[f64],
    probs: &[f64],
    fields: (Option<f64>, Option<f64>, Option<f64>, Option<f64>, Option<f64>),
) -> Result<Branch> {
    let law = DiscreteVariable::new(support.to_vec(), probs.to_vec()).or_else(|e| match e {
        Error::Domain(m) => schema_err(format!("{path}.probs"), m),
        other => Err(other),
    })?;
    let conditions = match fields {
        (Some(lower), Some(upper), Some(scale), None, None) => Conditions::Bracket { lower, upper, scale },
        (None, Some(upper), None, Some(variance), Some(scale)) => Conditions::OneSided { upper, variance, scale },
        _ => return schema_err(path, "declare either C, D, s or D, var, s_hat"),
    };
    Ok(Branch { law, conditions })
}

impl ModelDoc {
    /// Converts to a model; validation of the declared conditions happens
    /// separately in [`MartingaleModel::validate`].
    pub fn to_model(&self) -> Result<MartingaleModel> {
        check_version(&self.schema)?;
        if self.steps.is_empty() {
            return schema_err("steps", "at least one step is required");
        }
        let mut steps = Vec::new();
        for (i, st) in self.steps.iter().enumerate() {
            let path = format!("steps[{i}]");
            let default = build_branch(&path, &st.support, &st.probs, (st.c, st.d, st.s, st.var, st.s_hat))?;
            if st.step_type == StepType::Iid && !st.branches.is_empty() {
                return schema_err(format!("{path}.branches"), "iid steps take no branches");
            }
            let mut overrides = Vec::new();
            for (j, o) in st.branches.iter().enumerate() {
                let opath = format!("{path}.branches[{j}]");
                let selector = match (&o.path, o.sum_lt, o.sum_ge) {
                    (Some(p), None, None) => Selector::Prefix(p.clone()),
                    (None, Some(v), None) => Selector::SumBelow(v),
                    (None, None, Some(v)) => Selector::SumAtLeast(v),
                    _ => return schema_err(opath, "give exactly one of path, sum_lt, sum_ge"),
                };
                let b = build_branch(&opath, &o.support, &o.probs, (o.c, o.d, o.s, o.var, o.s_hat))?;
                overrides.push((selector, b));
            }
            let repeat = st.repeat.unwrap_or(1);
            if repeat == 0 {
                return schema_err(format!("{path}.repeat"), "repeat must be at least 1");
            }
            steps.extend(std::iter::repeat_n(Step { default, overrides }, repeat));
        }
        Ok(MartingaleModel {
            kind: self.kind,
            initial: self.initial,
            steps,
        })
    }
}

/// Parses and validates a model document. Validation errors are reported
/// with the step path of the document (after expanding `repeat`).
pub fn parse_model(text: &str) -> Result<MartingaleModel> {
    let doc: ModelDoc = parse_json(text)?;
    let model = doc.to_model()?;
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub support: Vec<Point>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntryDoc {
    #[serde(default)]
    pub name: String,
    pub g: BuiltinG,
    /// Whether `g` is convex in each argument; all builtins are.
    #[serde(default = "yes")]
    pub convex: bool,
    pub variables: Vec<VariableDoc>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDoc {
    pub schema: String,
    pub entries: Vec<CorpusEntryDoc>,
}

/// A validated corpus entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub name: String,
    pub g: BuiltinG,
    pub convex: bool,
    pub variables: Vec<DiscreteVariable<Point>>,
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>> {
    let doc: CorpusDoc = parse_json(text)?;
    check_version(&doc.schema)?;
    let mut out = Vec::with_capacity(doc.entries.len());
    for (e, entry) in doc.entries.into_iter().enumerate() {
        if entry.variables.is_empty() {
            return schema_err(format!("entries[{e}].variables"), "at least one variable is required");
        }
        let mut variables = Vec::with_capacity(entry.variables.len());
        for (i, v) in entry.variables.into_iter().enumerate() {
            let var = DiscreteVariable::new(v.support, v.probs).or_else(|err| match err {
                Error::Domain(m) => schema_err(format!("entries[{e}].variables[{i}]"), m),
                other => Err(other),
            })?;
            variables.push(var);
        }
        entry.g.check_points(&variables).or_else(|(i, j, m)| {
            schema_err(format!("entries[{e}].variables[{i}].support[{j}]"), m)
        })?;
        out.push(CorpusEntry {
            name: if entry.name.is_empty() { format!("entry{e}") } else { entry.name },
            g: entry.g,
            convex: entry.convex,
            variables,
        });
    }
    Ok(out)
}

/// One step of a bound sequence: `s`, or `C` and `D`, or `D` and `var`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceStep {
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

/// Per-step conditions and optional exceedance probabilities
/// `P(X_i ≥ D_{i−1})` for the truncated bound.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSequenceDoc {
    pub schema: String,
    pub steps: Vec<SequenceStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exceedances: Vec<f64>,
}

/// Scales and bounds derived from a [`BoundSequenceDoc`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSequenceResult {
    pub x: f64,
    pub step_scales: Vec<f64>,
    pub scale: f64,
    pub combined: f64,
    /// `min(1, Σ exceedances + combined)` when exceedances are given.
    pub truncated: Option<f64>,
}

impl BoundSequenceDoc {
    /// Per-step scales: `s`, `(D − C)/2`, or `(D + var/D)/2`.
    pub fn step_scales(&self) -> Result<Vec<f64>> {
        check_version(&self.schema)?;
        if self.steps.is_empty() {
            return schema_err("steps", "at least one step is required");
        }
        let mut out = Vec::with_capacity(self.steps.len());
        for (i, st) in self.steps.iter().enumerate() {
            let path = format!("steps[{i}]");
            let s = match (st.c, st.d, st.var, st.s) {
                (None, None, None, Some(s)) => s,
                (Some(c), Some(d), None, None) => {
                    if !(c.is_finite() && d.is_finite() && c <= d) {
                        return schema_err(path, format!("need finite C <= D, got C = {c}, D = {d}"));
                    }
                    0.5 * (d - c)
                }
                (None, Some(d), Some(var), None) => match step_scale(d, var) {
                    Ok(sc) => sc.s_hat,
                    Err(e) => return schema_err(path, e.to_string()),
                },
                _ => return schema_err(path, "give s, or C and D, or D and var"),
            };
            if !(s.is_finite() && s > 0.0) {
                return schema_err(path, format!("step scale must be positive, got {s}"));
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn evaluate(&self, x: f64) -> Result<BoundSequenceResult> {
        let scales = self.step_scales()?;
        let agg = aggregate(&scales)?;
        let q = BoundQuery::new(x, agg.aggregate)?;
        let truncated = if self.exceedances.is_empty() {
            None
        } else {
            Some(truncation_bound(&TruncationInput {
                exceed_probs: self.exceedances.clone(),
                query: q,
            })
            .or_else(|e| schema_err("exceedances", e.to_string()))?)
        };
        Ok(BoundSequenceResult {
            x,
            step_scales: agg.entries,
            scale: agg.aggregate,
            combined: combined_bound(q),
            truncated,
        })
    }
}

pub fn parse_bound_sequence(text: &str) -> Result<BoundSequenceDoc> {
    let doc: BoundSequenceDoc = parse_json(text)?;
    doc.step_scales()?;
    Ok(doc)
}
