//! Operational behaviors: conditional probability tables for labelled boxes.
//!
//! A [`Behavior`] stores p(outputs | inputs) densely. Joint input and output
//! indices are row-major over the box list with the last box fastest, and
//! the table is laid out input-major: `table[input_index * n_outputs + output_index]`.

use crate::prob::{JointDistribution, Variable};
use crate::quantum::{born, CMat, DensityMatrix, MeasurementSet, QuantumError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for "each conditional row sums to one".
pub const ROW_TOL: f64 = 1e-10;
/// Verdict threshold for the no-signalling check.
pub const NO_SIGNALLING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BoxError {
    #[error("invalid behavior table: {0}")]
    InvalidTable(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("operation requires binary outputs")]
    NonBinary,
    #[error("behavior signals ({0}); marginal boxes are ill-defined")]
    Signalling(f64),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Input/output alphabet sizes of one box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxShape {
    #[serde(rename = "in")]
    pub inputs: usize,
    #[serde(rename = "out")]
    pub outputs: usize,
}

impl BoxShape {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs }
    }

    pub fn binary() -> Self {
        Self { inputs: 2, outputs: 2 }
    }
}

/// Conditional probability table p(outputs | inputs) over an ordered list of
/// boxes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Behavior {
    boxes: Vec<BoxShape>,
    table: Vec<f64>,
}

impl Behavior {
    pub fn new(boxes: Vec<BoxShape>, table: Vec<f64>) -> Result<Self, BoxError> {
        if boxes.iter().any(|b| b.inputs == 0 || b.outputs == 0) {
            return Err(BoxError::InvalidTable("zero-cardinality box".into()));
        }
        let n_in: usize = boxes.iter().map(|b| b.inputs).product();
        let n_out: usize = boxes.iter().map(|b| b.outputs).product();
        if table.len() != n_in * n_out {
            return Err(BoxError::InvalidTable(format!(
                "table length {} does not match {} inputs × {} outputs",
                table.len(),
                n_in,
                n_out
            )));
        }
        for row in 0..n_in {
            let slice = &table[row * n_out..(row + 1) * n_out];
            if let Some(&bad) = slice.iter().find(|&&p| p < 0.0 || !p.is_finite()) {
                return Err(BoxError::InvalidTable(format!("entry {bad} is negative")));
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(BoxError::InvalidTable(format!(
                    "outputs for input row {row} sum to {sum}"
                )));
            }
        }
        Ok(Self { boxes, table })
    }

    /// Build from a conditional probability function of (inputs, outputs).
    pub fn from_fn(
        boxes: Vec<BoxShape>,
        f: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<Self, BoxError> {
        let n_in: usize = boxes.iter().map(|b| b.inputs).product();
        let n_out: usize = boxes.iter().map(|b| b.outputs).product();
        let mut table = vec![0.0; n_in * n_out];
        let mut ins = vec![0usize; boxes.len()];
        let mut outs = vec![0usize; boxes.len()];
        for i in 0..n_in {
            decode(i, &boxes, Slot::Input, &mut ins);
            for o in 0..n_out {
                decode(o, &boxes, Slot::Output, &mut outs);
                table[i * n_out + o] = f(&ins, &outs);
            }
        }
        Self::new(boxes, table)
    }

    /// The paired extremal boxes: two binary boxes whose outputs satisfy
    /// g ⊕ c = m·a, each satisfying pair taken with probability 1/2.
    pub fn pr_box() -> Behavior {
        Self::from_fn(vec![BoxShape::binary(), BoxShape::binary()], |ins, outs| {
            if outs[0] ^ outs[1] == ins[0] & ins[1] {
                0.5
            } else {
                0.0
            }
        })
        .expect("pr table is valid")
    }

    /// Binary bipartite box with uniform marginals and input-independent
    /// success probability p(g ⊕ c = m·a) = (1+e)/2.
    pub fn isotropic(e: f64) -> Result<Behavior, BoxError> {
        if !(0.0..=1.0).contains(&e) {
            return Err(BoxError::Argument(format!("correlator {e} outside [0, 1]")));
        }
        Self::from_fn(vec![BoxShape::binary(), BoxShape::binary()], |ins, outs| {
            if outs[0] ^ outs[1] == ins[0] & ins[1] {
                0.25 * (1.0 + e)
            } else {
                0.25 * (1.0 - e)
            }
        })
    }

    /// Behavior of measurements on a shared quantum state: one box per
    /// party, box input = measurement choice, box output = outcome.
    ///
    /// Parties with fewer outcomes on some measurement than the box's output
    /// alphabet get zero probability on the missing outcomes.
    pub fn from_quantum(
        state: &DensityMatrix,
        parties: &[&MeasurementSet],
    ) -> Result<Behavior, BoxError> {
        let dim: usize = parties.iter().map(|p| p.dim()).product();
        if dim != state.dim() {
            return Err(BoxError::Argument(format!(
                "party dimensions multiply to {dim}, state has {}",
                state.dim()
            )));
        }
        let boxes: Vec<BoxShape> =
            parties.iter().map(|p| BoxShape::new(p.len(), p.max_outcomes())).collect();
        let n_in: usize = boxes.iter().map(|b| b.inputs).product();
        let n_out: usize = boxes.iter().map(|b| b.outputs).product();
        let mut table = vec![0.0; n_in * n_out];
        let mut ins = vec![0usize; boxes.len()];
        let mut outs = vec![0usize; boxes.len()];
        for i in 0..n_in {
            decode(i, &boxes, Slot::Input, &mut ins);
            for o in 0..n_out {
                decode(o, &boxes, Slot::Output, &mut outs);
                let mut effects: Vec<&CMat> = Vec::with_capacity(parties.len());
                let mut possible = true;
                for (party, (&input, &output)) in parties.iter().zip(ins.iter().zip(&outs)) {
                    let m = party.measurement(input);
                    if output >= m.effects.len() {
                        possible = false;
                        break;
                    }
                    effects.push(&m.effects[output]);
                }
                if possible {
                    table[i * n_out + o] = born(state, &effects)?;
                }
            }
        }
        Self::new(boxes, table)
    }

    /// Deterministic behavior from per-box input→output maps.
    /// `outputs[k]` gives box k's output alphabet size.
    pub fn local_deterministic(
        assignments: &[Vec<usize>],
        outputs: &[usize],
    ) -> Result<Behavior, BoxError> {
        if assignments.len() != outputs.len() {
            return Err(BoxError::Argument("one output alphabet per box required".into()));
        }
        let boxes: Vec<BoxShape> = assignments
            .iter()
            .zip(outputs)
            .map(|(a, &o)| BoxShape::new(a.len(), o))
            .collect();
        for (a, b) in assignments.iter().zip(&boxes) {
            if a.iter().any(|&v| v >= b.outputs) {
                return Err(BoxError::Argument("assignment output out of range".into()));
            }
        }
        Self::from_fn(boxes, |ins, outs| {
            let agree = assignments.iter().zip(ins).zip(outs).all(|((a, &i), &o)| a[i] == o);
            if agree {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Convex mixture of same-shape behaviors.
    pub fn mix(behaviors: &[Behavior], weights: &[f64]) -> Result<Behavior, BoxError> {
        if behaviors.is_empty() || behaviors.len() != weights.len() {
            return Err(BoxError::Argument("one weight per behavior required".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(BoxError::Argument("negative mixture weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(BoxError::Argument(format!("weights sum to {total}, not 1")));
        }
        let shape = &behaviors[0].boxes;
        if behaviors.iter().any(|b| &b.boxes != shape) {
            return Err(BoxError::Argument("mixture requires identical box shapes".into()));
        }
        let mut table = vec![0.0; behaviors[0].table.len()];
        for (b, &w) in behaviors.iter().zip(weights) {
            for (slot, &p) in table.iter_mut().zip(&b.table) {
                *slot += w * p;
            }
        }
        Self::new(shape.clone(), table)
    }

    pub fn boxes(&self) -> &[BoxShape] {
        &self.boxes
    }

    pub fn n_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn n_joint_inputs(&self) -> usize {
        self.boxes.iter().map(|b| b.inputs).product()
    }

    pub fn n_joint_outputs(&self) -> usize {
        self.boxes.iter().map(|b| b.outputs).product()
    }

    /// p(outputs | inputs) for explicit per-box values.
    pub fn prob(&self, inputs: &[usize], outputs: &[usize]) -> f64 {
        let i = encode(inputs, &self.boxes, Slot::Input);
        let o = encode(outputs, &self.boxes, Slot::Output);
        self.table[i * self.n_joint_outputs() + o]
    }

    /// Tensor product: the boxes of `other` are appended after ours, with no
    /// correlations across the join.
    pub fn product(&self, other: &Behavior) -> Behavior {
        let boxes: Vec<BoxShape> =
            self.boxes.iter().chain(other.boxes.iter()).copied().collect();
        let b = Self::from_fn(boxes, |ins, outs| {
            let k = self.boxes.len();
            self.prob(&ins[..k], &outs[..k]) * other.prob(&ins[k..], &outs[k..])
        });
        b.expect("product of valid behaviors is valid")
    }

    /// Reorders boxes so that new box k is old box `order[k]`.
    pub fn permute(&self, order: &[usize]) -> Result<Behavior, BoxError> {
        if order.len() != self.boxes.len() {
            return Err(BoxError::Argument("permutation length mismatch".into()));
        }
        let mut seen = vec![false; order.len()];
        for &o in order {
            if o >= order.len() || seen[o] {
                return Err(BoxError::Argument("not a permutation".into()));
            }
            seen[o] = true;
        }
        let boxes: Vec<BoxShape> = order.iter().map(|&o| self.boxes[o]).collect();
        Self::from_fn(boxes, |ins, outs| {
            let mut old_ins = vec![0usize; order.len()];
            let mut old_outs = vec![0usize; order.len()];
            for (new_idx, &old_idx) in order.iter().enumerate() {
                old_ins[old_idx] = ins[new_idx];
                old_outs[old_idx] = outs[new_idx];
            }
            self.prob(&old_ins, &old_outs)
        })
    }

    /// Marginal behavior over a subset of boxes. Requires no-signalling (so
    /// the marginal is independent of the discarded boxes' inputs, which are
    /// pinned to 0 here); fails loudly otherwise.
    pub fn marginal_boxes(&self, keep: &[usize]) -> Result<Behavior, BoxError> {
        let report = self.no_signalling_report();
        if !report.pass {
            return Err(BoxError::Signalling(report.max_discrepancy));
        }
        let kept_boxes: Vec<BoxShape> = keep.iter().map(|&k| self.boxes[k]).collect();
        Self::from_fn(kept_boxes, |ins, outs| {
            let mut full_ins = vec![0usize; self.boxes.len()];
            for (pos, &k) in keep.iter().enumerate() {
                full_ins[k] = ins[pos];
            }
            let mut total = 0.0;
            let n_out = self.n_joint_outputs();
            let row = encode(&full_ins, &self.boxes, Slot::Input) * n_out;
            let mut full_outs = vec![0usize; self.boxes.len()];
            for o in 0..n_out {
                decode(o, &self.boxes, Slot::Output, &mut full_outs);
                if keep.iter().enumerate().all(|(pos, &k)| full_outs[k] == outs[pos]) {
                    total += self.table[row + o];
                }
            }
            total
        })
    }

    /// Wires outputs of `self` into inputs of `second`: each `(from, to)`
    /// pair feeds box `from`'s output into box `to`'s input. The composition
    /// has a fixed causal order (first, then second), so cyclic wirings are
    /// not expressible here.
    ///
    /// The composed behavior keeps all boxes of both behaviors; the wired
    /// second-box inputs disappear from the free input list (their shapes
    /// become input-cardinality 1).
    pub fn wire(&self, second: &Behavior, wires: &[(usize, usize)]) -> Result<Behavior, BoxError> {
        for &(from, to) in wires {
            if from >= self.boxes.len() || to >= second.boxes.len() {
                return Err(BoxError::Argument("wire endpoint out of range".into()));
            }
            if self.boxes[from].outputs != second.boxes[to].inputs {
                return Err(BoxError::Argument(format!(
                    "output alphabet of box {from} does not match input alphabet of box {to}"
                )));
            }
        }
        let mut wired_targets = vec![None; second.boxes.len()];
        for &(from, to) in wires {
            if wired_targets[to].is_some() {
                return Err(BoxError::Argument(format!("box {to} wired twice")));
            }
            wired_targets[to] = Some(from);
        }
        let boxes: Vec<BoxShape> = self
            .boxes
            .iter()
            .copied()
            .chain(second.boxes.iter().enumerate().map(|(k, b)| {
                if wired_targets[k].is_some() {
                    BoxShape::new(1, b.outputs)
                } else {
                    *b
                }
            }))
            .collect();
        let k_first = self.boxes.len();
        Self::from_fn(boxes, |ins, outs| {
            let first_p = self.prob(&ins[..k_first], &outs[..k_first]);
            if first_p == 0.0 {
                return 0.0;
            }
            let second_ins: Vec<usize> = (0..second.boxes.len())
                .map(|k| match wired_targets[k] {
                    Some(from) => outs[from],
                    None => ins[k_first + k],
                })
                .collect();
            first_p * second.prob(&second_ins, &outs[k_first..])
        })
    }

    /// For each box: the maximal total-variation change of its output
    /// marginal when the other boxes' inputs vary.
    pub fn no_signalling_report(&self) -> NoSignallingReport {
        let n_boxes = self.boxes.len();
        let n_in = self.n_joint_inputs();
        let n_out = self.n_joint_outputs();
        let mut per_box = vec![0.0f64; n_boxes];
        let mut ins = vec![0usize; n_boxes];
        let mut outs = vec![0usize; n_boxes];
        for (k, shape) in self.boxes.iter().enumerate() {
            for own_input in 0..shape.inputs {
                // Output marginal of box k for every setting of the others.
                let mut marginals: Vec<Vec<f64>> = Vec::new();
                for i in 0..n_in {
                    decode(i, &self.boxes, Slot::Input, &mut ins);
                    if ins[k] != own_input {
                        continue;
                    }
                    let mut marginal = vec![0.0; shape.outputs];
                    for o in 0..n_out {
                        decode(o, &self.boxes, Slot::Output, &mut outs);
                        marginal[outs[k]] += self.table[i * n_out + o];
                    }
                    marginals.push(marginal);
                }
                for a in 0..marginals.len() {
                    for b in a + 1..marginals.len() {
                        let tv: f64 = marginals[a]
                            .iter()
                            .zip(&marginals[b])
                            .map(|(x, y)| (x - y).abs())
                            .sum::<f64>()
                            / 2.0;
                        per_box[k] = per_box[k].max(tv);
                    }
                }
            }
        }
        let max = per_box.iter().copied().fold(0.0, f64::max);
        NoSignallingReport { per_box, max_discrepancy: max, pass: max <= NO_SIGNALLING_TOL }
    }

    /// Joint distribution over (inputs…, outputs…) with independently
    /// distributed inputs; `input_dists[k]` is box k's input distribution
    /// (uniform when `None`). Variables are named `in0…`/`out0…` unless
    /// names are supplied.
    pub fn joint_with_inputs(
        &self,
        input_dists: Option<&[Vec<f64>]>,
        names: Option<(&[&str], &[&str])>,
    ) -> Result<JointDistribution, BoxError> {
        let n_boxes = self.boxes.len();
        let dists: Vec<Vec<f64>> = match input_dists {
            Some(d) => {
                if d.len() != n_boxes {
                    return Err(BoxError::Argument("one input distribution per box".into()));
                }
                d.to_vec()
            }
            None => self
                .boxes
                .iter()
                .map(|b| vec![1.0 / b.inputs as f64; b.inputs])
                .collect(),
        };
        let mut variables = Vec::with_capacity(2 * n_boxes);
        for (k, b) in self.boxes.iter().enumerate() {
            let name = match names {
                Some((ins, _)) => ins[k].to_string(),
                None => format!("in{k}"),
            };
            variables.push(Variable::new(name, b.inputs));
        }
        for (k, b) in self.boxes.iter().enumerate() {
            let name = match names {
                Some((_, outs)) => outs[k].to_string(),
                None => format!("out{k}"),
            };
            variables.push(Variable::new(name, b.outputs));
        }
        let d = JointDistribution::from_fn(variables, |joint| {
            let (ins, outs) = joint.split_at(n_boxes);
            let p_in: f64 =
                ins.iter().zip(&dists).map(|(&i, d)| d[i]).product();
            p_in * self.prob(ins, outs)
        })
        .map_err(|e| BoxError::InvalidTable(e.to_string()))?;
        Ok(d)
    }
}

/// Result of [`Behavior::no_signalling_report`].
#[derive(Debug, Clone, Serialize)]
pub struct NoSignallingReport {
    pub per_box: Vec<f64>,
    pub max_discrepancy: f64,
    pub pass: bool,
}

#[derive(Clone, Copy)]
enum Slot {
    Input,
    Output,
}

fn card(b: &BoxShape, slot: Slot) -> usize {
    match slot {
        Slot::Input => b.inputs,
        Slot::Output => b.outputs,
    }
}

fn encode(values: &[usize], boxes: &[BoxShape], slot: Slot) -> usize {
    debug_assert_eq!(values.len(), boxes.len());
    let mut idx = 0;
    for (v, b) in values.iter().zip(boxes) {
        debug_assert!(*v < card(b, slot));
        idx = idx * card(b, slot) + v;
    }
    idx
}

fn decode(mut idx: usize, boxes: &[BoxShape], slot: Slot, out: &mut [usize]) {
    for (slot_val, b) in out.iter_mut().zip(boxes).rev() {
        *slot_val = idx % card(b, slot);
        idx /= card(b, slot);
    }
}
