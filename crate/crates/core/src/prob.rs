//! Exact discrete probability tables and Shannon-information bookkeeping.
//!
//! [`JointDistribution`] is the substrate every other module reduces to when
//! it needs entropies or mutual informations: a dense table over named
//! discrete variables, stored row-major with the last variable fastest.
//! All logarithms are base 2 and every quantity is reported in bits, with
//! the usual 0·log 0 = 0 convention.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for "the table sums to one".
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Raw mutual informations may dip this far below zero from float noise
/// before we refuse to clamp them.
pub const NEGATIVITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("unknown variable label `{0}`")]
    UnknownLabel(String),
    #[error("variable subsets must be disjoint; `{0}` appears twice")]
    OverlappingLabels(String),
    #[error("variable subset is empty")]
    EmptySubset,
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("conditioning evidence has zero probability")]
    ZeroProbabilityEvidence,
    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("precondition `{condition}` violated (deviation {deviation:.3e})")]
    Precondition { condition: &'static str, deviation: f64 },
}

/// A named discrete variable and its cardinality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Self { name: name.into(), cardinality }
    }
}

/// A probability table over an ordered list of named discrete variables.
///
/// Index layout is row-major with the last variable fastest, matching the
/// serialized form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointDistribution {
    variables: Vec<Variable>,
    table: Vec<f64>,
}

impl JointDistribution {
    /// Build a distribution from an explicit table, validating the type
    /// invariants (entries ≥ 0, sum 1 within `NORMALIZATION_TOL`, length
    /// equals the product of cardinalities).
    pub fn new(variables: Vec<Variable>, table: Vec<f64>) -> Result<Self, ProbError> {
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        if variables.iter().any(|v| v.cardinality == 0) {
            return Err(ProbError::InvalidTable("zero-cardinality variable".into()));
        }
        if table.len() != size {
            return Err(ProbError::InvalidTable(format!(
                "table length {} does not match product of cardinalities {}",
                table.len(),
                size
            )));
        }
        if let Some(&bad) = table.iter().find(|&&p| p < 0.0 || !p.is_finite()) {
            return Err(ProbError::InvalidTable(format!("entry {bad} is negative or non-finite")));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ProbError::InvalidTable(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self { variables, table })
    }

    /// Build from a function of joint assignments; the function's values are
    /// normalized-checked, not rescaled.
    pub fn from_fn(
        variables: Vec<Variable>,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<Self, ProbError> {
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        let mut table = vec![0.0; size];
        let mut assignment = vec![0usize; variables.len()];
        for (idx, slot) in table.iter_mut().enumerate() {
            decode_assignment(idx, &variables, &mut assignment);
            *slot = f(&assignment);
        }
        Self::new(variables, table)
    }

    /// Uniform distribution over all joint assignments.
    pub fn uniform(variables: Vec<Variable>) -> Self {
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        let p = 1.0 / size as f64;
        Self { variables, table: vec![p; size] }
    }

    /// Point mass on a single joint assignment.
    pub fn point_mass(variables: Vec<Variable>, assignment: &[usize]) -> Result<Self, ProbError> {
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        let mut table = vec![0.0; size];
        let idx = encode_assignment(assignment, &variables);
        table[idx] = 1.0;
        Self::new(variables, table)
    }

    /// Empirical-frequency table from integer-coded samples.
    pub fn from_samples(
        variables: Vec<Variable>,
        samples: impl IntoIterator<Item = Vec<usize>>,
    ) -> Result<Self, ProbError> {
        let size: usize = variables.iter().map(|v| v.cardinality).product();
        let mut counts = vec![0u64; size];
        let mut total = 0u64;
        for s in samples {
            counts[encode_assignment(&s, &variables)] += 1;
            total += 1;
        }
        if total == 0 {
            return Err(ProbError::InvalidTable("no samples".into()));
        }
        let table = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(variables, table)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.table[encode_assignment(assignment, &self.variables)]
    }

    fn var_positions(&self, labels: &[&str]) -> Result<Vec<usize>, ProbError> {
        if labels.is_empty() {
            return Err(ProbError::EmptySubset);
        }
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            let pos = self
                .variables
                .iter()
                .position(|v| v.name == l)
                .ok_or_else(|| ProbError::UnknownLabel(l.to_string()))?;
            if out.contains(&pos) {
                return Err(ProbError::OverlappingLabels(l.to_string()));
            }
            out.push(pos);
        }
        Ok(out)
    }

    /// Marginal distribution over `labels`, in the order given.
    pub fn marginal(&self, labels: &[&str]) -> Result<JointDistribution, ProbError> {
        let keep = self.var_positions(labels)?;
        let out_vars: Vec<Variable> = keep.iter().map(|&i| self.variables[i].clone()).collect();
        let out_size: usize = out_vars.iter().map(|v| v.cardinality).product();
        let mut out_table = vec![0.0; out_size];
        let mut assignment = vec![0usize; self.variables.len()];
        let mut out_assignment = vec![0usize; keep.len()];
        for (idx, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode_assignment(idx, &self.variables, &mut assignment);
            for (slot, &src) in out_assignment.iter_mut().zip(&keep) {
                *slot = assignment[src];
            }
            out_table[encode_assignment(&out_assignment, &out_vars)] += p;
        }
        Ok(JointDistribution { variables: out_vars, table: out_table })
    }

    /// Shannon entropy in bits of the marginal over `labels`.
    pub fn entropy(&self, labels: &[&str]) -> Result<f64, ProbError> {
        let m = self.marginal(labels)?;
        Ok(shannon(&m.table))
    }

    /// Mutual information I(X:Y) in bits, clamped at zero.
    ///
    /// Tiny negative values from float noise are clamped; anything below
    /// `-NEGATIVITY_SLACK` indicates a genuine defect and is reported raw in
    /// debug builds via a panic.
    pub fn mutual_information(&self, x: &[&str], y: &[&str]) -> Result<f64, ProbError> {
        Ok(clamp_information(self.mutual_information_raw(x, y)?))
    }

    /// Unclamped I(X:Y) = H(X) + H(Y) − H(XY); may be a tiny negative number.
    pub fn mutual_information_raw(&self, x: &[&str], y: &[&str]) -> Result<f64, ProbError> {
        check_disjoint(&[x, y])?;
        let hx = self.entropy(x)?;
        let hy = self.entropy(y)?;
        let joint: Vec<&str> = x.iter().chain(y.iter()).copied().collect();
        let hxy = self.entropy(&joint)?;
        Ok(hx + hy - hxy)
    }

    /// Conditional mutual information I(X:Y|Z) = I(X:YZ) − I(X:Z), clamped
    /// at zero.
    pub fn conditional_mutual_information(
        &self,
        x: &[&str],
        y: &[&str],
        z: &[&str],
    ) -> Result<f64, ProbError> {
        check_disjoint(&[x, y, z])?;
        let yz: Vec<&str> = y.iter().chain(z.iter()).copied().collect();
        let i_x_yz = self.mutual_information_raw(x, &yz)?;
        let i_x_z = self.mutual_information_raw(x, z)?;
        Ok(clamp_information(i_x_yz - i_x_z))
    }

    /// Condition on a partial assignment and renormalize over the remaining
    /// variables (in their original order).
    pub fn condition(&self, evidence: &[(&str, usize)]) -> Result<JointDistribution, ProbError> {
        let labels: Vec<&str> = evidence.iter().map(|&(l, _)| l).collect();
        let fixed = self.var_positions(&labels)?;
        for (&pos, &(_, v)) in fixed.iter().zip(evidence) {
            if v >= self.variables[pos].cardinality {
                return Err(ProbError::InvalidTable(format!(
                    "evidence value {v} out of range for `{}`",
                    self.variables[pos].name
                )));
            }
        }
        let keep: Vec<usize> =
            (0..self.variables.len()).filter(|i| !fixed.contains(i)).collect();
        let out_vars: Vec<Variable> = keep.iter().map(|&i| self.variables[i].clone()).collect();
        let out_size = out_vars.iter().map(|v| v.cardinality).product::<usize>().max(1);
        let mut out_table = vec![0.0; out_size];
        let mut assignment = vec![0usize; self.variables.len()];
        let mut out_assignment = vec![0usize; keep.len()];
        let mut mass = 0.0;
        for (idx, &p) in self.table.iter().enumerate() {
            decode_assignment(idx, &self.variables, &mut assignment);
            if fixed.iter().zip(evidence).any(|(&pos, &(_, v))| assignment[pos] != v) {
                continue;
            }
            mass += p;
            for (slot, &src) in out_assignment.iter_mut().zip(&keep) {
                *slot = assignment[src];
            }
            out_table[encode_assignment(&out_assignment, &out_vars)] += p;
        }
        if mass <= 0.0 {
            return Err(ProbError::ZeroProbabilityEvidence);
        }
        for p in &mut out_table {
            *p /= mass;
        }
        Ok(JointDistribution { variables: out_vars, table: out_table })
    }
}

fn check_disjoint(sets: &[&[&str]]) -> Result<(), ProbError> {
    let mut seen: Vec<&str> = Vec::new();
    for set in sets {
        for &l in *set {
            if seen.contains(&l) {
                return Err(ProbError::OverlappingLabels(l.to_string()));
            }
            seen.push(l);
        }
    }
    Ok(())
}

fn clamp_information(raw: f64) -> f64 {
    debug_assert!(raw > -NEGATIVITY_SLACK, "information quantity {raw} below noise floor");
    raw.max(0.0)
}

/// Encode a joint assignment as a flat index, last variable fastest.
pub(crate) fn encode_assignment(assignment: &[usize], variables: &[Variable]) -> usize {
    debug_assert_eq!(assignment.len(), variables.len());
    let mut idx = 0;
    for (a, v) in assignment.iter().zip(variables) {
        debug_assert!(*a < v.cardinality);
        idx = idx * v.cardinality + a;
    }
    idx
}

/// Decode a flat index into a joint assignment, last variable fastest.
pub(crate) fn decode_assignment(mut idx: usize, variables: &[Variable], out: &mut [usize]) {
    for (slot, v) in out.iter_mut().zip(variables).rev() {
        *slot = idx % v.cardinality;
        idx /= v.cardinality;
    }
}

fn shannon(table: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in table {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// Binary entropy h(p) = −p log₂ p − (1−p) log₂(1−p), in bits.
pub fn binary_entropy(p: f64) -> Result<f64, ProbError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProbError::Domain { value: p, domain: "[0, 1]" });
    }
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    Ok(h)
}

/// Partial sum of the series expansion of 1 − h((1+e)/2):
/// (1 / 2 ln 2) Σ_{q=1..terms} e^{2q} / (q (2q−1)).
///
/// This form avoids the catastrophic cancellation of evaluating
/// 1 − h((1+e)/2) directly when e is small, which is exactly the regime the
/// nested-protocol scans live in.
pub fn binary_entropy_series(e: f64, terms: usize) -> Result<f64, ProbError> {
    if !(0.0..1.0).contains(&e) {
        return Err(ProbError::Domain { value: e, domain: "[0, 1)" });
    }
    let e2 = e * e;
    let mut power = 1.0;
    let mut sum = 0.0;
    for q in 1..=terms {
        power *= e2;
        sum += power / (q as f64 * (2 * q - 1) as f64);
    }
    Ok(sum / (2.0 * std::f64::consts::LN_2))
}

/// Report for [`entropy_decomposition_residual`].
#[derive(Debug, Clone, Serialize)]
pub struct EntropyDecomposition {
    /// H(O)
    pub h_o: f64,
    /// I(O : N)
    pub i_o_n: f64,
    /// I(N O : Q)
    pub i_no_q: f64,
    /// H(O) − I(O:N) − I(NO:Q)
    pub residual: f64,
}

/// When N ⫫ Q and O is a function of (N, Q), the output entropy splits as
/// H(O) = I(O:N) + I(N O:Q). Returns the residual of that identity together
/// with its pieces; both preconditions are checked and reported by name when
/// violated beyond 1e-9.
pub fn entropy_decomposition_residual(
    dist: &JointDistribution,
    n: &[&str],
    q: &[&str],
    o: &[&str],
) -> Result<EntropyDecomposition, ProbError> {
    check_disjoint(&[n, q, o])?;
    // Independence of N and Q: max absolute deviation of p(n,q) from p(n)p(q).
    let nq: Vec<&str> = n.iter().chain(q.iter()).copied().collect();
    let joint_nq = dist.marginal(&nq)?;
    let marg_n = dist.marginal(n)?;
    let marg_q = dist.marginal(q)?;
    let mut dev = 0.0f64;
    let mut assignment = vec![0usize; joint_nq.variables.len()];
    for (idx, &p) in joint_nq.table.iter().enumerate() {
        decode_assignment(idx, &joint_nq.variables, &mut assignment);
        let pn = marg_n.table[encode_assignment(&assignment[..n.len()], &marg_n.variables)];
        let pq = marg_q.table[encode_assignment(&assignment[n.len()..], &marg_q.variables)];
        dev = dev.max((p - pn * pq).abs());
    }
    if dev > 1e-9 {
        return Err(ProbError::Precondition { condition: "N independent of Q", deviation: dev });
    }
    // O deterministic given (N, Q): H(O|NQ) = 0.
    let all: Vec<&str> = nq.iter().chain(o.iter()).copied().collect();
    let h_o_given_nq = dist.entropy(&all)? - dist.entropy(&nq)?;
    if h_o_given_nq.abs() > 1e-9 {
        return Err(ProbError::Precondition {
            condition: "O is a function of (N, Q)",
            deviation: h_o_given_nq.abs(),
        });
    }
    let h_o = dist.entropy(o)?;
    let i_o_n = dist.mutual_information_raw(o, n)?;
    let no: Vec<&str> = n.iter().chain(o.iter()).copied().collect();
    let i_no_q = dist.mutual_information_raw(&no, q)?;
    Ok(EntropyDecomposition { h_o, i_o_n, i_no_q, residual: h_o - i_o_n - i_no_q })
}
