//! Ontic ensembles over counterfactual assignments.
//!
//! A [`CounterfactualAssignment`] fixes, for every joint input of a set of
//! boxes, the output of each box — the complete "what would happen" record
//! for one value of the hidden variable. An [`OnticEnsemble`] is a
//! probability distribution over such assignments; marginalizing it
//! reproduces an operational [`Behavior`].
//!
//! On top of the data model sit the temporal-order sampler for quantum
//! states, the counterfactual-parameter-independence statistic, the
//! feasibility certificate for the extremal-box scenario, the crosswise
//! loop-composition check, and the two-ensemble demonstration that
//! operationally identical preparations can differ counterfactually.

use crate::boxes::{Behavior, BoxError, BoxShape};
use crate::lp::{LinearProgram, LpError};
use crate::prob::{JointDistribution, ProbError, Variable};
use crate::quantum::{born, post_measurement, CMat, DensityMatrix, MeasurementSet, QuantumError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Weight-sum tolerance for ensembles.
pub const WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CfError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("ensemble has empty support")]
    EmptySupport,
    #[error("exact enumeration too large: {0}")]
    ResourceLimit(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Number of joint inputs of a scenario.
fn joint_inputs(scenario: &[BoxShape]) -> usize {
    scenario.iter().map(|b| b.inputs).product()
}

fn joint_input_index(scenario: &[BoxShape], inputs: &[usize]) -> usize {
    let mut idx = 0;
    for (v, b) in inputs.iter().zip(scenario) {
        idx = idx * b.inputs + v;
    }
    idx
}

/// A total map from every joint input to each box's output.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CounterfactualAssignment {
    /// `maps[k][joint_input_index] = output of box k`.
    maps: Vec<Vec<usize>>,
}

impl CounterfactualAssignment {
    pub fn new(scenario: &[BoxShape], maps: Vec<Vec<usize>>) -> Result<Self, CfError> {
        if maps.len() != scenario.len() {
            return Err(CfError::Scenario("one map per box required".into()));
        }
        let n_in = joint_inputs(scenario);
        for (k, (map, shape)) in maps.iter().zip(scenario).enumerate() {
            if map.len() != n_in {
                return Err(CfError::Scenario(format!(
                    "box {k} map covers {} joint inputs, expected {n_in}",
                    map.len()
                )));
            }
            if map.iter().any(|&o| o >= shape.outputs) {
                return Err(CfError::Scenario(format!("box {k} map output out of range")));
            }
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    /// Output of box `k` at the given joint input.
    pub fn output(&self, scenario: &[BoxShape], k: usize, inputs: &[usize]) -> usize {
        self.maps[k][joint_input_index(scenario, inputs)]
    }
}

/// A probability distribution over joint counterfactual assignments.
#[derive(Debug, Clone, Serialize)]
pub struct OnticEnsemble {
    scenario: Vec<BoxShape>,
    support: Vec<CounterfactualAssignment>,
    weights: Vec<f64>,
}

impl OnticEnsemble {
    pub fn new(
        scenario: Vec<BoxShape>,
        support: Vec<CounterfactualAssignment>,
        weights: Vec<f64>,
    ) -> Result<Self, CfError> {
        if support.is_empty() {
            return Err(CfError::EmptySupport);
        }
        if support.len() != weights.len() {
            return Err(CfError::Scenario("one weight per assignment required".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(CfError::Scenario("negative weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(CfError::Scenario(format!("weights sum to {sum}, not 1")));
        }
        let n_in = joint_inputs(&scenario);
        for a in &support {
            if a.maps.len() != scenario.len()
                || a.maps.iter().any(|m| m.len() != n_in)
            {
                return Err(CfError::Scenario("assignment does not fit scenario".into()));
            }
        }
        Ok(Self { scenario, support, weights })
    }

    pub fn point_mass(
        scenario: Vec<BoxShape>,
        assignment: CounterfactualAssignment,
    ) -> Result<Self, CfError> {
        Self::new(scenario, vec![assignment], vec![1.0])
    }

    /// Deterministic bipartite ensemble from a response function a ↦ g for
    /// the first box (its own input is trivial); the second box outputs 0.
    pub fn from_response_fn(g_of_a: impl Fn(usize) -> usize) -> OnticEnsemble {
        let scenario = vec![BoxShape::new(1, 2), BoxShape::new(2, 2)];
        let maps = vec![vec![g_of_a(0), g_of_a(1)], vec![0, 0]];
        let assignment = CounterfactualAssignment::new(&scenario, maps).expect("fits");
        Self::point_mass(scenario, assignment).expect("point mass is valid")
    }

    pub fn scenario(&self) -> &[BoxShape] {
        &self.scenario
    }

    pub fn support(&self) -> &[CounterfactualAssignment] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Marginalizes the hidden variable: for each joint input, the output
    /// probabilities are the ensemble-weighted indicators of each
    /// assignment's outputs.
    pub fn to_behavior(&self) -> Behavior {
        Behavior::from_fn(self.scenario.clone(), |ins, outs| {
            let idx = joint_input_index(&self.scenario, ins);
            self.support
                .iter()
                .zip(&self.weights)
                .filter(|(a, _)| {
                    a.maps.iter().zip(outs).all(|(m, &o)| m[idx] == o)
                })
                .map(|(_, &w)| w)
                .sum()
        })
        .expect("ensemble marginal is a valid behavior")
    }
}

/// How to generate an ensemble: full tree with exact weights, or Monte Carlo.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum SampleMode {
    Exact,
    Sampled { count: u64, seed: u64 },
}

/// Ensemble over joint assignments generated by measuring the two parties in
/// a fixed temporal order.
///
/// Stage 1 draws an outcome for every first-party measurement from its Born
/// marginal, independently per measurement; the first box's counterfactual
/// outcome is therefore independent of the second box's input by
/// construction. Stage 2 draws, for each input pair, the second party's
/// outcome from the Lüders-updated state conditioned on stage 1's outcome
/// for that measurement. Exact mode enumerates the full tree.
pub fn temporal_ensemble(
    state: &DensityMatrix,
    first: &MeasurementSet,
    second: &MeasurementSet,
    mode: SampleMode,
) -> Result<OnticEnsemble, CfError> {
    if first.dim() * second.dim() != state.dim() {
        return Err(CfError::Quantum(QuantumError::DimensionMismatch(format!(
            "party dims {}·{} vs state dim {}",
            first.dim(),
            second.dim(),
            state.dim()
        ))));
    }
    let n_m = first.len();
    let n_a = second.len();
    let out0 = first.max_outcomes();
    let out1 = second.max_outcomes();
    let dims = [first.dim(), second.dim()];
    let id_first = CMat::identity(first.dim());
    let id_second = CMat::identity(second.dim());

    // Stage-1 Born marginals p(g | m).
    let mut p_g = vec![vec![0.0; out0]; n_m];
    for (m, row) in p_g.iter_mut().enumerate() {
        for (g, slot) in row.iter_mut().enumerate().take(first.measurement(m).effects.len()) {
            *slot = born(state, &[&first.measurement(m).effects[g], &id_second])?;
        }
    }
    // Stage-2 conditionals p(c | m, g, a) via the Lüders update.
    let mut p_c = vec![vec![vec![vec![0.0; out1]; n_a]; out0]; n_m];
    for m in 0..n_m {
        for g in 0..first.measurement(m).effects.len() {
            if p_g[m][g] <= 1e-14 {
                continue; // zero-probability branch, never reached
            }
            let updated = post_measurement(state, &first.measurement(m).kraus[g], 0, &dims)?;
            for a in 0..n_a {
                for (cc, effect) in second.measurement(a).effects.iter().enumerate() {
                    p_c[m][g][a][cc] = born(&updated, &[&id_first, effect])?;
                }
            }
        }
    }

    let scenario = vec![BoxShape::new(n_m, out0), BoxShape::new(n_a, out1)];
    let n_joint = n_m * n_a;

    match mode {
        SampleMode::Exact => {
            let gvec_count = (out0 as f64).powi(n_m as i32);
            let fmap_count = (out1 as f64).powi(n_joint as i32);
            if gvec_count * fmap_count > 1e7 {
                return Err(CfError::ResourceLimit(format!(
                    "{gvec_count} outcome vectors × {fmap_count} response maps"
                )));
            }
            let mut support = Vec::new();
            let mut weights = Vec::new();
            let mut gvec = vec![0usize; n_m];
            'outer: loop {
                let w1: f64 = gvec.iter().enumerate().map(|(m, &g)| p_g[m][g]).product();
                if w1 > 0.0 {
                    // Enumerate second-box maps over joint inputs (m, a).
                    let mut fmap = vec![0usize; n_joint];
                    loop {
                        let w2: f64 = (0..n_joint)
                            .map(|idx| {
                                let (m, a) = (idx / n_a, idx % n_a);
                                p_c[m][gvec[m]][a][fmap[idx]]
                            })
                            .product();
                        if w2 > 0.0 {
                            let box0_map: Vec<usize> =
                                (0..n_joint).map(|idx| gvec[idx / n_a]).collect();
                            support.push(CounterfactualAssignment {
                                maps: vec![box0_map, fmap.clone()],
                            });
                            weights.push(w1 * w2);
                        }
                        if !increment(&mut fmap, out1) {
                            break;
                        }
                    }
                }
                if !increment(&mut gvec, out0) {
                    break 'outer;
                }
            }
            // Defensive renormalization: the weights sum to 1 analytically;
            // float products can leave ~1e-15 dust.
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            OnticEnsemble::new(scenario, support, weights)
        }
        SampleMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(CfError::Scenario("sample count must be positive".into()));
            }
            let mut tally: BTreeMap<CounterfactualAssignment, u64> = BTreeMap::new();
            for trial in 0..count {
                // One independent, reproducible stream per trial.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial);
                let gvec: Vec<usize> =
                    (0..n_m).map(|m| draw(&p_g[m], &mut rng)).collect();
                let mut maps = vec![vec![0usize; n_joint]; 2];
                for idx in 0..n_joint {
                    let (m, a) = (idx / n_a, idx % n_a);
                    maps[0][idx] = gvec[m];
                    maps[1][idx] = draw(&p_c[m][gvec[m]][a], &mut rng);
                }
                *tally.entry(CounterfactualAssignment { maps }).or_insert(0) += 1;
            }
            let mut support = Vec::with_capacity(tally.len());
            let mut weights = Vec::with_capacity(tally.len());
            for (a, n) in tally {
                support.push(a);
                weights.push(n as f64 / count as f64);
            }
            OnticEnsemble::new(scenario, support, weights)
        }
    }
}

fn draw(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Odometer increment over fixed-radix digit vectors; false on wrap-around.
fn increment(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Per-conditioned-value entry of the CPI statistic.
#[derive(Debug, Clone, Serialize)]
pub struct CpiTerm {
    /// The second box's full response map (over joint inputs).
    pub response_map: Vec<usize>,
    pub weight: f64,
    /// I(g⃗ : a) after conditioning on this map, in bits.
    pub mutual_information: f64,
}

/// Result of [`cpi_statistic`].
#[derive(Debug, Clone, Serialize)]
pub struct CpiReport {
    /// Max over positive-weight response maps of I(g⃗ : a | map).
    pub statistic: f64,
    pub terms: Vec<CpiTerm>,
}

/// Counterfactual parameter independence statistic for a bipartite ensemble.
///
/// Box 0 is the outcome box (input m, counterfactual outcome g⃗); box 1 is
/// the parameter box (input a). For every second-box response map with
/// positive weight, computes I(g⃗ : a) in the conditioned sub-ensemble with
/// `a` drawn from `a_dist` (uniform by default); zero within tolerance for
/// every map certifies counterfactual parameter independence.
pub fn cpi_statistic(
    ensemble: &OnticEnsemble,
    a_dist: Option<&[f64]>,
) -> Result<CpiReport, CfError> {
    let scenario = &ensemble.scenario;
    if scenario.len() != 2 {
        return Err(CfError::Scenario("cpi statistic needs a bipartite ensemble".into()));
    }
    let (n_m, out0) = (scenario[0].inputs, scenario[0].outputs);
    let n_a = scenario[1].inputs;
    let gvec_card = out0.checked_pow(n_m as u32).filter(|&c| c <= 1 << 20).ok_or_else(
        || CfError::ResourceLimit("outcome-vector alphabet too large".into()),
    )?;
    let uniform = vec![1.0 / n_a as f64; n_a];
    let a_probs = match a_dist {
        Some(d) => {
            if d.len() != n_a || (d.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(CfError::Scenario("input distribution must sum to 1 over a".into()));
            }
            d.to_vec()
        }
        None => uniform,
    };

    // Group the support by the second box's response map.
    let mut groups: BTreeMap<&Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, a) in ensemble.support.iter().enumerate() {
        groups.entry(&a.maps[1]).or_default().push(i);
    }

    let mut terms = Vec::new();
    let mut statistic = 0.0f64;
    for (map, members) in groups {
        let group_weight: f64 = members.iter().map(|&i| ensemble.weights[i]).sum();
        if group_weight <= 0.0 {
            continue;
        }
        let variables = vec![
            Variable::new("gvec", gvec_card),
            Variable::new("a", n_a),
        ];
        let mut table = vec![0.0; gvec_card * n_a];
        for &i in &members {
            let w = ensemble.weights[i] / group_weight;
            let box0 = &ensemble.support[i].maps[0];
            for (a_val, &pa) in a_probs.iter().enumerate() {
                // Outcome vector over m at this value of a.
                let mut code = 0usize;
                for m in 0..n_m {
                    code = code * out0 + box0[m * n_a + a_val];
                }
                table[code * n_a + a_val] += w * pa;
            }
        }
        let dist = JointDistribution::new(variables, table)?;
        let mi = dist.mutual_information(&["gvec"], &["a"])?;
        statistic = statistic.max(mi);
        terms.push(CpiTerm {
            response_map: map.clone(),
            weight: group_weight,
            mutual_information: mi,
        });
    }
    if terms.is_empty() {
        return Err(CfError::EmptySupport);
    }
    Ok(CpiReport { statistic, terms })
}

/// Which family of second-box response maps a feasibility search ranges
/// over, and whether parameter independence is imposed in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CpiFamily {
    /// Second-box map depends only on its own input a.
    Restricted,
    /// Second-box map may depend on both inputs; independence imposed for
    /// the first box only.
    General,
    /// Both-box maps unrestricted; independence imposed in both directions.
    GeneralSymmetric,
}

/// Verdict of one family's linear feasibility search.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyVerdict {
    pub family: CpiFamily,
    pub candidates: usize,
    pub feasible: bool,
    /// Phase-1 infeasibility mass (≈0 when feasible).
    pub gap: f64,
    /// A satisfying ensemble when one exists.
    pub witness: Option<OnticEnsemble>,
    /// Human-readable violated constraints when none exists.
    pub violated: Vec<String>,
}

/// Certificate for the question: can any ensemble reproduce the isotropic
/// binary box at correlator `e` while satisfying counterfactual parameter
/// independence?
#[derive(Debug, Clone, Serialize)]
pub struct CpiFeasibilityCertificate {
    pub correlator: f64,
    pub restricted: FamilyVerdict,
    pub general: FamilyVerdict,
    pub general_symmetric: FamilyVerdict,
}

impl CpiFeasibilityCertificate {
    /// Headline verdict: the restricted family is the scenario's own
    /// impossibility argument (the second box's outcome as a function of a
    /// alone).
    pub fn infeasible(&self) -> bool {
        !self.restricted.feasible
    }
}

/// Runs the feasibility search for the extremal box: `cpi_feasibility(1.0)`.
pub fn pr_cpi_infeasible() -> Result<CpiFeasibilityCertificate, CfError> {
    cpi_feasibility(1.0)
}

/// Linear feasibility search over ensemble weights for the binary bipartite
/// isotropic scenario at correlator `e`, for all three constraint families.
///
/// Candidate assignments give both boxes arbitrary joint-input-dependent
/// binary responses (16 × 16 = 256; the restricted family keeps the 64 whose
/// second-box map ignores m). Constraints: (i) the marginal behavior equals
/// the isotropic table, (ii) conditional on each response map of the
/// conditioned box, the other box's outcome vector distribution is
/// independent of the conditioning box's input. Both constraint sets are
/// linear in the weights, so infeasibility is decided exactly by phase-1
/// simplex (up to 1e-9 tolerance).
pub fn cpi_feasibility(e: f64) -> Result<CpiFeasibilityCertificate, CfError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(CfError::Scenario(format!("correlator {e} outside [0, 1]")));
    }
    let restricted = family_search(e, CpiFamily::Restricted)?;
    let general = family_search(e, CpiFamily::General)?;
    let general_symmetric = family_search(e, CpiFamily::GeneralSymmetric)?;
    Ok(CpiFeasibilityCertificate { correlator: e, restricted, general, general_symmetric })
}

/// Evaluate a 4-bit response map at joint input (m, a).
fn eval4(map: usize, m: usize, a: usize) -> usize {
    (map >> (m * 2 + a)) & 1
}

fn family_search(e: f64, family: CpiFamily) -> Result<FamilyVerdict, CfError> {
    let scenario = vec![BoxShape::binary(), BoxShape::binary()];
    // Candidates: (g-map, c-map) pairs, each a 4-bit joint-input map.
    let c_maps: Vec<usize> = match family {
        CpiFamily::Restricted => (0..16)
            .filter(|&f| (0..2).all(|a| eval4(f, 0, a) == eval4(f, 1, a)))
            .collect(),
        _ => (0..16).collect(),
    };
    let candidates: Vec<(usize, usize)> =
        (0..16).flat_map(|g| c_maps.iter().map(move |&c| (g, c))).collect();
    let n = candidates.len();
    let mut lp = LinearProgram::new(n);

    // (i) Statistics: for each joint input and output pair, the weighted
    // indicator mass equals the isotropic probability.
    for m in 0..2usize {
        for a in 0..2usize {
            for g in 0..2usize {
                for cc in 0..2usize {
                    let target = if g ^ cc == m & a { 0.25 * (1.0 + e) } else { 0.25 * (1.0 - e) };
                    let terms: Vec<(usize, f64)> = candidates
                        .iter()
                        .enumerate()
                        .filter(|(_, &(gm, cm))| eval4(gm, m, a) == g && eval4(cm, m, a) == cc)
                        .map(|(i, _)| (i, 1.0))
                        .collect();
                    lp.add_sparse_equality(&terms, target)?;
                }
            }
        }
    }
    // (ii) Independence of the first box's outcome vector from a, per c-map.
    for &phi in &c_maps {
        for gvec in 0..4usize {
            // gvec codes (g at m=0, g at m=1).
            let mass = |a: usize| -> Vec<(usize, f64)> {
                candidates
                    .iter()
                    .enumerate()
                    .filter(|(_, &(gm, cm))| {
                        cm == phi
                            && eval4(gm, 0, a) == (gvec >> 1) & 1
                            && eval4(gm, 1, a) == gvec & 1
                    })
                    .map(|(i, _)| (i, 1.0))
                    .collect()
            };
            let mut row = mass(0);
            for (i, coef) in mass(1) {
                row.push((i, -coef));
            }
            lp.add_sparse_equality(&row, 0.0)?;
        }
    }
    // Mirror direction for the symmetric family: the second box's outcome
    // vector over a must be independent of m, per g-map.
    if family == CpiFamily::GeneralSymmetric {
        for gamma in 0..16usize {
            for cvec in 0..4usize {
                let mass = |m: usize| -> Vec<(usize, f64)> {
                    candidates
                        .iter()
                        .enumerate()
                        .filter(|(_, &(gm, cm))| {
                            gm == gamma
                                && eval4(cm, m, 0) == (cvec >> 1) & 1
                                && eval4(cm, m, 1) == cvec & 1
                        })
                        .map(|(i, _)| (i, 1.0))
                        .collect()
                };
                let mut row = mass(0);
                for (i, coef) in mass(1) {
                    row.push((i, -coef));
                }
                lp.add_sparse_equality(&row, 0.0)?;
            }
        }
    }
    let normalization: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    lp.add_sparse_equality(&normalization, 1.0)?;

    let feasibility = lp.feasibility()?;
    let witness = feasibility.witness.as_ref().map(|w| {
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for (i, &wi) in w.iter().enumerate() {
            if wi > 1e-12 {
                let (gm, cm) = candidates[i];
                let maps = vec![
                    (0..4).map(|idx| eval4(gm, idx / 2, idx % 2)).collect(),
                    (0..4).map(|idx| eval4(cm, idx / 2, idx % 2)).collect(),
                ];
                support.push(CounterfactualAssignment { maps });
                weights.push(wi);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= total);
        OnticEnsemble::new(scenario.clone(), support, weights)
            .expect("feasible witness is a valid ensemble")
    });
    let violated = if feasibility.feasible {
        Vec::new()
    } else {
        violated_constraints(e, family)
    };
    Ok(FamilyVerdict {
        family,
        candidates: n,
        feasible: feasibility.feasible,
        gap: feasibility.gap,
        witness,
        violated,
    })
}

/// Human-readable account of why the search failed. At e = 1 the statistics
/// force the first box's map pointwise, and the conditioned outcome vectors
/// disagree across a on every candidate.
fn violated_constraints(e: f64, family: CpiFamily) -> Vec<String> {
    let mut out = Vec::new();
    if e >= 1.0 && family == CpiFamily::Restricted {
        for f in 0..4usize {
            let (f0, f1) = (f & 1, (f >> 1) & 1);
            // Forced first-box responses: g(m, a) = m·a ⊕ f(a).
            let gvec_a0 = (f0, f0);
            let gvec_a1 = (f1, 1 - f1);
            out.push(format!(
                "response map c(a)=({f0},{f1}): outcome vector is {gvec_a0:?} at a=0 but \
                 {gvec_a1:?} at a=1 (g_m0 ⊕ g_m1 = a), so independence forces its weight to 0"
            ));
        }
        out.push(
            "all four a-only response maps carry zero weight, contradicting normalization"
                .to_string(),
        );
    } else {
        out.push(format!(
            "statistics (16 equalities at e={e}) + independence equalities admit no \
             nonnegative normalized weights"
        ));
    }
    out
}

/// Report of the crosswise loop composition of two bipartite ensembles.
#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    /// Probability mass of assignment pairs with no consistent outcome pair.
    pub contradiction_fraction: f64,
    pub unique_fraction: f64,
    pub multiple_fraction: f64,
    /// Distribution over consistent (g_x, g_y), multiple solutions split
    /// equally, renormalized to the consistent mass.
    pub outcome_distribution: Option<JointDistribution>,
    /// H(g_x g_y) of the consistent-outcome distribution.
    pub outcome_entropy: f64,
    /// I(g_x : g_y) of the consistent-outcome distribution.
    pub outcome_mutual_information: f64,
    /// Residual entropy of the outcomes given both hidden variables:
    /// average log₂(number of solutions) over consistent pairs. Zero means
    /// the composition remained deterministic.
    pub entropy_given_ontic: f64,
}

/// Composes two bipartite binary ensembles crosswise: the first box's
/// outcome of each copy feeds the second box's input of the other copy.
/// For every pair of hidden-variable values the fixed-point system
/// g_x = G_x(g_y), g_y = G_y(g_x) is solved exactly; pairs with no solution
/// are causal-loop contradictions, pairs with several are underdetermined.
///
/// Each assignment's response function is its first-box map evaluated at
/// the first listed own-input.
pub fn loop_compose(ex: &OnticEnsemble, ey: &OnticEnsemble) -> Result<LoopReport, CfError> {
    for e in [ex, ey] {
        let s = e.scenario();
        if s.len() != 2 || s[0].outputs != 2 || s[1].inputs != 2 {
            return Err(CfError::Scenario(
                "loop composition needs bipartite ensembles with binary first-box output \
                 and binary second-box input"
                    .into(),
            ));
        }
    }
    let response = |e: &OnticEnsemble, i: usize, a: usize| -> usize {
        // Joint input (m = 0, a); box 0's map.
        let n_a = e.scenario[1].inputs;
        e.support[i].maps[0][a % n_a]
    };
    let mut contradiction = 0.0;
    let mut unique = 0.0;
    let mut multiple = 0.0;
    let mut outcome_mass = vec![0.0f64; 4];
    let mut entropy_given_ontic = 0.0;
    for (ix, &wx) in ex.weights.iter().enumerate() {
        for (iy, &wy) in ey.weights.iter().enumerate() {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let solutions: Vec<(usize, usize)> = (0..2usize)
                .flat_map(|gx| (0..2usize).map(move |gy| (gx, gy)))
                .filter(|&(gx, gy)| {
                    gx == response(ex, ix, gy) && gy == response(ey, iy, gx)
                })
                .collect();
            match solutions.len() {
                0 => contradiction += w,
                1 => unique += w,
                _ => multiple += w,
            }
            if !solutions.is_empty() {
                let share = w / solutions.len() as f64;
                for &(gx, gy) in &solutions {
                    outcome_mass[gx * 2 + gy] += share;
                }
                entropy_given_ontic += w * (solutions.len() as f64).log2();
            }
        }
    }
    let consistent = unique + multiple;
    let outcome_distribution = if consistent > 0.0 {
        let table: Vec<f64> = outcome_mass.iter().map(|&m| m / consistent).collect();
        Some(JointDistribution::new(
            vec![Variable::new("g_x", 2), Variable::new("g_y", 2)],
            table,
        )?)
    } else {
        None
    };
    let (outcome_entropy, outcome_mutual_information) = match &outcome_distribution {
        Some(d) => (
            d.entropy(&["g_x", "g_y"])?,
            d.mutual_information(&["g_x"], &["g_y"])?,
        ),
        None => (0.0, 0.0),
    };
    Ok(LoopReport {
        contradiction_fraction: contradiction,
        unique_fraction: unique,
        multiple_fraction: multiple,
        outcome_distribution,
        outcome_entropy,
        outcome_mutual_information,
        entropy_given_ontic: if consistent > 0.0 { entropy_given_ontic / consistent } else { 0.0 },
    })
}

/// Output of [`contextuality_demo`].
#[derive(Debug, Clone, Serialize)]
pub struct ContextualityReport {
    pub ensemble_correlated: OnticEnsemble,
    pub ensemble_anticorrelated: OnticEnsemble,
    /// Total-variation distance between the two operational behaviors
    /// (maximum over inputs).
    pub operational_tv_distance: f64,
    pub counterfactual_correlation_x: f64,
    pub counterfactual_correlation_y: f64,
    /// |corr_X − corr_Y|.
    pub correlation_difference: f64,
    /// p(second outcome = 0 | first outcome = 0) for each ensemble.
    pub conditional_x: f64,
    pub conditional_y: f64,
}

/// Two single-box ensembles over assignments for two incompatible
/// measurements: one perfectly correlates the prescribed outcomes, the other
/// perfectly anticorrelates them. Their operational statistics coincide
/// (uniform outcomes for either measurement) while the counterfactual
/// correlations differ by 2.
pub fn contextuality_demo() -> Result<ContextualityReport, CfError> {
    let scenario = vec![BoxShape::new(2, 2)];
    let make = |pairs: [[usize; 2]; 2]| -> Result<OnticEnsemble, CfError> {
        let support = pairs
            .iter()
            .map(|p| CounterfactualAssignment::new(&scenario, vec![p.to_vec()]))
            .collect::<Result<Vec<_>, _>>()?;
        OnticEnsemble::new(scenario.clone(), support, vec![0.5, 0.5])
    };
    let correlated = make([[0, 0], [1, 1]])?;
    let anticorrelated = make([[0, 1], [1, 0]])?;

    let bx = correlated.to_behavior();
    let by = anticorrelated.to_behavior();
    let mut tv = 0.0f64;
    for input in 0..2 {
        let d: f64 = (0..2)
            .map(|o| (bx.prob(&[input], &[o]) - by.prob(&[input], &[o])).abs())
            .sum::<f64>()
            / 2.0;
        tv = tv.max(d);
    }
    let correlation = |e: &OnticEnsemble| -> f64 {
        e.support
            .iter()
            .zip(&e.weights)
            .map(|(a, &w)| {
                let s0 = if a.maps[0][0] == 0 { 1.0 } else { -1.0 };
                let s1 = if a.maps[0][1] == 0 { 1.0 } else { -1.0 };
                w * s0 * s1
            })
            .sum()
    };
    let cx = correlation(&correlated);
    let cy = correlation(&anticorrelated);
    // Prediction for the second measurement after conditioning on the first
    // measurement's prescribed outcome being 0.
    let conditional = |e: &OnticEnsemble| -> f64 {
        let mass: f64 = e
            .support
            .iter()
            .zip(&e.weights)
            .filter(|(a, _)| a.maps[0][0] == 0)
            .map(|(_, &w)| w)
            .sum();
        e.support
            .iter()
            .zip(&e.weights)
            .filter(|(a, _)| a.maps[0][0] == 0 && a.maps[0][1] == 0)
            .map(|(_, &w)| w)
            .sum::<f64>()
            / mass
    };
    let conditional_x = conditional(&correlated);
    let conditional_y = conditional(&anticorrelated);
    Ok(ContextualityReport {
        ensemble_correlated: correlated,
        ensemble_anticorrelated: anticorrelated,
        operational_tv_distance: tv,
        counterfactual_correlation_x: cx,
        counterfactual_correlation_y: cy,
        correlation_difference: (cx - cy).abs(),
        conditional_x,
        conditional_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chsh, ChshPairing};
    use std::f64::consts::PI;

    fn isotropic_realization() -> (DensityMatrix, MeasurementSet, MeasurementSet) {
        // Planar angles for which the singlet behavior is isotropic at
        // e = 1/√2 in the fixed sign convention.
        let first = MeasurementSet::planar(&[0.0, 3.0 * PI / 2.0]);
        let second = MeasurementSet::planar(&[3.0 * PI / 4.0, 5.0 * PI / 4.0]);
        (crate::quantum::singlet(), first, second)
    }

    #[test]
    fn point_mass_marginalizes_to_deterministic_behavior() {
        let scenario = vec![BoxShape::binary(), BoxShape::binary()];
        let a = CounterfactualAssignment::new(
            &scenario,
            vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1]],
        )
        .unwrap();
        let e = OnticEnsemble::point_mass(scenario, a).unwrap();
        let b = e.to_behavior();
        assert_eq!(b.prob(&[1, 0], &[1, 0]), 1.0);
        assert_eq!(b.prob(&[0, 1], &[0, 1]), 1.0);
        assert_eq!(b.prob(&[0, 1], &[1, 1]), 0.0);
    }

    #[test]
    fn uniform_identity_negation_single_box_is_uniform() {
        let scenario = vec![BoxShape::new(2, 2)];
        let id = CounterfactualAssignment::new(&scenario, vec![vec![0, 1]]).unwrap();
        let neg = CounterfactualAssignment::new(&scenario, vec![vec![1, 0]]).unwrap();
        let e = OnticEnsemble::new(scenario, vec![id, neg], vec![0.5, 0.5]).unwrap();
        let b = e.to_behavior();
        for input in 0..2 {
            for output in 0..2 {
                assert_eq!(b.prob(&[input], &[output]), 0.5);
            }
        }
    }

    #[test]
    fn exact_temporal_ensemble_reproduces_the_born_table() {
        let (state, first, second) = isotropic_realization();
        let e = temporal_ensemble(&state, &first, &second, SampleMode::Exact).unwrap();
        let b = e.to_behavior();
        let reference = Behavior::from_quantum(&state, &[&first, &second]).unwrap();
        for (x, y) in b.table().iter().zip(reference.table()) {
            assert!((x - y).abs() < 1e-10);
        }
        // The behavior is the Tsirelson-saturating isotropic box.
        let v = chsh(&b, &ChshPairing::canonical()).unwrap();
        assert!((v - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn product_state_ensemble_has_input_independent_outcome_box() {
        let state = crate::quantum::computational_product(&[0, 0]);
        let first = MeasurementSet::planar(&[0.0, PI / 3.0]);
        let second = MeasurementSet::planar(&[0.2, 2.0]);
        let e = temporal_ensemble(&state, &first, &second, SampleMode::Exact).unwrap();
        // Box 0's map never depends on a, by construction of the sampler.
        for a in e.support() {
            for m in 0..2 {
                assert_eq!(a.maps()[0][m * 2], a.maps()[0][m * 2 + 1]);
            }
        }
        let r = cpi_statistic(&e, None).unwrap();
        assert!(r.statistic < 1e-12);
    }

    #[test]
    fn temporal_ensemble_satisfies_parameter_independence() {
        let (state, first, second) = isotropic_realization();
        let e = temporal_ensemble(&state, &first, &second, SampleMode::Exact).unwrap();
        let r = cpi_statistic(&e, None).unwrap();
        assert!(r.statistic < 1e-10, "cpi statistic {}", r.statistic);
        // Every conditioned branch individually vanishes.
        for t in &r.terms {
            assert!(t.mutual_information < 1e-10);
        }
    }

    #[test]
    fn conditioning_matches_filtered_frequencies() {
        // The distribution over outcome vectors after conditioning on one
        // response map equals the directly filtered weights.
        let (state, first, second) = isotropic_realization();
        let e = temporal_ensemble(&state, &first, &second, SampleMode::Exact).unwrap();
        let phi = e.support()[0].maps()[1].clone();
        let filtered: f64 = e
            .support()
            .iter()
            .zip(e.weights())
            .filter(|(a, _)| a.maps()[1] == phi)
            .map(|(_, &w)| w)
            .sum();
        let report = cpi_statistic(&e, None).unwrap();
        let term = report.terms.iter().find(|t| t.response_map == phi).unwrap();
        assert!((term.weight - filtered).abs() < 1e-12);
    }

    #[test]
    fn pr_reproducing_ensemble_violates_parameter_independence() {
        // The temporal-order construction applied to the extremal box: the
        // response g(m, a) = m·a ⊕ f(a) forced by the statistics.
        let scenario = vec![BoxShape::binary(), BoxShape::binary()];
        let mut support = Vec::new();
        for f in 0..4usize {
            let (f0, f1) = (f & 1, (f >> 1) & 1);
            let g_map = vec![f0, f1, f0, 1 - f1]; // m·a ⊕ f(a) over (m,a)=00,01,10,11
            let c_map = vec![f0, f1, f0, f1];
            support.push(
                CounterfactualAssignment::new(&scenario, vec![g_map, c_map]).unwrap(),
            );
        }
        let e = OnticEnsemble::new(scenario, support, vec![0.25; 4]).unwrap();
        // Sanity: this really is the extremal box.
        let b = e.to_behavior();
        assert_eq!(b.table(), Behavior::pr_box().table());
        let r = cpi_statistic(&e, None).unwrap();
        assert!(r.statistic > 0.99, "got {}", r.statistic);
    }

    #[test]
    fn sampled_mode_is_deterministic_and_consistent() {
        let (state, first, second) = isotropic_realization();
        let s1 =
            temporal_ensemble(&state, &first, &second, SampleMode::Sampled { count: 2000, seed: 5 })
                .unwrap();
        let s2 =
            temporal_ensemble(&state, &first, &second, SampleMode::Sampled { count: 2000, seed: 5 })
                .unwrap();
        assert_eq!(s1.weights(), s2.weights());
        assert_eq!(s1.support(), s2.support());
        let exact = temporal_ensemble(&state, &first, &second, SampleMode::Exact).unwrap();
        // Sampled behavior close to exact at the statistical scale.
        let bs = s1.to_behavior();
        let be = exact.to_behavior();
        let n_per_row = 2000.0;
        for (x, y) in bs.table().iter().zip(be.table()) {
            let sigma = (y * (1.0 - y) / n_per_row).sqrt().max(1e-3);
            assert!((x - y).abs() < 6.0 * sigma, "sampled {x} vs exact {y}");
        }
    }

    #[test]
    fn extremal_box_search_is_infeasible_and_controls_are_feasible() {
        let cert = pr_cpi_infeasible().unwrap();
        assert!(cert.infeasible());
        assert!(!cert.restricted.feasible);
        assert!(!cert.general_symmetric.feasible);
        assert!(!cert.restricted.violated.is_empty());
        // One-directional independence with unrestricted response maps is
        // satisfiable even at e = 1 (the temporal-order construction).
        assert!(cert.general.feasible);
        let witness = cert.general.witness.as_ref().unwrap();
        assert_eq!(witness.to_behavior().table(), Behavior::pr_box().table());
        assert!(cpi_statistic(witness, None).unwrap().statistic < 1e-9);

        let control = cpi_feasibility(0.0).unwrap();
        assert!(!control.infeasible());
        assert!(control.restricted.feasible);
        assert!(control.general.feasible);
        assert!(control.general_symmetric.feasible);
    }

    #[test]
    fn tsirelson_correlator_is_feasible_in_the_general_family() {
        let e = std::f64::consts::FRAC_1_SQRT_2;
        let cert = cpi_feasibility(e).unwrap();
        assert!(cert.general.feasible);
        // The quantum temporal construction is itself a witness: it has the
        // isotropic statistics and vanishing cpi statistic (checked in
        // `temporal_ensemble_satisfies_parameter_independence`); the nonlocal
        // correlator makes the a-only family infeasible.
        assert!(!cert.restricted.feasible);
        let witness = cert.general.witness.as_ref().unwrap();
        let b = witness.to_behavior();
        let iso = Behavior::isotropic(e).unwrap();
        for (x, y) in b.table().iter().zip(iso.table()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn local_correlator_is_feasible_in_the_restricted_family() {
        // e = 0.4 sits inside the classical region (CHSH = 1.6 ≤ 2).
        let cert = cpi_feasibility(0.4).unwrap();
        assert!(cert.restricted.feasible);
        let witness = cert.restricted.witness.as_ref().unwrap();
        let r = cpi_statistic(witness, None).unwrap();
        assert!(r.statistic < 1e-9);
    }

    #[test]
    fn deterministic_loop_fixed_points() {
        let constant0 = OnticEnsemble::from_response_fn(|_| 0);
        let constant1 = OnticEnsemble::from_response_fn(|_| 1);
        let r = loop_compose(&constant0, &constant1).unwrap();
        assert_eq!(r.unique_fraction, 1.0);
        assert_eq!(r.contradiction_fraction, 0.0);
        assert_eq!(r.entropy_given_ontic, 0.0);

        let identity = OnticEnsemble::from_response_fn(|a| a);
        let negation = OnticEnsemble::from_response_fn(|a| 1 - a);
        let r = loop_compose(&identity, &negation).unwrap();
        assert_eq!(r.contradiction_fraction, 1.0);
        assert!(r.outcome_distribution.is_none());

        // Identity crossed with identity: both (0,0) and (1,1) are fixed
        // points; the composition is underdetermined.
        let identity2 = OnticEnsemble::from_response_fn(|a| a);
        let r = loop_compose(&identity, &identity2).unwrap();
        assert_eq!(r.multiple_fraction, 1.0);
        assert_eq!(r.entropy_given_ontic, 1.0);
    }

    #[test]
    fn temporal_ensembles_crossed_never_contradict() {
        let (state, first, second) = isotropic_realization();
        let e = temporal_ensemble(&state, &first, &second, SampleMode::Exact).unwrap();
        let r = loop_compose(&e, &e).unwrap();
        assert_eq!(r.contradiction_fraction, 0.0);
        assert_eq!(r.multiple_fraction, 0.0);
        assert!((r.unique_fraction - 1.0).abs() < 1e-12);
        assert_eq!(r.entropy_given_ontic, 0.0);
    }

    #[test]
    fn contextuality_demo_matches_the_construction() {
        let r = contextuality_demo().unwrap();
        assert_eq!(r.operational_tv_distance, 0.0);
        assert_eq!(r.counterfactual_correlation_x, 1.0);
        assert_eq!(r.counterfactual_correlation_y, -1.0);
        assert_eq!(r.correlation_difference, 2.0);
        // Conditioning on the first measurement's outcome flips the
        // prediction for the second between the two ensembles.
        assert_eq!(r.conditional_x, 1.0);
        assert_eq!(r.conditional_y, 0.0);
    }

    #[test]
    fn ensemble_serializes_with_assignments_and_weights() {
        let e = OnticEnsemble::from_response_fn(|a| a);
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"support\""));
        assert!(json.contains("\"weights\""));
        assert!(json.contains("\"maps\""));
    }
}
