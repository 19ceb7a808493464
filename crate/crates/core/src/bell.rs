//! CHSH quantities, the depolarizing twirl, and the monogamy bounds.
//!
//! Correlators map binary outputs to ±1 as 0 → +1, 1 → −1. The CHSH sign
//! pattern is fixed to (+, +, +, −): the pairing's second input on both
//! boxes carries the minus sign. CHSH values are relabelling-covariant in
//! sign, so bound checks compare magnitudes.

use crate::boxes::{Behavior, BoxError};
use serde::Serialize;
use thiserror::Error;

/// Classical bound on |CHSH|.
pub const CLASSICAL_BOUND: f64 = 2.0;
/// Quantum (Tsirelson) bound on |CHSH|: 2√2.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;
/// Algebraic bound on |CHSH|.
pub const ALGEBRAIC_BOUND: f64 = 4.0;
/// Linear monogamy bound for no-signalling boxes.
pub const MONOGAMY_NS_BOUND: f64 = 4.0;
/// Quadratic monogamy bound for quantum boxes.
pub const MONOGAMY_QUANTUM_BOUND: f64 = 8.0;

#[derive(Debug, Error)]
pub enum BellError {
    #[error("correlators require binary outputs on both boxes")]
    NonBinaryOutputs,
    #[error("pairing input {0} outside the box's alphabet")]
    InputOutOfRange(usize),
    #[error("pairing must use two distinct inputs per box")]
    DegeneratePairing,
    #[error("monogamy pairings must share the same two inputs on the common box")]
    MismatchedSharedInputs,
    #[error(transparent)]
    Box(#[from] BoxError),
}

/// Input labels defining a CHSH quantity between two boxes of a behavior.
/// The sign pattern is fixed to (+, +, +, −).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChshPairing {
    pub box_a: usize,
    pub box_b: usize,
    /// The two input labels playing the roles M⁰, M¹ on box `box_a`.
    pub inputs_a: (usize, usize),
    /// Likewise for box `box_b`.
    pub inputs_b: (usize, usize),
}

impl ChshPairing {
    /// Canonical bipartite pairing: boxes (0, 1), inputs (0, 1) on each.
    pub fn canonical() -> Self {
        Self { box_a: 0, box_b: 1, inputs_a: (0, 1), inputs_b: (0, 1) }
    }

    pub fn between(box_a: usize, box_b: usize) -> Self {
        Self { box_a, box_b, inputs_a: (0, 1), inputs_b: (0, 1) }
    }

    fn validate(&self, b: &Behavior) -> Result<(), BellError> {
        let shapes = b.boxes();
        for (bx, (i0, i1)) in
            [(self.box_a, self.inputs_a), (self.box_b, self.inputs_b)]
        {
            let shape = shapes[bx];
            if shape.outputs != 2 {
                return Err(BellError::NonBinaryOutputs);
            }
            if i0 >= shape.inputs || i1 >= shape.inputs {
                return Err(BellError::InputOutOfRange(i0.max(i1)));
            }
            if i0 == i1 {
                return Err(BellError::DegeneratePairing);
            }
        }
        Ok(())
    }
}

/// ⟨A·B⟩ for one input pair of a bipartite binary-output behavior.
pub fn correlator(b: &Behavior, input_a: usize, input_b: usize) -> Result<f64, BellError> {
    if b.n_boxes() != 2 || b.boxes().iter().any(|s| s.outputs != 2) {
        return Err(BellError::NonBinaryOutputs);
    }
    let mut e = 0.0;
    for ga in 0..2usize {
        for gb in 0..2usize {
            let sign = if ga == gb { 1.0 } else { -1.0 };
            e += sign * b.prob(&[input_a, input_b], &[ga, gb]);
        }
    }
    Ok(e)
}

/// The four-term signed CHSH sum for the given pairing. For behaviors with
/// more than two boxes the pair is first marginalized out (which requires
/// no-signalling).
pub fn chsh(b: &Behavior, pairing: &ChshPairing) -> Result<f64, BellError> {
    pairing.validate(b)?;
    let pair = if b.n_boxes() == 2 && pairing.box_a == 0 && pairing.box_b == 1 {
        b.clone()
    } else {
        b.marginal_boxes(&[pairing.box_a, pairing.box_b])?
    };
    let (a0, a1) = pairing.inputs_a;
    let (b0, b1) = pairing.inputs_b;
    let value = correlator(&pair, a0, b0)?
        + correlator(&pair, a0, b1)?
        + correlator(&pair, a1, b0)?
        - correlator(&pair, a1, b1)?;
    debug_assert!(value.abs() <= ALGEBRAIC_BOUND + 1e-9);
    Ok(value)
}

/// XOR twirl of a binary bipartite behavior.
///
/// Averages over shared random bits (u, v, w): inputs are shifted to
/// (m⊕u, a⊕v) and the outputs compensated as g ← g̃ ⊕ m·v ⊕ u·v ⊕ w,
/// c ← c̃ ⊕ u·a ⊕ w, which preserves the parity g⊕c⊕m·a pointwise. The
/// result is isotropic: uniform output marginals and an input-independent
/// success probability, with the CHSH value unchanged.
pub fn depolarize(b: &Behavior) -> Result<Behavior, BellError> {
    if b.n_boxes() != 2
        || b.boxes().iter().any(|s| s.inputs != 2 || s.outputs != 2)
    {
        return Err(BellError::NonBinaryOutputs);
    }
    let twirled = Behavior::from_fn(b.boxes().to_vec(), |ins, outs| {
        let (m, a) = (ins[0], ins[1]);
        let (g, c) = (outs[0], outs[1]);
        let mut total = 0.0;
        for u in 0..2usize {
            for v in 0..2usize {
                for w in 0..2usize {
                    let g_inner = g ^ (m & v) ^ (u & v) ^ w;
                    let c_inner = c ^ (u & a) ^ w;
                    total += b.prob(&[m ^ u, a ^ v], &[g_inner, c_inner]);
                }
            }
        }
        total / 8.0
    })?;
    Ok(twirled)
}

/// Correlator of an isotropic-form behavior: e = CHSH/4 under the canonical
/// pairing.
pub fn isotropic_correlator(b: &Behavior) -> Result<f64, BellError> {
    Ok(chsh(b, &ChshPairing::canonical())? / 4.0)
}

/// Report of a linear (no-signalling) monogamy check.
#[derive(Debug, Clone, Serialize)]
pub struct MonogamyNsReport {
    pub chsh_13: f64,
    pub chsh_23: f64,
    pub sum: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Report of a quadratic (quantum) monogamy check. The verdict is a check,
/// not an enforcement: super-quantum behaviors simply report `pass: false`.
#[derive(Debug, Clone, Serialize)]
pub struct MonogamyQuantumReport {
    pub chsh_13: f64,
    pub chsh_23: f64,
    pub sum_of_squares: f64,
    pub bound: f64,
    pub pass: bool,
}

fn monogamy_chsh_pair(
    b: &Behavior,
    pairing_13: &ChshPairing,
    pairing_23: &ChshPairing,
) -> Result<(f64, f64), BellError> {
    if pairing_13.box_b != pairing_23.box_b || pairing_13.inputs_b != pairing_23.inputs_b {
        return Err(BellError::MismatchedSharedInputs);
    }
    // Magnitudes: local relabellings flip CHSH signs freely without leaving
    // the no-signalling or quantum sets, so the bounds constrain |CHSH|.
    let c13 = chsh(b, pairing_13)?.abs();
    let c23 = chsh(b, pairing_23)?.abs();
    Ok((c13, c23))
}

/// CHSH₁₃ + CHSH₂₃ against the no-signalling bound 4, with the same two
/// measurements on the shared box in both pairings (enforced).
pub fn monogamy_ns(
    b: &Behavior,
    pairing_13: &ChshPairing,
    pairing_23: &ChshPairing,
) -> Result<MonogamyNsReport, BellError> {
    let (chsh_13, chsh_23) = monogamy_chsh_pair(b, pairing_13, pairing_23)?;
    let sum = chsh_13 + chsh_23;
    Ok(MonogamyNsReport {
        chsh_13,
        chsh_23,
        sum,
        bound: MONOGAMY_NS_BOUND,
        pass: sum <= MONOGAMY_NS_BOUND + 1e-9,
    })
}

/// CHSH₁₃² + CHSH₂₃² against the quantum bound 8.
pub fn monogamy_quantum(
    b: &Behavior,
    pairing_13: &ChshPairing,
    pairing_23: &ChshPairing,
) -> Result<MonogamyQuantumReport, BellError> {
    let (chsh_13, chsh_23) = monogamy_chsh_pair(b, pairing_13, pairing_23)?;
    let sum_of_squares = chsh_13 * chsh_13 + chsh_23 * chsh_23;
    Ok(MonogamyQuantumReport {
        chsh_13,
        chsh_23,
        sum_of_squares,
        bound: MONOGAMY_QUANTUM_BOUND,
        pass: sum_of_squares <= MONOGAMY_QUANTUM_BOUND + 1e-9,
    })
}

/// Exhaustive survey of deterministic assignment pairs for the binary
/// bipartite scenario: both boxes' outputs as arbitrary functions of the
/// joint input (16 × 16 = 256 pairs). Pairs where each output depends only
/// on its own box's input are the implementable local strategies.
#[derive(Debug, Clone, Serialize)]
pub struct DeterministicSurvey {
    pub total_pairs: usize,
    pub local_pairs: usize,
    /// Max |CHSH| over local strategies (= classical bound).
    pub max_local: f64,
    /// Max |CHSH| over all deterministic assignment pairs (= algebraic bound).
    pub max_any: f64,
}

pub fn deterministic_chsh_survey() -> DeterministicSurvey {
    let pairing = ChshPairing::canonical();
    let mut max_local: f64 = 0.0;
    let mut max_any: f64 = 0.0;
    let mut local_pairs = 0;
    // Each map is 4 bits: output for joint inputs (m,a) in order 00,01,10,11.
    let eval = |map: usize, m: usize, a: usize| -> usize { (map >> (m * 2 + a)) & 1 };
    for f in 0..16usize {
        let f_local = (0..2).all(|m| eval(f, m, 0) == eval(f, m, 1));
        for h in 0..16usize {
            let h_local = (0..2).all(|a| eval(h, 0, a) == eval(h, 1, a));
            let b = Behavior::from_fn(
                vec![crate::boxes::BoxShape::binary(), crate::boxes::BoxShape::binary()],
                |ins, outs| {
                    let ok = outs[0] == eval(f, ins[0], ins[1])
                        && outs[1] == eval(h, ins[0], ins[1]);
                    if ok {
                        1.0
                    } else {
                        0.0
                    }
                },
            )
            .expect("deterministic table is valid");
            let value = chsh(&b, &pairing).expect("binary scenario").abs();
            max_any = max_any.max(value);
            if f_local && h_local {
                local_pairs += 1;
                max_local = max_local.max(value);
            }
        }
    }
    DeterministicSurvey { total_pairs: 256, local_pairs, max_local, max_any }
}

/// All 16 local deterministic strategies of the binary bipartite scenario.
pub fn local_deterministic_strategies() -> Vec<Behavior> {
    let mut out = Vec::with_capacity(16);
    for fa in 0..4usize {
        for fb in 0..4usize {
            let map_a = vec![fa & 1, (fa >> 1) & 1];
            let map_b = vec![fb & 1, (fb >> 1) & 1];
            out.push(
                Behavior::local_deterministic(&[map_a, map_b], &[2, 2])
                    .expect("binary maps are valid"),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BoxShape;
    use crate::quantum::{self, MeasurementSet};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn perfectly_correlated_outputs_give_plus_one() {
        let copy = Behavior::from_fn(vec![BoxShape::binary(), BoxShape::binary()], |_, outs| {
            if outs[0] == outs[1] {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        for (m, a) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(correlator(&copy, m, a).unwrap(), 1.0);
        }
    }

    #[test]
    fn pr_correlators_follow_the_xor_rule() {
        let pr = Behavior::pr_box();
        assert_eq!(correlator(&pr, 1, 1).unwrap(), -1.0);
        for (m, a) in [(0, 0), (0, 1), (1, 0)] {
            assert_eq!(correlator(&pr, m, a).unwrap(), 1.0);
        }
    }

    #[test]
    fn isotropic_correlators_are_plus_minus_e() {
        let e = 0.37;
        let b = Behavior::isotropic(e).unwrap();
        for (m, a) in [(0, 0), (0, 1), (1, 0)] {
            assert!((correlator(&b, m, a).unwrap() - e).abs() < 1e-12);
        }
        assert!((correlator(&b, 1, 1).unwrap() + e).abs() < 1e-12);
    }

    #[test]
    fn pr_box_reaches_the_algebraic_bound() {
        let value = chsh(&Behavior::pr_box(), &ChshPairing::canonical()).unwrap();
        assert_eq!(value, 4.0);
    }

    #[test]
    fn isotropic_chsh_is_four_e() {
        for e in [0.0, 0.25, std::f64::consts::FRAC_1_SQRT_2, 1.0] {
            let b = Behavior::isotropic(e).unwrap();
            let value = chsh(&b, &ChshPairing::canonical()).unwrap();
            assert!((value - 4.0 * e).abs() < 1e-12);
            assert!((isotropic_correlator(&b).unwrap() - e).abs() < 1e-12);
        }
    }

    /// The measurement angles that saturate the quantum bound on the singlet
    /// in the fixed (+,+,+,−) pattern.
    pub(crate) fn tsirelson_angles() -> ([f64; 2], [f64; 2]) {
        ([0.0, 3.0 * PI / 2.0], [3.0 * PI / 4.0, 5.0 * PI / 4.0])
    }

    #[test]
    fn singlet_saturates_the_tsirelson_bound() {
        let (aa, ab) = tsirelson_angles();
        let b = Behavior::from_quantum(
            &quantum::singlet(),
            &[&MeasurementSet::planar(&aa), &MeasurementSet::planar(&ab)],
        )
        .unwrap();
        let value = chsh(&b, &ChshPairing::canonical()).unwrap();
        assert!((value - TSIRELSON_BOUND).abs() < 1e-9, "got {value}");
    }

    #[test]
    fn deterministic_survey_matches_known_bounds() {
        let s = deterministic_chsh_survey();
        assert_eq!(s.total_pairs, 256);
        assert_eq!(s.local_pairs, 16);
        assert_eq!(s.max_local, 2.0);
        assert_eq!(s.max_any, 4.0);
    }

    #[test]
    fn extremal_local_strategies_sit_exactly_at_two() {
        for b in local_deterministic_strategies() {
            let v = chsh(&b, &ChshPairing::canonical()).unwrap().abs();
            assert!(v == 2.0 || v == 0.0, "local deterministic CHSH was {v}");
        }
    }

    #[test]
    fn random_local_mixtures_respect_the_classical_bound() {
        let strategies = local_deterministic_strategies();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut weights: Vec<f64> = (0..strategies.len()).map(|_| rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mixed = Behavior::mix(&strategies, &weights).unwrap();
            let v = chsh(&mixed, &ChshPairing::canonical()).unwrap().abs();
            assert!(v <= CLASSICAL_BOUND + 1e-10);
        }
    }

    #[test]
    fn twirl_fixes_isotropic_boxes() {
        let b = Behavior::isotropic(0.63).unwrap();
        let t = depolarize(&b).unwrap();
        for (x, y) in b.table().iter().zip(t.table()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn twirl_maps_singlet_behavior_to_isotropic_form() {
        let (aa, ab) = tsirelson_angles();
        let b = Behavior::from_quantum(
            &quantum::singlet(),
            &[&MeasurementSet::planar(&aa), &MeasurementSet::planar(&ab)],
        )
        .unwrap();
        let t = depolarize(&b).unwrap();
        let iso = Behavior::isotropic(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        for (x, y) in t.table().iter().zip(iso.table()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn twirl_is_idempotent_and_preserves_chsh() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let strategies = local_deterministic_strategies();
        let pr = Behavior::pr_box();
        for _ in 0..30 {
            // Random no-signalling behavior: mixture of local vertices and
            // the extremal box.
            let mut weights: Vec<f64> =
                (0..strategies.len() + 1).map(|_| rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let mut all: Vec<Behavior> = strategies.clone();
            all.push(pr.clone());
            let b = Behavior::mix(&all, &weights).unwrap();

            let t = depolarize(&b).unwrap();
            let tt = depolarize(&t).unwrap();
            for (x, y) in t.table().iter().zip(tt.table()) {
                assert!((x - y).abs() < 1e-12);
            }
            let before = chsh(&b, &ChshPairing::canonical()).unwrap();
            let after = chsh(&t, &ChshPairing::canonical()).unwrap();
            assert!((before - after).abs() < 1e-10);
        }
    }

    #[test]
    fn monogamy_requires_shared_inputs() {
        let pr = Behavior::pr_box();
        let noise = Behavior::from_fn(vec![BoxShape::binary()], |_, _| 0.5).unwrap();
        let tri = pr.product(&noise).permute(&[0, 2, 1]).unwrap();
        let p13 = ChshPairing::between(0, 2);
        let mut p23 = ChshPairing::between(1, 2);
        p23.inputs_b = (1, 0);
        assert!(matches!(
            monogamy_ns(&tri, &p13, &p23),
            Err(BellError::MismatchedSharedInputs)
        ));
    }

    #[test]
    fn pr_composite_violates_quantum_monogamy() {
        // Boxes (1, 2, 3) with the extremal pair on (1, 3) and an
        // independent uniform box 2.
        let pr = Behavior::pr_box();
        let noise = Behavior::from_fn(vec![BoxShape::binary()], |_, _| 0.5).unwrap();
        let tri = pr.product(&noise).permute(&[0, 2, 1]).unwrap();
        let p13 = ChshPairing::between(0, 2);
        let p23 = ChshPairing::between(1, 2);
        let q = monogamy_quantum(&tri, &p13, &p23).unwrap();
        assert!((q.chsh_13 - 4.0).abs() < 1e-12);
        assert!(q.chsh_23.abs() < 1e-12);
        assert!((q.sum_of_squares - 16.0).abs() < 1e-10);
        assert!(!q.pass);
        // The linear no-signalling bound also passes exactly at 4.
        let ns = monogamy_ns(&tri, &p13, &p23).unwrap();
        assert!(ns.pass);
        assert!((ns.sum - 4.0).abs() < 1e-10);
    }
}
