//! The one-message guessing game and its information bookkeeping.
//!
//! Alice holds n uniform bits, sends Bob one classical message c, and Bob,
//! given a uniformly random address m, guesses the m-th bit. The quantity
//! Σ_x I(a_x : g c | m = x) is compared against H(c); the nested
//! concatenation protocol, the combined-correlator relation, the
//! max-versus-sum combining check, and the multipartite variants all live
//! here.
//!
//! Address bits are taken most-significant-first: bit 0 of the address
//! selects at the top level of the nested tree.

use crate::boxes::{Behavior, BoxError, BoxShape};
use crate::prob::{binary_entropy, JointDistribution, ProbError, Variable};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IcError {
    #[error("strategy error: {0}")]
    Strategy(String),
    #[error("exact scenario too large: {0}")]
    ResourceLimit(String),
    #[error("sampled mode requires non-adaptive queries")]
    AdaptiveSampling,
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Box(#[from] BoxError),
}

/// Bit x of the address string A (most significant first).
pub fn address_bit(a_code: usize, x: usize, n_bits: usize) -> usize {
    (a_code >> (n_bits - 1 - x)) & 1
}

/// A strategy for the guessing game over a box resource.
///
/// Alice's boxes are queried in the listed order; the input of her i-th box
/// may depend on her earlier outputs (`alice_next_input` receives the
/// outputs obtained so far). Bob's inputs are a function of the address
/// alone. For resources whose boxes are not independent, adaptive inputs
/// are only meaningful when they ignore the earlier outputs.
pub struct ICStrategy {
    pub n_bits: usize,
    pub message_card: usize,
    pub resource: Behavior,
    pub alice_boxes: Vec<usize>,
    pub bob_boxes: Vec<usize>,
    adaptive: bool,
    alice_next_input: Box<dyn Fn(usize, &[usize]) -> usize + Send + Sync>,
    encoder: Box<dyn Fn(usize, &[usize]) -> usize + Send + Sync>,
    bob_inputs: Box<dyn Fn(usize) -> Vec<usize> + Send + Sync>,
    decoder: Box<dyn Fn(usize, usize, &[usize]) -> usize + Send + Sync>,
}

impl std::fmt::Debug for ICStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ICStrategy")
            .field("n_bits", &self.n_bits)
            .field("message_card", &self.message_card)
            .field("alice_boxes", &self.alice_boxes)
            .field("bob_boxes", &self.bob_boxes)
            .finish_non_exhaustive()
    }
}

/// The standard two-bit wiring over one bipartite binary box pair: Alice
/// inputs a₀⊕a₁ and sends c = a₀ ⊕ (her output); Bob inputs m and guesses
/// c ⊕ (his output). Box 0 of the resource is Bob's half, box 1 Alice's.
pub fn pair_strategy(resource: Behavior) -> Result<ICStrategy, IcError> {
    if resource.n_boxes() != 2
        || resource.boxes().iter().any(|b| b.inputs != 2 || b.outputs != 2)
    {
        return Err(IcError::Strategy("pair strategy needs two binary boxes".into()));
    }
    Ok(ICStrategy {
        n_bits: 2,
        message_card: 2,
        resource,
        alice_boxes: vec![1],
        bob_boxes: vec![0],
        adaptive: false,
        alice_next_input: Box::new(|a_code, _| {
            address_bit(a_code, 0, 2) ^ address_bit(a_code, 1, 2)
        }),
        encoder: Box::new(|a_code, outs| address_bit(a_code, 0, 2) ^ outs[0]),
        bob_inputs: Box::new(|m| vec![m]),
        decoder: Box::new(|_, c, outs| c ^ outs[0]),
    })
}

/// The no-resource baseline: Alice sends her first bit, Bob reports it.
pub fn message_only_strategy() -> ICStrategy {
    // One inert box per side so the resource is well-formed.
    let inert = Behavior::from_fn(vec![BoxShape::new(1, 1), BoxShape::new(1, 1)], |_, _| 1.0)
        .expect("inert boxes");
    ICStrategy {
        n_bits: 2,
        message_card: 2,
        resource: inert,
        alice_boxes: vec![1],
        bob_boxes: vec![0],
        adaptive: false,
        alice_next_input: Box::new(|_, _| 0),
        encoder: Box::new(|a_code, _| address_bit(a_code, 0, 2)),
        bob_inputs: Box::new(|_| vec![0]),
        decoder: Box::new(|_, c, _| c),
    }
}

/// Evaluation mode for [`ic_quantity`].
#[derive(Debug, Clone, Copy, Serialize)]
pub enum IcMode {
    Exact,
    Sampled { count: u64, seed: u64 },
}

/// Result of an information-causality evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct IcReport {
    /// Σ_x I(a_x : g c | m = x), in bits.
    pub value: f64,
    /// Entropy of the actual message distribution.
    pub h_c: f64,
    pub terms: Vec<f64>,
    /// value ≤ h_c + 1e-9.
    pub pass: bool,
    /// Jackknife standard errors per term (sampled mode only).
    pub term_std_errors: Option<Vec<f64>>,
    pub samples: Option<u64>,
}

/// One conditioned game table: the joint distribution over
/// (A, bob outputs, guess, message) at a fixed address m = q.
fn game_table(s: &ICStrategy, q: usize) -> Result<JointDistribution, IcError> {
    let n_a_codes = 1usize << s.n_bits;
    let n_out = s.resource.n_joint_outputs();
    let bob_card: usize = s.bob_boxes.iter().map(|&b| s.resource.boxes()[b].outputs).product();
    let size_estimate = n_a_codes * n_out;
    if size_estimate > 1 << 22 {
        return Err(IcError::ResourceLimit(format!("{size_estimate} rows per address")));
    }
    let variables = vec![
        Variable::new("A", n_a_codes),
        Variable::new("b", bob_card),
        Variable::new("g", 2),
        Variable::new("c", s.message_card),
    ];
    let mut table = vec![0.0; n_a_codes * bob_card * 2 * s.message_card];
    let boxes = s.resource.boxes().to_vec();
    let n_boxes = boxes.len();
    let p_a = 1.0 / n_a_codes as f64;
    let bob_ins = (s.bob_inputs)(q);
    if bob_ins.len() != s.bob_boxes.len() {
        return Err(IcError::Strategy("bob input vector length mismatch".into()));
    }
    let mut outs = vec![0usize; n_boxes];
    for a_code in 0..n_a_codes {
        for out_joint in 0..n_out {
            decode_outputs(out_joint, &boxes, &mut outs);
            let alice_outs: Vec<usize> = s.alice_boxes.iter().map(|&b| outs[b]).collect();
            let bob_outs: Vec<usize> = s.bob_boxes.iter().map(|&b| outs[b]).collect();
            // Induce the inputs this output record would have been produced
            // under; for adaptive Alice this is the sequential semantics of
            // an independent-box resource.
            let mut ins = vec![0usize; n_boxes];
            for (i, &b) in s.alice_boxes.iter().enumerate() {
                ins[b] = (s.alice_next_input)(a_code, &alice_outs[..i]);
            }
            for (&b, &input) in s.bob_boxes.iter().zip(&bob_ins) {
                ins[b] = input;
            }
            let p = s.resource.prob(&ins, &outs);
            if p == 0.0 {
                continue;
            }
            let c = (s.encoder)(a_code, &alice_outs);
            let g = (s.decoder)(q, c, &bob_outs);
            if c >= s.message_card || g >= 2 {
                return Err(IcError::Strategy("encoder/decoder value out of range".into()));
            }
            let b_code = encode_bob(&bob_outs, &boxes, &s.bob_boxes);
            let idx = ((a_code * bob_card + b_code) * 2 + g) * s.message_card + c;
            table[idx] += p_a * p;
        }
    }
    Ok(JointDistribution::new(variables, table)?)
}

fn decode_outputs(mut idx: usize, boxes: &[BoxShape], out: &mut [usize]) {
    for (slot, b) in out.iter_mut().zip(boxes).rev() {
        *slot = idx % b.outputs;
        idx /= b.outputs;
    }
}

fn encode_bob(bob_outs: &[usize], boxes: &[BoxShape], bob_boxes: &[usize]) -> usize {
    let mut code = 0;
    for (&o, &b) in bob_outs.iter().zip(bob_boxes) {
        code = code * boxes[b].outputs + o;
    }
    code
}

/// Collapse the full game table to (a_x, g, c) and return I(a_x : g c).
fn term_from_table(
    table: &JointDistribution,
    x: usize,
    n_bits: usize,
    message_card: usize,
) -> Result<f64, IcError> {
    let full = table.marginal(&["A", "g", "c"])?;
    let variables = vec![
        Variable::new("ax", 2),
        Variable::new("g", 2),
        Variable::new("c", message_card),
    ];
    let mut collapsed = vec![0.0; 2 * 2 * message_card];
    let n_a_codes = 1usize << n_bits;
    for a_code in 0..n_a_codes {
        for g in 0..2 {
            for c in 0..message_card {
                let p = full.prob(&[a_code, g, c]);
                let ax = address_bit(a_code, x, n_bits);
                collapsed[(ax * 2 + g) * message_card + c] += p;
            }
        }
    }
    let d = JointDistribution::new(variables, collapsed)?;
    Ok(d.mutual_information(&["ax"], &["g", "c"])?)
}

/// The information-causality quantity of a strategy: the per-address terms,
/// their sum, and the message entropy, with pass/fail at value ≤ H(c)+1e-9.
pub fn ic_quantity(s: &ICStrategy, mode: IcMode) -> Result<IcReport, IcError> {
    match mode {
        IcMode::Exact => {
            let mut terms = Vec::with_capacity(s.n_bits);
            let mut h_c = 0.0;
            for x in 0..s.n_bits {
                let table = game_table(s, x)?;
                terms.push(term_from_table(&table, x, s.n_bits, s.message_card)?);
                if x == 0 {
                    h_c = table.entropy(&["c"])?;
                }
            }
            let value = terms.iter().sum::<f64>();
            Ok(IcReport {
                value,
                h_c,
                terms,
                pass: value <= h_c + 1e-9,
                term_std_errors: None,
                samples: None,
            })
        }
        IcMode::Sampled { count, seed } => ic_quantity_sampled(s, count, seed),
    }
}

fn ic_quantity_sampled(s: &ICStrategy, count: u64, seed: u64) -> Result<IcReport, IcError> {
    if s.adaptive {
        return Err(IcError::AdaptiveSampling);
    }
    if count == 0 {
        return Err(IcError::Strategy("sample count must be positive".into()));
    }
    let boxes = s.resource.boxes().to_vec();
    let n_boxes = boxes.len();
    let n_out = s.resource.n_joint_outputs();
    // Per-address joint counts over (a_x, g, c) and message counts.
    let mut counts: Vec<BTreeMap<(usize, usize), u64>> =
        (0..s.n_bits).map(|_| BTreeMap::new()).collect();
    let mut c_counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut outs = vec![0usize; n_boxes];
    for trial in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let a_code = rng.random_range(0..(1usize << s.n_bits));
        let m = rng.random_range(0..s.n_bits);
        let mut ins = vec![0usize; n_boxes];
        for (i, &b) in s.alice_boxes.iter().enumerate() {
            debug_assert!(i == 0 || !s.adaptive);
            ins[b] = (s.alice_next_input)(a_code, &[]);
            let _ = i;
        }
        for (&b, &input) in s.bob_boxes.iter().zip(&(s.bob_inputs)(m)) {
            ins[b] = input;
        }
        // Draw the joint output row.
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = n_out - 1;
        for o in 0..n_out {
            decode_outputs(o, &boxes, &mut outs);
            acc += s.resource.prob(&ins, &outs);
            if u < acc {
                chosen = o;
                break;
            }
        }
        decode_outputs(chosen, &boxes, &mut outs);
        let alice_outs: Vec<usize> = s.alice_boxes.iter().map(|&b| outs[b]).collect();
        let bob_outs: Vec<usize> = s.bob_boxes.iter().map(|&b| outs[b]).collect();
        let c = (s.encoder)(a_code, &alice_outs);
        let g = (s.decoder)(m, c, &bob_outs);
        let ax = address_bit(a_code, m, s.n_bits);
        *counts[m].entry((ax, g * s.message_card + c)).or_insert(0) += 1;
        *c_counts.entry(c).or_insert(0) += 1;
    }
    let mut terms = Vec::with_capacity(s.n_bits);
    let mut errs = Vec::with_capacity(s.n_bits);
    for per_m in &counts {
        let (mi, se) = jackknife_mutual_information(per_m, 2, 2 * s.message_card);
        terms.push(mi);
        errs.push(se);
    }
    let h_counts: BTreeMap<(usize, usize), u64> =
        c_counts.iter().map(|(&c, &n)| ((0usize, c), n)).collect();
    let (neg_hc, _) = jackknife_mutual_information(&h_counts, 1, s.message_card);
    // With a trivial first margin, I(x:y) = −(H(x)+H(y)−H(xy)) degenerates;
    // compute H(c) directly instead.
    let _ = neg_hc;
    let total: u64 = c_counts.values().sum();
    let h_c = plug_in_entropy(c_counts.values().copied(), total);
    let value = terms.iter().sum::<f64>();
    Ok(IcReport {
        value,
        h_c,
        terms,
        pass: value <= h_c + 1e-9,
        term_std_errors: Some(errs),
        samples: Some(count),
    })
}

fn plug_in_entropy(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Plug-in mutual information with jackknife bias correction and standard
/// error, from a sparse joint count table.
fn jackknife_mutual_information(
    counts: &BTreeMap<(usize, usize), u64>,
    _x_card: usize,
    _y_card: usize,
) -> (f64, f64) {
    let total: u64 = counts.values().sum();
    if total < 2 {
        return (0.0, 0.0);
    }
    let mi_of = |cells: &BTreeMap<(usize, usize), u64>, n: u64| -> f64 {
        let mut x_marg: BTreeMap<usize, u64> = BTreeMap::new();
        let mut y_marg: BTreeMap<usize, u64> = BTreeMap::new();
        for (&(x, y), &c) in cells {
            *x_marg.entry(x).or_insert(0) += c;
            *y_marg.entry(y).or_insert(0) += c;
        }
        plug_in_entropy(x_marg.values().copied(), n)
            + plug_in_entropy(y_marg.values().copied(), n)
            - plug_in_entropy(cells.values().copied(), n)
    };
    let full = mi_of(counts, total);
    // Leave-one-out values, grouped by the cell the removed sample came from.
    let mut mean_loo = 0.0;
    let mut loo = Vec::with_capacity(counts.len());
    for (&cell, &c) in counts {
        let mut reduced = counts.clone();
        if c == 1 {
            reduced.remove(&cell);
        } else {
            reduced.insert(cell, c - 1);
        }
        let v = mi_of(&reduced, total - 1);
        loo.push((c, v));
        mean_loo += c as f64 * v;
    }
    mean_loo /= total as f64;
    let n = total as f64;
    let corrected = (n * full - (n - 1.0) * mean_loo).max(0.0);
    let variance: f64 = loo
        .iter()
        .map(|&(c, v)| c as f64 * (v - mean_loo).powi(2))
        .sum::<f64>()
        * (n - 1.0)
        / n;
    (corrected, variance.sqrt())
}

// ───────────────────────── nested concatenation protocol ─────────────────────────

/// Bipartite binary pair whose success probability depends on the first
/// box's input: p(g ⊕ c = m·a) = (1 + e_m)/2.
pub fn input_isotropic_pair(e0: f64, e1: f64) -> Result<Behavior, IcError> {
    for e in [e0, e1] {
        if !(0.0..=1.0).contains(&e) {
            return Err(IcError::Strategy(format!("correlator {e} outside [0, 1]")));
        }
    }
    Ok(Behavior::from_fn(vec![BoxShape::binary(), BoxShape::binary()], |ins, outs| {
        let e = if ins[0] == 0 { e0 } else { e1 };
        if outs[0] ^ outs[1] == ins[0] & ins[1] {
            0.25 * (1.0 + e)
        } else {
            0.25 * (1.0 - e)
        }
    })?)
}

/// Tree bookkeeping for the nested protocol with `levels` levels over
/// n = 2^levels bits. Pairs are indexed level-1-first; pair `n − 2` is the
/// top of the tree.
struct NestedTree {
    levels: usize,
    n_bits: usize,
}

impl NestedTree {
    fn new(levels: usize) -> Self {
        Self { levels, n_bits: 1 << levels }
    }

    fn n_pairs(&self) -> usize {
        self.n_bits - 1
    }

    /// Global pair index of the node at height j (1 = leaves) covering the
    /// block starting at `lo`.
    fn pair_index(&self, j: usize, lo: usize) -> usize {
        // Levels below j contribute n/2 + n/4 + … + n/2^(j−1) pairs.
        let below: usize = (1..j).map(|i| self.n_bits >> i).sum();
        below + (lo >> j)
    }

    /// Bob's path for address m: (pair index, address bit) from the top
    /// level down to the leaves.
    fn path(&self, m: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.levels);
        let mut lo = 0usize;
        let mut width = self.n_bits;
        for level in 0..self.levels {
            let bit = address_bit(m, level, self.levels);
            let j = self.levels - level;
            out.push((self.pair_index(j, lo), bit));
            width /= 2;
            if bit == 1 {
                lo += width;
            }
        }
        out
    }

    /// Alice's chain: given her bits and her per-pair outputs, the input she
    /// feeds each pair and the final message. Virtual messages propagate
    /// upward: a leaf pair over bits (2t, 2t+1) gets input a_{2t} ⊕ a_{2t+1}
    /// and emits a_{2t} ⊕ output; internal nodes do the same over the
    /// virtual messages of their children.
    fn alice_chain(&self, a_code: usize, alice_outs: &[usize]) -> (Vec<usize>, usize) {
        let n = self.n_bits;
        let mut inputs = vec![0usize; self.n_pairs()];
        // Virtual message per node, keyed by pair index.
        let mut virt = vec![0usize; self.n_pairs()];
        // Leaves.
        for t in 0..n / 2 {
            let left = address_bit(a_code, 2 * t, n.trailing_zeros() as usize * 0 + self.levels_bits());
            let right = address_bit(a_code, 2 * t + 1, self.levels_bits());
            let p = self.pair_index(1, 2 * t);
            inputs[p] = left ^ right;
            virt[p] = left ^ alice_outs[p];
        }
        // Internal nodes, bottom-up.
        for j in 2..=self.levels {
            let block = 1usize << j;
            let mut lo = 0;
            while lo < n {
                let p = self.pair_index(j, lo);
                let lchild = self.pair_index(j - 1, lo);
                let rchild = self.pair_index(j - 1, lo + block / 2);
                inputs[p] = virt[lchild] ^ virt[rchild];
                virt[p] = virt[lchild] ^ alice_outs[p];
                lo += block;
            }
        }
        (inputs, virt[self.n_pairs() - 1])
    }

    fn levels_bits(&self) -> usize {
        self.n_bits.trailing_zeros() as usize * 0 + self.n_bits_log()
    }

    fn n_bits_log(&self) -> usize {
        self.n_bits.ilog2() as usize
    }
}

/// The nested concatenation strategy for n = 2^levels bits over
/// input-dependent isotropic pairs. Exact evaluation is limited to
/// levels ≤ 2 (the dense resource grows doubly exponentially).
pub fn nested_strategy(e0: f64, e1: f64, levels: usize) -> Result<ICStrategy, IcError> {
    if levels == 0 || levels > 2 {
        return Err(IcError::ResourceLimit(
            "dense nested strategies support 1 or 2 levels; use the simulation beyond that"
                .into(),
        ));
    }
    let tree = NestedTree::new(levels);
    let n_pairs = tree.n_pairs();
    let pair = input_isotropic_pair(e0, e1)?;
    let mut resource = pair.clone();
    for _ in 1..n_pairs {
        resource = resource.product(&pair);
    }
    // Pair t occupies boxes (2t) = Bob half and (2t + 1) = Alice half.
    let bob_boxes: Vec<usize> = (0..n_pairs).map(|t| 2 * t).collect();
    let alice_boxes: Vec<usize> = (0..n_pairs).map(|t| 2 * t + 1).collect();
    let n_bits = tree.n_bits;
    let tree_a = NestedTree::new(levels);
    let tree_b = NestedTree::new(levels);
    let tree_enc = NestedTree::new(levels);
    let tree_dec = NestedTree::new(levels);
    Ok(ICStrategy {
        n_bits,
        message_card: 2,
        resource,
        alice_boxes,
        bob_boxes,
        adaptive: levels > 1,
        alice_next_input: Box::new(move |a_code, outs_so_far| {
            // The chain only needs outputs of earlier pairs; pad the rest.
            let mut outs = outs_so_far.to_vec();
            outs.resize(tree_a.n_pairs(), 0);
            let (inputs, _) = tree_a.alice_chain(a_code, &outs);
            inputs[outs_so_far.len()]
        }),
        encoder: Box::new(move |a_code, outs| tree_enc.alice_chain(a_code, outs).1),
        bob_inputs: Box::new(move |m| {
            let mut ins = vec![0usize; tree_b.n_pairs()];
            for (pair, bit) in tree_b.path(m) {
                ins[pair] = bit;
            }
            ins
        }),
        decoder: Box::new(move |m, c, outs| {
            let mut g = c;
            for (pair, _) in tree_dec.path(m) {
                g ^= outs[pair];
            }
            g
        }),
    })
}

/// Closed-form value of the nested protocol's information-causality
/// quantity with `levels` levels of pairs at per-input correlators
/// (e0, e1): Σ_k C(levels, k) · (1 − h((1 + e0^{levels−k} e1^k)/2)).
///
/// The capacity factor is evaluated by series when the composite correlator
/// is small, avoiding the 1 − h cancellation that would otherwise destroy
/// the large-`levels` scans.
pub fn nested_value(e0: f64, e1: f64, levels: usize) -> Result<f64, IcError> {
    for e in [e0, e1] {
        if !(0.0..=1.0).contains(&e) {
            return Err(IcError::Strategy(format!("correlator {e} outside [0, 1]")));
        }
    }
    let mut total = 0.0;
    let mut binom = 1.0f64;
    for k in 0..=levels {
        let comp = e0.powi((levels - k) as i32) * e1.powi(k as i32);
        total += binom * capacity_from_correlator(comp);
        binom *= (levels - k) as f64 / (k + 1) as f64;
    }
    Ok(total)
}

/// 1 − h((1+e)/2): the one-bit channel capacity at correlator e.
pub fn capacity_from_correlator(e: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&e));
    if e >= 1.0 {
        return 1.0;
    }
    if e > 0.5 {
        return 1.0 - binary_entropy(0.5 * (1.0 + e)).expect("in range");
    }
    // Series Σ e^{2q} / (q (2q−1)) / (2 ln 2), run to convergence.
    let e2 = e * e;
    let mut power = 1.0;
    let mut sum = 0.0;
    for q in 1..10_000usize {
        power *= e2;
        let term = power / (q as f64 * (2 * q - 1) as f64);
        sum += term;
        if term < 1e-18 * sum.max(1e-300) {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::LN_2)
}

/// Per-address tally of a nested-protocol simulation.
#[derive(Debug, Clone, Serialize)]
pub struct AddressStats {
    pub address: usize,
    pub trials: u64,
    pub successes: u64,
    /// (1 + e0^{zeros} e1^{ones})/2 over the address bits.
    pub predicted_success: f64,
}

/// Result of [`nested_simulation`].
#[derive(Debug, Clone, Serialize)]
pub struct NestedSimReport {
    pub levels: usize,
    pub trials: u64,
    pub per_address: Vec<AddressStats>,
    pub overall_success_rate: f64,
}

/// Monte Carlo run of the nested protocol at any number of levels, without
/// materializing the dense resource: pairs are sampled independently with
/// per-input success probability (1 + e_m)/2.
pub fn nested_simulation(
    e0: f64,
    e1: f64,
    levels: usize,
    trials: u64,
    seed: u64,
) -> Result<NestedSimReport, IcError> {
    for e in [e0, e1] {
        if !(0.0..=1.0).contains(&e) {
            return Err(IcError::Strategy(format!("correlator {e} outside [0, 1]")));
        }
    }
    if levels == 0 || levels > 16 {
        return Err(IcError::Strategy("levels must be in 1..=16".into()));
    }
    let tree = NestedTree::new(levels);
    let n_bits = tree.n_bits;
    let n_pairs = tree.n_pairs();
    let mut tally: Vec<(u64, u64)> = vec![(0, 0); n_bits];
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let a_code = rng.random_range(0..(1usize << n_bits));
        let m = rng.random_range(0..n_bits);
        // Alice halves: uniform outputs.
        let alice_outs: Vec<usize> =
            (0..n_pairs).map(|_| rng.random_range(0..2usize)).collect();
        let (pair_inputs_a, c) = tree.alice_chain(a_code, &alice_outs);
        // Bob walks his path; each pair's relation holds with
        // probability (1 + e_bit)/2.
        let mut g = c;
        for (pair, bit) in tree.path(m) {
            let e = if bit == 0 { e0 } else { e1 };
            let ok = rng.random::<f64>() < 0.5 * (1.0 + e);
            let relation = pair_inputs_a[pair] & bit;
            let bob_out = alice_outs[pair] ^ relation ^ usize::from(!ok);
            g ^= bob_out;
        }
        let success = g == address_bit(a_code, m, n_bits);
        tally[m].0 += 1;
        tally[m].1 += u64::from(success);
    }
    let per_address: Vec<AddressStats> = tally
        .iter()
        .enumerate()
        .map(|(m, &(t, s))| {
            let ones = (0..levels).filter(|&l| address_bit(m, l, levels) == 1).count();
            let predicted =
                0.5 * (1.0 + e0.powi((levels - ones) as i32) * e1.powi(ones as i32));
            AddressStats { address: m, trials: t, successes: s, predicted_success: predicted }
        })
        .collect();
    let total_success: u64 = per_address.iter().map(|a| a.successes).sum();
    Ok(NestedSimReport {
        levels,
        trials,
        per_address,
        overall_success_rate: total_success as f64 / trials.max(1) as f64,
    })
}

// ───────────────────── combined-correlator relation ─────────────────────

/// Result of [`combined_correlator`]: the correlator e₁₂ whose one-bit
/// capacity matches the combined capacities of two boxes, when it exists.
#[derive(Debug, Clone, Serialize)]
pub struct CombinedCorrelatorReport {
    pub e1: f64,
    pub e2: f64,
    /// Root of 1 − h((1+e₁₂)/2) = (1 − h(P₁)) + (1 − h(P₂)) in [0, 1], if
    /// the right side does not exceed one bit.
    pub e12: Option<f64>,
    /// s = e₁₂² − e₁² − e₂².
    pub s_direct: Option<f64>,
    /// The same s from the series form Σ_{q≥2} (e₁^{2q}+e₂^{2q}−e₁₂^{2q})/(q(2q−1)).
    pub s_series: Option<f64>,
    /// Combined capacity demanded of the composite box, in bits.
    pub required_capacity: f64,
}

/// Solves the capacity-matching equation for the composite correlator by
/// bisection (the capacity is strictly increasing in e on [0, 1]).
pub fn combined_correlator(e1: f64, e2: f64) -> Result<CombinedCorrelatorReport, IcError> {
    for e in [e1, e2] {
        if !(0.0..=1.0).contains(&e) {
            return Err(IcError::Strategy(format!("correlator {e} outside [0, 1]")));
        }
    }
    let required = capacity_from_correlator(e1) + capacity_from_correlator(e2);
    if required > 1.0 {
        return Ok(CombinedCorrelatorReport {
            e1,
            e2,
            e12: None,
            s_direct: None,
            s_series: None,
            required_capacity: required,
        });
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capacity_from_correlator(mid) < required {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let e12 = 0.5 * (lo + hi);
    let s_direct = e12 * e12 - e1 * e1 - e2 * e2;
    // Series tail, q ≥ 2.
    let mut s_series = 0.0;
    let (mut p1, mut p2, mut p12) = (e1 * e1, e2 * e2, e12 * e12);
    for q in 2..10_000usize {
        p1 *= e1 * e1;
        p2 *= e2 * e2;
        p12 *= e12 * e12;
        let term = (p1 + p2 - p12) / (q as f64 * (2 * q - 1) as f64);
        s_series += term;
        if p1.max(p2).max(p12) < 1e-18 {
            break;
        }
    }
    Ok(CombinedCorrelatorReport {
        e1,
        e2,
        e12: Some(e12),
        s_direct: Some(s_direct),
        s_series: Some(s_series),
        required_capacity: required,
    })
}

// ───────────────────── max-vs-sum combining check ─────────────────────

/// Result of [`combining_check`].
#[derive(Debug, Clone, Serialize)]
pub struct CombiningReport {
    /// max_q I(A : b c | m = q) — the best single measurement.
    pub max_single: f64,
    pub per_q_single: Vec<f64>,
    /// Σ_x I(a_x : b c | m = x) over the incompatible measurements.
    pub sum_over_bits: f64,
    pub per_x_terms: Vec<f64>,
    /// max_single ≥ sum_over_bits − 1e-9.
    pub holds: bool,
}

/// Compares the information about the whole string available from the best
/// single measurement against the summed per-bit informations across
/// incompatible measurements, using Bob's raw box outputs.
pub fn combining_check(s: &ICStrategy) -> Result<CombiningReport, IcError> {
    if s.n_bits > 3 {
        return Err(IcError::ResourceLimit("combining check supports n ≤ 3 bits".into()));
    }
    let mut per_q_single = Vec::with_capacity(s.n_bits);
    let mut per_x_terms = Vec::with_capacity(s.n_bits);
    for q in 0..s.n_bits {
        let table = game_table(s, q)?;
        per_q_single.push(table.mutual_information(&["A"], &["b", "c"])?);
        // I(a_x : b c | m = x) at x = q.
        let full = table.marginal(&["A", "b", "c"])?;
        let bob_card = full.variables()[1].cardinality;
        let variables = vec![
            Variable::new("ax", 2),
            Variable::new("b", bob_card),
            Variable::new("c", s.message_card),
        ];
        let mut collapsed = vec![0.0; 2 * bob_card * s.message_card];
        for a_code in 0..(1usize << s.n_bits) {
            for b in 0..bob_card {
                for c in 0..s.message_card {
                    let ax = address_bit(a_code, q, s.n_bits);
                    collapsed[(ax * bob_card + b) * s.message_card + c] +=
                        full.prob(&[a_code, b, c]);
                }
            }
        }
        let d = JointDistribution::new(variables, collapsed)?;
        per_x_terms.push(d.mutual_information(&["ax"], &["b", "c"])?);
    }
    let max_single = per_q_single.iter().copied().fold(0.0, f64::max);
    let sum_over_bits: f64 = per_x_terms.iter().sum();
    Ok(CombiningReport {
        max_single,
        per_q_single,
        sum_over_bits,
        per_x_terms,
        holds: max_single >= sum_over_bits - 1e-9,
    })
}

// ───────────────────── multipartite definitions ─────────────────────

/// A multipartite guessing system: box 0 takes the whole address string and
/// emits the message; every later box takes an address index and emits a
/// guess bit.
#[derive(Debug, Clone)]
pub struct MultipartiteSystem {
    pub behavior: Behavior,
    pub n_bits: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultipartiteReport {
    pub value: f64,
    pub h_c: f64,
    pub terms: Vec<f64>,
    /// I(c : A), required ≈ 0 by the definitions; reported for audit.
    pub i_c_a: f64,
    pub pass: bool,
}

impl MultipartiteSystem {
    pub fn new(behavior: Behavior, n_bits: usize) -> Result<Self, IcError> {
        let boxes = behavior.boxes();
        if boxes.len() < 2 {
            return Err(IcError::Strategy("need a message box and at least one guess box".into()));
        }
        if boxes[0].inputs != 1 << n_bits {
            return Err(IcError::Strategy("message box input must range over the bit strings".into()));
        }
        for b in &boxes[1..] {
            if b.outputs != 2 || b.inputs > n_bits.max(1) {
                return Err(IcError::Strategy(
                    "guess boxes must be binary-output with address-index inputs".into(),
                ));
            }
        }
        Ok(Self { behavior, n_bits })
    }

    fn guess_boxes(&self) -> usize {
        self.behavior.n_boxes() - 1
    }

    /// Joint distribution over (A, c, listed guess outputs) with the listed
    /// guess boxes at input `w` and the others marginalized out.
    fn joint_at(
        &self,
        guesses: &[usize],
        w: usize,
    ) -> Result<JointDistribution, IcError> {
        let keep: Vec<usize> = std::iter::once(0).chain(guesses.iter().copied()).collect();
        let marg = self.behavior.marginal_boxes(&keep)?;
        let n_a = 1usize << self.n_bits;
        let message_card = self.behavior.boxes()[0].outputs;
        let mut variables = vec![Variable::new("A", n_a), Variable::new("c", message_card)];
        for (i, _) in guesses.iter().enumerate() {
            variables.push(Variable::new(format!("g{}", i + 1), 2));
        }
        let n_g = guesses.len();
        let d = JointDistribution::from_fn(variables, |v| {
            let a_code = v[0];
            let mut ins = vec![0usize; 1 + n_g];
            ins[0] = a_code;
            for slot in ins.iter_mut().skip(1) {
                *slot = w;
            }
            let mut outs = vec![0usize; 1 + n_g];
            outs[0] = v[1];
            outs[1..].copy_from_slice(&v[2..]);
            marg.prob(&ins, &outs) / n_a as f64
        })?;
        Ok(d)
    }
}

/// The per-box summed multipartite quantity Σ_i Σ_w I(a_w : c g_i | m_i = w),
/// which double-counts information shared between guess boxes.
pub fn multipartite_ic_flawed(sys: &MultipartiteSystem) -> Result<MultipartiteReport, IcError> {
    let mut terms = Vec::new();
    let mut h_c = 0.0;
    let mut i_c_a = 0.0;
    for i in 1..=sys.guess_boxes() {
        for w in 0..sys.n_bits {
            let d = sys.joint_at(&[i], w)?;
            if i == 1 && w == 0 {
                h_c = d.entropy(&["c"])?;
                i_c_a = d.mutual_information(&["c"], &["A"])?;
            }
            terms.push(collapsed_bit_mi(&d, w, sys.n_bits, &["c", "g1"])?);
        }
    }
    let value: f64 = terms.iter().sum();
    Ok(MultipartiteReport { value, h_c, terms, i_c_a, pass: value <= h_c + 1e-9 })
}

/// The corrected three-box quantity Σ_w I(a_w : c g₁ g₂ | m₁ = w, m₂ = w),
/// reported with its chain-rule split (message-and-first-guess term plus
/// the second guess conditioned on the first).
pub fn multipartite_ic_corrected(sys: &MultipartiteSystem) -> Result<MultipartiteReport, IcError> {
    if sys.guess_boxes() != 2 {
        return Err(IcError::Strategy("corrected definition covers exactly two guess boxes".into()));
    }
    let mut terms = Vec::new();
    let mut h_c = 0.0;
    let mut i_c_a = 0.0;
    for w in 0..sys.n_bits {
        let d = sys.joint_at(&[1, 2], w)?;
        if w == 0 {
            h_c = d.entropy(&["c"])?;
            i_c_a = d.mutual_information(&["c"], &["A"])?;
        }
        terms.push(collapsed_bit_mi(&d, w, sys.n_bits, &["c", "g1", "g2"])?);
    }
    let value: f64 = terms.iter().sum();
    Ok(MultipartiteReport { value, h_c, terms, i_c_a, pass: value <= h_c + 1e-9 })
}

/// I(a_w : rest) after collapsing the address variable to its w-th bit.
fn collapsed_bit_mi(
    d: &JointDistribution,
    w: usize,
    n_bits: usize,
    rest: &[&str],
) -> Result<f64, IcError> {
    let mut labels = vec!["A"];
    labels.extend_from_slice(rest);
    let joint = d.marginal(&labels)?;
    let cards: Vec<usize> = joint.variables().iter().map(|v| v.cardinality).collect();
    let mut variables = vec![Variable::new("aw", 2)];
    for v in &joint.variables()[1..] {
        variables.push(v.clone());
    }
    let rest_card: usize = cards[1..].iter().product();
    let mut table = vec![0.0; 2 * rest_card];
    let mut assignment = vec![0usize; cards.len()];
    for (idx, &p) in joint.table().iter().enumerate() {
        let mut rem = idx;
        for (slot, &c) in assignment.iter_mut().zip(&cards).rev() {
            *slot = rem % c;
            rem /= c;
        }
        let aw = address_bit(assignment[0], w, n_bits);
        let mut rest_idx = 0;
        for (v, &c) in assignment[1..].iter().zip(&cards[1..]) {
            rest_idx = rest_idx * c + v;
        }
        table[aw * rest_card + rest_idx] += p;
    }
    let collapsed = JointDistribution::new(variables, table)?;
    let rest_labels: Vec<&str> = rest.to_vec();
    Ok(collapsed.mutual_information(&["aw"], &rest_labels)?)
}

/// Three parties measure a shared GHZ state in the computational basis; the
/// message box XORs its first address bit with its (perfectly correlated)
/// outcome. One address bit, two guess boxes.
pub fn ghz_system() -> Result<MultipartiteSystem, IcError> {
    use crate::quantum::{born, ghz3, MeasurementSet};
    let m = MeasurementSet::planar(&[0.0]);
    let g = ghz3();
    // p(o, o, o) for the three-fold computational measurement.
    let mut p_all = [0.0f64; 2];
    for (o, slot) in p_all.iter_mut().enumerate() {
        let e = &m.measurement(0).effects[o];
        *slot = born(&g, &[e, e, e]).map_err(|e| IcError::Strategy(e.to_string()))?;
    }
    let behavior = Behavior::from_fn(
        vec![BoxShape::new(2, 2), BoxShape::new(1, 2), BoxShape::new(1, 2)],
        |ins, outs| {
            let a0 = ins[0];
            let (c, g1, g2) = (outs[0], outs[1], outs[2]);
            if g1 == g2 && c == a0 ^ g1 {
                p_all[g1]
            } else {
                0.0
            }
        },
    )?;
    MultipartiteSystem::new(behavior, 1)
}

/// The same table from a shared classical random bit instead of the GHZ
/// state.
pub fn shared_bit_system() -> Result<MultipartiteSystem, IcError> {
    let behavior = Behavior::from_fn(
        vec![BoxShape::new(2, 2), BoxShape::new(1, 2), BoxShape::new(1, 2)],
        |ins, outs| {
            let a0 = ins[0];
            let (c, g1, g2) = (outs[0], outs[1], outs[2]);
            if g1 == g2 && c == a0 ^ g1 {
                0.5
            } else {
                0.0
            }
        },
    )?;
    MultipartiteSystem::new(behavior, 1)
}

/// Admissible control: the message is private noise and the guess boxes are
/// independent fair coins.
pub fn independent_system() -> Result<MultipartiteSystem, IcError> {
    let behavior = Behavior::from_fn(
        vec![BoxShape::new(2, 2), BoxShape::new(1, 2), BoxShape::new(1, 2)],
        |_, _| 0.125,
    )?;
    MultipartiteSystem::new(behavior, 1)
}

/// Probe outside the shipped examples: the message box shares one extremal
/// pair with each guess box (two address bits, inputs m_i ∈ {0,1}); the
/// message encodes through the first pair only.
pub fn double_pr_system() -> Result<MultipartiteSystem, IcError> {
    let behavior = Behavior::from_fn(
        vec![BoxShape::new(4, 2), BoxShape::new(2, 2), BoxShape::new(2, 2)],
        |ins, outs| {
            let (a0, a1) = (address_bit(ins[0], 0, 2), address_bit(ins[0], 1, 2));
            let (m1, m2) = (ins[1], ins[2]);
            let (c, g1, g2) = (outs[0], outs[1], outs[2]);
            let _ = (m2, g2); // second pair's output is fresh noise
            // First pair: o_a uniform, o_b = o_a ⊕ (a0⊕a1)·m1; c = a0 ⊕ o_a.
            // Eliminating o_a: g1 = a0 ⊕ c ⊕ (a0⊕a1)·m1; c uniform;
            // g2 uniform and independent.
            if g1 == a0 ^ c ^ ((a0 ^ a1) & m1) {
                0.25
            } else {
                0.0
            }
        },
    )?;
    MultipartiteSystem::new(behavior, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{self, MeasurementSet};
    use std::f64::consts::PI;

    #[test]
    fn message_only_strategy_passes_with_equality() {
        let r = ic_quantity(&message_only_strategy(), IcMode::Exact).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.h_c - 1.0).abs() < 1e-12);
        assert!(r.pass);
        assert!((r.terms[0] - 1.0).abs() < 1e-12);
        assert!(r.terms[1] < 1e-12);
    }

    #[test]
    fn extremal_pair_strategy_breaks_the_bound() {
        let s = pair_strategy(Behavior::pr_box()).unwrap();
        let r = ic_quantity(&s, IcMode::Exact).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12, "value {}", r.value);
        assert!((r.h_c - 1.0).abs() < 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn singlet_pair_strategy_respects_the_bound() {
        let ma = MeasurementSet::planar(&[0.0, 3.0 * PI / 2.0]);
        let mb = MeasurementSet::planar(&[3.0 * PI / 4.0, 5.0 * PI / 4.0]);
        let b = Behavior::from_quantum(&quantum::singlet(), &[&ma, &mb]).unwrap();
        let s = pair_strategy(b).unwrap();
        let r = ic_quantity(&s, IcMode::Exact).unwrap();
        assert!(r.pass, "value {} vs h_c {}", r.value, r.h_c);
        assert!(r.value > 0.1); // the entangled pair does help
    }

    #[test]
    fn sampled_mode_agrees_with_exact_for_the_extremal_pair() {
        let s = pair_strategy(Behavior::pr_box()).unwrap();
        let r = ic_quantity(&s, IcMode::Sampled { count: 20_000, seed: 3 }).unwrap();
        assert!((r.value - 2.0).abs() < 0.02, "sampled value {}", r.value);
        assert!((r.h_c - 1.0).abs() < 0.01);
        let errs = r.term_std_errors.unwrap();
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn nested_level_one_with_perfect_boxes_recovers_both_bits() {
        let s = nested_strategy(1.0, 1.0, 1).unwrap();
        let r = ic_quantity(&s, IcMode::Exact).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.h_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nested_level_two_with_perfect_boxes_recovers_all_four_bits() {
        let s = nested_strategy(1.0, 1.0, 2).unwrap();
        let r = ic_quantity(&s, IcMode::Exact).unwrap();
        assert!((r.value - 4.0).abs() < 1e-10, "value {}", r.value);
    }

    #[test]
    fn useless_boxes_convey_nothing() {
        let s = nested_strategy(0.0, 0.0, 1).unwrap();
        let r = ic_quantity(&s, IcMode::Exact).unwrap();
        assert!(r.value < 1e-12);
        let sim = nested_simulation(0.0, 0.0, 1, 20_000, 9).unwrap();
        assert!((sim.overall_success_rate - 0.5).abs() < 0.02);
    }

    #[test]
    fn nested_value_closed_form_limits() {
        assert!((nested_value(1.0, 1.0, 3).unwrap() - 8.0).abs() < 1e-12);
        assert!((nested_value(1.0, 1.0, 5).unwrap() - 32.0).abs() < 1e-12);
        assert!(nested_value(0.0, 0.0, 4).unwrap() < 1e-15);
    }

    #[test]
    fn exact_level_values_match_the_closed_form() {
        for (e0, e1) in [(0.9, 0.9), (0.7, 0.4), (1.0, 0.3)] {
            for levels in [1usize, 2] {
                let s = nested_strategy(e0, e1, levels).unwrap();
                let r = ic_quantity(&s, IcMode::Exact).unwrap();
                let v = nested_value(e0, e1, levels).unwrap();
                assert!(
                    (r.value - v).abs() < 1e-9,
                    "levels {levels} e=({e0},{e1}): exact {} vs formula {v}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn simulation_matches_predicted_per_address_success() {
        let trials = 40_000u64;
        for (e, levels) in [(0.9, 2usize), (1.0, 1)] {
            let sim = nested_simulation(e, e, levels, trials, 17).unwrap();
            for a in &sim.per_address {
                let n = a.trials as f64;
                let p = a.predicted_success;
                let sigma = (p * (1.0 - p) / n).sqrt().max(1e-9);
                let observed = a.successes as f64 / n;
                assert!(
                    (observed - p).abs() < 5.0 * sigma + 1e-9,
                    "address {} at (e={e}, k={levels}): {observed} vs {p}",
                    a.address
                );
            }
        }
    }

    #[test]
    fn capacity_series_and_closed_form_agree_at_the_crossover() {
        for e in [0.4, 0.5, 0.55, 0.6] {
            let closed = 1.0 - binary_entropy(0.5 * (1.0 + e)).unwrap();
            assert!((capacity_from_correlator(e) - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_scans_bracket_the_monogamy_boundary() {
        // Exceeds one bit for some level count when 2e² is safely above 1.
        let e_hot = (1.05f64 / 2.0).sqrt() + 0.01;
        let exceeded = (1..=32).any(|n| nested_value(e_hot, e_hot, n).unwrap() > 1.0);
        assert!(exceeded);
        // At e = 0.72 (2e² ≈ 1.037) the value still escapes past one bit.
        let exceeded = (1..=64).any(|n| nested_value(0.72, 0.72, n).unwrap() > 1.0);
        assert!(exceeded);
        // Never exceeds one bit when 2e² is safely below 1.
        let e_cold = (0.95f64 / 2.0).sqrt();
        let max = (1..=64)
            .map(|n| nested_value(e_cold, e_cold, n).unwrap())
            .fold(0.0, f64::max);
        assert!(max <= 1.0, "max {max}");
    }

    #[test]
    fn nested_value_is_monotone_in_the_correlator() {
        for levels in [1usize, 2, 4] {
            let mut prev = -1.0;
            for i in 0..=20 {
                let e = i as f64 / 20.0;
                let v = nested_value(e, e, levels).unwrap();
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn combined_correlator_trivial_cases() {
        let r = combined_correlator(0.6, 0.0).unwrap();
        let e12 = r.e12.unwrap();
        assert!((e12 - 0.6).abs() < 1e-9);
        assert!(r.s_direct.unwrap().abs() < 1e-9);
    }

    #[test]
    fn combined_correlator_half_half() {
        let r = combined_correlator(0.5, 0.5).unwrap();
        let e12 = r.e12.unwrap();
        // Both forms of the residual agree.
        assert!((r.s_direct.unwrap() - r.s_series.unwrap()).abs() < 1e-8);
        // The root satisfies the capacity equation.
        let cap = capacity_from_correlator(e12);
        assert!((cap - r.required_capacity).abs() < 1e-10);
    }

    #[test]
    fn combined_correlator_tsirelson_boundary() {
        let e = std::f64::consts::FRAC_1_SQRT_2;
        let r = combined_correlator(e, e).unwrap();
        // 2(1 − h((1+1/√2)/2)) ≈ 0.798 < 1: a root exists, and
        // 2e₁² + 2e₂² = 2 > 1 marks the super-quantum side.
        assert!(r.e12.is_some());
        assert!(2.0 * e * e + 2.0 * e * e > 1.0);
        assert!((r.s_direct.unwrap() - r.s_series.unwrap()).abs() < 1e-8);
    }

    #[test]
    fn combining_check_separates_extremal_from_ordinary_resources() {
        // Message-only: equality.
        let r = combining_check(&message_only_strategy()).unwrap();
        assert!(r.holds);
        assert!((r.max_single - r.sum_over_bits).abs() < 1e-12);
        // Extremal pair: violated with max 1, sum 2.
        let r = combining_check(&pair_strategy(Behavior::pr_box()).unwrap()).unwrap();
        assert!(!r.holds);
        assert!((r.max_single - 1.0).abs() < 1e-12);
        assert!((r.sum_over_bits - 2.0).abs() < 1e-12);
        // Entangled pair: holds.
        let ma = MeasurementSet::planar(&[0.0, 3.0 * PI / 2.0]);
        let mb = MeasurementSet::planar(&[3.0 * PI / 4.0, 5.0 * PI / 4.0]);
        let b = Behavior::from_quantum(&quantum::singlet(), &[&ma, &mb]).unwrap();
        let r = combining_check(&pair_strategy(b).unwrap()).unwrap();
        assert!(r.holds, "max {} vs sum {}", r.max_single, r.sum_over_bits);
    }

    #[test]
    fn ghz_breaks_the_per_box_sum_but_not_the_corrected_form() {
        for sys in [ghz_system().unwrap(), shared_bit_system().unwrap()] {
            let flawed = multipartite_ic_flawed(&sys).unwrap();
            assert!((flawed.value - 2.0).abs() < 1e-10, "flawed {}", flawed.value);
            assert!((flawed.h_c - 1.0).abs() < 1e-12);
            assert!(flawed.i_c_a < 1e-10);
            assert!(!flawed.pass);
            let corrected = multipartite_ic_corrected(&sys).unwrap();
            assert!((corrected.value - 1.0).abs() < 1e-10, "corrected {}", corrected.value);
            assert!(corrected.pass);
        }
    }

    #[test]
    fn independent_system_is_far_below_the_bound() {
        let sys = independent_system().unwrap();
        let flawed = multipartite_ic_flawed(&sys).unwrap();
        assert!(flawed.value < 1e-10);
        assert!(flawed.pass);
        let corrected = multipartite_ic_corrected(&sys).unwrap();
        assert!(corrected.pass);
    }

    #[test]
    fn double_pr_probe_is_flagged_by_both_definitions() {
        let sys = double_pr_system().unwrap();
        let flawed = multipartite_ic_flawed(&sys).unwrap();
        assert!(flawed.i_c_a < 1e-10);
        assert!((flawed.value - 2.0).abs() < 1e-10, "flawed {}", flawed.value);
        assert!(!flawed.pass);
        // The corrected form still fails: the first pair alone carries two
        // bits through a one-bit message, a genuine violation.
        let corrected = multipartite_ic_corrected(&sys).unwrap();
        assert!((corrected.value - 2.0).abs() < 1e-10, "corrected {}", corrected.value);
        assert!(!corrected.pass);
    }

    /// Independent oracle for the probe system: brute-force joint table
    /// built from the raw hidden variables rather than the reduced form.
    #[test]
    fn double_pr_table_matches_hidden_variable_enumeration() {
        let sys = double_pr_system().unwrap();
        for a_code in 0..4usize {
            let (a0, a1) = (address_bit(a_code, 0, 2), address_bit(a_code, 1, 2));
            for m1 in 0..2usize {
                for m2 in 0..2usize {
                    for c in 0..2usize {
                        for g1 in 0..2usize {
                            for g2 in 0..2usize {
                                let mut p = 0.0;
                                for oa in 0..2usize {
                                    for ob in 0..2usize {
                                        let c_hv = a0 ^ oa;
                                        let g1_hv = oa ^ ((a0 ^ a1) & m1);
                                        let g2_hv = ob ^ ((a0 ^ a1) & m2);
                                        if c_hv == c && g1_hv == g1 && g2_hv == g2 {
                                            p += 0.25;
                                        }
                                    }
                                }
                                let got =
                                    sys.behavior.prob(&[a_code, m1, m2], &[c, g1, g2]);
                                assert!((got - p).abs() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }
}
