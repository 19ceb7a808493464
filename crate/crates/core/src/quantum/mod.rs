//! Small dense quantum states, measurements, and post-measurement updates.
//!
//! Dimensions are capped at 64 (six qubits); every construction in scope
//! needs at most three, so dense algebra over [`CMat`] is sufficient.
//! Measurement updates use the Lüders rule: the default Kraus operator for
//! an effect is its positive square root, and for projective effects that is
//! the projector itself.

mod cmat;

pub use cmat::{c, CMat, C};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Hard cap on matrix dimension (six qubits).
pub const MAX_DIM: usize = 64;
/// Tolerance for Hermiticity and trace checks.
pub const STATE_TOL: f64 = 1e-10;
/// Eigenvalue floor for the positive-semidefiniteness check.
pub const PSD_FLOOR: f64 = -1e-9;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("dimension {0} exceeds the supported maximum {MAX_DIM}")]
    TooLarge(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("zero-probability measurement outcome cannot be applied")]
    ZeroProbabilityOutcome,
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Result<Self, QuantumError> {
        if mat.dim() > MAX_DIM {
            return Err(QuantumError::TooLarge(mat.dim()));
        }
        if !mat.is_hermitian(STATE_TOL) {
            return Err(QuantumError::InvalidState("not Hermitian".into()));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QuantumError::InvalidState(format!("trace is {tr}, not 1")));
        }
        let (eigs, _) = mat.hermitian_eigen();
        if let Some(&lam) = eigs.iter().find(|&&l| l < PSD_FLOOR) {
            return Err(QuantumError::InvalidState(format!("negative eigenvalue {lam}")));
        }
        Ok(Self { mat })
    }

    /// ρ = |ψ⟩⟨ψ| from a state vector, normalizing it first.
    pub fn from_pure(amplitudes: &[C]) -> Result<Self, QuantumError> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(QuantumError::InvalidState("zero state vector".into()));
        }
        let psi: Vec<C> = amplitudes.iter().map(|a| a / norm2.sqrt()).collect();
        Self::new(CMat::outer(&psi))
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    /// Kronecker product of two states.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix, QuantumError> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(QuantumError::TooLarge(dim));
        }
        DensityMatrix::new(self.mat.kron(&other.mat))
    }

    /// Partial trace keeping the factors listed in `keep`, where `dims` gives
    /// the dimension of every tensor factor in order.
    pub fn partial_trace(&self, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix, QuantumError> {
        let total: usize = dims.iter().product();
        if total != self.dim() {
            return Err(QuantumError::DimensionMismatch(format!(
                "factor dims {dims:?} do not multiply to {}",
                self.dim()
            )));
        }
        if keep.iter().any(|&k| k >= dims.len()) {
            return Err(QuantumError::DimensionMismatch("keep index out of range".into()));
        }
        let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
        let keep_dim: usize = keep.iter().map(|&k| dims[k]).product();
        let traced_dim: usize = traced.iter().map(|&t| dims[t]).product();
        let mut out = CMat::zeros(keep_dim);

        // Multi-index helpers over the factor structure.
        let compose = |kept: usize, tr: usize| -> usize {
            let mut idx_per_factor = vec![0usize; dims.len()];
            let mut k = kept;
            for &f in keep.iter().rev() {
                idx_per_factor[f] = k % dims[f];
                k /= dims[f];
            }
            let mut t = tr;
            for &f in traced.iter().rev() {
                idx_per_factor[f] = t % dims[f];
                t /= dims[f];
            }
            let mut full = 0;
            for (f, &d) in dims.iter().enumerate() {
                full = full * d + idx_per_factor[f];
            }
            full
        };

        for i in 0..keep_dim {
            for j in 0..keep_dim {
                let mut sum = c(0.0, 0.0);
                for t in 0..traced_dim {
                    sum += self.mat[(compose(i, t), compose(j, t))];
                }
                out[(i, j)] = sum;
            }
        }
        DensityMatrix::new(out)
    }
}

/// Born probability Tr(ρ · E₁ ⊗ E₂ ⊗ …) with one effect per tensor factor,
/// clamped into [0, 1].
pub fn born(rho: &DensityMatrix, effects: &[&CMat]) -> Result<f64, QuantumError> {
    let dim: usize = effects.iter().map(|e| e.dim()).product();
    if dim != rho.dim() {
        return Err(QuantumError::DimensionMismatch(format!(
            "effects dim {} vs state dim {}",
            dim,
            rho.dim()
        )));
    }
    let mut op = effects[0].clone();
    for e in &effects[1..] {
        op = op.kron(e);
    }
    let p = rho.matrix().mul(&op).trace().re;
    debug_assert!((-1e-10..=1.0 + 1e-10).contains(&p), "born probability {p} out of range");
    Ok(p.clamp(0.0, 1.0))
}

/// Lüders update ρ → KρK† / Tr(KρK†) with the Kraus operator acting on one
/// tensor factor (`subsystem`, with factor dimensions `dims`).
pub fn post_measurement(
    rho: &DensityMatrix,
    kraus: &CMat,
    subsystem: usize,
    dims: &[usize],
) -> Result<DensityMatrix, QuantumError> {
    let total: usize = dims.iter().product();
    if total != rho.dim() || subsystem >= dims.len() || kraus.dim() != dims[subsystem] {
        return Err(QuantumError::DimensionMismatch(
            "kraus operator does not fit the named subsystem".into(),
        ));
    }
    let mut op = CMat::identity(1);
    for (f, &d) in dims.iter().enumerate() {
        let factor = if f == subsystem { kraus.clone() } else { CMat::identity(d) };
        op = op.kron(&factor);
    }
    let updated = op.mul(rho.matrix()).mul(&op.adjoint());
    let norm = updated.trace().re;
    if norm <= 1e-12 {
        return Err(QuantumError::ZeroProbabilityOutcome);
    }
    DensityMatrix::new(updated.scale(1.0 / norm))
}

/// One measurement: an effect and a Kraus operator per outcome.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub effects: Vec<CMat>,
    pub kraus: Vec<CMat>,
}

/// The measurements available on one party, indexed by input value.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    measurements: Vec<Measurement>,
    dim: usize,
}

impl MeasurementSet {
    /// Validates that each measurement's effects sum to the identity and
    /// that Kraus† · Kraus reproduces each effect.
    pub fn new(measurements: Vec<Measurement>) -> Result<Self, QuantumError> {
        let dim = measurements
            .first()
            .and_then(|m| m.effects.first())
            .map(|e| e.dim())
            .ok_or_else(|| QuantumError::InvalidMeasurement("empty measurement set".into()))?;
        for (mi, m) in measurements.iter().enumerate() {
            if m.effects.len() != m.kraus.len() || m.effects.is_empty() {
                return Err(QuantumError::InvalidMeasurement(format!(
                    "measurement {mi} has mismatched effect/kraus lists"
                )));
            }
            let mut sum = CMat::zeros(dim);
            for (e, k) in m.effects.iter().zip(&m.kraus) {
                if e.dim() != dim || k.dim() != dim {
                    return Err(QuantumError::InvalidMeasurement(format!(
                        "measurement {mi} mixes dimensions"
                    )));
                }
                if !e.is_hermitian(STATE_TOL) {
                    return Err(QuantumError::InvalidMeasurement(format!(
                        "measurement {mi} has a non-Hermitian effect"
                    )));
                }
                if k.adjoint().mul(k).max_abs_diff(e) > STATE_TOL {
                    return Err(QuantumError::InvalidMeasurement(format!(
                        "measurement {mi}: kraus†·kraus does not equal its effect"
                    )));
                }
                sum = sum.add(e);
            }
            if sum.max_abs_diff(&CMat::identity(dim)) > STATE_TOL {
                return Err(QuantumError::InvalidMeasurement(format!(
                    "measurement {mi}: effects do not sum to identity"
                )));
            }
        }
        Ok(Self { measurements, dim })
    }

    /// Builds measurements from effects alone, taking each Kraus operator as
    /// the positive square root of its effect.
    pub fn from_effects(effect_sets: Vec<Vec<CMat>>) -> Result<Self, QuantumError> {
        let measurements = effect_sets
            .into_iter()
            .map(|effects| {
                let kraus = effects.iter().map(|e| e.psd_sqrt()).collect();
                Measurement { effects, kraus }
            })
            .collect();
        Self::new(measurements)
    }

    /// Projective qubit measurements in the x–z plane of the Bloch sphere,
    /// one per angle. Outcome 0 is the +1 eigenvector of
    /// cos θ · σz + sin θ · σx.
    pub fn planar(angles: &[f64]) -> Self {
        let measurements = angles
            .iter()
            .map(|&theta| {
                let plus = planar_projector(theta, true);
                let minus = planar_projector(theta, false);
                Measurement { effects: vec![plus.clone(), minus.clone()], kraus: vec![plus, minus] }
            })
            .collect();
        Self::new(measurements).expect("planar projectors always form valid measurements")
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measurement(&self, input: usize) -> &Measurement {
        &self.measurements[input]
    }

    /// Number of outcomes of the widest measurement in the set.
    pub fn max_outcomes(&self) -> usize {
        self.measurements.iter().map(|m| m.effects.len()).max().unwrap_or(0)
    }
}

fn planar_projector(theta: f64, plus: bool) -> CMat {
    let sign = if plus { 1.0 } else { -1.0 };
    let (sin, cos) = theta.sin_cos();
    // (I ± (cos θ σz + sin θ σx)) / 2
    CMat::from_rows(&[
        &[c(0.5 * (1.0 + sign * cos), 0.0), c(0.5 * sign * sin, 0.0)],
        &[c(0.5 * sign * sin, 0.0), c(0.5 * (1.0 - sign * cos), 0.0)],
    ])
}

/// The two-qubit singlet state (|01⟩ − |10⟩)/√2.
pub fn singlet() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DensityMatrix::from_pure(&[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)]).unwrap()
}

/// The two-qubit state (|00⟩ + |11⟩)/√2.
pub fn phi_plus() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DensityMatrix::from_pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap()
}

/// The three-qubit state (|000⟩ + |111⟩)/√2.
pub fn ghz3() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![c(0.0, 0.0); 8];
    amps[0] = c(s, 0.0);
    amps[7] = c(s, 0.0);
    DensityMatrix::from_pure(&amps).unwrap()
}

/// Product of computational-basis qubit states, e.g. `&[0, 1]` → |01⟩⟨01|.
pub fn computational_product(bits: &[u8]) -> DensityMatrix {
    let n = bits.len();
    let mut idx = 0usize;
    for &b in bits {
        idx = idx * 2 + b as usize;
    }
    let mut amps = vec![c(0.0, 0.0); 1 << n];
    amps[idx] = c(1.0, 0.0);
    DensityMatrix::from_pure(&amps).unwrap()
}

/// Serializes a complex matrix as nested arrays of `[re, im]` pairs.
pub fn serialize_cmat<S: Serializer>(mat: &CMat, serializer: S) -> Result<S::Ok, S::Error> {
    let n = mat.dim();
    let mut rows = serializer.serialize_seq(Some(n))?;
    for i in 0..n {
        let row: Vec<[f64; 2]> = (0..n).map(|j| [mat[(i, j)].re, mat[(i, j)].im]).collect();
        rows.serialize_element(&row)?;
    }
    rows.end()
}

/// Wrapper giving any `CMat` the documented JSON form.
pub struct CMatJson<'a>(pub &'a CMat);

impl Serialize for CMatJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_cmat(self.0, serializer)
    }
}
