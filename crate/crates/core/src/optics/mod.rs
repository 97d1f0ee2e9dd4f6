//! Physical model of the programmable gate: polarization states, the
//! heralded two-photon interaction on the PBS, and the resulting
//! single-qubit operation.

mod hom;
mod pbs;

pub use hom::{hom_scan, optical_visibility, HomModel};
pub use pbs::{pbs_coincidence, CoincidenceTable, PbsModel, DATA_PORT_PHASE};

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::qmath::{kron, partial_trace_in, phase, CMat, CVec, ChoiMatrix, DensityMatrix2, Mat2, Vec2, Vec4, C64, ONE, ZERO};

/// Pure single-photon polarization state over `{H, V}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolKet(Vec2);

impl PolKet {
    /// Normalizes `(a_h, a_v)`; `None` for the zero vector or non-finite input.
    pub fn new(a_h: C64, a_v: C64) -> Option<Self> {
        let v = CVec([a_h, a_v]);
        if !v.is_finite() {
            return None;
        }
        v.normalized().map(Self)
    }

    pub fn h() -> Self {
        Self(CVec([ONE, ZERO]))
    }

    pub fn v() -> Self {
        Self(CVec([ZERO, ONE]))
    }

    /// `(|H⟩ + |V⟩)/√2`
    pub fn diagonal() -> Self {
        Self::balanced(ONE)
    }

    /// `(|H⟩ − |V⟩)/√2`
    pub fn antidiagonal() -> Self {
        Self::balanced(-ONE)
    }

    /// `(|H⟩ + i|V⟩)/√2`
    pub fn right() -> Self {
        Self::balanced(C64::new(0.0, 1.0))
    }

    /// `(|H⟩ − i|V⟩)/√2`
    pub fn left() -> Self {
        Self::balanced(C64::new(0.0, -1.0))
    }

    /// `cos θ |H⟩ + sin θ |V⟩`
    pub fn linear(theta: f64) -> Self {
        Self(CVec([C64::from(theta.cos()), C64::from(theta.sin())]))
    }

    fn balanced(v_amp: C64) -> Self {
        let s = C64::from(FRAC_1_SQRT_2);
        Self(CVec([s, v_amp * s]))
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        self.0 .0
    }

    pub fn vector(&self) -> &Vec2 {
        &self.0
    }

    pub fn density(&self) -> DensityMatrix2 {
        DensityMatrix2::pure(&self.0)
    }
}

/// State of the program photon, which selects the operation applied to the data photon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "angle", rename_all = "lowercase")]
pub enum ProgramSetting {
    /// `(|H⟩ + e^{iφ}|V⟩)/√2`: phase gate `diag(1, e^{iφ})`.
    Phase(f64),
    /// `cos θ |H⟩ + sin θ |V⟩`: partial polarization filter.
    Filter(f64),
}

impl ProgramSetting {
    pub fn ket(&self) -> PolKet {
        match *self {
            ProgramSetting::Phase(phi) => PolKet::balanced(phase(phi)),
            ProgramSetting::Filter(theta) => PolKet::linear(theta),
        }
    }

    pub fn angle(&self) -> f64 {
        match *self {
            ProgramSetting::Phase(a) | ProgramSetting::Filter(a) => a,
        }
    }

    /// Operation the gate should apply (up to the ½ or 1/√2 heralding amplitude).
    pub fn target_operator(&self) -> Mat2 {
        match *self {
            ProgramSetting::Phase(phi) => ideal_phase_unitary(phi),
            ProgramSetting::Filter(theta) => Mat2::from_real_diag([theta.cos(), theta.sin()]),
        }
    }
}

impl std::fmt::Display for ProgramSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProgramSetting::Phase(a) => write!(f, "phase:{a}"),
            ProgramSetting::Filter(a) => write!(f, "filter:{a}"),
        }
    }
}

impl std::str::FromStr for ProgramSetting {
    type Err = String;

    /// Parses `phase:<rad>` or `filter:<rad>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| format!("expected phase:<rad> or filter:<rad>, got {s:?}"))?;
        let angle: f64 = value
            .trim()
            .parse()
            .map_err(|e| format!("bad angle {value:?}: {e}"))?;
        if !angle.is_finite() {
            return Err(format!("angle must be finite, got {angle}"));
        }
        match mode.trim().to_ascii_lowercase().as_str() {
            "phase" => Ok(ProgramSetting::Phase(angle)),
            "filter" => Ok(ProgramSetting::Filter(angle)),
            other => Err(format!("unknown program mode {other:?}")),
        }
    }
}

/// Single-Kraus (pure) operation on the data qubit, generally sub-normalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrausOp(pub Mat2);

impl KrausOp {
    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    /// Singular values within `[0, 1]`, i.e. `K†K ≤ 𝟙`.
    pub fn is_physical(&self) -> bool {
        let kk = self.0.adjoint() * self.0;
        kk.eigenvalues_hermitian()
            .map(|ev| ev[1] <= 1.0 + 1e-12)
            .unwrap_or(false)
    }

    pub fn apply(&self, ket: &PolKet) -> Vec2 {
        self.0.apply(ket.vector())
    }
}

/// `diag(1, e^{iφ})`
pub fn ideal_phase_unitary(phi: f64) -> Mat2 {
    Mat2::diag([ONE, phase(phi)])
}

pub fn program_ket(setting: ProgramSetting) -> PolKet {
    setting.ket()
}

/// Heralded operation on the data photon when the program photon is detected in `|+⟩`.
pub fn effective_kraus(setting: ProgramSetting, pbs: &PbsModel) -> KrausOp {
    let program = setting.ket();
    let herald = PolKet::diagonal();
    let herald = herald.amplitudes();
    let mut k = Mat2::zeros();
    for (col, input) in [PolKet::h(), PolKet::v()].iter().enumerate() {
        let table = pbs_coincidence(input, &program, pbs);
        for row in 0..2 {
            k.0[row][col] = (0..2)
                .map(|y| herald[y].conj() * table.amplitude(row, y))
                .sum();
        }
    }
    KrausOp(ideal_phase_unitary(pbs.delta_phi) * k)
}

/// `(𝟙 ⊗ K)|Φ⁺⟩⟨Φ⁺|(𝟙 ⊗ K†)` with unnormalized `|Φ⁺⟩ = |HH⟩ + |VV⟩`.
pub fn choi_from_kraus(k: &KrausOp) -> ChoiMatrix {
    let mut v = Vec4::zeros();
    for input in 0..2 {
        for output in 0..2 {
            v.0[2 * input + output] = k.0 .0[output][input];
        }
    }
    ChoiMatrix(v.projector())
}

/// `ρ_out = Tr_in[(ρᵀ ⊗ 𝟙) χ]`
pub fn apply_process(chi: &ChoiMatrix, rho: &DensityMatrix2) -> DensityMatrix2 {
    let lifted = kron(&rho.0.transpose(), &CMat::identity());
    DensityMatrix2(partial_trace_in(&(lifted * chi.0)))
}

/// `Tr[K ρ K†]`
pub fn success_probability(k: &KrausOp, rho: &DensityMatrix2) -> f64 {
    (k.0 * rho.0 * k.0.adjoint()).trace_re()
}
