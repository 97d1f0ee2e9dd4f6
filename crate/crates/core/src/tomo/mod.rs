//! Process tomography: the 6 × 6 preparation/analysis protocol, synthetic
//! coincidence counts and maximum-likelihood reconstruction.

mod dataset;
mod mle;

pub use dataset::{read_dataset, write_dataset, DATASET_HEADER};
pub use mle::{loglikelihood, mle_reconstruct, MleOptions, MleResult, Termination, PROBABILITY_FLOOR};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{KrausOp, PolKet, ProgramSetting};
use crate::par::{map_ordered, Execution};
use crate::qmath::{kron_vec, Mat4, Vec4};

/// One of the six canonical polarization states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    H,
    V,
    /// diagonal, `|+⟩`
    P,
    /// anti-diagonal, `|−⟩`
    M,
    R,
    L,
}

impl StateLabel {
    pub const ALL: [StateLabel; 6] = [
        StateLabel::H,
        StateLabel::V,
        StateLabel::P,
        StateLabel::M,
        StateLabel::R,
        StateLabel::L,
    ];

    pub fn ket(self) -> PolKet {
        match self {
            StateLabel::H => PolKet::h(),
            StateLabel::V => PolKet::v(),
            StateLabel::P => PolKet::diagonal(),
            StateLabel::M => PolKet::antidiagonal(),
            StateLabel::R => PolKet::right(),
            StateLabel::L => PolKet::left(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            StateLabel::H => 'H',
            StateLabel::V => 'V',
            StateLabel::P => 'P',
            StateLabel::M => 'M',
            StateLabel::R => 'R',
            StateLabel::L => 'L',
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for StateLabel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "H" => Ok(StateLabel::H),
            "V" => Ok(StateLabel::V),
            "P" => Ok(StateLabel::P),
            "M" => Ok(StateLabel::M),
            "R" => Ok(StateLabel::R),
            "L" => Ok(StateLabel::L),
            other => Err(format!("unknown state label {other:?} (expected H, V, P, M, R or L)")),
        }
    }
}

/// Data-photon preparation and the analysis projection that heralds a count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub input: StateLabel,
    pub projector: StateLabel,
}

impl MeasurementSetting {
    pub fn new(input: StateLabel, projector: StateLabel) -> Self {
        Self { input, projector }
    }

    /// Position in [`canonical_settings`].
    pub fn index(&self) -> usize {
        6 * self.input.index() + self.projector.index()
    }

    /// `conj|input⟩ ⊗ |projector⟩`; the measurement operator is its projector.
    pub fn operator_vector(&self) -> Vec4 {
        let input = self.input.ket().vector().clone();
        let conj_input = crate::qmath::CVec(input.0.map(|a| a.conj()));
        kron_vec(&conj_input, self.projector.ket().vector())
    }
}

pub const SETTINGS_COUNT: usize = 36;

/// Inputs in the outer loop, projectors inner, both in the order H, V, +, −, R, L.
pub fn canonical_settings() -> Vec<MeasurementSetting> {
    StateLabel::ALL
        .iter()
        .flat_map(|&input| {
            StateLabel::ALL
                .iter()
                .map(move |&projector| MeasurementSetting::new(input, projector))
        })
        .collect()
}

/// `|⟨proj| K |input⟩|²`
pub fn expected_probability(k: &KrausOp, s: &MeasurementSetting) -> f64 {
    let out = k.apply(&s.input.ket());
    s.projector.ket().vector().inner(&out).norm_sqr()
}

/// `(|in⟩⟨in|)ᵀ ⊗ |proj⟩⟨proj|`, so that `p = Tr[χ M]`.
pub fn measurement_operator(s: &MeasurementSetting) -> Mat4 {
    s.operator_vector().projector()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    /// Coincidence counts. Integral for sampled data; noiseless data carry
    /// the exact expected value.
    pub counts: f64,
    /// Seconds.
    pub exposure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyDataset {
    /// One record per setting, in canonical order.
    pub records: Vec<CountRecord>,
    pub program: Option<ProgramSetting>,
    /// Coincidence rate at unit heralding probability, counts per second.
    pub rate_calibration: Option<f64>,
    pub seed: Option<u64>,
}

impl TomographyDataset {
    /// Checks record completeness and sorts records into canonical order.
    pub fn new(
        records: Vec<CountRecord>,
        program: Option<ProgramSetting>,
        rate_calibration: Option<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut slots: [Option<CountRecord>; SETTINGS_COUNT] = [None; SETTINGS_COUNT];
        for rec in records {
            if !(rec.counts >= 0.0) || !rec.counts.is_finite() {
                return Err(Error::Config(format!(
                    "counts must be finite and non-negative, got {}",
                    rec.counts
                )));
            }
            if !(rec.exposure > 0.0) || !rec.exposure.is_finite() {
                return Err(Error::Config(format!(
                    "exposure must be positive, got {}",
                    rec.exposure
                )));
            }
            let slot = &mut slots[rec.setting.index()];
            if slot.is_some() {
                return Err(Error::DuplicateRecord {
                    input: rec.setting.input,
                    projector: rec.setting.projector,
                });
            }
            *slot = Some(rec);
        }
        let mut ordered = Vec::with_capacity(SETTINGS_COUNT);
        for (slot, setting) in slots.into_iter().zip(canonical_settings()) {
            match slot {
                Some(rec) => ordered.push(rec),
                None => {
                    return Err(Error::MissingRecord {
                        input: setting.input,
                        projector: setting.projector,
                    })
                }
            }
        }
        Ok(Self {
            records: ordered,
            program,
            rate_calibration,
            seed,
        })
    }

    pub fn total_counts(&self) -> f64 {
        self.records.iter().map(|r| r.counts).sum()
    }

    /// Heralding probability averaged over the six inputs, estimated from the
    /// count totals. Each input is analysed in three complete bases.
    pub fn empirical_success_probability(&self) -> Option<f64> {
        let rate = self.rate_calibration.filter(|r| *r > 0.0)?;
        let mean = self
            .records
            .iter()
            .map(|r| r.counts / (rate * r.exposure))
            .sum::<f64>();
        Some(mean / (3.0 * 6.0))
    }
}

/// Acquisition parameters shared by every setting of one tomography run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    /// Seconds per setting.
    pub exposure: f64,
    /// Counts per second at unit heralding probability.
    pub rate_calibration: f64,
    /// Use exact expected counts instead of Poisson samples.
    pub noiseless: bool,
}

impl Acquisition {
    pub fn validate(&self) -> Result<()> {
        if !(self.exposure > 0.0) || !self.exposure.is_finite() {
            return Err(Error::Config(format!("exposure must be positive, got {}", self.exposure)));
        }
        if !(self.rate_calibration >= 0.0) || !self.rate_calibration.is_finite() {
            return Err(Error::Config(format!(
                "rate calibration must be non-negative, got {}",
                self.rate_calibration
            )));
        }
        Ok(())
    }
}

/// ChaCha stream index for one setting of one tomography run.
///
/// The seed is shared by everything; streams are split as
/// `run_stream · 64 + setting_index`, so runs never overlap.
pub fn setting_stream(run_stream: u64, setting_index: usize) -> u64 {
    run_stream * 64 + setting_index as u64
}

/// Generates one coincidence count per canonical setting with
/// `counts ~ Poisson(rate · exposure · p)`.
pub fn simulate_counts(
    k: &KrausOp,
    program: ProgramSetting,
    acq: &Acquisition,
    seed: u64,
    run_stream: u64,
    exec: Execution,
) -> Result<TomographyDataset> {
    acq.validate()?;
    let settings = canonical_settings();
    let records = map_ordered(exec, &settings, |j, s| {
        let mean = acq.rate_calibration * acq.exposure * expected_probability(k, s);
        let counts = if acq.noiseless {
            mean
        } else {
            sample_poisson(mean, seed, setting_stream(run_stream, j))
        };
        CountRecord {
            setting: *s,
            counts,
            exposure: acq.exposure,
        }
    });
    TomographyDataset::new(records, Some(program), Some(acq.rate_calibration), Some(seed))
}

fn sample_poisson(mean: f64, seed: u64, stream: u64) -> f64 {
    if !(mean > 0.0) {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(&mut rng)
}
