//! Hong-Ou-Mandel dip in the data output port.
//!
//! Alignment configuration: data photon H and program photon V, so both leave
//! through the data port. A half-wave plate maps H/V onto the diagonal basis
//! and an analysis PBS splits the light onto two detectors. For perfectly
//! indistinguishable photons and a perfect analyzer no coincidences occur.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{PbsModel, PolKet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomModel {
    /// Mode overlap (indistinguishability) of the two photons, in `[0, 1]`.
    pub overlap: f64,
    /// Width of the Gaussian dip envelope, seconds.
    pub coherence_time: f64,
    /// Coincidence rate far outside the dip, counts per second.
    pub baseline_rate: f64,
}

impl Default for HomModel {
    fn default() -> Self {
        Self {
            overlap: 0.997,
            coherence_time: 0.5e-12,
            baseline_rate: 1000.0,
        }
    }
}

impl HomModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.coherence_time > 0.0) || !self.coherence_time.is_finite() {
            return Err(Error::Config(format!(
                "coherence time must be positive, got {}",
                self.coherence_time
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Config(format!(
                "mode overlap must lie in [0, 1], got {}",
                self.overlap
            )));
        }
        if !(self.baseline_rate >= 0.0) || !self.baseline_rate.is_finite() {
            return Err(Error::Config(format!(
                "baseline rate must be non-negative, got {}",
                self.baseline_rate
            )));
        }
        Ok(())
    }
}

/// Dip visibility for perfectly overlapping photons, limited only by the
/// analysis splitter. Equals 1 for an ideal analyzer.
pub fn optical_visibility(analysis: &PbsModel) -> f64 {
    // after the half-wave plate: H → |+⟩, V → |−⟩
    let first = PolKet::diagonal().amplitudes();
    let second = PolKet::antidiagonal().amplitudes();

    let mut indistinguishable = 0.0;
    let mut distinguishable = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            // one photon transmitted with polarization x, the other reflected with y
            let weight = (analysis.t(x) * analysis.r(y)).powi(2);
            let a = first[x] * second[y];
            let b = second[x] * first[y];
            indistinguishable += weight * (a + b).norm_sqr();
            distinguishable += weight * (a.norm_sqr() + b.norm_sqr());
        }
    }
    if distinguishable == 0.0 {
        return 0.0;
    }
    1.0 - indistinguishable / distinguishable
}

/// Coincidence rate versus relative delay:
/// `baseline · (1 − V·exp(−τ²/(2 τ_c²)))` with `V = overlap · optical_visibility`.
pub fn hom_scan(delays: &[f64], hom: &HomModel, analysis: &PbsModel) -> Result<Vec<(f64, f64)>> {
    hom.validate()?;
    let visibility = hom.overlap * optical_visibility(analysis);
    let two_tc2 = 2.0 * hom.coherence_time * hom.coherence_time;
    Ok(delays
        .iter()
        .map(|&tau| {
            let envelope = (-tau * tau / two_tc2).exp();
            (tau, hom.baseline_rate * (1.0 - visibility * envelope))
        })
        .collect())
}
