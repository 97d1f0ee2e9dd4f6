//! Two-photon scattering on a polarizing beam splitter with post-selection
//! on one photon per output port.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::C64;

use super::PolKet;

/// Amplitude coefficients of a lossless polarizing beam splitter plus the
/// effective relative phase picked up by the heralded data photon.
///
/// Per polarization `x` the splitter acts on the two spatial modes as
/// `[[t_x, i·r_x], [i·r_x, t_x]]`. Horizontal light is (mostly) transmitted,
/// vertical light (mostly) reflected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbsModel {
    pub t_h: f64,
    pub r_h: f64,
    pub t_v: f64,
    pub r_v: f64,
    /// Relative H/V phase applied to the heralded data output, radians.
    pub delta_phi: f64,
}

const LOSSLESS_TOL: f64 = 1e-12;

impl PbsModel {
    pub fn ideal() -> Self {
        Self {
            t_h: 1.0,
            r_h: 0.0,
            t_v: 0.0,
            r_v: 1.0,
            delta_phi: 0.0,
        }
    }

    /// Builds the model from intensity reflectances of the two polarizations.
    pub fn from_reflectances(v_reflectance: f64, h_reflectance: f64, delta_phi: f64) -> Result<Self> {
        for (name, r) in [("V", v_reflectance), ("H", h_reflectance)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!(
                    "{name} reflectance {r} outside [0, 1]"
                )));
            }
        }
        if !delta_phi.is_finite() {
            return Err(Error::Config("phase offset must be finite".into()));
        }
        Ok(Self {
            t_h: (1.0 - h_reflectance).sqrt(),
            r_h: h_reflectance.sqrt(),
            t_v: (1.0 - v_reflectance).sqrt(),
            r_v: v_reflectance.sqrt(),
            delta_phi,
        })
    }

    /// Splitting ratios 97.7:2.3 (V, reflected:transmitted) and
    /// 0.5:99.5 (H) with a −0.265 rad offset.
    pub fn imperfect_reference() -> Self {
        Self::from_reflectances(0.977, 0.005, -0.265).expect("valid constants")
    }

    pub fn with_delta_phi(self, delta_phi: f64) -> Self {
        Self { delta_phi, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.t_h, self.r_h, self.t_v, self.r_v, self.delta_phi];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("PBS coefficients must be finite".into()));
        }
        let h = self.t_h * self.t_h + self.r_h * self.r_h;
        let v = self.t_v * self.t_v + self.r_v * self.r_v;
        if (h - 1.0).abs() > LOSSLESS_TOL || (v - 1.0).abs() > LOSSLESS_TOL {
            return Err(Error::Config(format!(
                "PBS must be lossless: t_h²+r_h² = {h}, t_v²+r_v² = {v}"
            )));
        }
        Ok(())
    }

    /// Transmission amplitude for polarization index 0 (H) or 1 (V).
    #[inline]
    pub fn t(&self, pol: usize) -> f64 {
        [self.t_h, self.t_v][pol]
    }

    #[inline]
    pub fn r(&self, pol: usize) -> f64 {
        [self.r_h, self.r_v][pol]
    }
}

impl Default for PbsModel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Phase reference of the data output port, per polarization.
///
/// The path where both photons reflect carries `i·i = −1` relative to the
/// doubly transmitted path. The data-port V reference is shifted by π so
/// that the ideal splitter realizes `diag(1, e^{iφ})` exactly; any other
/// choice is absorbed into `delta_phi`.
pub const DATA_PORT_PHASE: [f64; 2] = [0.0, PI];

/// Post-selected two-photon amplitudes `A[x][y]` for polarization `x` in the
/// data output port and `y` in the program output port.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoincidenceTable(pub [[C64; 2]; 2]);

impl CoincidenceTable {
    pub fn amplitude(&self, data_pol: usize, program_pol: usize) -> C64 {
        self.0[data_pol][program_pol]
    }

    /// Probability that exactly one photon leaves each port.
    pub fn coincidence_probability(&self) -> f64 {
        self.0.iter().flatten().map(|a| a.norm_sqr()).sum()
    }
}

/// Scatters the data photon (entering the data input port) and the program
/// photon (entering the program input port) and keeps the terms with one
/// photon in each output port.
///
/// Only two routings survive post-selection: both photons transmitted
/// (data → data port, program → program port) or both reflected (data →
/// program port, program → data port). For data polarization `x` in the data
/// port and `y` in the program port this gives
/// `t_x t_y a_x p_y − r_x r_y a_y p_x`, up to the data-port phase reference.
pub fn pbs_coincidence(data: &PolKet, program: &PolKet, pbs: &PbsModel) -> CoincidenceTable {
    let a = data.amplitudes();
    let p = program.amplitudes();
    let mut table = [[C64::new(0.0, 0.0); 2]; 2];
    for (x, row) in table.iter_mut().enumerate() {
        let port_phase = C64::from_polar(1.0, DATA_PORT_PHASE[x]);
        for (y, cell) in row.iter_mut().enumerate() {
            let transmitted = a[x] * p[y] * (pbs.t(x) * pbs.t(y));
            // the photon in the data port is now the program photon
            let reflected = a[y] * p[x] * (pbs.r(x) * pbs.r(y));
            *cell = port_phase * (transmitted - reflected);
        }
    }
    CoincidenceTable(table)
}
