//! Figures of merit and the phase-offset calibration.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{apply_process, choi_from_kraus, ideal_phase_unitary, KrausOp, PolKet};
use crate::qmath::{kron, ChoiMatrix, Mat2, Mat4};
use crate::tomo::StateLabel;

/// Relative size of the H–V coherence below which a process has no phase.
pub const UNDEFINED_PHASE_TOL: f64 = 1e-12;

const TRACE_EPS: f64 = 1e-300;

/// Choi matrix of `diag(1, e^{iφ})`; trace 2.
pub fn ideal_choi_phase(phi: f64) -> ChoiMatrix {
    choi_from_kraus(&KrausOp(ideal_phase_unitary(phi)))
}

/// `(cos θ |HH⟩ + sin θ |VV⟩)(h.c.)`; trace 1.
pub fn ideal_choi_filter(theta: f64) -> ChoiMatrix {
    choi_from_kraus(&KrausOp(Mat2::from_real_diag([theta.cos(), theta.sin()])))
}

/// `Tr[χ χ_id] / (Tr χ · Tr χ_id)`, a proper fidelity when `chi_id` is rank 1.
pub fn process_fidelity(chi: &ChoiMatrix, chi_id: &ChoiMatrix) -> Result<f64> {
    let (ta, tb) = (chi.trace(), chi_id.trace());
    if ta.abs() <= TRACE_EPS || tb.abs() <= TRACE_EPS {
        return Err(Error::ZeroTrace);
    }
    let f = chi.0.trace_product(&chi_id.0).re / (ta * tb);
    Ok(f.clamp(0.0, 1.0))
}

/// Maps an angle onto `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Phase `φ ∈ [0, 2π)` maximizing `Tr[χ χ_id(φ)]`.
///
/// The overlap equals `χ₀₀ + χ₃₃ + 2 Re(e^{iφ} χ₀₃)`, so the maximum sits at
/// `arg χ₃₀`. Returns `None` when `|χ₃₀|` is negligible against `Tr χ`, i.e.
/// the process carries no H–V coherence.
pub fn effective_phase(chi: &ChoiMatrix) -> Option<f64> {
    let coherence = chi.0[(3, 0)];
    if 2.0 * coherence.norm() < UNDEFINED_PHASE_TOL * chi.trace().abs() {
        return None;
    }
    Some(coherence.arg().rem_euclid(TAU))
}

/// Brute-force maximization of `Tr[χ χ_id(φ)]` on a 1 mrad grid with a
/// parabolic refinement around the best node.
pub fn effective_phase_grid(chi: &ChoiMatrix) -> Option<f64> {
    const STEP: f64 = 1e-3;
    let n = (TAU / STEP).ceil() as usize;
    let h = TAU / n as f64;
    let overlap = |phi: f64| chi.0.trace_product(&ideal_choi_phase(phi).0).re;

    let values: Vec<f64> = (0..n).map(|i| overlap(i as f64 * h)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let lo = values[(best + n - 1) % n];
    let mid = values[best];
    let hi = values[(best + 1) % n];
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread < UNDEFINED_PHASE_TOL * chi.trace().abs() {
        return None;
    }
    let curvature = lo - 2.0 * mid + hi;
    let shift = if curvature < 0.0 {
        0.5 * (lo - hi) / curvature
    } else {
        0.0
    };
    Some(((best as f64 + shift) * h).rem_euclid(TAU))
}

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let scale = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= 1e-24 * scale * scale {
        return Err(Error::DegenerateFit);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub slope: f64,
    /// Phase offset `δφ`, radians in `(−π, π]`.
    pub offset: f64,
    /// Unwrapped `φ_eff` minus the fitted line, in the order of increasing `φ`.
    pub residuals: Vec<f64>,
}

impl PhaseFit {
    pub fn rms_residual(&self) -> f64 {
        let n = self.residuals.len().max(1) as f64;
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt()
    }
}

/// Fits `φ_eff = slope·φ + δφ`.
///
/// Points are ordered by `φ`, then `φ_eff` is unwrapped so that successive
/// differences lie in `(−π, π]` before the least-squares fit.
pub fn fit_phase_offset(points: &[(f64, f64)]) -> Result<PhaseFit> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut unwrapped = Vec::with_capacity(sorted.len());
    for (i, &(phi, eff)) in sorted.iter().enumerate() {
        let value = if i == 0 {
            eff
        } else {
            let prev: f64 = unwrapped.last().map(|p: &(f64, f64)| p.1).unwrap();
            prev + wrap_phase(eff - prev)
        };
        unwrapped.push((phi, value));
    }
    let line = linear_fit(&unwrapped)?;
    let residuals = unwrapped
        .iter()
        .map(|(x, y)| y - (line.slope * x + line.intercept))
        .collect();
    Ok(PhaseFit {
        slope: line.slope,
        offset: wrap_phase(line.intercept),
        residuals,
    })
}

/// Removes an output phase offset: `(𝟙 ⊗ U(−δφ)) χ (𝟙 ⊗ U(−δφ))†`.
pub fn compensate_choi(chi: &ChoiMatrix, delta_phi: f64) -> ChoiMatrix {
    let w: Mat4 = kron(&Mat2::identity(), &ideal_phase_unitary(-delta_phi));
    ChoiMatrix(w * chi.0 * w.adjoint())
}

/// `⟨ψ|ρ|ψ⟩ / Tr ρ`
pub fn state_fidelity(psi: &PolKet, rho: &crate::qmath::DensityMatrix2) -> Result<f64> {
    let tr = rho.trace();
    if tr.abs() <= TRACE_EPS {
        return Err(Error::ZeroTrace);
    }
    Ok((rho.0.expectation(psi.vector()).re / tr).clamp(0.0, 1.0))
}

/// Mean state fidelity over the six canonical inputs against `U(φ)|ψ⟩`.
pub fn average_state_fidelity(chi: &ChoiMatrix, phi: f64) -> Result<f64> {
    average_state_fidelity_against(chi, &ideal_phase_unitary(phi))
}

/// Same for a single-Kraus process.
pub fn average_state_fidelity_kraus(k: &KrausOp, phi: f64) -> Result<f64> {
    average_state_fidelity(&choi_from_kraus(k), phi)
}

/// Mean state fidelity over the canonical inputs whose ideal output
/// `target·|ψ⟩` is non-zero; each ideal output is normalized.
pub fn average_state_fidelity_against(chi: &ChoiMatrix, target: &Mat2) -> Result<f64> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for label in StateLabel::ALL {
        let input = label.ket();
        let ideal = target.apply(input.vector());
        let Some(ideal) = PolKet::new(ideal.0[0], ideal.0[1]).filter(|_| ideal.norm() > 1e-12) else {
            continue;
        };
        let out = apply_process(chi, &input.density());
        sum += state_fidelity(&ideal, &out)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::ZeroTrace);
    }
    Ok(sum / used as f64)
}

/// Average state fidelity implied by a process fidelity for trace-preserving
/// maps on a qubit: `(2F + 1) / 3`.
pub fn horodecki_avg(f_chi: f64) -> f64 {
    (2.0 * f_chi + 1.0) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{effective_kraus, PbsModel, ProgramSetting};
    use crate::qmath::{CVec, DensityMatrix2, ONE, ZERO};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn ideal_phase_choi_examples() {
        let bell = CVec([ONE, ZERO, ZERO, ONE]).projector();
        assert!(ideal_choi_phase(0.0).0.max_abs_diff(&bell) < 1e-15);
        let anti = CVec([ONE, ZERO, ZERO, -ONE]).projector();
        assert!(ideal_choi_phase(PI).0.max_abs_diff(&anti) < 1e-15);
        for phi in [0.0, 1.0, 4.0] {
            assert!((ideal_choi_phase(phi).trace() - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ideal_filter_choi_examples() {
        let balanced = ideal_choi_filter(FRAC_PI_4);
        assert!(balanced.0.max_abs_diff(&ideal_choi_phase(0.0).0.scale_re(0.5)) < 1e-15);
        assert!(ideal_choi_filter(0.0)
            .0
            .max_abs_diff(&Mat4::from_real_diag([1.0, 0.0, 0.0, 0.0]))
            < 1e-15);
        assert!(ideal_choi_filter(FRAC_PI_2)
            .0
            .max_abs_diff(&Mat4::from_real_diag([0.0, 0.0, 0.0, 1.0]))
            < 1e-15);
        assert!((ideal_choi_filter(0.3).trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn process_fidelity_examples() {
        let a = ideal_choi_phase(0.7);
        assert!((process_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(process_fidelity(&ideal_choi_phase(0.0), &ideal_choi_phase(PI)).unwrap() < 1e-15);
        let f = process_fidelity(&ideal_choi_phase(0.0), &ideal_choi_phase(FRAC_PI_2)).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        assert!(matches!(
            process_fidelity(&ChoiMatrix(Mat4::zeros()), &a),
            Err(Error::ZeroTrace)
        ));
    }

    #[test]
    fn effective_phase_examples() {
        for phi0 in [0.0, 0.1, 2.5, PI, 6.0] {
            let got = effective_phase(&ideal_choi_phase(phi0)).unwrap();
            assert!(wrap_phase(got - phi0).abs() < 1e-12);
        }
        let pbs = PbsModel::ideal().with_delta_phi(0.4);
        let chi = choi_from_kraus(&effective_kraus(ProgramSetting::Phase(1.0), &pbs));
        assert!((effective_phase(&chi).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(effective_phase(&ideal_choi_filter(0.0)), None);
        assert_eq!(effective_phase_grid(&ideal_choi_filter(0.0)), None);
    }

    #[test]
    fn closed_form_agrees_with_grid_search() {
        let pbs = PbsModel::imperfect_reference();
        for k in 0..8 {
            let chi = choi_from_kraus(&effective_kraus(ProgramSetting::Phase(k as f64 * FRAC_PI_4), &pbs));
            let a = effective_phase(&chi).unwrap();
            let b = effective_phase_grid(&chi).unwrap();
            assert!(wrap_phase(a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn fit_examples() {
        let exact: Vec<_> = (0..8).map(|k| (k as f64 * FRAC_PI_4, k as f64 * FRAC_PI_4)).collect();
        let fit = fit_phase_offset(&exact).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-14 && fit.offset.abs() < 1e-14);

        let wrapped: Vec<_> = (0..8)
            .map(|k| {
                let phi = k as f64 * FRAC_PI_4;
                (phi, (phi - 0.265).rem_euclid(TAU))
            })
            .collect();
        let fit = fit_phase_offset(&wrapped).unwrap();
        assert!((fit.offset + 0.265).abs() < 1e-12);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(fit.rms_residual() < 1e-12);

        let manual: Vec<_> = (0..8)
            .map(|k| {
                let phi = k as f64 * FRAC_PI_4;
                (phi, phi - 0.265)
            })
            .collect();
        let reference = fit_phase_offset(&manual).unwrap();
        assert!((reference.offset - fit.offset).abs() < 1e-12);
        assert!((reference.slope - fit.slope).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_distinct_phases() {
        assert!(matches!(
            fit_phase_offset(&[(1.0, 0.5), (1.0, 0.7), (1.0, 0.6)]),
            Err(Error::DegenerateFit)
        ));
        assert!(matches!(fit_phase_offset(&[(1.0, 0.5)]), Err(Error::DegenerateFit)));
    }

    #[test]
    fn compensation_examples() {
        let chi = ideal_choi_phase(1.2);
        let shifted = compensate_choi(&chi, 0.5);
        assert!(shifted.0.max_abs_diff(&ideal_choi_phase(0.7).0) < 1e-15);
        assert_eq!(compensate_choi(&chi, 0.0), chi);

        let pbs = PbsModel::imperfect_reference();
        let chi = choi_from_kraus(&effective_kraus(ProgramSetting::Phase(2.0), &pbs));
        let target = 0.9;
        let moved = compensate_choi(&chi, effective_phase(&chi).unwrap() - target);
        assert!(wrap_phase(effective_phase(&moved).unwrap() - target).abs() < 1e-12);
        assert!((moved.trace() - chi.trace()).abs() < 1e-15);
    }

    #[test]
    fn state_fidelity_examples() {
        let r = PolKet::right();
        assert!((state_fidelity(&r, &r.density()).unwrap() - 1.0).abs() < 1e-15);
        assert!(state_fidelity(&PolKet::h(), &PolKet::v().density()).unwrap() < 1e-30);
        let mixed = DensityMatrix2::maximally_mixed();
        assert!((state_fidelity(&PolKet::diagonal(), &mixed).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            state_fidelity(&PolKet::h(), &DensityMatrix2(Mat2::zeros())),
            Err(Error::ZeroTrace)
        ));
    }

    #[test]
    fn average_state_fidelity_examples() {
        for phi in [0.0, 1.0, 3.0] {
            let gate = effective_kraus(ProgramSetting::Phase(phi), &PbsModel::ideal());
            assert!((average_state_fidelity_kraus(&gate, phi).unwrap() - 1.0).abs() < 1e-14);
            let wrong = average_state_fidelity_kraus(&gate, phi + PI).unwrap();
            assert!((wrong - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn horodecki_examples() {
        assert_eq!(horodecki_avg(1.0), 1.0);
        assert!((horodecki_avg(0.0) - 1.0 / 3.0).abs() < 1e-16);
        assert!((horodecki_avg(0.971) - 0.980_666_666_666_666_7).abs() < 1e-15);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(7.0) - (7.0 - TAU)).abs() < 1e-15);
        assert!((wrap_phase(-0.265) + 0.265).abs() < 1e-15);
    }
}
