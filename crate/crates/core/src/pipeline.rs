//! End-to-end experiment runs: simulate tomography data for every grid
//! point, reconstruct, calibrate the phase offset and score the result.
//!
//! Grid points are independent and run through [`map_ordered`], so reports
//! come out in grid order whatever the scheduling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    average_state_fidelity_against, compensate_choi, effective_phase, fit_phase_offset, horodecki_avg,
    ideal_choi_filter, ideal_choi_phase, linear_fit, process_fidelity, LinearFit, PhaseFit,
};
use crate::optics::{effective_kraus, hom_scan, optical_visibility, HomModel, KrausOp, PbsModel, ProgramSetting};
use crate::par::{map_ordered, Execution};
use crate::qmath::ChoiMatrix;
use crate::tomo::{mle_reconstruct, simulate_counts, Acquisition, MleOptions, Termination, TomographyDataset};

/// Stream offsets keeping phase- and filter-sweep randomness disjoint.
pub const PHASE_STREAM_BASE: u64 = 0;
pub const FILTER_STREAM_BASE: u64 = 1 << 20;

/// Intensity splitting ratios of the gate PBS and its phase offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbsConfig {
    pub v_reflectance: f64,
    pub h_reflectance: f64,
    pub delta_phi: f64,
}

impl Default for PbsConfig {
    /// V 97.7:2.3, H 0.5:99.5, δφ = −0.265 rad.
    fn default() -> Self {
        Self {
            v_reflectance: 0.977,
            h_reflectance: 0.005,
            delta_phi: -0.265,
        }
    }
}

impl PbsConfig {
    pub fn ideal() -> Self {
        Self {
            v_reflectance: 1.0,
            h_reflectance: 0.0,
            delta_phi: 0.0,
        }
    }

    pub fn model(&self) -> Result<PbsModel> {
        PbsModel::from_reflectances(self.v_reflectance, self.h_reflectance, self.delta_phi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomConfig {
    pub overlap: f64,
    pub coherence_time_s: f64,
    pub baseline_rate: f64,
    /// Analysis splitter in front of the two data-port detectors.
    pub analysis_v_reflectance: f64,
    pub analysis_h_reflectance: f64,
    /// Relative delays to scan, seconds. Empty selects ±4 coherence times in 81 steps.
    pub delays_s: Vec<f64>,
}

impl Default for HomConfig {
    fn default() -> Self {
        let model = HomModel::default();
        Self {
            overlap: model.overlap,
            coherence_time_s: model.coherence_time,
            baseline_rate: model.baseline_rate,
            analysis_v_reflectance: 1.0,
            analysis_h_reflectance: 0.0,
            delays_s: Vec::new(),
        }
    }
}

impl HomConfig {
    pub fn model(&self) -> HomModel {
        HomModel {
            overlap: self.overlap,
            coherence_time: self.coherence_time_s,
            baseline_rate: self.baseline_rate,
        }
    }

    pub fn analysis(&self) -> Result<PbsModel> {
        PbsModel::from_reflectances(self.analysis_v_reflectance, self.analysis_h_reflectance, 0.0)
    }

    pub fn delays(&self) -> Vec<f64> {
        if !self.delays_s.is_empty() {
            return self.delays_s.clone();
        }
        let tc = self.coherence_time_s;
        (0..=80).map(|i| (i as f64 - 40.0) * 0.1 * tc).collect()
    }
}

/// Full description of a simulated experiment. Every field has a default
/// reproducing the reference scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pbs: PbsConfig,
    /// Seconds per tomography setting (5 s × 10 repetitions).
    pub exposure_s: f64,
    /// Twofold rate at unit heralding probability. 5200 s⁻¹ puts the summed
    /// coincidence rate of an ideal gate (p = 1/4) at 1300 s⁻¹.
    pub rate_calibration: f64,
    pub seed: u64,
    /// Replace Poisson samples by exact expected counts.
    pub noiseless: bool,
    pub phase_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub mle: MleOptions,
    /// Fixed compensation offset; when absent it is fitted from the phase sweep.
    pub compensation_delta_phi: Option<f64>,
    pub hom: HomConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pbs: PbsConfig::default(),
            exposure_s: 50.0,
            rate_calibration: 5200.0,
            seed: 1,
            noiseless: false,
            phase_grid: (0..8).map(|k| k as f64 * PI / 4.0).collect(),
            theta_grid: (0..=8).map(|n| n as f64 * PI / 16.0).collect(),
            mle: MleOptions::default(),
            compensation_delta_phi: None,
            hom: HomConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.pbs.model()?.validate()?;
        self.acquisition().validate()?;
        self.mle.validate()?;
        for (name, grid) in [("phase_grid", &self.phase_grid), ("theta_grid", &self.theta_grid)] {
            if grid.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} must contain finite angles")));
            }
        }
        if let Some(d) = self.compensation_delta_phi {
            if !d.is_finite() {
                return Err(Error::Config("compensation_delta_phi must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn acquisition(&self) -> Acquisition {
        Acquisition {
            exposure: self.exposure_s,
            rate_calibration: self.rate_calibration,
            noiseless: self.noiseless,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub final_log_likelihood: f64,
    pub probability_floor: f64,
}

/// Reconstruction of one dataset scored against its target operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub program: ProgramSetting,
    pub chi: ChoiMatrix,
    pub raw_fidelity: f64,
    /// `None` when the process has no H–V coherence.
    pub phi_eff: Option<f64>,
    pub favg_raw: Option<f64>,
    pub total_counts: f64,
    pub empirical_success_probability: Option<f64>,
    pub seed: Option<u64>,
    pub mle: MleDiagnostics,
}

fn ideal_choi(program: ProgramSetting) -> ChoiMatrix {
    match program {
        ProgramSetting::Phase(phi) => ideal_choi_phase(phi),
        ProgramSetting::Filter(theta) => ideal_choi_filter(theta),
    }
}

/// True for targets whose outcome does not depend on the H/V relative phase.
pub fn is_phase_insensitive(program: ProgramSetting) -> bool {
    match program {
        ProgramSetting::Phase(_) => false,
        ProgramSetting::Filter(theta) => theta.cos().abs() < 1e-12 || theta.sin().abs() < 1e-12,
    }
}

fn average_fidelity(chi: &ChoiMatrix, program: ProgramSetting) -> Option<f64> {
    average_state_fidelity_against(chi, &program.target_operator()).ok()
}

/// Runs MLE on `data` and scores the result against `target`.
pub fn reconstruct(data: &TomographyDataset, target: ProgramSetting, opts: &MleOptions) -> Result<Reconstruction> {
    let res = mle_reconstruct(data, opts)?;
    let chi = res.chi;
    Ok(Reconstruction {
        program: target,
        chi,
        raw_fidelity: process_fidelity(&chi, &ideal_choi(target))?,
        phi_eff: effective_phase(&chi),
        favg_raw: average_fidelity(&chi, target),
        total_counts: data.total_counts(),
        empirical_success_probability: data.empirical_success_probability(),
        seed: data.seed,
        mle: MleDiagnostics {
            iterations: res.iterations,
            converged: res.converged,
            termination: res.termination,
            final_log_likelihood: res.final_log_likelihood(),
            probability_floor: res.probability_floor,
        },
    })
}

/// Offset-corrected figures for one reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Compensated {
    pub applied: bool,
    pub chi: ChoiMatrix,
    pub fidelity: f64,
    pub favg: Option<f64>,
}

impl Reconstruction {
    /// Removes `delta_phi` from the output; skipped for phase-insensitive targets.
    pub fn compensate(&self, delta_phi: f64) -> Result<Compensated> {
        if is_phase_insensitive(self.program) {
            return Ok(Compensated {
                applied: false,
                chi: self.chi,
                fidelity: self.raw_fidelity,
                favg: self.favg_raw,
            });
        }
        let chi = compensate_choi(&self.chi, delta_phi);
        Ok(Compensated {
            applied: true,
            chi,
            fidelity: process_fidelity(&chi, &ideal_choi(self.program))?,
            favg: average_fidelity(&chi, self.program),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub reconstruction: Reconstruction,
    pub compensated: Compensated,
    /// Heralding probability of the simulated gate, averaged over the six inputs.
    pub model_success_probability: f64,
    /// `(2F + 1)/3` evaluated at the compensated process fidelity.
    pub horodecki_prediction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Phase,
    Filter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSource {
    Configured,
    Fitted,
    PhaseSweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub mean_raw_fidelity: f64,
    pub mean_compensated_fidelity: f64,
    /// Mean compensated minus mean raw fidelity.
    pub compensation_gain: f64,
    /// Max minus min of the compensated fidelities.
    pub compensated_spread: f64,
    pub mean_favg_raw: Option<f64>,
    pub mean_favg_compensated: Option<f64>,
    pub mean_model_success_probability: f64,
    /// Fit of `φ_eff` against `φ` (phase sweep only).
    pub phase_fit: Option<PhaseFit>,
    pub delta_phi_used: f64,
    pub delta_phi_source: OffsetSource,
    /// Regression `F_avg = a·F_χ + b` over raw and compensated points.
    pub favg_vs_fchi: Option<LinearFit>,
    pub unconverged_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub config: ExperimentConfig,
    pub points: Vec<PointResult>,
    pub aggregate: SweepAggregate,
}

impl SweepReport {
    pub fn all_unconverged(&self) -> bool {
        !self.points.is_empty() && self.aggregate.unconverged_points == self.points.len()
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Simulates the tomography dataset for one grid point.
pub fn simulate_point(config: &ExperimentConfig, program: ProgramSetting, run_stream: u64) -> Result<(KrausOp, TomographyDataset)> {
    let pbs = config.pbs.model()?;
    let k = effective_kraus(program, &pbs);
    let data = simulate_counts(
        &k,
        program,
        &config.acquisition(),
        config.seed,
        run_stream,
        Execution::Sequential,
    )?;
    Ok((k, data))
}

/// Datasets for every point of a sweep, in grid order.
pub fn simulate_sweep(config: &ExperimentConfig, kind: SweepKind, exec: Execution) -> Result<Vec<TomographyDataset>> {
    config.validate()?;
    let programs = programs_for(config, kind);
    map_ordered(exec, &programs, |i, (program, base)| {
        simulate_point(config, *program, base + i as u64).map(|(_, d)| d)
    })
    .into_iter()
    .collect()
}

fn programs_for(config: &ExperimentConfig, kind: SweepKind) -> Vec<(ProgramSetting, u64)> {
    match kind {
        SweepKind::Phase => config
            .phase_grid
            .iter()
            .map(|&p| (ProgramSetting::Phase(p), PHASE_STREAM_BASE))
            .collect(),
        SweepKind::Filter => config
            .theta_grid
            .iter()
            .map(|&t| (ProgramSetting::Filter(t), FILTER_STREAM_BASE))
            .collect(),
    }
}

struct RawPoint {
    reconstruction: Reconstruction,
    success: f64,
}

fn run_points(config: &ExperimentConfig, kind: SweepKind, exec: Execution) -> Result<Vec<RawPoint>> {
    let programs = programs_for(config, kind);
    map_ordered(exec, &programs, |i, (program, base)| {
        let (k, data) = simulate_point(config, *program, base + i as u64)?;
        let reconstruction = reconstruct(&data, *program, &config.mle)?;
        let success = (k.0.adjoint() * k.0).trace_re() / 2.0;
        Ok(RawPoint { reconstruction, success })
    })
    .into_iter()
    .collect()
}

fn assemble(
    kind: SweepKind,
    config: &ExperimentConfig,
    raw: Vec<RawPoint>,
    phase_fit: Option<PhaseFit>,
    delta_phi: f64,
    source: OffsetSource,
) -> Result<SweepReport> {
    let points = raw
        .into_iter()
        .map(|p| {
            let compensated = p.reconstruction.compensate(delta_phi)?;
            Ok(PointResult {
                horodecki_prediction: horodecki_avg(compensated.fidelity),
                reconstruction: p.reconstruction,
                compensated,
                model_success_probability: p.success,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_raw = mean(points.iter().map(|p| p.reconstruction.raw_fidelity)).unwrap_or(f64::NAN);
    let mean_comp = mean(points.iter().map(|p| p.compensated.fidelity)).unwrap_or(f64::NAN);
    let (lo, hi) = points.iter().map(|p| p.compensated.fidelity).fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(lo, hi), f| (lo.min(f), hi.max(f)),
    );
    let favg_pairs: Vec<(f64, f64)> = points
        .iter()
        .flat_map(|p| {
            [
                p.reconstruction.favg_raw.map(|a| (p.reconstruction.raw_fidelity, a)),
                p.compensated.favg.map(|a| (p.compensated.fidelity, a)),
            ]
        })
        .flatten()
        .collect();

    let aggregate = SweepAggregate {
        mean_raw_fidelity: mean_raw,
        mean_compensated_fidelity: mean_comp,
        compensation_gain: mean_comp - mean_raw,
        compensated_spread: if points.is_empty() { 0.0 } else { hi - lo },
        mean_favg_raw: mean(points.iter().filter_map(|p| p.reconstruction.favg_raw)),
        mean_favg_compensated: mean(points.iter().filter_map(|p| p.compensated.favg)),
        mean_model_success_probability: mean(points.iter().map(|p| p.model_success_probability)).unwrap_or(f64::NAN),
        phase_fit,
        delta_phi_used: delta_phi,
        delta_phi_source: source,
        favg_vs_fchi: linear_fit(&favg_pairs).ok(),
        unconverged_points: points.iter().filter(|p| !p.reconstruction.mle.converged).count(),
    };
    Ok(SweepReport {
        kind,
        config: config.clone(),
        points,
        aggregate,
    })
}

/// Phase-gate sweep: reconstruct every grid point, fit `δφ` from the
/// effective phases, then compensate every process with it.
pub fn sweep_phase(config: &ExperimentConfig, exec: Execution) -> Result<SweepReport> {
    config.validate()?;
    let raw = run_points(config, SweepKind::Phase, exec)?;
    let phase_points: Vec<(f64, f64)> = raw
        .iter()
        .filter_map(|p| Some((p.reconstruction.program.angle(), p.reconstruction.phi_eff?)))
        .collect();
    let fit = fit_phase_offset(&phase_points).ok();
    let (delta_phi, source) = match (config.compensation_delta_phi, &fit) {
        (Some(d), _) => (d, OffsetSource::Configured),
        (None, Some(f)) => (f.offset, OffsetSource::Fitted),
        (None, None) => (0.0, OffsetSource::Fitted),
    };
    assemble(SweepKind::Phase, config, raw, fit, delta_phi, source)
}

/// Partial-filter sweep. The compensation offset comes from the
/// configuration or, failing that, from a phase sweep with the same settings.
pub fn sweep_filter(config: &ExperimentConfig, exec: Execution) -> Result<SweepReport> {
    config.validate()?;
    let (delta_phi, source) = match config.compensation_delta_phi {
        Some(d) => (d, OffsetSource::Configured),
        None => {
            let phase = sweep_phase(config, exec)?;
            (phase.aggregate.delta_phi_used, OffsetSource::PhaseSweep)
        }
    };
    let raw = run_points(config, SweepKind::Filter, exec)?;
    assemble(SweepKind::Filter, config, raw, None, delta_phi, source)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub model: HomModel,
    pub analysis: PbsModel,
    /// `(delay s, coincidence rate s⁻¹)`
    pub rows: Vec<(f64, f64)>,
    pub model_visibility: f64,
    /// `(max − min) / max` over the scanned curve.
    pub measured_visibility: f64,
}

pub fn run_hom_scan(config: &ExperimentConfig) -> Result<HomReport> {
    let model = config.hom.model();
    let analysis = config.hom.analysis()?;
    let rows = hom_scan(&config.hom.delays(), &model, &analysis)?;
    let max = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let measured = if max > 0.0 { (max - min) / max } else { 0.0 };
    Ok(HomReport {
        model,
        analysis,
        rows,
        model_visibility: model.overlap * optical_visibility(&analysis),
        measured_visibility: measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(pbs: PbsConfig, noiseless: bool) -> ExperimentConfig {
        ExperimentConfig {
            pbs,
            noiseless,
            phase_grid: vec![0.0, PI / 2.0, PI],
            theta_grid: vec![0.0, PI / 4.0],
            ..Default::default()
        }
    }

    #[test]
    fn defaults_describe_reference_scenario() {
        let c = ExperimentConfig::default();
        assert_eq!(c.phase_grid.len(), 8);
        assert_eq!(c.theta_grid.len(), 9);
        assert!((c.theta_grid[8] - PI / 2.0).abs() < 1e-15);
        assert_eq!(c.exposure_s, 50.0);
        assert_eq!(c.pbs.delta_phi, -0.265);
        c.validate().unwrap();
    }

    #[test]
    fn ideal_noiseless_sweep_closes() {
        let r = sweep_phase(&small(PbsConfig::ideal(), true), Execution::Sequential).unwrap();
        for p in &r.points {
            assert!(p.reconstruction.raw_fidelity >= 0.9999);
            assert!((p.model_success_probability - 0.25).abs() < 1e-15);
        }
        assert!(r.aggregate.delta_phi_used.abs() < 1e-6);
    }

    #[test]
    fn aggregate_is_recomputable() {
        let r = sweep_phase(&small(PbsConfig::default(), false), Execution::Parallel).unwrap();
        let m = r.points.iter().map(|p| p.compensated.fidelity).sum::<f64>() / r.points.len() as f64;
        assert!((m - r.aggregate.mean_compensated_fidelity).abs() < 1e-12);
        for p in &r.points {
            for f in [p.reconstruction.raw_fidelity, p.compensated.fidelity] {
                assert!((0.0..=1.0).contains(&f));
            }
        }
    }

    #[test]
    fn execution_mode_does_not_change_results() {
        let c = small(PbsConfig::default(), false);
        let a = sweep_phase(&c, Execution::Parallel).unwrap();
        let b = sweep_phase(&c, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filter_extremes_skip_compensation() {
        let mut c = small(PbsConfig::default(), true);
        c.compensation_delta_phi = Some(-0.265);
        c.theta_grid = vec![0.0, PI / 4.0, PI / 2.0];
        let r = sweep_filter(&c, Execution::Sequential).unwrap();
        assert!(!r.points[0].compensated.applied);
        assert!(r.points[1].compensated.applied);
        assert!(!r.points[2].compensated.applied);
        assert_eq!(r.points[0].compensated.fidelity, r.points[0].reconstruction.raw_fidelity);
        assert_eq!(r.aggregate.delta_phi_source, OffsetSource::Configured);
    }

    #[test]
    fn zero_rate_is_a_data_error() {
        let mut c = small(PbsConfig::default(), false);
        c.rate_calibration = 0.0;
        assert!(matches!(sweep_phase(&c, Execution::Sequential), Err(Error::NoCounts)));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = ExperimentConfig::default();
        c.exposure_s = -1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::default();
        c.pbs.v_reflectance = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hom_report_visibility() {
        let mut c = ExperimentConfig::default();
        c.hom.overlap = 1.0;
        let r = run_hom_scan(&c).unwrap();
        assert!((r.measured_visibility - 1.0).abs() < 1e-12);
        c.hom.overlap = 0.0;
        let r = run_hom_scan(&c).unwrap();
        assert!(r.measured_visibility.abs() < 1e-12);
        assert!(r.rows.iter().all(|row| (row.1 - c.hom.baseline_rate).abs() < 1e-9));
    }
}
