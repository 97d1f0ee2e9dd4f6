//! Plot-ready CSV tables and JSON summaries.
//!
//! Floats use Rust's shortest round-trip formatting, so identical runs
//! produce byte-identical files. Complex matrices are written as `re, im`
//! pairs, row-major, input⊗output order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::pipeline::{HomReport, Reconstruction, SweepKind, SweepReport};
use crate::qmath::ChoiMatrix;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn choi_header() -> String {
    (0..4)
        .flat_map(|i| (0..4).map(move |j| format!("c{i}{j}_re,c{i}{j}_im")))
        .collect::<Vec<_>>()
        .join(",")
}

fn choi_row(chi: &ChoiMatrix) -> String {
    chi.to_pairs()
        .iter()
        .map(|(re, im)| format!("{re},{im}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_choi_table(dir: &Path, name: &str, angle: &str, report: &SweepReport) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    writeln!(w, "{angle},stage,{}", choi_header())?;
    for p in &report.points {
        let a = p.reconstruction.program.angle();
        writeln!(w, "{a},raw,{}", choi_row(&p.reconstruction.chi))?;
        writeln!(w, "{a},compensated,{}", choi_row(&p.compensated.chi))?;
    }
    w.flush()?;
    Ok(path)
}

/// Writes the plot tables and `summary_<kind>.json`; returns the paths.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match report.kind {
        SweepKind::Phase => {
            written.push(write_choi_table(dir, "fig2_choi.csv", "phi", report)?);

            let (path, mut w) = create(dir, "fig3_phase.csv")?;
            writeln!(w, "phi,phi_eff,fit_line,residual")?;
            let fit = report.aggregate.phase_fit.as_ref();
            let mut residuals = fit.map(|f| f.residuals.iter());
            let mut sorted: Vec<_> = report.points.iter().collect();
            sorted.sort_by(|a, b| a.reconstruction.program.angle().total_cmp(&b.reconstruction.program.angle()));
            for p in sorted {
                let phi = p.reconstruction.program.angle();
                let line = fit.map(|f| f.slope * phi + f.offset);
                let residual = match p.reconstruction.phi_eff {
                    Some(_) => residuals.as_mut().and_then(|r| r.next()).copied(),
                    None => None,
                };
                writeln!(w, "{phi},{},{},{}", opt(p.reconstruction.phi_eff), opt(line), opt(residual))?;
            }
            w.flush()?;
            written.push(path);

            let (path, mut w) = create(dir, "fig4_fidelity.csv")?;
            writeln!(
                w,
                "phi,raw_fidelity,compensated_fidelity,favg_raw,favg_compensated,horodecki_prediction,\
                 model_success_probability,empirical_success_probability,total_counts,iterations,converged,final_log_likelihood"
            )?;
            for p in &report.points {
                let r = &p.reconstruction;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.program.angle(),
                    r.raw_fidelity,
                    p.compensated.fidelity,
                    opt(r.favg_raw),
                    opt(p.compensated.favg),
                    p.horodecki_prediction,
                    p.model_success_probability,
                    opt(r.empirical_success_probability),
                    r.total_counts,
                    r.mle.iterations,
                    r.mle.converged,
                    r.mle.final_log_likelihood,
                )?;
            }
            w.flush()?;
            written.push(path);

            let path = dir.join("summary_phase.json");
            write_json(&path, report)?;
            written.push(path);
        }
        SweepKind::Filter => {
            let (path, mut w) = create(dir, "fig5_filter.csv")?;
            writeln!(
                w,
                "theta,raw_fidelity,compensated_fidelity,compensation_applied,favg_raw,favg_compensated,\
                 model_success_probability,empirical_success_probability,total_counts,iterations,converged,final_log_likelihood"
            )?;
            for p in &report.points {
                let r = &p.reconstruction;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.program.angle(),
                    r.raw_fidelity,
                    p.compensated.fidelity,
                    p.compensated.applied,
                    opt(r.favg_raw),
                    opt(p.compensated.favg),
                    p.model_success_probability,
                    opt(r.empirical_success_probability),
                    r.total_counts,
                    r.mle.iterations,
                    r.mle.converged,
                    r.mle.final_log_likelihood,
                )?;
            }
            w.flush()?;
            written.push(path);
            written.push(write_choi_table(dir, "fig5_choi.csv", "theta", report)?);

            let path = dir.join("summary_filter.json");
            write_json(&path, report)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn write_hom(dir: &Path, report: &HomReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let (path, mut w) = create(dir, "hom_scan.csv")?;
    writeln!(w, "delay_s,coincidence_rate")?;
    for (tau, rate) in &report.rows {
        writeln!(w, "{tau},{rate}")?;
    }
    w.flush()?;
    let summary = dir.join("summary_hom.json");
    write_json(&summary, report)?;
    Ok(vec![path, summary])
}

/// Serialized reconstruction: 16 complex entries plus metadata.
#[derive(Serialize)]
pub struct ReconstructionFile {
    pub program: String,
    /// Row-major `[re, im]`, input⊗output order.
    pub chi: Vec<[f64; 2]>,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub probability_floor: f64,
    pub seed: Option<u64>,
    pub raw_fidelity: f64,
    pub phi_eff: Option<f64>,
    pub favg_raw: Option<f64>,
    pub delta_phi: Option<f64>,
    pub compensated_fidelity: Option<f64>,
    pub favg_compensated: Option<f64>,
}

impl ReconstructionFile {
    pub fn new(rec: &Reconstruction, delta_phi: Option<f64>) -> Result<Self> {
        let compensated = delta_phi.map(|d| rec.compensate(d)).transpose()?;
        Ok(Self {
            program: rec.program.to_string(),
            chi: rec.chi.to_pairs().into_iter().map(|(a, b)| [a, b]).collect(),
            iterations: rec.mle.iterations,
            converged: rec.mle.converged,
            final_log_likelihood: rec.mle.final_log_likelihood,
            probability_floor: rec.mle.probability_floor,
            seed: rec.seed,
            raw_fidelity: rec.raw_fidelity,
            phi_eff: rec.phi_eff,
            favg_raw: rec.favg_raw,
            delta_phi,
            compensated_fidelity: compensated.as_ref().map(|c| c.fidelity),
            favg_compensated: compensated.and_then(|c| c.favg),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;
    use crate::pipeline::{sweep_phase, ExperimentConfig, PbsConfig};

    #[test]
    fn writes_expected_tables() {
        let dir = std::env::temp_dir().join(format!("phasegate-report-{}", std::process::id()));
        let config = ExperimentConfig {
            pbs: PbsConfig::ideal(),
            noiseless: true,
            phase_grid: vec![0.0, 1.0, 2.0],
            ..Default::default()
        };
        let report = sweep_phase(&config, Execution::Sequential).unwrap();
        let files = write_sweep(&dir, &report).unwrap();
        assert_eq!(files.len(), 4);
        let fig4 = fs::read_to_string(dir.join("fig4_fidelity.csv")).unwrap();
        assert_eq!(fig4.lines().count(), 4);
        let fig2 = fs::read_to_string(dir.join("fig2_choi.csv")).unwrap();
        let header_cols = fig2.lines().next().unwrap().split(',').count();
        assert_eq!(header_cols, 2 + 32);
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("summary_phase.json")).unwrap()).unwrap();
        assert_eq!(summary["kind"], "phase");
        assert!(summary["config"]["phase_grid"].is_array());
        fs::remove_dir_all(&dir).ok();
    }
}
