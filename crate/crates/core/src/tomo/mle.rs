//! Iterative maximum-likelihood reconstruction of a trace-decreasing process.
//!
//! The likelihood uses probabilities renormalized over the 36 settings,
//! `L(χ) = Σ_j f_j ln(p_j / Σ_k p_k)`, which is blind to the overall scale
//! of χ. The trace is therefore held at its initial value throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{ChoiMatrix, Mat4, Vec4, C64};

use super::{canonical_settings, TomographyDataset, SETTINGS_COUNT};

/// Lower clamp applied to every model probability.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain of a step drops below this.
    /// Near pure optima the iteration converges sublinearly, so the default
    /// is tight enough for noiseless closure to reach F ≥ 0.9999.
    pub tol: f64,
    /// Dilution weights tried in order whenever the previous one would lower
    /// the likelihood; `1.0` is the undiluted step.
    pub dilution: Vec<f64>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-13,
            dilution: vec![1.0, 0.5, 0.1],
        }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tolerance must be non-negative, got {}", self.tol)));
        }
        if self.dilution.is_empty() || self.dilution.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Config("dilution weights must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative improvement fell below the tolerance.
    Tolerance,
    /// No dilution weight produced a non-decreasing step.
    Stalled,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub chi: ChoiMatrix,
    /// Log-likelihood of the initial guess followed by every accepted step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub probability_floor: f64,
}

impl MleResult {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace holds the initial value")
    }
}

/// Precomputed measurement vectors and observed frequencies.
struct Problem {
    vectors: [Vec4; SETTINGS_COUNT],
    freqs: [f64; SETTINGS_COUNT],
}

impl Problem {
    fn new(data: &TomographyDataset) -> Result<Self> {
        let total = data.total_counts();
        if !(total > 0.0) {
            return Err(Error::NoCounts);
        }
        let settings = canonical_settings();
        let vectors = std::array::from_fn(|j| settings[j].operator_vector());
        let freqs = std::array::from_fn(|j| data.records[j].counts / total);
        Ok(Self { vectors, freqs })
    }

    /// Floored `Tr[χ M_j]`.
    fn probabilities(&self, chi: &Mat4) -> [f64; SETTINGS_COUNT] {
        std::array::from_fn(|j| chi.expectation(&self.vectors[j]).re.max(PROBABILITY_FLOOR))
    }

    fn loglikelihood_from(&self, probs: &[f64; SETTINGS_COUNT]) -> f64 {
        let norm: f64 = probs.iter().sum();
        self.freqs
            .iter()
            .zip(probs)
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, p)| f * (p / norm).ln())
            .sum()
    }

    fn loglikelihood(&self, chi: &Mat4) -> f64 {
        self.loglikelihood_from(&self.probabilities(chi))
    }

    /// `R = Σ_j (f_j / p_j) M_j`
    fn r_operator(&self, probs: &[f64; SETTINGS_COUNT]) -> Mat4 {
        let mut r = Mat4::zeros();
        for j in 0..SETTINGS_COUNT {
            let w = self.freqs[j] / probs[j];
            if w == 0.0 {
                continue;
            }
            let v = &self.vectors[j];
            for a in 0..4 {
                let va = v.0[a] * w;
                for b in 0..4 {
                    r.0[a][b] += va * v.0[b].conj();
                }
            }
        }
        r
    }
}

/// `Σ_j f_j ln p̃_j` with `p̃_j = p_j / Σ_k p_k`. Invariant under `χ → cχ`.
pub fn loglikelihood(chi: &ChoiMatrix, data: &TomographyDataset) -> Result<f64> {
    Ok(Problem::new(data)?.loglikelihood(&chi.0))
}

/// Fixed-point iteration `χ ← R χ R` at constant trace, starting from `𝟙/4`.
///
/// A step that would lower the likelihood is retried with the diluted
/// operator `(1 − ε)(Tr R / 4)𝟙 + εR` for each configured `ε`; steps are
/// only ever accepted when the likelihood does not decrease.
pub fn mle_reconstruct(data: &TomographyDataset, opts: &MleOptions) -> Result<MleResult> {
    opts.validate()?;
    let problem = Problem::new(data)?;

    let mut chi = Mat4::identity().scale_re(0.25);
    let trace = chi.trace_re();
    let mut probs = problem.probabilities(&chi);
    let mut ll = problem.loglikelihood_from(&probs);
    let mut history = vec![ll];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let r = problem.r_operator(&probs);
        let r_trace = r.trace_re();

        let mut accepted = None;
        for &eps in &opts.dilution {
            let step = if eps == 1.0 {
                r
            } else {
                Mat4::identity().scale_re((1.0 - eps) * r_trace / 4.0) + r.scale_re(eps)
            };
            let candidate = step * chi * step;
            let norm = candidate.trace_re();
            if !(norm > 0.0) || !norm.is_finite() {
                continue;
            }
            let candidate = candidate.hermitian_part().scale(C64::from(trace / norm));
            let cand_probs = problem.probabilities(&candidate);
            let cand_ll = problem.loglikelihood_from(&cand_probs);
            if cand_ll >= ll {
                accepted = Some((candidate, cand_probs, cand_ll));
                break;
            }
        }

        let Some((next, next_probs, next_ll)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let gain = (next_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        chi = next;
        probs = next_probs;
        ll = next_ll;
        history.push(ll);
        if gain < opts.tol {
            termination = Termination::Tolerance;
            break;
        }
    }

    Ok(MleResult {
        chi: ChoiMatrix(chi),
        log_likelihood_trace: history,
        iterations,
        converged: termination != Termination::MaxIterations,
        termination,
        probability_floor: PROBABILITY_FLOOR,
    })
}
