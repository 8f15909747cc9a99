//! Certificate reports: a machine-readable JSON document that echoes the
//! inputs and every intermediate constant, and a human-readable rendering of
//! the same content. Serialization is deterministic, so identical inputs
//! produce byte-identical reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::certifier::{Certificate, RemainderModel};
use crate::simulator::{StabilityReport, SweepSummary};
use crate::synthesis::GainSynthesis;
use crate::sysmodel::schema::{ComplexEntry, SystemFile};
use crate::sysmodel::SystemDefinition;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub verdict: String,
    pub margin: f64,
    pub inputs: SystemFile,
    pub linearization: LinearizationReport,
    pub synthesis: SynthesisReport,
    pub remainder_model: RemainderModelReport,
    pub certificate: CertificateValues,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationReport {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub k: Vec<Vec<f64>>,
    pub a_cl: Vec<Vec<f64>>,
    pub spectrum: Vec<ComplexEntry>,
    pub lambda_m: f64,
    pub eta: f64,
    pub k_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderModelReport {
    pub rho: f64,
    pub p: f64,
    pub source: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateValues {
    pub gamma0: f64,
    pub epsilon0: f64,
    pub theta: f64,
    pub sigma: f64,
    pub lambda_m: f64,
    pub eta: f64,
    pub c: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl CertificateReport {
    pub fn new(
        system: &SystemDefinition,
        synth: &GainSynthesis,
        model: &RemainderModel,
        cert: &Certificate,
        margin: f64,
    ) -> Self {
        let (a, b) = system.field.jacobians_at_origin();
        CertificateReport {
            verdict: "feasible".to_string(),
            margin,
            inputs: SystemFile::from_system(system),
            linearization: LinearizationReport {
                a: matrix_rows(&a),
                b: matrix_rows(&b),
            },
            synthesis: SynthesisReport {
                k: matrix_rows(&synth.k),
                a_cl: matrix_rows(&synth.a_cl),
                spectrum: synth
                    .spectrum
                    .iter()
                    .map(|l| ComplexEntry { re: l.re, im: l.im })
                    .collect(),
                lambda_m: synth.lambda_m,
                eta: synth.eta,
                k_norm: synth.k_norm(),
            },
            remainder_model: RemainderModelReport {
                rho: model.rho,
                p: model.p,
                source: model.source.as_str().to_string(),
            },
            certificate: CertificateValues {
                gamma0: cert.gamma0,
                epsilon0: cert.epsilon0,
                theta: cert.theta,
                sigma: cert.sigma,
                lambda_m: cert.lambda_m,
                eta: cert.eta,
                c: cert.c,
                gamma: cert.gamma,
                delta: cert.delta,
                alpha1: cert.alpha1,
                alpha2: cert.alpha2,
                alpha3: cert.alpha3,
            },
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Plain-text rendering for terminals and log files.
    pub fn human_text(&self) -> String {
        let mut out = String::new();
        let c = &self.certificate;
        let _ = writeln!(out, "certificate verdict: {}", self.verdict);
        let _ = writeln!(out, "margin: {}", self.margin);
        let _ = writeln!(out, "linearization A: {:?}", self.linearization.a);
        let _ = writeln!(out, "linearization B: {:?}", self.linearization.b);
        let _ = writeln!(out, "gain K: {:?}", self.synthesis.k);
        let _ = writeln!(out, "closed-loop A_cl: {:?}", self.synthesis.a_cl);
        let spectrum: Vec<String> = self
            .synthesis
            .spectrum
            .iter()
            .map(|l| format!("{:+.6e} {:+.6e}i", l.re, l.im))
            .collect();
        let _ = writeln!(out, "closed-loop spectrum: [{}]", spectrum.join(", "));
        let _ = writeln!(out, "lambda_m: {:+.6e}", self.synthesis.lambda_m);
        let _ = writeln!(out, "eta (basis conditioning): {:.6e}", self.synthesis.eta);
        let _ = writeln!(out, "||K||: {:.6e}", self.synthesis.k_norm);
        let _ = writeln!(
            out,
            "remainder model: |R1| <= {:.6e} * |x|^{} ({})",
            self.remainder_model.rho, self.remainder_model.p, self.remainder_model.source
        );
        let _ = writeln!(out, "Gamma0: {:.6e}", c.gamma0);
        let _ = writeln!(out, "epsilon0: {:.6e}", c.epsilon0);
        let _ = writeln!(out, "Theta: {:.6e}", c.theta);
        let _ = writeln!(out, "sigma: {:.6e}", c.sigma);
        let _ = writeln!(out, "c: {:.6e}  gamma: {:+.6e}", c.c, c.gamma);
        let _ = writeln!(out, "delta (certified ROA radius): {:.6e}", c.delta);
        let _ = writeln!(
            out,
            "envelope: |x(t)| <= {:.6e} * exp({:+.6e} (t - t0)) * (|x(t0)| + {:.6e})",
            c.alpha1, c.alpha2, c.alpha3
        );
        out
    }
}

/// Machine-readable stability report (one simulated trajectory).
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReportDoc {
    pub verdict: String,
    pub certified: bool,
    pub envelope_violations: usize,
    pub worst_envelope_excess: f64,
    pub epsilon0_violations: usize,
    pub worst_epsilon0_excess: f64,
    pub t_star: Option<f64>,
    pub decay_rate_fit: Option<f64>,
    pub converged: bool,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub final_norm: f64,
    pub blew_up: Option<f64>,
}

impl StabilityReportDoc {
    pub fn new(report: &StabilityReport, traj: &crate::simulator::Trajectory) -> Self {
        StabilityReportDoc {
            verdict: report.verdict.as_str().to_string(),
            certified: report.certified,
            envelope_violations: report.envelope_violations,
            worst_envelope_excess: report.worst_envelope_excess,
            epsilon0_violations: report.epsilon0_violations,
            worst_epsilon0_excess: report.worst_epsilon0_excess,
            t_star: report.t_star,
            decay_rate_fit: report.decay_rate_fit,
            converged: report.converged,
            x0: traj.states[0].iter().copied().collect(),
            t0: traj.t0,
            dt: traj.dt,
            t_end: traj.time_at(traj.len() - 1),
            final_norm: traj.final_norm(),
            blew_up: traj.blew_up,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// Machine-readable sweep summary.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummaryDoc {
    pub delta: f64,
    pub seed: u64,
    pub certified_runs: usize,
    pub certified_all_converged: bool,
    pub certified_violations: usize,
    pub smallest_nonconverged_radius: Option<f64>,
    pub largest_all_converged_radius: Option<f64>,
    pub conservatism_ratio: Option<f64>,
}

impl From<&SweepSummary> for SweepSummaryDoc {
    fn from(s: &SweepSummary) -> Self {
        SweepSummaryDoc {
            delta: s.delta,
            seed: s.seed,
            certified_runs: s.certified_runs,
            certified_all_converged: s.certified_all_converged,
            certified_violations: s.certified_violations,
            smallest_nonconverged_radius: s.smallest_nonconverged_radius,
            largest_all_converged_radius: s.largest_all_converged_radius,
            conservatism_ratio: s.conservatism_ratio,
        }
    }
}

impl SweepSummaryDoc {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}
