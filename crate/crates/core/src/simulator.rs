//! Perturbed closed-loop simulation and certificate validation: classical
//! fixed-step RK4 with blow-up detection, envelope compliance reports,
//! empirical settling times, and initial-condition sweeps that compare the
//! certified ball against the observed attraction region.
//!
//! Fixed-step integration keeps traces bit-reproducible; accuracy is checked
//! by step-halving rather than adaptive control.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::certifier::Certificate;
use crate::error::{Error, Result};
use crate::synthesis::GainSynthesis;
use crate::sysmodel::{closed_loop_derivative_into, SystemDefinition};

/// Trajectories are truncated once `|x|` exceeds this factor times
/// `max(1, |x0|)`; polynomial fields escape quickly once unstable.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Relative tolerance granted to the envelope comparison (integration error
/// allowance). The `epsilon0` comparison gets no tolerance at all.
pub const ENVELOPE_REL_TOL: f64 = 1e-9;

/// Time-stamped states of one closed-loop integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
    pub norms: Vec<f64>,
    /// Blow-up time when the run escaped or went non-finite.
    pub blew_up: Option<f64>,
}

impl Trajectory {
    pub fn from_states(t0: f64, dt: f64, states: Vec<DVector<f64>>) -> Self {
        let norms = states.iter().map(|x| x.norm()).collect();
        Self {
            t0,
            dt,
            states,
            norms,
            blew_up: None,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn final_norm(&self) -> f64 {
        *self.norms.last().expect("nonempty trajectory")
    }
}

/// Integrate `ẋ = f(x, −Kx) + w(x, t)` with classical RK4 on a fixed grid.
///
/// The horizon is snapped to a whole number of steps. Blow-up truncates the
/// trajectory and sets the flag instead of erroring.
pub fn integrate(
    system: &SystemDefinition,
    synth: &GainSynthesis,
    x0: &DVector<f64>,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    let (t0, t_end) = t_span;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end > t0) {
        return Err(Error::InvalidParameter(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        )));
    }
    if x0.len() != system.n() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: system.n(),
            got: x0.len(),
        });
    }

    let steps = ((t_end - t0) / dt).round().max(1.0) as usize;
    let n = system.n();
    let m = system.m();
    let field = &system.field;
    let pert = &system.perturbation;
    let gain = &synth.k;

    let escape = BLOWUP_FACTOR * x0.norm().max(1.0);

    let mut states = Vec::with_capacity(steps + 1);
    let mut norms = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    norms.push(x0.norm());

    let mut x = x0.clone();
    let mut stage = DVector::zeros(n);
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut u_buf = DVector::zeros(m);
    let mut w_buf = DVector::zeros(n);
    let mut blew_up = None;

    let derivative = |t: f64,
                      y: &DVector<f64>,
                      out: &mut DVector<f64>,
                      u_buf: &mut DVector<f64>,
                      w_buf: &mut DVector<f64>| {
        closed_loop_derivative_into(field, gain, pert, t, y, u_buf, w_buf, out);
    };

    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        derivative(t, &x, &mut k1, &mut u_buf, &mut w_buf);

        stage.copy_from(&x);
        stage.axpy(0.5 * dt, &k1, 1.0);
        derivative(t + 0.5 * dt, &stage, &mut k2, &mut u_buf, &mut w_buf);

        stage.copy_from(&x);
        stage.axpy(0.5 * dt, &k2, 1.0);
        derivative(t + 0.5 * dt, &stage, &mut k3, &mut u_buf, &mut w_buf);

        stage.copy_from(&x);
        stage.axpy(dt, &k3, 1.0);
        derivative(t + dt, &stage, &mut k4, &mut u_buf, &mut w_buf);

        x.axpy(dt / 6.0, &k1, 1.0);
        x.axpy(dt / 3.0, &k2, 1.0);
        x.axpy(dt / 3.0, &k3, 1.0);
        x.axpy(dt / 6.0, &k4, 1.0);

        let norm = x.norm();
        if !norm.is_finite() || norm > escape {
            blew_up = Some(t + dt);
            break;
        }
        states.push(x.clone());
        norms.push(norm);
    }

    Ok(Trajectory {
        t0,
        dt,
        states,
        norms,
        blew_up,
    })
}

/// Verdict of a certificate-compliance report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Initial condition outside the certified ball: informational only.
    Uncertified,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Uncertified => "uncertified",
        }
    }
}

/// Compliance of one trajectory against a certificate.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `|x(t0)| <= delta` (up to rounding slack).
    pub certified: bool,
    /// Samples exceeding the envelope by more than [`ENVELOPE_REL_TOL`].
    pub envelope_violations: usize,
    /// Worst relative envelope excess `|x|/env − 1` over all samples.
    pub worst_envelope_excess: f64,
    /// Samples with `|x| > epsilon0` (zero tolerance).
    pub epsilon0_violations: usize,
    /// Worst relative excess over `epsilon0`.
    pub worst_epsilon0_excess: f64,
    /// Earliest sampled time after which `|x| < epsilon_tilde`; filled by
    /// [`eventual_las_metrics`], `None` until then.
    pub t_star: Option<f64>,
    /// Least-squares slope of `log |x(t)|` over the trajectory tail.
    pub decay_rate_fit: Option<f64>,
    /// Final norm below `1e-8·|x0|` or `1e-12` absolute, without blow-up.
    pub converged: bool,
    pub verdict: Verdict,
}

/// Compare every sample of a trajectory against the certificate envelope and
/// the `epsilon0` ball. An initial condition outside `delta` downgrades the
/// verdict to [`Verdict::Uncertified`] rather than erroring.
pub fn verify_envelope(traj: &Trajectory, cert: &Certificate) -> StabilityReport {
    let x0_norm = traj.norms[0];
    let certified = x0_norm <= cert.delta * (1.0 + 1e-12);

    let mut envelope_violations = 0;
    let mut worst_env = f64::NEG_INFINITY;
    let mut epsilon0_violations = 0;
    let mut worst_eps = f64::NEG_INFINITY;

    for (i, &norm) in traj.norms.iter().enumerate() {
        let env = cert.envelope(x0_norm, traj.time_at(i), traj.t0);
        let excess = if env > 0.0 {
            norm / env - 1.0
        } else if norm > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst_env = worst_env.max(excess);
        if excess > ENVELOPE_REL_TOL {
            envelope_violations += 1;
        }

        let eps_excess = norm / cert.epsilon0 - 1.0;
        worst_eps = worst_eps.max(eps_excess);
        if norm > cert.epsilon0 {
            epsilon0_violations += 1;
        }
    }

    let converged = converged(traj);
    let decay_rate_fit = fit_decay_rate(traj);

    let verdict = if !certified {
        Verdict::Uncertified
    } else if envelope_violations == 0 && epsilon0_violations == 0 && converged {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    StabilityReport {
        certified,
        envelope_violations,
        worst_envelope_excess: worst_env,
        epsilon0_violations,
        worst_epsilon0_excess: worst_eps,
        t_star: None,
        decay_rate_fit,
        converged,
        verdict,
    }
}

fn converged(traj: &Trajectory) -> bool {
    traj.blew_up.is_none()
        && (traj.final_norm() < 1e-8 * traj.norms[0] || traj.final_norm() < 1e-12)
}

/// Report for a run without a feasible certificate: convergence and decay
/// fit only, envelope fields marked not-applicable.
pub fn uncertified_report(traj: &Trajectory) -> StabilityReport {
    StabilityReport {
        certified: false,
        envelope_violations: 0,
        worst_envelope_excess: f64::NAN,
        epsilon0_violations: 0,
        worst_epsilon0_excess: f64::NAN,
        t_star: None,
        decay_rate_fit: fit_decay_rate(traj),
        converged: converged(traj),
        verdict: Verdict::Uncertified,
    }
}

/// Least-squares slope of `log |x|` over the second half of the samples.
fn fit_decay_rate(traj: &Trajectory) -> Option<f64> {
    let start = traj.len() / 2;
    let pts: Vec<(f64, f64)> = (start..traj.len())
        .filter(|&i| traj.norms[i] > 1e-300)
        .map(|i| (traj.time_at(i), traj.norms[i].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Earliest sampled time after which `|x(t)| < epsilon_tilde` for every later
/// sample; `None` when the tail still reaches `epsilon_tilde`.
pub fn eventual_las_metrics(traj: &Trajectory, epsilon_tilde: f64) -> Option<f64> {
    assert!(epsilon_tilde > 0.0, "epsilon_tilde must be positive");
    if traj.blew_up.is_some() {
        return None;
    }
    let last_exceed = traj.norms.iter().rposition(|&n| n >= epsilon_tilde);
    match last_exceed {
        None => Some(traj.t0),
        Some(i) if i + 1 == traj.len() => None,
        Some(i) => Some(traj.time_at(i + 1)),
    }
}

/// One integration of an initial-condition sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub radius: f64,
    pub dir_index: usize,
    pub converged: bool,
    pub max_norm: f64,
    pub final_norm: f64,
    pub epsilon0_violations: usize,
    pub envelope_violations: usize,
}

/// Sweep results, with the seed recorded for reproducibility.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub seed: u64,
    pub delta: f64,
}

/// Summary facts extracted from a sweep.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub delta: f64,
    pub seed: u64,
    pub certified_runs: usize,
    pub certified_all_converged: bool,
    pub certified_violations: usize,
    pub smallest_nonconverged_radius: Option<f64>,
    pub largest_all_converged_radius: Option<f64>,
    /// `smallest_nonconverged_radius / delta`; `None` when everything converged.
    pub conservatism_ratio: Option<f64>,
}

impl SweepTable {
    pub fn summary(&self) -> SweepSummary {
        let certified: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.radius <= self.delta * (1.0 + 1e-12))
            .collect();
        let certified_all_converged = certified.iter().all(|r| r.converged);
        let certified_violations = certified
            .iter()
            .map(|r| r.epsilon0_violations + r.envelope_violations)
            .sum();

        let smallest_nonconverged_radius = self
            .rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| r.radius)
            .fold(None, |acc: Option<f64>, r| {
                Some(acc.map_or(r, |a| a.min(r)))
            });
        let largest_all_converged_radius = {
            let mut best = None;
            let mut radii: Vec<f64> = self.rows.iter().map(|r| r.radius).collect();
            radii.dedup();
            for radius in radii {
                let all = self
                    .rows
                    .iter()
                    .filter(|r| r.radius == radius)
                    .all(|r| r.converged);
                if all {
                    best = Some(radius);
                } else {
                    break;
                }
            }
            best
        };
        SweepSummary {
            delta: self.delta,
            seed: self.seed,
            certified_runs: certified.len(),
            certified_all_converged,
            certified_violations,
            smallest_nonconverged_radius,
            largest_all_converged_radius,
            conservatism_ratio: smallest_nonconverged_radius.map(|r| r / self.delta),
        }
    }
}

/// Integrate from `radius · direction` for every radius and a deterministic
/// set of unit directions (seeded, shared across radii), in parallel, merged
/// in (radius, direction) order.
#[allow(clippy::too_many_arguments)]
pub fn sweep_roa(
    system: &SystemDefinition,
    synth: &GainSynthesis,
    cert: &Certificate,
    radii: &[f64],
    directions_per_radius: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<SweepTable> {
    if !radii.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::InvalidParameter(
            "radii must be sorted ascending".into(),
        ));
    }
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidParameter("radii must be nonnegative".into()));
    }
    let directions = unit_directions(system.n(), directions_per_radius, seed);

    let jobs: Vec<(f64, usize)> = radii
        .iter()
        .flat_map(|&r| (0..directions_per_radius).map(move |j| (r, j)))
        .collect();

    let t0 = system.perturbation.t0;
    let rows: Result<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(radius, dir_index)| {
            let x0 = &directions[dir_index] * radius;
            let traj = integrate(system, synth, &x0, (t0, t_end), dt)?;
            let report = verify_envelope(&traj, cert);
            Ok(SweepRow {
                radius,
                dir_index,
                converged: report.converged,
                max_norm: traj.norms.iter().copied().fold(0.0, f64::max),
                final_norm: traj.final_norm(),
                epsilon0_violations: report.epsilon0_violations,
                envelope_violations: report.envelope_violations,
            })
        })
        .collect();

    Ok(SweepTable {
        rows: rows?,
        seed,
        delta: cert.delta,
    })
}

/// Deterministic unit directions: standard normal samples from a seeded
/// ChaCha stream, normalized.
pub fn unit_directions(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    (0..count)
        .map(|_| loop {
            let v = DVector::<f64>::from_iterator(n, (0..n).map(|_| normal.sample(&mut rng)));
            let norm = v.norm();
            if norm > 1e-9 {
                break v / norm;
            }
        })
        .collect()
}

/// Write the trajectory CSV: `t,x1,…,xn,norm,envelope,epsilon0`, one row per
/// sample, 17 significant digits. Without a certificate the envelope and
/// epsilon0 columns are `NaN`.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    traj: &Trajectory,
    cert: Option<&Certificate>,
) -> io::Result<()> {
    let n = traj.states.first().map_or(0, |x| x.len());
    write!(out, "t")?;
    for i in 1..=n {
        write!(out, ",x{i}")?;
    }
    writeln!(out, ",norm,envelope,epsilon0")?;

    let x0_norm = traj.norms[0];
    for (i, state) in traj.states.iter().enumerate() {
        let t = traj.time_at(i);
        let (env, eps) = match cert {
            Some(c) => (c.envelope(x0_norm, t, traj.t0), c.epsilon0),
            None => (f64::NAN, f64::NAN),
        };
        write!(out, "{t:.16e}")?;
        for v in state.iter() {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out, ",{:.16e},{env:.16e},{eps:.16e}", traj.norms[i])?;
    }
    Ok(())
}

/// Write the sweep CSV: `radius,dir_index,converged,max_norm,final_norm`.
pub fn write_sweep_csv<W: Write>(out: &mut W, table: &SweepTable) -> io::Result<()> {
    writeln!(out, "radius,dir_index,converged,max_norm,final_norm")?;
    for row in &table.rows {
        writeln!(
            out,
            "{:.16e},{},{},{:.16e},{:.16e}",
            row.radius, row.dir_index, row.converged, row.max_norm, row.final_norm
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certifier::{self, remainder_bound_auto};
    use crate::scenarios;
    use crate::synthesis;
    use crate::sysmodel::{
        PerturbationSpec, PolynomialTerm, PolynomialVectorField, SystemDefinition,
    };
    use approx::assert_relative_eq;
    use nalgebra::Complex;

    fn decay_system() -> (SystemDefinition, GainSynthesis) {
        // Scalar ẋ = −x with a dead input channel via zero gain.
        let field = PolynomialVectorField::new(
            1,
            1,
            vec![vec![
                PolynomialTerm::new(-1.0, vec![1], vec![0]),
                PolynomialTerm::new(1.0, vec![0], vec![1]),
            ]],
        )
        .unwrap();
        let sys = SystemDefinition::new(
            field,
            PerturbationSpec::none(),
            vec![Complex::new(-1.0, 0.0)],
            Some(nalgebra::DMatrix::zeros(1, 1)),
        )
        .unwrap();
        let synth = synthesis::synthesize(&sys).unwrap();
        (sys, synth)
    }

    #[test]
    fn integrates_scalar_decay_to_closed_form() {
        let (sys, synth) = decay_system();
        let x0 = DVector::from_vec(vec![1.0]);
        let traj = integrate(&sys, &synth, &x0, (0.0, 5.0), 1e-3).unwrap();
        assert_eq!(traj.len(), 5001);
        assert!((traj.final_norm() - (-5.0_f64).exp()).abs() < 1e-9);
        assert!(traj.blew_up.is_none());
    }

    #[test]
    fn example_run_stays_bounded_and_converges() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let x0 = DVector::from_vec(scenarios::EXAMPLE1_X0.to_vec());
        let traj = integrate(&sys, &synth, &x0, (0.0, 30.0), 1e-3).unwrap();
        assert!(traj.final_norm() < 1e-6);
        let sup = traj.norms.iter().copied().fold(0.0, f64::max);
        assert!(sup < 0.0674, "sup |x| = {sup}");
    }

    #[test]
    fn step_halving_agreement() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let x0 = DVector::from_vec(scenarios::EXAMPLE1_X0.to_vec());
        let coarse = integrate(&sys, &synth, &x0, (0.0, 10.0), 1e-3).unwrap();
        let fine = integrate(&sys, &synth, &x0, (0.0, 10.0), 5e-4).unwrap();
        let diff = (coarse.states.last().unwrap() - fine.states.last().unwrap()).norm();
        assert!(diff < 1e-8, "terminal difference {diff}");
    }

    #[test]
    fn blow_up_is_flagged_not_fatal() {
        // Closed loop ẋ = x^3 − x (gain 1 on the input channel) escapes in
        // finite time from x0 = 2.
        let field = PolynomialVectorField::new(
            1,
            1,
            vec![vec![
                PolynomialTerm::new(1.0, vec![3], vec![0]),
                PolynomialTerm::new(1.0, vec![0], vec![1]),
            ]],
        )
        .unwrap();
        let sys = SystemDefinition::new(
            field,
            PerturbationSpec::none(),
            vec![Complex::new(-1.0, 0.0)],
            Some(nalgebra::DMatrix::from_row_slice(1, 1, &[1.0])),
        )
        .unwrap();
        let synth = synthesis::synthesize(&sys).unwrap();
        let traj = integrate(
            &sys,
            &synth,
            &DVector::from_vec(vec![2.0]),
            (0.0, 10.0),
            1e-3,
        )
        .unwrap();
        assert!(traj.blew_up.is_some());
        assert!(traj.len() < 10_001);
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let sys = scenarios::example1();
        let mut unperturbed = sys.clone();
        unperturbed.perturbation = PerturbationSpec::none();
        let synth = synthesis::synthesize(&unperturbed).unwrap();
        let traj = integrate(&unperturbed, &synth, &DVector::zeros(2), (0.0, 1.0), 1e-2).unwrap();
        assert!(traj.norms.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn envelope_report_on_certified_run() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let model = scenarios::example1_manual_remainder(synth.k_norm());
        let cert =
            certifier::certify_with_synthesis(&synth, &sys.perturbation, &model, 0.0).unwrap();

        let x0 = DVector::from_vec(scenarios::EXAMPLE1_X0.to_vec());
        assert!(x0.norm() <= cert.delta);
        let traj = integrate(&sys, &synth, &x0, (0.0, 50.0), 1e-3).unwrap();
        let mut report = verify_envelope(&traj, &cert);
        report.t_star = eventual_las_metrics(&traj, 1e-3);

        assert!(report.certified);
        assert_eq!(report.envelope_violations, 0);
        assert_eq!(report.epsilon0_violations, 0);
        assert!(report.converged);
        assert_eq!(report.verdict, Verdict::Pass);
        assert!(report.t_star.is_some());
        let rate = report.decay_rate_fit.unwrap();
        assert!(rate < 0.0, "decay fit {rate}");
    }

    #[test]
    fn envelope_report_zero_run() {
        let sys = scenarios::example1();
        let mut unperturbed = sys.clone();
        unperturbed.perturbation = PerturbationSpec::none();
        let synth = synthesis::synthesize(&unperturbed).unwrap();
        let model = scenarios::example1_manual_remainder(synth.k_norm());
        let cert =
            certifier::certify_with_synthesis(&synth, &unperturbed.perturbation, &model, 0.0)
                .unwrap();
        let traj = integrate(&unperturbed, &synth, &DVector::zeros(2), (0.0, 1.0), 1e-2).unwrap();
        let report = verify_envelope(&traj, &cert);
        assert_eq!(report.envelope_violations, 0);
        assert_eq!(report.epsilon0_violations, 0);
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn uncertified_initial_condition_is_informational() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let model = scenarios::example1_manual_remainder(synth.k_norm());
        let cert =
            certifier::certify_with_synthesis(&synth, &sys.perturbation, &model, 0.0).unwrap();
        let x0 = DVector::from_vec(vec![cert.delta * 3.0, 0.0]);
        let traj = integrate(&sys, &synth, &x0, (0.0, 10.0), 1e-3).unwrap();
        let report = verify_envelope(&traj, &cert);
        assert!(!report.certified);
        assert_eq!(report.verdict, Verdict::Uncertified);
    }

    #[test]
    fn t_star_cases() {
        // Synthetic monotone decay crossing epsilon_tilde at a known index.
        let states: Vec<DVector<f64>> = (0..11)
            .map(|i| DVector::from_vec(vec![2.0 - 0.2 * i as f64]))
            .collect();
        let traj = Trajectory::from_states(0.0, 0.5, states);
        // norms: 2.0, 1.8, …, 0.0; first sample with norm < 1.0 is index 6 (t = 3.0).
        assert_eq!(eventual_las_metrics(&traj, 1.0), Some(3.0));

        // Everything already below the threshold: t_star = t0.
        let states: Vec<DVector<f64>> = (0..5).map(|_| DVector::from_vec(vec![0.1])).collect();
        let traj = Trajectory::from_states(1.0, 0.5, states);
        assert_eq!(eventual_las_metrics(&traj, 1.0), Some(1.0));

        // Diverging tail: absent.
        let states: Vec<DVector<f64>> = (0..5)
            .map(|i| DVector::from_vec(vec![1.0 + i as f64]))
            .collect();
        let traj = Trajectory::from_states(0.0, 0.5, states);
        assert_eq!(eventual_las_metrics(&traj, 1.0), None);
    }

    #[test]
    fn integrator_order_is_fourth() {
        let (sys, synth) = decay_system();
        let x0 = DVector::from_vec(vec![1.0]);
        let exact = (-5.0_f64).exp();
        let err = |dt: f64| {
            let traj = integrate(&sys, &synth, &x0, (0.0, 5.0), dt).unwrap();
            (traj.final_norm() - exact).abs()
        };
        let ratio = err(0.05) / err(0.025);
        assert!(
            (14.0..=18.0).contains(&ratio),
            "error ratio {ratio} outside [14, 18]"
        );
    }

    #[test]
    fn sweep_converges_inside_certified_ball() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let model = remainder_bound_auto(&sys.field, &synth.k).unwrap();
        let cert =
            certifier::certify_with_synthesis(&synth, &sys.perturbation, &model, 0.0).unwrap();

        let radii = [0.0, 0.5 * cert.delta, cert.delta];
        let table = sweep_roa(&sys, &synth, &cert, &radii, 6, 60.0, 1e-2, 42).unwrap();
        assert_eq!(table.rows.len(), 18);
        for row in &table.rows {
            assert!(row.converged, "radius {} dir {}", row.radius, row.dir_index);
            assert_eq!(row.epsilon0_violations, 0);
            assert_eq!(row.envelope_violations, 0);
        }
        let summary = table.summary();
        assert!(summary.certified_all_converged);
        assert_eq!(summary.certified_violations, 0);
    }

    #[test]
    fn sweep_requires_sorted_radii() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let model = remainder_bound_auto(&sys.field, &synth.k).unwrap();
        let cert =
            certifier::certify_with_synthesis(&synth, &sys.perturbation, &model, 0.0).unwrap();
        let err = sweep_roa(&sys, &synth, &cert, &[0.2, 0.1], 2, 1.0, 1e-2, 1);
        assert!(err.is_err());
    }

    #[test]
    fn sweep_empty_radii_is_empty_table() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let model = remainder_bound_auto(&sys.field, &synth.k).unwrap();
        let cert =
            certifier::certify_with_synthesis(&synth, &sys.perturbation, &model, 0.0).unwrap();
        let table = sweep_roa(&sys, &synth, &cert, &[], 8, 1.0, 1e-2, 1).unwrap();
        assert!(table.rows.is_empty());
        assert!(table.summary().certified_all_converged);
    }

    #[test]
    fn trajectory_csv_shape() {
        let (sys, synth) = decay_system();
        let traj = integrate(
            &sys,
            &synth,
            &DVector::from_vec(vec![1.0]),
            (0.0, 0.01),
            1e-2,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,norm,envelope,epsilon0");
        let first = lines.next().unwrap();
        assert!(first.contains("NaN"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn norms_match_states() {
        let sys = scenarios::example1();
        let synth = synthesis::synthesize(&sys).unwrap();
        let x0 = DVector::from_vec(vec![1e-3, -2e-3]);
        let traj = integrate(&sys, &synth, &x0, (0.0, 1.0), 1e-2).unwrap();
        for (x, &n) in traj.states.iter().zip(&traj.norms) {
            assert_relative_eq!(x.norm(), n, epsilon = 1e-14);
        }
    }
}
