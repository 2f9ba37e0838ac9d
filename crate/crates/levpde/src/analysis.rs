//! Quantitative diagnostics on trajectories and ensembles: time-regularity
//! seminorms, increment statistics, refinement studies along the three
//! approximation parameters, monotonicity residuals, the two-run uniqueness
//! experiment, moment estimates, and truncation occupancy.

use crate::operators::MonotoneOperatorSpec;
use crate::solver::{simulate, simulate_with_path, SolverConfig, SolverError, Trajectory};
use crate::spaces::{h_inner, Field, NormKind, SpectralBasis};
use crate::streams::{stream, subseed};
use rand::prelude::*;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("lag {0} is not a positive multiple of the trajectory step")]
    BadLag(f64),
    #[error("axis needs at least two values in ascending order")]
    BadAxis,
    #[error("trajectory needs at least two states")]
    ShortTrajectory,
    #[error("time grids do not match")]
    GridMismatch,
    #[error("run aborted after {step} steps: {message}")]
    RunAborted { step: usize, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Random field with Gaussian coefficients, envelope k^(-1.5), and a
/// uniform overall amplitude in [0.2, 3]; the sampler behind every
/// property suite in the crate.
pub fn sample_smooth_field(n: usize, seed: u64, tag: &str, idx: u64) -> Field {
    let mut rng = stream(seed, tag, idx, 0, 0);
    let amp = 0.2 + 2.8 * rng.random::<f64>();
    Field::from_coeffs(
        (0..n)
            .map(|k| {
                let z: f64 = rng.sample(StandardNormal);
                amp * z / ((k + 1) as f64).powf(1.5)
            })
            .collect(),
    )
}

/// Frozen probe fields for dual X-norm estimation.
pub fn x_dual_probes(n: usize, count: usize, seed: u64) -> Vec<Field> {
    (0..count).map(|i| sample_smooth_field(n, seed, "xprobe", i as u64)).collect()
}

/// Left-endpoint L^2(0,T;H) distance between two runs on one time grid;
/// coefficient vectors are zero-padded to the common length.
pub fn l2_time_distance(a: &Trajectory, b: &Trajectory) -> Result<f64, AnalysisError> {
    if a.times.len() != b.times.len() {
        return Err(AnalysisError::GridMismatch);
    }
    for (s, t) in a.times.iter().zip(&b.times) {
        if (s - t).abs() > 1e-12 * (1.0 + t.abs()) {
            return Err(AnalysisError::GridMismatch);
        }
    }
    let n = a.states[0].len().max(b.states[0].len());
    let mut sum = 0.0;
    for k in 0..a.states.len() - 1 {
        let dt = a.times[k + 1] - a.times[k];
        let d = a.states[k].resized(n).sub(&b.states[k].resized(n));
        sum += dt * h_inner(&d, &d);
    }
    Ok(sum.sqrt())
}

/// Time-regularity seminorm
/// (sum_{i != j} dt^2 |u(t_i) - u(t_j)|^m / |t_i - t_j|^{1+alpha m})^{1/m}.
pub fn gagliardo_seminorm(
    basis: &SpectralBasis,
    traj: &Trajectory,
    alpha: f64,
    m: f64,
    kind: NormKind,
) -> Result<f64, AnalysisError> {
    if traj.states.len() < 2 {
        return Err(AnalysisError::ShortTrajectory);
    }
    let steps = traj.states.len() - 1;
    let dt = traj.times[1] - traj.times[0];
    let mut sum = 0.0;
    for i in 0..steps {
        for j in 0..steps {
            if i == j {
                continue;
            }
            let gap = (traj.times[i] - traj.times[j]).abs();
            let d = traj.states[i].sub(&traj.states[j]);
            let num = basis.norm(&d, kind).powf(m);
            sum += dt * dt * num / gap.powf(1.0 + alpha * m);
        }
    }
    Ok(sum.powf(1.0 / m))
}

#[derive(Debug, Clone)]
pub struct IncrementReport {
    pub lags: Vec<f64>,
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    /// Fitted exponent of the mean ~ C lag^epsilon model over positive lags.
    pub epsilon: f64,
}

/// Mean V'+X' norm of state increments at each lag, taken at one uniformly
/// random grid time per (path, lag). The dual X part is estimated with 200
/// frozen probe fields.
pub fn increment_statistics(
    basis: &SpectralBasis,
    trajs: &[Trajectory],
    lags: &[f64],
    x_exponent: f64,
    x_order: usize,
    seed: u64,
) -> Result<IncrementReport, AnalysisError> {
    let first = trajs.first().ok_or(AnalysisError::ShortTrajectory)?;
    if first.states.len() < 2 {
        return Err(AnalysisError::ShortTrajectory);
    }
    let dt = first.times[1] - first.times[0];
    let steps = first.states.len() - 1;
    let probes = x_dual_probes(basis.len(), 200, seed);

    let mut means = Vec::with_capacity(lags.len());
    let mut ses = Vec::with_capacity(lags.len());
    for (li, &lag) in lags.iter().enumerate() {
        let ratio = lag / dt;
        let lag_steps = ratio.round() as usize;
        if ratio < -1e-9 || (ratio - lag_steps as f64).abs() > 1e-9 * (1.0 + ratio) {
            return Err(AnalysisError::BadLag(lag));
        }
        if lag_steps > steps {
            return Err(AnalysisError::BadLag(lag));
        }
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for (pi, traj) in trajs.iter().enumerate() {
            let mut rng = stream(seed, "aldous", pi as u64, li as u64, 0);
            let base = rng.random_range(0..=steps - lag_steps);
            let d = traj.states[base + lag_steps].sub(&traj.states[base]);
            let norm = basis.norm(&d, NormKind::DualV)
                + basis.dual_x_estimate(&d.coeffs, x_exponent, x_order, &probes);
            sum += norm;
            sum2 += norm * norm;
        }
        let npaths = trajs.len() as f64;
        let mean = sum / npaths;
        let var = (sum2 / npaths - mean * mean).max(0.0);
        means.push(mean);
        ses.push((var / npaths).sqrt());
    }

    // least-squares slope in log-log over lags with positive mean
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .zip(&means)
        .filter(|(l, m)| **l > 0.0 && **m > 0.0)
        .map(|(l, m)| (l.ln(), m.ln()))
        .collect();
    let epsilon = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    } else {
        0.0
    };
    Ok(IncrementReport { lags: lags.to_vec(), means, ses, epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    /// Galerkin dimension n.
    Modes,
    /// Operator truncation radius R.
    Truncation,
    /// Convection cutoff level.
    Cutoff,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub axis: Vec<f64>,
    /// L^2(0,T;H) distance between consecutive runs.
    pub l2_distances: Vec<f64>,
    pub terminal_distances: Vec<f64>,
    pub monotone_cauchy: bool,
    /// False when a run aborted; distances computed so far are kept.
    pub complete: bool,
}

/// Rerun one config along an axis of approximation parameters on a frozen
/// noise realization and measure consecutive distances.
///
/// For the mode axis the base descriptor is zero-padded, so every run sees
/// the identical realization on the shared modes; the base mode count must
/// therefore not exceed the smallest axis value.
pub fn convergence_study(
    base: &SolverConfig,
    axis: StudyAxis,
    values: &[f64],
) -> Result<ConvergenceReport, AnalysisError> {
    // duplicated values are allowed: identical runs give exact zero distance
    if values.len() < 2 || values.windows(2).any(|w| w[0] > w[1]) {
        return Err(AnalysisError::BadAxis);
    }
    let mut runs: Vec<Trajectory> = Vec::with_capacity(values.len());
    let mut complete = true;
    for &v in values {
        let mut cfg = base.clone();
        match axis {
            StudyAxis::Modes => {
                let n = v.round() as usize;
                if n == 0 || (v - n as f64).abs() > 1e-9 {
                    return Err(AnalysisError::BadAxis);
                }
                cfg.n = n;
                cfg.noise = base.noise.resized(n);
            }
            StudyAxis::Truncation => cfg.truncation = Some(v),
            StudyAxis::Cutoff => {
                cfg.cutoff = Some(
                    crate::convection::CutoffParams::new(v)
                        .map_err(SolverError::Convection)?,
                );
            }
        }
        match simulate(&cfg) {
            Ok(t) => runs.push(t),
            Err(_) => {
                complete = false;
                break;
            }
        }
    }

    let mut l2 = Vec::new();
    let mut terminal = Vec::new();
    for w in runs.windows(2) {
        l2.push(l2_time_distance(&w[0], &w[1])?);
        let n = w[0].terminal().len().max(w[1].terminal().len());
        let d = w[0].terminal().resized(n).sub(&w[1].terminal().resized(n));
        terminal.push(h_inner(&d, &d).sqrt());
    }
    let monotone_cauchy = complete && l2.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceReport {
        axis: values.to_vec(),
        l2_distances: l2,
        terminal_distances: terminal,
        monotone_cauchy,
        complete,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct MintyReport {
    pub pairs: usize,
    /// Worst raw pairing <F(u)-F(v), u-v> over the sample.
    pub min_pairing: f64,
    /// Worst pairing divided by (|u|_X + |v|_X)^(p-1) |u-v|_X.
    pub min_scaled: f64,
    /// Smallest pairing / |u-v|_V^2 ratio (the strong-monotonicity slope).
    pub slope_v2: f64,
    /// Smallest pairing / |u-v|_X^p ratio.
    pub slope_xp: f64,
}

/// Sample the monotonicity pairing of an operator over random pairs.
pub fn minty_residual(
    basis: &SpectralBasis,
    op: &MonotoneOperatorSpec,
    pairs: usize,
    seed: u64,
) -> Result<MintyReport, AnalysisError> {
    let n = basis.len();
    let mut report = MintyReport {
        pairs,
        min_pairing: f64::INFINITY,
        min_scaled: f64::INFINITY,
        slope_v2: f64::INFINITY,
        slope_xp: f64::INFINITY,
    };
    for i in 0..pairs {
        let u = sample_smooth_field(n, seed, "minty_u", i as u64);
        let v = sample_smooth_field(n, seed, "minty_v", i as u64);
        let d = u.sub(&v);
        let pairing = op
            .pairing_f(basis, &u, &d)
            .map_err(SolverError::Operators)?
            - op.pairing_f(basis, &v, &d).map_err(SolverError::Operators)?;
        let err = SolverError::Operators;
        let xu = op.x_norm(basis, &u).map_err(err)?;
        let xv = op.x_norm(basis, &v).map_err(err)?;
        let xd = op.x_norm(basis, &d).map_err(err)?;
        let scale = (xu + xv).powf(op.p - 1.0) * xd;
        let v2 = basis.norm(&d, NormKind::V).powi(2);
        report.min_pairing = report.min_pairing.min(pairing);
        if scale > 0.0 {
            report.min_scaled = report.min_scaled.min(pairing / scale);
        }
        if v2 > 0.0 {
            report.slope_v2 = report.slope_v2.min(pairing / v2);
        }
        if xd > 0.0 {
            report.slope_xp = report.slope_xp.min(pairing / xd.powf(op.p));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
pub struct UniquenessReport {
    /// sup over grid times of the H-distance of the two runs.
    pub sup_distance: f64,
    /// Left-endpoint integral of |u1|_X^2 over the horizon.
    pub gronwall_integral: f64,
    /// exp(gronwall_integral), the growth factor the distance bound allows.
    pub gronwall_weight: f64,
    pub m_level: f64,
    /// First grid time where the running integral of |u1|_X^p exceeds
    /// m_level; equals the horizon when never exceeded.
    pub tau_m: f64,
    /// Bit-identical trajectories (always true for delta0 = 0).
    pub identical: bool,
}

/// Run the config twice on one noise path, the second time with the
/// initial state shifted by delta0 on the first mode.
pub fn uniqueness_experiment(
    cfg: &SolverConfig,
    delta0: f64,
    m_level: f64,
) -> Result<UniquenessReport, AnalysisError> {
    cfg.validate()?;
    let basis = cfg.basis()?;
    let path = crate::noise::sample_path(&cfg.noise, cfg.t_horizon, cfg.dt, cfg.seed)
        .map_err(SolverError::Noise)?;
    let run = |c: &SolverConfig| {
        simulate_with_path(c, &path).map_err(|a| AnalysisError::RunAborted {
            step: a.partial.ledger.len(),
            message: a.error.to_string(),
        })
    };
    let t1 = run(cfg)?;
    let mut cfg2 = cfg.clone();
    let mut shifted = cfg.sample_initial();
    shifted.coeffs[0] += delta0;
    cfg2.initial = crate::solver::Initial::Deterministic(shifted);
    let t2 = run(&cfg2)?;

    let mut sup = 0.0f64;
    let mut identical = true;
    for (a, b) in t1.states.iter().zip(&t2.states) {
        if a.coeffs != b.coeffs {
            identical = false;
        }
        let d = a.sub(b);
        sup = sup.max(h_inner(&d, &d).sqrt());
    }

    let (p, k) = cfg
        .operator
        .as_ref()
        .map(|o| (o.p, o.k))
        .unwrap_or((2.0, 1));
    let mut int_x2 = 0.0;
    let mut int_xp = 0.0;
    let mut tau_m = cfg.t_horizon;
    let mut crossed = false;
    for i in 0..t1.states.len() - 1 {
        let dt = t1.times[i + 1] - t1.times[i];
        let xn = basis.norm(&t1.states[i], NormKind::X { p, k });
        int_x2 += dt * xn * xn;
        int_xp += dt * xn.powf(p);
        if !crossed && int_xp > m_level {
            tau_m = t1.times[i + 1];
            crossed = true;
        }
    }
    Ok(UniquenessReport {
        sup_distance: sup,
        gronwall_integral: int_x2,
        gronwall_weight: int_x2.exp(),
        m_level,
        tau_m,
        identical,
    })
}

/// All trajectories of an ensemble, path k seeded by subseed(seed, k).
pub fn simulate_ensemble(
    cfg: &SolverConfig,
    paths: usize,
) -> Result<Vec<Trajectory>, AnalysisError> {
    (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut c = cfg.clone();
            c.seed = subseed(cfg.seed, "path", p as u64);
            simulate(&c).map_err(|a| AnalysisError::RunAborted {
                step: a.partial.ledger.len(),
                message: a.error.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentReport {
    pub paths: usize,
    pub sup_h2: MomentEstimate,
    pub int_v2: MomentEstimate,
    pub int_xp: MomentEstimate,
}

fn jackknife(values: &[f64]) -> MomentEstimate {
    let m = values.len();
    let total = kahan_sum(values);
    let mean = total / m as f64;
    if m < 2 {
        return MomentEstimate { mean, se: 0.0 };
    }
    // leave-one-out means of the mean statistic
    let mut dev2 = 0.0;
    for v in values {
        let loo = (total - v) / (m as f64 - 1.0);
        dev2 += (loo - mean) * (loo - mean);
    }
    let var = dev2 * (m as f64 - 1.0) / m as f64;
    MomentEstimate { mean, se: var.sqrt() }
}

fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Monte Carlo estimates of the three energy functionals over an ensemble.
pub fn moment_study(cfg: &SolverConfig, paths: usize) -> Result<MomentReport, AnalysisError> {
    assert!(paths >= 2, "need at least two paths");
    let basis = cfg.basis()?;
    let (p, k) = cfg
        .operator
        .as_ref()
        .map(|o| (o.p, o.k))
        .unwrap_or((2.0, 1));
    let trajs = simulate_ensemble(cfg, paths)?;
    let mut sup = Vec::with_capacity(paths);
    let mut v2 = Vec::with_capacity(paths);
    let mut xp = Vec::with_capacity(paths);
    for t in &trajs {
        let report = crate::solver::energy_report(&basis, p, k, t);
        sup.push(report.sup_h2);
        v2.push(report.int_v2);
        xp.push(report.int_xp);
    }
    Ok(MomentReport {
        paths,
        sup_h2: jackknife(&sup),
        int_v2: jackknife(&v2),
        int_xp: jackknife(&xp),
    })
}

#[derive(Debug, Clone)]
pub struct OccupancyReport {
    pub r_values: Vec<f64>,
    /// Time-averaged sum over derivative orders of the fraction of the
    /// domain where |D^i u|_p exceeds R.
    pub occupancy: Vec<f64>,
    /// occupancy * R^p, the quantity the a priori bound keeps of order one.
    pub occ_rp: Vec<f64>,
    pub monotone: bool,
}

/// Time-averaged truncation occupancy of one run across an R grid.
pub fn occupancy_study(
    cfg: &SolverConfig,
    r_values: &[f64],
) -> Result<OccupancyReport, AnalysisError> {
    if r_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadAxis);
    }
    let op = cfg
        .operator
        .as_ref()
        .ok_or_else(|| SolverError::BadConfig("occupancy needs an operator".into()))?
        .clone();
    let basis = cfg.basis()?;
    let traj = simulate(cfg).map_err(|a| AnalysisError::RunAborted {
        step: a.partial.ledger.len(),
        message: a.error.to_string(),
    })?;
    let mut occupancy = Vec::with_capacity(r_values.len());
    let mut occ_rp = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut acc = 0.0;
        for i in 0..traj.states.len() - 1 {
            let dt = traj.times[i + 1] - traj.times[i];
            let occ = op
                .truncation_occupancy(&basis, &traj.states[i], r)
                .map_err(SolverError::Operators)?;
            acc += dt * occ.iter().sum::<f64>();
        }
        let avg = acc / cfg.t_horizon;
        occupancy.push(avg);
        occ_rp.push(avg * r.powf(op.p));
    }
    let monotone = occupancy.windows(2).all(|w| w[1] <= w[0]);
    Ok(OccupancyReport { r_values: r_values.to_vec(), occupancy, occ_rp, monotone })
}
