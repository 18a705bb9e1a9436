//! Frequency-domain evaluation: the closed-loop transfer map, the
//! pointwise non-causal reference, squared Frobenius and operator norms,
//! the regret norm, and time-domain simulation.
//!
//! All integrals use the trapezoid rule on a uniform unit-circle grid
//! (spectrally accurate for the rational stable integrands here); sup
//! norms refine the grid maximizer by golden-section search.

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::*;
use crate::synthesis::{ControllerRealization, RealizationForm};
use crate::sysmodel::{Channel, StateSpacePlant};
use crate::Result;

/// Uniform frequency grid on [0, 2*pi); the point count must be a power
/// of two, at least 64.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "grid size must be a power of two >= 64, got {n}"
            )));
        }
        let step = 2.0 * std::f64::consts::PI / n as f64;
        Ok(Self {
            points: (0..n).map(|k| k as f64 * step).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One row of the per-frequency sweep table.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub omega: f64,
    /// Tr(T^H T) at this frequency.
    pub trace: f64,
    /// Largest eigenvalue of T^H T.
    pub sigma_max_sq: f64,
    /// Largest eigenvalue of T^H T - T_ref^H T_ref (signed, not clipped).
    pub regret_eig: f64,
}

/// Norms of one closed loop over a grid.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub frobenius_sq: f64,
    pub operator_sq: f64,
    pub regret: f64,
    pub per_frequency: Vec<SweepRow>,
}

/// Operator-norm result with its maximizing frequency.
#[derive(Debug, Clone, Copy)]
pub struct SupResult {
    pub value: f64,
    pub omega: f64,
}

fn require_youla(q: &ControllerRealization) -> Result<()> {
    if q.form != RealizationForm::YoulaParameter {
        return Err(Error::Dimension(
            "evaluation consumes Youla-parameter realizations; convert feedback controllers first"
                .into(),
        ));
    }
    Ok(())
}

/// The closed-loop map from (w, v) to (s, u) at z = e^{i omega}:
/// [[P11 + P12 Q P21, P12 Q], [Q P21, Q]].
pub fn closed_loop_tq(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    omega: f64,
) -> Result<CMat> {
    require_youla(q)?;
    let z = Complex64::from_polar(1.0, omega);
    let qv = q.eval(z)?;
    tq_from_value(plant, &qv, z)
}

pub(crate) fn tq_from_value(plant: &StateSpacePlant, qv: &CMat, z: Complex64) -> Result<CMat> {
    let p11 = crate::factorization::channel(plant, Channel::P11, z)?;
    let p12 = crate::factorization::channel(plant, Channel::P12, z)?;
    let p21 = crate::factorization::channel(plant, Channel::P21, z)?;
    let tl = &p11 + &p12 * qv * &p21;
    let tr = &p12 * qv;
    let bl = qv * &p21;
    Ok(cblock2x2(&tl, &tr, &bl, qv))
}

/// The non-causal reference at one frequency:
/// Q2 = -(I + P12^H P12)^{-1} P12^H P11 P21^H (I + P21 P21^H)^{-1}.
pub fn noncausal_q2_at(plant: &StateSpacePlant, omega: f64) -> Result<CMat> {
    let z = Complex64::from_polar(1.0, omega);
    let p11 = crate::factorization::channel(plant, Channel::P11, z)?;
    let p12 = crate::factorization::channel(plant, Channel::P12, z)?;
    let p21 = crate::factorization::channel(plant, Channel::P21, z)?;
    let t12 = ceye(plant.m()) + p12.adjoint() * &p12;
    let u21 = ceye(plant.p()) + &p21 * p21.adjoint();
    let rhs = p12.adjoint() * &p11 * p21.adjoint() * cinv(&u21)?;
    Ok(-csolve(&t12, &rhs)?)
}

/// Pairwise (cascade) summation for a deterministic reduction order.
fn pairwise_sum(xs: &mut [f64]) -> f64 {
    let mut n = xs.len();
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            xs[i] = xs[2 * i] + xs[2 * i + 1];
        }
        if n % 2 == 1 {
            xs[half] = xs[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    xs.first().copied().unwrap_or(0.0)
}

/// Squared Frobenius norm: (1/2 pi) integral of Tr(T^H T) by the
/// trapezoid rule on the grid (the mean over a uniform periodic grid).
pub fn frobenius_norm_sq(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    grid: &FrequencyGrid,
) -> Result<f64> {
    require_youla(q)?;
    let mut traces: Vec<f64> = Vec::with_capacity(grid.len());
    for &w in &grid.points {
        let t = closed_loop_tq(plant, q, w)?;
        let g = t.adjoint() * &t;
        traces.push(g.diagonal().iter().map(|c| c.re).sum());
    }
    Ok(pairwise_sum(&mut traces) / grid.len() as f64)
}

fn golden_refine<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> Result<(f64, f64)> {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (fc, c) } else { (fd, d) })
}

fn sup_over_grid<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    grid: &FrequencyGrid,
) -> Result<SupResult> {
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 0usize;
    for (k, &w) in grid.points.iter().enumerate() {
        let v = f(w)?;
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let step = 2.0 * std::f64::consts::PI / grid.len() as f64;
    let a = grid.points[best_k] - step;
    let b = grid.points[best_k] + step;
    let (refined, at) = golden_refine(&mut f, a, b, 40)?;
    Ok(if refined > best {
        SupResult {
            value: refined,
            omega: at.rem_euclid(2.0 * std::f64::consts::PI),
        }
    } else {
        SupResult {
            value: best,
            omega: grid.points[best_k],
        }
    })
}

/// Squared operator norm: max over frequency of the largest eigenvalue
/// of T^H T, refined around the grid maximizer.
pub fn operator_norm_sq(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    grid: &FrequencyGrid,
) -> Result<SupResult> {
    require_youla(q)?;
    sup_over_grid(
        |w| {
            let t = closed_loop_tq(plant, q, w)?;
            Ok(hermitian_eig_max(&(t.adjoint() * &t)))
        },
        grid,
    )
}

/// Regret norm: sup over frequency of the largest eigenvalue of
/// T_Q^H T_Q - T_ref^H T_ref with the non-causal reference recomputed
/// pointwise.
pub fn regret_norm(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    grid: &FrequencyGrid,
) -> Result<SupResult> {
    require_youla(q)?;
    sup_over_grid(|w| regret_eig_at(plant, q, w), grid)
}

fn regret_eig_at(plant: &StateSpacePlant, q: &ControllerRealization, w: f64) -> Result<f64> {
    let t = closed_loop_tq(plant, q, w)?;
    let z = Complex64::from_polar(1.0, w);
    let q2 = noncausal_q2_at(plant, w)?;
    let t2 = tq_from_value(plant, &q2, z)?;
    let diff = t.adjoint() * &t - t2.adjoint() * &t2;
    Ok(hermitian_eig_max(&diff))
}

/// Full per-frequency report for one controller.
pub fn norm_report(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    grid: &FrequencyGrid,
) -> Result<NormReport> {
    require_youla(q)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut traces = Vec::with_capacity(grid.len());
    for &w in &grid.points {
        let t = closed_loop_tq(plant, q, w)?;
        let g = t.adjoint() * &t;
        let trace: f64 = g.diagonal().iter().map(|c| c.re).sum();
        let sig = hermitian_eig_max(&g);
        let reg = regret_eig_at(plant, q, w)?;
        rows.push(SweepRow {
            omega: w,
            trace,
            sigma_max_sq: sig,
            regret_eig: reg,
        });
        traces.push(trace);
    }
    let frob = pairwise_sum(&mut traces) / grid.len() as f64;
    let op = operator_norm_sq(plant, q, grid)?;
    let reg = regret_norm(plant, q, grid)?;
    Ok(NormReport {
        frobenius_sq: frob,
        operator_sq: op.value,
        regret: reg.value,
        per_frequency: rows,
    })
}

/// Norms of the non-causal reference loop itself (its regret is zero by
/// definition).
pub fn reference_norms(plant: &StateSpacePlant, grid: &FrequencyGrid) -> Result<(f64, f64)> {
    let mut traces: Vec<f64> = Vec::with_capacity(grid.len());
    for &w in &grid.points {
        let z = Complex64::from_polar(1.0, w);
        let t = tq_from_value(plant, &noncausal_q2_at(plant, w)?, z)?;
        let g = t.adjoint() * &t;
        traces.push(g.diagonal().iter().map(|c| c.re).sum());
    }
    let frob = pairwise_sum(&mut traces) / grid.len() as f64;
    let op = sup_over_grid(
        |w| {
            let z = Complex64::from_polar(1.0, w);
            let t = tq_from_value(plant, &noncausal_q2_at(plant, w)?, z)?;
            Ok(hermitian_eig_max(&(t.adjoint() * &t)))
        },
        grid,
    )?;
    Ok((frob, op.value))
}

/// Simulation trajectories: states, inputs, measurements, regulated
/// outputs, one entry per step.
#[derive(Debug, Clone)]
pub struct SimTrajectories {
    pub x: Vec<Vec64>,
    pub u: Vec<Vec64>,
    pub y: Vec<Vec64>,
    pub s: Vec<Vec64>,
}

/// Step the plant and a feedback controller over given disturbance and
/// noise sequences from zero initial state; returns the accumulated cost
/// sum(s's + u'u) and the trajectories.
pub fn simulate(
    plant: &StateSpacePlant,
    k: &ControllerRealization,
    w_seq: &[Vec64],
    v_seq: &[Vec64],
    horizon: usize,
) -> Result<(f64, SimTrajectories)> {
    if k.form != RealizationForm::Feedback {
        return Err(Error::Dimension(
            "simulate drives the loop with a feedback-form controller".into(),
        ));
    }
    let n = plant.n();
    let mut x = Vec64::zeros(n);
    let mut xi = Vec64::zeros(k.n_states());
    let mut cost_terms: Vec<f64> = Vec::with_capacity(horizon);
    let mut traj = SimTrajectories {
        x: Vec::with_capacity(horizon),
        u: Vec::with_capacity(horizon),
        y: Vec::with_capacity(horizon),
        s: Vec::with_capacity(horizon),
    };
    let zero_w = Vec64::zeros(plant.n_w());
    let zero_v = Vec64::zeros(plant.p());
    for step in 0..horizon {
        let w = w_seq.get(step).unwrap_or(&zero_w);
        let v = v_seq.get(step).unwrap_or(&zero_v);
        let y = &plant.h * &x + v;
        let u = &k.c * &xi + &k.d * &y;
        let s = &plant.l * &x;
        cost_terms.push(s.norm_squared() + u.norm_squared());
        traj.x.push(x.clone());
        traj.u.push(u.clone());
        traj.y.push(y.clone());
        traj.s.push(s);
        xi = &k.a * &xi + &k.b * &y;
        x = &plant.f * &x + &plant.g1 * w + &plant.g2 * &u;
        let norm = x.norm();
        if !norm.is_finite() || norm > 1e12 {
            return Err(Error::Divergence { step, norm });
        }
    }
    Ok((pairwise_sum(&mut cost_terms), traj))
}
