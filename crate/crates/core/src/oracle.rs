//! Independent finite-horizon verification: build dense block-Toeplitz
//! matrices from the plant channels and the controller, re-derive the
//! finite-horizon non-causal reference, and eigensolve the regret
//! quadratic form directly. This is a desk-scale, from-first-principles
//! counterpart of the frequency-domain machinery and shares none of its
//! code path.

use crate::error::Error;
use crate::linalg::*;
use crate::synthesis::{youla_to_feedback, ControllerRealization, RealizationForm};
use crate::sysmodel::StateSpacePlant;
use crate::Result;

/// Dense block-Toeplitz matrix of a causal map over a finite horizon.
#[derive(Debug, Clone)]
pub struct ToeplitzOperator {
    pub n_horizon: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub data: Mat,
}

/// Budget guard for the dense eigensolve.
pub const DENSE_BUDGET: usize = 5000;

/// Build the horizon-N block-Toeplitz matrix of a realization: block
/// (i, j) is the impulse-response coefficient at lag i - j (D at lag 0
/// unless `strictly_causal`, C A^{k-1} B at lag k >= 1).
pub fn build_toeplitz(
    a: &Mat,
    b: &Mat,
    c: &Mat,
    d: &Mat,
    n_horizon: usize,
    strictly_causal: bool,
) -> Result<ToeplitzOperator> {
    if n_horizon == 0 {
        return Err(Error::Dimension("horizon must be at least one".into()));
    }
    let (rows, cols) = (c.nrows(), b.ncols());
    let mut blocks: Vec<Mat> = Vec::with_capacity(n_horizon);
    blocks.push(if strictly_causal {
        Mat::zeros(rows, cols)
    } else {
        d.clone()
    });
    if a.nrows() == 0 {
        for _ in 1..n_horizon {
            blocks.push(Mat::zeros(rows, cols));
        }
    } else {
        let mut pow = b.clone(); // A^{k-1} B
        for _ in 1..n_horizon {
            blocks.push(c * &pow);
            pow = a * &pow;
        }
    }
    let mut data = Mat::zeros(n_horizon * rows, n_horizon * cols);
    for i in 0..n_horizon {
        for j in 0..=i {
            data.view_mut((i * rows, j * cols), (rows, cols))
                .copy_from(&blocks[i - j]);
        }
    }
    Ok(ToeplitzOperator {
        n_horizon,
        block_rows: rows,
        block_cols: cols,
        data,
    })
}

/// Toeplitz matrices of the three plant channels entering the closed
/// loop (all strictly causal).
pub fn plant_toeplitz(plant: &StateSpacePlant, n_horizon: usize) -> Result<(Mat, Mat, Mat)> {
    let zero = |r: usize, c: usize| Mat::zeros(r, c);
    let p11 = build_toeplitz(
        &plant.f,
        &plant.g1,
        &plant.l,
        &zero(plant.q(), plant.n_w()),
        n_horizon,
        true,
    )?;
    let p12 = build_toeplitz(
        &plant.f,
        &plant.g2,
        &plant.l,
        &zero(plant.q(), plant.m()),
        n_horizon,
        true,
    )?;
    let p21 = build_toeplitz(
        &plant.f,
        &plant.g1,
        &plant.h,
        &zero(plant.p(), plant.n_w()),
        n_horizon,
        true,
    )?;
    Ok((p11.data, p12.data, p21.data))
}

/// Finite-horizon non-causal reference, re-derived at this horizon:
/// -(I + P12' P12)^{-1} P12' P11 P21' (I + P21 P21')^{-1}.
pub fn finite_h2_noncausal(p11: &Mat, p12: &Mat, p21: &Mat) -> Result<Mat> {
    let t12 = eye(p12.ncols()) + p12.transpose() * p12;
    let u21 = eye(p21.nrows()) + p21 * p21.transpose();
    let rhs = p12.transpose() * p11 * p21.transpose() * inv(&u21)?;
    Ok(-solve(&t12, &rhs)?)
}

/// Result of the finite-horizon regret eigensolve.
#[derive(Debug, Clone)]
pub struct FiniteRegret {
    pub value: f64,
    /// Maximizing stacked direction, split into the disturbance and
    /// noise sequences.
    pub w_seq: Vec<Vec64>,
    pub v_seq: Vec<Vec64>,
}

fn closed_loop_toeplitz(p11: &Mat, p12: &Mat, p21: &Mat, q: &Mat) -> Mat {
    let tl = p11 + p12 * q * p21;
    let tr = p12 * q;
    let bl = q * p21;
    block_matrix(&[vec![tl, tr], vec![bl, q.clone()]])
}

/// Largest eigenvalue of T_Q' T_Q - T_ref' T_ref over the stacked
/// (w, v) space at horizon N, with the reference re-optimized at this
/// horizon. Also returns the maximizing direction for replay.
pub fn finite_horizon_regret(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    n_horizon: usize,
) -> Result<FiniteRegret> {
    if q.form != RealizationForm::YoulaParameter {
        return Err(Error::Dimension(
            "finite-horizon regret consumes a Youla-parameter realization".into(),
        ));
    }
    let dims = n_horizon * (plant.n_w() + plant.p());
    if dims > DENSE_BUDGET {
        return Err(Error::Dimension(format!(
            "dense budget exceeded: {dims} > {DENSE_BUDGET}"
        )));
    }
    let (p11, p12, p21) = plant_toeplitz(plant, n_horizon)?;
    let qt = build_toeplitz(&q.a, &q.b, &q.c, &q.d, n_horizon, false)?.data;
    let t_q = closed_loop_toeplitz(&p11, &p12, &p21, &qt);
    let q2 = finite_h2_noncausal(&p11, &p12, &p21)?;
    let t_ref = closed_loop_toeplitz(&p11, &p12, &p21, &q2);
    let diff = sym(&(t_q.transpose() * &t_q - t_ref.transpose() * &t_ref));
    let se = diff.symmetric_eigen();
    let (mut best, mut idx) = (f64::NEG_INFINITY, 0usize);
    for (i, v) in se.eigenvalues.iter().enumerate() {
        if *v > best {
            best = *v;
            idx = i;
        }
    }
    let dir = se.eigenvectors.column(idx).into_owned();
    let nw = plant.n_w();
    let p = plant.p();
    let w_len = n_horizon * nw;
    let w_seq: Vec<Vec64> = (0..n_horizon)
        .map(|k| Vec64::from_iterator(nw, (0..nw).map(|i| dir[k * nw + i])))
        .collect();
    let v_seq: Vec<Vec64> = (0..n_horizon)
        .map(|k| Vec64::from_iterator(p, (0..p).map(|i| dir[w_len + k * p + i])))
        .collect();
    Ok(FiniteRegret {
        value: best,
        w_seq,
        v_seq,
    })
}

/// Replay a worst-case direction through the time-domain simulation and
/// return the achieved regret quadratic form: the simulated cost of the
/// loop minus the reference cost on the same direction.
pub fn replay_regret(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
    reg: &FiniteRegret,
    n_horizon: usize,
) -> Result<f64> {
    let k = youla_to_feedback(plant, q)?;
    let (cost, _) = crate::evaluation::simulate(plant, &k, &reg.w_seq, &reg.v_seq, n_horizon)?;
    let (p11, p12, p21) = plant_toeplitz(plant, n_horizon)?;
    let q2 = finite_h2_noncausal(&p11, &p12, &p21)?;
    let t_ref = closed_loop_toeplitz(&p11, &p12, &p21, &q2);
    let mut d = Vec64::zeros(t_ref.ncols());
    let nw = plant.n_w();
    let p = plant.p();
    for (kstep, w) in reg.w_seq.iter().enumerate() {
        for i in 0..nw {
            d[kstep * nw + i] = w[i];
        }
    }
    let off = n_horizon * nw;
    for (kstep, v) in reg.v_seq.iter().enumerate() {
        for i in 0..p {
            d[off + kstep * p + i] = v[i];
        }
    }
    let ref_cost = (&t_ref * &d).norm_squared();
    Ok(cost - ref_cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::synthesize_ro_causal;
    use crate::sysmodel::scalar_plant;

    #[test]
    fn toeplitz_strictly_causal_structure() {
        let plant = scalar_plant();
        // N = 2 for L(zI-F)^{-1}G1: blocks [[0,0],[LG1,0]]
        let t = build_toeplitz(
            &plant.f,
            &plant.g1,
            &plant.l,
            &Mat::zeros(1, 1),
            2,
            true,
        )
        .unwrap();
        assert!((t.data[(0, 0)]).abs() < 1e-15);
        assert!((t.data[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((t.data[(1, 1)]).abs() < 1e-15);
        // N = 1 of a strictly causal channel is the zero block
        let t1 = build_toeplitz(&plant.f, &plant.g1, &plant.l, &Mat::zeros(1, 1), 1, true)
            .unwrap();
        assert!(t1.data.norm() == 0.0);
    }

    #[test]
    fn toeplitz_matches_simulation() {
        use rand::{Rng, SeedableRng};
        let plant = scalar_plant();
        let q = synthesize_ro_causal(&plant, 2.0).unwrap();
        let k = youla_to_feedback(&plant, &q).unwrap();
        let n = 50;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w_seq: Vec<Vec64> = (0..n)
            .map(|_| Vec64::from_element(1, rng.gen_range(-1.0..1.0)))
            .collect();
        let v_seq: Vec<Vec64> = (0..n)
            .map(|_| Vec64::from_element(1, rng.gen_range(-1.0..1.0)))
            .collect();
        let (cost, _) = crate::evaluation::simulate(&plant, &k, &w_seq, &v_seq, n).unwrap();
        let (p11, p12, p21) = plant_toeplitz(&plant, n).unwrap();
        let qt = build_toeplitz(&q.a, &q.b, &q.c, &q.d, n, false).unwrap().data;
        let t = closed_loop_toeplitz(&p11, &p12, &p21, &qt);
        let mut d = Vec64::zeros(2 * n);
        for i in 0..n {
            d[i] = w_seq[i][0];
            d[n + i] = v_seq[i][0];
        }
        let alg_cost = (&t * &d).norm_squared();
        assert!(
            (cost - alg_cost).abs() <= 1e-12 * (1.0 + alg_cost),
            "{cost} vs {alg_cost}"
        );
    }

    #[test]
    fn finite_reference_trivial_cases() {
        let mut plant = scalar_plant();
        plant.g2 = Mat::from_element(1, 1, 0.0);
        let (p11, p12, p21) = plant_toeplitz(&plant, 8).unwrap();
        let q2 = finite_h2_noncausal(&p11, &p12, &p21).unwrap();
        assert!(q2.norm() < 1e-14);
        // N = 1: all plant blocks are zero, so the reference is zero
        let plant = scalar_plant();
        let (p11, p12, p21) = plant_toeplitz(&plant, 1).unwrap();
        let q2 = finite_h2_noncausal(&p11, &p12, &p21).unwrap();
        assert!(q2.norm() < 1e-14);
    }

    #[test]
    fn finite_reference_first_order_optimality() {
        use rand::{Rng, SeedableRng};
        let plant = scalar_plant();
        let n = 12;
        let (p11, p12, p21) = plant_toeplitz(&plant, n).unwrap();
        let q2 = finite_h2_noncausal(&p11, &p12, &p21).unwrap();
        let base = closed_loop_toeplitz(&p11, &p12, &p21, &q2).norm();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut dq = Mat::zeros(n, n);
            for v in dq.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let dq = &dq * (1e-3 / dq.norm());
            let perturbed = closed_loop_toeplitz(&p11, &p12, &p21, &(&q2 + dq)).norm();
            assert!(perturbed + 1e-12 >= base, "perturbation decreased the norm");
        }
    }

    #[test]
    fn reference_beats_itself() {
        // plumbing mode: regret of the finite-horizon reference against
        // itself is non-positive up to numerical slack
        let plant = scalar_plant();
        let n = 16;
        let (p11, p12, p21) = plant_toeplitz(&plant, n).unwrap();
        let q2 = finite_h2_noncausal(&p11, &p12, &p21).unwrap();
        let t = closed_loop_toeplitz(&p11, &p12, &p21, &q2);
        let diff = sym(&(t.transpose() * &t - t.transpose() * &t));
        assert!(sym_eigenvalues(&diff).last().unwrap().abs() <= 1e-9);
        let _ = q2;
    }

    #[test]
    fn budget_guard() {
        let plant = scalar_plant();
        let q = synthesize_ro_causal(&plant, 2.0).unwrap();
        assert!(matches!(
            finite_horizon_regret(&plant, &q, 5000),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn replay_matches_quadratic_form() {
        let plant = scalar_plant();
        let q = synthesize_ro_causal(&plant, 2.0).unwrap();
        let n = 40;
        let reg = finite_horizon_regret(&plant, &q, n).unwrap();
        let replayed = replay_regret(&plant, &q, &reg, n).unwrap();
        assert!(
            (replayed - reg.value).abs() <= 1e-8 * (1.0 + reg.value.abs()),
            "replayed {replayed} vs eig {}",
            reg.value
        );
    }
}
