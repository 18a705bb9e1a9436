//! Split of the factored transfer matrix M^{1/2} Q2 W^{-1/2} into two
//! causal parts and a strictly anticausal part, for both the causal and
//! the strictly-causal synthesis paths. The split rests on three matrix
//! equations (two Stein-type, one Sylvester-type) whose solutions also
//! feed the controller assembly.

use num_complex::Complex64;

use crate::error::Error;
use crate::factorization::{eval_m_half, eval_w_minus_half, FactorSet};
use crate::linalg::*;
use crate::solvers::{solve_stein, solve_sylvester};
use crate::sysmodel::StateSpacePlant;
use crate::Result;

/// Stable state-space realization of one causal summand.
#[derive(Debug, Clone)]
pub struct CausalPart {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl CausalPart {
    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        if self.a.nrows() == 0 {
            return Ok(to_complex(&self.d));
        }
        Ok(to_complex(&self.c) * resolvent_times(z, &self.a, &to_complex(&self.b))?
            + to_complex(&self.d))
    }
}

/// The strictly anticausal summand H_A (z^{-1} I - F_A')^{-1} G_A,
/// optionally carrying the one-step shift used by the strictly-causal
/// path (which makes it anticausal including lag zero).
#[derive(Debug, Clone)]
pub struct AnticausalPart {
    pub h_a: Mat,
    /// F_A stored directly; its transpose appears in the realization.
    pub f_a: Mat,
    pub g_a: Mat,
    pub u1: Mat,
    pub u2: Mat,
    pub u3: Mat,
    pub h_tilde_a: Mat,
    /// When set, the part evaluates as z^{-1} H_A (z^{-1}I - F_A')^{-1} G_A.
    pub shifted: bool,
}

impl AnticausalPart {
    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        let n = self.f_a.nrows();
        let zi = ceye(n) * z.inv() - to_complex(&self.f_a.transpose());
        let v = csolve(&zi, &to_complex(&self.g_a))?;
        let base = to_complex(&self.h_a) * v;
        Ok(if self.shifted { base.map(|c| c * z.inv()) } else { base })
    }

    /// Residuals of the three defining matrix equations, relative.
    pub fn equation_residuals(&self, plant: &StateSpacePlant, fs: &FactorSet) -> (f64, f64, f64) {
        let r1 = {
            let rhs = plant.l.transpose() * solve(&fs.s.r_full, &plant.l).unwrap()
                + fs.s.f_cl.transpose() * &self.u1 * &fs.s.f_cl;
            fro(&(&self.u1 - rhs)) / (1.0 + fro(&self.u1))
        };
        let r2 = {
            let rhs = &plant.g1 * plant.g1.transpose() + &fs.s.f_cl * &self.u2 * fs.w.f_cl.transpose();
            fro(&(&self.u2 - rhs)) / (1.0 + fro(&self.u2))
        };
        let r3 = {
            let rhs = &fs.m.f_e * &self.u3 * self.f_a.transpose() + &fs.m.g_e * &self.h_tilde_a;
            fro(&(&self.u3 - rhs)) / (1.0 + fro(&self.u3))
        };
        (r1, r2, r3)
    }
}

fn common_split_data(plant: &StateSpacePlant, fs: &FactorSet) -> Result<(Mat, Mat, Mat, Mat)> {
    let n = plant.n();
    // U1 = F_S' U1 F_S + L' R_S^{-1} L
    let w1 = sym(&(plant.l.transpose() * solve(&fs.s.r_full, &plant.l)?));
    let u1 = solve_stein(&fs.s.f_cl.transpose(), &w1)?;
    // U2 = F_S U2 F_W' + G1 G1'
    let u2 = solve_sylvester(
        &fs.s.f_cl,
        &fs.w.f_cl.transpose(),
        &(&plant.g1 * plant.g1.transpose()),
    )?;
    // F_A has stable diagonal blocks F_W and F_S
    let gg = &plant.g1 * plant.g1.transpose();
    let f_a = block_matrix(&[
        vec![fs.w.f_cl.clone(), &gg * &u1],
        vec![Mat::zeros(n, n), fs.s.f_cl.clone()],
    ]);
    // G_A = [H' R_W^{-*/2}; 0]
    let g_a = vcat(&[
        &(plant.h.transpose() * fs.w.r_half_inv.transpose()),
        &Mat::zeros(n, plant.p()),
    ]);
    Ok((u1, u2, f_a, g_a))
}

/// Decompose M^{1/2} Q2 W^{-1/2} = C1 + C2 + A with C1, C2 causal (with
/// feedthrough) and A strictly anticausal.
pub fn decompose_x(
    plant: &StateSpacePlant,
    fs: &FactorSet,
) -> Result<(CausalPart, CausalPart, AnticausalPart)> {
    let (u1, u2, f_a, g_a) = common_split_data(plant, fs)?;
    let h_tilde_a = plant.g2.transpose()
        * hcat(&[&(&u1 * &u2), &fs.s.f_cl.transpose()]);
    let u3 = solve_sylvester(&fs.m.f_e, &f_a.transpose(), &(&fs.m.g_e * &h_tilde_a))?;
    let h_a = -(&fs.m.factor.r_half * (&h_tilde_a + &fs.m.factor.k * &u3 * f_a.transpose()));

    let c1 = causal_part_one(plant, fs, &u1, &u2, false);
    let c2 = CausalPart {
        a: fs.m.f_e.clone(),
        b: &fs.m.f_e * &u3 * &g_a,
        c: -(&fs.m.factor.r_half * &fs.m.factor.k),
        d: -(&fs.m.factor.r_half * &fs.m.factor.k * &u3 * &g_a),
    };
    let anti = AnticausalPart {
        h_a,
        f_a,
        g_a,
        u1,
        u2,
        u3,
        h_tilde_a,
        shifted: false,
    };
    Ok((c1, c2, anti))
}

/// Strictly-causal variant: C1, C2 have zero feedthrough and the
/// anticausal part carries the one-step shift (lag zero moves into it).
pub fn decompose_x_strictly_causal(
    plant: &StateSpacePlant,
    fs: &FactorSet,
) -> Result<(CausalPart, CausalPart, AnticausalPart)> {
    let (u1, u2, f_a, g_a) = common_split_data(plant, fs)?;
    let n = plant.n();
    let h_tilde_a = plant.g2.transpose()
        * hcat(&[&(&u1 * &fs.s.f_cl * &u2), &eye(n)]);
    let u3 = solve_sylvester(&fs.m.f_e, &f_a.transpose(), &(&fs.m.g_e * &h_tilde_a))?;
    let h_a = -(&fs.m.factor.r_half * (&h_tilde_a + &fs.m.factor.k * &u3 * f_a.transpose()));

    let c1 = causal_part_one(plant, fs, &u1, &u2, true);
    let c2 = CausalPart {
        a: fs.m.f_e.clone(),
        b: &u3 * &g_a,
        c: -(&fs.m.factor.r_half * &fs.m.factor.k),
        d: Mat::zeros(plant.m(), plant.p()),
    };
    let anti = AnticausalPart {
        h_a,
        f_a,
        g_a,
        u1,
        u2,
        u3,
        h_tilde_a,
        shifted: true,
    };
    Ok((c1, c2, anti))
}

/// C1 = -M^{1/2} * inner, where inner is the F_S-realized middle factor.
/// The strictly-causal variant drops inner's feedthrough term.
fn causal_part_one(
    plant: &StateSpacePlant,
    fs: &FactorSet,
    u1: &Mat,
    u2: &Mat,
    strictly_causal: bool,
) -> CausalPart {
    let rw_inv_adj = fs.w.r_half_inv.transpose(); // R_W^{-*/2}
    let b_in = &fs.s.f_cl * u2 * plant.h.transpose() * &rw_inv_adj;
    let c_in = plant.g2.transpose() * u1 * &fs.s.f_cl;
    let d_in = if strictly_causal {
        Mat::zeros(plant.m(), plant.p())
    } else {
        plant.g2.transpose() * u1 * &fs.s.f_cl * u2 * plant.h.transpose() * &rw_inv_adj
    };
    // series composition: output of inner feeds M^{1/2}; negate the output
    let (a_m, b_m) = (&fs.m.f_e, &fs.m.g_e);
    let c_m = &fs.m.factor.r_half * &fs.m.factor.k;
    let d_m = &fs.m.factor.r_half;
    let n_in = fs.s.f_cl.nrows();
    let n_m = a_m.nrows();
    let a = block_matrix(&[
        vec![fs.s.f_cl.clone(), Mat::zeros(n_in, n_m)],
        vec![b_m * &c_in, a_m.clone()],
    ]);
    let b = vcat(&[&b_in, &(b_m * &d_in)]);
    let c = -hcat(&[&(d_m * &c_in), &c_m]);
    let d = -(d_m * &d_in);
    CausalPart { a, b, c, d }
}

/// Worst relative deviation of C1 + C2 + A from the pointwise product
/// M^{1/2}(z) Q2(z) W^{-1/2}(z) over a unit-circle grid. The product side
/// is evaluated directly from the plant channels, independent of the
/// decomposition algebra.
pub fn decomposition_grid_error(
    plant: &StateSpacePlant,
    fs: &FactorSet,
    c1: &CausalPart,
    c2: &CausalPart,
    anti: &AnticausalPart,
    n_points: usize,
) -> Result<f64> {
    let mut err: f64 = 0.0;
    for k in 0..n_points {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_points as f64;
        let z = Complex64::from_polar(1.0, th);
        let lhs = c1.eval(z)? + c2.eval(z)? + anti.eval(z)?;
        let q2 = crate::evaluation::noncausal_q2_at(plant, th)?;
        let rhs = eval_m_half(&fs.m, z)? * q2 * eval_w_minus_half(plant, &fs.w, z)?;
        err = err.max((lhs - &rhs).norm() / (1.0 + rhs.norm()));
    }
    Ok(err)
}

/// Laurent coefficient of a sampled function at one lag (coefficient of
/// z^{-lag}), via the discrete transform of `samples[j] = f(e^{2 pi i j/N})`.
pub fn laurent_coefficient(samples: &[CMat], lag: i64) -> CMat {
    let n = samples.len();
    let mut acc = CMat::zeros(samples[0].nrows(), samples[0].ncols());
    for (j, s) in samples.iter().enumerate() {
        let th = 2.0 * std::f64::consts::PI * (j as f64) * (lag as f64) / n as f64;
        let w = Complex64::from_polar(1.0, th);
        acc += s.map(|c| c * w);
    }
    acc.map(|c| c / n as f64)
}

/// Largest coefficient magnitude of the causal sum at strictly negative
/// lags and of the anticausal part at non-negative lags, over a +-window.
/// Meaningful when the causal realizations are stable (geometric decay).
pub fn separation_error(
    c1: &CausalPart,
    c2: &CausalPart,
    anti: &AnticausalPart,
    n_points: usize,
    lag_window: i64,
) -> Result<(f64, f64)> {
    let mut causal_samples = Vec::with_capacity(n_points);
    let mut anti_samples = Vec::with_capacity(n_points);
    for j in 0..n_points {
        let th = 2.0 * std::f64::consts::PI * (j as f64) / n_points as f64;
        let z = Complex64::from_polar(1.0, th);
        causal_samples.push(c1.eval(z)? + c2.eval(z)?);
        anti_samples.push(anti.eval(z)?);
    }
    let mut causal_leak: f64 = 0.0;
    let mut anti_leak: f64 = 0.0;
    for lag in 1..=lag_window {
        causal_leak = causal_leak.max(laurent_coefficient(&causal_samples, -lag).norm());
    }
    let anti_low = if anti.shifted { 0 } else { 1 };
    // anticausal support sits at lags <= -anti_low; check lags >= 1 - anti_low
    for lag in (1 - anti_low)..=lag_window {
        anti_leak = anti_leak.max(laurent_coefficient(&anti_samples, lag).norm());
    }
    Ok((causal_leak, anti_leak))
}

/// Convenience: E = C1 + C2 + A must stay finite; quick dimension guard
/// used by synthesis before assembling the controller.
pub fn check_dims(plant: &StateSpacePlant, anti: &AnticausalPart) -> Result<()> {
    let n2 = 2 * plant.n();
    if anti.f_a.nrows() != n2 || anti.g_a.nrows() != n2 || anti.h_a.ncols() != n2 {
        return Err(Error::Dimension("anticausal part has unexpected block sizes".into()));
    }
    Ok(())
}
