//! Closed-form solution of the Nehari problem: the best causal (or
//! strictly causal) approximation of a strictly anticausal transfer
//! matrix in the operator norm. The optimal error equals the Hankel
//! norm sqrt(rho(Z Pi)) of the two Gramians; feasibility of a regret
//! level is the predicate "Hankel norm at most one", so infeasibility
//! here is a value, not an error.
//!
//! The gain formula is the central solution of the level-constrained
//! problem; evaluating it at the level equal to the Hankel norm (the
//! Gramian Z enters scaled by the squared level) yields the optimal
//! approximant, whose error is constant-modulus across frequency.

use num_complex::Complex64;

use crate::decomposition::{AnticausalPart, CausalPart};
use crate::error::Error;
use crate::linalg::*;
use crate::solvers::solve_stein;
use crate::Result;

/// Gramians, gain and realization of the best causal approximant.
#[derive(Debug, Clone)]
pub struct NehariSolution {
    /// Observability-side Gramian Z = F_A Z F_A' + H_A' H_A.
    pub z: Mat,
    /// Controllability-side Gramian Pi = F_A' Pi F_A + G_A G_A'.
    pub pi: Mat,
    pub k_n: Mat,
    pub f_n: Mat,
    pub c_n: CausalPart,
    /// sqrt of the spectral radius of Z Pi; feasible iff at most one.
    pub hankel_norm: f64,
    /// Residuals of the two Gramian equations, relative.
    pub gramian_residuals: (f64, f64),
    pub strictly_causal: bool,
}

impl NehariSolution {
    pub fn feasible(&self) -> bool {
        self.hankel_norm <= 1.0
    }
}

fn gramians(anti: &AnticausalPart) -> Result<(Mat, Mat, f64, (f64, f64))> {
    let z = solve_stein(&anti.f_a, &sym(&(anti.h_a.transpose() * &anti.h_a)))?;
    let pi = solve_stein(&anti.f_a.transpose(), &sym(&(&anti.g_a * anti.g_a.transpose())))?;
    let hank_sq = eigenvalues(&(&z * &pi))?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    let rz = {
        let rhs = &anti.f_a * &z * anti.f_a.transpose() + anti.h_a.transpose() * &anti.h_a;
        fro(&(&z - rhs)) / (1.0 + fro(&z))
    };
    let rpi = {
        let rhs = anti.f_a.transpose() * &pi * &anti.f_a + &anti.g_a * anti.g_a.transpose();
        fro(&(&pi - rhs)) / (1.0 + fro(&pi))
    };
    Ok((z, pi, hank_sq.sqrt(), (rz, rpi)))
}

fn gains(anti: &AnticausalPart, z: &Mat, pi: &Mat, hankel: f64) -> Result<(Mat, Mat)> {
    let dim = anti.f_a.nrows();
    if hankel < 1e-14 {
        return Ok((Mat::zeros(dim, anti.g_a.ncols()), anti.f_a.clone()));
    }
    let z_scaled = z / (hankel * hankel);
    let lhs = eye(dim) - &anti.f_a * &z_scaled * anti.f_a.transpose() * pi;
    let k_n = lhs
        .lu()
        .solve(&(&anti.f_a * &z_scaled * &anti.g_a))
        .ok_or_else(|| Error::Degenerate("singular gain system in Nehari solution".into()))?;
    let f_n = &anti.f_a - &k_n * anti.g_a.transpose();
    Ok((k_n, f_n))
}

/// Best causal approximation of a strictly anticausal part.
pub fn solve_nehari(anti: &AnticausalPart) -> Result<NehariSolution> {
    if anti.shifted {
        return Err(Error::Dimension(
            "shifted anticausal part requires the strictly-causal solver".into(),
        ));
    }
    if spectral_radius(&anti.f_a)? >= 1.0 {
        return Err(Error::NoSolution("anticausal part must have stable F_A".into()));
    }
    let (z, pi, hankel, res) = gramians(anti)?;
    let (k_n, f_n) = gains(anti, &z, &pi, hankel)?;
    let h_pi = &anti.h_a * &pi;
    let c_n = CausalPart {
        a: f_n.clone(),
        b: k_n.clone(),
        c: &h_pi * &f_n,
        d: &h_pi * &k_n,
    };
    Ok(NehariSolution {
        z,
        pi,
        k_n,
        f_n,
        c_n,
        hankel_norm: hankel,
        gramian_residuals: res,
        strictly_causal: false,
    })
}

/// Best strictly causal approximation of a shifted anticausal part
/// (anticausal including lag zero). Reduces to the causal problem after
/// multiplying both sides by z; the resulting approximant has no
/// feedthrough by construction.
pub fn solve_nehari_strictly_causal(anti: &AnticausalPart) -> Result<NehariSolution> {
    if !anti.shifted {
        return Err(Error::Dimension(
            "unshifted anticausal part requires the causal solver".into(),
        ));
    }
    if spectral_radius(&anti.f_a)? >= 1.0 {
        return Err(Error::NoSolution("anticausal part must have stable F_A".into()));
    }
    let (z, pi, hankel, res) = gramians(anti)?;
    let (k_n, f_n) = gains(anti, &z, &pi, hankel)?;
    let c_n = CausalPart {
        a: f_n.clone(),
        b: k_n.clone(),
        c: &anti.h_a * &pi,
        d: Mat::zeros(anti.h_a.nrows(), anti.g_a.ncols()),
    };
    Ok(NehariSolution {
        z,
        pi,
        k_n,
        f_n,
        c_n,
        hankel_norm: hankel,
        gramian_residuals: res,
        strictly_causal: true,
    })
}

/// sup over the unit circle of sigma_max(C_N(z) - A(z)), on a uniform
/// grid refined by golden-section search around the grid maximizer.
pub fn approximation_sup_error(
    anti: &AnticausalPart,
    sol: &NehariSolution,
    n_points: usize,
) -> Result<f64> {
    let err_at = |th: f64| -> Result<f64> {
        let z = Complex64::from_polar(1.0, th);
        Ok(sigma_max(&(sol.c_n.eval(z)? - anti.eval(z)?)))
    };
    let mut best = 0.0f64;
    let mut best_k = 0usize;
    for k in 0..n_points {
        let th = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
        let e = err_at(th)?;
        if e > best {
            best = e;
            best_k = k;
        }
    }
    let step = 2.0 * std::f64::consts::PI / n_points as f64;
    let (mut a, mut b) = (
        (best_k as f64 - 1.0) * step,
        (best_k as f64 + 1.0) * step,
    );
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = err_at(c)?;
    let mut fd = err_at(d)?;
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = err_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = err_at(d)?;
        }
    }
    Ok(best.max(fc).max(fd))
}
