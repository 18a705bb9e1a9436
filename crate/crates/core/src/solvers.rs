//! Stabilizing solutions of discrete algebraic Riccati equations and of
//! Stein (discrete Lyapunov) and discrete Sylvester equations.
//!
//! The Riccati path runs a structure-preserving doubling iteration and
//! falls back to value iteration plus a Newton (Kleinman) polish when
//! doubling stalls. Stabilization is always verified a posteriori from
//! the closed-loop eigenvalues, never assumed from the algorithm.

use crate::error::Error;
use crate::linalg::*;
use crate::Result;

const DOUBLING_TOL: f64 = 1e-14;
const MAX_DOUBLINGS: usize = 200;
const RESIDUAL_BOUND: f64 = 1e-9;

/// Stabilizing Riccati solution together with the quantities every
/// factorization needs: the gain, the innovation Gram matrix and the
/// closed-loop matrix.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Symmetric solution matrix.
    pub p: Mat,
    /// Gain K_P. Control form: K_P = (R + G'PG)^{-1} G'PF (maps states to
    /// inputs). Filter form: K_P = F P H' (R + H P H')^{-1}.
    pub gain: Mat,
    /// R_P = R + G'PG (control) or R + H P H' (filter).
    pub r: Mat,
    /// Closed-loop matrix F - G K_P (control) or F - K_P H (filter).
    pub f_cl: Mat,
    /// Relative Frobenius residual of the Riccati equation.
    pub residual: f64,
    pub closed_loop_spectral_radius: f64,
}

fn check_square(m: &Mat, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{name} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn require_pd(r: &Mat, context: &str) -> Result<()> {
    let min = min_sym_eig(r);
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: context.to_string(),
            min_eig: min,
        });
    }
    Ok(())
}

/// Control-form DARE residual: P - (F'PF + Q - F'PG (R+G'PG)^{-1} G'PF).
fn control_residual(f: &Mat, g: &Mat, q: &Mat, r: &Mat, p: &Mat) -> Result<f64> {
    let rp = r + g.transpose() * p * g;
    let k = solve(&rp, &(g.transpose() * p * f))?;
    let rhs = f.transpose() * p * f + q - f.transpose() * p * g * k;
    Ok(fro(&(p - rhs)) / (1.0 + fro(p)))
}

/// Closest-to-unit-circle eigenvalue of the symplectic pencil, used only
/// to label infeasibility errors. Returns None when the pencil cannot be
/// reduced to a standard eigenproblem.
fn pencil_witness(f: &Mat, g_gram: &Mat, q: &Mat) -> Option<(f64, f64, f64)> {
    let n = f.nrows();
    // pencil L - z M with L = [[F, 0], [-Q, I]], M = [[I, G], [0, F']]
    let l = block_matrix(&[
        vec![f.clone(), Mat::zeros(n, n)],
        vec![-q.clone(), eye(n)],
    ]);
    let m = block_matrix(&[
        vec![eye(n), g_gram.clone()],
        vec![Mat::zeros(n, n), f.transpose()],
    ]);
    let mi = inv(&m).ok()?;
    let eigs = eigenvalues(&(mi * l)).ok()?;
    eigs.into_iter()
        .map(|e| (e.re, e.im, (e.norm() - 1.0).abs()))
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
}

fn finish_control(f: &Mat, g: &Mat, q: &Mat, r: &Mat, p: Mat) -> Result<RiccatiSolution> {
    let p = sym(&p);
    let rp = sym(&(r + g.transpose() * &p * g));
    require_pd(&rp, "R + G'PG in Riccati solution")?;
    let k = solve(&rp, &(g.transpose() * &p * f))?;
    let f_cl = f - g * &k;
    let rho = spectral_radius(&f_cl)?;
    let residual = control_residual(f, g, q, r, &p)?;
    if rho >= 1.0 {
        let w = pencil_witness(f, &(g * solve(r, &g.transpose())?), q);
        let (re, im, dist) = w.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        return Err(Error::NoStabilizingSolution {
            eig_re: re,
            eig_im: im,
            dist,
        });
    }
    if residual > RESIDUAL_BOUND {
        return Err(Error::NonConvergence {
            context: "riccati residual above bound".into(),
            residual,
        });
    }
    Ok(RiccatiSolution {
        closed_loop_spectral_radius: rho,
        p,
        gain: k,
        r: rp,
        f_cl,
        residual,
    })
}

fn sda_control(f: &Mat, g: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    let n = f.nrows();
    let mut ak = f.clone();
    let mut gk = g * solve(r, &g.transpose())?;
    let mut pk = q.clone();
    for _ in 0..MAX_DOUBLINGS {
        let w = eye(n) + &gk * &pk;
        let lu = w.lu();
        let x_a = lu
            .solve(&ak)
            .ok_or_else(|| Error::NoSolution("singular doubling step".into()))?;
        let x_g = lu
            .solve(&gk)
            .ok_or_else(|| Error::NoSolution("singular doubling step".into()))?;
        let a_next = &ak * &x_a;
        let g_next = sym(&(&gk + &ak * x_g * ak.transpose()));
        let p_next = sym(&(&pk + ak.transpose() * &pk * &x_a));
        if !p_next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence {
                context: "doubling produced non-finite iterate".into(),
                residual: f64::NAN,
            });
        }
        let inc = fro(&(&p_next - &pk));
        ak = a_next;
        gk = g_next;
        pk = p_next;
        if inc <= DOUBLING_TOL * (1.0 + fro(&pk)) {
            return Ok(pk);
        }
    }
    Err(Error::NonConvergence {
        context: "doubling iteration cap reached".into(),
        residual: fro(&pk),
    })
}

fn value_iteration_control(f: &Mat, g: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    let mut p = q.clone();
    for _ in 0..50_000 {
        let rp = r + g.transpose() * &p * g;
        let k = solve(&rp, &(g.transpose() * &p * f))?;
        let pn = sym(&(f.transpose() * &p * f + q - f.transpose() * &p * g * k));
        let inc = fro(&(&pn - &p));
        p = pn;
        if inc <= 1e-12 * (1.0 + fro(&p)) {
            return Ok(p);
        }
        if !p.iter().all(|v| v.is_finite()) || fro(&p) > 1e14 {
            break;
        }
    }
    Err(Error::NonConvergence {
        context: "riccati value iteration".into(),
        residual: f64::NAN,
    })
}

fn newton_polish_control(f: &Mat, g: &Mat, q: &Mat, r: &Mat, p0: Mat) -> Result<Mat> {
    let mut p = p0;
    for _ in 0..50 {
        let rp = r + g.transpose() * &p * g;
        let k = solve(&rp, &(g.transpose() * &p * f))?;
        let f_cl = f - g * &k;
        if spectral_radius(&f_cl)? >= 1.0 {
            return Ok(p); // leave verification to the caller
        }
        // P = F_cl' P F_cl + Q + K'RK   (Stein equation in the closed loop)
        let w = sym(&(q + k.transpose() * r * &k));
        let pn = solve_stein(&f_cl.transpose(), &w)?;
        let inc = fro(&(&pn - &p));
        p = pn;
        if inc <= 1e-14 * (1.0 + fro(&p)) {
            break;
        }
    }
    Ok(p)
}

/// Stabilizing solution of the control-form DARE
/// P = F'PF + Q - K'R_P K with K = R_P^{-1} G'PF, R_P = R + G'PG.
///
/// `q` is the quadratic cost term (H'H), `r` must be positive definite.
pub fn solve_dare_control(f: &Mat, g: &Mat, q: &Mat, r: &Mat) -> Result<RiccatiSolution> {
    check_square(f, "F")?;
    check_square(q, "Q")?;
    check_square(r, "R")?;
    if g.nrows() != f.nrows() || g.ncols() != r.nrows() || q.nrows() != f.nrows() {
        return Err(Error::Dimension("DARE operand shapes inconsistent".into()));
    }
    require_pd(r, "DARE weight R")?;
    match sda_control(f, g, q, r).and_then(|p| finish_control(f, g, q, r, p)) {
        Ok(sol) => Ok(sol),
        Err(first) => {
            let p = value_iteration_control(f, g, q, r)
                .and_then(|p| newton_polish_control(f, g, q, r, p))
                .map_err(|_| first)?;
            finish_control(f, g, q, r, p)
        }
    }
}

/// Stabilizing solution of the filter-form DARE
/// P = F P F' + sign * Q - K R_P K' with K = F P H' R_P^{-1}, R_P = R + H P H'.
///
/// `q` is the noise Gram term (G G'). `sign = -1` selects the indefinite
/// variant in which the noise term is subtracted; there the solution is
/// typically negative semidefinite and R_P staying positive definite is a
/// feasibility condition, reported as an infeasibility error when violated.
pub fn solve_dare_filter(f: &Mat, h: &Mat, q: &Mat, r: &Mat, sign: i32) -> Result<RiccatiSolution> {
    check_square(f, "F")?;
    check_square(q, "Q")?;
    check_square(r, "R")?;
    if h.ncols() != f.nrows() || h.nrows() != r.nrows() {
        return Err(Error::Dimension("filter DARE operand shapes inconsistent".into()));
    }
    require_pd(r, "filter DARE weight R")?;
    match sign {
        1 => {
            // transpose duality with the control form
            let sol = solve_dare_control(&f.transpose(), &h.transpose(), q, r)?;
            let k = f * &sol.p * h.transpose();
            let k = solve(&sol.r.transpose(), &k.transpose())?.transpose();
            let f_cl = f - &k * h;
            let rho = spectral_radius(&f_cl)?;
            Ok(RiccatiSolution {
                p: sol.p,
                gain: k,
                r: sol.r,
                f_cl,
                residual: sol.residual,
                closed_loop_spectral_radius: rho,
            })
        }
        -1 => solve_dare_filter_indefinite(f, h, q, r),
        _ => Err(Error::Dimension("sign must be +1 or -1".into())),
    }
}

/// Newton iteration for the indefinite filter DARE
/// P = F P F' - Q - K R_P K'. Starts from the zero gain, which is
/// stabilizing whenever F itself is stable (true for every use in this
/// crate: the iteration runs on an already-closed loop).
fn solve_dare_filter_indefinite(f: &Mat, h: &Mat, q: &Mat, r: &Mat) -> Result<RiccatiSolution> {
    let n = f.nrows();
    let mut k = Mat::zeros(n, h.nrows());
    if spectral_radius(f)? >= 1.0 {
        return Err(Error::NoStabilizingSolution {
            eig_re: f64::NAN,
            eig_im: f64::NAN,
            dist: f64::NAN,
        });
    }
    let mut p = Mat::zeros(n, n);
    for _ in 0..200 {
        let f_cl = f - &k * h;
        // P = F_cl P F_cl' - Q + K R K'
        let w = sym(&(-q + &k * r * k.transpose()));
        p = solve_stein(&f_cl, &w)?;
        let rp = sym(&(r + h * &p * h.transpose()));
        require_pd(&rp, "R_P in indefinite filter DARE")?;
        let kn = solve(&rp.transpose(), &(h * &p * f.transpose()))?.transpose();
        let inc = fro(&(&kn - &k));
        k = kn;
        if inc <= 1e-14 * (1.0 + fro(&k)) {
            break;
        }
    }
    let rp = sym(&(r + h * &p * h.transpose()));
    require_pd(&rp, "R_P in indefinite filter DARE")?;
    let f_cl = f - &k * h;
    let rho = spectral_radius(&f_cl)?;
    let rhs = f * &p * f.transpose() - q - &k * &rp * k.transpose();
    let residual = fro(&(&p - rhs)) / (1.0 + fro(&p));
    if rho >= 1.0 {
        return Err(Error::NoStabilizingSolution {
            eig_re: f64::NAN,
            eig_im: f64::NAN,
            dist: f64::NAN,
        });
    }
    if residual > RESIDUAL_BOUND {
        return Err(Error::NonConvergence {
            context: "indefinite filter DARE residual".into(),
            residual,
        });
    }
    Ok(RiccatiSolution {
        p,
        gain: k,
        r: rp,
        f_cl,
        residual,
        closed_loop_spectral_radius: rho,
    })
}

const KRON_DIM_LIMIT: usize = 40;

/// Unique solution of the Stein equation X = A X A' + W.
///
/// Requires a spectral radius of A below one; the result is symmetric
/// whenever W is.
pub fn solve_stein(a: &Mat, w: &Mat) -> Result<Mat> {
    check_square(a, "A")?;
    check_square(w, "W")?;
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::NoSolution(format!(
            "stein equation needs spectral radius below one, got {rho:.6}"
        )));
    }
    let x = solve_sylvester_unchecked(a, &a.transpose(), w)?;
    Ok(if (w - sym(w)).norm() < 1e-13 * (1.0 + w.norm()) {
        sym(&x)
    } else {
        x
    })
}

/// Unique solution of X = A X B + C. Solvable whenever no product of an
/// eigenvalue of A with an eigenvalue of B equals one; this admits the
/// mixed case where one factor is expansive and the other contractive.
pub fn solve_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    if c.nrows() != a.nrows() || c.ncols() != b.ncols() {
        return Err(Error::Dimension("sylvester C shape inconsistent".into()));
    }
    let ea = eigenvalues(a)?;
    let eb = eigenvalues(b)?;
    let mut min_gap = f64::INFINITY;
    for la in &ea {
        for lb in &eb {
            min_gap = min_gap.min((1.0 - la * lb).norm());
        }
    }
    if min_gap <= 1e-12 {
        let ra = ea.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let rb = eb.iter().map(|l| l.norm()).fold(0.0, f64::max);
        return Err(Error::NoSolution(format!(
            "sylvester spectra resonate (gap {min_gap:.2e}, spectral radii {ra:.4} and {rb:.4})"
        )));
    }
    solve_sylvester_unchecked(a, b, c)
}

fn solve_sylvester_unchecked(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    let (na, nb) = (a.nrows(), b.nrows());
    if na.max(nb) <= KRON_DIM_LIMIT {
        // vec(X) = (I - B' (x) A)^{-1} vec(C), column-major vectorization
        let m = eye(na * nb) - b.transpose().kronecker(a);
        let cvec = Mat::from_column_slice(na * nb, 1, c.as_slice());
        let xvec = solve(&m, &cvec)?;
        Ok(Mat::from_column_slice(na, nb, xvec.as_slice()))
    } else {
        // iterated squaring; valid only in the contractive regime
        let (ra, rb) = (spectral_radius(a)?, spectral_radius(b)?);
        if ra * rb >= 1.0 {
            return Err(Error::NoSolution(format!(
                "sylvester squaring needs contractive spectra, product {:.4}",
                ra * rb
            )));
        }
        let mut x = c.clone();
        let mut ak = a.clone();
        let mut bk = b.clone();
        for _ in 0..200 {
            let inc = &ak * &x * &bk;
            let done = fro(&inc) <= 1e-16 * (1.0 + fro(&x));
            x += inc;
            if done {
                break;
            }
            ak = &ak * &ak;
            bk = &bk * &bk;
        }
        Ok(x)
    }
}

/// Stabilizing solution of the two-input game DARE
/// M = S + F'MF - F'M [G2 G1] Rm^{-1} [G2 G1]' MF with
/// Rm = [[I + G2'MG2, G2'MG1], [G1'MG2, G1'MG1 - d^2 I]].
///
/// Value iteration with a saddle-condition check each step, then a Newton
/// polish. Returns an infeasibility error when the level `delta` is not
/// achievable.
pub(crate) fn solve_game_dare(
    f: &Mat,
    g2: &Mat,
    g1: &Mat,
    s: &Mat,
    delta: f64,
) -> Result<RiccatiSolution> {
    let n = f.nrows();
    let m = g2.ncols();
    let nw = g1.ncols();
    let d2 = delta * delta;
    let g = hcat(&[g2, g1]);
    let infeasible = |reason: &str| Error::GammaInfeasible {
        gamma: delta,
        reason: reason.to_string(),
    };
    let r_tilde = {
        let mut r = eye(m + nw);
        for i in m..m + nw {
            r[(i, i)] = -d2;
        }
        r
    };
    let step = |mm: &Mat| -> Result<(Mat, Mat)> {
        let ru = eye(m) + g2.transpose() * mm * g2;
        let cross = g2.transpose() * mm * g1;
        let sc = g1.transpose() * mm * g1 - d2 * eye(nw) - cross.transpose() * solve(&ru, &cross)?;
        if sym_eigenvalues(&sc).last().copied().unwrap_or(0.0) >= 0.0 {
            return Err(infeasible("saddle condition failed in game DARE"));
        }
        let rm = &r_tilde + g.transpose() * mm * &g;
        let k = solve(&rm, &(g.transpose() * mm * f))?;
        let mn = sym(&(s + f.transpose() * mm * f - f.transpose() * mm * &g * &k));
        Ok((mn, k))
    };
    let mut mm = Mat::zeros(n, n);
    let mut k = Mat::zeros(m + nw, n);
    for it in 0..20_000 {
        let (mn, kn) = step(&mm)?;
        if !mn.iter().all(|v| v.is_finite()) || fro(&mn) > 1e13 {
            return Err(infeasible("game DARE iteration diverged"));
        }
        let inc = fro(&(&mn - &mm));
        mm = mn;
        k = kn;
        if inc <= 1e-12 * (1.0 + fro(&mm)) && it > 3 {
            break;
        }
        if it == 19_999 {
            return Err(infeasible("game DARE iteration did not converge"));
        }
    }
    // Newton polish on the gain
    for _ in 0..40 {
        let f_cl = f - &g * &k;
        if spectral_radius(&f_cl)? >= 1.0 {
            break;
        }
        let w = sym(&(s + k.transpose() * &r_tilde * &k));
        let mn = solve_stein(&f_cl.transpose(), &w)?;
        let (m_chk, kn) = step(&mn)?;
        let inc = fro(&(&m_chk - &mm));
        mm = m_chk;
        k = kn;
        if inc <= 1e-14 * (1.0 + fro(&mm)) {
            break;
        }
    }
    let rm = &r_tilde + g.transpose() * &mm * &g;
    let f_cl = f - &g * &k;
    let rho = spectral_radius(&f_cl)?;
    if rho >= 1.0 {
        return Err(infeasible("game DARE closed loop not stable"));
    }
    let rhs = s + f.transpose() * &mm * f - f.transpose() * &mm * &g * &k;
    let residual = fro(&(&mm - rhs)) / (1.0 + fro(&mm));
    if residual > 1e-8 {
        return Err(Error::NonConvergence {
            context: "game DARE residual".into(),
            residual,
        });
    }
    Ok(RiccatiSolution {
        p: mm,
        gain: k,
        r: rm,
        f_cl,
        residual,
        closed_loop_spectral_radius: rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn dare_control_zero_cost() {
        let sol = solve_dare_control(&m1(0.5), &m1(1.0), &m1(0.0), &m1(1.0)).unwrap();
        assert!(sol.p[(0, 0)].abs() < 1e-14);
        assert!(sol.gain[(0, 0)].abs() < 1e-14);
        assert!((sol.r[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dare_control_scalar_quadratic_root() {
        // p^2 - 0.25 p - 1 = 0, positive root
        let expected = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        let sol = solve_dare_control(&m1(0.5), &m1(1.0), &m1(1.0), &m1(1.0)).unwrap();
        assert!((sol.p[(0, 0)] - expected).abs() < 1e-12);
        // cross-check with the fixed-point iteration p <- 0.25p + 1 - (0.5p)^2/(1+p)
        let mut p = 0.0f64;
        for _ in 0..2000 {
            p = 0.25 * p + 1.0 - (0.5 * p) * (0.5 * p) / (1.0 + p);
        }
        assert!((sol.p[(0, 0)] - p).abs() < 1e-10);
        assert!(sol.residual <= 1e-9);
        assert!(sol.closed_loop_spectral_radius < 1.0);
    }

    #[test]
    fn dare_control_one_step() {
        // f = 0 makes the equation one-step: p = h^2
        let sol = solve_dare_control(&m1(0.0), &m1(1.0), &m1(4.0), &m1(1.0)).unwrap();
        assert!((sol.p[(0, 0)] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn dare_filter_duality_and_noise_free() {
        let sol = solve_dare_filter(&m1(0.5), &m1(1.0), &m1(0.0), &m1(1.0), 1).unwrap();
        assert!(sol.p[(0, 0)].abs() < 1e-14);
        let expected = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        let sol = solve_dare_filter(&m1(0.5), &m1(1.0), &m1(1.0), &m1(1.0), 1).unwrap();
        assert!((sol.p[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn dare_filter_indefinite_scalar() {
        // p = 0.25 p - 0.01 - (0.5 p)^2 / (1 + p), stable f so Newton from zero
        let sol = solve_dare_filter(&m1(0.5), &m1(1.0), &m1(0.01), &m1(1.0), -1).unwrap();
        let p = sol.p[(0, 0)];
        assert!(p < 0.0);
        let resid = 0.25 * p - 0.01 - (0.5 * p) * (0.5 * p) / (1.0 + p) - p;
        assert!(resid.abs() < 1e-12);
        assert!(sol.r[(0, 0)] > 0.0);
    }

    #[test]
    fn stein_scalar_and_diagonal() {
        let x = solve_stein(&m1(0.0), &m1(7.0)).unwrap();
        assert!((x[(0, 0)] - 7.0).abs() < 1e-14);
        let x = solve_stein(&m1(0.5), &m1(1.0)).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-13);
        let a = Mat::from_diagonal(&Vec64::from_vec(vec![0.5, 0.2]));
        let x = solve_stein(&a, &eye(2)).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-13);
        assert!((x[(1, 1)] - 25.0 / 24.0).abs() < 1e-13);
    }

    #[test]
    fn stein_rejects_unstable() {
        assert!(matches!(
            solve_stein(&m1(1.0), &m1(1.0)),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn sylvester_scalar_and_rectangular() {
        let x = solve_sylvester(&m1(0.0), &m1(0.7), &m1(3.0)).unwrap();
        assert!((x[(0, 0)] - 3.0).abs() < 1e-14);
        let x = solve_sylvester(&m1(0.5), &m1(0.4), &m1(1.0)).unwrap();
        assert!((x[(0, 0)] - 1.25).abs() < 1e-13);
        // diagonal decoupling: X_ij = C_ij / (1 - A_ii B_jj)
        let a = Mat::from_diagonal(&Vec64::from_vec(vec![0.5, -0.3]));
        let b = Mat::from_element(1, 1, 0.8);
        let c = Mat::from_row_slice(2, 1, &[1.0, 2.0]);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((x[(0, 0)] - 1.0 / (1.0 - 0.4)).abs() < 1e-13);
        assert!((x[(1, 0)] - 2.0 / (1.0 + 0.24)).abs() < 1e-13);
    }

    #[test]
    fn sylvester_mixed_spectra_solves_nonresonant() {
        // expansive left factor, contractive right factor
        let a = m1(1.5);
        let b = m1(0.5);
        let x = solve_sylvester(&a, &b, &m1(1.0)).unwrap();
        assert!((x[(0, 0)] - 1.0 / (1.0 - 0.75)).abs() < 1e-12);
        assert!(matches!(
            solve_sylvester(&m1(2.0), &m1(0.5), &m1(1.0)),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn stein_matches_truncated_series() {
        let a = Mat::from_row_slice(2, 2, &[0.4, 0.2, -0.1, 0.3]);
        let w = sym(&Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]));
        let x = solve_stein(&a, &w).unwrap();
        let mut acc = Mat::zeros(2, 2);
        let mut term = w.clone();
        let mut ak = eye(2);
        for _ in 0..120 {
            acc += &term;
            ak = &ak * &a;
            term = &ak * &w * ak.transpose();
        }
        assert!((x - acc).norm() < 1e-8);
    }

    #[test]
    fn game_dare_reduces_to_lqr_for_large_level() {
        let f = Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
        let g2 = Mat::from_row_slice(2, 1, &[1.0, 0.5]);
        let g1 = eye(2);
        let s = eye(2);
        let game = solve_game_dare(&f, &g2, &g1, &s, 1e6).unwrap();
        let lqr = solve_dare_control(&f, &g2, &s, &eye(1)).unwrap();
        assert!((&game.p - &lqr.p).norm() / lqr.p.norm() < 1e-6);
    }
}
