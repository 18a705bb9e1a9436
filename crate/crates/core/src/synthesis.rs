//! Controller synthesis: assembly of the regret-optimal controller state
//! space (causal and strictly-causal), bisection on the regret level,
//! Youla/feedback conversions, and the H2 (LQG) and central H-infinity
//! baselines used for comparison.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decomposition::{
    decompose_x, decompose_x_strictly_causal, AnticausalPart, CausalPart,
};
use crate::error::Error;
use crate::evaluation::{operator_norm_sq, FrequencyGrid};
use crate::factorization::{
    eval_m_minus_half, eval_w_half, factorize_all, FactorSet,
};
use crate::linalg::*;
use crate::nehari::{solve_nehari, solve_nehari_strictly_causal, NehariSolution};
use crate::solvers::{solve_dare_control, solve_dare_filter, solve_game_dare};
use crate::sysmodel::{validate_assumptions, StateSpacePlant};
use crate::Result;

pub const GAMMA_FLOOR: f64 = 1e-12;
pub const DEFAULT_GAMMA_TOL: f64 = 1e-4;
const BISECTION_CAP: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerKind {
    #[serde(rename = "ro")]
    RoCausal,
    #[serde(rename = "ro-sc")]
    RoStrictlyCausal,
    #[serde(rename = "h2")]
    H2,
    #[serde(rename = "hinf")]
    Hinf,
    #[serde(rename = "youla")]
    Youla,
}

/// Whether a realization maps the open-loop measurement to the input
/// (a Youla parameter) or closes the loop on the raw measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealizationForm {
    YoulaParameter,
    Feedback,
}

/// Discrete LTI controller realization.
#[derive(Debug, Clone)]
pub struct ControllerRealization {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub kind: ControllerKind,
    pub gamma: Option<f64>,
    pub form: RealizationForm,
}

impl ControllerRealization {
    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        if self.a.nrows() == 0 {
            return Ok(to_complex(&self.d));
        }
        Ok(to_complex(&self.c) * resolvent_times(z, &self.a, &to_complex(&self.b))?
            + to_complex(&self.d))
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    /// Measurement dimension.
    pub fn n_inputs(&self) -> usize {
        self.d.ncols()
    }
    /// Control dimension.
    pub fn n_outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_strictly_causal(&self) -> bool {
        self.d.iter().all(|v| *v == 0.0)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        if self.a.nrows() == 0 {
            return Ok(0.0);
        }
        spectral_radius(&self.a)
    }

    fn zero(plant: &StateSpacePlant, kind: ControllerKind, form: RealizationForm) -> Self {
        Self {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, plant.p()),
            c: Mat::zeros(plant.m(), 0),
            d: Mat::zeros(plant.m(), plant.p()),
            kind,
            gamma: None,
            form,
        }
    }
}

/// Everything the bisection and the assembly share for one level.
pub struct SynthesisChain {
    pub factors: FactorSet,
    pub c1: CausalPart,
    pub c2: CausalPart,
    pub anti: AnticausalPart,
    pub nehari: NehariSolution,
    pub strictly_causal: bool,
}

/// Per-synthesis numerical evidence: matrix-equation residuals and
/// closed-loop spectral radii.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub equation_residuals: Vec<(String, f64)>,
    pub closed_loop_radii: Vec<(String, f64)>,
    pub hankel_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub controller: ControllerRealization,
    pub gamma: f64,
    pub gamma_squared: f64,
    pub diagnostics: Diagnostics,
    /// 1 - hankel_norm at the returned level.
    pub feasibility_margin: f64,
}

/// Run the full factorize/decompose/Nehari chain at one level.
pub fn build_chain(
    plant: &StateSpacePlant,
    gamma: f64,
    strictly_causal: bool,
) -> Result<SynthesisChain> {
    let factors = factorize_all(plant, gamma)?;
    let (c1, c2, anti) = if strictly_causal {
        decompose_x_strictly_causal(plant, &factors)?
    } else {
        decompose_x(plant, &factors)?
    };
    let nehari = if strictly_causal {
        solve_nehari_strictly_causal(&anti)?
    } else {
        solve_nehari(&anti)?
    };
    Ok(SynthesisChain {
        factors,
        c1,
        c2,
        anti,
        nehari,
        strictly_causal,
    })
}

fn collect_diagnostics(plant: &StateSpacePlant, chain: &SynthesisChain) -> Diagnostics {
    let fs = &chain.factors;
    let (r1, r2, r3) = chain.anti.equation_residuals(plant, fs);
    let (gz, gpi) = chain.nehari.gramian_residuals;
    let rho = |m: &Mat| spectral_radius(m).unwrap_or(f64::NAN);
    Diagnostics {
        equation_residuals: vec![
            ("riccati_W".into(), fs.w.residual),
            ("riccati_S".into(), fs.s.residual),
            ("riccati_Gamma".into(), fs.gam.residual),
            ("riccati_Nabla".into(), fs.nabla.residual),
            ("riccati_M".into(), fs.m.factor.residual),
            ("stein_U1".into(), r1),
            ("sylvester_U2".into(), r2),
            ("sylvester_U3".into(), r3),
            ("gramian_Z".into(), gz),
            ("gramian_Pi".into(), gpi),
        ],
        closed_loop_radii: vec![
            ("F_W".into(), rho(&fs.w.f_cl)),
            ("F_S".into(), rho(&fs.s.f_cl)),
            ("F_Gamma".into(), rho(&fs.gam.f_cl)),
            ("F_Nabla".into(), rho(&fs.nabla.f_cl)),
            ("F_M".into(), rho(&fs.m.factor.f_cl)),
            ("F_N".into(), rho(&chain.nehari.f_n)),
        ],
        hankel_norm: chain.nehari.hankel_norm,
    }
}

/// Assemble the causal regret-optimal controller from a feasible chain.
/// State ordering: (F_W, F_N, F_M, F_S) blocks.
fn assemble_ro_causal(plant: &StateSpacePlant, chain: &SynthesisChain) -> Result<ControllerRealization> {
    let fs = &chain.factors;
    let neh = &chain.nehari;
    let anti = &chain.anti;
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let n2 = 2 * n;
    let h = &plant.h;
    let rw_hi = &fs.w.r_half_inv; // R_W^{-1/2}
    let rw_inv = inv(&fs.w.r_full)?;
    let rm_hi = &fs.m.factor.r_half_inv; // R_M^{-1/2}
    let h_pi = &anti.h_a * &neh.pi;
    let k_m = &fs.m.factor.k;
    let g_e = &fs.m.g_e;

    let a = block_matrix(&[
        vec![
            fs.w.f_cl.clone(),
            Mat::zeros(n, n2),
            Mat::zeros(n, n2),
            Mat::zeros(n, n),
        ],
        vec![
            -(&neh.k_n * rw_hi * h),
            neh.f_n.clone(),
            Mat::zeros(n2, n2),
            Mat::zeros(n2, n),
        ],
        vec![
            -(&anti.u3 * &anti.g_a * rw_hi * h),
            g_e * rm_hi * &h_pi,
            fs.m.factor.f_cl.clone(),
            Mat::zeros(n2, n),
        ],
        vec![
            -(&anti.u2 * h.transpose() * &rw_inv * h),
            Mat::zeros(n, n2),
            Mat::zeros(n, n2),
            fs.s.f_cl.clone(),
        ],
    ]);
    let b_col = vcat(&[
        &fs.w.k,
        &(&neh.k_n * rw_hi),
        &(&anti.u3 * &anti.g_a * rw_hi),
        &(&anti.u2 * h.transpose() * &rw_inv),
    ]);
    let c_row = hcat(&[
        &Mat::zeros(m, n),
        &(rm_hi * &h_pi),
        &(-k_m),
        &(-(plant.g2.transpose() * &anti.u1 * &fs.s.f_cl)),
    ]);
    let b = &a * &b_col;
    let d = &c_row * &b_col;
    let ctrl = ControllerRealization {
        a,
        b,
        c: c_row,
        d,
        kind: ControllerKind::RoCausal,
        gamma: Some(fs.gamma),
        form: RealizationForm::YoulaParameter,
    };
    let _ = p;
    if ctrl.spectral_radius()? >= 1.0 {
        return Err(Error::InternalInstability(
            "assembled causal controller has unstable state matrix".into(),
        ));
    }
    Ok(ctrl)
}

/// Assemble the strictly-causal controller. State ordering:
/// (F_W, F_S, F_N, F_M) blocks; no feedthrough.
fn assemble_ro_strictly_causal(
    plant: &StateSpacePlant,
    chain: &SynthesisChain,
) -> Result<ControllerRealization> {
    let fs = &chain.factors;
    let neh = &chain.nehari;
    let anti = &chain.anti;
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let n2 = 2 * n;
    let h = &plant.h;
    let rw_hi = &fs.w.r_half_inv;
    let rw_inv = inv(&fs.w.r_full)?;
    let rm_hi = &fs.m.factor.r_half_inv;
    let h_pi = &anti.h_a * &neh.pi;
    let fs_u2 = &fs.s.f_cl * &anti.u2;

    let a = block_matrix(&[
        vec![
            fs.w.f_cl.clone(),
            Mat::zeros(n, n),
            Mat::zeros(n, n2),
            Mat::zeros(n, n2),
        ],
        vec![
            -(&fs_u2 * h.transpose() * &rw_inv * h),
            fs.s.f_cl.clone(),
            Mat::zeros(n, n2),
            Mat::zeros(n, n2),
        ],
        vec![
            -(&neh.k_n * rw_hi * h),
            Mat::zeros(n2, n),
            neh.f_n.clone(),
            Mat::zeros(n2, n2),
        ],
        vec![
            -(&anti.u3 * &anti.g_a * rw_hi * h),
            Mat::zeros(n2, n),
            &fs.m.g_e * rm_hi * &h_pi,
            fs.m.factor.f_cl.clone(),
        ],
    ]);
    let b = vcat(&[
        &fs.w.k,
        &(&fs_u2 * h.transpose() * &rw_inv),
        &(&neh.k_n * rw_hi),
        &(&anti.u3 * &anti.g_a * rw_hi),
    ]);
    let c = hcat(&[
        &Mat::zeros(m, n),
        &(-(plant.g2.transpose() * &anti.u1 * &fs.s.f_cl)),
        &(rm_hi * &h_pi),
        &(-&fs.m.factor.k),
    ]);
    let ctrl = ControllerRealization {
        a,
        b,
        c,
        d: Mat::zeros(m, p),
        kind: ControllerKind::RoStrictlyCausal,
        gamma: Some(fs.gamma),
        form: RealizationForm::YoulaParameter,
    };
    if ctrl.spectral_radius()? >= 1.0 {
        return Err(Error::InternalInstability(
            "assembled strictly-causal controller has unstable state matrix".into(),
        ));
    }
    Ok(ctrl)
}

fn require_feasible(chain: &SynthesisChain, gamma: f64) -> Result<()> {
    if !chain.nehari.feasible() {
        return Err(Error::GammaInfeasible {
            gamma,
            reason: format!("hankel norm {:.6} exceeds one", chain.nehari.hankel_norm),
        });
    }
    Ok(())
}

/// Causal regret-optimal controller at a given (feasible) level, in
/// Youla-parameter form.
pub fn synthesize_ro_causal(plant: &StateSpacePlant, gamma: f64) -> Result<ControllerRealization> {
    if plant.g2.norm() == 0.0 {
        return Ok(ControllerRealization::zero(
            plant,
            ControllerKind::RoCausal,
            RealizationForm::YoulaParameter,
        ));
    }
    let chain = build_chain(plant, gamma, false)?;
    require_feasible(&chain, gamma)?;
    assemble_ro_causal(plant, &chain)
}

/// Strictly-causal regret-optimal controller at a given level.
pub fn synthesize_ro_strictly_causal(
    plant: &StateSpacePlant,
    gamma: f64,
) -> Result<ControllerRealization> {
    if plant.g2.norm() == 0.0 {
        return Ok(ControllerRealization::zero(
            plant,
            ControllerKind::RoStrictlyCausal,
            RealizationForm::YoulaParameter,
        ));
    }
    let chain = build_chain(plant, gamma, true)?;
    require_feasible(&chain, gamma)?;
    assemble_ro_strictly_causal(plant, &chain)
}

/// Bisection on the regret level over the feasibility predicate "all
/// level-dependent factors exist and the Hankel norm is at most one".
/// Returns the smallest feasible level within the relative tolerance and
/// the controller synthesized there.
pub fn optimal_gamma(plant: &StateSpacePlant, tol: f64) -> Result<SynthesisResult> {
    optimal_gamma_impl(plant, tol, false)
}

/// Strictly-causal counterpart of `optimal_gamma`.
pub fn optimal_gamma_strictly_causal(plant: &StateSpacePlant, tol: f64) -> Result<SynthesisResult> {
    optimal_gamma_impl(plant, tol, true)
}

fn optimal_gamma_impl(
    plant: &StateSpacePlant,
    tol: f64,
    strictly_causal: bool,
) -> Result<SynthesisResult> {
    if !(tol > 0.0 && tol < 0.1) {
        return Err(Error::Dimension("gamma tolerance must lie in (0, 0.1)".into()));
    }
    let report = validate_assumptions(plant)?;
    if !report.all_ok() {
        return Err(Error::AssumptionViolated(report.failed_tests().join("; ")));
    }
    let kind = if strictly_causal {
        ControllerKind::RoStrictlyCausal
    } else {
        ControllerKind::RoCausal
    };
    if plant.g2.norm() == 0.0 {
        // nothing to control: zero regret at the bracket floor
        let mut ctrl =
            ControllerRealization::zero(plant, kind, RealizationForm::YoulaParameter);
        ctrl.gamma = Some(GAMMA_FLOOR);
        return Ok(SynthesisResult {
            controller: ctrl,
            gamma: GAMMA_FLOOR,
            gamma_squared: GAMMA_FLOOR * GAMMA_FLOOR,
            diagnostics: Diagnostics::default(),
            feasibility_margin: 1.0,
        });
    }

    // upper bracket from the H2 baseline's closed-loop operator norm
    let h2 = synthesize_h2(plant)?;
    let q_h2 = feedback_to_youla(plant, &h2)?;
    let grid = FrequencyGrid::new(256)?;
    let h2_opnorm = operator_norm_sq(plant, &q_h2, &grid)?.value.sqrt();
    let mut hi = 10.0 * h2_opnorm.max(1e-6);

    let probe = |gamma: f64| -> Result<Option<SynthesisChain>> {
        match build_chain(plant, gamma, strictly_causal) {
            Ok(chain) => Ok(if chain.nehari.feasible() {
                Some(chain)
            } else {
                None
            }),
            Err(e) if e.is_infeasibility() => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut best = probe(hi)?.ok_or_else(|| {
        Error::Bracket(format!(
            "upper bracket gamma = {hi:.6e} infeasible; this should not happen"
        ))
    })?;
    let mut lo = GAMMA_FLOOR;
    for _ in 0..BISECTION_CAP {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match probe(mid)? {
            Some(chain) => {
                hi = mid;
                best = chain;
            }
            None => lo = mid,
        }
    }
    let controller = if strictly_causal {
        assemble_ro_strictly_causal(plant, &best)?
    } else {
        assemble_ro_causal(plant, &best)?
    };
    let diagnostics = collect_diagnostics(plant, &best);
    Ok(SynthesisResult {
        gamma: hi,
        gamma_squared: hi * hi,
        feasibility_margin: 1.0 - best.nehari.hankel_norm,
        controller,
        diagnostics,
    })
}

/// Convert a stable Youla parameter into the feedback controller
/// K = Q (I + Q P22)^{-1} via the standard interconnection with an
/// internal plant copy, and verify internal stability of the loop.
pub fn youla_to_feedback(
    plant: &StateSpacePlant,
    q: &ControllerRealization,
) -> Result<ControllerRealization> {
    if q.form != RealizationForm::YoulaParameter {
        return Err(Error::Dimension("expected a Youla-parameter realization".into()));
    }
    if q.n_inputs() != plant.p() || q.n_outputs() != plant.m() {
        return Err(Error::Dimension("controller dimensions do not match plant".into()));
    }
    let (nq, n) = (q.n_states(), plant.n());
    let h = &plant.h;
    let g2 = &plant.g2;
    let a = block_matrix(&[
        vec![q.a.clone(), -(&q.b * h)],
        vec![g2 * &q.c, &plant.f - g2 * &q.d * h],
    ]);
    let b = vcat(&[&q.b, &(g2 * &q.d)]);
    let c = hcat(&[&q.c, &(-(&q.d * h))]);
    let d = q.d.clone();
    let k = ControllerRealization {
        a,
        b,
        c,
        d,
        kind: q.kind,
        gamma: q.gamma,
        form: RealizationForm::Feedback,
    };
    let _ = nq;
    let _ = n;
    // loud check: closed loop with the plant must be internally stable
    let rho = closed_loop_spectral_radius(plant, &k)?;
    if rho >= 1.0 {
        return Err(Error::InternalInstability(format!(
            "youla-to-feedback produced an internally unstable loop (radius {rho:.6})"
        )));
    }
    Ok(k)
}

/// Convert a feedback controller into its Youla parameter
/// Q = K (I - P22 K)^{-1}; the conversion matrix is exactly the closed
/// loop, so success certifies internal stability.
pub fn feedback_to_youla(
    plant: &StateSpacePlant,
    k: &ControllerRealization,
) -> Result<ControllerRealization> {
    if k.form != RealizationForm::Feedback {
        return Err(Error::Dimension("expected a feedback-form realization".into()));
    }
    let h = &plant.h;
    let g2 = &plant.g2;
    let a = block_matrix(&[
        vec![k.a.clone(), &k.b * h],
        vec![g2 * &k.c, &plant.f + g2 * &k.d * h],
    ]);
    let b = vcat(&[&k.b, &(g2 * &k.d)]);
    let c = hcat(&[&k.c, &(&k.d * h)]);
    let q = ControllerRealization {
        a,
        b,
        c,
        d: k.d.clone(),
        kind: k.kind,
        gamma: k.gamma,
        form: RealizationForm::YoulaParameter,
    };
    let rho = q.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::InternalInstability(format!(
            "feedback controller does not stabilize the plant (radius {rho:.6})"
        )));
    }
    Ok(q)
}

/// Spectral radius of the plant/controller interconnection.
pub fn closed_loop_spectral_radius(
    plant: &StateSpacePlant,
    k: &ControllerRealization,
) -> Result<f64> {
    let h = &plant.h;
    let g2 = &plant.g2;
    let a_cl = block_matrix(&[
        vec![&plant.f + g2 * &k.d * h, g2 * &k.c],
        vec![&k.b * h, k.a.clone()],
    ]);
    spectral_radius(&a_cl)
}

/// Measurement-feedback LQG controller in the current-measurement form:
/// LQR gain on the filtered state estimate. This is the causal H2
/// optimum for the normalized plant.
pub fn synthesize_h2(plant: &StateSpacePlant) -> Result<ControllerRealization> {
    let n = plant.n();
    let ctrl = solve_dare_control(
        &plant.f,
        &plant.g2,
        &sym(&(plant.l.transpose() * &plant.l)),
        &eye(plant.m()),
    )?;
    let filt = solve_dare_filter(
        &plant.f,
        &plant.h,
        &sym(&(&plant.g1 * plant.g1.transpose())),
        &eye(plant.p()),
        1,
    )?;
    let kc = &ctrl.gain;
    // a-posteriori update gain: M_f = P H' (I + H P H')^{-1}
    let mf = solve(&filt.r.transpose(), &(&filt.p * plant.h.transpose()).transpose())?.transpose();
    let i_mh = eye(n) - &mf * &plant.h;
    let a = &plant.f * &i_mh - &plant.g2 * kc * &i_mh;
    let b = (&plant.f - &plant.g2 * kc) * &mf;
    let c = -(kc * &i_mh);
    let d = -(kc * &mf);
    let k = ControllerRealization {
        a,
        b,
        c,
        d,
        kind: ControllerKind::H2,
        gamma: None,
        form: RealizationForm::Feedback,
    };
    let rho = closed_loop_spectral_radius(plant, &k)?;
    if rho >= 1.0 {
        return Err(Error::InternalInstability(format!(
            "LQG interconnection unstable (radius {rho:.6})"
        )));
    }
    Ok(k)
}

// ---------------------------------------------------------------------
// Central H-infinity synthesis.
// ---------------------------------------------------------------------

/// Data of the central controller construction at one level.
struct HinfCentral {
    k: ControllerRealization,
}

/// Build the central controller for level `delta` via the game-value
/// Riccati solution and the stationary cost-to-come recursion. Errors of
/// the infeasibility class mean the level is not achievable.
fn hinf_central(plant: &StateSpacePlant, delta: f64) -> Result<HinfCentral> {
    let n = plant.n();
    let d2 = delta * delta;
    let infeasible = |reason: &str| Error::GammaInfeasible {
        gamma: delta,
        reason: reason.to_string(),
    };
    let q_cost = sym(&(plant.l.transpose() * &plant.l));
    let game = solve_game_dare(&plant.f, &plant.g2, &plant.g1, &q_cost, delta)?;
    let m = game.p;

    // stationary cost-to-come Hessian: S <- inv(F (S-Q)^{-1} F' + G1 G1'/d^2) + d^2 H'H
    let gg = &plant.g1 * plant.g1.transpose();
    let hh = plant.h.transpose() * &plant.h;
    let mut s = eye(n) * 1e8 * (1.0 + q_cost.norm());
    let mut converged = false;
    for _ in 0..20_000 {
        let x = sym(&(&s - &q_cost));
        if chol_lower(&x, "cost-to-come").is_err() {
            return Err(infeasible("cost-to-come concavity lost"));
        }
        let inner = sym(&(&plant.f * solve(&x, &plant.f.transpose())? + &gg / d2));
        let st = inv(&inner)?;
        let sn = sym(&(&st + &hh * d2));
        let inc = fro(&(&sn - &s));
        s = sn;
        if inc <= 1e-12 * (1.0 + fro(&s)) {
            converged = true;
            break;
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(infeasible("cost-to-come recursion diverged"));
        }
    }
    if !converged {
        return Err(infeasible("cost-to-come recursion did not converge"));
    }
    let x = sym(&(&s - &q_cost));
    let st = inv(&sym(&(&plant.f * solve(&x, &plant.f.transpose())? + &gg / d2)))?;
    // coupling: the pre-measurement Hessian must dominate the game value
    if chol_lower(&sym(&(&st - &m)), "coupling").is_err() {
        return Err(infeasible("spectral coupling condition failed"));
    }
    let fe = &plant.f * solve(&x, &s)?;
    let w = sym(&(&st * solve(&sym(&(&st - &m)), &m)?));
    let ru = eye(plant.m()) + plant.g2.transpose() * &w * &plant.g2;
    let ku = solve(&ru, &(plant.g2.transpose() * &w * &fe))?;
    let ae = solve(&s, &(&st * (&fe - &plant.g2 * &ku)))?;
    let be = solve(&s, &plant.h.transpose())? * d2;
    let k = ControllerRealization {
        a: ae.clone(),
        b: be.clone(),
        c: -(&ku * &ae),
        d: -(&ku * &be),
        kind: ControllerKind::Hinf,
        gamma: Some(delta),
        form: RealizationForm::Feedback,
    };
    Ok(HinfCentral { k })
}

/// Existence test for level `delta`: both game Riccati solutions exist
/// and their spectral-radius coupling holds.
pub fn hinf_level_feasible(plant: &StateSpacePlant, delta: f64) -> Result<bool> {
    let q_cost = sym(&(plant.l.transpose() * &plant.l));
    let m = match solve_game_dare(&plant.f, &plant.g2, &plant.g1, &q_cost, delta) {
        Ok(sol) => sol.p,
        Err(e) if e.is_infeasibility() => return Ok(false),
        Err(e) => return Err(e),
    };
    let gg = sym(&(&plant.g1 * plant.g1.transpose()));
    let y = match solve_game_dare(
        &plant.f.transpose(),
        &plant.h.transpose(),
        &plant.l.transpose(),
        &gg,
        delta,
    ) {
        Ok(sol) => sol.p,
        Err(e) if e.is_infeasibility() => return Ok(false),
        Err(e) => return Err(e),
    };
    let coupling = eigenvalues(&(&y * &m))?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    Ok(coupling < delta * delta)
}

/// Central measurement-feedback H-infinity controller at the smallest
/// achievable closed-loop operator-norm level within the relative
/// tolerance. The returned level is verified on a frequency grid.
pub fn synthesize_hinf(plant: &StateSpacePlant, tol: f64) -> Result<ControllerRealization> {
    if !(tol > 0.0 && tol < 0.1) {
        return Err(Error::Dimension("level tolerance must lie in (0, 0.1)".into()));
    }
    let h2 = synthesize_h2(plant)?;
    let q_h2 = feedback_to_youla(plant, &h2)?;
    let grid = FrequencyGrid::new(256)?;
    let h2_norm = operator_norm_sq(plant, &q_h2, &grid)?.value.sqrt();
    let hi0 = 1.05 * h2_norm.max(1e-9);

    let achieves = |delta: f64| -> Result<Option<ControllerRealization>> {
        let central = match hinf_central(plant, delta) {
            Ok(c) => c,
            Err(e) if e.is_infeasibility() => return Ok(None),
            Err(e) => return Err(e),
        };
        let q = match feedback_to_youla(plant, &central.k) {
            Ok(q) => q,
            Err(Error::InternalInstability(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let norm = operator_norm_sq(plant, &q, &grid)?.value.sqrt();
        if norm <= delta * (1.0 + 1e-9) {
            Ok(Some(central.k))
        } else {
            Ok(None)
        }
    };

    let mut hi = hi0;
    let mut best = match achieves(hi)? {
        Some(k) => k,
        None => {
            // widen once; the H2 loop norm is always an achievable level
            hi *= 4.0;
            achieves(hi)?.ok_or_else(|| {
                Error::Bracket(format!("H-infinity upper bracket {hi:.6e} not achievable"))
            })?
        }
    };
    let mut lo = hi * 1e-9;
    for _ in 0..BISECTION_CAP {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match achieves(mid)? {
            Some(k) => {
                hi = mid;
                best = k;
            }
            None => lo = mid,
        }
    }
    best.gamma = Some(hi);
    Ok(best)
}

/// Worst relative deviation, over a unit-circle grid, of the assembled
/// controller transfer from the factor-product construction
/// M^{-1/2} (C1 + C2 + C_N) W^{1/2}. This checks every block of the
/// state-space assembly against its own ingredients.
pub fn assembly_grid_error(
    plant: &StateSpacePlant,
    chain: &SynthesisChain,
    q: &ControllerRealization,
    n_points: usize,
) -> Result<f64> {
    let mut err: f64 = 0.0;
    for k in 0..n_points {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_points as f64;
        let z = Complex64::from_polar(1.0, th);
        let lhs = q.eval(z)?;
        let sum = chain.c1.eval(z)? + chain.c2.eval(z)? + chain.nehari.c_n.eval(z)?;
        let rhs = eval_m_minus_half(&chain.factors.m, z)?
            * sum
            * eval_w_half(plant, &chain.factors.w, z)?;
        err = err.max((lhs - &rhs).norm() / (1.0 + rhs.norm()));
    }
    Ok(err)
}

// ---------------------------------------------------------------------
// Controller JSON serialization: keys "A","B","C","D","kind","gamma".
// ---------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ControllerFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    kind: ControllerKind,
    gamma: Option<f64>,
}

fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_mat(rows: &[Vec<f64>], r_expect: Option<usize>, c_expect: Option<usize>) -> Result<Mat> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Dimension("ragged matrix rows in controller file".into()));
    }
    if let Some(r) = r_expect {
        if r != nr {
            return Err(Error::Dimension("controller block row count mismatch".into()));
        }
    }
    if let Some(c) = c_expect {
        if c != nc {
            return Err(Error::Dimension("controller block column count mismatch".into()));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Mat::from_row_slice(nr, nc, &flat))
}

/// Serialize a controller to the JSON value with the documented keys.
pub fn controller_to_json(ctrl: &ControllerRealization) -> serde_json::Value {
    serde_json::to_value(ControllerFile {
        a: mat_rows(&ctrl.a),
        b: mat_rows(&ctrl.b),
        c: mat_rows(&ctrl.c),
        d: mat_rows(&ctrl.d),
        kind: ctrl.kind,
        gamma: ctrl.gamma,
    })
    .expect("controller serialization cannot fail")
}

/// Parse a controller from JSON text; unknown keys are ignored.
pub fn controller_from_json(text: &str) -> Result<ControllerRealization> {
    let file: ControllerFile = serde_json::from_str(text)?;
    let a = rows_mat(&file.a, None, None)?;
    let ns = a.nrows();
    if a.ncols() != ns && !(ns == 0 && a.ncols() == 0) {
        return Err(Error::Dimension("controller A must be square".into()));
    }
    let d = rows_mat(&file.d, None, None)?;
    let b = rows_mat(&file.b, Some(ns), Some(d.ncols()))?;
    let c = rows_mat(&file.c, Some(d.nrows()), Some(ns))?;
    let form = match file.kind {
        ControllerKind::H2 | ControllerKind::Hinf => RealizationForm::Feedback,
        _ => RealizationForm::YoulaParameter,
    };
    Ok(ControllerRealization {
        a,
        b,
        c,
        d,
        kind: file.kind,
        gamma: file.gamma,
        form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::scalar_plant;

    #[test]
    fn ro_causal_scalar_assembly_identity() {
        let plant = scalar_plant();
        let chain = build_chain(&plant, 2.0, false).unwrap();
        let q = synthesize_ro_causal(&plant, 2.0).unwrap();
        let err = assembly_grid_error(&plant, &chain, &q, 256).unwrap();
        assert!(err < 1e-7, "assembly error {err}");
        assert!(q.spectral_radius().unwrap() < 1.0);
    }

    #[test]
    fn ro_block_dimensions() {
        // n-state plant: blocks (n, 2n, 2n, n) stack to 6n states
        let n = 2;
        let plant = StateSpacePlant::new(
            Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]),
            eye(n),
            eye(n),
            eye(n),
            eye(n),
        )
        .unwrap();
        let q = synthesize_ro_causal(&plant, 5.0).unwrap();
        assert_eq!(q.n_states(), 6 * n);
    }

    #[test]
    fn ro_strictly_causal_scalar() {
        let plant = scalar_plant();
        let chain = build_chain(&plant, 2.0, true).unwrap();
        let q = synthesize_ro_strictly_causal(&plant, 2.0).unwrap();
        assert!(q.is_strictly_causal());
        let err = assembly_grid_error(&plant, &chain, &q, 256).unwrap();
        assert!(err < 1e-7, "assembly error {err}");
    }

    #[test]
    fn zero_control_channel_gives_zero_controller() {
        let mut plant = scalar_plant();
        plant.g2 = Mat::from_element(1, 1, 0.0);
        let res = optimal_gamma(&plant, 1e-4).unwrap();
        assert_eq!(res.gamma, GAMMA_FLOOR);
        let z = Complex64::new(0.2, 0.9);
        assert!(res.controller.eval(z).unwrap().norm() < 1e-15);
    }

    #[test]
    fn optimal_gamma_scalar_matches_frozen_value() {
        let plant = scalar_plant();
        let res = optimal_gamma(&plant, 1e-4).unwrap();
        // frozen from an independent high-precision bisection
        assert!(
            (res.gamma_squared - 0.782567).abs() < 5e-4,
            "gamma^2 = {}",
            res.gamma_squared
        );
        assert!(res.feasibility_margin >= 0.0);
        assert!(res.diagnostics.hankel_norm >= 1.0 - 10.0 * 1e-4);
        assert!(res.diagnostics.hankel_norm <= 1.0);
        for (name, r) in &res.diagnostics.equation_residuals {
            assert!(*r <= 1e-9, "{name} residual {r}");
        }
    }

    #[test]
    fn youla_feedback_round_trip_and_special_cases() {
        let plant = scalar_plant();
        let q = synthesize_ro_causal(&plant, 2.0).unwrap();
        let k = youla_to_feedback(&plant, &q).unwrap();
        // identity (I + Q P22) K = Q on the circle
        for i in 0..128 {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / 128.0;
            let z = Complex64::from_polar(1.0, th);
            let p22 = crate::sysmodel::plant_transfer(&plant, crate::sysmodel::Channel::P22, z)
                .unwrap();
            let qv = q.eval(z).unwrap();
            let kv = k.eval(z).unwrap();
            let lhs = (ceye(1) + &qv * p22) * kv;
            assert!((lhs - qv).norm() < 1e-9);
        }
        // Q = 0 -> K = 0
        let zero = ControllerRealization::zero(
            &plant,
            ControllerKind::Youla,
            RealizationForm::YoulaParameter,
        );
        let k0 = youla_to_feedback(&plant, &zero).unwrap();
        let z = Complex64::new(0.1, 1.0);
        assert!(k0.eval(z).unwrap().norm() < 1e-15);
        // P22 = 0 (zero control channel): K = Q exactly
        let mut open = scalar_plant();
        open.g2 = Mat::from_element(1, 1, 0.0);
        let q1 = ControllerRealization {
            a: Mat::from_element(1, 1, 0.3),
            b: Mat::from_element(1, 1, 1.0),
            c: Mat::from_element(1, 1, 0.7),
            d: Mat::from_element(1, 1, 0.2),
            kind: ControllerKind::Youla,
            gamma: None,
            form: RealizationForm::YoulaParameter,
        };
        let k1 = youla_to_feedback(&open, &q1).unwrap();
        assert!((k1.eval(z).unwrap() - q1.eval(z).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn h2_special_cases() {
        // L = 0 is rejected by the plant constructor, so emulate with a
        // tiny regulated map: gain goes to zero with it
        let mut plant = scalar_plant();
        plant.l = Mat::from_element(1, 1, 1e-12);
        let k = synthesize_h2(&plant).unwrap();
        let z = Complex64::new(0.0, 1.0);
        assert!(k.eval(z).unwrap().norm() < 1e-10);
        // G1 = 0: estimator correction vanishes on a stable plant
        let mut plant = scalar_plant();
        plant.g1 = Mat::from_element(1, 1, 0.0);
        let k = synthesize_h2(&plant).unwrap();
        assert!(k.b.norm() < 1e-13);
    }

    #[test]
    fn hinf_scalar_matches_frozen_level() {
        let plant = scalar_plant();
        let k = synthesize_hinf(&plant, 1e-4).unwrap();
        let delta = k.gamma.unwrap();
        // frozen from an independent existence bisection and a convex
        // finite-horizon solve
        assert!((delta - 1.217973).abs() < 2e-3, "delta = {delta}");
        // doubling the level keeps it achievable
        assert!(hinf_level_feasible(&plant, 2.0 * delta).unwrap());
        assert!(!hinf_level_feasible(&plant, 0.5 * delta).unwrap());
    }

    #[test]
    fn controller_json_round_trip() {
        let plant = scalar_plant();
        let q = synthesize_ro_causal(&plant, 2.0).unwrap();
        let text = serde_json::to_string(&controller_to_json(&q)).unwrap();
        let back = controller_from_json(&text).unwrap();
        assert_eq!(back.kind, ControllerKind::RoCausal);
        assert!((back.a - &q.a).norm() < 1e-15);
        assert_eq!(back.form, RealizationForm::YoulaParameter);
    }
}
