//! Plant representation, cost-weight absorption, standing-assumption
//! validation and pointwise transfer-matrix evaluation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::Error;
use crate::linalg::*;
use crate::Result;

/// Tolerance band for "on the unit circle": |lambda| in [1-eps, 1+eps].
pub const UNIT_CIRCLE_EPS: f64 = 1e-8;
/// PBH rank threshold relative to the largest singular value.
pub const PBH_RANK_TOL: f64 = 1e-10;

/// Discrete-time plant
///   x+ = F x + G1 w + G2 u,  s = L x,  y = H x + v
/// in normalized form (unit cost weights on s and u).
#[derive(Debug, Clone)]
pub struct StateSpacePlant {
    pub f: Mat,
    pub g1: Mat,
    pub g2: Mat,
    pub h: Mat,
    pub l: Mat,
    pub name: Option<String>,
    /// R^{-1/2} applied to the control channel during weight absorption;
    /// multiply synthesized controller outputs by this to recover
    /// physical inputs. Identity when no weights were absorbed.
    pub input_rescale: Option<Mat>,
}

/// Positive definite cost weights on the regulated output and the input.
#[derive(Debug, Clone)]
pub struct CostWeights {
    pub q: Mat,
    pub r: Mat,
}

/// Outcome of the PBH tests behind the standing assumptions.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub detectable_fh: bool,
    pub detectable_fl: bool,
    pub stabilizable_fg1: bool,
    pub unit_circle_controllable_fg1: bool,
    pub unit_circle_controllable_fg2: bool,
    /// Offending eigenvalues per failed test, keyed by test name.
    pub witnesses: Vec<(String, Complex64)>,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.detectable_fh
            && self.detectable_fl
            && self.stabilizable_fg1
            && self.unit_circle_controllable_fg1
            && self.unit_circle_controllable_fg2
    }

    pub fn failed_tests(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.detectable_fh {
            out.push("detectability of (F, H)");
        }
        if !self.detectable_fl {
            out.push("detectability of (F, L)");
        }
        if !self.stabilizable_fg1 {
            out.push("stabilizability of (F, G1)");
        }
        if !self.unit_circle_controllable_fg1 {
            out.push("unit-circle controllability of (F, G1)");
        }
        if !self.unit_circle_controllable_fg2 {
            out.push("unit-circle controllability of (F, G2)");
        }
        out
    }
}

/// Transfer channel selector for `plant_transfer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    P11,
    P12,
    P21,
    P22,
}

impl StateSpacePlant {
    pub fn new(f: Mat, g1: Mat, g2: Mat, h: Mat, l: Mat) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(Error::InvalidPlant(format!(
                "F must be square, got {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        if g1.nrows() != n || g2.nrows() != n {
            return Err(Error::InvalidPlant(
                "G1 and G2 must have as many rows as F".into(),
            ));
        }
        if h.ncols() != n || l.ncols() != n {
            return Err(Error::InvalidPlant(
                "H and L must have as many columns as F".into(),
            ));
        }
        if g1.ncols() == 0 || g2.ncols() == 0 || h.nrows() == 0 || l.nrows() == 0 || n == 0 {
            return Err(Error::InvalidPlant("empty dimension".into()));
        }
        Ok(Self {
            f,
            g1,
            g2,
            h,
            l,
            name: None,
            input_rescale: None,
        })
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }
    pub fn n_w(&self) -> usize {
        self.g1.ncols()
    }
    pub fn m(&self) -> usize {
        self.g2.ncols()
    }
    pub fn p(&self) -> usize {
        self.h.nrows()
    }
    pub fn q(&self) -> usize {
        self.l.nrows()
    }
}

/// Principal square root of a symmetric positive definite matrix via the
/// symmetric eigendecomposition. `invert` produces R^{-1/2} instead.
fn spd_sqrt(m: &Mat, invert: bool, context: &str) -> Result<Mat> {
    let se = sym(m).symmetric_eigen();
    let mut vals = se.eigenvalues.clone();
    for v in vals.iter() {
        if *v <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                context: context.to_string(),
                min_eig: *v,
            });
        }
    }
    for v in vals.iter_mut() {
        *v = if invert { 1.0 / v.sqrt() } else { v.sqrt() };
    }
    Ok(&se.eigenvectors * Mat::from_diagonal(&vals) * se.eigenvectors.transpose())
}

/// Absorb cost weights into the plant: L <- Q^{1/2} L and G2 <- G2 R^{-1/2}.
/// The returned plant records R^{-1/2} so controller outputs can be mapped
/// back to physical inputs.
pub fn absorb_weights(plant: &StateSpacePlant, weights: &CostWeights) -> Result<StateSpacePlant> {
    if weights.q.nrows() != plant.q() || weights.r.nrows() != plant.m() {
        return Err(Error::Dimension(
            "weight dimensions do not match plant outputs/inputs".into(),
        ));
    }
    let q_half = spd_sqrt(&weights.q, false, "cost weight Q")?;
    let r_inv_half = spd_sqrt(&weights.r, true, "cost weight R")?;
    let mut out = plant.clone();
    out.l = &q_half * &plant.l;
    out.g2 = &plant.g2 * &r_inv_half;
    out.input_rescale = Some(match &plant.input_rescale {
        Some(prev) => &r_inv_half * prev,
        None => r_inv_half,
    });
    Ok(out)
}

fn pbh_rank(m: &CMat) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > PBH_RANK_TOL * smax).count()
}

/// PBH column test: rank [F - lambda I; C] == n.
fn pbh_observable_at(f: &Mat, c: &Mat, lambda: Complex64) -> bool {
    let n = f.nrows();
    let mut m = CMat::zeros(n + c.nrows(), n);
    m.view_mut((0, 0), (n, n))
        .copy_from(&(to_complex(f) - ceye(n) * lambda));
    m.view_mut((n, 0), (c.nrows(), n)).copy_from(&to_complex(c));
    pbh_rank(&m) == n
}

/// PBH row test: rank [F - lambda I, B] == n.
fn pbh_controllable_at(f: &Mat, b: &Mat, lambda: Complex64) -> bool {
    let n = f.nrows();
    let mut m = CMat::zeros(n, n + b.ncols());
    m.view_mut((0, 0), (n, n))
        .copy_from(&(to_complex(f) - ceye(n) * lambda));
    m.view_mut((0, n), (n, b.ncols())).copy_from(&to_complex(b));
    pbh_rank(&m) == n
}

/// Run the PBH tests behind the standing assumptions and collect the
/// offending eigenvalues of every failed test.
pub fn validate_assumptions(plant: &StateSpacePlant) -> Result<AssumptionReport> {
    let eigs = eigenvalues(&plant.f)?;
    let mut report = AssumptionReport {
        detectable_fh: true,
        detectable_fl: true,
        stabilizable_fg1: true,
        unit_circle_controllable_fg1: true,
        unit_circle_controllable_fg2: true,
        witnesses: Vec::new(),
    };
    for &lam in &eigs {
        let r = lam.norm();
        if r >= 1.0 - UNIT_CIRCLE_EPS {
            if !pbh_observable_at(&plant.f, &plant.h, lam) {
                report.detectable_fh = false;
                report.witnesses.push(("detectable_FH".into(), lam));
            }
            if !pbh_observable_at(&plant.f, &plant.l, lam) {
                report.detectable_fl = false;
                report.witnesses.push(("detectable_FL".into(), lam));
            }
            if !pbh_controllable_at(&plant.f, &plant.g1, lam) {
                report.stabilizable_fg1 = false;
                report.witnesses.push(("stabilizable_FG1".into(), lam));
            }
        }
        if (r - 1.0).abs() <= UNIT_CIRCLE_EPS {
            if !pbh_controllable_at(&plant.f, &plant.g1, lam) {
                report.unit_circle_controllable_fg1 = false;
                report
                    .witnesses
                    .push(("unit_circle_controllable_FG1".into(), lam));
            }
            if !pbh_controllable_at(&plant.f, &plant.g2, lam) {
                report.unit_circle_controllable_fg2 = false;
                report
                    .witnesses
                    .push(("unit_circle_controllable_FG2".into(), lam));
            }
        }
    }
    Ok(report)
}

/// Evaluate one plant transfer channel Out (zI - F)^{-1} In at a complex
/// point. Rejects points too close to an eigenvalue of F.
pub fn plant_transfer(plant: &StateSpacePlant, which: Channel, z: Complex64) -> Result<CMat> {
    let eigs = eigenvalues(&plant.f)?;
    let dist = eigs
        .iter()
        .map(|l| (z - l).norm())
        .fold(f64::INFINITY, f64::min);
    if dist < 1e-9 * (1.0 + z.norm()) {
        return Err(Error::NearSingular {
            z_re: z.re,
            z_im: z.im,
            dist,
        });
    }
    let (out, inp) = match which {
        Channel::P11 => (&plant.l, &plant.g1),
        Channel::P12 => (&plant.l, &plant.g2),
        Channel::P21 => (&plant.h, &plant.g1),
        Channel::P22 => (&plant.h, &plant.g2),
    };
    Ok(to_complex(out) * resolvent_times(z, &plant.f, &to_complex(inp))?)
}

// ---------------------------------------------------------------------
// JSON plant format: keys "F","G1","G2","H","L" (row-major 2-D arrays),
// optional "Q","R" weights and "name".
// ---------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PlantFile {
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "G1")]
    g1: Vec<Vec<f64>>,
    #[serde(rename = "G2")]
    g2: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    l: Vec<Vec<f64>>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

fn rows_to_mat(rows: &[Vec<f64>], key: &str) -> Result<Mat> {
    if rows.is_empty() {
        return Err(Error::InvalidPlant(format!("{key} is empty")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidPlant(format!("{key} rows have uneven length")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Load a plant from its JSON form. Weights, when present, are absorbed
/// immediately so the returned plant is normalized.
pub fn load_plant(path: &Path) -> Result<StateSpacePlant> {
    let text = std::fs::read_to_string(path)?;
    parse_plant(&text)
}

/// Parse a plant from JSON text; see `load_plant`.
pub fn parse_plant(text: &str) -> Result<StateSpacePlant> {
    let file: PlantFile = serde_json::from_str(text)?;
    let mut plant = StateSpacePlant::new(
        rows_to_mat(&file.f, "F")?,
        rows_to_mat(&file.g1, "G1")?,
        rows_to_mat(&file.g2, "G2")?,
        rows_to_mat(&file.h, "H")?,
        rows_to_mat(&file.l, "L")?,
    )?;
    plant.name = file.name;
    if file.q.is_some() || file.r.is_some() {
        let q = match &file.q {
            Some(q) => rows_to_mat(q, "Q")?,
            None => eye(plant.q()),
        };
        let r = match &file.r {
            Some(r) => rows_to_mat(r, "R")?,
            None => eye(plant.m()),
        };
        plant = absorb_weights(&plant, &CostWeights { q, r })?;
    }
    Ok(plant)
}

/// Serialize a (normalized) plant back to the JSON format.
pub fn plant_to_json(plant: &StateSpacePlant) -> String {
    let file = PlantFile {
        f: mat_to_rows(&plant.f),
        g1: mat_to_rows(&plant.g1),
        g2: mat_to_rows(&plant.g2),
        h: mat_to_rows(&plant.h),
        l: mat_to_rows(&plant.l),
        q: None,
        r: None,
        name: plant.name.clone(),
    };
    serde_json::to_string_pretty(&file).expect("plant serialization cannot fail")
}

/// The scalar test plant used across the test suite.
pub fn scalar_plant() -> StateSpacePlant {
    StateSpacePlant::new(
        Mat::from_element(1, 1, 0.5),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 1.0),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorb_identity_weights_is_noop_and_idempotent() {
        let plant = scalar_plant();
        let w = CostWeights { q: eye(1), r: eye(1) };
        let p1 = absorb_weights(&plant, &w).unwrap();
        assert!((&p1.l - &plant.l).norm() < 1e-15);
        assert!((&p1.g2 - &plant.g2).norm() < 1e-15);
        let p2 = absorb_weights(&p1, &w).unwrap();
        assert!((&p2.l - &p1.l).norm() < 1e-15);
        assert!((&p2.g2 - &p1.g2).norm() < 1e-15);
    }

    #[test]
    fn absorb_scalar_weight_scales_l() {
        let plant = StateSpacePlant::new(
            Mat::from_element(1, 1, 0.5),
            eye(1),
            eye(1),
            eye(1),
            Mat::from_element(1, 1, 2.0),
        )
        .unwrap();
        let w = CostWeights {
            q: Mat::from_element(1, 1, 4.0),
            r: eye(1),
        };
        let p = absorb_weights(&plant, &w).unwrap();
        assert!((p.l[(0, 0)] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn absorb_rejects_indefinite_weight() {
        let plant = scalar_plant();
        let w = CostWeights {
            q: Mat::from_element(1, 1, -1.0),
            r: eye(1),
        };
        match absorb_weights(&plant, &w) {
            Err(Error::NotPositiveDefinite { min_eig, .. }) => assert!(min_eig < 0.0),
            other => panic!("expected definiteness error, got {other:?}"),
        }
    }

    #[test]
    fn assumptions_scalar_plant_all_pass() {
        let rep = validate_assumptions(&scalar_plant()).unwrap();
        assert!(rep.all_ok());
        assert!(rep.witnesses.is_empty());
    }

    #[test]
    fn assumptions_flag_uncontrollable_unit_mode() {
        let plant = StateSpacePlant::new(
            Mat::from_element(1, 1, 1.0),
            Mat::from_element(1, 1, 0.0),
            eye(1),
            eye(1),
            eye(1),
        )
        .unwrap();
        let rep = validate_assumptions(&plant).unwrap();
        assert!(!rep.unit_circle_controllable_fg1);
        assert!(!rep.stabilizable_fg1);
        let w = rep
            .witnesses
            .iter()
            .find(|(k, _)| k == "unit_circle_controllable_FG1")
            .unwrap();
        assert!((w.1.re - 1.0).abs() < 1e-12 && w.1.im.abs() < 1e-12);
    }

    #[test]
    fn pbh_jordan_block_detectable() {
        // F = [[1,1],[0,1]], H = [1,0]: PBH matrix at lambda = 1 has rank 2
        let plant = StateSpacePlant::new(
            Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            eye(2),
            eye(2),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            eye(2),
        )
        .unwrap();
        let rep = validate_assumptions(&plant).unwrap();
        assert!(rep.detectable_fh);
    }

    #[test]
    fn transfer_scalar_value_and_decay() {
        let plant = scalar_plant();
        let v = plant_transfer(&plant, Channel::P11, Complex64::new(2.0, 0.0)).unwrap();
        assert!((v[(0, 0)].re - 1.0 / 1.5).abs() < 1e-14);
        let v = plant_transfer(&plant, Channel::P11, Complex64::new(1e9, 0.0)).unwrap();
        assert!(v[(0, 0)].norm() < 1e-8);
    }

    #[test]
    fn transfer_two_state_diagonal_sum() {
        let plant = StateSpacePlant::new(
            Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.6]),
            Mat::from_row_slice(2, 1, &[1.0, 1.0]),
            Mat::from_row_slice(2, 1, &[1.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let z = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let v = plant_transfer(&plant, Channel::P11, z).unwrap();
        let expect = 1.0 / (z - 0.3) + 1.0 / (z - 0.6);
        assert!((v[(0, 0)] - expect).norm() < 1e-13);
    }

    #[test]
    fn transfer_rejects_pole() {
        let plant = scalar_plant();
        match plant_transfer(&plant, Channel::P11, Complex64::new(0.5, 0.0)) {
            Err(Error::NearSingular { .. }) => {}
            other => panic!("expected singularity error, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_and_dimension_error() {
        let text = r#"{"F":[[0.5]],"G1":[[1.0]],"G2":[[1.0]],"H":[[1.0]],"L":[[1.0]],"name":"s"}"#;
        let p = parse_plant(text).unwrap();
        assert_eq!(p.name.as_deref(), Some("s"));
        let again = parse_plant(&plant_to_json(&p)).unwrap();
        assert!((&again.f - &p.f).norm() < 1e-15);

        let bad = r#"{"F":[[0.5]],"G1":[[1.0],[2.0]],"G2":[[1.0]],"H":[[1.0]],"L":[[1.0]]}"#;
        assert!(matches!(parse_plant(bad), Err(Error::InvalidPlant(_))));
    }

    #[test]
    fn json_weights_absorbed_on_load() {
        let text = r#"{"F":[[0.5]],"G1":[[1.0]],"G2":[[1.0]],"H":[[1.0]],"L":[[2.0]],
                        "Q":[[4.0]],"R":[[4.0]]}"#;
        let p = parse_plant(text).unwrap();
        assert!((p.l[(0, 0)] - 4.0).abs() < 1e-14);
        assert!((p.g2[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((p.input_rescale.as_ref().unwrap()[(0, 0)] - 0.5).abs() < 1e-14);
    }
}
