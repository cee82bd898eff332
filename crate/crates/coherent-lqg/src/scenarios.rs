//! Concrete synthesis problems: the atom-cavity plant, decision-vector
//! layouts for the three coupling configurations, and the published
//! controllers as verification fixtures.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closed_loop::CouplingConfig;
use crate::error::{Error, Result};
use crate::io::MatrixJson;
use crate::system::{
    invert_b21_to_b12, make_canonical_theta, ControllerRealization, NoiseModel,
    PlantModel, SqueezerSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ScenarioId::A),
            "B" => Ok(ScenarioId::B),
            "C" => Ok(ScenarioId::C),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioId::A => write!(f, "A"),
            ScenarioId::B => write!(f, "B"),
            ScenarioId::C => write!(f, "C"),
        }
    }
}

/// Maps contiguous index ranges of the decision vector to controller
/// matrices and parameters. All matrix blocks are row-major 2x2:
///
/// ```text
/// u(1..4) -> A_K    u(5..8) -> C_K    u(9..12) -> B_K2    u(13..16) -> B_Ky
/// u(17..20) -> B_12 (direct modes)    u(21..24) -> (r_u, r_y, r_wK1, r_wK2)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub len: usize,
    pub has_direct_coupling: bool,
    pub has_squeezers: bool,
}

impl DecisionLayout {
    pub const A_K: std::ops::Range<usize> = 0..4;
    pub const C_K: std::ops::Range<usize> = 4..8;
    pub const B_K2: std::ops::Range<usize> = 8..12;
    pub const B_KY: std::ops::Range<usize> = 12..16;
    pub const B_12: std::ops::Range<usize> = 16..20;
    pub const SQUEEZE: std::ops::Range<usize> = 20..24;

    fn for_id(id: ScenarioId) -> Self {
        match id {
            ScenarioId::A => Self { len: 16, has_direct_coupling: false, has_squeezers: false },
            ScenarioId::B => Self { len: 20, has_direct_coupling: true, has_squeezers: false },
            ScenarioId::C => Self { len: 24, has_direct_coupling: true, has_squeezers: true },
        }
    }
}

/// One of the three synthesis problems on the atom-cavity plant, with the
/// per-scenario algorithm defaults (value-scaling factor and penalty
/// rounds).
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub plant: PlantModel,
    pub layout: DecisionLayout,
    pub coupling: CouplingConfig,
    pub default_alpha: f64,
    pub default_rounds: usize,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId) -> Result<Self> {
        let plant = build_atom_cavity_plant()?;
        let (coupling, default_alpha, default_rounds) = match id {
            ScenarioId::A => (CouplingConfig::Indirect, 10.0, 20),
            ScenarioId::B => (CouplingConfig::DirectIndirect, 10.0, 20),
            ScenarioId::C => (CouplingConfig::DirectIndirectSqueezed, 1000.0, 30),
        };
        Ok(Self {
            id,
            plant,
            layout: DecisionLayout::for_id(id),
            coupling,
            default_alpha,
            default_rounds,
        })
    }
}

/// The atom trapped in a three-mirror cavity, after adiabatic elimination
/// of the cavity dynamics, with detuning 0.1 and all coupling rates 0.01.
/// The performance output weights state and control equally (C_z = D_z = I).
pub fn build_atom_cavity_plant() -> Result<PlantModel> {
    let delta = 0.1;
    let (k1, k2, k3) = (0.01f64, 0.01f64, 0.01f64);
    let a = DMatrix::from_row_slice(2, 2, &[0.0, delta, -delta, 0.0]);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0 * k1.sqrt()]);
    let b_w = DMatrix::from_row_slice(
        2,
        4,
        &[0.0, 0.0, 0.0, 0.0, 0.0, -2.0 * k2.sqrt(), 0.0, -2.0 * k3.sqrt()],
    );
    let c = DMatrix::from_row_slice(2, 2, &[2.0 * k2.sqrt(), 0.0, 0.0, 0.0]);
    let mut d_w = DMatrix::zeros(2, 4);
    d_w.view_mut((0, 0), (2, 2)).copy_from(&DMatrix::identity(2, 2));
    PlantModel::new(
        a,
        b,
        b_w,
        c,
        d_w,
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        make_canonical_theta(2)?,
        NoiseModel::quantum(4)?,
    )
}

fn block2(decision: &[f64], range: std::ops::Range<usize>) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &decision[range])
}

/// Decodes a decision vector into a controller. `B_K1` and `B_21` are
/// derived, never read from the vector, so every decoded controller
/// satisfies the coupled-matrix realizability identities exactly.
pub fn decode(decision: &[f64], spec: &ScenarioSpec) -> Result<ControllerRealization> {
    if decision.len() != spec.layout.len {
        return Err(Error::Dimension(format!(
            "decision vector has {} entries, scenario {} needs {}",
            decision.len(),
            spec.id,
            spec.layout.len
        )));
    }
    let theta_k = make_canonical_theta(2)?;
    let mut ctrl = ControllerRealization::new(
        block2(decision, DecisionLayout::A_K),
        block2(decision, DecisionLayout::B_K2),
        block2(decision, DecisionLayout::B_KY),
        block2(decision, DecisionLayout::C_K),
        theta_k,
    )?;
    if spec.layout.has_direct_coupling {
        ctrl = ctrl.with_direct_coupling(block2(decision, DecisionLayout::B_12))?;
    }
    if spec.layout.has_squeezers {
        let r = &decision[DecisionLayout::SQUEEZE];
        ctrl = ctrl.with_squeezers(SqueezerSet::new(r[0], r[1], r[2], r[3]));
    }
    Ok(ctrl)
}

/// Inverse of [`decode`] for controllers that fit the scenario layout.
pub fn encode(ctrl: &ControllerRealization, spec: &ScenarioSpec) -> Result<Vec<f64>> {
    let mut u = Vec::with_capacity(spec.layout.len);
    for m in [&ctrl.a_k, &ctrl.c_k, &ctrl.b_k2, &ctrl.b_ky] {
        u.extend(m.transpose().iter()); // transpose: DMatrix iterates column-major
    }
    if spec.layout.has_direct_coupling {
        let b_12 = ctrl
            .b_12
            .as_ref()
            .ok_or_else(|| Error::Config("scenario layout needs B_12 on the controller".into()))?;
        u.extend(b_12.transpose().iter());
    }
    if spec.layout.has_squeezers {
        let s = ctrl
            .squeezers
            .ok_or_else(|| Error::Config("scenario layout needs squeezers on the controller".into()))?;
        u.extend_from_slice(&[s.r_u, s.r_y, s.r_wk1, s.r_wk2]);
    }
    Ok(u)
}

/// Published reference values for a fixture controller.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct FixtureExpectation {
    pub j_inf: f64,
    pub k: f64,
}

/// A published controller together with the matrices exactly as printed,
/// for the identities that must reproduce them digit for digit.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub id: ScenarioId,
    pub controller: ControllerRealization,
    pub printed_b_k1: DMatrix<f64>,
    pub printed_b_21: Option<DMatrix<f64>>,
    pub expected: FixtureExpectation,
}

#[derive(Deserialize)]
struct FixtureFile {
    id: String,
    controller: std::collections::BTreeMap<String, MatrixJson>,
    #[serde(default)]
    squeezers: Option<std::collections::BTreeMap<String, [f64; 2]>>,
    expected: FixtureExpectation,
}

/// Parses a fixture from its JSON representation.
pub fn parse_fixture(json: &str) -> Result<Fixture> {
    let file: FixtureFile =
        serde_json::from_str(json).map_err(|e| Error::Fixture(format!("invalid fixture JSON: {e}")))?;
    let id: ScenarioId = file.id.parse()?;
    let get = |name: &str| -> Result<DMatrix<f64>> {
        file.controller
            .get(name)
            .ok_or_else(|| Error::Fixture(format!("fixture missing matrix {name}")))?
            .to_matrix()
    };
    let theta_k = make_canonical_theta(2)?;
    let mut ctrl =
        ControllerRealization::new(get("A_K")?, get("B_K2")?, get("B_Ky")?, get("C_K")?, theta_k.clone())?;

    let printed_b_21 = file.controller.get("B_21").map(|m| m.to_matrix()).transpose()?;
    if let Some(b_12) = file.controller.get("B_12") {
        ctrl = ctrl.with_direct_coupling(b_12.to_matrix()?)?;
    } else if let Some(b_21) = &printed_b_21 {
        ctrl = ctrl.with_direct_coupling(invert_b21_to_b12(b_21, &theta_k)?)?;
    }

    if let Some(sq) = &file.squeezers {
        let r_of = |name: &str| -> Result<f64> {
            let d = sq
                .get(name)
                .ok_or_else(|| Error::Fixture(format!("fixture missing squeezer {name}")))?;
            if d[0] <= 0.0 || d[1] <= 0.0 {
                return Err(Error::Fixture(format!("squeezer {name} has nonpositive diagonal")));
            }
            // S = diag(e^-r, e^r); the printed diagonals are rounded, use
            // the anti-squeezed entry to recover r.
            Ok(d[1].ln())
        };
        ctrl = ctrl.with_squeezers(SqueezerSet::new(
            r_of("s_u")?,
            r_of("s_y")?,
            r_of("s_wk1")?,
            r_of("s_wk2")?,
        ));
    }

    Ok(Fixture {
        id,
        controller: ctrl,
        printed_b_k1: get("B_K1")?,
        printed_b_21,
        expected: file.expected,
    })
}

/// The published controller for the given scenario, embedded from the
/// versioned fixture files.
pub fn published_fixture(id: ScenarioId) -> Result<Fixture> {
    let json = match id {
        ScenarioId::A => include_str!("../fixtures/controller_a.json"),
        ScenarioId::B => include_str!("../fixtures/controller_b.json"),
        ScenarioId::C => include_str!("../fixtures/controller_c.json"),
    };
    parse_fixture(json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{derive_b21, plant_pr_check, pr_residual};
    use approx::assert_abs_diff_eq;

    #[test]
    fn atom_cavity_entries() {
        let plant = build_atom_cavity_plant().unwrap();
        assert_eq!(plant.a[(0, 1)], 0.1);
        assert_eq!(plant.b[(1, 1)], -0.2);
        assert_eq!(plant.c[(0, 0)], 0.2);
        assert_eq!(plant.d_w[(0, 0)], 1.0);
        assert_eq!(plant.d_w[(0, 2)], 0.0);
    }

    #[test]
    fn atom_cavity_is_physically_realizable() {
        let plant = build_atom_cavity_plant().unwrap();
        assert!(plant_pr_check(&plant, 1e-9));
    }

    #[test]
    fn zeroed_dw_breaks_pr() {
        let mut plant = build_atom_cavity_plant().unwrap();
        plant.d_w = DMatrix::zeros(2, 4);
        assert!(!plant_pr_check(&plant, 1e-9));
    }

    #[test]
    fn decode_zero_vector() {
        let spec = ScenarioSpec::new(ScenarioId::A).unwrap();
        let ctrl = decode(&vec![0.0; 16], &spec).unwrap();
        assert_eq!(ctrl.b_k1.abs().max(), 0.0);
        let (_, k) = pr_residual(&ctrl).unwrap();
        assert_eq!(k, 0.0);
    }

    #[test]
    fn decode_layout_readback() {
        let spec = ScenarioSpec::new(ScenarioId::A).unwrap();
        let mut u = vec![0.0; 16];
        u[..4].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let ctrl = decode(&u, &spec).unwrap();
        assert_eq!(ctrl.a_k, DMatrix::identity(2, 2));
        assert_eq!(ctrl.c_k.abs().max(), 0.0);
    }

    #[test]
    fn decode_rejects_wrong_length() {
        let spec = ScenarioSpec::new(ScenarioId::B).unwrap();
        assert!(decode(&vec![0.0; 16], &spec).is_err());
    }

    #[test]
    fn encode_decode_round_trip_on_fixtures() {
        for id in [ScenarioId::A, ScenarioId::B, ScenarioId::C] {
            let spec = ScenarioSpec::new(id).unwrap();
            let fixture = published_fixture(id).unwrap();
            let u = encode(&fixture.controller, &spec).unwrap();
            assert_eq!(u.len(), spec.layout.len);
            let decoded = decode(&u, &spec).unwrap();
            assert_eq!(decoded.a_k, fixture.controller.a_k);
            assert_eq!(decoded.c_k, fixture.controller.c_k);
            assert_eq!(decoded.b_k1, fixture.controller.b_k1);
            assert_eq!(decoded.b_12, fixture.controller.b_12);
        }
    }

    #[test]
    fn fixture_a_matches_published_values() {
        let f = published_fixture(ScenarioId::A).unwrap();
        assert_eq!(f.controller.a_k[(0, 0)], -0.16276908);
        assert_eq!(f.controller.b_k1, f.printed_b_k1);
    }

    #[test]
    fn fixture_c_squeezers_and_couplings() {
        let f = published_fixture(ScenarioId::C).unwrap();
        let s = f.controller.squeezers.unwrap();
        let s_u = SqueezerSet::matrix(s.r_u);
        assert_abs_diff_eq!(s_u[(0, 0)], 10.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s_u[(1, 1)], 0.1, epsilon = 1e-10);
        assert_eq!(f.controller.b_12.as_ref().unwrap()[(0, 0)], -1.44522297e4);
        // printed S_y diagonals multiply to one within printed rounding
        assert!((2.06297180f64 * 0.48473760 - 1.0).abs() < 1e-6);
        let b_21 = derive_b21(f.controller.b_12.as_ref().unwrap(), &f.controller.theta_k).unwrap();
        assert_abs_diff_eq!(b_21, f.printed_b_21.clone().unwrap(), epsilon = 1e-12);
    }
}
