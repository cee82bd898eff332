//! Closed-loop assembly of plant and controller under the three coupling
//! configurations.
//!
//! The joint state is η = [x; ξ] and the joint noise w_cl = [w; w_K1; w_K2].
//! Indirect coupling is the degenerate case of direct coupling with
//! B_12 = B_21 = 0, and the squeezed configuration degenerates to the
//! direct one when all squeezing parameters are zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::system::{ControllerRealization, PlantModel, SqueezerSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingConfig {
    /// Plant and controller exchange signals only through the shared
    /// fields y and u.
    Indirect,
    /// Additional Hamiltonian couplings B_12 (plant←controller) and
    /// B_21 (controller←plant).
    DirectIndirect,
    /// Direct + indirect coupling with ideal squeezers on u, y, w_K1, w_K2.
    DirectIndirectSqueezed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub a_cl: DMatrix<f64>,
    pub b_cl: DMatrix<f64>,
    pub c_cl: DMatrix<f64>,
    pub mode: CouplingConfig,
}

/// Builds (𝓐, 𝓑, 𝓒) for the selected coupling mode.
///
/// Block layout (direct couplings and squeezers drop out in the simpler
/// modes):
///
/// ```text
/// 𝓐 = [ A                B S_u C_K + B_12 ]
///     [ B_Ky S_y C + B_21        A_K      ]
/// 𝓑 = [ B_w          B·(S_u S_wK1)   0    ]
///     [ B_Ky S_y D_w  B_K1 S_wK1  B_K2 S_wK2 ]
/// 𝓒 = [ C_z   D_z S_u C_K ]
/// ```
///
/// In the unsqueezed modes the middle 𝓑 block is plain `B`, matching the
/// printed closed-loop forms for each configuration.
pub fn assemble(
    plant: &PlantModel,
    ctrl: &ControllerRealization,
    mode: CouplingConfig,
) -> Result<ClosedLoopSystem> {
    let n = plant.state_dim();
    let nk = ctrl.state_dim();
    if plant.b.ncols() != ctrl.c_k.nrows() {
        return Err(Error::Dimension("plant control width must match C_K rows".into()));
    }
    if ctrl.b_ky.ncols() != plant.c.nrows() {
        return Err(Error::Dimension("B_Ky width must match plant output count".into()));
    }

    let (b_12, b_21) = match mode {
        CouplingConfig::Indirect => (DMatrix::zeros(n, nk), DMatrix::zeros(nk, n)),
        CouplingConfig::DirectIndirect | CouplingConfig::DirectIndirectSqueezed => {
            match (&ctrl.b_12, &ctrl.b_21) {
                (Some(b12), Some(b21)) => (b12.clone(), b21.clone()),
                _ => {
                    return Err(Error::Config(
                        "direct coupling mode needs B_12/B_21 on the controller".into(),
                    ))
                }
            }
        }
    };
    let squeezers = match mode {
        CouplingConfig::DirectIndirectSqueezed => match ctrl.squeezers {
            Some(s) => s,
            None => {
                return Err(Error::Config(
                    "squeezed coupling mode needs a squeezer set on the controller".into(),
                ))
            }
        },
        _ => SqueezerSet::identity(),
    };
    let (s_u, s_y) = (squeezers.s_u(), squeezers.s_y());
    let (s_wk1, s_wk2) = (squeezers.s_wk1(), squeezers.s_wk2());

    let (n_w, n_1, n_2) = (plant.b_w.ncols(), ctrl.b_k1.ncols(), ctrl.b_k2.ncols());
    let n_z = plant.c_z.nrows();

    let mut a_cl = DMatrix::zeros(n + nk, n + nk);
    a_cl.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    a_cl.view_mut((0, n), (n, nk))
        .copy_from(&(&plant.b * &s_u * &ctrl.c_k + &b_12));
    a_cl.view_mut((n, 0), (nk, n))
        .copy_from(&(&ctrl.b_ky * &s_y * &plant.c + &b_21));
    a_cl.view_mut((n, n), (nk, nk)).copy_from(&ctrl.a_k);

    // The printed unsqueezed configurations carry plain B in the middle
    // column; the squeezed one carries B S_u S_wK1.
    let b_mid = match mode {
        CouplingConfig::DirectIndirectSqueezed => &plant.b * &s_u * &s_wk1,
        _ => plant.b.clone(),
    };
    let mut b_cl = DMatrix::zeros(n + nk, n_w + n_1 + n_2);
    b_cl.view_mut((0, 0), (n, n_w)).copy_from(&plant.b_w);
    b_cl.view_mut((0, n_w), (n, n_1)).copy_from(&b_mid);
    b_cl.view_mut((n, 0), (nk, n_w))
        .copy_from(&(&ctrl.b_ky * &s_y * &plant.d_w));
    b_cl.view_mut((n, n_w), (nk, n_1))
        .copy_from(&(&ctrl.b_k1 * &s_wk1));
    b_cl.view_mut((n, n_w + n_1), (nk, n_2))
        .copy_from(&(&ctrl.b_k2 * &s_wk2));

    let mut c_cl = DMatrix::zeros(n_z, n + nk);
    c_cl.view_mut((0, 0), (n_z, n)).copy_from(&plant.c_z);
    c_cl.view_mut((0, n), (n_z, nk))
        .copy_from(&(&plant.d_z * &s_u * &ctrl.c_k));

    Ok(ClosedLoopSystem { a_cl, b_cl, c_cl, mode })
}
