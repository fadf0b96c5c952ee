//! The Z_N-vertex elliptic R-matrix.
//!
//! `R~(z) = z^{2/N-2} kappa^{-1}(z^2) theta[1/2,1/2](zeta) / theta[1/2,1/2](xi+zeta)
//! sum_alpha W_alpha(z) I_alpha (x) I_alpha^{-1}`, gauged to
//! `R = (g^{1/2} (x) g^{1/2}) R~ (g^{-1/2} (x) g^{-1/2})`, and
//! `R-hat(x) = tau_N(q^{1/2} x^{-1}) R(x)`.

mod heisenberg;
mod legs;

pub use heisenberg::{build_heisenberg, build_i, HeisenbergSet};
pub use legs::{
    embed, embed_one, permutation_op, scaled_residual, swap_legs, LegMatrix, COND_LIMIT,
};

use crate::error::{Error, Result};
use crate::params::{validate, LogParams, SpectralPoint, MAX_RANK};
use crate::specfun::{kappa_inv, tau_n, theta_char, theta_char_tracked, TruncationPolicy};
use crate::C64;

/// Largest rank accepted by checks that materialize three legs.
pub const MAX_RANK_THREE_LEGS: usize = 4;

fn rank_guard(rank: usize) -> Result<()> {
    if rank > MAX_RANK {
        return Err(Error::UnsupportedRank {
            rank,
            reason: "rank above the dense-matrix guard",
        });
    }
    Ok(())
}

pub(crate) fn three_leg_guard(rank: usize) -> Result<()> {
    if rank > MAX_RANK_THREE_LEGS {
        return Err(Error::UnsupportedRank {
            rank,
            reason: "three-leg checks are limited to rank 4",
        });
    }
    Ok(())
}

/// `W_{(a1,a2)}(z) = (1/N) theta[1/2+a1/N, 1/2+a2/N](xi+zeta/N) /
/// theta[1/2+a1/N, 1/2+a2/N](zeta/N)`.
pub fn w_coeff(
    a1: usize,
    a2: usize,
    xi: C64,
    zeta: C64,
    tau: C64,
    rank: usize,
    trunc: &TruncationPolicy,
) -> Result<C64> {
    let n = rank as f64;
    let (g1, g2) = (0.5 + a1 as f64 / n, 0.5 + a2 as f64 / n);
    let num = theta_char(g1, g2, xi + zeta / n, tau, trunc)?;
    let at = zeta / n;
    let den = theta_char_tracked(g1, g2, at, tau, trunc)?.nonzero(
        trunc.pole_guard,
        || format!("theta[{g1},{g2}](zeta/N) in W_({a1},{a2})"),
        at,
    )?;
    Ok(num / (n * den))
}

/// The scalar prefactor of `R~`.
fn r_prefactor(z: SpectralPoint, params: &LogParams, trunc: &TruncationPolicy) -> Result<C64> {
    let n = params.rank as f64;
    let kinv = kappa_inv(z, params.zeta, params.tau, params.rank, trunc)?;
    let top = theta_char(0.5, 0.5, params.zeta, params.tau, trunc)?;
    let at = z.xi + params.zeta;
    let bottom = theta_char_tracked(0.5, 0.5, at, params.tau, trunc)?.nonzero(
        trunc.pole_guard,
        || "theta[1/2,1/2](xi+zeta) in the R prefactor".into(),
        at,
    )?;
    Ok(z.pow(2.0 / n - 2.0) * kinv * top / bottom)
}

/// `R~(z)` before the gauge transform.
pub fn build_r_tilde(
    z: SpectralPoint,
    params: &LogParams,
    trunc: &TruncationPolicy,
) -> Result<LegMatrix> {
    validate(params, false)?;
    rank_guard(params.rank)?;
    let rank = params.rank;
    let hs = build_heisenberg(rank)?;
    let mut sum = LegMatrix::zeros(rank, 2);
    for a1 in 0..rank {
        for a2 in 0..rank {
            let w = w_coeff(a1, a2, z.xi, params.zeta, params.tau, rank, trunc)?;
            let i = hs.build_i(a1, a2)?;
            // I is unitary.
            let i_inv = LegMatrix::from_matrix(rank, 1, i.matrix().adjoint())?;
            sum = &sum + &i.kron(&i_inv)?.scale(w);
        }
    }
    Ok(sum.scale(r_prefactor(z, params, trunc)?))
}

/// `R(z) = (g^{1/2} (x) g^{1/2}) R~(z) (g^{-1/2} (x) g^{-1/2})`.
pub fn build_r(
    z: SpectralPoint,
    params: &LogParams,
    trunc: &TruncationPolicy,
) -> Result<LegMatrix> {
    let tilde = build_r_tilde(z, params, trunc)?;
    let hs = build_heisenberg(params.rank)?;
    let gauge = hs.sqrt_g.kron(&hs.sqrt_g)?;
    let gauge_inv = LegMatrix::from_matrix(params.rank, 2, gauge.matrix().adjoint())?;
    Ok(&(&gauge * &tilde) * &gauge_inv)
}

/// `R-hat(x) = tau_N(q^{1/2} x^{-1}) R(x)`, at nome `p*` when `starred`.
pub fn build_r_hat(
    z: SpectralPoint,
    params: &LogParams,
    starred: bool,
    trunc: &TruncationPolicy,
) -> Result<LegMatrix> {
    let eff = if starred {
        validate(params, true)?;
        params.starred()?
    } else {
        *params
    };
    let r = build_r(z, &eff, trunc)?;
    let t = tau_n(z.inv().shift_q(0.5, eff.zeta), eff.zeta, eff.rank, trunc)?;
    Ok(r.scale(t))
}

/// `M_{21} = P_{12} M_{12} P_{12}`.
pub fn r21(m: &LegMatrix) -> Result<LegMatrix> {
    swap_legs(m)
}
