//! Parameter bookkeeping in logarithmic coordinates.
//!
//! `q = exp(i pi zeta)`, `p = exp(2 i pi tau)`, `z = exp(i pi xi)`. The square
//! root `-p^{1/2}` is *defined* as `exp(i pi (tau + 1))`; every power of it and
//! every `q^a` shift is an addition on the log coordinate.

use std::f64::consts::PI;
use std::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Largest rank for which R-matrices are materialized.
pub const MAX_RANK: usize = 6;

/// Tolerance of the on-surface invariant after [`solve_surface_c`].
pub const SURFACE_TOL: f64 = 1e-12;

/// `exp(i pi l)`.
#[inline]
pub fn exp_i_pi(l: C64) -> C64 {
    (C64::new(0.0, PI) * l).exp()
}

/// A rank together with `(zeta, tau)` and an optional central charge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogParams {
    pub rank: usize,
    pub zeta: C64,
    pub tau: C64,
    pub c: Option<C64>,
}

impl LogParams {
    pub fn new(rank: usize, zeta: C64, tau: C64) -> Result<Self> {
        if rank < 2 {
            return Err(Error::UnsupportedRank {
                rank,
                reason: "rank must be at least 2",
            });
        }
        Ok(LogParams {
            rank,
            zeta,
            tau,
            c: None,
        })
    }

    pub fn with_c(mut self, c: C64) -> Self {
        self.c = Some(c);
        self
    }

    /// Sets `c` to the principal solution on `Sigma_{N,n}`.
    pub fn on_surface(self, n: i64) -> Result<Self> {
        let c = solve_surface_c(self.rank, n, self.zeta, self.tau)?;
        Ok(self.with_c(c))
    }

    pub fn q(&self) -> C64 {
        exp_i_pi(self.zeta)
    }

    pub fn p(&self) -> C64 {
        exp_i_pi(2.0 * self.tau)
    }

    /// Log coordinate of `-p^{1/2}`.
    pub fn minus_sqrt_p_log(&self) -> C64 {
        self.tau + 1.0
    }

    /// `tau*` with `p* = p q^{-2c}`; `None` while `c` is unset.
    pub fn tau_star(&self) -> Option<C64> {
        self.c.map(|c| p_star_tau(self.tau, self.zeta, c))
    }

    /// The same parameters with `p` replaced by `p*`.
    pub fn starred(&self) -> Result<LogParams> {
        let tau = self
            .tau_star()
            .ok_or_else(|| Error::ParameterBounds(vec!["c unset".into()]))?;
        Ok(LogParams { tau, ..*self })
    }

    /// `|(-p^{1/2})^n q^{c+N} - 1|`, evaluated by exponentiating the log sum.
    pub fn surface_defect(&self, n: i64) -> Option<f64> {
        let c = self.c?;
        let l = n as f64 * self.minus_sqrt_p_log() + (c + self.rank as f64) * self.zeta;
        Some((exp_i_pi(l) - 1.0).norm())
    }
}

/// Log coordinate `xi` of a spectral parameter `z = exp(i pi xi)`.
///
/// Multiplication and division of spectral parameters add and subtract log
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub xi: C64,
}

impl SpectralPoint {
    pub const ONE: SpectralPoint = SpectralPoint {
        xi: C64::new(0.0, 0.0),
    };

    pub fn new(xi: C64) -> Self {
        SpectralPoint { xi }
    }

    pub fn from_parts(re: f64, im: f64) -> Self {
        SpectralPoint {
            xi: C64::new(re, im),
        }
    }

    pub fn z(&self) -> C64 {
        exp_i_pi(self.xi)
    }

    pub fn inv(self) -> Self {
        SpectralPoint { xi: -self.xi }
    }

    /// `q^a z`.
    pub fn shift_q(self, a: f64, zeta: C64) -> Self {
        SpectralPoint {
            xi: self.xi + a * zeta,
        }
    }

    /// `(-p^{1/2})^n z`.
    pub fn shift_minus_sqrt_p(self, n: i64, tau: C64) -> Self {
        SpectralPoint {
            xi: self.xi + n as f64 * (tau + 1.0),
        }
    }

    /// `z^a` with the branch fixed by the log coordinate.
    pub fn pow(&self, a: f64) -> C64 {
        exp_i_pi(a * self.xi)
    }

    pub fn is_finite(&self) -> bool {
        self.xi.re.is_finite() && self.xi.im.is_finite()
    }
}

impl Mul for SpectralPoint {
    type Output = SpectralPoint;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: SpectralPoint) -> SpectralPoint {
        SpectralPoint {
            xi: self.xi + rhs.xi,
        }
    }
}

impl Div for SpectralPoint {
    type Output = SpectralPoint;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: SpectralPoint) -> SpectralPoint {
        SpectralPoint {
            xi: self.xi - rhs.xi,
        }
    }
}

/// Labels of a surface `Sigma_{N,n}` and, optionally, of the classical line
/// `q^{Nh} = p^{1-beta}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub rank: usize,
    pub n: i64,
    pub h: Option<i64>,
    pub beta: Option<f64>,
}

impl SurfaceSpec {
    pub fn new(rank: usize, n: i64) -> Self {
        SurfaceSpec {
            rank,
            n,
            h: None,
            beta: None,
        }
    }

    pub fn with_classical_line(mut self, h: i64, beta: f64) -> Self {
        self.h = Some(h);
        self.beta = Some(beta);
        self
    }

    /// Sets `c` on `params` from this surface and checks the on-surface
    /// invariant.
    pub fn apply(&self, params: &LogParams) -> Result<LogParams> {
        if params.rank != self.rank {
            return Err(Error::InvalidArgument(format!(
                "surface rank {} does not match parameter rank {}",
                self.rank, params.rank
            )));
        }
        let out = params.on_surface(self.n)?;
        let defect = out.surface_defect(self.n).unwrap_or(f64::INFINITY);
        if !(defect < SURFACE_TOL) {
            return Err(Error::InvalidArgument(format!(
                "surface solve left defect {defect:e} on Sigma_{{{},{}}}",
                self.rank, self.n
            )));
        }
        Ok(out)
    }
}

/// Principal central charge on `Sigma_{N,n}`: `c = -N - n (tau + 1) / zeta`.
pub fn solve_surface_c(rank: usize, n: i64, zeta: C64, tau: C64) -> Result<C64> {
    if zeta == C64::new(0.0, 0.0) {
        return Err(Error::DegenerateParameter(
            "zeta = 0 leaves q^{c+N} independent of c",
        ));
    }
    Ok(-(rank as f64) - n as f64 * (tau + 1.0) / zeta)
}

/// `tau` on the deformed classical line `q^{Nh} = p^{1-beta}`.
pub fn classical_tau(rank: usize, h: i64, zeta: C64, beta: f64) -> Result<C64> {
    if h == 0 {
        return Err(Error::DegenerateParameter(
            "h = 0 is excluded from the classical line",
        ));
    }
    if beta == 1.0 {
        return Err(Error::DegenerateParameter(
            "beta = 1 makes p^{1-beta} constant",
        ));
    }
    Ok((rank as f64 * h as f64) * zeta / (2.0 * (1.0 - beta)))
}

/// `tau* = tau - c zeta`, so that `exp(2 i pi tau*) = p q^{-2c}`.
pub fn p_star_tau(tau: C64, zeta: C64, c: C64) -> C64 {
    tau - c * zeta
}

/// Checks `|q| < 1`, `|p| < 1` and, when `need_star`, `|p*| < 1`. Every
/// violated bound is named in the error.
pub fn validate(params: &LogParams, need_star: bool) -> Result<()> {
    let mut violated = Vec::new();
    if params.rank < 2 {
        violated.push(format!("N={} < 2", params.rank));
    }
    if !(params.zeta.im > 0.0) {
        violated.push("|q|≥1".to_string());
    }
    if !(params.tau.im > 0.0) {
        violated.push("|p|≥1".to_string());
    }
    if need_star {
        match params.tau_star() {
            Some(ts) if ts.im > 0.0 => {}
            Some(_) => violated.push("|p*|≥1".to_string()),
            None => violated.push("c unset".to_string()),
        }
    }
    if violated.is_empty() {
        Ok(())
    } else {
        Err(Error::ParameterBounds(violated))
    }
}
