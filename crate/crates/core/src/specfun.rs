//! Scalar special functions: theta functions with characteristics, single and
//! double q-Pochhammer products, `Theta_t`, `tau_N` and the normalization
//! `1/kappa` of the R-matrix.
//!
//! Every infinite sum or product is truncated adaptively. Hitting the term cap
//! is an error. Denominators are guarded: a value smaller than `pole_guard`
//! times the largest partial product (or largest term, for sums) is refused.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{exp_i_pi, SpectralPoint};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationPolicy {
    /// Relative size below which a term or factor counts as tail.
    pub tail_eps: f64,
    /// Cap on the number of terms per summation or product index.
    pub max_terms: usize,
    /// Relative threshold of the near-pole guard.
    pub pole_guard: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tail_eps: 1e-18,
            max_terms: 400,
            pole_guard: 1e-13,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_eps > 0.0) || self.max_terms < 1 || !(self.pole_guard > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation policy needs tail_eps > 0, max_terms >= 1, pole_guard > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn with_tail_eps(mut self, tail_eps: f64) -> Self {
        self.tail_eps = tail_eps;
        self
    }

    pub fn with_pole_guard(mut self, pole_guard: f64) -> Self {
        self.pole_guard = pole_guard;
        self
    }
}

/// A value together with the magnitude it was assembled from (largest
/// partial product or largest summand). The ratio of the two measures how
/// close the value is to a zero.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tracked {
    pub value: C64,
    pub peak: f64,
}

impl Tracked {
    fn one() -> Self {
        Tracked {
            value: C64::new(1.0, 0.0),
            peak: 1.0,
        }
    }

    fn times(self, other: Tracked) -> Tracked {
        Tracked {
            value: self.value * other.value,
            peak: self.peak * other.peak,
        }
    }

    fn absorb(&mut self, factor: C64) {
        self.value *= factor;
        self.peak = self.peak.max(self.value.norm());
    }

    /// The value, or a near-pole error when it is numerically zero.
    pub fn nonzero(self, guard: f64, factor: impl FnOnce() -> String, at: C64) -> Result<C64> {
        if self.value.norm() < guard * self.peak || !self.value.norm().is_finite() {
            Err(Error::NearPole {
                factor: factor(),
                at,
            })
        } else {
            Ok(self.value)
        }
    }
}

pub(crate) fn theta_char_tracked(
    g1: f64,
    g2: f64,
    xi: C64,
    tau: C64,
    trunc: &TruncationPolicy,
) -> Result<Tracked> {
    if !(tau.im > 0.0) {
        return Err(Error::DivergentNome(tau.im));
    }
    let shifted = xi + g2;
    let term = |m: f64| {
        let mg = m + g1;
        (C64::new(0.0, PI) * (mg * mg * tau + 2.0 * mg * shifted)).exp()
    };
    // The modulus of the summand is a Gaussian in m; centring the symmetric
    // window on its peak makes the pairwise tail test monotone.
    let center = (-shifted.im / tau.im - g1).round();
    let first = term(center);
    let mut sum = first;
    let mut peak = first.norm();
    for k in 1..=trunc.max_terms {
        let a = term(center + k as f64);
        let b = term(center - k as f64);
        let pair = a.norm() + b.norm();
        if pair < trunc.tail_eps * (sum.norm() + 1.0) {
            return Ok(Tracked { value: sum, peak });
        }
        peak = peak.max(a.norm()).max(b.norm());
        sum += a + b;
    }
    Err(Error::TruncationFailure {
        what: "theta_char",
        cap: trunc.max_terms,
    })
}

/// Jacobi theta function with characteristics
/// `sum_m exp(i pi (m+g1)^2 tau + 2 i pi (m+g1)(xi+g2))`.
pub fn theta_char(g1: f64, g2: f64, xi: C64, tau: C64, trunc: &TruncationPolicy) -> Result<C64> {
    theta_char_tracked(g1, g2, xi, tau, trunc).map(|t| t.value)
}

pub(crate) fn pochhammer_tracked(x: C64, t: C64, trunc: &TruncationPolicy) -> Result<Tracked> {
    if !(t.norm() < 1.0) {
        return Err(Error::DivergentProduct {
            name: "t",
            modulus: t.norm(),
        });
    }
    let mut acc = Tracked::one();
    let mut f = x;
    for _ in 0..trunc.max_terms {
        if f.norm() < trunc.tail_eps {
            return Ok(acc);
        }
        acc.absorb(1.0 - f);
        f *= t;
    }
    Err(Error::TruncationFailure {
        what: "pochhammer",
        cap: trunc.max_terms,
    })
}

/// `(x; t)_inf = prod_{k >= 0} (1 - x t^k)`.
pub fn pochhammer(x: C64, t: C64, trunc: &TruncationPolicy) -> Result<C64> {
    pochhammer_tracked(x, t, trunc).map(|p| p.value)
}

pub(crate) fn triple_pochhammer_tracked(
    x: C64,
    a: C64,
    b: C64,
    trunc: &TruncationPolicy,
) -> Result<Tracked> {
    if !(a.norm() < 1.0) {
        return Err(Error::DivergentProduct {
            name: "a",
            modulus: a.norm(),
        });
    }
    if !(b.norm() < 1.0) {
        return Err(Error::DivergentProduct {
            name: "b",
            modulus: b.norm(),
        });
    }
    let mut acc = Tracked::one();
    let mut row = x;
    for _ in 0..trunc.max_terms {
        if row.norm() < trunc.tail_eps {
            return Ok(acc);
        }
        let mut f = row;
        let mut closed = false;
        for _ in 0..trunc.max_terms {
            if f.norm() < trunc.tail_eps {
                closed = true;
                break;
            }
            acc.absorb(1.0 - f);
            f *= b;
        }
        if !closed {
            return Err(Error::TruncationFailure {
                what: "triple_pochhammer",
                cap: trunc.max_terms,
            });
        }
        row *= a;
    }
    Err(Error::TruncationFailure {
        what: "triple_pochhammer",
        cap: trunc.max_terms,
    })
}

/// `(x; a, b)_inf = prod_{j,k >= 0} (1 - x a^j b^k)`.
pub fn triple_pochhammer(x: C64, a: C64, b: C64, trunc: &TruncationPolicy) -> Result<C64> {
    triple_pochhammer_tracked(x, a, b, trunc).map(|p| p.value)
}

pub(crate) fn big_theta_tracked(x: C64, t: C64, trunc: &TruncationPolicy) -> Result<Tracked> {
    if !(t.norm() < 1.0) {
        return Err(Error::DivergentProduct {
            name: "t",
            modulus: t.norm(),
        });
    }
    if x == C64::new(0.0, 0.0) {
        return Err(Error::NearPole {
            factor: "Theta_t(x) at x = 0".into(),
            at: x,
        });
    }
    Ok(pochhammer_tracked(x, t, trunc)?
        .times(pochhammer_tracked(t / x, t, trunc)?)
        .times(pochhammer_tracked(t, t, trunc)?))
}

/// `Theta_t(x) = (x; t)_inf (t/x; t)_inf (t; t)_inf`.
pub fn big_theta(x: C64, t: C64, trunc: &TruncationPolicy) -> Result<C64> {
    big_theta_tracked(x, t, trunc).map(|p| p.value)
}

/// `tau_N(z) = z^{2/N-2} Theta_{q^{2N}}(q z^2) / Theta_{q^{2N}}(q z^{-2})`.
pub fn tau_n(z: SpectralPoint, zeta: C64, rank: usize, trunc: &TruncationPolicy) -> Result<C64> {
    if !(zeta.im > 0.0) {
        return Err(Error::ParameterBounds(vec!["|q|≥1".into()]));
    }
    let n = rank as f64;
    let t = exp_i_pi(2.0 * n * zeta);
    let num_arg = exp_i_pi(zeta + 2.0 * z.xi);
    let den_arg = exp_i_pi(zeta - 2.0 * z.xi);
    let num = big_theta_tracked(num_arg, t, trunc)?.value;
    let den = big_theta_tracked(den_arg, t, trunc)?.nonzero(
        trunc.pole_guard,
        || "Theta_{q^2N}(q z^-2) in tau_N".into(),
        den_arg,
    )?;
    Ok(z.pow(2.0 / n - 2.0) * num / den)
}

/// `1/kappa(z^2)`: ratio of eight double products with bases `(p, q^{2N})`.
pub fn kappa_inv(
    z: SpectralPoint,
    zeta: C64,
    tau: C64,
    rank: usize,
    trunc: &TruncationPolicy,
) -> Result<C64> {
    let n = rank as f64;
    let p = exp_i_pi(2.0 * tau);
    let b = exp_i_pi(2.0 * n * zeta);
    let z2 = 2.0 * z.xi;
    // Log coordinates (in units of i pi) of the eight arguments.
    let two_n = 2.0 * n * zeta;
    let num_logs = [
        two_n - z2,
        2.0 * zeta + z2,
        2.0 * tau - z2,
        2.0 * tau + (2.0 * n - 2.0) * zeta + z2,
    ];
    let den_logs = [
        two_n + z2,
        2.0 * zeta - z2,
        2.0 * tau + z2,
        2.0 * tau + (2.0 * n - 2.0) * zeta - z2,
    ];
    let mut value = C64::new(1.0, 0.0);
    for l in num_logs {
        value *= triple_pochhammer_tracked(exp_i_pi(l), p, b, trunc)?.value;
    }
    for l in den_logs {
        let at = exp_i_pi(l);
        value /= triple_pochhammer_tracked(at, p, b, trunc)?.nonzero(
            trunc.pole_guard,
            || "(x; p, q^2N) denominator of 1/kappa".into(),
            at,
        )?;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tp() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / a.norm().max(1.0)
    }

    #[test]
    fn odd_theta_vanishes_at_origin() {
        let v = theta_char(0.5, 0.5, c(0.0, 0.0), c(0.0, 0.9), &tp()).unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn theta_shift_by_one() {
        let (g1, g2) = (0.5 + 1.0 / 3.0, 0.5 + 2.0 / 3.0);
        let (xi, tau) = (c(0.13, -0.07), c(0.1, 0.8));
        let a = theta_char(g1, g2, xi + 1.0, tau, &tp()).unwrap();
        let b = theta_char(g1, g2, xi, tau, &tp()).unwrap();
        assert!(rel(a, exp_i_pi(c(2.0 * g1, 0.0)) * b) < 1e-13);
    }

    #[test]
    fn theta_matches_fixed_window() {
        let (xi, tau) = (c(0.1, 0.0), c(0.0, 0.9));
        let oracle: C64 = (-200..=200)
            .map(|m| {
                let m = m as f64;
                (C64::new(0.0, PI) * (m * m * tau + 2.0 * m * xi)).exp()
            })
            .sum();
        let v = theta_char(0.0, 0.0, xi, tau, &tp()).unwrap();
        assert!(rel(v, oracle) < 1e-15);
    }

    #[test]
    fn theta_far_from_real_axis() {
        // The summand peaks far from m = 0 here; the centred window still
        // reproduces the shifted quasi-periodicity.
        let (g1, g2, tau) = (0.5, 0.5, c(0.05, 0.7));
        let xi = c(0.2, -2.3);
        let a = theta_char(g1, g2, xi + tau, tau, &tp()).unwrap();
        let b = theta_char(g1, g2, xi, tau, &tp()).unwrap();
        // theta(xi + tau) = exp(-i pi tau - 2 i pi (xi + g2)) theta(xi)
        let factor = (C64::new(0.0, -PI) * (tau + 2.0 * (xi + g2))).exp();
        assert!((a - factor * b).norm() / a.norm() < 1e-12);
    }

    #[test]
    fn theta_rejects_bad_nome() {
        assert_eq!(
            theta_char(0.0, 0.0, c(0.0, 0.0), c(0.0, 0.0), &tp()),
            Err(Error::DivergentNome(0.0))
        );
    }

    #[test]
    fn theta_cap_is_an_error() {
        let tight = TruncationPolicy {
            max_terms: 1,
            ..tp()
        };
        assert!(matches!(
            theta_char(0.0, 0.0, c(0.0, 0.0), c(0.0, 0.01), &tight),
            Err(Error::TruncationFailure { .. })
        ));
    }

    #[test]
    fn triple_product_trivial_values() {
        let (a, b) = (c(0.2, 0.1), c(-0.1, 0.3));
        assert_eq!(
            triple_pochhammer(c(0.0, 0.0), a, b, &tp()).unwrap(),
            c(1.0, 0.0)
        );
        assert_eq!(
            triple_pochhammer(c(1.0, 0.0), a, b, &tp()).unwrap(),
            c(0.0, 0.0)
        );
        assert!(matches!(
            triple_pochhammer(c(0.5, 0.0), c(1.0, 0.0), b, &tp()),
            Err(Error::DivergentProduct { name: "a", .. })
        ));
    }

    #[test]
    fn triple_product_matches_fixed_grid() {
        let (x, a, b) = (c(0.3, 0.0), c(0.2, 0.0), c(0.1, 0.0));
        let mut oracle = c(1.0, 0.0);
        for j in 0..60 {
            for k in 0..60 {
                oracle *= 1.0 - x * a.powi(j) * b.powi(k);
            }
        }
        assert!(rel(triple_pochhammer(x, a, b, &tp()).unwrap(), oracle) < 1e-15);
    }

    #[test]
    fn big_theta_values() {
        let t = c(0.2, 0.05);
        assert_eq!(big_theta(c(1.0, 0.0), t, &tp()).unwrap(), c(0.0, 0.0));
        let x = c(0.7, -0.4);
        let a = big_theta(x, t, &tp()).unwrap();
        let b = big_theta(t / x, t, &tp()).unwrap();
        assert!(rel(a, b) < 1e-14);
        assert!(matches!(
            big_theta(c(0.0, 0.0), t, &tp()),
            Err(Error::NearPole { .. })
        ));

        let (x, t) = (c(0.5, 0.0), c(0.2, 0.0));
        let mut oracle = c(1.0, 0.0);
        for k in 0..200 {
            oracle *= (1.0 - x * t.powi(k)) * (1.0 - t / x * t.powi(k)) * (1.0 - t * t.powi(k));
        }
        assert!(rel(big_theta(x, t, &tp()).unwrap(), oracle) < 1e-15);
    }

    #[test]
    fn tau_n_at_one_and_properties() {
        let zeta = c(0.05, 0.3);
        for rank in 2..=4 {
            let one = tau_n(SpectralPoint::ONE, zeta, rank, &tp()).unwrap();
            assert!(rel(one, c(1.0, 0.0)) < 1e-15);
            let z = SpectralPoint::from_parts(0.17, 0.06);
            let v = tau_n(z, zeta, rank, &tp()).unwrap();
            let shifted = tau_n(z.shift_q(rank as f64, zeta), zeta, rank, &tp()).unwrap();
            assert!(rel(shifted, v) < 1e-10);
            let inv = tau_n(z.inv(), zeta, rank, &tp()).unwrap();
            assert!(rel(inv * v, c(1.0, 0.0)) < 1e-10);
        }
    }

    #[test]
    fn tau_n_refuses_pole() {
        // q z^{-2} = 1 when z^2 = q.
        let zeta = c(0.0, 0.3);
        let z = SpectralPoint::new(zeta / 2.0);
        assert!(matches!(
            tau_n(z, zeta, 2, &tp()),
            Err(Error::NearPole { .. })
        ));
    }

    #[test]
    fn kappa_inv_at_one() {
        let v = kappa_inv(SpectralPoint::ONE, c(0.05, 0.3), c(0.1, 0.9), 3, &tp()).unwrap();
        assert!(rel(v, c(1.0, 0.0)) < 1e-14);
    }

    #[test]
    fn kappa_inv_matches_fixed_grid() {
        let (zeta, tau, rank) = (c(0.05, 0.3), c(0.1, 0.9), 2usize);
        let z = SpectralPoint::from_parts(0.21, -0.04);
        let p = exp_i_pi(2.0 * tau);
        let b = exp_i_pi(2.0 * rank as f64 * zeta);
        let q = exp_i_pi(zeta);
        let z2 = z.z() * z.z();
        let grid = |x: C64| {
            let mut r = c(1.0, 0.0);
            for j in 0..60 {
                for k in 0..60 {
                    r *= 1.0 - x * p.powi(j) * b.powi(k);
                }
            }
            r
        };
        let n = rank as i32;
        let oracle = grid(b / z2)
            * grid(q * q * z2)
            * grid(p / z2)
            * grid(p * q.powi(2 * n - 2) * z2)
            / (grid(b * z2) * grid(q * q / z2) * grid(p * z2) * grid(p * q.powi(2 * n - 2) / z2));
        let v = kappa_inv(z, zeta, tau, rank, &tp()).unwrap();
        assert!(rel(v, oracle) < 1e-13);
    }

    #[test]
    fn repeated_evaluation_is_bit_identical() {
        let (zeta, tau) = (c(0.05, 0.3), c(0.1, 0.9));
        let z = SpectralPoint::from_parts(0.21, -0.04);
        let a = kappa_inv(z, zeta, tau, 3, &tp()).unwrap();
        let b = kappa_inv(z, zeta, tau, 3, &tp()).unwrap();
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}
