//! Scalar structure functions `F_N`, `G_N`, `Y_N`, their multi-point products
//! and the identities tying them together.
//!
//! Every `Theta_{q^{2N}}` argument is built in log coordinates: `x^2` is `2 xi`,
//! `p^k` is `2 k tau`, `q^2` is `2 zeta`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::params::{classical_tau, exp_i_pi, validate, LogParams, SpectralPoint, SurfaceSpec};
use crate::report::{CheckReport, ParamRecord};
use crate::specfun::{big_theta_tracked, tau_n, TruncationPolicy};
use crate::C64;

/// Arguments of a structure function evaluated at a single point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructArgs {
    pub rank: usize,
    pub r_or_n: i64,
    pub x: SpectralPoint,
    pub zeta: C64,
    pub tau: C64,
    pub trunc: TruncationPolicy,
}

impl StructArgs {
    pub fn structure(&self) -> Result<Structure> {
        Structure::new(self.rank, self.zeta, self.tau, self.trunc)
    }
}

pub fn f_struct(args: &StructArgs) -> Result<C64> {
    args.structure()?.f(args.r_or_n, args.x)
}

/// `G_N(n, z)`; the point `args.x` is unused.
pub fn g_struct(args: &StructArgs, z: SpectralPoint) -> Result<C64> {
    args.structure()?.g(args.r_or_n, z)
}

pub fn y_struct(args: &StructArgs) -> Result<C64> {
    args.structure()?.y(args.r_or_n, args.x)
}

pub fn f_multi(args: &StructArgs, s: usize) -> Result<C64> {
    args.structure()?.f_multi(args.r_or_n, args.x, s)
}

#[allow(clippy::too_many_arguments)]
pub fn w_exchange_factor(
    rank: usize,
    i: usize,
    j: usize,
    n: i64,
    x: SpectralPoint,
    zeta: C64,
    tau: C64,
    trunc: &TruncationPolicy,
) -> Result<C64> {
    Structure::new(rank, zeta, tau, *trunc)?.w_exchange_factor(i, j, n, x)
}

/// Rank, nomes and truncation shared by all structure functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Structure {
    pub rank: usize,
    pub zeta: C64,
    pub tau: C64,
    pub trunc: TruncationPolicy,
}

impl Structure {
    pub fn new(rank: usize, zeta: C64, tau: C64, trunc: TruncationPolicy) -> Result<Self> {
        validate(&LogParams::new(rank, zeta, tau)?, false)?;
        Ok(Structure {
            rank,
            zeta,
            tau,
            trunc,
        })
    }

    pub fn from_params(params: &LogParams, trunc: TruncationPolicy) -> Result<Self> {
        Structure::new(params.rank, params.zeta, params.tau, trunc)
    }

    fn nome(&self) -> C64 {
        exp_i_pi(2.0 * self.rank as f64 * self.zeta)
    }

    /// `Theta_{q^{2N}}(exp(i pi l))` as `exp(i pi log) * value`, with the argument
    /// first moved into the annulus `|q^{2N}| < |x| <= 1` by quasi-periodicity.
    /// Large shifts by powers of `p` would otherwise overflow the products.
    fn theta_split(&self, l: C64, den: Option<&str>) -> Result<(C64, C64)> {
        let period = 2.0 * self.rank as f64 * self.zeta;
        let m = (l.im / period.im).floor();
        let l0 = l - period * m;
        let at = exp_i_pi(l0);
        let tracked = big_theta_tracked(at, self.nome(), &self.trunc)?;
        let value = match den {
            Some(what) => tracked.nonzero(
                self.trunc.pole_guard,
                || format!("Theta_{{q^2N}} denominator of {what}"),
                exp_i_pi(l),
            )?,
            None => tracked.value,
        };
        let log = m - m * l0 - period * (m * (m - 1.0) / 2.0);
        Ok((log, value))
    }

    /// `prod num / prod den` of `Theta_{q^{2N}}` values, combined in log form.
    fn theta_ratio(&self, num: &[C64], den: &[C64], what: &str) -> Result<C64> {
        let (mut log_num, mut v_num) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let (mut log_den, mut v_den) = (log_num, v_num);
        for &l in num {
            let (a, b) = self.theta_split(l, None)?;
            log_num += a;
            v_num *= b;
        }
        for &l in den {
            let (a, b) = self.theta_split(l, Some(what))?;
            log_den += a;
            v_den *= b;
        }
        Ok(exp_i_pi(log_num - log_den) * (v_num / v_den))
    }

    /// The `k`-th factor of `F_N(r, x)` for `r > 0`.
    fn f_pos_factor(&self, k: i64, xi: C64) -> Result<C64> {
        let (x2, z2, kt) = (2.0 * xi, 2.0 * self.zeta, 2.0 * k as f64 * self.tau);
        self.theta_ratio(&[-x2 - kt, x2 + kt], &[-x2 + z2 - kt, x2 + z2 + kt], "F")
    }

    /// The `k`-th factor of `F_N(r, x)` for `r < 0`.
    fn f_neg_factor(&self, k: i64, xi: C64) -> Result<C64> {
        let (x2, z2, kt) = (2.0 * xi, 2.0 * self.zeta, 2.0 * k as f64 * self.tau);
        self.theta_ratio(&[-x2 + z2 + kt, x2 + z2 - kt], &[-x2 + kt, x2 - kt], "F")
    }

    /// `F_N(r, x)`; `F_N(0, x) = 1`.
    pub fn f(&self, r: i64, x: SpectralPoint) -> Result<C64> {
        let weight = 2.0 * (1.0 - 1.0 / self.rank as f64);
        let mut v = exp_i_pi(r as f64 * weight * self.zeta);
        if r > 0 {
            for k in 0..r {
                v *= self.f_pos_factor(k, x.xi)?;
            }
        } else {
            for k in 1..=-r {
                v *= self.f_neg_factor(k, x.xi)?;
            }
        }
        Ok(v)
    }

    fn y_factor(&self, k: i64, xi: C64) -> Result<C64> {
        let (x2, z2, kt) = (2.0 * xi, 2.0 * self.zeta, 2.0 * k as f64 * self.tau);
        self.theta_ratio(
            &[x2 - kt, x2 - kt, x2 + z2 + kt, x2 - z2 + kt],
            &[x2 + kt, x2 + kt, x2 + z2 - kt, x2 - z2 - kt],
            "Y",
        )
    }

    /// `Y_N(r, x)`; `k = 1..r` for `r > 0`, `k = 0..|r|-1` for `r < 0`.
    pub fn y(&self, r: i64, x: SpectralPoint) -> Result<C64> {
        let ks: Vec<i64> = if r > 0 {
            (1..=r).collect()
        } else {
            (0..-r).collect()
        };
        let mut v = C64::new(1.0, 0.0);
        for k in ks {
            v *= self.y_factor(k, x.xi)?;
        }
        Ok(v)
    }

    fn tau_n(&self, xi: C64) -> Result<C64> {
        tau_n(SpectralPoint::new(xi), self.zeta, self.rank, &self.trunc)
    }

    /// `G_N(n, z)`, the product of `tau_N` values at `q^{1/2} z^{+-1}` shifted by
    /// powers of `-p^{1/2}`.
    pub fn g(&self, n: i64, z: SpectralPoint) -> Result<C64> {
        let (xi, half, mp) = (z.xi, self.zeta / 2.0, self.tau + 1.0);
        let mut v = C64::new(1.0, 0.0);
        if n > 0 {
            for k in 0..n {
                let k = k as f64;
                v *= self.tau_n(xi + half - k * mp)? * self.tau_n(-xi + half + k * mp)?;
            }
        } else {
            for k in 1..=-n {
                let k = k as f64;
                v /= self.tau_n(xi + half + k * mp)? * self.tau_n(-xi + half - k * mp)?;
            }
        }
        Ok(v)
    }

    /// `prod_{i=1}^s F_N(n, x q^{-(i-(s+1)/2)})`.
    pub fn f_multi(&self, n: i64, x: SpectralPoint, s: usize) -> Result<C64> {
        if s == 0 {
            return Err(Error::InvalidArgument("f_multi needs s >= 1".into()));
        }
        let mut v = C64::new(1.0, 0.0);
        for shift in centered(s) {
            v *= self.f(n, x.shift_q(-shift, self.zeta))?;
        }
        Ok(v)
    }

    /// `prod_{i=1}^s Y_N(n, x q^{-(i-(s+1)/2)})`.
    pub fn y_multi(&self, n: i64, x: SpectralPoint, s: usize) -> Result<C64> {
        let mut v = C64::new(1.0, 0.0);
        for shift in centered(s) {
            v *= self.y(n, x.shift_q(-shift, self.zeta))?;
        }
        Ok(v)
    }

    /// `prod_u prod_v Y_N(n, q^{v-u} x)` with `u`, `v` running over
    /// `-(i-1)/2 ..= (i-1)/2` and `-(j-1)/2 ..= (j-1)/2` in unit steps.
    pub fn w_exchange_factor(&self, i: usize, j: usize, n: i64, x: SpectralPoint) -> Result<C64> {
        if i == 0 || j == 0 {
            return Err(Error::InvalidArgument(
                "exchange factor needs i, j >= 1".into(),
            ));
        }
        let mut v = C64::new(1.0, 0.0);
        for u in centered(i) {
            for w in centered(j) {
                v *= self.y(n, x.shift_q(w - u, self.zeta))?;
            }
        }
        Ok(v)
    }
}

/// `k - (s+1)/2` for `k = 1..=s`; exact in binary floating point.
fn centered(s: usize) -> impl Iterator<Item = f64> {
    (1..=s).map(move |k| k as f64 - (s as f64 + 1.0) / 2.0)
}

/// `G_N^{-1}(n, q^{c/2} (-p^{1/2})^n x^{-1}) = F_N(n, q^{c/2} x)` on `Sigma_{N,n}`.
pub fn check_fg_duality(
    surface: &SurfaceSpec,
    params: &LogParams,
    x: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let p = surface.apply(params)?;
    let c = p.c.expect("surface sets c");
    let st = Structure::from_params(&p, *trunc)?;
    let n = surface.n;
    let half_c = c * p.zeta / 2.0;
    let lhs = st
        .g(
            n,
            SpectralPoint::new(half_c + n as f64 * p.minus_sqrt_p_log() - x.xi),
        )?
        .inv();
    let rhs = st.f(n, SpectralPoint::new(half_c + x.xi))?;
    let record = ParamRecord::new(&p, &[x]).with_n(n);
    Ok(CheckReport::scalars("fg_duality", record, lhs, rhs, 1e-9))
}

/// `F^{(s)}_N(n, q^c x) / F^{(s)}_N(n, -p^{1/2} x) = prod_i Y_N(n, x q^{-(i-(s+1)/2)})`.
pub fn check_fy_ratio(
    surface: &SurfaceSpec,
    params: &LogParams,
    s: usize,
    x: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let p = surface.apply(params)?;
    let c = p.c.expect("surface sets c");
    let st = Structure::from_params(&p, *trunc)?;
    let n = surface.n;
    let top = st.f_multi(n, SpectralPoint::new(c * p.zeta + x.xi), s)?;
    let bottom = st.f_multi(n, x.shift_minus_sqrt_p(1, p.tau), s)?;
    if bottom == C64::new(0.0, 0.0) {
        return Err(Error::NearPole {
            factor: "F^(s)(n, -p^1/2 x)".into(),
            at: x.z(),
        });
    }
    let rhs = st.y_multi(n, x, s)?;
    let record = ParamRecord::new(&p, &[x]).with_n(n);
    Ok(CheckReport::scalars(
        &format!("fy_ratio_s{s}"),
        record,
        top / bottom,
        rhs,
        1e-9,
    ))
}

/// `|Y_N(n, x) - 1|` and `|w_exchange_factor(2, 3) - 1|` at `p = q^{Nh}`.
#[allow(clippy::too_many_arguments)]
pub fn check_abelian(
    rank: usize,
    n: i64,
    h: i64,
    zeta: C64,
    x: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let tau = classical_tau(rank, h, zeta, 0.0)?;
    let p = LogParams::new(rank, zeta, tau)?;
    let st = Structure::from_params(&p, *trunc)?;
    let one = C64::new(1.0, 0.0);
    let y = st.y(n, x)?;
    let w = st.w_exchange_factor(2, 3, n, x)?;
    let record = ParamRecord::new(&p, &[x]).with_n(n).with_h(h);
    let a = CheckReport::scalars("abelian", record.clone(), y, one, 1e-9);
    let b = CheckReport::scalars("abelian", record, w, one, 1e-9);
    Ok(a.worst(b))
}

/// `Y_N(-1, x) = 1` and the lifted exchange factor at arbitrary `(p, q)`.
pub fn check_commuting(
    params: &LogParams,
    x: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let st = Structure::from_params(params, *trunc)?;
    let one = C64::new(1.0, 0.0);
    let record = ParamRecord::new(params, &[x]).with_n(-1);
    let a = CheckReport::scalars("commuting", record.clone(), st.y(-1, x)?, one, 1e-12);
    let b = CheckReport::scalars(
        "commuting",
        record,
        st.w_exchange_factor(2, 3, -1, x)?,
        one,
        1e-12,
    );
    Ok(a.worst(b))
}

/// One row of a function sweep; `value` is `None` where evaluation was refused.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub xi: C64,
    pub value: Option<C64>,
}

/// Evaluates `f` at `steps` equally spaced log coordinates from `start` to
/// `end` inclusive.
pub fn sweep_ray(
    start: C64,
    end: C64,
    steps: usize,
    f: impl Fn(SpectralPoint) -> Result<C64>,
) -> Result<Vec<SweepRow>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(
            "a sweep needs at least 2 steps".into(),
        ));
    }
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let xi = start + (end - start) * t;
        let value = match f(SpectralPoint::new(xi)) {
            Ok(v) => Some(v),
            Err(e) if e.is_refusal() => None,
            Err(e) => return Err(e),
        };
        rows.push(SweepRow { xi, value });
    }
    Ok(rows)
}

/// CSV with columns `x_re,x_im,value_re,value_im`; refused points are `nan`.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "x_re,x_im,value_re,value_im")?;
    for row in rows {
        let v = row.value.unwrap_or(C64::new(f64::NAN, f64::NAN));
        writeln!(w, "{:e},{:e},{:e},{:e}", row.xi.re, row.xi.im, v.re, v.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::big_theta;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tp() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    fn st(rank: usize) -> Structure {
        Structure::new(rank, c(0.05, 0.3), c(0.1, 0.9), tp()).unwrap()
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / a.norm().max(1.0)
    }

    const X: SpectralPoint = SpectralPoint {
        xi: C64::new(0.07, 0.04),
    };

    #[test]
    fn zero_labels_are_one() {
        let s = st(3);
        assert_eq!(s.f(0, X).unwrap(), c(1.0, 0.0));
        assert_eq!(s.y(0, X).unwrap(), c(1.0, 0.0));
        assert_eq!(s.g(0, X).unwrap(), c(1.0, 0.0));
        assert_eq!(s.f_multi(0, X, 2).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn f_one_against_big_theta() {
        let s = st(2);
        let q = exp_i_pi(s.zeta);
        let x2 = X.z() * X.z();
        let t = q.powu(4);
        let th = |v: C64| big_theta(v, t, &tp()).unwrap();
        let oracle = q * th(x2.inv()) * th(x2) / (th(x2.inv() * q * q) * th(x2 * q * q));
        assert!(rel(s.f(1, X).unwrap(), oracle) < 1e-12);
    }

    #[test]
    fn y_two_against_big_theta() {
        let s = st(2);
        let (q, p) = (exp_i_pi(s.zeta), exp_i_pi(2.0 * s.tau));
        let x2 = X.z() * X.z();
        let t = q.powu(4);
        let th = |v: C64| big_theta(v, t, &tp()).unwrap();
        let mut oracle = c(1.0, 0.0);
        for k in 1..=2 {
            let pk = p.powu(k);
            oracle *= th(x2 / pk) * th(x2 / pk) * th(x2 * q * q * pk) * th(x2 / (q * q) * pk)
                / (th(x2 * pk) * th(x2 * pk) * th(x2 * q * q / pk) * th(x2 / (q * q * pk)));
        }
        assert!(rel(s.y(2, X).unwrap(), oracle) < 1e-11);
    }

    #[test]
    fn f_telescopes() {
        let s = st(3);
        for r in 0..3 {
            let ratio = s.f(r + 1, X).unwrap() / s.f(r, X).unwrap();
            let factor =
                exp_i_pi(2.0 * (1.0 - 1.0 / 3.0) * s.zeta) * s.f_pos_factor(r, X.xi).unwrap();
            assert!(rel(ratio, factor) < 1e-10);
        }
        for r in 0..3 {
            let ratio = s.f(-r - 1, X).unwrap() / s.f(-r, X).unwrap();
            let factor =
                exp_i_pi(-2.0 * (1.0 - 1.0 / 3.0) * s.zeta) * s.f_neg_factor(r + 1, X.xi).unwrap();
            assert!(rel(ratio, factor) < 1e-10);
        }
    }

    #[test]
    fn y_minus_one_is_exactly_one() {
        for rank in [2, 3, 4] {
            assert_eq!(st(rank).y(-1, X).unwrap(), c(1.0, 0.0));
            assert_eq!(
                st(rank).w_exchange_factor(3, 2, -1, X).unwrap(),
                c(1.0, 0.0)
            );
        }
    }

    #[test]
    fn y_reflection() {
        let s = st(3);
        for n in [-2, 1, 2, 3] {
            let prod = s.y(n, X).unwrap() * s.y(n, X.inv()).unwrap();
            assert!(rel(prod, c(1.0, 0.0)) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn g_single_factor_and_backward_step() {
        let s = st(2);
        let tn = |xi: C64| tau_n(SpectralPoint::new(xi), s.zeta, 2, &tp()).unwrap();
        let g1 = s.g(1, X).unwrap();
        assert!(rel(g1, tn(X.xi + s.zeta / 2.0) * tn(-X.xi + s.zeta / 2.0)) < 1e-14);
        // Stepping back once from z (-p^{1/2}) undoes G(-1, z).
        let fwd = X.shift_minus_sqrt_p(1, s.tau);
        let composed = s.g(-1, X).unwrap() * s.g(1, fwd).unwrap();
        assert!(rel(composed, c(1.0, 0.0)) < 1e-10, "{composed}");
    }

    #[test]
    fn multi_products() {
        let s = st(3);
        assert_eq!(s.f_multi(2, X, 1).unwrap(), s.f(2, X).unwrap());
        let direct = s.f(1, X.shift_q(1.0, s.zeta)).unwrap()
            * s.f(1, X).unwrap()
            * s.f(1, X.shift_q(-1.0, s.zeta)).unwrap();
        assert!(rel(s.f_multi(1, X, 3).unwrap(), direct) < 1e-13);
        assert_eq!(s.w_exchange_factor(1, 1, 2, X).unwrap(), s.y(2, X).unwrap());
        let two =
            s.y(2, X.shift_q(-0.5, s.zeta)).unwrap() * s.y(2, X.shift_q(0.5, s.zeta)).unwrap();
        assert!(rel(s.w_exchange_factor(2, 1, 2, X).unwrap(), two) < 1e-13);
        assert!(s.f_multi(1, X, 0).is_err());
    }

    #[test]
    fn duality_and_ratio() {
        let p = LogParams::new(2, c(0.05, 0.3), c(0.1, 0.9)).unwrap();
        for n in [-2, -1, 0, 1, 2, 3] {
            let surf = SurfaceSpec::new(2, n);
            let r = check_fg_duality(&surf, &p, X, &tp()).unwrap();
            assert!(r.pass, "{r:?}");
            for s in 1..=3 {
                let r = check_fy_ratio(&surf, &p, s, X, &tp()).unwrap();
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn abelian_line() {
        for (rank, n, h) in [(2, 1, 1), (3, 2, 2), (2, -2, 3)] {
            let r = check_abelian(rank, n, h, c(0.05, 0.3), X, &tp()).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let p = LogParams::new(3, c(0.05, 0.3), c(0.1, 0.9)).unwrap();
        assert_eq!(check_commuting(&p, X, &tp()).unwrap().residual, 0.0);
    }

    #[test]
    fn pole_is_refused() {
        // x^2 = q^{-2}: the F denominator Theta(x^2 q^2) vanishes.
        let s = st(2);
        let x = SpectralPoint::new(-s.zeta);
        assert!(s.f(1, x).unwrap_err().is_refusal());
    }

    #[test]
    fn sweep_csv_shape() {
        let s = st(2);
        let rows = sweep_ray(c(0.0, 0.05), c(0.2, 0.05), 5, |x| s.f(1, x)).unwrap();
        assert_eq!(rows.len(), 5);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("x_re,x_im,value_re,value_im"));
        assert!(sweep_ray(c(0.0, 0.0), c(1.0, 0.0), 1, |x| s.f(1, x)).is_err());
    }
}
