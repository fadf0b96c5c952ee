//! The classical Poisson structure function `f_h` and the `beta -> 0` limit
//! of the exchange function on the line `q^{Nh} = p^{1-beta}`.

use crate::error::{Error, Result};
use crate::params::{classical_tau, exp_i_pi, SpectralPoint};
use crate::report::{pair, CheckReport, ParamRecord};
use crate::specfun::TruncationPolicy;
use crate::structfn::Structure;
use crate::C64;

/// Default step sequence for the limit. Each step halves `beta`.
pub const DEFAULT_BETAS: [f64; 3] = [1e-4, 5e-5, 2.5e-5];

pub const POISSON_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonArgs {
    pub rank: usize,
    pub n: i64,
    pub h: i64,
    pub x: SpectralPoint,
    pub zeta: C64,
    pub trunc: TruncationPolicy,
}

fn floor_half(m: i64) -> i64 {
    m.div_euclid(2)
}

/// `2y/(1-y) - y'/(1-y') - y''/(1-y'')` with `y = x^{+-2} q^e`, `y' = y q^2`,
/// `y'' = y q^{-2}`, all built from the log coordinate `l = +-2 xi`.
fn group(l: C64, e: f64, zeta: C64, guard: f64) -> Result<C64> {
    let frac = |shift: f64| -> Result<C64> {
        let y = exp_i_pi(l + shift * zeta);
        let d = C64::new(1.0, 0.0) - y;
        if d.norm() < guard || !d.norm().is_finite() {
            return Err(Error::NearPole {
                factor: format!("1 - x^2 q^{shift} in f_h"),
                at: y,
            });
        }
        Ok(y / d)
    };
    Ok(2.0 * frac(e)? - frac(e + 2.0)? - frac(e - 2.0)?)
}

/// The bracketed body of `f_h` at one sign of `x^2`.
fn body(args: &PoissonArgs, l: C64) -> Result<C64> {
    let n = args.rank as f64;
    let (zeta, trunc) = (args.zeta, &args.trunc);
    let guard = trunc.pole_guard;
    let odd = args.h.rem_euclid(2) == 1;
    let (ca, cb) = if odd {
        let e1 = floor_half(args.n);
        let e2 = floor_half(args.n + 1);
        ((e1 * (e1 + 1)) as f64, (e2 * e2) as f64)
    } else {
        (1.0, 0.0)
    };
    let mut sum = C64::new(0.0, 0.0);
    let mut scale = 0.0f64;
    for ell in 0..=trunc.max_terms {
        let base = 2.0 * n * ell as f64;
        let mut inc = ca * group(l, base, zeta, guard)?;
        if cb != 0.0 {
            inc += cb * group(l, base + n, zeta, guard)?;
        }
        sum += inc;
        scale = scale.max(sum.norm());
        if ell > 0 && inc.norm() < trunc.tail_eps * scale.max(1.0) {
            return Ok(sum - 0.5 * ca * group(l, 0.0, zeta, guard)?);
        }
    }
    Err(Error::TruncationFailure {
        what: "f_h lattice sum",
        cap: trunc.max_terms,
    })
}

/// `f_h(x)`: for odd `h`, `2Nh ln q` times the lattice sum with coefficients
/// `E(n/2)(E(n/2)+1)` and `E((n+1)/2)^2`; for even `h`, `Nh n(n+1) ln q`
/// times the single-group sum. Both antisymmetrized under `x -> x^{-1}`, with
/// `E` the floor.
pub fn f_h(args: &PoissonArgs) -> Result<C64> {
    if args.h == 0 {
        return Err(Error::DegenerateParameter("h = 0"));
    }
    let n = args.rank as f64;
    let ln_q = C64::new(0.0, std::f64::consts::PI) * args.zeta;
    let pre = if args.h.rem_euclid(2) == 1 {
        2.0 * n * args.h as f64 * ln_q
    } else {
        n * args.h as f64 * (args.n * (args.n + 1)) as f64 * ln_q
    };
    if pre == C64::new(0.0, 0.0) {
        return Ok(pre);
    }
    let l = 2.0 * args.x.xi;
    Ok(pre * (body(args, l)? - body(args, -l)?))
}

/// `sum_u sum_v f_h(q^{v-u} x)` over the centered half-integer ranges.
#[allow(clippy::too_many_arguments)]
pub fn bracket_factor(args: &PoissonArgs, i: usize, j: usize) -> Result<C64> {
    if i == 0 || j == 0 {
        return Err(Error::InvalidArgument(
            "bracket factor needs i, j >= 1".into(),
        ));
    }
    let centered = |s: usize| (1..=s).map(move |k| k as f64 - (s as f64 + 1.0) / 2.0);
    let mut total = C64::new(0.0, 0.0);
    for u in centered(i) {
        for v in centered(j) {
            let shifted = PoissonArgs {
                x: args.x.shift_q(v - u, args.zeta),
                ..*args
            };
            total += f_h(&shifted)?;
        }
    }
    Ok(total)
}

/// Everything computed by [`poisson_limit`].
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonLimit {
    pub betas: Vec<f64>,
    /// `(1 - Y^{-1})/beta` at each step.
    pub d: Vec<C64>,
    /// `(Y - 1)/beta` at each step.
    pub d_alt: Vec<C64>,
    pub extrapolated: C64,
    /// The extrapolant from one fewer level.
    pub previous: C64,
    pub alt_extrapolated: C64,
    pub f_h: C64,
    /// `|D_0 - D_1| / |D_1 - D_2|`; `None` when both differences vanish.
    pub difference_ratio: Option<f64>,
}

/// Polynomial extrapolation to `beta = 0` by Neville's scheme. For halving
/// steps this is Richardson extrapolation with ratio 2. Returns the full
/// extrapolant and the one built from the last `len - 1` points.
fn extrapolate(betas: &[f64], values: &[C64]) -> (C64, C64) {
    let mut t: Vec<C64> = values.to_vec();
    let m = values.len();
    let mut previous = t[m - 1];
    for level in 1..m {
        for i in 0..m - level {
            let (bi, bj) = (betas[i], betas[i + level]);
            t[i] = (bi * t[i + 1] - bj * t[i]) / (bi - bj);
        }
        if level == m - 2 {
            previous = t[1];
        }
    }
    (t[0], previous)
}

pub fn poisson_limit(
    rank: usize,
    n: i64,
    h: i64,
    x: SpectralPoint,
    zeta: C64,
    betas: &[f64],
    trunc: &TruncationPolicy,
) -> Result<PoissonLimit> {
    if betas.len() < 2 {
        return Err(Error::InvalidArgument(
            "the limit needs at least two beta values".into(),
        ));
    }
    if !betas.iter().all(|b| *b > 0.0 && *b < 1.0) || !betas.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(format!(
            "beta sequence must be positive and decreasing: {betas:?}"
        )));
    }
    let one = C64::new(1.0, 0.0);
    let mut d = Vec::with_capacity(betas.len());
    let mut d_alt = Vec::with_capacity(betas.len());
    for &beta in betas {
        let tau = classical_tau(rank, h, zeta, beta)?;
        let y = Structure::new(rank, zeta, tau, *trunc)?.y(n, x)?;
        d.push((one - y.inv()) / beta);
        d_alt.push((y - one) / beta);
    }
    let (extrapolated, previous) = extrapolate(betas, &d);
    let (alt_extrapolated, _) = extrapolate(betas, &d_alt);
    let f = f_h(&PoissonArgs {
        rank,
        n,
        h,
        x,
        zeta,
        trunc: *trunc,
    })?;
    let difference_ratio = if d.len() >= 3 {
        let (a, b) = ((d[0] - d[1]).norm(), (d[1] - d[2]).norm());
        if a == 0.0 && b == 0.0 {
            None
        } else {
            Some(a / b)
        }
    } else {
        None
    };
    Ok(PoissonLimit {
        betas: betas.to_vec(),
        d,
        d_alt,
        extrapolated,
        previous,
        alt_extrapolated,
        f_h: f,
        difference_ratio,
    })
}

/// Extrapolated `(1 - Y^{-1})/beta` against `f_h(x)`.
#[allow(clippy::too_many_arguments)]
pub fn check_poisson_limit(
    rank: usize,
    n: i64,
    h: i64,
    x: SpectralPoint,
    zeta: C64,
    betas: &[f64],
    trunc: &TruncationPolicy,
    tol: f64,
) -> Result<(CheckReport, PoissonLimit)> {
    let lim = poisson_limit(rank, n, h, x, zeta, betas, trunc)?;
    let spread = (lim.extrapolated - lim.previous).norm();
    if spread > 10.0 * tol * lim.extrapolated.norm().max(1.0) {
        return Err(Error::ConvergenceFailure(format!(
            "successive extrapolants differ by {spread:e} at n={n}, h={h}, xi={}",
            x.xi
        )));
    }
    let record = ParamRecord {
        rank,
        n: Some(n),
        h: Some(h),
        zeta: pair(zeta),
        tau: pair(classical_tau(rank, h, zeta, 0.0)?),
        c: None,
        points: vec![pair(x.xi)],
        seed: None,
    };
    let report = CheckReport::scalars("poisson_limit", record, lim.extrapolated, lim.f_h, tol);
    Ok((report, lim))
}
