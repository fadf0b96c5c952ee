//! Residual checks of the matrix identities satisfied by `R`, `R-hat` and the
//! starred matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{validate, LogParams, SpectralPoint, SurfaceSpec};
use crate::report::{CheckReport, ParamRecord};
use crate::rmatrix::{
    build_heisenberg, build_r, build_r_hat, build_r_tilde, embed, permutation_op, r21,
    three_leg_guard, LegMatrix,
};
use crate::specfun::{tau_n, TruncationPolicy};
use crate::structfn::Structure;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RProperty {
    Ybe,
    Unitarity,
    Crossing,
    Antisymmetry,
    ZnSymmetry,
    QuasiPeriodicity,
}

impl RProperty {
    pub const ALL: [RProperty; 6] = [
        RProperty::Ybe,
        RProperty::Unitarity,
        RProperty::Crossing,
        RProperty::Antisymmetry,
        RProperty::ZnSymmetry,
        RProperty::QuasiPeriodicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RProperty::Ybe => "ybe",
            RProperty::Unitarity => "unitarity",
            RProperty::Crossing => "crossing",
            RProperty::Antisymmetry => "antisymmetry",
            RProperty::ZnSymmetry => "zn_symmetry",
            RProperty::QuasiPeriodicity => "quasi_periodicity",
        }
    }

    pub fn from_name(name: &str) -> Option<RProperty> {
        RProperty::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn points(self) -> usize {
        if self == RProperty::Ybe {
            2
        } else {
            1
        }
    }
}

/// Inverse together with its condition estimate folded into `cond`.
fn inv(m: &LegMatrix, cond: &mut Option<f64>) -> Result<LegMatrix> {
    let (inv, k) = m.inverse_with_cond()?;
    *cond = Some(cond.map_or(k, |c: f64| c.max(k)));
    Ok(inv)
}

fn a_on_leg_one(rank: usize, n: i64) -> Result<LegMatrix> {
    let hs = build_heisenberg(rank)?;
    hs.a_pow(n).kron(&LegMatrix::identity(rank, 1))
}

pub fn check_r_property(
    kind: RProperty,
    params: &LogParams,
    points: &[SpectralPoint],
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    validate(params, false)?;
    if points.len() != kind.points() {
        return Err(Error::InvalidArgument(format!(
            "{} takes {} spectral point(s), got {}",
            kind.name(),
            kind.points(),
            points.len()
        )));
    }
    let rank = params.rank;
    let name = kind.name();
    let record = ParamRecord::new(params, points);
    let x = points[0];
    let id2 = LegMatrix::identity(rank, 2);
    let mut cond = None;
    let report = match kind {
        RProperty::Ybe => {
            three_leg_guard(rank)?;
            let (x1, x2) = (points[0], points[1]);
            let r12 = embed(&build_r(x1, params, trunc)?, 3, 1, 2)?;
            let r13 = embed(&build_r(x2, params, trunc)?, 3, 1, 3)?;
            let r23 = embed(&build_r(x2 / x1, params, trunc)?, 3, 2, 3)?;
            let lhs = &(&r12 * &r13) * &r23;
            let rhs = &(&r23 * &r13) * &r12;
            CheckReport::matrices(name, record, &lhs, &rhs, 1e-8)
        }
        RProperty::Unitarity => {
            let lhs = &build_r(x, params, trunc)? * &r21(&build_r(x.inv(), params, trunc)?)?;
            CheckReport::matrices(name, record, &lhs, &id2, 1e-8)
        }
        RProperty::Crossing => {
            let shifted = x.inv().shift_q(-(rank as f64), params.zeta);
            let a = build_r(x, params, trunc)?.partial_transpose(2)?;
            let b = r21(&build_r(shifted, params, trunc)?)?.partial_transpose(2)?;
            CheckReport::matrices(name, record, &(&a * &b), &id2, 1e-8)
        }
        RProperty::Antisymmetry => {
            let hs = build_heisenberg(rank)?;
            let one = LegMatrix::identity(rank, 1);
            let left = hs.g_inv().kron(&one)?;
            let right = hs.g.kron(&one)?;
            let minus = SpectralPoint::new(x.xi + 1.0);
            let lhs = build_r(minus, params, trunc)?;
            let rhs = (&(&left * &build_r(x, params, trunc)?) * &right).scale(hs.omega);
            CheckReport::matrices(name, record, &lhs, &rhs, 1e-8)
        }
        RProperty::ZnSymmetry => {
            let rt = build_r_tilde(x, params, trunc)?;
            let mut worst = 0.0f64;
            for r in 0..rt.size() {
                let rd = rt.decompose(r);
                for c in 0..rt.size() {
                    let cd = rt.decompose(c);
                    for s in 1..rank {
                        let sh = |d: &[usize]| d.iter().map(|v| (v + s) % rank).collect::<Vec<_>>();
                        worst = worst.max((rt.entry(&sh(&rd), &sh(&cd)) - rt.get(r, c)).norm());
                    }
                }
            }
            let scale = rt.max_abs().max(1.0);
            CheckReport::new(name, record, worst / scale, scale, 1e-8)
        }
        RProperty::QuasiPeriodicity => {
            let a1 = a_on_leg_one(rank, 1)?;
            let a1_inv = a_on_leg_one(rank, -1)?;
            let lhs = build_r_hat(x.shift_minus_sqrt_p(1, params.tau), params, false, trunc)?;
            let inner = inv(
                &r21(&build_r_hat(x.inv(), params, false, trunc)?)?,
                &mut cond,
            )?;
            let rhs = &(&a1_inv * &inner) * &a1;
            CheckReport::matrices(name, record, &lhs, &rhs, 1e-8)
        }
    };
    Ok(report.with_cond(cond))
}

/// `R(1) = P`.
pub fn check_r_at_one(params: &LogParams, trunc: &TruncationPolicy) -> Result<CheckReport> {
    let r = build_r(SpectralPoint::ONE, params, trunc)?;
    let p = permutation_op(2, 1, 2, params.rank)?;
    let record = ParamRecord::new(params, &[SpectralPoint::ONE]);
    Ok(CheckReport::matrices("r_at_one", record, &r, &p, 1e-10))
}

/// `tau_N(q^N z) = tau_N(z)` and `tau_N(z^{-1}) tau_N(z) = 1`.
pub fn check_tau_n(
    params: &LogParams,
    z: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    validate(params, false)?;
    let (zeta, rank) = (params.zeta, params.rank);
    let t = tau_n(z, zeta, rank, trunc)?;
    let shifted = tau_n(z.shift_q(rank as f64, zeta), zeta, rank, trunc)?;
    let inverse = tau_n(z.inv(), zeta, rank, trunc)?;
    let record = ParamRecord::new(params, &[z]);
    let a = CheckReport::scalars("tau_n", record.clone(), shifted, t, 1e-10);
    let b = CheckReport::scalars("tau_n", record, inverse * t, C64::new(1.0, 0.0), 1e-10);
    Ok(a.worst(b))
}

/// `R*_12(z/w) R*_21(w/z) = T` and `T R_12(z/w)^{-1} = R_21(w/z)` with
/// `T = tau_N(q^{1/2} w/z) tau_N(q^{1/2} z/w)`.
pub fn check_t_relations(
    params: &LogParams,
    z_over_w: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    validate(params, true)?;
    let u = z_over_w;
    let (zeta, rank) = (params.zeta, params.rank);
    let t = tau_n(u.inv().shift_q(0.5, zeta), zeta, rank, trunc)?
        * tau_n(u.shift_q(0.5, zeta), zeta, rank, trunc)?;
    let id = LegMatrix::identity(rank, 2);
    let record = ParamRecord::new(params, &[u]);
    let star =
        &build_r_hat(u, params, true, trunc)? * &r21(&build_r_hat(u.inv(), params, true, trunc)?)?;
    let first = CheckReport::matrices("t_relations", record.clone(), &star, &id.scale(t), 1e-9);
    let mut cond = None;
    let lhs = inv(&build_r_hat(u, params, false, trunc)?, &mut cond)?.scale(t);
    let rhs = r21(&build_r_hat(u.inv(), params, false, trunc)?)?;
    let second = CheckReport::matrices("t_relations", record, &lhs, &rhs, 1e-9).with_cond(cond);
    Ok(first.worst(second))
}

/// `R-hat_21(z^{-1} (-p^{1/2})^n)^{-1} = G_N(n, z) a_1^n R-hat_21(z^{-1})^{-1} a_1^{-n}`.
pub fn check_quasi_shift_n(
    params: &LogParams,
    n: i64,
    z: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    validate(params, false)?;
    if n == 0 {
        return Err(Error::InvalidArgument("quasi_shift_n needs n != 0".into()));
    }
    let rank = params.rank;
    let mut cond = None;
    let shifted = z.inv().shift_minus_sqrt_p(n, params.tau);
    let lhs = inv(
        &r21(&build_r_hat(shifted, params, false, trunc)?)?,
        &mut cond,
    )?;
    let g = Structure::from_params(params, *trunc)?.g(n, z)?;
    let inner = inv(
        &r21(&build_r_hat(z.inv(), params, false, trunc)?)?,
        &mut cond,
    )?;
    let rhs = (&(&a_on_leg_one(rank, n)? * &inner) * &a_on_leg_one(rank, -n)?).scale(g);
    let record = ParamRecord::new(params, &[z]).with_n(n);
    Ok(CheckReport::matrices("quasi_shift_n", record, &lhs, &rhs, 1e-8).with_cond(cond))
}

/// On `Sigma_{N,n}`, with `u` the log coordinate of `w/z`:
/// `(a^{-n})^{t1} (R-hat_21(q^{c/2} w/z)^{t1})^{-1} (a^n)^{t1}
///   = G_N^{-1}(n, q^{c/2} (-p^{1/2})^n z/w) (R-hat_21(q^{-c/2} w/z)^{-1})^{t1}`.
pub fn check_lemma_key(
    surface: &SurfaceSpec,
    params: &LogParams,
    w_over_z: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let p = surface.apply(params)?;
    validate(&p, false)?;
    let c = p.c.expect("surface sets c");
    let (rank, n) = (p.rank, surface.n);
    let half_c = c * p.zeta / 2.0;
    let u = w_over_z.xi;
    let mut cond = None;
    let plus = r21(&build_r_hat(
        SpectralPoint::new(u + half_c),
        &p,
        false,
        trunc,
    )?)?;
    let middle = inv(&plus.partial_transpose(1)?, &mut cond)?;
    let left = a_on_leg_one(rank, -n)?.partial_transpose(1)?;
    let right = a_on_leg_one(rank, n)?.partial_transpose(1)?;
    let lhs = &(&left * &middle) * &right;
    let g_at = SpectralPoint::new(half_c + n as f64 * p.minus_sqrt_p_log() - u);
    let g = Structure::from_params(&p, *trunc)?.g(n, g_at)?;
    let minus = r21(&build_r_hat(
        SpectralPoint::new(u - half_c),
        &p,
        false,
        trunc,
    )?)?;
    let rhs = inv(&minus, &mut cond)?.partial_transpose(1)?.scale(g.inv());
    let record = ParamRecord::new(&p, &[w_over_z]).with_n(n);
    Ok(CheckReport::matrices("lemma_key", record, &lhs, &rhs, 1e-8).with_cond(cond))
}

fn random_matrix(dim: usize, legs: usize, rng: &mut ChaCha8Rng) -> Result<LegMatrix> {
    LegMatrix::from_fn(dim, legs, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// `Tr_beta(A Q_beta B) = Tr_beta(Q_beta B^{t_alpha} A^{t_alpha})^{t_alpha}`
/// with `alpha` the last leg and `beta` the others.
pub fn trace_transposition_sides(
    a: &LegMatrix,
    b: &LegMatrix,
    q_beta: &LegMatrix,
) -> Result<(LegMatrix, LegMatrix)> {
    let s = a.legs();
    let rank = a.dim();
    let alpha = s;
    let beta: Vec<usize> = (1..s).collect();
    let q_full = q_beta.kron(&LegMatrix::identity(rank, 1))?;
    let lhs = (&(a * &q_full) * b).partial_trace(&beta)?;
    let inner = &(&q_full * &b.partial_transpose(alpha)?) * &a.partial_transpose(alpha)?;
    let rhs = inner.partial_trace(&beta)?.transpose();
    Ok((lhs, rhs))
}

/// Trace-transposition identity with seeded random matrices. For `s = 2` the
/// matrices are `R_21`, `R'_21` and `Q_1`; for `s = 3` legs 1 and 2 are grouped
/// into one auxiliary space.
pub fn check_trace_transposition(rank: usize, s: usize, seed: u64) -> Result<CheckReport> {
    if !(s == 2 || s == 3) {
        return Err(Error::InvalidArgument(format!(
            "trace transposition needs s in {{2, 3}}, got {s}"
        )));
    }
    three_leg_guard(rank)?;
    if rank < 2 {
        return Err(Error::UnsupportedRank {
            rank,
            reason: "rank must be at least 2",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = if s == 2 {
        (
            r21(&random_matrix(rank, 2, &mut rng)?)?,
            r21(&random_matrix(rank, 2, &mut rng)?)?,
        )
    } else {
        (
            random_matrix(rank, 3, &mut rng)?,
            random_matrix(rank, 3, &mut rng)?,
        )
    };
    let q = random_matrix(rank, s - 1, &mut rng)?;
    let (lhs, rhs) = trace_transposition_sides(&a, &b, &q)?;
    let record = ParamRecord {
        rank,
        n: None,
        h: None,
        seed: Some(seed),
        ..Default::default()
    };
    Ok(CheckReport::matrices(
        &format!("trace_transposition_s{s}"),
        record,
        &lhs,
        &rhs,
        1e-12,
    ))
}

/// `R*_a1(x1)^{t1} R*_12(q^{-N} x2/x1)^{t1 t2} (R*_a2(x2)^{-1})^{t2}` against the
/// reversed product, on legs `(alpha, 1, 2) = (1, 2, 3)`.
pub fn check_transposed_ybe(
    params: &LogParams,
    x1: SpectralPoint,
    x2: SpectralPoint,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    three_leg_guard(params.rank)?;
    let (sides, cond) = transposed_ybe_sides(params, x1, x2, true, trunc)?;
    let record = ParamRecord::new(params, &[x1, x2]);
    Ok(CheckReport::matrices("transposed_ybe", record, &sides.0, &sides.1, 1e-8).with_cond(cond))
}

/// Both sides of the transposed Yang-Baxter relation; `starred = false` uses
/// the nome `p` directly.
pub fn transposed_ybe_sides(
    params: &LogParams,
    x1: SpectralPoint,
    x2: SpectralPoint,
    starred: bool,
    trunc: &TruncationPolicy,
) -> Result<((LegMatrix, LegMatrix), Option<f64>)> {
    let rank = params.rank as f64;
    let mut cond = None;
    let mid_at = (x2 / x1).shift_q(-rank, params.zeta);
    let a = embed(&build_r_hat(x1, params, starred, trunc)?, 3, 1, 2)?.partial_transpose(2)?;
    let b = embed(&build_r_hat(mid_at, params, starred, trunc)?, 3, 2, 3)?
        .partial_transpose_legs(&[2, 3])?;
    let c = inv(
        &embed(&build_r_hat(x2, params, starred, trunc)?, 3, 1, 3)?,
        &mut cond,
    )?
    .partial_transpose(3)?;
    let lhs = &(&a * &b) * &c;
    let rhs = &(&c * &b) * &a;
    Ok(((lhs, rhs), cond))
}

/// The c-number kernel of `w_s(z)`: the ordered product of `P_ij` over
/// `i < j` followed by the ordered product of `R*_ij(q^{-N} z_i/z_j)^{t_i t_j}`,
/// with `z_i = z q^{i-(s+1)/2}`.
pub fn build_w_kernel(
    s: usize,
    z: SpectralPoint,
    surface: &SurfaceSpec,
    params: &LogParams,
    trunc: &TruncationPolicy,
) -> Result<LegMatrix> {
    if s == 0 || s > 3 {
        return Err(Error::InvalidArgument(format!(
            "w kernel is certified for 1 <= s <= 3, got {s}"
        )));
    }
    if s == 3 {
        three_leg_guard(params.rank)?;
    }
    let p = surface.apply(params)?;
    validate(&p, true)?;
    let rank = p.rank;
    let zi = |i: usize| z.shift_q(i as f64 - (s as f64 + 1.0) / 2.0, p.zeta);
    let mut perms = LegMatrix::identity(rank, s);
    let mut rs = LegMatrix::identity(rank, s);
    for i in 1..=s {
        for j in i + 1..=s {
            perms = &perms * &permutation_op(s, i, j, rank)?;
            let at = (zi(i) / zi(j)).shift_q(-(rank as f64), p.zeta);
            let r = embed(&build_r_hat(at, &p, true, trunc)?, s, i, j)?
                .partial_transpose_legs(&[i, j])?;
            rs = &rs * &r;
        }
    }
    Ok(&perms * &rs)
}

/// Builder against the literal `s = 2` or `s = 3` product.
pub fn check_w_kernel(
    s: usize,
    z: SpectralPoint,
    surface: &SurfaceSpec,
    params: &LogParams,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let built = build_w_kernel(s, z, surface, params, trunc)?;
    let p = surface.apply(params)?;
    let rank = p.rank;
    let r = |i: usize, j: usize, shift: f64| -> Result<LegMatrix> {
        let at = SpectralPoint::new(shift * p.zeta - rank as f64 * p.zeta);
        embed(&build_r_hat(at, &p, true, trunc)?, s, i, j)?.partial_transpose_legs(&[i, j])
    };
    let literal = match s {
        1 => LegMatrix::identity(rank, 1),
        2 => &permutation_op(2, 1, 2, rank)? * &r(1, 2, -1.0)?,
        3 => {
            let perms = &(&permutation_op(3, 1, 2, rank)? * &permutation_op(3, 1, 3, rank)?)
                * &permutation_op(3, 2, 3, rank)?;
            let rs = &(&r(1, 2, -1.0)? * &r(1, 3, -2.0)?) * &r(2, 3, -1.0)?;
            &perms * &rs
        }
        _ => unreachable!("rejected by build_w_kernel"),
    };
    let record = ParamRecord::new(&p, &[z]).with_n(surface.n);
    Ok(CheckReport::matrices(
        &format!("w_kernel_s{s}"),
        record,
        &built,
        &literal,
        1e-12,
    ))
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

    fn params(rank: usize) -> LogParams {
        LogParams::new(rank, c(0.05, 0.3), c(0.1, 0.9)).unwrap()
    }

    const X: SpectralPoint = SpectralPoint {
        xi: C64::new(0.13, 0.07),
    };
    const X2: SpectralPoint = SpectralPoint {
        xi: C64::new(-0.07, 0.02),
    };

    #[test]
    fn axioms_at_fixed_points() {
        for rank in [2, 3] {
            for kind in RProperty::ALL {
                let pts: Vec<SpectralPoint> = if kind == RProperty::Ybe {
                    vec![X, X2]
                } else {
                    vec![X]
                };
                let r = check_r_property(kind, &params(rank), &pts, &tp()).unwrap();
                assert!(r.pass, "{kind:?} rank {rank}: {r:?}");
            }
        }
        assert!(check_r_property(RProperty::Ybe, &params(2), &[X], &tp()).is_err());
    }

    #[test]
    fn ybe_rank_guard() {
        let err = check_r_property(RProperty::Ybe, &params(5), &[X, X2], &tp()).unwrap_err();
        assert!(err.is_refusal());
    }

    #[test]
    fn r_at_one_and_tau() {
        for rank in [2, 3, 4] {
            assert!(check_r_at_one(&params(rank), &tp()).unwrap().pass);
            assert!(check_tau_n(&params(rank), X, &tp()).unwrap().pass);
        }
    }

    #[test]
    fn t_relations() {
        assert!(
            check_t_relations(&params(2).with_c(c(0.0, 0.0)), X, &tp())
                .unwrap()
                .pass
        );
        let on = params(2).on_surface(1).unwrap();
        assert!(check_t_relations(&on, X, &tp()).unwrap().pass);
        let r = check_t_relations(&params(3).with_c(c(0.7, 0.0)), X, &tp()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(check_t_relations(&params(3), X, &tp()).is_err());
    }

    #[test]
    fn quasi_shifts() {
        for rank in [2, 3] {
            for n in [-2, -1, 1, 2, 3] {
                let r = check_quasi_shift_n(&params(rank), n, X, &tp()).unwrap();
                assert!(r.pass, "rank {rank} n {n}: {r:?}");
                assert!(r.cond.unwrap() >= 1.0);
            }
        }
        assert!(check_quasi_shift_n(&params(2), 0, X, &tp()).is_err());
    }

    #[test]
    fn quasi_shift_three_is_three_single_steps() {
        // Iterate the n = 1 relation by hand and compare with the n = 3 left side.
        let p = params(2);
        let st = Structure::from_params(&p, tp()).unwrap();
        let a = a_on_leg_one(2, 1).unwrap();
        let a_inv = a_on_leg_one(2, -1).unwrap();
        let hat_inv = |x: SpectralPoint| {
            r21(&build_r_hat(x, &p, false, &tp()).unwrap())
                .unwrap()
                .inverse()
                .unwrap()
        };
        let mut m = hat_inv(X.inv());
        for k in 0..3 {
            let zk = X.shift_minus_sqrt_p(-k, p.tau);
            m = (&(&a * &m) * &a_inv).scale(st.g(1, zk).unwrap());
        }
        let direct = hat_inv(X.inv().shift_minus_sqrt_p(3, p.tau));
        assert!(crate::rmatrix::scaled_residual(&direct, &m).0 < 1e-8);
    }

    #[test]
    fn key_lemma_cells() {
        for (rank, n) in [(2, 1), (3, -2), (2, 0), (3, 3), (2, -1)] {
            let r = check_lemma_key(&SurfaceSpec::new(rank, n), &params(rank), X, &tp()).unwrap();
            assert!(r.pass, "rank {rank} n {n}: {r:?}");
        }
    }

    #[test]
    fn trace_transposition_identity_case() {
        let q = random_matrix(2, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let id = LegMatrix::identity(2, 2);
        let (lhs, rhs) = trace_transposition_sides(&id, &id, &q).unwrap();
        let expect = LegMatrix::identity(2, 1).scale(q.trace());
        assert!((&lhs - &expect).max_abs() < 1e-15);
        assert!((&rhs - &expect).max_abs() < 1e-15);
    }

    #[test]
    fn trace_transposition_against_index_sums() {
        let rank = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let r = random_matrix(rank, 2, &mut rng).unwrap();
        let rp = random_matrix(rank, 2, &mut rng).unwrap();
        let q = random_matrix(rank, 1, &mut rng).unwrap();
        let (a, b) = (r21(&r).unwrap(), r21(&rp).unwrap());
        let (lhs, rhs) = trace_transposition_sides(&a, &b, &q).unwrap();
        for x in 0..rank {
            for y in 0..rank {
                let mut direct = c(0.0, 0.0);
                for i in 0..rank {
                    for j in 0..rank {
                        for k in 0..rank {
                            for m in 0..rank {
                                // (R_21)_{(i x),(j m)} = R_{(x i),(m j)}.
                                direct += r.entry(&[x, i], &[m, j])
                                    * q.get(j, k)
                                    * rp.entry(&[m, k], &[y, i]);
                            }
                        }
                    }
                }
                assert!((lhs.get(x, y) - direct).norm() < 1e-13);
                assert!((rhs.get(x, y) - direct).norm() < 1e-13);
            }
        }
        assert!(check_trace_transposition(2, 2, 42).unwrap().pass);
        assert!(check_trace_transposition(3, 3, 7).unwrap().pass);
        assert!(check_trace_transposition(2, 4, 1).is_err());
    }

    #[test]
    fn grouped_trace_against_index_sums() {
        let rank = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(rank, 3, &mut rng).unwrap();
        let b = random_matrix(rank, 3, &mut rng).unwrap();
        let q = random_matrix(rank, 2, &mut rng).unwrap();
        let (lhs, rhs) = trace_transposition_sides(&a, &b, &q).unwrap();
        let n2 = rank * rank;
        for x in 0..rank {
            for y in 0..rank {
                let mut direct = c(0.0, 0.0);
                for i in 0..n2 {
                    for j in 0..n2 {
                        for k in 0..n2 {
                            for m in 0..rank {
                                direct += a.get(i * rank + x, j * rank + m)
                                    * q.get(j, k)
                                    * b.get(k * rank + m, i * rank + y);
                            }
                        }
                    }
                }
                assert!((lhs.get(x, y) - direct).norm() < 1e-12);
                assert!((rhs.get(x, y) - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_ybe() {
        for rank in [2, 3] {
            let p = params(rank).with_c(c(0.7, 0.0));
            let r = check_transposed_ybe(&p, X, X2, &tp()).unwrap();
            assert!(r.pass, "{r:?}");
            // x1 = x2 puts the middle factor on the pole of 1/kappa at z = q^{-N}.
            let same = check_transposed_ybe(&p, X, X, &tp()).unwrap_err();
            assert!(same.is_refusal());
        }
        let p0 = params(2).with_c(c(0.0, 0.0));
        let (s, _) = transposed_ybe_sides(&p0, X, X2, true, &tp()).unwrap();
        let (u, _) = transposed_ybe_sides(&p0, X, X2, false, &tp()).unwrap();
        assert!(crate::rmatrix::scaled_residual(&s.0, &u.0).0 < 1e-12);
    }

    #[test]
    fn w_kernels() {
        for rank in [2, 3] {
            let p = params(rank);
            let surf = SurfaceSpec::new(rank, 1);
            let k1 = build_w_kernel(1, X, &surf, &p, &tp()).unwrap();
            assert_eq!(k1, LegMatrix::identity(rank, 1));
            for s in 1..=rank {
                let r = check_w_kernel(s, X, &surf, &p, &tp()).unwrap();
                assert!(r.pass, "{r:?}");
            }
        }
        // For N = 2 the factor R*_13(q^{-N} z_1/z_3) sits at z^2 = q^{-4N}, a pole.
        let p = params(2);
        let err = build_w_kernel(3, X, &SurfaceSpec::new(2, 1), &p, &tp()).unwrap_err();
        assert!(err.is_refusal());
        assert!(build_w_kernel(4, X, &SurfaceSpec::new(2, 1), &p, &tp()).is_err());
    }
}
