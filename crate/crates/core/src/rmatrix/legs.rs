//! Dense complex matrices acting on an ordered tensor product of `s` legs of
//! equal dimension `N`.
//!
//! Multi-index convention: leg 1 is the slowest-varying digit, so a row index
//! is `sum_k i_k N^{s-k}` for leg digits `i_1 .. i_s`. Legs are numbered from 1
//! in the public API.

use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Condition estimate above which inverses are refused.
pub const COND_LIMIT: f64 = 1e10;

#[derive(Clone, Debug, PartialEq)]
pub struct LegMatrix {
    dim: usize,
    legs: usize,
    data: DMatrix<C64>,
}

impl LegMatrix {
    pub fn from_matrix(dim: usize, legs: usize, data: DMatrix<C64>) -> Result<Self> {
        let size = checked_size(dim, legs)?;
        if data.nrows() != size || data.ncols() != size {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{}, expected {size}x{size} for {legs} legs of dimension {dim}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(LegMatrix { dim, legs, data })
    }

    pub fn from_fn(dim: usize, legs: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let size = checked_size(dim, legs)?;
        Ok(LegMatrix {
            dim,
            legs,
            data: DMatrix::from_fn(size, size, f),
        })
    }

    pub fn identity(dim: usize, legs: usize) -> Self {
        let size = dim.pow(legs as u32);
        LegMatrix {
            dim,
            legs,
            data: DMatrix::identity(size, size),
        }
    }

    pub fn zeros(dim: usize, legs: usize) -> Self {
        let size = dim.pow(legs as u32);
        LegMatrix {
            dim,
            legs,
            data: DMatrix::zeros(size, size),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn legs(&self) -> usize {
        self.legs
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    /// Entry addressed by leg digits `(rows, cols)`, each of length `legs`.
    pub fn entry(&self, rows: &[usize], cols: &[usize]) -> C64 {
        self.data[(self.compose(rows), self.compose(cols))]
    }

    pub fn decompose(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.legs];
        for d in digits.iter_mut().rev() {
            *d = index % self.dim;
            index /= self.dim;
        }
        digits
    }

    pub fn compose(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.dim + d)
    }

    pub fn scale(&self, s: C64) -> LegMatrix {
        LegMatrix {
            data: &self.data * s,
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Tensor product `self ⊗ other`; the legs of `self` come first.
    pub fn kron(&self, other: &LegMatrix) -> Result<LegMatrix> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument(
                "kron of legs with different dimensions".into(),
            ));
        }
        Ok(LegMatrix {
            dim: self.dim,
            legs: self.legs + other.legs,
            data: self.data.kronecker(&other.data),
        })
    }

    fn check_leg(&self, leg: usize) -> Result<()> {
        if leg == 0 || leg > self.legs {
            return Err(Error::InvalidArgument(format!(
                "leg {leg} out of range 1..={}",
                self.legs
            )));
        }
        Ok(())
    }

    /// Transposes the row and column digits of one leg.
    pub fn partial_transpose(&self, leg: usize) -> Result<LegMatrix> {
        self.check_leg(leg)?;
        let stride = self.dim.pow((self.legs - leg) as u32);
        let dim = self.dim;
        let digit = |i: usize| (i / stride) % dim;
        let size = self.size();
        let data = DMatrix::from_fn(size, size, |r, c| {
            let (dr, dc) = (digit(r), digit(c));
            let r2 = r - dr * stride + dc * stride;
            let c2 = c - dc * stride + dr * stride;
            self.data[(r2, c2)]
        });
        Ok(LegMatrix { data, ..*self })
    }

    /// Partial transpose over several legs.
    pub fn partial_transpose_legs(&self, legs: &[usize]) -> Result<LegMatrix> {
        let mut out = self.clone();
        for &leg in legs {
            out = out.partial_transpose(leg)?;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> LegMatrix {
        LegMatrix {
            data: self.data.transpose(),
            ..self.clone()
        }
    }

    /// Partial trace over the listed legs; the remaining legs keep their
    /// relative order.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<LegMatrix> {
        for &leg in traced {
            self.check_leg(leg)?;
        }
        let kept: Vec<usize> = (1..=self.legs).filter(|l| !traced.contains(l)).collect();
        let mut out = LegMatrix::zeros(self.dim, kept.len());
        for r in 0..self.size() {
            let rd = self.decompose(r);
            for c in 0..self.size() {
                let cd = self.decompose(c);
                if traced.iter().any(|&l| rd[l - 1] != cd[l - 1]) {
                    continue;
                }
                let rk: Vec<usize> = kept.iter().map(|&l| rd[l - 1]).collect();
                let ck: Vec<usize> = kept.iter().map(|&l| cd[l - 1]).collect();
                let (i, j) = (out.compose(&rk), out.compose(&ck));
                out.data[(i, j)] += self.data[(r, c)];
            }
        }
        Ok(out)
    }

    /// Inverse by LU with partial pivoting, with the 1-norm condition number
    /// `||A||_1 ||A^{-1}||_1`. Refuses when the condition exceeds
    /// [`COND_LIMIT`].
    pub fn inverse_with_cond(&self) -> Result<(LegMatrix, f64)> {
        let inv = self.data.clone().lu().try_inverse().ok_or_else(|| {
            Error::SingularMatrix(format!(
                "{}x{} LU has a zero pivot",
                self.size(),
                self.size()
            ))
        })?;
        let cond = norm_1(&self.data) * norm_1(&inv);
        if !cond.is_finite() || cond > COND_LIMIT {
            return Err(Error::IllConditioned {
                cond,
                limit: COND_LIMIT,
            });
        }
        Ok((LegMatrix { data: inv, ..*self }, cond))
    }

    pub fn inverse(&self) -> Result<LegMatrix> {
        self.inverse_with_cond().map(|(m, _)| m)
    }

    /// Writes `row col re im` lines (1-based indices) after a `%` header.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%LegMatrix dim={} legs={}", self.dim, self.legs)?;
        writeln!(w, "{} {}", self.size(), self.size())?;
        for r in 0..self.size() {
            for c in 0..self.size() {
                let z = self.data[(r, c)];
                writeln!(w, "{} {} {:e} {:e}", r + 1, c + 1, z.re, z.im)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<LegMatrix> {
        let mut lines = r.lines();
        let bad = |m: &str| Error::InvalidArgument(format!("leg matrix text: {m}"));
        let header = lines.next().ok_or_else(|| bad("empty input"))??;
        let mut dim = None;
        let mut legs = None;
        for tok in header.split_whitespace().skip(1) {
            if let Some(v) = tok.strip_prefix("dim=") {
                dim = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("legs=") {
                legs = v.parse::<usize>().ok();
            }
        }
        let (dim, legs) = dim.zip(legs).ok_or_else(|| bad("header lacks dim/legs"))?;
        let mut out = LegMatrix::zeros(dim, legs);
        let _sizes = lines.next().ok_or_else(|| bad("missing size line"))??;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('%') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("expected four fields per entry"));
            }
            let r: usize = f[0].parse().map_err(|_| bad("row"))?;
            let c: usize = f[1].parse().map_err(|_| bad("col"))?;
            let re: f64 = f[2].parse().map_err(|_| bad("re"))?;
            let im: f64 = f[3].parse().map_err(|_| bad("im"))?;
            if r == 0 || c == 0 || r > out.size() || c > out.size() {
                return Err(bad("index out of range"));
            }
            out.data[(r - 1, c - 1)] = C64::new(re, im);
        }
        Ok(out)
    }
}

fn checked_size(dim: usize, legs: usize) -> Result<usize> {
    if dim == 0 || legs == 0 {
        return Err(Error::InvalidArgument(
            "leg matrices need dim >= 1 and legs >= 1".into(),
        ));
    }
    dim.checked_pow(legs as u32)
        .filter(|&s| s <= 4096)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{legs} legs of dimension {dim} is too large"))
        })
}

fn norm_1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn same_shape(a: &LegMatrix, b: &LegMatrix) {
    assert!(
        a.dim == b.dim && a.legs == b.legs,
        "leg shape mismatch: {}^{} vs {}^{}",
        a.dim,
        a.legs,
        b.dim,
        b.legs
    );
}

impl Mul for &LegMatrix {
    type Output = LegMatrix;
    fn mul(self, rhs: &LegMatrix) -> LegMatrix {
        same_shape(self, rhs);
        LegMatrix {
            data: &self.data * &rhs.data,
            ..*self
        }
    }
}

impl Add for &LegMatrix {
    type Output = LegMatrix;
    fn add(self, rhs: &LegMatrix) -> LegMatrix {
        same_shape(self, rhs);
        LegMatrix {
            data: &self.data + &rhs.data,
            ..*self
        }
    }
}

impl Sub for &LegMatrix {
    type Output = LegMatrix;
    fn sub(self, rhs: &LegMatrix) -> LegMatrix {
        same_shape(self, rhs);
        LegMatrix {
            data: &self.data - &rhs.data,
            ..*self
        }
    }
}

/// Operator swapping legs `i < j` on `s` legs of dimension `dim`.
pub fn permutation_op(s: usize, i: usize, j: usize, dim: usize) -> Result<LegMatrix> {
    if !(1 <= i && i < j && j <= s) {
        return Err(Error::InvalidArgument(format!(
            "permutation P_{i}{j} needs 1 <= i < j <= {s}"
        )));
    }
    let mut out = LegMatrix::zeros(dim, s);
    for col in 0..out.size() {
        let mut d = out.decompose(col);
        d.swap(i - 1, j - 1);
        let row = out.compose(&d);
        out.data[(row, col)] = C64::new(1.0, 0.0);
    }
    Ok(out)
}

/// Places the first leg of a two-leg matrix on slot `i` and its second leg on
/// slot `j` of an `s`-leg space, with the identity elsewhere.
pub fn embed(m: &LegMatrix, s: usize, i: usize, j: usize) -> Result<LegMatrix> {
    if m.legs != 2 {
        return Err(Error::InvalidArgument(format!(
            "embed expects a two-leg matrix, got {} legs",
            m.legs
        )));
    }
    if i == j || i == 0 || j == 0 || i > s || j > s {
        return Err(Error::InvalidArgument(format!(
            "embedding slots ({i}, {j}) invalid for {s} legs"
        )));
    }
    let mut out = LegMatrix::zeros(m.dim, s);
    let size = out.size();
    for r in 0..size {
        let rd = out.decompose(r);
        for c in 0..size {
            let cd = out.decompose(c);
            let spectator_match = (0..s).all(|k| k == i - 1 || k == j - 1 || rd[k] == cd[k]);
            if !spectator_match {
                continue;
            }
            let mr = rd[i - 1] * m.dim + rd[j - 1];
            let mc = cd[i - 1] * m.dim + cd[j - 1];
            out.data[(r, c)] = m.data[(mr, mc)];
        }
    }
    Ok(out)
}

/// Places a one-leg matrix on slot `i` of an `s`-leg space.
pub fn embed_one(m: &LegMatrix, s: usize, i: usize) -> Result<LegMatrix> {
    if m.legs != 1 || i == 0 || i > s {
        return Err(Error::InvalidArgument(format!(
            "cannot place a {}-leg matrix on slot {i} of {s}",
            m.legs
        )));
    }
    let mut out = LegMatrix::identity(m.dim, i - 1).data;
    if i == 1 {
        out = DMatrix::identity(1, 1);
    }
    let out = out.kronecker(&m.data).kronecker(&DMatrix::<C64>::identity(
        m.dim.pow((s - i) as u32),
        m.dim.pow((s - i) as u32),
    ));
    LegMatrix::from_matrix(m.dim, s, out)
}

/// `M_{21} = P M_{12} P` for a two-leg matrix.
pub fn swap_legs(m: &LegMatrix) -> Result<LegMatrix> {
    embed(m, 2, 2, 1)
}

/// `max|lhs - rhs| / max(1, max|lhs|)` and the scale used.
pub fn scaled_residual(lhs: &LegMatrix, rhs: &LegMatrix) -> (f64, f64) {
    let scale = lhs.max_abs().max(1.0);
    ((lhs - rhs).max_abs() / scale, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dim: usize, legs: usize, rng: &mut ChaCha8Rng) -> LegMatrix {
        LegMatrix::from_fn(dim, legs, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .unwrap()
    }

    #[test]
    fn partial_transpose_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random(3, 2, &mut rng);
        for leg in 1..=2 {
            let back = m
                .partial_transpose(leg)
                .unwrap()
                .partial_transpose(leg)
                .unwrap();
            assert_eq!(back, m);
        }
        let full = m.partial_transpose_legs(&[1, 2]).unwrap();
        assert_eq!(full, m.transpose());
        assert!(m.partial_transpose(3).is_err());
        assert!(m.partial_transpose(0).is_err());
    }

    #[test]
    fn partial_transpose_keeps_trace_but_not_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(2, 2, &mut rng);
        let b = random(2, 2, &mut rng);
        let ab_t1 = (&a * &b).partial_transpose(1).unwrap();
        let at_bt = &a.partial_transpose(1).unwrap() * &b.partial_transpose(1).unwrap();
        assert!((&ab_t1 - &at_bt).max_abs() > 1e-3);
        assert!((a.partial_transpose(1).unwrap().trace() - a.trace()).norm() < 1e-15);
    }

    #[test]
    fn partial_transpose_by_digits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random(2, 3, &mut rng);
        let t = m.partial_transpose(2).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                let (mut rd, mut cd) = (m.decompose(r), m.decompose(c));
                std::mem::swap(&mut rd[1], &mut cd[1]);
                assert_eq!(t.get(r, c), m.entry(&rd, &cd));
            }
        }
    }

    #[test]
    fn permutations() {
        let p = permutation_op(2, 1, 2, 3).unwrap();
        assert_eq!(&p * &p, LegMatrix::identity(3, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dim in [2, 3] {
            let a = random(dim, 1, &mut rng);
            let b = random(dim, 1, &mut rng);
            let p = permutation_op(2, 1, 2, dim).unwrap();
            let lhs = &(&p * &a.kron(&b).unwrap()) * &p;
            assert!((&lhs - &b.kron(&a).unwrap()).max_abs() < 1e-15);
        }
        assert!(permutation_op(3, 2, 2, 2).is_err());
        assert!(permutation_op(3, 2, 4, 2).is_err());
    }

    #[test]
    fn embedding_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random(2, 2, &mut rng);
        assert_eq!(embed(&m, 2, 1, 2).unwrap(), m);
        assert_eq!(
            embed(&LegMatrix::identity(3, 2), 3, 1, 3).unwrap(),
            LegMatrix::identity(3, 3)
        );
        let p = permutation_op(2, 1, 2, 2).unwrap();
        assert!((&swap_legs(&m).unwrap() - &(&(&p * &m) * &p)).max_abs() < 1e-15);
        assert!(embed(&m, 3, 2, 2).is_err());
    }

    #[test]
    fn embedding_against_index_sums() {
        // Contract the embedded matrix against a pure tensor and compare with
        // an explicit sum over the digits.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dim = 2;
        let m = random(dim, 2, &mut rng);
        let vecs: Vec<Vec<C64>> = (0..3)
            .map(|_| {
                (0..dim)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let e = embed(&m, 3, 3, 1).unwrap();
        for out_idx in 0..8 {
            let od = e.decompose(out_idx);
            let mut direct = C64::new(0.0, 0.0);
            for c in 0..8 {
                let cd = e.decompose(c);
                direct += e.get(out_idx, c) * vecs[0][cd[0]] * vecs[1][cd[1]] * vecs[2][cd[2]];
            }
            // Leg 3 carries the first leg of m, leg 1 its second.
            let mut oracle = C64::new(0.0, 0.0);
            for a in 0..dim {
                for b in 0..dim {
                    oracle += m.entry(&[od[2], od[0]], &[a, b]) * vecs[2][a] * vecs[0][b];
                }
            }
            oracle *= vecs[1][od[1]];
            assert!((direct - oracle).norm() < 1e-14);
        }
    }

    #[test]
    fn partial_trace_and_one_leg_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(2, 1, &mut rng);
        let b = random(2, 1, &mut rng);
        let ab = a.kron(&b).unwrap();
        let tr1 = ab.partial_trace(&[1]).unwrap();
        assert!((&tr1 - &b.scale(a.trace())).max_abs() < 1e-14);
        let placed = embed_one(&a, 3, 2).unwrap();
        let expect = LegMatrix::identity(2, 1)
            .kron(&a)
            .unwrap()
            .kron(&LegMatrix::identity(2, 1))
            .unwrap();
        assert_eq!(placed, expect);
    }

    #[test]
    fn inverse_and_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random(2, 2, &mut rng);
        let (inv, cond) = m.inverse_with_cond().unwrap();
        assert!(cond >= 1.0);
        assert!((&(&m * &inv) - &LegMatrix::identity(2, 2)).max_abs() < 1e-12);
        let singular = LegMatrix::zeros(2, 2);
        assert!(singular.inverse().unwrap_err().is_refusal());
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random(2, 2, &mut rng);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = LegMatrix::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
