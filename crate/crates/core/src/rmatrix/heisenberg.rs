//! Clock and shift matrices of the finite Heisenberg group.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::MAX_RANK;
use crate::rmatrix::legs::LegMatrix;
use crate::C64;

/// `g = diag(omega^i)`, `h_{ij} = delta_{i+1, j mod N}`, `g^{1/2} =
/// diag(exp(i pi j / N))` and `a = g^{1/2} h g^{1/2}`, indices `0..N-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergSet {
    pub g: LegMatrix,
    pub h: LegMatrix,
    pub sqrt_g: LegMatrix,
    pub a: LegMatrix,
    pub omega: C64,
}

pub fn build_heisenberg(rank: usize) -> Result<HeisenbergSet> {
    if rank < 2 {
        return Err(Error::UnsupportedRank {
            rank,
            reason: "rank must be at least 2",
        });
    }
    if rank > MAX_RANK {
        return Err(Error::UnsupportedRank {
            rank,
            reason: "rank above the dense-matrix guard",
        });
    }
    let n = rank as f64;
    let phase = |x: f64| C64::from_polar(1.0, x);
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let g = LegMatrix::from_fn(rank, 1, |i, j| {
        if i == j {
            phase(2.0 * PI * i as f64 / n)
        } else {
            zero
        }
    })?;
    let h = LegMatrix::from_fn(rank, 1, |i, j| if (i + 1) % rank == j { one } else { zero })?;
    let sqrt_g = LegMatrix::from_fn(rank, 1, |i, j| {
        if i == j {
            phase(PI * i as f64 / n)
        } else {
            zero
        }
    })?;
    let a = &(&sqrt_g * &h) * &sqrt_g;
    Ok(HeisenbergSet {
        g,
        h,
        sqrt_g,
        a,
        omega: phase(2.0 * PI / n),
    })
}

impl HeisenbergSet {
    pub fn rank(&self) -> usize {
        self.g.dim()
    }

    /// `I_{(a1, a2)} = g^{a2} h^{a1}`.
    pub fn build_i(&self, a1: usize, a2: usize) -> Result<LegMatrix> {
        let n = self.rank();
        if a1 >= n || a2 >= n {
            return Err(Error::InvalidArgument(format!(
                "I_({a1},{a2}) needs indices below {n}"
            )));
        }
        Ok(&power(&self.g, a2) * &power(&self.h, a1))
    }

    /// `a^n`; negative powers use `a^{-1} = a^dagger` (a is unitary).
    pub fn a_pow(&self, n: i64) -> LegMatrix {
        if n >= 0 {
            power(&self.a, n as usize)
        } else {
            let adj = LegMatrix::from_matrix(self.rank(), 1, self.a.matrix().adjoint())
                .expect("adjoint keeps the shape");
            power(&adj, n.unsigned_abs() as usize)
        }
    }

    /// `g^{-1}`, the complex conjugate of the diagonal `g`.
    pub fn g_inv(&self) -> LegMatrix {
        LegMatrix::from_matrix(self.rank(), 1, self.g.matrix().adjoint())
            .expect("adjoint keeps the shape")
    }
}

pub fn build_i(hs: &HeisenbergSet, a1: usize, a2: usize) -> Result<LegMatrix> {
    hs.build_i(a1, a2)
}

fn power(m: &LegMatrix, k: usize) -> LegMatrix {
    let mut out = LegMatrix::identity(m.dim(), m.legs());
    for _ in 0..k {
        out = &out * m;
    }
    out
}
