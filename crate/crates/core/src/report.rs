//! Check reports and their JSON-lines form.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::params::{LogParams, SpectralPoint};
use crate::rmatrix::{scaled_residual, LegMatrix};
use crate::C64;

pub fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn from_pair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

/// Everything needed to reproduce a check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    #[serde(rename = "N")]
    pub rank: usize,
    pub n: Option<i64>,
    pub h: Option<i64>,
    pub zeta: [f64; 2],
    pub tau: [f64; 2],
    pub c: Option<[f64; 2]>,
    pub points: Vec<[f64; 2]>,
    pub seed: Option<u64>,
}

impl ParamRecord {
    pub fn new(params: &LogParams, points: &[SpectralPoint]) -> Self {
        ParamRecord {
            rank: params.rank,
            n: None,
            h: None,
            zeta: pair(params.zeta),
            tau: pair(params.tau),
            c: params.c.map(pair),
            points: points.iter().map(|p| pair(p.xi)).collect(),
            seed: None,
        }
    }

    pub fn with_n(mut self, n: i64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_h(mut self, h: i64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// A named identity evaluated at one parameter record.
///
/// `residual = max|LHS - RHS| / max(1, max|LHS|)`, `pass = residual < tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub record: ParamRecord,
    pub residual: f64,
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
    /// 1-norm condition estimate of the worst matrix inverted, if any.
    pub cond: Option<f64>,
}

impl CheckReport {
    pub fn new(name: &str, record: ParamRecord, residual: f64, scale: f64, tol: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            record,
            residual,
            scale,
            tol,
            pass: residual < tol,
            cond: None,
        }
    }

    pub fn matrices(
        name: &str,
        record: ParamRecord,
        lhs: &LegMatrix,
        rhs: &LegMatrix,
        tol: f64,
    ) -> Self {
        let (residual, scale) = scaled_residual(lhs, rhs);
        CheckReport::new(name, record, residual, scale, tol)
    }

    pub fn scalars(name: &str, record: ParamRecord, lhs: C64, rhs: C64, tol: f64) -> Self {
        let (residual, scale) = scalar_residual(lhs, rhs);
        CheckReport::new(name, record, residual, scale, tol)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.pass = self.residual < tol;
        self
    }

    pub fn with_cond(mut self, cond: Option<f64>) -> Self {
        self.cond = match (self.cond, cond) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self
    }

    /// Keeps the larger residual of two reports on the same record.
    pub fn worst(self, other: CheckReport) -> CheckReport {
        let cond = other.cond;
        let mut out = if other.residual > self.residual || other.residual.is_nan() {
            other
        } else {
            self
        };
        out = out.with_cond(cond);
        out.pass = out.residual < out.tol;
        out
    }
}

pub fn scalar_residual(lhs: C64, rhs: C64) -> (f64, f64) {
    let scale = lhs.norm().max(1.0);
    ((lhs - rhs).norm() / scale, scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Refused,
}

/// One line of the JSON-lines report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub name: String,
    #[serde(rename = "N")]
    pub rank: usize,
    pub n: Option<i64>,
    pub h: Option<i64>,
    pub zeta: [f64; 2],
    pub tau: [f64; 2],
    pub c: Option<[f64; 2]>,
    pub points: Vec<[f64; 2]>,
    pub seed: Option<u64>,
    pub residual: Option<f64>,
    pub scale: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    pub status: Status,
    pub cell: usize,
    pub cond: Option<f64>,
    pub message: Option<String>,
}

impl ReportLine {
    pub fn from_report(report: &CheckReport, cell: usize) -> Self {
        let r = &report.record;
        ReportLine {
            name: report.name.clone(),
            rank: r.rank,
            n: r.n,
            h: r.h,
            zeta: r.zeta,
            tau: r.tau,
            c: r.c,
            points: r.points.clone(),
            seed: r.seed,
            residual: Some(report.residual),
            scale: Some(report.scale),
            tol: report.tol,
            pass: report.pass,
            status: if report.pass {
                Status::Pass
            } else {
                Status::Fail
            },
            cell,
            cond: report.cond,
            message: None,
        }
    }

    /// A refused or errored cell. Errors that are not refusals count as
    /// failures.
    pub fn from_error(
        name: &str,
        record: &ParamRecord,
        tol: f64,
        cell: usize,
        err: &Error,
    ) -> Self {
        ReportLine {
            name: name.to_string(),
            rank: record.rank,
            n: record.n,
            h: record.h,
            zeta: record.zeta,
            tau: record.tau,
            c: record.c,
            points: record.points.clone(),
            seed: record.seed,
            residual: None,
            scale: None,
            tol,
            pass: false,
            status: if err.is_refusal() {
                Status::Refused
            } else {
                Status::Fail
            },
            cell,
            cond: None,
            message: Some(err.to_string()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report lines always serialize")
    }
}
