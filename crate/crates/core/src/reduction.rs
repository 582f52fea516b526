//! Data-adaptive Krylov dimension-reducing transforms.
//!
//! All three constructions span `K_N(R, a) = span{a, R a, ..., R^{N-1} a}`
//! in exact arithmetic; they differ in conditioning and in what they make
//! cheap downstream:
//!
//! - [`por_krylov`]: normalized powers of `R` applied to `a`. Non-orthogonal.
//! - [`o_krylov`]: each new power is projected off the previous columns
//!   through a rank-one-updated complement projector. Orthonormal.
//! - [`cg_drt`]: conjugate-gradient search directions. `R`-conjugate, so
//!   `D^H R D` is diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inner, real, ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::uncertainty::DimensionReducer;

/// Relative size below which a new Krylov direction counts as null.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Residual (relative to a unit column) below which a power-of-R column is
/// treated as linearly dependent on the previous ones.
pub const POR_DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DrtMethod {
    #[serde(rename = "por-no", alias = "por")]
    PorNonOrthogonal,
    #[serde(rename = "o-krylov", alias = "por-o")]
    PorOrthogonal,
    #[serde(rename = "cg")]
    ConjugateGradient,
}

impl DrtMethod {
    pub const ALL: [DrtMethod; 3] = [
        DrtMethod::PorNonOrthogonal,
        DrtMethod::PorOrthogonal,
        DrtMethod::ConjugateGradient,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DrtMethod::PorNonOrthogonal => "PoR-NO",
            DrtMethod::PorOrthogonal => "O-Krylov",
            DrtMethod::ConjugateGradient => "CG",
        }
    }

    pub fn build(self, r: &HermitianMatrix, a: &ComplexVector, n: usize) -> Result<DrtBuildResult> {
        match self {
            DrtMethod::PorNonOrthogonal => por_krylov(r, a, n),
            DrtMethod::PorOrthogonal => o_krylov(r, a, n),
            DrtMethod::ConjugateGradient => cg_drt(r, a, n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DrtBuildResult {
    pub reducer: DimensionReducer,
    pub effective_rank: usize,
    pub flops: u64,
    pub method: DrtMethod,
}

/// Flop model for building an `M x N` transform: `N M (M + 1)` for PoR,
/// `N M (3M + 1)` for the orthogonal variant and `N M (M + 5)` for CG.
pub fn flop_count(method: DrtMethod, m: u64, n: u64) -> u64 {
    let per_column = match method {
        DrtMethod::PorNonOrthogonal => m + 1,
        DrtMethod::PorOrthogonal => 3 * m + 1,
        DrtMethod::ConjugateGradient => m + 5,
    };
    n * m * per_column
}

fn check_inputs(r: &HermitianMatrix, a: &ComplexVector, n: usize) -> Result<f64> {
    let m = r.dim();
    if a.len() != m {
        return Err(Error::InvalidInput(format!(
            "nominal ASV length {} does not match covariance dimension {m}",
            a.len()
        )));
    }
    if n == 0 || n > m {
        return Err(Error::InvalidInput(format!("reduced dimension {n} not in 1..={m}")));
    }
    let norm = a.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidInput("nominal ASV must be non-zero and finite".into()));
    }
    Ok(norm)
}

fn finish(method: DrtMethod, columns: Vec<ComplexVector>, diagonal: Option<Vec<f64>>) -> Result<DrtBuildResult> {
    let m = columns[0].len();
    let mut cols = columns;
    let mut diagonal = diagonal;
    // Numerically dependent trailing columns are dropped until the reducer
    // passes its rank test.
    loop {
        let d = ComplexMatrix::from_columns(&cols);
        let built = match &diagonal {
            Some(l) => DimensionReducer::with_cg_diagonal(d, l.clone()),
            None => DimensionReducer::new(d),
        };
        match built {
            Ok(reducer) => {
                let rank = cols.len();
                return Ok(DrtBuildResult {
                    reducer,
                    effective_rank: rank,
                    flops: flop_count(method, m as u64, rank as u64),
                    method,
                });
            }
            Err(Error::InvalidReducer(_)) if cols.len() > 1 => {
                cols.pop();
                if let Some(l) = diagonal.as_mut() {
                    l.pop();
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Normalized powers of `R` applied to `a`.
pub fn por_krylov(r: &HermitianMatrix, a: &ComplexVector, n: usize) -> Result<DrtBuildResult> {
    let norm = check_inputs(r, a, n)?;
    let mut columns = vec![a / real(norm)];
    // orthonormal shadow basis, used only for the dependence test
    let mut basis = vec![columns[0].clone()];
    for _ in 1..n {
        let kappa = r.mul_vec(columns.last().expect("non-empty"));
        let kn = kappa.norm();
        if !(kn > 0.0) {
            break;
        }
        let d = kappa / real(kn);
        let mut resid = d.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &resid);
                resid -= q * c;
            }
        }
        let rn = resid.norm();
        if rn < POR_DEPENDENCE_TOL {
            break;
        }
        basis.push(resid / real(rn));
        columns.push(d);
    }
    finish(DrtMethod::PorNonOrthogonal, columns, None)
}

/// Orthonormal Krylov basis via the complement projector
/// `P_i = P_{i-1} - d_i d_i^H`.
pub fn o_krylov(r: &HermitianMatrix, a: &ComplexVector, n: usize) -> Result<DrtBuildResult> {
    let norm = check_inputs(r, a, n)?;
    let m = r.dim();
    let d1 = a / real(norm);
    let mut complement = ComplexMatrix::identity(m, m) - &d1 * d1.adjoint();
    let mut columns = vec![d1];
    for _ in 1..n {
        let rk = r.mul_vec(columns.last().expect("non-empty"));
        let scale = rk.norm();
        let mut kappa = &complement * &rk;
        // second projection when cancellation is severe
        if kappa.norm() < 0.7 * scale {
            kappa = &complement * kappa;
        }
        let kn = kappa.norm();
        if !(kn > BREAKDOWN_TOL * scale) {
            break;
        }
        let d = kappa / real(kn);
        complement -= &d * d.adjoint();
        columns.push(d);
    }
    finish(DrtMethod::PorOrthogonal, columns, None)
}

/// Conjugate-gradient directions started from `d_1 = a`, `r_1 = -a`:
///
/// ```text
/// alpha_i = -(d_i^H r_i) / (d_i^H R d_i)
/// r_{i+1} = r_i + alpha_i R d_i
/// beta_i  = (d_i^H R r_{i+1}) / (d_i^H R d_i)
/// d_{i+1} = -r_{i+1} + beta_i d_i
/// ```
///
/// Columns are kept unnormalized; the reducer records `d_i^H R d_i`.
pub fn cg_drt(r: &HermitianMatrix, a: &ComplexVector, n: usize) -> Result<DrtBuildResult> {
    let norm = check_inputs(r, a, n)?;
    let scale = r.trace() / r.dim() as f64;
    let mut d = a.clone();
    let mut resid = -a;
    let mut columns = Vec::with_capacity(n);
    let mut diagonal = Vec::with_capacity(n);
    loop {
        let rd = r.mul_vec(&d);
        let den = inner(&d, &rd).re;
        if !(den > BREAKDOWN_TOL * scale * d.norm_squared()) {
            return Err(Error::Breakdown(format!(
                "d^H R d = {den:e} at column {}; covariance is not positive definite",
                columns.len() + 1
            )));
        }
        columns.push(d.clone());
        diagonal.push(den);
        if columns.len() == n {
            break;
        }
        let alpha = -inner(&d, &resid) / den;
        resid += &rd * alpha;
        if resid.norm() < BREAKDOWN_TOL * norm {
            break;
        }
        let beta = inner(&rd, &resid) / den;
        d = -&resid + &d * beta;
    }
    finish(DrtMethod::ConjugateGradient, columns, Some(diagonal))
}
