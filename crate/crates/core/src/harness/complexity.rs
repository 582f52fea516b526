//! Flop tables for the three reducer constructions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reduction::{flop_count, DrtMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub n: u64,
    pub por_no: u64,
    pub o_krylov: u64,
    pub cg: u64,
    /// O-Krylov over PoR-NO.
    pub o_krylov_ratio: f64,
    /// CG over PoR-NO.
    pub cg_ratio: f64,
}

pub fn complexity_report(m: u64, n_grid: &[u64]) -> Result<Vec<ComplexityRow>> {
    if m == 0 {
        return Err(Error::InvalidInput("array size must be >= 1".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            if n == 0 || n > m {
                return Err(Error::InvalidInput(format!("N = {n} not in 1..={m}")));
            }
            let por_no = flop_count(DrtMethod::PorNonOrthogonal, m, n);
            let o_krylov = flop_count(DrtMethod::PorOrthogonal, m, n);
            let cg = flop_count(DrtMethod::ConjugateGradient, m, n);
            Ok(ComplexityRow {
                n,
                por_no,
                o_krylov,
                cg,
                o_krylov_ratio: o_krylov as f64 / por_no as f64,
                cg_ratio: cg as f64 / por_no as f64,
            })
        })
        .collect()
}

pub fn render_complexity(m: u64, rows: &[ComplexityRow]) -> String {
    let mut out = format!(
        "M = {m}\n{:>6} {:>16} {:>16} {:>16} {:>10} {:>10}\n",
        "N", "PoR-NO", "O-Krylov", "CG", "OK/PoR", "CG/PoR"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>6} {:>16} {:>16} {:>16} {:>10.4} {:>10.4}\n",
            r.n, r.por_no, r.o_krylov, r.cg, r.o_krylov_ratio, r.cg_ratio
        ));
    }
    out
}
