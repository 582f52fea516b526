//! Quick oracle-equivalence checks run by the `selftest` subcommand.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::array::{complex_normal, substream};
use crate::error::{Error, Result};
use crate::harness::complexity::complexity_report;
use crate::numerics::{real, ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::reduction::{cg_drt, DrtMethod};
use crate::solver::{cg_rdrcb_fast, newton_mu, rcb_elementspace, rdrcb_generic};
use crate::uncertainty::{
    propagate_general, propagate_nondegenerate, DimensionReducer, Ellipsoid, SphereSet,
    UncertaintySet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestCheck {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl SelfTestCheck {
    pub fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
}

fn random_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rows, cols);
    for j in 0..cols {
        out.set_column(j, &complex_normal(rng, rows));
    }
    out
}

fn random_pd(rng: &mut ChaCha20Rng, m: usize) -> HermitianMatrix {
    let b = random_matrix(rng, m, m);
    HermitianMatrix::new(b.ad_mul(&b)).expect("square").add_identity(0.5)
}

fn rel(a: &ComplexVector, b: &ComplexVector) -> f64 {
    (a - b).norm() / b.norm()
}

fn check_propagation(rng: &mut ChaCha20Rng, cases: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let m = rng.random_range(4..=12);
        let n = rng.random_range(1..m);
        let e = Ellipsoid::new(complex_normal(rng, m), random_pd(rng, m))?;
        let drt = DimensionReducer::new(random_matrix(rng, m, n))?;
        let g = propagate_general(&e, &drt)?;
        let nd = propagate_nondegenerate(&e, &drt)?;
        let err = (g.shape().as_matrix() - nd.shape().as_matrix()).norm() / nd.shape().frobenius();
        worst = worst.max(err);
    }
    Ok(worst)
}

fn check_cg_diagonal(rng: &mut ChaCha20Rng, cases: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let m = rng.random_range(8..=32);
        let n = rng.random_range(1..=8);
        let r = random_pd(rng, m);
        let a = complex_normal(rng, m);
        let built = cg_drt(&r, &a, n)?;
        worst = worst.max(built.reducer.diagonalization_residual(&r));
    }
    Ok(worst)
}

fn check_fast_solver(rng: &mut ChaCha20Rng, cases: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for k in 0..cases {
        let m = rng.random_range(6..=16);
        let n = rng.random_range(2..=5);
        let r = random_pd(rng, m);
        let a = complex_normal(rng, m) * real(2.0);
        let built = DrtMethod::ConjugateGradient.build(&r, &a, n)?;
        // Ellipsoids are redrawn until the reduced set is feasible too.
        let mut attempt = 0;
        let (fast, slow) = loop {
            let set: UncertaintySet = if k % 2 == 0 {
                SphereSet::new(a.clone(), 0.3 * a.norm_squared())?.into()
            } else {
                let e = random_pd(rng, m);
                let scale = 3.0 / e.quad_form(&a);
                Ellipsoid::new(a.clone(), e.scaled(scale))?.into()
            };
            attempt += 1;
            match rdrcb_generic(&r, &built.reducer, &set) {
                Err(Error::PropagatedInfeasible { .. }) if attempt < 100 => continue,
                slow => break (cg_rdrcb_fast(&r, &built.reducer, &set)?, slow?),
            }
        };
        let errs = [
            rel(fast.rd_asv.as_ref().unwrap(), slow.rd_asv.as_ref().unwrap()),
            rel(&fast.weights_es, &slow.weights_es),
            (fast.power - slow.power).abs() / slow.power,
        ];
        worst = errs.iter().copied().fold(worst, f64::max);
    }
    Ok(worst)
}

fn check_identity_collapse(rng: &mut ChaCha20Rng, cases: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let m = rng.random_range(2..=10);
        let r = random_pd(rng, m);
        let a = complex_normal(rng, m);
        let set: UncertaintySet = SphereSet::new(a.clone(), 0.5 * a.norm_squared())?.into();
        let full = rcb_elementspace(&r, &set)?;
        let reduced = rdrcb_generic(&r, &DimensionReducer::identity(m), &set)?;
        worst = worst
            .max(rel(&reduced.asv_estimate, &full.asv_estimate))
            .max(rel(&reduced.weights_es, &full.weights_es));
    }
    Ok(worst)
}

fn check_root_finder() -> Result<f64> {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (&[1.0], &[4.0], 1.0),
        (&[2.0], &[8.0], 2.0),
        (&[1.0, 1.0], &[2.0, 2.0], 1.0),
    ];
    let mut worst = 0.0_f64;
    for (l, c, mu) in cases {
        worst = worst.max((newton_mu(l, c)?.root - mu).abs());
    }
    Ok(worst)
}

fn check_flops() -> Result<f64> {
    let r = complexity_report(320, &[10])?[0];
    let ok = (r.por_no, r.o_krylov, r.cg) == (1_027_200, 3_075_200, 1_040_000);
    Ok(if ok { 0.0 } else { 1.0 })
}

/// Runs every check on a fixed random stream derived from `seed`.
pub fn run_selftest(seed: u64) -> Result<Vec<SelfTestCheck>> {
    let mut rng = substream(seed, u64::MAX);
    Ok(vec![
        SelfTestCheck {
            name: "propagation general vs non-degenerate",
            worst: check_propagation(&mut rng, 50)?,
            tolerance: 1e-8,
            cases: 50,
        },
        SelfTestCheck {
            name: "CG diagonalization",
            worst: check_cg_diagonal(&mut rng, 50)?,
            tolerance: 1e-8,
            cases: 50,
        },
        SelfTestCheck {
            name: "fast CG solver vs generic",
            worst: check_fast_solver(&mut rng, 40)?,
            tolerance: 1e-6,
            cases: 40,
        },
        SelfTestCheck {
            name: "identity reducer collapse",
            worst: check_identity_collapse(&mut rng, 30)?,
            tolerance: 1e-8,
            cases: 30,
        },
        SelfTestCheck {
            name: "multiplier closed forms",
            worst: check_root_finder()?,
            tolerance: 1e-12,
            cases: 3,
        },
        SelfTestCheck {
            name: "flop formulas",
            worst: check_flops()?,
            tolerance: 0.5,
            cases: 1,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(11).unwrap() {
            assert!(c.passed(), "{} worst {:e}", c.name, c.worst);
        }
    }
}
