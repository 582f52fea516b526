//! Single-EVD robust beamformer on a conjugate-gradient reducer.
//!
//! With `D^H R D = Lambda` diagonal, the substitution `b = Lambda^{1/2} b'`
//! whitens the covariance for free and the reduced constraint becomes
//! `(b' - c')^H M^{-1} (b' - c') <= 1` with
//! `M = Lambda^{-1/2} D^H E^{-1} D Lambda^{-1/2}`. One EVD `M = U diag(l) U^H`
//! then gives everything: `c = U^H c'`, the multiplier equation
//! `sum l |c|^2 / (mu + l)^2 = 1`, and the minimizer `U (mu / (l + mu) .* c)`.

use crate::error::{Error, Result};
use crate::numerics::{evd, real, ComplexVector, HermitianMatrix};
use crate::solver::root::newton_mu;
use crate::solver::BeamformerSolution;
use crate::uncertainty::{DimensionReducer, UncertaintySet};

pub fn cg_rdrcb_fast(
    r: &HermitianMatrix,
    cg: &DimensionReducer,
    set: &UncertaintySet,
) -> Result<BeamformerSolution> {
    let lambda = cg
        .cg_diagonal()
        .ok_or_else(|| Error::InvalidReducer("reducer carries no CG diagonal".into()))?;
    let m = cg.element_dim();
    let n = cg.reduced_dim();
    // The covariance only enters through the CG diagonal.
    if r.dim() != m || set.dim() != m {
        return Err(Error::InvalidInput(format!(
            "covariance {} / set {} do not match reducer rows {m}",
            r.dim(),
            set.dim()
        )));
    }
    let f = set.feasibility();
    if !f.feasible {
        return Err(Error::Infeasible { margin: f.margin });
    }

    let inv_root: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let mut dw = cg.matrix().clone();
    for (k, s) in inv_root.iter().enumerate() {
        dw.column_mut(k).scale_mut(*s);
    }
    let (mmat, eps) = match set {
        UncertaintySet::Sphere(s) => (
            HermitianMatrix::symmetrized(dw.ad_mul(&dw) * real(s.radius_sq)),
            Some(s.radius_sq),
        ),
        UncertaintySet::Ellipsoid(e) => {
            let fac = e.factors().ok_or_else(|| {
                Error::NotPositiveDefinite("fast solver needs a non-degenerate ellipsoid".into())
            })?;
            (fac.inverse.congruence(&dw), None)
        }
    };
    let decomposition = evd(&mmat)?;
    let eigs: Vec<f64> = decomposition.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let u = &decomposition.eigenvectors;

    let b_bar = cg.reduce(set.center());
    let b_bar_w = ComplexVector::from_iterator(
        n,
        b_bar.iter().zip(&inv_root).map(|(b, s)| b * *s),
    );
    let c = u.ad_mul(&b_bar_w);
    let coeffs: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    let report = newton_mu(&eigs, &coeffs).map_err(|e| match e {
        Error::NoRoot { h0 } => Error::PropagatedInfeasible { margin: h0 },
        other => other,
    })?;
    let mu = report.root;

    let shrink: Vec<f64> = eigs.iter().map(|&l| mu / (l + mu)).collect();
    let b_hat_w = u * ComplexVector::from_iterator(n, c.iter().zip(&shrink).map(|(z, s)| z * *s));
    let root: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let b_hat = ComplexVector::from_iterator(n, b_hat_w.iter().zip(&root).map(|(b, s)| b * *s));

    // R_y^{-1} b_hat = Lambda^{-1/2} b_hat_w and b_hat^H R_y^{-1} b_hat = |b_hat_w|^2.
    let denom = b_hat_w.norm_squared();
    let w_rd = ComplexVector::from_iterator(
        n,
        b_hat_w.iter().zip(&inv_root).map(|(b, s)| b * (*s / denom)),
    );

    let gram_b = match eps {
        // (D^H D)^{-1} = eps Lambda^{-1/2} M^{-1} Lambda^{-1/2}, read off the EVD of M.
        Some(eps) if eigs.iter().all(|&l| l > 0.0) => {
            let t = ComplexVector::from_iterator(
                n,
                c.iter()
                    .zip(&shrink)
                    .zip(&eigs)
                    .map(|((z, s), l)| z * (*s * eps / l)),
            );
            let t = u * t;
            ComplexVector::from_iterator(n, t.iter().zip(&inv_root).map(|(x, s)| x * *s))
        }
        _ => cg.gram_inverse().mul_vec(&b_hat),
    };
    let a_hat = cg.expand(&gram_b);
    let numerator = b_hat
        .iter()
        .zip(gram_b.iter())
        .map(|(b, g)| (b.conj() * g).re)
        .sum::<f64>();
    let power = (numerator / m as f64) / denom;

    Ok(BeamformerSolution {
        asv_estimate: a_hat,
        weights_es: cg.expand(&w_rd),
        weights_rd: Some(w_rd),
        rd_asv: Some(b_hat),
        power,
        multiplier: mu,
        iterations: report.iterations,
        evd_count: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::testutil::*;
    use crate::numerics::inner;
    use crate::reduction::cg_drt;
    use crate::solver::rdrcb_generic;
    use crate::uncertainty::{propagate, Ellipsoid, SphereSet};
    use proptest::prelude::*;

    fn rel(a: &ComplexVector, b: &ComplexVector) -> f64 {
        (a - b).norm() / b.norm()
    }

    /// Random instance whose reduced set has margin `kappa`.
    fn instance(
        seed: u64,
        m: usize,
        n: usize,
        spherical: bool,
        kappa: f64,
    ) -> (HermitianMatrix, DimensionReducer, UncertaintySet) {
        let mut g = rng(seed);
        let r = random_pd(&mut g, m);
        let a = random_vector(&mut g, m) * real(3.0);
        let cg = cg_drt(&r, &a, n).unwrap().reducer;
        let set: UncertaintySet = if spherical {
            SphereSet::new(a.clone(), a.norm_squared() / kappa).unwrap().into()
        } else {
            let e0 = random_pd(&mut g, m);
            let unit: UncertaintySet = Ellipsoid::new(a.clone(), e0.clone()).unwrap().into();
            let f0 = propagate(&unit, &cg).unwrap();
            let margin = f0.shape().quad_form(f0.center());
            Ellipsoid::new(a, e0.scaled(kappa / margin)).unwrap().into()
        };
        (r, cg, set)
    }

    #[test]
    fn requires_cg_diagonal() {
        let mut g = rng(1);
        let r = random_pd(&mut g, 4);
        let a = random_vector(&mut g, 4);
        let d = DimensionReducer::identity(4);
        let set: UncertaintySet = SphereSet::new(a.clone(), 0.1 * a.norm_squared()).unwrap().into();
        assert!(matches!(cg_rdrcb_fast(&r, &d, &set), Err(Error::InvalidReducer(_))));
    }

    #[test]
    fn single_evd_and_distortionless() {
        for spherical in [true, false] {
            let (r, cg, set) = instance(3, 16, 5, spherical, 4.0);
            let s = cg_rdrcb_fast(&r, &cg, &set).unwrap();
            assert_eq!(s.evd_count, 1);
            let w = s.weights_rd.as_ref().unwrap();
            assert!((inner(w, s.rd_asv.as_ref().unwrap()) - real(1.0)).norm() < 1e-8);
            assert!((inner(&s.weights_es, &s.asv_estimate) - real(1.0)).norm() < 1e-8);
            assert!(s.power > 0.0 && s.multiplier > 0.0);
        }
    }

    #[test]
    fn matches_generic_example() {
        for spherical in [true, false] {
            let (r, cg, set) = instance(17, 16, 5, spherical, 3.0);
            let fast = cg_rdrcb_fast(&r, &cg, &set).unwrap();
            let slow = rdrcb_generic(&r, &cg, &set).unwrap();
            assert!(rel(fast.rd_asv.as_ref().unwrap(), slow.rd_asv.as_ref().unwrap()) < 1e-6);
            assert!((fast.power - slow.power).abs() / slow.power < 1e-6);
        }
    }

    #[test]
    fn sphere_numerator_from_evd_matches_gram() {
        let (r, cg, set) = instance(21, 20, 6, true, 5.0);
        let s = cg_rdrcb_fast(&r, &cg, &set).unwrap();
        let b = s.rd_asv.unwrap();
        let direct = cg.gram_inverse().quad_form(&b);
        assert!((s.asv_estimate.norm_squared() - direct).abs() / direct < 1e-8);
    }

    #[test]
    fn reduced_infeasibility() {
        let (r, cg, set) = instance(5, 12, 4, false, 0.5);
        assert!(matches!(
            cg_rdrcb_fast(&r, &cg, &set),
            Err(Error::PropagatedInfeasible { .. }) | Err(Error::Infeasible { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn fast_equals_generic(
            seed in any::<u64>(),
            m in 8usize..=32,
            n in 1usize..=8,
            spherical in any::<bool>(),
            kappa in 1.2f64..30.0,
        ) {
            let (r, cg, set) = instance(seed, m, n, spherical, kappa);
            let fast = cg_rdrcb_fast(&r, &cg, &set).unwrap();
            let slow = rdrcb_generic(&r, &cg, &set).unwrap();
            prop_assert_eq!(fast.evd_count, 1);
            prop_assert!(rel(fast.rd_asv.as_ref().unwrap(), slow.rd_asv.as_ref().unwrap()) < 1e-6);
            prop_assert!(rel(&fast.weights_es, &slow.weights_es) < 1e-6);
            prop_assert!((fast.power - slow.power).abs() / slow.power < 1e-6);
            let red = propagate(&set, &cg).unwrap();
            let diff = fast.rd_asv.as_ref().unwrap() - red.center();
            prop_assert!((red.shape().quad_form(&diff) - 1.0).abs() < 1e-8);
        }
    }
}
