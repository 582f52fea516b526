use crate::error::{Error, Result};
use crate::numerics::{evd, ComplexVector, Evd, HermitianMatrix, SqrtFactors};
use crate::solver::root::newton_mu;
use crate::solver::{distortionless, BeamformerSolution};
use crate::uncertainty::{propagate_general, DimensionReducer, UncertaintySet};

pub(crate) struct WhitenedSolve {
    /// Minimizer in the original (unwhitened) coordinates.
    pub estimate: ComplexVector,
    /// `R^{-1} estimate`, obtained from the same EVD.
    pub rinv_estimate: ComplexVector,
    pub multiplier: f64,
    pub iterations: usize,
}

/// Minimizes `b^H R^{-1} b` over `(b - c)^H F (b - c) <= 1` given factors of
/// `F`. Performs exactly one EVD, of `F^{1/2} R F^{H/2}`.
pub(crate) fn solve_whitened(
    r: &HermitianMatrix,
    center: &ComplexVector,
    shape: &SqrtFactors,
) -> Result<WhitenedSolve> {
    let s = &shape.sqrt;
    let r_w = r.congruence(&s.adjoint());
    let c_w = s * center;
    let e = evd(&r_w)?;
    e.check_pd()?;
    let z = e.eigenvectors.ad_mul(&c_w);
    // With lambda_n = 1/gamma_n and |c_n|^2 = |z_n|^2/gamma_n the multiplier
    // equation sum |z_n|^2 / (1 + nu gamma_n)^2 = 1 takes the h(mu) form.
    let lambdas: Vec<f64> = e.eigenvalues.iter().map(|g| 1.0 / g).collect();
    let coeffs: Vec<f64> = z
        .iter()
        .zip(&e.eigenvalues)
        .map(|(zn, g)| zn.norm_sqr() / g)
        .collect();
    let report = newton_mu(&lambdas, &coeffs)?;
    let nu = report.root;
    let shrunk = ComplexVector::from_iterator(
        z.len(),
        z.iter()
            .zip(&e.eigenvalues)
            .map(|(zn, g)| zn * (nu * g / (1.0 + nu * g))),
    );
    let rinv_shrunk = ComplexVector::from_iterator(
        z.len(),
        z.iter()
            .zip(&e.eigenvalues)
            .map(|(zn, g)| zn * (nu / (1.0 + nu * g))),
    );
    let a_w = &e.eigenvectors * shrunk;
    Ok(WhitenedSolve {
        estimate: &shape.inv_sqrt * a_w,
        rinv_estimate: s.adjoint() * (&e.eigenvectors * rinv_shrunk),
        multiplier: nu,
        iterations: report.iterations,
    })
}

/// Factors of `scale * G^{-1}` from the EVD of `G`.
pub(crate) fn scaled_inverse_factors(g: &Evd, scale: f64) -> Result<SqrtFactors> {
    g.check_pd()?;
    let n = g.dim();
    let mut sqrt = g.eigenvectors.adjoint();
    let mut inv_sqrt = g.eigenvectors.clone();
    for k in 0..n {
        let f = (scale / g.eigenvalues[k]).sqrt();
        sqrt.row_mut(k).scale_mut(f);
        inv_sqrt.column_mut(k).scale_mut(1.0 / f);
    }
    Ok(SqrtFactors { sqrt, inv_sqrt })
}

fn check_feasible(set: &UncertaintySet) -> Result<()> {
    let f = set.feasibility();
    if !f.feasible {
        return Err(Error::Infeasible { margin: f.margin });
    }
    Ok(())
}

/// Element-space robust Capon beamformer.
pub fn rcb_elementspace(r: &HermitianMatrix, set: &UncertaintySet) -> Result<BeamformerSolution> {
    let m = r.dim();
    if set.dim() != m {
        return Err(Error::InvalidInput(format!(
            "set dimension {} does not match covariance dimension {m}",
            set.dim()
        )));
    }
    check_feasible(set)?;
    let factors = match set {
        UncertaintySet::Sphere(s) => SqrtFactors::scaled_identity(m, 1.0 / s.radius_sq),
        UncertaintySet::Ellipsoid(e) => e
            .factors()
            .ok_or_else(|| Error::NotPositiveDefinite("degenerate element-space ellipsoid".into()))?
            .sqrt
            .clone(),
    };
    let sol = solve_whitened(r, set.center(), &factors)?;
    let (w, denom) = distortionless(&sol.rinv_estimate, &sol.estimate);
    let power = (sol.estimate.norm_squared() / m as f64) / denom;
    Ok(BeamformerSolution {
        asv_estimate: sol.estimate,
        rd_asv: None,
        weights_rd: None,
        weights_es: w,
        power,
        multiplier: sol.multiplier,
        iterations: sol.iterations,
        evd_count: 1,
    })
}

/// Reduced-dimension robust Capon beamformer for any full-rank reducer.
///
/// The reduced shape factors come from one `N x N` EVD (of `D^H E^{-1} D`,
/// `D^H D`, or the degenerate-case `F`) unless the set is a sphere and the
/// reducer orthonormal; the whitened covariance takes one more.
pub fn rdrcb_generic(
    r: &HermitianMatrix,
    drt: &DimensionReducer,
    set: &UncertaintySet,
) -> Result<BeamformerSolution> {
    let m = drt.element_dim();
    let n = drt.reduced_dim();
    if r.dim() != m || set.dim() != m {
        return Err(Error::InvalidInput(format!(
            "covariance {} / set {} do not match reducer rows {m}",
            r.dim(),
            set.dim()
        )));
    }
    check_feasible(set)?;
    let mut evd_count = 0;
    let shape = match set {
        UncertaintySet::Sphere(s) if drt.is_orthonormal() => {
            SqrtFactors::scaled_identity(n, 1.0 / s.radius_sq)
        }
        UncertaintySet::Sphere(s) => {
            let gram = HermitianMatrix::symmetrized(drt.matrix().ad_mul(drt.matrix()));
            evd_count += 1;
            scaled_inverse_factors(&evd(&gram)?, 1.0 / s.radius_sq)?
        }
        UncertaintySet::Ellipsoid(e) => match e.factors() {
            Some(f) => {
                let g = f.inverse.congruence(drt.matrix());
                evd_count += 1;
                scaled_inverse_factors(&evd(&g)?, 1.0)?
            }
            None => {
                let reduced = propagate_general(e, drt)?;
                evd_count += 1;
                SqrtFactors::from_evd(&evd(reduced.shape())?).map_err(|_| {
                    Error::NotPositiveDefinite("propagated reduced ellipsoid is flat".into())
                })?
            }
        },
    };
    let b_bar = drt.reduce(set.center());
    let margin = (&shape.sqrt * &b_bar).norm_squared();
    if !(margin > 1.0) {
        return Err(Error::PropagatedInfeasible { margin });
    }
    let ry = drt.reduce_covariance(r);
    let sol = solve_whitened(&ry, &b_bar, &shape)?;
    evd_count += 1;
    let b_hat = sol.estimate;
    let (w_rd, denom) = distortionless(&sol.rinv_estimate, &b_hat);
    let a_hat = if drt.is_orthonormal() {
        drt.expand(&b_hat)
    } else {
        drt.expand(&(drt.gram_inverse().as_matrix() * &b_hat))
    };
    let power = (a_hat.norm_squared() / m as f64) / denom;
    Ok(BeamformerSolution {
        asv_estimate: a_hat,
        weights_es: drt.expand(&w_rd),
        weights_rd: Some(w_rd),
        rd_asv: Some(b_hat),
        power,
        multiplier: sol.multiplier,
        iterations: sol.iterations,
        evd_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::testutil::*;
    use crate::numerics::{inner, real, ComplexMatrix};
    use crate::solver::mvdr;
    use crate::uncertainty::{propagate, Ellipsoid, SphereSet};

    fn sphere(center: &ComplexVector, eps: f64) -> UncertaintySet {
        SphereSet::new(center.clone(), eps).unwrap().into()
    }

    /// `x^H A^{-1} x` through nalgebra's LU inverse.
    fn inv_quad(a: &HermitianMatrix, x: &ComplexVector) -> f64 {
        let inv = a.as_matrix().clone().try_inverse().unwrap();
        inner(x, &(inv * x)).re
    }

    #[test]
    fn identity_covariance_example() {
        let a = ComplexVector::from_vec(vec![real(2.0), real(0.0)]);
        let s = rcb_elementspace(&HermitianMatrix::identity(2), &sphere(&a, 1.0)).unwrap();
        let expect = ComplexVector::from_vec(vec![real(1.0), real(0.0)]);
        assert!((&s.asv_estimate - expect).norm() < 1e-10);
        assert!((s.power - 0.5).abs() < 1e-10);
        assert!(s.multiplier > 0.0);
        assert_eq!(s.evd_count, 1);
    }

    #[test]
    fn vanishing_uncertainty_is_mvdr() {
        let mut g = rng(4);
        let r = random_pd(&mut g, 5);
        let a = random_vector(&mut g, 5) * real(3.0);
        let s = rcb_elementspace(&r, &sphere(&a, 1e-12)).unwrap();
        let m = mvdr(&r, &a).unwrap();
        assert!((&s.asv_estimate - &a).norm() / a.norm() < 1e-4);
        assert!((&s.weights_es - &m.weights_es).norm() / m.weights_es.norm() < 1e-4);
    }

    #[test]
    fn elementspace_matches_boundary_grid() {
        let mut g = rng(5);
        for m in [2usize, 3] {
            let r = random_pd(&mut g, m);
            let a = random_vector(&mut g, m) * real(2.0);
            let eps = 0.4 * a.norm_squared();
            let s = rcb_elementspace(&r, &sphere(&a, eps)).unwrap();
            let ours = inv_quad(&r, &s.asv_estimate);
            let oracle = sphere_grid_min(m, if m == 2 { 40 } else { 12 }, |u| {
                inv_quad(&r, &(&a + u * real(eps.sqrt())))
            });
            assert!((ours - oracle).abs() / oracle < 1e-4, "M={m}: {ours} vs {oracle}");
            assert!(ours <= oracle * (1.0 + 1e-9));
        }
    }

    #[test]
    fn elementspace_ellipsoid_on_boundary() {
        let mut g = rng(6);
        let r = random_pd(&mut g, 4);
        let a = random_vector(&mut g, 4) * real(2.0);
        let e = random_pd(&mut g, 4);
        let e = e.scaled(5.0 / e.quad_form(&a));
        let set: UncertaintySet = Ellipsoid::new(a.clone(), e.clone()).unwrap().into();
        let s = rcb_elementspace(&r, &set).unwrap();
        assert!((e.quad_form(&(&s.asv_estimate - &a)) - 1.0).abs() < 1e-8);
        assert!((inner(&s.weights_es, &s.asv_estimate) - real(1.0)).norm() < 1e-8);
    }

    #[test]
    fn infeasible_sets_rejected() {
        let a = ComplexVector::from_vec(vec![real(1.0), real(0.0)]);
        let r = HermitianMatrix::identity(2);
        assert!(matches!(
            rcb_elementspace(&r, &sphere(&a, 2.0)),
            Err(Error::Infeasible { .. })
        ));
        let d = DimensionReducer::identity(2);
        assert!(matches!(
            rdrcb_generic(&r, &d, &sphere(&a, 2.0)),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn propagated_infeasibility_is_distinct() {
        // The reducer only sees the small component of the center.
        let a = ComplexVector::from_vec(vec![real(3.0), real(0.1), real(0.0)]);
        let d = ComplexMatrix::from_column_slice(3, 1, &[real(0.0), real(1.0), real(0.0)]);
        let d = DimensionReducer::new(d).unwrap();
        let r = HermitianMatrix::identity(3);
        let err = rdrcb_generic(&r, &d, &sphere(&a, 1.0)).unwrap_err();
        assert!(matches!(err, Error::PropagatedInfeasible { .. }), "{err}");
    }

    #[test]
    fn identity_reducer_collapses() {
        let mut g = rng(7);
        for m in [2, 5, 9] {
            let r = random_pd(&mut g, m);
            let a = random_vector(&mut g, m);
            for set in [
                sphere(&a, 0.3 * a.norm_squared()),
                {
                    let e = random_pd(&mut g, m);
                    Ellipsoid::new(a.clone(), e.scaled(4.0 / e.quad_form(&a))).unwrap().into()
                },
            ] {
                let full = rcb_elementspace(&r, &set).unwrap();
                let red = rdrcb_generic(&r, &DimensionReducer::identity(m), &set).unwrap();
                assert!((&red.asv_estimate - &full.asv_estimate).norm() / full.asv_estimate.norm() < 1e-8);
                assert!((&red.weights_es - &full.weights_es).norm() / full.weights_es.norm() < 1e-8);
                assert!((red.power - full.power).abs() / full.power < 1e-8);
            }
        }
    }

    #[test]
    fn evd_counts() {
        let mut g = rng(8);
        let r = random_pd(&mut g, 8);
        let q = random_matrix(&mut g, 8, 3).qr().q();
        let ortho = DimensionReducer::new(q).unwrap();
        assert!(ortho.is_orthonormal());
        let a = ortho.expand(&random_vector(&mut g, 3));
        let s = rdrcb_generic(&r, &ortho, &sphere(&a, 0.2 * a.norm_squared())).unwrap();
        assert_eq!(s.evd_count, 1);

        let d = DimensionReducer::new(random_matrix(&mut g, 8, 3)).unwrap();
        assert!(!d.is_orthonormal());
        let a = d.expand(&random_vector(&mut g, 3));
        let e = random_pd(&mut g, 8);
        let set: UncertaintySet =
            Ellipsoid::new(a.clone(), e.scaled(10.0 / e.quad_form(&a))).unwrap().into();
        assert_eq!(rdrcb_generic(&r, &d, &set).unwrap().evd_count, 2);
        let s = rdrcb_generic(&r, &d, &sphere(&a, 0.2 * a.norm_squared())).unwrap();
        assert_eq!(s.evd_count, 2);
    }

    #[test]
    fn reduced_matches_boundary_grid() {
        let mut g = rng(9);
        let (m, n) = (8, 3);
        let r = random_pd(&mut g, m);
        let d = DimensionReducer::new(random_matrix(&mut g, m, n)).unwrap();
        // Center inside the span of D so the reduced set stays feasible.
        let a = d.expand(&random_vector(&mut g, n));
        let e = random_pd(&mut g, m);
        let e = e.scaled(6.0 / e.quad_form(&a));
        let es = Ellipsoid::new(a.clone(), e).unwrap();
        let set: UncertaintySet = es.clone().into();
        let s = rdrcb_generic(&r, &d, &set).unwrap();
        let b_hat = s.rd_asv.clone().unwrap();
        let ry = d.reduce_covariance(&r);
        // Oracle: F = [D^H E^{-1} D]^{-1} with explicit LU inverses, boundary
        // b = b_bar + L^{-H} u from the Cholesky factor F = L L^H.
        let e_inv = es.shape().as_matrix().clone().try_inverse().unwrap();
        let f = (d.matrix().adjoint() * e_inv * d.matrix()).try_inverse().unwrap();
        let f = (&f + f.adjoint()) * real(0.5);
        let l = f.clone().cholesky().unwrap().l();
        let l_inv_h = l.adjoint().try_inverse().unwrap();
        let b_bar = d.reduce(&a);
        let ours = inv_quad(&ry, &b_hat);
        let oracle = sphere_grid_min(n, 12, |u| inv_quad(&ry, &(&b_bar + &l_inv_h * u)));
        assert!((ours - oracle).abs() / oracle < 1e-4, "{ours} vs {oracle}");
        // Active constraint.
        let diff = &b_hat - &b_bar;
        assert!((inner(&diff, &(&f * &diff)).re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reduced_solution_properties() {
        let mut g = rng(10);
        for k in 0..12 {
            let (m, n) = (10, 2 + k % 4);
            let r = random_pd(&mut g, m);
            let d = DimensionReducer::new(random_matrix(&mut g, m, n)).unwrap();
            let a = d.expand(&random_vector(&mut g, n)) + random_vector(&mut g, m) * real(0.05);
            let set = if k % 2 == 0 {
                sphere(&a, 0.2 * a.norm_squared())
            } else {
                let e = random_pd(&mut g, m);
                Ellipsoid::new(a.clone(), e.scaled(8.0 / e.quad_form(&a))).unwrap().into()
            };
            let s = match rdrcb_generic(&r, &d, &set) {
                Ok(s) => s,
                Err(Error::PropagatedInfeasible { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let b_hat = s.rd_asv.clone().unwrap();
            let red = propagate(&set, &d).unwrap();
            let diff = &b_hat - red.center();
            assert!((red.shape().quad_form(&diff) - 1.0).abs() < 1e-8);
            let w_rd = s.weights_rd.clone().unwrap();
            assert!((inner(&w_rd, &b_hat) - real(1.0)).norm() < 1e-8);
            assert!((inner(&s.weights_es, &s.asv_estimate) - real(1.0)).norm() < 1e-8);
            let via_gram = d.gram_inverse().quad_form(&b_hat);
            assert!((s.asv_estimate.norm_squared() - via_gram).abs() / via_gram < 1e-10);
            assert!(s.power > 0.0 && s.multiplier > 0.0);
        }
    }

    #[test]
    fn degenerate_ellipsoid_uses_general_propagation() {
        let mut g = rng(11);
        let (m, n) = (6, 2);
        let r = random_pd(&mut g, m);
        let d = DimensionReducer::new(random_matrix(&mut g, m, n)).unwrap();
        let a = d.expand(&random_vector(&mut g, n));
        // Rank-deficient E whose null direction is orthogonal to range(D),
        // so the reduced set stays bounded.
        let v = d.left_null_basis().column(0).into_owned();
        let p = ComplexMatrix::identity(m, m) - &v * v.adjoint();
        let e0 = random_pd(&mut g, m);
        let e = HermitianMatrix::new(&p * e0.as_matrix() * &p).unwrap();
        let e = e.scaled(5.0 / e.quad_form(&a));
        let set: UncertaintySet = Ellipsoid::new(a, e).unwrap().into();
        assert!(matches!(
            rcb_elementspace(&r, &set),
            Err(Error::NotPositiveDefinite(_))
        ));
        let s = rdrcb_generic(&r, &d, &set).unwrap();
        assert_eq!(s.evd_count, 2);
        let w = s.weights_rd.unwrap();
        assert!((inner(&w, &s.rd_asv.unwrap()) - real(1.0)).norm() < 1e-8);
    }
}
