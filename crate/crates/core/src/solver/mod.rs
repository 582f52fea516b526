//! Robust Capon beamformers: element space, reduced dimension, and the
//! single-EVD conjugate-gradient variant, plus MVDR baselines and SINR.
//!
//! Every robust solve reduces to
//!
//! ```text
//! min_b  b^H R^{-1} b   s.t.  (b - c)^H F (b - c) <= 1
//! ```
//!
//! Whitening with `F^{1/2}` turns the constraint into a unit sphere, and the
//! EVD of the whitened covariance turns the optimality condition into the
//! scalar multiplier equation solved by [`newton_mu`].

mod fast;
mod rcb;
pub mod root;

pub use fast::cg_rdrcb_fast;
pub use rcb::{rcb_elementspace, rdrcb_generic};
pub use root::{newton_mu, RootSolveReport};

use crate::error::{Error, Result};
use crate::numerics::{inner, real, ComplexVector, HermitianMatrix};
use crate::uncertainty::DimensionReducer;

#[derive(Debug, Clone)]
pub struct BeamformerSolution {
    /// Element-space steering-vector estimate.
    pub asv_estimate: ComplexVector,
    /// Reduced-dimension steering-vector estimate, when a reducer was used.
    pub rd_asv: Option<ComplexVector>,
    /// Weights acting on reduced-dimension data.
    pub weights_rd: Option<ComplexVector>,
    /// Weights acting on element-space data.
    pub weights_es: ComplexVector,
    /// Signal-of-interest power estimate (linear).
    pub power: f64,
    /// Lagrange multiplier of the active constraint; zero for MVDR.
    pub multiplier: f64,
    pub iterations: usize,
    /// EVDs computed by this solve in its working dimension. Element-space
    /// shape factorizations are cached on the ellipsoid and not counted.
    pub evd_count: usize,
}

/// `R^{-1} a / (a^H R^{-1} a)`.
fn distortionless(rinv_a: &ComplexVector, a: &ComplexVector) -> (ComplexVector, f64) {
    let denom = inner(a, rinv_a).re;
    (rinv_a / real(denom), denom)
}

pub fn mvdr(r: &HermitianMatrix, a: &ComplexVector) -> Result<BeamformerSolution> {
    if a.len() != r.dim() {
        return Err(Error::InvalidInput(format!(
            "steering vector length {} does not match covariance dimension {}",
            a.len(),
            r.dim()
        )));
    }
    let rinv_a = r.solve_pd(a).map_err(|_| Error::Singular {
        ratio: 0.0,
        cutoff: 0.0,
    })?;
    let (w, denom) = distortionless(&rinv_a, a);
    if !(denom > 0.0) {
        return Err(Error::Singular {
            ratio: 0.0,
            cutoff: 0.0,
        });
    }
    Ok(BeamformerSolution {
        asv_estimate: a.clone(),
        rd_asv: None,
        weights_rd: None,
        weights_es: w,
        power: 1.0 / denom,
        multiplier: 0.0,
        iterations: 0,
        evd_count: 0,
    })
}

/// MVDR on `D^H R D` steered to `D^H a`.
pub fn mvdr_reduced(
    r: &HermitianMatrix,
    drt: &DimensionReducer,
    a: &ComplexVector,
) -> Result<BeamformerSolution> {
    if a.len() != drt.element_dim() || r.dim() != drt.element_dim() {
        return Err(Error::InvalidInput("reducer and data dimensions disagree".into()));
    }
    let ry = drt.reduce_covariance(r);
    let b = drt.reduce(a);
    let mut sol = mvdr(&ry, &b)?;
    let w = sol.weights_es.clone();
    sol.weights_es = drt.expand(&w);
    sol.weights_rd = Some(w);
    sol.rd_asv = Some(b);
    sol.asv_estimate = a.clone();
    Ok(sol)
}

/// Output SINR in dB: `sigma0^2 |w^H a0|^2 / (w^H Q w)`.
pub fn sinr(
    weights: &ComplexVector,
    a0: &ComplexVector,
    soi_power: f64,
    noise_cov: &HermitianMatrix,
) -> Result<f64> {
    if weights.len() != a0.len() || weights.len() != noise_cov.dim() {
        return Err(Error::InvalidInput("SINR operands have mismatched dimensions".into()));
    }
    if weights.norm() == 0.0 {
        return Err(Error::InvalidInput("SINR of an all-zero weight vector".into()));
    }
    let signal = soi_power * inner(weights, a0).norm_sqr();
    let noise = noise_cov.quad_form(weights);
    Ok(10.0 * (signal / noise).log10())
}

/// SINR of the optimal beamformer `Q^{-1} a0`: `sigma0^2 a0^H Q^{-1} a0`.
pub fn optimal_sinr(a0: &ComplexVector, soi_power: f64, noise_cov: &HermitianMatrix) -> Result<f64> {
    let x = noise_cov.solve_pd(a0)?;
    Ok(10.0 * (soi_power * inner(a0, &x).re).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::testutil::*;
    use crate::numerics::c64;

    #[test]
    fn mvdr_identity() {
        let a = ComplexVector::from_vec(vec![real(1.0), c64(0.0, 2.0), real(-1.0)]);
        let s = mvdr(&HermitianMatrix::identity(3), &a).unwrap();
        let expect = &a / real(a.norm_squared());
        assert!((s.weights_es - expect).norm() < 1e-15);
        assert!((s.power - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mvdr_distortionless() {
        let mut g = rng(1);
        for _ in 0..10 {
            let r = random_pd(&mut g, 6);
            let a = random_vector(&mut g, 6);
            let s = mvdr(&r, &a).unwrap();
            assert!((inner(&s.weights_es, &a) - real(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mvdr_two_source_null() {
        // R = I + p v v^H with v = (1, 1); a = (1, 0). By hand,
        // R^{-1} = I - p/(1 + 2p) v v^H, so R^{-1} a = (1 + p, -p)/(1 + 2p)
        // and the response toward v is w^H v = 1/(1 + p).
        let p = 100.0;
        let v = ComplexVector::from_vec(vec![real(1.0), real(1.0)]);
        let r = HermitianMatrix::identity(2).add(&HermitianMatrix::outer(&v, p));
        let a = ComplexVector::from_vec(vec![real(1.0), real(0.0)]);
        let s = mvdr(&r, &a).unwrap();
        let null = inner(&s.weights_es, &v).norm();
        assert!((null - 1.0 / (1.0 + p)).abs() < 1e-14);
        let w_hand = ComplexVector::from_vec(vec![real(1.0), real(-p / (1.0 + p))]);
        assert!((&s.weights_es - w_hand).norm() < 1e-14);
    }

    #[test]
    fn mvdr_rejects_singular() {
        let r = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let a = ComplexVector::from_vec(vec![real(1.0), real(1.0)]);
        assert!(matches!(mvdr(&r, &a), Err(Error::Singular { .. })));
    }

    #[test]
    fn mvdr_reduced_identity_reducer() {
        let mut g = rng(2);
        let r = random_pd(&mut g, 5);
        let a = random_vector(&mut g, 5);
        let full = mvdr(&r, &a).unwrap();
        let red = mvdr_reduced(&r, &DimensionReducer::identity(5), &a).unwrap();
        assert!((full.weights_es - &red.weights_es).norm() < 1e-12);
        assert!((inner(&red.weights_es, &a) - real(1.0)).norm() < 1e-12);
    }

    #[test]
    fn sinr_matched_filter_white() {
        let a = ComplexVector::from_vec(vec![real(1.0), c64(0.0, 1.0), real(-1.0), real(1.0)]);
        let q = HermitianMatrix::identity(4).scaled(2.0);
        let w = &a / real(a.norm_squared());
        let s = sinr(&w, &a, 3.0, &q).unwrap();
        assert!((s - 10.0 * (3.0 * 4.0 / 2.0f64).log10()).abs() < 1e-12);
        let s2 = sinr(&(&w * c64(-3.0, 7.0)), &a, 3.0, &q).unwrap();
        assert!((s - s2).abs() < 1e-12);
    }

    #[test]
    fn sinr_optimum_dominates() {
        let mut g = rng(3);
        let q = random_pd(&mut g, 6);
        let a = random_vector(&mut g, 6);
        let w_opt = q.solve_pd(&a).unwrap();
        let best = sinr(&w_opt, &a, 1.0, &q).unwrap();
        assert!((best - optimal_sinr(&a, 1.0, &q).unwrap()).abs() < 1e-10);
        for _ in 0..200 {
            let w = &w_opt + random_vector(&mut g, 6) * real(0.1 * w_opt.norm());
            assert!(sinr(&w, &a, 1.0, &q).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn sinr_rejects_zero_weights() {
        let q = HermitianMatrix::identity(2);
        let a = ComplexVector::from_element(2, real(1.0));
        assert!(sinr(&ComplexVector::zeros(2), &a, 1.0, &q).is_err());
        assert!(sinr(&a, &ComplexVector::zeros(3), 1.0, &q).is_err());
    }
}
