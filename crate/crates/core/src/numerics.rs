//! Dense complex linear-algebra kernels.
//!
//! Everything above this module works with [`ComplexMatrix`] /
//! [`ComplexVector`] (nalgebra dense storage) and the [`HermitianMatrix`]
//! newtype, which guarantees exact conjugate symmetry.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative singular-value cutoff used for pseudo-inverses, null spaces and
/// projectors.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Smallest admissible `lambda_min / lambda_max` for a matrix treated as
/// positive definite.
pub const PD_CUTOFF: f64 = 1e-14;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `x^H y`.
pub fn inner(x: &ComplexVector, y: &ComplexVector) -> Complex64 {
    x.dotc(y)
}

pub fn norm_sq(x: &ComplexVector) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Square complex Hermitian matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Wraps `m` after replacing it with `(m + m^H) / 2`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation; for matrices that are Hermitian by
    /// construction.
    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let mut h = (&m + m.adjoint()) * real(0.5);
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
        }
        HermitianMatrix(h)
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(ComplexMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianMatrix(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                real(diag[i])
            } else {
                Complex64::default()
            }
        }))
    }

    /// `x x^H` scaled by `scale`.
    pub fn outer(x: &ComplexVector, scale: f64) -> Self {
        Self::symmetrized(x * x.adjoint() * real(scale))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianMatrix(&self.0 * real(s))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn add_identity(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)].re += s;
        }
        HermitianMatrix(m)
    }

    /// `X^H A X`.
    pub fn congruence(&self, x: &ComplexMatrix) -> Self {
        Self::symmetrized(x.adjoint() * &self.0 * x)
    }

    /// `Re(x^H A x)`.
    pub fn quad_form(&self, x: &ComplexVector) -> f64 {
        x.dotc(&(&self.0 * x)).re
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        &self.0 * x
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Inverse through the EVD; fails when the matrix is not numerically
    /// positive definite.
    pub fn inverse_pd(&self) -> Result<HermitianMatrix> {
        let e = evd(self)?;
        e.check_pd()?;
        Ok(e.map_eigenvalues(|l| 1.0 / l))
    }

    /// Solves `A x = b` for positive-definite `A` via Cholesky.
    pub fn solve_pd(&self, b: &ComplexVector) -> Result<ComplexVector> {
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        Ok(chol.solve(b))
    }
}

/// Eigenvalue decomposition of a Hermitian matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct Evd {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl Evd {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.map_eigenvalues(|l| l)
    }

    /// `U f(Lambda) U^H`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(j).scale_mut(s);
        }
        HermitianMatrix::symmetrized(scaled * self.eigenvectors.adjoint())
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn check_pd(&self) -> Result<()> {
        let max = self.max_eigenvalue();
        let min = self.min_eigenvalue();
        let ratio = if max > 0.0 { min / max } else { f64::NEG_INFINITY };
        if !(ratio > PD_CUTOFF) {
            return Err(Error::Singular {
                ratio,
                cutoff: PD_CUTOFF,
            });
        }
        Ok(())
    }
}

pub fn evd(a: &HermitianMatrix) -> Result<Evd> {
    if a.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.dim();
    let sym = a.0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep the solver's output order
    order.sort_by(|&i, &j| sym.eigenvalues[j].total_cmp(&sym.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| sym.eigenvectors[(r, order[c])]);
    Ok(Evd {
        eigenvalues,
        eigenvectors,
    })
}

/// `A^{1/2} = Lambda^{1/2} U^H` and `A^{-1/2} = U Lambda^{-1/2}`, so that
/// `A = A^{H/2} A^{1/2}` and `A^{-1/2} A^{1/2} = I`.
#[derive(Debug, Clone)]
pub struct SqrtFactors {
    pub sqrt: ComplexMatrix,
    pub inv_sqrt: ComplexMatrix,
}

impl SqrtFactors {
    pub fn from_evd(e: &Evd) -> Result<Self> {
        e.check_pd()?;
        let n = e.dim();
        let uh = e.eigenvectors.adjoint();
        let mut sqrt = uh;
        let mut inv_sqrt = e.eigenvectors.clone();
        for k in 0..n {
            let s = e.eigenvalues[k].sqrt();
            sqrt.row_mut(k).scale_mut(s);
            inv_sqrt.column_mut(k).scale_mut(1.0 / s);
        }
        Ok(SqrtFactors { sqrt, inv_sqrt })
    }

    /// Factors of `s I`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        SqrtFactors {
            sqrt: ComplexMatrix::identity(n, n) * real(s.sqrt()),
            inv_sqrt: ComplexMatrix::identity(n, n) * real(1.0 / s.sqrt()),
        }
    }
}

pub fn sqrt_factors(a: &HermitianMatrix) -> Result<SqrtFactors> {
    SqrtFactors::from_evd(&evd(a)?)
}

struct ThinSvd {
    u: ComplexMatrix,
    singular_values: Vec<f64>,
    v_t: ComplexMatrix,
}

fn thin_svd(x: &ComplexMatrix) -> ThinSvd {
    let svd = x.clone().svd(true, true);
    ThinSvd {
        u: svd.u.expect("u requested"),
        singular_values: svd.singular_values.iter().copied().collect(),
        v_t: svd.v_t.expect("v_t requested"),
    }
}

fn numerical_rank(sv: &[f64]) -> usize {
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > RANK_CUTOFF * max && s > 0.0).count()
}

/// Singular values, unordered.
pub fn singular_values(x: &ComplexMatrix) -> Vec<f64> {
    x.clone().singular_values().iter().copied().collect()
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pseudo_inverse(x: &ComplexMatrix) -> ComplexMatrix {
    let svd = thin_svd(x);
    let max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let mut v = svd.v_t.adjoint();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > RANK_CUTOFF * max && s > 0.0 {
            1.0 / s
        } else {
            0.0
        };
        v.column_mut(k).scale_mut(inv);
    }
    v * svd.u.adjoint()
}

/// Orthonormal basis for the range of `x` (columns with singular value above
/// the rank cutoff).
fn range_basis(x: &ComplexMatrix) -> (ComplexMatrix, usize) {
    let svd = thin_svd(x);
    let rank = numerical_rank(&svd.singular_values);
    let max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > RANK_CUTOFF * max && svd.singular_values[k] > 0.0)
        .collect();
    let basis = ComplexMatrix::from_fn(x.nrows(), cols.len(), |r, c| svd.u[(r, cols[c])]);
    (basis, rank)
}

/// Orthonormal basis of the left null space, `{n : n^H D = 0}`.
pub fn left_null_basis(d: &ComplexMatrix) -> Result<ComplexMatrix> {
    let m = d.nrows();
    if d.ncols() > m {
        return Err(Error::InvalidInput(format!(
            "left null basis needs rows >= cols, got {}x{}",
            m,
            d.ncols()
        )));
    }
    let (basis, rank) = range_basis(d);
    let null_dim = m - rank;
    if null_dim == 0 {
        return Ok(ComplexMatrix::zeros(m, 0));
    }
    // The complement projector has eigenvalues exactly 0 or 1; its leading
    // eigenvectors are the null-space basis.
    let mut complement = -(&basis * basis.adjoint());
    for i in 0..m {
        complement[(i, i)] += real(1.0);
    }
    let e = evd(&HermitianMatrix::symmetrized(complement))?;
    Ok(e.eigenvectors.columns(0, null_dim).into_owned())
}

/// `D (D^H D)^{-1} D^H`, or `I` minus it when `complement` is set.
pub fn orthogonal_projector(d: &ComplexMatrix, complement: bool) -> Result<HermitianMatrix> {
    let svd = thin_svd(d);
    let max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let min = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if d.ncols() > d.nrows() || !(min > RANK_CUTOFF * max) {
        return Err(Error::Singular {
            ratio: if max > 0.0 { min / max } else { 0.0 },
            cutoff: RANK_CUTOFF,
        });
    }
    let proj = HermitianMatrix::symmetrized(&svd.u * svd.u.adjoint());
    if complement {
        Ok(HermitianMatrix::identity(d.nrows()).add(&proj.scaled(-1.0)))
    } else {
        Ok(proj)
    }
}

/// `(D^H D)^{-1}` computed from the SVD of `D`.
pub fn gram_inverse(d: &ComplexMatrix) -> Result<HermitianMatrix> {
    let svd = thin_svd(d);
    let max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let min = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if d.ncols() > d.nrows() || !(min > RANK_CUTOFF * max) {
        return Err(Error::Singular {
            ratio: if max > 0.0 { min / max } else { 0.0 },
            cutoff: RANK_CUTOFF,
        });
    }
    let mut v = svd.v_t.adjoint();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        v.column_mut(k).scale_mut(1.0 / s);
    }
    Ok(HermitianMatrix::symmetrized(&v * v.adjoint()))
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;

    fn eye(n: usize) -> ComplexMatrix {
        ComplexMatrix::identity(n, n)
    }

    #[test]
    fn evd_identity() {
        let e = evd(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues.len(), 3);
        for l in &e.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        let g = e.eigenvectors.adjoint() * &e.eigenvectors;
        assert!(rel_err(&g, &eye(3)) < 1e-12);
    }

    #[test]
    fn evd_diagonal_sorted() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 3.0]);
        let e = evd(&a).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((e.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((e.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evd_random_pd_reconstructs() {
        let mut r = rng(7);
        let a = random_pd(&mut r, 8);
        let e = evd(&a).unwrap();
        assert!(rel_err(e.reconstruct().as_matrix(), a.as_matrix()) < 1e-10);
        let an = a.frobenius();
        for k in 0..8 {
            let u = e.eigenvectors.column(k).into_owned();
            let res = a.mul_vec(&u) - &u * real(e.eigenvalues[k]);
            assert!(res.norm() <= 1e-10 * an);
        }
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn evd_rejects_non_finite() {
        let mut m = eye(2);
        m[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(HermitianMatrix::new(m.clone()).is_err());
        let h = HermitianMatrix(m);
        assert!(matches!(evd(&h), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn construction_symmetrizes() {
        let mut m = eye(2);
        m[(0, 1)] = c64(1.0, 1.0);
        m[(1, 0)] = c64(1.0, -0.8);
        let h = HermitianMatrix::new(m).unwrap();
        assert_eq!(h.as_matrix()[(0, 1)], h.as_matrix()[(1, 0)].conj());
    }

    #[test]
    fn sqrt_factors_identity_and_diagonal() {
        let f = sqrt_factors(&HermitianMatrix::identity(3)).unwrap();
        assert!(rel_err(&(f.sqrt.adjoint() * &f.sqrt), &eye(3)) < 1e-14);
        assert!(rel_err(&(&f.inv_sqrt * &f.sqrt), &eye(3)) < 1e-14);

        let f = sqrt_factors(&HermitianMatrix::from_real_diagonal(&[4.0, 1.0])).unwrap();
        // eigen-order is (4, 1) so U = I up to phases; moduli are unambiguous
        assert!((f.sqrt[(0, 0)].norm() - 2.0).abs() < 1e-14);
        assert!((f.sqrt[(1, 1)].norm() - 1.0).abs() < 1e-14);
        assert!((f.inv_sqrt[(0, 0)].norm() - 0.5).abs() < 1e-14);
        assert!((f.inv_sqrt[(1, 1)].norm() - 1.0).abs() < 1e-14);
        assert!(f.sqrt[(0, 1)].norm() < 1e-14 && f.sqrt[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn sqrt_factors_random_pd() {
        let mut r = rng(11);
        let a = random_pd(&mut r, 6);
        let f = sqrt_factors(&a).unwrap();
        assert!(rel_err(&(f.sqrt.adjoint() * &f.sqrt), a.as_matrix()) < 1e-10);
        assert!(rel_err(&(&f.inv_sqrt * &f.sqrt), &eye(6)) < 1e-10);
        let whitened = &f.inv_sqrt.adjoint() * a.as_matrix() * &f.inv_sqrt;
        // A^{-1/2} as defined here is the right inverse; the whitening identity
        // uses its adjoint on the left.
        assert!(rel_err(&whitened, &eye(6)) < 1e-9);
    }

    #[test]
    fn sqrt_factors_rejects_singular() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        match sqrt_factors(&a) {
            Err(Error::Singular { ratio, .. }) => assert!(ratio.abs() < 1e-14),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn pinv_cases() {
        assert!(rel_err(&pseudo_inverse(&eye(3)), &eye(3)) < 1e-14);
        let x = ComplexMatrix::from_column_slice(2, 1, &[real(2.0), real(0.0)]);
        let p = pseudo_inverse(&x);
        assert_eq!(p.shape(), (1, 2));
        assert!((p[(0, 0)] - real(0.5)).norm() < 1e-15);
        assert!(p[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn pinv_moore_penrose_identities() {
        let mut r = rng(3);
        let x = random_matrix(&mut r, 8, 3);
        let p = pseudo_inverse(&x);
        assert!(rel_err(&(&p * &x), &eye(3)) < 1e-9);
        assert!(rel_err(&(&x * &p * &x), &x) < 1e-9);
        assert!(rel_err(&(&p * &x * &p), &p) < 1e-9);
        let xp = &x * &p;
        assert!(rel_err(&xp.adjoint(), &xp) < 1e-9);
        let px = &p * &x;
        assert!(rel_err(&px.adjoint(), &px) < 1e-9);
        let normal = (x.adjoint() * &x).try_inverse().unwrap() * x.adjoint();
        assert!(rel_err(&p, &normal) < 1e-9);
    }

    #[test]
    fn pinv_rank_deficient() {
        let mut r = rng(4);
        let a = random_matrix(&mut r, 6, 2);
        let b = random_matrix(&mut r, 2, 5);
        let x = &a * &b; // rank 2
        let p = pseudo_inverse(&x);
        assert!(rel_err(&(&x * &p * &x), &x) < 1e-9);
        assert!(rel_err(&(&p * &x * &p), &p) < 1e-9);
    }

    #[test]
    fn left_null_cases() {
        let e1 = ComplexMatrix::from_column_slice(2, 1, &[real(1.0), real(0.0)]);
        let n = left_null_basis(&e1).unwrap();
        assert_eq!(n.shape(), (2, 1));
        assert!(n[(0, 0)].norm() < 1e-14);
        assert!((n[(1, 0)].norm() - 1.0).abs() < 1e-14);

        assert_eq!(left_null_basis(&eye(4)).unwrap().ncols(), 0);

        let mut r = rng(5);
        let d = random_matrix(&mut r, 10, 4);
        let n = left_null_basis(&d).unwrap();
        assert_eq!(n.shape(), (10, 6));
        assert!((n.adjoint() * &d).norm() < 1e-10 * d.norm());
        assert!(rel_err(&(n.adjoint() * &n), &eye(6)) < 1e-10);
    }

    #[test]
    fn projector_cases() {
        let e1 = ComplexMatrix::from_column_slice(2, 1, &[real(1.0), real(0.0)]);
        let p = orthogonal_projector(&e1, false).unwrap();
        let expect = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        assert!((p.as_matrix() - expect.as_matrix()).norm() < 1e-14);

        let c = orthogonal_projector(&eye(3), true).unwrap();
        assert!(c.frobenius() < 1e-14);

        let mut r = rng(6);
        let d = random_matrix(&mut r, 8, 3);
        let p = orthogonal_projector(&d, false).unwrap();
        let p2 = p.as_matrix() * p.as_matrix();
        assert!((p2 - p.as_matrix()).norm() < 1e-10);
        let q = orthogonal_projector(&d, true).unwrap();
        assert!((p.as_matrix() + q.as_matrix() - eye(8)).norm() < 1e-12);
        let normal = &d * (d.adjoint() * &d).try_inverse().unwrap() * d.adjoint();
        assert!(rel_err(p.as_matrix(), &normal) < 1e-10);
    }

    #[test]
    fn projector_rejects_rank_deficient() {
        let col = ComplexMatrix::from_column_slice(3, 1, &[real(1.0), real(2.0), real(0.0)]);
        let d = ComplexMatrix::from_columns(&[col.column(0), col.column(0)]);
        assert!(matches!(
            orthogonal_projector(&d, false),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn gram_inverse_matches_direct() {
        let mut r = rng(8);
        let d = random_matrix(&mut r, 9, 4);
        let g = gram_inverse(&d).unwrap();
        let direct = (d.adjoint() * &d).try_inverse().unwrap();
        assert!(rel_err(g.as_matrix(), &direct) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn evd_round_trip(seed in any::<u64>(), n in 2usize..=64) {
            let mut r = rng(seed);
            let a = random_pd(&mut r, n);
            let e = evd(&a).unwrap();
            prop_assert!(rel_err(e.reconstruct().as_matrix(), a.as_matrix()) < 1e-10);
            let g = e.eigenvectors.adjoint() * &e.eigenvectors;
            prop_assert!(rel_err(&g, &eye(n)) < 1e-10);
        }

        #[test]
        fn whitening_consistency(seed in any::<u64>(), n in 2usize..=24) {
            let mut r = rng(seed);
            let a = random_pd(&mut r, n);
            let f = sqrt_factors(&a).unwrap();
            let w = f.inv_sqrt.adjoint() * a.as_matrix() * &f.inv_sqrt;
            prop_assert!(rel_err(&w, &eye(n)) < 1e-9);
        }
    }
}
