//! Ellipsoidal uncertainty sets and their propagation through a
//! dimension-reducing transform.
//!
//! An ellipsoid `{a : (a - c)^H E (a - c) <= 1}` mapped through `b = D^H a`
//! is contained in the reduced ellipsoid with center `D^H c` and shape
//!
//! ```text
//! F = D^+ (E - E N [N^H E N]^+ N^H E) (D^+)^H      (general, E >= 0)
//! F = [D^H E^{-1} D]^{-1}                           (E > 0)
//! F = (1/eps) (D^H D)^{-1}                          (E = I/eps)
//! ```
//!
//! where `N` is an orthonormal basis of the left null space of `D`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::{
    evd, gram_inverse, left_null_basis, pseudo_inverse, real, singular_values, ComplexMatrix,
    ComplexVector, HermitianMatrix, SqrtFactors,
};

/// Factorizations of a positive-definite shape matrix, computed once.
#[derive(Debug, Clone)]
pub struct ShapeFactors {
    pub inverse: HermitianMatrix,
    pub sqrt: SqrtFactors,
}

#[derive(Debug, Clone)]
pub struct Ellipsoid {
    center: ComplexVector,
    shape: HermitianMatrix,
    factors: OnceLock<Option<ShapeFactors>>,
}

impl Ellipsoid {
    pub fn new(center: ComplexVector, shape: HermitianMatrix) -> Result<Self> {
        if center.len() != shape.dim() {
            return Err(Error::InvalidInput(format!(
                "ellipsoid center length {} does not match shape dimension {}",
                center.len(),
                shape.dim()
            )));
        }
        Ok(Ellipsoid {
            center,
            shape,
            factors: OnceLock::new(),
        })
    }

    pub fn center(&self) -> &ComplexVector {
        &self.center
    }

    pub fn shape(&self) -> &HermitianMatrix {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Inverse and square-root factors of the shape, or `None` when the shape
    /// is singular. Computed on first use and cached.
    pub fn factors(&self) -> Option<&ShapeFactors> {
        self.factors
            .get_or_init(|| {
                let e = evd(&self.shape).ok()?;
                let sqrt = SqrtFactors::from_evd(&e).ok()?;
                Some(ShapeFactors {
                    inverse: e.map_eigenvalues(|l| 1.0 / l),
                    sqrt,
                })
            })
            .as_ref()
    }

    pub fn is_non_degenerate(&self) -> bool {
        self.factors().is_some()
    }

    /// Whether `a` lies in the set, with slack `tol`.
    pub fn contains(&self, a: &ComplexVector, tol: f64) -> bool {
        self.shape.quad_form(&(a - &self.center)) <= 1.0 + tol
    }
}

/// `||a - center||^2 <= radius_sq`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSet {
    pub center: ComplexVector,
    pub radius_sq: f64,
}

impl SphereSet {
    pub fn new(center: ComplexVector, radius_sq: f64) -> Result<Self> {
        if !(radius_sq > 0.0) || !radius_sq.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sphere radius^2 must be positive, got {radius_sq}"
            )));
        }
        Ok(SphereSet { center, radius_sq })
    }

    pub fn to_ellipsoid(&self) -> Ellipsoid {
        let n = self.center.len();
        Ellipsoid::new(
            self.center.clone(),
            HermitianMatrix::identity(n).scaled(1.0 / self.radius_sq),
        )
        .expect("dimensions agree by construction")
    }
}

/// Either form of element-space uncertainty set accepted by the solvers.
#[derive(Debug, Clone)]
pub enum UncertaintySet {
    Sphere(SphereSet),
    Ellipsoid(Ellipsoid),
}

impl UncertaintySet {
    pub fn center(&self) -> &ComplexVector {
        match self {
            UncertaintySet::Sphere(s) => &s.center,
            UncertaintySet::Ellipsoid(e) => e.center(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn feasibility(&self) -> Feasibility {
        match self {
            UncertaintySet::Sphere(s) => {
                Feasibility::from_margin(s.center.norm_squared() / s.radius_sq)
            }
            UncertaintySet::Ellipsoid(e) => feasibility(e),
        }
    }
}

impl From<SphereSet> for UncertaintySet {
    fn from(s: SphereSet) -> Self {
        UncertaintySet::Sphere(s)
    }
}

impl From<Ellipsoid> for UncertaintySet {
    fn from(e: Ellipsoid) -> Self {
        UncertaintySet::Ellipsoid(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// `center^H shape center`.
    pub margin: f64,
    pub feasible: bool,
}

impl Feasibility {
    fn from_margin(margin: f64) -> Self {
        Feasibility {
            margin,
            feasible: margin > 1.0,
        }
    }
}

/// The origin must lie outside the set, otherwise the robust problem has the
/// trivial solution `a = 0`.
pub fn feasibility(e: &Ellipsoid) -> Feasibility {
    Feasibility::from_margin(e.shape.quad_form(&e.center))
}

/// Relative `sigma_min / sigma_max` below which a reducer is rejected. Columns
/// are normalized first so the test ignores column scaling.
pub const REDUCER_RANK_CUTOFF: f64 = 1e-10;

/// Full-column-rank `M x N` transform `D`, with lazily cached derived
/// quantities.
#[derive(Debug, Clone)]
pub struct DimensionReducer {
    d: ComplexMatrix,
    column_norms: Vec<f64>,
    is_orthonormal: bool,
    cg_diagonal: Option<Vec<f64>>,
    pinv: OnceLock<ComplexMatrix>,
    null_basis: OnceLock<ComplexMatrix>,
    gram_inv: OnceLock<HermitianMatrix>,
}

impl DimensionReducer {
    pub fn new(d: ComplexMatrix) -> Result<Self> {
        let (m, n) = d.shape();
        if n == 0 || n > m {
            return Err(Error::InvalidReducer(format!(
                "reducer must be M x N with 1 <= N <= M, got {m}x{n}"
            )));
        }
        if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidReducer("non-finite entries".into()));
        }
        let column_norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
        if column_norms.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidReducer("zero column".into()));
        }
        let normalized = normalize_columns(&d, &column_norms);
        let sv = singular_values(&normalized);
        let max = sv.iter().copied().fold(0.0_f64, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > REDUCER_RANK_CUTOFF * max) {
            return Err(Error::InvalidReducer(format!(
                "rank deficient: singular value ratio {:e}",
                min / max
            )));
        }
        let gram_err = (d.adjoint() * &d - ComplexMatrix::identity(n, n)).norm();
        Ok(DimensionReducer {
            d,
            column_norms,
            is_orthonormal: gram_err < 1e-8,
            cg_diagonal: None,
            pinv: OnceLock::new(),
            null_basis: OnceLock::new(),
            gram_inv: OnceLock::new(),
        })
    }

    /// Reducer carrying the diagonal of `D^H R D` produced by the CG recursion.
    pub fn with_cg_diagonal(d: ComplexMatrix, diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.len() != d.ncols() {
            return Err(Error::InvalidReducer(format!(
                "CG diagonal has {} entries for {} columns",
                diagonal.len(),
                d.ncols()
            )));
        }
        if let Some(bad) = diagonal.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidReducer(format!("non-positive CG diagonal entry {bad}")));
        }
        let mut r = DimensionReducer::new(d)?;
        r.cg_diagonal = Some(diagonal);
        Ok(r)
    }

    pub fn identity(m: usize) -> Self {
        DimensionReducer::new(ComplexMatrix::identity(m, m)).expect("identity has full rank")
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.d
    }

    pub fn element_dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn reduced_dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.is_orthonormal
    }

    pub fn cg_diagonal(&self) -> Option<&[f64]> {
        self.cg_diagonal.as_deref()
    }

    /// `D^H x`.
    pub fn reduce(&self, x: &ComplexVector) -> ComplexVector {
        self.d.ad_mul(x)
    }

    /// `D w`.
    pub fn expand(&self, w: &ComplexVector) -> ComplexVector {
        &self.d * w
    }

    /// `D^H R D`.
    pub fn reduce_covariance(&self, r: &HermitianMatrix) -> HermitianMatrix {
        r.congruence(&self.d)
    }

    pub fn pseudo_inverse(&self) -> &ComplexMatrix {
        self.pinv.get_or_init(|| {
            // D = Dn S, so D^+ = S^{-1} Dn^+
            let mut p = pseudo_inverse(&normalize_columns(&self.d, &self.column_norms));
            for (k, s) in self.column_norms.iter().enumerate() {
                p.row_mut(k).unscale_mut(*s);
            }
            p
        })
    }

    pub fn left_null_basis(&self) -> &ComplexMatrix {
        self.null_basis.get_or_init(|| {
            left_null_basis(&normalize_columns(&self.d, &self.column_norms))
                .expect("rows >= cols checked at construction")
        })
    }

    /// `(D^H D)^{-1}`.
    pub fn gram_inverse(&self) -> &HermitianMatrix {
        self.gram_inv.get_or_init(|| {
            let g = gram_inverse(&normalize_columns(&self.d, &self.column_norms))
                .expect("rank checked at construction");
            let s = &self.column_norms;
            let n = s.len();
            let m = ComplexMatrix::from_fn(n, n, |i, j| g.as_matrix()[(i, j)] / (s[i] * s[j]));
            HermitianMatrix::symmetrized(m)
        })
    }

    /// Relative off-diagonal Frobenius mass of `D^H R D`.
    pub fn diagonalization_residual(&self, r: &HermitianMatrix) -> f64 {
        off_diagonal_ratio(&self.reduce_covariance(r))
    }
}

pub fn off_diagonal_ratio(a: &HermitianMatrix) -> f64 {
    let m = a.as_matrix();
    let mut off = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                off += m[(i, j)].norm_sqr();
            }
        }
    }
    off.sqrt() / m.norm()
}

fn normalize_columns(d: &ComplexMatrix, norms: &[f64]) -> ComplexMatrix {
    let mut out = d.clone();
    for (k, s) in norms.iter().enumerate() {
        out.column_mut(k).unscale_mut(*s);
    }
    out
}

fn check_dims(es_dim: usize, drt: &DimensionReducer) -> Result<()> {
    if es_dim != drt.element_dim() {
        return Err(Error::InvalidInput(format!(
            "set dimension {es_dim} does not match reducer rows {}",
            drt.element_dim()
        )));
    }
    Ok(())
}

/// General propagation; valid for degenerate (PSD) shapes.
pub fn propagate_general(es: &Ellipsoid, drt: &DimensionReducer) -> Result<Ellipsoid> {
    check_dims(es.dim(), drt)?;
    let e = es.shape().as_matrix();
    let null = drt.left_null_basis();
    let middle = if null.ncols() == 0 {
        e.clone()
    } else {
        let en = e * null;
        let inner = HermitianMatrix::symmetrized(null.adjoint() * &en);
        let inner_pinv = pseudo_inverse(inner.as_matrix());
        e - &en * inner_pinv * en.adjoint()
    };
    let pinv = drt.pseudo_inverse();
    let f = HermitianMatrix::symmetrized(pinv * middle * pinv.adjoint());
    Ellipsoid::new(drt.reduce(es.center()), f)
}

/// Propagation for positive-definite shapes; only an `N x N` inverse is
/// formed online, the element-space inverse comes from the ellipsoid cache.
pub fn propagate_nondegenerate(es: &Ellipsoid, drt: &DimensionReducer) -> Result<Ellipsoid> {
    check_dims(es.dim(), drt)?;
    let factors = es.factors().ok_or_else(|| {
        Error::NotPositiveDefinite("element-space shape is singular".into())
    })?;
    let g = factors.inverse.congruence(drt.matrix());
    let f = g.inverse_pd()?;
    Ellipsoid::new(drt.reduce(es.center()), f)
}

/// Whether the spherical propagation needs a matrix inverse; orthonormal
/// reducers give `F = I / eps` in closed form.
pub fn sphere_shape_requires_inversion(drt: &DimensionReducer) -> bool {
    !drt.is_orthonormal()
}

pub fn propagate_sphere(s: &SphereSet, drt: &DimensionReducer) -> Result<Ellipsoid> {
    check_dims(s.center.len(), drt)?;
    let n = drt.reduced_dim();
    let f = if sphere_shape_requires_inversion(drt) {
        drt.gram_inverse().scaled(1.0 / s.radius_sq)
    } else {
        HermitianMatrix::identity(n).scaled(1.0 / s.radius_sq)
    };
    Ellipsoid::new(drt.reduce(&s.center), f)
}

/// Dispatches on the set type: spheres use the closed form, positive-definite
/// ellipsoids the `N x N` inverse, and singular ellipsoids the general rule.
pub fn propagate(set: &UncertaintySet, drt: &DimensionReducer) -> Result<Ellipsoid> {
    match set {
        UncertaintySet::Sphere(s) => propagate_sphere(s, drt),
        UncertaintySet::Ellipsoid(e) if e.is_non_degenerate() => propagate_nondegenerate(e, drt),
        UncertaintySet::Ellipsoid(e) => propagate_general(e, drt),
    }
}

/// A point on the boundary of `es`, from a direction `v` in whitened space.
pub fn boundary_point(es: &Ellipsoid, v: &ComplexVector) -> Option<ComplexVector> {
    let f = es.factors()?;
    let unit = v / real(v.norm());
    Some(es.center() + &f.sqrt.inv_sqrt * unit)
}
