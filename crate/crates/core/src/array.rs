//! Array geometry, steering vectors and the simulated data model.
//!
//! Positions are in wavelengths. The propagation direction for azimuth `az`
//! and elevation `el` is `u = (cos el sin az, sin el, cos el cos az)`, so a
//! planar array in the x-y plane has broadside along +z and uniform beam
//! grids in `(u_x, u_y)` cosine space. Element `m` of the steering vector is
//! `exp(-j 2 pi <u, p_m>)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c64, real, sqrt_factors, ComplexMatrix, ComplexVector, HermitianMatrix};

/// Element positions of an array, in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometrySpec", into = "GeometrySpec")]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
}

/// Serialized form of [`ArrayGeometry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySpec {
    /// `columns` elements per row, `rows` rows, in the x-y plane.
    Planar {
        columns: usize,
        rows: usize,
        #[serde(default = "half_wavelength")]
        spacing: f64,
    },
    Positions(Vec<[f64; 3]>),
}

fn half_wavelength() -> f64 {
    0.5
}

impl TryFrom<GeometrySpec> for ArrayGeometry {
    type Error = Error;

    fn try_from(spec: GeometrySpec) -> Result<Self> {
        match spec {
            GeometrySpec::Planar {
                columns,
                rows,
                spacing,
            } => ArrayGeometry::planar(columns, rows, spacing),
            GeometrySpec::Positions(p) => ArrayGeometry::new(p),
        }
    }
}

impl From<ArrayGeometry> for GeometrySpec {
    fn from(g: ArrayGeometry) -> Self {
        GeometrySpec::Positions(g.positions)
    }
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("array needs at least one element".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("array positions must be finite".into()));
        }
        Ok(ArrayGeometry { positions })
    }

    /// Rectangular grid in the x-y plane, row by row.
    pub fn planar(columns: usize, rows: usize, spacing: f64) -> Result<Self> {
        if columns == 0 || rows == 0 || !(spacing > 0.0) {
            return Err(Error::InvalidInput(format!(
                "planar array needs positive size and spacing, got {columns}x{rows} at {spacing}"
            )));
        }
        let positions = (0..rows)
            .flat_map(|r| (0..columns).map(move |c| [c as f64 * spacing, r as f64 * spacing, 0.0]))
            .collect();
        ArrayGeometry::new(positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn distance(&self, m: usize, n: usize) -> f64 {
        let (a, b) = (self.positions[m], self.positions[n]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

pub fn direction(azimuth: f64, elevation: f64) -> [f64; 3] {
    [
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
        elevation.cos() * azimuth.cos(),
    ]
}

pub fn steering_vector(geometry: &ArrayGeometry, azimuth: f64, elevation: f64) -> ComplexVector {
    let u = direction(azimuth, elevation);
    ComplexVector::from_iterator(
        geometry.len(),
        geometry.positions.iter().map(|p| {
            let phase = -2.0 * PI * (u[0] * p[0] + u[1] * p[1] + u[2] * p[2]);
            c64(phase.cos(), phase.sin())
        }),
    )
}

/// Spatial correlation of isotropic noise: `sin(pi g) / (pi g)`.
pub fn isotropic_noise_cov(geometry: &ArrayGeometry) -> HermitianMatrix {
    let m = geometry.len();
    let sinc = |g: f64| {
        if g == 0.0 {
            1.0
        } else {
            (PI * g).sin() / (PI * g)
        }
    };
    HermitianMatrix::symmetrized(ComplexMatrix::from_fn(m, m, |i, j| {
        real(sinc(geometry.distance(i, j)))
    }))
}

/// A point source: power plus nominal direction and its perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub power: f64,
    /// Nominal (azimuth, elevation) in radians.
    pub angles: (f64, f64),
    /// Angle-of-arrival error (azimuth, elevation) in radians.
    #[serde(default)]
    pub aoa_error: (f64, f64),
    /// Scale of the unit-norm arbitrary ASV error.
    #[serde(default)]
    pub arbitrary_error: f64,
}

impl SourceSpec {
    pub fn new(power: f64, azimuth: f64, elevation: f64) -> Self {
        SourceSpec {
            power,
            angles: (azimuth, elevation),
            aoa_error: (0.0, 0.0),
            arbitrary_error: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (az, el) = self.angles;
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(Error::InvalidInput(format!("source power {} must be >= 0", self.power)));
        }
        if !(az > -PI && az <= PI) || !(-PI / 2.0..=PI / 2.0).contains(&el) {
            return Err(Error::InvalidInput(format!(
                "source angles ({az}, {el}) outside (-pi, pi] x [-pi/2, pi/2]"
            )));
        }
        if !(self.arbitrary_error >= 0.0) {
            return Err(Error::InvalidInput("arbitrary error scale must be >= 0".into()));
        }
        Ok(())
    }

    /// Steering vector at the nominal angles.
    pub fn nominal_asv(&self, geometry: &ArrayGeometry) -> ComplexVector {
        steering_vector(geometry, self.angles.0, self.angles.1)
    }
}

/// Standard circular complex normal vector, `E[z z^H] = I`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(s * re, s * im)
    })
}

/// `a(theta + delta) + sigma_e e` with `e` uniform on the complex unit sphere.
pub fn perturbed_asv<R: Rng + ?Sized>(
    spec: &SourceSpec,
    geometry: &ArrayGeometry,
    rng: &mut R,
) -> ComplexVector {
    let (az, el) = spec.angles;
    let mut a = steering_vector(geometry, az + spec.aoa_error.0, el + spec.aoa_error.1);
    if spec.arbitrary_error > 0.0 {
        let mut e = complex_normal(rng, geometry.len());
        let n = e.norm();
        e.unscale_mut(n);
        a += e * real(spec.arbitrary_error);
    }
    a
}

/// Scenario for covariance synthesis and snapshot generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    pub soi: SourceSpec,
    #[serde(default)]
    pub interferers: Vec<SourceSpec>,
    pub sensor_noise_power: f64,
    #[serde(default)]
    pub iso_noise_power: f64,
    pub snapshots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub diagonal_loading: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.soi.validate()?;
        for i in &self.interferers {
            i.validate()?;
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidInput("snapshot count must be >= 1".into()));
        }
        let (s, iso, dl) = (self.sensor_noise_power, self.iso_noise_power, self.diagonal_loading);
        if !(s >= 0.0 && iso >= 0.0 && dl >= 0.0) {
            return Err(Error::InvalidInput("noise powers and loading must be >= 0".into()));
        }
        if !(s + iso > 0.0) {
            return Err(Error::InvalidInput(
                "sensor plus isotropic noise power must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Returns `(R_x, Q_x)` with `Q_x = sum sigma_i^2 a_i a_i^H + sigma_s^2 I +
/// sigma_iso^2 Q_iso` and `R_x = sigma_0^2 a_0 a_0^H + Q_x`.
pub fn synth_covariance(
    config: &ScenarioConfig,
    soi_asv: &ComplexVector,
    interferer_asvs: &[ComplexVector],
) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let m = config.geometry.len();
    if soi_asv.len() != m || interferer_asvs.iter().any(|a| a.len() != m) {
        return Err(Error::InvalidInput(format!(
            "steering vectors must have length {m}"
        )));
    }
    if interferer_asvs.len() != config.interferers.len() {
        return Err(Error::InvalidInput(format!(
            "{} interferer ASVs for {} interferers",
            interferer_asvs.len(),
            config.interferers.len()
        )));
    }
    let mut q = HermitianMatrix::zeros(m).add_identity(config.sensor_noise_power);
    if config.iso_noise_power > 0.0 {
        q = q.add(&isotropic_noise_cov(&config.geometry).scaled(config.iso_noise_power));
    }
    for (spec, a) in config.interferers.iter().zip(interferer_asvs) {
        q = q.add(&HermitianMatrix::outer(a, spec.power));
    }
    let r = q.add(&HermitianMatrix::outer(soi_asv, config.soi.power));
    Ok((r, q))
}

/// `K` i.i.d. circular Gaussian snapshots with covariance `R`, as columns.
pub fn sample_snapshots<R: Rng + ?Sized>(
    covariance: &HermitianMatrix,
    k: usize,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let factors = sqrt_factors(covariance)?;
    let m = covariance.dim();
    let colour = factors.sqrt.adjoint();
    let mut out = ComplexMatrix::zeros(m, k);
    for j in 0..k {
        let z = complex_normal(rng, m);
        out.set_column(j, &(&colour * z));
    }
    Ok(out)
}

/// `(1/K) sum x_k x_k^H + loading I`.
pub fn sample_covariance(snapshots: &ComplexMatrix, loading: f64) -> HermitianMatrix {
    let m = snapshots.nrows();
    let k = snapshots.ncols();
    let scm = if k == 0 {
        HermitianMatrix::zeros(m)
    } else {
        HermitianMatrix::symmetrized(snapshots * snapshots.adjoint() * real(1.0 / k as f64))
    };
    scm.add_identity(loading)
}

/// Independent random stream for `(seed, stream)`; ChaCha is counter based,
/// so streams can be generated in any order.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
