//! Correlated synthetic channels for a BS–RIS–user link.
//!
//! The BS is a uniform linear array along the x axis and the RIS a uniform
//! planar array in the y–z plane, both with sub-wavelength spacing. Spatial
//! correlation comes from analytic families (isotropic sinc, exponential)
//! so that every downstream algorithm only ever sees covariance matrices.
//!
//! Index layout: the cascaded channel `h` and `vec(F)` both stack `N`-length
//! blocks ordered by BS antenna, so block `m` of `h` is `conj(F[:, m]) ⊙ g`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::rng::{self, Stream};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub bs_positions: Vec<Point3>,
    pub ris_positions: Vec<Point3>,
    pub n1: usize,
    pub n2: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl ArrayGeometry {
    /// `m`-element ULA at the BS and an `n1 x n2` UPA at the RIS, all with
    /// the same spacing (in wavelengths).
    pub fn new(m: usize, n1: usize, n2: usize, spacing: f64) -> Result<Self> {
        if m == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::InvalidGeometry(format!(
                "array sizes must be positive (m={m}, n1={n1}, n2={n2})"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        let bs_positions = (0..m).map(|i| [i as f64 * spacing, 0.0, 0.0]).collect();
        let ris_positions = (0..n1)
            .flat_map(|a| (0..n2).map(move |b| [0.0, a as f64 * spacing, b as f64 * spacing]))
            .collect();
        Ok(Self {
            bs_positions,
            ris_positions,
            n1,
            n2,
            spacing,
        })
    }

    pub fn m(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn n(&self) -> usize {
        self.ris_positions.len()
    }
}

/// Analytic spatial-correlation family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorrelationModel {
    /// `sinc(2 d)` with `d` in wavelengths: the 3-D isotropic scattering model.
    IsotropicSinc,
    /// `rho^(d / spacing)`.
    Exponential { rho: f64 },
    Identity,
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrelationModel::Exponential { rho } if !(0.0..1.0).contains(&rho) => Err(
                Error::InvalidParameter(format!("exponential rho must lie in [0, 1), got {rho}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Normalized sinc, `sin(πx) / (πx)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Unit-diagonal spatial covariance over a set of element positions.
pub fn spatial_covariance(
    positions: &[Point3],
    spacing: f64,
    model: CorrelationModel,
) -> Result<CMatrix> {
    if positions.is_empty() {
        return Err(Error::InvalidGeometry("no element positions".into()));
    }
    model.validate()?;
    if matches!(model, CorrelationModel::Exponential { .. }) && !(spacing > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "exponential model needs positive spacing, got {spacing}"
        )));
    }
    let k = positions.len();
    let mut out = CMatrix::identity(k, k);
    if model == CorrelationModel::Identity {
        return Ok(out);
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let d = distance(&positions[i], &positions[j]);
            if !d.is_finite() {
                return Err(Error::InvalidGeometry(format!(
                    "non-finite distance between elements {i} and {j}"
                )));
            }
            let v = match model {
                CorrelationModel::IsotropicSinc => sinc(2.0 * d),
                CorrelationModel::Exponential { rho } => rho.powf(d / spacing),
                CorrelationModel::Identity => unreachable!(),
            };
            out[(i, j)] = C64::new(v, 0.0);
            out[(j, i)] = C64::new(v, 0.0);
        }
    }
    linalg::project_psd(&out, "spatial_covariance")
}

/// Covariance of `vec(F)` under the separable model `F = L_ris G R_bs`:
/// `conj(sigma_bs) ⊗ sigma_ris`.
pub fn separable_f_kernel(sigma_bs: &CMatrix, sigma_ris: &CMatrix) -> Result<CMatrix> {
    linalg::ensure_square(sigma_bs, "separable_f_kernel: sigma_bs")?;
    linalg::ensure_square(sigma_ris, "separable_f_kernel: sigma_ris")?;
    Ok(linalg::kron(&sigma_bs.conjugate(), sigma_ris))
}

/// Hermitian PSD covariance of the cascaded channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelKernel {
    sigma_h: CMatrix,
    m: usize,
    n: usize,
}

impl ChannelKernel {
    /// Validates the invariants and wraps `sigma_h`. Tiny negative
    /// eigenvalues (within tolerance) are accepted as-is.
    pub fn new(sigma_h: CMatrix, m: usize, n: usize) -> Result<Self> {
        let k = linalg::ensure_square(&sigma_h, "ChannelKernel")?;
        if k != m * n || m == 0 || n == 0 {
            return Err(Error::dim("ChannelKernel", m * n, k));
        }
        linalg::check_psd(&sigma_h, "ChannelKernel")?;
        Ok(Self { sigma_h, m, n })
    }

    pub fn identity(m: usize, n: usize) -> Self {
        Self {
            sigma_h: CMatrix::identity(m * n, m * n),
            m,
            n,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.sigma_h
    }

    pub fn into_matrix(self) -> CMatrix {
        self.sigma_h
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.sigma_h)
    }
}

/// `Σ_h = conj(Σ_F) ⊙ (1_{M×M} ⊗ Σ_g)`.
pub fn cascade_kernel(
    sigma_f: &CMatrix,
    sigma_g: &CMatrix,
    m: usize,
    n: usize,
) -> Result<ChannelKernel> {
    let mn = linalg::ensure_square(sigma_f, "cascade_kernel: sigma_f")?;
    let ng = linalg::ensure_square(sigma_g, "cascade_kernel: sigma_g")?;
    if ng != n {
        return Err(Error::dim("cascade_kernel: sigma_g", n, ng));
    }
    if mn != m * n {
        return Err(Error::dim("cascade_kernel: sigma_f", m * n, mn));
    }
    let sigma_h = DMatrix::from_fn(mn, mn, |r, k| sigma_f[(r, k)].conj() * sigma_g[(r % n, k % n)]);
    ChannelKernel::new(linalg::hermitianize(&sigma_h), m, n)
}

/// Draws from `CN(0, Σ)` with a precomputed eigen-factor.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: CMatrix,
}

impl GaussianSampler {
    pub fn new(sigma: &CMatrix) -> Result<Self> {
        Ok(Self {
            factor: linalg::psd_factor(sigma, "sample_gaussian")?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample(&self, rng: &mut Stream) -> CVector {
        let z = rng::complex_normal(rng, self.factor.ncols());
        &self.factor * z
    }
}

/// One draw from `CN(0, sigma)`.
pub fn sample_gaussian(sigma: &CMatrix, rng: &mut Stream) -> Result<CVector> {
    Ok(GaussianSampler::new(sigma)?.sample(rng))
}

/// Block `m` of the output is `conj(F[:, m]) ⊙ g`.
pub fn cascade_channel(g: &CVector, f: &CMatrix) -> Result<CVector> {
    let n = g.len();
    if f.nrows() != n {
        return Err(Error::dim("cascade_channel: F rows", n, f.nrows()));
    }
    let m = f.ncols();
    Ok(CVector::from_fn(m * n, |i, _| f[(i % n, i / n)].conj() * g[i % n]))
}

/// Received pilots `y = X^H h + n`, with unit pilot symbols and
/// `n ~ CN(0, sigma2 I)`.
pub fn observe(h: &CVector, x_mat: &CMatrix, sigma2: f64, rng: &mut Stream) -> Result<CVector> {
    if x_mat.nrows() != h.len() {
        return Err(Error::dim("observe: X rows", h.len(), x_mat.nrows()));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise power must be >= 0, got {sigma2}")));
    }
    let clean = x_mat.ad_mul(h);
    if sigma2 == 0.0 {
        return Ok(clean);
    }
    Ok(clean + rng::complex_normal(rng, x_mat.ncols()).scale(sigma2.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CVector,
    pub f: CMatrix,
    pub h: CVector,
}

/// Generator of physical `(g, F)` pairs and the matching cascaded kernel.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    g_sampler: GaussianSampler,
    ris_factor: CMatrix,
    bs_factor: CMatrix,
    kernel: ChannelKernel,
}

impl ChannelModel {
    pub fn new(
        geometry: &ArrayGeometry,
        bs: CorrelationModel,
        ris: CorrelationModel,
        user_ris: CorrelationModel,
    ) -> Result<Self> {
        let (m, n) = (geometry.m(), geometry.n());
        let sigma_bs = spatial_covariance(&geometry.bs_positions, geometry.spacing, bs)?;
        let sigma_ris = spatial_covariance(&geometry.ris_positions, geometry.spacing, ris)?;
        let sigma_g = spatial_covariance(&geometry.ris_positions, geometry.spacing, user_ris)?;
        let sigma_f = separable_f_kernel(&sigma_bs, &sigma_ris)?;
        let kernel = cascade_kernel(&sigma_f, &sigma_g, m, n)?;
        // F = L G R with L L^H = Σ_ris and R^H R = Σ_bs.
        let ris_factor = linalg::psd_factor(&sigma_ris, "sigma_ris")?;
        let bs_factor = linalg::psd_factor(&sigma_bs, "sigma_bs")?.adjoint();
        Ok(Self {
            g_sampler: GaussianSampler::new(&sigma_g)?,
            ris_factor,
            bs_factor,
            kernel,
        })
    }

    pub fn kernel(&self) -> &ChannelKernel {
        &self.kernel
    }

    pub fn draw(&self, rng: &mut Stream) -> ChannelRealization {
        let (n, m) = (self.ris_factor.nrows(), self.bs_factor.ncols());
        let g = self.g_sampler.sample(rng);
        let white = CMatrix::from_column_slice(n, m, rng::complex_normal(rng, n * m).as_slice());
        let f = &self.ris_factor * white * &self.bs_factor;
        let h = cascade_channel(&g, &f).expect("dimensions fixed at construction");
        ChannelRealization { g, f, h }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, rel_frobenius};

    fn outer_mean(samples: &[CVector]) -> CMatrix {
        let k = samples[0].len();
        let mut acc = CMatrix::zeros(k, k);
        for s in samples {
            acc += s * s.adjoint();
        }
        acc.unscale(samples.len() as f64)
    }

    #[test]
    fn single_element_is_unit() {
        for model in [
            CorrelationModel::IsotropicSinc,
            CorrelationModel::Exponential { rho: 0.5 },
            CorrelationModel::Identity,
        ] {
            let s = spatial_covariance(&[[0.0, 0.0, 0.0]], 0.25, model).unwrap();
            assert_eq!(s.shape(), (1, 1));
            assert!((s[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn sinc_zero_crossing_at_half_wavelength() {
        let s = spatial_covariance(
            &[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]],
            0.5,
            CorrelationModel::IsotropicSinc,
        )
        .unwrap();
        assert!(s[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn exponential_matches_entrywise_oracle() {
        let geo = ArrayGeometry::new(8, 1, 1, 0.25).unwrap();
        let s = spatial_covariance(
            &geo.bs_positions,
            0.25,
            CorrelationModel::Exponential { rho: 0.9 },
        )
        .unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = 0.9f64.powi((i as i32 - j as i32).abs());
                assert!((s[(i, j)].re - want).abs() < 1e-12, "({i},{j})");
                assert!(s[(i, j)].im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_rho_and_non_finite_positions() {
        assert!(spatial_covariance(&[[0.0; 3]], 1.0, CorrelationModel::Exponential { rho: 1.0 })
            .is_err());
        let err = spatial_covariance(
            &[[0.0; 3], [f64::INFINITY, 0.0, 0.0]],
            1.0,
            CorrelationModel::IsotropicSinc,
        );
        assert!(matches!(err, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn separable_identity_and_scalar_cases() {
        let f = separable_f_kernel(&CMatrix::identity(3, 3), &CMatrix::identity(4, 4)).unwrap();
        assert_eq!(f, CMatrix::identity(12, 12));
        let ris = spatial_covariance(
            &ArrayGeometry::new(1, 2, 2, 0.25).unwrap().ris_positions,
            0.25,
            CorrelationModel::IsotropicSinc,
        )
        .unwrap();
        let bs = CMatrix::from_element(1, 1, c(2.5, 0.0));
        let f = separable_f_kernel(&bs, &ris).unwrap();
        assert!(rel_frobenius(&f, &ris.scale(2.5)) < 1e-15);
    }

    #[test]
    fn separable_kernel_matches_monte_carlo() {
        let geo = ArrayGeometry::new(2, 2, 2, 0.25).unwrap();
        let model = ChannelModel::new(
            &geo,
            CorrelationModel::IsotropicSinc,
            CorrelationModel::Exponential { rho: 0.8 },
            CorrelationModel::IsotropicSinc,
        )
        .unwrap();
        let sigma_bs =
            spatial_covariance(&geo.bs_positions, 0.25, CorrelationModel::IsotropicSinc).unwrap();
        let sigma_ris = spatial_covariance(
            &geo.ris_positions,
            0.25,
            CorrelationModel::Exponential { rho: 0.8 },
        )
        .unwrap();
        let want = separable_f_kernel(&sigma_bs, &sigma_ris).unwrap();
        let mut rng = rng::stream(11, &[]);
        let draws: Vec<CVector> = (0..20_000)
            .map(|_| {
                let f = model.draw(&mut rng).f;
                CVector::from_column_slice(f.as_slice())
            })
            .collect();
        let err = rel_frobenius(&outer_mean(&draws), &want);
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn cascade_kernel_trivial_cases() {
        let sigma_g = spatial_covariance(
            &ArrayGeometry::new(1, 1, 3, 0.25).unwrap().ris_positions,
            0.25,
            CorrelationModel::IsotropicSinc,
        )
        .unwrap();
        let ones = CMatrix::from_element(6, 6, c(1.0, 0.0));
        let k = cascade_kernel(&ones, &sigma_g, 2, 3).unwrap();
        for bm in 0..2 {
            for bk in 0..2 {
                let block = k.matrix().view((bm * 3, bk * 3), (3, 3)).into_owned();
                assert!(rel_frobenius(&block, &sigma_g) < 1e-15);
            }
        }
        let k = cascade_kernel(&CMatrix::identity(6, 6), &sigma_g, 2, 3).unwrap();
        assert!(rel_frobenius(k.matrix(), &CMatrix::identity(6, 6)) < 1e-15);
        assert!(cascade_kernel(&ones, &sigma_g, 3, 3).is_err());
    }

    #[test]
    fn cascade_kernel_matches_monte_carlo() {
        let geo = ArrayGeometry::new(2, 2, 2, 0.25).unwrap();
        let model = ChannelModel::new(
            &geo,
            CorrelationModel::Exponential { rho: 0.7 },
            CorrelationModel::IsotropicSinc,
            CorrelationModel::Exponential { rho: 0.9 },
        )
        .unwrap();
        let mut rng = rng::stream(5, &[]);
        let draws: Vec<CVector> = (0..20_000).map(|_| model.draw(&mut rng).h).collect();
        let err = rel_frobenius(&outer_mean(&draws), model.kernel().matrix());
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn gaussian_degenerate_and_moments() {
        let mut rng = rng::stream(3, &[]);
        let z = sample_gaussian(&CMatrix::zeros(3, 3), &mut rng).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));

        let sampler = GaussianSampler::new(&CMatrix::identity(4, 4)).unwrap();
        let mut power = [0.0; 4];
        let draws = 100_000;
        for _ in 0..draws {
            let s = sampler.sample(&mut rng);
            for (p, v) in power.iter_mut().zip(s.iter()) {
                *p += v.norm_sqr();
            }
        }
        for p in power {
            let var = p / draws as f64;
            assert!((0.97..=1.03).contains(&var), "variance {var}");
        }

        let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![c(4.0, 0.0), c(0.0, 0.0)]));
        let sampler = GaussianSampler::new(&diag).unwrap();
        let mut p0 = 0.0;
        for _ in 0..20_000 {
            let s = sampler.sample(&mut rng);
            assert!(s[1].norm() < 1e-12);
            p0 += s[0].norm_sqr();
        }
        let var = p0 / 20_000.0;
        assert!((var - 4.0).abs() < 0.15, "variance {var}");
    }

    #[test]
    fn gaussian_rejects_non_hermitian() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = c(0.5, 0.0);
        let mut rng = rng::stream(0, &[]);
        assert!(matches!(sample_gaussian(&a, &mut rng), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn gaussian_reproduces_covariance() {
        let geo = ArrayGeometry::new(4, 2, 2, 0.25).unwrap();
        let model = ChannelModel::new(
            &geo,
            CorrelationModel::IsotropicSinc,
            CorrelationModel::IsotropicSinc,
            CorrelationModel::IsotropicSinc,
        )
        .unwrap();
        let sampler = GaussianSampler::new(model.kernel().matrix()).unwrap();
        let mut rng = rng::stream(9, &[]);
        let draws: Vec<CVector> = (0..20_000).map(|_| sampler.sample(&mut rng)).collect();
        let err = rel_frobenius(&outer_mean(&draws), model.kernel().matrix());
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn cascade_channel_trivial_cases() {
        let g = CVector::from_element(3, c(1.0, 0.0));
        let f = CMatrix::from_element(3, 2, c(1.0, 0.0));
        let h = cascade_channel(&g, &f).unwrap();
        assert!(h.iter().all(|z| (z - c(1.0, 0.0)).norm() == 0.0));
        let h = cascade_channel(&CVector::zeros(3), &f).unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
        assert!(cascade_channel(&CVector::zeros(2), &f).is_err());
    }

    #[test]
    fn observe_noiseless_and_noise_power() {
        let mut rng = rng::stream(21, &[]);
        let h = rng::complex_normal(&mut rng, 6);
        let y = observe(&h, &CMatrix::identity(6, 6), 0.0, &mut rng).unwrap();
        assert_eq!(y, h);
        let y = observe(&CVector::zeros(6), &CMatrix::identity(6, 6), 0.0, &mut rng).unwrap();
        assert!(y.iter().all(|z| z.norm() == 0.0));

        let x = CMatrix::identity(1, 1);
        let h1 = CVector::from_element(1, c(0.3, -0.2));
        let n = 100_000;
        let mut p = 0.0;
        for _ in 0..n {
            let y = observe(&h1, &x, 0.5, &mut rng).unwrap();
            p += (y[0] - h1[0]).norm_sqr();
        }
        let var = p / n as f64;
        assert!((0.485..=0.515).contains(&var), "variance {var}");
        assert!(observe(&h1, &x, -1.0, &mut rng).is_err());
    }
}
