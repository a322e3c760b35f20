//! Data generators for the simulation studies.
//!
//! * Model 1: Gaussian, block-diagonal covariance (blocks of 5, within-block
//!   covariance 0.5, variances U(1,2)).
//! * Model 2: Gaussian, banded covariance `0.4^{|i−j|}`.
//! * Model 3: Gaussian, non-sparse covariance built from a tridiagonal matrix
//!   plus a Haar-random rank-`k` perturbation.
//! * Model 4: multivariate t (ν = 5) with the Model 1 scale matrix.
//! * Model 5: multivariate t (ν = 5) on `(Z, X)`, where the alternative puts
//!   a sparse vector of covariances between `Z` and `X`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_DATA, STREAM_MODEL};
use crate::ustat::Sample;

const BLOCK: usize = 5;
const BLOCK_COV: f64 = 0.5;
const BAND_DECAY: f64 = 0.4;

// indices within the model stream
const IDX_DIAGONAL: u64 = 0;
const IDX_STIEFEL: u64 = 1;
const IDX_SCALES: u64 = 2;
const IDX_SHIFT: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    BlockDiagonal,
    Banded,
    NonSparse,
    MultivariateT,
    Marginal,
}

impl Model {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Model::BlockDiagonal),
            2 => Ok(Model::Banded),
            3 => Ok(Model::NonSparse),
            4 => Ok(Model::MultivariateT),
            5 => Ok(Model::Marginal),
            _ => Err(Error::Config(format!("unknown model {id} (expected 1-5)"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Model::BlockDiagonal => 1,
            Model::Banded => 2,
            Model::NonSparse => 3,
            Model::MultivariateT => 4,
            Model::Marginal => 5,
        }
    }

    /// Whether rows are multivariate t rather than Gaussian.
    pub fn heavy_tailed(self) -> bool {
        matches!(self, Model::MultivariateT | Model::Marginal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    pub d: usize,
    /// Rank `k` of the Stiefel perturbation (Model 3); `None` means `⌊d/5⌋` (at least 1).
    pub stiefel_rank: Option<usize>,
    /// Degrees of freedom for the t models.
    pub nu: f64,
    /// Seed for model-level randomness (variances, Stiefel frame).
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(model: Model, d: usize, seed: u64) -> Self {
        Self {
            model,
            d,
            stiefel_rank: None,
            nu: 5.0,
            seed,
        }
    }

    pub fn resolved_rank(&self) -> usize {
        self.stiefel_rank.unwrap_or((self.d / 5).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.model == Model::NonSparse && self.resolved_rank() > self.d {
            return Err(Error::Config(format!(
                "Stiefel rank {} exceeds dimension {}",
                self.resolved_rank(),
                self.d
            )));
        }
        if self.model.heavy_tailed() && (self.nu.is_nan() || self.nu <= 2.0) {
            return Err(Error::Config(format!(
                "need nu > 2 for a finite covariance, got {}",
                self.nu
            )));
        }
        Ok(())
    }
}

/// Sparse mean/covariance shift: `s` random coordinates, each U(u1, u2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub s: usize,
    pub u1: f64,
    pub u2: f64,
}

impl ShiftSpec {
    pub fn none() -> Self {
        Self {
            s: 0,
            u1: 0.0,
            u2: 0.0,
        }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn block_diagonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, STREAM_MODEL, IDX_DIAGONAL);
    let mut sigma = DMatrix::zeros(d, d);
    for i in 0..d {
        sigma[(i, i)] = uniform(&mut rng, 1.0, 2.0);
    }
    // trailing d mod 5 coordinates form a shorter block
    for start in (0..d).step_by(BLOCK) {
        let end = (start + BLOCK).min(d);
        for i in start..end {
            for j in start..end {
                if i != j {
                    sigma[(i, j)] = BLOCK_COV;
                }
            }
        }
    }
    sigma
}

fn non_sparse(d: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let u = sample_stiefel_with(d, k, &mut stream_rng(seed, STREAM_MODEL, IDX_STIEFEL));
    let mut base = &u * u.transpose();
    for i in 0..d {
        base[(i, i)] += 1.0;
        if i + 1 < d {
            base[(i, i + 1)] += 0.5;
            base[(i + 1, i)] += 0.5;
        }
    }
    let inv_sd: Vec<f64> = (0..d).map(|i| base[(i, i)].sqrt().recip()).collect();
    let mut rng = stream_rng(seed, STREAM_MODEL, IDX_SCALES);
    let sd: Vec<f64> = (0..d).map(|_| uniform(&mut rng, 1.0, 2.0).sqrt()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        let r = if i == j {
            1.0
        } else {
            base[(i, j)] * inv_sd[i] * inv_sd[j]
        };
        sd[i] * r * sd[j]
    })
}

/// Model 3's correlation matrix `R` for inspection.
pub fn correlation_of(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let d = sigma.nrows();
    let inv_sd: Vec<f64> = (0..d).map(|i| sigma[(i, i)].sqrt().recip()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            sigma[(i, j)] * inv_sd[i] * inv_sd[j]
        }
    })
}

/// Covariance (Models 1–3) or scale matrix (Models 4–5 use Model 1's).
pub fn build_covariance(spec: &ModelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = spec.d;
    let sigma = match spec.model {
        Model::BlockDiagonal | Model::MultivariateT | Model::Marginal => {
            block_diagonal(d, spec.seed)
        }
        Model::Banded => DMatrix::from_fn(d, d, |i, j| BAND_DECAY.powi(i.abs_diff(j) as i32)),
        Model::NonSparse => non_sparse(d, spec.resolved_rank(), spec.seed),
    };
    if sigma.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(format!(
            "model {} covariance, d = {d}",
            spec.model.id()
        )));
    }
    Ok(sigma)
}

fn sample_stiefel_with(d: usize, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-uniform `d × k` matrix with orthonormal columns (QR of a Gaussian
/// matrix, columns sign-fixed so that `R` has a positive diagonal).
pub fn sample_stiefel(d: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    if k == 0 || k > d {
        return Err(Error::Config(format!(
            "Stiefel rank must satisfy 1 <= k <= d, got k = {k}, d = {d}"
        )));
    }
    Ok(sample_stiefel_with(
        d,
        k,
        &mut stream_rng(seed, STREAM_MODEL, IDX_STIEFEL),
    ))
}

/// Location-scale sampler sharing one Cholesky factor across draws.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mean: &[f64], sigma: &DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if sigma.ncols() != d || mean.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                d,
                sigma.ncols()
            )));
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite(format!("{d}x{d} covariance")))?;
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            factor: chol.l(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn with_mean(&self, mean: &[f64]) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {} for d = {}",
                mean.len(),
                self.dim()
            )));
        }
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            factor: self.factor.clone(),
        })
    }

    /// `n` rows; row `i` uses its own stream position, and with `nu` set is
    /// divided by `√(W/ν)`, `W ~ χ²(ν)` drawn after the normals of that row.
    fn draw(&self, n: usize, nu: Option<f64>, seed: u64, stream: u64) -> Result<Sample> {
        let d = self.dim();
        let chi = nu
            .map(|v| {
                ChiSquared::new(v)
                    .map_err(|e| Error::Config(format!("degrees of freedom {v}: {e}")))
            })
            .transpose()?;
        let mut z = DMatrix::<f64>::zeros(d, n);
        let mut scale = vec![1.0; n];
        for i in 0..n {
            let mut rng = stream_rng(seed, stream, i as u64);
            for j in 0..d {
                z[(j, i)] = StandardNormal.sample(&mut rng);
            }
            if let (Some(chi), Some(v)) = (&chi, nu) {
                let w: f64 = chi.sample(&mut rng);
                scale[i] = (w / v).sqrt().recip();
            }
        }
        let x = &self.factor * z;
        let data = Array2::from_shape_fn((n, d), |(i, j)| self.mean[j] + x[(j, i)] * scale[i]);
        Sample::new(data)
    }

    pub fn sample_normal(&self, n: usize, seed: u64, stream: u64) -> Result<Sample> {
        self.draw(n, None, seed, stream)
    }

    pub fn sample_t(&self, nu: f64, n: usize, seed: u64, stream: u64) -> Result<Sample> {
        if nu.is_nan() || nu <= 0.0 {
            return Err(Error::Config(format!(
                "degrees of freedom must be positive, got {nu}"
            )));
        }
        self.draw(n, Some(nu), seed, stream)
    }
}

/// `n` rows of `μ + A z`, `A` the lower Cholesky factor of `Σ`.
pub fn sample_mvn(mu: &[f64], sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<Sample> {
    GaussianSampler::new(mu, sigma)?.sample_normal(n, seed, STREAM_DATA)
}

/// `n` rows of `μ + Z/√(W/ν)` with `Z ~ N(0, Σ)` and `W ~ χ²(ν)` per row.
pub fn sample_mvt(
    nu: f64,
    mu: &[f64],
    sigma: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<Sample> {
    GaussianSampler::new(mu, sigma)?.sample_t(nu, n, seed, STREAM_DATA)
}

/// Shift vector with exactly `s` nonzero coordinates, chosen uniformly
/// without replacement, each U(u1, u2).
pub fn gen_alternative_shift(d: usize, shift: &ShiftSpec, seed: u64) -> Result<Vec<f64>> {
    if shift.s > d {
        return Err(Error::Config(format!(
            "cannot place {} nonzeros in dimension {d}",
            shift.s
        )));
    }
    if shift.u1.is_nan() || shift.u2.is_nan() || shift.u1 > shift.u2 {
        return Err(Error::Config(format!(
            "need u1 <= u2, got {} > {}",
            shift.u1, shift.u2
        )));
    }
    let mut rng = stream_rng(seed, STREAM_MODEL, IDX_SHIFT);
    let mut v = vec![0.0; d];
    let mut chosen = index::sample(&mut rng, d, shift.s).into_vec();
    chosen.sort_unstable();
    for j in chosen {
        v[j] = uniform(&mut rng, shift.u1, shift.u2);
    }
    Ok(v)
}

/// Scale matrix for Model 5.
#[derive(Debug, Clone)]
pub struct MarginalScale {
    pub matrix: DMatrix<f64>,
    /// Diagonal shift `|λ_min(Σ^L₁)| + 0.5` under the alternative.
    pub delta: Option<f64>,
}

/// `[1, 0ᵀ; 0, R*]` (null) or `[1, Vᵀ; V, R*] + δI` (alternative), where
/// `R*` is the correlation matrix of `sigma_star`.
pub fn marginal_scale(sigma_star: &DMatrix<f64>, v: &[f64], null: bool) -> Result<MarginalScale> {
    let d = sigma_star.nrows();
    if v.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "shift of length {} for d = {d}",
            v.len()
        )));
    }
    let corr = correlation_of(sigma_star);
    let mut m = DMatrix::<f64>::zeros(d + 1, d + 1);
    m[(0, 0)] = 1.0;
    m.view_mut((1, 1), (d, d)).copy_from(&corr);
    if null {
        return Ok(MarginalScale {
            matrix: m,
            delta: None,
        });
    }
    for (j, &vj) in v.iter().enumerate() {
        m[(0, j + 1)] = vj;
        m[(j + 1, 0)] = vj;
    }
    let eig = SymmetricEigen::try_new(m.clone(), 1e-12, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigen-decomposition did not converge".into()))?;
    let delta = eig.eigenvalues.min().abs() + 0.5;
    for i in 0..=d {
        m[(i, i)] += delta;
    }
    Ok(MarginalScale {
        matrix: m,
        delta: Some(delta),
    })
}

/// `n` rows of `(Z, Xᵀ)` from Model 5: t(ν) with the marginal scale matrix.
/// `sigma_star` is Model 1's covariance and `v` the shift (ignored under the null).
pub fn gen_model5(
    spec: &ModelSpec,
    sigma_star: &DMatrix<f64>,
    v: &[f64],
    n: usize,
    null: bool,
    seed: u64,
) -> Result<Sample> {
    spec.validate()?;
    let scale = marginal_scale(sigma_star, v, null)?;
    let mean = vec![0.0; spec.d + 1];
    GaussianSampler::new(&mean, &scale.matrix)?.sample_t(spec.nu, n, seed, STREAM_DATA)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_entries() {
        let s = build_covariance(&ModelSpec::new(Model::Banded, 6, 0)).unwrap();
        assert!((s[(0, 2)] - 0.16).abs() < 1e-15);
        assert_eq!(s[(3, 3)], 1.0);
    }

    #[test]
    fn block_entries() {
        let s = build_covariance(&ModelSpec::new(Model::BlockDiagonal, 12, 4)).unwrap();
        assert_eq!(s[(0, 1)], 0.5);
        assert_eq!(s[(0, 6)], 0.0);
        assert_eq!(s[(10, 11)], 0.5);
        assert_eq!(s[(9, 10)], 0.0);
        for i in 0..12 {
            assert!((1.0..2.0).contains(&s[(i, i)]));
        }
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn non_sparse_correlation_has_unit_diagonal() {
        let spec = ModelSpec::new(Model::NonSparse, 20, 8);
        let s = build_covariance(&spec).unwrap();
        let r = correlation_of(&s);
        for i in 0..20 {
            assert!((r[(i, i)] - 1.0).abs() < 1e-15);
        }
        assert!((&s - s.transpose()).abs().max() < 1e-14);
        assert!(SymmetricEigen::new(r).eigenvalues.min() > 0.0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = ModelSpec::new(Model::NonSparse, 4, 0);
        spec.stiefel_rank = Some(5);
        assert!(build_covariance(&spec).is_err());
        assert!(Model::from_id(9).is_err());
        assert!(sample_stiefel(3, 4, 0).is_err());
    }

    #[test]
    fn stiefel_is_orthonormal() {
        let u = sample_stiefel(9, 4, 2).unwrap();
        let gram = u.transpose() * &u;
        assert!((gram - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-10);
        let full = sample_stiefel(6, 6, 3).unwrap();
        assert!((full.determinant().abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn shift_vectors() {
        assert!(gen_alternative_shift(10, &ShiftSpec::none(), 1)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let c = gen_alternative_shift(
            7,
            &ShiftSpec {
                s: 7,
                u1: 0.3,
                u2: 0.3,
            },
            1,
        )
        .unwrap();
        assert!(c.iter().all(|&v| v == 0.3));
        for seed in 0..20 {
            let v = gen_alternative_shift(
                50,
                &ShiftSpec {
                    s: 5,
                    u1: 0.1,
                    u2: 2.0,
                },
                seed,
            )
            .unwrap();
            assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 5);
            assert!(v.iter().all(|&x| x == 0.0 || (0.1..=2.0).contains(&x)));
        }
        assert!(gen_alternative_shift(
            3,
            &ShiftSpec {
                s: 4,
                u1: 0.0,
                u2: 1.0
            },
            0
        )
        .is_err());
        assert!(gen_alternative_shift(
            3,
            &ShiftSpec {
                s: 1,
                u1: 2.0,
                u2: 1.0
            },
            0
        )
        .is_err());
    }

    #[test]
    fn samplers_are_deterministic() {
        let sigma = build_covariance(&ModelSpec::new(Model::BlockDiagonal, 7, 0)).unwrap();
        let a = sample_mvn(&[0.0; 7], &sigma, 1, 5).unwrap();
        assert_eq!(a, sample_mvn(&[0.0; 7], &sigma, 1, 5).unwrap());
        assert_ne!(a, sample_mvn(&[0.0; 7], &sigma, 1, 6).unwrap());
        let t = sample_mvt(5.0, &[0.0; 7], &sigma, 3, 5).unwrap();
        assert_eq!(t, sample_mvt(5.0, &[0.0; 7], &sigma, 3, 5).unwrap());
        // first rows share the Gaussian part, only the radial factor differs
        let ratio: Vec<f64> = (0..7)
            .map(|j| t.data()[[0, j]] / a.data()[[0, j]])
            .collect();
        assert!(ratio.iter().all(|r| (r - ratio[0]).abs() < 1e-10));
    }

    #[test]
    fn not_spd_is_reported() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sample_mvn(&[0.0, 0.0], &bad, 2, 0),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn marginal_scales() {
        let spec = ModelSpec::new(Model::Marginal, 10, 1);
        let sigma = build_covariance(&spec).unwrap();
        let null = marginal_scale(&sigma, &[0.0; 10], true).unwrap();
        assert_eq!(null.matrix[(0, 0)], 1.0);
        assert!(null.matrix.row(0).iter().skip(1).all(|&v| v == 0.0));
        assert!(null.delta.is_none());

        let zero_alt = marginal_scale(&sigma, &[0.0; 10], false).unwrap();
        let lmin0 = SymmetricEigen::new(null.matrix.clone()).eigenvalues.min();
        let delta = zero_alt.delta.unwrap();
        assert!((delta - (lmin0.abs() + 0.5)).abs() < 1e-10);
        assert!(
            (&zero_alt.matrix - (&null.matrix + DMatrix::identity(11, 11) * delta))
                .abs()
                .max()
                < 1e-14
        );

        for seed in 0..10 {
            let v = gen_alternative_shift(
                10,
                &ShiftSpec {
                    s: 3,
                    u1: 0.0,
                    u2: 1.5,
                },
                seed,
            )
            .unwrap();
            let alt = marginal_scale(&sigma, &v, false).unwrap();
            assert!(SymmetricEigen::new(alt.matrix.clone()).eigenvalues.min() >= 0.5 - 1e-9);
            assert_eq!(alt.matrix[(0, 1)], v[0]);
        }
        let x = gen_model5(&spec, &sigma, &[0.0; 10], 4, true, 3).unwrap();
        assert_eq!(x.d(), 11);
    }
}
