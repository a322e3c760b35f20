//! Two-sample Hotelling's T² baseline (low-dimensional only).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::ustat::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotellingReport {
    pub statistic: f64,
    /// `(n₁+n₂−d−1)/(d(n₁+n₂−2)) · T²`, F-distributed under Gaussian data.
    pub f_statistic: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

fn to_matrix(s: &Sample) -> DMatrix<f64> {
    let x = s.data();
    DMatrix::from_fn(s.n(), s.d(), |i, j| x[[i, j]])
}

fn scatter(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mean = x.row_sum().transpose() / n;
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    (mean, centered.transpose() * centered)
}

/// `n₁n₂/(n₁+n₂) · (X̄−Ȳ)ᵀ S⁻¹ (X̄−Ȳ)` with `S` the pooled covariance.
pub fn hotelling_t2(x: &Sample, y: &Sample) -> Result<f64> {
    let d = x.d();
    if y.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} and {} columns",
            d,
            y.d()
        )));
    }
    let (n1, n2) = (x.n(), y.n());
    if d + 2 >= n1 + n2 {
        return Err(Error::NotApplicable(format!(
            "Hotelling's T² requires d < n1 + n2 - 2 (d = {d}, n1 + n2 = {})",
            n1 + n2
        )));
    }
    let (mx, sx) = scatter(&to_matrix(x));
    let (my, sy) = scatter(&to_matrix(y));
    let pooled = (sx + sy) / (n1 + n2 - 2) as f64;
    let chol = pooled
        .cholesky()
        .ok_or_else(|| Error::NotApplicable("pooled covariance matrix is singular".into()))?;
    let diff = mx - my;
    let solved = chol.solve(&diff);
    let quad = diff.dot(&solved);
    Ok((n1 * n2) as f64 / (n1 + n2) as f64 * quad)
}

/// T² together with its classical F reference.
pub fn hotelling_test(x: &Sample, y: &Sample) -> Result<HotellingReport> {
    let statistic = hotelling_t2(x, y)?;
    let d = x.d();
    let total = x.n() + y.n();
    let df2 = total - d - 1;
    let f_statistic = df2 as f64 / (d * (total - 2)) as f64 * statistic;
    let dist =
        FisherSnedecor::new(d as f64, df2 as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(HotellingReport {
        statistic,
        f_statistic,
        df1: d,
        df2,
        p_value: dist.sf(f_statistic),
    })
}
