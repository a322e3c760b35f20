//! U-statistic vectors, their Hoeffding projections and jackknife variances,
//! and the studentized one- and two-sample statistics built from them.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this, `v̂/n` (or the two-sample sum) is treated as degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// `n × d` observation matrix with finite entries; rows are subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Array2<f64>,
}

impl Sample {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "sample must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {v} at row {i}, column {j}"
            )));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data =
            Array2::from_shape_vec((n, d), flat).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(data)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Applies `f` to every entry, keeping the shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.data.mapv(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Mean,
    Covariance,
    KendallTau,
    Custom,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Mean => "mean",
            KernelFamily::Covariance => "cov",
            KernelFamily::KendallTau => "tau",
            KernelFamily::Custom => "custom",
        })
    }
}

/// Which entries of a `d × d` matrix parameter form the tested vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSet {
    /// `(j, l)` with `j ≤ l`, row-major; `q = d(d+1)/2`.
    UpperWithDiagonal,
    /// `(j, l)` with `j < l`, row-major; `q = d(d−1)/2`.
    OffDiagonal,
    /// `(0, l)` for `l = 1..d`: first coordinate against every other one.
    FirstVersusRest,
}

impl PairSet {
    pub fn pairs(self, d: usize) -> Vec<(usize, usize)> {
        match self {
            PairSet::UpperWithDiagonal => {
                (0..d).flat_map(|j| (j..d).map(move |l| (j, l))).collect()
            }
            PairSet::OffDiagonal => (0..d)
                .flat_map(|j| (j + 1..d).map(move |l| (j, l)))
                .collect(),
            PairSet::FirstVersusRest => (1..d).map(|l| (0, l)).collect(),
        }
    }
}

/// Evaluator for a custom kernel: receives the `m` observation rows and
/// writes the `q` outputs. Must be symmetric in its arguments.
pub type CustomKernelFn = Arc<dyn Fn(&[ArrayView1<'_, f64>], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum KernelMap {
    Coords(Vec<usize>),
    Pairs(Vec<(usize, usize)>),
    Custom { q: usize, f: CustomKernelFn },
}

/// A symmetric kernel of order `m` mapping `m` observations to a `q`-vector.
///
/// Built-in families:
///
/// * mean (`m = 1`): `Φ_s(x) = x_j`
/// * covariance (`m = 2`): `Φ_s(x, y) = (x_j − y_j)(x_l − y_l)/2`, unbiased for `σ_jl`
/// * Kendall's tau (`m = 2`): `Φ_s(x, y) = sign((x_j − y_j)(x_l − y_l))`
///
/// Custom kernels are taken as given; they are not symmetrized.
#[derive(Clone)]
pub struct Kernel {
    family: KernelFamily,
    order: usize,
    map: KernelMap,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("family", &self.family)
            .field("order", &self.order)
            .field("q", &self.output_dim())
            .finish()
    }
}

impl Kernel {
    /// Mean kernel over all `d` coordinates.
    pub fn mean(d: usize) -> Self {
        Self::mean_coords((0..d).collect())
    }

    pub fn mean_coords(coords: Vec<usize>) -> Self {
        Self {
            family: KernelFamily::Mean,
            order: 1,
            map: KernelMap::Coords(coords),
        }
    }

    pub fn covariance(pairs: Vec<(usize, usize)>) -> Self {
        Self {
            family: KernelFamily::Covariance,
            order: 2,
            map: KernelMap::Pairs(pairs),
        }
    }

    pub fn kendall_tau(pairs: Vec<(usize, usize)>) -> Self {
        Self {
            family: KernelFamily::KendallTau,
            order: 2,
            map: KernelMap::Pairs(pairs),
        }
    }

    /// Builds a built-in family over `d` variables. Pair-based families use
    /// `pairs`; the mean family ignores it.
    pub fn builtin(family: KernelFamily, d: usize, pairs: PairSet) -> Result<Self> {
        match family {
            KernelFamily::Mean => Ok(Self::mean(d)),
            KernelFamily::Covariance => Ok(Self::covariance(pairs.pairs(d))),
            KernelFamily::KendallTau => Ok(Self::kendall_tau(pairs.pairs(d))),
            KernelFamily::Custom => Err(Error::Config(
                "custom kernels need an evaluator; use Kernel::custom".into(),
            )),
        }
    }

    pub fn custom(order: usize, q: usize, f: CustomKernelFn) -> Result<Self> {
        if order == 0 || q == 0 {
            return Err(Error::Config(
                "custom kernel needs order >= 1 and q >= 1".into(),
            ));
        }
        if order > 3 {
            log::warn!(
                "custom kernel of order {order}: U-statistic enumeration costs O(n^{order})"
            );
        }
        Ok(Self {
            family: KernelFamily::Custom,
            order,
            map: KernelMap::Custom { q, f },
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn output_dim(&self) -> usize {
        match &self.map {
            KernelMap::Coords(c) => c.len(),
            KernelMap::Pairs(p) => p.len(),
            KernelMap::Custom { q, .. } => *q,
        }
    }

    /// Coordinate pairs behind each output, for pair-based families.
    pub fn pairs(&self) -> Option<&[(usize, usize)]> {
        match &self.map {
            KernelMap::Pairs(p) => Some(p),
            _ => None,
        }
    }

    pub fn coords(&self) -> Option<&[usize]> {
        match &self.map {
            KernelMap::Coords(c) => Some(c),
            _ => None,
        }
    }

    /// Checks that every index fits a sample of width `d`.
    pub fn check_width(&self, d: usize) -> Result<()> {
        if self.output_dim() == 0 {
            return Err(Error::Config("kernel has an empty index map".into()));
        }
        let max = match &self.map {
            KernelMap::Coords(c) => c.iter().copied().max(),
            KernelMap::Pairs(p) => p.iter().map(|&(j, l)| j.max(l)).max(),
            KernelMap::Custom { .. } => None,
        };
        match max {
            Some(m) if m >= d => Err(Error::Config(format!(
                "kernel references coordinate {m} but observations have {d} columns"
            ))),
            _ => Ok(()),
        }
    }

    fn eval_into(&self, obs: &[ArrayView1<'_, f64>], out: &mut [f64]) {
        match &self.map {
            KernelMap::Coords(c) => {
                for (o, &j) in out.iter_mut().zip(c) {
                    *o = obs[0][j];
                }
            }
            KernelMap::Pairs(p) => {
                let (x, y) = (&obs[0], &obs[1]);
                for (o, &(j, l)) in out.iter_mut().zip(p) {
                    let (a, b) = (x[j] - y[j], x[l] - y[l]);
                    *o = match self.family {
                        KernelFamily::Covariance => 0.5 * a * b,
                        _ => sign(a) * sign(b),
                    };
                }
            }
            KernelMap::Custom { f, .. } => f(obs, out),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Evaluates the kernel at one `m`-tuple of observation rows.
pub fn eval_kernel(kernel: &Kernel, obs: &[ArrayView1<'_, f64>]) -> Result<Vec<f64>> {
    if obs.len() != kernel.order {
        return Err(Error::Config(format!(
            "kernel of order {} given {} observations",
            kernel.order,
            obs.len()
        )));
    }
    let d = obs[0].len();
    if obs.iter().any(|o| o.len() != d) {
        return Err(Error::DimensionMismatch("observation widths differ".into()));
    }
    kernel.check_width(d)?;
    let mut out = vec![0.0; kernel.output_dim()];
    kernel.eval_into(obs, &mut out);
    Ok(out)
}

/// Per-sample U-statistic summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UStatSummary {
    /// `û_s`, the U-statistic for each output coordinate.
    pub uhat: Array1<f64>,
    /// `Q_{k,s}`: average kernel value over the subsets containing observation `k`.
    pub q_proj: Array2<f64>,
    /// `v̂_s`, jackknife estimate of the variance of `√n · û_s`.
    pub vhat: Array1<f64>,
    pub n: usize,
    pub m: usize,
}

impl UStatSummary {
    pub fn q(&self) -> usize {
        self.uhat.len()
    }

    /// `Q − û`, row-broadcast.
    pub fn centered_projection(&self) -> Array2<f64> {
        &self.q_proj - &self.uhat.view().insert_axis(Axis(0))
    }
}

/// Computes `û`, `Q` and `v̂` for one sample.
///
/// `û` is the average of `Φ` over all `C(n, m)` subsets, `Q_k` the average
/// over the `C(n−1, m−1)` subsets containing `k`, and
/// `v̂_s = m² n⁻¹ Σ_k (Q_{k,s} − û_s)²` (for `m = 1` this is the plain
/// variance with divisor `n`). Built-in kernels cost `O(n^m q)`; the
/// pair kernels compute each row of `Q` independently so the result does
/// not depend on the thread count.
pub fn compute_ustat(sample: &Sample, kernel: &Kernel) -> Result<UStatSummary> {
    let n = sample.n();
    let m = kernel.order;
    kernel.check_width(sample.d())?;
    if n < m {
        return Err(Error::InsufficientSample {
            order: m,
            needed: m,
            got: n,
        });
    }
    let (uhat, q_proj) = match &kernel.map {
        KernelMap::Coords(c) => {
            let q_proj = sample.data.select(Axis(1), c);
            (column_means(&q_proj), q_proj)
        }
        KernelMap::Pairs(_) => {
            let q_proj = pair_projection(sample.data.view(), kernel);
            (column_means(&q_proj), q_proj)
        }
        KernelMap::Custom { .. } => subset_enumeration(sample.data.view(), kernel),
    };
    let mf = m as f64;
    let mut vhat = Array1::zeros(uhat.len());
    for row in q_proj.rows() {
        for ((v, &qv), &u) in vhat.iter_mut().zip(row).zip(&uhat) {
            let dev = qv - u;
            *v += dev * dev;
        }
    }
    vhat.mapv_inplace(|v: f64| mf * mf * v / n as f64);
    Ok(UStatSummary {
        uhat,
        q_proj,
        vhat,
        n,
        m,
    })
}

fn column_means(a: &Array2<f64>) -> Array1<f64> {
    let n = a.nrows() as f64;
    let mut acc = Array1::zeros(a.ncols());
    for row in a.rows() {
        acc += &row;
    }
    acc / n
}

fn pair_projection(x: ArrayView2<'_, f64>, kernel: &Kernel) -> Array2<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let q = kernel.output_dim();
    let pairs = kernel.pairs().expect("pair kernel");
    let kendall = kernel.family == KernelFamily::KendallTau;
    let scale = if kendall {
        1.0 / (n - 1) as f64
    } else {
        0.5 / (n - 1) as f64
    };
    let mut q_proj = Array2::<f64>::zeros((n, q));
    q_proj
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each_init(
            || vec![0.0; d],
            |diff, (i, mut out)| {
                let xi = x.row(i);
                for k in (0..n).filter(|&k| k != i) {
                    let xk = x.row(k);
                    for ((dv, a), b) in diff.iter_mut().zip(xi).zip(xk) {
                        let t = a - b;
                        *dv = if kendall { sign(t) } else { t };
                    }
                    for (o, &(j, l)) in out.iter_mut().zip(pairs) {
                        *o += diff[j] * diff[l];
                    }
                }
                out.mapv_inplace(|v| v * scale);
            },
        );
    q_proj
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Generic path: walks every `m`-subset once in lexicographic order.
fn subset_enumeration(x: ArrayView2<'_, f64>, kernel: &Kernel) -> (Array1<f64>, Array2<f64>) {
    let n = x.nrows();
    let m = kernel.order;
    let q = kernel.output_dim();
    let mut total = Array1::<f64>::zeros(q);
    let mut member = Array2::<f64>::zeros((n, q));
    let mut idx: Vec<usize> = (0..m).collect();
    let mut buf = vec![0.0; q];
    loop {
        let rows: Vec<ArrayView1<'_, f64>> = idx.iter().map(|&k| x.row(k)).collect();
        kernel.eval_into(&rows, &mut buf);
        for (t, v) in total.iter_mut().zip(&buf) {
            *t += v;
        }
        for &k in &idx {
            for (t, v) in member.row_mut(k).iter_mut().zip(&buf) {
                *t += v;
            }
        }
        // next combination
        let mut i = m;
        while i > 0 && idx[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
    total /= binomial(n, m);
    member /= binomial(n - 1, m - 1);
    (total, member)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    OneSample,
    TwoSample,
}

/// Coordinate-wise statistics `W_s` (one-sample) or `N_s` (two-sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub values: Array1<f64>,
    pub normalized: bool,
    pub side: Side,
}

fn check_floor(var: &Array1<f64>) -> Result<()> {
    let bad: Vec<usize> = var
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_nan() || **v <= VARIANCE_FLOOR)
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::DegenerateVariance {
            coords: bad,
            floor: VARIANCE_FLOOR,
        })
    }
}

/// Per-coordinate denominators `√(v̂_s/n)`; all ones when unnormalized.
pub fn one_sample_scale(summary: &UStatSummary, normalize: bool) -> Result<Array1<f64>> {
    if !normalize {
        return Ok(Array1::ones(summary.q()));
    }
    let var = summary.vhat.mapv(|v| v / summary.n as f64);
    check_floor(&var)?;
    Ok(var.mapv(f64::sqrt))
}

/// Per-coordinate denominators `√(v̂_{1,s}/n₁ + v̂_{2,s}/n₂)`; all ones when unnormalized.
pub fn two_sample_scale(
    s1: &UStatSummary,
    s2: &UStatSummary,
    normalize: bool,
) -> Result<Array1<f64>> {
    if s1.q() != s2.q() {
        return Err(Error::Config(format!(
            "samples produce vectors of different length ({} vs {})",
            s1.q(),
            s2.q()
        )));
    }
    if !normalize {
        return Ok(Array1::ones(s1.q()));
    }
    let var = s1.vhat.mapv(|v| v / s1.n as f64) + s2.vhat.mapv(|v| v / s2.n as f64);
    check_floor(&var)?;
    Ok(var.mapv(f64::sqrt))
}

/// `W_s = (û_s − u0_s)/√(v̂_s/n)`, or `û_s − u0_s` when `normalize` is off.
pub fn standardize_one_sample(
    summary: &UStatSummary,
    u0: &[f64],
    normalize: bool,
) -> Result<StatVector> {
    if u0.len() != summary.q() {
        return Err(Error::DimensionMismatch(format!(
            "null vector has length {}, statistic has {}",
            u0.len(),
            summary.q()
        )));
    }
    let scale = one_sample_scale(summary, normalize)?;
    let values = (&summary.uhat - &ArrayView1::from(u0)) / &scale;
    Ok(StatVector {
        values,
        normalized: normalize,
        side: Side::OneSample,
    })
}

/// `N_s = (û_{1,s} − û_{2,s})/√(v̂_{1,s}/n₁ + v̂_{2,s}/n₂)`, or the plain difference.
pub fn standardize_two_sample(
    s1: &UStatSummary,
    s2: &UStatSummary,
    normalize: bool,
) -> Result<StatVector> {
    let scale = two_sample_scale(s1, s2, normalize)?;
    let values = (&s1.uhat - &s2.uhat) / &scale;
    Ok(StatVector {
        values,
        normalized: normalize,
        side: Side::TwoSample,
    })
}
