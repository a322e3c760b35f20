//! Gaussian multiplier bootstrap for U-statistic vectors.
//!
//! The bootstrap U-statistic for replicate `b` is
//! `û^b_s = C(n,m)⁻¹ Σ_S (Σ_{k∈S} ε^b_k)(Φ_s(S) − û_s)`. Exchanging the sums
//! gives the projection form `û^b_s = (m/n) Σ_k (Q_{k,s} − û_s) ε^b_k`, so a
//! whole ensemble is one `B × n` by `n × q` matrix product.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{dedup_exponents, sp_norm, sp_norm_multi_into, Exponent, SpNormConfig};
use crate::rng::stream_rng;
use crate::ustat::{one_sample_scale, two_sample_scale, StatVector, UStatSummary};

/// `B × n` matrix of i.i.d. N(0,1) multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierMatrix {
    pub values: Array2<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl MultiplierMatrix {
    pub fn replicates(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    /// Wraps an explicit matrix (tests and hand-built instances).
    pub fn from_values(values: Array2<f64>) -> Self {
        Self {
            values,
            seed: 0,
            stream_id: 0,
        }
    }
}

/// Draws `B` rows of `n` standard normals; row `b` depends only on
/// `(seed, stream_id, b)`.
pub fn gen_multipliers(
    n: usize,
    replicates: usize,
    seed: u64,
    stream_id: u64,
) -> Result<MultiplierMatrix> {
    if n == 0 || replicates == 0 {
        return Err(Error::Config(format!(
            "multiplier matrix needs n >= 1 and B >= 1, got n = {n}, B = {replicates}"
        )));
    }
    let mut values = Array2::<f64>::zeros((replicates, n));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(b, mut row)| {
            let mut rng = stream_rng(seed, stream_id, b as u64);
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
        });
    Ok(MultiplierMatrix {
        values,
        seed,
        stream_id,
    })
}

fn check_width(summary: &UStatSummary, mult: &MultiplierMatrix) -> Result<()> {
    if mult.n() != summary.n {
        return Err(Error::DimensionMismatch(format!(
            "multiplier width {} does not match sample size {}",
            mult.n(),
            summary.n
        )));
    }
    Ok(())
}

/// Bootstrap U-statistics `û^b` (rows) via the projection form.
pub fn bootstrap_centered_ustat(
    summary: &UStatSummary,
    mult: &MultiplierMatrix,
) -> Result<Array2<f64>> {
    check_width(summary, mult)?;
    let factor = summary.m as f64 / summary.n as f64;
    Ok(mult.values.dot(&summary.centered_projection()) * factor)
}

/// `(m/n)(Q − û)` with each column divided by `scale`: one multiplier row
/// times this matrix is a standardized bootstrap vector.
fn loading(summary: &UStatSummary, scale: &Array1<f64>) -> Array2<f64> {
    let factor = summary.m as f64 / summary.n as f64;
    let mut a = summary.centered_projection();
    for mut row in a.rows_mut() {
        row.zip_mut_with(scale, |v, s| *v = *v * factor / s);
    }
    a
}

/// The (s0,p)-norm of every row for one exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedStats {
    pub p: Exponent,
    pub values: Array1<f64>,
}

/// Standardized bootstrap statistics and their (s0,p)-norm reductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    /// `B × q`, rows `W^b` or `N^b`.
    pub stats: Array2<f64>,
    /// One entry per distinct exponent, ascending (∞ last).
    pub reduced: Vec<ReducedStats>,
    pub s0: usize,
}

impl BootstrapEnsemble {
    /// Reduces `stats` row-wise for each exponent in `ps` (deduplicated).
    pub fn new(stats: Array2<f64>, s0: usize, ps: &[Exponent]) -> Result<Self> {
        if s0 == 0 {
            return Err(Error::Config("s0 must be at least 1".into()));
        }
        if ps.is_empty() {
            return Err(Error::Config("exponent set is empty".into()));
        }
        if stats.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite bootstrap statistic".into()));
        }
        let ps = dedup_exponents(ps);
        let reduced = reduce_rows(stats.view(), s0, &ps)
            .into_iter()
            .zip(&ps)
            .map(|(values, &p)| ReducedStats { p, values })
            .collect();
        Ok(Self { stats, reduced, s0 })
    }

    pub fn replicates(&self) -> usize {
        self.stats.nrows()
    }

    pub fn exponents(&self) -> Vec<Exponent> {
        self.reduced.iter().map(|r| r.p).collect()
    }

    pub fn reduced_for(&self, p: Exponent) -> Option<ArrayView1<'_, f64>> {
        self.reduced
            .iter()
            .find(|r| r.p.total_cmp(&p).is_eq())
            .map(|r| r.values.view())
    }
}

/// Row-wise (s0,p)-norms for several exponents; result indexed `[p][b]`.
pub fn reduce_rows(stats: ArrayView2<'_, f64>, s0: usize, ps: &[Exponent]) -> Vec<Array1<f64>> {
    let rows: Vec<Vec<f64>> = stats
        .axis_iter(Axis(0))
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(buf, tmp), row| {
                let mut out = vec![0.0; ps.len()];
                let slice = match row.as_slice() {
                    Some(s) => s,
                    None => {
                        *tmp = row.to_vec();
                        tmp.as_slice()
                    }
                };
                sp_norm_multi_into(slice, s0, ps, buf, &mut out);
                out
            },
        )
        .collect();
    (0..ps.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect()
}

/// Precomputed loadings for drawing standardized bootstrap statistics:
/// `stats = E₁·A₁ − E₂·A₂` (second term only for two samples).
#[derive(Debug, Clone)]
pub struct Calibrator {
    first: Array2<f64>,
    second: Option<Array2<f64>>,
}

impl Calibrator {
    pub fn one_sample(summary: &UStatSummary, normalize: bool) -> Result<Self> {
        let scale = one_sample_scale(summary, normalize)?;
        Ok(Self {
            first: loading(summary, &scale),
            second: None,
        })
    }

    pub fn two_sample(s1: &UStatSummary, s2: &UStatSummary, normalize: bool) -> Result<Self> {
        let scale = two_sample_scale(s1, s2, normalize)?;
        Ok(Self {
            first: loading(s1, &scale),
            second: Some(loading(s2, &scale)),
        })
    }

    pub fn sample_sizes(&self) -> (usize, Option<usize>) {
        (self.first.nrows(), self.second.as_ref().map(Array2::nrows))
    }

    pub fn q(&self) -> usize {
        self.first.ncols()
    }

    /// Standardized statistics for explicit multipliers.
    pub fn apply(
        &self,
        e1: ArrayView2<'_, f64>,
        e2: Option<ArrayView2<'_, f64>>,
    ) -> Result<Array2<f64>> {
        if e1.ncols() != self.first.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "first multiplier width {} does not match sample size {}",
                e1.ncols(),
                self.first.nrows()
            )));
        }
        let mut stats = e1.dot(&self.first);
        match (&self.second, e2) {
            (None, None) => {}
            (Some(a2), Some(e2)) => {
                if e2.ncols() != a2.nrows() || e2.nrows() != e1.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "second multiplier matrix is {}x{}, expected {}x{}",
                        e2.nrows(),
                        e2.ncols(),
                        e1.nrows(),
                        a2.nrows()
                    )));
                }
                stats -= &e2.dot(a2);
            }
            (None, Some(_)) => {
                return Err(Error::Config(
                    "one-sample calibrator given two multiplier sets".into(),
                ))
            }
            (Some(_), None) => {
                return Err(Error::Config(
                    "two-sample calibrator needs two multiplier sets".into(),
                ))
            }
        }
        Ok(stats)
    }

    /// Draws `B` replicates from the streams `(seed, streams.0)` and, for two
    /// samples, `(seed, streams.1)`.
    pub fn draw(&self, replicates: usize, seed: u64, streams: (u64, u64)) -> Result<Array2<f64>> {
        let e1 = gen_multipliers(self.first.nrows(), replicates, seed, streams.0)?;
        match &self.second {
            None => self.apply(e1.values.view(), None),
            Some(a2) => {
                let e2 = gen_multipliers(a2.nrows(), replicates, seed, streams.1)?;
                self.apply(e1.values.view(), Some(e2.values.view()))
            }
        }
    }
}

/// Ensemble of `W^b` for one sample: `û^b_s/√(v̂_s/n)`, or `û^b_s` unnormalized.
pub fn bootstrap_stats_one(
    summary: &UStatSummary,
    mult: &MultiplierMatrix,
    normalize: bool,
    s0: usize,
    ps: &[Exponent],
) -> Result<BootstrapEnsemble> {
    check_width(summary, mult)?;
    let stats = Calibrator::one_sample(summary, normalize)?.apply(mult.values.view(), None)?;
    BootstrapEnsemble::new(stats, s0, ps)
}

/// Ensemble of `N^b = (û^b₁ − û^b₂)/√(v̂₁/n₁ + v̂₂/n₂)`, or the plain difference.
pub fn bootstrap_stats_two(
    sum1: &UStatSummary,
    sum2: &UStatSummary,
    mult1: &MultiplierMatrix,
    mult2: &MultiplierMatrix,
    normalize: bool,
    s0: usize,
    ps: &[Exponent],
) -> Result<BootstrapEnsemble> {
    check_width(sum1, mult1)?;
    check_width(sum2, mult2)?;
    let stats = Calibrator::two_sample(sum1, sum2, normalize)?
        .apply(mult1.values.view(), Some(mult2.values.view()))?;
    BootstrapEnsemble::new(stats, s0, ps)
}

/// `t̂ = inf{t : B⁻¹ #{b : boot_b ≤ t} > 1 − α}`: the `k`-th smallest value
/// with `k = ⌊B(1−α)⌋ + 1`, capped at `B`.
pub fn critical_value(boot: &[f64], alpha: f64) -> Result<f64> {
    if boot.is_empty() {
        return Err(Error::Config("empty bootstrap sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let b = boot.len();
    let target = b as f64 * (1.0 - alpha);
    // B(1−α) that is an integer up to rounding (e.g. 300 × 0.95) counts as one
    let nearest = target.round();
    let floor = if (target - nearest).abs() < 1e-9 {
        nearest
    } else {
        target.floor()
    };
    let k = (floor as usize + 1).min(b);
    let mut sorted = boot.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// `P̂ = #{b : boot_b > stat}/(B+1)`.
pub fn individual_pvalue(stat: f64, boot: &[f64]) -> f64 {
    let exceed = boot.iter().filter(|&&v| v > stat).count();
    exceed as f64 / (boot.len() + 1) as f64
}

/// Outcome of one (s0,p)-norm test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualResult {
    pub p: Exponent,
    pub s0: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    /// `statistic ≥ critical_value`.
    pub reject: bool,
    /// True when `p_value ≤ α` disagrees with `reject` (boundary ties only).
    pub routes_disagree: bool,
}

/// Runs the (s0,p)-norm test for every exponent carried by `ensemble`.
pub fn individual_tests(
    stat: &StatVector,
    ensemble: &BootstrapEnsemble,
    alpha: f64,
) -> Result<Vec<IndividualResult>> {
    if stat.values.len() != ensemble.stats.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "statistic has length {}, ensemble has {} columns",
            stat.values.len(),
            ensemble.stats.ncols()
        )));
    }
    let values = stat.values.to_vec();
    ensemble
        .reduced
        .iter()
        .map(|r| {
            let cfg = SpNormConfig::new(ensemble.s0, r.p)?;
            let statistic = sp_norm(&values, &cfg)?;
            let boot = r.values.as_slice().expect("contiguous");
            let critical_value = critical_value(boot, alpha)?;
            let p_value = individual_pvalue(statistic, boot);
            let reject = statistic >= critical_value;
            Ok(IndividualResult {
                p: r.p,
                s0: ensemble.s0,
                statistic,
                critical_value,
                p_value,
                reject,
                routes_disagree: reject != (p_value <= alpha),
            })
        })
        .collect()
}
