//! Data-adaptive combination of (s0,p)-norm tests.
//!
//! The combined statistic is the smallest individual bootstrap P-value over a
//! finite exponent set. Its own null distribution is estimated either by
//! reusing the outer ensemble through ranks (low-cost, default) or by a
//! nested bootstrap with `L` fresh inner replicates per outer replicate.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    individual_tests, reduce_rows, BootstrapEnsemble, Calibrator, IndividualResult,
};
use crate::error::{Error, Result};
use crate::norms::{dedup_exponents, Exponent};
use crate::rng::{inner_stream, STREAM_SAMPLE1, STREAM_SAMPLE2};
use crate::ustat::{
    compute_ustat, standardize_one_sample, standardize_two_sample, Kernel, Sample, Side, StatVector,
};

/// Upper bound on `B · L · (n₁ + n₂) · q` for the nested bootstrap.
pub const DOUBLE_LOOP_BUDGET: u128 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lowcost")]
    LowCost,
    #[serde(rename = "doubleloop")]
    DoubleLoop,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LowCost => "lowcost",
            Method::DoubleLoop => "doubleloop",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowcost" => Ok(Method::LowCost),
            "doubleloop" => Ok(Method::DoubleLoop),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected lowcost|doubleloop)"
            ))),
        }
    }
}

/// The exponent set used when none is given: `{1, 2, 3, 4, 5, ∞}`.
pub fn default_exponents() -> Vec<Exponent> {
    let mut ps: Vec<Exponent> = (1..=5).map(|p| Exponent::Finite(p as f64)).collect();
    ps.push(Exponent::Infinity);
    ps
}

/// `min(q, max(1, round(√q)))`.
pub fn default_s0(q: usize) -> usize {
    ((q as f64).sqrt().round() as usize).max(1).min(q.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub p_set: Vec<Exponent>,
    /// `None` selects [`default_s0`] for the vector length at hand.
    pub s0: Option<usize>,
    /// Outer bootstrap replicates `B`.
    pub replicates: usize,
    /// Inner replicates `L` (nested bootstrap only).
    pub inner_replicates: usize,
    pub alpha: f64,
    pub normalize: bool,
    pub method: Method,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            p_set: default_exponents(),
            s0: None,
            replicates: 300,
            inner_replicates: 300,
            alpha: 0.05,
            normalize: true,
            method: Method::LowCost,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_set.is_empty() {
            return Err(Error::Config("exponent set is empty".into()));
        }
        if self.replicates < 2 {
            return Err(Error::Config(format!(
                "need B >= 2 bootstrap replicates, got {}",
                self.replicates
            )));
        }
        if self.method == Method::DoubleLoop && self.inner_replicates == 0 {
            return Err(Error::Config("nested bootstrap needs L >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.s0 == Some(0) {
            return Err(Error::Config("s0 must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_s0(&self, q: usize) -> usize {
        self.s0.unwrap_or_else(|| default_s0(q))
    }
}

/// The hypothesis being tested.
#[derive(Debug, Clone)]
pub enum Problem {
    /// `u₁ = u₀`.
    OneSample { x: Sample, u0: Vec<f64> },
    /// `u₁ = u₂`.
    TwoSample { x: Sample, y: Sample },
}

impl Problem {
    pub fn side(&self) -> Side {
        match self {
            Problem::OneSample { .. } => Side::OneSample,
            Problem::TwoSample { .. } => Side::TwoSample,
        }
    }
}

/// Result of the combined test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveReport {
    pub side: Side,
    pub method: Method,
    pub s0: usize,
    pub alpha: f64,
    pub replicates: usize,
    pub inner_replicates: Option<usize>,
    pub normalized: bool,
    /// Coordinate statistics `W_s` or `N_s`.
    pub coordinate_statistics: Vec<f64>,
    pub individual: Vec<IndividualResult>,
    /// Minimum individual P-value (`W_ad` / `N_ad`).
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Bootstrap sample of the combined statistic.
    #[serde(skip)]
    pub boot_ad: Vec<f64>,
}

/// Minimum over the per-exponent P-values.
pub fn adaptive_statistic(per_p: &[(Exponent, f64)]) -> Result<f64> {
    per_p
        .iter()
        .map(|&(_, v)| v)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::Config("exponent set is empty".into()))
}

/// Rank-reuse bootstrap sample of the combined statistic.
///
/// For every replicate `b` and exponent `p`, the share of the other replicates
/// whose reduced statistic strictly exceeds replicate `b`'s, divided by `B`;
/// then the minimum over `p`. One sort per exponent, so `O(#P · B log B)`.
pub fn lowcost_bootstrap_adaptive(
    ensemble: &BootstrapEnsemble,
    p_set: &[Exponent],
) -> Result<Vec<f64>> {
    let b = ensemble.replicates();
    if b < 2 {
        return Err(Error::Config(format!("need B >= 2 replicates, got {b}")));
    }
    let ps = dedup_exponents(p_set);
    if ps.is_empty() {
        return Err(Error::Config("exponent set is empty".into()));
    }
    let mut out = vec![f64::INFINITY; b];
    let mut sorted = Vec::with_capacity(b);
    for p in ps {
        let values = ensemble
            .reduced_for(p)
            .ok_or_else(|| Error::Config(format!("ensemble has no reduction for p = {p}")))?;
        sorted.clear();
        sorted.extend(values.iter().copied());
        sorted.sort_unstable_by(f64::total_cmp);
        for (o, &v) in out.iter_mut().zip(values.iter()) {
            // replicate b never exceeds itself, so "others" needs no correction
            let exceed = b - sorted.partition_point(|&x| x <= v);
            *o = o.min(exceed as f64 / b as f64);
        }
    }
    Ok(out)
}

/// `(#{b : boot_ad_b ≤ stat_ad} + 1)/(B + 1)`; small combined statistics are extreme.
pub fn adaptive_pvalue(stat_ad: f64, boot_ad: &[f64]) -> f64 {
    let count = boot_ad.iter().filter(|&&v| v <= stat_ad).count();
    (count + 1) as f64 / (boot_ad.len() + 1) as f64
}

/// Nested bootstrap sample of the combined statistic.
///
/// Outer replicate `b` gets `L` inner replicates drawn from streams tied to
/// `(seed, b)`; its combined statistic is
/// `min_p #{ℓ : inner_{ℓ,p} > outer_{b,p}}/(L+1)`.
pub fn double_loop_bootstrap(
    calibrator: &Calibrator,
    outer: &BootstrapEnsemble,
    p_set: &[Exponent],
    inner_replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if inner_replicates == 0 {
        return Err(Error::Config("nested bootstrap needs L >= 1".into()));
    }
    let b_total = outer.replicates();
    let (n1, n2) = calibrator.sample_sizes();
    let cost = b_total as u128
        * inner_replicates as u128
        * (n1 + n2.unwrap_or(0)) as u128
        * calibrator.q() as u128;
    if cost > DOUBLE_LOOP_BUDGET {
        return Err(Error::Budget {
            requested: cost,
            limit: DOUBLE_LOOP_BUDGET,
        });
    }
    let ps = dedup_exponents(p_set);
    let outer_reduced: Vec<_> = ps
        .iter()
        .map(|&p| {
            outer
                .reduced_for(p)
                .ok_or_else(|| Error::Config(format!("ensemble has no reduction for p = {p}")))
        })
        .collect::<Result<_>>()?;
    let denom = (inner_replicates + 1) as f64;
    (0..b_total)
        .into_par_iter()
        .map(|b| {
            let streams = (
                inner_stream(STREAM_SAMPLE1, b),
                inner_stream(STREAM_SAMPLE2, b),
            );
            let inner = calibrator.draw(inner_replicates, seed, streams)?;
            let reduced = reduce_rows(inner.view(), outer.s0, &ps);
            Ok(reduced
                .iter()
                .zip(&outer_reduced)
                .map(|(inner_p, outer_p)| {
                    let level = outer_p[b];
                    inner_p.iter().filter(|&&v| v > level).count() as f64 / denom
                })
                .fold(f64::INFINITY, f64::min))
        })
        .collect()
}

/// Coordinate statistics plus a calibrator, ready to be bootstrapped.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    pub stat: StatVector,
    pub calibrator: Calibrator,
}

impl PreparedTest {
    pub fn new(problem: &Problem, kernel: &Kernel, normalize: bool) -> Result<Self> {
        match problem {
            Problem::OneSample { x, u0 } => {
                let s = compute_ustat(x, kernel)?;
                Ok(Self {
                    stat: standardize_one_sample(&s, u0, normalize)?,
                    calibrator: Calibrator::one_sample(&s, normalize)?,
                })
            }
            Problem::TwoSample { x, y } => {
                if x.d() != y.d() {
                    return Err(Error::DimensionMismatch(format!(
                        "samples have {} and {} columns",
                        x.d(),
                        y.d()
                    )));
                }
                let s1 = compute_ustat(x, kernel)?;
                let s2 = compute_ustat(y, kernel)?;
                Ok(Self {
                    stat: standardize_two_sample(&s1, &s2, normalize)?,
                    calibrator: Calibrator::two_sample(&s1, &s2, normalize)?,
                })
            }
        }
    }

    pub fn q(&self) -> usize {
        self.stat.values.len()
    }

    /// Outer bootstrap statistics (`B × q`).
    pub fn outer_stats(&self, replicates: usize, seed: u64) -> Result<Array2<f64>> {
        self.calibrator
            .draw(replicates, seed, (STREAM_SAMPLE1, STREAM_SAMPLE2))
    }

    /// Individual and combined tests for one `s0`, from precomputed outer
    /// statistics. The same `seed` must be passed as for [`Self::outer_stats`].
    pub fn evaluate(
        &self,
        outer: Array2<f64>,
        s0: usize,
        cfg: &AdaptiveConfig,
        seed: u64,
    ) -> Result<AdaptiveReport> {
        cfg.validate()?;
        let ps = dedup_exponents(&cfg.p_set);
        let ensemble = BootstrapEnsemble::new(outer, s0, &ps)?;
        let individual = individual_tests(&self.stat, &ensemble, cfg.alpha)?;
        let per_p: Vec<(Exponent, f64)> = individual.iter().map(|r| (r.p, r.p_value)).collect();
        let statistic = adaptive_statistic(&per_p)?;
        let boot_ad = match cfg.method {
            Method::LowCost => lowcost_bootstrap_adaptive(&ensemble, &ps)?,
            Method::DoubleLoop => {
                double_loop_bootstrap(&self.calibrator, &ensemble, &ps, cfg.inner_replicates, seed)?
            }
        };
        let p_value = adaptive_pvalue(statistic, &boot_ad);
        Ok(AdaptiveReport {
            side: self.stat.side,
            method: cfg.method,
            s0,
            alpha: cfg.alpha,
            replicates: ensemble.replicates(),
            inner_replicates: (cfg.method == Method::DoubleLoop).then_some(cfg.inner_replicates),
            normalized: self.stat.normalized,
            coordinate_statistics: self.stat.values.to_vec(),
            individual,
            statistic,
            p_value,
            reject: p_value <= cfg.alpha,
            boot_ad,
        })
    }
}

/// Full pipeline: U-statistics, coordinate statistics, outer ensemble,
/// individual P-values, combined statistic, its bootstrap, decision.
pub fn run_adaptive_test(
    problem: &Problem,
    kernel: &Kernel,
    cfg: &AdaptiveConfig,
    seed: u64,
) -> Result<AdaptiveReport> {
    cfg.validate()?;
    let prepared = PreparedTest::new(problem, kernel, cfg.normalize)?;
    let s0 = cfg.resolved_s0(prepared.q());
    let outer = prepared.outer_stats(cfg.replicates, seed)?;
    prepared.evaluate(outer, s0, cfg, seed)
}

/// Nested-bootstrap variant of [`run_adaptive_test`].
pub fn double_loop_adaptive(
    problem: &Problem,
    kernel: &Kernel,
    cfg: &AdaptiveConfig,
    seed: u64,
) -> Result<AdaptiveReport> {
    let cfg = AdaptiveConfig {
        method: Method::DoubleLoop,
        ..cfg.clone()
    };
    run_adaptive_test(problem, kernel, &cfg, seed)
}
