//! Monte Carlo size/power studies.
//!
//! Each replication draws fresh data from seed `seed ⊕ r`, builds one outer
//! bootstrap ensemble and evaluates every requested `s0` (and every `p`)
//! from it. Outcomes are tallied by replication index, so the result does
//! not depend on scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptiveConfig, Method, PreparedTest, Problem};
use crate::error::{Error, Result};
use crate::norms::{dedup_exponents, Exponent};
use crate::rng::{replicate_seed, STREAM_DATA};
use crate::simgen::{
    build_covariance, gen_alternative_shift, gen_model5, GaussianSampler, Model, ModelSpec,
    ShiftSpec,
};
use crate::ustat::{Kernel, KernelFamily, PairSet};

/// Limit on `R · B · L · (n₁+n₂) · q` for nested-bootstrap studies.
pub const STUDY_BUDGET: u128 = 100_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelSpec,
    pub n1: usize,
    /// Ignored for Model 5, which is a one-sample problem.
    pub n2: usize,
    pub replications: usize,
    /// `s = 0` gives the null hypothesis.
    pub shift: ShiftSpec,
    /// Mean for Models 1–4; covariance or Kendall's tau for Model 5.
    pub kernel: KernelFamily,
    pub s0_list: Vec<usize>,
    pub test: AdaptiveConfig,
    pub seed: u64,
}

impl StudyConfig {
    /// Two-sample mean study on Models 1–4 with the standard test settings
    /// (`B = 300`, `α = 0.05`, `P = {1,…,5,∞}`).
    pub fn mean_study(
        model: Model,
        d: usize,
        n: usize,
        s0: usize,
        replications: usize,
        seed: u64,
    ) -> Self {
        Self {
            model: ModelSpec::new(model, d, seed),
            n1: n,
            n2: n,
            replications,
            shift: ShiftSpec::none(),
            kernel: KernelFamily::Mean,
            s0_list: vec![s0],
            test: AdaptiveConfig {
                s0: Some(s0),
                ..AdaptiveConfig::default()
            },
            seed,
        }
    }

    pub fn is_null(&self) -> bool {
        self.shift.s == 0
    }

    fn q(&self) -> usize {
        self.model.d
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.test.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.s0_list.is_empty() || self.s0_list.contains(&0) {
            return Err(Error::Config(
                "s0 list must be non-empty with entries >= 1".into(),
            ));
        }
        match (self.model.model, self.kernel) {
            (Model::Marginal, KernelFamily::Covariance | KernelFamily::KendallTau) => {}
            (Model::Marginal, k) => {
                return Err(Error::Config(format!(
                    "model 5 tests covariances; kernel {k} is not supported"
                )))
            }
            (_, KernelFamily::Mean) => {}
            (m, k) => {
                return Err(Error::Config(format!(
                    "model {} is a mean study; kernel {k} is not supported",
                    m.id()
                )))
            }
        }
        let n_total = if self.model.model == Model::Marginal {
            self.n1
        } else {
            self.n1 + self.n2
        };
        if self.n1 < 2 || (self.model.model != Model::Marginal && self.n2 < 2) {
            return Err(Error::Config(
                "each sample needs at least 2 observations".into(),
            ));
        }
        if self.test.method == Method::DoubleLoop {
            let cost = self.replications as u128
                * self.test.replicates as u128
                * self.test.inner_replicates as u128
                * n_total as u128
                * self.q() as u128;
            if cost > STUDY_BUDGET {
                return Err(Error::Budget {
                    requested: cost,
                    limit: STUDY_BUDGET,
                });
            }
        }
        Ok(())
    }
}

/// Empirical rejection rate with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub rejections: usize,
    pub rate: f64,
    pub std_error: f64,
}

impl RateCell {
    fn new(rejections: usize, total: usize) -> Self {
        let rate = rejections as f64 / total as f64;
        Self {
            rejections,
            rate,
            std_error: (rate * (1.0 - rate) / total as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRate {
    pub p: Exponent,
    #[serde(flatten)]
    pub cell: RateCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub s0: usize,
    pub per_p: Vec<PRate>,
    pub adaptive: RateCell,
}

impl StudyRow {
    pub fn rate(&self, p: Exponent) -> Option<f64> {
        self.per_p
            .iter()
            .find(|c| c.p.total_cmp(&p).is_eq())
            .map(|c| c.cell.rate)
    }
}

/// Choices the study makes where the protocol leaves room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    /// One outer ensemble per replication serves every `(s0, p)` cell.
    pub shared_ensemble: bool,
    /// Model-level covariance is drawn once per study from the model seed.
    pub covariance_fixed_per_study: bool,
    /// The shift vector is re-drawn in every replication.
    pub shift_redrawn_per_replication: bool,
    pub stiefel_rank: Option<usize>,
    pub pair_set: Option<PairSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub metadata: StudyMetadata,
    pub rows: Vec<StudyRow>,
    /// Wall-clock time, filled in by callers that measure it.
    pub runtime_ms: Option<u64>,
}

/// Rejections of one replication: per s0, per p, plus the combined test.
struct Outcome {
    per_s0: Vec<(Vec<bool>, bool)>,
}

fn replicate(cfg: &StudyConfig, ctx: &Context, r: usize) -> Result<Outcome> {
    let seed = replicate_seed(cfg.seed, r as u64);
    let d = cfg.model.d;
    let v = if cfg.is_null() {
        vec![0.0; d]
    } else {
        gen_alternative_shift(d, &cfg.shift, seed)?
    };
    let problem = match &ctx.sampler {
        Some(sampler) => {
            let heavy = cfg.model.model.heavy_tailed().then_some(cfg.model.nu);
            let draw = |s: &GaussianSampler, n: usize, stream: u64| match heavy {
                Some(nu) => s.sample_t(nu, n, seed, stream),
                None => s.sample_normal(n, seed, stream),
            };
            let x = draw(sampler, cfg.n1, STREAM_DATA)?;
            let y = draw(&sampler.with_mean(&v)?, cfg.n2, STREAM_DATA + 1)?;
            Problem::TwoSample { x, y }
        }
        None => {
            let x = gen_model5(&cfg.model, &ctx.sigma, &v, cfg.n1, cfg.is_null(), seed)?;
            Problem::OneSample {
                x,
                u0: vec![0.0; d],
            }
        }
    };
    let prepared = PreparedTest::new(&problem, &ctx.kernel, cfg.test.normalize)?;
    let outer = prepared.outer_stats(cfg.test.replicates, seed)?;
    let per_s0 = cfg
        .s0_list
        .iter()
        .map(|&s0| {
            let report = prepared.evaluate(outer.clone(), s0, &cfg.test, seed)?;
            Ok((
                report.individual.iter().map(|c| c.reject).collect(),
                report.reject,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(Outcome { per_s0 })
}

struct Context {
    sigma: nalgebra::DMatrix<f64>,
    sampler: Option<GaussianSampler>,
    kernel: Kernel,
}

/// Runs the study on the current rayon pool.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let d = cfg.model.d;
    let sigma = build_covariance(&cfg.model)?;
    let (sampler, kernel, pair_set) = if cfg.model.model == Model::Marginal {
        let pairs = PairSet::FirstVersusRest;
        (
            None,
            Kernel::builtin(cfg.kernel, d + 1, pairs)?,
            Some(pairs),
        )
    } else {
        (
            Some(GaussianSampler::new(&vec![0.0; d], &sigma)?),
            Kernel::mean(d),
            None,
        )
    };
    let ctx = Context {
        sigma,
        sampler,
        kernel,
    };
    let outcomes: Vec<Outcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, &ctx, r))
        .collect::<Result<_>>()?;

    let ps = dedup_exponents(&cfg.test.p_set);
    let total = cfg.replications;
    let rows = cfg
        .s0_list
        .iter()
        .enumerate()
        .map(|(i, &s0)| {
            let per_p = ps
                .iter()
                .enumerate()
                .map(|(j, &p)| PRate {
                    p,
                    cell: RateCell::new(
                        outcomes.iter().filter(|o| o.per_s0[i].0[j]).count(),
                        total,
                    ),
                })
                .collect();
            let adaptive = RateCell::new(outcomes.iter().filter(|o| o.per_s0[i].1).count(), total);
            StudyRow {
                s0,
                per_p,
                adaptive,
            }
        })
        .collect();
    Ok(StudyResult {
        config: cfg.clone(),
        metadata: StudyMetadata {
            shared_ensemble: true,
            covariance_fixed_per_study: true,
            shift_redrawn_per_replication: !cfg.is_null(),
            stiefel_rank: (cfg.model.model == Model::NonSparse).then(|| cfg.model.resolved_rank()),
            pair_set,
        },
        rows,
        runtime_ms: None,
    })
}

impl StudyResult {
    /// Aligned text table: one line per `s0`, rates in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let ps = dedup_exponents(&self.config.test.p_set);
        let label = if self.config.is_null() {
            "Empirical size (%)"
        } else {
            "Empirical power (%)"
        };
        let _ = writeln!(
            out,
            "{label}: model {}, kernel {}, d = {}, R = {}, B = {}, alpha = {}",
            self.config.model.model.id(),
            self.config.kernel,
            self.config.model.d,
            self.config.replications,
            self.config.test.replicates,
            self.config.test.alpha
        );
        let _ = write!(out, "{:>6} {:>5}", "d", "s0");
        for p in &ps {
            let _ = write!(out, " {:>8}", format!("p={p}"));
        }
        let _ = writeln!(out, " {:>8}", "T_ad");
        for row in &self.rows {
            let _ = write!(out, "{:>6} {:>5}", self.config.model.d, row.s0);
            for c in &row.per_p {
                let _ = write!(out, " {:>8.2}", 100.0 * c.cell.rate);
            }
            let _ = writeln!(out, " {:>8.2}", 100.0 * row.adaptive.rate);
        }
        out
    }
}
