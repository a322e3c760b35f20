use serde::{Deserialize, Serialize};
use spnorm_core::{
    AdaptiveReport, Exponent, HotellingReport, IndividualResult, KernelFamily, Method, PairSet,
    Side,
};

/// Settings echoed into every test report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub x: String,
    pub y: Option<String>,
    /// `zeros`, `identity` or the path of a CSV vector; one-sample only.
    pub null: Option<String>,
    pub kernel: KernelFamily,
    pub pairs: Option<PairSet>,
    pub s0: usize,
    pub p: Vec<Exponent>,
    #[serde(rename = "B")]
    pub replicates: usize,
    #[serde(rename = "L")]
    pub inner_replicates: Option<usize>,
    pub alpha: f64,
    pub method: Method,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSummary {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub config: TestConfig,
    pub side: Side,
    pub coordinate_statistics: Vec<f64>,
    pub per_p: Vec<IndividualResult>,
    pub adaptive: AdaptiveSummary,
    pub seed: u64,
    /// `null` unless timing was requested, so reruns stay byte-identical.
    pub runtime_ms: Option<u64>,
}

impl TestReport {
    pub fn new(config: TestConfig, report: AdaptiveReport, seed: u64) -> Self {
        Self {
            config,
            side: report.side,
            coordinate_statistics: report.coordinate_statistics,
            per_p: report.individual,
            adaptive: AdaptiveSummary {
                statistic: report.statistic,
                p_value: report.p_value,
                reject: report.reject,
                method: report.method,
            },
            seed,
            runtime_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Report {
    pub x: String,
    pub y: String,
    #[serde(flatten)]
    pub result: HotellingReport,
}
