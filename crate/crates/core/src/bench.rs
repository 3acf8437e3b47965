//! Recognition throughput measurement.

use std::time::Instant;

use crate::config::{EngineConfig, ScoringMode, TopK};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::recognizer::batch_recognize;

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub config: EngineConfig,
    pub workers: usize,
    pub items: usize,
    /// Items per second, one entry per repetition.
    pub rates: Vec<f64>,
    pub median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Runs `batch_recognize` over `texts` `repetitions` times.
pub fn bench<S: AsRef<str> + Sync>(
    model: &Model,
    texts: &[S],
    config: &EngineConfig,
    workers: usize,
    repetitions: usize,
) -> Result<BenchResult> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let mut rates = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let out = batch_recognize(texts, model, config, None, workers)?;
        let secs = start.elapsed().as_secs_f64();
        std::hint::black_box(out);
        rates.push(if secs > 0.0 { texts.len() as f64 / secs } else { f64::INFINITY });
    }
    Ok(BenchResult {
        config: config.clone(),
        workers,
        items: texts.len(),
        median: median(&rates),
        rates,
    })
}

/// Every combination of top-K in {1, 10, 100, unbounded}, both scoring
/// modes and order priority on/off, on top of `base`.
pub fn sweep_configs(base: &EngineConfig) -> Vec<EngineConfig> {
    let mut out = Vec::new();
    for top_k in [TopK::Limit(1), TopK::Limit(10), TopK::Limit(100), TopK::Unbounded] {
        for scoring_mode in [ScoringMode::Asymmetric, ScoringMode::Symmetric] {
            for order_priority in [true, false] {
                out.push(EngineConfig { top_k, scoring_mode, order_priority, ..base.clone() });
            }
        }
    }
    out
}
