//! Popularity prediction: the contract used by the online strategies and the
//! built-in predictors.

mod plugin;

use std::fmt;

use thiserror::Error;

use crate::model::{ContentId, ContentIdx, Slot};
use crate::workload::RequestTrace;

pub use plugin::{PluginPredictor, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("prediction horizon must be at least 1 (content {0})")]
    ZeroHorizon(ContentId),
    #[error("plugin failed to start: {0}")]
    Spawn(String),
    #[error("plugin timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("plugin closed its output")]
    Closed,
    #[error("plugin protocol violation: {0}")]
    Protocol(String),
    #[error("plugin marked failed by an earlier error")]
    Failed,
}

/// One content's forecast query.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRequest {
    pub id: ContentId,
    pub content: ContentIdx,
    /// Counts of the slots before `snapshot`, most recent last.
    pub history: Vec<u32>,
    pub horizon: usize,
    pub t_gen: Slot,
    pub snapshot: Slot,
    /// First predicted slot.
    pub now: Slot,
}

impl PredictionRequest {
    fn check(&self) -> Result<(), PredictError> {
        if self.horizon == 0 {
            return Err(PredictError::ZeroHorizon(self.id));
        }
        Ok(())
    }
}

/// Answers per-slot non-negative request intensities for `horizon` slots
/// starting at `now`. Repeated identical calls return identical answers.
pub trait Predictor: Send {
    fn name(&self) -> &str;

    /// History slots the predictor looks at; `None` means all of them.
    fn history_needed(&self) -> Option<u64>;

    fn predict_batch(&mut self, requests: &[PredictionRequest]) -> Result<Vec<Vec<f64>>, PredictError>;

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<f64>, PredictError> {
        Ok(self.predict_batch(std::slice::from_ref(request))?.remove(0))
    }

    /// Batches answered by a fallback instead of this predictor.
    fn fallback_events(&self) -> u64 {
        0
    }
}

impl fmt::Debug for dyn Predictor + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predictor({})", self.name())
    }
}

/// Reads the future off the ground-truth trace. Zero beyond `end`.
pub struct PerfectPredictor<'w> {
    trace: &'w RequestTrace,
    end: Slot,
}

impl<'w> PerfectPredictor<'w> {
    pub fn new(trace: &'w RequestTrace, end: Slot) -> Self {
        PerfectPredictor { trace, end }
    }
}

impl Predictor for PerfectPredictor<'_> {
    fn name(&self) -> &str {
        "perfect"
    }

    fn history_needed(&self) -> Option<u64> {
        Some(0)
    }

    fn predict_batch(&mut self, requests: &[PredictionRequest]) -> Result<Vec<Vec<f64>>, PredictError> {
        requests
            .iter()
            .map(|r| {
                r.check()?;
                Ok((r.now..r.now + r.horizon as u64)
                    .map(|t| if t < self.end { self.trace.count(r.content, t) as f64 } else { 0.0 })
                    .collect())
            })
            .collect()
    }
}

/// Mean of the last `window` observed counts, flat over the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowAverage {
    window: u64,
}

impl WindowAverage {
    pub fn new(window: u64) -> Self {
        assert!(window >= 1, "window must be positive");
        WindowAverage { window }
    }
}

impl Predictor for WindowAverage {
    fn name(&self) -> &str {
        "window"
    }

    fn history_needed(&self) -> Option<u64> {
        Some(self.window)
    }

    fn predict_batch(&mut self, requests: &[PredictionRequest]) -> Result<Vec<Vec<f64>>, PredictError> {
        requests
            .iter()
            .map(|r| {
                r.check()?;
                let n = (self.window as usize).min(r.history.len());
                let tail = &r.history[r.history.len() - n..];
                let mean = if n == 0 { 0.0 } else { tail.iter().map(|&c| c as f64).sum::<f64>() / n as f64 };
                Ok(vec![mean; r.horizon])
            })
            .collect()
    }
}

/// Serves from `primary` until its first failure, then from `fallback` for
/// the rest of the run.
pub struct WithFallback<P> {
    primary: P,
    fallback: WindowAverage,
    failed: bool,
    events: u64,
}

impl<P: Predictor> WithFallback<P> {
    pub fn new(primary: P, fallback: WindowAverage) -> Self {
        WithFallback { primary, fallback, failed: false, events: 0 }
    }
}

impl<P: Predictor> Predictor for WithFallback<P> {
    fn name(&self) -> &str {
        self.primary.name()
    }

    fn history_needed(&self) -> Option<u64> {
        self.primary.history_needed().map(|n| n.max(self.fallback.window))
    }

    fn predict_batch(&mut self, requests: &[PredictionRequest]) -> Result<Vec<Vec<f64>>, PredictError> {
        if !self.failed {
            match self.primary.predict_batch(requests) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::warn!("predictor `{}` failed, falling back to window average: {e}", self.primary.name());
                    self.failed = true;
                }
            }
        }
        self.events += 1;
        self.fallback.predict_batch(requests)
    }

    fn fallback_events(&self) -> u64 {
        self.events
    }
}
