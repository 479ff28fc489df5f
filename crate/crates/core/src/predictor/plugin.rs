//! Client for an external predictor speaking newline-delimited JSON over the
//! child's stdin/stdout.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{PredictError, PredictionRequest, Predictor};
use crate::model::ContentId;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Serialize)]
struct Hello {
    hello: HelloBody,
}

#[derive(Serialize)]
struct HelloBody {
    protocol: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Ready {
    ready: ReadyBody,
}

#[derive(Deserialize)]
struct ReadyBody {
    name: String,
}

#[derive(Serialize)]
struct Predict<'a> {
    predict: PredictBody<'a>,
}

#[derive(Serialize)]
struct PredictBody<'a> {
    items: Vec<WireItem<'a>>,
}

#[derive(Serialize)]
struct WireItem<'a> {
    id: ContentId,
    history: &'a [u32],
    horizon: usize,
    t_gen: u64,
    now: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Predictions {
    predictions: Vec<WirePrediction>,
}

#[derive(Deserialize)]
struct WirePrediction {
    id: ContentId,
    values: Vec<f64>,
}

pub struct PluginPredictor {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    name: String,
    failed: bool,
}

impl PluginPredictor {
    /// Starts `command` through the shell and completes the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, PredictError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PredictError::Spawn(format!("{command}: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut p = PluginPredictor {
            stdin: child.stdin.take(),
            child,
            lines,
            timeout,
            name: String::new(),
            failed: false,
        };
        let hello = serde_json::to_string(&Hello { hello: HelloBody { protocol: PROTOCOL_VERSION } })
            .expect("static message");
        let reply = p.exchange(&hello)?;
        let ready: Ready = serde_json::from_str(&reply)
            .map_err(|e| PredictError::Protocol(format!("bad handshake reply `{reply}`: {e}")))?;
        p.name = ready.ready.name;
        Ok(p)
    }

    fn exchange(&mut self, message: &str) -> Result<String, PredictError> {
        let stdin = self.stdin.as_mut().ok_or(PredictError::Closed)?;
        writeln!(stdin, "{message}")
            .and_then(|_| stdin.flush())
            .map_err(|_| PredictError::Closed)?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(PredictError::Protocol(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(PredictError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(PredictError::Closed),
        }
    }

    fn predict_inner(&mut self, requests: &[PredictionRequest]) -> Result<Vec<Vec<f64>>, PredictError> {
        for r in requests {
            r.check()?;
        }
        let items = requests
            .iter()
            .map(|r| WireItem { id: r.id, history: &r.history, horizon: r.horizon, t_gen: r.t_gen, now: r.now })
            .collect();
        let msg = serde_json::to_string(&Predict { predict: PredictBody { items } })
            .map_err(|e| PredictError::Protocol(e.to_string()))?;
        let reply = self.exchange(&msg)?;
        let parsed: Predictions = serde_json::from_str(&reply)
            .map_err(|e| PredictError::Protocol(format!("bad reply: {e}")))?;
        let mut by_id: HashMap<ContentId, Vec<f64>> = HashMap::with_capacity(parsed.predictions.len());
        for p in parsed.predictions {
            if by_id.insert(p.id, p.values).is_some() {
                return Err(PredictError::Protocol(format!("duplicate id {}", p.id)));
            }
        }
        requests
            .iter()
            .map(|r| {
                let values = by_id
                    .remove(&r.id)
                    .ok_or_else(|| PredictError::Protocol(format!("missing id {}", r.id)))?;
                if values.len() != r.horizon {
                    return Err(PredictError::Protocol(format!(
                        "id {}: {} values for horizon {}",
                        r.id,
                        values.len(),
                        r.horizon
                    )));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(PredictError::Protocol(format!("id {}: invalid value {v}", r.id)));
                }
                Ok(values)
            })
            .collect()
    }
}

impl Predictor for PluginPredictor {
    fn name(&self) -> &str {
        &self.name
    }

    fn history_needed(&self) -> Option<u64> {
        None
    }

    fn predict_batch(&mut self, requests: &[PredictionRequest]) -> Result<Vec<Vec<f64>>, PredictError> {
        if self.failed {
            return Err(PredictError::Failed);
        }
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let out = self.predict_inner(requests);
        if out.is_err() {
            self.failed = true;
        }
        out
    }
}

impl Drop for PluginPredictor {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved plugin exit on EOF.
        self.stdin.take();
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}
