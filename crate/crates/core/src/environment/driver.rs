//! Client for an external benchmark driver speaking newline-delimited JSON
//! over its stdio.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EnvError, EnvObservation, Environment, WorkloadSpec};
use crate::knobspace::{Configuration, KnobCatalog, KnobValue};
use crate::metrics::{MetricFrame, PerfResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverRequest {
    pub op: String,
    pub config: BTreeMap<String, KnobValue>,
    pub workload: WorkloadSpec,
    pub trial_id: String,
}

/// Either `frames` + `perf`, or `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<MetricFrame>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perf: Option<PerfResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn spawn(command: &str) -> Result<Self, EnvError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines: rx })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs trials through a long-lived driver process started with `sh -c`.
///
/// A timeout, a dead driver or a malformed reply fails the current trial
/// only; the process is restarted on the next call.
pub struct DriverEnv {
    command: String,
    catalog: KnobCatalog,
    timeout: Duration,
    session: Option<Session>,
}

impl std::fmt::Debug for DriverEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriverEnv").field("command", &self.command).field("timeout", &self.timeout).finish()
    }
}

impl DriverEnv {
    pub fn new(command: impl Into<String>, catalog: KnobCatalog, timeout: Duration) -> Self {
        Self { command: command.into(), catalog, timeout, session: None }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn round_trip(&mut self, line: &str) -> Result<String, EnvError> {
        if self.session.is_none() {
            self.session = Some(Session::spawn(&self.command)?);
        }
        let session = self.session.as_mut().expect("session just ensured");
        let sent = session
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| session.stdin.write_all(b"\n"))
            .and_then(|_| session.stdin.flush());
        if let Err(e) = sent {
            self.reset();
            return Err(EnvError::Io(e));
        }
        match session.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => Ok(reply),
            Ok(Err(e)) => {
                self.reset();
                Err(EnvError::Io(e))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.reset();
                Err(EnvError::Timeout(self.timeout.as_secs_f64()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.reset();
                Err(EnvError::Protocol("driver closed its output".into()))
            }
        }
    }

    fn reset(&mut self) {
        if let Some(s) = self.session.take() {
            s.kill();
        }
    }

    fn check(
        &self,
        response: DriverResponse,
        workload: &WorkloadSpec,
    ) -> Result<(Vec<MetricFrame>, PerfResult), EnvError> {
        if let Some(msg) = response.error {
            return Err(EnvError::Driver(msg));
        }
        let (Some(frames), Some(perf)) = (response.frames, response.perf) else {
            return Err(EnvError::Protocol("reply needs both `frames` and `perf`".into()));
        };
        if frames.len() < 2 {
            return Err(EnvError::Protocol(format!("expected at least 2 frames, got {}", frames.len())));
        }
        let width = frames[0].values.len();
        if frames.iter().any(|f| f.values.len() != width) {
            return Err(EnvError::Protocol("frames differ in width".into()));
        }
        if frames.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
            return Err(EnvError::Protocol("frame timestamps must increase".into()));
        }
        let finite = [perf.tps, perf.p95_latency_ms, perf.qps].iter().all(|x| x.is_finite());
        if !finite || perf.tps < 0.0 || perf.qps < 0.0 || !(perf.p95_latency_ms > 0.0) {
            return Err(EnvError::Protocol(format!("implausible perf {perf:?}")));
        }
        let _ = workload;
        Ok((frames, perf))
    }
}

impl Drop for DriverEnv {
    fn drop(&mut self) {
        self.reset();
    }
}

impl Environment for DriverEnv {
    fn catalog(&self) -> &KnobCatalog {
        &self.catalog
    }

    fn evaluate(
        &mut self,
        config: &Configuration,
        workload: &WorkloadSpec,
        seed: u64,
    ) -> Result<EnvObservation, EnvError> {
        workload.validate()?;
        if config.normalized.len() != self.catalog.dimension() {
            return Err(EnvError::InvalidConfig(format!(
                "expected {} coordinates, got {}",
                self.catalog.dimension(),
                config.normalized.len()
            )));
        }
        let request = DriverRequest {
            op: "evaluate".into(),
            config: config.physical.clone(),
            workload: workload.clone(),
            trial_id: format!("{seed:016x}"),
        };
        let started = Instant::now();
        let reply = self.round_trip(&serde_json::to_string(&request)?)?;
        let response: DriverResponse =
            serde_json::from_str(&reply).map_err(|e| EnvError::Protocol(format!("unparseable reply: {e}")))?;
        let (frames, perf) = self.check(response, workload)?;
        Ok(EnvObservation { frames, perf, wall_time_s: started.elapsed().as_secs_f64() })
    }
}
