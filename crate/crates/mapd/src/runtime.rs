//! Container runtimes the live mode talks to.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use emu_core::compile::{self, Manifest};
use serde::Deserialize;

use crate::error::{MapdError, Result};
use crate::events::{EventSource, Observation};
use crate::filter::Filter;
use crate::topology::ContainerInfo;

pub trait Runtime: Send + Sync + 'static {
    fn name(&self) -> &str;

    /// Every emulation container with its labels and run state.
    fn containers(&self) -> Result<Vec<ContainerInfo>>;

    /// A command that runs a shell inside the node, reading stdin.
    fn console_command(&self, id: &str) -> tokio::process::Command;

    /// Starts capturing with `expr` on one node. Fails with
    /// `FilterRejected` when the capture process refuses the expression.
    fn capture(&self, id: &str, expr: &str) -> Result<Box<dyn EventSource>>;

    fn ensure_running(&self, id: &str) -> Result<()> {
        let running = self
            .containers()?
            .into_iter()
            .any(|c| c.name == id && c.running != Some(false));
        if running {
            Ok(())
        } else {
            Err(MapdError::NodeNotRunning(id.to_string()))
        }
    }
}

/// Drives the `docker` command-line client.
#[derive(Clone, Debug)]
pub struct DockerCli {
    binary: String,
    /// Daemon socket path; the client default when unset.
    socket: Option<String>,
}

impl DockerCli {
    pub fn new(socket: Option<String>) -> Self {
        DockerCli {
            binary: "docker".into(),
            socket,
        }
    }

    pub fn with_binary(mut self, binary: &str) -> Self {
        self.binary = binary.to_string();
        self
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new(&self.binary);
        if let Some(s) = &self.socket {
            cmd.env("DOCKER_HOST", format!("unix://{s}"));
        }
        cmd
    }

    fn run(&self, args: &[&str]) -> Result<String> {
        let out = self
            .command()
            .args(args)
            .output()
            .map_err(|e| MapdError::SourceUnavailable(format!("{}: {e}", self.binary)))?;
        if !out.status.success() {
            return Err(MapdError::SourceUnavailable(
                String::from_utf8_lossy(&out.stderr).trim().to_string(),
            ));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "PascalCase")]
struct Inspect {
    name: String,
    config: InspectConfig,
    state: InspectState,
}

#[derive(Deserialize)]
#[serde(rename_all = "PascalCase")]
struct InspectConfig {
    #[serde(default)]
    labels: Option<BTreeMap<String, String>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "PascalCase")]
struct InspectState {
    running: bool,
}

/// Parses `docker inspect` output.
pub fn parse_inspect(json: &str) -> Result<Vec<ContainerInfo>> {
    let items: Vec<Inspect> =
        serde_json::from_str(json).map_err(|e| MapdError::SourceUnavailable(e.to_string()))?;
    let mut out: Vec<ContainerInfo> = items
        .into_iter()
        .map(|i| ContainerInfo {
            name: i.name.trim_start_matches('/').to_string(),
            labels: i.config.labels.unwrap_or_default(),
            running: Some(i.state.running),
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

impl Runtime for DockerCli {
    fn name(&self) -> &str {
        "docker"
    }

    fn containers(&self) -> Result<Vec<ContainerInfo>> {
        let filter = format!("label={}", compile::LABEL_NODE_NAME);
        let ids = self.run(&["ps", "-aq", "--filter", &filter])?;
        let ids: Vec<&str> = ids.split_whitespace().collect();
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let mut args = vec!["inspect"];
        args.extend(ids);
        parse_inspect(&self.run(&args)?)
    }

    fn console_command(&self, id: &str) -> tokio::process::Command {
        let mut cmd = tokio::process::Command::from(self.command());
        cmd.args(["exec", "-i", id, "/bin/sh"]);
        cmd
    }

    fn capture(&self, id: &str, expr: &str) -> Result<Box<dyn EventSource>> {
        let mut cmd = self.command();
        cmd.args(["exec", id, "tcpdump", "-l", "-n", "-i", "any", expr]);
        Ok(Box::new(CaptureSource::spawn(id, cmd)?))
    }
}

/// Lines from a capture process, one event each.
pub struct CaptureSource {
    node: String,
    child: Arc<Mutex<Child>>,
    lines: std::io::Lines<BufReader<std::process::ChildStdout>>,
}

impl CaptureSource {
    /// Starts the process and gives it a moment to reject the expression.
    pub fn spawn(node: &str, mut cmd: Command) -> Result<Self> {
        let mut child = cmd
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| MapdError::Runtime(e.to_string()))?;
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Some(status) = child
                .try_wait()
                .map_err(|e| MapdError::Runtime(e.to_string()))?
            {
                if !status.success() {
                    let mut err = String::new();
                    if let Some(mut s) = child.stderr.take() {
                        let _ = s.read_to_string(&mut err);
                    }
                    return Err(MapdError::FilterRejected(err.trim().to_string()));
                }
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let stdout = child.stdout.take().expect("piped");
        Ok(CaptureSource {
            node: node.to_string(),
            child: Arc::new(Mutex::new(child)),
            lines: BufReader::new(stdout).lines(),
        })
    }
}

impl EventSource for CaptureSource {
    fn service(&self) -> &str {
        "packet"
    }

    fn next(&mut self) -> Option<(Duration, Vec<Observation>)> {
        let line = self.lines.next()?.ok()?;
        Some((
            Duration::ZERO,
            vec![Observation {
                node_id: self.node.clone(),
                summary: line,
                packet: None,
            }],
        ))
    }

    fn stopper(&self) -> Option<Box<dyn FnOnce() + Send>> {
        let child = self.child.clone();
        Some(Box::new(move || {
            let _ = child.lock().expect("child lock").kill();
        }))
    }
}

impl Drop for CaptureSource {
    fn drop(&mut self) {
        let mut child = self.child.lock().expect("child lock");
        let _ = child.kill();
        let _ = child.wait();
    }
}

/// Treats each node as a process on this machine: consoles are local
/// shells. There is no packet capture; filters are only validated.
#[derive(Clone, Debug)]
pub struct LocalRuntime {
    nodes: Vec<ContainerInfo>,
    stopped: BTreeSet<String>,
    shell: String,
}

impl LocalRuntime {
    pub fn new(nodes: Vec<ContainerInfo>) -> Self {
        LocalRuntime {
            nodes,
            stopped: BTreeSet::new(),
            shell: "sh".into(),
        }
    }

    pub fn from_manifest(manifest: &Manifest) -> Self {
        Self::new(
            manifest
                .services
                .iter()
                .map(|(name, svc)| ContainerInfo {
                    name: name.clone(),
                    labels: svc.labels.clone(),
                    running: Some(true),
                })
                .collect(),
        )
    }

    pub fn stop(&mut self, id: &str) {
        self.stopped.insert(id.to_string());
    }
}

struct Idle;

impl EventSource for Idle {
    fn service(&self) -> &str {
        "packet"
    }

    fn next(&mut self) -> Option<(Duration, Vec<Observation>)> {
        None
    }
}

impl Runtime for LocalRuntime {
    fn name(&self) -> &str {
        "local"
    }

    fn containers(&self) -> Result<Vec<ContainerInfo>> {
        Ok(self
            .nodes
            .iter()
            .map(|c| ContainerInfo {
                running: Some(!self.stopped.contains(&c.name)),
                ..c.clone()
            })
            .collect())
    }

    fn console_command(&self, _id: &str) -> tokio::process::Command {
        tokio::process::Command::new(&self.shell)
    }

    fn capture(&self, _id: &str, expr: &str) -> Result<Box<dyn EventSource>> {
        Filter::parse(expr)?;
        Ok(Box::new(Idle))
    }
}
