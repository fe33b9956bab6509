//! Settings read from the environment.

use std::path::PathBuf;
use std::time::Duration;

use crate::events::DEFAULT_QUEUE;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Topology and packets come from the container runtime.
    Live,
    /// Topology comes from a compiled manifest and packets are synthesized.
    Offline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuntimeKind {
    Docker,
    Local,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub port: u16,
    pub mode: Mode,
    pub runtime: RuntimeKind,
    /// Docker daemon socket path.
    pub runtime_socket: Option<String>,
    /// Compiled output directory holding the manifest.
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub tick: Duration,
    pub queue: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            port: 8080,
            mode: Mode::Offline,
            runtime: RuntimeKind::Docker,
            runtime_socket: None,
            manifest: None,
            seed: 0,
            tick: Duration::from_millis(250),
            queue: DEFAULT_QUEUE,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("{key}: `{v}` is not a valid number"))
}

impl Config {
    pub fn from_env() -> Result<Self, String> {
        Self::from_vars(|k| std::env::var(k).ok())
    }

    pub fn from_vars(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut c = Config::default();
        if let Some(v) = get("MAPD_PORT") {
            c.port = number("MAPD_PORT", &v)?;
        }
        if let Some(v) = get("MAPD_MODE") {
            c.mode = match v.as_str() {
                "live" => Mode::Live,
                "offline" => Mode::Offline,
                _ => return Err(format!("MAPD_MODE: expected live or offline, got `{v}`")),
            };
        }
        if let Some(v) = get("MAPD_RUNTIME") {
            c.runtime = match v.as_str() {
                "docker" => RuntimeKind::Docker,
                "local" => RuntimeKind::Local,
                _ => return Err(format!("MAPD_RUNTIME: expected docker or local, got `{v}`")),
            };
        }
        c.runtime_socket = get("MAPD_RUNTIME_SOCKET").filter(|s| !s.is_empty());
        c.manifest = get("MAPD_MANIFEST")
            .filter(|s| !s.is_empty())
            .map(PathBuf::from);
        if let Some(v) = get("MAPD_SEED") {
            c.seed = number("MAPD_SEED", &v)?;
        }
        if let Some(v) = get("MAPD_TICK_MS") {
            c.tick = Duration::from_millis(number("MAPD_TICK_MS", &v)?);
        }
        if let Some(v) = get("MAPD_QUEUE") {
            c.queue = number("MAPD_QUEUE", &v)?;
            if c.queue == 0 {
                return Err("MAPD_QUEUE must be positive".into());
            }
        }
        if c.runtime == RuntimeKind::Local && c.manifest.is_none() {
            return Err("MAPD_RUNTIME=local needs MAPD_MANIFEST".into());
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn vars(pairs: &[(&str, &str)]) -> Result<Config, String> {
        let m: HashMap<String, String> = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Config::from_vars(|k| m.get(k).cloned())
    }

    #[test]
    fn defaults() {
        let c = vars(&[]).unwrap();
        assert_eq!(c.port, 8080);
        assert_eq!(c.mode, Mode::Offline);
        assert_eq!(c.runtime_socket, None);
    }

    #[test]
    fn overrides_and_errors() {
        let c = vars(&[
            ("MAPD_PORT", "9000"),
            ("MAPD_MODE", "live"),
            ("MAPD_RUNTIME_SOCKET", "/run/docker.sock"),
        ])
        .unwrap();
        assert_eq!((c.port, c.mode), (9000, Mode::Live));
        assert_eq!(c.runtime_socket.as_deref(), Some("/run/docker.sock"));
        assert!(vars(&[("MAPD_MODE", "replay")]).is_err());
        assert!(vars(&[("MAPD_PORT", "x")]).is_err());
        assert!(vars(&[("MAPD_RUNTIME", "local")]).is_err());
    }
}
