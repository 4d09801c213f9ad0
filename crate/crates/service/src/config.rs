use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use teleassist_core::config::AssistConfig;
use teleassist_core::scene::TaskRegistry;

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Registry manifest; relative to the config file.
    pub manifest: PathBuf,
    /// Directory served at `/`, typically the built operator console.
    pub static_dir: Option<PathBuf>,
    /// Events buffered per client before a slow client is dropped.
    pub backlog: usize,
    /// Observation samples per second accepted; faster samples are dropped.
    pub max_observation_rate: f64,
    /// Follower telemetry events per simulated second.
    pub telemetry_rate: f64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8750,
            manifest: PathBuf::from("manifest.toml"),
            static_dir: None,
            backlog: 1024,
            max_observation_rate: 50.0,
            telemetry_rate: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub server: ServerConfig,
    pub assist: AssistConfig,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.server.manifest.is_relative() {
            cfg.server.manifest = base.join(&cfg.server.manifest);
        }
        if let Some(dir) = &cfg.server.static_dir {
            if dir.is_relative() {
                cfg.server.static_dir = Some(base.join(dir));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.assist.validate()?;
        if !(self.server.max_observation_rate > 0.0 && self.server.telemetry_rate > 0.0) {
            return Err(ServiceError::Config("rates must be positive".into()));
        }
        if self.server.backlog == 0 {
            return Err(ServiceError::Config("backlog must be at least 1".into()));
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<TaskRegistry, ServiceError> {
        Ok(TaskRegistry::load_manifest(&self.server.manifest)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ServiceConfig::from_toml("").unwrap();
        assert_eq!(cfg, ServiceConfig::default());
        assert_eq!(cfg.server.port, 8750);
    }

    #[test]
    fn sections_override_and_validate() {
        let cfg = ServiceConfig::from_toml("[server]\nport = 9000\n[assist]\nfollower_tau = 0.3\n").unwrap();
        assert_eq!(cfg.server.port, 9000);
        assert_eq!(cfg.assist.follower_tau, 0.3);
        assert!(ServiceConfig::from_toml("[assist]\nfollower_tau = -1.0\n").is_err());
        assert!(ServiceConfig::from_toml("[server]\nbacklog = 0\n").is_err());
        assert!(ServiceConfig::from_toml("[mystery]\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svc.toml");
        std::fs::write(
            &path,
            "[server]\nmanifest = \"assets/manifest.toml\"\nstatic_dir = \"web\"\n",
        )
        .unwrap();
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.server.manifest, dir.path().join("assets/manifest.toml"));
        assert_eq!(cfg.server.static_dir, Some(dir.path().join("web")));
    }
}
