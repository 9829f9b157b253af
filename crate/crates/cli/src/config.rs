//! Endpoint settings from `forge.toml` and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use forge_core::endpoint::{BlindInput, EndpointConfig};
use serde::Deserialize;

use crate::{BlindInputArg, EndpointArgs};

pub const CONFIG_FILE: &str = "forge.toml";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    endpoint: Option<EndpointConfig>,
}

fn discover(explicit: Option<&Path>, beside: &Path) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let dir = beside
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let candidate = dir.join(CONFIG_FILE);
    candidate.is_file().then_some(candidate)
}

/// Defaults, then `forge.toml` (explicit or beside `dataset`), then flags.
pub fn endpoint(args: &EndpointArgs, dataset: &Path) -> anyhow::Result<EndpointConfig> {
    let mut cfg = match discover(args.config.as_deref(), dataset) {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file: FileConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            file.endpoint.unwrap_or_default()
        }
        None => EndpointConfig::default(),
    };
    if let Some(v) = &args.endpoint_url {
        cfg.base_url = v.clone();
    }
    if let Some(v) = &args.model {
        cfg.model = v.clone();
    }
    if let Some(v) = &args.key_env {
        cfg.key_env = v.clone();
    }
    if let Some(v) = args.supports_video {
        cfg.supports_video = v;
    }
    if let Some(v) = args.blind_input {
        cfg.blind_input = match v {
            BlindInputArg::Omit => BlindInput::Omit,
            BlindInputArg::ZeroFrame => BlindInput::ZeroFrame,
        };
    }
    if let Some(v) = args.retries {
        cfg.retries = v;
    }
    if let Some(v) = args.backoff_ms {
        cfg.backoff_ms = v;
    }
    if let Some(v) = args.endpoint_parallel {
        cfg.max_parallel = v;
    }
    Ok(cfg)
}
