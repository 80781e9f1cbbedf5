//! Run configuration: a flat sectioned key = value file, every value
//! overridable by a command-line flag of the same dotted name
//! (`--sampler.method sobol` overrides `method` in `[sampler]`).
//!
//! The effective configuration — after defaults and overrides — is written
//! next to every run's outputs, and re-running from that file reproduces
//! the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nn::{Architecture, NetworkConfig, PoolKind, TrainConfig};
use crate::sampling::SampleMethod;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("config key \"{key}\": {message}")]
    BadValue { key: String, message: String },
    #[error("unknown config key \"{0}\"")]
    UnknownKey(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Every legal dotted key with its default value. Single source of truth
/// for parsing, the CLI's generated override flags, and the effective
/// config dump.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("paths.materials_dir", "data/materials"),
    ("stack.preset", "transparent"),
    ("stack.file", ""),
    ("stack.lower_nm", ""),
    ("stack.upper_nm", ""),
    ("sampler.method", "sobol"),
    ("sampler.seed_or_skip", "1"),
    ("sampler.n_total", "2000"),
    ("sampler.split", "0.75,0.125,0.125"),
    ("image.width", "37"),
    ("image.height", "28"),
    ("grid.step_nm", "5"),
    ("network.arch", "block"),
    ("network.section_depth", "2"),
    ("network.pools", "max,avg,avg"),
    ("network.filters", "8,16,32"),
    ("train.initial_learning_rate", "0.02"),
    ("train.momentum", "0.9"),
    ("train.mini_batch_size", "50"),
    ("train.lr_drop_factor", "0.5"),
    ("train.lr_drop_period", "20"),
    ("train.l2_coefficient", "1e-4"),
    ("train.epochs", "60"),
    ("tune.epoch_cap", "20"),
    ("tune.timeout_secs", "0"),
    ("tune.freeze", ""),
    ("hyperspace.section_depth", "1:7"),
    ("hyperspace.initial_learning_rate", "1e-4:1e-1"),
    ("hyperspace.momentum", "0.5:0.99"),
    ("hyperspace.mini_batch_size", "8:128"),
    ("hyperspace.lr_drop_factor", "0.1:1.0"),
    ("hyperspace.lr_drop_period", "5:50"),
    ("hyperspace.l2_coefficient", "1e-6:1e-2"),
    ("run.seed", "42"),
    ("run.threads", "0"),
];

/// Key/value store with section-qualified dotted keys.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn defaults() -> Self {
        let values = CONFIG_KEYS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { values }
    }

    fn known(key: &str) -> bool {
        CONFIG_KEYS.iter().any(|(k, _)| *k == key)
    }

    /// Parse a sectioned key = value file over the current values.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.load_text(&text, &path.display().to_string())
    }

    pub fn load_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                path: origin.to_string(),
                line: line_no,
                message: format!("expected key = value, got \"{line}\""),
            })?;
            let key = key.trim();
            let dotted = if key.contains('.') || section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            self.set(&dotted, value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !Self::known(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unknown config key \"{key}\" requested"))
    }

    fn bad(key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|e| Self::bad(key, format!("{e}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|e| Self::bad(key, format!("{e}")))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|e| Self::bad(key, format!("{e}")))
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.get(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|v| v.trim().parse().map_err(|e| Self::bad(key, format!("{e}"))))
            .collect()
    }

    /// `lower:upper` pair used by hyperspace bounds.
    pub fn get_range(&self, key: &str) -> Result<(f64, f64), ConfigError> {
        let raw = self.get(key);
        let (lo, hi) = raw
            .split_once(':')
            .ok_or_else(|| Self::bad(key, format!("expected lower:upper, got \"{raw}\"")))?;
        let lo: f64 = lo.trim().parse().map_err(|e| Self::bad(key, format!("{e}")))?;
        let hi: f64 = hi.trim().parse().map_err(|e| Self::bad(key, format!("{e}")))?;
        Ok((lo, hi))
    }

    /// Serialize every key grouped into sections, stable order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = String::new();
        for (key, default) in CONFIG_KEYS {
            let (sec, name) = key.split_once('.').expect("keys are dotted");
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{sec}]");
                section = sec.to_string();
            }
            let value = self.values.get(*key).map(String::as_str).unwrap_or(default);
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }

    pub fn write_effective(&self, dir: &Path) -> Result<PathBuf, ConfigError> {
        let path = dir.join("effective-config.txt");
        std::fs::write(&path, self.to_text()).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn sampler_method(&self) -> Result<SampleMethod, ConfigError> {
        self.get("sampler.method")
            .parse()
            .map_err(|e| Self::bad("sampler.method", format!("{e}")))
    }

    pub fn split_fractions(&self) -> Result<(f64, f64, f64), ConfigError> {
        let parts = self.get_f64_list("sampler.split")?;
        if parts.len() != 3 {
            return Err(Self::bad("sampler.split", "expected three comma-separated fractions"));
        }
        Ok((parts[0], parts[1], parts[2]))
    }

    /// Wavelength grid: 300-800 nm inclusive at `grid.step_nm`.
    pub fn wavelength_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let step = self.get_f64("grid.step_nm")?;
        if !(step > 0.0 && step <= 250.0) {
            return Err(Self::bad("grid.step_nm", "step must be in (0, 250]"));
        }
        let mut grid = Vec::new();
        let mut i = 0u32;
        loop {
            let w = 300.0 + step * i as f64;
            if w >= 800.0 {
                grid.push(800.0);
                break;
            }
            grid.push(w);
            i += 1;
        }
        Ok(grid)
    }

    pub fn network_config(&self, input_channels: usize, output_dim: usize) -> Result<NetworkConfig, ConfigError> {
        let arch = match self.get("network.arch") {
            "first" => Architecture::First,
            "block" => {
                let pools_raw: Vec<&str> = self.get("network.pools").split(',').map(str::trim).collect();
                if pools_raw.len() != 3 {
                    return Err(Self::bad("network.pools", "expected three comma-separated pool kinds"));
                }
                let mut pools = [PoolKind::Avg; 3];
                for (slot, raw) in pools.iter_mut().zip(&pools_raw) {
                    *slot = match *raw {
                        "max" => PoolKind::Max,
                        "avg" => PoolKind::Avg,
                        other => return Err(Self::bad("network.pools", format!("unknown pool \"{other}\""))),
                    };
                }
                let filters: Vec<usize> = self
                    .get("network.filters")
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|e| Self::bad("network.filters", format!("{e}"))))
                    .collect::<Result<_, _>>()?;
                if filters.len() != 3 {
                    return Err(Self::bad("network.filters", "expected three comma-separated counts"));
                }
                Architecture::Block {
                    section_depth: self.get_usize("network.section_depth")?,
                    pools,
                    filters: [filters[0], filters[1], filters[2]],
                }
            }
            other => return Err(Self::bad("network.arch", format!("expected first or block, got \"{other}\""))),
        };
        Ok(NetworkConfig {
            input_height: self.get_usize("image.height")?,
            input_width: self.get_usize("image.width")?,
            input_channels,
            output_dim,
            arch,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        Ok(TrainConfig {
            initial_learning_rate: self.get_f64("train.initial_learning_rate")?,
            momentum: self.get_f64("train.momentum")?,
            mini_batch_size: self.get_usize("train.mini_batch_size")?,
            lr_drop_factor: self.get_f64("train.lr_drop_factor")?,
            lr_drop_period: self.get_usize("train.lr_drop_period")?,
            l2_coefficient: self.get_f64("train.l2_coefficient")?,
            epochs: self.get_usize("train.epochs")?,
            seed: self.get_u64("run.seed")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_key() {
        let map = ConfigMap::defaults();
        for (key, default) in CONFIG_KEYS {
            assert_eq!(map.get(key), *default);
        }
    }

    #[test]
    fn sectioned_file_overrides_defaults() {
        let mut map = ConfigMap::defaults();
        map.load_text(
            "[sampler]\nmethod = halton\nn_total = 24\n\n[train]\nepochs = 3\n",
            "test",
        )
        .unwrap();
        assert_eq!(map.get("sampler.method"), "halton");
        assert_eq!(map.get_usize("sampler.n_total").unwrap(), 24);
        assert_eq!(map.get_usize("train.epochs").unwrap(), 3);
        // Untouched keys keep defaults.
        assert_eq!(map.get("network.arch"), "block");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut map = ConfigMap::defaults();
        let err = map.load_text("[sampler]\nmehtod = sobol\n", "test").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(_)));
    }

    #[test]
    fn effective_text_round_trips() {
        let mut map = ConfigMap::defaults();
        map.set("train.epochs", "7").unwrap();
        map.set("sampler.split", "0.5,0.25,0.25").unwrap();
        let text = map.to_text();
        let mut back = ConfigMap::defaults();
        back.load_text(&text, "round-trip").unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.get_usize("train.epochs").unwrap(), 7);
    }

    #[test]
    fn grid_spans_the_band_inclusive() {
        let map = ConfigMap::defaults();
        let grid = map.wavelength_grid().unwrap();
        assert_eq!(grid.len(), 101);
        assert_eq!(grid[0], 300.0);
        assert_eq!(*grid.last().unwrap(), 800.0);
    }

    #[test]
    fn dotted_keys_work_without_sections() {
        let mut map = ConfigMap::defaults();
        map.load_text("train.epochs = 9\n", "test").unwrap();
        assert_eq!(map.get_usize("train.epochs").unwrap(), 9);
    }
}
