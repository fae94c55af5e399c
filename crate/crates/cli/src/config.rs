use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use harcascade::cost::McuProfile;
use harcascade::data::SynthSpec;
use harcascade::search::{config_hash, SweepConfig};

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synth {
        #[serde(default = "default_preset")]
        preset: String,
        /// Overrides the per-class training window count of the preset.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_count: Option<usize>,
        /// Overrides the per-class test window count of the preset.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_count: Option<usize>,
    },
    Hapt {
        root: PathBuf,
        /// File listing test subject ids; the official split when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        split: Option<PathBuf>,
    },
}

fn default_preset() -> String {
    "default".into()
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth { preset: default_preset(), train_count: None, test_count: None }
    }
}

impl DataSource {
    pub fn synth_spec(preset: &str, train_count: Option<usize>, test_count: Option<usize>) -> Result<SynthSpec> {
        let mut spec = match preset {
            "default" => SynthSpec::default(),
            other => bail!("unknown synthetic preset {other:?} (known: default)"),
        };
        for c in &mut spec.classes {
            c.train_count = train_count.unwrap_or(c.train_count);
            c.test_count = test_count.unwrap_or(c.test_count);
        }
        Ok(spec)
    }
}

/// Config file layout; every section is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data: Option<DataSource>,
    profile: Option<McuProfile>,
    profile_path: Option<PathBuf>,
    sweep: Option<SweepConfig>,
}

/// Fully resolved run configuration; its hash stamps every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    pub profile: McuProfile,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn seed(&self) -> u64 {
        self.sweep.seed
    }

    /// Reads `explicit`, else `<out>/config.toml` when present, else defaults.
    pub fn load(explicit: Option<&Path>, out_dir: &Path) -> Result<Self> {
        let stored = out_dir.join(CONFIG_FILE);
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None if stored.exists() => Some(stored),
            None => None,
        };
        let file: ConfigFile = match &path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => ConfigFile::default(),
        };
        let data = file.data.unwrap_or_default();
        let profile = match (file.profile, file.profile_path) {
            (Some(_), Some(_)) => bail!("config sets both [profile] and profile_path"),
            (Some(p), None) => p,
            (None, Some(p)) => {
                let text = fs::read_to_string(&p).with_context(|| format!("reading profile {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing profile {}", p.display()))?
            }
            (None, None) => McuProfile::default(),
        };
        let sweep = file.sweep.unwrap_or_else(|| match data {
            DataSource::Synth { .. } => SweepConfig::synthetic(),
            DataSource::Hapt { .. } => SweepConfig::default(),
        });
        Ok(RunConfig { data, profile, sweep })
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.sweep.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            data: &'a DataSource,
            profile: &'a McuProfile,
            sweep: &'a SweepConfig,
        }
        Ok(toml::to_string(&Out { data: &self.data, profile: &self.profile, sweep: &self.sweep })?)
    }
}
